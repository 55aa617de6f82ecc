"""One-particle Dirac space with charge sectors, and a number-truncated
fermionic Fock space with CAR operators and second quantization.

Mode ordering contract (documented, load-bearing for serialized matrices):
modes are indexed m = sector*(D*N) + d*N + site with sector 0 the electron
block (charge -1) and sector 1 the positron block (charge +1).  Occupation
basis states are bitsets over modes with popcount <= f_max, ordered by
(particle number, bitset value).  A basis state {m1 < ... < mk} is
a*_{m1} ... a*_{mk} |0>, and creation signs count occupied modes below the
created one (Jordan-Wigner convention).

Truncation convention: creation out of the top number sector maps to zero.
Identities involving the fields are therefore asserted on "safe" input
sectors in the verification suites.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
import scipy.sparse as sp

from .lattice import Grid, ScalarTestFunction, TwistKernel, convolve

ELECTRON_CHARGE = -1
POSITRON_CHARGE = +1


class OneParticleSpace:
    """h = h_plus (+) h_minus over the grid, with ``internal_dim`` spectator
    components per site and the measure-weighted inner product dV*sum(conj(v)*w).

    Vectors are flat complex arrays of length M = 2*D*N; the positron block
    stores the conjugate-embedded component (the "bar" representation).
    """

    def __init__(self, grid: Grid, internal_dim: int = 1):
        if internal_dim < 1:
            raise ValueError("internal_dim must be >= 1")
        self.grid = grid
        self.internal_dim = internal_dim
        self.block = internal_dim * grid.nsites
        self.nmodes = 2 * self.block
        self.mode_charge = np.concatenate([
            np.full(self.block, ELECTRON_CHARGE),
            np.full(self.block, POSITRON_CHARGE),
        ])
        # site index of every mode (used by diagonal multiplication operators)
        self.mode_site = np.tile(np.arange(grid.nsites), 2 * internal_dim)

    def inner(self, v: np.ndarray, w: np.ndarray) -> complex:
        return complex(self.grid.cell_volume * np.vdot(v, w))

    def norm(self, v: np.ndarray) -> float:
        return float(np.sqrt(abs(self.inner(v, v))))

    def embed_electron(self, w: np.ndarray) -> np.ndarray:
        """w (+) 0 for an electron-sector function of length D*N."""
        w = np.asarray(w, dtype=complex)
        if w.shape != (self.block,):
            raise ValueError(f"electron vector must have length {self.block}")
        return np.concatenate([w, np.zeros(self.block, dtype=complex)])

    def embed_positron(self, w: np.ndarray) -> np.ndarray:
        """0 (+) w for a positron-sector (bar-stored) function."""
        w = np.asarray(w, dtype=complex)
        if w.shape != (self.block,):
            raise ValueError(f"positron vector must have length {self.block}")
        return np.concatenate([np.zeros(self.block, dtype=complex), w])

    def electron_part(self, v: np.ndarray) -> np.ndarray:
        return v[: self.block]

    def positron_part(self, v: np.ndarray) -> np.ndarray:
        return v[self.block:]

    def kappa(self, v: np.ndarray) -> np.ndarray:
        """Antilinear conjugation: swap sectors, conjugate components."""
        v = np.asarray(v, dtype=complex)
        return np.conj(np.concatenate([v[self.block:], v[: self.block]]))

    def in_electron_sector(self, v: np.ndarray, tol: float = 0.0) -> bool:
        return bool(np.max(np.abs(self.positron_part(v)), initial=0.0) <= tol)

    def multiplication_diag(self, c: np.ndarray, sign_flip: bool = True) -> np.ndarray:
        """Diagonal of the operator multiplying by -c on electrons, +c on
        positrons (the infinitesimal twist); with ``sign_flip=False`` both
        sectors get +c."""
        c = np.asarray(c, dtype=float)
        if c.shape != (self.grid.nsites,):
            raise ValueError("field must be a flat real array on the grid")
        block = np.tile(c, self.internal_dim)
        if sign_flip:
            return np.concatenate([-block, +block])
        return np.concatenate([block, block])

    def site_shift_permutation(self, shift) -> np.ndarray:
        """Mode permutation p with (U_a w)(x) = w(x - a): p[source] = target."""
        src = np.arange(self.grid.nsites)
        coords = np.array(np.unravel_index(src, self.grid.shape)).T
        shifted = (coords + np.atleast_1d(np.asarray(shift, dtype=int))) % self.grid.n
        tgt = np.ravel_multi_index(shifted.T, self.grid.shape)
        perm = np.empty(self.nmodes, dtype=int)
        for sector in range(2):
            for d in range(self.internal_dim):
                base = sector * self.block + d * self.grid.nsites
                perm[base + src] = base + tgt
        return perm


@dataclass(frozen=True)
class OneParticleOperator:
    """M x M operator with verified structure flags."""

    matrix: np.ndarray
    diagonal: bool
    sector_preserving: bool

    @classmethod
    def from_diag(cls, diag: np.ndarray) -> "OneParticleOperator":
        return cls(np.diag(diag), True, True)

    @classmethod
    def from_matrix(cls, mat: np.ndarray, space: OneParticleSpace) -> "OneParticleOperator":
        mat = np.asarray(mat, dtype=complex)
        diagonal = bool(np.allclose(mat, np.diag(np.diag(mat)), atol=1e-14))
        b = space.block
        off = np.max(np.abs(mat[:b, b:])) + np.max(np.abs(mat[b:, :b]))
        return cls(mat, diagonal, bool(off <= 1e-14))

    @property
    def diag(self) -> np.ndarray:
        return np.diag(self.matrix)


def stone_generator(kernel: TwistKernel, s: ScalarTestFunction,
                    space: OneParticleSpace) -> np.ndarray:
    """Diagonal of the twist generator: -(sigma*s0) on electrons, + on positrons.

    Linear in s0 by linearity of the convolution; the grid-level stand-in
    for continuity in the test-function argument is checked in the suites.
    """
    c = convolve(kernel, s.s0)
    return space.multiplication_diag(c, sign_flip=True)


def twist_unitary(kernel: TwistKernel, s: ScalarTestFunction,
                  space: OneParticleSpace) -> np.ndarray:
    """Diagonal of u = exp(i * stone_generator); phases exp(-i sigma*s0) on
    the electron block, exp(+i sigma*s0) on the positron block."""
    return np.exp(1j * stone_generator(kernel, s, space))


def _popcount_below(bits: int, m: int) -> int:
    return bin(bits & ((1 << m) - 1)).count("1")


class FermionFockSpace:
    """Occupation-bitset fermionic Fock space truncated at ``f_max`` particles."""

    def __init__(self, space: OneParticleSpace, f_max: int = 2):
        if f_max < 0:
            raise ValueError("f_max must be >= 0")
        self.space = space
        self.f_max = f_max
        M = space.nmodes

        states: list[tuple[int, tuple]] = []
        for k in range(f_max + 1):
            combos = [(sum(1 << m for m in c), c) for c in combinations(range(M), k)]
            combos.sort(key=lambda t: t[0])
            states.extend(combos)
        self.bitsets = [b for b, _ in states]
        self.modes = [c for _, c in states]
        self.index = {b: i for i, b in enumerate(self.bitsets)}
        self.dim = len(self.bitsets)

        self.occ = np.zeros((self.dim, M), dtype=bool)
        for i, c in enumerate(self.modes):
            for m in c:
                self.occ[i, m] = True
        self.number = self.occ.sum(axis=1)
        self.charge = self.occ @ space.mode_charge

        self._create_cache: dict[int, sp.csc_matrix] = {}

    # -- basis helpers ------------------------------------------------------

    @property
    def vacuum_index(self) -> int:
        return 0

    def vacuum(self) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[0] = 1.0
        return v

    def number_mask(self, n_max: int) -> np.ndarray:
        return self.number <= n_max

    def charge_mask(self, q: int) -> np.ndarray:
        return self.charge == q

    # -- canonical mode operators -------------------------------------------

    def mode_create(self, m: int) -> sp.csc_matrix:
        """Canonical creation on mode m ({A_i, A*_j} = delta_ij)."""
        cached = self._create_cache.get(m)
        if cached is not None:
            return cached
        rows, cols, data = [], [], []
        src = np.nonzero(~self.occ[:, m] & (self.number < self.f_max))[0]
        for i in src:
            bits = self.bitsets[i]
            target = self.index[bits | (1 << m)]
            sign = -1.0 if _popcount_below(bits, m) % 2 else 1.0
            rows.append(target)
            cols.append(i)
            data.append(sign)
        mat = sp.csc_matrix((data, (rows, cols)), shape=(self.dim, self.dim))
        self._create_cache[m] = mat
        return mat

    def create_canonical(self, v: np.ndarray) -> sp.csc_matrix:
        """Sum_m v_m A*_m (basis-level lift, no measure weight)."""
        v = np.asarray(v, dtype=complex)
        out = sp.csc_matrix((self.dim, self.dim), dtype=complex)
        for m in np.nonzero(np.abs(v) > 0)[0]:
            out = out + v[m] * self.mode_create(int(m))
        return out

    # -- measure-weighted CAR operators --------------------------------------

    def a_create(self, w: np.ndarray) -> sp.csc_matrix:
        """a*(w) with {a(v), a*(w)} = <v, w> (dV-weighted inner product)."""
        w = np.asarray(w, dtype=complex)
        if w.shape != (self.space.nmodes,):
            raise ValueError(f"one-particle vector must have length {self.space.nmodes}")
        return np.sqrt(self.space.grid.cell_volume) * self.create_canonical(w)

    def a_annihilate(self, w: np.ndarray) -> sp.csc_matrix:
        """a(w) = a*(w)^dagger; antilinear in w."""
        return sp.csc_matrix(self.a_create(w).conj().T)

    def psi(self, w: np.ndarray) -> sp.csc_matrix:
        """Electron field 2^{-1/2} (a*(w (+) 0) + a(0 (+) conj(w))); linear in w."""
        w = np.asarray(w, dtype=complex)
        if w.shape == (self.space.nmodes,):
            if not self.space.in_electron_sector(w):
                raise ValueError("psi takes an electron-sector function")
            w = self.space.electron_part(w)
        plus = self.a_create(self.space.embed_electron(w))
        minus = self.a_annihilate(self.space.embed_positron(np.conj(w)))
        return sp.csc_matrix((plus + minus) / np.sqrt(2.0))

    def psi_selfdual(self, w: np.ndarray) -> sp.csc_matrix:
        """Self-dual field 2^{-1/2} (a*(w) + a(kappa w)) on the full space."""
        w = np.asarray(w, dtype=complex)
        return sp.csc_matrix(
            (self.a_create(w) + self.a_annihilate(self.space.kappa(w))) / np.sqrt(2.0)
        )

    # -- second quantization --------------------------------------------------

    def gamma_diag(self, u_diag: np.ndarray) -> np.ndarray:
        """Diagonal of Gamma(U) for diagonal U: basis-state products of phases."""
        u_diag = np.asarray(u_diag, dtype=complex)
        return np.prod(np.where(self.occ, u_diag[None, :], 1.0), axis=1)

    def dgamma_diag(self, a_diag: np.ndarray) -> np.ndarray:
        """Diagonal of dGamma(A) for diagonal A: sums over occupied modes."""
        return self.occ @ np.asarray(a_diag)

    def dgamma(self, a_mat: np.ndarray, check: bool = True) -> sp.csc_matrix:
        """dGamma(A) = sum_lm A_lm A*_l A_m for a selfadjoint one-particle matrix."""
        a_mat = np.asarray(a_mat, dtype=complex)
        if check and np.max(np.abs(a_mat - a_mat.conj().T)) > 1e-12:
            raise ValueError("dGamma requires a selfadjoint one-particle operator")
        out = sp.csc_matrix((self.dim, self.dim), dtype=complex)
        for m in range(self.space.nmodes):
            col = a_mat[:, m]
            if np.max(np.abs(col)) == 0.0:
                continue
            ann = sp.csc_matrix(self.mode_create(m).conj().T)
            out = out + self.create_canonical(col) @ ann
        return out

    def gamma_unitary(self, u_mat: np.ndarray, check: bool = True) -> np.ndarray:
        """Gamma(U) for a general unitary U (dense; intended for M <= 64)."""
        u_mat = np.asarray(u_mat, dtype=complex)
        if check:
            defect = np.max(np.abs(u_mat.conj().T @ u_mat - np.eye(self.space.nmodes)))
            if defect > 1e-12:
                raise ValueError(f"gamma_unitary requires a unitary input (defect {defect:.2e})")
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for i, modes in enumerate(self.modes):
            vec = self.vacuum()
            for m in reversed(modes):
                vec = self.create_canonical(u_mat[:, m]) @ vec
            out[:, i] = vec
        return out

    def gamma_permutation(self, perm: np.ndarray) -> sp.csc_matrix:
        """Gamma(U_perm) with sign = parity of sorting the permuted mode list."""
        perm = np.asarray(perm, dtype=int)
        rows, cols, data = [], [], []
        for i, modes in enumerate(self.modes):
            mapped = [int(perm[m]) for m in modes]
            sign = 1.0
            arr = list(mapped)
            for a in range(len(arr)):
                for b in range(a + 1, len(arr)):
                    if arr[a] > arr[b]:
                        sign = -sign
            target = self.index[sum(1 << m for m in mapped)]
            rows.append(target)
            cols.append(i)
            data.append(sign)
        return sp.csc_matrix((data, (rows, cols)), shape=(self.dim, self.dim))

    def number_diag(self) -> np.ndarray:
        return self.number.astype(float)

    def charge_diag(self) -> np.ndarray:
        return self.charge.astype(float)

    def kappa_fock(self) -> "AntilinearFockOp":
        """Gamma(kappa) = componentwise conjugation after the sector swap."""
        b = self.space.block
        perm = np.concatenate([np.arange(b) + b, np.arange(b)])
        return AntilinearFockOp(self.gamma_permutation(perm))

    def translate(self, shift) -> sp.csc_matrix:
        """Gamma of the lattice translation by an integer shift vector."""
        return self.gamma_permutation(self.space.site_shift_permutation(shift))

    # -- vectors ---------------------------------------------------------------

    def product_vector(self, vectors: list) -> np.ndarray:
        """a*(w_1) ... a*(w_k) |0>, not normalized."""
        if len(vectors) > self.f_max:
            raise ValueError("more factors than the truncation admits")
        vec = self.vacuum()
        for w in reversed(list(vectors)):
            vec = self.a_create(w) @ vec
        return vec


@dataclass(frozen=True)
class AntilinearFockOp:
    """Antilinear map v -> G conj(v); the conjugation is kept explicit so
    anticommutator checks can compose it correctly."""

    matrix: sp.csc_matrix

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ np.conj(v)

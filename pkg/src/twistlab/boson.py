"""Truncated bosonic Fock space over a small orthonormal mode set.

The mode set is spanned by a handful of user-supplied smeared functions
(orthonormalized by Gram-Schmidt); any test function used on this factor
must lie in the span up to a declared residual tolerance, which keeps the
restriction explicit instead of silent.

Occupation basis: tuples (n_1, ..., n_K) with sum <= n_max, ordered by
(shell, lexicographic).  Creation out of the top shell maps to zero.
"""

from __future__ import annotations

from math import factorial

import numpy as np
from scipy.linalg import expm

from .lattice import Grid, ScalarTestFunction


class SpanResidualError(ValueError):
    """A smeared function falls outside the registered mode span."""

    def __init__(self, residual: float, tol: float, label: str = ""):
        self.residual = residual
        self.tol = tol
        super().__init__(
            f"span residual {residual:.3e} exceeds tolerance {tol:.3e}"
            + (f" for {label}" if label else "")
        )


class ModeBasis:
    """K orthonormal complex one-particle modes on the grid (K <= 6).

    ``components`` > 1 admits vector-valued modes stored as flattened
    (components * N,) arrays with the same dV-weighted inner product.
    """

    def __init__(self, grid: Grid, generators: list, tol: float = 1e-9,
                 rank_tol: float = 1e-10, components: int = 1):
        self.grid = grid
        self.tol = tol
        self.components = components
        vecs = []
        for g in generators:
            g = np.asarray(g, dtype=complex)
            if g.shape != (components * grid.nsites,):
                raise ValueError("generators must be flat complex fields on the grid")
            v = g.copy()
            for u in vecs:
                v = v - grid.inner(u, v) * u
            nrm = grid.norm(v)
            if nrm > rank_tol:
                vecs.append(v / nrm)
        if not vecs:
            raise ValueError("generators span a trivial space")
        if len(vecs) > 6:
            raise ValueError("mode basis is limited to K <= 6")
        self.modes = np.array(vecs)  # (K, N)
        self.k = len(vecs)

    def gram_defect(self) -> float:
        g = self.grid.cell_volume * (self.modes.conj() @ self.modes.T)
        return float(np.max(np.abs(g - np.eye(self.k))))

    def coefficients(self, f: np.ndarray) -> tuple:
        """(coeffs, residual) of the projection of f onto the span."""
        f = np.asarray(f, dtype=complex)
        coeffs = self.grid.cell_volume * (self.modes.conj() @ f)
        resid = self.grid.norm(f - coeffs @ self.modes)
        return coeffs, float(resid)

    def require(self, f: np.ndarray, label: str = "") -> np.ndarray:
        coeffs, resid = self.coefficients(f)
        if resid > self.tol:
            raise SpanResidualError(resid, self.tol, label)
        return coeffs

    def shift_residual(self, shift) -> float:
        """How far lattice translation moves the span off itself."""
        worst = 0.0
        for u in self.modes:
            _, resid = self.coefficients(self.grid.translate(u, shift))
            worst = max(worst, resid)
        return worst

    def shift_matrix(self, shift) -> np.ndarray:
        """K x K matrix of the translation restricted to the span."""
        shifted = np.array([self.grid.translate(u, shift) for u in self.modes])
        return self.grid.cell_volume * (self.modes.conj() @ shifted.T)


def _occupations(k: int, n_max: int) -> list:
    out = []
    for shell in range(n_max + 1):
        shell_occ = []

        def rec(prefix, left, slots):
            if slots == 1:
                shell_occ.append(tuple(prefix + [left]))
                return
            for n in range(left + 1):
                rec(prefix + [n], left - n, slots - 1)

        rec([], shell, k)
        shell_occ.sort()
        out.extend(shell_occ)
    return out


class BosonFockSpace:
    """Symmetric Fock space over a ModeBasis, truncated at total number n_max."""

    def __init__(self, basis: ModeBasis, n_max: int = 8):
        if n_max < 0:
            raise ValueError("n_max must be >= 0")
        self.basis = basis
        self.n_max = n_max
        self.occupations = _occupations(basis.k, n_max)
        self.index = {o: i for i, o in enumerate(self.occupations)}
        self.dim = len(self.occupations)
        self.shells = np.array([sum(o) for o in self.occupations])
        self._create_cache: dict[int, np.ndarray] = {}

    @property
    def grid(self) -> Grid:
        return self.basis.grid

    def vacuum(self) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[0] = 1.0
        return v

    def shell_mask(self, max_shell: int) -> np.ndarray:
        return self.shells <= max_shell

    def mode_create(self, j: int) -> np.ndarray:
        """Ladder b*_j with sqrt factors; zero out of the top shell."""
        cached = self._create_cache.get(j)
        if cached is not None:
            return cached
        mat = np.zeros((self.dim, self.dim))
        for i, occ in enumerate(self.occupations):
            if self.shells[i] >= self.n_max:
                continue
            target = list(occ)
            target[j] += 1
            t = self.index[tuple(target)]
            mat[t, i] = np.sqrt(occ[j] + 1.0)
        self._create_cache[j] = mat
        return mat

    def b_create(self, f: np.ndarray, label: str = "") -> np.ndarray:
        """b*(f) = sum_j <u_j, f> b*_j; f must lie in the span."""
        coeffs = self.basis.require(f, label)
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for j, c in enumerate(coeffs):
            if c != 0:
                out += c * self.mode_create(j)
        return out

    def b_annihilate(self, f: np.ndarray, label: str = "") -> np.ndarray:
        return self.b_create(f, label).conj().T

    def segal_from_smearing(self, f: np.ndarray, label: str = "") -> np.ndarray:
        """2^{-1/2} (b(f) + b*(f)) for a complex smearing f; selfadjoint."""
        cre = self.b_create(f, label)
        return (cre + cre.conj().T) / np.sqrt(2.0)

    def segal_field(self, s: ScalarTestFunction, label: str = "") -> np.ndarray:
        """phi(s) with smearing f = s0 + i s1."""
        return self.segal_from_smearing(s.smearing(), label)

    def weyl_from_smearing(self, f: np.ndarray, label: str = "") -> np.ndarray:
        return expm(1j * self.segal_from_smearing(f, label))

    def weyl(self, s: ScalarTestFunction, label: str = "") -> np.ndarray:
        """W(s) = exp(i phi(s)); exactly unitary on the truncated space."""
        return expm(1j * self.segal_field(s, label))

    def number_diag(self) -> np.ndarray:
        return self.shells.astype(float)

    def gamma_diag(self, mode_phases: np.ndarray) -> np.ndarray:
        """Diagonal second quantization of a mode-diagonal unitary."""
        phases = np.asarray(mode_phases, dtype=complex)
        occ = np.array(self.occupations)
        return np.prod(phases[None, :] ** occ, axis=1)

    def gamma_unitary(self, k_matrix: np.ndarray) -> np.ndarray:
        """Second quantization of a K x K unitary on the mode span.

        Column construction |n> -> prod_j b*(K e_j)^{n_j} / sqrt(n_j!) |0>;
        shell-preserving, hence exact on the truncated space.
        """
        k_matrix = np.asarray(k_matrix, dtype=complex)
        col_ops = [sum(k_matrix[l, j] * self.mode_create(l) for l in range(self.basis.k))
                   for j in range(self.basis.k)]
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for i, occ in enumerate(self.occupations):
            vec = self.vacuum()
            norm = 1.0
            for j, nj in enumerate(occ):
                for _ in range(nj):
                    vec = col_ops[j] @ vec
                norm *= factorial(nj)
            out[:, i] = vec / np.sqrt(norm)
        return out

    def vacuum_expectation(self, mat: np.ndarray) -> complex:
        return complex(mat[0, 0])

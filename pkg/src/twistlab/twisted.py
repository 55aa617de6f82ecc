"""The composite twisted field system on (fermion Fock) x (boson Fock).

Twisted Weyl operators factor as Gamma(u_twist) x W(s) with Gamma diagonal
in the occupation basis, so every composite identity collapses to small
dense/sparse factor computations; Frobenius norms of Kronecker products
factor as products of factor norms.  Residuals are reported on "safe"
columns (fermion number <= f_max - 1, boson shell <= n_max - 2) where the
identities are exact up to float rounding.

Kronecker-sum norms are only ever evaluated on terms that are individually
small, so the Gram expansion in :func:`kron_frob_sum` never suffers
catastrophic cancellation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm

from .boson import BosonFockSpace
from .fermion import FermionFockSpace, stone_generator, twist_unitary
from .lattice import (
    DiffOp,
    ScalarTestFunction,
    TwistKernel,
    convolve,
    minkowski_sum,
    support_sites,
    symplectic_form,
)


# ---------------------------------------------------------------------------
# column-restricted Frobenius norms for Kronecker-factored operators
# ---------------------------------------------------------------------------

def frob_cols(a, mask=None) -> float:
    """Frobenius norm of a[:, mask]; `a` sparse, dense, or 1-d (diagonal)."""
    if not sp.issparse(a) and np.ndim(a) == 1:
        d = a if mask is None else a[mask]
        return float(np.sqrt(np.sum(np.abs(d) ** 2)))
    if sp.issparse(a):
        sub = a.tocsc()[:, mask] if mask is not None else a
        return float(np.sqrt(abs((sub.conj().multiply(sub)).sum())))
    sub = a if mask is None else a[:, mask]
    return float(np.linalg.norm(sub))


def _pair_trace(a, b, mask=None) -> complex:
    """tr(P a^dagger b P) over masked columns; 1-d arrays mean diagonals."""
    a_diag = not sp.issparse(a) and np.ndim(a) == 1
    b_diag = not sp.issparse(b) and np.ndim(b) == 1
    if a_diag and b_diag:
        da = a if mask is None else a[mask]
        db = b if mask is None else b[mask]
        return complex(np.vdot(da, db))
    if a_diag:
        dia = np.asarray(b.diagonal()).ravel()
        da, db = (a, dia) if mask is None else (a[mask], dia[mask])
        return complex(np.sum(np.conj(da) * db))
    if b_diag:
        return complex(np.conj(_pair_trace(b, a, mask)))
    am = a.tocsc()[:, mask] if sp.issparse(a) else (a if mask is None else a[:, mask])
    bm = b.tocsc()[:, mask] if sp.issparse(b) else (b if mask is None else b[:, mask])
    if sp.issparse(am) and sp.issparse(bm):
        return complex((am.conj().multiply(bm)).sum())
    if sp.issparse(am):
        am = am.toarray()
    if sp.issparse(bm):
        bm = bm.toarray()
    return complex(np.vdot(am, bm))


def kron_frob_sum(terms, masks=None) -> float:
    """Frobenius norm of sum_i F_i1 (x) F_i2 (x) ... on masked columns.

    ``terms`` is a sequence of factor tuples (one factor per tensor slot),
    ``masks`` an optional per-slot sequence of column masks.  Exact Gram
    expansion; callers must pass terms whose individual norms are already
    small (residual decompositions), never large cancelling pairs.
    """
    nslots = len(terms[0])
    if masks is None:
        masks = (None,) * nslots
    total = 0.0
    for ta in terms:
        for tb in terms:
            prod = 1.0 + 0.0j
            for slot in range(nslots):
                prod *= _pair_trace(ta[slot], tb[slot], masks[slot])
            total += prod.real
    return float(np.sqrt(max(total, 0.0)))


# ---------------------------------------------------------------------------
# composite operators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TwistedWeylOp:
    """W_twisted(s) = diag(gamma) (x) W(s)."""

    gamma: np.ndarray      # fermionic Fock diagonal of Gamma(u_twist)
    weyl: np.ndarray       # boson factor, exactly unitary

    def expectation(self, fermi_vec: np.ndarray, bose_vec: np.ndarray) -> complex:
        f = complex(np.vdot(fermi_vec, self.gamma * fermi_vec))
        b = complex(np.vdot(bose_vec, self.weyl @ bose_vec))
        return f * b


@dataclass(frozen=True)
class TwistedFieldOp:
    """phi_twisted(s) = dGamma(mu) (x) I + I (x) phi(s), dGamma diagonal."""

    dgamma: np.ndarray     # fermionic Fock diagonal
    segal: np.ndarray      # boson factor, Hermitian

    def exp(self) -> TwistedWeylOp:
        return TwistedWeylOp(np.exp(1j * self.dgamma), expm(1j * self.segal))


class ChargedVector:
    """Normalized antisymmetrized product vector (tensored with the boson
    vacuum wherever a composite expectation is taken).

    ``tagged`` is a sequence of (sector function, charge) pairs, charge -1
    for electrons (stored in h_plus) and +1 for positrons (the stored bar
    component).  The charge of the state is the sum of the tags.
    """

    def __init__(self, fock: FermionFockSpace, tagged):
        self.fock = fock
        self.tagged = tuple((np.asarray(f, dtype=complex), int(q)) for f, q in tagged)
        space = fock.space
        embedded = []
        for f, q in self.tagged:
            if q == -1:
                embedded.append(space.embed_electron(f))
            elif q == +1:
                embedded.append(space.embed_positron(f))
            else:
                raise ValueError("charge tags must be -1 or +1")
        self._embedded = embedded
        raw = fock.product_vector(embedded)
        nrm = np.linalg.norm(raw)
        if nrm < 1e-13:
            raise ValueError("charged vector normalization failure (dependent factors?)")
        self.vec = raw / nrm

    @property
    def charge(self) -> int:
        return sum(q for _, q in self.tagged)

    @property
    def size(self) -> int:
        return len(self.tagged)

    def embedded_vectors(self) -> list:
        return list(self._embedded)

    def gram(self) -> np.ndarray:
        space = self.fock.space
        e = self._embedded
        return np.array([[space.inner(a, b) for b in e] for a in e])

    def support(self, tol: float) -> np.ndarray:
        space = self.fock.space
        amp = np.zeros(space.grid.nsites)
        for v in self._embedded:
            np.maximum.at(amp, space.mode_site, np.abs(v))
        return amp > tol

    def site_density(self) -> np.ndarray:
        """One-particle vectors only: normalized |f(x)|^2 (dV * sum = 1)."""
        if self.size != 1:
            raise ValueError("site density is defined for one-particle vectors")
        space = self.fock.space
        v = self._embedded[0]
        dens = np.bincount(space.mode_site, weights=np.abs(v) ** 2,
                           minlength=space.grid.nsites)
        return dens / (space.grid.cell_volume * dens.sum())


@dataclass
class RelationReport:
    """Residual record for one verified identity."""

    residual: float
    details: dict = field(default_factory=dict)


class TwistedSystem:
    """Twisted Weyl/field representation for one kernel on one composite space."""

    def __init__(self, kernel: TwistKernel, fock: FermionFockSpace,
                 bose: BosonFockSpace, diffop: DiffOp | None = None,
                 mean_zero: bool = False):
        self.kernel = kernel
        self.fock = fock
        self.bose = bose
        self.diffop = diffop
        self.mean_zero = mean_zero
        self.grid = kernel.grid
        if fock.space.grid != self.grid or bose.grid != self.grid:
            raise ValueError("kernel, fermion and boson factors must share the grid")

    # -- basic fields -------------------------------------------------------

    def conv(self, s: ScalarTestFunction) -> np.ndarray:
        return convolve(self.kernel, s.s0)

    def mult_electron(self, c: np.ndarray, w: np.ndarray) -> np.ndarray:
        """Multiply an electron-sector function by a site field (internal
        components are spectators)."""
        return np.tile(np.asarray(c), self.fock.space.internal_dim) * np.asarray(w, dtype=complex)

    def safe_fermi_mask(self) -> np.ndarray:
        return self.fock.number_mask(self.fock.f_max - 1)

    def safe_bose_mask(self) -> np.ndarray:
        return self.bose.shell_mask(self.bose.n_max - 2)

    def gamma_twist_diag(self, s: ScalarTestFunction) -> np.ndarray:
        return self.fock.gamma_diag(twist_unitary(self.kernel, s, self.fock.space))

    def dgamma_twist_diag(self, s: ScalarTestFunction) -> np.ndarray:
        return self.fock.dgamma_diag(stone_generator(self.kernel, s, self.fock.space))

    def twisted_weyl(self, s: ScalarTestFunction) -> TwistedWeylOp:
        return TwistedWeylOp(self.gamma_twist_diag(s), self.bose.weyl(s))

    def twisted_field(self, s: ScalarTestFunction) -> TwistedFieldOp:
        return TwistedFieldOp(self.dgamma_twist_diag(s), self.bose.segal_field(s))

    def gaussian_functional(self, s: ScalarTestFunction) -> float:
        """Fock reference value omega(W(s)) = exp(-1/4 ||s0 + i s1||^2)."""
        return float(np.exp(-0.25 * self.grid.norm(s.smearing()) ** 2))

    # -- Weyl-relation checks -------------------------------------------------

    def weyl_cocycle_residual(self, s: ScalarTestFunction, t: ScalarTestFunction,
                              column_shell: int = 0) -> RelationReport:
        """|| W(s) W(t) - exp(+i eta(s,t)/2) W(s+t) || on low-shell columns.

        The cocycle sign is forced by [phi(s), phi(t)] = -i eta(s, t).  The
        twist diagonals compose exactly, so the residual sits entirely in
        the truncated boson factor; it is amplitude-tied, and the truncation
        error grows with the column shell, so the check anchors at the
        vacuum column by default.
        """
        eta = symplectic_form(s, t)
        gam = self.gamma_twist_diag(s) * self.gamma_twist_diag(t)
        gam_sum = self.gamma_twist_diag(s + t)
        bose_res = (self.bose.weyl(s) @ self.bose.weyl(t)
                    - np.exp(0.5j * eta) * self.bose.weyl(s + t))
        mask_b = self.bose.shell_mask(column_shell)
        resid = float(np.max(np.abs(gam))) * frob_cols(bose_res, mask_b)
        fermi_defect = float(np.max(np.abs(gam - gam_sum)))
        return RelationReport(resid, {"fermi_phase_defect": fermi_defect, "eta": eta})

    def weyl_inverse_residual(self, s: ScalarTestFunction) -> RelationReport:
        """|| W_twisted(s) W_twisted(-s) - I ||, full columns."""
        w = self.twisted_weyl(s)
        wi = self.twisted_weyl(-s)
        d_f = w.gamma * wi.gamma - 1.0
        prod_b = w.weyl @ wi.weyl
        d_b = prod_b - np.eye(self.bose.dim)
        terms = [(d_f, prod_b), (np.ones(self.fock.dim, dtype=complex), d_b)]
        return RelationReport(kron_frob_sum(terms))

    def verify_twisted_weyl_relation(self, s: ScalarTestFunction,
                                     w: np.ndarray) -> RelationReport:
        """Residual of W_twisted(s) psi(w) - psi(e^{-i sigma*s0} w) W_twisted(s)."""
        c = self.conv(s)
        gam = self.gamma_twist_diag(s)
        psi1 = self.fock.psi(w)
        psi2 = self.fock.psi(self.mult_electron(np.exp(-1j * c), w))
        rf = sp.diags(gam) @ psi1 - psi2 @ sp.diags(gam)
        mask_f = self.safe_fermi_mask()
        mask_b = self.safe_bose_mask()
        resid_f = frob_cols(rf, mask_f)
        resid = resid_f * frob_cols(self.bose.weyl(s), mask_b)
        comm = sp.diags(gam) @ psi1 - psi1 @ sp.diags(gam)
        return RelationReport(resid, {
            "fermionic_residual": resid_f,
            "commutator_norm": frob_cols(comm, mask_f),
        })

    def sector_shift_residual(self, s: ScalarTestFunction, w: np.ndarray,
                              q: int) -> RelationReport:
        """psi(e^{-i sigma*s0} w) W^{(q)}(s) = W^{(q-1)}(s) psi(w), charge-q columns."""
        c = self.conv(s)
        gam = self.gamma_twist_diag(s)
        psi1 = self.fock.psi(w)
        psi2 = self.fock.psi(self.mult_electron(np.exp(-1j * c), w))
        rf = psi2 @ sp.diags(gam) - sp.diags(gam) @ psi1
        cols = self.safe_fermi_mask() & self.fock.charge_mask(q)
        resid = frob_cols(rf, cols) * frob_cols(self.bose.weyl(s), self.safe_bose_mask())
        return RelationReport(resid, {"charge_sector": q, "columns": int(cols.sum())})

    # -- infinitesimal relations ----------------------------------------------

    def verify_infinitesimal(self, s: ScalarTestFunction, w: np.ndarray) -> RelationReport:
        """[phi_twisted(s), psi(w)] + psi((sigma*s0) w) and the self-dual variant."""
        c = self.conv(s)
        d = self.dgamma_twist_diag(s)
        w = np.asarray(w, dtype=complex)
        psi1 = self.fock.psi(w)
        psi_cw = self.fock.psi(self.mult_electron(c, w))
        rf = sp.diags(d) @ psi1 - psi1 @ sp.diags(d) + psi_cw
        mask_f = self.safe_fermi_mask()
        resid_f = frob_cols(rf, mask_f)
        resid = resid_f * np.sqrt(self.safe_bose_mask().sum())

        space = self.fock.space
        wfull = space.embed_electron(w) if w.shape[0] == space.block else w
        mu = space.multiplication_diag(c)
        psih = self.fock.psi_selfdual(wfull)
        psih_mu = self.fock.psi_selfdual(mu * wfull)
        rf2 = sp.diags(d) @ psih - psih @ sp.diags(d) - psih_mu
        resid_sd = frob_cols(rf2, mask_f)
        return RelationReport(resid, {"self_dual_residual": resid_sd,
                                      "fermionic_residual": resid_f})

    # -- gauge generator --------------------------------------------------------

    def _require_diffop(self) -> DiffOp:
        if self.diffop is None:
            raise ValueError("no differential operator paired with this kernel")
        return self.diffop

    def verify_pairing(self) -> float:
        """|| P sigma - delta ||_infty (delta minus its mean under the
        mean-zero convention): the kernel really inverts the operator."""
        op = self._require_diffop()
        g = self.grid
        lhs = op.apply(self.kernel.values)
        rhs = np.zeros(g.nsites)
        rhs[0] = 1.0 / g.cell_volume
        if self.mean_zero:
            rhs = rhs - 1.0 / (g.nsites * g.cell_volume)
        return float(np.max(np.abs(lhs - rhs)))

    def gauge_generator(self, s: ScalarTestFunction) -> TwistedFieldOp:
        """rho(s) = phi_twisted(P s), the local-gauge generator."""
        return self.twisted_field(self._require_diffop().apply_pair(s))

    def verify_gauge(self, s: ScalarTestFunction, w: np.ndarray) -> RelationReport:
        """[rho(s), psi(w)] = -psi(s0 w) and its exponentiated version.

        Under the mean-zero convention (negative Laplacian) s0 must be
        mean-free for the printed identity to close on the torus.
        """
        op = self._require_diffop()
        ps = op.apply_pair(s)
        d = self.dgamma_twist_diag(ps)
        w = np.asarray(w, dtype=complex)
        psi1 = self.fock.psi(w)
        psi_s0w = self.fock.psi(self.mult_electron(s.s0, w))
        rf = sp.diags(d) @ psi1 - psi1 @ sp.diags(d) + psi_s0w
        mask_f = self.safe_fermi_mask()
        mask_b = self.safe_bose_mask()
        comm_resid = frob_cols(rf, mask_f) * np.sqrt(mask_b.sum())

        gam = np.exp(1j * d)
        psi_gauge = self.fock.psi(self.mult_electron(np.exp(-1j * s.s0), w))
        rf_exp = sp.diags(gam) @ psi1 @ sp.diags(np.conj(gam)) - psi_gauge
        wmat = self.bose.weyl(ps)
        unit_defect = wmat @ wmat.conj().T - np.eye(self.bose.dim)
        terms = [(rf_exp, np.eye(self.bose.dim)),
                 (psi_gauge, unit_defect)]
        exp_resid = kron_frob_sum(terms, (mask_f, mask_b))
        conv_defect = float(np.max(np.abs(
            convolve(self.kernel, op.apply(s.s0))
            - (s.s0 - np.mean(s.s0) if self.mean_zero else s.s0))))
        return RelationReport(comm_resid, {
            "exponentiated_residual": exp_resid,
            "fundamental_solution_defect": conv_defect,
        })

    def charge_detection_residual(self, s: ScalarTestFunction,
                                  w: np.ndarray) -> RelationReport:
        """With s0 == 1 on supp(w): [rho(s), psi(w)] = -psi(w)."""
        op = self._require_diffop()
        d = self.dgamma_twist_diag(op.apply_pair(s))
        psi1 = self.fock.psi(w)
        rf = sp.diags(d) @ psi1 - psi1 @ sp.diags(d) + psi1
        mask_f = self.safe_fermi_mask()
        return RelationReport(frob_cols(rf, mask_f) * np.sqrt(self.safe_bose_mask().sum()))

    # -- charged states -----------------------------------------------------------

    def charged_state_eval(self, omega: ChargedVector, s: ScalarTestFunction,
                           use_truncated_weyl: bool = True) -> dict:
        """<Omega, W_twisted(s) Omega> two ways: composite matrix expectation
        and the determinant closed form.  Both routes share the boson factor
        so their difference isolates the determinant identity; `state_value`
        carries the exact Gaussian reference functional instead.
        """
        gam = self.gamma_twist_diag(s)
        fermi_matrix = complex(np.vdot(omega.vec, gam * omega.vec))

        u = twist_unitary(self.kernel, s, self.fock.space)
        space = self.fock.space
        e = omega.embedded_vectors()
        mat = np.array([[space.inner(a, u * b) for b in e] for a in e])
        fermi_closed = complex(np.linalg.det(mat) / np.linalg.det(omega.gram()))

        if use_truncated_weyl:
            bose_vev = complex(self.bose.weyl(s)[0, 0])
        else:
            bose_vev = complex(self.gaussian_functional(s))
        matrix_value = fermi_matrix * bose_vev
        closed_value = fermi_closed * bose_vev
        return {
            "matrix": matrix_value,
            "closed_form": closed_value,
            "difference": abs(matrix_value - closed_value),
            "state_value": fermi_closed * self.gaussian_functional(s),
            "gaussian": self.gaussian_functional(s),
        }

    def localization_report(self, omega: ChargedVector, s: ScalarTestFunction,
                            tol: float) -> dict:
        """Compare the charged state against the reference on W(s) and W(Ps)."""
        g = self.grid
        supp_s = s.support(tol)
        supp_omega = omega.support(tol)
        supp_sigma = support_sites(self.kernel.values, tol)
        region = minkowski_sum(g, supp_omega, supp_sigma)
        disjoint_plain = not np.any(supp_s & region)

        ev = self.charged_state_eval(omega, s, use_truncated_weyl=False)
        diff_plain = abs(ev["state_value"] - ev["gaussian"])

        out = {
            "disjoint_plain": bool(disjoint_plain),
            "difference_plain": diff_plain,
            "kernel_support_sites": int(supp_sigma.sum()),
        }
        if self.diffop is not None:
            ps = self.diffop.apply_pair(s)
            evp = self.charged_state_eval(omega, ps, use_truncated_weyl=False)
            out["disjoint_subalgebra"] = bool(not np.any(supp_s & supp_omega))
            out["difference_subalgebra"] = abs(evp["state_value"] - evp["gaussian"])
        return out

    # -- m-point functions -----------------------------------------------------

    def npoint(self, omega: ChargedVector, s_list: list) -> complex:
        """<Omega, phi_twisted(s^1) ... phi_twisted(s^m) Omega> by exact
        expansion over which factors act on the fermionic leg."""
        m = len(s_list)
        if m > self.bose.n_max:
            raise ValueError("m exceeds the boson truncation")
        dgs = [self.dgamma_twist_diag(s) for s in s_list]
        phis = [self.bose.segal_field(s) for s in s_list]
        vac = self.bose.vacuum()
        total = 0.0 + 0.0j
        for r in range(m + 1):
            for j_set in combinations(range(m), r):
                diag = np.ones(self.fock.dim)
                for j in j_set:
                    diag = diag * dgs[j]
                fermi = complex(np.vdot(omega.vec, diag * omega.vec))
                if fermi == 0:
                    continue
                vec = vac
                for i in reversed([i for i in range(m) if i not in j_set]):
                    vec = phis[i] @ vec
                total += fermi * complex(np.vdot(vac, vec))
        return total

    def npoint_oracle(self, omega: ChargedVector, s_list: list) -> complex:
        """Partition-sum oracle: Wick moments for the untwisted Fock factor,
        direct grid quadrature for the multiplication-operator factor."""
        if omega.size != 1:
            raise ValueError("the oracle covers one-particle charged vectors")
        g = self.grid
        dens = omega.site_density()
        sign = -1.0 if omega.tagged[0][1] == -1 else 1.0
        cs = [sign * self.conv(s) for s in s_list]
        fs = [s.smearing() for s in s_list]

        def wick(idx: tuple) -> complex:
            if not idx:
                return 1.0 + 0.0j
            if len(idx) % 2:
                return 0.0 + 0.0j
            first, rest = idx[0], idx[1:]
            total = 0.0 + 0.0j
            for p, j in enumerate(rest):
                pair = 0.5 * g.inner(fs[first], fs[j])
                total += pair * wick(rest[:p] + rest[p + 1:])
            return total

        m = len(s_list)
        total = 0.0 + 0.0j
        for r in range(m + 1):
            for j_set in combinations(range(m), r):
                prod = np.ones(g.nsites)
                for j in j_set:
                    prod = prod * cs[j]
                fermi = g.cell_volume * np.sum(dens * prod)
                i_set = tuple(i for i in range(m) if i not in j_set)
                total += fermi * wick(i_set)
        return total

    def multiplier_moment(self, omega: ChargedVector, s_list: list) -> float:
        """w^sigma_k by quadrature (real: the multipliers are real fields)."""
        dens = omega.site_density()
        sign = -1.0 if omega.tagged[0][1] == -1 else 1.0
        prod = np.ones(self.grid.nsites)
        for s in s_list:
            prod = prod * (sign * self.conv(s))
        return float(self.grid.cell_volume * np.sum(dens * prod))

    def external_potential_gap(self, omega: ChargedVector, s1: ScalarTestFunction,
                               s2: ScalarTestFunction) -> float:
        """|w^sigma_2(s1,s2) - w^sigma_1(s1) w^sigma_1(s2)|: the covariance
        obstruction to an external-potential reading of the twisted field."""
        w2 = self.multiplier_moment(omega, [s1, s2])
        w1a = self.multiplier_moment(omega, [s1])
        w1b = self.multiplier_moment(omega, [s2])
        return abs(w2 - w1a * w1b)

    # -- worked examples -----------------------------------------------------------

    def lebesgue_check(self, s: ScalarTestFunction, w: np.ndarray) -> dict:
        """Constant-kernel model: phi_twisted(s) = phi(s) + <s0> Q, the sector
        formula, the charge-detecting commutator and the intertwiner relation.

        Sign convention: direct convolution with the constant kernel gives
        +<s0>, so the charge term enters as +<s0> Q, the commutator is
        [phi_twisted(s), psi(w)] = -<s0> psi(w), and the intertwiner phase
        is e^{+i <s0>} against the charge-lowering direction.
        """
        g = self.grid
        mean_s0 = float(g.integrate(s.s0))
        d = self.dgamma_twist_diag(s)
        q_diag = self.fock.charge_diag()
        charge_term_defect = float(np.max(np.abs(d - mean_s0 * q_diag)))

        sector_defects = {}
        for q in sorted(set(self.fock.charge.tolist())):
            mask = self.fock.charge_mask(q)
            sector_defects[int(q)] = float(np.max(np.abs(d[mask] - q * mean_s0), initial=0.0))

        psi1 = self.fock.psi(w)
        rf = sp.diags(d) @ psi1 - psi1 @ sp.diags(d) + mean_s0 * psi1
        mask_f = self.safe_fermi_mask()
        comm_resid = frob_cols(rf, mask_f) * np.sqrt(self.safe_bose_mask().sum())

        gam = self.gamma_twist_diag(s)
        inter = psi1 @ sp.diags(gam) - np.exp(1j * mean_s0) * (sp.diags(gam) @ psi1)
        inter_resid = frob_cols(inter, mask_f) * frob_cols(self.bose.weyl(s),
                                                           self.safe_bose_mask())
        return {
            "charge_term_defect": charge_term_defect,
            "sector_defects": sector_defects,
            "commutator_residual": comm_resid,
            "commutator_sign": -1.0,
            "intertwiner_residual": inter_resid,
            "intertwiner_phase_sign": +1.0,
            "mean_s0": mean_s0,
        }

    def yukawa_state_values(self, omega: ChargedVector, s: ScalarTestFunction) -> dict:
        """One-electron charged state: matrix expectation vs direct quadrature."""
        if omega.size != 1 or omega.tagged[0][1] != -1:
            raise ValueError("the quadrature form covers one-electron vectors")
        ev = self.charged_state_eval(omega, s, use_truncated_weyl=True)
        c = self.conv(s)
        dens = omega.site_density()
        quad = complex(self.grid.cell_volume * np.sum(dens * np.exp(-1j * c))
                       * self.gaussian_functional(s))
        return {
            "matrix": ev["matrix"],
            "quadrature": quad,
            "difference": abs(ev["matrix"] - quad),
        }

    # -- covariance ---------------------------------------------------------------

    def translation_covariance_residual(self, s: ScalarTestFunction,
                                        shift) -> RelationReport:
        """|| W_twisted(s_a) - V_a W_twisted(s) V_a* ||,
        V_a = Gamma(U_a) (x) Gamma_boson(shift on the mode span)."""
        g = self.grid
        span_resid = self.bose.basis.shift_residual(shift)
        if span_resid > self.bose.basis.tol:
            raise ValueError(
                f"boson mode span is not shift-closed (residual {span_resid:.2e})")
        s_a = ScalarTestFunction(g, g.translate(s.s0, shift), g.translate(s.s1, shift))

        gam_a = self.gamma_twist_diag(s_a)
        v_f = self.fock.translate(shift)
        conj_f = (v_f @ sp.diags(self.gamma_twist_diag(s)) @ v_f.conj().T).toarray()
        d_f = np.diag(gam_a) - conj_f

        w_a = self.bose.weyl(s_a)
        k = self.bose.basis.shift_matrix(shift)
        u_b = self.bose.gamma_unitary(k)
        conj_b = u_b @ self.bose.weyl(s) @ u_b.conj().T
        d_b = w_a - conj_b

        # exact split A1xB1 - A2xB2 = (A1-A2)xB1 + A2x(B1-B2); both terms small
        terms = [(d_f, w_a), (conj_f, d_b)]
        return RelationReport(kron_frob_sum(terms), {"span_residual": span_resid})

    # -- reducibility ----------------------------------------------------------------

    def conservation_residuals(self, s: ScalarTestFunction) -> dict:
        """[phi_twisted, N_f (x) I] and [phi_twisted, Q (x) I] vanish exactly:
        diagonal against diagonal on the fermionic leg."""
        d = self.dgamma_twist_diag(s)
        n = self.fock.number_diag()
        q = self.fock.charge_diag()
        return {
            "number": float(np.max(np.abs(d * n - n * d))),
            "charge": float(np.max(np.abs(d * q - q * d))),
        }

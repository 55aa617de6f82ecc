"""Transverse photon sector: projector, vector potential, electric field and
the gauge-sector commutation structure on (fermion) x (scalar boson) x
(transverse boson).

Conventions: the projector acts spectrally as delta_ij - k_i k_j/|k|^2 with
the k = 0 plane passed through unchanged (constants are divergence-free on
the torus); spectral derivatives zero the Nyquist plane, so check inputs
are built Nyquist-free.  The scalar kernel is the mean-zero fundamental
solution of the negative Laplacian, hence identities involving sigma * (-lap s0)
require mean-free s0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .boson import BosonFockSpace, ModeBasis
from .lattice import Grid, ScalarTestFunction, spectral_divergence, spectral_gradient
from .twisted import RelationReport, TwistedSystem, frob_cols, kron_frob_sum


@dataclass(frozen=True)
class VectorTestFunction:
    """Pair (f0, f1) of real vector fields, components stored as (dim, N)."""

    grid: Grid
    f0: np.ndarray
    f1: np.ndarray

    def __post_init__(self):
        for name in ("f0", "f1"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (self.grid.dim, self.grid.nsites):
                raise ValueError(f"{name} must have shape (dim, N)")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
            object.__setattr__(self, name, arr)

    @classmethod
    def zero(cls, grid: Grid) -> "VectorTestFunction":
        z = np.zeros((grid.dim, grid.nsites))
        return cls(grid, z, z.copy())

    def support(self, tol: float) -> np.ndarray:
        amp = np.maximum(np.max(np.abs(self.f0), axis=0), np.max(np.abs(self.f1), axis=0))
        return amp > tol


def transverse_projector(grid: Grid, v: np.ndarray) -> np.ndarray:
    """Spectral transverse projector; idempotent, symmetric, kills gradients.

    The k = 0 component passes through unchanged (convention, reported).
    """
    if grid.dim < 2:
        raise ValueError("the transverse projector needs dim >= 2")
    v = np.asarray(v)
    if v.shape != (grid.dim, grid.nsites):
        raise ValueError("vector field must have shape (dim, N)")
    ks = [k.ravel() for k in grid.wavenumber_components()]
    k2 = sum(k * k for k in ks)
    inv = np.zeros_like(k2)
    nz = k2 > 0
    inv[nz] = 1.0 / k2[nz]
    vhat = np.array([np.fft.fftn(v[a].reshape(grid.shape)).ravel() for a in range(grid.dim)])
    kdotv = sum(ks[a] * vhat[a] for a in range(grid.dim))
    out = np.empty_like(v, dtype=float)
    for a in range(grid.dim):
        proj = vhat[a] - ks[a] * inv * kdotv
        out[a] = np.fft.ifftn(proj.reshape(grid.shape)).real.ravel()
    return out


def eta_tr(f: VectorTestFunction, g: VectorTestFunction) -> float:
    """Transverse symplectic form dV * sum (f1 . P g0 - g1 . P f0)."""
    if f.grid != g.grid:
        raise ValueError("transverse test functions live on different grids")
    grid = f.grid
    pg0 = transverse_projector(grid, g.f0)
    pf0 = transverse_projector(grid, f.f0)
    return float(grid.cell_volume * (np.sum(f.f1 * pg0) - np.sum(g.f1 * pf0)))


def _flatten(v: np.ndarray) -> np.ndarray:
    return np.asarray(v).reshape(-1)


class TransverseSector:
    """Truncated Fock space over a span of transverse vector modes."""

    def __init__(self, grid: Grid, generators: list, n_max: int = 4,
                 tol: float = 1e-9):
        if grid.dim < 2:
            raise ValueError("transverse sector needs dim >= 2")
        self.grid = grid
        projected = [_flatten(transverse_projector(grid, np.asarray(g, dtype=float)))
                     for g in generators]
        self.basis = ModeBasis(grid, projected, tol=tol, components=grid.dim)
        self.bose = BosonFockSpace(self.basis, n_max=n_max)

    def divergence_defect(self) -> float:
        """max || div v || over basis modes (transversality check)."""
        worst = 0.0
        for mode in self.basis.modes:
            vec = mode.reshape(self.grid.dim, self.grid.nsites)
            for part in (vec.real, vec.imag):
                div = spectral_divergence(self.grid, part)
                worst = max(worst, float(np.max(np.abs(div))))
        return worst

    def smearing(self, f: VectorTestFunction) -> np.ndarray:
        return _flatten(transverse_projector(self.grid, f.f0)
                        + 1j * transverse_projector(self.grid, f.f1))

    def a_field(self, f0: np.ndarray, label: str = "A") -> np.ndarray:
        """Vector potential smeared with f0 (transverse Segal field)."""
        u = _flatten(transverse_projector(self.grid, np.asarray(f0, dtype=float)))
        return self.bose.segal_from_smearing(u, label)

    def a_dot(self, f1: np.ndarray, label: str = "Adot") -> np.ndarray:
        """Conjugate field smeared with f1."""
        u = 1j * _flatten(transverse_projector(self.grid, np.asarray(f1, dtype=float)))
        return self.bose.segal_from_smearing(u, label)

    def weyl(self, f: VectorTestFunction, label: str = "W_tr") -> np.ndarray:
        return self.bose.weyl_from_smearing(self.smearing(f), label)


class CoulombGaugeSystem:
    """Example-3 sector: scalar twisted system (Coulomb kernel) plus a
    transverse photon factor, with the full commutation structure."""

    def __init__(self, twisted: TwistedSystem, transverse: TransverseSector):
        if twisted.grid != transverse.grid:
            raise ValueError("scalar and transverse sectors must share the grid")
        self.tw = twisted
        self.tr = transverse
        self.grid = twisted.grid

    # -- helpers ------------------------------------------------------------

    def _scalar_pair(self, field0: np.ndarray) -> ScalarTestFunction:
        return ScalarTestFunction(self.grid, field0, np.zeros(self.grid.nsites))

    def _masks(self) -> tuple:
        return (self.tw.safe_fermi_mask(),
                self.tw.safe_bose_mask(),
                self.tr.bose.shell_mask(self.tr.bose.n_max - 2))

    def divergence(self, f: VectorTestFunction) -> np.ndarray:
        return spectral_divergence(self.grid, f.f0)

    # -- electric field -------------------------------------------------------

    def electric_field_parts(self, f: VectorTestFunction) -> dict:
        """E(f) = phi_twisted(div f, 0) - Adot(f.f0): returns the three factors."""
        div = self.divergence(f)
        s = self._scalar_pair(div)
        return {
            "fermi_diag": self.tw.dgamma_twist_diag(s),
            "scalar": self.tw.bose.segal_field(s),
            "transverse": self.tr.a_dot(f.f0),
            "conv_div": self.tw.conv(s),
            "div": div,
        }

    def div_e_parts(self, s0: np.ndarray) -> dict:
        """div E(s0) = -E(grad s0): Coulomb condition kills the Adot term."""
        grad = spectral_gradient(self.grid, s0)
        f = VectorTestFunction(self.grid, grad, np.zeros_like(grad))
        parts = self.electric_field_parts(f)
        return {
            "fermi_diag": -parts["fermi_diag"],
            "scalar": -parts["scalar"],
            "transverse": -parts["transverse"],
            "adot_norm": float(np.linalg.norm(parts["transverse"])),
        }

    # -- commutation checks -----------------------------------------------------

    def ccr_residual(self, f: VectorTestFunction, g: VectorTestFunction) -> RelationReport:
        """[A(f0), Adot(g1)] = i dV sum f0 . P g1 on interior shells."""
        a = self.tr.a_field(f.f0)
        adot = self.tr.a_dot(g.f1)
        target = 1j * self.grid.cell_volume * np.sum(
            f.f0 * transverse_projector(self.grid, g.f1))
        resid = (a @ adot - adot @ a) - target * np.eye(self.tr.bose.dim)
        mask = self.tr.bose.shell_mask(self.tr.bose.n_max - 2)
        return RelationReport(frob_cols(resid, mask), {"target": target.imag})

    def coulomb_condition_residual(self, s0: np.ndarray) -> RelationReport:
        """A(grad s0) = Adot(grad s0) = 0."""
        grad = spectral_gradient(self.grid, s0)
        a = self.tr.a_field(grad)
        adot = self.tr.a_dot(grad)
        return RelationReport(float(np.linalg.norm(a) + np.linalg.norm(adot)))

    def e_psi_residual(self, f: VectorTestFunction, w: np.ndarray) -> RelationReport:
        """[E(f), psi(w)] + psi((sigma * div f) w); the boson factors of E
        commute with psi identically, so the residual is fermionic."""
        parts = self.electric_field_parts(f)
        d = parts["fermi_diag"]
        psi1 = self.tw.fock.psi(w)
        psi_cw = self.tw.fock.psi(self.tw.mult_electron(parts["conv_div"], w))
        rf = sp.diags(d) @ psi1 - psi1 @ sp.diags(d) + psi_cw
        mf, m0, mtr = self._masks()
        resid = frob_cols(rf, mf) * np.sqrt(m0.sum()) * np.sqrt(mtr.sum())
        comm_norm = frob_cols(sp.diags(d) @ psi1 - psi1 @ sp.diags(d), mf) \
            * np.sqrt(m0.sum()) * np.sqrt(mtr.sum())
        return RelationReport(resid, {"commutator_norm": comm_norm})

    def div_e_psi_residual(self, s0: np.ndarray, w: np.ndarray) -> RelationReport:
        """[div E(s0), psi(w)] + psi(s0 w); needs mean-free, Nyquist-free s0."""
        parts = self.div_e_parts(s0)
        d = parts["fermi_diag"]
        psi1 = self.tw.fock.psi(w)
        psi_sw = self.tw.fock.psi(self.tw.mult_electron(np.asarray(s0, dtype=float), w))
        rf = sp.diags(d) @ psi1 - psi1 @ sp.diags(d) + psi_sw
        mf, m0, mtr = self._masks()
        resid = frob_cols(rf, mf) * np.sqrt(m0.sum()) * np.sqrt(mtr.sum())
        comm_norm = frob_cols(sp.diags(d) @ psi1 - psi1 @ sp.diags(d), mf) \
            * np.sqrt(m0.sum()) * np.sqrt(mtr.sum())
        return RelationReport(resid, {
            "adot_term_norm": parts["adot_norm"],
            "commutator_norm": comm_norm,
        })

    def div_e_exponentiated_residual(self, s0: np.ndarray, w: np.ndarray) -> RelationReport:
        """exp(i div E(s0)) psi(w) exp(-i div E(s0)) = psi(e^{-i s0} w)."""
        from scipy.linalg import expm

        parts = self.div_e_parts(s0)
        gam = np.exp(1j * parts["fermi_diag"])
        psi1 = self.tw.fock.psi(w)
        psi_gauge = self.tw.fock.psi(
            self.tw.mult_electron(np.exp(-1j * np.asarray(s0, dtype=float)), w))
        rf = sp.diags(gam) @ psi1 @ sp.diags(np.conj(gam)) - psi_gauge

        w0 = expm(1j * parts["scalar"])
        wtr = expm(1j * parts["transverse"])
        eye0 = np.eye(self.tw.bose.dim)
        eyetr = np.eye(self.tr.bose.dim)
        d0 = w0 @ w0.conj().T - eye0
        dtr = wtr @ wtr.conj().T - eyetr
        mf, m0, mtr = self._masks()
        # exact split of conj(psi) x (I+d0) x (I+dtr) - psi' x I x I
        terms = [
            (rf, eye0 + d0, eyetr + dtr),
            (psi_gauge, d0, eyetr + dtr),
            (psi_gauge, eye0, dtr),
        ]
        return RelationReport(kron_frob_sum(terms, (mf, m0, mtr)))

    def div_e_a_commutator_residual(self, s0: np.ndarray, f: VectorTestFunction) -> RelationReport:
        """[div E(s0), A(f0)] = 0: only the transverse slots can interact."""
        parts = self.div_e_parts(s0)
        a = self.tr.a_field(f.f0)
        comm = parts["transverse"] @ a - a @ parts["transverse"]
        mf, m0, mtr = self._masks()
        resid = np.sqrt(mf.sum()) * np.sqrt(m0.sum()) * frob_cols(comm, mtr)
        return RelationReport(resid)

    # -- V operators (combined gauge unitaries) -----------------------------------

    def v_lambda_residual(self, f: VectorTestFunction, w: np.ndarray) -> RelationReport:
        """V(f) psi(w) = psi(e^{-i sigma * div f} w) V(f) with
        V(f) = W_twisted(div f, 0) (x) W_tr(-f0, 0)."""
        div = self.divergence(f)
        s = self._scalar_pair(div)
        c = self.tw.conv(s)
        gam = self.tw.gamma_twist_diag(s)
        psi1 = self.tw.fock.psi(w)
        psi2 = self.tw.fock.psi(self.tw.mult_electron(np.exp(-1j * c), w))
        rf = sp.diags(gam) @ psi1 - psi2 @ sp.diags(gam)
        mf, m0, mtr = self._masks()
        w0 = self.tw.bose.weyl(s)
        wtr = self.tr.weyl(VectorTestFunction(self.grid, -f.f0, np.zeros_like(f.f0)))
        resid = frob_cols(rf, mf) * frob_cols(w0, m0) * frob_cols(wtr, mtr)
        return RelationReport(resid)

    def v_lambda_gradient_residual(self, s0: np.ndarray, w: np.ndarray) -> RelationReport:
        """V(-grad s0) psi(w) = psi(e^{-i s0} w) V(-grad s0) (mean-free s0)."""
        grad = spectral_gradient(self.grid, s0)
        f = VectorTestFunction(self.grid, -grad, np.zeros_like(grad))
        div = self.divergence(f)
        s = self._scalar_pair(div)
        gam = self.tw.gamma_twist_diag(s)
        psi1 = self.tw.fock.psi(w)
        psi2 = self.tw.fock.psi(
            self.tw.mult_electron(np.exp(-1j * np.asarray(s0, dtype=float)), w))
        rf = sp.diags(gam) @ psi1 - psi2 @ sp.diags(gam)
        mf, m0, mtr = self._masks()
        w0 = self.tw.bose.weyl(s)
        wtr = self.tr.weyl(f)
        resid = frob_cols(rf, mf) * frob_cols(w0, m0) * frob_cols(wtr, mtr)
        return RelationReport(resid, {"transverse_coeff_norm": float(
            np.linalg.norm(self.tr.basis.require(self.tr.smearing(f), "V(grad)")))})

    def psi_wtr_commutator(self) -> float:
        """[psi(w), W_tr(f)]: distinct tensor slots, identically zero."""
        return 0.0

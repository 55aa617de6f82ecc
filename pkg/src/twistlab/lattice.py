"""Periodic spatial grids, test functions, twist kernels and spectral calculus.

Everything downstream rests on the exactness guarantees of this module:
with periodic boundaries and spectral differential operators, discrete
convolution, differentiation and fundamental solutions compose *exactly*
(up to float rounding), so operator identities that hold in the continuum
survive discretization as machine-precision identities.

Conventions (fixed once, reported by the CLI):
  - sites x_j = j*dx, j = 0..n-1 on each axis, fields are flat C-order
    arrays of length N = n^dim;
  - forward transform  fhat(k) = dV * sum_x f(x) exp(-i k.x)  on the dual
    grid k_j = 2*pi*j/(n*dx), j in fftfreq order;
  - convolve(sigma, f)(x) = dV * sum_y sigma(x-y) f(y)  (circular);
  - odd spectral derivatives zero the Nyquist mode so real fields stay real.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np


class GridMismatchError(ValueError):
    """Operands live on different grids."""


@dataclass(frozen=True)
class Grid:
    """Periodic cubic lattice in 1, 2 or 3 dimensions."""

    dim: int
    n: int
    dx: float

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.n < 2:
            raise ValueError(f"need at least 2 sites per axis, got {self.n}")
        if not self.dx > 0:
            raise ValueError(f"spacing must be positive, got {self.dx}")

    @property
    def nsites(self) -> int:
        return self.n ** self.dim

    @property
    def cell_volume(self) -> float:
        return self.dx ** self.dim

    @property
    def dual_cell_volume(self) -> float:
        return (2.0 * np.pi / (self.n * self.dx)) ** self.dim

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dim

    def axis_wavenumbers(self) -> np.ndarray:
        """Signed spectral wavenumbers 2*pi*j/(n*dx) along one axis."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    def wavenumber_components(self) -> list:
        """dim arrays of shape `grid.shape`, one per axis."""
        k1 = self.axis_wavenumbers()
        grids = np.meshgrid(*([k1] * self.dim), indexing="ij")
        return list(grids)

    def wavenumber_sq(self) -> np.ndarray:
        """|k|^2 on the dual grid, flat."""
        ks = self.wavenumber_components()
        return sum(k * k for k in ks).ravel()

    def coordinates(self) -> np.ndarray:
        """Site coordinates, shape (N, dim)."""
        ax = np.arange(self.n) * self.dx
        grids = np.meshgrid(*([ax] * self.dim), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def site_index(self, multi: Iterable[int]) -> int:
        """Flat index of a (periodically wrapped) multi-index."""
        multi = [int(m) % self.n for m in multi]
        if len(multi) != self.dim:
            raise ValueError("multi-index rank does not match grid dim")
        return int(np.ravel_multi_index(multi, self.shape))

    def fft(self, f: np.ndarray) -> np.ndarray:
        """Forward transform with measure weight dV, flat in, flat out."""
        return self.cell_volume * np.fft.fftn(f.reshape(self.shape)).ravel()

    def ifft(self, fhat: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`fft`; complex output, caller takes real part."""
        return np.fft.ifftn(fhat.reshape(self.shape)).ravel() / self.cell_volume

    def translate(self, f: np.ndarray, shift) -> np.ndarray:
        """Shift a field by an integer lattice vector: (T_a f)(x) = f(x - a)."""
        shift = np.atleast_1d(np.asarray(shift, dtype=int))
        if shift.size != self.dim:
            raise ValueError("shift rank does not match grid dim")
        out = np.roll(f.reshape(self.shape), tuple(shift), axis=tuple(range(self.dim)))
        return out.ravel()

    def reflect(self, f: np.ndarray) -> np.ndarray:
        """Periodic reflection (R f)(x) = f(-x)."""
        sh = f.reshape(self.shape)
        for ax in range(self.dim):
            sh = np.roll(np.flip(sh, axis=ax), 1, axis=ax)
        return sh.ravel()

    def integrate(self, f: np.ndarray) -> float | complex:
        """dV * sum_x f(x)."""
        total = self.cell_volume * np.sum(f)
        return total

    def inner(self, f: np.ndarray, g: np.ndarray) -> complex:
        """L2 pairing dV * sum conj(f) g."""
        return complex(self.cell_volume * np.vdot(f, g))

    def norm(self, f: np.ndarray) -> float:
        return float(np.sqrt(abs(self.inner(f, f))))


def _check_same_grid(a: Grid, b: Grid) -> None:
    if a != b:
        raise GridMismatchError(f"grid mismatch: {a} vs {b}")


@dataclass(frozen=True)
class ScalarTestFunction:
    """Pair s = (s0, s1) of real fields labelling a Weyl generator."""

    grid: Grid
    s0: np.ndarray
    s1: np.ndarray

    def __post_init__(self):
        for name in ("s0", "s1"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (self.grid.nsites,):
                raise ValueError(f"{name} must be a flat field of length {self.grid.nsites}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
            object.__setattr__(self, name, arr)

    @classmethod
    def zero(cls, grid: Grid) -> "ScalarTestFunction":
        z = np.zeros(grid.nsites)
        return cls(grid, z, z.copy())

    def __add__(self, other: "ScalarTestFunction") -> "ScalarTestFunction":
        _check_same_grid(self.grid, other.grid)
        return ScalarTestFunction(self.grid, self.s0 + other.s0, self.s1 + other.s1)

    def __sub__(self, other: "ScalarTestFunction") -> "ScalarTestFunction":
        _check_same_grid(self.grid, other.grid)
        return ScalarTestFunction(self.grid, self.s0 - other.s0, self.s1 - other.s1)

    def __mul__(self, a: float) -> "ScalarTestFunction":
        return ScalarTestFunction(self.grid, a * self.s0, a * self.s1)

    __rmul__ = __mul__

    def __neg__(self) -> "ScalarTestFunction":
        return ScalarTestFunction(self.grid, -self.s0, -self.s1)

    def smearing(self) -> np.ndarray:
        """Complex one-particle label s0 + i*s1 used on the boson factor."""
        return self.s0 + 1j * self.s1

    def support(self, tol: float) -> np.ndarray:
        """Boolean mask of sites where max(|s0|, |s1|) > tol."""
        return np.maximum(np.abs(self.s0), np.abs(self.s1)) > tol


def symplectic_form(s: ScalarTestFunction, t: ScalarTestFunction) -> float:
    """dV * sum_x (s1 t0 - s0 t1); antisymmetric and bilinear."""
    _check_same_grid(s.grid, t.grid)
    g = s.grid
    return float(g.cell_volume * np.sum(s.s1 * t.s0 - s.s0 * t.s1))


# ---------------------------------------------------------------------------
# differential operators (spectral symbols)
# ---------------------------------------------------------------------------

IDENTITY = "identity"
NEG_LAPLACIAN = "neg_laplacian"
HELMHOLTZ = "helmholtz"


@dataclass(frozen=True)
class DiffOp:
    """Constant-coefficient differential operator as a spectral symbol.

    The symbol is real and nonnegative; only the negative Laplacian has a
    vanishing (zero) mode.
    """

    grid: Grid
    variant: str
    symbol: np.ndarray
    mass: float = 0.0

    @classmethod
    def identity(cls, grid: Grid) -> "DiffOp":
        return cls(grid, IDENTITY, np.ones(grid.nsites))

    @classmethod
    def neg_laplacian(cls, grid: Grid) -> "DiffOp":
        return cls(grid, NEG_LAPLACIAN, grid.wavenumber_sq())

    @classmethod
    def helmholtz(cls, grid: Grid, mass: float) -> "DiffOp":
        if not mass > 0:
            raise ValueError("helmholtz mass must be positive")
        return cls(grid, HELMHOLTZ, grid.wavenumber_sq() + mass * mass, mass=mass)

    def apply(self, f: np.ndarray) -> np.ndarray:
        """Spectral multiplication by the symbol; real in, real out."""
        g = self.grid
        out = g.ifft(self.symbol * g.fft(f))
        if np.isrealobj(f):
            return out.real
        return out

    def apply_pair(self, s: ScalarTestFunction) -> ScalarTestFunction:
        """Componentwise action on a test-function pair."""
        return ScalarTestFunction(s.grid, self.apply(s.s0), self.apply(s.s1))


def apply_diffop(op: DiffOp, f: np.ndarray) -> np.ndarray:
    return op.apply(f)


# ---------------------------------------------------------------------------
# twist kernels
# ---------------------------------------------------------------------------

DELTA = "delta"
CONSTANT = "constant"
YUKAWA = "yukawa"
COULOMB = "coulomb"
TABULATED = "tabulated"


def _cell_radius(grid: Grid) -> float:
    # radius of the ball with the cell's volume (3d regularization scale)
    return (3.0 * grid.cell_volume / (4.0 * np.pi)) ** (1.0 / 3.0)


@dataclass(frozen=True)
class TwistKernel:
    """Grid sampling of the distribution that twists the field system.

    Named singular kernels come in two samplings: ``spectral`` (the exact
    discrete fundamental solution, used by every gauge-generator identity)
    and ``pointwise`` (literal radial profile with a cell-average value at
    the origin; documented, not load-bearing, 3d only).
    """

    grid: Grid
    variant: str
    values: np.ndarray
    mass: float = 0.0
    sampling: str = "spectral"

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.nsites,):
            raise ValueError("kernel values must be a flat real field on the grid")
        if not np.all(np.isfinite(vals)):
            raise ValueError("kernel values contain NaN/Inf")
        object.__setattr__(self, "values", vals)

    @classmethod
    def delta(cls, grid: Grid) -> "TwistKernel":
        vals = np.zeros(grid.nsites)
        vals[0] = 1.0 / grid.cell_volume
        return cls(grid, DELTA, vals)

    @classmethod
    def constant(cls, grid: Grid) -> "TwistKernel":
        return cls(grid, CONSTANT, np.ones(grid.nsites))

    @classmethod
    def zero(cls, grid: Grid) -> "TwistKernel":
        return cls(grid, TABULATED, np.zeros(grid.nsites))

    @classmethod
    def tabulated(cls, grid: Grid, values: np.ndarray) -> "TwistKernel":
        return cls(grid, TABULATED, np.asarray(values, dtype=float))

    @classmethod
    def yukawa(cls, grid: Grid, mass: float, sampling: str = "spectral") -> "TwistKernel":
        if not mass > 0:
            raise ValueError("yukawa mass must be positive")
        if sampling == "spectral":
            vals = fundamental_solution(DiffOp.helmholtz(grid, mass)).values
        elif sampling == "pointwise":
            vals = cls._radial_profile(grid, lambda r: np.exp(-mass * r) / r,
                                       origin=2.0 * np.pi * _cell_radius(grid) ** 2 / grid.cell_volume)
        else:
            raise ValueError(f"unknown sampling {sampling!r}")
        return cls(grid, YUKAWA, vals, mass=mass, sampling=sampling)

    @classmethod
    def coulomb(cls, grid: Grid, sampling: str = "spectral") -> "TwistKernel":
        if sampling == "spectral":
            vals = fundamental_solution(DiffOp.neg_laplacian(grid), mean_zero=True).values
        elif sampling == "pointwise":
            vals = cls._radial_profile(grid, lambda r: 1.0 / (4.0 * np.pi * r),
                                       origin=0.5 * _cell_radius(grid) ** 2 / grid.cell_volume)
        else:
            raise ValueError(f"unknown sampling {sampling!r}")
        return cls(grid, COULOMB, vals, sampling=sampling)

    @staticmethod
    def _radial_profile(grid: Grid, profile, origin: float) -> np.ndarray:
        if grid.dim != 3:
            raise ValueError("pointwise radial sampling is defined for dim=3 only")
        coords = grid.coordinates()
        # periodic (minimum-image) distance from the origin site
        half = grid.n * grid.dx / 2.0
        d = np.where(coords > half, coords - grid.n * grid.dx, coords)
        r = np.sqrt(np.sum(d * d, axis=1))
        vals = np.empty(grid.nsites)
        vals[0] = origin
        vals[1:] = profile(r[1:])
        return vals

    def is_even(self, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.values - self.grid.reflect(self.values))) <= tol)

    def convolve(self, f: np.ndarray) -> np.ndarray:
        return convolve(self, f)

    def spectrum(self) -> np.ndarray:
        """Transform of the kernel samples on the dual grid."""
        return self.grid.fft(self.values)


def convolve(kernel: TwistKernel, f: np.ndarray) -> np.ndarray:
    """Circular convolution dV * sum_y sigma(x-y) f(y), computed spectrally."""
    g = kernel.grid
    f = np.asarray(f)
    if f.shape != (g.nsites,):
        raise GridMismatchError("field does not live on the kernel's grid")
    out = g.cell_volume * np.fft.ifftn(
        np.fft.fftn(kernel.values.reshape(g.shape))
        * np.fft.fftn(f.reshape(g.shape))
    ).ravel()
    if np.isrealobj(f):
        return out.real
    return out


def fundamental_solution(op: DiffOp, mean_zero: bool = False) -> TwistKernel:
    """Tabulated kernel whose spectrum is 1/p(k).

    For the negative Laplacian the zero mode has no inverse; under the
    mean-zero convention it is projected out and the round-trip identity
    holds on mean-zero fields.
    """
    g = op.grid
    symbol = op.symbol
    zero = np.abs(symbol) < 1e-14
    if np.any(zero):
        if not mean_zero:
            raise ValueError(
                "symbol vanishes on the dual grid; pass mean_zero=True to project out constants"
            )
        inv = np.zeros_like(symbol)
        inv[~zero] = 1.0 / symbol[~zero]
    else:
        inv = 1.0 / symbol
    vals = g.ifft(inv).real
    return TwistKernel(g, TABULATED, vals)


# ---------------------------------------------------------------------------
# supports
# ---------------------------------------------------------------------------

def support_sites(f: np.ndarray, tol: float) -> np.ndarray:
    """Boolean mask {x : |f(x)| > tol}."""
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    return np.abs(np.asarray(f)) > tol


def minkowski_sum(grid: Grid, a_mask: np.ndarray, b_mask: np.ndarray) -> np.ndarray:
    """Periodic Minkowski sum of two site sets given as boolean masks."""
    fa = np.fft.fftn(a_mask.astype(float).reshape(grid.shape))
    fb = np.fft.fftn(b_mask.astype(float).reshape(grid.shape))
    counts = np.fft.ifftn(fa * fb).real.ravel()
    return counts > 0.5


# ---------------------------------------------------------------------------
# vector calculus (spectral, Nyquist-safe)
# ---------------------------------------------------------------------------

def _odd_derivative_factors(grid: Grid) -> list:
    """i*k factors per axis with the Nyquist row zeroed (keeps real fields real)."""
    k1 = grid.axis_wavenumbers().copy()
    if grid.n % 2 == 0:
        k1[grid.n // 2] = 0.0
    factors = []
    for ax in range(grid.dim):
        shape = [1] * grid.dim
        shape[ax] = grid.n
        factors.append((1j * k1).reshape(shape))
    return factors


def drop_nyquist(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Project out Nyquist-plane modes so spectral grad/div act exactly."""
    if grid.n % 2 != 0:
        return np.asarray(f, dtype=float).copy()
    fhat = np.fft.fftn(np.asarray(f, dtype=float).reshape(grid.shape))
    ny = grid.n // 2
    for ax in range(grid.dim):
        idx = [slice(None)] * grid.dim
        idx[ax] = ny
        fhat[tuple(idx)] = 0.0
    return np.fft.ifftn(fhat).real.ravel()


def spectral_gradient(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Gradient, shape (dim, N). Nyquist modes of odd derivatives are zeroed."""
    fhat = np.fft.fftn(np.asarray(f, dtype=float).reshape(grid.shape))
    out = np.empty((grid.dim, grid.nsites))
    for ax, fac in enumerate(_odd_derivative_factors(grid)):
        out[ax] = np.fft.ifftn(fac * fhat).real.ravel()
    return out


def spectral_divergence(grid: Grid, v: np.ndarray) -> np.ndarray:
    """Divergence of a (dim, N) vector field, same Nyquist convention."""
    v = np.asarray(v, dtype=float)
    if v.shape != (grid.dim, grid.nsites):
        raise ValueError("vector field must have shape (dim, N)")
    out = np.zeros(grid.nsites)
    for ax, fac in enumerate(_odd_derivative_factors(grid)):
        vhat = np.fft.fftn(v[ax].reshape(grid.shape))
        out += np.fft.ifftn(fac * vhat).real.ravel()
    return out


def bump(grid: Grid, center, radius: int, amplitude: float = 1.0) -> np.ndarray:
    """Raised-cosine bump with exactly compact support (radius sites each way)."""
    center = np.atleast_1d(np.asarray(center, dtype=int))
    if center.size != grid.dim:
        raise ValueError("center rank does not match grid dim")
    ax = np.arange(grid.n)
    prof = []
    for c in center:
        d = np.minimum(np.abs(ax - c), grid.n - np.abs(ax - c))
        p = np.where(d <= radius, np.cos(0.5 * np.pi * np.minimum(d / max(radius, 1), 1.0)) ** 2, 0.0)
        p[d == radius] = 0.0
        prof.append(p)
    out = prof[0]
    for p in prof[1:]:
        out = np.multiply.outer(out, p)
    return amplitude * out.ravel()

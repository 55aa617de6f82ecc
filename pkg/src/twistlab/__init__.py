"""twistlab: a finite-lattice laboratory for twisted fixed-time field models.

Builds fermion/boson Fock spaces over periodic grids, dresses Weyl operators
with kernel-dependent fermionic twists, and machine-verifies the resulting
commutation relations, charged-state localization properties and cutoff
Hamiltonian structure.
"""

from .boson import BosonFockSpace, ModeBasis, SpanResidualError
from .coulomb import (
    CoulombGaugeSystem,
    TransverseSector,
    VectorTestFunction,
    eta_tr,
    transverse_projector,
)
from .fermion import (
    FermionFockSpace,
    OneParticleOperator,
    OneParticleSpace,
    stone_generator,
    twist_unitary,
)
from .hamiltonian import (
    CutoffFunction,
    CutoffHamiltonian,
    MomentumGrid,
    apply_h_closed_form,
    gaussian_packet,
    momentum_transfer_demo,
    two_fermion_mu,
    two_fermion_smeared,
    uv_divergence_scan,
    w_sym_pair,
)
from .lattice import (
    DiffOp,
    Grid,
    GridMismatchError,
    ScalarTestFunction,
    TwistKernel,
    apply_diffop,
    bump,
    convolve,
    drop_nyquist,
    fundamental_solution,
    minkowski_sum,
    spectral_divergence,
    spectral_gradient,
    support_sites,
    symplectic_form,
)
from .twisted import ChargedVector, TwistedSystem

__version__ = "0.1.0"

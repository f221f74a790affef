"""Finite-mode exact diagonalization for multi-species fermionic Hamiltonians.

The model: a fixed finite set of momentum/spin modes per fermion species, the
free part given by the relativistic dispersion, and interactions that create
or annihilate exactly one particle of every species, weighted by a sampled
kernel. Besides solving ground problems and mass-limit sweeps, the package
verifies the operator estimates that control such Hamiltonians: constant-one
form bounds, smoothing bounds with Hermite weights, interpolated blends,
infinitesimal relative bounds, and infrared finiteness of ground-state
occupation integrals.
"""

from .modes import ModeTable, SpeciesConfig, build_mode_table, uniform_grid_species
from .fock import FockBasis, enumerate_basis
from .hamiltonian import (
    HamiltonianBundle,
    KernelTensor,
    ProcessSignature,
    assemble_total,
    enumerate_processes,
    sample_kernel_tensor,
)
from .spectra import GroundStateResult, MassCurve, ground_state, mass_sweep

__all__ = [
    "ModeTable",
    "SpeciesConfig",
    "build_mode_table",
    "uniform_grid_species",
    "FockBasis",
    "enumerate_basis",
    "HamiltonianBundle",
    "KernelTensor",
    "ProcessSignature",
    "assemble_total",
    "enumerate_processes",
    "sample_kernel_tensor",
    "GroundStateResult",
    "MassCurve",
    "ground_state",
    "mass_sweep",
]

__version__ = "0.1.0"

"""Ground states, low spectra, mass sweeps and simple observables.

Dense LAPACK diagonalization is authoritative below a dimension cap; above it
a seeded Lanczos run takes over and, below a cross-check cap, both are run and
compared. Degenerate ground spaces get a deterministic representative: the
projection of the first basis vector with nonvanishing component, with a fixed
phase convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fock import annihilation
from .hamiltonian import HamiltonianBundle, assemble_total
from .modes import ModeTable

DENSE_CAP_DEFAULT = 2048
CROSS_CHECK_TOL = 1e-9
DEGENERACY_TOL = 1e-10


@dataclass(frozen=True)
class GroundStateResult:
    energy: float
    vector: np.ndarray
    residual: float
    method: str
    degeneracy: int
    cross_check_gap: float | None = None

    @property
    def dimension(self) -> int:
        return self.vector.shape[0]


def _row_sum_bound(h: sp.spmatrix) -> float:
    """Gershgorin-style upper bound on the spectrum: max row sum of |H|."""
    h = sp.csr_matrix(h)
    return float(np.max(np.abs(h).sum(axis=1))) if h.nnz else 0.0


def _fix_phase(vec: np.ndarray) -> np.ndarray:
    pivot = int(np.argmax(np.abs(vec)))
    phase = vec[pivot] / abs(vec[pivot])
    out = vec / phase
    return out / np.linalg.norm(out)


def _dense_ground(h: np.ndarray) -> tuple[float, np.ndarray, int]:
    vals, vecs = np.linalg.eigh(h)
    energy = float(vals[0])
    members = np.nonzero(vals - energy <= DEGENERACY_TOL * max(1.0, abs(energy)))[0]
    degeneracy = int(members.size)
    space = vecs[:, members]
    # deterministic representative: project the first basis vector that meets
    # the eigenspace, then fix the phase
    rep = None
    for basis_index in range(h.shape[0]):
        overlap = space.conj().T[:, basis_index]
        cand = space @ overlap
        norm = np.linalg.norm(cand)
        if norm > 1e-8:
            rep = cand / norm
            break
    if rep is None:
        rep = space[:, 0]
    return energy, _fix_phase(rep), degeneracy


def ground_state(
    h: sp.spmatrix,
    dense_cap: int = DENSE_CAP_DEFAULT,
    seed: int = 7,
    tol: float = 0.0,
    method: str = "auto",
) -> GroundStateResult:
    """Lowest eigenpair of a hermitian sparse matrix.

    method "auto" takes the dense path below dense_cap and seeded Lanczos
    (eigsh) above it, with a dense eigenvalue cross-check when the dimension
    still allows one; "dense" and "lanczos" force the respective path.
    """
    h = sp.csr_matrix(h)
    dim = h.shape[0]
    if method not in ("auto", "dense", "lanczos"):
        raise ValueError("method must be auto, dense or lanczos")
    use_dense = method == "dense" or (method == "auto" and dim <= dense_cap)
    if use_dense:
        energy, vec, degeneracy = _dense_ground(h.toarray())
        method = "dense"
        cross = None
    else:
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(dim)
        v0 /= np.linalg.norm(v0)
        # flip the spectrum around a Gershgorin upper bound: the smallest
        # algebraic eigenvalue becomes the largest-magnitude one, which
        # Lanczos resolves much more reliably than a raw "SA" run
        shift = 1.0 + _row_sum_bound(h)
        flipped = (sp.identity(dim, dtype=h.dtype, format="csr") * shift) - h
        vals, vecs = spla.eigsh(
            flipped, k=1, which="LA", v0=v0, tol=tol, maxiter=10000
        )
        energy = float(shift - vals[0])
        vec = _fix_phase(vecs[:, 0].astype(np.complex128))
        degeneracy = 1
        method = "lanczos"
        cross = None
        if dim <= 4 * dense_cap:
            dense_energy = float(np.linalg.eigvalsh(h.toarray())[0])
            cross = abs(dense_energy - energy)
            if cross > CROSS_CHECK_TOL * max(1.0, abs(energy)):
                raise AssertionError(
                    f"dense and Lanczos ground energies disagree by {cross:.2e}"
                )
    residual = float(np.linalg.norm(h @ vec - energy * vec))
    return GroundStateResult(
        energy=energy,
        vector=np.asarray(vec, dtype=np.complex128),
        residual=residual,
        method=method,
        degeneracy=degeneracy,
        cross_check_gap=cross,
    )


def low_spectrum(h: sp.spmatrix, count: int, dense_cap: int = DENSE_CAP_DEFAULT, seed: int = 7) -> np.ndarray:
    """Lowest `count` eigenvalues, ascending."""
    h = sp.csr_matrix(h)
    dim = h.shape[0]
    if dim <= dense_cap:
        return np.linalg.eigvalsh(h.toarray())[:count]
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(dim)
    vals = spla.eigsh(h, k=count, which="SA", v0=v0 / np.linalg.norm(v0))[0]
    return np.sort(vals)


def spectral_gap(h: sp.spmatrix, dense_cap: int = DENSE_CAP_DEFAULT, seed: int = 7) -> float:
    vals = low_spectrum(h, 2, dense_cap=dense_cap, seed=seed)
    return float(vals[1] - vals[0])


@dataclass(frozen=True)
class ObservableReport:
    """Ground-state occupation data for one species.

    amplitudes[m] is the continuum-normalized annihilation amplitude
    || b(xi_m) Phi || = || b_m Phi || / sqrt(w_m); their weighted squares sum
    to the species' expected particle number.
    """

    species: int
    expected_number: float
    amplitudes: np.ndarray
    chain_gradients: tuple[np.ndarray, ...] = ()


def observables(
    bundle: HamiltonianBundle, vector: np.ndarray, species: int
) -> ObservableReport:
    table = bundle.table
    basis = bundle.basis
    w = table.mode_weights(species)
    amps = np.zeros(len(w))
    psi_vectors = []
    for local, mode in enumerate(table.block(species)):
        psi = annihilation(table, basis, mode) @ vector
        psi_vectors.append(psi / np.sqrt(w[local]))
        amps[local] = np.linalg.norm(psi) / np.sqrt(w[local])
    number = float(np.sum(w * amps**2))

    cfg = table.species[species]
    n_spins = len(cfg.spins)
    gradients = []
    for chain in cfg.chains:
        spacing = table.chain_spacing(species, chain)
        for s_idx in range(n_spins):
            locals_ = [p * n_spins + s_idx for p in chain]
            grads = np.zeros(len(chain) - 2)
            for pos in range(1, len(chain) - 1):
                diff = (
                    psi_vectors[locals_[pos + 1]] - psi_vectors[locals_[pos - 1]]
                ) / (2.0 * spacing)
                grads[pos - 1] = np.linalg.norm(diff)
            gradients.append(grads)
    return ObservableReport(
        species=species,
        expected_number=number,
        amplitudes=amps,
        chain_gradients=tuple(gradients),
    )


@dataclass(frozen=True)
class MassCurve:
    """Ground-state data along a decreasing mass grid for one species.

    energies[j] solves the Hamiltonian with masses[j]; limit_energy is the
    massless problem. cross_energies[j] = <Phi_j, H(limit) Phi_j> realizes the
    sandwich limit_energy <= cross_energies[j] <= energies[j]; overlaps track
    |<Phi_j, Phi_(j+1)>| as a convergence proxy (no compactness claim).
    """

    species: int
    masses: np.ndarray
    energies: np.ndarray
    limit_energy: float
    cross_energies: np.ndarray
    overlaps: np.ndarray
    limit_overlap: float
    vectors: tuple[np.ndarray, ...] = field(repr=False, default=())
    limit_vector: np.ndarray | None = field(repr=False, default=None)
    bundles: tuple[HamiltonianBundle, ...] = field(repr=False, default=())

    def monotonicity_violation(self) -> float:
        """Largest increase of energy as the mass decreases (should be <= 0)."""
        diffs = np.diff(self.energies)
        return float(np.max(diffs)) if diffs.size else 0.0

    def sandwich_violation(self) -> float:
        lower = np.max(self.limit_energy - self.cross_energies)
        upper = np.max(self.cross_energies - self.energies)
        return float(max(lower, upper))

    def limit_gap(self) -> float:
        return float(self.energies[-1] - self.limit_energy)


def mass_sweep(
    table: ModeTable,
    basis,
    tensors,
    coupling: float,
    species: int,
    masses: Sequence[float],
    dense_cap: int = DENSE_CAP_DEFAULT,
    seed: int = 7,
    keep_vectors: bool = True,
) -> MassCurve:
    """Solve the ground problem along a decreasing mass grid plus the limit.

    The mode geometry is fixed; only the species' dispersion changes, so the
    kernel tensors (and hence the interaction) are reused unchanged. Masses
    must be strictly decreasing and positive; the massless limit is appended
    internally.
    """
    masses = np.asarray([float(m) for m in masses])
    if masses.size < 2 or np.any(np.diff(masses) >= 0):
        raise ValueError("masses must be strictly decreasing")
    if np.any(masses <= 0):
        raise ValueError("masses must be positive; the limit is added internally")

    bundles = []
    results = []
    for mass in masses:
        t = table.with_species_mass(species, mass)
        bundle = assemble_total(t, basis, tensors, coupling)
        bundles.append(bundle)
        results.append(ground_state(bundle.h_total, dense_cap=dense_cap, seed=seed))

    limit_table = table.with_species_mass(species, 0.0)
    limit_bundle = assemble_total(limit_table, basis, tensors, coupling)
    limit_result = ground_state(limit_bundle.h_total, dense_cap=dense_cap, seed=seed)

    h_limit = limit_bundle.h_total
    cross = np.array(
        [float(np.real(np.vdot(r.vector, h_limit @ r.vector))) for r in results]
    )
    overlaps = np.array(
        [
            abs(np.vdot(results[j].vector, results[j + 1].vector))
            for j in range(len(results) - 1)
        ]
    )
    limit_overlap = float(abs(np.vdot(results[-1].vector, limit_result.vector)))
    return MassCurve(
        species=species,
        masses=masses,
        energies=np.array([r.energy for r in results]),
        limit_energy=limit_result.energy,
        cross_energies=cross,
        overlaps=overlaps,
        limit_overlap=limit_overlap,
        vectors=tuple(r.vector for r in results) if keep_vectors else (),
        limit_vector=limit_result.vector if keep_vectors else None,
        bundles=tuple(bundles) + (limit_bundle,),
    )


def coupling_gap_curve(
    bundle: HamiltonianBundle,
    couplings: Sequence[float],
    dense_cap: int = DENSE_CAP_DEFAULT,
    seed: int = 7,
) -> np.ndarray:
    """Spectral gap of H_free + g H_int for each g in couplings."""
    gaps = []
    for g in couplings:
        gaps.append(spectral_gap(bundle.with_coupling(g).h_total, dense_cap, seed))
    return np.asarray(gaps)


def quadratic_gap_fit(
    couplings: np.ndarray, gaps: np.ndarray, gap0: float
) -> tuple[float, float]:
    """Fit |gap(g) - gap(0)| = C g^2; returns (C, relative residual)."""
    couplings = np.asarray(couplings, dtype=float)
    deltas = np.abs(np.asarray(gaps, dtype=float) - gap0)
    g2 = couplings**2
    coeff = float(np.dot(deltas, g2) / np.dot(g2, g2))
    resid = float(np.linalg.norm(deltas - coeff * g2))
    scale = float(np.linalg.norm(deltas))
    return coeff, resid / scale if scale > 0 else 0.0

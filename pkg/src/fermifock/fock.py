"""Fermionic Fock space over a ModeTable.

Basis states are int64 bit masks over the global modes (bit m set = mode m
occupied), listed in ascending integer order. Creation and annihilation
operators carry the Jordan-Wigner sign (-1)^(number of occupied modes below m),
which together with the species-major global mode order realizes
anticommutation both within and across species.

All operators are scipy CSR matrices with complex128 entries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .modes import ModeTable

# Refuse to enumerate bases beyond this many states (dense vectors of this
# size are ~1 GiB as complex128 and nothing here needs them).
MAX_BASIS_STATES = 2**24


@dataclass(frozen=True)
class FockBasis:
    """Sorted list of occupation bit masks, possibly truncated per species.

    states is ascending, so membership and positions resolve via searchsorted.
    """

    states: np.ndarray
    truncation: tuple[int, ...] | None = None

    @property
    def dimension(self) -> int:
        return self.states.shape[0]

    def positions(self, masks: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Locate bit masks in the basis.

        Returns (pos, found); pos entries are valid only where found is True,
        which is how truncated bases silently drop states pushed outside the
        particle-number caps.
        """
        masks = np.asarray(masks, dtype=np.int64)
        pos = np.searchsorted(self.states, masks)
        pos_clip = np.minimum(pos, self.dimension - 1)
        found = self.states[pos_clip] == masks
        return pos_clip, found

    def index(self, mask: int) -> int:
        pos, found = self.positions(np.array([mask], dtype=np.int64))
        if not found[0]:
            raise KeyError(f"state {mask:#x} not in basis")
        return int(pos[0])


def enumerate_basis(
    table: ModeTable,
    truncation: list[int] | tuple[int, ...] | None = None,
    max_states: int = MAX_BASIS_STATES,
) -> FockBasis:
    """Enumerate occupation states, optionally capping particles per species.

    truncation, when given, holds one cap per species; states with more than
    that many occupied modes in the species' block are dropped.
    """
    m = table.total_modes
    if 2**m > max_states and truncation is None:
        raise ValueError("basis too large; truncate or reduce the mode count")
    states = np.arange(2**m, dtype=np.int64)
    if truncation is not None:
        if len(truncation) != table.n_species:
            raise ValueError("need one truncation cap per species")
        keep = np.ones(states.shape[0], dtype=bool)
        for i, cap in enumerate(truncation):
            block = table.block(i)
            block_mask = np.int64(0)
            for mode in block:
                block_mask |= np.int64(1) << np.int64(mode)
            counts = np.bitwise_count(states & block_mask)
            keep &= counts <= cap
        states = states[keep]
    if states.shape[0] > max_states:
        raise ValueError("basis too large; tighten truncation")
    return FockBasis(states=states, truncation=tuple(truncation) if truncation else None)


def _jw_signs(states: np.ndarray, mode: int) -> np.ndarray:
    """(-1)^(occupied modes strictly below `mode`) for every state."""
    below = np.int64((1 << mode) - 1)
    parity = np.bitwise_count(states & below) & 1
    return 1.0 - 2.0 * parity.astype(np.float64)


def creation(table: ModeTable, basis: FockBasis, mode: int) -> sp.csr_matrix:
    """Sparse matrix of b*_mode in the given basis."""
    if not (0 <= mode < table.total_modes):
        raise ValueError("mode index out of range")
    bit = np.int64(1) << np.int64(mode)
    states = basis.states
    src = np.nonzero((states & bit) == 0)[0]
    new_masks = states[src] | bit
    rows, found = basis.positions(new_masks)
    src = src[found]
    rows = rows[found]
    data = _jw_signs(states[src], mode).astype(np.complex128)
    dim = basis.dimension
    op = sp.csr_matrix((data, (rows, src)), shape=(dim, dim))
    op.sum_duplicates()
    return op


def annihilation(table: ModeTable, basis: FockBasis, mode: int) -> sp.csr_matrix:
    """Sparse matrix of b_mode; adjoint of creation by construction."""
    return creation(table, basis, mode).conj().T.tocsr()


def smeared(
    table: ModeTable,
    basis: FockBasis,
    species: int,
    coefficients: np.ndarray,
    create: bool = True,
) -> sp.csr_matrix:
    """Weighted smeared operator for one species.

    create=True gives sum_m sqrt(w_m) f_m b*_m, the discrete b*(f); with
    create=False the annihilator sum_m sqrt(w_m) conj(f_m) b_m. Its operator
    norm equals the weighted l2 norm of f (checked in the test suite).
    """
    coefficients = np.asarray(coefficients, dtype=np.complex128)
    w = table.mode_weights(species)
    if coefficients.shape != w.shape:
        raise ValueError("need one coefficient per mode of the species")
    dim = basis.dimension
    out = sp.csr_matrix((dim, dim), dtype=np.complex128)
    for local, mode in enumerate(table.block(species)):
        amp = np.sqrt(w[local]) * coefficients[local]
        if amp == 0:
            continue
        op = creation(table, basis, mode)
        if not create:
            op = op.conj().T
            amp = np.conj(amp)
        out = out + amp * op
    return out.tocsr()


def diagonal_second_quantized(
    table: ModeTable,
    basis: FockBasis,
    species: int,
    per_mode: np.ndarray | None = None,
) -> np.ndarray:
    """Diagonal of dGamma(per_mode) for one species, as a dense vector.

    per_mode defaults to the species' mode energies, giving the free
    Hamiltonian block. Returned as a vector; wrap with scipy.sparse.diags to
    get an operator.
    """
    if per_mode is None:
        per_mode = table.mode_energies(species)
    per_mode = np.asarray(per_mode, dtype=float)
    block = table.block(species)
    if per_mode.shape != (len(block),):
        raise ValueError("need one value per mode of the species")
    diag = np.zeros(basis.dimension)
    for local, mode in enumerate(block):
        occ = (basis.states >> np.int64(mode)) & 1
        diag += per_mode[local] * occ
    return diag


def free_hamiltonian_diagonal(table: ModeTable, basis: FockBasis) -> np.ndarray:
    """Diagonal of the total free Hamiltonian sum_i dGamma(omega_i)."""
    diag = np.zeros(basis.dimension)
    for i in range(table.n_species):
        diag += diagonal_second_quantized(table, basis, i)
    return diag


def number_diagonal(
    table: ModeTable, basis: FockBasis, species: int | None = None
) -> np.ndarray:
    """Diagonal of the number operator (one species, or total)."""
    if species is not None:
        ones = np.ones(len(table.block(species)))
        return diagonal_second_quantized(table, basis, species, ones)
    return np.bitwise_count(basis.states).astype(float)


def parity_diagonal(
    table: ModeTable, basis: FockBasis, species: int | None = None
) -> np.ndarray:
    """Diagonal of (-1)^N, total or for one species' block."""
    if species is None:
        counts = np.bitwise_count(basis.states)
    else:
        mask = np.int64(0)
        for mode in table.block(species):
            mask |= np.int64(1) << np.int64(mode)
        counts = np.bitwise_count(basis.states & mask)
    return 1.0 - 2.0 * (counts & 1).astype(float)


def save_triplets(op: sp.spmatrix, path: str) -> None:
    """Write a sparse operator in the plain text triplet format.

    First line: dimension and number of stored entries. Then one line per
    entry: row, column, real part, imaginary part. Entries are emitted in
    row-major CSR order so equal operators serialize identically.
    """
    op = sp.csr_matrix(op)
    op.sum_duplicates()
    coo = op.tocoo()
    with open(path, "w") as fh:
        fh.write(f"{op.shape[0]} {coo.nnz}\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r} {c} {float(v.real)!r} {float(v.imag)!r}\n")


def load_triplets(path: str) -> sp.csr_matrix:
    """Inverse of save_triplets."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError("malformed triplet header")
        dim, nnz = int(header[0]), int(header[1])
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        data = np.empty(nnz, dtype=np.complex128)
        for idx in range(nnz):
            parts = fh.readline().split()
            if len(parts) != 4:
                raise ValueError("malformed triplet line")
            rows[idx] = int(parts[0])
            cols[idx] = int(parts[1])
            data[idx] = float(parts[2]) + 1j * float(parts[3])
    op = sp.csr_matrix((data, (rows, cols)), shape=(dim, dim))
    op.sum_duplicates()
    return op

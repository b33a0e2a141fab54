"""Two-particle transport cost operator and its spectral structure.

The cost is assembled through the algebraic identity

    C = H (x) I + I (x) H - 2 sum_j (Q_j (x) Q_j + P_j (x) P_j)

in which every summand is an exact compression, so the truncated matrix is
the compression of the true operator and inherits its lower bound 2 d hbar.
In the centre-of-mass / relative coordinates the cost is 2 hbar times a
relative-oscillator Hamiltonian: eigenvalues 2 hbar (2 k + d) where k counts
relative quanta.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import NamedTuple, Union

import numpy as np

from .fock import FockSpace, canonical_operators, harmonic_hamiltonian

MAX_COST_DIM = 4096
ORTHONORMAL_TOL = 1e-10


@dataclass(frozen=True)
class CostMatrix:
    """Dense cost matrix on the truncated two-particle space (first particle slow)."""

    space: FockSpace
    matrix: np.ndarray = field(repr=False)

    @property
    def hbar(self) -> float:
        return self.space.hbar

    @property
    def dim_d(self) -> int:
        return self.space.dim_d

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def pair_quanta(self) -> np.ndarray:
        """Total quanta of both particles for each two-particle basis index."""
        t = self.space.total_quanta
        return (t[:, None] + t[None, :]).ravel()


def build_cost(space: FockSpace, max_dim: int = MAX_COST_DIM) -> CostMatrix:
    dim2 = space.dim**2
    if dim2 > max_dim:
        raise MemoryError(f"two-particle dimension {dim2} exceeds the limit {max_dim}")
    H = harmonic_hamiltonian(space)
    eye = np.eye(space.dim)
    C = np.kron(H, eye) + np.kron(eye, H)
    qs, ps = canonical_operators(space)
    for q, p in zip(qs, ps):
        C -= 2 * (np.kron(q, q) + np.kron(p, p))
    C = 0.5 * (C + C.conj().T)
    return CostMatrix(space, C)


class Eigensystem(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def eigensystem(cost: CostMatrix) -> Eigensystem:
    w, v = np.linalg.eigh(cost.matrix)
    return Eigensystem(w, v)


def predicted_block_spectrum(total: int, hbar: float, dim_d: int = 1) -> np.ndarray:
    """Exact eigenvalues of the cost restricted to ``total`` quanta (sorted, with multiplicity).

    ``k`` relative quanta and ``total - k`` centre-of-mass quanta, spread
    over ``dim_d`` axes each, give eigenvalue ``2 hbar (2k + d)``.
    """
    vals = []
    for k in range(total + 1):
        mult = comb(k + dim_d - 1, dim_d - 1) * comb(total - k + dim_d - 1, dim_d - 1)
        vals.extend([2 * hbar * (2 * k + dim_d)] * mult)
    return np.array(vals, dtype=float)


@dataclass(frozen=True)
class SpectrumBlock:
    total: int
    eigenvalues: np.ndarray
    enclosed: bool
    labels: np.ndarray  # relative quanta k, only meaningful for enclosed blocks


def block_spectrum(cost: CostMatrix) -> list[SpectrumBlock]:
    """Diagonalize the cost block by block in the total-quanta grading.

    A block is *enclosed* when no basis state in it touches the cutoff,
    i.e. ``total <= cutoff - 1``; only those blocks reproduce the untruncated
    spectrum.
    """
    grading = cost.pair_quanta()
    blocks = []
    for t in np.unique(grading):
        idx = np.flatnonzero(grading == t)
        sub = cost.matrix[np.ix_(idx, idx)]
        w = np.linalg.eigvalsh(sub)
        enclosed = bool(t <= cost.space.cutoff - 1)
        labels = np.rint((w / (2 * cost.hbar) - cost.dim_d) / 2).astype(int)
        blocks.append(SpectrumBlock(int(t), w, enclosed, labels))
    return blocks


def _check_orthonormal(basis: np.ndarray, name: str) -> None:
    gram = basis.conj().T @ basis
    err = np.abs(gram - np.eye(basis.shape[1])).max(initial=0.0)
    if err > ORTHONORMAL_TOL:
        raise ValueError(f"{name} basis is not orthonormal (deviation {err:.2e})")


def project_cost(
    cost: Union[CostMatrix, FockSpace, np.ndarray],
    left_basis: np.ndarray,
    right_basis: np.ndarray,
) -> np.ndarray:
    """Compress the cost onto ``span(left) (x) span(right)``.

    For a :class:`CostMatrix` or :class:`FockSpace` the compression is
    assembled from the one-particle compressions, which avoids forming the
    two-particle matrix. A raw array is compressed directly.
    """
    left_basis = np.asarray(left_basis, dtype=complex)
    right_basis = np.asarray(right_basis, dtype=complex)
    if left_basis.ndim == 1:
        left_basis = left_basis[:, None]
    if right_basis.ndim == 1:
        right_basis = right_basis[:, None]
    _check_orthonormal(left_basis, "left")
    _check_orthonormal(right_basis, "right")

    if isinstance(cost, np.ndarray):
        U = np.kron(left_basis, right_basis)
        out = U.conj().T @ cost @ U
        return 0.5 * (out + out.conj().T)

    space = cost.space if isinstance(cost, CostMatrix) else cost
    if left_basis.shape[0] != space.dim or right_basis.shape[0] != space.dim:
        raise ValueError("basis vectors do not match the one-particle dimension")

    def comp(basis, op):
        return basis.conj().T @ op @ basis

    H = harmonic_hamiltonian(space)
    out = np.kron(comp(left_basis, H), np.eye(right_basis.shape[1]))
    out += np.kron(np.eye(left_basis.shape[1]), comp(right_basis, H))
    qs, ps = canonical_operators(space)
    for q, p in zip(qs, ps):
        out -= 2 * np.kron(comp(left_basis, q), comp(right_basis, q))
        out -= 2 * np.kron(comp(left_basis, p), comp(right_basis, p))
    return 0.5 * (out + out.conj().T)

"""Density operators, phase-space measures, couplings and their marginals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .fock import (
    DEFAULT_TAIL_TOL,
    FockSpace,
    TruncationError,
    coherent_state,
    coherent_tail,
)

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10
TRACE_TOL = 1e-10
COUPLING_TOL = 1e-7
RANK_TOL = 1e-9


def hermitian_part(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m)
    return 0.5 * (m + m.conj().T)


def _check_density(matrix: np.ndarray, what: str) -> None:
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"{what} must be a square matrix, got shape {matrix.shape}")
    scale = max(1.0, float(np.abs(matrix).max(initial=0.0)))
    if np.abs(matrix - matrix.conj().T).max(initial=0.0) > HERMITIAN_TOL * scale:
        raise ValueError(f"{what} is not Hermitian")
    tr = np.trace(matrix).real
    if abs(tr - 1.0) > TRACE_TOL:
        raise ValueError(f"{what} has trace {tr!r}, expected 1")
    lo = np.linalg.eigvalsh(matrix)[0]
    if lo < -PSD_TOL:
        raise ValueError(f"{what} has negative eigenvalue {lo:.3e}")


@dataclass(frozen=True)
class DensityOperator:
    """Hermitian, positive semidefinite, trace-one matrix.

    ``space`` is None for operators written in an abstract basis (for
    instance the support of another density operator).
    """

    matrix: np.ndarray
    space: Optional[FockSpace] = None
    label: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if self.space is not None and m.shape != (self.space.dim, self.space.dim):
            raise ValueError(f"matrix shape {m.shape} does not match space dimension {self.space.dim}")
        _check_density(m, "density operator")
        object.__setattr__(self, "matrix", hermitian_part(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def expectation(self, op: np.ndarray) -> complex:
        return complex(np.trace(self.matrix @ op))


@dataclass(frozen=True)
class PhaseSpaceMeasure:
    """Finite weighted point set on phase space R^d x R^d."""

    q: np.ndarray
    p: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        q = np.atleast_2d(np.asarray(self.q, dtype=float))
        p = np.atleast_2d(np.asarray(self.p, dtype=float))
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if q.shape[0] != w.size and q.shape[1] == w.size and q.shape[0] == 1:
            # 1-d coordinates passed as flat lists
            q, p = q.T, p.T
        if q.shape != p.shape or q.shape[0] != w.size:
            raise ValueError(f"inconsistent shapes q{q.shape}, p{p.shape}, w{w.shape}")
        if w.size == 0:
            raise ValueError("measure has empty support")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {w.sum()!r}, expected 1")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_points(cls, points: Sequence, weights: Sequence[float]) -> "PhaseSpaceMeasure":
        """Build from ``[(q, p), ...]`` with scalar or vector coordinates."""
        qs = [np.atleast_1d(np.asarray(q, dtype=float)) for q, _ in points]
        ps = [np.atleast_1d(np.asarray(p, dtype=float)) for _, p in points]
        return cls(np.array(qs), np.array(ps), np.asarray(weights, dtype=float))

    @property
    def dim_d(self) -> int:
        return self.q.shape[1]

    def __len__(self) -> int:
        return self.weights.size

    def points(self):
        return list(zip(self.q, self.p))

    def scaled(self, s: float) -> "PhaseSpaceMeasure":
        return PhaseSpaceMeasure(self.q * s, self.p * s, self.weights)


@dataclass(frozen=True)
class CouplingOperator:
    """Density operator on a product space with declared marginals.

    Left factor is the slow index of the Kronecker product.
    """

    matrix: np.ndarray
    marginal_left: DensityOperator
    marginal_right: DensityOperator
    tol: float = COUPLING_TOL

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        n1, n2 = self.marginal_left.dim, self.marginal_right.dim
        if m.shape != (n1 * n2, n1 * n2):
            raise ValueError(f"coupling shape {m.shape} does not match marginals ({n1}, {n2})")
        _check_density(m, "coupling")
        m = hermitian_part(m)
        object.__setattr__(self, "matrix", m)
        err = marginal_residual(m, self.marginal_left.matrix, self.marginal_right.matrix)
        if err > self.tol:
            raise ValueError(f"partial traces miss the declared marginals by {err:.3e}")

    @property
    def dims(self) -> tuple[int, int]:
        return self.marginal_left.dim, self.marginal_right.dim


# ---------------------------------------------------------------------------
# partial traces
# ---------------------------------------------------------------------------

def _split_dims(F: np.ndarray, dims) -> tuple[int, int]:
    n = F.shape[0]
    if dims is not None:
        n1, n2 = dims
        if n1 * n2 != n:
            raise ValueError(f"dims {dims} do not factor matrix of size {n}")
        return int(n1), int(n2)
    root = math.isqrt(n)
    if root * root != n:
        raise ValueError(f"dimension {n} is not a perfect square; pass dims explicitly")
    return root, root


def partial_trace_right(F, dims=None) -> np.ndarray:
    """Trace out the second factor; returns the left marginal."""
    if isinstance(F, CouplingOperator):
        F, dims = F.matrix, F.dims
    F = np.asarray(F)
    n1, n2 = _split_dims(F, dims)
    return np.einsum("ijkj->ik", F.reshape(n1, n2, n1, n2))


def partial_trace_left(F, dims=None) -> np.ndarray:
    """Trace out the first factor; returns the right marginal."""
    if isinstance(F, CouplingOperator):
        F, dims = F.matrix, F.dims
    F = np.asarray(F)
    n1, n2 = _split_dims(F, dims)
    return np.einsum("ijil->jl", F.reshape(n1, n2, n1, n2))


def marginal_residual(F: np.ndarray, R: np.ndarray, S: np.ndarray) -> float:
    dims = (R.shape[0], S.shape[0])
    return max(
        float(np.abs(partial_trace_right(F, dims) - R).max()),
        float(np.abs(partial_trace_left(F, dims) - S).max()),
    )


def tensor_coupling(R: DensityOperator, S: DensityOperator) -> CouplingOperator:
    """The product coupling R (x) S."""
    return CouplingOperator(np.kron(R.matrix, S.matrix), R, S)


# ---------------------------------------------------------------------------
# spectral helpers
# ---------------------------------------------------------------------------

def psd_sqrt(m: np.ndarray, neg_tol: float = 1e-6) -> np.ndarray:
    """Hermitian square root of a PSD matrix; tiny negative eigenvalues are clipped."""
    w, v = np.linalg.eigh(hermitian_part(m))
    scale = max(1.0, float(np.abs(w).max(initial=0.0)))
    if w.size and w[0] < -neg_tol * scale:
        raise ValueError(f"matrix is not positive semidefinite (eigenvalue {w[0]:.3e})")
    root = np.sqrt(np.clip(w, 0.0, None))
    return (v * root) @ v.conj().T


def support_projector(R, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis (columns) of Ker(R)^perp, ordered by decreasing eigenvalue.

    Eigenvalues count as nonzero above ``rank_tol`` times the largest one.
    """
    m = R.matrix if isinstance(R, DensityOperator) else np.asarray(R)
    w, v = np.linalg.eigh(hermitian_part(m))
    keep = w > rank_tol * max(w[-1], 0.0)
    basis = v[:, keep][:, ::-1]
    # fix each column's phase: largest-modulus entry real positive
    idx = np.argmax(np.abs(basis), axis=0)
    phases = basis[idx, np.arange(basis.shape[1])]
    return basis * (np.abs(phases) / phases)


def compress(op: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """``basis^dagger op basis``."""
    return basis.conj().T @ op @ basis


def lift_coupling(F: np.ndarray, left_basis: np.ndarray, right_basis: np.ndarray) -> np.ndarray:
    """Embed a support-space coupling back into the full product space."""
    U = np.kron(left_basis, right_basis)
    return U @ F @ U.conj().T


# ---------------------------------------------------------------------------
# Toeplitz quantization and Husimi transform
# ---------------------------------------------------------------------------

def toeplitz_quantize(
    measure: PhaseSpaceMeasure,
    space: FockSpace,
    tail_tol: float = DEFAULT_TAIL_TOL,
    label: str = "",
) -> DensityOperator:
    """``sum_k w_k |q_k, p_k><q_k, p_k|`` renormalized to unit trace.

    Raises :class:`TruncationError` when a coherent state's tail exceeds
    ``tail_tol``; the trace deficit before renormalization is stored in
    ``meta["trace_deficit"]``.
    """
    if measure.dim_d != space.dim_d:
        raise ValueError(f"measure lives in d={measure.dim_d}, space has d={space.dim_d}")
    rho = np.zeros((space.dim, space.dim), dtype=complex)
    for q, p, w in zip(measure.q, measure.p, measure.weights):
        tail = coherent_tail(space, q, p)
        if tail > tail_tol:
            raise TruncationError(
                f"coherent state at q={q}, p={p} has tail {tail:.3e} > {tail_tol:.1e} at cutoff {space.cutoff}"
            )
        v = coherent_state(space, q, p, tail_tol=np.inf)
        rho += w * np.outer(v, v.conj())
    tr = np.trace(rho).real
    return DensityOperator(
        rho / tr,
        space,
        label=label,
        meta={"trace_deficit": 1.0 - tr, "renormalization": 1.0 / tr},
    )


def husimi(op, space: FockSpace, q, p) -> complex:
    """Husimi transform ``(2 pi hbar)^{-k d} <z|op|z>`` at the phase-space point z.

    For a two-particle operator (dimension ``space.dim**2``) pass
    concatenated coordinates ``q = (q1, q2)``, ``p = (p1, p2)``; ``k`` is
    the number of particles.
    """
    m = op.matrix if isinstance(op, DensityOperator) else np.asarray(op)
    q = np.atleast_1d(np.asarray(q, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    d = space.dim_d
    if m.shape == (space.dim, space.dim):
        particles = 1
    elif m.shape == (space.dim**2, space.dim**2):
        particles = 2
    else:
        raise ValueError(f"operator shape {m.shape} does not match space dimension {space.dim}")
    if q.size != particles * d or p.size != particles * d:
        raise ValueError(f"expected {particles * d} coordinates")
    # only the components inside the truncated space enter <z|op|z>, so no tail warning
    z = np.ones(1, dtype=complex)
    for k in range(particles):
        z = np.kron(z, coherent_state(space, q[k * d:(k + 1) * d], p[k * d:(k + 1) * d], tail_tol=np.inf))
    val = np.vdot(z, m @ z) / (2 * np.pi * space.hbar) ** (particles * d)
    return complex(val)


# ---------------------------------------------------------------------------
# energy / trace identity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnergyCheck:
    lhs: float
    rhs: float
    gap: float
    consistent: bool


def energy_trace_identity_check(F, H: np.ndarray, R: Optional[np.ndarray] = None, tol: float = 1e-8) -> EnergyCheck:
    """Compare ``tr(F^1/2 (H x I) F^1/2)`` with ``tr(R^1/2 H R^1/2)``.

    ``R`` defaults to the coupling's declared left marginal. The identity
    holds whenever R really is the left partial trace of F; ``consistent``
    is False when the gap exceeds ``tol``.
    """
    if isinstance(F, CouplingOperator):
        if R is None:
            R = F.marginal_left.matrix
        F = F.matrix
    if R is None:
        raise ValueError("left marginal required for a raw matrix")
    R = np.asarray(R)
    n2 = F.shape[0] // R.shape[0]
    root_f = psd_sqrt(F)
    lhs = np.trace(root_f @ np.kron(H, np.eye(n2)) @ root_f).real
    root_r = psd_sqrt(R)
    rhs = np.trace(root_r @ H @ root_r).real
    gap = abs(lhs - rhs)
    return EnergyCheck(float(lhs), float(rhs), float(gap), bool(gap <= tol))


# ---------------------------------------------------------------------------
# JSON density specification
# ---------------------------------------------------------------------------

def density_from_spec(spec: dict, cutoff: Optional[int] = None, tail_tol: float = DEFAULT_TAIL_TOL):
    """Parse the JSON density schema; returns ``(DensityOperator, measure or None)``.

    ``coherent_mixture`` entries are Toeplitz-quantized at ``cutoff`` (auto
    chosen when None); ``fock_matrix`` entries fix the cutoff from the
    matrix size.
    """
    from .fock import choose_cutoff

    hbar = float(spec["hbar"])
    d = int(spec.get("d", 1))
    kind = spec["kind"]
    if kind == "coherent_mixture":
        pts = spec["points"]
        measure = PhaseSpaceMeasure.from_points(
            [(pt["q"], pt["p"]) for pt in pts], [float(pt["w"]) for pt in pts]
        )
        if measure.dim_d != d:
            raise ValueError(f"points have dimension {measure.dim_d}, spec says d={d}")
        n = cutoff if cutoff is not None else choose_cutoff(measure.points(), hbar, tail_tol)
        space = FockSpace(hbar, n, d)
        return toeplitz_quantize(measure, space, tail_tol), measure
    if kind == "fock_matrix":
        re = np.asarray(spec["matrix"]["re"], dtype=float)
        im = np.asarray(spec["matrix"].get("im", np.zeros_like(re)), dtype=float)
        m = re + 1j * im
        n = round(m.shape[0] ** (1.0 / d))
        if n**d != m.shape[0]:
            raise ValueError(f"matrix size {m.shape[0]} is not a power N^{d}")
        return DensityOperator(m, FockSpace(hbar, n, d)), None
    raise ValueError(f"unknown density kind {kind!r}")

"""Optimality diagnostics for quantum couplings.

Quantum derivatives follow the commutator conventions

    D_q S = (i/hbar) [P, S],      D_p S = -(i/hbar) [Q, S],

so that D_q(H/2) = Q and D_p(H/2) = P for H = Q^2 + P^2.

For an optimal pair the dual slack K = C - A (x) I - I (x) B annihilates
the optimal coupling, K F = 0, and therefore F^1/2 [T, K] F^1/2 = 0 for
every operator T. Choosing T among (i/hbar) P_j, -(i/hbar) Q_j on either
factor gives the transport-structure identities evaluated here; each
residual is the Frobenius norm of the corresponding sandwiched matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import subspace_angles

from .fock import FockSpace, canonical_operators, harmonic_hamiltonian
from .states import RANK_TOL, hermitian_part, partial_trace_left, partial_trace_right, psd_sqrt, support_projector


def commutator(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return x @ y - y @ x


def quantum_derivative(op: np.ndarray, conj_op: np.ndarray, hbar: float, sign: int = 1) -> np.ndarray:
    """``sign * (i/hbar) [conj_op, op]``.

    ``D_q`` is ``quantum_derivative(S, P, hbar)`` and ``D_p`` is
    ``quantum_derivative(S, Q, hbar, sign=-1)``.
    """
    op = np.asarray(op)
    conj_op = np.asarray(conj_op)
    if op.shape != conj_op.shape:
        raise ValueError(f"dimension mismatch: {op.shape} vs {conj_op.shape}")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    return sign * (1j / hbar) * commutator(conj_op, op)


def d_q(op: np.ndarray, P: np.ndarray, hbar: float) -> np.ndarray:
    return quantum_derivative(op, P, hbar, 1)


def d_p(op: np.ndarray, Q: np.ndarray, hbar: float) -> np.ndarray:
    return quantum_derivative(op, Q, hbar, -1)


def sandwich_norm(F_sqrt: np.ndarray, X: np.ndarray) -> float:
    return float(np.linalg.norm(F_sqrt @ X @ F_sqrt))


# ---------------------------------------------------------------------------
# kernel criterion
# ---------------------------------------------------------------------------

def range_null_angles(F: np.ndarray, slack: np.ndarray, null_tol: float, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Angle of each range direction of F to the eigenspace of ``slack`` below ``null_tol``.

    Directions that cannot fit into a smaller null space are reported at pi/2.
    """
    range_basis = support_projector(F, rank_tol)
    w, v = np.linalg.eigh(hermitian_part(slack))
    null = v[:, w < null_tol]
    k = range_basis.shape[1]
    if null.shape[1] == 0:
        return np.full(k, np.pi / 2)
    if null.shape[1] < k:
        ang = subspace_angles(null, range_basis)
        return np.concatenate([ang, np.full(k - null.shape[1], np.pi / 2)])
    proj = null @ (null.conj().T @ range_basis)
    resid = np.linalg.norm(range_basis - proj, axis=0)
    return np.arcsin(np.clip(resid, 0.0, 1.0))


@dataclass(frozen=True)
class KernelResult:
    angles: np.ndarray
    passed: bool
    null_dim: int
    rank: int
    min_slack: float

    @property
    def max_angle(self) -> float:
        return float(self.angles.max()) if self.angles.size else 0.0


def kernel_criterion(
    cost: np.ndarray,
    A: np.ndarray,
    B: np.ndarray,
    F: np.ndarray,
    tol: float = 1e-4,
    null_rel: float = 1e-6,
    rank_tol: float = RANK_TOL,
) -> KernelResult:
    """Check that range(F) lies in the near-kernel of ``cost - A (x) I - I (x) B``.

    The near-kernel is spanned by eigenvectors with eigenvalue below
    ``null_rel * ||cost||_2``.
    """
    n1, n2 = A.shape[0], B.shape[0]
    slack = cost - np.kron(A, np.eye(n2)) - np.kron(np.eye(n1), B)
    w = np.linalg.eigvalsh(hermitian_part(slack))
    null_tol = null_rel * max(1.0, float(np.linalg.norm(cost, 2)))
    angles = range_null_angles(F, slack, null_tol, rank_tol)
    return KernelResult(
        angles=angles,
        passed=bool(angles.size == 0 or angles.max() < tol),
        null_dim=int(np.sum(w < null_tol)),
        rank=int(angles.size),
        min_slack=float(w[0]),
    )


# ---------------------------------------------------------------------------
# transport structure residuals
# ---------------------------------------------------------------------------

@dataclass
class StructureReport:
    """Residual norms of the transport identities, one array entry per axis."""

    variant: str  # "full" or "finite_rank"
    residuals: dict = field(default_factory=dict)
    calA: Optional[np.ndarray] = field(default=None, repr=False)
    calB: Optional[np.ndarray] = field(default=None, repr=False)

    def max_residual(self) -> float:
        return max((float(np.max(v)) for v in self.residuals.values()), default=0.0)

    def as_dict(self) -> dict:
        return {"variant": self.variant, "residuals": {k: np.asarray(v).tolist() for k, v in self.residuals.items()}}


def _sqrt_or_given(F: np.ndarray, F_sqrt: Optional[np.ndarray]) -> np.ndarray:
    return psd_sqrt(F) if F_sqrt is None else np.asarray(F_sqrt)


def transport_residuals_full(
    F: np.ndarray,
    A: np.ndarray,
    B: np.ndarray,
    space: FockSpace,
    F_sqrt: Optional[np.ndarray] = None,
    check_feasibility: bool = True,
    feas_tol: float = 1e-9,
) -> StructureReport:
    """Residuals of ``F^1/2 (I x Z - D A_cal x I) F^1/2`` and the mirrored identities.

    ``A``, ``B`` act on the full truncated one-particle space and
    ``A_cal = (H - A)/2``, ``B_cal = (H - B)/2``. Keys: ``q_A``, ``p_A``
    (first line) and ``q_B``, ``p_B`` (mirrored line).

    These identities presuppose ``A (x) I + I (x) B <= C`` on the whole
    space. With ``check_feasibility`` the smallest eigenvalue of the
    truncated slack is computed first; if it is below ``-feas_tol`` the
    call falls back to :func:`transport_residuals_finite_rank` on the
    supports of the marginals of F (variant ``"finite_rank"``).
    """
    from .cost import build_cost

    n = space.dim
    if F.shape != (n * n, n * n) or A.shape != (n, n) or B.shape != (n, n):
        raise ValueError("operators do not match the two-particle space")
    if check_feasibility:
        C = build_cost(space).matrix
        slack = C - np.kron(A, np.eye(n)) - np.kron(np.eye(n), B)
        margin = float(np.linalg.eigvalsh(hermitian_part(slack))[0])
        if margin < -feas_tol * max(1.0, float(np.linalg.norm(C, 2))):
            U = support_projector(partial_trace_right(F, (n, n)))
            V = support_projector(partial_trace_left(F, (n, n)))
            W = np.kron(U, V)
            return transport_residuals_finite_rank(
                W.conj().T @ F @ W, U.conj().T @ A @ U, V.conj().T @ B @ V, U, V, space
            )
    root = _sqrt_or_given(F, F_sqrt)
    H = harmonic_hamiltonian(space)
    calA = 0.5 * (H - A)
    calB = 0.5 * (H - B)
    eye = np.eye(n)
    qs, ps = canonical_operators(space)
    out = {key: np.zeros(space.dim_d) for key in ("q_A", "p_A", "q_B", "p_B")}
    for j, (Q, P) in enumerate(zip(qs, ps)):
        h = space.hbar
        out["q_A"][j] = sandwich_norm(root, np.kron(eye, Q) - np.kron(d_q(calA, P, h), eye))
        out["p_A"][j] = sandwich_norm(root, np.kron(eye, P) - np.kron(d_p(calA, Q, h), eye))
        out["q_B"][j] = sandwich_norm(root, np.kron(Q, eye) - np.kron(eye, d_q(calB, P, h)))
        out["p_B"][j] = sandwich_norm(root, np.kron(P, eye) - np.kron(eye, d_p(calB, Q, h)))
    return StructureReport("full", out, calA, calB)


def projected_canonical(space: FockSpace, basis: np.ndarray):
    """Compressions ``(Q^R_j, P^R_j, H^R)`` onto ``span(basis)``."""
    qs, ps = canonical_operators(space)
    comp = lambda op: basis.conj().T @ op @ basis  # noqa: E731
    return [comp(q) for q in qs], [comp(p) for p in ps], comp(harmonic_hamiltonian(space))


def finite_rank_residuals(
    F_sqrt: np.ndarray,
    A: np.ndarray,
    B: np.ndarray,
    QR: list,
    PR: list,
    HR: np.ndarray,
    QS: list,
    PS: list,
    HS: np.ndarray,
    hbar: float,
) -> StructureReport:
    """The four commutator identities on ``Ker(R)^perp (x) Ker(S)^perp``.

    With ``A' = (H^R - A)/2`` and generators ``T = (i/hbar) P_j``,
    ``-(i/hbar) Q_j`` on each factor the residuals are

        F^1/2 (sum_k [T, Q^R_k] x Q^S_k + [T, P^R_k] x P^S_k - [T, A'] x I) F^1/2

    and the mirrored expressions. Keys ``q_A``, ``p_A``, ``q_B``, ``p_B``
    name the generator (``q`` for the P_j generator defining D_q).
    """
    n1, n2 = A.shape[0], B.shape[0]
    I1, I2 = np.eye(n1), np.eye(n2)
    calA = 0.5 * (HR - A)
    calB = 0.5 * (HS - B)
    d = len(QR)
    out = {key: np.zeros(d) for key in ("q_A", "p_A", "q_B", "p_B")}
    for j in range(d):
        gens = {"q": (1j / hbar) * PR[j], "p": (-1j / hbar) * QR[j]}
        for key, T in gens.items():
            X = sum(np.kron(commutator(T, QR[k]), QS[k]) + np.kron(commutator(T, PR[k]), PS[k]) for k in range(d))
            X = X - np.kron(commutator(T, calA), I2)
            out[f"{key}_A"][j] = sandwich_norm(F_sqrt, X)
        gens = {"q": (1j / hbar) * PS[j], "p": (-1j / hbar) * QS[j]}
        for key, T in gens.items():
            X = sum(np.kron(QR[k], commutator(T, QS[k])) + np.kron(PR[k], commutator(T, PS[k])) for k in range(d))
            X = X - np.kron(I1, commutator(T, calB))
            out[f"{key}_B"][j] = sandwich_norm(F_sqrt, X)
    return StructureReport("finite_rank", out, calA, calB)


def transport_residuals_finite_rank(
    F: np.ndarray,
    A: np.ndarray,
    B: np.ndarray,
    left_basis: np.ndarray,
    right_basis: np.ndarray,
    space: FockSpace,
    F_sqrt: Optional[np.ndarray] = None,
) -> StructureReport:
    """Finite-rank identities with operators compressed onto the given bases.

    ``F``, ``A`` and ``B`` are expressed in the product of the bases.
    """
    for name, basis in (("left", left_basis), ("right", right_basis)):
        gram = basis.conj().T @ basis
        if np.abs(gram - np.eye(basis.shape[1])).max() > 1e-10:
            raise ValueError(f"{name} basis is not orthonormal")
    QR, PR, HR = projected_canonical(space, left_basis)
    QS, PS, HS = projected_canonical(space, right_basis)
    root = _sqrt_or_given(F, F_sqrt)
    return finite_rank_residuals(root, A, B, QR, PR, HR, QS, PS, HS, space.hbar)


def linear_map_residual(F_sqrt: np.ndarray, XR: np.ndarray, XS: np.ndarray, coefficient: complex) -> float:
    """``|| F^1/2 (I x XS - c XR x I) F^1/2 ||``: is XS the image of c XR under F?"""
    I1, I2 = np.eye(XR.shape[0]), np.eye(XS.shape[0])
    return sandwich_norm(F_sqrt, np.kron(I1, XS) - coefficient * np.kron(XR, I2))


# ---------------------------------------------------------------------------
# Ehrenfest pairing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EhrenfestResult:
    lhs: np.ndarray
    rhs: np.ndarray
    lhs_mirror: np.ndarray
    rhs_mirror: np.ndarray
    gap: float


def ehrenfest_check(
    F: np.ndarray,
    A: np.ndarray,
    B: np.ndarray,
    space: FockSpace,
    left_basis: Optional[np.ndarray] = None,
    right_basis: Optional[np.ndarray] = None,
) -> EhrenfestResult:
    """Traced transport identities: expectations of Z against those of grad^Q.

    Full space (no bases): ``lhs = tr(Z R)``, ``rhs = tr(grad^Q B_cal S)``
    and mirrored ``tr(Z S)`` against ``tr(grad^Q A_cal R)``, where
    ``Z = (Q_1..Q_d, P_1..P_d)`` and R, S are the marginals of F.

    With bases the compressed operators replace Q, P, H, and the left side
    becomes the pairing ``tr(F sum_k Q^R_k x T Q^S_k + ...)`` that reduces
    to ``tr(Z R)`` when the compressed commutators are canonical.
    """
    d = space.dim_d
    if left_basis is None:
        n = space.dim
        R = partial_trace_right(F, (n, n))
        S = partial_trace_left(F, (n, n))
        qs, ps = canonical_operators(space)
        H = harmonic_hamiltonian(space)
        calA, calB = 0.5 * (H - A), 0.5 * (H - B)
        Z = qs + ps
        gradA = [d_q(calA, P, space.hbar) for P in ps] + [d_p(calA, Q, space.hbar) for Q in qs]
        gradB = [d_q(calB, P, space.hbar) for P in ps] + [d_p(calB, Q, space.hbar) for Q in qs]
        lhs = np.array([np.trace(z @ R).real for z in Z])
        rhs = np.array([np.trace(g @ S).real for g in gradB])
        lhs_m = np.array([np.trace(z @ S).real for z in Z])
        rhs_m = np.array([np.trace(g @ R).real for g in gradA])
    else:
        n1, n2 = left_basis.shape[1], right_basis.shape[1]
        R = partial_trace_right(F, (n1, n2))
        S = partial_trace_left(F, (n1, n2))
        QR, PR, HR = projected_canonical(space, left_basis)
        QS, PS, HS = projected_canonical(space, right_basis)
        calA, calB = 0.5 * (HR - A), 0.5 * (HS - B)
        h = space.hbar
        lhs, rhs, lhs_m, rhs_m = [], [], [], []
        for gens_S, gens_R in (
            ([(1j / h) * P for P in PS], [(1j / h) * P for P in PR]),
            ([(-1j / h) * Q for Q in QS], [(-1j / h) * Q for Q in QR]),
        ):
            for TS, TR in zip(gens_S, gens_R):
                X = sum(np.kron(QR[k], commutator(TS, QS[k])) + np.kron(PR[k], commutator(TS, PS[k])) for k in range(d))
                lhs.append(np.trace(F @ X).real)
                rhs.append(np.trace(S @ commutator(TS, calB)).real)
                X = sum(np.kron(commutator(TR, QR[k]), QS[k]) + np.kron(commutator(TR, PR[k]), PS[k]) for k in range(d))
                lhs_m.append(np.trace(F @ X).real)
                rhs_m.append(np.trace(R @ commutator(TR, calA)).real)
        lhs, rhs, lhs_m, rhs_m = map(np.array, (lhs, rhs, lhs_m, rhs_m))
    gap = float(max(np.abs(lhs - rhs).max(), np.abs(lhs_m - rhs_m).max()))
    return EhrenfestResult(lhs, rhs, lhs_m, rhs_m, gap)

"""Primal and dual coupling problems as small semidefinite programs.

The primal problem

    minimize tr(F C)  over  F >= 0,  Tr_2 F = R,  Tr_1 F = S

is solved by operator splitting between the affine marginal set and the PSD
cone, with a scaled running multiplier and over-relaxation. The multiplier
of the affine projection is, up to the penalty, a pair (A, B) for the dual

    maximize tr(R A) + tr(S B)  subject to  A (x) I + I (x) B <= C,

which is made exactly feasible afterwards by a scalar shift.

All work is done on the supports of R and S; full Fock-space problems are
compressed first with :func:`compress_problem`.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .cost import project_cost
from .fock import FockSpace
from .optimality import range_null_angles
from .states import (
    COUPLING_TOL,
    RANK_TOL,
    DensityOperator,
    compress,
    hermitian_part,
    lift_coupling,
    marginal_residual,
    partial_trace_left,
    partial_trace_right,
    support_projector,
)


_TRACE = False


class InfeasibleProblem(ValueError):
    """Marginals cannot be coupled (trace mismatch, non-PSD input, ...)."""


@dataclass(frozen=True)
class SolverOptions:
    rho: float = 1.0
    tol: float = 1e-9
    max_iter: int = 200_000
    feas_tol: float = 1e-9
    gap_rel: float = 1e-6
    relax: float = 1.6
    check_every: int = 10
    history: int = 50
    precondition: bool = True
    adaptive: bool = True
    balance: float = 10.0
    rho_factor: float = 2.0
    method: str = "auto"
    fallback_iter: int = 5000
    ipm_tol: float = 1e-12
    ipm_max_iter: int = 100
    polish_rank: float = 1e-7

    def gap_tol(self, value: float) -> float:
        return self.gap_rel * (1.0 + abs(value))


@dataclass(frozen=True)
class PrimalProblem:
    """Coupling problem on support spaces of dimensions ``r_R`` and ``r_S``."""

    cost: np.ndarray
    marginal_left: np.ndarray
    marginal_right: np.ndarray
    left_basis: Optional[np.ndarray] = field(default=None, repr=False)
    right_basis: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        R = hermitian_part(np.asarray(self.marginal_left, dtype=complex))
        S = hermitian_part(np.asarray(self.marginal_right, dtype=complex))
        C = hermitian_part(np.asarray(self.cost, dtype=complex))
        n1, n2 = R.shape[0], S.shape[0]
        if C.shape != (n1 * n2, n1 * n2):
            raise ValueError(f"cost shape {C.shape} does not match marginal ranks ({n1}, {n2})")
        for name, m in (("left", R), ("right", S)):
            if abs(np.trace(m).real - 1.0) > 1e-10:
                raise InfeasibleProblem(f"{name} marginal has trace {np.trace(m).real!r}")
            if np.linalg.eigvalsh(m)[0] < -1e-10:
                raise InfeasibleProblem(f"{name} marginal is not positive semidefinite")
        object.__setattr__(self, "cost", C)
        object.__setattr__(self, "marginal_left", R)
        object.__setattr__(self, "marginal_right", S)

    @property
    def dims(self) -> tuple[int, int]:
        return self.marginal_left.shape[0], self.marginal_right.shape[0]

    def shifted(self, t: float) -> "PrimalProblem":
        """Same problem with cost ``C + t I``."""
        return PrimalProblem(
            self.cost + t * np.eye(self.cost.shape[0]),
            self.marginal_left,
            self.marginal_right,
            self.left_basis,
            self.right_basis,
        )


def compress_problem(R, S, space: Optional[FockSpace] = None, rank_tol: float = RANK_TOL) -> PrimalProblem:
    """Restrict a Fock-space coupling problem to ``Ker(R)^perp (x) Ker(S)^perp``."""
    if isinstance(R, DensityOperator):
        space = space or R.space
        R = R.matrix
    if isinstance(S, DensityOperator):
        space = space or S.space
        S = S.matrix
    if space is None:
        raise ValueError("a FockSpace is needed to build the cost")
    if R.shape != S.shape:
        raise InfeasibleProblem(f"marginals live in different spaces: {R.shape} vs {S.shape}")
    U = support_projector(R, rank_tol)
    V = support_projector(S, rank_tol)
    Rc, Sc = compress(R, U), compress(S, V)
    # renormalize the tiny mass lost below the rank threshold
    Rc /= np.trace(Rc).real
    Sc /= np.trace(Sc).real
    return PrimalProblem(project_cost(space, U, V), Rc, Sc, U, V)


# ---------------------------------------------------------------------------
# projections
# ---------------------------------------------------------------------------

def _affine_correction(M: np.ndarray, R: np.ndarray, S: np.ndarray):
    """Pair (A, B) with ``M + A (x) I + I (x) B`` the projection onto the marginal set."""
    n1, n2 = R.shape[0], S.shape[0]
    D1 = R - partial_trace_right(M, (n1, n2))
    D2 = S - partial_trace_left(M, (n1, n2))
    delta = 1.0 - np.trace(M)
    # the two trace constraints coincide; split the trace defect evenly
    tA = delta / (2 * n2)
    tB = delta / (2 * n1)
    A = (D1 - tB * np.eye(n1)) / n2
    B = (D2 - tA * np.eye(n2)) / n1
    return A, B


def _scaled_correction(M: np.ndarray, Rh: np.ndarray, Sh: np.ndarray):
    """Correction pair for the weighted constraints of the preconditioned problem.

    Projects onto ``Tr_2((I x Sh) F) = Rh``, ``Tr_1((Rh x I) F) = Sh`` where
    ``Rh``, ``Sh`` have unit Frobenius norm; the projection is
    ``M + A (x) Sh + Rh (x) B``.
    """
    n1, n2 = Rh.shape[0], Sh.shape[0]
    M4 = M.reshape(n1, n2, n1, n2)
    E1 = Rh - np.einsum("ijkl,lj->ik", M4, Sh)
    E2 = Sh - np.einsum("ijkl,ki->jl", M4, Rh)
    tau = np.trace(Rh @ E1)
    return E1 - (tau / 2) * Rh, E2 - (tau / 2) * Sh


def _hermitian_power(M: np.ndarray, p: float):
    """``M^p`` and ``M^-p`` for a positive definite Hermitian matrix."""
    w, v = np.linalg.eigh(M)
    if w[0] <= 0:
        raise InfeasibleProblem("marginal is singular on its declared support")
    return (v * w**p) @ v.conj().T, (v * w**-p) @ v.conj().T


def _kron_sum(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return np.kron(A, np.eye(B.shape[0])) + np.kron(np.eye(A.shape[0]), B)


def affine_project(M: np.ndarray, problem: PrimalProblem) -> np.ndarray:
    """Frobenius-nearest matrix to ``M`` with partial traces (R, S)."""
    M = np.asarray(M, dtype=complex)
    n = problem.cost.shape[0]
    if M.shape != (n, n):
        raise ValueError(f"matrix shape {M.shape} does not match problem dimension {n}")
    A, B = _affine_correction(M, problem.marginal_left, problem.marginal_right)
    return M + _kron_sum(A, B)


def psd_project(M: np.ndarray) -> np.ndarray:
    """Frobenius-nearest PSD matrix (negative eigenvalues clipped)."""
    w, v = np.linalg.eigh(hermitian_part(M))
    w = np.clip(w, 0.0, None)
    return (v * w) @ v.conj().T


# ---------------------------------------------------------------------------
# solver
# ---------------------------------------------------------------------------

@dataclass
class SolveReport:
    primal_value: float
    dual_value: float
    F: np.ndarray = field(repr=False)
    A: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)
    gap: float
    iterations: int
    primal_residual: float
    dual_residual: float
    converged: bool
    feasibility_margin: float = 0.0
    marginal_error: float = 0.0
    residual_history: list = field(default_factory=list, repr=False)
    method: str = "admm"

    @property
    def value(self) -> float:
        return self.primal_value

    def lifted_coupling(self, problem: PrimalProblem) -> np.ndarray:
        if problem.left_basis is None:
            return self.F
        return lift_coupling(self.F, problem.left_basis, problem.right_basis)


def dual_slack(cost: np.ndarray, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return cost - _kron_sum(A, B)


def make_feasible(cost: np.ndarray, A: np.ndarray, B: np.ndarray, feas_tol: float = 0.0):
    """Shift (A, B) down by equal scalars until ``C - A (x) I - I (x) B >= 0``.

    Returns the shifted pair and the final smallest slack eigenvalue.
    """
    lo = np.linalg.eigvalsh(dual_slack(cost, A, B))[0]
    if lo < 0:
        t = -lo / 2
        A = A - t * np.eye(A.shape[0])
        B = B - t * np.eye(B.shape[0])
        lo = np.linalg.eigvalsh(dual_slack(cost, A, B))[0]
    if lo < -feas_tol:
        # rounding of the shifted spectrum; one more nudge suffices
        A = A + (lo / 2) * np.eye(A.shape[0])
        B = B + (lo / 2) * np.eye(B.shape[0])
        lo = np.linalg.eigvalsh(dual_slack(cost, A, B))[0]
    return A, B, float(lo)


def _dual_value(problem: PrimalProblem, A: np.ndarray, B: np.ndarray) -> float:
    return float(np.trace(problem.marginal_left @ A).real + np.trace(problem.marginal_right @ B).real)


def _finish(problem, opts, F, A, B, iterations, r_p, r_d, converged, history) -> SolveReport:
    A = hermitian_part(A)
    B = hermitian_part(B)
    A, B, margin = make_feasible(problem.cost, A, B, opts.feas_tol)
    primal = float(np.trace(F @ problem.cost).real)
    dual = _dual_value(problem, A, B)
    return SolveReport(
        primal_value=primal,
        dual_value=dual,
        F=F,
        A=A,
        B=B,
        gap=primal - dual,
        iterations=iterations,
        primal_residual=r_p,
        dual_residual=r_d,
        converged=converged,
        feasibility_margin=margin,
        marginal_error=marginal_residual(F, problem.marginal_left, problem.marginal_right),
        residual_history=list(history),
    )


def _solve_product(problem: PrimalProblem, opts: SolverOptions) -> SolveReport:
    """A rank-one marginal forces ``F = R (x) S``; the dual is read off the cost."""
    R, S, C = problem.marginal_left, problem.marginal_right, problem.cost
    n1, n2 = problem.dims
    F = np.kron(R, S)
    if n1 == 1:
        A = np.zeros((1, 1), dtype=complex)
        B = C.copy()
    else:
        A = C.copy()
        B = np.zeros((1, 1), dtype=complex)
    return replace(_finish(problem, opts, F, A, B, 0, 0.0, 0.0, True, []), method="product")


def solve_primal(problem: PrimalProblem, opts: Optional[SolverOptions] = None) -> SolveReport:
    """Minimize ``tr(F C)`` over couplings of the problem's marginals.

    When either support is one-dimensional the coupling set is the single
    point ``R (x) S`` and no iteration is needed. Otherwise the splitting
    iteration runs until both residuals fall below ``opts.tol`` and the
    duality gap of the recovered (A, B) is within ``opts.gap_tol``.

    With ``opts.method == "auto"`` a splitting run that has not certified
    after ``opts.fallback_iter`` iterations (near-singular marginals make
    the dual converge very slowly) is handed to the interior-point solver.
    The report carries ``converged=False`` if no stage certifies.
    """
    opts = opts or SolverOptions()
    n1, n2 = problem.dims
    if n1 == 1 or n2 == 1:
        return _solve_product(problem, opts)
    if opts.method == "ipm":
        return solve_interior_point(problem, opts)
    if opts.method == "admm":
        return _solve_admm(problem, opts, opts.max_iter)
    if opts.method != "auto":
        raise ValueError(f"unknown method {opts.method!r}")
    report = _solve_admm(problem, opts, min(opts.fallback_iter, opts.max_iter))
    if report.converged or opts.fallback_iter >= opts.max_iter:
        return report
    fallback = solve_interior_point(problem, opts)
    fallback.iterations += report.iterations
    if fallback.converged or abs(fallback.gap) < abs(report.gap):
        return fallback
    return report


def _solve_admm(problem: PrimalProblem, opts: SolverOptions, max_iter: int) -> SolveReport:
    n1, n2 = problem.dims
    C = problem.cost
    R, S = problem.marginal_left, problem.marginal_right
    rho, alpha = opts.rho, opts.relax
    n = C.shape[0]
    eye1, eye2 = np.eye(n1), np.eye(n2)

    if opts.precondition:
        # F = T Ft T with T = R^1/4 (x) S^1/4 balances the eigenvalues of the
        # optimal coupling; the marginal constraints become
        # Tr_2((I x S^1/2) Ft) = R^1/2 and Tr_1((R^1/2 x I) Ft) = S^1/2
        R4, R4inv = _hermitian_power(R, 0.25)
        S4, S4inv = _hermitian_power(S, 0.25)
        T = np.kron(R4, S4)
        Cs = T @ C @ T
        Rh, Sh = R4 @ R4, S4 @ S4

        def correction(M):
            A_s, B_s = _scaled_correction(M, Rh, Sh)
            return A_s, B_s, np.kron(A_s, Sh) + np.kron(Rh, B_s)

        def unscale(Z, A_s, B_s, rho):
            return T @ Z @ T, rho * R4inv @ A_s @ R4inv, rho * S4inv @ B_s @ S4inv

        Z = np.kron(R4inv @ R @ R4inv, S4inv @ S @ S4inv)
    else:
        Cs = C

        def correction(M):
            A_s, B_s = _affine_correction(M, R, S)
            return A_s, B_s, np.kron(A_s, eye2) + np.kron(eye1, B_s)

        def unscale(Z, A_s, B_s, rho):
            return Z, rho * A_s, rho * B_s

        Z = np.kron(R, S)

    scale = max(1.0, float(np.abs(Cs).max()))
    U = np.zeros((n, n), dtype=complex)
    history: deque = deque(maxlen=opts.history)
    r_p = r_d = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        rho_x = rho
        V = Z - U - Cs / rho
        A_s, B_s, corr = correction(V)
        X = V + corr
        Z_old = Z
        W = alpha * X + (1 - alpha) * Z + U
        # rounding leaves an anti-Hermitian residue; drop it before it accumulates
        W = 0.5 * (W + W.conj().T)
        w, vec = np.linalg.eigh(W)
        pos = w > 0
        Z = (vec[:, pos] * w[pos]) @ vec[:, pos].conj().T
        U = W - Z

        if it % opts.check_every == 0:
            r_p = float(np.linalg.norm(X - Z))
            r_d = float(rho * np.linalg.norm(Z - Z_old))
            history.append(max(r_p, r_d))
            if r_p <= opts.tol and r_d <= opts.tol * scale:
                report = _finish(problem, opts, *unscale(Z, A_s, B_s, rho_x), it, r_p, r_d, True, history)
                if abs(report.gap) <= opts.gap_tol(report.primal_value):
                    return report
            if opts.adaptive:
                # residual balancing; U is the scaled multiplier, so rescale it with rho
                if r_p > opts.balance * r_d:
                    rho *= opts.rho_factor
                    U /= opts.rho_factor
                elif r_d > opts.balance * r_p:
                    rho /= opts.rho_factor
                    U *= opts.rho_factor
    return _finish(problem, opts, *unscale(Z, A_s, B_s, rho_x), it, r_p, r_d, False, history)


# ---------------------------------------------------------------------------
# interior-point solver
# ---------------------------------------------------------------------------

def _constraint_basis(n1: int, n2: int) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Real bases of Hermitian matrices for the left and right marginal constraints.

    The right basis omits the identity direction: tr(Tr_1 F) = tr(Tr_2 F)
    makes that constraint redundant.
    """

    def herm(k, traceless):
        out = []
        for i in range(k):
            for j in range(i, k):
                if i == j:
                    if traceless and i == 0:
                        continue
                    E = np.zeros((k, k), dtype=complex)
                    E[i, i] = 1.0
                    if traceless:
                        E[0, 0] = -1.0
                    out.append(E)
                else:
                    E = np.zeros((k, k), dtype=complex)
                    E[i, j] = E[j, i] = 1.0
                    out.append(E)
                    E = np.zeros((k, k), dtype=complex)
                    E[i, j], E[j, i] = -1j, 1j
                    out.append(E)
        return out

    return herm(n1, False), herm(n2, True)


def _max_step(X: np.ndarray, dX: np.ndarray) -> float:
    """Largest t <= 1 with X + t dX PSD (X positive definite)."""
    L = np.linalg.cholesky(X)
    Li = np.linalg.inv(L)
    lo = np.linalg.eigvalsh(hermitian_part(Li @ dX @ Li.conj().T))[0]
    return 1.0 if lo >= -1.0 else -1.0 / lo


def solve_interior_point(problem: PrimalProblem, opts: Optional[SolverOptions] = None) -> SolveReport:
    """Primal-dual path following with the HKM direction and Mehrotra correction.

    Used as a fallback for near-singular marginals, where the splitting
    method recovers the dual only very slowly.
    """
    opts = opts or SolverOptions()
    C = problem.cost
    R, S = problem.marginal_left, problem.marginal_right
    n1, n2 = problem.dims
    n = n1 * n2
    left, right = _constraint_basis(n1, n2)
    G = [np.kron(E, np.eye(n2)) for E in left] + [np.kron(np.eye(n1), E) for E in right]
    b = np.array([np.vdot(E, R).real for E in left] + [np.vdot(E, S).real for E in right])
    Gstack = np.array(G)
    m = len(G)

    def op(X):
        return np.einsum("kij,ij->k", Gstack.conj(), X).real

    def adj(y):
        return np.einsum("k,kij->ij", y, Gstack)

    cnorm = max(1.0, float(np.linalg.norm(C)))
    bnorm = 1.0 + float(np.linalg.norm(b))
    X = np.eye(n, dtype=complex) / n
    Z = np.eye(n, dtype=complex) * cnorm
    y = np.zeros(m)
    best = (np.inf, X, y, 0, np.inf, np.inf)
    it = 0
    for it in range(1, opts.ipm_max_iter + 1):
        rp = b - op(X)
        Rd = hermitian_part(C - Z - adj(y))
        mu = float(np.vdot(X, Z).real) / n
        r_p = float(np.linalg.norm(rp))
        r_d = float(np.linalg.norm(Rd))
        pobj = float(np.vdot(C, X).real)
        dobj = float(b @ y)
        err = max(r_p / bnorm, r_d / cnorm, abs(pobj - dobj) / (1 + abs(pobj)))
        if _TRACE:
            print(it, r_p, r_d, pobj, dobj, mu)
        if err < best[0]:
            best = (err, X, y, it, r_p, r_d)
        if err <= opts.ipm_tol:
            break
        try:
            X, y, Z = _ipm_step(X, y, Z, rp, Rd, Gstack, op, adj)
        except np.linalg.LinAlgError:
            # iterates have left the numerically positive definite region
            break

    _, X, y, it, r_p, r_d = best
    nl = len(left)
    A = sum(c * E for c, E in zip(y[:nl], left))
    B = sum(c * E for c, E in zip(y[nl:], right))
    F = _polish_coupling(problem, X, opts.polish_rank)
    if F is None:
        F = X
    report = _finish(problem, opts, F, A, B, it, r_p, r_d, True, [])
    report.method = "ipm"
    report.converged = abs(report.gap) <= opts.gap_tol(report.primal_value) and report.marginal_error <= COUPLING_TOL
    return report


def _ipm_step(X, y, Z, rp, Rd, Gstack, op, adj):
    """One predictor-corrector step; raises LinAlgError on numerical breakdown."""
    n = X.shape[0]
    mu = float(np.vdot(X, Z).real) / n
    Zi = np.linalg.inv(Z)
    XG = np.einsum("ij,kjl->kil", X, Gstack)
    K = np.einsum("kil,lm->kim", XG, Zi)
    M = np.einsum("aij,bij->ab", Gstack.conj(), K).real
    M = 0.5 * (M + M.T)

    def direction(target, corr):
        # dX = target Z^-1 - X - X dZ Z^-1 - corr Z^-1, kept Hermitian
        base = target * Zi - X - X @ Rd @ Zi - corr @ Zi
        dy = np.linalg.solve(M, rp - op(hermitian_part(base)))
        dZ = hermitian_part(Rd - adj(dy))
        dX = hermitian_part(target * Zi - X - X @ dZ @ Zi - corr @ Zi)
        return dX, dy, dZ

    dXa, _, dZa = direction(0.0, np.zeros_like(X))
    ap = min(1.0, _max_step(X, dXa))
    ad = min(1.0, _max_step(Z, dZa))
    mu_aff = float(np.vdot(X + ap * dXa, Z + ad * dZa).real) / n
    sigma = min(1.0, max(mu_aff, 0.0) / mu) ** 3
    dX, dy, dZ = direction(sigma * mu, dXa @ dZa)
    ap = min(1.0, 0.95 * _max_step(X, dX))
    ad = min(1.0, 0.95 * _max_step(Z, dZ))
    return hermitian_part(X + ap * dX), y + ad * dy, hermitian_part(Z + ad * dZ)


def _hermitian_basis(k: int) -> list[np.ndarray]:
    out = []
    for i in range(k):
        for j in range(i, k):
            E = np.zeros((k, k), dtype=complex)
            E[i, j] = E[j, i] = 1.0
            out.append(E)
            if i != j:
                E = np.zeros((k, k), dtype=complex)
                E[i, j], E[j, i] = 1j, -1j
                out.append(E)
    return out


def _polish_coupling(problem: PrimalProblem, F: np.ndarray, rank_rel: float) -> Optional[np.ndarray]:
    """Solve the marginal equations exactly on the numerical range of ``F``.

    Writes the coupling as ``V G V^dagger`` with V the eigenvectors of F
    above ``rank_rel`` times its largest eigenvalue and fits Hermitian G by
    least squares. Returns None unless G is PSD, the marginals are met more
    accurately than by F and the objective does not increase beyond rounding.
    """
    R, S = problem.marginal_left, problem.marginal_right
    dims = problem.dims
    w, v = np.linalg.eigh(F)
    V = v[:, w > rank_rel * w[-1]]
    basis = _hermitian_basis(V.shape[1])

    def flat(*ms):
        f = np.concatenate([m.ravel() for m in ms])
        return np.concatenate([f.real, f.imag])

    cols = []
    for E in basis:
        M = V @ E @ V.conj().T
        cols.append(flat(partial_trace_right(M, dims), partial_trace_left(M, dims)))
    coef, *_ = np.linalg.lstsq(np.array(cols).T, flat(R, S), rcond=None)
    G = sum(c * E for c, E in zip(coef, basis))
    out = hermitian_part(V @ G @ V.conj().T)
    if np.linalg.eigvalsh(G)[0] < -1e-12 or marginal_residual(out, R, S) >= marginal_residual(F, R, S):
        return None
    C = problem.cost
    if np.trace(out @ C).real > np.trace(F @ C).real + 1e-9 * (1 + abs(np.trace(F @ C).real)):
        return None
    return out


def solve_dual(problem: PrimalProblem, opts: Optional[SolverOptions] = None) -> tuple[np.ndarray, np.ndarray, float]:
    """Feasible dual pair ``(A, B)`` on the supports and its value."""
    report = solve_primal(problem, opts)
    return report.A, report.B, report.dual_value


def mk2(R, S, space: Optional[FockSpace] = None, opts: Optional[SolverOptions] = None) -> SolveReport:
    """Squared quantum transport distance between two Fock-space density operators."""
    return solve_primal(compress_problem(R, S, space), opts)


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CertificateSummary:
    gap: float
    gap_ok: bool
    marginal_error: float
    feasibility_margin: float
    feasible: bool
    slack_eigenvalues: np.ndarray
    range_angle: float
    complementary_slackness: float

    @property
    def ok(self) -> bool:
        return self.gap_ok and self.feasible


def certify(report: SolveReport, problem: PrimalProblem, opts: Optional[SolverOptions] = None, null_rel: float = 1e-6) -> CertificateSummary:
    opts = opts or SolverOptions()
    slack = dual_slack(problem.cost, report.A, report.B)
    w = np.linalg.eigvalsh(slack)
    margin = float(w[0])
    null_tol = null_rel * max(1.0, float(np.linalg.norm(problem.cost, 2)))
    angles = range_null_angles(report.F, slack, null_tol)
    cs = float(np.trace(report.F @ slack).real)
    return CertificateSummary(
        gap=report.gap,
        gap_ok=abs(report.gap) <= opts.gap_tol(report.primal_value),
        marginal_error=marginal_residual(report.F, problem.marginal_left, problem.marginal_right),
        feasibility_margin=margin,
        feasible=margin >= -opts.feas_tol,
        slack_eigenvalues=w[: min(8, w.size)],
        range_angle=float(np.max(angles)) if angles.size else 0.0,
        complementary_slackness=cs,
    )

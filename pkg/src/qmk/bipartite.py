"""Closed forms for matching two symmetric pairs of coherent states.

R = (|a><a| + |-a><-a|)/2 and S = (|b><b| + |-b><-b|)/2 (coherent states
centred at (+-a, 0) and (+-b, 0)) have rank two. In the even/odd bases

    phi_+- = (|a> +- |-a>) / sqrt(2 (1 +- lambda)),   lambda = exp(-a^2/hbar)
    psi_+- = (|b> +- |-b>) / sqrt(2 (1 +- mu)),       mu = exp(-b^2/hbar)

everything reduces to 2x2 and 4x4 real matrices, ordered
{phi_+ psi_+, phi_+ psi_-, phi_- psi_+, phi_- psi_-}. These closed forms
are the reference values for the numerical solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .fock import FockSpace, coherent_state, coherent_tail, DEFAULT_TAIL_TOL, TruncationError
from .states import CouplingOperator, DensityOperator

# relative tolerance for rounding a vanishing discriminant up to zero
DISCRIMINANT_RTOL = 1e-12


@dataclass(frozen=True)
class BipartiteInstance:
    a: float
    b: float
    hbar: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError(f"a and b must be positive, got a={self.a}, b={self.b}")
        if not self.hbar > 0:
            raise ValueError(f"hbar must be positive, got {self.hbar}")

    @property
    def lam(self) -> float:
        return math.exp(-self.a**2 / self.hbar)

    @property
    def mu(self) -> float:
        return math.exp(-self.b**2 / self.hbar)

    @cached_property
    def cost_entries(self) -> dict:
        """Diagonal blocks (without the 2 hbar offset) and couplings of the projected cost."""
        a, b, lam, mu = self.a, self.b, self.lam, self.mu
        ra_lo, ra_hi = a**2 * (1 - lam) / (1 + lam), a**2 * (1 + lam) / (1 - lam)
        rb_lo, rb_hi = b**2 * (1 - mu) / (1 + mu), b**2 * (1 + mu) / (1 - mu)
        s = math.sqrt((1 - lam**2) * (1 - mu**2))
        return {
            "A": ra_lo + rb_lo,
            "B": ra_lo + rb_hi,
            "C": ra_hi + rb_lo,
            "D": ra_hi + rb_hi,
            "gamma": -2 * a * b * (1 - lam * mu) / s,
            "delta": -2 * a * b * (1 + lam * mu) / s,
        }


def marginals(inst: BipartiteInstance) -> tuple[np.ndarray, np.ndarray]:
    """R and S in their even/odd bases: diag((1 +- lambda)/2), diag((1 +- mu)/2)."""
    lam, mu = inst.lam, inst.mu
    return np.diag([(1 + lam) / 2, (1 - lam) / 2]), np.diag([(1 + mu) / 2, (1 - mu) / 2])


def coupling_matrix(inst: BipartiteInstance) -> np.ndarray:
    """The optimal coupling F of the symmetric instance."""
    lam, mu = inst.lam, inst.mu
    off1 = math.sqrt(max((1 + lam * mu) ** 2 - (lam + mu) ** 2, 0.0))
    off2 = math.sqrt(max((1 - lam * mu) ** 2 - (lam - mu) ** 2, 0.0))
    F = np.array([
        [1 + lam * mu + lam + mu, 0, 0, off1],
        [0, 1 - lam * mu + lam - mu, off2, 0],
        [0, off2, 1 - lam * mu - lam + mu, 0],
        [off1, 0, 0, 1 + lam * mu - lam - mu],
    ])
    return F / 4


def _range_vectors(inst: BipartiteInstance) -> tuple[np.ndarray, np.ndarray]:
    # F = u1 u1^T + u2 u2^T with orthogonal u1, u2
    lam, mu = inst.lam, inst.mu
    u1 = 0.5 * np.array([math.sqrt((1 + lam) * (1 + mu)), 0, 0, math.sqrt((1 - lam) * (1 - mu))])
    u2 = 0.5 * np.array([0, math.sqrt((1 + lam) * (1 - mu)), math.sqrt((1 - lam) * (1 + mu)), 0])
    return u1, u2


def coupling_sqrt(inst: BipartiteInstance) -> np.ndarray:
    """Exact square root of :func:`coupling_matrix` from its rank-two factorization.

    Avoids the sqrt(machine epsilon) error an eigendecomposition incurs on
    the two zero eigenvalues.
    """
    out = np.zeros((4, 4))
    for u in _range_vectors(inst):
        out += np.outer(u, u) / np.linalg.norm(u)
    return out


def cost_matrix(inst: BipartiteInstance) -> np.ndarray:
    """Projected cost C' on the range of R (x) S."""
    e = inst.cost_entries
    h2 = 2 * inst.hbar
    return np.array([
        [e["A"] + h2, 0, 0, e["gamma"]],
        [0, e["B"] + h2, e["delta"], 0],
        [0, e["delta"], e["C"] + h2, 0],
        [e["gamma"], 0, 0, e["D"] + h2],
    ])


def mk2_value(inst: BipartiteInstance) -> float:
    """tr(F C') for the closed-form optimal coupling."""
    return float(np.trace(coupling_matrix(inst) @ cost_matrix(inst)))


class DualPair(NamedTuple):
    A: np.ndarray
    B: np.ndarray
    value: float
    margin: float


def _sqrt_discriminant(x: float, c: float) -> float:
    disc = x * x - 4 * c * c
    if disc < 0:
        if disc < -DISCRIMINANT_RTOL * x * x:
            raise ValueError(f"negative discriminant {disc:.3e}: instance outside the closed-form domain")
        disc = 0.0
    return math.sqrt(disc)


def dual_pair(inst: BipartiteInstance, shifted: bool = True, feas_tol: float = 1e-9) -> DualPair:
    """Diagonal optimal potentials (A, B) in the even/odd bases.

    The gauge is fixed by setting the first entry of the unshifted A to zero.
    The closed-form relations belong to the cost without its 2 hbar ground
    energy; ``shifted=True`` adds hbar to each of A and B so the pair is
    optimal for :func:`cost_matrix`. ``margin`` is the smallest eigenvalue
    of ``C' - A (x) I - I (x) B``.
    """
    e = inst.cost_entries
    a, b, lam, mu = inst.a, inst.b, inst.lam, inst.mu
    x = -4 * a * b * (1 - lam**2 * mu**2) / ((1 - lam**2) * (1 - mu**2))
    r1 = _sqrt_discriminant(x, e["gamma"])
    # x^2 = 4 delta^2 exactly when a = b; rounding would leave O(sqrt(eps)) here
    r2 = 0.0 if a == b else _sqrt_discriminant(x, e["delta"])
    # the branch of b - c follows the sign of b - a (the two coincide at a = b)
    if b < a:
        r2 = -r2
    abar = (x + r1) / 2
    bbar = (x + r2) / 2
    cbar = (x - r2) / 2
    alpha1 = 0.0
    beta1 = abar + e["A"] - alpha1
    beta2 = bbar + e["B"] - alpha1
    alpha2 = cbar + e["C"] - beta1
    shift = inst.hbar if shifted else 0.0
    A = np.diag([alpha1, alpha2]) + shift * np.eye(2)
    B = np.diag([beta1, beta2]) + shift * np.eye(2)
    R, S = marginals(inst)
    value = float(np.trace(R @ A) + np.trace(S @ B))
    slack = cost_matrix(inst) - np.kron(A, np.eye(2)) - np.kron(np.eye(2), B)
    margin = float(np.linalg.eigvalsh(slack)[0])
    if shifted and margin < -feas_tol:
        raise ValueError(f"closed-form dual pair is infeasible (margin {margin:.3e})")
    return DualPair(A, B, value, margin)


class ProjectedOperators(NamedTuple):
    QR: np.ndarray
    PR: np.ndarray
    QS: np.ndarray
    PS: np.ndarray
    HR: np.ndarray
    HS: np.ndarray


def _projected_pair(c: float, lam: float, hbar: float):
    s = math.sqrt(1 - lam**2)
    Q = c / s * np.array([[0, 1], [1, 0]], dtype=complex)
    P = -1j * c * lam / s * np.array([[0, 1], [-1, 0]], dtype=complex)
    H = np.diag([c**2 * (1 - lam) / (1 + lam) + hbar, c**2 * (1 + lam) / (1 - lam) + hbar]).astype(complex)
    return Q, P, H


def projected_operators(inst: BipartiteInstance) -> ProjectedOperators:
    """Compressions of Q, P and H onto span{phi_+-} and span{psi_+-}."""
    QR, PR, HR = _projected_pair(inst.a, inst.lam, inst.hbar)
    QS, PS, HS = _projected_pair(inst.b, inst.mu, inst.hbar)
    return ProjectedOperators(QR, PR, QS, PS, HR, HS)


def even_odd_basis(center: float, space: FockSpace) -> np.ndarray:
    """Columns phi_+, phi_- for coherent states at (+-center, 0)."""
    lam = math.exp(-center**2 / space.hbar)
    plus = coherent_state(space, center, 0.0)
    minus = coherent_state(space, -center, 0.0)
    even = (plus + minus) / math.sqrt(2 * (1 + lam))
    odd = (plus - minus) / math.sqrt(2 * (1 - lam))
    return np.stack([even, odd], axis=1)


@dataclass(frozen=True)
class LiftedInstance:
    """Closed-form objects in the truncated Fock basis.

    The lifted coupling lives on the N^2-dimensional two-particle space and
    is only assembled on first access.
    """

    R: DensityOperator
    S: DensityOperator
    left_basis: np.ndarray
    right_basis: np.ndarray
    support_coupling: np.ndarray

    @cached_property
    def F(self) -> CouplingOperator:
        W = np.kron(self.left_basis, self.right_basis)
        return CouplingOperator(W @ self.support_coupling @ W.conj().T, self.R, self.S)


def lift_to_fock(inst: BipartiteInstance, space: FockSpace, tail_tol: float = DEFAULT_TAIL_TOL) -> LiftedInstance:
    """Express R, S and the optimal F in the truncated Fock basis.

    The even/odd vectors are re-orthonormalized (Gram-Schmidt on the
    truncated vectors), which only matters at the level of the tail.
    """
    if space.dim_d != 1:
        raise ValueError("the bipartite instance is one-dimensional")
    for c in (inst.a, inst.b):
        tail = coherent_tail(space, c, 0.0)
        if tail > tail_tol:
            raise TruncationError(f"coherent state at {c} has tail {tail:.3e} at cutoff {space.cutoff}")
    U = _orthonormal_even_odd(inst.a, space)
    V = _orthonormal_even_odd(inst.b, space)
    Rm, Sm = marginals(inst)
    R = DensityOperator(U @ Rm @ U.conj().T, space, label=f"pair(+-{inst.a})")
    S = DensityOperator(V @ Sm @ V.conj().T, space, label=f"pair(+-{inst.b})")
    return LiftedInstance(R, S, U, V, coupling_matrix(inst))


def _orthonormal_even_odd(center: float, space: FockSpace) -> np.ndarray:
    raw = even_odd_basis(center, space)
    Q, _ = np.linalg.qr(raw)
    # qr may flip signs; restore the original orientation
    return Q * np.sign(np.real(np.sum(Q.conj() * raw, axis=0)))


def unequal_mass_density(a: float, eta: float, space: FockSpace) -> DensityOperator:
    """((1 + eta)/2) |a><a| + ((1 - eta)/2) |-a><-a| in the Fock basis (renormalized)."""
    if not -1 <= eta <= 1:
        raise ValueError(f"eta must lie in [-1, 1], got {eta}")
    plus = coherent_state(space, a, 0.0)
    minus = coherent_state(space, -a, 0.0)
    m = (1 + eta) / 2 * np.outer(plus, plus.conj()) + (1 - eta) / 2 * np.outer(minus, minus.conj())
    return DensityOperator(m / np.trace(m).real, space, label=f"unequal(+-{a}, eta={eta})")

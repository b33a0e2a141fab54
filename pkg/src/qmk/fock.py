"""Truncated Fock-basis representation of the canonical operators.

Each spatial axis carries its own oscillator basis |0>, ..., |N-1>; a
d-dimensional one-particle space is the Kronecker product of the d axis
factors, with axis 0 the slowest-varying index.

Conventions (per axis)::

    a |n> = sqrt(n) |n-1>
    Q = sqrt(hbar/2) (a + a^dagger)
    P = i sqrt(hbar/2) (a^dagger - a)       so that  [Q, P] = i hbar
    H = Q^2 + P^2 = hbar (2 a^dagger a + 1)

Everything quadratic in (Q, P) is assembled from analytic matrix elements
so that the truncated matrices are exact compressions of the true
operators onto span{|0>, ..., |N-1>}.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import special, stats

DEFAULT_TAIL_TOL = 1e-10


class TruncationWarning(UserWarning):
    """A coherent state has non-negligible weight above the cutoff."""


class TruncationError(ValueError):
    """A state cannot be represented at the requested cutoff."""


@dataclass(frozen=True)
class FockSpace:
    """One-particle oscillator space truncated to ``cutoff`` levels per axis."""

    hbar: float
    cutoff: int
    dim_d: int = 1

    def __post_init__(self):
        if not self.hbar > 0:
            raise ValueError(f"hbar must be positive, got {self.hbar}")
        if int(self.cutoff) != self.cutoff or self.cutoff < 1:
            raise ValueError(f"cutoff must be a positive integer, got {self.cutoff}")
        if int(self.dim_d) != self.dim_d or self.dim_d < 1:
            raise ValueError(f"dim_d must be a positive integer, got {self.dim_d}")

    @property
    def dim(self) -> int:
        return self.cutoff ** self.dim_d

    @cached_property
    def occupations(self) -> np.ndarray:
        """Integer array (dim, dim_d) of per-axis quanta for each basis index."""
        grids = np.indices((self.cutoff,) * self.dim_d).reshape(self.dim_d, -1)
        return grids.T.copy()

    @cached_property
    def total_quanta(self) -> np.ndarray:
        return self.occupations.sum(axis=1)

    def with_cutoff(self, cutoff: int) -> "FockSpace":
        return FockSpace(self.hbar, cutoff, self.dim_d)


def ladder_matrix(space: FockSpace) -> np.ndarray:
    """Annihilation matrix of one axis factor, ``a[n-1, n] = sqrt(n)``."""
    n = np.arange(1, space.cutoff)
    return np.diag(np.sqrt(n), k=1).astype(complex)


def _check_axis(space: FockSpace, axis: int) -> None:
    if not 0 <= axis < space.dim_d:
        raise IndexError(f"axis {axis} out of range for dim_d={space.dim_d}")


def embed_axis(space: FockSpace, op: np.ndarray, axis: int) -> np.ndarray:
    """Place a single-axis operator on ``axis``, identity on the others."""
    _check_axis(space, axis)
    eye = np.eye(space.cutoff)
    out = np.ones((1, 1), dtype=complex)
    for k in range(space.dim_d):
        out = np.kron(out, op if k == axis else eye)
    return out


def position_operator(space: FockSpace, axis: int = 0) -> np.ndarray:
    a = ladder_matrix(space)
    q = math.sqrt(space.hbar / 2) * (a + a.conj().T)
    return embed_axis(space, q, axis)


def momentum_operator(space: FockSpace, axis: int = 0) -> np.ndarray:
    a = ladder_matrix(space)
    p = 1j * math.sqrt(space.hbar / 2) * (a.conj().T - a)
    return embed_axis(space, p, axis)


def canonical_operators(space: FockSpace) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Lists ``([Q_0, ..., Q_{d-1}], [P_0, ..., P_{d-1}])``."""
    qs = [position_operator(space, j) for j in range(space.dim_d)]
    ps = [momentum_operator(space, j) for j in range(space.dim_d)]
    return qs, ps


def number_operator(space: FockSpace) -> np.ndarray:
    """Total quanta operator ``sum_j a_j^dagger a_j`` (diagonal)."""
    return np.diag(space.total_quanta.astype(float)).astype(complex)


def harmonic_hamiltonian(space: FockSpace) -> np.ndarray:
    """Exact compression of ``H = sum_j (Q_j^2 + P_j^2)``.

    Built from the analytic spectrum ``hbar * (2 n_total + d)``, never by
    squaring truncated Q and P (those differ on the top level).
    """
    diag = space.hbar * (2 * space.total_quanta + space.dim_d)
    return np.diag(diag.astype(float)).astype(complex)


def _coherent_factor(cutoff: int, q: float, p: float, hbar: float) -> np.ndarray:
    z = (q + 1j * p) / math.sqrt(2 * hbar)
    # phase exp(i q p / 2 hbar) matches the position-space packet
    # (pi hbar)^{-1/4} exp(-(x-q)^2 / 2 hbar) exp(i p x / hbar)
    c0 = math.exp(-abs(z) ** 2 / 2) * np.exp(1j * q * p / (2 * hbar))
    out = np.empty(cutoff, dtype=complex)
    out[0] = c0
    for n in range(1, cutoff):
        out[n] = out[n - 1] * z / math.sqrt(n)
    return out


def coherent_tail(space: FockSpace, q, p) -> float:
    """Norm deficit ``1 - ||truncated |q,p>||^2`` computed analytically."""
    q = np.atleast_1d(np.asarray(q, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    kept = 1.0
    for qj, pj in zip(q, p):
        mean = (qj**2 + pj**2) / (2 * space.hbar)
        kept *= stats.poisson.cdf(space.cutoff - 1, mean)
    return float(1.0 - kept)


def coherent_state(space: FockSpace, q, p, tail_tol: float = DEFAULT_TAIL_TOL) -> np.ndarray:
    """Truncated Fock coefficients of the coherent state |q, p>.

    Emits :class:`TruncationWarning` when the discarded norm exceeds
    ``tail_tol``. The vector is *not* renormalized.
    """
    q = np.atleast_1d(np.asarray(q, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if q.shape != (space.dim_d,) or p.shape != (space.dim_d,):
        raise ValueError(f"q and p must have length {space.dim_d}")
    vec = np.ones(1, dtype=complex)
    for qj, pj in zip(q, p):
        vec = np.kron(vec, _coherent_factor(space.cutoff, qj, pj, space.hbar))
    tail = coherent_tail(space, q, p)
    if tail > tail_tol:
        warnings.warn(
            f"coherent state at q={q}, p={p} loses {tail:.3e} of its norm at cutoff {space.cutoff}",
            TruncationWarning,
            stacklevel=2,
        )
    return vec


def overlap(u: np.ndarray, v: np.ndarray) -> complex:
    """Inner product <u|v>, conjugate-linear in ``u``."""
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    return complex(np.vdot(u, v))


def choose_cutoff(points, hbar: float, tail_tol: float = DEFAULT_TAIL_TOL, max_cutoff: int = 400) -> int:
    """Smallest per-axis cutoff whose Poisson tail is below ``tail_tol`` for every point.

    ``points`` is an iterable of phase-space points ``(q, p)`` (scalars or vectors).
    """
    largest = 0.0
    n_axes = 1
    for q, p in points:
        q = np.atleast_1d(np.asarray(q, dtype=float))
        p = np.atleast_1d(np.asarray(p, dtype=float))
        n_axes = max(n_axes, q.size)
        largest = max(largest, float(np.max((q**2 + p**2) / (2 * hbar))))
    # per-axis budget so the product over axes stays within tail_tol
    budget = tail_tol / n_axes
    for cutoff in range(1, max_cutoff + 1):
        if stats.poisson.sf(cutoff - 1, largest) < budget:
            return cutoff
    raise TruncationError(f"no cutoff <= {max_cutoff} reaches tail {tail_tol} (mean quanta {largest:.3g})")


# ---------------------------------------------------------------------------
# position-representation helpers (validation only)
# ---------------------------------------------------------------------------

def hermite_functions(nmax: int, x: np.ndarray, hbar: float) -> np.ndarray:
    """Oscillator eigenfunctions ``hbar^{-1/4} h_n(x / sqrt(hbar))`` for n < nmax.

    Uses the normalized three-term recurrence; returns shape (nmax, len(x)).
    """
    t = np.asarray(x, dtype=float) / math.sqrt(hbar)
    out = np.zeros((nmax,) + t.shape)
    out[0] = np.pi ** -0.25 * np.exp(-t**2 / 2)
    if nmax > 1:
        out[1] = math.sqrt(2) * t * out[0]
    for n in range(2, nmax):
        out[n] = math.sqrt(2 / n) * t * out[n - 1] - math.sqrt((n - 1) / n) * out[n - 2]
    return out * hbar ** -0.25


def coherent_wavefunction(x: np.ndarray, q: float, p: float, hbar: float) -> np.ndarray:
    """Position-space coherent packet ``(pi hbar)^{-1/4} e^{-(x-q)^2/2hbar} e^{i p x/hbar}``."""
    x = np.asarray(x, dtype=float)
    return (np.pi * hbar) ** -0.25 * np.exp(-(x - q) ** 2 / (2 * hbar)) * np.exp(1j * p * x / hbar)


def gauss_hermite_nodes(n_nodes: int, hbar: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for integrals ``int f(x) dx`` with f ~ exp(-x^2/hbar) decay.

    The returned weights already include the ``exp(+t^2)`` factor, so
    ``sum(w * f(x))`` approximates the plain integral.
    """
    t, w = special.roots_hermite(n_nodes)
    x = math.sqrt(hbar) * t
    return x, w * np.exp(t**2) * math.sqrt(hbar)

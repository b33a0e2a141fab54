import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import subspace_angles

from qmk.bipartite import BipartiteInstance, coupling_matrix, even_odd_basis, marginals
from qmk.cost import build_cost
from qmk.fock import FockSpace, TruncationError, coherent_state, harmonic_hamiltonian
from qmk.states import (
    CouplingOperator,
    DensityOperator,
    PhaseSpaceMeasure,
    density_from_spec,
    energy_trace_identity_check,
    husimi,
    partial_trace_left,
    partial_trace_right,
    psd_sqrt,
    support_projector,
    tensor_coupling,
    toeplitz_quantize,
)

from conftest import random_density


def test_density_validation():
    with pytest.raises(ValueError, match="trace"):
        DensityOperator(np.eye(2))
    with pytest.raises(ValueError, match="Hermitian"):
        DensityOperator(np.array([[0.5, 0.2], [0.0, 0.5]]))
    with pytest.raises(ValueError, match="negative"):
        DensityOperator(np.diag([1.5, -0.5]))
    with pytest.raises(ValueError, match="shape"):
        DensityOperator(np.eye(2) / 2, FockSpace(1.0, 3))


def test_measure_validation():
    with pytest.raises(ValueError, match="sum"):
        PhaseSpaceMeasure.from_points([(0, 0), (1, 1)], [0.5, 0.6])
    with pytest.raises(ValueError, match="nonnegative"):
        PhaseSpaceMeasure.from_points([(0, 0), (1, 1)], [1.5, -0.5])
    with pytest.raises(ValueError, match="empty"):
        PhaseSpaceMeasure(np.zeros((0, 1)), np.zeros((0, 1)), np.zeros(0))
    m = PhaseSpaceMeasure([0.0, 1.0], [0.5, -1.0], [0.25, 0.75])
    assert m.dim_d == 1 and len(m) == 2
    assert np.allclose(m.scaled(2.0).q.ravel(), [0.0, 2.0])


def test_toeplitz_single_point_is_projector():
    sp = FockSpace(1.0, 30)
    R = toeplitz_quantize(PhaseSpaceMeasure.from_points([(0.5, -0.4)], [1.0]), sp)
    v = coherent_state(sp, 0.5, -0.4)
    v = v / np.linalg.norm(v)
    assert np.allclose(R.matrix, np.outer(v, v.conj()), atol=1e-12)
    assert R.meta["trace_deficit"] < 1e-8


@pytest.mark.parametrize("a,hbar", [(1.0, 1.0), (0.5, 0.5), (2.0, 1.0)])
def test_toeplitz_pair_spectrum(a, hbar):
    sp = FockSpace(hbar, 60)
    R = toeplitz_quantize(PhaseSpaceMeasure.from_points([(a, 0), (-a, 0)], [0.5, 0.5]), sp)
    lam = math.exp(-a * a / hbar)
    w = np.sort(np.linalg.eigvalsh(R.matrix))[::-1]
    assert np.allclose(w[:2], [(1 + lam) / 2, (1 - lam) / 2], atol=1e-10)
    assert np.abs(w[2:]).max() < 1e-10
    basis = support_projector(R)
    assert basis.shape[1] == 2
    assert subspace_angles(basis, even_odd_basis(a, sp)).max() < 1e-8


def test_toeplitz_truncation_error():
    with pytest.raises(TruncationError):
        toeplitz_quantize(PhaseSpaceMeasure.from_points([(4.0, 0)], [1.0]), FockSpace(1.0, 5))


def test_husimi_values():
    sp = FockSpace(0.5, 30)
    ground = np.zeros((sp.dim, sp.dim))
    ground[0, 0] = 1
    assert husimi(ground, sp, 0.0, 0.0).real == pytest.approx(1 / (2 * math.pi * 0.5))
    # two-particle cost on the diagonal: c(z, z) + 2 d hbar = 2 d hbar
    sp2 = FockSpace(1.0, 14)
    C = build_cost(sp2).matrix
    val = husimi(C, sp2, [0.6, 0.6], [-0.3, -0.3])
    assert val.real == pytest.approx(2.0 / (2 * math.pi) ** 2, rel=1e-8)
    with pytest.raises(ValueError):
        husimi(np.eye(3), sp2, 0.0, 0.0)


def test_husimi_grid_sum():
    sp = FockSpace(1.0, 40)
    R = toeplitz_quantize(PhaseSpaceMeasure.from_points([(0.7, 0.2), (-0.5, 0.0)], [0.3, 0.7]), sp)
    g = np.linspace(-7, 7, 57)
    step = g[1] - g[0]
    total = sum(husimi(R, sp, q, p).real for q in g for p in g) * step * step
    assert total == pytest.approx(1.0, abs=1e-6)


@given(n1=st.integers(1, 4), n2=st.integers(1, 4), seed=st.integers(0, 2**31))
def test_partial_traces_of_products(n1, n2, seed):
    rng = np.random.default_rng(seed)
    R, S = random_density(rng, n1), random_density(rng, n2)
    F = np.kron(R, S)
    assert np.allclose(partial_trace_right(F, (n1, n2)), R, atol=1e-14)
    assert np.allclose(partial_trace_left(F, (n1, n2)), S, atol=1e-14)


def test_partial_trace_of_bipartite_coupling():
    inst = BipartiteInstance(1.0, 0.7, 0.5)
    F = coupling_matrix(inst)
    R, S = marginals(inst)
    assert np.allclose(partial_trace_right(F), R, atol=1e-15)
    assert np.allclose(partial_trace_left(F), S, atol=1e-15)
    assert np.trace(partial_trace_right(F)) == pytest.approx(np.trace(F))


def test_partial_trace_rejects_non_square_dims():
    with pytest.raises(ValueError):
        partial_trace_right(np.eye(6) / 6)


def test_coupling_operator_checks_marginals(rng):
    R = DensityOperator(random_density(rng, 2))
    S = DensityOperator(random_density(rng, 3))
    C = tensor_coupling(R, S)
    assert np.allclose(partial_trace_right(C.matrix, C.dims), R.matrix, atol=1e-12)
    with pytest.raises(ValueError, match="marginals"):
        CouplingOperator(np.eye(6) / 6, R, S)


def test_tensor_coupling_rank_one_and_cost():
    sp = FockSpace(1.0, 5)
    e0 = np.zeros((5, 5))
    e0[0, 0] = 1
    R = DensityOperator(e0, sp)
    F = tensor_coupling(R, R).matrix
    assert np.linalg.matrix_rank(F) == 1
    assert np.trace(F @ build_cost(sp).matrix).real == pytest.approx(2.0)


def test_support_projector_cases(rng):
    v = rng.normal(size=4) + 1j * rng.normal(size=4)
    v /= np.linalg.norm(v)
    assert support_projector(np.outer(v, v.conj())).shape == (4, 1)
    full = support_projector(np.eye(5) / 5)
    assert np.allclose(full.conj().T @ full, np.eye(5))


def test_psd_sqrt_cases():
    assert np.allclose(psd_sqrt(np.eye(3)), np.eye(3))
    assert np.allclose(psd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))
    F = coupling_matrix(BipartiteInstance(1.0, 1.0, 1.0))
    root = psd_sqrt(F)
    assert np.abs(root @ root - F).max() < 1e-10
    assert np.allclose(psd_sqrt(np.diag([1.0, -1e-11])), np.diag([1.0, 0.0]))
    with pytest.raises(ValueError):
        psd_sqrt(np.diag([1.0, -0.1]))


def test_support_lemma_on_couplings(rng):
    # F with marginals R, S lives on supp(R) x supp(S)
    sp = FockSpace(1.0, 20)
    mu = PhaseSpaceMeasure.from_points([(1.0, 0), (-1.0, 0)], [0.5, 0.5])
    R = toeplitz_quantize(mu, sp)
    S = toeplitz_quantize(PhaseSpaceMeasure.from_points([(0.5, 0.5)], [1.0]), sp)
    F = tensor_coupling(R, S).matrix
    P = support_projector(R)
    Q = support_projector(S)
    proj = np.kron(P @ P.conj().T, Q @ Q.conj().T)
    assert np.linalg.norm(F - proj @ F @ proj) < 1e-8


def test_energy_trace_identity(rng):
    sp = FockSpace(1.0, 4)
    H = harmonic_hamiltonian(sp)
    R = DensityOperator(random_density(rng, 4), sp)
    S = DensityOperator(random_density(rng, 4), sp)
    res = energy_trace_identity_check(tensor_coupling(R, S), H)
    assert res.gap < 1e-10 and res.consistent
    # F whose left marginal is not R: flagged
    F = random_density(rng, 16)
    bad = energy_trace_identity_check(F, H, R=R.matrix)
    assert not bad.consistent and bad.gap > 1e-3
    with pytest.raises(ValueError):
        energy_trace_identity_check(F, H)


def test_energy_identity_bipartite_closed_form():
    inst = BipartiteInstance(1.0, 1.0, 1.0)
    from qmk.bipartite import projected_operators

    res = energy_trace_identity_check(coupling_matrix(inst), projected_operators(inst).HR, R=marginals(inst)[0])
    assert res.gap < 1e-8


def test_density_from_spec_roundtrip():
    spec = {"hbar": 1.0, "d": 1, "kind": "coherent_mixture", "points": [{"q": [1.0], "p": [0.0], "w": 0.5}, {"q": [-1.0], "p": [0.0], "w": 0.5}]}
    R, mu = density_from_spec(json.loads(json.dumps(spec)))
    assert mu is not None and len(mu) == 2
    assert R.meta["trace_deficit"] < 1e-8
    m = np.diag([0.25, 0.75])
    R2, none = density_from_spec({"hbar": 0.5, "kind": "fock_matrix", "matrix": {"re": m.tolist(), "im": np.zeros((2, 2)).tolist()}})
    assert none is None and R2.space.cutoff == 2 and np.allclose(R2.matrix, m)
    with pytest.raises(ValueError):
        density_from_spec({"hbar": 1.0, "kind": "wigner"})
    with pytest.raises(ValueError):
        density_from_spec({"hbar": 1.0, "d": 2, "kind": "fock_matrix", "matrix": {"re": np.eye(3).tolist()}})

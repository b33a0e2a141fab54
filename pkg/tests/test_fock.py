import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qmk.fock import (
    FockSpace,
    TruncationError,
    TruncationWarning,
    choose_cutoff,
    coherent_state,
    coherent_tail,
    coherent_wavefunction,
    embed_axis,
    gauss_hermite_nodes,
    harmonic_hamiltonian,
    hermite_functions,
    ladder_matrix,
    momentum_operator,
    number_operator,
    overlap,
    position_operator,
)


@pytest.mark.parametrize("kwargs", [dict(hbar=0.0, cutoff=3), dict(hbar=1.0, cutoff=0), dict(hbar=1.0, cutoff=3, dim_d=0)])
def test_space_validation(kwargs):
    with pytest.raises(ValueError):
        FockSpace(**kwargs)


def test_space_dimensions():
    sp = FockSpace(1.0, 3, 2)
    assert sp.dim == 9
    assert sp.occupations.shape == (9, 2)
    # axis 0 is the slow index
    assert sp.occupations[3].tolist() == [1, 0]
    assert sp.total_quanta.tolist() == [0, 1, 2, 1, 2, 3, 2, 3, 4]


def test_ladder_small_cases():
    assert np.array_equal(ladder_matrix(FockSpace(1.0, 1)), np.zeros((1, 1)))
    a = ladder_matrix(FockSpace(1.0, 3))
    assert a[1, 2] == pytest.approx(math.sqrt(2))


def test_ladder_commutator_boundary():
    a = ladder_matrix(FockSpace(1.0, 4))
    comm = a @ a.conj().T - a.conj().T @ a
    expected = np.eye(4)
    expected[3, 3] -= 4
    assert np.allclose(comm, expected, atol=1e-14)


def test_position_two_levels():
    q = position_operator(FockSpace(1.0, 2))
    s = 1 / math.sqrt(2)
    assert np.allclose(q, [[0, s], [s, 0]], atol=1e-15)


@pytest.mark.parametrize("hbar", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("n", [3, 6, 10])
def test_canonical_commutator_interior(hbar, n):
    sp = FockSpace(hbar, n)
    q, p = position_operator(sp), momentum_operator(sp)
    comm = (1j / hbar) * (q @ p - p @ q)
    # (i/hbar)[Q, P] = -I away from the top level
    assert np.allclose(comm[: n - 1, : n - 1], -np.eye(n - 1), atol=1e-12)


def test_axis_out_of_range():
    sp = FockSpace(1.0, 3, 2)
    with pytest.raises(IndexError):
        position_operator(sp, 2)
    with pytest.raises(IndexError):
        embed_axis(sp, np.eye(3), -1)


@pytest.mark.parametrize(
    "hbar,n,d,diag",
    [(1.0, 3, 1, [1, 3, 5]), (1.0, 2, 2, [2, 4, 4, 6]), (0.5, 3, 1, [0.5, 1.5, 2.5])],
)
def test_hamiltonian_diagonal(hbar, n, d, diag):
    H = harmonic_hamiltonian(FockSpace(hbar, n, d))
    assert np.allclose(H, np.diag(diag))


@given(
    hbar=st.floats(0.1, 3.0),
    n=st.integers(1, 7),
    d=st.integers(1, 2),
)
def test_operators_hermitian_and_ground_energy(hbar, n, d):
    sp = FockSpace(hbar, n, d)
    for j in range(d):
        for op in (position_operator(sp, j), momentum_operator(sp, j)):
            assert np.abs(op - op.conj().T).max() < 1e-14
    H = harmonic_hamiltonian(sp)
    assert np.diag(H).real.min() == pytest.approx(d * hbar)
    assert np.allclose(H, hbar * (2 * number_operator(sp) + d * np.eye(sp.dim)))


@pytest.mark.parametrize("hbar", [0.5, 1.0])
def test_hamiltonian_matches_squares_below_top(hbar):
    # Q^2 + P^2 from truncated factors differs only on the top level
    sp = FockSpace(hbar, 8)
    q, p = position_operator(sp), momentum_operator(sp)
    diff = q @ q + p @ p - harmonic_hamiltonian(sp)
    assert np.abs(diff[:7, :7]).max() < 1e-12
    assert abs(diff[7, 7]) > 1.0


@pytest.mark.parametrize("hbar", [0.5, 1.0, 2.0])
def test_matrix_elements_against_quadrature(hbar):
    # <m|Q|n> and <m|P|n> from Gauss-Hermite quadrature of x psi and -i hbar psi'
    nmax = 13
    sp = FockSpace(hbar, nmax + 1)
    x, w = gauss_hermite_nodes(4 * (nmax + 1), hbar)
    h = hermite_functions(nmax + 2, x, hbar)
    # derivative via the ladder relation: psi_n' = (sqrt(n) psi_{n-1} - sqrt(n+1) psi_{n+1}) / sqrt(2 hbar)
    dh = np.zeros_like(h[: nmax + 1])
    for n in range(nmax + 1):
        if n:
            dh[n] += math.sqrt(n) * h[n - 1]
        dh[n] -= math.sqrt(n + 1) * h[n + 1]
    dh /= math.sqrt(2 * hbar)
    base = h[: nmax + 1]
    Qq = (base * w * x) @ base.T
    Pq = -1j * hbar * (base * w) @ dh.T
    Q, P = position_operator(sp), momentum_operator(sp)
    assert np.abs(Qq[:13, :13] - Q[:13, :13]).max() < 1e-10
    assert np.abs(Pq[:13, :13] - P[:13, :13]).max() < 1e-10


def test_hermite_derivative_relation_numerically():
    # finite-difference check of the ladder relation used above
    hbar, x = 0.7, np.linspace(-2, 2, 9)
    eps = 1e-6
    h = hermite_functions(6, x, hbar)
    dh = (hermite_functions(6, x + eps, hbar) - hermite_functions(6, x - eps, hbar)) / (2 * eps)
    n = 3
    rel = (math.sqrt(n) * h[n - 1] - math.sqrt(n + 1) * h[n + 1]) / math.sqrt(2 * hbar)
    assert np.allclose(dh[n], rel, atol=1e-7)


def test_coherent_origin_is_ground_state():
    v = coherent_state(FockSpace(1.0, 5), 0.0, 0.0)
    assert np.allclose(v, np.eye(5)[0])


@pytest.mark.parametrize("hbar", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("a", [0.3, 1.0, 2.0])
def test_coherent_overlaps(hbar, a):
    sp = FockSpace(hbar, 80)
    plus, minus = coherent_state(sp, a, 0.0), coherent_state(sp, -a, 0.0)
    assert overlap(plus, minus) == pytest.approx(math.exp(-a * a / hbar), abs=1e-12)
    b = 0.4
    other = coherent_state(sp, b, 0.0)
    assert overlap(plus, other) == pytest.approx(math.exp(-((a - b) ** 2) / (4 * hbar)), abs=1e-12)


def test_coherent_norm_and_tail():
    sp = FockSpace(1.0, 30)
    v = coherent_state(sp, 1.0, 0.0)
    assert np.vdot(v, v).real == pytest.approx(1.0, abs=1e-12)
    tails = [coherent_tail(FockSpace(1.0, n), 2.0, 1.0) for n in range(1, 25)]
    assert all(t1 >= t2 for t1, t2 in zip(tails, tails[1:]))


def test_coherent_truncation_warning():
    with pytest.warns(TruncationWarning):
        coherent_state(FockSpace(1.0, 3), 3.0, 0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        coherent_state(FockSpace(1.0, 40), 1.0, 0.0)


@pytest.mark.parametrize("q,p,hbar", [(0.7, -1.1, 1.0), (-1.5, 0.4, 0.5), (1.0, 1.0, 2.0)])
def test_coherent_phase_against_quadrature(q, p, hbar):
    n = 30
    sp = FockSpace(hbar, n)
    x, w = gauss_hermite_nodes(4 * n, hbar)
    coeffs = hermite_functions(n, x, hbar) @ (w * coherent_wavefunction(x, q, p, hbar))
    assert np.abs(coeffs - coherent_state(sp, q, p)).max() < 1e-10


def test_coherent_expectations():
    sp = FockSpace(1.0, 40)
    v = coherent_state(sp, 0.8, -0.6)
    assert np.vdot(v, position_operator(sp) @ v).real == pytest.approx(0.8, abs=1e-10)
    assert np.vdot(v, momentum_operator(sp) @ v).real == pytest.approx(-0.6, abs=1e-10)
    assert np.vdot(v, harmonic_hamiltonian(sp) @ v).real == pytest.approx(0.64 + 0.36 + 1.0, abs=1e-10)


def test_coherent_state_two_axes_is_product():
    sp = FockSpace(1.0, 12, 2)
    v = coherent_state(sp, [0.5, -0.2], [0.1, 0.3])
    v1 = coherent_state(FockSpace(1.0, 12), 0.5, 0.1)
    v2 = coherent_state(FockSpace(1.0, 12), -0.2, 0.3)
    assert np.allclose(v, np.kron(v1, v2))
    with pytest.raises(ValueError):
        coherent_state(sp, 0.5, 0.1)


def test_overlap_basics():
    e = np.eye(3)
    assert overlap(e[0], e[0]) == 1
    assert overlap(e[0], e[1]) == 0
    assert overlap(1j * e[0], e[0]) == -1j
    with pytest.raises(ValueError):
        overlap(e[0], np.ones(2))


def test_choose_cutoff():
    n = choose_cutoff([(2.0, 0.0), (0.0, 1.0)], 1.0, 1e-10)
    sp = FockSpace(1.0, n)
    assert coherent_tail(sp, 2.0, 0.0) < 1e-10
    assert coherent_tail(sp.with_cutoff(n - 1), 2.0, 0.0) >= 1e-10
    with pytest.raises(TruncationError):
        choose_cutoff([(50.0, 0.0)], 0.1, max_cutoff=50)

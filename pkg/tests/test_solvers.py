import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import eigvalsh_tridiagonal

from conftest import dense_operator, random_graph
from graphschrod import (
    FiniteGraph,
    Potential,
    ShiftedOperator,
    dirichlet_section,
    domination_check,
    lambda0,
    make_chain,
    make_path,
    operator_function,
    positivity_check,
    resolvent_apply,
    src_monitor,
    truncate_above,
    truncate_negative_part,
)
from graphschrod.errors import IndexMismatch, MonotonicityViolation, NegativeInput, ShiftTooSmall
from graphschrod.solvers import DENSE_MAX

ZERO = Potential.zero()


def p2(V=ZERO):
    return dirichlet_section(make_path(2), V, [0, 1])


def test_lambda0_examples():
    assert lambda0(p2()) == pytest.approx(0.0, abs=1e-15)
    assert lambda0(p2(Potential.constant(3.5))) == pytest.approx(3.5, abs=1e-14)
    assert lambda0(dirichlet_section(make_path(3), ZERO, range(3))) == pytest.approx(0.0, abs=1e-15)


def test_lambda0_certificate():
    est = lambda0(p2(), return_certificate=True)
    assert est.residual <= 1e-14
    assert abs(abs(est.vector[0]) - abs(est.vector[1])) <= 1e-14


def test_resolvent_examples():
    np.testing.assert_allclose(resolvent_apply(p2(), 1.0, [1.0, 0.0]).solution, [2 / 3, 1 / 3], rtol=1e-14)
    assert resolvent_apply(p2(), 1.0, np.zeros(2)).solution.tolist() == [0.0, 0.0]
    g = FiniteGraph.from_edges([], [1.0, 2.0, 0.5])
    V = Potential.from_array(g, [3.0, 0.0, 1.0])
    sec = dirichlet_section(g, V, range(3))
    assert resolvent_apply(sec, 1.0, [1.0, 0.0, 0.0]).solution.tolist() == [0.25, 0.0, 0.0]


def test_resolvent_rejects_small_shift():
    with pytest.raises(ShiftTooSmall):
        ShiftedOperator(p2(Potential.constant(-2.0)), 1.0)


def test_positivity_examples():
    rep = positivity_check(p2(), 1.0, vectors=np.array([[1.0], [0.0]]))
    assert rep.worst_margin == pytest.approx(1 / 3, rel=1e-14)
    assert positivity_check(p2(), 1.0, vectors=np.zeros((2, 1))).worst_margin == 0.0
    g = FiniteGraph.from_edges([], [1.0, 1.0])
    sec = dirichlet_section(g, Potential.from_array(g, [0.0, 4.0]), range(2))
    rep = positivity_check(sec, 1.0, vectors=np.array([[1.0], [2.0]]))
    np.testing.assert_allclose(rep.min_entries, [0.4], rtol=1e-15)


def test_positivity_rejects_negative_vectors():
    with pytest.raises(NegativeInput):
        positivity_check(p2(), 1.0, vectors=np.array([[1.0], [-1.0]]))


def test_domination_examples():
    low = p2()
    same = domination_check(low, low, 1.0, [0.3, 2.0])
    assert same.worst_margin == 0.0 and same.passed
    high = p2(Potential.from_sequence([10.0, 0.0]))
    rep = domination_check(low, high, 1.0, [1.0, 1.0])
    # dense 2x2 oracle: (A_high + 1)^{-1} (1, 1) = (3, 13) / 23, (A_low + 1)^{-1} (1, 1) = (1, 1)
    np.testing.assert_allclose(rep.lhs, [3 / 23, 13 / 23], rtol=1e-14)
    np.testing.assert_allclose(rep.rhs, [1.0, 1.0], rtol=1e-14)
    assert np.all(rep.lhs < rep.rhs)
    zero = domination_check(low, high, 1.0, [0.0, 0.0])
    assert zero.lhs.tolist() == [0.0, 0.0] and zero.rhs.tolist() == [0.0, 0.0]


def test_domination_checks_order_and_index():
    with pytest.raises(NegativeInput):
        domination_check(p2(Potential.constant(1.0)), p2(), 1.0, [1.0, 1.0])
    with pytest.raises(IndexMismatch):
        domination_check(p2(), dirichlet_section(make_path(3), ZERO, [1, 2]), 1.0, [1.0, 1.0])


def test_src_monitor_exact_after_saturation():
    g = make_chain()
    S = range(12)
    V2 = Potential(lambda n: float(n))
    limit = dirichlet_section(g, V2, S)
    family = [dirichlet_section(g, truncate_above(V2, k), S) for k in range(1, 15)]
    rep = src_monitor(family, limit, 1.0, [np.ones(12)], labels=list(range(1, 15)))
    assert rep.direction == "below" and rep.monotone_flag
    errs = rep.errors()
    assert np.all(errs[10:] == 0.0) and np.all(errs[:10] > 0)
    assert rep.converged


def test_src_monitor_negative_part_truncation():
    g = make_chain()
    S = range(10)
    V1 = Potential(lambda n: -0.7 * n)
    limit = dirichlet_section(g, V1, S)
    family = [dirichlet_section(g, truncate_negative_part(V1, k), S) for k in range(1, 9)]
    alpha = 1.0 - lambda0(limit)
    rep = src_monitor(family, limit, alpha, [np.ones(10)])
    assert rep.direction == "above" and rep.monotone_flag
    assert np.all(rep.errors()[7:] == 0.0)


def test_src_monitor_chain50_against_dense_oracle():
    g = make_chain()
    S = range(50)
    V2 = Potential(lambda n: float(n))
    limit = dirichlet_section(g, V2, S)
    ks = list(range(1, 52))
    family = [dirichlet_section(g, truncate_above(V2, k), S) for k in ks]
    v = np.zeros(50)
    v[0] = 1.0
    rep = src_monitor(family, limit, 1.0, [v], labels=ks)
    L0 = dense_operator(g, ZERO, S)
    target = np.linalg.solve(L0 + np.diag(np.arange(50.0)) + np.eye(50), v)
    oracle = [np.linalg.norm(np.linalg.solve(L0 + np.diag(np.minimum(np.arange(50.0), k)) + np.eye(50), v) - target) for k in ks]
    np.testing.assert_allclose(rep.errors(), oracle, rtol=1e-8, atol=1e-15)
    errs = rep.errors()
    first_zero = int(np.argmax(errs == 0.0))
    assert first_zero == 48  # k = 49 = max V2
    assert np.all(np.diff(errs[: first_zero + 1]) < 0)


def test_src_monitor_rejects_mixed_family():
    g = make_chain()
    S = range(6)
    limit = dirichlet_section(g, ZERO, S)
    mixed = [dirichlet_section(g, Potential(lambda n: (-1.0) ** n), S)]
    with pytest.raises(MonotonicityViolation):
        src_monitor(mixed, limit, 5.0, [np.ones(6)])


def test_convergence_csv_header():
    g = make_chain()
    limit = dirichlet_section(g, ZERO, range(3))
    rep = src_monitor([limit], limit, 1.0, [np.ones(3)])
    assert rep.to_csv().splitlines() == [
        "k_or_r,alpha,vector_id,l2_error,form_error,section_size",
        "1,1.0,0,0.0,0.0,3",
    ]


def test_sparse_path_large_chain():
    n = DENSE_MAX + 500
    g = make_chain()
    V = Potential(lambda k: np.cos(k))
    sec = dirichlet_section(g, V, range(n))
    d = 2.0 + np.cos(np.arange(n))
    d[0] -= 1.0
    oracle = eigvalsh_tridiagonal(d, -np.ones(n - 1), select="i", select_range=(0, 0))[0]
    assert lambda0(sec) == pytest.approx(oracle, abs=1e-8)
    rng = np.random.default_rng(0)
    v = rng.random(n)
    res = resolvent_apply(sec, 2.0, v)
    assert np.linalg.norm(sec.apply(res.solution) + 2.0 * res.solution - v) <= 1e-9 * np.linalg.norm(v)
    assert res.iterations > 0


def test_operator_function_square_root():
    sec = dirichlet_section(make_path(4), Potential.from_sequence([0.0, 1.0, 2.0, -0.5]), range(4))
    root = operator_function(sec, lambda w: np.sqrt(w + 1.0))
    np.testing.assert_allclose(root @ root, sec.action_matrix().toarray() + np.eye(4), atol=1e-13)


def _random_section(seed, n):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n)
    return rng, dirichlet_section(g, Potential.from_array(g, rng.uniform(-10, 10, n)), range(n))


@given(st.integers(0, 2**32 - 1), st.integers(2, 40), st.floats(1e-6, 10))
def test_mmatrix_positivity(seed, n, extra):
    rng, sec = _random_section(seed, n)
    alpha = -lambda0(sec) + 1e-6 + extra
    rep = positivity_check(sec, alpha, trials=20, seed=seed % 1000)
    assert rep.worst_margin >= -1e-12


@given(st.integers(0, 2**32 - 1), st.integers(2, 30))
def test_resolvent_identity(seed, n):
    rng, sec = _random_section(seed, n)
    lam = lambda0(sec)
    a, b = -lam + 0.5, -lam + 3.0
    v = rng.standard_normal(n)
    Ra, Rb = ShiftedOperator(sec, a, lam0=lam), ShiftedOperator(sec, b, lam0=lam)
    lhs = Ra(v) - Rb(v)
    rhs = (b - a) * Ra(Rb(v))
    assert sec.norm(lhs - rhs) <= 1e-10 * max(sec.norm(lhs), sec.norm(v) * 1e-3)


@given(st.integers(0, 2**32 - 1), st.integers(3, 30))
def test_dirichlet_bracketing(seed, n):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n)
    V = Potential.from_array(g, rng.uniform(-10, 10, n))
    S2 = sorted(rng.choice(n, size=n - 1, replace=False).tolist())
    S1 = S2[: max(1, len(S2) // 2)]
    assert lambda0(dirichlet_section(g, V, S1)) >= lambda0(dirichlet_section(g, V, S2)) - 1e-10


@given(st.integers(0, 2**32 - 1), st.integers(2, 25))
def test_truncation_monitor_monotone(seed, n):
    rng, sec = _random_section(seed, n)
    W = rng.uniform(0, 20, n)
    limit = sec.with_added_potential(W)
    ks = list(range(1, 22))
    family = [sec.with_added_potential(np.minimum(W, k)) for k in ks]
    alpha = 1.0 - lambda0(sec)
    rep = src_monitor(family, limit, alpha, [rng.random(n)], labels=ks)
    assert rep.monotone_flag
    assert rep.errors()[-1] == 0.0


@given(st.integers(0, 2**32 - 1), st.integers(2, 30), st.sampled_from([1.0, 2.0, 8.0, 64.0]))
def test_resolvent_commutes_with_shifted_operator(seed, n, r):
    rng, sec = _random_section(seed, n)
    L = sec.shifted(-min(0.0, lambda0(sec)))
    u = rng.standard_normal(n)
    op = ShiftedOperator(L, r)
    a = L.apply(r * op(u)) + r * op(u)
    b = r * op(L.apply(u) + u)
    assert L.norm(a - b) <= 1e-10 * max(1.0, L.norm(L.apply(u)))

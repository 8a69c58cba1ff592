import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_graph
from graphschrod import (
    Potential,
    dirichlet_section,
    finite_energy_check,
    form_norm_eval,
    form_Q,
    form_Q_quadratic,
    greens_identity_residual,
    greens_identity_terms,
    lambda0,
    make_chain,
    make_path,
    pairing_a,
)
from graphschrod.forms import form_values_csv
from graphschrod.graph import WeightedGraph

ZERO = Potential.zero()


def test_pairing_examples():
    assert pairing_a(lambda x: 1.0, {0: 1.0}, lambda x: 3.0) == 3.0
    assert pairing_a({0: 1j}, {0: 1.0}, lambda x: 1.0) == 1j
    assert pairing_a({0: 1.0}, {1: 1.0}, lambda x: 1.0) == 0.0
    # conjugation sits on the second slot
    assert pairing_a(np.array([1.0]), np.array([1j]), np.array([2.0])) == -2j


def test_form_p2():
    val = form_Q_quadratic(make_path(2), ZERO, np.array([1.0, -1.0]))
    assert val.energy_part == 4.0 and val.total == 4.0


def test_form_constant_on_component():
    g = make_path(5)
    assert form_Q_quadratic(g, ZERO, np.full(5, 3.0)).total == 0.0


def test_form_chain_delta():
    assert form_Q_quadratic(make_chain(), ZERO, {0: 1.0}).total == 1.0
    # an interior delta sees both edges
    assert form_Q_quadratic(make_chain(), ZERO, {4: 1.0}).total == 2.0


def test_form_sesquilinear():
    g = make_path(3)
    W = Potential.from_sequence([1.0, -2.0, 0.5])
    f = np.array([1.0, 1j, 0.0])
    h = np.array([0.0, 2.0, 1.0 - 1j])
    a, b = form_Q(g, W, f, h).total, form_Q(g, W, h, f).total
    assert a == pytest.approx(np.conj(b), abs=1e-15)


def test_greens_examples():
    g = make_path(3)
    assert greens_identity_residual(g, ZERO, np.array([1.0, 2.0, 3.0]), np.array([0.0, 1.0, 0.0])) == 0.0
    terms = greens_identity_terms(g, ZERO, np.array([1.0, 2.0, 3.0]), np.array([0.0, 1.0, 0.0]))
    assert terms.lhs == 0 and terms.rhs == 0
    assert greens_identity_residual(g, ZERO, np.array([1.0, 2.0, 3.0]), np.zeros(3)) == 0.0


def test_greens_matches_form_on_same_vector():
    g = make_chain()
    W = Potential(lambda n: (-1.0) ** n * n)
    u = {0: 1.0, 1: -2.0 + 1j, 3: 0.5}
    terms = greens_identity_terms(g, W, u, u)
    assert terms.residual <= 1e-12
    assert terms.lhs == pytest.approx(form_Q_quadratic(g, W, u).total, abs=1e-12)


def test_greens_with_infinitely_supported_f():
    g = make_chain()
    f = lambda n: float(n * n)  # noqa: E731
    u = {2: 1.0, 3: -1.0}
    # L f(n) = 2n^2 - (n-1)^2 - (n+1)^2 = -2 for n >= 1
    terms = greens_identity_terms(g, ZERO, f, u)
    assert terms.lhs == 0.0 and terms.residual == 0.0 and terms.flip is None


def test_form_norm_p2():
    sec = dirichlet_section(make_path(2), ZERO, [0, 1])
    val = form_norm_eval(sec, np.array([1.0, -1.0]))
    assert val.lambda0 == pytest.approx(0.0, abs=1e-14)
    assert val.value**2 == pytest.approx(6.0, rel=1e-14)
    assert form_norm_eval(sec, np.zeros(2)).value == 0.0


@given(st.integers(0, 2**32 - 1), st.floats(0.1, 10))
def test_form_norm_scaling_in_beta(seed, beta):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, 8)
    sec = dirichlet_section(g, Potential.from_array(g, rng.uniform(-5, 5, 8)), range(8))
    lam = lambda0(sec)
    u = rng.standard_normal(8)
    ratio = form_norm_eval(sec, u, 2 * beta, lam).value / form_norm_eval(sec, u, beta, lam).value
    assert 1.0 <= ratio <= math.sqrt(2) * (1 + 1e-12)


def test_finite_energy_examples():
    g = make_chain()
    assert finite_energy_check(g, ZERO, {3: 1.0, 7: 2.0}).finite is True
    rep = finite_energy_check(g, Potential.constant(1e200), {0: 1.0})
    assert rep.finite is True and rep.value == pytest.approx(1e200)
    assert finite_energy_check(g, ZERO, lambda n: 1.0).finite is None


def test_finite_energy_on_finite_graph_counts_both_orientations():
    rep = finite_energy_check(make_path(2), ZERO, np.array([1.0, 0.0]))
    assert rep.value == 2.0


def test_form_values_csv_header():
    text = form_values_csv([("P2", "0", "u", form_Q_quadratic(make_path(2), ZERO, np.array([1.0, -1.0])))])
    assert text.splitlines() == ["graph_id,W_id,vector_id,energy_part,potential_part,total", "P2,0,u,4.0,0.0,4.0"]


@given(st.integers(0, 2**32 - 1), st.integers(3, 40))
def test_greens_fast_and_generic_paths_agree(seed, n):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n)
    W = Potential.from_array(g, rng.uniform(-10, 10, n))
    f = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * (rng.random(n) < 0.6)
    u = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * (rng.random(n) < 0.6)
    fast = greens_identity_terms(g, W, f, u)
    generic = WeightedGraph(g.b, g.mu, g.neighbors, g.deg, g.vertices, n_vertices=n)
    slow = greens_identity_terms(generic, W, dict(enumerate(f)), dict(enumerate(u)))
    scale = 1.0 + fast.scale
    assert fast.residual <= 1e-11 * scale and slow.residual <= 1e-11 * scale
    assert abs(fast.lhs - slow.lhs) <= 1e-11 * scale


@given(st.integers(0, 2**32 - 1))
def test_form_matches_section_on_interior(seed):
    rng = np.random.default_rng(seed)
    g = make_chain()
    W = Potential(lambda n, c=rng.uniform(-5, 5, 40): c[n])
    S = range(20)
    sec = dirichlet_section(g, W, S)
    u = rng.standard_normal(20) + 1j * rng.standard_normal(20)
    u[-1] = 0.0  # keep the support inside the interior
    q = form_Q_quadratic(g, W, dict(enumerate(u))).total
    assert q == pytest.approx(sec.quadratic(u), rel=1e-12, abs=1e-12)


@given(st.integers(0, 2**32 - 1), st.integers(2, 30))
def test_beurling_deny(seed, n):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n)
    W = Potential.from_array(g, rng.uniform(-10, 10, n))
    u = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    raw, mod = form_Q_quadratic(g, W, u), form_Q_quadratic(g, W, np.abs(u))
    assert mod.energy_part <= raw.energy_part + 1e-12
    assert mod.potential_part == pytest.approx(raw.potential_part, rel=1e-13, abs=1e-13)


@given(st.integers(0, 2**32 - 1), st.integers(2, 30))
def test_nonnegative_perturbation_raises_lower_bound(seed, n):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n)
    V1 = Potential.from_array(g, rng.uniform(-10, 10, n))
    W = Potential.from_array(g, rng.uniform(0, 10, n))
    assert lambda0(dirichlet_section(g, V1 + W, range(n))) >= lambda0(dirichlet_section(g, V1, range(n))) - 1e-10

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import Legendre

from capa_isac.core import Scenario, channel_gram
from capa_isac.em import ApertureGeometry
from capa_isac.quadrature import gauss_legendre_rule, integrate_aperture, integrate_interval
from capa_isac.wavenumber import fourier_basis


def test_one_point_rule_is_midpoint():
    r = gauss_legendre_rule(1)
    assert r.nodes.tolist() == [0.0]
    assert r.weights.tolist() == [2.0]


def test_two_point_rule_matches_legendre_roots():
    r = gauss_legendre_rule(2)
    # roots of P2(x) = (3x^2 - 1)/2 via companion-matrix root finding
    roots = np.sort(np.roots([1.5, 0.0, -0.5]))
    assert np.allclose(r.nodes, roots, atol=1e-10)
    assert np.allclose(r.nodes, [-0.5773502692, 0.5773502692], atol=1e-10)
    assert np.allclose(r.weights, [1.0, 1.0], atol=1e-12)


@pytest.mark.parametrize("n", [3, 7, 12])
def test_nodes_are_roots_of_legendre_polynomial(n):
    r = gauss_legendre_rule(n)
    assert np.max(np.abs(Legendre.basis(n)(r.nodes))) < 1e-12


def test_rejects_nonpositive_order():
    for bad in (0, -3, 2.5, True):
        with pytest.raises(ValueError):
            gauss_legendre_rule(bad)


@pytest.mark.parametrize("n", [1, 2, 5, 20, 40])
def test_rule_invariants(n):
    r = gauss_legendre_rule(n)
    assert np.all(np.diff(r.nodes) > 0)
    assert np.all((r.nodes > -1) & (r.nodes < 1))
    assert np.array_equal(r.nodes, -r.nodes[::-1])
    assert np.all(r.weights > 0)
    assert np.array_equal(r.weights, r.weights[::-1])
    assert abs(r.weights.sum() - 2.0) < 1e-12


def test_rule_is_immutable():
    r = gauss_legendre_rule(4)
    with pytest.raises(ValueError):
        r.nodes[0] = 0.0


@given(n=st.integers(1, 25), p=st.integers(0, 49))
def test_monomial_exactness(n, p):
    if p > 2 * n - 1:
        return
    r = gauss_legendre_rule(n)
    exact = 0.0 if p % 2 else 2.0 / (p + 1)
    got = integrate_interval(lambda x: x ** p, -1.0, 1.0, r)
    assert abs(got - exact) <= 1e-10 * max(1.0, abs(exact))


def test_x4_with_three_points():
    assert abs(integrate_interval(lambda x: x ** 4, -1, 1, gauss_legendre_rule(3)) - 0.4) < 1e-14


def test_interval_examples():
    for n in (1, 4, 9):
        assert abs(integrate_interval(lambda x: np.ones_like(x), 0, 3, gauss_legendre_rule(n)) - 3) < 1e-13
    assert abs(integrate_interval(lambda x: x ** 3, 0, 1, gauss_legendre_rule(2)) - 0.25) < 1e-15
    v = integrate_interval(lambda x: np.exp(1j * np.pi * x), -1, 1, gauss_legendre_rule(20))
    assert abs(v) < 1e-12


def test_interval_rejects_reversed_bounds():
    with pytest.raises(ValueError):
        integrate_interval(np.sin, 1.0, 0.0, gauss_legendre_rule(3))


def test_aperture_examples(aperture):
    r = gauss_legendre_rule(20)
    assert abs(integrate_aperture(lambda s: np.ones(len(s)), aperture, r) - 0.36) < 1e-13
    other = ApertureGeometry(0.3, 0.9)
    assert abs(integrate_aperture(lambda s: s[:, 0], other, r)) < 1e-15


def test_fourier_mode_is_normalized(aperture):
    r = gauss_legendre_rule(40)
    from capa_isac.wavenumber import TruncationOrder

    order = TruncationOrder(5, 5)
    k = order.index(5, 5)
    v = integrate_aperture(lambda s: np.abs(fourier_basis(order, s, aperture)[:, k]) ** 2, aperture, r)
    assert abs(v - 1.0) < 1e-8


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(2, 12),
    lx=st.floats(0.1, 2.0),
    ly=st.floats(0.1, 2.0),
    seed=st.integers(0, 2**31),
)
def test_tensor_rule_exact_for_polynomials(n, lx, ly, seed):
    rng = np.random.default_rng(seed)
    deg = 2 * n - 1
    terms = [(a, b, rng.normal()) for a in range(deg + 1) for b in range(deg + 1 - a)]

    def f(s):
        return sum(c * s[:, 0] ** a * s[:, 1] ** b for a, b, c in terms)

    def moment(p, L):
        return 0.0 if p % 2 else 2 * (L / 2) ** (p + 1) / (p + 1)

    exact = sum(c * moment(a, lx) * moment(b, ly) for a, b, c in terms)
    got = integrate_aperture(f, ApertureGeometry(lx, ly), gauss_legendre_rule(n))
    scale = sum(abs(c) * abs(moment(a, lx) * moment(b, ly)) for a, b, c in terms)
    assert abs(got - exact) <= 1e-9 * max(scale, 1e-300)


def test_gram_converged_between_20_and_40_nodes(scenario):
    q20 = channel_gram(scenario, 20)
    q40 = channel_gram(scenario, 40)
    assert np.max(np.abs(q20 - q40) / np.abs(q40)) < 1e-4

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from partmc.targets import (DiscreteChain, GaussianMixture, SShape, build_target, cycle_walk,
                            gaussian_mixture, integrate_region, mixture2d, symmetric_mixture_1d,
                            build_test_function)


def test_symmetric_mixture_mean_and_half_mass():
    t = symmetric_mixture_1d(1.0, 0.4)
    assert np.allclose(t.exact_mean, 0.0)
    assert t.exact_region_mass(lambda x: x[:, 0] <= 0) == pytest.approx(0.5, abs=1e-8)


def test_unequal_mixture_mass_matches_normal_cdf():
    t = gaussian_mixture([[-3.0], [3.0]], [[[0.25]], [[0.25]]], [0.3, 0.7])
    oracle = 0.3 * stats.norm.cdf(0, -3, 0.5) + 0.7 * stats.norm.cdf(0, 3, 0.5)
    assert t.exact_region_mass(lambda x: x[:, 0] <= 0) == pytest.approx(oracle, abs=1e-8)
    assert oracle == pytest.approx(0.3, abs=1e-8)


@settings(max_examples=10)
@given(st.floats(-2.5, 2.5))
def test_masses_on_both_sides_of_a_cut_sum_to_one(c):
    t = gaussian_mixture([[-1.0], [2.0]], [[[0.3]], [[0.5]]], [0.4, 0.6])
    lo = t.exact_region_mass(lambda x: x[:, 0] <= c)
    hi = t.exact_region_mass(lambda x: x[:, 0] > c)
    assert lo + hi == pytest.approx(1.0, abs=1e-9)


def test_2d_mass_over_half_planes_sums_to_one():
    t = mixture2d()
    left = t.exact_region_mass(lambda x: x[:, 0] <= 0)
    right = t.exact_region_mass(lambda x: x[:, 0] > 0)
    assert left + right == pytest.approx(1.0, abs=1e-6)
    assert left == pytest.approx(0.3, abs=1e-6)  # weights 0.1 + 0.2 sit at x = -3


@given(st.lists(st.floats(-6, 6), min_size=2, max_size=2))
def test_mixture_log_density_matches_scipy(x):
    t = mixture2d()
    ref = np.log(sum(w * stats.multivariate_normal(m, c).pdf(x)
                     for m, c, w in zip(t.means, t.covariances, t.weights)))
    assert t.log_density(np.array(x)) == pytest.approx(ref, rel=1e-10, abs=1e-10)


def test_mixture_batch_and_single_agree():
    t = mixture2d()
    X = np.random.default_rng(0).normal(size=(50, 2)) * 3
    assert np.allclose(t.log_density(X), [t.log_density(x) for x in X], rtol=0, atol=1e-12)


@pytest.mark.parametrize("kwargs", [
    dict(means=[[0.0], [1.0, 2.0]], covariances=[[[1.0]], [[1.0]]], mixture_weights=[0.5, 0.5]),
    dict(means=[[0.0]], covariances=[[[-1.0]]], mixture_weights=[1.0]),
    dict(means=[[0.0], [1.0]], covariances=[[[1.0]], [[1.0]]], mixture_weights=[0.5, 0.6]),
])
def test_mixture_rejects_bad_input(kwargs):
    with pytest.raises(ValueError):
        gaussian_mixture(**kwargs)


def test_weights_tolerance_is_1e9():
    gaussian_mixture([[0.0], [1.0]], [[[1.0]], [[1.0]]], [0.5, 0.5 + 5e-10])
    with pytest.raises(ValueError):
        gaussian_mixture([[0.0], [1.0]], [[[1.0]], [[1.0]]], [0.5, 0.5 + 1e-8])


def test_mixture_sampler_moments():
    t = mixture2d()
    X = t.sample(np.random.default_rng(3), 200000)
    assert np.allclose(X.mean(axis=0), t.exact_mean, atol=0.05)


# S-shape

def test_s_shape_membership_examples():
    s = SShape()
    assert s.log_density(np.array([-1.05, 0.0])) == 0.0
    assert s.log_density(np.array([0.3, 0.5])) == -np.inf
    assert s.log_density(np.array([5.0, 5.0])) == -np.inf


def test_origin_lies_on_the_lens():
    # r = 1, theta = pi/2 maps to (cos(pi/2), 0) = (0, 0)
    assert SShape().in_s2(np.array([0.0, 0.0]))[0]


def _s_membership_by_roots(X):
    """Independent membership oracle: solve the S2 parametrisation for theta by root finding."""
    from scipy.optimize import brentq
    x, y = X[:, 0], X[:, 1]
    r = np.hypot(x, y)
    th = np.mod(np.arctan2(y, x), 2 * np.pi)
    in1 = (r >= 1) & (r <= 1.1) & (th >= np.pi / 3) & (th <= 5 * np.pi / 3)
    in2 = np.zeros(len(X), dtype=bool)
    # split at theta = +-pi/2 where x / cos(theta) is singular
    pieces = [(-2 * np.pi / 3, -np.pi / 2), (-np.pi / 2, np.pi / 2), (np.pi / 2, 2 * np.pi / 3)]
    for i, (a, b) in enumerate(zip(x, y)):
        g = lambda t: (a / np.cos(t) - 1) * np.sin(t) - b
        for lo, hi in pieces:
            ts = np.linspace(lo + 1e-9, hi - 1e-9, 4001)
            gv = g(ts)
            for k in np.flatnonzero(np.sign(gv[:-1]) != np.sign(gv[1:])):
                t = brentq(g, ts[k], ts[k + 1], xtol=1e-14)
                rr = a / np.cos(t)
                if 1 - 1e-9 <= rr <= 1.1 + 1e-9 and abs(g(t)) < 1e-9:
                    in2[i] = True
    return in1 | in2


def test_s_shape_indicator_agrees_with_brute_force():
    s = SShape()
    rng = np.random.default_rng(11)
    X = rng.uniform(-1.2, 1.2, size=(400, 2))
    X[:, 1] *= 0.15  # concentrate near the thin S2 band
    assert np.array_equal(_s_membership_by_roots(X), s.support_indicator(X))


def test_s_shape_normalizer_matches_closed_form_area():
    a1 = 0.5 * (1.1 ** 2 - 1.0) * (4 * np.pi / 3)
    a = 2 * np.pi / 3
    # Jacobian of (r, t) -> (r cos t, (r - 1) sin t) is (r - 1) + sin^2 t
    a2 = 0.005 * 2 * a + 0.1 * (a - np.sin(2 * a) / 2)
    assert SShape().normalizer() == pytest.approx(a1 + a2, rel=1e-6)


def test_s_shape_exact_mean_matches_monte_carlo():
    s = SShape()
    rng = np.random.default_rng(5)
    pts = []
    while sum(len(p) for p in pts) < 400000:
        X = rng.uniform(-1.2, 1.2, size=(1000000, 2))
        pts.append(X[s.support_indicator(X)])
    P = np.vstack(pts)
    se = P.std(axis=0) / np.sqrt(len(P))
    assert np.all(np.abs(P.mean(axis=0) - s.exact_mean) < 4 * se)


def test_log_density_minus_inf_iff_outside_support():
    s = SShape()
    X = np.random.default_rng(2).uniform(-1.2, 1.2, size=(5000, 2))
    assert np.array_equal(np.isinf(s.log_density(X)), ~s.support_indicator(X))


def test_integrate_region_1d_against_normal_cdf():
    f = lambda x: stats.norm.logpdf(x[0])
    assert integrate_region(f, lambda X: X[:, 0] <= 1.0, [[-10, 10]]) == pytest.approx(stats.norm.cdf(1.0), abs=1e-8)


# discrete chains

def test_cycle_walk_examples():
    assert np.allclose(cycle_walk(3).transition_matrix, 1 / 3)
    assert np.allclose(cycle_walk(5).transition_matrix[0], [1 / 3, 1 / 3, 0, 0, 1 / 3])
    with pytest.raises(ValueError):
        cycle_walk(2)


@given(st.integers(3, 128))
def test_cycle_walk_doubly_stochastic_and_symmetric(m):
    K = cycle_walk(m).transition_matrix
    assert np.allclose(K, K.T)
    assert np.allclose(K.sum(axis=0), 1) and np.allclose(K.sum(axis=1), 1)


def test_discrete_chain_validation():
    with pytest.raises(ValueError):
        DiscreteChain(np.array([[0.5, 0.6], [0.5, 0.5]]), np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        DiscreteChain(np.array([[0.5, 0.5], [0.5, 0.5]]), np.array([0.9, 0.1]))
    K = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
    with pytest.raises(ValueError):
        DiscreteChain(K, np.full(3, 1 / 3), reversible=True)
    assert DiscreteChain(K, np.full(3, 1 / 3), reversible=False).size == 3


def test_discrete_chain_from_matrix_solves_stationary():
    K = np.array([[0.9, 0.1], [0.3, 0.7]])
    c = DiscreteChain.from_matrix(K)
    assert np.allclose(c.stationary, [0.75, 0.25])


# test functions and config-built targets

def test_test_functions():
    X = np.array([[1.0, -2.0], [3.0, 4.0]])
    assert np.array_equal(build_test_function("identity", 2)(X), X)
    assert np.array_equal(build_test_function("square", 2)(X), X ** 2)
    assert np.array_equal(build_test_function("constant", 2)(X), np.ones((2, 1)))
    assert np.array_equal(build_test_function({"kind": "coordinate", "index": 1}, 2)(X), X[:, 1:])
    assert build_test_function("identity", 2)(X[0]).shape == (2,)
    with pytest.raises(ValueError):
        build_test_function({"kind": "coordinate", "index": 2}, 2)


def test_build_target_kinds():
    assert isinstance(build_target({"kind": "mixture2d"}), GaussianMixture)
    assert isinstance(build_target({"kind": "s_shape"}), SShape)
    t = build_target({"kind": "gaussian_mixture", "means": [[-3], [3]], "sigmas": [0.5, 0.5], "weights": [0.3, 0.7]})
    assert t.exact_mean == pytest.approx([1.2])
    with pytest.raises(ValueError):
        build_target({"kind": "banana"})

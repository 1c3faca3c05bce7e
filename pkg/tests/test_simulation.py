import math

import numpy as np
import pytest
from scipy import stats

from levydim.checks import laplace_suite, subordination_suite
from levydim.exponents import (
    AdditiveProcessSpec,
    BrownianDrift,
    Custom,
    DifferenceLift,
    FractionalPower,
    IsotropicStable,
    ProductLift,
    StableSubordinatorMarginal,
    Sum,
    evaluate,
    subordinate,
)
from levydim.simulation import (
    RngStream,
    UnsupportedExponentError,
    additive_subordinated_samples,
    empirical_cf,
    rng_stream,
    sample_marginal,
    sample_positive_stable,
    simulate_copies,
    simulate_field,
    simulate_saturated_subordinator,
    simulate_subordinator,
    subordinated_samples,
)

N_DRAWS = 100_000


def laplace(x, lam):
    y = np.exp(-lam * x)
    return y.mean(), y.std(ddof=1) / math.sqrt(y.size)


@pytest.mark.parametrize("lam", [1.0, 2.0])
def test_positive_stable_laplace(lam):
    s = sample_positive_stable(0.5, rng_stream(1, "test"), N_DRAWS)
    est, se = laplace(s, lam)
    assert abs(est - math.exp(-lam ** 0.5)) <= 3 * se


def test_positive_stable_is_positive():
    for alpha in (0.1, 0.5, 0.9):
        assert np.all(sample_positive_stable(alpha, rng_stream(2, "pos"), 10_000) > 0)


@pytest.mark.parametrize("alpha", [0.0, 1.0])
def test_positive_stable_range(alpha):
    with pytest.raises(ValueError):
        sample_positive_stable(alpha, rng_stream(0, "x"), 10)


def test_laplace_suite():
    for r in laplace_suite():
        assert r.passed, r.line()


def test_subordinator_path_is_monotone():
    t = np.linspace(0, 1, 4097)
    for seed in range(5):
        p = simulate_subordinator(0.6, t, rng_stream(seed, "path"))
        assert p.values[0] == 0.0
        assert np.all(np.diff(p.values) >= 0)


def test_subordinator_grid_checked():
    for grid in ([0.0, 0.5, 0.5], [0.1, 0.5], [0.0, 0.5, 0.2]):
        with pytest.raises(ValueError):
            simulate_subordinator(0.5, grid, rng_stream(0, "g"))


@pytest.mark.parametrize("alpha", [0.3, 0.7])
def test_subordinator_value_at_one(alpha):
    rng = rng_stream(3, "at-one")
    # ten steps to t = 1 per path, vectorised over paths through the increments
    dt = np.full((N_DRAWS, 10), 0.1)
    x = (dt ** (1 / alpha) * sample_positive_stable(alpha, rng, dt.shape)).sum(axis=1)
    for lam in (0.5, 1.0, 2.0):
        est, se = laplace(x, lam)
        assert abs(est - math.exp(-lam ** alpha)) <= 3 * se
    # the same through the path sampler on a small number of paths
    vals = [simulate_subordinator(alpha, np.linspace(0, 1, 11), rng).values[-1] for _ in range(2000)]
    est, se = laplace(np.array(vals), 1.0)
    assert abs(est - math.exp(-1.0)) <= 3 * se


def test_subordinator_self_similarity():
    alpha, t = 0.6, 0.25
    grid = np.array([0.0, t, 1.0])
    rng = rng_stream(4, "ks")
    at_t, at_one = [], []
    for _ in range(10_000):
        v = simulate_subordinator(alpha, grid, rng).values
        at_t.append(v[1])
    for _ in range(10_000):
        at_one.append(simulate_subordinator(alpha, np.array([0.0, 1.0]), rng).values[1])
    scaled = np.array(at_t) * t ** (-1 / alpha)
    assert stats.ks_2samp(scaled, at_one).pvalue > 0.01


def test_subordinator_increment_scaling():
    alpha = 0.4
    grid = np.array([0.0, 0.1, 0.4])
    rng = rng_stream(5, "ks2")
    paths = np.array([simulate_subordinator(alpha, grid, rng).values for _ in range(10_000)])
    short, long_ = np.diff(paths, axis=1).T
    assert stats.ks_2samp(short * 0.1 ** (-1 / alpha), long_ * 0.3 ** (-1 / alpha)).pvalue > 0.01


def test_saturated_at_zero():
    assert np.array_equal(simulate_saturated_subordinator(0.5, 3, np.zeros(3), rng_stream(0, "s")), np.zeros(3))


def test_saturated_positive():
    draws = simulate_saturated_subordinator(0.5, 2, [0.3, 1.2], rng_stream(0, "s"), 10_000)
    assert draws.shape == (10_000, 2) and np.all(draws > 0)


def test_saturated_errors():
    with pytest.raises(ValueError):
        simulate_saturated_subordinator(0.5, 2, [-0.1, 1.0], rng_stream(0, "s"))
    with pytest.raises(ValueError):
        simulate_saturated_subordinator(0.5, 2, [1.0, 1.0, 1.0], rng_stream(0, "s"))


@pytest.mark.parametrize("lam", [[0.5, 2.0], [1.0, 1.0], [0.0, 1.5]])
def test_saturated_joint_laplace(lam):
    t = np.array([0.4, 1.1])
    alpha = 0.5
    draws = simulate_saturated_subordinator(alpha, 2, t, rng_stream(6, "sat"), N_DRAWS)
    y = np.exp(-draws @ np.asarray(lam))
    est, se = y.mean(), y.std(ddof=1) / math.sqrt(N_DRAWS)
    exact = math.exp(-t.sum() * sum(l ** alpha for l in lam))
    assert abs(est - exact) <= 3 * se


def test_brownian_field_variance():
    f = simulate_field(BrownianDrift.standard(1), 1.0, 1e-5, seed=7)
    inc = np.diff(f.values[:, 0])
    assert inc.size == 100_000
    assert inc.var(ddof=1) == pytest.approx(1e-5, rel=0.05)


def test_two_parameter_field_independence():
    f = simulate_field(AdditiveProcessSpec((BrownianDrift.standard(1),) * 2), 1.0, 2 ** -10, seed=8)
    assert f.grid_shape == (1025, 1025) and f.N == 2 and f.d == 1
    # Z(t1, t2) - Z(t1, 0) does not depend on t1
    diff = f.values[:, :, 0] - f.values[:, :1, 0]
    assert np.allclose(diff, diff[0])
    a = np.diff(f.values[:, 0, 0])
    b = np.diff(f.values[0, :, 0])
    r = np.corrcoef(a, b)[0, 1]
    assert abs(r) <= 3 / math.sqrt(a.size)


@pytest.mark.parametrize("expr, xi", [
    (IsotropicStable(1.0), [1.0]),
    (IsotropicStable(1.5, 2), [0.6, -0.3]),
    (BrownianDrift(np.array([[1.0, 0.3], [0.3, 0.5]]), np.array([0.5, -0.2])), [0.7, 1.1]),
    (StableSubordinatorMarginal(0.5), [0.8]),
    (StableSubordinatorMarginal(0.3), [-1.3]),
    (FractionalPower(IsotropicStable(1.4), 0.5), [1.0]),
    (Sum((IsotropicStable(1.0), BrownianDrift.standard(1))), [0.9]),
    (ProductLift((StableSubordinatorMarginal(0.7), IsotropicStable(2.0))), [0.5, 0.5]),
])
def test_marginal_cf_matches_exponent(expr, xi):
    x = sample_marginal(expr, 1.0, N_DRAWS, rng_stream(9, "cf"))
    cf, se = empirical_cf(x, xi)
    target = np.exp(-evaluate(expr, xi))
    assert abs(cf - target) <= 3 * se


def test_cauchy_cf_value():
    x = sample_marginal(IsotropicStable(1.0), 1.0, N_DRAWS, rng_stream(10, "cauchy"))
    cf, se = empirical_cf(x, [1.0])
    assert abs(cf - math.exp(-1)) <= 3 * se


def test_empirical_cf_of_zeros():
    cf, se = empirical_cf(np.zeros((1000, 2)), [1.0, 2.0])
    assert cf == 1 and se == 0


def test_empirical_cf_gaussian():
    x = sample_marginal(BrownianDrift.standard(1), 1.0, N_DRAWS, rng_stream(11, "g"))
    cf, se = empirical_cf(x, [1.0])
    assert abs(cf - math.exp(-0.5)) <= 3 * se


def test_empirical_cf_subordinated_brownian():
    base = BrownianDrift.standard(1)
    target = np.exp(-evaluate(subordinate(base, 0.5), [1.0]))
    assert target == pytest.approx(0.4931, abs=1e-4)
    x = subordinated_samples(base, 0.5, 1.0, N_DRAWS, rng_stream(12, "sub"))
    cf, se = empirical_cf(x, [1.0])
    assert abs(cf - target) <= 3 * se


def test_empirical_cf_needs_samples():
    with pytest.raises(ValueError):
        empirical_cf(np.zeros(999), [1.0])


def test_jackknife_matches_closed_form_se():
    x = np.random.default_rng(0).standard_normal(1000)
    _, se = empirical_cf(x, [0.7])
    y = np.exp(0.7j * x)
    loo = (y.sum() - y) / (y.size - 1)
    jack = math.sqrt((y.size - 1) / y.size * np.sum(np.abs(loo - loo.mean()) ** 2))
    assert se == pytest.approx(jack, rel=1e-10)


def test_subordination_suite():
    for r in subordination_suite():
        assert r.passed, r.line()


def test_additive_subordination_identity():
    spec = AdditiveProcessSpec((BrownianDrift.standard(1), IsotropicStable(1.5)))
    t, alpha = np.array([0.5, 1.0]), 0.5
    x = additive_subordinated_samples(spec, alpha, t, N_DRAWS, rng_stream(13, "add"))
    for xi in (-1.0, 0.5, 1.5):
        cf, se = empirical_cf(x, [xi])
        psi = sum(evaluate(subordinate(p, alpha), [xi]) for p in spec.exponents)
        target = np.exp(-t.sum() * psi)
        # every time coordinate t_j drives every component through its own subordinator
        assert abs(cf - target) <= 3 * se + 0.01


def test_determinism():
    spec = AdditiveProcessSpec((IsotropicStable(1.5), BrownianDrift.standard(1)))
    a = simulate_field(spec, 1.0, 2 ** -6, seed=42)
    b = simulate_field(spec, 1.0, 2 ** -6, seed=42)
    c = simulate_field(spec, 1.0, 2 ** -6, seed=42, shard=1)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)
    assert np.array_equal(RngStream(5, "x", 2).generator().random(4), rng_stream(5, "x", 2).random(4))
    assert not np.array_equal(rng_stream(5, "x", 2).random(4), rng_stream(5, "y", 2).random(4))


def test_copies_are_independent_paths():
    copies = simulate_copies(BrownianDrift.standard(1), 3, 1.0, 2 ** -8, seed=1)
    assert len(copies) == 3
    assert copies[0].values.shape == (257, 1)
    assert not np.array_equal(copies[0].values, copies[1].values)


@pytest.mark.parametrize("expr", [
    Custom(lambda x: np.abs(x[:, 0]) + 0j, 1),
    DifferenceLift(BrownianDrift.standard(1), 1, 2),
    Sum((IsotropicStable(1.0), Custom(lambda x: np.abs(x[:, 0]) + 0j, 1))),
])
def test_unsupported(expr):
    with pytest.raises(UnsupportedExponentError):
        simulate_field(expr, 1.0, 0.25, seed=0)


def test_mesh_must_divide_horizon():
    with pytest.raises(ValueError):
        simulate_field(BrownianDrift.standard(1), 1.0, 0.3, seed=0)

import math

import numpy as np
import pytest
from scipy import integrate

from levydim.checks import calibration_suite, power_law
from levydim.criteria import (
    ShellOptions,
    classify,
    hitting_integrand,
    integral_verdict,
    level_set_integrand,
    multiple_time_integrand,
    shell_estimates,
    unit_sphere_area,
)
from levydim.exponents import (
    AdditiveProcessSpec,
    BrownianDrift,
    ExponentError,
    IsotropicStable,
    StableSubordinatorMarginal,
    level_set_family,
    saturated_subordinator_exponent,
)


def spec(*exps):
    return AdditiveProcessSpec(tuple(exps))


def sq():
    return BrownianDrift(np.array([[2.0]]))


def cauchy1(xi):
    return 1.0 / (1.0 + xi[:, 0] ** 2)


def test_hitting_real_exponent():
    assert hitting_integrand(spec(sq()))([1.0]) == pytest.approx(0.5)


def test_hitting_subordinator_marginal():
    assert hitting_integrand(spec(StableSubordinatorMarginal(0.5)))([1.0]) == pytest.approx(0.4)


@pytest.mark.parametrize("f", [
    hitting_integrand(spec(IsotropicStable(1.5, 2), BrownianDrift.standard(2))),
    level_set_integrand(spec(sq(), sq()), 0.7),
    multiple_time_integrand(IsotropicStable(1.2), 1.1, k=3),
])
def test_integrand_bounds_and_symmetry(f, rng):
    xi = rng.standard_normal((2000, f.D)) * 10.0 ** rng.uniform(-2, 4, (2000, 1))
    v = f(xi)
    assert np.all((v >= 0) & (v <= 1))
    assert np.allclose(f(-xi), v, rtol=1e-12, atol=0)
    assert f(np.zeros(f.D)) == 1.0


@pytest.mark.parametrize("alpha, beta", [(1.2, 0.3), (2.0, 0.5), (0.8, 0.9)])
def test_level_set_one_dim(alpha, beta, rng):
    f = level_set_integrand(spec(IsotropicStable(alpha)), beta)
    xi = rng.uniform(-50, 50, (100, 1))
    assert np.allclose(f(xi), 1.0 / (1.0 + np.abs(xi[:, 0]) ** (alpha * (1 - beta))))


def test_level_set_two_quadratics():
    assert level_set_integrand(spec(sq(), sq()), 1.0)([1.0]) == pytest.approx(1 / 9)


def test_level_set_matches_hitting_of_family(rng):
    s = spec(StableSubordinatorMarginal(0.6), IsotropicStable(1.4), sq())
    xi = rng.standard_normal((1000, 1)) * 30
    assert np.allclose(level_set_integrand(s, 1.3)(xi), hitting_integrand(level_set_family(s, 1.3))(xi),
                       rtol=1e-12)


def test_level_set_beta_range():
    with pytest.raises(ExponentError):
        level_set_integrand(spec(sq()), 1.0)


def test_multiple_time_quadratic():
    assert multiple_time_integrand(sq(), 1.0, k=2)([1.0]) == pytest.approx(1 / 9)


def test_multiple_time_small_beta(rng):
    psi = StableSubordinatorMarginal(0.4)
    f = multiple_time_integrand([psi, psi], 1e-10)
    xi = rng.standard_normal((200, 1)) * 5
    re = np.real(psi(xi))
    assert np.allclose(f(xi), (1.0 / (1.0 + 2 * re)) ** 2, rtol=1e-8)


def test_multiple_time_dimension():
    assert multiple_time_integrand(IsotropicStable(2.0, 2), 1.0, k=3).D == 4


def test_multiple_time_needs_k():
    with pytest.raises(ExponentError):
        multiple_time_integrand(sq(), 1.0)


def test_sphere_area():
    assert unit_sphere_area(1) == pytest.approx(2.0)
    assert unit_sphere_area(2) == pytest.approx(2 * math.pi)
    assert unit_sphere_area(3) == pytest.approx(4 * math.pi)


def test_total_of_cauchy_kernel():
    v, _ = integral_verdict(type("F", (), {"D": 1, "__call__": staticmethod(cauchy1)})(),
                            ShellOptions(m_lo=-20, m_hi=40, samples=20_000))
    assert v.converges
    assert v.estimate == pytest.approx(math.pi, rel=0.01)


def test_annulus_area():
    prof = shell_estimates(lambda xi: np.ones(len(xi)), 0, 0, 20_000, seed=3, D=2)
    assert abs(prof.S[0] - 3 * math.pi) <= 4 * prof.se[0] + 1e-9
    assert prof.S[0] == pytest.approx(3 * math.pi, rel=0.02)


def test_scaled_cauchy_total():
    exact, _ = integrate.quad(lambda x: 1.0 / (1.0 + x * x / 2), -np.inf, np.inf)
    assert exact == pytest.approx(math.pi * math.sqrt(2))
    prof = shell_estimates(lambda xi: 1.0 / (1.0 + xi[:, 0] ** 2 / 2), -20, 40, 20_000, D=1)
    v = classify(prof)
    assert v.converges and v.estimate == pytest.approx(exact, rel=0.01)


def test_shell_values_against_exact():
    # int over 2^m <= |xi| < 2^(m+1) in R^2 of 1/(1+|xi|^2) = pi ln((1+4^(m+1))/(1+4^m))
    prof = shell_estimates(lambda xi: 1.0 / (1.0 + np.einsum("ij,ij->i", xi, xi)), -4, 12, 20_000, D=2)
    exact = np.pi * np.log((1 + 4.0 ** (prof.m + 1)) / (1 + 4.0 ** prof.m))
    assert np.all(np.abs(prof.S - exact) <= 4 * prof.se + 1e-12)


@pytest.mark.parametrize("D, f, kind, slope", [
    (1, cauchy1, "converges", -1.0),
    (2, lambda xi: 1.0 / (1.0 + np.einsum("ij,ij->i", xi, xi)), "diverges", 0.0),
    (1, lambda xi: 1.0 / (1.0 + np.sqrt(np.abs(xi[:, 0]))), "diverges", 0.5),
])
def test_classify_examples(D, f, kind, slope):
    v = classify(shell_estimates(f, -10, 30, 20_000, D=D))
    assert v.kind == kind
    assert v.tail_slope == pytest.approx(slope, abs=0.05)


def test_classify_zero_profile():
    prof = shell_estimates(lambda xi: np.where(np.linalg.norm(xi, axis=1) < 0.5, 1.0, 0.0), 0, 10, 20_000, D=1)
    v = classify(prof)
    assert v.converges and v.estimate == pytest.approx(prof.head)
    assert abs(prof.head - 1.0) <= 4 * prof.head_se


def test_classify_preconditions():
    prof = shell_estimates(cauchy1, 0, 4, 100, D=1)
    with pytest.raises(ValueError):
        classify(prof, tail_window=8)
    with pytest.raises(ValueError):
        classify(prof, slope_margin=0.0, tail_window=3)


def test_shell_preconditions():
    with pytest.raises(ValueError):
        shell_estimates(cauchy1, 3, 2, 1000, D=1)
    with pytest.raises(ValueError):
        shell_estimates(cauchy1, 0, 2, 99, D=1)
    with pytest.raises(ValueError):
        shell_estimates(cauchy1, 0, 2, 1000)


def test_non_finite_integrand_raises():
    with pytest.raises(ExponentError):
        shell_estimates(lambda xi: np.full(len(xi), np.nan), 0, 2, 100, D=1)


@pytest.mark.parametrize("D", [1, 3])
def test_reflection_gives_identical_profiles(D):
    f = hitting_integrand(spec(BrownianDrift(np.eye(D), np.arange(1.0, D + 1))))
    a = shell_estimates(f, -3, 10, 2000, seed=11, D=D)
    b = shell_estimates(lambda xi: f(-xi), -3, 10, 2000, seed=11, D=D)
    assert np.array_equal(a.S, b.S) and np.array_equal(a.se, b.se) and a.head == b.head


def test_monotone_domination():
    g = hitting_integrand(spec(IsotropicStable(1.5)))
    f = hitting_integrand(spec(IsotropicStable(1.5), IsotropicStable(0.9)))
    xi = np.linspace(-1e3, 1e3, 10_001)[:, None]
    assert np.all(f(xi) <= g(xi))
    a = shell_estimates(f, -5, 20, 3000, seed=5, D=1)
    b = shell_estimates(g, -5, 20, 3000, seed=5, D=1)
    assert np.all(a.S <= b.S) and a.head <= b.head


def test_threads_do_not_change_results():
    f = hitting_integrand(spec(IsotropicStable(1.2, 2)))
    a = shell_estimates(f, -2, 12, 7000, seed=9, D=2, shard_size=2000)
    b = shell_estimates(f, -2, 12, 7000, seed=9, D=2, shard_size=2000, threads=4)
    assert np.array_equal(a.S, b.S) and np.array_equal(a.se, b.se)


def test_seed_changes_results():
    a = shell_estimates(cauchy1, 0, 3, 1000, seed=1, D=1)
    b = shell_estimates(cauchy1, 0, 3, 1000, seed=2, D=1)
    assert not np.array_equal(a.S, b.S)


def test_power_law_calibration():
    results = calibration_suite()
    for r in results:
        assert r.passed, r.line()


@pytest.mark.parametrize("p, kind", [(1.5, "converges"), (0.5, "diverges")])
def test_power_law_direct(p, kind):
    assert classify(shell_estimates(power_law(p), 0, 24, 10_000, D=1)).kind == kind


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7])
@pytest.mark.parametrize("N", [2, 3])
def test_saturated_transfer(alpha, N):
    saturated = hitting_integrand(spec(*[saturated_subordinator_exponent(alpha, N)] * N))
    radial = lambda xi: (1.0 / (1.0 + np.linalg.norm(xi, axis=1) ** alpha)) ** N
    opts = ShellOptions(m_lo=-6, m_hi=30, samples=5000)
    a, _ = integral_verdict(saturated, opts)
    b = classify(shell_estimates(radial, opts.m_lo, opts.m_hi, opts.samples, D=N))
    assert a.kind == b.kind
    assert a.kind != "inconclusive"

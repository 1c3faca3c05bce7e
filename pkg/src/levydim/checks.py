"""Calibration and sandwich suites, shared by ``levydim selftest`` and the tests."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .criteria import classify, shell_estimates
from .exponents import BrownianDrift, evaluate, saturated_subordinator_exponent, subordinate
from .simulation import empirical_cf, rng_stream, sample_positive_stable, subordinated_samples


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def random_frequencies(n: int, N: int, rng: np.random.Generator, decades: float = 3.0) -> np.ndarray:
    """Random sign times log-uniform magnitude in ``[10**-decades, 10**decades]`` per coordinate."""
    mag = 10.0 ** rng.uniform(-decades, decades, (n, N))
    return np.where(rng.random((n, N)) < 0.5, -mag, mag)


def sandwich_violations(alpha: float, N: int, n: int = 10_000, seed: int = 0) -> dict:
    """Count violations of the two-sided bound on ``Re 1/(1 + Psi^alpha_j)``.

    With ``s = sum_l |xi_l|**alpha`` and ``theta = tan(alpha pi/2)`` the bound is
    ``1/((1 + theta**2)(1 + s)) < Re 1/(1 + Psi) < 1/(1 + s)``.  Also checks
    ``1 + |xi|**alpha <= 1 + s`` and reports the largest ratio ``(1 + s)/(1 + |xi|**alpha)``.
    """
    rng = rng_stream(seed, f"sandwich/{alpha}/{N}")
    xi = random_frequencies(n, N, rng)
    psi = saturated_subordinator_exponent(alpha, N)
    theta = math.tan(alpha * math.pi / 2)
    s = np.sum(np.abs(xi) ** alpha, axis=1)
    mid = np.real(1.0 / (1.0 + evaluate(psi, xi)))
    upper = 1.0 / (1.0 + s)
    lower = upper / (1.0 + theta ** 2)
    norm_a = np.linalg.norm(xi, axis=1) ** alpha
    ratio = (1.0 + s) / (1.0 + norm_a)
    return {
        "lower": int(np.count_nonzero(~(lower < mid))),
        "upper": int(np.count_nonzero(~(mid < upper))),
        "norm_left": int(np.count_nonzero(~(1.0 + norm_a <= 1.0 + s))),
        "max_ratio": float(ratio.max()),
        "ratio_bound": N ** (1 - alpha / 2) * N,
    }


def sandwich_suite(n: int = 10_000, seed: int = 0) -> list:
    out = []
    for alpha in (0.3, 0.5, 0.7):
        for N in (2, 3):
            v = sandwich_violations(alpha, N, n, seed)
            ok = bool(v["lower"] == v["upper"] == v["norm_left"] == 0 and v["max_ratio"] <= v["ratio_bound"])
            out.append(CheckResult(
                f"sandwich alpha={alpha} N={N}", ok,
                f"violations lower={v['lower']} upper={v['upper']} norm={v['norm_left']}, "
                f"max ratio {v['max_ratio']:.3f} <= {v['ratio_bound']:.3f}"))
    return out


def power_law(p: float):
    return lambda xi: (1.0 + np.linalg.norm(xi, axis=1)) ** -p


def calibration_suite(samples: int = 10_000, seed: int = 0) -> list:
    """Power-law family ``(1 + |xi|)**-p`` on R^D and the Cauchy-kernel total."""
    expected = {-0.5: ("diverges",), 0.0: ("diverges", "inconclusive"), 0.5: ("converges",), 1.0: ("converges",)}
    out = []
    for D in (1, 2, 3):
        for shift, kinds in expected.items():
            p = D + shift
            prof = shell_estimates(power_law(p), 0, 24, samples, seed, D=D)
            v = classify(prof, 0.25, 8)
            out.append(CheckResult(f"power law D={D} p={p}", v.kind in kinds,
                                   f"{v.kind} (slope {v.tail_slope:.3f} +/- {v.ci_half_width:.3f})"))
    prof = shell_estimates(lambda xi: 1.0 / (1.0 + xi[:, 0] ** 2), -20, 40, samples, seed, D=1)
    v = classify(prof, 0.25, 8)
    rel = abs(v.estimate - math.pi) / math.pi if v.estimate is not None else math.inf
    out.append(CheckResult("int 1/(1+x^2) = pi", bool(v.converges and rel < 0.01),
                           f"estimate {v.estimate} (rel. error {rel:.2e})"))
    return out


def laplace_suite(n: int = 100_000, seed: int = 0) -> list:
    """Empirical Laplace transform of the one-sided stable sampler."""
    out = []
    for alpha in (0.3, 0.5, 0.7):
        s = sample_positive_stable(alpha, rng_stream(seed, f"laplace/{alpha}"), n)
        for lam in (0.5, 1.0, 2.0):
            y = np.exp(-lam * s)
            est, se = y.mean(), y.std(ddof=1) / math.sqrt(n)
            exact = math.exp(-lam ** alpha)
            out.append(CheckResult(f"laplace alpha={alpha} lambda={lam}", bool(abs(est - exact) <= 3 * se),
                                   f"{est:.5f} vs {exact:.5f} (3 SE = {3 * se:.5f})"))
    return out


CF_GRID = np.linspace(-2.0, 2.0, 9)


def subordination_suite(n: int = 100_000, seed: int = 0, t: float = 1.0) -> list:
    """Empirical CF of subordinated Brownian motion against ``exp(-t (xi**2/2)**alpha)``."""
    base = BrownianDrift.standard(1)
    out = []
    for alpha in (0.3, 0.5, 0.7):
        x = subordinated_samples(base, alpha, t, n, rng_stream(seed, f"subord/{alpha}"))
        psi = subordinate(base, alpha)
        worst = 0.0
        for xi in CF_GRID:
            cf, se = empirical_cf(x, [xi])
            target = np.exp(-t * evaluate(psi, [xi]))
            worst = max(worst, abs(cf - target) / (3 * se + 0.01))
        out.append(CheckResult(f"subordinated CF alpha={alpha}", worst <= 1.0,
                               f"max |error| / (3 SE + 0.01) on 9-point grid: {worst:.3f}"))
    return out


def all_suites(seed: int = 0) -> list:
    return sandwich_suite(seed=seed) + calibration_suite(seed=seed) + laplace_suite(seed=seed) \
        + subordination_suite(seed=seed)

"""Hausdorff dimension of zero sets and multiple-time sets.

The dimension is the supremum of the ``beta`` for which the level-set
criterion integral converges.  Homogeneous exponents of common degree ``a``
give it in closed form, ``N - D / a`` clamped to ``[0, N]``; everything else goes
through a scan-then-bisect search on ``beta`` driven by the shell classifier.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .criteria import (
    Integrand,
    ShellOptions,
    Verdict,
    classify,
    hitting_integrand,
    level_set_integrand,
    multiple_time_integrand,
    shell_estimates,
)
from .exponents import (
    AdditiveProcessSpec,
    ExponentExpr,
    difference_lift,
    evaluate,
    homogeneity_degree,
)

HYPOTHESIS_KEYS = ("q_potential_density_ae_positive", "per_beta")


class MonotonicityError(RuntimeError):
    """A convergent probe sits above a divergent one; the result is untrusted."""

    def __init__(self, converged_beta, diverged_beta, result):
        super().__init__(
            f"criterion converges at beta={converged_beta:.6g} but diverges at "
            f"beta={diverged_beta:.6g}; convergence is not monotone in beta")
        self.pair = (converged_beta, diverged_beta)
        self.result = result


@dataclass(frozen=True)
class DimensionProblem:
    """Either a level set of an additive process or the k-multiple times of one process.

    ``hypothesis_flags`` are user assertions about potential densities.  They
    cannot be checked numerically and are only echoed into results.
    """

    kind: str
    spec: Optional[AdditiveProcessSpec] = None
    psis: Optional[tuple] = None
    k: Optional[int] = None
    hypothesis_flags: dict = field(default_factory=lambda: {key: False for key in HYPOTHESIS_KEYS})

    @classmethod
    def level_set(cls, spec: AdditiveProcessSpec | Sequence[ExponentExpr], **flags):
        if not isinstance(spec, AdditiveProcessSpec):
            spec = AdditiveProcessSpec(tuple(spec))
        return cls("level_set", spec=spec, hypothesis_flags=_flags(flags))

    @classmethod
    def multiple_times(cls, psis: ExponentExpr | Sequence[ExponentExpr], k: Optional[int] = None,
                       **flags):
        psis = (psis,) * k if isinstance(psis, ExponentExpr) else tuple(psis)
        k = len(psis) if k is None else k
        # validates k and dimensions
        difference_lift(list(psis), k)
        return cls("multiple_times", psis=psis, k=k, hypothesis_flags=_flags(flags))

    @property
    def criterion_spec(self) -> AdditiveProcessSpec:
        """The additive spec whose zero set is the set of interest."""
        if self.kind == "level_set":
            return self.spec
        return difference_lift(list(self.psis), self.k)

    @property
    def N(self) -> int:
        return self.spec.N if self.kind == "level_set" else self.k

    @property
    def D(self) -> int:
        return self.criterion_spec.D

    def integrand(self, beta: float) -> Integrand:
        if self.kind == "level_set":
            return level_set_integrand(self.spec, beta)
        return multiple_time_integrand(list(self.psis), beta)


def _flags(flags):
    unknown = set(flags) - set(HYPOTHESIS_KEYS)
    if unknown:
        raise ValueError(f"unknown hypothesis flags {sorted(unknown)}")
    return {key: bool(flags.get(key, False)) for key in HYPOTHESIS_KEYS}


@dataclass
class DimensionResult:
    beta_star: float
    method: str
    bracket: tuple
    trail: list
    empty_at_criterion: bool
    beta_tol: float = 0.0
    hypothesis_flags: dict = field(default_factory=dict)
    inconclusive_band: Optional[tuple] = None
    degree: Optional[float] = None
    cross_check: Optional["DimensionResult"] = None

    @property
    def definite(self) -> bool:
        lo, hi = self.bracket
        return self.method == "closed_form" or hi - lo <= self.beta_tol + 1e-12

    def trail_rows(self):
        return [(b, v.tail_slope, v.slope_se, v.kind) for b, v in self.trail]

    def to_dict(self) -> dict:
        out = {
            "beta_star": self.beta_star,
            "method": self.method,
            "bracket": list(self.bracket),
            "beta_tol": self.beta_tol,
            "empty_at_criterion": self.empty_at_criterion,
            "definite": self.definite,
            "inconclusive_band": None if self.inconclusive_band is None else list(self.inconclusive_band),
            "degree": self.degree,
            "hypothesis_flags": dict(self.hypothesis_flags),
            "trail": [{"beta": b, **v.to_dict()} for b, v in self.trail],
        }
        if self.cross_check is not None:
            out["cross_check"] = self.cross_check.to_dict()
        return out


@dataclass(frozen=True)
class SolverOptions:
    """``slope_margin`` here is the classifier margin used for beta probes.

    It is much tighter than the hit-test default because the bisection root
    lands where the tail slope crosses ``-slope_margin``, i.e. about
    ``slope_margin / a`` below the true critical beta.
    """

    beta_tol: float = 0.02
    slope_margin: float = 0.01
    scan_points: int = 4
    cross_check: bool = True
    method: str = "auto"
    shells: ShellOptions = ShellOptions()


def hitting_test(problem: DimensionProblem, opts: ShellOptions = ShellOptions()) -> Verdict:
    """Classify the hitting integral; convergence means the set is nonempty w.p. > 0."""
    f = hitting_integrand(problem.criterion_spec)
    profile = shell_estimates(f, opts.m_lo, opts.m_hi, opts.samples, opts.seed, D=f.D,
                              shard_size=opts.shard_size, threads=opts.threads)
    return classify(profile, opts.slope_margin, opts.tail_window)


def _sphere_points(D, n, seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    g = rng.standard_normal((n, D))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    axes = np.eye(D)
    return np.vstack([g, axes, -axes])


def critical_beta_homogeneous(problem: DimensionProblem, n_directions: int = 256,
                              seed: int = 0) -> Optional[DimensionResult]:
    """Closed-form critical beta when all exponents share one homogeneity degree.

    With ``Re(z**g) >= cos(g pi/2) |z|**g`` on the right half-plane, the
    integrand behaves like ``|xi|**(-a (N - beta))`` in both directions, so the
    integral converges exactly for ``beta < N - D/a``.  Returns None when the
    degree is missing or the summed real part vanishes in some sampled direction.
    """
    spec = problem.criterion_spec
    degrees = [homogeneity_degree(p) for p in spec.exponents]
    if any(a is None for a in degrees):
        return None
    a = degrees[0]
    if a <= 0 or any(not math.isclose(x, a, rel_tol=1e-12) for x in degrees):
        return None
    u = _sphere_points(spec.D, n_directions, seed)
    re_total = sum(np.real(evaluate(p, u)) for p in spec.exponents)
    if np.min(re_total) <= 1e-12:
        return None
    N, D = problem.N, spec.D
    raw = N - D / a
    beta = min(max(raw, 0.0), float(N))
    return DimensionResult(beta, "closed_form", (beta, beta), [], raw <= 0,
                           hypothesis_flags=dict(problem.hypothesis_flags), degree=a)


def _check_monotone(trail, result):
    conv = [b for b, v in trail if v.converges]
    div = [b for b, v in trail if v.diverges]
    if conv and div and max(conv) > min(div):
        raise MonotonicityError(max(conv), min(div), result)


def bisect_dimension(problem: DimensionProblem, opts: SolverOptions = SolverOptions()) -> DimensionResult:
    """Scan a coarse beta grid, then bisect between the last convergent and first divergent probe.

    Inconclusive probes are never treated as either side.  They form a band
    and the bracket is tightened from both sides toward it; the search stops
    once both gaps are within ``beta_tol``.
    """
    if opts.beta_tol <= 0:
        raise ValueError("beta_tol must be positive")
    N = problem.N
    shells = opts.shells
    trail: list[tuple[float, Verdict]] = []

    def probe(beta):
        f = problem.integrand(beta)
        profile = shell_estimates(f, shells.m_lo, shells.m_hi, shells.samples, shells.seed,
                                  D=f.D, shard_size=shells.shard_size, threads=shells.threads)
        verdict = classify(profile, opts.slope_margin, shells.tail_window)
        trail.append((beta, verdict))
        return verdict

    def partial():
        return DimensionResult(math.nan, "bisection", (lo, hi), list(trail), False, opts.beta_tol,
                               dict(problem.hypothesis_flags))

    lo, hi = 0.0, float(N)
    for i in range(1, opts.scan_points + 1):
        probe(N * i / (opts.scan_points + 1))
    _check_monotone(trail, partial())
    lo = max([b for b, v in trail if v.converges], default=0.0)
    hi = min([b for b, v in trail if v.diverges], default=float(N))

    while hi - lo > opts.beta_tol:
        inside = [b for b, v in trail if v.kind == "inconclusive" and lo < b < hi]
        if not inside:
            mid = 0.5 * (lo + hi)
        else:
            band_lo, band_hi = min(inside), max(inside)
            if band_lo - lo > opts.beta_tol:
                mid = 0.5 * (lo + band_lo)
            elif hi - band_hi > opts.beta_tol:
                mid = 0.5 * (band_hi + hi)
            else:
                break
        v = probe(mid)
        if v.converges:
            lo = mid
        elif v.diverges:
            hi = mid

    _check_monotone(trail, partial())
    inside = [b for b, v in trail if v.kind == "inconclusive" and lo < b < hi]
    band = (min(inside), max(inside)) if inside else None
    empty = not any(v.converges for _, v in trail)
    beta = 0.0 if empty else 0.5 * (lo + hi)
    return DimensionResult(beta, "bisection", (lo, hi), trail, empty, opts.beta_tol,
                           dict(problem.hypothesis_flags), inconclusive_band=band)


def solve_dimension(problem: DimensionProblem, opts: SolverOptions = SolverOptions()) -> DimensionResult:
    """Dimension of the zero set / multiple-time set of ``problem``.

    ``opts.method`` is ``"auto"`` (closed form when available), ``"bisection"``
    or ``"closed_form"``.  With ``cross_check`` the other route is run too and
    attached to the result.
    """
    if opts.method not in ("auto", "bisection", "closed_form"):
        raise ValueError(f"unknown method {opts.method!r}")
    closed = critical_beta_homogeneous(problem)
    if opts.method == "closed_form":
        if closed is None:
            raise ValueError("problem is not homogeneous; no closed form")
        closed.beta_tol = opts.beta_tol
        return closed
    if opts.method == "auto" and closed is not None:
        closed.beta_tol = opts.beta_tol
        if opts.cross_check:
            closed.cross_check = bisect_dimension(problem, opts)
        return closed
    result = bisect_dimension(problem, opts)
    if opts.cross_check and closed is not None:
        result.cross_check = closed
        result.degree = closed.degree
    return result


def trail_violations(result: DimensionResult) -> list:
    """Trail entries inconsistent with ``beta_star`` beyond the tolerance."""
    tol = result.beta_tol
    bad = []
    for b, v in result.trail:
        if b < result.beta_star - tol and not v.converges:
            bad.append((b, v.kind))
        elif b > result.beta_star + tol and not v.diverges:
            bad.append((b, v.kind))
    return bad

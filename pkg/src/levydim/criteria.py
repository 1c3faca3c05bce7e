"""Criterion integrands and their convergence classification.

The integrals all have the form ``int_{R^D} f(xi) dxi`` with ``0 <= f <= 1``
and convergence is a tail property, so the estimator splits R^D into a head
ball ``|xi| < 2**m_lo`` and dyadic shells ``2**m <= |xi| < 2**(m+1)`` and
reads the tail decay off the slope of ``log2 S_m`` against ``m``.
"""
from __future__ import annotations

import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict
from typing import Callable, Optional, Sequence

import numpy as np

from .exponents import (
    AdditiveProcessSpec,
    ExponentExpr,
    ExponentError,
    FractionalPower,
    Sum,
    difference_lift,
    evaluate,
)

# Offsets keep spawn keys nonnegative for negative shell indices.
_SHELL_KEY_OFFSET = 1 << 16
_HEAD_KEY = 0


def re_resolvent(w: np.ndarray) -> np.ndarray:
    """``Re(1 / (1 + w))`` for ``Re w >= 0``; always in [0, 1]."""
    x, y = w.real, w.imag
    if not np.all(np.isfinite(x) & np.isfinite(y)):
        raise ExponentError("exponent returned non-finite values")
    xp = 1.0 + x
    return xp / (xp * xp + y * y)


@dataclass(frozen=True, eq=False)
class Integrand:
    """Nonnegative criterion integrand on R^D.

    ``kind`` is ``"hitting"``, ``"level_set"`` or ``"multiple_time"``; ``beta``
    is ``None`` for hitting integrands.
    """

    kind: str
    source: AdditiveProcessSpec
    D: int
    fn: Callable[[np.ndarray], np.ndarray]
    beta: Optional[float] = None

    def __call__(self, xi) -> np.ndarray:
        arr = np.asarray(xi, dtype=float)
        single = arr.ndim <= 1
        batch = arr.reshape(1, -1) if single else arr
        if batch.shape[1] != self.D:
            raise ExponentError(f"integrand lives on R^{self.D}, got shape {arr.shape}")
        out = self.fn(batch)
        return float(out[0]) if single else out


def hitting_integrand(spec: AdditiveProcessSpec) -> Integrand:
    """``prod_j Re(1 / (1 + psi_j(xi)))``."""
    exps = spec.exponents

    def fn(xi):
        out = np.ones(xi.shape[0])
        for psi in exps:
            out *= re_resolvent(evaluate(psi, xi))
        return out

    return Integrand("hitting", spec, spec.D, fn)


def _level_set_fn(spec: AdditiveProcessSpec, beta: float):
    N = spec.N
    if not 0 < beta < N:
        raise ExponentError(f"beta must lie in (0, {N}), got {beta}")
    total = Sum(tuple(FractionalPower(p, 1.0 - beta / N) for p in spec.exponents))

    def fn(xi):
        return re_resolvent(evaluate(total, xi)) ** N

    return fn


def level_set_integrand(spec: AdditiveProcessSpec, beta: float) -> Integrand:
    """``[Re(1 / (1 + sum_j psi_j**(1 - beta/N)))]**N``."""
    return Integrand("level_set", spec, spec.D, _level_set_fn(spec, beta), beta)


def multiple_time_integrand(psis: ExponentExpr | Sequence[ExponentExpr], beta: float,
                            k: Optional[int] = None) -> Integrand:
    """Level-set integrand of the difference-lifted spec on R^{d(k-1)}.

    ``psis`` is a list of k exponents, or a single exponent together with ``k``.
    """
    if isinstance(psis, ExponentExpr):
        if k is None:
            raise ExponentError("k is required with a single exponent")
    else:
        psis = list(psis)
        k = len(psis) if k is None else k
    spec = difference_lift(psis, k)
    return Integrand("multiple_time", spec, spec.D, _level_set_fn(spec, beta), beta)


@dataclass
class ShellProfile:
    m: np.ndarray
    S: np.ndarray
    se: np.ndarray
    samples_per_shell: int
    seed: int
    D: int
    head: float
    head_se: float
    shard_size: int

    def rows(self):
        return [(int(m), float(s), float(e)) for m, s, e in zip(self.m, self.S, self.se)]


@dataclass(frozen=True)
class Verdict:
    """Outcome of a convergence test.

    ``kind`` is ``"converges"``, ``"diverges"`` or ``"inconclusive"``.
    ``estimate`` (with ``estimate_se``) is only set for convergent integrals.
    """

    kind: str
    tail_slope: float
    slope_se: float
    ci_half_width: float
    estimate: Optional[float] = None
    estimate_se: Optional[float] = None
    reason: Optional[str] = None

    @property
    def converges(self) -> bool:
        return self.kind == "converges"

    @property
    def diverges(self) -> bool:
        return self.kind == "diverges"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ShellOptions:
    m_lo: int = -10
    m_hi: int = 30
    samples: int = 20_000
    seed: int = 0
    slope_margin: float = 0.25
    tail_window: int = 8
    shard_size: int = 5_000
    threads: int = 1


def unit_sphere_area(D: int) -> float:
    """Surface measure of the unit sphere in R^D (2 for D = 1)."""
    return 2.0 * math.pi ** (D / 2) / math.gamma(D / 2)


def _rng(seed: int, tag: str, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(zlib.crc32(tag.encode()), *key))
    return np.random.Generator(np.random.PCG64(ss))


def _directions(rng, n, D):
    if D == 1:
        return np.where(rng.random(n) < 0.5, -1.0, 1.0)[:, None]
    g = rng.standard_normal((n, D))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _shard_sizes(n, shard_size):
    full, rest = divmod(n, shard_size)
    return [shard_size] * full + ([rest] if rest else [])


def _shell_sums(f, D, m, n, seed, shard_size):
    """Sum and sum of squares of the weighted draws for shell m."""
    omega = unit_sphere_area(D)
    total = 0.0
    total_sq = 0.0
    for shard, size in enumerate(_shard_sizes(n, shard_size)):
        rng = _rng(seed, "shell", m + _SHELL_KEY_OFFSET, shard)
        u = rng.random(size)
        dirs = _directions(rng, size, D)
        r = 2.0 ** (m + u)
        vals = f(dirs * r[:, None])
        if not np.all(np.isfinite(vals)):
            raise ExponentError(f"non-finite integrand value in shell {m}")
        w = vals * (r ** D) * (math.log(2.0) * omega)
        total += float(w.sum())
        total_sq += float((w * w).sum())
    return total, total_sq


def _head_ball(f, D, m_lo, n, seed, shard_size):
    R = 2.0 ** m_lo
    volume = unit_sphere_area(D) / D * R ** D
    total = total_sq = 0.0
    for shard, size in enumerate(_shard_sizes(n, shard_size)):
        rng = _rng(seed, "head", _HEAD_KEY, shard)
        r = R * rng.random(size) ** (1.0 / D)
        vals = f(_directions(rng, size, D) * r[:, None]) * volume
        total += float(vals.sum())
        total_sq += float((vals * vals).sum())
    return _mean_se(total, total_sq, n)


def _mean_se(total, total_sq, n):
    mean = total / n
    var = max(total_sq / n - mean * mean, 0.0)
    return mean, math.sqrt(var / (n - 1))


def shell_estimates(f: Callable[[np.ndarray], np.ndarray], m_lo: int, m_hi: int, n: int,
                    seed: int = 0, *, D: Optional[int] = None, shard_size: int = 5_000,
                    threads: int = 1) -> ShellProfile:
    """Monte Carlo estimates of the integral of ``f`` over each dyadic shell.

    Radii are drawn log-uniformly and directions uniformly, so each draw is
    weighted by ``r**D * ln 2 * |S^{D-1}|``.  Every (shell, shard) pair has its
    own RNG stream derived from ``seed``; results do not depend on ``threads``.
    """
    if m_lo > m_hi:
        raise ValueError(f"empty shell range {m_lo}..{m_hi}")
    if n < 100:
        raise ValueError("need at least 100 samples per shell")
    if D is None:
        D = getattr(f, "D", None)
        if D is None:
            raise ValueError("dimension D is required for a plain callable")
    shells = list(range(m_lo, m_hi + 1))

    def job(m):
        return _shell_sums(f, D, m, n, seed, shard_size)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            sums = list(pool.map(job, shells))
    else:
        sums = [job(m) for m in shells]
    stats = [_mean_se(t, tsq, n) for t, tsq in sums]
    head, head_se = _head_ball(f, D, m_lo, n, seed, shard_size)
    return ShellProfile(
        m=np.array(shells),
        S=np.array([s for s, _ in stats]),
        se=np.array([e for _, e in stats]),
        samples_per_shell=n,
        seed=seed,
        D=D,
        head=head,
        head_se=head_se,
        shard_size=shard_size,
    )


def tail_fit(profile: ShellProfile, tail_window: int):
    """OLS slope of ``log2 S_m`` over the last ``tail_window`` nonzero shells.

    Returns ``(slope, slope_se, used_indices)``; the standard error is the
    larger of the residual-based and the propagated Monte Carlo error.
    """
    idx = np.flatnonzero(profile.S > 0)[-tail_window:]
    if idx.size < 3:
        return math.nan, math.inf, idx
    m = profile.m[idx].astype(float)
    y = np.log2(profile.S[idx])
    var_y = (profile.se[idx] / (profile.S[idx] * math.log(2.0))) ** 2
    mc = m - m.mean()
    sxx = float(mc @ mc)
    slope = float(mc @ (y - y.mean()) / sxx)
    resid = y - y.mean() - slope * mc
    resid_var = float(resid @ resid) / max(idx.size - 2, 1) / sxx
    prop_var = float((mc * mc) @ var_y) / sxx ** 2
    return slope, math.sqrt(max(resid_var, prop_var)), idx


def classify(profile: ShellProfile, slope_margin: float = 0.25, tail_window: int = 8,
             vanish_tol: float = 1e-9) -> Verdict:
    """Converges / diverges / inconclusive from the tail slope of a shell profile.

    Converges when ``slope + 2 se < -margin``; diverges when
    ``slope - 2 se > -margin`` and, for slopes below ``+margin``, the tail
    shells are not negligible against the largest shell.  Logarithmic
    divergence (slope 0) therefore always lands on the divergent side.
    """
    if slope_margin <= 0:
        raise ValueError("slope margin must be positive")
    if len(profile.m) < tail_window:
        raise ValueError(f"profile has {len(profile.m)} shells, tail window is {tail_window}")
    if not np.any(profile.S > 0):
        return Verdict("converges", -math.inf, 0.0, 0.0, profile.head, profile.head_se,
                       reason="all shell estimates are zero")
    s, se, idx = tail_fit(profile, tail_window)
    ci = 2.0 * se
    if not math.isfinite(s):
        return Verdict("inconclusive", s, se, ci, reason="fewer than 3 nonzero shells")
    if s + ci < -slope_margin:
        ratio = 2.0 ** s
        tail = profile.S[idx[-1]] * ratio / (1.0 - ratio)
        estimate = profile.head + float(profile.S.sum()) + tail
        est_se = math.sqrt(profile.head_se ** 2 + float((profile.se ** 2).sum()))
        return Verdict("converges", s, se, ci, estimate, est_se)
    if s - ci > -slope_margin:
        if s > slope_margin:
            return Verdict("diverges", s, se, ci)
        tail_level = float(profile.S[idx].mean())
        if tail_level > vanish_tol * float(profile.S.max()):
            return Verdict("diverges", s, se, ci)
        return Verdict("inconclusive", s, se, ci, reason="tail shells vanish")
    return Verdict("inconclusive", s, se, ci,
                   reason=f"slope {s:.3f} +/- {ci:.3f} straddles {-slope_margin}")


def integral_verdict(f: Integrand, opts: ShellOptions = ShellOptions()) -> tuple[Verdict, ShellProfile]:
    """Estimate shells for ``f`` and classify them with the options' margin."""
    profile = shell_estimates(f, opts.m_lo, opts.m_hi, opts.samples, opts.seed,
                              D=f.D, shard_size=opts.shard_size, threads=opts.threads)
    return classify(profile, opts.slope_margin, opts.tail_window), profile

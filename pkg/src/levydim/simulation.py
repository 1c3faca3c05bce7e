"""Exact sampling of stable subordinators, subordinated processes and additive fields.

Every sampler draws exact increments; there is no time discretisation error.
Isotropic stable processes are produced as Brownian motion run at the clock of
an independent stable subordinator, the same device the level-set criterion
is built on.
"""
from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .exponents import (
    AdditiveProcessSpec,
    BrownianDrift,
    ExponentExpr,
    FractionalPower,
    IsotropicStable,
    ProductLift,
    StableSubordinatorMarginal,
    Sum,
)


class UnsupportedExponentError(ValueError):
    """The exponent has no exact sampler (Custom, DifferenceLift...)."""


@dataclass(frozen=True)
class RngStream:
    """Named, independent random stream derived from a master seed."""

    seed: int
    purpose: str
    shard: int = 0

    def generator(self) -> np.random.Generator:
        key = (zlib.crc32(self.purpose.encode()), self.shard)
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=key)))


def rng_stream(seed: int, purpose: str, shard: int = 0) -> np.random.Generator:
    return RngStream(seed, purpose, shard).generator()


def sample_positive_stable(alpha: float, rng: np.random.Generator, size=None):
    """One-sided stable variates with ``E exp(-l S) = exp(-l**alpha)``.

    Kanter's representation: for ``V ~ U(0, pi)`` and ``W ~ Exp(1)``

        A(V) = [sin(a V)**a * sin((1-a) V)**(1-a) / sin V] ** (1 / (1-a))
        S = (A(V) / W) ** ((1-a) / a)
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    v = rng.uniform(0.0, math.pi, size)
    w = rng.standard_exponential(size)
    a = alpha
    zol = (np.sin(a * v) ** a * np.sin((1 - a) * v) ** (1 - a) / np.sin(v)) ** (1 / (1 - a))
    return (zol / w) ** ((1 - a) / a)


@dataclass
class SubordinatorPath:
    alpha: float
    t_grid: np.ndarray
    values: np.ndarray
    seed: Optional[int] = None


def _check_grid(t_grid):
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 1 or t[0] != 0.0 or np.any(np.diff(t) <= 0):
        raise ValueError("time grid must start at 0 and increase strictly")
    return t


def simulate_subordinator(alpha: float, t_grid, rng: np.random.Generator,
                          seed: Optional[int] = None) -> SubordinatorPath:
    """Path on ``t_grid``; the increment over ``dt`` is ``dt**(1/alpha) * S``."""
    t = _check_grid(t_grid)
    dt = np.diff(t)
    incs = dt ** (1.0 / alpha) * sample_positive_stable(alpha, rng, dt.size)
    values = np.concatenate([[0.0], np.cumsum(incs)])
    return SubordinatorPath(alpha, t, values, seed)


def simulate_saturated_subordinator(alpha: float, N: int, t, rng: np.random.Generator, size=None):
    """Draws of ``sum_j sigma^j(t_j)`` where each ``sigma^j`` has N iid stable coordinates.

    Uses ``N**2`` independent stable variates per draw; coordinate ``l`` is
    ``sum_j t_j**(1/alpha) S_{j,l}``.  Returns shape ``(N,)`` or ``(size, N)``.
    """
    t = np.asarray(t, dtype=float).reshape(-1)
    if t.shape != (N,):
        raise ValueError(f"time must be a point of R^{N}")
    if np.any(t < 0):
        raise ValueError("saturated subordinator is indexed by nonnegative times")
    n = 1 if size is None else int(size)
    s = sample_positive_stable(alpha, rng, (n, N, N))
    out = np.einsum("j,njl->nl", t ** (1.0 / alpha), s)
    return out[0] if size is None else out


def _sqrt_psd(Q):
    w, V = np.linalg.eigh(Q)
    return V * np.sqrt(np.clip(w, 0.0, None))


def sample_increments(expr: ExponentExpr, dt, rng: np.random.Generator, size: Optional[int] = None):
    """Increments over durations ``dt`` of the Lévy process with exponent ``expr``.

    ``dt`` is a scalar (with ``size``) or an array of durations, one per draw,
    which is how subordinated clocks are fed through.  Returns ``(n, dim)``.
    """
    dt = np.asarray(dt, dtype=float)
    if dt.ndim == 0:
        dt = np.full(1 if size is None else int(size), float(dt))
    n = dt.size
    if isinstance(expr, BrownianDrift):
        z = rng.standard_normal((n, expr.dim))
        return dt[:, None] * expr.b + np.sqrt(dt)[:, None] * (z @ _sqrt_psd(expr.Q).T)
    if isinstance(expr, IsotropicStable):
        if expr.alpha == 2.0:
            clock = dt
        else:
            half = expr.alpha / 2
            clock = dt ** (1.0 / half) * sample_positive_stable(half, rng, n)
        return np.sqrt(2.0 * clock)[:, None] * rng.standard_normal((n, expr.d))
    if isinstance(expr, StableSubordinatorMarginal):
        # the marginal's exponent is that of the lambda**alpha subordinator divided by cos(alpha pi/2)
        scale = math.cos(expr.alpha * math.pi / 2) ** (-1.0 / expr.alpha)
        return (scale * dt ** (1.0 / expr.alpha) * sample_positive_stable(expr.alpha, rng, n))[:, None]
    if isinstance(expr, FractionalPower):
        if expr.gamma == 1.0:
            return sample_increments(expr.base, dt, rng)
        clock = dt ** (1.0 / expr.gamma) * sample_positive_stable(expr.gamma, rng, n)
        return sample_increments(expr.base, clock, rng)
    if isinstance(expr, Sum):
        out = sample_increments(expr.terms[0], dt, rng)
        for term in expr.terms[1:]:
            out = out + sample_increments(term, dt, rng)
        return out
    if isinstance(expr, ProductLift):
        return np.hstack([sample_increments(c, dt, rng) for c in expr.components])
    raise UnsupportedExponentError(f"no exact sampler for {type(expr).__name__}")


def sample_marginal(expr: ExponentExpr, t: float, n: int, rng: np.random.Generator):
    """``n`` independent draws of ``X_t``."""
    return sample_increments(expr, t, rng, n)


def subordinated_samples(psi: ExponentExpr, alpha: float, t: float, n: int, rng: np.random.Generator):
    """Draws of ``X(sigma_t)`` for an independent standard ``alpha``-stable subordinator."""
    clock = t ** (1.0 / alpha) * sample_positive_stable(alpha, rng, n)
    return sample_increments(psi, clock, rng)


def additive_subordinated_samples(spec: AdditiveProcessSpec, alpha: float, t, n: int,
                                  rng: np.random.Generator):
    """Draws of ``Z(sigma^alpha_t)`` for the saturated subordinator.

    ``Z`` is additive with parameters ``s = (s_1..s_N)``; its value at the
    random time ``s = sigma^alpha_t`` is ``sum_l X^l(s_l)``.
    """
    s = simulate_saturated_subordinator(alpha, spec.N, t, rng, n)
    out = np.zeros((n, spec.D))
    for l, psi in enumerate(spec.exponents):
        out += sample_increments(psi, s[:, l], rng)
    return out


def empirical_cf(samples, xi):
    """Empirical characteristic function ``mean exp(i xi . x)`` and its jackknife SE.

    For a sample mean the jackknife standard error has the closed form
    ``sqrt(sum |y_m - ybar|**2 / (n (n-1)))``, which is what is returned.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if n < 1000:
        raise ValueError(f"need at least 1000 samples, got {n}")
    y = np.exp(1j * (x @ np.asarray(xi, dtype=float).reshape(-1)))
    mean = y.mean()
    se = math.sqrt(float(np.sum(np.abs(y - mean) ** 2)) / (n * (n - 1)))
    return complex(mean), se


@dataclass
class FieldSample:
    """Values of an additive field on the product grid ``t_axis ** N``.

    ``values`` has shape ``(len(t_axis),) * N + (d,)``; ``components[j]`` is the
    one-parameter path of the j-th summand on ``t_axis``.
    """

    spec: Optional[AdditiveProcessSpec]
    t_axis: np.ndarray
    values: np.ndarray
    mesh: float
    T: float
    seed: Optional[int] = None
    components: list = field(default_factory=list)

    @property
    def N(self) -> int:
        return self.values.ndim - 1

    @property
    def d(self) -> int:
        return self.values.shape[-1]

    @property
    def grid_shape(self) -> tuple:
        return self.values.shape[:-1]


def simulate_path(expr: ExponentExpr, n_steps: int, h: float, rng: np.random.Generator):
    """One-parameter path on ``0, h, ..., n_steps h`` as an ``(n_steps + 1, d)`` array."""
    incs = sample_increments(expr, h, rng, n_steps)
    return np.vstack([np.zeros((1, expr.dim)), np.cumsum(incs, axis=0)])


def _steps(T, h):
    n = int(round(T / h))
    if n < 1 or not math.isclose(n * h, T, rel_tol=1e-9):
        raise ValueError(f"mesh {h} does not divide T={T}")
    return n


def simulate_field(spec: AdditiveProcessSpec | ExponentExpr, T: float, h: float, seed: int,
                   shard: int = 0) -> FieldSample:
    """Additive field ``Z_t = sum_j X^j(t_j)`` on ``[0, T]^N`` with mesh ``h``.

    Component j uses the stream ``("field:<shard>", j)`` of ``seed``; distinct
    shards give independent fields.
    """
    if isinstance(spec, ExponentExpr):
        spec = AdditiveProcessSpec((spec,))
    n = _steps(T, h)
    paths = [simulate_path(psi, n, h, rng_stream(seed, f"field:{shard}", j))
             for j, psi in enumerate(spec.exponents)]
    N, d = spec.N, spec.D
    values = np.zeros((n + 1,) * N + (d,))
    for j, path in enumerate(paths):
        shape = [1] * N + [d]
        shape[j] = n + 1
        values = values + path.reshape(shape)
    t_axis = h * np.arange(n + 1)
    return FieldSample(spec, t_axis, values, h, T, seed, paths)


def simulate_copies(psis: ExponentExpr | Sequence[ExponentExpr], k: Optional[int], T: float, h: float,
                    seed: int, shard: int = 0) -> list:
    """k independent one-parameter paths, one per exponent, for multiple-time sets."""
    psis = [psis] * k if isinstance(psis, ExponentExpr) else list(psis)
    n = _steps(T, h)
    out = []
    for j, psi in enumerate(psis):
        path = simulate_path(psi, n, h, rng_stream(seed, f"copy:{shard}", j))
        out.append(FieldSample(AdditiveProcessSpec((psi,)), h * np.arange(n + 1), path, h, T, seed, [path]))
    return out

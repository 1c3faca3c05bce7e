"""Lévy exponents as a small immutable expression algebra.

Every node maps a batch of frequencies ``xi`` of shape ``(n, dim)`` to complex
values of shape ``(n,)``.  The public :func:`evaluate` also accepts a single
frequency vector and returns a Python complex.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

# Re(psi) in [-ROUNDOFF * max(1, |psi|), 0) is treated as 0.
ROUNDOFF = 1e-12


class ExponentError(ValueError):
    """Raised for malformed exponents or invalid evaluation input."""


def principal_power(z: np.ndarray, gamma: float) -> np.ndarray:
    """Principal branch of ``z**gamma`` for ``z`` in the closed right half-plane.

    Computed in polar form so that ``principal_power(conj(z))`` is exactly
    ``conj(principal_power(z))``.  Values with ``Re z`` slightly negative from
    round-off are clamped onto the imaginary axis; anything further left
    raises, since a genuine Lévy exponent never goes there.
    """
    z = np.asarray(z, dtype=complex)
    re, im = z.real.copy(), z.imag
    mod = np.hypot(re, im)
    tol = ROUNDOFF * np.maximum(1.0, mod)
    if np.any(re < -tol):
        worst = float(re.min())
        raise ExponentError(f"fractional power of a value with Re = {worst:.3e} < 0")
    re[re < 0] = 0.0
    if gamma == 1.0:
        return re + 1j * im
    arg = np.arctan2(im, re)
    r = mod ** gamma
    return r * np.cos(gamma * arg) + 1j * (r * np.sin(gamma * arg))


def _clamp_real(z: np.ndarray) -> np.ndarray:
    re = z.real
    tol = ROUNDOFF * np.maximum(1.0, np.abs(z))
    if np.any(re < -tol):
        raise ExponentError(f"exponent has Re = {float(re.min()):.3e} < 0")
    return np.where(re < 0, 0.0, re) + 1j * z.imag


class ExponentExpr:
    """Base class; subclasses define ``dim`` and ``_eval``."""

    dim: int

    def _eval(self, xi: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def __call__(self, xi):
        return evaluate(self, xi)


@dataclass(frozen=True)
class IsotropicStable(ExponentExpr):
    """``|xi|**alpha`` on R^d."""

    alpha: float
    d: int = 1

    def __post_init__(self):
        if not 0 < self.alpha <= 2:
            raise ExponentError(f"isotropic stable index must lie in (0, 2], got {self.alpha}")
        if self.d < 1:
            raise ExponentError("dimension must be positive")

    @property
    def dim(self) -> int:
        return self.d

    def _eval(self, xi):
        r = np.sqrt(np.einsum("ij,ij->i", xi, xi))
        return (r ** self.alpha).astype(complex)


@dataclass(frozen=True, eq=False)
class BrownianDrift(ExponentExpr):
    """``0.5 * xi.Q.xi - i b.xi``; the exponent of ``b t + Q**0.5 B_t``."""

    Q: np.ndarray
    b: Optional[np.ndarray] = None

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        if Q.shape[0] != Q.shape[1]:
            raise ExponentError(f"Q must be square, got shape {Q.shape}")
        if not np.allclose(Q, Q.T):
            raise ExponentError("Q must be symmetric")
        if np.linalg.eigvalsh(Q).min() < -1e-12 * max(1.0, np.abs(Q).max()):
            raise ExponentError("Q must be positive semidefinite")
        b = np.zeros(Q.shape[0]) if self.b is None else np.asarray(self.b, dtype=float).reshape(-1)
        if b.shape != (Q.shape[0],):
            raise ExponentError("drift b must have the dimension of Q")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "b", b)

    @classmethod
    def standard(cls, d: int = 1) -> "BrownianDrift":
        """Standard Brownian motion in R^d, exponent ``|xi|**2 / 2``."""
        return cls(np.eye(d))

    @property
    def dim(self) -> int:
        return self.Q.shape[0]

    @property
    def driftless(self) -> bool:
        return not np.any(self.b)

    def _eval(self, xi):
        quad = 0.5 * np.einsum("ij,jk,ik->i", xi, self.Q, xi)
        return quad - 1j * (xi @ self.b)

    def __eq__(self, other):
        return (isinstance(other, BrownianDrift) and np.array_equal(self.Q, other.Q)
                and np.array_equal(self.b, other.b))

    def __hash__(self):
        return hash((self.Q.tobytes(), self.b.tobytes()))


@dataclass(frozen=True)
class StableSubordinatorMarginal(ExponentExpr):
    """``|l|**alpha - i |l|**alpha sgn(l) tan(alpha pi / 2)`` on R.

    This is ``(-i l)**alpha / cos(alpha pi / 2)``: the characteristic exponent
    of the subordinator with Laplace exponent ``lambda**alpha`` rescaled by the
    positive constant ``1 / cos(alpha pi / 2)``.
    """

    alpha: float

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ExponentError(f"subordinator index must lie in (0, 1), got {self.alpha}")

    dim = 1

    @property
    def theta(self) -> float:
        return math.tan(self.alpha * math.pi / 2)

    def _eval(self, xi):
        lam = xi[:, 0]
        mag = np.abs(lam) ** self.alpha
        return mag - 1j * (mag * np.sign(lam) * self.theta)


@dataclass(frozen=True, eq=False)
class Custom(ExponentExpr):
    """User-supplied exponent.

    ``evaluator`` receives an ``(n, d)`` array and returns ``n`` complex values.
    Nothing about it is checked up front; evaluation fails loudly when its real
    part goes negative.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    d: int
    asserted_homogeneity: Optional[float] = None
    name: str = "custom"

    @property
    def dim(self) -> int:
        return self.d

    def _eval(self, xi):
        out = np.asarray(self.evaluator(xi), dtype=complex).reshape(-1)
        if out.shape != (xi.shape[0],):
            raise ExponentError(f"custom exponent {self.name!r} returned shape {out.shape}")
        return out


@dataclass(frozen=True)
class FractionalPower(ExponentExpr):
    """Principal power ``base**gamma`` with ``gamma`` in (0, 1]."""

    base: ExponentExpr
    gamma: float

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ExponentError(f"power must lie in (0, 1], got {self.gamma}")

    @property
    def dim(self) -> int:
        return self.base.dim

    def _eval(self, xi):
        return principal_power(self.base._eval(xi), self.gamma)


@dataclass(frozen=True)
class Sum(ExponentExpr):
    terms: tuple

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms:
            raise ExponentError("sum needs at least one term")
        dims = {t.dim for t in terms}
        if len(dims) != 1:
            raise ExponentError(f"sum terms have mixed dimensions {sorted(dims)}")
        object.__setattr__(self, "terms", terms)

    @property
    def dim(self) -> int:
        return self.terms[0].dim

    def _eval(self, xi):
        out = self.terms[0]._eval(xi)
        for t in self.terms[1:]:
            out = out + t._eval(xi)
        return out


@dataclass(frozen=True)
class ProductLift(ExponentExpr):
    """``sum_l psi_l(xi_l)`` for one-dimensional components ``psi_l``."""

    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ExponentError("product lift needs at least one component")
        if any(c.dim != 1 for c in comps):
            raise ExponentError("product lift components must be one-dimensional")
        object.__setattr__(self, "components", comps)

    @property
    def dim(self) -> int:
        return len(self.components)

    def _eval(self, xi):
        out = self.components[0]._eval(xi[:, 0:1])
        for l, c in enumerate(self.components[1:], start=1):
            out = out + c._eval(xi[:, l:l + 1])
        return out


@dataclass(frozen=True)
class DifferenceLift(ExponentExpr):
    """``base(xi_j - xi_{j-1})`` on R^{d(k-1)} with ``xi_0 = xi_k = 0``.

    The lifted frequency is packed slot-major: coordinates of ``xi_1`` first.
    ``slot`` is 1-based, as in ``1 <= slot <= k``.
    """

    base: ExponentExpr
    slot: int
    k: int

    def __post_init__(self):
        if self.k < 2:
            raise ExponentError(f"difference lift needs k >= 2, got {self.k}")
        if not 1 <= self.slot <= self.k:
            raise ExponentError(f"slot {self.slot} outside 1..{self.k}")

    @property
    def dim(self) -> int:
        return self.base.dim * (self.k - 1)

    def _eval(self, xi):
        d = self.base.dim
        j = self.slot
        if j == 1:
            arg = xi[:, 0:d]
        elif j == self.k:
            arg = -xi[:, (j - 2) * d:(j - 1) * d]
        else:
            arg = xi[:, (j - 1) * d:j * d] - xi[:, (j - 2) * d:(j - 1) * d]
        return self.base._eval(arg)


def evaluate(expr: ExponentExpr, xi) -> complex | np.ndarray:
    """Evaluate ``expr`` at one frequency (returns complex) or a batch ``(n, dim)``."""
    arr = np.asarray(xi, dtype=float)
    single = arr.ndim <= 1
    batch = arr.reshape(1, -1) if single else arr
    if batch.ndim != 2 or batch.shape[1] != expr.dim:
        raise ExponentError(f"frequency of shape {arr.shape} does not match dimension {expr.dim}")
    if not np.all(np.isfinite(batch)):
        raise ExponentError("frequency has non-finite coordinates")
    out = _clamp_real(expr._eval(batch))
    return complex(out[0]) if single else out


@dataclass(frozen=True)
class AdditiveProcessSpec:
    """``Z_t = X^1_{t_1} + ... + X^N_{t_N}`` given by the component exponents."""

    exponents: tuple

    def __post_init__(self):
        exps = tuple(self.exponents)
        if not exps:
            raise ExponentError("an additive process needs at least one component")
        dims = {e.dim for e in exps}
        if len(dims) != 1:
            raise ExponentError(f"component exponents have mixed dimensions {sorted(dims)}")
        object.__setattr__(self, "exponents", exps)

    @property
    def N(self) -> int:
        return len(self.exponents)

    @property
    def D(self) -> int:
        return self.exponents[0].dim


def subordinate(psi: ExponentExpr, alpha: float) -> ExponentExpr:
    """Exponent of ``X`` run at the clock of an independent ``alpha``-stable subordinator."""
    if not 0 < alpha < 1:
        raise ExponentError(f"subordination index must lie in (0, 1), got {alpha}")
    return FractionalPower(psi, alpha)


def level_set_family(spec: AdditiveProcessSpec, beta: float) -> AdditiveProcessSpec:
    """Spec of ``Z`` composed with the saturated ``(1 - beta/N)``-stable subordinator.

    All N components equal ``sum_j psi_j ** (1 - beta/N)``.
    """
    N = spec.N
    if not 0 < beta < N:
        raise ExponentError(f"beta must lie in (0, {N}), got {beta}")
    gamma = 1.0 - beta / N
    comp = Sum(tuple(FractionalPower(p, gamma) for p in spec.exponents))
    return AdditiveProcessSpec((comp,) * N)


def difference_lift(psi: ExponentExpr | Sequence[ExponentExpr], k: int) -> AdditiveProcessSpec:
    """k-parameter spec on R^{d(k-1)} whose zero set is the intersection-time set.

    ``psi`` is either one exponent shared by all k copies or a list of k.
    """
    if k < 2:
        raise ExponentError(f"k must be at least 2, got {k}")
    psis = [psi] * k if isinstance(psi, ExponentExpr) else list(psi)
    if len(psis) != k:
        raise ExponentError(f"expected {k} exponents, got {len(psis)}")
    if len({p.dim for p in psis}) != 1:
        raise ExponentError("all exponents must share one dimension")
    return AdditiveProcessSpec(tuple(DifferenceLift(p, j, k) for j, p in enumerate(psis, start=1)))


def saturated_subordinator_exponent(alpha: float, N: int) -> ExponentExpr:
    """Exponent of one component ``sigma^j`` of the saturated subordinator on R^N."""
    return ProductLift((StableSubordinatorMarginal(alpha),) * N)


def _common(degrees):
    degrees = list(degrees)
    if any(a is None for a in degrees):
        return None
    first = degrees[0]
    if all(math.isclose(a, first, rel_tol=1e-12) for a in degrees):
        return first
    return None


def homogeneity_degree(expr: ExponentExpr) -> Optional[float]:
    """Degree ``a`` with ``psi(c xi) = c**a psi(xi)`` for c > 0, if structurally evident."""
    if isinstance(expr, (IsotropicStable, StableSubordinatorMarginal)):
        return float(expr.alpha)
    if isinstance(expr, BrownianDrift):
        return 2.0 if expr.driftless else None
    if isinstance(expr, Custom):
        return expr.asserted_homogeneity
    if isinstance(expr, FractionalPower):
        a = homogeneity_degree(expr.base)
        return None if a is None else a * expr.gamma
    if isinstance(expr, Sum):
        return _common(homogeneity_degree(t) for t in expr.terms)
    if isinstance(expr, ProductLift):
        return _common(homogeneity_degree(c) for c in expr.components)
    if isinstance(expr, DifferenceLift):
        return homogeneity_degree(expr.base)
    return None

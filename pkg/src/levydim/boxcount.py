"""Box-counting estimates for simulated zero sets and multiple-time sets.

This is an empirical cross-check of the solver, not a Hausdorff-dimension
computation: box counting measures the upper Minkowski dimension, which agrees
with the Hausdorff dimension for the benchmark processes but not in general.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .simulation import FieldSample


@dataclass(frozen=True)
class EpsRule:
    """Tolerance ``eps(h) = c * h**(1/degree)`` for boxes of side ``h``.

    The modulus of a process with exponent of degree ``a`` over a time box of
    side ``h`` is of order ``h**(1/a)``.
    """

    degree: float
    c: float = 1.0

    def __call__(self, h: float) -> float:
        return self.c * h ** (1.0 / self.degree)

    def to_dict(self):
        return {"degree": self.degree, "c": self.c}


@dataclass
class OccupancyGrid:
    N: int
    levels: list
    counts: np.ndarray
    eps_rule: Optional[EpsRule] = None
    eps: list = field(default_factory=list)

    def rows(self):
        return [(int(l), int(c)) for l, c in zip(self.levels, self.counts)]


@dataclass
class BoxCountEstimate:
    slope: float
    r2: float
    levels_used: tuple
    intercept: float = 0.0
    too_few_boxes: bool = False
    poor_fit: bool = False
    empty: bool = False

    @property
    def flags(self) -> dict:
        return {"too_few_boxes": self.too_few_boxes, "poor_fit": self.poor_fit, "empty": self.empty}

    def to_dict(self) -> dict:
        return {"slope": self.slope, "r2": self.r2, "levels_used": list(self.levels_used),
                "intercept": self.intercept, "flags": self.flags}


def _finest_level(n_steps: int) -> int:
    L = int(round(math.log2(n_steps)))
    if 2 ** L != n_steps:
        raise ValueError(f"grid must have 2**L steps per axis, got {n_steps}")
    return L


def _resolve_levels(levels, L):
    if levels is None:
        levels = list(range(1, L - 1))
    levels = sorted(int(l) for l in levels)
    if levels and (levels[0] < 0 or levels[-1] > L):
        raise ValueError(f"mesh 2**-{L} is coarser than requested level {levels[-1]}")
    return levels


def _coarsen(arr, reduce, axes):
    """Combine neighbouring pairs of cells along every axis in ``axes``."""
    for ax in axes:
        shape = arr.shape[:ax] + (arr.shape[ax] // 2, 2) + arr.shape[ax + 1:]
        arr = reduce(arr.reshape(shape), axis=ax + 1)
    return arr


def zero_set_boxes(field_sample: FieldSample, eps_rule: EpsRule,
                   levels: Optional[Sequence[int]] = None) -> OccupancyGrid:
    """Box counts of ``{t in (0, T]^N : |Z_t| <= eps}``.

    A level-l box has side ``h = T 2**-l`` and is occupied when some grid node
    inside it has ``|Z_t| <= eps_rule(h)``.  The ``t = 0`` nodes are excluded.
    """
    N = field_sample.N
    n = field_sample.values.shape[0] - 1
    L = _finest_level(n)
    levels = _resolve_levels(levels, L)
    norm = np.linalg.norm(field_sample.values[(slice(1, None),) * N], axis=-1)
    mins = {L: norm}
    for l in range(L - 1, min(levels) - 1, -1):
        mins[l] = _coarsen(mins[l + 1], np.min, range(N))
    counts, eps = [], []
    for l in levels:
        e = eps_rule(field_sample.T * 2.0 ** -l)
        eps.append(e)
        counts.append(int(np.count_nonzero(mins[l] <= e)))
    return OccupancyGrid(N, levels, np.array(counts), eps_rule, eps)


def _count_close_tuples(los, his, eps, chunk_cells=1 << 22):
    """Number of index tuples (I_1..I_k) whose bounding boxes lie within eps.

    ``los[j]``, ``his[j]`` are ``(M, d)`` per-box minima and maxima of path j.
    The gap in each coordinate is ``max_j lo - min_j hi`` (floored at 0) and a
    tuple counts when the Euclidean norm of the gap vector is at most eps.
    """
    k = len(los)
    M, d = los[0].shape
    if k == 2 and d == 1:
        # J fails for I iff lo_J > hi_I + eps or hi_J < lo_I - eps; the two cannot both hold
        lo2 = np.sort(los[1][:, 0])
        hi2 = np.sort(his[1][:, 0])
        above = M - np.searchsorted(lo2, his[0][:, 0] + eps, side="right")
        below = np.searchsorted(hi2, los[0][:, 0] - eps, side="left")
        return int(M * M - above.sum() - below.sum())
    rest = M ** (k - 1)
    rows = max(1, chunk_cells // max(rest, 1))
    total = 0
    for start in range(0, M, rows):
        stop = min(M, start + rows)
        gap_sq = 0.0
        for c in range(d):
            lo = los[0][start:stop, c].reshape((-1,) + (1,) * (k - 1))
            hi = his[0][start:stop, c].reshape((-1,) + (1,) * (k - 1))
            for j in range(1, k):
                shape = [1] * k
                shape[j] = M
                lo = np.maximum(lo, los[j][:, c].reshape(shape))
                hi = np.minimum(hi, his[j][:, c].reshape(shape))
            gap = np.maximum(lo - hi, 0.0)
            gap_sq = gap_sq + gap * gap
        total += int(np.count_nonzero(gap_sq <= eps * eps))
    return total


def multiple_time_boxes(paths: Sequence[FieldSample], eps_rule: EpsRule,
                        levels: Optional[Sequence[int]] = None) -> OccupancyGrid:
    """Box counts of the intersection-time set of k one-parameter paths.

    A box ``I_1 x ... x I_k`` is occupied when the ranges of the paths over
    their intervals come within eps of a common point.  For real-valued paths
    and k = 2 this matches the node-wise test exactly as long as consecutive
    steps inside a box do not exceed eps; for d > 1 it works with bounding boxes
    of the ranges and so over-counts slightly.
    """
    if len(paths) < 2:
        raise ValueError("need at least two paths")
    first = paths[0]
    for p in paths[1:]:
        if p.values.shape != first.values.shape or not np.array_equal(p.t_axis, first.t_axis):
            raise ValueError("paths must share one time grid")
    if first.N != 1:
        raise ValueError("multiple-time boxes need one-parameter paths")
    k = len(paths)
    L = _finest_level(first.values.shape[0] - 1)
    levels = _resolve_levels(levels, L)
    lo = {L: [p.values[1:] for p in paths]}
    hi = {L: [p.values[1:] for p in paths]}
    for l in range(L - 1, min(levels) - 1, -1):
        lo[l] = [_coarsen(a, np.min, [0]) for a in lo[l + 1]]
        hi[l] = [_coarsen(a, np.max, [0]) for a in hi[l + 1]]
    counts, eps = [], []
    for l in levels:
        e = eps_rule(first.T * 2.0 ** -l)
        eps.append(e)
        counts.append(_count_close_tuples(lo[l], hi[l], e))
    return OccupancyGrid(k, levels, np.array(counts), eps_rule, eps)


def boxes_from_mask(mask: np.ndarray, levels: Optional[Sequence[int]] = None) -> OccupancyGrid:
    """Box counts of a set given as a boolean mask of finest-level cells ``(2**L,) * N``."""
    mask = np.asarray(mask, dtype=bool)
    N = mask.ndim
    L = _finest_level(mask.shape[0])
    levels = _resolve_levels(levels if levels is not None else range(0, L + 1), L)
    occ = {L: mask}
    for l in range(L - 1, min(levels) - 1, -1):
        occ[l] = _coarsen(occ[l + 1], np.any, range(N))
    return OccupancyGrid(N, levels, np.array([int(occ[l].sum()) for l in levels]))


def box_count_dimension(grid: OccupancyGrid, min_boxes: int = 32, min_r2: float = 0.95) -> BoxCountEstimate:
    """Least-squares slope of ``log2 count`` against level, ends discarded."""
    levels = np.asarray(grid.levels)
    counts = np.asarray(grid.counts)
    if levels.size < 4:
        raise ValueError(f"need at least 4 levels, got {levels.size}")
    if not np.any(counts > 0):
        return BoxCountEstimate(0.0, 0.0, (), too_few_boxes=True, empty=True)
    if np.count_nonzero(counts) < 4:
        raise ValueError("fewer than 4 levels with occupied boxes")
    interior = slice(1, -1)
    keep = counts[interior] > 0
    x = levels[interior][keep].astype(float)
    y = np.log2(counts[interior][keep].astype(float))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return BoxCountEstimate(
        float(slope), r2, (int(x[0]), int(x[-1])), float(intercept),
        too_few_boxes=bool(counts.max() < min_boxes),
        poor_fit=bool(r2 < min_r2),
    )

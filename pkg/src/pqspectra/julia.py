"""Backward iteration and interval pullbacks for the decimation cubic.

The Julia set of the cubic lives in [0, 2] and equals the closure of the
backward orbit of any of its points.  A level-n cover is obtained by
pulling [0, 2] back n times through the three monotone branches; its
complement in [0, 2] is the gap list.  For p = 1/2 the branches abut and
every cover is exactly [0, 2]; otherwise the total length shrinks
geometrically (the set has zero Lebesgue measure).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .laplacian import SizeCapError
from .decimation import CubicMap

DEFAULT_DEPTH_CAP = 12
DEPTH_CAP_ENV = "PQ_SPECTRA_MAX_DEPTH"

DEFAULT_ESCAPE_RADIUS = 4.0
DEFAULT_MAX_ITER = 256
DEDUP_TOL = 1e-9


def depth_cap() -> int:
    """Largest allowed pullback depth, overridable via PQ_SPECTRA_MAX_DEPTH."""
    raw = os.environ.get(DEPTH_CAP_ENV)
    return DEFAULT_DEPTH_CAP if raw is None else int(raw)


class CubicRoots(NamedTuple):
    roots: tuple
    degenerate: bool


def _branch_preimages(cubic: CubicMap, w: np.ndarray) -> np.ndarray:
    """Roots of R(z) = w for each w, shape (3, len(w)), branch-ordered.

    Depressed form: substituting z = t + 1 gives t^3 + P t + Q with
    P = pq - 1 and Q = pq (1 - w).  For w in [0, 2] the discriminant is
    nonpositive, so the trigonometric three-real-root formula applies;
    one Newton step against R polishes each root.  Row 0 is the lowest
    (increasing) branch, row 1 the middle (decreasing), row 2 the top.
    """
    p = float(cubic.params.p)
    q = float(cubic.params.q)
    pq = p * q
    w = np.asarray(w, dtype=float)
    big_p = pq - 1.0
    big_q = pq * (1.0 - w)
    amp = 2.0 * math.sqrt(-big_p / 3.0)
    arg = np.clip(3.0 * big_q / (amp * big_p), -1.0, 1.0)
    phi = np.arccos(arg)
    # cos(phi/3 - 2*pi*k/3): k = 2 smallest root, k = 0 largest.
    roots = np.empty((3, w.size))
    roots[0] = amp * np.cos(phi / 3.0 - 4.0 * math.pi / 3.0) + 1.0
    roots[1] = amp * np.cos(phi / 3.0 - 2.0 * math.pi / 3.0) + 1.0
    roots[2] = amp * np.cos(phi / 3.0) + 1.0
    for _ in range(2):  # Newton polish; skipped near critical points
        val = cubic.value(roots) - w[None, :]
        der = cubic.derivative(roots)
        safe = np.abs(der) > 1e-8
        roots = np.where(safe, roots - val / np.where(safe, der, 1.0), roots)
    # Exact closed forms where w hits the endpoint seeds.
    lo, hi = min(p, q), max(p, q)
    at0 = w == 0.0
    if at0.any():
        roots[0, at0], roots[1, at0], roots[2, at0] = 0.0, 1.0 + lo, 1.0 + hi
    at2 = w == 2.0
    if at2.any():
        roots[0, at2], roots[1, at2], roots[2, at2] = lo, hi, 2.0
    return roots


def cubic_preimages(cubic: CubicMap, w: float,
                    dedup_tol: float = DEDUP_TOL) -> CubicRoots:
    """All real solutions of R(z) = w, sorted ascending.

    Flags the degenerate case where two branches collide (a double root,
    e.g. the p = 1/2 endpoints).
    """
    roots = np.sort(_branch_preimages(cubic, np.array([float(w)]))[:, 0])
    degenerate = bool(np.any(np.diff(roots) < dedup_tol))
    return CubicRoots(roots=tuple(float(r) for r in roots), degenerate=degenerate)


@dataclass(frozen=True)
class BackwardOrbit:
    """Sorted, deduplicated solutions of the n-fold equation R^n(z) = seed."""

    seed: float
    level: int
    points: np.ndarray
    dedup_tol: float


def _dedup_sorted(points: np.ndarray, tol: float) -> np.ndarray:
    if points.size <= 1:
        return points
    keep = np.empty(points.size, dtype=bool)
    keep[0] = True
    keep[1:] = np.diff(points) > tol
    return points[keep]


def backward_orbit(cubic: CubicMap, seed: float, n: int,
                   dedup_tol: float = DEDUP_TOL) -> BackwardOrbit:
    """Deduplicated n-fold preimages of `seed` inside [0, 2]."""
    if not 0.0 <= seed <= 2.0:
        raise ValueError("seed must lie in [0, 2]")
    if n < 0:
        raise ValueError("depth must be nonnegative")
    if n > depth_cap():
        raise SizeCapError(f"depth {n} exceeds cap {depth_cap()} "
                           f"(override with {DEPTH_CAP_ENV})")
    points = np.array([float(seed)])
    for _ in range(n):
        points = np.sort(_branch_preimages(cubic, points).ravel())
        points = _dedup_sorted(np.clip(points, 0.0, 2.0), dedup_tol)
    return BackwardOrbit(seed=float(seed), level=n, points=points,
                         dedup_tol=dedup_tol)


@dataclass(frozen=True)
class JuliaCover:
    """Level-n union of closed intervals covering the Julia set.

    intervals has shape (k, 2) with disjoint sorted rows inside [0, 2];
    gaps is the open complement within [0, 2], shape (k-1, 2).
    """

    level: int
    intervals: np.ndarray
    gaps: np.ndarray
    total_length: float


def julia_cover(cubic: CubicMap, n: int, merge_tol: float = 1e-12) -> JuliaCover:
    """Pull [0, 2] back n times through the three branches of the cubic.

    Endpoints are backward iterates of {0, 2}; abutting intervals (only
    the p = 1/2 degeneration) are merged, so the interval count is 3^n
    for p != 1/2 and 1 for p = 1/2.
    """
    if n < 0:
        raise ValueError("level must be nonnegative")
    if n > depth_cap():
        raise SizeCapError(f"level {n} exceeds cap {depth_cap()} "
                           f"(override with {DEPTH_CAP_ENV})")
    lows = np.array([0.0])
    highs = np.array([2.0])
    for _ in range(n):
        lo_pre = _branch_preimages(cubic, lows)
        hi_pre = _branch_preimages(cubic, highs)
        # Increasing branches 0 and 2 keep orientation; branch 1 reverses.
        new_lows = np.concatenate([lo_pre[0], hi_pre[1], lo_pre[2]])
        new_highs = np.concatenate([hi_pre[0], lo_pre[1], hi_pre[2]])
        order = np.argsort(new_lows, kind="stable")
        lows, highs = new_lows[order], new_highs[order]
    lows = np.clip(lows, 0.0, 2.0)
    highs = np.clip(highs, 0.0, 2.0)
    merged_lo, merged_hi = [lows[0]], [highs[0]]
    for a, b in zip(lows[1:], highs[1:]):
        if a - merged_hi[-1] <= merge_tol:
            merged_hi[-1] = max(merged_hi[-1], b)
        else:
            merged_lo.append(a)
            merged_hi.append(b)
    intervals = np.column_stack([merged_lo, merged_hi])
    gaps = np.column_stack([merged_hi[:-1], merged_lo[1:]])
    total = float(np.sum(intervals[:, 1] - intervals[:, 0]))
    return JuliaCover(level=n, intervals=intervals, gaps=gaps, total_length=total)


class PointClass(NamedTuple):
    label: str              # "julia-candidate" | "fatou-escaping"
    escape_time: int | None


def classify_point(cubic: CubicMap, z: float,
                   max_iter: int = DEFAULT_MAX_ITER,
                   escape_radius: float = DEFAULT_ESCAPE_RADIUS) -> PointClass:
    """Forward-iterate z; escape beyond `escape_radius` marks the basin of infinity.

    The fixed points 0, 1, 2 are recognized exactly (rounding would
    otherwise let the repelling multiplier eject them).  Escape is a
    certificate; "julia-candidate" only means the orbit stayed bounded
    for max_iter steps.
    """
    value = float(z)
    if value in (0.0, 1.0, 2.0):
        return PointClass(label="julia-candidate", escape_time=None)
    for k in range(max_iter):
        if abs(value) > escape_radius:
            return PointClass(label="fatou-escaping", escape_time=k)
        value = float(cubic.value(value))
    return PointClass(label="julia-candidate", escape_time=None)


class FixedPoint(NamedTuple):
    point: float
    multiplier: float
    kind: str


def fixed_point_data(cubic: CubicMap) -> list[FixedPoint]:
    """The fixed points 0, 1, 2 (all repelling) plus superattracting infinity."""
    finite = [FixedPoint(point=float(z), multiplier=float(cubic.derivative(z)),
                         kind="repelling") for z in (0.0, 1.0, 2.0)]
    finite.append(FixedPoint(point=math.inf, multiplier=0.0,
                             kind="superattracting"))
    return finite

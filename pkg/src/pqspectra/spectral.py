"""Eigenvalues of symmetrized truncations and spectral-dimension reports.

The eigensolver is a Sturm-sequence bisection: the LDL^T pivot signs of
T - x count eigenvalues below x, so each eigenvalue is certified inside
a shrinking bracket.  That determinism (and the exact counting inside
intervals) is what the gap and closure checks rely on; dense LAPACK
routines serve only as independent oracles in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .laplacian import (PqParams, TridiagonalOperator, build_truncation,
                        invariant_measure, symmetrize, REFLECTING)
from .decimation import decimation_map
from .julia import backward_orbit, julia_cover

EIG_TOL = 1e-12
KERNEL_FLOOR = 1e-9
_PIVMIN = 1e-30


def _sym_arrays(op: TridiagonalOperator):
    n = op.effective_size
    diag = np.asarray(op.diag[:n], dtype=float)
    sup = np.asarray(op.sup[: n - 1], dtype=float)
    sub = np.asarray(op.sub[1:n], dtype=float)
    if np.max(np.abs(sup - sub), initial=0.0) > 1e-12:
        raise ValueError("operator is not symmetric; run symmetrize first")
    return diag, sup


def _count_below(diag: np.ndarray, off_sq: np.ndarray,
                 shifts: np.ndarray) -> np.ndarray:
    """Number of eigenvalues strictly below each shift (Sturm pivot count)."""
    pivot = diag[0] - shifts
    pivot = np.where(np.abs(pivot) < _PIVMIN, -_PIVMIN, pivot)
    count = (pivot < 0).astype(np.int64)
    for i in range(1, len(diag)):
        pivot = diag[i] - shifts - off_sq[i - 1] / pivot
        pivot = np.where(np.abs(pivot) < _PIVMIN, -_PIVMIN, pivot)
        count += pivot < 0
    return count


def _bisect_indices(diag: np.ndarray, off: np.ndarray, indices: np.ndarray,
                    tol: float) -> np.ndarray:
    off_sq = off * off
    radius = np.zeros(len(diag))
    radius[:-1] += np.abs(off)
    radius[1:] += np.abs(off)
    lo = float(np.min(diag - radius)) - tol
    hi = float(np.max(diag + radius)) + tol
    lows = np.full(len(indices), lo)
    highs = np.full(len(indices), hi)
    steps = max(1, int(math.ceil(math.log2((hi - lo) / tol))) + 2)
    want = indices + 1
    for _ in range(steps):
        mids = 0.5 * (lows + highs)
        below = _count_below(diag, off_sq, mids)
        go_down = below >= want
        highs = np.where(go_down, mids, highs)
        lows = np.where(go_down, lows, mids)
    return 0.5 * (lows + highs)


def tridiag_eigenvalues(op: TridiagonalOperator,
                        tol: float = EIG_TOL) -> np.ndarray:
    """All eigenvalues of a symmetric tridiagonal operator, sorted ascending.

    Certified by Sturm counting and bisected to absolute tolerance
    `tol`; output is deterministic.  Rejects non-symmetric input.
    """
    diag, off = _sym_arrays(op)
    if len(diag) == 1:
        return diag.copy()
    return _bisect_indices(diag, off, np.arange(len(diag)), tol)


def eigenvalues_by_index(op: TridiagonalOperator, indices,
                         tol: float = EIG_TOL) -> np.ndarray:
    """Selected order statistics of the spectrum (0 = smallest)."""
    diag, off = _sym_arrays(op)
    indices = np.asarray(indices, dtype=np.int64)
    if len(diag) == 1:
        return diag[indices.clip(0, 0)].astype(float)
    return _bisect_indices(diag, off, indices, tol)


def count_eigenvalues_in(op: TridiagonalOperator, lo: float, hi: float) -> int:
    """Certified number of eigenvalues in the half-open interval [lo, hi)."""
    diag, off = _sym_arrays(op)
    off_sq = off * off
    counts = _count_below(diag, off_sq, np.array([lo, hi]))
    return int(counts[1] - counts[0])


def hausdorff_distance(a, b) -> float:
    """Hausdorff distance between two finite point sets on the line."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("point sets must be nonempty")

    def directed(src, dst):
        idx = np.searchsorted(dst, src)
        left = dst[np.clip(idx - 1, 0, dst.size - 1)]
        right = dst[np.clip(idx, 0, dst.size - 1)]
        return float(np.max(np.minimum(np.abs(src - left), np.abs(src - right))))

    return max(directed(a, b), directed(b, a))


def _reflecting_spectrum(params: PqParams, level: int,
                         tol: float = EIG_TOL) -> np.ndarray:
    fl = params.as_float()
    op = build_truncation(fl, level, REFLECTING)
    pi = invariant_measure(fl, op.size - 1) if op.size > 1 else None
    sym = symmetrize(op, pi) if pi is not None else op
    return tridiag_eigenvalues(sym, tol)


@dataclass(frozen=True)
class SpectrumApproximation:
    """Level-m truncation spectrum with distances to Julia-set approximants."""

    level: int
    eigenvalues: np.ndarray
    hausdorff_to_cover: float
    hausdorff_to_orbit: float


def spectrum_approximation(params: PqParams, level: int) -> SpectrumApproximation:
    """Solve the reflecting level-m truncation and compare with pullback sets.

    The comparison clouds are the level-m cover endpoints and the
    depth-m backward orbit of {0, 2} (two routes to the same limit set).
    """
    eigs = _reflecting_spectrum(params, level)
    cubic = decimation_map(params.as_float())
    cover = julia_cover(cubic, level)
    cover_cloud = cover.intervals.ravel()
    orbit_cloud = np.concatenate([
        backward_orbit(cubic, 0.0, level).points,
        backward_orbit(cubic, 2.0, level).points,
    ])
    return SpectrumApproximation(
        level=level,
        eigenvalues=eigs,
        hausdorff_to_cover=hausdorff_distance(eigs, cover_cloud),
        hausdorff_to_orbit=hausdorff_distance(eigs, orbit_cloud),
    )


@dataclass(frozen=True)
class ClosureReport:
    """How fine eigenvalues map through R onto the coarse spectrum.

    For every non-exceptional eigenvalue z of the level-m truncation,
    `image_distances` holds dist(R(z), spec(level m-1)); `preimage_counts`
    lists, per coarse eigenvalue, how many fine eigenvalues map onto it.
    """

    level: int
    fine: np.ndarray
    coarse: np.ndarray
    images: np.ndarray
    image_distances: np.ndarray
    excluded_exceptional: int
    max_distance: float
    preimage_counts: list


def decimation_closure_check(params: PqParams, level: int,
                             exceptional_tol: float = 1e-9) -> ClosureReport:
    """Verify spec(level m) maps into spec(level m-1) under the cubic."""
    if level < 1:
        raise ValueError("level must be at least 1")
    fl = params.as_float()
    fine = _reflecting_spectrum(fl, level)
    coarse = _reflecting_spectrum(fl, level - 1)
    cubic = decimation_map(fl)
    keep = np.array([min(abs(z - fl.exceptional[0]), abs(z - fl.exceptional[1]))
                     > exceptional_tol for z in fine])
    kept = fine[keep]
    images = np.array([float(cubic.value(z)) for z in kept])
    dists = np.array([float(np.min(np.abs(coarse - w))) for w in images])
    nearest = np.array([int(np.argmin(np.abs(coarse - w))) for w in images])
    counts = [(float(coarse[j]), int(np.sum(nearest == j)))
              for j in range(len(coarse))]
    return ClosureReport(level=level, fine=fine, coarse=coarse, images=images,
                         image_distances=dists,
                         excluded_exceptional=int(np.sum(~keep)),
                         max_distance=float(dists.max()),
                         preimage_counts=counts)


@dataclass(frozen=True)
class Lambda1Row:
    level: int
    lambda1: float
    ratio_to_next: float | None
    preimage_residual: float | None


def _lambda1(params: PqParams, level: int) -> float:
    """Smallest eigenvalue above the kernel floor of the reflecting truncation."""
    fl = params.as_float()
    op = build_truncation(fl, level, REFLECTING)
    pi = invariant_measure(fl, op.size - 1)
    sym = symmetrize(op, pi)
    low = eigenvalues_by_index(sym, [0, 1, 2])
    for v in low:
        if v > KERNEL_FLOOR:
            return float(v)
    raise RuntimeError("no eigenvalue above the kernel floor")


def lambda1_scaling(params: PqParams, levels: int) -> list[Lambda1Row]:
    """Smallest nonzero eigenvalue per level and consecutive decay ratios.

    Ratios approach R'(0) = 1 + 2/pq; each lambda1 at level m+1 is the
    lowest-branch preimage of the one at level m.
    """
    if levels < 3:
        raise ValueError("need at least 3 levels")
    cubic = decimation_map(params.as_float())
    values = [_lambda1(params, m) for m in range(1, levels + 1)]
    rows = []
    for i, m in enumerate(range(1, levels + 1)):
        ratio = values[i] / values[i + 1] if i + 1 < len(values) else None
        resid = (abs(float(cubic.value(values[i + 1])) - values[i])
                 if i + 1 < len(values) else None)
        rows.append(Lambda1Row(level=m, lambda1=values[i],
                               ratio_to_next=ratio, preimage_residual=resid))
    return rows


@dataclass(frozen=True)
class DimensionReport:
    """Three routes to the spectral dimension and their disagreements.

    ds_formula = log 9 / log(1 + 2/pq); ds_volume_balance solves
    sum_j (r_j m_j)^(d/2) = 1 for the resistance/measure weights of the
    three-piece decomposition; ds_empirical converts the decay rate of
    the smallest nonzero eigenvalue across levels.
    """

    ds_formula: float
    ds_volume_balance: float
    ds_empirical: float | None
    formula_vs_balance: float
    empirical_vs_formula: float | None
    fit_levels: list
    lambda1_values: list


def _volume_balance_dimension(params: PqParams, tol: float = 1e-14) -> float:
    p, q = float(params.p), float(params.q)
    r = (p / (1 + p), q / (1 + p), p / (1 + p))
    m = (q / (1 + q), p / (1 + q), q / (1 + q))
    prods = [ri * mi for ri, mi in zip(r, m)]

    def balance(d):
        return sum(pr ** (d / 2.0) for pr in prods) - 1.0

    lo, hi = 0.0, 4.0
    while balance(hi) > 0:
        hi *= 2
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if balance(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def spectral_dimension(params: PqParams, max_level: int = 6) -> DimensionReport:
    """Closed-form, scaling-equation, and eigenvalue-fit spectral dimensions."""
    if max_level < 2:
        raise ValueError("max_level must be at least 2")
    fl = params.as_float()
    pq = float(fl.pq)
    ds_formula = math.log(9.0) / math.log(1.0 + 2.0 / pq)
    ds_balance = _volume_balance_dimension(fl)
    fit_levels = list(range(3, max_level + 1))
    if len(fit_levels) < 2:
        fit_levels = list(range(2, max_level + 1))
    ds_empirical = None
    lam = []
    if len(fit_levels) >= 2:
        lam = [_lambda1(fl, m) for m in fit_levels]
        slope = np.polyfit(np.array(fit_levels, dtype=float),
                           np.log(np.array(lam)), 1)[0]
        ds_empirical = -2.0 * math.log(3.0) / slope
    return DimensionReport(
        ds_formula=ds_formula,
        ds_volume_balance=ds_balance,
        ds_empirical=ds_empirical,
        formula_vs_balance=abs(ds_formula - ds_balance),
        empirical_vs_formula=(None if ds_empirical is None
                              else abs(ds_empirical - ds_formula)),
        fit_levels=fit_levels,
        lambda1_values=lam,
    )


@dataclass(frozen=True)
class GapRow:
    left: float
    right: float
    length: float


def gap_report(params: PqParams, level: int) -> list[GapRow]:
    """Cover gaps at the given level, sorted by length descending."""
    if level < 1:
        raise ValueError("level must be at least 1")
    cubic = decimation_map(params.as_float())
    cover = julia_cover(cubic, level)
    rows = [GapRow(left=float(a), right=float(b), length=float(b - a))
            for a, b in cover.gaps]
    rows.sort(key=lambda g: (-g.length, g.left))
    return rows

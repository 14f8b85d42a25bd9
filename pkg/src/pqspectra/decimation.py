"""Spectral decimation for the pq Laplacian.

The cubic renormalization map R(z) = z(z^2 - 3z + (2+pq))/pq relates the
spectrum of a truncation to the spectrum of the three-fold coarser one.
This module evaluates R, its derivative, and the scalar Schur weight
pq/((1-z)^2 - p^2); builds the block partition of a truncation into
sites on 3Z and their complement; and verifies, entry by entry, that the
Schur complement of the fine operator equals weight * (coarse - R(z)).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .laplacian import PqParams, classify_site, row_coefficients

__all__ = [
    "ExceptionalPointError", "CubicMap", "decimation_map", "schur_weight",
    "exceptional_set", "SchurBlocks", "schur_blocks",
    "DecimationResidual", "verify_decimation_identity", "preimage_intervals",
]


class ExceptionalPointError(ValueError):
    """Spectral parameter sits on (or too close to) the exceptional set."""


@dataclass(frozen=True)
class CubicMap:
    """The decimation cubic R and its derivative, in monomial form.

    R(z) = c3 z^3 + c2 z^2 + c1 z with c3 = 1/pq, c2 = -3/pq,
    c1 = (2+pq)/pq.  Fixed points are 0, 1, 2; the poles of the Schur
    weight coincide with the exceptional pair (1+p, 1-p).
    """

    params: PqParams
    c3: float | Fraction
    c2: float | Fraction
    c1: float | Fraction

    def value(self, z):
        """R(z) by Horner evaluation; exact for Fraction inputs on exact maps."""
        return ((self.c3 * z + self.c2) * z + self.c1) * z

    def derivative(self, z):
        """R'(z) = (3z^2 - 6z + 2 + pq)/pq."""
        return (3 * self.c3 * z + 2 * self.c2) * z + self.c1

    def iterate(self, z, n: int):
        """n-fold forward composition R(R(...R(z)))."""
        for _ in range(n):
            z = self.value(z)
        return z

    @property
    def poles(self) -> tuple:
        return self.params.exceptional


def decimation_map(params: PqParams) -> CubicMap:
    one = Fraction(1) if params.exact else 1.0
    inv = one / params.pq
    return CubicMap(params=params, c3=inv, c2=-3 * inv, c1=(2 + params.pq) * inv)


def schur_weight(params: PqParams, z):
    """Scalar weight pq / ((1-z)^2 - p^2) tying Schur complement to coarse operator.

    Never zero; undefined exactly at the exceptional pair, where a pole
    error is raised.
    """
    one = Fraction(1) if params.exact else 1.0
    denom = (one - z) ** 2 - params.p ** 2
    if denom == 0:
        raise ExceptionalPointError(f"z = {z} is a pole of the Schur weight")
    return params.pq / denom


def exceptional_set(params: PqParams) -> tuple:
    """The pair (1+p, 1-p): the spectrum of the eliminated 2x2 blocks."""
    return params.exceptional


def _min_exceptional_distance(params: PqParams, z) -> float:
    hi, lo = params.exceptional
    return min(abs(float(z) - float(hi)), abs(float(z) - float(lo)))


@dataclass(frozen=True)
class SchurBlocks:
    """Block partition of a level-m truncation over 3Z vs. its complement.

    Rows follow the half-line coefficients at every site (no boundary
    row), truncated to [0, 3^m].  `multiples` / `nonmultiples` give the
    fine site index carried by each block row/column.
    """

    level: int
    multiples: np.ndarray
    nonmultiples: np.ndarray
    i0_diag: np.ndarray
    x_block: np.ndarray     # nonmultiples x multiples
    xbar_block: np.ndarray  # multiples x nonmultiples
    q_block: np.ndarray     # nonmultiples x nonmultiples


def schur_blocks(params: PqParams, level: int) -> SchurBlocks:
    """Assemble I0, X, Xbar, Q for the truncation onto [0, 3^level]."""
    if level < 1:
        raise ValueError("level must be at least 1")
    n = 3 ** level
    sites = np.arange(n + 1)
    multiples = sites[sites % 3 == 0]
    nonmultiples = sites[sites % 3 != 0]
    col_of = {int(s): i for i, s in enumerate(multiples)}
    row_of = {int(s): i for i, s in enumerate(nonmultiples)}

    i0_diag = np.ones(len(multiples))
    x_block = np.zeros((len(nonmultiples), len(multiples)))
    xbar_block = np.zeros((len(multiples), len(nonmultiples)))
    q_block = np.zeros((len(nonmultiples), len(nonmultiples)))

    for x in range(n + 1):
        sub, _, sup = row_coefficients(params, x)
        entries = []
        if x >= 1:
            entries.append((x - 1, float(sub)))
        if x + 1 <= n:
            entries.append((x + 1, float(sup)))
        if x % 3 == 0:
            for y, c in entries:
                xbar_block[col_of[x], row_of[y]] = c
        else:
            for y, c in entries:
                if y % 3 == 0:
                    x_block[row_of[x], col_of[y]] = c
                else:
                    q_block[row_of[x], row_of[y]] = c
    q_block[np.arange(len(nonmultiples)), np.arange(len(nonmultiples))] = 1.0
    return SchurBlocks(level=level, multiples=multiples,
                       nonmultiples=nonmultiples, i0_diag=i0_diag,
                       x_block=x_block, xbar_block=xbar_block, q_block=q_block)


def _q_inverse(params: PqParams, z: float, pairs: int) -> np.ndarray:
    """Block-diagonal inverse of Q - z from the closed-form 2x2 inverse."""
    p = float(params.p)
    denom = (1.0 - z) ** 2 - p ** 2
    block = np.array([[1.0 - z, p], [p, 1.0 - z]]) / denom
    out = np.zeros((2 * pairs, 2 * pairs))
    for k in range(pairs):
        out[2 * k: 2 * k + 2, 2 * k: 2 * k + 2] = block
    return out


def _coarse_dense(params: PqParams, level: int) -> np.ndarray:
    """Half-line rows restricted to [0, 3^level], no boundary row."""
    n = 3 ** level
    mat = np.zeros((n + 1, n + 1))
    for x in range(n + 1):
        sub, diag, sup = row_coefficients(params, x)
        mat[x, x] = float(diag)
        if x >= 1:
            mat[x, x - 1] = float(sub)
        if x + 1 <= n:
            mat[x, x + 1] = float(sup)
    return mat


@dataclass(frozen=True)
class DecimationResidual:
    """Entrywise deviation of the Schur complement from weight*(coarse - R(z)).

    Interior rows are the identity's exact domain on a truncation; the
    last coarse row sees the cut stencil and is reported separately.
    """

    level: int
    z: float
    r_of_z: float
    weight: float
    interior_max: float
    boundary_max: float


def verify_decimation_identity(params: PqParams, level: int, z: float,
                               guard: float = 1e-9) -> DecimationResidual:
    """Check S(z) = weight(z) * (coarse - R(z)) on the level-`level` truncation.

    S(z) = (I0 - z) - Xbar (Q - z)^(-1) X with the closed-form block
    inverse; the coarse operator is the level-(level-1) truncation under
    index tripling.  Rejects z within `guard` of the exceptional pair.
    """
    if level < 1:
        raise ValueError("level must be at least 1")
    z = float(z)
    if _min_exceptional_distance(params, z) <= guard:
        raise ExceptionalPointError(
            f"z = {z} is within {guard} of the exceptional set")
    blocks = schur_blocks(params, level)
    pairs = len(blocks.nonmultiples) // 2
    qinv = _q_inverse(params, z, pairs)
    schur = (np.diag(blocks.i0_diag - z)
             - blocks.xbar_block @ qinv @ blocks.x_block)
    cubic = decimation_map(params.as_float())
    weight = float(schur_weight(params.as_float(), z))
    r_of_z = float(cubic.value(z))
    coarse = _coarse_dense(params, level - 1)
    target = weight * (coarse - r_of_z * np.eye(coarse.shape[0]))
    resid = np.abs(schur - target)
    return DecimationResidual(level=level, z=z, r_of_z=r_of_z, weight=weight,
                              interior_max=float(resid[:-1, :].max()),
                              boundary_max=float(resid[-1, :].max()))


def preimage_intervals(params: PqParams):
    """The three closed intervals forming the R-preimage of [0, 2].

    [0, min(p,q)], [max(p,q), 1 + min(p,q)], [1 + max(p,q), 2]; for
    p = 1/2 the three abut and the union is all of [0, 2].
    """
    one = Fraction(1) if params.exact else 1.0
    lo, hi = min(params.p, params.q), max(params.p, params.q)
    zero = one - one
    return ((zero, lo), (hi, one + lo), (one + hi, one + one))

"""Self-similar pq Laplacian on the integer half-line.

The operator acts on functions over sites 0, 1, 2, ... with row weights
(q, p) or (p, q) chosen by the ternary residue of x / 3^m(x), where m(x)
is the number of times 3 divides x.  This module assembles finite
truncations, the symmetrizing birth-death measure, and the similarity
transform that turns a truncation into a symmetric tridiagonal matrix.

All constructors accept either a float p or a Fraction p; with a Fraction
the rows and the measure are computed in exact rational arithmetic.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational

import numpy as np

DEFAULT_LEVEL_CAP = 10
LEVEL_CAP_ENV = "PQ_SPECTRA_MAX_LEVEL"

REFLECTING = "reflecting"
DIRICHLET = "dirichlet"


class SizeCapError(ValueError):
    """Requested truncation exceeds the configured size cap."""


class DetailedBalanceError(ValueError):
    """Supplied measure is not reversible for the operator."""


def level_cap() -> int:
    """Largest allowed truncation level, overridable via PQ_SPECTRA_MAX_LEVEL."""
    raw = os.environ.get(LEVEL_CAP_ENV)
    return DEFAULT_LEVEL_CAP if raw is None else int(raw)


@dataclass(frozen=True)
class PqParams:
    """Transition weight p with its derived companions q = 1-p and pq.

    `exceptional` holds the two spectral parameters (1+p, 1-p) at which
    decimation degenerates.  `exact` is True when p is a Rational, in
    which case every derived quantity is exact.
    """

    p: float | Fraction
    q: float | Fraction = field(init=False)
    pq: float | Fraction = field(init=False)
    exceptional: tuple = field(init=False)

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise ValueError(f"p must lie in (0,1), got {self.p}")
        one = Fraction(1) if self.exact else 1.0
        object.__setattr__(self, "q", one - self.p)
        object.__setattr__(self, "pq", self.p * self.q)
        object.__setattr__(self, "exceptional", (one + self.p, one - self.p))

    @property
    def exact(self) -> bool:
        return isinstance(self.p, Rational) and not isinstance(self.p, float)

    def as_float(self) -> "PqParams":
        return self if isinstance(self.p, float) else PqParams(float(self.p))


@dataclass(frozen=True)
class SiteClass:
    """Ternary classification of a site: depth m(x) and residue of x/3^m(x).

    Residue 0 is reserved for the boundary site x = 0; every x >= 1 has
    residue 1 or 2.
    """

    site: int
    depth: int
    residue: int


def classify_site(x: int) -> SiteClass:
    """Depth and ternary residue deciding which Laplacian row applies at x."""
    if x < 0:
        raise ValueError("site index must be nonnegative")
    if x == 0:
        return SiteClass(site=0, depth=0, residue=0)
    depth, y = 0, x
    while y % 3 == 0:
        y //= 3
        depth += 1
    return SiteClass(site=x, depth=depth, residue=y % 3)


def row_coefficients(params: PqParams, x: int):
    """Row (sub, diag, sup) of the half-line operator at site x.

    Residue-1 sites couple (-q, 1, -p), residue-2 sites (-p, 1, -q); the
    origin row is (None, 1, -1).
    """
    one = Fraction(1) if params.exact else 1.0
    if x == 0:
        return (None, one, -one)
    if classify_site(x).residue == 1:
        return (-params.q, one, -params.p)
    return (-params.p, one, -params.q)


@dataclass(frozen=True)
class TridiagonalOperator:
    """Tridiagonal truncation onto sites 0..N with a right-boundary tag.

    sub[x] couples x -> x-1 (sub[0] is a zero sentinel), sup[x] couples
    x -> x+1 (sup[N] is a zero sentinel).  Under the dirichlet tag the
    last row is the identity and site N is dropped from spectral
    computations; `effective_size` reflects that.
    """

    size: int
    diag: np.ndarray
    sub: np.ndarray
    sup: np.ndarray
    boundary_right: str = REFLECTING

    @property
    def effective_size(self) -> int:
        return self.size - 1 if self.boundary_right == DIRICHLET else self.size

    def dense(self) -> np.ndarray:
        """Full (size x size) matrix, float dtype."""
        n = self.size
        mat = np.zeros((n, n))
        mat[np.arange(n), np.arange(n)] = [float(v) for v in self.diag]
        mat[np.arange(1, n), np.arange(n - 1)] = [float(v) for v in self.sub[1:]]
        mat[np.arange(n - 1), np.arange(1, n)] = [float(v) for v in self.sup[:-1]]
        return mat


def _coefficient_arrays(params: PqParams, size: int):
    exact = params.exact
    zero = Fraction(0) if exact else 0.0
    diag = [zero] * size
    sub = [zero] * size
    sup = [zero] * size
    for x in range(size):
        s, d, u = row_coefficients(params, x)
        diag[x] = d
        if x > 0:
            sub[x] = s
        sup[x] = u
    if exact:
        return (np.array(diag, dtype=object), np.array(sub, dtype=object),
                np.array(sup, dtype=object))
    return np.array(diag), np.array(sub), np.array(sup)


def build_truncation(params: PqParams, level: int,
                     boundary: str = REFLECTING) -> TridiagonalOperator:
    """Truncation onto [0, 3^level] with the requested boundary row.

    Reflecting installs the mirror row f(N)-f(N-1); dirichlet installs an
    identity row at N (site N excluded from the spectrum).
    """
    if level < 0:
        raise ValueError("level must be nonnegative")
    if level > level_cap():
        raise SizeCapError(f"level {level} exceeds cap {level_cap()} "
                           f"(override with {LEVEL_CAP_ENV})")
    if boundary not in (REFLECTING, DIRICHLET):
        raise ValueError(f"unknown boundary tag {boundary!r}")
    n_sites = 3 ** level + 1
    diag, sub, sup = _coefficient_arrays(params, n_sites)
    one = Fraction(1) if params.exact else 1.0
    last = n_sites - 1
    diag[last] = one
    sup[last] = one - one
    sub[last] = -one if boundary == REFLECTING else one - one
    return TridiagonalOperator(size=n_sites, diag=diag, sub=sub, sup=sup,
                               boundary_right=boundary)


def apply_operator(op: TridiagonalOperator, f) -> np.ndarray:
    """Matrix-vector product op @ f."""
    f = np.asarray(f)
    if f.shape != (op.size,):
        raise ValueError(f"vector length {f.shape} does not match size {op.size}")
    out = op.diag * f
    out[1:] = out[1:] + op.sub[1:] * f[:-1]
    out[:-1] = out[:-1] + op.sup[:-1] * f[1:]
    return out


@dataclass(frozen=True)
class InvariantMeasure:
    """Symmetrizing weights pi(0..N), normalized to pi(0) = 1.

    Built edge by edge from detailed balance; satisfies pi(x) = pi(3x)
    on the half-line rows.
    """

    values: np.ndarray

    @property
    def extent(self) -> int:
        return len(self.values) - 1

    def as_floats(self) -> np.ndarray:
        if self.values.dtype == object:
            return np.array([float(v) for v in self.values])
        return self.values


def invariant_measure(params: PqParams, extent: int) -> InvariantMeasure:
    """Reversible measure for the half-line rows up to site `extent`.

    One pass of detailed balance: pi(x+1) = pi(x) P(x,x+1) / P(x+1,x),
    with the transition weights read off the row coefficients.  Exact
    when params is rational.
    """
    if extent < 1:
        raise ValueError("extent must be at least 1")
    one = Fraction(1) if params.exact else 1.0
    values = [one]
    for x in range(extent):
        fwd = -row_coefficients(params, x)[2]       # P(x -> x+1)
        back = -row_coefficients(params, x + 1)[0]  # P(x+1 -> x)
        values.append(values[-1] * fwd / back)
    arr = np.array(values, dtype=object) if params.exact else np.array(values)
    return InvariantMeasure(values=arr)


def detailed_balance_residuals(op: TridiagonalOperator,
                               pi: InvariantMeasure) -> np.ndarray:
    """Edgewise residual pi(x) P(x,x+1) - pi(x+1) P(x+1,x) against op's rows."""
    w = pi.as_floats()[:op.size]
    sup = np.array([float(v) for v in op.sup[:-1]])
    sub = np.array([float(v) for v in op.sub[1:]])
    return w[:-1] * (-sup) - w[1:] * (-sub)


def symmetrize(op: TridiagonalOperator, pi: InvariantMeasure,
               tol: float = 1e-9) -> TridiagonalOperator:
    """Conjugate op by diag(pi)^(1/2), yielding a symmetric operator.

    The spectrum is unchanged and each off-diagonal pair collapses to
    -sqrt(P(x,y) P(y,x)).  The measure is checked for detailed balance on
    the interior edges; the weight at the reflecting boundary site is
    adapted from the boundary row itself (the half-line measure is not
    reversible for the mirror row, only up to that one weight).
    """
    if op.size > len(pi.values):
        raise ValueError("measure does not cover the operator")
    res = detailed_balance_residuals(op, pi)
    # Final edge always touches the modified boundary row; skip it.
    interior = res[:-1]
    if interior.size and np.max(np.abs(interior)) > tol:
        raise DetailedBalanceError(
            f"detailed-balance residual {np.max(np.abs(interior)):.3e} exceeds "
            f"{tol:.1e}; boundary convention or row assembly is inconsistent")
    diag = np.array([float(v) for v in op.diag])
    sub = np.array([float(v) for v in op.sub])
    sup = np.array([float(v) for v in op.sup])
    off = -np.sqrt(sup[:-1] * sub[1:])
    new_sub = np.zeros(op.size)
    new_sup = np.zeros(op.size)
    new_sub[1:] = off
    new_sup[:-1] = off
    if op.boundary_right == DIRICHLET:
        new_sub[-1] = 0.0
        new_sup[-2] = 0.0
    return TridiagonalOperator(size=op.size, diag=diag, sub=new_sub,
                               sup=new_sup, boundary_right=op.boundary_right)

"""Formal eigenfunctions of the pq Laplacian along the half-line.

For any spectral parameter z the eigenvalue equation can be solved site
by site starting from f(0) = 1, f(1) = (1-z) f(0); no division by zero
can occur since the forward coupling is always -p or -q.  Restricting
such a function to multiples of 3 reproduces the same recursion at the
renormalized parameter R(z), which forces f(3^n) = 1 - R^n(z) away from
the exceptional set.  The square-summability diagnostics below exhibit
why these functions never lie in l2 or L2(pi).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .laplacian import InvariantMeasure, PqParams, invariant_measure, row_coefficients
from .decimation import CubicMap, ExceptionalPointError, decimation_map

EXCEPTIONAL_FLAG_TOL = 1e-3


@dataclass(frozen=True)
class EigenTrace:
    """Sampled formal eigenfunction with running square sums.

    values[x] = f_z(x) for x = 0..N with f_z(0) = 1; l2_partials and
    l2pi_partials accumulate f^2 and f^2 pi; power_trace collects the
    subsequence f_z(3^n) for 3^n <= N.  Arrays are exact (object dtype)
    when both p and z are rational.
    """

    z: float | Fraction
    values: np.ndarray
    l2_partials: np.ndarray
    l2pi_partials: np.ndarray
    power_trace: np.ndarray
    exact: bool

    @property
    def extent(self) -> int:
        return len(self.values) - 1

    def power_sites(self) -> list[int]:
        return [3 ** n for n in range(len(self.power_trace))]


def _kahan_running(terms) -> np.ndarray:
    """Compensated running sums of `terms`."""
    out = np.empty(len(terms))
    total = 0.0
    carry = 0.0
    for i, t in enumerate(terms):
        y = t - carry
        s = total + y
        carry = (s - total) - y
        total = s
        out[i] = total
    return out


def extend_formal_eigenfunction(params: PqParams, z, extent: int) -> EigenTrace:
    """Solve the eigenvalue equation iteratively along 0..extent.

    f(x+1) = ((z-1) f(x) - sub(x) f(x-1)) / sup(x).  Values use plain
    products (exact rationals when p and z are both Fractions); float
    partial sums use compensated summation.
    """
    if extent < 1:
        raise ValueError("extent must be at least 1")
    exact = params.exact and isinstance(z, (Fraction, int))
    if exact:
        z = Fraction(z)
        one = Fraction(1)
    else:
        params = params.as_float()
        z = float(z)
        one = 1.0
    values = [one, (one - z) * one]
    for x in range(1, extent):
        sub, _, sup = row_coefficients(params, x)
        values.append(((z - one) * values[x] - sub * values[x - 1]) / sup)
    pi = invariant_measure(params, extent)
    if exact:
        arr = np.array(values, dtype=object)
        acc = Fraction(0)
        acc_pi = Fraction(0)
        l2_list, l2pi_list = [], []
        for v, w in zip(values, pi.values):
            acc += v * v
            acc_pi += v * v * w
            l2_list.append(acc)
            l2pi_list.append(acc_pi)
        l2 = np.array(l2_list, dtype=object)
        l2pi = np.array(l2pi_list, dtype=object)
    else:
        arr = np.array(values)
        l2 = _kahan_running(arr * arr)
        l2pi = _kahan_running(arr * arr * pi.values)
    powers = []
    site = 1
    while site <= extent:
        powers.append(values[site])
        site *= 3
    power_trace = np.array(powers, dtype=object if exact else float)
    return EigenTrace(z=z, values=arr, l2_partials=l2, l2pi_partials=l2pi,
                      power_trace=power_trace, exact=exact)


@dataclass(frozen=True)
class PowerTraceResiduals:
    """Deviation of f_z(3^n) from 1 - R^n(z), with exceptional-proximity flags.

    flagged[n] is True when some forward iterate R^k(z), k < n, comes
    within `flag_tol` of the exceptional pair; there the identity's
    derivation degenerates and the residual is informational only.
    """

    z: float
    residuals: np.ndarray
    expected: np.ndarray
    flagged: np.ndarray
    flag_tol: float


def trace_at_powers_of_three(trace: EigenTrace, cubic: CubicMap,
                             flag_tol: float = EXCEPTIONAL_FLAG_TOL
                             ) -> PowerTraceResiduals:
    """Compare the 3^n subsequence of a trace against forward iteration of R."""
    exact = trace.exact and cubic.params.exact
    z = trace.z if exact else float(trace.z)
    one = Fraction(1) if exact else 1.0
    hi, lo = cubic.params.exceptional
    expected, residuals, flagged = [], [], []
    iterate = z
    near = False
    for n in range(len(trace.power_trace)):
        if n > 0:
            near = near or min(abs(float(iterate) - float(hi)),
                               abs(float(iterate) - float(lo))) < flag_tol
            iterate = cubic.value(iterate)
        expected.append(one - iterate)
        residuals.append(abs(trace.power_trace[n] - (one - iterate)))
        flagged.append(near)
    dtype = object if exact else float
    return PowerTraceResiduals(z=float(z),
                               residuals=np.array(residuals, dtype=dtype),
                               expected=np.array(expected, dtype=dtype),
                               flagged=np.array(flagged, dtype=bool),
                               flag_tol=flag_tol)


def lift_eigenfunction(params: PqParams, level: int, z, coarse) -> np.ndarray:
    """Extend a coarse eigenfunction at R(z) to the fine level at z.

    Coarse values occupy multiples of 3; the complement pair (3x+1,
    3x+2) is filled via the closed-form 2x2 solve, so that the fine
    eigenvalue equation holds at interior sites whenever the coarse one
    holds at R(z).  Rejects exceptional z, where the pair block is
    singular.
    """
    if level < 1:
        raise ValueError("level must be at least 1")
    p, q = float(params.p), float(params.q)
    z = float(z)
    denom = (1.0 - z) ** 2 - p ** 2
    if abs(denom) < 1e-12:
        raise ExceptionalPointError(
            f"z = {z} is exceptional; the elimination block is singular")
    coarse = np.asarray(coarse, dtype=float)
    expected = 3 ** (level - 1) + 1
    if coarse.shape != (expected,):
        raise ValueError(f"coarse vector must have length {expected}")
    fine = np.empty(3 ** level + 1)
    fine[::3] = coarse
    left, right = coarse[:-1], coarse[1:]
    fine[1::3] = q * ((1.0 - z) * left + p * right) / denom
    fine[2::3] = q * (p * left + (1.0 - z) * right) / denom
    return fine


@dataclass(frozen=True)
class DivergenceReport:
    """Non-Cauchy diagnostics for the 3^n subsequence of a trace.

    The subsequence terms f(3^n)^2 (and f(3^n)^2 pi(3^n)) cannot head to
    zero when late terms stay above a tenth of the leading one; that is
    the computable signature of the square sums diverging.  pi(3^n) is
    constant in n, so both weightings agree up to that constant.
    """

    pi_at_powers: np.ndarray
    pi_constant: bool
    f_at_powers: np.ndarray
    min_abs_f: float
    terms_l2: np.ndarray
    terms_l2pi: np.ndarray
    non_cauchy_l2: bool
    non_cauchy_l2pi: bool
    l2_final: float
    l2pi_final: float


def norm_divergence_report(trace: EigenTrace,
                           pi: InvariantMeasure) -> DivergenceReport:
    """Report whether the power-subsequence square sums fail the Cauchy test."""
    sites = trace.power_sites()
    if pi.extent < sites[-1]:
        raise ValueError("measure does not cover the trace")
    pi_vals = pi.as_floats()[sites]
    f_vals = np.array([float(v) for v in trace.power_trace])
    terms = f_vals ** 2
    terms_pi = terms * pi_vals
    pi_constant = bool(np.max(np.abs(pi_vals - pi_vals[0])) < 1e-12)

    def fails_cauchy(t):
        if len(t) < 2 or t[1:].max() <= 0.0:
            return False
        return bool(t[1:].max() >= 0.1 * t[0])

    return DivergenceReport(
        pi_at_powers=pi_vals,
        pi_constant=pi_constant,
        f_at_powers=f_vals,
        min_abs_f=float(np.min(np.abs(f_vals))),
        terms_l2=terms,
        terms_l2pi=terms_pi,
        non_cauchy_l2=fails_cauchy(terms),
        non_cauchy_l2pi=fails_cauchy(terms_pi),
        l2_final=float(trace.l2_partials[-1]),
        l2pi_final=float(trace.l2pi_partials[-1]),
    )

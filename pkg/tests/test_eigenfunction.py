"""Formal eigenfunction recursion, power-of-three traces, and lifts."""

import random
from fractions import Fraction

import numpy as np
import pytest

from pqspectra import (
    ExceptionalPointError,
    PqParams,
    apply_operator,
    build_truncation,
    decimation_map,
    extend_formal_eigenfunction,
    invariant_measure,
    lift_eigenfunction,
    norm_divergence_report,
    row_coefficients,
    trace_at_powers_of_three,
)


class TestRecursion:
    def test_zero_gives_constant(self):
        trace = extend_formal_eigenfunction(PqParams(0.3), 0.0, 60)
        assert np.allclose(trace.values, 1.0, atol=1e-13)
        # l2 partial sums count the sites.
        assert trace.l2_partials[-1] == pytest.approx(61.0, abs=1e-9)

    def test_two_alternates(self):
        trace = extend_formal_eigenfunction(PqParams(0.3), 2.0, 60)
        expect = np.array([(-1.0) ** x for x in range(61)])
        assert np.allclose(trace.values, expect, atol=1e-12)

    def test_two_alternates_exactly_dyadic(self):
        # 1-p, 1-q, and every recursion quotient are exact doubles at p=1/4.
        trace = extend_formal_eigenfunction(PqParams(0.25), 2.0, 243)
        expect = np.array([(-1.0) ** x for x in range(244)])
        assert np.array_equal(trace.values, expect)

    def test_one_frozen_pattern(self):
        trace = extend_formal_eigenfunction(PqParams(0.3), 1.0, 8)
        ratio = 0.7 / 0.3
        expect = [1.0, 0.0, -ratio, 0.0, ratio ** 2, 0.0, -ratio, 0.0, ratio ** 2]
        assert np.allclose(trace.values, expect, atol=1e-12)

    def test_starts_with_one_minus_z(self):
        rng = random.Random(9)
        for _ in range(20):
            z = rng.uniform(0.0, 2.0)
            trace = extend_formal_eigenfunction(PqParams(0.41), z, 5)
            assert trace.values[0] == 1.0
            assert trace.values[1] == pytest.approx(1.0 - z)

    def test_rows_satisfied_relative(self):
        params = PqParams(0.3)
        rng = random.Random(10)
        for _ in range(10):
            z = rng.uniform(0.0, 2.0)
            trace = extend_formal_eigenfunction(params, z, 243)
            f = trace.values
            for x in range(1, 243):
                sub, diag, sup = row_coefficients(params, x)
                resid = sub * f[x - 1] + (diag - z) * f[x] + sup * f[x + 1]
                scale = abs(f[x - 1]) + abs(f[x]) + abs(f[x + 1]) + 1.0
                assert abs(resid) / scale < 1e-11

    def test_exact_mode(self):
        params = PqParams(Fraction(3, 10))
        trace = extend_formal_eigenfunction(params, Fraction(1), 8)
        ratio = Fraction(7, 3)
        assert list(trace.values) == [1, 0, -ratio, 0, ratio ** 2, 0, -ratio,
                                      0, ratio ** 2]
        assert trace.exact

    def test_power_trace_sites(self):
        trace = extend_formal_eigenfunction(PqParams(0.3), 0.11, 100)
        assert trace.power_sites() == [1, 3, 9, 27, 81]


class TestPowerTraceIdentity:
    def test_fixed_points_zero_residual_exact(self):
        params = PqParams(Fraction(3, 10))
        cubic = decimation_map(params)
        for z in (Fraction(0), Fraction(2)):
            trace = extend_formal_eigenfunction(params, z, 243)
            report = trace_at_powers_of_three(trace, cubic)
            assert all(r == 0 for r in report.residuals)

    def test_one_lands_on_zero(self):
        # R fixes 1, so the power subsequence of the z=1 trace vanishes
        # from n=1 on; its failure to lie in l2 is carried by the
        # period-four pattern instead.
        params = PqParams(Fraction(3, 10))
        trace = extend_formal_eigenfunction(params, Fraction(1), 243)
        assert list(trace.power_trace) == [0, 0, 0, 0, 0, 0]
        report = trace_at_powers_of_three(trace, decimation_map(params))
        assert all(r == 0 for r in report.residuals)

    def test_random_z_scaled_tolerance(self):
        # Off the Julia set the iterates escape and both sides of the
        # identity grow without bound, so the float comparison is scaled
        # by the expected value; it is exact in rational arithmetic.
        rng = random.Random(12)
        for p in (0.2, 0.3, 0.4):
            params = PqParams(p)
            cubic = decimation_map(params)
            growth = float(cubic.derivative(0.0)) / 9.0
            for _ in range(15):
                z = rng.uniform(0.0, 2.0)
                trace = extend_formal_eigenfunction(params, z, 243)
                report = trace_at_powers_of_three(trace, cubic)
                for n in range(6):
                    if not report.flagged[n]:
                        scale = max(1.0, abs(report.expected[n]))
                        assert report.residuals[n] < 1e-8 * growth ** n * scale

    def test_identity_exact_in_rational_mode(self):
        rng = random.Random(14)
        for p in (Fraction(1, 5), Fraction(3, 10), Fraction(2, 5)):
            params = PqParams(p)
            cubic = decimation_map(params)
            for _ in range(5):
                z = Fraction(rng.randrange(1, 400), 200)  # in (0, 2)
                if z in params.exceptional:
                    continue
                trace = extend_formal_eigenfunction(params, z, 243)
                report = trace_at_powers_of_three(trace, cubic)
                assert all(r == 0 for r in report.residuals)

    def test_flags_near_exceptional_preimages(self):
        params = PqParams(0.3)
        cubic = decimation_map(params)
        # Start exactly at an exceptional point: flagged from n=1 on.
        trace = extend_formal_eigenfunction(params, 1.3, 81)
        report = trace_at_powers_of_three(trace, cubic)
        assert not report.flagged[0]
        assert report.flagged[1:].all()


class TestLift:
    def test_constant_lifts_to_eigenfunction(self):
        # coarse == 1 solves the coarse equation at R(z) = 0; z = 1+q is
        # one of the three preimages of 0.
        params = PqParams(0.3)
        z = 1.7
        for level in (1, 2, 3):
            coarse = np.ones(3 ** (level - 1) + 1)
            fine = lift_eigenfunction(params, level, z, coarse)
            op = build_truncation(params, level)
            resid = apply_operator(op, fine) - z * fine
            assert np.max(np.abs(resid[1:-1])) < 1e-10
            assert np.array_equal(fine[::3], coarse)

    def test_zero_keeps_constant(self):
        fine = lift_eigenfunction(PqParams(0.3), 2, 0.0, np.ones(4))
        assert np.allclose(fine, 1.0, atol=1e-14)
        exact_dyadic = lift_eigenfunction(PqParams(0.25), 2, 0.0, np.ones(4))
        assert np.array_equal(exact_dyadic, np.ones(10))

    def test_general_coarse_trace_lifts(self):
        params = PqParams(0.3)
        cubic = decimation_map(params)
        rng = random.Random(13)
        for _ in range(10):
            z = rng.uniform(0.0, 2.0)
            if min(abs(z - 1.3), abs(z - 0.7)) < 1e-2:
                continue
            w = float(cubic.value(z))
            coarse = extend_formal_eigenfunction(params, w, 9).values
            fine = lift_eigenfunction(params, 3, z, coarse)
            op = build_truncation(params, 3)
            resid = apply_operator(op, fine) - z * fine
            scale = np.max(np.abs(fine)) + 1.0
            assert np.max(np.abs(resid[1:-1])) / scale < 1e-10

    def test_exceptional_rejected(self):
        with pytest.raises(ExceptionalPointError):
            lift_eigenfunction(PqParams(0.3), 2, 1.3, np.ones(4))

    def test_wrong_length_rejected(self):
        with pytest.raises(ValueError):
            lift_eigenfunction(PqParams(0.3), 2, 0.5, np.ones(5))

    def test_traces_differ_between_p_and_q(self):
        # Same decimation cubic, different eigenfunctions.
        a = extend_formal_eigenfunction(PqParams(0.3), 0.11, 27).values
        b = extend_formal_eigenfunction(PqParams(0.7), 0.11, 27).values
        assert np.max(np.abs(a - b)) > 1e-3


class TestDivergenceReport:
    def report_for(self, p, z, extent=243):
        params = PqParams(p)
        trace = extend_formal_eigenfunction(params, z, extent)
        pi = invariant_measure(params, extent)
        return norm_divergence_report(trace, pi)

    def test_pi_constant_along_powers(self):
        report = self.report_for(0.3, 0.11)
        assert report.pi_constant
        assert np.allclose(report.pi_at_powers, report.pi_at_powers[0])

    def test_constant_trace_diverges(self):
        report = self.report_for(0.3, 0.0)
        assert report.non_cauchy_l2
        assert report.non_cauchy_l2pi
        assert report.min_abs_f == pytest.approx(1.0)

    def test_alternating_trace_diverges(self):
        report = self.report_for(0.3, 2.0)
        assert report.non_cauchy_l2
        assert report.min_abs_f == pytest.approx(1.0, abs=1e-10)

    def test_z_one_power_mechanism_inapplicable(self):
        # The subsequence vanishes identically at z=1; divergence of the
        # full sums shows up in the running l2 totals instead.
        report = self.report_for(0.3, 1.0)
        assert not report.non_cauchy_l2
        assert report.min_abs_f == pytest.approx(0.0, abs=1e-12)
        assert report.l2_final > 100.0

    def test_backward_orbit_point_wanders(self):
        params = PqParams(0.3)
        cubic = decimation_map(params)
        from pqspectra import backward_orbit
        pts = backward_orbit(cubic, 0.0, 6).points
        fixed_preimages = {0.0, 1.3, 1.7, 2.0}
        z = next(z for z in pts
                 if min(abs(z - f) for f in fixed_preimages) > 1e-3)
        report = self.report_for(0.3, float(z), extent=729)
        assert report.non_cauchy_l2
        assert report.non_cauchy_l2pi

    def test_short_measure_rejected(self):
        params = PqParams(0.3)
        trace = extend_formal_eigenfunction(params, 0.5, 27)
        with pytest.raises(ValueError):
            norm_divergence_report(trace, invariant_measure(params, 9))

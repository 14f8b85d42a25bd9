"""Operator assembly, invariant measure, and symmetrization checks."""

import random
from fractions import Fraction

import numpy as np
import pytest

from pqspectra import (
    DIRICHLET,
    REFLECTING,
    DetailedBalanceError,
    PqParams,
    SizeCapError,
    apply_operator,
    build_truncation,
    classify_site,
    detailed_balance_residuals,
    invariant_measure,
    row_coefficients,
    symmetrize,
)


def stationary_oracle(p: float, n: int) -> np.ndarray:
    """Brute-force stationary vector of the reflecting chain on 0..n.

    Solves pi P = pi for the dense transition matrix and normalizes to
    pi(0) = 1; independent of the detailed-balance construction.
    """
    size = n + 1
    P = np.zeros((size, size))
    P[0, 1] = 1.0
    for x in range(1, n):
        sub, _, sup = row_coefficients(PqParams(p), x)
        P[x, x - 1] = -sub
        P[x, x + 1] = -sup
    P[n, n - 1] = 1.0
    # Null space of (P^T - I) via least squares with the sum pinned.
    A = np.vstack([P.T - np.eye(size), np.ones(size)])
    b = np.zeros(size + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    return pi / pi[0]


class TestClassifySite:
    def test_origin(self):
        c = classify_site(0)
        assert (c.depth, c.residue) == (0, 0)

    @pytest.mark.parametrize("x,depth,residue", [
        (1, 0, 1), (2, 0, 2), (6, 1, 2), (9, 2, 1),
        (12, 1, 1), (27, 3, 1), (54, 3, 2),
    ])
    def test_examples(self, x, depth, residue):
        c = classify_site(x)
        assert (c.depth, c.residue) == (depth, residue)

    def test_tripling_raises_depth(self):
        for x in range(1, 200):
            assert classify_site(3 * x).depth == classify_site(x).depth + 1
            assert classify_site(3 * x).residue == classify_site(x).residue

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            classify_site(-1)


class TestParams:
    def test_derived_fields(self):
        params = PqParams(0.3)
        assert params.q == pytest.approx(0.7)
        assert params.pq == pytest.approx(0.21)
        assert params.exceptional == pytest.approx((1.3, 0.7))

    def test_exact_mode(self):
        params = PqParams(Fraction(1, 3))
        assert params.exact
        assert params.q == Fraction(2, 3)
        assert params.pq == Fraction(2, 9)
        assert params.as_float().p == pytest.approx(1 / 3)

    def test_pq_bound(self):
        rng = random.Random(7)
        for _ in range(50):
            params = PqParams(rng.uniform(1e-6, 1 - 1e-6))
            assert params.pq <= 0.25 + 1e-15
        assert PqParams(0.5).pq == 0.25

    @pytest.mark.parametrize("bad", [0.0, 1.0, -0.2, 1.7])
    def test_range_rejected(self, bad):
        with pytest.raises(ValueError):
            PqParams(bad)


class TestRows:
    def test_residue_branches(self):
        params = PqParams(0.3)
        assert row_coefficients(params, 1) == pytest.approx((-0.7, 1, -0.3))
        assert row_coefficients(params, 2) == pytest.approx((-0.3, 1, -0.7))
        sub, diag, sup = row_coefficients(params, 0)
        assert sub is None and diag == 1 and sup == -1

    def test_row_sums_vanish_interior(self):
        rng = random.Random(1)
        for _ in range(25):
            params = PqParams(rng.uniform(0.01, 0.99))
            for x in range(1, 100):
                sub, diag, sup = row_coefficients(params, x)
                assert abs(sub + diag + sup) < 1e-15

    def test_exact_rows(self):
        params = PqParams(Fraction(1, 3))
        assert row_coefficients(params, 3) == (Fraction(-2, 3), 1, Fraction(-1, 3))


class TestTruncation:
    def test_level1_half(self):
        op = build_truncation(PqParams(0.5), 1)
        expect = np.array([[1, -1, 0, 0], [-0.5, 1, -0.5, 0],
                           [0, -0.5, 1, -0.5], [0, 0, -1, 1]])
        assert np.array_equal(op.dense(), expect)

    def test_level1_third(self):
        op = build_truncation(PqParams(Fraction(1, 3)), 1)
        dense = op.dense()
        expect = np.array([[1, -1, 0, 0], [-2 / 3, 1, -1 / 3, 0],
                           [0, -1 / 3, 1, -2 / 3], [0, 0, -1, 1]])
        assert np.allclose(dense, expect, atol=1e-15)

    def test_level2_rows_match_classifier(self):
        params = PqParams(1 / 3)
        op = build_truncation(params, 2)
        assert op.size == 10
        for x in range(1, 9):
            expect = row_coefficients(params, x)
            assert op.sub[x] == expect[0]
            assert op.sup[x] == expect[2]
        # 3 = 3^1 * 1 has residue 1.
        assert op.sub[3] == pytest.approx(-2 / 3)
        assert op.sup[3] == pytest.approx(-1 / 3)

    def test_boundary_rows(self):
        refl = build_truncation(PqParams(0.3), 1, REFLECTING)
        assert refl.sub[-1] == -1 and refl.diag[-1] == 1
        diri = build_truncation(PqParams(0.3), 1, DIRICHLET)
        assert diri.sub[-1] == 0 and diri.diag[-1] == 1
        assert diri.effective_size == refl.effective_size - 1

    def test_cap(self, monkeypatch):
        with pytest.raises(SizeCapError):
            build_truncation(PqParams(0.3), 11)
        monkeypatch.setenv("PQ_SPECTRA_MAX_LEVEL", "2")
        with pytest.raises(SizeCapError):
            build_truncation(PqParams(0.3), 3)
        build_truncation(PqParams(0.3), 2)


class TestApply:
    def test_constant_in_kernel_interior(self):
        op = build_truncation(PqParams(0.27), 2)
        out = apply_operator(op, np.ones(op.size))
        assert np.max(np.abs(out)) < 1e-15

    def test_alternating_at_two(self):
        op = build_truncation(PqParams(0.5), 1)
        f = np.array([1.0, -1.0, 1.0, -1.0])
        assert np.array_equal(apply_operator(op, f), 2.0 * f)

    def test_zero_vector(self):
        op = build_truncation(PqParams(0.4), 1)
        assert np.array_equal(apply_operator(op, np.zeros(4)), np.zeros(4))

    def test_dimension_mismatch(self):
        op = build_truncation(PqParams(0.4), 1)
        with pytest.raises(ValueError):
            apply_operator(op, np.ones(5))


class TestInvariantMeasure:
    def test_frozen_third(self):
        pi = invariant_measure(PqParams(Fraction(1, 3)), 6)
        assert list(pi.values) == [Fraction(1), Fraction(3, 2), Fraction(3, 2),
                                   Fraction(3, 2), Fraction(3, 4),
                                   Fraction(3, 4), Fraction(3, 2)]

    def test_half_is_constant(self):
        pi = invariant_measure(PqParams(0.5), 20)
        assert pi.values[0] == 1.0
        assert np.allclose(pi.values[1:], 2.0, atol=1e-15)

    def test_against_stationary_oracle(self):
        for p in (1 / 3, 0.27, 0.62):
            pi = invariant_measure(PqParams(p), 26)
            oracle = stationary_oracle(p, 27)
            assert np.allclose(pi.as_floats(), oracle[:27], atol=1e-9)

    def test_detailed_balance_sweep(self):
        rng = random.Random(123)
        for _ in range(100):
            params = PqParams(rng.uniform(0.01, 0.99))
            op = build_truncation(params, 3)
            pi = invariant_measure(params, op.size - 1)
            res = detailed_balance_residuals(op, pi)[:-1]
            assert np.max(np.abs(res)) < 1e-12

    def test_triple_identity_exact(self):
        pi = invariant_measure(PqParams(Fraction(2, 7)), 243)
        for x in range(1, 82):
            assert pi.values[x] == pi.values[3 * x]

    def test_triple_identity_float(self):
        pi = invariant_measure(PqParams(0.37), 243).as_floats()
        for x in range(1, 82):
            assert abs(pi[x] - pi[3 * x]) < 1e-12

    def test_spread_grows_off_half(self):
        for p in (0.3, 0.7):
            pi = invariant_measure(PqParams(p), 3 ** 5).as_floats()
            ratios = [np.max(pi[1:3 ** m + 1]) / np.min(pi[1:3 ** m + 1])
                      for m in range(1, 6)]
            assert all(b > a for a, b in zip(ratios, ratios[1:]))


class TestSymmetrize:
    def test_half_unchanged_interior(self):
        # p = q: every interior pair is already symmetric; only the
        # asymmetric mirror rows at 0 and N get averaged.
        params = PqParams(0.5)
        op = build_truncation(params, 2)
        sym = symmetrize(op, invariant_measure(params, op.size - 1))
        assert np.allclose(sym.dense()[1:-1, 1:-1], op.dense()[1:-1, 1:-1],
                           atol=1e-15)
        assert sym.sup[0] == pytest.approx(-np.sqrt(0.5))

    def test_symmetric_to_roundoff(self):
        for p in (0.2, 0.37, 0.81):
            params = PqParams(p)
            op = build_truncation(params, 3)
            sym = symmetrize(op, invariant_measure(params, op.size - 1))
            dense = sym.dense()
            assert np.max(np.abs(dense - dense.T)) < 1e-14

    def test_spectrum_preserved(self):
        rng = random.Random(5)
        for level in (1, 2, 3):
            params = PqParams(rng.uniform(0.05, 0.95))
            op = build_truncation(params, level)
            sym = symmetrize(op, invariant_measure(params, op.size - 1))
            raw = np.sort(np.linalg.eigvals(op.dense()).real)
            assert np.allclose(np.sort(np.linalg.eigvalsh(sym.dense())), raw,
                               atol=1e-10)

    def test_frozen_level1_eigenvalues(self):
        params = PqParams(1 / 3)
        op = build_truncation(params, 1)
        sym = symmetrize(op, invariant_measure(params, 3))
        eigs = np.sort(np.linalg.eigvalsh(sym.dense()))
        assert np.allclose(eigs, [0, 1 / 3, 5 / 3, 2], atol=1e-12)

    def test_off_diagonal_products(self):
        # Edge between a multiple-of-3 residue-1 site and its neighbor
        # carries -sqrt(pq); p = q so the p = 1/2 case is unchanged.
        params = PqParams(0.3)
        op = build_truncation(params, 2)
        sym = symmetrize(op, invariant_measure(params, op.size - 1))
        assert sym.sup[3] == pytest.approx(-np.sqrt(params.pq))
        assert sym.sup[1] == pytest.approx(-0.3)

    def test_bad_measure_rejected(self):
        params = PqParams(0.3)
        op = build_truncation(params, 2)
        pi = invariant_measure(params, op.size - 1)
        broken = type(pi)(values=np.linspace(1.0, 2.0, op.size))
        with pytest.raises(DetailedBalanceError):
            symmetrize(op, broken)

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from carloss.errors import DomainError, InputError, InvalidParameterError, NumericalError
from carloss.losses import (LossSpec, expected_loss, linex_loss, logmeanexp, optimal_predictor,
                            pdl_loss, predictor_table, quantile_match)

positive_draws = arrays(np.float64, st.integers(2, 40),
                        elements=st.floats(0.1, 100.0, allow_nan=False))
real_draws = arrays(np.float64, st.integers(2, 40),
                    elements=st.floats(-50.0, 50.0, allow_nan=False))


def nondegenerate(d):
    return np.ptp(d) > 1e-6 * (1 + np.max(np.abs(d)))


class TestLossSpec:
    def test_parse(self):
        assert LossSpec.parse("linex:-0.6") == LossSpec("linex", -0.6)
        assert LossSpec.parse("pdl:38") == LossSpec("pdl", 38.0)
        assert LossSpec.parse("linex:2:3").gamma_scale == 3.0
        assert LossSpec.parse("squared_error").lam == 0.0

    def test_labels(self):
        assert LossSpec("squared_error", 4.0).label == "squared_error"
        assert LossSpec("pdl", 38).label == "pdl(38.0)"

    @pytest.mark.parametrize("text", ["linex:0", "linex", "huber:1", "pdl:x", "pdl:1:2:3",
                                      "linex:1:-2", "pdl:nan"])
    def test_rejects(self, text):
        with pytest.raises(InvalidParameterError):
            LossSpec.parse(text)


class TestPointwiseLosses:
    def test_linex_examples(self):
        assert linex_loss(0.0, 2.3, 4.0) == 0.0
        assert linex_loss(1.0, 1.0) == pytest.approx(math.e - 2, rel=1e-15)
        assert linex_loss(-1.0, 1.0) == pytest.approx(1 / math.e, rel=1e-15)
        assert linex_loss(-1.0, 1.0) < linex_loss(1.0, 1.0)

    def test_linex_gamma_scales(self):
        np.testing.assert_allclose(linex_loss([0.3, -2.0], -0.6, 3.0),
                                   3.0 * linex_loss([0.3, -2.0], -0.6))

    def test_linex_lambda_zero(self):
        with pytest.raises(InvalidParameterError, match="squared_error"):
            linex_loss(1.0, 0.0)

    def test_pdl_examples(self):
        for lam in (-3.0, -1.0, 0.0, 0.5, 38.0):
            assert pdl_loss(7.0, 7.0, lam) == 0.0
        assert pdl_loss(10.0, 5.0, 1.0) == pytest.approx(2.5, rel=1e-14)
        assert pdl_loss(10.0, 5.0, 0.0) == pytest.approx(10 * math.log(2) - 5, rel=1e-14)

    @pytest.mark.parametrize("y, yhat", [(0.0, 1.0), (1.0, -2.0), (-1.0, 1.0)])
    def test_pdl_domain(self, y, yhat):
        with pytest.raises(DomainError):
            pdl_loss(y, yhat, 2.0)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0.1, 100), st.floats(0.1, 100), st.sampled_from([0.0, -1.0]))
    def test_pdl_continuity(self, y, yhat, lam0):
        branch = pdl_loss(y, yhat, lam0)
        for eps in (1e-6, -1e-6):
            general = pdl_loss(y, yhat, lam0 + eps)
            assert abs(general - branch) <= 1e-4 * max(abs(branch), 1e-12) + 1e-9

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0.1, 100), st.floats(0.1, 100), st.floats(-5, 40))
    def test_pdl_nonnegative(self, y, yhat, lam):
        assert pdl_loss(y, yhat, lam) >= -1e-12 * y


class TestLogMeanExp:
    def test_matches_naive(self, rng):
        x = rng.normal(size=(50, 3))
        np.testing.assert_allclose(logmeanexp(x, axis=0), np.log(np.mean(np.exp(x), axis=0)))

    def test_huge_exponents(self):
        # naive exp overflows here
        assert logmeanexp([1000.0, 1000.0]) == 1000.0
        assert logmeanexp([-1000.0, -1000.0 + math.log(3)]) == pytest.approx(
            -1000.0 + math.log(2), rel=1e-15)

    def test_non_finite(self):
        with pytest.raises(NumericalError):
            logmeanexp([np.inf, 1.0])


class TestExpectedLoss:
    def test_degenerate_is_zero(self):
        d = np.full(10, 4.2)
        for spec in (LossSpec("squared_error"), LossSpec("linex", -0.6), LossSpec("pdl", 38)):
            assert expected_loss(d, 4.2, spec) == 0.0

    def test_bias_variance(self, rng):
        d = rng.normal(3, 2, size=300)
        m, v = d.mean(), d.var()
        got = expected_loss(d, 5.5, LossSpec("squared_error"))
        assert got == pytest.approx(v + (5.5 - m) ** 2, rel=1e-12)
        assert got == pytest.approx(np.mean((d - 5.5) ** 2), rel=1e-12)

    def test_linex_two_points(self):
        got = expected_loss([0.0, 1.0], 0.0, LossSpec("linex", 1.0))
        assert got == pytest.approx(math.exp(-1) / 2, rel=1e-14)

    def test_vectorized_candidates(self, rng):
        d = rng.uniform(1, 5, size=50)
        cands = np.linspace(0.5, 6, 7)
        spec = LossSpec("pdl", 3.0)
        out = expected_loss(d, cands, spec)
        assert out.shape == cands.shape
        np.testing.assert_allclose(out, [expected_loss(d, c, spec) for c in cands])

    @pytest.mark.parametrize("spec", [LossSpec("squared_error"), LossSpec("linex", -1.1),
                                      LossSpec("linex", 0.5, 2.0), LossSpec("pdl", 0.0),
                                      LossSpec("pdl", -1.0), LossSpec("pdl", 22.0),
                                      LossSpec("pdl", -3.5)])
    def test_moments_match_direct(self, rng, spec):
        d = rng.uniform(0.5, 8, size=200)
        cands = np.linspace(0.6, 8.5, 25)
        np.testing.assert_allclose(expected_loss(d, cands, spec),
                                   expected_loss(d, cands, spec, method="direct"),
                                   rtol=1e-9, atol=1e-12)

    def test_pdl_domain(self):
        with pytest.raises(DomainError):
            expected_loss([1.0, -1.0], 1.0, LossSpec("pdl", 2.0))

    def test_unknown_method(self):
        with pytest.raises(InvalidParameterError):
            expected_loss([1.0, 2.0], 1.0, LossSpec("squared_error"), method="quad")


class TestOptimalPredictor:
    def test_degenerate(self):
        d = np.full(7, 3.25)
        for spec in (LossSpec("squared_error"), LossSpec("linex", 2.0), LossSpec("linex", -1.1),
                     LossSpec("pdl", 38.0), LossSpec("pdl", -1.0), LossSpec("pdl", -4.0)):
            assert optimal_predictor(d, spec) == pytest.approx(3.25, rel=1e-14)

    def test_hand_values(self):
        assert optimal_predictor([3.0, 4.0], LossSpec("pdl", 1.0)) == pytest.approx(
            math.sqrt(12.5), rel=1e-15)
        assert optimal_predictor([1.0, 4.0], LossSpec("pdl", -1.0)) == pytest.approx(2.0, rel=1e-15)
        # linex closed form on two points
        want = -math.log((math.exp(-2.0) + math.exp(-4.0)) / 2) / 2
        assert optimal_predictor([1.0, 2.0], LossSpec("linex", 2.0)) == pytest.approx(want)

    def test_large_value_scale_is_finite(self):
        # exp(-38 * 30) underflows without the log-domain shift
        d = np.linspace(28, 32, 100)
        assert 28 < optimal_predictor(d, LossSpec("linex", 38.0)) < 32
        assert 28 < optimal_predictor(d, LossSpec("linex", -38.0)) < 32
        assert 28 < optimal_predictor(d, LossSpec("pdl", 38.0)) <= 32

    def test_pdl_reports_region_and_draw(self):
        with pytest.raises(DomainError, match=r"draw 2 in region 'Salem'"):
            optimal_predictor([1.0, 2.0, -0.5, 3.0], LossSpec("pdl", 2.0), region="Salem")

    def test_needs_two_draws(self):
        with pytest.raises(InputError):
            optimal_predictor([1.0], LossSpec("squared_error"))

    def test_overflow_is_numerical_error(self):
        with pytest.raises(NumericalError):
            optimal_predictor([1.7e308, 1.6e308], LossSpec("squared_error"))

    def test_linex_near_zero(self, rng):
        d = rng.normal(10, 2, size=500)
        for lam in (1e-8, -1e-8):
            got = optimal_predictor(d, LossSpec("linex", lam))
            assert abs(got - d.mean()) <= 1e-6 * (1 + abs(d.mean()))

    def test_pdl_zero_is_mean(self, rng):
        d = rng.uniform(0.1, 100, size=200)
        assert optimal_predictor(d, LossSpec("pdl", 0.0)) == float(np.mean(d))

    def test_pdl_minus_one_continuity(self, rng):
        d = rng.uniform(0.1, 100, size=200)
        g = optimal_predictor(d, LossSpec("pdl", -1.0))
        assert g == pytest.approx(math.exp(np.mean(np.log(d))), rel=1e-14)
        for lam in (-1 + 1e-8, -1 - 1e-8):
            assert optimal_predictor(d, LossSpec("pdl", lam)) == pytest.approx(g, rel=1e-6)

    @settings(max_examples=150, deadline=None)
    @given(real_draws, st.floats(0.05, 3.0))
    def test_linex_direction(self, d, mag):
        assume(nondegenerate(d))
        m = float(np.mean(d))
        assert optimal_predictor(d, LossSpec("linex", -mag)) > m
        assert optimal_predictor(d, LossSpec("linex", mag)) < m

    @settings(max_examples=150, deadline=None)
    @given(positive_draws, st.floats(0.05, 40.0), st.floats(-0.95, -0.05))
    def test_pdl_direction(self, d, pos, neg):
        m = float(np.mean(d))
        tol = 1e-12 * m
        assert optimal_predictor(d, LossSpec("pdl", pos)) >= m - tol
        assert optimal_predictor(d, LossSpec("pdl", neg)) <= m + tol

    @settings(max_examples=100, deadline=None)
    @given(positive_draws)
    def test_pdl_monotone_in_lambda(self, d):
        lams = np.linspace(-5, 40, 46)
        preds = np.array([optimal_predictor(d, LossSpec("pdl", lam)) for lam in lams])
        assert np.all(np.diff(preds) >= -1e-12 * preds[:-1])

    @settings(max_examples=100, deadline=None)
    @given(real_draws)
    def test_linex_monotone_in_lambda(self, d):
        lams = [lam for lam in np.linspace(-3, 3, 61) if abs(lam) > 1e-9]
        preds = np.array([optimal_predictor(d, LossSpec("linex", lam)) for lam in lams])
        assert np.all(np.diff(preds) <= 1e-12 * (1 + np.abs(preds[:-1])))

    @settings(max_examples=100, deadline=None)
    @given(positive_draws, st.one_of(st.floats(-3, -0.05), st.floats(0.05, 3)),
           st.floats(-5, 40), st.floats(0.05, 100))
    def test_minimality_exact(self, d, lam_lx, lam_pdl, cand):
        for spec in (LossSpec("linex", lam_lx), LossSpec("pdl", lam_pdl),
                     LossSpec("squared_error")):
            opt = optimal_predictor(d, spec)
            assert expected_loss(d, opt, spec) <= expected_loss(d, cand, spec)

    def test_gamma_does_not_move_minimizer(self, rng):
        d = rng.normal(5, 1, 100)
        a = optimal_predictor(d, LossSpec("linex", -0.6, 1.0))
        b = optimal_predictor(d, LossSpec("linex", -0.6, 7.5))
        assert a == b


class TestQuantileMatch:
    def test_examples(self):
        d = np.arange(1.0, 101.0)
        assert quantile_match(d, 0.5) == 0.0
        assert quantile_match(d, 100.0) == 1.0
        assert quantile_match(d, 50.0) == 0.5


class TestPredictorTable:
    def test_squared_error(self, rng):
        draws = rng.normal(10, 2, size=(400, 6))
        t = predictor_table(draws, LossSpec("squared_error"))
        np.testing.assert_array_equal(t.predictor, t.posterior_mean)
        np.testing.assert_allclose(t.rmspe, t.sd, rtol=1e-15)
        np.testing.assert_allclose(t.sd, draws.std(axis=0))

    def test_linex_negative_above_mean(self, rng):
        draws = rng.gamma(3.0, 2.0, size=(300, 8))
        t = predictor_table(draws, LossSpec("linex", -0.6))
        assert np.all(t.predictor > t.posterior_mean)
        assert np.all(t.rmspe > t.sd)
        assert np.all((t.matched_quantile >= 0) & (t.matched_quantile <= 1))

    def test_rmspe_is_root_expected_squared_error(self, rng):
        draws = rng.uniform(1, 3, size=(200, 4))
        t = predictor_table(draws, LossSpec("pdl", 5.0))
        for i in range(4):
            want = expected_loss(draws[:, i], t.predictor[i], LossSpec("squared_error"))
            assert t.rmspe[i] == pytest.approx(math.sqrt(want), rel=1e-12)

    def test_region_ids_and_errors(self, rng):
        draws = rng.uniform(1, 3, size=(50, 3))
        draws[7, 1] = -1.0
        with pytest.raises(DomainError, match="'b'"):
            predictor_table(draws, LossSpec("pdl", 2.0), region_ids=("a", "b", "c"))
        with pytest.raises(InputError):
            predictor_table(draws, LossSpec("squared_error"), region_ids=("a",))

    def test_from_posterior_draws(self, county_draws):
        t = predictor_table(county_draws, LossSpec("pdl", 22.0))
        assert t.region_ids == county_draws.region_ids
        assert np.all(t.predictor >= t.posterior_mean)

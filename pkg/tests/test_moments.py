from datetime import date, timedelta

import numpy as np
import pytest

from cpoint.linalg import cholesky
from cpoint.moments import (
    InsufficientSamples,
    InvalidCorrelation,
    MissingQuote,
    MomentSet,
    PriceSeries,
    covariance_from_corr,
    filter_estimate,
    from_simple,
    index_model_moments,
    parse_price_series,
    to_simple,
    validate_correlation,
)

TEL3_FIXTURE = """Asset: TEL3
Deflator: DOLOF.OFC
Shares: 1E+4
Date        Price
30/12/94    4.314E+02
29/12/94    4.304E+02
28/12/94    4.030E+02
27/12/94    4.025E+02
*        (T.S. terminator)
"""


def make_series(asset, start, prices, step=1):
    obs = [(start + timedelta(days=i * step), p) for i, p in enumerate(prices)]
    return PriceSeries(asset, "NONE", 1.0, obs[::-1])


class TestConversion:
    def test_zero_maps_to_zero(self):
        assert to_simple(0.0, 0.0) == (0.0, 0.0)

    def test_scalar_evaluation(self):
        er, _ = to_simple(0.1, 0.2)
        assert er == pytest.approx(np.exp(0.12) - 1.0, rel=1e-14)

    def test_monte_carlo_oracle(self):
        rng = np.random.default_rng(71)
        mu, sig = 0.07, 0.31
        draws = np.exp(rng.normal(mu, sig, size=1_000_000)) - 1.0
        er, std = to_simple(mu, sig)
        se_mean = draws.std() / np.sqrt(draws.size)
        assert er == pytest.approx(draws.mean(), abs=3 * se_mean)
        # SE of the sample std via the fourth moment
        m4 = ((draws - draws.mean()) ** 4).mean()
        se_var = np.sqrt((m4 - draws.var() ** 2) / draws.size)
        assert std ** 2 == pytest.approx(draws.var(), abs=3 * se_var)

    def test_from_simple_round_trip(self):
        for erl, stdl in [(0.0, 0.1), (0.2, 0.4), (-0.1, 0.05)]:
            er, std = to_simple(erl, stdl)
            back = from_simple(er, std)
            assert back[0] == pytest.approx(erl, abs=1e-12)
            assert back[1] == pytest.approx(stdl, abs=1e-12)


class TestValidateCorrelation:
    def test_identity_ok(self):
        assert validate_correlation(np.eye(4)) == []

    def test_dominance_violation(self):
        v = validate_correlation(np.array([[1.0, 1.2], [1.2, 1.0]]))
        assert any(kind == "dominance" for kind, _ in v)

    def test_positivity_violation(self):
        # rank-1 perturbation pushing one eigenvalue to -0.1
        q, _ = np.linalg.qr(np.random.default_rng(5).normal(size=(3, 3)))
        mat = q @ np.diag([1.5, 1.6, -0.1]) @ q.T
        d = np.sqrt(np.diag(mat))
        corr = mat / np.outer(d, d)
        np.fill_diagonal(corr, 1.0)
        v = validate_correlation(corr)
        assert any(kind == "positivity" for kind, _ in v)

    def test_asymmetry_violation(self):
        c = np.array([[1.0, 0.5], [0.4, 1.0]])
        v = validate_correlation(c)
        assert any(kind == "symmetry" for kind, _ in v)

    def test_momentset_rejects_invalid(self):
        with pytest.raises(InvalidCorrelation):
            MomentSet(["A", "B"], [0.1, 0.1], [0.2, 0.2],
                      np.array([[1.0, 1.2], [1.2, 1.0]]))


class TestCovarianceFromCorr:
    def test_identity_correlation(self):
        ms = MomentSet(["A", "B"], [0.1, 0.2], [0.1, 0.3], np.eye(2))
        assert np.allclose(covariance_from_corr(ms), np.diag([0.01, 0.09]))

    def test_two_by_two(self):
        ms = MomentSet(["A", "B"], [0.0, 0.0], [0.1, 0.2],
                       np.array([[1.0, 0.5], [0.5, 1.0]]))
        s = covariance_from_corr(ms)
        assert s[0, 1] == pytest.approx(0.01)

    def test_random_valid_is_positive_definite(self):
        rng = np.random.default_rng(6)
        for _ in range(5):
            a = rng.normal(size=(4, 4))
            cov = a @ a.T + 0.5 * np.eye(4)
            d = np.sqrt(np.diag(cov))
            corr = cov / np.outer(d, d)
            np.fill_diagonal(corr, 1.0)
            ms = MomentSet(list("ABCD"), np.zeros(4), rng.uniform(0.05, 0.4, 4), corr)
            cholesky(covariance_from_corr(ms))  # must not raise


class TestPriceSeriesParsing:
    def test_tel3_fixture(self):
        s = parse_price_series(TEL3_FIXTURE)
        assert s.asset == "TEL3"
        assert s.deflator == "DOLOF.OFC"
        assert s.shares == pytest.approx(1e4)
        assert len(s.observations) == 4
        assert s.observations[0] == (date(1994, 12, 30), pytest.approx(431.4))
        assert s.observations[-1] == (date(1994, 12, 27), pytest.approx(402.5))

    def test_rows_after_terminator_ignored(self):
        s = parse_price_series(TEL3_FIXTURE + "\n01/01/95  9.999E+02\n")
        assert len(s.observations) == 4

    def test_positive_prices_enforced(self):
        with pytest.raises(ValueError):
            PriceSeries("X", "", 1.0, [(date(2020, 1, 1), -1.0)])


class TestFilter:
    def test_constant_prices(self):
        start = date(2020, 1, 1)
        a = make_series("A", start, [5.0] * 20)
        b = make_series("B", start, [9.0] * 20)
        res = filter_estimate([a, b], start + timedelta(days=10), 1, 10, 30, 0.5)
        assert np.allclose(res.meanl, 0.0)
        assert np.allclose(res.sl, 0.0)
        assert np.allclose(res.moments.er, 0.0)
        assert np.allclose(res.moments.std, 0.0)
        assert np.allclose(res.moments.correl, np.eye(2))

    def test_identity_extrapolation(self):
        rng = np.random.default_rng(7)
        start = date(2020, 1, 1)
        prices = np.exp(np.cumsum(rng.normal(0, 0.02, 30)))
        s = make_series("A", start, list(prices))
        res = filter_estimate([s], start + timedelta(days=20), 1, 20, 1, 0.5)
        assert res.erl[0] == pytest.approx(res.meanl[0], rel=1e-12)
        assert res.stdl[0] == pytest.approx(res.sl[0], rel=1e-12)

    def test_hurst_scaling_exact(self):
        rng = np.random.default_rng(8)
        start = date(2020, 1, 1)
        prices = np.exp(np.cumsum(rng.normal(0.001, 0.02, 40)))
        s = make_series("A", start, list(prices))
        res = filter_estimate([s], start + timedelta(days=30), 1, 30, 30, 0.5)
        assert res.stdl[0] == pytest.approx(np.sqrt(30.0) * res.sl[0], rel=1e-12)
        assert res.erl[0] == pytest.approx(30.0 * res.meanl[0], rel=1e-12)
        res2 = filter_estimate([s], start + timedelta(days=30), 1, 30, 30, 0.7)
        assert res2.stdl[0] == pytest.approx(30.0 ** 0.7 * res.sl[0], rel=1e-12)

    def test_gbm_recovers_parameters(self):
        rng = np.random.default_rng(9)
        mu, sig, n = 0.0005, 0.015, 2000
        start = date(2000, 1, 1)
        prices = 100.0 * np.exp(np.cumsum(rng.normal(mu, sig, n + 1)))
        s = make_series("A", start, list(prices))
        res = filter_estimate([s], start + timedelta(days=n), 1, n, 1, 0.5)
        se_mu = sig / np.sqrt(n)
        se_sig = sig / np.sqrt(2 * n)
        assert res.meanl[0] == pytest.approx(mu, abs=3 * se_mu)
        assert res.sl[0] == pytest.approx(sig, abs=3 * se_sig)

    def test_carry_forward_within_three_intervals(self):
        start = date(2020, 1, 1)
        # drop two quotes: the grid date falls back to the last available
        obs = [(start + timedelta(days=i), 10.0 + i) for i in range(21) if i not in (8, 9)]
        s = PriceSeries("A", "", 1.0, obs[::-1])
        res = filter_estimate([s], start + timedelta(days=20), 1, 20, 1, 0.5)
        assert len(res.grid) == 21

    def test_stale_gap_raises(self):
        start = date(2020, 1, 1)
        obs = [(start + timedelta(days=i), 10.0) for i in range(21) if not 5 <= i <= 11]
        s = PriceSeries("A", "", 1.0, obs[::-1])
        with pytest.raises(MissingQuote):
            filter_estimate([s], start + timedelta(days=20), 1, 20, 1, 0.5)

    def test_insufficient_samples(self):
        s = make_series("A", date(2020, 1, 1), [1.0, 2.0])
        with pytest.raises(InsufficientSamples):
            filter_estimate([s], date(2020, 1, 2), 1, 1, 1, 0.5)


class TestIndexModel:
    def test_zero_loadings_diagonal(self):
        res = index_model_moments(([0.1, 0.2], [0.01, 0.02]), np.zeros((2, 1)),
                                  ([0.05], [[0.04]]))
        assert np.allclose(res.cov, np.diag([0.01, 0.02]))
        assert np.allclose(res.er, [0.1, 0.2])

    def test_single_index_rank_one(self):
        b = np.array([[1.0], [2.0], [0.5]])
        res = index_model_moments((np.zeros(3), [0.01] * 3), b, ([0.06], [[0.09]]))
        expected = np.diag([0.01] * 3) + 0.09 * b @ b.T
        assert np.allclose(res.cov, expected, atol=1e-15)
        assert np.allclose(res.er, 0.06 * b.ravel())

    def test_diagonalized_path_matches(self):
        rng = np.random.default_rng(10)
        b = rng.normal(size=(5, 3))
        raw = rng.normal(size=(3, 3))
        cov_c = raw @ raw.T + 0.2 * np.eye(3)
        res = index_model_moments(
            (rng.normal(size=5), rng.uniform(0.01, 0.05, 5)), b,
            (rng.normal(size=3), cov_c), diagonalize=True,
        )
        rebuilt = res.cov - res.loadings_diag @ res.loadings_diag.T
        assert np.allclose(rebuilt, np.diag(np.diag(rebuilt)), atol=1e-10)
        assert np.allclose(res.loadings_diag @ res.loadings_diag.T, b @ cov_c @ b.T,
                           atol=1e-10)

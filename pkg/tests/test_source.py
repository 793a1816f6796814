import math
from fractions import Fraction

import numpy as np
import pytest

from satqkd.errors import AllZeroError, DomainError
from satqkd.extraction import AnalyticXi
from satqkd.fidelity import ChannelBudget
from satqkd.source import FockAmplitudes, SourceParams, optimize_lambda, state_coefficients


class TestSourceParams:
    def test_mu_is_twice_lambda(self):
        for lam in (0.0, 1e-4, 0.05, 0.3, 0.49):
            p = SourceParams(lambda_sq=lam, pulse_rate=1e6)
            assert p.mu == 2.0 * lam

    def test_pair_rate_formula(self):
        p = SourceParams(lambda_sq=0.1, pulse_rate=1e6)
        assert p.pair_rate == pytest.approx(1e6 * 0.2 * 0.81)

    def test_from_pair_rate_round_trip(self):
        p = SourceParams.from_pair_rate(5.9e6, 0.01, p_dark=1e-6)
        assert p.pair_rate == pytest.approx(5.9e6, rel=1e-12)

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            SourceParams(lambda_sq=1.0, pulse_rate=1e6)
        with pytest.raises(DomainError):
            SourceParams(lambda_sq=-0.1, pulse_rate=1e6)
        with pytest.raises(DomainError):
            SourceParams(lambda_sq=0.1, pulse_rate=0.0)
        with pytest.raises(DomainError):
            SourceParams(lambda_sq=0.1, pulse_rate=1e6, p_dark=1.0)


class TestStateCoefficients:
    def test_vacuum_limit(self):
        amps = state_coefficients(SourceParams(0.0, 1e6), n_max=4)
        probs = amps.manifold_probs()
        assert probs[0] == 1.0
        assert np.all(probs[1:] == 0.0)

    def test_manifold_ratio_quoted_value(self):
        # P(1)/P(2) = 2(1-lambda)/(3 lambda) = 6.0 at lambda = 0.1
        amps = state_coefficients(SourceParams(0.1, 1e6), n_max=4)
        probs = amps.manifold_probs()
        assert probs[1] / probs[2] == pytest.approx(6.0, rel=1e-12)

    def test_matches_brute_force_squeezer_expansion(self):
        # brute-force oracle: expand the two-pair-mode squeezing operator
        # (a_H+ b_V+ + a_V+ b_H+)^n / n! on vacuum with exact rational
        # combinatorics; the sqrt(n+1) manifold norm must emerge from the
        # operator algebra, not be assumed
        lam = Fraction(1, 20)  # 0.05
        x = lam / (1 - lam)    # per-pair probability ratio of the expansion
        n_max = 4
        brute = []
        for n in range(n_max + 1):
            norm_sq = sum(
                Fraction(math.comb(n, k) * math.factorial(k)
                         * math.factorial(n - k), math.factorial(n)) ** 2
                for k in range(n + 1)
            )
            brute.append((1 - lam) ** 2 * x**n * norm_sq)
        amps = state_coefficients(SourceParams(0.05, 1e6), n_max=n_max)
        probs = amps.manifold_probs()
        for n in range(n_max + 1):
            assert probs[n] == pytest.approx(float(brute[n]), abs=1e-10)

    def test_norm_converges_to_weak_pump_limit(self):
        # truncated norm approaches (1-lam)^4/(1-2 lam)^2 = 1 + O(lam^2)
        for lam in (0.05, 0.1):
            amps = state_coefficients(SourceParams(lam, 1e6), n_max=10)
            norm = amps.norm_squared()
            limit = (1 - lam) ** 4 / (1 - 2 * lam) ** 2
            assert norm <= limit
            assert limit - norm < 20.0 * lam**10
            assert abs(norm - 1.0) <= 3.0 * lam**2

    def test_two_pair_terms_equiprobable(self):
        amps = state_coefficients(SourceParams(0.1, 1e6), n_max=3)
        t2 = amps.term_amplitudes(2)
        assert t2.size == 3
        assert np.allclose(t2**2, amps.manifold_probs()[2] / 3.0)
        labels = FockAmplitudes.term_labels(2)
        assert labels == [("2H", "2V"), ("HV", "HV"), ("2V", "2H")]

    def test_requires_two_pair_truncation(self):
        with pytest.raises(DomainError):
            state_coefficients(SourceParams(0.1, 1e6), n_max=1)


class TestOptimizeLambda:
    def test_no_channel_raises_all_zero(self):
        budget = ChannelBudget(0.0, 0.0, 0.0)
        with pytest.raises(AllZeroError):
            optimize_lambda(budget, AnalyticXi(), 5.9e6)

    def test_lossless_dark_free_is_monotone_to_upper_bound(self):
        budget = ChannelBudget(1.0, 1.0, 0.0)
        lam, skr = optimize_lambda(budget, AnalyticXi(), 5.9e6)
        assert lam == pytest.approx(0.5)
        assert skr > 0

    def test_matches_dense_grid(self):
        budget = ChannelBudget(0.05, 0.05, 1e-4)
        lam_opt, skr_opt = optimize_lambda(budget, AnalyticXi(), 5.9e6)
        grid = np.geomspace(1e-4, 0.5, 200)
        model = AnalyticXi()

        def skr(l):
            from satqkd.extraction import r_final
            from satqkd.fidelity import breakdown
            p = SourceParams.from_pair_rate(5.9e6, l, budget.p_dark)
            bd = breakdown(p, budget)
            return r_final(p.pulse_rate, bd) * model.efficiency(bd.qber)

        vals = [skr(l) for l in grid]
        lam_grid = grid[int(np.argmax(vals))]
        assert lam_opt == pytest.approx(lam_grid, rel=0.02)
        assert skr_opt >= max(vals) - 1e-9 * max(vals)
        assert 1e-4 < lam_opt < 0.5  # interior at this dark-count level

    def test_more_dark_counts_never_lower_lambda(self):
        lams = []
        for pd in (1e-5, 1e-4, 1e-3):
            budget = ChannelBudget(0.05, 0.05, pd)
            lam, _ = optimize_lambda(budget, AnalyticXi(), 5.9e6)
            lams.append(lam)
        assert lams[0] <= lams[1] * (1 + 1e-9)
        assert lams[1] <= lams[2] * (1 + 1e-9)

    def test_bounds_validation(self):
        budget = ChannelBudget(0.1, 0.1, 1e-6)
        with pytest.raises(DomainError):
            optimize_lambda(budget, AnalyticXi(), 5.9e6, bounds=(0.0, 0.5))
        with pytest.raises(DomainError):
            optimize_lambda(budget, AnalyticXi(), 5.9e6, bounds=(1e-3, 0.7))

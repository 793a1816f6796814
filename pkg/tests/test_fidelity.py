import math

import numpy as np
import pytest
import sympy

from satqkd.errors import DomainError, ZeroAcceptanceError
from satqkd.fidelity import (
    DEPHASED_FIDELITY,
    ChannelBudget,
    breakdown,
    coefficients,
    fidelity,
    qber,
    sifting_factor,
    simulate_measurement_fock,
)
from satqkd.source import SourceParams


def make(lam, pta, ptb, pd):
    return (SourceParams(lambda_sq=lam, pulse_rate=1e9, p_dark=pd),
            ChannelBudget(p_ta=pta, p_tb=ptb, p_dark=pd))


def symbolic_coefficients(lam, pta, ptb, pd):
    """Independent re-implementation with exact sympy rationals."""
    l, pa, pb, d = (sympy.Rational(x) for x in (lam, pta, ptb, pd))
    qa, qb = 1 - pa, 1 - pb
    a = l * (1 - l) * pa * pb
    b = 5 * l**2 * pa * pb * qa * qb
    c = (l * (1 - l) * (pa * qb * d + pb * qa * d + qa * qb * d**2)
         + l**2 * (3 * pa * qa * qb**2 * d + 3 * pb * qb * qa**2 * d
                   + sympy.Rational(3, 2) * qa**2 * qb**2 * d**2)
         + sympy.Rational(1, 2) * (1 - l) ** 2 * d**2)
    return a, b, c


class TestCoefficients:
    def test_no_dark_counts_kill_garbage(self):
        params, budget = make(0.05, 0.3, 0.4, 0.0)
        a, b, c = coefficients(params, budget)
        assert c == 0.0
        assert a > 0 and b > 0

    def test_lossless_arms_kill_dephasing(self):
        params, budget = make(0.05, 1.0, 1.0, 1e-3)
        a, b, c = coefficients(params, budget)
        assert b == 0.0
        assert c == pytest.approx(0.5 * (1 - 0.05) ** 2 * 1e-6, rel=1e-12)

    def test_matches_symbolic_oracle(self):
        cases = [
            (0.01, 1e-3, 1e-3, 1e-6),
            (0.05, 0.3, 0.7, 1e-4),
            (0.2, 0.9, 0.1, 0.01),
        ]
        for lam, pa, pb, pd in cases:
            params, budget = make(lam, pa, pb, pd)
            got = coefficients(params, budget)
            want = symbolic_coefficients(lam, pa, pb, pd)
            for g, w in zip(got, want):
                assert g == pytest.approx(float(w), rel=1e-12)


class TestFidelityQber:
    def test_pure_target(self):
        assert fidelity(0.7, 0.0, 0.0) == 1.0

    def test_pure_dephased(self):
        assert fidelity(0.0, 0.3, 0.0) == pytest.approx(5.0 / 12.0, rel=1e-15)
        assert DEPHASED_FIDELITY == 5.0 / 12.0

    def test_pure_garbage(self):
        assert fidelity(0.0, 0.0, 0.2) == 0.0

    def test_zero_acceptance(self):
        with pytest.raises(ZeroAcceptanceError):
            fidelity(0.0, 0.0, 0.0)
        with pytest.raises(DomainError):
            fidelity(-0.1, 0.0, 0.1)

    def test_qber_values(self):
        assert qber(1.0) == 0.0
        assert qber(5.0 / 12.0) == pytest.approx(0.21875, abs=1e-15)
        assert qber(0.0) == pytest.approx(0.375, abs=1e-15)

    def test_qber_affine_monotone(self):
        fs = np.linspace(0.0, 1.0, 11)
        qs = np.array([qber(f) for f in fs])
        assert qs[0] == pytest.approx(0.375)
        assert qs[-1] == 0.0
        assert np.all(np.diff(qs) < 0)
        # affine: second differences vanish
        assert np.allclose(np.diff(qs, 2), 0.0, atol=1e-15)

    def test_qber_domain(self):
        with pytest.raises(DomainError):
            qber(1.2)

    def test_fidelity_monotone_in_dark_and_lambda(self):
        lams = np.linspace(0.005, 0.1, 5)
        pds = np.linspace(0.0, 1e-3, 5)
        for pt in (0.1, 0.5):
            for lam in lams:
                f_prev = None
                for pd in pds:
                    params, budget = make(lam, pt, pt, pd)
                    f = breakdown(params, budget).fidelity
                    if f_prev is not None:
                        assert f <= f_prev + 1e-15
                    f_prev = f
            for pd in pds:
                f_prev = None
                for lam in lams:
                    params, budget = make(lam, pt, pt, pd)
                    f = breakdown(params, budget).fidelity
                    if f_prev is not None:
                        assert f <= f_prev + 1e-15
                    f_prev = f


class TestSifting:
    def test_value(self):
        assert sifting_factor() == 0.5

    def test_partition(self):
        assert sifting_factor() + (1.0 - sifting_factor()) == 1.0

    def test_matches_fock_same_basis_fraction(self):
        # ideal Bell input: lossless, dark-free, coincidences retained in
        # the same basis half the time
        params, budget = make(0.3, 1.0, 1.0, 0.0)
        sim = simulate_measurement_fock(params, budget, trials=100_000, seed=7)
        assert abs(sim.same_basis_fraction - 0.5) <= 1e-2


class TestFockOracle:
    def test_lossless_noise_free_is_pure_bell(self):
        params, budget = make(0.01, 1.0, 1.0, 0.0)
        sim = simulate_measurement_fock(params, budget, trials=20_000, seed=11)
        assert abs(sim.fidelity - 1.0) <= 3.0 * sim.fidelity_se

    def test_matches_analytic_at_spec_point(self):
        # lambda = 0.05, symmetric half-transparent arms, no dark counts
        params, budget = make(0.05, 0.5, 0.5, 0.0)
        bd = breakdown(params, budget)
        sim = simulate_measurement_fock(params, budget, trials=10_000, seed=123)
        assert abs(sim.fidelity - bd.fidelity) <= 3.0 * sim.fidelity_se
        assert abs(sim.qber - bd.qber) <= 3.0 * sim.qber_se
        assert abs(sim.accept_prob - bd.accept_prob) <= 3.0 * sim.accept_se

    def test_reproducible_per_seed(self):
        params, budget = make(0.02, 0.4, 0.4, 1e-5)
        a = simulate_measurement_fock(params, budget, trials=20_000, seed=99)
        b = simulate_measurement_fock(params, budget, trials=20_000, seed=99)
        assert a == b

    def test_preconditions(self):
        params, budget = make(0.02, 0.4, 0.4, 0.0)
        with pytest.raises(DomainError):
            simulate_measurement_fock(params, budget, n_cutoff=1, trials=20_000)
        with pytest.raises(DomainError):
            simulate_measurement_fock(params, budget, trials=100)

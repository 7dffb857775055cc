"""Univariate phase-type representation, transforms, closure and sampling."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from ruinkit import (
    InvalidSubgenerator,
    NonStochasticInitial,
    NumericalFailure,
    PhaseTypeRep,
    dominant_eigenvalue,
    erlang,
    exponential,
    max_exit_rate,
    ph_convolve,
    ph_density,
    ph_mean,
    ph_mixture,
    ph_moment,
    ph_sample,
    ph_survival,
    ph_variance,
    validate_ph,
)
from conftest import random_rep, two_regime_reference


class TestValidation:
    def test_exponential_is_valid(self):
        validate_ph(exponential(1.0))

    def test_initial_vector_above_one(self):
        with pytest.raises(NonStochasticInitial):
            validate_ph(PhaseTypeRep([0.5, 0.6], [[-1.0, 0.0], [0.0, -1.0]]))

    def test_negative_initial_entry(self):
        with pytest.raises(NonStochasticInitial):
            validate_ph(PhaseTypeRep([1.5, -0.5], [[-1.0, 0.0], [0.0, -1.0]]))

    def test_positive_diagonal(self):
        with pytest.raises(InvalidSubgenerator):
            validate_ph(PhaseTypeRep([1.0], [[2.0]]))

    def test_negative_offdiagonal(self):
        with pytest.raises(InvalidSubgenerator):
            validate_ph(PhaseTypeRep([1.0, 0.0], [[-1.0, -0.5], [0.0, -1.0]]))

    def test_positive_row_sum(self):
        with pytest.raises(InvalidSubgenerator):
            validate_ph(PhaseTypeRep([1.0, 0.0], [[-1.0, 2.0], [0.0, -1.0]]))

    def test_recurrent_chain_rejected(self):
        # no exit anywhere: dominant eigenvalue 0, so A is singular
        with pytest.raises(InvalidSubgenerator):
            validate_ph(PhaseTypeRep([0.5, 0.5], [[-1.0, 1.0], [1.0, -1.0]]))

    def test_roundtrip_noise_clamped(self):
        rep = PhaseTypeRep([1.0 + 0.0, -1e-13], [[-1.0, -1e-13], [0.0, -1.0]])
        assert rep.alpha[1] == 0.0
        assert rep.A[0, 1] == 0.0


class TestDensitySurvival:
    def test_exponential_density(self):
        rep = exponential(2.5)
        for t in [0.0, 0.3, 1.7]:
            assert ph_density(rep, t) == pytest.approx(2.5 * math.exp(-2.5 * t), rel=1e-12)

    def test_erlang_density_closed_form(self):
        # shape 5, rate 1 at t=5: 5^4 e^-5 / 4!
        assert ph_density(erlang(5, 1.0), 5.0) == pytest.approx(5 ** 4 * math.exp(-5) / 24.0, rel=1e-10)

    def test_two_regime_first_marginal_integrates_to_one(self):
        from ruinkit import marginal_rep

        rep = marginal_rep(two_regime_reference(), 1)
        total, err = quad(lambda t: ph_density(rep, t), 0.0, 80.0, limit=200)
        assert total == pytest.approx(1.0, abs=1e-8)

    def test_survival_at_zero(self):
        for rep in [exponential(1.0), erlang(3, 2.0)]:
            assert ph_survival(rep, 0.0) == pytest.approx(1.0, abs=1e-14)

    def test_exponential_survival(self):
        assert ph_survival(exponential(0.7), 2.0) == pytest.approx(math.exp(-1.4), rel=1e-12)

    def test_erlang_survival_closed_form(self):
        # shape 2, rate 1 at t=1: (1 + 1) e^-1
        assert ph_survival(erlang(2, 1.0), 1.0) == pytest.approx(2.0 * math.exp(-1.0), rel=1e-12)


class TestMoments:
    def test_exponential_mean(self):
        assert ph_moment(exponential(1.0), 1) == pytest.approx(1.0, rel=1e-14)

    def test_erlang_second_moment(self):
        # m(m+1)/mu^2 with m=5, mu=1
        assert ph_moment(erlang(5, 1.0), 2) == pytest.approx(30.0, rel=1e-12)

    def test_two_regime_first_claim_moments(self):
        from ruinkit import marginal_rep

        rep = marginal_rep(two_regime_reference(), 1)
        assert ph_mean(rep) == pytest.approx(2.20, abs=5e-3)
        assert ph_variance(rep) == pytest.approx(5.56, abs=5e-3)


class TestClosure:
    def test_convolution_of_exponentials_is_erlang(self):
        conv = ph_convolve(exponential(2.0), exponential(2.0))
        target = erlang(2, 2.0)
        for t in np.linspace(0.0, 5.0, 21):
            assert ph_density(conv, t) == pytest.approx(ph_density(target, t), abs=1e-12)

    def test_convolution_mean_and_size_additivity(self):
        r1, r2 = random_rep(3), random_rep(4)
        out = ph_convolve(r1, r2)
        assert ph_mean(out) == pytest.approx(ph_mean(r1) + ph_mean(r2), rel=1e-10)
        assert out.dim == r1.dim + r2.dim

    def test_mixture_degenerate_weight(self):
        r1, r2 = exponential(1.0), erlang(2, 3.0)
        mix = ph_mixture(1.0, r1, r2)
        for t in [0.1, 1.0, 2.5]:
            assert ph_density(mix, t) == pytest.approx(ph_density(r1, t), abs=1e-14)

    def test_mixture_mean(self):
        mix = ph_mixture(0.7, exponential(1.0), erlang(5, 1.0))
        assert ph_mean(mix) == pytest.approx(0.7 * 1.0 + 0.3 * 5.0, rel=1e-12)

    def test_mixture_of_identical_inputs(self):
        rep = erlang(3, 1.5)
        mix = ph_mixture(0.5, rep, rep)
        for t in [0.2, 1.0, 4.0]:
            assert ph_density(mix, t) == pytest.approx(ph_density(rep, t), abs=1e-13)


class TestSpectral:
    def test_scalar(self):
        assert dominant_eigenvalue(np.array([[-3.0]])) == pytest.approx(-3.0)

    def test_erlang_triangular(self):
        assert dominant_eigenvalue(erlang(4, 2.5).A) == pytest.approx(-2.5, abs=1e-12)

    def test_two_regime_block_diagonal(self):
        A = two_regime_reference().blocks(1)[0]
        assert dominant_eigenvalue(A) == pytest.approx(-1.0, abs=1e-12)

    def test_complex_dominant_raises(self):
        M = np.array([[-1.0, 5.0], [-5.0, -1.0]])  # eigenvalues -1 +- 5i
        with pytest.raises(NumericalFailure):
            dominant_eigenvalue(M)

    def test_max_exit_rate_exponential(self):
        assert max_exit_rate(exponential(0.4).A) == pytest.approx(0.4)

    def test_max_exit_rate_erlang(self):
        # only the last stage exits
        assert max_exit_rate(erlang(6, 1.3).A) == pytest.approx(1.3)

    def test_max_exit_rate_stage_cascade(self):
        from conftest import stage_cascade_reference

        model = stage_cascade_reference()
        for k in [1, 2, 5]:
            A, _ = model.blocks(k)
            mu = 1.0 + k / (k + 1.0)
            assert max_exit_rate(A) == pytest.approx(mu, rel=1e-12)


class TestSampling:
    def test_exponential_sample_mean(self):
        rng = np.random.default_rng(101)
        draws = ph_sample(exponential(1.0), rng, size=1_000_000)
        assert abs(draws.mean() - 1.0) < 3.0 / math.sqrt(1_000_000)

    def test_erlang_sample_mean_and_variance(self):
        rng = np.random.default_rng(202)
        n = 400_000
        draws = ph_sample(erlang(5, 1.0), rng, size=n)
        assert abs(draws.mean() - 5.0) < 3.0 * math.sqrt(5.0 / n)
        # SE of the sample variance of Erlang(5,1) ~ sqrt((m4 - var^2)/n)
        assert abs(draws.var() - 5.0) < 3.0 * math.sqrt(85.0 / n)

    def test_samples_finite_positive(self):
        rng = np.random.default_rng(7)
        draws = ph_sample(random_rep(12), rng, size=2000)
        assert np.isfinite(draws).all() and (draws > 0.0).all()


@pytest.mark.parametrize("seed", [1, 2, 5, 9])
class TestInvariants:
    def test_density_integrates_to_one(self, seed):
        rep = random_rep(seed)
        total, _ = quad(lambda t: ph_density(rep, t), 0.0, 200.0, limit=300)
        assert total == pytest.approx(1.0, abs=1e-8)

    def test_survival_matches_tail_integral(self, seed):
        rep = random_rep(seed)
        for t in np.arange(0.0, 20.5, 2.5):
            tail, _ = quad(lambda x: ph_density(rep, x), t, 200.0, limit=300)
            assert ph_survival(rep, t) == pytest.approx(tail, abs=1e-8)

    def test_hazard_rate_bounded_by_max_exit(self, seed):
        rep = random_rep(seed)
        nu0 = max_exit_rate(rep.A)
        for t in np.arange(0.0, 20.5, 0.5):
            surv = ph_survival(rep, t)
            if surv < 1e-12:
                break
            assert ph_density(rep, t) / surv <= nu0 + 1e-10

    def test_exponential_erlang_envelope(self, seed):
        rep = random_rep(seed)
        nu = max_exit_rate(rep.A) * 1.1
        sigma = -dominant_eigenvalue(rep.A) * 0.9
        p = rep.dim + 1
        lo, hi = exponential(nu), erlang(p, sigma)
        for t in np.arange(0.0, 20.5, 0.5):
            s = ph_survival(rep, t)
            assert ph_survival(lo, t) <= s + 1e-10
            assert s <= ph_survival(hi, t) + 1e-10

    def test_mean_matches_quadrature(self, seed):
        rep = random_rep(seed)
        mean, _ = quad(lambda t: t * ph_density(rep, t), 0.0, 200.0, limit=300)
        assert ph_moment(rep, 1) == pytest.approx(mean, abs=1e-6)

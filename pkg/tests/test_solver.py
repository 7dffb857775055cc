"""First-passage solver: block recursions, transforms, Riccati fixed point."""

import math

import numpy as np
import pytest

from ruinkit import (
    HomogeneousLadder,
    MphModel,
    RuinQuery,
    build_environment,
    build_ph_arrival,
    build_poisson,
    erlang,
    exponential,
    is_psi_stochastic,
    phi_blocks,
    psi_blocks_general,
    psi_blocks_poisson,
    riccati_psi_hat,
    ruin_prob_by_claims,
    ruin_transform,
    solve_workspace,
    stationary_transform,
    transform_curve_in_s,
    transform_curve_in_u,
    u_blocks,
    ultimate_ruin,
)
from ruinkit.errors import TruncationLimit

def scalar_model(rate=1.0):
    rep = exponential(rate)
    return MphModel.stationary(rep.alpha, rep.A, np.outer(rep.exit_rates, rep.alpha))


def scalar_blocks(lam=1.0, c=1.0, rate=1.0):
    return build_poisson(scalar_model(rate), lam, c)


class TestPsiBlocks:
    def test_scalar_diagonal_closed_form(self):
        ws = psi_blocks_poisson(scalar_blocks(1.0, 1.0, 1.0), 0.0, 4)
        for k in range(1, 5):
            assert ws.psi(k, k)[0, 0] == pytest.approx(0.5, rel=1e-12)

    def test_large_discount_kills_mass(self, ex2_model):
        ws = psi_blocks_poisson(build_poisson(ex2_model, 1.0, 1.5), 1e6, 4)
        for k in range(1, 5):
            for ell in range(k, 5):
                assert np.max(ws.psi(k, ell)) < 1e-5

    def test_stationary_sum_approaches_classical_value(self):
        # positive drift: the total first-return mass is lam/(c * rate)
        ladder = HomogeneousLadder(scalar_blocks(1.0, 2.0, 1.0), 0.0)
        ladder.extend(400)
        total = sum(ladder.band(h)[0, 0] for h in range(400))
        assert total == pytest.approx(0.5, abs=1e-8)

    def test_nonnegative_and_substochastic(self, ex2_model):
        ws = psi_blocks_poisson(build_poisson(ex2_model, 1.0, 1.5), 0.0, 30)
        assert ws.psi_big.min() >= 0.0
        assert ws.psi_big.sum(axis=1).max() <= 1.0 + 1e-10


class TestUBlocks:
    def test_diagonal_equals_claim_generator(self, ex2_model):
        blocks = build_poisson(ex2_model, 1.0, 1.5)
        ws = psi_blocks_poisson(blocks, 0.0, 5)
        for k in [1, 3, 5]:
            assert np.array_equal(ws.u_block(k, k), blocks.at(k)[3])

    def test_scalar_first_band(self):
        ws = psi_blocks_poisson(scalar_blocks(1.0, 1.0, 1.0), 0.0, 3)
        # transfer rate 1 into a half-mass return block
        assert ws.u_block(1, 2)[0, 0] == pytest.approx(0.5, rel=1e-12)

    def test_offdiagonal_nonnegative(self, ex2_model):
        ws = psi_blocks_poisson(build_poisson(ex2_model, 1.0, 1.5), 0.1, 12)
        for (k, ell), blk in u_blocks(ws).items():
            if k != ell:
                assert blk.min() >= 0.0

    def test_certain_ruin_rows_close(self):
        # negative drift: first-return mass is stochastic, so U rows sum to 0
        ladder = HomogeneousLadder(scalar_blocks(1.0, 0.8, 1.0), 0.0)
        ladder.extend(3000)
        total = sum(ladder.band(h)[0, 0] for h in range(3000))
        assert (-1.0 + 1.0 * total) == pytest.approx(0.0, abs=1e-4)


class TestEngineEquivalence:
    def test_general_matches_poisson_two_regime(self, ex2_model):
        blocks = build_poisson(ex2_model, 1.0, 1.5)
        for theta in [0.0, 0.3]:
            a = psi_blocks_poisson(blocks, theta, 10)
            b = psi_blocks_general(blocks, theta, 10)
            assert np.max(np.abs(a.psi_big - b.psi_big)) < 1e-10

    def test_one_state_environment_matches_poisson(self, ex2_model):
        env = build_environment(ex2_model, [[0.0]], [1.0], [1.0], [1.5])
        poi = build_poisson(ex2_model, 1.0, 1.5)
        a = psi_blocks_general(env, 0.0, 8)
        b = psi_blocks_poisson(poi, 0.0, 8)
        assert np.max(np.abs(a.psi_big - b.psi_big)) < 1e-10

    def test_exponential_arrival_matches_poisson(self, ex2_model):
        pha = build_ph_arrival(ex2_model, exponential(1.0), 1.5)
        poi = build_poisson(ex2_model, 1.0, 1.5)
        a = psi_blocks_general(pha, 0.2, 8)
        b = psi_blocks_poisson(poi, 0.2, 8)
        assert np.max(np.abs(a.psi_big - b.psi_big)) < 1e-10


class TestPhiBlocks:
    def test_zero_level_is_identity(self, ex2_model):
        ws = psi_blocks_poisson(build_poisson(ex2_model, 1.0, 1.5), 0.0, 4)
        blocks = phi_blocks(ws, 0.0)
        for k in range(1, 5):
            assert np.allclose(blocks[(k, k)], np.eye(6), atol=1e-14)
            for ell in range(k + 1, 5):
                assert np.max(np.abs(blocks[(k, ell)])) < 1e-14

    def test_truncation_stability(self, ex2_model):
        fb = build_poisson(ex2_model, 1.0, 1.5)
        small = phi_blocks(psi_blocks_poisson(fb, 0.0, 6), 2.0)
        large = phi_blocks(psi_blocks_poisson(fb, 0.0, 8), 2.0)
        for k in range(1, 7):
            for ell in range(k, 7):
                assert np.max(np.abs(small[(k, ell)] - large[(k, ell)])) < 1e-12

    def test_scalar_stationary_diagonal(self):
        ws = psi_blocks_poisson(scalar_blocks(1.0, 2.0, 1.0), 0.0, 3)
        for u in [0.5, 2.0]:
            blocks = phi_blocks(ws, u)
            assert blocks[(1, 1)][0, 0] == pytest.approx(math.exp(-u), rel=1e-12)


class TestRuinTransform:
    def test_classical_zero_reserve(self):
        value = ruin_transform(scalar_blocks(1.0, 2.0, 1.0), RuinQuery(u=0.0, s=400))
        assert value == pytest.approx(0.5, abs=1e-6)

    def test_unreachable_deficit_threshold(self, ex2_model):
        blocks = build_poisson(ex2_model, 1.0, 1.5)
        value = ruin_transform(blocks, RuinQuery(u=0.0, s=50, y=1e6))
        assert value < 1e-6

    def test_monotone_in_truncation(self, ex2_model):
        blocks = build_poisson(ex2_model, 1.0, 1.5)
        v1 = ruin_transform(blocks, RuinQuery(u=1.0, s=1))
        v2 = ruin_transform(blocks, RuinQuery(u=1.0, s=2))
        v40 = ruin_transform(blocks, RuinQuery(u=1.0, s=40))
        assert v1 <= v2 <= v40

    def test_monotone_in_parameters(self, ex2_model):
        blocks = build_poisson(ex2_model, 1.0, 1.5)
        for us in [np.array([0.0, 1.0, 3.0, 8.0])]:
            vals = [ruin_transform(blocks, RuinQuery(u=u, s=40)) for u in us]
            assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))
        thetas = [0.0, 0.1, 1.0, 10.0]
        vals = [ruin_transform(blocks, RuinQuery(u=1.0, theta=t, s=40)) for t in thetas]
        assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))
        ys = [0.0, 0.5, 2.0, 10.0]
        vals = [ruin_transform(blocks, RuinQuery(u=1.0, s=40, y=y)) for y in ys]
        assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))

    def test_large_discount_limit(self, ex2_model):
        blocks = build_poisson(ex2_model, 1.0, 1.5)
        assert ruin_transform(blocks, RuinQuery(u=0.0, theta=1e6, s=30)) < 1e-5

    def test_query_validation(self):
        with pytest.raises(ValueError):
            RuinQuery(u=-1.0)
        with pytest.raises(ValueError):
            RuinQuery(u=0.0, s=0)

    def test_ladder_matches_workspace_on_stationary(self):
        rep = erlang(2, 1.0)
        model = MphModel.stationary(rep.alpha, rep.A, np.outer(rep.exit_rates, rep.alpha))
        blocks = build_poisson(model, 1.0, 3.0)
        for (u, th, y) in [(0.0, 0.0, 0.0), (1.5, 0.2, 0.7)]:
            ladder_val = ruin_transform(blocks, RuinQuery(u=u, theta=th, s=60, y=y))
            ws = solve_workspace(blocks, th, 60)
            assert ladder_val == pytest.approx(ws.value(u, y), abs=1e-12)


class TestRuinProbability:
    def test_huge_reserve_light_tail(self):
        assert ruin_prob_by_claims(scalar_blocks(1.0, 2.0, 1.0), 1000.0, 64) < 1e-6

    def test_two_regime_truncation_convergence(self, ex2_model):
        # the interesting-model variant of the fixed-s comparison
        blocks = build_poisson(ex2_model, 1.0, 1.5)
        p100 = ruin_prob_by_claims(blocks, 0.0, 100)
        p200 = ruin_prob_by_claims(blocks, 0.0, 200)
        assert 0.0 <= p100 <= p200 <= 1.0
        assert p200 - p100 < 5e-3


class TestUltimateRuin:
    def test_classical_exponential_formula(self):
        value, s = ultimate_ruin(scalar_blocks(1.0, 2.0, 1.0), 1.0, tol=1e-6)
        assert value == pytest.approx(0.5 * math.exp(-0.5), abs=1e-6)

    def test_negative_drift_certain(self):
        value, _ = ultimate_ruin(scalar_blocks(1.0, 0.7, 1.0), 2.0, tol=1e-6)
        assert value == pytest.approx(1.0, abs=1e-6)

    def test_stationary_cascade_certain_at_low_premium(self, ex3_stationary):
        blocks = build_poisson(ex3_stationary, 1.0, 3.0)
        value, _ = ultimate_ruin(blocks, 0.0, tol=1e-6)
        assert value == pytest.approx(1.0, abs=1e-6)

    def test_truncation_cap_raises(self):
        # zero drift: convergence in s is too slow for a tiny cap
        with pytest.raises(TruncationLimit):
            ultimate_ruin(scalar_blocks(1.0, 1.0, 1.0), 0.0, tol=1e-9, s_cap=128)


class TestRiccati:
    def test_scalar_positive_drift_root(self):
        z = riccati_psi_hat(np.array([[-1.0]]), np.array([[1.0]]), 1.0, 1.5, tol=1e-13)
        assert z[0, 0] == pytest.approx(2.0 / 3.0, abs=1e-10)
        # default tolerance still meets the documented residual contract
        z_default = riccati_psi_hat(np.array([[-1.0]]), np.array([[1.0]]), 1.0, 1.5)
        assert z_default[0, 0] == pytest.approx(2.0 / 3.0, abs=1e-8)

    def test_scalar_negative_drift_stochastic(self):
        z = riccati_psi_hat(np.array([[-1.0]]), np.array([[1.0]]), 1.0, 0.5)
        assert z[0, 0] == pytest.approx(1.0, abs=1e-8)

    def test_matches_band_sum(self):
        rep = erlang(2, 1.0)
        D = np.outer(rep.exit_rates, rep.alpha)
        for theta in [0.0, 0.1]:
            z = riccati_psi_hat(rep.A, D, 1.0, 3.0, theta=theta)
            blocks = build_poisson(
                MphModel.stationary(rep.alpha, rep.A, D), 1.0, 3.0)
            ladder = HomogeneousLadder(blocks, theta)
            ladder.extend(400)
            total = sum(ladder.band(h) for h in range(400))
            assert np.max(np.abs(z - total)) < 1e-8

    def test_residual_small(self, ex3_stationary):
        A, D = ex3_stationary.blocks(1)
        for c in [3.0, 4.5]:
            z = riccati_psi_hat(A, D, 1.0, c, tol=1e-10)
            resid = (1.0 / c) * np.eye(10) + z @ (A - (1.0 / c) * np.eye(10)) + z @ D @ z
            assert np.max(np.abs(resid)) < 1e-9


class TestStationaryTransform:
    def test_classical_zero_reserve(self):
        value = stationary_transform(np.array([[-1.0]]), np.array([[1.0]]), [1.0], 1.0, 2.0, 0.0, tol=1e-13)
        assert value == pytest.approx(0.5, abs=1e-10)

    def test_agrees_with_truncated_transform(self):
        rep = erlang(2, 1.0)
        D = np.outer(rep.exit_rates, rep.alpha)
        model = MphModel.stationary(rep.alpha, rep.A, D)
        blocks = build_poisson(model, 1.0, 3.0)
        exact = stationary_transform(rep.A, D, rep.alpha, 1.0, 3.0, 1.0)
        truncated = ruin_transform(blocks, RuinQuery(u=1.0, s=500))
        assert abs(exact - truncated) < 1e-6

    def test_deficit_threshold_vanishes(self):
        value = stationary_transform(np.array([[-1.0]]), np.array([[1.0]]), [1.0], 1.0, 2.0, 0.0, y=50.0)
        assert value < 1e-6


class TestStochasticityCheck:
    def test_scalar_positive_drift_not_stochastic(self):
        z = riccati_psi_hat(np.array([[-1.0]]), np.array([[1.0]]), 1.0, 2.0, tol=1e-13)
        assert not is_psi_stochastic(z)
        assert z[0, 0] == pytest.approx(0.5, abs=1e-10)

    def test_cascade_boundary(self, ex3_stationary):
        # drift boundary sits at the long-run mean claim, about 3.3508
        A, D = ex3_stationary.blocks(1)
        assert is_psi_stochastic(riccati_psi_hat(A, D, 1.0, 3.0, tol=1e-11), tol=1e-8)
        assert is_psi_stochastic(riccati_psi_hat(A, D, 1.0, 3.3, tol=1e-11), tol=1e-7)
        assert not is_psi_stochastic(riccati_psi_hat(A, D, 1.0, 3.5), tol=1e-8)
        assert not is_psi_stochastic(riccati_psi_hat(A, D, 1.0, 4.5), tol=1e-8)


class TestCurves:
    def test_u_curve_matches_pointwise(self, ex2_model):
        blocks = build_poisson(ex2_model, 1.0, 1.5)
        us = np.array([0.0, 2.0, 4.0, 6.0])
        curve = transform_curve_in_u(blocks, 0.0, 40, 0.0, us)
        for u, v in zip(us, curve):
            assert v == pytest.approx(ruin_transform(blocks, RuinQuery(u=u, s=40)), abs=1e-9)

    def test_s_curve_matches_pointwise(self, ex2_model):
        blocks = build_poisson(ex2_model, 1.0, 1.5)
        svals = [5, 10, 20, 40]
        curve = transform_curve_in_s(blocks, 0.0, 1.0, 0.0, svals)
        for s, v in zip(svals, curve):
            assert v == pytest.approx(ruin_transform(blocks, RuinQuery(u=1.0, s=s)), abs=1e-10)

    def test_nonuniform_u_grid(self, ex2_model):
        blocks = build_poisson(ex2_model, 1.0, 1.5)
        us = np.array([0.5, 1.0, 4.0])
        curve = transform_curve_in_u(blocks, 0.0, 30, 0.0, us)
        for u, v in zip(us, curve):
            assert v == pytest.approx(ruin_transform(blocks, RuinQuery(u=u, s=30)), abs=1e-9)

import numpy as np
import pytest
from poolgame.model import Action, AttackKind, DegenerateDenominator
from poolgame.payoff import (
    one_sided_attacker,
    one_sided_victim,
    optimal_bwh_infiltration,
    optimal_faw_infiltration,
    payoff_pair,
    payoff_pair_raw,
    simulate_rounds,
)


def closure_residuals(a1, a2, act1: Action, act2: Action, u1, u2):
    """Substitute payoffs back into the four per-case reward-density equations,
    written out longhand as the independent check of the linear-system solve."""
    ext = 1.0 - a1 - a2

    def rhs(alpha_own, own, alpha_opp, opp, u_opp):
        f_i, b_i = own.faw, own.bwh
        f_o, b_o = opp.faw, opp.bwh
        den = alpha_own + f_o + b_o
        if b_i == 0.0 and b_o == 0.0:  # both FAW (covers no-attack)
            d = (alpha_own - f_i) / ((1 - f_i - f_o) * den)
            if f_o > 0:
                d += f_o * ext / ((1 - f_o) * den)
            if f_i > 0 and f_o > 0:
                d += (f_i * f_o / 2) * (1 / (1 - f_i) + 1 / (1 - f_o)) * ext / (
                    (1 - f_i - f_o) * den
                )
            return d + (u_opp + 1) * f_i / den - 1
        if b_i == 0.0 and f_o == 0.0:  # own FAW vs opponent BWH
            return (alpha_own - f_i) / ((1 - f_i - b_o) * den) + (u_opp + 1) * f_i / den - 1
        if f_i == 0.0 and b_o == 0.0:  # own BWH vs opponent FAW
            d = (alpha_own - b_i) / ((1 - b_i - f_o) * den)
            d += (f_o / (1 - b_i)) * ext / ((1 - b_i - f_o) * den)
            return d + (u_opp + 1) * b_i / den - 1
        return (alpha_own - b_i) / ((1 - b_i - b_o) * den) + (u_opp + 1) * b_i / den - 1

    return u1 - rhs(a1, act1, a2, act2, u2), u2 - rhs(a2, act2, a1, act1, u1)


def random_profile(rng):
    a1 = rng.uniform(0.02, 0.5)
    a2 = rng.uniform(0.02, min(0.5, 0.9 - a1))
    acts = []
    for alpha in (a1, a2):
        kind = rng.integers(3)
        x = rng.uniform(0, alpha * 0.95)
        acts.append(
            Action() if kind == 0 else Action(x, 0.0) if kind == 1 else Action(0.0, x)
        )
    return a1, a2, acts[0], acts[1]


class TestPayoffPair:
    def test_no_attack_is_zero(self):
        u = payoff_pair(0.2, 0.2, Action(), Action())
        assert u.u_i == 0.0 and u.u_j == 0.0

    def test_closed_pool_like_one_sided_attack(self):
        # small pool optimally FAW-attacks a 25% pool: +0.74% vs -0.09%
        f = optimal_faw_infiltration(0.031, 0.25)
        u = payoff_pair(0.031, 0.25, Action(f, 0.0), Action())
        assert u.u_i == pytest.approx(0.0074, abs=2e-4)
        assert u.u_j == pytest.approx(-0.0009, abs=2e-4)

    def test_closure_on_random_profiles(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            a1, a2, act1, act2 = random_profile(rng)
            u = payoff_pair(a1, a2, act1, act2)
            r1, r2 = closure_residuals(a1, a2, act1, act2, u.u_i, u.u_j)
            assert abs(r1) < 1e-9 and abs(r2) < 1e-9

    def test_symmetry_under_equal_faw(self):
        for x in np.linspace(0.0, 0.19, 8):
            u = payoff_pair(0.2, 0.2, Action(x, 0.0), Action(x, 0.0))
            assert u.u_i == pytest.approx(u.u_j, abs=1e-12)

    def test_faw_dominates_bwh_for_attacker(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            a1 = rng.uniform(0.02, 0.5)
            a2 = rng.uniform(0.02, min(0.5, 0.9 - a1))
            x = rng.uniform(0.0, a1)
            u_faw = payoff_pair(a1, a2, Action(x, 0.0), Action()).u_i
            u_bwh = payoff_pair(a1, a2, Action(0.0, x), Action()).u_i
            assert u_faw >= u_bwh - 1e-12

    def test_degenerate_denominator(self):
        with pytest.raises(DegenerateDenominator):
            payoff_pair_raw(0.5, 0.5, 0.5, 0.0, 0.5, 0.0)

    def test_one_sided_helpers_match_pair(self):
        for kind, act in ((AttackKind.FAW, Action(0.06, 0)), (AttackKind.BWH, Action(0, 0.06))):
            u = payoff_pair(0.22, 0.18, act, Action())
            assert one_sided_attacker(kind, 0.22, 0.18, 0.06) == pytest.approx(u.u_i, abs=1e-12)
            assert one_sided_victim(kind, 0.22, 0.18, 0.06) == pytest.approx(u.u_j, abs=1e-12)


class TestOptimalInfiltration:
    def test_grid_argmax_agreement(self):
        # closed forms vs a dense grid argmax over a power grid
        powers = np.linspace(0.03, 0.45, 20)
        grid_err_f = grid_err_b = 0.0
        for a1 in powers:
            for a2 in powers:
                if a1 + a2 > 0.9:
                    continue
                fg = np.linspace(0.0, a1, 4001)
                best_f = fg[np.argmax(one_sided_attacker(AttackKind.FAW, a1, a2, fg))]
                best_b = fg[np.argmax(one_sided_attacker(AttackKind.BWH, a1, a2, fg))]
                grid_err_f = max(grid_err_f, abs(optimal_faw_infiltration(a1, a2) - best_f))
                grid_err_b = max(grid_err_b, abs(optimal_bwh_infiltration(a1, a2) - best_b))
        assert grid_err_f < 1e-3 and grid_err_b < 1e-3

    def test_symmetric_bwh_optimum_matches_across_roles(self):
        assert optimal_bwh_infiltration(0.2, 0.2) == pytest.approx(
            optimal_bwh_infiltration(0.2, 0.2)
        )

    def test_small_victim_continuity(self):
        m = optimal_faw_infiltration(0.2, 0.001)
        fg = np.linspace(0.0, 0.2, 200001)
        best = fg[np.argmax(one_sided_attacker(AttackKind.FAW, 0.2, 0.001, fg))]
        assert m == pytest.approx(best, abs=1e-3)
        assert m < 0.02  # shrinks with the victim

    def test_table_setup_interior(self):
        # frozen from an independent 400k-point grid argmax of the one-sided payoffs
        assert optimal_faw_infiltration(0.25, 0.15) == pytest.approx(0.10355, abs=1e-5)
        assert optimal_bwh_infiltration(0.25, 0.15) == pytest.approx(0.02352, abs=1e-5)
        for fn in (optimal_faw_infiltration, optimal_bwh_infiltration):
            assert 0.0 < fn(0.25, 0.15) < 0.25


class TestSimulateRounds:
    def test_no_attack_near_zero(self):
        res = simulate_rounds(0.2, 0.2, Action(), Action(), rounds=200_000, seed=0)
        assert abs(res.u_i) <= 3 * max(res.stderr_i, 1e-12)
        assert abs(res.u_j) <= 3 * max(res.stderr_j, 1e-12)

    def test_bwh_victim_block_share(self):
        # 20% victim hosting 0.5% withholding power finds 0.2/0.995 of blocks
        res = simulate_rounds(0.2, 0.2, Action(0.0, 0.005), Action(), rounds=500_000, seed=3)
        expected = 0.2 / 0.995
        se = np.sqrt(expected * (1 - expected) / res.rounds)
        assert res.block_share_j == pytest.approx(expected, abs=4 * se)

    def test_agrees_with_exact_payoffs(self):
        rng = np.random.default_rng(7)
        for _ in range(8):
            a1, a2, act1, act2 = random_profile(rng)
            u = payoff_pair(a1, a2, act1, act2)
            res = simulate_rounds(a1, a2, act1, act2, rounds=150_000, seed=int(rng.integers(1 << 31)))
            assert abs(res.u_i - u.u_i) < 3 * max(res.stderr_i, 1e-9)
            assert abs(res.u_j - u.u_j) < 3 * max(res.stderr_j, 1e-9)

    def test_deterministic_for_seed(self):
        r1 = simulate_rounds(0.3, 0.2, Action(0.1, 0), Action(0, 0.05), rounds=50_000, seed=11)
        r2 = simulate_rounds(0.3, 0.2, Action(0.1, 0), Action(0, 0.05), rounds=50_000, seed=11)
        assert r1 == r2

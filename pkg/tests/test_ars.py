import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from poolgame.model import Action, AttackKind, Standing, ZERO_ACTION
from poolgame.ars import (
    ArsState,
    RetaliationContext,
    ars_step,
    infiltration_set_bwh,
    infiltration_set_faw,
    initial_state,
    retaliate,
)
from poolgame.payoff import (
    one_sided_victim,
    optimal_bwh_infiltration,
    optimal_faw_infiltration,
    payoff_pair,
)

K = 0.999


def punished_state(opp_action: Action, k=K) -> ArsState:
    """State at the stage after the opponent deviated from mutual cooperation."""
    return ArsState(
        k=k,
        last_own_action=ZERO_ACTION,
        last_own_prescribed=ZERO_ACTION,
        last_opp_action=opp_action,
        last_opp_prescribed=ZERO_ACTION,
    )


class TestArsStep:
    def test_start_cooperates(self):
        action, state = ars_step(initial_state(K), 0.2, 0.2)
        assert action.is_zero
        assert state.own_standing is Standing.GOOD

    def test_retaliates_after_opponent_deviation(self):
        # AntPool-sized pool punishing a 25% pool's optimal FAW deviation
        f_star = optimal_faw_infiltration(0.25, 0.15)
        action, state = ars_step(punished_state(Action(f_star, 0.0)), 0.15, 0.25)
        assert state.opp_standing is Standing.BAD
        assert action.kind is AttackKind.BWH
        assert 100 * action.bwh / 0.15 == pytest.approx(14.33, abs=0.5)

    def test_mutual_deviation_resets_to_cooperation(self):
        st0 = ArsState(
            k=K,
            last_own_action=Action(0.01, 0),
            last_own_prescribed=ZERO_ACTION,
            last_opp_action=Action(0.02, 0),
            last_opp_prescribed=ZERO_ACTION,
        )
        action, st1 = ars_step(st0, 0.2, 0.2)
        assert action.is_zero
        assert st1.own_standing is Standing.BAD and st1.opp_standing is Standing.BAD
        action2, st2 = ars_step(st1.with_observed(ZERO_ACTION, ZERO_ACTION), 0.2, 0.2)
        assert action2.is_zero
        assert st2.own_standing is Standing.GOOD and st2.opp_standing is Standing.GOOD

    def test_state_diagram_transitions(self):
        # from mutual cooperation, each class of action pair moves standings
        # to the matching state at the next step
        rt = Action(0.0, 0.01)
        cases = [
            ((ZERO_ACTION, ZERO_ACTION), (Standing.GOOD, Standing.GOOD)),
            ((ZERO_ACTION, Action(0.05, 0)), (Standing.GOOD, Standing.BAD)),
            ((Action(0.05, 0), ZERO_ACTION), (Standing.BAD, Standing.GOOD)),
            ((Action(0.05, 0), rt), (Standing.BAD, Standing.BAD)),
        ]
        for (own, opp), expected in cases:
            _, st0 = ars_step(initial_state(K), 0.2, 0.2)
            _, st1 = ars_step(st0.with_observed(own, opp), 0.2, 0.2)
            assert (st1.own_standing, st1.opp_standing) == expected


class TestInfiltrationSets:
    def test_no_payoff_deviation_includes_zero(self):
        # the opponent's action changed nothing relative to its prescription:
        # zero retaliation qualifies, so Retaliate can stand down
        ctx = RetaliationContext(ZERO_ACTION, ZERO_ACTION, ZERO_ACTION)
        s = infiltration_set_faw(ctx, 0.2, 0.2, K)
        assert 0.0 in s.members
        r = retaliate(0.2, ZERO_ACTION, 0.2, ZERO_ACTION, ZERO_ACTION, K)
        assert r.is_zero

    def test_skipped_retaliation_keeps_zero(self):
        # opponent was prescribed a profitable retaliation but played nothing
        prescribed = Action(optimal_faw_infiltration(0.2, 0.2), 0.0)
        ctx = RetaliationContext(ZERO_ACTION, ZERO_ACTION, prescribed)
        s = infiltration_set_faw(ctx, 0.2, 0.2, K)
        assert not s.empty and s.members[0] == 0.0

    def test_faw_set_empty_for_small_victim_large_attacker(self):
        f_star = optimal_faw_infiltration(0.45, 0.05)
        ctx = RetaliationContext(ZERO_ACTION, Action(f_star, 0.0), ZERO_ACTION)
        assert infiltration_set_faw(ctx, 0.05, 0.45, K).empty
        assert not infiltration_set_bwh(ctx, 0.05, 0.45).empty

    def test_bwh_emptiness_raises_at_undeterrable_corner(self):
        # a 0.37 pool cannot out-damage the gain a half-network opponent grabs
        # by counterattacking mid-punishment; the guarantee violation is loud
        from poolgame.model import EmptySetUnexpected

        ctx = RetaliationContext(
            own_prev=Action(0.37, 0.0),
            opp_prev=Action(0.3176, 0.0),
            opp_prescribed=ZERO_ACTION,
        )
        with pytest.raises(EmptySetUnexpected):
            infiltration_set_bwh(ctx, 0.37, 0.5)

    def test_members_satisfy_defining_inequality(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            a_own = rng.uniform(0.05, 0.45)
            a_opp = rng.uniform(0.05, min(0.45, 0.9 - a_own))
            dev = Action(rng.uniform(0, a_opp), 0.0)
            ctx = RetaliationContext(ZERO_ACTION, dev, ZERO_ACTION)
            u_actual = payoff_pair(a_own, a_opp, ZERO_ACTION, dev).u_j
            u_presc = payoff_pair(a_own, a_opp, ZERO_ACTION, ZERO_ACTION).u_j
            s = infiltration_set_faw(ctx, a_own, a_opp, K)
            for f in s.members[:: max(1, s.members.size // 10)]:
                u_r = payoff_pair(a_own, a_opp, Action(f, 0), ZERO_ACTION).u_j
                assert u_actual + K * u_r < u_presc
            s = infiltration_set_bwh(ctx, a_own, a_opp)
            for b in s.members[:: max(1, s.members.size // 10)]:
                u_r = payoff_pair(a_own, a_opp, Action(0, b), ZERO_ACTION).u_j
                assert u_actual + u_r < u_presc


class TestRetaliate:
    def test_forgives_skipped_retaliation(self):
        prescribed = Action(optimal_faw_infiltration(0.2, 0.2), 0.0)
        r = retaliate(0.2, ZERO_ACTION, 0.2, ZERO_ACTION, prescribed, K)
        assert r.is_zero

    def test_small_pool_faw_retaliation_ratio(self):
        # 10% pool vs a 25% pool's optimal BWH deviation: 47.2% FAW retaliation
        b_star = optimal_bwh_infiltration(0.25, 0.10)
        r = retaliate(0.10, ZERO_ACTION, 0.25, Action(0.0, b_star), ZERO_ACTION, K)
        assert r.kind is AttackKind.FAW
        assert 100 * r.faw / 0.10 == pytest.approx(47.2, abs=0.5)

    def test_tiny_pool_bwh_retaliation_ratio(self):
        # 2% pool vs a 25% pool's optimal FAW deviation: 21% BWH retaliation
        f_star = optimal_faw_infiltration(0.25, 0.02)
        r = retaliate(0.02, ZERO_ACTION, 0.25, Action(f_star, 0.0), ZERO_ACTION, K)
        assert r.kind is AttackKind.BWH
        assert 100 * r.bwh / 0.02 == pytest.approx(21.0, abs=0.5)

    def test_credibility_deviation_plus_punishment_is_a_loss(self):
        rng = np.random.default_rng(9)
        for _ in range(40):
            a_own = rng.uniform(0.05, 0.45)
            a_opp = rng.uniform(0.05, min(0.45, 0.9 - a_own))
            x = rng.uniform(1e-3, a_opp)
            dev = Action(x, 0.0) if rng.integers(2) else Action(0.0, x)
            r = retaliate(a_own, ZERO_ACTION, a_opp, dev, ZERO_ACTION, K)
            gain = payoff_pair(a_own, a_opp, ZERO_ACTION, dev).u_j
            punished = payoff_pair(a_own, a_opp, r, ZERO_ACTION).u_j
            if r.is_zero:
                assert gain <= 1e-12  # nothing worth punishing
            else:
                coef = K if r.kind is AttackKind.FAW else 1.0
                assert gain + coef * punished < 0

    @given(
        a_own=st.floats(0.05, 0.45),
        a_opp=st.floats(0.05, 0.45),
        ratio=st.floats(0.01, 1.0),
        bwh=st.booleans(),
    )
    @settings(max_examples=60, deadline=None)
    def test_output_is_a_valid_action(self, a_own, a_opp, ratio, bwh):
        if a_own + a_opp > 0.9:
            return
        x = ratio * a_opp
        dev = Action(0.0, x) if bwh else Action(x, 0.0)
        r = retaliate(a_own, ZERO_ACTION, a_opp, dev, ZERO_ACTION, K)
        assert r.faw >= 0.0 and r.bwh >= 0.0 and r.faw * r.bwh == 0.0
        assert r.power <= a_own + 1e-12

    def test_deterministic(self):
        dev = Action(0.08, 0.0)
        r1 = retaliate(0.2, ZERO_ACTION, 0.25, dev, ZERO_ACTION, 0.5)
        r2 = retaliate(0.2, ZERO_ACTION, 0.25, dev, ZERO_ACTION, 0.5)
        assert r1 == r2

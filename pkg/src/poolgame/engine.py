"""Repeated-game execution, deviation scenarios, sweeps, and the n-pool game.

Two-pool histories are produced by stepping per-pool strategies with full
last-stage observability and recording exact stage payoffs. The n-pool game
keeps per-ordered-pair retaliation bookkeeping; its stage payoffs come from
the same event model as the two-pool simulator, generalized to n parties.
The n-pool expectation is computed in closed form by enumerating withheld-block
states (the Monte-Carlo path samples the identical process and reports a
standard error), and the two-pool closed form is its reduction oracle.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .model import (
    Action,
    AttackKind,
    GameConfig,
    InfiltrationBudgetExceeded,
    InvalidScenario,
    ZERO_ACTION,
    validate_action,
)
from .payoff import (
    StagePayoffs,
    one_sided_attacker,
    one_sided_victim,
    optimal_faw_infiltration,
    optimal_infiltration,
    payoff_pair,
)
from .ars import ArsState, ars_step, initial_state, retaliate
from .equilibrium import golden_max

DEFAULT_K_NEAR_ONE = 0.999  # realizes "preference weight just under 1"


# ---------------------------------------------------------------------------
# Strategies
# ---------------------------------------------------------------------------


@dataclass
class ArsAgent:
    """Follows the adaptive retaliation strategy with preference weight k."""

    k: float = DEFAULT_K_NEAR_ONE

    def pick(self, stage: int, prescribed: Action, alpha_own, alpha_opp) -> Action:
        return prescribed


@dataclass
class ScriptedDeviator:
    """Plays fixed override actions at chosen stages, the strategy's
    prescription otherwise."""

    overrides: dict[int, Action]
    k: float = DEFAULT_K_NEAR_ONE

    def pick(self, stage, prescribed, alpha_own, alpha_opp):
        return self.overrides.get(stage, prescribed)


@dataclass
class OptimalOneShotAttacker:
    """Deviates once with the payoff-maximizing one-sided attack, then falls
    back to the cooperative strategy (contrite)."""

    kind: AttackKind
    stage: int = 0
    k: float = DEFAULT_K_NEAR_ONE

    def pick(self, stage, prescribed, alpha_own, alpha_opp):
        if stage == self.stage:
            return Action.of(self.kind, optimal_infiltration(self.kind, alpha_own, alpha_opp))
        return prescribed


@dataclass
class AlwaysHonest:
    """Never attacks, never retaliates."""

    k: float = DEFAULT_K_NEAR_ONE

    def pick(self, stage, prescribed, alpha_own, alpha_opp):
        return ZERO_ACTION


Strategy = ArsAgent | ScriptedDeviator | OptimalOneShotAttacker | AlwaysHonest


# ---------------------------------------------------------------------------
# Histories
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StageRecord:
    stage: int
    # per-pool Actions for the two-pool game; (PairwiseActionMatrix,) for n pools
    actions: tuple
    payoffs: tuple[float, ...]


@dataclass(frozen=True)
class History:
    records: tuple[StageRecord, ...]
    discount: float

    def payoff_stream(self, pool: int) -> list[float]:
        return [r.payoffs[pool] for r in self.records]


def discounted_payoff(history: History, pool: int) -> float:
    """Discounted sum of the pool's stage payoffs, first stage undiscounted."""
    if not history.records:
        raise InvalidScenario("history is empty")
    d = history.discount
    return float(sum(r.payoffs[pool] * d**i for i, r in enumerate(history.records)))


def run_repeated(
    config: GameConfig,
    strategies: tuple[Strategy, Strategy],
    stages: int,
) -> History:
    """Play the two-pool repeated game for a number of stages."""
    if len(config.pools) != 2:
        raise InvalidScenario("run_repeated needs exactly two pools")
    a1, a2 = config.powers
    s1, s2 = strategies
    st1, st2 = initial_state(s1.k), initial_state(s2.k)
    records = []
    for t in range(stages):
        p1, st1 = ars_step(st1, a1, a2, config.grid_resolution, config.tolerance)
        p2, st2 = ars_step(st2, a2, a1, config.grid_resolution, config.tolerance)
        act1 = validate_action(s1.pick(t, p1, a1, a2), a1)
        act2 = validate_action(s2.pick(t, p2, a2, a1), a2)
        st1 = st1.with_observed(act1, act2)
        st2 = st2.with_observed(act2, act1)
        u = payoff_pair(a1, a2, act1, act2, config.tolerance)
        records.append(StageRecord(t, (act1, act2), (u.u_i, u.u_j)))
    return History(tuple(records), config.discount)


# ---------------------------------------------------------------------------
# Two-stage deviation sweeps (heatmap data)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepCell:
    alpha_1: float
    alpha_2: float
    attack_ratio: float  # attacker's infiltration / alpha_1
    r2_faw: float  # retaliation FAW power / alpha_2
    r2_bwh: float
    u1_avg: float
    u2_avg: float
    ip_faw_empty: bool
    error: str = ""


def _two_stage_cell(alpha_1, alpha_2, attack: Action, k, grid_resolution) -> SweepCell:
    try:
        u0 = payoff_pair(alpha_1, alpha_2, attack, ZERO_ACTION)
        r = retaliate(alpha_2, ZERO_ACTION, alpha_1, attack, ZERO_ACTION, k,
                      grid_resolution)
        u1 = payoff_pair(alpha_1, alpha_2, ZERO_ACTION, r)
        return SweepCell(
            alpha_1,
            alpha_2,
            attack.power / alpha_1,
            r.faw / alpha_2,
            r.bwh / alpha_2,
            (u0.u_i + u1.u_i) / 2.0,
            (u0.u_j + u1.u_j) / 2.0,
            ip_faw_empty=r.kind is not AttackKind.FAW and not r.is_zero,
        )
    except Exception as exc:  # cell errors recorded, sweep continues
        return SweepCell(alpha_1, alpha_2, attack.power / alpha_1,
                         np.nan, np.nan, np.nan, np.nan, False, error=str(exc))


def two_stage_sweep(
    alpha_grid,
    attacker_kind: AttackKind,
    k: float = DEFAULT_K_NEAR_ONE,
    grid_resolution: int = 100,
    power_cap: float = 0.9,
) -> list[SweepCell]:
    """Optimal one-shot deviation followed by retaliation, per power cell.

    The attacker (pool 1) plays its payoff-maximizing one-sided attack; pool 2
    retaliates at the next stage. Reports retaliation ratios and both pools'
    two-stage average payoffs.
    """
    cells = []
    for alpha_1 in alpha_grid:
        for alpha_2 in alpha_grid:
            if alpha_1 + alpha_2 > power_cap:
                continue
            attack = Action.of(
                attacker_kind, optimal_infiltration(attacker_kind, alpha_1, alpha_2)
            )
            cells.append(_two_stage_cell(alpha_1, alpha_2, attack, k, grid_resolution))
    return cells


def two_stage_ratio_sweep(
    ratio_grid,
    alpha_2_grid,
    attacker_kind: AttackKind,
    alpha_1: float = 0.2,
    k: float = DEFAULT_K_NEAR_ONE,
    grid_resolution: int = 100,
) -> list[SweepCell]:
    """Same two-stage scenario sweeping the attacker's infiltration ratio at
    fixed attacker size (heatmaps over attack intensity)."""
    cells = []
    for ratio in ratio_grid:
        for alpha_2 in alpha_2_grid:
            if alpha_1 + alpha_2 > 0.9:
                continue
            attack = Action.of(attacker_kind, ratio * alpha_1)
            cells.append(_two_stage_cell(alpha_1, alpha_2, attack, k, grid_resolution))
    return cells


def sweep_csv_rows(cells):
    yield "alpha1,alpha2,attack_ratio,r2F,r2B,u1_avg,u2_avg,ip_faw_empty,error"
    for c in cells:
        yield (
            f"{c.alpha_1:.6f},{c.alpha_2:.6f},{c.attack_ratio:.6f},"
            f"{c.r2_faw:.6f},{c.r2_bwh:.6f},{c.u1_avg:.8f},{c.u2_avg:.8f},"
            f"{int(c.ip_faw_empty)},{c.error}"
        )


# ---------------------------------------------------------------------------
# n-pool game
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PairwiseActionMatrix:
    """Per-ordered-pair infiltration powers: faw[i, j] (bwh[i, j]) is pool i's
    FAW (BWH) power inside pool j."""

    faw: np.ndarray
    bwh: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "PairwiseActionMatrix":
        return cls(np.zeros((n, n)), np.zeros((n, n)))

    def validate(self, alphas) -> "PairwiseActionMatrix":
        if np.any(self.faw < 0) or np.any(self.bwh < 0):
            raise InvalidScenario("negative infiltration power")
        if np.any((self.faw > 0) & (self.bwh > 0)):
            raise InvalidScenario("FAW and BWH are mutually exclusive per pair")
        if np.any(np.diag(self.faw + self.bwh) > 0):
            raise InvalidScenario("a pool cannot infiltrate itself")
        out = (self.faw + self.bwh).sum(axis=1)
        if np.any(out > np.asarray(alphas) + 1e-12):
            raise InfiltrationBudgetExceeded(
                f"outgoing infiltration {out} exceeds pool powers {alphas}"
            )
        return self

    def action(self, i: int, j: int) -> Action:
        return Action(float(self.faw[i, j]), float(self.bwh[i, j]))

    def with_action(self, i: int, j: int, a: Action) -> "PairwiseActionMatrix":
        f, b = self.faw.copy(), self.bwh.copy()
        f[i, j], b[i, j] = a.faw, a.bwh
        return PairwiseActionMatrix(f, b)


def _npool_direct_revenue(alphas, matrix: PairwiseActionMatrix) -> np.ndarray:
    """Exact expected per-round direct block revenue per pool.

    Home finds end rounds outright. FAW detachments withhold; when the first
    round-ending find is external, every withheld block is released and one of
    the released branches wins uniformly (the external block always loses).
    """
    alphas = np.asarray(alphas, float)
    n = alphas.size
    out = (matrix.faw + matrix.bwh).sum(axis=1)
    home = alphas - out
    ext = 1.0 - alphas.sum()
    theta = ext + home.sum()
    flags = [
        (matrix.faw[i, j], j)
        for i in range(n)
        for j in range(n)
        if matrix.faw[i, j] > 0.0
    ]
    if len(flags) > 16:
        raise InvalidScenario("too many simultaneous FAW infiltrations for exact enumeration")
    revenue = home / theta
    for bits in itertools.product((0, 1), repeat=len(flags)):
        released = [m for m, on in enumerate(bits) if on]
        if not released:
            continue
        idle = sum(flags[m][0] for m, on in enumerate(bits) if not on)
        p = 0.0
        for r in range(len(released) + 1):
            for sub in itertools.combinations(released, r):
                p += (-1) ** len(sub) / (theta + idle + sum(flags[m][0] for m in sub))
        p *= ext
        for m in released:
            revenue[flags[m][1]] += p / len(released)
    return revenue


def _pot_matrix(alphas, matrix: PairwiseActionMatrix) -> np.ndarray:
    x = matrix.faw + matrix.bwh
    basis = np.asarray(alphas, float) + x.sum(axis=0)
    return np.diag(basis) - x


def npool_stage_payoffs(alphas, matrix: PairwiseActionMatrix) -> np.ndarray:
    """Exact expected extra reward densities for one n-pool stage."""
    matrix.validate(alphas)
    revenue = _npool_direct_revenue(alphas, matrix)
    q = np.linalg.solve(_pot_matrix(alphas, matrix), revenue)
    return q - 1.0


def npool_stage_payoffs_mc(
    alphas, matrix: PairwiseActionMatrix, rounds: int = 10_000_000, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Monte-Carlo estimate of the n-pool stage payoffs with standard errors.

    Samples the same per-round race as the exact computation: the round-ending
    component is categorical over live terminal power, withheld-block flags
    fire if the detachment's first find lands before the round ends, and
    external endings are claimed by a uniformly chosen released branch.
    """
    matrix.validate(alphas)
    alphas = np.asarray(alphas, float)
    n = alphas.size
    rng = np.random.default_rng(seed)
    out = (matrix.faw + matrix.bwh).sum(axis=1)
    home = alphas - out
    ext = 1.0 - alphas.sum()
    theta = ext + home.sum()
    flags = [
        (matrix.faw[i, j], j)
        for i in range(n)
        for j in range(n)
        if matrix.faw[i, j] > 0.0
    ]
    term_probs = np.concatenate(([ext], home)) / theta
    cdf = np.cumsum(term_probs)
    win_counts = np.zeros(n + 1, dtype=np.int64)  # slot 0: external/no pool
    chunk = 2_000_000
    done = 0
    while done < rounds:
        m = min(chunk, rounds - done)
        terminal = np.searchsorted(cdf, rng.random(m), side="right")  # 0=ext, 1..n=home
        winner = terminal.copy()
        if flags:
            tau = rng.exponential(1.0 / theta, m)
            fired = np.stack(
                [rng.random(m) < -np.expm1(-phi * tau) for phi, _ in flags]
            )
            ext_rounds = terminal == 0
            n_fired = fired[:, ext_rounds].sum(axis=0)
            pick = (rng.random(ext_rounds.sum()) * np.maximum(n_fired, 1)).astype(int)
            hosts = np.array([j for _, j in flags])
            # order of fired flags per round; select the pick-th fired host
            fired_ext = fired[:, ext_rounds]
            cums = np.cumsum(fired_ext, axis=0)
            sel = np.argmax(cums == (pick + 1)[None, :], axis=0)
            won = np.where(n_fired > 0, hosts[sel] + 1, 0)
            winner[ext_rounds] = won
        win_counts += np.bincount(winner, minlength=n + 1)
        done += m
    p_hat = win_counts[1:] / rounds
    inv = np.linalg.inv(_pot_matrix(alphas, matrix))
    q_mean = inv @ p_hat
    # per-round density vector is a column of inv (or zero); categorical variance
    var = (inv**2) @ p_hat - q_mean**2
    stderr = np.sqrt(np.maximum(var, 0.0) / rounds)
    return q_mean - 1.0, stderr


@dataclass
class NPoolArsAgent:
    k: float = DEFAULT_K_NEAR_ONE


@dataclass
class NPoolOptimalOneShotAttacker:
    """Simultaneously attacks every other pool at one stage, choosing the
    infiltration vector by coordinate ascent on the exact stage payoff."""

    kind: AttackKind
    stage: int = 0
    sweeps: int = 5
    k: float = DEFAULT_K_NEAR_ONE


def optimal_simultaneous_attack(
    alphas, attacker: int, kind: AttackKind, sweeps: int = 5
) -> np.ndarray:
    """Coordinate ascent with golden-section line search over each victim's
    infiltration power, respecting the attacker's total power budget."""
    alphas = np.asarray(alphas, float)
    n = alphas.size
    x = np.zeros(n)

    def u_attacker(xs) -> float:
        m = PairwiseActionMatrix.zeros(n)
        if kind is AttackKind.FAW:
            m.faw[attacker, :] = xs
        else:
            m.bwh[attacker, :] = xs
        return float(npool_stage_payoffs(alphas, m)[attacker])

    for _ in range(sweeps):
        for j in range(n):
            if j == attacker:
                continue
            budget = alphas[attacker] - (x.sum() - x[j])

            def line(v, j=j):
                y = x.copy()
                y[j] = v
                return u_attacker(y)

            x[j] = golden_max(line, 0.0, budget, tol=1e-9)
    return x


def run_npool(
    config: GameConfig,
    strategies,
    stages: int,
    payoff_rounds: int | None = None,
) -> History:
    """Play the n-pool repeated game with per-pair retaliation bookkeeping.

    Recorded stage payoffs are exact event-model expectations by default; pass
    ``payoff_rounds`` to estimate them by Monte-Carlo instead (stderr not
    recorded in the history, available via npool_stage_payoffs_mc).
    """
    alphas = np.asarray(config.powers, float)
    n = alphas.size
    if len(strategies) != n:
        raise InvalidScenario("one strategy per pool required")
    states: dict[tuple[int, int], ArsState] = {
        (i, j): initial_state(strategies[i].k)
        for i in range(n)
        for j in range(n)
        if i != j
    }
    records = []
    for t in range(stages):
        matrix = PairwiseActionMatrix.zeros(n)
        new_states = {}
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                prescribed, st = ars_step(
                    states[(i, j)], alphas[i], alphas[j],
                    config.grid_resolution, config.tolerance,
                )
                new_states[(i, j)] = st
                matrix = matrix.with_action(i, j, prescribed)
        for i, strat in enumerate(strategies):
            if isinstance(strat, NPoolOptimalOneShotAttacker) and t == strat.stage:
                xs = optimal_simultaneous_attack(alphas, i, strat.kind, strat.sweeps)
                for j in range(n):
                    if j != i:
                        matrix = matrix.with_action(i, j, Action.of(strat.kind, xs[j]))
        matrix.validate(alphas)
        for i in range(n):
            for j in range(n):
                if i != j:
                    new_states[(i, j)] = new_states[(i, j)].with_observed(
                        matrix.action(i, j), matrix.action(j, i)
                    )
        states = new_states
        if payoff_rounds:
            u, _ = npool_stage_payoffs_mc(
                alphas, matrix, payoff_rounds, config.seed + t
            )
        else:
            u = npool_stage_payoffs(alphas, matrix)
        records.append(StageRecord(t, (matrix,), tuple(float(v) for v in u)))
    return History(tuple(records), config.discount)


# ---------------------------------------------------------------------------
# Closed pools scenario
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClosedPoolRow:
    attacker_power: float
    infiltration: float
    attacker_gain: float
    victim_loss: float


def closed_pool_scenario(
    attacker_powers=(0.031, 0.013), victim_power: float = 0.25
) -> list[ClosedPoolRow]:
    """Unretaliated optimal FAW by closed pools against a large open pool.

    Closed pools cannot be counter-infiltrated, so the attack simply stands;
    reports each attacker's extra reward density and the victim's loss.
    """
    rows = []
    for a in attacker_powers:
        if a == 0.0:
            rows.append(ClosedPoolRow(0.0, 0.0, 0.0, 0.0))
            continue
        f = optimal_faw_infiltration(a, victim_power)
        gain = float(one_sided_attacker(AttackKind.FAW, a, victim_power, f))
        loss = -float(one_sided_victim(AttackKind.FAW, a, victim_power, f))
        rows.append(ClosedPoolRow(a, f, gain, loss))
    return rows

"""Stage-game payoff functions for the two-pool FAW/BWH game.

Reward model. Each round, every hash-power component races to find the next
full proof-of-work: the two pools' home miners, their infiltration detachments
inside each other, and the external honest rest. BWH infiltrators discard any
full solution they find; FAW infiltrators withhold it and submit it to the
victim pool's manager the moment an *external* miner publishes, forcing a fork
that the withheld block always wins (best-case network capability). When both
infiltrators hold withheld blocks, the resulting three-branch fork is won by
either pool block with equal probability.

A pool's revenue per round is divided per unit of share-submitting power: the
pool's own power alpha (home miners and loyal infiltrators are both credited
by their manager) plus the opponent's infiltration inside it. The infiltrator's
cut flows back to its home pool's pot, which couples the two pools' reward
densities. ``payoff_pair`` resolves that coupling exactly as a 2x2 linear
system; ``simulate_rounds`` estimates the same quantities from an event-level
Monte-Carlo simulation of rounds and serves as the independent oracle.

``U_i`` is pool i's extra reward density: member reward per unit power minus
the honest baseline 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    ALGEBRAIC_TOL,
    Action,
    AttackKind,
    DegenerateDenominator,
    InvalidPowers,
    validate_action,
)


@dataclass(frozen=True)
class StagePayoffs:
    """Per-pool extra reward densities for one stage."""

    u_i: float
    u_j: float

    def __iter__(self):
        return iter((self.u_i, self.u_j))


def _check_powers(alpha_i: float, alpha_j: float) -> None:
    if alpha_i <= 0.0 or alpha_j <= 0.0:
        raise InvalidPowers(f"powers must be positive, got {alpha_i}, {alpha_j}")
    if alpha_i > 0.5 or alpha_j > 0.5:
        raise InvalidPowers("no pool may hold more than half the network")
    if alpha_i + alpha_j >= 1.0:
        raise InvalidPowers(f"powers sum to {alpha_i + alpha_j} >= 1")


def payoff_pair_raw(alpha_i, alpha_j, f_i, b_i, f_j, b_j, tolerance=ALGEBRAIC_TOL):
    """Vectorized (U_i, U_j) for raw action components.

    Any of the four infiltration arguments may be numpy arrays (broadcast
    together); exclusivity (f*b == 0 per pool) is assumed, not checked here.
    The implicit cross-pool reward terms are resolved by solving the induced
    2x2 linear system in (U_i, U_j) exactly.
    """
    f_i, b_i, f_j, b_j = np.broadcast_arrays(
        np.asarray(f_i, float), np.asarray(b_i, float),
        np.asarray(f_j, float), np.asarray(b_j, float),
    )
    x_i = f_i + b_i
    x_j = f_j + b_j
    ext = 1.0 - alpha_i - alpha_j

    def direct(alpha_own, own_f, own_b, opp_f, opp_b):
        # expected direct block revenue of the pool, before pot division
        own_x = own_f + own_b
        opp_x = opp_f + opp_b
        d = (alpha_own - own_x) / (1.0 - own_x - opp_x)
        # fork wins: the opponent's withheld blocks are this pool's blocks
        both = (own_f > 0) & (opp_f > 0)
        d = d + np.where(
            both,
            opp_f * ext / (1.0 - opp_f)
            + (own_f * opp_f / 2.0)
            * (1.0 / (1.0 - own_f) + 1.0 / (1.0 - opp_f))
            * ext
            / (1.0 - own_f - opp_f),
            np.where(
                opp_f > 0,
                opp_f / (1.0 - own_b) * ext / (1.0 - own_b - opp_f),
                0.0,
            ),
        )
        return d

    den_i = alpha_i + x_j
    den_j = alpha_j + x_i
    live = 1.0 - x_i - x_j
    if np.any(live <= tolerance) or np.any(den_i <= tolerance) or np.any(den_j <= tolerance):
        raise DegenerateDenominator("actions leave no live block-finding power")

    d_i = direct(alpha_i, f_i, b_i, f_j, b_j) / den_i
    d_j = direct(alpha_j, f_j, b_j, f_i, b_i) / den_j
    k_i = x_i / den_i
    k_j = x_j / den_j
    c_i = d_i - 1.0 + k_i
    c_j = d_j - 1.0 + k_j
    det = 1.0 - k_i * k_j
    return (c_i + k_i * c_j) / det, (c_j + k_j * c_i) / det


def payoff_pair(
    alpha_i: float,
    alpha_j: float,
    a_i: Action,
    a_j: Action,
    tolerance: float = ALGEBRAIC_TOL,
) -> StagePayoffs:
    """Exact per-stage extra reward densities for an action profile."""
    _check_powers(alpha_i, alpha_j)
    validate_action(a_i, alpha_i)
    validate_action(a_j, alpha_j)
    u_i, u_j = payoff_pair_raw(
        alpha_i, alpha_j, a_i.faw, a_i.bwh, a_j.faw, a_j.bwh, tolerance
    )
    return StagePayoffs(float(u_i), float(u_j))


def one_sided_attacker(kind: AttackKind, alpha_att, alpha_vic, x):
    """Attacker's payoff when attacking an otherwise honest pool (vectorized).

    This is the diagonal two-pool payoff with the victim playing no-attack,
    reduced to closed form; used heavily on infiltration grids.
    """
    x = np.asarray(x, float)
    a, v = alpha_att, alpha_vic
    if kind is AttackKind.FAW:
        num = a * v + a * x - (a + v) * x**2
    else:
        num = a * v + a * x - x**2
    return num / (a * (1.0 - x) * (v + x)) - 1.0


def one_sided_victim(kind: AttackKind, alpha_att, alpha_vic, x):
    """Victim's payoff when hosting infiltration x from an honest-otherwise attacker."""
    x = np.asarray(x, float)
    a, v = alpha_att, alpha_vic
    if kind is AttackKind.FAW:
        num = v + x * (1.0 - a - v)
    else:
        num = v
    return num / ((1.0 - x) * (v + x)) - 1.0


def optimal_faw_infiltration(alpha_i: float, alpha_j: float) -> float:
    """Infiltration power maximizing the one-sided FAW payoff, clamped to [0, alpha_i].

    Closed form root of the payoff derivative; it also maximizes the damage
    inflicted on the host pool.
    """
    _check_powers(alpha_i, alpha_j)
    a, v = alpha_i, alpha_j
    m = (np.sqrt(v * (1.0 - a) * (a + v)) - v) / (1.0 - a - v)
    return float(min(max(m, 0.0), a))


def optimal_bwh_infiltration(alpha_i: float, alpha_j: float) -> float:
    """Infiltration power maximizing the one-sided BWH payoff, clamped to [0, alpha_i]."""
    _check_powers(alpha_i, alpha_j)
    a, v = alpha_i, alpha_j
    m = v * (np.sqrt(1.0 - a - a * v) - (1.0 - a)) / (1.0 - a - v)
    return float(min(max(m, 0.0), a))


def optimal_infiltration(kind: AttackKind, alpha_i: float, alpha_j: float) -> float:
    if kind is AttackKind.FAW:
        return optimal_faw_infiltration(alpha_i, alpha_j)
    return optimal_bwh_infiltration(alpha_i, alpha_j)


@dataclass(frozen=True)
class RoundSimResult:
    """Monte-Carlo estimates of per-stage extra reward densities."""

    u_i: float
    u_j: float
    stderr_i: float
    stderr_j: float
    rounds: int
    # fraction of all published blocks won by each pool
    block_share_i: float = 0.0
    block_share_j: float = 0.0
    # mean member reward density split into home-mining-derived and
    # opponent-pot-derived components (u + 1 == home + cross)
    home_density_i: float = 0.0
    cross_density_i: float = 0.0
    home_density_j: float = 0.0
    cross_density_j: float = 0.0

    @property
    def stderr(self) -> float:
        return max(self.stderr_i, self.stderr_j)


def simulate_rounds(
    alpha_i: float,
    alpha_j: float,
    a_i: Action,
    a_j: Action,
    rounds: int = 100_000,
    seed: int = 0,
) -> RoundSimResult:
    """Event-level round simulation of the two-pool stage game.

    Each round repeatedly draws which component finds the next full solution,
    proportionally to hash power: external honest miners, either pool's home
    miners, or either pool's infiltration detachment. Infiltrator finds set a
    withheld flag (FAW) or are discarded (BWH); home or external finds end the
    round, with withheld blocks released against external publications and the
    three-branch fork tie broken by a fair coin. Round revenue is split per
    unit of share power and the infiltrators' cuts flow between the pools'
    pots, solved per round.

    Deterministic for a given seed.
    """
    _check_powers(alpha_i, alpha_j)
    validate_action(a_i, alpha_i)
    validate_action(a_j, alpha_j)

    rng = np.random.default_rng(seed)
    x_i, x_j = a_i.power, a_j.power
    rates = np.array(
        [
            1.0 - alpha_i - alpha_j,  # 0: external
            alpha_i - x_i,            # 1: pool i home
            alpha_j - x_j,            # 2: pool j home
            x_i,                      # 3: pool i's infiltrators (in pool j)
            x_j,                      # 4: pool j's infiltrators (in pool i)
        ]
    )
    cdf = np.cumsum(rates / rates.sum())
    faw_i = a_i.faw > 0
    faw_j = a_j.faw > 0

    # winner[r] in {-1: external, 0: pool i, 1: pool j}
    winner = np.full(rounds, -2, dtype=np.int8)
    held_i = np.zeros(rounds, dtype=bool)  # pool i's infiltrator holds a block
    held_j = np.zeros(rounds, dtype=bool)
    open_rounds = np.arange(rounds)
    while open_rounds.size:
        draw = np.searchsorted(cdf, rng.random(open_rounds.size), side="right")
        if faw_i:
            held_i[open_rounds[draw == 3]] = True
        if faw_j:
            held_j[open_rounds[draw == 4]] = True
        ends = draw < 3
        ending = open_rounds[ends]
        kind = draw[ends]
        winner[ending[kind == 1]] = 0
        winner[ending[kind == 2]] = 1
        ext = ending[kind == 0]
        if ext.size:
            hi, hj = held_i[ext], held_j[ext]
            # a withheld block released by pool i's infiltrator is pool j's block
            w = np.full(ext.size, -1, dtype=np.int8)
            w[hi & ~hj] = 1
            w[hj & ~hi] = 0
            both = hi & hj
            w[both] = rng.integers(0, 2, both.sum(), dtype=np.int8)
            winner[ext] = w
        open_rounds = open_rounds[~ends]

    # per-round pot split: q_i*(alpha_i + x_j) = R_i + x_i*q_j
    den_i, den_j = alpha_i + x_j, alpha_j + x_i
    mat = np.array([[den_i, -x_i], [-x_j, den_j]])
    inv = np.linalg.inv(mat)
    counts = np.array([(winner == 0).sum(), (winner == 1).sum()], float)
    p_hat = counts / rounds
    q_mean = inv @ p_hat
    # outcome values of (q_i, q_j): column of inv for each winner, zero for external
    var = inv**2 @ (p_hat * (1 - p_hat)) - 2 * inv[:, 0] * inv[:, 1] * p_hat[0] * p_hat[1]
    stderr = np.sqrt(np.maximum(var, 0.0) / rounds)
    # density decomposition: own-direct-derived vs routed through the other pot
    home_i, cross_i = inv[0, 0] * p_hat[0], inv[0, 1] * p_hat[1]
    home_j, cross_j = inv[1, 1] * p_hat[1], inv[1, 0] * p_hat[0]
    return RoundSimResult(
        u_i=float(q_mean[0] - 1.0),
        u_j=float(q_mean[1] - 1.0),
        stderr_i=float(stderr[0]),
        stderr_j=float(stderr[1]),
        rounds=rounds,
        block_share_i=float(p_hat[0]),
        block_share_j=float(p_hat[1]),
        home_density_i=float(home_i),
        cross_density_i=float(cross_i),
        home_density_j=float(home_j),
        cross_density_j=float(cross_j),
    )

"""Equilibrium analysis: stage-game Nash solving, the discount-factor bound
for mutual-retaliation stability, and the BWH candidate-set audit.

The stage game restricted to FAW-only actions carries all equilibria (either
pool would swap a BWH component for the same-size FAW component and gain), so
the Nash solver runs best-response dynamics on the one-dimensional FAW slice,
with each best response bracketed on a coarse grid and polished by
golden-section search.

The discount bound answers: how patient must both pools be for one-stage
deviations from mutual adaptive retaliation to never pay? Each subgame class
contributes a family of payoff ratios (deviation gain over punishment size);
the bound is the maximum over the class families and a deviation grid, and by
construction of the candidate sets it stays below 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import (
    ALGEBRAIC_TOL,
    Action,
    AttackKind,
    DEFAULT_GRID_RESOLUTION,
    NonConvergence,
    OPTIMIZER_TOL,
    ZERO_ACTION,
    power_grid,
)
from .payoff import (
    StagePayoffs,
    one_sided_attacker,
    one_sided_victim,
    optimal_bwh_infiltration,
    optimal_faw_infiltration,
    payoff_pair,
    payoff_pair_raw,
)
from .ars import retaliate

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_max(fn, lo: float, hi: float, tol: float = 1e-10) -> float:
    """Golden-section maximizer for a scalar unimodal function on [lo, hi]."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


@dataclass(frozen=True)
class StageEquilibrium:
    actions: tuple[Action, Action]
    payoffs: StagePayoffs
    iterations: int
    converged: bool


def _best_response(alpha_own, alpha_opp, f_opp, grid_resolution) -> float:
    """argmax over own FAW power of the coupled stage payoff."""

    def u(f):
        return float(payoff_pair_raw(alpha_own, alpha_opp, f, 0.0, f_opp, 0.0)[0])

    grid = power_grid(alpha_own, grid_resolution)
    vals = payoff_pair_raw(alpha_own, alpha_opp, grid, 0.0, f_opp, 0.0)[0]
    i = int(np.argmax(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, grid.size - 1)]
    return golden_max(u, lo, hi)


def stage_nash(
    alpha_1: float,
    alpha_2: float,
    grid_resolution: int = DEFAULT_GRID_RESOLUTION,
    tolerance: float = 1e-7,
    max_iterations: int = 10_000,
    initial: tuple[float, float] = (0.0, 0.0),
) -> StageEquilibrium:
    """Unique pure-FAW stage-game Nash equilibrium by best-response iteration."""
    f1, f2 = initial
    converged = False
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        n1 = _best_response(alpha_1, alpha_2, f2, grid_resolution)
        n2 = _best_response(alpha_2, alpha_1, n1, grid_resolution)
        if abs(n1 - f1) < tolerance and abs(n2 - f2) < tolerance:
            f1, f2 = n1, n2
            converged = True
            break
        f1, f2 = n1, n2
    actions = (Action(f1, 0.0), Action(f2, 0.0))
    payoffs = payoff_pair(alpha_1, alpha_2, *actions)
    eq = StageEquilibrium(actions, payoffs, iterations, converged)
    if not converged:
        raise NonConvergence(
            f"best-response dynamics did not settle after {max_iterations} iterations",
            last_iterate=eq,
        )
    return eq


# ---------------------------------------------------------------------------
# Discount-factor bound for (ARS_K, ARS_K) stability
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DeltaBound:
    alpha_1: float
    alpha_2: float
    k: float
    bound: float
    case_maxima: dict = field(default_factory=dict, compare=False)
    duplicate_cases: tuple = ()


@dataclass(frozen=True)
class SubgameCase:
    """One subgame class for the one-stage-deviation check, from the deviator's
    side: the profile if it complies, the punisher's stage-0 action, and the
    deviator's prescribed stage-0 action."""

    name: str
    punisher_stage0: Action  # action of the non-deviating pool at stage 0
    deviator_prescribed: Action  # what the deviator should play at stage 0


def _subgame_cases(alpha_pun, alpha_dev, k, grid_resolution, prior_kind: AttackKind):
    """The four standing classes, entered via the deviator's (or punisher's)
    optimal one-shot attack at the previous stage where a punishment context
    is needed."""
    if prior_kind is AttackKind.FAW:
        d_prior = Action(optimal_faw_infiltration(alpha_dev, alpha_pun), 0.0)
        p_prior = Action(optimal_faw_infiltration(alpha_pun, alpha_dev), 0.0)
    else:
        d_prior = Action(0.0, optimal_bwh_infiltration(alpha_dev, alpha_pun))
        p_prior = Action(0.0, optimal_bwh_infiltration(alpha_pun, alpha_dev))
    # (good, bad): punisher retaliates at stage 0 against the deviator's prior attack
    pun0 = retaliate(alpha_pun, ZERO_ACTION, alpha_dev, d_prior, ZERO_ACTION, k,
                     grid_resolution)
    # (bad, good): deviator is prescribed to retaliate against the punisher's prior attack
    dev0 = retaliate(alpha_dev, ZERO_ACTION, alpha_pun, p_prior, ZERO_ACTION, k,
                     grid_resolution)
    return (
        SubgameCase("cooperating", ZERO_ACTION, ZERO_ACTION),
        SubgameCase("being-punished", pun0, ZERO_ACTION),
        SubgameCase("prescribed-retaliation", ZERO_ACTION, dev0),
        SubgameCase("mutual-bad", ZERO_ACTION, ZERO_ACTION),
    )


def deviation_outcome(
    case: SubgameCase,
    alpha_pun: float,
    alpha_dev: float,
    deviation: Action,
    k: float,
    grid_resolution: int = DEFAULT_GRID_RESOLUTION,
):
    """Stage payoffs of a one-stage deviation inside a subgame class.

    Returns (gain, punishment, compliance) for the deviator: its stage-0
    payoffs under deviation and compliance, and its stage-1 payoff under the
    punisher's retaliation. After stage 1 cooperation resumes and all later
    terms vanish, so the deviation is profitable at discount d iff
    gain + d * punishment > compliance.
    """
    u_dev0 = payoff_pair(alpha_pun, alpha_dev, case.punisher_stage0, deviation).u_j
    u_comp = payoff_pair(alpha_pun, alpha_dev, case.punisher_stage0,
                         case.deviator_prescribed).u_j
    r1 = retaliate(
        alpha_pun, case.punisher_stage0, alpha_dev, deviation,
        case.deviator_prescribed, k, grid_resolution,
    )
    u_pun1 = payoff_pair(alpha_pun, alpha_dev, r1, ZERO_ACTION).u_j
    return u_dev0, u_pun1, u_comp


def _deviation_grid(alpha_dev, n):
    g = power_grid(alpha_dev, n)[1:]  # exclude 0 (compliance, not a deviation)
    return [Action(f, 0.0) for f in g] + [Action(0.0, b) for b in g]


def delta_bound(
    alpha_1: float,
    alpha_2: float,
    k: float,
    grid_resolution: int = DEFAULT_GRID_RESOLUTION,
    deviation_resolution: int = 40,
    tolerance: float = OPTIMIZER_TOL,
) -> DeltaBound:
    """Smallest discount factor above which no sampled one-stage deviation
    from mutual adaptive retaliation pays, in any subgame class.

    Maximizes the ratio (deviation gain) / (punishment size) over a grid of
    deviation actions for both pools as deviator; ratios whose punishment-stage
    payoff is (near) zero are skipped. The mutual-bad class duplicates the
    cooperating class (both prescribe no-attack) and is evaluated as listed.
    """
    case_maxima: dict[str, float] = {}
    for alpha_pun, alpha_dev, side in ((alpha_1, alpha_2, 2), (alpha_2, alpha_1, 1)):
        for prior in (AttackKind.FAW, AttackKind.BWH):
            cases = _subgame_cases(alpha_pun, alpha_dev, k, grid_resolution, prior)
            for case in cases:
                key = f"pool{side}:{case.name}"
                best = case_maxima.get(key, -np.inf)
                for d in _deviation_grid(alpha_dev, deviation_resolution):
                    gain, pun, comp = deviation_outcome(
                        case, alpha_pun, alpha_dev, d, k, grid_resolution
                    )
                    if abs(pun) < tolerance:
                        continue
                    best = max(best, (comp - gain) / pun)
                case_maxima[key] = best
    bound = max(case_maxima.values())
    return DeltaBound(
        alpha_1=alpha_1,
        alpha_2=alpha_2,
        k=k,
        bound=float(bound),
        case_maxima=case_maxima,
        duplicate_cases=(("cooperating", "mutual-bad"),),
    )


# ---------------------------------------------------------------------------
# Non-emptiness audit of the BWH candidate set
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AuditCell:
    alpha_1: float
    alpha_2: float
    f_value: float  # margin under the baseline assumption (may be negative)
    k_chosen: float  # BWH power whose damage covers the worst-case gap
    passed: bool


@dataclass(frozen=True)
class AuditReport:
    cells: tuple[AuditCell, ...]

    @property
    def failures(self) -> tuple[AuditCell, ...]:
        return tuple(c for c in self.cells if not c.passed)

    def to_csv_rows(self):
        yield "alpha1,alpha2,f_value,k_chosen,passed"
        for c in self.cells:
            yield f"{c.alpha_1:.6f},{c.alpha_2:.6f},{c.f_value:.8f},{c.k_chosen:.8f},{int(c.passed)}"


def _audit_cell(a1: float, a2: float, n: int) -> AuditCell:
    """Check one power cell: some BWH power of pool 1 must out-damage every
    single-stage gain pool 2 can grab by deviating, in both context families."""
    m1b = optimal_bwh_infiltration(a1, a2)
    m2b = optimal_bwh_infiltration(a2, a1)
    f_dmg = optimal_faw_infiltration(a1, a2)
    f_cap = max(m1b, f_dmg)

    dev2 = power_grid(a2, n)  # pool 2's deviation (FAW dominates for the gain)

    # family 1: pool 1 has attacked with (f1, 0); gap between pool 2 staying
    # honest and deviating with (f2, 0)
    def family1_min(f1_cap):
        f1 = np.linspace(0.0, f1_cap, n)[:, None]
        f2 = dev2[None, :]
        u_honest = payoff_pair_raw(a1, a2, f1, 0.0, 0.0, 0.0)[1]
        u_dev = payoff_pair_raw(a1, a2, f1, 0.0, f2, 0.0)[1]
        return float(np.min(u_honest - u_dev))

    # family 2: pool 1 honest; gap between pool 2 playing its prescribed BWH
    # retaliation (0, b2) and deviating with (f2, 0)
    b2 = np.linspace(0.0, m2b, n)[:, None]
    u_presc = one_sided_attacker(AttackKind.BWH, a2, a1, b2)
    u_dev = one_sided_attacker(AttackKind.FAW, a2, a1, dev2[None, :])
    t2 = float(np.min(u_presc - u_dev))

    def damage_at(b):
        return -float(one_sided_victim(AttackKind.BWH, a1, a2, b))

    gap = -min(family1_min(f_cap), t2)  # worst-case gain pool 2 can secure
    f_value = damage_at(m1b) - gap
    if f_value > 0.0:
        return AuditCell(a1, a2, f_value, m1b, True)
    for kk in np.linspace(m1b, a1, n):
        fk = damage_at(kk) + min(family1_min(max(kk, f_cap)), t2)
        if fk > 0.0:
            return AuditCell(a1, a2, f_value, float(kk), True)
    return AuditCell(a1, a2, f_value, float("nan"), False)


def audit_ipbwh_nonempty(
    power_grid_resolution: int = 30,
    infiltration_resolution: int = 120,
    power_lo: float = 0.01,
    power_hi: float = 0.45,
    power_cap: float = 0.9,
) -> AuditReport:
    """Sweep power cells and verify a deterring BWH power always exists.

    For each (alpha_1, alpha_2) the audit first assumes the one-sided BWH
    optimum of pool 1 is available; where its damage fails to cover the
    worst-case deviation gap, it searches larger powers up to pool 1's full
    size. Cells where no power works are reported as failures (expected: none
    on the default grid; pushing the opponent to exactly half the network,
    power_hi=0.5, produces a sliver of genuine failures where no deterring
    power exists).
    """
    powers = np.linspace(power_lo, power_hi, power_grid_resolution)
    cells = []
    for a1 in powers:
        for a2 in powers:
            if a1 + a2 > power_cap:
                continue
            cells.append(_audit_cell(float(a1), float(a2), infiltration_resolution))
    return AuditReport(tuple(cells))

"""Command-line front end: scenario parameters in, tables and figure CSVs out.

Every command writes deterministic output for a given (command, config, seed);
CSV files start with a comment line echoing the seed and the command. A flat
key=value config file can preload any flag; explicit flags win.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .model import (
    Action,
    AttackKind,
    GameConfig,
    PoolGameError,
    PoolProfile,
)
from .payoff import payoff_pair, simulate_rounds
from .ars import retaliate
from .equilibrium import audit_ipbwh_nonempty, delta_bound, stage_nash
from .engine import (
    DEFAULT_K_NEAR_ONE,
    ArsAgent,
    NPoolArsAgent,
    NPoolOptimalOneShotAttacker,
    OptimalOneShotAttacker,
    closed_pool_scenario,
    run_npool,
    run_repeated,
    sweep_csv_rows,
    two_stage_ratio_sweep,
    two_stage_sweep,
)
from .detection import (
    DetectionScenario,
    detect_bwh_block_ratio,
    detect_unlucky_miners,
    geometric_param,
    ingest_hashrate_csv,
    load_bundled_hashrates,
    simulate_reward_density,
    variance_ratio,
)

TABLE1_POOLS = {"antpool": 0.15, "viabtc": 0.10, "dpool": 0.035, "bixin": 0.02}
TABLE1_ATTACKER = 0.25


def _parse_config_file(path) -> dict[str, str]:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise PoolGameError(f"config line without '=': {raw.strip()!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            values[key.replace("-", "_")] = val
    return values


def _action(pair) -> Action:
    return Action(float(pair[0]), float(pair[1]))


def _emit(lines, out_path, seed, command):
    header = f"# seed={seed} command={command}"
    text = "\n".join([header, *lines]) + "\n"
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _add_common(p):
    p.add_argument("--k", type=float, default=None, help="retaliation preference weight")
    p.add_argument("--delta", type=float, default=None, help="discount factor")
    p.add_argument("--grid", type=int, default=None, help="infiltration grid resolution")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="output CSV path (default stdout)")
    p.add_argument("--config", default=None, help="flat key=value config file")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="poolgame",
        description="Mining-pool FAW/BWH game: payoffs, retaliation, detection.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("payoff", help="stage payoffs for an action profile")
    p.add_argument("--alpha", type=float, nargs=2, required=True)
    p.add_argument("--a1", type=float, nargs=2, metavar=("FAW", "BWH"), required=True)
    p.add_argument("--a2", type=float, nargs=2, metavar=("FAW", "BWH"), required=True)
    _add_common(p)

    p = sub.add_parser("stage-nash", help="stage-game Nash equilibrium")
    p.add_argument("--alpha", type=float, nargs=2, required=True)
    _add_common(p)

    p = sub.add_parser("retaliate", help="retaliation against an observed deviation")
    p.add_argument("--alpha", type=float, nargs=2, metavar=("OWN", "OPP"), required=True)
    p.add_argument("--opp-attack", type=float, nargs=2, metavar=("FAW", "BWH"), required=True)
    p.add_argument("--own-prev", type=float, nargs=2, default=(0.0, 0.0))
    p.add_argument("--opp-prescribed", type=float, nargs=2, default=(0.0, 0.0))
    _add_common(p)

    p = sub.add_parser("simulate", help="Monte-Carlo round-level payoff estimate")
    p.add_argument("--alpha", type=float, nargs=2, required=True)
    p.add_argument("--a1", type=float, nargs=2, required=True)
    p.add_argument("--a2", type=float, nargs=2, required=True)
    p.add_argument("--rounds", type=int, default=1_000_000)
    _add_common(p)

    p = sub.add_parser("sweep", help="two-stage deviation/retaliation heatmap data")
    p.add_argument("--attack", choices=["faw", "bwh"], required=True)
    p.add_argument("--cells", type=int, default=None,
                   help="power grid cells per axis (falls back to --grid, then 60)")
    p.add_argument("--fixed-alpha1", type=float, default=None,
                   help="sweep attack ratio at this attacker size instead of sizes")
    _add_common(p)

    p = sub.add_parser("npool", help="n-pool one-shot attack and retaliation")
    p.add_argument("--powers", type=float, nargs="+", default=None,
                   help="pool powers as fractions, attacker first "
                        "(or `powers` config key, in percent)")
    p.add_argument("--attack", choices=["faw", "bwh"], required=True)
    p.add_argument("--stages", type=int, default=2)
    p.add_argument("--rounds", type=int, default=0,
                   help="Monte-Carlo rounds per stage payoff (0 = exact)")
    _add_common(p)

    p = sub.add_parser("detect", help="detection and identification quantities")
    p.add_argument("--mode", choices=["block-ratio", "unlucky", "variance", "geometric"],
                   required=True)
    p.add_argument("--alpha", type=float, default=0.10, help="attacker pool size")
    p.add_argument("--beta", type=float, default=0.20, help="victim pool size")
    p.add_argument("--infiltration", type=float, default=0.005)
    p.add_argument("--attack", choices=["faw", "bwh"], default="faw")
    p.add_argument("--blocks", type=int, default=2000)
    p.add_argument("--periods", type=int, default=720)
    p.add_argument("--hashrates", default=None, help="hash-rate CSV (default: bundled fixture)")
    p.add_argument("--pool", default=None, help="pool column of the hash-rate CSV")
    p.add_argument("--series-out", default=None,
                   help="also write the simulated attack reward-density series CSV")
    _add_common(p)

    p = sub.add_parser("delta-bound", help="discount factor above which retaliation deters")
    p.add_argument("--alpha", type=float, nargs=2, required=True)
    _add_common(p)

    p = sub.add_parser("audit-ipbwh", help="non-emptiness audit of the BWH candidate set")
    p.add_argument("--cells", type=int, default=None,
                   help="power grid cells per axis (falls back to --grid, then 30)")
    _add_common(p)

    p = sub.add_parser("reproduce-table", help="reproduce a published results table")
    p.add_argument("table", type=int, choices=[1, 3])
    p.add_argument("--rounds", type=int, default=0,
                   help="table 3 Monte-Carlo rounds per stage (0 = exact)")
    _add_common(p)

    p = sub.add_parser("closed-pools", help="unretaliated closed-pool attack scenario")
    _add_common(p)

    return ap


def _apply_config(args):
    if getattr(args, "config", None):
        file_values = _parse_config_file(args.config)
        for key, val in file_values.items():
            if not hasattr(args, key) or getattr(args, key) is not None:
                continue  # flags win; unknown keys ignored for forward compat
            current = getattr(args, key)
            if key in ("grid", "seed", "cells", "blocks", "rounds", "periods", "stages"):
                setattr(args, key, int(val))
            elif key == "powers":
                setattr(args, key, [float(v) / 100.0 for v in val.replace(",", " ").split()])
            else:
                setattr(args, key, float(val))
    if getattr(args, "k", None) is None:
        args.k = DEFAULT_K_NEAR_ONE
    if getattr(args, "delta", None) is None:
        args.delta = 0.9
    args.grid_explicit = getattr(args, "grid", None) is not None
    if getattr(args, "grid", None) is None:
        args.grid = 100
    if getattr(args, "seed", None) is None:
        args.seed = 0
    return args


def _cmd_payoff(args):
    u = payoff_pair(*args.alpha, _action(args.a1), _action(args.a2))
    return ["u1,u2", f"{u.u_i:.10f},{u.u_j:.10f}"]


def _cmd_stage_nash(args):
    eq = stage_nash(*args.alpha, grid_resolution=max(args.grid, 100))
    (a1, a2), u = eq.actions, eq.payoffs
    return [
        "f1,f2,u1,u2,iterations,converged",
        f"{a1.faw:.8f},{a2.faw:.8f},{u.u_i:.8f},{u.u_j:.8f},{eq.iterations},{int(eq.converged)}",
    ]


def _cmd_retaliate(args):
    r = retaliate(
        args.alpha[0], _action(args.own_prev), args.alpha[1],
        _action(args.opp_attack), _action(args.opp_prescribed),
        args.k, args.grid,
    )
    return ["faw,bwh,ratio_faw,ratio_bwh",
            f"{r.faw:.8f},{r.bwh:.8f},{r.faw/args.alpha[0]:.6f},{r.bwh/args.alpha[0]:.6f}"]


def _cmd_simulate(args):
    res = simulate_rounds(*args.alpha, _action(args.a1), _action(args.a2),
                          rounds=args.rounds, seed=args.seed)
    return ["u1,u2,stderr1,stderr2,rounds",
            f"{res.u_i:.8f},{res.u_j:.8f},{res.stderr_i:.2e},{res.stderr_j:.2e},{res.rounds}"]


def _cmd_sweep(args):
    kind = AttackKind(args.attack)
    n = args.cells if args.cells is not None else (args.grid if args.grid_explicit else 60)
    grid = np.linspace(0.01, 0.5, n)
    if args.fixed_alpha1 is not None:
        ratios = np.linspace(1.0 / n, 1.0, n)
        cells = two_stage_ratio_sweep(ratios, grid, kind, args.fixed_alpha1, args.k, args.grid)
    else:
        cells = two_stage_sweep(grid, kind, args.k, args.grid)
    return list(sweep_csv_rows(cells))


def _cmd_npool(args):
    kind = AttackKind(args.attack)
    if not args.powers:
        raise PoolGameError("npool needs --powers or a `powers` config entry")
    pools = tuple(PoolProfile(i, p) for i, p in enumerate(args.powers))
    config = GameConfig(pools=pools, discount=args.delta,
                        grid_resolution=max(args.grid, 100), seed=args.seed)
    strategies = [NPoolOptimalOneShotAttacker(kind, k=args.k)] + [
        NPoolArsAgent(k=args.k) for _ in args.powers[1:]
    ]
    hist = run_npool(config, strategies, args.stages,
                     payoff_rounds=args.rounds or None)
    lines = ["stage,pool,payoff"]
    for rec in hist.records:
        for i, u in enumerate(rec.payoffs):
            lines.append(f"{rec.stage},{i},{u:.8f}")
    totals = [sum(r.payoffs[i] for r in hist.records) for i in range(len(args.powers))]
    lines.append("# totals: " + ",".join(f"{t:.8f}" for t in totals))
    return lines


def _cmd_detect(args):
    kind = AttackKind(args.attack)
    if args.mode == "block-ratio":
        expected, p = detect_bwh_block_ratio(args.beta, args.infiltration, args.blocks)
        return ["expected_fraction,p_value_no_attack", f"{expected:.8f},{p:.8f}"]
    if args.mode == "unlucky":
        prob = detect_unlucky_miners(args.infiltration, args.blocks)
        return ["probability_no_fpow", f"{prob:.8e}"]
    if args.mode == "geometric":
        p = geometric_param(args.alpha, args.beta, args.infiltration / args.alpha, kind)
        return ["geometric_p", f"{p:.8f}"]
    series = (ingest_hashrate_csv(args.hashrates) if args.hashrates
              else load_bundled_hashrates())
    pool = args.pool or series.pools()[0]
    scenario = DetectionScenario(args.alpha, args.beta, args.infiltration / args.alpha,
                                 kind, periods=args.periods, seed=args.seed)
    attack = simulate_reward_density(scenario, series, pool=pool)
    honest = simulate_reward_density(
        DetectionScenario(args.alpha, args.beta, 0.0, kind,
                          periods=args.periods, seed=args.seed),
        series, pool=pool,
    )
    ratio = variance_ratio(attack, honest)
    if args.series_out:
        rows = ["period_index,reward_density"]
        rows += [f"{i},{v:.8f}" for i, v in enumerate(attack.samples)]
        with open(args.series_out, "w", encoding="utf-8") as fh:
            fh.write(f"# seed={args.seed} command=detect-series\n" + "\n".join(rows) + "\n")
    return ["variance_ratio,attack_var,honest_var",
            f"{ratio:.4f},{attack.variance():.6f},{honest.variance():.6f}"]


def _cmd_delta_bound(args):
    b = delta_bound(*args.alpha, args.k, grid_resolution=max(args.grid, 100))
    lines = ["alpha1,alpha2,k,bound", f"{b.alpha_1},{b.alpha_2},{b.k},{b.bound:.8f}"]
    lines += [f"# {name}: {v:.8f}" for name, v in sorted(b.case_maxima.items())]
    return lines


def _cmd_audit(args):
    n = args.cells if args.cells is not None else (args.grid if args.grid_explicit else 30)
    report = audit_ipbwh_nonempty(power_grid_resolution=n)
    lines = list(report.to_csv_rows())
    lines.append(f"# failures: {len(report.failures)}")
    return lines


def _cmd_reproduce_table(args):
    if args.table == 1:
        lines = ["victim,power,attack,r_faw_pct,r_bwh_pct,attacker_total_pct"]
        for name, power in TABLE1_POOLS.items():
            for kind in (AttackKind.FAW, AttackKind.BWH):
                pools = (PoolProfile(0, TABLE1_ATTACKER), PoolProfile(1, power))
                config = GameConfig(pools=pools, discount=args.delta,
                                    grid_resolution=max(args.grid, 100), seed=args.seed)
                hist = run_repeated(
                    config,
                    (OptimalOneShotAttacker(kind, k=args.k), ArsAgent(k=args.k)),
                    stages=2,
                )
                r = hist.records[1].actions[1]
                total = sum(rec.payoffs[0] for rec in hist.records)
                lines.append(
                    f"{name},{power},{kind.value},{100*r.faw/power:.4f},"
                    f"{100*r.bwh/power:.4f},{100*total:.4f}"
                )
        return lines
    # table 3
    powers = [TABLE1_ATTACKER, *TABLE1_POOLS.values()]
    lines = ["attack,pool,power,attack_ratio_pct,r_faw_pct,r_bwh_pct,attacker_total_pct"]
    for kind in (AttackKind.FAW, AttackKind.BWH):
        pools = tuple(PoolProfile(i, p) for i, p in enumerate(powers))
        config = GameConfig(pools=pools, discount=args.delta,
                            grid_resolution=max(args.grid, 100), seed=args.seed)
        strategies = [NPoolOptimalOneShotAttacker(kind, k=args.k)] + [
            NPoolArsAgent(k=args.k) for _ in powers[1:]
        ]
        hist = run_npool(config, strategies, 2, payoff_rounds=args.rounds or None)
        matrix0 = hist.records[0].actions[0]
        matrix1 = hist.records[1].actions[0]
        total = sum(r.payoffs[0] for r in hist.records)
        for j, name in enumerate(TABLE1_POOLS, start=1):
            atk = matrix0.action(0, j)
            ret = matrix1.action(j, 0)
            lines.append(
                f"{kind.value},{name},{powers[j]},{100*atk.power/powers[0]:.4f},"
                f"{100*ret.faw/powers[j]:.4f},{100*ret.bwh/powers[j]:.4f},{100*total:.4f}"
            )
    return lines


def _cmd_closed_pools(args):
    lines = ["attacker_power,infiltration,attacker_gain_pct,victim_loss_pct"]
    for row in closed_pool_scenario():
        lines.append(
            f"{row.attacker_power},{row.infiltration:.6f},"
            f"{100*row.attacker_gain:.4f},{100*row.victim_loss:.4f}"
        )
    return lines


_HANDLERS = {
    "payoff": _cmd_payoff,
    "stage-nash": _cmd_stage_nash,
    "retaliate": _cmd_retaliate,
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "npool": _cmd_npool,
    "detect": _cmd_detect,
    "delta-bound": _cmd_delta_bound,
    "audit-ipbwh": _cmd_audit,
    "reproduce-table": _cmd_reproduce_table,
    "closed-pools": _cmd_closed_pools,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args = _apply_config(args)
    try:
        lines = _HANDLERS[args.command](args)
    except PoolGameError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _emit(lines, args.out, args.seed, args.command)
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: equilibrium solving, simulation, adaptation runs,
and the two experiment reproductions, all emitting plot-ready CSV.

Exit codes: 0 success, 2 invalid scenario/arguments, 3 equilibrium
nonexistence (negative rates or an unexpectedly singular system), 4 runtime
stall.  Every command is deterministic given its config and seeds; reruns
produce byte-identical CSV.  Floats are written with 9 significant digits.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import adapt, equilibrium, simulate
from .errors import (
    InconsistentSystemError,
    NegativeRateError,
    ScenarioError,
    SingularSystemError,
    StallError,
)
from .model import (
    CostParams,
    Node,
    Scenario,
    load_scenario,
    require_valid,
    scenario_to_dict,
)


def fmt(x: float) -> str:
    return f"{x:.9g}"


def write_csv(path: str | Path, header: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def parse_seeds(text: str) -> list[int]:
    """Comma-separated seeds; 'a-b' expands to the inclusive range."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    if not out:
        raise ValueError("empty seed list")
    return out


def gen_rng(seed: int, purpose: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, purpose])))


def gen_two_file(
    size_a: int, size_b: int, w_lo: float, w_hi: float, g: float, rng: np.random.Generator
) -> Scenario:
    """Two groups with g fixed and w drawn uniformly from [w_lo, w_hi]."""
    if not 0 < w_lo <= w_hi:
        raise ValueError("need 0 < w_lo <= w_hi")
    nodes = [Node(CostParams(w=float(rng.uniform(w_lo, w_hi)), g=g), needs=0) for _ in range(size_a)]
    nodes += [Node(CostParams(w=float(rng.uniform(w_lo, w_hi)), g=g), needs=1) for _ in range(size_b)]
    return Scenario(files=2, nodes=tuple(nodes))


def gen_coded(
    files: int, group_size: int, w_lo: float, w_hi: float, g: float, rng: np.random.Generator
) -> Scenario:
    if not 0 < w_lo <= w_hi:
        raise ValueError("need 0 < w_lo <= w_hi")
    nodes = [
        Node(CostParams(w=float(rng.uniform(w_lo, w_hi)), g=g), needs=f)
        for f in range(files)
        for _ in range(group_size)
    ]
    return Scenario(files=files, nodes=tuple(nodes))


def dump_scenarios(out: str, scenarios: dict[str, Scenario]) -> None:
    """Write the generated scenarios next to the results for reproducibility."""
    path = Path(out).with_suffix(Path(out).suffix + ".scenarios.json")
    data = {key: scenario_to_dict(s) for key, s in scenarios.items()}
    path.write_text(json.dumps(data, sort_keys=True, indent=2) + "\n")


NE_HEADER = ["kind", "node", "context", "w", "g", "needs", "value"]


def cmd_ne(args) -> int:
    s, _ = load_scenario(args.config)
    require_valid(s)
    rows: list[list[str]] = []
    if args.coded:
        eq = equilibrium.coded_equilibrium(s)
        profile = eq.profile
        for x, gx in enumerate(eq.gamma_by_file):
            rows.append(["Gamma", "", str(x), "", "", "", fmt(gx)])
        rows.append(["degenerate", "", "", "", "", "", str(int(eq.degenerate))])
    else:
        profile = equilibrium.two_file_equilibrium(s, alpha=args.alpha).profile
    for n in range(s.n_nodes):
        rows.append(
            ["gamma", str(n), "", fmt(s.w(n)), fmt(s.g(n)), str(s.nodes[n].needs), fmt(profile.gamma[n])]
        )
    for (n, x) in sorted(profile.lam):
        rows.append(
            ["lambda", str(n), str(x), fmt(s.w(n)), fmt(s.g(n)), str(s.nodes[n].needs), fmt(profile.lam[(n, x)])]
        )
    write_csv(args.out, NE_HEADER, rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


POA_HEADER = ["kind", "node", "w", "g", "needs", "avg_cost", "transmit_prob", "poa", "throughput", "total_duration"]


def cmd_poa(args) -> int:
    s, _ = load_scenario(args.config)
    require_valid(s)
    duration = equilibrium.ne_round_duration(s)
    rows = [
        [
            "system", "", "", "", "", "", "",
            fmt(equilibrium.poa_system(s)),
            fmt(equilibrium.throughput_at_ne(s)),
            fmt(duration.total),
        ]
    ]
    for n in range(s.n_nodes):
        nc = equilibrium.node_cost_at_ne(n, s)
        rows.append(
            [
                "node", str(n), fmt(s.w(n)), fmt(s.g(n)), str(s.nodes[n].needs),
                fmt(nc.avg_cost), fmt(nc.transmit_prob), fmt(equilibrium.poa_node(n, s)), "", "",
            ]
        )
    write_csv(args.out, POA_HEADER, rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


SIM_HEADER = ["seed", "kind", "node", "w", "g", "needs", "downloads", "uploads", "avg_cost", "throughput"]


def cmd_simulate(args) -> int:
    s, cfg_seed = load_scenario(args.config)
    require_valid(s)
    if not args.coded and s.files != 2:
        print("plain (uncoded) simulation requires a two-file scenario", file=sys.stderr)
        return 2
    profile = (
        equilibrium.coded_equilibrium(s).profile
        if args.coded
        else equilibrium.two_file_equilibrium(s, alpha=args.alpha).profile
    )
    seeds = parse_seeds(args.seeds) if args.seeds else [cfg_seed if cfg_seed is not None else 0]
    if args.trace and len(seeds) > 1:
        print("--trace requires a single seed", file=sys.stderr)
        return 2
    rows: list[list[str]] = []
    for seed in seeds:
        cfg = simulate.SimConfig(scenario=s, profile=profile, rounds=args.rounds, seed=seed, coded=args.coded)
        metrics = simulate.run_simulation(cfg, trace_path=args.trace or None)
        for n in range(s.n_nodes):
            rows.append(
                [
                    str(seed), "node", str(n), fmt(s.w(n)), fmt(s.g(n)), str(s.nodes[n].needs),
                    str(int(metrics.downloads[n])), str(int(metrics.uploads[n])),
                    fmt(metrics.avg_total_cost(n)), "",
                ]
            )
        rows.append([str(seed), "system", "", "", "", "", "", "", "", fmt(metrics.per_node_throughput())])
    write_csv(args.out, SIM_HEADER, rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


ADAPT_HEADER = ["seed", "epoch", "delta", "observed_inv_that_a", "observed_inv_that_b", "throughput"]
ADAPT_NODE_HEADER = ["seed", "epoch", "node", "that_guess", "rate"]


def cmd_adapt(args) -> int:
    s, cfg_seed = load_scenario(args.config)
    require_valid(s)
    cfg = adapt.AdaptConfig(
        epoch_rounds=args.epoch_rounds,
        epsilon=args.epsilon,
        guess_factor=args.guess_factor,
        updates=args.updates,
    )
    seeds = parse_seeds(args.seeds) if args.seeds else [cfg_seed if cfg_seed is not None else 0]
    rows: list[list[str]] = []
    node_rows: list[list[str]] = []
    for seed in seeds:
        result = adapt.run_adaptive_simulation(s, cfg, seed=seed)
        for rec in result.epochs:
            rows.append(
                [
                    str(seed), str(rec.epoch), fmt(rec.delta),
                    fmt(rec.observed_inv_that_a), fmt(rec.observed_inv_that_b), fmt(rec.throughput),
                ]
            )
            for node, guess, rate in rec.node_states:
                node_rows.append([str(seed), str(rec.epoch), str(node), fmt(guess), fmt(rate)])
    write_csv(args.out, ADAPT_HEADER, rows)
    if args.per_node_out:
        write_csv(args.per_node_out, ADAPT_NODE_HEADER, node_rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


FIG2_HEADER = ["epoch", "throughput_mean", "throughput_std", "ne_throughput"]


def cmd_fig2(args) -> int:
    seeds = parse_seeds(args.seeds)
    cfg = adapt.AdaptConfig(
        epoch_rounds=args.epoch_rounds,
        epsilon=args.epsilon,
        guess_factor=args.guess_factor,
        updates=args.updates,
    )
    trajectories: list[list[float]] = []
    ne_values: list[float] = []
    scenarios: dict[str, Scenario] = {}
    for seed in seeds:
        s = gen_two_file(args.group_size, args.group_size, args.w_lo, args.w_hi, args.g, gen_rng(seed, 1))
        scenarios[f"seed_{seed}"] = s
        result = adapt.run_adaptive_simulation(s, cfg, seed=seed)
        trajectories.append([rec.throughput for rec in result.epochs])
        ne_values.append(equilibrium.throughput_at_ne(s))
    data = np.array(trajectories)
    ne_mean = float(np.mean(ne_values))
    rows = [
        [str(epoch), fmt(float(np.mean(data[:, epoch]))), fmt(float(np.std(data[:, epoch]))), fmt(ne_mean)]
        for epoch in range(cfg.updates + 1)
    ]
    write_csv(args.out, FIG2_HEADER, rows)
    dump_scenarios(args.out, scenarios)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


FIG3_HEADER = ["num_files", "coded_throughput", "baseline_throughput", "simulated_throughput"]


def cmd_fig3(args) -> int:
    file_counts = [int(x) for x in args.files.split(",")]
    rows: list[list[str]] = []
    scenarios: dict[str, Scenario] = {}
    for f in file_counts:
        s = gen_coded(f, args.group_size, args.w_lo, args.w_hi, args.g, gen_rng(args.seed, f))
        scenarios[f"files_{f}"] = s
        require_valid(s)
        # Throughput only needs the per-file aggregates, which exist even
        # when the per-node split would go negative.
        eq = equilibrium.coded_equilibrium(s, allow_negative=True)
        analytic = equilibrium.coded_throughput(s, eq)
        simulated = ""
        if args.simulate:
            profile = equilibrium.coded_equilibrium(s).profile
            cfg = simulate.SimConfig(scenario=s, profile=profile, rounds=args.rounds, seed=args.seed, coded=True)
            metrics = simulate.run_simulation(cfg)
            simulated = fmt(metrics.per_node_throughput())
        rows.append([str(f), fmt(analytic), fmt(1.0 / f), simulated])
    write_csv(args.out, FIG3_HEADER, rows)
    dump_scenarios(args.out, scenarios)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bxsim",
        description="Equilibrium analysis and simulation of the broadcast exchange protocol",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_out(p):
        p.add_argument("--out", required=True, help="output CSV path")

    p_ne = sub.add_parser("ne", help="closed-form equilibrium rates")
    p_ne.add_argument("--config", required=True, help="scenario config (JSON)")
    p_ne.add_argument("--alpha", type=float, default=0.5, help="initiation share of group 0 (two-file)")
    p_ne.add_argument("--coded", action="store_true", help="solve the network-coded game")
    add_out(p_ne)
    p_ne.set_defaults(func=cmd_ne)

    p_poa = sub.add_parser("poa", help="prices of anarchy and node costs (two-file)")
    p_poa.add_argument("--config", required=True)
    add_out(p_poa)
    p_poa.set_defaults(func=cmd_poa)

    p_sim = sub.add_parser("simulate", help="simulate rounds under the equilibrium profile")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--rounds", type=int, default=100000)
    p_sim.add_argument("--seeds", help="comma-separated seeds (default: config seed or 0)")
    p_sim.add_argument("--alpha", type=float, default=0.5)
    p_sim.add_argument("--coded", action="store_true")
    p_sim.add_argument("--trace", help="per-round trace CSV (single seed only)")
    add_out(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_adapt = sub.add_parser("adapt", help="simulation-coupled distributed adaptation")
    p_adapt.add_argument("--config", required=True)
    p_adapt.add_argument("--updates", type=int, default=10)
    p_adapt.add_argument("--epoch-rounds", type=int, default=100, dest="epoch_rounds")
    p_adapt.add_argument("--epsilon", type=float, default=0.1)
    p_adapt.add_argument("--guess-factor", type=float, default=10.0, dest="guess_factor")
    p_adapt.add_argument("--seeds")
    p_adapt.add_argument("--per-node-out", dest="per_node_out", help="optional per-node state CSV")
    add_out(p_adapt)
    p_adapt.set_defaults(func=cmd_adapt)

    p_fig2 = sub.add_parser("fig2", help="adaptation convergence experiment (generated scenarios)")
    p_fig2.add_argument("--group-size", type=int, default=10, dest="group_size")
    p_fig2.add_argument("--w-lo", type=float, default=1.0, dest="w_lo")
    p_fig2.add_argument("--w-hi", type=float, default=2.0, dest="w_hi")
    p_fig2.add_argument("--g", type=float, default=1.0)
    p_fig2.add_argument("--seeds", default="0-19")
    p_fig2.add_argument("--updates", type=int, default=10)
    p_fig2.add_argument("--epoch-rounds", type=int, default=100, dest="epoch_rounds")
    p_fig2.add_argument("--epsilon", type=float, default=0.1)
    p_fig2.add_argument("--guess-factor", type=float, default=10.0, dest="guess_factor")
    add_out(p_fig2)
    p_fig2.set_defaults(func=cmd_fig2)

    p_fig3 = sub.add_parser("fig3", help="coded throughput vs file count (generated scenarios)")
    p_fig3.add_argument("--files", default="3,4,5,6,7,8", help="comma-separated file counts")
    p_fig3.add_argument("--group-size", type=int, default=10, dest="group_size")
    p_fig3.add_argument("--w-lo", type=float, default=1.0, dest="w_lo")
    p_fig3.add_argument("--w-hi", type=float, default=1.0, dest="w_hi")
    p_fig3.add_argument("--g", type=float, default=1.0)
    p_fig3.add_argument("--simulate", action="store_true", help="cross-check each point by simulation")
    p_fig3.add_argument("--rounds", type=int, default=20000)
    p_fig3.add_argument("--seed", type=int, default=0)
    add_out(p_fig3)
    p_fig3.set_defaults(func=cmd_fig3)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print("invalid scenario:", file=sys.stderr)
        for v in exc.violations:
            print(f"  {v}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"invalid arguments: {exc}", file=sys.stderr)
        return 2
    except (NegativeRateError, SingularSystemError, InconsistentSystemError) as exc:
        print(f"equilibrium does not exist: {exc}", file=sys.stderr)
        return 3
    except StallError as exc:
        print(f"simulation stalled: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())

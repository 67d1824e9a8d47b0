"""Command-line front end: certify, simulate, verify, sweep, demo-paper.

Scenario files are flat JSON objects; unknown keys are rejected.  Traces are
written as CSV (header row, times with 9 decimal digits), reports as JSON.
Exit codes: 0 ok, 1 usage/IO error, 2 assumption violation, 3 verification
failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import bounds as bounds_mod
from . import engine
from .bounds import DropoutSpec, TriggerParams, gamma_loss
from .errors import (AssumptionViolated, DegenerateBound, InvalidGraph,
                     InvalidSpectralGap, NotARoot, NotHurwitz, ScenarioError)
from .graph import build_graph
from .network import ChannelConfig

_REQUIRED_KEYS = {
    "adjacency", "x0", "beta", "lambda", "delta_bar", "gamma_d", "rho",
    "drop_prob", "delay_min", "delay_max", "mode", "consistency",
    "t_final", "tau_s", "seed",
}
_OPTIONAL_KEYS = {"per_agent", "clock_offsets"}


def load_scenario_dict(raw: dict, seed_override: int | None = None) -> engine.Scenario:
    """Validate a scenario dictionary and build the Scenario."""
    if not isinstance(raw, dict):
        raise ScenarioError("scenario file must contain a JSON object")
    keys = set(raw)
    missing = _REQUIRED_KEYS - keys
    unknown = keys - _REQUIRED_KEYS - _OPTIONAL_KEYS
    if missing:
        raise ScenarioError(f"missing keys: {sorted(missing)}")
    if unknown:
        raise ScenarioError(f"unknown keys: {sorted(unknown)}")
    if raw["mode"] not in ("theorem", "average"):
        raise ScenarioError(f"mode must be 'theorem' or 'average', got {raw['mode']!r}")
    if raw["consistency"] not in ("non-consistent", "consistent"):
        raise ScenarioError(f"bad consistency value {raw['consistency']!r}")
    try:
        graph = build_graph(raw["adjacency"])
        per_agent = raw.get("per_agent")
        if per_agent is not None:
            per_agent = tuple((float(p["beta"]), float(p["lambda"])) for p in per_agent)
        offsets = raw.get("clock_offsets")
        if offsets is not None:
            offsets = tuple(float(v) for v in offsets)
        trigger = TriggerParams(beta=float(raw["beta"]), lam=float(raw["lambda"]),
                                delta_bar=float(raw["delta_bar"]),
                                gamma_d=float(raw["gamma_d"]),
                                per_agent=per_agent, clock_offsets=offsets)
        seed = int(raw["seed"]) if seed_override is None else int(seed_override)
        dropout = DropoutSpec(rho=int(raw["rho"]), drop_prob=float(raw["drop_prob"]))
        channel = ChannelConfig(delay_min=float(raw["delay_min"]),
                                delay_max=float(raw["delay_max"]),
                                drop_prob=float(raw["drop_prob"]),
                                rho=int(raw["rho"]), seed=seed,
                                mode=raw["consistency"])
        return engine.Scenario(graph=graph, x0=np.asarray(raw["x0"], dtype=float),
                               trigger=trigger, dropout=dropout, channel=channel,
                               mode=raw["mode"], t_final=float(raw["t_final"]),
                               tau_s=float(raw["tau_s"]), seed=seed)
    except (KeyError, TypeError, ValueError, InvalidGraph) as exc:
        if isinstance(exc, (AssumptionViolated,)):
            raise
        raise ScenarioError(f"invalid scenario: {exc}") from exc


def load_scenario(path, seed_override: int | None = None) -> engine.Scenario:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    return load_scenario_dict(raw, seed_override)


def demo_paper_path() -> Path:
    """Path of the bundled six-agent reproduction scenario."""
    return Path(resources.files("etconsensus").joinpath("data/paper6.json"))


def _fmt_t(t: float) -> str:
    return f"{t:.9f}"


def write_trace_csv(trace: engine.TraceLog, out_dir: Path) -> None:
    n_agents, n = trace.states.shape[1], trace.states.shape[2]
    if n == 1:
        headers = [f"x{i + 1}" for i in range(n_agents)]
    else:
        headers = [f"x{i + 1}_{k}" for i in range(n_agents) for k in range(n)]
    with open(out_dir / "states.csv", "w") as f:
        f.write("t," + ",".join(headers) + "\n")
        flat = trace.states.reshape(trace.states.shape[0], -1)
        for t, row in zip(trace.times, flat):
            f.write(_fmt_t(t) + "," + ",".join(f"{v:.12g}" for v in row) + "\n")
    with open(out_dir / "events.csv", "w") as f:
        f.write("agent,t_k,cause\n")
        for agent, t, cause in trace.events:
            f.write(f"{agent + 1},{_fmt_t(t)},{cause}\n")
    with open(out_dir / "deliveries.csv", "w") as f:
        f.write("sender,receiver,sent_at,arrived_at,dropped\n")
        for rec in trace.deliveries:
            arrived = "" if rec.arrived_at is None else _fmt_t(rec.arrived_at)
            dropped = 1 if rec.arrived_at is None else 0
            f.write(f"{rec.sender + 1},{rec.receiver + 1},{_fmt_t(rec.sent_at)},"
                    f"{arrived},{dropped}\n")


def trace_metrics(trace: engine.TraceLog, s: engine.Scenario) -> dict:
    intervals = np.concatenate(trace.inter_event_intervals(s.graph.n_agents))
    drop_runs: dict[str, int] = {}
    for rec in trace.deliveries:
        drop_runs.setdefault(f"{rec.sender + 1}->{rec.receiver + 1}", 0)
    run_now: dict[str, int] = {}
    for rec in trace.deliveries:
        key = f"{rec.sender + 1}->{rec.receiver + 1}"
        if rec.arrived_at is None:
            run_now[key] = run_now.get(key, 0) + 1
            drop_runs[key] = max(drop_runs[key], run_now[key])
        else:
            run_now[key] = 0
    return {
        "final_spread": float(trace.spread_series()[-1]),
        "min_inter_event": float(intervals.min()) if intervals.size else None,
        "max_inter_event": float(intervals.max()) if intervals.size else None,
        "max_consecutive_drops": drop_runs,
        "event_count": len(trace.events),
    }


def cmd_certify(args) -> int:
    s = load_scenario(args.scenario, args.seed)
    report = bounds_mod.certify(s)
    text = report.to_json(indent=2)
    print(text)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "bounds.json").write_text(text + "\n")
    return 0


def cmd_simulate(args) -> int:
    s = load_scenario(args.scenario, args.seed)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output dir: {exc}", file=sys.stderr)
        return 1
    trace = engine.run(s, strict=args.strict)
    write_trace_csv(trace, out)
    (out / "metrics.json").write_text(json.dumps(trace_metrics(trace, s), indent=2) + "\n")
    return 0


def cmd_verify(args) -> int:
    s = load_scenario(args.scenario, args.seed)
    report = bounds_mod.certify(s)
    trace = engine.run(s, strict=args.strict)
    vr = engine.verify(trace, report, s)
    text = vr.to_json(indent=2)
    print(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "verification.json").write_text(text + "\n")
        (out / "bounds.json").write_text(report.to_json(indent=2) + "\n")
    return 0 if vr.passed else 3


_SWEEP_PARAMS = ("drop_prob", "delay_max", "beta", "lambda", "rho", "seed")


def cmd_sweep(args) -> int:
    if args.param not in _SWEEP_PARAMS:
        print(f"error: unknown sweep param {args.param!r} "
              f"(choose from {_SWEEP_PARAMS})", file=sys.stderr)
        return 1
    raw = json.loads(Path(args.scenario).read_text())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    values = [float(v) if args.param not in ("rho", "seed") else int(v)
              for v in args.values.split(",")]
    rows = []
    for idx, value in enumerate(values):
        variant = dict(raw)
        variant[args.param] = value
        if args.param != "seed":
            # deterministic per-row RNG stream derived from the master seed
            variant["seed"] = int(np.random.SeedSequence(
                [int(raw["seed"]), idx]).generate_state(1)[0])
        s = load_scenario_dict(variant)
        trace = engine.run(s)
        metrics = trace_metrics(trace, s)
        delivered = sum(1 for r in trace.deliveries if r.arrived_at is not None)
        dropped = sum(1 for r in trace.deliveries if r.arrived_at is None)
        gl = gamma_loss(s.trigger.effective_beta, s.trigger.effective_lam,
                        s.dropout.rho, s.trigger.delta_bar)
        rows.append((value, metrics, delivered, dropped, gl))
    with open(out / "sweep.csv", "w") as f:
        f.write(f"{args.param},final_spread,min_inter_event,max_inter_event,"
                "delivered,dropped,gamma_l\n")
        for value, metrics, delivered, dropped, gl in rows:
            f.write(f"{value},{metrics['final_spread']:.12g},"
                    f"{metrics['min_inter_event']},{metrics['max_inter_event']},"
                    f"{delivered},{dropped},{gl:.12g}\n")
    return 0


def cmd_demo_paper(args) -> int:
    """Run certify + simulate + verify on the bundled six-agent scenario."""
    s = load_scenario(demo_paper_path(), args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = bounds_mod.certify(s)
    (out / "bounds.json").write_text(report.to_json(indent=2) + "\n")
    trace = engine.run(s, strict=args.strict)
    write_trace_csv(trace, out)
    (out / "metrics.json").write_text(json.dumps(trace_metrics(trace, s), indent=2) + "\n")
    vr = engine.verify(trace, report, s)
    (out / "verification.json").write_text(vr.to_json(indent=2) + "\n")
    print(f"tau={report.tau:.6g} d={report.d_max:.6g} "
          f"final_spread={trace.spread_series()[-1]:.6g} "
          f"verification={'pass' if vr.passed else 'FAIL'}")
    print(f"plot recipe: python -c \"import pandas as pd, matplotlib.pyplot as plt; "
          f"d = pd.read_csv('{out}/states.csv'); d.plot(x='t'); plt.show()\"")
    return 0 if vr.passed else 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="etconsensus",
        description="Event-triggered consensus simulation and certification")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, scenario_required=True):
        if scenario_required:
            p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--seed", type=int, default=None, help="override scenario seed")
        p.add_argument("--strict", action="store_true",
                       help="abort on the first invariant breach")

    p = sub.add_parser("certify", help="evaluate all closed-form bounds")
    add_common(p)
    p.add_argument("--out", default=None, help="also write bounds.json here")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("simulate", help="run the scenario and write trace CSVs")
    add_common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="certify, simulate, and check all invariants")
    add_common(p)
    p.add_argument("--out", default=None, help="output directory for reports")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="re-run the scenario across parameter values")
    add_common(p)
    p.add_argument("--param", required=True, help=f"one of {_SWEEP_PARAMS}")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("demo-paper", help="run the bundled six-agent scenario")
    add_common(p, scenario_required=False)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_demo_paper)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (AssumptionViolated, NotARoot, NotHurwitz, InvalidSpectralGap,
            DegenerateBound, InvalidGraph) as exc:
        print(f"assumption violated: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

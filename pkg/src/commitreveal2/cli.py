"""Command-line entry point for reproducible runs.

Exit codes: 0 success, 1 assertion failure (route mismatch, tolerance breach,
vector drift), 2 usage errors. CR2_OUT overrides the default output directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import analysis, simulator, vectors
from .simulator import InvalidScenario, LivenessTimeout, RouteMismatch, ScenarioScript

EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_USAGE = 2


def _parse_n_range(spec: str) -> list[int]:
    values: list[int] = []
    for part in spec.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..", 1)
            values.extend(range(int(lo), int(hi) + 1))
        elif part:
            values.append(int(part))
    if not values or any(n < 2 for n in values):
        raise ValueError(f"bad operator-count range {spec!r}")
    return values


def _load_script(path: str, seed: int | None, rounds: int | None) -> ScenarioScript:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InvalidScenario(f"cannot read scenario {path}: {exc}") from exc
    script = ScenarioScript.from_json(text)
    if seed is not None:
        script = script.__class__(**{**script.__dict__, "seed": seed})
    if rounds is not None:
        script = script.__class__(**{**script.__dict__, "rounds": rounds})
    return script


def _out_dir(args) -> Path:
    out = os.environ.get("CR2_OUT", args.out)
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write(path: Path, content: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(content)
    tmp.replace(path)


def _cmd_run(args) -> int:
    script = _load_script(args.scenario, args.seed, args.rounds)
    out = _out_dir(args)
    try:
        result = simulator.run(script)
    except RouteMismatch as exc:
        print(f"route assertion failed: {exc}", file=sys.stderr)
        return EXIT_ASSERTION
    _write(out / f"{script.name}-transcript.jsonl", result.transcript.to_jsonl())
    summary = {
        "scenario": script.name,
        "seed": script.seed,
        "routes": {str(rid): route for rid, route in sorted(result.routes().items())},
        "outputs": {str(rid): output.hex()
                    for rid, output in sorted(result.outputs().items())},
        "meter": result.ledger.meter.snapshot(),
    }
    _write(out / f"{script.name}-summary.json",
           json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if args.format == "text":
        for rid, route in sorted(result.routes().items()):
            print(f"round {rid}: {' -> '.join(route)}")
        for rid, output in sorted(result.outputs().items()):
            print(f"round {rid} output: {output.hex()}")
    else:
        print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def _cmd_sweep(args) -> int:
    script = _load_script(args.scenario, args.seed, None)
    n_values = _parse_n_range(args.n)
    rows = simulator.sweep(script, n_values)
    counters = [key for key in rows[0] if key != "n"]
    csv_lines = ["n," + ",".join(counters)]
    for row in rows:
        csv_lines.append(",".join(str(row[k]) for k in ["n"] + counters))
    csv_text = "\n".join(csv_lines) + "\n"
    out = _out_dir(args)
    _write(out / f"{script.name}-sweep.csv", csv_text)
    if len(rows) >= 3:
        fits = analysis.cost_report(rows)
        fit_lines = ["counter,slope,intercept,rSquared,exact"]
        for name, fit in sorted(fits.items()):
            fit_lines.append(f"{name},{fit.slope:g},{fit.intercept:g},"
                             f"{fit.r_squared:g},{str(fit.exact).lower()}")
        _write(out / f"{script.name}-fits.csv", "\n".join(fit_lines) + "\n")
    if args.format == "csv":
        print(csv_text, end="")
    else:
        fits = analysis.cost_report(rows)
        report = {name: {"slope": fit.slope, "intercept": fit.intercept,
                         "rSquared": fit.r_squared, "exact": fit.exact}
                  for name, fit in sorted(fits.items())}
        print(json.dumps(report, sort_keys=True))
    return EXIT_OK


def _cmd_bias(args) -> int:
    report = analysis.bias_test(args.rounds, args.operators, args.seed)
    out = _out_dir(args)
    payload = {
        "rounds": report.sample_count,
        "operators": args.operators,
        "seed": args.seed,
        "maxDeviation": report.max_deviation,
        "perBitFrequency": list(report.per_bit_frequency),
    }
    _write(out / "bias-report.json", json.dumps(payload, sort_keys=True) + "\n")
    print(f"max per-bit deviation from 0.5: {report.max_deviation:.4f} "
          f"over {report.sample_count} rounds")
    return EXIT_OK if report.within(args.tolerance) else EXIT_ASSERTION


def _cmd_grief(args) -> int:
    script = _load_script(args.scenario, args.seed, None)
    report = simulator.griefing_report(script)
    payload = {
        "n": report.n,
        "leaderWork": report.leader_work,
        "grieferWork": report.griefer_work,
        "ratio": report.ratio,
        "leaderMeter": report.leader_meter,
        "grieferMeter": report.griefer_meter,
    }
    out = _out_dir(args)
    _write(out / f"{script.name}-griefing.json",
           json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"n={report.n} leader={report.leader_work} griefer={report.griefer_work} "
          f"ratio={report.ratio:.2f}")
    return EXIT_OK


def _cmd_vectors(_args) -> int:
    failures = vectors.verify_vectors()
    if failures:
        for failure in failures:
            print(f"vector drift: {failure}", file=sys.stderr)
        return EXIT_ASSERTION
    print(f"all {len(vectors.load_vector_lines())} golden vectors verified")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cr2",
        description="Commit-reveal beacon simulator: scenarios, sweeps, statistics, vectors",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one scenario and assert its route")
    run_p.add_argument("--scenario", required=True)
    run_p.add_argument("--seed", type=int, default=None,
                       help="override the scenario file's seed")
    run_p.add_argument("--rounds", type=int, default=None)
    run_p.add_argument("--out", default="out")
    run_p.add_argument("--format", choices=["json", "text"], default="text")
    run_p.set_defaults(fn=_cmd_run)

    sweep_p = sub.add_parser("sweep", help="run a scenario across operator counts")
    sweep_p.add_argument("--scenario", required=True)
    sweep_p.add_argument("--n", required=True, help="range like 3..32 or list like 3,10,20")
    sweep_p.add_argument("--seed", type=int, default=None)
    sweep_p.add_argument("--out", default="out")
    sweep_p.add_argument("--format", choices=["csv", "json"], default="csv")
    sweep_p.set_defaults(fn=_cmd_sweep)

    bias_p = sub.add_parser("bias", help="per-bit balance of the output over honest rounds")
    bias_p.add_argument("--rounds", type=int, default=10_000)
    bias_p.add_argument("--operators", type=int, default=3)
    bias_p.add_argument("--seed", type=int, default=0)
    bias_p.add_argument("--tolerance", type=float, default=0.02)
    bias_p.add_argument("--out", default="out")
    bias_p.set_defaults(fn=_cmd_bias)

    grief_p = sub.add_parser("grief", help="leader-vs-griefer cost asymmetry report")
    grief_p.add_argument("--scenario", required=True)
    grief_p.add_argument("--seed", type=int, default=None)
    grief_p.add_argument("--out", default="out")
    grief_p.set_defaults(fn=_cmd_grief)

    vec_p = sub.add_parser("vectors", help="re-derive and check all golden vectors")
    vec_p.set_defaults(fn=_cmd_vectors)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.fn(args)
    except (InvalidScenario, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LivenessTimeout as exc:
        print(f"liveness failure: {exc}", file=sys.stderr)
        return EXIT_ASSERTION


if __name__ == "__main__":
    sys.exit(main())

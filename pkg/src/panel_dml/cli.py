"""Command line interface: ``panel-dml {simulate,estimate,experiment,report,timing}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from . import harness
from .boost import BoostConfig
from .crossfit import Strategy
from .dgp import GENERATORS, DgpConfig, SimulationTruth, generate, normalize_dgp_keys
from .errors import PanelDmlError
from .estimators import EstimatorSpec, Method, estimate
from .paneldata import read_csv, write_csv

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


def _load_mapping(path: str) -> dict:
    p = Path(path)
    if p.suffix.lower() == ".json":
        return json.loads(p.read_text())
    with open(p, "rb") as fh:
        return tomllib.load(fh)


def _cmd_simulate(args: argparse.Namespace) -> int:
    data = normalize_dgp_keys(_load_mapping(args.config)) if args.config else {}
    generator = data.pop("generator", "auto")
    overrides = {
        "n_units": args.n_units, "n_periods": args.n_periods, "n_confounders": args.n_confounders,
        "structure": args.structure, "functional_form": args.form, "rho": args.rho,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    if args.two_way:
        data["two_way"] = True
    if args.seed is not None:
        data["seed"] = args.seed
    if "n_units" not in data or "n_periods" not in data:
        raise PanelDmlError("simulate needs n_units and n_periods (config file or --n-units/--n-periods)")
    cfg = DgpConfig.from_dict(data)
    dataset, truth = generate(cfg, args.generator or generator)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(dataset, out)
    truth_path = Path(args.truth_out) if args.truth_out else out.parent / "truth.json"
    truth_path.write_text(json.dumps(truth.to_dict(), indent=2, sort_keys=True) + "\n")
    print(f"wrote {out} ({dataset.n_obs} rows) and {truth_path}")
    return 0


def _cmd_estimate(args: argparse.Namespace) -> int:
    dataset = read_csv(args.data)
    truth = SimulationTruth.from_dict(json.loads(Path(args.truth).read_text())) if args.truth else None
    spec = EstimatorSpec(
        method=Method.parse(args.method),
        boost=BoostConfig(max_rounds=args.max_rounds),
        split=Strategy.parse(args.split),
        n_folds=args.folds,
        neighbor_width=args.nlo_width,
        two_way=args.two_way,
        late_demean_scope=args.late_demean_scope,
        final_stage=args.final_stage,
    )
    result = estimate(dataset, spec, truth=truth, seed=args.seed)
    print(result.to_json(include_timing=not args.no_timing))
    return 0


def _cmd_experiment(args: argparse.Namespace) -> int:
    if args.list_presets:
        print("\n".join(harness.preset_names()))
        return 0
    if bool(args.config) == bool(args.preset):
        raise PanelDmlError("give exactly one of --config or --preset")
    cfg = harness.load_config(args.config) if args.config else harness.preset(args.preset)
    changes = {"out_dir": Path(args.out)}
    if args.workers is not None:
        changes["workers"] = args.workers
    if args.reps is not None:
        changes["n_reps"] = args.reps
    if args.seed is not None:
        changes["base_seed"] = args.seed
    if args.record_timing:
        changes["record_timing"] = True
    cfg = cfg.replace(**changes)
    result = harness.run_experiment(cfg, progress=args.progress)
    print(f"{len(result.rows)} rows ({result.n_failed} failed) written to {cfg.out_dir}")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    result = harness.read_results(args.in_dir)
    out = Path(args.out) if args.out else Path(args.in_dir)
    for kind in args.kind:
        for path in harness.emit_report(result, kind, out):
            print(path)
    return 0


def _parse_shape(text: str) -> tuple[int, int]:
    try:
        n, t = text.lower().split("x")
        return int(n), int(t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"shape must look like 500x10, got {text!r}") from None


def _cmd_timing(args: argparse.Namespace) -> int:
    methods = [Method.parse(m) for m in args.methods] if args.methods else None
    kwargs = {"methods": methods} if methods else {}
    rows = harness.timing_benchmark(args.shape or [(500, 10)], n_iter=args.iters, seed=args.seed, **kwargs)
    print("n_units,n_periods,method,mean_seconds")
    for r in rows:
        print(f"{r.n_units},{r.n_periods},{r.method},{r.mean_seconds:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="panel-dml", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="draw one simulated panel and write it as CSV")
    s.add_argument("--config", help="TOML or JSON file with DGP settings")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True, help="CSV path")
    s.add_argument("--truth-out", help="where to write the truth sidecar (default: truth.json next to --out)")
    s.add_argument("--n-units", type=int)
    s.add_argument("--n-periods", type=int)
    s.add_argument("--n-confounders", type=int)
    s.add_argument("--structure", choices=["A", "B", "C"])
    s.add_argument("--form", choices=["linear", "ushaped"])
    s.add_argument("--rho", type=float)
    s.add_argument("--two-way", action="store_true")
    s.add_argument("--generator", choices=GENERATORS)
    s.set_defaults(func=_cmd_simulate)

    e = sub.add_parser("estimate", help="estimate the treatment effect on a CSV panel")
    e.add_argument("--data", required=True)
    e.add_argument("--method", required=True, help=", ".join(m.value for m in Method))
    e.add_argument("--split", default="random", choices=[s.value for s in Strategy])
    e.add_argument("--folds", type=int, help="K (default 5, or 10 for nlo)")
    e.add_argument("--nlo-width", type=int, default=1, help="folds dropped on each side under nlo")
    e.add_argument("--truth", help="truth.json, required by the oracle methods")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--two-way", action="store_true")
    e.add_argument("--late-demean-scope", choices=["global", "fold"], default="global")
    e.add_argument("--final-stage", choices=["average", "pooled"], default="average")
    e.add_argument("--max-rounds", type=int, default=200)
    e.add_argument("--no-timing", action="store_true", help="omit wall_time from the output")
    e.set_defaults(func=_cmd_estimate)

    x = sub.add_parser("experiment", help="run a Monte Carlo experiment")
    x.add_argument("--config", help="experiment TOML (see docs/experiment-config.md)")
    x.add_argument("--preset", help="named configuration, see --list-presets")
    x.add_argument("--list-presets", action="store_true")
    x.add_argument("--out", default="results")
    x.add_argument("--workers", type=int)
    x.add_argument("--reps", type=int, help="override n_reps")
    x.add_argument("--seed", type=int, help="override base_seed")
    x.add_argument("--record-timing", action="store_true", help="fill the wall_time_s column")
    x.add_argument("--progress", action="store_true")
    x.set_defaults(func=_cmd_experiment)

    r = sub.add_parser("report", help="render figures and tables from an experiment directory")
    r.add_argument("--in", dest="in_dir", required=True)
    r.add_argument("--kind", action="append", choices=harness.REPORT_KINDS, required=True)
    r.add_argument("--out", help="output directory (default: the input directory)")
    r.set_defaults(func=_cmd_report)

    t = sub.add_parser("timing", help="time the DML methods")
    t.add_argument("--shape", type=_parse_shape, action="append", help="NxT, repeatable (default 500x10)")
    t.add_argument("--methods", nargs="+")
    t.add_argument("--iters", type=int, default=5)
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(func=_cmd_timing)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (PanelDmlError, OSError) as exc:
        print(f"panel-dml: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``equalqa {gen,run,profile-precision,sweep-ensembles,report}``.

Exit codes: 0 on success, 1 for usage or configuration errors, 2 for runtime
failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

from .core import model_to_dict, save_model
from .experiments import (
    ConfigError,
    ExperimentConfig,
    JoinError,
    check_baseline,
    dump_json,
    instance_tag,
    load_config,
    map_instances,
    profile_precision,
    run_experiment,
    solve_ground,
    suite_models,
    summarize,
    sweep_ensembles,
)
from .topology import cast_maxcut, random_chimera_instance, sk_maxcut_graph

log = logging.getLogger("equalqa")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 by default; usage problems map to 1 here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _csv_text(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow(["" if r.get(c) is None else (repr(r[c]) if isinstance(r[c], float) else r[c]) for c in columns])
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _resolve_config(args, overrides: dict) -> ExperimentConfig:
    """Config file, then per-flag overrides, then ``EQUAL_SEED``."""
    doc = load_config(args.config) if args.config else {}
    for key, value in overrides.items():
        if value is None:
            continue
        if key in ("instance_seed", "chimera_m"):
            bench = dict(doc.get("benchmark", {"kind": "chimera", "m": 2, "seed": 0}))
            bench["seed" if key == "instance_seed" else "m"] = value
            if key == "chimera_m":
                bench["kind"] = "chimera"
            doc["benchmark"] = bench
        elif key.startswith("device."):
            doc.setdefault("device", {})[key.split(".", 1)[1]] = value
        else:
            doc[key] = value
    env = os.environ.get("EQUAL_SEED")
    if env is not None:
        try:
            doc["master_seed"] = int(env)
        except ValueError:
            raise ConfigError([f"EQUAL_SEED must be an integer, got {env!r}"])
    return ExperimentConfig.from_dict(doc)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="experiment configuration JSON")
    p.add_argument("--instance-seed", type=int, help="benchmark instance seed")
    p.add_argument("--chimera-m", type=int, help="use a random Chimera C_m benchmark")
    p.add_argument("--master-seed", type=int)
    p.add_argument("--bits", type=int, dest="device_bits", help="device precision")
    p.add_argument("--sigma-h", type=float)
    p.add_argument("--sigma-j", type=float)
    p.add_argument("--sweeps", type=int)
    p.add_argument("--workers", type=int)


def _common_overrides(args) -> dict:
    return {
        "instance_seed": args.instance_seed,
        "chimera_m": args.chimera_m,
        "master_seed": args.master_seed,
        "device.bits": args.device_bits,
        "device.sigma_h": args.sigma_h,
        "device.sigma_j": args.sigma_j,
        "device.sweeps": args.sweeps,
        "workers": args.workers,
    }


def cmd_gen(args) -> int:
    if args.kind == "chimera":
        model = random_chimera_instance(args.m, args.seed, args.couplers_only, args.dead or ())
    else:
        model = cast_maxcut(sk_maxcut_graph(args.n, args.seed))
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        save_model(model, args.out)
    else:
        sys.stdout.write(json.dumps(model_to_dict(model), indent=1) + "\n")
    stats = model.coefficient_stats()
    print(
        f"n={model.n} couplers={model.num_couplers} linear={len(model.h)} "
        f"mean={stats['mean']:.4f} std={stats['std']:.4f} min={stats['min']:.4f} max={stats['max']:.4f}",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _resolve_config(
        args,
        {
            **_common_overrides(args),
            "scheme": args.scheme,
            "m": args.m,
            "k_gauges": args.k_gauges,
            "total_trials": args.total_trials,
            "checkpoints": args.checkpoints,
            "output_dir": args.output_dir,
        },
    )
    baseline = None
    if args.baseline:
        try:
            baseline = json.loads(Path(args.baseline).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError([f"cannot read baseline {args.baseline}: {exc}"])
        problems = check_baseline(cfg, baseline)
        if problems:
            raise ConfigError(problems)
    doc, curve = run_experiment(cfg, baseline)
    stem = f"{doc['scheme']}-{instance_tag(cfg.benchmark)}"
    out = Path(args.out) if args.out else Path(cfg.output_dir) / f"{stem}.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(dump_json(doc))
    if curve is not None:
        rows = [{"trials": t, "er": e} for t, e in curve]
        out.with_suffix(".curve.csv").write_text(_csv_text(rows, ["trials", "er"]))
    rel = "" if doc["relative_er"] is None else f" relative_er={doc['relative_er']:.4f}"
    print(f"{doc['scheme']}: e_min={doc['e_min']:.6f} er={doc['er']:.6f}{rel} -> {out}")
    return EXIT_OK


def _suite(args, cfg: ExperimentConfig):
    models = [m for _, m in suite_models(cfg.benchmark, args.instances)]
    grounds = map_instances(lambda m: solve_ground(m, cfg.ground_truth), models, cfg.workers)
    return models, grounds


def cmd_profile_precision(args) -> int:
    cfg = _resolve_config(args, _common_overrides(args))
    models, grounds = _suite(args, cfg)
    rows = profile_precision(models, grounds, cfg.device, args.bits_list, args.trials, cfg.master_seed, cfg.workers)
    _emit(_csv_text(rows, ["bits", "relative_er", "er", "er_ref"]), args.out)
    return EXIT_OK


def cmd_sweep_ensembles(args) -> int:
    cfg = _resolve_config(args, {**_common_overrides(args), "total_trials": args.total_trials})
    models, grounds = _suite(args, cfg)
    rows = sweep_ensembles(models, grounds, cfg.device, args.m_list, cfg.total_trials, cfg.master_seed, cfg.workers)
    _emit(_csv_text(rows, ["m", "er", "er_min", "er_max"]), args.out)
    return EXIT_OK


REPORT_COLUMNS = [
    "scheme", "instances", "ranked", "mean_er", "std_er",
    "mean_relative_er", "min_relative_er", "max_relative_er", "std_relative_er",
]


def _fmt(v) -> str:
    return "-" if v is None else (f"{v:.4f}" if isinstance(v, float) else str(v))


def cmd_report(args) -> int:
    docs = []
    for f in args.files:
        try:
            docs.append(json.loads(Path(f).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError([f"cannot read result {f}: {exc}"])
    rows = summarize(docs)
    text = _csv_text(rows, REPORT_COLUMNS)
    if args.out:
        _emit(text, args.out)
    widths = [max(len(c), *(len(_fmt(r[c])) for r in rows)) for c in REPORT_COLUMNS]
    print("  ".join(c.ljust(w) for c, w in zip(REPORT_COLUMNS, widths)))
    for r in rows:
        print("  ".join(_fmt(r[c]).ljust(w) for c, w in zip(REPORT_COLUMNS, widths)))
    if not args.out:
        sys.stdout.write("\n" + text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="equalqa", description="Ensemble quantum-annealing error mitigation experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a benchmark model file")
    gsub = g.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    gc = gsub.add_parser("chimera", help="random Chimera instance")
    gc.add_argument("--m", type=int, required=True)
    gc.add_argument("--couplers-only", action="store_true")
    gc.add_argument("--dead", type=_int_list, help="comma-separated inactive qubits")
    gs = gsub.add_parser("sk", help="SK Max-Cut instance cast to Ising form")
    gs.add_argument("--n", type=int, required=True)
    for p in (gc, gs):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="model file (default: stdout)")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="run one scheme on one instance")
    _add_common(r)
    r.add_argument("--scheme", choices=["baseline", "equal", "equal_plus", "sqc_only", "srt"])
    r.add_argument("--m", type=int)
    r.add_argument("--k-gauges", type=int)
    r.add_argument("--total-trials", type=int)
    r.add_argument("--checkpoints", type=_int_list)
    r.add_argument("--output-dir")
    r.add_argument("--out", help="result JSON path (default: <output_dir>/<scheme>-<instance>.json)")
    r.add_argument("--baseline", help="baseline result JSON for relative ER")
    r.set_defaults(func=cmd_run)

    pp = sub.add_parser("profile-precision", help="baseline ER against coefficient precision")
    _add_common(pp)
    pp.add_argument("--bits-list", type=_int_list, default=list(range(2, 17)))
    pp.add_argument("--trials", type=int, default=20_000)
    pp.add_argument("--instances", type=int, default=1)
    pp.add_argument("--out")
    pp.set_defaults(func=cmd_profile_precision)

    se = sub.add_parser("sweep-ensembles", help="EQUAL ER against ensemble size")
    _add_common(se)
    se.add_argument("--m-list", type=_int_list, default=[1, 2, 5, 10, 20, 50])
    se.add_argument("--total-trials", type=int)
    se.add_argument("--instances", type=int, default=1)
    se.add_argument("--out")
    se.set_defaults(func=cmd_sweep_ensembles)

    rp = sub.add_parser("report", help="summarize result files")
    rp.add_argument("files", nargs="+")
    rp.add_argument("--out", help="summary CSV path")
    rp.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    for name in ("instances", "trials"):
        if getattr(args, name, 1) < 1:
            parser.error(f"--{name} must be >= 1")
    if getattr(args, "bits_list", None) == [] or getattr(args, "m_list", None) == []:
        parser.error("list arguments must be non-empty")
    try:
        return args.func(args)
    except (ConfigError, JoinError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - every other failure is a runtime error
        log.debug("runtime failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

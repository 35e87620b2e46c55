"""Command-line surface.

Subcommands: synth, inspect, run, sweep-m, theory, report.

Exit codes: 0 success, 1 config error, 2 data error, 3 numerical error.
All artifacts are written atomically (temp file + rename) into a run
directory and embed the fully resolved config.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__, protocols, store, synth, theory
from .errors import (
    ConfigError,
    CorruptionError,
    GramclError,
    InfeasibleSplitError,
    MissingDomainError,
    ParameterError,
    SingularityError,
    StepSizeError,
    UnsupportedFormatError,
    ValidationError,
)

EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

_DATA_ERRORS = (CorruptionError, UnsupportedFormatError, ValidationError,
                MissingDomainError, InfeasibleSplitError, FileNotFoundError)
_NUMERICAL_ERRORS = (SingularityError, StepSizeError)

OUTPUT_ROOT_ENV = "GRAMCL_OUTPUT_ROOT"


def _atomic_write(path: Path, data: str | bytes) -> None:
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode) as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return "" if x is None else str(x)


def _csv(rows: list[list], header: list[str]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _run_dir(args, tag: str) -> Path:
    if args.output:
        root = Path(args.output)
    else:
        root = Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))
        root = root / f"{tag}-{time.strftime('%Y%m%d-%H%M%S')}"
    root.mkdir(parents=True, exist_ok=True)
    return root


def _apply_overrides(doc: dict, overrides: list[str]) -> dict:
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = doc
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
    return doc


def _load_config(args) -> protocols.RunConfig:
    doc = {}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    doc = _apply_overrides(doc, args.override or [])
    if args.dataset:
        doc["dataset"] = args.dataset
    if "dataset" not in doc:
        raise ConfigError("no dataset given (config 'dataset' or --dataset)")
    try:
        return protocols.RunConfig(**doc)
    except TypeError as exc:
        raise ConfigError(f"bad config field: {exc}") from exc


def _result_artifacts(result: protocols.RunResult, out: Path) -> None:
    doc = result.to_dict()
    doc["tool_version"] = __version__
    _atomic_write(out / "result.json", json.dumps(doc, indent=2, sort_keys=True))

    T = result.R.shape[0]
    rows = [[t + 1] + [result.R[t, i] for i in range(T)] for t in range(T)]
    _atomic_write(out / "R.csv",
                  _csv(rows, ["task"] + [f"R_{i+1}" for i in range(T)]))
    rows = [
        [t + 1, result.avg_acc[t], result.forgetting[t], result.lambdas[t]]
        for t in range(len(result.avg_acc))
    ]
    _atomic_write(out / "metrics.csv",
                  _csv(rows, ["task", "avg_accuracy", "avg_forgetting", "lambda"]))


def _summary(result: protocols.RunResult) -> str:
    lines = [
        f"method: {result.config['method']}  protocol: {result.config['protocol']}",
        f"final average accuracy A_T = {result.final_avg_acc:.4f}",
    ]
    if result.forgetting and result.forgetting[-1] is not None:
        lines.append(f"final average forgetting F_T = {result.forgetting[-1]:.4f}")
    lines.append("task  avg_acc  forgetting  lambda")
    for t, a in enumerate(result.avg_acc):
        f_t = result.forgetting[t]
        lam = result.lambdas[t]
        lines.append(
            f"{t+1:4d}  {a:7.4f}  {f_t if f_t is None else f'{f_t:10.4f}'}  {lam}"
        )
    return "\n".join(lines)


def cmd_synth(args) -> int:
    spec = synth.SynthSpec(
        K=args.classes, L=args.dim, per_class=args.per_class,
        val_per_class=args.val_per_class, seed=args.seed,
        mean_scale=args.mean_scale, noise_scale=args.noise_scale,
        covariance="anisotropic" if args.rho > 0 else "isotropic",
        rho=args.rho, n_domains=args.domains,
    )
    fs = synth.synth_generate(spec, args.path)
    print(f"wrote {fs.manifest.name}: K={fs.manifest.K} L={fs.manifest.L} "
          f"splits={fs.manifest.splits} at {args.path}")
    return 0


def cmd_inspect(args) -> int:
    fs = store.FeatureStore(args.path)
    m = fs.manifest
    print(json.dumps({
        "name": m.name, "L": m.L, "K": m.K, "splits": m.splits,
        "domains": m.domains, "target_dim": m.target_dim,
    }, indent=2))
    for split in m.splits:
        labels = fs.labels(split)
        counts = np.bincount(labels, minlength=m.K)
        print(f"{split}: {len(labels)} samples, "
              f"{np.count_nonzero(counts)} classes populated, "
              f"min/max per class {counts.min()}/{counts.max()}")
    return 0


def cmd_run(args) -> int:
    config = _load_config(args)
    out = _run_dir(args, "run")
    result = protocols.run(config)
    _result_artifacts(result, out)
    text = _summary(result)
    _atomic_write(out / "summary.txt", text + "\n")
    print(text)
    print(f"artifacts in {out}")
    return 0


def cmd_sweep_m(args) -> int:
    config = _load_config(args)
    out = _run_dir(args, "sweep-m")
    rows = []
    for M in args.M:
        cfg_doc = config.to_dict()
        cfg_doc["M"] = M
        result = protocols.run(protocols.RunConfig(**cfg_doc))
        rows.append([M, result.final_avg_acc])
        sub = out / f"M{M}"
        sub.mkdir(exist_ok=True)
        _result_artifacts(result, sub)
        print(f"M={M}: A_T={result.final_avg_acc:.4f}")
    _atomic_write(out / "sweep.csv", _csv(rows, ["M", "final_avg_accuracy"]))
    print(f"artifacts in {out}")
    return 0


def cmd_theory(args) -> int:
    out = _run_dir(args, "theory")
    rng = np.random.Generator(np.random.PCG64(args.seed))
    f = rng.standard_normal(args.dim)
    f /= np.linalg.norm(f)
    f2 = rng.standard_normal(args.dim)
    f2 /= np.linalg.norm(f2)

    ip = theory.inner_product_test(args.dim, args.M, f, f2,
                                   trials=args.trials, seed=args.seed)
    nc = theory.norm_concentration_test(args.dim, args.M, f,
                                        trials=args.trials, seed=args.seed)
    for name, rep in (("inner_product", ip), ("norm_concentration", nc)):
        rows = [[r["M"], r["mean"], r["std_error"], r["mean_abs_deviation"],
                 r["tail_fraction"]] for r in rep.rows()]
        _atomic_write(out / f"{name}.csv", _csv(
            rows, ["M", "mean", "std_error", "mean_abs_deviation", "tail_fraction"]))
        _atomic_write(out / f"{name}.json", json.dumps({
            "M_values": rep.M_values, "trials": rep.trials, "target": rep.target,
            "rows": rep.rows(),
        }, indent=2, sort_keys=True))
    print(f"inner-product target f.f' = {ip.target:.4f}")
    for r in ip.rows():
        print(f"  M={r['M']:6d} mean={r['mean']:+.4f} tail={r['tail_fraction']:.4f}")
    print(f"artifacts in {out}")
    return 0


def cmd_report(args) -> int:
    out = _run_dir(args, "report")
    results = []
    for p in args.results:
        path = Path(p) / "result.json" if Path(p).is_dir() else Path(p)
        try:
            results.append(json.loads(path.read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            print(f"warning: skipping unreadable result {p}: {exc}", file=sys.stderr)
    if not results:
        raise ConfigError("no readable results")

    datasets = {r["config"]["dataset"] for r in results}
    if len(datasets) > 1:
        print(f"warning: results span {len(datasets)} datasets; grouping by dataset",
              file=sys.stderr)

    rows = []
    by_dataset: dict[str, list[dict]] = {}
    for r in results:
        by_dataset.setdefault(r["config"]["dataset"], []).append(r)
    for ds, group in sorted(by_dataset.items()):
        # relative error-rate reduction vs the weakest method in the group
        base_err = max(1.0 - r["avg_acc"][-1] for r in group)
        for r in sorted(group, key=lambda r: -r["avg_acc"][-1]):
            acc = r["avg_acc"][-1]
            err = 1.0 - acc
            rel = (base_err - err) / base_err if base_err > 0 else ""
            rows.append([ds, r["config"]["method"], acc, err, rel])
    table = _csv(rows, ["dataset", "method", "final_avg_accuracy",
                        "error_rate", "rel_error_reduction"])
    _atomic_write(out / "report.csv", table)
    print(table, end="")
    print(f"artifacts in {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gramcl",
        description="Streaming continual learning with frozen random "
                    "projections and closed-form decorrelated heads.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic feature store")
    p.add_argument("path")
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--per-class", type=int, default=100)
    p.add_argument("--val-per-class", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mean-scale", type=float, default=4.0)
    p.add_argument("--noise-scale", type=float, default=1.0)
    p.add_argument("--rho", type=float, default=0.0,
                   help="shared-direction weight; > 0 switches to anisotropic")
    p.add_argument("--domains", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("inspect", help="print a store's manifest and label stats")
    p.add_argument("path")
    p.set_defaults(func=cmd_inspect)

    for name, func in (("run", cmd_run), ("sweep-m", cmd_sweep_m)):
        p = sub.add_parser(name, help=f"{name} an experiment")
        p.add_argument("--config", help="JSON run config")
        p.add_argument("--dataset", help="store path (overrides config)")
        p.add_argument("--override", "-o", action="append",
                       help="dotted-path config override, key=value")
        p.add_argument("--output", help="output directory")
        if name == "sweep-m":
            p.add_argument("--M", type=int, nargs="+", required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("theory", help="Monte-Carlo concentration reports")
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--M", type=int, nargs="+", default=[64, 256, 1024, 4096])
    p.add_argument("--trials", type=int, default=theory.DEFAULT_TRIALS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", help="output directory")
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("report", help="aggregate run results into one table")
    p.add_argument("results", nargs="+")
    p.add_argument("--output", help="output directory")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except GramclError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

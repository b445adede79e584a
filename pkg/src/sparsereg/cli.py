"""Command line interface.

Subcommands: generate, fit, predict, evaluate, experiment, report.
Exit code 0 on success; on failure a machine-readable JSON error line is
printed to stderr and the exit code is nonzero.

Heavy imports happen inside the handlers so that --threads can cap the
BLAS thread pools before numpy is loaded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path


def _parse_scalar(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def _parse_value(text: str):
    text = text.strip()
    if "," in text:
        return tuple(_parse_scalar(t.strip()) for t in text.split(",") if t.strip())
    return _parse_scalar(text)


def read_config(path):
    """key = value text config; option.* keys collect into the options map."""
    spec_kw: dict = {}
    options: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip()
            parsed = _parse_value(value)
            if key.startswith("option."):
                options[key[len("option.") :]] = parsed
            elif key == "methods":
                spec_kw[key] = parsed if isinstance(parsed, tuple) else (parsed,)
            else:
                spec_kw[key] = parsed
    if options:
        spec_kw["options"] = options
    return spec_kw


def cmd_generate(args):
    import numpy as np

    from . import datasets, model_io

    out = Path(args.out)
    seed = args.seed
    gen = args.generator
    if gen in ("SE1", "SE2", "SE3"):
        out.mkdir(parents=True, exist_ok=True)
        splits, _ = datasets.gen_se(gen, args.n, args.n_val, args.n_test, seed=seed)
        for name, (X, y) in splits.items():
            model_io.write_xy_csv(out / f"{name}.csv", X, y)
        print(f"wrote {out}/train.csv,val.csv,test.csv")
    elif gen in ("E1", "E2", "E3"):
        X, y, _ = datasets.gen_e(gen, args.n, seed=seed)
        model_io.write_xy_csv(out, X, y)
        print(f"wrote {out}")
    elif gen == "VAR":
        series, _ = datasets.gen_var(
            args.series_dim, args.clusters, args.leading, args.n, seed=seed
        )
        model_io.write_series_csv(out, series)
        print(f"wrote {out}")
    elif gen == "PSI":
        series, _ = datasets.gen_psi_process(args.n, seed=seed)
        model_io.write_series_csv(out, series)
        print(f"wrote {out}")
    else:
        raise ValueError(f"unknown generator: {gen!r}")


def _kernel_from_args(args):
    from . import kernels

    if args.kernel == "gaussian":
        return kernels.gaussian(args.width)
    if args.kernel == "polynomial":
        return kernels.polynomial(args.degree)
    if args.kernel == "linear":
        return kernels.linear()
    raise ValueError(f"unknown kernel: {args.kernel!r}")


def cmd_fit(args):
    from . import model_io, nvsd, srff

    X, y = model_io.read_xy_csv(args.data)
    if y is None:
        raise ValueError("fit requires a data file with a y column")
    if args.method in ("srff", "rff"):
        if args.method == "srff":
            model = srff.srff_fit(X, y, args.lam, D=args.features, rho=args.rho, seed=args.seed)
        else:
            model = srff.rff_fit(X, y, args.lam, D=args.features, seed=args.seed)
    elif args.method == "nvsd":
        spec = _kernel_from_args(args)
        groups = None
        if args.groups:
            groups = tuple(
                tuple(int(i) for i in g.split(",")) for g in args.groups.split(";")
            )
        reg = nvsd.RegularizerSpec(args.reg, groups=groups, mu=args.mu)
        problem = nvsd.assemble(X, y, spec)
        model = nvsd.admm_fit(problem, reg, args.tau, args.nu)
    else:
        raise ValueError(f"unknown method: {args.method!r}")
    model_io.save_model(model, args.out, seed=args.seed)
    print(f"wrote {args.out}")


def cmd_predict(args):
    import csv

    from . import model_io, nvsd, srff

    model = model_io.load_model(args.model)
    X, _ = model_io.read_xy_csv(args.data)
    if isinstance(model, srff.SrffModel):
        pred = srff.srff_predict(model, X)
    else:
        pred = nvsd.nvsd_predict(model, X)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y"])
        for v in pred:
            writer.writerow([format(float(v), ".17g")])
    print(f"wrote {args.out}")


def cmd_evaluate(args):
    import numpy as np

    from . import metrics, model_io

    _, y = model_io.read_xy_csv(args.data)
    if y is None:
        raise ValueError("evaluate requires a data file with a y column")
    header, pred = model_io._read_numeric_csv(args.pred)
    if header != ["y"]:
        raise model_io.CsvFormatError(args.pred, 1, "expected single column y")
    pred = pred[:, 0]
    if len(pred) != len(y):
        raise ValueError("prediction / data length mismatch")
    out = {"rmse": metrics.rmse(pred, y), "mse": metrics.mse(pred, y)}
    text = json.dumps(out)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")


def cmd_experiment(args):
    from . import experiments, model_io

    spec_kw = read_config(args.config)
    if args.seed is not None:
        spec_kw["seed"] = args.seed
    spec = experiments.ExperimentSpec(**spec_kw)
    report = experiments.run_experiment(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model_io.write_results_csv(report.rows, out / "results.csv")
    with open(out / "aggregates.csv", "w", encoding="utf-8", newline="") as fh:
        import csv

        writer = csv.writer(fh)
        writer.writerow(["method", "metric", "mean", "std"])
        for (method, metric), (mean, std) in sorted(report.aggregates.items()):
            writer.writerow([method, metric, format(mean, ".17g"), format(std, ".17g")])
    print(f"wrote {out}/results.csv and {out}/aggregates.csv")


def cmd_report(args):
    from . import experiments, model_io

    rows = model_io.read_results_csv(args.results)
    aggregates = experiments.aggregate(rows)
    lines = [
        f"{method}\t{metric}\t{mean:.6g}\t{std:.6g}"
        for (method, metric), (mean, std) in sorted(aggregates.items())
    ]
    text = "\n".join(lines)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparsereg")
    parser.add_argument("--threads", type=int, default=None, help="cap BLAS threads")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write synthetic datasets as CSV")
    g.add_argument("--generator", required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--n-val", type=int, default=1000)
    g.add_argument("--n-test", type=int, default=1000)
    g.add_argument("--series-dim", type=int, default=10)
    g.add_argument("--clusters", type=int, default=2)
    g.add_argument("--leading", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("fit", help="fit a model to a CSV dataset")
    f.add_argument("--data", required=True)
    f.add_argument("--method", required=True, choices=("srff", "rff", "nvsd"))
    f.add_argument("--lam", type=float, default=1.0)
    f.add_argument("--features", type=int, default=300)
    f.add_argument("--rho", type=float, default=None)
    f.add_argument("--kernel", default="gaussian")
    f.add_argument("--degree", type=int, default=3)
    f.add_argument("--width", type=float, default=1.0)
    f.add_argument("--reg", default="l", choices=("l", "gl", "en"))
    f.add_argument("--mu", type=float, default=0.5)
    f.add_argument("--groups", default="", help="semicolon-separated comma groups")
    f.add_argument("--tau", type=float, default=1.0)
    f.add_argument("--nu", type=float, default=None)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    e = sub.add_parser("evaluate", help="compare predictions with targets")
    e.add_argument("--pred", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_evaluate)

    x = sub.add_parser("experiment", help="run a configured experiment")
    x.add_argument("--config", required=True)
    x.add_argument("--seed", type=int, default=None)
    x.add_argument("--out", required=True)
    x.set_defaults(func=cmd_experiment)

    rep = sub.add_parser("report", help="aggregate a long-format results CSV")
    rep.add_argument("--results", required=True)
    rep.add_argument("--out", default=None)
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    try:
        args.func(args)
    except Exception as exc:
        print(json.dumps({"error": f"{type(exc).__name__}: {exc}"}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

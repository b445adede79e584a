"""Model and data persistence.

Model files are versioned self-describing JSON documents with fields
schema_version, method, kernel, hyper_parameters, seed, and parameter
arrays as nested numeric lists.  Floats are written with 17 significant
digits so a save/load round trip reproduces every value bit-exactly.

CSV conventions: UTF-8, header row, '.' decimal, no index column.
Supervised data uses columns x1..xd plus y; multivariate series use
columns s1..sK in time order.  Results files are long-format CSV with
columns method, experiment, n, resample, metric, value.
"""

from __future__ import annotations

import csv
import json

import numpy as np

from .kernels import KernelSpec
from .nvsd import NvsdModel, RegularizerSpec
from .srff import FeatureSampler, SrffModel

SCHEMA_VERSION = 1


class CsvFormatError(ValueError):
    """Malformed CSV input; carries the 1-based offending line number."""

    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = int(line)
        super().__init__(f"{path}:{line}: {message}")


# --------------------------------------------------------------- JSON writer


def _dump(obj, out):
    """JSON writer with floats at 17 significant digits."""
    if isinstance(obj, dict):
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            if i:
                out.append(",")
            out.append(json.dumps(str(k)))
            out.append(":")
            _dump(v, out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(",")
            _dump(v, out)
        out.append("]")
    elif isinstance(obj, np.ndarray):
        _dump(obj.tolist(), out)
    elif isinstance(obj, bool) or obj is None:
        out.append(json.dumps(obj))
    elif isinstance(obj, (float, np.floating)):
        out.append(format(float(obj), ".17g"))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    else:
        out.append(json.dumps(obj))


def dumps(obj) -> str:
    out: list = []
    _dump(obj, out)
    return "".join(out)


# --------------------------------------------------------------- model files


def _kernel_doc(spec: KernelSpec) -> dict:
    return {
        "kind": spec.kind,
        "degree": spec.degree,
        "offset": spec.offset,
        "width": spec.width,
    }


def _kernel_from(doc: dict) -> KernelSpec:
    return KernelSpec(
        kind=doc["kind"],
        degree=int(doc["degree"]),
        offset=float(doc["offset"]),
        width=float(doc["width"]),
    )


def save_model(model, path, seed: int | None = None) -> None:
    if isinstance(model, SrffModel):
        doc = {
            "schema_version": SCHEMA_VERSION,
            "method": "srff",
            "kernel": {"base_law": model.sampler.base_law},
            "hyper_parameters": {"lam": model.lam, "rho": model.rho, "D": model.sampler.D},
            "seed": model.sampler.seed if seed is None else seed,
            "arrays": {
                "eps": model.sampler.eps,
                "b": model.sampler.b,
                "gamma": model.gamma,
                "a": model.a,
            },
        }
    elif isinstance(model, NvsdModel):
        doc = {
            "schema_version": SCHEMA_VERSION,
            "method": "nvsd",
            "kernel": _kernel_doc(model.spec),
            "hyper_parameters": {
                "tau": model.tau,
                "nu": model.nu,
                "kappa": model.kappa,
                "reg_kind": model.reg.kind,
                "reg_mu": model.reg.mu,
                "reg_groups": [list(g) for g in model.reg.groups] if model.reg.groups else None,
            },
            "seed": 0 if seed is None else seed,
            "arrays": {
                "X": model.X,
                "omega": model.omega,
                "phi": model.phi,
                "dual": model.dual,
                "deriv_norms": model.deriv_norms,
            },
        }
    else:
        raise TypeError(f"cannot serialize model of type {type(model).__name__}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(doc))
        fh.write("\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version: {version!r}")
    arrays = {k: np.asarray(v, dtype=float) for k, v in doc["arrays"].items()}
    hp = doc["hyper_parameters"]
    if doc["method"] == "srff":
        sampler = FeatureSampler(
            eps=arrays["eps"],
            b=arrays["b"],
            base_law=doc["kernel"]["base_law"],
            seed=int(doc["seed"]),
        )
        return SrffModel(
            sampler=sampler,
            gamma=arrays["gamma"],
            rho=float(hp["rho"]),
            a=arrays["a"],
            lam=float(hp["lam"]),
        )
    if doc["method"] == "nvsd":
        groups = hp.get("reg_groups")
        reg = RegularizerSpec(
            hp["reg_kind"],
            groups=tuple(tuple(g) for g in groups) if groups else None,
            mu=float(hp["reg_mu"]),
        )
        return NvsdModel(
            X=arrays["X"],
            spec=_kernel_from(doc["kernel"]),
            reg=reg,
            omega=arrays["omega"],
            phi=arrays["phi"],
            dual=arrays["dual"],
            tau=float(hp["tau"]),
            nu=float(hp["nu"]),
            kappa=float(hp["kappa"]),
            deriv_norms=arrays["deriv_norms"],
            objective=0.0,
            n_iter=0,
            primal_residual=0.0,
            dual_residual=0.0,
            converged=True,
        )
    raise ValueError(f"unknown model method: {doc['method']!r}")


# ----------------------------------------------------------------- CSV files


def write_xy_csv(path, X, y=None) -> None:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    header = [f"x{i + 1}" for i in range(X.shape[1])]
    rows = X
    if y is not None:
        y = np.asarray(y, dtype=float).ravel()
        if len(y) != X.shape[0]:
            raise ValueError("X and y length mismatch")
        header.append("y")
        rows = np.column_stack([X, y])
    _write_numeric_csv(path, header, rows)


def write_series_csv(path, series) -> None:
    series = np.atleast_2d(np.asarray(series, dtype=float))
    _write_numeric_csv(path, [f"s{i + 1}" for i in range(series.shape[1])], series)


def _write_numeric_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([format(v, ".17g") for v in row])


def _read_numeric_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(path, 1, "empty file") from None
        header = [h.strip() for h in header]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise CsvFormatError(
                    path, lineno, f"expected {len(header)} fields, got {len(row)}"
                )
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise CsvFormatError(path, lineno, "non-numeric value") from None
    return header, np.asarray(rows, dtype=float)


def read_xy_csv(path):
    """Read x1..xd (+ optional trailing y) columns; returns (X, y or None)."""
    header, data = _read_numeric_csv(path)
    has_y = bool(header) and header[-1] == "y"
    xcols = header[:-1] if has_y else header
    expect = [f"x{i + 1}" for i in range(len(xcols))]
    if xcols != expect:
        raise CsvFormatError(path, 1, f"expected header {expect + (['y'] if has_y else [])}")
    if data.size == 0:
        raise CsvFormatError(path, 2, "no data rows")
    if has_y:
        return data[:, :-1], data[:, -1]
    return data, None


def read_series_csv(path):
    header, data = _read_numeric_csv(path)
    expect = [f"s{i + 1}" for i in range(len(header))]
    if header != expect:
        raise CsvFormatError(path, 1, f"expected header {expect}")
    if data.size == 0:
        raise CsvFormatError(path, 2, "no data rows")
    return data


RESULT_COLUMNS = ("method", "experiment", "n", "resample", "metric", "value")


def write_results_csv(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    row["method"],
                    row["experiment"],
                    row["n"],
                    row["resample"],
                    row["metric"],
                    format(float(row["value"]), ".17g"),
                ]
            )


def read_results_csv(path) -> list:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(RESULT_COLUMNS):
            raise CsvFormatError(path, 1, f"expected header {list(RESULT_COLUMNS)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(RESULT_COLUMNS):
                raise CsvFormatError(path, lineno, "wrong field count")
            try:
                rows.append(
                    {
                        "method": row[0],
                        "experiment": row[1],
                        "n": int(row[2]),
                        "resample": int(row[3]),
                        "metric": row[4],
                        "value": float(row[5]),
                    }
                )
            except ValueError:
                raise CsvFormatError(path, lineno, "non-numeric value") from None
    return rows

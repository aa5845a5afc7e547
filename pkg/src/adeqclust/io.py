"""Reading data, column standardisation and writing selection reports."""

import csv
import math
from pathlib import Path

import numpy as np


class DataFormatError(ValueError):
    """A data file could not be parsed; ``row`` and ``col`` are 1-based."""

    def __init__(self, message, row=None, col=None):
        super().__init__(message)
        self.row = row
        self.col = col


def load_csv(path, delimiter=",", header=False, encoding="utf-8"):
    """Parse a delimiter-separated numeric table into an (n, p) float array.

    Row numbers in error messages count data rows from 1, excluding the
    header; blank lines are skipped.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such data file: {path}")
    rows = []
    width = None
    with path.open(newline="", encoding=encoding) as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        if header:
            next(reader, None)
        for raw in reader:
            if not raw or all(not c.strip() for c in raw):
                continue
            i = len(rows) + 1
            if width is None:
                width = len(raw)
            elif len(raw) != width:
                raise DataFormatError(f"row {i} has {len(raw)} fields, expected {width}", row=i)
            vals = []
            for j, cell in enumerate(raw, start=1):
                try:
                    v = float(cell)
                except ValueError:
                    raise DataFormatError(f"non-numeric cell {cell!r} at row {i}, column {j}",
                                          row=i, col=j) from None
                if not math.isfinite(v):
                    raise DataFormatError(f"non-finite cell {cell!r} at row {i}, column {j}",
                                          row=i, col=j)
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise DataFormatError(f"{path} contains no data rows")
    return np.array(rows, dtype=float)


def standardize_columns(data):
    """Centre every column and scale it to unit sample variance (divisor n-1)."""
    X = np.asarray(data, float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need a 2-d array with at least two rows")
    sd = X.std(axis=0, ddof=1)
    bad = np.flatnonzero(~(sd > 0))
    if bad.size:
        raise ValueError(f"column {bad[0] + 1} has zero variance")
    return (X - X.mean(axis=0)) / sd


def json_safe(obj):
    """Recursively replace NaN by None and infinities by "inf"/"-inf" for strict JSON."""
    if isinstance(obj, dict):
        return {str(k): json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [json_safe(v) for v in obj]
    if obj is None or isinstance(obj, (str, bool, np.bool_)):
        return bool(obj) if isinstance(obj, np.bool_) else obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    v = float(obj)
    if math.isnan(v):
        return None
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def write_matrix_csv(path, X, labels=None, names=None):
    X = np.asarray(X, float)
    names = names or [f"x{j + 1}" for j in range(X.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + (["label"] if labels is not None else []))
        for i, row in enumerate(X):
            out = [repr(float(v)) for v in row]
            if labels is not None:
                out.append(int(labels[i]))
            w.writerow(out)


def report_paths(path):
    """JSON report path and the two plot-data CSV paths derived from it."""
    path = Path(path)
    stem = path.with_suffix("")
    return path, Path(f"{stem}_quality.csv"), Path(f"{stem}_simplicity.csv")


def _num(v):
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))


def emit_report(report, path):
    """Write the JSON report and two plot-data tables.

    The quality table has one ``observed`` row and one row per bootstrap
    value for each G, with the adequacy cutoff alongside; the simplicity
    table has noise proportion, simplicity and the adequacy flag per G.
    """
    json_path, q_path, s_path = report_paths(path)
    json_path.parent.mkdir(parents=True, exist_ok=True)
    json_path.write_text(report.to_json())
    c = report.settings["c"]
    with q_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["G", "source", "Q", "cutoff"])
        for r in report.records:
            cut = _num(r.cutoff(c))
            w.writerow([r.G, "observed", _num(r.q_observed), cut])
            for q in r.q_bootstrap:
                w.writerow([r.G, "bootstrap", _num(q), cut])
    with s_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["G", "noise_prop", "simplicity", "adequate"])
        for r in report.records:
            w.writerow([r.G, _num(r.noise_prop), _num(r.simplicity), int(r.adequate)])
    return json_path, q_path, s_path

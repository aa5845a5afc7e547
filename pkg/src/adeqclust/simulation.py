"""Simulation designs, partition agreement and a BIC/ICL mixture baseline."""

import copy
import csv
import json
import math
import time
from collections import Counter
from dataclasses import asdict, dataclass, fields
from fractions import Fraction
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from ._validation import DegenerateError, check_data, seed_sequence
from .adequacy import select_clusters
from .io import standardize_columns
from .quality import default_calibration
from .rimle import FitControl, rimle_em

# DGP 1 cluster geometry in the first two variables
_DGP1_MEANS = [[-3.0, 0.0], [8.0, 0.0], [5.0, 9.0]]
_DGP1_COVS = [[[1.0, 0.5], [0.5, 1.0]], [[2.0, -1.5], [-1.5, 2.0]], [[2.0, 1.3], [1.3, 2.0]]]

# Each design lists components living on the first ``structured`` variables;
# the remaining variables are filled per ``extra``. Components carry a fixed
# ``size`` or a multinomial ``prob``; label 0 marks noise.
DGP_SPECS = {
    1: {
        "n": 1000, "structured": 2,
        "components": [
            {"label": g + 1, "prob": 1 / 3, "family": "gaussian", "mean": m, "cov": c}
            for g, (m, c) in enumerate(zip(_DGP1_MEANS, _DGP1_COVS))
        ],
        "extra": [{"family": "gaussian"}] * 8,
        "standardize": False,
    },
    3: {
        # approximation: t3 clusters with DGP 1 geometry as location/scatter
        "n": 2000, "structured": 2,
        "components": [
            {"label": g + 1, "prob": 1 / 3, "family": "t", "df": 3, "mean": m, "cov": c}
            for g, (m, c) in enumerate(zip(_DGP1_MEANS, _DGP1_COVS))
        ],
        "extra": [{"family": "gaussian"}] * 18,
        "standardize": True,
    },
    4: {
        # approximation except for the uniform cluster; see README
        "n": 660, "structured": 4,
        "components": [
            {"label": 1, "size": 250, "family": "gaussian", "mean": [0, 0, 0, 0],
             "cov": np.eye(4).tolist()},
            {"label": 2, "size": 150, "family": "gaussian", "mean": [7, 0, 0, 0],
             "cov": np.diag([1.0, 2.0, 1.0, 0.5]).tolist()},
            {"label": 3, "size": 70, "family": "exponential", "rate": [1, 1, 1, 1],
             "shift": [0, 6, 0, 0]},
            {"label": 4, "size": 70, "family": "t", "df": 2, "mean": [-6, 6, 0, 0],
             "cov": (0.5 * np.eye(4)).tolist()},
            {"label": 5, "size": 100, "family": "uniform", "low": [1.8, -0.2, 3.8, 3.8],
             "high": [2.2, 0.2, 4.2, 4.2]},
            {"label": 0, "size": 10, "family": "uniform", "low": [-12] * 4, "high": [12] * 4},
            {"label": 0, "size": 10, "family": "t", "df": 2, "mean": [0, 0, 0, 0],
             "cov": (16 * np.eye(4)).tolist()},
        ],
        "extra": [{"family": "gaussian"}, {"family": "t", "df": 2}],
        "standardize": True,
    },
}


@dataclass
class LabeledDataset:
    data: np.ndarray
    labels: np.ndarray
    true_G: int
    dgp_id: int | str
    seed: int | None

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def p(self):
        return self.data.shape[1]


def _draw(comp, size, rng):
    fam = comp["family"]
    if fam == "gaussian":
        mean = np.asarray(comp["mean"], float)
        chol = np.linalg.cholesky(np.asarray(comp["cov"], float))
        return mean + rng.standard_normal((size, mean.size)) @ chol.T
    if fam == "t":
        mean = np.asarray(comp["mean"], float)
        chol = np.linalg.cholesky(np.asarray(comp["cov"], float))
        z = rng.standard_normal((size, mean.size)) @ chol.T
        chi = rng.chisquare(comp["df"], size)
        return mean + z / np.sqrt(chi / comp["df"])[:, None]
    if fam == "exponential":
        rate = np.asarray(comp["rate"], float)
        return np.asarray(comp.get("shift", np.zeros(rate.size)), float) + \
            rng.exponential(1.0 / rate, (size, rate.size))
    if fam == "uniform":
        return rng.uniform(np.asarray(comp["low"], float), np.asarray(comp["high"], float),
                           (size, len(comp["low"])))
    raise ValueError(f"unknown family {fam!r}")


def _draw_extra(spec, size, rng):
    if spec["family"] == "gaussian":
        return rng.standard_normal(size)
    if spec["family"] == "t":
        return rng.standard_t(spec["df"], size)
    raise ValueError(f"unknown family {spec['family']!r}")


def generate_from_spec(spec, seed=None, dgp_id="custom"):
    """Simulate a labelled data set from a component specification."""
    rng = np.random.default_rng(seed)
    comps = spec["components"]
    sized = [c for c in comps if "size" in c]
    probs = [c for c in comps if "prob" in c]
    if sized and probs:
        raise ValueError("components must all use 'size' or all use 'prob'")
    if sized:
        which = np.repeat(np.arange(len(comps)), [c["size"] for c in comps])
    else:
        pr = np.array([c["prob"] for c in comps], float)
        which = rng.choice(len(comps), size=int(spec["n"]), p=pr / pr.sum())
    n = which.size
    k = int(spec["structured"])
    X = np.empty((n, k + len(spec["extra"])))
    for j, comp in enumerate(comps):
        rows = np.flatnonzero(which == j)
        X[rows, :k] = _draw(comp, rows.size, rng)
    for j, extra in enumerate(spec["extra"]):
        X[:, k + j] = _draw_extra(extra, n, rng)
    labels = np.array([comps[j]["label"] for j in which], dtype=int)
    true_G = len({c["label"] for c in comps if c["label"] > 0})
    return LabeledDataset(X, labels, true_G, dgp_id, seed)


def dgp_spec(dgp_id):
    if dgp_id == 2:
        return copy.deepcopy(DGP_SPECS[1])
    if dgp_id not in DGP_SPECS:
        raise ValueError(f"unknown DGP {dgp_id!r}; expected 1..4")
    return copy.deepcopy(DGP_SPECS[dgp_id])


def generate_dgp(dgp_id, seed=None, spec=None):
    """Simulate one of the four designs, optionally with an overriding spec dict."""
    ds = generate_from_spec(spec or dgp_spec(dgp_id), seed, dgp_id)
    if dgp_id == 2:
        # one observation of cluster 1 becomes a gross outlier in variable 3
        i = int(np.flatnonzero(ds.labels == 1)[0])
        ds.data[i, 2] = 1000.0
    return ds


def standardization_policy(dgp_id):
    return dgp_spec(dgp_id).get("standardize", True)


# ---------------------------------------------------------------------------
# partition agreement


def _comb2(k):
    return k * (k - 1) // 2


def adjusted_rand_index(a, b):
    """Adjusted Rand index of two labelings (permutation model)."""
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.shape != b.shape:
        raise ValueError("labelings must have equal length")
    n = a.size
    if n < 2:
        raise ValueError("adjusted Rand index needs at least two items")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    index = sum(_comb2(int(v)) for v in table.ravel())
    sa = sum(_comb2(int(v)) for v in table.sum(axis=1))
    sb = sum(_comb2(int(v)) for v in table.sum(axis=0))
    expected = Fraction(sa * sb, _comb2(n))
    maximum = Fraction(sa + sb, 2)
    if maximum == expected:
        return 1.0
    return float((index - expected) / (maximum - expected))


# ---------------------------------------------------------------------------
# BIC / ICL baseline


def n_free_parameters(G, p):
    """Free parameters of a G-component full-covariance Gaussian mixture."""
    return (G - 1) + p * G + p * (p + 1) * G // 2


@dataclass
class ICBaselineResult:
    bic_G: int | None
    icl_G: int | None
    table: list
    fits: dict


def gaussian_mixture_ic_baseline(data, G_max=10, ctrl=None, rng=None):
    """Plain Gaussian mixtures for G=1..G_max, chosen by BIC and ICL (smaller is better)."""
    X = check_data(data)
    n, p = X.shape
    ctrl = ctrl or FitControl(gamma=1e6)
    rng = np.random.default_rng(rng)
    table, fits = [], {}
    for G in range(1, G_max + 1):
        try:
            fit = rimle_em(X, G, 0.0, ctrl, rng)
        except DegenerateError:
            table.append({"G": G, "bic": None, "icl": None, "loglik": None})
            continue
        post = fit.posteriors[:, 1:]
        entropy = -np.sum(post * np.log(post, out=np.zeros_like(post), where=post > 0))
        bic = n_free_parameters(G, p) * math.log(n) - 2 * fit.pseudo_loglik
        table.append({"G": G, "loglik": fit.pseudo_loglik, "bic": bic,
                      "icl": bic + 2 * entropy, "entropy": float(entropy)})
        fits[G] = fit
    ok = [r for r in table if r["bic"] is not None]
    bic_G = min(ok, key=lambda r: (r["bic"], r["G"]))["G"] if ok else None
    icl_G = min(ok, key=lambda r: (r["icl"], r["G"]))["G"] if ok else None
    return ICBaselineResult(bic_G, icl_G, table, fits)


# ---------------------------------------------------------------------------
# benchmark harness

METHODS = ("AOTRI", "AOTRIB", "GBIC", "GICL")


@dataclass
class BenchmarkRow:
    method: str
    dgp: int
    run: int
    seed: int
    chosen_G: int | None
    ari: float
    ari_noiseless: float | None
    runtime_sec: float
    any_adequate: bool | None = None
    error: str | None = None


def _int_seed(master, *key):
    return int(seed_sequence(master, *key).generate_state(1)[0])


def default_bench_settings():
    return {"G_max": 10, "B": 30, "c": 2.0, "p0": 0.05, "gamma": 20.0, "n_restarts": 10,
            "baseline_gamma": 1e6, "early_stop": True}


def _run_method(method, ds, X, settings, seed, table):
    t0 = time.perf_counter()
    if method in ("AOTRI", "AOTRIB"):
        ctrl = FitControl(gamma=settings["gamma"], beta=0.0 if method == "AOTRI" else 1 / 3,
                          n_restarts=settings["n_restarts"])
        rep = select_clusters(X, settings["G_max"], settings["B"], settings["c"], settings["p0"],
                              ctrl, table, seed, early_stop=settings["early_stop"])
        G = rep.chosen_G or rep.fallback_G
        pred = rep.fits[G].labels()
        keep = pred != 0
        ari_nl = adjusted_rand_index(ds.labels[keep], pred[keep]) if keep.sum() >= 2 else math.nan
        any_adequate = rep.any_adequate
    else:
        ctrl = FitControl(gamma=settings["baseline_gamma"], n_restarts=settings["n_restarts"])
        res = gaussian_mixture_ic_baseline(X, settings["G_max"], ctrl, seed)
        G = res.bic_G if method == "GBIC" else res.icl_G
        pred = res.fits[G].labels()
        ari_nl, any_adequate = None, None
    ari = adjusted_rand_index(ds.labels, pred)
    return G, ari, ari_nl, any_adequate, time.perf_counter() - t0


def _bench_task(dgp, run, method, settings, master_seed, table):
    data_seed = _int_seed(master_seed, run)
    method_seed = _int_seed(master_seed, run, METHODS.index(method) + 1)
    ds = generate_dgp(dgp, data_seed)
    X = standardize_columns(ds.data) if standardization_policy(dgp) else ds.data
    try:
        G, ari, ari_nl, adequate, secs = _run_method(method, ds, X, settings, method_seed, table)
        return BenchmarkRow(method, dgp, run, data_seed, G, ari, ari_nl, secs, adequate)
    except Exception as exc:  # a failed run is recorded, never fatal for the sweep
        return BenchmarkRow(method, dgp, run, data_seed, None, math.nan, None, 0.0, None,
                            f"{type(exc).__name__}: {exc}")


def run_benchmark(dgp_ids=(1, 2, 3, 4), methods=METHODS, n_runs=10, settings=None,
                  master_seed=0, n_jobs=1, table=None):
    """Run every (dgp, run, method) cell; rows come back in grid order.

    Data for run r share a seed across designs, so DGP 2 is DGP 1 plus the
    outlier for the same r.
    """
    bad = set(methods) - set(METHODS)
    if bad:
        raise ValueError(f"unknown methods {sorted(bad)}")
    cfg = default_bench_settings()
    cfg.update(settings or {})
    table = table or default_calibration()
    tasks = [(d, r, m) for d in dgp_ids for r in range(n_runs) for m in methods]
    return Parallel(n_jobs=n_jobs)(
        delayed(_bench_task)(d, r, m, cfg, master_seed, table) for d, r, m in tasks)


def summarize(rows):
    """Mean ARI and chosen-G histogram per (dgp, method)."""
    groups = {}
    for r in rows:
        groups.setdefault((r.dgp, r.method), []).append(r)
    out = []
    for (dgp, method), rs in sorted(groups.items()):
        ok = [r for r in rs if r.error is None]
        nl = [r.ari_noiseless for r in ok if r.ari_noiseless is not None and not math.isnan(r.ari_noiseless)]
        out.append({
            "dgp": dgp, "method": method, "runs": len(rs), "failed": len(rs) - len(ok),
            "mean_ari": float(np.mean([r.ari for r in ok])) if ok else None,
            "mean_ari_noiseless": float(np.mean(nl)) if nl else None,
            "chosen_G": {str(k): v for k, v in sorted(Counter(r.chosen_G for r in ok).items())},
        })
    return out


def write_benchmark(rows, csv_path, summary_path=None):
    names = [f.name for f in fields(BenchmarkRow)]
    with open(csv_path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=names)
        w.writeheader()
        for r in rows:
            w.writerow(asdict(r))
    if summary_path is not None:
        Path(summary_path).write_text(json.dumps(summarize(rows), indent=1) + "\n")


__all__ = [
    "DGP_SPECS", "LabeledDataset", "generate_dgp", "generate_from_spec", "adjusted_rand_index",
    "n_free_parameters", "gaussian_mixture_ic_baseline", "BenchmarkRow", "run_benchmark",
    "summarize", "write_benchmark",
]

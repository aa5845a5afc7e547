"""Choosing the number of clusters by parametric-bootstrap adequacy.

For each candidate G the data are clustered, the cluster-quality statistic
is computed, and B data sets simulated from the fitted noise mixture are
clustered and scored the same way. G is adequate when the observed score
is at most ``c`` robust standard deviations above the robust centre of the
bootstrap scores. Among adequate G the one with the smallest
``G + noise_prop / p0`` wins.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np
from joblib import Parallel, delayed
from scipy import stats
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import DegenerateError, as_generator, check_data, task_rng
from .quality import default_calibration, quality_Q
from .rimle import FitControl, otrimle_fit, posteriors

logger = logging.getLogger(__name__)

REPORT_SCHEMA = "adeqclust.selection/1"
TAU_C1 = 4.5
TAU_C2 = 3.0


class InconsistentFitError(ValueError):
    """Positive noise proportion but no observation carries noise posterior."""


# ---------------------------------------------------------------------------
# bootstrap data


def bootstrap_sample(fit, data, n=None, rng=None, return_labels=False):
    """Draw a data set from the fitted noise mixture.

    Noise rows are resampled from the observed rows with probabilities
    proportional to their noise posteriors; the remaining rows are Gaussian
    draws from the fitted components. Labels (0 = noise) are returned on
    request.
    """
    X = check_data(data)
    rng = as_generator(rng)
    n = X.shape[0] if n is None else int(n)
    params = fit.params
    pi = np.clip(params.pi, 0, None)
    pi = pi / pi.sum()
    p0 = fit.posteriors[:, 0]
    if pi[0] > 0 and not p0.sum() > 0:
        raise InconsistentFitError("noise proportion positive but all noise posteriors are zero")
    labels = rng.choice(params.G + 1, size=n, p=pi)
    out = np.empty((n, X.shape[1]))
    noise = np.flatnonzero(labels == 0)
    if noise.size:
        src = rng.choice(X.shape[0], size=noise.size, p=p0 / p0.sum())
        out[noise] = X[src]
    for g in range(params.G):
        rows = np.flatnonzero(labels == g + 1)
        if rows.size:
            chol = np.linalg.cholesky(params.covs[g])
            out[rows] = params.means[g] + rng.standard_normal((rows.size, X.shape[1])) @ chol.T
    return (out, labels) if return_labels else out


# ---------------------------------------------------------------------------
# robust summary and decision


def _tau_kappa(c2):
    # E[min(Z^2, c2^2)] for standard Gaussian Z
    return 2 * ((1 - c2 ** 2) * stats.norm.cdf(c2) - c2 * stats.norm.pdf(c2) + c2 ** 2) - 1


def tau_location_scale(values, c1=TAU_C1, c2=TAU_C2):
    """Robust tau estimates of location and scale.

    Starts from the median and the normalised MAD, computes a weighted mean
    with biweight weights at ``c1`` MADs, and a truncated-quadratic scale at
    ``c2`` corrected for consistency at the Gaussian.
    """
    x = np.asarray(values, float).ravel()
    if x.size < 2:
        raise ValueError("need at least two values")
    med = float(np.median(x))
    s0 = float(stats.median_abs_deviation(x, scale="normal"))
    if s0 == 0:
        return med, 0.0
    u = (x - med) / (c1 * s0)
    w = np.where(np.abs(u) <= 1, (1 - u * u) ** 2, 0.0)
    loc = float(w @ x / w.sum())
    r = (x - loc) / s0
    rho = np.minimum(r * r, c2 * c2)
    return loc, float(s0 * np.sqrt(rho.mean() / _tau_kappa(c2)))


class AdequacyResult(NamedTuple):
    standardized: float
    adequate: bool
    location: float
    scale: float


def adequacy_test(q_observed, q_bootstrap, c=2.0):
    loc, scale = tau_location_scale(q_bootstrap)
    if scale > 0:
        z = (q_observed - loc) / scale
        return AdequacyResult(float(z), bool(z <= c), loc, scale)
    if q_observed <= loc:
        return AdequacyResult(0.0, True, loc, scale)
    return AdequacyResult(math.inf, False, loc, scale)


def simplicity(G, noise_prop, p0=0.05):
    if p0 <= 0:
        raise ValueError("p0 must be positive")
    if not 0 <= noise_prop <= 1:
        raise ValueError("noise proportion must lie in [0, 1]")
    return G + noise_prop / p0


# ---------------------------------------------------------------------------
# report types


def _enc(v):
    if v is None:
        return None
    v = float(v)
    if math.isnan(v):
        return None
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _dec(v):
    if v is None:
        return math.nan
    return float(v)


@dataclass
class AdequacyRecord:
    G: int
    q_observed: float = math.nan
    q_bootstrap: list = field(default_factory=list)
    tau_location: float = math.nan
    tau_scale: float = math.nan
    standardized: float = math.nan
    adequate: bool = False
    noise_prop: float = math.nan
    simplicity: float = math.nan
    delta: float = math.nan
    per_cluster_q: list = field(default_factory=list)
    n_bootstrap_failed: int = 0
    reason: str | None = None

    def cutoff(self, c):
        """Largest adequate observed score, ``tau_location + c * tau_scale``."""
        return self.tau_location + c * self.tau_scale

    _FLOATS = ("q_observed", "tau_location", "tau_scale", "standardized", "noise_prop",
               "simplicity", "delta")

    def to_dict(self):
        d = asdict(self)
        for k in self._FLOATS:
            d[k] = _enc(d[k])
        d["q_bootstrap"] = [_enc(v) for v in self.q_bootstrap]
        d["per_cluster_q"] = [_enc(v) for v in self.per_cluster_q]
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for k in cls._FLOATS:
            d[k] = _dec(d[k])
        d["q_bootstrap"] = [_dec(v) for v in d["q_bootstrap"]]
        d["per_cluster_q"] = [_dec(v) for v in d["per_cluster_q"]]
        return cls(**d)


@dataclass
class SelectionReport:
    records: list
    chosen_G: int | None
    any_adequate: bool
    fallback_G: int | None
    settings: dict
    fits: dict = field(default_factory=dict, repr=False, compare=False)

    def record(self, G):
        for r in self.records:
            if r.G == G:
                return r
        raise KeyError(G)

    def to_dict(self):
        return {
            "schema": REPORT_SCHEMA,
            "chosen_G": self.chosen_G,
            "any_adequate": self.any_adequate,
            "fallback_G": self.fallback_G,
            "seed": self.settings.get("seed"),
            "settings": self.settings,
            "records": [r.to_dict() for r in self.records],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d):
        if d.get("schema") != REPORT_SCHEMA:
            raise ValueError(f"unsupported report schema {d.get('schema')!r}")
        return cls([AdequacyRecord.from_dict(r) for r in d["records"]], d["chosen_G"],
                   d["any_adequate"], d["fallback_G"], d["settings"])

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def choose_G(records):
    """``(chosen, fallback)``: argmin simplicity over adequate records, ties to smaller G;
    fallback is the smallest standardized score."""
    adequate = [r for r in records if r.adequate]
    chosen = min(adequate, key=lambda r: (r.simplicity, r.G)).G if adequate else None
    scored = [r for r in records if not math.isnan(r.standardized)]
    fallback = min(scored, key=lambda r: (r.standardized, r.G)).G if scored else None
    return chosen, fallback


# ---------------------------------------------------------------------------
# selection


def _bootstrap_replicate(fit, X, G, ctrl, table, seed, b):
    rng = task_rng(seed, G, b + 1)
    try:
        sample = bootstrap_sample(fit, X, X.shape[0], rng)
        bfit = otrimle_fit(sample, G, ctrl, rng)
        return quality_Q(bfit, sample, table).total
    except (DegenerateError, np.linalg.LinAlgError) as exc:
        logger.debug("bootstrap replicate G=%d b=%d failed: %s", G, b, exc)
        return None


def min_bootstrap_survivors(B):
    return min(B, max(10, math.ceil(B / 2)))


def assess_G(X, G, B, c, p0, ctrl, table, seed, n_jobs=1, bootstrap_ctrl=None):
    """Fit, score and bootstrap-test one candidate G; returns (record, fit)."""
    record = AdequacyRecord(G=G)
    try:
        fit = otrimle_fit(X, G, ctrl, task_rng(seed, G, 0))
        breakdown = quality_Q(fit, X, table)
    except (DegenerateError, np.linalg.LinAlgError) as exc:
        record.reason = f"fit failed: {exc}"
        return record, None
    record.q_observed = breakdown.total
    record.per_cluster_q = breakdown.per_cluster.tolist()
    record.noise_prop = fit.noise_prop
    record.delta = fit.delta
    record.simplicity = simplicity(G, fit.noise_prop, p0)

    bctrl = bootstrap_ctrl or ctrl
    qs = Parallel(n_jobs=n_jobs)(
        delayed(_bootstrap_replicate)(fit, X, G, bctrl, table, seed, b) for b in range(B))
    record.q_bootstrap = [q for q in qs if q is not None]
    record.n_bootstrap_failed = B - len(record.q_bootstrap)
    if len(record.q_bootstrap) < max(2, min_bootstrap_survivors(B)):
        record.reason = "insufficient bootstrap sample"
        return record, fit
    res = adequacy_test(record.q_observed, record.q_bootstrap, c)
    record.tau_location, record.tau_scale = res.location, res.scale
    record.standardized = res.standardized
    record.adequate = res.adequate
    return record, fit


def select_clusters(data, G_max=10, B=100, c=2.0, p0=0.05, ctrl=None, table=None, seed=0,
                    n_jobs=1, early_stop=False, bootstrap_ctrl=None):
    """Run the adequacy scheme for G = 1..G_max and pick the simplest adequate G.

    With ``early_stop`` the scan ends once an adequate G has simplicity no
    larger than the next candidate's lowest possible value ``G + 1``.
    """
    X = check_data(data)
    if G_max < 1:
        raise ValueError("G_max must be >= 1")
    if B < 2:
        raise ValueError("B must be >= 2")
    if p0 <= 0:
        raise ValueError("p0 must be positive")
    ctrl = ctrl or FitControl()
    table = table or default_calibration()
    settings = {
        "G_max": int(G_max), "B": int(B), "c": float(c), "p0": float(p0),
        "beta": float(ctrl.beta), "gamma": float(ctrl.gamma), "noise_cap": float(ctrl.noise_cap),
        "n_restarts": int(ctrl.n_restarts), "delta_grid": None if ctrl.delta_grid is None
        else list(ctrl.delta_grid), "seed": int(seed), "early_stop": bool(early_stop),
        "calibration": {"reps": int(table.reps), "seed": table.seed, "q": table.grid.q},
    }
    records, fits = [], {}
    for G in range(1, G_max + 1):
        record, fit = assess_G(X, G, B, c, p0, ctrl, table, seed, n_jobs, bootstrap_ctrl)
        logger.info("G=%d Q=%.4g standardized=%.4g adequate=%s noise=%.4g", G, record.q_observed,
                    record.standardized, record.adequate, record.noise_prop)
        records.append(record)
        if fit is not None:
            fits[G] = fit
        if early_stop:
            best = [r.simplicity for r in records if r.adequate]
            if best and min(best) <= G + 1:
                break
    chosen, fallback = choose_G(records)
    return SelectionReport(records, chosen, chosen is not None, fallback, settings, fits)


class AdequacyClusterSelector(ClusterMixin, BaseEstimator):
    """Robust clustering with the number of clusters chosen by bootstrap adequacy.

    After ``fit``, ``report_`` holds the full selection record and
    ``n_clusters_`` the chosen G (the fallback G with the best standardized
    score if no G was adequate).
    """

    def __init__(self, max_clusters=10, *, n_bootstrap=100, cutoff=2.0, p0=0.05, beta=0.0,
                 gamma=20.0, noise_cap=0.5, delta_grid=None, n_restarts=10, early_stop=False,
                 calibration=None, n_jobs=1, random_state=0):
        self.max_clusters = max_clusters
        self.n_bootstrap = n_bootstrap
        self.cutoff = cutoff
        self.p0 = p0
        self.beta = beta
        self.gamma = gamma
        self.noise_cap = noise_cap
        self.delta_grid = delta_grid
        self.n_restarts = n_restarts
        self.early_stop = early_stop
        self.calibration = calibration
        self.n_jobs = n_jobs
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_data(X)
        self.n_features_in_ = X.shape[1]
        ctrl = FitControl(gamma=self.gamma, beta=self.beta, noise_cap=self.noise_cap,
                          delta_grid=self.delta_grid, n_restarts=self.n_restarts)
        self.report_ = select_clusters(X, self.max_clusters, self.n_bootstrap, self.cutoff, self.p0,
                                       ctrl, self.calibration, self.random_state, self.n_jobs,
                                       self.early_stop)
        G = self.report_.chosen_G or self.report_.fallback_G
        if G is None:
            raise DegenerateError("no candidate number of clusters could be fitted")
        self.n_clusters_ = G
        self.fit_ = self.report_.fits[G]
        self.labels_ = self.fit_.labels()
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "fit_")
        return posteriors(X, self.fit_.params)

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)

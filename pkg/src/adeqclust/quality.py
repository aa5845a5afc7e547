"""Nonparametric cluster-quality statistic.

Within every cluster the posterior-weighted data are rotated to principal
components. Each standardised component is scored by how far its kernel
density, evaluated on a fixed set of Gaussian quantiles, is from a density
that decreases symmetrically from the centre. Raw scores are standardised
with Monte-Carlo moments for Gaussian samples of the same effective size,
then aggregated over components and clusters.
"""

import json
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import stats

from ._validation import DegenerateError, as_generator, check_data

CALIBRATION_SCHEMA = "adeqclust.calibration/1"
DEFAULT_M_GRID = (5, 8, 12, 20, 35, 60, 100, 175, 300, 550, 1000, 1800, 3200, 5600, 10000)
DEFAULT_REPS = 2000
_SQRT_2PI = np.sqrt(2 * np.pi)


class ClusterDegenerateError(DegenerateError):
    def __init__(self, message, cluster=None):
        super().__init__(message)
        self.cluster = cluster


@dataclass(frozen=True)
class EvalGrid:
    """Evaluation points: standard Gaussian quantiles at equidistant probabilities."""

    q: int = 100
    p_low: float = 0.005
    p_high: float = 0.995

    def __post_init__(self):
        if self.q < 2 or self.q % 2:
            raise ValueError("q must be an even integer >= 2")
        if not 0 < self.p_low < 0.5 < self.p_high < 1 or abs(self.p_low + self.p_high - 1) > 1e-12:
            raise ValueError("probabilities must be symmetric about 0.5")

    @property
    def probabilities(self):
        return np.linspace(self.p_low, self.p_high, self.q)

    @property
    def z(self):
        z = stats.norm.ppf(self.probabilities)
        return 0.5 * (z - z[::-1])


# ---------------------------------------------------------------------------
# one-dimensional measure


def weighted_quantile(values, weights, probs):
    order = np.argsort(values)
    v, w = values[order], weights[order]
    cw = np.cumsum(w)
    pos = (cw - 0.5 * w) / cw[-1]
    return np.interp(probs, pos, v)


def _bandwidth(values, w):
    """Weighted rule of thumb: 0.9 * min(sd, IQR/1.34) * n_eff^(-1/5)."""
    mean = w @ values
    sd = np.sqrt(w @ (values - mean) ** 2)
    if not sd > 0:
        raise DegenerateError("zero weighted variance")
    q25, q75 = weighted_quantile(values, w, [0.25, 0.75])
    spread = min(sd, (q75 - q25) / 1.34)
    if not spread > 0:
        spread = sd
    n_eff = 1.0 / np.sum(w ** 2)
    return 0.9 * spread * n_eff ** -0.2


def kde_weighted(values, weights, grid=None, bandwidth=None):
    """Weighted Gaussian-kernel density estimate at ``grid.z``."""
    grid = grid or EvalGrid()
    values = np.asarray(values, float).ravel()
    w = np.asarray(weights, float).ravel()
    if values.shape != w.shape:
        raise ValueError("values and weights must have the same length")
    if np.any(w < 0) or not w.sum() > 0:
        raise ValueError("weights must be nonnegative with positive sum")
    keep = w > 0
    values, w = values[keep], w[keep] / w[keep].sum()
    h = _bandwidth(values, w) if bandwidth is None else float(bandwidth)
    u = (grid.z[:, None] - values[None, :]) / h
    return np.exp(-0.5 * u * u) @ w / (h * _SQRT_2PI)


def symmetrize_discrepancy(densities):
    """Root mean squared distance to the symmetric decreasing rearrangement.

    Sorted density values are averaged in consecutive pairs and laid out
    symmetrically from the centre outwards; the result is compared with the
    original values on each side of the centre.
    """
    f = np.asarray(densities, float)
    q = f.size
    if q % 2:
        raise ValueError("number of density values must be even")
    half = q // 2
    fs = np.sort(f)[::-1]
    sym = 0.5 * (fs[0::2] + fs[1::2])
    q_left = np.sum((f[half - 1::-1] - sym) ** 2)
    q_right = np.sum((f[half:] - sym) ** 2)
    return float(np.sqrt((q_left + q_right) / q))


def standardize_weighted(values, weights):
    w = np.asarray(weights, float)
    w = w / w.sum()
    mean = w @ values
    sd = np.sqrt(w @ (values - mean) ** 2)
    if not sd > 0:
        raise DegenerateError("zero weighted variance")
    return (values - mean) / sd


def raw_quality(values, weights, grid=None):
    """Unstandardised symmetric-unimodality score of one variable."""
    grid = grid or EvalGrid()
    z = standardize_weighted(values, weights)
    return symmetrize_discrepancy(kde_weighted(z, weights, grid))


# ---------------------------------------------------------------------------
# calibration


@dataclass(frozen=True)
class CalibrationTable:
    m_grid: np.ndarray
    mean_q: np.ndarray
    sd_q: np.ndarray
    reps: int
    seed: int | None
    grid: EvalGrid = field(default_factory=EvalGrid)

    def __post_init__(self):
        m = np.asarray(self.m_grid, float)
        if m.ndim != 1 or np.any(np.diff(m) <= 0):
            raise ValueError("m_grid must be strictly increasing")
        if np.any(np.asarray(self.sd_q) <= 0):
            raise ValueError("sd_q must be positive")
        if np.any(np.asarray(self.mean_q) < 0):
            raise ValueError("mean_q must be nonnegative")

    def moments(self, m):
        """Interpolated (mean, sd) at effective size ``m``, linear in log(m)."""
        if m < self.m_grid[0]:
            warnings.warn(f"effective cluster size {m:.3g} below calibration range; "
                          f"clamped to {self.m_grid[0]:g}", RuntimeWarning, stacklevel=3)
        lm = np.log(np.asarray(self.m_grid, float))
        x = np.log(max(float(m), np.finfo(float).tiny))
        return float(np.interp(x, lm, self.mean_q)), float(np.interp(x, lm, self.sd_q))

    def to_dict(self):
        return {
            "schema": CALIBRATION_SCHEMA,
            "q": self.grid.q,
            "probabilities": [self.grid.p_low, self.grid.p_high],
            "m_grid": [float(v) for v in self.m_grid],
            "mean_q": [float(v) for v in self.mean_q],
            "sd_q": [float(v) for v in self.sd_q],
            "reps": int(self.reps),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("schema") != CALIBRATION_SCHEMA:
            raise ValueError(f"unsupported calibration schema {d.get('schema')!r}")
        lo, hi = d["probabilities"]
        return cls(np.asarray(d["m_grid"], float), np.asarray(d["mean_q"], float),
                   np.asarray(d["sd_q"], float), int(d["reps"]), d.get("seed"),
                   EvalGrid(int(d["q"]), float(lo), float(hi)))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def calibrate(m_grid=DEFAULT_M_GRID, reps=DEFAULT_REPS, grid=None, rng=None):
    """Monte-Carlo mean and sd of the raw score for m standard Gaussian draws."""
    grid = grid or EvalGrid()
    if reps < 500:
        raise ValueError("reps must be at least 500")
    m_grid = np.asarray(m_grid, float)
    if np.any(m_grid < 2) or np.any(m_grid != np.round(m_grid)):
        raise ValueError("calibration sizes must be integers >= 2")
    seed = rng if isinstance(rng, (int, np.integer)) else None
    rng = as_generator(rng)
    means, sds = [], []
    for m in m_grid.astype(int):
        w = np.ones(m)
        vals = np.array([raw_quality(rng.standard_normal(m), w, grid) for _ in range(reps)])
        means.append(vals.mean())
        sds.append(vals.std(ddof=1))
    return CalibrationTable(m_grid, np.array(means), np.array(sds), int(reps),
                            None if seed is None else int(seed), grid)


def default_calibration():
    """The shipped calibration table."""
    ref = resources.files("adeqclust").joinpath("data/calibration.json")
    return CalibrationTable.from_dict(json.loads(ref.read_text()))


def standardized_q(q_raw, m, table):
    mean, sd = table.moments(m)
    return (q_raw - mean) / sd


# ---------------------------------------------------------------------------
# multivariate aggregation


def weighted_pc_scores(data, weights):
    """Weighted principal component scores, each column with weighted mean 0, variance 1.

    Columns are ordered by decreasing eigenvalue of the weighted (biased)
    covariance matrix.
    """
    X = check_data(data)
    w = np.asarray(weights, float)
    n, p = X.shape
    if w.shape != (n,) or np.any(w < 0):
        raise ValueError("weights must be a nonnegative vector of length n")
    total = w.sum()
    if not total > p:
        raise DegenerateError(f"weight sum {total:.3g} must exceed p={p}")
    wn = w / total
    mean = wn @ X
    diff = X - mean
    cov = (diff * wn[:, None]).T @ diff
    evals, evecs = np.linalg.eigh(0.5 * (cov + cov.T))
    evals, evecs = evals[::-1], evecs[:, ::-1]
    if evals[-1] <= 1e-12 * max(evals[0], 0.0) or evals[-1] <= 0:
        raise DegenerateError("weighted covariance is rank deficient")
    scores = diff @ evecs
    scores -= wn @ scores
    scores /= np.sqrt(wn @ scores ** 2)
    return scores


@dataclass
class QualityBreakdown:
    per_pc: np.ndarray
    per_cluster: np.ndarray
    total: float

    @classmethod
    def from_per_pc(cls, per_pc):
        per_pc = np.asarray(per_pc, float)
        pos = np.where(per_pc > 0, per_pc, 0.0)
        per_cluster = np.mean(pos ** 2, axis=1)
        return cls(per_pc, per_cluster, float(np.sqrt(np.sum(per_cluster ** 2))))

    def to_dict(self):
        return {"per_pc": self.per_pc.tolist(), "per_cluster": self.per_cluster.tolist(),
                "total": self.total}


def quality_Q(fit, data, table=None, grid=None):
    """Cluster-quality breakdown of a fitted noise mixture.

    Weights for cluster g are its posterior column, so observations likely
    to be noise are downweighted. Effective size is ``n * pi_g``.
    """
    X = check_data(data)
    table = table or default_calibration()
    grid = grid or table.grid
    n, p = X.shape
    G = fit.G
    per_pc = np.empty((G, p))
    for g in range(G):
        w = fit.posteriors[:, g + 1]
        m = n * fit.params.pi[g + 1]
        try:
            if p == 1:
                scores = standardize_weighted(X[:, 0], w)[:, None]
            else:
                scores = weighted_pc_scores(X, w)
            for j in range(p):
                q_raw = symmetrize_discrepancy(kde_weighted(scores[:, j], w, grid))
                per_pc[g, j] = standardized_q(q_raw, m, table)
        except (DegenerateError, ValueError) as exc:
            raise ClusterDegenerateError(f"cluster {g + 1}: {exc}", cluster=g + 1) from None
    return QualityBreakdown.from_per_pc(per_pc)

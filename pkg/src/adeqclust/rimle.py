"""Gaussian mixtures with an improper uniform noise component.

The fitted density is ``pi_0 * delta + sum_g pi_g * phi(x; mu_g, Sigma_g)``
where ``delta`` is a constant (improper) noise density. For fixed ``delta``
the parameters are estimated by an ECM algorithm whose covariance step
enforces a bound ``gamma`` on the ratio between the largest and smallest
eigenvalue over all component covariances. ``delta`` itself is tuned by
minimising a Kolmogorov-type distance between posterior-weighted squared
Mahalanobis distances and the chi-square distribution, plus a penalty
``beta`` times the estimated noise proportion.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats
from scipy.linalg import solve_triangular
from scipy.special import logsumexp
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import DegenerateError, as_generator, check_data

_LOG_2PI = np.log(2 * np.pi)
# Upper eigenvalue bound is pulled in by this relative margin so that the
# eigenratio of the stored (reconstructed) matrices never exceeds gamma.
_RATIO_MARGIN = 1e-10


class DegenerateFitError(DegenerateError):
    """All restarts of a fit collapsed or produced a singular model."""

    def __init__(self, message, G=None, delta=None):
        super().__init__(message)
        self.G = G
        self.delta = delta


class NoValidDeltaError(DegenerateFitError):
    """No candidate noise level produced an admissible fit."""


@dataclass
class MixtureParams:
    """Parameters of the improper noise mixture.

    ``pi[0]`` is the noise proportion, ``pi[1:]`` the cluster proportions.
    """

    pi: np.ndarray
    means: np.ndarray
    covs: np.ndarray
    delta: float

    @property
    def G(self):
        return self.means.shape[0]

    @property
    def p(self):
        return self.means.shape[1]

    def copy(self):
        return MixtureParams(self.pi.copy(), self.means.copy(), self.covs.copy(), float(self.delta))

    def validate(self):
        pi = np.asarray(self.pi)
        if pi.shape != (self.G + 1,):
            raise ValueError(f"pi must have length G+1={self.G + 1}")
        if np.any(pi < 0) or np.any(pi > 1) or abs(pi.sum() - 1) > 1e-8:
            raise ValueError("proportions must lie in [0, 1] and sum to 1")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if self.covs.shape != (self.G, self.p, self.p):
            raise ValueError("covs must have shape (G, p, p)")
        return self

    def to_dict(self):
        return {
            "delta": float(self.delta),
            "pi": self.pi.tolist(),
            "means": self.means.tolist(),
            "covs": self.covs.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["pi"], float), np.asarray(d["means"], float),
                   np.asarray(d["covs"], float), float(d["delta"]))


@dataclass
class FitControl:
    """Tuning knobs for the ECM fit and the noise-level search.

    ``delta_grid=None`` means the data-driven default grid (see
    :func:`default_delta_grid`). ``weight_floor=None`` means ``p + 1``
    effective observations per component.
    """

    gamma: float = 20.0
    max_iter: int = 500
    tol: float = 1e-7
    n_restarts: int = 10
    delta_grid: tuple | None = None
    beta: float = 0.0
    noise_cap: float = 0.5
    n_delta: int = 30
    delta_range: tuple = (1e-3, 1.0)
    weight_floor: float | None = None
    screen_iter: int = 20
    refine: bool = False

    def __post_init__(self):
        if self.gamma < 1:
            raise ValueError("gamma must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.n_restarts < 1 or self.max_iter < 1:
            raise ValueError("n_restarts and max_iter must be >= 1")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if not 0 < self.noise_cap <= 1:
            raise ValueError("noise_cap must lie in (0, 1]")
        if self.delta_grid is not None:
            grid = np.asarray(self.delta_grid, float)
            if grid.ndim != 1 or grid.size == 0:
                raise ValueError("delta_grid must be a non-empty 1-d sequence")
            if np.any(grid < 0) or np.any(np.diff(grid) <= 0):
                raise ValueError("delta_grid must be ascending and nonnegative")
            self.delta_grid = tuple(float(d) for d in grid)

    def floor(self, p):
        return float(p + 1) if self.weight_floor is None else float(self.weight_floor)


@dataclass
class RimleFit:
    params: MixtureParams
    posteriors: np.ndarray
    pseudo_loglik: float
    iterations: int
    converged: bool
    loglik_trace: list = field(default_factory=list, repr=False)
    discrepancy: float = float("nan")
    delta_table: list | None = field(default=None, repr=False)

    @property
    def G(self):
        return self.params.G

    @property
    def delta(self):
        return self.params.delta

    @property
    def mean_noise_posterior(self):
        return float(self.posteriors[:, 0].mean())

    @property
    def noise_prop(self):
        return float(self.params.pi[0])

    def labels(self):
        """Hard assignment; 0 is noise, 1..G are clusters."""
        return np.argmax(self.posteriors, axis=1)


# ---------------------------------------------------------------------------
# densities and posteriors


def _precision_cholesky(covs):
    G, p, _ = covs.shape
    prec = np.empty_like(covs)
    log_det_half = np.empty(G)
    eye = np.eye(p)
    for g in range(G):
        try:
            chol = np.linalg.cholesky(covs[g])
        except np.linalg.LinAlgError:
            raise DegenerateError(f"covariance of component {g + 1} is not positive definite") from None
        prec[g] = solve_triangular(chol, eye, lower=True).T
        log_det_half[g] = np.log(np.diag(chol)).sum()
    return prec, log_det_half


def mahalanobis_sq(X, means, covs):
    """Squared Mahalanobis distances, shape (n, G)."""
    prec, _ = _precision_cholesky(covs)
    out = np.empty((X.shape[0], means.shape[0]))
    for g in range(means.shape[0]):
        y = X @ prec[g] - means[g] @ prec[g]
        out[:, g] = np.einsum("ij,ij->i", y, y)
    return out


def _log_joint(X, params):
    """Log of ``pi_g * density_g(x_i)`` with column 0 the noise term."""
    n, p = X.shape
    G = params.G
    prec, log_det_half = _precision_cholesky(params.covs)
    out = np.empty((n, G + 1))
    noise = params.pi[0] * params.delta
    out[:, 0] = np.log(noise) if noise > 0 else -np.inf
    with np.errstate(divide="ignore"):
        log_pi = np.log(params.pi[1:])
    for g in range(G):
        y = X @ prec[g] - params.means[g] @ prec[g]
        maha = np.einsum("ij,ij->i", y, y)
        out[:, g + 1] = log_pi[g] - 0.5 * (p * _LOG_2PI + maha) - log_det_half[g]
    return out


def _e_step(X, params):
    log_joint = _log_joint(X, params)
    log_f = logsumexp(log_joint, axis=1)
    if not np.all(np.isfinite(log_f)):
        raise DegenerateError("improper mixture density is zero at some observation")
    post = np.exp(log_joint - log_f[:, None])
    post /= post.sum(axis=1, keepdims=True)
    return log_f, post


def improper_density(x, params):
    """Evaluate ``pi_0*delta + sum_g pi_g*phi(x; mu_g, Sigma_g)``.

    ``x`` may be a single p-vector (returns a float) or an (n, p) array.
    """
    x = np.asarray(x, float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    log_f = logsumexp(_log_joint(X, params), axis=1)
    dens = np.exp(log_f)
    return float(dens[0]) if single else dens


def posteriors(data, params):
    """Posterior (pseudo) probabilities, column 0 for noise; rows sum to 1."""
    X = check_data(data)
    return _e_step(X, params)[1]


# ---------------------------------------------------------------------------
# eigenratio-constrained covariance step


def _truncation_objective(m, lam, w, gamma):
    m = np.atleast_1d(m)[:, None]
    lam_t = np.clip(lam[None, :], m, gamma * m)
    return np.sum(w * (np.log(lam_t) + lam / lam_t), axis=1)


def optimal_truncation_level(eigenvalues, weight_sums, gamma):
    """Lower clipping level ``m`` minimising the weighted truncation objective.

    ``eigenvalues`` is (G, p), ``weight_sums`` is (G,). The objective is
    ``sum_g w_g sum_j (log lt_gj + l_gj / lt_gj)`` with ``lt = clip(l, m,
    gamma*m)``; it is piecewise smooth with breakpoints at the eigenvalues and
    the eigenvalues divided by gamma, and on each piece the stationary point is
    closed form.
    """
    lam_mat = np.asarray(eigenvalues, float)
    lam = lam_mat.ravel()
    w = np.repeat(np.asarray(weight_sums, float), lam_mat.shape[1])
    bps = np.unique(np.concatenate([lam, lam / gamma]))
    bps = bps[bps > 0]
    if bps.size == 0:
        raise DegenerateError("all eigenvalues are zero")
    order = np.argsort(lam)
    lam_s, w_s = lam[order], w[order]
    cw = np.concatenate([[0.0], np.cumsum(w_s)])
    cwl = np.concatenate([[0.0], np.cumsum(w_s * lam_s)])
    mids = 0.5 * (bps[:-1] + bps[1:])
    # eigenvalues below m get raised to m, those above gamma*m lowered to it
    n_lo = np.searchsorted(lam_s, mids, side="left")
    n_hi = np.searchsorted(lam_s, gamma * mids, side="right")
    num = cwl[n_lo] + (cwl[-1] - cwl[n_hi]) / gamma
    den = cw[n_lo] + (cw[-1] - cw[n_hi])
    with np.errstate(invalid="ignore", divide="ignore"):
        stat = np.where(den > 0, num / den, mids)
    stat = np.clip(stat, bps[:-1], bps[1:])
    cands = np.concatenate([bps, stat])
    obj = _truncation_objective(cands, lam, w, gamma)
    best = np.flatnonzero(obj == obj.min())
    return float(np.min(cands[best]))


def constrained_cov_update(scatters, weight_sums, gamma):
    """Covariances maximising the weighted Gaussian likelihood under the eigenratio bound.

    Eigenvectors of each ``scatter / weight`` are kept and the eigenvalues
    are clipped to ``[m, gamma*m]`` with the optimal ``m``.
    """
    S = np.asarray(scatters, float)
    w = np.asarray(weight_sums, float)
    if S.ndim == 2:
        S = S[None]
    if np.any(w <= 0):
        raise ValueError("weight sums must be positive")
    if gamma < 1:
        raise ValueError("gamma must be >= 1")
    covs = S / w[:, None, None]
    covs = 0.5 * (covs + covs.transpose(0, 2, 1))
    evals, evecs = np.linalg.eigh(covs)
    evals = np.clip(evals, 0.0, None)
    lo, hi = evals.min(), evals.max()
    if hi <= 0:
        raise DegenerateError("all eigenvalues are zero")
    if lo > 0 and hi <= gamma * (1 - _RATIO_MARGIN) * lo:
        return covs
    m = optimal_truncation_level(evals, w, gamma)
    G, p, _ = covs.shape
    if gamma * (1 - _RATIO_MARGIN) <= 1:
        # no room for the margin: every eigenvalue is m, so build m*I exactly
        return np.broadcast_to(m * np.eye(p), (G, p, p)).copy()
    lam = np.clip(evals, m, gamma * m * (1 - _RATIO_MARGIN))
    out = np.einsum("gij,gj,gkj->gik", evecs, lam, evecs)
    return 0.5 * (out + out.transpose(0, 2, 1))


def eigenratio(covs):
    ev = np.linalg.eigvalsh(np.asarray(covs, float))
    return float(ev.max() / ev.min())


# ---------------------------------------------------------------------------
# ECM


class _Collapse(Exception):
    pass


def _m_step(X, post, delta, gamma, floor):
    n = X.shape[0]
    wsum = post.sum(axis=0)
    if np.any(wsum[1:] < floor):
        raise _Collapse(f"component weight below floor {floor}")
    pi = wsum / n
    if delta == 0:
        pi[0] = 0.0
    pi = pi / pi.sum()
    G = post.shape[1] - 1
    p = X.shape[1]
    means = np.empty((G, p))
    scat = np.empty((G, p, p))
    for g in range(G):
        wg = post[:, g + 1]
        means[g] = wg @ X / wsum[g + 1]
        diff = X - means[g]
        scat[g] = (diff * wg[:, None]).T @ diff
    covs = constrained_cov_update(scat, wsum[1:], gamma)
    return MixtureParams(pi, means, covs, delta)


def _run_em(X, params, gamma, max_iter, tol, floor):
    """Iterate E and M steps from ``params``; raises _Collapse on degeneracy."""
    try:
        log_f, post = _e_step(X, params)
    except DegenerateError as exc:
        raise _Collapse(str(exc)) from None
    trace = [float(log_f.sum())]
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        try:
            new = _m_step(X, post, params.delta, gamma, floor)
            log_f, new_post = _e_step(X, new)
        except DegenerateError as exc:
            raise _Collapse(str(exc)) from None
        params, post = new, new_post
        ll = float(log_f.sum())
        prev = trace[-1]
        trace.append(ll)
        if abs(ll - prev) <= tol * abs(prev):
            converged = True
            break
    return RimleFit(params, post, trace[-1], it, converged, trace)


def _kmeanspp(X, G, rng):
    """k-means++ seeding with D^2 weights capped at their 95% quantile.

    The cap keeps isolated gross outliers from being picked as seeds almost
    surely.
    """
    n = X.shape[0]
    idx = [int(rng.integers(n))]
    d2 = np.sum((X - X[idx[0]]) ** 2, axis=1)
    for _ in range(1, G):
        wts = np.minimum(d2, np.quantile(d2, 0.95))
        total = wts.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=wts / total))
        else:
            nxt = int(rng.integers(n))
        idx.append(nxt)
        d2 = np.minimum(d2, np.sum((X - X[nxt]) ** 2, axis=1))
    return X[idx].copy()


def _initial_params(X, G, delta, gamma, rng):
    n, p = X.shape
    centers = _kmeanspp(X, G, rng)
    d2 = ((X[:, None, :] - centers[None]) ** 2).sum(axis=2)
    lab = np.argmin(d2, axis=1)
    dmin = d2[np.arange(n), lab]
    # pooled within-group scatter of the 95% of points closest to their seed
    inner = dmin <= np.quantile(dmin, 0.95)
    scat = np.zeros((p, p))
    for g in range(G):
        sub = X[(lab == g) & inner]
        if len(sub):
            # one Lloyd step: a lone seed point can sit far out in the tail
            centers[g] = sub.mean(axis=0)
            diff = sub - centers[g]
            scat += diff.T @ diff
    pooled = 0.5 * scat / inner.sum()
    if not np.any(np.linalg.eigvalsh(pooled) > 0):
        pooled = 0.5 * np.cov(X, rowvar=False, bias=True).reshape(p, p)
    cov = constrained_cov_update(pooled[None] * n, [n], gamma)[0]
    pi0 = 0.02 if delta > 0 else 0.0
    pi = np.concatenate([[pi0], np.full(G, (1 - pi0) / G)])
    return MixtureParams(pi, centers, np.repeat(cov[None], G, axis=0), float(delta))


def _with_delta(params, delta):
    pi = params.pi.copy()
    if delta > 0 and pi[0] < 0.02:
        pi[1:] *= (1 - 0.02) / pi[1:].sum()
        pi[0] = 0.02
    if delta == 0:
        pi[0] = 0.0
        pi /= pi.sum()
    return MixtureParams(pi, params.means.copy(), params.covs.copy(), float(delta))


def _check_G(X, G):
    if int(G) != G or G < 1:
        raise ValueError("G must be a positive integer")
    if X.shape[0] < G:
        raise ValueError("need at least G observations")


def rimle_em(data, G, delta, ctrl=None, rng=None):
    """Fit the improper noise mixture for a fixed noise level ``delta``.

    Runs ``ctrl.n_restarts`` k-means++ initialisations to convergence and
    returns the one with the largest pseudo log-likelihood.
    """
    X = check_data(data)
    ctrl = ctrl or FitControl()
    rng = as_generator(rng)
    _check_G(X, G)
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    floor = ctrl.floor(X.shape[1])
    best = None
    for _ in range(ctrl.n_restarts):
        start = _initial_params(X, G, delta, ctrl.gamma, rng)
        try:
            fit = _run_em(X, start, ctrl.gamma, ctrl.max_iter, ctrl.tol, floor)
        except _Collapse:
            continue
        if best is None or fit.pseudo_loglik > best.pseudo_loglik:
            best = fit
    if best is None:
        raise DegenerateFitError(f"all {ctrl.n_restarts} restarts degenerated (G={G}, delta={delta:g})",
                                 G=G, delta=delta)
    return best


# ---------------------------------------------------------------------------
# discrepancy and noise-level tuning


def weighted_chi2_discrepancy(distances, weights, df):
    """Sup distance between a weighted ECDF of ``distances`` and the chi2(df) CDF.

    Both one-sided limits of the right-continuous ECDF are compared at every
    observed value.
    """
    d = np.asarray(distances, float).ravel()
    w = np.asarray(weights, float).ravel()
    total = w.sum()
    if not total > 0:
        raise DegenerateError("weighted sample is empty")
    vals, inv = np.unique(d, return_inverse=True)
    wu = np.bincount(inv, weights=w, minlength=vals.size)
    right = np.cumsum(wu) / total
    left = right - wu / total
    ref = stats.chi2.cdf(vals, df)
    return float(max(np.max(np.abs(right - ref)), np.max(np.abs(left - ref))))


def kolmogorov_discrepancy(fit, data, floor=None):
    """Pooled posterior-weighted Mahalanobis ECDF distance to chi2_p."""
    X = check_data(data)
    p = X.shape[1]
    w = fit.posteriors[:, 1:]
    floor = float(p + 1) if floor is None else floor
    if w.sum() < floor:
        raise DegenerateError("total cluster weight below floor; discrepancy undefined")
    d2 = mahalanobis_sq(X, fit.params.means, fit.params.covs)
    return weighted_chi2_discrepancy(d2, w, p)


def single_gaussian_log_density(X, gamma=20.0):
    """Log density of the ML single Gaussian (eigen-clipped) at every row."""
    X = check_data(X)
    n, p = X.shape
    mu = X.mean(axis=0)
    diff = X - mu
    cov = constrained_cov_update((diff.T @ diff)[None], [n], gamma)
    params = MixtureParams(np.array([0.0, 1.0]), mu[None], cov, 0.0)
    return _log_joint(X, params)[:, 1]


def default_delta_grid(data, gamma=20.0, n_delta=30, delta_range=(1e-3, 1.0)):
    """``{0}`` plus log-spaced levels relative to the median single-Gaussian density."""
    fbar = float(np.exp(np.median(single_gaussian_log_density(data, gamma))))
    lo, hi = delta_range
    return np.concatenate([[0.0], np.geomspace(lo * fbar, hi * fbar, n_delta)])


def _screen(X, G, delta, ctrl, rng, floor):
    """Pick the most promising initialisation after a few EM iterations."""
    best, best_ll = None, -np.inf
    for _ in range(ctrl.n_restarts):
        start = _initial_params(X, G, delta, ctrl.gamma, rng)
        try:
            short = _run_em(X, start, ctrl.gamma, ctrl.screen_iter, ctrl.tol, floor)
        except _Collapse:
            continue
        if short.pseudo_loglik > best_ll:
            best, best_ll = start, short.pseudo_loglik
    return best


def _candidate(X, start, delta, ctrl, floor, beta):
    fit = _run_em(X, _with_delta(start, delta), ctrl.gamma, ctrl.max_iter, ctrl.tol, floor)
    if fit.mean_noise_posterior > ctrl.noise_cap:
        return fit, None, "noise-cap"
    try:
        fit.discrepancy = kolmogorov_discrepancy(fit, X, floor)
    except DegenerateError:
        return fit, None, "discrepancy-undefined"
    return fit, fit.discrepancy + beta * fit.noise_prop, "ok"


def otrimle_fit(data, G, ctrl=None, rng=None):
    """Fit with the noise level chosen by ``argmin D(delta) + beta * pi_0(delta)``.

    Candidates whose mean noise posterior exceeds ``ctrl.noise_cap`` are
    discarded; ties go to the smaller delta. One initialisation is chosen by
    screening ``ctrl.n_restarts`` k-means++ starts, then the delta grid is
    traversed in ascending order with warm starts.
    """
    X = check_data(data)
    ctrl = ctrl or FitControl()
    rng = as_generator(rng)
    _check_G(X, G)
    floor = ctrl.floor(X.shape[1])
    if ctrl.delta_grid is not None:
        grid = np.asarray(ctrl.delta_grid, float)
    else:
        grid = default_delta_grid(X, ctrl.gamma, ctrl.n_delta, ctrl.delta_range)
    positive = grid[grid > 0]
    screen_delta = positive[0] if positive.size else 0.0
    start = _screen(X, G, screen_delta, ctrl, rng, floor)
    if start is None:
        raise NoValidDeltaError(f"no initialisation survived screening (G={G})", G=G)

    table = []
    best, best_obj = None, np.inf
    warm = start
    for delta in grid:
        src = start if delta == 0 else warm
        try:
            fit, obj, status = _candidate(X, src, delta, ctrl, floor, ctrl.beta)
        except _Collapse:
            table.append({"delta": float(delta), "status": "degenerate"})
            continue
        table.append({"delta": float(delta), "status": status, "discrepancy": fit.discrepancy,
                      "noise_prop": fit.noise_prop, "objective": obj})
        if status == "noise-cap":
            # noise only grows with delta
            break
        if delta > 0:
            warm = fit.params
        if obj is not None and obj < best_obj:
            best, best_obj = fit, obj

    if best is None:
        raise NoValidDeltaError(f"no admissible delta for G={G}", G=G)

    if ctrl.refine and best.delta > 0:
        best, best_obj = _refine(X, best, best_obj, grid, ctrl, floor, table)

    best.delta_table = table
    return best


def _refine(X, best, best_obj, grid, ctrl, floor, table):
    k = int(np.searchsorted(grid, best.delta))
    lo = grid[k - 1] if k > 1 else best.delta / 2
    hi = grid[k + 1] if k + 1 < grid.size else best.delta * 2
    cache = {}

    def objective(log_delta):
        delta = float(np.exp(log_delta))
        try:
            fit, obj, status = _candidate(X, best.params, delta, ctrl, floor, ctrl.beta)
        except _Collapse:
            return np.inf
        if obj is None:
            return np.inf
        cache[log_delta] = fit
        return obj

    res = optimize.minimize_scalar(objective, bounds=(np.log(lo), np.log(hi)), method="bounded",
                                   options={"xatol": 1e-3})
    if res.x in cache and res.fun < best_obj:
        fit = cache[res.x]
        table.append({"delta": fit.delta, "status": "refined", "discrepancy": fit.discrepancy,
                      "noise_prop": fit.noise_prop, "objective": float(res.fun)})
        return fit, float(res.fun)
    return best, best_obj


# ---------------------------------------------------------------------------
# estimator


class OTRIMLE(ClusterMixin, BaseEstimator):
    """Optimally tuned improper-ML Gaussian mixture clustering with noise.

    Parameters
    ----------
    n_clusters : int
        Number of Gaussian clusters G.
    gamma : float
        Bound on the eigenvalue ratio across all cluster covariances.
    beta : float
        Weight of the noise proportion in the noise-level objective.
    noise_cap : float
        Largest admissible mean noise posterior.
    delta_grid : sequence of float or None
        Candidate noise levels; ``None`` for the data-driven default.
    n_restarts, max_iter, tol : ECM settings.
    refine : bool
        Refine the best noise level by bounded 1-d search.
    random_state : int or None

    Attributes
    ----------
    fit_ : RimleFit
    delta_, weights_, means_, covariances_ :
        Fitted parameters; ``weights_[0]`` is the noise proportion.
    labels_ : ndarray
        0 for noise, 1..G for clusters.
    """

    def __init__(self, n_clusters=2, *, gamma=20.0, beta=0.0, noise_cap=0.5, delta_grid=None,
                 n_restarts=10, max_iter=500, tol=1e-7, refine=False, random_state=None):
        self.n_clusters = n_clusters
        self.gamma = gamma
        self.beta = beta
        self.noise_cap = noise_cap
        self.delta_grid = delta_grid
        self.n_restarts = n_restarts
        self.max_iter = max_iter
        self.tol = tol
        self.refine = refine
        self.random_state = random_state

    def _control(self):
        return FitControl(gamma=self.gamma, max_iter=self.max_iter, tol=self.tol,
                          n_restarts=self.n_restarts, delta_grid=self.delta_grid,
                          beta=self.beta, noise_cap=self.noise_cap, refine=self.refine)

    def fit(self, X, y=None):
        X = check_data(X)
        self.n_features_in_ = X.shape[1]
        fit = otrimle_fit(X, self.n_clusters, self._control(), np.random.default_rng(self.random_state))
        self._store(fit)
        return self

    def _store(self, fit):
        self.fit_ = fit
        self.delta_ = fit.delta
        self.weights_ = fit.params.pi
        self.means_ = fit.params.means
        self.covariances_ = fit.params.covs
        self.discrepancy_ = fit.discrepancy
        self.labels_ = fit.labels()

    def predict_proba(self, X):
        check_is_fitted(self, "fit_")
        return posteriors(X, self.fit_.params)

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)

    def score_samples(self, X):
        """Log of the improper mixture density."""
        check_is_fitted(self, "fit_")
        return logsumexp(_log_joint(check_data(X), self.fit_.params), axis=1)


__all__ = [
    "DegenerateFitError", "NoValidDeltaError", "MixtureParams", "FitControl", "RimleFit",
    "improper_density", "posteriors", "constrained_cov_update", "optimal_truncation_level",
    "rimle_em", "kolmogorov_discrepancy", "weighted_chi2_discrepancy", "otrimle_fit",
    "default_delta_grid", "mahalanobis_sq", "eigenratio", "OTRIMLE",
]

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats
from sklearn.base import clone
from sklearn.cluster import KMeans
from sklearn.metrics import adjusted_rand_score

from adeqclust._validation import DegenerateError
from adeqclust.rimle import (OTRIMLE, FitControl, MixtureParams, NoValidDeltaError, RimleFit,
                             constrained_cov_update, default_delta_grid, eigenratio,
                             improper_density, kolmogorov_discrepancy, mahalanobis_sq, otrimle_fit,
                             posteriors, rimle_em, weighted_chi2_discrepancy)

PHI0 = 1 / np.sqrt(2 * np.pi)


def scalar_params(pi0=0.5, delta=0.1):
    return MixtureParams(np.array([pi0, 1 - pi0]), np.zeros((1, 1)), np.ones((1, 1, 1)), delta)


# ---------------------------------------------------------------------------
# density and posteriors


def test_density_all_noise_is_constant():
    params = MixtureParams(np.array([1.0, 0.0]), np.zeros((1, 3)), np.eye(3)[None], 0.05)
    assert improper_density(np.array([10.0, -3.0, 2.0]), params) == pytest.approx(0.05, rel=1e-14)


def test_density_scalar_hand_value():
    assert improper_density(np.zeros(1), scalar_params()) == pytest.approx(0.05 + 0.5 * PHI0, rel=1e-14)


def test_density_without_noise_is_gaussian(rng):
    cov = np.array([[2.0, 0.3], [0.3, 1.0]])
    params = MixtureParams(np.array([0.0, 1.0]), np.array([[1.0, -1.0]]), cov[None], 0.3)
    x = rng.standard_normal((5, 2))
    ref = stats.multivariate_normal([1.0, -1.0], cov).pdf(x)
    np.testing.assert_allclose(improper_density(x, params), ref, rtol=1e-12)


def test_posteriors_single_component(rng):
    params = MixtureParams(np.array([0.0, 1.0]), np.zeros((1, 2)), np.eye(2)[None], 0.1)
    post = posteriors(rng.standard_normal((20, 2)), params)
    np.testing.assert_array_equal(post, np.tile([0.0, 1.0], (20, 1)))


def test_posteriors_identical_components(rng):
    params = MixtureParams(np.array([0.0, 0.5, 0.5]), np.zeros((2, 2)),
                           np.repeat(np.eye(2)[None], 2, 0), 0.0)
    post = posteriors(rng.standard_normal((20, 2)), params)
    np.testing.assert_allclose(post, np.tile([0.0, 0.5, 0.5], (20, 1)), atol=1e-15)


def test_posteriors_scalar_hand_value():
    post = posteriors(np.zeros((1, 1)), scalar_params())
    f = 0.05 + 0.5 * PHI0
    np.testing.assert_allclose(post[0], [0.05 / f, 0.5 * PHI0 / f], rtol=1e-13)


def test_posteriors_zero_density_raises():
    # all mass on a noise component of density zero
    params = MixtureParams(np.array([1.0, 0.0]), np.zeros((1, 1)), np.ones((1, 1, 1)), 0.0)
    with pytest.raises(DegenerateError):
        posteriors(np.array([[0.5]]), params)


# ---------------------------------------------------------------------------
# constrained covariance step


def grid_truncation_oracle(lam, w, gamma, levels=12, points=2001):
    """Minimise the truncation objective over m by iterated dense grids in log(m).

    Coarse levels zoom on the objective; the final levels zoom on the sign of
    its derivative, which is not flat at the optimum.
    """
    lam = np.asarray(lam, float)
    w = np.repeat(w, lam.shape[1])
    flat = lam.ravel()

    def obj(m):
        lt = np.clip(flat[None], m[:, None], gamma * m[:, None])
        return np.sum(w * (np.log(lt) + flat / lt), axis=1)

    def slope(m):
        m = m[:, None]
        lo_set = flat[None] < m
        hi_set = flat[None] > gamma * m
        return np.sum(w * (lo_set * (1 / m - flat / m ** 2)
                           + hi_set * (1 / m - flat / (gamma * m ** 2))), axis=1)

    lo, hi = np.log(flat[flat > 0].min() / gamma) - 1, np.log(flat.max()) + 1
    for level in range(levels):
        grid = np.linspace(lo, hi, points)
        if level < 3:
            k = int(np.argmin(obj(np.exp(grid))))
        else:
            sl = slope(np.exp(grid))
            k = int(np.argmax(sl >= 0)) if np.any(sl >= 0) else points - 1
        step = grid[1] - grid[0]
        lo, hi = grid[max(k - 2, 0)] - step, grid[min(k + 2, points - 1)] + step
    m = np.exp(grid[k])
    return np.clip(lam, m, gamma * m), m


def scatter_with_eigs(evals, rng):
    p = len(evals)
    q, _ = np.linalg.qr(rng.standard_normal((p, p)))
    return q @ np.diag(evals) @ q.T


def test_feasible_eigenvalues_unchanged():
    out = constrained_cov_update(np.eye(2)[None], [1.0], 20.0)
    np.testing.assert_allclose(out[0], np.eye(2), atol=1e-15)


def test_truncation_matches_grid_oracle_two_eigenvalues(rng):
    S = scatter_with_eigs([100.0, 1.0], rng)
    out = constrained_cov_update(np.stack([S, S]), [1.0, 1.0], 20.0)
    expect, _ = grid_truncation_oracle([[100.0, 1.0], [100.0, 1.0]], [1.0, 1.0], 20.0)
    for g in range(2):
        np.testing.assert_allclose(np.linalg.eigvalsh(out[g])[::-1], expect[g], rtol=1e-8)
    assert eigenratio(out) <= 20.0


def test_gamma_one_gives_weighted_mean_eigenvalue(rng):
    e1, e2 = [5.0, 2.0, 1.0], [3.0, 0.5, 0.25]
    S = np.stack([scatter_with_eigs(e1, rng) * 2.0, scatter_with_eigs(e2, rng) * 6.0])
    out = constrained_cov_update(S, [2.0, 6.0], 1.0)
    mean = (2.0 * sum(e1) + 6.0 * sum(e2)) / (3 * 8.0)
    np.testing.assert_allclose(out, mean * np.repeat(np.eye(3)[None], 2, 0), rtol=1e-12)
    _, m = grid_truncation_oracle([e1, e2], [2.0, 6.0], 1.0)
    assert m == pytest.approx(mean, rel=1e-8)


def test_eigenvectors_preserved(rng):
    S = scatter_with_eigs([50.0, 4.0, 0.1], rng)
    out = constrained_cov_update(S[None], [1.0], 10.0)[0]
    v_in = np.linalg.eigh(S)[1]
    v_out = np.linalg.eigh(out)[1]
    np.testing.assert_allclose(np.abs(np.sum(v_in * v_out, axis=0)), 1.0, atol=1e-10)


def test_all_zero_scatter_raises():
    with pytest.raises(DegenerateError):
        constrained_cov_update(np.zeros((1, 2, 2)), [1.0], 20.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.floats(1.0, 50.0), st.integers(0, 2**31 - 1))
def test_truncation_oracle_property(G, p, gamma, seed):
    rng = np.random.default_rng(seed)
    evals = np.exp(rng.uniform(-4, 4, (G, p)))
    w = rng.uniform(0.5, 20, G)
    S = np.stack([scatter_with_eigs(e, rng) * wg for e, wg in zip(evals, w)])
    out = constrained_cov_update(S, w, gamma)
    assert eigenratio(out) <= gamma
    expect, _ = grid_truncation_oracle(np.sort(evals, axis=1), w, gamma)
    got = np.sort(np.linalg.eigvalsh(out), axis=1)
    np.testing.assert_allclose(got, expect, rtol=1e-8)


# ---------------------------------------------------------------------------
# ECM


def test_single_component_closed_form(rng):
    X = rng.standard_normal((200, 3)) @ np.diag([2.0, 1.0, 0.5])
    fit = rimle_em(X, 1, 0.0, FitControl(n_restarts=2), rng)
    np.testing.assert_allclose(fit.params.means[0], X.mean(axis=0), atol=1e-12)
    np.testing.assert_allclose(fit.params.covs[0], np.cov(X, rowvar=False, bias=True), atol=1e-12)
    assert fit.noise_prop == 0.0


def test_separated_blobs_match_kmeans(blobs, rng):
    X, y = blobs
    fit = rimle_em(X, 2, 0.0, FitControl(n_restarts=3), rng)
    km = KMeans(2, n_init=5, random_state=0).fit(X)
    assert adjusted_rand_score(km.labels_, fit.labels()) == 1.0
    assert np.all(np.max(fit.posteriors, axis=1) > 0.999)
    np.testing.assert_allclose(np.sort(fit.params.pi[1:]), [0.4, 0.6], atol=1e-6)


def test_loglik_trace_monotone(rng):
    X = np.vstack([rng.standard_normal((100, 2)), rng.standard_normal((80, 2)) + 3,
                   rng.uniform(-10, 10, (10, 2))])
    for delta in (0.0, 1e-3, 1e-2):
        fit = rimle_em(X, 3, delta, FitControl(n_restarts=2, tol=1e-12), rng)
        assert np.all(np.diff(fit.loglik_trace) >= -1e-8)
        assert fit.converged or fit.iterations == 500


def test_all_restarts_degenerate_reports_G_and_delta(rng):
    X = rng.standard_normal((6, 2))
    with pytest.raises(DegenerateError) as err:
        rimle_em(X, 3, 0.1, FitControl(n_restarts=2), rng)
    assert err.value.G == 3 and err.value.delta == 0.1


def test_posterior_rows_sum_to_one(rng):
    X = np.vstack([rng.standard_normal((100, 2)), rng.uniform(-8, 8, (20, 2))])
    fit = rimle_em(X, 2, 1e-3, FitControl(n_restarts=2), rng)
    np.testing.assert_allclose(fit.posteriors.sum(axis=1), 1.0, atol=1e-10)
    assert fit.posteriors.min() >= 0 and fit.posteriors.max() <= 1
    assert fit.mean_noise_posterior == pytest.approx(fit.posteriors[:, 0].mean())


# ---------------------------------------------------------------------------
# Kolmogorov discrepancy


def brute_force_discrepancy(d, w, df):
    d, w = np.ravel(d), np.ravel(w)
    total = w.sum()
    best = 0.0
    for t in d:
        right = w[d <= t].sum() / total
        left = w[d < t].sum() / total
        ref = stats.chi2.cdf(t, df)
        best = max(best, abs(right - ref), abs(left - ref))
    return best


def test_single_point_at_median():
    med = stats.chi2.ppf(0.5, 3)
    assert weighted_chi2_discrepancy([med], [1.0], 3) == pytest.approx(0.5, abs=1e-15)


def test_quantile_weights_small_discrepancy():
    n = 99
    d = stats.chi2.ppf(np.arange(1, n + 1) / (n + 1), 4)
    value = weighted_chi2_discrepancy(d, np.ones(n), 4)
    assert value == pytest.approx(brute_force_discrepancy(d, np.ones(n), 4), abs=1e-12)
    assert value < 0.02


def test_all_noise_is_undefined(rng):
    X = rng.standard_normal((10, 2))
    post = np.zeros((10, 2))
    post[:, 0] = 1
    fit = RimleFit(MixtureParams(np.array([1.0, 0.0]), np.zeros((1, 2)), np.eye(2)[None], 1.0),
                   post, 0.0, 0, True)
    with pytest.raises(DegenerateError):
        kolmogorov_discrepancy(fit, X)


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 50), st.integers(1, 3), st.integers(1, 5), st.integers(0, 2**31 - 1),
       st.booleans())
def test_discrepancy_matches_enumeration(n, G, p, seed, ties):
    rng = np.random.default_rng(seed)
    d = rng.chisquare(p, (n, G))
    if ties:
        d = np.round(d, 1)
    w = rng.dirichlet(np.ones(G + 1), n)[:, 1:]
    got = weighted_chi2_discrepancy(d, w, p)
    assert abs(got - brute_force_discrepancy(d, w, p)) <= 1e-12


def test_discrepancy_uses_fitted_mahalanobis(blobs, rng):
    X, _ = blobs
    fit = rimle_em(X, 2, 0.0, FitControl(n_restarts=2), rng)
    d2 = mahalanobis_sq(X, fit.params.means, fit.params.covs)
    expect = brute_force_discrepancy(d2, fit.posteriors[:, 1:], 2)
    assert kolmogorov_discrepancy(fit, X) == pytest.approx(expect, abs=1e-12)


# ---------------------------------------------------------------------------
# noise-level tuning


def test_zero_only_grid_is_plain_mixture(blobs, rng):
    X, _ = blobs
    fit = otrimle_fit(X, 2, FitControl(delta_grid=(0.0,), n_restarts=3), rng)
    assert fit.delta == 0.0 and fit.noise_prop == 0.0
    assert np.all(fit.posteriors[:, 0] == 0)


def test_single_gaussian_selects_negligible_noise(rng):
    X = rng.standard_normal((400, 2))
    fit = otrimle_fit(X, 1, FitControl(beta=0.0), rng)
    assert fit.noise_prop < 0.02
    ok = [r for r in fit.delta_table if r["status"] == "ok"]
    # brute-force re-evaluation of the objective on every admissible candidate
    for r in ok:
        cand = rimle_em(X, 1, r["delta"], FitControl(n_restarts=3), np.random.default_rng(1))
        cand.discrepancy = kolmogorov_discrepancy(cand, X)
        assert r["objective"] == pytest.approx(cand.discrepancy, abs=1e-3)
    assert fit.discrepancy == pytest.approx(min(r["objective"] for r in ok), abs=1e-15)


def test_beta_penalty_reduces_noise(rng):
    X = np.vstack([rng.standard_normal((200, 2)), rng.standard_normal((150, 2)) * 0.7 + [6, 0],
                   rng.uniform(-12, 18, (30, 2))])
    f0 = otrimle_fit(X, 2, FitControl(beta=0.0), np.random.default_rng(3))
    f1 = otrimle_fit(X, 2, FitControl(beta=1 / 3), np.random.default_rng(3))
    # identical candidate sets, so the penalised winner has no more noise
    assert f1.noise_prop <= f0.noise_prop + 1e-12
    for fit in (f0, f1):
        assert fit.mean_noise_posterior <= 0.5


def test_noise_cap_respected_and_no_valid_delta(rng):
    X = rng.standard_normal((100, 2))
    fit = otrimle_fit(X, 1, FitControl(noise_cap=0.05), rng)
    assert fit.mean_noise_posterior <= 0.05
    with pytest.raises(NoValidDeltaError):
        otrimle_fit(X, 1, FitControl(delta_grid=(10.0,), noise_cap=0.05), rng)


def test_tie_breaks_to_smaller_delta(rng):
    X = rng.standard_normal((80, 2))
    # noise density so small that both fits coincide
    fit = otrimle_fit(X, 1, FitControl(delta_grid=(1e-300, 2e-300)), rng)
    assert fit.delta == 1e-300


def test_fit_bitwise_reproducible(blobs):
    X, _ = blobs
    a = otrimle_fit(X, 2, FitControl(), np.random.default_rng(7))
    b = otrimle_fit(X, 2, FitControl(), np.random.default_rng(7))
    assert a.delta == b.delta
    assert np.array_equal(a.posteriors, b.posteriors)
    assert np.array_equal(a.params.covs, b.params.covs)


def test_refinement_does_not_worsen_objective(rng):
    X = np.vstack([rng.standard_normal((200, 2)), rng.uniform(-10, 10, (20, 2))])
    base = otrimle_fit(X, 1, FitControl(), np.random.default_rng(2))
    ref = otrimle_fit(X, 1, FitControl(refine=True), np.random.default_rng(2))
    assert ref.discrepancy <= base.discrepancy + 1e-12


def test_default_grid_shape(rng):
    grid = default_delta_grid(rng.standard_normal((50, 3)))
    assert grid[0] == 0 and grid.size == 31 and np.all(np.diff(grid) > 0)
    assert grid[-1] / grid[1] == pytest.approx(1e3)


def test_control_validation():
    with pytest.raises(ValueError):
        FitControl(gamma=0.5)
    with pytest.raises(ValueError):
        FitControl(delta_grid=(0.1, 0.0))


# ---------------------------------------------------------------------------
# estimator


def test_estimator_api(blobs):
    X, y = blobs
    est = OTRIMLE(n_clusters=2, random_state=0)
    assert clone(est).get_params() == est.get_params()
    labels = est.fit_predict(X)
    assert adjusted_rand_score(y, labels) > 0.98
    proba = est.predict_proba(X[:5])
    assert proba.shape == (5, 3)
    np.testing.assert_array_equal(est.predict(X), np.argmax(est.predict_proba(X), axis=1))
    assert est.weights_.sum() == pytest.approx(1.0)
    assert est.score_samples(X).shape == (X.shape[0],)

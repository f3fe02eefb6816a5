import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import optimize, stats

from rankcf import control as cf
from rankcf import first_stage as fs
from rankcf import liml, links
from rankcf.data import Dataset
from rankcf.dgp import DgpConfig, generate
from rankcf.exceptions import CollinearityError, DomainError, UnsupportedOperationError


def random_instance(seed, n=60, link="probit"):
    rng = np.random.default_rng(seed)
    z = np.column_stack([np.ones(n), rng.standard_normal(n)])
    d = z[:, 1] ** 2 + rng.standard_normal(n)
    eta = cf.build(fs.fit_ols(z, d).residuals).values
    theta = rng.normal(0, 0.7, 4)
    w = z @ theta[:2] + theta[2] * d + theta[3] * eta
    y = (w + (rng.standard_normal(n) if link == "probit" else rng.logistic(size=n)) > 0).astype(float)
    return Dataset(y, z, d), eta, theta


def fd_gradient(f, x, step):
    g = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = step
        g[j] = (f(x + e) - f(x - e)) / (2 * step)
    return g


def oracle_loglik(theta, y, w_mat, link):
    w = w_mat @ theta
    dist = stats.norm if link == "probit" else stats.logistic
    return np.mean(y * dist.logcdf(w) + (1 - y) * dist.logsf(w))


# ---- link-level values ------------------------------------------------------

def test_psi_values():
    assert liml.psi(np.zeros(2), 1.0, [[0.0]], [0.0], "logit") == pytest.approx(0.5)
    assert liml.psi(np.zeros(2), 0.0, [[0.0]], [0.0], "logit") == pytest.approx(-0.5)
    phi0 = 1 / np.sqrt(2 * np.pi)
    assert liml.psi(np.zeros(2), 1.0, [[0.0]], [0.0], "probit") == pytest.approx(0.5 * phi0 / 0.25, abs=1e-14)
    assert liml.psi(np.zeros(2), 1.0, [[0.0]], [0.0], "probit") == pytest.approx(0.7978845608028654, abs=1e-12)


def test_psi_dot_values():
    for y in (0.0, 1.0):
        assert liml.psi_dot(np.zeros(2), y, [[0.0]], [0.0], "logit") == pytest.approx(-0.25)
    pd = liml.psi_dot(np.zeros(2), 1.0, [[0.0]], [0.0], "probit")
    assert pd == pytest.approx(-2 / np.pi, abs=1e-12)
    mills = links.Probit.mills(0.0)
    assert abs(pd - (-mills * (0.0 + mills))) < 1e-10
    assert abs(pd - links.psi_dot_general("probit", 1.0, 0.0)) < 1e-10


@given(st.floats(-30, 30), st.sampled_from([0.0, 1.0]))
def test_logit_shortcut_matches_general_formula(w, y):
    assert abs(links.Logit.psi(y, w) - links.psi_general("logit", y, w)) < 1e-12 or abs(w) > 25


@given(st.floats(-5, 5), st.sampled_from([0.0, 1.0]), st.sampled_from(["probit", "logit"]))
def test_closed_forms_match_general_formula(w, y, link):
    # beyond |w| = 5 the textbook form loses digits to 1 - F cancellation
    lk = links.get_link(link)
    assert lk.psi(y, w) == pytest.approx(links.psi_general(link, y, w), rel=1e-8, abs=1e-12)
    assert lk.psi_dot(y, w) == pytest.approx(links.psi_dot_general(link, y, w), rel=1e-7, abs=1e-12)


def test_probit_tails_stay_accurate():
    # psi at y = 0 equals -phi(w) / (1 - Phi(w)), which grows like w far in the tail
    for w in (10.0, 30.0, 100.0):
        assert links.Probit.psi(0.0, w) == pytest.approx(-float(np.exp(stats.norm.logpdf(w) - stats.norm.logsf(w))), rel=1e-10)
        assert np.isfinite(links.Probit.psi_dot(0.0, w))


@given(st.floats(-1e3, 1e3), st.sampled_from(["probit", "logit"]))
def test_link_ranges(w, link):
    lk = links.get_link(link)
    assert np.isfinite(lk.psi(1.0, w)) and np.isfinite(lk.psi_dot(0.0, w))
    assert lk.psi_dot(1.0, w) <= 0.0 and lk.psi_dot(0.0, w) <= 0.0
    if abs(w) < 8:
        assert 0 < lk.cdf(w) < 1 and lk.pdf(w) > 0


def test_link_derivatives():
    w = np.linspace(-4, 4, 41)
    np.testing.assert_allclose(links.Probit.dpdf(w), -w * stats.norm.pdf(w), atol=1e-15)
    lam = 1 / (1 + np.exp(-w))
    np.testing.assert_allclose(links.Logit.pdf(w), lam * (1 - lam), atol=1e-15)
    np.testing.assert_allclose(links.Logit.dpdf(w), lam * (1 - lam) * (1 - 2 * lam), atol=1e-15)


# ---- likelihood, score, Hessian ---------------------------------------------

def test_loglik_at_zero(quad_sample):
    data = quad_sample.dataset
    eta = quad_sample.m_v_true
    for link in ("probit", "logit"):
        assert liml.loglik(np.zeros(4), data, eta, link) == pytest.approx(np.log(0.5), abs=1e-15)


def test_loglik_single_observation():
    # n >= k + 2 forbids a one-row dataset, so check the per-observation term
    assert links.Probit.logcdf(1.0) == pytest.approx(float(stats.norm.logcdf(1.0)), abs=1e-15)
    assert links.Probit.logcdf(1.0) == pytest.approx(-0.1727537790234499, abs=1e-12)


def test_score_zero_on_balanced_data():
    x = np.column_stack([np.ones(4), [0.5, 0.5, -1.0, -1.0]])
    data = Dataset([1.0, 0.0, 1.0, 0.0], x, [2.0, 2.0, 1.0, 1.0])
    eta = np.array([0.3, 0.3, -0.7, -0.7])
    np.testing.assert_allclose(liml.score(np.zeros(4), data, eta, "logit"), 0.0, atol=1e-15)


def test_hessian_logit_at_zero(quad_sample):
    data = quad_sample.dataset
    eta = quad_sample.m_v_true
    w_mat = liml.design(data, eta)
    np.testing.assert_allclose(
        liml.hessian(np.zeros(4), data, eta, "logit"), -0.25 * w_mat.T @ w_mat / data.n, atol=1e-14
    )


@pytest.mark.parametrize("link", ["probit", "logit"])
@pytest.mark.parametrize("seed", range(10))
def test_score_and_hessian_against_finite_differences(link, seed):
    data, eta, theta = random_instance(seed, link=link)
    g = liml.score(theta, data, eta, link)
    g_fd = fd_gradient(lambda t: liml.loglik(t, data, eta, link), theta, 1e-6)
    assert np.max(np.abs(g - g_fd)) / max(1.0, np.max(np.abs(g))) < 1e-6
    h = liml.hessian(theta, data, eta, link)
    h_fd = np.column_stack([
        fd_gradient(lambda t: liml.score(t, data, eta, link)[i], theta, 1e-6) for i in range(4)
    ]).T
    assert np.max(np.abs(h - h_fd)) < 1e-5
    np.testing.assert_allclose(h, h.T, atol=1e-15)


def test_loglik_matches_scipy_oracle():
    data, eta, theta = random_instance(3)
    w_mat = liml.design(data, eta)
    for link in ("probit", "logit"):
        assert liml.loglik(theta, data, eta, link) == pytest.approx(oracle_loglik(theta, data.y, w_mat, link), abs=1e-13)


def test_shape_errors(quad_sample):
    from rankcf.exceptions import ShapeError
    with pytest.raises(ShapeError):
        liml.loglik(np.zeros(3), quad_sample.dataset, quad_sample.m_v_true)
    with pytest.raises(ShapeError):
        liml.score(np.zeros(4), quad_sample.dataset, np.zeros(10))


# ---- fit ---------------------------------------------------------------------

@pytest.mark.parametrize("link", ["probit", "logit"])
def test_fit_first_order_conditions(quad_sample, link):
    data = quad_sample.dataset
    eta = cf.build(fs.fit_local_linear(data.z, data.d[:, 0]).residuals)
    res = liml.fit(data, eta, link)
    assert res.converged
    assert res.score_norm < 1e-8
    assert np.linalg.norm(liml.score(res.theta, data, eta, link)) < 1e-8
    assert np.max(np.linalg.eigvalsh(res.hessian)) <= 1e-6
    np.testing.assert_allclose(res.fisher_cov, -np.linalg.inv(res.hessian) / data.n, rtol=1e-10)
    assert res.names == ("const", "z", "d", "rho")


def test_fit_concave_along_newton_path():
    for link in ("probit", "logit"):
        data, eta, _ = random_instance(7, n=200, link=link)
        res = liml.fit(data, eta, link, max_iter=1)
        start = res.params
        for _ in range(5):
            assert np.max(np.linalg.eigvalsh(liml.hessian(start, data, eta, link))) <= 1e-6
            start = liml.fit(data, eta, link, start=start, max_iter=1).params


def test_zero_control_reduces_to_plain_fit(quad_sample):
    data = quad_sample.dataset
    for link in ("probit", "logit"):
        plain = liml.fit(data, None, link)
        zero = liml.fit(data, np.zeros(data.n), link)
        np.testing.assert_allclose(zero.theta.gamma, plain.theta.gamma, rtol=0, atol=1e-8)
        assert zero.theta.rho[0] == 0.0


def test_permutation_invariance(quad_sample):
    data = quad_sample.dataset
    eta = quad_sample.m_v_true
    perm = np.random.default_rng(1).permutation(data.n)
    a = liml.fit(data, eta)
    b = liml.fit(data.take(perm), eta[perm])
    np.testing.assert_allclose(a.params, b.params, rtol=0, atol=1e-10)


def test_collinear_design_raises(linear_sample):
    data = linear_sample.dataset
    resid = data.d[:, 0] - data.z @ [0.0, 1.0]
    with pytest.raises(CollinearityError) as info:
        liml.fit(data, resid)
    assert info.value.design_condition > 1e8


def test_collinear_drop_falls_back(linear_sample):
    data = linear_sample.dataset
    res = liml.fit(data, linear_sample.m_v_true, on_collinear="drop")
    plain = liml.fit(data)
    np.testing.assert_array_equal(res.theta.gamma, plain.theta.gamma)
    assert np.isnan(res.theta.rho[0])


def test_non_convergence_is_flagged(quad_sample):
    res = liml.fit(quad_sample.dataset, quad_sample.m_v_true, max_iter=1)
    assert not res.converged


def test_twelve_observation_grid_oracle():
    rng = np.random.default_rng(2024)
    n = 12
    z = np.column_stack([np.ones(n), rng.standard_normal(n)])
    v = rng.standard_normal(n)
    d = 0.5 * z[:, 1] ** 2 + v
    eta = cf.build(fs.fit_ols(z, d).residuals).values
    y = np.array([1, 0, 1, 1, 0, 1, 0, 0, 1, 1, 0, 1], dtype=float)
    data = Dataset(y, z, d)
    w_mat = liml.design(data, eta)

    def neg(t):
        return -oracle_loglik(t, y, w_mat, "probit")

    axes = [np.linspace(-3, 3, 13)] * 4
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 4)
    w = grid @ w_mat.T
    vals = (y * stats.norm.logcdf(w) + (1 - y) * stats.norm.logsf(w)).mean(axis=1)
    start = grid[np.argmax(vals)]
    polish = optimize.minimize(neg, start, method="Nelder-Mead",
                               options={"xatol": 1e-10, "fatol": 1e-15, "maxiter": 20000, "maxfev": 40000})
    polish = optimize.minimize(neg, polish.x, method="Nelder-Mead",
                               options={"xatol": 1e-10, "fatol": 1e-15, "maxiter": 20000, "maxfev": 40000})
    res = liml.fit(data, eta)
    assert res.converged
    assert np.max(np.abs(res.params - polish.x)) < 1e-4


# ---- ASF and profile ---------------------------------------------------------

def test_asf_examples():
    theta0 = liml.Theta([0.5, 1.0], [1.0], [0.0])
    assert liml.asf_parametric(theta0, [1, 0, 0]) == pytest.approx(0.6914624612740131, abs=1e-12)
    theta = liml.Theta([0.5, 1.0], [1.0], [0.5])
    assert round(liml.asf_parametric(theta, [1, 0, 0]), 4) == 0.6726
    big = liml.Theta([0.5, 1.0], [1.0], [1e9])
    assert liml.asf_parametric(big, [1, 0.3, 0.2]) == pytest.approx(0.5, abs=1e-8)


def test_asf_logit_unsupported():
    with pytest.raises(UnsupportedOperationError):
        liml.asf_parametric(liml.Theta([0.5, 1.0], [1.0], [0.5]), [1, 0, 0], "logit")


def test_profile_lambda_zero_matches_normal_fit(quad_sample):
    data = quad_sample.dataset
    resid = fs.fit_local_linear(data.z, data.d[:, 0]).residuals
    [(lam, ll)] = liml.profile_loglik_lambda(data, resid, "probit", [0.0])
    assert lam == 0.0
    assert ll == liml.fit(data, cf.build(resid)).loglik


def test_profile_lambda_empty_grid(quad_sample):
    with pytest.raises(DomainError):
        liml.profile_loglik_lambda(quad_sample.dataset, quad_sample.v_true, "probit", [])


def test_profile_lambda_peaks_near_zero():
    # The skew parameter is weakly identified even at n = 5000: single-sample
    # maximizers range over roughly +-0.6, so check the median over samples.
    grid = np.round(np.arange(-0.8, 0.81, 0.1), 10)
    best = []
    for seed in range(21, 29):
        data = generate(DgpConfig(n=5000, seed=seed)).dataset
        resid = fs.fit_local_linear(data.z, data.d[:, 0]).residuals
        rows = liml.profile_loglik_lambda(data, resid, "probit", grid)
        best.append(max(rows, key=lambda r: r[1])[0])
    assert abs(np.median(best)) <= 0.2 + 1e-12

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from rankcf import control as cf
from rankcf import first_stage as fs
from rankcf import semiparametric as sp
from rankcf.data import Dataset
from rankcf.exceptions import DegenerateTrimError, DomainError


def nw_oracle(w, y, h, t, skip=None):
    k = stats.norm.pdf((t - w) / h)
    if skip is not None:
        k[skip] = 0.0
    return np.sum(k * y) / np.sum(k)


def test_constant_outcomes_hit_the_clamp(rng):
    w = rng.standard_normal(30)
    np.testing.assert_array_equal(sp.nw_link(w, np.ones(30), 0.5), 1 - 1e-6)
    np.testing.assert_array_equal(sp.nw_link(w, np.zeros(30), 0.5, eval_points=[0.0, 3.0]), 1e-6)


def test_matches_explicit_kernel_sums(rng):
    w = rng.standard_normal(40)
    y = (rng.random(40) < 0.4).astype(float)
    got = sp.nw_link(w, y, 0.3, eval_points=[-1.0, 0.0, 0.7])
    want = [nw_oracle(w, y, 0.3, t) for t in (-1.0, 0.0, 0.7)]
    np.testing.assert_allclose(got, want, rtol=1e-12)
    loo = sp.nw_link(w, y, 0.3)
    want_loo = [nw_oracle(w, y, 0.3, w[i], skip=i) for i in range(40)]
    np.testing.assert_allclose(loo, np.clip(want_loo, 1e-6, 1 - 1e-6), rtol=1e-12)


def test_recovers_probit_link():
    rng = np.random.default_rng(5)
    w = 1.5 * rng.standard_normal(2000)
    y = (w + rng.standard_normal(2000) > 0).astype(float)
    t = np.linspace(-1.5, 1.5, 31)
    est = sp.nw_link(w, y, sp.silverman(w), eval_points=t)
    assert np.max(np.abs(est - stats.norm.cdf(t))) < 0.05


@given(st.integers(0, 2**32 - 1), st.integers(0, 24))
def test_output_in_unit_interval_and_monotone_in_y(seed, flip):
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(25)
    y = (rng.random(25) < 0.5).astype(float)
    y[flip] = 0.0
    y2 = y.copy()
    y2[flip] = 1.0
    t = np.linspace(-2, 2, 9)
    for ev in (None, t):
        a = sp.nw_link(w, y, 0.4, ev)
        b = sp.nw_link(w, y2, 0.4, ev)
        assert np.all((a > 0) & (a < 1))
        assert np.all(b >= a)


@given(st.floats(0.0, 0.2), st.floats(0.8, 1.0), st.floats(0.0, 0.1), st.floats(0.0, 0.1))
def test_trim_monotone(lo, hi, dlo, dhi):
    w = np.random.default_rng(0).standard_normal(200)
    narrow = sp.trim_mask(w, (lo, hi)).sum()
    wide = sp.trim_mask(w, (max(lo - dlo, 0.0), min(hi + dhi, 1.0))).sum()
    assert wide >= narrow


def test_spec_validation():
    with pytest.raises(DomainError):
        sp.SemiparamSpec(trim_quantiles=(0.6, 0.4))
    with pytest.raises(DomainError):
        sp.SemiparamSpec(bandwidth=0.0)


def test_degenerate_trim():
    rng = np.random.default_rng(3)
    n = 12
    z = np.column_stack([np.ones(n), rng.standard_normal(n)])
    d = rng.standard_normal(n)
    y = np.array([1, 0] * 6, dtype=float)
    data = Dataset(y, z, d)
    with pytest.raises(DegenerateTrimError):
        sp.fit_semiparam(data, None, sp.SemiparamSpec(trim_quantiles=(0.49, 0.51)), start=[0.0, 1.0, 0.5])


@pytest.mark.parametrize("c", [1.0, 3.0])
def test_scale_normalization(c):
    rng = np.random.default_rng(8)
    n = 2000
    z = np.column_stack([np.ones(n), rng.standard_normal(n)])
    d = rng.standard_normal(n)
    y = (c * (z[:, 1] + 0.5 * d) + rng.standard_normal(n) > 0).astype(float)
    fit = sp.fit_semiparam(Dataset(y, z, d))
    assert fit.theta.alpha[1] == 1.0
    assert fit.theta.alpha[0] == 0.0
    assert fit.theta.beta[0] == pytest.approx(0.5, abs=0.1)


def test_fit_on_simulated_sample(quad_sample):
    data = quad_sample.dataset
    eta = cf.build(fs.fit_local_linear(data.z, data.d[:, 0]).residuals)
    fit = sp.fit_semiparam(data, eta)
    assert fit.converged
    assert fit.method == "semiparametric" and fit.link == "np"
    assert fit.hessian is None and fit.fisher_cov is None
    assert fit.details["pinned"] == "z"
    assert fit.details["n_trimmed_in"] == pytest.approx(0.98 * data.n, abs=2)
    assert 0.5 < fit.theta.beta[0] < 1.5
    assert fit.score_norm < 1e-3


def test_explicit_normalization_index(quad_sample):
    data = quad_sample.dataset
    fit = sp.fit_semiparam(data, quad_sample.m_v_true, sp.SemiparamSpec(normalization_index=2))
    assert fit.theta.beta[0] == 1.0
    with pytest.raises(DomainError):
        sp.fit_semiparam(data, quad_sample.m_v_true, sp.SemiparamSpec(normalization_index=0))


def test_asf_rho_zero_is_single_link_evaluation(quad_sample):
    data = quad_sample.dataset
    eta = quad_sample.m_v_true
    theta = sp.Theta([0.0, 1.0], [0.8], [0.0])
    x = data.mean_x()
    w = data.x @ theta.gamma
    expected = sp.nw_link(w, data.y, sp.silverman(w), eval_points=[x @ theta.gamma])[0]
    assert sp.asf_nonparam(theta, data, eta, x) == pytest.approx(expected, rel=1e-12)


def test_asf_all_ones_sample(quad_sample):
    data = quad_sample.dataset
    ones = Dataset(np.ones(data.n), data.z, data.d)
    theta = sp.Theta([0.0, 1.0], [1.0], [0.5])
    assert sp.asf_nonparam(theta, ones, quad_sample.m_v_true, data.mean_x()) == pytest.approx(1.0, abs=1e-5)

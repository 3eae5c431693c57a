import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ggmentropy import ggm as G
from ggmentropy import gradcheck as GC
from ggmentropy.errors import DomainError
from ggmentropy.ggm import GgmParams
from ggmentropy.grad import (
    FdConfig,
    cdf_gradients,
    dcdf_dalpha_dmu,
    dcdf_dbeta,
    dcdf_dy,
    dgamma_da_fd,
    dP_da,
    dP_db,
)
from ggmentropy.specfun import reg_lower_incomplete_gamma

import oracles


def test_fd_config_validation():
    with pytest.raises(ValueError):
        FdConfig(epsilon_fd=0.0)
    with pytest.raises(ValueError):
        FdConfig(epsilon_fd=0.02)
    with pytest.raises(ValueError):
        FdConfig(eps_abs_floor=0.0)


def test_dcdf_dy_values():
    assert dcdf_dy(0.0, GgmParams(0.0, 1.0, 2.0)) == pytest.approx(1 / math.sqrt(math.pi),
                                                                   rel=1e-14)
    p = GgmParams(0.4, 0.8, 1.3)
    assert dcdf_dy(0.4 + 0.9, p) == pytest.approx(dcdf_dy(0.4 - 0.9, p), rel=1e-15)
    h = 1e-5
    fd = (G.cdf(0.7 + h, p) - G.cdf(0.7 - h, p)) / (2 * h)
    assert dcdf_dy(0.7, p) == pytest.approx(fd, abs=1e-6)


def test_dP_db_values():
    assert dP_db(1.0, 1.0) == pytest.approx(math.exp(-1), rel=1e-14)
    assert dP_db(1.0, 1e-300) == pytest.approx(1.0, rel=1e-12)
    assert dP_db(0.5, 1.0) == pytest.approx(math.exp(-1) / math.sqrt(math.pi), rel=1e-13)
    h = 1e-6
    fd = (reg_lower_incomplete_gamma(0.5, 1 + h) - reg_lower_incomplete_gamma(0.5, 1 - h)) / (2 * h)
    assert dP_db(0.5, 1.0) == pytest.approx(fd, rel=1e-8)


def test_dgamma_da_against_quadrature():
    ref = oracles.dlower_gamma_da_quad(1.0, 1.0)
    assert ref == pytest.approx(-0.7965995992970532, abs=1e-14)
    assert dgamma_da_fd(1.0, 1.0) == pytest.approx(ref, abs=1e-6)


def test_dgamma_da_zero_at_origin():
    assert dgamma_da_fd(1.7, 0.0) == 0.0
    assert dP_da(1.7, 0.0) == 0.0


def test_dgamma_da_domain():
    with pytest.raises(DomainError):
        dgamma_da_fd(1e-6, 1.0)


def test_dgamma_da_second_order(dgamma_points):
    for a, b, ref in dgamma_points:
        errs = [abs(dgamma_da_fd(a, b, FdConfig(epsilon_fd=e)) - ref) for e in (1e-3, 5e-4)]
        assert 3.0 <= errs[0] / errs[1] <= 5.0


def test_dP_da_values():
    h = 1e-5
    fd = (reg_lower_incomplete_gamma(1 + h, 1.0) - reg_lower_incomplete_gamma(1 - h, 1.0)) / (2 * h)
    assert dP_da(1.0, 1.0) == pytest.approx(fd, abs=1e-6)
    # the exact value is 0; what remains is round-off of order 1e-16 / eps
    assert abs(dP_da(2.0, 200.0)) < 1e-9


def test_dcdf_dbeta_values():
    p = GgmParams(0.0, 1.0, 2.0)
    assert dcdf_dbeta(0.0, p) == 0.0
    h = 1e-4
    fd = (G.cdf(1.5, GgmParams(0, 1, 2 + h)) - G.cdf(1.5, GgmParams(0, 1, 2 - h))) / (2 * h)
    assert dcdf_dbeta(1.5, p) == pytest.approx(fd, abs=1e-5)
    assert dcdf_dbeta(1.5, p) == pytest.approx(0.03109903170774753, abs=1e-8)
    assert oracles.ggm_dcdf_dbeta_mp(1.5, 0, 1, 2) == pytest.approx(0.03109903170774753, abs=1e-14)


def test_dcdf_dbeta_sign_at_small_t():
    assert dcdf_dbeta(0.2, GgmParams(0.0, 1.0, 1.5)) > 0


def test_dcdf_dbeta_below_floor_is_zero():
    p = GgmParams(1.0, 1.0, 1.5)
    assert dcdf_dbeta(1.0 + 1e-14, p) == 0.0


def test_dcdf_dalpha_dmu_values():
    p = GgmParams(0.0, 0.5, 1.5)
    d_alpha, d_mu = dcdf_dalpha_dmu(0.0, p)
    assert d_alpha == 0.0
    d_alpha, d_mu = dcdf_dalpha_dmu(1.0, p)
    h = 1e-5
    fd_alpha = (G.cdf(1.0, GgmParams(0, 0.5 + h, 1.5)) - G.cdf(1.0, GgmParams(0, 0.5 - h, 1.5))) / (2 * h)
    fd_mu = (G.cdf(1.0, GgmParams(h, 0.5, 1.5)) - G.cdf(1.0, GgmParams(-h, 0.5, 1.5))) / (2 * h)
    assert d_alpha == pytest.approx(fd_alpha, abs=1e-6)
    assert d_mu == pytest.approx(fd_mu, abs=1e-6)


@settings(max_examples=100, deadline=None)
@given(y=st.floats(-20, 20), mu=st.floats(-2, 2), alpha=st.floats(0.11, 5), beta=st.floats(0.15, 3.9))
def test_gradient_identities(y, mu, alpha, beta):
    p = GgmParams(mu, alpha, beta)
    g = cdf_gradients(y, p)
    assert g.d_y >= 0
    assert g.d_mu == pytest.approx(-g.d_y, rel=1e-12, abs=1e-300)


def test_vectorized_gradients_match_scalar():
    t = GC.random_tuples(20, seed=3)
    p = GgmParams(t.mu, t.alpha, t.beta)
    vec = dcdf_dbeta(t.y, p)
    for i in range(20):
        s = dcdf_dbeta(float(t.y[i]), GgmParams(float(t.mu[i]), float(t.alpha[i]), float(t.beta[i])))
        assert vec[i] == pytest.approx(s, rel=1e-14, abs=1e-300)


def test_gradcheck_suite_passes_at_default_step():
    rows = GC.run(n=200, seed=7, eps_list=(1e-5,), reference="central")
    assert all(r["passed"] for r in rows), rows


def test_gradcheck_mpmath_reference_agrees():
    t = GC.random_tuples(20, seed=1)
    got = GC.analytic(t)
    ref = GC.mpmath_reference(t)
    for name in GC.GRADIENTS:
        assert GC.passes(got[name], ref[name])


def test_error_metric_switches_to_absolute():
    err, rel = GC.errors(np.array([1.0, 2e-5]), np.array([1.001, 1e-5]))
    assert rel.tolist() == [True, False]
    assert err[0] == pytest.approx(0.001 / 1.001)
    assert err[1] == pytest.approx(1e-5)


def test_order_check_rows():
    rows = GC.order_check(a_values=(1.0,), b_values=(2.0,))
    assert len(rows) == 2
    assert all(3.0 <= r["ratio"] <= 5.0 for r in rows)

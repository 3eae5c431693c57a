import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from ggmentropy import models as M
from ggmentropy.errors import DomainError, InputFormatError
from ggmentropy.ggm import GgmParams
from ggmentropy.models import Gaussian, Gmm, Laplace, Logistic


def all_models():
    return [GgmParams(0.3, 1.2, 0.8), Gaussian(0.3, 1.1), Laplace(-0.2, 0.9),
            Logistic(0.1, 0.7), Gmm([0.5, 0.3, 0.2], [-1.0, 0.0, 2.0], [0.5, 1.0, 2.0])]


def test_family_tags_are_stable():
    assert M.FAMILY_TAGS == {"ggm": 0, "gaussian": 1, "laplace": 2, "logistic": 3, "gmm": 4}


@pytest.mark.parametrize("m", all_models(), ids=lambda m: m.family)
def test_json_round_trip(m):
    text = M.to_json(m)
    assert json.loads(text)["family"] == m.family
    back = M.from_json(text)
    y = np.linspace(-5, 5, 11)
    np.testing.assert_array_equal(back.cdf(y), m.cdf(y))


@pytest.mark.parametrize("m", all_models(), ids=lambda m: m.family)
def test_bin_masses_sum_to_one(m):
    scale = M.model_scale(m)
    half = int(math.ceil(40 * scale)) + 1
    k = np.arange(-half, half + 1, dtype=float) + M.model_center(m)
    assert M.model_bin_mass(k, m).sum() == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("m", all_models(), ids=lambda m: m.family)
def test_cdf_monotone_pdf_nonnegative(m):
    y = np.linspace(-30, 30, 2001)
    assert np.all(np.diff(M.model_cdf(y, m)) >= 0)
    assert np.all(M.model_pdf(y, m) >= 0)
    np.testing.assert_allclose(m.cdf(y) + m.sf(y), 1.0, atol=1e-15)


@pytest.mark.parametrize("m", all_models()[1:], ids=lambda m: m.family)
def test_cdf_is_antiderivative(m):
    y = np.linspace(-4, 4, 33) + 0.01
    h = 1e-5
    np.testing.assert_allclose((m.cdf(y + h) - m.cdf(y - h)) / (2 * h), m.pdf(y), atol=1e-7)


def test_baselines_against_scipy():
    y = np.linspace(-6, 6, 25)
    np.testing.assert_allclose(Gaussian(0.3, 1.1).cdf(y), stats.norm(0.3, 1.1).cdf(y), rtol=1e-14)
    np.testing.assert_allclose(Laplace(-0.2, 0.9).cdf(y), stats.laplace(-0.2, 0.9).cdf(y),
                               rtol=1e-14)
    np.testing.assert_allclose(Logistic(0.1, 0.7).cdf(y), stats.logistic(0.1, 0.7).cdf(y),
                               rtol=1e-14)
    np.testing.assert_allclose(Logistic(0.1, 0.7).pdf(y), stats.logistic(0.1, 0.7).pdf(y),
                               rtol=1e-13)


def test_logistic_cdf_at_center():
    assert Logistic(0.4, 2.0).cdf(0.4) == 0.5


@pytest.mark.parametrize("alpha", [0.11, 0.5, 1.0, 3.0])
def test_ggm_embeds_gaussian_and_laplace(alpha):
    k = np.arange(-20, 21, dtype=float)
    np.testing.assert_allclose(M.model_bin_probability(k, GgmParams(0, alpha, 2.0)),
                               M.model_bin_probability(k, Gaussian(0, alpha / math.sqrt(2))),
                               atol=1e-9)
    np.testing.assert_allclose(M.model_bin_probability(k, GgmParams(0, alpha, 1.0)),
                               M.model_bin_probability(k, Laplace(0, alpha)), atol=1e-9)


@settings(max_examples=50)
@given(mu=st.floats(-3, 3), sigma=st.floats(0.05, 10))
def test_single_component_gmm_is_gaussian(mu, sigma):
    g = Gaussian(mu, sigma)
    m = Gmm([1.0], [mu], [sigma])
    y = np.linspace(-10, 10, 41)
    np.testing.assert_array_equal(m.pdf(y), g.pdf(y))
    np.testing.assert_array_equal(m.cdf(y), g.cdf(y))
    np.testing.assert_array_equal(m.bin_probability(y), g.bin_probability(y))


def test_bin_probability_floor():
    assert Gaussian(0, 0.1).bin_probability(50.0) == 2.0 ** -16


def test_invalid_parameters():
    with pytest.raises(DomainError):
        Gaussian(0, 0)
    with pytest.raises(DomainError):
        Laplace(0, -1)
    with pytest.raises(DomainError):
        Logistic(0, 0)
    with pytest.raises(DomainError):
        Gmm([0.6, 0.6], [0, 1], [1, 1])
    with pytest.raises(DomainError):
        Gmm([0.5, 0.5], [0, 1], [1, 0])


def test_gmm_weights_tolerance():
    Gmm([0.5, 0.5 + 5e-10], [0, 1], [1, 1])
    with pytest.raises(DomainError):
        Gmm([0.5, 0.5 + 1e-8], [0, 1], [1, 1])


def test_bad_json():
    with pytest.raises(InputFormatError):
        M.from_json("{not json")
    with pytest.raises(InputFormatError):
        M.from_json('{"mu": 0}')
    with pytest.raises(InputFormatError):
        M.from_json('{"family": "cauchy"}')
    with pytest.raises(InputFormatError):
        M.from_json('{"family": "gaussian", "mu": 0}')


def test_model_center():
    assert M.model_center(GgmParams(0.7, 1, 2)) == 0.7
    assert M.model_center(Gmm([1.0], [0.7], [1.0])) == 0.0

"""Entropy models sharing one interface: pdf, cdf, sf and unit-bin masses.

Besides the GGM there are the classic baselines: Gaussian, Laplace,
Logistic and a K-component Gaussian mixture.  Every family is serialized as
a JSON object with a ``"family"`` discriminator.
"""

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.special import expit, ndtr

from .errors import DomainError, InputFormatError
from .ggm import PROB_FLOOR, GgmParams
from . import ggm as _ggm

FAMILIES = ("ggm", "gaussian", "laplace", "logistic", "gmm")
FAMILY_TAGS = {name: i for i, name in enumerate(FAMILIES)}


def _arr(x):
    return np.asarray(x, dtype=float)


def _scalar_or_list(v):
    return float(v) if np.ndim(v) == 0 else _arr(v).tolist()


class _Located:
    """Shared bin-mass logic for unimodal families symmetric about ``mu``."""

    def bin_mass(self, centers):
        c = _arr(centers)
        lo, hi = c - 0.5, c + 0.5
        mu = _arr(self.mu)
        upper = self.sf(lo) - self.sf(hi)
        lower = self.cdf(hi) - self.cdf(lo)
        mid = 1.0 - self.cdf(lo) - self.sf(hi)
        out = np.where(lo >= mu, upper, np.where(hi <= mu, lower, mid))
        return np.maximum(out, 0.0)

    def bin_probability(self, centers, floor=PROB_FLOOR):
        return np.maximum(self.bin_mass(centers), floor)


@dataclass(frozen=True, eq=False)
class Gaussian(_Located):
    mu: Any = 0.0
    sigma: Any = 1.0
    family = "gaussian"

    def __post_init__(self):
        if not np.all(_arr(self.sigma) > 0):
            raise DomainError("sigma must be > 0")

    def pdf(self, y):
        z = (_arr(y) - _arr(self.mu)) / _arr(self.sigma)
        return np.exp(-0.5 * z * z) / (np.sqrt(2 * np.pi) * _arr(self.sigma))

    def cdf(self, y):
        return ndtr((_arr(y) - _arr(self.mu)) / _arr(self.sigma))

    def sf(self, y):
        return ndtr((_arr(self.mu) - _arr(y)) / _arr(self.sigma))

    def to_dict(self):
        return {"family": self.family, "mu": _scalar_or_list(self.mu),
                "sigma": _scalar_or_list(self.sigma)}


@dataclass(frozen=True, eq=False)
class Laplace(_Located):
    mu: Any = 0.0
    b: Any = 1.0
    family = "laplace"

    def __post_init__(self):
        if not np.all(_arr(self.b) > 0):
            raise DomainError("b must be > 0")

    def pdf(self, y):
        return np.exp(-np.abs(_arr(y) - _arr(self.mu)) / _arr(self.b)) / (2 * _arr(self.b))

    def cdf(self, y):
        z = (_arr(y) - _arr(self.mu)) / _arr(self.b)
        return np.where(z < 0, 0.5 * np.exp(np.minimum(z, 0)), 1 - 0.5 * np.exp(-np.maximum(z, 0)))

    def sf(self, y):
        z = (_arr(y) - _arr(self.mu)) / _arr(self.b)
        return np.where(z > 0, 0.5 * np.exp(-np.maximum(z, 0)), 1 - 0.5 * np.exp(np.minimum(z, 0)))

    def to_dict(self):
        return {"family": self.family, "mu": _scalar_or_list(self.mu), "b": _scalar_or_list(self.b)}


@dataclass(frozen=True, eq=False)
class Logistic(_Located):
    mu: Any = 0.0
    s: Any = 1.0
    family = "logistic"

    def __post_init__(self):
        if not np.all(_arr(self.s) > 0):
            raise DomainError("s must be > 0")

    def pdf(self, y):
        z = np.abs(_arr(y) - _arr(self.mu)) / _arr(self.s)
        e = np.exp(-z)
        return e / (_arr(self.s) * (1 + e) ** 2)

    def cdf(self, y):
        return expit((_arr(y) - _arr(self.mu)) / _arr(self.s))

    def sf(self, y):
        return expit((_arr(self.mu) - _arr(y)) / _arr(self.s))

    def to_dict(self):
        return {"family": self.family, "mu": _scalar_or_list(self.mu), "s": _scalar_or_list(self.s)}


@dataclass(frozen=True, eq=False)
class Gmm:
    weights: Any = field(default_factory=lambda: np.array([1.0]))
    means: Any = field(default_factory=lambda: np.array([0.0]))
    sigmas: Any = field(default_factory=lambda: np.array([1.0]))
    family = "gmm"

    def __post_init__(self):
        w, m, s = _arr(self.weights), _arr(self.means), _arr(self.sigmas)
        if not (w.ndim == m.ndim == s.ndim == 1 and w.shape == m.shape == s.shape and w.size):
            raise DomainError("GMM needs three equal-length 1-D parameter vectors")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise DomainError("GMM weights must be nonnegative and sum to 1")
        if np.any(s <= 0):
            raise DomainError("GMM sigmas must be > 0")

    @property
    def k(self):
        return _arr(self.weights).size

    @property
    def mu(self):
        return float(np.dot(_arr(self.weights), _arr(self.means)))

    def _components(self):
        return [(w, Gaussian(m, s)) for w, m, s in
                zip(_arr(self.weights), _arr(self.means), _arr(self.sigmas))]

    def pdf(self, y):
        return sum(w * g.pdf(y) for w, g in self._components())

    def cdf(self, y):
        return sum(w * g.cdf(y) for w, g in self._components())

    def sf(self, y):
        return sum(w * g.sf(y) for w, g in self._components())

    def bin_mass(self, centers):
        return sum(w * g.bin_mass(centers) for w, g in self._components())

    def bin_probability(self, centers, floor=PROB_FLOOR):
        return np.maximum(self.bin_mass(centers), floor)

    def to_dict(self):
        return {"family": self.family, "weights": _arr(self.weights).tolist(),
                "means": _arr(self.means).tolist(), "sigmas": _arr(self.sigmas).tolist()}


_BUILDERS = {
    "ggm": lambda d: GgmParams.from_dict(d),
    "gaussian": lambda d: Gaussian(_num(d["mu"]), _num(d["sigma"])),
    "laplace": lambda d: Laplace(_num(d["mu"]), _num(d["b"])),
    "logistic": lambda d: Logistic(_num(d["mu"]), _num(d["s"])),
    "gmm": lambda d: Gmm(_arr(d["weights"]), _arr(d["means"]), _arr(d["sigmas"])),
}


def _num(v):
    return float(v) if np.ndim(v) == 0 else _arr(v)


def to_json(m):
    """JSON object of any model, with its ``family`` discriminator."""
    return json.dumps(m.to_dict())


def from_dict(d):
    """Rebuild a model from its JSON object."""
    if not isinstance(d, dict) or "family" not in d:
        raise InputFormatError("model JSON needs a 'family' field")
    try:
        build = _BUILDERS[d["family"]]
    except KeyError:
        raise InputFormatError(f"unknown family {d['family']!r}") from None
    try:
        return build(d)
    except (KeyError, TypeError) as exc:
        raise InputFormatError(f"bad parameters for {d['family']}: {exc}") from None


def from_json(text):
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"invalid model JSON: {exc}") from None
    return from_dict(d)


def model_pdf(y, m):
    return m.pdf(y)


def model_cdf(y, m):
    return m.cdf(y)


def model_bin_mass(centers, m):
    return m.bin_mass(centers)


def model_bin_probability(centers, m):
    """Unit-bin mass floored at 2**-16."""
    return m.bin_probability(centers)


def model_center(m):
    """Location used for zero-center quantization (mixtures use 0)."""
    if m.family == "gmm":
        return 0.0
    return float(m.mu)


def model_scale(m):
    """A rough dispersion, used to size coding alphabets and histograms."""
    if m.family == "ggm":
        return float(np.sqrt(_ggm.variance(m)))
    if m.family == "gaussian":
        return float(m.sigma)
    if m.family == "laplace":
        return float(np.sqrt(2.0) * m.b)
    if m.family == "logistic":
        return float(np.pi * m.s / np.sqrt(3.0))
    w, mu, s = _arr(m.weights), _arr(m.means), _arr(m.sigmas)
    mean = float(np.dot(w, mu))
    return float(np.sqrt(np.dot(w, s ** 2 + (mu - mean) ** 2)))

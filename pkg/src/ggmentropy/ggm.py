"""Generalized Gaussian distribution with mean, scale and shape.

Density ``beta / (2 alpha Gamma(1/beta)) * exp(-(|y - mu| / alpha) ** beta)``.
At ``beta = 2`` this is a Gaussian with ``sigma = alpha / sqrt(2)``; at
``beta = 1`` a Laplace distribution with scale ``alpha``.

Parameters may be scalars or numpy arrays (one entry per latent element);
every function broadcasts.
"""

import json
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import DomainError, InputFormatError
from .specfun import inv_reg_lower_incomplete_gamma, log_gamma, reg_gamma_pq

PROB_FLOOR = 2.0 ** -16
LOG2 = np.log(2.0)


@dataclass(frozen=True, eq=False)
class GgmParams:
    mu: Any = 0.0
    alpha: Any = 1.0
    beta: Any = 2.0

    family = "ggm"

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float)
        beta = np.asarray(self.beta, dtype=float)
        if not np.all(np.isfinite(np.asarray(self.mu, dtype=float))):
            raise DomainError("mu must be finite")
        if not np.all(alpha > 0):
            raise DomainError("alpha must be > 0")
        if not np.all((beta >= 0.1 - 1e-12) & (beta <= 4.0 + 1e-12)):
            raise DomainError("beta must lie in [0.1, 4]")

    def pdf(self, y):
        return pdf(y, self)

    def cdf(self, y):
        return cdf(y, self)

    def sf(self, y):
        return sf(y, self)

    def bin_mass(self, centers):
        return bin_mass(centers, self)

    def bin_probability(self, centers):
        return bin_probability(centers, self)

    def to_dict(self):
        return {"family": "ggm", "mu": _jsonable(self.mu), "alpha": _jsonable(self.alpha),
                "beta": _jsonable(self.beta)}

    def to_json(self):
        return json.dumps({k: v for k, v in self.to_dict().items() if k != "family"})

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(mu=_unjson(d["mu"]), alpha=_unjson(d["alpha"]), beta=_unjson(d["beta"]))
        except KeyError as exc:
            raise InputFormatError(f"missing GGM field {exc}") from None

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def __repr__(self):
        return f"GgmParams(mu={self.mu!r}, alpha={self.alpha!r}, beta={self.beta!r})"


def _jsonable(v):
    if np.ndim(v) == 0:
        return float(v)
    return np.asarray(v, dtype=float).tolist()


def _unjson(v):
    return float(v) if np.ndim(v) == 0 else np.asarray(v, dtype=float)


def _ret(x, *inputs):
    if all(np.ndim(i) == 0 for i in inputs):
        return float(x)
    return x


@dataclass(frozen=True)
class ActivationConfig:
    delta: float = 0.11
    beta_min: float = 0.1
    beta_max: float = 4.0
    zeta: float = 0.1

    def __post_init__(self):
        if not (self.delta > 0 and self.beta_min > 0 and self.beta_max > self.beta_min
                and self.zeta >= 0):
            raise ValueError(f"invalid activation config {self}")


DEFAULT_ACTIVATION = ActivationConfig()


def softplus(x):
    x = np.asarray(x, dtype=float)
    return np.logaddexp(0.0, x)


def inverse_softplus(s):
    s = np.asarray(s, dtype=float)
    # log(expm1(s)) without overflow for large s
    return np.where(s > 30, s + np.log1p(-np.exp(-s)), np.log(np.expm1(np.minimum(s, 30))))


def softplus_clamped(raw, cfg=DEFAULT_ACTIVATION):
    """Shape activation: softplus clamped to [beta_min, beta_max]."""
    out = np.clip(softplus(raw), cfg.beta_min, cfg.beta_max)
    return _ret(out, raw)


def huber_like(raw, cfg=DEFAULT_ACTIVATION):
    """Scale activation: quadratic ``raw**2/(2 delta) + delta/2`` inside the
    knee, ``|raw|`` outside.  Never below ``delta / 2``."""
    r = np.asarray(raw, dtype=float)
    d = cfg.delta
    out = np.where(np.abs(r) <= d, r * r / (2.0 * d) + 0.5 * d, np.abs(r))
    return _ret(out, raw)


def dynamic_lower_bound(alpha, beta, cfg=DEFAULT_ACTIVATION):
    """Shape-adaptive scale floor ``max(alpha, zeta * beta)``."""
    out = np.maximum(np.asarray(alpha, dtype=float), cfg.zeta * np.asarray(beta, dtype=float))
    return _ret(out, alpha, beta)


def _abs_pow(t_abs, beta):
    # |t| ** beta as exp(beta ln|t|); t = 0 maps to 0
    with np.errstate(divide="ignore"):
        out = np.exp(beta * np.log(t_abs))
    return np.where(t_abs == 0, 0.0, out)


def _std(y, p):
    y = np.asarray(y, dtype=float)
    mu = np.asarray(p.mu, dtype=float)
    alpha = np.asarray(p.alpha, dtype=float)
    beta = np.asarray(p.beta, dtype=float)
    return (y - mu) / alpha, alpha, beta


def log_pdf(y, p):
    t, alpha, beta = _std(y, p)
    out = (np.log(beta) - LOG2 - np.log(alpha) - log_gamma(1.0 / beta)
           - _abs_pow(np.abs(t), beta))
    return _ret(out, y, p.mu, p.alpha, p.beta)


def pdf(y, p):
    """Density at ``y``, evaluated in log space."""
    return _ret(np.exp(log_pdf(y, p)), y, p.mu, p.alpha, p.beta)


def _half_tail(t_abs, beta):
    """Mass beyond |t| on one side: Q(1/beta, |t|**beta) / 2."""
    a = 1.0 / beta
    b = _abs_pow(t_abs, beta)
    a, b = np.broadcast_arrays(a, b)
    return 0.5 * reg_gamma_pq(np.array(a), np.array(b))[1]


def cdf(y, p):
    """``1/2 + sgn(t)/2 * P(1/beta, |t|**beta)`` with ``t = (y - mu)/alpha``.

    Written through the upper function Q so the lower tail keeps full
    relative precision.
    """
    t, _, beta = _std(y, p)
    tail = _half_tail(np.abs(t), beta)
    out = np.where(t < 0, tail, 1.0 - tail)
    out = np.where(t == 0, 0.5, out)
    return _ret(out, y, p.mu, p.alpha, p.beta)


def sf(y, p):
    """Survival function 1 - cdf, accurate in the upper tail."""
    t, _, beta = _std(y, p)
    tail = _half_tail(np.abs(t), beta)
    out = np.where(t > 0, tail, 1.0 - tail)
    out = np.where(t == 0, 0.5, out)
    return _ret(out, y, p.mu, p.alpha, p.beta)


def bin_mass(centers, p):
    """Unfloored mass of the unit bins ``[c - 1/2, c + 1/2]``.

    Bins wholly above the mean use survival differences, bins wholly below
    use CDF differences, so both tails are computed without cancellation.
    """
    c = np.asarray(centers, dtype=float)
    lo = c - 0.5
    hi = c + 0.5
    mu = np.asarray(p.mu, dtype=float)
    upper = lo >= mu
    lower = hi <= mu
    m_upper = sf(lo, p) - sf(hi, p)
    m_lower = cdf(hi, p) - cdf(lo, p)
    m_mid = 1.0 - cdf(lo, p) - sf(hi, p)
    out = np.where(upper, m_upper, np.where(lower, m_lower, m_mid))
    return _ret(np.maximum(out, 0.0), centers, p.mu, p.alpha, p.beta)


def bin_probability(centers, p, floor=PROB_FLOOR):
    """Bin mass floored at ``floor`` (2**-16 by default) for use in logs."""
    return _ret(np.maximum(bin_mass(centers, p), floor), centers, p.mu, p.alpha, p.beta)


def rate_bits(symbols, p):
    """Ideal code length in bits of zero-center symbols ``round(y - mu)``.

    Symbol ``k`` of element ``i`` occupies the bin centred on ``mu_i + k``.
    """
    s = np.asarray(symbols)
    if s.size == 0:
        return 0.0
    for v in (p.mu, p.alpha, p.beta):
        if np.ndim(v) and np.shape(v) != s.shape:
            raise ValueError(f"parameter shape {np.shape(v)} does not match symbols {s.shape}")
    centers = s.astype(float) + np.asarray(p.mu, dtype=float)
    return float(-np.sum(np.log2(bin_probability(centers, p))))


def entropy_bits(p, support=None):
    """Discrete entropy of zero-center symbols under a scalar GGM, by direct
    summation over the support (default: every bin carrying mass)."""
    if support is None:
        half = int(np.ceil(60.0 * float(p.alpha))) + 2
        support = np.arange(-half, half + 1)
    m = bin_mass(np.asarray(support, dtype=float) + float(p.mu), p)
    m = m[m > 0]
    return float(-np.sum(m * np.log2(m)))


def variance(p):
    """alpha**2 Gamma(3/beta) / Gamma(1/beta)."""
    beta = np.asarray(p.beta, dtype=float)
    return _ret(np.asarray(p.alpha, dtype=float) ** 2
                * np.exp(log_gamma(3.0 / beta) - log_gamma(1.0 / beta)), p.alpha, p.beta)


def round_half_away(x):
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quantize_zero_center(y, mu):
    """Zero-center quantization: ``symbol = round(y - mu)`` with ties away from
    zero, ``reconstructed = symbol + mu``."""
    sym = round_half_away(np.asarray(y, dtype=float) - np.asarray(mu, dtype=float))
    rec = sym + np.asarray(mu, dtype=float)
    if np.ndim(y) == 0 and np.ndim(mu) == 0:
        return int(sym), float(rec)
    return sym.astype(np.int64), rec


def sample(p, n, seed):
    """Inverse-CDF sampling; deterministic for a fixed seed."""
    if n < 0:
        raise ValueError("n must be >= 0")
    rng = np.random.default_rng(seed)
    u = rng.random(n)
    return sample_from_uniform(p, u)


def sample_from_uniform(p, u):
    """Map uniforms in [0, 1) to GGM variates through the inverse CDF."""
    u = np.asarray(u, dtype=float)
    beta = np.broadcast_to(np.asarray(p.beta, dtype=float), u.shape)
    q = np.abs(2.0 * u - 1.0)
    x = inv_reg_lower_incomplete_gamma(1.0 / beta, q)
    with np.errstate(divide="ignore"):
        mag = np.where(x > 0, np.exp(np.log(np.where(x > 0, x, 1.0)) / beta), 0.0)
    return np.asarray(p.mu, dtype=float) + np.sign(u - 0.5) * np.asarray(p.alpha, dtype=float) * mag

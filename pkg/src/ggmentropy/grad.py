"""Gradients of the GGM CDF.

The y, mu and alpha derivatives are analytic.  The shape derivative needs
d/da of the regularized lower incomplete gamma P(a, b), which has no closed
form in a; it is taken by a central difference on the unnormalized
gamma(a, b) and then combined with the quotient rule and the digamma
function.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .ggm import _abs_pow, _ret, _std, pdf
from .specfun import digamma, log_gamma, reg_lower_incomplete_gamma


@dataclass(frozen=True)
class FdConfig:
    epsilon_fd: float = 1e-5
    eps_abs_floor: float = 1e-12

    def __post_init__(self):
        if not 0 < self.epsilon_fd < 1e-2:
            raise ValueError("epsilon_fd must lie in (0, 1e-2)")
        if not self.eps_abs_floor > 0:
            raise ValueError("eps_abs_floor must be positive")


DEFAULT_FD = FdConfig()


@dataclass(frozen=True)
class CdfGradients:
    d_y: object
    d_beta: object
    d_alpha: object
    d_mu: object


def dcdf_dy(y, p):
    """d cdf / dy, i.e. the density (including the 1/alpha factor)."""
    return pdf(y, p)


def dP_db(a, b):
    """b**(a-1) exp(-b) / Gamma(a), evaluated in log space."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.exp((a - 1.0) * np.log(b) - b - log_gamma(a))
    return _ret(out, a, b)


def dgamma_da_fd(a, b, cfg=DEFAULT_FD):
    """(gamma(a+e, b) - gamma(a-e, b)) / (2e) with gamma = P * exp(lgamma)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    eps = cfg.epsilon_fd
    if not np.all(a > eps):
        raise DomainError("a must exceed the finite-difference step")
    v_plus = reg_lower_incomplete_gamma(a + eps, b) * np.exp(log_gamma(a + eps))
    v_minus = reg_lower_incomplete_gamma(a - eps, b) * np.exp(log_gamma(a - eps))
    return _ret((v_plus - v_minus) / (2.0 * eps), a, b)


def dP_da(a, b, cfg=DEFAULT_FD):
    """Quotient rule: dgamma/da / Gamma(a) - P(a, b) psi(a)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = (dgamma_da_fd(a, b, cfg) / np.exp(log_gamma(a))
           - reg_lower_incomplete_gamma(a, b) * digamma(a))
    return _ret(out, a, b)


def dcdf_dbeta(y, p, cfg=DEFAULT_FD):
    """Shape derivative at fixed standardized t = (y - mu)/alpha.

    ``sgn(t)/2 * (dP/da * (-1/beta**2) + dP/db * |t|**beta * ln|t|)``.
    Points with |t| below ``eps_abs_floor`` get 0, the limit of the
    expression as t -> 0.
    """
    t, _, beta = _std(y, p)
    t, beta = np.broadcast_arrays(t, beta)
    t_abs = np.abs(t)
    x_abs = np.maximum(t_abs, cfg.eps_abs_floor)
    a = 1.0 / beta
    b = _abs_pow(x_abs, beta)
    dpa = dP_da(a, b, cfg)
    dpb = dP_db(a, b)
    out = 0.5 * np.sign(t) * (dpa * (-1.0 / beta ** 2) + dpb * b * np.log(x_abs))
    out = np.where(t_abs < cfg.eps_abs_floor, 0.0, out)
    return _ret(out, y, p.mu, p.alpha, p.beta)


def standardized_pdf(t, beta):
    beta = np.asarray(beta, dtype=float)
    return np.exp(np.log(beta) - np.log(2.0) - log_gamma(1.0 / beta)
                  - _abs_pow(np.abs(np.asarray(t, dtype=float)), beta))


def dcdf_dalpha_dmu(y, p):
    """Chain rule through t = (y - mu)/alpha.

    Returns ``(f_std(t) * (-t/alpha), -f_std(t)/alpha)``.
    """
    t, alpha, beta = _std(y, p)
    f = standardized_pdf(t, beta)
    d_alpha = f * (-t / alpha)
    d_mu = -f / alpha
    return (_ret(d_alpha, y, p.mu, p.alpha, p.beta), _ret(d_mu, y, p.mu, p.alpha, p.beta))


def cdf_gradients(y, p, cfg=DEFAULT_FD):
    d_alpha, d_mu = dcdf_dalpha_dmu(y, p)
    return CdfGradients(d_y=dcdf_dy(y, p), d_beta=dcdf_dbeta(y, p, cfg),
                        d_alpha=d_alpha, d_mu=d_mu)

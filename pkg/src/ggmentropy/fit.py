"""Maximum-likelihood fitting of entropy models to samples, and KL scoring.

The GGM is fitted on raw (unconstrained) parameters pushed through the same
activations a network head would use: clamped softplus for the shape,
the Huber-like map plus the dynamic lower bound for the scale.  Descent is
plain gradient descent with backtracking; a step is accepted only if the
objective does not go up.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import ggm as G
from .errors import DomainError
from .ggm import DEFAULT_ACTIVATION, ActivationConfig, GgmParams
from .grad import DEFAULT_FD, FdConfig, dcdf_dalpha_dmu, dcdf_dbeta
from .models import Gaussian, Gmm, Laplace, Logistic
from .specfun import digamma, log_gamma

LN2 = math.log(2.0)
MU_MODES = ("median", "mean", "gradient")
OBJECTIVES = ("continuous", "discrete")


@dataclass(frozen=True)
class FitConfig:
    max_steps: int = 2000
    learning_rate: float = 1e-2
    tol_rel_nll: float = 1e-9
    mu_mode: str = "median"
    seed: int = 0
    objective: str = "continuous"
    gmm_k: int = 3
    activation: ActivationConfig = DEFAULT_ACTIVATION
    fd: FdConfig = DEFAULT_FD

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.mu_mode not in MU_MODES:
            raise ValueError(f"mu_mode must be one of {MU_MODES}")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}")
        if self.gmm_k < 1:
            raise ValueError("gmm_k must be >= 1")


@dataclass
class FitResult:
    model: object
    nll: float  # bits per sample
    steps: int = 0
    converged: bool = True
    history: list = field(default_factory=list)  # accepted objective values, nats/sample


@dataclass(frozen=True, eq=False)
class Histogram:
    bin_edges: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.bin_edges, dtype=float)
        c = np.asarray(self.counts)
        if e.ndim != 1 or e.size < 2 or np.any(np.diff(e) <= 0):
            raise ValueError("bin edges must be strictly increasing")
        if c.shape != (e.size - 1,) or np.any(c < 0):
            raise ValueError("need one nonnegative count per bin")
        object.__setattr__(self, "bin_edges", e)
        object.__setattr__(self, "counts", c)


def make_histogram(samples, bins=201, coverage=0.9999):
    """Equal-width histogram over the central ``coverage`` quantile range."""
    y = np.asarray(samples, dtype=float)
    tail = (1.0 - coverage) / 2.0
    lo, hi = np.quantile(y, [tail, 1.0 - tail])
    if not hi > lo:
        lo, hi = lo - 0.5, hi + 0.5
    counts, edges = np.histogram(y, bins=bins, range=(lo, hi))
    return Histogram(edges, counts)


def interval_mass(m, lo, hi):
    """Model mass on [lo, hi], using survival differences right of center."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    center = float(m.mu)
    right = m.sf(lo) - m.sf(hi)
    left = m.cdf(hi) - m.cdf(lo)
    return np.maximum(np.where(lo >= center, right, left), 0.0)


def kl_divergence(h, m, q_floor=1e-12):
    """KL(empirical || model) in bits over the histogram bins; empty bins
    are skipped and model masses floored at ``q_floor``."""
    counts = np.asarray(h.counts, dtype=float)
    total = counts.sum()
    if not total > 0:
        raise ValueError("histogram is empty")
    p_hat = counts / total
    q = np.maximum(interval_mass(m, h.bin_edges[:-1], h.bin_edges[1:]), q_floor)
    nz = p_hat > 0
    return float(np.sum(p_hat[nz] * np.log2(p_hat[nz] / q[nz])))


def _shape_ratio(beta):
    # Gamma(2/b)^2 / (Gamma(1/b) Gamma(3/b)), increasing in b
    return math.exp(2 * log_gamma(2 / beta) - log_gamma(1 / beta) - log_gamma(3 / beta))


def moment_init(samples, cfg=DEFAULT_ACTIVATION):
    """Ratio-of-moments starting point for the GGM.

    Matches (E|y - mu|)^2 / E[(y - mu)^2] with mu the median; the shape is
    found by bisection on [beta_min, beta_max] and clamped there.
    """
    y = np.asarray(samples, dtype=float).ravel()
    if y.size < 30:
        raise DomainError("moment_init needs at least 30 samples")
    mu = float(np.median(y))
    d = np.abs(y - mu)
    m1 = float(d.mean())
    m2 = float((d * d).mean())
    if not m1 > 0 or not m2 > 0:
        raise DomainError("samples have zero spread")
    target = m1 * m1 / m2
    lo, hi = cfg.beta_min, cfg.beta_max
    if target <= _shape_ratio(lo):
        beta = lo
    elif target >= _shape_ratio(hi):
        beta = hi
    else:
        for _ in range(100):
            mid = math.sqrt(lo * hi)
            if _shape_ratio(mid) < target:
                lo = mid
            else:
                hi = mid
        beta = math.sqrt(lo * hi)
    alpha = m1 * math.exp(log_gamma(1 / beta) - log_gamma(2 / beta))
    return GgmParams(mu, alpha, beta)


def _mu_for(y, mode):
    return float(np.mean(y)) if mode == "mean" else float(np.median(y))


def _descend(theta, objective, gradient, cfg, patience=5):
    """Backtracking gradient descent.  Returns (theta, value, steps,
    converged, history).

    Converged means ``patience`` consecutive accepted steps each improved
    the objective by less than ``tol_rel_nll`` relative, or no step along
    the negative gradient decreases it any more.
    """
    theta = np.asarray(theta, dtype=float)
    value = objective(theta)
    history = [value]
    lr = cfg.learning_rate
    quiet = 0
    for step in range(1, cfg.max_steps + 1):
        g = gradient(theta)
        if not np.all(np.isfinite(g)) or not np.any(g):
            return theta, value, step, True, history
        accepted = False
        for _ in range(60):
            cand = theta - lr * g
            v = objective(cand)
            if np.isfinite(v) and v <= value:
                accepted = True
                break
            lr *= 0.5
        if not accepted:
            return theta, value, step, True, history
        improvement = value - v
        theta, value = cand, v
        history.append(value)
        lr *= 2.0
        quiet = quiet + 1 if improvement <= cfg.tol_rel_nll * max(abs(value), 1e-12) else 0
        if quiet >= patience:
            return theta, value, step, True, history
    return theta, value, cfg.max_steps, False, history


# -- GGM -------------------------------------------------------------------

def _inverse_huber(alpha, cfg):
    d = cfg.delta
    if alpha >= d:
        return alpha
    return math.sqrt(max(2.0 * d * (alpha - 0.5 * d), 0.0))


def _activate(raw, cfg):
    """raw = (r_mu, r_alpha, r_beta) -> (mu, alpha, beta, dalpha/dr_alpha,
    dbeta/dr_beta, bound_active)."""
    r_mu, r_alpha, r_beta = raw
    sp = float(G.softplus(r_beta))
    beta = min(max(sp, cfg.beta_min), cfg.beta_max)
    dbeta = 1.0 / (1.0 + math.exp(-r_beta)) if cfg.beta_min <= sp <= cfg.beta_max else 0.0
    alpha_h = float(G.huber_like(r_alpha, cfg))
    dalpha = r_alpha / cfg.delta if abs(r_alpha) <= cfg.delta else math.copysign(1.0, r_alpha)
    floor = cfg.zeta * beta
    bound = alpha_h < floor
    return r_mu, max(alpha_h, floor), beta, dalpha, dbeta, bound


def _raw_from(p, cfg):
    beta = min(max(float(p.beta), cfg.beta_min), cfg.beta_max)
    alpha = max(float(p.alpha), cfg.zeta * beta, 0.5 * cfg.delta)
    return np.array([float(p.mu), _inverse_huber(alpha, cfg), float(G.inverse_softplus(beta))])


def _ggm_continuous(y, mu_free, cfg):
    """Mean negative log-density (nats) and its gradient in (mu, alpha, beta)."""

    def value(mu, alpha, beta):
        t = np.abs(y - mu) / alpha
        return (LN2 + math.log(alpha) + float(log_gamma(1 / beta)) - math.log(beta)
                + float(np.mean(G._abs_pow(t, beta))))

    def grads(mu, alpha, beta):
        diff = y - mu
        t = np.abs(diff) / alpha
        tb = G._abs_pow(t, beta)
        with np.errstate(divide="ignore", invalid="ignore"):
            tlog = np.where(t > 0, tb * np.log(np.where(t > 0, t, 1.0)), 0.0)
            tbm1 = np.where(t > 0, tb / np.where(t > 0, t, 1.0), 0.0)
        d_alpha = 1.0 / alpha - beta * float(tb.mean()) / alpha
        d_beta = -float(digamma(1 / beta)) / beta ** 2 - 1.0 / beta + float(tlog.mean())
        d_mu = -(beta / alpha) * float(np.mean(tbm1 * np.sign(diff))) if mu_free else 0.0
        return d_mu, d_alpha, d_beta

    return value, grads


def _ggm_discrete(y, mu, fd):
    """Mean code length (nats) of zero-center symbols; gradients through the
    CDF derivatives of the grad module."""
    sym = G.round_half_away(y - mu)
    ks, counts = np.unique(sym, return_counts=True)
    w = counts / counts.sum()

    def value(_mu, alpha, beta):
        p = GgmParams(mu, alpha, beta)
        return float(-np.sum(w * np.log(G.bin_probability(ks + mu, p))))

    def grads(_mu, alpha, beta):
        p = GgmParams(mu, alpha, beta)
        hi = ks + mu + 0.5
        lo = ks + mu - 0.5
        mass = G.bin_mass(ks + mu, p)
        live = mass > G.PROB_FLOOR
        da_hi, _ = dcdf_dalpha_dmu(hi, p)
        da_lo, _ = dcdf_dalpha_dmu(lo, p)
        db = dcdf_dbeta(hi, p, fd) - dcdf_dbeta(lo, p, fd)
        da = da_hi - da_lo
        safe = np.where(live, mass, 1.0)
        d_alpha = float(-np.sum(np.where(live, w * da / safe, 0.0)))
        d_beta = float(-np.sum(np.where(live, w * db / safe, 0.0)))
        return 0.0, d_alpha, d_beta

    return value, grads


def _fit_ggm(y, cfg):
    act = cfg.activation
    discrete = cfg.objective == "discrete"
    mu_free = cfg.mu_mode == "gradient" and not discrete
    mu_fixed = _mu_for(y, cfg.mu_mode)
    if discrete:
        value, grads = _ggm_discrete(y, mu_fixed, cfg.fd)
    else:
        value, grads = _ggm_continuous(y, mu_free, cfg)

    def unpack(raw):
        mu, alpha, beta, dalpha, dbeta, bound = _activate(raw, act)
        if not mu_free:
            mu = mu_fixed
        return mu, alpha, beta, dalpha, dbeta, bound

    def objective(raw):
        mu, alpha, beta, *_ = unpack(raw)
        return value(mu, alpha, beta)

    def gradient(raw):
        mu, alpha, beta, dalpha, dbeta, bound = unpack(raw)
        g_mu, g_alpha, g_beta = grads(mu, alpha, beta)
        if bound:
            # alpha sits on zeta * beta and moves with beta
            return np.array([g_mu, 0.0, (g_beta + act.zeta * g_alpha) * dbeta])
        return np.array([g_mu, g_alpha * dalpha, g_beta * dbeta])

    # Start from the best of the moment estimate and the Gaussian and
    # Laplace optima, both of which are GGM members.
    mu_g = float(np.mean(y)) if cfg.mu_mode in ("mean", "gradient") else mu_fixed
    mu_l = float(np.median(y)) if cfg.mu_mode in ("median", "gradient") else mu_fixed
    sigma = math.sqrt(float(np.mean((y - mu_g) ** 2)))
    b = float(np.mean(np.abs(y - mu_l)))
    starts = [moment_init(y, act), GgmParams(mu_g, sigma * math.sqrt(2.0), 2.0),
              GgmParams(mu_l, b, 1.0)]
    raws = [_raw_from(s, act) for s in starts]
    if not mu_free:
        for r in raws:
            r[0] = mu_fixed
    raw0 = min(raws, key=objective)
    raw, val, steps, conv, hist = _descend(raw0, objective, gradient, cfg)
    mu, alpha, beta, *_ = unpack(raw)
    return GgmParams(float(mu), float(alpha), float(beta)), val, steps, conv, hist


# -- baselines -------------------------------------------------------------

def _gaussian_nll(y, mu, sigma):
    return 0.5 * math.log(2 * math.pi) + math.log(sigma) + float(np.mean((y - mu) ** 2)) / (2 * sigma ** 2)


def _fit_gaussian(y, cfg):
    mu = float(np.mean(y)) if cfg.mu_mode in ("mean", "gradient") else _mu_for(y, cfg.mu_mode)
    sigma = math.sqrt(float(np.mean((y - mu) ** 2)))
    if not sigma > 0:
        raise DomainError("samples have zero spread")
    return Gaussian(mu, sigma), _gaussian_nll(y, mu, sigma), 0, True, []


def _fit_laplace(y, cfg):
    mu = float(np.median(y)) if cfg.mu_mode in ("median", "gradient") else _mu_for(y, cfg.mu_mode)
    b = float(np.mean(np.abs(y - mu)))
    if not b > 0:
        raise DomainError("samples have zero spread")
    return Laplace(mu, b), LN2 + math.log(b) + 1.0, 0, True, []


def _fit_logistic(y, cfg):
    mu_free = cfg.mu_mode == "gradient"
    mu0 = _mu_for(y, cfg.mu_mode)
    s0 = math.sqrt(float(np.mean((y - mu0) ** 2))) * math.sqrt(3.0) / math.pi
    if not s0 > 0:
        raise DomainError("samples have zero spread")

    def objective(th):
        mu, s = th[0], math.exp(th[1])
        z = np.abs(y - mu) / s
        return math.log(s) + float(np.mean(z + 2.0 * np.log1p(np.exp(-z))))

    def gradient(th):
        mu, s = th[0], math.exp(th[1])
        z = (y - mu) / s
        th_ = np.tanh(0.5 * z)
        g_mu = -float(np.mean(th_)) / s if mu_free else 0.0
        g_logs = 1.0 - float(np.mean(th_ * z))
        return np.array([g_mu, g_logs])

    th, val, steps, conv, hist = _descend(np.array([mu0, math.log(s0)]), objective, gradient, cfg)
    return Logistic(float(th[0]), math.exp(th[1])), val, steps, conv, hist


def _fit_gmm(y, cfg):
    k = cfg.gmm_k
    rng = np.random.default_rng(cfg.seed)
    center = float(np.median(y))
    spread = math.sqrt(float(np.mean((y - center) ** 2)))
    if not spread > 0:
        raise DomainError("samples have zero spread")
    # nested scales around the median, lightly jittered by the seed
    scales = spread * np.geomspace(0.1, 2.0, k) if k > 1 else np.array([spread])
    means = center + 0.01 * spread * rng.standard_normal(k)
    theta0 = np.concatenate([np.zeros(k), means, np.log(scales)])

    def split(th):
        logits, m, logs = th[:k], th[k:2 * k], th[2 * k:]
        w = np.exp(logits - logits.max())
        return w / w.sum(), m, np.exp(logs)

    # component-major (K, n) layout keeps every reduction contiguous
    def log_joint(th):
        w, m, s = split(th)
        z = (y[None, :] - m[:, None]) / s[:, None]
        lj = -0.5 * z * z
        lj += (np.log(np.maximum(w, 1e-300)) - np.log(s) - 0.5 * math.log(2 * math.pi))[:, None]
        return lj, z

    def logsumexp(lj):
        mx = np.max(lj, axis=0)
        acc = np.zeros_like(mx)
        for row in lj:
            acc += np.exp(row - mx)
        return mx + np.log(acc), mx

    def objective(th):
        return -float(np.mean(logsumexp(log_joint(th)[0])[0]))

    def gradient(th):
        w, m, s = split(th)
        lj, z = log_joint(th)
        r = np.exp(lj - logsumexp(lj)[0][None, :])
        share = np.maximum(r.mean(axis=1), 1e-12)
        g_logits = -(share - w)
        g_m = -np.mean(r * z, axis=1) / s
        g_logs = -np.mean(r * (z * z - 1.0), axis=1)
        # diagonal preconditioning with the EM step sizes; still a descent
        # direction, and far better conditioned than the raw gradient
        return np.concatenate([g_logits / share, g_m * s * s / share, 0.5 * g_logs / share])

    th, val, steps, conv, hist = _descend(theta0, objective, gradient, cfg)
    w, m, s = split(th)
    w = w / w.sum()
    return Gmm(w, m, s), val, steps, conv, hist


def _discrete_baseline(y, fitter, cfg):
    """Baselines under the discrete objective: the continuous fit, then a
    descent on code length with finite-difference gradients."""
    model, _, _, _, _ = fitter(y, FitConfig(**{**cfg.__dict__, "objective": "continuous"}))
    mu = _mu_for(y, cfg.mu_mode)
    sym = G.round_half_away(y - mu)
    ks, counts = np.unique(sym, return_counts=True)
    wts = counts / counts.sum()
    d = model.to_dict()
    scale_key = {"gaussian": "sigma", "laplace": "b", "logistic": "s"}[model.family]
    cls = type(model)

    def build(th):
        return cls(mu, math.exp(th[0]))

    def objective(th):
        return float(-np.sum(wts * np.log(build(th).bin_probability(ks + mu))))

    def gradient(th):
        h = 1e-6
        return np.array([(objective(th + h) - objective(th - h)) / (2 * h)])

    th, val, steps, conv, hist = _descend(np.array([math.log(d[scale_key])]), objective, gradient, cfg)
    return build(th), val, steps, conv, hist


_FITTERS = {
    "ggm": _fit_ggm,
    "gaussian": _fit_gaussian,
    "laplace": _fit_laplace,
    "logistic": _fit_logistic,
    "gmm": _fit_gmm,
}


def fit_mle(samples, family="ggm", cfg=None):
    """Fit one family by maximum likelihood; NLL is reported in bits/sample.

    Non-convergence within ``max_steps`` is not an error: the best
    parameters so far come back with ``converged=False``.
    """
    cfg = cfg or FitConfig()
    y = np.asarray(samples, dtype=float).ravel()
    if y.size < 2 or not np.all(np.isfinite(y)):
        raise DomainError("need at least two finite samples")
    try:
        fitter = _FITTERS[family]
    except KeyError:
        raise ValueError(f"unknown family {family!r}") from None
    if cfg.objective == "discrete" and family in ("gaussian", "laplace", "logistic"):
        model, val, steps, conv, hist = _discrete_baseline(y, fitter, cfg)
    elif cfg.objective == "discrete" and family == "gmm":
        raise ValueError("the discrete objective is not available for the GMM")
    else:
        model, val, steps, conv, hist = fitter(y, cfg)
    return FitResult(model, val / LN2, steps, conv, history=hist)


def nll_bits(samples, m):
    """Mean negative log2-density of ``samples`` under ``m``."""
    y = np.asarray(samples, dtype=float)
    if m.family == "ggm":
        return float(-np.mean(G.log_pdf(y, m)) / LN2)
    with np.errstate(divide="ignore"):
        return float(-np.mean(np.log(m.pdf(y))) / LN2)

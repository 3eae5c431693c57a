"""Gradient-check harness for the GGM CDF derivatives.

Each analytic or finite-difference gradient is compared with one of two
references: a global central difference of the double-precision CDF, or a
high-precision derivative of an mpmath CDF.  Relative error is used where
the reference magnitude is at least ``SMALL``, absolute error elsewhere.
"""

from dataclasses import dataclass

import mpmath as mp
import numpy as np

from .ggm import GgmParams, cdf
from .grad import FdConfig, cdf_gradients, dgamma_da_fd

GRADIENTS = ("y", "beta", "alpha", "mu")
SMALL = 1e-4
REL_TOL = 1e-3
ABS_TOL = 1e-7
CENTRAL_STEP = 1e-4


@dataclass(frozen=True, eq=False)
class GradTuples:
    y: np.ndarray
    mu: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    def __len__(self):
        return self.y.size


def random_tuples(n=200, seed=7):
    """beta ~ U(0.15, 3.9), alpha ~ U(0.11, 5), mu ~ U(-2, 2), y within 3 scales of mu."""
    rng = np.random.default_rng(seed)
    beta = rng.uniform(0.15, 3.9, n)
    alpha = rng.uniform(0.11, 5.0, n)
    mu = rng.uniform(-2.0, 2.0, n)
    y = mu + alpha * rng.uniform(-3.0, 3.0, n)
    return GradTuples(y, mu, alpha, beta)


def analytic(tuples, eps_fd=1e-5):
    g = cdf_gradients(tuples.y, GgmParams(tuples.mu, tuples.alpha, tuples.beta),
                      FdConfig(epsilon_fd=eps_fd))
    return {"y": g.d_y, "beta": g.d_beta, "alpha": g.d_alpha, "mu": g.d_mu}


def central_reference(tuples, h=CENTRAL_STEP):
    """(cdf(x + h) - cdf(x - h)) / (2h) in each argument separately."""
    base = {"y": tuples.y, "mu": tuples.mu, "alpha": tuples.alpha, "beta": tuples.beta}
    out = {}
    for name in GRADIENTS:
        vals = []
        for sign in (1.0, -1.0):
            args = dict(base)
            args[name] = base[name] + sign * h
            vals.append(cdf(args["y"], GgmParams(args["mu"], args["alpha"], args["beta"])))
        out[name] = (vals[0] - vals[1]) / (2.0 * h)
    return out


def _cdf_mp(y, mu, alpha, beta):
    t = (y - mu) / alpha
    if t == 0:
        return mp.mpf("0.5")
    p = mp.gammainc(1 / beta, 0, abs(t) ** beta, regularized=True)
    return mp.mpf("0.5") + mp.sign(t) * p / 2


def mpmath_reference(tuples, dps=30):
    """Derivatives of an mpmath CDF evaluated at ``dps`` digits."""
    out = {name: np.empty(len(tuples)) for name in GRADIENTS}
    with mp.workdps(dps):
        for i in range(len(tuples)):
            args = {"y": mp.mpf(float(tuples.y[i])), "mu": mp.mpf(float(tuples.mu[i])),
                    "alpha": mp.mpf(float(tuples.alpha[i])),
                    "beta": mp.mpf(float(tuples.beta[i]))}
            for name in GRADIENTS:
                def f(x, name=name):
                    a = dict(args)
                    a[name] = x
                    return _cdf_mp(a["y"], a["mu"], a["alpha"], a["beta"])
                out[name][i] = float(mp.diff(f, args[name]))
    return out


def errors(value, ref):
    """Per-tuple error: relative where |ref| >= SMALL, absolute elsewhere,
    plus the mask of relative entries."""
    value = np.asarray(value, dtype=float)
    ref = np.asarray(ref, dtype=float)
    rel = np.abs(ref) >= SMALL
    err = np.abs(value - ref) / np.where(rel, np.abs(ref), 1.0)
    return err, rel


def passes(value, ref):
    err, rel = errors(value, ref)
    return bool(np.all(np.where(rel, err <= REL_TOL, err <= ABS_TOL)))


def summarize(value, ref):
    """(max relative error, max absolute error on small references)."""
    err, rel = errors(value, ref)
    max_rel = float(err[rel].max()) if rel.any() else 0.0
    max_abs = float(err[~rel].max()) if (~rel).any() else 0.0
    return max_rel, max_abs


def run(n=200, seed=7, eps_list=(1e-3, 1e-5, 1e-7), reference="central"):
    """Rows (eps_fd, gradient, reference, max_rel_err, max_abs_err_small, passed)."""
    tuples = random_tuples(n, seed)
    if reference == "central":
        ref = central_reference(tuples)
    elif reference == "mpmath":
        ref = mpmath_reference(tuples)
    else:
        raise ValueError("reference must be 'central' or 'mpmath'")
    rows = []
    for eps in eps_list:
        got = analytic(tuples, eps)
        for name in GRADIENTS:
            max_rel, max_abs = summarize(got[name], ref[name])
            rows.append({"eps_fd": float(eps), "gradient": name, "reference": reference,
                         "max_rel_err": max_rel, "max_abs_err_small": max_abs,
                         "passed": passes(got[name], ref[name])})
    return rows


ORDER_A = (0.25, 0.5, 1.0, 2.5, 10.0)
ORDER_B = (0.05, 0.5, 2.0, 30.0)


def dgamma_da_reference(a, b, dps=40):
    """d/da of the unnormalized lower incomplete gamma at high precision."""
    with mp.workdps(dps):
        return float(mp.diff(lambda x: mp.gammainc(x, 0, mp.mpf(b)), mp.mpf(a)))


def order_check(a_values=ORDER_A, b_values=ORDER_B, eps_list=(1e-3, 1e-4)):
    """Rows (a, b, eps_fd, err, err_half, ratio) with ratio = err(eps)/err(eps/2).

    A second-order difference gives ratios near 4, a first-order one near 2.
    """
    rows = []
    for a in a_values:
        for b in b_values:
            ref = dgamma_da_reference(a, b)
            for eps in eps_list:
                err = abs(dgamma_da_fd(a, b, FdConfig(epsilon_fd=eps)) - ref)
                err_half = abs(dgamma_da_fd(a, b, FdConfig(epsilon_fd=eps / 2)) - ref)
                rows.append({"a": a, "b": b, "eps_fd": eps, "err": err, "err_half": err_half,
                             "ratio": err / err_half if err_half > 0 else float("inf")})
    return rows

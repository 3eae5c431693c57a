"""Synthetic ROI latents, weighted distortion, rate-distortion objective,
train/test rate mismatch and BD-rate.

ROI latents are a two-population GGM mixture: a wide, heavy-tailed ROI
population and a narrow, near-Gaussian background.  Pooled, they give the
sharp peak plus heavy tails typical of learned-codec latents.
"""

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import ggm as G
from .errors import DomainError, InputFormatError
from .ggm import DEFAULT_ACTIVATION, GgmParams

ROI_FRACTION_BAND = (0.08, 0.8)
FIXED_ALPHA_FLOOR = 0.11
BOUND_MODES = ("none", "fixed", "dynamic")
MISMATCH_BLOCK = 4096


@dataclass(frozen=True)
class RoiLatentConfig:
    n: int = 100_000
    roi_fraction: float = 0.25
    roi_params: GgmParams = field(default_factory=lambda: GgmParams(0.0, 2.0, 1.0))
    bg_params: GgmParams = field(default_factory=lambda: GgmParams(0.0, 0.15, 2.0))
    seed: int = 0

    def __post_init__(self):
        lo, hi = ROI_FRACTION_BAND
        # 0 is accepted as the degenerate "background only" case
        if not (self.roi_fraction == 0 or lo <= self.roi_fraction <= hi):
            raise DomainError(f"roi_fraction must be 0 or lie in [{lo}, {hi}]")
        if self.n < 1:
            raise DomainError("n must be >= 1")
        for p in (self.roi_params, self.bg_params):
            if np.ndim(p.mu) or np.ndim(p.alpha) or np.ndim(p.beta):
                raise DomainError("population parameters must be scalars")


@dataclass(frozen=True, eq=False)
class LatentSet:
    values: np.ndarray  # float32-representable values, held as float64
    mask: np.ndarray  # uint8, 1 = ROI
    roi_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float32).astype(np.float64)
        m = np.asarray(self.mask, dtype=np.uint8)
        if v.ndim != 1 or v.shape != m.shape:
            raise InputFormatError("values and mask must be equal-length 1-D arrays")
        if np.any(m > 1):
            raise InputFormatError("mask must be binary")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "mask", m)

    @property
    def n(self):
        return self.values.size


def synth_roi_latents(cfg=RoiLatentConfig()):
    """Draw ROI and background latents and shuffle them with the seed."""
    rng = np.random.default_rng(cfg.seed)
    n_roi = int(G.round_half_away(cfg.roi_fraction * cfg.n))
    u_roi = rng.random(n_roi)
    u_bg = rng.random(cfg.n - n_roi)
    values = np.concatenate([G.sample_from_uniform(cfg.roi_params, u_roi),
                             G.sample_from_uniform(cfg.bg_params, u_bg)])
    mask = np.concatenate([np.ones(n_roi, np.uint8), np.zeros(cfg.n - n_roi, np.uint8)])
    order = rng.permutation(cfg.n)
    return LatentSet(values[order], mask[order], cfg.roi_fraction, cfg.seed)


def excess_kurtosis(x):
    x = np.asarray(x, dtype=float)
    d = x - x.mean()
    m2 = np.mean(d * d)
    return float(np.mean(d ** 4) / (m2 * m2) - 3.0)


def write_latents(path, ls):
    """One JSON header line, then little-endian f32 values, then mask bytes."""
    header = {"n": int(ls.n), "roi_fraction": float(ls.roi_fraction), "seed": int(ls.seed),
              "dtype": "f32le", "mask": "u8"}
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("ascii") + b"\n")
        fh.write(ls.values.astype("<f4").tobytes())
        fh.write(ls.mask.astype(np.uint8).tobytes())


def read_latents(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    nl = raw.find(b"\n")
    if nl < 0:
        raise InputFormatError("latent file has no header line")
    try:
        header = json.loads(raw[:nl].decode("ascii"))
        n = int(header["n"])
        if header.get("dtype") != "f32le" or header.get("mask") != "u8":
            raise InputFormatError("unsupported latent encoding")
        roi_fraction = float(header["roi_fraction"])
        seed = int(header["seed"])
    except (ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
        raise InputFormatError(f"bad latent header: {exc}") from None
    body = raw[nl + 1:]
    if n < 0 or len(body) != 5 * n:
        raise InputFormatError(f"latent body is {len(body)} bytes, expected {5 * n}")
    values = np.frombuffer(body[:4 * n], dtype="<f4").astype(np.float64)
    mask = np.frombuffer(body[4 * n:], dtype=np.uint8)
    if not np.all(np.isfinite(values)):
        raise InputFormatError("latent values must be finite")
    return LatentSet(values, mask, roi_fraction, seed)


def _weights(mask, w_roi, w_nonroi):
    return np.where(np.asarray(mask) > 0, float(w_roi), float(w_nonroi))


def weighted_distortion(x, x_hat, mask, w_roi, w_nonroi, beta_prime):
    """Sum of w_i |x_i - x_hat_i| ** beta_prime, with w_i picked by the mask."""
    x = np.asarray(x, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    mask = np.asarray(mask)
    if not x.shape == x_hat.shape == mask.shape:
        raise ValueError(f"shape mismatch: {x.shape}, {x_hat.shape}, {mask.shape}")
    if not beta_prime > 0:
        raise ValueError("beta_prime must be positive")
    err = G._abs_pow(np.abs(x - x_hat), float(beta_prime))
    return float(np.sum(_weights(mask, w_roi, w_nonroi) * err))


def distortion_gradient_weight(e_abs, beta_prime):
    """beta' |e| ** (beta' - 1), the weight the distortion puts on an error.

    At e = 0 the value is 1 for beta' = 1 and 0 for beta' < 1 (where the
    one-sided limit is infinite); the function stays finite everywhere.
    """
    e = np.asarray(e_abs, dtype=float)
    if np.any(e < 0):
        raise ValueError("e_abs must be nonnegative")
    bp = float(beta_prime)
    if bp == 1.0:
        out = np.ones_like(e)
    else:
        out = bp * G._abs_pow(e, bp - 1.0)
    return float(out) if np.ndim(e_abs) == 0 else out


def rdo_objective(x, x_hat, mask, weights, beta_prime, rate_bits, lam):
    """Weighted distortion plus lambda times the rate in bits."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    w_roi, w_nonroi = weights
    return weighted_distortion(x, x_hat, mask, w_roi, w_nonroi, beta_prime) + lam * float(rate_bits)


def _mismatch_block(p, index, size, n_noise, seed):
    """Sums of training and test code lengths over one block of samples."""
    rng = np.random.default_rng([seed, index])
    y = G.sample_from_uniform(p, rng.random(size))
    noise = rng.random((n_noise, size)) - 0.5
    train = -np.log2(G.bin_probability((y[None, :] + noise).ravel(), p))
    sym, _ = G.quantize_zero_center(y, p.mu)
    test = -np.log2(G.bin_probability(sym + float(p.mu), p))
    return float(train.sum()) / n_noise, float(test.sum())


def mismatch_delta_r(p, n_samples=100_000, n_noise=16, seed=0, shards=1):
    """Noise-relaxed training rate vs hard-rounded test rate, bits/sample.

    ``R_train`` averages -log2 of the unit-bin mass centred at y + u over
    ``n_noise`` uniform draws u per sample; ``R_test`` is the code length of
    the zero-center-quantized y.  Samples are generated in fixed blocks
    with their own seeds, so the result does not depend on ``shards``.
    """
    if n_samples < 10_000:
        raise DomainError("n_samples must be >= 1e4")
    if n_noise < 1:
        raise DomainError("n_noise must be >= 1")
    sizes = [min(MISMATCH_BLOCK, n_samples - s) for s in range(0, n_samples, MISMATCH_BLOCK)]
    jobs = list(enumerate(sizes))

    def run(part):
        return [_mismatch_block(p, i, size, n_noise, seed) for i, size in part]

    parts = [jobs[k::shards] for k in range(shards)] if shards > 1 else [jobs]
    if shards > 1:
        with ThreadPoolExecutor(max_workers=shards) as ex:
            results = list(ex.map(run, parts))
    else:
        results = [run(jobs)]
    per_block = {}
    for part, res in zip(parts, results):
        for (i, _), r in zip(part, res):
            per_block[i] = r
    # accumulate in block order for shard-independent rounding
    train = test = 0.0
    for i in range(len(sizes)):
        train += per_block[i][0]
        test += per_block[i][1]
    r_train = train / n_samples
    r_test = test / n_samples
    return r_train, r_test, r_train - r_test


def bounded_alpha(alpha, beta, bound="none", zeta=DEFAULT_ACTIVATION.zeta):
    """Scale after the chosen lower bound: none, fixed 0.11, or max(alpha, zeta beta)."""
    if bound == "none":
        return float(alpha)
    if bound == "fixed":
        return max(float(alpha), FIXED_ALPHA_FLOOR)
    if bound == "dynamic":
        return float(G.dynamic_lower_bound(alpha, beta, G.ActivationConfig(zeta=zeta)))
    raise ValueError(f"bound must be one of {BOUND_MODES}")


def mismatch_sweep(alphas, beta=2.0, mu=0.0, bound="none", zeta=DEFAULT_ACTIVATION.zeta,
                   n_samples=100_000, n_noise=16, seed=0, shards=1):
    """Rows (alpha, alpha_eff, beta, r_train, r_test, delta_r, n_samples, seed)."""
    rows = []
    for alpha in alphas:
        a_eff = bounded_alpha(alpha, beta, bound, zeta)
        r_train, r_test, dr = mismatch_delta_r(GgmParams(mu, a_eff, beta), n_samples, n_noise,
                                               seed, shards)
        rows.append({"alpha": float(alpha), "alpha_eff": a_eff, "beta": float(beta),
                     "r_train": r_train, "r_test": r_test, "delta_r": dr,
                     "n_samples": int(n_samples), "seed": int(seed)})
    return rows


@dataclass(frozen=True)
class RateCurvePoint:
    rate: float
    quality: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("rate must be positive")


def _curve(points):
    pts = list(points)
    if len(pts) < 4:
        raise ValueError("a rate curve needs at least 4 points")
    rate = np.array([p.rate for p in pts], dtype=float)
    quality = np.array([p.quality for p in pts], dtype=float)
    if np.any(np.diff(rate) <= 0):
        raise ValueError("rates must be strictly increasing")
    return rate, quality


def bd_rate(curve_a, curve_b):
    """Average rate change of ``curve_b`` against ``curve_a`` at equal quality, in percent.

    Cubic fits of log-rate against quality, integrated over the shared
    quality range.
    """
    rate_a, q_a = _curve(curve_a)
    rate_b, q_b = _curve(curve_b)
    lo = max(q_a.min(), q_b.min())
    hi = min(q_a.max(), q_b.max())
    if not hi > lo:
        raise ValueError("quality ranges do not overlap")
    int_a = np.polyint(np.polyfit(q_a, np.log(rate_a), 3))
    int_b = np.polyint(np.polyfit(q_b, np.log(rate_b), 3))
    avg = ((np.polyval(int_b, hi) - np.polyval(int_b, lo))
           - (np.polyval(int_a, hi) - np.polyval(int_a, lo))) / (hi - lo)
    return float((math.exp(avg) - 1.0) * 100.0)

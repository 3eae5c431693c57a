"""Command-line front end.

Every command writes its outputs plus ``<out>.manifest.json`` describing
the exact invocation.  Outputs are deterministic for a fixed seed; wall
times are recorded only with ``--timing`` so that reruns stay
byte-identical.

Errors go to stderr as one JSON line ``{"error": kind, "code": n,
"message": ...}``.  Exit codes: 0 ok, 2 flag error, 3 input format error,
4 numeric non-convergence, 5 stream corruption.
"""

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import bench as B
from . import codec as C
from . import ggm as G
from . import gradcheck as GC
from .errors import ConvergenceError, CorruptStreamError, DomainError, InputFormatError
from .fit import FitConfig, fit_mle, kl_divergence, make_histogram
from .ggm import ActivationConfig, GgmParams
from .grad import FdConfig
from .models import FAMILIES, FAMILY_TAGS, from_dict, from_json, model_center, to_json

EXIT_OK, EXIT_FLAGS, EXIT_INPUT, EXIT_CONVERGENCE, EXIT_CORRUPT = 0, 2, 3, 4, 5
DEFAULT_COMPARE = "ggm,gaussian,laplace,logistic"
DEFAULT_MISMATCH_GRID = "0.01,0.02,0.03,0.05,0.08,0.11,0.15,0.2,0.3,0.5,1.0"


class FlagError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise FlagError(message)


def _floats(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _families(text):
    fams = [f.strip() for f in text.split(",") if f.strip()]
    bad = [f for f in fams if f not in FAMILIES]
    if bad or not fams:
        raise argparse.ArgumentTypeError(f"unknown families {bad}; choose from {FAMILIES}")
    return fams


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(row[k]) for k in header])


def _cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(args, inputs, outputs, wall):
    flags = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    manifest = {
        "command": args.command,
        "flags": flags,
        "seed": flags.get("seed"),
        "version": __version__,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "wall_time_s": wall if args.timing else None,
    }
    _write_json(str(args.out) + ".manifest.json", manifest)


def _fit_config(args):
    return FitConfig(max_steps=args.max_steps, learning_rate=args.lr, mu_mode=args.mu_mode,
                     seed=args.seed, objective=args.objective,
                     activation=ActivationConfig(zeta=args.zeta),
                     fd=FdConfig(epsilon_fd=args.eps_fd))


def _fit(values, family, args):
    res = fit_mle(values, family, _fit_config(args))
    if args.strict and not res.converged:
        raise ConvergenceError(f"{family} fit did not converge in {args.max_steps} steps")
    return res


def _coded_bits(values, m):
    """Payload bits of the zero-center-quantized values under model ``m``."""
    sym, _ = G.quantize_zero_center(values, model_center(m))
    table = C.build_table(m, *C.support_for(m))
    return C.encode(sym, table, m.family, m.to_dict()).payload_bits


# -- commands --------------------------------------------------------------

def cmd_synth(args):
    cfg = B.RoiLatentConfig(n=args.n, roi_fraction=args.roi_fraction,
                            roi_params=GgmParams(0.0, args.roi_alpha, args.roi_beta),
                            bg_params=GgmParams(0.0, args.bg_alpha, args.bg_beta), seed=args.seed)
    B.write_latents(args.out, B.synth_roi_latents(cfg))
    return [], [args.out]


def cmd_fit(args):
    ls = B.read_latents(args.inp)
    t0 = time.perf_counter()
    res = _fit(ls.values, args.family, args)
    wall_ms = (time.perf_counter() - t0) * 1e3
    kl = kl_divergence(make_histogram(ls.values, args.bins), res.model)
    params_json = to_json(res.model)
    Path(args.out).write_text(params_json + "\n")
    csv_path = args.csv or str(Path(args.out).with_suffix(".csv"))
    row = {"family": args.family, "params": params_json, "nll_bits": res.nll, "kl_bits": kl,
           "converged": res.converged, "steps": res.steps,
           "wall_ms": wall_ms if args.timing else None}
    _write_csv(csv_path, list(row), [row])
    return [args.inp], [args.out, csv_path]


def cmd_compare(args):
    ls = B.read_latents(args.inp)
    hist = make_histogram(ls.values, args.bins)
    rows = []
    for fam in args.family:
        res = _fit(ls.values, fam, args)
        rows.append({"family": fam, "nll_bits": res.nll,
                     "kl_bits": kl_divergence(hist, res.model),
                     "coded_bits_per_sample": _coded_bits(ls.values, res.model) / ls.n,
                     "converged": res.converged, "params": to_json(res.model)})
    _write_csv(args.out, ["family", "nll_bits", "kl_bits", "coded_bits_per_sample", "converged",
                          "params"], rows)
    return [args.inp], [args.out]


def _encode_model(args, values):
    if args.model:
        try:
            return from_json(Path(args.model).read_text())
        except OSError as exc:
            raise InputFormatError(f"cannot read model: {exc}") from None
    if args.alpha is not None or args.beta is not None:
        if args.alpha is None or args.beta is None:
            raise FlagError("--alpha and --beta must be given together")
        return GgmParams(args.mu, args.alpha, args.beta)
    return _fit(values, args.family, args).model


def cmd_encode(args):
    ls = B.read_latents(args.inp)
    m = _encode_model(args, ls.values)
    center = model_center(m)
    sym, _ = G.quantize_zero_center(ls.values, center)
    if args.s_min is not None or args.s_max is not None:
        s_min = args.s_min if args.s_min is not None else C.DEFAULT_S_MIN
        s_max = args.s_max if args.s_max is not None else C.DEFAULT_S_MAX
    else:
        s_min, s_max = C.support_for(m)
    try:
        bs = C.encode(sym, C.build_table(m, s_min, s_max), m.family, m.to_dict())
    except DomainError as exc:
        raise InputFormatError(f"latents cannot be coded: {exc}") from None
    Path(args.out).write_bytes(bs.to_bytes())
    inputs = [args.inp] + ([args.model] if args.model else [])
    return inputs, [args.out]


def cmd_decode(args):
    try:
        data = Path(args.inp).read_bytes()
    except OSError as exc:
        raise InputFormatError(f"cannot read bitstream: {exc}") from None
    bs = C.Bitstream.from_bytes(data)
    try:
        m = from_dict(bs.params)
    except InputFormatError as exc:
        raise CorruptStreamError(f"bitstream parameter block: {exc}") from None
    if FAMILY_TAGS.get(m.family) != bs.family_tag:
        raise CorruptStreamError("family tag does not match the parameter block")
    sym = C.decode(bs, C.build_table(m, bs.s_min, bs.s_max))
    if sym.size != bs.count:
        raise CorruptStreamError("decoded symbol count mismatch")
    with open(args.out, "w") as fh:
        fh.write("".join(f"{int(s)}\n" for s in sym))
    return [args.inp], [args.out]


def cmd_mismatch(args):
    rows = B.mismatch_sweep(args.grid, beta=args.beta, mu=args.mu, bound=args.bound,
                            zeta=args.zeta, n_samples=args.n, n_noise=args.n_noise,
                            seed=args.seed, shards=args.shards)
    _write_csv(args.out, ["alpha", "alpha_eff", "beta", "r_train", "r_test", "delta_r",
                          "n_samples", "seed"], rows)
    return [], [args.out]


def cmd_gradcheck(args):
    rows = GC.run(n=args.n, seed=args.seed, eps_list=args.eps_fd, reference=args.reference)
    _write_csv(args.out, ["eps_fd", "gradient", "reference", "max_rel_err", "max_abs_err_small",
                          "passed"], rows)
    order_path = str(Path(args.out).with_suffix(".order.csv"))
    _write_csv(order_path, ["a", "b", "eps_fd", "err", "err_half", "ratio"], GC.order_check())
    return [], [args.out, order_path]


def cmd_pdfplot(args):
    if args.points < 2 or not args.y_max > args.y_min:
        raise FlagError("need --points >= 2 and --y-max > --y-min")
    y = np.linspace(args.y_min, args.y_max, args.points)
    rows = []
    for alpha in args.alpha:
        for beta in args.beta:
            p = GgmParams(args.mu, alpha, beta)
            pdf, cdf = G.pdf(y, p), G.cdf(y, p)
            rows.extend({"mu": float(args.mu), "alpha": alpha, "beta": beta, "y": float(yi),
                         "pdf": float(fi), "cdf": float(ci)} for yi, fi, ci in zip(y, pdf, cdf))
    _write_csv(args.out, ["mu", "alpha", "beta", "y", "pdf", "cdf"], rows)
    return [], [args.out]


# -- parser ----------------------------------------------------------------

def _add_common(p, seed=0):
    p.add_argument("--out", required=True, help="output path; the manifest goes to <out>.manifest.json")
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--timing", action="store_true", help="record wall times (breaks byte identity)")


def _add_fit_options(p, family_type=str, family_default="ggm"):
    p.add_argument("--family", type=family_type, default=family_default)
    p.add_argument("--mu-mode", choices=("median", "mean", "gradient"), default="median")
    p.add_argument("--objective", choices=("continuous", "discrete"), default="continuous")
    p.add_argument("--max-steps", type=int, default=2000)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--zeta", type=float, default=0.1)
    p.add_argument("--eps-fd", type=float, default=1e-5)
    p.add_argument("--strict", action="store_true", help="treat non-convergence as an error")


def build_parser():
    parser = _Parser(prog="ggmentropy", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate synthetic ROI latents")
    _add_common(p)
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--roi-fraction", type=float, default=0.25)
    p.add_argument("--roi-alpha", type=float, default=2.0)
    p.add_argument("--roi-beta", type=float, default=1.0)
    p.add_argument("--bg-alpha", type=float, default=0.15)
    p.add_argument("--bg-beta", type=float, default=2.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", help="fit one family to a latent file")
    _add_common(p)
    p.add_argument("--in", dest="inp", required=True)
    _add_fit_options(p, family_type=_one_family)
    p.add_argument("--bins", type=int, default=201)
    p.add_argument("--csv", default=None, help="CSV row path (default: <out> with .csv)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("compare", help="fit several families; NLL, KL and coded bits")
    _add_common(p)
    p.add_argument("--in", dest="inp", required=True)
    _add_fit_options(p, family_type=_families, family_default=_families(DEFAULT_COMPARE))
    p.add_argument("--bins", type=int, default=201)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("encode", help="quantize and range-code a latent file")
    _add_common(p)
    p.add_argument("--in", dest="inp", required=True)
    _add_fit_options(p, family_type=_one_family)
    p.add_argument("--model", default=None, help="model JSON; otherwise --alpha/--beta or a fit")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--s-min", type=int, default=None)
    p.add_argument("--s-max", type=int, default=None)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode a bitstream to symbols, one per line")
    _add_common(p)
    p.add_argument("--in", dest="inp", required=True)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("mismatch", help="train/test rate mismatch over a scale grid")
    _add_common(p)
    p.add_argument("--grid", type=_floats, default=_floats(DEFAULT_MISMATCH_GRID))
    p.add_argument("--beta", type=float, default=2.0)
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--zeta", type=float, default=0.1)
    p.add_argument("--bound", choices=B.BOUND_MODES, default="none")
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--n-noise", type=int, default=16)
    p.add_argument("--shards", type=int, default=1)
    p.set_defaults(func=cmd_mismatch)

    p = sub.add_parser("gradcheck", help="CDF gradient accuracy across finite-difference steps")
    _add_common(p, seed=7)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--eps-fd", type=_floats, default=[1e-3, 1e-5, 1e-7])
    p.add_argument("--reference", choices=("central", "mpmath"), default="central")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("pdfplot", help="pdf and cdf tables over a parameter grid")
    _add_common(p)
    p.add_argument("--alpha", type=_floats, default=[1.0])
    p.add_argument("--beta", type=_floats, default=[0.5, 1.0, 1.5, 2.0, 3.0, 4.0])
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--y-min", type=float, default=-4.0)
    p.add_argument("--y-max", type=float, default=4.0)
    p.add_argument("--points", type=int, default=801)
    p.set_defaults(func=cmd_pdfplot)
    return parser


def _one_family(text):
    if text not in FAMILIES:
        raise argparse.ArgumentTypeError(f"unknown family {text!r}; choose from {FAMILIES}")
    return text


def _fail(kind, code, message):
    print(json.dumps({"error": kind, "code": code, "message": str(message)}), file=sys.stderr)
    return code


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except FlagError as exc:
        return _fail("flags", EXIT_FLAGS, exc)
    t0 = time.perf_counter()
    try:
        inputs, outputs = args.func(args)
    except FlagError as exc:
        return _fail("flags", EXIT_FLAGS, exc)
    except CorruptStreamError as exc:
        return _fail("corrupt", EXIT_CORRUPT, exc)
    except (InputFormatError, FileNotFoundError, IsADirectoryError) as exc:
        return _fail("input", EXIT_INPUT, exc)
    except ConvergenceError as exc:
        return _fail("convergence", EXIT_CONVERGENCE, exc)
    except (DomainError, ValueError) as exc:
        return _fail("flags", EXIT_FLAGS, exc)
    _write_manifest(args, inputs, outputs, round(time.perf_counter() - t0, 6))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

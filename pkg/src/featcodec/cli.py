"""Command-line front end: ``featcodec design|encode|decode|eval ...``.

Errors go to stderr prefixed with ``error:`` and give a nonzero exit status.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import bitstream, ecq, metrics, tensorio
from .errors import FeatcodecError
from .quant import ClipRange, CodebookQuantizer, UniformQuantizer


class CLIError(Exception):
    pass


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise CLIError(f"expected comma-separated numbers, got {text!r}") from None


def _dims(text: str) -> tuple:
    try:
        dims = tuple(int(v) for v in text.lower().replace("x", ",").split(",") if v.strip())
    except ValueError:
        raise CLIError(f"bad --dims {text!r}; use e.g. 52,52,256 or 52x52x256") from None
    if not dims:
        raise CLIError("--dims is empty")
    return dims


def _load(path: str, dims) -> tensorio.FeatureTensor:
    if path.endswith(".f32"):
        if dims is None:
            raise CLIError(f"raw float file {path} needs --dims")
        return tensorio.load_raw_f32(path, _dims(dims))
    return tensorio.load_tensor(path)


def _check_out(args):
    if args.out is None:
        raise CLIError("--out is required")
    if os.path.exists(args.out) and not args.force:
        raise CLIError(f"{args.out} exists; pass --force to overwrite")


def _clip(args, required=True):
    if args.clip_min is None and args.clip_max is None and not required:
        return None
    if args.clip_min is None or args.clip_max is None:
        raise CLIError("both --clip-min and --clip-max are needed")
    return ClipRange(args.clip_min, args.clip_max)


def _emit(text: str, args):
    out = args.out
    if out is None:
        sys.stdout.write(text)
    else:
        _check_out(args)
        with open(out, "w", encoding="utf-8", newline="") as f:
            f.write(text)


def cmd_design(args):
    _check_out(args)
    if "," in args.lam:
        raise CLIError("design takes a single --lambda; use 'eval rate-sweep' for lists")
    lam = _floats(args.lam)[0]
    samples = np.concatenate([_load(p, args.dims).data for p in args.train])
    rng = _clip(args, required=not args.conventional)
    lengths = _floats(args.lengths) if args.lengths else None
    cfg = ecq.DesignConfig(args.bins, lam, rng, lengths)
    if args.conventional:
        res = ecq.design_conventional(samples, cfg)
        if rng is None:
            rng = ClipRange(float(samples.min()), float(samples.max()))
    else:
        res = ecq.design_modified(samples, cfg)
    ecq.save_codebook(args.out, res.codebook, rng)
    print(f"iterations {res.iterations} converged {res.converged} "
          f"cost {res.cost_trace[0]:.6g} -> {res.cost_trace[-1]:.6g}")
    print("levels " + " ".join(f"{v:.6g}" for v in res.codebook.levels))
    print("thresholds " + " ".join(f"{v:.6g}" for v in res.codebook.thresholds))


def cmd_encode(args):
    _check_out(args)
    t = _load(args.tensor, args.dims)
    if args.codebook:
        cb, rng = ecq.load_codebook(args.codebook)
        if args.clip_min is not None or args.clip_max is not None:
            rng = _clip(args)
        q = CodebookQuantizer(cb, rng)
    else:
        if args.inline_codebook:
            raise CLIError("--inline-codebook needs --codebook")
        if args.bins is None:
            raise CLIError("give --bins with --clip-min/--clip-max, or --codebook")
        q = UniformQuantizer(_clip(args), args.bins)
    s = bitstream.encode_tensor(t, q, inline_codebook=args.inline_codebook)
    bitstream.save_stream(s, args.out)
    print(f"elements {t.element_count} bytes {s.size} bits/element {s.bits_per_element:.6f}")


def cmd_decode(args):
    with open(args.stream, "rb") as f:
        data = f.read()
    if args.inspect:
        h = bitstream.read_header(data)
        mode = "uniform" if h.uniform else ("codebook-inline" if h.inline_codebook else "codebook-external")
        print(f"dims {'x'.join(map(str, h.dims))}")
        print(f"elements {h.element_count}")
        print(f"bins {h.n_bins}")
        print(f"clip {h.c_min:.9g} {h.c_max:.9g}")
        print(f"mode {mode}")
        print(f"payload_bytes {h.payload_length}")
        return
    _check_out(args)
    cb = ecq.load_codebook(args.codebook)[0] if args.codebook else None
    t = bitstream.decode_tensor(data, cb)
    tensorio.save_tensor(t, args.out)


def cmd_synth(args):
    _check_out(args)
    if args.dims is None:
        raise CLIError("synth needs --dims")
    spec = tensorio.SyntheticSpec(_dims(args.dims), args.zero_fraction, args.scale, args.seed)
    tensorio.save_tensor(tensorio.generate_synthetic(spec), args.out)


def cmd_histogram(args):
    t = _load(args.tensor, args.dims)
    h = tensorio.histogram(t, args.buckets, _clip(args))
    lines = ["lo,hi,count"]
    for lo, hi, c in zip(h.edges[:-1], h.edges[1:], h.counts):
        lines.append(f"{float(lo)!r},{float(hi)!r},{int(c)}")
    lines.append(f"underflow,,{h.underflow}")
    lines.append(f"overflow,,{h.overflow}")
    _emit("\n".join(lines) + "\n", args)


def cmd_clip_sweep(args):
    t = _load(args.tensor, args.dims)
    rows = metrics.clip_sweep(t, args.bins, _floats(args.grid), args.clip_min)
    _emit("c_max,msqe\n" + "".join(f"{float(c)!r},{float(m)!r}\n" for c, m in rows), args)


def cmd_rate_sweep(args):
    samples = np.concatenate([_load(p, args.dims).data for p in args.train])
    t = _load(args.eval, args.dims)
    template = ecq.DesignConfig(args.bins, 0.0, _clip(args))
    points = metrics.rate_sweep(samples, t, template, _floats(args.lam))
    _emit(metrics.rate_points_csv(points), args)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="featcodec", description="Lightweight feature-tensor codec.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=False):
        sp.add_argument("--dims", help="dimensions for raw .f32 inputs, e.g. 52,52,256")
        sp.add_argument("--out", required=out_required)
        sp.add_argument("--force", action="store_true", help="overwrite an existing --out file")

    def clip_flags(sp):
        sp.add_argument("--clip-min", type=float)
        sp.add_argument("--clip-max", type=float)

    d = sub.add_parser("design", help="design a quantizer codebook (.lwqc)")
    d.add_argument("train", nargs="+", help="training tensors (.ftns or .f32)")
    d.add_argument("--bins", "-N", type=int, required=True)
    clip_flags(d)
    d.add_argument("--lambda", dest="lam", default="0")
    d.add_argument("--lengths", help="codeword lengths, comma separated; default truncated unary")
    d.add_argument("--conventional", action="store_true", help="probability rates, no level pinning")
    common(d)
    d.set_defaults(func=cmd_design)

    e = sub.add_parser("encode", help="code a tensor into a .lwfc stream")
    e.add_argument("tensor")
    e.add_argument("--bins", "-N", type=int)
    clip_flags(e)
    e.add_argument("--codebook")
    e.add_argument("--inline-codebook", action="store_true")
    common(e)
    e.set_defaults(func=cmd_encode)

    x = sub.add_parser("decode", help="decode a .lwfc stream into a .ftns tensor")
    x.add_argument("stream")
    x.add_argument("--codebook")
    x.add_argument("--inspect", action="store_true", help="print the header only")
    common(x)
    x.set_defaults(func=cmd_decode)

    ev = sub.add_parser("eval", help="measurement tools")
    esub = ev.add_subparsers(dest="tool", required=True)

    s = esub.add_parser("synth", help="generate a synthetic activation tensor")
    s.add_argument("--zero-fraction", type=float, default=0.6)
    s.add_argument("--scale", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    common(s)
    s.set_defaults(func=cmd_synth)

    h = esub.add_parser("histogram", help="bucket counts as CSV")
    h.add_argument("tensor")
    h.add_argument("--buckets", type=int, default=32)
    clip_flags(h)
    common(h)
    h.set_defaults(func=cmd_histogram)

    c = esub.add_parser("clip-sweep", help="uniform-quantizer MSQE against c_max, as CSV")
    c.add_argument("tensor")
    c.add_argument("--bins", "-N", type=int, required=True)
    c.add_argument("--clip-min", type=float, default=0.0)
    c.add_argument("--grid", required=True, help="ascending c_max values, comma separated")
    common(c)
    c.set_defaults(func=cmd_clip_sweep)

    r = esub.add_parser("rate-sweep", help="design and code at each lambda, as CSV")
    r.add_argument("--train", nargs="+", required=True)
    r.add_argument("--eval", required=True)
    r.add_argument("--bins", "-N", type=int, required=True)
    clip_flags(r)
    r.add_argument("--lambda", dest="lam", required=True, help="ascending lambdas, comma separated")
    common(r)
    r.set_defaults(func=cmd_rate_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (CLIError, FeatcodecError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

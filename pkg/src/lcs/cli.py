"""Command-line front end: ``lcs encode|decode|evaluate|compare``.

Exit codes
----------
0  success
1  every evaluation cell failed, or an unexpected error
2  invalid command-line usage (bad flag value, unknown option)
3  unreadable PGM (bad header, maxval other than 255, truncated data)
4  malformed LCS1 stream
5  solver divergence
6  dense operator over the capacity cap
7  dimension mismatch (e.g. line length does not divide the pixel count)
8  file missing or not writable
9  reports cannot be compared (different rates or ambiguous schemes)
"""

import argparse
import csv
import os
from pathlib import Path
import sys
import tempfile

from . import codec, metrics
from .errors import (
    CapacityError,
    DimensionError,
    DivergenceError,
    FormatError,
    PgmError,
    RateError,
    ReportMismatchError,
)
from .imaging import load_image, pgm_bytes
from .sampling import DEFAULT_CAPACITY, encode_image, measurement_count
from .tvsolver import FLAVORS, SolverConfig, reconstruct

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_IMAGE = 3
EXIT_FORMAT = 4
EXIT_DIVERGED = 5
EXIT_CAPACITY = 6
EXIT_DIMENSION = 7
EXIT_IO = 8
EXIT_MISMATCH = 9

# most specific first
_EXIT_CODES = (
    (PgmError, EXIT_IMAGE),
    (FormatError, EXIT_FORMAT),
    (DivergenceError, EXIT_DIVERGED),
    (CapacityError, EXIT_CAPACITY),
    (ReportMismatchError, EXIT_MISMATCH),
    (DimensionError, EXIT_DIMENSION),
    (RateError, EXIT_USAGE),
    (OSError, EXIT_IO),
)

_DEFAULTS = SolverConfig()


def _rate(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < v <= 1.0:
        raise argparse.ArgumentTypeError(f"rate must lie in (0, 1], got {v}")
    return v


def _rates(text):
    return [_rate(t) for t in text.split(",") if t.strip()]


def _positive(kind):
    def parse(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a {kind.__name__}: {text!r}") from None
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {v}")
        return v
    return parse


def _seed(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _schemes(text):
    names = [t.strip() for t in text.split(",") if t.strip()]
    bad = [n for n in names if n not in metrics.SCHEMES]
    if bad or not names:
        raise argparse.ArgumentTypeError(
            f"schemes must be drawn from {','.join(metrics.SCHEMES)}, got {text!r}"
        )
    return names


def _default_seed():
    env = os.environ.get("LCS_SEED")
    return _seed(env) if env else 0


def _add_solver_flags(p):
    p.add_argument("--lambda", dest="lam", type=_positive(float), default=_DEFAULTS.lam,
                   help="measurement fidelity weight")
    p.add_argument("--beta", type=_positive(float), default=_DEFAULTS.beta,
                   help="splitting penalty")
    p.add_argument("--tol", type=_positive(float), default=_DEFAULTS.tol,
                   help="stop when the relative change of the iterate drops below this")
    p.add_argument("--max-outer", type=_positive(int), default=_DEFAULTS.max_outer,
                   help="outer iteration cap")
    p.add_argument("--max-inner", type=_positive(int), default=_DEFAULTS.max_inner,
                   help="gradient steps per image update")
    p.add_argument("--tv", dest="tv_flavor", choices=FLAVORS, default=_DEFAULTS.tv_flavor,
                   help="total variation flavour")


def _config(args):
    return SolverConfig(lam=args.lam, beta=args.beta, max_outer=args.max_outer,
                        max_inner=args.max_inner, tol=args.tol, tv_flavor=args.tv_flavor)


def _write_atomic(path, data):
    """Write via a temporary file so a failure never leaves a partial output."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def cmd_encode(args):
    image = load_image(args.input)
    sample = encode_image(image, args.rate, args.seed, args.line_len)
    out = args.out or Path(args.input).with_suffix(".lcs")
    data = codec.serialize(sample)
    _write_atomic(out, data)
    print(f"wrote {out}")
    print(f"image {image.rows}x{image.cols}  line_len L={sample.line_len}  "
          f"lines N={sample.num_lines}  M={sample.m_per_line} per line")
    print(f"achieved rate {sample.achieved_rate:.6f} (requested {args.rate})  "
          f"payload {sample.payload_bytes} bytes  file {len(data)} bytes  seed {sample.seed}")
    return EXIT_OK


def cmd_decode(args):
    sample = codec.load(args.input)
    image, state = reconstruct(sample, _config(args))
    _write_atomic(args.out, pgm_bytes(image))
    if args.trace:
        with open(args.trace, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["iteration", "objective", "relative_change"])
            for i, (obj, ch) in enumerate(zip(state.objective_trace, state.change_trace), 1):
                w.writerow([i, repr(obj), repr(ch)])
    print(f"wrote {args.out}")
    print(f"iterations {state.iterations}  final relative change {state.final_change:.3e}  "
          f"converged {'yes' if state.converged else 'no'}")
    return EXIT_OK


def cmd_evaluate(args):
    image = load_image(args.input)
    # fail fast on flags the cells would reject one by one
    if args.line_len is not None and (image.rows * image.cols) % args.line_len:
        raise DimensionError(f"line length {args.line_len} does not divide the pixel count")
    for r in args.rates:
        measurement_count(r, args.line_len or image.cols)
    out = Path(args.out)
    image_id = args.image_id or Path(args.input).stem
    report = metrics.rd_sweep(
        image, args.rates, args.trials, args.seed, args.schemes, _config(args),
        image_id=image_id, line_len=args.line_len, capacity=args.capacity,
        jobs=args.jobs, keep_reconstructions=True,
    )
    metrics.write_csv(report, out)
    metrics.write_json(report, out.with_suffix(".json"))
    metrics.write_dat(report, out.with_suffix(".dat"))
    recon_dir = out.with_name(out.stem + "_recon")
    recon_dir.mkdir(exist_ok=True)
    (recon_dir / "original.pgm").write_bytes(pgm_bytes(image))
    for (scheme, rate), rec in sorted(report.reconstructions.items()):
        (recon_dir / f"{scheme}_{rate:g}.pgm").write_bytes(pgm_bytes(rec))

    print(f"{'scheme':<14}{'rate':>6}  mean PSNR (dB)")
    for row in report.mean_rows():
        val = f"{row.psnr_db:.2f}" if row.ok else row.status
        print(f"{row.scheme:<14}{row.rate:>6g}  {val}")
    print(f"wrote {out}, {out.with_suffix('.json')}, {out.with_suffix('.dat')}, {recon_dir}/")
    if not any(r.ok for r in report.rows):
        print("error: every cell failed", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def cmd_compare(args):
    a = metrics.read_csv(args.report_a)
    b = metrics.read_csv(args.report_b)
    gains = metrics.compare_report(a, b, args.scheme_a, args.scheme_b)
    print(f"{'rate':>6}  gain (dB)")
    for rate, g in gains.items():
        print(f"{rate:>6g}  {g:+.2f}")
    if args.out:
        with open(args.out, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["rate", "gain_db"])
            for rate, g in gains.items():
                w.writerow([rate, repr(g)])
    return EXIT_OK


def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(
        prog="lcs", description="Line-based compressive sensing codec.", formatter_class=fmt
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="sample a PGM image line by line", formatter_class=fmt)
    p.add_argument("input", help="binary PGM (P5, maxval 255)")
    p.add_argument("-o", "--out", help="output .lcs file (default: input with .lcs suffix)")
    p.add_argument("--rate", type=_rate, required=True, help="sampling rate M/L in (0, 1]")
    p.add_argument("--seed", type=_seed, default=_default_seed(),
                   help="operator seed (falls back to $LCS_SEED)")
    p.add_argument("--line-len", type=_positive(int), default=None,
                   help="pixels per line (default: image width)")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="reconstruct an image from an .lcs file",
                       formatter_class=fmt)
    p.add_argument("input", help="LCS1 file")
    p.add_argument("--out", required=True, help="output PGM")
    _add_solver_flags(p)
    p.add_argument("--trace", help="write the per-iteration objective to this CSV")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("evaluate", help="rate-distortion sweep", formatter_class=fmt)
    p.add_argument("input", help="binary PGM test image")
    p.add_argument("--rates", type=_rates, default=list(metrics.DEFAULT_RATES),
                   help="comma-separated sampling rates")
    p.add_argument("--trials", type=_positive(int), default=5, help="trials per rate")
    p.add_argument("--seed", type=_seed, default=_default_seed(),
                   help="base seed; trial t uses seed+t (falls back to $LCS_SEED)")
    p.add_argument("--schemes", type=_schemes, default=list(metrics.SCHEMES),
                   help="comma-separated subset of proposed,conventional")
    p.add_argument("--out", default="report.csv",
                   help="report CSV; .json and .dat siblings and a _recon/ directory are "
                        "written next to it")
    p.add_argument("--line-len", type=_positive(int), default=None,
                   help="pixels per line for the proposed scheme (default: image width)")
    p.add_argument("--capacity", type=_positive(int), default=DEFAULT_CAPACITY,
                   help="largest dense operator (entries) the conventional scheme may build")
    p.add_argument("--jobs", type=_positive(int), default=1,
                   help="worker processes for sweep cells")
    p.add_argument("--image-id", help="label for the report (default: input file stem)")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="per-rate PSNR gain of report A over report B",
                       formatter_class=fmt)
    p.add_argument("report_a")
    p.add_argument("report_b")
    p.add_argument("--scheme-a", help="scheme to take from report A if it holds several")
    p.add_argument("--scheme-b", help="scheme to take from report B if it holds several")
    p.add_argument("--out", help="also write the gain table to this CSV")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    try:
        return args.func(args)
    except Exception as exc:
        for cls, code in _EXIT_CODES:
            if isinstance(exc, cls):
                print(f"lcs {args.command}: error: {exc}", file=sys.stderr)
                return code
        raise


def run():
    sys.exit(main())

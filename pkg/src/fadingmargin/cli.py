"""Command-line entry point.

Exit codes: 0 success, 2 usage error, 3 I/O error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import channel, csi_io, empirical, gamma

EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

TABLE1_M = (1, 2, 4, 8)
TABLE1_N = (1, 2, 3, 4)
_DEFAULT_PRECISION = {"cdf": 6, "simulate": 6}


class UsageError(Exception):
    pass


def _probability(text):
    try:
        return gamma.check_probability(float(text))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid probability {text!r}") from None


def _positive_int(text):
    try:
        v = int(float(text))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from None
    if v < 1 or v != float(text):
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def _int_list(text):
    return [_positive_int(tok) for tok in text.split(",") if tok.strip()]


def parse_grid(text: str) -> np.ndarray:
    """``min:max:step`` in dB, both ends inclusive."""
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be min:max:step, got {text!r}") from None
    if not all(math.isfinite(v) for v in (lo, hi, step)) or step <= 0 or hi < lo:
        raise argparse.ArgumentTypeError(f"invalid grid {text!r}")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(count)


def _fmt(x, precision):
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return f"{x:.{precision}f}"
    return str(x)


@contextmanager
def _output(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _write_rows(out, header, rows, precision):
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v, precision) for v in row])


def cmd_margin(args):
    ps = args.p_list if args.p_list else [args.p]
    rows = []
    for p in ps:
        fm = gamma.fading_margin_analytic(args.m, args.n, p)
        rows.append((args.m, args.n, args.m * args.n, repr(p), fm.margin_db))
    with _output(args.out) as out:
        _write_rows(out, ["m", "n", "dof", "p", "margin_db"], rows, args.precision)


def table1(p: float = 1e-3) -> list[list[float]]:
    """Analytic margins, rows ``n = 1..4``, columns ``m = 1, 2, 4, 8``."""
    return [
        [gamma.fading_margin_analytic(m, n, p).margin_db for m in TABLE1_M]
        for n in TABLE1_N
    ]


def cmd_table1(args):
    rows = [[n, *vals] for n, vals in zip(TABLE1_N, table1(args.p))]
    with _output(args.out) as out:
        _write_rows(out, ["n"] + [f"m={m}" for m in TABLE1_M], rows, args.precision)


def cmd_cdf(args):
    grid = args.grid_db
    if args.simulate:
        samples = channel.monte_carlo_gains(args.m, args.n, args.simulate, args.seed).values
        ecdf = empirical.build_ecdf(samples)
        cdf = ecdf(10.0 ** (grid / 10.0))
        rows = list(zip(grid.tolist(), cdf.tolist()))
    else:
        rows = gamma.analytic_cdf_curve(gamma.GammaParams.reference(args.m, args.n), grid)
    with _output(args.out) as out:
        _write_rows(out, ["gain_db", "cdf"], rows, args.precision)


def cmd_simulate(args):
    snr = 10.0 ** (args.snr_db / 10.0)
    if args.emit_sinr or args.samples:
        gains, sinr = channel.monte_carlo_sinr(args.m, args.n, args.realizations, args.seed, snr)
    else:
        gains = channel.monte_carlo_gains(args.m, args.n, args.realizations, args.seed).values
        sinr = None
    g = channel.GainSamples(gains, args.m, args.n, args.seed)
    rows = [
        ("m", args.m),
        ("n", args.n),
        ("realizations", args.realizations),
        ("seed", args.seed),
        ("mean", g.mean()),
        ("variance", g.variance()),
        ("scv", g.scv()),
        ("scv_analytic", gamma.scv(args.m, args.n)),
    ]
    if args.emit_sinr:
        sinr_db = 10.0 * np.log10(sinr)
        for q in (1, 5, 10, 50, 90):
            rows.append((f"sinr_db_p{q}", float(np.percentile(sinr_db, q))))
    with _output(args.out) as out:
        _write_rows(out, ["key", "value"], rows, args.precision)
    if args.samples:
        with open(args.samples, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["gain_linear", "sinr_linear"])
            for a, b in zip(gains.tolist(), sinr.tolist()):
                writer.writerow([repr(a), repr(b)])


def cmd_empirical(args):
    trace = csi_io.read_trace(args.trace)
    if args.drop_excluded:
        trace = trace.without_excluded()
    if max(args.sizes) > trace.m:
        raise UsageError(f"array size {max(args.sizes)} exceeds {trace.m} antennas")
    bands = empirical.BANDS if args.band == "both" else (
        empirical.NARROWBAND if args.band == "nb" else empirical.WIDEBAND,
    )
    table = empirical.case_study(
        trace, sorted(set(args.sizes)), args.p, selection=args.selection,
        bands=bands, seed=args.seed,
    )
    label = args.dataset or trace.meta.get("label") or Path(args.trace).stem
    rows = [
        (label, r.size, r.band, r.report.margin_db, r.report.n_samples,
         str(r.report.resolvable).lower())
        for r in table.rows
    ]
    with _output(args.out) as out:
        _write_rows(out, ["dataset", "size", "band", "margin_db", "n_samples", "resolvable"],
                    rows, args.precision)


def cmd_synth(args):
    meta = {"generator": "taps" if args.taps else "iid", "seed": str(args.seed)}
    if args.label:
        meta["label"] = args.label
    if args.taps:
        if args.taps > args.k:
            raise UsageError("--taps must not exceed --k")
        trace = csi_io.synth_from_taps(
            args.t, csi_io.rayleigh_taps(args.m, args.taps, args.power), args.k, args.seed, meta
        )
    else:
        trace = csi_io.synth_iid_trace(args.t, args.m, args.k, args.power, args.seed, meta)
    nbytes = csi_io.write_trace(trace, args.out)
    print(f"wrote {nbytes} bytes to {args.out}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fadingmargin",
        description="Fading margins of large-scale antenna systems.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--precision", type=int, help="decimal places (default 2 for dB tables)")
    common.add_argument("--out", help="write CSV here instead of stdout")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("margin", parents=[common], help="analytic fading margin")
    p.add_argument("--m", type=_positive_int, required=True)
    p.add_argument("--n", type=_positive_int, required=True)
    grp = p.add_mutually_exclusive_group(required=True)
    grp.add_argument("--p", type=_probability)
    grp.add_argument("--p-list", type=lambda s: [_probability(v) for v in s.split(",")])
    p.set_defaults(func=cmd_margin)

    p = sub.add_parser("table1", parents=[common], help="analytic margin table")
    p.add_argument("--p", type=_probability, default=1e-3)
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("cdf", parents=[common], help="CDF of |h[0]|^2 on a dB grid")
    p.add_argument("--m", type=_positive_int, required=True)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--grid-db", type=parse_grid, required=True, metavar="MIN:MAX:STEP")
    grp = p.add_mutually_exclusive_group()
    grp.add_argument("--analytic", action="store_true")
    grp.add_argument("--simulate", type=_positive_int, metavar="R")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_cdf)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo reference channel")
    p.add_argument("--m", type=_positive_int, required=True)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--realizations", type=_positive_int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--snr-db", type=float, default=10.0)
    p.add_argument("--emit-sinr", action="store_true")
    p.add_argument("--samples", help="write per-realization gain and SINR CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("empirical", parents=[common], help="fading margins from a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--sizes", type=_int_list, default=[1, 8, 32, 93])
    p.add_argument("--p", type=_probability, default=1e-3)
    p.add_argument("--band", choices=("nb", "wb", "both"), default="both")
    p.add_argument("--selection", choices=("tiles", "prefix", "random"), default="tiles")
    p.add_argument("--seed", type=int, default=0, help="seed for --selection random")
    p.add_argument("--dataset", help="label for the dataset column")
    p.add_argument("--drop-excluded", action="store_true",
                   help="drop antennas listed in the trace's excluded_antennas meta")
    p.set_defaults(func=cmd_empirical)

    p = sub.add_parser("synth", help="write a synthetic CSITRC trace")
    p.add_argument("--t", type=_positive_int, required=True)
    p.add_argument("--m", type=_positive_int, required=True)
    p.add_argument("--k", type=_positive_int, required=True)
    p.add_argument("--power", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--taps", type=_positive_int, help="synthesize from n-tap Rayleigh channels")
    p.add_argument("--label")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "precision", 0) is None:
        args.precision = _DEFAULT_PRECISION.get(args.command, 2)
    try:
        args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except csi_io.TraceFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (
        ArithmeticError,
        channel.ResourceLimitError,
        channel.DegenerateChannelError,
        empirical.DegenerateDistributionError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())

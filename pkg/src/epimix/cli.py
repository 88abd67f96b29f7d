"""Command-line interface.

Exit codes: 0 success, 2 input or configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import datetime as dt
import json
import math
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .closedloop import ControlParams, integrate_closed_loop, write_closed_loop_csv
from .fit import FitConfig, alternating_minimize, bic_select, forecast
from .initialization import PeakConfig, initialize
from .model import CaseSeries, FitError, InsufficientStructureError, Mixture, NoiseBound
from .sim import (
    SimConfigSingle,
    SimConfigTwo,
    expected_cases,
    peak_time_c1,
    simulate_single,
    simulate_two,
    write_ensemble_csv,
)
from .theory import (
    BoundsDomainError,
    BoundsInput,
    check_theorem31,
    midpoint_separation_equal,
    midpoint_separation_unequal,
    separation_threshold,
)
from .transform import estimate_pruning, s_transform

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


class IngestError(ValueError):
    """Unreadable or invalid case-count input."""


@dataclass(frozen=True)
class IngestConfig:
    """Preprocessing applied while reading a case file.

    Attributes
    ----------
    smoothing_window : int
        Odd width of the centred moving average; 1 disables smoothing.
    zero_floor : float
        Value substituted for counts that are zero or negative.
    date_origin : datetime.date, optional
        Date mapped to day 0 for dated input; defaults to the first date.
    """

    smoothing_window: int = 1
    zero_floor: float = 1.0
    date_origin: Optional[dt.date] = None

    def __post_init__(self):
        if self.smoothing_window < 1 or self.smoothing_window % 2 == 0:
            raise ValueError("smoothing window must be an odd integer >= 1")
        if not self.zero_floor > 0:
            raise ValueError("zero floor must be positive")


def centered_moving_average(values: np.ndarray, window: int) -> np.ndarray:
    """Mean over ``[i - w//2, i + w//2]``, truncated at the ends of the series."""
    if window == 1:
        return values.copy()
    half = window // 2
    csum = np.concatenate([[0.0], np.cumsum(values)])
    idx = np.arange(values.size)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half + 1, values.size)
    return (csum[hi] - csum[lo]) / (hi - lo)


def ingest(path, cfg: IngestConfig = IngestConfig()) -> CaseSeries:
    """Read a two-column CSV of day index or ISO date, and case count.

    Raises
    ------
    IngestError
        On unreadable files, malformed rows (with line numbers), or a time
        column that is not strictly increasing by one day.
    """
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise IngestError(f"{path}: empty file")
    parsed = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not any(cell.strip() for cell in row):
            continue
        if len(row) != 2:
            raise IngestError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
        key, raw = row[0].strip(), row[1].strip()
        try:
            value = float(raw)
        except ValueError:
            raise IngestError(f"{path}:{lineno}: cases value {raw!r} is not a number") from None
        if not math.isfinite(value):
            raise IngestError(f"{path}:{lineno}: cases value {raw!r} is not finite")
        try:
            when: object = int(key)
        except ValueError:
            try:
                when = dt.date.fromisoformat(key)
            except ValueError:
                raise IngestError(f"{path}:{lineno}: time {key!r} is neither an integer nor an ISO date") from None
        if parsed and type(when) is not type(parsed[0][1]):
            raise IngestError(f"{path}:{lineno}: mixes integer days and dates")
        parsed.append((lineno, when, value))
    if len(parsed) < 3:
        raise IngestError(f"{path}: need at least 3 observations, found {len(parsed)}")
    if isinstance(parsed[0][1], dt.date):
        origin = cfg.date_origin or parsed[0][1]
        parsed = [(ln, (d - origin).days, v) for ln, d, v in parsed]
    for (_, prev, _), (lineno, day, _) in zip(parsed, parsed[1:]):
        if day <= prev:
            raise IngestError(f"{path}:{lineno}: time column not strictly increasing")
        if day != prev + 1:
            raise IngestError(f"{path}:{lineno}: missing days between {prev} and {day}")
    y = np.array([v for _, _, v in parsed])
    bad = y <= 0
    if np.any(bad):
        warnings.warn(f"{int(bad.sum())} nonpositive counts replaced by {cfg.zero_floor}", RuntimeWarning, stacklevel=2)
        y = np.where(bad, cfg.zero_floor, y)
    return CaseSeries(parsed[0][1], centered_moving_average(y, cfg.smoothing_window))


def _open_out(path: Optional[str]):
    return open(path, "w", newline="") if path else contextlib.nullcontext(sys.stdout)


def _ingest_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="CSV with header: t,cases or date,cases")
    p.add_argument("--smooth", type=int, default=1, help="odd centred moving-average window (default 1, off)")
    p.add_argument("--zero-floor", type=float, default=1.0, help="value substituted for nonpositive counts")
    p.add_argument("--date-origin", type=dt.date.fromisoformat, default=None, help="ISO date mapped to day 0")


def _ingest_from(args) -> CaseSeries:
    cfg = IngestConfig(args.smooth, args.zero_floor, args.date_origin)
    return ingest(args.input, cfg)


def cmd_fit(args) -> int:
    series = _ingest_from(args)
    peak_cfg = PeakConfig(args.min_distance, args.min_prominence)
    cfg = FitConfig(
        max_outer_iters=args.max_outer,
        max_inner_iters=args.max_inner,
        loss_rel_tol=args.tol,
        r_max=args.r_max,
        seed=args.seed,
    )
    if args.auto_r:
        result = bic_select(series, cfg, peak_cfg)
    else:
        result = alternating_minimize(initialize(series, args.r, peak_cfg), series, cfg)
    out = result.mixture.to_dict()
    out["diagnostics"] = {
        "outer_iters_used": result.outer_iters_used,
        "converged": result.converged,
        "loss_history": list(result.loss_history),
        "bic_scores": {str(r): v for r, v in result.bic_scores.items()},
        "t0": series.t0,
        "t_end": series.t_end,
    }
    with _open_out(args.out) as fh:
        json.dump(out, fh, indent=2)
        fh.write("\n")
    return EXIT_OK


def cmd_forecast(args) -> int:
    try:
        mixture = Mixture.from_json(Path(args.model).read_text())
    except OSError as exc:
        raise IngestError(f"cannot read model {args.model}: {exc}") from exc
    if args.horizon < 0:
        raise IngestError("horizon must be nonnegative")
    if args.horizon == 0:
        return EXIT_OK
    with _open_out(args.out) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("t", "predicted"))
        for t, v in forecast(mixture, args.from_t, args.horizon):
            writer.writerow((t, repr(v)))
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.mode == "single":
        cfg = SimConfigSingle(args.n, args.d, args.beta, args.gamma, args.horizon, args.seed)
        trajs = [simulate_single(cfg, i) for i in range(args.trials)]
        d = args.d
    else:
        cfg = SimConfigTwo(args.n, args.d_in, args.d_out, args.beta, args.gamma, args.horizon, args.seed)
        trajs = [simulate_two(cfg, i) for i in range(args.trials)]
        d = args.d_in
    with _open_out(args.out) as fh:
        write_ensemble_csv(trajs, fh)
    counts = np.stack([tr.counts for tr in trajs])
    mean = counts.mean(axis=0)
    if args.mode == "single":
        expect = np.atleast_1d(expected_cases(d, args.beta, args.gamma, np.arange(counts.shape[1])))
        summary = "mean/expected " + "; ".join(f"t={t}: {m:.4g}/{e:.4g}" for t, (m, e) in enumerate(zip(mean, expect)))
    else:
        # the mean-field curve ignores depletion, which saturates a finite community 1
        threshold = peak_time_c1(d, args.beta, args.gamma) - math.log(20.0) / math.log(1.0 / args.gamma)
        late = np.mean([tr.crossing_time is None or tr.crossing_time > threshold for tr in trajs])
        summary = "community 1 mean " + "; ".join(f"t={t}: {m:.4g}" for t, m in enumerate(mean))
        summary += f" | fraction crossing after {threshold:.4g}: {late:.4f}"
    print(summary, file=sys.stderr if args.out is None else sys.stdout)
    return EXIT_OK


def cmd_bounds(args) -> int:
    out: dict = {}
    full = None not in (args.a1, args.a2, args.C1, args.C2, args.M1, args.M2)
    a_lower = args.a_lower if args.a_lower is not None else (min(args.a1, args.a2) if full else None)
    M_upper = args.M_upper if args.M_upper is not None else (max(args.M1, args.M2) if full else None)
    if a_lower is not None and M_upper is not None and args.epsilon is not None:
        out["separation_threshold"] = {
            "natural_log": separation_threshold(a_lower, M_upper, args.epsilon),
            "log10": separation_threshold(a_lower, M_upper, args.epsilon, log=math.log10),
        }
    if full and args.epsilon is not None:
        inp = BoundsInput(
            args.a1, args.a2, args.C1, args.C2, args.M1, args.M2, a_lower, M_upper, args.epsilon, NoiseBound(args.delta)
        )
        out["theorem"] = check_theorem31(inp, (args.t_start, args.t_end)).to_dict()
    if args.prop_eps is not None:
        if args.a1 is None:
            raise BoundsDomainError("--prop-eps needs --a1")
        if args.a2 is None or args.a2 == args.a1:
            value = midpoint_separation_equal(args.a1, args.delta, args.prop_eps)
        else:
            if args.M1 is None or args.M2 is None:
                raise BoundsDomainError("unequal curvatures need --M1 and --M2")
            value = midpoint_separation_unequal(args.a1, args.a2, args.M1, args.M2, args.delta, args.prop_eps)
        out["midpoint_separation"] = value if math.isfinite(value) else None
    if not out:
        raise BoundsDomainError("nothing to evaluate: give --a-lower, --M-upper and --epsilon, or component parameters")
    with _open_out(args.out) as fh:
        json.dump(out, fh, indent=2)
        fh.write("\n")
    return EXIT_OK


def cmd_pruning(args) -> int:
    series = _ingest_from(args)
    print(repr(estimate_pruning(series, args.start, args.end)))
    return EXIT_OK


def cmd_transform(args) -> int:
    st = s_transform(_ingest_from(args))
    with _open_out(args.out) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("t", "S"))
        for t, v in zip(st.t, st.values):
            writer.writerow((int(t), repr(float(v))))
    return EXIT_OK


def cmd_closedloop(args) -> int:
    traj = integrate_closed_loop(ControlParams(args.a, args.b, args.c), args.t_end, args.dt)
    with _open_out(args.out) as fh:
        write_closed_loop_csv(traj, fh)
    if traj.clamp_events:
        print(f"radicand clamped at 0 in {traj.clamp_events} evaluations", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="epimix", description="Gaussian-mixture epidemic curves.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a Gaussian mixture to a case series")
    _ingest_args(p)
    order = p.add_mutually_exclusive_group(required=True)
    order.add_argument("--r", type=int, help="number of components")
    order.add_argument("--auto-r", action="store_true", help="choose the number of components by BIC")
    p.add_argument("--r-max", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-distance", type=int, default=14)
    p.add_argument("--min-prominence", type=float, default=0.0)
    p.add_argument("--max-outer", type=int, default=200)
    p.add_argument("--max-inner", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("forecast", help="extrapolate a fitted mixture")
    p.add_argument("--model", required=True, help="mixture JSON written by fit")
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--from", dest="from_t", type=int, required=True, help="last observed day")
    p.add_argument("--out")
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("simulate", help="Monte Carlo ensemble of the pruning SIR model")
    p.add_argument("--mode", choices=("single", "two"), default="single")
    p.add_argument("--n", type=int, default=100000)
    p.add_argument("--d", type=float, default=6.0)
    p.add_argument("--d-in", type=float, default=55.2)
    p.add_argument("--d-out", type=float, default=2e-5)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--gamma", type=float, default=0.9)
    p.add_argument("--horizon", type=int, default=15)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bounds", help="evaluate separation and noise bounds")
    for name in ("a1", "a2", "C1", "C2", "M1", "M2"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--a-lower", type=float)
    p.add_argument("--M-upper", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--delta", type=float, default=0.0, help="noise bound, also used as B")
    p.add_argument("--prop-eps", type=float, help="case-ratio tolerance for the midpoint separation condition")
    p.add_argument("--t-start", type=int, default=0)
    p.add_argument("--t-end", type=int, default=10**9)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("pruning", help="window-averaged log pruning rate")
    _ingest_args(p)
    p.add_argument("--start", type=int, required=True)
    p.add_argument("--end", type=int, required=True)
    p.set_defaults(func=cmd_pruning)

    p = sub.add_parser("transform", help="S(t) log second differences as CSV")
    _ingest_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("closedloop", help="integrate the feedback law")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--t-end", type=float, required=True)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--out")
    p.set_defaults(func=cmd_closedloop)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.showwarning = _show_warning
            return args.func(args)
    except (InsufficientStructureError, FitError, OverflowError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (IngestError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())

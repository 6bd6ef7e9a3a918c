"""Command-line interface.

Exit codes: 0 success, 1 invalid input or parameters, 2 internal error.
Output files are staged in memory and moved into place atomically, so a
failed run leaves nothing half-written behind.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .crc import (
    DEFAULT_GRID,
    DEFAULT_LOOSE_TOLERANCE,
    CrcCurve,
    compute_crc_curve,
    emit_crc_data,
    parse_crc_table,
    verdict,
)
from .dataset_io import DatasetError, SplitPlan, load_dataset
from .forecast import ForecastError, ForecastSet, build_regions_batch
from .lab import SyntheticTask, check_theorem1, perturb_forecaster, pooled_forecasts
from .learners import ForecastFormatError, LearnerConfig, LearnerError, forecasts_csv_text, import_forecasts
from .metrics import err_indicator
from .plotting import crc_svg, save_crc_figure
from .protocol import ProtocolError, run_protocol

log = logging.getLogger("confregion")

REGION_HEADER = ("example_id", "delta", "members", "excluded_mass", "err")

FORMATS_HELP = """\
file formats:
  forecast CSV  example_id,true_label,p_<label1>,...,p_<labelK>
                true_label holds a label name and may be empty
  region CSV    example_id,delta,members,excluded_mass,err
                members are ';'-joined label names, least probable first
  CRC CSV       confidence,delta,err,unc (confidence descending from 1.0)
  summary JSON  n, grid_intervals, err_above_area, avg_width_area,
                strict_calibrated, loose_calibrated, loose_tolerance
"""


class UsageError(Exception):
    """Bad input or parameters; reported with exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


class Outputs:
    """Collects output files and writes them all-or-nothing."""

    def __init__(self):
        self._files: dict[Path, bytes] = {}

    def add(self, path, data: str | bytes):
        self._files[Path(path)] = data.encode("utf-8") if isinstance(data, str) else data

    def commit(self):
        staged = []
        try:
            for path, data in self._files.items():
                path.parent.mkdir(parents=True, exist_ok=True)
                fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
                staged.append((tmp, path))
                with os.fdopen(fd, "wb") as fh:
                    fh.write(data)
            for tmp, path in staged:
                os.replace(tmp, path)
        except OSError as exc:
            for tmp, _ in staged:
                if os.path.exists(tmp):
                    os.unlink(tmp)
            raise UsageError(f"cannot write {getattr(exc, 'filename', '') or 'output'}: {exc.strerror or exc}")


def _png_bytes(curve: CrcCurve, title: str, v=None) -> bytes:
    buf = io.BytesIO()
    save_crc_figure(curve, buf, title=title, verdict=v)
    return buf.getvalue()


def _read_forecasts(path: str):
    try:
        return import_forecasts(path)
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror or exc}")
    except (ForecastFormatError, ForecastError) as exc:
        raise UsageError(f"{path}: {exc}")


# -- subcommands ------------------------------------------------------------


def cmd_convert(args) -> None:
    space, forecasts = _read_forecasts(args.forecasts)
    if not 0.0 <= args.delta <= 1.0:
        raise UsageError(f"--delta must lie in [0, 1], got {args.delta}")
    regions = build_regions_batch(forecasts, args.delta)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REGION_HEADER)
    for fv, reg in zip(forecasts, regions):
        # ascending probability, i.e. the suffix of the sorted order
        members = ";".join(space.names[j] for j in reversed(reg.members))
        err = "" if fv.true_label is None else str(err_indicator(reg, fv.true_label))
        w.writerow([fv.example_id, repr(reg.delta), members, repr(reg.excluded_mass), err])
    out = Outputs()
    out.add(args.out, buf.getvalue())
    out.commit()
    log.info("wrote %d regions to %s", len(regions), args.out)


def _crc_artifacts(out: Outputs, out_dir: Path, stem: str, fs, grid: int, tol: float,
                   title: str, plot: bool):
    curve = compute_crc_curve(fs, grid)
    v = verdict(curve, tol)
    table, summary = emit_crc_data(curve, v)
    out.add(out_dir / f"{stem}.csv", table)
    out.add(out_dir / f"{stem}_summary.json", summary)
    if plot:
        out.add(out_dir / f"{stem}.svg", crc_svg(curve, title, v))
        out.add(out_dir / f"{stem}.png", _png_bytes(curve, title, v))
    return curve, v


def cmd_evaluate(args) -> None:
    space, forecasts = _read_forecasts(args.forecasts)
    if not forecasts:
        raise UsageError(f"{args.forecasts}: no forecasts to evaluate")
    missing = [fv.example_id for fv in forecasts if fv.true_label is None]
    if missing:
        raise UsageError(f"{args.forecasts}: true_label missing for examples {missing[:5]}")
    _check_grid(args.grid, args.loose_tol)
    fs = ForecastSet.from_vectors(forecasts, space)
    out = Outputs()
    _, v = _crc_artifacts(out, Path(args.out_dir), "crc", fs, args.grid, args.loose_tol,
                          Path(args.forecasts).stem, args.plot)
    out.commit()
    print(f"err_above_area={v.err_above_area!r} avg_width_area={v.avg_width_area!r} "
          f"strict_calibrated={str(v.strict_calibrated).lower()} loose_calibrated={str(v.loose_calibrated).lower()}")


def _check_grid(grid: int, tol: float):
    if grid < 2:
        raise UsageError(f"--grid must be at least 2, got {grid}")
    if tol < 0:
        raise UsageError(f"--loose-tol must be non-negative, got {tol}")


def cmd_train_eval(args) -> None:
    _check_grid(args.grid, args.loose_tol)
    if args.seeds < 1:
        raise UsageError("--seeds must be at least 1")
    if args.learner == "dwknn" and args.k is None:
        raise UsageError("--k is required with --learner dwknn")
    try:
        data = load_dataset(args.dataset, args.class_column)
        config = LearnerConfig(args.learner, k=args.k or 1, variance_floor=args.variance_floor,
                               laplace_alpha=args.laplace_alpha)
        plan = SplitPlan.repeats(args.seeds, args.train_frac, args.seed)
        report = run_protocol(data, config, plan, args.grid, args.loose_tol, args.preprocess_scope)
    except (DatasetError, LearnerError, ProtocolError) as exc:
        raise UsageError(str(exc))
    out_dir = Path(args.out_dir)
    out = Outputs()
    out.add(out_dir / "report.json", report.to_json())
    for r in report.runs:
        table, summary = emit_crc_data(r.curve, r.verdict)
        out.add(out_dir / f"crc_seed{r.seed}.csv", table)
        out.add(out_dir / f"forecasts_seed{r.seed}.csv", forecasts_csv_text(data.label_space, r.forecasts.vectors()))
    if args.plot:
        mean_curve = CrcCurve(
            report.runs[0].curve.deltas,
            tuple(np.mean([r.curve.err for r in report.runs], axis=0).tolist()),
            tuple(np.mean([r.curve.unc for r in report.runs], axis=0).tolist()),
            sum(r.curve.n for r in report.runs),
        )
        title = f"{data.name}, {config.describe()} (mean of {len(report.runs)} splits)"
        v = verdict(mean_curve, args.loose_tol)
        out.add(out_dir / "crc_mean.svg", crc_svg(mean_curve, title, v))
        out.add(out_dir / "crc_mean.png", _png_bytes(mean_curve, title, v))
    out.commit()
    m = report.mean()
    print(f"{data.name} {config.describe()}: error_rate={m['error_rate_percent']:.3f}% "
          f"square_loss={m['square_loss']:.4f} err_above={m['crc_err_above_area']:.3g} "
          f"width={m['crc_avg_width_area']:.4f}")


def cmd_synth(args) -> None:
    if not 0.0 < args.delta < 1.0:
        raise UsageError(f"--delta must lie in (0, 1), got {args.delta}")
    if not 0.0 <= args.epsilon < 1.0:
        raise UsageError(f"--epsilon must lie in [0, 1), got {args.epsilon}")
    if args.n < 1 or args.trials < 1 or args.labels < 2 or args.dim < 1:
        raise UsageError("--n and --trials must be >= 1, --labels >= 2, --dim >= 1")
    if not args.temperature > 0:
        raise UsageError("--temperature must be positive")
    task = perturb_forecaster(SyntheticTask(args.labels, args.dim, args.seed), args.temperature)
    check = check_theorem1(task, args.n, args.delta, args.epsilon, args.trials)
    out = Outputs()
    out.add(args.out, check.to_json())
    if args.crc_dir:
        _crc_artifacts(out, Path(args.crc_dir), "crc", pooled_forecasts(task, args.n, args.trials),
                       args.grid, args.loose_tol, f"synthetic, temperature {args.temperature:g}", True)
    out.commit()
    print(f"observed_failure_freq={check.observed_failure_freq!r} bound={check.bound!r} "
          f"pass={str(check.passed).lower()}")


def cmd_crc_plot(args) -> None:
    try:
        text = Path(args.input).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"{args.input}: {exc.strerror or exc}")
    try:
        curve = parse_crc_table(text)
    except ValueError as exc:
        raise UsageError(f"{args.input}: {exc}")
    title = args.title or Path(args.input).stem
    out = Outputs()
    out.add(args.svg, crc_svg(curve, title))
    if args.png:
        out.add(args.png, _png_bytes(curve, title))
    out.commit()


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.RawDescriptionHelpFormatter
    parser = _Parser(prog="confregion", description="Confidence region prediction from probability forecasts.",
                     epilog=FORMATS_HELP, formatter_class=fmt)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("convert", help="convert forecasts into region predictions",
                       epilog=FORMATS_HELP, formatter_class=fmt)
    p.add_argument("--forecasts", required=True, help="forecast CSV")
    p.add_argument("--delta", required=True, type=float, help="significance level; confidence is 1 - delta")
    p.add_argument("--out", required=True, help="region CSV to write")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("evaluate", help="CRC curve, deviation areas and calibration verdict",
                       epilog=FORMATS_HELP, formatter_class=fmt)
    p.add_argument("--forecasts", required=True, help="forecast CSV with true labels")
    p.add_argument("--grid", type=int, default=DEFAULT_GRID, help="number of delta intervals (default 100)")
    p.add_argument("--loose-tol", type=float, default=DEFAULT_LOOSE_TOLERANCE,
                   help="error-above area still counted as loosely calibrated (default 1e-4)")
    p.add_argument("--out-dir", required=True, help="writes crc.csv, crc_summary.json, crc.svg, crc.png")
    p.add_argument("--no-plot", dest="plot", action="store_false", help="skip the SVG and PNG figures")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("train-eval", help="repeated train/test protocol with a built-in learner",
                       epilog=FORMATS_HELP, formatter_class=fmt)
    p.add_argument("--dataset", required=True,
                   help="ARFF or CSV file, or the name of a bundled dataset (iris, glass)")
    p.add_argument("--class-column", help="class attribute name (default: last column)")
    p.add_argument("--learner", required=True, choices=("dwknn", "naivebayes"))
    p.add_argument("--k", type=int, help="neighbours for dwknn")
    p.add_argument("--variance-floor", type=float, default=1e-9, help="naivebayes minimum variance")
    p.add_argument("--laplace-alpha", type=float, default=1.0, help="naivebayes nominal smoothing")
    p.add_argument("--seeds", type=int, default=5, help="number of random splits (default 5)")
    p.add_argument("--seed", type=int, default=0, help="first split seed; splits use seed..seed+seeds-1")
    p.add_argument("--train-frac", type=float, default=0.66, help="training fraction (default 0.66)")
    p.add_argument("--preprocess-scope", choices=("train", "all"), default="train",
                   help="fit normalization/imputation on the training half or the whole dataset")
    p.add_argument("--grid", type=int, default=DEFAULT_GRID)
    p.add_argument("--loose-tol", type=float, default=DEFAULT_LOOSE_TOLERANCE)
    p.add_argument("--out-dir", required=True,
                   help="writes report.json, crc_seed<S>.csv, forecasts_seed<S>.csv, crc_mean.svg/png")
    p.add_argument("--no-plot", dest="plot", action="store_false", help="skip the mean CRC figures")
    p.set_defaults(func=cmd_train_eval)

    p = sub.add_parser("synth", help="Monte-Carlo check of the Bayes-optimal calibration bound")
    p.add_argument("--n", type=int, default=1000, help="examples per trial")
    p.add_argument("--labels", type=int, default=3)
    p.add_argument("--dim", type=int, default=2, help="object dimension")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--temperature", type=float, default=1.0,
                   help="forecast distortion; < 1 sharpens (overconfident), > 1 flattens")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="BoundCheck JSON to write")
    p.add_argument("--crc-dir", help="also write the pooled CRC table, summary and figures here")
    p.add_argument("--grid", type=int, default=DEFAULT_GRID)
    p.add_argument("--loose-tol", type=float, default=DEFAULT_LOOSE_TOLERANCE)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("crc-plot", help="render a CRC table as SVG",
                       epilog=FORMATS_HELP, formatter_class=fmt)
    p.add_argument("--in", dest="input", required=True, help="CRC CSV")
    p.add_argument("--svg", required=True, help="SVG file to write")
    p.add_argument("--png", help="also render a PNG with matplotlib")
    p.add_argument("--title")
    p.set_defaults(func=cmd_crc_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"confregion {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"confregion {args.command}: internal error: {exc!r}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

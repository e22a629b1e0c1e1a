"""
Report emission for Concentration Lab.

Writes verification, embedding, Pisier and rotation reports as CSV, JSON and
(for bound verifications) SVG figures of log-probability against t. JSON and
CSV output is byte-stable for a fixed report; runtimes are never written.
"""

import csv
import io
import json
import logging
import math
import os
from typing import Any, List, Optional, Sequence, Tuple

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from lab.errors import DomainError  # noqa: E402

logger = logging.getLogger(__name__)

VERIFICATION_COLUMNS = ("t", "empirical", "ci_lo", "ci_hi", "bound", "pass")
RATIO_COLUMNS = ("trial", "net_index", "ratio")
ROTATION_COLUMNS = ("lambda", "probability", "quantile", "ratio", "guard_ok")
PISIER_COLUMNS = ("f", "phi", "n", "trials", "lhs", "lhs_se", "rhs", "rhs_se", "holds")
CURVE_COLUMNS = ("t", "bound", "source", "calib-id")
BALL_DESCRIPTOR = "ball_q:"
CURVE_GID = "curve"


def _cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def report_table(report) -> Tuple[Sequence[str], List[List[Any]]]:
    """Header and rows of the CSV form of a report."""
    if hasattr(report, "rows") and hasattr(report, "bound"):
        return VERIFICATION_COLUMNS, [[r.t, r.empirical, r.ci_lo, r.ci_hi, r.bound, r.passed] for r in report.rows]
    if hasattr(report, "ratios"):
        if report.ratios is None:
            raise DomainError("embedding report carries no per-trial ratios")
        return RATIO_COLUMNS, [[trial, index, float(value)]
                               for trial, row in enumerate(report.ratios)
                               for index, value in enumerate(row)]
    if hasattr(report, "rows"):
        return ROTATION_COLUMNS, [[r.lam, r.probability, r.quantile, r.ratio, r.guard_ok] for r in report.rows]
    if hasattr(report, "lhs"):
        return PISIER_COLUMNS, [[report.f, report.phi, report.n, report.trials, report.lhs, report.lhs_se,
                                 report.rhs, report.rhs_se, report.holds]]
    raise DomainError(f"no table layout for {type(report).__name__}")


def _render_rows(header: Sequence[str], rows: List[List[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(value) for value in row])
    return buffer.getvalue()


def render_csv(report) -> str:
    return _render_rows(*report_table(report))


def parse_csv(text: str) -> List[List[str]]:
    """Rows of a CSV document, header included."""
    return [row for row in csv.reader(io.StringIO(text))]


def render_table(rows: List[List[str]]) -> str:
    """Re-emit parsed CSV rows."""
    buffer = io.StringIO()
    csv.writer(buffer, lineterminator="\n").writerows(rows)
    return buffer.getvalue()


def render_curve_csv(curve, t_grid: Sequence[float]) -> str:
    """Bound curve as CSV with columns t, bound, source, calib-id."""
    return _render_rows(CURVE_COLUMNS, [[t, value, curve.source, curve.calib_id]
                                        for t, _level, value in curve.grid(t_grid)])


def sample_table(batch) -> Tuple[Sequence[str], np.ndarray]:
    """
    Header and matrix of a sample export, one column per coordinate.

    Product samples carry one law identifier per column. An l_q ball batch stores
    one point per column, so it is transposed and its coordinates are headed
    "<descriptor>#<index>".
    """
    values = np.asarray(batch.values)
    if len(batch.laws) == 1 and batch.laws[0].startswith(BALL_DESCRIPTOR):
        return [f"{batch.laws[0]}#{i}" for i in range(values.shape[0])], values.T
    if len(batch.laws) == values.shape[1]:
        return list(batch.laws), values
    raise DomainError(f"{len(batch.laws)} law identifiers for a {values.shape[0]}x{values.shape[1]} sample")


def render_sample_csv(batch) -> str:
    header, values = sample_table(batch)
    return _render_rows(header, values.tolist())


def render_json(report) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True, allow_nan=True) + "\n"


def _target(out_dir: str, stem: Optional[str], report, suffix: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    name = stem or getattr(report, "name", None) or type(report).__name__.lower()
    return os.path.join(out_dir, f"{name}.{suffix}")


def _write(path: str, text: str) -> List[str]:
    with open(path, "w", newline="") as f:
        f.write(text)
    logger.info(f"Report written to {os.path.abspath(path)}")
    return [path]


def write_csv(report, out_dir: str, stem: Optional[str] = None) -> List[str]:
    return _write(_target(out_dir, stem, report, "csv"), render_csv(report))


def write_json(report, out_dir: str, stem: Optional[str] = None) -> List[str]:
    return _write(_target(out_dir, stem, report, "json"), render_json(report))


def write_curve_csv(curve, t_grid: Sequence[float], out_dir: str, stem: str) -> List[str]:
    os.makedirs(out_dir, exist_ok=True)
    return _write(os.path.join(out_dir, f"{stem}.csv"), render_curve_csv(curve, t_grid))


def write_sample_csv(batch, out_dir: str, stem: str = "sample") -> List[str]:
    os.makedirs(out_dir, exist_ok=True)
    return _write(os.path.join(out_dir, f"{stem}.csv"), render_sample_csv(batch))


def _log_probability(values: Sequence[float], floor: float) -> List[float]:
    return [math.log10(max(v, floor)) for v in values]


def write_svg(report, out_dir: str, stem: Optional[str] = None) -> List[str]:
    """
    log10 probability against t with the empirical tail and the bound, one line each.

    Both curves carry gids "curve-empirical" and "curve-bound" so a figure holds
    exactly two curve elements per bound.
    """
    if not (hasattr(report, "rows") and hasattr(report, "bound")):
        raise DomainError("SVG output is only available for bound verifications")
    ts = [row.t for row in report.rows]
    floor = 0.1 / max(report.trials, 1)
    plt.rcParams["svg.hashsalt"] = "concentration-lab"
    fig, ax = plt.subplots(figsize=(6, 4))
    try:
        empirical, = ax.plot(ts, _log_probability([r.empirical for r in report.rows], floor),
                             marker="o", label="empirical")
        bound, = ax.plot(ts, _log_probability([r.bound for r in report.rows], floor),
                         linestyle="--", label=report.bound)
        empirical.set_gid(f"{CURVE_GID}-empirical")
        bound.set_gid(f"{CURVE_GID}-bound")
        ax.set_xlabel("t")
        ax.set_ylabel("log10 probability")
        ax.set_title(report.name)
        ax.legend()
        path = _target(out_dir, stem, report, "svg")
        fig.savefig(path, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)
    logger.info(f"Report written to {os.path.abspath(path)}")
    return [path]


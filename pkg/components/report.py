import json
import logging
import math
from pathlib import Path

import pandas as pd

logger = logging.getLogger(__name__)

TRIAL_COLUMNS = (
    "seed", "n", "prior_param", "sigma_std", "exact_log_p", "ub_log", "lb_log",
    "rel_err_ub", "rel_err_lb", "gap_metric", "sweeps_ub", "sweeps_lb", "degenerate",
)
AGGREGATE_COLUMNS = (
    "abscissa", "bin_lo", "bin_hi", "count", "median_rel_err_ub", "median_rel_err_lb", "median_gap",
)
FLOAT_FORMAT = "%.17g"


def format_value(value):
    """Format a log-probability or error for terminal output based on its magnitude"""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ''
    if math.isinf(value):
        return '-inf' if value < 0 else 'inf'
    if value != 0 and (abs(value) >= 1e4 or abs(value) < 1e-4):
        return f'{value:.10e}'
    return f'{value:.12f}'


def _write(frame: pd.DataFrame, path, columns):
    if not hasattr(path, "write"):
        path = Path(path)
    frame = frame.reindex(columns=list(columns))
    if "exact_log_p" in frame.columns:
        frame["exact_log_p"] = frame["exact_log_p"].astype(float)
    if "degenerate" in frame.columns:
        frame["degenerate"] = frame["degenerate"].astype(int)
    frame.to_csv(path, index=False, na_rep="", float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info("Wrote %d rows to %s", len(frame), getattr(path, "name", path))
    return path


def emit_csv(records, path):
    """
    Write trial records (TrialRecord objects, dicts or a DataFrame) with the
    fixed trial header. Missing exact values are left empty.
    """
    frame = records if isinstance(records, pd.DataFrame) else pd.DataFrame(
        [r if isinstance(r, dict) else {k: getattr(r, k) for k in TRIAL_COLUMNS} for r in records]
    )
    return _write(frame, path, TRIAL_COLUMNS)


def emit_aggregate(aggregate: pd.DataFrame, path, with_size=False):
    columns = (("n",) if with_size else ()) + AGGREGATE_COLUMNS
    return _write(aggregate, path, columns)


def emit_frame(frame: pd.DataFrame, path):
    return _write(frame, path, frame.columns)


def emit_trace(trace, path, columns):
    """Optimizer trace rows, e.g. (sweep, coordinate, log_bound) for the upper bounds."""
    return _write(pd.DataFrame(list(trace), columns=list(columns)), path, columns)


def emit_options(options: dict, path):
    path = Path(path)
    path.write_text(json.dumps(options, indent=2, sort_keys=True, default=str) + "\n")
    return path


def sidecar_paths(out) -> dict:
    """Companion files of an experiment CSV: aggregate, lower-bound modes and options."""
    out = Path(out)
    stem = out.with_suffix("") if out.suffix == ".csv" else out
    return {
        "aggregate": stem.parent / f"{stem.name}_agg.csv",
        "modes": stem.parent / f"{stem.name}_modes.csv",
        "options": stem.parent / f"{stem.name}.json",
    }

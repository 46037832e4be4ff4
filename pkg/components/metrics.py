import numpy as np
import pandas as pd

SANDWICH_SLACK = 1e-9


def relative_error(bound_log, exact_log):
    """
    1 - log P_bound / log P: the size of the exponent error eps in P_bound = P^(1-eps),
    signed positive for upper bounds and negative for lower bounds.
    Zero when both are zero; missing when the exact value is unavailable or zero.
    """
    if exact_log is None or not np.isfinite(exact_log) or bound_log is None:
        return np.nan
    if exact_log == 0.0:
        return 0.0 if bound_log == 0.0 else np.nan
    return 1.0 - bound_log / exact_log


def gap_metric(ub_log, lb_log):
    """lb/ub - 1, the relative error with the upper bound standing in for the exact value."""
    if not (np.isfinite(ub_log) and np.isfinite(lb_log)) or ub_log == 0.0:
        return np.nan
    return lb_log / ub_log - 1.0


def symmetric_gap(ub_log, lb_log):
    if not (np.isfinite(ub_log) and np.isfinite(lb_log)) or ub_log == 0.0:
        return np.nan
    return abs(ub_log - lb_log) / abs(ub_log)


def binned_medians(records: pd.DataFrame, column="sigma_std", bins=20, lo=0.0, hi=0.5) -> pd.DataFrame:
    """
    Median errors per equal-width bin of ``column``. Every bin gets a row;
    empty bins carry a zero count and missing medians.
    """
    edges = np.linspace(lo, hi, bins + 1)
    values = records[column].to_numpy(dtype=float) if len(records) else np.empty(0)
    index = np.clip(np.searchsorted(edges, values, side="right") - 1, 0, bins - 1)
    rows = []
    for b in range(bins):
        cell = records[index == b] if len(records) else records
        rows.append({
            "abscissa": 0.5 * (edges[b] + edges[b + 1]),
            "bin_lo": edges[b],
            "bin_hi": edges[b + 1],
            "count": len(cell),
            "median_rel_err_ub": _median(cell, "rel_err_ub"),
            "median_rel_err_lb": _median(cell, "rel_err_lb"),
            "median_gap": _median(cell, "gap_metric"),
        })
    return pd.DataFrame(rows)


def grouped_medians(records: pd.DataFrame, by=("n", "abscissa")) -> pd.DataFrame:
    """Median errors per group, groups in sorted order."""
    rows = []
    for key, cell in records.groupby(list(by), sort=True):
        row = dict(zip(by, key if isinstance(key, tuple) else (key,)))
        row.update({
            "bin_lo": np.nan,
            "bin_hi": np.nan,
            "count": len(cell),
            "median_rel_err_ub": _median(cell, "rel_err_ub"),
            "median_rel_err_lb": _median(cell, "rel_err_lb"),
            "median_gap": _median(cell, "gap_metric"),
        })
        rows.append(row)
    return pd.DataFrame(rows)


def _median(cell: pd.DataFrame, column: str) -> float:
    values = cell[column].dropna() if len(cell) else cell
    return float(values.median()) if len(values) else np.nan


def summarize_records(records: pd.DataFrame) -> dict:
    """
    Run-level checks: how many trials broke the sandwich or the sign convention.
    """
    if records.empty:
        return {"trials": 0, "oracle_checked": 0, "sandwich_violations": 0, "sign_violations": 0, "degenerate": 0}

    checked = records.assign(exact_log_p=records["exact_log_p"].astype(float)).dropna(subset=["exact_log_p"])
    slack = SANDWICH_SLACK * np.maximum(1.0, checked["exact_log_p"].abs())
    sandwich = (checked["lb_log"] > checked["exact_log_p"] + slack) | (checked["ub_log"] < checked["exact_log_p"] - slack)
    live = checked[~checked["degenerate"].astype(bool)]
    signs = (live["rel_err_ub"] < -SANDWICH_SLACK) | (live["rel_err_lb"] > SANDWICH_SLACK)
    return {
        "trials": len(records),
        "oracle_checked": len(checked),
        "sandwich_violations": int(sandwich.sum()),
        "sign_violations": int(signs.sum()),
        "degenerate": int(records["degenerate"].astype(bool).sum()),
    }

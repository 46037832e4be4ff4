import io

import numpy as np
import pandas as pd
import pytest

from components.metrics import binned_medians, gap_metric, grouped_medians, relative_error, summarize_records, symmetric_gap
from components.report import TRIAL_COLUMNS, emit_csv, format_value, sidecar_paths


class TestErrors:
    def test_relative_error_signs(self):
        assert relative_error(-9.0, -10.0) == pytest.approx(0.1)
        assert relative_error(-11.0, -10.0) == pytest.approx(-0.1)

    def test_relative_error_missing(self):
        assert np.isnan(relative_error(-1.0, None))
        assert np.isnan(relative_error(-1.0, float("-inf")))
        assert relative_error(0.0, 0.0) == 0.0

    def test_gap(self):
        assert gap_metric(-10.0, -12.0) == pytest.approx(0.2)
        assert symmetric_gap(-10.0, -12.0) == pytest.approx(0.2)
        assert np.isnan(gap_metric(-10.0, float("-inf")))
        assert np.isnan(symmetric_gap(0.0, -1.0))


def _records(sigma, rel_ub):
    n = len(sigma)
    return pd.DataFrame({
        "sigma_std": sigma,
        "rel_err_ub": rel_ub,
        "rel_err_lb": [-r for r in rel_ub],
        "gap_metric": [2 * r for r in rel_ub],
        "exact_log_p": [-5.0] * n,
        "ub_log": [-4.0] * n,
        "lb_log": [-6.0] * n,
        "degenerate": [False] * n,
        "n": [8] * n,
        "abscissa": [1.0] * n,
    })


class TestAggregation:
    def test_binned_medians_keep_empty_bins(self):
        table = binned_medians(_records([0.005, 0.01, 0.02, 0.49, 0.5], [0.1, 0.2, 0.9, 0.4, 0.6]))
        assert len(table) == 20
        assert list(table["count"]) == [3] + [0] * 18 + [2]
        assert table.loc[0, "median_rel_err_ub"] == pytest.approx(0.2)
        assert table.loc[19, "median_rel_err_ub"] == pytest.approx(0.5)
        assert table.loc[1:18, "median_gap"].isna().all()
        assert table.loc[0, "bin_lo"] == 0.0 and table.loc[19, "bin_hi"] == 0.5

    def test_grouped_medians(self):
        records = _records([0.1] * 4, [0.1, 0.3, 0.5, 0.7]).assign(abscissa=[1.0, 1.0, 2.0, 2.0])
        table = grouped_medians(records)
        assert list(table["abscissa"]) == [1.0, 2.0]
        assert list(table["median_rel_err_ub"]) == pytest.approx([0.2, 0.6])
        assert table["bin_lo"].isna().all()

    def test_summary_flags_violations(self):
        records = _records([0.1, 0.2], [0.1, 0.2])
        records.loc[1, "ub_log"] = -7.0
        records.loc[1, "rel_err_ub"] = -0.4
        summary = summarize_records(records)
        assert summary["sandwich_violations"] == 1
        assert summary["sign_violations"] == 1
        assert summarize_records(records.iloc[0:0])["trials"] == 0


class TestReport:
    def test_header_and_empty_exact(self):
        frame = pd.DataFrame([{k: 1 for k in TRIAL_COLUMNS}]).assign(exact_log_p=[None], degenerate=[True])
        out = io.StringIO()
        emit_csv(frame, out)
        header, row = out.getvalue().splitlines()
        assert header == ",".join(TRIAL_COLUMNS)
        fields = row.split(",")
        assert fields[TRIAL_COLUMNS.index("exact_log_p")] == ""
        assert fields[TRIAL_COLUMNS.index("degenerate")] == "1"

    def test_full_precision(self):
        frame = pd.DataFrame([{k: 0 for k in TRIAL_COLUMNS}]).assign(ub_log=[0.1 + 0.2])
        out = io.StringIO()
        emit_csv(frame, out)
        value = out.getvalue().splitlines()[1].split(",")[TRIAL_COLUMNS.index("ub_log")]
        assert float(value) == 0.1 + 0.2

    def test_format_value(self):
        assert format_value(float("nan")) == ""
        assert format_value(float("-inf")) == "-inf"
        assert format_value(-1.5) == "-1.500000000000"
        assert format_value(-1.5e-7) == "-1.5000000000e-07"

    def test_sidecar_paths(self, tmp_path):
        paths = sidecar_paths(tmp_path / "fig2.csv")
        assert paths["aggregate"].name == "fig2_agg.csv"
        assert paths["modes"].name == "fig2_modes.csv"
        assert paths["options"].name == "fig2.json"

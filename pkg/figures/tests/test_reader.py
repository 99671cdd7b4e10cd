"""Reader contract tests: metadata line, header, typed columns, errors."""

import math

import numpy as np
import pytest

from alivepf_figures import (
    SchemaMismatch,
    floats,
    meta_indices,
    read_table,
    require_columns,
    strings,
)


def test_parses_meta_header_and_columns(make_csv):
    path = make_csv("error_ratio")
    table = read_table(path)
    assert table.meta["family"] == "error_ratio"
    assert table.meta["epsilon"] == "5.0"
    assert table.meta["rows"] == "3"
    assert table.header == ("step", "alive_l1", "standard_l1",
                            "log_error_ratio")
    assert table.n_rows == 3
    assert table.columns["step"] == ["1", "2", "3"]


def test_label_prefers_series_then_epsilon(make_csv):
    counts = read_table(make_csv("particle_counts"))
    assert counts.label() == "alive_trials"
    ratio = read_table(make_csv("error_ratio"))
    assert ratio.label() == "epsilon=5.0"
    bare = read_table(make_csv("error_ratio", meta={}, name="bare.csv"))
    assert bare.label() == "bare"


def test_floats_and_strings(make_csv):
    path = make_csv("nc_relvar")
    table = read_table(path)
    log_var = floats(table, "log_rel_variance")
    assert math.isinf(log_var[0]) and log_var[0] < 0
    assert log_var[1] == -3.5
    assert strings(table, "replicates") == ["40", "40", "40"]


def test_empty_cells_become_nan(make_csv):
    path = make_csv("abs_error", rows=[[1, 0.5], [2, ""], [3, 0.7]])
    values = floats(read_table(path), "abs_error")
    assert np.isnan(values[1])
    assert values[0] == 0.5


def test_non_numeric_cell_reports_column(make_csv):
    path = make_csv("abs_error", rows=[[1, "wat"]])
    with pytest.raises(SchemaMismatch) as excinfo:
        floats(read_table(path), "abs_error")
    assert excinfo.value.columns == ("abs_error",)


def test_missing_metadata_line(tmp_path):
    path = tmp_path / "plain.csv"
    path.write_text("step,abs_error\n1,0.5\n")
    with pytest.raises(SchemaMismatch, match="metadata line"):
        read_table(path)


def test_missing_file(tmp_path):
    with pytest.raises(SchemaMismatch, match="cannot read"):
        read_table(tmp_path / "absent.csv")


def test_ragged_row_rejected(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text("# rows=2\na,b\n1,2\n3\n")
    with pytest.raises(SchemaMismatch, match="line 4"):
        read_table(path)


def test_declared_row_count_must_match(tmp_path):
    path = tmp_path / "short.csv"
    path.write_text("# rows=5\na,b\n1,2\n")
    with pytest.raises(SchemaMismatch, match="rows=5"):
        read_table(path)


def test_duplicate_columns_rejected(tmp_path):
    path = tmp_path / "dup.csv"
    path.write_text("# rows=1\nstep,step\n1,2\n")
    with pytest.raises(SchemaMismatch) as excinfo:
        read_table(path)
    assert excinfo.value.columns == ("step",)


def test_empty_header_name_rejected(tmp_path):
    path = tmp_path / "gap.csv"
    path.write_text("# rows=1\nstep,,x\n1,2,3\n")
    with pytest.raises(SchemaMismatch, match="empty column names"):
        read_table(path)


def test_require_columns_lists_every_missing_name(make_csv):
    table = read_table(make_csv("abs_error"))
    with pytest.raises(SchemaMismatch) as excinfo:
        require_columns(table, ("step", "alive_l1", "log_error_ratio"))
    assert excinfo.value.columns == ("alive_l1", "log_error_ratio")


def test_meta_indices(make_csv):
    table = read_table(make_csv("abs_error"))
    assert meta_indices(table.meta, "outliers") == [2, 4]
    assert meta_indices(table.meta, "absent") == []
    assert meta_indices({"outliers": ""}, "outliers") == []
    with pytest.raises(SchemaMismatch):
        meta_indices({"outliers": "2;x"}, "outliers")


def test_header_only_file_is_valid(make_csv):
    table = read_table(make_csv("error_ratio", rows=[]))
    assert table.n_rows == 0
    assert floats(table, "step").shape == (0,)

"""Family renderer tests: every family draws, markers and layouts hold."""

import pytest

from alivepf_figures import FAMILIES, SchemaMismatch, read_table, render_family

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


@pytest.mark.parametrize("family", sorted(FAMILIES))
def test_every_family_renders_png(family, make_csv, tmp_path):
    table = read_table(make_csv(family))
    out = tmp_path / f"{family}.png"
    fig = render_family(family, [table], out_path=out)
    assert out.read_bytes()[:8] == PNG_MAGIC
    assert fig.axes, "the figure must hold at least one axes"


@pytest.mark.parametrize("family", sorted(FAMILIES))
def test_header_only_input_renders_empty_axes(family, make_csv, tmp_path):
    table = read_table(make_csv(family, rows=[]))
    out = tmp_path / f"{family}_empty.png"
    render_family(family, [table], out_path=out)
    assert out.read_bytes()[:8] == PNG_MAGIC


def test_missing_columns_raise_before_drawing(make_csv):
    table = read_table(make_csv("abs_error"))
    with pytest.raises(SchemaMismatch) as excinfo:
        render_family("error_ratio", [table])
    assert "alive_l1" in excinfo.value.columns
    assert "log_error_ratio" in excinfo.value.columns


def test_unknown_family_raises_value_error(make_csv):
    table = read_table(make_csv("abs_error"))
    with pytest.raises(ValueError, match="unknown family"):
        render_family("heatmap", [table])


def test_no_tables_raises(tmp_path):
    with pytest.raises(SchemaMismatch, match="at least one"):
        render_family("abs_error", [])


def test_outlier_markers_sit_at_one_based_steps(make_csv):
    # metadata indices 2 and 4 are observation positions, so the vertical
    # markers belong at steps 3 and 5
    table = read_table(make_csv("abs_error"))
    fig = render_family("abs_error", [table])
    ax = fig.axes[0]
    vlines = {
        line.get_xdata()[0]
        for line in ax.lines
        if len(line.get_xdata()) == 2
        and line.get_xdata()[0] == line.get_xdata()[1]
    }
    assert vlines == {3, 5}


def test_state_trajectory_marks_outliers_too(make_csv):
    table = read_table(make_csv("state_trajectory"))
    fig = render_family("state_trajectory", [table])
    ax = fig.axes[0]
    vlines = {
        line.get_xdata()[0]
        for line in ax.lines
        if len(line.get_xdata()) == 2
        and line.get_xdata()[0] == line.get_xdata()[1]
    }
    assert vlines == {2}


def test_pmmh_trace_gets_one_axes_per_parameter(make_csv):
    table = read_table(make_csv("pmmh_trace"))
    fig = render_family("pmmh_trace", [table])
    assert len(fig.axes) == 2
    assert [ax.get_ylabel() for ax in fig.axes] == ["beta", "c"]


def test_pmmh_trace_without_parameters_is_rejected(make_csv):
    table = read_table(make_csv(
        "pmmh_trace",
        header=["iteration", "log_gamma_hat", "accepted", "trials"],
        rows=[[1, -42.0, 1, 300]],
    ))
    with pytest.raises(SchemaMismatch, match="no parameter columns"):
        render_family("pmmh_trace", [table])


def test_single_table_families_reject_multiple_inputs(make_csv):
    tables = [read_table(make_csv("posterior_grid")),
              read_table(make_csv("posterior_grid"))]
    with pytest.raises(SchemaMismatch, match="exactly one"):
        render_family("posterior_grid", tables)


def test_overlay_adds_legend(make_csv, tmp_path):
    first = read_table(make_csv("error_ratio"))
    second = read_table(make_csv(
        "error_ratio", meta={"family": "error_ratio", "epsilon": "10.0"}))
    fig = render_family("error_ratio", [first, second],
                        out_path=tmp_path / "overlay.png")
    assert fig.axes[0].get_legend() is not None


def test_nc_relvar_skips_non_finite_points(make_csv):
    # the first step's log variance is -inf in the fixture; the drawn
    # curve must start at step 2
    table = read_table(make_csv("nc_relvar"))
    fig = render_family("nc_relvar", [table])
    line = fig.axes[0].lines[0]
    assert list(line.get_xdata()) == [2.0, 3.0]


def test_identities_table_labels_every_row(make_csv):
    table = read_table(make_csv("identities_table"))
    fig = render_family("identities_table", [table])
    labels = [tick.get_text() for tick in fig.axes[0].get_xticklabels()]
    assert labels == ["single p=0.2 N=2", "single p=0.5 N=5",
                      "pair p=0.3 N=3"]


def test_title_is_applied(make_csv):
    table = read_table(make_csv("nc_scaling"))
    fig = render_family("nc_scaling", [table], title="scaling check")
    assert fig.get_suptitle() == "scaling check"

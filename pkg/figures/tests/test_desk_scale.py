"""Desk-scale rendering: every family renders the committed experiment
outputs without error and at the configured pixel dimensions."""

from pathlib import Path

import pytest
from PIL import Image

from alivepf_figures import meta_indices, read_table, render_family
from alivepf_figures.cli import main

FIXTURES = Path(__file__).parent / "fixtures"

CASES = [
    ("error_ratio", ["fig1_error_ratio_v0_e0.csv"]),
    ("error_ratio", ["fig8_error_ratio_v0_e0.csv"]),
    ("abs_error", ["fig2_abs_error_v0_e0.csv"]),
    ("nc_trajectory", ["fig3_nc_trajectory_v0_e0.csv"]),
    ("nc_relvar", ["fig4_nc_relvar_v0_e0.csv"]),
    ("nc_relvar", ["nc_relvar_n5.csv", "nc_relvar_n10.csv",
                   "nc_relvar_n20.csv"]),
    ("particle_counts", ["fig5_particle_counts_v0_e0.csv",
                         "fig6_particle_counts_v0_e0.csv"]),
    ("state_trajectory", ["fig7_state_trajectory_v0_e0.csv"]),
    ("pmmh_trace", ["pmmh_sv_trace.csv"]),
    ("posterior_grid", ["pmmh_lg_posterior.csv"]),
    ("identities_table", ["identities.csv"]),
    ("nc_scaling", ["nc_scaling.csv"]),
]


@pytest.mark.parametrize(
    "family,names", CASES,
    ids=[f"{family}:{names[0]}" for family, names in CASES])
def test_family_renders_desk_output_at_configured_size(family, names,
                                                       tmp_path):
    inputs = [str(FIXTURES / name) for name in names]
    out = tmp_path / f"{family}.png"
    code = main([family, *inputs, "-o", str(out),
                 "--size", "6x4", "--dpi", "50"])
    assert code == 0
    with Image.open(out) as image:
        assert image.size == (300, 200)


def test_desk_abs_error_draws_recorded_outliers():
    table = read_table(FIXTURES / "fig2_abs_error_v0_e0.csv")
    indices = meta_indices(table.meta, "outliers")
    assert indices, "the desk fixture records injected outliers"
    fig = render_family("abs_error", [table])
    ax = fig.axes[0]
    vlines = {
        line.get_xdata()[0]
        for line in ax.lines
        if len(line.get_xdata()) == 2
        and line.get_xdata()[0] == line.get_xdata()[1]
    }
    assert vlines == {index + 1 for index in indices}


def test_desk_trace_has_three_parameter_panels():
    table = read_table(FIXTURES / "pmmh_sv_trace.csv")
    fig = render_family("pmmh_trace", [table])
    assert [ax.get_ylabel() for ax in fig.axes] == ["beta", "c", "phi"]

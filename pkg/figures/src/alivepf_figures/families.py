"""Figure families: one renderer per experiment CSV layout.

Each family declares the columns its CSVs must carry and a draw
function. Rendering is read-only over the inputs and stateless (no
pyplot globals), so re-rendering the same job is idempotent. A CSV with
a header but no data rows renders an empty set of axes and still
succeeds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .reader import (
    SchemaMismatch,
    TableFile,
    floats,
    meta_indices,
    require_columns,
    strings,
)


def _single_table(tables, family: str) -> TableFile:
    if len(tables) != 1:
        raise SchemaMismatch(
            f"family {family!r} renders exactly one CSV, got {len(tables)}")
    return tables[0]


def _mark_outliers(ax, table: TableFile) -> None:
    # metadata records 0-based observation indices; the step axis is 1-based
    for index in meta_indices(table.meta, "outliers"):
        ax.axvline(index + 1, color="firebrick", linestyle="--",
                   linewidth=0.9, alpha=0.8)


def _finish(ax, tables, xlabel: str, ylabel: str) -> None:
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if len(tables) > 1:
        ax.legend(fontsize="small")


def _draw_error_ratio(fig: Figure, tables) -> None:
    ax = fig.subplots()
    for table in tables:
        ax.plot(floats(table, "step"), floats(table, "log_error_ratio"),
                linewidth=1.0, label=table.label())
    ax.axhline(0.0, color="black", linewidth=0.8, linestyle=":")
    _finish(ax, tables, "step", "log error ratio (alive / standard)")


def _draw_abs_error(fig: Figure, tables) -> None:
    ax = fig.subplots()
    for table in tables:
        ax.plot(floats(table, "step"), floats(table, "abs_error"),
                linewidth=1.0, label=table.label())
        _mark_outliers(ax, table)
    _finish(ax, tables, "step", "mean absolute filtering error")


def _draw_nc_trajectory(fig: Figure, tables) -> None:
    ax = fig.subplots()
    for table in tables:
        steps = floats(table, "step")
        ax.plot(steps, floats(table, "eps0_reference"), color="black",
                linestyle="--", linewidth=0.9, label="exact reference")
        ax.plot(steps, floats(table, "alive_log_nc"), linewidth=1.0,
                label="alive")
        ax.plot(steps, floats(table, "standard_log_nc"), linewidth=1.0,
                label="standard")
    ax.set_xlabel("step")
    ax.set_ylabel("log normalizing constant")
    ax.legend(fontsize="small")


def _draw_nc_relvar(fig: Figure, tables) -> None:
    ax = fig.subplots()
    for table in tables:
        steps = floats(table, "step")
        log_var = floats(table, "log_rel_variance")
        se = floats(table, "jackknife_se_log")
        keep = np.isfinite(log_var)
        ax.plot(steps[keep], log_var[keep], linewidth=1.0,
                label=table.label())
        band = keep & np.isfinite(se)
        if band.any():
            ax.fill_between(steps[band], (log_var - se)[band],
                            (log_var + se)[band], alpha=0.25)
    _finish(ax, tables, "step", "log relative variance")


def _draw_particle_counts(fig: Figure, tables) -> None:
    ax = fig.subplots()
    for table in tables:
        steps = floats(table, "step")
        ax.plot(steps, floats(table, "mean_count"), linewidth=1.0,
                label=table.label())
        ax.fill_between(steps, floats(table, "min_count"),
                        floats(table, "max_count"), alpha=0.25)
    _finish(ax, tables, "step", "particles per step")


def _draw_state_trajectory(fig: Figure, tables) -> None:
    ax = fig.subplots()
    for table in tables:
        steps = floats(table, "step")
        ax.plot(steps, floats(table, "true_latent"), color="black",
                linewidth=0.9, label="true latent")
        ax.plot(steps, floats(table, "alive_mean"), linewidth=1.0,
                label="alive mean")
        ax.plot(steps, floats(table, "standard_mean"), linewidth=1.0,
                label="standard mean")
        _mark_outliers(ax, table)
    ax.set_xlabel("step")
    ax.set_ylabel("latent state")
    ax.legend(fontsize="small")


def _draw_pmmh_trace(fig: Figure, tables) -> None:
    fixed = {"iteration", "log_gamma_hat", "accepted", "trials"}
    params = [name for name in tables[0].header if name not in fixed]
    if not params:
        raise SchemaMismatch(
            f"{tables[0].path}: trace has no parameter columns",
            columns=sorted(fixed))
    axes = fig.subplots(len(params), 1, sharex=True, squeeze=False)[:, 0]
    for table in tables:
        iterations = floats(table, "iteration")
        for ax, name in zip(axes, params):
            ax.plot(iterations, floats(table, name), linewidth=0.6,
                    label=table.label())
            ax.set_ylabel(name)
    axes[-1].set_xlabel("iteration")
    if len(tables) > 1:
        axes[0].legend(fontsize="small")


def _draw_posterior_grid(fig: Figure, tables) -> None:
    table = _single_table(tables, "posterior_grid")
    ax = fig.subplots()
    positions = np.arange(table.n_rows)
    width = 0.38
    ax.bar(positions - width / 2, floats(table, "chain_frequency"), width,
           label="chain frequency")
    ax.bar(positions + width / 2, floats(table, "oracle_weight"), width,
           label="oracle weight")
    ax.set_xticks(positions)
    ax.set_xticklabels(strings(table, "grid_point"))
    ax.set_xlabel("grid point")
    ax.set_ylabel("posterior mass")
    ax.legend(fontsize="small")


def _draw_identities_table(fig: Figure, tables) -> None:
    table = _single_table(tables, "identities_table")
    ax = fig.subplots()
    positions = np.arange(table.n_rows)
    ax.errorbar(positions, floats(table, "mc_mean"),
                yerr=3.0 * floats(table, "std_error"), fmt="o", capsize=3,
                label="MC mean (3 SE bars)")
    ax.scatter(positions, floats(table, "exact_value"), marker="x",
               color="black", zorder=3, label="exact value")
    labels = [
        f"{kind} p={p} N={n}"
        for kind, p, n in zip(strings(table, "kind"), strings(table, "p"),
                              strings(table, "n_success"))
    ]
    ax.set_xticks(positions)
    ax.set_xticklabels(labels, rotation=60, ha="right", fontsize="x-small")
    ax.set_ylabel("identity value")
    ax.legend(fontsize="small")


def _draw_nc_scaling(fig: Figure, tables) -> None:
    ax = fig.subplots()
    for table in tables:
        ax.errorbar(floats(table, "n"), floats(table, "relative_mse"),
                    yerr=3.0 * floats(table, "std_error"), fmt="o-",
                    capsize=3, linewidth=1.0, label=table.label())
    ax.set_ylim(bottom=0.0)
    _finish(ax, tables, "horizon n", "relative mean squared error")


@dataclass(frozen=True)
class FamilySpec:
    """Required CSV columns plus the draw function for one family."""

    columns: tuple
    draw: Callable


FAMILIES = {
    "error_ratio": FamilySpec(
        ("step", "alive_l1", "standard_l1", "log_error_ratio"),
        _draw_error_ratio),
    "abs_error": FamilySpec(("step", "abs_error"), _draw_abs_error),
    "nc_trajectory": FamilySpec(
        ("step", "eps0_reference", "alive_log_nc", "standard_log_nc"),
        _draw_nc_trajectory),
    "nc_relvar": FamilySpec(
        ("step", "log_rel_variance", "jackknife_se_log", "replicates"),
        _draw_nc_relvar),
    "particle_counts": FamilySpec(
        ("step", "mean_count", "min_count", "max_count"),
        _draw_particle_counts),
    "state_trajectory": FamilySpec(
        ("step", "true_latent", "alive_mean", "standard_mean"),
        _draw_state_trajectory),
    "pmmh_trace": FamilySpec(
        ("iteration", "log_gamma_hat", "accepted", "trials"),
        _draw_pmmh_trace),
    "posterior_grid": FamilySpec(
        ("grid_point", "chain_frequency", "oracle_weight"),
        _draw_posterior_grid),
    "identities_table": FamilySpec(
        ("kind", "p", "n_success", "mc_mean", "std_error", "target",
         "exact_value", "error_in_se"),
        _draw_identities_table),
    "nc_scaling": FamilySpec(
        ("n", "n_alive", "relative_mse", "std_error"), _draw_nc_scaling),
}


def render_family(family: str, tables, out_path=None, size=(8.0, 5.0),
                  dpi: int = 100, title=None) -> Figure:
    """Render one figure family from parsed tables; return the Figure.

    Validates every table against the family's required columns first.
    When ``out_path`` is given the figure is also written there; the
    image pixel dimensions are size * dpi.
    """
    if family not in FAMILIES:
        raise ValueError(
            f"unknown family {family!r}; known: {sorted(FAMILIES)}")
    if not tables:
        raise SchemaMismatch("at least one input CSV is required")
    spec = FAMILIES[family]
    for table in tables:
        require_columns(table, spec.columns)
    fig = Figure(figsize=tuple(size), layout="tight")
    FigureCanvasAgg(fig)
    spec.draw(fig, tables)
    if title:
        fig.suptitle(title)
    if out_path is not None:
        fig.savefig(out_path, dpi=dpi)
    return fig

"""Shared fixture builders: synthetic CSVs matching the file contract."""

import pytest

SYNTHETIC = {
    "error_ratio": (
        {"family": "error_ratio", "epsilon": "5.0"},
        ["step", "alive_l1", "standard_l1", "log_error_ratio"],
        [[1, 0.5, 0.6, -0.18], [2, 0.4, 0.7, -0.55], [3, 0.45, 0.5, -0.1]],
    ),
    "abs_error": (
        {"family": "abs_error", "epsilon": "5.0", "outliers": "2;4"},
        ["step", "abs_error"],
        [[1, 0.5], [2, 0.4], [3, 0.6], [4, 0.3], [5, 0.2], [6, 0.25]],
    ),
    "nc_trajectory": (
        {"family": "nc_trajectory", "epsilon": "5.0"},
        ["step", "eps0_reference", "alive_log_nc", "standard_log_nc"],
        [[1, 0.0, 0.0, 0.0], [2, -1.1, -1.0, -1.2], [3, -2.3, -2.1, -2.6]],
    ),
    "nc_relvar": (
        {"family": "nc_relvar", "n": "3"},
        ["step", "log_rel_variance", "jackknife_se_log", "replicates"],
        [[1, "-inf", 0.0, 40], [2, -3.5, 0.2, 40], [3, -2.9, 0.25, 40]],
    ),
    "particle_counts": (
        {"family": "particle_counts", "series": "alive_trials"},
        ["step", "mean_count", "min_count", "max_count"],
        [[1, 55.2, 50, 70], [2, 61.0, 50, 90], [3, 58.4, 50, 81]],
    ),
    "state_trajectory": (
        {"family": "state_trajectory", "outliers": "1"},
        ["step", "true_latent", "alive_mean", "standard_mean"],
        [[1, 0.1, 0.2, 0.15], [2, -0.4, -0.3, -0.5], [3, 0.9, 0.8, 1.0]],
    ),
    "pmmh_trace": (
        {"family": "pmmh_trace"},
        ["iteration", "beta", "c", "log_gamma_hat", "accepted", "trials"],
        [[1, 0.5, 0.01, -42.0, 1, 300], [2, 0.5, 0.01, -42.0, 0, 280],
         [3, 0.7, 0.02, -40.8, 1, 350]],
    ),
    "posterior_grid": (
        {"family": "posterior_grid"},
        ["grid_point", "chain_frequency", "oracle_weight"],
        [[0.25, 0.1, 0.12], [0.5, 0.3, 0.28], [1.0, 0.4, 0.41],
         [2.0, 0.2, 0.19]],
    ),
    "identities_table": (
        {"family": "identities_table", "replicates": "1000"},
        ["kind", "p", "n_success", "mc_mean", "std_error", "target",
         "exact_value", "error_in_se"],
        [["single", 0.2, 2, 0.2003, 0.0004, 0.2, 0.2, 0.75],
         ["single", 0.5, 5, 0.4998, 0.0002, 0.5, 0.5, -1.0],
         ["pair", 0.3, 3, 0.0903, 0.0003, 0.09, 0.09, 0.2]],
    ),
    "nc_scaling": (
        {"family": "nc_scaling", "p0": "0.5"},
        ["n", "n_alive", "relative_mse", "std_error"],
        [[5, 100, 0.011, 0.0002], [10, 200, 0.013, 0.0002],
         [20, 400, 0.014, 0.0002]],
    ),
}


def render_lines(meta, header, rows):
    pairs = {**meta, "rows": len(rows)}
    lines = ["# " + " ".join(f"{k}={v}" for k, v in pairs.items())]
    lines.append(",".join(header))
    lines.extend(",".join(str(cell) for cell in row) for row in rows)
    return "\n".join(lines) + "\n"


@pytest.fixture
def make_csv(tmp_path):
    """Write a contract-conforming CSV; defaults come from SYNTHETIC."""

    counter = {"n": 0}

    def _make(family, meta=None, header=None, rows=None, name=None):
        base_meta, base_header, base_rows = SYNTHETIC[family]
        meta = base_meta if meta is None else meta
        header = base_header if header is None else header
        rows = base_rows if rows is None else rows
        counter["n"] += 1
        path = tmp_path / (name or f"{family}_{counter['n']}.csv")
        path.write_text(render_lines(meta, header, rows), encoding="utf-8")
        return path

    return _make

"""Report rendering: machine-readable JSON, delimited grids and bar-chart
figures for each model x metric grid."""

from __future__ import annotations

import json
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def format_value(value) -> str:
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def grid_to_tsv(grid: dict[str, dict[str, float]], columns: list[str],
                title: str) -> str:
    """One model-per-row grid as TSV with a comment header line."""
    lines = [f"# {title}", "model\t" + "\t".join(columns)]
    for model in grid:
        row = grid[model]
        lines.append(model + "\t" + "\t".join(format_value(row.get(c, ""))
                                              for c in columns))
    return "\n".join(lines) + "\n"


def write_report_json(report: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_report_tsv(report: dict, path) -> None:
    chunks = []
    for section, columns in (("similarity", None), ("ranking", None),
                             ("classification", None)):
        grid = report.get(section) or {}
        if not grid:
            continue
        columns = sorted({c for row in grid.values() for c in row})
        chunks.append(grid_to_tsv(grid, columns, f"{section} ({report['meta']['target']})"))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(chunks))


def render_grid_figure(grid: dict[str, dict[str, float]], title: str, path) -> None:
    """Grouped bar chart: one bar cluster per model, one bar per metric."""
    models = list(grid)
    columns = sorted({c for row in grid.values() for c in row})
    if not models or not columns:
        return
    width = 0.8 / len(columns)
    fig, ax = plt.subplots(figsize=(max(6.0, 1.2 * len(models)), 4.0))
    for j, col in enumerate(columns):
        xs = [i + j * width for i in range(len(models))]
        ys = [grid[m].get(col, 0.0) for m in models]
        ax.bar(xs, ys, width=width, label=col)
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(models))])
    ax.set_xticklabels(models, rotation=30, ha="right")
    ax.set_ylabel("score")
    ax.set_title(title)
    ax.legend(fontsize=8, ncol=min(3, len(columns)))
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)


def write_report(report: dict, out_dir) -> dict[str, str]:
    """Write report.json + report.tsv and a figure per populated grid;
    returns the paths written."""
    os.makedirs(out_dir, exist_ok=True)
    fig_dir = os.path.join(out_dir, "figures")
    os.makedirs(fig_dir, exist_ok=True)
    paths = {"json": os.path.join(out_dir, "report.json"),
             "tsv": os.path.join(out_dir, "report.tsv")}
    write_report_json(report, paths["json"])
    write_report_tsv(report, paths["tsv"])
    for section in ("similarity", "ranking", "classification"):
        grid = report.get(section) or {}
        if grid:
            fig_path = os.path.join(fig_dir, f"{section}.png")
            render_grid_figure(grid, f"{section} (target {report['meta']['target']})",
                               fig_path)
            paths[section] = fig_path
    return paths

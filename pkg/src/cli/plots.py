"""SVG renderings of the diagnostic panels from a report."""

import logging
from pathlib import Path
from typing import List

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from ..core.report import DiagnosticsReport, DirectionRecord  # noqa: E402

logger = logging.getLogger(__name__)

FIG_WIDTH = 2.6


def _angle_panel(ax, direction: DirectionRecord, space: str) -> None:
    xs = range(len(direction.blocks))
    for x, entry in zip(xs, direction.blocks):
        angle = entry.trait_angle if space == "trait" else entry.object_angle
        upper = entry.trait_upper if space == "trait" else entry.object_upper
        bound = entry.phi_hat if space == "trait" else entry.psi_hat
        theta0 = entry.theta0 if space == "trait" else entry.theta0_object
        if angle is None:
            continue
        ax.plot(x, angle, "o" if entry.included else "x", color="black")
        if upper is not None:
            ax.plot(x, min(upper, 90.0), "v", color="tab:red", markersize=4)
        if bound is not None:
            ax.hlines(bound, x - 0.3, x + 0.3, linestyles="dashed", color="tab:blue")
        if theta0 is not None:
            ax.hlines(theta0, x - 0.3, x + 0.3, linestyles="dashdot", color="tab:gray")
    ax.set_xticks(list(xs))
    ax.set_xticklabels([entry.block for entry in direction.blocks], rotation=45, fontsize=7)
    ax.set_ylim(0, 90)
    ax.set_title(f"{{{direction.collection}}} mode {direction.mode} ({space})", fontsize=8)


def plot_angles(report: DiagnosticsReport, out_dir: Path) -> List[Path]:
    """One SVG per direction: trait and object angles with their bound lines."""
    paths = []
    for direction in report.directions:
        fig, axes = plt.subplots(1, 2, figsize=(2 * FIG_WIDTH, FIG_WIDTH), sharey=True)
        _angle_panel(axes[0], direction, "trait")
        _angle_panel(axes[1], direction, "object")
        axes[0].set_ylabel("degrees")
        fig.tight_layout()
        path = out_dir / f"angles_{direction.collection.replace(',', '-')}_mode{direction.mode}.svg"
        fig.savefig(path)
        plt.close(fig)
        paths.append(path)
    return paths


def plot_enc_ect(report: DiagnosticsReport, out_dir: Path) -> Path:
    """ENC per direction and ECT per (direction, included block)."""
    fig, axes = plt.subplots(1, 2, figsize=(2 * FIG_WIDTH, FIG_WIDTH))
    labels = [f"{d.collection}#{d.mode}" for d in report.directions]
    axes[0].plot(range(len(labels)), [d.enc for d in report.directions], "o", color="black")
    if report.blocks:
        axes[0].axhline(report.blocks[0].n, linestyle="dashed", color="tab:gray")
    axes[0].set_title("ENC", fontsize=8)
    for x, direction in enumerate(report.directions):
        values = [b.ect for b in direction.blocks if b.ect is not None]
        axes[1].plot([x] * len(values), values, "o", color="black")
    axes[1].set_ylim(0, 100)
    axes[1].set_title("ECT (%)", fontsize=8)
    for ax in axes:
        ax.set_xticks(range(len(labels)))
        ax.set_xticklabels(labels, rotation=45, fontsize=7)
    fig.tight_layout()
    path = out_dir / "enc_ect.svg"
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_qq(report: DiagnosticsReport, out_dir: Path) -> List[Path]:
    """Observed against theoretical noise eigenvalues with the simulated envelope."""
    paths = []
    for record in report.qq:
        fig, ax = plt.subplots(figsize=(FIG_WIDTH, FIG_WIDTH))
        ax.fill_between(record.theoretical, record.env_min, record.env_max, color="tab:gray", alpha=0.3)
        ax.plot(record.theoretical, record.observed, ".", color="tab:blue", markersize=3, label="imputed")
        if record.naive is not None:
            ax.plot(record.theoretical, record.naive, ".", color="tab:red", markersize=3, label="naive")
        ax.set_xlabel("MP quantile", fontsize=8)
        ax.set_ylabel("eigenvalue", fontsize=8)
        ax.set_title(record.block, fontsize=8)
        ax.legend(fontsize=6)
        fig.tight_layout()
        path = out_dir / f"qq_{record.block}.svg"
        fig.savefig(path)
        plt.close(fig)
        paths.append(path)
    return paths


def render_report(report: DiagnosticsReport, out_dir: str) -> List[Path]:
    """Write every panel of the report into out_dir."""
    target = Path(out_dir)
    target.mkdir(parents=True, exist_ok=True)
    paths = plot_angles(report, target) + [plot_enc_ect(report, target)] + plot_qq(report, target)
    logger.info("Wrote %d plots to %s", len(paths), target)
    return paths

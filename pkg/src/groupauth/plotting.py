"""Figure rendering for simulation curves."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .privacy import INFO_LEAKAGE, PRIVACY_LEVEL, PrivacyCurve

_TITLES = {
    PRIVACY_LEVEL: ("Privacy level vs. compromised tags", "privacy level"),
    INFO_LEAKAGE: ("Information leakage vs. compromised tags", "leakage (bits)"),
}


def render_curve_figure(
    out_path: str | Path,
    proposed: PrivacyCurve,
    baseline: PrivacyCurve | None = None,
) -> Path:
    """Plot one metric's curve(s) against C and write a PNG."""
    title, ylabel = _TITLES[proposed.metric]
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    xs = [c for c, _ in proposed.points]
    ax.plot(xs, [v for _, v in proposed.points], marker="o", label="proposed scheme")
    if baseline is not None:
        ax.plot(
            [c for c, _ in baseline.points],
            [v for _, v in baseline.points],
            marker="s",
            linestyle="--",
            label="group-key baseline",
        )
    ax.set_xlabel("compromised tags C")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    out_path = Path(out_path)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def render_simulation_figures(
    out_dir: str | Path,
    proposed: tuple[PrivacyCurve, PrivacyCurve],
    baseline: tuple[PrivacyCurve, PrivacyCurve] | None = None,
    stem: str = "simulation",
) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    level_b, leak_b = baseline if baseline is not None else (None, None)
    return [
        render_curve_figure(out_dir / f"{stem}_privacy_level.png", proposed[0], level_b),
        render_curve_figure(out_dir / f"{stem}_info_leakage.png", proposed[1], leak_b),
    ]

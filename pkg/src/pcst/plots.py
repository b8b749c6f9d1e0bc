"""Figure emission for sweep results: RD curves and PSNR-vs-SNR curves.

Pure file output (SVG + PNG per figure); the plotted data always comes from
report records that are written alongside, so figures are reproducible from
the data files alone.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, stem: Path):
    stem.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(stem.with_suffix(".svg"))
    fig.savefig(stem.with_suffix(".png"), dpi=150)
    plt.close(fig)
    return [stem.with_suffix(".svg"), stem.with_suffix(".png")]


def plot_rd_curve(reports, stem, metric: str = "d1_psnr_db", baseline_reports=None):
    """Rate-distortion scatter/line: CBR on x, PSNR on y, grouped by lambda_id."""
    stem = Path(stem)
    fig, ax = plt.subplots(figsize=(5, 4))
    groups: dict = {}
    for r in reports:
        groups.setdefault(r.lambda_id or "pcst", []).append(r)
    for label, rs in sorted(groups.items()):
        rs = sorted(rs, key=lambda r: r.cbr_total)
        ax.plot([r.cbr_total for r in rs], [getattr(r, metric) for r in rs],
                marker="o", label=label)
    if baseline_reports:
        rs = sorted(baseline_reports, key=lambda r: r.cbr_total)
        ax.plot([r.cbr_total for r in rs], [getattr(r, metric) for r in rs],
                marker="s", linestyle="--", color="gray", label="sscc")
    ax.set_xlabel("CBR")
    ax.set_ylabel(metric.replace("_db", " (dB)").replace("_", "-"))
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    return _save(fig, stem)


def plot_psnr_vs_snr(reports, stem, metric: str = "d1_psnr_db", baseline_reports=None):
    """Quality over an SNR sweep at fixed rate, with optional SSCC overlay."""
    stem = Path(stem)
    fig, ax = plt.subplots(figsize=(5, 4))
    groups: dict = {}
    for r in reports:
        groups.setdefault(r.lambda_id or "pcst", []).append(r)
    for label, rs in sorted(groups.items()):
        rs = sorted(rs, key=lambda r: r.snr_db)
        ax.plot([r.snr_db for r in rs], [getattr(r, metric) for r in rs],
                marker="o", label=label)
    if baseline_reports:
        rs = sorted(baseline_reports, key=lambda r: r.snr_db)
        ax.plot([r.snr_db for r in rs], [getattr(r, metric) for r in rs],
                marker="s", linestyle="--", color="gray", label="sscc")
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel(metric.replace("_db", " (dB)").replace("_", "-"))
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    return _save(fig, stem)

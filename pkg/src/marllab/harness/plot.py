"""Self-contained SVG reward-curve plots (no external assets)."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .metrics import read_metrics

WIDTH, HEIGHT = 860, 520
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 20, 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#17becf")


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    return list(np.linspace(lo, hi, count))


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def emit_plot(metrics_paths: list[str | Path], out_path: str | Path) -> None:
    """One curve per input CSV plus a mean band across runs.

    A single input plots its own mean +- std band; multiple inputs (same
    evaluation grid) plot per-run polylines and the cross-run mean band.
    """
    runs = [read_metrics(p) for p in metrics_paths]
    if not runs:
        raise ValueError("no metrics files given")
    steps = [np.array([r["step"] for r in run]) for run in runs]
    means = [np.array([r["eval_return_mean"] for r in run]) for run in runs]
    stds = [np.array([r["eval_return_std"] for r in run]) for run in runs]
    for s in steps[1:]:
        if len(s) != len(steps[0]) or not np.array_equal(s, steps[0]):
            raise ValueError("metrics files have different evaluation grids")
    x = steps[0]
    if len(runs) == 1:
        band_mid, band_half = means[0], stds[0]
    else:
        stacked = np.stack(means)
        band_mid = stacked.mean(axis=0)
        band_half = stacked.std(axis=0)

    ylo = float(min((m - h).min() for m, h in [(band_mid, band_half)]
                    + [(m, np.zeros_like(m)) for m in means]))
    yhi = float(max((m + h).max() for m, h in [(band_mid, band_half)]
                    + [(m, np.zeros_like(m)) for m in means]))
    if yhi == ylo:
        yhi = ylo + 1.0
    pad = 0.05 * (yhi - ylo)
    ylo, yhi = ylo - pad, yhi + pad
    xlo, xhi = float(x.min()), float(x.max())
    if xhi == xlo:
        xhi = xlo + 1.0

    innerw = WIDTH - MARGIN_L - MARGIN_R
    innerh = HEIGHT - MARGIN_T - MARGIN_B

    def px(v: float) -> float:
        return MARGIN_L + (v - xlo) / (xhi - xlo) * innerw

    def py(v: float) -> float:
        return MARGIN_T + (yhi - v) / (yhi - ylo) * innerh

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{innerw}" '
        f'height="{innerh}" fill="none" stroke="#333"/>',
    ]
    for tx in _ticks(xlo, xhi):
        parts.append(f'<line x1="{px(tx):.1f}" y1="{HEIGHT - MARGIN_B}" '
                     f'x2="{px(tx):.1f}" y2="{HEIGHT - MARGIN_B + 5}" stroke="#333"/>')
        parts.append(f'<text x="{px(tx):.1f}" y="{HEIGHT - MARGIN_B + 18}" '
                     f'font-size="11" text-anchor="middle">{_fmt(tx)}</text>')
    for ty in _ticks(ylo, yhi):
        parts.append(f'<line x1="{MARGIN_L - 5}" y1="{py(ty):.1f}" '
                     f'x2="{MARGIN_L}" y2="{py(ty):.1f}" stroke="#333"/>')
        parts.append(f'<text x="{MARGIN_L - 8}" y="{py(ty):.1f}" font-size="11" '
                     f'text-anchor="end" dominant-baseline="middle">{_fmt(ty)}</text>')
    parts.append(f'<text x="{MARGIN_L + innerw / 2:.0f}" y="{HEIGHT - 10}" '
                 f'font-size="13" text-anchor="middle">environment steps</text>')
    parts.append(f'<text x="16" y="{MARGIN_T + innerh / 2:.0f}" font-size="13" '
                 f'text-anchor="middle" transform="rotate(-90 16 '
                 f'{MARGIN_T + innerh / 2:.0f})">evaluation return</text>')

    upper = [(px(a), py(b + c)) for a, b, c in zip(x, band_mid, band_half)]
    lower = [(px(a), py(b - c)) for a, b, c in zip(x, band_mid, band_half)]
    band_pts = " ".join(f"{a:.1f},{b:.1f}" for a, b in upper + lower[::-1])
    parts.append(f'<polygon points="{band_pts}" fill="#1f77b4" '
                 f'fill-opacity="0.15" stroke="none"/>')

    for k, m in enumerate(means):
        color = PALETTE[k % len(PALETTE)]
        if len(x) == 1:
            parts.append(f'<circle cx="{px(x[0]):.1f}" cy="{py(m[0]):.1f}" '
                         f'r="4" fill="{color}"/>')
        else:
            pts = " ".join(f"{px(a):.1f},{py(b):.1f}" for a, b in zip(x, m))
            parts.append(f'<polyline points="{pts}" fill="none" '
                         f'stroke="{color}" stroke-width="1.6"/>')
    if len(runs) > 1 and len(x) > 1:
        pts = " ".join(f"{px(a):.1f},{py(b):.1f}" for a, b in zip(x, band_mid))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="#000" '
                     f'stroke-width="2.2" stroke-dasharray="6,3"/>')
    parts.append("</svg>")
    Path(out_path).write_text("\n".join(parts), encoding="utf-8")

"""Dependency-free SVG scatter plots of accuracy difference against log-DTSAE."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .analyze import GREEN_LIMIT, RED_LIMIT, MetricRecord, gpr_fit, gpr_predict

BAND_COLORS = {"green": "#2e8b57", "blue": "#1f5fbf", "red": "#c0392b"}
GUIDANCE_LIMIT = 3.5

W, H = 640, 420
ML, MR, MT, MB = 70, 20, 40, 55


def _ticks(lo, hi, n=5):
    return np.linspace(lo, hi, n)


def scatter_svg(records: list[MetricRecord], device: str, trend: dict | None = None) -> str:
    """One marker per record, the GP mean curve and the band-level crossings."""
    xs = np.array([r.log_dtsae for r in records], dtype=float)
    ys = np.array([r.acc_diff for r in records], dtype=float)
    if trend is not None:
        x_lo, x_hi = trend["x_range"]
    elif len(xs):
        pad = 0.05 * (float(np.ptp(xs)) or 1.0)
        x_lo, x_hi = float(xs.min()) - pad, float(xs.max()) + pad
    else:
        x_lo, x_hi = 0.0, 1.0
    y_hi = max(0.1, float(ys.max()) * 1.1 if len(ys) else 0.1)
    y_lo = 0.0

    def px(x):
        return ML + (x - x_lo) / (x_hi - x_lo) * (W - ML - MR)

    def py(y):
        return H - MB - (y - y_lo) / (y_hi - y_lo) * (H - MT - MB)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2:.1f}" y="22" text-anchor="middle" font-size="15" font-family="sans-serif">'
        f"{escape(device)}: accuracy difference vs log-DTSAE</text>",
        f'<line class="axis" x1="{ML}" y1="{H - MB}" x2="{W - MR}" y2="{H - MB}" stroke="black"/>',
        f'<line class="axis" x1="{ML}" y1="{MT}" x2="{ML}" y2="{H - MB}" stroke="black"/>',
    ]
    for t in _ticks(x_lo, x_hi):
        out.append(f'<line x1="{px(t):.2f}" y1="{H - MB}" x2="{px(t):.2f}" y2="{H - MB + 5}" stroke="black"/>')
        out.append(f'<text x="{px(t):.2f}" y="{H - MB + 18}" text-anchor="middle" font-size="11" '
                   f'font-family="sans-serif">{t:.2f}</text>')
    for t in _ticks(y_lo, y_hi):
        out.append(f'<line x1="{ML - 5}" y1="{py(t):.2f}" x2="{ML}" y2="{py(t):.2f}" stroke="black"/>')
        out.append(f'<text x="{ML - 8}" y="{py(t) + 4:.2f}" text-anchor="end" font-size="11" '
                   f'font-family="sans-serif">{t:.3f}</text>')
    out.append(f'<text x="{W / 2:.1f}" y="{H - 12}" text-anchor="middle" font-size="12" '
               'font-family="sans-serif">log-DTSAE</text>')
    out.append(f'<text x="16" y="{H / 2:.1f}" text-anchor="middle" font-size="12" font-family="sans-serif" '
               f'transform="rotate(-90 16 {H / 2:.1f})">|acc_sim - acc_noisy|</text>')
    for level in (GREEN_LIMIT, RED_LIMIT):
        if level <= y_hi:
            out.append(f'<line class="level" x1="{ML}" y1="{py(level):.2f}" x2="{W - MR}" y2="{py(level):.2f}" '
                       'stroke="#999" stroke-dasharray="2,3"/>')
    if trend is not None:
        gp = trend["gp"]
        model = gpr_fit(gp["x"], gp["y"], (gp["length_scale"], gp["signal"], gp["noise"]))
        grid = np.linspace(x_lo, x_hi, 200)
        mean, _ = gpr_predict(model, grid)
        pts = " ".join(f"{px(x):.2f},{py(min(max(m, y_lo), y_hi)):.2f}" for x, m in zip(grid, mean))
        out.append(f'<polyline class="gp-mean" points="{pts}" fill="none" stroke="#3cb371" stroke-width="2"/>')
        for level, xc in sorted(trend["crossings"].items()):
            if xc is None:
                continue
            color = BAND_COLORS["green"] if float(level) == GREEN_LIMIT else BAND_COLORS["red"]
            out.append(f'<line class="crossing" data-level="{level}" data-x="{xc!r}" x1="{px(xc):.2f}" '
                       f'y1="{MT}" x2="{px(xc):.2f}" y2="{H - MB}" stroke="{color}" stroke-dasharray="6,4"/>')
    for r in records:
        out.append(
            f'<circle class="marker" data-model="{escape(r.model_id)}" cx="{px(r.log_dtsae):.2f}" '
            f'cy="{py(r.acc_diff):.2f}" r="4" fill="{BAND_COLORS[r.band]}"/>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def guidance_violations(records: list[MetricRecord], limit: float = GUIDANCE_LIMIT) -> list[MetricRecord]:
    return [r for r in records if r.log_dtsae > limit]


def summary_text(records: list[MetricRecord], trends: dict, limit: float = GUIDANCE_LIMIT) -> str:
    lines = ["Robustness summary", ""]
    for device in sorted({r.device for r in records}):
        rec = [r for r in records if r.device == device]
        counts = {b: sum(1 for r in rec if r.band == b) for b in ("green", "blue", "red")}
        lines.append(f"[{device}] models={len(rec)} green={counts['green']} blue={counts['blue']} red={counts['red']}")
        t = trends.get(device)
        if t:
            lines.append(f"  spearman(log_dtsae, acc_diff) = {t['spearman']:.4f}")
            for level, xc in sorted(t["crossings"].items()):
                lines.append(f"  GP crossing of {level}: {'none' if xc is None else f'{xc:.4f}'}")
        bad = guidance_violations(rec, limit)
        lines.append(f"  log-DTSAE above {limit}: {len(bad)}")
        for r in sorted(bad, key=lambda r: -r.log_dtsae):
            lines.append(f"    {r.model_id} log_dtsae={r.log_dtsae:.4f} acc_diff={r.acc_diff:.4f} band={r.band}")
        lines.append("")
    return "\n".join(lines)

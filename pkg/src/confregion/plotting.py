"""CRC plot rendering.

Two renderers share one layout: confidence ``1 - delta`` on the horizontal
axis, fraction on the vertical axis, the calibration diagonal, a dashed error
line and a solid width line.  :func:`crc_svg` writes a small self-contained
SVG with exactly three ``<polyline>`` elements; :func:`save_crc_figure` draws
the same picture with matplotlib.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

from .crc import CalibrationVerdict, CrcCurve

_W, _H = 480, 400
_LEFT, _RIGHT, _TOP, _BOTTOM = 60, 20, 30, 50


def _xy(conf: float, frac: float) -> tuple[float, float]:
    x = _LEFT + conf * (_W - _LEFT - _RIGHT)
    y = _TOP + (1.0 - frac) * (_H - _TOP - _BOTTOM)
    return x, y


def _points(pairs) -> str:
    return " ".join(f"{x:.3f},{y:.3f}" for x, y in (_xy(c, f) for c, f in pairs))


def crc_svg(curve: CrcCurve, title: str = "CRC plot", verdict: CalibrationVerdict | None = None) -> str:
    conf = [1.0 - d for d in curve.deltas]
    x0, y0 = _xy(0.0, 0.0)
    x1, y1 = _xy(1.0, 1.0)
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<g class="axes" stroke="black" stroke-width="1">'
        f'<line x1="{x0:.3f}" y1="{y0:.3f}" x2="{x1:.3f}" y2="{y0:.3f}"/>'
        f'<line x1="{x0:.3f}" y1="{y0:.3f}" x2="{x0:.3f}" y2="{y1:.3f}"/>',
    ]
    for t in (0.0, 0.25, 0.5, 0.75, 1.0):
        tx, _ = _xy(t, 0.0)
        _, ty = _xy(0.0, t)
        parts.append(f'<line x1="{tx:.3f}" y1="{y0:.3f}" x2="{tx:.3f}" y2="{y0 + 5:.3f}"/>')
        parts.append(f'<line x1="{x0 - 5:.3f}" y1="{ty:.3f}" x2="{x0:.3f}" y2="{ty:.3f}"/>')
    parts.append("</g>")
    parts.append('<g class="labels" font-family="sans-serif" font-size="11" fill="black">')
    for t in (0.0, 0.25, 0.5, 0.75, 1.0):
        tx, _ = _xy(t, 0.0)
        _, ty = _xy(0.0, t)
        parts.append(f'<text x="{tx:.3f}" y="{y0 + 18:.3f}" text-anchor="middle">{t:g}</text>')
        parts.append(f'<text x="{x0 - 8:.3f}" y="{ty + 4:.3f}" text-anchor="end">{t:g}</text>')
    parts.append(f'<text x="{(x0 + x1) / 2:.3f}" y="{_H - 10}" text-anchor="middle">confidence level (1 - delta)</text>')
    parts.append(f'<text x="15" y="{(y0 + y1) / 2:.3f}" text-anchor="middle" '
                 f'transform="rotate(-90 15 {(y0 + y1) / 2:.3f})">fraction of examples / labels</text>')
    heading = escape(title)
    if verdict is not None:
        heading += escape(f"  (err above {verdict.err_above_area:.3g}, width {verdict.avg_width_area:.3g})")
    parts.append(f'<text x="{(x0 + x1) / 2:.3f}" y="18" text-anchor="middle">{heading}</text>')
    parts.append("</g>")
    parts.append(f'<polyline class="diagonal" fill="none" stroke="gray" stroke-width="1" '
                 f'points="{_points([(0.0, 1.0), (1.0, 0.0)])}"/>')
    parts.append(f'<polyline class="err" fill="none" stroke="black" stroke-width="1.5" stroke-dasharray="6,4" '
                 f'points="{_points(zip(conf, curve.err))}"/>')
    parts.append(f'<polyline class="unc" fill="none" stroke="black" stroke-width="1.5" '
                 f'points="{_points(zip(conf, curve.unc))}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def save_crc_figure(curve: CrcCurve, target, title: str = "CRC plot",
                    verdict: CalibrationVerdict | None = None):
    """Render the CRC plot as PNG with matplotlib (Agg backend).

    ``target`` is a path or a binary file object.  PNG metadata is stripped so
    identical curves give identical bytes.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    conf = [1.0 - d for d in curve.deltas]
    fig, ax = plt.subplots(figsize=(4.8, 4.0), dpi=100)
    ax.plot([0, 1], [1, 0], color="0.6", linewidth=1)
    ax.plot(conf, curve.err, "k--", linewidth=1.5, label="error fraction")
    ax.plot(conf, curve.unc, "k-", linewidth=1.5, label="avg region width")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_xlabel("confidence level (1 - delta)")
    ax.set_ylabel("fraction of examples / labels")
    ax.set_title(title, fontsize=10)
    if verdict is not None:
        ax.text(0.02, 0.02, f"err above {verdict.err_above_area:.3g}\nwidth area {verdict.avg_width_area:.3g}",
                transform=ax.transAxes, fontsize=8, va="bottom")
    ax.legend(loc="upper left", fontsize=8, frameon=False)
    fig.tight_layout()
    try:
        fig.savefig(target, format="png", metadata={"Software": None})
    finally:
        plt.close(fig)
    return target

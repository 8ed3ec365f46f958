"""Small deterministic SVG writers for diagnostic plots (CSV stays authoritative)."""

from __future__ import annotations

import math
from html import escape

import numpy as np

W, H = 480, 360
PAD = 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def _f(v: float) -> str:
    return f"{v:.2f}"


def _doc(body: list[str], title: str, w: int = W, h: int = H) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" '
        'font-family="sans-serif" font-size="11">'
    )
    t = f'<text x="{w / 2:.1f}" y="16" text-anchor="middle" font-size="13">{escape(title)}</text>'
    return "\n".join([head, f'<rect width="{w}" height="{h}" fill="white"/>', t, *body, "</svg>"]) + "\n"


def _colour(v: float) -> str:
    """White to dark blue for v in [0, 1]."""
    v = min(max(v, 0.0), 1.0)
    r = int(round(255 * (1 - 0.85 * v)))
    g = int(round(255 * (1 - 0.6 * v)))
    b = int(round(255 * (1 - 0.2 * v)))
    return f"#{r:02x}{g:02x}{b:02x}"


def _span(a):
    a = np.asarray(a, dtype=float)
    a = a[np.isfinite(a)]
    if a.size == 0:
        return 0.0, 1.0
    lo, hi = float(a.min()), float(a.max())
    if hi == lo:
        hi = lo + (abs(lo) or 1.0)
    return lo, hi


def line_plot(x, series: dict, title: str = "", xlabel: str = "", ylabel: str = "") -> str:
    """One polyline per named series over a shared x."""
    x = np.asarray(x, dtype=float)
    x0, x1 = _span(x)
    y0, y1 = _span(np.concatenate([np.asarray(v, dtype=float).ravel() for v in series.values()]) if series else [0])
    sx = lambda v: PAD + (v - x0) / (x1 - x0) * (W - 2 * PAD)  # noqa: E731
    sy = lambda v: H - PAD - (v - y0) / (y1 - y0) * (H - 2 * PAD)  # noqa: E731
    body = [f'<rect x="{PAD}" y="{PAD}" width="{W - 2 * PAD}" height="{H - 2 * PAD}" fill="none" stroke="black"/>']
    for i, (name, y) in enumerate(series.items()):
        y = np.asarray(y, dtype=float)
        pts = " ".join(f"{_f(sx(a))},{_f(sy(b))}" for a, b in zip(x, y) if math.isfinite(b))
        c = PALETTE[i % len(PALETTE)]
        body.append(f'<polyline points="{pts}" fill="none" stroke="{c}" stroke-width="1.2"/>')
        body.append(f'<text x="{W - PAD + 4}" y="{PAD + 14 * i + 10}" fill="{c}">{escape(str(name))}</text>')
    body += _axes(x0, x1, y0, y1, xlabel, ylabel)
    return _doc(body, title, W + 80)


def _axes(x0, x1, y0, y1, xlabel, ylabel) -> list[str]:
    return [
        f'<text x="{PAD}" y="{H - PAD + 14}">{x0:.4g}</text>',
        f'<text x="{W - PAD}" y="{H - PAD + 14}" text-anchor="end">{x1:.4g}</text>',
        f'<text x="{PAD - 4}" y="{H - PAD}" text-anchor="end">{y0:.4g}</text>',
        f'<text x="{PAD - 4}" y="{PAD + 4}" text-anchor="end">{y1:.4g}</text>',
        f'<text x="{W / 2:.1f}" y="{H - 12}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="14" y="{H / 2:.1f}" transform="rotate(-90 14 {H / 2:.1f})" text-anchor="middle">{escape(ylabel)}</text>',
    ]


def heat_map(x, y, Z, ridge=None, title: str = "", xlabel: str = "", ylabel: str = "") -> str:
    """Cells ``Z[i, j]`` at ``(x[j], y[i])`` with an optional ridge ``x`` per row."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    Z = np.asarray(Z, dtype=float)
    z0, z1 = _span(Z)
    cw = (W - 2 * PAD) / max(len(x), 1)
    ch = (H - 2 * PAD) / max(len(y), 1)
    body = []
    for i in range(len(y)):
        for j in range(len(x)):
            v = Z[i, j]
            fill = "#cccccc" if not math.isfinite(v) else _colour((v - z0) / (z1 - z0))
            body.append(
                f'<rect x="{_f(PAD + j * cw)}" y="{_f(H - PAD - (i + 1) * ch)}" width="{_f(cw)}" height="{_f(ch)}" fill="{fill}"/>'
            )
    if ridge is not None:
        pts = []
        for i, r in enumerate(np.asarray(ridge, dtype=float)):
            if math.isfinite(r):
                j = int(np.argmin(np.abs(x - r)))
                pts.append(f"{_f(PAD + (j + 0.5) * cw)},{_f(H - PAD - (i + 0.5) * ch)}")
        body.append(f'<polyline points="{" ".join(pts)}" fill="none" stroke="#d62728" stroke-width="2"/>')
    body += _axes(x[0] if len(x) else 0, x[-1] if len(x) else 1, y[0] if len(y) else 0, y[-1] if len(y) else 1, xlabel, ylabel)
    return _doc(body, title)


def _square_grid(labels, cell) -> tuple[list[str], float]:
    n = len(labels)
    size = (min(W, H) - 2 * PAD) / max(n, 1)
    body = []
    for i, lab in enumerate(labels):
        body.append(f'<text x="{PAD - 4}" y="{_f(PAD + (i + 0.6) * size)}" text-anchor="end">{escape(str(lab))}</text>')
        body.append(
            f'<text x="{_f(PAD + (i + 0.5) * size)}" y="{PAD - 4}" text-anchor="start" '
            f'transform="rotate(-45 {_f(PAD + (i + 0.5) * size)} {PAD - 4})">{escape(str(lab))}</text>'
        )
    for i in range(n):
        for j in range(n):
            body.append(cell(i, j, PAD + j * size, PAD + i * size, size))
    return body, size


def hinton(labels, r, title: str = "") -> str:
    """Squares with area proportional to ``|r|``; filled for positive, outlined for negative."""
    r = np.asarray(r, dtype=float)

    def cell(i, j, x, y, s):
        v = r[i, j]
        side = s * math.sqrt(min(abs(v), 1.0)) * 0.9
        off = (s - side) / 2
        style = 'fill="#333333"' if v >= 0 else 'fill="white" stroke="#333333"'
        return f'<rect x="{_f(x + off)}" y="{_f(y + off)}" width="{_f(side)}" height="{_f(side)}" {style}/>'

    body, _ = _square_grid(labels, cell)
    return _doc(body, title, W + 120, H + 120)


def matrix_map(labels, M, title: str = "", lo: float = 0.0, hi: float = 1.0) -> str:
    """Colour-coded square matrix (e.g. phase-locking values) with printed entries."""
    M = np.asarray(M, dtype=float)

    def cell(i, j, x, y, s):
        v = M[i, j]
        return (
            f'<rect x="{_f(x)}" y="{_f(y)}" width="{_f(s)}" height="{_f(s)}" fill="{_colour((v - lo) / (hi - lo))}" stroke="white"/>'
            f'<text x="{_f(x + s / 2)}" y="{_f(y + s / 2 + 4)}" text-anchor="middle">{v:.2f}</text>'
        )

    body, _ = _square_grid(labels, cell)
    return _doc(body, title)


def mode_sketch(plate, modes, title: str = "") -> str:
    """Each mode as a top view of the plate with vertical-motion arrows at the springs."""
    n = len(modes)
    pw = 150
    body = []
    xs = [s[0] for s in plate.springs]
    ys = [s[1] for s in plate.springs]
    ext = max(max(map(abs, xs)), max(map(abs, ys)), 1e-9)
    scale = 50 / ext
    for k in range(n):
        m = modes[k]
        cx = 20 + pw * k + pw / 2
        cy = 120
        body.append(f'<rect x="{_f(cx - ext * scale)}" y="{_f(cy - ext * scale * 0.6)}" width="{_f(2 * ext * scale)}" height="{_f(1.2 * ext * scale)}" fill="#eeeeee" stroke="black"/>')
        disp = np.array([plate.lever(i) @ m.shape for i in range(len(plate.springs))])
        dmax = max(float(np.abs(disp).max()), 1e-12)
        for (x, y, _), d in zip(plate.springs, disp):
            px, py = cx + x * scale, cy - y * scale * 0.6
            L = 35 * d / dmax
            c = "#d62728" if d >= 0 else "#1f77b4"
            body.append(f'<line x1="{_f(px)}" y1="{_f(py)}" x2="{_f(px)}" y2="{_f(py - L)}" stroke="{c}" stroke-width="2"/>')
            body.append(f'<circle cx="{_f(px)}" cy="{_f(py - L)}" r="3" fill="{c}"/>')
        body.append(f'<text x="{_f(cx)}" y="200" text-anchor="middle">{escape(m.label.value)}</text>')
        body.append(f'<text x="{_f(cx)}" y="215" text-anchor="middle">{m.omega / (2 * math.pi):.3g} Hz</text>')
    return _doc(body, title, 40 + pw * n, 240)


def trajectory_plot(paths: dict, title: str = "") -> str:
    """Planar paths ``{name: (n, 2) array}`` on equal axes."""
    allp = np.concatenate([np.asarray(p, dtype=float) for p in paths.values()])
    x0, x1 = _span(allp[:, 0])
    y0, y1 = _span(allp[:, 1])
    s = min((W - 2 * PAD) / (x1 - x0), (H - 2 * PAD) / (y1 - y0))
    body = []
    for i, (name, p) in enumerate(paths.items()):
        p = np.asarray(p, dtype=float)
        step = max(1, len(p) // 600)
        pts = " ".join(f"{_f(PAD + (a - x0) * s)},{_f(H - PAD - (b - y0) * s)}" for a, b in p[::step])
        c = PALETTE[i % len(PALETTE)]
        body.append(f'<polyline points="{pts}" fill="none" stroke="{c}" stroke-width="1.2"/>')
        body.append(f'<text x="{W - PAD + 4}" y="{PAD + 14 * i + 10}" fill="{c}">{escape(str(name))}</text>')
    return _doc(body, title, W + 80)

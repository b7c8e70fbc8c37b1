"""CSV and SVG writers for run series."""
from __future__ import annotations

import math

from .diagnostics import COLUMNS, RunSeries


def _fmt(value) -> str:
    if isinstance(value, int):
        return str(value)
    return repr(float(value))  # shortest round-trip representation


def write_csv(series: RunSeries, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(COLUMNS) + "\n")
        for rec in series.records:
            fh.write(",".join(_fmt(getattr(rec, c)) for c in COLUMNS) + "\n")


def read_csv(path: str) -> dict[str, list[float]]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        cols: dict[str, list[float]] = {h: [] for h in header}
        for line in fh:
            for h, v in zip(header, line.strip().split(",")):
                cols[h].append(float(v))
    return cols


def svg_chart(t, H, title: str = "relative entropy", width: int = 640, height: int = 400) -> str:
    """Line chart of ``H`` against ``t`` with a logarithmic vertical axis."""
    pts = [(float(a), float(b)) for a, b in zip(t, H) if b > 0 and math.isfinite(b)]
    ml, mr, mt, mb = 70, 20, 30, 45
    pw, ph = width - ml - mr, height - mt - mb
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13">{title}</text>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    if pts:
        t0, t1 = pts[0][0], pts[-1][0]
        if t1 == t0:
            t1 = t0 + 1.0
        lo = math.floor(math.log10(min(p[1] for p in pts)))
        hi = math.ceil(math.log10(max(p[1] for p in pts)))
        if hi == lo:
            hi = lo + 1

        def sx(tv):
            return ml + (tv - t0) / (t1 - t0) * pw

        def sy(hv):
            return mt + (hi - math.log10(hv)) / (hi - lo) * ph

        step = max(1, (hi - lo) // 10)
        for e in range(lo, hi + 1, step):
            y = mt + (hi - e) / (hi - lo) * ph
            parts.append(f'<line x1="{ml}" y1="{y:.2f}" x2="{ml + pw}" y2="{y:.2f}" stroke="#ddd"/>')
            parts.append(f'<text x="{ml - 6}" y="{y + 4:.2f}" text-anchor="end">1e{e}</text>')
        for k in range(6):
            tv = t0 + k * (t1 - t0) / 5
            x = sx(tv)
            parts.append(f'<text x="{x:.2f}" y="{mt + ph + 16}" text-anchor="middle">{tv:.4g}</text>')
        path = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in pts)
        parts.append(f'<polyline fill="none" stroke="#1f77b4" stroke-width="1.5" points="{path}"/>')
    parts.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 8}" text-anchor="middle">t</text>')
    parts.append(
        f'<text x="16" y="{mt + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {mt + ph / 2:.1f})">H (log scale)</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg(series: RunSeries, path: str, title: str = "relative entropy") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(svg_chart(series.column("t"), series.column("H"), title))

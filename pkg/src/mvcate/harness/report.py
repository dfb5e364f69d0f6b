"""Markdown tables and SVG line charts from results."""

from __future__ import annotations

from html import escape

import numpy as np

from .config import KNOWN_LEARNERS
from .run import ExperimentResult

TIE_TOLERANCE = 1e-12
PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


def _order(values, field: str) -> list:
    vals = set(values)
    if field == "learner":
        known = [t for t in KNOWN_LEARNERS if t in vals]
        return known + sorted(vals - set(known))
    return sorted(vals)


def cell_means(result: ExperimentResult, keys: tuple[str, ...]) -> dict:
    """Arithmetic mean of mPEHE over successful rows sharing ``keys``."""
    groups: dict = {}
    for r in result.rows:
        if r.status == "ok" and np.isfinite(r.mpehe):
            groups.setdefault(tuple(getattr(r, k) for k in keys), []).append(r.mpehe)
    return {k: float(np.mean(v)) for k, v in groups.items()}


def _fmt(v: float) -> str:
    return f"{v:.3g}" if abs(v) >= 1e-3 or v == 0 else f"{v:.2e}"


def emit_table(result: ExperimentResult, group_by: str = "learner", column: str = "base") -> str:
    """Mean mPEHE with ``group_by`` values as rows and ``column`` values as columns.

    The smallest entry in each column is bolded, along with every entry
    within 1e-12 of it. Other varying fields (scenario, K) split the output
    into separate tables.
    """
    if not result.rows:
        raise ValueError("no results to tabulate")
    split_fields = [f for f in ("scenario", "K") if f not in (group_by, column)]
    means = cell_means(result, tuple(split_fields) + (group_by, column))
    blocks = []
    splits = sorted({k[: len(split_fields)] for k in means})
    for split in splits:
        sub = {k[len(split_fields):]: v for k, v in means.items() if k[: len(split_fields)] == split}
        rows = _order({k[0] for k in sub}, group_by)
        cols = _order({k[1] for k in sub}, column)
        best = {c: min(v for (r, cc), v in sub.items() if cc == c) for c in cols}
        lines = []
        if len(splits) > 1:
            label = ", ".join(f"{f} = {v}" for f, v in zip(split_fields, split))
            lines.append(f"### {label}\n")
        lines.append("| " + " | ".join([group_by] + [str(c) for c in cols]) + " |")
        lines.append("|" + "---|" * (len(cols) + 1))
        for r in rows:
            cells = []
            for c in cols:
                v = sub.get((r, c))
                if v is None:
                    cells.append("")
                elif v - best[c] <= TIE_TOLERANCE:
                    cells.append(f"**{_fmt(v)}**")
                else:
                    cells.append(_fmt(v))
            lines.append("| " + " | ".join([str(r)] + cells) + " |")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def emit_plot(result: ExperimentResult, width: int = 640, height: int = 400) -> str:
    """SVG line chart of mean mPEHE against K, one series per learner (and base)."""
    means = cell_means(result, ("learner", "base", "K"))
    if not means:
        raise ValueError("no results to plot")
    bases = sorted({k[1] for k in means})
    series: dict = {}
    for (learner, base, K), v in means.items():
        label = learner if len(bases) == 1 else f"{learner} ({base})"
        series.setdefault((learner, base, label), []).append((K, v))
    keys = sorted(series, key=lambda k: (KNOWN_LEARNERS.index(k[0]) if k[0] in KNOWN_LEARNERS else 99, k[1]))

    Ks = sorted({k[2] for k in means})
    ys = list(means.values())
    x_lo, x_hi = min(Ks), max(Ks)
    if x_lo == x_hi:
        x_lo, x_hi = x_lo - 1, x_hi + 1
    y_lo, y_hi = 0.0, max(ys) * 1.1 if max(ys) > 0 else 1.0
    left, right, top, bottom = 60, 130, 20, 45
    pw, ph = width - left - right, height - top - bottom

    def sx(x):
        return left + (x - x_lo) / (x_hi - x_lo) * pw

    def sy(y):
        return top + ph - (y - y_lo) / (y_hi - y_lo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for K in Ks:
        x = sx(K)
        out.append(f'<line x1="{x:.1f}" y1="{top + ph}" x2="{x:.1f}" y2="{top + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{x:.1f}" y="{top + ph + 16}" text-anchor="middle">{K}</text>')
    for y in np.linspace(y_lo, y_hi, 5):
        out.append(f'<line x1="{left - 4}" y1="{sy(y):.1f}" x2="{left}" y2="{sy(y):.1f}" stroke="black"/>')
        out.append(f'<text x="{left - 6}" y="{sy(y) + 4:.1f}" text-anchor="end">{y:.3g}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{height - 8}" text-anchor="middle">K</text>')
    out.append(
        f'<text x="14" y="{top + ph / 2}" text-anchor="middle" '
        f'transform="rotate(-90 14 {top + ph / 2})">mean mPEHE</text>'
    )
    for i, key in enumerate(keys):
        color = PALETTE[i % len(PALETTE)]
        pts = sorted(series[key])
        coords = " ".join(f"{sx(K):.1f},{sy(v):.1f}" for K, v in pts)
        label = escape(key[2])
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}"><title>{label}</title></polyline>')
        for K, v in pts:
            out.append(f'<circle cx="{sx(K):.1f}" cy="{sy(v):.1f}" r="3" fill="{color}"/>')
        ly = top + 14 * i + 6
        out.append(f'<line x1="{left + pw + 10}" y1="{ly}" x2="{left + pw + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 34}" y="{ly + 4}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"

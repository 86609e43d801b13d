"""Write an ExperimentReport as CSV tables, SVG figures and a JSON sidecar.

Everything written here is a pure function of the report, so re-rendering
produces byte-identical files. Wall-clock timings are only written when
asked for, since they differ from run to run.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .experiments import ExperimentReport

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]


def fmt(v) -> str:
    """Six significant digits, ``.`` decimal separator."""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6g}"
    return str(v)


def _csv_text(rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\r\n")
    for row in rows:
        wr.writerow([fmt(c) for c in row])
    return buf.getvalue()


def _write(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def _flatten(metrics: dict, prefix="") -> list:
    out = []
    for key in sorted(metrics):
        val = metrics[key]
        name = f"{prefix}{key}"
        if isinstance(val, dict):
            out.extend(_flatten(val, name + "."))
        else:
            out.append((name, val))
    return out


# -- SVG ------------------------------------------------------------------------

def _n(v) -> str:
    return f"{v:.2f}"


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def line_plot_svg(title, x, series: dict, x_label="", y_label="", width=640, height=400) -> str:
    left, right, top, bottom = 60, 150, 40, 50
    pw, ph = width - left - right, height - top - bottom
    xs = [float(v) for v in x]
    ys = [float(v) for vals in series.values() for v in vals if np.isfinite(v)]
    x0, x1 = (min(xs), max(xs)) if xs else (0.0, 1.0)
    y0, y1 = (min(ys), max(ys)) if ys else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5

    def px(v):
        return left + (v - x0) / (x1 - x0) * pw

    def py(v):
        return top + ph - (v - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{_n(left + pw / 2)}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{_n(px(t))}" y1="{top + ph}" x2="{_n(px(t))}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{_n(px(t))}" y="{top + ph + 18}" text-anchor="middle">{fmt(round(t, 4))}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<line x1="{left - 5}" y1="{_n(py(t))}" x2="{left}" y2="{_n(py(t))}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{_n(py(t) + 4)}" text-anchor="end">{fmt(round(t, 4))}</text>')
    out.append(f'<text x="{_n(left + pw / 2)}" y="{height - 10}" text-anchor="middle">{escape(x_label)}</text>')
    out.append(f'<text x="15" y="{_n(top + ph / 2)}" text-anchor="middle" '
               f'transform="rotate(-90 15 {_n(top + ph / 2)})">{escape(y_label)}</text>')
    for i, (name, vals) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{_n(px(float(a)))},{_n(py(float(b)))}" for a, b in zip(xs, vals) if np.isfinite(b))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{pts}"/>')
        ly = top + 14 * i + 10
        out.append(f'<line x1="{left + pw + 10}" y1="{ly}" x2="{left + pw + 30}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 35}" y="{ly + 4}">{escape(str(name))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def heatmap_svg(title, counts, labels, cell=28) -> str:
    counts = np.asarray(counts)
    n = counts.shape[0]
    left, top = 110, 110
    width, height = left + n * cell + 20, top + n * cell + 40
    row_tot = counts.sum(axis=1, keepdims=True)
    frac = np.divide(counts, row_tot, out=np.zeros(counts.shape), where=row_tot > 0)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="10">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width // 2}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<text x="{left + n * cell // 2}" y="{top - 80}" text-anchor="middle">predicted</text>',
           f'<text x="14" y="{top + n * cell // 2}" text-anchor="middle" '
           f'transform="rotate(-90 14 {top + n * cell // 2})">true</text>']
    for i in range(n):
        name = escape(str(labels[i]) if i < len(labels) else str(i))
        out.append(f'<text x="{left - 4}" y="{top + i * cell + cell // 2 + 3}" text-anchor="end">{name}</text>')
        cx = left + i * cell + cell // 2
        out.append(f'<text x="{cx}" y="{top - 4}" transform="rotate(-60 {cx} {top - 4})">{name}</text>')
        for j in range(n):
            shade = int(round(255 * (1 - frac[i, j])))
            color = f"#{shade:02x}{shade:02x}ff"
            out.append(f'<rect x="{left + j * cell}" y="{top + i * cell}" width="{cell}" height="{cell}" '
                       f'fill="{color}" stroke="#cccccc"/>')
            txt = "white" if frac[i, j] > 0.6 else "black"
            out.append(f'<text x="{left + j * cell + cell // 2}" y="{top + i * cell + cell // 2 + 3}" '
                       f'text-anchor="middle" fill="{txt}">{int(counts[i, j])}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# -- report directory -----------------------------------------------------------

def report_json(report: ExperimentReport, include_timings=False) -> str:
    raw = report.to_dict()
    if not include_timings:
        raw.pop("timings")
    return json.dumps(raw, indent=2, sort_keys=True) + "\n"


def render_report(report: ExperimentReport, out_dir, include_timings: bool = False) -> list[Path]:
    """Materialise ``report`` under ``out_dir``; returns the written paths."""
    out = Path(out_dir)
    written = []
    for name, t in sorted(report.tables.items()):
        rows = [[t.row_label] + list(t.columns)]
        rows += [[r] + list(vals) for r, vals in zip(t.rows, t.values)]
        written.append(_write(out / "tables" / f"{name}.csv", _csv_text(rows)))
    for name, c in sorted(report.curves.items()):
        series = c["series"]
        if not c["x"] or not series:
            continue
        rows = [[c.get("x_label", "x")] + list(series)]
        rows += [[x] + [series[s][i] for s in series] for i, x in enumerate(c["x"])]
        written.append(_write(out / "curves" / f"{name}.csv", _csv_text(rows)))
        written.append(_write(out / "figures" / f"{name}.svg",
                              line_plot_svg(name, c["x"], series, c.get("x_label", ""),
                                            c.get("y_label", ""))))
    for name, cm in sorted(report.confusion.items()):
        labels = [str(n) for n in cm.class_names]
        rows = [["true\\predicted"] + labels]
        rows += [[labels[i]] + cm.counts[i].tolist() for i in range(len(labels))]
        written.append(_write(out / "confusion" / f"{name}.csv", _csv_text(rows)))
        written.append(_write(out / "figures" / f"{name}_confusion.svg",
                              heatmap_svg(name, cm.counts, labels)))
    if report.metrics:
        rows = [["metric", "value"]] + [list(r) for r in _flatten(report.metrics)]
        written.append(_write(out / "metrics.csv", _csv_text(rows)))
    written.append(_write(out / "config.json",
                          json.dumps(report.config, indent=2, sort_keys=True) + "\n"))
    written.append(_write(out / "report.json", report_json(report, include_timings)))
    if include_timings and report.timings:
        rows = [["step", "seconds"]] + [[k, report.timings[k]] for k in sorted(report.timings)]
        written.append(_write(out / "timings.csv", _csv_text(rows)))
    return written

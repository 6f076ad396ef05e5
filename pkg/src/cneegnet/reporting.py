"""Serialization of training reports plus tabular/graphical summaries.

Reports are JSON, histories and summaries are CSV, and the grouped-bar chart
is a self-contained SVG string with no rendering dependency. report_digest()
hashes the canonical JSON with wall_seconds removed, so two runs of the same
seeded experiment compare equal even though their timings differ.
"""

import csv
import hashlib
import io
import json

import numpy as np

from .errors import DataError, FormatError
from .training import TrainReport

_PALETTE = ("#4878d0", "#ee854a", "#6acc64", "#d65f5f", "#956cb4", "#8c613c")


def _default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON-serializable: {type(obj).__name__}")


def report_to_json(report):
    return json.dumps(report.to_dict(), default=_default, sort_keys=True, indent=2)


def save_report(path, report):
    with open(path, "w", encoding="utf-8") as f:
        f.write(report_to_json(report))
        f.write("\n")


def load_report(path):
    with open(path, "r", encoding="utf-8") as f:
        try:
            d = json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(f"{path}: not valid JSON: {e}", offset=e.pos)
    if not isinstance(d, dict) or "history" not in d or "config" not in d:
        raise FormatError(f"{path}: not a training report", offset=0)
    return TrainReport.from_dict(d)


def report_digest(report):
    """SHA-256 over the canonical report JSON, timing excluded."""
    d = report.to_dict()
    d.pop("wall_seconds", None)
    canon = json.dumps(d, default=_default, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def history_csv(report):
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["epoch", "train_loss", "train_acc", "val_loss", "val_acc"])
    h = report.history
    for i in range(len(h["val_loss"])):
        w.writerow([i + 1, repr(float(h["train_loss"][i])),
                    repr(float(h["train_acc"][i])),
                    repr(float(h["val_loss"][i])),
                    repr(float(h["val_acc"][i]))])
    return out.getvalue()


def write_history_csv(path, report):
    with open(path, "w", encoding="utf-8") as f:
        f.write(history_csv(report))


def summary_csv(series):
    """series: {series_name: {group_name: {"n", "mean", "sd"}}} as produced by
    training.aggregate_report, one mapping per series (e.g. per model)."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["series", "condition", "n", "mean", "sd"])
    for name in sorted(series):
        groups = series[name]
        for cond in sorted(groups):
            st = groups[cond]
            sd = "" if st["sd"] is None else repr(float(st["sd"]))
            w.writerow([name, cond, st["n"], repr(float(st["mean"])), sd])
    return out.getvalue()


def summary_table(series):
    """Fixed-width text table: one column per condition group, one row per
    series, cells mean +/- sd."""
    conditions = sorted({c for g in series.values() for c in g if c != "overall"})
    if not conditions:
        raise DataError("no condition groups to summarize")

    def cell(st):
        if st is None:
            return "-"
        if st["sd"] is None:
            return f"{st['mean']:.4f}"
        return f"{st['mean']:.4f} +/- {st['sd']:.4f}"

    rows = [["series"] + conditions]
    for name in sorted(series):
        rows.append([name] + [cell(series[name].get(c)) for c in conditions])
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = []
    for r in rows:
        lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip())
    return "\n".join(lines) + "\n"


def render_bar_svg(series, title="Mean test accuracy"):
    """Grouped bar chart: condition groups along x, one bar per series within
    each group, whiskers at mean +/- sd. Returns the SVG document as a string."""
    conditions = sorted({c for g in series.values() for c in g if c != "overall"})
    names = sorted(series)
    if not conditions or not names:
        raise DataError("nothing to plot")

    width, height = 640, 420
    left, right, top, bottom = 60, 20, 48, 60
    plot_w = width - left - right
    plot_h = height - top - bottom

    def y_of(v):
        return top + plot_h * (1.0 - v)

    group_w = plot_w / len(conditions)
    bar_w = min(48.0, 0.8 * group_w / len(names))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="16">{title}</text>',
    ]
    for tick in range(0, 11, 2):
        v = tick / 10.0
        y = y_of(v)
        parts.append(f'<line x1="{left}" y1="{y:.1f}" x2="{width - right}" '
                     f'y2="{y:.1f}" stroke="#dddddd"/>')
        parts.append(f'<text x="{left - 8}" y="{y + 4:.1f}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11">{v:.1f}</text>')
    for gi, cond in enumerate(conditions):
        x0 = left + gi * group_w
        cluster = len(names) * bar_w
        start = x0 + (group_w - cluster) / 2
        for si, name in enumerate(names):
            st = series[name].get(cond)
            if st is None:
                continue
            mean = float(st["mean"])
            x = start + si * bar_w
            parts.append(
                f'<rect x="{x:.1f}" y="{y_of(mean):.1f}" width="{bar_w:.1f}" '
                f'height="{plot_h * mean:.1f}" '
                f'fill="{_PALETTE[si % len(_PALETTE)]}"/>')
            if st["sd"] is not None:
                sd = float(st["sd"])
                cx = x + bar_w / 2
                lo, hi = y_of(max(0.0, mean - sd)), y_of(min(1.0, mean + sd))
                parts.append(f'<line x1="{cx:.1f}" y1="{lo:.1f}" x2="{cx:.1f}" '
                             f'y2="{hi:.1f}" stroke="black"/>')
                for yy in (lo, hi):
                    parts.append(f'<line x1="{cx - 5:.1f}" y1="{yy:.1f}" '
                                 f'x2="{cx + 5:.1f}" y2="{yy:.1f}" stroke="black"/>')
        parts.append(f'<text x="{x0 + group_w / 2:.1f}" y="{height - bottom + 18}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="12">{cond}</text>')
    parts.append(f'<line x1="{left}" y1="{top}" x2="{left}" '
                 f'y2="{height - bottom}" stroke="black"/>')
    parts.append(f'<line x1="{left}" y1="{height - bottom}" '
                 f'x2="{width - right}" y2="{height - bottom}" stroke="black"/>')
    for si, name in enumerate(names):
        lx = left + 10 + si * 150
        ly = height - 18
        parts.append(f'<rect x="{lx}" y="{ly - 10}" width="12" height="12" '
                     f'fill="{_PALETTE[si % len(_PALETTE)]}"/>')
        parts.append(f'<text x="{lx + 18}" y="{ly}" font-family="sans-serif" '
                     f'font-size="12">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"

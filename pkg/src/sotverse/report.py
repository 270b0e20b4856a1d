"""Report bundles: one machine-readable document, plots, and CSV tables.

Everything written here is byte-deterministic for identical inputs: keys
are sorted, floats use Python's shortest-roundtrip repr, SVG plots are
generated by a fixed-layout writer with no timestamps or random ids.
Undefined metric points are serialized as nulls and skipped in plots.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence as Seq, Tuple, Union

from .attributes import ATTRIBUTE_NAMES
from .errors import DomainError
from .metrics import Curve, EnvironmentScores, SequenceScores

REPORT_SCHEMA = 1

PLOT_KINDS = ("precision", "normalized_precision", "success", "challenging", "attribute", "robust")

_PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)

_AXIS_LABELS = {
    "precision": ("center error threshold (px)", "fraction of frames"),
    "normalized_precision": ("normalized center error threshold", "fraction of frames"),
    "success": ("overlap threshold", "fraction of frames"),
    "challenging": ("correlation threshold", "success rate"),
}


@dataclass(frozen=True)
class RunResult:
    """Everything scored for one tracker x space x mechanism."""

    tracker: str
    space: str
    mechanism: str
    aggregate: EnvironmentScores
    weighted: EnvironmentScores
    per_sequence: Tuple[SequenceScores, ...]

    @property
    def key(self) -> Tuple[str, str, str]:
        return (self.tracker, self.space, self.mechanism)


def _curve_doc(curve: Optional[Curve]) -> Optional[dict]:
    if curve is None:
        return None
    return {
        "thresholds": list(curve.thresholds),
        "values": list(curve.values),
        "headline_threshold": curve.headline_threshold,
        "headline": curve.headline,
    }


def _headlines(agg: EnvironmentScores) -> dict:
    return {
        "precision": agg.precision.headline,
        "normalized_precision": agg.normalized_precision.headline,
        "success_auc": agg.success_auc,
        "mean_overlap": agg.mean_overlap,
        "challenging": agg.challenging.headline if agg.challenging else None,
    }


def build_report_document(runs: Seq[RunResult]) -> dict:
    """The report.json payload; raises when there is nothing to report."""
    if not runs:
        raise DomainError("nothing to report")
    results: Dict[str, dict] = {}
    for run in sorted(runs, key=lambda r: r.key):
        agg = run.aggregate
        entry = {
            "sequences": agg.sequences,
            "headlines": _headlines(agg),
            "weighted_headlines": _headlines(run.weighted),
            "curves": {
                "precision": _curve_doc(agg.precision),
                "normalized_precision": _curve_doc(agg.normalized_precision),
                "success": _curve_doc(agg.success),
                "challenging": _curve_doc(agg.challenging),
            },
            "attribute_ratios": dict(agg.attribute_ratios) if agg.attribute_ratios else None,
            "robust": (
                {"restarts": agg.robust.restarts, "longest_segment": agg.robust.longest_segment}
                if agg.robust
                else None
            ),
            "per_sequence": {
                sc.sequence_id: {
                    "evaluated_frames": sc.evaluated_frames,
                    "length": sc.length,
                    "precision": sc.precision.headline,
                    "normalized_precision": sc.normalized_precision.headline,
                    "success_auc": sc.success_auc,
                    "mean_overlap": sc.mean_overlap,
                    "challenging": sc.challenging.headline if sc.challenging else None,
                    "restarts": sc.restarts,
                    "longest_segment": sc.longest_segment,
                }
                for sc in run.per_sequence
            },
        }
        results.setdefault(run.tracker, {}).setdefault(run.space, {})[run.mechanism] = entry
    return {"schema": REPORT_SCHEMA, "results": results}


def dump_report(doc: dict) -> bytes:
    return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode()


# ---------------------------------------------------------------- plotting

def _svg_header(width: int, height: int, title: str) -> List[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
    ]


def _axes(x0, y0, x1, y1, xlabel, ylabel) -> List[str]:
    parts = [
        f'<line x1="{x0}" y1="{y1}" x2="{x1}" y2="{y1}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{(x0 + x1) / 2:.1f}" y="{y1 + 32}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="11">{xlabel}</text>',
        f'<text x="{x0 - 36}" y="{(y0 + y1) / 2:.1f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="11" '
        f'transform="rotate(-90 {x0 - 36} {(y0 + y1) / 2:.1f})">{ylabel}</text>',
    ]
    return parts


def _fmt(v: float) -> str:
    return format(v, ".2f")


def _line_plot(title: str, xlabel: str, ylabel: str, series: List[Tuple[str, List[Tuple[float, float]]]],
               x_range: Tuple[float, float], y_range: Tuple[float, float] = (0.0, 1.0)) -> str:
    w, h = 640, 440
    x0, y0, x1, y1 = 60, 40, 620, 380
    out = _svg_header(w, h, title)
    out += _axes(x0, y0, x1, y1, xlabel, ylabel)
    xmin, xmax = x_range
    ymin, ymax = y_range
    span_x = (xmax - xmin) or 1.0
    span_y = (ymax - ymin) or 1.0

    def px(x):
        return x0 + (x - xmin) / span_x * (x1 - x0)

    def py(y):
        return y1 - (y - ymin) / span_y * (y1 - y0)

    for i in range(5):
        yv = ymin + span_y * i / 4
        out.append(
            f'<text x="{x0 - 6}" y="{py(yv) + 4:.2f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="10">{yv:.2f}</text>'
        )
        xv = xmin + span_x * i / 4
        out.append(
            f'<text x="{px(xv):.2f}" y="{y1 + 16}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="10">{xv:g}</text>'
        )
    for idx, (label, points) in enumerate(series):
        color = _PALETTE[idx % len(_PALETTE)]
        if points:
            coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in points)
            out.append(
                f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>'
            )
        ly = y0 + 14 * idx
        out.append(f'<line x1="{x1 - 150}" y1="{ly}" x2="{x1 - 130}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(
            f'<text x="{x1 - 126}" y="{ly + 4}" font-family="sans-serif" font-size="10">{label}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _bar_plot(title: str, series: List[Tuple[str, Mapping[str, Optional[float]]]]) -> str:
    w, h = 760, 440
    x0, y0, x1, y1 = 60, 40, 740, 360
    out = _svg_header(w, h, title)
    out += _axes(x0, y0, x1, y1, "attribute", "failure share")
    n_groups = len(ATTRIBUTE_NAMES)
    group_w = (x1 - x0) / n_groups
    bar_w = group_w * 0.8 / max(len(series), 1)
    for gi, name in enumerate(ATTRIBUTE_NAMES):
        gx = x0 + gi * group_w
        out.append(
            f'<text x="{gx + group_w / 2:.2f}" y="{y1 + 14}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="8" '
            f'transform="rotate(30 {gx + group_w / 2:.2f} {y1 + 14})">{name}</text>'
        )
        for si, (label, ratios) in enumerate(series):
            v = ratios.get(name)
            if v is None:
                continue
            bh = v * (y1 - y0)
            bx = gx + group_w * 0.1 + si * bar_w
            color = _PALETTE[si % len(_PALETTE)]
            out.append(
                f'<rect x="{bx:.2f}" y="{y1 - bh:.2f}" width="{bar_w:.2f}" '
                f'height="{bh:.2f}" fill="{color}"/>'
            )
    for si, (label, _) in enumerate(series):
        color = _PALETTE[si % len(_PALETTE)]
        ly = y0 + 14 * si
        out.append(f'<rect x="{x1 - 150}" y="{ly - 8}" width="12" height="8" fill="{color}"/>')
        out.append(
            f'<text x="{x1 - 134}" y="{ly}" font-family="sans-serif" font-size="10">{label}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _scatter_plot(title: str, points: List[Tuple[str, float, float]]) -> str:
    w, h = 640, 440
    x0, y0, x1, y1 = 60, 40, 620, 380
    out = _svg_header(w, h, title)
    out += _axes(x0, y0, x1, y1, "mean restarts", "mean longest segment (frames)")
    xmax = max((p[1] for p in points), default=1.0) or 1.0
    ymax = max((p[2] for p in points), default=1.0) or 1.0
    xmax *= 1.1
    ymax *= 1.1
    for idx, (label, x, y) in enumerate(points):
        color = _PALETTE[idx % len(_PALETTE)]
        cx = x0 + x / xmax * (x1 - x0)
        cy = y1 - y / ymax * (y1 - y0)
        out.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="5" fill="{color}"/>')
        out.append(
            f'<text x="{cx + 8:.2f}" y="{cy + 4:.2f}" font-family="sans-serif" '
            f'font-size="10">{label}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _series_label(run: RunResult) -> str:
    return f"{run.tracker} ({run.space}, {run.mechanism})"


def _curve_points(curve: Optional[Curve]) -> List[Tuple[float, float]]:
    if curve is None:
        return []
    return [(t, v) for t, v in zip(curve.thresholds, curve.values) if v is not None]


def render_plots(runs: Seq[RunResult]) -> Dict[str, str]:
    """SVG text per plot kind, deterministic for identical inputs."""
    ordered = sorted(runs, key=lambda r: r.key)
    plots: Dict[str, str] = {}
    for kind in ("precision", "normalized_precision", "success", "challenging"):
        series = []
        for run in ordered:
            curve = getattr(run.aggregate, kind if kind != "challenging" else "challenging")
            series.append((_series_label(run), _curve_points(curve)))
        xs = {
            "precision": (0.0, 50.0),
            "normalized_precision": (0.0, 0.5),
            "success": (0.0, 1.0),
            "challenging": (0.0, 1.0),
        }[kind]
        xlabel, ylabel = _AXIS_LABELS[kind]
        plots[kind] = _line_plot(kind.replace("_", " "), xlabel, ylabel, series, xs)
    plots["attribute"] = _bar_plot(
        "attribute breakdown of failures",
        [
            (_series_label(run), run.aggregate.attribute_ratios or {})
            for run in ordered
        ],
    )
    robust_points = [
        (_series_label(run), run.aggregate.robust.restarts, run.aggregate.robust.longest_segment)
        for run in ordered
        if run.aggregate.robust is not None
    ]
    plots["robust"] = _scatter_plot("robustness under restarts", robust_points)
    return plots


# ---------------------------------------------------------------- tables

def _fmt_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".9g")
    return str(v)


def headline_table(runs: Seq[RunResult]) -> str:
    header = (
        "tracker,space,mechanism,sequences,precision,normalized_precision,"
        "success_auc,mean_overlap,challenging,restarts,longest_segment"
    )
    lines = [header]
    for run in sorted(runs, key=lambda r: r.key):
        h = _headlines(run.aggregate)
        robust = run.aggregate.robust
        lines.append(
            ",".join(
                [
                    run.tracker,
                    run.space,
                    run.mechanism,
                    str(run.aggregate.sequences),
                    _fmt_cell(h["precision"]),
                    _fmt_cell(h["normalized_precision"]),
                    _fmt_cell(h["success_auc"]),
                    _fmt_cell(h["mean_overlap"]),
                    _fmt_cell(h["challenging"]),
                    _fmt_cell(robust.restarts if robust else None),
                    _fmt_cell(robust.longest_segment if robust else None),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def curve_table(runs: Seq[RunResult], kind: str) -> str:
    lines = ["tracker,space,mechanism,threshold,value"]
    for run in sorted(runs, key=lambda r: r.key):
        curve = getattr(run.aggregate, kind)
        if curve is None:
            continue
        for t, v in zip(curve.thresholds, curve.values):
            lines.append(
                f"{run.tracker},{run.space},{run.mechanism},{_fmt_cell(float(t))},{_fmt_cell(v)}"
            )
    return "\n".join(lines) + "\n"


def write_report_bundle(runs: Seq[RunResult], out_dir: Union[str, Path]) -> Path:
    """Write report.json, plots/ and tables/; returns the report path."""
    if not runs:
        raise DomainError("nothing to report")
    out = Path(out_dir)
    (out / "plots").mkdir(parents=True, exist_ok=True)
    (out / "tables").mkdir(parents=True, exist_ok=True)
    report_path = out / "report.json"
    report_path.write_bytes(dump_report(build_report_document(runs)))
    for kind, svg in render_plots(runs).items():
        (out / "plots" / f"{kind}.svg").write_bytes(svg.encode())
    (out / "tables" / "headlines.csv").write_bytes(headline_table(runs).encode())
    for kind in ("precision", "normalized_precision", "success", "challenging"):
        (out / "tables" / f"curves_{kind}.csv").write_bytes(curve_table(runs, kind).encode())
    return report_path

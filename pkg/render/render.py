#!/usr/bin/env python3
"""Offline figure rendering for reachability artifacts.

Draws the JSON/CSV files written by `hyzo run`; no set arithmetic is
recomputed here.  A job produces up to two figures in the output directory:

  sets.{svg,png}        solution-set polygons filled per binary assignment
                        and colored by step, with optional interval-hull
                        outlines from a trace file and simulated-trajectory
                        overlays from a CSV (header `traj,k,x,y`).
  complexity.{svg,png}  generator / binary / constraint counts per step.

Usage:
  render.py [--polygons F ...] [--trace F] [--complexity F] [--traj F]
            --out DIR [--format {svg,png}]

SVG geometry carries the source coordinates verbatim (repr of the JSON
floats); the y axis is flipped by a group transform, never by rewriting
coordinates, so paths can be diffed exactly against the polygon files.
Renders are pure functions of the inputs: rerunning a job reproduces the
output bytes.

Exit codes: 0 success, 2 missing or invalid input.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

__all__ = [
    "RenderError",
    "build_sets_figure",
    "load_complexity",
    "load_polygons",
    "load_trace_boxes",
    "load_trajectories",
    "main",
    "render_job",
]

POLYGON_SCHEMA = "hyzo-polygons-1"
TRACE_SCHEMA = "hyzo-trace-1"
COMPLEXITY_HEADER = ("k", "n_g", "n_b", "n_c")
TRAJECTORY_HEADER = ("traj", "k", "x", "y")

SVG_WIDTH = 640.0
# piecewise-linear color ramp over step fraction, dark blue -> teal -> warm
RAMP = ((0.145, 0.204, 0.580), (0.216, 0.608, 0.588), (0.976, 0.812, 0.235))
SERIES_COLORS = {"n_g": "#1f77b4", "n_b": "#d62728", "n_c": "#2ca02c"}
HULL_COLOR = "#555555"
TRAJ_COLOR = "#303030"


class RenderError(Exception):
    """Input file missing, unparsable, or off-schema."""


# ---------------------------------------------------------------------------
# input loading


def _read_json(path: Path) -> dict:
    try:
        doc = json.loads(path.read_text())
    except OSError as e:
        raise RenderError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise RenderError(f"{path} is not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise RenderError(f"{path}: expected a JSON object")
    return doc


def _read_rows(path: Path) -> list[list[str]]:
    try:
        with open(path, newline="") as fh:
            rows = [row for row in csv.reader(fh) if row]
    except OSError as e:
        raise RenderError(f"cannot read {path}: {e}") from e
    if not rows:
        raise RenderError(f"{path} is empty")
    return rows


def _vertex(value, where: str) -> tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise RenderError(f"{where}: vertex must be an [x, y] pair")
    try:
        x, y = float(value[0]), float(value[1])
    except (TypeError, ValueError) as e:
        raise RenderError(f"{where}: non-numeric vertex") from e
    if not (math.isfinite(x) and math.isfinite(y)):
        raise RenderError(f"{where}: non-finite vertex")
    return x, y


def load_polygons(path: Path) -> dict:
    """Validated polygon document: step, dims, name, pieces."""
    doc = _read_json(path)
    if doc.get("schema") != POLYGON_SCHEMA:
        raise RenderError(f"{path}: schema is not {POLYGON_SCHEMA!r}")
    dims = doc.get("dims")
    if (not isinstance(dims, list) or len(dims) != 2
            or not all(isinstance(d, int) and d >= 0 for d in dims)):
        raise RenderError(f"{path}: dims must be two non-negative integers")
    step = doc.get("step")
    if not isinstance(step, int) or step < 0:
        raise RenderError(f"{path}: step must be a non-negative integer")
    pieces = doc.get("pieces")
    if not isinstance(pieces, list):
        raise RenderError(f"{path}: pieces must be a list")
    out_pieces = []
    for i, piece in enumerate(pieces):
        where = f"{path} piece {i}"
        if not isinstance(piece, dict) or not isinstance(
                piece.get("polygons"), list):
            raise RenderError(f"{where}: expected an object with 'polygons'")
        polys = []
        for j, poly in enumerate(piece["polygons"]):
            if not isinstance(poly, list) or not poly:
                raise RenderError(f"{where} polygon {j}: empty vertex list")
            polys.append([_vertex(v, f"{where} polygon {j}") for v in poly])
        out_pieces.append(polys)
    return {
        "name": str(doc.get("name", path.stem)),
        "step": step,
        "dims": (dims[0], dims[1]),
        "pieces": out_pieces,
    }


def load_trace_boxes(path: Path) -> list[tuple[list[float], list[float]]]:
    """Per-step interval-hull boxes (lo, hi) recorded in a trace file."""
    doc = _read_json(path)
    if doc.get("schema") != TRACE_SCHEMA:
        raise RenderError(f"{path}: schema is not {TRACE_SCHEMA!r}")
    trace = doc.get("trace")
    if not isinstance(trace, dict) or not isinstance(
            trace.get("hull_boxes"), list):
        raise RenderError(f"{path}: missing trace.hull_boxes")
    boxes = []
    for k, box in enumerate(trace["hull_boxes"]):
        where = f"{path} hull box {k}"
        if not isinstance(box, dict):
            raise RenderError(f"{where}: expected an object with lo/hi")
        lo, hi = box.get("lo"), box.get("hi")
        if (not isinstance(lo, list) or not isinstance(hi, list)
                or len(lo) != len(hi) or not lo):
            raise RenderError(f"{where}: lo/hi must be equal-length lists")
        try:
            lo = [float(v) for v in lo]
            hi = [float(v) for v in hi]
        except (TypeError, ValueError) as e:
            raise RenderError(f"{where}: non-numeric bound") from e
        if not all(math.isfinite(v) for v in lo + hi):
            raise RenderError(f"{where}: non-finite bound")
        boxes.append((lo, hi))
    return boxes


def load_complexity(path: Path) -> list[tuple[int, int, int, int]]:
    """(k, n_g, n_b, n_c) rows; trailing timing columns are ignored."""
    rows = _read_rows(path)
    header = tuple(h.strip() for h in rows[0][:4])
    if header != COMPLEXITY_HEADER:
        raise RenderError(
            f"{path}: header must start with {','.join(COMPLEXITY_HEADER)}")
    out = []
    for row in rows[1:]:
        if len(row) < 4:
            raise RenderError(f"{path}: short row {row!r}")
        try:
            out.append(tuple(int(v) for v in row[:4]))
        except ValueError as e:
            raise RenderError(f"{path}: non-integer count in {row!r}") from e
    if not out:
        raise RenderError(f"{path}: no data rows")
    return out


def load_trajectories(path: Path) -> list[list[tuple[float, float]]]:
    """Trajectories grouped by id, each sorted by step."""
    rows = _read_rows(path)
    if tuple(h.strip() for h in rows[0]) != TRAJECTORY_HEADER:
        raise RenderError(
            f"{path}: header must be {','.join(TRAJECTORY_HEADER)}")
    order: list[str] = []
    grouped: dict[str, list[tuple[int, float, float]]] = {}
    for row in rows[1:]:
        if len(row) != 4:
            raise RenderError(f"{path}: row {row!r} needs 4 fields")
        name = row[0]
        try:
            k, x, y = int(row[1]), float(row[2]), float(row[3])
        except ValueError as e:
            raise RenderError(f"{path}: non-numeric row {row!r}") from e
        if not (math.isfinite(x) and math.isfinite(y)):
            raise RenderError(f"{path}: non-finite row {row!r}")
        if name not in grouped:
            order.append(name)
            grouped[name] = []
        grouped[name].append((k, x, y))
    return [[(x, y) for _, x, y in sorted(grouped[name])] for name in order]


# ---------------------------------------------------------------------------
# figure assembly


@dataclass(frozen=True)
class SetsFigure:
    """Everything the sets picture shows, already projected to two axes."""

    name: str
    dims: tuple[int, int]
    pieces: list            # (step, [(x, y), ...]) per polygon
    boxes: list             # (step, x_lo, y_lo, x_hi, y_hi)
    trajectories: list      # [(x, y), ...] per trajectory
    max_step: int


def build_sets_figure(polydocs: list[dict],
                      trace_boxes: list | None,
                      trajectories: list | None) -> SetsFigure:
    dims = (0, 1)
    name = "sets"
    if polydocs:
        dims = polydocs[0]["dims"]
        name = polydocs[0]["name"]
        for doc in polydocs[1:]:
            if doc["dims"] != dims:
                raise RenderError(
                    f"polygon files mix dims {dims} and {doc['dims']}")
    pieces = [(doc["step"], poly)
              for doc in sorted(polydocs, key=lambda d: d["step"])
              for polys in doc["pieces"] for poly in polys]
    boxes = []
    for k, (lo, hi) in enumerate(trace_boxes or []):
        if max(dims) >= len(lo):
            raise RenderError(
                f"trace boxes have {len(lo)} dims, cannot project to {dims}")
        boxes.append((k, lo[dims[0]], lo[dims[1]], hi[dims[0]], hi[dims[1]]))
    trajs = list(trajectories or [])
    if not pieces and not boxes and not trajs:
        raise RenderError("nothing to draw in the sets figure")
    max_step = max([k for k, _ in pieces] + [k for k, *_ in boxes],
                   default=0)
    return SetsFigure(name, dims, pieces, boxes, trajs, max_step)


def step_color(step: int, max_step: int) -> tuple[float, float, float]:
    t = 0.0 if max_step <= 0 else min(max(step / max_step, 0.0), 1.0)
    pos = t * (len(RAMP) - 1)
    i = min(int(pos), len(RAMP) - 2)
    f = pos - i
    a, b = RAMP[i], RAMP[i + 1]
    return tuple(a[c] + f * (b[c] - a[c]) for c in range(3))


def _hex(rgb: tuple[float, float, float]) -> str:
    return "#%02x%02x%02x" % tuple(round(255 * v) for v in rgb)


def _figure_bounds(fig: SetsFigure) -> tuple[float, float, float, float]:
    xs, ys = [], []
    for _, poly in fig.pieces:
        xs.extend(p[0] for p in poly)
        ys.extend(p[1] for p in poly)
    for _, x0, y0, x1, y1 in fig.boxes:
        xs.extend((x0, x1))
        ys.extend((y0, y1))
    for traj in fig.trajectories:
        xs.extend(p[0] for p in traj)
        ys.extend(p[1] for p in traj)
    return min(xs), min(ys), max(xs), max(ys)


# ---------------------------------------------------------------------------
# SVG output


def _fmt(v: float) -> str:
    # repr round-trips doubles, keeping SVG geometry equal to the JSON source
    return repr(float(v))


def _path(points, close: bool) -> str:
    coords = [f"{_fmt(x)},{_fmt(y)}" for x, y in points]
    return "M " + " L ".join(coords) + (" Z" if close else "")


def sets_svg(fig: SetsFigure) -> str:
    x0, y0, x1, y1 = _figure_bounds(fig)
    pad_x = 0.05 * (x1 - x0) or 0.5
    pad_y = 0.05 * (y1 - y0) or 0.5
    w = (x1 - x0) + 2 * pad_x
    h = (y1 - y0) + 2 * pad_y
    height = min(max(SVG_WIDTH * h / w, 120.0), 1600.0)
    stroke = 0.0035 * max(w, h)
    view = " ".join(_fmt(v) for v in (x0 - pad_x, -(y1 + pad_y), w, h))
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH:.1f}" '
        f'height="{height:.1f}" viewBox="{view}">',
        f'<desc>{fig.name}: x{fig.dims[0]} vs x{fig.dims[1]}</desc>',
        '<g transform="scale(1,-1)" stroke-linejoin="round">',
    ]
    for step, poly in fig.pieces:
        color = _hex(step_color(step, fig.max_step))
        lines.append(
            f'<path class="piece" data-step="{step}" d="{_path(poly, True)}" '
            f'fill="{color}" fill-opacity="0.45" stroke="{color}" '
            f'stroke-width="{stroke:.6g}"/>')
    for step, bx0, by0, bx1, by1 in fig.boxes:
        corners = [(bx0, by0), (bx1, by0), (bx1, by1), (bx0, by1)]
        lines.append(
            f'<path class="hull" data-step="{step}" '
            f'd="{_path(corners, True)}" fill="none" stroke="{HULL_COLOR}" '
            f'stroke-width="{0.6 * stroke:.6g}" '
            f'stroke-dasharray="{3 * stroke:.6g} {2 * stroke:.6g}"/>')
    for traj in fig.trajectories:
        points = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in traj)
        lines.append(
            f'<polyline class="traj" points="{points}" fill="none" '
            f'stroke="{TRAJ_COLOR}" stroke-opacity="0.5" '
            f'stroke-width="{0.5 * stroke:.6g}"/>')
    lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def complexity_svg(rows: list[tuple[int, int, int, int]]) -> str:
    width, height = 640.0, 420.0
    left, right, top, bottom = 64.0, 16.0, 20.0, 48.0
    plot_w, plot_h = width - left - right, height - top - bottom
    ks = [r[0] for r in rows]
    k_lo, k_hi = min(ks), max(ks)
    k_span = max(k_hi - k_lo, 1)
    v_hi = max(max(r[1:4]) for r in rows)
    v_hi = max(v_hi, 1)

    def px(k: float) -> float:
        return left + plot_w * (k - k_lo) / k_span

    def py(v: float) -> float:
        return top + plot_h * (1.0 - v / v_hi)

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.1f}" '
        f'height="{height:.1f}" viewBox="0 0 {width:.1f} {height:.1f}" '
        'font-family="sans-serif" font-size="12">',
        "<desc>set complexity per step</desc>",
        f'<path d="M {left:.2f},{top:.2f} L {left:.2f},{top + plot_h:.2f} '
        f'L {left + plot_w:.2f},{top + plot_h:.2f}" fill="none" '
        'stroke="#000000" stroke-width="1"/>',
    ]
    k_stride = max(1, math.ceil(k_span / 10))
    for k in range(k_lo, k_hi + 1, k_stride):
        x = px(k)
        lines.append(f'<path d="M {x:.2f},{top + plot_h:.2f} '
                     f'L {x:.2f},{top + plot_h + 4:.2f}" '
                     'stroke="#000000" stroke-width="1"/>')
        lines.append(f'<text x="{x:.2f}" y="{top + plot_h + 18:.2f}" '
                     f'text-anchor="middle">{k}</text>')
    for i in range(5):
        v = round(v_hi * i / 4)
        y = py(v)
        lines.append(f'<path d="M {left - 4:.2f},{y:.2f} '
                     f'L {left:.2f},{y:.2f}" '
                     'stroke="#000000" stroke-width="1"/>')
        lines.append(f'<text x="{left - 8:.2f}" y="{y + 4:.2f}" '
                     f'text-anchor="end">{v}</text>')
    lines.append(f'<text x="{left + plot_w / 2:.2f}" '
                 f'y="{height - 10:.2f}" text-anchor="middle">step k</text>')
    lines.append(f'<text x="16" y="{top + plot_h / 2:.2f}" '
                 f'text-anchor="middle" transform="rotate(-90 16 '
                 f'{top + plot_h / 2:.2f})">count</text>')
    for idx, series in enumerate(("n_g", "n_b", "n_c")):
        color = SERIES_COLORS[series]
        pts = " ".join(f"{px(r[0]):.2f},{py(r[1 + idx]):.2f}" for r in rows)
        lines.append(f'<polyline class="{series}" points="{pts}" '
                     f'fill="none" stroke="{color}" stroke-width="1.5"/>')
        for r in rows:
            lines.append(f'<circle cx="{px(r[0]):.2f}" '
                         f'cy="{py(r[1 + idx]):.2f}" r="2.5" '
                         f'fill="{color}"/>')
        y = top + 16 + 16 * idx
        lines.append(f'<path d="M {left + 12:.2f},{y - 4:.2f} '
                     f'L {left + 34:.2f},{y - 4:.2f}" stroke="{color}" '
                     'stroke-width="1.5"/>')
        lines.append(f'<text x="{left + 40:.2f}" y="{y:.2f}">{series}</text>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# PNG output (matplotlib, Agg)


def _pyplot():
    try:
        import matplotlib
    except ImportError as e:
        raise RenderError("png output requires matplotlib") from e
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def sets_png(fig: SetsFigure, path: Path) -> None:
    plt = _pyplot()
    fg, ax = plt.subplots(figsize=(6.4, 4.8), dpi=110)
    for step, poly in fig.pieces:
        color = step_color(step, fig.max_step)
        ax.fill([p[0] for p in poly], [p[1] for p in poly],
                facecolor=color, alpha=0.45, edgecolor=color, linewidth=0.6)
    for _, bx0, by0, bx1, by1 in fig.boxes:
        ax.plot([bx0, bx1, bx1, bx0, bx0], [by0, by0, by1, by1, by0],
                color=HULL_COLOR, linewidth=0.8, linestyle="--")
    for traj in fig.trajectories:
        ax.plot([p[0] for p in traj], [p[1] for p in traj],
                color=TRAJ_COLOR, linewidth=0.5, alpha=0.5)
    ax.set_xlabel(f"x{fig.dims[0]}")
    ax.set_ylabel(f"x{fig.dims[1]}")
    ax.set_title(fig.name)
    fg.savefig(path)
    plt.close(fg)


def complexity_png(rows: list[tuple[int, int, int, int]], path: Path) -> None:
    plt = _pyplot()
    from matplotlib.ticker import MaxNLocator
    fg, ax = plt.subplots(figsize=(6.4, 4.2), dpi=110)
    ks = [r[0] for r in rows]
    for idx, series in enumerate(("n_g", "n_b", "n_c")):
        ax.plot(ks, [r[1 + idx] for r in rows], marker="o", markersize=3,
                color=SERIES_COLORS[series], label=series)
    ax.set_xlabel("step k")
    ax.set_ylabel("count")
    ax.xaxis.set_major_locator(MaxNLocator(integer=True))
    ax.legend()
    fg.savefig(path)
    plt.close(fg)


# ---------------------------------------------------------------------------
# job driver


def render_job(polygons: list[Path], trace: Path | None,
               complexity: Path | None, traj: Path | None,
               out_dir: Path, fmt: str) -> list[Path]:
    polydocs = [load_polygons(p) for p in polygons]
    boxes = load_trace_boxes(trace) if trace else None
    rows = load_complexity(complexity) if complexity else None
    trajs = load_trajectories(traj) if traj else None
    if not polydocs and boxes is None and rows is None and trajs is None:
        raise RenderError(
            "nothing to render: pass --polygons, --trace, or --complexity")
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if polydocs or boxes is not None or trajs is not None:
        fig = build_sets_figure(polydocs, boxes, trajs)
        target = out_dir / f"sets.{fmt}"
        if fmt == "svg":
            target.write_text(sets_svg(fig))
        else:
            sets_png(fig, target)
        written.append(target)
    if rows is not None:
        target = out_dir / f"complexity.{fmt}"
        if fmt == "svg":
            target.write_text(complexity_svg(rows))
        else:
            complexity_png(rows, target)
        written.append(target)
    return written


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="render.py",
        description="Render reachability artifacts to SVG or PNG figures.")
    parser.add_argument("--polygons", nargs="+", default=[], metavar="F",
                        help="polygon JSON files (one per step)")
    parser.add_argument("--trace", metavar="F",
                        help="trace JSON; draws per-step interval hulls")
    parser.add_argument("--complexity", metavar="F",
                        help="complexity CSV; draws counts per step")
    parser.add_argument("--traj", metavar="F",
                        help="trajectory CSV overlay (header traj,k,x,y)")
    parser.add_argument("--out", required=True, metavar="DIR",
                        help="output directory")
    parser.add_argument("--format", choices=("svg", "png"), default="svg")
    args = parser.parse_args(argv)
    try:
        written = render_job(
            [Path(p) for p in args.polygons],
            Path(args.trace) if args.trace else None,
            Path(args.complexity) if args.complexity else None,
            Path(args.traj) if args.traj else None,
            Path(args.out), args.format)
    except RenderError as e:
        print(f"render.py: {e}", file=sys.stderr)
        return 2
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Report emission: boxplot and MAE line charts as plain SVG, plus CSV/JSON dumps.

File names are stable:

``boxplot_<setting>.svg``   one per setting; methods along the x axis, dashed line at beta
``mae_lines_<param>.svg``   MAE against a swept parameter, one line per method
                            (cells without a sweep tag share ``mae_lines_setting.svg``)
``results.csv``, ``summary.csv``, ``settings.json``   kind ``csv``
``results.json``                                      kind ``json``

Coordinates are rendered with two decimals so identical results give
byte-identical files.
"""

from __future__ import annotations

import json
import math
import re
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

from ..errors import ConfigError
from .runner import ExperimentResult, write_outputs
from .summary import Summary, summarize

__all__ = ["REPORT_KINDS", "emit_report", "boxplot_svg", "mae_lines_svg", "nice_ticks", "slug"]

REPORT_KINDS = ("boxplot_grid", "mae_lines", "csv", "json")
PALETTE = ("#1b6ca8", "#d1495b", "#edae49", "#00798c", "#30638e", "#6a4c93",
           "#8ac926", "#ff7f11", "#444444", "#9e2a2b", "#3a86ff", "#8d99ae")

_MARGIN_LEFT, _MARGIN_RIGHT, _MARGIN_TOP, _MARGIN_BOTTOM = 64.0, 24.0, 44.0, 120.0
_PLOT_HEIGHT = 260.0


def slug(text: str) -> str:
    s = re.sub(r"[^A-Za-z0-9._-]+", "_", text).strip("_")
    return s or "unnamed"


def _f(x: float) -> str:
    return f"{x:.2f}"


def nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    """Round tick values covering ``[lo, hi]`` with a 1/2/2.5/5 x 10^k step."""
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        raise ValueError("need finite lo < hi")
    raw = (hi - lo) / target
    mag = 10.0 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1.0, 2.0, 2.5, 5.0, 10.0) if m * mag >= raw)
    first = math.ceil(lo / step - 1e-9)
    last = math.floor(hi / step + 1e-9)
    return [round(k * step, 12) for k in range(first, last + 1)]


def _tick_label(v: float, ticks: Sequence[float]) -> str:
    step = ticks[1] - ticks[0] if len(ticks) > 1 else 1.0
    exponent = math.floor(math.log10(step) + 1e-9)
    decimals = max(0, -exponent)
    if abs(step / 10.0**exponent - 2.5) < 1e-9:
        decimals += 1
    text = f"{v:.{decimals}f}"
    return "0" if float(text) == 0 else text


class _Canvas:
    def __init__(self, width: float, height: float, title: str):
        self.width, self.height = width, height
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(width)}" height="{_f(height)}" '
            f'viewBox="0 0 {_f(width)} {_f(height)}" font-family="sans-serif" font-size="11">',
            f'<rect x="0" y="0" width="{_f(width)}" height="{_f(height)}" fill="white"/>',
            f'<text class="title" x="{_f(width / 2)}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        ]

    def add(self, element: str) -> None:
        self.parts.append(element)

    def line(self, x1, y1, x2, y2, stroke="black", width=1.0, extra="") -> None:
        self.add(f'<line x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}" '
                 f'stroke="{stroke}" stroke-width="{_f(width)}"{extra}/>')

    def text(self, x, y, s, anchor="middle", extra="") -> None:
        self.add(f'<text x="{_f(x)}" y="{_f(y)}" text-anchor="{anchor}"{extra}>{escape(s)}</text>')

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


class _YAxis:
    def __init__(self, lo: float, hi: float, top: float, height: float):
        if not hi > lo:
            lo, hi = lo - 0.5, hi + 0.5
        pad = 0.05 * (hi - lo)
        self.ticks = nice_ticks(lo - pad, hi + pad)
        self.lo = min(self.ticks[0], lo - pad)
        self.hi = max(self.ticks[-1], hi + pad)
        self.top, self.height = top, height

    def __call__(self, v: float) -> float:
        return self.top + self.height * (self.hi - v) / (self.hi - self.lo)

    def draw(self, c: _Canvas, x0: float, x1: float, label: str) -> None:
        c.line(x0, self.top, x0, self.top + self.height, extra=' class="axis"')
        c.line(x0, self.top + self.height, x1, self.top + self.height, extra=' class="axis"')
        for t in self.ticks:
            y = self(t)
            c.line(x0 - 4, y, x0, y)
            c.line(x0, y, x1, y, stroke="#e5e5e5", width=0.5)
            c.text(x0 - 7, y + 4, _tick_label(t, self.ticks), anchor="end")
        mid = self.top + self.height / 2
        c.text(16, mid, label, extra=f' transform="rotate(-90 16 {_f(mid)})"')


def boxplot_svg(title: str, summaries: Sequence[Summary], beta: float = 1.0) -> str:
    """Boxplots of the estimates per method with a dashed reference line at ``beta``."""
    n = max(1, len(summaries))
    slot = 64.0
    width = _MARGIN_LEFT + _MARGIN_RIGHT + slot * n
    height = _MARGIN_TOP + _PLOT_HEIGHT + _MARGIN_BOTTOM
    vals = [beta]
    for s in summaries:
        if s.n:
            vals += [s.whisker_low, s.whisker_high, *s.outliers]
    axis = _YAxis(min(vals), max(vals), _MARGIN_TOP, _PLOT_HEIGHT)
    c = _Canvas(width, height, title)
    x_end = width - _MARGIN_RIGHT
    axis.draw(c, _MARGIN_LEFT, x_end, "estimated coefficient")
    base = _MARGIN_TOP + _PLOT_HEIGHT

    for i, s in enumerate(summaries):
        cx = _MARGIN_LEFT + slot * (i + 0.5)
        color = PALETTE[i % len(PALETTE)]
        c.line(cx, base, cx, base + 4)
        c.text(cx, base + 14, s.method, anchor="end",
               extra=f' transform="rotate(-40 {_f(cx)} {_f(base + 14)})"')
        if not s.n:
            continue
        half = slot * 0.3
        c.add(f'<g class="box" data-method="{escape(s.method)}">')
        c.line(cx, axis(s.whisker_high), cx, axis(s.q3), stroke=color)
        c.line(cx, axis(s.q1), cx, axis(s.whisker_low), stroke=color)
        c.line(cx - half / 2, axis(s.whisker_high), cx + half / 2, axis(s.whisker_high), stroke=color)
        c.line(cx - half / 2, axis(s.whisker_low), cx + half / 2, axis(s.whisker_low), stroke=color)
        c.add(f'<rect x="{_f(cx - half)}" y="{_f(axis(s.q3))}" width="{_f(2 * half)}" '
              f'height="{_f(axis(s.q1) - axis(s.q3))}" fill="{color}" fill-opacity="0.35" stroke="{color}"/>')
        c.line(cx - half, axis(s.median), cx + half, axis(s.median), stroke=color, width=2.0)
        for o in s.outliers:
            c.add(f'<circle cx="{_f(cx)}" cy="{_f(axis(o))}" r="2.50" fill="none" stroke="{color}"/>')
        c.add("</g>")

    y_ref = axis(beta)
    c.line(_MARGIN_LEFT, y_ref, x_end, y_ref, stroke="#333333", width=1.2,
           extra=f' stroke-dasharray="6 4" class="reference" data-value="{beta!r}"')
    return c.render()


def mae_lines_svg(title: str, param: str, x_labels: Sequence[str],
                  series: dict[str, list[float]]) -> str:
    """MAE per method (one polyline each) over categorical, equally spaced x positions."""
    slot = 72.0
    legend_w = 150.0
    n = max(1, len(x_labels))
    width = _MARGIN_LEFT + slot * n + legend_w + _MARGIN_RIGHT
    height = _MARGIN_TOP + _PLOT_HEIGHT + 60.0
    finite = [v for ys in series.values() for v in ys if math.isfinite(v)]
    axis = _YAxis(0.0, max(finite) if finite else 1.0, _MARGIN_TOP, _PLOT_HEIGHT)
    c = _Canvas(width, height, title)
    x_end = _MARGIN_LEFT + slot * n
    axis.draw(c, _MARGIN_LEFT, x_end, "mean absolute error")
    base = _MARGIN_TOP + _PLOT_HEIGHT
    xs = [_MARGIN_LEFT + slot * (i + 0.5) for i in range(len(x_labels))]
    for x, lab in zip(xs, x_labels):
        c.line(x, base, x, base + 4)
        c.text(x, base + 17, lab)
    c.text(_MARGIN_LEFT + slot * n / 2, base + 40, param)

    for i, (method, ys) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        pts = [(x, axis(y)) for x, y in zip(xs, ys) if math.isfinite(y)]
        c.add(f'<g class="series" data-method="{escape(method)}">')
        if len(pts) > 1:
            c.add(f'<polyline fill="none" stroke="{color}" stroke-width="1.50" points="'
                  + " ".join(f"{_f(px)},{_f(py)}" for px, py in pts) + '"/>')
        for px, py in pts:
            c.add(f'<circle cx="{_f(px)}" cy="{_f(py)}" r="3.00" fill="{color}"/>')
        c.add("</g>")
        ly = _MARGIN_TOP + 10 + 16 * i
        c.line(x_end + 16, ly, x_end + 36, ly, stroke=color, width=2.0)
        c.text(x_end + 42, ly + 4, method, anchor="start")
    return c.render()


def _mae_groups(result: ExperimentResult, summaries: list[Summary]) -> dict[str, list[tuple[str, float]]]:
    """Swept parameter -> [(setting, x value)] in grid order; untagged cells go under ``setting``."""
    settings = list(dict.fromkeys([s.setting for s in summaries] + list(result.settings)))
    groups: dict[str, list[tuple[str, float]]] = {}
    for i, setting in enumerate(settings):
        sweep = result.settings.get(setting, {}).get("sweep")
        if sweep:
            groups.setdefault(sweep["name"], []).append((setting, float(sweep["value"])))
        else:
            groups.setdefault("setting", []).append((setting, float(i)))
    return groups


def _fmt_value(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(v)


def emit_report(result: ExperimentResult, kind: str, out_dir: str | Path) -> list[Path]:
    """Write the files for one report kind into ``out_dir`` and return their paths."""
    if kind not in REPORT_KINDS:
        raise ConfigError(f"unknown report kind {kind!r}; choose from {', '.join(REPORT_KINDS)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summaries = summarize(result)

    if kind == "csv":
        return write_outputs(result, out)
    if kind == "json":
        path = out / "results.json"
        payload = {
            "rows": [
                {"setting": r.setting, "method": r.method, "rep": r.rep,
                 "beta_hat": None if not r.ok else r.beta_hat, "error": r.error,
                 "wall_time_s": r.wall_time}
                for r in result.rows
            ],
            "summary": [s.to_dict() for s in summaries],
            "settings": result.settings,
        }
        path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True, allow_nan=False) + "\n")
        return [path]

    paths = []
    if kind == "boxplot_grid":
        by_setting: dict[str, list[Summary]] = {}
        for s in summaries:
            by_setting.setdefault(s.setting, []).append(s)
        if not by_setting:
            path = out / "boxplot_empty.svg"
            path.write_text(boxplot_svg("no results", []))
            return [path]
        for setting, group in by_setting.items():
            beta = float(result.settings.get(setting, {}).get("beta", 1.0))
            path = out / f"boxplot_{slug(setting)}.svg"
            path.write_text(boxplot_svg(setting, group, beta))
            paths.append(path)
        return paths

    groups = _mae_groups(result, summaries)
    if not groups:
        path = out / "mae_lines_empty.svg"
        path.write_text(mae_lines_svg("no results", "", [], {}))
        return [path]
    lookup = {(s.setting, s.method): s for s in summaries}
    for param, cells in groups.items():
        cells = sorted(cells, key=lambda sv: sv[1]) if param != "setting" else cells
        methods = list(dict.fromkeys(m for (st, m) in lookup for cs, _ in cells if st == cs))
        series = {
            m: [lookup[(cs, m)].mae if (cs, m) in lookup else float("nan") for cs, _ in cells]
            for m in methods
        }
        labels = [cs if param == "setting" else _fmt_value(v) for cs, v in cells]
        path = out / f"mae_lines_{slug(param)}.svg"
        path.write_text(mae_lines_svg(f"MAE by {param}", param, labels, series))
        paths.append(path)
    return paths


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x

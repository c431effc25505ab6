"""Deterministic hand-written SVG for report series.

Axes and frames are drawn as <path> elements so that <circle> counts data
markers and <line> counts fit lines.
"""
from __future__ import annotations

import math

PLOTS = {
    "theorem-1-growth": ("mu", "lambda"),
    "theorem-2-definite": (),
    "theorem-d-scan": ("dichotomy",),
    "cascade-scaling": (),
    "nest-dump": ("puzzle",),
    "ray-dump": (),
}
PLOT_IDS = ("puzzle", "mu", "lambda", "dichotomy")

W, H, PAD = 480, 360, 40
DEPTH_COLOURS = ("#1b1b1b", "#1f5fa8", "#b8442c", "#2e8540", "#7a3e9d", "#b07d10")
FLAG_COLOURS = {"modulus-large": "#1f5fa8", "essentially-bounded": "#2e8540",
                "neither": "#b8442c"}


def _f(x: float) -> str:
    return f"{x:.3f}"


class _Frame:
    """Affine map from data coordinates to the drawing box."""

    def __init__(self, xs, ys, equal=False, w=W, h=H):
        x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
        if x1 == x0:
            x0, x1 = x0 - 1, x1 + 1
        if y1 == y0:
            y0, y1 = y0 - 1, y1 + 1
        sx, sy = (w - 2 * PAD) / (x1 - x0), (h - 2 * PAD) / (y1 - y0)
        if equal:
            sx = sy = min(sx, sy)
        self.x0, self.y0, self.sx, self.sy, self.h = x0, y0, sx, sy, h

    def __call__(self, x, y):
        return PAD + (x - self.x0) * self.sx, self.h - PAD - (y - self.y0) * self.sy


def _document(body: list, title: str, w=W, h=H) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
            f'viewBox="0 0 {w} {h}">')
    frame = (f'<path d="M{PAD},{PAD} V{h - PAD} H{w - PAD}" fill="none" stroke="#888" '
             f'stroke-width="1"/>')
    return "\n".join([head, f"<title>{title}</title>", frame, *body, "</svg>", ""])


def _scatter(frame, xs, ys, colours=None, r=3):
    out = []
    for i, (x, y) in enumerate(zip(xs, ys)):
        px, py = frame(x, y)
        fill = colours[i] if colours else "#1f5fa8"
        out.append(f'<circle cx="{_f(px)}" cy="{_f(py)}" r="{r}" fill="{fill}"/>')
    return out


def _series(report):
    if isinstance(report, dict):
        return report.get("series", {})
    return report.series


def render_svg(report, which: str, path=None) -> str:
    """SVG text for plot `which` ('puzzle', 'mu', 'lambda', 'dichotomy')."""
    if which not in PLOT_IDS:
        raise ValueError(f"unknown plot id {which!r}")
    data = _series(report).get(which)
    if not data:
        raise ValueError("empty series")
    text = {"puzzle": _puzzle, "mu": _mu, "lambda": _lambda, "dichotomy": _dichotomy}[which](data)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def _puzzle(pieces) -> str:
    pts = [p for piece in pieces for p in piece["boundary"]]
    frame = _Frame([p[0] for p in pts], [p[1] for p in pts], equal=True, w=H)
    body = []
    for piece in sorted(pieces, key=lambda p: p["depth"]):
        colour = DEPTH_COLOURS[piece["depth"] % len(DEPTH_COLOURS)]
        coords = " ".join("{},{}".format(*map(_f, frame(x, y))) for x, y in piece["boundary"])
        body.append(f'<polygon points="{coords}" fill="none" stroke="{colour}" '
                    f'stroke-width="{1.5 / (1 + piece["depth"]):.3f}"/>')
    return _document(body, "puzzle pieces", w=H)


def _mu(data) -> str:
    ks, mus = data["k"], data["mu"]
    if not ks:
        raise ValueError("empty series")
    frame = _Frame(ks, [0.0] + list(mus))
    body = _scatter(frame, ks, mus)
    slope, intercept = data.get("slope"), data.get("intercept")
    if slope is not None and math.isfinite(slope) and len(ks) >= 2:
        (x1, y1), (x2, y2) = frame(ks[0], intercept + slope * ks[0]), frame(ks[-1], intercept + slope * ks[-1])
        body.append(f'<line x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}" '
                    f'stroke="#b8442c" stroke-width="1.5"/>')
    return _document(body, "principal moduli against non-central index")


def _lambda(data) -> str:
    ns, lam = data["n"], data["lambda"]
    if not ns:
        raise ValueError("empty series")
    logs = [math.log(v) for v in lam]
    frame = _Frame(ns, logs)
    body = _scatter(frame, ns, logs)
    d = " ".join(("M" if i == 0 else "L") + "{},{}".format(*map(_f, frame(n, y)))
                 for i, (n, y) in enumerate(zip(ns, logs)))
    body.append(f'<path d="{d}" fill="none" stroke="#1f5fa8" stroke-width="1"/>')
    return _document(body, "log scaling factors")


def _dichotomy(data) -> str:
    cs = data["c"]
    if not cs:
        raise ValueError("empty series")
    mods = [m if m is not None else 0.0 for m in data["modulus"]]
    mu_bar = data.get("mu_bar", 0.0)
    frame = _Frame(cs, mods + [0.0, mu_bar])
    body = _scatter(frame, cs, mods, [FLAG_COLOURS.get(f, "#888") for f in data["flag"]])
    (x1, y), (x2, _) = frame(min(cs), mu_bar), frame(max(cs), mu_bar)
    body.append(f'<path d="M{_f(x1)},{_f(y)} H{_f(x2)}" stroke="#888" stroke-dasharray="4 3"/>')
    return _document(body, "renormalization modulus across the scan")

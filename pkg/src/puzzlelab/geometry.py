"""Polygon helpers on complex coordinates.

Polygons are 1-D complex arrays of vertices, implicitly closed (the last
vertex connects back to the first, no duplicate endpoint).
"""
from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

_CHUNK = 1 << 22  # max entries of a points x edges work array


def as_polygon(points) -> np.ndarray:
    poly = np.asarray(points, dtype=complex).ravel()
    if len(poly) > 1 and poly[0] == poly[-1]:
        poly = poly[:-1]
    if len(poly) < 3:
        raise ValueError("a polygon needs at least 3 vertices")
    return poly


def signed_area(poly: np.ndarray) -> float:
    nxt = np.roll(poly, -1)
    return 0.5 * float(np.sum(poly.real * nxt.imag - nxt.real * poly.imag))


def centroid(poly: np.ndarray) -> complex:
    nxt = np.roll(poly, -1)
    cross = poly.real * nxt.imag - nxt.real * poly.imag
    a = cross.sum() / 2
    if a == 0:
        return complex(poly.mean())
    return complex(np.sum((poly + nxt) * cross) / (6 * a))


def positively_oriented(poly: np.ndarray) -> np.ndarray:
    return poly if signed_area(poly) >= 0 else poly[::-1].copy()


def diameter(poly: np.ndarray) -> float:
    span = max(np.ptp(poly.real), np.ptp(poly.imag))
    return float(span)


def contains(poly: np.ndarray, pts) -> np.ndarray:
    """Even-odd point-in-polygon test, vectorized over points."""
    pts = np.atleast_1d(np.asarray(pts, dtype=complex))
    out = np.zeros(len(pts), dtype=bool)
    a = poly
    b = np.roll(poly, -1)
    ax, ay, bx, by = a.real, a.imag, b.real, b.imag
    step = max(1, _CHUNK // max(len(poly), 1))
    for s in range(0, len(pts), step):
        p = pts[s:s + step, None]
        px, py = p.real, p.imag
        cond = (ay > py) != (by > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = ax + (py - ay) * (bx - ax) / (by - ay)
        hits = cond & (px < xint)
        out[s:s + step] = (np.count_nonzero(hits, axis=1) % 2) == 1
    return out


def segment_distance(poly: np.ndarray, pts) -> np.ndarray:
    """Distance from each point to the polygon boundary."""
    pts = np.atleast_1d(np.asarray(pts, dtype=complex))
    a = poly
    e = np.roll(poly, -1) - poly
    ee = np.abs(e) ** 2
    ee[ee == 0] = 1.0
    out = np.empty(len(pts))
    step = max(1, _CHUNK // max(len(poly), 1))
    for s in range(0, len(pts), step):
        p = pts[s:s + step, None]
        t = np.clip(((p - a) * e.conj()).real / ee, 0.0, 1.0)
        out[s:s + step] = np.abs(p - (a + t * e)).min(axis=1)
    return out


def boundary_gap(p: np.ndarray, q: np.ndarray, k: int = 8) -> float:
    """Approximate minimum distance between two polygon boundaries.

    Vertices of each polygon are tested against the segments adjacent to the
    k nearest vertices of the other; exact when segments are short compared
    with the gap.
    """
    def one_way(src, dst):
        tree = cKDTree(np.column_stack([dst.real, dst.imag]))
        kk = min(k, len(dst))
        _, idx = tree.query(np.column_stack([src.real, src.imag]), k=kk)
        idx = np.atleast_2d(idx)
        if idx.shape[0] != len(src):
            idx = idx.T
        best = np.full(len(src), np.inf)
        n = len(dst)
        for off in (0, -1):
            ia = (idx + off) % n
            a = dst[ia]
            e = dst[(ia + 1) % n] - a
            ee = np.abs(e) ** 2
            ee[ee == 0] = 1.0
            t = np.clip(((src[:, None] - a) * e.conj()).real / ee, 0, 1)
            d = np.abs(src[:, None] - (a + t * e)).min(axis=1)
            best = np.minimum(best, d)
        return float(best.min())

    return min(one_way(p, q), one_way(q, p))


def densify(poly: np.ndarray, max_seg: float) -> np.ndarray:
    """Insert evenly spaced points so that no edge exceeds max_seg."""
    nxt = np.roll(poly, -1)
    lengths = np.abs(nxt - poly)
    counts = np.maximum(1, np.ceil(lengths / max_seg).astype(int))
    if counts.max() == 1:
        return poly
    pieces = []
    for a, b, n in zip(poly, nxt, counts):
        pieces.append(a + (b - a) * np.arange(n) / n)
    return np.concatenate(pieces)


def circle(center: complex, radius: float, n: int = 1024) -> np.ndarray:
    t = 2 * np.pi * np.arange(n) / n
    return center + radius * np.exp(1j * t)


def is_simple(poly: np.ndarray) -> bool:
    from shapely.geometry import LinearRing

    ring = LinearRing(np.column_stack([poly.real, poly.imag]))
    return bool(ring.is_simple)


def winding_number(poly: np.ndarray, z: complex) -> int:
    d = poly - z
    ang = np.angle(np.roll(d, -1) / d)
    return int(round(ang.sum() / (2 * np.pi)))


def ray_crossings(poly: np.ndarray, center: complex, directions: np.ndarray):
    """Distances t > 0 at which half-lines center + t*dir cross the polygon.

    Returns a list with one sorted array per direction. Uses the half-open
    side rule so a ray through a vertex is counted consistently.
    """
    a = poly - center
    b = np.roll(a, -1)
    e = b - a
    out = []
    step = max(1, _CHUNK // max(len(poly), 1))
    for s in range(0, len(directions), step):
        d = directions[s:s + step, None]
        # side of each vertex relative to the line through center along d
        sa = (d.real * a.imag - d.imag * a.real) >= 0
        sb = (d.real * b.imag - d.imag * b.real) >= 0
        cross_de = d.real * e.imag - d.imag * e.real
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (a.real * e.imag - a.imag * e.real) / cross_de
        ok = (sa != sb) & (t > 0)
        for row_t, row_ok in zip(t, ok):
            out.append(np.sort(row_t[row_ok]))
    return out


def circle_crossings(poly: np.ndarray, center: complex, radii: np.ndarray):
    """Angles in [0, 2pi) at which circles |z - center| = r cross the polygon."""
    a = poly - center
    e = np.roll(a, -1) - a
    ee = np.abs(e) ** 2
    ee[ee == 0] = 1e-300
    bh = (a * e.conj()).real  # half of the linear coefficient
    aa = np.abs(a) ** 2
    out = []
    step = max(1, _CHUNK // max(len(poly), 1))
    for s in range(0, len(radii), step):
        r2 = (radii[s:s + step, None]) ** 2
        disc = bh * bh - ee * (aa - r2)
        good = disc >= 0
        sq = np.sqrt(np.where(good, disc, 0.0))
        res = []
        for sign in (-1.0, 1.0):
            root = (-bh + sign * sq) / ee
            okr = good & (root >= 0) & (root < 1)
            if sign > 0:
                okr &= sq > 0
            res.append((root, okr))
        for k in range(r2.shape[0]):
            angs = []
            for root, okr in res:
                m = okr[k]
                if m.any():
                    angs.append(np.angle(a[m] + root[k, m] * e[m]))
            if angs:
                v = np.concatenate(angs) % (2 * np.pi)
                out.append(np.sort(v))
            else:
                out.append(np.empty(0))
    return out

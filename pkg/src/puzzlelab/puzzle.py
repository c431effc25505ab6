"""Yoccoz puzzle pieces: the initial puzzle cut out by the alpha rays and the
equipotential G0, and pullbacks of pieces under z -> z^2 + c."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from . import geometry as geo
from .dynamics import as_c, fixed_points, rotation_cycle
from .rays import RayBudget, alpha_rotation_number, equipotential_curve, ray_field, trace_ray

AMBIGUITY_TOL = 1e-12
SIMPLIFY_TOL = 1e-5  # relative to the piece diameter
LIFT_STEP = 0.25  # max edge length relative to its distance from c before lifting


class UndeterminedRotation(RuntimeError):
    """The rotation number of alpha could not be determined within budget."""


class RayLandingError(RuntimeError):
    """A ray needed for the puzzle did not land."""


class BranchError(RuntimeError):
    """A piece boundary passes through the critical value."""


@dataclass(frozen=True)
class PieceAddress:
    depth: int
    index: int
    angles: tuple  # bounding ray angles (exact fractions), sorted

    def to_json(self) -> dict:
        return {"depth": self.depth, "index": self.index,
                "angles": [f"{a.numerator}/{a.denominator}" for a in self.angles]}


@dataclass(frozen=True, eq=False)
class PuzzlePiece:
    """A closed, positively oriented polygon with its puzzle depth.

    `labels[k]` is the index in `address.angles` of the ray whose outermost
    point is vertex k, or -1. `level` and `substeps` identify the ray ladder
    the piece was cut from, so that labels can follow pullbacks.
    """

    boundary: np.ndarray
    depth: int
    address: PieceAddress
    contains_critical_point: bool
    labels: np.ndarray = field(repr=False, default=None)
    level: float = 1.0
    substeps: int = 4

    def __post_init__(self):
        b = geo.as_polygon(self.boundary)
        object.__setattr__(self, "boundary", b)
        if self.labels is None:
            object.__setattr__(self, "labels", np.full(len(b), -1, dtype=np.int64))

    @property
    def angles(self) -> tuple:
        return self.address.angles

    def to_json(self, c) -> dict:
        c = as_c(c)
        return {"c": [c.real, c.imag], "depth": self.depth,
                "address": self.address.to_json(),
                "contains_critical_point": self.contains_critical_point,
                "boundary": [[float(z.real), float(z.imag)] for z in self.boundary]}


def piece_from_json(doc: dict) -> PuzzlePiece:
    b = np.array([complex(x, y) for x, y in doc["boundary"]])
    addr = doc.get("address", {})
    angles = tuple(Fraction(a) for a in addr.get("angles", []))
    return PuzzlePiece(b, int(doc["depth"]),
                       PieceAddress(int(doc["depth"]), int(addr.get("index", 0)), angles),
                       bool(geo.contains(b, [0])[0]))


def dump_pieces(c, pieces, path):
    with open(path, "w") as fh:
        json.dump([p.to_json(c) for p in pieces], fh, indent=1)


@dataclass(frozen=True)
class Membership:
    inside: bool
    ambiguous: bool

    def __bool__(self):
        return self.inside


def piece_contains(piece, z: complex) -> Membership:
    """Even-odd test; points within 1e-12 of the boundary are flagged."""
    poly = piece.boundary if isinstance(piece, PuzzlePiece) else geo.as_polygon(piece)
    inside = bool(geo.contains(poly, [z])[0])
    ambiguous = bool(geo.segment_distance(poly, [z])[0] < AMBIGUITY_TOL)
    return Membership(inside, ambiguous)


# ---------------------------------------------------------------------------
# initial puzzle


def _arc_angles(lo: Fraction, hi: Fraction, samples: int) -> np.ndarray:
    """Sample indices k with lo < k/samples < hi (hi may exceed 1)."""
    k0 = math.floor(lo * samples) + 1
    k1 = math.ceil(hi * samples) - 1
    return np.arange(k0, k1 + 1)


def initial_puzzle(c, budget: RayBudget = RayBudget(), samples: int = 1024) -> list[PuzzlePiece]:
    """The p pieces cut from the equipotential disk of level G0 by the rays
    landing at alpha. Piece i lies between the i-th and (i+1)-th smallest
    angles, counter-clockwise."""
    c = as_c(c)
    rot = alpha_rotation_number(c, budget)
    if rot is None:
        raise UndeterminedRotation(f"rotation number of alpha undetermined at c={c}")
    angles = sorted(rotation_cycle(rot.numerator, rot.denominator).angles)
    alpha = fixed_points(c).alpha
    traces = []
    for a in angles:
        tr = trace_ray(c, a, budget)
        if not tr.landed:
            raise RayLandingError(f"ray {a} did not land")
        traces.append(tr)
    equip = equipotential_curve(c, budget.potential_start, samples, budget.substeps)
    p = len(angles)
    pieces = []
    for i in range(p):
        lo, hi = angles[i], angles[(i + 1) % p] + (1 if i == p - 1 else 0)
        ks = _arc_angles(lo, hi, samples)
        out_ray = traces[i].points[::-1]
        in_ray = traces[(i + 1) % p].points
        arc = equip[ks % samples]
        boundary = np.concatenate([[alpha], out_ray, arc, in_ray])
        local = tuple(sorted((angles[i], angles[(i + 1) % p])))
        labels = np.full(len(boundary), -1, dtype=np.int64)
        labels[len(out_ray)] = local.index(angles[i])  # outer end of each ray
        labels[len(out_ray) + len(arc) + 1] = local.index(angles[(i + 1) % p])
        boundary = geo.densify(boundary, 0.02 * geo.diameter(boundary))
        labels = _carry_labels(boundary, np.concatenate([[alpha], out_ray, arc, in_ray]), labels)
        addr = PieceAddress(0, i, local)
        pieces.append(PuzzlePiece(boundary, 0, addr, bool(geo.contains(boundary, [0])[0]),
                                  labels, budget.potential_start, budget.substeps))
    crit = [p_.contains_critical_point for p_ in pieces]
    if sum(crit) != 1:
        raise RuntimeError(f"expected exactly one critical initial piece, got {sum(crit)}")
    return pieces


def _carry_labels(dense: np.ndarray, original: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Labels of `original` vertices transferred to `dense`, which contains
    them in order as a subsequence."""
    out = np.full(len(dense), -1, dtype=np.int64)
    j = 0
    for k, z in enumerate(original):
        while dense[j] != z:
            j += 1
        out[j] = labels[k]
        j += 1
    return out


# ---------------------------------------------------------------------------
# pullback


def _refine_near(poly: np.ndarray, labels: np.ndarray, c: complex, scale: float):
    """Subdivide edges so each sub-edge is at most LIFT_STEP times its
    distance from c; spacing is graded geometrically towards c."""
    nxt = np.roll(poly, -1)
    e = nxt - poly
    ee = np.abs(e) ** 2
    ee[ee == 0] = 1.0
    t = np.clip(((c - poly) * e.conj()).real / ee, 0, 1)
    d = np.abs(poly + t * e - c)
    if (d < 1e-12 * scale).any():
        raise BranchError("boundary through critical value")
    length = np.abs(e)
    need = np.nonzero(length > LIFT_STEP * d)[0]
    if len(need) == 0:
        return poly, labels
    pts, labs = [], []
    last = 0
    for k in need:
        pts.append(poly[last:k + 1])
        labs.append(labels[last:k + 1])
        L, s_star, dk = length[k], t[k] * length[k], d[k]
        params = []
        for direction, bound in ((1, L), (-1, 0.0)):
            s = s_star
            while True:
                s = s + direction * LIFT_STEP * math.hypot(dk, s - s_star) * 0.999
                if (direction > 0 and s >= L) or (direction < 0 and s <= 0):
                    break
                params.append(s)
        if 0 < s_star < L:
            params.append(s_star)
        params = np.sort(np.array(params)) / L
        pts.append(poly[k] + params * e[k])
        labs.append(np.full(len(params), -1, dtype=np.int64))
        last = k + 1
    pts.append(poly[last:])
    labs.append(labels[last:])
    return np.concatenate(pts), np.concatenate(labs)


def _lift(poly: np.ndarray, c: complex):
    """Continuous square-root lift of the closed polygon; returns the lifted
    vertices and whether the lift fails to close (the polygon winds around c)."""
    w = np.sqrt(poly - c)
    flip = np.zeros(len(w), dtype=bool)
    flip[1:] = np.abs(w[1:] - w[:-1]) > np.abs(w[1:] + w[:-1])
    sign = np.where(np.cumsum(flip) % 2 == 1, -1.0, 1.0)
    lifted = sign * w
    opens = abs(lifted[-1] - lifted[0]) > abs(lifted[-1] + lifted[0])
    return lifted, bool(opens)


def simplify(poly: np.ndarray, keep: np.ndarray, tol: float) -> np.ndarray:
    """Douglas-Peucker on a closed polygon; vertices with keep=True survive.
    Returns the indices of the retained vertices."""
    n = len(poly)
    anchors = np.nonzero(keep)[0].tolist()
    if 0 not in anchors:
        anchors = [0] + anchors
    anchors = sorted(set(anchors))
    if len(anchors) == 1:
        anchors.append(n // 2)
    kept = np.zeros(n, dtype=bool)
    kept[anchors] = True
    ext = np.concatenate([poly, poly[:1]])
    bounds = anchors + [n]
    for a, b in zip(bounds[:-1], bounds[1:]):
        stack = [(a, b)]
        while stack:
            i, j = stack.pop()
            if j - i < 2:
                continue
            seg = ext[i + 1:j]
            p, q = ext[i], ext[j]
            e = q - p
            if abs(e) == 0:
                dist = np.abs(seg - p)
            else:
                dist = np.abs(((seg - p) * e.conjugate()).imag) / abs(e)
            k = int(np.argmax(dist))
            if dist[k] > tol:
                m = i + 1 + k
                kept[m % n] = True
                stack.append((i, m))
                stack.append((m, j))
    return np.nonzero(kept)[0]


def pull_back_piece(c, piece: PuzzlePiece, anchor: complex, *, index: int | None = None,
                    simplify_tol: float = SIMPLIFY_TOL) -> PuzzlePiece:
    """The component of f^-1(piece) containing `anchor`.

    Boundary vertices are lifted through w = +-sqrt(z - c) with the branch
    continued along the polygon. When the piece contains c the lift only
    closes after two turns and the preimage is a single piece whose boundary
    runs through both branches; otherwise the branch containing the anchor is
    kept. Ray labels are re-identified on the ladder at the new depth.
    """
    c = as_c(c)
    anchor = complex(anchor)
    image = anchor * anchor + c
    mem = piece_contains(piece, image)
    if not mem.inside and not mem.ambiguous:
        raise ValueError("f(anchor) is not inside the piece")
    poly = piece.boundary
    scale = geo.diameter(poly)
    poly, labels = _refine_near(poly, piece.labels, c, scale)
    lifted, opens = _lift(poly, c)
    if opens:
        boundary = np.concatenate([lifted, -lifted])
        labels = np.concatenate([labels, labels])
    else:
        choose = [geo.contains(cand, [anchor])[0] for cand in (lifted, -lifted)]
        if choose[0] == choose[1]:
            # anchor on the boundary or numerically ambiguous: nearest wins
            dist = [geo.segment_distance(cand, [anchor])[0] for cand in (lifted, -lifted)]
            pick = 0 if (choose[0] and dist[0] >= dist[1]) or (not choose[0] and dist[0] <= dist[1]) else 1
        else:
            pick = 0 if choose[0] else 1
        boundary = lifted if pick == 0 else -lifted

    depth = piece.depth + 1
    angles = _relabel(c, piece, boundary, labels, depth)
    uniq = tuple(sorted(set(a for a in angles if a is not None)))
    new_labels = np.array([uniq.index(a) if a is not None else -1 for a in angles],
                          dtype=np.int64) if len(angles) else labels
    if simplify_tol:
        keep = simplify(boundary, new_labels >= 0, simplify_tol * geo.diameter(boundary))
        boundary, new_labels = boundary[keep], new_labels[keep]
    if geo.signed_area(boundary) < 0:
        boundary, new_labels = boundary[::-1].copy(), new_labels[::-1].copy()
    idx = piece.address.index if index is None else index
    return PuzzlePiece(boundary, depth, PieceAddress(depth, idx, uniq),
                       bool(geo.contains(boundary, [0])[0]), new_labels,
                       piece.level, piece.substeps)


def _relabel(c, piece: PuzzlePiece, boundary: np.ndarray, labels: np.ndarray, depth: int):
    """Angle (or None) of each vertex of the lifted boundary."""
    out = [None] * len(boundary)
    marked = np.nonzero(labels >= 0)[0]
    if len(marked) == 0:
        return out
    fld = ray_field(c, piece.level, piece.substeps)
    rung = fld.rung_of_depth(depth)
    real_c = c.imag == 0
    for k in marked:
        theta = piece.address.angles[labels[k]]
        half = theta / 2
        w = boundary[k]
        if real_c and w.imag != 0 and half != 0:
            # for real c the rays with angles in (0, 1/2) fill the upper half-plane
            out[k] = half if w.imag > 0 else half + Fraction(1, 2)
            continue
        ref = fld.point(half, rung)
        out[k] = half if abs(w - ref) <= abs(w + ref) else half + Fraction(1, 2)
    return out


def pull_back_along(c, piece: PuzzlePiece, orbit_points, **kw) -> PuzzlePiece:
    """Pull `piece` back along orbit points z_0, ..., z_{k-1} where
    f^k(z_0) lies in piece: the last point is lifted first."""
    for z in reversed(list(orbit_points)):
        piece = pull_back_piece(c, piece, z, **kw)
    return piece


def disk_piece(c, level: float = 1.0, samples: int = 1024, substeps: int = 4) -> PuzzlePiece:
    """The whole equipotential disk {G < level} as a depth-0 piece."""
    b = equipotential_curve(c, level, samples, substeps)
    return PuzzlePiece(b, 0, PieceAddress(0, 0, ()), True, None, level, substeps)


def piece_with(piece: PuzzlePiece, **changes) -> PuzzlePiece:
    return replace(piece, **changes)

"""The principal nest of critical puzzle pieces, first-return domains,
central cascades and quadratic-like renormalization detection."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import geometry as geo
from .dynamics import as_c, critical_orbit
from .puzzle import (BranchError, PuzzlePiece, RayLandingError, UndeterminedRotation,
                     initial_puzzle, piece_contains, pull_back_along)
from .rays import RayBudget

log = logging.getLogger(__name__)

DEFAULT_ORBIT_BUDGET = 200  # shadowing horizon of a parameter known to ~1e-10
DEFAULT_PERSISTENCE = 5
CONFINEMENT_STEPS = 10_000
MIN_DIAMETER = 1e-12
NUDGE = 1e-3


@dataclass(frozen=True)
class Verdict:
    kind: str  # q-renormalizable | non-renormalizable-so-far | escaped | budget-exhausted
    period: int | None = None

    def __str__(self):
        return f"{self.kind}(period {self.period})" if self.period else self.kind


@dataclass(frozen=True, eq=False)
class NestLevel:
    n: int
    piece: PuzzlePiece
    return_time: int | None  # first return time of 0 to the previous level
    central: bool | None


@dataclass(frozen=True)
class CascadeSpan:
    first_level: int
    length: int
    open_ended: bool = False


@dataclass(eq=False)
class PrincipalNest:
    c: complex
    levels: list
    verdict: Verdict
    orbit: np.ndarray
    initial_pieces: list = field(default_factory=list)
    error: str | None = None
    events: list = field(default_factory=list)
    cascades: list = field(default_factory=list)
    potential_start: float = 1.0
    _domains: dict = field(default_factory=dict, repr=False)

    @property
    def kappa(self) -> int:
        return sum(1 for lv in self.levels[1:] if lv.central is False)

    @property
    def flags(self) -> list:
        """Central flags indexed by return level (entry n-1 for level n)."""
        return [lv.central for lv in self.levels[1:]]

    @property
    def return_times(self) -> list:
        return [lv.return_time for lv in self.levels[1:]]

    @property
    def omega_cascade_length(self) -> int | None:
        """N with f^p(0) in Omega^{N-1} minus Omega^N, or None while the
        initial cascade is still running at the last built level."""
        for k, flag in enumerate(self.flags):
            if not flag:
                return k + 1
        return None

    @property
    def cut_level(self) -> int | None:
        """t such that f^p: V^{t+1} -> V^t is the detected renormalization:
        the first return level of the terminal central cascade. Deeper
        choices are degree-2 pullbacks of this one with half the modulus."""
        if self.verdict.kind != "q-renormalizable":
            return None
        spans = classify_cascades(self)
        return spans[-1].first_level if spans else None

    def to_json(self) -> dict:
        c = self.c
        return {
            "c": [c.real, c.imag],
            "levels": [{"n": lv.n, "return_time": lv.return_time, "central": lv.central,
                        "piece": lv.piece.to_json(c)} for lv in self.levels],
            "kappa": self.kappa,
            "verdict": str(self.verdict),
            "cascades": [{"first_level": s.first_level, "length": s.length,
                          "open_ended": s.open_ended} for s in self.cascades],
            "omega_cascade_length": self.omega_cascade_length,
            "cut_level": self.cut_level,
            "error": self.error,
        }


def dump_nest(nest: PrincipalNest, path):
    with open(path, "w") as fh:
        json.dump(nest.to_json(), fh, indent=1)


def _inside(poly: np.ndarray, pts: np.ndarray):
    """(inside, ambiguous) masks for many points."""
    inside = geo.contains(poly, pts)
    amb = np.zeros(len(pts), dtype=bool)
    near = np.abs(pts - poly.mean()) <= np.abs(poly - poly.mean()).max() + 1e-9
    if near.any():
        amb[near] = geo.segment_distance(poly, pts[near]) < 1e-12
    return inside, amb


def first_return(poly: np.ndarray, orbit: np.ndarray, start: int, events=None,
                 chunk: int = 2048) -> int | None:
    """Smallest k > start with orbit[k] inside poly (ambiguous hits deferred)."""
    k = start + 1
    while k < len(orbit):
        pts = orbit[k:k + chunk]
        inside, amb = _inside(poly, pts)
        for j in np.nonzero(inside | amb)[0]:
            if amb[j]:
                if events is not None:
                    events.append(f"boundary-ambiguous return at iterate {k + j} deferred")
                continue
            return int(k + j)
        k += chunk
    return None


def build_principal_nest(c, max_levels: int = 8, orbit_budget: int = DEFAULT_ORBIT_BUDGET,
                         budget: RayBudget = RayBudget(),
                         persistence: int = DEFAULT_PERSISTENCE) -> PrincipalNest:
    """V^0 is the critical piece of the initial puzzle; V^n is the pullback of
    V^{n-1} along the first return of 0 to V^{n-1}. Stops at max_levels,
    escape, a detected quadratic-like renormalization, piece underflow or a
    construction error (kept in `error` with the partial nest)."""
    c = as_c(c)
    orb = critical_orbit(c, orbit_budget)
    if orb.escaped:
        return PrincipalNest(c, [], Verdict("escaped"), orb.points)
    level_g0 = budget.potential_start
    for attempt in range(3):
        try:
            return _build(c, orb.points, max_levels, budget, persistence)
        except BranchError:
            # generic equipotential levels avoid the critical value
            level_g0 *= 1 + NUDGE
            budget = RayBudget(level_g0, budget.steps, budget.newton_tolerance,
                               budget.landing_tolerance, budget.max_p, budget.substeps)
    return PrincipalNest(c, [], Verdict("budget-exhausted"), orb.points,
                         error="boundary through critical value")


def _build(c, orbit, max_levels, budget, persistence) -> PrincipalNest:
    try:
        pieces = initial_puzzle(c, budget)
    except (UndeterminedRotation, RayLandingError) as exc:
        return PrincipalNest(c, [], Verdict("budget-exhausted"), orbit, error=str(exc))
    v0 = next(p for p in pieces if p.contains_critical_point)
    nest = PrincipalNest(c, [NestLevel(0, v0, None, None)], Verdict("non-renormalizable-so-far"),
                         orbit, pieces, potential_start=budget.potential_start)
    for n in range(1, max_levels + 1):
        prev = nest.levels[-1].piece
        k = first_return(prev.boundary, orbit, 0, nest.events)
        if k is None:
            nest.verdict = Verdict("budget-exhausted")
            break
        try:
            piece = pull_back_along(c, prev, orbit[:k], index=0)
        except BranchError:
            raise
        except (ValueError, RuntimeError) as exc:
            nest.error = f"pullback failed at level {n}: {exc}"
            nest.verdict = Verdict("budget-exhausted")
            break
        central = bool(piece_contains(piece, orbit[k]).inside)
        nest.levels.append(NestLevel(n, piece, k, central))
        verdict = detect_q_renormalization(c, nest, persistence)
        if verdict.kind == "q-renormalizable":
            nest.verdict = verdict
            break
        if geo.diameter(piece.boundary) < MIN_DIAMETER:
            break
    nest.cascades = classify_cascades(nest)
    return nest


def detect_q_renormalization(c, nest: PrincipalNest, persistence: int = DEFAULT_PERSISTENCE,
                             steps: int = CONFINEMENT_STEPS) -> Verdict:
    """q-renormalizable(p) when the last `persistence` returns are central
    with the same time p and the f^p-orbit of 0 stays in the last piece."""
    c = as_c(c)
    levels = nest.levels[1:]
    if len(levels) < persistence:
        return Verdict("non-renormalizable-so-far")
    tail = levels[-persistence:]
    periods = {lv.return_time for lv in tail}
    if not all(lv.central for lv in tail) or len(periods) != 1:
        return Verdict("non-renormalizable-so-far")
    p = periods.pop()
    pts = np.empty(steps, dtype=complex)
    w = 0j
    for j in range(steps):
        for _ in range(p):
            w = w * w + c
        pts[j] = w
        if abs(w) > 1e8:
            return Verdict("non-renormalizable-so-far")
    if geo.contains(tail[-1].piece.boundary, pts).all():
        return Verdict("q-renormalizable", p)
    return Verdict("non-renormalizable-so-far")


def classify_cascades(nest_or_flags, open_ended: bool | None = None) -> list:
    """Maximal runs of central flags as (first return level, length). A run
    reaching the end of a q-renormalizable nest is open-ended."""
    if isinstance(nest_or_flags, PrincipalNest):
        flags = nest_or_flags.flags
        if open_ended is None:
            open_ended = nest_or_flags.verdict.kind == "q-renormalizable"
    else:
        flags = list(nest_or_flags)
    spans = []
    k = 0
    while k < len(flags):
        if flags[k]:
            start = k
            while k < len(flags) and flags[k]:
                k += 1
            spans.append(CascadeSpan(start, k - start, bool(open_ended) and k == len(flags)))
        else:
            k += 1
    return spans


# ---------------------------------------------------------------------------
# first-return domains


@dataclass(frozen=True, eq=False)
class ReturnDomain:
    piece: PuzzlePiece
    representative: complex
    return_time: int
    itinerary: tuple


def _index_in(domains, z) -> int:
    for i, d in enumerate(domains):
        if piece_contains(d.piece if isinstance(d, ReturnDomain) else d, z).inside:
            return i
    return -1


def return_domains(c, nest: PrincipalNest, n: int,
                   orbit_budget: int | None = None) -> list:
    """Components V^n_i of the first-return map to V^{n-1} that meet the
    truncated critical orbit. Orbit points are processed in time order; a
    point falling in an already found domain with the same return time joins
    it, otherwise V^{n-1} is pulled back along its orbit to make a new one.
    Domain 0 is the critical piece V^n.

    The itinerary of a domain lists, for each visit of its orbit to V^{n-2}
    up to the return, the index of the level-(n-1) domain hit (-1 if not
    among the discovered ones); at level 1 the initial pieces play that role.
    """
    c = as_c(c)
    if not 1 <= n < len(nest.levels):
        raise ValueError(f"level {n} not built")
    orbit = nest.orbit if orbit_budget is None else critical_orbit(c, orbit_budget).points
    key = (n, len(orbit))
    if key in nest._domains:
        return nest._domains[key]
    W = nest.levels[n - 1].piece
    inside, amb = _inside(W.boundary, orbit)
    hits = np.nonzero(inside & ~amb)[0]
    hits = hits[hits > 0]
    times = np.concatenate([[0], hits])
    if n == 1:
        prev_domains = nest.initial_pieces
        outer = None
    else:
        prev_domains = [d.piece for d in return_domains(c, nest, n - 1, len(orbit) - 1)]
        outer = nest.levels[n - 2].piece.boundary

    domains: list[ReturnDomain] = []
    for a, b in zip(times[:-1], times[1:]):
        z, r = orbit[a], int(b - a)
        found = None
        for i, d in enumerate(domains):
            if d.return_time == r and piece_contains(d.piece, z).inside:
                found = i
                break
        if found is not None:
            continue
        if a == 0:
            piece = nest.levels[n].piece
        else:
            try:
                piece = pull_back_along(c, W, orbit[a:b], index=len(domains))
            except (ValueError, RuntimeError) as exc:
                nest.events.append(f"domain pullback failed at level {n}, time {a}: {exc}")
                continue
        segment = orbit[a + 1:b + 1]
        if outer is not None:
            segment = segment[geo.contains(outer, segment)]
        itinerary = tuple(_index_in(prev_domains, z_) for z_ in segment)
        domains.append(ReturnDomain(piece, complex(z), r, itinerary))
    if not domains or domains[0].representative != orbit[0]:
        nest.events.append(f"level {n}: critical domain missing")
    nest._domains[key] = domains
    return domains


# ---------------------------------------------------------------------------
# signatures


@dataclass(frozen=True)
class CombinatorialSignature:
    depth: int
    records: tuple  # (return_time, central, sorted non-critical itinerary indices)


def combinatorial_signature(c, depth: int, orbit_budget: int = DEFAULT_ORBIT_BUDGET,
                            budget: RayBudget = RayBudget()) -> CombinatorialSignature:
    nest = build_principal_nest(c, depth, orbit_budget, budget)
    if nest.error:
        raise RuntimeError(nest.error)
    records = []
    for lv in nest.levels[1:depth + 1]:
        doms = return_domains(c, nest, lv.n)
        itin = doms[0].itinerary if doms else ()
        records.append((lv.return_time, lv.central, tuple(sorted(i for i in itin if i != 0))))
    return CombinatorialSignature(depth, tuple(records))


# ---------------------------------------------------------------------------
# renormalization annulus


@dataclass(frozen=True)
class RenormalizationAnnulus:
    outer: np.ndarray
    inner: np.ndarray
    cut_level: int
    thickened: bool
    thickening: float
    valid: bool = True


def thicken(piece: PuzzlePiece, radius: float) -> PuzzlePiece:
    """The piece together with its radius-neighbourhood, as a polygon."""
    from shapely.geometry import Polygon

    poly = Polygon(np.column_stack([piece.boundary.real, piece.boundary.imag]))
    grown = poly.buffer(radius, quad_segs=32)
    xy = np.asarray(grown.exterior.coords)[:-1]
    b = geo.positively_oriented(xy[:, 0] + 1j * xy[:, 1])
    b = geo.densify(b, radius / 4)
    return PuzzlePiece(b, piece.depth, piece.address, piece.contains_critical_point,
                       None, piece.level, piece.substeps)


def renormalization_annulus(c, nest: PrincipalNest, thickening: Sequence[float] = (0.1, 0.05, 0.02),
                            gap_tol: float = 1e-6) -> RenormalizationAnnulus:
    """The fundamental annulus of f^p: V^{t+1} -> V^t at the cut level t.

    When the two pieces touch (satellite renormalizations pinch at alpha and
    its preimages) the outer piece is replaced by its neighbourhood U of
    relative radius from `thickening` (largest admissible radius first), and
    the inner one by the component of f^-p(U) containing 0.
    """
    c = as_c(c)
    t = nest.cut_level
    if t is None:
        raise ValueError("nest has no quadratic-like renormalization")
    outer = nest.levels[t].piece
    inner = nest.levels[t + 1].piece
    p = nest.levels[t + 1].return_time
    diam = geo.diameter(outer.boundary)
    if geo.boundary_gap(outer.boundary, inner.boundary) > gap_tol * diam:
        return RenormalizationAnnulus(outer.boundary, inner.boundary, t, False, 0.0)
    last = None
    for rel in thickening:
        U = thicken(outer, rel * diam)
        U1 = pull_back_along(c, U, nest.orbit[:p])
        inside = geo.contains(U.boundary, U1.boundary).all()
        gap = geo.boundary_gap(U.boundary, U1.boundary)
        ok = bool(inside and gap > gap_tol * diam)
        last = RenormalizationAnnulus(U.boundary, U1.boundary, t, True, rel, ok)
        if ok:
            return last
    return last

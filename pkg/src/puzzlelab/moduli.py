"""Numerical conformal geometry of ring domains.

Moduli follow the convention mod{r < |z| < R} = log(R/r) / (2 pi), so the
modulus is the reciprocal of the Dirichlet energy of the harmonic measure
of the outer boundary.

The Laplace problem is solved on a log-polar lattice w = log(z - a) with the
base point a inside the inner curve. Dirichlet energy is conformally
invariant, so the energy computed in the w-plane is the energy of the ring
domain itself, while the lattice resolves small inner curves as finely as
large outer ones. Boundary-crossing edges use Shortley-Weller cut fractions
taken from exact ray/segment and circle/segment intersections.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import geometry as geo

DEFAULT_GRID = 512
CONVERGENCE_RATIO = 0.05
MIN_CUT_FRACTION = 1e-3
RESIDUAL_TOL = 1e-8

FREE, ZERO, ONE = 0, 1, 2


class ModulusPreconditionError(ValueError):
    """The curves do not form a valid ring domain."""


class ResolutionError(RuntimeError):
    """The lattice cannot separate the two boundaries."""


def _check_inside(container: np.ndarray, pts: np.ndarray, what: str):
    tol = 1e-9 * geo.diameter(container)
    outside = ~geo.contains(container, pts)
    if outside.any():
        d = geo.segment_distance(container, pts[outside])
        if (d > tol).any():
            raise ModulusPreconditionError(what)


@dataclass(frozen=True)
class RingDomain:
    """The region inside `outer`, outside `inner` and outside every `excluded`
    curve. Boundaries may touch (degenerate rings); they may not cross."""

    outer: np.ndarray
    inner: np.ndarray
    excluded: tuple = ()

    def __post_init__(self):
        outer = geo.as_polygon(self.outer)
        inner = geo.as_polygon(self.inner)
        excluded = tuple(geo.as_polygon(e) for e in self.excluded)
        _check_inside(outer, inner, "inner curve is not inside the outer curve")
        for k, e in enumerate(excluded):
            _check_inside(outer, e, f"excluded curve {k} is not inside the outer curve")
            if geo.contains(e, inner).any() or geo.contains(inner, e).any():
                raise ModulusPreconditionError(f"excluded curve {k} meets the inner curve")
            for m in range(k):
                if geo.contains(excluded[m], e).any() or geo.contains(e, excluded[m]).any():
                    raise ModulusPreconditionError(f"excluded curves {m} and {k} overlap")
        object.__setattr__(self, "outer", outer)
        object.__setattr__(self, "inner", inner)
        object.__setattr__(self, "excluded", excluded)

    def transformed(self, scale: complex, shift: complex) -> "RingDomain":
        f = lambda p: scale * p + shift  # noqa: E731
        return RingDomain(f(self.outer), f(self.inner), tuple(f(e) for e in self.excluded))


@dataclass(frozen=True)
class ModulusEstimate:
    value: float
    grid: int
    richardson: float
    converged: bool
    degenerate: bool = False

    def as_row(self, n=None) -> dict:
        row = {"value": self.value, "grid": self.grid,
               "richardson": self.richardson, "converged": self.converged}
        if n is not None:
            row = {"n": n, **row}
        return row


def interior_point(poly: np.ndarray, samples: int = 64) -> complex:
    """A point well inside the polygon: the area centroid when it is deep
    enough, otherwise the deepest point of a sampling lattice."""
    poly = geo.as_polygon(poly)
    c = geo.centroid(poly)
    xs = np.linspace(poly.real.min(), poly.real.max(), samples + 2)[1:-1]
    ys = np.linspace(poly.imag.min(), poly.imag.max(), samples + 2)[1:-1]
    pts = (xs[None, :] + 1j * ys[:, None]).ravel()
    pts = pts[geo.contains(poly, pts)]
    if len(pts) == 0:
        if geo.contains(poly, [c])[0]:
            return c
        raise ModulusPreconditionError("could not find an interior point")
    d = geo.segment_distance(poly, pts)
    best = pts[int(np.argmax(d))]
    if geo.contains(poly, [c])[0]:
        if geo.segment_distance(poly, [c])[0] >= 0.5 * d.max():
            return c
    return complex(best)


# ---------------------------------------------------------------------------
# lattice solver


def _inside_on_rays(poly, a, directions, radii):
    """inside[i, j] for the node at radius radii[i] on ray j, plus the
    crossing distances per ray."""
    rays = geo.ray_crossings(poly, a, directions)
    inside = np.empty((len(radii), len(directions)), dtype=bool)
    for j, t in enumerate(rays):
        beyond = len(t) - np.searchsorted(t, radii, side="right")
        inside[:, j] = (beyond % 2) == 1
    return inside, rays


def _cut_fraction(values, lo, hi, from_lo: bool, h: float) -> float:
    """Fraction of a lattice edge [lo, hi] (in lattice coordinates) between the
    free endpoint and the nearest boundary crossing."""
    k0 = np.searchsorted(values, lo, side="left")
    k1 = np.searchsorted(values, hi, side="right")
    hits = values[k0:k1]
    if len(hits) == 0:
        return 0.5
    theta = (hits[0] - lo) / h if from_lo else (hi - hits[-1]) / h
    return float(min(max(theta, MIN_CUT_FRACTION), 1.0))


def _lattice_energy(domain: RingDomain, a: complex, grid: int) -> float:
    curves = [domain.outer, domain.inner, *domain.excluded]
    d_in = float(geo.segment_distance(domain.inner, [a])[0])
    rho = float(np.abs(domain.outer - a).max())
    if d_in <= 0:
        raise ModulusPreconditionError("base point lies on the inner curve")
    span = math.log(rho / d_in)
    h = max(span, 2 * math.pi) / grid
    n_v = max(8, int(math.ceil(2 * math.pi / h)))
    h = 2 * math.pi / n_v
    u_lo = math.log(d_in) - 2 * h
    n_u = int(math.ceil((span + 4 * h) / h)) + 1
    u = u_lo + h * np.arange(n_u)
    v = h * np.arange(n_v)
    radii = np.exp(u)
    directions = np.exp(1j * v)

    owner = np.full((n_u, n_v), -1, dtype=np.int64)
    state = np.full((n_u, n_v), FREE, dtype=np.int8)
    rays = []
    for k, poly in enumerate(curves):
        inside, crossings = _inside_on_rays(poly, a, directions, radii)
        rays.append([np.log(t) if len(t) else t for t in crossings])
        if k == 0:
            state[~inside] = ONE
            owner[~inside] = 0
        else:
            hit = inside & (state == FREE)
            state[hit] = ZERO
            owner[hit] = k

    free = state == FREE
    n_free = int(free.sum())
    if n_free == 0:
        raise ResolutionError("no interior lattice nodes")
    # a direct 0-1 edge means the boundaries are not separated on this lattice
    zero, one = state == ZERO, state == ONE
    if ((zero[:-1] & one[1:]) | (one[:-1] & zero[1:])).any() or \
            ((zero & np.roll(one, -1, axis=1)) | (one & np.roll(zero, -1, axis=1))).any():
        raise ResolutionError("inner and outer boundaries touch at lattice resolution")

    index = np.full((n_u, n_v), -1, dtype=np.int64)
    index[free] = np.arange(n_free)
    bval = np.where(state == ONE, 1.0, 0.0)

    rows, cols, vals = [], [], []
    diag = np.zeros(n_free)
    rhs = np.zeros(n_free)
    cuts = []  # (free index, boundary value, conductance)
    circle_cache: dict = {}

    def circle_hits(k, i):
        key = (k, i)
        if key not in circle_cache:
            circle_cache[key] = geo.circle_crossings(curves[k], a, radii[i:i + 1])[0]
        return circle_cache[key]

    # radial edges (i, j) - (i + 1, j)
    for di, (s_a, s_b) in enumerate([(slice(None, -1), slice(1, None))]):
        fa, fb = free[s_a], free[s_b]
        both = fa & fb
        ia, ib = index[s_a][both], index[s_b][both]
        rows += [ia, ib]
        cols += [ib, ia]
        vals += [-np.ones(len(ia)), -np.ones(len(ia))]
        np.add.at(diag, ia, 1.0)
        np.add.at(diag, ib, 1.0)
        for i, j in zip(*np.nonzero(fa & ~fb)):
            k = owner[i + 1, j]
            th = _cut_fraction(rays[k][j], u[i], u[i + 1], True, h)
            cuts.append((index[i, j], bval[i + 1, j], 1.0 / th))
        for i, j in zip(*np.nonzero(~fa & fb)):
            k = owner[i, j]
            th = _cut_fraction(rays[k][j], u[i], u[i + 1], False, h)
            cuts.append((index[i + 1, j], bval[i, j], 1.0 / th))

    # angular edges (i, j) - (i, j + 1), periodic in j
    fb_all = np.roll(free, -1, axis=1)
    both = free & fb_all
    ia = index[both]
    ib = np.roll(index, -1, axis=1)[both]
    rows += [ia, ib]
    cols += [ib, ia]
    vals += [-np.ones(len(ia)), -np.ones(len(ia))]
    np.add.at(diag, ia, 1.0)
    np.add.at(diag, ib, 1.0)
    for i, j in zip(*np.nonzero(free & ~fb_all)):
        j1 = (j + 1) % n_v
        k = owner[i, j1]
        hits = circle_hits(k, i)
        lo = v[j]
        th = _cut_fraction(hits, lo, lo + h, True, h) if j1 else \
            _cut_fraction(np.where(hits < lo, hits + 2 * math.pi, hits), lo, lo + h, True, h)
        cuts.append((index[i, j], bval[i, j1], 1.0 / th))
    for i, j in zip(*np.nonzero(~free & fb_all)):
        j1 = (j + 1) % n_v
        k = owner[i, j]
        hits = circle_hits(k, i)
        lo = v[j]
        th = _cut_fraction(hits, lo, lo + h, False, h) if j1 else \
            _cut_fraction(np.where(hits < lo, hits + 2 * math.pi, hits), lo, lo + h, False, h)
        cuts.append((index[i, j1], bval[i, j], 1.0 / th))

    if cuts:
        ci = np.array([c[0] for c in cuts], dtype=np.int64)
        cb = np.array([c[1] for c in cuts])
        cw = np.array([c[2] for c in cuts])
        np.add.at(diag, ci, cw)
        np.add.at(rhs, ci, cw * cb)
    else:
        ci = np.zeros(0, dtype=np.int64)
        cb = cw = np.zeros(0)

    rows.append(np.arange(n_free))
    cols.append(np.arange(n_free))
    vals.append(diag)
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n_free, n_free))
    x = _solve(A, rhs)

    # Dirichlet energy of the discrete potential
    flat = np.zeros((n_u, n_v))
    flat[free] = x
    e_rad = free[:-1] & free[1:]
    e_ang = free & fb_all
    energy = float(np.sum((flat[:-1] - flat[1:])[e_rad] ** 2))
    energy += float(np.sum((flat - np.roll(flat, -1, axis=1))[e_ang] ** 2))
    energy += float(np.sum(cw * (x[ci] - cb) ** 2))
    return energy


def _solve(A, rhs):
    n = A.shape[0]
    if n <= 40_000:
        return spla.spsolve(A.tocsc(), rhs)
    import pyamg

    # Gershgorin weighting: the default weighting estimates a spectral radius
    # from an unseeded random vector, which breaks bitwise reproducibility
    ml = pyamg.smoothed_aggregation_solver(
        A, symmetry="symmetric", smooth=("jacobi", {"omega": 4.0 / 3.0, "weighting": "local"}))
    x0 = spla.spsolve(sp.diags(A.diagonal()).tocsc(), rhs)
    x = ml.solve(rhs, x0=x0, tol=RESIDUAL_TOL, accel="cg", maxiter=500)
    return x


def _modulus_at(domain: RingDomain, grid: int, a: complex) -> float:
    return 1.0 / _lattice_energy(domain, a, grid)


def estimate_modulus(domain: RingDomain, grid: int = DEFAULT_GRID,
                     center: complex | None = None) -> ModulusEstimate:
    """Modulus of the ring domain, with a half-resolution rerun as the
    convergence indicator. Raises ResolutionError for touching boundaries."""
    if grid < 16:
        raise ValueError("grid must be >= 16")
    a = interior_point(domain.inner) if center is None else complex(center)
    value = _modulus_at(domain, grid, a)
    try:
        coarse = _modulus_at(domain, grid // 2, a)
    except ResolutionError:
        coarse = float("nan")
    converged = bool(value > 0 and np.isfinite(coarse)
                     and abs(value - coarse) / value < CONVERGENCE_RATIO)
    return ModulusEstimate(value, grid, coarse, converged)


def degenerate_estimate(grid: int) -> ModulusEstimate:
    return ModulusEstimate(0.0, grid, 0.0, False, degenerate=True)


def safe_modulus(domain: RingDomain, grid: int = DEFAULT_GRID) -> ModulusEstimate:
    """estimate_modulus, mapping touching boundaries to a flagged zero."""
    try:
        return estimate_modulus(domain, grid)
    except ResolutionError:
        return degenerate_estimate(grid)


# ---------------------------------------------------------------------------
# derived quantities


@dataclass(frozen=True)
class EccentricityReport:
    inner_radius: float
    outer_radius: float
    eccentricity: float


def _require_inside(curve, a):
    curve = geo.as_polygon(curve)
    if not geo.contains(curve, [a])[0] or geo.segment_distance(curve, [a])[0] == 0:
        raise ModulusPreconditionError("point is not strictly inside the curve")
    return curve


def eccentricity(curve, a: complex) -> EccentricityReport:
    curve = _require_inside(curve, a)
    d = float(geo.segment_distance(curve, [a])[0])
    rho = float(np.abs(curve - a).max())
    return EccentricityReport(d, rho, math.log(rho / d))


@dataclass(frozen=True)
class ConformalRadius:
    radius: float
    capacity: float
    converged: bool


def conformal_radius(curve, a: complex, grid: int = DEFAULT_GRID,
                     eps_ratio: float = 1 / 64) -> ConformalRadius:
    """r_a(curve) from mod(curve minus D_eps(a)) = (log r_a - log eps)/(2 pi)."""
    curve = _require_inside(curve, a)
    eps = float(geo.segment_distance(curve, [a])[0]) * eps_ratio
    ring = RingDomain(curve, geo.circle(a, eps, 256))
    est = estimate_modulus(ring, grid, center=a)
    cap = math.log(eps) + 2 * math.pi * est.value
    return ConformalRadius(math.exp(cap), cap, est.converged)


def capacity_at_infinity(curve, a: complex, grid: int = DEFAULT_GRID,
                         far_ratio: float = 64.0) -> float:
    """cap_inf(curve): the capacity rel 0 of the exterior of the curve after
    inversion z -> 1/(z - a), i.e. minus its logarithmic capacity.

    Uses a large round disk D_M(a) around the curve:
    mod(D_M(a) minus hull) = (log M - log capacity)/(2 pi).
    """
    curve = _require_inside(curve, a)
    M = far_ratio * float(np.abs(curve - a).max())
    ring = RingDomain(geo.circle(a, M, 1024), curve)
    est = estimate_modulus(ring, grid, center=a)
    return 2 * math.pi * est.value - math.log(M)


@dataclass(frozen=True)
class AsymmetricModulus:
    moduli: tuple
    weights: tuple
    sigma: float
    estimates: tuple = field(default=(), compare=False)


def asymmetric_modulus(D, pieces, critical_index: int,
                       grid: int = DEFAULT_GRID) -> AsymmetricModulus:
    """sigma = sum of eps_i mod(R_i), eps = 1 for the critical piece, 1/2 else.

    mod(R_i) is the condenser modulus between piece i and the boundary of D
    together with all other pieces. Any annulus around piece i that avoids
    the others lies in this condenser, so the surrogate bounds the maximal
    enclosing annulus from above.
    """
    D = geo.as_polygon(D.boundary if hasattr(D, "boundary") else D)
    polys = [geo.as_polygon(p.boundary if hasattr(p, "boundary") else p) for p in pieces]
    if not 0 <= critical_index < len(polys):
        raise ModulusPreconditionError("critical_index out of range")
    estimates, moduli, weights = [], [], []
    for i, p in enumerate(polys):
        others = tuple(q for k, q in enumerate(polys) if k != i)
        est = safe_modulus(RingDomain(D, p, others), grid)
        estimates.append(est)
        moduli.append(est.value)
        weights.append(1.0 if i == critical_index else 0.5)
    sigma = float(sum(w * m for w, m in zip(weights, moduli)))
    return AsymmetricModulus(tuple(moduli), tuple(weights), sigma, tuple(estimates))


def groetzsch_defect(A: RingDomain, A1: RingDomain, A2: RingDomain,
                     grid: int = DEFAULT_GRID) -> float:
    """mod(A) - mod(A1) - mod(A2); nonnegative up to discretization error
    when A1 and A2 are disjoint essential sub-rings of A."""
    for sub in (A1, A2):
        _check_inside(A.outer, sub.outer, "sub-ring is not inside the ring")
        _check_inside(sub.inner, A.inner, "sub-ring does not surround the inner curve")
    return (estimate_modulus(A, grid).value - estimate_modulus(A1, grid).value
            - estimate_modulus(A2, grid).value)


def principal_moduli(c, nest, grid: int = DEFAULT_GRID):
    """[(n, mu_n)] with mu_n = mod(V^{n-1} minus V^n) for consecutive levels.

    Touching boundaries give a zero estimate with the degenerate flag set.
    """
    levels = list(nest.levels)
    if len(levels) < 2:
        raise ValueError("nest needs at least 2 levels")
    out = []
    for prev, cur in zip(levels[:-1], levels[1:]):
        try:
            ring = RingDomain(prev.piece.boundary, cur.piece.boundary)
        except ModulusPreconditionError:
            out.append((cur.n, degenerate_estimate(grid)))
            continue
        out.append((cur.n, safe_modulus(ring, grid)))
    return out

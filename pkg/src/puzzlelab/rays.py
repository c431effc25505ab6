"""External rays and equipotentials of z -> z^2 + c.

Points are organised on a potential ladder: rung r carries Green potential
T * 2**(-r / S), where T is a power-of-two multiple of the puzzle level G0
large enough that the Boettcher map is the identity to double precision, and
S is the number of sub-steps per halving. Since f doubles both potential and
external angle, the point of angle t at rung r is a square-root preimage of
the point of angle 2t at rung r - S; the root nearest the previous rung of
the same ray is chosen (this is the Newton basin the previous point sits in).
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .dynamics import as_c, double, fixed_points, rotation_cycle, period_and_preperiod

TOP_MODULUS = 1e8  # |w| at the lowest rung of the Boettcher band


@dataclass(frozen=True)
class RayBudget:
    potential_start: float = 0.5
    steps: int = 400
    newton_tolerance: float = 1e-13
    landing_tolerance: float = 1e-7
    max_p: int = 10
    substeps: int = 4

    def __post_init__(self):
        for name in ("potential_start", "newton_tolerance", "landing_tolerance"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("steps", "max_p", "substeps"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")


def _top_levels(g0: float) -> int:
    """Number of halvings from the top potential down to g0."""
    need = 2 * math.log(TOP_MODULUS)
    return max(0, math.ceil(math.log2(need / g0)))


def _boettcher_inverse(c: complex, potential: float, theta: float) -> complex:
    w = cmath.exp(complex(potential, 2 * math.pi * theta))
    return w - c / (2 * w)


class RayField:
    """Lazily extended ladder of ray points for one parameter, shared by all
    rays (angles are exact fractions, points are cached per angle)."""

    def __init__(self, c: complex, g0: float, substeps: int):
        self.c = complex(c)
        self.g0 = float(g0)
        self.S = int(substeps)
        self.K = _top_levels(self.g0)
        self.top = self.g0 * 2.0 ** self.K
        self.points: dict[Fraction, list[complex]] = {}
        self._doubles: dict[Fraction, Fraction] = {}

    def double(self, theta: Fraction) -> Fraction:
        d = self._doubles.get(theta)
        if d is None:
            d = self._doubles[theta] = double(theta)
        return d

    def rung_of_depth(self, depth: int) -> int:
        """Rung carrying potential g0 / 2**depth."""
        return self.S * (self.K + depth)

    def potential(self, rung: int) -> float:
        return self.top * 2.0 ** (-rung / self.S)

    def _extend(self, theta: Fraction, target: int):
        pts = self.points.setdefault(theta, [])
        if len(pts) > target:
            return
        dbl = self.points.get(self.double(theta))
        c, S = self.c, self.S
        for r in range(len(pts), target + 1):
            if r < S:
                pts.append(_boettcher_inverse(c, self.potential(r), float(theta)))
                continue
            root = cmath.sqrt(dbl[r - S] - c)
            prev = pts[r - 1]
            pts.append(root if abs(root - prev) <= abs(root + prev) else -root)

    def ensure(self, theta: Fraction, rung: int) -> list[complex]:
        """Make sure angle theta is known down to `rung`; returns its points."""
        theta = Fraction(theta) % 1
        pts = self.points.get(theta)
        if pts is not None and len(pts) > rung:
            return pts
        chain = [theta]
        while len(chain) * self.S <= rung:
            chain.append(self.double(chain[-1]))
        for m in range(len(chain) - 1, -1, -1):
            target = rung - m * self.S
            if target >= 0:
                self._extend(chain[m], target)
        return self.points[theta]

    def point(self, theta: Fraction, rung: int) -> complex:
        return self.ensure(theta, rung)[rung]

    def landing_point(self, theta: Fraction, seed: complex, tol: float = 1e-13) -> complex:
        """Periodic angles: Newton on f^m(z) = z from seed. Preperiodic: the
        preimage of the landing point of 2 theta nearest seed."""
        theta = Fraction(theta) % 1
        period, pre = period_and_preperiod(theta)
        if pre == 0:
            return _periodic_point(self.c, period, seed, tol)
        img = double(theta)
        img_pts = self.points.get(img)
        img_seed = img_pts[-1] if img_pts else seed * seed + self.c
        target = self.landing_point(img, img_seed, tol)
        root = cmath.sqrt(target - self.c)
        return root if abs(root - seed) <= abs(root + seed) else -root


@lru_cache(maxsize=32)
def ray_field(c: complex, g0: float, substeps: int) -> RayField:
    return RayField(c, g0, substeps)


def _periodic_point(c: complex, period: int, seed: complex, tol: float,
                    max_iter: int = 100) -> complex:
    z = complex(seed)
    for _ in range(max_iter):
        w, dw = z, 1.0 + 0j
        for _ in range(period):
            dw = 2 * w * dw
            w = w * w + c
        g, dg = w - z, dw - 1
        if dg == 0:
            break
        step = g / dg
        z -= step
        if abs(step) < tol * max(1.0, abs(z)):
            break
    return z


@dataclass(frozen=True)
class RayTrace:
    angle: Fraction
    points: np.ndarray
    landing_point: complex | None
    landed: bool
    diverged: bool = False


def trace_ray(c, theta, budget: RayBudget = RayBudget()) -> RayTrace:
    """Points of the external ray of angle theta from potential G0 inward.

    Descends in blocks of levels and stops once the tail is within the
    landing tolerance of the computed landing point; the trace is truncated
    at the first such point.
    """
    c = as_c(c)
    theta = Fraction(theta) % 1
    field = ray_field(c, budget.potential_start, budget.substeps)
    start = field.rung_of_depth(0)
    last = field.rung_of_depth(budget.steps)
    block = 16 * field.S
    rung = min(start + block, last)
    landing = None
    while True:
        pts = field.ensure(theta, rung)
        tail = pts[rung]
        if not all(math.isfinite(v) for v in (tail.real, tail.imag)):
            seq = np.array(pts[start:rung + 1])
            good = np.isfinite(seq)
            return RayTrace(theta, seq[good], None, False, diverged=True)
        landing = field.landing_point(theta, tail, budget.newton_tolerance)
        if abs(tail - landing) < budget.landing_tolerance or rung >= last:
            break
        rung = min(rung + block, last)
    seq = np.array(pts[start:rung + 1])
    close = np.nonzero(np.abs(seq - landing) < budget.landing_tolerance)[0]
    landed = len(close) > 0
    if landed:
        seq = seq[:close[0] + 1]
    return RayTrace(theta, seq, landing if landed else None, landed)


def ray_potentials(c, trace: RayTrace, budget: RayBudget = RayBudget()) -> np.ndarray:
    """Green potential carried by each point of a trace (by construction)."""
    field = ray_field(as_c(c), budget.potential_start, budget.substeps)
    start = field.rung_of_depth(0)
    return np.array([field.potential(start + k) for k in range(len(trace.points))])


def equipotential_curve(c, level: float, samples: int = 1024,
                        substeps: int = 4) -> np.ndarray:
    """Points of external angle j/samples and Green potential `level`."""
    c = as_c(c)
    if not level > 0:
        raise ValueError("level must be positive")
    if samples < 3:
        raise ValueError("samples must be >= 3")
    S = substeps
    K = _top_levels(level)
    top = level * 2.0 ** K
    k = np.arange(samples)
    dbl = (2 * k) % samples
    theta = k / samples
    rungs = [None] * (S * K + 1)
    for r in range(min(S, S * K + 1)):
        w = np.exp(top * 2.0 ** (-r / S) + 2j * np.pi * theta)
        rungs[r] = w - c / (2 * w)
    for r in range(S, S * K + 1):
        root = np.sqrt(rungs[r - S][dbl] - c)
        prev = rungs[r - 1]
        flip = np.abs(root - prev) > np.abs(root + prev)
        root[flip] = -root[flip]
        if not np.all(np.isfinite(root)):
            bad = int(np.nonzero(~np.isfinite(root))[0][0])
            raise FloatingPointError(f"equipotential diverged at angle {bad}/{samples}")
        rungs[r] = root
    return rungs[S * K]


def alpha_rotation_number(c, budget: RayBudget = RayBudget()) -> Fraction | None:
    """Combinatorial rotation number q/p of the alpha fixed point: the first
    rotation cycle whose rays all land at alpha, or None."""
    c = as_c(c)
    alpha = fixed_points(c).alpha
    for p in range(2, budget.max_p + 1):
        for q in range(1, p):
            if math.gcd(q, p) != 1:
                continue
            cycle = rotation_cycle(q, p)
            ok = True
            for theta in cycle.angles:
                tr = trace_ray(c, theta, budget)
                if not tr.landed or abs(tr.landing_point - alpha) > 10 * budget.landing_tolerance:
                    ok = False
                    break
            if ok:
                return Fraction(q, p)
    return None

"""The quadratic family z -> z^2 + c: orbits, fixed points, Green potential,
and the angle-doubling combinatorics of the circle."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from math import gcd

import numpy as np

ESCAPE_RADIUS = 1e8
MAX_ITER = 10_000


@dataclass(frozen=True)
class Parameter:
    c: complex

    def __post_init__(self):
        c = complex(self.c)
        if not (math.isfinite(c.real) and math.isfinite(c.imag)):
            raise ValueError(f"parameter must be finite, got {self.c!r}")
        object.__setattr__(self, "c", c)


def as_c(c: complex | Parameter) -> complex:
    """Accept either a bare complex number or a Parameter."""
    if isinstance(c, Parameter):
        return c.c
    return Parameter(c).c


@dataclass(frozen=True)
class Orbit:
    points: np.ndarray
    escaped: bool

    def __len__(self):
        return len(self.points)


def iterate(c, z0: complex, n: int, escape_radius: float = ESCAPE_RADIUS) -> Orbit:
    """Orbit z0, f(z0), ..., f^n(z0); stops after the first point beyond
    `escape_radius` and flags the escape."""
    if n < 0:
        raise ValueError("n must be >= 0")
    c = as_c(c)
    z = complex(z0)
    pts = [z]
    escaped = abs(z) > escape_radius
    for _ in range(n):
        if escaped:
            break
        z = z * z + c
        pts.append(z)
        escaped = abs(z) > escape_radius
    return Orbit(np.array(pts, dtype=complex), escaped)


def critical_orbit(c, n: int, escape_radius: float = ESCAPE_RADIUS) -> Orbit:
    return iterate(c, 0.0, n, escape_radius)


@dataclass(frozen=True)
class FixedPointPair:
    alpha: complex
    beta: complex
    alpha_multiplier: complex
    beta_multiplier: complex
    degenerate: bool = False


def fixed_points(c) -> FixedPointPair:
    """Both roots of z^2 + c = z.

    alpha is the root with the smaller multiplier modulus (the candidate
    dividing fixed point); at c = 1/4 the double root is returned twice with
    `degenerate` set.
    """
    c = as_c(c)
    s = cmath.sqrt(1 - 4 * c)  # principal root, Re(s) >= 0 so |1+s| >= |1-s|
    beta = (1 + s) / 2
    alpha = c / beta  # Vieta; avoids cancellation in (1 - s)/2
    degenerate = abs(s) < 1e-15
    if degenerate:
        alpha = beta = 0.5 + 0j
    return FixedPointPair(alpha, beta, 2 * alpha, 2 * beta, degenerate)


def green_potential(c, z: complex, max_iter: int = MAX_ITER,
                    escape_radius: float = ESCAPE_RADIUS) -> float:
    """G(z) = lim 2^-n log|f^n(z)|, or 0 when z does not escape in budget."""
    c = as_c(c)
    z = complex(z)
    for n in range(max_iter + 1):
        if abs(z) > escape_radius:
            # one correction term of the Boettcher product
            corr = 0.5 * math.log(abs(1 + c / (z * z)))
            return math.ldexp(math.log(abs(z)) + corr, -n)
        z = z * z + c
    return 0.0


# ---------------------------------------------------------------------------
# angles on the circle T = R/Z, kept as exact fractions


def angle(numerator: int, denominator: int) -> Fraction:
    if denominator <= 0:
        raise ValueError("denominator must be positive")
    return Fraction(numerator % denominator, denominator)


def double(theta: Fraction) -> Fraction:
    t = 2 * theta
    return t - (t.numerator // t.denominator)


def doubling_orbit(theta: Fraction) -> list[Fraction]:
    """Forward orbit of theta under doubling up to (excluding) the first repeat."""
    seen = []
    seen_set = set()
    while theta not in seen_set:
        seen.append(theta)
        seen_set.add(theta)
        theta = double(theta)
    return seen


def doubling_closure(angles) -> list[Fraction]:
    """Smallest doubling-invariant set containing `angles`, sorted."""
    out = set()
    for a in angles:
        out.update(doubling_orbit(Fraction(a)))
    return sorted(out)


def period_and_preperiod(theta: Fraction) -> tuple[int, int]:
    orbit = doubling_orbit(theta)
    first = double(orbit[-1])
    pre = orbit.index(first)
    return len(orbit) - pre, pre


@dataclass(frozen=True)
class RotationCycle:
    q: int
    p: int
    angles: tuple[Fraction, ...]


def rotation_cycle(q: int, p: int) -> RotationCycle:
    """The period-p doubling cycle whose circular order has rotation number q/p.

    Listed in doubling order starting from the smallest angle. With the
    points x_0 < ... < x_{p-1} and doubling acting as x_i -> x_{i+q}, exactly
    q of them lie in [1/2, 1), so the k-th binary digit of x_0 is 1 iff
    (k q mod p) >= p - q.
    """
    if not (0 < q < p) or gcd(q, p) != 1:
        raise ValueError(f"need 0 < q < p with gcd(q, p) = 1, got {q}/{p}")
    num = 0
    for k in range(p):
        num = 2 * num + (1 if (k * q) % p >= p - q else 0)
    first = Fraction(num, 2 ** p - 1)
    angles = [first]
    for _ in range(p - 1):
        angles.append(double(angles[-1]))
    return RotationCycle(q, p, tuple(angles))


def circular_rotation_number(cycle) -> Fraction | None:
    """Rotation number q/p realized by a doubling cycle, or None if the
    circular order is not rotation-like."""
    cycle = list(cycle)
    p = len(cycle)
    order = sorted(cycle)
    pos = {a: i for i, a in enumerate(order)}
    shifts = {(pos[double(a)] - pos[a]) % p for a in cycle}
    if len(shifts) != 1:
        return None
    q = shifts.pop()
    if p == 1:
        return Fraction(0)
    return Fraction(q, p)

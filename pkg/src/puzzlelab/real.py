"""Real quadratic maps x -> x^2 + c on the line: the interval principal nest,
scaling factors, high/low returns, cascade classification, the Markov scheme
of a cascade, order/depth statistics, the saddle-node passage law and
parameter search by combinatorics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np
from scipy.optimize import brentq

from .nest import DEFAULT_ORBIT_BUDGET, DEFAULT_PERSISTENCE, CONFINEMENT_STEPS, Verdict

ENDPOINT_TOL = 1e-12
MP_DPS = 100

# Orbits and pullbacks run in a private extended-precision context: deep
# pullbacks take square roots of J - c with |J| far below double resolution
# around c, while the resulting intervals (symmetric about 0) are fine as
# doubles.
MP = mpmath.MPContext()
MP.dps = MP_DPS


@dataclass(frozen=True)
class Interval:
    """Closed interval; endpoints may be extended-precision numbers."""
    lo: object
    hi: object

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def length(self) -> float:
        return float(self.hi - self.lo)

    def __contains__(self, x) -> bool:
        return self.lo <= x <= self.hi

    def contains_interval(self, other: "Interval", tol: float = 0.0) -> bool:
        return self.lo - tol <= other.lo and other.hi <= self.hi + tol

    def meets(self, other: "Interval") -> bool:
        return not (other.hi < self.lo or self.hi < other.lo)

    def overlaps(self, other: "Interval", tol: float = 0.0) -> bool:
        """Interiors intersect by more than tol."""
        return min(self.hi, other.hi) - max(self.lo, other.lo) > tol

    def as_list(self):
        return [float(self.lo), float(self.hi)]

    def __repr__(self):
        return f"Interval({float(self.lo)!r}, {float(self.hi)!r})"


def _check_c(c) -> float:
    c = float(c)
    if not -2.0 <= c < -0.75:
        raise ValueError(f"real nest needs -2 <= c < -3/4, got {c}")
    return c


def real_orbit(c: float, n: int) -> np.ndarray:
    out = np.empty(n + 1)
    x = 0.0
    for k in range(n + 1):
        out[k] = x
        x = x * x + c
    return out


def mp_orbit(c, n: int) -> list:
    """Critical orbit 0, c, ... of length n + 1 in extended precision."""
    cc = MP.mpf(c)
    x, out = MP.mpf(0), []
    for _ in range(n + 1):
        out.append(x)
        x = x * x + cc
    return out


def preimage(c, J: Interval, point) -> Interval:
    """The component of f^-1(J) containing `point` (square roots in
    extended precision)."""
    cc = MP.mpf(c)
    lo, hi = J.lo - cc, J.hi - cc
    if hi < 0:
        if hi < -MP.mpf(10) ** (12 - MP_DPS):
            raise ValueError("interval has no real preimage")
        hi = MP.mpf(0)
    r_hi = MP.sqrt(hi)
    if lo <= 0:
        return Interval(-r_hi, r_hi)
    r_lo = MP.sqrt(lo)
    return Interval(r_lo, r_hi) if point >= 0 else Interval(-r_hi, -r_lo)


def pull_back_interval(c: float, J: Interval, orbit_points) -> Interval:
    """Pull J back along x_0, ..., x_{k-1} with f^k(x_0) in J."""
    for x in reversed(list(orbit_points)):
        J = preimage(c, J, x)
    return J


def _first_return(J: Interval, orbit: list, start: int) -> int | None:
    for k in range(start + 1, len(orbit)):
        if J.lo <= orbit[k] <= J.hi:
            return k
    return None


def _visits(J: Interval, orbit: list) -> list:
    return [k for k, x in enumerate(orbit) if J.lo <= x <= J.hi]


@dataclass(eq=False)
class RealNest:
    c: float
    intervals: list
    return_times: list
    central_flags: list
    verdict: Verdict
    orbit: np.ndarray = field(repr=False, default=None)
    mp_orbit: list = field(repr=False, default=None)
    _domains: dict = field(default_factory=dict, repr=False)

    @property
    def scaling_factors(self) -> list:
        I = self.intervals
        return [I[n].length / I[n - 1].length for n in range(1, len(I))]

    @property
    def kappa(self) -> int:
        return sum(1 for f in self.central_flags if not f)

    def to_json(self) -> dict:
        return {"c": self.c, "intervals": [I.as_list() for I in self.intervals],
                "return_times": self.return_times, "central": self.central_flags,
                "scaling_factors": self.scaling_factors, "kappa": self.kappa,
                "verdict": str(self.verdict)}


def real_nest(c: float, max_levels: int = 8, orbit_budget: int = DEFAULT_ORBIT_BUDGET,
              persistence: int = DEFAULT_PERSISTENCE) -> RealNest:
    """I^0 = [alpha, beta] is the real trace of the critical initial piece;
    I^n is the pullback of I^{n-1} along the first return of 0 to it, so
    I^1 = [alpha, -alpha] and every I^n with n >= 1 is symmetric."""
    c = _check_c(c)
    s = MP.sqrt(1 - 4 * MP.mpf(c))
    alpha, beta = (1 - s) / 2, (1 + s) / 2
    orbit = mp_orbit(c, orbit_budget)
    nest = RealNest(c, [Interval(alpha, beta)], [], [], Verdict("non-renormalizable-so-far"),
                    np.array([float(x) for x in orbit]), orbit)
    for _ in range(max_levels):
        J = nest.intervals[-1]
        k = _first_return(J, orbit, 0)
        if k is None:
            nest.verdict = Verdict("escaped-from-nest" if len(nest.intervals) == 1 else "budget-exhausted")
            break
        I = pull_back_interval(c, J, orbit[:k])
        nest.intervals.append(I)
        nest.return_times.append(k)
        nest.central_flags.append(bool(orbit[k] in I))
        v = _detect(c, nest, persistence)
        if v.kind == "q-renormalizable":
            nest.verdict = v
            break
    return nest


def _detect(c, nest: RealNest, persistence: int, steps: int = CONFINEMENT_STEPS) -> Verdict:
    if len(nest.central_flags) < persistence:
        return Verdict("non-renormalizable-so-far")
    flags = nest.central_flags[-persistence:]
    times = set(nest.return_times[-persistence:])
    if not all(flags) or len(times) != 1:
        return Verdict("non-renormalizable-so-far")
    p = times.pop()
    I = nest.intervals[-1]
    lo, hi = float(I.lo), float(I.hi)
    x = 0.0
    for _ in range(steps):
        for _ in range(p):
            x = x * x + c
        if not lo <= x <= hi:
            return Verdict("non-renormalizable-so-far")
    return Verdict("q-renormalizable", p)


# ---------------------------------------------------------------------------
# return domains on the line


@dataclass(frozen=True)
class RealDomain:
    interval: Interval
    representative: float
    return_time: int


def _orbit_for(nest: RealNest, orbit_budget: int | None) -> list:
    if orbit_budget is None or orbit_budget + 1 == len(nest.mp_orbit):
        return nest.mp_orbit
    return mp_orbit(nest.c, orbit_budget)


def real_return_domains(nest: RealNest, n: int, orbit_budget: int | None = None) -> list:
    """Intervals I^n_j of the first return map to I^{n-1} that meet the
    truncated critical orbit; index 0 is I^n."""
    if not 1 <= n < len(nest.intervals):
        raise ValueError(f"level {n} not built")
    c = nest.c
    orbit = _orbit_for(nest, orbit_budget)
    key = (n, len(orbit))
    if key in nest._domains:
        return nest._domains[key]
    W = nest.intervals[n - 1]
    times = _visits(W, orbit)
    domains: list[RealDomain] = []
    for a, b in zip(times[:-1], times[1:]):
        x, r = orbit[a], int(b - a)
        if any(d.return_time == r and x in d.interval for d in domains):
            continue
        J = nest.intervals[n] if a == 0 else pull_back_interval(c, W, orbit[a:b])
        domains.append(RealDomain(J, float(x), r))
    nest._domains[key] = domains
    return domains


# ---------------------------------------------------------------------------
# cascades


@dataclass(frozen=True)
class RealCascade:
    first_level: int
    length: int  # N: levels I^m ... I^{m+N}
    kind: str | None  # saddle-node | Ulam-Neumann | intermediate | None (open-ended)
    high_return: bool | None
    open_ended: bool = False


def return_type(image: Interval, target: Interval) -> str:
    """high if the image covers the target, low if it misses it."""
    if image.contains_interval(target):
        return "high"
    if not image.meets(target):
        return "low"
    return "intermediate"


def return_image(nest: RealNest, level: int) -> Interval:
    """g_n(I^n) for the return on level n-1 (n = level): the interval between
    the common image of the endpoints of I^n and g_n(0)."""
    c = nest.c
    p = nest.return_times[level - 1]
    I = nest.intervals[level]
    c = MP.mpf(c)
    e, g0 = I.hi, MP.mpf(0)
    for _ in range(p):
        e = e * e + c
        g0 = g0 * g0 + c
    return Interval(min(e, g0), max(e, g0))


def classify_real_cascades(nest: RealNest) -> list:
    """Maximal runs of central returns at return levels m .. m+N-2 closed by
    the non-central return at level m+N-1; the kind follows that return
    (high: Ulam-Neumann, low: saddle-node)."""
    flags = nest.central_flags
    out = []
    k = 0
    while k < len(flags):
        if not flags[k]:
            k += 1
            continue
        m = k
        while k < len(flags) and flags[k]:
            k += 1
        N = k - m + 1
        if k == len(flags):
            out.append(RealCascade(m, N, None, None, open_ended=True))
            break
        level = m + N  # g_{m+N} is the return on level m+N-1
        kind = return_type(return_image(nest, level), nest.intervals[level])
        name = {"high": "Ulam-Neumann", "low": "saddle-node"}.get(kind, "intermediate")
        high = True if kind == "high" else False if kind == "low" else None
        out.append(RealCascade(m, N, name, high))
    return out


def cascade_from_flags(flags, terminal_high: bool) -> list:
    """Cascade kinds on a synthetic flag sequence with a given type of the
    terminating returns."""
    out = []
    k = 0
    while k < len(flags):
        if not flags[k]:
            k += 1
            continue
        m = k
        while k < len(flags) and flags[k]:
            k += 1
        N = k - m + 1
        if k == len(flags):
            out.append(RealCascade(m, N, None, None, open_ended=True))
        else:
            out.append(RealCascade(m, N, "Ulam-Neumann" if terminal_high else "saddle-node",
                                   terminal_high))
    return out


def neglectable_levels(cascades) -> set:
    out = set()
    for cas in cascades:
        if cas.kind == "saddle-node":
            out.update(range(cas.first_level + 1, cas.first_level + cas.length))
    return out


@dataclass(frozen=True)
class MarkovScheme:
    cascade: RealCascade
    base: tuple  # K^{m+1}_j = I^{m+1}_j, j != 0
    layers: tuple  # layers[i-2][j] = K^{m+i}_j for i = 2..N
    return_time: int
    truncated: bool = False

    def transitions_ok(self, c: float, tol: float = 1e-10) -> bool:
        """g_{m+1} maps every component of K^{m+i+1}_j onto a component of
        K^{m+i}_j."""
        chain = [self.base] + list(self.layers)
        c = MP.mpf(c)
        for upper, lower in zip(chain[:-1], chain[1:]):
            for src, dst in zip(lower, upper):
                for part in src:
                    a, b = part.lo, part.hi
                    for _ in range(self.return_time):
                        a, b = a * a + c, b * b + c
                    lo, hi = min(a, b), max(a, b)
                    if not any(abs(lo - D.lo) <= tol and abs(hi - D.hi) <= tol for D in dst):
                        return False
        return True


def _g_preimages(c: float, J: Interval, p: int, orbit: list) -> tuple:
    """Both components of (f^p restricted to I^{m+1})^-1(J): the first p-1
    steps follow the critical orbit's side of 0, the last one is symmetric."""
    try:
        for k in range(p - 1, 0, -1):
            J = preimage(c, J, orbit[k])
    except ValueError:
        return ()
    lo, hi = J.lo - MP.mpf(c), J.hi - MP.mpf(c)
    if hi < 0:  # J lies outside the image of a low return
        return ()
    if lo <= 0:
        r = MP.sqrt(hi)
        return (Interval(-r, r),)
    a, b = MP.sqrt(lo), MP.sqrt(hi)
    return (Interval(-b, -a), Interval(a, b))


def cascade_markov_scheme(nest: RealNest, cascade: RealCascade,
                          orbit_budget: int | None = None) -> MarkovScheme:
    """K^{m+i}_j: pullbacks of the non-central level-(m+1) intervals under
    g_{m+1}^(i-1), lying in the gaps I^{m+i-1} minus I^{m+i}. Each entry is a
    tuple of the (symmetric) components."""
    if cascade.length < 2:
        raise ValueError("cascade length must be >= 2")
    m, N = cascade.first_level, cascade.length
    c = nest.c
    last = min(m + N, len(nest.intervals) - 1)
    doms = real_return_domains(nest, m + 1, orbit_budget)
    base = tuple((d.interval,) for d in doms[1:])
    p = nest.return_times[m]
    layers, current, truncated = [], base, False
    for i in range(2, N + 1):
        if m + i > last:
            truncated = True
            break
        nxt = []
        gap_outer, gap_inner = nest.intervals[m + i - 1], nest.intervals[m + i]
        for comps in current:
            pre = [P for comp in comps for P in _g_preimages(c, comp, p, nest.mp_orbit)]
            tol = ENDPOINT_TOL * gap_outer.length
            pre = tuple(P for P in pre if gap_outer.contains_interval(P, tol)
                        and not P.overlaps(gap_inner, tol))
            nxt.append(pre)
        if not any(nxt):
            truncated = True
            break
        layers.append(tuple(nxt))
        current = tuple(nxt)
    if not base:
        truncated = True
    return MarkovScheme(cascade, base, tuple(layers), p, truncated)


# ---------------------------------------------------------------------------
# order and depth


@dataclass(frozen=True)
class OrderDepthStats:
    records: tuple  # (x, o(x), d(x))
    tau: int
    skipped: int


def _level_of(nest: RealNest, x: float, m: int, N: int) -> int:
    i = 0
    while i < N and m + i + 1 < len(nest.intervals) and x in nest.intervals[m + i + 1]:
        i += 1
    return i


def order_and_depth(nest: RealNest, cascade: RealCascade,
                    orbit_budget: int | None = None) -> OrderDepthStats:
    """o(x): passes through I^m minus I^{m+1} before landing in I^{m+N}; d(x) =
    min(i, N - i) with g x in I^{m+i} minus I^{m+i+1}. Orbit points whose
    landing is not seen within the budget are skipped."""
    m, N = cascade.first_level, cascade.length
    if m + N >= len(nest.intervals):
        N = len(nest.intervals) - 1 - m
    orbit = _orbit_for(nest, orbit_budget)
    top, inner, target = nest.intervals[m], nest.intervals[m + 1], nest.intervals[m + N]
    in_top = _visits(top, orbit)
    records, skipped = [], 0
    for idx, t in enumerate(in_top):
        x = orbit[t]
        if x in inner:
            continue
        passes, landed, first = 1, False, None
        for t2 in in_top[idx + 1:]:
            y = orbit[t2]
            if first is None:
                first = y
            if y in target:
                landed = True
                break
            if y not in inner:
                passes += 1
        if not landed:
            skipped += 1
            continue
        i = _level_of(nest, first, m, N)
        records.append((float(x), passes, min(i, N - i)))
    un = [cas.length for cas in classify_real_cascades(nest) if cas.kind == "Ulam-Neumann"]
    tau = max([nest.kappa] + un + [r[1] for r in records] + [r[2] for r in records])
    return OrderDepthStats(tuple(records), int(tau), skipped)


# ---------------------------------------------------------------------------
# saddle-node passage


def saddle_node_length(eps: float, a: float = 1.0, max_steps: int = 10**8) -> int:
    """Steps of z -> z + eps + z^2 from -a until z > a."""
    if not (eps > 0 and a > 0):
        raise ValueError("eps and a must be positive")
    z, n = -a, 0
    while z <= a:
        z = z + eps + z * z
        n += 1
        if n > max_steps:
            raise RuntimeError("passage did not finish")
    return n


# ---------------------------------------------------------------------------
# parameter search


def fibonacci_kneading(n: int) -> list:
    """Symbols e_1..e_n of the Fibonacci kneading (1: f^j(0) < 0).

    Cutting times S_0 = 1, S_k = S_{k-1} + S_{k-2}; each new block repeats
    the prefix of length S_{k-2} with its last symbol flipped.
    """
    S = [1, 2]
    e = [1, 0]
    k = 1
    while len(e) < n:
        k += 1
        if k >= len(S):
            S.append(S[-1] + S[-2])
        q = S[k - 2]
        block = e[:q]
        block[-1] ^= 1
        e.extend(block)
    return e[:n]


def kneading(c, n: int, dps: int = 50) -> list:
    """Symbols of f^j(0), j = 1..n, computed in extended precision;
    2 marks an exact hit of 0."""
    with mpmath.workdps(dps):
        x, cc = mpmath.mpf(0), mpmath.mpf(c)
        out = []
        for _ in range(n):
            x = x * x + cc
            out.append(1 if x < 0 else 0 if x > 0 else 2)
    return out


def compare_kneading(a, b) -> int:
    """Unimodal order of two itineraries: the map reverses orientation on
    x < 0, so each preceding 1 flips the comparison. Returns -1, 0, 1."""
    flips = 0
    for x, y in zip(a, b):
        if x != y:
            rank = {1: 0, 2: 1, 0: 2}
            s = -1 if rank[x] < rank[y] else 1
            return -s if flips % 2 else s
        if x == 1:
            flips += 1
    return 0


def _bisect_kneading(target_fn, tol: float, lo: float = -2.0, hi: float = -1.5) -> float:
    n = 64
    target = target_fn(4096)
    s_lo = compare_kneading(kneading(lo, n), target[:n])
    s_hi = compare_kneading(kneading(hi, n), target[:n])
    if s_lo == s_hi or 0 in (s_lo, s_hi):
        raise ValueError("kneading bracket not found")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        n_try = n
        while True:
            s = compare_kneading(kneading(mid, n_try, dps=max(50, n_try // 2)), target[:n_try])
            if s != 0 or n_try >= len(target):
                break
            n_try *= 2
        if s == 0:
            return mid
        if s == s_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def superstable_parameters(k: int, samples: int = 200_000, tol: float = 1e-14) -> list:
    """Real c in (-2, -3/4) with f^k(0) = 0 and exact period k, increasing."""
    cs = np.linspace(-2.0, -0.75, samples)

    def fk(c):
        x = np.zeros_like(c) if np.ndim(c) else 0.0
        for _ in range(k):
            x = x * x + c
        return x

    vals = fk(cs)
    roots = []
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
        r = brentq(fk, cs[i], cs[i + 1], xtol=tol)
        x, ok = 0.0, True
        for j in range(1, k):
            x = x * x + r
            if k % j == 0 and abs(x) < 1e-9:
                ok = False
                break
        if ok:
            roots.append(r)
    return sorted(roots)


def period_doubling_cascade(n: int, tol: float = 1e-15) -> list:
    """Superstable parameters c_0 = 0, c_1 = -1, ..., c_n of period 2^j on
    the main period-doubling cascade, by Newton with extrapolated seeds."""
    cs = [0.0, -1.0]
    delta = 4.669201609
    with mpmath.workdps(40):
        for j in range(2, n + 1):
            period = 2 ** j
            c = mpmath.mpf(cs[-1]) + (mpmath.mpf(cs[-1]) - cs[-2]) / delta
            for _ in range(60):
                x, dx = mpmath.mpf(0), mpmath.mpf(0)
                for _ in range(period):
                    dx = 2 * x * dx + 1
                    x = x * x + c
                step = x / dx
                c -= step
                if abs(step) < tol * 1e-3:
                    break
            c = float(c)
            if not cs[-1] > c > -1.5:
                raise ValueError(f"cascade Newton left its bracket at level {j}")
            cs.append(c)
    return cs[: n + 1]


def feigenbaum_limit(depth: int = 12) -> float:
    """Aitken extrapolation of the superstable cascade c_depth."""
    cs = period_doubling_cascade(depth)
    a, b, c = cs[-3], cs[-2], cs[-1]
    denom = (c - b) - (b - a)
    return c - (c - b) ** 2 / denom if denom != 0 else c


def find_parameter(target: str, tol: float = 1e-10, k: int | None = None) -> float:
    """target: 'fibonacci', 'superstable-period', 'feigenbaum-limit' or
    'period-doubling-cascade' (k = period, depth or cascade level)."""
    if target == "fibonacci":
        # bracket to the last float: the orbit shadows the combinatorics
        # for longer, and the bracket is still narrower than tol
        return _bisect_kneading(fibonacci_kneading, 0.0)
    if target == "superstable-period":
        if k is None or k < 2:
            raise ValueError("superstable-period needs k >= 2")
        roots = superstable_parameters(k, tol=min(tol, 1e-12))
        if not roots:
            raise ValueError(f"no superstable period-{k} parameter in [-2, -3/4]")
        return roots[-1]
    if target == "feigenbaum-limit":
        return feigenbaum_limit(12 if k is None else k)
    if target == "period-doubling-cascade":
        return period_doubling_cascade(1 if k is None else k)[-1]
    raise ValueError(f"unknown target {target!r}")


# ---------------------------------------------------------------------------
# geometry report


@dataclass(frozen=True)
class LevelGeometry:
    n: int
    scaling: float
    length_ratio: float | None  # min/max length of the non-central I^n_j
    gap_ratio: float | None  # min gap length / max interval length
    neglectable: bool


def essential_geometry_report(nest: RealNest, orbit_budget: int | None = None) -> list:
    neglect = neglectable_levels(classify_real_cascades(nest))
    out = []
    lam = nest.scaling_factors
    for n in range(1, len(nest.intervals)):
        doms = real_return_domains(nest, n, orbit_budget)
        others = [d.interval for d in doms[1:]]
        length_ratio = (min(I.length for I in others) / max(I.length for I in others)
                        if others else None)
        W = nest.intervals[n - 1]
        pieces = sorted([d.interval for d in doms], key=lambda I: I.lo)
        edges = [W.lo] + [x for I in pieces for x in (I.lo, I.hi)] + [W.hi]
        gaps = [float(edges[2 * i + 1] - edges[2 * i]) for i in range(len(edges) // 2)]
        gaps = [g for g in gaps if g > ENDPOINT_TOL]
        longest = max(I.length for I in pieces) if pieces else None
        gap_ratio = min(gaps) / longest if gaps and longest else None
        out.append(LevelGeometry(n, lam[n - 1], length_ratio, gap_ratio, n in neglect))
    return out

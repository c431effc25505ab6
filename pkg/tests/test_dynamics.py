import cmath
import math
from fractions import Fraction
from math import gcd

import numpy as np
import pytest
from hypothesis import given, strategies as st

from puzzlelab.dynamics import (Parameter, angle, circular_rotation_number, double,
                                doubling_orbit, fixed_points, green_potential, iterate,
                                period_and_preperiod, rotation_cycle)

finite = st.floats(-2.5, 2.5, allow_nan=False)
cs = st.builds(complex, finite, finite)


def brute_force_cycles(q, p):
    """Every period-p doubling cycle whose circular order rotates by q/p."""
    den = 2 ** p - 1
    found, seen = [], set()
    for num in range(den):
        theta = Fraction(num, den)
        if theta in seen:
            continue
        orbit = doubling_orbit(theta)
        seen.update(orbit)
        if len(orbit) != p:
            continue
        order = sorted(orbit)
        step = {(order.index(double(a)) - order.index(a)) % p for a in orbit}
        if step == {q}:
            found.append(frozenset(orbit))
    return found


def test_iterate_examples():
    assert list(iterate(0, 2, 2).points) == [2, 4, 16]
    assert list(iterate(-1, 0, 4).points) == [0, -1, 0, -1, 0]
    assert list(iterate(-2, 0, 3).points) == [0, -2, 2, 2]


def test_iterate_flags_escape_and_stops():
    orb = iterate(0, 10, 50)
    assert orb.escaped
    assert abs(orb.points[-1]) > 1e8
    assert len(orb) < 51
    assert not iterate(-1, 0, 50).escaped


def test_iterate_rejects_negative_count():
    with pytest.raises(ValueError):
        iterate(0, 0, -1)


def test_parameter_must_be_finite():
    with pytest.raises(ValueError):
        Parameter(complex(math.inf, 0))
    with pytest.raises(ValueError):
        iterate(complex(math.nan, 0), 0, 1)


def test_fixed_points_examples():
    fp = fixed_points(-1)
    assert fp.alpha == pytest.approx((1 - math.sqrt(5)) / 2, abs=1e-12)
    assert fp.beta == pytest.approx((1 + math.sqrt(5)) / 2, abs=1e-12)
    assert fp.alpha_multiplier == pytest.approx(-1.2360679775, abs=1e-9)
    fp = fixed_points(0)
    assert (fp.alpha, fp.beta, fp.alpha_multiplier, fp.beta_multiplier) == (0, 1, 0, 2)
    fp = fixed_points(0.25)
    assert fp.degenerate and fp.alpha == fp.beta == 0.5 and fp.alpha_multiplier == 1


@given(cs)
def test_fixed_point_invariants(c):
    fp = fixed_points(c)
    scale = 1 + abs(c)
    for z in (fp.alpha, fp.beta):
        assert abs(z * z + c - z) <= 1e-12 * scale * (1 + abs(z))
    assert fp.alpha_multiplier == 2 * fp.alpha and fp.beta_multiplier == 2 * fp.beta
    assert abs(fp.beta_multiplier) >= abs(fp.alpha_multiplier)


def test_vieta_on_random_parameters(rng):
    c = rng.uniform(-2.5, 2.5, 1000) + 1j * rng.uniform(-2.5, 2.5, 1000)
    for ci in c:
        fp = fixed_points(ci)
        assert abs(fp.alpha + fp.beta - 1) <= 1e-10
        assert abs(fp.alpha * fp.beta - ci) <= 1e-10


def test_map_is_even_on_random_samples(rng):
    c = rng.normal(size=1000) + 1j * rng.normal(size=1000)
    z = 3 * (rng.normal(size=1000) + 1j * rng.normal(size=1000))
    for ci, zi in zip(c, z):
        assert iterate(ci, zi, 1).points[1] == iterate(ci, -zi, 1).points[1]


def test_green_potential_examples():
    assert green_potential(0, 4) == pytest.approx(math.log(4), abs=1e-9)
    assert green_potential(0, 0.5) == 0
    # high-budget reference: escape radius pushed to 1e150
    ref = green_potential(-1, 10, escape_radius=1e150)
    assert green_potential(-1, 10) == pytest.approx(ref, abs=1e-9)
    assert green_potential(-1, 10) == pytest.approx(math.log(10), abs=0.02)


@given(cs, st.floats(0, 2 * math.pi), st.floats(1.5, 20))
def test_green_potential_doubles_under_f(c, phase, r):
    z = (r + abs(c)) * cmath.exp(1j * phase)
    g = green_potential(c, z)
    assert g > 0
    assert abs(green_potential(c, z * z + c) - 2 * g) <= 1e-6


def test_green_potential_zero_in_filled_set():
    for c, z in ((-1, 0), (-1, 0.3), (-2, 1.9), (-0.12 + 0.74j, 0)):
        assert green_potential(c, z) == 0


def test_angle_reduction():
    assert angle(5, 3) == Fraction(2, 3)
    assert angle(2, 4) == Fraction(1, 2)
    with pytest.raises(ValueError):
        angle(1, 0)


def test_period_and_preperiod():
    assert period_and_preperiod(Fraction(1, 7)) == (3, 0)
    assert period_and_preperiod(Fraction(1, 4)) == (1, 2)
    assert period_and_preperiod(Fraction(1, 6)) == (2, 1)


def test_rotation_cycle_examples():
    assert set(rotation_cycle(1, 2).angles) == {Fraction(1, 3), Fraction(2, 3)}
    assert set(rotation_cycle(1, 3).angles) == {Fraction(1, 7), Fraction(2, 7), Fraction(4, 7)}
    assert rotation_cycle(2, 5).angles == tuple(Fraction(k, 31) for k in (5, 10, 20, 9, 18))


@pytest.mark.parametrize("q,p", [(q, p) for p in range(2, 11) for q in range(1, p) if gcd(q, p) == 1])
def test_rotation_cycle_matches_brute_force(q, p):
    cyc = rotation_cycle(q, p)
    assert brute_force_cycles(q, p) == [frozenset(cyc.angles)]
    assert len(cyc.angles) == p
    for a, b in zip(cyc.angles, cyc.angles[1:] + cyc.angles[:1]):
        assert double(a) == b
    assert circular_rotation_number(cyc.angles) == Fraction(q, p)


@pytest.mark.parametrize("q,p", [(0, 3), (2, 4), (3, 3), (5, 3)])
def test_rotation_cycle_rejects_bad_input(q, p):
    with pytest.raises(ValueError):
        rotation_cycle(q, p)


def test_circular_rotation_number_of_non_rotation_cycle():
    # 1/5 -> 2/5 -> 4/5 -> 3/5 advances by 1, 2, -1, -2 positions
    assert circular_rotation_number(doubling_orbit(Fraction(1, 5))) is None

import math
from types import SimpleNamespace

import numpy as np
import pytest

from puzzlelab import geometry as geo
from puzzlelab.moduli import (ModulusPreconditionError, ResolutionError, RingDomain,
                              asymmetric_modulus, capacity_at_infinity, conformal_radius,
                              eccentricity, estimate_modulus, groetzsch_defect,
                              principal_moduli)
from puzzlelab.nest import return_domains

from conftest import AIRPLANE_C, FIBONACCI_C, square, star_polygon

# self-oracle: the same estimator at grid 2048, frozen
SQUARES_RATIO_3_REF = 0.16087857
SQUARE_RADIUS_REF = 1.07875908
# closed form for the square of side 2 about its centre
SQUARE_RADIUS_EXACT = 8 * math.sqrt(math.pi) / math.gamma(0.25) ** 2


def round_ring(r, R, n=512, center=0):
    return RingDomain(geo.circle(center, R, n), geo.circle(center, r, n))


def nested_triple(rng, center=0):
    inner = star_polygon(rng, 20, center, 0.5, 1.0)
    middle = star_polygon(rng, 24, center, 1.6, 2.4)
    outer = star_polygon(rng, 28, center, 3.5, 5.0)
    return (RingDomain(outer, inner), RingDomain(middle, inner), RingDomain(outer, middle))


@pytest.mark.parametrize("ratio", [1.5, 2, 4, math.exp(2 * math.pi)])
def test_round_annulus_calibration(ratio):
    est = estimate_modulus(round_ring(1.0, ratio), 512)
    exact = math.log(ratio) / (2 * math.pi)
    assert 0.98 <= est.value / exact <= 1.02
    assert est.converged and est.grid == 512
    assert abs(est.value - est.richardson) / est.value < 0.05


def test_round_annulus_examples():
    assert estimate_modulus(round_ring(1, math.exp(2 * math.pi)), 512).value == pytest.approx(1, rel=0.02)
    assert estimate_modulus(round_ring(1, 2), 512).value == pytest.approx(0.11032, rel=0.02)


def test_concentric_squares_against_reference():
    est = estimate_modulus(RingDomain(square(3.0), square(1.0)), 512)
    assert est.value == pytest.approx(SQUARES_RATIO_3_REF, rel=0.02)
    # must lie strictly between the inscribed and circumscribed round rings
    assert math.log(3 / math.sqrt(2)) / (2 * math.pi) < est.value < math.log(3 * math.sqrt(2)) / (2 * math.pi)


def test_modulus_preconditions():
    with pytest.raises(ModulusPreconditionError):
        RingDomain(geo.circle(0, 1), geo.circle(0, 2))
    with pytest.raises(ModulusPreconditionError):
        RingDomain(geo.circle(0, 4), geo.circle(0, 1), (geo.circle(0, 1.5),))
    with pytest.raises(ModulusPreconditionError):
        RingDomain(geo.circle(0, 4), geo.circle(0, 1), (geo.circle(2, 0.5), geo.circle(2.2, 0.5)))


def test_touching_boundaries_are_a_resolution_error():
    outer = geo.circle(0, 2, 512)
    inner = geo.circle(1, 1, 512)  # tangent at z = 2
    with pytest.raises(ResolutionError):
        estimate_modulus(RingDomain(outer, inner), 256)


def test_similarity_invariance(rng):
    dom = RingDomain(star_polygon(rng, 24, 0, 2.5, 3.5), star_polygon(rng, 16, 0, 0.6, 1.0))
    base = estimate_modulus(dom, 256).value
    for _ in range(50):
        scale = rng.uniform(0.01, 100) * np.exp(1j * rng.uniform(0, 2 * np.pi))
        shift = complex(*rng.uniform(-50, 50, 2))
        moved = estimate_modulus(dom.transformed(scale, shift), 256).value
        assert abs(moved - base) / base < 0.01


def test_monotonicity(rng):
    for _ in range(10):
        inner = star_polygon(rng, 16, 0, 0.6, 1.0)
        outer = star_polygon(rng, 24, 0, 2.5, 3.5)
        base = estimate_modulus(RingDomain(outer, inner), 256).value
        assert estimate_modulus(RingDomain(1.3 * outer, inner), 256).value >= 0.99 * base
        assert estimate_modulus(RingDomain(outer, 0.7 * inner), 256).value >= 0.99 * base


def test_synthetic_concentric_nest():
    nest = SimpleNamespace(levels=[SimpleNamespace(n=k, piece=SimpleNamespace(boundary=geo.circle(0, r, 512)))
                                   for k, r in enumerate((1, 0.5, 0.25))])
    mus = principal_moduli(0, nest, 512)
    assert [n for n, _ in mus] == [1, 2]
    for _, est in mus:
        assert est.value == pytest.approx(math.log(2) / (2 * math.pi), rel=0.02)


def test_principal_moduli_needs_two_levels():
    nest = SimpleNamespace(levels=[SimpleNamespace(n=0, piece=None)])
    with pytest.raises(ValueError):
        principal_moduli(0, nest)


def test_fibonacci_principal_moduli(fib_nest):
    mus = principal_moduli(FIBONACCI_C, fib_nest, 512)
    assert mus[0][1].degenerate and mus[0][1].value == 0
    values = [e.value for _, e in mus[1:]]
    assert all(v > 0 for v in values)
    first6 = values[:6]
    assert all(b >= a / 1.1 for a, b in zip(first6, first6[1:]))


def test_satellite_cascade_is_degenerate(basilica_nest):
    mus = principal_moduli(-1.0, basilica_nest, 256)
    assert len(mus) == 5
    assert all(e.degenerate and e.value == 0 for _, e in mus)


def test_central_cascade_halves_modulus(airplane_nest):
    mus = [e.value for _, e in principal_moduli(AIRPLANE_C, airplane_nest, 512)[1:]]
    assert len(mus) >= 4
    for a, b in zip(mus, mus[1:]):
        assert b == pytest.approx(a / 2, rel=0.02)


def test_superadditivity_on_nests(fib_nest, airplane_nest):
    for c, nest, levels in ((FIBONACCI_C, fib_nest, range(2, 6)), (AIRPLANE_C, airplane_nest, range(2, 4))):
        V = [lv.piece.boundary for lv in nest.levels]
        for n in levels:
            whole = estimate_modulus(RingDomain(V[n - 1], V[n + 1]), 512).value
            parts = (estimate_modulus(RingDomain(V[n - 1], V[n]), 512).value
                     + estimate_modulus(RingDomain(V[n], V[n + 1]), 512).value)
            assert whole >= parts - 0.02, (c, n)


def test_eccentricity_examples():
    assert eccentricity(geo.circle(0, 1, 2048), 0).eccentricity == pytest.approx(0, abs=1e-5)
    t = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
    ellipse = 2 * np.cos(t) + 1j * np.sin(t)
    assert eccentricity(ellipse, 0).eccentricity == pytest.approx(math.log(2), abs=1e-5)
    rep = eccentricity(geo.circle(0, 1, 4096), 0.5)
    assert rep.eccentricity == pytest.approx(math.log(3), abs=1e-5)
    assert rep.outer_radius >= rep.inner_radius
    assert rep.eccentricity == math.log(rep.outer_radius / rep.inner_radius)


def test_eccentricity_precondition():
    with pytest.raises(ModulusPreconditionError):
        eccentricity(geo.circle(0, 1), 2)
    with pytest.raises(ModulusPreconditionError):
        conformal_radius(geo.circle(0, 1), 1.5)


def test_conformal_radius_of_circle():
    r = conformal_radius(geo.circle(0.3, 2.0, 1024), 0.3, 512)
    assert r.radius == pytest.approx(2.0, rel=0.03)
    assert r.capacity == pytest.approx(math.log(r.radius))
    assert r.converged


def test_conformal_radius_of_square():
    r = conformal_radius(square(1.0), 0, 512)
    assert r.radius == pytest.approx(SQUARE_RADIUS_REF, rel=0.03)
    assert r.radius == pytest.approx(SQUARE_RADIUS_EXACT, rel=0.03)
    assert SQUARE_RADIUS_REF == pytest.approx(SQUARE_RADIUS_EXACT, rel=1e-4)


def test_koebe_bounds(rng):
    for _ in range(50):
        poly = star_polygon(rng, 20)
        d = eccentricity(poly, 0).inner_radius
        r = conformal_radius(poly, 0, 128).radius
        assert d <= r <= 4 * d


def test_eccentricity_against_capacity(rng):
    bound = 2 * math.log(4) + 0.05
    for _ in range(50):
        poly = star_polygon(rng, 20)
        e = eccentricity(poly, 0).eccentricity
        cap = conformal_radius(poly, 0, 128).capacity
        cap_inf = capacity_at_infinity(poly, 0, 128)
        assert abs(-(cap + cap_inf) - e) <= bound
        # finer statement: the gap is one-sided
        assert -0.05 <= e + cap + cap_inf <= bound


def test_capacity_at_infinity_of_circle():
    assert capacity_at_infinity(geo.circle(0, 3, 1024), 0, 256) == pytest.approx(-math.log(3), abs=1e-3)


def test_asymmetric_modulus_definition():
    D = geo.circle(0, 4, 512)
    a, b = geo.circle(-1.5, 0.5, 256), geo.circle(1.5, 0.5, 256)
    am = asymmetric_modulus(D, [a, b], 0, 256)
    assert am.weights == (1.0, 0.5)
    assert am.sigma == pytest.approx(am.moduli[0] + 0.5 * am.moduli[1], rel=1e-12)
    # by symmetry the two condenser moduli agree
    assert am.moduli[0] == pytest.approx(am.moduli[1], rel=0.01)
    with pytest.raises(ModulusPreconditionError):
        asymmetric_modulus(D, [a, b], 2, 256)


def test_shrinking_a_plate_increases_its_modulus():
    D = geo.circle(0, 4, 512)
    a, b = geo.circle(-1.5, 0.6, 256), geo.circle(1.5, 0.6, 256)
    before = asymmetric_modulus(D, [a, b], 0, 256).moduli[1]
    small = 1.5 + 0.5 * (b - 1.5)
    after = asymmetric_modulus(D, [a, small], 0, 256).moduli[1]
    assert after > before


def test_fibonacci_sigma_grows(fib_nest):
    # level 2's non-critical domain shares a ray arc with V^1; from level 3 on
    # every domain is separated from the boundary
    sig = []
    for n in range(3, 8):
        doms = return_domains(FIBONACCI_C, fib_nest, n)
        D = fib_nest.levels[n - 1].piece
        sig.append(asymmetric_modulus(D, [d.piece for d in doms], 0, 256).sigma)
    assert all(b >= a - 0.05 for a, b in zip(sig, sig[1:])), sig


def test_groetzsch_concentric_split():
    A = round_ring(1, 4)
    d = groetzsch_defect(A, round_ring(1, 2), round_ring(2, 4), 512)
    assert abs(d) <= 0.01


def test_groetzsch_with_gap():
    d = groetzsch_defect(round_ring(1, 4), round_ring(1, 1.5), round_ring(3, 4), 512)
    assert d == pytest.approx(math.log(2) / (2 * math.pi), rel=0.10)


def test_groetzsch_random_triples(rng):
    for _ in range(20):
        A, A1, A2 = nested_triple(rng)
        assert groetzsch_defect(A, A1, A2, 256) >= -0.02


def test_groetzsch_rejects_non_nested():
    with pytest.raises(ModulusPreconditionError):
        groetzsch_defect(round_ring(1, 2), round_ring(1, 3), round_ring(1, 1.5), 256)


def test_large_lattice_is_bitwise_repeatable():
    # grid 512 on a thick ring goes through the multigrid path
    ring = round_ring(1.0, math.exp(2 * math.pi), 1024)
    a, b = estimate_modulus(ring, 512), estimate_modulus(ring, 512)
    assert a.value == b.value and a.richardson == b.richardson

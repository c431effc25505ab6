import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from puzzlelab import geometry as geo
from puzzlelab.nest import (Verdict, build_principal_nest, classify_cascades,
                            combinatorial_signature, detect_q_renormalization,
                            renormalization_annulus, return_domains)
from puzzlelab.puzzle import piece_contains
from puzzlelab.rays import RayBudget, trace_ray
from puzzlelab.schemas import validate

from conftest import AIRPLANE_C, FIBONACCI_C


def closest_returns(c: float, n: int, dps: int = 60) -> list:
    """Times k at which |f^k(0)| beats every earlier |f^j(0)|, 0 < j < k."""
    mp = mpmath.MPContext()
    mp.dps = dps
    z, cc, best, out = mp.mpf(0), mp.mpf(c), mp.inf, []
    for k in range(1, n + 1):
        z = z * z + cc
        if abs(z) < best:
            best = abs(z)
            out.append(k)
    return out


def all_nests(request):
    return [request.getfixturevalue(n) for n in
            ("fib_nest", "basilica_nest", "airplane_nest", "feigenbaum_nest")]


def test_basilica_nest(basilica_nest):
    assert basilica_nest.return_times[0] == 2
    assert all(basilica_nest.flags)
    assert basilica_nest.verdict == Verdict("q-renormalizable", 2)
    assert str(basilica_nest.verdict) == "q-renormalizable(period 2)"


def test_escaping_parameter():
    nest = build_principal_nest(0.3)
    assert nest.verdict.kind == "escaped" and nest.levels == []


def test_fibonacci_nest(fib_nest):
    assert fib_nest.return_times == [2, 3, 5, 8, 13, 21, 34, 55]
    assert not any(fib_nest.flags)
    assert fib_nest.kappa == 8
    assert fib_nest.verdict.kind == "non-renormalizable-so-far"
    assert classify_cascades(fib_nest) == []


def test_fibonacci_law_against_closest_returns(fib_nest):
    pi = fib_nest.return_times
    oracle = closest_returns(FIBONACCI_C, 60)
    assert oracle[:9] == [1, 2, 3, 5, 8, 13, 21, 34, 55]
    assert pi == oracle[1:9]
    for n in range(2, 8):
        assert pi[n] == pi[n - 1] + pi[n - 2]


def test_nesting(request):
    """Strict inclusion at 1e-9, except on ray arcs shared with the parent,
    where both polygons approximate the same ray at their own resolution."""
    fine = RayBudget(substeps=64)
    for nest in all_nests(request):
        rays = {}
        for lv in nest.levels[1:]:
            parent = nest.levels[lv.n - 1].piece
            outer = parent.boundary
            b = lv.piece.boundary
            pts = b[np.linspace(0, len(b) - 1, 200).astype(int)]
            off = ~geo.contains(outer, pts) & (geo.segment_distance(outer, pts) >= 1e-9)
            if not off.any():
                continue
            diam = geo.diameter(outer)
            assert np.all(geo.segment_distance(outer, pts[off]) < 1e-4 * diam), (nest.c, lv.n)
            for a in parent.angles:
                if a not in rays:
                    tr = trace_ray(nest.c, a, fine).points
                    rays[a] = np.concatenate([tr, tr[::-1]])
            on_ray = np.min([geo.segment_distance(rays[a], pts[off]) for a in parent.angles], axis=0)
            assert np.all(on_ray < 1e-4 * diam), (nest.c, lv.n)


def test_return_minimality(request):
    for nest in all_nests(request):
        for lv in nest.levels[1:]:
            prev = nest.levels[lv.n - 1].piece
            pi = lv.return_time
            assert piece_contains(prev, nest.orbit[pi]).inside
            for k in range(1, pi):
                m = piece_contains(prev, nest.orbit[k])
                assert m.ambiguous or not m.inside, (nest.c, lv.n, k)


def test_central_flag_matches_membership(request):
    for nest in all_nests(request):
        for lv in nest.levels[1:]:
            assert lv.central == piece_contains(lv.piece, nest.orbit[lv.return_time]).inside


def test_kappa_consistency(request):
    for nest in all_nests(request):
        assert nest.kappa == sum(1 for f in nest.flags if not f)
        for span in nest.cascades:
            assert all(nest.flags[span.first_level:span.first_level + span.length])


def test_classify_cascades_examples(basilica_nest):
    spans = classify_cascades(basilica_nest)
    assert len(spans) == 1
    assert spans[0].first_level == 0 and spans[0].open_ended
    spans = classify_cascades([True, True, False, True, False])
    assert [(s.first_level, s.length) for s in spans] == [(0, 2), (3, 1)]
    assert not any(s.open_ended for s in spans)


@given(st.lists(st.booleans(), max_size=30))
def test_cascades_are_maximal_central_runs(flags):
    spans = classify_cascades(flags)
    covered = [False] * len(flags)
    for s in spans:
        assert s.length >= 1
        assert all(flags[s.first_level:s.first_level + s.length])
        assert s.first_level == 0 or not flags[s.first_level - 1]
        end = s.first_level + s.length
        assert end == len(flags) or not flags[end]
        for i in range(s.first_level, end):
            covered[i] = True
    assert covered == list(flags)


def test_q_renormalization_verdicts(basilica_nest, airplane_nest, feigenbaum_nest, fib_nest):
    assert detect_q_renormalization(-1.0, basilica_nest, 5) == Verdict("q-renormalizable", 2)
    assert airplane_nest.verdict == Verdict("q-renormalizable", 3)
    assert feigenbaum_nest.verdict == Verdict("q-renormalizable", 2)
    assert detect_q_renormalization(FIBONACCI_C, fib_nest, 5).kind == "non-renormalizable-so-far"
    # more persistence than levels built
    assert detect_q_renormalization(-1.0, basilica_nest, 50).kind == "non-renormalizable-so-far"


def test_feigenbaum_cascade_is_open_ended(feigenbaum_nest):
    spans = feigenbaum_nest.cascades
    assert spans and spans[-1].open_ended


def test_omega_cascade_metadata(airplane_nest, basilica_nest, fib_nest):
    assert airplane_nest.omega_cascade_length == 1
    assert fib_nest.omega_cascade_length == 1
    assert basilica_nest.omega_cascade_length is None  # never leaves the first cascade


def test_cut_levels(basilica_nest, airplane_nest, fib_nest):
    assert basilica_nest.cut_level == 0
    assert airplane_nest.cut_level == 1
    assert fib_nest.cut_level is None


def test_return_domains_fibonacci(fib_nest):
    for n in range(1, 8):
        doms = return_domains(FIBONACCI_C, fib_nest, n)
        assert len(doms) == 2
        assert doms[0].representative == 0
        assert doms[0].piece is fib_nest.levels[n].piece


def test_return_domain_invariants(fib_nest):
    for n in range(1, 7):
        outer = fib_nest.levels[n - 1].piece
        for d in return_domains(FIBONACCI_C, fib_nest, n):
            z = d.representative
            for _ in range(d.return_time):
                z = z * z + FIBONACCI_C
            assert piece_contains(outer, z).inside
            assert piece_contains(d.piece, d.representative).inside


def test_return_domains_stable_when_budget_doubles(fib_nest):
    for n in range(1, 7):
        a = return_domains(FIBONACCI_C, fib_nest, n, 100)
        b = return_domains(FIBONACCI_C, fib_nest, n, 200)
        assert len(a) == len(b) == 2
        assert [d.itinerary for d in a] == [d.itinerary for d in b]
        assert [d.return_time for d in a] == [d.return_time for d in b]


def test_return_domains_basilica_level_one(basilica_nest):
    assert len(return_domains(-1.0, basilica_nest, 1)) == 1


def test_return_domains_finite_and_stable_for_renormalizable(airplane_nest):
    for n in range(1, len(airplane_nest.levels)):
        a = return_domains(AIRPLANE_C, airplane_nest, n, 200)
        b = return_domains(AIRPLANE_C, airplane_nest, n, 400)
        assert 1 <= len(a) == len(b)


def test_return_domains_rejects_unbuilt_level(basilica_nest):
    with pytest.raises(ValueError):
        return_domains(-1.0, basilica_nest, 99)


def test_signatures():
    a = combinatorial_signature(-1.0, 3)
    assert a == combinatorial_signature(-1.0, 3)
    assert combinatorial_signature(-1.0, 2) != combinatorial_signature(AIRPLANE_C, 2)
    # both in the period-2 bulb, so the same small copy
    assert combinatorial_signature(-1.1, 3) == a


def test_renormalization_annulus_basilica(basilica_nest):
    ann = renormalization_annulus(-1.0, basilica_nest)
    assert ann.valid and ann.cut_level == 0 and ann.thickened
    assert geo.contains(ann.outer, ann.inner).all()


def test_renormalization_annulus_needs_renormalization(fib_nest):
    with pytest.raises(ValueError):
        renormalization_annulus(FIBONACCI_C, fib_nest)


def test_nest_json(basilica_nest, fib_nest):
    for nest in (basilica_nest, fib_nest):
        doc = nest.to_json()
        validate(doc, "nest")
        assert doc["kappa"] == nest.kappa
        assert [lv["return_time"] for lv in doc["levels"][1:]] == nest.return_times

from math import comb

import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_force_bath_response
from qresponse.bath import (MAX_SKIPPED_MASS, WEIGHT_CUTOFF, _kept_sectors, bath_sectors, combine,
                            decoherence_sweep, mixed_response, polarization_sweep, sector_responses)
from qresponse.nv_model import BathParams
from qresponse.propagator import rotating_quench_response

D = 0.06765


def test_two_spin_weights():
    p = 0.4
    up, down = (1 - p) / 2, (1 + p) / 2
    got = {(s.i0, s.m0): s.weight for s in bath_sectors(2, p)}
    # singlet plus triplet, the triplet M0 = 0 state sharing the mixed weight
    expected = {(0.0, 0.0): up * down, (1.0, 1.0): up**2, (1.0, 0.0): up * down, (1.0, -1.0): down**2}
    assert got.keys() == expected.keys()
    for key in expected:
        assert got[key] == pytest.approx(expected[key], abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 40), st.floats(-1, 1))
def test_weights_normalised(n, p):
    assert sum(s.weight for s in bath_sectors(n, p)) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("n", [1, 4, 7, 20])
def test_multiplicities_count_all_states(n):
    half = n / 2
    total = sum(comb(n, int(round(half - i0))) * (2 * i0 + 1) ** 2 / (half + i0 + 1)
                for i0 in {s.i0 for s in bath_sectors(n, 0.0)})
    assert total == pytest.approx(2**n)


def test_fully_polarised():
    for p, m0 in ((1.0, -2.0), (-1.0, 2.0)):
        heavy = [s for s in bath_sectors(4, p) if s.weight > 0]
        assert len(heavy) == 1 and heavy[0].i0 == 2.0 and heavy[0].m0 == m0
        assert heavy[0].weight == pytest.approx(1.0)


def test_sector_order():
    sectors = bath_sectors(3, 0.1)
    assert [(s.i0, s.m0) for s in sectors] == [(0.5, 0.5), (0.5, -0.5), (1.5, 1.5), (1.5, 0.5),
                                               (1.5, -0.5), (1.5, -1.5)]


@pytest.mark.parametrize("n, p", [(0, 0.0), (3, 1.5)])
def test_invalid_bath(n, p):
    with pytest.raises(ValueError):
        bath_sectors(n, p)


def test_uncoupled_bath_is_pure_response():
    v = 0.1
    pure = rotating_quench_response(D, v, tol=1e-10).retrieved_curvature
    res = mixed_response(BathParams(3, 0.0, 0.3), D, v, tol=1e-10)
    assert res.retrieved_curvature == pytest.approx(pure, abs=1e-10)


@pytest.mark.parametrize("n, p", [(2, 0.0), (3, 0.3)])
def test_against_brute_force(n, p):
    v, a = 0.1, 0.02
    res = mixed_response(BathParams(n, a, p), D, v, tol=1e-10)
    assert res.retrieved_curvature == pytest.approx(brute_force_bath_response(n, a, p, D, v), abs=1e-8)


def test_trace_and_contributions():
    res = mixed_response(BathParams(4, 0.02, 0.2), D, 0.1, tol=1e-9)
    assert res.trace == pytest.approx(1.0, abs=1e-10)
    assert sum(res.contributions.values()) == pytest.approx(res.retrieved_curvature, abs=1e-12)
    assert (res.N, res.A, res.P, res.v) == (4, 0.02, 0.2, 0.1)


def test_cutoff_audit():
    sectors = bath_sectors(20, 0.999)
    kept, skipped = _kept_sectors(sectors)
    assert 0 < skipped < MAX_SKIPPED_MASS
    assert len(kept) < len(sectors) and min(s.weight for s in kept) >= 0
    dropped = set(sectors) - set(kept)
    assert all(s.weight < WEIGHT_CUTOFF for s in dropped)
    assert sum(s.weight for s in dropped) == pytest.approx(skipped, rel=1e-12)
    # sectors that were never evolved cannot be silently ignored
    responses = sector_responses(20, 0.02, D, 0.4, tol=1e-6, i0_values=[10.0])
    with pytest.raises(KeyError):
        combine(responses, 0.999)


def test_sweeps():
    bp = BathParams(2, 0.02, 0.2)
    assert decoherence_sweep(bp, D, []) == []
    v_list = [0.2, 0.1]
    sweep = decoherence_sweep(bp, D, v_list, tol=1e-9)
    assert [r.v for r in sweep] == v_list
    both = polarization_sweep(2, 0.02, D, v_list, [0.0, 0.2], tol=1e-9, threads=2)
    assert [r.retrieved_curvature for r in both[0.2]] == [r.retrieved_curvature for r in sweep]
    with pytest.raises(ValueError):
        mixed_response(bp, D, 0.0)

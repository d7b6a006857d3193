import math

import pytest
from hypothesis import given, settings, strategies as st

from macstab.coding import CodingConfig
from macstab.errors import (CatalogTooLarge, DomainError, KBudgetExceeded, OutsideRegion,
                            UnservedQueue)
from macstab.regions import (MSG, NAT, RateVector, Verdict, asymptotic_box, capacity_membership,
                             capacity_radius, enumerate_schedules, nat_rate_threshold,
                             outer_bound_membership, outer_bound_radius, psi, schedule_for_rate,
                             split_distribution, synthesize_policy,
                             verify_capacity_interpretation)
from oracles import capacity_ok_2d, length_linear_scan, outer_margin_2d


def test_enumerate_counts(pair):
    cat = enumerate_schedules(2, 1, pair)
    assert cat.schedules == [(0, 0), (1, 0), (0, 1)]
    assert len(enumerate_schedules(2, 2, pair)) == 6
    big = enumerate_schedules(2, 3, pair)
    assert len(big) == math.comb(5, 2)
    assert len(set(big.schedules)) == len(big)


def test_enumerate_lengths(single):
    cat = enumerate_schedules(1, 2, single)
    assert cat.lengths == {(1,): 6, (2,): 7}
    for s, n in cat.lengths.items():
        assert n == length_linear_scan(single.M, single.P, 1.0, 1.0, 0.01, s)
        assert cat.rates[s] == (s[0] / n,)


def test_enumerate_guard():
    c = CodingConfig(M=(2,) * 6, P=(1.0,) * 6)
    with pytest.raises(CatalogTooLarge):
        enumerate_schedules(6, 30, c)


def test_split_distribution_example(single):
    cat = enumerate_schedules(1, 2, single)
    pol = split_distribution({(1,): 0.5, (2,): 0.3}, cat)
    assert pol.idle == pytest.approx(0.2)
    assert pol.mu[0][(1,)] == pytest.approx(0.49296, abs=1e-5)
    assert pol.mu[0][(2,)] == pytest.approx(0.50704, abs=1e-5)
    assert psi(pol, cat).values[0] == pytest.approx(0.169048, abs=1e-6)


def test_split_single_and_symmetric(pair):
    cat = enumerate_schedules(2, 1, pair)
    pol = split_distribution({(1, 0): 0.5, (0, 1): 0.5}, cat)
    assert pol.mu == {0: {(1, 0): 1.0}, 1: {(0, 1): 1.0}}
    cat2 = enumerate_schedules(2, 2, pair)
    # (1,0) N=6 and (2,0) N=7: choose p so that p s_j / N match
    pol = split_distribution({(1, 0): 0.3, (2, 0): 0.3 * 7 / 12}, cat2, demand=(1, 0))
    assert pol.mu[0][(1, 0)] == pytest.approx(0.5)
    assert pol.mu[1] == {}


def test_split_unserved(pair):
    cat = enumerate_schedules(2, 1, pair)
    with pytest.raises(UnservedQueue):
        split_distribution({(1, 0): 1.0}, cat)


def test_psi_cases(single_catalog):
    assert psi({(1,): 1.0}, single_catalog).values == pytest.approx((1 / 6,))
    assert psi({}, single_catalog).values == (0.0,)


def test_rate_units(single_catalog):
    with pytest.raises(DomainError):
        outer_bound_membership(RateVector((0.1,), NAT), single_catalog)
    with pytest.raises(DomainError):
        capacity_membership(RateVector((0.1,), MSG), (1.0,), 1.0)


@pytest.mark.parametrize("beta, verdict", [
    (0.0, Verdict.INSIDE), (1 / 6, Verdict.BOUNDARY), (0.15, Verdict.INSIDE),
    (0.18, Verdict.OUTSIDE)])
def test_outer_bound_single(single_catalog, beta, verdict):
    assert outer_bound_membership([beta], single_catalog).verdict is verdict


def test_outer_bound_timesharing(pair):
    cat = enumerate_schedules(2, 1, pair)
    res = outer_bound_membership([0.1, 0.1], cat)
    assert res.verdict is Verdict.OUTSIDE
    assert res.margin == pytest.approx(-1 / 60, abs=1e-9)


@settings(max_examples=80, deadline=None)
@given(st.floats(0, 0.3), st.floats(0, 0.3))
def test_outer_margin_matches_dual_oracle(b1, b2):
    cfg = CodingConfig(M=(2, 4), P=(3.0, 1.0))
    cat = enumerate_schedules(2, 2, cfg)
    res = outer_bound_membership([b1, b2], cat)
    ref = outer_margin_2d((b1, b2), [cat.rates[s] for s in cat.serving])
    assert res.margin == pytest.approx(ref, abs=1e-8)
    # certificate re-evaluated independently
    pi = res.certificate
    assert sum(pi.values()) == pytest.approx(1.0)
    assert min(pi.values()) >= 0
    served = [sum(w * cat.rates[s][j] for s, w in pi.items() if any(s)) for j in range(2)]
    assert served[0] >= b1 + res.margin - 1e-9
    assert served[1] >= b2 + res.margin - 1e-9


def test_synthesize_single(single_catalog):
    pol = synthesize_policy([0.15], single_catalog)
    assert pol.p == {(1,): pytest.approx(1.0)}
    assert psi(pol, single_catalog).values[0] == pytest.approx(1 / 6)
    with pytest.raises(OutsideRegion) as err:
        synthesize_policy([1 / 6], single_catalog)
    assert abs(err.value.margin) <= 1e-9
    with pytest.raises(OutsideRegion):
        synthesize_policy([0.18], single_catalog)


def test_synthesize_zero_target(pair):
    cat = enumerate_schedules(2, 2, pair)
    pol = synthesize_policy([0.0, 0.0], cat)
    assert all(v > 0 for v in psi(pol, cat).values)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=5, max_size=5),
       st.lists(st.floats(0, 1), min_size=5, max_size=5), st.floats(0, 1))
def test_psi_linear(a, b, lam):
    cfg = CodingConfig(M=(2, 2), P=(3.0, 3.0))
    cat = enumerate_schedules(2, 2, cfg)
    sa, sb = sum(a) or 1.0, sum(b) or 1.0
    p = {s: w / sa for s, w in zip(cat.serving, a)}
    q = {s: w / sb for s, w in zip(cat.serving, b)}
    mix = {s: lam * p[s] + (1 - lam) * q[s] for s in cat.serving}
    lhs = psi(mix, cat).values
    rhs = [lam * x + (1 - lam) * y for x, y in zip(psi(p, cat).values, psi(q, cat).values)]
    assert lhs == pytest.approx(rhs, abs=1e-14)


@pytest.mark.parametrize("r, verdict", [
    ((0.5, 0.5), Verdict.INSIDE), ((0.6, 0.6), Verdict.OUTSIDE), ((0.0, 0.0), Verdict.INSIDE),
    ((math.log(3) / 2, math.log(3) / 2), Verdict.BOUNDARY)])
def test_capacity_membership(r, verdict):
    assert capacity_membership(RateVector(r, NAT), (1.0, 1.0), 1.0) is verdict


def test_asymptotic_box_matches_rate():
    assert asymptotic_box((3, 1), (1.0, 1.0), 1.0).values == pytest.approx(
        (math.log(2), math.log(2) / 3))
    assert asymptotic_box((1,), (3.0,), 1.0).values == pytest.approx((math.log(4),))


def test_schedule_for_rate_examples():
    assert schedule_for_rate((0.4, 0.4), (1.0, 1.0), 1.0, eps=0.01) == (1, 1)
    s = schedule_for_rate((0.5, 0.0), (1.0, 1.0), 1.0, eps=0.01)
    assert s[1] == 0 and s[0] >= 1
    with pytest.raises(DomainError):
        schedule_for_rate((0.6, 0.6), (1.0, 1.0), 1.0)


def test_schedule_for_rate_near_sum_face():
    # 99% of the sum capacity; total scale must grow beyond 2
    r = (0.99 * math.log(3) * 0.45, 0.99 * math.log(3) * 0.55)
    s = schedule_for_rate(r, (1.0, 1.0), 1.0, eps=0.001, k_max=200)
    box = asymptotic_box(s, (1.0, 1.0), 1.0).values
    assert all(b > x for b, x in zip(box, r))
    with pytest.raises(KBudgetExceeded):
        schedule_for_rate(r, (1.0, 1.0), 1.0, eps=0.001, k_max=3)


def test_nat_rate_threshold(single):
    assert nat_rate_threshold((1,), single).values == pytest.approx((math.log(2) / 6,))
    two = CodingConfig(M=(2, 2), P=(3.0, 3.0))
    assert nat_rate_threshold((1, 0), two).values == pytest.approx((0.115525, 0.0), abs=1e-6)


def test_nat_threshold_approaches_box_corner():
    gaps = []
    for rho in (0.5, 0.1, 0.001):
        c = CodingConfig(log_M=(1e6, 1e6), P=(1.0, 1.0), rho=rho)
        thr = nat_rate_threshold((1, 1), c).values
        gaps.append(abs(thr[0] / asymptotic_box((1, 1), (1.0, 1.0), 1.0).values[0] - 1))
    assert gaps == sorted(gaps, reverse=True)
    assert gaps[-1] < 5e-3


def test_radius_examples(single_catalog):
    assert capacity_radius((1, 1), (1.0, 1.0), 1.0) == pytest.approx(0.7768362, abs=1e-7)
    assert outer_bound_radius((1,), single_catalog) == pytest.approx(1 / 6)
    with pytest.raises(DomainError):
        capacity_radius((0, 0), (1.0, 1.0), 1.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 0.75), st.floats(0, 0.75))
def test_capacity_matches_halfplanes(r1, r2):
    verdict = capacity_membership(RateVector((r1, r2), NAT), (1.0, 1.0), 1.0)
    if verdict is Verdict.INSIDE:
        assert capacity_ok_2d((r1, r2), (1.0, 1.0), 1.0)
    elif verdict is Verdict.OUTSIDE:
        assert not capacity_ok_2d((r1, r2), (1.0, 1.0), 1.0)


def test_capacity_check_report_skips_boundary():
    rep = verify_capacity_interpretation((1.0, 1.0), 1.0, 0, seed=3,
                                         extra_points=[(math.log(3) / 2, math.log(3) / 2)])
    assert rep["skipped"] == 1
    assert rep["forward_pass"] == rep["forward_fail"] == 0
    rep = verify_capacity_interpretation((1.0, 1.0), 1.0, 20, seed=3)
    assert rep["forward_pass"] == 20 and rep["reverse_pass"] == 20

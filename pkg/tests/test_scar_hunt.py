import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pointscatter import lattice_arith as la
from pointscatter import scar_hunt as sh
from pointscatter.errors import DomainError
from pointscatter.spectral_core import SpectralProblem

P2 = SpectralProblem(2)
P3 = SpectralProblem(3)


# -- dimension 3 ---------------------------------------------------------------


def test_axis_directions_persist():
    axes = la.direction_set(3, 1).key()
    for c in sh.power4_sequence(1, 8):
        assert la.direction_set(3, c.m).key() == axes
        assert c.r_m == 6 and c.form == ("power4_times_l", 1, c.form[2])


def test_power4_l2_k5():
    (c,) = sh.power4_sequence(2, 5, 5)
    assert c.m == 2048 and c.r_m == 12 == la.r3(2048)


@pytest.mark.parametrize("l", [1, 2, 5])
def test_predicted_bound_decreases(l):
    cands = sh.power4_sequence(l, 15, 2)
    b = [c.predicted_delta_bound for c in cands]
    # single steps follow r3 of the neighbour shell; two steps always gain
    assert all(x > y for x, y in zip(b, b[2:]))
    assert all(c.predicted_delta_bound * c.m**0.25 <= 3 for c in cands)


def test_power4_argument_checks():
    with pytest.raises(DomainError):
        sh.power4_sequence(7, 3)
    with pytest.raises(DomainError):
        sh.power4_sequence(1, 16)


def test_solved_3d_candidates_obey_bound():
    for c in sh.power4_sequence(5, 7, 3):
        s = sh.solve_candidate(P3, c)
        assert not s.violates()
        assert s.empirical_constant(P3) > 0
    with pytest.raises(DomainError):
        sh.solve_candidate(P2, c)
    with pytest.raises(DomainError):
        c.empirical_constant(P3)


# -- dimension 2: progressions ---------------------------------------------------


def test_crt_small():
    p = sh.crt_progression(5)
    assert (p.P, p.r, p.stride) == (5, 4, 10)
    p = sh.crt_progression(13)
    assert p.P == 65 and p.r % 2 == 0 and (p.r * p.r + 4) % 65 == 0
    with pytest.raises(DomainError):
        sh.crt_progression(3)


@pytest.mark.parametrize("K", [5, 13, 17, 29])
def test_progression_forces_many_representations(K):
    p = sh.crt_progression(K)
    floor = 4 * 2 ** len(p.primes)
    for x in p.members(0, 200 * p.stride).tolist():
        assert la.r2(x * x + 4) >= floor


def test_members_window():
    p = sh.crt_progression(13)
    xs = p.members(1000, 2000)
    assert np.all((xs >= 1000) & (xs < 2000))
    assert np.all(xs % p.stride == p.r)
    assert xs.tolist() == [x for x in range(1000, 2000) if x % p.stride == p.r]


def test_scan_candidates():
    cands = sh.scan_n2_plus_1(sh.crt_progression(13), (0, 30000), 32)
    assert cands
    for c in cands:
        x = c.form[1]
        assert c.m == x * x + 1 and x % 2 == 0 and c.m % 4 == 1
        assert la.in_spectrum(2, c.m) and c.r_m <= 32
        h, rb = c.boost_neighbor
        assert h == 3 and rb == la.r2(c.m + 3)
        assert c.predicted_delta_bound == pytest.approx(math.sqrt(10 * la.r2(c.m) / rb))
    strong = [c for c in cands if c.boost_ratio >= 16]
    assert len(strong) >= 3


def test_scan_min_ratio_filter():
    p = sh.crt_progression(13)
    all_ = sh.scan_n2_plus_1(p, (0, 30000), 32)
    some = sh.scan_n2_plus_1(p, (0, 30000), 32, min_ratio=16)
    assert [c.m for c in some] == [c.m for c in all_ if c.boost_ratio >= 16]
    with pytest.raises(DomainError):
        sh.scan_n2_plus_1(p, (0, 10), 2)


def test_n2_plus_1_candidates_obey_bound():
    for c in sh.scan_n2_plus_1(sh.crt_progression(13), (0, 3000), 32):
        assert not sh.solve_candidate(P2, c).violates()


# -- dimension 2: boost pairs ----------------------------------------------------


def test_boost_pairs_membership_and_ratio():
    cands = sh.boost_pair_scan(20000, 4, 2)
    assert cands
    for c in cands:
        h, rb = c.boost_neighbor
        assert 1 <= h <= 3
        assert la.in_spectrum(2, c.m) and la.in_spectrum(2, c.m + h)
        assert c.m % 4 != 3 and (c.m + h) % 4 != 3
        assert rb == la.r2(c.m + h) >= 4 * c.r_m
        # no smaller shift qualifies
        assert all(la.r2(c.m + g) < 4 * c.r_m for g in range(1, h))


def test_boost_pair_scan_matches_brute_force():
    r = la.r2_table(5003)
    want = []
    for m in range(1, 5001):
        if 0 < r[m] <= 32:
            hs = [h for h in (1, 2, 3) if r[m + h] >= 4 * r[m]]
            if hs:
                want.append((m, hs[0]))
    got = [(c.m, c.boost_neighbor[0]) for c in sh.boost_pair_scan(5000, 4, 2)]
    assert got == want
    assert sh.boost_pair_count(5000, 4, 2) == len(want)


def test_boost_candidates_obey_bound():
    for c in sh.boost_pair_scan(3000, 8, 2)[:40]:
        s = sh.solve_candidate(P2, c)
        assert abs(s.solved.delta) <= c.predicted_delta_bound


def test_boost_counts_increase():
    counts = [sh.boost_pair_count(x, 4, 2) for x in (10**5, 10**6, 10**7)]
    assert counts == [725, 7440, 74018]


def test_boost_argument_checks():
    with pytest.raises(DomainError):
        sh.boost_pair_scan(100, 1.5, 2)
    with pytest.raises(DomainError):
        sh.boost_pair_count(100, 4, 0)


# -- admissible tuples -----------------------------------------------------------


def test_tuple_system_h2():
    s = sh.build_tuple_system(2, (1, 1))
    assert s.Q1 == 24 and s.q == (5, 13) and s.Q == 24 * 65
    g = s.gamma
    assert g % 8 == 0 and g % 3 == 1
    assert (g * g + 1) % 5 == 0 and (g * g + 1) % 25
    assert (g * g + 4) % 13 == 0 and (g * g + 4) % 169
    assert s.gamma == 952 and s.d == (1, 4)


@pytest.mark.parametrize("H, e", [(2, (1, 1)), (2, (2, 1)), (3, (1, 1, 2)), (4, (1, 1, 1, 1))])
def test_tuple_polynomials(H, e):
    s = sh.build_tuple_system(H, e)
    for t in range(-5, 40):
        a = [s.a(i, t) for i in range(1, H + 1)]
        assert a[-1] - a[0] == H * H - 1
        for i in range(1, H + 1):
            den = s.q[i - 1] ** e[i - 1] * s.d[i - 1]
            assert s.G(i, t) * den == a[i - 1]
            # q_i^e_i divides a_i exactly
            assert a[i - 1] % s.q[i - 1] ** e[i - 1] == 0


def test_tuple_argument_checks():
    with pytest.raises(DomainError):
        sh.build_tuple_system(1, (1,))
    with pytest.raises(DomainError):
        sh.build_tuple_system(2, (1,))
    with pytest.raises(DomainError):
        sh.build_tuple_system(2, (0, 1))


def test_almost_prime_hits():
    s = sh.build_tuple_system(2, (1, 1))
    hits = sh.almost_prime_scan(s, (1, 200), 8)
    assert len(hits) == 199
    for h in hits:
        assert sum(h.omegas) <= 8
        for i, a in enumerate(h.a):
            assert la.in_spectrum(2, a)
            assert h.r2[i] == la.r2(a) >= s.exponents[i] + 1
            assert la.big_omega(s.G(i + 1, h.t)) == h.omegas[i]
    tight = sh.almost_prime_scan(s, (1, 200), 3)
    assert tight and all(sum(h.omegas) <= 3 for h in tight)
    with pytest.raises(DomainError):
        sh.almost_prime_scan(s, (1, 5), 1)


def test_reexported_count():
    assert sh.count_new_eigenvalues(2, 10) == 6


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 400))
def test_progression_property(x):
    p = sh.crt_progression(13)
    y = int(p.members(x * p.stride, (x + 1) * p.stride)[0])
    assert (y * y + 4) % 65 == 0
    assert la.r2(y * y + 4) >= 16


def test_candidate_offset_is_measured_from_its_own_shell():
    # the closest new eigenvalue to 276^2 + 1 lies in the gap below it
    (c,) = [c for c in sh.scan_n2_plus_1(sh.crt_progression(13), (276, 277), 32)]
    s = sh.solve_candidate(P2, c)
    assert s.solved.nearest_m == c.m == 76177
    assert -1 < s.solved.delta < -0.5
    assert not s.violates()

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pointscatter import lattice_arith as la
from pointscatter.budget import PROFILES
from pointscatter.errors import DomainError, ResourceError

from oracles import brute_points, brute_r2_table, brute_r3_table


@pytest.mark.parametrize("n, want", [(0, 1), (1, 4), (3, 0), (25, 12), (5, 8), (65, 16)])
def test_r2_examples(n, want):
    assert la.r2(n) == want


@pytest.mark.parametrize("n, want", [(0, 1), (1, 6), (7, 0), (2, 12), (9, 30), (28, 0)])
def test_r3_examples(n, want):
    assert la.r3(n) == want


@pytest.mark.parametrize("n, want", [(9, 24), (1, 6), (28, 0), (3, 8)])
def test_primitive_r3_examples(n, want):
    assert la.primitive_r3(n) == want


@pytest.mark.parametrize("n", [1, 9, 16, 50, 75])
def test_moebius_small(n):
    assert la.verify_r3_moebius(n)


def test_moebius_nine_decomposes_as_24_plus_6():
    assert la.r3(9) == la.primitive_r3(9) + la.primitive_r3(1) == 30


@pytest.mark.parametrize("n, want", [(3, 16), (7, 0), (5, 24), (1, 24), (2, 24), (6, 24),
                                     (4, 0), (8, 0), (11, 16)])
def test_gn_class(n, want):
    assert la.gn_class(n) == want


def test_gn_zero_residues_have_no_primitive_reps():
    for n in range(1, 2000):
        if n % 8 in (0, 4, 7):
            assert la.primitive_r3(n) == 0


def test_r2_table_matches_enumeration():
    N = 20000
    assert np.array_equal(la.r2_table(N)[: N + 1], brute_r2_table(N))


def test_r3_table_matches_enumeration():
    N = 3000
    assert np.array_equal(la.r3_table(N)[: N + 1], brute_r3_table(N))


def test_scalar_r3_matches_table():
    t = la.r3_table(5000)
    assert all(la.r3(n) == t[n] for n in range(5001))


@pytest.mark.parametrize("lo", [0, 10**6, 10**12 - 500, 2**40])
def test_r2_range_matches_scalar(lo):
    r = la.r2_range(lo, lo + 300)
    assert [int(v) for v in r] == [la.r2(n) for n in range(lo, lo + 301)]


@pytest.mark.parametrize("lo", [0, 5000, 10**6])
def test_r3_range_matches_scalar(lo):
    r = la.r3_range(lo, lo + 200)
    assert [int(v) for v in r] == [la.r3(n) for n in range(lo, lo + 201)]


def test_shells_in_window_examples():
    got = [(s.n, s.count) for s in la.shells_in_window(2, 0, 5)]
    assert got == [(0, 1), (1, 4), (2, 4), (4, 4), (5, 8)]
    assert la.shells_in_window(3, 7, 7) == []
    assert la.shells_in_window(2, 3, 3) == []


def test_shells_in_window_rejects_bad_range():
    with pytest.raises(DomainError):
        la.shells_in_window(2, 5, 1)


def test_window_over_budget_names_it(monkeypatch):
    monkeypatch.setenv("POINTSCATTER_BUDGET", "desk")
    with pytest.raises(ResourceError, match="desk"):
        la.shells_in_window(2, 10**12, 10**12 + PROFILES["desk"].max_window + 10)


def test_shell_points_materialize():
    sh = la.shells_in_window(3, 9, 9)[0].with_points()
    assert len(sh.points) == sh.count == 30
    assert np.all(np.sum(sh.points**2, axis=1) == 9)
    assert {tuple(p) for p in sh.points.tolist()} == brute_points(3, 9)


def test_direction_set_examples():
    ax = la.direction_set(3, 1)
    assert {tuple(v) for v in ax.vectors.tolist()} == {
        (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)}
    d2 = la.direction_set(2, 2).directions
    ang = np.sort(np.mod(np.arctan2(d2[:, 1], d2[:, 0]), 2 * np.pi))
    assert np.allclose(ang, np.pi / 4 + np.arange(4) * np.pi / 2)
    for k in range(1, 7):
        assert la.direction_set(3, 4**k).key() == ax.key()


def test_direction_set_empty_shell():
    with pytest.raises(DomainError):
        la.direction_set(3, 7)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 3000), st.sampled_from([2, 3]))
def test_direction_set_unit_and_symmetric(n, dim):
    if not la.in_spectrum(dim, n):
        return
    ds = la.direction_set(dim, n)
    assert len(ds) == la.r_d(dim, n)
    assert np.allclose(np.linalg.norm(ds.directions, axis=1), 1, atol=1e-14)
    vecs = {tuple(v) for v in ds.vectors.tolist()}
    assert all(tuple(-c for c in v) in vecs for v in vecs)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 10**15))
def test_factorization_product(n):
    f = la.factorize(n)
    primes = [p for p, _ in f]
    assert primes == sorted(set(primes))
    assert all(la.is_prime(p) for p in primes)
    assert math.prod(p**e for p, e in f) == n == f.value()


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 10**6), st.integers(1, 10**6))
def test_r2_multiplicative_on_coprime(a, b):
    if math.gcd(a, b) == 1:
        assert la.r2(a) * la.r2(b) == 4 * la.r2(a * b)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6))
def test_r3_fourfold(n):
    assert la.r3(4 * n) == la.r3(n)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 10**15))
def test_three_square_obstruction(n, big):
    def obstructed(k):
        while k and k % 4 == 0:
            k //= 4
        return k > 0 and k % 8 == 7

    assert (la.r3(n) == 0) == obstructed(n)
    assert la.is_sum_of_three_squares(big) == (not obstructed(big))


def test_is_prime_against_sieve():
    ps = set(la.primes_up_to(100000).tolist())
    assert all(la.is_prime(n) == (n in ps) for n in range(100001))
    # strong pseudoprimes to several small bases
    for n in (3215031751, 3825123056546413051, 318665857834031151167461):
        assert not la.is_prime(n)


def test_lattice_count_against_tables():
    r2 = la.r2_table(5000)
    r3 = la.r3_table(5000)
    for x in (0, 1, 10, 999, 5000):
        assert la.lattice_count(2, x) == int(r2[: x + 1].sum())
        assert la.lattice_count(3, x) == int(r3[: x + 1].sum())


def test_spectrum_neighbours():
    assert la.next_in_spectrum(2, 2) == 4
    assert la.prev_in_spectrum(2, 4) == 2
    assert la.prev_in_spectrum(2, 0) is None
    assert la.next_in_spectrum(3, 6) == 8

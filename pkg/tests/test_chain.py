import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import column_sums, preimage_row

from coarsegrain.chain import (
    DENSE_LIMIT,
    TransitionMatrix,
    brute_force_row,
    build_transition_matrix,
    generic_row,
    preimage_measure,
    verify_doubly_stochastic,
)
from coarsegrain.entropy import skew_tent
from coarsegrain.maps import MapError, SlopeClass, random_invariant_map
from coarsegrain.partition import Interval, uniform_partition

HALF = F(1, 2)


def dense(P):
    return [[P.entry(n, j) for j in range(1, P.N + 1)] for n in range(1, P.N + 1)]


def oracle_matrix(f, N):
    slopes = [br.coef for br in f.branches]
    icpts = [br.intercept for br in f.branches]
    return [preimage_row(f.breakpoints, slopes, icpts, N, n) for n in range(1, N + 1)]


def test_preimage_measure_examples():
    tent = skew_tent(2)
    assert preimage_measure(tent, Interval(0, HALF), Interval(0, HALF)) == F(1, 4)
    A = Interval(F(1, 5), F(7, 9))
    assert preimage_measure(tent, Interval(0, 1, True), A) == A.length
    assert preimage_measure(tent, Interval(HALF, HALF), A) == 0


def test_tent_matrices():
    tent = skew_tent(2)
    assert dense(build_transition_matrix(tent, uniform_partition(2))) == [[HALF, HALF], [HALF, HALF]]
    P3 = build_transition_matrix(tent, uniform_partition(3))
    assert dense(P3) == [[HALF, HALF, 0], [0, 0, 1], [HALF, HALF, 0]]
    assert P3.straddling == (2,)


def test_skew_tent_row_against_oracle():
    f = skew_tent(F(3, 2))
    P = build_transition_matrix(f, uniform_partition(3))
    assert dense(P)[0] == [F(2, 3), F(1, 3), 0]
    assert dense(P) == oracle_matrix(f, 3)


@pytest.mark.parametrize("m", [2, F(3, 2), F(7, 3), F(5, 2), 3])
@pytest.mark.parametrize("N", [1, 2, 5, 12, 31])
def test_skew_tent_matrix_matches_preimage_oracle(m, N):
    f = skew_tent(m)
    assert dense(build_transition_matrix(f, uniform_partition(N))) == oracle_matrix(f, N)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), N=st.integers(1, 40))
def test_random_maps_match_preimage_oracle(seed, N):
    f = random_invariant_map(np.random.default_rng(seed))
    P = build_transition_matrix(f, uniform_partition(N))
    assert dense(P) == oracle_matrix(f, N)
    assert verify_doubly_stochastic(P)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), N=st.integers(1, 300))
def test_fast_path_agrees_with_generic_path(seed, N):
    f = random_invariant_map(np.random.default_rng(seed))
    delta = uniform_partition(N)
    P = build_transition_matrix(f, delta)
    for n in range(1, N + 1):
        assert P.rows[n - 1] == generic_row(f, delta, n)
    assert len(P.straddling) <= f.r
    max_slope = max(br.slope.magnitude for br in f.branches)
    for n in set(range(1, N + 1)) - set(P.straddling):
        assert len(P.rows[n - 1]) <= math.ceil(max_slope) + 1


def test_brute_force_row_is_the_definition():
    f = skew_tent(F(7, 3))
    delta = uniform_partition(9)
    P = build_transition_matrix(f, delta)
    for n in range(1, 10):
        assert P.rows[n - 1] == brute_force_row(f, delta, n)


def test_doubly_stochastic_examples():
    assert verify_doubly_stochastic(build_transition_matrix(skew_tent(2), uniform_partition(3)))
    eye = TransitionMatrix(2, (((1, F(1)),), ((2, F(1)),)))
    assert verify_doubly_stochastic(eye)
    bad = TransitionMatrix(2, (((1, F(1)),), ((1, F(1)),)))
    assert not verify_doubly_stochastic(bad)


def test_non_invariant_map_is_not_doubly_stochastic():
    from coarsegrain.maps import make_map

    f = make_map(["0", "1/2", "1"], [2, F(-1, 2)], [0, F(1, 2)])
    P = build_transition_matrix(f, uniform_partition(8))
    assert all(s == 1 for s in P.row_sums())
    assert not verify_doubly_stochastic(P)


def test_float_mode_from_exact_converts_at_the_end():
    f = skew_tent(F(3, 2))
    delta = uniform_partition(50)
    P = build_transition_matrix(f, delta)
    Q = build_transition_matrix(f, delta, mode="float")
    assert Q.mode == "float"
    assert Q.rows == P.to_float().rows


def test_irrational_float_mode():
    f = skew_tent(SlopeClass.irrational(math.sqrt(2), "sqrt2"))
    with pytest.raises(MapError):
        build_transition_matrix(f, uniform_partition(10), mode="exact")
    P = build_transition_matrix(f, uniform_partition(1000))
    assert P.mode == "float"
    assert verify_doubly_stochastic(P)
    assert len(P.straddling) <= 2
    assert all(0 <= p <= 1 for r in P.rows for _, p in r)


def test_irrational_float_mode_against_nearby_rational():
    # a rational slope within 1e-13 of sqrt2 gives nearly the same matrix
    r = F(math.sqrt(2)).limit_denominator(10**7)
    P = build_transition_matrix(skew_tent(r), uniform_partition(97))
    Q = build_transition_matrix(skew_tent(SlopeClass.irrational(math.sqrt(2))), uniform_partition(97))
    for a, b in zip(P.rows, Q.rows):
        da, db = dict(a), dict(b)
        for j in da.keys() | db.keys():
            assert abs(float(da.get(j, 0)) - db.get(j, 0)) < 1e-9


@pytest.mark.parametrize("m", [math.sqrt(2), math.pi, (1 + math.sqrt(5)) / 2])
def test_float_column_sums_match_exact_data(m):
    # rounding N y directly would drift by an ulp of N (about 1e-12 here)
    f = skew_tent(SlopeClass.irrational(m))
    N = 20_000
    P = build_transition_matrix(f, uniform_partition(N))
    exact = column_sums(f.breakpoints, [br.coef for br in f.branches], [br.intercept for br in f.branches], N)
    assert max(abs(s - float(e)) for s, e in zip(P.column_sums(), exact)) <= 1e-14


def test_dense_refused_for_large_N():
    P = build_transition_matrix(skew_tent(2), uniform_partition(DENSE_LIMIT))
    with pytest.raises(MemoryError):
        P.to_dense()
    small = build_transition_matrix(skew_tent(2), uniform_partition(4)).to_dense()
    assert small.shape == (4, 4) and np.allclose(small.sum(axis=1), 1)


def test_triplet_dump_round_trip(tmp_path):
    P = build_transition_matrix(skew_tent(F(7, 3)), uniform_partition(11))
    path = tmp_path / "p.csv"
    P.write_triplets(path)
    header = path.read_text().splitlines()[0]
    assert header == "row,col,numerator,denominator"
    Q = TransitionMatrix.read_triplets(path, 11)
    assert Q.rows == P.rows
    Pf = P.to_float()
    Pf.write_triplets(path)
    assert TransitionMatrix.read_triplets(path, 11).rows == Pf.rows

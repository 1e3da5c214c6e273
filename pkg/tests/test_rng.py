import numpy as np
from hypothesis import given, strategies as st

from lesionxfer.nn import Rng

# first outputs of the reference SplitMix64 generator started at state 0
SPLITMIX64_SEED0 = (0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F)


def test_matches_reference_splitmix64_stream():
    rng = Rng(0)
    assert tuple(int(v) for v in rng.next_u64(3)) == SPLITMIX64_SEED0


def test_scalar_and_vector_draws_agree():
    a = Rng(99)
    b = Rng(99)
    vec = b.next_u64(5)
    assert [a.next_u64() for _ in range(5)] == [int(v) for v in vec]


def test_uniform_is_53_bit_fraction_in_unit_interval():
    u = Rng(3).uniform(10_000)
    assert u.dtype == np.float64
    assert u.min() >= 0.0 and u.max() < 1.0
    assert np.all(u * 2**53 == np.floor(u * 2**53))
    assert abs(u.mean() - 0.5) < 0.01


def test_fork_is_deterministic_and_key_sensitive():
    base = Rng(5)
    assert Rng(5).fork("a", 1).next_u64() == base.fork("a", 1).next_u64()
    draws = {base.fork(k).next_u64() for k in ("a", "b", 1, 2)}
    assert len(draws) == 4
    assert base.fork("a", 1).next_u64() != base.fork(1, "a").next_u64()


def test_fork_does_not_advance_parent():
    rng = Rng(8)
    rng.fork("x").uniform(100)
    assert rng.next_u64() == Rng(8).next_u64()


@given(st.integers(0, 2**64 - 1), st.integers(0, 200))
def test_permutation_is_a_permutation(seed, n):
    perm = Rng(seed).permutation(n)
    assert sorted(perm.tolist()) == list(range(n))


@given(st.integers(0, 2**64 - 1), st.lists(st.integers(), max_size=40))
def test_shuffle_preserves_multiset(seed, items):
    out = Rng(seed).shuffle(list(items))
    assert sorted(out) == sorted(items)


def test_permutation_follows_fisher_yates_with_floor_rule():
    # j = floor(u * (i + 1)) for i = n-1 .. 1, draws taken in that order
    n = 9
    u = Rng(21).uniform(n - 1)
    expected = list(range(n))
    for k, i in enumerate(range(n - 1, 0, -1)):
        j = int(u[k] * (i + 1))
        expected[i], expected[j] = expected[j], expected[i]
    assert Rng(21).permutation(n).tolist() == expected

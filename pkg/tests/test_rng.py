import pytest
from hypothesis import given, strategies as st

from triggerkit.rng import SplitMix64, derive_seed


def test_same_seed_same_stream():
    a = SplitMix64(123456789)
    b = SplitMix64(123456789)
    assert [a.next_u64() for _ in range(50)] == [b.next_u64() for _ in range(50)]


def test_known_first_outputs_pinned():
    # Regression pin for cross-run stability of the documented generator.
    rng = SplitMix64(0)
    first = [rng.next_u64() for _ in range(3)]
    assert first == [
        16294208416658607535,
        7960286522194355700,
        487617019471545679,
    ]


def test_different_seeds_differ():
    assert SplitMix64(1).next_u64() != SplitMix64(2).next_u64()


@given(st.integers(min_value=0, max_value=2**64 - 1), st.integers(2, 1000))
def test_randint_in_range(seed, n):
    rng = SplitMix64(seed)
    for _ in range(20):
        assert 0 <= rng.randint(n) < n


@given(st.integers(min_value=0, max_value=2**64 - 1))
def test_random_unit_interval(seed):
    rng = SplitMix64(seed)
    for _ in range(20):
        assert 0.0 <= rng.random() < 1.0


@given(st.integers(min_value=0, max_value=2**64 - 1), st.integers(1, 30))
def test_shuffle_is_permutation(seed, n):
    rng = SplitMix64(seed)
    items = list(range(n))
    rng.shuffle(items)
    assert sorted(items) == list(range(n))


def test_randint_rejects_nonpositive():
    with pytest.raises(ValueError):
        SplitMix64(0).randint(0)


def test_derive_seed_stable_and_key_sensitive():
    assert derive_seed(7, 1, 2) == derive_seed(7, 1, 2)
    assert derive_seed(7, 1, 2) != derive_seed(7, 2, 1)
    assert derive_seed(7, 1) != derive_seed(8, 1)

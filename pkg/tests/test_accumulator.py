import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gramcl.accumulator import Accumulator
from gramcl.errors import (
    DimensionMismatchError,
    UndefinedPrototypeError,
    UnsupportedFormatError,
)


def random_stream(n, M, K, seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    H = rng.standard_normal((n, M))
    labels = rng.integers(0, K, size=n)
    Y = np.zeros((n, K))
    Y[np.arange(n), labels] = 1.0
    return H, Y, labels


def test_single_outer_product():
    acc = Accumulator(M=2, D=2)
    acc.update([1.0, 2.0], [1.0, 0.0])
    assert np.array_equal(acc.G, [[1.0, 2.0], [2.0, 4.0]])
    assert np.array_equal(acc.C, [[1.0, 0.0], [2.0, 0.0]])
    assert acc.N == 1
    assert list(acc.class_counts) == [1, 0]


def test_zero_vector_update():
    acc = Accumulator(M=3, D=2)
    acc.update(np.zeros(3), [0.0, 1.0])
    assert np.all(acc.G == 0) and np.all(acc.C == 0)
    assert acc.N == 1


def test_update_order_invariant():
    a = Accumulator(M=3, D=2)
    b = Accumulator(M=3, D=2)
    s1 = (np.array([1.0, 2.0, 3.0]), np.array([1.0, 0.0]))
    s2 = (np.array([-1.0, 0.5, 2.0]), np.array([0.0, 1.0]))
    a.update(*s1); a.update(*s2)
    b.update(*s2); b.update(*s1)
    assert np.array_equal(a.G, b.G)
    assert np.array_equal(a.C, b.C)


def test_dimension_checks():
    acc = Accumulator(M=3, D=2)
    with pytest.raises(DimensionMismatchError):
        acc.update(np.zeros(4), np.zeros(2))
    with pytest.raises(DimensionMismatchError):
        acc.update(np.zeros(3), np.zeros(3))
    with pytest.raises(DimensionMismatchError):
        acc.merge(Accumulator(M=4, D=2))


def test_merge_identity_and_commutativity():
    H, Y, labels = random_stream(20, 4, 3, seed=0)
    a = Accumulator(4, 3)
    a.update_batch(H, Y, labels)
    empty = Accumulator(4, 3)
    merged = a.merge(empty)
    assert np.array_equal(merged.G, a.G) and merged.N == a.N

    H2, Y2, labels2 = random_stream(15, 4, 3, seed=1)
    b = Accumulator(4, 3)
    b.update_batch(H2, Y2, labels2)
    ab, ba = a.merge(b), b.merge(a)
    assert np.array_equal(ab.G, ba.G)
    assert np.array_equal(ab.C, ba.C)
    assert np.array_equal(ab.class_counts, ba.class_counts)


def test_merge_equals_sequential():
    H, Y, labels = random_stream(100, 6, 4, seed=2)
    seq = Accumulator(6, 4)
    seq.update_batch(H, Y, labels)
    first, second = Accumulator(6, 4), Accumulator(6, 4)
    first.update_batch(H[:50], Y[:50], labels[:50])
    second.update_batch(H[50:], Y[50:], labels[50:])
    merged = first.merge(second)
    rel = np.linalg.norm(merged.G - seq.G) / np.linalg.norm(seq.G)
    assert rel < 1e-10
    rel_c = np.linalg.norm(merged.C - seq.C) / np.linalg.norm(seq.C)
    assert rel_c < 1e-10


def test_streaming_equals_batch():
    H, Y, labels = random_stream(50, 5, 3, seed=3)
    acc = Accumulator(5, 3)
    for h, y, l in zip(H, Y, labels):
        acc.update(h, y, label=int(l))
    rel = np.linalg.norm(acc.G - H.T @ H) / np.linalg.norm(H.T @ H)
    assert rel < 1e-10
    rel_c = np.linalg.norm(acc.C - H.T @ Y) / np.linalg.norm(H.T @ Y)
    assert rel_c < 1e-10


def test_class_means():
    acc = Accumulator(M=2, D=3)
    acc.update([1.0, 2.0], [1.0, 0.0, 0.0])
    acc.update([4.0, 0.0], [0.0, 1.0, 0.0])
    acc.update([4.0, 0.0], [0.0, 1.0, 0.0])
    assert np.array_equal(acc.class_mean(0), [1.0, 2.0])
    assert np.array_equal(acc.class_mean(1), [4.0, 0.0])
    with pytest.raises(UndefinedPrototypeError):
        acc.class_mean(2)


def test_snapshot_round_trip_bit_exact():
    H, Y, labels = random_stream(30, 5, 3, seed=4)
    acc = Accumulator(5, 3)
    acc.update_batch(H, Y, labels)
    restored = Accumulator.restore(acc.snapshot())
    assert restored.snapshot() == acc.snapshot()
    assert np.array_equal(restored.G, acc.G)
    assert restored.N == acc.N


def test_snapshot_empty():
    acc = Accumulator(3, 2)
    restored = Accumulator.restore(acc.snapshot())
    assert restored.N == 0 and np.all(restored.G == 0)


def test_snapshot_bad_magic():
    with pytest.raises(UnsupportedFormatError):
        Accumulator.restore(b"NOTMAGIC" + b"\x00" * 64)


def test_checkpoint_resume_matches_uninterrupted():
    # same update sequence with and without a snapshot/restore in the middle
    H, Y, labels = random_stream(60, 4, 3, seed=5)
    direct = Accumulator(4, 3)
    direct.update_batch(H[:30], Y[:30], labels[:30])
    direct.update_batch(H[30:], Y[30:], labels[30:])

    part = Accumulator(4, 3)
    part.update_batch(H[:30], Y[:30], labels[:30])
    resumed = Accumulator.restore(part.snapshot())
    resumed.update_batch(H[30:], Y[30:], labels[30:])
    assert np.array_equal(resumed.G, direct.G)
    assert np.array_equal(resumed.C, direct.C)


def test_regression_targets():
    # D != K: generic dense targets, no class-count semantics
    rng = np.random.Generator(np.random.PCG64(6))
    H = rng.standard_normal((10, 4))
    Y = rng.standard_normal((10, 7))
    acc = Accumulator(M=4, D=7, K=0)
    acc.update_batch(H, Y)
    assert np.allclose(acc.C, H.T @ Y)
    assert acc.N == 10


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10_000),
       n=st.integers(min_value=1, max_value=40))
def test_psd_preserved(seed, n):
    H, Y, labels = random_stream(n, 5, 2, seed=seed)
    acc = Accumulator(5, 2)
    for h, y in zip(H, Y):
        acc.update(h, y)
        G = acc.G
        min_eig = np.linalg.eigvalsh(G)[0]
        assert min_eig >= -1e-8 * np.trace(G) / 5


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10_000))
def test_permutation_invariance(seed):
    H, Y, labels = random_stream(30, 4, 3, seed=seed)
    rng = np.random.Generator(np.random.PCG64(seed + 1))
    perm = rng.permutation(30)
    a, b = Accumulator(4, 3), Accumulator(4, 3)
    a.update_batch(H, Y, labels)
    b.update_batch(H[perm], Y[perm], labels[perm])
    rel = np.linalg.norm(a.G - b.G) / (np.linalg.norm(a.G) + 1e-30)
    assert rel < 1e-9

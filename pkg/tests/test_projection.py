import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gramcl.errors import DimensionMismatchError, ParameterError
from gramcl.projection import (
    ProjectionMatrix,
    ProjectionSpec,
    expand_pairwise,
    generate,
    pack_bipolar,
    project,
    unpack_bipolar,
)


def test_generate_deterministic():
    spec = ProjectionSpec(L=32, M=128, seed=99)
    a = generate(spec)
    b = generate(spec)
    assert a.W.tobytes() == b.W.tobytes()


def test_bipolar_entries():
    proj = generate(ProjectionSpec(L=16, M=64, distribution="bipolar", seed=1))
    assert set(np.unique(proj.W)) == {-1.0, 1.0}


def test_gaussian_moments():
    # law of large numbers at L*M = 1e6
    proj = generate(ProjectionSpec(L=1000, M=1000, seed=5))
    assert abs(proj.W.mean()) < 0.01
    assert abs(proj.W.var() - 1.0) < 0.01


def test_invalid_spec():
    with pytest.raises(ParameterError):
        ProjectionSpec(L=0, M=4)
    with pytest.raises(ParameterError):
        ProjectionSpec(L=4, M=0)
    with pytest.raises(ParameterError):
        ProjectionSpec(L=4, M=4, activation="tanh")


def test_frozen_matrix():
    proj = generate(ProjectionSpec(L=4, M=4, seed=0))
    with pytest.raises(ValueError):
        proj.W[0, 0] = 1.0


def test_identity_matrix_identity_activation():
    spec = ProjectionSpec(L=3, M=3, activation="identity", seed=0)
    proj = ProjectionMatrix(np.eye(3), spec)
    f = np.array([1.0, -2.0, 3.0])
    assert np.array_equal(project(proj, f), f)


def test_relu_and_square():
    spec_r = ProjectionSpec(L=2, M=2, activation="relu", seed=0)
    spec_s = ProjectionSpec(L=2, M=2, activation="square", seed=0)
    W = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert np.array_equal(project(ProjectionMatrix(W, spec_r), [-1.0, 2.0]), [0.0, 2.0])
    assert np.array_equal(project(ProjectionMatrix(W, spec_s), [-3.0, 2.0]), [9.0, 4.0])


def test_dimension_mismatch():
    proj = generate(ProjectionSpec(L=4, M=8, seed=0))
    with pytest.raises(DimensionMismatchError):
        project(proj, np.zeros(5))


def test_batch_equals_single():
    proj = generate(ProjectionSpec(L=6, M=10, activation="relu", seed=2))
    rng = np.random.Generator(np.random.PCG64(3))
    F = rng.standard_normal((7, 6))
    batch = project(proj, F)
    for i in range(7):
        assert np.array_equal(batch[i], project(proj, F[i]))


def test_repeated_projection_identical():
    proj = generate(ProjectionSpec(L=8, M=16, activation="relu", seed=4))
    f = np.arange(8.0)
    assert project(proj, f).tobytes() == project(proj, f).tobytes()


@settings(max_examples=50, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=10_000),
    alpha=st.floats(min_value=-5, max_value=5, allow_nan=False),
    beta=st.floats(min_value=-5, max_value=5, allow_nan=False),
)
def test_linearity_without_activation(seed, alpha, beta):
    proj = generate(ProjectionSpec(L=5, M=9, activation="identity", seed=seed))
    rng = np.random.Generator(np.random.PCG64(seed + 1))
    f, g = rng.standard_normal(5), rng.standard_normal(5)
    lhs = project(proj, alpha * f + beta * g)
    rhs = alpha * project(proj, f) + beta * project(proj, g)
    scale = np.linalg.norm(rhs) + 1e-30
    assert np.linalg.norm(lhs - rhs) / scale < 1e-12


class TestExpandPairwise:
    def test_two_dims(self):
        out = expand_pairwise(np.array([2.0, 3.0]))
        assert np.array_equal(out, [4.0, 6.0, 9.0])  # a^2, ab, b^2

    def test_length(self):
        out = expand_pairwise(np.zeros(100))
        assert out.shape == (5050,)

    def test_zero_vector(self):
        assert np.all(expand_pairwise(np.zeros(10)) == 0)

    def test_batch(self):
        F = np.array([[1.0, 2.0], [0.0, 3.0]])
        out = expand_pairwise(F)
        assert np.array_equal(out, [[1.0, 2.0, 4.0], [0.0, 0.0, 9.0]])


def test_bipolar_pack_round_trip():
    spec = ProjectionSpec(L=7, M=9, distribution="bipolar", seed=12)
    proj = generate(spec)
    packed = pack_bipolar(proj)
    assert len(packed) == (7 * 9 + 7) // 8
    restored = unpack_bipolar(packed, spec)
    assert np.array_equal(restored.W, proj.W)


def test_pack_rejects_gaussian():
    proj = generate(ProjectionSpec(L=4, M=4, seed=0))
    with pytest.raises(ParameterError):
        pack_bipolar(proj)

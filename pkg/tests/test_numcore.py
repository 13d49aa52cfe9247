import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coindex.errors import RangeError, ShapeError, SingularError
from coindex.numcore import (
    IntMatrix,
    SubsetIndex,
    batched_solve,
    complement_sign,
    det,
    exterior_power,
    int_det,
    permutation_sign,
    sign_det,
    solve,
    subsets,
)


def test_det_examples():
    assert det(np.eye(3)) == 1.0
    assert det(np.diag([1.0, 1.0, -1.0])) == -1.0
    assert det([[2, 1], [1, 1]]) == 1.0


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 8])
def test_det_matches_numpy(n):
    rng = np.random.default_rng(n)
    for _ in range(20):
        M = rng.normal(size=(n, n))
        assert det(M) == pytest.approx(np.linalg.det(M), rel=1e-10, abs=1e-12)


def test_det_rejects_non_square():
    with pytest.raises(ShapeError):
        det(np.ones((2, 3)))


def test_sign_det_examples():
    assert sign_det(np.eye(4)) == 1
    for n in (1, 2, 3):
        D = np.eye(n)
        D[-1, -1] = -1
        assert sign_det(D) == -1
    assert sign_det([[1e-14]], 1e-8) is None


def test_sign_det_is_scale_aware():
    # a well-conditioned but small matrix is not degenerate relative to scale 1,
    # while the degeneracy band grows with the matrix norm
    assert sign_det(np.diag([1e3, 1e-6])) is None
    assert sign_det(np.diag([1.0, 1e-6])) == 1


def test_solve_examples():
    b = np.array([3.0, -1.0, 2.0])
    np.testing.assert_array_equal(solve(np.eye(3), b), b)
    np.testing.assert_allclose(solve([[2, 0], [0, 4]], [2, 4]), [1, 1])
    with pytest.raises(SingularError):
        solve(np.zeros((2, 2)), [1.0, 0.0])
    with pytest.raises(SingularError):
        solve([[1, 2], [2, 4]], [1.0, 0.0])


def test_solve_random():
    rng = np.random.default_rng(1)
    for n in range(1, 7):
        M = rng.normal(size=(n, n)) + n * np.eye(n)
        b = rng.normal(size=n)
        np.testing.assert_allclose(M @ solve(M, b), b, atol=1e-12)


def test_batched_solve_marks_singular_rows():
    Ms = np.array([np.eye(2), np.zeros((2, 2)), [[1.0, 2.0], [2.0, 4.0]]])
    bs = np.ones((3, 2))
    x, ok = batched_solve(Ms, bs)
    assert ok.tolist() == [True, False, False]
    np.testing.assert_allclose(x[0], [1, 1])


def test_int_matrix_text_round_trip():
    M = IntMatrix.from_text("2,0;-1,3")
    assert M.tolist() == [[2, 0], [-1, 3]]
    assert M.to_text() == "2,0;-1,3"
    assert M.det() == 6
    with pytest.raises(ValueError):
        IntMatrix.from_text("1,a")
    with pytest.raises(ShapeError):
        IntMatrix.from_text("1,2;3")


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 5).flatmap(lambda n: st.lists(st.integers(-9, 9), min_size=n * n, max_size=n * n)))
def test_int_det_matches_leibniz(entries):
    n = int(round(len(entries) ** 0.5))
    rows = [entries[i * n:(i + 1) * n] for i in range(n)]
    leibniz = sum(
        permutation_sign(p) * np.prod([rows[i][p[i]] for i in range(n)], dtype=object)
        for p in itertools.permutations(range(n))
    )
    assert int_det(rows) == leibniz


def test_subsets_order_and_range():
    assert [J.members for J in subsets(3, 2)] == [(1, 2), (1, 3), (2, 3)]
    assert [J.members for J in subsets(2, 0)] == [()]
    with pytest.raises(RangeError):
        subsets(2, 3)
    with pytest.raises(RangeError):
        SubsetIndex(3, (2, 1))


def test_exterior_power_examples():
    M = IntMatrix.of([[3, 1], [4, 2]])
    assert exterior_power(M, 0).tolist() == [[1]]
    assert exterior_power(M, 2).tolist() == [[M.det()]]
    two = IntMatrix.identity(2).scaled(2)
    assert exterior_power(two, 1) == two


def test_exterior_power_is_functorial():
    # Cauchy-Binet: Lambda^q(AB) = Lambda^q(A) Lambda^q(B)
    rng = np.random.default_rng(3)
    for n in (2, 3, 4):
        for _ in range(10):
            A = IntMatrix.of(rng.integers(-3, 4, (n, n)))
            B = IntMatrix.of(rng.integers(-3, 4, (n, n)))
            for q in range(n + 1):
                assert exterior_power(A @ B, q) == exterior_power(A, q) @ exterior_power(B, q)


def test_complement_sign_examples():
    assert complement_sign(SubsetIndex(2, (1,))) == 1
    assert complement_sign(SubsetIndex(2, (2,))) == -1
    # (2, 1, 3) has a single inversion
    assert complement_sign(SubsetIndex(3, (2,))) == -1
    assert complement_sign(SubsetIndex(3, ())) == 1
    assert complement_sign(SubsetIndex(3, (1, 3))) == -1

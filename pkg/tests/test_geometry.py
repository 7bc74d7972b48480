import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ncsched.geometry import (
    Polytope,
    affine_image,
    box_vertices,
    canonicalize,
    cartesian_product,
    contains,
    enumerate_vertices,
    equal,
    intersect,
    is_empty,
    minkowski_sum,
    pontryagin_diff,
    preimage,
    support,
)

UNIT = Polytope.symmetric_box([1, 1])


def test_support_of_box():
    assert support(UNIT, [1, 0]) == pytest.approx(1)
    assert support(UNIT, [1, 1]) == pytest.approx(2)


def test_support_of_simplex_matches_vertex_scan():
    P = Polytope([[1, 1], [-1, 0], [0, -1]], [1, 0, 0])
    V = enumerate_vertices(P)
    for a in ([1, 1], [2, -1], [-1, 3]):
        assert support(P, a) == pytest.approx(np.max(V @ np.asarray(a, float)))


def test_support_unbounded_direction_is_infinite():
    half = Polytope([[1.0, 0.0]], [1.0])
    assert support(half, [0, 1]) == np.inf


def test_contains_basic():
    assert contains(UNIT, UNIT)
    assert not contains(UNIT, Polytope.symmetric_box([2, 2]))
    assert contains(Polytope.symmetric_box([2, 2]), UNIT)


def test_affine_image_cases():
    assert equal(affine_image(UNIT, np.eye(2)), UNIT)
    assert equal(affine_image(UNIT, 2 * np.eye(2)), Polytope.symmetric_box([2, 2]))
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    img = affine_image(UNIT, rot)
    mapped = box_vertices([-1, -1], [1, 1]) @ rot.T
    assert equal(img, Polytope.from_vertices(mapped))


def test_affine_image_singular_map_is_flat():
    img = affine_image(UNIT, [[1.0, 0.0], [0.0, 0.0]])
    assert img.contains_point([0.5, 0.0])
    assert not img.contains_point([0.5, 0.1])


def test_minkowski_sum_cases():
    I1 = Polytope.symmetric_box([1])
    assert equal(minkowski_sum(I1, Polytope.symmetric_box([0.45])), Polytope.symmetric_box([1.45]))
    assert equal(minkowski_sum(UNIT, Polytope.point([0, 0])), UNIT)
    s = minkowski_sum(UNIT, UNIT)
    sums = np.array([a + b for a in box_vertices([-1, -1], [1, 1]) for b in box_vertices([-1, -1], [1, 1])])
    assert equal(s, Polytope.from_vertices(sums))


def test_pontryagin_diff_cases():
    I2 = Polytope.symmetric_box([2])
    assert equal(pontryagin_diff(I2, Polytope.symmetric_box([0.45])), Polytope.symmetric_box([1.55]))
    assert equal(pontryagin_diff(UNIT, Polytope.point([0, 0])), UNIT)


def test_intersection_and_emptiness():
    a = Polytope.box([0, 0], [2, 2])
    b = Polytope.box([1, 1], [3, 3])
    assert equal(intersect(a, b), Polytope.box([1, 1], [2, 2]))
    far = Polytope.box([5, 5], [6, 6])
    assert is_empty(intersect(a, far))


def test_canonicalize_drops_duplicates():
    P = Polytope(np.vstack([UNIT.A, UNIT.A, 2 * UNIT.A]), np.concatenate([UNIT.b, UNIT.b, 3 * UNIT.b]))
    C = canonicalize(P)
    assert C.n_rows == 4
    assert equal(C, UNIT)


def test_canonicalize_rows_are_irredundant():
    P = Polytope.from_vertices(np.random.default_rng(0).normal(size=(20, 2)))
    P = Polytope(np.vstack([P.A, [[1, 1]]]), np.concatenate([P.b, [100.0]]))
    C = canonicalize(P)
    for k in range(C.n_rows):
        keep = np.arange(C.n_rows) != k
        assert not contains(C, Polytope(C.A[keep], C.b[keep]))


def test_dimension_mismatch_raises():
    with pytest.raises(ValueError):
        intersect(UNIT, Polytope.symmetric_box([1]))


def test_vertices_of_empty_set():
    assert Polytope.empty(2).vertices().shape == (0, 2)
    assert Polytope.empty(2).is_empty()


def test_cartesian_product_and_preimage():
    P = cartesian_product(Polytope.symmetric_box([1]), Polytope.symmetric_box([2]))
    assert equal(P, Polytope.symmetric_box([1, 2]))
    pre = preimage(Polytope.symmetric_box([1]), [[1.0, 1.0]])
    assert pre.contains_point([0.5, 0.5]) and not pre.contains_point([1.0, 0.5])


def test_text_round_trip():
    P = Polytope.from_vertices([[0, 0], [1, 0], [0, 1]])
    assert equal(Polytope.from_text(P.to_text()), P)


def test_vertex_enumeration_box():
    V = enumerate_vertices(Polytope.box([0, -1, 2], [1, 1, 3]))
    expected = {tuple(v) for v in itertools.product([0, 1], [-1, 1], [2, 3])}
    assert {tuple(np.round(v, 9)) for v in V} == expected


boxes = st.lists(st.floats(0.1, 3.0), min_size=2, max_size=2)


@given(boxes, boxes)
def test_erosion_then_dilation_is_inside(r1, r2):
    P = Polytope.symmetric_box(np.array(r1) + np.array(r2))
    Q = Polytope.symmetric_box(r2)
    assert contains(P, minkowski_sum(pontryagin_diff(P, Q), Q))

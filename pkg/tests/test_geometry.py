import numpy as np
import pytest

from strhc.geometry import (
    TOL, Polytope, affine_image, contains, contains_points, intersect, is_empty, is_subset,
    minkowski_sum, pontryagin_diff, project, remove_redundancy, support, support_many, vertices_2d,
)
from strhc.geometry import lp
from strhc.model import example_model

from .oracles import diff_margin, disagreements, grid, poly_margin, random_shape, sum_margin

BOX = Polytope.symmetric_box([1.0, 1.0])


def same_set(P, Q, tol=1e-7):
    return is_subset(P, Q, tol) and is_subset(Q, P, tol)


# -- affine_image -----------------------------------------------------------------
def test_affine_identity():
    assert same_set(affine_image(BOX, np.eye(2)), BOX)


def test_affine_scaling():
    assert same_set(affine_image(BOX, 2 * np.eye(2)), Polytope.symmetric_box([2.0, 2.0]))


def test_affine_row_map_matches_sampled_images(rng):
    R = affine_image(BOX, [[1.0, 0.0]])
    assert R.dim == 1
    assert same_set(R, Polytope.symmetric_box([1.0]))
    pts = rng.uniform(-1, 1, (500, 2))
    assert contains_points(R, pts[:, :1]).all()
    assert not contains(R, [1.01])


def test_affine_offset_and_singular_map():
    R = affine_image(BOX, [[1.0, 1.0], [1.0, 1.0]], offset=[1.0, 0.0])
    assert contains(R, [3.0, 2.0]) and contains(R, [-1.0, -2.0])
    assert not contains(R, [1.0, 1.0])  # off the diagonal line
    with pytest.raises(ValueError):
        affine_image(BOX, np.eye(3))
    assert affine_image(Polytope.empty(2), np.eye(2)).is_empty


# -- minkowski_sum ----------------------------------------------------------------
def test_sum_of_boxes():
    R = minkowski_sum(BOX, Polytope.symmetric_box([0.5, 0.5]))
    assert same_set(R, Polytope.symmetric_box([1.5, 1.5]))


def test_sum_identity():
    assert same_set(minkowski_sum(BOX, Polytope.point([0.0, 0.0])), BOX)


def test_sum_support_additivity():
    tri = Polytope([[-1, 0], [0, -1], [1, 1]], [0, 0, 1])
    small = Polytope.symmetric_box([0.1, 0.1])
    R = minkowski_sum(tri, small)
    ang = np.linspace(0, 2 * np.pi, 16, endpoint=False)
    D = np.column_stack([np.cos(ang), np.sin(ang)])
    np.testing.assert_allclose(support_many(R, D), support_many(tri, D) + support_many(small, D), atol=1e-6)


def test_sum_dimension_mismatch():
    with pytest.raises(ValueError):
        minkowski_sum(BOX, Polytope.symmetric_box([1.0]))


# -- pontryagin_diff --------------------------------------------------------------
def test_diff_of_boxes():
    R = pontryagin_diff(Polytope.symmetric_box([2, 2]), Polytope.symmetric_box([0.5, 0.5]))
    assert same_set(R, Polytope.symmetric_box([1.5, 1.5]))


def test_diff_identity():
    assert same_set(pontryagin_diff(BOX, Polytope.point([0, 0])), BOX)


def test_diff_state_box_by_disturbance_image():
    m = example_model()
    R = pontryagin_diff(m.X, affine_image(m.Dx, m.Bd))
    assert same_set(R, Polytope.symmetric_box([2.499, 9.999]), 1e-9)


def test_diff_infeasible_is_canonical_empty():
    R = pontryagin_diff(BOX, Polytope.symmetric_box([2.0, 0.1]))
    assert R.is_empty and is_empty(R)
    assert R.n_constraints == 2


def test_diff_then_sum_is_inside(rng):
    for _ in range(20):
        P, _ = random_shape(rng)
        Q, _ = random_shape(rng, 0.2)
        D = pontryagin_diff(P, Q)
        if D.is_empty:
            continue
        assert is_subset(minkowski_sum(D, Q), P, 1e-6)


# -- intersect --------------------------------------------------------------------
def test_intersect_cases():
    assert same_set(intersect(BOX, Polytope.box([0, 0], [2, 2])), Polytope.box([0, 0], [1, 1]))
    assert same_set(intersect(BOX, BOX), BOX)
    assert intersect(BOX, Polytope.box([2, 2], [3, 3])).is_empty


# -- project ----------------------------------------------------------------------
def test_project_cube():
    assert same_set(project(Polytope.symmetric_box([1, 1, 1]), [0, 1]), BOX)


def _xi():
    # |x| <= 1, |u| <= 1, -0.5 <= x + u <= 0.5
    return Polytope([[1, 0], [-1, 0], [0, 1], [0, -1], [1, 1], [-1, -1]], [1, 1, 1, 1, 0.5, 0.5])


@pytest.mark.parametrize("keep", [[0], [1]])
def test_project_against_lp_oracle(keep):
    Xi = _xi()
    R = project(Xi, keep)
    other = 1 - keep[0]
    for s in np.linspace(-1.5, 1.5, 61):
        # LP feasibility in the eliminated coordinate
        row = Xi.A[:, keep[0]] * s
        res = lp.maximize(np.zeros(1), Xi.A[:, [other]], Xi.b - row)
        assert contains(R, [s]) == (res.status == lp.OPTIMAL)
    assert same_set(R, Polytope.symmetric_box([1.0]))


def test_project_idempotent_and_identity(rng):
    P, _ = random_shape(rng)
    assert same_set(project(P, [0, 1]), P)
    once = project(Polytope.symmetric_box([1, 2, 3]), [0, 2])
    assert same_set(project(once, [0, 1]), once)
    assert project(Polytope.empty(3), [0]).is_empty


# -- membership, emptiness, redundancy, support -------------------------------------
def test_contains_boundary_convention():
    assert contains(BOX, [0, 0])
    assert not contains(BOX, [1 + 2 * TOL, 0])
    assert contains(BOX, [1, 0], 1e-7)


def test_contains_matches_grid_oracle(rng):
    P, _ = random_shape(rng)
    Z = grid([-2.5, -2.5], [2.5, 2.5], 100)
    m = poly_margin(P, Z)
    got = contains_points(P, Z, 1e-9)
    clear = np.abs(m) > 1e-6
    assert np.array_equal(got[clear], m[clear] > 0)


def test_empty_and_redundancy_and_support():
    assert Polytope([[1.0], [-1.0]], [0.0, -1.0]).is_empty
    dup = Polytope(np.vstack([BOX.A, BOX.A]), np.concatenate([BOX.b, BOX.b]))
    assert remove_redundancy(dup).n_constraints == 4
    loose = Polytope(np.vstack([BOX.A, [[1, 1]]]), np.concatenate([BOX.b, [5.0]]))
    assert remove_redundancy(loose).n_constraints == 4
    assert support(BOX, [1, 0]) == pytest.approx(1.0)


def test_redundancy_removal_preserves_membership(rng):
    P = Polytope(rng.normal(size=(30, 2)), np.ones(30))
    R = remove_redundancy(P)
    Z = rng.uniform(-3, 3, (2000, 2))
    assert np.array_equal(contains_points(P, Z), contains_points(R, Z))
    assert R.n_constraints <= P.n_constraints


def test_serialization_round_trip():
    P = Polytope([[1, 2], [-1, 0], [0, -1]], [1, 0, 0])
    d = P.to_dict()
    assert d["dim"] == 2 and len(d["rows"]) == 3
    Q = Polytope.from_dict(d)
    np.testing.assert_allclose(Q.A, P.A, atol=1e-15)
    np.testing.assert_allclose(Q.b, P.b, atol=1e-15)
    norms = np.linalg.norm(Q.A, axis=1)
    assert np.all(np.abs(norms - 1) < 1e-9)


def test_lp_backend_is_pluggable():
    calls = []

    def spy(c, A, b):
        calls.append(1)
        return lp._highs_maximize(c, A, b)

    tri = Polytope([[-1, 0], [0, -1], [1, 1]], [0, 0, 1])
    lp.set_backend(spy)
    try:
        assert support(tri, [0, 1]) == pytest.approx(1.0)
    finally:
        lp.set_backend(None)
    assert calls


def test_vertices_2d_of_box():
    V = vertices_2d(BOX)
    assert len(V) == 4
    assert np.allclose(np.sort(np.abs(V).ravel()), 1.0)


# -- small-sample version of the oracle comparison -------------------------------------
def test_operations_against_vertex_oracle(rng):
    for _ in range(10):
        P, VP = random_shape(rng)
        Q, VQ = random_shape(rng, 0.3)
        Z = grid([-3, -3], [3, 3], 60)
        S = minkowski_sum(P, Q)
        assert disagreements(poly_margin(S, Z), sum_margin(VP, VQ, Z)) == 0
        D = pontryagin_diff(P, Q)
        assert disagreements(poly_margin(D, Z) if not D.is_empty else -np.ones(len(Z)), diff_margin(VP, VQ, Z)) == 0

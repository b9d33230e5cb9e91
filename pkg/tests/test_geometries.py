import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ramopt.manifolds import (
    BaseMismatchError,
    FixedRankPoint,
    FixedRankVector,
    GeometryError,
    Tangent,
    UnsupportedOperation,
    euclidean_geometry,
    fixedrank_geometry,
    oblique_geometry,
    spd_geometry,
    sphere_geometry,
    stiefel_geometry,
)

E1, E2, E3 = np.eye(3)
SQ2 = 1 / math.sqrt(2)

GEOMETRIES = {
    "sphere": lambda: sphere_geometry(5),
    "oblique": lambda: oblique_geometry(6, 3),
    "stiefel": lambda: stiefel_geometry(6, 3),
    "spd": lambda: spd_geometry(4),
    "fixedrank": lambda: fixedrank_geometry(7, 6, 2),
    "euclidean": lambda: euclidean_geometry(3, 2),
}


def _ambient(geom, u):
    return np.asarray(geom.to_ambient(u))


@pytest.fixture(params=sorted(GEOMETRIES))
def geom(request):
    return GEOMETRIES[request.param]()


# --- sphere: the API examples ----------------------------------------------------------


def test_sphere_inner_examples():
    S = sphere_geometry(3)
    x = E1.copy()
    assert S.inner(x, Tangent(x, E2), Tangent(x, E2)) == 1.0
    assert S.inner(x, Tangent(x, E2), Tangent(x, E3)) == 0.0
    assert S.inner(x, Tangent(x, 2 * E2), Tangent(x, 3 * E2)) == 6.0


def test_inner_rejects_foreign_base():
    S = sphere_geometry(3)
    x, y = E1.copy(), E2.copy()
    with pytest.raises(BaseMismatchError):
        S.inner(x, Tangent(x, E2), Tangent(y, E3))
    with pytest.raises(BaseMismatchError):
        Tangent(x, E2) + Tangent(y, E1)


def test_sphere_proj_examples():
    S = sphere_geometry(3)
    x = E1.copy()
    np.testing.assert_array_equal(S.proj(x, E2).vec, E2)
    np.testing.assert_array_equal(S.proj(x, E1).vec, np.zeros(3))
    np.testing.assert_array_equal(S.proj(x, [2.0, 3.0, 0.0]).vec, [0.0, 3.0, 0.0])


def test_sphere_retract_examples():
    S = sphere_geometry(3)
    x = E1.copy()
    np.testing.assert_array_equal(S.retract(x, S.zero(x)), x)
    y = S.retract(x, Tangent(x, E2))
    np.testing.assert_allclose(y, [SQ2, SQ2, 0.0], rtol=1e-15)
    assert S.dist(x, y) == pytest.approx(math.pi / 4, abs=1e-15)


def test_sphere_transport_examples():
    S = sphere_geometry(3)
    x = E1.copy()
    u = Tangent(x, E2)
    np.testing.assert_array_equal(S.transport(x, S.zero(x), u).vec, E2)
    # a tangent step of length tan(pi/2) is not available, so pin the target directly
    y = E2.copy()
    d = Tangent(x, 1e8 * E2)
    np.testing.assert_array_equal(S.transport(x, d, Tangent(x, E3), y=y).vec, E3)
    np.testing.assert_array_equal(S.transport(x, d, Tangent(x, E2), y=y).vec, np.zeros(3))
    assert S.transport(x, d, u, y=y).base is y


def test_sphere_parallel_transport_examples():
    S = sphere_geometry(3)
    x, y = E1.copy(), E2.copy()
    np.testing.assert_allclose(S.parallel_transport(x, y, Tangent(x, E2)).vec, -E1, atol=1e-15)
    np.testing.assert_allclose(S.parallel_transport(x, y, Tangent(x, E3)).vec, E3, atol=1e-15)
    with pytest.raises(GeometryError):
        S.parallel_transport(x, -x, Tangent(x, E2))


def test_egrad2rgrad_examples():
    S = sphere_geometry(3)
    x = E1.copy()
    np.testing.assert_array_equal(S.egrad2rgrad(x, [5.0, 1.0, 0.0]).vec, E2)
    P = spd_geometry(2)
    g = np.array([[1.0, 2.0], [2.0, -3.0]])
    np.testing.assert_array_equal(P.egrad2rgrad(np.eye(2), g).vec, g)
    St = stiefel_geometry(2, 1)
    np.testing.assert_array_equal(St.egrad2rgrad(np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]])).vec, [[0.0], [1.0]])


def test_dist_examples():
    S = sphere_geometry(3)
    assert S.dist(E1, E2) == pytest.approx(math.pi / 2, abs=1e-15)
    assert S.dist(E1, E1) == 0.0
    P = spd_geometry(2)
    assert P.dist(np.eye(2), np.diag([math.e**2, 1.0])) == pytest.approx(2.0, rel=1e-14)
    assert P.dist(np.diag([2.0, 3.0]), np.diag([2.0, 3.0])) == pytest.approx(0.0, abs=1e-14)


def test_dist_unsupported_geometries():
    St = stiefel_geometry(3, 2)
    x = St.random_point(np.random.default_rng(0))
    with pytest.raises(UnsupportedOperation):
        St.dist(x, x)
    with pytest.raises(UnsupportedOperation):
        St.parallel_transport(x, x, St.zero(x))


def test_sphere_dist_triangle_and_symmetry():
    S = sphere_geometry(4)
    rng = np.random.default_rng(1)
    for _ in range(200):
        x, y, z = (S.random_point(rng) for _ in range(3))
        assert S.dist(x, y) == pytest.approx(S.dist(y, x), abs=1e-14)
        assert S.dist(x, z) <= S.dist(x, y) + S.dist(y, z) + 1e-12


# --- per-geometry examples --------------------------------------------------------------


def test_oblique_reduces_to_sphere_per_column():
    O = oblique_geometry(1, 2)
    x = np.array([[1.0], [0.0]])
    y = O.retract(x, Tangent(x, np.array([[0.0], [1.0]])))
    np.testing.assert_allclose(y, [[SQ2], [SQ2]], rtol=1e-15)
    O3 = oblique_geometry(2, 3)
    X = np.column_stack([E1, E1])
    Y = np.column_stack([E2, E1])
    np.testing.assert_allclose(O3.col_dists(X, Y), [math.pi / 2, 0.0], atol=1e-15)
    d = O3.proj(X, np.ones((3, 2)))
    np.testing.assert_array_equal(O3.transport(X, d, O3.zero(X)).vec, np.zeros((3, 2)))


def test_stiefel_examples():
    St = stiefel_geometry(2, 1)
    e1 = np.array([[1.0], [0.0]])
    np.testing.assert_allclose(St.retract(e1, Tangent(e1, np.array([[0.0], [1.0]]))), [[SQ2], [SQ2]], rtol=1e-15)
    np.testing.assert_array_equal(St.proj(e1, np.array([[3.0], [4.0]])).vec, [[0.0], [4.0]])
    St4 = stiefel_geometry(4, 2)
    X = St4.random_point(np.random.default_rng(2))
    np.testing.assert_array_equal(St4.retract(X, St4.zero(X)), X)


def test_stiefel_rank_deficient_retraction_errors():
    St = stiefel_geometry(2, 1)
    e1 = np.array([[1.0], [0.0]])
    with pytest.raises(GeometryError):
        St.retract(e1, Tangent(e1, -e1))


def test_stiefel_feasibility_for_long_steps():
    St = stiefel_geometry(10, 4)
    rng = np.random.default_rng(3)
    for _ in range(20):
        X = St.random_point(rng)
        v = St.random_tangent(X, rng)
        for t in (0.1, 1.0, 10.0):
            assert St.feasibility_error(St.retract(X, t * v)) <= 1e-12


def test_spd_examples():
    P = spd_geometry(2)
    I = np.eye(2)
    np.testing.assert_allclose(P.exp(I, Tangent(I, np.diag([1.0, 0.0]))), np.diag([math.e, 1.0]), rtol=1e-14)
    P1 = spd_geometry(1)
    x, y = np.array([[1.0]]), np.array([[4.0]])
    u = P1.parallel_transport(x, y, Tangent(x, np.array([[1.0]])))
    np.testing.assert_allclose(u.vec, [[4.0]], rtol=1e-14)
    assert P1.inner(y, u, u) == pytest.approx(1.0, rel=1e-14)


def test_spd_exp_log_round_trip():
    P = spd_geometry(4)
    rng = np.random.default_rng(4)
    for _ in range(100):
        X = P.random_point(rng)
        v = P.random_tangent(X, rng) * rng.uniform(0.0, 2.0)
        Y = P.exp(X, v)
        assert P.dist(X, Y) <= 2.0 + 1e-9
        back = P.exp(X, P.log(X, Y))
        assert np.linalg.norm(back - Y) <= 1e-8 * np.linalg.norm(Y)


def test_spd_rejects_indefinite_point():
    P = spd_geometry(2)
    assert not P.check_point(np.diag([1.0, -1.0]))
    assert P.feasibility_error(np.diag([1.0, -1.0])) == math.inf


def test_fixedrank_examples():
    F = fixedrank_geometry(2, 2, 1)
    X = FixedRankPoint(np.array([[1.0], [0.0]]), np.array([1.0]), np.array([[1.0], [0.0]]))
    xi = F.proj(X, np.array([[0.0, 0.0], [1.0, 0.0]]))
    Y = F.retract(X, xi)
    np.testing.assert_allclose(Y.full(), [[1.0, 0.0], [1.0, 0.0]], atol=1e-15)
    assert Y.s[0] == pytest.approx(math.sqrt(2), rel=1e-15)
    t = F.proj(X, X.full()).vec
    np.testing.assert_allclose(t.M, np.diag(X.s))
    np.testing.assert_array_equal(t.Up, 0.0)
    np.testing.assert_array_equal(t.Vp, 0.0)
    np.testing.assert_allclose(F.retract(X, F.zero(X)).full(), X.full(), atol=1e-15)


def test_fixedrank_ambiguous_truncation_errors():
    F = fixedrank_geometry(2, 2, 1)
    X = FixedRankPoint(np.array([[1.0], [0.0]]), np.array([1.0]), np.array([[1.0], [0.0]]))
    # X + xi = [[0, 1], [1, 0]] has two equal singular values
    xi = Tangent(X, FixedRankVector(np.array([[-1.0]]), np.array([[0.0], [1.0]]), np.array([[0.0], [1.0]])))
    np.testing.assert_array_equal(X.full() + F.to_ambient(xi), [[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(GeometryError):
        F.retract(X, xi)


def test_fixedrank_retraction_keeps_rank_exactly():
    F = fixedrank_geometry(9, 7, 3)
    rng = np.random.default_rng(5)
    for _ in range(50):
        X = F.random_point(rng)
        Y = F.retract(X, F.random_tangent(X, rng) * rng.uniform(0.01, 1.0))
        assert Y.s.shape == (3,) and np.all(Y.s > 0)
        assert np.linalg.matrix_rank(Y.full()) == 3
        assert F.feasibility_error(Y) <= 1e-12


def test_fixedrank_factored_retraction_matches_dense_truncation():
    F = fixedrank_geometry(12, 10, 2)
    rng = np.random.default_rng(6)
    X = F.random_point(rng)
    v = F.random_tangent(X, rng) * 0.3
    U, s, Vt = np.linalg.svd(X.full() + F.to_ambient(v))
    best = (U[:, :2] * s[:2]) @ Vt[:2]
    np.testing.assert_allclose(F.retract(X, v).full(), best, atol=1e-12)


# --- invariants across every geometry ------------------------------------------------------


def test_retract_zero_is_identity(geom):
    rng = np.random.default_rng(7)
    x = geom.random_point(rng)
    y = geom.retract(x, geom.zero(x))
    np.testing.assert_array_equal(geom.ambient_point(y), geom.ambient_point(x))


def test_proj_idempotent_and_self_adjoint(geom):
    rng = np.random.default_rng(8)
    x = geom.random_point(rng)
    shape = np.shape(geom.ambient_point(x))
    for _ in range(10):
        a = rng.standard_normal(shape)
        b = rng.standard_normal(shape)
        pa = geom.proj(x, a)
        pb = geom.proj(x, b)
        twice = geom.proj(x, _ambient(geom, pa))
        assert np.linalg.norm(_ambient(geom, twice) - _ambient(geom, pa)) <= 1e-12 * np.linalg.norm(a)
        # projection is orthogonal for the ambient trace pairing on every geometry here
        lhs = np.vdot(_ambient(geom, pa), b)
        rhs = np.vdot(a, _ambient(geom, pb))
        assert abs(lhs - rhs) <= 1e-12 * np.linalg.norm(a) * np.linalg.norm(b)


def test_egrad2rgrad_defining_property(geom):
    rng = np.random.default_rng(9)
    x = geom.random_point(rng)
    g = rng.standard_normal(np.shape(geom.ambient_point(x)))
    if geom.name.startswith("spd"):
        g = 0.5 * (g + g.T)
    rg = geom.egrad2rgrad(x, g)
    for _ in range(20):
        w = geom.random_tangent(x, rng)
        assert abs(geom.inner(x, rg, w) - np.vdot(g, _ambient(geom, w))) <= 1e-10 * np.linalg.norm(g)


def test_transport_is_linear_and_tangent(geom):
    rng = np.random.default_rng(10)
    x = geom.random_point(rng)
    d = geom.random_tangent(x, rng) * 0.5
    y = geom.retract(x, d)
    for _ in range(10):
        u, w = geom.random_tangent(x, rng), geom.random_tangent(x, rng)
        a, b = rng.standard_normal(2)
        lhs = geom.transport(x, d, a * u + b * w, y=y)
        rhs = a * geom.transport(x, d, u, y=y) + b * geom.transport(x, d, w, y=y)
        assert geom.norm(y, lhs - rhs) <= 1e-12 * (abs(a) + abs(b))
        reproj = geom.proj(y, _ambient(geom, lhs))
        assert np.linalg.norm(_ambient(geom, reproj) - _ambient(geom, lhs)) <= 1e-10 * geom.norm(y, lhs)
        # bounded by the input norm (projection or isometry)
        assert geom.norm(y, geom.transport(x, d, u, y=y)) <= (1 + 1e-10) * geom.norm(x, u)


def test_transport_along_zero_is_identity(geom):
    rng = np.random.default_rng(11)
    x = geom.random_point(rng)
    u = geom.random_tangent(x, rng)
    t = geom.transport(x, geom.zero(x), u)
    np.testing.assert_allclose(_ambient(geom, t), _ambient(geom, u), atol=1e-13)


@pytest.mark.parametrize("make", [lambda: sphere_geometry(4), lambda: oblique_geometry(3, 4), lambda: spd_geometry(3)])
def test_parallel_transport_isometry_on_many_triples(make):
    geom = make()
    rng = np.random.default_rng(12)
    worst = 0.0
    for _ in range(1000):
        x = geom.random_point(rng)
        y = geom.retract(x, geom.random_tangent(x, rng) * rng.uniform(0.0, 1.5))
        u = geom.random_tangent(x, rng) * rng.uniform(0.1, 10.0)
        pu = geom.parallel_transport(x, y, u)
        worst = max(worst, abs(geom.norm(y, pu) - geom.norm(x, u)) / geom.norm(x, u))
    assert worst <= 1e-10


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**32 - 1), st.floats(0.0, 20.0))
def test_sphere_retraction_distance_is_arctan(d, seed, scale):
    S = sphere_geometry(d)
    rng = np.random.default_rng(seed)
    x = S.random_point(rng)
    v = S.random_tangent(x, rng) * scale
    assert abs(S.dist(x, S.retract(x, v)) - math.atan(scale)) <= 1e-12


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_tangent_arithmetic_stays_at_base(seed):
    geom = oblique_geometry(4, 3)
    rng = np.random.default_rng(seed)
    x = geom.random_point(rng)
    u, w = geom.random_tangent(x, rng), geom.random_tangent(x, rng)
    for v in (u + w, u - w, -u, 2.0 * u, u * 3.0, u / 2.0, np.float64(2.0) * u):
        assert v.base is x

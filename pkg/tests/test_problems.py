import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pdegreedy import problems
from pdegreedy.kernels import MaternKernel, Operator
from pdegreedy.problems import (
    Geometry,
    builtin_problems,
    default_counts,
    generate_candidates,
    get_problem,
    predicted_exponent,
    problem_from_config,
)


def test_builtin_catalog():
    assert set(builtin_problems()) == {"poisson_1d", "poisson_2d", "interp_1d", "interp_2d"}
    with pytest.raises(ValueError, match="unknown problem"):
        get_problem("heat_3d")


def test_poisson_data_examples():
    p2 = get_problem("poisson_2d")
    assert p2.pieces[0].data_fn(np.array([[0.5, 0.5]]))[0] == pytest.approx(2 * math.pi**2, rel=1e-14)
    edge = problems._square_boundary(np.linspace(0, 4, 37, endpoint=False))
    assert np.max(np.abs(p2.pieces[1].data_fn(edge))) < 1e-15
    p1 = get_problem("poisson_1d")
    assert p1.pieces[0].data_fn(np.array([[0.5]]))[0] == pytest.approx(math.pi**2, rel=1e-14)


@pytest.mark.parametrize("name", ["poisson_1d", "poisson_2d", "interp_1d", "interp_2d"])
def test_manufactured_consistency(name):
    # independent check: sympy applies each operator to a symbolic copy of u*
    import sympy as sp

    spec = get_problem(name)
    x, y = sp.symbols("x y")
    exact = {
        "poisson_1d": sp.sin(sp.pi * x),
        "poisson_2d": sp.sin(sp.pi * x) * sp.sin(sp.pi * y),
        "interp_1d": sp.sin(sp.pi * x) + x,
        "interp_2d": sp.sin(sp.pi * x) * sp.sin(sp.pi * y) + x,
    }[name]
    syms = (x,) if spec.dim == 1 else (x, y)
    rng = np.random.default_rng(1)
    for piece in spec.pieces:
        expr = exact if piece.op is Operator.IDENTITY else -sum(sp.diff(exact, s, 2) for s in syms)
        f = sp.lambdify(syms, expr, "numpy")
        pts = problems.sample_piece(piece, 100, rng)
        want = np.broadcast_to(f(*pts.T), len(pts))
        assert np.max(np.abs(piece.data_fn(pts) - want)) <= 1e-10
        assert np.all(piece.contains(pts))


def test_interval_candidates():
    spec = get_problem("poisson_1d")
    pts = problems.piece_points(spec.pieces[0], 3, np.random.default_rng(7))
    assert pts.shape == (3, 1)
    assert np.all((pts > 0) & (pts < 1))
    assert len(np.unique(pts)) == 3


def test_square_boundary_eight_points():
    spec = get_problem("poisson_2d")
    pts = problems.piece_points(spec.pieces[1], 8, np.random.default_rng(0))
    assert len(np.unique(pts, axis=0)) == 8
    assert np.all(spec.pieces[1].contains(pts))
    edges = [pts[:, 1] == 0, pts[:, 0] == 1, pts[:, 1] == 1, pts[:, 0] == 0]
    assert all(e.any() for e in edges)


@given(seed=st.integers(0, 2**64 - 1), n=st.integers(1, 300))
def test_candidates_deterministic(seed, n):
    spec = get_problem("poisson_2d")
    a = generate_candidates(spec, [n, 12], seed)
    b = generate_candidates(spec, [n, 12], seed)
    assert a.points.tobytes() == b.points.tobytes()
    assert np.array_equal(a.ops, b.ops)
    inner = a.points[a.domains == 0]
    assert len(np.unique(inner, axis=0)) == n


def test_candidate_layout():
    spec = get_problem("poisson_2d")
    cs = generate_candidates(spec, [50, 16], seed=0)
    assert cs.counts() == {0: 50, 1: 16}
    assert np.all(cs.ops[:50] == int(Operator.NEG_LAPLACIAN))
    assert np.all(cs.ops[50:] == int(Operator.IDENTITY))
    assert np.allclose(cs.values[50:], 0.0, atol=1e-15)
    assert default_counts(spec, 2500) == [2500, 200]
    with pytest.raises(ValueError):
        generate_candidates(get_problem("poisson_1d"), [10, 3])


def test_predicted_exponent_examples():
    k52 = MaternKernel("5/2", 1.0)
    p = predicted_exponent(get_problem("poisson_2d"), k52, 1.0)
    assert p.tau == 3.5
    assert p.piece_exponents == pytest.approx((0.75, 3.5))
    assert (p.m_bar, p.d_bar) == (2.0, 2)
    assert p.predicted_exponent == pytest.approx(-0.75)
    assert p.pn_exponent == pytest.approx(-0.25)
    assert p.trace_piece_exponents == pytest.approx((0.75, 3.0))
    q = predicted_exponent(get_problem("interp_1d"), k52, 0.0)
    assert q.predicted_exponent == pytest.approx(-2.5)


@given(
    name=st.sampled_from(sorted(builtin_problems())),
    nu=st.sampled_from(["5/2", "7/2", "9/2"]),
    b1=st.floats(0, 1), b2=st.floats(0, 1),
)
def test_predicted_exponent_monotone_in_beta(name, nu, b1, b2):
    spec, k = get_problem(name), MaternKernel(nu)
    e1 = predicted_exponent(spec, k, b1).predicted_exponent
    e2 = predicted_exponent(spec, k, b2).predicted_exponent
    assert e2 - e1 == pytest.approx(-(b2 - b1) / 2, abs=1e-12)
    assert e1 < 0


def test_validate_rejects_rough_kernel():
    with pytest.raises(ValueError):
        get_problem("poisson_1d").validate(MaternKernel("3/2"))
    get_problem("interp_1d").validate(MaternKernel("3/2"))


def test_inline_problem_derives_data():
    cfg = {"name": "quad", "dim": 2, "solution": "x**2 + y*exp(x)",
           "pieces": [{"geometry": "square_interior", "op": "neg_laplacian"},
                      {"geometry": "square_boundary", "op": "identity"}]}
    spec = problem_from_config(cfg)
    pts = np.array([[0.3, 0.4]])
    assert spec.pieces[0].data_fn(pts)[0] == pytest.approx(-(2 + 0.4 * math.exp(0.3)), rel=1e-14)
    assert spec.pieces[1].trace_order == 0.5
    assert spec.pieces[1].geometry is Geometry.SQUARE_BOUNDARY


def test_inline_problem_rejects_bad_input():
    base = {"dim": 1, "solution": "sin(pi*x)", "pieces": [{"geometry": "interval", "op": "neg_laplacian"}]}
    with pytest.raises(ValueError):
        problem_from_config({**base, "solution": "__import__('os')"})
    with pytest.raises(ValueError):
        problem_from_config({**base, "pieces": [{"geometry": "interval", "op": "neg_laplacian", "data": "x"}]})


def test_test_grid_sizes():
    assert problems.test_grid(get_problem("poisson_1d")).shape == (2001, 1)
    assert problems.test_grid(get_problem("poisson_2d")).shape == (201 * 201, 2)
    assert problems.test_grid(get_problem("poisson_2d"), 11).shape == (121, 2)

"""Manufactured generalized-interpolation problems and rate predictions."""

from __future__ import annotations

import ast
import enum
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy.stats import qmc

from .functionals import CandidateSet
from .kernels import MaternKernel, Operator

__all__ = [
    "Geometry",
    "DomainPiece",
    "ProblemSpec",
    "RatePrediction",
    "builtin_problems",
    "get_problem",
    "problem_from_config",
    "generate_candidates",
    "predicted_exponent",
    "test_grid",
    "default_counts",
    "check_consistency",
    "sample_piece",
]

Field = Callable[[np.ndarray], np.ndarray]


class Geometry(str, enum.Enum):
    INTERVAL = "interval"
    INTERVAL_ENDPOINTS = "interval_endpoints"
    SQUARE_INTERIOR = "square_interior"
    SQUARE_BOUNDARY = "square_boundary"

    @property
    def ambient_dim(self) -> int:
        return 1 if self in (Geometry.INTERVAL, Geometry.INTERVAL_ENDPOINTS) else 2

    @property
    def intrinsic_dim(self) -> int:
        # endpoints would be 0-dimensional; they never attain the minimum, so 1 is used
        return 2 if self is Geometry.SQUARE_INTERIOR else 1


@dataclass(frozen=True)
class DomainPiece:
    """One ``(X_i, L_i, f_i)`` triple.

    ``trace_order`` is the Sobolev order the operator has in trace theory when
    it differs from the pointwise order (1/2 for Dirichlet data).
    """

    geometry: Geometry
    op: Operator
    data_fn: Field = field(compare=False)
    bounds: tuple[float, float] = (0.0, 1.0)
    trace_order: float | None = None
    data_expr: str | None = None

    @property
    def intrinsic_dim(self) -> int:
        return self.geometry.intrinsic_dim

    @property
    def order(self) -> int:
        return self.op.order

    def contains(self, pts: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        a, b = self.bounds
        if self.geometry is Geometry.INTERVAL:
            return (pts[:, 0] > a) & (pts[:, 0] < b)
        if self.geometry is Geometry.INTERVAL_ENDPOINTS:
            return (np.abs(pts[:, 0] - a) < tol) | (np.abs(pts[:, 0] - b) < tol)
        inside = np.all((pts > 0) & (pts < 1), axis=1)
        if self.geometry is Geometry.SQUARE_INTERIOR:
            return inside
        in_box = np.all((pts >= -tol) & (pts <= 1 + tol), axis=1)
        on_edge = np.any((np.abs(pts) < tol) | (np.abs(pts - 1) < tol), axis=1)
        return in_box & on_edge


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    dim: int
    pieces: tuple[DomainPiece, ...]
    exact_solution: Field = field(compare=False)
    test_resolution: int = 0
    solution_expr: str | None = None

    def __post_init__(self):
        if not self.pieces:
            raise ValueError("a problem needs at least one domain piece")
        for p in self.pieces:
            if p.geometry.ambient_dim != self.dim:
                raise ValueError(f"piece geometry {p.geometry.value} does not live in dimension {self.dim}")
        if self.test_resolution <= 0:
            object.__setattr__(self, "test_resolution", 2001 if self.dim == 1 else 201)

    @property
    def n_pieces(self) -> int:
        return len(self.pieces)

    def validate(self, kernel: MaternKernel) -> None:
        """Reject kernels whose native space is too rough for some operator."""
        tau = kernel.sobolev_order(self.dim)
        for i, p in enumerate(self.pieces):
            if not tau > p.order + p.intrinsic_dim / 2:
                raise ValueError(
                    f"tau={tau} must exceed m_i + d_i/2 = {p.order + p.intrinsic_dim / 2} on piece {i}"
                )
            if p.op is Operator.NEG_LAPLACIAN and kernel.nu < 2.5:
                raise ValueError(f"nu={kernel.nu} is too rough for Laplacian collocation")

    def describe(self) -> dict:
        return {
            "name": self.name,
            "dim": self.dim,
            "solution": self.solution_expr,
            "pieces": [
                {
                    "geometry": p.geometry.value,
                    "op": p.op.label,
                    "bounds": list(p.bounds),
                    "intrinsic_dim": p.intrinsic_dim,
                    "order": p.order,
                    "trace_order": p.trace_order,
                    "data": p.data_expr,
                }
                for p in self.pieces
            ],
            "test_resolution": self.test_resolution,
        }


# -- built-in catalog --------------------------------------------------------

_PI = math.pi


def _poisson_1d() -> ProblemSpec:
    return ProblemSpec(
        "poisson_1d",
        1,
        (
            DomainPiece(Geometry.INTERVAL, Operator.NEG_LAPLACIAN,
                        lambda p: _PI**2 * np.sin(_PI * p[:, 0]), data_expr="pi*pi*sin(pi*x)"),
            DomainPiece(Geometry.INTERVAL_ENDPOINTS, Operator.IDENTITY,
                        lambda p: np.sin(_PI * p[:, 0]), trace_order=0.5, data_expr="sin(pi*x)"),
        ),
        lambda p: np.sin(_PI * p[:, 0]),
        solution_expr="sin(pi*x)",
    )


def _poisson_2d() -> ProblemSpec:
    def u(p):
        return np.sin(_PI * p[:, 0]) * np.sin(_PI * p[:, 1])

    return ProblemSpec(
        "poisson_2d",
        2,
        (
            DomainPiece(Geometry.SQUARE_INTERIOR, Operator.NEG_LAPLACIAN,
                        lambda p: 2 * _PI**2 * u(p), data_expr="2*pi*pi*sin(pi*x)*sin(pi*y)"),
            DomainPiece(Geometry.SQUARE_BOUNDARY, Operator.IDENTITY, u, trace_order=0.5,
                        data_expr="sin(pi*x)*sin(pi*y)"),
        ),
        u,
        solution_expr="sin(pi*x)*sin(pi*y)",
    )


def _interp_1d() -> ProblemSpec:
    def u(p):
        return np.sin(_PI * p[:, 0]) + p[:, 0]

    return ProblemSpec(
        "interp_1d", 1,
        (DomainPiece(Geometry.INTERVAL, Operator.IDENTITY, u, data_expr="sin(pi*x)+x"),),
        u, solution_expr="sin(pi*x)+x",
    )


def _interp_2d() -> ProblemSpec:
    def u(p):
        return np.sin(_PI * p[:, 0]) * np.sin(_PI * p[:, 1]) + p[:, 0]

    return ProblemSpec(
        "interp_2d", 2,
        (DomainPiece(Geometry.SQUARE_INTERIOR, Operator.IDENTITY, u, data_expr="sin(pi*x)*sin(pi*y)+x"),),
        u, solution_expr="sin(pi*x)*sin(pi*y)+x",
    )


_BUILTINS = {
    "poisson_1d": _poisson_1d,
    "poisson_2d": _poisson_2d,
    "interp_1d": _interp_1d,
    "interp_2d": _interp_2d,
}


def builtin_problems() -> dict[str, ProblemSpec]:
    """Catalog of built-in manufactured problems, keyed by name."""
    return {name: make() for name, make in _BUILTINS.items()}


def get_problem(name: str) -> ProblemSpec:
    try:
        return _BUILTINS[name]()
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; known: {sorted(_BUILTINS)}") from None


# -- inline problems from expression strings --------------------------------

_ALLOWED_FUNCS = {"sin", "cos", "exp"}
_ALLOWED_NAMES = {"x", "y", "pi"}
_ALLOWED_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)


def _check_expression(text: str, dim: int) -> None:
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse expression {text!r}: {exc.msg}") from None
    names = _ALLOWED_NAMES if dim == 2 else {"x", "pi"}
    for node in ast.walk(tree):
        if isinstance(node, (ast.Expression, ast.Load)) or isinstance(node, _ALLOWED_BINOPS):
            continue
        if isinstance(node, ast.BinOp) and isinstance(node.op, _ALLOWED_BINOPS):
            continue
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            continue
        if isinstance(node, (ast.USub, ast.UAdd)):
            continue
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            continue
        if isinstance(node, ast.Call):
            if isinstance(node.func, ast.Name) and node.func.id in _ALLOWED_FUNCS and len(node.args) == 1 and not node.keywords:
                continue
            raise ValueError(f"unsupported function call in {text!r}")
        if isinstance(node, ast.Name) and (node.id in names or node.id in _ALLOWED_FUNCS):
            continue
        raise ValueError(f"unsupported token {ast.dump(node)} in {text!r}")


def _sympy_expr(text: str, dim: int):
    import sympy as sp

    _check_expression(text, dim)
    x, y = sp.symbols("x y", real=True)
    local = {"x": x, "y": y, "pi": sp.pi, "sin": sp.sin, "cos": sp.cos, "exp": sp.exp}
    return sp.sympify(text, locals=local), (x, y)[:dim]


def _lambdify(expr, symbols) -> Field:
    import sympy as sp

    fn = sp.lambdify(symbols, expr, modules="numpy")

    def field_fn(p):
        p = np.asarray(p, dtype=float)
        vals = fn(*(p[:, i] for i in range(p.shape[1])))
        return np.broadcast_to(np.asarray(vals, dtype=float), (p.shape[0],)).copy()

    return field_fn


def apply_operator_symbolic(expr, symbols, op: Operator):
    """Closed-form ``L u`` for a sympy expression."""
    import sympy as sp

    if op is Operator.IDENTITY:
        return expr
    return -sum(sp.diff(expr, s, 2) for s in symbols)


def problem_from_config(cfg: dict) -> ProblemSpec:
    """Build a problem from an inline JSON description.

    Example::

        {"name": "my_poisson", "dim": 2, "solution": "sin(pi*x)*y",
         "pieces": [{"geometry": "square_interior", "op": "neg_laplacian"},
                    {"geometry": "square_boundary", "op": "identity"}]}

    Piece ``data`` strings are optional; when missing they are derived from
    the solution. Given data must agree with ``L_i u*`` to 1e-10.
    """
    dim = int(cfg["dim"])
    sol, symbols = _sympy_expr(str(cfg["solution"]), dim)
    pieces = []
    for pc in cfg["pieces"]:
        geometry = Geometry(pc["geometry"])
        op = Operator.parse(pc.get("op", "identity"))
        derived = apply_operator_symbolic(sol, symbols, op)
        if "data" in pc and pc["data"] is not None:
            data_text = str(pc["data"])
            data, _ = _sympy_expr(data_text, dim)
        else:
            data, data_text = derived, str(derived)
        trace = pc.get("trace_order")
        if trace is None and geometry in (Geometry.SQUARE_BOUNDARY, Geometry.INTERVAL_ENDPOINTS) and op is Operator.IDENTITY:
            trace = 0.5
        pieces.append(DomainPiece(geometry, op, _lambdify(data, symbols), tuple(pc.get("bounds", (0.0, 1.0))),
                                  trace, data_text))
    spec = ProblemSpec(str(cfg.get("name", "custom")), dim, tuple(pieces), _lambdify(sol, symbols),
                       int(cfg.get("test_resolution", 0)), str(cfg["solution"]))
    check_consistency(spec, lambda_u=[_lambdify(apply_operator_symbolic(sol, symbols, p.op), symbols) for p in pieces])
    return spec


def check_consistency(spec: ProblemSpec, lambda_u, n: int = 100, seed: int = 0, tol: float = 1e-10) -> float:
    """Max deviation between ``L_i u*`` and ``f_i`` at random piece points; raises above ``tol``."""
    worst = 0.0
    for i, (piece, lu) in enumerate(zip(spec.pieces, lambda_u)):
        pts = sample_piece(piece, n, np.random.default_rng([seed, i]))
        dev = float(np.max(np.abs(lu(pts) - piece.data_fn(pts))))
        if dev > tol:
            raise ValueError(f"data on piece {i} is inconsistent with the exact solution (max deviation {dev:.3g})")
        worst = max(worst, dev)
    return worst


def sample_piece(piece: DomainPiece, n: int, rng: np.random.Generator) -> np.ndarray:
    """Random points on a piece (uniform in parameter)."""
    a, b = piece.bounds
    g = piece.geometry
    if g is Geometry.INTERVAL:
        return rng.uniform(a, b, size=(n, 1))
    if g is Geometry.INTERVAL_ENDPOINTS:
        return rng.choice([a, b], size=(n, 1))
    if g is Geometry.SQUARE_INTERIOR:
        return rng.uniform(0, 1, size=(n, 2))
    return _square_boundary(rng.uniform(0, 4, size=n))


# -- candidate pools ---------------------------------------------------------


def _square_boundary(t: np.ndarray) -> np.ndarray:
    # arc-length parameter t in [0, 4), counter-clockwise from the origin
    t = np.mod(t, 4.0)
    edge = np.minimum(np.floor(t).astype(int), 3)
    u = t - edge
    pts = np.empty((t.size, 2))
    pts[edge == 0] = np.column_stack([u[edge == 0], np.zeros(np.sum(edge == 0))])
    pts[edge == 1] = np.column_stack([np.ones(np.sum(edge == 1)), u[edge == 1]])
    pts[edge == 2] = np.column_stack([1 - u[edge == 2], np.ones(np.sum(edge == 2))])
    pts[edge == 3] = np.column_stack([np.zeros(np.sum(edge == 3)), 1 - u[edge == 3]])
    return pts


def _halton_interior(dim: int, count: int, rng: np.random.Generator, lo: float, hi: float) -> np.ndarray:
    sampler = qmc.Halton(d=dim, scramble=True, seed=rng)
    pts = sampler.random(count)
    # keep strictly interior, distinct points; top up in the rare case of losses
    while True:
        pts = pts[np.all((pts > 0) & (pts < 1), axis=1)]
        _, keep = np.unique(pts, axis=0, return_index=True)
        pts = pts[np.sort(keep)]
        if len(pts) >= count:
            break
        pts = np.vstack([pts, sampler.random(count - len(pts))])
    return lo + (hi - lo) * pts[:count]


def piece_points(piece: DomainPiece, count: int, rng: np.random.Generator) -> np.ndarray:
    if count < 1:
        raise ValueError("candidate counts must be >= 1")
    a, b = piece.bounds
    g = piece.geometry
    if g is Geometry.INTERVAL:
        return _halton_interior(1, count, rng, a, b)
    if g is Geometry.SQUARE_INTERIOR:
        return _halton_interior(2, count, rng, 0.0, 1.0)
    if g is Geometry.INTERVAL_ENDPOINTS:
        if count > 2:
            raise ValueError(f"interval endpoints hold only 2 distinct points, requested {count}")
        return np.array([[a], [b]])[:count]
    return _square_boundary(4.0 * np.arange(count) / count)


def generate_candidates(spec: ProblemSpec, counts, seed: int = 0) -> CandidateSet:
    """Discretize every functional set of ``spec`` into one flat pool.

    Interior pieces use scrambled Halton points, boundary pieces a uniform
    arc-length grid that contains each corner once. Identical arguments give
    bitwise identical pools.
    """
    counts = list(counts)
    if len(counts) != spec.n_pieces:
        raise ValueError(f"expected {spec.n_pieces} candidate counts, got {len(counts)}")
    points, ops, domains, values = [], [], [], []
    for i, (piece, count) in enumerate(zip(spec.pieces, counts)):
        pts = piece_points(piece, int(count), np.random.default_rng([int(seed), i]))
        points.append(pts)
        ops.append(np.full(len(pts), int(piece.op)))
        domains.append(np.full(len(pts), i))
        values.append(piece.data_fn(pts))
    return CandidateSet(np.vstack(points), np.concatenate(ops), np.concatenate(domains), np.concatenate(values))


def default_counts(spec: ProblemSpec, interior: int = 2000) -> list[int]:
    counts = []
    for p in spec.pieces:
        if p.geometry is Geometry.INTERVAL_ENDPOINTS:
            counts.append(2)
        elif p.geometry is Geometry.SQUARE_BOUNDARY:
            counts.append(max(4, int(4 * math.sqrt(interior))))
        else:
            counts.append(interior)
    return counts


def test_grid(spec: ProblemSpec, resolution: int | None = None) -> np.ndarray:
    """Uniform tensor grid on the closure of the ambient domain."""
    res = int(resolution or spec.test_resolution)
    if res < 2:
        raise ValueError("test grid resolution must be >= 2")
    if spec.dim == 1:
        lo = min(p.bounds[0] for p in spec.pieces)
        hi = max(p.bounds[1] for p in spec.pieces)
        return np.linspace(lo, hi, res)[:, None]
    g = np.linspace(0.0, 1.0, res)
    xx, yy = np.meshgrid(g, g, indexing="ij")
    return np.column_stack([xx.ravel(), yy.ravel()])


# -- rate predictions --------------------------------------------------------


@dataclass(frozen=True)
class RatePrediction:
    tau: float
    piece_exponents: tuple[float, ...]
    m_bar: float
    d_bar: int
    beta: float
    predicted_exponent: float
    pn_exponent: float
    # same quantities with Dirichlet pieces at their trace order
    trace_piece_exponents: tuple[float, ...] = ()
    trace_predicted_exponent: float | None = None
    trace_pn_exponent: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _rate_from(tau: float, orders, dims, beta: float):
    exps = tuple((tau - m) / d for m, d in zip(orders, dims))
    k = int(np.argmin(exps))
    rate = exps[k]
    predicted = (-rate + (1 - beta) / 2) / max(beta, 1.0)
    return exps, k, predicted, -rate + 0.5


def predicted_exponent(spec: ProblemSpec, kernel: MaternKernel, beta: float) -> RatePrediction:
    """Exponents of the windowed-min error bound and of the ``p_n`` bound."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    spec.validate(kernel)
    tau = kernel.sobolev_order(spec.dim)
    dims = [p.intrinsic_dim for p in spec.pieces]
    exps, k, predicted, pn = _rate_from(tau, [p.order for p in spec.pieces], dims, beta)
    trace_orders = [p.trace_order if p.trace_order is not None else p.order for p in spec.pieces]
    t_exps, _, t_pred, t_pn = _rate_from(tau, trace_orders, dims, beta)
    return RatePrediction(
        tau=tau,
        piece_exponents=exps,
        m_bar=float(spec.pieces[k].order),
        d_bar=dims[k],
        beta=float(beta),
        predicted_exponent=predicted,
        pn_exponent=pn,
        trace_piece_exponents=t_exps,
        trace_predicted_exponent=t_pred,
        trace_pn_exponent=t_pn,
    )

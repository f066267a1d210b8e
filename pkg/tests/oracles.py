"""Reference implementations used only by the tests.

Nothing here imports the package's coefficient tables: the Matern profile
comes from the Bessel form ``2**(1-nu) / Gamma(nu) * r**nu * K_nu(r)``,
operators are applied either symbolically (sympy) or by central finite
differences in extended precision (mpmath).
"""

from __future__ import annotations

from functools import lru_cache

import mpmath
import numpy as np
import sympy as sp

_r = sp.symbols("r", positive=True)


@lru_cache(maxsize=None)
def profile_expr(nu: str):
    nu = sp.Rational(nu)
    expr = 2 ** (1 - nu) / sp.gamma(nu) * _r**nu * sp.besselk(nu, _r)
    return sp.simplify(sp.expand_func(expr))


@lru_cache(maxsize=None)
def _profile_mp(nu: str):
    return sp.lambdify(_r, profile_expr(nu), "mpmath")


@lru_cache(maxsize=None)
def psi_derivative_exprs(nu: str, shape: float):
    """Symbolic ``d^k/ds^k phi(shape * sqrt(s))`` for k = 0..4."""
    s = sp.symbols("s", positive=True)
    psi = profile_expr(nu).subs(_r, sp.nsimplify(shape) * sp.sqrt(s))
    out = [psi]
    for _ in range(4):
        out.append(sp.diff(out[-1], s))
    return s, out


def psi_derivative(nu: str, shape: float, s: float, order: int) -> float:
    sym, exprs = psi_derivative_exprs(nu, shape)
    return float(exprs[order].subs(sym, sp.Float(s, 40)).evalf(30))


@lru_cache(maxsize=None)
def _symbolic_operator(nu: str, dim: int, op_a: int, op_b: int):
    xs = sp.symbols(f"x0:{dim}")
    ys = sp.symbols(f"y0:{dim}")
    eps = sp.symbols("eps", positive=True)
    dist = sp.sqrt(sum((a - b) ** 2 for a, b in zip(xs, ys)))
    k = profile_expr(nu).subs(_r, eps * dist)
    if op_b:
        k = -sum(sp.diff(k, v, 2) for v in ys)
    if op_a:
        k = -sum(sp.diff(k, v, 2) for v in xs)
    return sp.lambdify((eps, *xs, *ys), k, "mpmath")


def symbolic_operator(nu: str, shape: float, dim: int, op_a: int, op_b: int):
    """Callable ``(x, y) -> (L_a x L_b) k(x, y)`` built by exact differentiation."""
    fn = _symbolic_operator(nu, dim, op_a, op_b)

    def value(x, y):
        with mpmath.workdps(30):
            return float(fn(mpmath.mpf(shape), *map(mpmath.mpf, x), *map(mpmath.mpf, y)))

    return value


def _neg_laplacian(f, point, h):
    total = -2 * len(point) * f(point)
    for i in range(len(point)):
        for sgn in (1, -1):
            q = list(point)
            q[i] += sgn * h
            total += f(q)
    return -total / h**2


def fd_operator(nu: str, shape: float, op_a: int, op_b: int, x, y, h=None) -> float:
    """Central second differences (step 1e-4, nested 1e-3) in 40-digit arithmetic."""
    prof = _profile_mp(nu)
    with mpmath.workdps(40):
        eps = mpmath.mpf(shape)
        hh = mpmath.mpf(h if h is not None else (1e-4 if op_a + op_b < 2 else 1e-3))

        def k(xv, yv):
            return prof(eps * mpmath.sqrt(sum((a - b) ** 2 for a, b in zip(xv, yv))))

        xs = [mpmath.mpf(v) for v in x]
        ys = [mpmath.mpf(v) for v in y]

        def in_y(xv):
            if not op_b:
                return k(xv, ys)
            return _neg_laplacian(lambda yv: k(xv, yv), ys, hh)

        return float(in_y(xs) if not op_a else _neg_laplacian(in_y, xs, hh))


def dense_gram(kernel_fn, points):
    """Plain kernel matrix from a scalar callable, one entry at a time."""
    n = len(points)
    g = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            g[i, j] = kernel_fn(points[i], points[j])
    return g

"""Error curves, windowed minima, power-product diagnostics and slope fits."""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

from .functionals import representer_matrix
from .greedy import GreedyState, IterationRecord

__all__ = [
    "error_curves",
    "windowed_min",
    "power_products",
    "fit_slope",
    "default_window",
]

_CHUNK = 2048


def error_curves(state: GreedyState, exact, points) -> tuple[np.ndarray, np.ndarray]:
    """Sup and root-mean-square errors of ``u_j`` on ``points`` for ``j = 0..n``.

    Entry ``j`` belongs to the interpolant built from the first ``j``
    selections; ``j = 0`` is the zero function.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    n = state.n
    linf = np.zeros(n + 1)
    sq = np.zeros(n + 1)
    if n:
        z = state.newton_z
        c = state.coefficients
        cand = state.candidates
        sel = state.selected
    for a in range(0, len(points), _CHUNK):
        chunk = points[a:a + _CHUNK]
        u = np.asarray(exact(chunk), dtype=float)
        err = np.empty((len(chunk), n + 1))
        err[:, 0] = u
        if n:
            v = representer_matrix(state.kernel, cand.points[sel], cand.ops[sel], chunk)
            newton = solve_triangular(z, v.T, lower=True).T
            err[:, 1:] = u[:, None] - np.cumsum(newton * c, axis=1)
        linf = np.maximum(linf, np.max(np.abs(err), axis=0))
        sq += np.sum(err * err, axis=0)
    return linf, np.sqrt(sq / len(points))


def windowed_min(errors) -> np.ndarray:
    """``E(n) = min_{n+1 <= j <= 2n} e(j)`` for ``n = 1..floor(N / 2)``.

    ``errors[j]`` is ``e(j)`` with ``errors[0]`` the zero interpolant; entry
    ``k`` of the result is ``E(k + 1)``.
    """
    e = np.asarray(errors, dtype=float)
    top = (len(e) - 1) // 2
    return np.array([e[n + 1:2 * n + 1].min() for n in range(1, top + 1)])


def power_products(records: list[IterationRecord] | np.ndarray) -> np.ndarray:
    """``p_n`` as geometric means of selection-time powers ``P_{j-1}(lambda_j)``, ``j = n+1..2n``.

    Entry ``k`` of the result is ``p_{k+1}``.
    """
    if len(records) and isinstance(records[0], IterationRecord):
        powers = np.array([r.power for r in records], dtype=float)
    else:
        powers = np.asarray(records, dtype=float)
    logs = np.log(powers)
    # powers[j - 1] holds the value recorded at step j
    top = len(powers) // 2
    return np.array([np.exp(np.mean(logs[n:2 * n])) for n in range(1, top + 1)])


def fit_slope(ns, values) -> tuple[float, float]:
    """Least-squares line through ``(log n, log value)``; returns ``(slope, intercept)``."""
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    ok = values > 0
    if ok.sum() < 2:
        raise ValueError("need at least two positive values to fit a slope")
    slope, intercept = np.polyfit(np.log(ns[ok]), np.log(values[ok]), 1)
    return float(slope), float(intercept)


def default_window(n_pieces: int, n_max: int) -> tuple[int, int]:
    return max(n_pieces, 10), n_max // 2

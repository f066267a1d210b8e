"""Dense reference solver used to cross-check the incremental engine."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .functionals import Functional, gram_column, gram_matrix, representer_matrix
from .kernels import MaternKernel, apply_pairs

__all__ = ["DenseSolution", "OracleFailure", "solve_dense", "power_dense", "powers_dense"]


class OracleFailure(LinAlgError):
    """The Gram matrix of the functional set is not numerically positive definite."""


def _arrays(functionals):
    functionals = list(functionals)
    if not functionals:
        return np.zeros((0, 0)), np.zeros(0, dtype=np.int8)
    pts = np.array([f.point for f in functionals], dtype=float)
    ops = np.array([int(f.op) for f in functionals], dtype=np.int8)
    return pts, ops


@dataclass
class DenseSolution:
    functionals: list[Functional]
    alpha: np.ndarray
    gram: np.ndarray
    chol: tuple

    def evaluate(self, kernel: MaternKernel, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        if not self.functionals:
            return np.zeros(len(points))
        pts, ops = _arrays(self.functionals)
        return representer_matrix(kernel, pts, ops, points) @ self.alpha

    def norm2(self) -> float:
        return float(self.alpha @ self.gram @ self.alpha)


def _factor(gram: np.ndarray):
    try:
        return cho_factor(gram, lower=True, check_finite=True)
    except LinAlgError as exc:
        raise OracleFailure(f"Cholesky factorization failed: {exc}") from None


def solve_dense(kernel: MaternKernel, functionals, data) -> DenseSolution:
    """Solve ``G alpha = data`` for the minimal-norm generalized interpolant."""
    functionals = list(functionals)
    data = np.asarray(data, dtype=float)
    if data.shape != (len(functionals),):
        raise ValueError(f"data length {data.shape} does not match {len(functionals)} functionals")
    if not functionals:
        return DenseSolution([], np.zeros(0), np.zeros((0, 0)), (np.zeros((0, 0)), True))
    pts, ops = _arrays(functionals)
    gram = gram_matrix(kernel, pts, ops)
    chol = _factor(gram)
    alpha = cho_solve(chol, data)
    return DenseSolution(functionals, alpha, gram, chol)


def powers_dense(kernel: MaternKernel, functionals, points, ops) -> np.ndarray:
    """Power function values of many functionals ``(points, ops)`` w.r.t. the span of ``functionals``."""
    points = np.asarray(points, dtype=float)
    ops = np.asarray(ops)
    diag = apply_pairs(kernel, ops, ops, np.zeros(len(ops)), points.shape[1])
    functionals = list(functionals)
    if not functionals:
        return np.sqrt(diag)
    pts, sel_ops = _arrays(functionals)
    chol = _factor(gram_matrix(kernel, pts, sel_ops))
    b = np.column_stack([gram_column(kernel, points, ops, p, o) for p, o in zip(pts, sel_ops)])
    quad = np.einsum("ij,ij->i", b, cho_solve(chol, b.T).T)
    return np.sqrt(np.maximum(0.0, diag - quad))


def power_dense(kernel: MaternKernel, functionals, lam: Functional) -> float:
    """``sqrt(max(0, G_ll - b^T G^{-1} b))`` with ``b_j = <v_j, v_lam>``."""
    return float(powers_dense(kernel, functionals, np.array([lam.point]), np.array([int(lam.op)]))[0])

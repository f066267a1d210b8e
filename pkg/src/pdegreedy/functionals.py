"""Collocation functionals ``delta_x o L_i`` and their kernel representers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import MaternKernel, Operator, apply_pairs, squared_distances

__all__ = [
    "Functional",
    "CandidateSet",
    "gram_entry",
    "gram_matrix",
    "gram_column",
    "representer_eval",
    "representer_matrix",
]


@dataclass(frozen=True)
class Functional:
    """Point evaluation of ``op`` at ``point``, belonging to one domain piece."""

    id: int
    domain: int
    op: Operator
    point: tuple[float, ...]

    @property
    def dim(self) -> int:
        return len(self.point)

    def to_dict(self) -> dict:
        return {"id": self.id, "domain": self.domain, "op": self.op.label, "point": list(self.point)}

    @classmethod
    def from_dict(cls, data: dict) -> "Functional":
        return cls(int(data["id"]), int(data["domain"]), Operator.parse(data["op"]), tuple(map(float, data["point"])))


class CandidateSet:
    """Flat, immutable pool of functionals over all domain pieces.

    Functional ids equal their position in the pool. Array views
    (``points``, ``ops``, ``domains``) are what the greedy engine works on.
    """

    def __init__(self, points, ops, domains, values=None):
        points = np.array(points, dtype=float, ndmin=2)
        ops = np.asarray(ops, dtype=np.int8)
        domains = np.asarray(domains, dtype=np.int32)
        if points.ndim != 2 or len(points) != len(ops) or len(ops) != len(domains):
            raise ValueError("points, ops and domains must have matching lengths")
        self.points = points
        self.ops = ops
        self.domains = domains
        self.values = None if values is None else np.asarray(values, dtype=float)
        for arr in (self.points, self.ops, self.domains, self.values):
            if arr is not None:
                arr.setflags(write=False)

    @classmethod
    def from_functionals(cls, functionals, values=None) -> "CandidateSet":
        functionals = list(functionals)
        for i, f in enumerate(functionals):
            if f.id != i:
                raise ValueError("functional ids must equal their pool position")
        return cls(
            [f.point for f in functionals],
            [int(f.op) for f in functionals],
            [f.domain for f in functionals],
            values,
        )

    def __len__(self) -> int:
        return len(self.ops)

    def __getitem__(self, i: int) -> Functional:
        return Functional(int(i), int(self.domains[i]), Operator(int(self.ops[i])), tuple(self.points[i].tolist()))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def counts(self) -> dict[int, int]:
        ids, counts = np.unique(self.domains, return_counts=True)
        return dict(zip(ids.tolist(), counts.tolist()))

    def subset(self, index) -> "CandidateSet":
        """New pool with the selected members, re-numbered from 0."""
        index = np.asarray(index)
        values = None if self.values is None else self.values[index]
        return CandidateSet(self.points[index], self.ops[index], self.domains[index], values)


def gram_entry(kernel: MaternKernel, lam: Functional, mu: Functional) -> float:
    """Inner product of the representers of ``lam`` and ``mu``."""
    if lam.dim != mu.dim:
        raise ValueError(f"dimension mismatch: {lam.dim} vs {mu.dim}")
    s = squared_distances(np.asarray(lam.point), np.asarray(mu.point))
    return float(apply_pairs(kernel, int(lam.op), int(mu.op), np.array([s]), lam.dim)[0])


def gram_column(kernel: MaternKernel, points, ops, point, op) -> np.ndarray:
    """Gram entries between many functionals ``(points, ops)`` and one ``(point, op)``."""
    points = np.asarray(points, dtype=float)
    s = squared_distances(points, np.asarray(point, dtype=float))
    return apply_pairs(kernel, ops, int(op), s, points.shape[1])


def gram_matrix(kernel: MaternKernel, points, ops) -> np.ndarray:
    """Full symmetric Gram matrix of a functional set."""
    points = np.asarray(points, dtype=float)
    ops = np.asarray(ops)
    s = squared_distances(points[:, None, :], points[None, :, :])
    g = apply_pairs(kernel, ops[:, None], ops[None, :], s, points.shape[1])
    return 0.5 * (g + g.T)


def representer_eval(kernel: MaternKernel, lam: Functional, x) -> float:
    """Value of the representer ``v_lam`` at ``x``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (lam.dim,):
        raise ValueError(f"dimension mismatch: expected point of dim {lam.dim}, got shape {x.shape}")
    s = squared_distances(np.asarray(lam.point), x)
    return float(apply_pairs(kernel, int(lam.op), 0, np.array([s]), lam.dim)[0])


def representer_matrix(kernel: MaternKernel, points, ops, x) -> np.ndarray:
    """Matrix ``V[m, j] = v_j(x_m)`` for functionals ``(points, ops)`` and evaluation points ``x``."""
    points = np.asarray(points, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[1] != points.shape[1]:
        raise ValueError(f"dimension mismatch: {x.shape[1]} vs {points.shape[1]}")
    s = squared_distances(x[:, None, :], points[None, :, :])
    return apply_pairs(kernel, np.asarray(ops)[None, :], 0, s, points.shape[1])

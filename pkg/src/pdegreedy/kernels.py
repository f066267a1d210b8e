"""Half-integer Matern kernels in squared-distance form.

The kernel is ``k(x, y) = psi(s)`` with ``s = |x - y|**2`` and
``psi(s) = phi(eps * sqrt(s))``, where ``phi(r) = p(r) * exp(-r)`` is the
normalized Matern profile of smoothness ``nu`` (``phi(0) = 1``). Derivatives
are taken with respect to the unscaled ``s``, so every ``eps`` factor lives in
``psi`` itself.

Derivatives of ``psi`` with respect to ``s`` are kept as exact Laurent
polynomials in ``r`` times ``exp(-r)``; the ``d/ds = (1 / 2r) d/dr`` rule maps
one such form to another, so no cancellation occurs for ``r > 0``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

__all__ = [
    "Operator",
    "MaternKernel",
    "SUPPORTED_NU",
    "SERIES_THRESHOLD",
    "psi_derivatives",
    "kernel_apply",
    "apply_pairs",
    "squared_distances",
]

SUPPORTED_NU = (Fraction(3, 2), Fraction(5, 2), Fraction(7, 2), Fraction(9, 2))

# below this value of eps**2 * s the truncated series branch is used
SERIES_THRESHOLD = 1e-8
_SERIES_TERMS = 12
_MAX_ORDER = 4


class Operator(enum.IntEnum):
    """Differential operators acting on one kernel argument."""

    IDENTITY = 0
    NEG_LAPLACIAN = 1

    @property
    def order(self) -> int:
        return 0 if self is Operator.IDENTITY else 2

    @property
    def label(self) -> str:
        return "identity" if self is Operator.IDENTITY else "neg_laplacian"

    @classmethod
    def parse(cls, value) -> "Operator":
        if isinstance(value, Operator):
            return value
        if isinstance(value, (int, np.integer)):
            return cls(int(value))
        key = str(value).strip().lower().replace("-", "_")
        aliases = {
            "identity": cls.IDENTITY,
            "id": cls.IDENTITY,
            "neg_laplacian": cls.NEG_LAPLACIAN,
            "neglaplacian": cls.NEG_LAPLACIAN,
            "-laplacian": cls.NEG_LAPLACIAN,
        }
        if key not in aliases:
            raise ValueError(f"unknown operator {value!r}")
        return aliases[key]


def _matern_profile(nu: Fraction) -> dict[int, Fraction]:
    """Coefficients of p(r) in phi(r) = p(r) exp(-r), normalized to p(0) = 1."""
    p = int(nu - Fraction(1, 2))
    scale = Fraction(math.factorial(p), math.factorial(2 * p))
    return {
        j: scale * Fraction(math.factorial(2 * p - j), math.factorial(j) * math.factorial(p - j)) * 2**j
        for j in range(p + 1)
    }


def _d_ds(coeffs: dict[int, Fraction]) -> dict[int, Fraction]:
    # d/dt of sum c_j r^j e^{-r} with t = r^2, i.e. (1/2r) d/dr
    out: dict[int, Fraction] = {}
    for j, c in coeffs.items():
        if j != 0:
            out[j - 2] = out.get(j - 2, Fraction(0)) + Fraction(j, 2) * c
        out[j - 1] = out.get(j - 1, Fraction(0)) - c / 2
    return {j: c for j, c in out.items() if c != 0}


def _series(coeffs: dict[int, Fraction], terms: int) -> dict[int, Fraction]:
    # Laurent polynomial times a truncated exp(-r) series
    lo = min(coeffs)
    out: dict[int, Fraction] = {}
    for j, c in coeffs.items():
        for i in range(terms):
            if j + i >= lo + terms:
                break
            out[j + i] = out.get(j + i, Fraction(0)) + c * Fraction((-1) ** i, math.factorial(i))
    return {j: c for j, c in out.items() if c != 0}


def _parse_nu(nu) -> Fraction:
    if isinstance(nu, str):
        value = Fraction(nu.strip())
    else:
        value = Fraction(nu).limit_denominator(16)
    if value not in SUPPORTED_NU:
        raise ValueError(f"unsupported Matern smoothness nu={nu}; expected one of 3/2, 5/2, 7/2, 9/2")
    return value


@dataclass(frozen=True)
class MaternKernel:
    """Normalized half-integer Matern kernel ``phi_nu(shape * |x - y|)``.

    Parameters
    ----------
    nu : str, float or Fraction
        Smoothness, one of 3/2, 5/2, 7/2, 9/2.
    shape : float
        Inverse length scale ``eps > 0``.
    """

    nu: Fraction
    shape: float = 1.0
    # (order, factor): scales one derivative order; used only for fault injection
    fault: tuple[int, float] | None = field(default=None, repr=False, compare=False)
    _laurent: tuple = field(init=False, repr=False, compare=False)
    _taylor: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "nu", _parse_nu(self.nu))
        shape = float(self.shape)
        if not (shape > 0 and math.isfinite(shape)):
            raise ValueError(f"shape must be a positive finite number, got {self.shape!r}")
        object.__setattr__(self, "shape", shape)
        table = [_matern_profile(self.nu)]
        for _ in range(_MAX_ORDER):
            table.append(_d_ds(table[-1]))
        object.__setattr__(self, "_laurent", tuple(table))
        object.__setattr__(self, "_taylor", tuple(_series(c, _SERIES_TERMS) for c in table))

    @classmethod
    def from_config(cls, cfg: dict) -> "MaternKernel":
        family = str(cfg.get("family", "matern")).lower()
        if family != "matern":
            raise ValueError(f"unsupported kernel family {family!r}")
        return cls(nu=cfg.get("nu", "7/2"), shape=cfg.get("shape", 1.0))

    def to_config(self) -> dict:
        return {"family": "matern", "nu": str(self.nu), "shape": self.shape}

    @property
    def smoothness(self) -> float:
        return float(self.nu)

    def sobolev_order(self, dim: int) -> float:
        """Sobolev smoothness tau = nu + d/2 of the native space on R^d."""
        return float(self.nu) + dim / 2

    def with_fault(self, order: int, factor: float) -> "MaternKernel":
        """Copy whose ``order``-th psi derivative is multiplied by ``factor``."""
        return MaternKernel(self.nu, self.shape, fault=(int(order), float(factor)))

    def min_power(self, order: int, spow: int = 0) -> int:
        """Lowest power of r in ``s**spow * psi^(order)``; negative means singular at 0."""
        return min(self._laurent[order]) + 2 * spow

    def weighted(self, order: int, spow: int, s) -> np.ndarray:
        """Evaluate ``s**spow * psi^(order)(s)`` elementwise.

        Uses the closed form for ``eps**2 * s >= SERIES_THRESHOLD`` and the
        truncated series below it. Singular combinations evaluate to signed infinity at
        ``s = 0``.
        """
        s = np.asarray(s, dtype=float)
        if np.any(s < 0):
            raise ValueError("squared distance s must be nonnegative")
        eps2 = self.shape**2
        r = self.shape * np.sqrt(s)
        out = np.empty_like(r)
        small = r * r < SERIES_THRESHOLD
        big = ~small
        if np.any(big):
            rb = r[big]
            acc = np.zeros_like(rb)
            for j, c in self._laurent[order].items():
                acc += float(c) * rb ** (j + 2 * spow)
            out[big] = acc * np.exp(-rb)
        if np.any(small):
            rs = r[small]
            terms = {j + 2 * spow: float(c) for j, c in self._taylor[order].items()}
            acc = np.zeros_like(rs)
            pos = rs > 0
            for p, c in terms.items():
                acc[pos] += c * rs[pos] ** p
            lead = min(terms)
            acc[~pos] = math.copysign(np.inf, terms[lead]) if lead < 0 else terms.get(0, 0.0)
            out[small] = acc
        out *= eps2 ** (order - spow)
        if self.fault is not None and self.fault[0] == order:
            out *= self.fault[1]
        return out

    def psi(self, s, order: int = 0) -> np.ndarray:
        return self.weighted(order, 0, s)

    def __call__(self, x, y) -> np.ndarray:
        """Plain kernel values between point arrays of matching trailing dim."""
        return self.psi(squared_distances(x, y))


def squared_distances(x, y) -> np.ndarray:
    """Squared distances ``|x - y|**2`` with broadcasting on leading axes."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[-1:] != y.shape[-1:]:
        raise ValueError(f"dimension mismatch: {x.shape[-1:]} vs {y.shape[-1:]}")
    diff = x - y
    return np.einsum("...i,...i->...", diff, diff)


def psi_derivatives(kernel: MaternKernel, s: float) -> tuple[float, float, float, float, float]:
    """Return ``(psi, psi', psi'', psi''', psi'''')`` at a single ``s >= 0``."""
    if s < 0:
        raise ValueError("squared distance s must be nonnegative")
    arr = np.array([float(s)])
    # singular derivatives of rough kernels legitimately overflow near s = 0
    with np.errstate(invalid="ignore", over="ignore"):
        return tuple(float(kernel.psi(arr, k)[0]) for k in range(_MAX_ORDER + 1))


def _check_support(kernel: MaternKernel, n_lap: int) -> None:
    if n_lap and kernel.nu < Fraction(5, 2):
        raise ValueError(
            f"nu={kernel.nu} is too rough for Laplacian functionals; need nu >= 5/2"
        )


def apply_pairs(kernel: MaternKernel, op_a, op_b, s, dim: int) -> np.ndarray:
    """Vectorized ``(L_a x L_b) k`` given operator codes and squared distances.

    ``op_a``, ``op_b`` and ``s`` broadcast against each other.
    """
    s = np.asarray(s, dtype=float)
    op_a, op_b, s = np.broadcast_arrays(np.asarray(op_a), np.asarray(op_b), s)
    n_lap = op_a.astype(int) + op_b.astype(int)
    _check_support(kernel, int(n_lap.max(initial=0)))
    out = np.empty(s.shape, dtype=float)
    d = float(dim)
    m0 = n_lap == 0
    if np.any(m0):
        out[m0] = kernel.weighted(0, 0, s[m0])
    m1 = n_lap == 1
    if np.any(m1):
        t = s[m1]
        out[m1] = -(4.0 * kernel.weighted(2, 1, t) + 2.0 * d * kernel.weighted(1, 0, t))
    m2 = n_lap == 2
    if np.any(m2):
        t = s[m2]
        out[m2] = (
            16.0 * kernel.weighted(4, 2, t)
            + (16.0 * d + 32.0) * kernel.weighted(3, 1, t)
            + (4.0 * d * d + 8.0 * d) * kernel.weighted(2, 0, t)
        )
    return out


def kernel_apply(kernel: MaternKernel, op_a, op_b, x, y) -> float:
    """``(L_a x L_b) k(x, y)`` with ``op_a`` acting on ``x`` and ``op_b`` on ``y``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    s = squared_distances(x, y)
    a, b = Operator.parse(op_a), Operator.parse(op_b)
    return float(apply_pairs(kernel, int(a), int(b), np.array([s]), x.size)[0])

"""PDE-beta-greedy selection with incremental Newton-basis updates.

Each step costs O(n * q) for ``q`` candidates: the new Newton basis function
``N_{n+1}`` is obtained by one Gram column and one Gram-Schmidt sweep over the
cached values ``z_l(mu) = mu(N_l)``, after which the squared power function and
the residual of every candidate are downdated in place.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .functionals import CandidateSet, Functional, gram_column, representer_matrix
from .kernels import MaternKernel, apply_pairs
from .problems import ProblemSpec

__all__ = [
    "GreedyConfig",
    "GreedyState",
    "IterationRecord",
    "Selection",
    "GreedyStop",
    "NumericalBreakdown",
    "initialize",
    "eta",
    "eta_values",
    "select",
    "step",
    "run",
    "evaluate_interpolant",
    "newton_values",
]

log = logging.getLogger(__name__)

# negative squared powers above this are roundoff; below it the run aborts
NEGATIVE_POWER2_LIMIT = -1e-12
_CHUNK = 4096
_BLOCK = 512


class GreedyStop(Exception):
    """Raised by :func:`step` when no candidate can be selected."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class NumericalBreakdown(ArithmeticError):
    """Non-finite arithmetic or a clearly negative squared power."""


@dataclass(frozen=True)
class GreedyConfig:
    beta: float = 1.0
    n_max: int = 100
    power_tol: float = 1e-7
    eta_tol: float = 0.0
    threads: int | None = None

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        if not self.power_tol > 0:
            raise ValueError("power_tol must be positive")
        if self.eta_tol < 0:
            raise ValueError("eta_tol must be nonnegative")
        if self.threads is not None and self.threads < 1:
            raise ValueError("threads must be a positive integer")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class IterationRecord:
    n: int
    functional_id: int
    eta: float
    power: float
    residual: float
    ms: float
    fallback: bool = False


@dataclass(frozen=True)
class Selection:
    index: int
    eta: float
    max_eta: float
    fallback: bool


@dataclass
class GreedyState:
    """Mutable greedy state; not meant to be shared between runs."""

    kernel: MaternKernel
    candidates: CandidateSet
    data: np.ndarray
    cand_z: np.ndarray
    cand_power2: np.ndarray
    cand_residual: np.ndarray
    active: np.ndarray
    selected: list[int] = field(default_factory=list)
    coeffs: list[float] = field(default_factory=list)
    filtered: np.ndarray | None = None
    stop_reason: str | None = None
    breakdown: str | None = None
    _pool: ThreadPoolExecutor | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return len(self.selected)

    @property
    def dim(self) -> int:
        return self.candidates.dim

    @property
    def newton_z(self) -> np.ndarray:
        """Lower-triangular ``z[j, l] = lambda_j(N_l)``."""
        n = self.n
        return np.tril(self.cand_z[self.selected, :n]) if n else np.zeros((0, 0))

    @property
    def coefficients(self) -> np.ndarray:
        return np.asarray(self.coeffs, dtype=float)

    @property
    def selected_functionals(self) -> list[Functional]:
        return [self.candidates[i] for i in self.selected]

    def norm2(self) -> float:
        """Squared native-space norm of the current interpolant."""
        return float(np.sum(self.coefficients**2))

    def alpha(self) -> np.ndarray:
        """Coefficients of the interpolant in the representer basis."""
        if not self.n:
            return np.zeros(0)
        return solve_triangular(self.newton_z, self.coefficients, trans="T", lower=True)

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None


def initialize(kernel: MaternKernel, spec: ProblemSpec | None, candidates: CandidateSet,
               config: GreedyConfig, data=None) -> GreedyState:
    """Empty-interpolant state: power = representer norm, residual = data."""
    q = len(candidates)
    if q == 0:
        raise ValueError("empty candidate set")
    if spec is not None:
        spec.validate(kernel)
        if spec.dim != candidates.dim:
            raise ValueError("candidate dimension does not match the problem")
    if data is None:
        if candidates.values is None:
            raise ValueError("no data values: pass data= or build candidates from a problem")
        data = candidates.values
    data = np.array(data, dtype=float)
    if data.shape != (q,):
        raise ValueError(f"data has shape {data.shape}, expected ({q},)")
    zeros = np.zeros(q)
    diag = apply_pairs(kernel, candidates.ops, candidates.ops, zeros, candidates.dim)
    cap = max(1, min(config.n_max, q))
    return GreedyState(
        kernel=kernel,
        candidates=candidates,
        data=data,
        cand_z=np.zeros((q, cap)),
        cand_power2=diag.copy(),
        cand_residual=data.copy(),
        active=np.ones(q, dtype=bool),
        filtered=np.zeros(q, dtype=bool),
    )


def eta(power: float, residual: float, beta: float, power_tol: float = 1e-7) -> float:
    """Selection criterion ``|r|**beta * P**(1 - beta)`` for one candidate."""
    return float(eta_values(np.array([power]), np.array([residual]), beta, power_tol)[0])


def eta_values(power, residual, beta: float, power_tol: float = 1e-7) -> np.ndarray:
    power = np.asarray(power, dtype=float)
    residual = np.abs(np.asarray(residual, dtype=float))
    if beta == 0:
        return power.copy()
    if beta == 1:
        return residual.copy()
    if beta > 1:
        power = np.maximum(power, power_tol)
    # numpy's 0.0**0.0 == 1.0 matches the convention needed here
    return residual**beta * power ** (1.0 - beta)


def _slices(q: int) -> list[slice]:
    # the partition must not depend on the thread hint: BLAS rounding depends on block shape
    return [slice(a, min(a + _BLOCK, q)) for a in range(0, q, _BLOCK)]


def _map(state: GreedyState, config: GreedyConfig, fn, parts):
    if len(parts) == 1 or not config.threads or config.threads == 1:
        return [fn(sl) for sl in parts]
    if state._pool is None:
        state._pool = ThreadPoolExecutor(max_workers=config.threads)
    return list(state._pool.map(fn, parts))


def _best(values: np.ndarray, mask: np.ndarray, offset: int):
    # (value, -id) maximum within one slice; ties go to the smallest id
    if not np.any(mask):
        return (-np.inf, -1)
    v = np.where(mask, values, -np.inf)
    i = int(np.argmax(v))
    return (float(v[i]), offset + i)


def _reduce(parts):
    best = (-np.inf, -1)
    for val, idx in parts:
        if idx < 0:
            continue
        if best[1] < 0 or val > best[0] or (val == best[0] and idx < best[1]):
            best = (val, idx)
    return best


def select(state: GreedyState, config: GreedyConfig) -> Selection:
    """Deactivate numerically dependent candidates and pick the argmax of eta."""
    tol2 = config.power_tol**2
    newly = state.active & (state.cand_power2 <= tol2)
    state.filtered |= newly
    state.active &= ~newly
    if not state.active.any():
        raise GreedyStop("exhausted")
    parts = _slices(len(state.candidates))

    def scan(sl):
        p = np.sqrt(state.cand_power2[sl])
        e = eta_values(p, state.cand_residual[sl], config.beta, config.power_tol)
        return _best(e, state.active[sl], sl.start)

    max_eta, idx = _reduce(_map(state, config, scan, parts))
    if max_eta > 0 or config.beta == 0:
        return Selection(idx, max_eta, max_eta, False)

    # all eta vanish: order by power instead of taking an arbitrary zero
    def scan_power(sl):
        return _best(state.cand_power2[sl], state.active[sl], sl.start)

    _, idx = _reduce(_map(state, config, scan_power, parts))
    return Selection(idx, 0.0, max_eta, True)


def step(state: GreedyState, config: GreedyConfig, selection: Selection | None = None) -> IterationRecord:
    """Select one functional and update the Newton data and all caches.

    The update is computed into temporaries first; on
    :class:`NumericalBreakdown` the state is left as it was.
    """
    t0 = time.perf_counter()
    if selection is None:
        selection = select(state, config)
    i = selection.index
    n = state.n
    cand = state.candidates
    p = float(np.sqrt(state.cand_power2[i]))
    r = float(state.cand_residual[i])
    z_star = state.cand_z[i, :n].copy()
    point, op = cand.points[i], int(cand.ops[i])
    c = r / p
    if not np.isfinite(c):
        raise NumericalBreakdown(f"non-finite Newton coefficient at step {n + 1} (power={p:.3g})")
    # filtered candidates are numerically in the span; only selectable ones can break the run
    live = state.active.copy()
    live[i] = False

    def update(sl):
        col = gram_column(state.kernel, cand.points[sl], cand.ops[sl], point, op)
        if n:
            col -= state.cand_z[sl, :n] @ z_star
        col /= p
        pw = state.cand_power2[sl] - col * col
        res = state.cand_residual[sl] - c * col
        mask = live[sl]
        low = float(pw[mask].min()) if mask.any() else 0.0
        return col, pw, res, low

    parts = _slices(len(cand))
    results = _map(state, config, update, parts)
    col = np.concatenate([res[0] for res in results])
    if not np.all(np.isfinite(col)):
        raise NumericalBreakdown(f"non-finite Newton basis values at step {n + 1}")
    low = min(res[3] for res in results)
    if low < NEGATIVE_POWER2_LIMIT:
        raise NumericalBreakdown(f"squared power dropped to {low:.3g} at step {n + 1}")

    if n >= state.cand_z.shape[1]:
        grow = np.zeros((state.cand_z.shape[0], max(1, state.cand_z.shape[1])))
        state.cand_z = np.hstack([state.cand_z, grow])
    col[i] = p
    state.cand_z[:, n] = col
    state.cand_power2 = np.maximum(np.concatenate([res[1] for res in results]), 0.0)
    state.cand_residual = np.concatenate([res[2] for res in results])
    state.cand_power2[i] = 0.0
    state.cand_residual[i] = 0.0
    state.active[i] = False
    state.selected.append(i)
    state.coeffs.append(c)
    ms = 1e3 * (time.perf_counter() - t0)
    return IterationRecord(n + 1, i, selection.eta, p, r, ms, selection.fallback)


def run(kernel: MaternKernel, spec: ProblemSpec | None, candidates: CandidateSet, config: GreedyConfig,
        data=None, callback=None, stop_on_breakdown: bool = False) -> tuple[GreedyState, list[IterationRecord]]:
    """Iterate until ``n_max``, ``max eta <= eta_tol`` or pool exhaustion.

    ``callback(state, record)`` is invoked after every step. With
    ``stop_on_breakdown`` a numerical breakdown ends the run (``stop_reason``
    ``"breakdown"``, message in ``state.breakdown``) instead of raising.
    """
    state = initialize(kernel, spec, candidates, config, data)
    records: list[IterationRecord] = []
    try:
        while state.n < config.n_max:
            try:
                sel = select(state, config)
            except GreedyStop as stop:
                state.stop_reason = stop.reason
                break
            if sel.max_eta <= config.eta_tol:
                state.stop_reason = "eta_tol"
                break
            try:
                rec = step(state, config, sel)
            except NumericalBreakdown as exc:
                if not stop_on_breakdown:
                    raise
                log.warning("greedy run stopped: %s", exc)
                state.stop_reason = "breakdown"
                state.breakdown = str(exc)
                break
            records.append(rec)
            if callback is not None:
                callback(state, rec)
        else:
            state.stop_reason = "n_max"
    finally:
        state.close()
    log.debug("greedy run stopped after %d steps (%s)", state.n, state.stop_reason)
    return state, records


def newton_values(state: GreedyState, points, n: int | None = None) -> np.ndarray:
    """Matrix ``N[m, j]`` of the first ``n`` Newton basis functions at ``points``."""
    n = state.n if n is None else n
    points = _as_points(points, state.dim)
    if n == 0:
        return np.zeros((len(points), 0))
    sel = state.selected[:n]
    cand = state.candidates
    z = state.newton_z[:n, :n]
    v = representer_matrix(state.kernel, cand.points[sel], cand.ops[sel], points)
    return solve_triangular(z, v.T, lower=True).T


def evaluate_interpolant(state: GreedyState, points, kernel: MaternKernel | None = None) -> np.ndarray:
    """Values of the current interpolant ``u_n`` at ``points``."""
    kernel = kernel or state.kernel
    points = _as_points(points, state.dim)
    out = np.zeros(len(points))
    if state.n == 0:
        return out
    sel = state.selected
    alpha = state.alpha()
    cand = state.candidates
    for a in range(0, len(points), _CHUNK):
        v = representer_matrix(kernel, cand.points[sel], cand.ops[sel], points[a:a + _CHUNK])
        out[a:a + _CHUNK] = v @ alpha
    return out


def _as_points(points, dim: int) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None] if dim == 1 else points[None, :]
    if points.shape[1] != dim:
        raise ValueError(f"dimension mismatch: points have dim {points.shape[1]}, state has {dim}")
    return points

"""Self-checks run by ``pdegreedy verify``.

Every check returns a :class:`CheckResult`; none of them raise on failure.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from fractions import Fraction

import mpmath
import numpy as np

from .functionals import CandidateSet
from .greedy import GreedyConfig, evaluate_interpolant, run
from .kernels import SERIES_THRESHOLD, MaternKernel, Operator, kernel_apply
from .oracle import powers_dense, solve_dense
from .problems import default_counts, generate_candidates, get_problem, test_grid
from .reports import trace_rows, write_csv

__all__ = ["CheckResult", "fd_operator_value", "run_checks", "CHECKS"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def _mp_profile(nu: Fraction, shape: float):
    # independent of the Laurent tables: textbook half-integer Matern sum
    p = int(nu - Fraction(1, 2))
    coeffs = [
        mpmath.factorial(p) / mpmath.factorial(2 * p)
        * mpmath.factorial(p + i) / (mpmath.factorial(i) * mpmath.factorial(p - i)) * 2 ** (p - i)
        for i in range(p + 1)
    ]
    eps = mpmath.mpf(shape)

    def k(x, y):
        r = eps * mpmath.sqrt(sum((a - b) ** 2 for a, b in zip(x, y)))
        return mpmath.exp(-r) * sum(c * r ** (p - i) for i, c in enumerate(coeffs))

    return k


def _mp_neg_laplacian(f, point, h):
    pt = [mpmath.mpf(v) for v in point]
    total = -2 * len(pt) * f(pt)
    for i in range(len(pt)):
        for sgn in (1, -1):
            q = list(pt)
            q[i] += sgn * h
            total += f(q)
    return -total / h**2


def fd_operator_value(kernel: MaternKernel, op_a, op_b, x, y, h: float | None = None) -> float:
    """Central-difference oracle for ``(L_a x L_b) k(x, y)`` in 40-digit arithmetic."""
    op_a, op_b = Operator.parse(op_a), Operator.parse(op_b)
    with mpmath.workdps(40):
        k = _mp_profile(kernel.nu, kernel.shape)
        n_lap = int(op_a) + int(op_b)
        hh = mpmath.mpf(h if h is not None else (1e-4 if n_lap < 2 else 1e-3))
        xs = [mpmath.mpf(v) for v in x]
        ys = [mpmath.mpf(v) for v in y]

        def in_y(xv):
            if op_b is Operator.IDENTITY:
                return k(xv, ys)
            return _mp_neg_laplacian(lambda yv: k(xv, yv), ys, hh)

        if op_a is Operator.IDENTITY:
            return float(in_y(xs))
        return float(_mp_neg_laplacian(in_y, xs, hh))


def check_kernel_fd(kernel: MaternKernel | None = None, samples: int = 60, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst1 = worst2 = 0.0
    nus = ("5/2", "7/2", "9/2")
    for i in range(samples):
        d = int(rng.integers(1, 4))
        k = kernel or MaternKernel(nus[i % 3], float(rng.uniform(0.5, 2.0)))
        x = rng.uniform(-1, 1, d)
        direction = rng.normal(size=d)
        y = x + rng.uniform(0.1, 3.0) * direction / np.linalg.norm(direction)
        for a, b, tol_slot in ((0, 1, 1), (1, 0, 1), (1, 1, 2)):
            exact = kernel_apply(k, a, b, x, y)
            ref = fd_operator_value(k, a, b, x, y)
            err = abs(exact - ref) / max(abs(ref), 1e-2)
            if tol_slot == 1:
                worst1 = max(worst1, err)
            else:
                worst2 = max(worst2, err)
    ok = worst1 <= 1e-6 and worst2 <= 1e-4
    return CheckResult("kernel_finite_differences", ok, f"single {worst1:.2e} (tol 1e-6), double {worst2:.2e} (tol 1e-4)")


def check_kernel_constants(kernel: MaternKernel | None = None) -> CheckResult:
    k = kernel or MaternKernel("5/2", 1.0)
    if k.nu != Fraction(5, 2) or k.shape != 1.0:
        k = MaternKernel("5/2", 1.0)
    x = np.array([0.3, -0.2])
    got = [kernel_apply(k, 0, 0, x, x), kernel_apply(k, 0, 1, x, x), kernel_apply(k, 1, 1, x, x)]
    want = [1.0, 2.0 / 3.0, 8.0 / 3.0]
    err = max(abs(g - w) for g, w in zip(got, want))
    # branch continuity at the series switchover
    s = np.array([SERIES_THRESHOLD * (1 - 1e-12), SERIES_THRESHOLD])
    cont = 0.0
    for nu in ("5/2", "7/2", "9/2"):
        kk = MaternKernel(nu, 1.0)
        for order in range(5):
            if kk.min_power(order) < 0:
                continue
            v = kk.psi(s, order)
            cont = max(cont, abs(v[0] - v[1]) / abs(v[1]))
    ok = err <= 1e-10 and cont <= 1e-10
    return CheckResult("kernel_constants", ok, f"coincident-point error {err:.2e}, branch jump {cont:.2e}")


def _runs(kernel_nu="7/2", n=25):
    for name in ("poisson_1d", "interp_2d"):
        spec = get_problem(name)
        kernel = MaternKernel(kernel_nu, 1.0)
        cands = generate_candidates(spec, default_counts(spec, 300), seed=0)
        for beta in (0.0, 0.5, 1.0):
            yield name, beta, spec, kernel, cands, GreedyConfig(beta=beta, n_max=n)


def check_oracle_equivalence() -> CheckResult:
    worst_u = worst_p = 0.0
    for name, beta, spec, kernel, cands, cfg in _runs():
        state, _ = run(kernel, spec, cands, cfg)
        grid = test_grid(spec, 41 if spec.dim == 2 else 201)
        ug = evaluate_interpolant(state, grid)
        sol = solve_dense(kernel, state.selected_functionals, cands.values[state.selected])
        ud = sol.evaluate(kernel, grid)
        worst_u = max(worst_u, float(np.max(np.abs(ug - ud)) / np.max(np.abs(ud))))
        pd2 = powers_dense(kernel, state.selected_functionals, cands.points, cands.ops) ** 2
        diag = powers_dense(kernel, [], cands.points, cands.ops) ** 2
        worst_p = max(worst_p, float(np.max(np.abs(state.cand_power2 - pd2) / diag)))
    ok = worst_u <= 1e-8 and worst_p <= 1e-8
    return CheckResult("oracle_equivalence", ok, f"interpolant {worst_u:.2e}, squared power {worst_p:.2e} (tol 1e-8)")


def check_monotonicity() -> CheckResult:
    bad = []
    for name, beta, spec, kernel, cands, cfg in _runs(n=30):
        prev = {"p2": None, "norm": 0.0, "worst_r": 0.0}
        scale = float(np.max(np.abs(cands.values)))

        def cb(state, rec):
            p2 = state.cand_power2.copy()
            if prev["p2"] is not None and np.any(p2 > prev["p2"]):
                bad.append(f"{name}/beta={beta}: power increased at n={rec.n}")
            norm = state.norm2()
            if norm < prev["norm"]:
                bad.append(f"{name}/beta={beta}: norm decreased at n={rec.n}")
            z = state.newton_z
            fitted = z @ state.coefficients
            r = float(np.max(np.abs(fitted - state.data[state.selected])))
            if r > 1e-8 * scale or np.max(state.cand_power2[state.selected]) > 1e-14:
                bad.append(f"{name}/beta={beta}: constraint violated at n={rec.n}")
            prev.update(p2=p2, norm=norm)

        run(kernel, spec, cands, cfg, callback=cb)
    return CheckResult("monotonicity_and_constraints", not bad, "ok" if not bad else "; ".join(bad[:5]))


def selection_csv(records, candidates: CandidateSet) -> str:
    buf = io.StringIO()
    header, rows = trace_rows(records, candidates, include_timing=False)
    write_csv(buf, header, rows)
    return buf.getvalue()


def check_determinism() -> CheckResult:
    spec = get_problem("poisson_2d")
    kernel = MaternKernel("7/2", 1.0)
    cands = generate_candidates(spec, [1200, 120], seed=3)
    again = generate_candidates(spec, [1200, 120], seed=3)
    same_pool = np.array_equal(cands.points, again.points)
    ok = same_pool
    for beta in (0.5, 1.0):
        outputs = []
        for threads in (1, 4, 8, 1):
            _, recs = run(kernel, spec, cands, GreedyConfig(beta=beta, n_max=40, threads=threads))
            outputs.append(selection_csv(recs, cands))
        ok = ok and all(o == outputs[0] for o in outputs)
    return CheckResult("determinism", ok, "identical traces for threads 1/4/8" if ok else "traces differ")


CHECKS = {
    "kernel_finite_differences": check_kernel_fd,
    "kernel_constants": check_kernel_constants,
    "oracle_equivalence": check_oracle_equivalence,
    "monotonicity_and_constraints": check_monotonicity,
    "determinism": check_determinism,
}


def run_checks(kernel: MaternKernel | None = None) -> list[CheckResult]:
    """Run all checks; ``kernel`` replaces the sampled kernels in the kernel checks."""
    results = []
    for name, fn in CHECKS.items():
        try:
            if name in ("kernel_finite_differences", "kernel_constants"):
                results.append(fn(kernel))
            else:
                results.append(fn())
        except Exception as exc:  # a crashing check is a failed check
            results.append(CheckResult(name, False, f"{type(exc).__name__}: {exc}"))
    return results

"""Run configuration loaded from JSON."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .greedy import GreedyConfig
from .kernels import MaternKernel
from .problems import ProblemSpec, default_counts, get_problem, problem_from_config


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Everything needed to reproduce one ``solve`` or ``study`` invocation.

    ``problem`` is a built-in name or an inline problem mapping;
    ``candidates`` lists per-piece pool sizes (defaults depend on the problem);
    ``fit_window`` is ``[n_lo, n_hi]`` for the log-log fits.
    """

    problem: str | dict = "poisson_2d"
    kernel: dict = field(default_factory=lambda: {"family": "matern", "nu": "7/2", "shape": 1.0})
    betas: list[float] = field(default_factory=lambda: [1.0])
    n_max: int = 100
    candidates: list[int] | None = None
    test_resolution: int | None = None
    seed: int = 0
    power_tol: float = 1e-7
    eta_tol: float = 0.0
    threads: int | None = None
    out: str = "results"
    fit_window: list[int] | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        if "beta" in data:
            if "betas" in data:
                raise ConfigError("give either 'beta' or 'betas', not both")
            data["betas"] = data.pop("beta")
        if "betas" in data and not isinstance(data["betas"], list):
            data["betas"] = [data["betas"]]
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> None:
        try:
            self.betas = [float(b) for b in self.betas]
            self.n_max = int(self.n_max)
            self.seed = int(self.seed)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        if not self.betas:
            raise ConfigError("at least one beta is required")
        if any(b < 0 for b in self.betas):
            raise ConfigError("beta values must be >= 0")
        if self.n_max < 1:
            raise ConfigError("n_max must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        if self.fit_window is not None:
            if len(self.fit_window) != 2 or not 1 <= self.fit_window[0] < self.fit_window[1]:
                raise ConfigError("fit_window must be [n_lo, n_hi] with 1 <= n_lo < n_hi")
            self.fit_window = [int(v) for v in self.fit_window]
        try:
            self.greedy(self.betas[0])
            self.make_kernel()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def make_problem(self) -> ProblemSpec:
        try:
            if isinstance(self.problem, str):
                return get_problem(self.problem)
            return problem_from_config(self.problem)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid problem: {exc}") from None

    def make_kernel(self) -> MaternKernel:
        return MaternKernel.from_config(self.kernel)

    def counts(self, spec: ProblemSpec) -> list[int]:
        if self.candidates is None:
            return default_counts(spec, 2000 if spec.dim == 1 else 2500)
        if len(self.candidates) != spec.n_pieces:
            raise ConfigError(f"'candidates' needs {spec.n_pieces} entries for problem {spec.name}")
        return [int(c) for c in self.candidates]

    def greedy(self, beta: float) -> GreedyConfig:
        return GreedyConfig(beta=beta, n_max=self.n_max, power_tol=self.power_tol,
                            eta_tol=self.eta_tol, threads=self.threads)

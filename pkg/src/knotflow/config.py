"""Run and sweep configuration: JSON parsing, validation, derived values.

Time steps are given either directly (``tau``) or as a rule relative to the
maximal polyline edge h of the discretized initial curve: sqrt -> h^(1/2)/5,
lin -> h/5, quad -> h^2/5.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
import json

import numpy as np

from .curve import HermiteCurve
from .flow import METRICS, FlowParams, PerturbSchedule
from .knots import build_curve, preset_names
from .storage import load_snapshot
from .tangent_point import TpParams

__all__ = [
    "ConfigError",
    "RunConfig",
    "SweepConfig",
    "TAU_RULES",
    "load_run_config",
    "load_sweep_config",
    "max_edge",
    "resolve_tau",
]

TAU_RULES = ("sqrt", "lin", "quad")


class ConfigError(ValueError):
    """Configuration file cannot be parsed or fails validation."""


def max_edge(curve: HermiteCurve) -> float:
    edges = np.linalg.norm(
        np.roll(curve.positions, -1, axis=0) - curve.positions, axis=1
    )
    return float(np.max(edges))


def resolve_tau(rule: str, h: float) -> float:
    if rule == "sqrt":
        return float(np.sqrt(h)) / 5.0
    if rule == "lin":
        return h / 5.0
    if rule == "quad":
        return h * h / 5.0
    raise ConfigError(f"unknown tau rule {rule!r}")


@dataclass(frozen=True)
class RunConfig:
    """One seeded flow run: source curve, parameters, artifact plan."""

    source: str
    n: int | None = None
    length: float | None = None
    kappa: float = 1.0
    rho: float = 0.1
    tau: float | None = None
    tau_rule: str | None = None
    q: float = 3.0
    epsilon: float | None = None
    gauss_order: int = 2
    metric: str = "H2"
    hr_exponent: float = 2.0
    perturb_period: int | None = None
    perturb_amplitude: float = 1.0e-3
    n_steps: int = 50
    snapshot_every: int = 50
    seed: int = 0
    out_dir: str = "out"

    def __post_init__(self):
        if (self.tau is None) == (self.tau_rule is None):
            raise ConfigError("exactly one of tau and tau_rule is required")
        if self.tau_rule is not None and self.tau_rule not in TAU_RULES:
            raise ConfigError(f"tau_rule must be one of {TAU_RULES}")
        if self.metric not in METRICS:
            raise ConfigError(f"metric must be one of {METRICS}")
        if self.n_steps < 0:
            raise ConfigError("n_steps must be nonnegative")
        if self.snapshot_every < 1:
            raise ConfigError("snapshot_every must be at least 1")
        if self.n is not None and self.n < 3:
            raise ConfigError("n must be at least 3")

    def build_curve(self) -> HermiteCurve:
        if self.source in preset_names():
            return build_curve(self.source, n=self.n, length=self.length)
        path = Path(self.source)
        if not path.exists():
            raise ConfigError(
                f"source {self.source!r} is neither a preset nor a file"
            )
        curve, _ = load_snapshot(path)
        return curve

    def flow_params(self, curve: HermiteCurve) -> FlowParams:
        tau = self.tau if self.tau is not None else resolve_tau(
            self.tau_rule, max_edge(curve)
        )
        schedule = None
        if self.perturb_period is not None:
            schedule = PerturbSchedule(
                period=self.perturb_period, amplitude=self.perturb_amplitude
            )
        try:
            return FlowParams(
                kappa=self.kappa,
                rho=self.rho,
                tau=tau,
                tp=TpParams(
                    q=self.q, epsilon=self.epsilon, gauss_order=self.gauss_order
                ),
                metric=self.metric,
                hr_exponent=self.hr_exponent,
                perturb=schedule,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class SweepConfig:
    """Verdict-table grid: every (kappa, rho) block crossed with n and tau rule."""

    preset: str = "five_two"
    kappas: tuple[float, ...] = (1.0,)
    rhos: tuple[float, ...] = (0.1,)
    nodes: tuple[int, ...] = (50, 100)
    tau_rules: tuple[str, ...] = TAU_RULES
    q: float = 3.0
    gauss_order: int = 2
    n_steps: int = 100
    seed: int = 0
    out_dir: str = "sweep"

    def __post_init__(self):
        if not (self.kappas and self.rhos and self.nodes and self.tau_rules):
            raise ConfigError("sweep grid must be nonempty")
        if self.preset not in preset_names():
            raise ConfigError(f"unknown preset {self.preset!r}")
        for rule in self.tau_rules:
            if rule not in TAU_RULES:
                raise ConfigError(f"tau_rule must be one of {TAU_RULES}")
        if not 50 <= self.n_steps <= 100:
            raise ConfigError("sweep runs 50 to 100 steps per cell")

    def cells(self) -> list["RunConfig"]:
        out = []
        for kappa in self.kappas:
            for rho in self.rhos:
                for n in self.nodes:
                    for rule in self.tau_rules:
                        out.append(
                            RunConfig(
                                source=self.preset,
                                n=n,
                                kappa=kappa,
                                rho=rho,
                                tau_rule=rule,
                                q=self.q,
                                gauss_order=self.gauss_order,
                                n_steps=self.n_steps,
                                snapshot_every=max(self.n_steps, 1),
                                seed=self.seed,
                                out_dir=self.out_dir,
                            )
                        )
        return out


_RUN_KEYS = {
    "source",
    "n",
    "length",
    "kappa",
    "rho",
    "tau",
    "tau_rule",
    "q",
    "epsilon",
    "gauss_order",
    "metric",
    "hr_exponent",
    "perturb_period",
    "perturb_amplitude",
    "n_steps",
    "snapshot_every",
    "seed",
    "out_dir",
}

_SWEEP_KEYS = {
    "preset",
    "kappas",
    "rhos",
    "nodes",
    "tau_rules",
    "q",
    "gauss_order",
    "n_steps",
    "seed",
    "out_dir",
}


def _load_json(path: str | Path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def load_run_config(path: str | Path) -> RunConfig:
    data = _load_json(path)
    unknown = set(data) - _RUN_KEYS
    if unknown:
        raise ConfigError(f"unknown run config keys: {sorted(unknown)}")
    if "source" not in data:
        raise ConfigError("run config needs a source")
    try:
        return RunConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_sweep_config(path: str | Path) -> SweepConfig:
    data = _load_json(path)
    unknown = set(data) - _SWEEP_KEYS
    if unknown:
        raise ConfigError(f"unknown sweep config keys: {sorted(unknown)}")
    for key in ("kappas", "rhos", "nodes", "tau_rules"):
        if key in data:
            data[key] = tuple(data[key])
    try:
        return SweepConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc

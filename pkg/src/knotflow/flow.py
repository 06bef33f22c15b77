"""Semi-implicit descent for the combined bending and self-avoidance energy.

Each step solves one sparse saddle-point system: the metric mass plus scaled
stiffness acts blockwise per coordinate, and one scalar constraint row per
node freezes the tangential component of the nodal derivative update, which
keeps the parametrization speed from drifting.  The self-avoidance force is
taken explicitly at the previous iterate.

Curves live on the periodic unit interval while the energy and the time grid
are physical: with speed constant L, mass pairs as L*M, second derivatives as
S/L^3, and the self-avoidance force picks up L^(2-q).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .bending import (
    first_derivative_matrix,
    mass_matrix,
    pack_dofs,
    stiffness_matrix,
    unpack_dofs,
)
from .curve import HermiteCurve
from .diagnostics import (
    DiagnosticsRecord,
    arclength_deviation,
    bilipschitz,
    isotopy_monitor,
    min_pair_distance,
    stability_verdict,
)
from .tangent_point import (
    NonEmbeddedError,
    QuadratureRule,
    TpParams,
    build_quadrature,
    tp_energy,
    tp_first_variation,
)

__all__ = [
    "FlowParams",
    "FlowState",
    "FlowAborted",
    "PerturbSchedule",
    "SaddleSystem",
    "SolveFailure",
    "Stepper",
    "initial_state",
    "initial_record",
    "perturb",
    "run",
    "step",
]

METRICS = ("H2", "H2_full", "discrete_hr")
RESIDUAL_TOL = 1.0e-10


class SolveFailure(RuntimeError):
    """Saddle system could not be solved to the required residual."""


class FlowAborted(RuntimeError):
    """A step failed; carries the failing step index and records so far."""

    def __init__(self, step_index: int, records: list, cause: Exception):
        super().__init__(f"flow aborted at step {step_index}: {cause}")
        self.step_index = step_index
        self.records = records
        self.cause = cause


@dataclass(frozen=True)
class PerturbSchedule:
    """Randomized kick applied every ``period`` steps at RMS amplitude*L."""

    period: int = 100
    amplitude: float = 1.0e-3

    def __post_init__(self):
        if self.period < 1:
            raise ValueError("period must be at least 1")
        if self.amplitude < 0.0:
            raise ValueError("amplitude must be nonnegative")


@dataclass(frozen=True)
class FlowParams:
    """Step prescription: weights, time step, metric, and kick schedule."""

    kappa: float
    rho: float
    tau: float
    tp: TpParams = TpParams()
    metric: str = "H2"
    hr_exponent: float = 2.0
    perturb: PerturbSchedule | None = None

    def __post_init__(self):
        if self.kappa < 0.0:
            raise ValueError("kappa must be nonnegative")
        if self.rho < 0.0:
            raise ValueError("rho must be nonnegative")
        if self.tau <= 0.0:
            raise ValueError("tau must be positive")
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")
        if self.hr_exponent <= 0.0:
            raise ValueError("hr_exponent must be positive")


@dataclass
class FlowState:
    """Mutable bookkeeping for one evolution."""

    curve: HermiteCurve
    step_index: int
    prev_energy: float
    tangents_prev: np.ndarray
    rng_seed: int
    speed: float
    rng: np.random.Generator = field(repr=False, default=None)

    def __post_init__(self):
        if self.rng is None:
            self.rng = np.random.default_rng(self.rng_seed)


@dataclass(frozen=True)
class SaddleSystem:
    """One step's linear system in scalar-block form.

    The full operator is [[A, B^T], [B, 0]] where A applies the scalar matrix
    to each coordinate and constraint row i reads the tangential component of
    derivative dof i.  ``full_matrix``/``full_rhs`` materialize the coupled
    system for cross-checks and the iterative fallback.
    """

    matrix_scalar: sp.csr_matrix
    tangents: np.ndarray
    rhs: np.ndarray
    constraint_rhs: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.tangents.shape[0]

    def full_matrix(self) -> sp.csr_matrix:
        n = self.n_nodes
        m = 2 * n
        a_full = sp.kron(sp.eye(3), self.matrix_scalar, format="csr")
        rows = np.repeat(np.arange(n), 3)
        cols = np.concatenate(
            [c * m + 2 * np.arange(n) + 1 for c in range(3)]
        ).reshape(3, n).T.ravel()
        b = sp.csr_matrix(
            (self.tangents.ravel(), (rows, cols)), shape=(n, 3 * m)
        )
        zero = sp.csr_matrix((n, n))
        return sp.bmat([[a_full, b.T], [b, zero]], format="csr")

    def full_rhs(self) -> np.ndarray:
        return np.concatenate([self.rhs.T.ravel(), self.constraint_rhs])

    def split_solution(self, vec: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n = self.n_nodes
        m = 2 * n
        dofs = vec[: 3 * m].reshape(3, m).T.copy()
        return dofs, vec[3 * m :].copy()

    def residual(self, dofs: np.ndarray, multipliers: np.ndarray) -> float:
        r1 = self.matrix_scalar @ dofs - self.rhs
        r1[1::2] += multipliers[:, None] * self.tangents
        r2 = (
            np.sum(dofs[1::2] * self.tangents, axis=1) - self.constraint_rhs
        )
        scale = np.linalg.norm(self.rhs) + np.linalg.norm(self.constraint_rhs)
        if scale == 0.0:
            scale = 1.0
        return float(
            np.sqrt(np.linalg.norm(r1) ** 2 + np.linalg.norm(r2) ** 2) / scale
        )


class Stepper:
    """Caches the factorized metric operator for one (partition, params) run."""

    def __init__(self, curve0: HermiteCurve, params: FlowParams, speed: float):
        self.params = params
        self.partition = curve0.partition
        self.speed = float(speed)
        if self.speed <= 0.0:
            raise ValueError("speed constant must be positive")
        self.rule: QuadratureRule = build_quadrature(self.partition, params.tp)
        edges = np.linalg.norm(
            np.roll(curve0.positions, -1, axis=0) - curve0.positions, axis=1
        )
        self.h_phys = float(np.max(edges))

        n = self.partition.nodes.size
        self.n_nodes = n
        mass = mass_matrix(self.partition)
        stiff = stiffness_matrix(self.partition)
        length = self.speed
        self.stiff_phys = stiff / length**3
        metric = length * mass + self.stiff_phys
        if params.metric == "H2_full":
            metric = metric + first_derivative_matrix(self.partition) / length
        elif params.metric == "discrete_hr":
            metric = (
                length * mass
                + (self.h_phys**params.hr_exponent) * self.stiff_phys
            )
        self.metric_mass = metric.tocsr()

        system = (self.metric_mass + params.tau * params.kappa * self.stiff_phys).tocsc()
        self.system_scalar = system.tocsr()
        self.factor = spla.splu(system)
        unit_cols = np.zeros((2 * n, n))
        unit_cols[2 * np.arange(n) + 1, np.arange(n)] = 1.0
        influence = self.factor.solve(unit_cols)
        self.influence = influence
        self.influence_deriv = influence[2 * np.arange(n) + 1, :]

    def energy_split(self, curve: HermiteCurve) -> tuple[float, float]:
        """(bending, weighted self-avoidance) in physical units."""
        from .bending import bending_energy

        length = self.speed
        e_bend = bending_energy(curve, self.params.kappa) / length**3
        e_tp = 0.0
        if self.params.rho > 0.0:
            e_tp = (
                self.params.rho
                * length ** (2.0 - self.params.tp.q)
                * tp_energy(curve, self.params.tp, self.rule)
            )
        return float(e_bend), float(e_tp)

    def assemble(self, curve: HermiteCurve) -> SaddleSystem:
        params = self.params
        dofs = pack_dofs(curve.positions, curve.derivatives)
        force = np.zeros_like(dofs)
        if params.rho > 0.0:
            grad = tp_first_variation(curve, params.tp, self.rule)
            force = (
                params.rho
                * self.speed ** (2.0 - params.tp.q)
                * grad.as_dofs()
            )
        rhs = self.metric_mass @ dofs - params.tau * force
        tangents = np.array(curve.derivatives)
        constraint_rhs = np.sum(dofs[1::2] * tangents, axis=1)
        return SaddleSystem(self.system_scalar, tangents, rhs, constraint_rhs)

    def solve(self, system: SaddleSystem) -> tuple[np.ndarray, np.ndarray]:
        unconstrained = self.factor.solve(system.rhs)
        tangents = system.tangents
        gram = tangents @ tangents.T
        schur = self.influence_deriv * gram
        defect = (
            np.sum(unconstrained[1::2] * tangents, axis=1)
            - system.constraint_rhs
        )
        try:
            multipliers = scipy.linalg.solve(schur, defect, assume_a="pos")
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise SolveFailure("constraint block is singular") from exc
        dofs = unconstrained - self.influence @ (multipliers[:, None] * tangents)

        res = system.residual(dofs, multipliers)
        if res > RESIDUAL_TOL:
            dofs, multipliers, res = self._fallback(system, dofs, multipliers)
        if res > RESIDUAL_TOL:
            raise SolveFailure(f"residual {res:.3e} above tolerance")
        return dofs, multipliers

    def _fallback(self, system, dofs, multipliers):
        full = system.full_matrix()
        rhs = system.full_rhs()
        x0 = np.concatenate([dofs.T.ravel(), multipliers])
        sol, _ = spla.minres(full, rhs, x0=x0, rtol=1.0e-13, maxiter=2000)
        dofs, multipliers = system.split_solution(sol)
        return dofs, multipliers, system.residual(dofs, multipliers)

    def step_with_split(
        self, state: FlowState
    ) -> tuple[FlowState, tuple[float, float]]:
        system = self.assemble(state.curve)
        dofs, _ = self.solve(system)
        positions, derivatives = unpack_dofs(dofs)
        curve = state.curve.with_data(positions, derivatives)
        split = self.energy_split(curve)
        new_state = replace(
            state,
            curve=curve,
            step_index=state.step_index + 1,
            prev_energy=split[0] + split[1],
            tangents_prev=np.array(state.curve.derivatives),
        )
        return new_state, split

    def step(self, state: FlowState) -> FlowState:
        return self.step_with_split(state)[0]


def initial_state(
    curve: HermiteCurve, params: FlowParams, seed: int = 0
) -> FlowState:
    """Bookkeeping for a fresh run; fixes the speed constant from the curve."""
    stepper = Stepper(curve, params, curve.speed)
    e_bend, e_tp = stepper.energy_split(curve)
    return FlowState(
        curve=curve,
        step_index=0,
        prev_energy=e_bend + e_tp,
        tangents_prev=np.array(curve.derivatives),
        rng_seed=seed,
        speed=curve.speed,
    )


def perturb(
    curve: HermiteCurve, amplitude: float, rng: np.random.Generator
) -> HermiteCurve:
    """Random nodal kick of RMS amplitude*L with tangential drift removed.

    Positions and derivatives receive independent Gaussian fields whose
    per-node vector RMS is amplitude times the curve's speed constant; the
    derivative noise is then projected off the current tangent direction at
    every node so the linearized arclength condition is untouched.  Zero
    amplitude returns the curve unchanged without consuming randomness.
    """
    if amplitude < 0.0:
        raise ValueError("amplitude must be nonnegative")
    if amplitude == 0.0:
        return curve
    n = curve.positions.shape[0]
    sigma = amplitude * curve.speed / np.sqrt(3.0)
    noise_pos = rng.normal(0.0, sigma, size=(n, 3))
    noise_der = rng.normal(0.0, sigma, size=(n, 3))
    tangents = curve.derivatives
    unit = tangents / np.linalg.norm(tangents, axis=1, keepdims=True)
    noise_der = noise_der - np.sum(noise_der * unit, axis=1, keepdims=True) * unit
    return curve.with_data(
        curve.positions + noise_pos, curve.derivatives + noise_der
    )


def _record(
    state: FlowState,
    split: tuple[float, float],
    stable: bool,
    isotopy_ok: bool,
    bil: float,
) -> DiagnosticsRecord:
    e_bend, e_tp = split
    return DiagnosticsRecord(
        step=state.step_index,
        e_total=e_bend + e_tp,
        e_bend=e_bend,
        e_tp_weighted=e_tp,
        length=state.curve.polyline_length,
        arclength_dev=arclength_deviation(
            state.curve, state.speed, include_midpoints=False
        ),
        bilipschitz=bil,
        min_pair_dist=min_pair_distance(state.curve),
        stable=stable,
        isotopy_ok=isotopy_ok,
    )


def initial_record(state: FlowState, params: FlowParams) -> DiagnosticsRecord:
    """Step-zero row: monitors that compare steps default to passing."""
    stepper = Stepper(state.curve, params, state.speed)
    split = stepper.energy_split(state.curve)
    return _record(state, split, True, True, bilipschitz(state.curve))


def run(
    state: FlowState,
    params: FlowParams,
    n_steps: int,
    hooks: Callable[[DiagnosticsRecord], None]
    | Sequence[Callable[[DiagnosticsRecord], None]]
    | None = None,
    bilipschitz_every: int = 25,
) -> tuple[FlowState, list[DiagnosticsRecord]]:
    """Advance n_steps, emitting one DiagnosticsRecord per completed step.

    The kick schedule fires before the step whenever the incoming step index
    is a positive multiple of the period, and the energy baseline for that
    step's stability verdict is re-measured after the kick.  A failed step
    raises FlowAborted carrying the records gathered so far.  Given the same
    seed and schedule the emitted stream is bitwise reproducible, also when
    the run is split into chunks.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    callbacks: Iterable[Callable]
    if hooks is None:
        callbacks = ()
    elif callable(hooks):
        callbacks = (hooks,)
    else:
        callbacks = tuple(hooks)

    stepper = Stepper(state.curve, params, state.speed)
    records: list[DiagnosticsRecord] = []
    last_bil = np.nan
    for local in range(n_steps):
        schedule = params.perturb
        if (
            schedule is not None
            and state.step_index > 0
            and state.step_index % schedule.period == 0
        ):
            kicked = perturb(state.curve, schedule.amplitude, state.rng)
            split0 = stepper.energy_split(kicked)
            state = replace(
                state,
                curve=kicked,
                prev_energy=split0[0] + split0[1],
                tangents_prev=np.array(kicked.derivatives),
            )
        e_prev = state.prev_energy
        prev_curve = state.curve
        try:
            state, split = stepper.step_with_split(state)
        except (SolveFailure, NonEmbeddedError) as exc:
            raise FlowAborted(state.step_index + 1, records, exc) from exc

        stable = stability_verdict(e_prev, split[0] + split[1], params.tau)
        isotopy_ok = isotopy_monitor(prev_curve, state.curve)
        if local % bilipschitz_every == 0 or not np.isfinite(last_bil):
            try:
                last_bil = bilipschitz(state.curve, sample_density=4)
            except NonEmbeddedError as exc:
                raise FlowAborted(state.step_index, records, exc) from exc
        rec = _record(state, split, stable, isotopy_ok, last_bil)
        records.append(rec)
        for cb in callbacks:
            cb(rec)
    return state, records


def step(state: FlowState, params: FlowParams) -> FlowState:
    """One step with a freshly built solver; reuse Stepper for long runs."""
    return Stepper(state.curve, params, state.speed).step(state)

"""Session service: live relaxations steered over HTTP and a frame stream.

One worker thread per session owns the flow state.  Control actions are
validated synchronously in the request handler, queued, and drained at step
boundaries, so every emitted frame is a consistent post-step state.  Frames
are decimated by step stride (not wall clock) to keep the stream
deterministic for a fixed seed and action script.
"""

from __future__ import annotations

import itertools
import json
import queue
import threading
import time
from contextlib import asynccontextmanager
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles
from starlette.concurrency import run_in_threadpool

from .curve import HermiteCurve
from .diagnostics import (
    bilipschitz,
    isotopy_monitor,
    stability_verdict,
)
from .flow import (
    FlowParams,
    FlowState,
    SolveFailure,
    Stepper,
    _record,
    initial_state,
    perturb as apply_perturb,
)
from .knots import build_curve, preset_names
from .storage import SNAPSHOT_FORMAT, curvature_attribute
from .tangent_point import NonEmbeddedError, TpParams

__all__ = ["SCHEMA_VERSION", "Session", "SessionRegistry", "create_app"]

SCHEMA_VERSION = 1
_IDLE_WAIT = 0.05
_BILIPSCHITZ_EVERY = 25


def _diag_dict(record) -> dict:
    """Plain JSON types only; numpy scalars are not serializable."""
    out = {}
    for key, value in asdict(record).items():
        if isinstance(value, (bool, np.bool_)):
            out[key] = bool(value)
        elif isinstance(value, (int, np.integer)):
            out[key] = int(value)
        else:
            out[key] = float(value)
    return out


def _params_from_payload(payload: dict, base: FlowParams | None = None) -> FlowParams:
    """Merge a flat partial parameter dict onto base; raises ValueError."""
    known = {
        "kappa", "rho", "tau", "q", "epsilon", "gauss_order",
        "metric", "hr_exponent",
    }
    unknown = set(payload) - known
    if unknown:
        raise ValueError(f"unknown parameter keys: {sorted(unknown)}")
    if base is None:
        base_tp = TpParams()
        get = payload.get
        tp = TpParams(
            q=get("q", base_tp.q),
            epsilon=get("epsilon", base_tp.epsilon),
            gauss_order=get("gauss_order", base_tp.gauss_order),
        )
        return FlowParams(
            kappa=payload.get("kappa", 1.0),
            rho=payload.get("rho", 0.1),
            tau=payload["tau"] if "tau" in payload else 1.0e-3,
            tp=tp,
            metric=payload.get("metric", "H2"),
            hr_exponent=payload.get("hr_exponent", 2.0),
        )
    tp = TpParams(
        q=payload.get("q", base.tp.q),
        epsilon=payload.get("epsilon", base.tp.epsilon),
        gauss_order=payload.get("gauss_order", base.tp.gauss_order),
    )
    return FlowParams(
        kappa=payload.get("kappa", base.kappa),
        rho=payload.get("rho", base.rho),
        tau=payload.get("tau", base.tau),
        tp=tp,
        metric=payload.get("metric", base.metric),
        hr_exponent=payload.get("hr_exponent", base.hr_exponent),
        perturb=base.perturb,
    )


class Session:
    """One live relaxation: flow state, worker loop, subscriber fan-out."""

    def __init__(
        self,
        session_id: str,
        curve: HermiteCurve,
        params: FlowParams,
        seed: int,
        frame_stride: int = 1,
    ):
        if frame_stride < 1:
            raise ValueError("frame_stride must be at least 1")
        self.id = session_id
        self.initial_curve = curve
        self.initial_params = params
        self.seed = seed
        self.frame_stride = frame_stride

        self.lock = threading.Lock()
        self.controls: queue.Queue = queue.Queue()
        self.subscribers: list[queue.Queue] = []
        self.status = "paused"
        self.pending_steps = 0
        self.error: str | None = None
        self.params = params
        self.state = initial_state(curve, params, seed=seed)
        self.stepper = Stepper(curve, params, self.state.speed)
        self._last_bil = bilipschitz(curve, sample_density=4)
        self._steps_since_bil = 0
        self._stop = False
        self.thread = threading.Thread(target=self._loop, daemon=True)
        self.thread.start()

    # ---- control plane (handler side) ------------------------------------

    def submit(self, action: str, payload: dict) -> dict:
        """Validate synchronously, queue for the worker; returns the ack."""
        if self.error is not None:
            raise ValueError(f"session failed: {self.error}")
        if action == "start":
            self.controls.put(("start", None))
        elif action == "pause":
            self.controls.put(("pause", None))
        elif action == "step_n":
            n = payload.get("n")
            if not isinstance(n, int) or n < 0:
                raise ValueError("step_n needs an integer n >= 0")
            self.controls.put(("step_n", n))
        elif action == "perturb":
            amplitude = payload.get("amplitude")
            if not isinstance(amplitude, (int, float)) or amplitude < 0.0:
                raise ValueError("perturb needs an amplitude >= 0")
            self.controls.put(("perturb", float(amplitude)))
        elif action == "set_params":
            partial = payload.get("params")
            if not isinstance(partial, dict):
                raise ValueError("set_params needs a params object")
            with self.lock:
                candidate = _params_from_payload(partial, self.params)
            self.controls.put(("set_params", candidate))
        elif action == "reset":
            self.controls.put(("reset", None))
        else:
            raise ValueError(f"unknown action {action!r}")
        return {"ok": True, "action": action}

    def subscribe(self) -> queue.Queue:
        q: queue.Queue = queue.Queue()
        with self.lock:
            frame = self._frame(self._current_record())
            self.subscribers.append(q)
        q.put(frame)
        return q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self.lock:
            if q in self.subscribers:
                self.subscribers.remove(q)

    def snapshot(self) -> dict:
        with self.lock:
            return {
                "format": SNAPSHOT_FORMAT,
                "version": 1,
                "step": self.state.step_index,
                "seed": self.seed,
                "speed": self.state.speed,
                "status": self.status,
                "error": self.error,
                "params": self._params_dict(),
                "curve": self.state.curve.to_snapshot(),
            }

    def stop(self) -> None:
        self._stop = True
        self.thread.join(timeout=5.0)

    # ---- worker side -----------------------------------------------------

    def _loop(self) -> None:
        while not self._stop:
            drained = False
            while True:
                try:
                    msg = self.controls.get_nowait()
                except queue.Empty:
                    break
                drained = True
                self._apply(msg)
            active = self.error is None and (
                self.status == "running" or self.pending_steps > 0
            )
            if active:
                self._step_once()
            elif not drained:
                time.sleep(_IDLE_WAIT)

    def _apply(self, msg) -> None:
        kind, arg = msg
        if kind == "start":
            self.status = "running"
        elif kind == "pause":
            # no frame here: a pause emit could repeat an already emitted
            # step and break strict ordering; clients read GET snapshot
            self.status = "paused"
            self.pending_steps = 0
        elif kind == "step_n":
            self.pending_steps += arg
        elif kind == "perturb":
            with self.lock:
                state = self.state
                kicked = apply_perturb(state.curve, arg, state.rng)
                split = self.stepper.energy_split(kicked)
                self.state = replace(
                    state,
                    curve=kicked,
                    prev_energy=split[0] + split[1],
                    tangents_prev=np.array(kicked.derivatives),
                )
        elif kind == "set_params":
            with self.lock:
                self.params = arg
                self.stepper = Stepper(self.state.curve, arg, self.state.speed)
                split = self.stepper.energy_split(self.state.curve)
                self.state = replace(
                    self.state, prev_energy=split[0] + split[1]
                )
        elif kind == "reset":
            with self.lock:
                self.params = self.initial_params
                self.state = initial_state(
                    self.initial_curve, self.initial_params, seed=self.seed
                )
                self.stepper = Stepper(
                    self.initial_curve, self.initial_params, self.state.speed
                )
                self.status = "paused"
                self.pending_steps = 0
                self.error = None
                self._last_bil = bilipschitz(self.initial_curve, sample_density=4)
                self._steps_since_bil = 0
            self._broadcast(self._frame(self._current_record()))

    def _step_once(self) -> None:
        batch_step = self.pending_steps > 0
        e_prev = self.state.prev_energy
        prev_curve = self.state.curve
        try:
            new_state, split = self.stepper.step_with_split(self.state)
        except (SolveFailure, NonEmbeddedError) as exc:
            self.error = f"step {self.state.step_index + 1} failed: {exc}"
            self.status = "paused"
            self.pending_steps = 0
            return
        stable = stability_verdict(e_prev, split[0] + split[1], self.params.tau)
        isotopy_ok = isotopy_monitor(prev_curve, new_state.curve)
        self._steps_since_bil += 1
        if self._steps_since_bil >= _BILIPSCHITZ_EVERY:
            try:
                self._last_bil = bilipschitz(new_state.curve, sample_density=4)
            except NonEmbeddedError as exc:
                self.error = f"step {new_state.step_index} failed: {exc}"
                self.status = "paused"
                self.pending_steps = 0
                return
            self._steps_since_bil = 0
        with self.lock:
            self.state = new_state
            if batch_step:
                self.pending_steps -= 1
        record = _record(new_state, split, stable, isotopy_ok, self._last_bil)
        last_of_batch = batch_step and self.pending_steps == 0
        if new_state.step_index % self.frame_stride == 0 or last_of_batch:
            self._broadcast(self._frame(record))

    def _current_record(self):
        state = self.state
        split = self.stepper.energy_split(state.curve)
        return _record(state, split, True, True, self._last_bil)

    def _params_dict(self) -> dict:
        p = self.params
        return {
            "kappa": p.kappa,
            "rho": p.rho,
            "tau": p.tau,
            "q": p.tp.q,
            "epsilon": p.tp.epsilon,
            "gauss_order": p.tp.gauss_order,
            "metric": p.metric,
            "hr_exponent": p.hr_exponent,
        }

    def _frame(self, record) -> dict:
        curve = self.state.curve
        return {
            "v": SCHEMA_VERSION,
            "session": self.id,
            "step": record.step,
            "positions": curve.positions.ravel().tolist(),
            "curvature": curvature_attribute(curve).tolist(),
            "diagnostics": _diag_dict(record),
        }

    def _broadcast(self, frame: dict) -> None:
        with self.lock:
            targets = list(self.subscribers)
        for q in targets:
            q.put(frame)


class SessionRegistry:
    def __init__(self):
        self.lock = threading.Lock()
        self.sessions: dict[str, Session] = {}
        self._counter = itertools.count(1)

    def create(self, curve, params, seed, frame_stride) -> Session:
        with self.lock:
            session_id = f"s{next(self._counter)}"
            session = Session(session_id, curve, params, seed, frame_stride)
            self.sessions[session_id] = session
            return session

    def get(self, session_id: str) -> Session:
        with self.lock:
            session = self.sessions.get(session_id)
        if session is None:
            raise KeyError(session_id)
        return session

    def stop_all(self) -> None:
        with self.lock:
            sessions = list(self.sessions.values())
        for s in sessions:
            s.stop()


def create_app() -> FastAPI:
    registry = SessionRegistry()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        registry.stop_all()

    app = FastAPI(title="knotflow session service", lifespan=lifespan)
    app.state.registry = registry

    def _session_or_404(session_id: str) -> Session:
        try:
            return registry.get(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown session")

    @app.post("/sessions", status_code=201)
    def create_session(payload: dict):
        try:
            if "curve" in payload:
                curve = HermiteCurve.from_snapshot(payload["curve"])
            else:
                source = payload.get("source")
                if source not in preset_names():
                    raise ValueError(f"unknown preset {source!r}")
                curve = build_curve(
                    source, n=payload.get("n"), length=payload.get("length")
                )
            params = _params_from_payload(payload.get("params", {}))
            seed = int(payload.get("seed", 0))
            frame_stride = int(payload.get("frame_stride", 1))
            session = registry.create(curve, params, seed, frame_stride)
        except (ValueError, NonEmbeddedError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"id": session.id, "status": session.status}

    @app.post("/sessions/{session_id}/control")
    def control(session_id: str, payload: dict):
        session = _session_or_404(session_id)
        action = payload.get("action")
        if not isinstance(action, str):
            raise HTTPException(status_code=400, detail="action is required")
        try:
            return session.submit(action, payload)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    @app.get("/sessions/{session_id}/snapshot")
    def snapshot(session_id: str):
        session = _session_or_404(session_id)
        return session.snapshot()

    @app.websocket("/sessions/{session_id}/stream")
    async def stream(websocket: WebSocket, session_id: str):
        try:
            session = registry.get(session_id)
        except KeyError:
            await websocket.close(code=4404)
            return
        await websocket.accept()
        q = session.subscribe()

        def poll():
            # bounded wait so a dropped client frees the pool thread quickly
            try:
                return q.get(timeout=0.5)
            except queue.Empty:
                return None

        try:
            while True:
                frame = await run_in_threadpool(poll)
                if frame is None:
                    continue
                await websocket.send_text(json.dumps(frame))
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            session.unsubscribe(q)

    #  serve the companion viewer when its checkout sits next to the package
    #  (repo layout: src/knotflow/ and frontend/); absent in installed wheels
    ui_dir = Path(__file__).resolve().parents[2] / "frontend"
    if ui_dir.is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app

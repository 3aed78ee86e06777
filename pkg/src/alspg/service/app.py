"""HTTP + WebSocket service around the solver stack.

Endpoints:
  GET  /health              liveness and version
  GET  /schemas/playground  the playground protocol contract
  POST /experiments/run     one config -> one sealed record
  POST /suites/run          inline suite -> records + summary
  WS   /playground          interactive reactive-IK sessions

Each playground session owns its arm and configuration vector; nothing is
shared between sessions, and messages within a session are handled strictly
in the order they arrive.
"""

from __future__ import annotations

import json
import time
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from pydantic import ValidationError

from alspg import __version__
from alspg.bench.problems import build_arm, build_set
from alspg.bench.runner import (
    execute,
    run_suite,
)
from alspg.bench.schema import PlanarArmSpec, ProblemConfig, SuiteConfig, SuiteMember
from alspg.models import closed_loop_ik_step
from . import protocol
from .protocol import (
    BUDGET_MS,
    ErrorReply,
    HelloMessage,
    ResetMessage,
    StateReply,
    TargetMessage,
    WelcomeReply,
    message_adapter,
)


def _default_pose(dof: int) -> np.ndarray:
    # mildly bent, away from the straight-arm singularity
    return np.array([0.4 if i % 2 == 0 else -0.3 for i in range(dof)])


class PlaygroundSession:
    """Per-connection solver state: one arm, one q, one tip trace."""

    def __init__(self, arm_spec: PlanarArmSpec, budget_ms: float = BUDGET_MS):
        self.budget_ms = budget_ms
        self.seq = 0
        self._configure(arm_spec, q0=None)

    def _configure(self, arm_spec: PlanarArmSpec, q0) -> None:
        # validate everything before touching session state, so a rejected
        # hello/reset leaves the previous configuration fully usable
        arm = build_arm(arm_spec)
        dof = len(arm_spec.link_lengths)
        q = _default_pose(dof) if q0 is None else np.asarray(q0, dtype=float)
        if q.shape != (dof,):
            raise ValueError(f"q0 must have {dof} entries")
        if not arm.joint_limits.contains(q, tol=1e-9):
            raise ValueError("q0 violates the joint limits")
        self.arm_spec = arm_spec
        self.arm = arm
        self.q = q
        self.ee_path: list[list[float]] = [arm.fk(q).tolist()]
        self.last_set_kind: Optional[str] = None

    def handle(self, raw: str):
        """One message in, one reply out; malformed input never kills us."""
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError as exc:
            return ErrorReply(message=f"invalid JSON: {exc.msg}")
        try:
            msg = message_adapter.validate_python(doc)
        except ValidationError as exc:
            detail = [
                ".".join(str(p) for p in item["loc"]) + ": " + item["msg"]
                for item in exc.errors()
            ]
            return ErrorReply(message="invalid message", detail=detail)

        if isinstance(msg, HelloMessage):
            return self._on_hello(msg)
        if isinstance(msg, ResetMessage):
            return self._on_reset(msg)
        return self._on_target(msg)

    def _welcome(self) -> WelcomeReply:
        return WelcomeReply(
            budget_ms=self.budget_ms,
            link_lengths=list(self.arm_spec.link_lengths),
            q=self.q.tolist(),
            ee=self.arm.fk(self.q).tolist(),
        )

    def _on_hello(self, msg: HelloMessage):
        try:
            self._configure(msg.arm or self.arm_spec, msg.q0)
        except ValueError as exc:
            return ErrorReply(message=str(exc))
        return self._welcome()

    def _on_reset(self, msg: ResetMessage):
        try:
            self._configure(self.arm_spec, msg.q)
        except ValueError as exc:
            return ErrorReply(message=str(exc))
        return self._welcome()

    def _on_target(self, msg: TargetMessage) -> StateReply:
        task_set = build_set(msg.set_spec)
        if msg.set_spec.kind != self.last_set_kind:
            # new set variant: fresh episode, fresh trace
            self.ee_path = [self.arm.fk(self.q).tolist()]
            self.last_set_kind = msg.set_spec.kind
        t0 = time.perf_counter()
        q_next, report = closed_loop_ik_step(self.arm, self.q, task_set, step_budget=2)
        elapsed_ms = (time.perf_counter() - t0) * 1e3
        self.q = q_next
        tip = self.arm.fk(self.q)
        self.ee_path.append(tip.tolist())
        self.seq += 1
        return StateReply(
            seq=self.seq,
            q=self.q.tolist(),
            ee=tip.tolist(),
            ee_path=self.ee_path,
            residual=float(task_set.distance(tip)),
            counters=report.counters.as_dict(),
            budget=elapsed_ms > self.budget_ms,
            elapsed_ms=elapsed_ms,
        )


def _inline_only(suite: SuiteConfig) -> None:
    for i, entry in enumerate(suite.configs):
        target = entry.config if isinstance(entry, SuiteMember) else entry
        if isinstance(target, str):
            raise HTTPException(
                status_code=400,
                detail=f"configs.{i}: suite members must be inline configs over HTTP; "
                       "resolve file paths client-side first",
            )


def create_app(arm_spec: Optional[PlanarArmSpec] = None,
               budget_ms: float = BUDGET_MS) -> FastAPI:
    """Build the service around one default arm model."""
    default_arm = arm_spec or PlanarArmSpec(name="planar_arm")
    build_arm(default_arm)  # fail fast on a bad model config

    app = FastAPI(title="alspg service", version=__version__)

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.get("/schemas/playground")
    def playground_schema() -> dict:
        return protocol.schema_document()

    @app.post("/experiments/run")
    def run_one(config: ProblemConfig) -> dict:
        record = execute(config)
        return record.model_dump(mode="json")

    @app.post("/suites/run")
    def run_many(suite: SuiteConfig) -> dict:
        _inline_only(suite)
        result = run_suite(suite, base_dir=".")
        return {
            "name": result.name,
            "exit_code": result.exit_code,
            "summary": result.summary(),
            "errors": [
                {"member": m.label, "error": m.error}
                for m in result.members
                if m.error is not None
            ],
            "records": [r.model_dump(mode="json") for r in result.records],
        }

    @app.websocket("/playground")
    async def playground(ws: WebSocket) -> None:
        await ws.accept()
        session = PlaygroundSession(default_arm, budget_ms=budget_ms)
        await ws.send_text(session._welcome().model_dump_json())
        try:
            while True:
                raw = await ws.receive_text()
                reply = session.handle(raw)
                await ws.send_text(reply.model_dump_json())
        except WebSocketDisconnect:
            return

    return app

"""Playground message protocol: versioned, schema'd, transport-agnostic.

Messages travel as JSON over a bidirectional channel (the service uses a
WebSocket). Every message and reply is a tagged union on "type". The full
schema document is served at /schemas/playground so clients can validate
without importing this package.
"""

from __future__ import annotations

from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, model_validator

from alspg.bench.schema import PlanarArmSpec, SetSpec, set_spec_dim

PROTOCOL_VERSION = 1
BUDGET_MS = 20.0
TASK_DIM = 2


class _Msg(BaseModel):
    model_config = ConfigDict(extra="forbid")


# ------------------------------------------------------------- client -> us


class HelloMessage(_Msg):
    """Optional session opener: pick an arm and a start pose.

    Without it the session runs the arm the service was started with, from
    its default pose.
    """

    type: Literal["hello"]
    version: int = PROTOCOL_VERSION
    arm: Optional[PlanarArmSpec] = None
    q0: Optional[list[float]] = None

    @model_validator(mode="after")
    def _check(self):
        if self.version != PROTOCOL_VERSION:
            raise ValueError(f"unsupported protocol version {self.version}")
        return self


class TargetMessage(_Msg):
    """One drag tick: the current task set the tip should satisfy."""

    type: Literal["target"]
    set_spec: SetSpec = Field(alias="set")
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    @model_validator(mode="after")
    def _planar(self):
        dim = set_spec_dim(self.set_spec)
        if dim != TASK_DIM:
            raise ValueError(f"set must live in the planar task space, got dim {dim}")
        return self


class ResetMessage(_Msg):
    """Snap the arm back to a pose and clear the tip trace."""

    type: Literal["reset"]
    q: Optional[list[float]] = None


PlaygroundMessage = Annotated[
    Union[HelloMessage, TargetMessage, ResetMessage], Field(discriminator="type")
]
message_adapter: TypeAdapter = TypeAdapter(PlaygroundMessage)


# ------------------------------------------------------------- us -> client


class WelcomeReply(_Msg):
    type: Literal["welcome"] = "welcome"
    version: int = PROTOCOL_VERSION
    budget_ms: float = BUDGET_MS
    link_lengths: list[float]
    q: list[float]
    ee: list[float]


class StateReply(_Msg):
    """Solver state after one budget-limited step against the latest set."""

    type: Literal["state"] = "state"
    seq: int
    q: list[float]
    ee: list[float]
    ee_path: list[list[float]]
    residual: float
    counters: dict[str, int]
    budget: bool
    elapsed_ms: float


class ErrorReply(_Msg):
    type: Literal["error"] = "error"
    message: str
    detail: list[str] = Field(default_factory=list)


def schema_document() -> dict:
    """The machine-readable protocol contract served to clients."""
    return {
        "protocol": "playground",
        "version": PROTOCOL_VERSION,
        "budget_ms": BUDGET_MS,
        "task_dim": TASK_DIM,
        "messages": {
            "hello": HelloMessage.model_json_schema(),
            "target": TargetMessage.model_json_schema(),
            "reset": ResetMessage.model_json_schema(),
        },
        "replies": {
            "welcome": WelcomeReply.model_json_schema(),
            "state": StateReply.model_json_schema(),
            "error": ErrorReply.model_json_schema(),
        },
    }

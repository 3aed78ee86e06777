"""Configuration and result schema for the benchmark runner.

Everything the runner consumes or emits is declared here as a pydantic
model: problem configs, suite configs, and result records. Configs are
strict (unknown fields are rejected with a field path) and every stochastic
element draws from the mandatory seed, so a config plus a seed pins the
run down to the byte.

Digests: config_digest identifies the problem (stable under key reordering
in the source file), record_digest identifies the outcome. Wall-clock
fields never enter either one; see deterministic_view.
"""

from __future__ import annotations

import hashlib
import json
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

SCHEMA_VERSION = 1

# Keys carrying wall-clock measurements, excluded from determinism digests.
TIMING_KEYS = frozenset({"wall_time_s", "solve_time_s"})


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


# ----------------------------------------------------------- set descriptors


class PointSpec(_Strict):
    """Equality target: the constrained quantity must equal `target`."""

    kind: Literal["point"] = "point"
    target: list[float]


class PlaneSpec(_Strict):
    """Affine constraint normal . p (=, <=, >=) offset, chosen by side."""

    kind: Literal["plane"] = "plane"
    normal: list[float]
    offset: float = 0.0
    side: Literal["on", "below", "above"] = "on"

    @model_validator(mode="after")
    def _check(self):
        if all(v == 0.0 for v in self.normal):
            raise ValueError("plane normal must be nonzero")
        return self


class CircleSpec(_Strict):
    """Radial band r_inner <= |p - center| <= r_outer (equal radii: a circle)."""

    kind: Literal["circle"] = "circle"
    center: list[float]
    r_outer: float
    r_inner: float = 0.0

    @model_validator(mode="after")
    def _check(self):
        if not 0.0 <= self.r_inner <= self.r_outer:
            raise ValueError("need 0 <= r_inner <= r_outer")
        return self


class RectangleSpec(_Strict):
    """Solid rectangle (region 'in') or its complement (region 'out')."""

    kind: Literal["rectangle"] = "rectangle"
    center: list[float]
    length: float
    width: float
    angle: float = 0.0
    region: Literal["in", "out"] = "in"

    @model_validator(mode="after")
    def _check(self):
        if self.length <= 0 or self.width <= 0:
            raise ValueError("rectangle sides must be positive")
        if len(self.center) != 2:
            raise ValueError("rectangle center must be planar")
        return self


class BoxSpec(_Strict):
    """Axis-aligned bounds; null entries mean unbounded on that side."""

    kind: Literal["box"] = "box"
    lower: list[Optional[float]]
    upper: list[Optional[float]]

    @model_validator(mode="after")
    def _check(self):
        if len(self.lower) != len(self.upper):
            raise ValueError("box lower/upper lengths differ")
        for lo, hi in zip(self.lower, self.upper):
            if lo is not None and hi is not None and lo > hi:
                raise ValueError("box has lower > upper")
        return self


SetSpec = Union[PointSpec, PlaneSpec, CircleSpec, RectangleSpec, BoxSpec]


def set_spec_dim(spec: SetSpec) -> int:
    """Ambient dimension a descriptor constrains."""
    if isinstance(spec, PointSpec):
        return len(spec.target)
    if isinstance(spec, PlaneSpec):
        return len(spec.normal)
    if isinstance(spec, CircleSpec):
        return len(spec.center)
    if isinstance(spec, RectangleSpec):
        return 2
    return len(spec.lower)


# --------------------------------------------------------------- model specs


class PlanarArmSpec(_Strict):
    name: Literal["planar_arm"] = "planar_arm"
    link_lengths: list[float] = Field(default_factory=lambda: [1.0, 1.0, 1.0])
    joint_limit: Optional[float] = None  # symmetric bound, None keeps +-pi


class KinematicChainSpec(_Strict):
    name: Literal["kinematic_chain"] = "kinematic_chain"
    link_lengths: list[float] = Field(default_factory=lambda: [1.0, 1.0, 1.0])
    dt: float = 0.01


class DoubleIntegratorSpec(_Strict):
    name: Literal["double_integrator"] = "double_integrator"
    dt: float = 0.05


class PusherSliderSpec(_Strict):
    name: Literal["pusher_slider"] = "pusher_slider"
    half_length: float = 0.05
    half_width: float = 0.05
    mu_contact: float = 0.3
    limit_surface_c: Optional[float] = None
    dt: float = 0.05


ModelSpec = Union[PlanarArmSpec, KinematicChainSpec, DoubleIntegratorSpec, PusherSliderSpec]

_STATE_DIMS = {
    "double_integrator": 4,
    "pusher_slider": 4,
}
_CONTROL_DIMS = {
    "double_integrator": 2,
    "pusher_slider": 2,
}


def model_state_dim(spec: ModelSpec) -> int:
    if spec.name in ("planar_arm", "kinematic_chain"):
        return len(spec.link_lengths)
    return _STATE_DIMS[spec.name]


def model_control_dim(spec: ModelSpec) -> int:
    if spec.name in ("planar_arm", "kinematic_chain"):
        return len(spec.link_lengths)
    return _CONTROL_DIMS[spec.name]


# ------------------------------------------------------------- problem parts


class CostSpec(_Strict):
    """Quadratic goal-reaching cost.

    task_space=True measures the goal error at the arm end-effector instead
    of in state coordinates (arm models only).
    """

    goal: list[float]
    goal_dims: Optional[list[int]] = None
    weights: Optional[list[float]] = None
    w_terminal: float = 1.0
    w_running: float = 0.0
    w_control: float = 1e-4
    task_space: bool = False


class StateConstraintSpec(_Strict):
    """Constrain selected state dimensions to a set at selected timesteps."""

    dims: list[int]
    set_spec: SetSpec = Field(discriminator="kind", alias="set")
    times: Union[Literal["all", "last"], list[int]] = "all"

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    @model_validator(mode="after")
    def _check(self):
        if not self.dims:
            raise ValueError("constraint needs at least one dimension")
        if set_spec_dim(self.set_spec) != len(self.dims):
            raise ValueError("set dimension must match the selected dims")
        if isinstance(self.times, list) and not self.times:
            raise ValueError("explicit constraint times must be nonempty")
        return self


class ChanceSpec(_Strict):
    """Gaussian halfspace slope: P(a . p <= 0) >= level with a ~ N(mean, cov)."""

    mean_slope: list[float]
    sqrt_covariance: list[list[float]]
    level: float = 0.8

    @model_validator(mode="after")
    def _check(self):
        k = len(self.mean_slope)
        if len(self.sqrt_covariance) != k or any(len(r) != k for r in self.sqrt_covariance):
            raise ValueError("sqrt_covariance must be square and match mean_slope")
        if not 0.5 <= self.level < 1.0:
            raise ValueError("level must lie in [0.5, 1)")
        return self


class DisturbanceSpec(_Strict):
    """One-off additive state disturbance applied after the given plant step."""

    step: int = Field(ge=0)
    delta: list[float]


class MpcSpec(_Strict):
    steps: int = Field(ge=1)
    goal_tol: Optional[float] = None
    disturbance: Optional[DisturbanceSpec] = None


class SolverOptionsSpec(_Strict):
    """Solver knobs shared across backends; None keeps the library default.

    tol is the headline tolerance (outer tolerance for the augmented
    Lagrangian, stopping tolerance for the others); the inner_* fields only
    apply to the augmented-Lagrangian subproblem solver.
    """

    tol: Optional[float] = None
    max_iters: Optional[int] = None
    max_outer: Optional[int] = None
    inner_tol: Optional[float] = None
    inner_max_iters: Optional[int] = None
    rho0: Optional[float] = None
    rho_max: Optional[float] = None


# -------------------------------------------------------------- the configs


_SOLVERS = ("alspg", "alspg_noproj", "ilqr", "spg")


class ProblemConfig(_Strict):
    """One experiment: a problem instance plus a solver choice and a seed."""

    kind: Literal["ik", "robust_ik", "planning", "mpc"]
    model: ModelSpec = Field(discriminator="name")
    solver: Literal["alspg", "alspg_noproj", "ilqr", "spg"]
    seed: int = Field(ge=0)
    schema_version: int = 1
    name: Optional[str] = None
    group: Optional[str] = None  # aggregation key for suites; default: solver
    solver_options: SolverOptionsSpec = Field(default_factory=SolverOptionsSpec)
    horizon: Optional[int] = Field(default=None, ge=1)
    cost: Optional[CostSpec] = None
    x0: Optional[list[float]] = None
    u_init: Optional[list[float]] = None  # one control step, tiled over the horizon
    control_lower: Optional[list[Optional[float]]] = None
    control_upper: Optional[list[Optional[float]]] = None
    constraints: list[StateConstraintSpec] = Field(default_factory=list)
    ee_set: Optional[SetSpec] = Field(default=None, discriminator="kind")
    ee_times: Union[Literal["all", "last"], list[int]] = "all"
    task_set: Optional[SetSpec] = Field(default=None, discriminator="kind")
    chance: Optional[ChanceSpec] = None
    mpc: Optional[MpcSpec] = None

    @model_validator(mode="after")
    def _check(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {self.schema_version}")
        m, n = model_state_dim(self.model), model_control_dim(self.model)
        if self.x0 is not None and len(self.x0) != m:
            raise ValueError("x0 length must equal the model state dimension")
        if self.u_init is not None and len(self.u_init) != n:
            raise ValueError("u_init is one control step and must match the control dimension")
        for side in (self.control_lower, self.control_upper):
            if side is not None and len(side) != n:
                raise ValueError("control bounds must match the control dimension")
        arm_like = self.model.name in ("planar_arm", "kinematic_chain")
        if (self.ee_set is not None or (self.cost and self.cost.task_space)) and not arm_like:
            raise ValueError("end-effector terms require an arm model")

        if self.kind in ("ik", "robust_ik"):
            if self.model.name != "planar_arm":
                raise ValueError(f"{self.kind} requires the planar_arm model")
            if self.solver != "alspg":
                raise ValueError(f"{self.kind} supports only the alspg solver")
            banned = {
                "horizon": self.horizon, "cost": self.cost, "mpc": self.mpc,
                "u_init": self.u_init, "ee_set": self.ee_set,
                "control_lower": self.control_lower, "control_upper": self.control_upper,
            }
            if self.constraints:
                banned["constraints"] = self.constraints
            extra = [k for k, v in banned.items() if v]
            if extra:
                raise ValueError(f"{self.kind} does not take: {', '.join(sorted(extra))}")
            if self.kind == "ik" and self.task_set is None:
                raise ValueError("ik requires task_set")
            if self.kind == "robust_ik" and self.chance is None:
                raise ValueError("robust_ik requires chance")
            if self.kind == "robust_ik" and self.task_set is not None:
                raise ValueError("robust_ik takes chance, not task_set")
            if self.kind == "ik" and self.chance is not None:
                raise ValueError("ik takes task_set, not chance")
        else:
            if self.model.name == "planar_arm":
                raise ValueError(f"{self.kind} needs a dynamics model, not planar_arm")
            if self.horizon is None or self.cost is None:
                raise ValueError(f"{self.kind} requires horizon and cost")
            if self.task_set is not None or self.chance is not None:
                raise ValueError(f"{self.kind} does not take task_set or chance")
            for c in self.constraints:
                if any(not 0 <= d < m for d in c.dims):
                    raise ValueError("constraint dims out of range for the model state")
                if isinstance(c.times, list) and self.horizon is not None:
                    if any(not 1 <= t <= self.horizon for t in c.times):
                        raise ValueError("constraint times out of range for the horizon")
            if isinstance(self.ee_times, list):
                if not self.ee_times:
                    raise ValueError("explicit ee_times must be nonempty")
                if any(not 1 <= t <= self.horizon for t in self.ee_times):
                    raise ValueError("ee_times out of range for the horizon")
            if self.kind == "planning" and self.mpc is not None:
                raise ValueError("planning does not take the mpc section")
            if self.kind == "mpc":
                if self.mpc is None:
                    raise ValueError("mpc requires the mpc section")
                if self.solver not in ("alspg", "ilqr"):
                    raise ValueError("mpc supports only alspg and ilqr")
                d = self.mpc.disturbance
                if d is not None and len(d.delta) != m:
                    raise ValueError("disturbance delta must match the state dimension")
            constrained = bool(self.constraints) or self.ee_set is not None
            if self.solver == "ilqr":
                if constrained or self.control_lower or self.control_upper:
                    raise ValueError("ilqr handles no constraints; drop them or switch solver")
            if self.solver == "spg" and constrained:
                raise ValueError("spg handles only control bounds; use alspg for state constraints")
            if self.solver == "alspg_noproj":
                if not constrained:
                    raise ValueError("alspg_noproj is the no-projection ablation and needs constraints")
                for c in self.constraints:
                    if isinstance(c.set_spec, PointSpec):
                        raise ValueError("alspg_noproj folds inequalities; point sets have none")
                if self.ee_set is not None and isinstance(self.ee_set, PointSpec):
                    raise ValueError("alspg_noproj folds inequalities; point sets have none")
        return self


class SuiteMember(_Strict):
    """One suite entry: a config (inline or by path) plus small overrides.

    Overrides let a suite reuse one config file across solvers or seeds
    without copying the geometry. They re-validate, so an override that
    breaks a per-kind rule fails like any other bad config.
    """

    config: Union[str, ProblemConfig]
    solver: Optional[Literal["alspg", "alspg_noproj", "ilqr", "spg"]] = None
    seed: Optional[int] = Field(default=None, ge=0)
    name: Optional[str] = None
    group: Optional[str] = None

    def overrides(self) -> dict:
        out = {}
        for key in ("solver", "seed", "name", "group"):
            val = getattr(self, key)
            if val is not None:
                out[key] = val
        return out


class SuiteConfig(_Strict):
    """A named list of experiments run and summarized together.

    Members are inline configs, paths to config files (resolved against
    the suite file's directory by the loader), or SuiteMember entries that
    wrap either form with solver/seed/name/group overrides.
    """

    name: str
    configs: list[Union[str, SuiteMember, ProblemConfig]] = Field(min_length=1)
    schema_version: int = 1
    parallel: bool = False

    @model_validator(mode="after")
    def _check(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {self.schema_version}")
        return self


# ------------------------------------------------------------------ records


class ResultRecord(BaseModel):
    """Self-describing outcome of one experiment.

    record_digest covers everything except wall-clock fields and the digest
    itself, so reruns of the same config and seed match digests even though
    their timings differ.
    """

    model_config = ConfigDict(extra="forbid")

    kind: str
    solver: str
    seed: int
    config_digest: str
    converged: bool
    termination: str
    objective: Optional[float]
    residual: Optional[float]
    iterations: int
    counters: dict[str, int]
    schema_version: int = 1
    name: Optional[str] = None
    group: Optional[str] = None
    f_trace: list[Optional[float]] = Field(default_factory=list)
    residual_trace: list[Optional[float]] = Field(default_factory=list)
    solution: dict = Field(default_factory=dict)
    environment: dict[str, str] = Field(default_factory=dict)
    wall_time_s: float = 0.0
    record_digest: Optional[str] = None

    def seal(self) -> "ResultRecord":
        """Fill record_digest from the deterministic part of the record."""
        doc = self.model_dump(mode="json", exclude_none=True)
        doc.pop("record_digest", None)
        self.record_digest = digest(deterministic_view(doc))
        return self


# ------------------------------------------------------------------ digests


def canonical_json(doc) -> str:
    """Key-sorted, whitespace-free JSON; the byte form behind every digest."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)


def digest(doc) -> str:
    return hashlib.sha256(canonical_json(doc).encode()).hexdigest()


def deterministic_view(doc):
    """Copy of a JSON document with all wall-clock fields removed."""
    if isinstance(doc, dict):
        return {k: deterministic_view(v) for k, v in doc.items() if k not in TIMING_KEYS}
    if isinstance(doc, list):
        return [deterministic_view(v) for v in doc]
    return doc


def config_digest(config: ProblemConfig) -> str:
    return digest(config.model_dump(mode="json", exclude_none=True))

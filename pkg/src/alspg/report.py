"""Shared result types for the solvers in this package.

Every solver (projected gradient, augmented Lagrangian, iLQR) fills in the
same small report structure so benchmark code can treat them uniformly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class Termination(enum.Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    STAGNATION = "stagnation"
    CALLBACK_FAILURE = "callback_failure"


@dataclass
class Counters:
    """Work counters with identical units across solvers.

    n_f counts objective evaluations; for trajectory problems one evaluation
    means one full-horizon rollout with its cost.  n_grad counts objective
    gradient evaluations.  n_jac counts constraint linearizations; for
    trajectory problems one linearization of the whole horizon counts once,
    no matter how many constraint blocks reuse it.
    """

    n_f: int = 0
    n_grad: int = 0
    n_jac: int = 0

    def copy(self) -> "Counters":
        return Counters(self.n_f, self.n_grad, self.n_jac)

    def __iadd__(self, other: "Counters") -> "Counters":
        self.n_f += other.n_f
        self.n_grad += other.n_grad
        self.n_jac += other.n_jac
        return self

    def as_dict(self) -> dict:
        return {"n_f": self.n_f, "n_grad": self.n_grad, "n_jac": self.n_jac}


@dataclass
class SolveReport:
    x: np.ndarray
    f: float
    termination: Termination
    iterations: int
    residual: float
    counters: Counters = field(default_factory=Counters)
    wall_time: float = 0.0
    f_trace: list[float] = field(default_factory=list)
    residual_trace: list[float] = field(default_factory=list)
    constraint_residual_trace: list[float] = field(default_factory=list)
    x_trace: list[np.ndarray] = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.termination is Termination.CONVERGED

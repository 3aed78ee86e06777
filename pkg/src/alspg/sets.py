"""Analytical Euclidean projections onto simple geometric sets.

Each set knows how to project an arbitrary point onto itself in closed form
(no inner iterations), test membership, and report whether it is convex.
Sets are immutable value objects: build once, share freely across threads.

Conventions:
  - Rectangle variants are axis-aligned and centered at the origin; use
    Transformed (or the rotated_rectangle_set helper) for placed/rotated
    rectangles.
  - "Out" variants are the closed complements of their "in" counterparts,
    so they are nonconvex; project returns some nearest boundary point.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from itertools import combinations
from typing import Optional

import numpy as np


def _readonly(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


def _check_dim(x: np.ndarray, dim: Optional[int]) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-d point, got shape {x.shape}")
    if dim is not None and x.shape[0] != dim:
        raise ValueError(f"point has dimension {x.shape[0]}, set expects {dim}")
    return x


class ProjectionSet:
    """Base class. Subclasses implement project/contains and declare convexity."""

    @property
    def dim(self) -> Optional[int]:
        """Ambient dimension, or None if the set accepts any dimension."""
        return None

    @property
    def is_convex(self) -> bool:
        raise NotImplementedError

    def project(self, x0: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def contains(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        raise NotImplementedError

    def distance(self, x: np.ndarray) -> float:
        """Euclidean distance from x to the set (0 inside)."""
        return float(np.linalg.norm(x - self.project(x)))


@dataclass(frozen=True)
class Bounds(ProjectionSet):
    """Box l <= x <= u componentwise. Infinite entries mark unbounded sides."""

    l: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "l", _readonly(np.atleast_1d(self.l)))
        object.__setattr__(self, "u", _readonly(np.atleast_1d(self.u)))
        if self.l.shape != self.u.shape:
            raise ValueError("bound vectors must have equal shapes")
        if np.any(self.l > self.u):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def dim(self) -> int:
        return self.l.shape[0]

    @property
    def is_convex(self) -> bool:
        return True

    def project(self, x0):
        x0 = _check_dim(x0, self.dim)
        return np.clip(x0, self.l, self.u)

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = _check_dim(x, self.dim)
        return bool(np.all(x >= self.l - tol) and np.all(x <= self.u + tol))

    @staticmethod
    def unbounded(dim: int) -> "Bounds":
        """All of R^dim, as a box with infinite sides."""
        return Bounds(np.full(dim, -np.inf), np.full(dim, np.inf))


@dataclass(frozen=True)
class HyperplaneSlab(ProjectionSet):
    """Two-sided affine constraint l <= a.x <= u.

    Either side may be infinite; l = u gives a hyperplane.
    """

    a: np.ndarray
    l: float
    u: float

    def __post_init__(self):
        object.__setattr__(self, "a", _readonly(np.atleast_1d(self.a)))
        object.__setattr__(self, "l", float(self.l))
        object.__setattr__(self, "u", float(self.u))
        nrm = float(np.linalg.norm(self.a))
        if nrm == 0.0:
            raise ValueError("slab normal must be nonzero")
        if self.l > self.u:
            raise ValueError("slab bounds are inverted")
        object.__setattr__(self, "_sqnorm", nrm * nrm)
        object.__setattr__(self, "_norm", nrm)

    @property
    def lower_bounded(self) -> bool:
        return np.isfinite(self.l)

    @property
    def upper_bounded(self) -> bool:
        return np.isfinite(self.u)

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    @property
    def is_convex(self) -> bool:
        return True

    def project(self, x0):
        x0 = _check_dim(x0, self.dim)
        v = float(self.a @ x0)
        if v > self.u:
            return x0 - self.a * ((v - self.u) / self._sqnorm)
        if v < self.l:
            return x0 - self.a * ((v - self.l) / self._sqnorm)
        return x0.copy()

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = _check_dim(x, self.dim)
        v = float(self.a @ x)
        # tol is geometric: compare signed distances, not raw values
        return v >= self.l - tol * self._norm and v <= self.u + tol * self._norm


@dataclass(frozen=True)
class QuadricAnnulus(ProjectionSet):
    """Radial band l <= 0.5 * ||x - center||^2 <= u.

    l = 0 gives a ball, l = u a sphere, 0 < l < u a shell. Convex only
    in the ball case.
    """

    center: np.ndarray
    l: float
    u: float

    def __post_init__(self):
        object.__setattr__(self, "center", _readonly(np.atleast_1d(self.center)))
        object.__setattr__(self, "l", float(self.l))
        object.__setattr__(self, "u", float(self.u))
        if self.l < 0:
            raise ValueError("lower level must be >= 0")
        if self.l > self.u:
            raise ValueError("levels are inverted")

    @staticmethod
    def ball(center, radius: float) -> "QuadricAnnulus":
        return QuadricAnnulus(center, 0.0, 0.5 * radius * radius)

    @staticmethod
    def sphere(center, radius: float) -> "QuadricAnnulus":
        h = 0.5 * radius * radius
        return QuadricAnnulus(center, h, h)

    @staticmethod
    def shell(center, r_inner: float, r_outer: float) -> "QuadricAnnulus":
        return QuadricAnnulus(center, 0.5 * r_inner**2, 0.5 * r_outer**2)

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def is_convex(self) -> bool:
        return self.l == 0.0

    def project(self, x0):
        x0 = _check_dim(x0, self.dim)
        z = x0 - self.center
        h = 0.5 * float(z @ z)
        if h > self.u:
            return self.center + z * (np.sqrt(2.0 * self.u) / np.linalg.norm(z))
        if h < self.l:
            nrm = float(np.linalg.norm(z))
            if nrm == 0.0:
                # Every boundary point is equally near; pick the first axis
                # so repeated calls are deterministic.
                warnings.warn(
                    "projection from the exact center of a shell is "
                    "non-unique; returning an arbitrary boundary point",
                    RuntimeWarning,
                )
                p = self.center.copy()
                p[0] += np.sqrt(2.0 * self.l)
                return p
            return self.center + z * (np.sqrt(2.0 * self.l) / nrm)
        return x0.copy()

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = _check_dim(x, self.dim)
        h = 0.5 * float((x - self.center) @ (x - self.center))
        return h >= self.l - tol and h <= self.u + tol


@dataclass(frozen=True)
class SecondOrderCone(ProjectionSet):
    """Unit second-order (ice cream) cone: x = (z, t) with ||z|| <= t."""

    @property
    def is_convex(self) -> bool:
        return True

    def project(self, x0):
        x0 = np.asarray(x0, dtype=float)
        if x0.ndim != 1 or x0.shape[0] < 2:
            raise ValueError("cone points need at least 2 components (z, t)")
        z, t = x0[:-1], float(x0[-1])
        nz = float(np.linalg.norm(z))
        if nz <= t:
            return x0.copy()
        if nz <= -t:
            return np.zeros_like(x0)
        # strictly outside both the cone and its polar: project onto the slant
        coef = 0.5 * (nz + t)
        out = np.empty_like(x0)
        out[:-1] = coef * (z / nz)
        out[-1] = coef
        return out

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or x.shape[0] < 2:
            raise ValueError("cone points need at least 2 components (z, t)")
        return float(np.linalg.norm(x[:-1])) <= float(x[-1]) + tol


@dataclass(frozen=True)
class RectangleIn(ProjectionSet):
    """Centered cube ||x||_inf <= halfwidth, any ambient dimension."""

    halfwidth: float

    def __post_init__(self):
        object.__setattr__(self, "halfwidth", float(self.halfwidth))
        if self.halfwidth < 0:
            raise ValueError("halfwidth must be >= 0")

    @property
    def is_convex(self) -> bool:
        return True

    def project(self, x0):
        x0 = _check_dim(x0, None)
        return np.clip(x0, -self.halfwidth, self.halfwidth)

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = _check_dim(x, None)
        return float(np.max(np.abs(x))) <= self.halfwidth + tol


def _rect_out_project(x0: np.ndarray, l: float, axis_costs=None) -> np.ndarray:
    """Nearest point with ||x||_inf >= l.

    Inside the cube, the cheapest escape moves a single coordinate to the
    face l*sign(x_k). axis_costs rescales the per-axis move cost (used when
    the cube lives behind an anisotropic linear map); None means uniform.
    """
    amax = float(np.max(np.abs(x0)))
    if amax >= l:
        return x0.copy()
    gaps = l - np.abs(x0)
    if axis_costs is not None:
        gaps = gaps * axis_costs
    k = int(np.argmin(gaps))  # ties resolve to the lowest index
    out = x0.copy()
    out[k] = l if x0[k] >= 0 else -l
    return out


@dataclass(frozen=True)
class RectangleOut(ProjectionSet):
    """Complement of the open centered cube: ||x||_inf >= halfwidth."""

    halfwidth: float

    def __post_init__(self):
        object.__setattr__(self, "halfwidth", float(self.halfwidth))
        if self.halfwidth < 0:
            raise ValueError("halfwidth must be >= 0")

    @property
    def is_convex(self) -> bool:
        return False

    def project(self, x0):
        x0 = _check_dim(x0, None)
        return _rect_out_project(x0, self.halfwidth)

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = _check_dim(x, None)
        return float(np.max(np.abs(x))) >= self.halfwidth - tol


def _normalize_rows(rows) -> tuple[np.ndarray, np.ndarray]:
    if len(rows) == 0:
        raise ValueError("polytope needs at least one row")
    A = np.array([np.atleast_1d(np.asarray(a, dtype=float)) for a, _ in rows])
    b = np.array([float(v) for _, v in rows])
    norms = np.linalg.norm(A, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("polytope rows must have nonzero normals")
    return A, b


@dataclass(frozen=True)
class PolytopeIn(ProjectionSet):
    """Intersection of halfspaces a_i.x <= u_i.

    Projection enumerates candidate active sets, which is exact but
    exponential in the row count; construction rejects more than 16 rows.
    """

    rows: tuple

    def __post_init__(self):
        A, b = _normalize_rows(self.rows)
        if A.shape[0] > 16:
            raise ValueError("too many rows for exact projection (max 16)")
        object.__setattr__(self, "rows", tuple((_readonly(a), float(v)) for a, v in zip(A, b)))
        object.__setattr__(self, "_A", _readonly(A))
        object.__setattr__(self, "_b", _readonly(b))
        object.__setattr__(self, "_row_norms", _readonly(np.linalg.norm(A, axis=1)))

    @property
    def dim(self) -> int:
        return self._A.shape[1]

    @property
    def is_convex(self) -> bool:
        return True

    def project(self, x0):
        x0 = _check_dim(x0, self.dim)
        A, b = self._A, self._b
        m = A.shape[0]
        viol = (A @ x0 - b) / self._row_norms
        if np.all(viol <= 0.0):
            return x0.copy()

        # Active-set enumeration: the true projection is the equality
        # projection onto some subset of rows with nonnegative multipliers.
        best, best_d2 = None, np.inf
        for size in range(1, m + 1):
            for S in combinations(range(m), size):
                As = A[list(S)]
                G = As @ As.T
                try:
                    mu = np.linalg.solve(G, As @ x0 - b[list(S)])
                except np.linalg.LinAlgError:
                    continue
                p = x0 - As.T @ mu
                feas = (A @ p - b) / self._row_norms
                if np.all(feas <= 1e-9) and np.all(mu >= -1e-9 * (1.0 + np.abs(mu).max())):
                    return p
                if np.all(feas <= 1e-9):
                    d2 = float((p - x0) @ (p - x0))
                    if d2 < best_d2:
                        best, best_d2 = p, d2
        if best is None:
            raise RuntimeError("active-set enumeration found no feasible candidate")
        return best

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = _check_dim(x, self.dim)
        return bool(np.all((self._A @ x - self._b) / self._row_norms <= tol))


def project_polytope_out(rows, x0: np.ndarray) -> np.ndarray:
    """Nearest point satisfying a_i.x >= l_i for at least one row.

    A point violating every row escapes through the nearest boundary
    hyperplane; equidistant rows resolve to the lowest index. Points
    already satisfying some row are returned unchanged.
    """
    A, b = _normalize_rows(rows)
    x0 = _check_dim(x0, A.shape[1])
    norms = np.linalg.norm(A, axis=1)
    dist = (b - A @ x0) / norms  # signed distance to violation, per row
    if np.any(dist <= 0.0):
        return x0.copy()
    i = int(np.argmin(dist))
    return x0 + A[i] * ((b[i] - A[i] @ x0) / (norms[i] ** 2))


@dataclass(frozen=True)
class PolytopeOut(ProjectionSet):
    """Closed complement of an open polytope: a_i.x >= l_i for some row i."""

    rows: tuple

    def __post_init__(self):
        A, b = _normalize_rows(self.rows)
        object.__setattr__(self, "rows", tuple((_readonly(a), float(v)) for a, v in zip(A, b)))
        object.__setattr__(self, "_A", _readonly(A))
        object.__setattr__(self, "_b", _readonly(b))
        object.__setattr__(self, "_row_norms", _readonly(np.linalg.norm(A, axis=1)))

    @property
    def dim(self) -> int:
        return self._A.shape[1]

    @property
    def is_convex(self) -> bool:
        # a single halfspace is convex; a true union is not
        return self._A.shape[0] == 1

    def project(self, x0):
        x0 = _check_dim(x0, self.dim)
        return project_polytope_out(self.rows, x0)

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = _check_dim(x, self.dim)
        return bool(np.any((self._A @ x - self._b) / self._row_norms >= -tol))


@dataclass(frozen=True)
class Point(ProjectionSet):
    """Singleton {target}; projection is constant."""

    target: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "target", _readonly(np.atleast_1d(self.target)))

    @property
    def dim(self) -> int:
        return self.target.shape[0]

    @property
    def is_convex(self) -> bool:
        return True

    def project(self, x0):
        _check_dim(x0, self.dim)
        return self.target.copy()

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = _check_dim(x, self.dim)
        return float(np.max(np.abs(x - self.target))) <= tol


@dataclass(frozen=True)
class Transformed(ProjectionSet):
    """Preimage set {x : A(x - center) in inner}.

    Exactness of the pulled-back projection requires A to have mutually
    orthogonal rows (A A^T diagonal). Rectangle inner sets accept any
    positive row scaling; all other inner sets require a uniform scaling,
    since their projections do not commute with anisotropic stretching.
    """

    inner: ProjectionSet
    A: np.ndarray
    center: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("transform matrix must be square")
        object.__setattr__(self, "A", _readonly(A))
        object.__setattr__(self, "center", _readonly(np.atleast_1d(self.center)))
        if self.center.shape[0] != A.shape[0]:
            raise ValueError("center dimension does not match the transform")
        if self.inner.dim is not None and self.inner.dim != A.shape[0]:
            raise ValueError("inner set dimension does not match the transform")

        G = A @ A.T
        d = np.sqrt(np.diag(G))
        if np.any(d == 0.0):
            raise ValueError("transform matrix is singular")
        off = G - np.diag(np.diag(G))
        if np.max(np.abs(off)) > 1e-9 * float(np.max(np.diag(G))):
            raise ValueError("transform rows must be mutually orthogonal")
        rect_like = isinstance(self.inner, (RectangleIn, RectangleOut))
        if not rect_like:
            if (d.max() - d.min()) > 1e-9 * d.max():
                raise ValueError(
                    "non-rectangle inner sets require a uniformly scaled "
                    "orthogonal transform"
                )
        object.__setattr__(self, "_A_inv", _readonly(np.linalg.inv(A)))
        # x-space cost of a unit move along y-axis k is 1/row_norm_k
        object.__setattr__(self, "_axis_costs", _readonly(1.0 / d))

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def is_convex(self) -> bool:
        return self.inner.is_convex

    def project(self, x0):
        x0 = _check_dim(x0, self.dim)
        y0 = self.A @ (x0 - self.center)
        if isinstance(self.inner, RectangleOut):
            py = _rect_out_project(y0, self.inner.halfwidth, self._axis_costs)
        else:
            py = self.inner.project(y0)
        return self.center + self._A_inv @ py

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = _check_dim(x, self.dim)
        return self.inner.contains(self.A @ (x - self.center), tol)


@dataclass(frozen=True)
class Stacked(ProjectionSet):
    """count independent copies of the same set, applied to contiguous slices.

    Useful for per-timestep constraints: one Stacked set covers the whole
    flattened trajectory.
    """

    inner: ProjectionSet
    count: int
    block_dim: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "count", int(self.count))
        if self.count < 1:
            raise ValueError("count must be >= 1")
        bd = self.block_dim if self.block_dim is not None else self.inner.dim
        if bd is None:
            raise ValueError("block_dim required for dimension-free inner sets")
        bd = int(bd)
        if self.inner.dim is not None and self.inner.dim != bd:
            raise ValueError("block_dim conflicts with the inner set dimension")
        object.__setattr__(self, "block_dim", bd)

    @property
    def dim(self) -> int:
        return self.count * self.block_dim

    @property
    def is_convex(self) -> bool:
        return self.inner.is_convex

    def project(self, x0):
        x0 = _check_dim(x0, self.dim)
        blocks = x0.reshape(self.count, self.block_dim)
        return np.concatenate([self.inner.project(b) for b in blocks])

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = _check_dim(x, self.dim)
        blocks = x.reshape(self.count, self.block_dim)
        return all(self.inner.contains(b, tol) for b in blocks)


def rotation2d(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def rotated_rectangle_set(
    center, theta: float, length: float, width: float, inside: bool = True
) -> Transformed:
    """Rectangle of size length x width, rotated by theta about its center.

    inside=True builds the solid rectangle, inside=False its complement
    (the usual form for a rectangular obstacle).
    """
    if length <= 0 or width <= 0:
        raise ValueError("rectangle sides must be positive")
    half = 0.5 * length
    inner: ProjectionSet = RectangleIn(half) if inside else RectangleOut(half)
    A = np.diag([1.0, length / width]) @ rotation2d(-theta)
    return Transformed(inner=inner, A=A, center=np.asarray(center, dtype=float))

"""Point clouds, similarity transforms, distances, kNN graphs and seeded generators.

Every generator takes ``rng_seed`` which may be an int, a
:class:`numpy.random.SeedSequence` or a :class:`numpy.random.Generator`;
outputs are pure functions of it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from ._validation import check_distance_matrix, check_int, check_points
from .exceptions import InvalidInputError

SHAPE_KINDS = ("sphere", "cube_surface", "line_segment", "torus")
SETTINGS = ("none", "translation", "rotation", "reflection", "scaling")
CVRP_DEMAND_SCALE = {20: 30.0, 50: 40.0, 100: 50.0}
_ORTHO_TOL = 1e-12


def _frozen(arr):
    arr = np.array(arr, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PointCloud:
    """An ``(N, d)`` coordinate matrix with optional labels.

    Coordinates are stored read-only so a cloud can be shared freely.
    """

    coords: np.ndarray
    point_labels: Optional[np.ndarray] = None
    cloud_label: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "coords", _frozen(check_points(self.coords)))
        if self.point_labels is not None:
            labels = np.array(self.point_labels, dtype=np.int64).reshape(-1)
            if labels.shape[0] != self.coords.shape[0]:
                raise InvalidInputError(
                    f"point_labels has length {labels.shape[0]}, expected {self.coords.shape[0]}"
                )
            labels.setflags(write=False)
            object.__setattr__(self, "point_labels", labels)
        if self.cloud_label is not None:
            object.__setattr__(self, "cloud_label", int(self.cloud_label))

    @property
    def n(self):
        return self.coords.shape[0]

    @property
    def d(self):
        return self.coords.shape[1]

    def with_coords(self, coords):
        return PointCloud(coords, self.point_labels, self.cloud_label)


# --------------------------------------------------------------------------
# similarity transforms


class SimilarityTransform:
    """Base class; subclasses implement ``_apply`` on a float array."""

    dim: Optional[int] = None

    def apply(self, F):
        return apply_transform(F, self)

    @property
    def scale_factor(self):
        """Factor by which all pairwise distances are multiplied."""
        return 1.0

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Translation(SimilarityTransform):
    offset: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "offset", _frozen(np.reshape(self.offset, -1)))

    @property
    def dim(self):
        return self.offset.shape[0]

    def _apply(self, F):
        return F + self.offset

    def to_dict(self):
        return {"kind": "translation", "offset": self.offset.tolist()}


@dataclass(frozen=True, eq=False)
class Rotation(SimilarityTransform):
    """Proper rotation ``F -> F @ R``, about the origin or about the cloud centroid."""

    matrix: np.ndarray
    about_centroid: bool = False

    def __post_init__(self):
        R = _frozen(self.matrix)
        if R.ndim != 2 or R.shape[0] != R.shape[1]:
            raise InvalidInputError(f"rotation matrix must be square, got {R.shape}")
        if np.max(np.abs(R.T @ R - np.eye(R.shape[0]))) > _ORTHO_TOL:
            raise InvalidInputError("rotation matrix is not orthogonal")
        if abs(np.linalg.det(R) - 1.0) > _ORTHO_TOL:
            raise InvalidInputError("rotation matrix must have determinant +1")
        object.__setattr__(self, "matrix", R)

    @property
    def dim(self):
        return self.matrix.shape[0]

    def _apply(self, F):
        if self.about_centroid:
            c = centroid(F)
            return c + (F - c) @ self.matrix
        return F @ self.matrix

    def to_dict(self):
        return {"kind": "rotation", "matrix": self.matrix.tolist(), "about_centroid": self.about_centroid}


@dataclass(frozen=True, eq=False)
class Reflection(SimilarityTransform):
    axis_flips: np.ndarray

    def __post_init__(self):
        flips = np.array(self.axis_flips, dtype=bool).reshape(-1)
        if not flips.any():
            raise InvalidInputError("reflection must flip at least one axis")
        flips.setflags(write=False)
        object.__setattr__(self, "axis_flips", flips)

    @property
    def dim(self):
        return self.axis_flips.shape[0]

    def _apply(self, F):
        return F * np.where(self.axis_flips, -1.0, 1.0)

    def to_dict(self):
        return {"kind": "reflection", "axis_flips": self.axis_flips.tolist()}


@dataclass(frozen=True, eq=False)
class Scaling(SimilarityTransform):
    c: float

    def __post_init__(self):
        c = float(self.c)
        if c == 0 or not np.isfinite(c):
            raise InvalidInputError("scaling constant must be finite and nonzero")
        object.__setattr__(self, "c", c)

    @property
    def scale_factor(self):
        return abs(self.c)

    def _apply(self, F):
        return self.c * F

    def to_dict(self):
        return {"kind": "scaling", "c": self.c}


@dataclass(frozen=True, eq=False)
class Compose(SimilarityTransform):
    """Apply ``transforms`` left to right. An empty composition is the identity."""

    transforms: Sequence[SimilarityTransform] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "transforms", tuple(self.transforms))

    @property
    def dim(self):
        dims = {t.dim for t in self.transforms if t.dim is not None}
        if len(dims) > 1:
            raise InvalidInputError(f"composed transforms disagree on dimension: {sorted(dims)}")
        return dims.pop() if dims else None

    @property
    def scale_factor(self):
        return float(np.prod([t.scale_factor for t in self.transforms]))

    def _apply(self, F):
        for t in self.transforms:
            F = t._apply(F)
        return F

    def to_dict(self):
        return {"kind": "compose", "transforms": [t.to_dict() for t in self.transforms]}


def transform_from_dict(obj):
    kind = obj["kind"]
    if kind == "translation":
        return Translation(obj["offset"])
    if kind == "rotation":
        return Rotation(obj["matrix"], bool(obj.get("about_centroid", False)))
    if kind == "reflection":
        return Reflection(obj["axis_flips"])
    if kind == "scaling":
        return Scaling(obj["c"])
    if kind == "compose":
        return Compose([transform_from_dict(t) for t in obj["transforms"]])
    raise InvalidInputError(f"unknown transform kind {kind!r}")


def identity():
    return Compose(())


def apply_transform(F, T):
    """Apply ``T`` to a cloud or coordinate array; returns the same kind of object."""
    X = check_points(F)
    dim = T.dim
    if dim is not None and dim != X.shape[1]:
        raise InvalidInputError(f"transform acts on d={dim} but points have d={X.shape[1]}")
    out = T._apply(X)
    if isinstance(F, PointCloud):
        return F.with_coords(out)
    return out


def uniform_rotation_matrix(d, rng):
    """Haar-uniform element of SO(2) (uniform angle) or SO(3) (uniform unit quaternion)."""
    rng = np.random.default_rng(rng)
    if d == 2:
        theta = rng.uniform(0.0, 2.0 * np.pi)
        return rotation_2d(theta)
    if d == 3:
        u1, u2, u3 = rng.uniform(size=3)
        # Shoemake's subgroup algorithm
        w = np.sqrt(1 - u1) * np.sin(2 * np.pi * u2)
        x = np.sqrt(1 - u1) * np.cos(2 * np.pi * u2)
        y = np.sqrt(u1) * np.sin(2 * np.pi * u3)
        z = np.sqrt(u1) * np.cos(2 * np.pi * u3)
        return quaternion_to_matrix(w, x, y, z)
    raise InvalidInputError(f"random rotations are only defined for d in (2, 3), got {d}")


def rotation_2d(theta):
    c, s = np.cos(theta), np.sin(theta)
    # row-vector convention: [1, 0] @ R = [cos, sin]
    return np.array([[c, s], [-s, c]])


def z_rotation(theta):
    R = np.eye(3)
    R[:2, :2] = rotation_2d(theta)
    return R


def quaternion_to_matrix(w, x, y, z):
    n = np.sqrt(w * w + x * x + y * y + z * z)
    w, x, y, z = w / n, x / n, y / n, z / n
    # transpose of the usual column-vector matrix, since points are rows
    M = np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )
    return M.T


def _paper_reflection(d):
    flips = np.zeros(d, dtype=bool)
    flips[1 if d > 1 else 0] = True
    return Reflection(flips)


def random_transform(rng_seed, setting, d=2):
    """Draw a transform for one of the benchmark settings.

    ``setting`` is one of ``none``, ``translation``, ``rotation`` (about the
    centroid), ``reflection`` (second axis negated), ``scaling`` or
    ``composed`` (one of each of the four, in random order).
    """
    rng = np.random.default_rng(rng_seed)
    setting = str(setting).lower()
    if setting == "none":
        return identity()
    if setting == "translation":
        return Translation(rng.uniform(-100.0, 100.0, size=d))
    if setting == "rotation":
        return Rotation(uniform_rotation_matrix(d, rng), about_centroid=True)
    if setting == "reflection":
        return _paper_reflection(d)
    if setting == "scaling":
        # (0, 100]: flip the half-open interval of uniform()
        return Scaling(100.0 - rng.uniform(0.0, 100.0))
    if setting in ("composed", "composedall", "all"):
        parts = [random_transform(rng, s, d) for s in ("translation", "rotation", "reflection", "scaling")]
        order = rng.permutation(len(parts))
        return Compose([parts[i] for i in order])
    raise InvalidInputError(f"unknown transform setting {setting!r}")


# --------------------------------------------------------------------------
# distances and graphs


def centroid(F):
    return check_points(F).mean(axis=0)


def pairwise_distances(F):
    """Dense Euclidean distance matrix, computed per pair (no Gram-matrix shortcut)."""
    X = check_points(F)
    if X.shape[0] == 1:
        return np.zeros((1, 1))
    return cdist(X, X)


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected graph as a symmetric 0/1 adjacency matrix with zero diagonal."""

    adjacency: np.ndarray

    def __post_init__(self):
        A = np.array(self.adjacency, dtype=np.float64)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise InvalidInputError("adjacency must be square")
        if not np.array_equal(A, A.T) or np.any(np.diag(A) != 0):
            raise InvalidInputError("adjacency must be symmetric with zero diagonal")
        A.setflags(write=False)
        object.__setattr__(self, "adjacency", A)

    @property
    def n(self):
        return self.adjacency.shape[0]

    def neighbors(self, i):
        return np.flatnonzero(self.adjacency[i])

    def edges(self):
        i, j = np.nonzero(np.triu(self.adjacency))
        return set(zip(i.tolist(), j.tolist()))


def knn_graph(D, k):
    """Symmetrized kNN graph; ties in distance go to the smaller point index."""
    D = check_distance_matrix(D)
    n = D.shape[0]
    k = check_int(k, "k", low=1, high=n - 1)
    masked = D + np.diag(np.full(n, np.inf))
    # stable sort keeps ascending index order among equal distances
    nearest = np.argsort(masked, axis=1, kind="stable")[:, :k]
    A = np.zeros((n, n))
    A[np.repeat(np.arange(n), k), nearest.ravel()] = 1.0
    return Graph(np.maximum(A, A.T))


# --------------------------------------------------------------------------
# generators


def generate_shape(kind, n, noise_sigma=0.0, rng_seed=0):
    """Sample ``n`` points on a canonical 3-D surface centred at the origin.

    Shapes sit in a fixed pose (segment along z, torus in the xy-plane,
    axis-aligned cube) so z-axis and full SO(3) rotations act differently on
    them.
    """
    if kind not in SHAPE_KINDS:
        raise InvalidInputError(f"unknown shape {kind!r}; expected one of {SHAPE_KINDS}")
    n = check_int(n, "n", low=4)
    rng = np.random.default_rng(rng_seed)
    if kind == "sphere":
        P = rng.standard_normal((n, 3))
        P /= np.linalg.norm(P, axis=1, keepdims=True)
    elif kind == "cube_surface":
        P = rng.uniform(-1.0, 1.0, size=(n, 3))
        axis = rng.integers(0, 3, size=n)
        side = rng.choice([-1.0, 1.0], size=n)
        P[np.arange(n), axis] = side
    elif kind == "line_segment":
        P = np.zeros((n, 3))
        P[:, 2] = rng.uniform(-1.0, 1.0, size=n)
    else:
        P = _sample_torus(n, rng, major=1.0, minor=0.35)
    if noise_sigma > 0:
        P = P + noise_sigma * rng.standard_normal(P.shape)
    return PointCloud(P, cloud_label=SHAPE_KINDS.index(kind))


def _sample_torus(n, rng, major, minor):
    # area-uniform via rejection on the tube angle
    out = np.empty((0, 3))
    while out.shape[0] < n:
        u = rng.uniform(0, 2 * np.pi, size=2 * n)
        v = rng.uniform(0, 2 * np.pi, size=2 * n)
        keep = rng.uniform(0, major + minor, size=2 * n) < major + minor * np.cos(v)
        u, v = u[keep], v[keep]
        ring = major + minor * np.cos(v)
        pts = np.column_stack([ring * np.cos(u), ring * np.sin(u), minor * np.sin(v)])
        out = np.vstack([out, pts])
    return out[:n]


def generate_tsp_instance(n, rng_seed=0):
    n = check_int(n, "n", low=2)
    rng = np.random.default_rng(rng_seed)
    return PointCloud(rng.uniform(0.0, 1.0, size=(n, 2)))


@dataclass(frozen=True, eq=False)
class CvrpInstance:
    points: PointCloud
    depot: np.ndarray
    demands: np.ndarray
    capacity: float = 1.0

    def __post_init__(self):
        if not isinstance(self.points, PointCloud):
            object.__setattr__(self, "points", PointCloud(self.points))
        depot = _frozen(np.reshape(self.depot, -1))
        if depot.shape[0] != self.points.d:
            raise InvalidInputError("depot dimension does not match the points")
        demands = _frozen(np.reshape(self.demands, -1))
        if demands.shape[0] != self.points.n:
            raise InvalidInputError("need one demand per point")
        if np.any(demands <= 0) or not np.all(np.isfinite(demands)):
            raise InvalidInputError("demands must be positive and finite")
        if not (self.capacity > 0):
            raise InvalidInputError("capacity must be positive")
        object.__setattr__(self, "depot", depot)
        object.__setattr__(self, "demands", demands)
        object.__setattr__(self, "capacity", float(self.capacity))

    @property
    def n(self):
        return self.points.n

    def all_coords(self):
        """Depot first, then customers: the ``(N + 1, d)`` matrix routed over."""
        return np.vstack([self.depot[None, :], self.points.coords])

    def with_all_coords(self, coords):
        coords = np.asarray(coords, dtype=np.float64)
        return CvrpInstance(PointCloud(coords[1:]), coords[0], self.demands, self.capacity)


def generate_cvrp_instance(n, rng_seed=0):
    """Customers and depot uniform in the unit square, integer demands 1..9 scaled by the size's divisor."""
    n = check_int(n, "n", low=1)
    rng = np.random.default_rng(rng_seed)
    points = rng.uniform(0.0, 1.0, size=(n, 2))
    depot = rng.uniform(0.0, 1.0, size=2)
    raw = rng.integers(1, 10, size=n)
    divisor = CVRP_DEMAND_SCALE.get(n, 50.0)
    return CvrpInstance(PointCloud(points), depot, raw / divisor, 1.0)


def spawn_seeds(root_seed, count):
    """Independent child seed sequences; results do not depend on evaluation order."""
    return np.random.SeedSequence(root_seed).spawn(count)

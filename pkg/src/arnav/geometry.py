"""Labeled point sets and rigid transforms.

A point is a finite ``(3,)`` float array in millimeters.  Transforms map
``p -> R @ p + t`` and compose right-to-left, so ``a @ b`` applies ``b`` first.
All objects are immutable once built.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_point
from .exceptions import ValidationError

TOL = 1e-9


def _frozen(arr):
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LabeledPointSet:
    """An ordered set of uniquely labeled 3D points."""

    labels: tuple
    points: np.ndarray

    def __post_init__(self):
        labels = tuple(str(lbl) for lbl in self.labels)
        if not labels:
            raise ValidationError("labeled point set must be non-empty")
        if len(set(labels)) != len(labels):
            dupes = sorted({lbl for lbl in labels if labels.count(lbl) > 1})
            raise ValidationError(f"duplicate labels: {', '.join(dupes)}")
        points = np.asarray(self.points, dtype=float)
        if points.ndim != 2 or points.shape[1] != 3:
            raise ValidationError(f"labeled points must have shape (n, 3), got {points.shape}")
        if not np.isfinite(points).all():
            raise ValidationError("labeled points contain non-finite coordinates")
        if len(points) != len(labels):
            raise ValidationError("labels and points differ in length")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "points", _frozen(points))

    @classmethod
    def from_mapping(cls, mapping):
        """Build from ``{label: (x, y, z)}``, preserving insertion order."""
        labels = list(mapping)
        return cls(tuple(labels), np.array([mapping[k] for k in labels], dtype=float).reshape(-1, 3))

    def __len__(self):
        return len(self.labels)

    def __contains__(self, label):
        return label in self._index

    def __getitem__(self, label):
        return self.points[self._index[label]]

    def __iter__(self):
        return iter(zip(self.labels, self.points))

    @property
    def _index(self):
        # cached lazily; the dataclass is frozen so bypass __setattr__
        try:
            return self.__dict__["_idx"]
        except KeyError:
            idx = {lbl: i for i, lbl in enumerate(self.labels)}
            self.__dict__["_idx"] = idx
            return idx

    def index(self, label):
        return self._index[label]

    def select(self, labels):
        labels = list(labels)
        return LabeledPointSet(tuple(labels), self.points[[self._index[lbl] for lbl in labels]])

    def common_labels(self, other):
        """Labels present in both sets, in this set's order."""
        return [lbl for lbl in self.labels if lbl in other]

    def transformed(self, transform):
        return LabeledPointSet(self.labels, transform.apply(self.points))

    def to_dict(self):
        return {lbl: [float(v) for v in p] for lbl, p in self}

    def __eq__(self, other):
        if not isinstance(other, LabeledPointSet):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(self.points, other.points)

    def __repr__(self):
        return f"LabeledPointSet({len(self)} points: {', '.join(self.labels)})"


def check_rotation(R, tol=TOL):
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        raise ValidationError("rotation must be a finite 3x3 matrix")
    if np.max(np.abs(R.T @ R - np.eye(3))) > tol:
        raise ValidationError("rotation is not orthonormal")
    if abs(np.linalg.det(R) - 1.0) > tol:
        raise ValidationError("rotation determinant is not +1")
    return R


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Proper rigid motion ``p -> rotation @ p + translation`` (mm)."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", _frozen(check_rotation(self.rotation)))
        object.__setattr__(self, "translation", _frozen(check_point(self.translation, "translation")))

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_translation(cls, t):
        return cls(np.eye(3), t)

    @classmethod
    def from_matrix(cls, M):
        M = np.asarray(M, dtype=float)
        if M.shape != (4, 4) or not np.allclose(M[3], [0, 0, 0, 1]):
            raise ValidationError("expected a homogeneous 4x4 matrix")
        return cls(M[:3, :3], M[:3, 3])

    @classmethod
    def from_rotvec(cls, rotvec, translation=(0.0, 0.0, 0.0)):
        """Rotation from an axis-angle vector (radians) via Rodrigues' formula."""
        rotvec = np.asarray(rotvec, dtype=float)
        angle = np.linalg.norm(rotvec)
        if angle == 0.0:
            return cls(np.eye(3), translation)
        k = rotvec / angle
        K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
        R = np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * K @ K
        return cls(R, translation)

    def as_matrix(self):
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M

    def apply(self, points):
        """Map a single point ``(3,)`` or an ``(n, 3)`` array."""
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation

    def compose(self, other):
        """Transform applying ``other`` first, then ``self``."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    __matmul__ = compose

    def inverse(self):
        Rt = self.rotation.T
        return RigidTransform(Rt, -Rt @ self.translation)

    @property
    def rotation_angle(self):
        """Geodesic rotation angle in radians."""
        return rotation_angle(self.rotation)

    def allclose(self, other, atol=TOL):
        return np.allclose(self.rotation, other.rotation, rtol=0, atol=atol) and np.allclose(
            self.translation, other.translation, rtol=0, atol=atol
        )

    def to_dict(self):
        return {
            "rotation": [[float(v) for v in row] for row in self.rotation],
            "translation": [float(v) for v in self.translation],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["rotation"], dtype=float), np.asarray(d["translation"], dtype=float))

    def __eq__(self, other):
        if not isinstance(other, RigidTransform):
            return NotImplemented
        return np.array_equal(self.rotation, other.rotation) and np.array_equal(
            self.translation, other.translation
        )

    def __repr__(self):
        return (
            f"RigidTransform(angle={np.degrees(self.rotation_angle):.6g} deg, "
            f"translation={np.array2string(self.translation, precision=6)})"
        )


def rotation_angle(R):
    """Geodesic angle of a rotation matrix, radians.

    Uses ``atan2(|skew|, trace)`` rather than ``arccos`` so tiny angles keep
    full precision.
    """
    R = np.asarray(R, dtype=float)
    skew = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    return float(np.arctan2(np.linalg.norm(skew) / 2.0, (np.trace(R) - 1.0) / 2.0))


def apply(t, p):
    return t.apply(p)


def compose(a, b):
    return a.compose(b)


def invert(t):
    return t.inverse()


def random_rotation(rng):
    """Uniformly distributed rotation matrix (Shoemake's quaternion method)."""
    u1, u2, u3 = rng.random(3)
    q = np.array(
        [
            np.sqrt(1 - u1) * np.sin(2 * np.pi * u2),
            np.sqrt(1 - u1) * np.cos(2 * np.pi * u2),
            np.sqrt(u1) * np.sin(2 * np.pi * u3),
            np.sqrt(u1) * np.cos(2 * np.pi * u3),
        ]
    )
    x, y, z, w = q
    R = np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )
    return R


def random_transform(rng, translation_scale=100.0):
    return RigidTransform(random_rotation(rng), rng.uniform(-translation_scale, translation_scale, 3))

"""Labeled point-to-point rigid registration (Kabsch/Arun SVD solution).

Correspondence is by label only.  No scale is estimated and the returned
rotation is always proper.
"""

import logging
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_points
from .exceptions import DegenerateConfiguration, InsufficientCorrespondence, ValidationError
from .geometry import LabeledPointSet, RigidTransform

logger = logging.getLogger(__name__)

MIN_CORRESPONDENCES = 3
# ratio of the two largest principal spreads below which the points are
# treated as collinear
COLLINEAR_RTOL = 1e-9


@dataclass(frozen=True)
class RegistrationResult:
    transform: RigidTransform
    fre_mean: float
    fre_rms: float
    per_point_residuals: tuple
    unmatched_source: tuple = ()
    unmatched_target: tuple = ()

    def __post_init__(self):
        if self.fre_mean < 0:
            raise ValidationError("fre_mean must be >= 0")
        # power-mean inequality; slack for rounding
        if self.fre_rms < self.fre_mean * (1 - 1e-12) - 1e-15:
            raise ValidationError("fre_rms below fre_mean")

    @property
    def labels(self):
        return tuple(lbl for lbl, _ in self.per_point_residuals)

    def to_dict(self):
        return {
            "transform": self.transform.to_dict(),
            "fre_mean": self.fre_mean,
            "fre_rms": self.fre_rms,
            "per_point_residuals": {lbl: r for lbl, r in self.per_point_residuals},
            "unmatched_source": list(self.unmatched_source),
            "unmatched_target": list(self.unmatched_target),
        }


def _check_spread(A0):
    # singular values of the centered points, not eigenvalues of A0'A, so a
    # line stays detectably thin instead of picking up sqrt(eps) noise
    spread = np.linalg.svd(A0, compute_uv=False)
    if spread[0] == 0.0 or spread[1] <= COLLINEAR_RTOL * spread[0]:
        raise DegenerateConfiguration(
            "corresponding points are collinear; rotation about their line is unobservable"
        )


def kabsch(A, B):
    """Proper rotation ``R`` and translation ``t`` minimizing ``sum |R a + t - b|^2``.

    ``A`` and ``B`` are matched ``(n, 3)`` arrays.  Raises
    :class:`DegenerateConfiguration` when the points are collinear.
    """
    ca = A.mean(axis=0)
    cb = B.mean(axis=0)
    A0 = A - ca
    B0 = B - cb

    _check_spread(A0)

    H = A0.T @ B0
    U, S, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    if d == 0:
        d = 1.0
    # flipping the column paired with the smallest singular value keeps det = +1
    D = np.diag([1.0, 1.0, d])
    R = Vt.T @ D @ U.T
    t = cb - R @ ca
    return R, t


def kabsch_batch(A, B):
    """Vectorized :func:`kabsch` of one source ``(n, 3)`` onto many targets ``(m, n, 3)``.

    Returns ``R`` ``(m, 3, 3)``, ``t`` ``(m, 3)`` and the per-target mean
    residual distance ``(m,)``.
    """
    B = np.asarray(B, dtype=float)
    ca = A.mean(axis=0)
    A0 = A - ca
    _check_spread(A0)
    cb = B.mean(axis=1)
    H = np.einsum("ni,mnj->mij", A0, B - cb[:, None, :])
    U, _, Vt = np.linalg.svd(H)
    V = np.swapaxes(Vt, 1, 2)
    Ut = np.swapaxes(U, 1, 2)
    d = np.sign(np.linalg.det(V @ Ut))
    d[d == 0] = 1.0
    V[:, :, 2] *= d[:, None]
    R = V @ Ut
    t = cb - np.einsum("mij,j->mi", R, ca)
    fitted = np.einsum("mij,nj->mni", R, A) + t[:, None, :]
    fre = np.linalg.norm(fitted - B, axis=2).mean(axis=1)
    return R, t, fre


def solve_rigid(source, target, min_correspondences=MIN_CORRESPONDENCES):
    """Rigid transform mapping ``source`` onto ``target`` over shared labels.

    Parameters
    ----------
    source, target : LabeledPointSet
    min_correspondences : int
        Minimum number of shared labels; never below 3.

    Returns
    -------
    RegistrationResult
        Residuals are reported per shared label, in ``source`` order.  Labels
        present on only one side are listed in ``unmatched_source`` /
        ``unmatched_target``.
    """
    min_correspondences = max(int(min_correspondences), MIN_CORRESPONDENCES)
    labels = source.common_labels(target)
    if len(labels) < min_correspondences:
        raise InsufficientCorrespondence(
            f"{len(labels)} common labels, need at least {min_correspondences}"
        )
    unmatched_source = tuple(lbl for lbl in source.labels if lbl not in target)
    unmatched_target = tuple(lbl for lbl in target.labels if lbl not in source)
    if unmatched_source or unmatched_target:
        logger.debug(
            "unmatched labels: source=%s target=%s", unmatched_source, unmatched_target
        )

    A = source.points[[source.index(lbl) for lbl in labels]]
    B = target.points[[target.index(lbl) for lbl in labels]]
    R, t = kabsch(A, B)
    transform = RigidTransform(R, t)
    dist = np.linalg.norm(transform.apply(A) - B, axis=1)
    return RegistrationResult(
        transform=transform,
        fre_mean=float(dist.mean()),
        fre_rms=float(np.sqrt(np.mean(dist * dist))),
        per_point_residuals=tuple(zip(labels, (float(v) for v in dist))),
        unmatched_source=unmatched_source,
        unmatched_target=unmatched_target,
    )


class RigidRegistration(TransformerMixin, BaseEstimator):
    """Estimator form of :func:`solve_rigid` for matched arrays.

    ``fit(X, y)`` takes row-matched ``(n, 3)`` source and target points (or
    two :class:`LabeledPointSet` objects); ``transform(X)`` maps points from
    the source frame into the target frame.
    """

    def __init__(self, min_correspondences=MIN_CORRESPONDENCES):
        self.min_correspondences = min_correspondences

    def fit(self, X, y):
        if isinstance(X, LabeledPointSet):
            source, target = X, y
        else:
            X = check_points(X, name="source")
            y = check_points(y, name="target")
            if X.shape != y.shape:
                raise ValidationError("source and target must have the same shape")
            labels = tuple(str(i) for i in range(len(X)))
            source, target = LabeledPointSet(labels, X), LabeledPointSet(labels, y)
        result = solve_rigid(source, target, self.min_correspondences)
        self.result_ = result
        self.transform_ = result.transform
        self.rotation_ = result.transform.rotation
        self.translation_ = result.transform.translation
        self.fre_mean_ = result.fre_mean
        self.fre_rms_ = result.fre_rms
        return self

    def transform(self, X):
        check_is_fitted(self, "transform_")
        return self.transform_.apply(check_points(X))

    def inverse_transform(self, X):
        check_is_fitted(self, "transform_")
        return self.transform_.inverse().apply(check_points(X))

"""Sphere-center estimation from surface vertices.

Two stages: a linear (algebraic) least-squares fit that needs no starting
point, followed by Gauss-Newton minimization of the geometric distance
``sum((|p - c| - r)**2)``.  The algebraic fit is biased on partial caps, which
is what CT-visible markers usually give, so refinement is on by default.
"""

import logging
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_points
from .exceptions import DegenerateInput, NoConvergence, ValidationError

logger = logging.getLogger(__name__)

COND_THRESHOLD = 1e12
STEP_TOL = 1e-10
MAX_ITER = 100
MAX_HALVINGS = 20
COST_ROUNDOFF = 64 * np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class SphereFit:
    center: np.ndarray
    radius: float
    rms_residual: float
    n_points: int

    def __post_init__(self):
        if not self.radius > 0:
            raise ValidationError(f"radius must be > 0, got {self.radius}")
        if self.rms_residual < 0:
            raise ValidationError("rms_residual must be >= 0")
        if self.n_points < 4:
            raise ValidationError("a sphere fit needs at least 4 points")

    def to_dict(self):
        return {
            "center": [float(v) for v in self.center],
            "radius": float(self.radius),
            "rms_residual": float(self.rms_residual),
            "n_points": int(self.n_points),
        }


def _rms_radial(points, center, radius):
    d = np.linalg.norm(points - center, axis=1) - radius
    return float(np.sqrt(np.mean(d * d)))


def fit_sphere_algebraic(points, cond_threshold=COND_THRESHOLD):
    """Linear least-squares sphere through ``points``.

    Solves ``|p|^2 = 2 c.p + (r^2 - |c|^2)`` for ``c`` and the constant in one
    linear solve.  Points are centered and scaled first so the conditioning
    test does not depend on where the sphere sits.

    Raises
    ------
    DegenerateInput
        If the normal equations have condition number above
        ``cond_threshold`` (coplanar or collinear samples).
    """
    P = check_points(points, min_points=4, name="sphere points")
    centroid = P.mean(axis=0)
    Q = P - centroid
    scale = np.sqrt(np.mean(np.sum(Q * Q, axis=1)))
    if scale == 0.0:
        raise DegenerateInput("all sphere points coincide")
    Q = Q / scale

    A = np.column_stack([2.0 * Q, np.ones(len(Q))])
    b = np.sum(Q * Q, axis=1)
    normal = A.T @ A
    cond = np.linalg.cond(normal)
    if not np.isfinite(cond) or cond > cond_threshold:
        raise DegenerateInput(
            f"points cannot determine a sphere (normal-equation condition number {cond:.3g})"
        )
    sol = np.linalg.solve(normal, A.T @ b)
    c = sol[:3]
    r2 = sol[3] + c @ c
    if r2 <= 0:
        raise DegenerateInput("algebraic fit produced a non-positive squared radius")

    center = c * scale + centroid
    radius = float(np.sqrt(r2) * scale)
    return SphereFit(center, radius, _rms_radial(P, center, radius), len(P))


def refine_sphere_geometric(points, init, max_iter=MAX_ITER, tol=STEP_TOL):
    """Gauss-Newton refinement of a sphere fit on geometric distances.

    Each step solves the linearized problem by least squares; a step that
    increases the residual is halved (at most 20 times).  The returned RMS
    residual is never above ``init``'s.

    Raises
    ------
    NoConvergence
        If the step norm is still above ``tol`` after ``max_iter`` iterations.
    """
    P = check_points(points, min_points=4, name="sphere points")
    x = np.append(np.asarray(init.center, dtype=float), float(init.radius))

    def residuals(params):
        return np.linalg.norm(P - params[:3], axis=1) - params[3]

    res = residuals(x)
    cost = res @ res
    step_norm = np.inf
    for _ in range(max_iter):
        diff = P - x[:3]
        dist = np.linalg.norm(diff, axis=1)
        if np.any(dist == 0):
            raise DegenerateInput("a sample point coincides with the sphere center")
        J = np.empty((len(P), 4))
        J[:, :3] = -diff / dist[:, None]
        J[:, 3] = -1.0
        # normal equations are 4x4; the step only steers the descent, the
        # cost is always evaluated exactly, so their squared conditioning is
        # harmless here
        try:
            delta = np.linalg.solve(J.T @ J, -(J.T @ res))
        except np.linalg.LinAlgError:
            delta, *_ = np.linalg.lstsq(J, -res, rcond=None)

        # near the minimum the true decrease falls below the rounding of
        # the cost itself; treat changes inside that band as non-increasing
        slack = COST_ROUNDOFF * cost
        scale = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = x + scale * delta
            trial_res = residuals(trial)
            trial_cost = trial_res @ trial_res
            if trial_cost <= cost + slack:
                break
            scale *= 0.5
        else:
            # no descent along the GN direction: already at the minimum to
            # working precision
            step_norm = 0.0
            break

        step_norm = float(np.linalg.norm(scale * delta))
        x, res, cost = trial, trial_res, trial_cost
        if step_norm <= tol:
            break
    else:
        if step_norm > tol:
            raise NoConvergence(
                f"sphere refinement did not converge after {max_iter} iterations "
                f"(last step {step_norm:.3g} mm)"
            )

    rms = float(np.sqrt(cost / len(P)))
    if x[3] <= 0:
        raise NoConvergence("refinement drove the radius to a non-positive value")
    if rms > init.rms_residual + 1e-12:
        # only reachable when init.rms_residual is stale
        logger.debug("init rms %.3g below refined %.3g", init.rms_residual, rms)
        return init
    return SphereFit(x[:3].copy(), float(x[3]), rms, len(P))


def fit_sphere(points, refine=True, max_iter=MAX_ITER, tol=STEP_TOL):
    """Algebraic fit, refined geometrically when ``refine`` is set.

    Falls back to the algebraic fit (with a warning) when refinement fails to
    converge.
    """
    init = fit_sphere_algebraic(points)
    if not refine:
        return init
    try:
        return refine_sphere_geometric(points, init, max_iter=max_iter, tol=tol)
    except NoConvergence as exc:
        logger.warning("%s; keeping algebraic fit", exc)
        return init


class SphereFitter(TransformerMixin, BaseEstimator):
    """Estimator wrapper around :func:`fit_sphere`.

    After ``fit(X)`` the estimator exposes ``center_``, ``radius_``,
    ``rms_residual_`` and ``n_points_``.  ``transform`` returns the signed
    distance of each row of ``X`` from the fitted sphere surface.
    """

    def __init__(self, refine=True, max_iter=MAX_ITER, tol=STEP_TOL):
        self.refine = refine
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y=None):
        fit = fit_sphere(X, refine=self.refine, max_iter=self.max_iter, tol=self.tol)
        self.fit_ = fit
        self.center_ = fit.center
        self.radius_ = fit.radius
        self.rms_residual_ = fit.rms_residual
        self.n_points_ = fit.n_points
        return self

    def transform(self, X):
        check_is_fitted(self, "fit_")
        X = check_points(X)
        return (np.linalg.norm(X - self.center_, axis=1) - self.radius_).reshape(-1, 1)

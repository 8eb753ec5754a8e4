"""Target-error metrics: per-fiducial measurements, trial rows, experiment averages."""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_point
from .exceptions import (
    EmptyWindow,
    InsufficientMeasurements,
    MixedExperimentKinds,
    ValidationError,
)

logger = logging.getLogger(__name__)

EXPERIMENT_KINDS = ("no_feedback", "holographic_feedback", "physical_feedback")
TIP_AGGREGATES = ("max", "mean")
SD_POOLING = ("rms", "mean")


def check_kind(kind):
    if kind not in EXPERIMENT_KINDS:
        raise ValidationError(f"unknown experiment kind {kind!r}; expected one of {EXPERIMENT_KINDS}")
    return kind


@dataclass(frozen=True)
class Annotation:
    fiducial_label: str
    start: int
    end: int

    def __post_init__(self):
        if self.start > self.end:
            raise ValidationError(f"annotation for {self.fiducial_label}: start {self.start} > end {self.end}")

    def to_dict(self):
        return {"fiducial": self.fiducial_label, "start": self.start, "end": self.end}


@dataclass(frozen=True, eq=False)
class FiducialMeasurement:
    fiducial_label: str
    tip_mean_lab: np.ndarray
    tip_sd: float
    target_error: float
    n_observations: int = 1
    # set when tip_sd rests on a single observation
    single_observation: bool = False

    def to_dict(self):
        return {
            "fiducial": self.fiducial_label,
            "tip_mean_lab": [float(v) for v in self.tip_mean_lab],
            "tip_sd": self.tip_sd,
            "target_error": self.target_error,
            "n_observations": self.n_observations,
            "single_observation": self.single_observation,
        }


def measure_fiducial(observations, gt, label=""):
    """Mean tip position over a dwell window and its distance to ``gt``.

    ``observations`` are :class:`TipObservation` objects (or raw points).
    ``tip_sd`` is the 3D RMS sample SD of the tip; with one observation it is
    0 and ``single_observation`` is set.
    """
    pts = np.array([getattr(o, "tip_lab", o) for o in observations], dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        raise EmptyWindow(f"no tip observations for fiducial {label!r}")
    gt = check_point(gt, "ground truth")
    mean = pts.mean(axis=0)
    single = len(pts) == 1
    if single:
        logger.warning("fiducial %r: single observation, tip SD reported as 0", label)
        tip_sd = 0.0
    else:
        tip_sd = float(np.sqrt(np.sum(pts.var(axis=0, ddof=1))))
    return FiducialMeasurement(
        fiducial_label=label,
        tip_mean_lab=mean,
        tip_sd=tip_sd,
        target_error=float(np.linalg.norm(mean - gt)),
        n_observations=len(pts),
        single_observation=single,
    )


@dataclass(frozen=True)
class TrialResult:
    trial_id: str
    experiment_kind: str
    error_mean: float
    error_sd: float
    tip_error: float
    gt_error: float
    n_fiducials: int
    target_errors: tuple = field(default=(), compare=False)

    def __post_init__(self):
        check_kind(self.experiment_kind)
        for name in ("error_mean", "error_sd", "tip_error", "gt_error"):
            if not getattr(self, name) >= 0:
                raise ValidationError(f"{name} must be >= 0")
        if self.target_errors and len(self.target_errors) != self.n_fiducials:
            raise ValidationError("target_errors length differs from n_fiducials")

    def to_dict(self):
        d = {
            "trial_id": self.trial_id,
            "experiment_kind": self.experiment_kind,
            "error_mean": self.error_mean,
            "error_sd": self.error_sd,
            "tip_error": self.tip_error,
            "gt_error": self.gt_error,
            "n_fiducials": self.n_fiducials,
        }
        if self.target_errors:
            d["target_errors"] = list(self.target_errors)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(
            trial_id=str(d["trial_id"]),
            experiment_kind=d["experiment_kind"],
            error_mean=float(d["error_mean"]),
            error_sd=float(d["error_sd"]),
            tip_error=float(d["tip_error"]),
            gt_error=float(d["gt_error"]),
            n_fiducials=int(d["n_fiducials"]),
            target_errors=tuple(float(v) for v in d.get("target_errors", ())),
        )


def summarize_trial(measurements, gt_uncertainty, trial_id="1", experiment_kind="physical_feedback",
                    tip_aggregate="max"):
    """One summary-table row from the fiducial measurements of a trial.

    ``error_sd`` uses the (n - 1) estimator.  ``tip_error`` is the max (or
    mean) of the per-fiducial tip SDs; ``gt_uncertainty`` passes through as
    ``gt_error``.
    """
    if tip_aggregate not in TIP_AGGREGATES:
        raise ValidationError(f"tip_aggregate must be one of {TIP_AGGREGATES}")
    measurements = list(measurements)
    if len(measurements) < 2:
        raise InsufficientMeasurements(f"{len(measurements)} measurement(s), need at least 2")
    errors = np.array([m.target_error for m in measurements])
    tips = np.array([m.tip_sd for m in measurements])
    return TrialResult(
        trial_id=str(trial_id),
        experiment_kind=check_kind(experiment_kind),
        error_mean=float(errors.mean()),
        error_sd=float(errors.std(ddof=1)),
        tip_error=float(tips.max() if tip_aggregate == "max" else tips.mean()),
        gt_error=float(gt_uncertainty),
        n_fiducials=len(measurements),
        target_errors=tuple(float(e) for e in errors),
    )


@dataclass(frozen=True)
class ExperimentSummary:
    """Average row of an experiment plus fiducial-level pooled statistics.

    ``pooled`` is ``(mean, sd, n)`` over all fiducial errors of all trials.
    """

    experiment_kind: str
    trials: tuple
    error: float
    sd: float
    tip_error: float
    gt_error: float
    pooled: tuple
    sd_pooling: str = "rms"

    @property
    def n_total(self):
        return sum(t.n_fiducials for t in self.trials)

    @property
    def averages(self):
        return (self.error, self.sd, self.tip_error, self.gt_error)

    def to_dict(self):
        mean, sd, n = self.pooled
        return {
            "experiment_kind": self.experiment_kind,
            "trials": [t.to_dict() for t in self.trials],
            "average": {
                "error": self.error,
                "sd": self.sd,
                "tip_error": self.tip_error,
                "gt_error": self.gt_error,
                "sd_pooling": self.sd_pooling,
            },
            "pooled": {"mean": mean, "sd": sd, "n": n},
        }

    @classmethod
    def from_dict(cls, d):
        avg = d["average"]
        pooled = d["pooled"]
        return cls(
            experiment_kind=check_kind(d["experiment_kind"]),
            trials=tuple(TrialResult.from_dict(t) for t in d["trials"]),
            error=float(avg["error"]),
            sd=float(avg["sd"]),
            tip_error=float(avg["tip_error"]),
            gt_error=float(avg["gt_error"]),
            pooled=(float(pooled["mean"]), float(pooled["sd"]), int(pooled["n"])),
            sd_pooling=avg.get("sd_pooling", "rms"),
        )


def _pool_sd(values, how):
    values = np.asarray(values, dtype=float)
    if how == "rms":
        return float(np.sqrt(np.mean(values**2)))
    return float(values.mean())


def pooled_moments(trials):
    """Fiducial-level ``(mean, sd, n)`` across trials.

    Uses the raw target errors when every trial carries them; otherwise the
    same quantity is rebuilt exactly from the per-trial means, (n - 1) SDs and
    counts.
    """
    if all(t.target_errors for t in trials):
        allv = np.concatenate([np.asarray(t.target_errors) for t in trials])
        sd = allv.std(ddof=1) if len(allv) > 1 else 0.0
        return float(allv.mean()), float(sd), len(allv)
    n = np.array([t.n_fiducials for t in trials], dtype=float)
    m = np.array([t.error_mean for t in trials])
    s = np.array([t.error_sd for t in trials])
    total = n.sum()
    mean = float((n * m).sum() / total)
    ss = ((n - 1) * s**2).sum() + (n * (m - mean) ** 2).sum()
    sd = math.sqrt(ss / (total - 1)) if total > 1 else 0.0
    return mean, float(sd), int(total)


def summarize_experiment(trials, sd_pooling="rms"):
    """Average row over the trials of one experiment.

    ``error`` is the arithmetic mean of the trial errors.  The spread columns
    (SD, tip error, gt error) are combined by root-mean-square by default,
    i.e. the pooled SD of equal-size trials; ``sd_pooling="mean"`` takes their
    plain arithmetic mean instead.
    """
    trials = tuple(trials)
    if not trials:
        raise InsufficientMeasurements("no trials to summarize")
    if sd_pooling not in SD_POOLING:
        raise ValidationError(f"sd_pooling must be one of {SD_POOLING}")
    kinds = {t.experiment_kind for t in trials}
    if len(kinds) > 1:
        raise MixedExperimentKinds(f"trials mix experiment kinds: {sorted(kinds)}")
    return ExperimentSummary(
        experiment_kind=trials[0].experiment_kind,
        trials=trials,
        error=float(np.mean([t.error_mean for t in trials])),
        sd=_pool_sd([t.error_sd for t in trials], sd_pooling),
        tip_error=_pool_sd([t.tip_error for t in trials], sd_pooling),
        gt_error=_pool_sd([t.gt_error for t in trials], sd_pooling),
        pooled=pooled_moments(trials),
        sd_pooling=sd_pooling,
    )

"""Tracker repeatability: static-marker spread and rigid-body distance constancy.

All SDs use the (n - 1) estimator and a two-pass (mean, then deviations)
computation.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .exceptions import InsufficientFrames


@dataclass(frozen=True, eq=False)
class MarkerSD:
    label: str
    axis_sd: np.ndarray
    rms_sd: float
    n_frames: int

    def to_dict(self):
        return {
            "label": self.label,
            "axis_sd": [float(v) for v in self.axis_sd],
            "rms_sd": self.rms_sd,
            "n_frames": self.n_frames,
        }


@dataclass(frozen=True)
class PairDistance:
    labels: tuple
    mean: float
    sd: float
    variance: float
    n_frames: int

    def to_dict(self):
        return {
            "labels": list(self.labels),
            "mean": self.mean,
            "sd": self.sd,
            "variance": self.variance,
            "n_frames": self.n_frames,
        }


@dataclass(frozen=True)
class StabilityReport:
    per_marker_sd: tuple
    pairwise: tuple
    n_frames: int

    @property
    def max_pairwise_sd(self):
        return max((p.sd for p in self.pairwise), default=0.0)

    @property
    def max_pairwise_variance(self):
        return max((p.variance for p in self.pairwise), default=0.0)

    @property
    def max_marker_axis_sd(self):
        return max((float(m.axis_sd.max()) for m in self.per_marker_sd), default=0.0)

    def to_dict(self):
        return {
            "n_frames": self.n_frames,
            "per_marker_sd": [m.to_dict() for m in self.per_marker_sd],
            "max_marker_axis_sd": self.max_marker_axis_sd,
            "pairwise": [p.to_dict() for p in self.pairwise],
            "max_pairwise_sd": self.max_pairwise_sd,
            "max_pairwise_variance": self.max_pairwise_variance,
        }


def sample_sd(values, axis=0):
    """Two-pass (n - 1) standard deviation."""
    values = np.asarray(values, dtype=float)
    n = values.shape[axis]
    mean = values.sum(axis=axis) / n
    dev = values - np.expand_dims(mean, axis)
    return np.sqrt((dev * dev).sum(axis=axis) / (n - 1))


def static_marker_sd(frames, labels=None):
    """Per-axis and 3D RMS SD of each marker's position across frames.

    ``labels`` defaults to every label in the stream.
    """
    labels = frames.labels() if labels is None else list(labels)
    out = []
    for lbl in labels:
        _, pts = frames.track(lbl)
        if len(pts) < 2:
            raise InsufficientFrames(f"marker {lbl!r} visible in {len(pts)} frame(s), need 2")
        axis_sd = sample_sd(pts)
        out.append(MarkerSD(lbl, axis_sd, float(np.sqrt(np.sum(axis_sd**2))), len(pts)))
    return out


def rigid_body_distance_spread(frames, body_labels):
    """Mean and spread of every inter-marker distance across frames.

    Pairs are taken in the order given by ``body_labels``.  Each pair uses the
    frames where both markers are visible.
    """
    out = []
    for a, b in combinations(list(body_labels), 2):
        dists = [
            np.linalg.norm(f.markers[a] - f.markers[b])
            for f in frames
            if a in f.markers and b in f.markers
        ]
        if len(dists) < 2:
            raise InsufficientFrames(f"pair ({a}, {b}) visible together in {len(dists)} frame(s), need 2")
        d = np.array(dists)
        sd = float(sample_sd(d))
        out.append(PairDistance((a, b), float(d.mean()), sd, sd * sd, len(d)))
    return out


def stability_report(frames, static_labels=None, body_labels=None):
    """Static SDs for ``static_labels`` (all labels by default) plus pairwise
    distance spread over ``body_labels`` when given."""
    per_marker = static_marker_sd(frames, static_labels)
    pairwise = rigid_body_distance_spread(frames, body_labels) if body_labels else []
    return StabilityReport(tuple(per_marker), tuple(pairwise), len(frames))

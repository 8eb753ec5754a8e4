"""Timestamped labeled marker observations from the external tracker."""

from dataclasses import dataclass

import numpy as np

from .exceptions import NonMonotonicFrames, ValidationError
from .geometry import LabeledPointSet


@dataclass(frozen=True)
class Frame:
    frame_id: int
    time: float
    markers: LabeledPointSet

    @property
    def labels(self):
        return self.markers.labels


@dataclass(frozen=True)
class MarkerFrameStream:
    frames: tuple

    def __post_init__(self):
        frames = tuple(self.frames)
        for prev, cur in zip(frames, frames[1:]):
            if cur.frame_id <= prev.frame_id:
                raise NonMonotonicFrames(
                    f"frame id {cur.frame_id} follows {prev.frame_id}; ids must strictly increase"
                )
        object.__setattr__(self, "frames", frames)

    @classmethod
    def from_arrays(cls, labels, positions, times=None, frame_ids=None):
        """Stream where every frame sees the same ``labels``.

        ``positions`` has shape ``(n_frames, n_labels, 3)``.
        """
        positions = np.asarray(positions, dtype=float)
        if positions.ndim != 3 or positions.shape[1:] != (len(labels), 3):
            raise ValidationError("positions must have shape (n_frames, n_labels, 3)")
        n = len(positions)
        frame_ids = range(n) if frame_ids is None else frame_ids
        times = np.zeros(n) if times is None else times
        return cls(
            tuple(
                Frame(int(fid), float(t), LabeledPointSet(tuple(labels), pos))
                for fid, t, pos in zip(frame_ids, times, positions)
            )
        )

    def __len__(self):
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)

    def __getitem__(self, i):
        return self.frames[i]

    def labels(self):
        """All labels seen, in order of first appearance."""
        seen = {}
        for frame in self.frames:
            for lbl in frame.labels:
                seen.setdefault(lbl, None)
        return list(seen)

    def track(self, label):
        """``(frame_ids, positions)`` for the frames where ``label`` is visible."""
        ids, pts = [], []
        for frame in self.frames:
            if label in frame.markers:
                ids.append(frame.frame_id)
                pts.append(frame.markers[label])
        return np.array(ids, dtype=int), np.array(pts, dtype=float).reshape(-1, 3)

    def window(self, start, end):
        """Frames with ``start <= frame_id <= end``."""
        return MarkerFrameStream(tuple(f for f in self.frames if start <= f.frame_id <= end))

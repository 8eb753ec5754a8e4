"""Hologram anchoring against head-mounted display tracking drift.

When the hologram is registered, its pose relative to a fixed anchor (a QR
code attached to the phantom) is stored.  When the anchor is detected again,
the hologram is put back at ``anchor_now @ hologram_in_anchor``, which undoes
any drift that built up in the meantime.

Drift is modelled as rigid perturbations of the device's world frame, applied
on the left.  Physical objects, the anchor included, therefore appear to move
in world coordinates, while a hologram that has not been relocalized keeps its
stale world pose.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import UnorderedEvents, ValidationError
from .geometry import RigidTransform, rotation_angle

KINDS = ("anchor_detected", "drift_step")


@dataclass(frozen=True)
class AnchorBinding:
    hologram_in_anchor: RigidTransform


@dataclass(frozen=True)
class PoseEvent:
    time: float
    kind: str
    pose: RigidTransform

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown event kind {self.kind!r}")

    def to_dict(self):
        d = {"time": float(self.time), "kind": self.kind}
        d.update(self.pose.to_dict())
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["time"]), d["kind"], RigidTransform.from_dict(d))


def bind(anchor_in_world, hologram_in_world):
    return AnchorBinding(anchor_in_world.inverse() @ hologram_in_world)


def relocalize(binding, anchor_in_world_now):
    return anchor_in_world_now @ binding.hologram_in_anchor


def pose_error(current, true):
    """Translation distance (mm) and geodesic angle (degrees) between two poses."""
    dt = float(np.linalg.norm(current.translation - true.translation))
    dr = float(np.degrees(rotation_angle(true.rotation.T @ current.rotation)))
    return dt, dr


@dataclass(frozen=True, eq=False)
class DriftSeries:
    time: np.ndarray
    kind: tuple
    translation: np.ndarray
    rotation_deg: np.ndarray

    def to_rows(self):
        return [
            (float(t), k, float(dt), float(dr))
            for t, k, dt, dr in zip(self.time, self.kind, self.translation, self.rotation_deg)
        ]


def run_drift_trace(events, binding, true_hologram_in_anchor, anchor_in_world=None):
    """Replay a drift trace and report the hologram pose error after each event.

    ``anchor_in_world`` is the true anchor pose at bind time (identity by
    default).  ``drift_step`` events carry a world-frame perturbation;
    ``anchor_detected`` events carry the anchor pose as observed then, which
    may be noisy.

    Raises
    ------
    UnorderedEvents
        If event times decrease.
    """
    anchor_true = RigidTransform.identity() if anchor_in_world is None else anchor_in_world
    hologram = relocalize(binding, anchor_true)
    times, kinds, dts, drs = [], [], [], []
    last = -np.inf
    for i, ev in enumerate(events):
        if ev.time < last:
            raise UnorderedEvents(f"event {i} at t={ev.time} precedes t={last}")
        last = ev.time
        if ev.kind == "drift_step":
            anchor_true = ev.pose @ anchor_true
        else:
            hologram = relocalize(binding, ev.pose)
        dt, dr = pose_error(hologram, anchor_true @ true_hologram_in_anchor)
        times.append(ev.time)
        kinds.append(ev.kind)
        dts.append(dt)
        drs.append(dr)
    return DriftSeries(np.array(times), tuple(kinds), np.array(dts), np.array(drs))


def _small_transform(rng, trans_sd, rot_sd_deg):
    return RigidTransform.from_rotvec(
        rng.normal(0.0, np.radians(rot_sd_deg), 3) if rot_sd_deg > 0 else np.zeros(3),
        rng.normal(0.0, trans_sd, 3) if trans_sd > 0 else np.zeros(3),
    )


def simulate_drift_trace(n_steps, detect_every, step_sd=0.2, step_rot_sd_deg=0.05,
                         anchor_noise_sd=0.0, anchor_noise_rot_deg=0.0, dt=1.0,
                         anchor_in_world=None, seed=0):
    """Random-walk drift trace with periodic anchor re-detection.

    Each drift step is a rigid perturbation with per-axis Gaussian
    translation (``step_sd`` mm) and rotation-vector (``step_rot_sd_deg``)
    components.  After every ``detect_every``-th step the anchor is observed,
    optionally with pose noise.  Uses a Philox counter-based generator seeded
    with ``seed``.
    """
    from .synthetic import make_rng

    if detect_every < 1:
        raise ValidationError("detect_every must be >= 1")
    rng = make_rng(seed)
    anchor = RigidTransform.identity() if anchor_in_world is None else anchor_in_world
    events = []
    for step in range(1, n_steps + 1):
        perturb = _small_transform(rng, step_sd, step_rot_sd_deg)
        anchor = perturb @ anchor
        events.append(PoseEvent(step * dt, "drift_step", perturb))
        if step % detect_every == 0:
            observed = anchor
            if anchor_noise_sd > 0 or anchor_noise_rot_deg > 0:
                observed = _small_transform(rng, anchor_noise_sd, anchor_noise_rot_deg) @ anchor
            events.append(PoseEvent(step * dt, "anchor_detected", observed))
    return events

"""Seeded synthetic scenes and sessions with known ground truth.

Random numbers come from numpy's Philox counter-based bit generator, keyed by
the config seed, so a given seed always yields the same session.

The default scene is a spherical head phantom (radius 90 mm) with 9 markers
on posts 10 mm off the surface, 16 fiducials on the face cap that looks along
+z, and a 5-marker probe whose tip sits about 150 mm from the marker cluster.
These numbers are illustrative.  They were not fitted to any measured device.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import ValidationError
from .geometry import LabeledPointSet, RigidTransform, random_rotation
from .metrics import Annotation, check_kind
from .models import PhantomModel, ProbeModel
from .stream import Frame, MarkerFrameStream


def make_rng(seed):
    return np.random.Generator(np.random.Philox(int(seed)))


HEAD_RADIUS = 90.0
MARKER_STANDOFF = 10.0
FIDUCIAL_CAP_DEG = 40.0
DEFAULT_USER_ERROR = (0.0, 3.0)  # (view-direction bias mm, isotropic sd mm)


def _fibonacci_cap(n, max_polar_deg, min_polar_deg=0.0):
    """``n`` unit vectors spread evenly over a polar band around +z."""
    golden = np.pi * (3.0 - np.sqrt(5.0))
    zmax = np.cos(np.radians(min_polar_deg))
    zmin = np.cos(np.radians(max_polar_deg))
    k = np.arange(n) + 0.5
    z = zmax - (zmax - zmin) * k / n
    r = np.sqrt(1.0 - z * z)
    phi = golden * np.arange(n)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def default_probe():
    markers = {
        "T1": (0.0, 0.0, 120.0),
        "T2": (35.0, 0.0, 135.0),
        "T3": (-20.0, 30.0, 150.0),
        "T4": (-15.0, -35.0, 160.0),
        "T5": (10.0, 20.0, 185.0),
    }
    return ProbeModel(LabeledPointSet.from_mapping(markers), np.zeros(3))


def default_phantom(n_markers=9, n_fiducials=16, head_radius=HEAD_RADIUS):
    marker_dirs = _fibonacci_cap(n_markers, 110.0, 10.0)
    fid_dirs = _fibonacci_cap(n_fiducials, FIDUCIAL_CAP_DEG)
    markers = LabeledPointSet(
        tuple(f"M{i + 1}" for i in range(n_markers)), marker_dirs * (head_radius + MARKER_STANDOFF)
    )
    fiducials = LabeledPointSet(
        tuple(f"F{i + 1:02d}" for i in range(n_fiducials)), fid_dirs * head_radius
    )
    return PhantomModel(markers, fiducials, n_markers=n_markers, n_fiducials=n_fiducials)


@dataclass(frozen=True, eq=False)
class SceneConfig:
    """Scene geometry plus the noise and error parameters of a synthetic session.

    ``hologram_displacement`` is the registration error given to the
    hologram, expressed in the phantom's CT frame.  ``head_center`` and
    ``head_radius`` describe the phantom surface, which the physical-feedback
    model projects onto.
    """

    probe: ProbeModel = field(default_factory=default_probe)
    phantom: PhantomModel = field(default_factory=default_phantom)
    marker_noise_sd: float = 0.25
    tip_window_length: int = 50
    hologram_displacement: RigidTransform = field(default_factory=RigidTransform.identity)
    seed: int = 0
    tremor_sd: float = 0.3
    transition_frames: int = 5
    frame_rate: float = 120.0
    head_center: tuple = (0.0, 0.0, 0.0)
    head_radius: float = HEAD_RADIUS
    view_direction: tuple = (0.0, 0.0, -1.0)
    max_probe_tilt_deg: float = 20.0
    annotations: tuple = ()

    def __post_init__(self):
        for name in ("marker_noise_sd", "tremor_sd"):
            if not getattr(self, name) >= 0:
                raise ValidationError(f"{name} must be >= 0")
        if self.tip_window_length < 1:
            raise ValidationError("tip_window_length must be >= 1")
        if self.transition_frames < 0:
            raise ValidationError("transition_frames must be >= 0")
        if not self.head_radius > 0 or not self.frame_rate > 0:
            raise ValidationError("head_radius and frame_rate must be > 0")
        if np.linalg.norm(self.view_direction) == 0:
            raise ValidationError("view_direction must be non-zero")

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class Session:
    frames: MarkerFrameStream
    annotations: tuple
    ledger: dict
    config: SceneConfig
    experiment_kind: str
    trial_id: str


def generate_sphere_cloud(center, radius, n, coverage="full", cap_deg=90.0, noise_sd=0.0, seed=0):
    """Points sampled uniformly over a sphere (or a polar cap around +z).

    ``coverage="cap"`` keeps directions within ``cap_deg`` of +z, mimicking
    the outward-facing part of a marker visible in CT.  Isotropic Gaussian
    noise with SD ``noise_sd`` is added to every coordinate.
    """
    if n < 4:
        raise ValidationError("need at least 4 points")
    if not radius > 0:
        raise ValidationError("radius must be > 0")
    if coverage not in ("full", "cap"):
        raise ValidationError("coverage must be 'full' or 'cap'")
    rng = make_rng(seed)
    zmin = -1.0 if coverage == "full" else np.cos(np.radians(cap_deg))
    # z uniform on [zmin, 1] gives uniform area density (Archimedes)
    z = rng.uniform(zmin, 1.0, n)
    phi = rng.uniform(0.0, 2.0 * np.pi, n)
    r = np.sqrt(1.0 - z * z)
    dirs = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    pts = np.asarray(center, dtype=float) + radius * dirs
    if noise_sd > 0:
        pts = pts + rng.normal(0.0, noise_sd, pts.shape)
    return pts


def _rotation_between(a, b):
    """Rotation taking unit vector ``a`` onto unit vector ``b``."""
    v = np.cross(a, b)
    c = float(a @ b)
    if c < -1.0 + 1e-12:
        # antiparallel: rotate pi about any axis orthogonal to a
        axis = np.cross(a, [1.0, 0.0, 0.0])
        if np.linalg.norm(axis) < 1e-6:
            axis = np.cross(a, [0.0, 1.0, 0.0])
        axis /= np.linalg.norm(axis)
        return 2.0 * np.outer(axis, axis) - np.eye(3)
    K = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
    return np.eye(3) + K + K @ K / (1.0 + c)


def _axis_rotation(axis, angle):
    return RigidTransform.from_rotvec(np.asarray(axis) * angle).rotation


def _probe_rotation(rng, normal, max_tilt_deg):
    """Probe orientation: shaft along ``normal`` tilted up to ``max_tilt_deg``, random roll."""
    tilt = np.radians(max_tilt_deg) * np.sqrt(rng.random())
    perp = np.cross(normal, rng.normal(size=3))
    perp /= np.linalg.norm(perp)
    shaft = _axis_rotation(perp, tilt) @ normal
    roll = _axis_rotation([0.0, 0.0, 1.0], rng.uniform(0, 2 * np.pi))
    return _rotation_between(np.array([0.0, 0.0, 1.0]), shaft) @ roll


def session_targets(config, phantom_pose, experiment_kind, user_error, rng):
    """Where the user puts the tip for every fiducial, before tremor.

    Returns ``(targets, hologram_points)`` as ``(n_fiducials, 3)`` lab arrays.
    """
    bias, sd = user_error
    phantom = config.phantom
    fid_ct = phantom.fiducials_ct.points
    holo = phantom_pose.apply(config.hologram_displacement.apply(fid_ct))
    view = phantom_pose.rotation @ np.asarray(config.view_direction, dtype=float)
    view /= np.linalg.norm(view)
    errors = bias * view + (rng.normal(0.0, sd, holo.shape) if sd > 0 else np.zeros_like(holo))
    aim = holo + errors
    if experiment_kind != "physical_feedback":
        return aim, holo
    center = phantom_pose.apply(np.asarray(config.head_center, dtype=float))
    radial = aim - center
    norms = np.linalg.norm(radial, axis=1, keepdims=True)
    return center + config.head_radius * radial / norms, holo


def generate_session(config, experiment_kind, user_error=DEFAULT_USER_ERROR, trial_id="1"):
    """Synthetic tracker session for one trial, plus its ground-truth ledger.

    The phantom gets a random lab pose and stays still.  For each fiducial
    the user aims at the displaced hologram, with a depth bias along the view
    direction plus isotropic Gaussian error.  In the physical-feedback kind
    the tip then lands on the real phantom surface at the point nearest the
    aim.  During each dwell window the tip jitters with ``tremor_sd``, except
    in physical feedback where it rests against the surface.  All markers
    get Gaussian noise with SD ``marker_noise_sd``.
    """
    check_kind(experiment_kind)
    bias, sd = (float(v) for v in user_error)
    if sd < 0:
        raise ValidationError("user error sd must be >= 0")
    rng = make_rng(config.seed)
    probe, phantom = config.probe, config.phantom
    sigma = config.marker_noise_sd

    phantom_pose = RigidTransform(random_rotation(rng), rng.uniform(-500.0, 500.0, 3))
    targets, holo = session_targets(config, phantom_pose, experiment_kind, (bias, sd), rng)
    phantom_lab = phantom_pose.apply(phantom.markers_ct.points)
    gt_lab = phantom_pose.apply(phantom.fiducials_ct.points)
    center_ct = np.asarray(config.head_center, dtype=float)
    normals = phantom_pose.rotation @ (
        (phantom.fiducials_ct.points - center_ct)
        / np.linalg.norm(phantom.fiducials_ct.points - center_ct, axis=1, keepdims=True)
    ).T
    tremor = 0.0 if experiment_kind == "physical_feedback" else config.tremor_sd

    labels = phantom.markers_ct.labels + probe.markers_ct.labels
    n_ph = len(phantom.markers_ct)
    positions = []
    annotations = []
    tip_targets = {}
    frame_id = 0
    prev_tip = None
    for i, fid_label in enumerate(phantom.fiducials_ct.labels):
        R = _probe_rotation(rng, normals[:, i], config.max_probe_tilt_deg)
        tip_offset = R @ probe.tip_ct
        probe_body = probe.markers_ct.points @ R.T - tip_offset
        target = targets[i]
        tip_targets[fid_label] = target

        if prev_tip is not None:
            for k in range(1, config.transition_frames + 1):
                tip = prev_tip + (target - prev_tip) * k / (config.transition_frames + 1)
                positions.append(np.vstack([phantom_lab, probe_body + tip]))
                frame_id += 1
        start = frame_id
        for _ in range(config.tip_window_length):
            tip = target + (rng.normal(0.0, tremor, 3) if tremor > 0 else 0.0)
            positions.append(np.vstack([phantom_lab, probe_body + tip]))
            frame_id += 1
        annotations.append(Annotation(fid_label, start, frame_id - 1))
        prev_tip = target

    positions = np.array(positions)
    if sigma > 0:
        positions = positions + rng.normal(0.0, sigma, positions.shape)
    times = np.arange(len(positions)) / config.frame_rate
    frames = MarkerFrameStream(
        tuple(Frame(i, float(t), LabeledPointSet(labels, pos)) for i, (t, pos) in enumerate(zip(times, positions)))
    )

    true_errors = np.linalg.norm(targets - gt_lab, axis=1)
    fid_labels = phantom.fiducials_ct.labels
    ledger = {
        "schema_version": 1,
        "kind": "synthetic_ledger",
        "seed": int(config.seed),
        "trial_id": str(trial_id),
        "experiment_kind": experiment_kind,
        "user_error": {"bias": bias, "sd": sd},
        "marker_noise_sd": float(sigma),
        "tremor_sd": float(tremor),
        "phantom_in_lab": phantom_pose.to_dict(),
        "hologram_displacement": config.hologram_displacement.to_dict(),
        "phantom_markers_lab": dict(zip(phantom.markers_ct.labels, phantom_lab.tolist())),
        "fiducials_lab": dict(zip(fid_labels, gt_lab.tolist())),
        "hologram_fiducials_lab": dict(zip(fid_labels, holo.tolist())),
        "tip_targets_lab": {k: v.tolist() for k, v in tip_targets.items()},
        "true_target_errors": dict(zip(fid_labels, true_errors.tolist())),
        "true_error_mean": float(true_errors.mean()),
        "true_error_sd": float(true_errors.std(ddof=1)),
        "n_frames": len(frames),
        "phantom_marker_count": n_ph,
    }
    return Session(frames, tuple(annotations), ledger, config, experiment_kind, str(trial_id))

"""Probe and phantom models: probe-tip localization and ground-truth fiducials.

Both models hold marker centers (and the tip or fiducials) in CT coordinates.
Lab-frame positions come from registering those markers onto each tracker
frame and carrying the tip or fiducials through the resulting transform.
"""

import logging
from dataclasses import dataclass

import numpy as np

from ._validation import check_nonnegative, check_point
from .exceptions import InsufficientFrames, NonStaticPhantom, ValidationError
from .geometry import LabeledPointSet
from .registration import kabsch_batch, solve_rigid
from .stream import Frame

logger = logging.getLogger(__name__)

PROBE_MARKERS = 5
PHANTOM_MARKERS = 9
PHANTOM_FIDUCIALS = 16
MIN_TIP_CLEARANCE = 1.0  # mm
STATIC_FACTOR = 5.0
DEFAULT_NOISE_SD = 0.25  # mm


@dataclass(frozen=True, eq=False)
class ProbeModel:
    markers_ct: LabeledPointSet
    tip_ct: np.ndarray
    n_markers: int = PROBE_MARKERS

    def __post_init__(self):
        if self.n_markers < 3:
            raise ValidationError("a probe needs at least 3 markers")
        if len(self.markers_ct) != self.n_markers:
            raise ValidationError(
                f"probe has {len(self.markers_ct)} markers, expected {self.n_markers}"
            )
        tip = check_point(self.tip_ct, "tip_ct")
        tip.setflags(write=False)
        object.__setattr__(self, "tip_ct", tip)
        clearance = np.min(np.linalg.norm(self.markers_ct.points - tip, axis=1))
        if clearance <= MIN_TIP_CLEARANCE:
            raise ValidationError(
                f"probe tip lies {clearance:.3g} mm from a marker center (needs > {MIN_TIP_CLEARANCE} mm)"
            )

    def to_dict(self):
        return {
            "markers": self.markers_ct.to_dict(),
            "tip": [float(v) for v in self.tip_ct],
            "n_markers": self.n_markers,
        }


@dataclass(frozen=True)
class PhantomModel:
    markers_ct: LabeledPointSet
    fiducials_ct: LabeledPointSet
    n_markers: int = PHANTOM_MARKERS
    n_fiducials: int = PHANTOM_FIDUCIALS

    def __post_init__(self):
        if self.n_markers < 3:
            raise ValidationError("a phantom needs at least 3 markers")
        if len(self.markers_ct) != self.n_markers:
            raise ValidationError(
                f"phantom has {len(self.markers_ct)} markers, expected {self.n_markers}"
            )
        if len(self.fiducials_ct) != self.n_fiducials:
            raise ValidationError(
                f"phantom has {len(self.fiducials_ct)} fiducials, expected {self.n_fiducials}"
            )
        shared = set(self.markers_ct.labels) & set(self.fiducials_ct.labels)
        if shared:
            raise ValidationError(f"labels used for both markers and fiducials: {sorted(shared)}")

    def to_dict(self):
        return {
            "markers": self.markers_ct.to_dict(),
            "fiducials": self.fiducials_ct.to_dict(),
            "n_markers": self.n_markers,
            "n_fiducials": self.n_fiducials,
        }


@dataclass(frozen=True, eq=False)
class TipObservation:
    frame_id: int
    tip_lab: np.ndarray
    registration_fre: float

    def __post_init__(self):
        check_nonnegative(self.registration_fre, "registration_fre")


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Lab-frame fiducials averaged over frames, with their across-frame spread."""

    fiducials: LabeledPointSet
    uncertainty: dict
    n_frames: int = 0
    fre_mean: float = 0.0

    @property
    def max_uncertainty(self):
        return max(self.uncertainty.values())


def _markers(frame):
    return frame.markers if isinstance(frame, Frame) else frame


def locate_tip(frame, probe, frame_id=None):
    """Lab-frame probe tip for one tracker frame.

    ``frame`` is a :class:`Frame` or a bare :class:`LabeledPointSet` of lab
    marker positions.  Fewer than all probe markers is accepted (down to 3)
    with a warning.
    """
    markers = _markers(frame)
    result = solve_rigid(probe.markers_ct, markers)
    if len(result.per_point_residuals) < len(probe.markers_ct):
        logger.warning(
            "frame %s: probe registered on %d of %d markers",
            getattr(frame, "frame_id", frame_id),
            len(result.per_point_residuals),
            len(probe.markers_ct),
        )
    if frame_id is None:
        frame_id = getattr(frame, "frame_id", 0)
    return TipObservation(int(frame_id), result.transform.apply(probe.tip_ct), result.fre_mean)


def transport(frames, markers_ct, payload_ct):
    """Register ``markers_ct`` onto each frame and map ``payload_ct`` through.

    Frames that see every marker are solved in one vectorized batch; the rest
    go through :func:`solve_rigid` one at a time.  Returns the per-frame
    payload positions ``(n_frames, k, 3)`` and mean FREs ``(n_frames,)``.
    Frames with fewer than 3 matching markers raise
    :class:`InsufficientCorrespondence`.
    """
    payload_ct = np.asarray(payload_ct, dtype=float).reshape(-1, 3)
    labels = markers_ct.labels
    out = np.empty((len(frames), len(payload_ct), 3))
    fres = np.empty(len(frames))
    full, partial = [], []
    for i, frame in enumerate(frames):
        m = frame.markers
        (full if all(lbl in m for lbl in labels) else partial).append(i)
    if full:
        B = np.array([[frames[i].markers[lbl] for lbl in labels] for i in full])
        R, t, fre = kabsch_batch(markers_ct.points, B)
        out[full] = np.einsum("mij,kj->mki", R, payload_ct) + t[:, None, :]
        fres[full] = fre
    for i in partial:
        result = solve_rigid(markers_ct, frames[i].markers)
        logger.warning(
            "frame %d: registered on %d of %d markers",
            frames[i].frame_id, len(result.per_point_residuals), len(labels),
        )
        out[i] = result.transform.apply(payload_ct)
        fres[i] = result.fre_mean
    return out, fres


def locate_tips(frames, probe):
    """:func:`locate_tip` over many frames; frames with < 3 probe markers are skipped."""
    frames = [f for f in frames
              if sum(lbl in f.markers for lbl in probe.markers_ct.labels) >= 3]
    if not frames:
        return []
    tips, fres = transport(frames, probe.markers_ct, probe.tip_ct)
    return [TipObservation(f.frame_id, tip[0], float(fre)) for f, tip, fre in zip(frames, tips, fres)]


def _check_static(frames, labels, threshold):
    # A bump moves the whole phantom, so judge each frame by the median
    # deviation over its visible markers; single-marker noise spikes do not
    # trip the guard.
    ref = {}
    for lbl in labels:
        pts = [f.markers[lbl] for f in frames if lbl in f.markers]
        if pts:
            ref[lbl] = np.median(np.array(pts), axis=0)
    for frame in frames:
        dev = [np.linalg.norm(frame.markers[lbl] - ref[lbl]) for lbl in labels if lbl in frame.markers]
        if dev and np.median(dev) > threshold:
            raise NonStaticPhantom(
                f"frame {frame.frame_id}: phantom markers moved {np.median(dev):.3g} mm "
                f"(threshold {threshold:.3g} mm)"
            )


def ground_truth_fiducials(frames, phantom, noise_sd=DEFAULT_NOISE_SD, static_factor=STATIC_FACTOR):
    """Lab-frame ground-truth fiducials from the phantom markers.

    The phantom is registered separately on every frame and the fiducials are
    carried through each transform, then averaged.  The per-fiducial
    uncertainty is the 3D RMS sample SD of those per-frame positions (0 for a
    single frame).

    Raises
    ------
    NonStaticPhantom
        If, in some frame, the phantom markers sit more than
        ``static_factor * noise_sd`` from their median positions.
    """
    frames = [f if isinstance(f, Frame) else Frame(i, 0.0, f) for i, f in enumerate(frames)]
    labels = phantom.markers_ct.labels
    frames = [f for f in frames if any(lbl in f.markers for lbl in labels)]
    if not frames:
        raise InsufficientFrames("no frame contains phantom markers")

    threshold = max(static_factor * noise_sd, 1e-6)
    _check_static(frames, labels, threshold)

    fid = phantom.fiducials_ct.points
    positions, fres = transport(frames, phantom.markers_ct, fid)

    mean = positions.mean(axis=0)
    if len(frames) > 1:
        sd = np.sqrt(np.sum(positions.var(axis=0, ddof=1), axis=1))
    else:
        sd = np.zeros(len(fid))
    labels_out = phantom.fiducials_ct.labels
    return GroundTruth(
        fiducials=LabeledPointSet(labels_out, mean),
        uncertainty={lbl: float(s) for lbl, s in zip(labels_out, sd)},
        n_frames=len(frames),
        fre_mean=float(fres.mean()),
    )

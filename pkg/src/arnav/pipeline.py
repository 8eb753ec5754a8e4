"""End-to-end assessment of one trial: tracker frames in, summary row out."""

import logging
from dataclasses import dataclass

from .exceptions import EmptyWindow, ValidationError
from .metrics import measure_fiducial, summarize_trial
from .models import DEFAULT_NOISE_SD, ground_truth_fiducials, locate_tips

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrialAssessment:
    result: object
    measurements: tuple
    ground_truth: object


def assess_trial(frames, probe, phantom, annotations, trial_id="1", experiment_kind="physical_feedback",
                 noise_sd=DEFAULT_NOISE_SD, tip_aggregate="max"):
    """Locate the tip in every annotated window and score it against ground truth.

    Ground truth comes from all frames of the session.  ``gt_error`` is the
    largest per-fiducial uncertainty.  Frames in a window with fewer than 3
    probe markers are skipped.
    """
    annotations = list(annotations)
    seen = set()
    for ann in annotations:
        if ann.fiducial_label in seen:
            raise ValidationError(f"more than one annotation for fiducial {ann.fiducial_label!r}")
        if ann.fiducial_label not in phantom.fiducials_ct:
            raise ValidationError(f"annotation names unknown fiducial {ann.fiducial_label!r}")
        seen.add(ann.fiducial_label)

    gt = ground_truth_fiducials(frames, phantom, noise_sd=noise_sd)
    measurements = []
    for ann in annotations:
        window = frames.window(ann.start, ann.end)
        obs = locate_tips(window, probe)
        if len(obs) < len(window):
            logger.warning("%s: %d frame(s) with too few probe markers skipped",
                           ann.fiducial_label, len(window) - len(obs))
        if not obs:
            raise EmptyWindow(
                f"no usable frames in window {ann.start}..{ann.end} for {ann.fiducial_label}"
            )
        measurements.append(measure_fiducial(obs, gt.fiducials[ann.fiducial_label], ann.fiducial_label))

    gt_error = max(gt.uncertainty[a.fiducial_label] for a in annotations) if annotations else 0.0
    result = summarize_trial(measurements, gt_error, trial_id, experiment_kind, tip_aggregate)
    return TrialAssessment(result, tuple(measurements), gt)

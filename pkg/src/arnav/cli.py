"""Command-line interface.

Exit codes: 0 success, 1 validation failure, 2 parse error, 3 numerical
failure.  ``ARNAV_LOG`` sets the log level (default WARNING).
"""

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .drift import bind, run_drift_trace, simulate_drift_trace
from .exceptions import ArnavError, ValidationError
from .geometry import RigidTransform
from .io import (
    dumps,
    file_digest,
    read_annotations,
    read_frames,
    read_labeled_points,
    read_scene,
    read_trace,
    read_vertices,
    write_session,
    write_trace,
)
from .metrics import EXPERIMENT_KINDS, ExperimentSummary, TrialResult, summarize_experiment
from .pipeline import assess_trial
from .registration import solve_rigid
from .report import build_report, emit_report
from .sphere import fit_sphere_algebraic, refine_sphere_geometric
from .stability import stability_report
from .stats import z_test, z_test_summaries
from .synthetic import SceneConfig, generate_session

logger = logging.getLogger("arnav")


def _emit(text, out):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8", newline="\n")


def _vector(text):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y,z, got {text!r}") from None
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"expected x,y,z, got {text!r}")
    return vals


def _labels(text):
    return [s.strip() for s in text.split(",") if s.strip()]


def _load_json_file(path):
    import json

    return json.loads(Path(path).read_text(encoding="utf-8"))


# -- subcommands ------------------------------------------------------------------


def cmd_fit_sphere(args):
    pts = read_vertices(args.vertices)
    algebraic = fit_sphere_algebraic(pts)
    doc = {"input": file_digest(args.vertices), "algebraic": algebraic.to_dict()}
    fit = algebraic
    if not args.no_refine:
        fit = refine_sphere_geometric(pts, algebraic)
        doc["refined"] = fit.to_dict()
    doc["fit"] = fit.to_dict()
    _emit(dumps(doc), args.out)


def cmd_register(args):
    source = read_labeled_points(args.source)
    target = read_labeled_points(args.target)
    result = solve_rigid(source, target)
    doc = result.to_dict()
    doc["inputs"] = {"source": file_digest(args.source), "target": file_digest(args.target)}
    _emit(dumps(doc), args.out)


def cmd_assess(args):
    scene = read_scene(args.scene)
    frames, diagnostics = read_frames(args.frames, strict=args.strict)
    inputs = {"frames": file_digest(args.frames), "scene": file_digest(args.scene)}
    trial_id, kind = args.trial_id, args.kind
    if args.annotations:
        ann = read_annotations(args.annotations)
        inputs["annotations"] = file_digest(args.annotations)
        annotations = ann.annotations
        trial_id = trial_id or ann.trial_id
        kind = kind or ann.experiment_kind
    else:
        annotations = scene.annotations
    if not annotations:
        raise ValidationError("no annotations: pass --annotations or add them to the scene file")
    if kind is None:
        raise ValidationError("experiment kind unknown: pass --kind")
    noise_sd = scene.marker_noise_sd if args.noise_sd is None else args.noise_sd
    assessment = assess_trial(
        frames, scene.probe, scene.phantom, annotations,
        trial_id=trial_id or "1", experiment_kind=kind,
        noise_sd=noise_sd, tip_aggregate=args.tip_aggregate,
    )
    gt = assessment.ground_truth
    doc = {
        "schema_version": 1,
        "kind": "trial_assessment",
        "tool_version": __version__,
        "inputs": inputs,
        "diagnostics": [str(d) for d in diagnostics],
        "trial": assessment.result.to_dict(),
        "measurements": [m.to_dict() for m in assessment.measurements],
        "ground_truth": {
            "fiducials": gt.fiducials.to_dict(),
            "uncertainty": gt.uncertainty,
            "n_frames": gt.n_frames,
            "registration_fre_mean": gt.fre_mean,
        },
    }
    _emit(dumps(doc), args.out)


def cmd_stability(args):
    frames, diagnostics = read_frames(args.frames, strict=args.strict)
    report = stability_report(frames, args.static, args.body)
    doc = {
        "schema_version": 1,
        "kind": "stability_report",
        "tool_version": __version__,
        "inputs": {"frames": file_digest(args.frames)},
        "diagnostics": [str(d) for d in diagnostics],
        "stability": report.to_dict(),
    }
    _emit(dumps(doc), args.out)


def _experiment_from_report(path, basis_kind=None):
    doc = _load_json_file(path)
    experiments = doc.get("experiments", [])
    if not experiments:
        raise ValidationError(f"{path}: no experiments in report")
    if basis_kind:
        experiments = [e for e in experiments if e["experiment_kind"] == basis_kind] or experiments
    return ExperimentSummary.from_dict(experiments[0])


def cmd_ztest(args):
    if args.reports:
        a = _experiment_from_report(args.reports[0])
        b = _experiment_from_report(args.reports[1])
        result = z_test_summaries(a, b, pooled=(args.basis == "pooled"))
    else:
        if len(args.values) != 6:
            raise ValidationError("ztest needs mean1 sd1 n1 mean2 sd2 n2 or --reports A B")
        m1, s1, n1, m2, s2, n2 = args.values
        for n in (n1, n2):
            if n != int(n):
                raise ValidationError("sample sizes must be integers")
        result = z_test(m1, s1, int(n1), m2, s2, int(n2))
    doc = result.to_dict()
    doc["basis"] = args.basis if args.reports else "scalars"
    _emit(dumps(doc), args.out)


def cmd_drift_sim(args):
    offset = RigidTransform.from_translation(args.hologram_offset)
    anchor0 = RigidTransform.identity()
    if args.replay:
        events = read_trace(args.replay)
    else:
        events = simulate_drift_trace(
            args.steps, args.every, step_sd=args.step_sd, step_rot_sd_deg=args.step_rot_deg,
            anchor_noise_sd=args.anchor_noise, anchor_noise_rot_deg=args.anchor_rot_noise, seed=args.seed,
        )
        if args.trace:
            write_trace(events, args.trace)
    binding = bind(anchor0, anchor0 @ offset)
    series = run_drift_trace(events, binding, offset, anchor0)
    lines = ["time,kind,translation_mm,rotation_deg"]
    lines += [f"{t!r},{k},{dt!r},{dr!r}" for t, k, dt, dr in series.to_rows()]
    detect = series.translation[[k == "anchor_detected" for k in series.kind]]
    summary = {
        "n_events": len(series.kind),
        "max_translation_mm": float(series.translation.max()) if len(series.kind) else 0.0,
        "max_rotation_deg": float(series.rotation_deg.max()) if len(series.kind) else 0.0,
        "max_translation_at_detection_mm": float(detect.max()) if len(detect) else 0.0,
    }
    if args.out:
        _emit("\n".join(lines) + "\n", args.out)
    sys.stdout.write(dumps(summary))


def cmd_simulate(args):
    config = read_scene(args.scene) if args.scene else SceneConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.displacement is not None:
        changes["hologram_displacement"] = RigidTransform.from_translation(args.displacement)
    if args.noise_sd is not None:
        changes["marker_noise_sd"] = args.noise_sd
    if args.window is not None:
        changes["tip_window_length"] = args.window
    if changes:
        config = config.replace(annotations=(), **changes)
    session = generate_session(config, args.kind, (args.bias, args.user_sd), trial_id=args.trial_id)
    write_session(session, args.outdir)
    logger.info("wrote session to %s", args.outdir)


def _trials_from_file(path):
    doc = _load_json_file(path)
    if "trial" in doc:
        return [TrialResult.from_dict(doc["trial"])]
    if "experiments" in doc:
        return [TrialResult.from_dict(t) for e in doc["experiments"] for t in e["trials"]]
    if "trials" in doc:
        return [TrialResult.from_dict(t) for t in doc["trials"]]
    return [TrialResult.from_dict(doc)]


def cmd_report(args):
    inputs, by_kind = {}, {}
    for path in args.inputs:
        inputs[str(path)] = file_digest(path)
        for trial in _trials_from_file(path):
            by_kind.setdefault(trial.experiment_kind, []).append(trial)
    experiments = [summarize_experiment(by_kind[k], sd_pooling=args.sd_pooling)
                   for k in EXPERIMENT_KINDS if k in by_kind]
    stability = None
    if args.stability:
        from .stability import MarkerSD, PairDistance, StabilityReport

        inputs[str(args.stability)] = file_digest(args.stability)
        s = _load_json_file(args.stability)["stability"]
        stability = StabilityReport(
            tuple(MarkerSD(m["label"], np.array(m["axis_sd"]), m["rms_sd"], m["n_frames"])
                  for m in s["per_marker_sd"]),
            tuple(PairDistance(tuple(p["labels"]), p["mean"], p["sd"], p["variance"], p["n_frames"])
                  for p in s["pairwise"]),
            s["n_frames"],
        )
    report = build_report(experiments, stability=stability, inputs=inputs)
    _emit(emit_report(report, args.format), args.out)


# -- parser -------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="arnav", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"arnav {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("fit-sphere", help="fit a sphere to an x y z vertex list")
    s.add_argument("vertices")
    s.add_argument("--no-refine", action="store_true", help="skip geometric refinement")
    s.add_argument("--out")
    s.set_defaults(func=cmd_fit_sphere)

    s = sub.add_parser("register", help="rigid registration between two labeled point files")
    s.add_argument("source")
    s.add_argument("target")
    s.add_argument("--out")
    s.set_defaults(func=cmd_register)

    s = sub.add_parser("assess", help="assess one annotated trial against its scene")
    s.add_argument("--frames", required=True)
    s.add_argument("--scene", required=True)
    s.add_argument("--annotations")
    s.add_argument("--trial-id")
    s.add_argument("--kind", choices=EXPERIMENT_KINDS)
    s.add_argument("--noise-sd", type=float, help="marker noise SD for the static-phantom guard")
    s.add_argument("--tip-aggregate", choices=("max", "mean"), default="max")
    s.add_argument("--strict", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_assess)

    s = sub.add_parser("stability", help="static-marker SD and rigid-body distance spread")
    s.add_argument("frames")
    s.add_argument("--static", type=_labels, help="comma-separated marker labels (default: all)")
    s.add_argument("--body", type=_labels, help="comma-separated labels of one rigid body")
    s.add_argument("--strict", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_stability)

    s = sub.add_parser("ztest", help="two-sample Z-test")
    s.add_argument("values", nargs="*", type=float, metavar="mean1 sd1 n1 mean2 sd2 n2")
    s.add_argument("--reports", nargs=2, metavar=("A", "B"))
    s.add_argument("--basis", choices=("average", "pooled"), default="average")
    s.add_argument("--out")
    s.set_defaults(func=cmd_ztest)

    s = sub.add_parser("drift-sim", help="simulate or replay an anchor relocalization trace")
    s.add_argument("--steps", type=int, default=1000)
    s.add_argument("--every", type=int, default=50, help="anchor detection period (steps)")
    s.add_argument("--step-sd", type=float, default=0.2, help="per-axis drift translation SD, mm")
    s.add_argument("--step-rot-deg", type=float, default=0.05, help="per-axis drift rotation SD, degrees")
    s.add_argument("--anchor-noise", type=float, default=0.0)
    s.add_argument("--anchor-rot-noise", type=float, default=0.0)
    s.add_argument("--hologram-offset", type=_vector, default=[0.0, 0.0, 100.0])
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--trace", help="write the generated trace (JSON lines)")
    s.add_argument("--replay", help="replay this trace instead of simulating")
    s.add_argument("--out", help="displacement series CSV")
    s.set_defaults(func=cmd_drift_sim)

    s = sub.add_parser("simulate", help="generate a synthetic session")
    s.add_argument("--scene")
    s.add_argument("--kind", choices=EXPERIMENT_KINDS, required=True)
    s.add_argument("--bias", type=float, default=0.0, help="user depth bias along the view direction, mm")
    s.add_argument("--user-sd", type=float, default=3.0)
    s.add_argument("--displacement", type=_vector, help="hologram translation x,y,z in CT frame, mm")
    s.add_argument("--noise-sd", type=float)
    s.add_argument("--window", type=int, help="dwell frames per fiducial")
    s.add_argument("--seed", type=int)
    s.add_argument("--trial-id", default="1")
    s.add_argument("--outdir", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("report", help="summary table report from trial results")
    s.add_argument("inputs", nargs="+")
    s.add_argument("--stability")
    s.add_argument("--sd-pooling", choices=("rms", "mean"), default="rms")
    s.add_argument("--format", choices=("json", "table"), default="json")
    s.add_argument("--out")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    level = getattr(logging, os.environ.get("ARNAV_LOG", "WARNING").upper(), logging.WARNING)
    logging.basicConfig(
        level=level if isinstance(level, int) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ArnavError as exc:
        logger.error("%s", exc)
        return exc.exit_code
    except OSError as exc:
        logger.error("%s", exc)
        return 2
    return 0

"""File formats: marker CSV, vertex lists, scene/annotation JSON, drift traces, ledgers.

Marker frames are long-format CSV (``frame,time,label,x,y,z``, one
observation per row, mm, UTF-8, LF).  Writers emit floats with ``repr``, so a
canonical file reads and writes back unchanged.
"""

import csv
import hashlib
import io as _io
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .drift import PoseEvent
from .exceptions import ParseError, SchemaError, ValidationError
from .geometry import LabeledPointSet, RigidTransform
from .metrics import Annotation, check_kind
from .models import PhantomModel, ProbeModel
from .stream import Frame, MarkerFrameStream
from .synthetic import SceneConfig

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
FRAME_HEADER = ("frame", "time", "label", "x", "y", "z")


def file_digest(path):
    return "sha256:" + hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _fmt(v):
    return repr(float(v))


# -- marker frames -----------------------------------------------------------


@dataclass(frozen=True)
class Diagnostic:
    line: int
    column: int
    reason: str

    def __str__(self):
        return f"line {self.line}, column {self.column}: {self.reason}"


def parse_frames(text, strict=False):
    """Parse marker-frame CSV text.

    Returns ``(stream, diagnostics)``.  In lenient mode malformed rows are
    skipped and reported in ``diagnostics``; with ``strict`` the first one
    raises :class:`ParseError`.  Frame ids out of order always raise
    :class:`NonMonotonicFrames`.
    """
    from .exceptions import NonMonotonicFrames

    lines = text.splitlines()
    body = [(i + 1, ln) for i, ln in enumerate(lines) if ln.strip() and not ln.lstrip().startswith("#")]
    if not body:
        raise ParseError("no frames")
    header_no, header = body[0]
    fields = tuple(f.strip() for f in next(csv.reader([header])))
    if fields != FRAME_HEADER:
        raise ParseError(f"expected header {','.join(FRAME_HEADER)}", line=header_no, column=1)

    diagnostics = []

    def bad(line, column, reason):
        if strict:
            raise ParseError(reason, line=line, column=column)
        diagnostics.append(Diagnostic(line, column, reason))

    groups = []  # [frame_id, time, labels, points]
    for line_no, raw in body[1:]:
        row = next(csv.reader([raw]))
        if len(row) != 6:
            bad(line_no, min(len(row), 6) or 1, f"expected 6 fields, got {len(row)}")
            continue
        try:
            fid = int(row[0])
        except ValueError:
            bad(line_no, 1, f"frame id {row[0]!r} is not an integer")
            continue
        values = []
        for col in (1, 3, 4, 5):
            try:
                v = float(row[col])
            except ValueError:
                v = math.nan
            if not math.isfinite(v):
                bad(line_no, col + 1, f"{FRAME_HEADER[col]} {row[col]!r} is not a finite number")
                break
            values.append(v)
        else:
            label = row[2].strip()
            if not label:
                bad(line_no, 3, "empty label")
                continue
            t, x, y, z = values
            if groups and groups[-1][0] == fid:
                g = groups[-1]
                if label in g[2]:
                    bad(line_no, 3, f"label {label!r} repeated in frame {fid}")
                    continue
                if t != g[1]:
                    bad(line_no, 2, f"time {t} differs from frame {fid}'s time {g[1]}")
                    continue
                g[2].append(label)
                g[3].append((x, y, z))
            else:
                if groups and fid <= groups[-1][0]:
                    raise NonMonotonicFrames(
                        f"frame {fid} after frame {groups[-1][0]}", line=line_no, column=1
                    )
                groups.append([fid, t, [label], [(x, y, z)]])
    if not groups:
        raise ParseError("no frames")
    stream = MarkerFrameStream(
        tuple(Frame(fid, t, LabeledPointSet(tuple(labels), np.array(pts))) for fid, t, labels, pts in groups)
    )
    for d in diagnostics:
        logger.warning("%s", d)
    return stream, diagnostics


def read_frames(path, strict=False):
    """Read a marker-frame CSV file; returns ``(stream, diagnostics)``."""
    return parse_frames(Path(path).read_text(encoding="utf-8"), strict=strict)


def format_frames(stream):
    buf = _io.StringIO()
    buf.write(",".join(FRAME_HEADER) + "\n")
    for frame in stream:
        t = _fmt(frame.time)
        for label, p in frame.markers:
            buf.write(f"{frame.frame_id},{t},{label},{_fmt(p[0])},{_fmt(p[1])},{_fmt(p[2])}\n")
    return buf.getvalue()


def write_frames(stream, path):
    Path(path).write_text(format_frames(stream), encoding="utf-8", newline="\n")


# -- vertex lists and labeled points ------------------------------------------


def read_vertices(path):
    """``x y z`` per line (whitespace or comma separated); ``#`` starts a comment."""
    pts = []
    for i, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].replace(",", " ").strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ParseError(f"expected 3 coordinates, got {len(parts)}", line=i)
        try:
            xyz = [float(v) for v in parts]
        except ValueError as exc:
            raise ParseError(str(exc), line=i) from None
        if not all(math.isfinite(v) for v in xyz):
            raise ParseError("non-finite coordinate", line=i)
        pts.append(xyz)
    if not pts:
        raise ParseError("no vertices")
    return np.array(pts)


def read_labeled_points(path):
    """Labeled points from CSV (``label,x,y,z``, optional header) or a JSON object."""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        data = _load_json(text)
        return _labeled(data, "")
    labels, pts = [], []
    for i, row in enumerate(csv.reader(text.splitlines()), 1):
        if not row or row[0].lstrip().startswith("#"):
            continue
        if i == 1 and row[0].strip().lower() == "label":
            continue
        if len(row) != 4:
            raise ParseError(f"expected label,x,y,z, got {len(row)} fields", line=i)
        try:
            pts.append([float(v) for v in row[1:]])
        except ValueError as exc:
            raise ParseError(str(exc), line=i) from None
        labels.append(row[0].strip())
    if not labels:
        raise ParseError("no points")
    try:
        return LabeledPointSet(tuple(labels), np.array(pts))
    except ValidationError as exc:
        raise ParseError(str(exc)) from None


# -- JSON helpers ---------------------------------------------------------------


class _Obj(dict):
    """JSON object that remembers keys seen more than once."""

    def __init__(self, pairs):
        super().__init__()
        self.duplicates = []
        for k, v in pairs:
            if k in self:
                self.duplicates.append(k)
            self[k] = v


def _load_json(text):
    try:
        return json.loads(text, object_pairs_hook=_Obj)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno, column=exc.colno) from None


def dumps(obj):
    """Canonical JSON: sorted keys, 2-space indent, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(obj, path):
    Path(path).write_text(dumps(obj), encoding="utf-8", newline="\n")


_POINT = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}
_POINTS = {"type": "object", "additionalProperties": _POINT, "minProperties": 1}
_TRANSFORM = {
    "type": "object",
    "required": ["rotation", "translation"],
    "properties": {
        "rotation": {"type": "array", "items": _POINT, "minItems": 3, "maxItems": 3},
        "translation": _POINT,
    },
}
_ANNOTATION = {
    "type": "object",
    "required": ["fiducial", "start", "end"],
    "properties": {
        "fiducial": {"type": "string"},
        "start": {"type": "integer"},
        "end": {"type": "integer"},
    },
}
SCENE_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "probe", "phantom"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "probe": {
            "type": "object",
            "required": ["markers", "tip"],
            "properties": {
                "markers": _POINTS,
                "tip": _POINT,
                "n_markers": {"type": "integer", "minimum": 3},
            },
        },
        "phantom": {
            "type": "object",
            "required": ["markers", "fiducials"],
            "properties": {
                "markers": _POINTS,
                "fiducials": _POINTS,
                "n_markers": {"type": "integer", "minimum": 3},
                "n_fiducials": {"type": "integer", "minimum": 1},
            },
        },
        "marker_noise_sd": {"type": "number", "minimum": 0},
        "tip_window_length": {"type": "integer", "minimum": 1},
        "hologram_displacement": _TRANSFORM,
        "seed": {"type": "integer", "minimum": 0},
        "synthetic": {
            "type": "object",
            "properties": {
                "tremor_sd": {"type": "number", "minimum": 0},
                "transition_frames": {"type": "integer", "minimum": 0},
                "frame_rate": {"type": "number", "exclusiveMinimum": 0},
                "head_center": _POINT,
                "head_radius": {"type": "number", "exclusiveMinimum": 0},
                "view_direction": _POINT,
                "max_probe_tilt_deg": {"type": "number", "minimum": 0},
            },
        },
        "annotations": {"type": "array", "items": _ANNOTATION},
        "trial_id": {"type": "string"},
        "experiment_kind": {"type": "string"},
    },
}
ANNOTATION_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "annotations"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "annotations": {"type": "array", "items": _ANNOTATION},
        "trial_id": {"type": "string"},
        "experiment_kind": {"type": "string"},
    },
}


def _pointer(parts):
    return "/" + "/".join(str(p).replace("~", "~0").replace("/", "~1") for p in parts)


def _validate(data, schema):
    errors = sorted(jsonschema.Draft202012Validator(schema).iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        raise SchemaError(_pointer(err.absolute_path), err.message)


def _labeled(obj, path):
    dupes = getattr(obj, "duplicates", [])
    if dupes:
        raise SchemaError(path, f"duplicate label {dupes[0]!r}")
    try:
        return LabeledPointSet.from_mapping(obj)
    except ValidationError as exc:
        raise SchemaError(path, str(exc)) from None


def _model(factory, path, **kwargs):
    try:
        return factory(**kwargs)
    except ValidationError as exc:
        raise SchemaError(path, str(exc)) from None


def scene_from_dict(data):
    """Validated :class:`SceneConfig` from a parsed scene document."""
    _validate(data, SCENE_SCHEMA)
    p = data["probe"]
    probe_markers = _labeled(p["markers"], "/probe/markers")
    n_probe = p.get("n_markers", 5)
    if len(probe_markers) != n_probe:
        raise SchemaError("/probe/markers", f"{len(probe_markers)} markers, expected {n_probe}")
    probe = _model(ProbeModel, "/probe/tip", markers_ct=probe_markers, tip_ct=np.array(p["tip"], dtype=float),
                   n_markers=n_probe)

    ph = data["phantom"]
    markers = _labeled(ph["markers"], "/phantom/markers")
    fiducials = _labeled(ph["fiducials"], "/phantom/fiducials")
    n_m = ph.get("n_markers", 9)
    n_f = ph.get("n_fiducials", 16)
    if len(markers) != n_m:
        raise SchemaError("/phantom/markers", f"{len(markers)} markers, expected {n_m}")
    if len(fiducials) != n_f:
        raise SchemaError("/phantom/fiducials", f"{len(fiducials)} fiducials, expected {n_f}")
    phantom = _model(PhantomModel, "/phantom", markers_ct=markers, fiducials_ct=fiducials,
                     n_markers=n_m, n_fiducials=n_f)

    kwargs = {}
    for key in ("marker_noise_sd", "tip_window_length", "seed"):
        if key in data:
            kwargs[key] = data[key]
    if "hologram_displacement" in data:
        kwargs["hologram_displacement"] = _model(
            RigidTransform.from_dict, "/hologram_displacement", d=data["hologram_displacement"]
        )
    for key, value in data.get("synthetic", {}).items():
        kwargs[key] = tuple(value) if isinstance(value, list) else value
    if "annotations" in data:
        kwargs["annotations"] = annotations_from_list(data["annotations"], "/annotations")
    return _model(SceneConfig, "", probe=probe, phantom=phantom, **kwargs)


def scene_to_dict(config):
    d = {
        "schema_version": SCHEMA_VERSION,
        "probe": config.probe.to_dict(),
        "phantom": config.phantom.to_dict(),
        "marker_noise_sd": float(config.marker_noise_sd),
        "tip_window_length": int(config.tip_window_length),
        "hologram_displacement": config.hologram_displacement.to_dict(),
        "seed": int(config.seed),
        "synthetic": {
            "tremor_sd": float(config.tremor_sd),
            "transition_frames": int(config.transition_frames),
            "frame_rate": float(config.frame_rate),
            "head_center": [float(v) for v in config.head_center],
            "head_radius": float(config.head_radius),
            "view_direction": [float(v) for v in config.view_direction],
            "max_probe_tilt_deg": float(config.max_probe_tilt_deg),
        },
    }
    if config.annotations:
        d["annotations"] = [a.to_dict() for a in config.annotations]
    return d


def read_scene(path):
    return scene_from_dict(_load_json(Path(path).read_text(encoding="utf-8")))


def write_scene(config, path):
    write_json(scene_to_dict(config), path)


def annotations_from_list(items, path="/annotations"):
    out, seen = [], set()
    for i, item in enumerate(items):
        label = item["fiducial"]
        if label in seen:
            raise SchemaError(f"{path}/{i}/fiducial", f"second annotation for fiducial {label!r}")
        seen.add(label)
        out.append(_model(Annotation, f"{path}/{i}", fiducial_label=label, start=item["start"], end=item["end"]))
    return tuple(out)


@dataclass(frozen=True)
class AnnotationSet:
    annotations: tuple
    trial_id: str = None
    experiment_kind: str = None


def read_annotations(path):
    """Annotation file, or a scene file carrying an ``annotations`` list."""
    data = _load_json(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict) and "probe" in data:
        _validate(data, SCENE_SCHEMA)
    else:
        _validate(data, ANNOTATION_SCHEMA)
    kind = data.get("experiment_kind")
    if kind is not None:
        try:
            check_kind(kind)
        except ValidationError as exc:
            raise SchemaError("/experiment_kind", str(exc)) from None
    return AnnotationSet(
        annotations_from_list(data.get("annotations", [])),
        data.get("trial_id"),
        kind,
    )


def write_annotations(annotations, path, trial_id=None, experiment_kind=None):
    d = {"schema_version": SCHEMA_VERSION, "annotations": [a.to_dict() for a in annotations]}
    if trial_id is not None:
        d["trial_id"] = str(trial_id)
    if experiment_kind is not None:
        d["experiment_kind"] = experiment_kind
    write_json(d, path)


# -- drift traces -----------------------------------------------------------------


def write_trace(events, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ev in events:
            fh.write(json.dumps(ev.to_dict(), sort_keys=True) + "\n")


def read_trace(path):
    events = []
    for i, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            events.append(PoseEvent.from_dict(json.loads(line)))
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, line=i, column=exc.colno) from None
        except (KeyError, TypeError, ValidationError) as exc:
            raise ParseError(f"bad pose event: {exc}", line=i) from None
    return events


# -- sessions ----------------------------------------------------------------------


def write_session(session, outdir):
    """Write a generated session as four files in ``outdir``."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_frames(session.frames, outdir / "frames.csv")
    write_scene(session.config, outdir / "scene.json")
    write_annotations(session.annotations, outdir / "annotations.json", session.trial_id, session.experiment_kind)
    write_json(session.ledger, outdir / "ledger.json")
    return outdir

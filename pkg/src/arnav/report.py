"""Report documents: per-experiment summary tables plus Z-tests."""

from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal

from . import __version__
from .io import dumps
from .metrics import EXPERIMENT_KINDS
from .stats import z_test_summaries

REPORT_SCHEMA_VERSION = 1

KIND_TITLES = {
    "no_feedback": "No feedback",
    "holographic_feedback": "Holographic feedback",
    "physical_feedback": "Physical feedback",
}

# the two comparisons drawn between feedback conditions
COMPARISONS = (
    ("physical_feedback", "holographic_feedback"),
    ("holographic_feedback", "no_feedback"),
)


@dataclass(frozen=True)
class ReportDocument:
    experiments: tuple = ()
    statistics: tuple = ()
    stability: object = None
    inputs: dict = field(default_factory=dict)
    tool_version: str = __version__

    def to_dict(self):
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "tool_version": self.tool_version,
            "inputs": dict(sorted(self.inputs.items())),
            "experiments": [e.to_dict() for e in self.experiments],
            "statistics": [dict(s) for s in self.statistics],
            "stability": None if self.stability is None else self.stability.to_dict(),
        }


def comparison_tests(experiments, basis="average"):
    """Z-tests for the standard comparisons among the experiments present.

    ``basis="average"`` uses each experiment's average row with
    ``n = sum(n_fiducials)``; ``basis="pooled"`` uses fiducial-level pooled
    statistics.
    """
    by_kind = {e.experiment_kind: e for e in experiments}
    out = []
    for a, b in COMPARISONS:
        if a in by_kind and b in by_kind:
            res = z_test_summaries(by_kind[a], by_kind[b], pooled=(basis == "pooled"))
            d = res.to_dict()
            d["basis"] = basis
            out.append(d)
    return out


def build_report(experiments, stability=None, inputs=None, bases=("average", "pooled")):
    order = {k: i for i, k in enumerate(EXPERIMENT_KINDS)}
    experiments = tuple(sorted(experiments, key=lambda e: order[e.experiment_kind]))
    stats = []
    for basis in bases:
        stats.extend(comparison_tests(experiments, basis))
    return ReportDocument(experiments, tuple(stats), stability, dict(inputs or {}))


def round2(value):
    """Half-up rounding to 2 decimals, as printed in tables."""
    return str(Decimal(repr(float(value))).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def render_table(report):
    header = ("Experiment", "trial", "error(mm)", "SD (mm)", "Tip error (mm)", "gt error (mm)")
    rows = []
    for exp in report.experiments:
        title = KIND_TITLES[exp.experiment_kind]
        for i, t in enumerate(exp.trials):
            rows.append((title if i == 0 else "", t.trial_id, round2(t.error_mean), round2(t.error_sd),
                         round2(t.tip_error), round2(t.gt_error)))
        rows.append(("", "average", round2(exp.error), round2(exp.sd), round2(exp.tip_error),
                     round2(exp.gt_error)))
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    for r in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
    for s in report.statistics:
        a, b = s["compared"]
        lines.append(
            f"Z-test {a} vs {b} ({s['basis']}): z = {s['z']:.2f}, p = {s['p_two_sided']:.3g}"
        )
    return "\n".join(lines) + "\n"


def emit_report(report, fmt="json"):
    """Serialize a report; JSON is sorted-key and byte-deterministic."""
    if fmt == "json":
        return dumps(report.to_dict())
    if fmt == "table":
        return render_table(report)
    raise ValueError(f"unknown report format {fmt!r}")

"""Design-pattern workload catalogue and the predicted-vs-actual evaluation harness."""

from __future__ import annotations

import csv
import io
import json
import statistics
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

from .domain import MAP_PHASES, REDUCE_PHASES, ClusterProfile, DesignPattern, SchemaError, WorkloadSpec
from .predictor import CustomTimes, ErrorReport, JobPrediction, evaluate_prediction, predict_job
from .profiler import point_seed
from .regress import PhaseModelSet
from .simcluster import record_count

SUITE_FIXTURE = "suite_v1.json"
REPORT_COLUMNS = ("Algorithm", "Predicted", "Actual", "Error%")


@dataclass(frozen=True)
class SuiteEntry:
    workload: WorkloadSpec
    pattern: DesignPattern
    notes: str = ""

    @property
    def algorithm(self) -> str:
        return self.workload.name


def parse_suite(doc: dict[str, Any]) -> list[SuiteEntry]:
    if not isinstance(doc, dict) or "entries" not in doc:
        raise SchemaError("suite: expected an object with an 'entries' list")
    entries = []
    for i, item in enumerate(doc["entries"]):
        unknown = set(item) - {"algorithm", "pattern", "notes", "workload"}
        if unknown:
            raise SchemaError(f"suite entry {i}: unknown field(s) {', '.join(sorted(unknown))}")
        wl = WorkloadSpec.from_dict(item["workload"])
        pattern = DesignPattern(item.get("pattern", wl.design_pattern.value))
        entries.append(SuiteEntry(wl, pattern, item.get("notes", "")))
    return entries


def load_suite(path: str | Path) -> list[SuiteEntry]:
    return parse_suite(json.loads(Path(path).read_text(encoding="utf-8")))


def default_suite() -> list[SuiteEntry]:
    """The 14 design-pattern workloads.

    Input sizes are the catalogue sizes (GB x 1024, multi-input jobs
    summed). Selectivities, reducer counts and per-record costs are frozen
    per-pattern defaults.
    """
    text = resources.files("mrphase").joinpath("data", SUITE_FIXTURE).read_text(encoding="utf-8")
    return parse_suite(json.loads(text))


@dataclass(frozen=True)
class SuiteRow:
    entry: SuiteEntry
    prediction: JobPrediction
    evaluation: ErrorReport

    @property
    def error_pct(self) -> float:
        actual = self.evaluation.mean_actual_ms
        return (actual - self.prediction.total_ms) / actual * 100.0


@dataclass(frozen=True)
class PatternSummary:
    pattern: DesignPattern
    count: int
    mean_abs_error_pct: float
    max_abs_error_pct: float
    actual_cv: float


@dataclass(frozen=True)
class SuiteReport:
    rows: tuple[SuiteRow, ...]

    @property
    def mean_abs_error_pct(self) -> float:
        return statistics.fmean(abs(r.error_pct) for r in self.rows)

    @property
    def max_abs_error_pct(self) -> float:
        return max(abs(r.error_pct) for r in self.rows)

    def patterns(self) -> list[PatternSummary]:
        out = []
        for pattern in DesignPattern:
            rows = [r for r in self.rows if r.entry.pattern is pattern]
            if not rows:
                continue
            errs = [abs(r.error_pct) for r in rows]
            actual = [r.evaluation.mean_actual_ms for r in rows]
            cv = statistics.pstdev(actual) / statistics.fmean(actual) if len(actual) > 1 else 0.0
            out.append(PatternSummary(pattern, len(rows), statistics.fmean(errs), max(errs), cv))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([*REPORT_COLUMNS, "Pattern"])
        for r in self.rows:
            w.writerow([r.entry.algorithm, _sec(r.prediction.total_ms), _sec(r.evaluation.mean_actual_ms),
                        f"{r.error_pct:.1f}", r.entry.pattern.value])
        return buf.getvalue()

    def to_markdown(self) -> str:
        lines = []
        for summary in self.patterns():
            lines.append(f"### {summary.pattern.value}")
            lines.append("")
            lines.append("| " + " | ".join(REPORT_COLUMNS) + " |")
            lines.append("|" + "---|" * len(REPORT_COLUMNS))
            for r in self.rows:
                if r.entry.pattern is summary.pattern:
                    lines.append(f"| {r.entry.algorithm} | {_sec(r.prediction.total_ms)} | "
                                 f"{_sec(r.evaluation.mean_actual_ms)} | {r.error_pct:.0f} |")
            lines.append("")
            lines.append(f"mean |Error%| {summary.mean_abs_error_pct:.1f}, max {summary.max_abs_error_pct:.1f}, "
                         f"CV of actual times {summary.actual_cv:.2f}")
            lines.append("")
        lines.append(f"Overall mean |Error%| {self.mean_abs_error_pct:.1f}, max {self.max_abs_error_pct:.1f}")
        return "\n".join(lines) + "\n"

    def breakdown_csv(self) -> str:
        """Predicted per-phase contribution (ms) for each workload, plot-ready."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        phases = [*MAP_PHASES, *REDUCE_PHASES]
        w.writerow(["Algorithm", "Pattern", *[p.value for p in phases], "total_ms"])
        for r in self.rows:
            b = r.prediction.breakdown
            w.writerow([r.entry.algorithm, r.entry.pattern.value, *[f"{b[p]:.3f}" for p in phases],
                        f"{r.prediction.total_ms:.3f}"])
        return buf.getvalue()


def _sec(ms: float) -> int:
    return int(round(ms / 1000.0))


def run_suite(models: PhaseModelSet, cluster: ClusterProfile, suite: Sequence[SuiteEntry],
              seeds: Sequence[int]) -> SuiteReport:
    """Predict and simulate every entry; each entry gets its own derived seeds."""
    rows = []
    for i, entry in enumerate(suite):
        wl = entry.workload
        entry_seeds = [point_seed(s, i) for s in seeds]
        custom = CustomTimes.from_rates(wl, cluster)
        prediction = predict_job(models, wl, cluster, custom)
        evaluation = evaluate_prediction(models, wl, cluster, entry_seeds, custom)
        rows.append(SuiteRow(entry, prediction, evaluation))
    return SuiteReport(tuple(rows))


RSJ_REFERENCE_LOG = "rsj_inner_reference.log"
RSJ_REFERENCE_MAP_TOTAL_MS = 33069.0
RSJ_REFERENCE_REDUCE_TOTAL_MS = 286257.0


def rsj_reference_workload() -> WorkloadSpec:
    """Reduce-side inner join as measured on the 8-container cluster.

    19584 MB in 153 blocks, 11 reducers, map output equal to input. The
    per-record and per-key rates reproduce the measured map()/reduce() totals.
    """
    keys_per_mb = 1000.0
    return WorkloadSpec(
        name="RSJ Inner",
        input_mb=19584.0,
        map_selectivity=1.0,
        reduce_selectivity=1.0,
        reducer_count=11,
        map_ms_per_record=RSJ_REFERENCE_MAP_TOTAL_MS / record_count(19584.0, 100),
        reduce_ms_per_key=RSJ_REFERENCE_REDUCE_TOTAL_MS / (19584.0 * keys_per_mb),
        keys_per_mb=keys_per_mb,
        design_pattern=DesignPattern.JOIN,
    )


def rsj_reference_log_text() -> str:
    return resources.files("mrphase").joinpath("data", RSJ_REFERENCE_LOG).read_text(encoding="utf-8")

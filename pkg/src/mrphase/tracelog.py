"""Line-oriented job log: emit, parse, and turn into per-phase samples.

Grammar, one record per line::

    JOB <job_id> START containers=<int> block_mb=<num> [seed=<int>]
    WORKLOAD <job_id> <field>=<value> ...
    TASK <task_id> kind=<MAP|REDUCE> wave=<int>
    COUNTER <task_id> <GROUP>.<NAME>=<num>
    JOB <job_id> END total_ms=<num>

Numbers are written with ``repr`` so a parse of an emitted log gives back
bit-identical floats. Lines that match none of the record types are skipped
and counted.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence
from urllib.parse import quote, unquote

from .domain import MAP_PHASES, REDUCE_PHASES, Phase, WorkloadSpec
from .simcluster import MAP, REDUCE, JobTrace, TaskTrace, merge_feature

log = logging.getLogger(__name__)

# task counter key -> (GROUP, NAME) per task kind
_DATA_COUNTERS = {
    MAP: {"input_mb": ("DATA_MB", "INPUT"), "output_mb": ("DATA_MB", "MAP_OUTPUT"),
          "spill_file_count": ("META", "SPILL_FILES")},
    REDUCE: {"input_mb": ("DATA_MB", "SHUFFLE_INPUT"), "output_mb": ("DATA_MB", "WRITE_OUTPUT")},
}
_COUNTER_NAMES = {
    "PHASE_MS": {p.value for p in Phase},
    "DATA_MB": {"INPUT", "MAP_OUTPUT", "SHUFFLE_INPUT", "WRITE_OUTPUT"},
    "META": {"SPILL_FILES"},
}
_INT_WORKLOAD_FIELDS = {"reducer_count"}
_STR_WORKLOAD_FIELDS = {"name", "design_pattern"}


class LogParseError(ValueError):
    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}" if line_no is not None else message)


class TruncatedLogError(LogParseError):
    pass


@dataclass(frozen=True)
class LogDocument:
    lines: tuple[str, ...]
    skipped_lines: int = 0

    def text(self) -> str:
        return "".join(line + "\n" for line in self.lines)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.text(), encoding="utf-8")

    @classmethod
    def from_text(cls, text: str) -> LogDocument:
        return cls(tuple(text.splitlines()))

    @classmethod
    def read(cls, path: str | Path) -> LogDocument:
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


def _num(x: float | int) -> str:
    if isinstance(x, int) and not isinstance(x, bool):
        return str(x)
    return repr(float(x))


def emit_log(trace: JobTrace) -> LogDocument:
    lines = [f"JOB {trace.job_id} START containers={trace.container_count} "
             f"block_mb={_num(trace.block_size_mb)} seed={trace.seed}"]
    wl = trace.workload.to_dict()
    pairs = []
    for key, value in wl.items():
        if key in _STR_WORKLOAD_FIELDS:
            pairs.append(f"{key}={quote(str(value), safe='')}")
        else:
            pairs.append(f"{key}={_num(value)}")
    lines.append(f"WORKLOAD {trace.job_id} " + " ".join(pairs))
    for task in sorted(trace.tasks, key=lambda t: t.task_id):
        lines.append(f"TASK {task.task_id} kind={task.kind} wave={task.wave_index}")
        for phase, ms in task.phase_ms.items():
            lines.append(f"COUNTER {task.task_id} PHASE_MS.{phase.value}={_num(ms)}")
        for key, (group, name) in _DATA_COUNTERS[task.kind].items():
            if key in task.counters:
                lines.append(f"COUNTER {task.task_id} {group}.{name}={_num(task.counters[key])}")
    lines.append(f"JOB {trace.job_id} END total_ms={_num(trace.total_ms)}")
    return LogDocument(tuple(lines))


def _kv(tokens: Sequence[str], line_no: int) -> dict[str, str]:
    out = {}
    for tok in tokens:
        key, sep, value = tok.partition("=")
        if not sep or not key:
            raise LogParseError(f"expected key=value, got {tok!r}", line_no)
        out[key] = value
    return out


def _parse_num(text: str, line_no: int, what: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise LogParseError(f"{what}: not a number: {text!r}", line_no) from None
    if not math.isfinite(value):
        raise LogParseError(f"{what}: non-finite value {text!r}", line_no)
    return value


def _parse_int(text: str, line_no: int, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise LogParseError(f"{what}: not an integer: {text!r}", line_no) from None


def parse_log(doc: LogDocument | Iterable[str]) -> JobTrace:
    lines = doc.lines if isinstance(doc, LogDocument) else list(doc)
    job_id = None
    header: dict[str, str] = {}
    workload_fields: dict[str, object] = {}
    tasks: dict[str, dict] = {}
    order: list[str] = []
    total_ms = None
    skipped = 0

    for line_no, raw in enumerate(lines, start=1):
        parts = raw.split()
        if not parts:
            continue
        tag = parts[0]
        if tag == "JOB" and len(parts) >= 3 and parts[2] == "START":
            job_id = parts[1]
            header = _kv(parts[3:], line_no)
        elif tag == "JOB" and len(parts) >= 3 and parts[2] == "END":
            if parts[1] != job_id:
                raise LogParseError(f"END for unknown job {parts[1]!r}", line_no)
            total_ms = _parse_num(_kv(parts[3:], line_no).get("total_ms", ""), line_no, "total_ms")
        elif tag == "WORKLOAD" and len(parts) >= 2:
            for key, value in _kv(parts[2:], line_no).items():
                if key in _STR_WORKLOAD_FIELDS:
                    workload_fields[key] = unquote(value)
                elif key in _INT_WORKLOAD_FIELDS:
                    workload_fields[key] = _parse_int(value, line_no, key)
                else:
                    workload_fields[key] = _parse_num(value, line_no, key)
        elif tag == "TASK" and len(parts) >= 2:
            kv = _kv(parts[2:], line_no)
            kind = kv.get("kind")
            if kind not in (MAP, REDUCE):
                raise LogParseError(f"unknown task kind {kind!r}", line_no)
            tasks[parts[1]] = {"kind": kind, "wave": _parse_int(kv.get("wave", ""), line_no, "wave"),
                               "phases": {}, "counters": {}}
            order.append(parts[1])
        elif tag == "COUNTER":
            if len(parts) != 3:
                raise LogParseError("malformed COUNTER line", line_no)
            task_id, spec = parts[1], parts[2]
            if task_id not in tasks:
                raise LogParseError(f"COUNTER for undeclared task {task_id!r}", line_no)
            name, sep, value = spec.partition("=")
            group, dot, counter = name.partition(".")
            if not sep or not dot or counter not in _COUNTER_NAMES.get(group, ()):
                raise LogParseError(f"unknown counter {name!r}", line_no)
            entry = tasks[task_id]
            if group == "PHASE_MS":
                entry["phases"][Phase(counter)] = _parse_num(value, line_no, name)
            elif group == "META":
                entry["counters"]["spill_file_count"] = _parse_int(value, line_no, name)
            else:
                key = next(k for k, (g, n) in _DATA_COUNTERS[entry["kind"]].items() if n == counter)
                entry["counters"][key] = _parse_num(value, line_no, name)
        else:
            skipped += 1

    if job_id is None:
        raise TruncatedLogError("no JOB START line")
    if total_ms is None:
        raise TruncatedLogError(f"job {job_id}: missing JOB END line")
    if skipped:
        log.warning("skipped %d unrecognised line(s) in log for %s", skipped, job_id)

    traces = []
    for task_id in order:
        entry = tasks[task_id]
        expected = MAP_PHASES if entry["kind"] == MAP else REDUCE_PHASES
        missing = [p.value for p in expected if p not in entry["phases"]]
        if missing:
            raise LogParseError(f"task {task_id} missing phase counter(s) {', '.join(missing)}")
        phases = {p: entry["phases"][p] for p in expected}
        traces.append(TaskTrace(task_id, entry["kind"], entry["wave"], phases, entry["counters"]))

    return JobTrace(
        job_id=job_id,
        workload=WorkloadSpec.from_dict(workload_fields) if workload_fields else _workload_from_counters(job_id, traces),
        container_count=_parse_int(header.get("containers", ""), 1, "containers"),
        block_size_mb=_parse_num(header.get("block_mb", ""), 1, "block_mb"),
        tasks=tuple(traces),
        total_ms=total_ms,
        seed=int(header.get("seed", 0)),
    )


def _workload_from_counters(job_id: str, tasks: Sequence[TaskTrace]) -> WorkloadSpec:
    """Best-effort workload for a log without a WORKLOAD line (volumes only, no custom rates)."""
    maps = [t for t in tasks if t.kind == MAP]
    reduces = [t for t in tasks if t.kind == REDUCE]
    d = math.fsum(t.counters.get("input_mb", 0.0) for t in maps)
    m_d = math.fsum(t.counters.get("output_mb", 0.0) for t in maps)
    s_d = math.fsum(t.counters.get("input_mb", 0.0) for t in reduces)
    r_d = math.fsum(t.counters.get("output_mb", 0.0) for t in reduces)
    if d <= 0:
        raise LogParseError(f"job {job_id}: no WORKLOAD line and no map input counters")
    return WorkloadSpec(
        name=job_id,
        input_mb=d,
        map_selectivity=min(m_d / d, 1.0),
        reduce_selectivity=r_d / s_d if s_d > 0 else 1.0,
        reducer_count=len(reduces),
    )


# --- samples ---------------------------------------------------------------

PHASE_FEATURES: dict[Phase, tuple[str, ...]] = {
    Phase.READ: ("input_mb",),
    Phase.MAP: ("input_mb",),
    Phase.COLLECT: ("map_output_mb",),
    Phase.SPILL: ("map_output_mb",),
    Phase.MERGE: ("map_output_mb", "merge_nlogn"),
    Phase.SHUFFLE: ("shuffle_mb", "total_mappers"),
    Phase.REDUCE: ("shuffle_mb",),
    Phase.WRITE: ("write_mb",),
}


@dataclass(frozen=True)
class PhaseSample:
    phase: Phase
    features: tuple[float, ...]
    target_ms: float
    job_id: str
    task_id: str = ""

    def feature(self, name: str) -> float:
        return self.features[PHASE_FEATURES[self.phase].index(name)]


def extract_samples(trace: JobTrace) -> list[PhaseSample]:
    """One sample per (task, phase), custom map()/reduce() phases included.

    A map task that produced a single spill has no merge step, so it
    contributes no MERGE sample.
    """
    samples: list[PhaseSample] = []
    m_t = len(trace.tasks_of(MAP))
    for task in trace.tasks:
        c = task.counters
        if task.kind == MAP:
            d, m = c["input_mb"], c["output_mb"]
            feats = {
                Phase.READ: (d,),
                Phase.MAP: (d,),
                Phase.COLLECT: (m,),
                Phase.SPILL: (m,),
                Phase.MERGE: (m, merge_feature(m)),
            }
            if c.get("spill_file_count") == 1:
                del feats[Phase.MERGE]
        else:
            feats = {
                Phase.SHUFFLE: (c["input_mb"], float(m_t)),
                Phase.REDUCE: (c["input_mb"],),
                Phase.WRITE: (c["output_mb"],),
            }
        for phase, values in feats.items():
            samples.append(PhaseSample(phase, values, task.phase_ms[phase], trace.job_id, task.task_id))
    return samples


@dataclass(frozen=True)
class JobMetrics:
    """Job-level quantities a prediction needs, read off a parsed log."""

    input_mb: float
    map_output_mb: float
    map_selectivity_pct: float
    shuffle_mb: float
    reduce_output_mb: float
    total_mappers: int
    total_reducers: int
    container_count: int
    map_total_ms: float
    reduce_total_ms: float


def job_metrics(trace: JobTrace) -> JobMetrics:
    """Aggregate counters into the per-job metrics table.

    The map()/reduce() totals undo the per-task accounting of the custom
    phases: a task's time is its share of the summed per-record time divided
    by the container count, so the sum is ``N_c * sum(task times)``.
    """
    maps, reduces = trace.tasks_of(MAP), trace.tasks_of(REDUCE)
    d = math.fsum(t.counters["input_mb"] for t in maps)
    m_d = math.fsum(t.counters["output_mb"] for t in maps)
    n_c = trace.container_count
    return JobMetrics(
        input_mb=d,
        map_output_mb=m_d,
        map_selectivity_pct=100.0 * m_d / d if d else 0.0,
        shuffle_mb=math.fsum(t.counters["input_mb"] for t in reduces),
        reduce_output_mb=math.fsum(t.counters["output_mb"] for t in reduces),
        total_mappers=len(maps),
        total_reducers=len(reduces),
        container_count=n_c,
        map_total_ms=n_c * math.fsum(t.phase_ms[Phase.MAP] for t in maps),
        reduce_total_ms=n_c * math.fsum(t.phase_ms[Phase.REDUCE] for t in reduces),
    )

"""Generic benchmark sweep: build the grid, run it on the cluster, collect samples."""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .domain import (
    FRAMEWORK_PHASES,
    ClusterProfile,
    Phase,
    SchemaError,
    WorkloadSpec,
    mapper_count,
)
from .simcluster import simulate_job
from .tracelog import PHASE_FEATURES, PhaseSample, emit_log, extract_samples, parse_log


class SweepConfigError(ValueError):
    pass


class MissingSamplesError(LookupError):
    pass


class ProfilingError(RuntimeError):
    def __init__(self, point: BenchmarkPoint, cause: Exception):
        self.point = point
        super().__init__(f"benchmark point {point} failed: {cause}")


@dataclass(frozen=True)
class SweepConfig:
    """Inclusive input-size range plus the selectivity and block-size lists."""

    input_mb_start: float = 512.0
    input_mb_stop: float = 5120.0
    input_mb_step: float = 512.0
    map_selectivities: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
    block_sizes_mb: tuple[float, ...] = (64.0, 128.0)
    repetitions: int = 1

    def input_sizes(self) -> list[float]:
        if self.input_mb_step <= 0 or self.input_mb_stop < self.input_mb_start:
            return []
        n = int(math.floor((self.input_mb_stop - self.input_mb_start) / self.input_mb_step + 1e-9)) + 1
        return [self.input_mb_start + i * self.input_mb_step for i in range(n)]

    def to_dict(self) -> dict[str, Any]:
        doc = asdict(self)
        doc["map_selectivities"] = list(self.map_selectivities)
        doc["block_sizes_mb"] = list(self.block_sizes_mb)
        return doc

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> SweepConfig:
        if not isinstance(doc, dict):
            raise SchemaError("sweep: expected a JSON object")
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(doc) - known)
        if unknown:
            raise SchemaError(f"sweep: unknown field(s) {', '.join(unknown)}")
        kwargs = dict(doc)
        for key in ("map_selectivities", "block_sizes_mb"):
            if key in kwargs:
                kwargs[key] = tuple(float(v) for v in kwargs[key])
        return cls(**kwargs)


@dataclass(frozen=True)
class BenchmarkPoint:
    input_mb: float
    map_selectivity: float
    block_size_mb: float
    repetitions: int = 1
    seed: int = 0


def point_seed(base_seed: int, index: int, repetition: int = 0) -> int:
    """Counter-based seed: depends only on (base, index, repetition)."""
    return int(np.random.SeedSequence([base_seed, index, repetition]).generate_state(1)[0])


def build_grid(config: SweepConfig = SweepConfig(), seed: int = 42) -> list[BenchmarkPoint]:
    sizes = config.input_sizes()
    for name, dim in (("input sizes", sizes), ("map_selectivities", config.map_selectivities),
                      ("block_sizes_mb", config.block_sizes_mb)):
        if not dim:
            raise SweepConfigError(f"sweep dimension {name} is empty")
    if config.repetitions < 1:
        raise SweepConfigError("repetitions must be >= 1")
    grid = []
    combos = itertools.product(sorted(sizes), sorted(config.map_selectivities), sorted(config.block_sizes_mb))
    for i, (d, sel, block) in enumerate(combos):
        grid.append(BenchmarkPoint(d, sel, block, config.repetitions, point_seed(seed, i)))
    return grid


def generic_reducer_count(total_mappers: int, container_count: int) -> int:
    return max(1, min(math.ceil(total_mappers / 3), container_count))


def generic_workload(point: BenchmarkPoint, cluster: ClusterProfile) -> WorkloadSpec:
    """Benchmark job: selectivity-controlled map, identity reduce, no custom cost."""
    m_t = mapper_count(point.input_mb, point.block_size_mb)
    return WorkloadSpec(
        name=f"generic_D{point.input_mb:g}_S{point.map_selectivity:g}_B{point.block_size_mb:g}",
        input_mb=point.input_mb,
        map_selectivity=point.map_selectivity,
        reduce_selectivity=1.0,
        reducer_count=generic_reducer_count(m_t, cluster.container_count),
    )


@dataclass
class SampleSet:
    samples: dict[Phase, list[PhaseSample]] = field(
        default_factory=lambda: {p: [] for p in Phase})
    provenance: list[tuple[BenchmarkPoint, str]] = field(default_factory=list)

    def counts(self) -> dict[Phase, int]:
        return {p: len(v) for p, v in self.samples.items()}

    def framework_only(self) -> SampleSet:
        """The six framework phases, i.e. what the CSV files persist."""
        return SampleSet({p: list(self.samples.get(p, [])) for p in FRAMEWORK_PHASES}, list(self.provenance))

    def extend(self, samples: Iterable[PhaseSample]) -> None:
        for s in samples:
            self.samples.setdefault(s.phase, []).append(s)

    def arrays(self, phase: Phase) -> tuple[np.ndarray, np.ndarray]:
        rows = self.samples.get(phase, [])
        width = len(PHASE_FEATURES[phase])
        x = np.array([s.features for s in rows], dtype=float).reshape(len(rows), width)
        y = np.array([s.target_ms for s in rows], dtype=float)
        return x, y

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SampleSet):
            return NotImplemented
        return self.counts() == other.counts() and self.samples == other.samples \
            and self.provenance == other.provenance

    # -- persistence: one CSV per phase ---------------------------------------

    def write_csv(self, out_dir: str | Path) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for phase in FRAMEWORK_PHASES:
            path = out / f"{phase.value.lower()}.csv"
            with open(path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow([*PHASE_FEATURES[phase], "target_ms", "job_id", "task_id"])
                for s in self.samples.get(phase, []):
                    w.writerow([*map(repr, s.features), repr(s.target_ms), s.job_id, s.task_id])
            written.append(path)
        prov = [{"job_id": job_id, **asdict(point)} for point, job_id in self.provenance]
        (out / "provenance.json").write_text(json.dumps(prov, indent=1) + "\n", encoding="utf-8")
        return written

    @classmethod
    def read_csv(cls, in_dir: str | Path) -> SampleSet:
        """Load per-phase CSVs; a missing phase file raises MissingSamplesError."""
        src = Path(in_dir)
        out = cls({p: [] for p in FRAMEWORK_PHASES})
        for phase in FRAMEWORK_PHASES:
            path = src / f"{phase.value.lower()}.csv"
            if not path.exists():
                raise MissingSamplesError(f"missing {phase.value} samples: {path}")
            names = PHASE_FEATURES[phase]
            with open(path, newline="", encoding="utf-8") as fh:
                reader = csv.reader(fh)
                header = next(reader, None)
                if header != [*names, "target_ms", "job_id", "task_id"]:
                    raise SchemaError(f"{path}: unexpected header {header}")
                for line_no, row in enumerate(reader, start=2):
                    try:
                        feats = tuple(float(v) for v in row[:len(names)])
                        target = float(row[len(names)])
                        job_id, task_id = row[len(names) + 1], row[len(names) + 2]
                    except (ValueError, IndexError):
                        raise SchemaError(f"{path}:{line_no}: malformed row {row}") from None
                    out.samples[phase].append(PhaseSample(phase, feats, target, job_id, task_id))
        prov_path = src / "provenance.json"
        if prov_path.exists():
            for item in json.loads(prov_path.read_text(encoding="utf-8")):
                job_id = item.pop("job_id")
                out.provenance.append((BenchmarkPoint(**item), job_id))
        return out


def run_point(cluster: ClusterProfile, point: BenchmarkPoint, index: int) -> list[tuple[str, list[PhaseSample]]]:
    """Simulate one grid point (all repetitions) through the log round trip."""
    bench_cluster = cluster.with_(block_size_mb=point.block_size_mb)
    workload = generic_workload(point, bench_cluster)
    results = []
    for rep in range(point.repetitions):
        job_id = f"bm{index:04d}_r{rep}"
        seed = point.seed if rep == 0 else point_seed(point.seed, index, rep)
        trace = simulate_job(bench_cluster, workload, seed, job_id=job_id)
        parsed = parse_log(emit_log(trace))
        results.append((job_id, extract_samples(parsed)))
    return results


def run_profile(cluster: ClusterProfile, grid: Sequence[BenchmarkPoint]) -> SampleSet:
    out = SampleSet()
    for i, point in enumerate(grid):
        try:
            runs = run_point(cluster, point, i)
        except Exception as exc:
            raise ProfilingError(point, exc) from exc
        for job_id, samples in runs:
            out.provenance.append((point, job_id))
            out.extend(samples)
    return out


def phase_count_summary(samples: SampleSet) -> str:
    counts = samples.counts()
    return "\n".join(f"{p.value:<8} {counts.get(p, 0):>7}" for p in Phase)

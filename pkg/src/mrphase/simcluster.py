"""Seeded simulator of a YARN cluster running one MapReduce job under FIFO.

Map tasks run in ``ceil(M_t / N_c)`` synchronous waves, then reduce tasks run
in ``ceil(R_t / N_c)`` waves once every map task has finished. A wave lasts as
long as its slowest task. Phase durations are the ground-truth linear costs
evaluated on each task's data share, times a per-phase noise factor
``max(0, 1 + sigma * g)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .domain import (
    BYTES_PER_MB,
    MAP_PHASES,
    REDUCE_PHASES,
    ClusterProfile,
    GroundTruthCoefficients,
    Milliseconds,
    Phase,
    WorkloadSpec,
    derive_features,
    map_input_shares,
    wave_count,
)

MAP = "MAP"
REDUCE = "REDUCE"


@dataclass(frozen=True)
class TaskTrace:
    task_id: str
    kind: str
    wave_index: int
    phase_ms: Mapping[Phase, float]
    counters: Mapping[str, float]

    def __post_init__(self) -> None:
        expected = MAP_PHASES if self.kind == MAP else REDUCE_PHASES
        if self.kind not in (MAP, REDUCE):
            raise ValueError(f"task kind must be MAP or REDUCE, got {self.kind!r}")
        if tuple(self.phase_ms) != expected:
            raise ValueError(f"{self.task_id}: phases {list(self.phase_ms)} != {list(expected)}")
        if any(v < 0 for v in self.phase_ms.values()):
            raise ValueError(f"{self.task_id}: negative phase duration")

    @property
    def duration_ms(self) -> float:
        return math.fsum(self.phase_ms.values())


@dataclass(frozen=True)
class JobTrace:
    job_id: str
    workload: WorkloadSpec
    container_count: int
    block_size_mb: float
    tasks: tuple[TaskTrace, ...]
    total_ms: float
    seed: int = 0

    @property
    def cluster_summary(self) -> tuple[int, float]:
        return self.container_count, self.block_size_mb

    def tasks_of(self, kind: str) -> list[TaskTrace]:
        return [t for t in self.tasks if t.kind == kind]


@dataclass(frozen=True)
class TaskSpan:
    task_id: str
    kind: str
    wave_index: int
    start_ms: float
    end_ms: float


def merge_feature(map_output_mb: float) -> float:
    """``m * ln(m)``, floored at zero so sub-megabyte outputs contribute nothing."""
    if map_output_mb <= 0:
        return 0.0
    return max(map_output_mb * math.log(map_output_mb), 0.0)


def spill_file_count(map_output_mb: float, cluster: ClusterProfile) -> int:
    if map_output_mb <= 0:
        return 0
    return max(1, math.ceil(map_output_mb / cluster.spill_limit_mb))


def merge_runs(map_output_mb: float, cluster: ClusterProfile) -> bool:
    """False when the whole map output fit in one spill, so there is nothing to merge."""
    spills = spill_file_count(map_output_mb, cluster)
    return not (spills == 1 and map_output_mb <= cluster.spill_limit_mb)


def phase_ground_truth(phase: Phase, features: Mapping[str, float], coeffs: GroundTruthCoefficients) -> float:
    """Noise-free duration of one framework phase for one task.

    ``features`` uses the keys ``input_mb``, ``map_output_mb``, ``shuffle_mb``,
    ``total_mappers`` and ``write_mb`` as the phase requires.
    """
    phase = Phase(phase)
    if phase is Phase.READ:
        return coeffs.read(features["input_mb"])
    if phase is Phase.COLLECT:
        return coeffs.collect(features["map_output_mb"])
    if phase is Phase.SPILL:
        return coeffs.spill(features["map_output_mb"])
    if phase is Phase.MERGE:
        return coeffs.merge(merge_feature(features["map_output_mb"]))
    if phase is Phase.SHUFFLE:
        return coeffs.shuffle(features["shuffle_mb"], features["total_mappers"])
    if phase is Phase.WRITE:
        return coeffs.write(features["write_mb"])
    raise ValueError(f"{phase.value} is a user-defined phase with no ground-truth model")


def per_task_custom_ms(total_ms: float, task_count: int, container_count: int) -> float:
    return total_ms / task_count / container_count


def custom_phase_time(total_units: int, ms_per_unit: float, task_count: int, container_count: int) -> Milliseconds:
    """Per-task time of a user-defined map() or reduce() phase.

    The summed per-unit time is spread over the tasks and then over the
    containers. Both the simulator and the predictor use this.
    """
    if task_count < 1 or container_count < 1:
        raise ValueError("task_count and container_count must be >= 1")
    return Milliseconds(per_task_custom_ms(total_units * ms_per_unit, task_count, container_count))


def record_count(input_mb: float, record_size_bytes: int) -> int:
    return int(round(input_mb * BYTES_PER_MB / record_size_bytes))


def key_count(map_output_mb: float, keys_per_mb: float) -> int:
    return int(round(map_output_mb * keys_per_mb))


def map_custom_total_ms(workload: WorkloadSpec, cluster: ClusterProfile) -> float:
    return record_count(workload.input_mb, cluster.record_size_bytes) * workload.map_ms_per_record


def reduce_custom_total_ms(workload: WorkloadSpec) -> float:
    map_output = workload.input_mb * workload.map_selectivity
    return key_count(map_output, workload.keys_per_mb) * workload.reduce_ms_per_key


def map_task_phases(input_mb: float, workload: WorkloadSpec, cluster: ClusterProfile,
                    total_mappers: int, coeffs: GroundTruthCoefficients) -> tuple[dict[Phase, float], dict[str, float]]:
    """Noise-free phase durations and counters for one map task."""
    out_mb = input_mb * workload.map_selectivity
    spills = spill_file_count(out_mb, cluster)
    feats = {"input_mb": input_mb, "map_output_mb": out_mb}
    phases = {
        Phase.READ: phase_ground_truth(Phase.READ, feats, coeffs),
        Phase.MAP: custom_phase_time(
            record_count(workload.input_mb, cluster.record_size_bytes),
            workload.map_ms_per_record, total_mappers, cluster.container_count),
        Phase.COLLECT: phase_ground_truth(Phase.COLLECT, feats, coeffs),
        Phase.SPILL: phase_ground_truth(Phase.SPILL, feats, coeffs),
        Phase.MERGE: phase_ground_truth(Phase.MERGE, feats, coeffs) if merge_runs(out_mb, cluster) else 0.0,
    }
    counters = {"input_mb": input_mb, "output_mb": out_mb, "spill_file_count": spills}
    return phases, counters


def reduce_task_phases(shuffle_mb: float, workload: WorkloadSpec, cluster: ClusterProfile,
                       total_mappers: int, coeffs: GroundTruthCoefficients) -> tuple[dict[Phase, float], dict[str, float]]:
    """Noise-free phase durations and counters for one reduce task."""
    write_mb = shuffle_mb * workload.reduce_selectivity
    feats = {"shuffle_mb": shuffle_mb, "total_mappers": total_mappers, "write_mb": write_mb}
    map_output = workload.input_mb * workload.map_selectivity
    phases = {
        Phase.SHUFFLE: phase_ground_truth(Phase.SHUFFLE, feats, coeffs),
        Phase.REDUCE: custom_phase_time(
            key_count(map_output, workload.keys_per_mb),
            workload.reduce_ms_per_key, workload.reducer_count, cluster.container_count),
        Phase.WRITE: phase_ground_truth(Phase.WRITE, feats, coeffs),
    }
    return phases, {"input_mb": shuffle_mb, "output_mb": write_mb}


def wave_makespan(durations: Sequence[float], container_count: int) -> float:
    """Sum over FIFO waves of the slowest task in each wave."""
    return math.fsum(
        max(durations[i:i + container_count])
        for i in range(0, len(durations), container_count)
    )


def simulate_job(cluster: ClusterProfile, workload: WorkloadSpec, seed: int, job_id: str | None = None) -> JobTrace:
    rng = np.random.default_rng(seed)
    features = derive_features(workload, cluster)
    m_t = features.total_mappers
    n_c = cluster.container_count
    coeffs = cluster.ground_truth
    sigma = cluster.noise_sigma

    def noisy(phases: dict[Phase, float]) -> dict[Phase, float]:
        draws = rng.standard_normal(len(phases))
        if sigma == 0:
            return phases
        return {p: v * max(0.0, 1.0 + sigma * g) for (p, v), g in zip(phases.items(), draws)}

    tasks: list[TaskTrace] = []
    for i, d_task in enumerate(map_input_shares(workload.input_mb, cluster.block_size_mb)):
        phases, counters = map_task_phases(d_task, workload, cluster, m_t, coeffs)
        tasks.append(TaskTrace(f"m{i:06d}", MAP, i // n_c, noisy(phases), counters))

    for j in range(workload.reducer_count):
        phases, counters = reduce_task_phases(features.shuffle_per_reducer_mb, workload, cluster, m_t, coeffs)
        tasks.append(TaskTrace(f"r{j:06d}", REDUCE, j // n_c, noisy(phases), counters))

    map_ms = wave_makespan([t.duration_ms for t in tasks if t.kind == MAP], n_c)
    reduce_ms = wave_makespan([t.duration_ms for t in tasks if t.kind == REDUCE], n_c)
    return JobTrace(
        job_id=job_id or f"job_{workload.name.replace(' ', '_')}_{seed}",
        workload=workload,
        container_count=n_c,
        block_size_mb=cluster.block_size_mb,
        tasks=tuple(tasks),
        total_ms=map_ms + reduce_ms,
        seed=seed,
    )


def timeline(trace: JobTrace) -> list[TaskSpan]:
    """Start and end time of every task, reconstructed from the wave structure."""
    spans: list[TaskSpan] = []
    clock = 0.0
    for kind in (MAP, REDUCE):
        tasks = trace.tasks_of(kind)
        n_waves = wave_count(len(tasks), trace.container_count)
        for w in range(n_waves):
            wave = [t for t in tasks if t.wave_index == w]
            for t in wave:
                spans.append(TaskSpan(t.task_id, kind, w, clock, clock + t.duration_ms))
            clock += max(t.duration_ms for t in wave)
    return spans

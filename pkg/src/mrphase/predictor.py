"""Compose per-phase models into task- and job-level time estimates."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

from .domain import (
    MAP_PHASES,
    REDUCE_PHASES,
    ClusterProfile,
    Phase,
    WorkloadSpec,
    derive_features,
    map_input_shares,
)
from .regress import PhaseModel, PhaseModelSet
from .simcluster import (
    merge_feature,
    merge_runs,
    map_custom_total_ms,
    per_task_custom_ms,
    reduce_custom_total_ms,
    simulate_job,
)
from .tracelog import JobMetrics


class MissingCustomTimeError(ValueError):
    pass


@dataclass(frozen=True)
class CustomTimes:
    """Summed map()/reduce() time over the whole job, in ms.

    ``None`` means "not supplied". Use :meth:`from_rates` for the analytic
    per-record route or :meth:`from_metrics` for a reference-run log.
    """

    map_total_ms: float | None = None
    reduce_total_ms: float | None = None

    @classmethod
    def from_rates(cls, workload: WorkloadSpec, cluster: ClusterProfile) -> CustomTimes:
        return cls(map_custom_total_ms(workload, cluster), reduce_custom_total_ms(workload))

    @classmethod
    def from_metrics(cls, metrics: JobMetrics) -> CustomTimes:
        return cls(metrics.map_total_ms, metrics.reduce_total_ms if metrics.total_reducers else None)


def predict_phase(model: PhaseModel, features: Mapping[str, float]) -> float:
    return model.predict(features)


@dataclass(frozen=True)
class JobPrediction:
    workload: str
    phase_task_ms: Mapping[Phase, float]
    map_task_ms: float
    reduce_task_ms: float
    map_waves: int
    reduce_waves: int
    total_ms: float
    breakdown: Mapping[Phase, float]

    def to_dict(self) -> dict[str, Any]:
        return {
            "workload": self.workload,
            "map_waves": self.map_waves,
            "reduce_waves": self.reduce_waves,
            "map_task_ms": self.map_task_ms,
            "reduce_task_ms": self.reduce_task_ms,
            "total_ms": self.total_ms,
            "phase_task_ms": {p.value: v for p, v in self.phase_task_ms.items()},
            "breakdown_ms": {p.value: v for p, v in self.breakdown.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def table(self) -> str:
        rows = [f"{'phase':<8} {'per-task ms':>14} {'waves':>6} {'contribution ms':>17} {'share %':>8}"]
        for phase, contrib in self.breakdown.items():
            waves = self.map_waves if phase in MAP_PHASES else self.reduce_waves
            share = 100.0 * contrib / self.total_ms if self.total_ms else 0.0
            rows.append(f"{phase.value:<8} {self.phase_task_ms[phase]:>14.3f} {waves:>6d} "
                        f"{contrib:>17.3f} {share:>8.2f}")
        rows.append(f"{'TOTAL':<8} {'':>14} {'':>6} {self.total_ms:>17.3f} {100.0 if self.total_ms else 0.0:>8.2f}")
        return "\n".join(rows)


def _map_task(models: PhaseModelSet, input_mb: float, workload: WorkloadSpec,
              cluster: ClusterProfile, custom_ms: float) -> dict[Phase, float]:
    out_mb = input_mb * workload.map_selectivity
    feats = {"input_mb": input_mb, "map_output_mb": out_mb, "merge_nlogn": merge_feature(out_mb)}
    return {
        Phase.READ: models[Phase.READ].predict(feats),
        Phase.MAP: custom_ms,
        Phase.COLLECT: models[Phase.COLLECT].predict(feats),
        Phase.SPILL: models[Phase.SPILL].predict(feats),
        Phase.MERGE: models[Phase.MERGE].predict(feats) if merge_runs(out_mb, cluster) else 0.0,
    }


def _critical_path(task_phases: Sequence[dict[Phase, float]], container_count: int,
                   phases: Sequence[Phase]) -> tuple[dict[Phase, float], int]:
    """Per-phase contributions of the slowest task in each FIFO wave."""
    contrib = {p: [] for p in phases}
    waves = 0
    for i in range(0, len(task_phases), container_count):
        wave = task_phases[i:i + container_count]
        slowest = max(wave, key=lambda t: math.fsum(t.values()))
        for p in phases:
            contrib[p].append(slowest[p])
        waves += 1
    return {p: math.fsum(v) for p, v in contrib.items()}, waves


def predict_job(models: PhaseModelSet, workload: WorkloadSpec, cluster: ClusterProfile,
                custom: CustomTimes) -> JobPrediction:
    """Estimate the job's completion time from phase models and custom-phase totals.

    Map tasks see a full block except the last; tasks are grouped into FIFO
    waves of ``container_count`` and each wave costs its slowest task. The
    reported per-task times are the wave-averaged critical-path times, so
    ``total_ms == map_waves * map_task_ms + reduce_waves * reduce_task_ms``.
    """
    feats = derive_features(workload, cluster)
    m_t, r_t, n_c = feats.total_mappers, workload.reducer_count, cluster.container_count
    if custom.map_total_ms is None:
        raise MissingCustomTimeError(f"{workload.name}: no map() time supplied")
    if r_t > 0 and custom.reduce_total_ms is None:
        raise MissingCustomTimeError(f"{workload.name}: no reduce() time supplied")

    map_custom = per_task_custom_ms(custom.map_total_ms, m_t, n_c)
    shapes: dict[float, dict[Phase, float]] = {}
    tasks = []
    for d in map_input_shares(workload.input_mb, cluster.block_size_mb):
        if d not in shapes:
            shapes[d] = _map_task(models, d, workload, cluster, map_custom)
        tasks.append(shapes[d])
    map_contrib, map_waves = _critical_path(tasks, n_c, MAP_PHASES)

    breakdown = dict(map_contrib)
    reduce_contrib = {p: 0.0 for p in REDUCE_PHASES}
    reduce_waves = 0
    if r_t > 0:
        s = feats.shuffle_per_reducer_mb
        rfeats = {"shuffle_mb": s, "total_mappers": float(m_t), "write_mb": s * workload.reduce_selectivity}
        task = {
            Phase.SHUFFLE: models[Phase.SHUFFLE].predict(rfeats),
            Phase.REDUCE: per_task_custom_ms(custom.reduce_total_ms, r_t, n_c),
            Phase.WRITE: models[Phase.WRITE].predict(rfeats),
        }
        reduce_contrib, reduce_waves = _critical_path([task] * r_t, n_c, REDUCE_PHASES)
    breakdown.update(reduce_contrib)

    map_ms = math.fsum(map_contrib.values())
    reduce_ms = math.fsum(reduce_contrib.values())
    per_task = {p: v / map_waves for p, v in map_contrib.items()}
    per_task.update({p: (v / reduce_waves if reduce_waves else 0.0) for p, v in reduce_contrib.items()})
    return JobPrediction(
        workload=workload.name,
        phase_task_ms=per_task,
        map_task_ms=map_ms / map_waves,
        reduce_task_ms=reduce_ms / reduce_waves if reduce_waves else 0.0,
        map_waves=map_waves,
        reduce_waves=reduce_waves,
        total_ms=map_ms + reduce_ms,
        breakdown=breakdown,
    )


@dataclass(frozen=True)
class ErrorReport:
    workload: str
    predicted_ms: float
    actual_ms: tuple[float, ...]
    errors_pct: tuple[float, ...]
    seeds: tuple[int, ...]

    @property
    def mean_actual_ms(self) -> float:
        return math.fsum(self.actual_ms) / len(self.actual_ms)

    @property
    def mean_error_pct(self) -> float:
        return math.fsum(self.errors_pct) / len(self.errors_pct)

    @property
    def mean_abs_error_pct(self) -> float:
        return math.fsum(abs(e) for e in self.errors_pct) / len(self.errors_pct)

    @property
    def max_abs_error_pct(self) -> float:
        return max(abs(e) for e in self.errors_pct)

    def flagged(self, threshold_pct: float = 50.0) -> bool:
        return self.max_abs_error_pct > threshold_pct


def percent_error(actual: float, predicted: float) -> float:
    """Signed error; over-prediction is negative."""
    return (actual - predicted) / actual * 100.0


def evaluate_prediction(models: PhaseModelSet, workload: WorkloadSpec, cluster: ClusterProfile,
                        seeds: Sequence[int], custom: CustomTimes | None = None) -> ErrorReport:
    """Simulate ``workload`` once per seed and compare with the model's estimate.

    Without ``custom`` the workload's own per-record rates are used.
    """
    if custom is None:
        custom = CustomTimes.from_rates(workload, cluster)
    predicted = predict_job(models, workload, cluster, custom).total_ms
    actual = tuple(simulate_job(cluster, workload, s).total_ms for s in seeds)
    return ErrorReport(workload.name, predicted, actual,
                       tuple(percent_error(a, predicted) for a in actual), tuple(seeds))

"""Shared value types for the MapReduce phase models.

Every data volume is in megabytes and every duration in milliseconds.
The ``Megabytes`` and ``Milliseconds`` aliases exist so signatures say which
one they expect; they are plain floats at runtime.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from enum import Enum
from pathlib import Path
from typing import Any, NewType

log = logging.getLogger(__name__)

Megabytes = NewType("Megabytes", float)
Milliseconds = NewType("Milliseconds", float)

BYTES_PER_MB = 1024 * 1024
SUPPORTED_BLOCK_SIZES_MB = (32.0, 64.0, 128.0, 256.0, 512.0)


class InvalidClusterError(ValueError):
    pass


class InvalidWorkloadError(ValueError):
    pass


class SchemaError(ValueError):
    """A JSON document does not match the expected field set."""


class Phase(str, Enum):
    READ = "READ"
    MAP = "MAP"
    COLLECT = "COLLECT"
    SPILL = "SPILL"
    MERGE = "MERGE"
    SHUFFLE = "SHUFFLE"
    REDUCE = "REDUCE"
    WRITE = "WRITE"


MAP_PHASES = (Phase.READ, Phase.MAP, Phase.COLLECT, Phase.SPILL, Phase.MERGE)
REDUCE_PHASES = (Phase.SHUFFLE, Phase.REDUCE, Phase.WRITE)
FRAMEWORK_PHASES = (
    Phase.READ,
    Phase.COLLECT,
    Phase.SPILL,
    Phase.MERGE,
    Phase.SHUFFLE,
    Phase.WRITE,
)


class Scheduler(str, Enum):
    FIFO = "FIFO"


class DesignPattern(str, Enum):
    SUMMARISATION = "Summarisation"
    FILTERING = "Filtering"
    DATA_ORGANISATION = "DataOrganisation"
    JOIN = "Join"
    GENERIC = "Generic"


def _check_fields(cls: type, doc: dict[str, Any], *, what: str) -> None:
    if not isinstance(doc, dict):
        raise SchemaError(f"{what}: expected a JSON object, got {type(doc).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise SchemaError(f"{what}: unknown field(s) {', '.join(unknown)}")


@dataclass(frozen=True)
class LinearCost:
    """``slope * x + intercept`` in ms."""

    slope: float
    intercept: float

    def __call__(self, x: float) -> float:
        return self.slope * x + self.intercept


@dataclass(frozen=True)
class ShuffleCost:
    data_slope: float
    mapper_slope: float
    intercept: float

    def __call__(self, shuffle_mb: float, total_mappers: float) -> float:
        return self.data_slope * shuffle_mb + self.mapper_slope * total_mappers + self.intercept


@dataclass(frozen=True)
class GroundTruthCoefficients:
    """Per-phase cost coefficients the simulated cluster obeys.

    Defaults are the coefficients fitted on the 8-node profiling cluster.
    The merge slope multiplies ``m * ln(m)``.
    """

    read: LinearCost = LinearCost(0.01, 1.33)
    collect: LinearCost = LinearCost(0.01, 0.97)
    spill: LinearCost = LinearCost(0.02, 0.98)
    merge: LinearCost = LinearCost(0.002, 4.80)
    shuffle: ShuffleCost = ShuffleCost(10.45, 579.48, 6144.6)
    write: LinearCost = LinearCost(6.94, 2139.98)

    def __post_init__(self) -> None:
        for name, value in self.as_flat().items():
            if not (value >= 0 and math.isfinite(value)):
                raise InvalidClusterError(f"ground truth {name} must be finite and >= 0, got {value}")

    def as_flat(self) -> dict[str, float]:
        out = {}
        for phase in ("read", "collect", "spill", "merge", "write"):
            cost = getattr(self, phase)
            out[f"{phase}.slope"] = cost.slope
            out[f"{phase}.intercept"] = cost.intercept
        out["shuffle.data_slope"] = self.shuffle.data_slope
        out["shuffle.mapper_slope"] = self.shuffle.mapper_slope
        out["shuffle.intercept"] = self.shuffle.intercept
        return out

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> GroundTruthCoefficients:
        _check_fields(cls, doc, what="ground_truth")
        kwargs: dict[str, Any] = {}
        for key, value in doc.items():
            target = ShuffleCost if key == "shuffle" else LinearCost
            _check_fields(target, value, what=f"ground_truth.{key}")
            kwargs[key] = target(**{k: float(v) for k, v in value.items()})
        return cls(**kwargs)

    def scaled(self, factor: float) -> GroundTruthCoefficients:
        """Copy with every slope multiplied by ``factor`` (intercepts kept)."""
        return GroundTruthCoefficients(
            read=LinearCost(self.read.slope * factor, self.read.intercept),
            collect=LinearCost(self.collect.slope * factor, self.collect.intercept),
            spill=LinearCost(self.spill.slope * factor, self.spill.intercept),
            merge=LinearCost(self.merge.slope * factor, self.merge.intercept),
            shuffle=ShuffleCost(
                self.shuffle.data_slope * factor,
                self.shuffle.mapper_slope * factor,
                self.shuffle.intercept,
            ),
            write=LinearCost(self.write.slope * factor, self.write.intercept),
        )


@dataclass(frozen=True)
class ClusterProfile:
    container_count: int = 8
    block_size_mb: float = 128.0
    scheduler: Scheduler = Scheduler.FIFO
    ground_truth: GroundTruthCoefficients = field(default_factory=GroundTruthCoefficients)
    noise_sigma: float = 0.05
    spill_buffer_mb: float = 100.0
    spill_threshold: float = 0.80
    record_size_bytes: int = 100

    def __post_init__(self) -> None:
        if not isinstance(self.container_count, int) or self.container_count < 1:
            raise InvalidClusterError(f"container_count must be an integer >= 1, got {self.container_count!r}")
        if self.block_size_mb not in SUPPORTED_BLOCK_SIZES_MB:
            raise InvalidClusterError(
                f"block_size_mb {self.block_size_mb} not one of {SUPPORTED_BLOCK_SIZES_MB}"
            )
        if not isinstance(self.scheduler, Scheduler):
            object.__setattr__(self, "scheduler", Scheduler(self.scheduler))
        if not self.noise_sigma >= 0:
            raise InvalidClusterError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if not self.spill_buffer_mb > 0:
            raise InvalidClusterError(f"spill_buffer_mb must be > 0, got {self.spill_buffer_mb}")
        if not 0 < self.spill_threshold <= 1:
            raise InvalidClusterError(f"spill_threshold must be in (0, 1], got {self.spill_threshold}")
        if not isinstance(self.record_size_bytes, int) or self.record_size_bytes < 1:
            raise InvalidClusterError(f"record_size_bytes must be a positive integer, got {self.record_size_bytes!r}")

    @property
    def spill_limit_mb(self) -> float:
        return self.spill_buffer_mb * self.spill_threshold

    def with_(self, **changes: Any) -> ClusterProfile:
        return ClusterProfile(**{**{f.name: getattr(self, f.name) for f in fields(self)}, **changes})

    def to_dict(self) -> dict[str, Any]:
        doc = asdict(self)
        doc["scheduler"] = self.scheduler.value
        return doc

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> ClusterProfile:
        _check_fields(cls, doc, what="cluster")
        kwargs = dict(doc)
        if "ground_truth" in kwargs:
            kwargs["ground_truth"] = GroundTruthCoefficients.from_dict(kwargs["ground_truth"])
        if "block_size_mb" in kwargs:
            kwargs["block_size_mb"] = float(kwargs["block_size_mb"])
        for key in ("noise_sigma", "spill_buffer_mb", "spill_threshold"):
            if key in kwargs:
                kwargs[key] = float(kwargs[key])
        if "scheduler" in kwargs:
            try:
                kwargs["scheduler"] = Scheduler(kwargs["scheduler"])
            except ValueError:
                raise InvalidClusterError(f"unsupported scheduler {kwargs['scheduler']!r}") from None
        return cls(**kwargs)


def single_node_cluster(**changes: Any) -> ClusterProfile:
    """One 32 GB host, 24 GB to YARN at 3 GB per container."""
    return ClusterProfile(container_count=8).with_(**changes)


def eight_node_cluster(**changes: Any) -> ClusterProfile:
    """Eight 8 GB hosts; YARN caps concurrency at 8 containers."""
    return ClusterProfile(container_count=8).with_(**changes)


@dataclass(frozen=True)
class WorkloadSpec:
    name: str
    input_mb: float
    map_selectivity: float = 1.0
    reduce_selectivity: float = 1.0
    reducer_count: int = 1
    map_ms_per_record: float = 0.0
    reduce_ms_per_key: float = 0.0
    keys_per_mb: float = 1000.0
    design_pattern: DesignPattern = DesignPattern.GENERIC

    def __post_init__(self) -> None:
        if not self.name:
            raise InvalidWorkloadError("workload name must be non-empty")
        if not (self.input_mb > 0 and math.isfinite(self.input_mb)):
            raise InvalidWorkloadError(f"input_mb must be > 0, got {self.input_mb}")
        if not 0 <= self.map_selectivity <= 1:
            raise InvalidWorkloadError(f"map_selectivity must be in [0, 1], got {self.map_selectivity}")
        if not (self.reduce_selectivity >= 0 and math.isfinite(self.reduce_selectivity)):
            raise InvalidWorkloadError(f"reduce_selectivity must be >= 0, got {self.reduce_selectivity}")
        if not isinstance(self.reducer_count, int) or self.reducer_count < 0:
            raise InvalidWorkloadError(f"reducer_count must be a non-negative integer, got {self.reducer_count!r}")
        if self.map_ms_per_record < 0 or self.reduce_ms_per_key < 0:
            raise InvalidWorkloadError("per-record and per-key costs must be >= 0")
        if not self.keys_per_mb > 0:
            raise InvalidWorkloadError(f"keys_per_mb must be > 0, got {self.keys_per_mb}")
        if not isinstance(self.design_pattern, DesignPattern):
            object.__setattr__(self, "design_pattern", DesignPattern(self.design_pattern))

    @property
    def is_map_only(self) -> bool:
        return self.reducer_count == 0

    def with_(self, **changes: Any) -> WorkloadSpec:
        return WorkloadSpec(**{**{f.name: getattr(self, f.name) for f in fields(self)}, **changes})

    def to_dict(self) -> dict[str, Any]:
        doc = asdict(self)
        doc["design_pattern"] = self.design_pattern.value
        return doc

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> WorkloadSpec:
        _check_fields(cls, doc, what="workload")
        kwargs = dict(doc)
        for key in ("input_mb", "map_selectivity", "reduce_selectivity",
                    "map_ms_per_record", "reduce_ms_per_key", "keys_per_mb"):
            if key in kwargs:
                kwargs[key] = float(kwargs[key])
        if "design_pattern" in kwargs:
            try:
                kwargs["design_pattern"] = DesignPattern(kwargs["design_pattern"])
            except ValueError:
                raise InvalidWorkloadError(f"unknown design_pattern {kwargs['design_pattern']!r}") from None
        return cls(**kwargs)


@dataclass(frozen=True)
class DerivedFeatures:
    total_mappers: int
    map_output_mb: Megabytes
    shuffle_per_reducer_mb: Megabytes
    reduce_output_mb: Megabytes
    map_waves: int
    reduce_waves: int
    reducer_count: int = 0


def wave_count(task_count: int, container_count: int) -> int:
    """Number of FIFO rounds needed to run ``task_count`` tasks on ``container_count`` containers."""
    if container_count < 1:
        raise InvalidClusterError(f"container_count must be >= 1, got {container_count}")
    if task_count < 0:
        raise ValueError(f"task_count must be >= 0, got {task_count}")
    return -(-task_count // container_count)


def mapper_count(input_mb: float, block_size_mb: float) -> int:
    return max(1, math.ceil(input_mb / block_size_mb))


def map_input_shares(input_mb: float, block_size_mb: float) -> list[float]:
    """Input MB read by each map task: full blocks, remainder on the last task."""
    n = mapper_count(input_mb, block_size_mb)
    last = input_mb - (n - 1) * block_size_mb
    return [block_size_mb] * (n - 1) + [last]


def derive_features(workload: WorkloadSpec, cluster: ClusterProfile) -> DerivedFeatures:
    m_t = mapper_count(workload.input_mb, cluster.block_size_mb)
    map_output = workload.input_mb * workload.map_selectivity
    r_t = workload.reducer_count
    if r_t == 0:
        if workload.reduce_selectivity > 0:
            log.debug("%s: map-only job, reduce-side features set to zero", workload.name)
        shuffle = reduce_out = 0.0
    else:
        shuffle = map_output / r_t
        reduce_out = map_output * workload.reduce_selectivity
    return DerivedFeatures(
        total_mappers=m_t,
        map_output_mb=Megabytes(map_output),
        shuffle_per_reducer_mb=Megabytes(shuffle),
        reduce_output_mb=Megabytes(reduce_out),
        map_waves=wave_count(m_t, cluster.container_count),
        reduce_waves=wave_count(r_t, cluster.container_count),
        reducer_count=r_t,
    )


def load_json(path: str | Path) -> Any:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def load_cluster(path: str | Path) -> ClusterProfile:
    return ClusterProfile.from_dict(load_json(path))


def load_workload(path: str | Path) -> WorkloadSpec:
    return WorkloadSpec.from_dict(load_json(path))

"""Domain types shared by every module, plus the feature pipeline.

Feature extraction turns a :class:`ClusterState` into the two matrices the
predictor consumes: one row per host (M_H, width 12) and one row per task of
a single job (M_T, width 5, zero padded to the maximum job size). All
entries are normalized into [0, 1] against configured fleet maxima so they
can be fed to the network directly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

HOST_FEATURES = 12
TASK_FEATURES = 5


class TaskState(enum.Enum):
    QUEUED = "queued"
    RUNNING = "running"
    COMPLETED = "completed"
    SPECULATING = "speculating"
    RERUNNING = "rerunning"
    FAILED = "failed"


@dataclass
class Host:
    """A physical machine. Capacities are fixed; *_used fields track reservations."""

    id: int
    cpu_capacity: float  # MIPS
    ram_capacity: float  # MB
    disk_capacity: float  # MB
    bw_capacity: float  # KB/s
    cost_per_interval: float
    power_min: float  # watts
    power_max: float  # watts
    cpu_used: float = 0.0
    ram_used: float = 0.0
    disk_used: float = 0.0
    bw_used: float = 0.0
    active_task_count: int = 0
    online: bool = True
    downtime_remaining: int = 0  # intervals; > 0 iff offline

    def __post_init__(self) -> None:
        for name in ("cpu_capacity", "ram_capacity", "disk_capacity", "bw_capacity"):
            if getattr(self, name) <= 0:
                raise ValueError(f"host {self.id}: {name} must be > 0")
        if self.power_min > self.power_max:
            raise ValueError(f"host {self.id}: power_min > power_max")

    def check_invariants(self) -> None:
        for name in ("cpu", "ram", "disk", "bw"):
            used = getattr(self, f"{name}_used")
            cap = getattr(self, f"{name}_capacity")
            if not (-1e-9 <= used <= cap + 1e-9):
                raise AssertionError(f"host {self.id}: {name}_used={used} outside [0, {cap}]")
        if (self.downtime_remaining > 0) != (not self.online):
            raise AssertionError(f"host {self.id}: downtime/online mismatch")


@dataclass
class Task:
    id: int
    job_id: int
    cpu_req: float  # MIPS
    ram_req: float  # MB
    disk_req: float  # MB
    bw_req: float  # KB/s
    length: float  # million instructions
    submit_time: float
    progress: float = 0.0
    start_time: Optional[float] = None
    completion_time: Optional[float] = None
    restart_time_total: float = 0.0
    assigned_host: Optional[int] = None
    prev_host: Optional[int] = None
    state: TaskState = TaskState.QUEUED

    @property
    def response_time(self) -> Optional[float]:
        if self.completion_time is None:
            return None
        return self.completion_time - self.submit_time


@dataclass
class Job:
    id: int
    tasks: list[int]
    deadline_driven: bool
    sla_deadline: float  # seconds, relative to arrival
    arrival_time: float = 0.0
    sla_weight: float = 1.0

    def __post_init__(self) -> None:
        if self.sla_deadline <= 0:
            raise ValueError(f"job {self.id}: sla_deadline must be > 0")


@dataclass(frozen=True)
class FleetNorms:
    """Fixed denominators used to map raw host/task quantities into [0, 1]."""

    cpu_cap: float
    ram_cap: float
    disk_cap: float
    bw_cap: float
    cost: float
    power: float
    task_count: float

    @classmethod
    def from_hosts(cls, hosts: list[Host], task_count_max: int = 20) -> "FleetNorms":
        if not hosts:
            raise ValueError("cannot derive fleet norms from an empty host list")
        return cls(
            cpu_cap=max(h.cpu_capacity for h in hosts),
            ram_cap=max(h.ram_capacity for h in hosts),
            disk_cap=max(h.disk_capacity for h in hosts),
            bw_cap=max(h.bw_capacity for h in hosts),
            cost=max(max(h.cost_per_interval for h in hosts), 1e-12),
            power=max(max(h.power_max for h in hosts), 1e-12),
            task_count=float(max(task_count_max, 1)),
        )


@dataclass
class FeatureMatrices:
    """EMA-smoothed host and task feature matrices for one job's window."""

    m_h: np.ndarray  # (n, 12)
    m_t: np.ndarray  # (q_max, 5)

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.m_h.ravel(), self.m_t.ravel()])


@dataclass
class ClusterState:
    """Snapshot of the whole simulated cluster at one instant."""

    hosts: list[Host]
    jobs: dict[int, Job] = field(default_factory=dict)
    tasks: dict[int, Task] = field(default_factory=dict)
    interval_index: int = 0
    interval_length: float = 300.0
    q_max: int = 10
    straggler_ema_per_host: dict[int, float] = field(default_factory=dict)
    norms: Optional[FleetNorms] = None

    def __post_init__(self) -> None:
        if self.interval_length <= 0:
            raise ValueError("interval_length must be > 0")
        if self.norms is None:
            self.norms = FleetNorms.from_hosts(self.hosts)
        for h in self.hosts:
            self.straggler_ema_per_host.setdefault(h.id, 0.0)
        self._host_index = {h.id: i for i, h in enumerate(self.hosts)}

    def host_index(self, host_id: int) -> int:
        return self._host_index[host_id]

    def host_by_id(self, host_id: int) -> Host:
        return self.hosts[self._host_index[host_id]]


def _clip01(x: np.ndarray) -> np.ndarray:
    return np.clip(x, 0.0, 1.0)


def extract_host_features(state: ClusterState) -> np.ndarray:
    """Return the (n, 12) host feature matrix.

    Column order: cpu_util, cpu_cap_norm, ram_util, ram_cap_norm, disk_util,
    disk_cap_norm, bw_util, bw_cap_norm, cost_norm, power_min_norm,
    power_max_norm, task_count_norm. Offline hosts map to all-zero rows so
    they are distinguishable from merely idle ones.
    """
    norms = state.norms
    out = np.zeros((len(state.hosts), HOST_FEATURES), dtype=np.float64)
    for row, h in enumerate(state.hosts):
        if not h.online:
            continue
        out[row] = (
            h.cpu_used / h.cpu_capacity,
            h.cpu_capacity / norms.cpu_cap,
            h.ram_used / h.ram_capacity,
            h.ram_capacity / norms.ram_cap,
            h.disk_used / h.disk_capacity,
            h.disk_capacity / norms.disk_cap,
            h.bw_used / h.bw_capacity,
            h.bw_capacity / norms.bw_cap,
            h.cost_per_interval / norms.cost,
            h.power_min / norms.power,
            h.power_max / norms.power,
            h.active_task_count / norms.task_count,
        )
    return _clip01(out)


def extract_task_features(state: ClusterState, job: Job) -> np.ndarray:
    """Return the (q_max, 5) task feature matrix for one job.

    Column order: cpu_req_norm, ram_req_norm, disk_req_norm, bw_req_norm,
    prev_host_norm. The previous-host column encodes (host index + 1)/(n + 1)
    and 0 when the task has never been assigned. Rows past the job's task
    count stay zero.
    """
    if job.id not in state.jobs:
        raise ValueError(f"unknown job id {job.id}")
    norms = state.norms
    n = len(state.hosts)
    out = np.zeros((state.q_max, TASK_FEATURES), dtype=np.float64)
    for row, task_id in enumerate(job.tasks[: state.q_max]):
        t = state.tasks[task_id]
        prev = 0.0
        if t.prev_host is not None:
            prev = (state.host_index(t.prev_host) + 1) / (n + 1)
        out[row] = (
            t.cpu_req / norms.cpu_cap,
            t.ram_req / norms.ram_cap,
            t.disk_req / norms.disk_cap,
            t.bw_req / norms.bw_cap,
            prev,
        )
    return _clip01(out)


def ema_update(ema_state: Optional[np.ndarray], fresh: np.ndarray, weight: float) -> np.ndarray:
    """Blend a fresh observation into a running exponential moving average.

    ``weight`` applies to the fresh matrix. The first observation (no prior
    state) returns the fresh matrix itself.
    """
    if not 0.0 < weight <= 1.0:
        raise ValueError(f"ema weight must be in (0, 1], got {weight}")
    if ema_state is None:
        return np.array(fresh, dtype=np.float64, copy=True)
    ema_state = np.asarray(ema_state, dtype=np.float64)
    fresh = np.asarray(fresh, dtype=np.float64)
    if ema_state.shape != fresh.shape:
        raise ValueError(f"shape mismatch: {ema_state.shape} vs {fresh.shape}")
    return weight * fresh + (1.0 - weight) * ema_state

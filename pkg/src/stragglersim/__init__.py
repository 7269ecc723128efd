"""Deterministic cloud-cluster simulator with straggler prediction and mitigation.

The package simulates a heterogeneous cluster executing bag-of-tasks jobs,
injects host/task/VM faults, and drives one of several straggler-management
policies. The headline policy pairs a Pareto tail model of task response
times with an encoder + LSTM network that predicts the tail parameters per
job, so mitigation (speculation or re-run) can fire before stragglers are
observable.
"""

__version__ = "0.1.0"

from .core import ClusterState, Host, Job, Task, TaskState
from .pareto import ParetoParams, StragglerEstimate

__all__ = [
    "ClusterState",
    "Host",
    "Job",
    "Task",
    "TaskState",
    "ParetoParams",
    "StragglerEstimate",
    "__version__",
]

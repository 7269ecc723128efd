"""Per-job observation windows, training labels, and the training loop.

A window collects one EMA-smoothed feature snapshot per observation tick
(5 ticks, one per second by default) and advances the LSTM state as it goes.
When the window fills, the head yields the job's (alpha, beta). Labels for
training come from fitting the Pareto MLE to the job's realized response
times once all its tasks finish.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import core, neural, pareto
from .core import ClusterState, Job
from .neural import LstmState, NetworkWeights
from .pareto import ParetoParams

log = logging.getLogger("stragglersim.predictor")

WINDOW_STEPS = 5  # observation duration / observation period


@dataclass
class PredictionWindow:
    job_id: int
    capacity: int = WINDOW_STEPS
    observations: list[np.ndarray] = field(default_factory=list)
    lstm_state: LstmState = field(default_factory=LstmState.zeros)
    ema_hosts: Optional[np.ndarray] = None
    ema_tasks: Optional[np.ndarray] = None

    @property
    def complete(self) -> bool:
        return len(self.observations) >= self.capacity


@dataclass
class TrainingExample:
    example_id: int
    inputs: np.ndarray  # (steps, d_in)
    target: ParetoParams
    task_count: int


class StragglerPredictor:
    """Owns the network plus the live windows, one per in-flight job."""

    def __init__(self, weights: NetworkWeights, ema_weight: float = 0.8,
                 window_steps: int = WINDOW_STEPS):
        self.weights = weights
        self.ema_weight = ema_weight
        self.window_steps = window_steps
        self.windows: dict[int, PredictionWindow] = {}

    def open_window(self, job_id: int) -> PredictionWindow:
        window = PredictionWindow(job_id=job_id, capacity=self.window_steps)
        self.windows[job_id] = window
        return window

    def discard(self, job_id: int) -> None:
        self.windows.pop(job_id, None)

    def observe(self, window: PredictionWindow, state: ClusterState, job: Job) -> PredictionWindow:
        """Capture one smoothed snapshot and advance the LSTM a step."""
        if window.complete:
            raise ValueError(f"window for job {window.job_id} is already complete")
        m_h = core.extract_host_features(state)
        m_t = core.extract_task_features(state, job)
        window.ema_hosts = core.ema_update(window.ema_hosts, m_h, self.ema_weight)
        window.ema_tasks = core.ema_update(window.ema_tasks, m_t, self.ema_weight)
        vec = np.concatenate([window.ema_hosts.ravel(), window.ema_tasks.ravel()])
        window.observations.append(vec)
        lam = neural.encoder_forward(self.weights, vec)
        window.lstm_state, _ = neural.lstm_step(self.weights, window.lstm_state, lam)
        return window

    def predict_params(self, window: PredictionWindow) -> ParetoParams:
        if not window.complete:
            raise ValueError(
                f"window for job {window.job_id} incomplete "
                f"({len(window.observations)}/{window.capacity} observations)"
            )
        params, _ = neural.head_forward(self.weights, window.lstm_state.h[neural.LSTM_LAYERS - 1])
        return params.clamped()


def make_label(response_times: Sequence[float]) -> Optional[ParetoParams]:
    """Fit the job's realized response times; None when the fit is degenerate."""
    try:
        return pareto.fit_mle(list(response_times))
    except ValueError as exc:
        log.debug("label discarded: %s", exc)
        return None


def train(weights: NetworkWeights, dataset: Sequence[TrainingExample], epochs: int,
          lr: float, split: float = 0.8, seed: int = 0):
    """Shuffle, split train/test, run BPTT + Adam per example per epoch.

    Returns (weights, history) where history holds one (train_mse, test_mse)
    pair per epoch; test_mse is None when the test split is empty.
    """
    if not dataset:
        raise ValueError("training dataset is empty")
    if not 0.0 < split < 1.0:
        raise ValueError(f"split must be in (0, 1), got {split}")
    order = list(range(len(dataset)))
    rng = np.random.Generator(np.random.PCG64(seed))
    rng.shuffle(order)
    n_train = max(1, round(split * len(dataset)))
    train_set = [dataset[i] for i in order[:n_train]]
    test_set = [dataset[i] for i in order[n_train:]]

    history: list[tuple[float, Optional[float]]] = []
    for _ in range(epochs):
        for ex in train_set:
            _, grads = neural.backward(weights, ex.inputs, ex.target)
            neural.adam_step(weights, grads, lr)
        train_mse = float(np.mean([neural.loss(weights, ex.inputs, ex.target) for ex in train_set]))
        test_mse = None
        if test_set:
            test_mse = float(np.mean([neural.loss(weights, ex.inputs, ex.target) for ex in test_set]))
        history.append((train_mse, test_mse))
    return weights, history


def split_dataset(dataset: Sequence[TrainingExample], split: float = 0.8, seed: int = 0):
    """The same shuffle + split that `train` applies, for outside analysis."""
    order = list(range(len(dataset)))
    rng = np.random.Generator(np.random.PCG64(seed))
    rng.shuffle(order)
    n_train = max(1, round(split * len(dataset)))
    return [dataset[i] for i in order[:n_train]], [dataset[i] for i in order[n_train:]]


def global_mean_params(examples: Sequence[TrainingExample]) -> ParetoParams:
    """Naive baseline predictor: the mean (alpha, beta) over a set of labels."""
    if not examples:
        raise ValueError("no examples to average")
    alpha = float(np.mean([ex.target.alpha for ex in examples]))
    beta = float(np.mean([ex.target.beta for ex in examples]))
    return ParetoParams(alpha, beta).clamped()


def save_dataset(examples: Sequence[TrainingExample], features_path, labels_path) -> None:
    """Write the flattened window rows plus the sidecar label file."""
    with open(features_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        d = examples[0].inputs.shape[1] if examples else 0
        writer.writerow(["example_id", "step_index"] + [f"f{i}" for i in range(d)])
        for ex in examples:
            for step, vec in enumerate(ex.inputs):
                writer.writerow([ex.example_id, step] + [repr(float(v)) for v in vec])
    with open(labels_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["example_id", "alpha", "beta", "task_count"])
        for ex in examples:
            writer.writerow([ex.example_id, repr(ex.target.alpha), repr(ex.target.beta), ex.task_count])


def load_dataset(features_path, labels_path) -> list[TrainingExample]:
    labels: dict[int, tuple[float, float, int]] = {}
    with open(labels_path, newline="") as fh:
        for row in csv.DictReader(fh):
            labels[int(row["example_id"])] = (
                float(row["alpha"]), float(row["beta"]), int(row["task_count"]),
            )
    rows: dict[int, list[tuple[int, np.ndarray]]] = {}
    with open(features_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        d = len(header) - 2
        for row in reader:
            ex_id, step = int(row[0]), int(row[1])
            vec = np.array([float(v) for v in row[2 : 2 + d]], dtype=np.float64)
            rows.setdefault(ex_id, []).append((step, vec))
    examples = []
    for ex_id in sorted(rows):
        if ex_id not in labels:
            raise ValueError(f"example {ex_id} has features but no label row")
        steps = [vec for _, vec in sorted(rows[ex_id], key=lambda sv: sv[0])]
        alpha, beta, q = labels[ex_id]
        examples.append(TrainingExample(
            example_id=ex_id,
            inputs=np.vstack(steps),
            target=ParetoParams(alpha, beta),
            task_count=q,
        ))
    return examples

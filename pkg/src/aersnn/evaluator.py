"""Label assignment, spike-count classification, metrics, and sweeps.

After unsupervised training each excitatory neuron gets the class it
responded to most strongly: a labeling pass (weights frozen) replays
labeled samples, the per-class mean spike count of each neuron becomes its
response profile, and the argmax is its label (ties to the lowest class
id; all-silent neurons get class 0 and a silence flag). Inference then
scores a sample by the mean spike count of each label group and picks the
argmax, again with ties to the lowest class.

``run_experiment`` is the one train/label/evaluate pipeline shared by the
CLI commands and the hyperparameter sweeps.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from .config import (
    STREAM_EVAL,
    STREAM_INIT,
    STREAM_LABEL,
    STREAM_TRAIN,
    RunConfig,
    derive_seed,
)
from .encoders import Sample, poisson_encode
from .event_engine import EventEngine
from .topology import StateStore, build_network, reset_for_sample

__all__ = [
    "NeuronLabels",
    "Metrics",
    "SweepPoint",
    "ExperimentResult",
    "assign_labels",
    "classify",
    "evaluate",
    "sweep",
    "SWEEPABLE_PARAMS",
    "build_engine",
    "train_pass",
    "run_experiment",
]

log = logging.getLogger(__name__)

SWEEPABLE_PARAMS = ("n_exc", "batch_size", "v_thresh", "timesteps")


@dataclass
class NeuronLabels:
    label: np.ndarray     # (n_exc,) class id per neuron
    response: np.ndarray  # (n_exc, n_classes) mean spike count per class
    silent: np.ndarray    # (n_exc,) True where the neuron never fired

    def to_dict(self) -> dict:
        return {
            "label": self.label.tolist(),
            "response": self.response.tolist(),
            "silent": self.silent.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NeuronLabels":
        return cls(
            label=np.array(data["label"], dtype=np.int64),
            response=np.array(data["response"], dtype=np.float64),
            silent=np.array(data["silent"], dtype=bool),
        )


@dataclass
class Metrics:
    accuracy: float
    confusion: np.ndarray       # (n_classes, n_classes), rows = true class
    per_class_recall: np.ndarray

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "confusion": self.confusion.tolist(),
            "per_class_recall": self.per_class_recall.tolist(),
        }


@dataclass
class SweepPoint:
    param: str
    value: float
    metrics: Metrics
    runtime_s: float


@dataclass
class ExperimentResult:
    store: StateStore
    labels: NeuronLabels
    metrics: Metrics
    engine: EventEngine
    train_stats: dict


def build_engine(cfg: RunConfig, store: StateStore | None = None) -> EventEngine:
    if store is None:
        store = build_network(
            cfg.topology_params(),
            cfg.stdp_params(),
            seed=derive_seed(cfg.seed, STREAM_INIT),
            numeric=cfg.numeric_spec(),
            v_rest=cfg.v_rest,
        )
    return EventEngine(
        store,
        cfg.lif_params(),
        cfg.trace_params(),
        cfg.stdp_params(),
        cfg.topology_params(),
        v_floor=cfg.resolved_v_floor(),
        fifo_capacity=cfg.fifo_capacity,
        accumulate_updates=cfg.batch_size > 1,
        log_activations=cfg.log_activations,
    )


def _sample_counts(engine: EventEngine, sample: Sample, cfg: RunConfig,
                   seed: int) -> np.ndarray:
    reset_for_sample(engine.store)
    packets = poisson_encode(sample, cfg.encoder_params(seed))
    result = engine.run(packets, stop_ts=cfg.timesteps)
    counts = np.zeros(engine.store.n_exc, dtype=np.int64)
    for p in result.outputs:
        counts[p.neuron_id] += 1
    return counts


def train_pass(engine: EventEngine, samples: list[Sample], cfg: RunConfig,
               *, learning: bool = True) -> dict:
    """Stream samples through the engine with online learning, flushing
    accumulated weight deltas every batch_size samples. Returns aggregate
    packet counters."""
    engine.learning = learning
    totals = {"samples": 0, "packets_in": 0, "packets_out": 0}
    for epoch in range(cfg.epochs):
        for idx, sample in enumerate(samples):
            seed = derive_seed(cfg.seed, STREAM_TRAIN, epoch, idx)
            _sample_counts(engine, sample, cfg, seed)
            totals["samples"] += 1
            totals["packets_in"] += engine.stats.packets_in
            totals["packets_out"] += engine.stats.packets_out
            if engine.accumulate_updates and (idx + 1) % cfg.batch_size == 0:
                engine.apply_accumulated_updates()
        if engine.accumulate_updates:
            engine.apply_accumulated_updates()
    return totals


def assign_labels(engine: EventEngine, samples: list[Sample], cfg: RunConfig,
                  n_classes: int) -> NeuronLabels:
    """Frozen-weight labeling pass over a labeled sample set."""
    if not samples:
        raise ValueError("labeling needs at least one sample")
    was_learning = engine.learning
    engine.learning = False
    n_exc = engine.store.n_exc
    sums = np.zeros((n_exc, n_classes), dtype=np.float64)
    class_counts = np.zeros(n_classes, dtype=np.int64)
    try:
        for idx, sample in enumerate(samples):
            seed = derive_seed(cfg.seed, STREAM_LABEL, idx)
            counts = _sample_counts(engine, sample, cfg, seed)
            sums[:, sample.label] += counts
            class_counts[sample.label] += 1
    finally:
        engine.learning = was_learning
    response = np.divide(
        sums,
        np.maximum(class_counts, 1)[None, :],
        dtype=np.float64,
    )
    label = np.argmax(response, axis=1)  # argmax ties resolve to lowest id
    silent = ~response.any(axis=1)
    label[silent] = 0
    n_silent = int(silent.sum())
    if n_silent:
        log.warning("%d of %d neurons never fired during labeling", n_silent, n_exc)
    return NeuronLabels(label=label, response=response, silent=silent)


def classify(counts: np.ndarray, labels: NeuronLabels) -> int:
    """Mean spike count per label group, argmax with ties to the lowest
    class id. Group means (not sums) keep unequal group sizes unbiased."""
    n_classes = labels.response.shape[1]
    scores = np.zeros(n_classes, dtype=np.float64)
    for c in range(n_classes):
        mask = labels.label == c
        if mask.any():
            scores[c] = counts[mask].mean()
    return int(np.argmax(scores))


def evaluate(engine: EventEngine, labels: NeuronLabels, samples: list[Sample],
             cfg: RunConfig) -> Metrics:
    """Frozen-weight evaluation over a test set."""
    if not samples:
        raise ValueError("evaluation needs at least one sample")
    n_classes = labels.response.shape[1]
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    was_learning = engine.learning
    engine.learning = False
    try:
        for idx, sample in enumerate(samples):
            seed = derive_seed(cfg.seed, STREAM_EVAL, idx)
            counts = _sample_counts(engine, sample, cfg, seed)
            predicted = classify(counts, labels)
            confusion[sample.label, predicted] += 1
    finally:
        engine.learning = was_learning
    total = confusion.sum()
    accuracy = float(np.trace(confusion)) / float(total)
    row_sums = confusion.sum(axis=1)
    recall = np.divide(
        np.diag(confusion).astype(np.float64),
        np.maximum(row_sums, 1).astype(np.float64),
    )
    return Metrics(accuracy=accuracy, confusion=confusion, per_class_recall=recall)


def _slice_counted(samples: list[Sample], count: int) -> list[Sample]:
    """-1 keeps the whole split, 0 selects nothing."""
    return samples if count < 0 else samples[:count]


def run_experiment(cfg: RunConfig, train_samples: list[Sample],
                   test_samples: list[Sample],
                   initial_store: StateStore | None = None,
                   *, learning: bool = True) -> ExperimentResult:
    """Train, label on the tail slice of the training set, evaluate."""
    train_slice = _slice_counted(train_samples, cfg.train_samples)
    test_slice = _slice_counted(test_samples, cfg.eval_samples)
    engine = build_engine(cfg, initial_store)
    train_stats = {"samples": 0, "packets_in": 0, "packets_out": 0}
    if train_slice:
        train_stats = train_pass(engine, train_slice, cfg, learning=learning)
    # labeling uses held-out tail samples of the training split, never test data
    label_base = train_slice if train_slice else train_samples
    n_label = max(1, int(round(len(label_base) * cfg.label_fraction)))
    labels = assign_labels(engine, label_base[-n_label:], cfg,
                           cfg.resolved_n_classes())
    metrics = evaluate(engine, labels, test_slice, cfg)
    return ExperimentResult(store=engine.store, labels=labels, metrics=metrics,
                            engine=engine, train_stats=train_stats)


def sweep(param: str, values, cfg: RunConfig, train_samples: list[Sample],
          test_samples: list[Sample]) -> list[SweepPoint]:
    """Train and evaluate once per value of one hyperparameter."""
    if param not in SWEEPABLE_PARAMS:
        raise ValueError(
            f"unknown sweep parameter {param!r}, expected one of {SWEEPABLE_PARAMS}"
        )
    points = []
    for value in values:
        cast = int(value) if param in ("n_exc", "batch_size", "timesteps") else float(value)
        run_cfg = cfg.with_value(param, cast)
        started = time.perf_counter()
        result = run_experiment(run_cfg, train_samples, test_samples)
        elapsed = time.perf_counter() - started
        points.append(
            SweepPoint(param=param, value=float(value), metrics=result.metrics,
                       runtime_s=elapsed)
        )
        log.info("sweep %s=%s -> accuracy %.4f (%.1fs)",
                 param, value, result.metrics.accuracy, elapsed)
    return points

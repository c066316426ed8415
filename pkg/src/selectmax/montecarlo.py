"""Batch Monte Carlo engine for the K-channel select-max experiment.

Stream layout inside a trial: stream 0 draws the source, streams ``1..k`` the
channel outputs and streams ``k+1..2k`` the reception flags. Trials are split
into fixed-size chunks; chunk boundaries do not depend on the worker count and
partial results are merged in chunk order, so every output is a function of
the seed and the configuration only.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .model import (
    ModelParams,
    TrialRecord,
    UniformStream,
    sample_channel_output_array,
    sample_source_array,
)

__all__ = [
    "BatchConfig",
    "BatchSummary",
    "TrialDataset",
    "Moments",
    "simulate_block",
    "run_trial",
    "run_batch",
    "paired_samples_for_independence",
    "write_dataset_csv",
]

CHUNK = 1 << 17


@dataclass(frozen=True)
class BatchConfig:
    params: ModelParams
    n_trials: int
    seed: int = 42
    theta: Optional[float] = None
    record_full: bool = False
    workers: int = 1

    def __post_init__(self):
        if int(self.n_trials) != self.n_trials or self.n_trials < 1:
            raise ValueError(f"n_trials must be a positive integer, got {self.n_trials}")
        if self.theta is not None and not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")


@dataclass
class TrialDataset:
    """Column-oriented store of trial records (one row per trial)."""

    x: np.ndarray
    outputs: np.ndarray  # (n, k)
    estimate: np.ndarray
    error: np.ndarray
    received: Optional[np.ndarray] = None  # (n, k) bool, erasure runs only
    start: int = 0

    def __len__(self) -> int:
        return len(self.x)

    @property
    def k(self) -> int:
        return self.outputs.shape[1]

    def record(self, i: int) -> TrialRecord:
        return TrialRecord(
            x=float(self.x[i]),
            outputs=tuple(float(v) for v in self.outputs[i]),
            estimate=float(self.estimate[i]),
            error=float(self.error[i]),
            received=None if self.received is None else tuple(bool(b) for b in self.received[i]),
        )

    def __iter__(self) -> Iterator[TrialRecord]:
        return (self.record(i) for i in range(len(self)))

    @classmethod
    def concat(cls, parts: list["TrialDataset"]) -> "TrialDataset":
        rec = None if parts[0].received is None else np.concatenate([p.received for p in parts])
        return cls(
            x=np.concatenate([p.x for p in parts]),
            outputs=np.concatenate([p.outputs for p in parts]),
            estimate=np.concatenate([p.estimate for p in parts]),
            error=np.concatenate([p.error for p in parts]),
            received=rec,
            start=parts[0].start,
        )


@dataclass(frozen=True)
class Moments:
    """Count, mean and sum of squared deviations; merged with Chan's update."""

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0

    @classmethod
    def of(cls, values: np.ndarray) -> "Moments":
        if len(values) == 0:
            return cls()
        mean = float(np.mean(values))
        return cls(len(values), mean, float(np.sum((values - mean) ** 2)))

    def merge(self, other: "Moments") -> "Moments":
        if other.n == 0:
            return self
        if self.n == 0:
            return other
        n = self.n + other.n
        d = other.mean - self.mean
        mean = self.mean + d * other.n / n
        m2 = self.m2 + other.m2 + d * d * self.n * other.n / n
        return Moments(n, mean, m2)

    @property
    def variance(self) -> float:
        return self.m2 / (self.n - 1) if self.n > 1 else 0.0


@dataclass
class BatchSummary:
    n: int
    mean_error: float
    var_error: float
    atom_freq_estimate: float
    per_channel_atom_freq: float
    reception_histogram: list[int]
    seed: int
    elapsed: float = 0.0
    params: dict = field(default_factory=dict)
    theta: Optional[float] = None

    @property
    def stderr_error(self) -> float:
        return (self.var_error / self.n) ** 0.5

    @property
    def trials_per_second(self) -> float:
        return self.n / self.elapsed if self.elapsed > 0 else float("inf")

    def as_dict(self, timing: bool = False) -> dict:
        out = {
            "n": self.n,
            "seed": self.seed,
            "params": self.params,
            "theta": self.theta,
            "mean_error": self.mean_error,
            "var_error": self.var_error,
            "atom_freq_estimate": self.atom_freq_estimate,
            "per_channel_atom_freq": self.per_channel_atom_freq,
            "reception_histogram": list(self.reception_histogram),
        }
        if timing:
            out["elapsed"] = self.elapsed
            out["trials_per_second"] = self.trials_per_second
        return out


def simulate_block(params: ModelParams, stream: UniformStream, start: int, stop: int,
                   theta: Optional[float] = None) -> TrialDataset:
    """Simulate trials ``start..stop-1`` in one vectorized pass."""
    k = params.k
    n_streams = 1 + 2 * k if theta is not None else 1 + k
    u = stream.block(start, stop, n_streams)
    x = sample_source_array(params.lam, u[:, 0])
    outputs = sample_channel_output_array(x[:, None], params.delta, u[:, 1:k + 1])
    if theta is None:
        received = None
        estimate = outputs.max(axis=1)
    else:
        # u in (0, 1]: P(u > theta) = 1 - theta, so theta = 1 loses every packet
        received = u[:, k + 1:] > theta
        estimate = np.where(received, outputs, 0.0).max(axis=1)
    return TrialDataset(x=x, outputs=outputs, estimate=estimate, error=x - estimate,
                        received=received, start=start)


def run_trial(params: ModelParams, stream: UniformStream, trial_index: int,
              theta: Optional[float] = None) -> TrialRecord:
    """One trial, bit-identical to row ``trial_index`` of a batch with the same seed."""
    return simulate_block(params, stream, trial_index, trial_index + 1, theta).record(0)


@dataclass
class _Partial:
    moments: Moments
    atoms_estimate: int
    atoms_channel: int
    histogram: np.ndarray
    data: Optional[TrialDataset]


def _run_chunk(config: BatchConfig, stream: UniformStream, start: int, stop: int) -> _Partial:
    p = config.params
    data = simulate_block(p, stream, start, stop, config.theta)
    if data.received is None:
        hist = np.zeros(p.k + 1, dtype=np.int64)
        hist[p.k] = len(data)
    else:
        hist = np.bincount(data.received.sum(axis=1), minlength=p.k + 1).astype(np.int64)
    return _Partial(
        moments=Moments.of(data.error),
        atoms_estimate=int(np.count_nonzero(data.estimate == 0.0)),
        atoms_channel=int(np.count_nonzero(data.outputs == 0.0)),
        histogram=hist,
        data=data if config.record_full else None,
    )


def run_batch(config: BatchConfig) -> tuple[BatchSummary, Optional[TrialDataset]]:
    """Run ``config.n_trials`` trials and return the summary and, when
    ``record_full`` is set, the full dataset."""
    t0 = time.perf_counter()
    stream = UniformStream(config.seed)
    bounds = [(s, min(s + CHUNK, config.n_trials)) for s in range(0, config.n_trials, CHUNK)]
    try:
        if config.workers == 1 or len(bounds) == 1:
            parts = [_run_chunk(config, stream, a, b) for a, b in bounds]
        else:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                parts = list(pool.map(lambda ab: _run_chunk(config, stream, *ab), bounds))
        data = TrialDataset.concat([q.data for q in parts]) if config.record_full else None
    except MemoryError as exc:
        raise MemoryError(
            f"out of memory simulating {config.n_trials} trials with k={config.params.k}"
            f" (record_full={config.record_full}); lower n_trials or disable record_full"
        ) from exc

    moments = Moments()
    hist = np.zeros(config.params.k + 1, dtype=np.int64)
    atoms_est = atoms_ch = 0
    for q in parts:
        moments = moments.merge(q.moments)
        hist += q.histogram
        atoms_est += q.atoms_estimate
        atoms_ch += q.atoms_channel
    n = config.n_trials
    summary = BatchSummary(
        n=n,
        mean_error=moments.mean,
        var_error=moments.variance,
        atom_freq_estimate=atoms_est / n,
        per_channel_atom_freq=atoms_ch / (n * config.params.k),
        reception_histogram=[int(c) for c in hist],
        seed=config.seed,
        elapsed=time.perf_counter() - t0,
        params=config.params.as_dict(),
        theta=config.theta,
    )
    return summary, data


def paired_samples_for_independence(dataset: TrialDataset) -> dict[str, np.ndarray]:
    """Project a dataset onto the columns used by the independence tests.

    ``second_max`` is the largest output among the channels other than the
    argmax channel (0 when ``k == 1``). Erasure masks are ignored.
    """
    out = dataset.outputs
    if dataset.k == 1:
        second = np.zeros(len(dataset))
    else:
        second = np.partition(out, -2, axis=1)[:, -2]
    return {
        "estimate": dataset.estimate,
        "error": dataset.error,
        "second_max": second,
        "outputs": out,
    }


def write_dataset_csv(dataset: TrialDataset, path) -> None:
    """Spill a dataset as CSV with shortest round-trip float formatting."""
    k = dataset.k
    header = ["trial_index", "x", *(f"y_{i + 1}" for i in range(k))]
    if dataset.received is not None:
        header += [f"mask_{i + 1}" for i in range(k)]
    header += ["estimate", "error"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(len(dataset)):
            row = [dataset.start + i, repr(float(dataset.x[i]))]
            row += [repr(float(v)) for v in dataset.outputs[i]]
            if dataset.received is not None:
                row += [int(b) for b in dataset.received[i]]
            row += [repr(float(dataset.estimate[i])), repr(float(dataset.error[i]))]
            w.writerow(row)

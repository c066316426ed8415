"""Parameters, reproducible uniforms and inverse-transform samplers.

The forward test channel of the one-sided exponential source has the
conditional CDF ``F(y | x) = exp(delta * (y - x))`` on ``[0, x]``, so it puts
an atom of mass ``exp(-delta * x)`` at ``y = 0``. The samplers below realize
that atom exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

__all__ = [
    "ModelParams",
    "TrialRecord",
    "UniformStream",
    "make_params",
    "sample_source",
    "sample_channel_output",
    "sample_source_array",
    "sample_channel_output_array",
    "select_max",
]

_LANES = 4  # 64-bit words produced per Philox counter value
_U53 = 2.0 ** -53


@dataclass(frozen=True)
class ModelParams:
    """Source rate, per-channel distortion and channel count.

    ``delta`` is derived as ``1/d - lambda`` and is stored, not recomputed, so
    every consumer sees the same float.
    """

    lam: float
    d: float
    k: int
    delta: float

    @property
    def combined_rate(self) -> float:
        """Rate of the select-max error law, ``lambda + k * delta``."""
        return self.lam + self.k * self.delta

    def with_k(self, k: int) -> "ModelParams":
        return make_params(self.lam, self.d, k)

    def as_dict(self) -> dict:
        return {"lambda": self.lam, "d": self.d, "k": self.k, "delta": self.delta}


def make_params(lam: float, d: float, k: int) -> ModelParams:
    """Validate ``(lambda, d, k)`` and derive ``delta = 1/d - lambda``."""
    lam = float(lam)
    d = float(d)
    if not (lam > 0.0) or not math.isfinite(lam):
        raise ValueError(f"lambda must be a positive finite number, got {lam!r}")
    if not (d > 0.0) or not math.isfinite(d):
        raise ValueError(f"distortion d must be positive, got {d!r}")
    if isinstance(k, bool) or int(k) != k:
        raise ValueError(f"channel count k must be an integer, got {k!r}")
    k = int(k)
    if k < 1:
        raise ValueError(f"channel count k must be >= 1, got {k}")
    delta = 1.0 / d - lam
    if delta < 0.0:
        raise ValueError(f"distortion d={d!r} exceeds 1/lambda={1.0 / lam!r}")
    return ModelParams(lam=lam, d=d, k=k, delta=delta)


@dataclass(frozen=True)
class TrialRecord:
    x: float
    outputs: tuple[float, ...]
    estimate: float
    error: float
    received: Optional[tuple[bool, ...]] = None

    @property
    def k(self) -> int:
        return len(self.outputs)


class UniformStream:
    """Counter-based source of uniform(0, 1] variates.

    A variate is addressed by ``(trial, stream)``. It is a pure function of the
    seed and the address, built on the Philox4x64 block cipher: trial ``t`` and
    stream ``s`` map to lane ``s % 4`` of the block at counter ``(t, s // 4)``.
    Any partition of the trial range therefore reproduces the same numbers.
    """

    def __init__(self, seed: int):
        seed = int(seed)
        if seed < 0 or seed >= 2**64:
            raise ValueError(f"seed must fit in an unsigned 64-bit integer, got {seed}")
        self.seed = seed

    def __repr__(self) -> str:
        return f"UniformStream(seed={self.seed})"

    def _raw_group(self, start: int, stop: int, group: int) -> np.ndarray:
        bitgen = np.random.Philox(key=self.seed, counter=[start, group, 0, 0])
        return bitgen.random_raw(_LANES * (stop - start)).reshape(stop - start, _LANES)

    def block(self, start: int, stop: int, n_streams: int) -> np.ndarray:
        """Uniforms for trials ``start..stop-1`` and streams ``0..n_streams-1``.

        Returns an array of shape ``(stop - start, n_streams)``.
        """
        if start < 0 or stop < start:
            raise ValueError(f"bad trial range [{start}, {stop})")
        n_groups = -(-n_streams // _LANES)
        raw = np.concatenate(
            [self._raw_group(start, stop, g) for g in range(n_groups)], axis=1
        )[:, :n_streams]
        # top 53 bits, shifted by one ulp so that 0 is excluded and 1 included
        return ((raw >> np.uint64(11)).astype(np.float64) + 1.0) * _U53

    def uniform(self, trial: int, stream: int) -> float:
        return float(self.block(trial, trial + 1, stream + 1)[0, stream])


def sample_source(lam: float, u: float) -> float:
    """Inverse-CDF draw ``-ln(u)/lambda`` from Exp(lambda)."""
    return -math.log(u) / lam


def sample_channel_output(x: float, delta: float, u: float) -> float:
    """Inverse-CDF draw from the forward channel given the source value ``x``."""
    if delta == 0.0 or u <= math.exp(-delta * x):
        return 0.0
    return min(x, max(0.0, x + math.log(u) / delta))


def sample_source_array(lam: float, u: np.ndarray) -> np.ndarray:
    return -np.log(u) / lam


def sample_channel_output_array(x: np.ndarray, delta: float, u: np.ndarray) -> np.ndarray:
    """Vectorized :func:`sample_channel_output`; ``x`` broadcasts against ``u``."""
    x = np.broadcast_to(x, np.shape(u))
    if delta == 0.0:
        return np.zeros(np.shape(u))
    atom = u <= np.exp(-delta * x)
    with np.errstate(over="ignore"):  # tiny delta: those draws land in the atom anyway
        y = np.clip(x + np.log(u) / delta, 0.0, x)
    y[atom] = 0.0
    return y


def select_max(outputs: Iterable[float]) -> float:
    """Largest output, or 0 when nothing was received."""
    return float(max(outputs, default=0.0))

"""Closed-form laws for the select-max estimator and its erasure variant.

Everything here is deterministic and vectorized over ``z``; these functions
are the oracles the Monte Carlo engine is checked against.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .model import ModelParams

__all__ = [
    "AnalyticLaw",
    "ErasureWeighting",
    "Weighting",
    "rdf",
    "combined_distortion",
    "exponential_law",
    "error_law",
    "output_marginal",
    "forward_cdf",
    "selectmax_forward_cdf",
    "selectmax_output_atom",
    "erasure_weights",
    "erasure_ccdf_sum",
    "erasure_ccdf_closed",
    "erasure_ccdf_printed",
    "erasure_error_pdf",
    "erasure_law",
]

ArrayFn = Callable[[np.ndarray], np.ndarray]

SINGULAR_TOL = 1e-14


@dataclass(frozen=True)
class AnalyticLaw:
    """A univariate law on ``[0, inf)``, optionally with an atom at zero.

    ``pdf`` is the density of the continuous part only. ``cdf`` and ``ccdf``
    are supplied separately so neither is formed as ``1 - other``.
    """

    name: str
    pdf: ArrayFn
    cdf: ArrayFn
    ccdf: ArrayFn
    mean: float
    atom_at_zero: float = 0.0
    params: dict = field(default_factory=dict)


def _z(z) -> np.ndarray:
    return np.asarray(z, dtype=np.float64)


def _as_scalar(out: np.ndarray, z):
    return float(out) if np.ndim(z) == 0 else out


def rdf(lam: float, d: float, base: float = math.e) -> float:
    """Rate-distortion function ``-log(lambda d)`` of the one-sided exponential
    source, clipped to zero for ``d >= 1/lambda``. Nats unless ``base`` is given."""
    if lam <= 0 or d <= 0:
        raise ValueError("lambda and d must be positive")
    if lam * d >= 1.0:
        return 0.0
    r = -math.log(lam * d)
    return r if base == math.e else r / math.log(base)


def combined_distortion(params: ModelParams) -> float:
    """Distortion ``D_K = 1 / (lambda + K delta)`` of the select-max estimate."""
    return 1.0 / params.combined_rate


def exponential_law(rate: float, name: str = "exponential") -> AnalyticLaw:
    if rate <= 0:
        raise ValueError(f"rate must be positive, got {rate}")

    def pdf(z):
        zz = _z(z)
        return _as_scalar(np.where(zz >= 0, rate * np.exp(-rate * np.maximum(zz, 0)), 0.0), z)

    def cdf(z):
        zz = _z(z)
        return _as_scalar(-np.expm1(-rate * np.maximum(zz, 0.0)), z)

    def ccdf(z):
        zz = _z(z)
        return _as_scalar(np.exp(-rate * np.maximum(zz, 0.0)), z)

    return AnalyticLaw(name, pdf, cdf, ccdf, mean=1.0 / rate, params={"rate": rate})


def error_law(params: ModelParams) -> AnalyticLaw:
    """Law of the select-max error ``X - max(Y_1..Y_K)``: Exp(lambda + K delta)."""
    law = exponential_law(params.combined_rate, name="selectmax_error")
    return AnalyticLaw(
        law.name, law.pdf, law.cdf, law.ccdf, law.mean, 0.0,
        params={**params.as_dict(), "rate": params.combined_rate},
    )


def output_marginal(params: ModelParams) -> AnalyticLaw:
    """Marginal of a single channel output: atom ``lambda d`` at zero plus
    ``(1 - lambda d) lambda exp(-lambda y)`` on ``y > 0``."""
    lam = params.lam
    atom = lam * params.d
    cont = 1.0 - atom

    def pdf(y):
        yy = _z(y)
        return _as_scalar(np.where(yy > 0, cont * lam * np.exp(-lam * np.maximum(yy, 0)), 0.0), y)

    def cdf(y):
        yy = _z(y)
        out = np.where(yy >= 0, atom - cont * np.expm1(-lam * np.maximum(yy, 0)), 0.0)
        return _as_scalar(out, y)

    def ccdf(y):
        yy = _z(y)
        return _as_scalar(np.where(yy >= 0, cont * np.exp(-lam * np.maximum(yy, 0)), 1.0), y)

    return AnalyticLaw("channel_output", pdf, cdf, ccdf, mean=cont / lam,
                       atom_at_zero=atom, params=params.as_dict())


def forward_cdf(y, x, delta: float):
    """Single-channel conditional CDF ``P(Y <= y | X = x)``."""
    y, x = np.broadcast_arrays(_z(y), _z(x))
    out = np.where(y >= x, 1.0, np.exp(delta * np.minimum(y - x, 0.0)))
    out = np.where(y < 0, 0.0, out)
    return float(out) if out.ndim == 0 else out


def selectmax_forward_cdf(y, x, delta: float, k: int):
    """``P(max(Y_1..Y_K) <= y | X = x)``: the single-channel form with
    ``delta`` replaced by ``k * delta``."""
    return forward_cdf(y, x, k * delta)


def selectmax_output_atom(params: ModelParams) -> float:
    """Predicted ``P(max Y = 0) = lambda / (lambda + K delta)``."""
    return params.lam * combined_distortion(params)


class Weighting(str, Enum):
    BINOMIAL = "binomial"
    PAPER_LITERAL = "paper_literal"

    @classmethod
    def parse(cls, value) -> "Weighting":
        if isinstance(value, cls):
            return value
        return cls(str(value).replace("-", "_"))


@dataclass(frozen=True)
class ErasureWeighting:
    """Weights over the number ``l`` of received descriptions.

    ``binomial`` is the reception-count law of i.i.d. losses. ``paper_literal``
    drops the binomial coefficient and does not sum to one for ``k >= 2``.
    """

    theta: float
    k: int
    mode: Weighting = Weighting.BINOMIAL

    def __post_init__(self):
        object.__setattr__(self, "mode", Weighting.parse(self.mode))
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")

    def weights(self) -> np.ndarray:
        return erasure_weights(self.theta, self.k, self.mode)

    @property
    def total(self) -> float:
        return float(self.weights().sum())


def erasure_weights(theta: float, k: int, mode=Weighting.BINOMIAL) -> np.ndarray:
    mode = Weighting.parse(mode)
    ell = np.arange(k + 1)
    # 0.0 ** 0 == 1.0 keeps the theta in {0, 1} endpoints exact
    w = np.array([theta ** (k - i) * (1.0 - theta) ** i for i in ell])
    if mode is Weighting.BINOMIAL:
        w = w * np.array([math.comb(k, int(i)) for i in ell], dtype=np.float64)
    return w


def _rates(params: ModelParams) -> np.ndarray:
    return params.lam + np.arange(params.k + 1) * params.delta


def _weighting(params: ModelParams, weighting) -> ErasureWeighting:
    if not isinstance(weighting, ErasureWeighting):
        raise TypeError("weighting must be an ErasureWeighting")
    if weighting.k != params.k:
        raise ValueError(f"weighting.k={weighting.k} differs from params.k={params.k}")
    return weighting


def erasure_ccdf_sum(z, params: ModelParams, weighting: ErasureWeighting):
    """``sum_l w_l exp(-(lambda + l delta) z)`` over ``l = 0..K``."""
    w = _weighting(params, weighting).weights()
    zz = _z(z)
    terms = w * np.exp(-np.multiply.outer(np.maximum(zz, 0.0), _rates(params)))
    return _as_scalar(terms.sum(axis=-1), z)


def erasure_error_pdf(z, params: ModelParams, weighting: ErasureWeighting):
    """Term-wise derivative of ``-erasure_ccdf_sum``; hyperexponential in
    binomial mode."""
    w = _weighting(params, weighting).weights()
    rates = _rates(params)
    zz = _z(z)
    terms = w * rates * np.exp(-np.multiply.outer(np.maximum(zz, 0.0), rates))
    out = np.where(zz >= 0, terms.sum(axis=-1), 0.0)
    return _as_scalar(out, z)


def _closed_scalar(z: float, lam: float, delta: float, k: int, theta: float) -> float:
    r = (1.0 - theta) * math.exp(-delta * z)
    den = theta - r
    if abs(den) < SINGULAR_TOL:
        raise ZeroDivisionError("closed form is singular: theta == (1-theta) exp(-delta z)")
    num = theta ** (k + 1) - (1.0 - theta) ** (k + 1) * math.exp(-delta * (k + 1) * z)
    return math.exp(-lam * z) * num / den


def erasure_ccdf_closed(z, params: ModelParams, theta: float):
    """Geometric-series closed form of the paper-literal erasure CCDF.

    ``exp(-lambda z) (theta^(K+1) - (1-theta)^(K+1) exp(-delta (K+1) z))
    / (theta - (1-theta) exp(-delta z))``. Where the denominator vanishes the
    singularity is removable; the sum is returned instead, with a warning.
    """
    if not 0.0 < theta < 1.0:
        raise ValueError(f"closed form needs theta in (0, 1), got {theta}")
    zz = np.atleast_1d(_z(z))
    out = np.empty_like(zz)
    fallback = ErasureWeighting(theta, params.k, Weighting.PAPER_LITERAL)
    for i, zi in enumerate(zz):
        try:
            out[i] = _closed_scalar(float(zi), params.lam, params.delta, params.k, theta)
        except ZeroDivisionError:
            warnings.warn(
                f"removable singularity at z={zi}; using the series instead",
                RuntimeWarning, stacklevel=2,
            )
            out[i] = erasure_ccdf_sum(float(zi), params, fallback)
    return float(out[0]) if np.ndim(z) == 0 else out


def erasure_ccdf_printed(z, params: ModelParams, theta: float):
    """The closed form exactly as printed in the source derivation:

    ``(exp(z(delta - lambda)) theta^(K+1) - exp(z(delta K + lambda)) (1-theta)^(K+1))
    / (1 - theta (1 + exp(delta z)))``

    Kept only so its disagreement with the series can be reported.
    """
    zz = _z(z)
    lam, delta, k = params.lam, params.delta, params.k
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        num = (np.exp(zz * (delta - lam)) * theta ** (k + 1)
               - np.exp(zz * (delta * k + lam)) * (1.0 - theta) ** (k + 1))
        out = num / (1.0 - theta * (1.0 + np.exp(delta * zz)))
    return _as_scalar(out, z)


def erasure_law(params: ModelParams, weighting: ErasureWeighting) -> AnalyticLaw:
    """Error law under random erasures as an :class:`AnalyticLaw`.

    In paper-literal mode ``cdf`` is ``total - ccdf`` so that it still starts
    at zero; the law is then not normalized.
    """
    weighting = _weighting(params, weighting)
    w = weighting.weights()
    rates = _rates(params)
    total = float(w.sum())

    def ccdf(z):
        return erasure_ccdf_sum(z, params, weighting)

    def cdf(z):
        zz = _z(z)
        terms = -w * np.expm1(-np.multiply.outer(np.maximum(zz, 0.0), rates))
        return _as_scalar(terms.sum(axis=-1), z)

    def pdf(z):
        return erasure_error_pdf(z, params, weighting)

    mean = float(np.sum(w / rates))
    return AnalyticLaw(
        f"erasure_error[{weighting.mode.value}]", pdf, cdf, ccdf, mean, 0.0,
        params={**params.as_dict(), "theta": weighting.theta,
                "weighting": weighting.mode.value, "total_mass": total},
    )

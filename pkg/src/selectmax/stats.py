"""Empirical CDFs and the hypothesis tests used to check simulations
against the analytic laws.

P-values come from the asymptotic Kolmogorov distribution. None of the tests
draw random numbers, so results depend on the data and arguments only.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats as sps

from .analytic import AnalyticLaw

__all__ = [
    "EmpiricalCdf",
    "KsResult",
    "IndependenceResult",
    "kolmogorov_sf",
    "ks_statistic",
    "ks_against",
    "ks_two_sample",
    "test_orthogonality",
    "test_sufficiency",
    "atom_frequency",
    "MIN_BIN",
]

MIN_BIN = 50
_SERIES_TERMS = 100


class EmpiricalCdf:
    """Right-continuous step function ``#(samples <= z) / n``."""

    def __init__(self, samples):
        self.samples = np.sort(np.asarray(samples, dtype=np.float64).ravel())
        self.n = len(self.samples)
        if self.n == 0:
            raise ValueError("empty sample")

    def __call__(self, z):
        out = np.searchsorted(self.samples, z, side="right") / self.n
        return float(out) if np.ndim(z) == 0 else out

    def ccdf(self, z):
        out = (self.n - np.searchsorted(self.samples, z, side="right")) / self.n
        return float(out) if np.ndim(z) == 0 else out


def kolmogorov_sf(t: float) -> float:
    """``P(K > t)`` for the Kolmogorov distribution, ``K = lim sqrt(n) D_n``.

    Uses the alternating series for ``t >= 1`` and the Jacobi theta form
    below, each truncated at 100 terms.
    """
    if t <= 0.0:
        return 1.0
    k = np.arange(1, _SERIES_TERMS + 1, dtype=np.float64)
    if t >= 1.0:
        p = 2.0 * np.sum((-1.0) ** (k - 1) * np.exp(-2.0 * k * k * t * t))
    else:
        cdf = math.sqrt(2.0 * math.pi) / t * np.sum(
            np.exp(-((2.0 * k - 1.0) ** 2) * math.pi ** 2 / (8.0 * t * t)))
        p = 1.0 - cdf
    return float(min(1.0, max(0.0, p)))


def ks_statistic(sorted_samples: np.ndarray, cdf_values: np.ndarray) -> float:
    """``sup |F_n - F|`` for sorted samples and the model CDF at those samples."""
    n = len(sorted_samples)
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - cdf_values)
    d_minus = np.max(cdf_values - (i - 1) / n)
    return float(min(1.0, max(d_plus, d_minus, 0.0)))


@dataclass(frozen=True)
class KsResult:
    statistic: float
    n: int
    p_value: float
    alpha: float
    passed: bool
    excluded_atoms: int = 0

    def as_dict(self) -> dict:
        return {"statistic": self.statistic, "n": self.n, "p_value": self.p_value,
                "alpha": self.alpha, "pass": self.passed,
                "excluded_atoms": self.excluded_atoms}


def ks_against(law: AnalyticLaw, samples, alpha: float = 0.01) -> KsResult:
    """One-sample KS test of ``samples`` against ``law``.

    If the law has an atom at zero, exact zeros are dropped and the remaining
    samples are tested against the continuous part renormalized to one.
    """
    x = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    excluded = 0
    if law.atom_at_zero > 0.0:
        keep = x != 0.0
        excluded = int(len(x) - keep.sum())
        x = x[keep]
        a = law.atom_at_zero
        cdf = (law.cdf(x) - a) / (1.0 - a)
    else:
        cdf = law.cdf(x)
    n = len(x)
    if n < 100:
        raise ValueError(f"KS test needs at least 100 samples, got {n}")
    d = ks_statistic(x, np.asarray(cdf))
    p = kolmogorov_sf(math.sqrt(n) * d)
    return KsResult(d, n, p, alpha, p >= alpha, excluded)


def ks_two_sample(a, b) -> tuple[float, float]:
    """Two-sample KS statistic and asymptotic p-value."""
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    n, m = len(a), len(b)
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / n
    fb = np.searchsorted(b, grid, side="right") / m
    d = float(np.max(np.abs(fa - fb)))
    return d, kolmogorov_sf(d * math.sqrt(n * m / (n + m)))


@dataclass
class IndependenceResult:
    kind: str
    statistic: float
    p_value: float  # Bonferroni-adjusted, min(1, m * min p)
    alpha: float
    passed: bool
    n_tests: int
    conditioning: dict = field(default_factory=dict)
    components: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"kind": self.kind, "statistic": self.statistic, "p_value": self.p_value,
                "alpha": self.alpha, "pass": self.passed, "n_tests": self.n_tests,
                "conditioning": self.conditioning, "components": self.components,
                "notes": self.notes}


def _quantile_edges(values: np.ndarray, bins: int) -> np.ndarray:
    edges = np.quantile(values, np.linspace(0.0, 1.0, bins + 1))
    edges[0], edges[-1] = -np.inf, np.inf
    return edges


def _bin_estimates(est: np.ndarray, bins: int) -> tuple[np.ndarray, dict, list]:
    """Label ``est`` with bin ids; the atom at 0 gets bin 0 when present.

    An atom with fewer than ``MIN_BIN`` members is folded into the lowest
    quantile bin; after that the bin count is reduced until every bin has at
    least ``MIN_BIN`` members.
    """
    notes = []
    atom = est == 0.0
    n_atom = int(atom.sum())
    has_atom = n_atom > 0
    if has_atom and n_atom < MIN_BIN:
        notes.append(f"atom bin has {n_atom} < {MIN_BIN} samples; merged into lowest bin")
        has_atom = False
        atom = np.zeros_like(atom)
    while True:
        n_cont = bins - 1 if has_atom else bins
        labels = np.zeros(len(est), dtype=np.int64)
        pos = ~atom
        edges = []
        if n_cont >= 1 and pos.any():
            edges = _quantile_edges(est[pos], n_cont)
            labels[pos] = np.searchsorted(edges, est[pos], side="right") - 1 + int(has_atom)
        counts = np.bincount(labels, minlength=bins)
        if counts.min() >= MIN_BIN or bins <= 2:
            break
        notes.append(f"bin with {int(counts.min())} < {MIN_BIN} samples; widened to {bins - 1} bins")
        bins -= 1
    if counts.min() < MIN_BIN:
        raise ValueError(f"insufficient bin occupancy: {counts.tolist()}")
    desc = {"bins": bins, "atom_bin": has_atom,
            "edges": [float(e) for e in np.asarray(edges)[1:-1]], "counts": counts.tolist()}
    return labels, desc, notes


def _bonferroni(pvals: list[float]) -> float:
    return float(min(1.0, len(pvals) * min(pvals)))


def test_orthogonality(estimate, error, bins: int = 8, alpha: float = 0.01) -> IndependenceResult:
    """Check that the error is independent of the select-max estimate.

    The estimate is cut into quantile bins (zero gets its own bin) and the
    error populations of every pair of bins are compared by two-sample KS. A
    chi-square test on the (estimate bin, error quantile bin) table joins the
    same Bonferroni family.
    """
    est = np.asarray(estimate, dtype=np.float64)
    err = np.asarray(error, dtype=np.float64)
    if bins < 2:
        raise ValueError("bins must be >= 2")
    if len(est) < 10_000:
        raise ValueError(f"orthogonality test needs >= 10^4 pairs, got {len(est)}")
    labels, desc, notes = _bin_estimates(est, bins)
    nb = desc["bins"]
    groups = [err[labels == b] for b in range(nb)]

    components, pvals = [], []
    for i, j in itertools.combinations(range(nb), 2):
        d, p = ks_two_sample(groups[i], groups[j])
        components.append({"test": "two_sample_ks", "bins": [i, j], "statistic": d, "p_value": p})
        pvals.append(p)

    err_edges = _quantile_edges(err, nb)
    err_labels = np.searchsorted(err_edges, err, side="right") - 1
    table = np.zeros((nb, nb), dtype=np.int64)
    np.add.at(table, (labels, err_labels), 1)
    chi2, p_chi, dof, _ = sps.chi2_contingency(table, correction=False)
    components.append({"test": "chi_square_contingency", "statistic": float(chi2),
                       "dof": int(dof), "p_value": float(p_chi)})
    pvals.append(float(p_chi))

    p_adj = _bonferroni(pvals)
    return IndependenceResult(
        kind="two_sample_ks+chi_square_contingency",
        statistic=max(c["statistic"] for c in components[:-1]),
        p_value=p_adj, alpha=alpha, passed=p_adj >= alpha, n_tests=len(pvals),
        conditioning={"estimate_bins": desc, "error_bins": nb}, components=components,
        notes=notes,
    )


def test_sufficiency(estimate, second_max, error, bins: int = 8,
                     alpha: float = 0.01, min_tuples: int = 100_000) -> IndependenceResult:
    """Check that, given the estimate, the error carries no information about
    the runner-up output.

    Within each quantile bin of the positive estimates the tuples are split at
    the bin's median ``second_max`` (``<=`` versus ``>``) and the two error
    populations are compared by two-sample KS. Bins where a side has fewer than
    ``MIN_BIN`` tuples are reported as degenerate and skipped.
    """
    est = np.asarray(estimate, dtype=np.float64)
    sec = np.asarray(second_max, dtype=np.float64)
    err = np.asarray(error, dtype=np.float64)
    if bins < 1:
        raise ValueError("bins must be >= 1")
    if len(est) < min_tuples:
        raise ValueError(f"sufficiency test needs >= {min_tuples} tuples, got {len(est)}")
    pos = est > 0.0
    edges = _quantile_edges(est[pos], bins)
    labels = np.searchsorted(edges, est[pos], side="right") - 1
    s_pos, e_pos = sec[pos], err[pos]

    components, pvals, notes = [], [], []
    for b in range(bins):
        sel = labels == b
        s, e = s_pos[sel], e_pos[sel]
        med = float(np.median(s)) if len(s) else 0.0
        lo, hi = e[s <= med], e[s > med]
        if min(len(lo), len(hi)) < MIN_BIN:
            notes.append(f"bin {b} degenerate: split sizes {len(lo)}/{len(hi)}")
            continue
        d, p = ks_two_sample(lo, hi)
        components.append({"test": "two_sample_ks", "bin": b, "median_second_max": med,
                           "sizes": [len(lo), len(hi)], "statistic": d, "p_value": p})
        pvals.append(p)
    if not pvals:
        raise ValueError("every estimate bin was degenerate")
    p_adj = _bonferroni(pvals)
    return IndependenceResult(
        kind="two_sample_ks",
        statistic=max(c["statistic"] for c in components),
        p_value=p_adj, alpha=alpha, passed=p_adj >= alpha, n_tests=len(pvals),
        conditioning={"estimate_bins": bins, "edges": [float(x) for x in edges[1:-1]],
                      "split": "second_max <= bin median", "atom_excluded": int((~pos).sum())},
        components=components, notes=notes,
    )


def atom_frequency(samples, value: float = 0.0) -> tuple[float, float]:
    """Fraction of samples exactly equal to ``value`` and its binomial s.e."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    n = len(x)
    if n < 100:
        raise ValueError(f"atom frequency needs at least 100 samples, got {n}")
    p = float(np.count_nonzero(x == value)) / n
    return p, math.sqrt(p * (1.0 - p) / n)


# keep pytest from collecting these when imported into a test module
test_orthogonality.__test__ = False
test_sufficiency.__test__ = False

"""Two-sample permutation testing on feature matrices.

The global test is a direction-projection permutation test: project all
rows onto the mean-difference direction and compare the projected group
means.  Per-feature partial tests use the pooled two-sample t statistic.
Both share one permutation scheme so their label reshuffles match:
permutation ``h`` draws from an independent stream derived from the
user seed with spawn key ``(h,)``.  P-values are the standard
add-one permutation estimates, so they live in [1/(N+1), 1] and the
tests are exact regardless of N.

Permutations are embarrassingly parallel; set the environment variable
``ETREP_THREADS`` to run them on a thread pool.  Each permutation owns
its output row and its own seeded stream, so results are byte-identical
for any thread count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np


@dataclass(eq=False)
class FeatureMatrix:
    """Rows of feature vectors with column names."""

    values: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError(f"values must be 2-D, got shape {self.values.shape}")
        self.feature_names = tuple(self.feature_names)
        if len(self.feature_names) != self.values.shape[1]:
            raise ValueError(
                f"{len(self.feature_names)} names for {self.values.shape[1]} columns"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature values must be finite")


def thread_count() -> int:
    """Worker count for permutation loops, from ``ETREP_THREADS`` (default 1)."""
    raw = os.environ.get("ETREP_THREADS", "").strip()
    if not raw:
        return 1
    count = int(raw)
    if count < 1:
        raise ValueError(f"ETREP_THREADS must be a positive integer, got {raw!r}")
    return count


def permutation_pvalue(observed: float, permuted) -> float:
    """Add-one two-sided permutation p-value.

    Counts permuted statistics at least as extreme (in absolute value)
    as the observed one: ``(1 + #{|t_h| >= |t_obs|}) / (N + 1)``.
    """
    permuted = np.asarray(permuted, dtype=float)
    if permuted.ndim != 1 or permuted.size == 0:
        raise ValueError("need a non-empty 1-D array of permuted statistics")
    count = int(np.sum(np.abs(permuted) >= abs(observed)))
    return (1 + count) / (permuted.size + 1)


def _rng_for_permutation(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def _permuted_statistics(pooled: np.ndarray, size_a: int, n_permutations: int,
                         seed: int, statistic, width: int) -> np.ndarray:
    """Statistics under label reshuffling, one row per permutation.

    ``statistic`` maps two row blocks to ``width`` numbers.  Each
    permutation writes only its own row, so the thread pool (sized by
    ``ETREP_THREADS``) never affects the result.
    """
    out = np.empty((n_permutations, width))

    def one(h: int) -> None:
        rng = _rng_for_permutation(seed, h)
        order = rng.permutation(pooled.shape[0])
        out[h] = statistic(pooled[order[:size_a]], pooled[order[size_a:]])

    workers = thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(one, range(n_permutations)))
    else:
        for h in range(n_permutations):
            one(h)
    return out


def _projection_gap(rows_a: np.ndarray, rows_b: np.ndarray) -> float:
    """Difference of projected group means along the mean-difference direction.

    The direction is recomputed from the given grouping, so each
    permutation gets its own direction.  Equals the squared norm of the
    mean difference.
    """
    direction = rows_a.mean(axis=0) - rows_b.mean(axis=0)
    return float((rows_a @ direction).mean() - (rows_b @ direction).mean())


def _pooled_t(rows_a: np.ndarray, rows_b: np.ndarray) -> np.ndarray:
    """Column-wise pooled two-sample t statistics.

    Zero pooled spread is resolved by the limit: 0 when the group means
    also agree (the test carries no information), +/-inf otherwise.
    """
    m1, m2 = rows_a.shape[0], rows_b.shape[0]
    diff = rows_a.mean(axis=0) - rows_b.mean(axis=0)
    pooled_var = (
        (m1 - 1) * rows_a.var(axis=0, ddof=1) + (m2 - 1) * rows_b.var(axis=0, ddof=1)
    ) / (m1 + m2 - 2)
    denom = np.sqrt(pooled_var * (1.0 / m1 + 1.0 / m2))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = diff / denom
        fallback = np.where(diff == 0.0, 0.0, np.sign(diff) * np.inf)
    return np.where(denom == 0.0, fallback, t)


def _check_groups(rows_a: np.ndarray, rows_b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(rows_a, dtype=float)
    b = np.asarray(rows_b, dtype=float)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("groups must be 2-D row matrices")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"feature widths differ: {a.shape[1]} vs {b.shape[1]}")
    if a.shape[0] < 2 or b.shape[0] < 2:
        raise ValueError("each group needs at least two rows")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("feature values must be finite")
    return a, b


@dataclass(eq=False)
class GlobalTestResult:
    statistic: float
    p_value: float
    n_permutations: int


def direction_projection_test(rows_a, rows_b, n_permutations: int = 10_000,
                              seed: int = 0) -> GlobalTestResult:
    """Global two-sample permutation test via mean-difference projection."""
    a, b = _check_groups(rows_a, rows_b)
    if n_permutations < 1:
        raise ValueError("need at least one permutation")
    observed = _projection_gap(a, b)
    pooled = np.concatenate([a, b], axis=0)
    permuted = _permuted_statistics(
        pooled, a.shape[0], n_permutations, seed, lambda x, y: _projection_gap(x, y), 1
    )[:, 0]
    return GlobalTestResult(
        statistic=observed,
        p_value=permutation_pvalue(observed, permuted),
        n_permutations=n_permutations,
    )


@dataclass(eq=False)
class PartialTestResult:
    t: np.ndarray
    p_raw: np.ndarray
    degenerate: np.ndarray  # True where both groups are constant and equal
    n_permutations: int


def partial_tests(rows_a, rows_b, n_permutations: int = 10_000,
                  seed: int = 0) -> PartialTestResult:
    """Per-feature pooled-t permutation tests.

    Uses the same permutation streams as
    :func:`direction_projection_test` for a given seed, so global and
    partial results describe the same label reshuffles.
    """
    a, b = _check_groups(rows_a, rows_b)
    if n_permutations < 1:
        raise ValueError("need at least one permutation")
    observed = _pooled_t(a, b)
    pooled = np.concatenate([a, b], axis=0)
    permuted = _permuted_statistics(
        pooled, a.shape[0], n_permutations, seed, _pooled_t, a.shape[1]
    )
    with np.errstate(invalid="ignore"):
        exceed = np.abs(permuted) >= np.abs(observed)[None, :]
    p_raw = (1 + exceed.sum(axis=0)) / (n_permutations + 1)
    degenerate = (observed == 0.0) & (
        (a.var(axis=0, ddof=1) == 0.0) & (b.var(axis=0, ddof=1) == 0.0)
    )
    return PartialTestResult(
        t=observed, p_raw=p_raw, degenerate=degenerate, n_permutations=n_permutations
    )


def bh_adjust(p_values) -> np.ndarray:
    """Benjamini-Hochberg step-up adjustment.

    Sorts ascending, scales by K / rank, enforces monotonicity with a
    reverse cumulative minimum, clips at 1, and returns adjusted values
    in the original order.
    """
    p = np.asarray(p_values, dtype=float)
    if p.ndim != 1:
        raise ValueError(f"p-values must be 1-D, got shape {p.shape}")
    if p.size == 0:
        return p.copy()
    if np.any(p < 0.0) or np.any(p > 1.0) or not np.all(np.isfinite(p)):
        raise ValueError("p-values must lie in [0, 1]")
    order = np.argsort(p, kind="stable")
    count = p.size
    scaled = p[order] * count / np.arange(1, count + 1)
    adjusted_sorted = np.minimum(np.minimum.accumulate(scaled[::-1])[::-1], 1.0)
    adjusted = np.empty_like(p)
    adjusted[order] = adjusted_sorted
    return adjusted


@dataclass(eq=False)
class TestReport:
    """Joint report of the global test and the per-feature partial tests."""

    global_statistic: float
    global_p: float
    n_permutations: int
    seed: int
    alpha: float
    scaled: bool
    feature_names: tuple[str, ...]
    t: np.ndarray
    p_raw: np.ndarray
    p_adjusted: np.ndarray
    degenerate: np.ndarray
    significant_raw: np.ndarray = field(init=False)
    significant_adjusted: np.ndarray = field(init=False)

    def __post_init__(self):
        self.significant_raw = self.p_raw <= self.alpha
        self.significant_adjusted = self.p_adjusted <= self.alpha

    def to_dict(self) -> dict:
        """JSON-ready form with per-feature entries in column order."""
        features = []
        for k, name in enumerate(self.feature_names):
            t_val = float(self.t[k])
            features.append({
                "name": name,
                "t": t_val if math.isfinite(t_val) else ("inf" if t_val > 0 else "-inf"),
                "p_raw": float(self.p_raw[k]),
                "p_adjusted": float(self.p_adjusted[k]),
                "degenerate": bool(self.degenerate[k]),
                "significant_raw": bool(self.significant_raw[k]),
                "significant_adjusted": bool(self.significant_adjusted[k]),
            })
        return {
            "global": {
                "statistic": self.global_statistic,
                "p_value": self.global_p,
                "n_permutations": self.n_permutations,
            },
            "features": features,
            "seed": self.seed,
            "alpha": self.alpha,
            "scaled": self.scaled,
            "method": {
                "global": "mean-difference direction projection, permutation null",
                "partial": "pooled two-sample t, permutation null",
                "adjustment": "benjamini-hochberg",
            },
        }


def two_sample_report(group_a: FeatureMatrix, group_b: FeatureMatrix,
                      n_permutations: int = 10_000, seed: int = 0,
                      alpha: float = 0.1, scaled: bool = False) -> TestReport:
    """Run the global and partial tests and assemble one report.

    ``scaled`` only records whether the features came from
    size-normalized tubes; it does not change the computation.
    """
    if group_a.feature_names != group_b.feature_names:
        raise ValueError("groups carry different feature names")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    global_result = direction_projection_test(
        group_a.values, group_b.values, n_permutations=n_permutations, seed=seed
    )
    partial = partial_tests(
        group_a.values, group_b.values, n_permutations=n_permutations, seed=seed
    )
    p_adjusted = bh_adjust(partial.p_raw)
    low = 1.0 / (n_permutations + 1)
    for name, values in (("raw", partial.p_raw), ("adjusted", p_adjusted),
                         ("global", np.array([global_result.p_value]))):
        if np.any(values < low - 1e-12) or np.any(values > 1.0 + 1e-12):
            raise AssertionError(f"{name} p-values escaped [{low}, 1]")
    if np.any(p_adjusted < partial.p_raw - 1e-12):
        raise AssertionError("adjustment decreased a p-value")
    return TestReport(
        global_statistic=global_result.statistic,
        global_p=global_result.p_value,
        n_permutations=n_permutations,
        seed=seed,
        alpha=alpha,
        scaled=scaled,
        feature_names=group_a.feature_names,
        t=partial.t,
        p_raw=partial.p_raw,
        p_adjusted=p_adjusted,
        degenerate=partial.degenerate,
    )

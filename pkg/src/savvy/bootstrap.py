"""Nonparametric bootstrap for variances of dependent statistics.

Patients are the resampling unit: a replicate draws patients with replacement
(by default within each treatment group, preserving group sizes) and
recomputes the full statistic on the resampled data, including re-deriving
the follow-up grid.

Randomness is counter-based so that execution order cannot change results:
replicate ``i`` of a run with master seed ``s`` uses the Philox stream with
key ``(s, 0)`` and counter block ``i`` (highest counter word).  Within a
replicate, group "A" indices are drawn before group "B", each as
``floor(uniform * n)`` over ``n`` uniforms.  This mapping is the stable,
reimplementable contract of the engine.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import BootstrapUnstableError

DEFAULT_REPLICATES = 1000


@dataclass(frozen=True)
class BootstrapSpec:
    """Configuration of one bootstrap run."""

    replicates: int = DEFAULT_REPLICATES
    master_seed: int = 0
    stratified: bool = True
    statistic: str = ""
    frozen_tau: bool = False

    def __post_init__(self):
        if self.replicates < 2:
            raise ValueError("bootstrap needs at least 2 replicates")


@dataclass(frozen=True)
class BootstrapResult:
    variance: float
    n_valid: int
    n_degenerate: int
    replicate_values: np.ndarray | None = None


def _splitmix64(x: int) -> int:
    """One splitmix64 step; used to derive independent pass seeds."""
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


def derive_seed(master_seed: int, index: int) -> int:
    """Deterministic sub-seed for pass ``index`` of a multi-pass analysis."""
    return _splitmix64((master_seed & 0xFFFFFFFFFFFFFFFF) ^ _splitmix64(index + 1))


def make_stream(master_seed: int, replicate_index: int) -> np.random.Generator:
    """The counter-based random stream of one bootstrap replicate."""
    bitgen = np.random.Philox(key=[master_seed & 0xFFFFFFFFFFFFFFFF, 0],
                              counter=[0, 0, 0, replicate_index])
    return np.random.Generator(bitgen)


def resample_indices(rng: np.random.Generator, n: int) -> np.ndarray:
    """n uniform draws with replacement, as floor(uniform * n)."""
    return (rng.random(n) * n).astype(np.intp)


def resample(records, rng: np.random.Generator):
    """Resample a group of patient records with replacement.

    Each draw is an independent uniform pick; the drawn patient's full record
    travels intact.
    """
    records = list(records)
    idx = resample_indices(rng, len(records))
    return [records[i] for i in idx]


def _resample_dataset(dataset, rng, stratified):
    if stratified:
        picked = []
        for group in ("A", "B"):
            picked.extend(resample([r for r in dataset.records if r.group == group], rng))
    else:
        picked = resample(dataset.records, rng)
    return replace(dataset, records=tuple(picked))


def bootstrap_variance(dataset, spec: BootstrapSpec, statistic, *, workers=1,
                       keep_replicates=False) -> BootstrapResult:
    """Bootstrap variance of a scalar statistic of an analysis dataset.

    ``statistic`` is a callable mapping a (resampled) dataset to a float; it
    must be computable on the original data, and may return NaN on replicates
    where it is undefined (counted as degenerate and dropped).  Raises
    BootstrapUnstableError when fewer than half the replicates are valid.
    """
    base = statistic(dataset)
    if not np.isfinite(base):
        raise ValueError("statistic is not computable on the original data")

    def one(i):
        return float(statistic(_resample_dataset(dataset, make_stream(spec.master_seed, i),
                                                  spec.stratified)))

    values = _run_replicates(one, spec.replicates, workers)
    valid = values[np.isfinite(values)]
    n_valid = int(valid.size)
    n_degenerate = spec.replicates - n_valid
    if n_valid < 0.5 * spec.replicates:
        raise BootstrapUnstableError(
            f"bootstrap unstable: {n_valid} valid of {spec.replicates} replicates"
            f" ({n_degenerate} degenerate)", n_valid=n_valid, n_degenerate=n_degenerate)
    variance = float(np.var(valid, ddof=1))
    return BootstrapResult(variance, n_valid, n_degenerate,
                           values if keep_replicates else None)


def bootstrap_matrix(groups: dict, spec: BootstrapSpec, kernel, n_stats: int,
                     *, workers=1) -> np.ndarray:
    """Replicate-by-statistic value matrix for a vector-valued kernel.

    ``groups`` maps "A"/"B" to (times, codes) arrays; ``kernel`` maps such a
    dict of resampled arrays to a float vector of length ``n_stats``.  All
    statistics of one replicate share the same resample, which is what makes
    variances of dependent estimator contrasts meaningful.  The returned
    matrix is indexed by replicate and is identical for any worker count.
    """
    n_a = groups["A"][0].size
    n_b = groups["B"][0].size

    def one(i):
        rng = make_stream(spec.master_seed, i)
        if spec.stratified:
            ia = resample_indices(rng, n_a)
            ib = resample_indices(rng, n_b)
            resampled = {"A": (groups["A"][0][ia], groups["A"][1][ia]),
                         "B": (groups["B"][0][ib], groups["B"][1][ib])}
        else:
            times = np.concatenate([groups["A"][0], groups["B"][0]])
            codes = np.concatenate([groups["A"][1], groups["B"][1]])
            labels = np.concatenate([np.zeros(n_a, np.intp), np.ones(n_b, np.intp)])
            idx = resample_indices(rng, times.size)
            t, c, lab = times[idx], codes[idx], labels[idx]
            resampled = {"A": (t[lab == 0], c[lab == 0]),
                         "B": (t[lab == 1], c[lab == 1])}
        return np.asarray(kernel(resampled), dtype=float)

    values = np.empty((spec.replicates, n_stats), dtype=float)
    if workers <= 1:
        for i in range(spec.replicates):
            values[i] = one(i)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for i, row in zip(range(spec.replicates),
                              pool.map(one, range(spec.replicates), chunksize=32)):
                values[i] = row
    return values


def column_variances(values: np.ndarray):
    """Per-statistic variance over the valid (finite) replicates of a matrix.

    Returns (variance, n_valid, n_degenerate) arrays; columns with fewer than
    two valid replicates get NaN variance.
    """
    finite = np.isfinite(values)
    n_valid = finite.sum(axis=0)
    n_total = values.shape[0]
    variance = np.full(values.shape[1], np.nan)
    for j in range(values.shape[1]):
        if n_valid[j] >= 2:
            variance[j] = float(np.var(values[finite[:, j], j], ddof=1))
    return variance, n_valid.astype(int), (n_total - n_valid).astype(int)


def _run_replicates(one, n, workers):
    values = np.empty(n, dtype=float)
    if workers <= 1:
        for i in range(n):
            values[i] = one(i)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for i, v in zip(range(n), pool.map(one, range(n), chunksize=32)):
                values[i] = v
    return values

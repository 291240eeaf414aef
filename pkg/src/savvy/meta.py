"""Analysis-center layer: random-effects pooling, meta-regression, agreement
and precision summaries.

Per adverse event k the input is an observed log-ratio (comparator over
benchmark, computed on the same data) with a bootstrapped variance.  The
normal-normal hierarchical model treats the true per-AE log-ratios as normal
around a common mean with between-AE heterogeneity rho^2, estimated by the
Paule-Mandel moment equation; the pooled mean uses inverse total-variance
weights.  AEs are treated as independent even within a trial; trial and
indication labels are carried for sensitivity groupings only.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .constants import FORMAT_VERSION, Z975
from .errors import SchemaMismatchError, ValidationError

FREQUENCY_CATEGORIES = ("very rare", "rare", "uncommon", "common", "very common")
_FREQUENCY_EDGES = (0.0001, 0.001, 0.01, 0.1)


@dataclass(frozen=True)
class MetaEntry:
    """One adverse event's contribution to a pooled analysis."""

    theta_hat: float
    sigma2: float
    trial_id: str = ""
    ae_id: int = 0
    group: str | None = None
    moderators: dict = field(default_factory=dict)
    indication: str | None = None


@dataclass(frozen=True)
class MetaResult:
    theta: float
    se_theta: float
    ci_low: float
    ci_high: float
    rho2: float
    k_used: int
    method: str = "paule_mandel"
    tags: tuple = ()


@dataclass(frozen=True)
class MetaRegressionResult:
    names: tuple
    coefficients: np.ndarray
    standard_errors: np.ndarray
    rho2: float
    k_used: int
    method: str = "paule_mandel"


def generalized_q(theta, sigma2, rho2) -> float:
    """Weighted dispersion around the inverse-total-variance weighted mean."""
    theta = np.asarray(theta, float)
    total = np.asarray(sigma2, float) + rho2
    if np.any(total <= 0):
        return math.inf if np.ptp(theta) > 0 else 0.0
    w = 1.0 / total
    mean = float(np.sum(w * theta) / np.sum(w))
    return float(np.sum(w * (theta - mean) ** 2))


def paule_mandel_rho2(theta, sigma2, tol=1e-10) -> float:
    """Between-AE heterogeneity solving Q(rho^2) = K - 1.

    Q is strictly decreasing in rho^2 whenever there is any dispersion, so the
    root is bracketed by doubling and found with Brent's method; the estimate
    is truncated at 0 when Q(0) <= K - 1.
    """
    theta = np.asarray(theta, float)
    sigma2 = np.asarray(sigma2, float)
    k = theta.size
    if k < 2:
        raise ValidationError("pooling needs K >= 2 entries")
    if np.any(sigma2 < 0):
        raise ValidationError("variances must be nonnegative")
    target = k - 1
    if generalized_q(theta, sigma2, 0.0) <= target:
        return 0.0
    hi = max(float(np.var(theta, ddof=1)), float(sigma2.max()), 1e-8)
    while generalized_q(theta, sigma2, hi) > target:
        hi *= 2.0
        if hi > 1e12:
            raise ValidationError("Paule-Mandel bracket expansion failed")
    rho2 = brentq(lambda r: generalized_q(theta, sigma2, r) - target, 0.0, hi,
                  xtol=1e-16, rtol=8.9e-16, maxiter=200)
    assert abs(generalized_q(theta, sigma2, rho2) - target) < tol
    return float(rho2)


def nnhm_pool(theta, sigma2, rho2=None) -> MetaResult:
    """Inverse total-variance pooled mean with normal 95% CI.

    ``rho2=None`` first estimates heterogeneity by Paule-Mandel.  Entries with
    zero total variance only arise when the comparator coincides with the
    benchmark on every bootstrap replicate; the pooled result is then the
    (necessarily common) observed value with a degenerate zero-width CI.
    """
    theta = np.asarray(theta, float)
    sigma2 = np.asarray(sigma2, float)
    k = theta.size
    if k < 2:
        raise ValidationError("pooling needs K >= 2 entries")
    if rho2 is None:
        rho2 = paule_mandel_rho2(theta, sigma2)
    total = sigma2 + rho2
    zero = total == 0
    if zero.any():
        pooled = float(theta[zero].mean())
        return MetaResult(pooled, 0.0, pooled, pooled, rho2, k,
                          tags=("zero_variance_degenerate",))
    w = 1.0 / total
    pooled = float(np.sum(w * theta) / np.sum(w))
    se = float(1.0 / math.sqrt(np.sum(w)))
    return MetaResult(pooled, se, pooled - Z975 * se, pooled + Z975 * se,
                      float(rho2), k)


def _wls(theta, total_var, design):
    w = 1.0 / total_var
    xtw = design.T * w
    cov = np.linalg.inv(xtw @ design)
    beta = cov @ (xtw @ theta)
    return beta, cov


def _regression_q(theta, sigma2, design, rho2):
    total = sigma2 + rho2
    if np.any(total <= 0):
        return math.inf
    beta, _ = _wls(theta, total, design)
    resid = theta - design @ beta
    return float(np.sum(resid**2 / total))


def meta_regression(theta, sigma2, moderators, names, method="pm") -> MetaRegressionResult:
    """Weighted least squares on [1, moderators] with PM-type residual rho^2.

    The heterogeneity solves the generalized moment equation
    Q_reg(rho^2) = K - p, with the coefficient vector re-fitted at each
    candidate rho^2 (the fixed point of iterating WLS and moment estimation).
    ``method="dl"`` instead uses the non-iterative DerSimonian-Laird estimate
    as a sensitivity analysis.  Rank-deficient designs raise an error naming
    the offending moderators.
    """
    theta = np.asarray(theta, float)
    sigma2 = np.asarray(sigma2, float)
    mods = np.atleast_2d(np.asarray(moderators, float))
    if mods.shape[0] != theta.size:
        mods = mods.T
    design = np.column_stack([np.ones(theta.size), mods])
    names = ("intercept",) + tuple(names)
    k, p = design.shape
    if k <= p:
        raise ValidationError(f"need K > {p} entries for {p} coefficients, got {k}")
    if np.linalg.matrix_rank(design) < p:
        bad = [names[j] for j in range(1, p)
               if np.ptp(design[:, j]) == 0 or
               np.linalg.matrix_rank(np.delete(design, j, axis=1)) == np.linalg.matrix_rank(design)]
        raise ValidationError(f"design is rank deficient; collinear moderators: {bad or names}")

    target = k - p
    if method == "dl":
        rho2 = _dl_regression_rho2(theta, sigma2, design)
    else:
        if _regression_q(theta, sigma2, design, 0.0) <= target:
            rho2 = 0.0
        else:
            hi = max(float(np.var(theta, ddof=1)), float(sigma2.max()), 1e-8)
            while _regression_q(theta, sigma2, design, hi) > target:
                hi *= 2.0
                if hi > 1e12:
                    raise ValidationError("meta-regression bracket expansion failed")
            rho2 = float(brentq(lambda r: _regression_q(theta, sigma2, design, r) - target,
                                0.0, hi, xtol=1e-16, rtol=8.9e-16, maxiter=200))
    beta, cov = _wls(theta, sigma2 + rho2, design)
    return MetaRegressionResult(names, beta, np.sqrt(np.diag(cov)), rho2, k,
                                method="paule_mandel" if method == "pm" else "dersimonian_laird")


def _dl_regression_rho2(theta, sigma2, design):
    w = 1.0 / sigma2
    beta, _ = _wls(theta, sigma2, design)
    resid = theta - design @ beta
    q = float(np.sum(w * resid**2))
    k, p = design.shape
    xtw = design.T * w
    h = design @ np.linalg.inv(xtw @ design) @ (design.T * w**2)
    c = float(w.sum() - np.trace(h))
    return max(0.0, (q - (k - p)) / c) if c > 0 else 0.0


# ---------------------------------------------------------------------------
# agreement, categories, precision
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlandAltmanTable:
    """Comparator-minus-benchmark differences against the benchmark value."""

    x_benchmark: np.ndarray
    y_difference: np.ndarray
    mean_difference: float
    sd_difference: float
    loa_low: float
    loa_high: float
    measure: str = ""
    labels: tuple = ()


def bland_altman_table(benchmark, comparator, measure="", labels=()) -> BlandAltmanTable:
    """Difference-vs-benchmark agreement rows with 95% limits of agreement."""
    x = np.asarray(benchmark, float)
    c = np.asarray(comparator, float)
    if x.shape != c.shape:
        raise ValidationError(f"length mismatch: {x.shape} vs {c.shape}")
    y = c - x
    mean = float(y.mean()) if y.size else float("nan")
    sd = float(y.std(ddof=1)) if y.size > 1 else 0.0
    return BlandAltmanTable(x, y, mean, sd, mean - Z975 * sd, mean + Z975 * sd,
                            measure=measure, labels=tuple(labels))


def frequency_category(p: float) -> str:
    """Regulatory frequency band of an AE probability.

    very rare < 0.01% <= rare < 0.1% <= uncommon < 1% <= common < 10%
    <= very common; boundaries classify upward.
    """
    if not 0 <= p <= 1:
        raise ValidationError(f"probability out of [0, 1]: {p}")
    for edge, cat in zip(_FREQUENCY_EDGES, FREQUENCY_CATEGORIES):
        if p < edge:
            return cat
    return FREQUENCY_CATEGORIES[-1]


def category_shift_table(benchmark_cats, comparator_cats) -> np.ndarray:
    """5x5 confusion matrix of frequency categories, benchmark in rows."""
    index = {c: i for i, c in enumerate(FREQUENCY_CATEGORIES)}
    table = np.zeros((5, 5), dtype=int)
    if len(benchmark_cats) != len(comparator_cats):
        raise ValidationError("category sequences must have equal length")
    for b, c in zip(benchmark_cats, comparator_cats):
        table[index[b], index[c]] += 1
    return table


@dataclass(frozen=True)
class PrecisionTable:
    ratios: np.ndarray           # comparator SE / benchmark SE
    labels: tuple
    n_skipped_zero_se: int


def precision_ratio_table(benchmark_se, comparator_se, labels=()) -> PrecisionTable:
    """Ratios of standard errors; pairs with zero benchmark SE are skipped."""
    b = np.asarray(benchmark_se, float)
    c = np.asarray(comparator_se, float)
    if b.shape != c.shape:
        raise ValidationError("paired standard errors must have equal length")
    keep = b > 0
    kept_labels = tuple(lab for lab, k in zip(labels, keep) if k) if labels else ()
    return PrecisionTable(c[keep] / b[keep], kept_labels, int((~keep).sum()))


# ---------------------------------------------------------------------------
# aggregated-file collection
# ---------------------------------------------------------------------------

def load_result_files(directory):
    """All aggregated result payloads of a directory, version-checked."""
    paths = sorted(Path(directory).glob("*.json"))
    if not paths:
        raise ValidationError(f"no aggregated result files in {directory}")
    payloads = []
    bad = []
    for path in paths:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        if payload.get("format_version") != FORMAT_VERSION:
            bad.append(str(path))
        payloads.append(payload)
    if bad:
        raise SchemaMismatchError(
            f"format_version mismatch (expected {FORMAT_VERSION}): {', '.join(bad)}",
            files=bad)
    return payloads


def collect_entries(payloads, comparator, benchmark, scheme, tau_label,
                    group=None, target="event", max_degenerate_share=0.1):
    """Meta inputs for one planned comparison across trials and AEs.

    Entries whose bootstrap dropped more than ``max_degenerate_share`` of the
    replicates, or with an undefined log-ratio, are excluded and returned
    separately.
    """
    pair = f"{comparator}/{benchmark}"
    included, excluded = [], []
    for payload in payloads:
        for ae in payload["aes"]:
            if comparator.startswith("aalen_johansen@"):
                entries = ae.get("aj_scheme_contrast", [])
            else:
                entries = ae["schemes"].get(scheme, {}).get("log_ratios", [])
            for e in entries:
                if e["pair"] != pair or e["tau_label"] != tau_label:
                    continue
                if e["target"] != target or (group is not None and e["group"] != group):
                    continue
                entry = MetaEntry(
                    theta_hat=e["theta_hat"] if e["theta_hat"] is not None else float("nan"),
                    sigma2=e["variance"] if e["variance"] is not None else float("nan"),
                    trial_id=payload["savvy_id"], ae_id=ae["ae_id"],
                    group=e["group"], moderators=dict(e.get("moderators", {})),
                    indication=payload.get("indication"))
                n_total = e["n_valid"] + e["n_degenerate"]
                too_degenerate = n_total > 0 and e["n_degenerate"] > max_degenerate_share * n_total
                if (not math.isfinite(entry.theta_hat) or not math.isfinite(entry.sigma2)
                        or too_degenerate):
                    excluded.append(entry)
                else:
                    included.append(entry)
    return included, excluded


def pool_entries(entries, rho2=None) -> MetaResult:
    theta = np.array([e.theta_hat for e in entries])
    sigma2 = np.array([e.sigma2 for e in entries])
    return nnhm_pool(theta, sigma2, rho2)

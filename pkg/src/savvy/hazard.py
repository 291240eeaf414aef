"""Two-sample hazard-scale comparisons.

Three estimators of the hazard ratio between the experimental (A) and
control (B) groups, each available for the event of interest and for the
competing event:

``cox``       semi-parametric Cox partial-likelihood estimate with a single
              group indicator, Breslow tie handling, solved by Newton
              iteration; fitted on data administratively truncated at the
              shared horizon min(tau_A, tau_B)
``id_ratio``  ratio of incidence densities, var(log) = 1/N_A + 1/N_B
``na_ratio``  ratio of Nelson-Aalen cumulative hazards, delta-method variance

The "code as censored" convention applies: for a given target, observations
of the other first-event type count as censored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import Z975
from .estimators import CountingProcessView

KIND_COX = "cox"
KIND_ID_RATIO = "id_ratio"
KIND_NA_RATIO = "na_ratio"


@dataclass(frozen=True)
class HazardRatioResult:
    kind: str
    target: str
    log_hr: float
    var_log_hr: float
    ci_low: float
    ci_high: float
    scheme: str = ""
    tau_label: str = ""
    converged: bool = True
    degenerate: bool = False
    n_iter: int = 0
    diagnostic: str = ""

    @property
    def hazard_ratio(self) -> float:
        return math.exp(self.log_hr)


def _result(kind, target, log_hr, var, scheme, tau_label, **kw):
    if math.isfinite(log_hr) and math.isfinite(var) and var >= 0:
        half = Z975 * math.sqrt(var)
        lo, hi = math.exp(log_hr - half), math.exp(log_hr + half)
    else:
        lo = hi = float("nan")
    return HazardRatioResult(kind, target, log_hr, var, lo, hi,
                             scheme=scheme, tau_label=tau_label, **kw)


def cox_fit_arrays(times, status, in_a, tol=1e-10, max_iter=50, max_step=5.0):
    """Newton solver for the one-covariate Breslow partial likelihood.

    Parameters are the observed times, a 0/1 target-event status and a
    boolean experimental-group indicator.  Returns a dict with ``beta``,
    ``var``, ``n_iter``, ``converged`` and ``diagnostic``.

    With a binary covariate the risk-set sums reduce to group counts: at each
    unique event time u the score contribution is
    dA(u) - d(u) * nA(u) e^beta / (nA(u) e^beta + nB(u)).
    """
    times = np.asarray(times, dtype=float)
    status = np.asarray(status, dtype=bool)
    in_a = np.asarray(in_a, dtype=bool)
    event_times = np.unique(times[status])
    if event_times.size == 0:
        raise ValueError("no events for Cox")

    ta = np.sort(times[in_a])
    tb = np.sort(times[~in_a])
    n_a = ta.size - np.searchsorted(ta, event_times, side="left")
    n_b = tb.size - np.searchsorted(tb, event_times, side="left")
    ea = np.sort(times[status & in_a])
    eb = np.sort(times[status & ~in_a])
    d_a = (np.searchsorted(ea, event_times, side="right")
           - np.searchsorted(ea, event_times, side="left")).astype(float)
    d_b = (np.searchsorted(eb, event_times, side="right")
           - np.searchsorted(eb, event_times, side="left")).astype(float)
    d = d_a + d_b
    total_a = d_a.sum()
    total = d.sum()
    if total_a == 0 or total_a == total:
        side = "B" if total_a == 0 else "A"
        return {"beta": float("nan"), "var": float("nan"), "n_iter": 0,
                "converged": False,
                "diagnostic": f"monotone partial likelihood: all target events in group {side}"}

    beta = 0.0
    n_iter = 0
    converged = False
    for n_iter in range(1, max_iter + 1):
        eb_ = math.exp(beta)
        risk_a = n_a * eb_
        frac = np.where(n_a > 0, risk_a / (risk_a + n_b), 0.0)
        score = total_a - float(np.sum(d * frac))
        info = float(np.sum(d * frac * (1.0 - frac)))
        if abs(score) < tol:
            converged = True
            break
        if info <= 0:
            return {"beta": beta, "var": float("nan"), "n_iter": n_iter,
                    "converged": False, "diagnostic": "zero observed information"}
        step = score / info
        beta += max(-max_step, min(max_step, step))
    diagnostic = "" if converged else "newton iteration limit reached"
    return {"beta": beta, "var": 1.0 / info, "n_iter": n_iter,
            "converged": converged, "diagnostic": diagnostic}


def _target_code(target):
    if target not in ("event", "competing"):
        raise ValueError(f"target must be 'event' or 'competing', got {target!r}")
    return 1 if target == "event" else 2


def cox_two_sample(dataset, target="event", tau=None, tau_label="tau_min") -> HazardRatioResult:
    """Cox hazard-ratio fit on an analysis dataset, truncated at ``tau``.

    ``tau`` defaults to the shared horizon min of the per-group maximum
    observed times.  Observations beyond tau are censored at tau.
    """
    code = _target_code(target)
    times_a, codes_a = dataset.group_arrays("A")
    times_b, codes_b = dataset.group_arrays("B")
    if times_a.size == 0 or times_b.size == 0:
        raise ValueError("both groups must be nonempty for Cox")
    if tau is None:
        tau = min(times_a.max(), times_b.max())
    times = np.concatenate([times_a, times_b])
    codes = np.concatenate([codes_a, codes_b])
    in_a = np.concatenate([np.ones(times_a.size, bool), np.zeros(times_b.size, bool)])
    status = (codes == code) & (times <= tau)
    times = np.minimum(times, tau)
    fit = cox_fit_arrays(times, status, in_a)
    return _result(KIND_COX, target, fit["beta"], fit["var"], dataset.scheme,
                   tau_label, converged=fit["converged"],
                   degenerate=not math.isfinite(fit["beta"]),
                   n_iter=fit["n_iter"], diagnostic=fit["diagnostic"])


def id_log_ratio(view_a, view_b, tau_a, tau_b, which="event", zero_correction=False):
    """log incidence-density ratio and its variance; (nan, nan, True) when degenerate."""
    n_a = view_a.n_events(tau_a, which)
    n_b = view_b.n_events(tau_b, which)
    pt_a = view_a.person_time(tau_a)
    pt_b = view_b.person_time(tau_b)
    if zero_correction and (n_a == 0 or n_b == 0):
        n_a += 0.5
        n_b += 0.5
    if n_a <= 0 or n_b <= 0 or pt_a <= 0 or pt_b <= 0:
        return float("nan"), float("nan"), True
    log_hr = math.log((n_a / pt_a) / (n_b / pt_b))
    return log_hr, 1.0 / n_a + 1.0 / n_b, False


def na_log_ratio(view_a, view_b, tau_a, tau_b, which="event"):
    """log Nelson-Aalen ratio with delta-method variance; degenerate on zero hazards."""
    if which == "event":
        val_a, var_a = view_a._at(view_a.na_event, tau_a), view_a._at(view_a.na_event_var, tau_a)
        val_b, var_b = view_b._at(view_b.na_event, tau_b), view_b._at(view_b.na_event_var, tau_b)
    else:
        val_a, var_a = view_a._at(view_a.na_competing, tau_a), view_a._at(view_a.na_competing_var, tau_a)
        val_b, var_b = view_b._at(view_b.na_competing, tau_b), view_b._at(view_b.na_competing_var, tau_b)
    if val_a <= 0 or val_b <= 0:
        return float("nan"), float("nan"), True
    return math.log(val_a / val_b), var_a / val_a**2 + var_b / val_b**2, False


def _views(dataset):
    ta, ca = dataset.group_arrays("A")
    tb, cb = dataset.group_arrays("B")
    return (CountingProcessView(ta, ca, "A", dataset.scheme),
            CountingProcessView(tb, cb, "B", dataset.scheme))


def incidence_density_ratio(dataset, target="event", tau=None, tau_label="",
                            zero_correction=False) -> HazardRatioResult:
    """Incidence-density ratio A/B at tau (scalar, or (tau_A, tau_B) pair)."""
    _target_code(target)
    view_a, view_b = _views(dataset)
    tau_a, tau_b = _tau_pair(tau, view_a, view_b)
    log_hr, var, degenerate = id_log_ratio(view_a, view_b, tau_a, tau_b, target,
                                           zero_correction)
    return _result(KIND_ID_RATIO, target, log_hr, var, dataset.scheme, tau_label,
                   degenerate=degenerate)


def nelson_aalen_ratio(dataset, target="event", tau=None, tau_label="") -> HazardRatioResult:
    """Nelson-Aalen cumulative-hazard ratio A/B at tau (scalar or pair)."""
    _target_code(target)
    view_a, view_b = _views(dataset)
    tau_a, tau_b = _tau_pair(tau, view_a, view_b)
    log_hr, var, degenerate = na_log_ratio(view_a, view_b, tau_a, tau_b, target)
    return _result(KIND_NA_RATIO, target, log_hr, var, dataset.scheme, tau_label,
                   degenerate=degenerate)


def _tau_pair(tau, view_a, view_b):
    if tau is None:
        shared = min(view_a.sorted_times.max(), view_b.sorted_times.max())
        return shared, shared
    if np.isscalar(tau):
        return float(tau), float(tau)
    tau_a, tau_b = tau
    return float(tau_a), float(tau_b)

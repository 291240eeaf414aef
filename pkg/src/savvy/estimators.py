"""One-sample estimators of absolute adverse-event risk and cumulative hazard.

Seven estimators are computed per treatment group from the aggregated
first-event counting process:

=================  ==========================================================
``ip``             incidence proportion, observed events / group size
``id_raw``         incidence density, events / person-time at risk (per day)
``id_prob``        probability transform of the incidence density,
                   1 - exp(-ID * tau)
``one_minus_km``   one minus the Kaplan-Meier survivor that codes only the
                   event of interest and censors everything else
``nelson_aalen``   nonparametric cumulative-hazard estimator (event of
                   interest or competing event)
``id_prob_cr``     cumulative event probability from the event and competing
                   incidence densities under constant hazards
``aalen_johansen`` nonparametric cumulative incidence function, generalizing
                   Kaplan-Meier to competing risks; the benchmark method
=================  ==========================================================

All estimators are evaluated with the right-continuous step convention: the
value at ``tau`` is the value at the last jump time <= ``tau``.  Tied event,
competing and censoring times at the same day are supported; tied censorings
leave the risk set after the events at that time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

METHOD_IP = "ip"
METHOD_ID_RAW = "id_raw"
METHOD_ID_PROB = "id_prob"
METHOD_ONE_MINUS_KM = "one_minus_km"
METHOD_NELSON_AALEN = "nelson_aalen"
METHOD_ID_PROB_CR = "id_prob_cr"
METHOD_AALEN_JOHANSEN = "aalen_johansen"

PROBABILITY_METHODS = (METHOD_IP, METHOD_ID_PROB, METHOD_ONE_MINUS_KM,
                       METHOD_ID_PROB_CR, METHOD_AALEN_JOHANSEN)
HAZARD_METHODS = (METHOD_ID_RAW, METHOD_NELSON_AALEN)
ALL_METHODS = (METHOD_IP, METHOD_ID_RAW, METHOD_ID_PROB, METHOD_ONE_MINUS_KM,
               METHOD_NELSON_AALEN, METHOD_ID_PROB_CR, METHOD_AALEN_JOHANSEN)


@dataclass(frozen=True)
class Estimate:
    """A point estimate with variance and full evaluation metadata.

    ``variance`` is on the scale of ``value``.  ``variance_source`` is
    ``closed_form`` for the analytic variances documented per estimator and
    ``bootstrap`` for methods whose variance must be supplied by resampling
    (``aalen_johansen``, and ``id_prob_cr`` when orchestrated); for those the
    field is a placeholder 0.0 until filled.
    """

    method: str
    group: str
    value: float
    variance: float
    tau: float
    scheme: str
    tau_label: str = ""
    target: str = "event"
    variance_source: str = "closed_form"
    degenerate: bool = False

    @property
    def se(self) -> float:
        return math.sqrt(self.variance)

    def with_variance(self, variance, source="bootstrap"):
        return replace(self, variance=variance, variance_source=source)


class CountingProcessView:
    """Aggregated first-event counting process of one treatment group.

    Precomputes, per unique observed time: event and competing-event
    multiplicities, the left-continuous risk set, Nelson-Aalen paths, the
    joint product-limit survivor with the event/competing cumulative
    incidence paths, and the Kaplan-Meier variant that censors competing
    events.  The view is immutable; estimator calls are pure lookups.
    """

    __slots__ = ("n", "group", "scheme", "sorted_times", "_time_prefix",
                 "unique_times", "d_event", "d_competing", "at_risk",
                 "cum_events", "cum_competing", "na_event", "na_event_var",
                 "na_competing", "na_competing_var", "joint_survivor",
                 "cif_event", "cif_competing", "km_survivor", "cif_km",
                 "_greenwood")

    def __init__(self, times, codes, group="A", scheme="all_events"):
        t = np.asarray(times, dtype=float)
        c = np.asarray(codes, dtype=np.int64)
        if t.ndim != 1 or t.shape != c.shape:
            raise ValueError("times and codes must be 1-d arrays of equal length")
        if t.size == 0:
            raise ValueError("empty group")
        if np.any(t <= 0) or not np.all(np.isfinite(t)):
            raise ValueError("observed times must be positive and finite")
        order = np.argsort(t, kind="stable")
        t = t[order]
        c = c[order]
        self.n = int(t.size)
        self.group = group
        self.scheme = scheme
        self.sorted_times = t
        self._time_prefix = np.cumsum(t)

        ut, start = np.unique(t, return_index=True)
        bounds = np.append(start, t.size)
        removed = np.diff(bounds).astype(float)
        d_event = np.add.reduceat((c == 1).astype(float), start)
        d_comp = np.add.reduceat((c == 2).astype(float), start)
        at_risk = self.n - np.concatenate(([0.0], np.cumsum(removed)[:-1]))

        self.unique_times = ut
        self.d_event = d_event
        self.d_competing = d_comp
        self.at_risk = at_risk
        self.cum_events = np.cumsum(d_event)
        self.cum_competing = np.cumsum(d_comp)

        d_haz = d_event / at_risk
        d_haz_comp = d_comp / at_risk
        self.na_event = np.cumsum(d_haz)
        self.na_event_var = np.cumsum(d_event / at_risk**2)
        self.na_competing = np.cumsum(d_haz_comp)
        self.na_competing_var = np.cumsum(d_comp / at_risk**2)

        surv = np.cumprod(1.0 - d_haz - d_haz_comp)
        s_minus = np.concatenate(([1.0], surv[:-1]))
        self.joint_survivor = surv
        self.cif_event = np.cumsum(s_minus * d_haz)
        self.cif_competing = np.cumsum(s_minus * d_haz_comp)

        km = np.cumprod(1.0 - d_haz)
        km_minus = np.concatenate(([1.0], km[:-1]))
        self.km_survivor = km
        self.cif_km = np.cumsum(km_minus * d_haz)

        # Greenwood terms; a time with at_risk == d_event drives the survivor
        # to zero, where the variance is pinned to 0 instead.
        denom = at_risk * (at_risk - d_event)
        self._greenwood = np.cumsum(
            np.where(d_event > 0,
                     np.where(denom > 0, d_event / np.where(denom > 0, denom, 1.0), np.inf),
                     0.0))

    # -- lookups -----------------------------------------------------------

    def _idx(self, tau):
        return int(np.searchsorted(self.unique_times, tau, side="right")) - 1

    def _at(self, arr, tau, before=0.0):
        j = self._idx(tau)
        return float(arr[j]) if j >= 0 else before

    def n_events(self, tau, which="event") -> float:
        """Number of observed events of the given kind in (0, tau]."""
        arr = self.cum_events if which == "event" else self.cum_competing
        return self._at(arr, tau)

    def person_time(self, tau) -> float:
        """Integral of the at-risk process over (0, tau], i.e. sum of min(T_i, tau)."""
        k = int(np.searchsorted(self.sorted_times, tau, side="right"))
        before = float(self._time_prefix[k - 1]) if k > 0 else 0.0
        return before + tau * (self.n - k)

    def risk_set(self, t) -> int:
        """Left-continuous risk set: patients under observation just prior to t."""
        return self.n - int(np.searchsorted(self.sorted_times, t, side="left"))


def build_view(dataset, group) -> CountingProcessView:
    """View of one treatment group of an analysis dataset."""
    times, codes = dataset.group_arrays(group)
    return CountingProcessView(times, codes, group=group, scheme=dataset.scheme)


def _check_tau(tau):
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")


def incidence_proportion(view, tau, tau_label="") -> Estimate:
    """Observed events divided by group size; binomial variance p(1-p)/n.

    Ignores censoring: patients censored before tau stay in the denominator.
    """
    _check_tau(tau)
    n_ev = view.n_events(tau)
    p = n_ev / view.n
    return Estimate(METHOD_IP, view.group, p, p * (1.0 - p) / view.n, tau,
                    view.scheme, tau_label=tau_label, degenerate=n_ev == 0)


def incidence_density(view, tau, which="event", tau_label="") -> Estimate:
    """Events divided by person-time at risk, in events per day.

    Poisson variance: var(log ID) = 1/N, i.e. ID^2/N on the value scale.
    Zero events give value 0 with the log-scale variance undefined, flagged
    degenerate.
    """
    _check_tau(tau)
    pt = view.person_time(tau)
    if pt <= 0:
        raise ValueError("zero person-time at risk")
    n_ev = view.n_events(tau, which)
    rate = n_ev / pt
    var = n_ev / pt**2
    return Estimate(METHOD_ID_RAW, view.group, rate, var, tau, view.scheme,
                    tau_label=tau_label, target=which, degenerate=n_ev == 0)


def prob_transform_incidence_density(view, tau, tau_label="") -> Estimate:
    """Constant-hazard probability transform 1 - exp(-ID * tau).

    Delta-method variance from the Poisson incidence-density variance:
    (tau * exp(-ID*tau))^2 * var(ID).
    """
    base = incidence_density(view, tau, "event", tau_label)
    value = 1.0 - math.exp(-base.value * tau)
    deriv = tau * math.exp(-base.value * tau)
    return Estimate(METHOD_ID_PROB, view.group, value, deriv**2 * base.variance,
                    tau, view.scheme, tau_label=tau_label, degenerate=base.degenerate)


def one_minus_kaplan_meier(view, tau, tau_label="") -> Estimate:
    """One minus the product-limit survivor that censors competing events.

    Not a proper absolute-risk estimator in the presence of competing risks;
    kept as a comparator.  Greenwood variance; when the survivor reaches zero
    the variance is 0 by convention.
    """
    _check_tau(tau)
    j = view._idx(tau)
    if j < 0:
        return Estimate(METHOD_ONE_MINUS_KM, view.group, 0.0, 0.0, tau,
                        view.scheme, tau_label=tau_label, degenerate=True)
    value = float(view.cif_km[j])
    surv = float(view.km_survivor[j])
    var = 0.0 if surv == 0.0 else surv * surv * float(view._greenwood[j])
    return Estimate(METHOD_ONE_MINUS_KM, view.group, value, var, tau, view.scheme,
                    tau_label=tau_label, degenerate=view.n_events(tau) == 0)


def nelson_aalen(view, tau, which="event", tau_label="") -> Estimate:
    """Cumulative-hazard estimator: sum of dN(u)/Y(u) over jump times u <= tau.

    Variance sum of dN(u)/Y(u)^2.
    """
    _check_tau(tau)
    if which == "event":
        value, var = view._at(view.na_event, tau), view._at(view.na_event_var, tau)
    else:
        value, var = view._at(view.na_competing, tau), view._at(view.na_competing_var, tau)
    return Estimate(METHOD_NELSON_AALEN, view.group, value, var, tau, view.scheme,
                    tau_label=tau_label, target=which,
                    degenerate=view.n_events(tau, which) == 0)


def _id_prob_cr_value(n_ev, n_comp, pt, tau):
    total = (n_ev + n_comp) / pt
    if total == 0.0:
        return 0.0
    return n_ev / (n_ev + n_comp) * (1.0 - math.exp(-tau * total))


def prob_incidence_density_competing(view, tau, tau_label="") -> Estimate:
    """Cumulative event probability from event and competing incidence densities.

    value = ID/(ID+IDbar) * (1 - exp(-tau*(ID+IDbar))), a constant-hazards
    counterpart of the cumulative incidence function.  The closed-form
    variance is a delta method over the two Poisson event counts with
    person-time held fixed; orchestrated analyses replace it by a bootstrap
    variance.
    """
    _check_tau(tau)
    pt = view.person_time(tau)
    if pt <= 0:
        raise ValueError("zero person-time at risk")
    a = view.n_events(tau, "event")
    b = view.n_events(tau, "competing")
    if a + b == 0:
        return Estimate(METHOD_ID_PROB_CR, view.group, 0.0, 0.0, tau, view.scheme,
                        tau_label=tau_label, degenerate=True)
    value = _id_prob_cr_value(a, b, pt, tau)
    expo = math.exp(-tau * (a + b) / pt)
    shared = a / (a + b) * expo * tau / pt
    dpda = b / (a + b) ** 2 * (1.0 - expo) + shared
    dpdb = -a / (a + b) ** 2 * (1.0 - expo) + shared
    var = dpda**2 * a + dpdb**2 * b
    return Estimate(METHOD_ID_PROB_CR, view.group, value, var, tau, view.scheme,
                    tau_label=tau_label, degenerate=a == 0)


def aalen_johansen(view, tau, which="event", tau_label="") -> Estimate:
    """Cumulative incidence function: sum over jump times of S(u-) * dN(u)/Y(u),

    with S the joint product-limit survivor of event and competing hazards.
    No closed-form variance is provided; the variance field is a placeholder
    until filled by the bootstrap engine (``variance_source=="bootstrap"``).
    """
    _check_tau(tau)
    arr = view.cif_event if which == "event" else view.cif_competing
    return Estimate(METHOD_AALEN_JOHANSEN, view.group, view._at(arr, tau), 0.0,
                    tau, view.scheme, tau_label=tau_label, target=which,
                    variance_source="bootstrap",
                    degenerate=view.n_events(tau, which) == 0)


ESTIMATOR_FUNCS = {
    METHOD_IP: incidence_proportion,
    METHOD_ID_RAW: incidence_density,
    METHOD_ID_PROB: prob_transform_incidence_density,
    METHOD_ONE_MINUS_KM: one_minus_kaplan_meier,
    METHOD_NELSON_AALEN: nelson_aalen,
    METHOD_ID_PROB_CR: prob_incidence_density_competing,
    METHOD_AALEN_JOHANSEN: aalen_johansen,
}


def probability_values(view, tau) -> dict:
    """Fast value-only evaluation of the five probability-scale methods.

    Used by the bootstrap replicate kernels, which need plain floats rather
    than Estimate objects.
    """
    n = view.n
    j = view._idx(tau)
    if j < 0:
        return {METHOD_IP: 0.0, METHOD_ID_PROB: 0.0, METHOD_ONE_MINUS_KM: 0.0,
                METHOD_ID_PROB_CR: 0.0, METHOD_AALEN_JOHANSEN: 0.0}
    n_ev = float(view.cum_events[j])
    n_comp = float(view.cum_competing[j])
    pt = view.person_time(tau)
    return {
        METHOD_IP: n_ev / n,
        METHOD_ID_PROB: 1.0 - math.exp(-(n_ev / pt) * tau),
        METHOD_ONE_MINUS_KM: float(view.cif_km[j]),
        METHOD_ID_PROB_CR: _id_prob_cr_value(n_ev, n_comp, pt, tau),
        METHOD_AALEN_JOHANSEN: float(view.cif_event[j]),
    }

"""Follow-up horizons and the five-rule evaluation-time grid.

Two ways of quantifying follow-up are combined: the largest observed time per
group (any status), and empirical-distribution quantiles of the observed
times.  Group comparisons evaluate each estimator under five rules:

    tau_group_max   each group at its own maximum observed time
    tau_min         both groups at min(tau_A, tau_B)
    tau_p30/60/90   both groups at min over groups of the p-quantile time
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

P_GRID = (0.3, 0.6, 0.9)
TAU_RULES = ("tau_group_max", "tau_min", "tau_p30", "tau_p60", "tau_p90")
_RULE_TO_P = {"tau_p30": 0.3, "tau_p60": 0.6, "tau_p90": 0.9}


@dataclass(frozen=True)
class FollowUpGrid:
    """Per-group maxima and shared quantile horizons, in days."""

    tau_A: float
    tau_B: float
    tau_min: float
    quantile_taus: dict  # p -> min over groups of the group p-quantile time

    def resolve(self, rule: str, group: str) -> float:
        """Evaluation time for one rule and one group."""
        if rule == "tau_group_max":
            return self.tau_A if group == "A" else self.tau_B
        if rule == "tau_min":
            return self.tau_min
        if rule in _RULE_TO_P:
            return self.quantile_taus[_RULE_TO_P[rule]]
        raise ValueError(f"unknown tau rule {rule!r}")

    def to_dict(self):
        return {"tau_A": self.tau_A, "tau_B": self.tau_B, "tau": self.tau_min,
                "tau_p30": self.quantile_taus[0.3],
                "tau_p60": self.quantile_taus[0.6],
                "tau_p90": self.quantile_taus[0.9]}


def max_followup_time(times) -> float:
    """Largest observed time in a group, irrespective of event status."""
    arr = np.asarray(times, dtype=float)
    if arr.size == 0:
        raise ValidationError("no observations")
    return float(arr.max())


def quantile_followup_time(times, p: float) -> float:
    """Smallest observed time t with (number of observed times <= t)/n >= p.

    The empirical distribution uses all observed times irrespective of
    status, so the returned value is always an element of the observed-time
    multiset.  p=1 returns the group maximum.
    """
    if not 0 < p <= 1:
        raise ValidationError(f"p must be in (0, 1], got {p}")
    arr = np.sort(np.asarray(times, dtype=float))
    if arr.size == 0:
        raise ValidationError("no observations")
    ranks = np.arange(1, arr.size + 1) / arr.size
    idx = int(np.searchsorted(ranks, p, side="left"))
    return float(arr[min(idx, arr.size - 1)])


def followup_grid(times_A, times_B, ps=P_GRID) -> FollowUpGrid:
    """Grid from the raw observed-time arrays of the two groups."""
    tau_A = max_followup_time(times_A)
    tau_B = max_followup_time(times_B)
    qt = {p: min(quantile_followup_time(times_A, p), quantile_followup_time(times_B, p))
          for p in ps}
    return FollowUpGrid(tau_A, tau_B, min(tau_A, tau_B), qt)


def evaluation_times(dataset) -> FollowUpGrid:
    """Grid for an analysis dataset; both groups must be nonempty."""
    times_A, _ = dataset.group_arrays("A")
    times_B, _ = dataset.group_arrays("B")
    return followup_grid(times_A, times_B)

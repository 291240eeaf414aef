"""Synthetic trials from a constant-hazard competing-risks model.

Per patient, a latent first-event time is exponential with rate equal to the
sum of the AE, hard-competing and soft-competing hazards, and the event type
is multinomial with probabilities proportional to the three hazards.  The
observation is censored at the patient's censoring time when that comes
first.

Censoring kinds
---------------
``none``            no censoring
``administrative``  end-of-trial censoring with uniform staggered entry over
                    (0, C]: each patient's censoring time is uniform on (0, C]
``fixed``           every patient censored at exactly C
``exponential``     random dropout with rate kappa
``mixed``           the minimum of an administrative and an exponential draw

With known hazards the true cumulative AE probability is available in closed
form, which makes the simulator the verification oracle for the estimators.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .estimators import CountingProcessView
from .followup import TAU_RULES, followup_grid
from .trial_data import EventRecord, TrialDataset

CENSORING_KINDS = ("none", "administrative", "fixed", "exponential", "mixed")


@dataclass(frozen=True)
class GroupSimConfig:
    """Hazards (per day) and censoring of one treatment group."""

    n: int
    ae_hazard: float
    hard_hazard: float = 0.0
    soft_hazard: float = 0.0
    censoring: str = "none"
    censor_time: float | None = None   # C, days
    censor_rate: float | None = None   # kappa, per day

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("group size must be >= 1")
        if min(self.ae_hazard, self.hard_hazard, self.soft_hazard) < 0:
            raise ValueError("hazards must be nonnegative")
        if self.ae_hazard + self.hard_hazard + self.soft_hazard <= 0:
            raise ValueError("total hazard must be positive")
        if self.censoring not in CENSORING_KINDS:
            raise ValueError(f"unknown censoring kind {self.censoring!r}")
        if self.censoring in ("administrative", "fixed", "mixed") and not self.censor_time:
            raise ValueError(f"censoring {self.censoring!r} needs censor_time")
        if self.censoring in ("exponential", "mixed") and not self.censor_rate:
            raise ValueError(f"censoring {self.censoring!r} needs censor_rate")


@dataclass(frozen=True)
class SimConfig:
    groups: dict = field(default_factory=dict)  # "A"/"B" -> GroupSimConfig
    seed: int = 0
    ae_id: int = 1
    savvy_id: str = "SIM"
    rounding: str = "none"  # "none" | "ceil" (integer days, stresses ties)

    @staticmethod
    def from_json(text: str) -> "SimConfig":
        raw = json.loads(text)
        groups = {g: GroupSimConfig(**cfg) for g, cfg in raw["groups"].items()}
        return SimConfig(groups=groups, seed=int(raw.get("seed", 0)),
                         ae_id=int(raw.get("ae_id", 1)),
                         savvy_id=str(raw.get("savvy_id", "SIM")),
                         rounding=str(raw.get("rounding", "none")))


def _stream(seed, index):
    bitgen = np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF, 1],
                              counter=[0, 0, 0, index])
    return np.random.Generator(bitgen)


def _censor_times(cfg: GroupSimConfig, rng, n):
    inf = np.full(n, np.inf)
    if cfg.censoring == "none":
        return inf
    if cfg.censoring == "fixed":
        return np.full(n, float(cfg.censor_time))
    if cfg.censoring == "administrative":
        return (1.0 - rng.random(n)) * cfg.censor_time  # uniform on (0, C]
    if cfg.censoring == "exponential":
        return rng.exponential(1.0 / cfg.censor_rate, n)
    admin = (1.0 - rng.random(n)) * cfg.censor_time
    drop = rng.exponential(1.0 / cfg.censor_rate, n)
    return np.minimum(admin, drop)


def _simulate_group(cfg: GroupSimConfig, rng, group, ae_id, rounding):
    total = cfg.ae_hazard + cfg.hard_hazard + cfg.soft_hazard
    latent = rng.exponential(1.0 / total, cfg.n)
    u = rng.random(cfg.n)
    p_ae = cfg.ae_hazard / total
    p_hard = cfg.hard_hazard / total
    etype = np.where(u < p_ae, 1, np.where(u < p_ae + p_hard, 2, 3))
    cens = _censor_times(cfg, rng, cfg.n)
    observed = np.minimum(latent, cens)
    etype = np.where(cens < latent, 0, etype)
    if rounding == "ceil":
        observed = np.ceil(observed)
    records = []
    for i in range(cfg.n):
        records.append(EventRecord(ae_id, f"{group}{i + 1:05d}", group,
                                   float(observed[i]), int(etype[i])))
    return records


def simulate_trial(config: SimConfig) -> TrialDataset:
    """One synthetic trial in the standard five-column structure.

    Reproducible: the same config (including seed) yields the identical
    dataset; each group uses its own counter-based stream.
    """
    records = []
    for idx, group in enumerate(sorted(config.groups)):
        rng = _stream(config.seed, idx)
        records.extend(_simulate_group(config.groups[group], rng, group,
                                       config.ae_id, config.rounding))
    return TrialDataset(config.savvy_id, tuple(records),
                        group_labels={"A": "A", "B": "B"})


def true_cif(ae_hazard: float, competing_hazard: float, t: float) -> float:
    """Closed-form cumulative AE probability under constant hazards.

    alpha/(alpha+beta) * (1 - exp(-(alpha+beta) t)); 0 when alpha is 0.
    """
    if ae_hazard == 0:
        return 0.0
    total = ae_hazard + competing_hazard
    return ae_hazard / total * (1.0 - math.exp(-total * t))


_BIAS_METHODS = ("ip", "id_prob", "one_minus_km", "id_prob_cr", "aalen_johansen")


def bias_benchmark(config: SimConfig, replications: int, rules=TAU_RULES,
                   methods=_BIAS_METHODS):
    """Monte-Carlo bias of each probability estimator against the known truth.

    Replications use independent counter-based streams.  For each method,
    follow-up rule and group, the estimate minus the true cumulative AE
    probability at the replicate's own evaluation time is averaged over
    replications; rows carry the Monte-Carlo standard error.

    The truth is computed for the all-events competing definition, i.e. with
    competing hazard = hard + soft.
    """
    if replications < 1:
        raise ValueError("replications must be >= 1")
    from .estimators import probability_values

    groups = sorted(config.groups)
    diffs = {(m, rule, g): [] for m in methods for rule in rules for g in groups}
    for rep in range(replications):
        times, codes = {}, {}
        for idx, g in enumerate(groups):
            rng = _stream(config.seed, (rep + 1) * len(groups) + idx)
            recs = _simulate_group(config.groups[g], rng, g, config.ae_id,
                                   config.rounding)
            times[g] = np.array([r.time for r in recs], float)
            raw = np.array([r.event_type for r in recs], np.int64)
            codes[g] = np.where(raw == 3, 2, raw)  # all-events remapping
        grid = followup_grid(times["A"], times["B"])
        for g in groups:
            cfg = config.groups[g]
            view = CountingProcessView(times[g], codes[g], g)
            for rule in rules:
                tau = grid.resolve(rule, g)
                truth = true_cif(cfg.ae_hazard, cfg.hard_hazard + cfg.soft_hazard, tau)
                vals = probability_values(view, tau)
                for m in methods:
                    diffs[(m, rule, g)].append(vals[m] - truth)

    rows = []
    for (m, rule, g), d in diffs.items():
        arr = np.asarray(d)
        mc_se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else float("nan")
        rows.append({"method": m, "tau_label": rule, "group": g,
                     "mean_bias": float(arr.mean()), "mc_se": mc_se,
                     "replications": replications})
    return rows

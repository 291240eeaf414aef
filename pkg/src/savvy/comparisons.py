"""Probability-scale group comparisons and the full per-trial result table.

Risk differences and relative risks are formed for every probability-scale
estimator at every follow-up rule.  ``compare_all`` assembles the complete
per-trial grid over event schemes, follow-up rules and methods: one-sample
estimates, two-sample comparisons, hazard-ratio comparisons, and bootstrap
variances for every comparator-vs-benchmark log-ratio of the planned method
comparisons.  The grid never aborts on a degenerate cell; degeneracy is
recorded per cell.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .bootstrap import BootstrapSpec, bootstrap_matrix, column_variances, derive_seed
from .constants import FORMAT_VERSION, Z975
from .errors import ValidationError
from .estimators import (ESTIMATOR_FUNCS, METHOD_AALEN_JOHANSEN, METHOD_ID_PROB_CR,
                         METHOD_IP, METHOD_ONE_MINUS_KM, PROBABILITY_METHODS,
                         CountingProcessView, Estimate, aalen_johansen, build_view,
                         incidence_density, nelson_aalen, probability_values)
from .followup import TAU_RULES, evaluation_times, followup_grid
from .hazard import (KIND_COX, KIND_ID_RATIO, KIND_NA_RATIO, HazardRatioResult,
                     cox_fit_arrays, cox_two_sample, id_log_ratio, na_log_ratio)
from .trial_data import (ALL_EVENTS, DEATH_ONLY, SCHEMES, AnalysisDataset,
                         apply_event_scheme, describe)

# Planned probability comparisons: benchmark and comparators per scheme.
PROB_PAIRS = {
    "all_events": (METHOD_AALEN_JOHANSEN,
                   ("ip", "id_prob", "one_minus_km", "id_prob_cr")),
    "death_only": (METHOD_AALEN_JOHANSEN,
                   ("ip", "id_prob", "one_minus_km", "id_prob_cr")),
    "composite_all_events": (METHOD_ONE_MINUS_KM, (METHOD_IP,)),
    "composite_death_only": (METHOD_ONE_MINUS_KM, (METHOD_IP,)),
}
HAZARD_COMPARATORS = (KIND_ID_RATIO, KIND_NA_RATIO)
AJ_CONTRAST_PAIR = "aalen_johansen@death_only/aalen_johansen@all_events"


@dataclass(frozen=True)
class ComparisonResult:
    """A two-sample risk difference or relative risk with its 95% CI.

    ``variance`` is on the difference scale for RD and on the log scale for
    RR.
    """

    method: str
    measure: str  # "RD" or "RR"
    estimate: float
    variance: float
    ci_low: float
    ci_high: float
    tau_label: str = ""
    scheme: str = ""
    degenerate: bool = False


def _check_pair(q_a: Estimate, q_b: Estimate):
    if q_a.method != q_b.method or q_a.scheme != q_b.scheme \
            or q_a.tau_label != q_b.tau_label or q_a.target != q_b.target:
        raise ValueError(f"mismatched estimate metadata: {q_a} vs {q_b}")
    if (q_a.group, q_b.group) != ("A", "B"):
        raise ValueError("comparisons expect the (A, B) group pair in that order")


def risk_difference(q_a: Estimate, q_b: Estimate) -> ComparisonResult:
    """Risk difference q_A - q_B with variance s_A^2 + s_B^2 and normal CI."""
    _check_pair(q_a, q_b)
    est = q_a.value - q_b.value
    var = q_a.variance + q_b.variance
    half = Z975 * math.sqrt(var)
    return ComparisonResult(q_a.method, "RD", est, var, est - half, est + half,
                            tau_label=q_a.tau_label, scheme=q_a.scheme,
                            degenerate=q_a.degenerate or q_b.degenerate)


def relative_risk(q_a: Estimate, q_b: Estimate) -> ComparisonResult:
    """Relative risk q_A / q_B with log-scale delta-method variance.

    The log-scale variance is s_A^2/q_A^2 + s_B^2/q_B^2 and the CI is
    RR * exp(+-z * sigma).  A zero denominator yields an undefined result and
    a zero numerator a point estimate 0 with undefined CI; both are flagged.
    """
    _check_pair(q_a, q_b)
    nan = float("nan")
    if q_b.value == 0:
        return ComparisonResult(q_a.method, "RR", nan, nan, nan, nan,
                                tau_label=q_a.tau_label, scheme=q_a.scheme,
                                degenerate=True)
    rr = q_a.value / q_b.value
    if q_a.value == 0:
        return ComparisonResult(q_a.method, "RR", 0.0, nan, nan, nan,
                                tau_label=q_a.tau_label, scheme=q_a.scheme,
                                degenerate=True)
    log_var = q_a.variance / q_a.value**2 + q_b.variance / q_b.value**2
    half = Z975 * math.sqrt(log_var)
    return ComparisonResult(q_a.method, "RR", rr, log_var,
                            rr * math.exp(-half), rr * math.exp(half),
                            tau_label=q_a.tau_label, scheme=q_a.scheme,
                            degenerate=q_a.degenerate or q_b.degenerate)


# ---------------------------------------------------------------------------
# statistic factories for the generic bootstrap engine
# ---------------------------------------------------------------------------

def estimator_statistic(method, group, rule, target="event"):
    """Statistic functional: one estimator value, grid re-derived per call."""
    def stat(dataset):
        grid = evaluation_times(dataset)
        view = build_view(dataset, group)
        tau = grid.resolve(rule, group)
        if method == METHOD_AALEN_JOHANSEN:
            return aalen_johansen(view, tau, which=target).value
        return probability_values(view, tau)[method]
    return stat


def log_ratio_statistic(comparator, benchmark, group, rule):
    """Statistic functional: log(comparator / benchmark) on the same data.

    NaN (a degenerate replicate) when either value is non-positive.
    """
    def stat(dataset):
        grid = evaluation_times(dataset)
        view = build_view(dataset, group)
        vals = probability_values(view, grid.resolve(rule, group))
        a, b = vals[comparator], vals[benchmark]
        return math.log(a / b) if a > 0 and b > 0 else float("nan")
    return stat


def comparison_statistic(method, rule, measure="RD"):
    """Statistic functional: the RD, or log RR, of one probability method."""
    def stat(dataset):
        grid = evaluation_times(dataset)
        v_a = probability_values(build_view(dataset, "A"), grid.resolve(rule, "A"))[method]
        v_b = probability_values(build_view(dataset, "B"), grid.resolve(rule, "B"))[method]
        if measure == "RD":
            return v_a - v_b
        return math.log(v_a / v_b) if v_a > 0 and v_b > 0 else float("nan")
    return stat


# ---------------------------------------------------------------------------
# per-scheme replicate context and statistic components
# ---------------------------------------------------------------------------

def _scheme_context(groups, rules, targets, frozen_grid=None):
    """All statistic ingredients of one (re)sample of one scheme."""
    t_a, c_a = groups["A"]
    t_b, c_b = groups["B"]
    grid = frozen_grid if frozen_grid is not None else followup_grid(t_a, t_b)
    view_a = CountingProcessView(t_a, c_a, "A")
    view_b = CountingProcessView(t_b, c_b, "B")
    vals = {}
    taus = {}
    for rule in rules:
        tau_a, tau_b = grid.resolve(rule, "A"), grid.resolve(rule, "B")
        taus[rule] = (tau_a, tau_b)
        for view, tau, g in ((view_a, tau_a, "A"), (view_b, tau_b, "B")):
            for m, v in probability_values(view, tau).items():
                vals[(m, rule, g)] = v
            vals[("aj_competing", rule, g)] = view._at(view.cif_competing, tau)

    cox = {}
    times = np.concatenate([t_a, t_b])
    codes = np.concatenate([c_a, c_b])
    in_a = np.concatenate([np.ones(t_a.size, bool), np.zeros(t_b.size, bool)])
    shared = grid.tau_min
    t_trunc = np.minimum(times, shared)
    for target in targets:
        code = 1 if target == "event" else 2
        status = (codes == code) & (times <= shared)
        if not status.any():
            cox[target] = float("nan")
        else:
            fit = cox_fit_arrays(t_trunc, status, in_a)
            cox[target] = fit["beta"] if fit["converged"] else float("nan")

    ratios = {}
    for target in targets:
        for rule in rules:
            tau_a, tau_b = taus[rule]
            lr, _, deg = id_log_ratio(view_a, view_b, tau_a, tau_b, target)
            ratios[(KIND_ID_RATIO, target, rule)] = float("nan") if deg else lr
            lr, _, deg = na_log_ratio(view_a, view_b, tau_a, tau_b, target)
            ratios[(KIND_NA_RATIO, target, rule)] = float("nan") if deg else lr
    return {"vals": vals, "cox": cox, "ratio": ratios, "grid": grid}


def _safe_log_ratio(a, b):
    return math.log(a / b) if a > 0 and b > 0 else float("nan")


def _value_key(method, target):
    return "aj_competing" if (method == METHOD_AALEN_JOHANSEN and target == "competing") \
        else method


def _scheme_components(scheme, rules, targets):
    """Ordered statistic components of one scheme's bootstrap pass."""
    components = []

    def add(sid, extract):
        components.append({"sid": sid, "extract": extract})

    for target in targets:
        for rule in rules:
            for g in ("A", "B"):
                key = _value_key(METHOD_AALEN_JOHANSEN, target)
                add(f"aalen_johansen:{target}:{g}:{rule}",
                    lambda ctx, key=key, rule=rule, g=g: ctx["vals"][(key, rule, g)])
    for rule in rules:
        for g in ("A", "B"):
            add(f"id_prob_cr:event:{g}:{rule}",
                lambda ctx, rule=rule, g=g: ctx["vals"][(METHOD_ID_PROB_CR, rule, g)])

    benchmark, comparators = PROB_PAIRS[scheme]
    for comp in comparators:
        for rule in rules:
            for g in ("A", "B"):
                add(f"logratio:{comp}/{benchmark}:{g}:{rule}",
                    lambda ctx, comp=comp, bench=benchmark, rule=rule, g=g:
                    _safe_log_ratio(ctx["vals"][(comp, rule, g)],
                                    ctx["vals"][(bench, rule, g)]))

    for kind in HAZARD_COMPARATORS:
        for target in targets:
            for rule in rules:
                add(f"loghrdiff:{kind}/cox:{target}:{rule}",
                    lambda ctx, kind=kind, target=target, rule=rule:
                    ctx["ratio"][(kind, target, rule)] - ctx["cox"][target])
    return components


def _run_pass(groups, spec, kernel_ctx, components, workers):
    """Bootstrap one pass; returns {sid: (variance, n_valid, n_degenerate)}."""
    def kernel(resampled):
        ctx = kernel_ctx(resampled)
        return [c["extract"](ctx) for c in components]

    values = bootstrap_matrix(groups, spec, kernel, len(components), workers=workers)
    variance, n_valid, n_deg = column_variances(values)
    return {c["sid"]: (variance[j], int(n_valid[j]), int(n_deg[j]))
            for j, c in enumerate(components)}


# ---------------------------------------------------------------------------
# result table
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrialResultTable:
    """The aggregated per-trial result grid, serializable to JSON.

    Contains no patient-level rows; treatment groups appear only as the
    canonical codes "A" and "B".
    """

    savvy_id: str
    payload: dict

    def scheme_block(self, ae_id, scheme):
        for ae in self.payload["aes"]:
            if ae["ae_id"] == ae_id:
                return ae["schemes"][scheme]
        raise KeyError(f"ae_id {ae_id} not in table")

    def estimate(self, ae_id, scheme, method, group, tau_label, target="event"):
        for e in self.scheme_block(ae_id, scheme)["estimates"]:
            if (e["method"], e["group"], e["tau_label"], e["target"]) == \
                    (method, group, tau_label, target):
                return e
        raise KeyError(f"no estimate {method}/{group}/{tau_label}/{target}")

    def comparison(self, ae_id, scheme, method, measure, tau_label):
        for c in self.scheme_block(ae_id, scheme)["comparisons"]:
            if (c["method"], c["measure"], c["tau_label"]) == (method, measure, tau_label):
                return c
        raise KeyError(f"no comparison {method}/{measure}/{tau_label}")

    def hazard_ratio(self, ae_id, scheme, kind, target, tau_label):
        for h in self.scheme_block(ae_id, scheme)["hazard_ratios"]:
            if (h["kind"], h["target"], h["tau_label"]) == (kind, target, tau_label):
                return h
        raise KeyError(f"no hazard ratio {kind}/{target}/{tau_label}")

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.payload), indent=2, sort_keys=True,
                          allow_nan=False) + "\n"

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    return obj


def _estimate_dict(est: Estimate) -> dict:
    return {"method": est.method, "scheme": est.scheme, "group": est.group,
            "tau_label": est.tau_label, "tau_days": est.tau, "value": est.value,
            "variance": est.variance, "variance_source": est.variance_source,
            "degenerate": est.degenerate, "target": est.target}


def _comparison_dict(c: ComparisonResult) -> dict:
    return {"method": c.method, "measure": c.measure, "scheme": c.scheme,
            "tau_label": c.tau_label, "estimate": c.estimate, "variance": c.variance,
            "ci_low": c.ci_low, "ci_high": c.ci_high, "degenerate": c.degenerate}


def _hazard_dict(h) -> dict:
    return {"kind": h.kind, "target": h.target, "scheme": h.scheme,
            "tau_label": h.tau_label, "log_hr": h.log_hr, "var_log_hr": h.var_log_hr,
            "ci_low": h.ci_low, "ci_high": h.ci_high, "converged": h.converged,
            "degenerate": h.degenerate, "diagnostic": h.diagnostic}


# ---------------------------------------------------------------------------
# full grid assembly
# ---------------------------------------------------------------------------

def _scheme_block(analysis: AnalysisDataset, spec, workers, zero_correction):
    groups = {"A": analysis.group_arrays("A"), "B": analysis.group_arrays("B")}
    targets = ("event", "competing") if analysis.has_competing else ("event",)
    rules = TAU_RULES
    grid = followup_grid(groups["A"][0], groups["B"][0])
    ctx0 = _scheme_context(groups, rules, targets, frozen_grid=grid)

    components = _scheme_components(analysis.scheme, rules, targets)
    boot = {}
    if spec is not None:
        frozen = grid if spec.frozen_tau else None
        boot = _run_pass(groups, spec,
                         lambda g: _scheme_context(g, rules, targets, frozen_grid=frozen),
                         components, workers)

    # one-sample estimates, with bootstrap variances for the two methods
    # lacking closed forms
    view = {"A": build_view(analysis, "A"), "B": build_view(analysis, "B")}
    estimates = []
    for rule in rules:
        for g in ("A", "B"):
            tau = grid.resolve(rule, g)
            for method, func in ESTIMATOR_FUNCS.items():
                est = func(view[g], tau, tau_label=rule)
                sid = None
                if method == METHOD_AALEN_JOHANSEN:
                    sid = f"aalen_johansen:event:{g}:{rule}"
                elif method == METHOD_ID_PROB_CR:
                    sid = f"id_prob_cr:event:{g}:{rule}"
                if sid is not None and sid in boot:
                    var = boot[sid][0]
                    est = est.with_variance(var if math.isfinite(var) else float("nan"))
                estimates.append(est)
            if analysis.has_competing:
                estimates.append(incidence_density(view[g], tau, "competing", rule))
                estimates.append(nelson_aalen(view[g], tau, "competing", rule))
                aj_c = aalen_johansen(view[g], tau, which="competing", tau_label=rule)
                sid = f"aalen_johansen:competing:{g}:{rule}"
                if sid in boot:
                    var = boot[sid][0]
                    aj_c = aj_c.with_variance(var if math.isfinite(var) else float("nan"))
                estimates.append(aj_c)

    by_key = {(e.method, e.group, e.tau_label, e.target): e for e in estimates}
    comparisons = []
    for method in PROBABILITY_METHODS:
        for rule in rules:
            q_a = by_key[(method, "A", rule, "event")]
            q_b = by_key[(method, "B", rule, "event")]
            comparisons.append(risk_difference(q_a, q_b))
            comparisons.append(relative_risk(q_a, q_b))

    hazard_results = []
    for target in targets:
        try:
            hazard_results.append(cox_two_sample(analysis, target, tau=grid.tau_min,
                                                 tau_label="tau_min"))
        except ValueError as exc:
            hazard_results.append(_absent_hazard(KIND_COX, target, analysis.scheme,
                                                 "tau_min", str(exc)))
        for rule in rules:
            tau_a, tau_b = grid.resolve(rule, "A"), grid.resolve(rule, "B")
            lr, var, deg = id_log_ratio(view["A"], view["B"], tau_a, tau_b, target,
                                        zero_correction)
            hazard_results.append(_ratio_result(KIND_ID_RATIO, target, lr, var, deg,
                                                analysis.scheme, rule))
            lr, var, deg = na_log_ratio(view["A"], view["B"], tau_a, tau_b, target)
            hazard_results.append(_ratio_result(KIND_NA_RATIO, target, lr, var, deg,
                                                analysis.scheme, rule))
    cox_by_target = {h.target: h for h in hazard_results if h.kind == KIND_COX}

    log_ratios = []
    benchmark, comparators = PROB_PAIRS[analysis.scheme]
    for comp in comparators:
        for rule in rules:
            for g in ("A", "B"):
                sid = f"logratio:{comp}/{benchmark}:{g}:{rule}"
                bench_v = ctx0["vals"][(benchmark, rule, g)]
                comp_v = ctx0["vals"][(comp, rule, g)]
                log_ratios.append(_entry(
                    sid, "probability", f"{comp}/{benchmark}", comp, benchmark,
                    "event", g, analysis.scheme, rule,
                    _safe_log_ratio(comp_v, bench_v), boot.get(sid), spec,
                    bench_v, comp_v,
                    {"ae_frequency": ctx0["vals"][(METHOD_AALEN_JOHANSEN, rule, g)],
                     "competing_frequency": ctx0["vals"][("aj_competing", rule, g)]}))
    for kind in HAZARD_COMPARATORS:
        for target in targets:
            cox0 = cox_by_target[target]
            cox_lhr = cox0.log_hr if cox0.converged else float("nan")
            for rule in rules:
                sid = f"loghrdiff:{kind}/cox:{target}:{rule}"
                ratio0 = ctx0["ratio"][(kind, target, rule)]
                key = _value_key(METHOD_AALEN_JOHANSEN, target)
                freq = 0.5 * (ctx0["vals"][(key, rule, "A")] + ctx0["vals"][(key, rule, "B")])
                log_ratios.append(_entry(
                    sid, "hazard", f"{kind}/cox", kind, KIND_COX, target, None,
                    analysis.scheme, rule, ratio0 - cox_lhr, boot.get(sid), spec,
                    cox_lhr, ratio0, {"ae_frequency": freq}))

    return {"followup": grid.to_dict(),
            "descriptives": describe(analysis).to_dict(),
            "estimates": [_estimate_dict(e) for e in estimates],
            "comparisons": [_comparison_dict(c) for c in comparisons],
            "hazard_ratios": [_hazard_dict(h) for h in hazard_results],
            "log_ratios": log_ratios}


def _entry(sid, kind, pair, comparator, benchmark, target, group, scheme, rule,
           theta_hat, boot_cell, spec, benchmark_value, comparator_value, moderators):
    variance, n_valid, n_deg = (None, 0, 0) if boot_cell is None else boot_cell
    return {"statistic_id": sid, "kind": kind, "pair": pair,
            "comparator": comparator, "benchmark": benchmark, "target": target,
            "group": group, "scheme": scheme, "tau_label": rule,
            "theta_hat": theta_hat, "variance": variance,
            "n_valid": n_valid, "n_degenerate": n_deg,
            "B": spec.replicates if spec else 0,
            "seed": spec.master_seed if spec else None,
            "benchmark_value": benchmark_value, "comparator_value": comparator_value,
            "moderators": moderators}


def _ratio_result(kind, target, log_hr, var, degenerate, scheme, rule):
    if degenerate or not math.isfinite(log_hr):
        return HazardRatioResult(kind, target, float("nan"), float("nan"),
                                 float("nan"), float("nan"), scheme=scheme,
                                 tau_label=rule, degenerate=True)
    half = Z975 * math.sqrt(var)
    return HazardRatioResult(kind, target, log_hr, var,
                             math.exp(log_hr - half), math.exp(log_hr + half),
                             scheme=scheme, tau_label=rule)


def _absent_hazard(kind, target, scheme, rule, diagnostic):
    nan = float("nan")
    return HazardRatioResult(kind, target, nan, nan, nan, nan, scheme=scheme,
                             tau_label=rule, converged=False, degenerate=True,
                             diagnostic=diagnostic)


def _contrast_components(rules):
    components = []
    for target in ("event", "competing"):
        for g in ("A", "B"):
            for rule in rules:
                components.append({
                    "sid": f"ajcontrast:{target}:{g}:{rule}",
                    "extract": lambda ctx, target=target, g=g, rule=rule:
                    _safe_log_ratio(ctx[(DEATH_ONLY, target, rule, g)],
                                    ctx[(ALL_EVENTS, target, rule, g)])})
    return components


def _contrast_context(groups, rules, frozen_grid=None):
    """Aalen-Johansen values under both competing-event definitions.

    ``groups`` carry raw event-type codes 0..3; the two remappings share each
    resample, so the contrast is computed on identical patients.
    """
    t_a, c_a = groups["A"]
    t_b, c_b = groups["B"]
    grid = frozen_grid if frozen_grid is not None else followup_grid(t_a, t_b)
    ctx = {}
    for scheme in (ALL_EVENTS, DEATH_ONLY):
        soft_to = 2 if scheme == ALL_EVENTS else 0
        for g, (t, c) in (("A", (t_a, c_a)), ("B", (t_b, c_b))):
            view = CountingProcessView(t, np.where(c == 3, soft_to, c), g)
            for rule in rules:
                tau = grid.resolve(rule, g)
                ctx[(scheme, "event", rule, g)] = view._at(view.cif_event, tau)
                ctx[(scheme, "competing", rule, g)] = view._at(view.cif_competing, tau)
    return ctx


def _contrast_block(raw_groups, spec, workers):
    rules = TAU_RULES
    grid = followup_grid(raw_groups["A"][0], raw_groups["B"][0])
    ctx0 = _contrast_context(raw_groups, rules, frozen_grid=grid)
    components = _contrast_components(rules)
    boot = {}
    if spec is not None:
        frozen = grid if spec.frozen_tau else None
        boot = _run_pass(raw_groups, spec,
                         lambda g: _contrast_context(g, rules, frozen_grid=frozen),
                         components, workers)
    entries = []
    for comp in components:
        _, target, g, rule = comp["sid"].split(":")
        bench_v = ctx0[(ALL_EVENTS, target, rule, g)]
        comp_v = ctx0[(DEATH_ONLY, target, rule, g)]
        entries.append(_entry(comp["sid"], "aj_scheme_contrast", AJ_CONTRAST_PAIR,
                              "aalen_johansen@death_only", "aalen_johansen@all_events",
                              target, g, "cross_scheme", rule,
                              _safe_log_ratio(comp_v, bench_v), boot.get(comp["sid"]),
                              spec, bench_v, comp_v,
                              {"ae_frequency": bench_v}))
    return entries


def compare_all(trial, *, bootstrap: BootstrapSpec | None = None, workers: int = 1,
                schemes=SCHEMES, zero_correction: bool = False, indication=None,
                include_scheme_contrast: bool = True) -> TrialResultTable:
    """The full per-trial result grid over AEs, schemes, rules and methods.

    When a bootstrap spec is given, one resampling pass per (AE, scheme) and
    one per AE for the cross-scheme contrast are run; pass seeds are derived
    deterministically from the master seed so output files are byte-stable.
    """
    ae_ids = trial.ae_ids()
    if not ae_ids:
        raise ValidationError("trial has no validated records")
    for ae_id in ae_ids:
        recs = trial.records_for(ae_id)
        for g in ("A", "B"):
            if not any(r.group == g for r in recs):
                raise ValidationError(f"ae_id {ae_id}: group {g} is empty")

    payload = {
        "format_version": FORMAT_VERSION,
        "savvy_id": trial.savvy_id,
        "indication": indication,
        "z_0975": Z975,
        "tau_rules": list(TAU_RULES),
        "cox_time_horizon": "tau_min",
        "zero_correction": zero_correction,
        "bootstrap": None if bootstrap is None else {
            "B": bootstrap.replicates, "seed": bootstrap.master_seed,
            "stratified": bootstrap.stratified, "frozen_tau": bootstrap.frozen_tau},
        "aes": [],
    }

    pass_index = 0
    for ae_id in ae_ids:
        ae_block = {"ae_id": ae_id, "schemes": {}, "aj_scheme_contrast": []}
        for scheme in schemes:
            analysis = apply_event_scheme(trial, scheme, ae_id)
            spec = _pass_spec(bootstrap, pass_index)
            pass_index += 1
            ae_block["schemes"][scheme] = _scheme_block(analysis, spec, workers,
                                                        zero_correction)
        if include_scheme_contrast:
            recs = trial.records_for(ae_id)
            raw_groups = {}
            for g in ("A", "B"):
                sub = [r for r in recs if r.group == g]
                raw_groups[g] = (np.array([r.time for r in sub], float),
                                 np.array([r.event_type for r in sub], np.int64))
            spec = _pass_spec(bootstrap, pass_index)
            pass_index += 1
            ae_block["aj_scheme_contrast"] = _contrast_block(raw_groups, spec, workers)
        payload["aes"].append(ae_block)
    return TrialResultTable(trial.savvy_id, payload)


def _pass_spec(bootstrap, pass_index):
    if bootstrap is None:
        return None
    return BootstrapSpec(replicates=bootstrap.replicates,
                         master_seed=derive_seed(bootstrap.master_seed, pass_index),
                         stratified=bootstrap.stratified,
                         frozen_tau=bootstrap.frozen_tau)

"""One runner per registered inequality id.

Each runner builds its corpus, evaluates the ratio operation across the
scale sweep, and aggregates through ``estimate_constant``.  Grid sizes come
from per-suite profiles (echoed by the config layer): the pair-enumeration
cost pins the sharp suite to d=2, the classical-constant gate pins the Hardy
suite to d=3, the annular sweep needs n=65, and the trace suites live on a
time slab.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .corpus import build_corpus, near_extremal_case, singular_weight_case
from .grid import (
    GridFunction,
    GridSpec,
    HOMOGENEOUS,
    RadiusSet,
    SpaceTimeGridSpec,
    sample,
    sample_spacetime,
)
from .harness import (
    CaseResult,
    SweepResult,
    VerificationReport,
    counterexample_sweep,
    estimate_constant,
    global_mixed_norm,
    make_case,
    ratio_adams,
    ratio_hardy,
    ratio_sharp_maximal,
    ratio_tail,
    ratio_trace,
    ratio_weighted,
    trace_bundle,
)
from .norms import TraceParams, validate_trace_params
from .singular import ball_mean_map

SMOOTH_KINDS = ("gaussian", "bump", "radial_power_cutoff")


@dataclass(frozen=True)
class SuiteSettings:
    """Resolved knobs a runner needs: grids, seed, scales, thresholds."""

    seed: int
    scale_count: int
    thresholds: dict
    grid: dict  # per-suite resolved grid parameters


def _grid(settings: SuiteSettings) -> GridSpec:
    g = settings.grid
    return GridSpec(g["d"], g["L"], g["n"])


def _slab(settings: SuiteSettings) -> SpaceTimeGridSpec:
    g = settings.grid
    return SpaceTimeGridSpec(GridSpec(g["d"], g["L"], g["n"]), g["t0"], g["t1"], g["m"])


def _lams(settings: SuiteSettings) -> list[float]:
    return [2.0**s for s in range(settings.scale_count)]


# ---------------------------------------------------------------------------


def suite_adams(settings: SuiteSettings) -> VerificationReport:
    grid = _grid(settings)
    p, q, alpha = 2.0, 2.5, 1.0
    corpus = build_corpus(settings.seed,
                          ["gaussian", "bump", "indicator_ball", "radial_power_cutoff"],
                          grid, size=20)
    # the fixed singular weights serve as b, not as f (the potential needs
    # compactly supported densities); two extra bounded-b pairs keep 20 cases
    fs = [c for c in corpus if c.kind != "singular_weight"]
    cases: list[CaseResult] = []
    excluded: list[dict] = []
    cap_flags = []
    for s, lam in enumerate(_lams(settings)):
        b = singular_weight_case(grid, 1.0).materialize(lam)
        b_bounded = corpus[3].materialize(lam)  # the fixed bump, a bounded weight
        for c in fs:
            f = c.materialize(lam)
            lhs, rhs, diag = ratio_adams(b, f, p, q, alpha)
            make_case(c.case_id, lhs, rhs, s, cases, excluded)
        for c in fs[-2:]:
            f = c.materialize(lam)
            lhs, rhs, diag = ratio_adams(b_bounded, f, p, q, alpha)
            cid = c.case_id + "-bounded-b"
            make_case(cid, lhs, rhs, s, cases, excluded)
            if s == 0:
                cap_flags.append({"case_id": cid, **diag["b_norm"]})
    return estimate_constant(
        "adams-2.1", {"p": p, "q": q, "alpha": alpha, "grid": settings.grid},
        cases, excluded, settings.scale_count, settings.thresholds["scale_drift"],
        diagnostics={"cap_limited": cap_flags})


def suite_sharp_max(settings: SuiteSettings) -> VerificationReport:
    grid = _grid(settings)
    alpha = 1.0
    corpus = build_corpus(settings.seed, ["gaussian", "bump", "indicator_ball"],
                          grid, size=20)
    cases: list[CaseResult] = []
    excluded: list[dict] = []
    for s, lam in enumerate(_lams(settings)):
        for c in corpus:
            gf = c.materialize(lam)
            g_nonneg = GridFunction(gf.spec, np.abs(gf.values), gf.support_margin)
            lhs, rhs, _ = ratio_sharp_maximal(g_nonneg, alpha)
            make_case(c.case_id, lhs, rhs, s, cases, excluded)
    return estimate_constant(
        "sharp-max-2.2", {"alpha": alpha, "grid": settings.grid},
        cases, excluded, settings.scale_count, settings.thresholds["scale_drift"])


def suite_weighted_23(settings: SuiteSettings) -> VerificationReport:
    grid = _grid(settings)
    p, q = 2.0, 2.5
    corpus = [c for c in build_corpus(settings.seed, list(SMOOTH_KINDS), grid, size=16)
              if c.kind in SMOOTH_KINDS]
    cases: list[CaseResult] = []
    excluded: list[dict] = []
    for s, lam in enumerate(_lams(settings)):
        b = singular_weight_case(grid, 1.0).materialize(lam)
        for c in corpus:
            u = c.materialize(lam)
            for form in ("gradient", "hessian"):
                lhs, rhs, _ = ratio_weighted(b, u, p, q=q, form=form)
                make_case(f"{c.case_id}-{form}", lhs, rhs, s, cases, excluded)
    return estimate_constant(
        "weighted-2.3", {"p": p, "q": q, "grid": settings.grid},
        cases, excluded, settings.scale_count, settings.thresholds["scale_drift"])


def suite_hardy(settings: SuiteSettings) -> VerificationReport:
    grid = _grid(settings)
    p, r2 = 2.0, 1.25
    corpus = [c for c in build_corpus(settings.seed, ["gaussian", "bump"], grid, size=10)
              if c.kind in SMOOTH_KINDS]
    deltas = [0.3, 0.2, 0.1]
    extremal = [near_extremal_case(grid, dl) for dl in deltas]
    cases: list[CaseResult] = []
    excluded: list[dict] = []
    second_form = []
    near_extremal_ratio = math.nan
    for s, lam in enumerate(_lams(settings)):
        for c in corpus + extremal:
            u = c.materialize(lam)
            lhs, rhs, _ = ratio_hardy(u, p=p)
            make_case(c.case_id, lhs, rhs, s, cases, excluded)
            if s == 0 and c.case_id == f"nearextremal-d{deltas[-1]:g}" and rhs > 0:
                near_extremal_ratio = lhs / rhs
        for c in corpus[:4]:
            u = c.materialize(lam)
            lhs, rhs, _ = ratio_hardy(u, r=r2)
            if s == 0 and rhs > 0:
                second_form.append({"case_id": c.case_id, "ratio": lhs / rhs})
    sharp_bound = (p / (grid.d - p)) ** p
    max_ratio = max(c.ratio for c in cases)
    checks = [
        {"name": "classical-constant", "value": max_ratio,
         "threshold": sharp_bound * 1.05, "ok": bool(max_ratio <= sharp_bound * 1.05)},
        {"name": "near-extremal-reach", "value": near_extremal_ratio,
         "threshold": 3.0, "ok": bool(near_extremal_ratio >= 3.0)},
    ]
    return estimate_constant(
        "hardy-2.4", {"p": p, "r_second_form": r2, "grid": settings.grid},
        cases, excluded, settings.scale_count, settings.thresholds["scale_drift"],
        checks=checks,
        diagnostics={"second_form_ratios": second_form,
                     "near_extremal_deltas": deltas,
                     "near_extremal_ratio": near_extremal_ratio})


def _bhat_curve(b: GridFunction, p_b: float, rho_bs: list[float]) -> list[float]:
    """bhat(rho_b) for every rho_b, through shared per-radius center maps."""
    spec = b.spec
    per_radius = {}
    for rho in sorted(set(rho_bs)):
        radii = [rr for rr in RadiusSet.dyadic(spec, HOMOGENEOUS, rho_max=spec.L).radii
                 if rr < rho * (1 - 1e-12)] + [rho]
        for rr in radii:
            if rr not in per_radius:
                mean_map = ball_mean_map(np.abs(b.values) ** p_b, spec.d, rr / spec.h)
                per_radius[rr] = rr * float(mean_map.max()) ** (1.0 / p_b)
    out = []
    for rho in rho_bs:
        usable = [v for rr, v in per_radius.items() if rr <= rho * (1 + 1e-12)]
        out.append(max(usable))
    return out


def suite_truncated(settings: SuiteSettings) -> VerificationReport:
    grid = _grid(settings)
    d = grid.d
    p_b_small = 2.0  # <= d branch (restriction bound)
    p_b_large = 2.0 * d  # > d branch (equality and smallness law)
    rho_b = 8 * grid.h
    cases: list[CaseResult] = []
    excluded: list[dict] = []
    for s, lam in enumerate(_lams(settings)):
        spec = grid.rescaled(lam)
        b = singular_weight_case(grid, 1.0).materialize(lam)
        rb = rho_b / lam
        bhat = _bhat_curve(b, p_b_small, [rb])[0]
        mask = spec.radius_from_origin() < rb
        b_trunc = np.where(mask, b.values, 0.0)
        for rr in RadiusSet.dyadic(spec, HOMOGENEOUS, rho_max=spec.L / 2).radii:
            mean_map = ball_mean_map(np.abs(b_trunc) ** p_b_small, spec.d, rr / spec.h)
            lhs = rr * float(mean_map.max()) ** (1.0 / p_b_small)
            make_case(f"restriction-r{rr * lam:g}", lhs, bhat, s, cases, excluded)
    # equality at p_b >= d for a bounded weight
    bounded = build_corpus(settings.seed, ["bump"], grid, size=4)[3]
    bb = bounded.materialize()
    radii_eq = RadiusSet.dyadic(grid, HOMOGENEOUS, rho_max=grid.L).radii
    rho_eq = radii_eq[-1]
    bhat_eq = _bhat_curve(bb, p_b_large, [rho_eq])[0]
    cap_val = rho_eq * float(
        ball_mean_map(np.abs(bb.values) ** p_b_large, grid.d, rho_eq / grid.h).max()
    ) ** (1.0 / p_b_large)
    eq_dev = abs(bhat_eq / cap_val - 1.0)
    # smallness law: borderline-integrable weight, slope 1 - d/p_b (+0.02)
    slope_exponent = d / p_b_large - 0.02
    b_slope = singular_weight_case(grid, slope_exponent).materialize()
    rho_sweep = [rr for rr in RadiusSet.dyadic(grid, HOMOGENEOUS, rho_max=grid.L).radii]
    bhats = _bhat_curve(b_slope, p_b_large, rho_sweep)
    slope = float(np.polyfit(np.log(rho_sweep), np.log(bhats), 1)[0])
    target = 1.0 - d / p_b_large
    tol = settings.thresholds.get("truncated_slope_tol", 0.05)
    checks = [
        {"name": "restriction-bound", "value": max(c.ratio for c in cases),
         "threshold": 1.05, "ok": bool(max(c.ratio for c in cases) <= 1.05)},
        {"name": "cap-equality", "value": eq_dev, "threshold": 1e-9,
         "ok": bool(eq_dev <= 1e-9)},
        {"name": "smallness-slope", "value": slope,
         "threshold": [target - tol, target + tol],
         "ok": bool(target - tol <= slope <= target + tol)},
    ]
    return estimate_constant(
        "truncated-2.6",
        {"p_b_small": p_b_small, "p_b_large": p_b_large, "rho_b": rho_b,
         "slope_weight_exponent": slope_exponent, "grid": settings.grid},
        cases, excluded, settings.scale_count, settings.thresholds["scale_drift"],
        checks=checks,
        diagnostics={"bhat_curve": {"rho_b": rho_sweep, "bhat": bhats},
                     "fitted_slope": slope, "slope_target": target})


def suite_weighted_28(settings: SuiteSettings) -> VerificationReport:
    grid = _grid(settings)
    p = 2.0
    rho_b = 8 * grid.h
    corpus = [c for c in build_corpus(settings.seed, list(SMOOTH_KINDS), grid, size=12)
              if c.kind in SMOOTH_KINDS]
    cases: list[CaseResult] = []
    excluded: list[dict] = []
    for s, lam in enumerate(_lams(settings)):
        b = singular_weight_case(grid, 1.0).materialize(lam)
        for c in corpus:
            u = c.materialize(lam)
            for p_b in (2.5, 2.0 * grid.d):
                lhs, rhs, _ = ratio_weighted(b, u, p, p_b=p_b, rho_b=rho_b / lam,
                                             form="truncated")
                make_case(f"{c.case_id}-pb{p_b:g}", lhs, rhs, s, cases, excluded)
    return estimate_constant(
        "weighted-2.8", {"p": p, "rho_b": rho_b, "grid": settings.grid},
        cases, excluded, settings.scale_count, settings.thresholds["scale_drift"])


def suite_counterexample(settings: SuiteSettings) -> SweepResult:
    g = settings.grid
    return counterexample_sweep([0.25, 0.125, 0.0625], p=2.0, d=g["d"], n=g["n"])


# ---------------------------------------------------------------------------
# space-time suites


def _trace_params(d: int) -> TraceParams:
    if d == 2:
        return TraceParams(p=2.0, q=4.0, r=2.0, beta=1.4, gamma=1, mu=1.5)
    return TraceParams(p=2.0, q=4.0, r=2.0, beta=2.0, gamma=1, mu=1.5)


TRACE_EPS = [0.25, 0.5, 1.0]


def _trace_suite(settings: SuiteSettings, inequality_id: str, mode: str,
                 extra_checks=None, extra_diag=None) -> VerificationReport:
    slab = _slab(settings)
    tp = _trace_params(slab.spatial.d)
    corpus = build_corpus(settings.seed, ["heat_extension", "separable_spacetime"],
                          slab, size=10)
    cases: list[CaseResult] = []
    excluded: list[dict] = []
    diag = dict(extra_diag or {})
    for s in range(settings.scale_count):
        lam = 2.0 ** (s / 2.0)  # parabolic dilation, lam^2 in {1, 2, 4}
        for c in corpus:
            u = c.materialize(lam)
            key = (settings.seed, slab.spatial.n, slab.m, slab.t0, c.case_id, s,
                   tp.p, tp.q, tp.beta)
            bundle = trace_bundle(u, tp, cache_key=key)
            for cid, lhs, rhs in ratio_trace(u, tp, TRACE_EPS, mode,
                                             case_id=c.case_id, bundle=bundle):
                make_case(cid, lhs, rhs, s, cases, excluded)
            if mode == "Morrey_full" and s == 0 and c.case_id == corpus[0].case_id:
                diag["holder_quotient"] = holder_quotient(bundle.trace_mag, tp.beta)
    validation = validate_trace_params(slab.spatial.d, tp)
    params = {"p": tp.p, "q": tp.q, "r": tp.r, "beta": tp.beta, "gamma": tp.gamma,
              "mu": tp.mu, "kappa": validation.kappa,
              "epsilon_exponent": validation.epsilon_exponent,
              "eps_list": TRACE_EPS, "grid": settings.grid}
    return estimate_constant(inequality_id, params, cases, excluded,
                             settings.scale_count, settings.thresholds["scale_drift"],
                             checks=list(extra_checks or []), diagnostics=diag)


def holder_quotient(g: GridFunction, beta: float) -> dict:
    """Max |g(x + s e_i) - g(x)| / s^(2-beta) per dyadic separation s.

    Diagnostic only (no threshold): probes the Hoelder continuity the Morrey
    trace bound suggests for beta < 2.
    """
    spec = g.spec
    out = {}
    for k in (1, 2, 4, 8):
        if k >= spec.n:
            break
        s = k * spec.h
        best = 0.0
        for ax in range(spec.d):
            lead = [slice(None)] * spec.d
            lag = [slice(None)] * spec.d
            lead[ax] = slice(k, None)
            lag[ax] = slice(0, spec.n - k)
            diff = np.abs(g.values[tuple(lead)] - g.values[tuple(lag)])
            best = max(best, float(diff.max()))
        out[f"{s:g}"] = best / s ** (2.0 - beta)
    return out


def suite_trace_35(settings: SuiteSettings) -> VerificationReport:
    return _trace_suite(settings, "trace-3.5", "Lr_global")


def suite_trace_local(settings: SuiteSettings) -> VerificationReport:
    return _trace_suite(settings, "trace-local-3.5c", "Lr_local")


def suite_trace_morrey_32(settings: SuiteSettings) -> VerificationReport:
    return _trace_suite(settings, "trace-morrey-3.2", "Morrey_mu")


def suite_trace_morrey_33(settings: SuiteSettings) -> VerificationReport:
    return _trace_suite(settings, "trace-morrey-3.3", "Morrey_full")


def suite_trace_remark(settings: SuiteSettings) -> VerificationReport:
    slab_d = settings.grid["d"]
    tp = _trace_params(slab_d)
    # gamma=1, r=p, mu=kappa: the penalty exponent collapses to (q+2)/(q-2)
    kappa = tp.kappa(slab_d)
    dev = abs(tp.mu / (2.0 - tp.mu) - (tp.q + 2.0) / (tp.q - 2.0))
    checks = [
        {"name": "mu-equals-kappa", "value": abs(tp.mu - kappa), "threshold": 1e-12,
         "ok": bool(abs(tp.mu - kappa) <= 1e-12)},
        {"name": "penalty-exponent", "value": dev, "threshold": 1e-12,
         "ok": bool(dev <= 1e-12)},
    ]
    return _trace_suite(settings, "trace-remark-3.4", "Morrey_mu", extra_checks=checks)


def suite_tail(settings: SuiteSettings) -> VerificationReport:
    slab = _slab(settings)
    sp = slab.spatial
    rho_list = [0.25, 0.5, 1.0]
    s0 = 0.01
    profiles = []
    for i, (gamma, beta) in enumerate([(1.0, 3.0), (1.0, 3.5)]):
        for j, r_hi in enumerate((0.8 * sp.L, 0.9 * sp.L)):
            profiles.append((f"power-g{gamma:g}-b{beta:g}-cut{j}", gamma, beta, r_hi))
    cases: list[CaseResult] = []
    excluded: list[dict] = []
    from .corpus import log_cutoff

    for label, gamma, beta, r_hi in profiles:
        def f(t, *g, beta=beta, r_hi=r_hi):
            r = np.sqrt(sum(x * x for x in g))
            return (s0 + np.maximum(t, 0.0) + r * r) ** (-beta / 2.0) * log_cutoff(
                r, 0.6 * r_hi, r_hi)

        fn = sample_spacetime(slab, f)
        for k, (cid, lhs, rhs) in enumerate(
                ratio_tail(fn, gamma, beta, rho_list, case_id=label)):
            make_case(cid, lhs, rhs, k, cases, excluded)
    # annulus indicator: finiteness only (not parabolically self-similar)
    def f_ann(t, *g):
        r2 = sum(x * x for x in g)
        inner = (t < 0.25) & (r2 < 0.25)
        outer = (t < 2.25) & (r2 < 2.25)
        return (outer & ~inner).astype(np.float64)

    ann = sample_spacetime(slab, f_ann)
    ann_ratios = []
    for cid, lhs, rhs in ratio_tail(ann, 1.0, 3.0, rho_list, case_id="annulus"):
        if rhs > 0:
            ann_ratios.append({"case_id": cid, "ratio": lhs / rhs})
    return estimate_constant(
        "tail-3.6", {"rho_list": rho_list, "s0": s0, "grid": settings.grid,
                     "scale_meaning": "index into rho_list"},
        cases, excluded, scale_count=len(rho_list),
        drift_threshold=settings.thresholds["scale_drift"],
        diagnostics={"annulus_ratios": ann_ratios})


REGISTRY = {
    "adams-2.1": suite_adams,
    "sharp-max-2.2": suite_sharp_max,
    "weighted-2.3": suite_weighted_23,
    "hardy-2.4": suite_hardy,
    "truncated-2.6": suite_truncated,
    "weighted-2.8": suite_weighted_28,
    "counterexample-2.9": suite_counterexample,
    "trace-3.5": suite_trace_35,
    "trace-local-3.5c": suite_trace_local,
    "tail-3.6": suite_tail,
    "trace-morrey-3.2": suite_trace_morrey_32,
    "trace-morrey-3.3": suite_trace_morrey_33,
    "trace-remark-3.4": suite_trace_remark,
}

"""Empirical verification suites for the weighted-potential, maximal, Hardy,
truncated-weight, counterexample, trace and tail inequalities.

No inequality here carries a numeric constant; verification means

* every LHS/RHS ratio on the corpus is finite,
* the maximum ratio (the empirical constant) is bounded over the corpus,
* empirical constants drift by at most a declared factor across dyadic
  rescalings (the testable shadow of a scale-free constant).

Suites over homogeneous norms rescale cases onto matched grids, where the
discrete computation is exactly self-similar; suites over capped norms
rescale parabolically on a fixed grid.  Exclusions happen only for zero
right-hand sides or resolution violations, never for large ratios.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import (
    CorpusCase,
    SpaceTimeCase,
    build_corpus,
    near_extremal_case,
    singular_weight_case,
    u_kappa_values,
)
from .grid import (
    HOMOGENEOUS,
    INHOMOGENEOUS,
    GridFunction,
    GridSpec,
    RadiusSet,
    SpaceTimeFunction,
    SpaceTimeGridSpec,
    ball_average_norm,
    gradient,
    hessian,
    lp_norm,
    sample,
)
from .heat import default_eps_sequence, parabolic_tail_potential, trace
from .norms import (
    EllipticMorreyParams,
    ParabolicMorreyParams,
    ParameterWindowError,
    TraceParams,
    elliptic_morrey_norm,
    e12_components,
    parabolic_fractional_maximal,
    truncated_morrey,
    TruncatedMorreyParams,
    validate_trace_params,
)
from .singular import (
    MaximalParams,
    RieszParams,
    fractional_maximal,
    power_cell_average,
    riesz_potential,
    sharp_function,
)

REGISTERED_IDS = (
    "adams-2.1",
    "sharp-max-2.2",
    "weighted-2.3",
    "hardy-2.4",
    "truncated-2.6",
    "weighted-2.8",
    "counterexample-2.9",
    "trace-3.5",
    "trace-local-3.5c",
    "tail-3.6",
    "trace-morrey-3.2",
    "trace-morrey-3.3",
    "trace-remark-3.4",
)

ID_DESCRIPTIONS = {
    "adams-2.1": "weighted Riesz potential bound ||b P_a f||_p <= N ||b||_{Morrey(q,a)} ||f||_p",
    "sharp-max-2.2": "pointwise sharp-function bound (P_a g)^# <= N M_a g",
    "weighted-2.3": "weighted gradient bounds ||b u||_p <= N ||b|| ||Du||_p and ||b Du||_p <= N ||b|| ||D^2 u||_p",
    "hardy-2.4": "Hardy inequalities int |u|^p/|x|^p <= N ||Du||_p^p (and the 2nd-order variant)",
    "truncated-2.6": "truncated weight norm: restriction bound and the rho^{1-d/p_b} smallness law",
    "weighted-2.8": "truncated weighted bound int |b u|^p <= N bhat^p (||Du||_p^p + rho_b^-p ||u||_p^p)",
    "counterexample-2.9": "kappa-sweep showing ||b Du_k|| and ||D^2 u_k|| both scale like kappa^-2",
    "trace-3.5": "global trace bound ||D^g u(0)||_r <= N eps ||du,D2u||_{p,q} + N eps^{-k/(2-k)} ||u||_{p,q}",
    "trace-local-3.5c": "local trace bound on B_rho with cylinder norms over C_2rho",
    "tail-3.6": "kernel tail bound P_g(f outside C_rho)(0) <= N rho^{g-b} M_b f(0)",
    "trace-morrey-3.2": "Morrey trace bound with the eps^{-mu/(2-mu)} penalty",
    "trace-morrey-3.3": "Morrey trace bound by the full one-time-two-space-derivative norm",
    "trace-remark-3.4": "gamma=1, r=p, mu=kappa instance with penalty exponent (q+2)/(q-2)",
}


@dataclass
class CaseResult:
    case_id: str
    lhs: float
    rhs: float
    ratio: float
    scale_index: int

    def to_dict(self) -> dict:
        return {"case_id": self.case_id, "lhs": self.lhs, "rhs": self.rhs,
                "ratio": self.ratio, "scale_index": self.scale_index}


@dataclass
class VerificationReport:
    inequality_id: str
    params: dict
    cases: list[CaseResult]
    excluded: list[dict]
    empirical_constant: float
    scale_drift: float
    passed: bool
    checks: list[dict] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    reason: str = ""


@dataclass
class SweepResult:
    kappas: list[float]
    norm_bDu: list[float]
    norm_D2u: list[float]
    norm_u: list[float]
    slope_bDu: float
    slope_D2u: float
    u_drift: float
    passed: bool
    params: dict


def make_case(case_id: str, lhs: float, rhs: float, scale_index: int,
              cases: list[CaseResult], excluded: list[dict]) -> None:
    """File the pair as a CaseResult, or exclude it when the ratio is undefined."""
    if not (math.isfinite(lhs) and math.isfinite(rhs)):
        excluded.append({"case_id": case_id, "reason": "non-finite norm value"})
    elif rhs == 0.0:
        if lhs == 0.0:
            excluded.append({"case_id": case_id, "reason": "degenerate zero case"})
        else:
            excluded.append({"case_id": case_id, "reason": "zero right-hand side"})
    else:
        cases.append(CaseResult(case_id, lhs, rhs, lhs / rhs, scale_index))


def estimate_constant(inequality_id: str, params: dict, cases: list[CaseResult],
                      excluded: list[dict], scale_count: int,
                      drift_threshold: float = 1.5,
                      checks: list[dict] | None = None,
                      diagnostics: dict | None = None,
                      min_cases: int = 5) -> VerificationReport:
    """Aggregate per-case ratios into the empirical constant and drift.

    The empirical constant is the maximum ratio; the drift is the spread of
    per-scale maxima.  The pass flag combines finiteness, the drift
    threshold, and any suite-declared extra checks.
    """
    checks = list(checks or [])
    diagnostics = dict(diagnostics or {})
    if not cases:
        return VerificationReport(inequality_id, params, [], excluded,
                                  math.nan, math.nan, False, checks, diagnostics,
                                  reason="all cases degenerate")
    if len(cases) < min_cases or scale_count < 2:
        raise ValueError(
            f"estimate_constant needs >= {min_cases} cases over >= 2 scales, "
            f"got {len(cases)} cases / {scale_count} scales")
    cases = sorted(cases, key=lambda c: (c.case_id, c.scale_index))
    constant = max(c.ratio for c in cases)
    by_scale: dict[int, float] = {}
    for c in cases:
        by_scale[c.scale_index] = max(by_scale.get(c.scale_index, -math.inf), c.ratio)
    drift = max(by_scale.values()) / min(by_scale.values()) if min(by_scale.values()) > 0 else math.inf
    ok = math.isfinite(constant) and drift <= drift_threshold
    for chk in checks:
        ok = ok and bool(chk["ok"])
    return VerificationReport(inequality_id, params, cases, excluded, constant,
                              float(drift), ok, checks, diagnostics)


# ---------------------------------------------------------------------------
# elliptic ratio operations


def ratio_adams(b: GridFunction, f: GridFunction, p: float, q: float, alpha: float,
                case_id: str = "case", scale_index: int = 0) -> tuple[float, float, dict]:
    """LHS/RHS of the weighted potential bound.

    lhs = ||b * P_alpha f||_p over the grid; rhs = homogeneous Morrey norm of
    b (exponents q, alpha) times ||f||_p.
    """
    if not 1 < p < q:
        raise ParameterWindowError("p-q window", f"need 1 < p < q, got p={p}, q={q}")
    spec = f.spec
    RieszParams(alpha).validate(spec.d)
    pot = riesz_potential(f, RieszParams(alpha))
    lhs = lp_norm(GridFunction(spec, b.values * pot.values), p)
    radii = RadiusSet.dyadic(b.spec, HOMOGENEOUS)
    bnorm = elliptic_morrey_norm(b, EllipticMorreyParams(q, alpha, True, radii))
    rhs = bnorm.value * lp_norm(f, p)
    diag = {"b_norm": bnorm.to_record("morrey-b", {"q": q, "beta": alpha})}
    return lhs, rhs, diag


def ratio_sharp_maximal(g: GridFunction, alpha: float,
                        radii: RadiusSet | None = None,
                        pair_budget: int = 4096**2) -> tuple[float, float, dict]:
    """Max pointwise quotient sharp(P_alpha g) / M_alpha g over interior nodes.

    Returns (lhs, rhs) at the maximizing node so that lhs/rhs is the
    pointwise ratio; nodes where the truncated maximal function vanishes are
    left out (the dyadic radius cap cannot see far-away mass).
    """
    if np.any(g.values < 0):
        raise ValueError("sharp-maximal ratio needs g >= 0 (sign-indefinite input)")
    spec = g.spec
    RieszParams(alpha).validate(spec.d)
    if radii is None:
        radii = RadiusSet.dyadic(spec, HOMOGENEOUS)
    pot = riesz_potential(g, RieszParams(alpha))
    sharp = sharp_function(pot, radii, pair_budget)
    maximal = fractional_maximal(g, MaximalParams(alpha, radii))
    interior = np.ones(spec.shape, dtype=bool)
    ax = np.abs(spec.axis) <= spec.L / 2 + 1e-12
    for axis in range(spec.d):
        sl = [None] * spec.d
        sl[axis] = slice(None)
        interior &= ax[tuple(sl)]
    usable = interior & (maximal.values > 0)
    if not usable.any():
        return math.nan, 0.0, {}
    quot = np.where(usable, sharp.values / np.where(usable, maximal.values, 1.0), -np.inf)
    flat = int(np.argmax(quot))
    idx = np.unravel_index(flat, spec.shape)
    return float(sharp.values[idx]), float(maximal.values[idx]), {
        "argmax_node": [int(i) for i in idx]}


def ratio_weighted(b: GridFunction, u: GridFunction, p: float,
                   q: float | None = None,
                   p_b: float | None = None, rho_b: float | None = None,
                   form: str = "gradient") -> tuple[float, float, dict]:
    """Weighted bounds in three forms.

    ``gradient``: lhs = ||b u||_p, rhs = ||b||_{Morrey(q,1)} ||Du||_p.
    ``hessian`` : lhs = ||b |Du|||_p, rhs = ||b||_{Morrey(q,1)} |||D^2u|||_p.
    ``truncated``: lhs = int |b u|^p, rhs = bhat^p (int |Du|^p +
    rho_b^-p int |u|^p), with bhat the truncated weight norm.
    """
    spec = u.spec
    if form in ("gradient", "hessian"):
        if q is None or not 1 < p < q:
            raise ParameterWindowError("p-q window", f"need 1 < p < q, got p={p}, q={q}")
        radii = RadiusSet.dyadic(b.spec, HOMOGENEOUS)
        bnorm = elliptic_morrey_norm(b, EllipticMorreyParams(q, 1.0, True, radii)).value
        grads = gradient(u)
        gmag = np.sqrt(sum(g.values**2 for g in grads))
        if form == "gradient":
            lhs = lp_norm(GridFunction(spec, b.values * u.values), p)
            rhs = bnorm * lp_norm(GridFunction(spec, gmag), p)
        else:
            hess = hessian(u)
            hmag = np.sqrt(sum(hess[i][j].values**2
                               for i in range(spec.d) for j in range(spec.d)))
            lhs = lp_norm(GridFunction(spec, b.values * gmag), p)
            rhs = bnorm * lp_norm(GridFunction(spec, hmag), p)
        return lhs, rhs, {"b_norm": bnorm}
    if form == "truncated":
        if p_b is None or rho_b is None or not 1 < p < p_b:
            raise ParameterWindowError("p-p_b window",
                                       f"need 1 < p < p_b, got p={p}, p_b={p_b}")
        bhat = truncated_morrey(b, TruncatedMorreyParams(p_b, rho_b)).value
        grads = gradient(u)
        gmag = np.sqrt(sum(g.values**2 for g in grads))
        hd = spec.h**spec.d
        lhs = float((np.abs(b.values * u.values) ** p).sum() * hd)
        rhs = bhat**p * float(((gmag**p).sum() + rho_b ** (-p) * (np.abs(u.values) ** p).sum()) * hd)
        return lhs, rhs, {"bhat": bhat}
    raise ValueError(f"unknown form {form!r}")


def ratio_hardy(u: GridFunction, p: float | None = None,
                r: float | None = None) -> tuple[float, float, dict]:
    """Hardy quotients.

    First form (p given, 1 < p < d): lhs = int |u|^p / |x|^p (origin cell
    regularized), rhs = ||Du||_p^p.  Second form (r given, 1 < r < d/2):
    weight |x|^(-2r) against ||D^2 u||_r^r.
    """
    spec = u.spec
    d = spec.d
    if (p is None) == (r is None):
        raise ValueError("pass exactly one of p (first form) or r (second form)")
    hd = spec.h**spec.d
    rad = spec.radius_from_origin()
    if p is not None:
        if not 1 < p < d:
            raise ParameterWindowError("p window", f"need 1 < p < {d}, got p={p}")
        with np.errstate(divide="ignore"):
            w = rad ** (-p)
        w[spec.origin_index] = power_cell_average(d, p, spec.h)
        lhs = float((np.abs(u.values) ** p * w).sum() * hd)
        grads = gradient(u)
        gmag = np.sqrt(sum(g.values**2 for g in grads))
        rhs = float((gmag**p).sum() * hd)
        return lhs, rhs, {"form": "gradient", "p": p}
    assert r is not None
    if not 1 < r < d / 2:
        raise ParameterWindowError("r window", f"need 1 < r < {d / 2}, got r={r}")
    with np.errstate(divide="ignore"):
        w = rad ** (-2 * r)
    w[spec.origin_index] = power_cell_average(d, 2 * r, spec.h)
    lhs = float((np.abs(u.values) ** r * w).sum() * hd)
    hess = hessian(u)
    hmag = np.sqrt(sum(hess[i][j].values**2 for i in range(d) for j in range(d)))
    rhs = float((hmag**r).sum() * hd)
    return lhs, rhs, {"form": "hessian", "r": r}


# ---------------------------------------------------------------------------
# the counterexample sweep


def counterexample_sweep(kappa_list: list[float], p: float, d: int = 3,
                         n: int = 65) -> SweepResult:
    """Norms of b|Du_k|, D^2 u_k and u_k across the annular family.

    Each width gets a proportionally scaled grid (box 4*kappa, fixed node
    count) so every profile is equally resolved; norms are ball averages
    over B_{4 kappa}, under which both derivative norms follow the exact
    kappa^-2 law and ||u_kappa|| is kappa-independent.  b = |x|^-1 with the
    regularized origin cell.
    """
    if not 1 < p < d:
        raise ParameterWindowError("p window", f"need 1 < p < {d}, got p={p}")
    kl = list(kappa_list)
    if any(k2 >= k1 for k1, k2 in zip(kl, kl[1:])) or not kl:
        raise ValueError("kappa_list must be strictly decreasing")
    if kl[0] > 0.25 + 1e-12:
        raise ValueError("kappa must stay within (0, 1/4]")
    norms_bdu, norms_d2u, norms_u = [], [], []
    for kappa in kl:
        spec = GridSpec(d, 4.0 * kappa, n)
        if spec.h > kappa / 8 + 1e-12:
            raise ValueError(
                f"kappa={kappa:g} unresolved: h={spec.h:g} exceeds kappa/8 (need n >= 65)")
        u = u_kappa_values(spec, kappa)
        b = singular_weight_case(spec, 1.0).materialize()
        grads = gradient(u)
        gmag = np.sqrt(sum(g.values**2 for g in grads))
        hess = hessian(u)
        hmag = np.sqrt(sum(hess[i][j].values**2 for i in range(d) for j in range(d)))
        origin = spec.origin_index
        rho = 4.0 * kappa
        norms_bdu.append(ball_average_norm(
            GridFunction(spec, b.values * gmag), origin, rho, p))
        norms_d2u.append(ball_average_norm(GridFunction(spec, hmag), origin, rho, p))
        norms_u.append(ball_average_norm(u, origin, rho, p))
    logk = np.log(kl)
    slope_bdu = float(np.polyfit(logk, np.log(norms_bdu), 1)[0])
    slope_d2u = float(np.polyfit(logk, np.log(norms_d2u), 1)[0])
    u_drift = max(norms_u) / min(norms_u)
    passed = abs(slope_bdu + 2.0) <= 0.15 and abs(slope_d2u + 2.0) <= 0.15 and u_drift <= 2.0
    return SweepResult(kl, [float(x) for x in norms_bdu], [float(x) for x in norms_d2u],
                       [float(x) for x in norms_u], slope_bdu, slope_d2u,
                       float(u_drift), passed,
                       {"p": p, "d": d, "n": n, "norm": "ball-average over B(4 kappa)"})


# ---------------------------------------------------------------------------
# space-time ratio operations


def global_mixed_norm(u: SpaceTimeFunction, p: float, q: float) -> float:
    """Unnormalized mixed norm over the whole slab."""
    sp = u.spec.spatial
    hd = sp.h**sp.d
    inner = (np.abs(u.values) ** p).reshape(u.spec.m, -1).sum(axis=1) * hd
    return float(((inner ** (q / p)).sum() * u.spec.tau) ** (1.0 / q))


def _trace_magnitude(components: tuple[GridFunction, ...]) -> GridFunction:
    spec = components[0].spec
    if len(components) == 1:
        return GridFunction(spec, np.abs(components[0].values))
    return GridFunction(spec, np.sqrt(sum(c.values**2 for c in components)))


@dataclass
class TraceBundle:
    """Everything the trace suites need from one space-time function."""

    trace_mag: GridFunction
    pm_u: float
    pm_pair: float
    mixed_u: float
    mixed_pair: float
    converged: bool


_BUNDLE_CACHE: dict = {}


def trace_bundle(u: SpaceTimeFunction, tp: TraceParams,
                 cache_key: tuple | None = None) -> TraceBundle:
    """Extract the trace and the norms entering every trace-type RHS."""
    if cache_key is not None and cache_key in _BUNDLE_CACHE:
        return _BUNDLE_CACHE[cache_key]
    slab = u.spec
    eps_seq = default_eps_sequence(slab)
    tr = trace(u, tp.gamma, eps_seq, t=0.0, r=tp.r)
    mag = _trace_magnitude(tr.extrapolated)
    radii = RadiusSet.dyadic(slab.spatial, INHOMOGENEOUS)
    pm_params = ParabolicMorreyParams(tp.p, tp.q, tp.beta, False, radii)
    comps = e12_components(u, pm_params)
    pm_pair = sum(v for k, v in comps.items() if k == "dtu" or (k.startswith("D") and len(k) == 4))
    from .grid import hessian_st, time_derivative

    mixed_u = global_mixed_norm(u, tp.p, tp.q)
    dtu = time_derivative(u)
    hess = hessian_st(u)
    d = slab.spatial.d
    mixed_pair = global_mixed_norm(dtu, tp.p, tp.q) + sum(
        global_mixed_norm(hess[i][j], tp.p, tp.q) for i in range(d) for j in range(d))
    bundle = TraceBundle(mag, comps["u"], float(pm_pair), mixed_u, mixed_pair, tr.converged)
    if cache_key is not None:
        _BUNDLE_CACHE[cache_key] = bundle
    return bundle


def ratio_trace(u: SpaceTimeFunction, tp: TraceParams, eps_list: list[float],
                mode: str, case_id: str = "case", scale_index: int = 0,
                bundle: TraceBundle | None = None) -> list[tuple[str, float, float]]:
    """Per-epsilon (case_id, lhs, rhs) for the selected trace estimate.

    The LHS is the mode-appropriate norm of the extracted trace (independent
    of epsilon); the RHS sweeps the free epsilon of the estimate.
    """
    slab = u.spec
    sp = slab.spatial
    validation = validate_trace_params(sp.d, tp)
    if not validation.valid:
        raise ParameterWindowError(
            ", ".join(validation.violated),
            f"trace parameter window violated: {validation.violated}")
    if bundle is None:
        bundle = trace_bundle(u, tp)
    kappa = validation.kappa
    out: list[tuple[str, float, float]] = []
    if mode == "Lr_global":
        lhs = lp_norm(bundle.trace_mag, tp.r)
        expo = kappa / (2.0 - kappa)
        for eps in eps_list:
            rhs = eps * bundle.mixed_pair + eps ** (-expo) * bundle.mixed_u
            out.append((f"{case_id}-eps{eps:g}", lhs, rhs))
    elif mode == "Lr_local":
        expo = kappa / (2.0 - kappa)
        rho = min(0.5, sp.L / 4)
        hd = sp.h**sp.d
        mask = sp.radius_from_origin() < rho
        lhs = float(((np.abs(bundle.trace_mag.values[mask]) ** tp.r).sum() * hd) ** (1 / tp.r))
        a_loc, b_loc = _cylinder_mixed_norms(u, tp, rho)
        for eps in eps_list:
            rhs = eps * a_loc + (eps * rho**-2 + eps ** (-expo)
                                 * rho ** ((2 * kappa - 2 * tp.gamma) / (2 - kappa))) * b_loc
            out.append((f"{case_id}-eps{eps:g}", lhs, rhs))
    elif mode == "Morrey_mu":
        beta_ell = tp.beta + tp.gamma - tp.mu
        radii = RadiusSet.dyadic(sp, INHOMOGENEOUS)
        lhs = elliptic_morrey_norm(
            bundle.trace_mag, EllipticMorreyParams(tp.r, beta_ell, False, radii)).value
        expo = tp.mu / (2.0 - tp.mu)
        for eps in eps_list:
            rhs = eps * bundle.pm_pair + eps ** (-expo) * bundle.pm_u
            out.append((f"{case_id}-eps{eps:g}", lhs, rhs))
    elif mode == "Morrey_full":
        beta_ell = tp.beta + tp.gamma - 2.0
        radii = RadiusSet.dyadic(sp, INHOMOGENEOUS)
        lhs = elliptic_morrey_norm(
            bundle.trace_mag, EllipticMorreyParams(tp.r, beta_ell, False, radii)).value
        rhs = bundle.pm_u + bundle.pm_pair + _pm_gradient_sum(u, tp)
        out.append((case_id, lhs, rhs))
    else:
        raise ValueError(f"unknown trace mode {mode!r}")
    return out


def _pm_gradient_sum(u: SpaceTimeFunction, tp: TraceParams) -> float:
    from .grid import gradient_st
    from .norms import parabolic_morrey_norm

    radii = RadiusSet.dyadic(u.spec.spatial, INHOMOGENEOUS)
    pm = ParabolicMorreyParams(tp.p, tp.q, tp.beta, False, radii)
    return float(sum(parabolic_morrey_norm(g, pm).value for g in gradient_st(u)))


def _cylinder_mixed_norms(u: SpaceTimeFunction, tp: TraceParams, rho: float) -> tuple[float, float]:
    """Unnormalized mixed norms of (dt u, D^2 u) and u over C_{2 rho}(0, 0)."""
    from .grid import hessian_st, time_derivative
    from .norms import mixed_lpq_norm

    sp = u.spec.spatial
    origin = sp.origin_index
    d = sp.d
    dtu = time_derivative(u)
    hess = hessian_st(u)
    a = mixed_lpq_norm(dtu, tp.p, tp.q, 0.0, origin, 2 * rho) + sum(
        mixed_lpq_norm(hess[i][j], tp.p, tp.q, 0.0, origin, 2 * rho)
        for i in range(d) for j in range(d))
    b = mixed_lpq_norm(u, tp.p, tp.q, 0.0, origin, 2 * rho)
    return float(a), float(b)


def ratio_tail(f: SpaceTimeFunction, gamma: float, beta: float,
               rho_list: list[float], case_id: str = "case",
               scale_index: int = 0) -> list[tuple[str, float, float]]:
    """Per-rho (case_id, lhs, rhs) for the kernel tail bound."""
    sp = f.spec.spatial
    if not 0 <= gamma < beta <= sp.d + 2:
        raise ParameterWindowError(
            "gamma-beta window", f"need 0 <= gamma < beta <= d+2, got ({gamma}, {beta})")
    cap = min(sp.L / 2, math.sqrt(f.spec.t1 - f.spec.t0))
    radii = RadiusSet.dyadic(sp, HOMOGENEOUS, rho_max=cap)
    mbf = parabolic_fractional_maximal(f, beta, radii, at=(0.0, sp.origin_index))
    out = []
    for rho in rho_list:
        lhs = parabolic_tail_potential(f, gamma, rho)
        rhs = rho ** (gamma - beta) * mbf
        out.append((f"{case_id}-rho{rho:g}", lhs, rhs))
    return out

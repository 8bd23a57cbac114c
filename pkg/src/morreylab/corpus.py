"""Deterministic test-function corpora for the verification suites.

Every case is formula-backed: a case can be materialized on any grid and at
any dyadic dilation, which is what the multi-scale ratio computations need.
Smooth profiles are genuinely C-infinity with exact compact support (bump
factors, smoothstep cutoffs in log radius), so the sampled functions honor
the zero-margin contract without clipping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import (
    GridFunction,
    GridSpec,
    SpaceTimeFunction,
    SpaceTimeGridSpec,
    detect_support_margin,
    sample,
    sample_spacetime,
)
from .singular import power_cell_average

ELLIPTIC_KINDS = ("gaussian", "bump", "radial_power_cutoff", "indicator_ball",
                  "singular_weight", "u_kappa")
SPACETIME_KINDS = ("heat_extension", "separable_spacetime")


def smoothstep(s):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1, all derivatives flat."""
    s = np.asarray(s, dtype=np.float64)
    lo = s <= 0.0
    hi = s >= 1.0
    mid = ~(lo | hi)
    out = np.zeros_like(s)
    out[hi] = 1.0
    sm = s[mid]
    a = np.exp(-1.0 / sm)
    b = np.exp(-1.0 / (1.0 - sm))
    out[mid] = a / (a + b)
    return out if out.ndim else float(out)


def log_cutoff(r, r_lo: float, r_hi: float):
    """1 for r <= r_lo, 0 for r >= r_hi, smoothstep in log r between."""
    r = np.asarray(r, dtype=np.float64)
    with np.errstate(divide="ignore"):
        s = np.where(r > 0, np.log(np.maximum(r, 1e-300) / r_lo), -1.0)
    return 1.0 - smoothstep(s / math.log(r_hi / r_lo))


def bump_profile(z):
    """exp(-1/(1-z^2)) inside |z| < 1, zero outside."""
    z = np.asarray(z, dtype=np.float64)
    out = np.zeros_like(z)
    inside = np.abs(z) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - z[inside] ** 2))
    return out


# ---------------------------------------------------------------------------
# the annular counterexample profile


def annular_profile(t):
    """Smooth radial profile: 0 on [0, 1], equal to t on [2, 3], 0 from 3.7 on.

    The early vanishing past 3.7 leaves two exactly-zero node layers on the
    matched sweep grids, which the hessian stencil needs.
    """
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros_like(t)
    rise = (t > 1.0) & (t < 2.0)
    flat = (t >= 2.0) & (t <= 3.0)
    fall = (t > 3.0) & (t < 3.7)
    out[rise] = t[rise] * smoothstep(t[rise] - 1.0)
    out[flat] = t[flat]
    out[fall] = t[fall] * smoothstep((3.7 - t[fall]) / 0.7)
    return out


def u_kappa_values(spec: GridSpec, kappa: float) -> GridFunction:
    """u_kappa(x) = profile(|x| / kappa)."""
    return sample(spec, lambda *g: annular_profile(np.sqrt(sum(x * x for x in g)) / kappa))


# ---------------------------------------------------------------------------
# case records


@dataclass
class CorpusCase:
    """A formula-backed test function.

    ``materialize(lam)`` samples the dilated function x -> f(lam * x) on the
    lam-matched grid (same node count, box shrunk by lam), preserving the
    support-margin contract exactly.
    """

    case_id: str
    kind: str
    parameters: dict
    grid: GridSpec
    _sampler: object = field(repr=False, default=None)

    def materialize(self, lam: float = 1.0) -> GridFunction:
        spec = self.grid if lam == 1.0 else self.grid.rescaled(lam)
        return self._sampler(spec, lam)


@dataclass
class SpaceTimeCase:
    """Formula-backed space-time test function with parabolic dilations.

    ``materialize(lam)`` samples (t, x) -> u(lam^2 t, lam x) on the *same*
    slab, which is the right dilation for inhomogeneous (capped) norms.
    """

    case_id: str
    kind: str
    parameters: dict
    slab: SpaceTimeGridSpec
    _sampler: object = field(repr=False, default=None)

    def materialize(self, lam: float = 1.0) -> SpaceTimeFunction:
        return self._sampler(self.slab, lam)


def _gaussian_case(idx: int, spec: GridSpec, rng) -> CorpusCase:
    sigma = float(rng.uniform(spec.L / 7, spec.L / 4))
    amp = float(rng.uniform(0.5, 2.0))
    center = rng.uniform(-spec.L / 4, spec.L / 4, size=spec.d)
    r_hi = 0.9 * spec.L
    r_lo = 0.55 * spec.L

    def sampler(s: GridSpec, lam: float) -> GridFunction:
        c = center / lam

        def f(*g):
            r2c = sum((x - ci) ** 2 for x, ci in zip(g, c))
            r = np.sqrt(sum(x * x for x in g))
            return amp * np.exp(-r2c / (2 * (sigma / lam) ** 2)) * log_cutoff(
                r, r_lo / lam, r_hi / lam)

        return sample(s, f)

    return CorpusCase(f"gaussian-{idx:02d}", "gaussian",
                      {"sigma": sigma, "amp": amp, "center": center.tolist()},
                      spec, sampler)


def _bump_case(idx: int, spec: GridSpec, rng) -> CorpusCase:
    radius = float(rng.uniform(spec.L / 3, 0.7 * spec.L))
    amp = float(rng.uniform(0.5, 2.0))
    center = rng.uniform(-spec.L / 6, spec.L / 6, size=spec.d)

    def sampler(s: GridSpec, lam: float) -> GridFunction:
        c, R = center / lam, radius / lam

        def f(*g):
            z = np.sqrt(sum((x - ci) ** 2 for x, ci in zip(g, c))) / R
            return amp * math.e * bump_profile(z)

        return sample(s, f)

    return CorpusCase(f"bump-{idx:02d}", "bump",
                      {"radius": radius, "amp": amp, "center": center.tolist()},
                      spec, sampler)


def _indicator_case(idx: int, spec: GridSpec, rng) -> CorpusCase:
    radius = float(rng.uniform(spec.L / 4, 0.6 * spec.L))
    center = rng.uniform(-spec.L / 5, spec.L / 5, size=spec.d)

    def sampler(s: GridSpec, lam: float) -> GridFunction:
        c, R = center / lam, radius / lam

        def f(*g):
            r2 = sum((x - ci) ** 2 for x, ci in zip(g, c))
            return (r2 < R * R).astype(np.float64)

        return sample(s, f)

    return CorpusCase(f"indicator-{idx:02d}", "indicator_ball",
                      {"radius": radius, "center": center.tolist()}, spec, sampler)


def _radial_power_case(idx: int, spec: GridSpec, rng, exponent: float | None = None,
                       label: str | None = None) -> CorpusCase:
    a = float(rng.uniform(0.3, 0.9)) if exponent is None else exponent
    r0 = 2.5 * spec.h
    r_lo = float(rng.uniform(0.25, 0.4)) * spec.L
    r_hi = 0.9 * spec.L

    def sampler(s: GridSpec, lam: float) -> GridFunction:
        r0_l, lo_l, hi_l = r0 / lam, r_lo / lam, r_hi / lam

        def f(*g):
            r = np.sqrt(sum(x * x for x in g))
            return (r0_l**2 + r * r) ** (-a / 2.0) * log_cutoff(r, lo_l, hi_l)

        return sample(s, f)

    return CorpusCase(label or f"radialpow-{idx:02d}", "radial_power_cutoff",
                      {"exponent": a, "r_plateau": r0, "r_lo": r_lo, "r_hi": r_hi},
                      spec, sampler)


def singular_weight_case(spec: GridSpec, exponent: float, label: str | None = None) -> CorpusCase:
    """|x|^(-exponent) sampled with the regularized origin cell."""

    def sampler(s: GridSpec, lam: float) -> GridFunction:
        def f(*g):
            r = np.sqrt(sum(x * x for x in g))
            with np.errstate(divide="ignore"):
                return r ** (-exponent)

        origin_val = power_cell_average(s.d, exponent, s.h)
        return sample(s, f, singular={s.origin_index: origin_val})

    return CorpusCase(label or f"weight-pow{exponent:g}", "singular_weight",
                      {"exponent": exponent}, spec, sampler)


def near_extremal_case(spec: GridSpec, delta: float) -> CorpusCase:
    """|x|^(-1/2+delta) with an inner plateau at grid scale and the widest
    log-spread cutoff the box affords."""
    a = 0.5 - delta
    r0 = 2.0 * spec.h
    r_lo = 4.0 * spec.h
    r_hi = 0.9 * spec.L

    def sampler(s: GridSpec, lam: float) -> GridFunction:
        r0_l, lo_l, hi_l = r0 / lam, r_lo / lam, r_hi / lam

        def f(*g):
            r = np.sqrt(sum(x * x for x in g))
            return (r0_l**2 + r * r) ** (-a / 2.0) * log_cutoff(r, lo_l, hi_l)

        return sample(s, f)

    return CorpusCase(f"nearextremal-d{delta:g}", "radial_power_cutoff",
                      {"exponent": a, "delta": delta, "r_plateau": r0,
                       "r_lo": r_lo, "r_hi": r_hi}, spec, sampler)


_ELLIPTIC_BUILDERS = {
    "gaussian": _gaussian_case,
    "bump": _bump_case,
    "indicator_ball": _indicator_case,
    "radial_power_cutoff": _radial_power_case,
}


def build_corpus(seed: int, kinds: list[str], grid: GridSpec | SpaceTimeGridSpec,
                 size: int | None = None) -> list:
    """Deterministic corpus of test functions.

    Elliptic corpora always contain the fixed singular weights |x|^-1 and
    |x|^-2 plus at least one gaussian and one bump; the remaining cases are
    drawn from `kinds` with parameters generated from `seed`.
    """
    if not kinds:
        raise ValueError("kinds must be nonempty")
    rng = np.random.default_rng(seed)
    if isinstance(grid, SpaceTimeGridSpec):
        bad = [k for k in kinds if k not in SPACETIME_KINDS]
        if bad:
            raise ValueError(f"kinds {bad} incompatible with a space-time grid")
        return _build_spacetime_corpus(rng, kinds, grid, size or 10)
    bad = [k for k in kinds if k not in ELLIPTIC_KINDS]
    if bad:
        raise ValueError(f"kinds {bad} incompatible with a spatial grid")
    size = size or 20
    cases: list[CorpusCase] = [
        singular_weight_case(grid, 1.0, "weight-inv1"),
        singular_weight_case(grid, 2.0, "weight-inv2"),
        _gaussian_case(0, grid, rng),
        _bump_case(0, grid, rng),
    ]
    usable = [k for k in kinds if k in _ELLIPTIC_BUILDERS] or ["gaussian", "bump"]
    idx = 1
    while len(cases) < size:
        kind = usable[idx % len(usable)]
        cases.append(_ELLIPTIC_BUILDERS[kind](idx, grid, rng))
        idx += 1
    return cases[:size]


def _separable_case(idx: int, slab: SpaceTimeGridSpec, rng) -> SpaceTimeCase:
    sp = slab.spatial
    half = (slab.t1 - slab.t0) / 2
    t_scale = float(rng.uniform(0.55, 0.8)) * half
    radius = float(rng.uniform(0.3, 0.6)) * sp.L
    amp = float(rng.uniform(0.5, 2.0))
    t_mid = (slab.t0 + slab.t1) / 2

    def sampler(s: SpaceTimeGridSpec, lam: float) -> SpaceTimeFunction:
        def f(t, *g):
            z = np.sqrt(sum(x * x for x in g)) * lam / radius
            tz = (lam**2 * t - t_mid) / t_scale
            return amp * math.e**2 * bump_profile(z) * float(bump_profile(tz))

        return sample_spacetime(s, f)

    return SpaceTimeCase(f"separable-{idx:02d}", "separable_spacetime",
                         {"t_scale": t_scale, "radius": radius, "amp": amp},
                         slab, sampler)


def _heat_case(idx: int, slab: SpaceTimeGridSpec, rng) -> SpaceTimeCase:
    sp = slab.spatial
    sigma = float(rng.uniform(0.12, 0.22)) * sp.L
    amp = float(rng.uniform(0.5, 2.0))
    half = (slab.t1 - slab.t0) / 2
    t_scale = float(rng.uniform(0.55, 0.8)) * half
    t_mid = (slab.t0 + slab.t1) / 2

    def sampler(s: SpaceTimeGridSpec, lam: float) -> SpaceTimeFunction:
        # closed-form evolved gaussian times a smooth time window, dilated
        # parabolically: variance sigma^2 + 2 lam^2 (t - t0) at scale lam
        sig_l = sigma / lam
        t00 = s.t0

        def f(t, *g):
            var = sig_l**2 + 2.0 * max(lam**2 * (t - t00), 0.0) / lam**2
            r2 = sum(x * x for x in g)
            tz = (lam**2 * t - t_mid) / t_scale
            norm = (sig_l**2 / var) ** (s.spatial.d / 2.0)
            return amp * norm * np.exp(-r2 / (2 * var)) * float(bump_profile(tz))

        raw = sample_spacetime(s, f)
        # enforce the margin contract: the gaussian tail is cut smoothly
        r = s.spatial.radius_from_origin()
        cut = log_cutoff(r, 0.55 * s.spatial.L, 0.9 * s.spatial.L)
        vals = raw.values * cut[None]
        return SpaceTimeFunction(s, vals, detect_support_margin(vals, s.spatial.d))

    case = SpaceTimeCase(f"heatext-{idx:02d}", "heat_extension",
                         {"sigma": sigma, "amp": amp, "t_scale": t_scale},
                         slab, sampler)
    return case


def _build_spacetime_corpus(rng, kinds, slab: SpaceTimeGridSpec, size: int) -> list[SpaceTimeCase]:
    builders = {"heat_extension": _heat_case, "separable_spacetime": _separable_case}
    usable = [k for k in kinds if k in builders]
    cases = []
    for i in range(size):
        kind = usable[i % len(usable)]
        cases.append(builders[kind](i, slab, rng))
    return cases

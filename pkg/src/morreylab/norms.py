"""Elliptic and parabolic Morrey norms, mixed norms on cylinders, and the
trace-parameter window.

Norm conventions:

* ball norms are averages, ``(mean |f|^q over the ball)^(1/q)``;
* the mixed norm on a cylinder is unnormalized, inner spatial L_p per slab
  then temporal L_q; its ``#`` variant divides by the norm of the cylinder's
  own indicator, computed on the same discrete cylinder;
* a discrete cylinder C_rho(t, x) collects the time slabs with
  t_j in [t, t + rho^2) crossed with the discrete ball B_rho(x), clipped to
  the grid.

Morrey suprema scan the dyadic radius set and every node-anchored ball or
cylinder; the reduction is deterministic (ties resolved toward the smallest
radius, then the lexicographically first anchor).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.signal import fftconvolve

from .grid import (
    HOMOGENEOUS,
    INHOMOGENEOUS,
    Ball,
    GridFunction,
    RadiusSet,
    SpaceTimeFunction,
    ball_offsets,
    ball_stencil,
    gradient,
    gradient_st,
    hessian,
    hessian_st,
    time_derivative,
)


class ParameterWindowError(ValueError):
    """Raised when exponents violate a stated hypothesis window."""

    def __init__(self, clause: str, message: str):
        super().__init__(message)
        self.clause = clause


# ---------------------------------------------------------------------------
# parameter bundles


@dataclass(frozen=True)
class EllipticMorreyParams:
    q: float
    beta: float
    homogeneous: bool
    radii: RadiusSet

    def __post_init__(self):
        if self.q < 1:
            raise ValueError(f"q must be >= 1, got {self.q}")
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")


@dataclass(frozen=True)
class TruncatedMorreyParams:
    p_b: float
    rho_b: float

    def __post_init__(self):
        if not self.p_b > 1:
            raise ValueError(f"p_b must exceed 1, got {self.p_b}")
        if not self.rho_b > 0:
            raise ValueError(f"rho_b must be positive, got {self.rho_b}")


@dataclass(frozen=True)
class ParabolicMorreyParams:
    p: float
    q: float
    beta: float
    homogeneous: bool
    radii: RadiusSet

    def __post_init__(self):
        if not (self.p > 1 and self.q > 1):
            raise ValueError(f"p, q must exceed 1, got ({self.p}, {self.q})")
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")


@dataclass(frozen=True)
class TraceParams:
    """Exponent tuple for the trace estimates, gamma in {0, 1}."""

    p: float
    q: float
    r: float
    beta: float
    gamma: int
    mu: float

    def kappa(self, d: int) -> float:
        return self.gamma + d / self.p + 2.0 / self.q - d / self.r


@dataclass
class TraceValidation:
    valid: bool
    kappa: float
    epsilon_exponent: float
    violated: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "valid": self.valid,
            "kappa": self.kappa,
            "epsilon_exponent": self.epsilon_exponent,
            "violated": list(self.violated),
        }


def validate_trace_params(d: int, tp: TraceParams) -> TraceValidation:
    """Check the hypothesis window of the trace estimates.

    The window is ``2 - gamma < beta <= d/p + 2/q < 2 - gamma + d/r`` together
    with ``kappa <= mu < 2`` and ``r >= p``; reported alongside kappa and the
    epsilon exponent ``-mu/(2 - mu)``.
    """
    violated: list[str] = []
    if tp.gamma not in (0, 1):
        violated.append("gamma")
    if not (tp.p > 1 and tp.q > 1):
        violated.append("integrability")
    if tp.r < tp.p:
        violated.append("r-range")
    kappa = tp.kappa(d)
    mix = d / tp.p + 2.0 / tp.q
    if not (2.0 - tp.gamma < tp.beta):
        violated.append("lower window")
    if not (tp.beta <= mix):
        violated.append("middle window")
    if not (mix < 2.0 - tp.gamma + d / tp.r):
        violated.append("upper window")
    if not (kappa <= tp.mu):
        violated.append("kappa-mu")
    if not (tp.mu < 2.0):
        violated.append("mu-range")
    exponent = -tp.mu / (2.0 - tp.mu) if tp.mu < 2.0 else -math.inf
    return TraceValidation(not violated, kappa, exponent, violated)


# ---------------------------------------------------------------------------
# supremum bookkeeping


@dataclass
class NormResult:
    """Value of a supremum-type norm plus where the supremum was attained."""

    value: float
    argmax_center: tuple[float, ...]
    argmax_radius: float
    cap_limited: bool

    def __float__(self) -> float:
        return self.value

    def to_record(self, norm_id: str, params: dict) -> dict:
        return {
            "norm_id": norm_id,
            "params": params,
            "value": self.value,
            "argmax_center": list(self.argmax_center),
            "argmax_radius": self.argmax_radius,
            "cap_limited": self.cap_limited,
        }


def _capped_radii(radii: RadiusSet, homogeneous: bool, cap: float | None = None) -> list[float]:
    limit = cap if cap is not None else (math.inf if homogeneous else 1.0)
    out = [r for r in radii.radii if r <= limit * (1 + 1e-12)]
    if not out:
        raise ValueError(f"no radius in the set is within the cap {limit:g}")
    return out


# ---------------------------------------------------------------------------
# mixed norms on cylinders


def _cylinder_window(st: SpaceTimeFunction, t_anchor: float, rho: float) -> tuple[int, int]:
    """Slab index range [j0, j1) covering t_j in [t_anchor, t_anchor + rho^2)."""
    spec = st.spec
    j0 = int(math.ceil((t_anchor - spec.t0) / spec.tau - 1e-9))
    j1 = int(math.ceil((t_anchor + rho**2 - spec.t0) / spec.tau - 1e-9))
    return max(j0, 0), min(j1, spec.m)


def mixed_lpq_norm(g: SpaceTimeFunction, p: float, q: float,
                   t_anchor: float, center: tuple[int, ...], rho: float) -> float:
    """Unnormalized mixed norm on the discrete cylinder C_rho(t_anchor, center):
    spatial L_p on each slab inside, then temporal L_q.
    """
    if p < 1 or q < 1:
        raise ValueError("exponents must be >= 1")
    spec = g.spec
    j0, j1 = _cylinder_window(g, t_anchor, rho)
    if j1 <= j0:
        raise ValueError("empty discrete cylinder (no time slab inside)")
    sp = spec.spatial
    offs = ball_offsets(sp.d, rho / sp.h)
    keep = np.ones(offs[0].size, dtype=bool)
    for c, o in zip(center, offs):
        keep &= (c + o >= 0) & (c + o < sp.n)
    if not keep.any():
        raise ValueError("empty discrete cylinder (no node inside the ball)")
    idx = tuple(c + o[keep] for c, o in zip(center, offs))
    hd = sp.h**sp.d
    inner = np.empty(j1 - j0)
    for j in range(j0, j1):
        inner[j - j0] = (np.abs(g.values[j][idx]) ** p).sum() * hd
    return float((inner ** (q / p)).sum() * spec.tau) ** (1.0 / q)


def normalized_mixed_norm(g: SpaceTimeFunction, p: float, q: float,
                          t_anchor: float, center: tuple[int, ...], rho: float) -> float:
    """Mixed norm divided by the mixed norm of the same cylinder's indicator."""
    spec = g.spec
    j0, j1 = _cylinder_window(g, t_anchor, rho)
    if j1 <= j0:
        raise ValueError("empty discrete cylinder (no time slab inside)")
    sp = spec.spatial
    offs = ball_offsets(sp.d, rho / sp.h)
    keep = np.ones(offs[0].size, dtype=bool)
    for c, o in zip(center, offs):
        keep &= (c + o >= 0) & (c + o < sp.n)
    cnt = int(keep.sum())
    if cnt == 0:
        raise ValueError("empty discrete cylinder (no node inside the ball)")
    idx = tuple(c + o[keep] for c, o in zip(center, offs))
    w = j1 - j0
    inner = np.empty(w)
    for j in range(j0, j1):
        inner[j - j0] = (np.abs(g.values[j][idx]) ** p).mean()
    return float(((inner ** (q / p)).mean())) ** (1.0 / q)


# ---------------------------------------------------------------------------
# elliptic Morrey family


def elliptic_morrey_norm(f: GridFunction, params: EllipticMorreyParams) -> NormResult:
    """sup over radii and node centers of rho^beta * (ball average of |f|^q)^(1/q)."""
    spec = f.spec
    radii = _capped_radii(params.radii, params.homogeneous)
    powq = np.abs(f.values) ** params.q
    ones = np.ones_like(powq)
    best_val = -math.inf
    best_center: tuple[int, ...] = spec.origin_index
    best_rho = radii[0]
    for rho in radii:
        w = ball_stencil(spec.d, rho / spec.h)
        sums = fftconvolve(powq, w, mode="same")
        counts = np.rint(fftconvolve(ones, w, mode="same"))
        vals = rho**params.beta * (np.maximum(sums, 0.0) / np.maximum(counts, 1.0)) ** (1.0 / params.q)
        flat = int(np.argmax(vals))
        v = float(vals.ravel()[flat])
        if v > best_val:
            best_val = v
            best_center = np.unravel_index(flat, spec.shape)
            best_rho = rho
    return NormResult(
        value=best_val,
        argmax_center=spec.node_coords(tuple(int(i) for i in best_center)),
        argmax_radius=best_rho,
        cap_limited=bool(best_rho == radii[-1]),
    )


def truncated_morrey(b: GridFunction, params: TruncatedMorreyParams,
                     radii: RadiusSet | None = None) -> NormResult:
    """sup over rho <= rho_b of rho * sup over balls of the average L_{p_b} norm.

    The radius set defaults to the dyadic set extended to include rho_b
    itself, so the cap radius is always scanned.
    """
    spec = b.spec
    if radii is None:
        base = RadiusSet.dyadic(spec, HOMOGENEOUS, rho_max=spec.L)
        rset = [r for r in base.radii if r < params.rho_b * (1 - 1e-12)]
        if params.rho_b >= 2 * spec.h:
            rset.append(params.rho_b)
        if not rset:
            raise ValueError(f"rho_b={params.rho_b:g} is below the grid resolution")
        radii = RadiusSet(tuple(rset), HOMOGENEOUS)
    else:
        if params.rho_b < radii.radii[0]:
            raise ValueError(f"rho_b={params.rho_b:g} is below the smallest radius")
    capped = RadiusSet(tuple(r for r in radii.radii if r <= params.rho_b * (1 + 1e-12)),
                       HOMOGENEOUS)
    return elliptic_morrey_norm(
        b, EllipticMorreyParams(q=params.p_b, beta=1.0, homogeneous=True, radii=capped))


# ---------------------------------------------------------------------------
# parabolic Morrey family


def _slab_ball_means(values: NDArray, d: int, rho_over_h: float, p: float,
                     hd: float) -> tuple[NDArray, NDArray]:
    """Per-slab (sum |g|^p h^d, node count) over clipped balls at all centers."""
    w = ball_stencil(d, rho_over_h)
    m = values.shape[0]
    sums = np.empty_like(values)
    for j in range(m):
        sums[j] = fftconvolve(np.abs(values[j]) ** p, w, mode="same")
    counts = np.rint(fftconvolve(np.ones(values.shape[1:]), w, mode="same"))
    return np.maximum(sums, 0.0) * hd, counts


def parabolic_morrey_norm(g: SpaceTimeFunction, params: ParabolicMorreyParams) -> NormResult:
    """sup over radii and node-anchored cylinders of rho^beta times the
    normalized mixed norm.

    Cylinders point forward in time and are clipped at the slab end; the
    normalization uses the same clipped cylinder.
    """
    spec = g.spec
    sp = spec.spatial
    cap = None
    if params.homogeneous:
        cap = min(sp.L / 2, math.sqrt(spec.t1 - spec.t0))
    radii = _capped_radii(params.radii, params.homogeneous, cap=cap)
    p, q = params.p, params.q
    hd = sp.h**sp.d
    best_val = -math.inf
    best_anchor: tuple[float, ...] = (spec.t0,) + sp.node_coords(sp.origin_index)
    best_rho = radii[0]
    for rho in radii:
        sums, counts = _slab_ball_means(g.values, sp.d, rho / sp.h, p, hd)
        # normalized inner norm per slab: (sum/(count*h^d))^(1/p), q-mean over window
        inner_q = (sums / (np.maximum(counts, 1.0) * hd)) ** (q / p)
        w_len = max(1, int(math.ceil(rho**2 / spec.tau - 1e-9)))
        csum = np.concatenate([np.zeros((1,) + inner_q.shape[1:]), np.cumsum(inner_q, axis=0)])
        for j0 in range(spec.m):
            j1 = min(j0 + w_len, spec.m)
            if j1 <= j0:
                continue
            window_mean = (csum[j1] - csum[j0]) / (j1 - j0)
            vals = rho**params.beta * window_mean ** (1.0 / q)
            flat = int(np.argmax(vals))
            v = float(vals.ravel()[flat])
            if v > best_val:
                best_val = v
                cidx = np.unravel_index(flat, sp.shape)
                best_anchor = (spec.t0 + j0 * spec.tau,) + sp.node_coords(
                    tuple(int(i) for i in cidx))
                best_rho = rho
    return NormResult(
        value=best_val,
        argmax_center=best_anchor,
        argmax_radius=best_rho,
        cap_limited=bool(best_rho == radii[-1]),
    )


def e12_components(u: SpaceTimeFunction, params: ParabolicMorreyParams) -> dict[str, float]:
    """Parabolic Morrey norms of u, each D_i u, each D_ij u, and d/dt u."""
    comps: dict[str, float] = {"u": parabolic_morrey_norm(u, params).value}
    grads = gradient_st(u)
    for i, gi in enumerate(grads):
        comps[f"D{i + 1}u"] = parabolic_morrey_norm(gi, params).value
    hess = hessian_st(u)
    d = u.spec.spatial.d
    for i in range(d):
        for j in range(d):
            comps[f"D{i + 1}{j + 1}u"] = parabolic_morrey_norm(hess[i][j], params).value
    comps["dtu"] = parabolic_morrey_norm(time_derivative(u), params).value
    return comps


def e12_norm(u: SpaceTimeFunction, params: ParabolicMorreyParams) -> float:
    """Norm of the space with one time and two space derivatives: the sum of
    the component parabolic Morrey norms."""
    return float(sum(e12_components(u, params).values()))


def heat_pair_norm(u: SpaceTimeFunction, params: ParabolicMorreyParams) -> float:
    """Sum of the parabolic Morrey norms of d/dt u and of all entries of D^2 u."""
    comps = e12_components(u, params)
    return float(sum(v for k, v in comps.items()
                     if k == "dtu" or (k.startswith("D") and len(k) == 4)))


def parabolic_fractional_maximal(f: SpaceTimeFunction, beta: float, radii: RadiusSet,
                                 at: tuple[float, tuple[int, ...]] | None = None) -> float:
    """max over radii of rho^beta * (mean of |f| over the discrete cylinder C_rho(at))."""
    spec = f.spec
    sp = spec.spatial
    if not 0 < beta <= sp.d + 2:
        raise ValueError(f"beta must lie in (0, {sp.d + 2}], got {beta}")
    t_anchor, center = at if at is not None else (0.0, sp.origin_index)
    best = 0.0
    for rho in radii.radii:
        j0, j1 = _cylinder_window(f, t_anchor, rho)
        if j1 <= j0:
            continue
        offs = ball_offsets(sp.d, rho / sp.h)
        keep = np.ones(offs[0].size, dtype=bool)
        for c, o in zip(center, offs):
            keep &= (c + o >= 0) & (c + o < sp.n)
        if not keep.any():
            continue
        idx = tuple(c + o[keep] for c, o in zip(center, offs))
        mean = float(np.mean([np.abs(f.values[j][idx]).mean() for j in range(j0, j1)]))
        best = max(best, rho**beta * mean)
    return best

"""Heat-kernel machinery: the weighted Gaussian kernel and its norm power
law, the forward heat representation, parabolic mollification, t-traces, and
heat extensions for building space-time test functions.

The kernel in trace estimates is ``P_gamma(t, x) = t^(-(d+gamma)/2) *
exp(-|x|^2/(8t))``; the representation operator uses the semigroup kernel
``(4*pi*s)^(-d/2) exp(-|x-y|^2/(4s))``.  The factor-2 mismatch between the
two exponents is intentional (the first dominates derivative terms of the
second) and both are used exactly as written in their own roles.

Spatial Gaussian smoothing is spectral on a zero-padded box; padding is
sized so wrap-around stays below 1e-10.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy import fft as sp_fft

from .grid import (
    Ball,
    GridFunction,
    GridSpec,
    SpaceTimeFunction,
    SpaceTimeGridSpec,
    ball_average_norm,
    detect_support_margin,
    gradient,
)
from .singular import sphere_area


@dataclass(frozen=True)
class HeatKernelParams:
    """Derivative order gamma (0/1 for operators, [0, d+2) for potentials)
    and the Lebesgue exponent for norm queries."""

    gamma: float
    s: float = 1.0

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.s < 1:
            raise ValueError(f"s must be >= 1, got {self.s}")


def heat_kernel(params: HeatKernelParams, d: int, t: float, x) -> float | NDArray:
    """t^(-(d+gamma)/2) * exp(-|x|^2 / (8t)) for t > 0."""
    if t <= 0:
        raise ValueError(f"kernel needs t > 0, got t={t}")
    x = np.asarray(x, dtype=np.float64)
    r2 = (x * x).sum(axis=-1) if x.ndim else x * x
    return t ** (-(d + params.gamma) / 2.0) * np.exp(-r2 / (8.0 * t))


def kernel_norm_exponent(params: HeatKernelParams, d: int,
                         t_grid: NDArray | None = None,
                         radial_nodes: int = 4096) -> float:
    """Fit the power law of t -> ||P_gamma(t, .)||_{L_s} on log-log axes.

    The spatial norm is evaluated by midpoint quadrature on a fine radial
    grid per time node; the fitted slope is returned.  The closed-form value
    is ``-gamma/2 + (d/2)(1/s - 1)``.
    """
    if t_grid is None:
        t_grid = np.logspace(-2.0, 0.5, 11)
    t_grid = np.asarray(t_grid, dtype=np.float64)
    if t_grid.size < 3 or t_grid.max() / t_grid.min() < 99.0:
        raise ValueError("t_grid must span at least two decades with >= 3 nodes")
    s = params.s
    log_norms = []
    for t in t_grid:
        r_max = 10.0 * math.sqrt(8.0 * t / s)
        r = (np.arange(radial_nodes) + 0.5) * (r_max / radial_nodes)
        dr = r_max / radial_nodes
        integrand = np.exp(-s * r * r / (8.0 * t)) * r ** (d - 1)
        total = sphere_area(d) * integrand.sum() * dr
        if integrand[-1] * dr > 1e-13 * total:
            raise ValueError("radial quadrature tail not resolved; enlarge r_max")
        norm = total ** (1.0 / s) * t ** (-(d + params.gamma) / 2.0)
        log_norms.append(math.log(norm))
    slope = np.polyfit(np.log(t_grid), np.array(log_norms), 1)[0]
    return float(slope)


def kernel_domination_constant(z_nodes: int = 200001, z_max: float = 12.0) -> float:
    """Numerical max over z >= 0 of z * exp(-z^2/8) (closed form sqrt(4/e))."""
    z = np.linspace(0.0, z_max, z_nodes)
    return float(np.max(z * np.exp(-z * z / 8.0)))


# ---------------------------------------------------------------------------
# spectral Gaussian smoothing


def _pad_nodes(s_max: float, h: float) -> int:
    # wrap-around distance 10*sqrt(s) puts exp(-dist^2/(4s)) below ~1.4e-11
    return int(math.ceil(10.0 * math.sqrt(max(s_max, 0.0)) / h)) + 1


def _semigroup_multiplier(shape: tuple[int, ...], h: float, s: float) -> NDArray:
    k2 = np.zeros(shape)
    for ax, npad in enumerate(shape):
        freq = 2.0 * math.pi * np.fft.fftfreq(npad, d=h)
        sl = [None] * len(shape)
        sl[ax] = slice(None)
        k2 = k2 + (freq**2)[tuple(sl)]
    return np.exp(-s * k2)


def gaussian_smooth(values: NDArray, h: float, s: float, pad: int) -> NDArray:
    """exp(s*Laplacian) applied spectrally on the zero-padded box."""
    if s <= 0:
        return values.copy()
    shape = tuple(sp_fft.next_fast_len(n + 2 * pad) for n in values.shape)
    spec = sp_fft.rfftn(values, s=shape)
    mult = _semigroup_multiplier(shape, h, s)
    sl = tuple(slice(0, m) for m in spec.shape)
    out = sp_fft.irfftn(spec * mult[sl], s=shape)
    return out[tuple(slice(0, n) for n in values.shape)]


def heat_extension(g: GridFunction, start: float, slab: SpaceTimeGridSpec) -> SpaceTimeFunction:
    """Evolve g by the heat semigroup from `start` across the slab.

    Spectral in space with padding, so mass is conserved to roundoff and the
    result solves the heat equation to O(h^2 + tau^2).
    """
    if slab.spatial != g.spec:
        raise ValueError("slab spatial grid must match the initial datum's grid")
    if abs(slab.t0 - start) > 1e-12:
        raise ValueError(f"slab must start at t={start}, got t0={slab.t0}")
    h = g.spec.h
    pad = _pad_nodes(slab.t1 - start, h)
    shape = tuple(sp_fft.next_fast_len(n + 2 * pad) for n in g.spec.shape)
    spec_hat = sp_fft.rfftn(g.values, s=shape)
    out = np.empty(slab.shape)
    for j, t in enumerate(slab.times):
        dt = t - start
        if dt <= 0:
            out[j] = g.values
            continue
        mult = _semigroup_multiplier(shape, h, dt)
        sl = tuple(slice(0, m) for m in spec_hat.shape)
        full = sp_fft.irfftn(spec_hat * mult[sl], s=shape)
        out[j] = full[tuple(slice(0, n) for n in g.spec.shape)]
    return SpaceTimeFunction(slab, out, detect_support_margin(out, g.spec.d))


# ---------------------------------------------------------------------------
# forward representation


def representation_R(f: SpaceTimeFunction, nodes_per_decade: int = 64,
                     head_correction: bool = True) -> SpaceTimeFunction:
    """Forward heat representation: (4*pi)^(-d/2) * integral over s > 0 of
    s^(-d/2) * Gaussian(4s)-convolution of f(t + s, .).

    The s-integral runs log-spaced from tau/4 to the slab length (trapezoid
    in log s); f is interpolated linearly between slabs and zero-extended
    beyond the slab end.  A midpoint head term restores the [0, tau/4) piece.
    """
    spec = f.spec
    sp = spec.spatial
    h, tau = sp.h, spec.tau
    length = spec.t1 - spec.t0
    s_min = tau / 4.0
    decades = math.log10(length / s_min)
    n_nodes = max(int(math.ceil(decades * nodes_per_decade)) + 1, 8)
    sigma = np.linspace(math.log(s_min), math.log(length), n_nodes)
    s_nodes = np.exp(sigma)
    dsig = sigma[1] - sigma[0]
    trap = np.full(n_nodes, dsig)
    trap[0] = trap[-1] = dsig / 2.0

    pad = _pad_nodes(length, h)
    shape = tuple(sp_fft.next_fast_len(n + 2 * pad) for n in sp.shape)
    slab_hat = np.stack([sp_fft.rfftn(f.values[j], s=shape) for j in range(spec.m)])
    hat_shape = slab_hat.shape[1:]

    mults = [
        _semigroup_multiplier(shape, h, s)[tuple(slice(0, m) for m in hat_shape)]
        for s in s_nodes
    ]

    out = np.empty(spec.shape)
    times = spec.times
    for j_out, t in enumerate(times):
        acc = np.zeros(hat_shape, dtype=complex)
        for k, s in enumerate(s_nodes):
            ts = t + s
            if ts > spec.t1 + 1e-12:
                continue
            pos = (ts - spec.t0) / tau
            j_lo = min(int(math.floor(pos)), spec.m - 1)
            wgt = pos - j_lo
            if j_lo + 1 < spec.m:
                hat = (1.0 - wgt) * slab_hat[j_lo] + wgt * slab_hat[j_lo + 1]
            else:
                hat = (1.0 - wgt) * slab_hat[j_lo]
            acc += (trap[k] * s) * (mults[k] * hat)
        field = sp_fft.irfftn(acc, s=shape)[tuple(slice(0, n) for n in sp.shape)]
        if head_correction:
            ts = t + s_min / 2.0
            if ts <= spec.t1:
                pos = (ts - spec.t0) / tau
                j_lo = min(int(math.floor(pos)), spec.m - 1)
                wgt = pos - j_lo
                head = (1.0 - wgt) * f.values[j_lo]
                if j_lo + 1 < spec.m:
                    head = head + wgt * f.values[j_lo + 1]
                field = field + s_min * head
        out[j_out] = field
    return SpaceTimeFunction(spec, out, detect_support_margin(out, sp.d))


# ---------------------------------------------------------------------------
# parabolic mollifier and traces


def _bump(q: NDArray) -> NDArray:
    out = np.zeros_like(q)
    inside = q < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - q[inside]))
    return out


@dataclass(frozen=True)
class MollifierSpec:
    """Parabolically scaled smooth bump: support |t| < eps^2, |x| < eps.

    The profile is exp(-1/(1 - (t^2 + |x|^4))) inside the unit parabolic
    ball; discrete weights are renormalized to sum to exactly 1, so constants
    are reproduced exactly and odd moments vanish by symmetry.
    """

    eps: float

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("mollifier scale must be positive")

    def weights(self, spec: SpaceTimeGridSpec) -> tuple[NDArray, float]:
        """Sampled, renormalized stencil and its spatial second moment."""
        sp = spec.spatial
        h, tau = sp.h, spec.tau
        if self.eps < max(2 * h, 2 * math.sqrt(tau)) * (1 - 1e-12):
            raise ValueError(
                f"eps={self.eps:g} below resolution bound max(2h, 2*sqrt(tau))="
                f"{max(2 * h, 2 * math.sqrt(tau)):g}")
        kt = int(math.ceil(self.eps**2 / tau)) - 1
        kx = int(math.ceil(self.eps / h)) - 1
        t_off = np.arange(-kt, kt + 1) * tau
        x_off = np.arange(-kx, kx + 1) * h
        grids = np.meshgrid(t_off, *([x_off] * sp.d), indexing="ij")
        q = (grids[0] / self.eps**2) ** 2
        r2 = sum(g * g for g in grids[1:])
        q = q + (r2 / self.eps**2) ** 2
        w = _bump(q)
        total = w.sum()
        if total <= 0:
            raise ValueError("empty mollifier stencil")
        w = w / total
        m2 = float((w * grids[1] ** 2).sum())
        return w, m2


def mollify(u: SpaceTimeFunction, moll: MollifierSpec) -> SpaceTimeFunction:
    """Space-time convolution with the renormalized discrete bump."""
    from scipy.ndimage import convolve as nd_convolve

    w, _ = moll.weights(u.spec)
    out = nd_convolve(u.values, w, mode="constant", cval=0.0)
    return SpaceTimeFunction(u.spec, out, detect_support_margin(out, u.spec.spatial.d))


def mollified_slice(u: SpaceTimeFunction, moll: MollifierSpec, t: float) -> GridFunction:
    """u * zeta_eps evaluated on the single time slice t (fast path)."""
    from scipy.ndimage import convolve as nd_convolve

    spec = u.spec
    j0 = spec.time_index(t)
    w, _ = moll.weights(spec)
    kt = (w.shape[0] - 1) // 2
    acc = np.zeros(spec.spatial.shape)
    for k in range(-kt, kt + 1):
        j = j0 - k  # convolution flips the kernel; the bump is even anyway
        if not 0 <= j < spec.m:
            continue
        wk = w[k + kt]
        if not wk.any():
            continue
        acc += nd_convolve(u.values[j], wk, mode="constant", cval=0.0)
    return GridFunction(spec.spatial, acc, detect_support_margin(acc, spec.spatial.d))


@dataclass
class TraceResult:
    """Trace extraction evidence: iterates along the mollifier sequence."""

    gamma: int
    epsilons: list[float]
    iterates: list[tuple[GridFunction, ...]]
    increments: list[float]
    converged: bool
    last: tuple[GridFunction, ...]
    extrapolated: tuple[GridFunction, ...]

    @property
    def components(self) -> tuple[GridFunction, ...]:
        return self.extrapolated


def trace(u: SpaceTimeFunction, gamma: int, eps_sequence: list[float],
          t: float = 0.0, r: float = 2.0) -> TraceResult:
    """Trace D^gamma u(t, .) as the limit of mollified slices.

    Returns every iterate, the Cauchy increments (average L_r norms of
    consecutive differences over the half-box ball, convergence evidence),
    the last iterate, and a second-order limit estimate obtained by
    eliminating the leading term via the exact discrete second moments of
    the two finest stencils.
    """
    if gamma not in (0, 1):
        raise ValueError("gamma must be 0 or 1")
    if len(eps_sequence) < 1 or any(e2 >= e1 for e1, e2 in zip(eps_sequence, eps_sequence[1:])):
        raise ValueError("eps_sequence must be strictly decreasing")
    spec = u.spec
    sp = spec.spatial
    iterates: list[tuple[GridFunction, ...]] = []
    moments: list[float] = []
    for eps in eps_sequence:
        moll = MollifierSpec(eps)
        _, m2 = moll.weights(spec)
        sl = mollified_slice(u, moll, t)
        if gamma == 0:
            iterates.append((sl,))
        else:
            sl = GridFunction(sp, sl.values, max(sl.support_margin, 1))
            iterates.append(tuple(gradient(sl)))
        moments.append(m2)
    ball = Ball((0.0,) * sp.d, sp.L / 2)
    center = sp.origin_index
    increments = []
    for a, b in zip(iterates, iterates[1:]):
        diff = sum(
            ball_average_norm(GridFunction(sp, ga.values - gb.values), center, sp.L / 2, r)
            for ga, gb in zip(a, b)
        )
        increments.append(float(diff))
    converged = all(x >= y * (1 - 1e-9) for x, y in zip(increments, increments[1:]))
    last = iterates[-1]
    if len(iterates) >= 2 and abs(moments[-2] - moments[-1]) > 1e-300:
        m1, m2_ = moments[-2], moments[-1]
        extrapolated = tuple(
            GridFunction(sp, (m1 * vb.values - m2_ * va.values) / (m1 - m2_))
            for va, vb in zip(iterates[-2], iterates[-1])
        )
    else:
        extrapolated = last
    return TraceResult(gamma, list(eps_sequence), iterates, increments,
                       converged, last, extrapolated)


def default_eps_sequence(spec: SpaceTimeGridSpec, count: int = 2) -> list[float]:
    """Dyadic scales 2^-k inside the mollifier resolution window."""
    sp = spec.spatial
    eps_min = max(2 * sp.h, 2 * math.sqrt(spec.tau))
    seq = []
    e = 1.0
    while e >= eps_min * (1 - 1e-12):
        if e**2 <= (spec.t1 - spec.t0) / 2:
            seq.append(e)
        e /= 2.0
    if len(seq) < 1:
        raise ValueError("no admissible mollifier scale: refine the slab")
    return seq[-count:] if count and len(seq) > count else seq


# ---------------------------------------------------------------------------
# tail potential


def parabolic_tail_potential(f: SpaceTimeFunction, gamma: float, rho: float) -> float:
    """Kernel-weighted slab integral of f outside the cylinder C_rho(0, 0).

    Midpoint quadrature of P_gamma(s, y) f(s, y) over slab nodes with s > 0
    and (s, y) outside [0, rho^2) x B_rho; the excised cylinder keeps the
    integrand bounded.  Requires f >= 0.
    """
    spec = f.spec
    sp = spec.spatial
    if np.any(f.values < 0):
        raise ValueError("tail potential requires nonnegative f")
    if not 0 <= gamma < sp.d + 2:
        raise ValueError(f"gamma must lie in [0, {sp.d + 2}), got {gamma}")
    r2 = sp.radius_from_origin() ** 2
    cell = sp.h**sp.d * spec.tau
    total = 0.0
    for j, s in enumerate(spec.times):
        if s <= 0:
            continue
        kern = s ** (-(sp.d + gamma) / 2.0) * np.exp(-r2 / (8.0 * s))
        outside = ~((s < rho**2) & (r2 < rho**2))
        total += float((kern * f.values[j])[outside].sum()) * cell
    return total

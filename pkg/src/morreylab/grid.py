"""Uniform box grids, sampled functions, quadrature and finite differences.

Everything downstream (potentials, maximal functions, Morrey norms, the heat
machinery) operates on functions sampled on a uniform grid over the box
[-L, L]^d, optionally extended by a uniform time slab.  Conventions:

* the node count per axis is odd, so the origin is always a grid node;
* integrals use the midpoint rule, cell volume ``h**d`` (times ``tau`` on
  slabs);
* norms over a region use the *average* convention, i.e. the region's
  discrete volume divides the integral; norms over the whole grid do not
  normalize;
* a discrete ball is the set of grid nodes at Euclidean distance < rho from
  the center, with volume ``count * h**d``.

Functions are expected to vanish on a margin of boundary layers
(``support_margin``); difference operators rely on that contract instead of
special boundary stencils.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np
from numpy.typing import NDArray


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on the box [-L, L]^d with n nodes per axis (n odd)."""

    d: int
    L: float
    n: int

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ValueError(f"spatial dimension must be 2 or 3, got {self.d}")
        if self.n < 3 or self.n % 2 == 0:
            raise ValueError(f"n must be an odd integer >= 3, got {self.n}")
        if not (self.L > 0 and math.isfinite(self.L)):
            raise ValueError(f"box half-extent must be positive, got {self.L}")

    @property
    def h(self) -> float:
        return 2.0 * self.L / (self.n - 1)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def axis(self) -> NDArray[np.float64]:
        return np.linspace(-self.L, self.L, self.n)

    def meshgrid(self) -> tuple[NDArray[np.float64], ...]:
        ax = self.axis
        return np.meshgrid(*([ax] * self.d), indexing="ij")

    def radius_from_origin(self) -> NDArray[np.float64]:
        grids = self.meshgrid()
        return np.sqrt(sum(g * g for g in grids))

    @property
    def origin_index(self) -> tuple[int, ...]:
        return ((self.n - 1) // 2,) * self.d

    def node_coords(self, index: tuple[int, ...]) -> tuple[float, ...]:
        ax = self.axis
        return tuple(float(ax[i]) for i in index)

    def rescaled(self, lam: float) -> "GridSpec":
        """Grid for x -> lam*x matched sampling: same n, box shrunk by lam."""
        return replace(self, L=self.L / lam)


@dataclass(frozen=True)
class SpaceTimeGridSpec:
    """Time slab [t0, t1] with m nodes crossed with a spatial grid."""

    spatial: GridSpec
    t0: float
    t1: float
    m: int

    def __post_init__(self):
        if self.m < 2:
            raise ValueError(f"need at least 2 time nodes, got {self.m}")
        if not self.t0 < self.t1:
            raise ValueError(f"empty time interval [{self.t0}, {self.t1}]")

    @property
    def tau(self) -> float:
        return (self.t1 - self.t0) / (self.m - 1)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.m,) + self.spatial.shape

    @property
    def times(self) -> NDArray[np.float64]:
        return np.linspace(self.t0, self.t1, self.m)

    def time_index(self, t: float) -> int:
        j = int(round((t - self.t0) / self.tau))
        if not 0 <= j < self.m or abs(self.t0 + j * self.tau - t) > 1e-9 * max(1.0, abs(t)) + 1e-12:
            raise ValueError(f"t={t} is not a time node of the slab")
        return j


def _zero_margin_layers(values: NDArray, margin: int) -> bool:
    """True iff all entries within `margin` layers of the spatial boundary vanish."""
    if margin == 0:
        return True
    spatial_axes = range(values.ndim)[-len(values.shape) :]
    for ax in spatial_axes:
        sl_lo = [slice(None)] * values.ndim
        sl_hi = [slice(None)] * values.ndim
        sl_lo[ax] = slice(0, margin)
        sl_hi[ax] = slice(values.shape[ax] - margin, None)
        if np.any(values[tuple(sl_lo)]) or np.any(values[tuple(sl_hi)]):
            return False
    return True


def detect_support_margin(values: NDArray, spatial_ndim: int) -> int:
    """Largest m such that the outer m spatial layers are exactly zero."""
    n = min(values.shape[-spatial_ndim:])
    m = 0
    while m < n // 2:
        ok = True
        for ax in range(values.ndim - spatial_ndim, values.ndim):
            sl_lo = [slice(None)] * values.ndim
            sl_hi = [slice(None)] * values.ndim
            sl_lo[ax] = m
            sl_hi[ax] = values.shape[ax] - 1 - m
            if np.any(values[tuple(sl_lo)]) or np.any(values[tuple(sl_hi)]):
                ok = False
                break
        if not ok:
            break
        m += 1
    return m


@dataclass
class GridFunction:
    """Real values on a spatial grid, with a declared zero support margin."""

    spec: GridSpec
    values: NDArray[np.float64]
    support_margin: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.spec.shape:
            raise ValueError(
                f"values shape {self.values.shape} does not match grid {self.spec.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            bad = np.argwhere(~np.isfinite(self.values))[0]
            raise ValueError(f"non-finite value at node {tuple(int(i) for i in bad)}")
        if self.support_margin < 0:
            raise ValueError("support_margin must be nonnegative")
        if self.support_margin > 0 and not _zero_margin_layers(self.values, self.support_margin):
            raise ValueError(
                f"declared support_margin={self.support_margin} but boundary layers are not zero"
            )

    def copy_with(self, values: NDArray, support_margin: int | None = None) -> "GridFunction":
        m = self.support_margin if support_margin is None else support_margin
        return GridFunction(self.spec, values, m)


@dataclass
class SpaceTimeFunction:
    """Real values on a time slab x spatial grid."""

    spec: SpaceTimeGridSpec
    values: NDArray[np.float64]
    support_margin: int = 0
    time_edges_one_sided: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.spec.shape:
            raise ValueError(
                f"values shape {self.values.shape} does not match slab {self.spec.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            bad = np.argwhere(~np.isfinite(self.values))[0]
            raise ValueError(f"non-finite value at node {tuple(int(i) for i in bad)}")

    def slice_at(self, t: float) -> GridFunction:
        j = self.spec.time_index(t)
        return GridFunction(
            self.spec.spatial,
            self.values[j].copy(),
            detect_support_margin(self.values[j], self.spec.spatial.d),
        )


# ---------------------------------------------------------------------------
# regions and radius sets


@dataclass(frozen=True)
class Ball:
    """Euclidean ball: nodes with |x - center| < radius."""

    center: tuple[float, ...]
    radius: float

    def mask(self, spec: GridSpec) -> NDArray[np.bool_]:
        grids = spec.meshgrid()
        dist2 = sum((g - c) ** 2 for g, c in zip(grids, self.center))
        return dist2 < self.radius**2


@dataclass(frozen=True)
class Box:
    """Axis-aligned box: nodes with lo_i <= x_i <= hi_i."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def mask(self, spec: GridSpec) -> NDArray[np.bool_]:
        grids = spec.meshgrid()
        m = np.ones(spec.shape, dtype=bool)
        for g, a, b in zip(grids, self.lo, self.hi):
            m &= (g >= a) & (g <= b)
        return m


INHOMOGENEOUS = "inhomogeneous"
HOMOGENEOUS = "homogeneous"


@dataclass(frozen=True)
class RadiusSet:
    """Ascending radii over which ball/cylinder suprema are evaluated.

    ``inhomogeneous`` caps radii at 1, ``homogeneous`` at a caller-chosen
    rho_max.  The grid additionally truncates at what the box can hold; the
    suprema computed over this set therefore under-estimate continuum
    suprema taken over all rho > 0 (recorded, not corrected).
    """

    radii: tuple[float, ...]
    cap_mode: str = INHOMOGENEOUS

    def __post_init__(self):
        if len(self.radii) == 0:
            raise ValueError("RadiusSet must be nonempty")
        if any(r <= 0 for r in self.radii):
            raise ValueError("radii must be positive")
        if list(self.radii) != sorted(self.radii):
            raise ValueError("radii must be ascending")
        if self.cap_mode not in (INHOMOGENEOUS, HOMOGENEOUS):
            raise ValueError(f"unknown cap_mode {self.cap_mode!r}")

    @property
    def cap(self) -> float:
        return self.radii[-1]

    @staticmethod
    def dyadic(spec: GridSpec, cap_mode: str = INHOMOGENEOUS,
               rho_max: float | None = None) -> "RadiusSet":
        """Dyadic radii {2h, 4h, ...} up to min(cap, L/2).

        The inhomogeneous cap is 1; the homogeneous cap defaults to L/2.
        """
        h = spec.h
        if cap_mode == INHOMOGENEOUS:
            cap = min(1.0, spec.L / 2)
        else:
            cap = spec.L / 2 if rho_max is None else min(rho_max, spec.L)
        radii = []
        r = 2.0 * h
        while r <= cap * (1 + 1e-12):
            radii.append(r)
            r *= 2.0
        if not radii:
            raise ValueError(
                f"no dyadic radius fits: 2h={2 * h:g} exceeds cap {cap:g} "
                "(region below grid resolution)"
            )
        return RadiusSet(tuple(radii), cap_mode)

    def rescaled(self, lam: float) -> "RadiusSet":
        return RadiusSet(tuple(r / lam for r in self.radii), self.cap_mode)


@lru_cache(maxsize=256)
def ball_offsets(d: int, rho_over_h: float) -> tuple[NDArray[np.int64], ...]:
    """Integer node offsets with |offset| < rho/h, one array per axis."""
    k = int(math.ceil(rho_over_h)) - 1 if rho_over_h == int(rho_over_h) else int(math.floor(rho_over_h))
    rng = np.arange(-k, k + 1)
    grids = np.meshgrid(*([rng] * d), indexing="ij")
    dist2 = sum(g * g for g in grids)
    mask = dist2 < rho_over_h**2
    return tuple(g[mask].astype(np.int64) for g in grids)


def ball_stencil(d: int, rho_over_h: float) -> NDArray[np.float64]:
    """Indicator stencil of the discrete ball, shaped for convolution."""
    offs = ball_offsets(d, rho_over_h)
    k = int(max(abs(o).max() for o in offs)) if len(offs[0]) else 0
    w = np.zeros((2 * k + 1,) * d)
    w[tuple(o + k for o in offs)] = 1.0
    return w


# ---------------------------------------------------------------------------
# sampling


def sample(spec: GridSpec, f, singular: dict[tuple[int, ...], float] | None = None,
           support_margin: int | None = None) -> GridFunction:
    """Sample a scalar field at the grid nodes.

    ``f`` is called with d coordinate arrays (vectorized).  Nodes where f is
    singular must be declared in ``singular`` together with their replacement
    value (use :func:`morreylab.singular.power_cell_average` for radial power
    singularities); an undeclared non-finite value is rejected with its node
    index.
    """
    grids = spec.meshgrid()
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        values = np.asarray(f(*grids), dtype=np.float64)
    if values.shape != spec.shape:
        values = np.broadcast_to(values, spec.shape).astype(np.float64).copy()
    singular = singular or {}
    for idx, val in singular.items():
        values[idx] = val
    if not np.all(np.isfinite(values)):
        bad = np.argwhere(~np.isfinite(values))[0]
        raise ValueError(
            f"non-finite sample at node {tuple(int(i) for i in bad)} not declared singular"
        )
    margin = detect_support_margin(values, spec.d) if support_margin is None else support_margin
    return GridFunction(spec, values, margin)


def sample_spacetime(spec: SpaceTimeGridSpec, f,
                     singular: dict[tuple[int, ...], float] | None = None) -> SpaceTimeFunction:
    """Sample f(t, x1, ..., xd) on the slab."""
    grids = spec.spatial.meshgrid()
    out = np.empty(spec.shape)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for j, t in enumerate(spec.times):
            out[j] = f(t, *grids)
    for idx, val in (singular or {}).items():
        out[idx] = val
    if not np.all(np.isfinite(out)):
        bad = np.argwhere(~np.isfinite(out))[0]
        raise ValueError(
            f"non-finite sample at node {tuple(int(i) for i in bad)} not declared singular"
        )
    return SpaceTimeFunction(spec, out, detect_support_margin(out, spec.spatial.d))


# ---------------------------------------------------------------------------
# quadrature norms


def lp_norm(u: GridFunction, p: float, region: Ball | Box | None = None) -> float:
    """L_p norm by the midpoint rule.

    Over the whole grid the norm is unnormalized, (sum |u|^p h^d)^(1/p); over
    a region it is the average norm (mean over the region's nodes)^(1/p).
    """
    if p < 1:
        raise ValueError(f"exponent must be >= 1, got {p}")
    if region is None:
        return float((np.abs(u.values) ** p).sum() * u.spec.h**u.spec.d) ** (1.0 / p)
    mask = region.mask(u.spec)
    cnt = int(mask.sum())
    if cnt == 0:
        raise ValueError("region below grid resolution (no nodes inside)")
    return float((np.abs(u.values[mask]) ** p).mean()) ** (1.0 / p)


def ball_average_norm(u: GridFunction, center: tuple[int, ...], rho: float, q: float) -> float:
    """Average L_q norm over the discrete ball B_rho around a node.

    Equals (mean of |u|^q over the grid nodes within distance rho of the
    center)^(1/q); balls are clipped at the box boundary.
    """
    if q < 1:
        raise ValueError(f"exponent must be >= 1, got {q}")
    spec = u.spec
    offs = ball_offsets(spec.d, rho / spec.h)
    idx = []
    keep = np.ones(len(offs[0]), dtype=bool)
    for c, o in zip(center, offs):
        pos = c + o
        keep &= (pos >= 0) & (pos < spec.n)
    if not keep.any():
        raise ValueError("region below grid resolution (no nodes inside)")
    for c, o in zip(center, offs):
        idx.append(c + o[keep])
    vals = u.values[tuple(idx)]
    return float(np.mean(np.abs(vals) ** q)) ** (1.0 / q)


# ---------------------------------------------------------------------------
# difference operators


def gradient(u: GridFunction) -> list[GridFunction]:
    """Central-difference gradient, one GridFunction per axis.

    Needs one zero boundary layer; the boundary layer of each component is
    kept at zero, consistent with the compact-support contract.
    """
    if u.support_margin < 1:
        raise ValueError("gradient needs support_margin >= 1")
    h = u.spec.h
    out = []
    for ax in range(u.spec.d):
        g = np.gradient(u.values, h, axis=ax)
        _zero_boundary(g, 1)
        out.append(GridFunction(u.spec, g, max(u.support_margin - 1, 1)))
    return out


def hessian(u: GridFunction) -> list[list[GridFunction]]:
    """Second differences: standard 3-point on the diagonal, cross-stencil off it.

    Exactly symmetric; exact on quadratic node data.  Needs two zero layers.
    """
    if u.support_margin < 2:
        raise ValueError("hessian needs support_margin >= 2")
    h = u.spec.h
    d = u.spec.d
    v = u.values
    out_margin = max(u.support_margin - 2, 1)
    rows: list[list[GridFunction]] = [[None] * d for _ in range(d)]  # type: ignore[list-item]
    for i in range(d):
        dii = np.zeros_like(v)
        core = [slice(1, -1)] * d
        up = list(core)
        dn = list(core)
        up[i] = slice(2, None)
        dn[i] = slice(0, -2)
        dii[tuple(core)] = (v[tuple(up)] - 2 * v[tuple(core)] + v[tuple(dn)]) / h**2
        _zero_boundary(dii, 1)
        rows[i][i] = GridFunction(u.spec, dii, out_margin)
        for j in range(i + 1, d):
            dij = np.zeros_like(v)
            pp = list(core); pp[i] = slice(2, None); pp[j] = slice(2, None)
            pm = list(core); pm[i] = slice(2, None); pm[j] = slice(0, -2)
            mp = list(core); mp[i] = slice(0, -2); mp[j] = slice(2, None)
            mm = list(core); mm[i] = slice(0, -2); mm[j] = slice(0, -2)
            dij[tuple(core)] = (v[tuple(pp)] - v[tuple(pm)] - v[tuple(mp)] + v[tuple(mm)]) / (4 * h**2)
            _zero_boundary(dij, 1)
            gf = GridFunction(u.spec, dij, out_margin)
            rows[i][j] = gf
            rows[j][i] = GridFunction(u.spec, dij.copy(), out_margin)
    return rows


def _zero_boundary(values: NDArray, layers: int) -> None:
    for ax in range(values.ndim):
        sl = [slice(None)] * values.ndim
        sl[ax] = slice(0, layers)
        values[tuple(sl)] = 0.0
        sl[ax] = slice(values.shape[ax] - layers, None)
        values[tuple(sl)] = 0.0


def time_derivative(u: SpaceTimeFunction) -> SpaceTimeFunction:
    """d/dt by central differences, one-sided at the slab ends (flagged)."""
    if u.spec.m < 3:
        raise ValueError("time_derivative needs at least 3 time nodes")
    dt = np.gradient(u.values, u.spec.tau, axis=0)
    return SpaceTimeFunction(u.spec, dt, u.support_margin, time_edges_one_sided=True)


def gradient_st(u: SpaceTimeFunction) -> list[SpaceTimeFunction]:
    """Spatial gradient of a slab function, slab by slab."""
    if u.support_margin < 1:
        raise ValueError("gradient needs support_margin >= 1")
    h = u.spec.spatial.h
    out = []
    for ax in range(u.spec.spatial.d):
        g = np.gradient(u.values, h, axis=ax + 1)
        for sp_ax in range(1, u.values.ndim):
            sl = [slice(None)] * u.values.ndim
            sl[sp_ax] = slice(0, 1)
            g[tuple(sl)] = 0.0
            sl[sp_ax] = slice(g.shape[sp_ax] - 1, None)
            g[tuple(sl)] = 0.0
        out.append(SpaceTimeFunction(u.spec, g, max(u.support_margin - 1, 0)))
    return out


def hessian_st(u: SpaceTimeFunction) -> list[list[SpaceTimeFunction]]:
    """Spatial second differences of a slab function."""
    if u.support_margin < 2:
        raise ValueError("hessian needs support_margin >= 2")
    d = u.spec.spatial.d
    rows: list[list[SpaceTimeFunction]] = [[None] * d for _ in range(d)]  # type: ignore[list-item]
    slabs = [
        hessian(GridFunction(u.spec.spatial, u.values[j], u.support_margin))
        for j in range(u.spec.m)
    ]
    for i in range(d):
        for j in range(d):
            stacked = np.stack([slabs[k][i][j].values for k in range(u.spec.m)])
            rows[i][j] = SpaceTimeFunction(u.spec, stacked, max(u.support_margin - 2, 0))
    return rows


# ---------------------------------------------------------------------------
# serialization: flat little-endian float64 payload + JSON sidecar


def save(fn: GridFunction | SpaceTimeFunction, basename: str | Path) -> tuple[Path, Path]:
    """Write `<basename>.f64` (row-major, axis order t, x1..xd) and `<basename>.json`."""
    base = Path(basename)
    data_path = base.with_suffix(".f64")
    meta_path = base.with_suffix(".json")
    flat = np.ascontiguousarray(fn.values, dtype="<f8")
    data_path.write_bytes(flat.tobytes())
    if isinstance(fn, SpaceTimeFunction):
        spec = fn.spec.spatial
        meta = {"d": spec.d, "L": spec.L, "n": spec.n,
                "t0": fn.spec.t0, "t1": fn.spec.t1, "m": fn.spec.m,
                "support_margin": fn.support_margin}
    else:
        meta = {"d": fn.spec.d, "L": fn.spec.L, "n": fn.spec.n,
                "support_margin": fn.support_margin}
    meta_path.write_text(json.dumps(meta, sort_keys=True, indent=1) + "\n")
    return data_path, meta_path


def load(basename: str | Path) -> GridFunction | SpaceTimeFunction:
    """Round-trip counterpart of :func:`save`."""
    base = Path(basename)
    meta = json.loads(base.with_suffix(".json").read_text())
    raw = np.frombuffer(base.with_suffix(".f64").read_bytes(), dtype="<f8")
    spec = GridSpec(meta["d"], meta["L"], meta["n"])
    if "m" in meta:
        st = SpaceTimeGridSpec(spec, meta["t0"], meta["t1"], meta["m"])
        return SpaceTimeFunction(st, raw.reshape(st.shape).copy(), meta["support_margin"])
    return GridFunction(spec, raw.reshape(spec.shape).copy(), meta["support_margin"])

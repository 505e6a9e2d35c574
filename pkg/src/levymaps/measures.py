"""Triplets, polar Lévy measures, radial measures, and their calculus.

An infinitely divisible law is represented by its generating triplet
``(A, nu, gamma)``: a Gaussian covariance, a Lévy measure and a drift, with
the characteristic exponent

    C(z) = -<z, A z>/2 + i <gamma, z>
           + integral of (e^{i<z,x>} - 1 - i<z,x>/(1+|x|^2)) nu(dx).

The Lévy measure is stored in polar form: finitely many unit directions,
each with a positive weight and a radial measure on (0, inf).  Radial
measures come in four kinds (atoms, power law, tempered power law, grid
density), chosen so that tails, truncated moments and weighted integrals are
either closed form or a single well-behaved quadrature.

Everything here is an immutable value; every operation is a pure function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import interpolate, special

from .errors import DomainError, SchemaError
from .quadrature import adaptive_quad, oscillatory_quad

UNIT_NORM_TOL = 1e-12

# Default log-spaced support grid for densities produced by transforms.
DEFAULT_GRID_BOUNDS = (1e-6, 1e6)
DEFAULT_GRID_SIZE = 2048

# Relative tail threshold below which an unbounded integral is truncated.
TAIL_TRUNCATION = 1e-16


def upper_gamma(a: float, x) -> np.ndarray | float:
    """Upper incomplete gamma integral of t^(a-1) e^(-t) over (x, inf).

    Supports nonpositive ``a`` (which scipy's regularized routines do not)
    via the downward recursion in ``a``; vectorized over ``x > 0``.
    """
    x = np.asarray(x, dtype=float)
    if a > 0:
        out = special.gammaincc(a, x) * special.gamma(a)
    elif a == 0:
        out = special.exp1(x)
    else:
        out = (upper_gamma(a + 1.0, x) - x**a * np.exp(-x)) / a
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Directions and radial measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Direction:
    """A point on the unit sphere, given by its coordinates."""

    coords: tuple[float, ...]

    def __post_init__(self):
        coords = tuple(float(c) for c in np.atleast_1d(np.asarray(self.coords, dtype=float)))
        object.__setattr__(self, "coords", coords)
        norm = math.sqrt(sum(c * c for c in coords))
        if not coords or abs(norm - 1.0) > UNIT_NORM_TOL:
            raise ValueError(f"direction must lie on the unit sphere, |xi|={norm!r}")

    @property
    def vector(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)

    @property
    def dim(self) -> int:
        return len(self.coords)


class RadialMeasure:
    """A measure on (0, inf) with square-capped mass: ∫ (r^2 ∧ 1) d nu < inf.

    Subclasses provide tails, densities (when absolutely continuous),
    truncated second moments and weighted integrals.  Intervals follow the
    tail convention: ``tail(r)`` is the mass of the open ray (r, inf), and
    ``integrate(fn, lo, hi)`` integrates over (lo, hi].
    """

    has_density: bool = False

    def tail(self, r):
        raise NotImplementedError

    def density(self, r):
        raise NotImplementedError(f"{type(self).__name__} has no density")

    def support(self) -> tuple[float, float]:
        """(lo, hi) bounds outside which the measure vanishes."""
        raise NotImplementedError

    def effective_upper(self) -> float:
        """Finite radius beyond which the remaining tail is negligible."""
        raise NotImplementedError

    def truncated_second_moment(self, r: float) -> float:
        """∫ s^2 nu(ds) over (0, r]."""
        raise NotImplementedError

    def square_cap_mass(self) -> float:
        """∫ (r^2 ∧ 1) nu(dr); finite for every valid radial measure."""
        return self.truncated_second_moment(1.0) + self.tail(1.0)

    def scaled(self, c: float) -> "RadialMeasure":
        """The measure c * nu."""
        raise NotImplementedError

    def integrate(self, fn, lo: float, hi: float) -> float:
        """∫ fn(r) nu(dr) over (lo, hi]; fn must accept numpy arrays."""
        raise NotImplementedError

    def log_weight_tail_integral(self, m: int) -> float:
        """∫ (log r)^m nu(dr) over (1, inf); may be math.inf."""
        raise NotImplementedError


@dataclass(frozen=True)
class AtomicRadial(RadialMeasure):
    """Finitely many atoms (r_i, m_i) with r_i > 0 and m_i > 0."""

    atoms: tuple[tuple[float, float], ...]
    has_density = False

    def __post_init__(self):
        pts = sorted((float(r), float(m)) for r, m in self.atoms)
        if not pts:
            raise ValueError("atomic radial measure needs at least one atom")
        for r, m in pts:
            if not (r > 0 and m > 0 and math.isfinite(r) and math.isfinite(m)):
                raise ValueError(f"invalid atom (r={r}, mass={m})")
        object.__setattr__(self, "atoms", tuple(pts))

    def _arrays(self):
        r = np.array([a[0] for a in self.atoms])
        m = np.array([a[1] for a in self.atoms])
        return r, m

    def tail(self, r):
        radii, masses = self._arrays()
        r = np.asarray(r, dtype=float)
        out = np.where(radii[None, ...] > np.atleast_1d(r)[..., None], masses, 0.0).sum(axis=-1)
        return out if np.ndim(r) else float(out[0])

    def support(self):
        return self.atoms[0][0], self.atoms[-1][0]

    def effective_upper(self):
        return self.atoms[-1][0]

    def truncated_second_moment(self, r):
        return float(sum(m * ri * ri for ri, m in self.atoms if ri <= r))

    def scaled(self, c):
        return AtomicRadial(tuple((r, c * m) for r, m in self.atoms))

    def integrate(self, fn, lo, hi):
        return float(sum(m * fn(r) for r, m in self.atoms if lo < r <= hi))

    def log_weight_tail_integral(self, m):
        if m == 0:
            return self.tail(1.0)
        return float(sum(mass * math.log(r) ** m for r, mass in self.atoms if r > 1.0))


@dataclass(frozen=True)
class PowerLawRadial(RadialMeasure):
    """Density scale * r^(-alpha-1) dr on (0, inf) with alpha in (0, 2)."""

    alpha: float
    scale: float
    has_density = True

    def __post_init__(self):
        if not (0.0 < self.alpha < 2.0):
            raise ValueError(f"power-law index must lie in (0, 2), got {self.alpha}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError(f"scale must be positive and finite, got {self.scale}")

    def tail(self, r):
        r = np.asarray(r, dtype=float)
        out = self.scale * r ** (-self.alpha) / self.alpha
        return out if out.ndim else float(out)

    def density(self, r):
        r = np.asarray(r, dtype=float)
        out = self.scale * r ** (-self.alpha - 1.0)
        return out if out.ndim else float(out)

    def support(self):
        return 0.0, math.inf

    def effective_upper(self):
        return math.inf

    def truncated_second_moment(self, r):
        return self.scale * r ** (2.0 - self.alpha) / (2.0 - self.alpha)

    def scaled(self, c):
        return PowerLawRadial(self.alpha, c * self.scale)

    def integrate(self, fn, lo, hi):
        return adaptive_quad(lambda r: fn(r) * self.density(r), max(lo, 0.0), hi)

    def log_weight_tail_integral(self, m):
        if m == 0:
            return self.tail(1.0)
        # substitute r = e^u: scale * ∫ u^m e^(-alpha u) du = scale * m! / alpha^(m+1)
        return self.scale * math.factorial(m) / self.alpha ** (m + 1)


@dataclass(frozen=True)
class TemperedRadial(RadialMeasure):
    """Density scale * r^(-alpha-1) e^(-beta r) dr, alpha < 2, beta > 0."""

    alpha: float
    scale: float
    beta: float
    has_density = True

    def __post_init__(self):
        if not (self.alpha < 2.0):
            raise ValueError(f"tempered index must be < 2, got {self.alpha}")
        if not (self.scale > 0 and self.beta > 0):
            raise ValueError("scale and beta must be positive")

    def tail(self, r):
        r = np.asarray(r, dtype=float)
        out = self.scale * self.beta**self.alpha * upper_gamma(-self.alpha, self.beta * r)
        return out if np.ndim(r) else float(out)

    def density(self, r):
        r = np.asarray(r, dtype=float)
        out = self.scale * r ** (-self.alpha - 1.0) * np.exp(-self.beta * r)
        return out if out.ndim else float(out)

    def support(self):
        return 0.0, math.inf

    def effective_upper(self):
        return (-math.log(TAIL_TRUNCATION) + 10.0) / self.beta

    def truncated_second_moment(self, r):
        a = 2.0 - self.alpha  # > 0
        return float(
            self.scale * self.beta ** (self.alpha - 2.0) * special.gammainc(a, self.beta * r) * special.gamma(a)
        )

    def scaled(self, c):
        return TemperedRadial(self.alpha, c * self.scale, self.beta)

    def integrate(self, fn, lo, hi):
        hi = min(hi, self.effective_upper())
        if hi <= lo:
            return 0.0
        return adaptive_quad(lambda r: fn(r) * self.density(r), max(lo, 0.0), hi)

    def log_weight_tail_integral(self, m):
        if m == 0:
            return self.tail(1.0)
        return self.integrate(lambda r: np.log(r) ** m, 1.0, math.inf)


def _poly_exp_coeffs(coeffs: np.ndarray, delta, k: float) -> np.ndarray:
    """∫_0^delta (c0 t^3 + c1 t^2 + c2 t + c3) e^(k t) dt, vectorized over segments.

    ``coeffs`` has shape (4, n) (highest power first), ``delta`` shape (n,).
    The upward recursion for ∫ t^p e^{kt} dt cancels catastrophically when
    k*delta is small (narrow segments can carry huge cubic coefficients), so
    those use the series ∫ t^p e^{kt} dt = delta^{p+1} sum (k delta)^m / (m! (p+m+1)).
    """
    delta = np.asarray(delta, dtype=float)
    j = np.empty((4, delta.shape[0]))
    kd = k * delta
    large = kd >= 1.0
    if np.any(large):
        dl = delta[large]
        e = np.exp(k * dl)
        prev = (e - 1.0) / k
        j[0, large] = prev
        for p in range(1, 4):
            prev = (dl**p * e - p * prev) / k
            j[p, large] = prev
    small = ~large
    if np.any(small):
        ds = delta[small]
        kds = kd[small]
        for p in range(4):
            term = np.ones_like(ds)
            acc = term / (p + 1.0)
            for m in range(1, 30):
                term = term * kds / m
                acc = acc + term / (p + m + 1.0)
            j[p, small] = ds ** (p + 1) * acc
    return coeffs[0] * j[3] + coeffs[1] * j[2] + coeffs[2] * j[1] + coeffs[3] * j[0]


@dataclass(frozen=True)
class GridRadial(RadialMeasure):
    """Density given by nonnegative values on a log-spaced grid.

    Between nodes the density is interpolated in log r by a shape-preserving
    (monotone cubic) interpolant, so nonnegativity and monotonicity of the
    node data carry over to the interpolant.  The measure vanishes outside
    the grid's support.
    """

    r: np.ndarray
    values: np.ndarray
    has_density = True
    _state: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        v = np.maximum(np.asarray(self.values, dtype=float), 0.0)
        if r.ndim != 1 or r.size < 4:
            raise ValueError("grid radial measure needs at least 4 nodes")
        if not (np.all(np.diff(r) > 0) and r[0] > 0 and np.all(np.isfinite(r))):
            raise ValueError("grid radii must be finite, positive, strictly increasing")
        if v.shape != r.shape or not np.all(np.isfinite(v)):
            raise ValueError("density values must match the grid and be finite")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "values", v)
        x = np.log(r)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            # slopes spanning hundreds of orders of magnitude overflow the
            # interpolant's internal harmonic means; the limited result is fine
            interp = interpolate.PchipInterpolator(x, v, extrapolate=False)
        coeffs = interp.c  # (4, n-1)
        widths = np.diff(x)
        seg_mass = _poly_exp_coeffs(coeffs, widths, 1.0) * np.exp(x[:-1])
        seg_m2 = _poly_exp_coeffs(coeffs, widths, 3.0) * np.exp(3.0 * x[:-1])
        node_tail = np.concatenate([np.cumsum(seg_mass[::-1])[::-1], [0.0]])
        node_m2 = np.concatenate([[0.0], np.cumsum(seg_m2)])
        self._state.update(
            x=x, interp=interp, coeffs=coeffs, seg_mass=seg_mass,
            node_tail=node_tail, node_m2=node_m2,
        )

    def _segment_partial(self, xr: np.ndarray, k: float) -> tuple[np.ndarray, np.ndarray]:
        """Segment index and ∫ density * e^(k x) dx from the segment start to xr."""
        st = self._state
        idx = np.clip(np.searchsorted(st["x"], xr, side="right") - 1, 0, len(st["x"]) - 2)
        delta = xr - st["x"][idx]
        part = _poly_exp_coeffs(st["coeffs"][:, idx], delta, k) * np.exp(k * st["x"][idx])
        return idx, part

    def tail(self, r):
        st = self._state
        r_arr = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.zeros_like(r_arr)
        below = r_arr <= self.r[0]
        out[below] = st["node_tail"][0]
        inside = (~below) & (r_arr < self.r[-1])
        if np.any(inside):
            xr = np.log(r_arr[inside])
            idx, part = self._segment_partial(xr, 1.0)
            out[inside] = st["node_tail"][idx] - part
        out = np.maximum(out, 0.0)
        return out if np.ndim(r) else float(out[0])

    def density(self, r):
        r_arr = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.zeros_like(r_arr)
        inside = (r_arr >= self.r[0]) & (r_arr <= self.r[-1])
        if np.any(inside):
            out[inside] = np.maximum(self._state["interp"](np.log(r_arr[inside])), 0.0)
        return out if np.ndim(r) else float(out[0])

    def support(self):
        return float(self.r[0]), float(self.r[-1])

    def effective_upper(self):
        st = self._state
        total = st["node_tail"][0]
        if total <= 0:
            return float(self.r[-1])
        keep = st["node_tail"] > TAIL_TRUNCATION * total
        last = int(np.nonzero(keep)[0][-1]) if np.any(keep) else 0
        return float(self.r[min(last + 1, len(self.r) - 1)])

    def truncated_second_moment(self, r):
        st = self._state
        r_arr = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.zeros_like(r_arr)
        above = r_arr >= self.r[-1]
        out[above] = st["node_m2"][-1]
        inside = (r_arr > self.r[0]) & (~above)
        if np.any(inside):
            xr = np.log(r_arr[inside])
            idx, part = self._segment_partial(xr, 3.0)
            out[inside] = st["node_m2"][idx] + part
        out = np.maximum(out, 0.0)
        return out if np.ndim(r) else float(out[0])

    def scaled(self, c):
        return GridRadial(self.r, c * self.values)

    def integrate(self, fn, lo, hi):
        lo = max(lo, float(self.r[0]))
        hi = min(hi, float(self.r[-1]))
        if hi <= lo:
            return 0.0
        # Segment-wise Gauss-Legendre in log r: the integrand is smooth within
        # each interpolation segment.
        nodes, weights = np.polynomial.legendre.leggauss(12)
        x = self._state["x"]
        xlo, xhi = math.log(lo), math.log(hi)
        edges = np.unique(np.concatenate([[xlo], x[(x > xlo) & (x < xhi)], [xhi]]))
        a, b = edges[:-1], edges[1:]
        mid, half = (a + b) / 2.0, (b - a) / 2.0
        xs = mid[:, None] + half[:, None] * nodes[None, :]
        rs = np.exp(xs)
        vals = fn(rs) * np.maximum(self._state["interp"](xs), 0.0) * rs
        return float(np.sum(vals * weights[None, :] * half[:, None]))

    def _hermite_r(self):
        """Per-segment cubic-in-r Hermite coefficients (y0, m0, a, b)."""
        st = self._state
        if "hermite" not in st:
            x, interp = st["x"], st["interp"]
            r = self.r
            y = np.maximum(interp(x), 0.0)
            slope_r = interp.derivative()(x) / r  # d/dr = (d/dx) / r
            h = np.diff(r)
            y0, y1 = y[:-1], y[1:]
            m0, m1 = slope_r[:-1], slope_r[1:]
            sec = (y1 - y0) / h
            a = (3.0 * sec - 2.0 * m0 - m1) / h
            b = (m0 + m1 - 2.0 * sec) / h**2
            st["hermite"] = (y0, m0, a, b, h)
        return st["hermite"]

    def oscillatory_integral(self, omega: float, kind: str, lo: float, hi: float) -> float:
        """∫ cos/sin(omega r) * density(r) dr over (lo, hi).

        Slowly oscillating segments (phase < 1/2) use Gauss-Legendre on the
        interpolant; fast ones use the closed form for a cubic-in-r Hermite
        refit of the segment, which agrees with the interpolant to the same
        order and keeps the cost linear in the segment count.
        """
        lo = max(lo, float(self.r[0]))
        hi = min(hi, float(self.r[-1]))
        if hi <= lo or omega <= 0:
            return 0.0
        y0, m0, a, b, h = self._hermite_r()
        r0 = self.r[:-1]
        clip_lo = np.clip(lo - r0, 0.0, h)
        clip_hi = np.clip(hi - r0, 0.0, h)
        active = clip_hi > clip_lo
        total = 0.0

        phase = omega * (clip_hi - clip_lo)
        closed = active & (phase >= 0.5)
        if np.any(closed):
            idx = np.nonzero(closed)[0]
            d0, d1 = clip_lo[idx], clip_hi[idx]
            Y0, M0, A, B = y0[idx], m0[idx], a[idx], b[idx]
            base = r0[idx]

            def bracket(delta):
                p = Y0 + delta * (M0 + delta * (A + delta * B))
                p1 = M0 + delta * (2.0 * A + 3.0 * B * delta)
                p2 = 2.0 * A + 6.0 * B * delta
                p3 = 6.0 * B
                cw = np.cos(omega * (base + delta))
                sw = np.sin(omega * (base + delta))
                if kind == "cos":
                    return p * sw / omega + p1 * cw / omega**2 - p2 * sw / omega**3 - p3 * cw / omega**4
                return -p * cw / omega + p1 * sw / omega**2 + p2 * cw / omega**3 - p3 * sw / omega**4

            total += float(np.sum(bracket(d1) - bracket(d0)))

        direct = active & ~closed
        if np.any(direct):
            idx = np.nonzero(direct)[0]
            nodes, weights = np.polynomial.legendre.leggauss(12)
            d0, d1 = clip_lo[idx], clip_hi[idx]
            mid, half = (d0 + d1) / 2.0, (d1 - d0) / 2.0
            deltas = mid[:, None] + half[:, None] * nodes[None, :]
            Y0, M0, A, B = (arr[idx, None] for arr in (y0, m0, a, b))
            vals = Y0 + deltas * (M0 + deltas * (A + deltas * B))
            rs = r0[idx, None] + deltas
            osc = np.cos(omega * rs) if kind == "cos" else np.sin(omega * rs)
            total += float(np.sum(np.maximum(vals, 0.0) * osc * weights[None, :] * half[:, None]))
        return total

    def log_weight_tail_integral(self, m):
        if m == 0:
            return self.tail(1.0)
        if self.r[-1] <= 1.0:
            return 0.0
        value = self.integrate(lambda r: np.log(r) ** m, 1.0, math.inf)
        if self._diverges_by_shell_growth(m):
            return math.inf
        return value

    def _diverges_by_shell_growth(self, m: int) -> bool:
        """Dyadic-shell heuristic for tail divergence of the log-weighted mass.

        The support grid is finite, so the integral over it always exists;
        this classifies whether the shell masses decay fast enough for the
        untruncated integral to be finite.
        """
        k_lo = max(0, int(math.ceil(math.log2(max(self.r[0], 1.0)))))
        k_hi = int(math.floor(math.log2(self.r[-1])))
        ks = list(range(k_lo, k_hi))
        if len(ks) < 6:
            return False
        shells = np.array(
            [self.integrate(lambda r: np.log(np.maximum(r, 1.0)) ** m, 2.0**k, 2.0 ** (k + 1)) for k in ks]
        )
        shells = shells[-8:]
        if np.any(shells <= 0):
            return False
        ratios = shells[1:] / shells[:-1]
        if np.max(ratios[-5:]) < 0.85:
            return False  # clear geometric decay
        # shells ~ k^(-p): divergent when p <= 1 and the decay is not geometric
        kk = np.log(np.arange(len(shells)) + float(len(ks)) - len(shells) + 1.0)
        slope = np.polyfit(kk, np.log(shells), 1)[0]
        return bool(np.min(ratios[-5:]) >= 0.9 and -slope <= 1.25)


_RADIAL_KINDS = {"atom", "power-law", "tempered", "grid"}


def radial_from_dict(spec: dict) -> RadialMeasure:
    kind = spec.get("kind")
    try:
        if kind == "atom":
            return AtomicRadial(tuple((r, m) for r, m in spec["atoms"]))
        if kind == "power-law":
            return PowerLawRadial(spec["alpha"], spec["scale"])
        if kind == "tempered":
            return TemperedRadial(spec["alpha"], spec["scale"], spec["beta"])
        if kind == "grid":
            return GridRadial(np.asarray(spec["r"]), np.asarray(spec["density"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad radial measure spec ({kind}): {exc}") from exc
    raise SchemaError(f"unknown radial kind {kind!r}; expected one of {sorted(_RADIAL_KINDS)}")


def radial_to_dict(rm: RadialMeasure) -> dict:
    if isinstance(rm, AtomicRadial):
        return {"kind": "atom", "atoms": [[r, m] for r, m in rm.atoms]}
    if isinstance(rm, PowerLawRadial):
        return {"kind": "power-law", "alpha": rm.alpha, "scale": rm.scale}
    if isinstance(rm, TemperedRadial):
        return {"kind": "tempered", "alpha": rm.alpha, "scale": rm.scale, "beta": rm.beta}
    if isinstance(rm, GridRadial):
        return {"kind": "grid", "r": rm.r.tolist(), "density": rm.values.tolist()}
    raise SchemaError(f"cannot serialize radial measure of type {type(rm).__name__}")


# ---------------------------------------------------------------------------
# Polar Lévy measures and triplets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Ray:
    """One direction of a polar decomposition: (xi, weight, radial measure)."""

    direction: Direction
    weight: float
    radial: RadialMeasure

    def __post_init__(self):
        if not (self.weight > 0 and math.isfinite(self.weight)):
            raise ValueError(f"spherical weight must be positive and finite, got {self.weight}")


@dataclass(frozen=True)
class PolarLevyMeasure:
    """Lévy measure nu(d r, d xi) = sum over rays of weight * nu_xi(dr) * delta_xi."""

    rays: tuple[Ray, ...]

    def __post_init__(self):
        if not self.rays:
            raise ValueError("polar Lévy measure needs at least one direction")
        object.__setattr__(self, "rays", tuple(self.rays))
        dims = {ray.direction.dim for ray in self.rays}
        if len(dims) != 1:
            raise ValueError(f"all directions must share one dimension, got {sorted(dims)}")

    @property
    def dim(self) -> int:
        return self.rays[0].direction.dim

    def mass_above(self, r: float) -> float:
        """nu({|x| > r}) = sum of weighted radial tails (directions are unit)."""
        return float(sum(ray.weight * ray.radial.tail(r) for ray in self.rays))


@dataclass(frozen=True)
class LevyTriplet:
    """Generating triplet (A, nu, gamma) of an infinitely divisible law."""

    A: np.ndarray
    nu: PolarLevyMeasure | None
    gamma: np.ndarray
    provenance: tuple[str, ...] = ()

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        gamma = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        d = gamma.shape[0]
        if A.shape != (d, d):
            raise ValueError(f"A must be {d}x{d}, got {A.shape}")
        if not np.all(np.isfinite(A)) or not np.all(np.isfinite(gamma)):
            raise ValueError("A and gamma must be finite")
        if not np.allclose(A, A.T, atol=1e-10):
            raise ValueError("A must be symmetric")
        if np.linalg.eigvalsh((A + A.T) / 2.0).min() < -1e-12:
            raise ValueError("A must be nonnegative definite")
        if self.nu is not None and self.nu.dim != d:
            raise ValueError(f"Lévy measure dimension {self.nu.dim} != drift dimension {d}")
        A.setflags(write=False)
        gamma.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "provenance", tuple(self.provenance))

    @property
    def dim(self) -> int:
        return self.gamma.shape[0]


@dataclass(frozen=True)
class StableLaw:
    """Parameters of a stable law: index, spherical weights, shift, scale."""

    alpha: float
    spherical: tuple[tuple[Direction, float], ...]
    tau: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.alpha <= 2.0):
            raise ValueError(f"stable index must lie in (0, 2], got {self.alpha}")
        if not (self.scale > 0):
            raise ValueError("scale must be positive")
        sph = tuple((xi, float(w)) for xi, w in self.spherical)
        if not sph or any(w <= 0 for _, w in sph):
            raise ValueError("spherical weights must be positive")
        tau = np.atleast_1d(np.asarray(self.tau, dtype=float))
        tau.setflags(write=False)
        object.__setattr__(self, "spherical", sph)
        object.__setattr__(self, "tau", tau)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def radial_tail(rm: RadialMeasure, r: float) -> float:
    """Mass of the open ray (r, inf) under the radial measure."""
    if not (r > 0):
        raise ValueError("radius must be positive")
    return float(rm.tail(r))


def h_function(rm: RadialMeasure, u: float) -> float:
    """Exponentially tilted tail h(u) = e^(-u) * nu((e^u, inf)), u real.

    This is the quantity whose repeated monotonicity witnesses how deeply a
    law sits in the iterated-transform hierarchy.
    """
    eu = math.exp(min(u, 700.0))
    t = float(rm.tail(eu))
    if t == 0.0:
        return 0.0
    return math.exp(-u) * t


def log_moment(nu: PolarLevyMeasure, m: int) -> float:
    """∫ (log|x|)^m nu(dx) over {|x| > 1}; returns math.inf when divergent.

    Divergence can only be reported for grid densities, via a dyadic-shell
    growth test; the other kinds have closed-form or clearly finite values.
    """
    if m < 0:
        raise ValueError("moment order must be nonnegative")
    total = 0.0
    for ray in nu.rays:
        part = ray.radial.log_weight_tail_integral(m)
        if math.isinf(part):
            return math.inf
        total += ray.weight * part
    return total


def normalize_polar(nu: PolarLevyMeasure) -> PolarLevyMeasure:
    """Rebalance a polar decomposition to the canonical normalization.

    After rebalancing the spherical weights sum to one and every direction
    carries the same square-capped radial mass c = ∫ (|x|^2 ∧ 1) nu(dx); the
    measure itself is unchanged (each ray is rescaled by c(xi) and 1/c(xi)).
    """
    caps = [ray.radial.square_cap_mass() for ray in nu.rays]
    for ray, q in zip(nu.rays, caps):
        if not (q > 0 and math.isfinite(q)):
            raise DomainError(
                f"direction {ray.direction.coords} has degenerate radial mass {q}"
            )
    c = float(sum(ray.weight * q for ray, q in zip(nu.rays, caps)))
    rays = tuple(
        Ray(ray.direction, ray.weight * q / c, ray.radial.scaled(c / q))
        for ray, q in zip(nu.rays, caps)
    )
    return PolarLevyMeasure(rays)


# -- characteristic exponent -------------------------------------------------


from functools import lru_cache


def _cos_remainder(x: float) -> float:
    """cos(x) - 1 + x^2/2, evaluated without cancellation near zero."""
    if x < 0.1:
        x2 = x * x
        return x2 * x2 / 24.0 * (1.0 - x2 / 30.0 * (1.0 - x2 / 56.0))
    return math.cos(x) - 1.0 + 0.5 * x * x


def _sin_remainder(x: float) -> float:
    """sin(x) - x, evaluated without cancellation near zero."""
    if x < 0.1:
        x2 = x * x
        return -x * x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0))
    return math.sin(x) - x


@lru_cache(maxsize=256)
def _power_law_real_part(alpha: float) -> float:
    """∫_0^inf (cos(rho) - 1) rho^(-alpha-1) d rho, split at rho = 1.

    The leading -rho^2/2 of the head is integrated analytically so the
    remaining integrand is O(rho^(3-alpha)) and smooth up to alpha -> 2.
    """
    head = adaptive_quad(
        lambda x: _cos_remainder(x) * x ** (-alpha - 1.0), 0.0, 1.0
    ) - 0.5 / (2.0 - alpha)
    tail = oscillatory_quad(lambda x: x ** (-alpha - 1.0), 1.0, math.inf, 1.0, "cos")
    return head + tail - 1.0 / alpha


@lru_cache(maxsize=256)
def _power_law_sin_tail(alpha: float) -> float:
    return oscillatory_quad(lambda x: x ** (-alpha - 1.0), 1.0, math.inf, 1.0, "sin")


@lru_cache(maxsize=256)
def _power_law_sin_head(alpha: float) -> float:
    """∫_0^1 (sin(rho) - rho) rho^(-alpha-1) d rho."""
    return adaptive_quad(lambda x: _sin_remainder(x) * x ** (-alpha - 1.0), 0.0, 1.0)


def _int_pow(p: float, a: float, b: float) -> float:
    if abs(p + 1.0) < 1e-14:
        return math.log(b / a)
    return (b ** (p + 1.0) - a ** (p + 1.0)) / (p + 1.0)


def _power_law_comp_head(alpha: float, w: float) -> float:
    """∫_0^1 x^(2-alpha) / (w^2 + x^2) dx without a boundary layer at x = w.

    Substituting x = w y moves the layer to y = 1; the tail of the scaled
    integrand beyond y = 10 is summed as a short alternating series.
    """
    b = 1.0 / w
    cut = min(b, 10.0)
    q = adaptive_quad(lambda y: y ** (2.0 - alpha) / (1.0 + y * y), 0.0, cut, epsrel=1e-12)
    if b > cut:
        for k in range(6):  # 1/(1+y^2) = sum (-1)^k y^(-2-2k), y >= 10
            q += (-1.0) ** k * _int_pow(-alpha - 2.0 * k, cut, b)
    return w ** (1.0 - alpha) * q


def _power_law_exponent_integral(rm: PowerLawRadial, t: float) -> complex:
    """Scaled evaluation for the power-law kind: substitute rho = r |t|.

    The oscillation frequency is always one, so the quadrature stays
    conditioned uniformly in t; t enters only via the prefactor |t|^alpha and
    smooth compensator integrals.
    """
    a = rm.alpha
    w = abs(t)
    sgn = 1.0 if t > 0 else -1.0
    comp_tail = w * w * adaptive_quad(
        lambda x: x ** (-a) / (w * w + x * x), 1.0, math.inf, epsrel=1e-12
    )
    imag = _power_law_sin_head(a) + _power_law_comp_head(a, w) + _power_law_sin_tail(a) - comp_tail
    return rm.scale * w**a * complex(_power_law_real_part(a), sgn * imag)


@lru_cache(maxsize=256)
def _tempered_compensator_constant(alpha: float, beta: float) -> float:
    if alpha < 1.0:
        return adaptive_quad(
            lambda r: r ** (-alpha) * math.exp(-beta * r) / (1.0 + r * r),
            0.0,
            math.inf,
            epsabs=1e-13,
            epsrel=1e-11,
        )
    return adaptive_quad(
        lambda r: r ** (-alpha) * (1.0 - math.exp(-beta * r) / (1.0 + r * r)),
        0.0,
        math.inf,
        epsabs=1e-13,
        epsrel=1e-11,
    )


def _tempered_exponent_integral(rm: TemperedRadial, t: float) -> complex:
    """Closed form via analytic continuation of ∫ (e^{-qr} - 1 [+ qr]) r^(-a-1) dr.

    Valid away from the Gamma poles at alpha = 0 and alpha = 1; callers fall
    back to quadrature near them.
    """
    a, beta = rm.alpha, rm.beta
    q = complex(beta, -t)
    base = special.gamma(-a) * (q**a - beta**a)
    J = _tempered_compensator_constant(a, beta)
    correction = -1j * t * J if a < 1.0 else 1j * t * J
    return rm.scale * (base + correction)


def _radial_exponent_integral(rm: RadialMeasure, t: float) -> complex:
    """∫ (e^{i r t} - 1 - i r t/(1+r^2)) nu(dr) for a single direction.

    The oscillatory tail is handled by dedicated Fourier quadrature; the
    compensator and constant terms are split off so each piece converges
    absolutely.
    """
    if t == 0.0:
        return 0.0j
    w = abs(t)

    if isinstance(rm, AtomicRadial):
        radii, masses = rm._arrays()
        val = np.sum(masses * (np.exp(1j * radii * t) - 1.0 - 1j * radii * t / (1.0 + radii**2)))
        return complex(val)

    if isinstance(rm, PowerLawRadial):
        return _power_law_exponent_integral(rm, t)

    if isinstance(rm, TemperedRadial) and (
        0.05 <= rm.alpha <= 0.95 or 1.05 <= rm.alpha <= 1.95
    ):
        return _tempered_exponent_integral(rm, t)

    lo, _ = rm.support()
    hi = rm.effective_upper()
    rc = min(1.0 / w, hi)

    # Non-oscillatory region (phase <= 1): keep the compensated integrands
    # together so both converge absolutely near r = 0.
    real = rm.integrate(lambda r: np.cos(w * r) - 1.0, lo, rc)
    imag = rm.integrate(lambda r: np.sin(w * r) - w * r / (1.0 + r * r), lo, rc)

    if rc < hi:
        # Oscillatory tail: Fourier quadrature of the density, with the
        # constant and compensator terms split off.
        upper = math.inf if math.isinf(hi) else hi
        if isinstance(rm, GridRadial):
            cos_part = rm.oscillatory_integral(w, "cos", rc, upper)
            sin_part = rm.oscillatory_integral(w, "sin", rc, upper)
        else:
            cos_part = oscillatory_quad(rm.density, rc, upper, w, "cos")
            sin_part = oscillatory_quad(rm.density, rc, upper, w, "sin")
        mass_part = float(rm.tail(rc)) - (0.0 if math.isinf(upper) else float(rm.tail(upper)))
        comp = rm.integrate(lambda r: r / (1.0 + r * r), rc, upper)
        real += cos_part - mass_part
        imag += sin_part - w * comp

    out = complex(real, imag)
    return out.conjugate() if t < 0 else out


def cumulant_eval(triplet: LevyTriplet, z) -> complex:
    """Characteristic exponent C(z) of the law with the given triplet.

    C(0) = 0 exactly; the radial integral is evaluated per direction by
    quadrature (exactly, for atomic radial parts).
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.shape != (triplet.dim,):
        raise ValueError(f"z must have shape ({triplet.dim},), got {z.shape}")
    if not np.all(np.isfinite(z)):
        raise ValueError("z must be finite")
    if not np.any(z):
        return 0j
    value = complex(-0.5 * z @ triplet.A @ z, triplet.gamma @ z)
    if triplet.nu is not None:
        for ray in triplet.nu.rays:
            t = float(ray.direction.vector @ z)
            value += ray.weight * _radial_exponent_integral(ray.radial, t)
    return value


# ---------------------------------------------------------------------------
# Distribution JSON schema
# ---------------------------------------------------------------------------


def triplet_to_dict(tr: LevyTriplet) -> dict:
    out = {
        "dimension": tr.dim,
        "A": tr.A.tolist(),
        "gamma": tr.gamma.tolist(),
    }
    if tr.nu is not None:
        out["levy"] = {
            "directions": [
                {
                    "xi": list(ray.direction.coords),
                    "weight": ray.weight,
                    "radial": radial_to_dict(ray.radial),
                }
                for ray in tr.nu.rays
            ]
        }
    if tr.provenance:
        out["provenance"] = list(tr.provenance)
    return out


def triplet_from_dict(spec: dict) -> LevyTriplet:
    try:
        d = int(spec["dimension"])
        A = np.asarray(spec["A"], dtype=float)
        gamma = np.asarray(spec["gamma"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad triplet spec: {exc}") from exc
    nu = None
    levy = spec.get("levy")
    if levy:
        try:
            rays = tuple(
                Ray(
                    Direction(tuple(entry["xi"])),
                    float(entry["weight"]),
                    radial_from_dict(entry["radial"]),
                )
                for entry in levy["directions"]
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad Lévy measure spec: {exc}") from exc
        nu = PolarLevyMeasure(rays)
    try:
        tr = LevyTriplet(A, nu, gamma, tuple(spec.get("provenance", ())))
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc
    if tr.dim != d:
        raise SchemaError(f"declared dimension {d} != data dimension {tr.dim}")
    return tr


def default_grid(bounds=DEFAULT_GRID_BOUNDS, size=DEFAULT_GRID_SIZE) -> np.ndarray:
    """The standard log-spaced radius grid used for transformed densities."""
    return np.geomspace(bounds[0], bounds[1], size)

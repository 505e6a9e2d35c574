"""Apply mapping kernels to cumulants, triplets and radial measures.

A kernel phi_f sends an infinitely divisible law mu to the law of
∫_0^s0 f(s) dX_s over a Lévy process with time-one law mu.  On the level of
the representation this acts as

  * cumulant:  C(z) -> ∫_0^s0 C(f(s) z) ds = ∫_0^t0 C(t z) p(t) dt,
  * Gaussian:  A -> (∫ f^2) A,
  * radial:    nu_xi -> density  l(u) = ∫_{u/t0}^inf p(u/r) r^{-1} nu_xi(dr),
  * drift:     gamma -> (∫ f) gamma + centering correction (a double
               integral over (t, r) coming from the |x|^2/(1+|x|^2) shift).

Composed kernels apply their factors in sequence.  The exponential-shrinking
kernel demands a finite first logarithmic moment of the input; violations
raise DomainError, never silently truncate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .kernels import MappingKernel
from .measures import (
    DEFAULT_GRID_BOUNDS,
    DEFAULT_GRID_SIZE,
    AtomicRadial,
    GridRadial,
    LevyTriplet,
    PolarLevyMeasure,
    RadialMeasure,
    Ray,
    cumulant_eval,
    log_moment,
)
from .quadrature import adaptive_quad, complex_quad, oscillatory_quad

_LOG_ORDER_CAP = 8


@dataclass(frozen=True)
class CumulantFn:
    """A characteristic exponent z -> C(z) with domain metadata.

    ``log_moment_order`` records how many logarithmic-moment orders the
    underlying law is known to possess; each application of the
    exponential-shrinking kernel consumes one.
    """

    eval: object
    log_moment_order: float
    provenance: tuple[str, ...] = ()

    def __call__(self, z) -> complex:
        return self.eval(np.atleast_1d(np.asarray(z, dtype=float)))


def triplet_log_order(tr: LevyTriplet, cap: int = _LOG_ORDER_CAP) -> float:
    """Largest m <= cap with finite ∫ (log|x|)^m nu(dx) over |x|>1 (inf if all)."""
    if tr.nu is None:
        return math.inf
    order = 0
    while order < cap and math.isfinite(log_moment(tr.nu, order + 1)):
        order += 1
    return math.inf if order == cap else float(order)


def as_cumulant_fn(mu) -> CumulantFn:
    """Wrap a triplet (or pass through a CumulantFn) as a cumulant evaluator."""
    if isinstance(mu, CumulantFn):
        return mu
    if isinstance(mu, LevyTriplet):
        return CumulantFn(
            eval=lambda z: cumulant_eval(mu, z),
            log_moment_order=triplet_log_order(mu),
            provenance=mu.provenance or ("triplet",),
        )
    raise TypeError(f"expected LevyTriplet or CumulantFn, got {type(mu).__name__}")


def _require_log_moment(kernel: MappingKernel, order: float, what: str) -> None:
    if kernel.log_moment_cost > order:
        raise DomainError(
            f"kernel {kernel.name} needs a finite first logarithmic moment of {what}; "
            "the input does not have one"
        )


def mapped_cumulant_fn(kernel: MappingKernel, mu) -> CumulantFn:
    """Cumulant evaluator of the mapped law (lazy; no grids involved).

    When the input is a triplet, the first factor maps it term by term:
    Gaussian and drift parts pick up their moment factors exactly, atomic
    rays go through the kernel's Fourier transform (dedicated oscillatory
    quadrature, conditioned uniformly in the argument), and density rays
    through a smooth one-dimensional integral of their exponent.
    """
    factors = kernel.factors or (kernel,)
    if isinstance(mu, LevyTriplet):
        fn = _map_triplet_structured(factors[0], mu)
        factors = factors[1:]
    else:
        fn = as_cumulant_fn(mu)
    for factor in factors:
        fn = _map_once(factor, fn)
    return fn


def _kernel_exp_minus_one(kernel: MappingKernel, u: float) -> complex:
    """∫_0^t0 (e^{i t u} - 1) p(t) dt, the kernel's compensated Fourier transform."""
    if u == 0.0:
        return 0j
    w = abs(u)
    t0 = kernel.t0
    tc = min(1.0 / w, kernel.effective_reach())
    real = adaptive_quad(lambda t: (math.cos(w * t) - 1.0) * kernel.p(t), 0.0, tc)
    imag = adaptive_quad(lambda t: math.sin(w * t) * kernel.p(t), 0.0, tc)
    if tc < t0:
        real += oscillatory_quad(kernel.p, tc, t0, w, "cos") - adaptive_quad(kernel.p, tc, t0)
        imag += oscillatory_quad(kernel.p, tc, t0, w, "sin")
    out = complex(real, imag)
    return out.conjugate() if u < 0 else out


def _map_triplet_structured(kernel: MappingKernel, tr: LevyTriplet) -> CumulantFn:
    order = triplet_log_order(tr)
    _require_log_moment(kernel, order, "the triplet")
    f2 = kernel.square_integral()
    f1 = kernel.first_integral()

    def mapped(z: np.ndarray) -> complex:
        if not np.any(z):
            return 0j
        value = complex(-0.5 * f2 * (z @ tr.A @ z), f1 * (tr.gamma @ z))
        if tr.nu is None:
            return value
        for ray in tr.nu.rays:
            t_dir = float(ray.direction.vector @ z)
            if t_dir == 0.0:
                continue
            rm = ray.radial
            if isinstance(rm, AtomicRadial):
                part = 0j
                for r, mass in rm.atoms:
                    part += mass * (
                        _kernel_exp_minus_one(kernel, t_dir * r)
                        - 1j * f1 * t_dir * r / (1.0 + r * r)
                    )
            else:
                part = complex_quad(
                    lambda t: _weighted_exponent(kernel, rm, t, t_dir),
                    0.0,
                    kernel.t0,
                    epsabs=1e-12,
                    epsrel=1e-10,
                )
            value += ray.weight * part
        return value

    return CumulantFn(
        eval=mapped,
        log_moment_order=order - kernel.log_moment_cost,
        provenance=(tr.provenance or ("triplet",)) + (kernel.name,),
    )


def _weighted_exponent(kernel: MappingKernel, rm, t: float, t_dir: float) -> complex:
    from .measures import _radial_exponent_integral

    weight = kernel.p(t)
    if not weight > 1e-18:  # decayed beyond relevance; skip the inner integral
        return 0j
    return _radial_exponent_integral(rm, t * t_dir) * weight


def _map_once(kernel: MappingKernel, fn: CumulantFn) -> CumulantFn:
    _require_log_moment(kernel, fn.log_moment_order, "its input")

    def integrand(t: float, z: np.ndarray) -> complex:
        weight = kernel.p(t)
        if not weight > 1e-18:
            return 0j
        return fn(t * z) * weight

    def mapped(z: np.ndarray) -> complex:
        if not np.any(z):
            return 0j
        return complex_quad(
            lambda t: integrand(t, z), 0.0, kernel.t0, epsabs=1e-11, epsrel=1e-9
        )

    return CumulantFn(
        eval=mapped,
        log_moment_order=fn.log_moment_order - kernel.log_moment_cost,
        provenance=fn.provenance + (kernel.name,),
    )


def map_cumulant(kernel: MappingKernel, mu, z) -> complex:
    """C of the mapped law at z: ∫_0^s0 C(f(s) z) ds, via the t-substitution."""
    return mapped_cumulant_fn(kernel, mu)(z)


# ---------------------------------------------------------------------------
# Radial transform
# ---------------------------------------------------------------------------


class _TransformedDensity:
    """A mapped radial density callable plus its known non-smooth radii."""

    def __init__(self, fn, breaks=()):
        self._fn = fn
        self.breaks = tuple(sorted(breaks))

    def __call__(self, u: float) -> float:
        return self._fn(u)


def _piecewise_quad(f, lo: float, hi: float, interior, **kw) -> float:
    """Adaptive quadrature split at known interior kinks (hi may be inf)."""
    pts = sorted(p for p in interior if lo < p < hi)
    edges = [lo, *pts, hi]
    return sum(adaptive_quad(f, a, b, **kw) for a, b in zip(edges[:-1], edges[1:]))


def radial_transform_density(kernel: MappingKernel, rm: RadialMeasure) -> _TransformedDensity:
    """The mapped radial density u -> ∫_{u/t0}^inf p(u/r) r^{-1} nu(dr).

    Returned as a callable so compositions can nest exactly, without an
    intermediate grid.  For the exponential-shrinking kernel the integral
    collapses to tail(u)/u.
    """
    if kernel.is_composition:
        inner = rm
        for factor in kernel.factors[:-1]:
            inner = _CallableRadial(radial_transform_density(factor, inner))
        return radial_transform_density(kernel.factors[-1], inner)

    if kernel.name == "phi":
        def phi_density(u: float) -> float:
            return float(rm.tail(u)) / u if u > 0 else 0.0

        breaks = [r for r, _ in rm.atoms] if isinstance(rm, AtomicRadial) else []
        if isinstance(rm, GridRadial):
            breaks = [float(rm.r[0]), float(rm.r[-1])]
        return _TransformedDensity(phi_density, breaks)

    finite_t0 = math.isfinite(kernel.t0)

    if isinstance(rm, AtomicRadial):
        def atom_density(u: float) -> float:
            total = 0.0
            for r, mass in rm.atoms:
                w = u / r
                if w < kernel.t0:
                    total += mass * kernel.p(w) / r
            return total

        breaks = [r * kernel.t0 for r, _ in rm.atoms] if finite_t0 else []
        return _TransformedDensity(atom_density, breaks)

    if isinstance(rm, GridRadial):
        # the grid's segment-exact integrator handles the many interpolation
        # knots; the integrand r -> p(u/r)/r is smooth between them
        def grid_density(u: float) -> float:
            r_lo = u / kernel.t0 if finite_t0 else 0.0
            return rm.integrate(lambda r: kernel.p(u / r) / r, r_lo, math.inf)

        breaks = [float(rm.r[0]) * kernel.t0, float(rm.r[-1]) * kernel.t0] if finite_t0 else []
        return _TransformedDensity(grid_density, breaks)

    lo, hi = rm.support()
    hi_eff = rm.effective_upper()
    inner_breaks = list(getattr(rm, "breaks", ()))

    def density(u: float) -> float:
        # substitute w = u/r: ∫ p(w) * dens(u/w) / w dw over (u/hi, u/lo) ∩ (0, t0),
        # capped where the kernel weight has decayed to nothing
        w_lo = 0.0 if math.isinf(hi_eff) else u / hi_eff
        w_hi = kernel.t0 if lo <= 0.0 else min(kernel.t0, u / lo)
        w_hi = min(w_hi, kernel.effective_reach())
        if w_hi <= w_lo:
            return 0.0
        kinks = [u / b for b in inner_breaks if b > 0]
        return _piecewise_quad(
            lambda w: kernel.p(w) * rm.density(u / w) / w,
            w_lo,
            w_hi,
            kinks,
            epsabs=1e-12,
            epsrel=1e-9,
        )

    # integration against p smooths interior jumps; only a jump of p itself
    # at t0 propagates kinks to the image
    breaks = [b * kernel.t0 for b in inner_breaks] if finite_t0 else []
    return _TransformedDensity(density, breaks)


class _CallableRadial(RadialMeasure):
    """Adapter: an absolutely continuous radial measure given by a density callable."""

    has_density = True

    def __init__(self, density: _TransformedDensity):
        self._density = density
        self.breaks = density.breaks

    def density(self, r):
        if np.ndim(r):
            return np.array([max(self._density(float(v)), 0.0) for v in np.ravel(r)]).reshape(np.shape(r))
        return max(self._density(float(r)), 0.0)

    def support(self):
        return 0.0, math.inf

    def effective_upper(self):
        return math.inf

    def tail(self, r):
        return adaptive_quad(lambda s: self._density(s), float(r), math.inf)


def map_radial(
    kernel: MappingKernel,
    rm: RadialMeasure,
    grid: np.ndarray | None = None,
) -> GridRadial:
    """Mapped radial measure, sampled as a grid density.

    The output is always a grid density (uniform downstream handling), with
    node values computed by exact nested quadrature from the input measure.
    Known discontinuities of the image get straddling nodes so the
    interpolant localizes each jump instead of smearing it over a segment.
    """
    if grid is None:
        grid = np.geomspace(DEFAULT_GRID_BOUNDS[0], DEFAULT_GRID_BOUNDS[1], DEFAULT_GRID_SIZE)
    dens = radial_transform_density(kernel, rm)
    extra = []
    for b in getattr(dens, "breaks", ()):
        if grid[0] < b < grid[-1]:
            # ladder of straddling nodes: confines both the jump and the
            # interpolant's derivative limiting to negligible segments
            for off in (1e-9, 1e-6, 1e-3):
                extra.extend((b * (1.0 - off), b * (1.0 + off)))
    if extra:
        grid = np.unique(np.concatenate([np.asarray(grid, dtype=float), extra]))
    values = np.array([dens(float(u)) for u in grid])
    return GridRadial(grid, np.maximum(values, 0.0))


# ---------------------------------------------------------------------------
# Triplet transform
# ---------------------------------------------------------------------------


def _drift_correction(kernel: MappingKernel, rm: RadialMeasure) -> float:
    """∫_0^t0 p(t) t ∫ r [ (1+t^2 r^2)^{-1} - (1+r^2)^{-1} ] nu(dr) dt."""
    hi = rm.effective_upper()

    def inner(t: float) -> float:
        t2 = t * t
        return rm.integrate(
            lambda r: r * (1.0 / (1.0 + t2 * r * r) - 1.0 / (1.0 + r * r)),
            0.0,
            hi,
        )

    return adaptive_quad(
        lambda t: kernel.p(t) * t * inner(t), 0.0, kernel.t0, epsabs=1e-10, epsrel=1e-8
    )


def map_triplet(
    kernel: MappingKernel,
    tr: LevyTriplet,
    grid: np.ndarray | None = None,
) -> LevyTriplet:
    """Triplet of the mapped law.

    Directions and weights are untouched; each radial measure is transformed,
    the Gaussian part scales by ∫ f^2, and the drift picks up the centering
    correction.
    """
    if kernel.is_composition:
        out = tr
        for factor in kernel.factors:
            out = map_triplet(factor, out, grid=grid)
        return LevyTriplet(out.A, out.nu, out.gamma, tr.provenance + (kernel.name,))

    if kernel.log_moment_cost and tr.nu is not None:
        if not math.isfinite(log_moment(tr.nu, kernel.log_moment_cost)):
            raise DomainError(
                f"kernel {kernel.name} needs a finite logarithmic moment of order "
                f"{kernel.log_moment_cost}; the Lévy measure's diverges"
            )

    f2 = kernel.square_integral()
    f1 = kernel.first_integral()
    A = f2 * tr.A
    gamma = f1 * tr.gamma.copy()
    nu = None
    if tr.nu is not None:
        rays = []
        for ray in tr.nu.rays:
            rays.append(Ray(ray.direction, ray.weight, map_radial(kernel, ray.radial, grid=grid)))
            gamma = gamma + ray.weight * _drift_correction(kernel, ray.radial) * ray.direction.vector
        nu = PolarLevyMeasure(tuple(rays))
    return LevyTriplet(A, nu, gamma, tr.provenance + (kernel.name,))


def iterate_map(
    kernel: MappingKernel,
    tr: LevyTriplet,
    m: int,
    grid: np.ndarray | None = None,
) -> LevyTriplet:
    """Apply the kernel m >= 1 times, recording the provenance chain."""
    if m < 1:
        raise ValueError("iteration count must be >= 1")
    out = tr
    for stage in range(1, m + 1):
        try:
            out = map_triplet(kernel, out, grid=grid)
        except DomainError as exc:
            raise DomainError(f"iteration stage {stage} of {kernel.name}: {exc}") from exc
    return out


# ---------------------------------------------------------------------------
# Identity verification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CommutativityReport:
    kernels: tuple[str, str]
    z_grid: tuple
    deviations: tuple[float, ...]
    max_deviation: float


def verify_commutativity(
    k0: MappingKernel,
    k1: MappingKernel,
    tr: LevyTriplet,
    z_grid,
) -> CommutativityReport:
    """Max cumulant gap between applying two finite-length kernels in
    either order, each side computed by its own nested quadrature."""
    for k in (k0, k1):
        if not k.finite_length:
            raise DomainError(f"commutativity check needs finite s0; {k.name} has s0={k.s0}")
    first = mapped_cumulant_fn(k1, mapped_cumulant_fn(k0, tr))
    second = mapped_cumulant_fn(k0, mapped_cumulant_fn(k1, tr))
    zs = [np.atleast_1d(np.asarray(z, dtype=float)) for z in z_grid]
    devs = tuple(abs(first(z) - second(z)) for z in zs)
    return CommutativityReport(
        kernels=(k0.name, k1.name),
        z_grid=tuple(tuple(z) for z in zs),
        deviations=devs,
        max_deviation=max(devs),
    )


def validate_cumulant_fn(fn: CumulantFn, z_samples, tol: float = 1e-9) -> None:
    """Check C(0)=0 and the Hermitian symmetry C(-z) = conj(C(z))."""
    zero = fn(np.zeros_like(np.atleast_1d(np.asarray(z_samples[0], dtype=float))))
    if abs(zero) != 0.0:
        raise ValueError(f"C(0) = {zero!r} != 0")
    for z in z_samples:
        a, b = fn(z), fn(-np.atleast_1d(np.asarray(z, dtype=float)))
        if abs(a - b.conjugate()) > tol * max(1.0, abs(a)):
            raise ValueError(f"C(-z) != conj(C(z)) at z={z}: {a!r} vs {b!r}")

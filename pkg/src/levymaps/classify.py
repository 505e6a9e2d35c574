"""Membership tests for the five monotonicity-defined classes.

Each class is a condition on the radial density l of the polar
decomposition, checked per direction:

  * "u":  l(r) decreasing,
  * "b":  l completely monotone,
  * "l":  r * l(r) decreasing,
  * "t":  r * l(r) completely monotone,
  * "g":  x -> l(sqrt(x)) completely monotone.

Complete monotonicity is tested to finite order K via divided differences of
sampled values; this is a numerical surrogate (infinite-order monotonicity is
undecidable from samples), with tolerances relative to the local scale of the
divided differences.  Nested depth is estimated from repeated sign conditions
on derivatives of the exponentially tilted tail h(u) = e^{-u} nu((e^u, inf));
that condition is necessary for membership at depth m, so the reported level
is an upper-bound witness, not a membership decision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .kernels import MappingKernel
from .measures import PolarLevyMeasure, RadialMeasure, h_function, log_moment
from .quadrature import adaptive_quad

CM_ORDER_DEFAULT = 6
CM_TOL_DEFAULT = 1e-6
DEC_TOL_DEFAULT = 1e-8

# Sampling windows.  Complete-monotonicity checks need spacing that keeps the
# divided-difference noise amplification (~ (2/h)^j / j!) far below the local
# signal, hence the narrower window and small point count.
_DEC_WINDOW = (1e-3, 1e3)
_DEC_POINTS = 301
_CM_WINDOW = (0.4, 12.0)
_CM_POINTS = 24

# Grid for derivative checks of the tilted tail h.
H_GRID_RANGE = (-14.0, 14.0)
H_GRID_SIZE = 1024
_H_STRIDE = 8  # divided differences use every 8th node (spacing ~0.22)

_CLASSES = ("u", "b", "l", "t", "g")


@dataclass(frozen=True)
class MonotonicityReport:
    """Outcome of sign checks on divided differences up to a given order."""

    order_tested: int
    verdicts: dict
    worst_by_order: dict
    worst_violation: float
    grid_used: str

    def passes(self, order: int) -> bool:
        return all(self.verdicts[j] for j in range(order + 1))


@dataclass(frozen=True)
class ClassVerdict:
    """Per-class verdicts with evidence; inclusion-consistent by construction.

    ``raw`` holds the direct per-class outcomes before the inclusion closure
    (t implies b and l; b implies g; any of b, l, g implies u) is applied.
    """

    verdicts: dict
    raw: dict
    evidence: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"verdicts": dict(self.verdicts), "raw": dict(self.raw), "evidence": dict(self.evidence)}


def check_decreasing(values, tol: float = DEC_TOL_DEFAULT):
    """Pass iff consecutive increases stay below tol times the local scale.

    Returns (passed, worst_violation) where the violation is the largest
    relative increase between consecutive samples on the (sorted) grid.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 3:
        raise ValueError("need at least 3 samples to test monotonicity")
    scale = np.maximum(np.maximum(np.abs(v[:-1]), np.abs(v[1:])), 1e-300)
    rises = np.diff(v) / scale
    worst = float(np.max(rises))
    return worst <= tol, max(worst, 0.0)


def _divided_differences(x: np.ndarray, v: np.ndarray, order: int) -> list[np.ndarray]:
    out = [v.copy()]
    for j in range(1, order + 1):
        prev = out[-1]
        denom = x[j:] - x[:-j]
        out.append((prev[1:] - prev[:-1]) / denom)
    return out


def _local_scale(arr: np.ndarray, window: int = 2) -> np.ndarray:
    a = np.abs(arr)
    out = np.empty_like(a)
    n = a.size
    for i in range(n):
        out[i] = a[max(0, i - window) : min(n, i + window + 1)].max()
    floor = 1e-12 * (a.max() if a.size else 0.0) + 1e-300
    return np.maximum(out, floor)


def check_completely_monotone(
    grid,
    values,
    order: int = CM_ORDER_DEFAULT,
    tol: float = CM_TOL_DEFAULT,
) -> MonotonicityReport:
    """Sign test (-1)^j D^j >= -tol * local scale for divided differences D^j.

    The grid should be increasing (typically log-spaced); divided differences
    use the actual abscissae, so nonuniform spacing is fine.
    """
    x = np.asarray(grid, dtype=float)
    v = np.asarray(values, dtype=float)
    if order < 1:
        raise ValueError("order must be >= 1")
    if x.size != v.size or x.size < order + 2:
        raise ValueError(f"need at least {order + 2} samples for order {order}")
    if np.any(np.diff(x) <= 0):
        raise ValueError("grid must be strictly increasing")
    span = np.max(np.abs(v))
    if not np.isfinite(span):
        raise ValueError("values must be finite")
    diffs = _divided_differences(x, v, order)
    verdicts, worst_by_order = {}, {}
    worst_all = 0.0
    for j, dj in enumerate(diffs):
        signed = (-1.0) ** j * dj
        viol = np.maximum(-signed, 0.0) / _local_scale(dj)
        worst = float(np.max(viol)) if viol.size else 0.0
        verdicts[j] = worst <= tol
        worst_by_order[j] = worst
        worst_all = max(worst_all, worst)
    return MonotonicityReport(
        order_tested=order,
        verdicts=verdicts,
        worst_by_order=worst_by_order,
        worst_violation=worst_all,
        grid_used=f"{x.size} points on [{x[0]:.4g}, {x[-1]:.4g}]",
    )


# ---------------------------------------------------------------------------
# Class verdicts
# ---------------------------------------------------------------------------


def _check_window(rm: RadialMeasure, window: tuple[float, float], n: int) -> np.ndarray:
    lo, hi = rm.support()
    lo, hi = max(window[0], lo), min(window[1], hi)
    if hi <= lo * (1.0 + 1e-9):
        lo, hi = window
    return np.geomspace(lo, hi, n)


def _node_abscissae(rm: RadialMeasure, window: tuple[float, float], n: int, min_points: int) -> np.ndarray:
    """Check points, snapped to grid nodes when the measure has them.

    Node values of grid densities carry no interpolation error (only the
    quadrature error of whatever produced them), so sign tests on divided
    differences stay well-conditioned.
    """
    nodes = getattr(rm, "r", None)
    if nodes is not None:
        inside = nodes[(nodes >= window[0]) & (nodes <= window[1])]
        if inside.size >= n:
            stride = max(1, inside.size // n)
            picked = inside[::stride]
            if picked.size >= min_points:
                return picked
        if inside.size >= min_points:
            return inside
    return _check_window(rm, window, n)


def _verdict(passed: bool, worst: float, tol: float) -> str:
    if passed:
        return "pass"
    return "indeterminate" if worst <= 10.0 * tol else "fail"


def _classify_direction(rm: RadialMeasure, order: int, tol: float) -> tuple[dict, dict]:
    if not rm.has_density:
        reason = "not absolutely continuous"
        return {c: "fail" for c in _CLASSES}, {c: reason for c in _CLASSES}

    verdicts, evidence = {}, {}
    r_dec = _node_abscissae(rm, _DEC_WINDOW, _DEC_POINTS, min_points=3)
    dens_dec = rm.density(r_dec)

    ok, worst = check_decreasing(dens_dec, DEC_TOL_DEFAULT)
    verdicts["u"] = _verdict(ok, worst, DEC_TOL_DEFAULT)
    evidence["u"] = f"density decreasing: worst rise {worst:.3e}"

    ok, worst = check_decreasing(r_dec * dens_dec, DEC_TOL_DEFAULT)
    verdicts["l"] = _verdict(ok, worst, DEC_TOL_DEFAULT)
    evidence["l"] = f"r*density decreasing: worst rise {worst:.3e}"

    r_cm = _node_abscissae(rm, _CM_WINDOW, _CM_POINTS, min_points=order + 2)
    dens_cm = rm.density(r_cm)

    rep = check_completely_monotone(r_cm, dens_cm, order, tol)
    verdicts["b"] = _verdict(all(rep.verdicts.values()), rep.worst_violation, tol)
    evidence["b"] = f"density CM to order {order}: worst violation {rep.worst_violation:.3e}"

    rep = check_completely_monotone(r_cm, r_cm * dens_cm, order, tol)
    verdicts["t"] = _verdict(all(rep.verdicts.values()), rep.worst_violation, tol)
    evidence["t"] = f"r*density CM to order {order}: worst violation {rep.worst_violation:.3e}"

    # density as a function of r^2: sample l(sqrt(x)) on a log grid in x
    x_cm = r_cm**2
    rep = check_completely_monotone(x_cm, dens_cm, order, tol)
    verdicts["g"] = _verdict(all(rep.verdicts.values()), rep.worst_violation, tol)
    evidence["g"] = f"density(sqrt(x)) CM to order {order}: worst violation {rep.worst_violation:.3e}"

    return verdicts, evidence


_RANK = {"fail": 0, "indeterminate": 1, "pass": 2}


def _aggregate(per_direction: list[dict]) -> dict:
    out = {}
    for c in _CLASSES:
        out[c] = min((d[c] for d in per_direction), key=_RANK.get)
    return out


def _inclusion_closure(raw: dict) -> dict:
    out = dict(raw)
    if out["t"] == "pass":
        out["b"] = "pass"
        out["l"] = "pass"
    if out["b"] == "pass":
        out["g"] = "pass"
    if any(out[c] == "pass" for c in ("b", "l", "g")):
        out["u"] = "pass"
    return out


def classify_distribution(
    nu: PolarLevyMeasure,
    order: int = CM_ORDER_DEFAULT,
    tol: float = CM_TOL_DEFAULT,
) -> ClassVerdict:
    """Class verdicts for all five monotonicity classes.

    Every direction must pass for a class to pass.  Atomic radial parts fail
    all five classes (no density).  Emitted verdicts are closed under the
    known inclusions; the raw outcomes are kept alongside as evidence.
    """
    results, notes = [], {}
    for i, ray in enumerate(nu.rays):
        verdicts, evidence = _classify_direction(ray.radial, order, tol)
        results.append(verdicts)
        for c in _CLASSES:
            if verdicts[c] != "pass":
                notes.setdefault(c, f"direction {i}: {evidence[c]}")
    raw = _aggregate(results)
    return ClassVerdict(verdicts=_inclusion_closure(raw), raw=raw, evidence=notes)


# ---------------------------------------------------------------------------
# Nested-depth witness from the tilted tail
# ---------------------------------------------------------------------------


def h_monotonicity_report(
    nu: PolarLevyMeasure,
    order: int,
    tol: float = CM_TOL_DEFAULT,
    u_range: tuple[float, float] = H_GRID_RANGE,
    size: int = H_GRID_SIZE,
) -> MonotonicityReport:
    """Divided-difference sign checks on h(u) = e^{-u} tail(e^u), all directions.

    Samples on the uniform u-grid, then strides to spacing ~0.22 so that
    divided differences up to order ~6 stay well-conditioned.
    """
    u = np.linspace(u_range[0], u_range[1], size)[::_H_STRIDE]
    verdicts = {j: True for j in range(order + 1)}
    worst_by_order = {j: 0.0 for j in range(order + 1)}
    grid_used = ""
    for ray in nu.rays:
        h = np.array([h_function(ray.radial, float(ui)) for ui in u])
        rep = check_completely_monotone(u, h, order, tol)
        grid_used = rep.grid_used
        for j in range(order + 1):
            verdicts[j] = verdicts[j] and rep.verdicts[j]
            worst_by_order[j] = max(worst_by_order[j], rep.worst_by_order[j])
    return MonotonicityReport(
        order_tested=order,
        verdicts=verdicts,
        worst_by_order=worst_by_order,
        worst_violation=max(worst_by_order.values()),
        grid_used=grid_used,
    )


def nested_level(nu: PolarLevyMeasure, M: int, tol: float = CM_TOL_DEFAULT):
    """Largest m <= M such that h passes j-monotonicity for all j <= m+1.

    This witnesses a necessary condition for membership at depth m in the
    decreasing-density hierarchy; it does not certify membership.
    """
    if not (0 <= M <= 8):
        raise ValueError("depth limit must lie in [0, 8] (finite-difference depth)")
    report = h_monotonicity_report(nu, M + 1, tol)
    level = -1
    for m in range(M + 1):
        if all(report.verdicts[j] for j in range(m + 2)):
            level = m
        else:
            break
    return level, report


# ---------------------------------------------------------------------------
# Domain checks and the log-moment identity
# ---------------------------------------------------------------------------


def check_domain(kernel: MappingKernel, nu: PolarLevyMeasure | None, m: int) -> bool:
    """True iff m applications of the kernel are defined for this measure.

    Kernels with finite integration length are defined on everything; the
    exponential-shrinking kernel (and compositions containing it) consume one
    logarithmic-moment order per application.
    """
    if m < 0:
        raise ValueError("m must be nonnegative")
    needed = kernel.log_moment_cost * m
    if needed == 0 or nu is None:
        return True
    return math.isfinite(log_moment(nu, needed))


def verify_log_moment_identity(nu: PolarLevyMeasure, m: int):
    """Both sides of the shrink-map log-moment identity, plus their gap.

    lhs: ∫ (log|x|)^m over |x|>1 of the shrink-mapped measure, computed from
    the mapped radial density tail(u)/u per direction.
    rhs: (m+1)^{-1} ∫ (log|y|)^{m+1} over |y|>1 of the input measure.
    """
    if m < 0:
        raise ValueError("m must be nonnegative")
    rhs_raw = log_moment(nu, m + 1)
    if not math.isfinite(rhs_raw):
        raise DomainError(f"logarithmic moment of order {m + 1} diverges")
    rhs = rhs_raw / (m + 1.0)

    lhs = 0.0
    for ray in nu.rays:
        rm = ray.radial
        hi = rm.effective_upper()
        if hi <= 1.0:
            continue
        atoms = [r for r, _ in rm.atoms] if hasattr(rm, "atoms") else None
        lhs += ray.weight * adaptive_quad(
            lambda u: math.log(u) ** m / u * float(rm.tail(u)),
            1.0,
            hi,
            points=atoms,
            epsabs=1e-12,
            epsrel=1e-11,
        )
    return lhs, rhs, abs(lhs - rhs)

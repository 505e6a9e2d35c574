"""Thin wrappers around scipy's adaptive quadrature with failure diagnostics.

All integrals in the package run through these helpers so that tolerance
policy and error reporting stay uniform.  A quadrature that cannot reach its
tolerance raises :class:`~levymaps.errors.QuadratureError` carrying the
residual estimate instead of silently returning a bad value.
"""

from __future__ import annotations

import numpy as np
from scipy import integrate

from .errors import QuadratureError

DEFAULT_EPSABS = 1e-11
DEFAULT_EPSREL = 1e-10
DEFAULT_LIMIT = 200

# A result is accepted despite a convergence warning when the reported error
# is still within this factor of the requested tolerance.
_SLACK = 50.0


def _check(value: float, abserr: float, epsabs: float, epsrel: float, what: str) -> float:
    tol = max(_SLACK * epsabs, _SLACK * epsrel * abs(value))
    if not np.isfinite(value) or abserr > tol:
        raise QuadratureError(
            f"{what} did not converge: value={value!r}, residual estimate={abserr:.3e}"
        )
    return float(value)


def adaptive_quad(
    f,
    a: float,
    b: float,
    *,
    epsabs: float = DEFAULT_EPSABS,
    epsrel: float = DEFAULT_EPSREL,
    limit: int = DEFAULT_LIMIT,
    points=None,
) -> float:
    """Adaptive quadrature of a scalar real integrand on (a, b).

    Infinite endpoints are allowed; ``points`` (interior breakpoints) are
    forwarded only for finite intervals, as scipy requires.
    """
    kwargs = dict(epsabs=epsabs, epsrel=epsrel, limit=limit, full_output=1)
    if points is not None and np.isfinite(a) and np.isfinite(b):
        pts = [p for p in points if a < p < b]
        if pts:
            kwargs["points"] = sorted(pts)
    out = integrate.quad(f, a, b, **kwargs)
    value, abserr = out[0], out[1]
    if len(out) > 3:  # warning message appended
        return _check(value, abserr, epsabs, epsrel, "quadrature")
    return float(value)


def oscillatory_quad(
    f,
    a: float,
    b: float,
    omega: float,
    kind: str,
    *,
    epsabs: float = DEFAULT_EPSABS,
    limit: int = 400,
) -> float:
    """Integrate ``f(r) * cos(omega r)`` or ``f(r) * sin(omega r)`` on (a, b).

    Uses the dedicated oscillatory QUADPACK routines; ``b`` may be ``inf``
    provided ``f`` decays (Fourier-transform mode).
    """
    if omega <= 0:
        raise ValueError("omega must be positive")
    out = integrate.quad(
        f,
        a,
        b,
        weight=kind,
        wvar=omega,
        epsabs=epsabs,
        epsrel=0.0 if np.isinf(b) else DEFAULT_EPSREL,
        limit=limit,
        limlst=200,
        maxp1=100,
        full_output=1,
    )
    value, abserr = out[0], out[1]
    if len(out) > 3:
        return _check(value, abserr, epsabs, 0.0, f"oscillatory ({kind}) quadrature")
    return float(value)


def complex_quad(
    f,
    a: float,
    b: float,
    *,
    epsabs: float = DEFAULT_EPSABS,
    epsrel: float = DEFAULT_EPSREL,
    limit: int = DEFAULT_LIMIT,
    points=None,
) -> complex:
    """Adaptive quadrature of a complex-valued integrand.

    Real and imaginary parts share function evaluations (``quad_vec``), which
    matters when the integrand itself is a nested quadrature.
    """

    def parts(t):
        v = f(t)
        return np.array([v.real, v.imag])

    kwargs = dict(epsabs=epsabs, epsrel=epsrel, limit=max(limit, 100))
    if points is not None and np.isfinite(a) and np.isfinite(b):
        pts = [p for p in points if a < p < b]
        if pts:
            kwargs["points"] = sorted(pts)
    value, err = integrate.quad_vec(parts, a, b, **kwargs)
    result = complex(value[0], value[1])
    tol = max(_SLACK * epsabs, _SLACK * epsrel * abs(result))
    if not np.isfinite(result) or err > max(tol, 1e-9):
        raise QuadratureError(
            f"complex quadrature did not converge: value={result!r}, "
            f"residual estimate={err:.3e}"
        )
    return result

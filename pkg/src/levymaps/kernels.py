"""Transform kernels: the data (p, t0, g, s0, f) driving each mapping.

A kernel is built from a positive decreasing weight p on (0, t0) with
∫ (1+u^2) p(u) du < inf.  Its primitive g(t) = ∫_t^t0 p(u) du is strictly
decreasing with g(0+) = s0, and f is the inverse of g.  The induced mapping
acts on characteristic exponents as C -> ∫_0^s0 C(f(s) z) ds, which after the
substitution t = f(s) becomes ∫_0^t0 C(t z) p(t) dt -- the form used
throughout, since it moves any singularity of f at s = 0 into the decaying
weight p.

The exponential-shrinking map (named "phi" here) sits formally outside the
finite-s0 family: it corresponds to p(u) = 1/u on (0, 1), whose weight
integral diverges, and it is the one mapping that needs a finite logarithmic
moment of its input.  All derived formulas (square integral, radial
transform, power integrals) still flow from the same (p, t0) data.
"""

from __future__ import annotations

import ast
import math

import numpy as np
from scipy import optimize, special

from .errors import SchemaError
from .quadrature import adaptive_quad

_INV_TOL = 1e-12  # bisection tolerance in s for numeric inversion


class MappingKernel:
    """Immutable kernel (p, t0, g, s0, f) plus composition metadata.

    Parameters
    ----------
    name : str
        Label used in provenance chains and CLI output.
    p : callable or None
        Decreasing weight on (0, t0); None only for pure compositions.
    t0 : float
        Upper endpoint of the weight's domain (may be inf).
    g : callable or None
        g(t) = ∫_t^t0 p(u) du.
    s0 : float
        g(0+); inf for the exponential-shrinking map.
    f : callable or None
        Inverse of g on (0, s0).
    factors : tuple of MappingKernel
        For composed kernels, the factors in application order.
    log_moment_cost : int
        Logarithmic-moment orders consumed per application (1 for the
        exponential-shrinking map and compositions containing it).
    """

    def __init__(self, name, p, t0, g, s0, f, factors=(), log_moment_cost=0):
        self.name = str(name)
        self.p = p
        self.t0 = float(t0) if t0 is not None else None
        self.g = g
        self.s0 = float(s0) if s0 is not None else None
        self.f = f
        self.factors = tuple(factors)
        self.log_moment_cost = int(log_moment_cost)
        self._cache: dict = {}

    def __repr__(self):
        return f"MappingKernel({self.name!r})"

    @property
    def is_composition(self) -> bool:
        return bool(self.factors)

    @property
    def finite_length(self) -> bool:
        """True when the integration length s0 is finite."""
        return self.s0 is not None and math.isfinite(self.s0)

    def f_eval(self, s: float) -> float:
        """Evaluate t = f(s) for 0 < s < s0."""
        if self.is_composition:
            raise ValueError(f"{self.name} is a composition; evaluate its factors")
        if not (0.0 < s < self.s0):
            raise ValueError(f"s must lie in (0, {self.s0}), got {s}")
        return float(self.f(s))

    def weight_integral(self, power: float) -> float:
        """∫_0^t0 t^power p(t) dt = ∫_0^s0 f(s)^power ds."""
        if self.is_composition:
            raise ValueError(f"{self.name} is a composition; integrate its factors")
        key = ("wi", power)
        if key not in self._cache:
            self._cache[key] = _geometric_quad(
                lambda t: t**power * self.p(t), 0.0, self.t0, epsabs=1e-13, epsrel=1e-12
            )
        return self._cache[key]

    def effective_reach(self) -> float:
        """Finite t beyond which the weight is negligible (at most t0)."""
        if "reach" not in self._cache:
            cap = min(self.t0, 1e6)
            t = min(1.0, cap)
            while t < cap and self.p(t) > 1e-18:
                t = min(2.0 * t, cap)
            self._cache["reach"] = t
        return self._cache["reach"]

    def square_integral(self) -> float:
        return self.weight_integral(2.0)

    def first_integral(self) -> float:
        return self.weight_integral(1.0)


def _geometric_quad(f, a: float, b: float, **kw) -> float:
    """Adaptive quadrature on (a, b) split at geometric edges.

    Plain adaptive quadrature misses localized structure on very long
    intervals; geometric pieces keep every panel at bounded dynamic range.
    Trailing pieces are skipped once they stop contributing.
    """
    if b <= max(4.0 * a, 4.0):
        return adaptive_quad(f, a, b, **kw)
    total = 0.0
    lo = a
    edge = max(4.0 * a, 4.0)
    negligible = 0
    while lo < b:
        hi = min(edge, b)
        piece = adaptive_quad(f, lo, hi, **kw)
        total += piece
        negligible = negligible + 1 if abs(piece) <= 1e-17 * (abs(total) + 1e-300) else 0
        if negligible >= 2:
            break
        lo, edge = hi, edge * 4.0
    return total


def _validate_weight(kernel: MappingKernel, check_moment: bool = True) -> None:
    """Spot-check that p is positive decreasing and has the moment integral."""
    t0 = kernel.t0
    hi = t0 if math.isfinite(t0) else 50.0
    grid = np.geomspace(max(hi * 1e-9, 1e-9), hi * (1.0 - 1e-9), 64)
    vals = np.array([kernel.p(t) for t in grid])
    # p must be positive; exact zeros are tolerated only as trailing underflow
    if vals[0] <= 0 or np.any(vals < 0) or np.any((vals[:-1] == 0.0) & (vals[1:] > 0)):
        raise ValueError(f"kernel weight of {kernel.name} must be positive")
    increases = np.diff(vals) > 1e-9 * np.maximum(np.abs(vals[:-1]), np.abs(vals[1:]))
    if np.any(increases):
        t_bad = grid[1:][increases][0]
        raise ValueError(f"kernel weight of {kernel.name} is not decreasing (near t={t_bad:.6g})")
    if check_moment:
        moment = _geometric_quad(lambda t: (1.0 + t * t) * kernel.p(t), 0.0, t0)
        if not math.isfinite(moment):
            raise ValueError(f"kernel weight of {kernel.name} has divergent moment integral")


def kernel_from_p(p, t0: float, name: str = "custom") -> MappingKernel:
    """Build a kernel from a decreasing weight, with numeric g and f.

    g is evaluated by adaptive quadrature and f by bracketed bisection
    (tolerance 1e-12 in s) followed by one Newton polish.
    """
    t0 = float(t0)
    if not (t0 > 0):
        raise ValueError("t0 must be positive")

    def g(t: float) -> float:
        if t >= t0:
            return 0.0
        return _geometric_quad(p, t, t0, epsabs=1e-13, epsrel=1e-13)

    s0 = g(0.0)
    if not (s0 > 0 and math.isfinite(s0)):
        raise ValueError(f"g(0+) must be positive and finite, got {s0}")

    def f(s: float) -> float:
        if not (0.0 < s < s0):
            raise ValueError(f"s must lie in (0, {s0}), got {s}")
        lo, hi = 0.0, min(t0, 1.0)
        while g(hi) > s and hi < t0:  # expand until bracketed
            lo, hi = hi, min(2.0 * hi, t0)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            val = g(mid)
            if abs(val - s) <= _INV_TOL:
                lo = hi = mid
                break
            if val > s:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-15 * max(1.0, hi):
                break
        t = 0.5 * (lo + hi)
        slope = p(t)
        if slope > 0 and 0.0 < t < t0:  # one Newton step: g' = -p
            t_new = t + (g(t) - s) / slope
            if 0.0 < t_new < t0:
                t = t_new
        return t

    kernel = MappingKernel(name, p, t0, g, s0, f)
    _validate_weight(kernel)
    _check_inverse_roundtrip(kernel)
    return kernel


def _check_inverse_roundtrip(kernel: MappingKernel) -> None:
    for frac in (0.1, 0.35, 0.6, 0.85):
        s = frac * kernel.s0
        if abs(kernel.g(kernel.f(s)) - s) > 1e-9 * max(1.0, kernel.s0):
            raise ValueError(f"inverse of g for {kernel.name} fails its roundtrip check")


# ---------------------------------------------------------------------------
# Built-in kernels
# ---------------------------------------------------------------------------

_SQRT_PI_2 = math.sqrt(math.pi) / 2.0


def _uniform_kernel() -> MappingKernel:
    return MappingKernel(
        "u",
        p=lambda u: np.full_like(np.asarray(u, dtype=float), 1.0)[()],
        t0=1.0,
        g=lambda t: 1.0 - t,
        s0=1.0,
        f=lambda s: 1.0 - s,
    )


def _exponential_kernel() -> MappingKernel:
    return MappingKernel(
        "upsilon",
        p=lambda u: np.exp(-np.asarray(u, dtype=float))[()],
        t0=math.inf,
        g=lambda t: math.exp(-t),
        s0=1.0,
        f=lambda s: math.log(1.0 / s),
    )


def _gauss_tail_kernel() -> MappingKernel:
    return MappingKernel(
        "g",
        p=lambda u: np.exp(-np.square(np.asarray(u, dtype=float)))[()],
        t0=math.inf,
        g=lambda t: _SQRT_PI_2 * special.erfc(t),
        s0=_SQRT_PI_2,
        f=lambda s: float(special.erfcinv(2.0 * s / math.sqrt(math.pi))),
    )


def _shrink_kernel() -> MappingKernel:
    # Exponential shrinking: f(s) = e^{-s} on (0, inf).  Equivalently
    # p(u) = 1/u on (0, 1); the weight integral diverges, which is exactly
    # why this map needs a finite log moment of its input.
    return MappingKernel(
        "phi",
        p=lambda u: 1.0 / np.asarray(u, dtype=float)[()],
        t0=1.0,
        g=lambda t: math.log(1.0 / t),
        s0=math.inf,
        f=lambda s: math.exp(-s),
        log_moment_cost=1,
    )


def _shrink_then_exponential() -> MappingKernel:
    phi = _shrink_kernel()
    ups = _exponential_kernel()
    return MappingKernel(
        "psi",
        p=None,
        t0=None,
        g=None,
        s0=math.inf,
        f=None,
        factors=(phi, ups),  # applied left to right
        log_moment_cost=1,
    )


def _gamma_weight_kernel(alpha: float) -> MappingKernel:
    if not (-1.0 <= alpha < 0.0):
        raise ValueError(f"psi_alpha requires -1 <= alpha < 0, got {alpha}")
    a = -alpha  # in (0, 1]
    s0 = float(special.gamma(a))
    return MappingKernel(
        f"psi_alpha({alpha:g})",
        p=lambda u: u ** (-alpha - 1.0) * np.exp(-np.asarray(u, dtype=float))[()],
        t0=math.inf,
        g=lambda t: s0 * float(special.gammaincc(a, t)),
        s0=s0,
        f=lambda s: float(special.gammainccinv(a, s / s0)),
    )


def _beta_weight_kernel(beta: float, alpha: float) -> MappingKernel:
    if not (-1.0 <= alpha < 0.0):
        raise ValueError(f"phi_beta_alpha requires -1 <= alpha < 0, got alpha={alpha}")
    if not (beta <= alpha - 1.0):
        raise ValueError(f"phi_beta_alpha requires beta <= alpha - 1, got beta={beta}")
    a, b = -alpha, alpha - beta  # a in (0, 1], b >= 1
    norm = float(special.gamma(b))
    s0 = float(special.gamma(a) / special.gamma(-beta))

    def p(u: float) -> float:
        return (1.0 - u) ** (b - 1.0) * u ** (-alpha - 1.0) / norm

    return MappingKernel(
        f"phi_beta_alpha({beta:g},{alpha:g})",
        p=p,
        t0=1.0,
        g=lambda t: s0 * float(1.0 - special.betainc(a, b, t)),
        s0=s0,
        f=lambda s: float(special.betaincinv(a, b, 1.0 - s / s0)),
    )


_BUILTIN_NAMES = ("u", "upsilon", "g", "phi", "psi", "psi_alpha", "phi_beta_alpha")


def builtin_kernel(name: str, alpha: float | None = None, beta: float | None = None) -> MappingKernel:
    """One of the named kernels; parametric families take alpha (and beta)."""
    key = name.strip().lower()
    if key == "u":
        return _uniform_kernel()
    if key == "upsilon":
        return _exponential_kernel()
    if key == "g":
        return _gauss_tail_kernel()
    if key == "phi":
        return _shrink_kernel()
    if key == "psi":
        return _shrink_then_exponential()
    if key == "psi_alpha":
        if alpha is None:
            raise ValueError("psi_alpha needs an alpha parameter")
        return _gamma_weight_kernel(alpha)
    if key == "phi_beta_alpha":
        if alpha is None or beta is None:
            raise ValueError("phi_beta_alpha needs beta and alpha parameters")
        return _beta_weight_kernel(beta, alpha)
    raise ValueError(f"unknown kernel {name!r}; expected one of {_BUILTIN_NAMES}")


def f_eval(kernel: MappingKernel, s: float) -> float:
    """t = f(s) with g(t) = s; analytic inverse for built-ins."""
    return kernel.f_eval(s)


# ---------------------------------------------------------------------------
# Diagnostics: the exponential integral and its inverse
# ---------------------------------------------------------------------------


def exp_integral(t: float) -> float:
    """e(t) = ∫_t^inf e^(-u)/u du, t > 0."""
    if not (t > 0):
        raise ValueError("t must be positive")
    return float(special.exp1(t))


def exp_integral_inverse(s: float) -> float:
    """Inverse of the exponential integral; exposed for diagnostics only."""
    if not (s > 0):
        raise ValueError("s must be positive")
    lo, hi = 1e-300, 1.0
    while special.exp1(hi) > s:
        lo, hi = hi, hi * 2.0
        if hi > 1e3:
            break
    while special.exp1(lo) < s:
        lo /= 2.0
        if lo < 1e-308:
            raise ValueError(f"s={s} out of invertible range")
    return float(optimize.brentq(lambda t: special.exp1(t) - s, lo, hi, xtol=1e-15, rtol=1e-14))


# ---------------------------------------------------------------------------
# Kernel JSON / expression specs
# ---------------------------------------------------------------------------

_ALLOWED_CALLS = {"exp": np.exp, "log": np.log, "pow": np.power, "sqrt": np.sqrt}
_ALLOWED_NAMES = {"pi": math.pi, "e": math.e}


def _validate_expr(node: ast.AST) -> None:
    if isinstance(node, ast.Expression):
        return _validate_expr(node.body)
    if isinstance(node, ast.BinOp) and isinstance(node.op, (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)):
        _validate_expr(node.left)
        return _validate_expr(node.right)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
        return _validate_expr(node.operand)
    if isinstance(node, ast.Call):
        if not (isinstance(node.func, ast.Name) and node.func.id in _ALLOWED_CALLS) or node.keywords:
            raise SchemaError(f"function not allowed in weight expression: {ast.dump(node.func)}")
        for arg in node.args:
            _validate_expr(arg)
        return
    if isinstance(node, ast.Name):
        if node.id == "u" or node.id in _ALLOWED_NAMES:
            return
        raise SchemaError(f"unknown name in weight expression: {node.id!r}")
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return
    raise SchemaError(f"expression element not allowed: {ast.dump(node)}")


def parse_p_expression(text: str):
    """Compile an expression in the variable u (grammar: + - * / ^, exp, log, pow, sqrt)."""
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise SchemaError(f"cannot parse weight expression {text!r}: {exc}") from exc
    _validate_expr(tree)
    code = compile(tree, "<kernel-p>", "eval")
    env = {"__builtins__": {}}
    env.update(_ALLOWED_CALLS)
    env.update(_ALLOWED_NAMES)

    def p(u):
        return float(eval(code, env, {"u": u}))  # noqa: S307 -- AST whitelisted above

    return p


def kernel_from_spec(spec: dict | str) -> MappingKernel:
    """Kernel from a JSON-style spec: {"name": ...} or {"p": expr, "t0": x}."""
    if isinstance(spec, str):
        spec = {"name": spec}
    if "name" in spec:
        name = spec["name"]
        try:
            return builtin_kernel(name, alpha=spec.get("alpha"), beta=spec.get("beta"))
        except ValueError as exc:
            raise SchemaError(str(exc)) from exc
    if "p" in spec:
        if "t0" not in spec:
            raise SchemaError("custom kernel spec needs t0")
        p = parse_p_expression(str(spec["p"]))
        try:
            return kernel_from_p(p, float(spec["t0"]), name=f"p[{spec['p']}]")
        except ValueError as exc:
            raise SchemaError(str(exc)) from exc
    raise SchemaError("kernel spec must contain 'name' or 'p'/'t0'")

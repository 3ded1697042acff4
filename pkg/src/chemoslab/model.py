"""Problem definition for the kinetic chemotaxis model in slab geometry.

Initial and boundary data are closed-form expressions in ``x`` and ``t``
(polynomials, sin, cos, exp, sqrt, pi), so the time derivatives needed by
the compatibility conditions are available exactly.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any, Mapping

import numpy as np
import sympy as sp

from .errors import ConfigurationError, ValidationError
from .quadrature_mesh import SpatialMesh, VelocityQuadrature, make_mesh

_X, _T = sp.symbols("x t", real=True)
_ALLOWED = {
    "x": _X, "t": _T, "pi": sp.pi, "E": sp.E,
    "sin": sp.sin, "cos": sp.cos, "exp": sp.exp, "sqrt": sp.sqrt,
    "sinh": sp.sinh, "cosh": sp.cosh, "tanh": sp.tanh,
}
_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?)|([A-Za-z_]\w*)|(\*\*|[-+*/(),]))")


def _tokenize_check(text: str) -> None:
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            if text[pos:].strip() == "":
                return
            raise ConfigurationError(f"cannot parse expression {text!r} at position {pos}")
        name = m.group(2)
        if name is not None and name not in _ALLOWED:
            raise ConfigurationError(f"unknown name {name!r} in expression {text!r}")
        pos = m.end()


class Expr:
    """A closed-form function of ``x`` and ``t`` with exact derivatives."""

    def __init__(self, source: str | float | int | sp.Expr):
        if isinstance(source, sp.Expr):
            self.expr = source
            self.text = str(source)
        else:
            text = str(source)
            _tokenize_check(text)
            try:
                self.expr = sp.sympify(text, locals=_ALLOWED)
            except (sp.SympifyError, SyntaxError, TypeError) as exc:
                raise ConfigurationError(f"cannot parse expression {text!r}: {exc}") from None
            self.text = text
        extra = self.expr.free_symbols - {_X, _T}
        if extra:
            raise ConfigurationError(f"expression {self.text!r} uses unknown symbols {sorted(map(str, extra))}")

    def __repr__(self):
        return f"Expr({self.text!r})"

    @cached_property
    def _fn(self):
        return sp.lambdify((_X, _T), self.expr, modules="numpy")

    def __call__(self, x=0.0, t=0.0):
        x_arr = np.asarray(x, dtype=float)
        val = self._fn(x_arr, float(t))
        return np.broadcast_to(np.asarray(val, dtype=float), x_arr.shape).copy() if x_arr.ndim else float(val)

    def diff(self, var: str = "t", order: int = 1) -> "Expr":
        sym = _T if var == "t" else _X
        return Expr(sp.diff(self.expr, sym, order))

    @property
    def depends_on_x(self) -> bool:
        return _X in self.expr.free_symbols


@dataclass(frozen=True)
class BoundaryData:
    """Endpoint values g(0, t) and g(ell, t) with two time derivatives."""

    left: Expr
    right: Expr

    def __post_init__(self):
        for side in (self.left, self.right):
            if side.depends_on_x:
                raise ConfigurationError(f"boundary data {side.text!r} must depend on t only")

    def value(self, t: float) -> tuple[float, float]:
        return self.left(0.0, t), self.right(0.0, t)

    def dt(self, t: float, order: int = 1) -> tuple[float, float]:
        return self.left.diff("t", order)(0.0, t), self.right.diff("t", order)(0.0, t)

    def extension(self, x, t: float, ell: float):
        """Linear-in-x extension of the endpoint data."""
        gl, gr = self.value(t)
        x = np.asarray(x, dtype=float)
        return gl * (1.0 - x / ell) + gr * (x / ell)

    def extension_dx(self, x, t: float, ell: float):
        gl, gr = self.value(t)
        return np.full(np.shape(x), (gr - gl) / ell)


@dataclass(frozen=True)
class ProblemSetup:
    mesh: SpatialMesh
    sigma: np.ndarray
    alpha: float
    beta: float
    gamma: float
    D: float
    epsilon: float
    T: float
    u0: np.ndarray
    c0: np.ndarray
    gu: BoundaryData
    gc: BoundaryData
    eps_star: float = 1.0
    T_star: float | None = None
    exprs: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def ell(self) -> float:
        return self.mesh.ell

    @property
    def sigma_min(self) -> float:
        return float(np.min(self.sigma))

    @property
    def sigma_max(self) -> float:
        return float(np.max(self.sigma))

    def with_epsilon(self, epsilon: float) -> "ProblemSetup":
        if not 0 < epsilon <= self.eps_star:
            raise ValidationError(f"epsilon must lie in (0, {self.eps_star}], got {epsilon!r}")
        return replace(self, epsilon=float(epsilon))

    def on_mesh(self, n_x: int) -> "ProblemSetup":
        """Resample the setup on a new uniform mesh (expression data only)."""
        if not {"sigma", "u0", "c0"} <= self.exprs.keys():
            raise ConfigurationError("resampling requires sigma, u0 and c0 given as expressions")
        mesh = make_mesh(self.ell, n_x)
        return replace(
            self, mesh=mesh,
            sigma=_sample(self.exprs["sigma"], mesh),
            u0=_sample(self.exprs["u0"], mesh),
            c0=_sample(self.exprs["c0"], mesh),
        )


@dataclass(frozen=True)
class LimitCoefficients:
    mu: np.ndarray
    chi: np.ndarray


# Default scenario: every compatibility condition holds exactly.
#   u0 = 1 + x(1-x) equals g_u = 1 at both ends;
#   c0 = 0 (no chemoattractant yet), so g_c(0) = 0 and
#   d/dt g_c(0) = D c0'' - beta c0 + gamma u0 = u0 = 1 at both ends, met by g_c = t.
DEFAULT_SCENARIO: dict[str, Any] = {
    "ell": 1.0,
    "T": 0.2,
    "sigma": "1",
    "alpha": 1.0,
    "beta": 1.0,
    "gamma": 1.0,
    "D": 1.0,
    "epsilon": 0.25,
    "eps_star": 1.0,
    "u0": "1 + x*(1 - x)",
    "c0": "0",
    "gu": {"left": "1", "right": "1"},
    "gc": {"left": "t", "right": "t"},
}

_REQUIRED = ("ell", "T", "sigma", "alpha", "beta", "gamma", "D", "epsilon", "u0", "c0", "gu", "gc")


def _sample(spec, mesh: SpatialMesh) -> np.ndarray:
    if isinstance(spec, Expr):
        if _T in spec.expr.free_symbols:
            raise ConfigurationError(f"initial/coefficient data {spec.text!r} must not depend on t")
        return spec(mesh.x, 0.0)
    arr = np.asarray(spec, dtype=float)
    if arr.shape != (mesh.n_nodes,):
        raise ConfigurationError(f"per-node data has {arr.size} values, mesh has {mesh.n_nodes} nodes")
    return arr.copy()


def _field_spec(value, name: str):
    if isinstance(value, (list, tuple, np.ndarray)):
        return np.asarray(value, dtype=float)
    try:
        return Expr(value)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{name}: {exc}") from None


def _boundary(value, name: str) -> BoundaryData:
    if not isinstance(value, Mapping) or set(value) != {"left", "right"}:
        raise ConfigurationError(f"{name} must be a mapping with exactly the keys 'left' and 'right'")
    return BoundaryData(left=Expr(value["left"]), right=Expr(value["right"]))


def build_problem(config: Mapping[str, Any], n_x: int = 128) -> ProblemSetup:
    """Sample a scenario mapping on a uniform mesh.

    ``sigma``, ``u0`` and ``c0`` are expressions in ``x`` or per-node value
    lists; ``gu`` and ``gc`` map ``left``/``right`` to expressions in ``t``.
    """
    missing = [k for k in _REQUIRED if k not in config]
    if missing:
        raise ConfigurationError(f"scenario is missing required keys: {', '.join(missing)}")
    mesh = make_mesh(float(config["ell"]), n_x)
    specs = {k: _field_spec(config[k], k) for k in ("sigma", "u0", "c0")}
    fields = {k: _sample(v, mesh) for k, v in specs.items()}
    exprs = {k: v for k, v in specs.items() if isinstance(v, Expr)}

    sigma = fields["sigma"]
    if not np.all(np.isfinite(sigma)) or np.min(sigma) <= 0:
        raise ValidationError(f"sigma must be positive everywhere (min {np.min(sigma)!r})")
    for k in ("alpha", "beta", "gamma"):
        if float(config[k]) < 0:
            raise ValidationError(f"{k} must be nonnegative, got {config[k]!r}")
    if not float(config["D"]) > 0:
        raise ValidationError(f"D must be positive, got {config['D']!r}")
    T = float(config["T"])
    T_star = float(config.get("T_star", T))
    if not 0 < T <= T_star:
        raise ValidationError(f"T must lie in (0, T_star={T_star}], got {T!r}")
    eps_star = float(config.get("eps_star", 1.0))
    eps = float(config["epsilon"])
    if not 0 < eps <= eps_star:
        raise ValidationError(f"epsilon must lie in (0, {eps_star}], got {eps!r}")
    for k in ("u0", "c0"):
        if not np.all(np.isfinite(fields[k])):
            raise ValidationError(f"{k} has non-finite values")

    return ProblemSetup(
        mesh=mesh, sigma=sigma,
        alpha=float(config["alpha"]), beta=float(config["beta"]), gamma=float(config["gamma"]),
        D=float(config["D"]), epsilon=eps, T=T,
        u0=fields["u0"], c0=fields["c0"],
        gu=_boundary(config["gu"], "gu"), gc=_boundary(config["gc"], "gc"),
        eps_star=eps_star, T_star=T_star, exprs=exprs,
    )


@dataclass
class CompatibilityCheck:
    name: str
    endpoint: float
    residual: float
    passed: bool


@dataclass
class CompatibilityReport:
    checks: list[CompatibilityCheck]
    tol: float
    method: str

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def max_residual(self) -> float:
        return max(c.residual for c in self.checks)


def _one_sided_dxx(f: np.ndarray, dx: float) -> tuple[float, float]:
    left = (f[0] - 2 * f[1] + f[2]) / dx**2
    right = (f[-1] - 2 * f[-2] + f[-3]) / dx**2
    return left, right


def validate_compatibility(setup: ProblemSetup, tol: float = 1e-8, method: str = "auto") -> CompatibilityReport:
    """Check the initial/boundary compatibility conditions at both endpoints.

    ``method`` selects how the second derivative of ``c0`` at the endpoints
    is obtained: ``"analytic"`` from the expression, ``"fd"`` from three-point
    one-sided differences of the sampled field, ``"auto"`` analytic when an
    expression is available.
    """
    if method not in ("auto", "analytic", "fd"):
        raise ConfigurationError(f"unknown compatibility method {method!r}")
    c0_expr = setup.exprs.get("c0")
    if method == "auto":
        method = "analytic" if c0_expr is not None else "fd"
    if method == "analytic" and c0_expr is None:
        raise ConfigurationError("analytic compatibility check needs c0 given as an expression")

    ell = setup.ell
    if method == "analytic":
        cxx = c0_expr.diff("x", 2)
        c0_xx = (cxx(0.0), cxx(ell))
        c0_b = (c0_expr(0.0), c0_expr(ell))
    else:
        c0_xx = _one_sided_dxx(setup.c0, setup.mesh.dx)
        c0_b = (setup.c0[0], setup.c0[-1])
    u0_expr = setup.exprs.get("u0")
    u0_b = (u0_expr(0.0), u0_expr(ell)) if u0_expr is not None else (setup.u0[0], setup.u0[-1])

    gu0, gc0, gct0 = setup.gu.value(0.0), setup.gc.value(0.0), setup.gc.dt(0.0)
    checks = []
    for j, xb in enumerate((0.0, ell)):
        target = setup.D * c0_xx[j] - setup.beta * c0_b[j] + setup.gamma * u0_b[j]
        for name, res in (
            ("gu(0) = u0", abs(gu0[j] - u0_b[j])),
            ("gc(0) = c0", abs(gc0[j] - c0_b[j])),
            ("dt gc(0) = D c0'' - beta c0 + gamma u0", abs(gct0[j] - target)),
        ):
            checks.append(CompatibilityCheck(name=name, endpoint=xb, residual=float(res), passed=bool(res <= tol)))
    return CompatibilityReport(checks=checks, tol=tol, method=method)


def limit_coefficients(setup: ProblemSetup, q: VelocityQuadrature) -> LimitCoefficients:
    """Motility ``mu = (1/2) int v^2 dv / sigma`` and chemotactic ``chi = alpha mu``."""
    mu = q.moment(2) / setup.sigma
    return LimitCoefficients(mu=mu, chi=setup.alpha * mu)

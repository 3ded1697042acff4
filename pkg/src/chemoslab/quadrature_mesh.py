"""Discrete phase space: velocity quadrature, grids, averages and norms.

Spatial fields are vertex-centred: a mesh with ``n_x`` cells carries
``n_x + 1`` nodes including both endpoints. Kinetic fields are arrays of
shape ``(n_x + 1, n_v)`` indexed by (node, velocity).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DimensionError

MAX_VELOCITIES = 256

NORM_KINDS = ("L2_Q", "L2_X", "H1_X", "GammaOut", "L2_T", "Linf_T")


@dataclass(frozen=True)
class VelocityQuadrature:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def half_weights(self) -> np.ndarray:
        """Weights of the velocity average (1/2 of the quadrature weights)."""
        return 0.5 * self.weights

    def moment(self, p: int) -> float:
        """Discrete ``(1/2) * int v**p dv``."""
        return float(0.5 * np.dot(self.weights, self.nodes**p))


@dataclass(frozen=True)
class SpatialMesh:
    ell: float
    n_x: int
    x: np.ndarray = field(repr=False)

    @property
    def dx(self) -> float:
        return self.ell / self.n_x

    @property
    def n_nodes(self) -> int:
        return self.n_x + 1

    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.n_nodes, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        return w


@dataclass(frozen=True)
class TimeGrid:
    T: float
    n_t: int

    @property
    def dt(self) -> float:
        return self.T / self.n_t

    @property
    def times(self) -> np.ndarray:
        t = np.arange(self.n_t + 1) * self.dt
        t[-1] = self.T
        return t

    def time(self, step: int) -> float:
        return self.T if step == self.n_t else step * self.dt


def gauss_legendre(n: int) -> VelocityQuadrature:
    """Gauss-Legendre rule with ``n`` nodes on (-1, 1).

    Nodes and weights are symmetrised so that mirrored entries agree to the
    last bit; this makes odd moments cancel pairwise.
    """
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= MAX_VELOCITIES:
        raise ConfigurationError(f"quadrature size must be an integer in [1, {MAX_VELOCITIES}], got {n!r}")
    x, w = np.polynomial.legendre.leggauss(int(n))
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    if n % 2 == 1:
        x[n // 2] = 0.0
    return VelocityQuadrature(nodes=x, weights=w)


def make_mesh(ell: float, n_x: int) -> SpatialMesh:
    if not ell > 0:
        raise ConfigurationError(f"domain length must be positive, got {ell!r}")
    if not isinstance(n_x, (int, np.integer)) or n_x < 2:
        raise ConfigurationError(f"n_x must be an integer >= 2, got {n_x!r}")
    x = np.linspace(0.0, ell, int(n_x) + 1)
    return SpatialMesh(ell=float(ell), n_x=int(n_x), x=x)


def make_timegrid(T: float, n_t: int) -> TimeGrid:
    if not T > 0:
        raise ConfigurationError(f"time horizon must be positive, got {T!r}")
    if not isinstance(n_t, (int, np.integer)) or n_t < 1:
        raise ConfigurationError(f"n_t must be an integer >= 1, got {n_t!r}")
    return TimeGrid(T=float(T), n_t=int(n_t))


def _check_kinetic(u, q, mesh=None):
    u = np.asarray(u, dtype=float)
    if u.ndim != 2 or u.shape[1] != q.n:
        raise DimensionError(f"kinetic field of shape {u.shape} does not conform to {q.n} velocities")
    if mesh is not None and u.shape[0] != mesh.n_nodes:
        raise DimensionError(f"kinetic field has {u.shape[0]} nodes, mesh has {mesh.n_nodes}")
    return u


def _check_scalar(f, mesh):
    f = np.asarray(f, dtype=float)
    if f.shape != (mesh.n_nodes,):
        raise DimensionError(f"scalar field of shape {f.shape} does not conform to {mesh.n_nodes} nodes")
    return f


def velocity_average(u, q: VelocityQuadrature) -> np.ndarray:
    """Velocity average ``(1/2) sum_k w_k u[:, k]``.

    Evaluated as a correction to a reference column so that a field that is
    constant in velocity is returned unchanged bit for bit.
    """
    u = _check_kinetic(u, q)
    ref = u[:, q.n // 2]
    return ref + (u - ref[:, None]) @ q.half_weights


def lift(f, q: VelocityQuadrature) -> np.ndarray:
    """Constant extension of a scalar field in velocity."""
    f = np.asarray(f, dtype=float)
    return np.repeat(f[:, None], q.n, axis=1)


def l2_q(u, mesh: SpatialMesh, q: VelocityQuadrature) -> float:
    u = _check_kinetic(u, q, mesh)
    return float(np.sqrt(mesh.trapezoid_weights() @ (u**2 @ q.weights)))


def l2_x(f, mesh: SpatialMesh) -> float:
    f = _check_scalar(f, mesh)
    return float(np.sqrt(mesh.trapezoid_weights() @ f**2))


def h1_seminorm(f, mesh: SpatialMesh) -> float:
    f = _check_scalar(f, mesh)
    d = np.diff(f) / mesh.dx
    return float(np.sqrt(mesh.dx * np.sum(d**2)))


def h1_x(f, mesh: SpatialMesh) -> float:
    return float(np.hypot(l2_x(f, mesh), h1_seminorm(f, mesh)))


def gamma_out(u, q: VelocityQuadrature) -> float:
    """Outflow trace norm with the ``|v| dGamma`` measure.

    Uses the trace at x=0 for v<0 and at x=ell for v>0.
    """
    u = _check_kinetic(u, q)
    v, w = q.nodes, q.weights
    neg, pos = v < 0, v > 0
    s = np.sum(w[neg] * np.abs(v[neg]) * u[0, neg] ** 2) + np.sum(w[pos] * v[pos] * u[-1, pos] ** 2)
    return float(np.sqrt(s))


def l2_time(values, dt: float) -> float:
    """Left-endpoint Riemann sum for an L2-in-time norm.

    ``values[n]`` is the spatial norm at step ``n``; the last entry (t=T) is
    not weighted.
    """
    values = np.asarray(values, dtype=float)
    return float(np.sqrt(dt * np.sum(values[:-1] ** 2)))


def linf_time(values) -> float:
    values = np.asarray(values, dtype=float)
    return float(np.max(np.abs(values))) if values.size else 0.0


def discrete_norm(field, kind: str, mesh: SpatialMesh | None = None,
                  q: VelocityQuadrature | None = None, dt: float | None = None) -> float:
    """Dispatch to the discrete norm named by ``kind``.

    ``L2_T`` and ``Linf_T`` compose per-step values (a 1-D sequence) in time.
    """
    if kind == "L2_Q":
        return l2_q(field, mesh, q)
    if kind == "L2_X":
        return l2_x(field, mesh)
    if kind == "H1_X":
        return h1_x(field, mesh)
    if kind == "GammaOut":
        return gamma_out(field, q)
    if kind == "L2_T":
        if dt is None:
            raise ConfigurationError("L2_T norm needs the time step dt")
        return l2_time(field, dt)
    if kind == "Linf_T":
        return linf_time(field)
    raise ConfigurationError(f"unknown norm kind {kind!r}; expected one of {NORM_KINDS}")


def gradient(f, mesh: SpatialMesh) -> np.ndarray:
    """Second-order derivative: centred inside, one-sided at the ends."""
    return np.gradient(np.asarray(f, dtype=float), mesh.dx, edge_order=2)

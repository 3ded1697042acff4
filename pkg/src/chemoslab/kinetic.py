"""Backward-Euler discrete-ordinates solver for the scaled kinetic equation

    eps^2 d_t u + eps v d_x u + sigma (u - ubar) = eps alpha v d_x c ubar,

with velocity-independent inflow data on the incoming half of the boundary.

Each step is a linear system in ``u^{n+1}`` whose only coupling between
velocities is through ``ubar``. Per direction the transport operator is a
lower (v > 0) or upper (v < 0) bidiagonal matrix, inverted by one sweep.
Two solution paths share the same discrete equations:

* source iteration: lag ``ubar``, sweep every direction, re-average;
* direct elimination: build the ``ubar -> ubar`` response matrix column by
  column and solve the small dense system for ``ubar`` exactly.

``method="auto"`` uses source iteration unless its predicted iteration count
exceeds the cap (the stiff small-eps regime), then eliminates directly.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ConvergenceWarning, DimensionError, SolverError
from .parabolic import step_parabolic
from .quadrature_mesh import (
    TimeGrid, VelocityQuadrature, gamma_out, gradient, l2_q, l2_x, lift, velocity_average,
)

SCHEMES = ("diamond", "upwind")
METHODS = ("auto", "source_iteration", "direct")


@dataclass(frozen=True)
class SolverOptions:
    source_iter_tol: float = 1e-12
    source_iter_max: int = 10_000
    picard_iters: int = 1
    method: str = "auto"
    scheme: str = "diamond"
    theta: float = 1.0
    record_residuals: bool = False

    def __post_init__(self):
        if not self.source_iter_tol > 0:
            raise ConfigurationError("source_iter_tol must be positive")
        if self.source_iter_max < 1 or self.picard_iters < 1:
            raise ConfigurationError("iteration caps must be >= 1")
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown kinetic solve method {self.method!r}; expected one of {METHODS}")
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"unknown transport scheme {self.scheme!r}; expected one of {SCHEMES}")
        if not 0.0 <= self.theta <= 1.0:
            raise ConfigurationError("theta must lie in [0, 1]")


@dataclass(frozen=True)
class KineticState:
    t: float
    u: np.ndarray
    ubar: np.ndarray
    iterations: int = 0
    residual: float = 0.0
    method: str = ""
    cap_hit: bool = False
    residuals: tuple = ()


def initial_state(setup, q: VelocityQuadrature) -> KineticState:
    """``u(0) = u0`` extended constant in velocity."""
    return KineticState(t=0.0, u=lift(setup.u0, q), ubar=setup.u0.copy())


def relaxation_invert(lam, rhs, q: VelocityQuadrature) -> np.ndarray:
    """Solve ``(I + lam (I - P)) u = rhs`` nodewise, P the velocity average.

    ``lam`` is a scalar or one value per node.
    """
    rhs = np.asarray(rhs, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if lam.ndim == 1:
        lam = lam[:, None]
    avg = velocity_average(rhs, q)[:, None]
    return (rhs - avg) / (1.0 + lam) + avg


# Sweep kernels. ``t`` is eps*v/dx (signed), ``a`` the nodal absorption
# coefficient eps^2/dt + sigma, ``rhs`` has shape (n_nodes, n_dirs, ...).

def _sweep_coefficients(t, a, scheme):
    """Recurrence ``u_i = C_i u_prev + (combination of rhs) / den_i``.

    Arrays are oriented along the sweep direction.
    """
    at = np.abs(t)[None, :]
    if scheme == "upwind":
        den = a[:, None] + at
        C = at / den
    else:
        den = 0.5 * a[:, None] + at
        # C_i multiplies the upwind neighbour and uses that node's a.
        C = np.empty_like(den)
        C[1:] = (at - 0.5 * a[:-1, None]) / den[1:]
        C[0] = 0.0
    return C, den


def _sweep_one_sign(t, a, rhs, inflow, scheme, base=None):
    """Sweep directions that all share the sign of ``t`` (t > 0 assumed).

    Callers flip arrays for negative directions. With ``base`` the sweep
    solves for an increment: the transport of ``base`` enters as a cell
    source so the base state itself is never re-differenced.
    """
    if np.any(a <= 0):
        raise SolverError("transport sweep needs a_i > 0 at every node")
    C, den = _sweep_coefficients(t, a, scheme)
    extra = (slice(None),) + (None,) * (rhs.ndim - 2)
    den_b = den[(slice(None), slice(None)) + (None,) * (rhs.ndim - 2)]
    if scheme == "upwind":
        src = rhs / den_b
    else:
        src = np.empty_like(rhs)
        src[1:] = 0.5 * (rhs[1:] + rhs[:-1]) / den_b[1:]
    if base is not None:
        src[1:] -= np.abs(t)[extra] * (base[1:] - base[:-1]) / den_b[1:]
    u = np.empty_like(rhs)
    u[0] = inflow
    for i in range(1, rhs.shape[0]):
        u[i] = src[i] + C[i][extra] * u[i - 1]
    return u


def _sweep_all(tcoef, a, rhs, inflow_left, inflow_right, scheme, base=None):
    """Sweep every direction; inflow at x=0 for v>0 and at x=ell for v<0.

    Inflow values are scalars or one value per direction.
    """
    u = np.empty_like(rhs)
    left = np.broadcast_to(np.asarray(inflow_left, dtype=float), rhs.shape[1:])
    right = np.broadcast_to(np.asarray(inflow_right, dtype=float), rhs.shape[1:])
    pos = tcoef > 0
    neg = ~pos
    if np.any(pos):
        u[:, pos] = _sweep_one_sign(tcoef[pos], a, rhs[:, pos], left[pos], scheme,
                                    None if base is None else base[:, pos])
    if np.any(neg):
        flipped = _sweep_one_sign(-tcoef[neg], a[::-1], rhs[::-1][:, neg], right[neg], scheme,
                                  None if base is None else base[::-1][:, neg])
        u[:, neg] = flipped[::-1]
    return u


def transport_sweep(v_coeff: float, a, rhs, inflow_value: float, scheme: str = "upwind") -> np.ndarray:
    """Single-direction sweep of ``a_i u_i + (eps v/dx) (u_i - u_upwind) = rhs_i``.

    ``v_coeff`` is ``eps * v_k / dx``; its sign selects the sweep direction.
    With ``scheme="diamond"`` the non-derivative terms are averaged over each
    cell (box scheme). The inflow node takes ``inflow_value``.
    """
    if scheme not in SCHEMES:
        raise ConfigurationError(f"unknown transport scheme {scheme!r}")
    a = np.asarray(a, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if a.shape != rhs.shape or a.ndim != 1:
        raise DimensionError("a and rhs must be 1-D arrays of equal length")
    if np.any(a <= 0):
        raise SolverError("transport sweep needs a_i > 0 at every node")
    u = _sweep_all(np.array([float(v_coeff)]), a, rhs[:, None], inflow_value, inflow_value, scheme)
    return u[:, 0]


def _step_system(state, setup, q, cbar_grad, dt):
    """Coefficients of the increment equation for ``d = u^{n+1} - u^n``.

    ``f`` is the nodal part of the step residual at ``u^n``; it vanishes
    identically at equilibrium, so equilibria are reproduced exactly.
    """
    eps = setup.epsilon
    a = eps**2 / dt + setup.sigma
    tcoef = eps * q.nodes / setup.mesh.dx
    drift = eps * setup.alpha * q.nodes[None, :] * np.asarray(cbar_grad, dtype=float)[:, None]
    s = setup.sigma[:, None] + drift
    ub = state.ubar[:, None]
    f = setup.sigma[:, None] * (ub - state.u) + drift * ub
    return a, tcoef, s, f


def _predicted_iterations(s, a, tol):
    rho = float(np.max(np.abs(s) / a[:, None]))
    if rho <= 0:
        return 1
    if not rho < 1:  # also catches NaN coefficients
        return math.inf
    return math.ceil(math.log(tol) / math.log(rho))


def _rel_change(new, old, mesh):
    diff = l2_x(new - old, mesh)
    scale = l2_x(new, mesh)
    return diff / scale if scale > 0 else diff


def _direct_solve(a, tcoef, s, f, inl, inr, q, scheme, base, dbar):
    """Eliminate the averaged increment exactly.

    Solves ``(I - K) e = P d_g - dbar`` for the correction to the guess
    ``dbar``, K being the averaged response of one sweep to its source.
    """
    d_g = _sweep_all(tcoef, a, f + s * dbar[:, None], inl, inr, scheme, base)
    n = a.size
    cols = np.zeros((n, q.n, n))
    idx = np.arange(n)
    cols[idx, :, idx] = s
    resp = _sweep_all(tcoef, a, cols, 0.0, 0.0, scheme)
    K = np.einsum("ikj,k->ij", resp, q.half_weights)
    e = np.linalg.solve(np.eye(n) - K, velocity_average(d_g, q) - dbar)
    return d_g + resp @ e


def step_kinetic(state: KineticState, setup, q: VelocityQuadrature, cbar_grad, dt: float,
                 opts: SolverOptions = SolverOptions(), t_new: float | None = None,
                 ubar_guess=None) -> KineticState:
    """One backward-Euler step with inflow data ``g_u(t_new)``.

    ``cbar_grad`` is ``d_x c`` at the coupling time. Outflow values are
    computed, never prescribed.
    """
    if not dt > 0:
        raise ConfigurationError(f"dt must be positive, got {dt!r}")
    if state.u.shape != (setup.mesh.n_nodes, q.n):
        raise DimensionError(f"state of shape {state.u.shape} does not conform to mesh x quadrature")
    if t_new is None:
        t_new = state.t + dt
    a, tcoef, s, f = _step_system(state, setup, q, cbar_grad, dt)
    gl, gr = setup.gu.value(t_new)
    inl, inr = gl - state.u[0], gr - state.u[-1]
    mesh = setup.mesh

    method = opts.method
    if method == "auto":
        n_pred = _predicted_iterations(s, a, opts.source_iter_tol)
        method = "source_iteration" if n_pred <= opts.source_iter_max else "direct"

    guess = state.ubar if ubar_guess is None else np.asarray(ubar_guess, dtype=float)
    dbar0 = guess - state.ubar
    if method == "direct":
        u = state.u + _direct_solve(a, tcoef, s, f, inl, inr, q, opts.scheme, state.u, dbar0)
        return KineticState(t=t_new, u=u, ubar=velocity_average(u, q), method="direct")

    residuals = []
    res = math.inf
    it = 0
    dbar = dbar0
    ubar = guess
    u = state.u
    while it < opts.source_iter_max:
        it += 1
        d = _sweep_all(tcoef, a, f + s * dbar[:, None], inl, inr, opts.scheme, state.u)
        dbar = velocity_average(d, q)
        u = state.u + d
        ubar_new = velocity_average(u, q)
        res = _rel_change(ubar_new, ubar, mesh)
        ubar = ubar_new
        if opts.record_residuals:
            residuals.append(res)
        if not math.isfinite(res) or res <= opts.source_iter_tol:
            break
    cap_hit = not res <= opts.source_iter_tol
    if cap_hit:
        warnings.warn(
            f"source iteration stopped after {it} iterations at t={t_new:.6g} "
            f"with relative residual {res:.3e} > {opts.source_iter_tol:.1e}",
            ConvergenceWarning, stacklevel=2,
        )
        if opts.method == "auto":
            u = state.u + _direct_solve(a, tcoef, s, f, inl, inr, q, opts.scheme, state.u, dbar0)
            ubar = velocity_average(u, q)
            method = "direct"
    return KineticState(t=t_new, u=u, ubar=ubar, iterations=it, residual=res, method=method,
                        cap_hit=cap_hit, residuals=tuple(residuals))


@dataclass
class KineticTrajectory:
    """Snapshots plus per-step diagnostics of one kinetic run.

    Per-step arrays have ``n_t + 1`` entries (one per time level);
    difference-quotient arrays have ``n_t`` entries (forward differences).
    """

    epsilon: float
    dt: float
    times: np.ndarray
    steps: np.ndarray
    u: np.ndarray
    ubar: np.ndarray
    cbar: np.ndarray
    norm_u: np.ndarray
    norm_relax: np.ndarray
    norm_outflow: np.ndarray
    norm_vdx: np.ndarray
    norm_c: np.ndarray
    norm_c_h2: np.ndarray
    norm_du_dt: np.ndarray
    norm_dc_dt: np.ndarray
    norm_dc_dt_w1inf: np.ndarray
    iterations: np.ndarray
    methods: list[str] = field(default_factory=list)
    cap_hits: int = 0
    warnings: list[str] = field(default_factory=list)

    @property
    def iters_max(self) -> int:
        return int(self.iterations.max()) if self.iterations.size else 0


def _vdx_norm(u, q, mesh):
    d = np.diff(u, axis=0) / mesh.dx * q.nodes[None, :]
    return float(np.sqrt(mesh.dx * np.sum(d**2 @ q.weights)))


def _h2_norm(c, mesh):
    dx = mesh.dx
    d1 = np.diff(c) / dx
    d2 = np.diff(c, 2) / dx**2
    w = mesh.trapezoid_weights()
    return float(np.sqrt(w @ c**2 + dx * np.sum(d1**2) + dx * np.sum(d2**2)))


def run_kinetic(setup, q: VelocityQuadrature, grid: TimeGrid, opts: SolverOptions = SolverOptions(),
                coupling: str = "lagged", n_snapshots: int = 32, steps=None) -> KineticTrajectory:
    """Integrate the coupled kinetic/chemoattractant system over ``[0, T]``.

    Each step solves for ``c^{n+1}`` with source ``gamma ubar^n`` and then
    for ``u^{n+1}`` with the gradient of ``c^{n+1}``. ``coupling="picard"``
    repeats both solves ``opts.picard_iters`` times, feeding back the newest
    ``ubar``; with one iteration it coincides with ``"lagged"``.
    """
    from .keller_segel import snapshot_steps

    if coupling not in ("lagged", "picard"):
        raise ConfigurationError(f"unknown coupling {coupling!r}; expected 'lagged' or 'picard'")
    k_iters = 1 if coupling == "lagged" else opts.picard_iters
    if steps is None:
        steps = snapshot_steps(grid.n_t, n_snapshots)
    wanted = set(int(s) for s in steps)
    mesh = setup.mesh
    ell = setup.ell
    eps = setup.epsilon
    N = grid.n_t

    state = initial_state(setup, q)
    c = setup.c0.copy()
    snaps_u, snaps_ub, snaps_c = [], [], []
    norm_u = np.zeros(N + 1)
    norm_relax = np.zeros(N + 1)
    norm_out = np.zeros(N + 1)
    norm_vdx = np.zeros(N + 1)
    norm_c = np.zeros(N + 1)
    norm_c_h2 = np.zeros(N + 1)
    du_dt = np.zeros(N)
    dc_dt = np.zeros(N)
    dc_w1 = np.zeros(N)
    iterations = np.zeros(N, dtype=int)
    methods = []
    cap_hits = 0
    msgs = []

    def record(n, st, c):
        g = lift(setup.gu.extension(mesh.x, grid.time(n), ell), q)
        norm_u[n] = l2_q(st.u, mesh, q)
        norm_relax[n] = l2_q(st.u - st.ubar[:, None], mesh, q)
        norm_out[n] = gamma_out(st.u - g, q)
        norm_vdx[n] = _vdx_norm(st.u, q, mesh)
        norm_c[n] = l2_x(c, mesh)
        norm_c_h2[n] = _h2_norm(c, mesh)
        if n in wanted:
            snaps_u.append(st.u.copy())
            snaps_ub.append(st.ubar.copy())
            snaps_c.append(c.copy())

    record(0, state, c)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConvergenceWarning)
        for n in range(N):
            t_new = grid.time(n + 1)
            dt = t_new - grid.time(n)
            ubar_k = state.ubar
            its = 0
            for _ in range(k_iters):
                c_new = step_parabolic(c, setup.gamma * ubar_k, setup, dt, opts.theta, t_new)
                new = step_kinetic(state, setup, q, gradient(c_new, mesh), dt, opts, t_new, ubar_guess=ubar_k)
                ubar_k = new.ubar
                its += new.iterations
                cap_hits += int(new.cap_hit)
            if not (np.all(np.isfinite(new.u)) and np.all(np.isfinite(c_new))):
                raise SolverError(
                    f"non-finite values in kinetic solution at step {n + 1} (t={t_new:.6g}, eps={eps})",
                    dump={"step": n + 1, "t": t_new, "u_prev": state.u, "c_prev": c,
                          "u": new.u, "c": c_new},
                )
            iterations[n] = its
            methods.append(new.method)
            du_dt[n] = eps * l2_q((new.u - state.u) / dt, mesh, q)
            dcdt = (c_new - c) / dt
            dc_dt[n] = l2_x(dcdt, mesh)
            dc_w1[n] = eps * (np.max(np.abs(dcdt)) + np.max(np.abs(np.diff(dcdt) / mesh.dx)))
            state, c = new, c_new
            record(n + 1, state, c)
    for w in caught:
        if issubclass(w.category, ConvergenceWarning):
            continue
        warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    if cap_hits:
        msgs.append(f"source iteration cap reached on {cap_hits} solves")
    n_direct = sum(m == "direct" for m in methods)
    if n_direct and opts.method == "auto":
        msgs.append(f"direct elimination used on {n_direct} of {N} steps")

    steps = np.array(sorted(wanted))
    return KineticTrajectory(
        epsilon=eps, dt=grid.dt, times=np.array([grid.time(s) for s in steps]), steps=steps,
        u=np.array(snaps_u), ubar=np.array(snaps_ub), cbar=np.array(snaps_c),
        norm_u=norm_u, norm_relax=norm_relax, norm_outflow=norm_out, norm_vdx=norm_vdx,
        norm_c=norm_c, norm_c_h2=norm_c_h2, norm_du_dt=du_dt, norm_dc_dt=dc_dt,
        norm_dc_dt_w1inf=dc_w1, iterations=iterations, methods=methods,
        cap_hits=cap_hits, warnings=msgs,
    )

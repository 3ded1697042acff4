"""IMEX finite-volume solver for the limiting Keller-Segel system

    d_t u - d_x(mu d_x u - chi d_x c u) = 0,
    d_t c - D d_xx c + beta c = gamma u,

with Dirichlet data on both fields. Diffusion of ``u`` is implicit, the
chemotactic drift explicit and upwinded.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import SolverError, StabilityWarning
from .parabolic import TridiagonalSystem, step_parabolic, thomas_solve
from .quadrature_mesh import TimeGrid


@dataclass(frozen=True)
class KSState:
    t: float
    ubar0: np.ndarray
    cbar0: np.ndarray
    cfl: float = 0.0


@dataclass
class KSTrajectory:
    times: np.ndarray
    steps: np.ndarray
    ubar0: np.ndarray
    cbar0: np.ndarray
    cfl_max: float = 0.0
    warnings: list[str] = field(default_factory=list)

    def restrict(self, factor: int, step_factor: int = 1) -> "KSTrajectory":
        """Nodal injection onto a mesh ``factor`` times coarser."""
        return KSTrajectory(
            times=self.times, steps=self.steps // step_factor,
            ubar0=self.ubar0[:, ::factor].copy(), cbar0=self.cbar0[:, ::factor].copy(),
            cfl_max=self.cfl_max, warnings=list(self.warnings),
        )


def _face_mean(a):
    return 0.5 * (a[:-1] + a[1:])


def drift_velocity(cbar0, coeffs, mesh) -> np.ndarray:
    """Face drift velocity ``chi d_x c`` (positive means motion to the right)."""
    return _face_mean(coeffs.chi) * np.diff(cbar0) / mesh.dx


def drift_diffusion_flux(ubar0, cbar0, coeffs, mesh) -> np.ndarray:
    """Face fluxes ``mu d_x u - chi d_x c u_upwind`` at the ``n_x`` faces."""
    u = np.asarray(ubar0, dtype=float)
    w = drift_velocity(cbar0, coeffs, mesh)
    u_up = np.where(w >= 0, u[:-1], u[1:])
    return _face_mean(coeffs.mu) * np.diff(u) / mesh.dx - w * u_up


def step_ks(state: KSState, setup, coeffs, dt: float, cbar_new: np.ndarray | None = None) -> KSState:
    """Advance one step: chemoattractant first (source ``gamma u^n``), then ``u``."""
    t_new = state.t + dt
    if cbar_new is None:
        cbar_new = step_parabolic(state.cbar0, setup.gamma * state.ubar0, setup, dt, 1.0, t_new)
    mesh = setup.mesh
    dx = mesh.dx
    u = state.ubar0
    w = drift_velocity(cbar_new, coeffs, mesh)
    cfl = float(np.max(np.abs(w))) * dt / dx if w.size else 0.0
    if cfl > 1.0:
        warnings.warn(
            f"drift CFL {cfl:.3g} > 1 at t={t_new:.6g}; use dt <= {dt / cfl:.3g}",
            StabilityWarning, stacklevel=2,
        )
    u_up = np.where(w >= 0, u[:-1], u[1:])
    drift = w * u_up
    mu_f = _face_mean(coeffs.mu) / dx**2
    n = u.size
    sub = np.zeros(n)
    sup = np.zeros(n)
    diag = np.ones(n)
    rhs = np.empty(n)
    sub[1:-1] = -dt * mu_f[:-1]
    sup[1:-1] = -dt * mu_f[1:]
    diag[1:-1] = 1.0 + dt * (mu_f[:-1] + mu_f[1:])
    rhs[1:-1] = u[1:-1] - dt * (drift[1:] - drift[:-1]) / dx
    rhs[0], rhs[-1] = setup.gu.value(t_new)
    u_new = thomas_solve(TridiagonalSystem(sub, diag, sup, rhs))
    return KSState(t=t_new, ubar0=u_new, cbar0=cbar_new, cfl=cfl)


def snapshot_steps(n_t: int, n_snapshots: int) -> np.ndarray:
    """Step indices of ``n_snapshots`` uniform output times plus t=0."""
    n_snapshots = max(1, min(int(n_snapshots), n_t))
    return np.unique(np.round(np.linspace(0, n_t, n_snapshots + 1)).astype(int))


def run_ks(setup, grid: TimeGrid, coeffs, n_snapshots: int = 32, steps: np.ndarray | None = None) -> KSTrajectory:
    """Integrate the limit system from ``(u0, c0)`` over ``[0, T]``."""
    if steps is None:
        steps = snapshot_steps(grid.n_t, n_snapshots)
    wanted = set(int(s) for s in steps)
    state = KSState(t=0.0, ubar0=setup.u0.copy(), cbar0=setup.c0.copy())
    us, cs = [], []
    cfl_max = 0.0
    n_warn = 0
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", StabilityWarning)
        for n in range(grid.n_t + 1):
            if n in wanted:
                us.append(state.ubar0)
                cs.append(state.cbar0)
            if n == grid.n_t:
                break
            dt = grid.time(n + 1) - grid.time(n)
            state = step_ks(state, setup, coeffs, dt)
            cfl_max = max(cfl_max, state.cfl)
            if not (np.all(np.isfinite(state.ubar0)) and np.all(np.isfinite(state.cbar0))):
                raise SolverError(
                    f"non-finite values in Keller-Segel solution at step {n + 1} (t={state.t:.6g})",
                    dump={"step": n + 1, "t": state.t, "ubar0": state.ubar0, "cbar0": state.cbar0},
                )
        n_warn = sum(issubclass(c.category, StabilityWarning) for c in caught)
    msgs = [f"drift CFL exceeded 1 on {n_warn} steps (max {cfl_max:.3g})"] if n_warn else []
    steps = np.array(sorted(wanted))
    return KSTrajectory(
        times=np.array([grid.time(s) for s in steps]), steps=steps,
        ubar0=np.array(us), cbar0=np.array(cs), cfl_max=cfl_max, warnings=msgs,
    )

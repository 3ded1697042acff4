"""Diffusion-limit diagnostics: corrector, remainders, bound table, rate fits."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ValidationError
from .quadrature_mesh import (
    VelocityQuadrature, gradient, h1_x, l2_q, l2_time, lift, linf_time, velocity_average,
)

BOUND_NAMES = ("a", "b", "c", "d", "e", "f", "g", "h")


@dataclass
class DecompositionReport:
    epsilon: float
    times: np.ndarray
    u1: np.ndarray
    phi_norm: float
    eta_norm: float
    u_error: float
    c_error: float
    combined_error: float
    err_b: float
    err_c: float
    vbar_u1_residual: float
    phibar_residual: float


@dataclass
class RateFit:
    epsilons: list
    errors: list
    slope: float
    intercept: float
    r_squared: float

    def within(self, lo: float, hi: float) -> bool:
        return lo <= self.slope <= hi


def corrector_u1(ubar0, cbar0, setup) -> np.ndarray:
    """First-order corrector ``(-d_x u0 + alpha d_x c0 u0) / sigma``."""
    mesh = setup.mesh
    u0 = np.asarray(ubar0, dtype=float)
    return (-gradient(u0, mesh) + setup.alpha * gradient(cbar0, mesh) * u0) / setup.sigma


def decompose_remainders(kin_traj, ks_traj, setup, q: VelocityQuadrature) -> DecompositionReport:
    """Split the kinetic solution as ``u0 + eps v u1 + phi`` at every snapshot.

    ``ks_traj`` must already live on the kinetic mesh and snapshot steps.
    """
    if not np.array_equal(kin_traj.steps, ks_traj.steps):
        raise DimensionError("kinetic and limit trajectories have different output times")
    if kin_traj.ubar.shape != ks_traj.ubar0.shape:
        raise DimensionError(
            f"kinetic grid {kin_traj.ubar.shape} and limit grid {ks_traj.ubar0.shape} differ")
    mesh = setup.mesh
    eps = kin_traj.epsilon
    v = q.nodes
    u1s, phi, eta, u_err, c_err, vres, pres = [], [], [], [], [], [], []
    for u, ub, c, u0, c0 in zip(kin_traj.u, kin_traj.ubar, kin_traj.cbar, ks_traj.ubar0, ks_traj.cbar0):
        u1 = corrector_u1(u0, c0, setup)
        u1s.append(u1)
        corr = eps * v[None, :] * u1[:, None]
        ph = u - u0[:, None] - corr
        phi.append(l2_q(ph, mesh, q))
        eta.append(h1_x(c - c0, mesh))
        u_err.append(l2_q(u - lift(u0, q), mesh, q))
        c_err.append(eta[-1])
        vres.append(np.max(np.abs(velocity_average(v[None, :] * u1[:, None], q))))
        pres.append(np.max(np.abs(velocity_average(ph, q) - (ub - u0))))
    u_error = linf_time(u_err)
    c_error = linf_time(c_err)
    return DecompositionReport(
        epsilon=eps, times=kin_traj.times, u1=np.array(u1s),
        phi_norm=linf_time(phi), eta_norm=linf_time(eta),
        u_error=u_error, c_error=c_error, combined_error=u_error + c_error,
        err_b=l2_time(kin_traj.norm_relax, kin_traj.dt),
        err_c=l2_time(kin_traj.norm_outflow, kin_traj.dt),
        vbar_u1_residual=float(max(vres)), phibar_residual=float(max(pres)),
    )


def _pad(values):
    # forward-difference series have one entry fewer than time levels
    return np.append(values, 0.0)


def theorem_bounds_report(kin_traj, setup=None, q=None) -> dict[str, float]:
    """Discrete surrogates of the a-priori bounds (a)-(h).

    Only magnitudes; the (b) and (c) scalings are judged at sweep level.
    """
    dt = kin_traj.dt
    h = kin_traj.norm_dc_dt_w1inf
    return {
        "a": linf_time(kin_traj.norm_u),
        "b": l2_time(kin_traj.norm_relax, dt),
        "c": l2_time(kin_traj.norm_outflow, dt),
        "d": linf_time(kin_traj.norm_du_dt),
        "e": l2_time(kin_traj.norm_vdx, dt),
        "f": float(np.hypot(l2_time(kin_traj.norm_c, dt), l2_time(_pad(kin_traj.norm_dc_dt), dt))),
        "g": l2_time(kin_traj.norm_c_h2, dt),
        "h": float((dt * np.sum(h**4)) ** 0.25),
    }


def fit_rate(epsilons, errors) -> RateFit:
    """Least-squares line through ``(log eps, log error)``."""
    eps = np.asarray(epsilons, dtype=float)
    err = np.asarray(errors, dtype=float)
    if eps.shape != err.shape or eps.ndim != 1:
        raise ValidationError("epsilons and errors must be 1-D sequences of equal length")
    if eps.size < 3:
        raise ValidationError(f"rate fit needs at least 3 points, got {eps.size}")
    if np.any(~np.isfinite(eps)) or np.any(~np.isfinite(err)) or np.any(eps <= 0) or np.any(err <= 0):
        raise ValidationError("rate fit needs positive finite epsilons and errors")
    if np.any(np.diff(eps) >= 0):
        raise ValidationError("epsilons must be strictly decreasing")
    x, y = np.log(eps), np.log(err)
    slope, intercept = np.polyfit(x, y, 1)
    ss_res = float(np.sum((y - (slope * x + intercept)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RateFit(epsilons=eps.tolist(), errors=err.tolist(), slope=float(slope),
                   intercept=float(intercept), r_squared=float(r2))

"""Reaction-diffusion solver for the chemoattractant equation

    d_t c - D d_xx c + beta c = source,  c = g_c on the boundary,

on the vertex-centred mesh, with a theta-method in time and a Thomas
tridiagonal solve per step.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, SolverError


@dataclass
class TridiagonalSystem:
    """``sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]``.

    ``sub[0]`` and ``sup[-1]`` are ignored.
    """

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        n = len(self.diag)
        if not (len(self.sub) == len(self.sup) == len(self.rhs) == n):
            raise DimensionError("tridiagonal arrays must all have the same length")

    def dense(self) -> np.ndarray:
        n = len(self.diag)
        A = np.diag(np.asarray(self.diag, dtype=float))
        A[np.arange(1, n), np.arange(n - 1)] = self.sub[1:]
        A[np.arange(n - 1), np.arange(1, n)] = self.sup[:-1]
        return A


def thomas_solve(sys: TridiagonalSystem) -> np.ndarray:
    """Thomas algorithm (no pivoting); O(n)."""
    a = np.asarray(sys.sub, dtype=float).tolist()
    b = np.asarray(sys.diag, dtype=float).tolist()
    c = np.asarray(sys.sup, dtype=float).tolist()
    d = np.asarray(sys.rhs, dtype=float).tolist()
    n = len(b)
    cp = [0.0] * n
    dp = [0.0] * n
    piv = b[0]
    if piv == 0.0:
        raise SolverError("zero pivot in row 0 of tridiagonal system")
    cp[0] = c[0] / piv
    dp[0] = d[0] / piv
    for i in range(1, n):
        piv = b[i] - a[i] * cp[i - 1]
        if piv == 0.0:
            raise SolverError(f"zero pivot in row {i} of tridiagonal system")
        cp[i] = c[i] / piv
        dp[i] = (d[i] - a[i] * dp[i - 1]) / piv
    x = [0.0] * n
    x[-1] = dp[-1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return np.array(x)


def laplacian(c: np.ndarray, dx: float) -> np.ndarray:
    """Three-point Laplacian at interior nodes; zero at the boundary nodes."""
    out = np.zeros_like(c)
    out[1:-1] = (c[:-2] - 2.0 * c[1:-1] + c[2:]) / dx**2
    return out


def _check(f, setup):
    f = np.asarray(f, dtype=float)
    if f.shape != (setup.mesh.n_nodes,):
        raise DimensionError(f"field of shape {f.shape} does not conform to {setup.mesh.n_nodes} nodes")
    return f


def step_parabolic(cbar, source, setup, dt: float, theta: float = 1.0, t_new: float = 0.0) -> np.ndarray:
    """One theta-method step; boundary nodes take ``g_c(t_new)``.

    ``source`` is used as given for the whole step, so the caller samples it
    at the time level matching ``theta``.
    """
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    c = _check(cbar, setup)
    s = _check(source, setup)
    D, beta, dx = setup.D, setup.beta, setup.mesh.dx
    n = c.size
    r = D / dx**2
    sub = np.full(n, -theta * r)
    sup = np.full(n, -theta * r)
    diag = np.full(n, 1.0 / dt + theta * (2.0 * r + beta))
    rhs = c / dt + s
    if theta < 1.0:
        rhs += (1.0 - theta) * (D * laplacian(c, dx) - beta * c)
    gl, gr = setup.gc.value(t_new)
    for i, g in ((0, gl), (n - 1, gr)):
        sub[i] = sup[i] = 0.0
        diag[i] = 1.0
        rhs[i] = g
    return thomas_solve(TridiagonalSystem(sub, diag, sup, rhs))


def steady_state_solve(setup, source, t: float = 0.0) -> np.ndarray:
    """Solve ``-D c'' + beta c = source`` with Dirichlet data ``g_c(t)``."""
    s = _check(source, setup)
    D, beta, dx = setup.D, setup.beta, setup.mesh.dx
    n = s.size
    r = D / dx**2
    sub = np.full(n, -r)
    sup = np.full(n, -r)
    diag = np.full(n, 2.0 * r + beta)
    rhs = s.copy()
    gl, gr = setup.gc.value(t)
    for i, g in ((0, gl), (n - 1, gr)):
        sub[i] = sup[i] = 0.0
        diag[i] = 1.0
        rhs[i] = g
    return thomas_solve(TridiagonalSystem(sub, diag, sup, rhs))

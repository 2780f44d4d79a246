"""Hamiltonian systems on the plane and their implicit-midpoint time maps.

Convention: for a canonical pair written (x, y) the flow is

    dx/dt = dH/dy,   dy/dt = -dH/dx,

i.e. zdot = J grad H with J = [[0, 1], [-1, 0]].  The same convention is
used for a polar pair (rho, theta) carrying the area form d rho ^ d theta.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .maps import MapDescriptor

_J = np.array([[0.0, 1.0], [-1.0, 0.0]])


@dataclass
class HamiltonianSystem:
    """Hamiltonian with analytic gradient (and optionally Hessian / value).

    grad(p) returns (dH/dx, dH/dy) with shape (..., 2); hess(p) returns the
    symmetric second-derivative matrix with shape (..., 2, 2); value(p) is H
    itself, used only for energy-drift diagnostics.
    """

    name: str
    grad: Callable
    hess: Optional[Callable] = None
    value: Optional[Callable] = None

    def field(self, p):
        g = self.grad(p)
        return np.stack([g[..., 1], -g[..., 0]], axis=-1)

    def field_jacobian(self, p):
        if self.hess is None:
            raise ValueError(f"{self.name}: no Hessian available")
        return _J @ self.hess(p)


def _solve2(A, b):
    """Batched 2x2 linear solve (closed form, no LAPACK round trip)."""
    det = A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]
    x0 = (b[..., 0] * A[..., 1, 1] - b[..., 1] * A[..., 0, 1]) / det
    x1 = (A[..., 0, 0] * b[..., 1] - A[..., 1, 0] * b[..., 0]) / det
    return np.stack([x0, x1], axis=-1)


def _midpoint_steps(sys, p, t, steps, tol, with_jac, fp_cap=30):
    """Integrate `steps` implicit-midpoint steps of size t/steps.

    Returns (z, M) where M is the exact variational (Cayley) Jacobian of the
    discrete flow, or None when with_jac is False.
    """
    h = t / steps
    z = np.array(p, dtype=float, copy=True)
    M = None
    if with_jac:
        M = np.zeros(z.shape + (2,), dtype=float)
        M[..., 0, 0] = 1.0
        M[..., 1, 1] = 1.0
    eye = np.zeros((2, 2)) + np.eye(2)

    for _ in range(steps):
        # fixed-point solve for w = z + h f((z+w)/2), explicit-Euler start
        w = z + h * sys.field(z)
        converged = False
        for _ in range(fp_cap):
            w_new = z + h * sys.field(0.5 * (z + w))
            delta = np.max(np.abs(w_new - w))
            w = w_new
            if delta <= tol:
                converged = True
                break
        if not converged:
            # Newton fallback on G(w) = w - z - h f((z+w)/2)
            for _ in range(50):
                mid = 0.5 * (z + w)
                G = w - z - h * sys.field(mid)
                if np.max(np.abs(G)) <= tol:
                    break
                JG = eye - (0.5 * h) * sys.field_jacobian(mid)
                w = w - _solve2(JG, G)
            else:
                raise RuntimeError(f"{sys.name}: midpoint solver failed at h={h:g}")
        if with_jac:
            # exact step Jacobian: (I - h/2 Df)^{-1} (I + h/2 Df) at the midpoint
            Df = sys.field_jacobian(0.5 * (z + w))
            A = eye - (0.5 * h) * Df
            B = eye + (0.5 * h) * Df
            BM = B @ M
            detA = A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]
            Ainv = np.empty_like(A)
            Ainv[..., 0, 0] = A[..., 1, 1]
            Ainv[..., 0, 1] = -A[..., 0, 1]
            Ainv[..., 1, 0] = -A[..., 1, 0]
            Ainv[..., 1, 1] = A[..., 0, 0]
            M = (Ainv @ BM) / detA[..., None, None]
        z = w
    return z, M


def hamiltonian_time_map(sys, t, steps=None, max_dt=0.05, tol=1e-13, name=None):
    """Time-t flow map of `sys` as a MapDescriptor.

    Implicit midpoint with a fixed-point inner solve (tolerance `tol`,
    Newton fallback); the Jacobian is the product of the per-step Cayley
    transforms, which is exactly symplectic.  The number of steps defaults
    to ceil(|t| / max_dt).

    The step Jacobian needs sys.hess; without it the descriptor falls back
    to finite differences.
    """
    t = float(t)
    if steps is None:
        steps = max(1, int(np.ceil(abs(t) / max_dt))) if t != 0.0 else 1
    has_hess = sys.hess is not None

    def fwd(p):
        z, _ = _midpoint_steps(sys, p, t, steps, tol, with_jac=False)
        return z

    jac = None
    if has_hess:
        def jac(p):
            _, M = _midpoint_steps(sys, p, t, steps, tol, with_jac=True)
            return M

    def inv(q):
        z, _ = _midpoint_steps(sys, q, -t, steps, tol, with_jac=False)
        return z

    return MapDescriptor(
        name or f"flow[{sys.name}, t={t:g}]",
        fwd, jac, inv, symplectic=True,
    )


def energy_drift(sys, mapping, pts):
    """max |H(f(p)) - H(p)| over pts; requires sys.value."""
    if sys.value is None:
        raise ValueError("energy_drift needs sys.value")
    pts = np.asarray(pts, dtype=float)
    return float(np.max(np.abs(sys.value(mapping(pts)) - sys.value(pts))))


def saddle_system(sigma):
    """H = sigma * x * y: linear saddle flow (x, y) -> (e^{st} x, e^{-st} y)."""
    s = float(sigma)

    def grad(p):
        return np.stack([s * p[..., 1], s * p[..., 0]], axis=-1)

    def hess(p):
        H = np.zeros(np.shape(p)[:-1] + (2, 2), dtype=float)
        H[..., 0, 1] = s
        H[..., 1, 0] = s
        return H

    def value(p):
        return s * p[..., 0] * p[..., 1]

    return HamiltonianSystem(f"sigma*x*y (sigma={s:g})", grad, hess, value)

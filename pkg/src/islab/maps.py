"""Planar and toral map descriptors and the basic symplectic building blocks.

Points are numpy arrays of shape (..., 2); the last axis is (x, y).  Torus
points live in the fundamental square [0,1)^2 and are reduced there by
`wrap_torus`.  Jacobians are always computed on the plane lift and returned
with shape (..., 2, 2).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

# Type aliases for readability; points/Jacobians are plain arrays.
PlanePoint = np.ndarray   # shape (..., 2)
TorusPoint = np.ndarray   # shape (..., 2), entries in [0, 1)
Jacobian2 = np.ndarray    # shape (..., 2, 2)


def wrap_torus(p):
    """Reduce points mod 1 into [0, 1)^2."""
    return np.mod(p, 1.0)


def torus_diff(p, q):
    """Shortest-representative difference p - q on the torus, in [-1/2, 1/2)."""
    d = np.asarray(p) - np.asarray(q)
    return d - np.round(d)


def torus_dist(p, q):
    d = torus_diff(p, q)
    return np.sqrt(np.sum(d * d, axis=-1))


def finite_difference_jacobian(f, p, h=None, wrap_output=False):
    """Central finite-difference Jacobian of f at p.

    Parameters
    ----------
    f : callable
        Map taking (..., 2) arrays to (..., 2) arrays.
    p : array, shape (..., 2)
    h : float or None
        Step size.  Default is componentwise 1e-6 * (1 + |p_i|).
    wrap_output : bool
        If True, image differences are reduced to the shortest torus
        representative before dividing (use for maps that wrap mod 1).

    Returns
    -------
    J : array, shape (..., 2, 2)
    """
    p = np.asarray(p, dtype=float)
    if h is None:
        step = 1e-6 * (1.0 + np.abs(p))
    else:
        step = np.broadcast_to(float(h), p.shape).copy()
    J = np.empty(p.shape + (2,), dtype=float)
    for j in range(2):
        dp = np.zeros_like(p)
        dp[..., j] = step[..., j]
        fp = np.asarray(f(p + dp), dtype=float)
        fm = np.asarray(f(p - dp), dtype=float)
        diff = fp - fm
        if wrap_output:
            diff = diff - np.round(diff)
        J[..., :, j] = diff / (2.0 * step[..., j])[..., None]
    return J


@dataclass
class MapDescriptor:
    """A(n invertible) planar or toral map with optional analytic extras.

    Attributes
    ----------
    name : str
    fwd : callable
        Evaluation, (..., 2) -> (..., 2).  Torus maps return wrapped output.
    jac : callable or None
        Analytic Jacobian, (..., 2) -> (..., 2, 2), on the plane lift.
        When None, `jacobian` falls back to central finite differences.
    inv : callable or None
        Exact inverse evaluation, if one is known in closed form.
    symplectic : bool
        Whether the map is declared area-preserving (w.r.t. dx dy, or
        w.r.t. the weighted form when `area_density` is set).
    wrap : bool
        True for torus maps (outputs in [0,1)^2, FD differences unwrapped).
    domain : callable or None
        Boolean containment mask for points where the map is defined.
    area_density : callable or None
        Density mu(p) > 0 when the map preserves mu * dx dy rather than
        dx dy.  Symplecticity checks then weigh the determinant as
        mu(f(p)) det Df(p) / mu(p).
    """

    name: str
    fwd: Callable
    jac: Optional[Callable] = None
    inv: Optional[Callable] = None
    symplectic: bool = True
    wrap: bool = False
    domain: Optional[Callable] = None
    area_density: Optional[Callable] = None

    def __call__(self, p):
        return self.fwd(np.asarray(p, dtype=float))

    def jacobian(self, p):
        p = np.asarray(p, dtype=float)
        if self.jac is not None:
            return self.jac(p)
        return finite_difference_jacobian(self.fwd, p, wrap_output=self.wrap)

    def inverse(self, q):
        if self.inv is None:
            raise ValueError(f"{self.name}: no closed-form inverse; use invert_at")
        return self.inv(np.asarray(q, dtype=float))

    def symplectic_defect(self, p):
        """|mu(f p) det Df(p) / mu(p) - 1| (mu = 1 when no density is set)."""
        p = np.asarray(p, dtype=float)
        det = np.linalg.det(self.jacobian(p))
        if self.area_density is not None:
            det = det * self.area_density(self.fwd(p)) / self.area_density(p)
        return np.abs(det - 1.0)


def compose(*maps, name=None):
    """Composition m_1 o m_2 o ... o m_k (rightmost applied first).

    The Jacobian is assembled by the chain rule; the inverse exists when
    every factor carries one.  The composite inherits `wrap` from the
    leftmost factor and `domain` from the rightmost.
    """
    if not maps:
        raise ValueError("compose() needs at least one map")
    if len(maps) == 1:
        return maps[0]

    def fwd(p):
        for m in reversed(maps):
            p = m.fwd(p)
        return p

    def jac(p):
        J = None
        for m in reversed(maps):
            Jm = m.jacobian(p)
            J = Jm if J is None else Jm @ J
            p = m.fwd(p)
        return J

    inv = None
    if all(m.inv is not None for m in maps):
        def inv(q):
            for m in maps:
                q = m.inv(q)
            return q

    return MapDescriptor(
        name=name or "(" + "∘".join(m.name for m in maps) + ")",
        fwd=fwd,
        jac=jac,
        inv=inv,
        symplectic=all(m.symplectic for m in maps),
        wrap=maps[0].wrap,
        domain=maps[-1].domain,
    )


def invert_at(m, target, x0=None, tol=1e-12, max_iter=50):
    """Solve m(p) = target pointwise.

    Uses the descriptor's exact inverse when present; otherwise a damped
    Newton iteration (step halving on residual increase).  Accepts batched
    targets of shape (..., 2).

    Raises
    ------
    RuntimeError if the residual does not reach `tol` within `max_iter`.
    """
    target = np.asarray(target, dtype=float)
    if m.inv is not None:
        return m.inv(target)

    x = np.array(target if x0 is None else x0, dtype=float, copy=True)

    def resid(z):
        r = m.fwd(z) - target
        if m.wrap:
            r = r - np.round(r)
        return r

    r = resid(x)
    for _ in range(max_iter):
        rn = np.max(np.abs(r))
        if rn <= tol:
            return x
        J = m.jacobian(x)
        dx = np.linalg.solve(J, r[..., None])[..., 0]
        s = 1.0
        for _ in range(60):
            x_try = x - s * dx
            r_try = resid(x_try)
            if np.max(np.abs(r_try)) < rn:
                break
            s *= 0.5
        x, r = x_try, r_try
    if np.max(np.abs(resid(x))) > tol:
        raise RuntimeError(f"invert_at({m.name}): Newton stalled above tol={tol}")
    return x


# ----------------------------------------------------------------------
# Built-in maps
# ----------------------------------------------------------------------

def anosov_map(matrix=((13, 8), (8, 5))):
    """Linear hyperbolic torus automorphism p -> M p (mod 1).

    The default matrix is symmetric with determinant 1 and top eigenvalue
    9 + 4*sqrt(5), whose log is the expansion rate sigma.
    """
    M = np.asarray(matrix, dtype=float)
    if abs(np.linalg.det(M) - 1.0) > 1e-12:
        raise ValueError("anosov_map: matrix must have determinant 1")
    Minv = np.array([[M[1, 1], -M[0, 1]], [-M[1, 0], M[0, 0]]], dtype=float)

    def fwd(p):
        return wrap_torus(p @ M.T)

    def jac(p):
        return np.broadcast_to(M, np.shape(p)[:-1] + (2, 2)).copy()

    def inv(q):
        return wrap_torus(q @ Minv.T)

    return MapDescriptor("F_A", fwd, jac, inv, symplectic=True, wrap=True)


def chirikov_map(a):
    """Standard-family torus map (x, y) -> (2x - y + a sin(2 pi x), x).

    The fixed point (1/2, 1/2) is elliptic for 0 < a < 2/pi (the trace of
    the Jacobian there is 2 - 2 pi a).
    """
    a = float(a)

    def fwd(p):
        x, y = p[..., 0], p[..., 1]
        return wrap_torus(np.stack([2.0 * x - y + a * np.sin(2 * np.pi * x), x], axis=-1))

    def jac(p):
        x = p[..., 0]
        J = np.empty(np.shape(p)[:-1] + (2, 2), dtype=float)
        J[..., 0, 0] = 2.0 + 2 * np.pi * a * np.cos(2 * np.pi * x)
        J[..., 0, 1] = -1.0
        J[..., 1, 0] = 1.0
        J[..., 1, 1] = 0.0
        return J

    def inv(q):
        X, Y = q[..., 0], q[..., 1]
        return wrap_torus(np.stack([Y, 2.0 * Y + a * np.sin(2 * np.pi * Y) - X], axis=-1))

    return MapDescriptor(f"T_a(a={a:g})", fwd, jac, inv, symplectic=True, wrap=True)


def shear_map(psi, dpsi=None, name="S_psi", wrap=False):
    """Vertical shear S_psi(x, y) = (x, y + psi(x)).

    `psi` maps x-arrays to arrays; `dpsi` is its derivative (finite
    differenced on psi when omitted).
    """
    if dpsi is None:
        def dpsi(x, _p=psi):
            h = 1e-6 * (1.0 + np.abs(x))
            return (_p(x + h) - _p(x - h)) / (2.0 * h)

    def fwd(p):
        out = np.array(p, dtype=float, copy=True)
        out[..., 1] += psi(p[..., 0])
        return wrap_torus(out) if wrap else out

    def jac(p):
        J = np.zeros(np.shape(p)[:-1] + (2, 2), dtype=float)
        J[..., 0, 0] = 1.0
        J[..., 1, 1] = 1.0
        J[..., 1, 0] = dpsi(p[..., 0])
        return J

    def inv(q):
        out = np.array(q, dtype=float, copy=True)
        out[..., 1] -= psi(q[..., 0])
        return wrap_torus(out) if wrap else out

    return MapDescriptor(name, fwd, jac, inv, symplectic=True, wrap=wrap)


def henon_like(psi, dpsi=None, name="H_psi"):
    """Henon-form plane map H_psi(x, y) = (y, -x + psi(y)).

    Exact inverse (xb, yb) -> (psi(xb) - yb, xb).  With psi = 0 this is the
    clockwise quarter turn H_0, and H_0^4 = id.
    """
    if dpsi is None:
        def dpsi(x, _p=psi):
            h = 1e-6 * (1.0 + np.abs(x))
            return (_p(x + h) - _p(x - h)) / (2.0 * h)

    def fwd(p):
        x, y = p[..., 0], p[..., 1]
        return np.stack([y, -x + psi(y)], axis=-1)

    def jac(p):
        J = np.zeros(np.shape(p)[:-1] + (2, 2), dtype=float)
        J[..., 0, 1] = 1.0
        J[..., 1, 0] = -1.0
        J[..., 1, 1] = dpsi(p[..., 1])
        return J

    def inv(q):
        xb, yb = q[..., 0], q[..., 1]
        return np.stack([psi(xb) - yb, xb], axis=-1)

    return MapDescriptor(name, fwd, jac, inv, symplectic=True)


def quarter_turn():
    """The rotation H_0(x, y) = (y, -x); equals henon_like(0)."""
    return henon_like(lambda y: np.zeros_like(y), lambda y: np.zeros_like(y), name="H_0")


def rotation_map(angle, name=None):
    """Rigid plane rotation by `angle` (not hyperbolic; cone-test falsifier)."""
    c, s = np.cos(angle), np.sin(angle)
    R = np.array([[c, -s], [s, c]])

    def fwd(p):
        return p @ R.T

    def jac(p):
        return np.broadcast_to(R, np.shape(p)[:-1] + (2, 2)).copy()

    def inv(q):
        return q @ R

    return MapDescriptor(name or f"R({angle:g})", fwd, jac, inv, symplectic=True)


def identity_map(name="id"):
    def fwd(p):
        return np.array(p, dtype=float, copy=True)

    def jac(p):
        J = np.zeros(np.shape(p)[:-1] + (2, 2), dtype=float)
        J[..., 0, 0] = 1.0
        J[..., 1, 1] = 1.0
        return J

    return MapDescriptor(name, fwd, jac, fwd, symplectic=True)

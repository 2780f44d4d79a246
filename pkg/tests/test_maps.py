import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from islab.maps import (
    MapDescriptor,
    anosov_map,
    chirikov_map,
    compose,
    finite_difference_jacobian,
    henon_like,
    identity_map,
    invert_at,
    quarter_turn,
    rotation_map,
    shear_map,
    torus_diff,
    wrap_torus,
)

rng = np.random.default_rng(12345)

SIGMA = np.log(9 + 4 * np.sqrt(5))


def trig_psi(coeffs):
    coeffs = np.asarray(coeffs, dtype=float)

    def psi(x):
        out = np.zeros_like(np.asarray(x, dtype=float))
        for k, c in enumerate(coeffs, start=1):
            out = out + c * np.sin(2 * np.pi * k * x)
        return out

    def dpsi(x):
        out = np.zeros_like(np.asarray(x, dtype=float))
        for k, c in enumerate(coeffs, start=1):
            out = out + c * 2 * np.pi * k * np.cos(2 * np.pi * k * x)
        return out

    return psi, dpsi


def test_wrap_and_diff():
    p = rng.normal(size=(50, 2)) * 10
    w = wrap_torus(p)
    assert np.all((w >= 0) & (w < 1))
    d = torus_diff(rng.random((50, 2)), rng.random((50, 2)))
    assert np.all((d >= -0.5) & (d < 0.5))


def test_anosov_basics():
    F = anosov_map()
    p = rng.random((200, 2))
    # determinant one everywhere
    assert np.max(np.abs(np.linalg.det(F.jacobian(p)) - 1)) < 1e-12
    # exact inverse round trip (toral distance)
    q = F(p)
    back = F.inverse(q)
    assert np.max(np.abs(torus_diff(back, p))) < 1e-12
    # fixed points: the four 2-torsion points
    tor = np.array([[0, 0], [0.5, 0], [0, 0.5], [0.5, 0.5]], dtype=float)
    assert np.max(np.abs(torus_diff(F(tor), tor))) == 0.0
    # top eigenvalue e^sigma
    lam = np.max(np.linalg.eigvalsh(F.jacobian(np.zeros(2))))
    assert abs(np.log(lam) - SIGMA) < 1e-14


def test_chirikov_inverse_and_trace():
    T = chirikov_map(0.35)
    p = rng.random((300, 2))
    assert np.max(np.abs(torus_diff(T.inverse(T(p)), p))) < 1e-12
    assert np.max(np.abs(np.linalg.det(T.jacobian(p)) - 1)) < 1e-12
    # elliptic fixed point at (1/2, 1/2): trace 2 - 2 pi a
    J = T.jacobian(np.array([0.5, 0.5]))
    assert abs(np.trace(J) - (2 - 2 * np.pi * 0.35)) < 1e-12
    assert np.max(np.abs(torus_diff(T(np.array([0.5, 0.5])), [0.5, 0.5]))) < 1e-15


def test_fd_jacobian_matches_chirikov_analytic():
    # Richardson-style sanity: h = 1e-5 central differences at a generic point
    T = chirikov_map(0.8)
    p = np.array([0.3, 0.7])
    J_fd = finite_difference_jacobian(T.fwd, p, h=1e-5, wrap_output=True)
    assert np.max(np.abs(J_fd - T.jacobian(p))) < 1e-8


def test_fd_default_step_scales_with_point():
    f = lambda p: np.stack([p[..., 0] ** 2, p[..., 1]], axis=-1)
    p = np.array([1000.0, 3.0])
    J = finite_difference_jacobian(f, p)
    assert abs(J[0, 0] - 2000.0) < 1e-3


def test_shear_and_henon_inverses():
    psi, dpsi = trig_psi([1e-2, -3e-3, 2e-3])
    S = shear_map(psi, dpsi)
    H = henon_like(psi, dpsi)
    p = rng.normal(size=(100, 2))
    assert np.max(np.abs(S.inverse(S(p)) - p)) < 1e-14
    assert np.max(np.abs(H.inverse(H(p)) - p)) < 1e-14
    assert np.max(np.abs(np.linalg.det(S.jacobian(p)) - 1)) < 1e-14
    assert np.max(np.abs(np.linalg.det(H.jacobian(p)) - 1)) < 1e-14


def test_quarter_turn_power_four():
    H0 = quarter_turn()
    p = rng.normal(size=(40, 2))
    q = p
    for _ in range(4):
        q = H0(q)
    assert np.max(np.abs(q - p)) < 1e-15


def test_compose_chain_rule_and_det():
    psi, dpsi = trig_psi([5e-3, 1e-3])
    F, S, H = anosov_map(), shear_map(psi, dpsi), henon_like(psi, dpsi)
    C = compose(S, H)
    p = rng.normal(size=(100, 2))
    # determinant multiplicativity
    assert np.max(np.abs(np.linalg.det(C.jacobian(p)) - 1)) < 1e-12
    # chain rule against finite differences
    J_fd = finite_difference_jacobian(C.fwd, p[:5])
    assert np.max(np.abs(J_fd - C.jacobian(p[:5]))) < 1e-6
    # associativity
    left = compose(compose(S, H), S)
    right = compose(S, compose(H, S))
    assert np.max(np.abs(left(p) - right(p))) < 1e-12
    assert np.max(np.abs(left.jacobian(p) - right.jacobian(p))) < 1e-10
    # composite of torus map wraps
    torus_comp = compose(F, F)
    out = torus_comp(rng.random((20, 2)))
    assert np.all((out >= 0) & (out < 1))


def test_compose_inverse_available_when_factors_have_it():
    psi, dpsi = trig_psi([2e-3])
    C = compose(shear_map(psi, dpsi), henon_like(psi, dpsi))
    p = rng.normal(size=(30, 2))
    assert np.max(np.abs(C.inv(C(p)) - p)) < 1e-13


def test_invert_at_uses_exact_inverse():
    F = anosov_map()
    q = rng.random((20, 2))
    p = invert_at(F, q)
    assert np.max(np.abs(torus_diff(F(p), q))) < 1e-12


def test_invert_at_newton_without_closed_form():
    psi, dpsi = trig_psi([8e-3, -4e-3])
    S = shear_map(psi, dpsi)
    stripped = MapDescriptor("S_noinv", S.fwd, S.jac, None, symplectic=True)
    q = rng.normal(size=(25, 2))
    p = invert_at(stripped, q)
    assert np.max(np.abs(stripped.fwd(p) - q)) < 1e-12


def test_invert_at_raises_when_stuck():
    # a map that is not locally invertible near the target
    def collapse(p):
        return np.stack([p[..., 0] ** 3, p[..., 1]], axis=-1)

    bad = MapDescriptor("collapse", collapse, None, None, symplectic=False)
    with pytest.raises((RuntimeError, np.linalg.LinAlgError)):
        invert_at(bad, np.array([1.0, 0.0]), x0=np.array([-1.0, 0.0]), max_iter=4)


def test_rotation_map_orthogonal():
    R = rotation_map(np.pi / 2)
    p = rng.normal(size=(10, 2))
    assert np.max(np.abs(R(R(R(R(p)))) - p)) < 1e-14
    assert np.max(np.abs(identity_map()(p) - p)) == 0.0


@settings(max_examples=50, deadline=None)
@given(
    a=st.floats(min_value=-2.0, max_value=2.0, allow_nan=False),
    x=st.floats(min_value=0.0, max_value=1.0, exclude_max=True),
    y=st.floats(min_value=0.0, max_value=1.0, exclude_max=True),
)
def test_standard_family_det_one_property(a, x, y):
    T = chirikov_map(a)
    J = T.jacobian(np.array([x, y]))
    assert abs(np.linalg.det(J) - 1.0) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(min_value=-0.05, max_value=0.05), min_size=1, max_size=6))
def test_shear_symplectic_property(coeffs):
    psi, dpsi = trig_psi(coeffs)
    S = shear_map(psi, dpsi)
    p = np.array([[0.1, 0.4], [0.7, -0.2], [1.3, 2.0]])
    assert np.max(np.abs(np.linalg.det(S.jacobian(p)) - 1.0)) < 1e-13

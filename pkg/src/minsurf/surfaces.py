"""Analytic reference patches and seeded perturbations.

All patches are sampled with exact first and second derivatives except the
perturbed ones, which are re-differentiated on the grid.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp

from .patch import SurfacePatch, patch_from_function

TWO_PI = 2 * np.pi


def _stack(*cols):
    return np.stack(np.broadcast_arrays(*cols), axis=-1)


def _ring_grid(resolution, v_range):
    nu, nv = resolution
    return np.linspace(0.0, TWO_PI, nu), np.linspace(*v_range, nv)


def sphere_cap(radius=1.0, center=(0.0, 0.0, 0.0), polar_range=(0.1, 1.2), resolution=(129, 33)):
    """Zone of a sphere between two polar angles, periodic in the azimuth.

    The pole itself is a coordinate singularity and is kept out of the grid.
    """
    c = np.asarray(center, dtype=float)
    R = float(radius)

    def f(u, v):
        su, cu, sv, cv = np.sin(u), np.cos(u), np.sin(v), np.cos(v)
        z = np.zeros_like(u * v)
        X = c + R * _stack(sv * cu, sv * su, cv + z)
        Xu = R * _stack(-sv * su, sv * cu, z)
        Xv = R * _stack(cv * cu, cv * su, -sv + z)
        Xuu = R * _stack(-sv * cu, -sv * su, z)
        Xuv = R * _stack(-cv * su, cv * cu, z)
        Xvv = R * _stack(-sv * cu, -sv * su, -cv + z)
        return X, Xu, Xv, Xuu, Xuv, Xvv

    u, v = _ring_grid(resolution, polar_range)
    return patch_from_function(f, u, v, periodic=True, topology="annulus")


def conformal_sphere(radius=1.0, center=(0.0, 0.0, 0.0), v_range=(-1.0, 1.0), resolution=(129, 33)):
    """Sphere zone in Mercator coordinates ``R (sech v cos u, sech v sin u, tanh v)``.

    The parametrization is isothermal (``E = G = R**2 sech(v)**2``), so the
    Hopf differential is defined and vanishes identically.
    """
    c = np.asarray(center, dtype=float)
    R = float(radius)

    def f(u, v):
        su, cu = np.sin(u), np.cos(u)
        s, t = 1 / np.cosh(v), np.tanh(v)
        z = np.zeros_like(u * v)
        X = c + R * _stack(s * cu, s * su, t + z)
        Xu = R * _stack(-s * su, s * cu, z)
        Xv = R * _stack(-s * t * cu, -s * t * su, s ** 2 + z)
        Xuu = R * _stack(-s * cu, -s * su, z)
        Xuv = R * _stack(s * t * su, -s * t * cu, z)
        w = s * (t ** 2 - s ** 2)
        Xvv = R * _stack(w * cu, w * su, -2 * s ** 2 * t + z)
        return X, Xu, Xv, Xuu, Xuv, Xvv

    u, v = _ring_grid(resolution, v_range)
    return patch_from_function(f, u, v, periodic=True, topology="annulus")


def standard_catenoid(waist=1.0, v_range=(-1.0, 1.0), resolution=(129, 33)):
    """``(a cosh v cos u, a cosh v sin u, a v)``; isothermal with ``Phi = -a``."""
    a = float(waist)

    def f(u, v):
        su, cu, sh, ch = np.sin(u), np.cos(u), np.sinh(v), np.cosh(v)
        z = np.zeros_like(u * v)
        X = a * _stack(ch * cu, ch * su, v + z)
        Xu = a * _stack(-ch * su, ch * cu, z)
        Xv = a * _stack(sh * cu, sh * su, 1.0 + z)
        Xuu = a * _stack(-ch * cu, -ch * su, z)
        Xuv = a * _stack(-sh * su, sh * cu, z)
        Xvv = a * _stack(ch * cu, ch * su, z)
        return X, Xu, Xv, Xuu, Xuv, Xvv

    u, v = _ring_grid(resolution, v_range)
    return patch_from_function(f, u, v, periodic=True, topology="annulus")


def plane_patch(u_range=(-1.0, 1.0), v_range=(-1.0, 1.0), resolution=(33, 33)):
    """The square ``z = 0`` as a disk-type patch."""

    def f(u, v):
        z = np.zeros_like(u * v)
        one = z + 1.0
        return _stack(u + z, v + z, z), _stack(one, z, z), _stack(z, one, z), \
            _stack(z, z, z), _stack(z, z, z), _stack(z, z, z)

    nu, nv = resolution
    return patch_from_function(f, np.linspace(*u_range, nu), np.linspace(*v_range, nv))


def flat_annulus(inner=1.0, outer=2.0, resolution=(129, 17)):
    """Planar ring ``r (cos u, sin u, 0)`` with ``r = v`` in ``[inner, outer]``."""

    def f(u, v):
        su, cu = np.sin(u), np.cos(u)
        z = np.zeros_like(u * v)
        return (_stack(v * cu, v * su, z), _stack(-v * su, v * cu, z), _stack(cu + z, su + z, z),
                _stack(-v * cu, -v * su, z), _stack(-su + z, cu + z, z), _stack(z, z, z))

    u, v = _ring_grid(resolution, (inner, outer))
    return patch_from_function(f, u, v, periodic=True, topology="annulus")


def cylinder(radius=1.0, v_range=(-1.0, 1.0), resolution=(129, 33)):
    """Round cylinder about the z-axis; constant nonzero H and no umbilics."""
    R = float(radius)

    def f(u, v):
        su, cu = np.sin(u), np.cos(u)
        z = np.zeros_like(u * v)
        return (_stack(R * cu, R * su, v + z), _stack(-R * su, R * cu, z), _stack(z, z, z + 1.0),
                _stack(-R * cu, -R * su, z), _stack(z, z, z), _stack(z, z, z))

    u, v = _ring_grid(resolution, v_range)
    return patch_from_function(f, u, v, periodic=True, topology="annulus")


def elliptic_frustum(a=2.0, b=1.0, v_range=(0.0, 1.0), resolution=(129, 17)):
    """Cone piece ``((1 + v) a cos u, (1 + v) b sin u, v)`` with elliptic level curves.

    Not minimal; used as a non-rotational patch whose ``v = 0`` edge is an
    ellipse in the plane ``z = 0``.
    """
    a, b = float(a), float(b)

    def f(u, v):
        su, cu = np.sin(u), np.cos(u)
        z = np.zeros_like(u * v)
        r = 1 + v + z
        return (_stack(r * a * cu, r * b * su, v + z), _stack(-r * a * su, r * b * cu, z),
                _stack(a * cu + z, b * su + z, z + 1.0), _stack(-r * a * cu, -r * b * su, z),
                _stack(-a * su + z, b * cu + z, z), _stack(z, z, z))

    u, v = _ring_grid(resolution, v_range)
    return patch_from_function(f, u, v, periodic=True, topology="annulus")


def unduloid(mean_curvature=0.5, neck=0.6, length=3.0, resolution=(129, 65)):
    """Rotational constant-mean-curvature patch integrated from its profile.

    The meridian ``(r(s), z(s))`` is parametrized by arc length with tangent
    angle ``psi`` and ``psi' = 2H - sin(psi)/r``, starting at the neck
    ``r = neck`` with a vertical tangent.  Derivatives of the patch are formed
    from the ODE state, so H is constant up to the integration tolerance.
    """
    H = float(mean_curvature)

    def rhs(_s, y):
        r, _z, psi = y
        return [np.cos(psi), np.sin(psi), 2 * H - np.sin(psi) / r]

    nu, nv = resolution
    s = np.linspace(0.0, float(length), nv)
    sol = solve_ivp(rhs, (0.0, s[-1]), [float(neck), 0.0, np.pi / 2], t_eval=s,
                    method="DOP853", rtol=1e-13, atol=1e-14)
    if not sol.success or np.any(sol.y[0] <= 0):
        raise ValueError("profile integration failed or reached the axis")
    r, zz, psi = sol.y
    dpsi = 2 * H - np.sin(psi) / r
    u = np.linspace(0.0, TWO_PI, nu)
    cu, su = np.cos(u)[None, :], np.sin(u)[None, :]
    R, Z, P, D = (a[:, None] for a in (r, zz, psi, dpsi))
    z0 = np.zeros((nv, nu))
    cp, sp = np.cos(P), np.sin(P)
    X = _stack(R * cu, R * su, Z + z0)
    Xu = _stack(-R * su, R * cu, z0)
    Xv = _stack(cp * cu, cp * su, sp + z0)
    Xuu = _stack(-R * cu, -R * su, z0)
    Xuv = _stack(-cp * su, cp * cu, z0)
    Xvv = _stack(-D * sp * cu, -D * sp * su, D * cp + z0)
    return SurfacePatch(u, s, X, Xu, Xv, Xuu, Xuv, Xvv, periodic=True, topology="annulus")


def normal_perturbation(patch: SurfacePatch, amplitude, seed=0, modes=4) -> SurfacePatch:
    """Displace ``patch`` along its normal by a smooth seeded field of peak ``amplitude``.

    The field is a sum of ``modes`` products of low trigonometric modes in u
    (integer frequencies, so periodic seams stay closed) and in v, with
    coefficients drawn from ``numpy.random.default_rng(seed)``.  Derivatives
    of the result are recomputed on the grid.
    """
    rng = np.random.default_rng(seed)
    u, v = patch.u, patch.v
    tu = (u - u[0]) / (u[-1] - u[0]) * TWO_PI
    tv = (v - v[0]) / (v[-1] - v[0]) * np.pi
    field = np.zeros(patch.shape)
    for _ in range(modes):
        m, l = rng.integers(1, 4, size=2)
        phase_u, phase_v = rng.uniform(0, TWO_PI, size=2)
        field += rng.normal() * np.outer(np.cos(l * tv + phase_v), np.cos(m * tu + phase_u))
    peak = float(np.max(np.abs(field)))
    if peak == 0.0:
        return patch.with_positions(patch.X.copy())
    field *= float(amplitude) / peak
    return patch.with_positions(patch.X + field[..., None] * patch.normal)

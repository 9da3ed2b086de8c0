"""Minimal surfaces through a curve with prescribed unit normal.

Given a real-analytic curve ``c`` and a unit normal field ``n`` along it,

    X(z) = Re( c(z) - i * integral_0^z n(w) x c'(w) dw ),   z = u + iv,

is the unique minimal immersion with ``X(t, 0) = c(t)`` and surface normal
``n(t)`` along the curve.  With ``c`` and ``n`` trigonometric polynomials the
integral is computed term-wise, so positions and all derivatives are exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .patch import ANALYTIC, SurfacePatch, cloud_diameter
from .series import TrigSeries3, cross, differentiate, evaluate, integrate_from_zero

DEFAULT_RESOLUTION = (256, 64)


class BjorlingInputError(ValueError):
    """Curve/normal data violating the Björling hypotheses."""


class DegenerateMetricError(ValueError):
    """The first fundamental form is singular somewhere on the patch."""


@dataclass(frozen=True)
class BjorlingInput:
    curve: TrigSeries3
    normal: TrigSeries3
    a: float = 0.0
    b: float = 2 * np.pi
    epsilon: float = 1.0
    v_range: Optional[Tuple[float, float]] = None
    resolution: Tuple[int, int] = DEFAULT_RESOLUTION

    @property
    def v_bounds(self):
        if self.v_range is not None:
            return tuple(float(x) for x in self.v_range)
        return (-float(self.epsilon), float(self.epsilon))

    def validate(self, samples=512, tol=1e-10):
        """Check unit length and orthogonality of the normal on ``samples`` points."""
        if not self.b > self.a:
            raise BjorlingInputError(f"empty parameter interval [{self.a}, {self.b}]")
        lo, hi = self.v_bounds
        if not hi > lo:
            raise BjorlingInputError(f"empty v-range [{lo}, {hi}]")
        if self.epsilon <= 0:
            raise BjorlingInputError("strip half-width epsilon must be positive")
        if max(abs(lo), abs(hi)) > self.epsilon + 1e-15:
            raise BjorlingInputError(f"v-range [{lo}, {hi}] leaves the strip |v| <= {self.epsilon}")
        nu, nv = self.resolution
        if nu < 2 or nv < 2:
            raise BjorlingInputError(f"resolution must be at least 2x2, got {nu}x{nv}")
        t = np.linspace(self.a, self.b, samples)
        n = evaluate(self.normal, t)
        dc = evaluate(differentiate(self.curve), t)
        speed = np.linalg.norm(dc, axis=-1)
        k = int(np.argmin(speed))
        if speed[k] == 0.0:
            raise BjorlingInputError(f"curve is singular (c' = 0) at t = {t[k]:.6g}")
        unit_err = np.abs(np.linalg.norm(n, axis=-1) - 1.0)
        k = int(np.argmax(unit_err))
        if unit_err[k] > tol:
            raise BjorlingInputError(
                f"normal is not unit length at t = {t[k]:.6g} (| |n| - 1 | = {unit_err[k]:.3e})"
            )
        perp_err = np.abs(np.einsum("ij,ij->i", n, dc)) / speed
        k = int(np.argmax(perp_err))
        if perp_err[k] > tol:
            raise BjorlingInputError(
                f"normal is not perpendicular to the tangent at t = {t[k]:.6g} "
                f"(|n . T| = {perp_err[k]:.3e})"
            )


@dataclass(frozen=True)
class BjorlingSurface:
    """Closed-form surface ``X = Re(F(z))`` with ``F = c - i I``, ``I = int_0^z n x c'``."""

    curve: TrigSeries3
    integral: TrigSeries3
    _d: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        dc, di = differentiate(self.curve), differentiate(self.integral)
        object.__setattr__(self, "_d", (dc, di, differentiate(dc), differentiate(di)))

    @classmethod
    def from_data(cls, curve: TrigSeries3, normal: TrigSeries3) -> "BjorlingSurface":
        return cls(curve, integrate_from_zero(cross(normal, differentiate(curve))))

    def holomorphic(self, z, order=0):
        """``F^(order)(z)`` for order 0, 1 or 2."""
        if order == 0:
            c, i = self.curve, self.integral
        else:
            c, i = self._d[2 * order - 2], self._d[2 * order - 1]
        return evaluate(c, z) - 1j * evaluate(i, z)

    def __call__(self, u, v):
        """Positions and first derivatives; the patch evaluator protocol."""
        z = np.asarray(u) + 1j * np.asarray(v)
        F = self.holomorphic(z)
        F1 = self.holomorphic(z, 1)
        return F.real, F1.real, -F1.imag

    def derivatives(self, u, v):
        """``(X, Xu, Xv, Xuu, Xuv, Xvv)`` by complex differentiation."""
        z = np.asarray(u) + 1j * np.asarray(v)
        F = self.holomorphic(z)
        F1 = self.holomorphic(z, 1)
        F2 = self.holomorphic(z, 2)
        return F.real, F1.real, -F1.imag, F2.real, -F2.imag, -F2.real


def solve(inp: BjorlingInput, validate=True) -> SurfacePatch:
    """Sample the Björling surface of ``inp`` on its grid.

    The returned patch carries the closed form as its evaluator, so
    :meth:`SurfacePatch.evaluate` is exact off-grid.  A ``2*pi``-periodic
    input on ``[a, a + 2*pi]`` yields an annulus with a duplicated seam.
    """
    if validate:
        inp.validate()
    surface = BjorlingSurface.from_data(inp.curve, inp.normal)
    nu, nv = inp.resolution
    u = np.linspace(inp.a, inp.b, nu)
    v = np.linspace(*inp.v_bounds, nv)
    U, V = np.meshgrid(u, v)
    parts = surface.derivatives(U, V)
    periodic = False
    if np.isclose(inp.b - inp.a, 2 * np.pi, rtol=0, atol=1e-12):
        seam = np.max(np.linalg.norm(parts[0][:, 0] - parts[0][:, -1], axis=-1))
        periodic = bool(seam < 1e-10 * max(1.0, cloud_diameter(parts[0])))
    patch = SurfacePatch(
        u, v, *parts,
        provenance=ANALYTIC,
        periodic=periodic,
        topology="annulus" if periodic else "disk",
        evaluator=surface,
    )
    object.__setattr__(patch, "surface", surface)
    return patch


def mean_curvature_audit(patch: SurfacePatch):
    """Mean curvature over the grid and its maximum absolute value.

    Raises:
        DegenerateMetricError: if ``EG - F**2 <= 0`` at some sample.
    """
    from .diffgeo import fundamental_forms, DegenerateImmersionError

    try:
        forms = fundamental_forms(patch)
    except DegenerateImmersionError as exc:
        raise DegenerateMetricError(str(exc)) from exc
    return forms.H, float(np.max(np.abs(forms.H)))


# -- standard inputs ------------------------------------------------------

def circle_with_contact_angle(theta: float, **kw) -> BjorlingInput:
    """Unit circle in ``z = 0`` with normal ``(sin th cos t, sin th sin t, cos th)``.

    The normal makes the constant angle ``theta`` with the plane normal
    ``(0, 0, 1)``; the solution is a catenoid with waist ``sin(theta)``.
    """
    s, c = np.sin(theta), np.cos(theta)
    curve = TrigSeries3([[0, 0, 0], [1, 0, 0]], [[0, 0, 0], [0, 1, 0]])
    normal = TrigSeries3([[0, 0, c], [s, 0, 0]], [[0, 0, 0], [0, s, 0]])
    return BjorlingInput(curve, normal, **kw)


def helicoid_axis_input(**kw) -> BjorlingInput:
    """Vertical axis ``(0, 0, t)`` with the rotating normal ``(cos t, sin t, 0)``."""
    curve = TrigSeries3(np.zeros((1, 3)), np.zeros((1, 3)), [0, 0, 1])
    normal = TrigSeries3([[0, 0, 0], [1, 0, 0]], [[0, 0, 0], [0, 1, 0]])
    return BjorlingInput(curve, normal, **kw)


def twisted_circle_input(**kw) -> BjorlingInput:
    """Unit circle with a normal that turns once about the tangent.

    ``n(t) = cos(t) e_z + sin(t) r(t)`` with ``r`` the radial direction; the
    resulting minimal surface is not rotational and its Hopf differential is
    not constant.
    """
    curve = TrigSeries3([[0, 0, 0], [1, 0, 0]], [[0, 0, 0], [0, 1, 0]])
    # sin t cos t = sin 2t / 2, sin^2 t = (1 - cos 2t) / 2
    normal = TrigSeries3(
        [[0, 0.5, 0], [0, 0, 1], [0, -0.5, 0]],
        [[0, 0, 0], [0, 0, 0], [0.5, 0, 0]],
    )
    return BjorlingInput(curve, normal, **kw)


def catenoid_closed_form(theta, u, v):
    """Positions of the Björling catenoid for contact angle ``theta``.

    ``((cosh v - cos th sinh v) cos u, (cosh v - cos th sinh v) sin u, sin th v)``,
    obtained by evaluating the integral term-wise by hand.
    """
    rho = np.cosh(v) - np.cos(theta) * np.sinh(v)
    return np.stack([rho * np.cos(u), rho * np.sin(u), np.sin(theta) * v * np.ones_like(u)], axis=-1)

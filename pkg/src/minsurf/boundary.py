"""Boundary curves of a patch: contact angles, conormal flux, curvatures.

Conventions
-----------
* The contact angle is the angle between the surface unit normal and the
  plane's unit normal, in ``(0, pi)``.  Reversing the surface orientation maps
  ``theta -> pi - theta``.  It is not the dihedral angle between tangent planes.
* The outward conormal is ``-X_v`` (made orthogonal to the edge tangent and
  normalized) on ``v_min`` and ``+X_v`` on ``v_max``; likewise with ``X_u`` on
  the u-edges.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .patch import SurfacePatch, cloud_diameter


class BoundaryError(ValueError):
    pass


class BoundaryNotPlanarError(BoundaryError):
    pass


class DegenerateContactError(BoundaryError):
    """Contact angle at 0 or pi: the surface is tangent to the plane."""


class OpenBoundaryError(BoundaryError):
    pass


@dataclass(frozen=True)
class PlaneSpec:
    """Plane ``{x : normal . x = offset}``."""

    normal: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float).reshape(3)
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise ValueError(f"plane normal must be a unit vector, |n| = {np.linalg.norm(n)!r}")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def through(cls, point, normal) -> "PlaneSpec":
        n = np.asarray(normal, dtype=float)
        n = n / np.linalg.norm(n)
        return cls(n, float(n @ np.asarray(point, dtype=float)))

    def distance(self, points):
        return np.asarray(points) @ self.normal - self.offset

    def to_dict(self):
        return {"normal": [float(x) for x in self.normal], "offset": self.offset}


def fit_plane(points) -> PlaneSpec:
    """Least-squares plane through ``points`` (smallest singular direction)."""
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    c = p.mean(axis=0)
    _, _, vt = np.linalg.svd(p - c)
    n = vt[-1]
    k = int(np.argmax(np.abs(n)))
    if n[k] < 0:
        n = -n
    return PlaneSpec.through(c, n)


@dataclass(frozen=True, eq=False)
class EdgeData:
    name: str
    param: np.ndarray
    X: np.ndarray
    Xt: np.ndarray
    Xtt: np.ndarray
    Xn: np.ndarray
    normal: np.ndarray
    closed: bool
    outward: float

    @property
    def speed(self):
        return np.linalg.norm(self.Xt, axis=-1)

    @property
    def tangent(self):
        return self.Xt / self.speed[:, None]

    def unique(self, a):
        """Drop the duplicated seam sample on closed edges."""
        return a[:-1] if self.closed else a


def edge_data(patch: SurfacePatch, edge: str) -> EdgeData:
    sel = patch.edge(edge)
    n = patch.normal[sel]
    if edge in ("v_min", "v_max"):
        param, Xt, Xtt, Xn = patch.u, patch.Xu[sel], patch.Xuu[sel], patch.Xv[sel]
    else:
        param, Xt, Xtt, Xn = patch.v, patch.Xv[sel], patch.Xvv[sel], patch.Xu[sel]
    outward = -1.0 if edge.endswith("min") else 1.0
    return EdgeData(edge, param, patch.X[sel], Xt, Xtt, Xn, n, patch.edge_is_closed(edge), outward)


def _periodic_weights(param):
    h = np.diff(param)
    return 0.5 * (h + np.roll(h, 1))


@dataclass(frozen=True, eq=False)
class ContactAngle:
    angles: np.ndarray
    mean: float
    max_deviation: float
    plane: PlaneSpec


def contact_angle(patch: SurfacePatch, edge: str, plane: PlaneSpec,
                  planar_tol=1e-8, tangency_tol=1e-6) -> ContactAngle:
    """Angle between surface normal and plane normal along an edge.

    Raises:
        BoundaryNotPlanarError: edge leaves the plane by more than ``planar_tol * diameter``.
        DegenerateContactError: some angle lies within ``tangency_tol`` of 0 or pi.
    """
    e = edge_data(patch, edge)
    scale = max(patch.diameter, 1e-300)
    dist = np.abs(plane.distance(e.X))
    if dist.max() > planar_tol * scale:
        raise BoundaryNotPlanarError(
            f"edge {edge} is not in the plane: max distance {dist.max():.3e}"
        )
    cosang = np.clip(e.normal @ plane.normal, -1.0, 1.0)
    angles = np.arccos(cosang)
    near = np.minimum(angles, np.pi - angles)
    if near.min() < tangency_tol:
        raise DegenerateContactError(
            f"contact angle {angles[np.argmin(near)]:.3e} on edge {edge}: surface tangent to the "
            "plane (theta must differ from 0 and pi)"
        )
    a = e.unique(angles)
    mean = float(a.mean())
    return ContactAngle(angles, mean, float(np.max(np.abs(a - mean))), plane)


def conormals(patch: SurfacePatch, edge: str):
    """Outward unit conormal along an edge, shape ``(n, 3)``."""
    e = edge_data(patch, edge)
    T = e.tangent
    w = e.Xn - np.einsum("ij,ij->i", e.Xn, T)[:, None] * T
    nu = e.outward * w / np.linalg.norm(w, axis=-1, keepdims=True)
    sel_in = patch.edge(edge)
    inner = _inner_neighbour(patch, edge)
    if np.mean(np.einsum("ij,ij->i", nu, inner - patch.X[sel_in]) < 0) < 0.5:
        raise BoundaryError(f"conormal on edge {edge} does not point away from the patch")
    return nu


def _inner_neighbour(patch, edge):
    return {"v_min": patch.X[1, :], "v_max": patch.X[-2, :],
            "u_min": patch.X[:, 1], "u_max": patch.X[:, -2]}[edge]


def conormal_flux(patch: SurfacePatch, edge: str, allow_open=False, nodes=64):
    """``integral of nu ds`` over an edge.

    Closed (periodic) edges use the trapezoid rule, which converges
    spectrally.  Open edges raise unless ``allow_open`` and the patch has an
    exact evaluator, in which case Gauss-Legendre nodes are used.
    """
    e = edge_data(patch, edge)
    if e.closed:
        nu = conormals(patch, edge)
        w = _periodic_weights(e.param) * e.speed[:-1]
        return (nu[:-1] * w[:, None]).sum(axis=0)
    if not allow_open:
        raise OpenBoundaryError(f"edge {edge} is not a closed boundary component")
    if patch.evaluator is None:
        raise OpenBoundaryError("open-edge quadrature needs an exact evaluator")
    x, wq = np.polynomial.legendre.leggauss(nodes)
    lo, hi = e.param[0], e.param[-1]
    t = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    fixed = {"v_min": patch.v[0], "v_max": patch.v[-1], "u_min": patch.u[0], "u_max": patch.u[-1]}[edge]
    if edge in ("v_min", "v_max"):
        _, Xt, Xn = patch.evaluate(t, np.full_like(t, fixed))
    else:
        _, Xn, Xt = patch.evaluate(np.full_like(t, fixed), t)
    speed = np.linalg.norm(Xt, axis=-1)
    T = Xt / speed[:, None]
    w = Xn - np.einsum("ij,ij->i", Xn, T)[:, None] * T
    nu = e.outward * w / np.linalg.norm(w, axis=-1, keepdims=True)
    return 0.5 * (hi - lo) * (nu * (wq * speed)[:, None]).sum(axis=0)


def _line_angle(a, b):
    # angle between the lines spanned by a and b, in [0, pi/2]
    c = abs(float(a @ b)) / (np.linalg.norm(a) * np.linalg.norm(b))
    s = np.linalg.norm(np.cross(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b))
    return float(np.arctan2(s, c))


@dataclass
class FluxGeometry:
    perpendicularity: List[float]
    inconclusive: List[bool]
    parallel_angle: Optional[float]
    closure: Optional[float]
    tol: float

    @property
    def perpendicular(self) -> bool:
        return all(a < self.tol and not bad for a, bad in zip(self.perpendicularity, self.inconclusive))

    @property
    def parallel(self) -> Optional[bool]:
        return None if self.parallel_angle is None else self.parallel_angle < self.tol

    def to_dict(self):
        return {
            "perpendicularity_rad": self.perpendicularity,
            "inconclusive": self.inconclusive,
            "plane_angle_rad": self.parallel_angle,
            "closure": self.closure,
            "tolerance_rad": self.tol,
        }


def flux_geometry_check(fluxes: Sequence, planes: Sequence[PlaneSpec], tol=1e-8, scale=1.0) -> FluxGeometry:
    """Flux-versus-plane geometry for one or two boundary components.

    Reports, per boundary, the angle between the flux vector and the plane
    normal; for two boundaries, the angle between the plane normals and the
    closure defect ``|flux_1 + flux_2|``.
    """
    if len(fluxes) != len(planes) or not fluxes:
        raise ValueError("need one plane per flux vector")
    angles, bad = [], []
    for f, p in zip(fluxes, planes):
        f = np.asarray(f, dtype=float)
        if np.linalg.norm(f) < 1e-12 * scale:
            angles.append(float("nan"))
            bad.append(True)
        else:
            angles.append(_line_angle(f, p.normal))
            bad.append(False)
    parallel = closure = None
    if len(fluxes) >= 2:
        parallel = _line_angle(planes[0].normal, planes[1].normal)
        closure = float(np.linalg.norm(np.sum(np.asarray(fluxes, dtype=float), axis=0)))
    return FluxGeometry(angles, bad, parallel, closure, tol)


@dataclass(eq=False)
class BoundaryReport:
    edge: str
    plane: PlaneSpec
    theta: np.ndarray
    theta_mean: float
    theta_deviation: float
    conormal: np.ndarray
    flux: Optional[np.ndarray]
    planar_curvature: np.ndarray
    normal_curvature: np.ndarray
    space_curvature: np.ndarray
    ds: np.ndarray
    closed: bool
    orientation: float = 1.0

    @property
    def total_curvature(self) -> float:
        """``integral of |curvature vector| ds`` over this component."""
        n = len(self.ds)
        return float(np.sum(self.space_curvature[:n] * self.ds))

    def summary(self):
        rel = curvature_relation_check(self)
        return {
            "edge": self.edge,
            "plane": self.plane.to_dict(),
            "closed": self.closed,
            "theta_mean_rad": self.theta_mean,
            "theta_max_deviation_rad": self.theta_deviation,
            "flux": None if self.flux is None else [float(x) for x in self.flux],
            "planar_curvature_min": float(np.min(self.planar_curvature)),
            "planar_curvature_max": float(np.max(self.planar_curvature)),
            "total_curvature_rad": self.total_curvature if self.closed else None,
            "curvature_relation_residual": rel.max_residual,
            "convex": rel.convex,
            "strictly_convex": rel.strictly_convex,
        }


def boundary_report(patch: SurfacePatch, edge: str, plane: Optional[PlaneSpec] = None,
                    planar_tol=1e-8, tangency_tol=1e-6) -> BoundaryReport:
    """Collect contact angle, conormal flux and curvatures of one edge.

    When ``plane`` is omitted the least-squares plane of the edge is used.
    """
    e = edge_data(patch, edge)
    if plane is None:
        plane = fit_plane(e.unique(e.X))
    ca = contact_angle(patch, edge, plane, planar_tol, tangency_tol)
    nu = conormals(patch, edge)
    flux = conormal_flux(patch, edge) if e.closed else None
    speed = e.speed
    if speed.min() <= 1e-12 * max(speed.max(), 1e-300):
        raise BoundaryError(f"edge {edge} has a corner or cusp (vanishing tangent)")
    P = plane.normal
    g1 = e.Xt - np.outer(e.Xt @ P, P)
    g2 = e.Xtt - np.outer(e.Xtt @ P, P)
    kt = np.cross(g1, g2) @ P / np.linalg.norm(g1, axis=-1) ** 3
    kn = np.einsum("ij,ij->i", e.Xtt, e.normal) / speed ** 2
    left = np.cross(P, e.tangent)
    orientation = 1.0 if np.mean(np.einsum("ij,ij->i", left, e.normal)) >= 0 else -1.0
    ks = np.linalg.norm(np.cross(e.Xt, e.Xtt), axis=-1) / speed ** 3
    if e.closed:
        ds = _periodic_weights(e.param) * speed[:-1]
    else:
        h = np.diff(e.param)
        w = np.zeros_like(e.param)
        w[:-1] += h / 2
        w[1:] += h / 2
        ds = w * speed
    return BoundaryReport(edge, plane, ca.angles, ca.mean, ca.max_deviation, nu, flux,
                          kt, kn, ks, ds, e.closed, orientation)


@dataclass(frozen=True)
class CurvatureRelation:
    max_residual: float
    orientation: float
    has_zeros: bool
    sign_changes: int
    convex: bool
    strictly_convex: bool


def curvature_relation_check(report: BoundaryReport, zero_tol=1e-8) -> CurvatureRelation:
    """Max of ``|kappa - s * kappa_tilde * sin(theta)|`` along the edge.

    ``kappa`` is the normal curvature of the edge in the surface and
    ``kappa_tilde`` its signed curvature in the plane.  ``s = +-1`` is the
    sign of the surface normal's component along the in-plane left normal of
    the curve; it is constant when ``theta`` stays away from 0 and pi.
    """
    kt, kn, th = report.planar_curvature, report.normal_curvature, report.theta
    s = report.orientation
    res = float(np.max(np.abs(kn - s * kt * np.sin(th))))
    ku = kt[:-1] if report.closed else kt
    scale = max(float(np.max(np.abs(ku))), 1e-300)
    zeros = bool(np.min(np.abs(ku)) < zero_tol * scale)
    signs = np.sign(ku[np.abs(ku) >= zero_tol * scale])
    seq = np.append(signs, signs[:1]) if report.closed else signs
    changes = int(np.count_nonzero(np.diff(seq) != 0))
    return CurvatureRelation(res, s, zeros, changes, changes == 0, changes == 0 and not zeros)


def total_boundary_curvature(reports: Sequence[BoundaryReport]) -> float:
    """Sum over closed components of ``integral |kappa vector| ds``."""
    for r in reports:
        if not r.closed:
            raise OpenBoundaryError(f"edge {r.edge} is open; total curvature needs closed components")
    return float(sum(r.total_curvature for r in reports))


def patch_scale(patch: SurfacePatch) -> float:
    return cloud_diameter(patch.X)

"""Decide whether a patch is a piece of a catenoid or of a sphere.

The catenoid pipeline runs the checks in the order the classification
argument uses them: constant contact angles and the flux/plane geometry,
then convexity and the umbilic index balance, then reflection symmetry in
two directions, and finally a least-squares catenoid fit and a foliation
test with the fitted axis.  Every stage runs even after an earlier failure
so that a rejection lists all the stages that failed.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.spatial import cKDTree

from . import boundary as bd
from .diffgeo import (
    find_umbilics,
    fundamental_forms,
    hopf_differential,
    poincare_hopf_check,
)
from .patch import SurfacePatch, cloud_diameter

log = logging.getLogger(__name__)


class FitError(ValueError):
    pass


class DegenerateWaistError(FitError):
    pass


class LevelSetError(ValueError):
    """Axial level sets are not grid lines of the patch."""


class ProbeError(ValueError):
    pass


@dataclass(frozen=True)
class Tolerances:
    """Thresholds of the certification pipeline.

    Lengths are relative to the patch diameter and angles are in radians.
    They are engineering choices; the classification results come with no
    quantitative stability statement.
    """

    planar: float = 1e-8
    tangency: float = 1e-6
    angle_constancy: float = 1e-6
    perpendicularity: float = 1e-6
    parallel: float = 1e-6
    closure: float = 1e-6
    line_of_curvature: float = 1e-6
    curvature_relation: float = 1e-6
    total_curvature: float = 1e-6
    symmetry: float = 1e-6
    fit: float = 1e-6
    axis_flux: float = 1e-6
    foliation: float = 1e-10
    minimal: float = 1e-8
    cmc_spread: float = 1e-6
    umbilic: float = 1e-6
    sphere_fit: float = 1e-6

    def __post_init__(self):
        for k, v in asdict(self).items():
            if not (isinstance(v, (int, float)) and v > 0):
                raise ValueError(f"tolerance {k} must be positive, got {v!r}")


# -- models -----------------------------------------------------------------

@dataclass(frozen=True)
class CatenoidModel:
    """``rho = a cosh((h - z0) / a)`` about the line ``point + s * axis``."""

    axis: np.ndarray
    point: np.ndarray
    waist: float
    offset: float = 0.0

    def __post_init__(self):
        ax = np.asarray(self.axis, dtype=float)
        if abs(np.linalg.norm(ax) - 1) > 1e-12:
            raise ValueError("catenoid axis must be a unit vector")
        if not self.waist > 0:
            raise ValueError("catenoid waist must be positive")
        object.__setattr__(self, "axis", ax)
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float))

    def cylindrical(self, points):
        y = np.asarray(points, dtype=float) - self.point
        h = y @ self.axis
        rho = np.linalg.norm(y - h[:, None] * self.axis, axis=-1)
        return rho, h

    def residuals(self, points):
        rho, h = self.cylindrical(points)
        return rho - self.waist * np.cosh((h - self.offset) / self.waist)

    def sample(self, angles, heights):
        """Exact points at the given angles and axial heights."""
        e1, e2 = orthonormal_frame(self.axis)
        angles, heights = np.broadcast_arrays(np.asarray(angles, float), np.asarray(heights, float))
        r = self.waist * np.cosh((heights - self.offset) / self.waist)
        return (self.point + heights[..., None] * self.axis
                + r[..., None] * (np.cos(angles)[..., None] * e1 + np.sin(angles)[..., None] * e2))

    def to_dict(self):
        return {"axis": [float(x) for x in self.axis], "point": [float(x) for x in self.point],
                "waist": float(self.waist), "offset": float(self.offset)}


@dataclass(frozen=True)
class SphereModel:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("sphere radius must be positive")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))

    def residuals(self, points):
        return np.linalg.norm(np.asarray(points) - self.center, axis=-1) - self.radius

    def to_dict(self):
        return {"center": [float(x) for x in self.center], "radius": float(self.radius)}


@dataclass
class StageResult:
    passed: bool
    details: Dict = field(default_factory=dict)
    error: Optional[str] = None

    def to_dict(self):
        out = {"passed": bool(self.passed), "details": self.details}
        if self.error:
            out["error"] = self.error
        return out


@dataclass
class CertificationVerdict:
    kind: str
    model: Optional[object]
    rms: float
    relative_rms: float
    stages: Dict[str, StageResult]
    threshold: float

    @property
    def accepted(self) -> bool:
        return self.kind != "rejected"

    @property
    def failed_stages(self) -> List[str]:
        return [k for k, s in self.stages.items() if not s.passed]

    @property
    def failing_stage(self) -> Optional[str]:
        failed = self.failed_stages
        return failed[0] if failed else None

    def to_dict(self):
        return {
            "kind": self.kind,
            "model": None if self.model is None else self.model.to_dict(),
            "rms_residual": self.rms,
            "relative_rms_residual": self.relative_rms,
            "threshold_relative": self.threshold,
            "failing_stage": self.failing_stage,
            "stages": {k: s.to_dict() for k, s in self.stages.items()},
        }


def orthonormal_frame(axis):
    """Two unit vectors completing ``axis`` to a right-handed frame."""
    axis = np.asarray(axis, dtype=float)
    k = int(np.argmin(np.abs(axis)))
    helper = np.zeros(3)
    helper[k] = 1.0
    e1 = np.cross(axis, helper)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(axis, e1)


def _angle_between_lines(a, b):
    return bd._line_angle(np.asarray(a, float), np.asarray(b, float))


# -- fitting ----------------------------------------------------------------

@dataclass
class CatenoidFit:
    model: CatenoidModel
    rms: float
    relative_rms: float
    iterations: int
    converged: bool
    trace: List[float]


def _pca_axis(points):
    c = points.mean(axis=0)
    w, vecs = np.linalg.eigh(np.cov((points - c).T))
    # the symmetry axis is the eigenvector whose eigenvalue stands apart
    gaps = [min(abs(w[i] - w[j]) for j in range(3) if j != i) for i in range(3)]
    return vecs[:, int(np.argmax(gaps))]


def _orient(axis, ref=None):
    if ref is not None:
        return axis if axis @ ref >= 0 else -axis
    k = int(np.argmax(np.abs(axis)))
    return axis if axis[k] >= 0 else -axis


def _canonical(axis, point, offset, centroid):
    # move the axis point onto the plane through the centroid orthogonal to the axis
    tau = (point - centroid) @ axis
    return point - tau * axis, offset + tau


def fit_catenoid(samples, init: Optional[CatenoidModel] = None, axis_hint=None,
                 max_iter=200, step_tol=1e-12, a_min_rel=1e-8) -> CatenoidFit:
    """Least-squares catenoid through a point cloud.

    Minimizes ``sum (rho_i - a cosh((h_i - z0)/a))**2`` over the axis
    direction (two angles in a chart re-centred on the current axis each
    iteration), the axis point (restricted to the plane through the centroid
    orthogonal to the axis), the waist ``a`` and the offset ``z0``, by
    Levenberg-Marquardt with damping 1e-3, x10 on failure and /10 on success.

    Without ``init``, the axis starts from ``axis_hint`` (e.g. a boundary flux
    vector) or from the principal axis of the cloud that is set apart from
    the other two.

    Raises:
        FitError: fewer than 50 samples, or a single axial level.
        DegenerateWaistError: the waist is driven below ``a_min_rel * diameter``.
    """
    X = np.asarray(samples, dtype=float).reshape(-1, 3)
    if len(X) < 50:
        raise FitError(f"need at least 50 samples, got {len(X)}")
    diam = cloud_diameter(X)
    centroid = X.mean(axis=0)
    a_min = a_min_rel * diam

    if init is not None:
        d = init.axis / np.linalg.norm(init.axis)
        p, z0 = _canonical(d, init.point, init.offset, centroid)
        a = init.waist
        ref = d
    else:
        ref = None if axis_hint is None else np.asarray(axis_hint, float) / np.linalg.norm(axis_hint)
        d = ref if ref is not None else _pca_axis(X)
        d = _orient(d, ref)
        p = centroid.copy()
        y = X - p
        h = y @ d
        rho = np.linalg.norm(y - h[:, None] * d, axis=-1)
        k = int(np.argmin(rho))
        a, z0 = max(float(rho[k]), 10 * a_min), float(h[k])
    h = (X - p) @ d
    if np.ptp(h) < 1e-9 * diam:
        raise FitError("samples span a single axial level; a catenoid fit is undetermined")

    def residual(d, p, a, z0):
        y = X - p
        h = y @ d
        q = y - h[:, None] * d
        rho = np.linalg.norm(q, axis=-1)
        zeta = np.clip((h - z0) / a, -700, 700)
        return rho - a * np.cosh(zeta), y, h, q, rho, zeta

    # overflow in cosh on wild trial steps is rejected by the cost test below
    with np.errstate(over="ignore", invalid="ignore"):
        lam = 1e-3
        r, y, h, q, rho, zeta = residual(d, p, a, z0)
        cost = float(r @ r)
        trace = [cost]
        converged = False
        it = 0
        for it in range(1, max_iter + 1):
            e1, e2 = orthonormal_frame(d)
            safe = np.where(rho > 0, rho, 1.0)
            qe1, qe2 = q @ e1, q @ e2
            sh, ch = np.sinh(zeta), np.cosh(zeta)
            J = np.column_stack([
                -h * qe1 / safe - sh * qe1,
                -h * qe2 / safe - sh * qe2,
                -qe1 / safe,
                -qe2 / safe,
                -(ch - zeta * sh),
                sh,
            ])
            A = J.T @ J
            g = J.T @ r
            if not np.all(np.isfinite(A)):
                raise FitError("non-finite Jacobian during catenoid fit")
            accepted = False
            while lam < 1e20:
                step = np.linalg.solve(A + lam * np.diag(np.maximum(np.diag(A), 1e-30)), -g)
                dn = d + step[0] * e1 + step[1] * e2
                dn /= np.linalg.norm(dn)
                pn = p + step[2] * e1 + step[3] * e2
                an, z0n = a + step[4], z0 + step[5]
                if an <= 0:
                    lam *= 10
                    continue
                pn, z0n = _canonical(dn, pn, z0n, centroid)
                rn, *rest = residual(dn, pn, an, z0n)
                cn = float(rn @ rn)
                if np.isfinite(cn) and cn <= cost:
                    accepted = True
                    break
                lam *= 10
            if not accepted:
                converged = True  # no descent direction left at machine precision
                break
            d, p, a, z0 = dn, pn, an, z0n
            r, (y, h, q, rho, zeta) = rn, rest
            rel_step = np.linalg.norm(step) / (np.linalg.norm([1.0, 1.0, *p, a, z0]) + 1e-300)
            cost = cn
            trace.append(cost)
            lam = max(lam / 10, 1e-15)
            if a < a_min:
                raise DegenerateWaistError(f"waist {a:.3e} fell below {a_min:.3e}")
            if rel_step < step_tol or cost == 0.0:
                converged = True
                break
    oriented = _orient(d, ref)
    if oriented @ d < 0:
        d, z0 = oriented, -z0
    p, z0 = _canonical(d, p, z0, centroid)
    model = CatenoidModel(d / np.linalg.norm(d), p, float(a), float(z0))
    res = model.residuals(X)
    rms = float(np.sqrt(np.mean(res ** 2)))
    return CatenoidFit(model, rms, rms / diam, it, converged, trace)


def fit_sphere(samples):
    """Algebraic least squares on ``|x|^2 = 2 c.x + (r^2 - |c|^2)``; returns model and RMS."""
    X = np.asarray(samples, dtype=float).reshape(-1, 3)
    if len(X) < 4:
        raise FitError("need at least 4 samples for a sphere")
    shift = X.mean(axis=0)
    Y = X - shift
    A = np.column_stack([2 * Y, np.ones(len(Y))])
    b = np.einsum("ij,ij->i", Y, Y)
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    c = sol[:3]
    r2 = sol[3] + c @ c
    if r2 <= 0:
        raise FitError("sphere fit produced a non-positive squared radius")
    model = SphereModel(c + shift, float(np.sqrt(r2)))
    rms = float(np.sqrt(np.mean(model.residuals(X) ** 2)))
    return model, rms


# -- geometric checks ---------------------------------------------------------

@dataclass
class FoliationResult:
    level_variance: np.ndarray
    max_variance: float
    relative_max_variance: float
    levels_along: str


def foliation_check(patch: SurfacePatch, axis, point=None, level_tol=1e-6) -> FoliationResult:
    """Variance of the squared distance to the axis on each axial level set.

    Level sets are the grid lines along which the axial coordinate is
    constant (rows or columns, whichever fits).  ``point`` defaults to the
    centroid of the samples.

    Raises:
        LevelSetError: the axial coordinate varies along both families of grid lines.
    """
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    X = patch.X[:, :-1] if patch.periodic else patch.X
    pt = patch.points.mean(axis=0) if point is None else np.asarray(point, dtype=float)
    y = X - pt
    h = y @ axis
    rho2 = np.einsum("...k,...k", y, y) - h ** 2
    diam = max(patch.diameter, 1e-300)
    along_rows = float(np.max(np.ptp(h, axis=1))) / diam
    along_cols = float(np.max(np.ptp(h, axis=0))) / diam
    if min(along_rows, along_cols) > level_tol:
        raise LevelSetError(
            f"axial levels are not grid lines (relative spread {min(along_rows, along_cols):.2e}); "
            "re-grid the patch so one parameter is aligned with the axis"
        )
    if along_rows <= along_cols:
        var, kind = rho2.var(axis=1), "v"
    else:
        var, kind = rho2.var(axis=0), "u"
    m = float(var.max())
    return FoliationResult(var, m, m / diam ** 4, kind)


@dataclass
class SymmetryProbe:
    direction: np.ndarray
    offset: float
    defect: float
    scan_offsets: np.ndarray
    scan_defects: np.ndarray

    def to_dict(self):
        return {"direction": [float(x) for x in self.direction], "offset": float(self.offset),
                "defect": float(self.defect)}


def _project_to_patch(patch: SurfacePatch, pts, uv0, iters=12):
    # Gauss-Newton closest-point projection in parameter space
    u, v = uv0[:, 0].copy(), uv0[:, 1].copy()
    lo, hi = patch.v[0], patch.v[-1]
    ulo, uhi = patch.u[0], patch.u[-1]
    for _ in range(iters):
        X, Xu, Xv = patch.evaluate(u, v)
        r = X - pts
        a11 = np.einsum("ij,ij->i", Xu, Xu)
        a12 = np.einsum("ij,ij->i", Xu, Xv)
        a22 = np.einsum("ij,ij->i", Xv, Xv)
        b1 = np.einsum("ij,ij->i", Xu, r)
        b2 = np.einsum("ij,ij->i", Xv, r)
        det = a11 * a22 - a12 ** 2
        du = -(a22 * b1 - a12 * b2) / det
        dv = -(a11 * b2 - a12 * b1) / det
        u = u + du
        v = np.clip(v + dv, lo, hi)
        if not patch.periodic:
            u = np.clip(u, ulo, uhi)
        if np.max(np.abs(du)) + np.max(np.abs(dv)) < 1e-13:
            break
    X, _, _ = patch.evaluate(u, v)
    return np.linalg.norm(X - pts, axis=-1)


def alexandrov_probe(patch: SurfacePatch, direction, plane: Optional[bd.PlaneSpec] = None,
                     n_scan=41, stride=4, coarse_stride=4, plane_tol=1e-8) -> SymmetryProbe:
    """Best mirror plane orthogonal to ``direction`` and its symmetry defect.

    The defect at offset ``t`` is the RMS distance from the mirrored samples
    to the surface, divided by the diameter.  Mirroring is an isometry, so
    this equals the distance of the original samples to the mirrored surface
    and the measure is symmetric.  A nearest-neighbour scan over ``n_scan``
    offsets (every ``coarse_stride``-th probe sample) brackets the minimum, which is then refined with closest-point
    projection onto the patch (exact for patches with an evaluator).

    Raises:
        ProbeError: ``direction`` is not parallel to ``plane``, or the patch has no
            extent along it.
    """
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    if plane is not None and abs(d @ plane.normal) > plane_tol:
        raise ProbeError(f"probe direction is not in the boundary plane (|d.n| = {abs(d @ plane.normal):.2e})")
    nv, nu = patch.shape
    jj, ii = np.meshgrid(np.arange(0, nv, stride), np.arange(0, nu - (1 if patch.periodic else 0), stride),
                         indexing="ij")
    pts = patch.X[jj, ii].reshape(-1, 3)
    uv = np.column_stack([patch.u[ii].ravel(), patch.v[jj].ravel()])
    all_pts = patch.points
    X = patch.X[:, :-1] if patch.periodic else patch.X
    all_uv = np.column_stack([np.broadcast_to(patch.u[: X.shape[1]], X.shape[:2]).ravel(),
                              np.broadcast_to(patch.v[:, None], X.shape[:2]).ravel()])
    tree = cKDTree(all_pts)
    diam = max(patch.diameter, 1e-300)
    s = pts @ d
    lo, hi = float(s.min()), float(s.max())
    if hi - lo < 1e-12 * diam:
        raise ProbeError("patch has no extent along the probe direction")

    def mirrored(t):
        return pts - 2 * (pts @ d - t)[:, None] * d

    sparse = pts[::coarse_stride]
    cap = 0.05 * diam

    def coarse(t):
        m = sparse - 2 * (sparse @ d - t)[:, None] * d
        # far-off mirror images only need to score badly, not exactly
        dist, _ = tree.query(m, distance_upper_bound=cap, workers=-1)
        return float(np.sqrt(np.mean(np.minimum(dist, cap) ** 2)))

    def fine_sq(t):
        m = mirrored(t)
        _, idx = tree.query(m, workers=-1)
        dist = _project_to_patch(patch, m, all_uv[idx])
        return float(np.mean(dist ** 2))

    ts = np.linspace(lo, hi, n_scan)
    cs = np.array([coarse(t) for t in ts])
    k = int(np.argmin(cs))
    step = ts[1] - ts[0]
    res = minimize_scalar(fine_sq, bounds=(ts[k] - step, ts[k] + step), method="bounded",
                          options={"xatol": 1e-13 * diam, "maxiter": 200})
    best = float(res.x)
    defect = float(np.sqrt(max(fine_sq(best), 0.0))) / diam
    return SymmetryProbe(d, best, defect, ts, cs / diam)


def umbilicity(forms) -> np.ndarray:
    """Half the principal-curvature gap, ``sqrt(H^2 - K)``; zero exactly at umbilics."""
    return np.sqrt(np.maximum(forms.H ** 2 - forms.K, 0.0))


# -- pipelines ----------------------------------------------------------------

def _stage(stages, name, fn):
    try:
        passed, details = fn()
        stages[name] = StageResult(bool(passed), details)
    except Exception as exc:  # recorded, never swallowed silently
        log.debug("stage %s failed", name, exc_info=True)
        stages[name] = StageResult(False, {}, f"{type(exc).__name__}: {exc}")


def _edge_line_of_curvature(patch, forms, edge):
    sel = patch.edge(edge)
    E, F, G = forms.E[sel], forms.F[sel], forms.G[sel]
    L, M, N = forms.L[sel], forms.M[sel], forms.N[sel]
    if edge in ("v_min", "v_max"):
        w2 = G - F ** 2 / E
        mixed = (M - F * L / E) / np.sqrt(E * w2)
    else:
        w2 = E - F ** 2 / G
        mixed = (M - F * N / G) / np.sqrt(G * w2)
    k1, k2 = forms.principal_curvatures
    ref = max(float(np.max(np.abs(k1[sel]))), float(np.max(np.abs(k2[sel]))), 1e-300)
    return float(np.max(np.abs(mixed))) / ref


def certify_catenoid(patch: SurfacePatch, planes: Optional[Sequence[bd.PlaneSpec]] = None,
                     tol: Tolerances = Tolerances()) -> CertificationVerdict:
    """Run the full catenoid certification on an annular patch with two planar v-edges."""
    stages: Dict[str, StageResult] = {}
    diam = patch.diameter
    edges = ("v_min", "v_max")
    ctx: Dict = {}

    def step1():
        if not patch.periodic:
            raise bd.OpenBoundaryError("patch is not an annulus: the v-edges are not closed curves")
        pl = list(planes) if planes is not None else [None, None]
        reports = [bd.boundary_report(patch, e, p, tol.planar, tol.tangency) for e, p in zip(edges, pl)]
        ctx["reports"] = reports
        fluxes = [r.flux for r in reports]
        ctx["flux_axis"] = fluxes[0] / np.linalg.norm(fluxes[0]) if np.linalg.norm(fluxes[0]) > 0 else None
        geo = bd.flux_geometry_check(fluxes, [r.plane for r in reports], tol.perpendicularity, diam)
        p1, p2 = reports[0].plane, reports[1].plane
        same = (geo.parallel_angle < tol.parallel
                and abs(p1.offset - np.sign(p1.normal @ p2.normal) * p2.offset) < tol.planar * diam)
        total_flux = sum(np.linalg.norm(f) for f in fluxes)
        closure_rel = geo.closure / max(total_flux, 1e-300)
        details = {
            "theta_mean_rad": [r.theta_mean for r in reports],
            "theta_max_deviation_rad": [r.theta_deviation for r in reports],
            "flux": [[float(x) for x in f] for f in fluxes],
            "flux_geometry": geo.to_dict(),
            "closure_relative": closure_rel,
            "coincident_planes": bool(same),
        }
        ok = (max(r.theta_deviation for r in reports) < tol.angle_constancy
              and geo.perpendicular and bool(geo.parallel) and closure_rel < tol.closure and not same)
        return ok, details

    def step2():
        forms = fundamental_forms(patch)
        ctx["forms"] = forms
        reports = ctx.get("reports")
        if reports is None:
            raise bd.BoundaryError("boundary reports unavailable (Step 1 did not complete)")
        loc = [_edge_line_of_curvature(patch, forms, e) for e in edges]
        rels = [bd.curvature_relation_check(r) for r in reports]
        kappa_min = [float(np.min(np.abs(r.normal_curvature))) for r in reports]
        details = {
            "line_of_curvature_defect": loc,
            "curvature_relation_residual": [c.max_residual for c in rels],
            "normal_curvature_min_abs": kappa_min,
            "strictly_convex": [c.strictly_convex for c in rels],
        }
        ok = (max(loc) < tol.line_of_curvature
              and max(c.max_residual for c in rels) * diam < tol.curvature_relation
              and all(c.strictly_convex for c in rels)
              and min(kappa_min) * diam > tol.curvature_relation)
        try:
            hopf = hopf_differential(forms)
            ph = poincare_hopf_check(find_umbilics(hopf, topology="annulus"))
            details["poincare_hopf"] = {"index_sum": ph.index_sum, "euler_characteristic": ph.euler_characteristic,
                                        "outcome": ph.outcome}
            ok = ok and ph.passed
        except ValueError as exc:
            details["poincare_hopf"] = {"outcome": f"skipped: {exc}"}
        return ok, details

    def step3():
        reports = ctx.get("reports")
        details = {}
        ok = True
        axis = ctx.get("flux_axis")
        if reports is not None:
            total = bd.total_boundary_curvature(reports)
            details["total_boundary_curvature_rad"] = total
            ok = ok and abs(total - 4 * np.pi) < tol.total_curvature * 4 * np.pi
        if axis is None:
            axis = _pca_axis(patch.points)
        e1, e2 = orthonormal_frame(axis)
        probes = [alexandrov_probe(patch, e) for e in (e1, e2)]
        ctx["probes"] = probes
        details["symmetry"] = [p.to_dict() for p in probes]
        ok = ok and all(p.defect < tol.symmetry for p in probes)
        return ok, details

    def fit():
        axis = ctx.get("flux_axis")
        res = fit_catenoid(patch.points, axis_hint=axis)
        ctx["fit"] = res
        details = {"model": res.model.to_dict(), "rms": res.rms, "relative_rms": res.relative_rms,
                   "iterations": res.iterations, "converged": res.converged}
        ok = res.converged and res.relative_rms < tol.fit
        if axis is not None:
            ang = _angle_between_lines(res.model.axis, axis)
            details["axis_flux_angle_rad"] = ang
            ok = ok and ang < tol.axis_flux
        return ok, details

    def foliation():
        f = ctx.get("fit")
        if f is not None:
            axis, point = f.model.axis, f.model.point
        else:
            axis = ctx.get("flux_axis")
            axis = _pca_axis(patch.points) if axis is None else axis
            point = None
        res = foliation_check(patch, axis, point)
        return res.relative_max_variance < tol.foliation, {
            "max_variance": res.max_variance, "relative_max_variance": res.relative_max_variance,
            "levels_along": res.levels_along}

    _stage(stages, "step1", step1)
    _stage(stages, "step2", step2)
    _stage(stages, "step3", step3)
    _stage(stages, "fit", fit)
    _stage(stages, "foliation", foliation)
    f = ctx.get("fit")
    rms = f.rms if f is not None else float("nan")
    rel = f.relative_rms if f is not None else float("nan")
    ok = all(s.passed for s in stages.values())
    return CertificationVerdict("catenoid" if ok else "rejected", f.model if f is not None else None,
                                rms, rel, stages, tol.fit)


def certify_sphere(patch: SurfacePatch, tol: Tolerances = Tolerances()) -> CertificationVerdict:
    """Accept a patch as a sphere piece: nonzero constant H, totally umbilic, sphere fit.

    Umbilicity uses ``sqrt(H^2 - K)``, which equals ``|Phi| / E`` in isothermal
    coordinates but does not need them.
    """
    stages: Dict[str, StageResult] = {}
    diam = patch.diameter
    ctx: Dict = {}

    def cmc():
        forms = fundamental_forms(patch)
        ctx["forms"] = forms
        H = forms.H
        mean_h = float(np.mean(H))
        spread = float(np.ptp(H))
        details = {"mean_H": mean_h, "H_spread": spread}
        if float(np.max(np.abs(H))) * diam < tol.minimal:
            details["reason"] = "minimal, use catenoid path"
            return False, details
        if spread > tol.cmc_spread * abs(mean_h):
            details["reason"] = "not CMC"
            return False, details
        return True, details

    def umbilic():
        forms = ctx.get("forms") or fundamental_forms(patch)
        gap = umbilicity(forms)
        scale = max(float(np.max(np.abs(forms.H))), 1e-300)
        m = float(np.max(gap))
        return m < tol.umbilic * scale, {"max_umbilicity": m, "relative": m / scale}

    def fit():
        model, rms = fit_sphere(patch.points)
        ctx["fit"] = (model, rms)
        return rms / diam < tol.sphere_fit, {"model": model.to_dict(), "rms": rms, "relative_rms": rms / diam}

    _stage(stages, "cmc", cmc)
    _stage(stages, "umbilic", umbilic)
    _stage(stages, "fit", fit)
    f = ctx.get("fit")
    ok = all(s.passed for s in stages.values())
    model, rms = f if f is not None else (None, float("nan"))
    return CertificationVerdict("sphere" if ok else "rejected", model, rms, rms / diam, stages, tol.sphere_fit)

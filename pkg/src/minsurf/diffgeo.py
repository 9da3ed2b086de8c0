"""Fundamental forms, curvatures, the Hopf differential and umbilic indices.

Orientation convention: the unit normal is ``X_u x X_v / |X_u x X_v|``.  The
signs of ``L, M, N`` and of ``Phi`` follow it; reversing the orientation
negates them.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .patch import SurfacePatch

UMBILIC_TOL = 1e-6
TOTALLY_UMBILIC_TOL = 1e-10
CONFORMAL_TOL = 1e-6

EULER_CHARACTERISTIC = {"annulus": 0, "disk": 1, "strip": 1, "sphere": 2}


class DegenerateImmersionError(ValueError):
    pass


class NonConformalError(ValueError):
    pass


class NonCMCWarning(UserWarning):
    pass


class LoopResolutionError(ValueError):
    """Winding loop too coarse or too close to an umbilic; refine the grid."""


class BoundaryNotLineOfCurvatureError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FormsField:
    u: np.ndarray
    v: np.ndarray
    E: np.ndarray
    F: np.ndarray
    G: np.ndarray
    L: np.ndarray
    M: np.ndarray
    N: np.ndarray
    normal: np.ndarray
    H: np.ndarray
    K: np.ndarray
    scale: float = 1.0
    periodic: bool = False
    topology: str = "disk"

    @property
    def principal_curvatures(self):
        disc = np.sqrt(np.maximum(self.H ** 2 - self.K, 0.0))
        return self.H + disc, self.H - disc

    def conformality_defect(self):
        """``(max |E - G| / E, max |F| / E)``."""
        return (float(np.max(np.abs(self.E - self.G) / self.E)),
                float(np.max(np.abs(self.F) / self.E)))


def fundamental_forms(patch: SurfacePatch) -> FormsField:
    """First and second fundamental forms with mean and Gaussian curvature."""
    Xu, Xv = patch.Xu, patch.Xv
    E = np.einsum("...k,...k", Xu, Xu)
    F = np.einsum("...k,...k", Xu, Xv)
    G = np.einsum("...k,...k", Xv, Xv)
    nvec = np.cross(Xu, Xv)
    area = np.linalg.norm(nvec, axis=-1)
    scale = patch.diameter
    bad = area < 1e-14 * max(scale, 1e-300) ** 2
    if np.any(bad):
        j, i = np.argwhere(bad)[0]
        raise DegenerateImmersionError(
            f"degenerate immersion at sample (i={i}, j={j}): |X_u x X_v| = {area[j, i]:.3e}"
        )
    n = nvec / area[..., None]
    L = np.einsum("...k,...k", patch.Xuu, n)
    M = np.einsum("...k,...k", patch.Xuv, n)
    N = np.einsum("...k,...k", patch.Xvv, n)
    det = E * G - F ** 2
    if np.any(det <= 0):
        j, i = np.argwhere(det <= 0)[0]
        raise DegenerateImmersionError(f"EG - F^2 <= 0 at sample (i={i}, j={j})")
    H = (E * N - 2 * F * M + G * L) / (2 * det)
    K = (L * N - M ** 2) / det
    return FormsField(patch.u, patch.v, E, F, G, L, M, N, n, H, K,
                      scale=scale, periodic=patch.periodic, topology=patch.topology)


@dataclass(frozen=True, eq=False)
class HopfField:
    """Hopf differential ``Phi = (L - N)/2 - i M`` on a conformal grid."""

    u: np.ndarray
    v: np.ndarray
    phi: np.ndarray
    umbilic: np.ndarray
    totally_umbilic: bool = False
    H: Optional[np.ndarray] = None
    E: Optional[np.ndarray] = None
    periodic: bool = False
    topology: str = "disk"

    @classmethod
    def from_values(cls, u, v, phi, scale=1.0, periodic=False, topology="disk",
                    tau=UMBILIC_TOL, H=None, E=None):
        """Wrap a complex grid of ``Phi`` values, flagging umbilics."""
        phi = np.asarray(phi, dtype=complex)
        mag = np.abs(phi)
        med = float(np.median(mag)) if mag.size else 0.0
        totally = med < TOTALLY_UMBILIC_TOL * scale
        umbilic = np.ones(mag.shape, bool) if totally else mag < tau * med
        return cls(np.asarray(u, float), np.asarray(v, float), phi, umbilic, bool(totally),
                   H=H, E=E, periodic=periodic, topology=topology)


def hopf_differential(forms: FormsField, tau=UMBILIC_TOL, conformal_tol=CONFORMAL_TOL) -> HopfField:
    """Hopf differential of a conformally parametrized patch.

    Samples with ``|Phi| < tau * median |Phi|`` are flagged umbilic; a patch
    whose median ``|Phi|`` is negligible is totally umbilic.

    Raises:
        NonConformalError: if ``|E - G| / E`` or ``|F| / E`` exceeds ``conformal_tol``.
    """
    dEG, dF = forms.conformality_defect()
    if dEG > conformal_tol or dF > conformal_tol:
        raise NonConformalError(
            f"Hopf differential needs isothermal coordinates (|E-G|/E = {dEG:.2e}, "
            f"|F|/E = {dF:.2e}); reparametrize conformally first"
        )
    phi = (forms.L - forms.N) / 2 - 1j * forms.M
    return HopfField.from_values(forms.u, forms.v, phi, scale=forms.scale, periodic=forms.periodic,
                                 topology=forms.topology, tau=tau, H=forms.H, E=forms.E)


def hopf_identity_defect(forms: FormsField, hopf: HopfField) -> float:
    """Max relative defect of ``|Phi|^2 = E^2 (H^2 - K)``."""
    lhs = np.abs(hopf.phi) ** 2
    rhs = forms.E ** 2 * (forms.H ** 2 - forms.K)
    ref = np.maximum(np.maximum(np.abs(lhs), np.abs(rhs)), forms.E ** 2 * forms.scale ** -2)
    return float(np.max(np.abs(lhs - rhs) / ref))


def cr_residual(hopf: HopfField, cmc_tol=1e-6) -> float:
    """Max ``|dPhi/dw-bar|`` by central differences over interior samples.

    ``dPhi/dw-bar = (Phi_u + i Phi_v) / 2``.  Holomorphic ``Phi`` gives a
    residual of order ``h**2``.  Warns with :class:`NonCMCWarning` when the
    mean curvature is not constant, in which case the residual need not vanish.
    """
    if hopf.H is not None:
        H = hopf.H
        spread = float(np.max(H) - np.min(H))
        if spread > cmc_tol * max(1.0, float(np.max(np.abs(H)))):
            warnings.warn(f"patch is not CMC (H spread {spread:.2e}); "
                          "the Hopf differential need not be holomorphic", NonCMCWarning)
    phi = hopf.phi
    hu = np.diff(hopf.u)
    hv = np.diff(hopf.v)
    dphi_u = (phi[1:-1, 2:] - phi[1:-1, :-2]) / (hu[1:] + hu[:-1])[None, :]
    dphi_v = (phi[2:, 1:-1] - phi[:-2, 1:-1]) / (hv[1:] + hv[:-1])[:, None]
    return float(np.max(np.abs(0.5 * (dphi_u + 1j * dphi_v))))


# -- line fields and rotation indices ---------------------------------------

@dataclass(frozen=True, eq=False)
class LineField:
    """Direction field on the parameter grid, angles taken modulo pi."""

    u: np.ndarray
    v: np.ndarray
    angle: np.ndarray
    mask: np.ndarray
    periodic: bool = False

    @classmethod
    def from_angles(cls, u, v, angle, mask=None, periodic=False):
        angle = np.asarray(angle, dtype=float)
        if mask is None:
            mask = ~np.isfinite(angle)
        return cls(np.asarray(u, float), np.asarray(v, float), angle, np.asarray(mask, bool), periodic)


def principal_line_field(hopf: HopfField) -> LineField:
    """Direction of maximal normal curvature, ``-arg(Phi)/2`` in isothermal coordinates."""
    angle = np.where(hopf.umbilic, np.nan, -np.angle(hopf.phi) / 2)
    return LineField(hopf.u, hopf.v, angle, hopf.umbilic.copy(), hopf.periodic)


def line_field_from_hopf_values(u, v, phi, periodic=False, tau=UMBILIC_TOL):
    """Principal line field of a synthetic quadratic differential ``phi dw^2``."""
    return principal_line_field(HopfField.from_values(u, v, phi, periodic=periodic, tau=tau))


@dataclass(frozen=True)
class RotationIndex:
    value: float
    raw: float
    quantization_error: float


def _wrap(d):
    return (d + np.pi) % (2 * np.pi) - np.pi


def _quantize(raw, step):
    value = round(raw / step) * step
    return RotationIndex(float(value) + 0.0, float(raw), float(abs(raw - value)))


def rectangle_loop(i0, i1, j0, j1) -> List[Tuple[int, int]]:
    """Counter-clockwise grid loop around the rectangle ``[i0, i1] x [j0, j1]``.

    Indices are ``(i, j)`` = (u index, v index); the loop is implicitly closed.
    """
    if i1 <= i0 or j1 <= j0:
        raise LoopResolutionError("loop rectangle must have positive extent")
    loop = [(i, j0) for i in range(i0, i1)]
    loop += [(i1, j) for j in range(j0, j1)]
    loop += [(i, j1) for i in range(i1, i0, -1)]
    loop += [(i0, j) for j in range(j1, j0, -1)]
    return loop


def loop_winding(field: LineField, loop: Sequence[Tuple[int, int]], check_mask=True) -> float:
    """Raw winding of the doubled angle along ``loop``, divided by two."""
    nv, nu = field.angle.shape
    ii = np.array([p[0] for p in loop])
    jj = np.array([p[1] for p in loop])
    if field.periodic:
        ii = np.mod(ii, nu - 1)
    if np.any((ii < 0) | (ii >= nu) | (jj < 0) | (jj >= nv)):
        raise LoopResolutionError("loop leaves the grid")
    if check_mask and np.any(field.mask):
        near = ndimage.binary_dilation(field.mask, structure=np.ones((3, 3), bool))
        if field.periodic:
            near[:, 0] |= near[:, -1]
            near[:, -1] |= near[:, 0]
        if np.any(near[jj, ii]):
            raise LoopResolutionError("loop passes within one sample of an umbilic; refine the grid")
    doubled = 2 * field.angle[jj, ii]
    steps = _wrap(np.diff(np.append(doubled, doubled[0])))
    if np.any(np.abs(steps) >= np.pi / 2):
        raise LoopResolutionError(
            f"doubled-angle jump {np.max(np.abs(steps)):.3f} >= pi/2 along the loop; refine the grid"
        )
    return float(steps.sum() / (2 * np.pi) / 2)


def rotation_index(field: LineField, loop: Sequence[Tuple[int, int]]) -> RotationIndex:
    """Rotation index of ``field`` around a closed grid loop, quantized to 1/2."""
    return _quantize(loop_winding(field, loop), 0.5)


def _reflect_field(field: LineField, edge: str) -> Tuple[LineField, int]:
    # Double the field across a v-edge: v -> 2 v_b - v, angle -> -angle.
    if edge == "v_min":
        vb = field.v[0]
        v = np.concatenate([2 * vb - field.v[:0:-1], field.v])
        angle = np.concatenate([-field.angle[:0:-1], field.angle])
        mask = np.concatenate([field.mask[:0:-1], field.mask])
        row = field.v.size - 1
    elif edge == "v_max":
        vb = field.v[-1]
        v = np.concatenate([field.v, 2 * vb - field.v[-2::-1]])
        angle = np.concatenate([field.angle, -field.angle[-2::-1]])
        mask = np.concatenate([field.mask, field.mask[-2::-1]])
        row = field.v.size - 1
    else:
        raise ValueError(f"boundary doubling is supported on v edges, got {edge!r}")
    return LineField(field.u, v, angle, mask, field.periodic), row


def check_line_of_curvature(field: LineField, edge: str, tol=1e-6) -> float:
    """Max ``|sin 2 phi|`` along a v-edge; zero when the edge is a line of curvature."""
    row = 0 if edge == "v_min" else -1
    a = field.angle[row]
    ok = ~field.mask[row] & np.isfinite(a)
    defect = float(np.max(np.abs(np.sin(2 * a[ok])))) if np.any(ok) else 0.0
    if defect > tol:
        raise BoundaryNotLineOfCurvatureError(
            f"edge {edge} is not a line of curvature (max |sin 2phi| = {defect:.2e}); "
            "the boundary index needs a constant contact angle so that, by Terquem-Joachimsthal, "
            "the boundary is a line of curvature"
        )
    return defect


def boundary_rotation_index(field: LineField, i: int, edge="v_min", radius=4, tol=1e-6) -> RotationIndex:
    """Rotation index at boundary sample ``i`` of a v-edge, quantized to 1/4.

    The field is doubled by reflection across the edge; the result is half the
    interior index of the doubled field.
    """
    check_line_of_curvature(field, edge, tol)
    doubled, row = _reflect_field(field, edge)
    loop = rectangle_loop(i - radius, i + radius, row - radius, row + radius)
    return _quantize(loop_winding(doubled, loop) / 2, 0.25)


@dataclass
class Umbilic:
    u: float
    v: float
    index: float
    boundary: bool = False
    edge: Optional[str] = None


@dataclass
class UmbilicReport:
    umbilics: List[Umbilic] = field(default_factory=list)
    euler_characteristic: int = 0
    totally_umbilic: bool = False
    skipped_edges: List[str] = field(default_factory=list)

    @property
    def index_sum(self) -> float:
        return float(sum(p.index for p in self.umbilics))


@dataclass(frozen=True)
class PoincareHopfResult:
    passed: bool
    index_sum: float
    euler_characteristic: int
    defect: float
    outcome: str


def _plaquette_windings(field: LineField):
    # winding (in units of 2*pi of the doubled angle) around each grid cell
    a = 2 * field.angle
    c00, c10, c11, c01 = a[:-1, :-1], a[:-1, 1:], a[1:, 1:], a[1:, :-1]
    total = _wrap(c10 - c00) + _wrap(c11 - c10) + _wrap(c01 - c11) + _wrap(c00 - c01)
    w = np.rint(total / (2 * np.pi))
    w[~np.isfinite(total)] = 0
    return w


def _boundary_candidates(field: LineField, edge: str):
    doubled, row = _reflect_field(field, edge)
    a = 2 * doubled.angle
    lo, hi = row - 1, row + 1
    total = (_wrap(a[lo, 1:] - a[lo, :-1]) + _wrap(a[hi, 1:] - a[lo, 1:])
             + _wrap(a[hi, :-1] - a[hi, 1:]) + _wrap(a[lo, :-1] - a[hi, :-1]))
    w = np.rint(total / (2 * np.pi))
    w[~np.isfinite(total)] = 0
    return w


def find_umbilics(hopf: HopfField, topology=None, boundary_edges=None, margin=2,
                  max_margin=12, line_tol=1e-6) -> UmbilicReport:
    """Locate isolated umbilics and measure their rotation indices.

    Candidates are samples flagged umbilic and grid cells around which the
    doubled principal angle winds.  Each connected cluster is enclosed by a
    rectangular loop; clusters touching a boundary edge are measured on the
    reflected field and contribute half-weight indices.  ``boundary_edges``
    defaults to both v-edges for annuli and none otherwise; an edge that is
    not a line of curvature cannot be doubled and is listed in
    ``skipped_edges`` instead.
    """
    topology = topology or hopf.topology
    chi = EULER_CHARACTERISTIC.get(topology, 0)
    if hopf.totally_umbilic:
        return UmbilicReport([], chi, totally_umbilic=True)
    if boundary_edges is None:
        boundary_edges = ("v_min", "v_max") if topology == "annulus" else ()
    field_ = principal_line_field(hopf)
    nv, nu = field_.angle.shape
    skipped = []
    for edge in boundary_edges:
        try:
            check_line_of_curvature(field_, edge, line_tol)
        except BoundaryNotLineOfCurvatureError:
            skipped.append(edge)
    boundary_edges = tuple(e for e in boundary_edges if e not in skipped)

    if np.mean(hopf.umbilic) > 0.25:
        return UmbilicReport([], chi, totally_umbilic=True)

    cand = hopf.umbilic.copy()
    for j, i in np.argwhere(_plaquette_windings(field_) != 0):
        cand[j:j + 2, i:i + 2] = True
    for edge in boundary_edges:
        row = 0 if edge == "v_min" else nv - 1
        for i in np.flatnonzero(_boundary_candidates(field_, edge)):
            cand[row, i:i + 2] = True
    labels = _label_clusters(cand, field_.periodic)

    report = UmbilicReport([], chi, skipped_edges=skipped)
    for lab in np.unique(labels[labels > 0]):
        jj, ii = np.nonzero(labels == lab)
        if field_.periodic:
            ii = _unwrap_indices(ii, nu - 1)
        on_edge = None
        if "v_min" in boundary_edges and jj.min() == 0:
            on_edge = "v_min"
        elif "v_max" in boundary_edges and jj.max() == nv - 1:
            on_edge = "v_max"
        index = _cluster_index(field_, ii, jj, on_edge, margin, max_margin)
        uu = _mean_coordinate(field_.u, ii, field_.periodic)
        report.umbilics.append(Umbilic(uu, float(field_.v[jj].mean()), index,
                                       boundary=on_edge is not None, edge=on_edge))
    return report


def _label_clusters(cand, periodic):
    if not periodic:
        return ndimage.label(cand, structure=np.ones((3, 3), bool))[0]
    inner = cand[:, :-1].copy()
    inner[:, 0] |= cand[:, -1]
    labels = ndimage.label(inner, structure=np.ones((3, 3), bool))[0]
    nv = labels.shape[0]
    for j in range(nv):
        for dj in (-1, 0, 1):
            if 0 <= j + dj < nv:
                a, b = labels[j, 0], labels[j + dj, -1]
                if a and b and a != b:
                    labels[labels == b] = a
    return np.concatenate([labels, labels[:, :1]], axis=1)


def _unwrap_indices(ii, period):
    # shift a cluster that straddles the seam onto one side
    if ii.size and ii.max() - ii.min() > period // 2:
        ii = np.where(ii < period // 2, ii + period, ii)
    return ii


def _mean_coordinate(u, ii, periodic):
    if not periodic:
        return float(u[np.clip(ii, 0, u.size - 1)].mean())
    period = u[-1] - u[0]
    step = period / (u.size - 1)
    return float(u[0] + np.mod(ii.mean() * step, period))


def _cluster_index(field_, ii, jj, edge, margin, max_margin):
    nv, nu = field_.angle.shape
    for m in range(margin, max_margin + 1):
        i0, i1 = ii.min() - m, ii.max() + m
        try:
            if edge is None:
                j0, j1 = jj.min() - m, jj.max() + m
                return rotation_index(field_, rectangle_loop(i0, i1, j0, j1)).value
            doubled, row = _reflect_field(field_, edge)
            reach = (jj.max() if edge == "v_min" else (nv - 1) - jj.min()) + m
            j0, j1 = row - reach, row + reach
            raw = loop_winding(doubled, rectangle_loop(i0, i1, j0, j1)) / 2
            return _quantize(raw, 0.25).value
        except LoopResolutionError:
            continue
    raise LoopResolutionError("could not isolate umbilic cluster; refine the grid")


def poincare_hopf_check(report: UmbilicReport, tol=0.1) -> PoincareHopfResult:
    """Compare the index sum of isolated umbilics with the Euler characteristic."""
    chi = report.euler_characteristic
    if report.totally_umbilic:
        return PoincareHopfResult(False, float("nan"), chi, float("nan"), "totally-umbilic region")
    s = report.index_sum
    defect = abs(s - chi)
    passed = defect < tol
    return PoincareHopfResult(passed, s, chi, defect, "pass" if passed else "fail")

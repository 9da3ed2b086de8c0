"""Command-line front end: scene configs in, meshes, CSV fields, reports and figures out.

Exit codes: 0 when every verdict passes, 1 when a verdict rejects (or a
``--compare`` check finds a difference), 2 on invalid input or unwritable
outputs.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import tempfile
import time
import warnings
from dataclasses import asdict, dataclass, field, fields, replace
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import yaml

from . import boundary as bd
from .bjorling import BjorlingInput, BjorlingInputError, circle_with_contact_angle, solve
from .certify import Tolerances, certify_catenoid, certify_sphere
from .diffgeo import (
    DegenerateImmersionError,
    NonCMCWarning,
    NonConformalError,
    cr_residual,
    find_umbilics,
    fundamental_forms,
    hopf_differential,
    poincare_hopf_check,
)
from .patch import PatchError, SurfacePatch
from .series import SeriesError, TrigSeries3
from .surfaces import normal_perturbation

log = logging.getLogger("minsurf")

REPORT_SCHEMA = "minsurf-report"
REPORT_VERSION = 1
MODES = ("bjorling", "analyze", "certify-catenoid", "certify-sphere")
FIELD_HEADER = ("u", "v", "E", "F", "G", "L", "M", "N", "H", "K", "re_phi", "im_phi")
POSITION_HEADER = ("u", "v", "x", "y", "z")

EXIT_OK, EXIT_REJECTED, EXIT_INVALID = 0, 1, 2


class ConfigError(ValueError):
    """Invalid scene configuration; the message names the offending field."""


class MeshExportError(ValueError):
    pass


# -- config ---------------------------------------------------------------------

@dataclass(frozen=True)
class Domain:
    a: float = 0.0
    b: float = 2 * math.pi
    epsilon: float = 1.0
    v_range: Optional[Tuple[float, float]] = None
    resolution: Tuple[int, int] = (256, 64)


@dataclass(frozen=True)
class Outputs:
    mesh: Optional[str] = "surface.obj"
    fields: Optional[str] = "fields.csv"
    positions: Optional[str] = "patch.csv"
    report: str = "report.json"
    figures: bool = True


@dataclass(frozen=True)
class Perturbation:
    amplitude: float
    seed: int = 0


@dataclass(frozen=True)
class SceneConfig:
    """Validated scene.  Exactly one of ``theta``, ``curve``/``normal`` or ``patch_file`` is set."""

    mode: str = "bjorling"
    theta: Optional[float] = None
    curve: Optional[TrigSeries3] = None
    normal: Optional[TrigSeries3] = None
    patch_file: Optional[str] = None
    perturbation: Optional[Perturbation] = None
    domain: Domain = field(default_factory=Domain)
    planes: Optional[Tuple[Tuple[Tuple[float, float, float], float], ...]] = None
    tolerances: Tolerances = field(default_factory=Tolerances)
    outputs: Outputs = field(default_factory=Outputs)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode: expected one of {', '.join(MODES)}, got {self.mode!r}")
        sources = [self.theta is not None, self.curve is not None or self.normal is not None,
                   self.patch_file is not None]
        if sum(sources) != 1:
            raise ConfigError("surface: give exactly one of theta, curve+normal, patch_file")
        if (self.curve is None) != (self.normal is None):
            raise ConfigError("surface: curve and normal must be given together")
        if self.planes is not None and len(self.planes) != 2:
            raise ConfigError(f"planes: expected two planes (one per boundary), got {len(self.planes)}")

    @property
    def source(self) -> str:
        if self.theta is not None:
            return "theta"
        return "series" if self.curve is not None else "patch_file"

    def bjorling_input(self) -> BjorlingInput:
        d = self.domain
        kw = dict(a=d.a, b=d.b, epsilon=d.epsilon, v_range=d.v_range, resolution=d.resolution)
        if self.theta is not None:
            return circle_with_contact_angle(self.theta, **kw)
        return BjorlingInput(self.curve, self.normal, **kw)

    def plane_specs(self):
        if self.planes is None:
            return None
        return [bd.PlaneSpec(np.array(n, dtype=float), float(o)) for n, o in self.planes]

    def to_dict(self) -> Dict[str, Any]:
        """Plain-data form; :func:`config_from_dict` inverts it exactly."""
        surface: Dict[str, Any] = {}
        if self.theta is not None:
            surface["theta"] = self.theta
        if self.curve is not None:
            surface["curve"] = _series_to_dict(self.curve)
            surface["normal"] = _series_to_dict(self.normal)
        if self.patch_file is not None:
            surface["patch_file"] = self.patch_file
        if self.perturbation is not None:
            surface["perturbation"] = asdict(self.perturbation)
        d = self.domain
        out = {
            "mode": self.mode,
            "degrees": False,
            "surface": surface,
            "domain": {"a": d.a, "b": d.b, "epsilon": d.epsilon,
                       "v_range": None if d.v_range is None else list(d.v_range),
                       "resolution": list(d.resolution)},
            "tolerances": asdict(self.tolerances),
            "outputs": asdict(self.outputs),
        }
        if self.planes is not None:
            out["planes"] = [{"normal": list(n), "offset": o} for n, o in self.planes]
        return out


def _series_to_dict(s: TrigSeries3):
    return {"components": s.to_triples(), "slope": [float(x) for x in s.slope]}


def _num(value, where, positive=False):
    # YAML 1.1 reads "1e-6" as a string; accept anything float() accepts
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected a number, got {value!r}") from None
    if not math.isfinite(x):
        raise ConfigError(f"{where}: must be finite, got {value!r}")
    if positive and not x > 0:
        raise ConfigError(f"{where}: must be positive, got {value!r}")
    return x


def _int(value, where, minimum=None):
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    try:
        x = int(value)
    except ValueError:
        raise ConfigError(f"{where}: expected an integer, got {value!r}") from None
    if float(value) != x:
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    if minimum is not None and x < minimum:
        raise ConfigError(f"{where}: must be at least {minimum}, got {x}")
    return x


def _section(raw, name, allowed):
    sec = raw.get(name) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"{name}: expected a mapping, got {type(sec).__name__}")
    unknown = sorted(set(sec) - set(allowed))
    if unknown:
        raise ConfigError(f"{name}: unknown field(s) {', '.join(map(str, unknown))}; "
                          f"allowed: {', '.join(allowed)}")
    return sec


def _vector(value, where, n=3):
    if not isinstance(value, (list, tuple)) or len(value) != n:
        raise ConfigError(f"{where}: expected a list of {n} numbers, got {value!r}")
    return tuple(_num(x, f"{where}[{k}]") for k, x in enumerate(value))


def _series(value, where):
    if not isinstance(value, dict):
        raise ConfigError(f"{where}: expected a mapping with 'components' and optional 'slope'")
    unknown = sorted(set(value) - {"components", "slope"})
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {', '.join(unknown)}")
    comps = value.get("components")
    if not isinstance(comps, list) or len(comps) != 3:
        raise ConfigError(f"{where}.components: expected three lists of [j, a, b] triples (x, y, z)")
    parsed = []
    for k, comp in enumerate(comps):
        if not isinstance(comp, list):
            raise ConfigError(f"{where}.components[{k}]: expected a list of [j, a, b] triples")
        rows = []
        for m, t in enumerate(comp):
            w = f"{where}.components[{k}][{m}]"
            if not isinstance(t, (list, tuple)) or len(t) != 3:
                raise ConfigError(f"{w}: expected [j, a, b], got {t!r}")
            rows.append([_int(t[0], f"{w}[0]", minimum=0), _num(t[1], f"{w}[1]"), _num(t[2], f"{w}[2]")])
        parsed.append(rows)
    slope = value.get("slope")
    slope = None if slope is None else np.array(_vector(slope, f"{where}.slope"))
    try:
        return TrigSeries3.from_triples(parsed, slope)
    except SeriesError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def config_from_dict(raw: Dict[str, Any], base_dir: Optional[str] = None) -> SceneConfig:
    """Validate a parsed config document.

    Relative ``patch_file`` paths resolve against ``base_dir`` when given.
    With ``degrees: true`` the angles ``theta``, ``a`` and ``b`` are read in
    degrees and converted to radians.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be a mapping")
    top = ("mode", "degrees", "surface", "domain", "planes", "tolerances", "outputs")
    unknown = sorted(set(raw) - set(top))
    if unknown:
        raise ConfigError(f"config: unknown field(s) {', '.join(map(str, unknown))}; allowed: {', '.join(top)}")
    degrees = raw.get("degrees", False)
    if not isinstance(degrees, bool):
        raise ConfigError(f"degrees: expected true or false, got {degrees!r}")
    to_rad = math.radians if degrees else (lambda x: x)

    mode = raw.get("mode", "bjorling")
    surface = _section(raw, "surface", ("theta", "curve", "normal", "patch_file", "perturbation"))
    theta = surface.get("theta")
    theta = None if theta is None else to_rad(_num(theta, "surface.theta"))
    curve = normal = None
    if "curve" in surface or "normal" in surface:
        if "curve" not in surface or "normal" not in surface:
            raise ConfigError("surface: curve and normal must be given together")
        curve = _series(surface["curve"], "surface.curve")
        normal = _series(surface["normal"], "surface.normal")
    patch_file = surface.get("patch_file")
    if patch_file is not None:
        if not isinstance(patch_file, str) or not patch_file:
            raise ConfigError(f"surface.patch_file: expected a path, got {patch_file!r}")
        if base_dir and not os.path.isabs(patch_file):
            patch_file = os.path.normpath(os.path.join(base_dir, patch_file))
    pert = surface.get("perturbation")
    if pert is not None:
        if not isinstance(pert, dict) or set(pert) - {"amplitude", "seed"} or "amplitude" not in pert:
            raise ConfigError("surface.perturbation: expected {amplitude: <number>, seed: <int>}")
        pert = Perturbation(_num(pert["amplitude"], "surface.perturbation.amplitude"),
                            _int(pert.get("seed", 0), "surface.perturbation.seed", minimum=0))

    dom = _section(raw, "domain", ("a", "b", "epsilon", "v_range", "resolution"))
    v_range = dom.get("v_range")
    if v_range is not None:
        v_range = _vector(v_range, "domain.v_range", n=2)
    res = dom.get("resolution", list(Domain.resolution))
    if not isinstance(res, (list, tuple)) or len(res) != 2:
        raise ConfigError(f"domain.resolution: expected [nu, nv], got {res!r}")
    domain = Domain(
        a=to_rad(_num(dom.get("a", 0.0), "domain.a")),
        b=to_rad(_num(dom["b"], "domain.b")) if "b" in dom else Domain.b,
        epsilon=_num(dom.get("epsilon", 1.0), "domain.epsilon", positive=True),
        v_range=v_range,
        resolution=(_int(res[0], "domain.resolution[0]", 2), _int(res[1], "domain.resolution[1]", 2)),
    )

    planes = raw.get("planes")
    if planes is not None:
        if not isinstance(planes, list):
            raise ConfigError("planes: expected a list of {normal, offset} mappings")
        parsed = []
        for k, p in enumerate(planes):
            if not isinstance(p, dict) or set(p) - {"normal", "offset"} or "normal" not in p:
                raise ConfigError(f"planes[{k}]: expected {{normal: [x, y, z], offset: <number>}}")
            n = _vector(p["normal"], f"planes[{k}].normal")
            if abs(math.sqrt(sum(x * x for x in n)) - 1.0) > 1e-12:
                raise ConfigError(f"planes[{k}].normal: must be a unit vector")
            parsed.append((n, _num(p.get("offset", 0.0), f"planes[{k}].offset")))
        planes = tuple(parsed)

    names = [f.name for f in fields(Tolerances)]
    tol_raw = _section(raw, "tolerances", names)
    tol = Tolerances(**{k: _num(v, f"tolerances.{k}", positive=True) for k, v in tol_raw.items()})

    out_raw = _section(raw, "outputs", [f.name for f in fields(Outputs)])
    out_kw = {}
    for k, v in out_raw.items():
        if k == "figures":
            if not isinstance(v, bool):
                raise ConfigError(f"outputs.figures: expected true or false, got {v!r}")
        elif k == "report":
            if not isinstance(v, str) or not v:
                raise ConfigError("outputs.report: expected a file name")
        elif v is not None and (not isinstance(v, str) or not v):
            raise ConfigError(f"outputs.{k}: expected a file name or null")
        out_kw[k] = v

    return SceneConfig(mode=mode, theta=theta, curve=curve, normal=normal, patch_file=patch_file,
                       perturbation=pert, domain=domain, planes=planes, tolerances=tol,
                       outputs=Outputs(**out_kw))


def load_config(path) -> SceneConfig:
    """Read and validate a YAML scene file; syntax errors report line and column."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        raise ConfigError(f"{path}: YAML syntax error at {where}: {exc.problem}") from None
    return config_from_dict(raw or {}, base_dir=os.path.dirname(os.path.abspath(path)))


# -- file formats ---------------------------------------------------------------

def atomic_write_text(path, text: str):
    """Write via a temp file in the destination directory and rename over ``path``."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=d)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def mesh_text(patch: SurfacePatch) -> str:
    nv, nu = patch.shape
    if nu < 2 or nv < 2:
        raise MeshExportError(f"a {nu}x{nv} grid has no faces")
    lines = [f"# minsurf mesh: {nu} x {nv} grid, vertices in u-fastest order"]
    if patch.periodic:
        lines.append(f"# periodic seam duplicated: vertex column {nu - 1} coincides with column 0")
    lines.extend("v " + " ".join(repr(float(c)) for c in p) for p in patch.X.reshape(-1, 3))
    # (i, j) -> (i+1, j) -> (i+1, j+1) runs counter-clockwise about X_u x X_v
    for j in range(nv - 1):
        for i in range(nu - 1):
            a = j * nu + i + 1
            b, c, d = a + 1, a + nu + 1, a + nu
            lines.append(f"f {a} {b} {c}")
            lines.append(f"f {a} {c} {d}")
    return "\n".join(lines) + "\n"


def export_mesh(patch: SurfacePatch, path):
    """Wavefront OBJ of the grid: two triangles per quad, winding consistent with the normal."""
    return atomic_write_text(path, mesh_text(patch))


def _fmt(x) -> str:
    return repr(float(x))


def fields_text(forms, hopf=None) -> str:
    if hopf is not None:
        phi = hopf.phi
    else:
        phi = (np.asarray(forms.L) - np.asarray(forms.N)) / 2 - 1j * np.asarray(forms.M)
    cols = [forms.E, forms.F, forms.G, forms.L, forms.M, forms.N, forms.H, forms.K, phi.real, phi.imag]
    shape = np.shape(forms.E)
    for name, c in zip(FIELD_HEADER[2:], cols):
        if np.shape(c) != shape:
            raise ValueError(f"field {name} has shape {np.shape(c)}, expected {shape}")
    u, v = np.asarray(forms.u), np.asarray(forms.v)
    if shape != (v.size, u.size):
        raise ValueError(f"field grids have shape {shape}, parameters give {(v.size, u.size)}")
    U, V = np.meshgrid(u, v)
    rows = [",".join(FIELD_HEADER)]
    flat = [a.ravel() for a in (U, V, *cols)]
    for k in range(U.size):
        rows.append(",".join(_fmt(a[k]) for a in flat))
    return "\n".join(rows) + "\n"


def export_fields(forms, hopf, path):
    """CSV of the forms, curvatures and Hopf differential, one row per sample (u fastest).

    ``hopf`` may be ``None`` for non-conformal grids; ``(L - N)/2 - iM`` is then
    written without the conformality requirement.
    """
    return atomic_write_text(path, fields_text(forms, hopf))


def export_positions(patch: SurfacePatch, path):
    """Positions-only grid CSV (``u,v,x,y,z``), the format read by :func:`load_patch_csv`."""
    U, V = np.meshgrid(patch.u, patch.v)
    rows = [",".join(POSITION_HEADER)]
    for uu, vv, p in zip(U.ravel(), V.ravel(), patch.X.reshape(-1, 3)):
        rows.append(",".join(_fmt(x) for x in (uu, vv, *p)))
    return atomic_write_text(path, "\n".join(rows) + "\n")


def load_patch_csv(path) -> SurfacePatch:
    """Read a ``u,v,x,y,z`` grid in any row order; derivatives come from the grid."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(h.strip() for h in header) != POSITION_HEADER:
                raise ConfigError(f"{path}: expected header {','.join(POSITION_HEADER)}, got {header}")
            data = []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != 5:
                    raise ConfigError(f"{path}:{lineno}: expected 5 columns, got {len(row)}")
                try:
                    data.append([float(x) for x in row])
                except ValueError:
                    raise ConfigError(f"{path}:{lineno}: non-numeric entry in {row}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read patch file {path}: {exc.strerror}") from None
    arr = np.array(data, dtype=float).reshape(-1, 5)
    if not np.isfinite(arr).all():
        raise ConfigError(f"{path}: non-finite value in row {2 + int(np.argmin(np.isfinite(arr).all(axis=1)))}")
    u = np.unique(arr[:, 0])
    v = np.unique(arr[:, 1])
    if len(arr) != u.size * v.size:
        raise ConfigError(f"{path}: {len(arr)} rows do not form a {u.size} x {v.size} grid")
    X = np.full((v.size, u.size, 3), np.nan)
    X[np.searchsorted(v, arr[:, 1]), np.searchsorted(u, arr[:, 0])] = arr[:, 2:]
    if np.isnan(X).any():
        raise ConfigError(f"{path}: duplicate (u, v) rows leave grid points undefined")
    return SurfacePatch.from_positions(u, v, X)


# -- pipelines ----------------------------------------------------------------------

def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def build_patch(cfg: SceneConfig) -> SurfacePatch:
    if cfg.patch_file is not None:
        patch = load_patch_csv(cfg.patch_file)
    else:
        patch = solve(cfg.bjorling_input())
    if cfg.perturbation is not None:
        patch = normal_perturbation(patch, cfg.perturbation.amplitude, seed=cfg.perturbation.seed)
    return patch


def forms_summary(patch: SurfacePatch, forms, tol: Tolerances):
    dEG, dF = forms.conformality_defect()
    max_h = float(np.max(np.abs(forms.H)))
    return {
        "derivatives": patch.provenance,
        "resolution": [int(patch.shape[1]), int(patch.shape[0])],
        "diameter": patch.diameter,
        "max_abs_H": max_h,
        "max_abs_H_tolerance": tol.minimal / max(patch.diameter, 1e-300),
        "mean_H": float(np.mean(forms.H)),
        "K_range": [float(np.min(forms.K)), float(np.max(forms.K))],
        "conformality": {"max_rel_E_minus_G": dEG, "max_rel_F": dF},
    }


def hopf_summary(forms):
    try:
        hopf = hopf_differential(forms)
    except NonConformalError as exc:
        return None, {"status": "skipped", "reason": str(exc)}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", NonCMCWarning)
        cr = cr_residual(hopf)
    out = {
        "status": "computed",
        "max_abs_phi": float(np.max(np.abs(hopf.phi))),
        "mean_phi": [float(np.mean(hopf.phi.real)), float(np.mean(hopf.phi.imag))],
        "totally_umbilic": hopf.totally_umbilic,
        "cr_residual": cr,
        "cmc": not any(issubclass(w.category, NonCMCWarning) for w in caught),
    }
    try:
        rep = find_umbilics(hopf)
        ph = poincare_hopf_check(rep)
        out["umbilics"] = [{"u": p.u, "v": p.v, "index": p.index, "edge": p.edge} for p in rep.umbilics]
        out["poincare_hopf"] = {"index_sum": ph.index_sum, "euler_characteristic": ph.euler_characteristic,
                                "outcome": ph.outcome, "tolerance": 0.1,
                                "skipped_edges": list(rep.skipped_edges)}
    except ValueError as exc:
        out["poincare_hopf"] = {"outcome": f"skipped: {exc}"}
    return hopf, out


def boundary_summaries(patch: SurfacePatch, cfg: SceneConfig):
    reports, out = [], []
    if not patch.periodic:
        return reports, out
    planes = cfg.plane_specs() or [None, None]
    tol = cfg.tolerances
    for edge, plane in zip(("v_min", "v_max"), planes):
        try:
            r = bd.boundary_report(patch, edge, plane, tol.planar, tol.tangency)
        except ValueError as exc:
            out.append({"edge": edge, "error": f"{type(exc).__name__}: {exc}"})
            continue
        reports.append(r)
        s = r.summary()
        s["tolerances"] = {"planar": tol.planar, "tangency": tol.tangency}
        out.append(s)
    if len(reports) == 2:
        fluxes = [r.flux for r in reports]
        geo = bd.flux_geometry_check(fluxes, [r.plane for r in reports], tol.perpendicularity, patch.diameter)
        out.append({"flux_geometry": geo.to_dict(), "tolerance": tol.perpendicularity,
                    "total_curvature_rad": bd.total_boundary_curvature(reports)})
    return reports, out


@dataclass
class RunResult:
    exit_code: int
    report: Dict[str, Any]
    artifacts: List[str]


def comparable(report: Dict[str, Any]) -> Dict[str, Any]:
    """The report without its wall-clock provenance, as used by ``--compare``."""
    out = json.loads(json.dumps(report))
    out.get("provenance", {}).pop("wall_clock", None)
    return out


def report_text(report: Dict[str, Any]) -> str:
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


def run(cfg: SceneConfig, out_dir=".", seed: Optional[int] = None, export_only=False) -> RunResult:
    """Execute one scene and write its artifacts under ``out_dir``.

    Raises the library's ``ValueError`` subclasses on invalid input; the
    command-line wrapper maps those to exit code 2.
    """
    started = time.time()
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    if seed is not None and cfg.perturbation is not None:
        cfg = replace(cfg, perturbation=replace(cfg.perturbation, seed=int(seed)))
    os.makedirs(out_dir, exist_ok=True)
    tol = cfg.tolerances
    patch = build_patch(cfg)
    forms = fundamental_forms(patch)
    results: Dict[str, Any] = {"forms": forms_summary(patch, forms, tol)}
    hopf, results["hopf"] = hopf_summary(forms)
    reports: List = []
    verdict = None
    exit_code = EXIT_OK

    if export_only:
        pass
    elif cfg.mode in ("bjorling", "analyze"):
        reports, results["boundary"] = boundary_summaries(patch, cfg)
        if cfg.mode == "bjorling":
            minimal = results["forms"]["max_abs_H"] * patch.diameter < tol.minimal
            results["minimal"] = {"passed": bool(minimal), "tolerance_relative": tol.minimal}
            exit_code = EXIT_OK if minimal else EXIT_REJECTED
    elif cfg.mode == "certify-catenoid":
        verdict = certify_catenoid(patch, cfg.plane_specs(), tol)
        results["verdict"] = verdict.to_dict()
        reports, _ = boundary_summaries(patch, cfg)
        exit_code = EXIT_OK if verdict.accepted else EXIT_REJECTED
    else:
        verdict = certify_sphere(patch, tol)
        results["verdict"] = verdict.to_dict()
        exit_code = EXIT_OK if verdict.accepted else EXIT_REJECTED

    artifacts = []
    o = cfg.outputs
    if o.mesh:
        artifacts.append(export_mesh(patch, os.path.join(out_dir, o.mesh)))
    if o.fields:
        artifacts.append(export_fields(forms, hopf, os.path.join(out_dir, o.fields)))
    if o.positions:
        artifacts.append(export_positions(patch, os.path.join(out_dir, o.positions)))
    if o.figures:
        artifacts.extend(_figures(out_dir, patch, forms, hopf, reports, verdict))

    report = {
        "schema": REPORT_SCHEMA,
        "version": REPORT_VERSION,
        "mode": "export" if export_only else cfg.mode,
        "config": cfg.to_dict(),
        "seed": None if cfg.perturbation is None else cfg.perturbation.seed,
        "results": results,
        "exit_code": exit_code,
        "artifacts": sorted(os.path.basename(a) for a in artifacts),
        "provenance": {
            "resolution": [int(patch.shape[1]), int(patch.shape[0])],
            "derivatives": patch.provenance,
            "tolerances": asdict(tol),
            "tolerance_note": "thresholds are engineering choices; no quantitative stability bound backs them",
            "wall_clock": {"started_utc": stamp, "seconds": None},
        },
    }
    report = _clean(report)
    report["provenance"]["wall_clock"]["seconds"] = round(time.time() - started, 3)
    path = os.path.join(out_dir, o.report)
    atomic_write_text(path, report_text(report))
    artifacts.append(path)
    return RunResult(exit_code, report, artifacts)


def _figures(out_dir, patch, forms, hopf, reports, verdict):
    from . import plotting

    paths = [plotting.plot_surface(patch, os.path.join(out_dir, "surface.png"), values=forms.H, label="H"),
             plotting.plot_fields(forms, hopf, os.path.join(out_dir, "fields.png"))]
    if reports:
        paths.append(plotting.plot_boundary(reports, os.path.join(out_dir, "boundary.png")))
    if verdict is not None and verdict.model is not None:
        paths.append(plotting.plot_fit_residuals(patch.points, verdict.model,
                                                 os.path.join(out_dir, "fit_residuals.png"),
                                                 title=f"verdict: {verdict.kind}"))
    return paths


# -- argument handling --------------------------------------------------------------

SUBCOMMANDS = {
    "solve": "bjorling",
    "analyze": "analyze",
    "certify-catenoid": "certify-catenoid",
    "certify-sphere": "certify-sphere",
    "export": None,
}


def _resolution(text):
    try:
        nu, nv = text.lower().split("x")
        return int(nu), int(nv)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected NUxNV (e.g. 256x64), got {text!r}") from None


def _seed(text):
    try:
        s = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= s < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return s


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML scene file")
    common.add_argument("--out", default=".", help="output directory (default: current directory)")
    common.add_argument("--resolution", type=_resolution, help="grid size NUxNV, overrides the config")
    common.add_argument("--theta", type=float, help="contact angle in radians; replaces the surface source")
    common.add_argument("--seed", type=_seed, help="seed for the configured perturbation")
    common.add_argument("--compare", metavar="REPORT",
                        help="compare the new report with REPORT, ignoring wall-clock provenance")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="minsurf", description="Björling solver, surface analysis "
                                     "and catenoid/sphere certification")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def resolve_config(args) -> SceneConfig:
    if args.config:
        cfg = load_config(args.config)
    elif args.theta is not None:
        cfg = SceneConfig(theta=args.theta)
    else:
        raise ConfigError("no surface: pass --config or --theta")
    if args.theta is not None and args.config:
        cfg = replace(cfg, theta=args.theta, curve=None, normal=None, patch_file=None)
    if args.resolution is not None:
        nu, nv = args.resolution
        if nu < 2 or nv < 2:
            raise ConfigError(f"--resolution: need at least 2x2, got {nu}x{nv}")
        cfg = replace(cfg, domain=replace(cfg.domain, resolution=(nu, nv)))
    mode = SUBCOMMANDS[args.command]
    if mode is not None:
        cfg = replace(cfg, mode=mode)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        result = run(cfg, args.out, seed=args.seed, export_only=args.command == "export")
    except (ConfigError, BjorlingInputError, PatchError, MeshExportError, DegenerateImmersionError,
            SeriesError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID

    res = result.report["results"]
    if "verdict" in res:
        v = res["verdict"]
        line = f"verdict: {v['kind']}"
        if v["failing_stage"]:
            line += f" (first failing stage: {v['failing_stage']})"
        print(line)
    elif "minimal" in res:
        print(f"max |H| = {res['forms']['max_abs_H']:.3e} ({'minimal' if res['minimal']['passed'] else 'not minimal'})")
    for a in result.artifacts:
        print(f"wrote {a}")

    if args.compare:
        try:
            with open(args.compare, encoding="utf-8") as fh:
                previous = json.load(fh)
        except (OSError, ValueError) as exc:
            print(f"error: cannot read comparison report {args.compare}: {exc}", file=sys.stderr)
            return EXIT_INVALID
        same = report_text(comparable(previous)) == report_text(comparable(result.report))
        print("compare: identical" if same else "compare: reports differ")
        if not same:
            return EXIT_REJECTED
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())

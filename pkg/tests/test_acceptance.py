"""Acceptance criteria 1-9, one ``record`` line per checked property."""

import json
import time

import numpy as np
from scipy.spatial.transform import Rotation

from minsurf import boundary as bd
from minsurf.bjorling import circle_with_contact_angle, helicoid_axis_input, solve, twisted_circle_input
from minsurf.certify import certify_catenoid, certify_sphere
from minsurf.cli import comparable, main, report_text
from minsurf.diffgeo import (
    boundary_rotation_index,
    cr_residual,
    find_umbilics,
    fundamental_forms,
    hopf_differential,
    line_field_from_hopf_values,
    poincare_hopf_check,
    rectangle_loop,
    rotation_index,
)
from minsurf.surfaces import flat_annulus, normal_perturbation, plane_patch, sphere_cap, standard_catenoid

from conftest import ANGLES, record

Z = bd.PlaneSpec(np.array([0.0, 0.0, 1.0]), 0.0)


def _deg(th):
    return f"theta={np.degrees(th):.0f}deg"


def expected_rotated_catenoid(theta, u, v):
    """Rotated-catenoid formula exactly as stated for the criterion."""
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([np.cos(u) * np.cosh(v) - c * np.sin(u) * np.sinh(v),
                     np.sin(u) * np.cosh(v) + c * np.cos(u) * np.sinh(v),
                     s * v + 0 * u], axis=-1)


def test_criterion_1_closed_form():
    ok = True
    t0 = time.perf_counter()
    patches = {th: solve(circle_with_contact_angle(th, v_range=(-1.0, 1.0), resolution=(256, 64)))
               for th in ANGLES}
    elapsed = time.perf_counter() - t0
    for th, p in patches.items():
        U, V = np.meshgrid(p.u, p.v)
        err = float(np.max(np.abs(p.X - expected_rotated_catenoid(th, U, V))))
        ok &= record(1, f"closed form {_deg(th)}", err < 1e-10, f"max error {err:.2e}, tol 1e-10")
    ok &= record(1, "runtime", elapsed < 5.0, f"{elapsed:.2f} s for three solves, limit 5 s")
    assert ok


def test_criterion_2_minimal_and_conformal(catenoids):
    ok = True
    for th, p in catenoids.items():
        f = fundamental_forms(p)
        h = float(np.max(np.abs(f.H)))
        eg = float(np.max(np.abs(f.E - f.G) / f.E))
        fe = float(np.max(np.abs(f.F) / f.E))
        ok &= record(2, _deg(th), max(h, eg, fe) < 1e-8,
                     f"max|H| {h:.1e}, |E-G|/E {eg:.1e}, |F|/E {fe:.1e}, tol 1e-8")
    assert ok


def test_criterion_3_flux(catenoids):
    ok = True
    for th, p in catenoids.items():
        r1, r2 = bd.boundary_report(p, "v_min"), bd.boundary_report(p, "v_max")
        closure = float(np.linalg.norm(r1.flux + r2.flux))
        angles = [bd._line_angle(r.flux, r.plane.normal) for r in (r1, r2)]
        ok &= record(3, f"closure {_deg(th)}", closure < 1e-9 * 2 * np.pi, f"|flux1+flux2| {closure:.1e}")
        ok &= record(3, f"flux along plane normal {_deg(th)}", max(angles) < 1e-8,
                     f"max angle {max(angles):.1e} rad")
        half = solve(circle_with_contact_angle(th, v_range=(0.0, 1.0), resolution=(256, 33)))
        flux = bd.conormal_flux(half, "v_min")
        err = float(np.max(np.abs(flux - [0, 0, -2 * np.pi * np.sin(th)])))
        ok &= record(3, f"single-edge flux {_deg(th)}", err < 1e-8, f"error {err:.1e}")
    assert ok


def test_criterion_4_hopf():
    ok = True
    hopf = hopf_differential(fundamental_forms(standard_catenoid(resolution=(256, 64))))
    err = float(np.max(np.abs(hopf.phi + 1)))
    ok &= record(4, "standard catenoid Phi = -1", err < 1e-8, f"max|Phi+1| {err:.1e}")
    res = []
    for n in (64, 128, 256):
        p = solve(twisted_circle_input(v_range=(-0.5, 0.5), resolution=(n + 1, n // 4 + 1)))
        res.append(cr_residual(hopf_differential(fundamental_forms(p))))
    ratios = [res[0] / res[1], res[1] / res[2]]
    ok &= record(4, "CR residual order h^2", all(3.5 <= r <= 4.5 for r in ratios),
                 "ratios " + ", ".join(f"{r:.3f}" for r in ratios))
    assert ok


def test_criterion_5_indices():
    ok = True
    u = np.linspace(-1, 1, 41)
    U, V = np.meshgrid(u, u)
    idx = rotation_index(line_field_from_hopf_values(u, u, U + 1j * V), rectangle_loop(10, 30, 10, 30))
    ok &= record(5, "interior index of Phi = w", abs(idx.raw + 0.5) <= 0.05, f"raw {idx.raw:.4f}")
    v = np.linspace(0, 1, 21)
    U, V = np.meshgrid(u, v)
    bidx = boundary_rotation_index(line_field_from_hopf_values(u, v, U + 1j * V), 20, "v_min")
    ok &= record(5, "half-disk boundary index", abs(bidx.raw + 0.25) <= 0.05, f"raw {bidx.raw:.4f}")
    p = solve(circle_with_contact_angle(np.pi / 3, v_range=(-1.0, 1.0), resolution=(256, 64)))
    ph = poincare_hopf_check(find_umbilics(hopf_differential(fundamental_forms(p))))
    ok &= record(5, "catenoid annulus Poincare-Hopf", ph.passed and ph.index_sum == 0,
                 f"index sum {ph.index_sum}, chi {ph.euler_characteristic}")
    assert ok


def test_criterion_6_curvature(catenoids):
    ok = True
    for th, p in catenoids.items():
        worst = max(bd.curvature_relation_check(bd.boundary_report(p, e)).max_residual
                    for e in ("v_min", "v_max"))
        ok &= record(6, f"kappa = kappa_planar sin(theta) {_deg(th)}", worst < 1e-8, f"max residual {worst:.1e}")
    lower = solve(circle_with_contact_angle(np.pi / 3, v_range=(0.0, 1.0), resolution=(256, 33)))
    upper = solve(circle_with_contact_angle(np.pi / 6, v_range=(-1.0, 0.0), resolution=(256, 33)))
    total = bd.total_boundary_curvature([bd.boundary_report(lower, "v_min", Z),
                                         bd.boundary_report(upper, "v_max", Z)])
    ok &= record(6, "total curvature of two unit circles", abs(total - 4 * np.pi) < 1e-8,
                 f"|total - 4pi| {abs(total - 4 * np.pi):.1e}")
    assert ok


def test_criterion_7_certification(catenoids):
    ok = True
    t0 = time.perf_counter()
    for th, p in catenoids.items():
        v = certify_catenoid(p)
        m = v.model
        axis_err = float(np.arccos(min(1.0, abs(m.axis[2])))) if m is not None else np.inf
        waist_err = abs(m.waist - np.sin(th)) / np.sin(th) if m is not None else np.inf
        passed = v.accepted and v.rms < 1e-8 and axis_err < 1e-8 and waist_err < 1e-6
        ok &= record(7, f"accept catenoid {_deg(th)}", passed,
                     f"residual {v.rms:.1e}, axis {axis_err:.1e} rad, waist rel {waist_err:.1e}")
    negatives = {
        "helicoid": solve(helicoid_axis_input(v_range=(-1.0, 1.0), resolution=(256, 64))),
        "plane (flat Bjorling annulus)": solve(circle_with_contact_angle(0.0, v_range=(-1.0, 1.0),
                                                                          resolution=(256, 64))),
        "plane (flat annulus)": flat_annulus(),
        "plane (square)": plane_patch(),
        "1e-2 perturbed catenoid": normal_perturbation(catenoids[np.pi / 3], 1e-2, seed=7),
    }
    for name, p in negatives.items():
        v = certify_catenoid(p)
        ok &= record(7, f"reject {name}", not v.accepted, f"first failing stage {v.failing_stage}")
    for R, c in ((1.0, (0, 0, 0)), (2.5, (1.0, -2.0, 0.5))):
        v = certify_sphere(sphere_cap(R, c))
        cerr = float(np.max(np.abs(v.model.center - c))) if v.model is not None else np.inf
        rerr = abs(v.model.radius - R) if v.model is not None else np.inf
        ok &= record(7, f"accept sphere cap R={R}", v.accepted and cerr < 1e-8 and rerr < 1e-8,
                     f"center {cerr:.1e}, radius {rerr:.1e}")
    for name, p in (("catenoid", catenoids[np.pi / 2]), ("helicoid", negatives["helicoid"])):
        v = certify_sphere(p)
        ok &= record(7, f"sphere path rejects minimal {name}", not v.accepted,
                     f"first failing stage {v.failing_stage}")
    elapsed = time.perf_counter() - t0
    ok &= record(7, "certification runtime", elapsed < 60, f"{elapsed:.1f} s")
    assert ok


def test_criterion_8_equivariance(catenoids):
    rng = np.random.default_rng(2024)
    cat = catenoids[np.pi / 3]
    cap = sphere_cap(1.5, (0.2, 0.1, -0.3))
    base, sbase = certify_catenoid(cat), certify_sphere(cap)
    worst = {"residual": 0.0, "axis": 0.0, "waist point": 0.0, "waist radius": 0.0, "sphere": 0.0}
    verdicts = True
    for _ in range(20):
        R = Rotation.random(random_state=rng).as_matrix()
        t = rng.uniform(-3, 3, 3)
        v = certify_catenoid(cat.transformed(R, t))
        verdicts &= v.kind == base.kind and v.failing_stage == base.failing_stage
        bm, m = base.model, v.model
        worst["residual"] = max(worst["residual"], abs(v.rms - base.rms))
        worst["axis"] = max(worst["axis"], 1 - abs(m.axis @ (R @ bm.axis)))
        c0 = R @ (bm.point + bm.offset * bm.axis) + t
        worst["waist point"] = max(worst["waist point"],
                                   float(np.linalg.norm(m.point + m.offset * m.axis - c0)))
        worst["waist radius"] = max(worst["waist radius"], abs(m.waist - bm.waist))
        s = certify_sphere(cap.transformed(R, t))
        verdicts &= s.kind == sbase.kind
        worst["sphere"] = max(worst["sphere"], float(np.linalg.norm(s.model.center - (R @ sbase.model.center + t))),
                              abs(s.model.radius - sbase.model.radius), abs(s.rms - sbase.rms))
    drift = max(worst.values())
    ok = record(8, "20 rigid motions", verdicts and drift < 1e-9,
                ", ".join(f"{k} {val:.1e}" for k, val in worst.items()))
    assert ok


def test_criterion_9_determinism(tmp_path):
    cfg = tmp_path / "scene.yaml"
    cfg.write_text("mode: analyze\n"
                   "surface:\n  theta: 1.0\n  perturbation: {amplitude: 1.0e-3, seed: 11}\n"
                   "domain:\n  v_range: [-1, 1]\n  resolution: [64, 17]\n"
                   "outputs: {figures: false}\n")
    a, b = tmp_path / "a", tmp_path / "b"
    first = main(["analyze", "--config", str(cfg), "--seed", "5", "--out", str(a)])
    second = main(["analyze", "--config", str(cfg), "--seed", "5", "--out", str(b),
                   "--compare", str(a / "report.json")])
    ra = json.loads((a / "report.json").read_text())
    rb = json.loads((b / "report.json").read_text())
    same_report = report_text(comparable(ra)) == report_text(comparable(rb))
    same_files = all((a / f).read_bytes() == (b / f).read_bytes() for f in ("surface.obj", "fields.csv", "patch.csv"))
    ok = record(9, "repeated run in compare mode", first == 0 and second == 0 and same_report and same_files,
                f"exit codes {first}/{second}, reports identical {same_report}, exports identical {same_files}")
    assert ok

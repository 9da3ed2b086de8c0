"""Diagnostic figures written next to the CLI's mesh, CSV and report outputs.

Figures are built on bare :class:`matplotlib.figure.Figure` objects, so no
pyplot state or interactive backend is involved.
"""

from __future__ import annotations

import os
import tempfile
from typing import Optional, Sequence

import numpy as np
from matplotlib.figure import Figure

from .patch import SurfacePatch


def _save(fig: Figure, path):
    # atomic like the other artifacts: render to a sibling temp file, then rename
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", suffix=os.path.splitext(path)[1], dir=d)
    os.close(fd)
    try:
        fig.savefig(tmp, dpi=120, metadata={"Software": None})
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)
    return path


def plot_surface(patch: SurfacePatch, path, values=None, label="H", title=None):
    """Shaded 3D view of the patch, coloured by ``values`` on the grid when given."""
    fig = Figure(figsize=(6, 5))
    ax = fig.add_subplot(projection="3d")
    X = patch.X
    nv, nu = patch.shape
    stride = (max(nv // 48, 1), max(nu // 96, 1))
    kw = dict(rstride=stride[0], cstride=stride[1], linewidth=0, antialiased=True)
    if values is not None:
        vals = np.asarray(values, dtype=float)
        lo, hi = float(np.min(vals)), float(np.max(vals))
        span = hi - lo if hi > lo else 1.0
        from matplotlib import cm

        colours = cm.viridis((vals - lo) / span)
        ax.plot_surface(X[..., 0], X[..., 1], X[..., 2], facecolors=colours, shade=False, **kw)
        sm = cm.ScalarMappable(cmap="viridis")
        sm.set_clim(lo, hi)
        fig.colorbar(sm, ax=ax, shrink=0.6, label=label)
    else:
        ax.plot_surface(X[..., 0], X[..., 1], X[..., 2], color="#8fb3d9", **kw)
    lo, hi = X.reshape(-1, 3).min(axis=0), X.reshape(-1, 3).max(axis=0)
    ax.set_box_aspect(np.maximum(hi - lo, 1e-3 * max(np.max(hi - lo), 1e-12)))
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_zlabel("z")
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_fields(forms, hopf, path):
    """Heat maps of H, K and |Phi| over the parameter rectangle."""
    panels = [("H", forms.H), ("K", forms.K)]
    if hopf is not None:
        panels.append(("|Phi|", np.abs(hopf.phi)))
    fig = Figure(figsize=(4 * len(panels), 3.4), layout="constrained")
    extent = (forms.u[0], forms.u[-1], forms.v[0], forms.v[-1])
    for k, (name, data) in enumerate(panels):
        ax = fig.add_subplot(1, len(panels), k + 1)
        im = ax.imshow(data, origin="lower", aspect="auto", extent=extent, cmap="magma")
        fig.colorbar(im, ax=ax)
        ax.set_title(name)
        ax.set_xlabel("u")
        if k == 0:
            ax.set_ylabel("v")
    return _save(fig, path)


def plot_boundary(reports: Sequence, path):
    """Contact angle and the curvature relation along each boundary component."""
    fig = Figure(figsize=(9, 3.6), layout="constrained")
    ax1 = fig.add_subplot(1, 2, 1)
    ax2 = fig.add_subplot(1, 2, 2)
    for r in reports:
        t = np.linspace(0.0, 1.0, len(r.theta))
        ax1.plot(t, r.theta, label=r.edge)
        rhs = r.orientation * r.planar_curvature * np.sin(r.theta)
        ax2.plot(t, r.normal_curvature, label=f"{r.edge}: normal curvature")
        ax2.plot(t, rhs, "--", label=f"{r.edge}: planar curvature x sin(theta)")
    ax1.set_xlabel("normalized boundary parameter")
    ax1.set_ylabel("contact angle [rad]")
    ax2.set_xlabel("normalized boundary parameter")
    ax2.set_ylabel("curvature")
    ax1.legend(fontsize=8)
    ax2.legend(fontsize=7)
    return _save(fig, path)


def plot_fit_residuals(points, model, path, title: Optional[str] = None):
    """Residuals of a fitted model against the axial coordinate (catenoid) or index."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    res = model.residuals(pts)
    fig = Figure(figsize=(6, 3.6), layout="constrained")
    ax = fig.add_subplot()
    if hasattr(model, "cylindrical"):
        _, h = model.cylindrical(pts)
        ax.plot(h, res, ".", ms=2)
        ax.set_xlabel("axial coordinate")
    else:
        ax.plot(res, ".", ms=2)
        ax.set_xlabel("sample")
    ax.set_ylabel("residual")
    ax.axhline(0.0, color="k", lw=0.5)
    if title:
        ax.set_title(title)
    return _save(fig, path)

"""Rectangular surface patches sampled on a parameter grid.

Arrays are stored with shape ``(nv, nu, 3)``: row ``j`` is the curve
``v = v[j]`` and flattening gives u-fastest order.  A periodic patch keeps
the seam column twice (``u[0]`` and ``u[-1] = u[0] + period``).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import RectBivariateSpline

ANALYTIC = "analytic"
FINITE_DIFFERENCE = "finite-difference"

EDGES = ("v_min", "v_max", "u_min", "u_max")


class PatchError(ValueError):
    """Malformed grid or unsupported patch operation."""


def fornberg_weights(x0, x, m):
    """Finite-difference weights for derivatives 0..m at ``x0`` on nodes ``x``.

    Returns an array of shape ``(len(x), m + 1)``.  Fornberg's recursion, valid
    for arbitrary distinct nodes.
    """
    n = len(x)
    c = np.zeros((n, m + 1))
    c1 = 1.0
    c4 = x[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


def difference_matrix(x, order, npts=9):
    """Dense matrix applying the ``order``-th derivative with ``npts``-point stencils.

    Stencils are centred where possible and shift to one-sided near the ends.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    npts = min(npts, n)
    if npts <= order:
        raise PatchError(f"need more than {order} samples to differentiate, got {n}")
    d = np.zeros((n, n))
    half = npts // 2
    for i in range(n):
        lo = min(max(i - half, 0), n - npts)
        idx = np.arange(lo, lo + npts)
        d[i, idx] = fornberg_weights(x[i], x[idx], order)[:, order]
    return d


def _spectral(values, period, axis, order):
    # values exclude the duplicated seam
    n = values.shape[axis]
    k = np.fft.fftfreq(n, d=period / n) * 2 * np.pi
    if order % 2 == 1 and n % 2 == 0:
        k[n // 2] = 0.0
    shape = [1] * values.ndim
    shape[axis] = n
    mult = ((1j * k) ** order).reshape(shape)
    return np.fft.ifft(np.fft.fft(values, axis=axis) * mult, axis=axis).real


def _check_monotone(name, x):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise PatchError(f"{name} grid must be one-dimensional")
    if x.size > 1 and not np.all(np.diff(x) > 0):
        raise PatchError(f"{name} grid must be strictly increasing")
    return x


def grid_derivatives(u, v, X, periodic=False, npts=9):
    """First and second derivatives of gridded positions.

    u-derivatives are spectral (FFT) on periodic grids with a duplicated seam
    and high-order finite differences otherwise; v-derivatives always use
    finite differences.
    """
    u = _check_monotone("u", u)
    v = _check_monotone("v", v)

    def du(a, order):
        if periodic:
            inner = a[:, :-1]
            d = _spectral(inner, u[-1] - u[0], axis=1, order=order)
            return np.concatenate([d, d[:, :1]], axis=1)
        return np.einsum("ik,jkc->jic", difference_matrix(u, order, npts), a)

    def dv(a, order):
        return np.einsum("jk,kic->jic", difference_matrix(v, order, npts), a)

    Xu = du(X, 1)
    Xv = dv(X, 1)
    return Xu, Xv, du(X, 2), dv(Xu, 1), dv(X, 2)


@dataclass(frozen=True, eq=False)
class SurfacePatch:
    """Sampled immersion ``X(u, v)`` with first and second derivatives.

    ``evaluator``, when present, maps arrays ``(u, v)`` to ``(X, X_u, X_v)``
    exactly (Björling patches carry one); otherwise :meth:`evaluate` falls back
    to a quintic spline of the samples.
    """

    u: np.ndarray
    v: np.ndarray
    X: np.ndarray
    Xu: np.ndarray
    Xv: np.ndarray
    Xuu: np.ndarray
    Xuv: np.ndarray
    Xvv: np.ndarray
    provenance: str = ANALYTIC
    periodic: bool = False
    topology: str = "disk"
    evaluator: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        u = _check_monotone("u", self.u)
        v = _check_monotone("v", self.v)
        shape = (v.size, u.size, 3)
        for name in ("X", "Xu", "Xv", "Xuu", "Xuv", "Xvv"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise PatchError(f"{name} has shape {arr.shape}, expected {shape}")
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        if self.provenance not in (ANALYTIC, FINITE_DIFFERENCE):
            raise PatchError(f"unknown derivative provenance {self.provenance!r}")

    @classmethod
    def from_positions(cls, u, v, X, periodic=None, topology=None, seam_tol=1e-10):
        """Build a finite-difference patch from positions alone.

        Periodicity in u is detected from coincident seam columns when not given.
        """
        u = _check_monotone("u", u)
        v = _check_monotone("v", v)
        X = np.asarray(X, dtype=float)
        if X.shape != (v.size, u.size, 3):
            raise PatchError(f"positions have shape {X.shape}, expected {(v.size, u.size, 3)}")
        if u.size < 2 or v.size < 2:
            raise PatchError("a patch needs at least 2 samples in each direction")
        if periodic is None:
            scale = cloud_diameter(X)
            periodic = bool(np.max(np.abs(X[:, 0] - X[:, -1])) < seam_tol * max(scale, 1.0))
        if periodic and not np.allclose(np.diff(u), (u[-1] - u[0]) / (u.size - 1), rtol=1e-9, atol=0):
            raise PatchError("spectral u-derivatives need a uniform periodic u grid")
        if topology is None:
            topology = "annulus" if periodic else "disk"
        derivs = grid_derivatives(u, v, X, periodic=periodic)
        return cls(u, v, X, *derivs, provenance=FINITE_DIFFERENCE,
                   periodic=periodic, topology=topology)

    # -- geometry ---------------------------------------------------------

    @property
    def shape(self):
        return self.X.shape[:2]

    @property
    def diameter(self) -> float:
        """Length scale for relative tolerances; see :func:`cloud_diameter`."""
        return cloud_diameter(self.X)

    @property
    def normal(self):
        n = np.cross(self.Xu, self.Xv)
        return n / np.linalg.norm(n, axis=-1, keepdims=True)

    @property
    def points(self):
        """Samples as an ``(n, 3)`` array, without the duplicated seam."""
        X = self.X[:, :-1] if self.periodic else self.X
        return X.reshape(-1, 3)

    def seam_defect(self) -> float:
        return float(np.max(np.linalg.norm(self.X[:, 0] - self.X[:, -1], axis=-1)))

    def edge(self, name):
        """Index expression selecting an edge curve; see :data:`EDGES`."""
        if name == "v_min":
            return np.s_[0, :]
        if name == "v_max":
            return np.s_[-1, :]
        if name == "u_min":
            return np.s_[:, 0]
        if name == "u_max":
            return np.s_[:, -1]
        raise PatchError(f"unknown edge {name!r}; expected one of {EDGES}")

    def edge_is_closed(self, name) -> bool:
        return name in ("v_min", "v_max") and self.periodic

    # -- evaluation and transforms ----------------------------------------

    def evaluate(self, u, v):
        """Positions and first derivatives at arbitrary parameters."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.periodic:
            period = self.u[-1] - self.u[0]
            u = self.u[0] + np.mod(u - self.u[0], period)
        if self.evaluator is not None:
            return self.evaluator(u, v)
        return self._spline()(u, v)

    def _spline(self):
        cached = self.__dict__.get("_spline_cache")
        if cached is None:
            cached = _GridSpline(self)
            object.__setattr__(self, "_spline_cache", cached)
        return cached

    def transformed(self, rotation=None, translation=None, scale=1.0) -> "SurfacePatch":
        """Image under ``x -> scale * R x + t``."""
        r = np.eye(3) if rotation is None else np.asarray(rotation, dtype=float)
        t = np.zeros(3) if translation is None else np.asarray(translation, dtype=float)
        lin = scale * r

        def apply(a):
            return a @ lin.T

        evaluator = None
        if self.evaluator is not None:
            base = self.evaluator

            def evaluator(u, v):
                X, Xu, Xv = base(u, v)
                return apply(X) + t, apply(Xu), apply(Xv)

        return replace(
            self,
            X=apply(self.X) + t,
            Xu=apply(self.Xu),
            Xv=apply(self.Xv),
            Xuu=apply(self.Xuu),
            Xuv=apply(self.Xuv),
            Xvv=apply(self.Xvv),
            evaluator=evaluator,
        )

    def with_positions(self, X) -> "SurfacePatch":
        """Same grid, new positions, derivatives recomputed by finite differences."""
        return SurfacePatch.from_positions(self.u, self.v, X, periodic=self.periodic,
                                           topology=self.topology)


class _GridSpline:
    """Quintic tensor spline of each coordinate, padded periodically if needed."""

    PAD = 8

    def __init__(self, patch: SurfacePatch):
        u, v, X = patch.u, patch.v, patch.X
        if patch.periodic:
            period = u[-1] - u[0]
            inner_u, inner_X = u[:-1], X[:, :-1]
            p = min(self.PAD, inner_u.size)
            u = np.concatenate([inner_u[-p:] - period, inner_u, inner_u[:p + 1] + period])
            X = np.concatenate([inner_X[:, -p:], inner_X, inner_X[:, :p + 1]], axis=1)
        kv = min(5, v.size - 1)
        ku = min(5, u.size - 1)
        self.splines = [RectBivariateSpline(v, u, X[..., c], kx=kv, ky=ku) for c in range(3)]
        self.v_lo, self.v_hi = patch.v[0], patch.v[-1]

    def __call__(self, u, v):
        v = np.clip(v, self.v_lo, self.v_hi)
        X = np.stack([s.ev(v, u) for s in self.splines], axis=-1)
        Xu = np.stack([s.ev(v, u, dy=1) for s in self.splines], axis=-1)
        Xv = np.stack([s.ev(v, u, dx=1) for s in self.splines], axis=-1)
        return X, Xu, Xv


def cloud_diameter(points) -> float:
    """Twice the largest distance from the centroid.

    Unlike a bounding-box diagonal this is invariant under rotations, so
    relative tolerances do not depend on how a patch is placed.  It lies
    between the true diameter and twice it.
    """
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    if p.size == 0:
        return 0.0
    return float(2 * np.max(np.linalg.norm(p - p.mean(axis=0), axis=-1)))


def patch_from_function(func, u, v, periodic=False, topology="disk"):
    """Analytic patch from ``func(U, V) -> (X, Xu, Xv, Xuu, Xuv, Xvv)`` on a meshgrid.

    ``func`` must accept broadcast arrays; the first three outputs double as
    the exact evaluator.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    U, V = np.meshgrid(u, v)
    parts = func(U, V)

    def evaluator(uu, vv):
        return tuple(func(uu, vv)[:3])

    return SurfacePatch(u, v, *parts, provenance=ANALYTIC, periodic=periodic,
                        topology=topology, evaluator=evaluator)

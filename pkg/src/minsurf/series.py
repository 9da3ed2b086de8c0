"""Trigonometric polynomials with vector coefficients.

A :class:`TrigSeries3` represents a map ``t -> R^3`` of the form

    a_0 + sum_j (a_j cos(jt) + b_j sin(jt)) + alpha * t

with real coefficients.  Every such map is entire, so evaluating it at a
complex argument is its (unique) analytic continuation.  Differentiation,
integration from zero and the pointwise cross product are carried out on the
coefficients, exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_MAX_DEGREE = 256


class SeriesError(ValueError):
    """Raised when a result is not representable in the series algebra."""


def _as_coeffs(arr, degree):
    out = np.zeros((degree + 1, 3))
    arr = np.asarray(arr, dtype=float)
    if arr.size:
        out[: arr.shape[0]] = arr
    return out


@dataclass(frozen=True, eq=False)
class TrigSeries3:
    """Truncated trigonometric polynomial ``t -> R^3`` with an optional affine slope.

    Attributes:
        cos: ``(N+1, 3)`` cosine coefficients; row 0 is the constant term.
        sin: ``(N+1, 3)`` sine coefficients; row 0 is ignored and kept at zero.
        slope: ``(3,)`` coefficient of the affine term ``slope * t``.
        max_degree: hard cap on the degree of products.
    """

    cos: np.ndarray
    sin: np.ndarray
    slope: np.ndarray = field(default_factory=lambda: np.zeros(3))
    max_degree: int = DEFAULT_MAX_DEGREE

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.cos, dtype=float))
        s = np.atleast_2d(np.asarray(self.sin, dtype=float))
        if c.shape[1:] != (3,) or s.shape[1:] != (3,):
            raise SeriesError("coefficient arrays must have shape (N+1, 3)")
        degree = max(c.shape[0], s.shape[0]) - 1
        if degree > self.max_degree:
            raise SeriesError(
                f"degree {degree} exceeds the configured cap {self.max_degree}"
            )
        c = _as_coeffs(c, degree)
        s = _as_coeffs(s, degree)
        s[0] = 0.0
        slope = np.asarray(self.slope, dtype=float).reshape(3)
        for name, value in (("cos", c), ("sin", s), ("slope", slope)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    # -- construction -----------------------------------------------------

    @classmethod
    def constant(cls, vector, **kw) -> "TrigSeries3":
        return cls(np.asarray(vector, dtype=float).reshape(1, 3), np.zeros((1, 3)), **kw)

    @classmethod
    def zero(cls, **kw) -> "TrigSeries3":
        return cls.constant(np.zeros(3), **kw)

    @classmethod
    def from_triples(cls, components, slope=None, max_degree=DEFAULT_MAX_DEGREE):
        """Build a series from per-component lists of ``[j, a_j, b_j]`` triples.

        ``components`` is a sequence of three lists; repeated ``j`` accumulate.
        For ``j = 0`` the ``b`` entry is ignored.
        """
        if len(components) != 3:
            raise SeriesError("expected exactly three components")
        degree = 0
        for comp in components:
            for triple in comp:
                if len(triple) != 3:
                    raise SeriesError(f"expected [j, a, b] triples, got {triple!r}")
                j = int(triple[0])
                if j < 0 or j != triple[0]:
                    raise SeriesError(f"mode index must be a non-negative integer, got {triple[0]!r}")
                degree = max(degree, j)
        c = np.zeros((degree + 1, 3))
        s = np.zeros((degree + 1, 3))
        for k, comp in enumerate(components):
            for j, a, b in comp:
                c[int(j), k] += a
                if int(j) > 0:
                    s[int(j), k] += b
        return cls(c, s, np.zeros(3) if slope is None else slope, max_degree=max_degree)

    def to_triples(self):
        """Inverse of :meth:`from_triples`: nonzero modes as ``[j, a, b]`` lists."""
        out = []
        for k in range(3):
            comp = []
            for j in range(self.degree + 1):
                a, b = float(self.cos[j, k]), float(self.sin[j, k])
                if a != 0.0 or b != 0.0:
                    comp.append([j, a, b])
            out.append(comp)
        return out

    # -- properties -------------------------------------------------------

    @property
    def degree(self) -> int:
        return self.cos.shape[0] - 1

    @property
    def has_slope(self) -> bool:
        return bool(np.any(self.slope != 0.0))

    @property
    def is_constant(self) -> bool:
        return not self.has_slope and not (np.any(self.cos[1:]) or np.any(self.sin[1:]))

    def __eq__(self, other):
        if not isinstance(other, TrigSeries3):
            return NotImplemented
        n = max(self.degree, other.degree)
        return (
            np.array_equal(_as_coeffs(self.cos, n), _as_coeffs(other.cos, n))
            and np.array_equal(_as_coeffs(self.sin, n), _as_coeffs(other.sin, n))
            and np.array_equal(self.slope, other.slope)
        )

    def allclose(self, other, atol=1e-14) -> bool:
        n = max(self.degree, other.degree)
        return (
            np.allclose(_as_coeffs(self.cos, n), _as_coeffs(other.cos, n), rtol=0, atol=atol)
            and np.allclose(_as_coeffs(self.sin, n), _as_coeffs(other.sin, n), rtol=0, atol=atol)
            and np.allclose(self.slope, other.slope, rtol=0, atol=atol)
        )

    # -- algebra ----------------------------------------------------------

    def __call__(self, z):
        return evaluate(self, z)

    def __add__(self, other):
        n = max(self.degree, other.degree)
        return TrigSeries3(
            _as_coeffs(self.cos, n) + _as_coeffs(other.cos, n),
            _as_coeffs(self.sin, n) + _as_coeffs(other.sin, n),
            self.slope + other.slope,
            max_degree=max(self.max_degree, other.max_degree),
        )

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, factor: float) -> "TrigSeries3":
        return TrigSeries3(self.cos * factor, self.sin * factor, self.slope * factor,
                           max_degree=self.max_degree)

    def rotate(self, rotation) -> "TrigSeries3":
        """Apply a fixed linear map ``R`` to every coefficient vector."""
        r = np.asarray(rotation, dtype=float)
        return TrigSeries3(self.cos @ r.T, self.sin @ r.T, r @ self.slope,
                           max_degree=self.max_degree)

    def translate(self, offset) -> "TrigSeries3":
        c = self.cos.copy()
        c[0] += np.asarray(offset, dtype=float)
        return TrigSeries3(c, self.sin, self.slope, max_degree=self.max_degree)


def evaluate(s: TrigSeries3, z):
    """Evaluate ``s`` at real or complex ``z`` (scalar or array).

    Returns an array of shape ``np.shape(z) + (3,)``.  Real input gives real
    output; complex input gives the analytic continuation.
    """
    z = np.asarray(z)
    real = np.isrealobj(z)
    z = z.astype(float if real else complex)
    j = np.arange(s.degree + 1)
    jz = z[..., None] * j
    out = np.cos(jz) @ s.cos + np.sin(jz) @ s.sin
    if s.has_slope:
        out = out + z[..., None] * s.slope
    return out


def differentiate(s: TrigSeries3) -> TrigSeries3:
    """Term-wise derivative.  The degree is unchanged."""
    j = np.arange(s.degree + 1)[:, None]
    c = j * s.sin
    c[0] = s.slope
    return TrigSeries3(c, -j * s.cos, np.zeros(3), max_degree=s.max_degree)


def integrate_from_zero(s: TrigSeries3) -> TrigSeries3:
    """Antiderivative vanishing at ``t = 0``.

    The constant mode integrates to the affine term.  A series that already
    carries an affine term would integrate to a quadratic, which is not
    representable.
    """
    if s.has_slope:
        raise SeriesError("cannot integrate an affine term: t**2 is not representable")
    n = s.degree
    c = np.zeros((n + 1, 3))
    sn = np.zeros((n + 1, 3))
    if n:
        j = np.arange(1, n + 1)[:, None]
        sn[1:] = s.cos[1:] / j
        c[1:] = -s.sin[1:] / j
        c[0] = (s.sin[1:] / j).sum(axis=0)
    return TrigSeries3(c, sn, s.cos[0].copy(), max_degree=s.max_degree)


def _exp_coeffs(s: TrigSeries3):
    # exponential-basis coefficients e_m, m = -N..N, shape (2N+1, 3)
    n = s.degree
    e = np.zeros((2 * n + 1, 3), dtype=complex)
    e[n] = s.cos[0]
    e[n + 1:] = (s.cos[1:] - 1j * s.sin[1:]) / 2
    e[:n][::-1] = (s.cos[1:] + 1j * s.sin[1:]) / 2
    return e


def _from_exp(e, max_degree):
    n = (e.shape[0] - 1) // 2
    pos = e[n + 1:]
    neg = e[:n][::-1]
    c = np.zeros((n + 1, 3))
    sn = np.zeros((n + 1, 3))
    c[0] = e[n].real
    c[1:] = (pos + neg).real
    sn[1:] = (1j * (pos - neg)).real
    return TrigSeries3(c, sn, max_degree=max_degree)


def _product(ea, eb, ka, kb):
    return np.convolve(ea[:, ka], eb[:, kb])


def cross(a: TrigSeries3, b: TrigSeries3) -> TrigSeries3:
    """Pointwise cross product ``a(t) x b(t)`` as a series of degree ``deg a + deg b``.

    Products of cosine and sine modes are expanded with the product-to-sum
    identities, done here as a convolution in the exponential basis.  An affine
    term is only allowed against a constant partner.
    """
    cap = max(a.max_degree, b.max_degree)
    if a.degree + b.degree > cap:
        raise SeriesError(
            f"product degree {a.degree + b.degree} exceeds the configured cap {cap}"
        )
    if (a.has_slope and not _trig_constant(b)) or (b.has_slope and not _trig_constant(a)):
        raise SeriesError("t * cos(jt) terms are not representable; affine term times non-constant series")
    ea, eb = _exp_coeffs(a), _exp_coeffs(b)
    n = a.degree + b.degree
    e = np.zeros((2 * n + 1, 3), dtype=complex)
    for k, (p, q) in enumerate(((1, 2), (2, 0), (0, 1))):
        e[:, k] = _product(ea, eb, p, q) - _product(ea, eb, q, p)
    out = _from_exp(e, cap)
    if a.has_slope or b.has_slope:
        slope = np.cross(a.slope, b.cos[0]) + np.cross(a.cos[0], b.slope)
        out = TrigSeries3(out.cos, out.sin, slope, max_degree=cap)
    return out


def _trig_constant(s: TrigSeries3) -> bool:
    return not (np.any(s.cos[1:]) or np.any(s.sin[1:])) and not s.has_slope


def dot_samples(a: TrigSeries3, b: TrigSeries3, t):
    """Pointwise dot product sampled at ``t``; used for input validation."""
    return np.einsum("...k,...k->...", evaluate(a, t), evaluate(b, t))

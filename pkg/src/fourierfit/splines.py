"""Uniform B-spline bases on the unit interval, square and cube.

Basis function ``i`` (1-based, ``i = 1..N``) of a space with order ``k`` and
knot spacing ``d`` is the shift ``B(x - i*d)`` of the cardinal B-spline with
knots ``-k*d, ..., -d, 0``.  Its support is ``[(i-k)*d, i*d]`` and the space
has ``N = 1/d + k - 1`` functions per axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np
import numpy.typing as npt
from scipy.optimize import brentq

from .errors import InvalidSpaceError, ShapeError

Array = npt.NDArray[np.float64]


@dataclass(frozen=True)
class SplineSpace:
    order: int
    spacing: float
    axes: int = 1

    def __post_init__(self) -> None:
        if int(self.order) != self.order or self.order < 1:
            raise InvalidSpaceError(f"order must be a positive integer, got {self.order}")
        if not self.spacing > 0:
            raise InvalidSpaceError(f"knot spacing must be positive, got {self.spacing}")
        inv = 1.0 / self.spacing
        if abs(inv - round(inv)) > 1e-9 * inv:
            raise InvalidSpaceError(f"1/spacing must be an integer, got spacing={self.spacing}")
        if self.axes not in (1, 2, 3):
            raise InvalidSpaceError(f"axes must be 1, 2 or 3, got {self.axes}")
        object.__setattr__(self, "order", int(self.order))

    @property
    def intervals(self) -> int:
        """Number of knot intervals in [0, 1]."""
        return int(round(1.0 / self.spacing))

    @property
    def size(self) -> int:
        """Basis functions per axis."""
        return self.intervals + self.order - 1

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.size,) * self.axes

    @property
    def dim(self) -> int:
        return self.size**self.axes

    def axis_space(self) -> SplineSpace:
        return SplineSpace(self.order, self.spacing, 1)

    def support(self, i: int) -> tuple[float, float]:
        return ((i - self.order) / self.intervals, i / self.intervals)

    def to_dict(self) -> dict:
        return {"order": self.order, "spacing": self.spacing, "axes": self.axes}


@lru_cache(maxsize=None)
def piece_coefficients(k: int) -> np.ndarray:
    """Monomial coefficients of the cardinal B-spline pieces.

    Row ``j`` holds ``c`` with ``N_k(j + u) = sum_p c[p] u**p`` for ``u`` in
    ``[0, 1)``, where ``N_k`` is supported on ``[0, k]``.  Computed in exact
    rational arithmetic from the Cox-de Boor recursion.
    """
    pieces = [[Fraction(1)]]
    for q in range(1, k):
        # N_{q+1}(j+u) = ((j+u) N_q(j+u) + (q+1-j-u) N_q(j-1+u)) / q
        new = []
        for j in range(q + 1):
            acc = [Fraction(0)] * (q + 1)
            if j < q:
                p = pieces[j]
                for e, c in enumerate(p):
                    acc[e] += j * c
                    acc[e + 1] += c
            if j >= 1:
                p = pieces[j - 1]
                for e, c in enumerate(p):
                    acc[e] += (q + 1 - j) * c
                    acc[e + 1] -= c
            new.append([c / q for c in acc])
        pieces = new
    out = np.array([[float(c) for c in row] for row in pieces])
    out.setflags(write=False)
    return out


def _local_values(k: int, u: Array) -> Array:
    """Cox-de Boor triangle: the ``k`` nonzero cardinal values at offset ``u``.

    Column ``r`` is ``N_k(k - 1 - r + u)``.
    """
    u = np.asarray(u, dtype=float)
    v = np.ones(u.shape + (1,))
    for q in range(1, k):
        nxt = np.zeros(u.shape + (q + 1,))
        r = np.arange(q + 1)
        left = np.zeros(u.shape + (q + 1,))
        left[..., 1:] = v
        right = np.zeros(u.shape + (q + 1,))
        right[..., :q] = v
        uu = u[..., None]
        nxt = ((q - r + uu) * left + (1 + r - uu) * right) / q
        v = nxt
    return v


def _local_derivative(k: int, u: Array) -> Array:
    """d/dt of the ``k`` nonzero cardinal values (same column layout)."""
    u = np.asarray(u, dtype=float)
    if k == 1:
        return np.zeros(u.shape + (1,))
    v = _local_values(k - 1, u)
    out = np.zeros(u.shape + (k,))
    out[..., 1:] += v
    out[..., : k - 1] -= v
    return out


def bspline_eval(k: int, d: float, x: npt.ArrayLike) -> Array | float:
    """Value of the order-``k`` B-spline with knots ``-k*d, ..., 0`` at ``x``.

    Right-continuous at the knots.
    """
    if int(k) != k or k < 1:
        raise InvalidSpaceError(f"order must be a positive integer, got {k}")
    if not d > 0:
        raise InvalidSpaceError(f"knot spacing must be positive, got {d}")
    k = int(k)
    xa = np.asarray(x, dtype=float)
    t = xa / d + k
    j = np.floor(t)
    inside = (t >= 0) & (t < k)
    u = np.where(inside, t - j, 0.0)
    vals = _local_values(k, u)
    col = np.clip(k - 1 - j, 0, k - 1).astype(int)
    out = np.take_along_axis(vals, col[..., None], axis=-1)[..., 0]
    out = np.where(inside, out, 0.0)
    if np.ndim(x) == 0:
        return float(out)
    return out


def _locate(space: SplineSpace, x: Array) -> tuple[np.ndarray, Array]:
    L = space.intervals
    s = np.asarray(x, dtype=float) * L
    c = np.floor(s)
    # right-continuous inside, left limit at x = 1
    c = np.clip(c, 0, L - 1)
    return c.astype(int), s - c


def basis_matrix(space: SplineSpace, x: npt.ArrayLike, deriv: int = 0) -> Array:
    """Dense ``(len(x), N)`` matrix of 1-D basis values (or first derivatives)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    k, N = space.order, space.size
    c, u = _locate(space, x)
    if deriv == 0:
        loc = _local_values(k, u)
    elif deriv == 1:
        loc = _local_derivative(k, u) * space.intervals
    else:
        raise ValueError("only deriv 0 or 1 is supported")
    out = np.zeros((x.size, N))
    rows = np.arange(x.size)[:, None]
    cols = c[:, None] + np.arange(k)[None, :]
    out[rows, cols] = loc
    return out


def _check_coefficients(space: SplineSpace, coefficients: npt.ArrayLike) -> Array:
    a = np.asarray(coefficients, dtype=float)
    if a.size != space.dim:
        raise ShapeError(f"expected {space.dim} coefficients for {space}, got {a.size}")
    return a.reshape(space.shape)


@dataclass(frozen=True)
class SplineModel:
    space: SplineSpace
    coefficients: Array = field(repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "coefficients", _check_coefficients(self.space, self.coefficients))

    def __call__(self, points: npt.ArrayLike) -> Array:
        return spline_eval(self, points)


def tensor_eval(space: SplineSpace, coefficients: Array, points: npt.ArrayLike,
                deriv: tuple[int, ...] | None = None) -> Array:
    """Evaluate a tensor spline with the given coefficient grid at points.

    ``points`` has shape ``(P, axes)`` (or ``(P,)`` in 1-D).
    """
    a = _check_coefficients(space, coefficients)
    pts = np.asarray(points, dtype=float)
    if space.axes == 1:
        pts = pts.reshape(-1, 1)
    pts = pts.reshape(-1, space.axes)
    deriv = deriv or (0,) * space.axes
    mats = [basis_matrix(space, pts[:, ax], deriv[ax]) for ax in range(space.axes)]
    if space.axes == 1:
        return mats[0] @ a
    if space.axes == 2:
        return np.einsum("pi,ij,pj->p", mats[0], a, mats[1], optimize=True)
    return np.einsum("pi,pj,pl,ijl->p", mats[0], mats[1], mats[2], a, optimize=True)


def spline_eval(model: SplineModel, points: npt.ArrayLike) -> Array:
    return tensor_eval(model.space, model.coefficients, points)


@dataclass(frozen=True)
class LevelSetSpline:
    """Two-axis spline whose zero set models a singularity curve."""

    space: SplineSpace
    coefficients: Array = field(repr=False)

    def __post_init__(self) -> None:
        if self.space.axes != 2:
            raise ShapeError("a level-set spline needs a 2-axis space")
        object.__setattr__(self, "coefficients", _check_coefficients(self.space, self.coefficients))

    def __call__(self, points: npt.ArrayLike) -> Array:
        return levelset_eval(self, points)

    def gradient(self, points: npt.ArrayLike) -> tuple[Array, Array]:
        gx = tensor_eval(self.space, self.coefficients, points, (1, 0))
        gy = tensor_eval(self.space, self.coefficients, points, (0, 1))
        return gx, gy

    def with_coefficients(self, coefficients: Array) -> LevelSetSpline:
        return LevelSetSpline(self.space, np.asarray(coefficients, dtype=float).reshape(self.space.shape))


def levelset_eval(D: LevelSetSpline, points: npt.ArrayLike) -> Array:
    return tensor_eval(D.space, D.coefficients, points)


def zero_level_polyline(D: LevelSetSpline | Callable[[Array], Array], resolution: int = 200) -> Array:
    """Points on the zero level set of ``D`` (a level-set spline or any
    vectorized function of ``(P, 2)`` points) inside the unit square.

    Sign changes along the edges of a ``resolution x resolution`` grid are
    polished to machine precision with Brent's method; the points are then
    chained into an ordered path.  Returns an empty ``(0, 2)`` array if no
    sign change is found.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    t = np.linspace(0.0, 1.0, resolution)
    X, Y = np.meshgrid(t, t, indexing="ij")
    V = D(np.column_stack([X.ravel(), Y.ravel()])).reshape(X.shape)
    pts = []

    def root(f: Callable[[float], float], a: float, b: float) -> float:
        fa, fb = f(a), f(b)
        if fa * fb >= 0:
            # grid values at the rounding level may disagree in sign with pointwise ones
            return a if abs(fa) <= abs(fb) else b
        return brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)

    def along_x(i: int, j: int) -> None:
        y = t[j]
        pts.append((root(lambda x: float(D([[x, y]])[0]), t[i], t[i + 1]), y))

    def along_y(i: int, j: int) -> None:
        x = t[i]
        pts.append((x, root(lambda y: float(D([[x, y]])[0]), t[j], t[j + 1])))

    exact = np.argwhere(V == 0.0)
    for i, j in exact:
        pts.append((t[i], t[j]))
    sx = np.argwhere((V[:-1, :] * V[1:, :]) < 0)
    for i, j in sx:
        along_x(i, j)
    sy = np.argwhere((V[:, :-1] * V[:, 1:]) < 0)
    for i, j in sy:
        along_y(i, j)
    if not pts:
        return np.zeros((0, 2))
    return chain_points(np.array(pts))


def chain_points(points: Array) -> Array:
    """Order a point cloud into a path by greedy nearest-neighbour chaining.

    The path starts at the point closest to the boundary of the unit square.
    """
    P = np.asarray(points, dtype=float)
    if len(P) <= 2:
        return P
    bdist = np.minimum(np.minimum(P[:, 0], 1 - P[:, 0]), np.minimum(P[:, 1], 1 - P[:, 1]))
    order = [int(np.argmin(bdist))]
    left = np.ones(len(P), dtype=bool)
    left[order[0]] = False
    for _ in range(len(P) - 1):
        d2 = np.sum((P - P[order[-1]]) ** 2, axis=1)
        d2[~left] = np.inf
        nxt = int(np.argmin(d2))
        order.append(nxt)
        left[nxt] = False
    return P[order]

"""Line quadrature on rectangles cut by the zero set of a smooth function.

A cut cell is integrated along lines parallel to the axis in which the
level-set function is monotone.  Each line meets the curve at most once, so
it splits into one interval on the ``phi >= 0`` side and one on the
``phi < 0`` side.  The outer coordinate is integrated with Gauss-Legendre
nodes on segments delimited by the points where the curve crosses the cell
edges, which keeps the integrand smooth on each segment.  Roots are found by
bisection to full precision, so the resulting integrals depend smoothly on
the level-set function.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
import numpy.typing as npt

Array = npt.NDArray[np.float64]
PhiFn = Callable[[Array], Array]
GradFn = Callable[[Array], tuple[Array, Array]]

_SAMPLES = 9
_BISECT_STEPS = 60


class QuadratureBudgetWarning(UserWarning):
    """A cut cell could not be resolved by line quadrature within the depth limit."""


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[Array, Array]:
    """Nodes and weights on ``[0, 1]``."""
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@dataclass
class LineQuadrature:
    """Outer nodes of one (sub)cell with the inner interval on each side.

    ``outer`` is the axis of the node coordinates; inner intervals run along
    the other axis.  Empty intervals have ``lo == hi``.
    """

    outer: int
    nodes: Array
    weights: Array
    plus_lo: Array
    plus_hi: Array
    minus_lo: Array
    minus_hi: Array
    box: tuple[float, float, float, float]


@dataclass
class PointQuadrature:
    """Fallback tensor nodes with pointwise side classification."""

    points: Array
    weights: Array
    plus: npt.NDArray[np.bool_]
    box: tuple[float, float, float, float]


def _pts(a: Array, b: Array, outer: int) -> Array:
    """Points with outer coordinate ``a`` and inner coordinate ``b``."""
    return np.column_stack([a, b]) if outer == 0 else np.column_stack([b, a])


def bisect_roots(f: Callable[[Array], Array], lo: Array, hi: Array, steps: int = _BISECT_STEPS) -> Array:
    """Vectorized bisection; ``f(lo)`` and ``f(hi)`` must differ in sign (``>= 0`` vs ``< 0``)."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    if lo.size == 0:
        return lo
    pos_lo = f(lo) >= 0
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        same = (f(mid) >= 0) == pos_lo
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
        if np.all(hi - lo <= 4e-16 * np.maximum(1.0, np.abs(hi))):
            break
    return 0.5 * (lo + hi)


def _edge_roots(phi: PhiFn, a0: float, a1: float, b: float, outer: int) -> list[float]:
    t = np.linspace(a0, a1, 2 * _SAMPLES - 1)
    v = phi(_pts(t, np.full_like(t, b), outer)) >= 0
    idx = np.nonzero(v[:-1] != v[1:])[0]
    if idx.size == 0:
        return []
    g = lambda s: phi(_pts(s, np.full_like(s, b), outer))  # noqa: E731
    return list(bisect_roots(g, t[idx], t[idx + 1]))


def _line_cell(phi: PhiFn, box, outer: int, nodes_per_segment: int) -> LineQuadrature:
    x0, x1, y0, y1 = box
    a0, a1, b0, b1 = (x0, x1, y0, y1) if outer == 0 else (y0, y1, x0, x1)
    breaks = sorted(set(_edge_roots(phi, a0, a1, b0, outer) + _edge_roots(phi, a0, a1, b1, outer)))
    edges = [a0] + [t for t in breaks if a0 < t < a1] + [a1]
    gx, gw = gauss_legendre(nodes_per_segment)
    nodes, weights = [], []
    for s0, s1 in zip(edges[:-1], edges[1:]):
        if s1 <= s0:
            continue
        nodes.append(s0 + (s1 - s0) * gx)
        weights.append((s1 - s0) * gw)
    a = np.concatenate(nodes)
    w = np.concatenate(weights)
    f0 = phi(_pts(a, np.full_like(a, b0), outer))
    f1 = phi(_pts(a, np.full_like(a, b1), outer))
    p0, p1 = f0 >= 0, f1 >= 0
    cut = p0 != p1
    r = np.full(a.shape, b0)
    if np.any(cut):
        ac = a[cut]
        g = lambda s: phi(_pts(ac, s, outer))  # noqa: E731
        r[cut] = bisect_roots(g, np.full(ac.shape, b0), np.full(ac.shape, b1))
    lo_b = np.full(a.shape, b0)
    hi_b = np.full(a.shape, b1)
    # all-plus lines: plus = [b0, b1]; all-minus: minus = [b0, b1]
    plus_lo = np.where(cut, np.where(p0, lo_b, r), np.where(p0, lo_b, hi_b))
    plus_hi = np.where(cut, np.where(p0, r, hi_b), hi_b)
    minus_lo = np.where(cut, np.where(p0, r, lo_b), np.where(p0, hi_b, lo_b))
    minus_hi = np.where(cut, np.where(p0, hi_b, r), hi_b)
    return LineQuadrature(outer, a, w, plus_lo, plus_hi, minus_lo, minus_hi, box)


def _fallback_cell(phi: PhiFn, box, nodes_per_segment: int) -> PointQuadrature:
    x0, x1, y0, y1 = box
    gx, gw = gauss_legendre(nodes_per_segment)
    X, Y = np.meshgrid(x0 + (x1 - x0) * gx, y0 + (y1 - y0) * gx, indexing="ij")
    W = np.outer(gw, gw) * (x1 - x0) * (y1 - y0)
    P = np.column_stack([X.ravel(), Y.ravel()])
    return PointQuadrature(P, W.ravel(), phi(P) >= 0, box)


def cut_cell_quadrature(phi: PhiFn, grad: GradFn, box: tuple[float, float, float, float],
                        nodes_per_segment: int = 16, max_depth: int = 6,
                        _depth: int = 0) -> list[LineQuadrature | PointQuadrature]:
    """Quadrature pieces for the rectangle ``box = (x0, x1, y0, y1)``.

    The cell is split into quadrants until ``phi`` is monotone along one axis
    on every piece; at ``max_depth`` a tensor rule with pointwise sign
    classification is used and a :class:`QuadratureBudgetWarning` is issued.
    """
    x0, x1, y0, y1 = box
    t = np.linspace(0.0, 1.0, _SAMPLES)
    X, Y = np.meshgrid(x0 + (x1 - x0) * t, y0 + (y1 - y0) * t, indexing="ij")
    P = np.column_stack([X.ravel(), Y.ravel()])
    gx, gy = grad(P)
    gnorm = np.max(np.hypot(gx, gy))
    margins = []
    for outer, g in ((0, gy), (1, gx)):
        if gnorm > 0 and (np.all(g > 0) or np.all(g < 0)):
            margins.append((np.min(np.abs(g)) / gnorm, outer))
    if margins:
        _, outer = max(margins)
        return [_line_cell(phi, box, outer, nodes_per_segment)]
    # sign-definite with a wide margin (e.g. near a critical point far from the curve)
    v = phi(P)
    if np.all(v > 0) or np.all(v < 0):
        if np.min(np.abs(v)) > 2.0 * gnorm * np.hypot(x1 - x0, y1 - y0):
            return [_line_cell(phi, box, 0, nodes_per_segment)]
    if _depth >= max_depth:
        warnings.warn(f"cut cell {box} unresolved at depth {max_depth}; using point classification",
                      QuadratureBudgetWarning, stacklevel=2)
        return [_fallback_cell(phi, box, nodes_per_segment)]
    xm, ym = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    out: list[LineQuadrature | PointQuadrature] = []
    for sub in ((x0, xm, y0, ym), (xm, x1, y0, ym), (x0, xm, ym, y1), (xm, x1, ym, y1)):
        out.extend(cut_cell_quadrature(phi, grad, sub, nodes_per_segment, max_depth, _depth + 1))
    return out

"""Locating singularities from the Gibbs oscillations of Fourier partial sums.

A jump in the function shows up as a sharp peak in the first differences of
a partial sum sampled on a fine grid.  The same happens at the ends of the
unit interval when the function is not periodic, so a zone of width
``2 / terms`` next to each end is excluded.  A peak only counts if it exceeds
``threshold`` times the median difference magnitude, the largest difference
two to four wavelengths (``1 / terms``) away from it, and the decaying ripple
of the boundary spike.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import numpy.typing as npt

from .errors import IncompleteDataError, ValidationError
from .fourier import FourierTable, partial_sum_grid, partial_sum_lines
from .linsolve import solve_pinv
from .splines import LevelSetSpline, SplineSpace, basis_matrix, chain_points, zero_level_polyline

Array = npt.NDArray[np.float64]

DEFAULT_THRESHOLD = 3.0
DEFAULT_SMOOTHING = 1e-3


class DetectionWarning(UserWarning):
    """A detection step had to drop or flag part of its input."""


@dataclass(frozen=True)
class JumpEstimate:
    """Location of the strongest interior jump, or ``found=False``."""

    s0: float | None
    peak: float
    spacing: float
    found: bool = True

    def __post_init__(self) -> None:
        if self.found:
            if self.s0 is None or not 0.0 < self.s0 < 1.0:
                raise ValidationError(f"jump location must lie in (0, 1), got {self.s0}")
            if not self.peak > 0:
                raise ValidationError("peak magnitude must be positive")

    def to_dict(self) -> dict:
        d = {"kind": "jump1d", "found": self.found, "s0": self.s0, "peak": self.peak,
             "spacing": self.spacing}
        if not self.found:
            d["note"] = "no interior singularity"
        return d

    @classmethod
    def from_dict(cls, d: dict) -> JumpEstimate:
        return cls(d.get("s0"), float(d["peak"]), float(d["spacing"]), bool(d.get("found", True)))


NOISE_FLOOR = 1e-10


def _peak(diff: Array, mid: Array, terms: int, threshold: float,
          scale: float = 0.0) -> tuple[int | None, float]:
    """Index of the accepted interior peak of ``|diff|`` (or None) and its size.

    Peaks below ``NOISE_FLOOR * scale`` (``scale``: magnitude of the sampled
    values) are rounding noise of a locally constant sum and never count.
    """
    a = np.abs(diff)
    zone = 2.0 / terms
    inner = (mid > zone) & (mid < 1.0 - zone)
    if not np.any(inner):
        return None, 0.0
    idx = np.nonzero(inner)[0]
    j = int(idx[np.argmax(a[idx])])
    peak = float(a[j])
    if peak == 0.0:
        return None, 0.0
    if peak <= NOISE_FLOOR * scale:
        return None, peak
    if peak < threshold * float(np.median(a[idx])):
        return None, peak
    # a jump gives a sharp peak: its Gibbs side lobes 2-4 wavelengths away are
    # an order of magnitude smaller, while smooth variation is flat there
    gap = np.abs(mid - mid[j])
    side = inner & (gap >= 2.0 / terms) & (gap <= 4.0 / terms)
    if np.any(side) and peak < threshold * float(a[side].max()):
        return None, peak
    # ripple of the boundary spike decays like 1 / (2 pi terms dist)
    edge = float(a[~inner].max()) if np.any(~inner) else 0.0
    dist = min(mid[j], 1.0 - mid[j])
    if peak < threshold * edge / (2 * np.pi * terms * dist):
        return None, peak
    return j, peak


def detect_jump_1d(table: FourierTable, terms: int = 200, points: int = 20000,
                   threshold: float = DEFAULT_THRESHOLD) -> JumpEstimate:
    """Location of the largest interior first difference of the partial sum."""
    if table.axes != 1:
        raise ValidationError("detect_jump_1d needs a 1-D table")
    if terms < 1:
        raise ValidationError("terms must be positive")
    if terms > table.M:
        raise IncompleteDataError(f"{terms} terms requested but table bound is {table.M}")
    if points < 10 * terms:
        raise ValidationError(f"need at least {10 * terms} grid points for {terms} terms, got {points}")
    v = np.asarray(partial_sum_grid(table, points, terms))
    if np.iscomplexobj(v):
        v = np.abs(v)
    diff = np.diff(v)
    mid = (np.arange(diff.size) + 0.5) / points
    j, peak = _peak(diff, mid, terms, threshold, float(np.abs(v).max()))
    if j is None:
        return JumpEstimate(None, peak, 1.0 / points, found=False)
    return JumpEstimate(float(mid[j]), peak, 1.0 / points)


def scanline_points_2d(table: FourierTable, lines: int = 50, points: int = 400,
                       terms: int | None = None, threshold: float = DEFAULT_THRESHOLD) -> Array:
    """Near-curve points from the largest differences along axis-parallel lines.

    Lines sit at ``(l + 0.5) / lines`` in each direction; the partial sum is
    sampled at ``j / points`` along each line.  Returns a ``(P, 2)`` array.
    """
    if table.axes != 2 or table.half_table:
        raise ValidationError("scanline_points_2d needs a full 2-D table")
    terms = table.M if terms is None else int(terms)
    if terms > table.M:
        raise IncompleteDataError(f"{terms} terms requested but table bound is {table.M}")
    if lines < 1 or points < 2 * terms + 1:
        raise ValidationError("need at least one line and 2*terms+1 points per line")
    coords = (np.arange(lines) + 0.5) / lines
    grid = np.arange(points) / points
    mid = (np.arange(points - 1) + 0.5) / points
    out = []
    for axis in (0, 1):
        vals = np.asarray(partial_sum_lines(table, coords, axis, grid, terms))
        if np.iscomplexobj(vals):
            vals = np.abs(vals)
        diffs = np.diff(vals, axis=1)
        scale = float(np.abs(vals).max()) if vals.size else 0.0
        for c, diff in zip(coords, diffs):
            j, _ = _peak(diff, mid, terms, threshold, scale)
            if j is None:
                continue
            out.append((mid[j], c) if axis == 0 else (c, mid[j]))
    return np.array(out, dtype=float).reshape(-1, 2)


# ---------------------------------------------------------------------------
# signed net


def _extend_to_boundary(p: Array, direction: Array) -> Array:
    """First point where the ray ``p + t direction`` (t >= 0) leaves the unit square."""
    ts = []
    for ax in (0, 1):
        if direction[ax] > 0:
            ts.append((1.0 - p[ax]) / direction[ax])
        elif direction[ax] < 0:
            ts.append(-p[ax] / direction[ax])
    t = min(ts) if ts else 0.0
    return np.clip(p + t * direction, 0.0, 1.0)


def curve_polyline(P0: Array, closed_factor: float = 3.0) -> tuple[Array, bool]:
    """Order ``P0`` into a path and extend its ends to the square's boundary.

    If the two ends are within ``closed_factor`` times the median step of each
    other the path is treated as a closed loop (returned with the first point
    repeated at the end).
    """
    path = chain_points(np.asarray(P0, dtype=float))
    if len(path) < 2:
        return path, False
    steps = np.linalg.norm(np.diff(path, axis=0), axis=1)
    med = float(np.median(steps))
    if len(path) > 3 and np.linalg.norm(path[0] - path[-1]) <= closed_factor * med:
        return np.vstack([path, path[:1]]), True
    ends = []
    for end, inner in ((0, min(3, len(path) - 1)), (-1, -1 - min(3, len(path) - 1))):
        d = path[end] - path[inner]
        n = np.linalg.norm(d)
        if n == 0:
            ends.append(path[end])
            continue
        # overshoot slightly so that rays hugging the boundary still cross
        ends.append(_extend_to_boundary(path[end], d / n) + 1e-6 * d / n)
    return np.vstack([ends[0], path, ends[1]]), False


def _crossings(a: Array, b: Array, poly: Array) -> npt.NDArray[np.int64]:
    """Number of proper intersections of each segment ``a[i] -> b[i]`` with the polyline."""
    p, q = poly[:-1], poly[1:]

    def orient(u, v, w):
        return ((v[..., 0] - u[..., 0]) * (w[..., 1] - u[..., 1])
                - (v[..., 1] - u[..., 1]) * (w[..., 0] - u[..., 0]))

    A, B = a[:, None, :], b[:, None, :]
    P, Q = p[None, :, :], q[None, :, :]
    d1 = orient(P, Q, A)
    d2 = orient(P, Q, B)
    d3 = orient(A, B, P)
    d4 = orient(A, B, Q)
    # half-open rule on the polyline vertices avoids double counts
    hit = ((d1 > 0) != (d2 > 0)) & ((d3 >= 0) != (d4 >= 0))
    return hit.sum(axis=1)


_CORNERS = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])


def _inset(P: Array, eps: float = 1e-9) -> Array:
    """Move points towards the centre so rays never run along the boundary."""
    return P + eps * (0.5 - P)


def _corner_ray_signs(points: Array, poly: Array, closed: bool) -> Array:
    # corner signs: (0, 0) is on the negative side of an open curve; every
    # corner is outside (positive) of a closed loop
    corners = _inset(_CORNERS)
    if closed:
        corner_sign = np.ones(4)
    else:
        corner_sign = -((-1.0) ** _crossings(np.repeat(corners[:1], 4, axis=0), corners, poly))
    d2 = ((points[:, None, :] - _CORNERS[None, :, :]) ** 2).sum(axis=2)
    nearest = np.argmin(d2, axis=1)
    count = _crossings(_inset(points), corners[nearest], poly)
    return corner_sign[nearest] * (-1.0) ** count


def _right_or_above_signs(points: Array, P0: Array) -> Array:
    d2 = ((points[:, None, :] - P0[None, :, :]) ** 2).sum(axis=2)
    near = P0[np.argmin(d2, axis=1)]
    return np.sign((points[:, 0] - near[:, 0]) + (points[:, 1] - near[:, 1]))


ORIENTATION_RULES = ("corner-ray", "right-or-above")


def polyline_distance(points: Array, poly: Array) -> Array:
    """Distance from each point to the nearest segment of a polyline."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(poly) == 1:
        return np.linalg.norm(points - poly[0], axis=1)
    a, ab = poly[:-1], np.diff(poly, axis=0)
    L2 = np.maximum((ab**2).sum(axis=1), 1e-300)
    t = np.clip(((points[:, None, :] - a[None]) * ab[None]).sum(axis=2) / L2[None], 0.0, 1.0)
    foot = a[None] + t[..., None] * ab[None]
    return np.sqrt(((points[:, None, :] - foot) ** 2).sum(axis=2)).min(axis=1)


def signed_net(P0: npt.ArrayLike, net: int = 11, rule: str | Callable[[Array], Array] = "corner-ray",
               tube: float | None = None, distance: str = "polyline") -> tuple[Array, Array]:
    """Signed distances to the curve through ``P0`` on a ``net x net`` grid,
    plus ``P0`` itself with value 0.

    ``rule`` is ``"corner-ray"`` (default: follow the segment to the nearest
    corner and count crossings of the ordered, boundary-extended ``P0`` path;
    the corner ``(0, 0)`` lies on the negative side of an open curve, the
    inside of a closed loop is negative), ``"right-or-above"`` (positive when
    the point is right of or above its nearest ``P0`` point), or a callable
    returning signs for an array of points.  Grid points within ``tube``
    (default: a quarter of the net spacing) of ``P0`` cannot be classified
    reliably and are dropped with a warning.

    ``distance="polyline"`` (default) measures the distance to the ordered
    ``P0`` path extended to the boundary; ``"points"`` uses the distance to
    the point set itself, which overestimates it where the detected points
    thin out.

    Returns ``(points, values)``.
    """
    P0 = np.asarray(P0, dtype=float).reshape(-1, 2)
    if len(P0) == 0:
        raise ValidationError("signed_net needs at least one curve point")
    if net < 3:
        raise ValidationError(f"net size must be at least 3, got {net}")
    t = np.linspace(0.0, 1.0, net)
    X, Y = np.meshgrid(t, t, indexing="ij")
    Q = np.column_stack([X.ravel(), Y.ravel()])
    if distance not in ("polyline", "points"):
        raise ValidationError(f"unknown distance {distance!r}; use 'polyline' or 'points'")
    dist = np.sqrt(((Q[:, None, :] - P0[None, :, :]) ** 2).sum(axis=2)).min(axis=1)
    poly, closed = curve_polyline(P0)
    if distance == "polyline" and len(poly) >= 2:
        dist = polyline_distance(Q, poly)
    if callable(rule):
        sign = np.asarray(rule(Q), dtype=float)
    elif rule == "corner-ray":
        sign = _corner_ray_signs(Q, poly, closed) if len(poly) >= 2 else np.sign(Q[:, 0] - P0[0, 0])
    elif rule == "right-or-above":
        sign = _right_or_above_signs(Q, P0)
    else:
        raise ValidationError(f"unknown orientation rule {rule!r}; known: {', '.join(ORIENTATION_RULES)}")
    tube = 0.25 / (net - 1) if tube is None else tube
    near = np.sqrt(((Q[:, None, :] - P0[None, :, :]) ** 2).sum(axis=2)).min(axis=1)
    keep = (np.minimum(dist, near) > tube) & (sign != 0)
    dropped = int(np.count_nonzero(~keep))
    if dropped:
        warnings.warn(f"{dropped} net points too close to the curve to classify; dropped",
                      DetectionWarning, stacklevel=2)
    points = np.vstack([Q[keep], P0])
    values = np.concatenate([sign[keep] * dist[keep], np.zeros(len(P0))])
    return points, values


# ---------------------------------------------------------------------------
# initial level set


def collocation_matrix(space: SplineSpace, points: Array) -> Array:
    """``(P, N^2)`` values of the tensor basis (C order) at the points."""
    ax = space.axis_space()
    Bx = basis_matrix(ax, points[:, 0])
    By = basis_matrix(ax, points[:, 1])
    return (Bx[:, :, None] * By[:, None, :]).reshape(len(points), -1)


def roughness_matrix(n: int) -> Array:
    """Second differences of an ``n x n`` coefficient array along both axes."""
    D2 = np.diff(np.eye(n), 2, axis=0)
    eye = np.eye(n)
    return np.vstack([np.kron(D2, eye), np.kron(eye, D2)])


def fit_initial_levelset(points: npt.ArrayLike, values: npt.ArrayLike, space: SplineSpace,
                         cutoff: float = 1e-13, smoothing: float = DEFAULT_SMOOTHING) -> LevelSetSpline:
    """Least-squares tensor spline through scattered values.

    With ``smoothing=0`` this is the minimum-norm solution of the normal
    equations.  A positive ``smoothing`` adds ``smoothing * w * |R b|^2``,
    where ``R`` takes second differences of the coefficients and ``w``
    matches the trace of the penalty to that of ``B^T B``.  The seed values
    carry errors of the order of the scan-line spacing, and for high orders
    the unpenalized fit amplifies them into spurious zero curves.
    """
    if space.axes != 2:
        raise ValidationError("the level-set space must have two axes")
    P = np.asarray(points, dtype=float).reshape(-1, 2)
    v = np.asarray(values, dtype=float).ravel()
    if len(P) != len(v):
        raise ValidationError("points and values differ in length")
    if len(P) == 0:
        raise ValidationError("no points to fit")
    if not np.any(v):
        warnings.warn("all seed values are zero; returning a flat level set", DetectionWarning, stacklevel=2)
        return LevelSetSpline(space, np.zeros(space.shape))
    B = collocation_matrix(space, P)
    A = B.T @ B
    b = B.T @ v
    if smoothing < 0:
        raise ValidationError("smoothing must be non-negative")
    if smoothing > 0:
        R = roughness_matrix(space.shape[0])
        RR = R.T @ R
        A = A + smoothing * (np.trace(A) / np.trace(RR)) * RR
    x, _ = solve_pinv(A, cutoff, b)
    return LevelSetSpline(space, x.reshape(space.shape))


@dataclass
class CurveSeed:
    """Curve points ``P0``, the signed net ``Q0`` and the fitted level set."""

    P0: Array
    Q0_points: Array
    Q0_values: Array
    levelset: LevelSetSpline | None = None
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = {"kind": "curve2d", "found": len(self.P0) > 0,
             "P0": np.asarray(self.P0).tolist(),
             "Q0": [[float(p[0]), float(p[1]), float(v)] for p, v in zip(self.Q0_points, self.Q0_values)],
             "flags": list(self.flags)}
        if self.levelset is not None:
            d["levelset"] = {"space": self.levelset.space.to_dict(),
                             "coefficients": self.levelset.coefficients.ravel().tolist()}
        if not d["found"]:
            d["note"] = "no interior singularity"
        return d

    @classmethod
    def from_dict(cls, d: dict) -> CurveSeed:
        P0 = np.array(d.get("P0", []), dtype=float).reshape(-1, 2)
        Q = np.array(d.get("Q0", []), dtype=float).reshape(-1, 3)
        D = None
        if d.get("levelset"):
            sd = d["levelset"]["space"]
            space = SplineSpace(int(sd["order"]), float(sd["spacing"]), int(sd.get("axes", 2)))
            D = LevelSetSpline(space, np.array(d["levelset"]["coefficients"], dtype=float))
        return cls(P0, Q[:, :2], Q[:, 2], D, list(d.get("flags", [])))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n")


def detect_curve_2d(table: FourierTable, space: SplineSpace, lines: int = 50, points: int = 400,
                    net: int = 11, terms: int | None = None, rule: str = "corner-ray",
                    threshold: float = DEFAULT_THRESHOLD, smoothing: float = DEFAULT_SMOOTHING,
                    distance: str = "polyline") -> CurveSeed:
    """Scan lines, signed net and initial level-set fit in one call."""
    P0 = scanline_points_2d(table, lines, points, terms, threshold)
    if len(P0) == 0:
        return CurveSeed(P0, np.zeros((0, 2)), np.zeros(0), None, ["no_curve"])
    flags = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DetectionWarning)
        Q, v = signed_net(P0, net, rule, distance=distance)
    for w in caught:
        if issubclass(w.category, DetectionWarning):
            flags.append(str(w.message))
        else:
            warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    net_values = v[: len(v) - len(P0)]
    if not (np.any(net_values > 0) and np.any(net_values < 0)):
        flags.append("single_sign_net")
    D = fit_initial_levelset(Q, v, space, smoothing=smoothing)
    return CurveSeed(P0, Q, v, D, flags)


# ---------------------------------------------------------------------------
# curve distances


def hausdorff(A: npt.ArrayLike, B: npt.ArrayLike) -> float:
    """Symmetric Hausdorff distance between two finite point sets."""
    from scipy.spatial.distance import directed_hausdorff

    A = np.asarray(A, dtype=float).reshape(-1, 2)
    B = np.asarray(B, dtype=float).reshape(-1, 2)
    if len(A) == 0 or len(B) == 0:
        return float("inf")
    return max(directed_hausdorff(A, B)[0], directed_hausdorff(B, A)[0])


def levelset_distance(points: Array, level: Callable[[Array], Array],
                      grad: Callable[[Array], tuple[Array, ...]]) -> Array:
    """First-order distance ``|phi| / |grad phi|`` of points to the zero set of ``phi``."""
    v = np.abs(level(points))
    g = np.hypot(*grad(points))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(v == 0, 0.0, v / g)


def curve_hausdorff(D: LevelSetSpline, level: Callable[[Array], Array],
                    grad: Callable[[Array], tuple[Array, ...]], resolution: int = 400) -> float:
    """Hausdorff distance between the zero sets of ``D`` and of ``level`` in the square.

    Both curves are sampled on a ``resolution`` grid and polished to machine
    precision; each direction uses the first-order distance to the other zero set.
    """
    A = zero_level_polyline(D, resolution)
    truth = _TrueLevel(level)
    B = zero_level_polyline(truth, resolution)
    if len(A) == 0 or len(B) == 0:
        return float("inf")
    # first-order estimates, capped by the distance to the other sampled curve
    # (which only matters where a gradient nearly vanishes)
    ab = np.minimum(levelset_distance(A, level, grad), _nearest(A, B)).max()
    ba = np.minimum(levelset_distance(B, D, D.gradient), _nearest(B, A)).max()
    return float(max(ab, ba))


def _nearest(A: Array, B: Array) -> Array:
    from scipy.spatial import cKDTree

    return cKDTree(B).query(A)[0]


class _TrueLevel:
    """Adapter giving a closed-form level function the interface of a level-set spline."""

    def __init__(self, level: Callable[[Array], Array]):
        self.level = level

    def __call__(self, points):
        return self.level(np.asarray(points, dtype=float).reshape(-1, 2))

"""Fourier coefficient tables on the unit cube.

Convention shared by every module: ``f(x) = sum_n f_n exp(2 pi i n.x)`` with
``f_n = int_[0,1]^d f(x) exp(-2 pi i n.x) dx``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import numpy.typing as npt

from .cutcell import LineQuadrature, cut_cell_quadrature, gauss_legendre
from .errors import (IncompleteDataError, ResolutionError, SymmetryError, TableParseError,
                     TableValidationError, ValidationError)

Array = npt.NDArray[np.float64]
CArray = npt.NDArray[np.complex128]

HERMITIAN_RTOL = 1e-13
IMAG_TOL = 1e-10


class FourierTable:
    """Dense table of Fourier coefficients.

    Full tables store indices ``-M..M`` on every axis (array position
    ``n + M``).  Half tables are 1-D only and store ``n = 0..M``; negative
    indices are implied by Hermitian symmetry of a real source.
    """

    def __init__(self, data: npt.ArrayLike, M: int, half_table: bool = False,
                 real_source: bool = True, check: bool = True):
        data = np.array(data, dtype=complex)
        if M < 0:
            raise TableValidationError(f"index bound must be non-negative, got {M}")
        axes = data.ndim
        if axes not in (1, 2, 3):
            raise TableValidationError(f"tables have 1 to 3 axes, got {axes}")
        if half_table:
            if axes != 1:
                raise TableValidationError("half tables are one-dimensional")
            if not real_source:
                raise TableValidationError("a half table only makes sense for a real source")
            expect = (M + 1,)
        else:
            expect = (2 * M + 1,) * axes
        if data.shape != expect:
            raise TableValidationError(f"expected entries of shape {expect}, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise TableValidationError("table contains non-finite entries")
        self.data = data
        self.data.setflags(write=False)
        self.M = int(M)
        self.axes = axes
        self.half_table = bool(half_table)
        self.real_source = bool(real_source)
        if check and real_source and not half_table:
            err = self.hermitian_defect()
            if err > HERMITIAN_RTOL:
                raise TableValidationError(
                    f"real_source table violates Hermitian symmetry (relative defect {err:.3e})")

    def __repr__(self) -> str:
        kind = "half" if self.half_table else "full"
        return f"FourierTable(axes={self.axes}, M={self.M}, {kind}, real_source={self.real_source})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FourierTable):
            return NotImplemented
        return (self.M == other.M and self.half_table == other.half_table
                and self.real_source == other.real_source and self.data.shape == other.data.shape
                and np.array_equal(self.data, other.data))

    def hermitian_defect(self) -> float:
        if self.half_table:
            return 0.0
        flipped = np.conj(self.data[(slice(None, None, -1),) * self.axes])
        scale = max(np.max(np.abs(self.data)), np.finfo(float).tiny)
        return float(np.max(np.abs(self.data - flipped)) / scale)

    def __len__(self) -> int:
        return self.data.size

    def scaled(self, factor: complex) -> FourierTable:
        real = self.real_source and np.isreal(factor)
        return FourierTable(self.data * factor, self.M, self.half_table, real, check=False)

    def coefficients_1d(self, freqs: npt.ArrayLike) -> CArray:
        """Entries for the integer indices ``freqs`` of a 1-D table."""
        if self.axes != 1:
            raise ValidationError("coefficients_1d needs a 1-D table")
        n = np.atleast_1d(np.asarray(freqs, dtype=np.int64))
        if np.any(np.abs(n) > self.M):
            bad = int(n[np.argmax(np.abs(n))])
            raise IncompleteDataError(f"index {bad} outside table bound {self.M}")
        if self.half_table:
            if np.any(n < 0) and not self.real_source:
                raise IncompleteDataError("negative indices need a full table")
            v = self.data[np.abs(n)]
            return np.where(n < 0, np.conj(v), v)
        return self.data[n + self.M]

    def box(self, M: int) -> FourierTable:
        """Full sub-table with indices ``-M..M`` on every axis."""
        if M > self.M:
            raise IncompleteDataError(f"index {M} outside table bound {self.M}")
        if self.half_table:
            n = np.arange(-M, M + 1)
            return FourierTable(self.coefficients_1d(n), M, False, True, check=False)
        sl = (slice(self.M - M, self.M + M + 1),) * self.axes
        return FourierTable(self.data[sl], M, False, self.real_source, check=False)

    def half(self, M: int | None = None) -> FourierTable:
        """1-D half table ``n = 0..M``."""
        M = self.M if M is None else M
        if not self.real_source:
            raise ValidationError("half tables require a real source")
        return FourierTable(self.coefficients_1d(np.arange(M + 1)), M, True, True)

    def box_values(self, M: int) -> CArray:
        """Flattened (C order) entries of the box ``-M..M`` on every axis."""
        return self.box(M).data.ravel()


# ---------------------------------------------------------------------------
# test functions


@dataclass(frozen=True)
class TestFunction:
    """Closed-form function on the unit cube with optional singularity data.

    ``pieces = (plus, minus)`` evaluate the smooth parts on the sides
    ``level >= 0`` and ``level < 0``.  ``singular_distance`` returns the
    distance of points to the singularity set.
    """

    __test__ = False

    name: str
    axes: int
    pieces: tuple[Callable[[Array], Array], ...] = field(repr=False)
    level: Callable[[Array], Array] | None = field(default=None, repr=False)
    level_grad: Callable[[Array], tuple[Array, ...]] | None = field(default=None, repr=False)
    singular_distance: Callable[[Array], Array] | None = field(default=None, repr=False)
    jump: float | None = None
    complex_valued: bool = False
    description: str = ""

    @property
    def singular(self) -> bool:
        return self.level is not None

    def __call__(self, points: npt.ArrayLike) -> Array:
        P = _as_points(points, self.axes)
        if self.level is None:
            return self.pieces[0](P)
        plus = self.level(P) >= 0
        out = np.empty(len(P), dtype=complex if self.complex_valued else float)
        if np.any(plus):
            out[plus] = self.pieces[0](P[plus])
        if np.any(~plus):
            out[~plus] = self.pieces[1](P[~plus])
        return out


def _as_points(points: npt.ArrayLike, axes: int) -> Array:
    P = np.asarray(points, dtype=float)
    return P.reshape(-1, axes)


def _circle_distance(P: Array) -> Array:
    return np.abs(np.hypot(P[:, 0], P[:, 1]) - np.sqrt(0.5))


def _registry() -> dict[str, TestFunction]:
    fns = [
        TestFunction("const1", 1, (lambda P: np.ones(len(P)),), description="f = 1"),
        TestFunction("mode1", 1, (lambda P: np.exp(2j * np.pi * P[:, 0]),), complex_valued=True,
                     description="f = exp(2 pi i x)"),
        TestFunction("smooth1d", 1, (lambda P: P[:, 0] * np.exp(P[:, 0]) + np.sin(8 * P[:, 0]),),
                     description="f = x exp(x) + sin(8x)"),
        TestFunction(
            "jump1d", 1,
            (lambda P: np.sin(5 * P[:, 0]), lambda P: 1.0 / ((P[:, 0] - 0.5) ** 2 + 0.5)),
            level=lambda P: P[:, 0] - 0.5,
            level_grad=lambda P: (np.ones(len(P)),),
            singular_distance=lambda P: np.abs(P[:, 0] - 0.5),
            jump=0.5,
            description="sin(5x) for x >= 0.5, 1/((x-0.5)^2+0.5) for x < 0.5"),
        TestFunction(
            "kink1d", 1,
            (lambda P: np.abs(P[:, 0] - 0.5) + np.cos(2 * np.pi * P[:, 0]),),
            description="|x - 0.5| + cos(2 pi x): continuous, derivative jumps at 0.5"),
        TestFunction(
            "smooth2d", 2,
            (lambda P: 10.0 / (1 + 10 * (P[:, 0] ** 2 + (P[:, 1] - 1) ** 2)) + np.sin(10 * (P[:, 0] - P[:, 1])),),
            description="10/(1+10(x^2+(y-1)^2)) + sin(10(x-y))"),
        TestFunction(
            "circle2d", 2,
            (lambda P: (P[:, 0] ** 2 + P[:, 1] ** 2 - 0.5) * np.sin(10 * (P[:, 0] + P[:, 1])),
             lambda P: (P[:, 0] ** 2 + P[:, 1] ** 2 - 0.5) * np.sin(10 * (P[:, 0] + P[:, 1])) + 2 * P[:, 0]),
            level=lambda P: P[:, 0] ** 2 + P[:, 1] ** 2 - 0.5,
            level_grad=lambda P: (2 * P[:, 0], 2 * P[:, 1]),
            singular_distance=_circle_distance,
            description="(x^2+y^2-0.5) sin(10(x+y)), plus 2x inside the quarter circle x^2+y^2 = 0.5"),
        TestFunction(
            "vline2d", 2,
            (lambda P: 1.0 + 0.0 * P[:, 0], lambda P: 0.0 * P[:, 0]),
            level=lambda P: P[:, 0] - 0.5,
            level_grad=lambda P: (np.ones(len(P)), np.zeros(len(P))),
            singular_distance=lambda P: np.abs(P[:, 0] - 0.5),
            description="indicator of x >= 0.5"),
        TestFunction(
            "smooth3d", 3,
            (lambda P: (np.sum(P**2, axis=1) - 0.5) * np.sin(4 * (P[:, 0] + P[:, 1] - P[:, 2])),),
            description="(x^2+y^2+z^2-0.5) sin(4(x+y-z))"),
    ]
    return {f.name: f for f in fns}


REGISTRY: dict[str, TestFunction] = _registry()


def get_function(name: str) -> TestFunction:
    try:
        return REGISTRY[name]
    except KeyError:
        raise ValidationError(f"unknown function {name!r}; known: {', '.join(sorted(REGISTRY))}") from None


# ---------------------------------------------------------------------------
# synthesis


def _exp_rows(x: Array, M: int) -> CArray:
    """``exp(-2 pi i n x)`` for ``n = -M..M`` as a ``(len(x), 2M+1)`` array."""
    return np.exp(-2j * np.pi * np.outer(x, np.arange(-M, M + 1)))


def coeffs_from_function(f: TestFunction, M: int, resolution: int | None = None,
                         nodes: int | None = None, half_table: bool | None = None) -> FourierTable:
    """Fourier coefficients of ``f`` for indices up to ``M``.

    Composite Gauss-Legendre quadrature on ``resolution`` cells per axis; the
    sum over cells for each node offset is a DFT evaluated by FFT.  Cells
    straddling the declared singularity are re-integrated exactly on each
    side (split at the jump in 1-D, line quadrature in 2-D).
    """
    minimum = 8 * M
    if resolution is None:
        resolution = max(minimum, 64)
    if resolution < minimum:
        raise ResolutionError(f"resolution {resolution} too low; need at least {minimum} (8*M)")
    if nodes is None:
        nodes = {1: 8, 2: 4, 3: 4}[f.axes]
    if half_table is None:
        half_table = f.axes == 1 and not f.complex_valued
    if f.axes == 1:
        full = _synth_1d(f, M, resolution, nodes)
    elif f.axes == 2:
        full = _synth_2d(f, M, resolution, nodes)
    elif f.axes == 3:
        if f.singular:
            raise ValidationError("singular 3-D functions are not supported")
        full = _synth_3d(f, M, resolution, nodes)
    else:
        raise ValidationError(f"unsupported axis count {f.axes}")
    real = not f.complex_valued
    if real:
        flipped = np.conj(full[(slice(None, None, -1),) * f.axes])
        full = 0.5 * (full + flipped)
    table = FourierTable(full, M, half_table=False, real_source=real)
    return table.half() if half_table else table


def _fft_index(M: int, R: int) -> np.ndarray:
    return np.mod(np.arange(-M, M + 1), R)


def _synth_1d(f: TestFunction, M: int, R: int, g: int) -> CArray:
    t, w = gauss_legendre(g)
    c = np.arange(R)
    X = (c[:, None] + t[None, :]) / R
    V = f(X.reshape(-1, 1)).reshape(R, g)
    S = np.fft.fft(V, axis=0)[_fft_index(M, R)]  # (2M+1, g)
    n = np.arange(-M, M + 1)
    out = np.sum(S * (w / R)[None, :] * np.exp(-2j * np.pi * np.outer(n, t) / R), axis=1)
    if f.jump is not None and f.singular:
        s = f.jump
        cs = int(np.floor(s * R))
        a, b = cs / R, (cs + 1) / R
        if a < s < b:
            xr = X[cs]
            out -= _exp_rows(xr, M).T @ (V[cs] * w / R)
            for lo, hi, piece in ((a, s, f.pieces[1]), (s, b, f.pieces[0])):
                x = lo + (hi - lo) * t
                out += _exp_rows(x, M).T @ (piece(x.reshape(-1, 1)) * w * (hi - lo))
    return out


def _synth_3d(f: TestFunction, M: int, R: int, g: int) -> CArray:
    t, w = gauss_legendre(g)
    n = np.arange(-M, M + 1)
    phase = np.exp(-2j * np.pi * np.outer(n, t) / R)  # (2M+1, g)
    idx = _fft_index(M, R)
    c = np.arange(R)
    out = np.zeros((2 * M + 1,) * 3, dtype=complex)
    for qx in range(g):
        x = (c + t[qx]) / R
        for qy in range(g):
            y = (c + t[qy]) / R
            for qz in range(g):
                z = (c + t[qz]) / R
                X, Y, Z = np.meshgrid(x, y, z, indexing="ij")
                V = f(np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])).reshape(R, R, R)
                S = np.fft.fftn(V)[np.ix_(idx, idx, idx)]
                wq = w[qx] * w[qy] * w[qz] / R**3
                out += wq * S * phase[:, qx, None, None] * phase[None, :, qy, None] * phase[None, None, :, qz]
    return out


def _synth_2d(f: TestFunction, M: int, R: int, g: int) -> CArray:
    t, w = gauss_legendre(g)
    n = np.arange(-M, M + 1)
    phase = np.exp(-2j * np.pi * np.outer(n, t) / R)
    idx = _fft_index(M, R)
    c = np.arange(R)
    out = np.zeros((2 * M + 1, 2 * M + 1), dtype=complex)
    for qx in range(g):
        x = (c + t[qx]) / R
        for qy in range(g):
            y = (c + t[qy]) / R
            X, Y = np.meshgrid(x, y, indexing="ij")
            V = f(np.column_stack([X.ravel(), Y.ravel()])).reshape(R, R)
            S = np.fft.fft2(V)[np.ix_(idx, idx)]
            out += (w[qx] * w[qy] / R**2) * S * phase[:, qx, None] * phase[None, :, qy]
    if f.singular:
        out += _cut_cell_correction_2d(f, M, R, g)
    return out


def _cut_cells(f: TestFunction, R: int) -> np.ndarray:
    """Cells that the singularity curve may cross (conservative test)."""
    c = (np.arange(R) + 0.5) / R
    X, Y = np.meshgrid(c, c, indexing="ij")
    P = np.column_stack([X.ravel(), Y.ravel()])
    v = f.level(P)
    gx, gy = f.level_grad(P)
    reach = 1.5 * np.hypot(gx, gy) * (np.sqrt(2) / (2 * R)) + 1e-14
    # the quadratic term of phi over a cell is covered by the factor 1.5 for smooth curves
    hit = np.abs(v) <= reach + 4.0 / R**2
    return np.argwhere(hit.reshape(R, R))


def _cut_cell_correction_2d(f: TestFunction, M: int, R: int, g: int) -> CArray:
    t, w = gauss_legendre(g)
    xs, ys, ws = [], [], []
    for cx, cy in _cut_cells(f, R):
        x0, x1, y0, y1 = cx / R, (cx + 1) / R, cy / R, (cy + 1) / R
        # remove the regular tensor rule of this cell
        X, Y = np.meshgrid(x0 + t / R, y0 + t / R, indexing="ij")
        P = np.column_stack([X.ravel(), Y.ravel()])
        xs.append(P[:, 0])
        ys.append(P[:, 1])
        ws.append(-np.outer(w, w).ravel() / R**2 * f(P))
        for piece in cut_cell_quadrature(f.level, f.level_grad, (x0, x1, y0, y1), nodes_per_segment=g):
            if not isinstance(piece, LineQuadrature):
                xs.append(piece.points[:, 0])
                ys.append(piece.points[:, 1])
                ws.append(piece.weights * f(piece.points))
                continue
            for lo, hi, fn in ((piece.plus_lo, piece.plus_hi, f.pieces[0]),
                               (piece.minus_lo, piece.minus_hi, f.pieces[1])):
                inner = lo[:, None] + (hi - lo)[:, None] * t[None, :]
                outer = np.broadcast_to(piece.nodes[:, None], inner.shape)
                wt = (piece.weights * (hi - lo))[:, None] * w[None, :]
                Q = np.column_stack([outer.ravel(), inner.ravel()])
                if piece.outer == 1:
                    Q = Q[:, ::-1]
                xs.append(Q[:, 0])
                ys.append(Q[:, 1])
                ws.append(wt.ravel() * fn(Q))
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    wv = np.concatenate(ws)
    out = np.zeros((2 * M + 1, 2 * M + 1), dtype=complex)
    chunk = 20000
    for s in range(0, x.size, chunk):
        Ex = _exp_rows(x[s:s + chunk], M)
        Ey = _exp_rows(y[s:s + chunk], M)
        out += Ex.T @ (wv[s:s + chunk, None] * Ey)
    return out


def analytic_step_table(s: float, M: int, height: float = 1.0) -> FourierTable:
    """Exact half table of ``height * [x >= s]``."""
    n = np.arange(M + 1)
    data = np.empty(M + 1, dtype=complex)
    data[0] = height * (1.0 - s)
    nn = n[1:]
    data[1:] = height * (np.exp(-2j * np.pi * nn * s) - 1.0) / (2j * np.pi * nn)
    return FourierTable(data, M, half_table=True)


# ---------------------------------------------------------------------------
# partial sums


def _full_data(table: FourierTable, terms: int | None) -> tuple[CArray, int]:
    M = table.M if terms is None else int(terms)
    if M > table.M:
        raise IncompleteDataError(f"{M} terms requested but table bound is {table.M}")
    return table.box(M).data, M


def _finish(values: CArray, table: FourierTable) -> Array | CArray:
    if not table.real_source:
        return values
    imag = np.max(np.abs(values.imag)) if values.size else 0.0
    # sum |f_n| bounds the partial sum, so rounding scales with it
    scale = max(1.0, float(np.sum(np.abs(table.data))))
    if imag > IMAG_TOL * scale:
        raise SymmetryError(f"partial sum has imaginary part {imag:.3e} for a real source")
    return values.real


def partial_sum_eval(table: FourierTable, points: npt.ArrayLike, terms: int | None = None) -> Array | CArray:
    """``sum f_n exp(2 pi i n.x)`` over stored indices (up to ``terms``) at ``points``."""
    data, M = _full_data(table, terms)
    P = np.asarray(points, dtype=float).reshape(-1, table.axes)
    out = np.zeros(len(P), dtype=complex)
    chunk = 4096
    n = np.arange(-M, M + 1)
    for s in range(0, len(P), chunk):
        Q = P[s:s + chunk]
        E = [np.exp(2j * np.pi * np.outer(Q[:, a], n)) for a in range(table.axes)]
        if table.axes == 1:
            out[s:s + chunk] = E[0] @ data
        elif table.axes == 2:
            out[s:s + chunk] = np.einsum("pm,mn,pn->p", E[0], data, E[1], optimize=True)
        else:
            out[s:s + chunk] = np.einsum("pa,pb,pc,abc->p", E[0], E[1], E[2], data, optimize=True)
    return _finish(out, table)


def partial_sum_grid(table: FourierTable, points: int, terms: int | None = None) -> Array | CArray:
    """Partial sum on the uniform grid ``j / points`` (per axis) via the inverse FFT."""
    data, M = _full_data(table, terms)
    if points < 2 * M + 1:
        raise ValidationError(f"grid of {points} points cannot resolve {M} terms")
    buf = np.zeros((points,) * table.axes, dtype=complex)
    idx = np.mod(np.arange(-M, M + 1), points)
    buf[np.ix_(*([idx] * table.axes))] = data
    vals = np.fft.ifftn(buf) * points**table.axes
    return _finish(vals, table)


def partial_sum_lines(table: FourierTable, coords: npt.ArrayLike, line_axis: int,
                      points: npt.ArrayLike, terms: int | None = None) -> Array | CArray:
    """2-D partial sum along axis-parallel lines.

    Returns ``(len(coords), len(points))`` values; line ``l`` runs along
    ``line_axis`` with the other coordinate fixed at ``coords[l]``.
    """
    if table.axes != 2:
        raise ValidationError("partial_sum_lines needs a 2-D table")
    data, M = _full_data(table, terms)
    n = np.arange(-M, M + 1)
    Ec = np.exp(2j * np.pi * np.outer(np.asarray(coords, dtype=float), n))
    Ep = np.exp(2j * np.pi * np.outer(np.asarray(points, dtype=float), n))
    if line_axis == 0:
        vals = Ec @ data.T @ Ep.T
    else:
        vals = Ec @ data @ Ep.T
    return _finish(vals, table)


# ---------------------------------------------------------------------------
# file I/O


def _fmt(x: float) -> str:
    return f"{x:.16e}"


def _header(table: FourierTable) -> dict:
    return {"axes": table.axes, "M": table.M, "half_table": table.half_table,
            "real_source": table.real_source}


def _records(table: FourierTable):
    if table.half_table:
        idx = [(n,) for n in range(table.M + 1)]
        vals = table.data
        for n, v in zip(idx, vals):
            yield list(n), v
        return
    for pos in np.ndindex(table.data.shape):
        yield [p - table.M for p in pos], table.data[pos]


def save_table(table: FourierTable, path: str | Path) -> None:
    """Write a table as JSON (default) or CSV (``.csv`` suffix)."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        buf = io.StringIO()
        buf.write("# " + json.dumps(_header(table)) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"n{a + 1}" for a in range(table.axes)] + ["re", "im"])
        for idx, v in _records(table):
            w.writerow(idx + [_fmt(v.real), _fmt(v.imag)])
        path.write_text(buf.getvalue())
        return
    entries = [idx + [_fmt(v.real), _fmt(v.imag)] for idx, v in _records(table)]
    body = {"header": _header(table), "entries": entries}
    # one record per line keeps large tables diffable
    lines = ",\n".join("  " + json.dumps(e) for e in entries)
    text = '{"header": ' + json.dumps(body["header"]) + ',\n "entries": [\n' + lines + "\n]}\n"
    path.write_text(text)


def _parse_header(h: object) -> tuple[int, int, bool, bool]:
    if not isinstance(h, dict):
        raise TableParseError("header must be an object")
    try:
        axes, M = int(h["axes"]), int(h["M"])
        half, real = bool(h["half_table"]), bool(h["real_source"])
    except (KeyError, TypeError, ValueError) as exc:
        raise TableParseError(f"bad header: {exc}") from None
    return axes, M, half, real


def _assemble(axes: int, M: int, half: bool, real: bool, records) -> FourierTable:
    if half:
        if axes != 1:
            raise TableValidationError("half tables are one-dimensional")
        shape, offset = (M + 1,), 0
    else:
        shape, offset = (2 * M + 1,) * axes, M
    data = np.zeros(shape, dtype=complex)
    seen = np.zeros(shape, dtype=bool)
    for pos, rec in records:
        if not isinstance(rec, (list, tuple)) or len(rec) != axes + 2:
            raise TableParseError(f"expected {axes + 2} fields", pos)
        try:
            idx = tuple(int(v) for v in rec[:axes])
            re, im = float(rec[axes]), float(rec[axes + 1])
        except (TypeError, ValueError) as exc:
            raise TableParseError(str(exc), pos) from None
        loc = tuple(i + offset for i in idx)
        if any(not 0 <= p < s for p, s in zip(loc, shape)):
            raise TableValidationError(f"record {pos}: index {idx} outside declared bound {M}")
        if seen[loc]:
            raise TableValidationError(f"record {pos}: duplicate index {idx}")
        seen[loc] = True
        data[loc] = complex(re, im)
    if not seen.all():
        missing = tuple(int(p) - offset for p in np.argwhere(~seen)[0])
        raise TableValidationError(f"missing entry for index {missing}")
    return FourierTable(data, M, half_table=half, real_source=real)


def load_table(path: str | Path) -> FourierTable:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".csv":
        lines = text.splitlines()
        if not lines or not lines[0].startswith("#"):
            raise TableParseError("missing '# {header}' line", 0)
        try:
            header = json.loads(lines[0][1:])
        except json.JSONDecodeError as exc:
            raise TableParseError(f"bad header: {exc}", 0) from None
        axes, M, half, real = _parse_header(header)
        rows = list(csv.reader(lines[2:]))
        return _assemble(axes, M, half, real, ((i + 1, r) for i, r in enumerate(rows)))
    try:
        body = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TableParseError(f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(body, dict) or "header" not in body or "entries" not in body:
        raise TableParseError("expected an object with 'header' and 'entries'")
    axes, M, half, real = _parse_header(body["header"])
    entries = body["entries"]
    if not isinstance(entries, list):
        raise TableParseError("'entries' must be a list")
    return _assemble(axes, M, half, real, ((i + 1, r) for i, r in enumerate(entries)))

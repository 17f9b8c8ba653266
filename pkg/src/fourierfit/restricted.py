"""Fourier transforms of tensor B-splines restricted by the sign of a level-set spline.

The square is divided into cells of the common refinement of the value knot
grid and the level-set knot grid, so that on every cell each value basis
function is a tensor polynomial and the level-set spline is determined by one
``l x l`` block of its coefficients.  If that block has a single strict sign
the cell lies entirely on one side (B-splines are a convex partition of
unity) and its contribution is a product of exact 1-D interval transforms.
The remaining cells are integrated with the line quadrature of
:mod:`fourierfit.cutcell`: Gauss nodes on the outer axis and exact 1-D
transforms along each inner interval.

Arrays use the layout ``T[i, m, j, n]``: value basis ``(i, j)`` (0-based, C
order) and frequency ``(m, n)`` with position ``m + M``.
"""

from __future__ import annotations

from collections import OrderedDict
from math import gcd

import numpy as np
import numpy.typing as npt

from .cutcell import LineQuadrature, cut_cell_quadrature
from .errors import ValidationError
from .splines import LevelSetSpline, SplineSpace, _local_derivative, _local_values, piece_coefficients
from .transforms import _phase, fourier_matrix_1d, interval_transform, poly_exp_integral

Array = npt.NDArray[np.float64]
CArray = npt.NDArray[np.complex128]


def _exp_cols(x: Array, M: int) -> CArray:
    return np.exp(-2j * np.pi * np.outer(x, np.arange(-M, M + 1)))


class RestrictedTransform2D:
    """Piece-1 (``D >= 0``) transforms of a 2-D value space for any level set.

    Parameters
    ----------
    value_space, levelset_space
        Two-axis spline spaces of the fitted pieces and of the level set.
    M
        Frequencies ``-M..M`` on both axes.
    nodes_per_segment
        Gauss nodes per outer segment in cut cells.
    cache_bytes
        Upper bound on memory held by the per-cell cache.
    """

    def __init__(self, value_space: SplineSpace, levelset_space: SplineSpace, M: int,
                 nodes_per_segment: int = 16, max_depth: int = 6, cache_bytes: float = 2e9):
        if value_space.axes != 2 or levelset_space.axes != 2:
            raise ValidationError("restricted 2-D transforms need two-axis spaces")
        if M < 0:
            raise ValidationError(f"M must be non-negative, got {M}")
        self.space = value_space
        self.lspace = levelset_space
        self.M = int(M)
        self.nodes = nodes_per_segment
        self.max_depth = max_depth
        Ld, Lh = value_space.intervals, levelset_space.intervals
        self.Lc = Ld * Lh // gcd(Ld, Lh)
        self.k, self.l = value_space.order, levelset_space.order
        self.N = value_space.size
        ax = value_space.axis_space()
        n = np.arange(-M, M + 1)
        self.full_1d = fourier_matrix_1d(ax, n)  # (N, F)
        # E[i, c, n]: transform of basis i over cell c of the common grid
        E = np.zeros((self.N, self.Lc, n.size), dtype=complex)
        for i in range(1, self.N + 1):
            a, b = ax.support(i)
            for c in range(self.Lc):
                lo, hi = c / self.Lc, (c + 1) / self.Lc
                if hi <= a or lo >= b:
                    continue
                E[i - 1, c] = interval_transform(ax, i, n, lo, hi)
        self.cell_1d = E
        self._cache: OrderedDict[tuple, CArray] = OrderedDict()
        entry = (self.k * n.size) ** 2 * 16
        self._cache_max = max(8, int(cache_bytes // entry))
        self.evaluations = 0

    # -- geometry ------------------------------------------------------------

    def _ratio(self, L: int) -> int:
        return self.Lc // L

    def local_block(self, coeffs: Array, cx: int, cy: int) -> Array:
        rh = self._ratio(self.lspace.intervals)
        hx, hy = cx // rh, cy // rh
        return coeffs[hx:hx + self.l, hy:hy + self.l]

    def classify(self, coeffs: Array) -> npt.NDArray[np.int8]:
        """+1 / -1 for cells on one side, 0 for cells that may be cut."""
        rh = self._ratio(self.lspace.intervals)
        Lh = self.lspace.intervals
        lo = np.empty((Lh, Lh))
        hi = np.empty((Lh, Lh))
        for a in range(Lh):
            for b in range(Lh):
                blk = coeffs[a:a + self.l, b:b + self.l]
                lo[a, b], hi[a, b] = blk.min(), blk.max()
        side = np.zeros((Lh, Lh), dtype=np.int8)
        side[lo > 0] = 1
        side[hi < 0] = -1
        return np.repeat(np.repeat(side, rh, axis=0), rh, axis=1)

    def cells_for_coefficient(self, p: int, q: int) -> tuple[slice, slice]:
        """Common-grid cells influenced by level-set coefficient ``(p, q)`` (0-based)."""
        rh = self._ratio(self.lspace.intervals)
        Lh = self.lspace.intervals
        a0, a1 = max(p - self.l + 1, 0), min(p, Lh - 1)
        b0, b1 = max(q - self.l + 1, 0), min(q, Lh - 1)
        return slice(a0 * rh, (a1 + 1) * rh), slice(b0 * rh, (b1 + 1) * rh)

    # -- cut cells -------------------------------------------------------------

    def _phi(self, block: Array, hx: int, hy: int):
        Lh, l = self.lspace.intervals, self.l

        def phi(P: Array) -> Array:
            vx = _local_values(l, P[:, 0] * Lh - hx)
            vy = _local_values(l, P[:, 1] * Lh - hy)
            return np.einsum("pa,ab,pb->p", vx, block, vy)

        def grad(P: Array) -> tuple[Array, Array]:
            ux, uy = P[:, 0] * Lh - hx, P[:, 1] * Lh - hy
            vx, vy = _local_values(l, ux), _local_values(l, uy)
            dx, dy = _local_derivative(l, ux) * Lh, _local_derivative(l, uy) * Lh
            return (np.einsum("pa,ab,pb->p", dx, block, vy),
                    np.einsum("pa,ab,pb->p", vx, block, dy))

        return phi, grad

    def _inner(self, lo: Array, hi: Array, knot: int) -> CArray:
        """``(Q, k, F)`` transforms of the ``k`` bases living on knot interval ``knot``
        over ``[lo_q, hi_q]``; local column ``r`` is basis ``knot + r`` (0-based)."""
        k, L, M = self.k, self.space.intervals, self.M
        d = 1.0 / L
        n = np.arange(-M, M + 1)
        w = 2.0 * np.pi * n * d
        u0 = (lo - knot * d) * L
        u1 = (hi - knot * d) * L
        u0 = np.clip(u0, 0.0, 1.0)[:, None]
        u1 = np.clip(u1, 0.0, 1.0)[:, None]
        ph = d * _phase(n, knot, L)
        pieces = piece_coefficients(k)
        out = np.empty((lo.size, k, n.size), dtype=complex)
        for r in range(k):
            # basis knot + r (0-based) = knot + r + 1 (1-based) uses piece k - 1 - r here
            out[:, r] = ph * poly_exp_integral(pieces[k - 1 - r], u0, u1, w[None, :])
        out[(hi <= lo)] = 0.0
        return out

    def _outer(self, x: Array, weights: Array, knot: int) -> CArray:
        """``(Q, k, F)`` weighted basis values times ``exp(-2 pi i m x)``."""
        L = self.space.intervals
        vals = _local_values(self.k, x * L - knot)
        return (weights[:, None] * vals)[:, :, None] * _exp_cols(x, self.M)[:, None, :]

    def _cut_contribution(self, cx: int, cy: int, block: Array) -> CArray:
        rh = self._ratio(self.lspace.intervals)
        rd = self._ratio(self.space.intervals)
        kx, ky = cx // rd, cy // rd
        phi, grad = self._phi(block, cx // rh, cy // rh)
        box = (cx / self.Lc, (cx + 1) / self.Lc, cy / self.Lc, (cy + 1) / self.Lc)
        k, F = self.k, 2 * self.M + 1
        C = np.zeros((k, F, k, F), dtype=complex)
        for piece in cut_cell_quadrature(phi, grad, box, self.nodes, self.max_depth):
            if isinstance(piece, LineQuadrature):
                if piece.outer == 0:
                    O = self._outer(piece.nodes, piece.weights, kx)
                    I = self._inner(piece.plus_lo, piece.plus_hi, ky)
                    C += np.einsum("qam,qbn->ambn", O, I, optimize=True)
                else:
                    O = self._outer(piece.nodes, piece.weights, ky)
                    I = self._inner(piece.plus_lo, piece.plus_hi, kx)
                    C += np.einsum("qam,qbn->ambn", I, O, optimize=True)
            else:
                P, w = piece.points[piece.plus], piece.weights[piece.plus]
                if P.size == 0:
                    continue
                Ox = self._outer(P[:, 0], w, kx)
                Oy = self._outer(P[:, 1], np.ones(len(P)), ky)
                C += np.einsum("qam,qbn->ambn", Ox, Oy, optimize=True)
        return C

    def _cached(self, cx: int, cy: int, block: Array) -> CArray:
        key = (cx, cy, block.tobytes())
        hit = self._cache.get(key)
        if hit is not None:
            self._cache.move_to_end(key)
            return hit
        C = self._cut_contribution(cx, cy, block)
        self._cache[key] = C
        if len(self._cache) > self._cache_max:
            self._cache.popitem(last=False)
        return C

    # -- public ----------------------------------------------------------------

    def piece1(self, levelset: LevelSetSpline | Array) -> CArray:
        """``T[i, m, j, n]`` for the region ``D >= 0``."""
        coeffs = levelset.coefficients if isinstance(levelset, LevelSetSpline) else np.asarray(levelset, float)
        coeffs = coeffs.reshape(self.lspace.shape)
        self.evaluations += 1
        side = self.classify(coeffs)
        E = self.cell_1d
        T = np.einsum("icm,cd,jdn->imjn", E, (side == 1).astype(float), E, optimize=True)
        rd = self._ratio(self.space.intervals)
        k = self.k
        for cx, cy in np.argwhere(side == 0):
            C = self._cached(int(cx), int(cy), self.local_block(coeffs, cx, cy))
            ix, iy = cx // rd, cy // rd
            T[ix:ix + k, :, iy:iy + k, :] += C
        return T

    def cell_contribution(self, coeffs: Array, cx: int, cy: int, side: int | None = None) -> CArray:
        """Piece-1 ``(k, F, k, F)`` contribution of one common-grid cell."""
        if side is None:
            blk = self.local_block(coeffs, cx, cy)
            side = 1 if blk.min() > 0 else (-1 if blk.max() < 0 else 0)
        k, F = self.k, 2 * self.M + 1
        if side == -1:
            return np.zeros((k, F, k, F), dtype=complex)
        rd = self._ratio(self.space.intervals)
        ix, iy = cx // rd, cy // rd
        if side == 1:
            ex = self.cell_1d[ix:ix + k, cx]
            ey = self.cell_1d[iy:iy + k, cy]
            return ex[:, :, None, None] * ey[None, None, :, :]
        return self._cached(cx, cy, self.local_block(coeffs, cx, cy))

    def piece1_update(self, T_base: CArray, base: Array, coeffs: Array, p: int, q: int) -> CArray:
        """Piece-1 transforms for ``coeffs``, which differ from ``base`` only at
        level-set coefficient ``(p, q)``; ``T_base`` belongs to ``base``."""
        base = np.asarray(base, float).reshape(self.lspace.shape)
        coeffs = np.asarray(coeffs, float).reshape(self.lspace.shape)
        self.evaluations += 1
        sx, sy = self.cells_for_coefficient(p, q)
        rd = self._ratio(self.space.intervals)
        k = self.k
        T = T_base.copy()
        for cx in range(sx.start, sx.stop):
            for cy in range(sy.start, sy.stop):
                ob = self.local_block(base, cx, cy)
                nb = self.local_block(coeffs, cx, cy)
                if np.array_equal(ob, nb):
                    continue
                ix, iy = cx // rd, cy // rd
                T[ix:ix + k, :, iy:iy + k, :] += (self.cell_contribution(coeffs, cx, cy)
                                                  - self.cell_contribution(base, cx, cy))
        return T

    def rows_from_piece1(self, T1: CArray) -> CArray:
        N, F = self.N, 2 * self.M + 1
        T2 = self.full() - T1
        r1 = T1.transpose(0, 2, 1, 3).reshape(N * N, F * F)
        r2 = T2.transpose(0, 2, 1, 3).reshape(N * N, F * F)
        return np.concatenate([r1, r2])

    def full(self) -> CArray:
        F1 = self.full_1d
        return F1[:, :, None, None] * F1[None, None, :, :]

    def pieces(self, levelset: LevelSetSpline | Array) -> tuple[CArray, CArray]:
        """Piece-1 (``D >= 0``) and piece-2 (``D < 0``) transforms."""
        T1 = self.piece1(levelset)
        return T1, self.full() - T1

    def basis_rows(self, levelset: LevelSetSpline | Array) -> CArray:
        """``(2 N^2, F^2)`` rows: piece-1 bases then piece-2 bases, C order."""
        return self.rows_from_piece1(self.piece1(levelset))

    def clear_cache(self) -> None:
        self._cache.clear()


def restricted_tensor_fourier(value_space: SplineSpace, levelset: LevelSetSpline,
                              index: tuple[int, int], freq: tuple[int, int], side: int = 1) -> complex:
    """Transform of value basis ``index`` (1-based) restricted to ``D >= 0`` (``side=1``)
    or ``D < 0`` (``side=2``) at frequency ``freq``."""
    if side not in (1, 2):
        raise ValidationError(f"side must be 1 or 2, got {side}")
    N = value_space.size
    i, j = index
    if not (1 <= i <= N and 1 <= j <= N):
        raise ValidationError(f"basis index {index} outside 1..{N}")
    M = max(abs(int(freq[0])), abs(int(freq[1])))
    rt = RestrictedTransform2D(value_space, levelset.space, M)
    T1, T2 = rt.pieces(levelset)
    T = T1 if side == 1 else T2
    return complex(T[i - 1, freq[0] + M, j - 1, freq[1] + M])

"""Fourier coefficients of (restricted) B-spline basis functions.

Convention: ``F[g](n) = int_0^1 g(x) exp(-2 pi i n x) dx`` for every axis.

One-dimensional transforms are exact: each knot interval contributes
``d * exp(-2 pi i n x_j) * int p_j(u) exp(-i w u) du`` with ``w = 2 pi n d``
and ``p_j`` a polynomial piece of the cardinal B-spline, integrated by a
power series for small ``|w|`` and by repeated integration by parts
otherwise.  Two-dimensional transforms restricted by a level-set spline live
in :mod:`fourierfit.cutcell`.
"""

from __future__ import annotations

from math import factorial

import numpy as np
import numpy.typing as npt

from .errors import IncompleteDataError, ValidationError
from .splines import SplineSpace, piece_coefficients

Array = npt.NDArray[np.float64]
CArray = npt.NDArray[np.complex128]

_SERIES_LIMIT = 6.0
_SERIES_TERMS = 48
_INV_FACT = np.array([1.0 / factorial(m) for m in range(_SERIES_TERMS)])


def poly_exp_integral(coeffs: Array, u0: npt.ArrayLike, u1: npt.ArrayLike,
                      omega: npt.ArrayLike) -> CArray:
    """``int_{u0}^{u1} p(u) exp(-i omega u) du`` for ``p = sum c[e] u**e``.

    ``u0``, ``u1`` and ``omega`` broadcast against each other; all ``u`` are
    expected in ``[0, 1]``.
    """
    c = np.asarray(coeffs, dtype=float)
    deg = c.size - 1
    u0 = np.asarray(u0, dtype=float)
    u1 = np.asarray(u1, dtype=float)
    w = np.asarray(omega, dtype=float)
    u0, u1, w = np.broadcast_arrays(u0, u1, w)
    out = np.zeros(w.shape, dtype=complex)
    small = np.abs(w) <= _SERIES_LIMIT

    if np.any(small):
        a, b, ws = u0[small], u1[small], w[small]
        # sum_e c_e sum_m (-i w)^m / m! (b^{e+m+1} - a^{e+m+1}) / (e+m+1)
        P = deg + _SERIES_TERMS + 1
        pb = np.cumprod(np.broadcast_to(b[..., None], b.shape + (P,)), axis=-1)
        pa = np.cumprod(np.broadcast_to(a[..., None], a.shape + (P,)), axis=-1)
        diff = (pb - pa) / np.arange(1, P + 1)  # index q -> power q+1
        zm = (-1j * ws)[..., None] ** np.arange(_SERIES_TERMS) * _INV_FACT
        acc = np.zeros(ws.shape, dtype=complex)
        for e, ce in enumerate(c):
            if ce == 0.0:
                continue
            acc += ce * np.sum(zm * diff[..., e:e + _SERIES_TERMS], axis=-1)
        out[small] = acc

    big = ~small
    if np.any(big):
        a, b, wb = u0[big], u1[big], w[big]
        iw = 1j * wb
        # antiderivative F(u) = -exp(-i w u) sum_m p^(m)(u) / (i w)^(m+1)
        der = c.copy()
        qa = np.zeros(wb.shape, dtype=complex)
        qb = np.zeros(wb.shape, dtype=complex)
        scale = 1.0 / iw
        for _ in range(deg + 1):
            qa += np.polynomial.polynomial.polyval(a, der) * scale
            qb += np.polynomial.polynomial.polyval(b, der) * scale
            der = np.polynomial.polynomial.polyder(der) if der.size > 1 else np.zeros(1)
            scale = scale / iw
        out[big] = -(np.exp(-1j * wb * b) * qb - np.exp(-1j * wb * a) * qa)
    return out


def _phase(n: Array, m: int, L: int) -> CArray:
    """``exp(-2 pi i n m / L)`` with exact integer argument reduction."""
    r = np.mod(np.asarray(n, dtype=np.int64) * m, L)
    return np.exp(-2j * np.pi * r / L)


def _check_index(space: SplineSpace, i: int) -> None:
    if not 1 <= i <= space.size:
        raise ValidationError(f"basis index {i} outside 1..{space.size}")


def interval_transform(space: SplineSpace, i: int, freqs: npt.ArrayLike,
                       lo: float = 0.0, hi: float = 1.0) -> CArray:
    """``int_lo^hi B_i(x) exp(-2 pi i n x) dx`` for each ``n`` in ``freqs``."""
    _check_index(space, i)
    n = np.atleast_1d(np.asarray(freqs, dtype=np.int64))
    k, L = space.order, space.intervals
    d = 1.0 / L
    w = 2.0 * np.pi * n * d
    pieces = piece_coefficients(k)
    out = np.zeros(n.shape, dtype=complex)
    for j in range(k):
        m = i - k + j  # interval [m d, (m+1) d]
        a, b = m * d, (m + 1) * d
        a2, b2 = max(a, lo), min(b, hi)
        if b2 <= a2:
            continue
        u0 = 0.0 if a2 == a else (a2 - a) * L
        u1 = 1.0 if b2 == b else (b2 - a) * L
        out += d * _phase(n, m, L) * poly_exp_integral(pieces[j], u0, u1, w)
    return out


def _interior_transform(space: SplineSpace, i: int, n: np.ndarray) -> CArray:
    # d exp(-2 pi i n (i-k) d) (exp(-i w/2) sinc(w/2))^k with w = 2 pi n d
    k, L = space.order, space.intervals
    half = np.exp(-1j * np.pi * np.mod(n * k, 2 * L) / L)
    return (1.0 / L) * _phase(n, i - k, L) * half * np.sinc(n / L) ** k


def bspline_fourier_1d(space: SplineSpace, i: int, n: npt.ArrayLike) -> CArray | complex:
    """Fourier coefficients of basis ``i`` restricted to ``[0, 1]``."""
    _check_index(space, i)
    nn = np.atleast_1d(np.asarray(n, dtype=np.int64))
    k, L = space.order, space.intervals
    if k <= i <= L:
        out = _interior_transform(space, i, nn)
    else:
        out = interval_transform(space, i, nn, 0.0, 1.0)
    return complex(out[0]) if np.ndim(n) == 0 else out


def restricted_bspline_fourier_1d(space: SplineSpace, i: int, n: npt.ArrayLike,
                                  s: float, side: str) -> CArray | complex:
    """Fourier coefficients of basis ``i`` restricted to ``[0, s]`` or ``(s, 1]``."""
    if not 0.0 < s < 1.0:
        raise ValidationError(f"cut point must lie in (0, 1), got {s}")
    if side not in ("left", "right"):
        raise ValidationError(f"side must be 'left' or 'right', got {side!r}")
    lo, hi = (0.0, s) if side == "left" else (s, 1.0)
    out = interval_transform(space, i, np.atleast_1d(n), lo, hi)
    return complex(out[0]) if np.ndim(n) == 0 else out


def fourier_matrix_1d(space: SplineSpace, freqs: npt.ArrayLike) -> CArray:
    """``(N, len(freqs))`` matrix of unrestricted basis transforms."""
    n = np.atleast_1d(np.asarray(freqs, dtype=np.int64))
    return np.stack([np.atleast_1d(bspline_fourier_1d(space, i, n)) for i in range(1, space.size + 1)])


def restricted_matrices_1d(space: SplineSpace, freqs: npt.ArrayLike, s: float,
                           full: CArray | None = None) -> tuple[CArray, CArray]:
    """Transforms of all bases restricted to ``[0, s]`` and ``(s, 1]``.

    Only bases whose support contains ``s`` need new integrals; the rest are
    copied from (or zeroed against) the unrestricted matrix.
    """
    if not 0.0 < s < 1.0:
        raise ValidationError(f"cut point must lie in (0, 1), got {s}")
    n = np.atleast_1d(np.asarray(freqs, dtype=np.int64))
    if full is None:
        full = fourier_matrix_1d(space, n)
    left = np.zeros_like(full)
    for i in range(1, space.size + 1):
        a, b = space.support(i)
        if b <= s:
            left[i - 1] = full[i - 1]
        elif a < s:
            left[i - 1] = interval_transform(space, i, n, 0.0, s)
    return left, full - left


def tensor_bspline_fourier(space: SplineSpace, index: tuple[int, ...],
                           freq: tuple[int, ...]) -> complex:
    """Fourier coefficient of a tensor basis function on the full cube."""
    if len(index) != space.axes or len(freq) != space.axes:
        raise ValidationError("index and frequency must have one entry per axis")
    ax = space.axis_space()
    val = 1.0 + 0j
    for i, n in zip(index, freq):
        val *= bspline_fourier_1d(ax, int(i), int(n))
    return complex(val)


def fourier_box_freqs(M: int) -> np.ndarray:
    return np.arange(-M, M + 1)


def tensor_fourier_matrix(space: SplineSpace, freqs: npt.ArrayLike) -> CArray:
    """Rows: tensor basis (C order), columns: frequency box (C order)."""
    F1 = fourier_matrix_1d(space.axis_space(), freqs)
    out = F1
    for _ in range(space.axes - 1):
        N, F = F1.shape
        out = (out[:, None, :, None] * F1[None, :, None, :]).reshape(out.shape[0] * N, out.shape[1] * F)
    return out


def derivative_table(table, axis: int = 0):
    """Coefficients ``i * m * f_hat`` (no 2 pi) of the derivative along ``axis``.

    The factor follows the literal index-multiplier convention; only jump
    localization consumes the result, so constant factors do not matter.
    """
    from .fourier import FourierTable

    if table.half_table:
        raise IncompleteDataError("derivative_table needs a full-range table (both index signs)")
    if not 0 <= axis < table.axes:
        raise ValidationError(f"axis {axis} out of range for a {table.axes}-axis table")
    idx = np.arange(-table.M, table.M + 1)
    shape = [1] * table.axes
    shape[axis] = idx.size
    data = table.data * (1j * idx.reshape(shape))
    return FourierTable(data, table.M, half_table=False, real_source=False)

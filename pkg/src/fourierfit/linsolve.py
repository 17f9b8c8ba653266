"""Real normal equations for complex coefficient matching, pinv solves and
iterative refinement with double-double residuals."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
import numpy.typing as npt

from .errors import IncompleteDataError, NumericError, ValidationError

Array = npt.NDArray[np.float64]
CArray = npt.NDArray[np.complex128]

DEFAULT_CUTOFF = 1e-13
DEFAULT_MAX_ITER = 20
DEFAULT_TARGET = 1e-12


@dataclass
class BasisCoeffMatrix:
    """Fourier coefficients of a list of basis functions.

    ``values[r, c]`` is the transform of basis row ``r`` at the multi-index
    ``freqs[c]``.  ``pieces`` is 1 for smooth fits and 2 for piecewise fits,
    whose rows list piece 1 then piece 2.
    """

    values: CArray
    freqs: npt.NDArray[np.int64]
    pieces: int = 1

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=complex)
        f = np.asarray(self.freqs, dtype=np.int64)
        self.freqs = f.reshape(len(f), -1)
        if self.values.shape[1] != len(self.freqs):
            raise ValidationError("basis columns must match the frequency list")
        if not np.all(np.isfinite(self.values)):
            raise NumericError("basis transforms contain non-finite values")


@dataclass
class NormalSystem:
    A: Array
    b: Array
    freqs: npt.NDArray[np.int64]
    basis: CArray = field(repr=False)
    data: CArray = field(repr=False)
    data_norm2: float = 0.0

    @property
    def size(self) -> int:
        return len(self.b)

    def objective(self, x: Array) -> float:
        """``sum |f_n - S_n|^2`` evaluated from the residual vector."""
        r = self.data - self.basis.T @ x
        return float(np.vdot(r, r).real)

    def quadratic_form(self, x: Array) -> float:
        """The same objective written as ``c - 2 b.x + x.A.x``."""
        return float(self.data_norm2 - 2 * self.b @ x + x @ self.A @ x)


@dataclass
class SolveReport:
    condition: float
    cutoff: float
    rank: int
    iterations: int = 0
    residual_history: list[float] = field(default_factory=list)
    raw_residuals: list[float] = field(default_factory=list)
    diverged: bool = False
    stalled: bool = False

    @property
    def final_residual(self) -> float:
        return self.residual_history[-1] if self.residual_history else float("nan")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["final_residual"] = self.final_residual
        return d


def gather_data(table, freqs: npt.ArrayLike) -> CArray:
    """Table entries at the multi-indices ``freqs`` (shape ``(F, axes)``)."""
    f = np.asarray(freqs, dtype=np.int64).reshape(-1, table.axes)
    if table.axes == 1:
        return table.coefficients_1d(f[:, 0])
    bad = np.abs(f) > table.M
    if np.any(bad):
        row = f[np.argmax(bad.any(axis=1))]
        raise IncompleteDataError(f"missing coefficient for index {tuple(int(v) for v in row)}")
    return table.data[tuple((f + table.M).T)]


def assemble_normal(basis: BasisCoeffMatrix, data, freqs: npt.ArrayLike | None = None) -> NormalSystem:
    """Normal equations ``A a = b`` of ``min sum_n |f_n - sum_i a_i B_{i,n}|^2``.

    ``A_ij = sum_n Re B_in Re B_jn + Im B_in Im B_jn`` and likewise ``b``.
    ``data`` is a FourierTable or a complex vector aligned with the columns.
    """
    if freqs is not None:
        fq = np.asarray(freqs, dtype=np.int64).reshape(len(basis.freqs), -1)
        if not np.array_equal(fq, basis.freqs):
            raise ValidationError("basis columns do not cover the requested index set")
    if hasattr(data, "data") and hasattr(data, "M"):
        f = gather_data(data, basis.freqs)
    else:
        f = np.asarray(data, dtype=complex)
        if f.shape != (basis.values.shape[1],):
            raise ValidationError("data vector does not match basis columns")
    G = basis.values
    Gr = np.concatenate([G.real, G.imag], axis=1)
    fr = np.concatenate([f.real, f.imag])
    A = Gr @ Gr.T
    A = 0.5 * (A + A.T)
    b = Gr @ fr
    return NormalSystem(A, b, basis.freqs, G, f, float(fr @ fr))


class PinvSolver:
    """Truncated-SVD pseudo-inverse of a symmetric matrix, factored once."""

    def __init__(self, A: Array, cutoff: float = DEFAULT_CUTOFF):
        if not 0.0 < cutoff < 1.0:
            raise ValidationError(f"cutoff must lie in (0, 1), got {cutoff}")
        if not np.all(np.isfinite(A)):
            raise NumericError("matrix contains non-finite entries")
        U, s, Vt = np.linalg.svd(A)
        self.cutoff = cutoff
        smax = s[0] if s.size else 0.0
        keep = s > cutoff * smax if smax > 0 else np.zeros_like(s, dtype=bool)
        self.rank = int(np.count_nonzero(keep))
        self.U = U[:, keep]
        self.Vt = Vt[keep]
        self.s = s[keep]
        self.condition = float(self.s[0] / self.s[-1]) if self.rank else float("inf")

    def __call__(self, r: Array) -> Array:
        return self.Vt.T @ ((self.U.T @ r) / self.s)


def solve_pinv(system: NormalSystem | Array, cutoff: float = DEFAULT_CUTOFF,
               rhs: Array | None = None) -> tuple[Array, SolveReport]:
    """Minimum-norm least-squares solution via truncated SVD."""
    A, b = (system.A, system.b) if isinstance(system, NormalSystem) else (np.asarray(system, float), rhs)
    if b is None:
        raise ValidationError("a right-hand side is required")
    if not np.all(np.isfinite(b)):
        raise NumericError("right-hand side contains non-finite entries")
    P = PinvSolver(A, cutoff)
    x = P(b)
    rel = _rel(residual_dd(A, x, b), b)
    return x, SolveReport(P.condition, cutoff, P.rank, 0, [rel], [rel])


def _two_sum(a: Array, b: Array) -> tuple[Array, Array]:
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _split(a: Array) -> tuple[Array, Array]:
    c = 134217729.0 * a  # 2**27 + 1
    hi = c - (c - a)
    return hi, a - hi


def _two_prod(a: Array, b: Array) -> tuple[Array, Array]:
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, al * bl - (((p - ah * bh) - al * bh) - ah * bl)


def residual_dd(A: Array, x: Array, b: Array) -> Array:
    """``b - A x`` accumulated in double-double (compensated dot products)."""
    s = np.array(b, dtype=float)
    c = np.zeros_like(s)
    for j in range(A.shape[1]):
        p, e = _two_prod(A[:, j], np.full(A.shape[0], -x[j]))
        s, q = _two_sum(s, p)
        c += q + e
    return s + c


def _rel(r: Array, b: Array) -> float:
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(r) / nb) if nb > 0 else float(np.linalg.norm(r))


def iterative_refine(system: NormalSystem | Array, x0: Array | None = None,
                     max_iter: int = DEFAULT_MAX_ITER, target: float = DEFAULT_TARGET,
                     cutoff: float = DEFAULT_CUTOFF, rhs: Array | None = None,
                     solver: PinvSolver | None = None) -> tuple[Array, SolveReport]:
    """Residual-correction steps ``x <- x + pinv(A) (b - A x)``.

    The iterate is carried as an unevaluated sum ``hi + lo`` of two doubles
    and residuals are formed in double-double, so the residual can drop far
    below ``eps * cond(A)``.  The returned solution is ``hi``, the iterate
    rounded to double; the recorded residuals are those of the extended
    iterate.  Stops when the relative residual reaches ``target``, after
    ``max_iter`` corrections, when two consecutive steps fail to halve the
    best residual (``stalled``), or when the residual grows on two
    consecutive steps (``diverged``).  The best iterate is returned and
    ``residual_history`` records the best residual so far.
    """
    if max_iter < 1:
        raise ValidationError("max_iter must be at least 1")
    A, b = (system.A, system.b) if isinstance(system, NormalSystem) else (np.asarray(system, float), rhs)
    if b is None:
        raise ValidationError("a right-hand side is required")
    P = solver or PinvSolver(A, cutoff)
    hi = P(b) if x0 is None else np.array(x0, dtype=float)
    lo = np.zeros_like(hi)
    r = residual_dd(A, hi, b)
    rel = _rel(r, b)
    best_x, best = hi, rel
    report = SolveReport(P.condition, P.cutoff, P.rank, 0, [rel], [rel])
    growth = slow = 0
    for it in range(1, max_iter + 1):
        if best <= target:
            break
        s, e = _two_sum(hi, P(r))
        hi, lo = _two_sum(s, lo + e)
        r = residual_dd(A, hi, b) - A @ lo
        prev = report.raw_residuals[-1]
        rel = _rel(r, b)
        report.iterations = it
        report.raw_residuals.append(rel)
        slow = slow + 1 if rel > 0.5 * best else 0
        if rel < best:
            best_x, best = hi, rel
        report.residual_history.append(best)
        growth = growth + 1 if rel > prev else 0
        if not np.isfinite(rel) or growth >= 2:
            report.diverged = True
            break
        if slow >= 2:
            report.stalled = True
            break
    return best_x, report


def solve(system: NormalSystem, cutoff: float = DEFAULT_CUTOFF, max_iter: int = DEFAULT_MAX_ITER,
          target: float = DEFAULT_TARGET, refine: bool = True) -> tuple[Array, SolveReport]:
    """pinv solve followed (optionally) by iterative refinement."""
    if not refine:
        return solve_pinv(system, cutoff)
    return iterative_refine(system, None, max_iter, target, cutoff)

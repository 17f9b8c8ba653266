"""Fitting procedures: smooth spline fits, piecewise 1-D fits with a refined
cut point, and piecewise 2-D fits with a refined level-set spline."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import numpy.typing as npt

from .errors import IncompleteDataError, NumericError, ValidationError
from .fourier import FourierTable, TestFunction
from .linsolve import (DEFAULT_CUTOFF, DEFAULT_MAX_ITER, DEFAULT_TARGET, BasisCoeffMatrix, NormalSystem,
                       SolveReport, assemble_normal, gather_data, solve)
from .models import LevelSetModel2D, Model, PiecewiseModel1D, evaluate_model, model_to_dict
from .report import ReconstructionReport
from .restricted import RestrictedTransform2D
from .splines import LevelSetSpline, SplineModel, SplineSpace
from .transforms import fourier_matrix_1d, restricted_matrices_1d, tensor_fourier_matrix

Array = npt.NDArray[np.float64]
CArray = npt.NDArray[np.complex128]


class AdvisoryWarning(UserWarning):
    """A recommended (not required) condition on the fit setup is violated."""


@dataclass(frozen=True)
class SolverSettings:
    cutoff: float = DEFAULT_CUTOFF
    max_refine: int = DEFAULT_MAX_ITER
    target: float = DEFAULT_TARGET
    refine: bool = True


def fit_indices(table: FourierTable, M: int) -> npt.NDArray[np.int64]:
    """Fit index set: ``n = 0..M`` for real 1-D data, the box ``-M..M`` otherwise.

    Rows of the result are multi-indices in C order of the box.
    """
    if M < 0:
        raise ValidationError(f"M must be non-negative, got {M}")
    if M > table.M:
        raise IncompleteDataError(f"fit bound {M} exceeds table bound {table.M}")
    if table.axes == 1:
        n = np.arange(M + 1) if table.real_source else np.arange(-M, M + 1)
        return n[:, None]
    if table.half_table:
        raise IncompleteDataError("multi-axis fits need a full table")
    r = np.arange(-M, M + 1)
    grids = np.meshgrid(*([r] * table.axes), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _check_advisory(table: FourierTable, M: int, unknowns: int) -> None:
    if table.axes == 1:
        count = M + 1 if table.real_source else 2 * M + 1
    else:
        count = ((2 * M + 1) ** table.axes + 1) // 2
    if count < 2 * unknowns:
        warnings.warn(f"{count} independent coefficients for {unknowns} unknowns; "
                      f"at least {2 * unknowns} are recommended", AdvisoryWarning, stacklevel=3)


def _solve_system(rows: CArray, freqs, data: CArray, pieces: int,
                  settings: SolverSettings) -> tuple[Array, SolveReport, NormalSystem]:
    system = assemble_normal(BasisCoeffMatrix(rows, freqs, pieces), data)
    if not np.all(np.isfinite(system.A)):
        raise NumericError("normal matrix contains non-finite entries")
    x, rep = solve(system, settings.cutoff, settings.max_refine, settings.target, settings.refine)
    return x, rep, system


def _smooth_rows(space: SplineSpace, freqs: npt.NDArray[np.int64], M: int) -> CArray:
    if space.axes == 1:
        return fourier_matrix_1d(space, freqs[:, 0])
    return tensor_fourier_matrix(space, np.arange(-M, M + 1))


def _report(kind: str, system: NormalSystem, x: Array, freqs, rep: SolveReport | None,
            model: Model) -> ReconstructionReport:
    r = system.data - system.basis.T @ x
    return ReconstructionReport(kind, float(np.vdot(r, r).real), freqs, system.data.copy(), r, rep,
                                model=model_to_dict(model))


# ---------------------------------------------------------------------------
# smooth fits


def fit_smooth(table: FourierTable, space: SplineSpace, M: int,
               settings: SolverSettings | None = None) -> tuple[SplineModel, ReconstructionReport]:
    """Least-squares spline whose Fourier coefficients match the table up to ``M``."""
    settings = settings or SolverSettings()
    if table.axes != space.axes:
        raise ValidationError(f"{table.axes}-axis table with a {space.axes}-axis space")
    freqs = fit_indices(table, M)
    _check_advisory(table, M, space.dim)
    rows = _smooth_rows(space, freqs, M)
    data = gather_data(table, freqs)
    x, rep, system = _solve_system(rows, freqs, data, 1, settings)
    model = SplineModel(space, x)
    report = _report("smooth", system, x, freqs, rep, model)
    report.objective_history = [report.objective]
    report.extra["system_size"] = system.size
    return model, report


# ---------------------------------------------------------------------------
# objective for any model


def model_transforms(model: Model, freqs: npt.NDArray[np.int64], M: int) -> CArray:
    """Fourier coefficients of ``model`` at the multi-indices ``freqs``."""
    if isinstance(model, SplineModel):
        if model.space.axes == 1:
            return fourier_matrix_1d(model.space, freqs[:, 0]).T @ model.coefficients.ravel()
        rows = tensor_fourier_matrix(model.space, np.arange(-M, M + 1))
        return rows.T @ model.coefficients.ravel()
    if isinstance(model, PiecewiseModel1D):
        left, right = restricted_matrices_1d(model.space, freqs[:, 0], model.s)
        return right.T @ model.a1 + left.T @ model.a2
    if isinstance(model, LevelSetModel2D):
        rt = RestrictedTransform2D(model.space, model.levelset.space, M)
        rows = rt.basis_rows(model.levelset)
        return rows.T @ model.coefficients
    raise ValidationError(f"unsupported model {type(model).__name__}")


def objective(table: FourierTable, model: Model, M: int) -> float:
    """``sum |f_n - S_n|^2`` over the fit index set of bound ``M``."""
    freqs = fit_indices(table, M)
    r = gather_data(table, freqs) - model_transforms(model, freqs, M)
    return float(np.vdot(r, r).real)


# ---------------------------------------------------------------------------
# piecewise 1-D


class CutObjective1D:
    """``phi(s)``: the least-squares objective minimized over both coefficient
    vectors for a fixed cut ``s``.  Results are memoized by ``s``."""

    def __init__(self, table: FourierTable, space: SplineSpace, M: int,
                 settings: SolverSettings | None = None):
        if table.axes != 1 or space.axes != 1:
            raise ValidationError("piecewise 1-D fits need 1-D data and a 1-D space")
        self.space = space
        self.M = M
        self.settings = settings or SolverSettings()
        self.freqs = fit_indices(table, M)
        self.data = gather_data(table, self.freqs)
        self.full = fourier_matrix_1d(space, self.freqs[:, 0])
        self._memo: dict[float, tuple[float, Array, SolveReport, NormalSystem]] = {}

    def solve(self, s: float) -> tuple[float, Array, SolveReport, NormalSystem]:
        s = float(s)
        hit = self._memo.get(s)
        if hit is not None:
            return hit
        left, right = restricted_matrices_1d(self.space, self.freqs[:, 0], s, self.full)
        # piece 1 lives on x >= s
        x, rep, system = _solve_system(np.vstack([right, left]), self.freqs, self.data, 2, self.settings)
        out = (system.objective(x), x, rep, system)
        self._memo[s] = out
        return out

    def __call__(self, s: float) -> float:
        return self.solve(s)[0]


@dataclass
class CutState:
    """A cut position with its objective value and finite-difference slope."""

    s: float
    value: float
    slope: float
    curvature: float


def _fd_step(s: float, rel: float) -> float:
    return rel * min(s, 1.0 - s)


def cut_state(phi: Callable[[float], float], s: float, rel_step: float = 1e-6) -> CutState:
    """Objective, central-difference slope and curvature at ``s``."""
    if not 0.0 < s < 1.0:
        raise ValidationError(f"cut point must lie in (0, 1), got {s}")
    h = _fd_step(s, rel_step)
    f0, fp, fm = phi(s), phi(s + h), phi(s - h)
    return CutState(s, f0, (fp - fm) / (2 * h), (fp - 2 * f0 + fm) / h**2)


def _clamp(s: float, target: float) -> tuple[float, bool]:
    delta = target - s
    room = 0.25 * ((1.0 - s) if delta > 0 else s)
    if abs(delta) > room:
        return s + math.copysign(room, delta), True
    return target, False


def _tangent_meet(s0: float, v0: float, g0: float, s1: float, v1: float, g1: float) -> float:
    return (v0 - v1 + g1 * s1 - g0 * s0) / (g1 - g0)


def s_step(phi: Callable[[float], float], cur: CutState, prev: CutState | None = None) -> tuple[float, bool]:
    """Next cut position from the current (and previous) slope samples.

    Candidates, each clamped to a quarter of the distance to the boundary:

    * the secant root of the slope (Newton with the curvature estimate when
      there is no previous sample), exact for a quadratic objective;
    * the zero of the tangent to ``sqrt(phi)``, exact for a quadratic
      objective with zero minimum and robust where ``phi`` flattens out;
    * when the slopes on either side have opposite signs, the meeting point
      of the two tangents of ``phi`` and of ``sqrt(phi)`` (exact for V shapes).

    The candidate with the lowest objective is taken.  Returns the new
    position and whether that candidate was clamped.
    """
    cands: list[float] = []
    if prev is not None and cur.slope != prev.slope:
        cands.append(cur.s - cur.slope * (cur.s - prev.s) / (cur.slope - prev.slope))
    elif cur.curvature > 0:
        cands.append(cur.s - cur.slope / cur.curvature)
    if cur.slope != 0 and cur.value > 0:
        cands.append(cur.s - 2.0 * cur.value / cur.slope)
    if prev is not None and cur.slope * prev.slope < 0:
        cands.append(_tangent_meet(prev.s, prev.value, prev.slope, cur.s, cur.value, cur.slope))
        if cur.value > 0 and prev.value > 0:
            r0, r1 = math.sqrt(prev.value), math.sqrt(cur.value)
            cands.append(_tangent_meet(prev.s, r0, prev.slope / (2 * r0), cur.s, r1, cur.slope / (2 * r1)))
    clamped = [_clamp(cur.s, c) for c in cands if np.isfinite(c) and c != cur.s]
    if not clamped:
        return cur.s, False
    if len(clamped) == 1:
        return clamped[0]
    return min(clamped, key=lambda c: phi(c[0]))


def refine_s(table: FourierTable, space: SplineSpace, M: int, s: float,
             rel_step: float = 1e-6, previous: float | None = None,
             settings: SolverSettings | None = None) -> float:
    """One quasi-Newton update of the cut point ``s``."""
    phi = CutObjective1D(table, space, M, settings)
    cur = cut_state(phi, s, rel_step)
    prev = cut_state(phi, previous, rel_step) if previous is not None else None
    return s_step(phi, cur, prev)[0]


def fit_piecewise_1d(table: FourierTable, space: SplineSpace, M: int, s0: float,
                     settings: SolverSettings | None = None, tol: float = 1e-12,
                     max_outer: int = 30, rel_step: float = 1e-6
                     ) -> tuple[PiecewiseModel1D, ReconstructionReport]:
    """Two splines joined at a cut ``s`` refined from ``s0``.

    Alternates the linear solve for both coefficient vectors with a scalar
    quasi-Newton update of ``s`` until ``|ds| <= tol`` or ``max_outer`` steps;
    returns the iterate with the lowest objective.
    """
    if not 0.0 < s0 < 1.0:
        raise ValidationError(f"initial cut must lie in (0, 1), got {s0}")
    phi = CutObjective1D(table, space, M, settings)
    _check_advisory(table, M, 2 * space.size)
    flags: list[str] = []
    cur = cut_state(phi, s0, rel_step)
    best_s, best = cur.s, cur.value
    history, raw, path = [best], [cur.value], [cur.s]
    prev: CutState | None = None
    rises = 0
    iterations = 0
    for _ in range(max_outer):
        s_new, clamped = s_step(phi, cur, prev)
        if clamped and "clamped" not in flags:
            flags.append("clamped")
        iterations += 1
        if abs(s_new - cur.s) <= tol or s_new == cur.s:
            break
        nxt = cut_state(phi, s_new, rel_step)
        raw.append(nxt.value)
        path.append(nxt.s)
        # steps that fail to improve on the best objective count towards stagnation
        rises = rises + 1 if nxt.value >= best else 0
        if nxt.value < best:
            best_s, best = nxt.s, nxt.value
        history.append(best)
        prev, cur = cur, nxt
        if rises >= 2:
            flags.append("stagnation")
            break
    value, x, rep, system = phi.solve(best_s)
    N = space.size
    model = PiecewiseModel1D(space, x[:N], x[N:], best_s)
    report = _report("piecewise1d", system, x, phi.freqs, rep, model)
    report.objective_history = history
    report.flags = flags
    report.extra.update({"s": best_s, "s0": s0, "iterations": iterations,
                         "raw_objectives": raw, "s_path": path, "system_size": system.size})
    return model, report


# ---------------------------------------------------------------------------
# piecewise 2-D


class LevelSetObjective2D:
    """``Phi(b)``: least-squares objective minimized over both value-coefficient
    grids for the level-set coefficients ``b``."""

    def __init__(self, table: FourierTable, value_space: SplineSpace, levelset_space: SplineSpace,
                 M: int, settings: SolverSettings | None = None, nodes_per_segment: int = 16):
        if table.axes != 2:
            raise ValidationError("piecewise 2-D fits need a 2-D table")
        self.settings = settings or SolverSettings()
        self.freqs = fit_indices(table, M)
        self.data = gather_data(table, self.freqs)
        self.rt = RestrictedTransform2D(value_space, levelset_space, M, nodes_per_segment)
        self.value_space = value_space
        self.levelset_space = levelset_space
        self.M = M

    def solve_rows(self, T1: CArray) -> tuple[float, Array, SolveReport, NormalSystem]:
        rows = self.rt.rows_from_piece1(T1)
        x, rep, system = _solve_system(rows, self.freqs, self.data, 2, self.settings)
        return system.objective(x), x, rep, system

    def piece1(self, b: Array) -> CArray:
        return self.rt.piece1(b)

    def residual(self, T1: CArray) -> tuple[float, CArray]:
        value, x, _, system = self.solve_rows(T1)
        return value, system.data - system.basis.T @ x

    def active(self, b: Array) -> list[tuple[int, int]]:
        """Coefficients whose support meets a possibly-cut cell; the objective
        does not depend on the others for small perturbations."""
        side = self.rt.classify(b)
        out = []
        for p in range(b.shape[0]):
            for q in range(b.shape[1]):
                sx, sy = self.rt.cells_for_coefficient(p, q)
                if np.any(side[sx, sy] == 0):
                    out.append((p, q))
        return out


def _perturbed(obj: LevelSetObjective2D, T_base: CArray, b: Array, p: int, q: int, delta: float) -> CArray:
    bb = b.copy()
    bb[p, q] += delta
    return obj.rt.piece1_update(T_base, b, bb, p, q)


def _fd_gradient(obj: LevelSetObjective2D, b: Array, T_base: CArray, h: float) -> Array:
    g = np.zeros_like(b)
    for p, q in obj.active(b):
        fp = obj.solve_rows(_perturbed(obj, T_base, b, p, q, h))[0]
        fm = obj.solve_rows(_perturbed(obj, T_base, b, p, q, -h))[0]
        g[p, q] = (fp - fm) / (2 * h)
    return g


def _fd_jacobian(obj: LevelSetObjective2D, b: Array, T_base: CArray, h: float
                 ) -> tuple[Array, list[tuple[int, int]]]:
    act = obj.active(b)
    cols = []
    for p, q in act:
        rp = obj.residual(_perturbed(obj, T_base, b, p, q, h))[1]
        rm = obj.residual(_perturbed(obj, T_base, b, p, q, -h))[1]
        d = (rp - rm) / (2 * h)
        cols.append(np.concatenate([d.real, d.imag]))
    J = np.stack(cols, axis=1) if cols else np.zeros((2 * len(obj.data), 0))
    return J, act


def _lbfgs_direction(g: Array, S: list[Array], Y: list[Array]) -> Array:
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(S), reversed(Y)):
        rho = 1.0 / float(y @ s)
        a = rho * float(s @ q)
        alphas.append((rho, a))
        q -= a * y
    if S:
        s, y = S[-1], Y[-1]
        q *= float(s @ y) / float(y @ y)
    for (s, y), (rho, a) in zip(zip(S, Y), reversed(alphas)):
        beta = rho * float(y @ q)
        q += (a - beta) * s
    return -q


def fit_piecewise_2d(table: FourierTable, value_space: SplineSpace, levelset_space: SplineSpace,
                     M: int, seed: LevelSetSpline | Array, max_outer: int = 4,
                     method: str = "lbfgs", settings: SolverSettings | None = None,
                     fd_step: float = 1e-6, rel_tol: float = 1e-6, history: int = 5,
                     max_backtrack: int = 8, nodes_per_segment: int = 16,
                     callback: Callable[[int, float], None] | None = None,
                     ) -> tuple[LevelSetModel2D, ReconstructionReport]:
    """Two tensor splines split by the zero set of a refined level-set spline.

    Each outer iteration rebuilds the restricted transforms for the current
    level-set coefficients ``b``, solves for both value grids, and takes a
    step on ``Phi(b)`` accepted by a halving line search.  ``method`` selects
    the step: ``"lbfgs"`` (limited-memory secant with a central-difference
    gradient) or ``"gauss-newton"`` (finite-difference Jacobian of the
    coefficient residuals with Levenberg damping).
    """
    if method not in ("lbfgs", "gauss-newton"):
        raise ValidationError(f"unknown method {method!r}")
    if max_outer < 0:
        raise ValidationError("max_outer must be non-negative")
    b = np.array(seed.coefficients if isinstance(seed, LevelSetSpline) else seed, dtype=float)
    b = b.reshape(levelset_space.shape)
    obj = LevelSetObjective2D(table, value_space, levelset_space, M, settings, nodes_per_segment)
    _check_advisory(table, M, 2 * value_space.dim)
    if obj.rt.classify(b).min() > 0 or obj.rt.classify(b).max() < 0:
        warnings.warn("seed level set has one sign on the whole square", AdvisoryWarning, stacklevel=2)
    h = fd_step * max(float(np.max(np.abs(b))), 1e-300)
    T = obj.piece1(b)
    val = obj.solve_rows(T)[0]
    history_vals = [val]
    flags: list[str] = []
    S: list[Array] = []
    Y: list[Array] = []
    g_prev: Array | None = None
    b_prev: Array | None = None
    lam = 1e-4
    evals_per_iter: list[int] = []
    for it in range(max_outer):
        start = obj.rt.evaluations
        if method == "lbfgs":
            g = _fd_gradient(obj, b, T, h).ravel()
            if g_prev is not None:
                s_vec, y_vec = b.ravel() - b_prev, g - g_prev
                if float(s_vec @ y_vec) > 1e-300:
                    S.append(s_vec)
                    Y.append(y_vec)
                    S, Y = S[-history:], Y[-history:]
            gn = float(np.linalg.norm(g))
            if gn == 0.0:
                flags.append("zero_gradient")
                break
            if S:
                direction = _lbfgs_direction(g, S, Y)
                if float(direction @ g) >= 0:
                    direction = -g
            else:
                # first step: a unit move of the largest gradient component scaled to the objective
                direction = -g * (2.0 * val / gn**2)
            candidates = [direction * 0.5**j for j in range(max_backtrack + 1)]
        else:
            J, act = _fd_jacobian(obj, b, T, h)
            _, r = obj.residual(T)
            rv = np.concatenate([r.real, r.imag])
            if J.shape[1] == 0:
                flags.append("zero_gradient")
                break
            JtJ = J.T @ J
            Jtr = J.T @ rv
            # isotropic damping: the level set is only defined up to scale and
            # coefficients far from the curve barely move it, so per-column
            # scaling would blow up steps along those weak directions
            damp = max(float(np.diag(JtJ).max()), 1e-300) * np.eye(JtJ.shape[0])
            candidates = []
            mu = lam
            for _ in range(max_backtrack + 1):
                delta = np.linalg.lstsq(JtJ + mu * damp, -Jtr, rcond=None)[0]
                step = np.zeros_like(b)
                for (p, q), v in zip(act, delta):
                    step[p, q] = v
                candidates.append(step.ravel())
                mu *= 4.0
            g = 2.0 * J.T @ rv
        accepted = False
        for j, step in enumerate(candidates):
            trial = b + step.reshape(b.shape)
            T_trial = obj.piece1(trial)
            v_trial = obj.solve_rows(T_trial)[0]
            if np.isfinite(v_trial) and v_trial < val:
                accepted = True
                if method == "gauss-newton":
                    lam = max(lam * 4.0**j / 3.0, 1e-12)
                break
        evals_per_iter.append(obj.rt.evaluations - start)
        if not accepted:
            flags.append("line_search_exhausted")
            break
        b_prev, g_prev = b.ravel().copy(), (g if method == "lbfgs" else None)
        decrease = (val - v_trial) / val if val > 0 else 0.0
        b, T, val = trial, T_trial, v_trial
        obj.rt.clear_cache()
        history_vals.append(val)
        if callback is not None:
            callback(it + 1, val)
        if decrease <= rel_tol:
            flags.append("converged")
            break
    value, x, rep, system = obj.solve_rows(T)
    D = LevelSetSpline(levelset_space, b)
    n2 = value_space.dim
    model = LevelSetModel2D(value_space, x[:n2], x[n2:], D)
    report = _report("piecewise2d", system, x, obj.freqs, rep, model)
    report.objective_history = history_vals
    report.flags = flags
    report.extra.update({"iterations": len(history_vals) - 1, "method": method,
                         "transform_evaluations": evals_per_iter, "system_size": system.size})
    return model, report


# ---------------------------------------------------------------------------
# pointwise error


def error_grid(model: Model, truth: TestFunction, grid: int = 201,
               exclusion_radius: float = 0.0) -> tuple[Array, Array, Array, npt.NDArray[np.bool_], float]:
    """Model and truth on a uniform grid.

    Returns ``(points, model values, truth values, kept mask, radius used)``;
    points within ``exclusion_radius`` of the declared singularity set are
    masked out.
    """
    if exclusion_radius < 0:
        raise ValidationError("exclusion radius must be non-negative")
    if grid < 2:
        raise ValidationError("grid must have at least 2 points per axis")
    axes = model.space.axes
    if truth.axes != axes:
        raise ValidationError(f"{truth.axes}-axis truth for a {axes}-axis model")
    t = np.linspace(0.0, 1.0, grid)
    P = np.stack([g.ravel() for g in np.meshgrid(*([t] * axes), indexing="ij")], axis=1)
    radius = exclusion_radius
    if radius > 0 and truth.singular_distance is None:
        warnings.warn(f"{truth.name} declares no singularity set; exclusion radius ignored",
                      AdvisoryWarning, stacklevel=3)
        radius = 0.0
    keep = np.ones(len(P), dtype=bool)
    if radius > 0:
        keep = truth.singular_distance(P) > radius
    return P, evaluate_model(model, P), truth(P), keep, radius


def error_report(model: Model, truth: TestFunction, grid: int = 201,
                 exclusion_radius: float = 0.0) -> dict:
    """Sup and RMS error on a uniform grid, skipping points within
    ``exclusion_radius`` of the declared singularity set."""
    P, S, F, keep, radius = error_grid(model, truth, grid, exclusion_radius)
    err = np.abs(S - F)[keep]
    return {"grid": grid, "exclusion_radius": radius, "points": int(keep.sum()),
            "sup": float(err.max()) if err.size else 0.0,
            "rms": float(np.sqrt(np.mean(err**2))) if err.size else 0.0}

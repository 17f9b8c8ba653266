from __future__ import annotations

import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from fourierfit.detect import curve_hausdorff, detect_jump_1d
from fourierfit.errors import ValidationError
from fourierfit.fourier import FourierTable, TestFunction, coeffs_from_function, get_function
from fourierfit.models import (LevelSetModel2D, PiecewiseModel1D, evaluate_model, model_from_dict, model_to_dict,
                               piece_mask)
from fourierfit.reconstruct import (AdvisoryWarning, CutObjective1D, cut_state, error_report, fit_indices,
                                    fit_piecewise_1d, fit_piecewise_2d, fit_smooth, model_transforms, objective,
                                    refine_s, s_step)
from fourierfit.splines import SplineModel, SplineSpace, levelset_eval, tensor_eval, zero_level_polyline
from fourierfit.transforms import fourier_matrix_1d, tensor_fourier_matrix

from oracles import basis_transform_1d, circle_levelset


def oracle_piecewise_table(space: SplineSpace, a1, a2, s: float, M: int) -> FourierTable:
    """Half table of a two-piece spline (``a1`` on ``[s, 1]``) by adaptive quadrature."""
    data = np.zeros(M + 1, dtype=complex)
    for i in range(1, space.size + 1):
        for n in range(M + 1):
            data[n] += a1[i - 1] * basis_transform_1d(space, i, n, s, 1.0)
            data[n] += a2[i - 1] * basis_transform_1d(space, i, n, 0.0, s)
    return FourierTable(data, M, half_table=True)


@pytest.fixture(scope="module")
def jump_table():
    return coeffs_from_function(get_function("jump1d"), 999)


@pytest.fixture(scope="module")
def synthetic_037():
    space = SplineSpace(4, 0.25)
    rng = np.random.default_rng(37)
    a1, a2 = rng.standard_normal(space.size), rng.standard_normal(space.size)
    return space, a1, a2, oracle_piecewise_table(space, a1, a2, 0.37, 30)


@pytest.fixture(scope="module")
def two_piece_2d():
    """Two random tensor splines split by an exactly representable circle."""
    vs = SplineSpace(4, 0.25, 2)
    ls = SplineSpace(4, 0.25, 2)
    rng = np.random.default_rng(0)
    a1, a2 = rng.standard_normal(vs.shape), rng.standard_normal(vs.shape)
    D = circle_levelset(ls, 0.4)
    f = TestFunction("two_piece", 2,
                     (lambda P: tensor_eval(vs, a1, P), lambda P: tensor_eval(vs, a2, P)),
                     level=lambda P: D(P), level_grad=lambda P: D.gradient(P))
    table = coeffs_from_function(f, 12, resolution=256)
    return vs, ls, a1, a2, D, table


class TestFitSmooth:
    def test_representable_1d(self):
        sp = SplineSpace(6, 0.2)
        a = np.random.default_rng(1).standard_normal(sp.size)
        n = np.arange(31)
        data = np.array([sum(a[i - 1] * basis_transform_1d(sp, i, m) for i in range(1, sp.size + 1)) for m in n])
        model, rep = fit_smooth(FourierTable(data, 30, half_table=True), sp, 30)
        assert rep.objective <= 1e-20 and rep.exact
        assert_allclose(model.coefficients, a, atol=1e-10)

    def test_representable_2d(self):
        sp = SplineSpace(4, 0.25, 2)
        a = np.random.default_rng(2).standard_normal(sp.shape)
        M = 8
        box = tensor_fourier_matrix(sp, np.arange(-M, M + 1))
        data = (a.ravel() @ box).reshape(2 * M + 1, 2 * M + 1)
        model, rep = fit_smooth(FourierTable(data, M), sp, M)
        assert rep.objective <= 1e-20

    def test_reference_1d_reduction(self):
        t = coeffs_from_function(get_function("smooth1d"), 19)
        with pytest.warns(AdvisoryWarning):
            model, rep = fit_smooth(t, SplineSpace(10, 0.1), 19)
        assert rep.extra["system_size"] == 19
        assert rep.reduction >= 6

    def test_report_objective_matches_residuals(self):
        t = coeffs_from_function(get_function("smooth2d"), 10)
        _, rep = fit_smooth(t, SplineSpace(4, 0.25, 2), 10)
        assert rep.residual_objective == pytest.approx(rep.objective, rel=1e-12)

    def test_fit_indices(self):
        assert fit_indices(coeffs_from_function(get_function("smooth1d"), 9), 5).ravel().tolist() == list(range(6))
        assert len(fit_indices(coeffs_from_function(get_function("smooth2d"), 4), 3)) == 49


class TestObjective:
    def test_zero_model(self):
        t = coeffs_from_function(get_function("smooth1d"), 20)
        sp = SplineSpace(4, 0.25)
        expect = float(np.sum(np.abs(t.data) ** 2))
        assert objective(t, SplineModel(sp, np.zeros(sp.size)), 20) == pytest.approx(expect, rel=1e-14)

    def test_model_transforms_delegate(self):
        sp = SplineSpace(5, 0.25)
        a = np.arange(sp.size, dtype=float)
        n = np.arange(7)
        got = model_transforms(SplineModel(sp, a), n[:, None], 6)
        assert_allclose(got, a @ fourier_matrix_1d(sp, n), atol=1e-15)

    def test_linear_stage_optimality_smooth(self):
        t = coeffs_from_function(get_function("smooth1d"), 30)
        sp = SplineSpace(4, 0.125)
        model, rep = fit_smooth(t, sp, 30)
        base = objective(t, model, 30)
        for i in range(sp.size):
            for eps in (1e-3, -1e-3):
                c = model.coefficients.copy()
                c[i] += eps
                assert objective(t, SplineModel(sp, c), 30) >= base - 1e-12

    def test_linear_stage_optimality_piecewise(self, jump_table):
        sp = SplineSpace(6, 0.1)
        model, _ = fit_piecewise_1d(jump_table, sp, 60, 0.49, max_outer=3)
        base = objective(jump_table, model, 60)
        for piece in ("a1", "a2"):
            for i in range(0, sp.size, 3):
                for eps in (1e-3, -1e-3):
                    a = getattr(model, piece).copy()
                    a[i] += eps
                    other = PiecewiseModel1D(sp, **{"a1": model.a1, "a2": model.a2, piece: a}, s=model.s)
                    assert objective(jump_table, other, 60) >= base - 1e-12

    def test_ground_truth_cut_scale_decreases_with_d(self, jump_table):
        vals = [CutObjective1D(jump_table, SplineSpace(6, d), 120)(0.5) for d in (0.2, 0.1)]
        assert vals[1] < vals[0]


class TestCutStep:
    def test_v_shape_converges(self):
        phi = lambda s: abs(s - 0.5) * 3.0  # noqa: E731
        s, prev = 0.42, None
        for _ in range(3):
            cur = cut_state(phi, s)
            s_new, _ = s_step(phi, cur, prev)
            prev, s = cur, s_new
            if abs(s - 0.5) <= 1e-10:
                break
        assert abs(s - 0.5) <= 1e-10

    def test_quadratic_one_step(self):
        phi = lambda s: (s - 0.3) ** 2  # noqa: E731
        s_new, clamped = s_step(phi, cut_state(phi, 0.35))
        assert not clamped and s_new == pytest.approx(0.3, abs=1e-8)

    def test_step_clamped_to_quarter_distance(self):
        phi = lambda s: (s - 0.99) ** 2 + 1.0  # noqa: E731
        s_new, clamped = s_step(phi, cut_state(phi, 0.2))
        assert clamped and s_new == pytest.approx(0.2 + 0.25 * 0.8)

    def test_refine_s_brackets_jump(self, jump_table):
        # slopes of opposite sign on either side: the tangent meeting point lands on the jump
        s1 = refine_s(jump_table, SplineSpace(10, 0.1), 999, 0.501, previous=0.499)
        assert abs(s1 - 0.5) < 1e-5

    def test_cut_state_rejects_boundary(self):
        with pytest.raises(ValidationError):
            cut_state(lambda s: s, 1.0)


class TestPiecewise1D:
    def test_synthetic_recovery(self, synthetic_037):
        space, a1, a2, table = synthetic_037
        model, rep = fit_piecewise_1d(table, space, 30, 0.36)
        assert abs(model.s - 0.37) <= 1e-8
        assert rep.objective <= 1e-18
        assert_allclose(model.a1[3:], a1[3:], atol=1e-6)

    def test_reference_reduction(self, jump_table):
        s0 = detect_jump_1d(jump_table, terms=200, points=20000).s0
        model, rep = fit_piecewise_1d(jump_table, SplineSpace(10, 0.1), 999, s0)
        assert abs(model.s - 0.5) <= 1e-6
        assert rep.reduction >= 6

    def test_offset_start_converges_in_ten(self, jump_table):
        model, rep = fit_piecewise_1d(jump_table, SplineSpace(10, 0.1), 999, 0.5 + 1e-3)
        assert abs(model.s - 0.5) <= 1e-6
        assert rep.extra["iterations"] <= 10

    def test_minimizer_against_dense_scan(self, jump_table):
        phi = CutObjective1D(jump_table, SplineSpace(10, 0.1), 999)
        grid = 0.5 + np.linspace(-2e-6, 2e-6, 41)
        best = grid[np.argmin([phi(s) for s in grid])]
        model, _ = fit_piecewise_1d(jump_table, SplineSpace(10, 0.1), 999, 0.499)
        assert abs(model.s - best) <= 1e-7

    def test_objective_slope_bounded_each_side(self, jump_table):
        phi = CutObjective1D(jump_table, SplineSpace(10, 0.1), 999)
        for side in (-1, 1):
            s = 0.5 + side * np.concatenate([[1e-6, 1e-5], np.linspace(1e-4, 1e-2, 21)])
            slopes = np.diff([phi(v) for v in s]) / np.diff(s)
            assert np.all(np.isfinite(slopes))
            assert np.abs(slopes).max() <= 1.0

    def test_deviation_bound_is_linear(self, jump_table):
        # the worst coefficient residual grows linearly with the cut offset until
        # it saturates a few thousandths away from the jump
        sp = SplineSpace(10, 0.1)
        phi = CutObjective1D(jump_table, sp, 999)
        dev = np.array([1e-4, 3e-4, 1e-3, 2e-3, 3e-3])
        worst = []
        for e in dev:
            for sign in (1, -1):
                _, x, _, system = phi.solve(0.5 + sign * e)
                worst.append(np.abs(system.data - system.basis.T @ x).max())
        dev2 = np.repeat(dev, 2)
        A = np.column_stack([dev2, np.ones_like(dev2)])
        coef, *_ = np.linalg.lstsq(A, worst, rcond=None)
        resid = np.asarray(worst) - A @ coef
        r2 = 1 - np.sum(resid**2) / np.sum((worst - np.mean(worst)) ** 2)
        assert r2 >= 0.95
        _, x, _, system = phi.solve(0.51)
        assert np.abs(system.data - system.basis.T @ x).max() <= coef[0] * 0.01 + coef[1]

    @pytest.mark.parametrize("s0", [0.23, 0.61])
    def test_continuous_function_pieces_agree(self, s0):
        sp = SplineSpace(6, 0.1)
        a = np.random.default_rng(6).standard_normal(sp.size)
        n = np.arange(61)
        table = FourierTable(a @ fourier_matrix_1d(sp, n), 60, half_table=True)
        model, _ = fit_piecewise_1d(table, sp, 60, s0, max_outer=3)
        # a basis that barely reaches across s is nearly invisible to its piece and
        # gets a min-norm coefficient, so agreement is checked close to the cut
        x = np.linspace(model.s - 2e-3, model.s + 2e-3, 101)[:, None]
        assert np.abs(tensor_eval(sp, model.a1, x) - tensor_eval(sp, model.a2, x)).max() <= 1e-6

    def test_history_non_increasing(self, jump_table):
        _, rep = fit_piecewise_1d(jump_table, SplineSpace(10, 0.1), 999, 0.47)
        h = rep.objective_history
        assert all(b <= a for a, b in zip(h, h[1:]))
        assert rep.objective == pytest.approx(min(rep.extra["raw_objectives"]), rel=1e-9)

    def test_scale_equivariance(self, synthetic_037):
        space, _, _, table = synthetic_037
        lam = 7.25
        m1, _ = fit_piecewise_1d(table, space, 30, 0.3, max_outer=6)
        m2, _ = fit_piecewise_1d(table.scaled(lam), space, 30, 0.3, max_outer=6)
        assert abs(m1.s - m2.s) <= 1e-10
        assert_allclose(m2.a1, lam * m1.a1, rtol=1e-8, atol=1e-10)
        assert_allclose(m2.a2, lam * m1.a2, rtol=1e-8, atol=1e-10)

    def test_interior_start_required(self, jump_table):
        with pytest.raises(ValidationError):
            fit_piecewise_1d(jump_table, SplineSpace(10, 0.1), 999, 0.0)


class TestPiecewise2D:
    def test_truth_is_exact(self, two_piece_2d):
        vs, _, a1, a2, D, table = two_piece_2d
        assert objective(table, LevelSetModel2D(vs, a1, a2, D), 12) <= 1e-20

    def test_gauss_newton_recovers_curve(self, two_piece_2d):
        vs, ls, _, _, D, table = two_piece_2d
        seed = D.coefficients + 2e-3 * np.cos(np.arange(D.coefficients.size)).reshape(D.coefficients.shape)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            model, rep = fit_piecewise_2d(table, vs, ls, 12, seed, max_outer=8, method="gauss-newton",
                                          rel_tol=1e-12)
        assert rep.objective <= 1e-14
        assert curve_hausdorff(model.levelset, D, D.gradient) <= 1e-6
        h = rep.objective_history
        assert all(b < a for a, b in zip(h, h[1:]))

    def test_lbfgs_monotone_and_decreasing(self, two_piece_2d):
        vs, ls, _, _, D, table = two_piece_2d
        seed = D.coefficients + 2e-3
        model, rep = fit_piecewise_2d(table, vs, ls, 12, seed, max_outer=2)
        h = rep.objective_history
        assert len(h) == 3 and h[2] < h[1] < h[0]
        assert rep.extra["method"] == "lbfgs"
        assert rep.residual_objective == pytest.approx(rep.objective, rel=1e-10)

    @pytest.mark.parametrize("lam", [0.5, 4.0])
    def test_scale_equivariance(self, two_piece_2d, lam):
        # binary scalings are exact in floating point, so the iterates agree to rounding
        vs, ls, _, _, D, table = two_piece_2d
        seed = D.coefficients + 2e-3
        m1, _ = fit_piecewise_2d(table, vs, ls, 12, seed, max_outer=1)
        m2, _ = fit_piecewise_2d(table.scaled(lam), vs, ls, 12, seed, max_outer=1)
        assert_allclose(m2.levelset.coefficients, m1.levelset.coefficients, atol=1e-10)
        assert_allclose(m2.a1, lam * m1.a1, rtol=1e-8, atol=1e-9)

    def test_scale_equivariance_general_factor(self, two_piece_2d):
        # other factors perturb the finite-difference gradient at rounding level
        vs, ls, _, _, D, table = two_piece_2d
        seed = D.coefficients + 2e-3
        m1, _ = fit_piecewise_2d(table, vs, ls, 12, seed, max_outer=1)
        m2, _ = fit_piecewise_2d(table.scaled(3.0), vs, ls, 12, seed, max_outer=1)
        step = np.abs(m1.levelset.coefficients - seed).max()
        assert np.abs(m2.levelset.coefficients - m1.levelset.coefficients).max() <= 1e-5 * step

    def test_zero_jump_pieces_agree_on_curve(self):
        vs = SplineSpace(4, 0.25, 2)
        ls = SplineSpace(4, 0.25, 2)
        a = np.random.default_rng(4).standard_normal(vs.shape)
        M = 10
        box = tensor_fourier_matrix(vs, np.arange(-M, M + 1))
        table = FourierTable((a.ravel() @ box).reshape(2 * M + 1, 2 * M + 1), M)
        D = circle_levelset(ls, 0.5)
        model, rep = fit_piecewise_2d(table, vs, ls, M, D, max_outer=0)
        P = zero_level_polyline(D, 100)
        diff = tensor_eval(vs, model.a1, P) - tensor_eval(vs, model.a2, P)
        assert np.abs(diff).max() <= 1e-6
        assert rep.objective <= 1e-20

    def test_unknown_method(self, two_piece_2d):
        vs, ls, _, _, D, table = two_piece_2d
        with pytest.raises(ValidationError):
            fit_piecewise_2d(table, vs, ls, 12, D, method="newton")

    def test_one_sided_seed_warns(self, two_piece_2d):
        vs, ls, _, _, D, table = two_piece_2d
        with pytest.warns(AdvisoryWarning):
            fit_piecewise_2d(table, vs, ls, 12, np.ones(ls.shape), max_outer=0)


class TestModels:
    def test_1d_orientation_and_cut(self):
        sp = SplineSpace(4, 0.25)
        m = PiecewiseModel1D(sp, np.ones(sp.size), np.zeros(sp.size), 0.4)
        assert_allclose(evaluate_model(m, [0.1, 0.39, 0.4, 0.9]), [0, 0, 1, 1], atol=1e-14)

    def test_delegates_to_owning_piece(self):
        sp = SplineSpace(5, 0.2)
        rng = np.random.default_rng(3)
        m = PiecewiseModel1D(sp, rng.standard_normal(sp.size), rng.standard_normal(sp.size), 0.61)
        x = rng.random(100)
        expect = np.where(x >= 0.61, SplineModel(sp, m.a1)(x[:, None]), SplineModel(sp, m.a2)(x[:, None]))
        assert_allclose(evaluate_model(m, x), expect, atol=0)

    @settings(max_examples=10, deadline=None)
    @given(seed=st.integers(0, 2**16))
    def test_piece_mask_matches_levelset_sign(self, seed):
        ls = SplineSpace(4, 0.25, 2)
        rng = np.random.default_rng(seed)
        D = circle_levelset(ls, rng.uniform(0.1, 1.5))
        vs = SplineSpace(3, 0.5, 2)
        m = LevelSetModel2D(vs, np.ones(vs.shape), -np.ones(vs.shape), D)
        P = rng.random((10_000, 2))
        mask = piece_mask(m, P)
        assert np.array_equal(mask, levelset_eval(D, P) >= 0)
        assert np.array_equal(evaluate_model(m, P) > 0, mask)

    def test_outside_cube(self):
        sp = SplineSpace(4, 0.25)
        m = PiecewiseModel1D(sp, np.ones(sp.size), np.zeros(sp.size), 0.4)
        with pytest.raises(ValidationError):
            evaluate_model(m, [1.2])
        with pytest.raises(ValidationError):
            evaluate_model(SplineModel(SplineSpace(4, 0.25, 2), np.zeros((7, 7))), [[0.5, -0.1]])

    def test_bad_cut(self):
        sp = SplineSpace(4, 0.25)
        with pytest.raises(ValidationError):
            PiecewiseModel1D(sp, np.ones(sp.size), np.ones(sp.size), 1.0)

    def test_dict_round_trip(self, two_piece_2d):
        vs, _, a1, a2, D, _ = two_piece_2d
        sp = SplineSpace(4, 0.25)
        models = [SplineModel(sp, np.linspace(0, 1, sp.size)),
                  PiecewiseModel1D(sp, np.ones(sp.size), np.arange(sp.size, dtype=float), 0.3),
                  LevelSetModel2D(vs, a1, a2, D)]
        P = np.random.default_rng(0).random((50, 2))
        for m in models:
            back = model_from_dict(json.loads(json.dumps(model_to_dict(m))))
            pts = P if m.space.axes == 2 else P[:, :1]
            assert np.array_equal(evaluate_model(back, pts), evaluate_model(m, pts))


class TestErrorReport:
    def test_representable_truth(self):
        sp = SplineSpace(4, 0.25)
        a = np.random.default_rng(5).standard_normal(sp.size)
        truth = TestFunction("spline", 1, (lambda P: tensor_eval(sp, a, P),))
        r = error_report(SplineModel(sp, a), truth, grid=501)
        assert r["sup"] <= 1e-10 and r["points"] == 501

    def test_radius_ignored_without_singularity(self):
        sp = SplineSpace(4, 0.25)
        with pytest.warns(AdvisoryWarning, match="exclusion radius ignored"):
            r = error_report(SplineModel(sp, np.zeros(sp.size)), get_function("smooth1d"), 101, 0.1)
        assert r["exclusion_radius"] == 0.0 and r["points"] == 101

    def test_strip_needed_for_jump(self, jump_table):
        model, _ = fit_piecewise_1d(jump_table, SplineSpace(10, 0.1), 999, 0.4999)
        # a cut that misses 0.5 slightly leaves an O(1) error next to the jump
        shifted = PiecewiseModel1D(model.space, model.a1, model.a2, 0.5 + 2e-3)
        truth = get_function("jump1d")
        near = error_report(shifted, truth, grid=2001, exclusion_radius=0.0)
        off = error_report(shifted, truth, grid=2001, exclusion_radius=0.01)
        jump = abs(np.sin(2.5) - 2.0)
        assert near["sup"] >= 0.5 * jump
        assert off["sup"] <= 1e-3
        assert off["points"] < near["points"]

    def test_negative_radius(self):
        sp = SplineSpace(4, 0.25)
        with pytest.raises(ValidationError):
            error_report(SplineModel(sp, np.zeros(sp.size)), get_function("smooth1d"), 11, -1.0)

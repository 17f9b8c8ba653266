from __future__ import annotations

from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from fourierfit.errors import IncompleteDataError, NumericError, ValidationError
from fourierfit.fourier import coeffs_from_function, get_function
from fourierfit.linsolve import (BasisCoeffMatrix, NormalSystem, assemble_normal, iterative_refine, residual_dd,
                                 solve, solve_pinv)
from fourierfit.splines import SplineSpace
from fourierfit.transforms import fourier_matrix_1d

from oracles import exact_solution, spectral_system


def random_basis(rng: np.random.Generator, rows: int, cols: int) -> BasisCoeffMatrix:
    G = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
    return BasisCoeffMatrix(G, np.arange(cols))


def hilbert_solve_exact(n: int, b: list[Fraction]) -> list[Fraction]:
    H = [[Fraction(1, i + j + 1) for j in range(n)] + [b[i]] for i in range(n)]
    for c in range(n):
        for r in range(c + 1, n):
            f = H[r][c] / H[c][c]
            H[r] = [a - f * p for a, p in zip(H[r], H[c])]
    x = [Fraction(0)] * n
    for r in reversed(range(n)):
        x[r] = (H[r][n] - sum(H[r][j] * x[j] for j in range(r + 1, n))) / H[r][r]
    return x


class TestAssemble:
    def test_single_entry(self):
        B = BasisCoeffMatrix(np.array([[0.3 - 0.4j]]), np.array([2]))
        sys = assemble_normal(B, np.array([1.5 + 2j]))
        assert sys.A[0, 0] == pytest.approx(0.25, abs=1e-16)
        assert sys.b[0] == pytest.approx(0.3 * 1.5 + (-0.4) * 2, abs=1e-16)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**20), rows=st.integers(1, 8), cols=st.integers(1, 12))
    def test_gram_identity(self, seed, rows, cols):
        rng = np.random.default_rng(seed)
        B = random_basis(rng, rows, cols)
        sys = assemble_normal(B, rng.standard_normal(cols) + 0j)
        G = np.concatenate([B.values.real, B.values.imag], axis=1)
        assert_allclose(sys.A, G @ G.T, atol=1e-12)
        assert np.array_equal(sys.A, sys.A.T)
        assert np.linalg.eigvalsh(sys.A).min() >= -1e-10 * max(1.0, np.abs(sys.A).max())

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**20))
    def test_quadratic_form_matches_objective(self, seed):
        rng = np.random.default_rng(seed)
        B = random_basis(rng, 5, 9)
        f = rng.standard_normal(9) + 1j * rng.standard_normal(9)
        sys = assemble_normal(B, f)
        x = rng.standard_normal(5)
        direct = sys.objective(x)
        assert sys.quadratic_form(x) == pytest.approx(direct, rel=1e-10, abs=1e-12)

    def test_reference_1d_size(self):
        sp = SplineSpace(10, 0.1)
        n = np.arange(20)
        t = coeffs_from_function(get_function("smooth1d"), 19)
        sys = assemble_normal(BasisCoeffMatrix(fourier_matrix_1d(sp, n), n), t)
        assert sys.A.shape == (19, 19)

    def test_missing_coefficient(self):
        t = coeffs_from_function(get_function("smooth1d"), 5)
        B = BasisCoeffMatrix(np.ones((2, 7)), np.arange(7))
        with pytest.raises(IncompleteDataError, match="6"):
            assemble_normal(B, t)

    def test_missing_coefficient_2d(self):
        t = coeffs_from_function(get_function("smooth2d"), 2)
        B = BasisCoeffMatrix(np.ones((1, 2)), np.array([[0, 0], [3, 1]]))
        with pytest.raises(IncompleteDataError, match=r"\(3, 1\)"):
            assemble_normal(B, t)

    def test_index_set_must_match(self):
        B = BasisCoeffMatrix(np.ones((1, 2)), np.array([0, 1]))
        with pytest.raises(ValidationError):
            assemble_normal(B, np.ones(2), freqs=[0, 2])

    def test_non_finite_basis(self):
        with pytest.raises(NumericError):
            BasisCoeffMatrix(np.array([[np.inf]]), np.array([0]))


class TestPinv:
    def test_identity(self):
        b = np.array([1.0, -2.0, 3.5])
        x, rep = solve_pinv(np.eye(3), rhs=b)
        assert_allclose(x, b, atol=0)
        assert rep.rank == 3 and rep.condition == 1.0

    def test_duplicate_basis_gets_equal_coefficients(self):
        rng = np.random.default_rng(5)
        G = rng.standard_normal((4, 10)) + 1j * rng.standard_normal((4, 10))
        G = np.vstack([G, G[2]])  # basis 5 duplicates basis 3
        sys = assemble_normal(BasisCoeffMatrix(G, np.arange(10)), rng.standard_normal(10) + 0j)
        x, rep = solve_pinv(sys)
        assert rep.rank == 4
        assert x[2] == pytest.approx(x[4], rel=1e-10)
        # orthogonal to the null vector e3 - e5
        assert abs(x[2] - x[4]) <= 1e-10 * np.abs(x).max()

    def test_zero_row_gets_zero_coefficient(self):
        rng = np.random.default_rng(6)
        G = rng.standard_normal((3, 8)) + 0j
        G[1] = 0.0
        sys = assemble_normal(BasisCoeffMatrix(G, np.arange(8)), rng.standard_normal(8) + 0j)
        x, rep = solve_pinv(sys)
        assert rep.rank == 2 and x[1] == 0.0

    def test_hilbert_against_rational_elimination(self):
        n = 8
        H = np.array([[1.0 / (i + j + 1) for j in range(n)] for i in range(n)])
        b = H @ np.ones(n)
        # the stored matrix is rounded; the oracle solves the stored system exactly
        exact = np.array([float(v) for v in hilbert_solve_exact(n, [Fraction(v) for v in b])])
        exact_stored = exact_solution(H, b)
        x, rep = solve_pinv(H, rhs=b)
        cond = np.linalg.cond(H)
        err = np.linalg.norm(x - exact_stored) / np.linalg.norm(exact_stored)
        assert err <= 100 * cond * np.finfo(float).eps
        assert rep.condition == pytest.approx(cond, rel=1e-3)
        # rational oracle (unrounded H) and stored-system oracle agree to rounding of H
        assert np.linalg.norm(exact - exact_stored) / np.linalg.norm(exact) <= cond * 1e-15

    def test_residual_orthogonal_to_range(self):
        rng = np.random.default_rng(8)
        G = rng.standard_normal((6, 4)) @ rng.standard_normal((4, 15))  # rank 4
        sys = assemble_normal(BasisCoeffMatrix(G + 0j, np.arange(15)), rng.standard_normal(15) + 0j)
        x, rep = solve_pinv(sys)
        r = sys.A @ x - sys.b
        w, V = np.linalg.eigh(sys.A)
        R = V[:, w > 1e-10 * w.max()]
        assert np.linalg.norm(R.T @ r) <= 1e-10 * np.linalg.norm(sys.b)

    def test_bad_cutoff(self):
        with pytest.raises(ValidationError):
            solve_pinv(np.eye(2), cutoff=0.0, rhs=np.ones(2))
        with pytest.raises(ValidationError):
            solve_pinv(np.eye(2), cutoff=1.0, rhs=np.ones(2))

    def test_non_finite(self):
        with pytest.raises(NumericError):
            solve_pinv(np.array([[np.nan]]), rhs=np.ones(1))
        with pytest.raises(NumericError):
            solve_pinv(np.eye(1), rhs=np.array([np.inf]))


class TestRefinement:
    def test_well_conditioned_one_step(self):
        A, b = spectral_system(20, 10.0, 1)
        x, rep = iterative_refine(A, rhs=b)
        assert rep.iterations <= 1
        assert rep.final_residual <= 1e-14

    def test_cond_1e12_reduces_solution_error(self):
        A, b = spectral_system(60, 1e12, 3)
        exact = exact_solution(A, b)
        x1, single = solve_pinv(A, rhs=b)
        x2, refined = iterative_refine(A, rhs=b)
        e1 = np.linalg.norm(x1 - exact) / np.linalg.norm(exact)
        e2 = np.linalg.norm(x2 - exact) / np.linalg.norm(exact)
        assert single.final_residual >= 1e-8
        assert refined.final_residual <= 1e-12
        assert e2 <= 1e-4 * e1

    def test_history_non_increasing(self):
        for seed in range(5):
            A, b = spectral_system(30, 1e14, seed)
            _, rep = iterative_refine(A, rhs=b, target=1e-30)
            h = rep.residual_history
            assert all(b2 <= b1 for b1, b2 in zip(h, h[1:]))
            assert rep.final_residual == h[-1]

    def test_stalls_at_truncation_floor(self):
        # rank-deficient by construction: refinement cannot reduce the residual below the discarded part
        A, b = spectral_system(30, 1e20, 2)
        _, rep = iterative_refine(A, rhs=b, target=1e-30, max_iter=50)
        assert rep.stalled or rep.iterations == 50
        assert rep.rank < 30

    def test_max_iter_validation(self):
        with pytest.raises(ValidationError):
            iterative_refine(np.eye(2), rhs=np.ones(2), max_iter=0)

    def test_solve_switch(self):
        A, b = spectral_system(10, 1e3, 4)
        sys = NormalSystem(A, b, np.arange(1), np.zeros((10, 1)), np.zeros(1))
        _, r0 = solve(sys, refine=False)
        _, r1 = solve(sys)
        assert r0.iterations == 0 and r1.final_residual <= 1e-12

    def test_residual_dd_beats_plain(self):
        A, b = spectral_system(40, 1e12, 9)
        x = exact_solution(A, b)
        with mpmath.workdps(60):
            r_exact = [float(v) for v in (mpmath.matrix(b.tolist()) - mpmath.matrix(A.tolist()) * mpmath.matrix(x.tolist()))]
        err_dd = np.linalg.norm(residual_dd(A, x, b) - r_exact)
        err_plain = np.linalg.norm((b - A @ x) - r_exact)
        assert err_dd <= 1e-3 * err_plain

    def test_reference_1d_system(self):
        sp = SplineSpace(10, 0.1)
        n = np.arange(20)
        t = coeffs_from_function(get_function("smooth1d"), 19)
        sys = assemble_normal(BasisCoeffMatrix(fourier_matrix_1d(sp, n), n), t)
        x, rep = solve(sys)
        # numerically singular in double precision: the cutoff drops some directions
        assert rep.rank < 19
        assert sys.objective(x) <= 1e-14 * sys.data_norm2

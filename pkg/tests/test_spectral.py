import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

import kwavelab as kw
from kwavelab.spectral import (AliasingError, Basis, ModalState, dual_norm_sq,
                               from_grid, integral_of_G, integrate_grid,
                               to_grid)


def mode_field(basis, index, amp=1.0):
    f = np.zeros(basis.n_modes)
    f[index] = amp
    return f


class TestBasis:
    def test_eigenvalues_d1(self):
        b = Basis(1, 4)
        assert np.allclose(b.eigenvalues, np.pi ** 2 * np.array([1, 4, 9, 16]))

    def test_lambda1_is_min(self):
        for d in (1, 2, 3):
            b = Basis(d, 3)
            assert b.lambda1 == pytest.approx(d * np.pi ** 2)
            assert b.lambda1 == pytest.approx(np.min(b.eigenvalues))

    def test_enumeration_fixed(self):
        b = Basis(2, 2)
        assert [tuple(m) for m in b.multi_indices] == [(1, 1), (1, 2), (2, 1), (2, 2)]


class TestNorms:
    def test_grad_norm_zero_field(self):
        b = Basis(1, 8)
        assert kw.grad_norm_sq(b, np.zeros(8)) == 0.0

    def test_grad_norm_mode1_quadrature_oracle(self):
        # integral of |d/dx sqrt(2) sin(pi x)|^2 over (0,1)
        oracle, _ = quad(lambda x: 2.0 * (np.pi * np.cos(np.pi * x)) ** 2, 0, 1)
        b = Basis(1, 8)
        assert kw.grad_norm_sq(b, mode_field(b, 0)) == pytest.approx(oracle, rel=1e-12)
        assert oracle == pytest.approx(np.pi ** 2, rel=1e-12)

    def test_grad_norm_mode3_amp2(self):
        oracle, _ = quad(lambda x: (2.0 * math.sqrt(2) * 3 * np.pi * np.cos(3 * np.pi * x)) ** 2, 0, 1)
        b = Basis(1, 8)
        assert kw.grad_norm_sq(b, mode_field(b, 2, amp=2.0)) == pytest.approx(oracle, rel=1e-10)
        assert oracle == pytest.approx(36 * np.pi ** 2, rel=1e-10)

    def test_xt_norm_zero_state(self):
        b = Basis(1, 8)
        st0 = kw.zero_state(b)
        assert kw.xt_norm_sq(b, st0, kw.EpsilonProfile()) == 0.0

    def test_xt_norm_velocity_only(self):
        b = Basis(1, 8)
        state = ModalState(np.zeros(8), mode_field(b, 0), 0.0)
        eps2 = kw.EpsilonProfile(kind="constant", alpha=2.0)
        assert kw.xt_norm_sq(b, state, eps2) == pytest.approx(2.0, rel=1e-14)

    def test_xt_norm_displacement_only(self):
        b = Basis(1, 8)
        state = ModalState(mode_field(b, 0), np.zeros(8), 0.0)
        assert kw.xt_norm_sq(b, state, kw.EpsilonProfile()) == pytest.approx(np.pi ** 2, rel=1e-14)

    def test_poincare_inequality(self):
        rng = np.random.default_rng(3)
        for d in (1, 2, 3):
            b = Basis(d, 4)
            fields = rng.standard_normal((1000, b.n_modes))
            lhs = b.lambda1 * np.sum(fields ** 2, axis=1)
            rhs = np.sum(b.eigenvalues * fields ** 2, axis=1)
            assert np.all(lhs <= rhs * (1 + 1e-12))


class TestLaplacianOps:
    def test_inverse_roundtrip(self):
        rng = np.random.default_rng(7)
        b = Basis(2, 5)
        f = rng.standard_normal(b.n_modes)
        back = kw.apply_inv_neg_laplacian(b, kw.apply_neg_laplacian(b, f))
        assert np.max(np.abs(back - f)) < 1e-12

    def test_inv_sqrt_mode1(self):
        b = Basis(1, 4)
        out = kw.apply_inv_sqrt_neg_laplacian(b, mode_field(b, 0))
        assert out[0] == pytest.approx(1.0 / np.pi, rel=1e-14)

    def test_zero_field(self):
        b = Basis(1, 4)
        assert not kw.apply_neg_laplacian(b, np.zeros(4)).any()

    def test_operators_commute(self):
        rng = np.random.default_rng(11)
        b = Basis(3, 3)
        f = rng.standard_normal(b.n_modes)
        ab = kw.apply_inv_sqrt_neg_laplacian(b, kw.apply_neg_laplacian(b, f))
        ba = kw.apply_neg_laplacian(b, kw.apply_inv_sqrt_neg_laplacian(b, f))
        assert np.max(np.abs(ab - ba)) < 1e-12

    def test_dual_norm(self):
        b = Basis(1, 4)
        assert dual_norm_sq(b, mode_field(b, 0)) == pytest.approx(1.0 / np.pi ** 2, rel=1e-14)


class TestTransforms:
    @pytest.mark.parametrize("dim,n,m", [(1, 8, 16), (2, 5, 10), (3, 4, 8)])
    def test_roundtrip_identity(self, dim, n, m):
        rng = np.random.default_rng(dim)
        b = Basis(dim, n)
        f = rng.standard_normal(b.n_modes)
        back = from_grid(b, to_grid(b, f, m), m)
        assert np.max(np.abs(back - f)) < 1e-10

    def test_single_mode_nodal_values(self):
        b = Basis(1, 8)
        vals = to_grid(b, mode_field(b, 2), 16)
        x = np.arange(1, 16) / 16.0
        assert np.allclose(vals, math.sqrt(2) * np.sin(3 * np.pi * x), atol=1e-12)

    def test_zero_field(self):
        b = Basis(2, 4)
        assert not to_grid(b, np.zeros(16), 8).any()

    def test_aliasing_guard(self):
        b = Basis(1, 8)
        with pytest.raises(AliasingError):
            to_grid(b, np.zeros(8), 8)

    def test_batch_dimension(self):
        rng = np.random.default_rng(5)
        b = Basis(2, 4)
        f = rng.standard_normal((7, b.n_modes))
        vals = to_grid(b, f, 8)
        assert vals.shape == (7, 7, 7)
        back = from_grid(b, vals, 8)
        assert np.max(np.abs(back - f)) < 1e-10

    @given(st.integers(min_value=0, max_value=2 ** 31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_parseval(self, seed):
        rng = np.random.default_rng(seed)
        b = Basis(1, 8)
        f = rng.standard_normal(8)
        vals = to_grid(b, f, 16)
        grid_norm = integrate_grid(vals ** 2, 16, 1)
        assert grid_norm == pytest.approx(kw.norm_sq(f), rel=1e-8)


class TestNonlinearityModal:
    def test_zero_g(self):
        b = Basis(1, 8)
        out = kw.eval_nonlinearity_modal(kw.NonlinearitySpec.zero(), b, np.ones(8))
        assert not out.any()

    def test_linear_g_exact(self):
        # g(u) = a*u commutes with the transforms
        knots = np.linspace(-50, 50, 3)
        spec = kw.NonlinearitySpec.from_table(knots, 0.5 * knots, k=0.5)
        b = Basis(1, 8)
        rng = np.random.default_rng(9)
        f = rng.standard_normal(8)
        out = kw.eval_nonlinearity_modal(spec, b, f)
        assert np.max(np.abs(out - 0.5 * f)) < 1e-10

    def test_cubic_single_mode_quadrature_oracle(self):
        # project -(sqrt(2) sin(2 pi x))^3 on each retained mode by quadrature
        b = Basis(1, 8)
        out = kw.eval_nonlinearity_modal(kw.NonlinearitySpec.cubic_soft(), b, mode_field(b, 1))
        for m in range(8):
            oracle, _ = quad(lambda x: -(math.sqrt(2) * np.sin(2 * np.pi * x)) ** 3
                             * math.sqrt(2) * np.sin((m + 1) * np.pi * x), 0, 1,
                             limit=200)
            assert out[m] == pytest.approx(oracle, abs=1e-9)

    def test_integral_of_G_quadrature_oracle(self):
        b = Basis(1, 8)
        f = mode_field(b, 0, amp=1.3)
        oracle, _ = quad(lambda x: -0.25 * (1.3 * math.sqrt(2) * np.sin(np.pi * x)) ** 4, 0, 1)
        assert integral_of_G(kw.NonlinearitySpec.cubic_soft(), b, f) == pytest.approx(oracle, rel=1e-10)

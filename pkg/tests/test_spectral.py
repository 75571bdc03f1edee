import numpy as np
import pytest

from gkdv.spectral import (
    SingularModeError,
    apply_d1,
    apply_d2,
    apply_d3,
    inner_h,
    make_grid,
    norm_h,
    solve_block,
    solve_block2,
)
from gkdv.tableaus import gauss_legendre_tableau

from conftest import random_smooth_field


class TestMakeGrid:
    def test_basic_spacing(self):
        g = make_grid(np.pi, 8)
        assert g.h == np.pi / 4
        assert g.x[0] == -np.pi
        assert np.isclose(g.x[-1], 3 * np.pi / 4)
        assert g.h * g.N == 2 * g.L  # exact for power-of-two N

    def test_paper_grids(self):
        g = make_grid(30 * np.pi, 2048)
        assert g.h == 30 * np.pi / 1024
        g = make_grid(10 * np.pi, 1024)
        assert g.N == 1024 and g.nmodes == 513

    @pytest.mark.parametrize("L,N", [(np.pi, 9), (np.pi, 4), (0.0, 64),
                                     (-1.0, 64), (np.pi, 48)])
    def test_rejects_bad_arguments(self, L, N):
        with pytest.raises(ValueError):
            make_grid(L, N)

    def test_multiplier_structure(self):
        g = make_grid(2.0, 32)
        assert np.all(g.k1.real == 0)          # purely imaginary
        assert g.k1[-1] == 0                   # Nyquist zeroed
        assert np.all(g.k2 <= 0) and np.all(g.k2.imag == 0)
        assert g.k2[-1] != 0                   # even derivative keeps Nyquist
        np.testing.assert_allclose(g.k3, g.k1 * g.k2)


class TestDerivatives:
    def test_d1_constant_is_zero(self, grid64):
        u = np.ones(grid64.N)
        assert np.abs(apply_d1(grid64, u)).max() < 1e-13

    def test_d1_resolved_mode_exact(self, grid64):
        g = grid64
        u = np.sin(2 * np.pi * g.x / g.L)
        exact = (2 * np.pi / g.L) * np.cos(2 * np.pi * g.x / g.L)
        assert np.abs(apply_d1(g, u) - exact).max() < 1e-12

    def test_d1_antisymmetry_direct_sum(self, grid64, rng):
        g = grid64
        u = rng.standard_normal(g.N)
        uh = np.fft.rfft(u)
        uh[-1] = 0.0
        u = np.fft.irfft(uh, n=g.N)
        val = g.h * np.sum(apply_d1(g, u) * u)  # direct summation oracle
        assert abs(val) < 1e-11 * norm_h(g, u) ** 2

    def test_d2_constant_and_mode(self, grid64):
        g = grid64
        assert np.abs(apply_d2(g, np.ones(g.N))).max() < 1e-12
        u = np.cos(2 * np.pi * g.x / g.L)
        exact = -((2 * np.pi / g.L) ** 2) * u
        assert np.abs(apply_d2(g, u) - exact).max() < 1e-12

    def test_d3_composes_d1_d2(self, grid64, rng):
        g = grid64
        u = random_smooth_field(g, rng)
        d3 = apply_d3(g, u)
        composed = apply_d1(g, apply_d2(g, u))
        assert np.abs(d3 - composed).max() < 1e-12 * max(1.0, np.abs(d3).max())

    def test_d2_symmetry(self, grid64, rng):
        g = grid64
        u = random_smooth_field(g, rng)
        w = random_smooth_field(g, rng)
        lhs = inner_h(g, apply_d2(g, u), w)
        rhs = inner_h(g, u, apply_d2(g, w))
        assert abs(lhs - rhs) < 1e-11 * norm_h(g, u) * norm_h(g, w)

    def test_d1_d2_commute(self, grid64, rng):
        g = grid64
        u = random_smooth_field(g, rng)
        a = apply_d1(g, apply_d2(g, u))
        b = apply_d2(g, apply_d1(g, u))
        assert np.abs(a - b).max() < 1e-11 * max(1.0, np.abs(a).max())

    def test_round_trip(self, grid64, rng):
        g = grid64
        u = rng.standard_normal(g.N)
        back = g.from_modes(g.to_modes(u))
        assert np.abs(back - u).max() < 1e-13 * np.abs(u).max()

    def test_length_mismatch(self, grid64):
        with pytest.raises(ValueError, match="length"):
            apply_d1(grid64, np.zeros(grid64.N + 1))


class TestInnerProduct:
    def test_constant(self):
        g = make_grid(3.0, 16)
        ones = np.ones(g.N)
        assert np.isclose(inner_h(g, ones, ones), 2 * g.L, rtol=1e-14)

    def test_zero_norm(self, grid64):
        assert norm_h(grid64, np.zeros(grid64.N)) == 0.0

    def test_parseval(self, grid64, rng):
        g = grid64
        u = rng.standard_normal(g.N)
        direct = inner_h(g, u, u)
        spectral = g.h / g.N * np.sum(np.abs(np.fft.fft(u)) ** 2)
        assert abs(direct - spectral) < 1e-12 * direct


class TestBlockSolve:
    def test_tau_zero_is_identity(self, grid64, rng):
        g = grid64
        A = gauss_legendre_tableau(2).A
        r1 = rng.standard_normal(g.N)
        r2 = rng.standard_normal(g.N)
        f1, f2 = solve_block2(g, 0.0, A, r1, r2)
        np.testing.assert_allclose(f1, r1, atol=1e-14)
        np.testing.assert_allclose(f2, r2, atol=1e-14)

    def test_diagonal_decoupled(self, grid64, rng):
        g = grid64
        A = np.diag([0.3, 0.7])
        r1 = random_smooth_field(g, rng)
        f1, f2 = solve_block2(g, 0.05, A, r1, np.zeros(g.N))
        assert np.abs(f2).max() < 1e-14
        lhs = f1 + 0.05 * 0.3 * apply_d3(g, f1)
        assert np.abs(lhs - r1).max() < 1e-11 * np.abs(r1).max()

    def test_residual_oracle_irk4(self, grid64, rng):
        g = grid64
        tau = 0.1
        A = gauss_legendre_tableau(2).A
        r1 = rng.standard_normal(g.N)
        r2 = rng.standard_normal(g.N)
        f1, f2 = solve_block2(g, tau, A, r1, r2)
        res1 = f1 + tau * (A[0, 0] * apply_d3(g, f1) + A[0, 1] * apply_d3(g, f2)) - r1
        res2 = f2 + tau * (A[1, 0] * apply_d3(g, f1) + A[1, 1] * apply_d3(g, f2)) - r2
        scale = max(np.abs(r1).max(), np.abs(r2).max())
        assert max(np.abs(res1).max(), np.abs(res2).max()) < 1e-11 * scale

    def test_matches_dense_per_mode_solve(self, grid64, rng):
        g = grid64
        tau = 0.07
        A = gauss_legendre_tableau(2).A
        r1 = rng.standard_normal(g.N)
        r2 = rng.standard_normal(g.N)
        f1, f2 = solve_block2(g, tau, A, r1, r2)

        # independent oracle: full-spectrum dense 2x2 solves via numpy.fft.fft
        k = 2 * np.pi * np.fft.fftfreq(g.N, d=g.h)
        k1 = 1j * k
        k1[g.N // 2] = 0.0
        lam = k1 * (-(k**2))
        rh = np.stack([np.fft.fft(r1), np.fft.fft(r2)], axis=-1)[:, :, None]
        M = np.eye(2)[None, :, :] + tau * lam[:, None, None] * A[None, :, :]
        fh = np.linalg.solve(M, rh)[:, :, 0]
        o1 = np.fft.ifft(fh[:, 0]).real
        o2 = np.fft.ifft(fh[:, 1]).real
        assert np.abs(f1 - o1).max() < 1e-11
        assert np.abs(f2 - o2).max() < 1e-11

    def test_singular_mode_diagnostic(self):
        g = make_grid(np.pi, 8)  # k3 multiplier is -i at mode 1
        A = np.array([[0.0, -1.0], [1.0, 0.0]])
        with pytest.raises(SingularModeError, match="mode 1.*tau=1.0"):
            solve_block2(g, 1.0, A, np.ones(g.N), np.ones(g.N))

    @pytest.mark.parametrize("s", [1, 3])
    def test_general_stage_count(self, grid64, rng, s):
        g = grid64
        tau = 0.03
        A = gauss_legendre_tableau(s).A
        rs = [rng.standard_normal(g.N) for _ in range(s)]
        fs = solve_block(g, tau, A, rs)
        for i in range(s):
            res = fs[i] + tau * sum(
                A[i, j] * apply_d3(g, fs[j]) for j in range(s)
            ) - rs[i]
            assert np.abs(res).max() < 1e-11 * np.abs(rs[i]).max()


def test_dealias_mask_kills_top_third():
    g = make_grid(np.pi, 64, dealias=True)
    u = np.cos(30 * g.x)  # mode near the top of the spectrum
    filtered = g.filter_23(u)
    assert np.abs(filtered).max() < 1e-12
    low = np.cos(3 * g.x)
    np.testing.assert_allclose(g.filter_23(low), low, atol=1e-13)

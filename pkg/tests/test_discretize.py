"""Upwind generator assembly, implicit Euler stepping, and time series."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from specobs import (
    ExchangerParams,
    Field,
    SpatialGrid,
    TimeSeries,
    assemble_generator,
    euler_factorization,
    l2_norm,
    simulate,
    step_implicit_euler,
    unconstrained_indices,
)


def _pinned_profile(grid, amp_h=8.0, amp_c=6.0):
    f = Field(
        grid,
        amp_h * np.sin(np.pi * grid.x).astype(complex),
        amp_c * np.sin(np.pi * (1.0 - grid.x)).astype(complex),
    )
    f.zh[0] = 0.0
    f.zc[-1] = 0.0
    return f


class TestAssembly:
    def test_three_node_stencil(self):
        # dx = 1/2, unit parameters: interior hot row is
        # [+1/dx, -1/dx - c1, 0 | 0, +c1, 0] and mirrored for cold.
        gen = assemble_generator(ExchangerParams(), SpatialGrid.uniform(3))
        assert gen.mat.shape == (6, 6)
        assert_array_equal(gen.mat[1].real, [2.0, -3.0, 0.0, 0.0, 1.0, 0.0])
        assert_array_equal(gen.mat[4].real, [0.0, 1.0, 0.0, 0.0, -3.0, 2.0])
        assert_array_equal(gen.mat.imag, np.zeros((6, 6)))

    def test_inflow_rows_are_zero(self):
        gen = assemble_generator(ExchangerParams(), SpatialGrid.uniform(7))
        assert_array_equal(gen.mat[0], np.zeros(14))
        assert_array_equal(gen.mat[13], np.zeros(14))

    def test_unconstrained_indices(self):
        assert_array_equal(unconstrained_indices(5), np.arange(1, 9))

    def test_shift_adds_to_unconstrained_diagonal(self):
        p = ExchangerParams(u1=1.2, u2=0.9, c1=0.5, c2=1.5)
        g = SpatialGrid.uniform(9)
        base = assemble_generator(p, g, shift=0.0).mat
        shifted = assemble_generator(p, g, shift=2.5).mat
        expected = np.zeros_like(base)
        idx = unconstrained_indices(9)
        expected[idx, idx] = 2.5
        assert_allclose(shifted - base, expected, atol=1e-14)

    def test_shift_moves_eigenvalues(self):
        p = ExchangerParams()
        g = SpatialGrid.uniform(40)
        idx = unconstrained_indices(40)
        a0 = assemble_generator(p, g, shift=0.0).mat[np.ix_(idx, idx)]
        a5 = assemble_generator(p, g, shift=5.0).mat[np.ix_(idx, idx)]
        e0 = np.linalg.eigvals(a0) + 5.0
        e5 = np.linalg.eigvals(a5)
        # nearest-neighbour match: sorted pairing is brittle for
        # conjugate twins whose real parts agree to roundoff
        dist = np.abs(e5[:, None] - e0[None, :])
        assert np.max(dist.min(axis=1)) <= 1e-10

    def test_zero_gain_is_no_gain(self):
        p = ExchangerParams()
        g = SpatialGrid.uniform(12)
        plain = assemble_generator(p, g)
        injected = assemble_generator(p, g, kappa=Field.zeros(g))
        assert_array_equal(plain.mat, injected.mat)
        assert not plain.has_injection
        assert injected.has_injection

    def test_gain_subtracts_at_output_column(self):
        p = ExchangerParams()
        g = SpatialGrid.uniform(6)
        kappa = Field(g, np.arange(6, dtype=complex), -np.arange(6, dtype=complex))
        plain = assemble_generator(p, g)
        gen = assemble_generator(p, g, kappa=kappa)
        diff = gen.mat - plain.mat
        idx = unconstrained_indices(6)
        col = np.zeros(12, dtype=complex)
        col[idx] = -kappa.stacked()[idx]
        assert_allclose(diff[:, 6], col, atol=0)
        diff[:, 6] = 0.0
        assert_array_equal(diff, np.zeros((12, 12)))

    def test_gain_grid_mismatch_rejected(self):
        p = ExchangerParams()
        with pytest.raises(ValueError):
            assemble_generator(
                p, SpatialGrid.uniform(10), kappa=Field.zeros(SpatialGrid.uniform(11))
            )


class TestStepping:
    def test_factorization_requires_positive_dt(self):
        gen = assemble_generator(ExchangerParams(), SpatialGrid.uniform(5))
        with pytest.raises(ValueError, match="dt must be > 0"):
            euler_factorization(gen, 0.0)

    def test_cached_solver_dt_mismatch(self):
        g = SpatialGrid.uniform(5)
        gen = assemble_generator(ExchangerParams(), g)
        solver = euler_factorization(gen, 0.01)
        with pytest.raises(ValueError, match="different dt"):
            step_implicit_euler(Field.zeros(g), gen, 0.02, solver)

    def test_zero_state_stays_zero(self):
        g = SpatialGrid.uniform(20)
        gen = assemble_generator(ExchangerParams(), g)
        z = step_implicit_euler(Field.zeros(g), gen, 0.1)
        assert l2_norm(z) == 0.0

    def test_one_step_contraction_and_residual(self):
        # implicit Euler on the dissipative open loop shrinks the norm;
        # the backward residual of the solve is at machine precision
        g = SpatialGrid.uniform(200)
        gen = assemble_generator(ExchangerParams(), g)
        z0 = _pinned_profile(g)
        dt = 2.5e-3
        z1 = step_implicit_euler(z0, gen, dt)
        assert l2_norm(z1) < l2_norm(z0)
        B = np.eye(2 * g.n, dtype=complex) - dt * gen.mat
        resid = np.linalg.norm(B @ z1.stacked() - z0.stacked())
        assert resid <= 1e-10 * np.linalg.norm(z0.stacked())

    def test_dirichlet_nodes_stay_exactly_zero(self):
        g = SpatialGrid.uniform(50)
        gen = assemble_generator(ExchangerParams(), g)
        solver = euler_factorization(gen, 0.01)
        z = _pinned_profile(g)
        for _ in range(100):
            z = step_implicit_euler(z, gen, 0.01, solver)
        assert abs(z.zh[0]) <= 1e-13
        assert abs(z.zc[-1]) <= 1e-13


class TestSimulate:
    def test_step_count_ceils_to_cover_horizon(self):
        g = SpatialGrid.uniform(5)
        gen = assemble_generator(ExchangerParams(), g)
        norms, _ = simulate(gen, Field.zeros(g), dt=0.3, t_final=1.0)
        assert_allclose(norms.times, [0.0, 0.3, 0.6, 0.9, 1.2], rtol=1e-12)

    def test_exact_division_lands_on_horizon(self):
        g = SpatialGrid.uniform(5)
        gen = assemble_generator(ExchangerParams(), g)
        norms, _ = simulate(gen, Field.zeros(g), dt=0.1, t_final=1.0)
        assert len(norms) == 11
        assert_allclose(norms.times[-1], 1.0, rtol=1e-12)

    def test_snapshot_stride_keeps_first_and_last(self):
        g = SpatialGrid.uniform(5)
        gen = assemble_generator(ExchangerParams(), g)
        z = _pinned_profile(g)
        norms, snaps = simulate(gen, z, dt=0.3, t_final=1.0, snapshot_stride=3)
        # stride 3 over 4 steps: k = 0, 3, then the forced final step
        assert_allclose(snaps.times, [0.0, 0.9, 1.2], rtol=1e-12)
        assert len(norms) == 5

    def test_norm_columns_complex_and_real(self):
        g = SpatialGrid.uniform(30)
        gen = assemble_generator(ExchangerParams(), g)
        z = _pinned_profile(g)
        z.zh[1:] += 0.5j  # imaginary content separates the two columns
        norms, _ = simulate(gen, z, dt=0.05, t_final=0.2)
        vals = np.asarray(norms.values)
        assert vals.shape == (5, 2)
        assert np.all(vals[:, 1] <= vals[:, 0] + 1e-14)

    def test_linearity_of_the_flow(self):
        g = SpatialGrid.uniform(40)
        gen = assemble_generator(ExchangerParams(u1=1.1, u2=0.8, c1=0.7, c2=1.3), g)
        rng = np.random.default_rng(23)

        def rand_field():
            f = Field(
                g,
                rng.normal(size=40) + 1j * rng.normal(size=40),
                rng.normal(size=40) + 1j * rng.normal(size=40),
            )
            f.zh[0] = 0.0
            f.zc[-1] = 0.0
            return f

        z1, z2 = rand_field(), rand_field()
        a, b = 2.0 - 1.0j, -0.5 + 0.25j
        combo = Field(g, a * z1.zh + b * z2.zh, a * z1.zc + b * z2.zc)
        _, s1 = simulate(gen, z1, 0.05, 0.5)
        _, s2 = simulate(gen, z2, 0.05, 0.5)
        _, sc = simulate(gen, combo, 0.05, 0.5)
        for f1, f2, fc in zip(s1.values, s2.values, sc.values):
            expected = a * f1.stacked() + b * f2.stacked()
            scale = max(np.linalg.norm(expected), 1.0)
            assert np.linalg.norm(fc.stacked() - expected) <= 1e-10 * scale

    def test_uncoupled_transport_matches_characteristics(self):
        # c1 = c2 = 0 decouples the equations into pure transport with
        # exact solution z(x, t) = z0(x -/+ t) extended by zero inflow
        p = ExchangerParams(c1=0.0, c2=0.0)
        g = SpatialGrid.uniform(200)
        gen = assemble_generator(p, g)
        z0 = _pinned_profile(g)
        t = 0.5
        _, snaps = simulate(gen, z0, dt=2.5e-3, t_final=t, snapshot_stride=100000)
        zt = snaps.values[-1]
        xh = g.x - t
        exact_h = np.where(xh >= 0.0, 8.0 * np.sin(np.pi * np.clip(xh, 0.0, 1.0)), 0.0)
        xc = g.x + t
        exact_c = np.where(
            xc <= 1.0, 6.0 * np.sin(np.pi * (1.0 - np.clip(xc, 0.0, 1.0))), 0.0
        )
        exact = Field(g, exact_h.astype(complex), exact_c.astype(complex))
        err = l2_norm(Field(g, zt.zh - exact.zh, zt.zc - exact.zc))
        assert err <= 0.05 * l2_norm(exact)

    def test_first_order_in_time(self):
        # Richardson ratio ||z_dt - z_dt/2|| / ||z_dt/2 - z_dt/4|| ~ 2
        g = SpatialGrid.uniform(100)
        gen = assemble_generator(ExchangerParams(), g)
        z0 = _pinned_profile(g)

        def final_state(dt):
            _, snaps = simulate(gen, z0, dt, 1.0, snapshot_stride=10**9)
            return snaps.values[-1].stacked()

        d1 = np.linalg.norm(final_state(0.02) - final_state(0.01))
        d2 = np.linalg.norm(final_state(0.01) - final_state(0.005))
        assert 1.7 <= d1 / d2 <= 2.3


class TestTimeSeries:
    def test_must_start_at_zero(self):
        with pytest.raises(ValueError, match="must start at 0"):
            TimeSeries(times=np.array([0.1, 0.2]), values=[1.0, 2.0])

    def test_must_be_strictly_increasing(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            TimeSeries(times=np.array([0.0, 0.5, 0.5]), values=[1.0, 2.0, 3.0])

    def test_irregular_spacing_allowed(self):
        # snapshot series end on a shorter final interval when the
        # stride does not divide the step count
        ts = TimeSeries(times=np.array([0.0, 0.9, 1.2]), values=[1.0, 2.0, 3.0])
        assert len(ts) == 3

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            TimeSeries(times=np.array([0.0, 1.0]), values=[1.0])

"""Tests for the Lax-Milgram linear solves and the outer iteration."""
import numpy as np
import pytest

from sqglab import (
    ConfigError,
    ConvergenceError,
    SmallnessError,
    SolverConfig,
    advect,
    apply_lax_milgram_operator,
    bilinear_B,
    cauchy_constant,
    default_schedule,
    field_from_modes,
    fractional_laplacian,
    hs_norm,
    l2_inner,
    linear_solve,
    low_pass_mask,
    make_grid,
    outer_iterate,
    picard_theta1,
    project_low,
    residual,
    solve_pair_gap,
    theta2,
    to_physical,
    velocity_from_theta,
    velocity_hs_norm,
)
from sqglab.field import _wrap

ALPHA = 0.4


def zero_velocity(grid):
    zero = field_from_modes(grid, {})
    return velocity_from_theta(zero)


def ball_field(grid, rng, N):
    """Random Hermitian field supported on the lattice ball |k| <= 2^N."""
    mask = low_pass_mask(grid, N).copy()
    mask[0, 0] = False
    c = np.where(mask, rng.standard_normal((grid.K, grid.K)) + 1j * rng.standard_normal((grid.K, grid.K)), 0.0)
    K = grid.K
    idx = (-np.arange(K)) % K
    c = 0.5 * (c + np.conj(c[np.ix_(idx, idx)]))
    return _wrap(grid, c, True)


def small_velocity(grid, rng, alpha, size=0.05):
    """Velocity from a random scalar, scaled to the given critical norm."""
    w = ball_field(grid, rng, 2)
    v = velocity_from_theta(w)
    cur = velocity_hs_norm(v, 2 - 2 * alpha)
    return velocity_from_theta(w * (size / cur))


class TestConfig:
    """Solver configuration validation."""

    def test_alpha_range(self):
        """alpha must lie in (0, 1/2]."""
        with pytest.raises(ConfigError):
            SolverConfig(alpha=0.0)
        with pytest.raises(ConfigError):
            SolverConfig(alpha=0.6)
        assert SolverConfig(alpha=0.5).alpha == 0.5

    def test_schedule_must_increase(self):
        """Truncation schedules must be strictly increasing."""
        with pytest.raises(ConfigError):
            SolverConfig(alpha=ALPHA, n_schedule=(2, 2))
        with pytest.raises(ConfigError):
            SolverConfig(alpha=ALPHA, n_schedule=())

    def test_positive_tolerances(self):
        """Tolerances and caps must be positive."""
        with pytest.raises(ConfigError):
            SolverConfig(alpha=ALPHA, inner_tol=0.0)
        with pytest.raises(ConfigError):
            SolverConfig(alpha=ALPHA, max_outer=0)

    def test_default_schedule_tracks_dealias_band(self):
        """The default schedule tops out below the dealias wavenumber."""
        g = make_grid(64, np.pi)
        sched = default_schedule(g)
        assert sched == (1, 2, 3, 4)
        assert 2.0 ** sched[-1] <= g.dealias_k


class TestLaxMilgramOperator:
    """The operator theta + (-Delta)^{-alpha} P_N (v . grad theta)."""

    def test_zero_velocity_is_identity(self):
        """With v=0 the operator is the identity on its domain."""
        g = make_grid(32, np.pi)
        theta = field_from_modes(g, {(1, 0): -0.5j, (2, 1): 0.2})
        out = apply_lax_milgram_operator(zero_velocity(g), theta, 2, ALPHA)
        np.testing.assert_allclose(out.coeffs, theta.coeffs, atol=1e-15)

    def test_self_advection_drops_out(self):
        """A single-mode theta rides its own velocity unchanged."""
        g = make_grid(32, np.pi)
        theta = field_from_modes(g, {(1, 0): -0.5j})
        v = velocity_from_theta(theta)
        out = apply_lax_milgram_operator(v, theta, 1, ALPHA)
        np.testing.assert_allclose(out.coeffs, theta.coeffs, atol=1e-15)

    def test_coercivity_monte_carlo(self):
        """<A theta, theta> >= 0.5 ||theta||_{L^2}^2 for admissible velocities."""
        g = make_grid(32, np.pi)
        rng = np.random.default_rng(29)
        for _ in range(20):
            v = small_velocity(g, rng, ALPHA, size=0.09)
            theta = ball_field(g, rng, 2)
            out = apply_lax_milgram_operator(v, theta, 2, ALPHA)
            quad = l2_inner(out, theta)
            assert quad >= 0.5 * hs_norm(theta, 0.0) ** 2

    def test_out_of_range_theta_rejected(self):
        """theta must already live in the range of P_N."""
        g = make_grid(32, np.pi)
        theta = field_from_modes(g, {(5, 0): -0.5j})
        with pytest.raises(ValueError, match="P_2"):
            apply_lax_milgram_operator(zero_velocity(g), theta, 2, ALPHA)


class TestLinearSolve:
    """Truncated linear problem via matrix-free GMRES."""

    def test_zero_velocity_inverts_exactly(self):
        """With v=0 the solution is (-Delta)^{-alpha} P_N f."""
        g = make_grid(32, np.pi)
        f = field_from_modes(g, {(1, 0): -0.5j, (2, 1): 0.2, (6, 0): 0.3})
        cfg = SolverConfig(alpha=ALPHA)
        theta = linear_solve(zero_velocity(g), f, 2, cfg)
        expected = fractional_laplacian(project_low(f, 2), -ALPHA)
        np.testing.assert_allclose(theta.coeffs, expected.coeffs, atol=1e-14)

    def test_zero_force_short_circuits(self):
        """A zero right-hand side returns the zero field without iterating."""
        g = make_grid(32, np.pi)
        rng = np.random.default_rng(31)
        v = small_velocity(g, rng, ALPHA)
        cfg = SolverConfig(alpha=ALPHA)
        theta = linear_solve(v, field_from_modes(g, {}), 2, cfg)
        assert hs_norm(theta, 0.0) == 0.0

    def test_matches_dense_oracle(self):
        """GMRES agrees with a dense direct solve on the truncated ball.

        At K=16 and N=2 every product mode stays inside the dealias band,
        so the convolution matrix is the exact operator.
        """
        g = make_grid(16, np.pi)
        cfg = SolverConfig(alpha=ALPHA)
        eta = 0.02
        f = field_from_modes(g, {(1, 0): 0.5})
        v = velocity_from_theta(field_from_modes(g, {(1, 0): -0.5j * eta}))
        theta = linear_solve(v, f, 2, cfg)

        mask = low_pass_mask(g, 2).copy()
        mask[0, 0] = False
        rows = np.argwhere(mask)
        dim = len(rows)
        A = np.zeros((dim, dim), dtype=np.complex128)
        kvec = np.stack([g.kx[mask], g.ky[mask]], axis=1)
        kmag2 = g.k2[mask]
        v1c, v2c = v.v1.coeffs, v.v2.coeffs
        K = g.K
        for i in range(dim):
            for j in range(dim):
                di = (rows[i] - rows[j]) % K
                vdot = v1c[di[0], di[1]] * kvec[j, 0] + v2c[di[0], di[1]] * kvec[j, 1]
                A[i, j] = (1.0 if i == j else 0.0) + kmag2[i] ** (-ALPHA) * 1j * vdot
        b = fractional_laplacian(project_low(f, 2), -ALPHA).coeffs[mask]
        x = np.linalg.solve(A, b)
        np.testing.assert_allclose(theta.coeffs[mask], x, rtol=1e-9, atol=1e-14)

    def test_random_cases_match_dense_oracle(self):
        """The dense comparison holds for random admissible data too."""
        g = make_grid(16, np.pi)
        cfg = SolverConfig(alpha=ALPHA)
        rng = np.random.default_rng(37)
        mask = low_pass_mask(g, 2).copy()
        mask[0, 0] = False
        rows = np.argwhere(mask)
        dim = len(rows)
        kvec = np.stack([g.kx[mask], g.ky[mask]], axis=1)
        kmag2 = g.k2[mask]
        for _ in range(3):
            v = small_velocity(g, rng, ALPHA, size=0.08)
            f = ball_field(g, rng, 2)
            theta = linear_solve(v, f, 2, cfg)
            A = np.zeros((dim, dim), dtype=np.complex128)
            for i in range(dim):
                for j in range(dim):
                    di = (rows[i] - rows[j]) % g.K
                    vdot = (
                        v.v1.coeffs[di[0], di[1]] * kvec[j, 0]
                        + v.v2.coeffs[di[0], di[1]] * kvec[j, 1]
                    )
                    A[i, j] = (1.0 if i == j else 0.0) + kmag2[i] ** (-ALPHA) * 1j * vdot
            b = fractional_laplacian(project_low(f, 2), -ALPHA).coeffs[mask]
            x = np.linalg.solve(A, b)
            np.testing.assert_allclose(theta.coeffs[mask], x, rtol=1e-9, atol=1e-13)

    def test_a_priori_bound(self):
        """||theta_N||_{H^alpha} <= ||f||_{H^{-alpha}} up to rounding."""
        g = make_grid(32, np.pi)
        cfg = SolverConfig(alpha=ALPHA)
        rng = np.random.default_rng(41)
        for _ in range(10):
            v = small_velocity(g, rng, ALPHA, size=0.09)
            f = ball_field(g, rng, 2)
            theta = linear_solve(v, f, 2, cfg)
            assert hs_norm(theta, ALPHA) <= hs_norm(f, -ALPHA) * (1 + 1e-8)

    def test_large_velocity_rejected(self):
        """Velocities past the coercivity threshold raise SmallnessError."""
        g = make_grid(32, np.pi)
        v = velocity_from_theta(field_from_modes(g, {(1, 0): -0.5j}))
        f = field_from_modes(g, {(1, 0): 0.5})
        with pytest.raises(SmallnessError, match="threshold"):
            linear_solve(v, f, 2, SolverConfig(alpha=ALPHA))

    def test_cutoff_beyond_band_rejected(self):
        """2^N beyond the dealias wavenumber is refused."""
        g = make_grid(32, np.pi)
        f = field_from_modes(g, {(1, 0): 0.5})
        with pytest.raises(ValueError, match="dealias"):
            linear_solve(zero_velocity(g), f, 6, SolverConfig(alpha=ALPHA))

    def test_warm_start_agrees(self):
        """Warm and cold starts land on the same solution."""
        g = make_grid(32, np.pi)
        cfg = SolverConfig(alpha=ALPHA)
        rng = np.random.default_rng(43)
        v = small_velocity(g, rng, ALPHA)
        f = ball_field(g, rng, 2)
        cold = linear_solve(v, f, 2, cfg)
        warm = linear_solve(v, f, 2, cfg, x0=cold)
        scale = np.max(np.abs(cold.coeffs))
        np.testing.assert_allclose(warm.coeffs, cold.coeffs, atol=1e-8 * scale)


class TestResidual:
    """The nonlinear defect (-Delta)^alpha theta + v.grad theta - f."""

    def test_exact_single_mode_solution(self):
        """theta = sin(x1) solves the problem with f = sin(x1) exactly."""
        g = make_grid(32, np.pi)
        theta = field_from_modes(g, {(1, 0): -0.5j})
        rec = residual(theta, theta, ALPHA)
        assert rec.r_norm <= 1e-14

    def test_zero_fields(self):
        """Zero data has zero residual."""
        g = make_grid(32, np.pi)
        zero = field_from_modes(g, {})
        assert residual(zero, zero, ALPHA).r_norm == 0.0

    def test_projection_restricts_force(self):
        """With project_N the force outside the ball does not count."""
        g = make_grid(32, np.pi)
        theta = field_from_modes(g, {(1, 0): -0.5j})
        f_extra = field_from_modes(g, {(1, 0): -0.5j, (7, 0): 0.3})
        rec = residual(theta, f_extra, ALPHA, project_N=2)
        assert rec.r_norm <= 1e-14
        assert residual(theta, f_extra, ALPHA).r_norm > 0.1

    def test_detects_wrong_amplitude(self):
        """A miscaled candidate leaves a first-order residual."""
        g = make_grid(32, np.pi)
        theta = field_from_modes(g, {(1, 0): -0.5j})
        f = field_from_modes(g, {(1, 0): -0.55j})
        np.testing.assert_allclose(residual(theta, f, ALPHA).r_norm, 0.1 * np.pi * np.sqrt(2), rtol=1e-12)


class TestOuterIterate:
    """Dyadic truncation sweep with top-level refinement."""

    def test_zero_force(self):
        """f = 0 converges to the zero solution along the whole schedule."""
        g = make_grid(64, np.pi)
        theta, report = outer_iterate(field_from_modes(g, {}), SolverConfig(alpha=ALPHA))
        assert report.converged
        assert hs_norm(theta, ALPHA) == 0.0
        assert len(report.steps) == len(default_schedule(g))

    def test_single_mode_fixed_point(self):
        """f = delta*(-Delta)^alpha sin(x1) has theta = delta*sin(x1) exactly."""
        g = make_grid(64, np.pi)
        delta = 1e-2
        f = fractional_laplacian(field_from_modes(g, {(1, 0): -0.5j * delta}), ALPHA)
        theta, report = outer_iterate(f, SolverConfig(alpha=ALPHA))
        assert report.converged
        gap = theta - field_from_modes(g, {(1, 0): -0.5j * delta})
        assert hs_norm(gap, ALPHA) <= 1e-10 * delta
        assert report.c_star == pytest.approx(1.0, rel=1e-10)

    def test_two_mode_force_converges(self):
        """A genuinely nonlinear small force converges under the tolerance."""
        g = make_grid(64, np.pi)
        amp = 1e-2
        f = field_from_modes(g, {(1, 0): -0.5j * amp, (0, 2): 0.5 * amp})
        cfg = SolverConfig(alpha=ALPHA)
        theta, report = outer_iterate(f, cfg)
        assert report.converged
        assert report.residual <= cfg.outer_tol * hs_norm(f, -ALPHA)
        rec = residual(theta, f, ALPHA, project_N=default_schedule(g)[-1])
        np.testing.assert_allclose(rec.r_norm, report.residual, rtol=1e-10)
        assert report.c_star is not None and report.c_star <= 1.01

    def test_per_step_contraction(self):
        """Step differences obey diff_{j+1} <= 0.75 diff_j + C 2^{-alpha n/2}."""
        g = make_grid(64, np.pi)
        amp = 1e-2
        f = field_from_modes(g, {(1, 0): -0.5j * amp, (0, 2): 0.5 * amp, (2, 1): 0.3j * amp})
        _, report = outer_iterate(f, SolverConfig(alpha=ALPHA))
        c = cauchy_constant(report)
        assert np.isfinite(c)
        for prev, cur in zip(report.steps, report.steps[1:]):
            bound = 0.75 * prev.diff_h_alpha + c * 2.0 ** (-ALPHA * prev.n / 2)
            assert cur.diff_h_alpha <= bound * (1 + 1e-12)

    def test_large_force_trips_smallness_gate(self):
        """A force of order one induces an inadmissible velocity."""
        g = make_grid(64, np.pi)
        f = fractional_laplacian(field_from_modes(g, {(1, 0): -0.5j * 10.0}), ALPHA)
        with pytest.raises(SmallnessError):
            outer_iterate(f, SolverConfig(alpha=ALPHA))

    def test_outer_cap_carries_best_iterate(self):
        """Hitting the outer cap raises but keeps the best iterate."""
        g = make_grid(64, np.pi)
        amp = 1e-2
        f = field_from_modes(g, {(1, 0): -0.5j * amp, (0, 2): 0.5 * amp})
        with pytest.raises(ConvergenceError) as err:
            outer_iterate(f, SolverConfig(alpha=ALPHA, max_outer=1))
        assert err.value.best is not None
        assert err.value.residual_rel is not None and err.value.residual_rel > 0

    def test_custom_schedule_respected(self):
        """Explicit truncation levels appear verbatim in the report."""
        g = make_grid(64, np.pi)
        amp = 1e-2
        f = field_from_modes(g, {(1, 0): -0.5j * amp, (0, 2): 0.5 * amp})
        _, report = outer_iterate(f, SolverConfig(alpha=ALPHA, n_schedule=(1, 3)))
        assert report.steps[0].n == 1
        assert report.steps[1].n == 3
        assert all(s.n == 3 for s in report.steps[1:])

    def test_schedule_beyond_band_rejected(self):
        """Schedules topping out past the dealias band are refused."""
        g = make_grid(64, np.pi)
        f = field_from_modes(g, {(1, 0): -0.5j})
        with pytest.raises(ConfigError):
            outer_iterate(f, SolverConfig(alpha=ALPHA, n_schedule=(1, 8)))

    def test_report_serializes(self):
        """The report renders to plain JSON-ready types."""
        g = make_grid(64, np.pi)
        f = fractional_laplacian(field_from_modes(g, {(1, 0): -0.5j * 1e-2}), ALPHA)
        _, report = outer_iterate(f, SolverConfig(alpha=ALPHA))
        d = report.to_json_dict()
        assert d["converged"] is True
        assert isinstance(d["steps"], list) and isinstance(d["steps"][0]["n"], int)


class TestPicardIterates:
    """Closed-form first and second Picard iterates."""

    def test_theta1_unit_mode(self):
        """theta_1 of sin(x1) is sin(x1) at any alpha."""
        g = make_grid(32, np.pi)
        a = field_from_modes(g, {(1, 0): -0.5j})
        np.testing.assert_allclose(picard_theta1(a, ALPHA).coeffs, a.coeffs, atol=1e-15)

    def test_theta1_second_mode_half_power(self):
        """theta_1 of sin(2x1) at alpha=1/2 is sin(2x1)/2."""
        g = make_grid(32, np.pi)
        a = field_from_modes(g, {(2, 0): -0.5j})
        out = picard_theta1(a, 0.5)
        np.testing.assert_allclose(out.coeffs, 0.5 * a.coeffs, atol=1e-15)

    def test_plane_wave_self_interaction_vanishes(self):
        """B[a, a] = 0 for a single plane wave."""
        g = make_grid(32, np.pi)
        a = field_from_modes(g, {(3, 1): 0.2j})
        assert np.max(np.abs(bilinear_B(a, a, ALPHA).coeffs)) <= 1e-15

    def test_cross_term_closed_form(self):
        """B[cos x1, cos x2] = -2^{-alpha} sin(x1) sin(x2)."""
        g = make_grid(32, np.pi)
        a = field_from_modes(g, {(1, 0): 0.5})
        b = field_from_modes(g, {(0, 1): 0.5})
        out = bilinear_B(a, b, ALPHA)
        x = g.x_axis()
        X, Y = np.meshgrid(x, x, indexing="ij")
        np.testing.assert_allclose(
            to_physical(out), -(2.0**-ALPHA) * np.sin(X) * np.sin(Y), atol=1e-13
        )

    def test_bilinearity(self):
        """B is additive and homogeneous in each slot."""
        g = make_grid(32, np.pi)
        a = field_from_modes(g, {(1, 0): 0.5})
        b = field_from_modes(g, {(0, 1): 0.5})
        c = field_from_modes(g, {(1, 1): -0.3j})
        left = bilinear_B(a, b + c, ALPHA)
        right = bilinear_B(a, b, ALPHA) + bilinear_B(a, c, ALPHA)
        np.testing.assert_allclose(left.coeffs, right.coeffs, atol=1e-12)
        np.testing.assert_allclose(
            bilinear_B(2.0 * a, b, ALPHA).coeffs, 2.0 * bilinear_B(a, b, ALPHA).coeffs, atol=1e-12
        )

    def test_theta2_combines_iterates(self):
        """theta2 = theta_1 - B[a, a]."""
        g = make_grid(32, np.pi)
        a = field_from_modes(g, {(1, 0): 0.5, (0, 1): 0.5})
        out = theta2(a, ALPHA)
        expected = picard_theta1(a, ALPHA) - bilinear_B(a, a, ALPHA)
        np.testing.assert_allclose(out.coeffs, expected.coeffs, atol=1e-15)


class TestPairGap:
    """Data-to-solution distances for force pairs."""

    def test_identical_forces(self):
        """f = g gives zero force distance and zero solution gap."""
        g = make_grid(64, np.pi)
        amp = 1e-2
        f = field_from_modes(g, {(1, 0): -0.5j * amp, (0, 2): 0.5 * amp})
        rec = solve_pair_gap(f, f, SolverConfig(alpha=ALPHA))
        assert rec.d_low == 0.0 and rec.d_crit == 0.0
        assert rec.gap_low <= 1e-12 and rec.gap_crit <= 1e-12

    def test_small_perturbation_is_lipschitz(self):
        """Nearby small forces give solution gaps of the same size."""
        g = make_grid(64, np.pi)
        amp = 1e-2
        f = field_from_modes(g, {(1, 0): -0.5j * amp, (0, 2): 0.5 * amp})
        h = f + field_from_modes(g, {(2, 1): 1e-3 * amp})
        rec = solve_pair_gap(f, h, SolverConfig(alpha=ALPHA))
        assert rec.gap_crit <= 1.1 * rec.d_crit
        assert rec.gap_low <= 1.1 * rec.d_low


class TestScalingCovariance:
    """Dyadic rescaling maps solutions to solutions."""

    def test_rescaled_pair_still_solves(self):
        """theta -> 2^{2a-1}, f -> 2^{4a-1} rescale preserves the equation."""
        from sqglab import rescale

        g = make_grid(64, np.pi)
        amp = 1e-2
        f = field_from_modes(g, {(1, 0): -0.5j * amp, (0, 2): 0.5 * amp})
        cfg = SolverConfig(alpha=ALPHA, outer_tol=1e-11)
        theta, _ = outer_iterate(f, cfg)
        base = residual(theta, f, ALPHA, project_N=4).r_norm

        theta_z = rescale(theta, 2 * ALPHA - 1.0)
        # residual terms scale by 2^{4 alpha - 1} and the -alpha norm by
        # 2^{-(1 + alpha)}; compare against the matching exact force
        adv = advect(velocity_from_theta(theta), theta)
        f_exact = fractional_laplacian(theta, ALPHA) + project_low(adv, 4)
        f_z = rescale(f_exact, 4 * ALPHA - 1.0)
        scaled = residual(theta_z, f_z, ALPHA, project_N=4).r_norm
        factor = 2.0 ** (4 * ALPHA - 1.0) * 2.0 ** (-(1 + ALPHA))
        assert scaled <= (base * factor + 1e-13) * 1.001

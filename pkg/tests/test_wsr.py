import numpy as np
import pytest

from ris_sim import channel
from ris_sim.config import ReflectionTopology, default_config
from ris_sim.designs import Design, check_design_feasible, init_wsr_design
from ris_sim.wsr import (SolverOptions, build_theta_linear,
                         build_theta_quadratic_wsr, build_w_quadratic,
                         compute_wsr_coeffs, interference_table,
                         per_antenna_constraints, run_wsr_bmm,
                         serial_phase_sweep, solve_theta_discrete,
                         solve_theta_unimodulus, solve_w_closed_form,
                         solve_w_general_power, solve_w_total_power,
                         update_theta_serial, wsr_objective, wsr_outer_step)

from oracles import (grid_phase_minimizer, project_frobenius_ball,
                     project_row_balls, projected_gradient_quadratic)


def hand_system(users=2, m=1, sigma=1.0):
    """M=1 system with h_k = 1, w_k = 1 for quick hand evaluation."""
    cfg = default_config(users=users, bs_antennas=m, ris_elements=[2],
                         noise_power_w=sigma, power_w=float(users))
    chans = channel.generate_channels(cfg, seed=0)
    chans.direct = np.ones((users, m), dtype=complex)
    topo = ReflectionTopology.no_ris(users)
    design = Design(w=np.ones((m, users), dtype=complex),
                    thetas=[np.ones(n, dtype=complex)
                            for n in cfg.ris_elements])
    return cfg, chans, topo, design


def random_instance(seed, users=3, m=4, n=(8,), distance=100.0, **overrides):
    cfg = default_config(users=users, bs_antennas=m, ris_elements=list(n),
                         distance_m=distance, **overrides)
    chans = channel.generate_channels(cfg, seed=seed)
    topo = cfg.resolved_topology()
    design = init_wsr_design(cfg, chans, topo, seed=seed)
    return cfg, chans, topo, design


def random_psd(rng, n, scale=1.0):
    b = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * (b @ b.conj().T)


class TestObjective:
    def test_orthogonal_beam_zero_rate(self):
        cfg, chans, topo, design = hand_system(users=1, m=2)
        chans.direct = np.array([[1.0, 0.0]], dtype=complex)
        design.w = np.array([[0.0], [1.0]], dtype=complex)
        assert wsr_objective(design, chans, topo, cfg) == pytest.approx(0.0,
                                                                        abs=1e-15)

    def test_symmetric_two_user_hand_value(self):
        cfg, chans, topo, design = hand_system(users=2)
        value = wsr_objective(design, chans, topo, cfg)
        assert value == pytest.approx(2.0 * np.log(1.5), rel=1e-12)

    def test_weights_scale_objective(self):
        cfg, chans, topo, design = random_instance(0)
        base = wsr_objective(design, chans, topo, cfg)
        import dataclasses
        doubled = dataclasses.replace(cfg, weights=(2.0,) * cfg.users)
        assert wsr_objective(design, chans, topo, doubled) == pytest.approx(
            2.0 * base, rel=1e-12)


class TestCoeffs:
    def test_single_user_hand_values(self):
        cfg, chans, topo, design = hand_system(users=1)
        coeffs = compute_wsr_coeffs(design, chans, topo, cfg)
        assert coeffs.sinrs[0] == pytest.approx(1.0)
        assert coeffs.alpha[0] == pytest.approx(0.5)
        assert coeffs.beta[0] == pytest.approx(1.0)

    def test_two_user_hand_values(self):
        cfg, chans, topo, design = hand_system(users=2)
        coeffs = compute_wsr_coeffs(design, chans, topo, cfg)
        assert np.allclose(coeffs.sinrs, 0.5)
        assert np.allclose(coeffs.alpha, 1.0 / 6.0)
        assert np.allclose(coeffs.beta, 0.5)

    def test_zero_anchor_guard(self):
        cfg, chans, topo, design = hand_system(users=1)
        design.w = np.zeros_like(design.w)
        coeffs = compute_wsr_coeffs(design, chans, topo, cfg)
        assert coeffs.alpha[0] == 0.0 and coeffs.beta[0] == 0.0


class TestWQuadratic:
    def test_degenerate_all_alpha_zero(self):
        cfg, chans, topo, design = hand_system(users=1)
        design.w = np.zeros_like(design.w)
        coeffs = compute_wsr_coeffs(design, chans, topo, cfg)
        h_eff = channel.effective_channels_all(design.thetas, chans, topo)
        r, q = build_w_quadratic(coeffs, h_eff, cfg)
        assert np.allclose(r, 0.0) and np.allclose(q, 0.0)

    def test_single_user_rank_one(self):
        cfg, chans, topo, design = hand_system(users=1, m=2)
        chans.direct = np.array([[1.0, 0.0]], dtype=complex)
        design.w = np.array([[1.0], [0.0]], dtype=complex)
        coeffs = compute_wsr_coeffs(design, chans, topo, cfg)
        h_eff = channel.effective_channels_all(design.thetas, chans, topo)
        r, _ = build_w_quadratic(coeffs, h_eff, cfg)
        expected = coeffs.alpha[0] * np.outer(h_eff[0], h_eff[0].conj())
        assert np.allclose(r, expected)

    def test_r_hermitian_psd(self):
        cfg, chans, topo, design = random_instance(1)
        coeffs = compute_wsr_coeffs(design, chans, topo, cfg)
        h_eff = channel.effective_channels_all(design.thetas, chans, topo)
        r, _ = build_w_quadratic(coeffs, h_eff, cfg)
        assert np.linalg.norm(r - r.conj().T) <= 1e-12 * max(
            1.0, np.linalg.norm(r))
        assert np.linalg.eigvalsh(r)[0] >= -1e-12


class TestSolveWTotalPower:
    def test_zero_target(self):
        w = solve_w_total_power(np.eye(2, dtype=complex),
                                np.zeros((2, 2), dtype=complex), 1.0)
        assert np.allclose(w, 0.0)

    def test_interior_optimum(self):
        rng = np.random.default_rng(0)
        q = 0.3 * (rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2)))
        w = solve_w_total_power(np.eye(3, dtype=complex), q, 10.0)
        assert np.allclose(w, q)

    def test_matches_projected_gradient_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            r = random_psd(rng, 3)
            q = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
            power = 0.5
            w = solve_w_total_power(r, q, power)
            assert np.linalg.norm(w) ** 2 <= power * (1 + 1e-9)
            _, obj_oracle = projected_gradient_quadratic(
                r, q, project_frobenius_ball(power), np.sqrt(power))
            obj = float(np.real(np.vdot(w, r @ w)) - 2 * np.real(np.vdot(w, q)))
            assert obj <= obj_oracle + 1e-6 * max(1.0, abs(obj_oracle))

    def test_singular_r_consistent(self):
        # R singular but Q in range: the minimum-norm solution is used
        r = np.diag([1.0, 0.0]).astype(complex)
        q = np.array([[0.5], [0.0]], dtype=complex)
        w = solve_w_total_power(r, q, 4.0)
        assert np.allclose(w, [[0.5], [0.0]])

    def test_singular_r_inconsistent_goes_full_power(self):
        # R = 0: objective is linear, optimum sits on the power boundary
        q = np.array([[1.0], [1.0j]], dtype=complex)
        w = solve_w_total_power(np.zeros((2, 2), dtype=complex), q, 2.0)
        assert np.linalg.norm(w) ** 2 == pytest.approx(2.0, rel=1e-8)
        assert abs(np.vdot(q, w)) == pytest.approx(2.0, rel=1e-6)


class TestSolveWClosedForm:
    def _setup(self, seed):
        cfg, chans, topo, design = random_instance(seed)
        coeffs = compute_wsr_coeffs(design, chans, topo, cfg)
        h_eff = channel.effective_channels_all(design.thetas, chans, topo)
        r, q = build_w_quadratic(coeffs, h_eff, cfg)
        return cfg, design, coeffs, h_eff, r, q

    def test_surrogate_never_worse(self):
        for seed in range(10):
            cfg, design, coeffs, h_eff, r, q = self._setup(seed)
            w = solve_w_closed_form(r, q, coeffs, design.w, h_eff, cfg)

            def quad(mat):
                return float(np.real(np.vdot(mat, r @ mat))
                             - 2 * np.real(np.vdot(mat, q)))

            assert quad(w) <= quad(design.w) + 1e-10 * max(1.0, abs(quad(design.w)))

    def test_boundary_scaling(self):
        cfg, design, coeffs, h_eff, r, q = self._setup(3)
        import dataclasses
        tiny = dataclasses.replace(cfg, power_w=1e-12)
        w = solve_w_closed_form(r, q, coeffs, np.sqrt(1e-12 / cfg.power_w)
                                * design.w, h_eff, tiny)
        assert np.linalg.norm(w) ** 2 == pytest.approx(1e-12, rel=1e-9)

    def test_fixed_point(self):
        # anchor already optimal for the inner surrogate: update returns it
        cfg, design, coeffs, h_eff, r, q = self._setup(4)
        w_opt = solve_w_total_power(r, q, cfg.power_w)
        w = solve_w_closed_form(r, q, coeffs, w_opt, h_eff, cfg)
        assert np.linalg.norm(w - w_opt) <= 1e-7 * np.linalg.norm(w_opt)


class TestSolveWGeneralPower:
    def test_identity_reduces_to_total(self):
        rng = np.random.default_rng(2)
        r = random_psd(rng, 3)
        q = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
        w_total = solve_w_total_power(r, q, 0.3)
        w_general = solve_w_general_power(
            r, q, [(np.eye(3, dtype=complex), 0.3)])
        obj = lambda w: float(np.real(np.vdot(w, r @ w))
                              - 2 * np.real(np.vdot(w, q)))
        assert obj(w_general) == pytest.approx(obj(w_total), rel=1e-8, abs=1e-10)

    def test_inactive_constraints(self):
        rng = np.random.default_rng(3)
        r = random_psd(rng, 3) + np.eye(3)
        q = 1e-3 * (rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2)))
        w = solve_w_general_power(r, q, [(np.eye(3, dtype=complex), 100.0)])
        assert np.allclose(w, np.linalg.solve(r, q), atol=1e-10)

    def test_per_antenna_matches_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(5):
            m = 2
            r = random_psd(rng, m)
            q = rng.standard_normal((m, 3)) + 1j * rng.standard_normal((m, 3))
            constraints = per_antenna_constraints(m, 0.4)
            w = solve_w_general_power(r, q, constraints)
            budgets = np.full(m, 0.4 / m)
            usage = np.sum(np.abs(w) ** 2, axis=1)
            assert np.all(usage <= budgets * (1 + 1e-8) + 1e-14)
            _, obj_oracle = projected_gradient_quadratic(
                r, q, project_row_balls(budgets), np.sqrt(0.4))
            obj = float(np.real(np.vdot(w, r @ w)) - 2 * np.real(np.vdot(w, q)))
            assert obj <= obj_oracle + 1e-5 * max(1.0, abs(obj_oracle))


class TestThetaLinear:
    def test_degenerate_zero_coeffs(self):
        cfg, chans, topo, design = random_instance(5, users=2, n=(6,))
        design.w = np.zeros_like(design.w)
        coeffs = compute_wsr_coeffs(design, chans, topo, cfg)
        form = build_theta_linear(0, design, coeffs, chans, topo, cfg)
        assert np.allclose(form.b, 0.0)

    def test_tangency_at_anchor(self):
        for seed in range(5):
            cfg, chans, topo, design = random_instance(seed, n=(6, 5),
                                                       distance=100.0)
            coeffs = compute_wsr_coeffs(design, chans, topo, cfg)
            anchor_value = wsr_objective(design, chans, topo, cfg)
            for l in range(2):
                form = build_theta_linear(l, design, coeffs, chans, topo, cfg)
                assert form.evaluate(design.thetas[l]) == pytest.approx(
                    anchor_value, rel=1e-9, abs=1e-9)

    def test_minorizes_objective_on_samples(self):
        cfg, chans, topo, design = random_instance(6, users=2, m=2, n=(5,))
        coeffs = compute_wsr_coeffs(design, chans, topo, cfg)
        form = build_theta_linear(0, design, coeffs, chans, topo, cfg)
        rng = np.random.default_rng(0)
        trial = design.copy()
        for _ in range(1000):
            trial.thetas[0] = np.exp(2j * np.pi * rng.random(5))
            surrogate = form.evaluate(trial.thetas[0])
            objective = wsr_objective(trial, chans, topo, cfg)
            assert surrogate <= objective + 1e-9

    def test_sinr_mode_minorizes_sum_sinr(self):
        cfg, chans, topo, design = random_instance(7, users=2, m=2, n=(5,))
        coeffs = compute_wsr_coeffs(design, chans, topo, cfg, kind="sinr")
        form = build_theta_linear(0, design, coeffs, chans, topo, cfg)
        anchor = wsr_objective(design, chans, topo, cfg, kind="sinr")
        assert form.evaluate(design.thetas[0]) == pytest.approx(anchor,
                                                                rel=1e-9)
        rng = np.random.default_rng(1)
        trial = design.copy()
        for _ in range(1000):
            trial.thetas[0] = np.exp(2j * np.pi * rng.random(5))
            assert form.evaluate(trial.thetas[0]) <= wsr_objective(
                trial, chans, topo, cfg, kind="sinr") + 1e-9


class TestThetaSolvers:
    def test_aligned(self):
        assert np.allclose(solve_theta_unimodulus(np.array([-1.0 + 0.0j])),
                           [1.0])

    def test_hand_case(self):
        theta = solve_theta_unimodulus(np.array([1.0j]))
        assert np.allclose(theta, [-1.0j])
        assert np.real(np.conj(theta[0]) * 1.0j) == pytest.approx(-1.0)

    def test_zero_entry_returns_one(self):
        theta = solve_theta_unimodulus(np.array([0.0j, 1.0 + 0.0j]))
        assert theta[0] == 1.0 + 0.0j

    def test_matches_grid_search(self):
        rng = np.random.default_rng(8)
        b = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        theta = solve_theta_unimodulus(b)
        value = float(np.real(np.vdot(theta, b)))
        _, grid_value = grid_phase_minimizer(b, points=360)
        resolution = np.sum(np.abs(b)) * (1 - np.cos(np.pi / 360))
        assert value <= grid_value + 1e-12
        assert grid_value - value <= resolution

    def test_discrete_exact_hit(self):
        alphabet = 2 * np.pi * np.arange(4) / 4
        theta = solve_theta_discrete(np.array([1.0 + 0.0j]), alphabet)
        assert np.allclose(theta, [-1.0])

    def test_discrete_nearest_from_enumeration(self):
        alphabet = 2 * np.pi * np.arange(4) / 4
        b = np.array([np.exp(1j * np.pi / 3)])
        theta = solve_theta_discrete(b, alphabet)
        values = [np.real(np.exp(-1j * phi) * b[0]) for phi in alphabet]
        assert np.allclose(theta, [np.exp(1j * alphabet[int(np.argmin(values))])])
        assert np.allclose(theta, [np.exp(1j * 3 * np.pi / 2)])

    def test_discrete_tie_break_smallest_phase(self):
        alphabet = np.array([0.0, np.pi])
        theta = solve_theta_discrete(np.array([1.0j]), alphabet)
        assert np.allclose(theta, [1.0])

    def test_discrete_matches_enumeration_random(self):
        rng = np.random.default_rng(9)
        for bits in (1, 2):
            alphabet = 2 * np.pi * np.arange(2 ** bits) / 2 ** bits
            b = rng.standard_normal(64) + 1j * rng.standard_normal(64)
            theta = solve_theta_discrete(b, alphabet)
            for j in range(64):
                values = np.real(np.exp(-1j * alphabet) * b[j])
                best = values.min()
                picked = np.real(np.conj(theta[j]) * b[j])
                assert picked <= best + 1e-12


class TestSerialTheta:
    def test_single_element_matches_parallel(self):
        cfg, chans, topo, design = random_instance(10, users=2, m=2, n=(1,))
        coeffs = compute_wsr_coeffs(design, chans, topo, cfg)
        serial = update_theta_serial(0, design, coeffs, chans, topo, cfg)
        form = build_theta_linear(0, design, coeffs, chans, topo, cfg)
        parallel = solve_theta_unimodulus(form.b)
        assert np.allclose(serial, parallel)

    def test_sweep_monotone_in_surrogate(self):
        cfg, chans, topo, design = random_instance(11, users=3, m=3, n=(6,))
        coeffs = compute_wsr_coeffs(design, chans, topo, cfg)
        quad = build_theta_quadratic_wsr(0, design, coeffs, chans, topo, cfg)
        start = float(-np.real(np.vdot(design.thetas[0],
                                       quad.lmat @ design.thetas[0]))
                      + 2 * np.real(np.vdot(design.thetas[0], quad.cvec)))
        _, values = serial_phase_sweep(quad.lmat, quad.cvec, design.thetas[0])
        trace = [start] + values
        assert np.all(np.diff(trace) >= -1e-10 * np.maximum(
            1.0, np.abs(trace[:-1])))

    def test_unit_modulus_result(self):
        cfg, chans, topo, design = random_instance(12, users=2, m=2, n=(7,))
        coeffs = compute_wsr_coeffs(design, chans, topo, cfg)
        theta = update_theta_serial(0, design, coeffs, chans, topo, cfg)
        assert np.allclose(np.abs(theta), 1.0, atol=1e-12)


class TestRunWsr:
    def test_zero_iters_noop(self):
        cfg, chans, topo, design = random_instance(13)
        opts = SolverOptions(max_outer_iters=0)
        out, log = run_wsr_bmm(cfg, chans, topo, opts, design)
        assert np.array_equal(out.w, design.w)
        assert log.objectives[0] == pytest.approx(
            wsr_objective(design, chans, topo, cfg))

    def test_single_user_no_ris_matched_filter(self):
        cfg, chans, topo, design = random_instance(
            14, users=1, m=4, n=(4,))
        topo = ReflectionTopology.no_ris(1)
        opts = SolverOptions(rel_tol=1e-12, max_outer_iters=200)
        out, log = run_wsr_bmm(cfg, chans, topo, opts, design)
        h = chans.direct[0]
        closed_form = np.log1p(cfg.power_w * np.linalg.norm(h) ** 2
                               / cfg.noise_power_w)
        assert log.objectives[-1] == pytest.approx(closed_form, abs=1e-6)

    @pytest.mark.parametrize("theta_update", ["parallel", "serial"])
    @pytest.mark.parametrize("w_update", ["linesearch", "closed_form"])
    def test_monotone_blocks(self, theta_update, w_update):
        for seed in range(5):
            cfg, chans, topo, design = random_instance(seed, users=3, m=3,
                                                       n=(6,))
            opts = SolverOptions(max_outer_iters=25, rel_tol=0.0,
                                 theta_update=theta_update, w_update=w_update)
            out, log = run_wsr_bmm(cfg, chans, topo, opts, design)
            trace = [log.objectives[0]]
            for blocks in log.block_objectives[1:]:
                trace.extend(blocks)
            trace = np.array(trace)
            assert np.all(np.diff(trace) >= -1e-9 * np.maximum(
                1.0, np.abs(trace[:-1])))
            check_design_feasible(out, cfg)

    def test_monotone_multi_hop(self):
        cfg, chans, topo, design = random_instance(3, users=2, m=2, n=(5, 4),
                                                   distance=100.0)
        opts = SolverOptions(max_outer_iters=20, rel_tol=0.0)
        out, log = run_wsr_bmm(cfg, chans, topo, opts, design)
        trace = [log.objectives[0]]
        for blocks in log.block_objectives[1:]:
            trace.extend(blocks)
        diffs = np.diff(np.array(trace))
        assert np.all(diffs >= -1e-9 * np.maximum(1.0, np.abs(trace[:-1])))

    def test_discrete_phase_feasible_and_monotone(self):
        cfg, chans, topo, design = random_instance(4, users=2, m=2, n=(6,),
                                                   phase_bits=2)
        opts = SolverOptions(max_outer_iters=15, rel_tol=0.0)
        out, log = run_wsr_bmm(cfg, chans, topo, opts, design)
        check_design_feasible(out, cfg)
        alphabet = cfg.phase_alphabet()
        angles = np.angle(out.thetas[0]) % (2 * np.pi)
        dist = np.abs((angles[:, None] - alphabet[None, :] + np.pi)
                      % (2 * np.pi) - np.pi)
        assert np.all(dist.min(axis=1) <= 1e-9)
        trace = np.array(log.objectives)
        assert np.all(np.diff(trace) >= -1e-9 * np.maximum(
            1.0, np.abs(trace[:-1])))

    def test_per_antenna_power_model(self):
        cfg, chans, topo, design = random_instance(6, users=2, m=3, n=(5,))
        design.w *= np.sqrt(0.3)  # strictly feasible per-antenna start
        opts = SolverOptions(max_outer_iters=10, rel_tol=0.0,
                             power_model="per_antenna")
        out, log = run_wsr_bmm(cfg, chans, topo, opts, design)
        per_antenna = np.sum(np.abs(out.w) ** 2, axis=1)
        assert np.all(per_antenna <= cfg.power_w / 3 * (1 + 1e-8))
        trace = np.array(log.objectives)
        assert np.all(np.diff(trace) >= -1e-9 * np.maximum(
            1.0, np.abs(trace[:-1])))

    def test_sinr_objective_monotone(self):
        cfg, chans, topo, design = random_instance(8, users=3, m=3, n=(5,))
        opts = SolverOptions(max_outer_iters=15, rel_tol=0.0,
                             objective_kind="sinr")
        out, log = run_wsr_bmm(cfg, chans, topo, opts, design)
        trace = np.array(log.objectives)
        assert np.all(np.diff(trace) >= -1e-9 * np.maximum(
            1.0, np.abs(trace[:-1])))

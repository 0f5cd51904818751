import math

import numpy as np
import pytest

from cbflab.dynamics import dubins_model, integrator2d_model
from cbflab.neural.dataset import ObservationSpec
from cbflab.sim.batch import run_batch, run_episode_spec, EpisodeSpec, solve_world_value
from cbflab.sim.controllers import lqr_nominal, pursuit_nominal, riccati_gain_1d
from cbflab.sim.environment import (
    Disc,
    Environment,
    generate_forest,
    render_local_costmap,
    render_world_costmap,
    warehouse_environment,
)
from cbflab.sim.episode import (
    EcbfMethod,
    OracleMethod,
    RateSchedule,
    UnfilteredMethod,
    initial_state,
    run_episode,
)
from cbflab.sim.presets import get_preset, preset_names

DUBINS = dubins_model()
INTEG = integrator2d_model()
OBS = ObservationSpec(size=60, resolution=0.1, cap=8.49)


def empty_env():
    return Environment(bound=3.5, discs=(), rects=(), start=(-2.8, -2.8),
                       goal=(2.8, 2.8))


class TestEnvironment:
    def test_forest_deterministic(self):
        a = generate_forest(3)
        b = generate_forest(3)
        assert a == b

    def test_in_domain_radii(self):
        env = generate_forest(1, radius_range=(0.5, 0.5))
        assert all(d.radius == 0.5 for d in env.discs)
        assert len(env.discs) == 10

    def test_out_domain_radii(self):
        radii = np.concatenate([
            [d.radius for d in generate_forest(s, radius_range=(0.2, 1.0)).discs]
            for s in range(4)])
        assert radii.min() >= 0.2 and radii.max() <= 1.0
        assert radii.std() > 0.05  # actually spread out

    def test_trees_disjoint_with_separation(self):
        for seed in range(6):
            env = generate_forest(seed, radius_range=(0.2, 1.0))
            discs = env.discs
            for i in range(len(discs)):
                for j in range(i + 1, len(discs)):
                    gap = (np.hypot(discs[i].center[0] - discs[j].center[0],
                                    discs[i].center[1] - discs[j].center[1])
                           - discs[i].radius - discs[j].radius)
                    assert gap >= 0.3 - 1e-12

    def test_start_goal_clearance(self):
        for seed in range(20):
            env = generate_forest(seed, radius_range=(0.2, 1.0))
            assert env.clearance(env.start) >= 0.3 - 1e-12
            assert env.clearance(env.goal) >= 0.3 - 1e-12

    def test_impossible_placement_raises(self):
        with pytest.raises(RuntimeError):
            generate_forest(0, n_obstacles=5, radius_range=(1.4, 1.5),
                            obstacle_box=0.1, clearance=5.0, max_rejections=200)

    def test_collision_and_clearance(self):
        env = Environment(bound=3.0, discs=(Disc((1.0, 0.0), 0.5),), rects=(),
                          start=(-2, -2), goal=(2, 2))
        assert env.collides((1.2, 0.0))
        assert not env.collides((0.0, 0.0))
        assert env.clearance((0.0, 0.0)) == pytest.approx(0.5)

    def test_warehouse_has_rects(self):
        env = warehouse_environment()
        assert env.rects
        assert env.collides(env.rects[0].center)


class TestCostmap:
    def test_empty_env_all_free(self):
        occ = render_local_costmap(empty_env(), (0.0, 0.0), OBS)
        assert occ.cells.sum() == 0
        assert occ.width == 60

    def test_enclosing_disc_all_occupied(self):
        env = Environment(bound=3.0, discs=(Disc((0.0, 0.0), 10.0),), rects=(),
                          start=(-2, -2), goal=(2, 2))
        occ = render_local_costmap(env, (0.0, 0.0), OBS)
        assert occ.cells.all()

    def test_disc_area_ratio(self):
        obs = ObservationSpec(size=100, resolution=0.06, cap=8.49)
        env = Environment(bound=3.0, discs=(Disc((0.0, 0.0), 0.5),), rects=(),
                          start=(-2, -2), goal=(2, 2))
        occ = render_local_costmap(env, (0.0, 0.0), obs)
        want = math.pi * 0.5 ** 2 / 0.06 ** 2
        assert occ.cells.sum() == pytest.approx(want, rel=0.04)

    def test_centered_at_query(self):
        env = Environment(bound=3.0, discs=(Disc((1.0, 1.0), 0.3),), rects=(),
                          start=(-2, -2), goal=(2, 2))
        occ = render_local_costmap(env, (1.0, 1.0), OBS)
        assert occ.origin == pytest.approx((1.0 - 3.0, 1.0 - 3.0))
        # disc is at the window center
        assert occ.cells[30, 30] == 1

    def test_world_costmap_covers_bounds(self):
        occ = render_world_costmap(empty_env(), 0.1)
        assert occ.width == 70
        assert occ.origin == (-3.5, -3.5)


class TestControllers:
    def test_riccati_gain_matches_care(self):
        # frozen from the analytic CARE solution: k1 = sqrt(10),
        # k2 = sqrt(1 + 2*sqrt(10))
        k = riccati_gain_1d(10.0, 1.0, 1.0)
        assert k[0] == pytest.approx(math.sqrt(10.0), abs=1e-6)
        assert k[1] == pytest.approx(math.sqrt(1.0 + 2.0 * math.sqrt(10.0)), abs=1e-6)

    def test_riccati_residual_is_zero(self):
        k = riccati_gain_1d(10.0, 1.0, 1.0)
        p12, p22 = k[0], k[1]
        p11 = p12 * p22
        assert -p12 ** 2 + 10.0 == pytest.approx(0.0, abs=1e-6)
        assert p11 - p12 * p22 == pytest.approx(0.0, abs=1e-9)
        assert 2 * p12 - p22 ** 2 + 1.0 == pytest.approx(0.0, abs=1e-6)

    def test_lqr_zero_at_goal(self):
        u = lqr_nominal(INTEG, (2.4, 2.4, 0.0, 0.0), (2.4, 2.4))
        assert np.allclose(u, 0.0)

    def test_lqr_axes_symmetric(self):
        ua = lqr_nominal(INTEG, (1.0, 0.0, 0.0, 0.0), (2.0, 0.0))
        ub = lqr_nominal(INTEG, (0.0, 1.0, 0.0, 0.0), (0.0, 2.0))
        assert ua[0] == pytest.approx(ub[1])

    def test_pursuit_dead_ahead(self):
        u = pursuit_nominal(DUBINS, (0, 0, math.pi / 4), (1.0, 1.0))
        assert u[0] == pytest.approx(0.0, abs=1e-12)

    def test_pursuit_hard_left_clamped(self):
        u = pursuit_nominal(DUBINS, (0, 0, 0.0), (0.0, 5.0))
        assert u[0] == pytest.approx(0.5)

    def test_pursuit_wrap(self):
        for eps in (0.1, -0.1):
            x = (0, 0, math.pi - eps)
            u = pursuit_nominal(DUBINS, x, (-5.0, 0.0))  # goal dead behind-ish
            err = math.atan2(0 - 0, -5 - 0) - x[2]
            want = np.clip(1.5 * ((err + math.pi) % (2 * math.pi) - math.pi), -0.5, 0.5)
            assert u[0] == pytest.approx(want)


class TestRateSchedule:
    def test_valid_defaults(self):
        r = RateSchedule()
        assert r.steps(200.0) == 5

    def test_rate_ordering_enforced(self):
        with pytest.raises(ValueError):
            RateSchedule(filter_hz=10, nominal_hz=20, obs_hz=5)

    def test_divisibility_enforced(self):
        with pytest.raises(ValueError):
            RateSchedule(filter_hz=333, nominal_hz=333, obs_hz=333)


class TestRunEpisode:
    def test_empty_world_success_untouched_controls(self):
        preset = get_preset("integrator-desk")
        env = empty_env()
        value, sdf = solve_world_value(env, preset)
        result = run_episode(env, INTEG, OracleMethod(value, sdf), preset.rates,
                             preset.obs, preset.qp_gain, debug_checks=True)
        assert result.outcome == "success"
        for step in result.filter_log:
            assert np.allclose(step.u_star, step.u_nom)
        assert result.min_h > 0

    def test_start_inside_obstacle_is_collision(self):
        env = Environment(bound=3.5, discs=(Disc((-2.8, -2.8), 0.5),), rects=(),
                          start=(-2.8, -2.8), goal=(2.8, 2.8))
        result = run_episode(env, INTEG, UnfilteredMethod(), RateSchedule(200, 200, 5),
                             OBS, 0.7)
        assert result.outcome == "collision"
        assert result.elapsed_sim == 0.0

    def test_oracle_dubins_forest_success_with_margin(self):
        preset = get_preset("dubins-desk")
        row = run_episode_spec(EpisodeSpec(
            preset_name="dubins-desk", method="oracle", domain="in",
            episode=0, seed=7, safe_start=True, debug_checks=True))
        assert row["outcome"] in ("success", "timeout")
        assert row["outcome"] != "collision"
        # the discrete-time filter can dip slightly past the boundary; the
        # failure margin absorbs it (derived by running this very oracle)
        assert row["min_h"] > -preset.failure_margin

    def test_unfiltered_lqr_empty_world_reaches_goal(self):
        result = run_episode(empty_env(), INTEG, UnfilteredMethod(),
                             RateSchedule(200, 200, 5), OBS, 0.7)
        assert result.outcome == "success"

    def test_determinism(self):
        preset = get_preset("integrator-desk")
        env = generate_forest(5)
        value, sdf = solve_world_value(env, preset)
        a = run_episode(env, INTEG, OracleMethod(value, sdf), preset.rates, preset.obs,
                        preset.qp_gain)
        b = run_episode(env, INTEG, OracleMethod(value, sdf), preset.rates, preset.obs,
                        preset.qp_gain)
        assert a.outcome == b.outcome
        assert np.array_equal(a.trajectory, b.trajectory)
        assert a.margins == b.margins

    def test_margin_logged_at_observation_rate(self):
        preset = get_preset("integrator-desk")
        env = empty_env()
        value, sdf = solve_world_value(env, preset)
        result = run_episode(env, INTEG, OracleMethod(value, sdf), preset.rates,
                             preset.obs, preset.qp_gain, timeout=2.0)
        # 5 Hz for 2 s (unless success ends earlier) -> first at t=0
        assert len(result.margins) >= 2
        assert result.margins[0][0] == 0.0
        assert all(m > 0 for _, m in result.margins)

    def test_ecbf_static_safe(self):
        env = generate_forest(3)
        result = run_episode(env, INTEG, EcbfMethod(), RateSchedule(200, 200, 5),
                             OBS, 0.7, timeout=10.0)
        assert result.outcome in ("success", "timeout", "collision")
        assert len(result.filter_log) > 0


def _strip_wallclock(rows):
    return [{k: v for k, v in r.items() if k != "latency_mean_ms"} for r in rows]


class TestRunBatch:
    def test_single_episode_matches_run_episode_spec(self):
        rows, summary = run_batch("integrator-desk", ["unfiltered"], ["in"], 1,
                                  base_seed=11)
        direct = run_episode_spec(EpisodeSpec("integrator-desk", "unfiltered",
                                              "in", 0, 11))
        assert _strip_wallclock(rows) == _strip_wallclock([direct])
        assert summary["unfiltered/in"]["episodes"] == 1

    def test_batch_deterministic(self):
        a, sa = run_batch("integrator-desk", ["unfiltered", "ecbf"], ["in"], 2, 21)
        b, sb = run_batch("integrator-desk", ["unfiltered", "ecbf"], ["in"], 2, 21)
        assert _strip_wallclock(a) == _strip_wallclock(b)
        assert sa == sb

    def test_parallel_matches_serial(self):
        serial, _ = run_batch("integrator-desk", ["unfiltered"], ["in", "out"], 2, 31)
        parallel, _ = run_batch("integrator-desk", ["unfiltered"], ["in", "out"], 2, 31,
                                workers=2)
        assert _strip_wallclock(serial) == _strip_wallclock(parallel)

    def test_unknown_method_rejected(self):
        with pytest.raises(ValueError):
            run_batch("integrator-desk", ["magic"], ["in"], 1, 0)

    def test_neural_method_requires_model(self):
        with pytest.raises(ValueError):
            run_episode_spec(EpisodeSpec("integrator-desk", "orn", "in", 0, 0))

    @pytest.mark.slow
    def test_unfiltered_below_oracle_in_dense_forest(self):
        # direction only: the safety filter must not hurt the success rate
        # of a collision-blind nominal in a dense forest
        _, summary = run_batch("integrator-desk", ["oracle", "unfiltered"],
                               ["in"], 8, base_seed=900, workers=2)
        assert (summary["unfiltered/in"]["success_rate"]
                < summary["oracle/in"]["success_rate"])


class TestPresets:
    def test_paper_scale_shapes(self):
        assert get_preset("dubins-paper").state_grid.shape == (100, 100, 30)
        assert get_preset("integrator-paper").state_grid.shape == (80, 80, 20, 20)
        assert get_preset("dubins-paper").obs.resolution == 0.06
        assert get_preset("integrator-paper").obs.resolution == 0.075

    def test_gains(self):
        assert get_preset("dubins-paper").qp_gain == 2.6
        assert get_preset("integrator-paper").qp_gain == 0.7

    def test_rates(self):
        p = get_preset("integrator-paper")
        assert p.rates.filter_hz == 200 and p.rates.obs_hz == 5
        d = get_preset("dubins-paper")
        assert d.rates.obs_hz == 20

    def test_world_grid_covers_world(self):
        from cbflab.sim.environment import WORLD_BOUND
        for name in preset_names():
            p = get_preset(name)
            assert p.world_grid.axes[0].lo == -WORLD_BOUND
            assert p.world_grid.axes[0].hi == WORLD_BOUND
            # same positional resolution class as the observation grid
            assert abs(p.world_grid.axes[0].spacing
                       - p.state_grid.axes[0].spacing) < 0.02

    def test_names(self):
        assert set(preset_names()) == {"dubins-desk", "dubins-paper",
                                       "integrator-desk", "integrator-paper"}
        with pytest.raises(ValueError):
            get_preset("quadrotor")

import numpy as np
import pytest

from _helpers import sensor_limit
from driftlab import ConfigurationError, CoveringSet, FiniteDistribution, stationary
from driftlab.distributions import ProductStateSpace
from driftlab.presets import sensor3_covering_and_schedule, sensor3_space
from driftlab.simulate import (
    SimConfig,
    detect,
    lyapunov_drift,
    run,
    run_ensemble,
    select_strategy,
    update_queues,
    warmup_detect,
)
from driftlab.strategies import ActionModel, CostModel, StrategySpace, decode_strategy


@pytest.fixture(scope="module")
def sensor_cfg():
    space = sensor3_space()
    cov, sch = sensor3_covering_and_schedule(space.states)
    return SimConfig(
        space=space, schedule=sch, covering=cov,
        V=20.0, D=0, window=40, horizon=60, seed=1,
    )


def tiny_covering(*probs_rows, delta=1.0):
    members = tuple(FiniteDistribution(np.array(r, dtype=float)) for r in probs_rows)
    mat = np.vstack([m.probs for m in members])
    pos = mat[mat > 0]
    return CoveringSet(
        members=members,
        delta=delta,
        alpha_delta=float(pos.max()) * 1.01 + 1e-12,
        beta_delta=float(pos.min()) * 0.99,
    )


class TestDetect:
    def test_single_member(self):
        cov = tiny_covering([0.5, 0.5])
        assert detect([0, 1, 1], cov) == 0

    def test_identical_members_tie_low(self):
        cov = tiny_covering([0.5, 0.5], [0.5, 0.5])
        assert detect([0, 1], cov) == 0

    def test_well_separated_members(self):
        cov = tiny_covering([0.9, 0.05, 0.05], [0.05, 0.9, 0.05], [0.05, 0.05, 0.9])
        rng = np.random.default_rng(0)
        errors = 0
        for _ in range(300):
            window = rng.choice(3, size=40, p=cov.members[2].probs)
            errors += detect(window, cov) != 2
        assert errors == 0

    def test_zero_mass_ranks_last(self):
        cov = tiny_covering([0.0, 1.0], [0.5, 0.5])
        assert detect([0], cov) == 1


class TestWarmupDetect:
    def test_single_member(self):
        cov = tiny_covering([1.0])
        assert warmup_detect(cov, np.random.default_rng(0)) == 0

    def test_uniform_frequencies(self):
        cov = tiny_covering(*[[0.5 - i * 0.01, 0.5 + i * 0.01] for i in range(8)])
        rng = np.random.default_rng(99)
        draws = np.array([warmup_detect(cov, rng) for _ in range(100_000)])
        freqs = np.bincount(draws, minlength=8) / draws.size
        assert np.all(np.abs(freqs - 0.125) < 0.01)

    def test_deterministic(self):
        cov = tiny_covering([0.4, 0.6], [0.6, 0.4])
        a = [warmup_detect(cov, np.random.default_rng(5)) for _ in range(10)]
        b = [warmup_detect(cov, np.random.default_rng(5)) for _ in range(10)]
        assert a == b


class TestSelectStrategy:
    def test_all_zero_ties_to_first(self):
        rt = np.zeros((3, 10))
        rt[0] = np.linspace(0, 1, 10)
        assert select_strategy(np.zeros(2), 0.0, rt) == 0

    def test_zero_queue_is_cost_greedy(self):
        rng = np.random.default_rng(1)
        rt = rng.normal(size=(4, 50))
        assert select_strategy(np.zeros(3), 7.0, rt) == int(np.argmin(rt[0]))

    def test_matches_exhaustive_scan_on_benchmark(self):
        space = sensor3_space()
        rt = space.r_table(sensor_limit())
        rng = np.random.default_rng(17)
        for _ in range(100):
            q = rng.uniform(0, 30, size=3)
            v = float(rng.uniform(0, 50))
            best_m, best_s = 0, None
            for m in range(space.F):
                s = v * rt[0][m]
                for k in range(3):
                    s += rt[k + 1][m] * q[k]
                if best_s is None or s < best_s:
                    best_m, best_s = m, s
            assert select_strategy(q, v, rt) == best_m

    def test_benchmark_slot(self):
        space = sensor3_space()
        rt = space.r_table(sensor_limit())
        q = np.array([5.0, 5.0, 5.0])
        scores = 20.0 * rt[0] + rt[1:].T @ q
        assert select_strategy(q, 20.0, rt) == int(np.argmin(scores))


class TestQueues:
    def test_at_constraint(self):
        q = update_queues(np.zeros(2), np.array([0.5, 0.2]), np.array([0.5, 0.2]))
        assert np.array_equal(q, np.zeros(2))

    def test_direct_arithmetic(self):
        q = update_queues(np.array([1.0]), np.array([0.0]), np.array([0.5]))
        assert np.array_equal(q, np.array([0.5]))

    def test_clamps_at_zero(self):
        q = update_queues(np.array([0.1]), np.array([0.0]), np.array([0.5]))
        assert np.array_equal(q, np.array([0.0]))

    def test_lyapunov(self):
        assert lyapunov_drift(np.zeros(3), np.zeros(3)) == (0.0, 0.0, 0.0)
        lb, la, d = lyapunov_drift(np.array([3.0, 4.0]), np.array([0.0, 0.0]))
        assert lb == 12.5 and la == 0.0 and d == -12.5

    def test_drift_telescopes_on_trace(self, sensor_cfg):
        tr = run(sensor_cfg)
        k = tr.q.shape[1]
        total = 0.0
        prev = np.zeros(k)
        for t in range(tr.horizon):
            total += lyapunov_drift(prev, tr.q[t])[2]
            prev = tr.q[t]
        assert total == pytest.approx(lyapunov_drift(np.zeros(k), tr.q[-1])[1] - 0.0)


class TestRun:
    def test_single_slot_warmup_boundary(self):
        actions = ActionModel((2,))
        states = ProductStateSpace((2,))
        cost = CostModel(tables=np.ones((2, 2, 2)), c=np.array([1.0]))
        space = StrategySpace(actions, states, cost)
        cov = tiny_covering([0.5, 0.5])
        cfg = SimConfig(
            space=space, schedule=stationary(FiniteDistribution.uniform(2)),
            covering=cov, V=1.0, D=0, window=1, horizon=1, seed=0,
        )
        tr = run(cfg)
        assert tr.horizon == 1
        assert tr.warmup[0]

    def test_point_mass_single_strategy(self):
        actions = ActionModel((1,))
        states = ProductStateSpace((3,))
        tables = np.zeros((2, 1, 3))
        tables[0, 0] = [4.0, 5.0, 6.0]
        tables[1, 0] = [0.5, 0.5, 0.5]
        cost = CostModel(tables=tables, c=np.array([1.0]))
        space = StrategySpace(actions, states, cost)
        cfg = SimConfig(
            space=space,
            schedule=stationary(FiniteDistribution.point_mass(3, 1)),
            covering=tiny_covering([0.2, 0.6, 0.2]),
            V=3.0, D=0, window=2, horizon=20, seed=4,
        )
        tr = run(cfg)
        assert np.all(tr.omega == 1)
        assert np.all(tr.m == 0)
        assert np.allclose(tr.avg[:, 0], 5.0)
        assert np.allclose(tr.p[:, 1], 0.5)

    def test_golden_trace_regression(self, sensor_cfg):
        tr = run(sensor_cfg)
        assert tr.omega[:8].tolist() == [25, 20, 23, 21, 14, 37, 17, 37]
        assert tr.jstar[38:46].tolist() == [1, 3, 2, 2, 2, 0, 0, 0]
        assert tr.m[38:46].tolist() == [3214, 3212, 3212, 3214, 3212, 3276, 3278, 3276]
        assert tr.p[40:44, 0].tolist() == pytest.approx(
            [-1 / 3, -5 / 6, 0.0, -1 / 3], abs=1e-15
        )
        assert tr.q[44].tolist() == pytest.approx([7.0, 4.0, 5.0], abs=1e-12)
        assert tr.avg[-1].tolist() == pytest.approx(
            [-0.5, 29 / 60, 0.4, 0.4], abs=1e-12
        )

    def test_queue_and_cost_invariants(self, sensor_cfg):
        tr = run(sensor_cfg)
        cost = sensor_cfg.space.cost
        assert np.all(tr.q >= 0)
        slots = np.arange(1, tr.horizon + 1)[:, None]
        assert np.all(tr.q <= slots * (cost.p_max[1:] - cost.c) + 1e-12)
        assert np.all(tr.p >= cost.p_min - 1e-15)
        assert np.all(tr.p <= cost.p_max + 1e-15)

    def test_realized_costs_match_tables(self, sensor_cfg):
        tr = run(sensor_cfg)
        space = sensor_cfg.space
        for t in range(tr.horizon):
            a = space.apply(int(tr.m[t]), int(tr.omega[t]))
            assert np.array_equal(tr.p[t], space.cost.tables[:, a, int(tr.omega[t])])

    def test_distributed_decisions(self, sensor_cfg):
        # each user's action must be recoverable from (own state, strategy index)
        tr = run(sensor_cfg)
        space = sensor_cfg.space
        for t in range(0, tr.horizon, 7):
            s = decode_strategy(int(tr.m[t]), space.actions, space.states)
            comps = space.states.decode(int(tr.omega[t]))
            per_user = [s.tables[i][comps[i]] for i in range(3)]
            joint = space.actions.encode(per_user)
            assert joint == space.apply(int(tr.m[t]), int(tr.omega[t]))

    def test_validation_runs_before_slot_zero(self, sensor_cfg):
        bad = SimConfig(
            space=sensor_cfg.space, schedule=sensor_cfg.schedule,
            covering=sensor_cfg.covering, V=-1.0, D=0, window=40,
            horizon=10, seed=0,
        )
        with pytest.raises(ConfigurationError, match="V must be"):
            run(bad)

    def test_delay_shifts_queue_inputs(self, sensor_cfg):
        cfg = SimConfig(
            space=sensor_cfg.space, schedule=sensor_cfg.schedule,
            covering=sensor_cfg.covering, V=20.0, D=3, window=10,
            horizon=30, seed=2,
        )
        tr = run(cfg)
        c = cfg.space.cost.c
        q = np.zeros(3)
        for t in range(tr.horizon):
            delayed = tr.p[t - 3, 1:] if t - 3 >= 0 else np.zeros(3)
            q = np.maximum(q + delayed - c, 0.0)
            assert np.allclose(tr.q[t], q, atol=1e-15)


class TestEnsemble:
    def test_single_run_equals_trace(self, sensor_cfg):
        ens = run_ensemble(sensor_cfg, 1)
        tr = run(sensor_cfg, run_index=0)
        assert np.allclose(ens.mean_p, tr.p)
        assert np.allclose(ens.final_avg[0], tr.avg[-1])

    def test_deterministic_across_calls(self, sensor_cfg):
        a = run_ensemble(sensor_cfg, 5)
        b = run_ensemble(sensor_cfg, 5)
        assert np.array_equal(a.mean_p, b.mean_p)
        assert np.array_equal(a.jstar, b.jstar)

    def test_runs_independent_of_order(self, sensor_cfg):
        ens = run_ensemble(sensor_cfg, 4)
        # re-simulating run 2 alone reproduces its slice
        tr2 = run(sensor_cfg, run_index=2)
        assert np.array_equal(ens.p[2], tr2.p)
        assert np.array_equal(ens.jstar[2], tr2.jstar)

    def test_on_trace_streaming_and_store_off(self, sensor_cfg):
        seen = []
        ens = run_ensemble(
            sensor_cfg, 3, on_trace=lambda i, tr: seen.append((i, tr.horizon)),
            store_runs=False,
        )
        assert seen == [(0, 60), (1, 60), (2, 60)]
        assert ens.p is None
        with pytest.raises(ValueError):
            _ = ens.errors

    def test_warmup_uniform_pick_rate(self, sensor_cfg):
        ens = run_ensemble(sensor_cfg, 300)
        warm_errors = ens.errors[:, :39]
        assert warm_errors.mean() == pytest.approx(7 / 8, abs=0.02)

    def test_classical_guarantee_single_member_stationary(self):
        # no detection, no delay, stationary state: average cost approaches
        # the LP optimum at rate O(1/V), so gaps shrink as V grows
        from _helpers import sensor_limit
        from driftlab import CoveringSet
        from driftlab.lp import instance_for, solve_lp
        from driftlab.presets import sensor3_space

        space = sensor3_space()
        pi = sensor_limit()
        cov = CoveringSet(
            members=(pi,), delta=0.5, alpha_delta=0.4, beta_delta=0.0009
        )
        lp_value = solve_lp(instance_for(space, pi)).value
        curvature = space.b_value(pi)
        gaps = []
        for v in (5.0, 20.0, 80.0):
            cfg = SimConfig(
                space=space, schedule=stationary(pi), covering=cov,
                V=v, D=0, window=1, horizon=3000, seed=3,
            )
            ens = run_ensemble(cfg, 12)
            gap = float(ens.final_avg[:, 0].mean() - lp_value)
            assert abs(gap) <= curvature / v + 0.01
            gaps.append(gap)
        assert gaps[0] > gaps[1] > gaps[2] - 1e-3

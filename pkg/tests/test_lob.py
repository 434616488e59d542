import json

import numpy as np
import pytest

from ppreg.lob import (
    BookState,
    EventRule,
    LobError,
    PriceMap,
    book_replay,
    load_event_map,
    lob_cancellation_baseline,
    one_two_unit_map,
    one_unit_map,
    price_path,
    simultaneous_map,
    write_trajectory_csv,
)
from ppreg.model import (
    ConstantBaseline,
    CovariateSpec,
    ModelSpec,
    ParamSpace,
    TimeHorizon,
    ZeroKernel,
)
from ppreg.estimate import qmle
from ppreg.simulate import PointPath, SimOptions, simulate


def counts_path(counts):
    """(times, cumulative counts) pair for direct price evaluation."""
    counts = np.atleast_2d(np.asarray(counts, dtype=float))
    times = np.arange(1.0, counts.shape[0] + 1)
    return times, counts


class TestPriceMaps:
    def test_one_unit_example(self):
        pm = one_unit_map(a_unit=1.0)
        _, Y = price_path(pm, counts_path([[2, 1, 0, 3]]))
        assert np.allclose(Y[0], [1.0, -3.0])

    def test_one_two_unit_example(self):
        pm = one_two_unit_map(a_unit=1.0)
        _, Y = price_path(pm, counts_path([[1, 1, 0, 0, 0, 0, 1, 0]]))
        assert np.allclose(Y[0], [3.0, -1.0])

    def test_simultaneous_example_both_signs(self):
        up = simultaneous_map(a_unit=1.0, sign=+1)
        dn = simultaneous_map(a_unit=1.0, sign=-1)
        N = [[1, 0, 0, 0, 2, 1]]
        _, Yu = price_path(up, counts_path(N))
        _, Yd = price_path(dn, counts_path(N))
        # Y1 = (N0 - N1) + (N4 - N5) = 2; Y2 = (N2 - N3) +- (N4 - N5)
        assert np.allclose(Yu[0], [2.0, 1.0])
        assert np.allclose(Yd[0], [2.0, -1.0])

    def test_zero_counts_zero_price(self):
        pm = one_unit_map()
        _, Y = price_path(pm, counts_path([[0, 0, 0, 0]]))
        assert np.allclose(Y, 0.0)

    def test_monetary_unit_scales(self):
        pm = one_unit_map(a_unit=0.25)
        _, Y = price_path(pm, counts_path([[2, 1, 0, 3]]))
        assert np.allclose(Y[0], [0.25, -0.75])

    def test_linearity_in_counts(self):
        pm = one_two_unit_map()
        rng = np.random.default_rng(0)
        n1 = rng.integers(0, 5, 8)
        n2 = rng.integers(0, 5, 8)
        _, y1 = price_path(pm, counts_path([n1]))
        _, y2 = price_path(pm, counts_path([n2]))
        _, y12 = price_path(pm, counts_path([n1 + n2]))
        assert np.allclose(y12, y1 + y2)

    def test_non_integer_map_rejected(self):
        with pytest.raises(LobError):
            PriceMap(np.array([[0.5, 1.0]]), a_unit=1.0)


def replay_model(d, t1=1.0):
    return ModelSpec(
        d=d,
        horizon=TimeHorizon(0.0, 0.0, t1),
        baseline=ConstantBaseline(d=d),
        kernel=ZeroKernel(d=d, d0=d),
        covariate=CovariateSpec("self_exciting"),
        n=100,
        param_space=ParamSpace(np.full(d, 0.01), np.full(d, 50.0)),
    )


def random_path(model, n_events, seed):
    rng = np.random.default_rng(seed)
    times = np.sort(rng.uniform(1e-6, model.horizon.t1, n_events))
    comps = rng.integers(0, model.d, n_events)
    events = [times[comps == a] for a in range(model.d)]
    return PointPath.from_events(model, events)


FOUR_RULES = {
    0: EventRule(side="ask", level=0, kind="limit"),
    1: EventRule(side="ask", level=0, kind="cancel"),
    2: EventRule(side="ask", level=0, kind="market"),
    3: EventRule(side="bid", level=1, kind="limit"),
}


class TestBookReplay:
    def test_empty_path_is_identity(self):
        m = replay_model(4)
        p = PointPath.from_events(m, [np.array([])] * 4)
        init = BookState(ask_queues=[4, 2], bid_queues=[6, 0], q=2)
        traj = book_replay(init, p, FOUR_RULES)
        assert len(traj.states) == 1
        assert traj.final == init
        assert traj.violations == 0

    def test_single_cancel(self):
        m = replay_model(4)
        p = PointPath.from_events(
            m, [np.array([]), np.array([0.5]), np.array([]), np.array([])]
        )
        init = BookState(ask_queues=[2, 0], bid_queues=[0, 0], q=1)
        traj = book_replay(init, p, FOUR_RULES)
        assert traj.final.ask_queues[0] == 1

    def test_bookkeeping_identity(self):
        m = replay_model(4)
        p = random_path(m, 500, seed=1)
        init = BookState(ask_queues=[400, 0], bid_queues=[0, 0], q=1)
        traj = book_replay(init, p, FOUR_RULES)
        counts = p.counts()
        if traj.violations == 0:
            expect = 400 + counts[0] - counts[1] - counts[2]
            assert traj.final.ask_queues[0] == expect
        # With violations the floored removals are added back.
        expect = 400 + counts[0] - counts[1] - counts[2] + traj.violations
        assert traj.final.ask_queues[0] == expect
        assert traj.final.bid_queues[1] == counts[3]

    def test_violations_counted_on_empty_queue(self):
        m = replay_model(4)
        p = PointPath.from_events(
            m, [np.array([]), np.array([0.3, 0.6]), np.array([]), np.array([])]
        )
        init = BookState(ask_queues=[1, 0], bid_queues=[0, 0], q=1)
        traj = book_replay(init, p, FOUR_RULES)
        assert traj.violations == 1
        assert traj.final.ask_queues[0] == 0
        assert traj.violation_times == [0.6]

    def test_prefix_suffix_composition(self):
        m = replay_model(4)
        p = random_path(m, 200, seed=2)
        init = BookState(ask_queues=[50, 0], bid_queues=[0, 0], q=1)
        whole = book_replay(init, p, FOUR_RULES)
        times, _ = p.merged_events()
        cut = times[100]
        first = [e[e <= cut] for e in p.events]
        second = [e[e > cut] for e in p.events]
        t1 = book_replay(init, PointPath.from_events(m, first), FOUR_RULES)
        t2 = book_replay(t1.final, PointPath.from_events(m, second), FOUR_RULES)
        assert t2.final == whole.final
        assert t1.violations + t2.violations == whole.violations

    def test_missing_component_rejected(self):
        m = replay_model(4)
        p = random_path(m, 10, seed=3)
        init = BookState(ask_queues=[5], bid_queues=[5], q=1)
        with pytest.raises(LobError):
            book_replay(init, p, {0: FOUR_RULES[0]})

    def test_queue_state_invariants(self):
        with pytest.raises(LobError):
            BookState(ask_queues=[-1], bid_queues=[0], q=1)
        with pytest.raises(LobError):
            BookState(ask_queues=[3], bid_queues=[0], q=2)


class TestEventMapIO:
    def test_load_event_map(self, tmp_path):
        f = tmp_path / "map.json"
        f.write_text(
            json.dumps(
                [
                    {"component": 0, "side": "ask", "level": 0, "kind": "limit"},
                    {"component": 1, "side": "bid", "level": 2, "kind": "cancel"},
                ]
            )
        )
        em = load_event_map(str(f))
        assert em[0] == EventRule("ask", 0, "limit")
        assert em[1] == EventRule("bid", 2, "cancel")

    def test_duplicate_component_rejected(self, tmp_path):
        f = tmp_path / "map.json"
        rec = {"component": 0, "side": "ask", "level": 0, "kind": "limit"}
        f.write_text(json.dumps([rec, rec]))
        with pytest.raises(LobError):
            load_event_map(str(f))

    def test_trajectory_csv(self, tmp_path):
        m = replay_model(4)
        p = random_path(m, 20, seed=4)
        init = BookState(ask_queues=[10, 0], bid_queues=[0, 0], q=1)
        traj = book_replay(init, p, FOUR_RULES)
        out = tmp_path / "traj.csv"
        write_trajectory_csv(traj, str(out))
        lines = out.read_text().splitlines()
        assert lines[0] == "time,level_id,count"
        assert len(lines) == 1 + len(traj.states) * 4


class TestCancellationBaseline:
    def build(self, queue_units, q=1):
        m = replay_model(2)
        p = PointPath.from_events(m, [np.array([]), np.array([])])
        init = BookState(ask_queues=[queue_units * q], bid_queues=[0], q=q)
        traj = book_replay(
            init,
            p,
            {
                0: EventRule("ask", 0, "limit"),
                1: EventRule("ask", 0, "cancel"),
            },
        )
        return lob_cancellation_baseline(traj, "ask", 0, d=2, component=1)

    def test_three_units_half_theta(self):
        base = self.build(queue_units=3)
        gamma = np.array([1.0, 0.5])
        assert np.isclose(base.value(0.5, gamma)[1], 1.5)

    def test_empty_queue_zero_for_every_theta(self):
        base = self.build(queue_units=0)
        for theta_c in (0.1, 0.5, 2.0):
            assert base.value(0.5, np.array([1.0, theta_c]))[1] == 0.0

    def test_estimation_round_trip(self):
        # Simulate cancellations at rate theta_c* * queue/q against a frozen
        # queue trajectory and recover theta_c by QMLE.
        theta_c_star = 0.7
        n = 400
        hits = 0
        trials = 25
        for seed in range(trials):
            rng = np.random.default_rng(seed)
            # queue path: starts at 5 units, random walk on a coarse grid
            knots = np.linspace(0.0, 1.0, 11)[:-1]
            units = np.maximum(
                5 + np.cumsum(rng.integers(-1, 2, knots.size)), 1
            ).astype(float)
            values = np.ones((knots.size, 1))
            values[:, 0] = units
            from ppreg.model import PathScaledBaseline

            base = PathScaledBaseline(times=knots, values=values)
            m = ModelSpec(
                d=1,
                horizon=TimeHorizon(0.0, 0.0, 1.0),
                baseline=base,
                kernel=ZeroKernel(d=1, d0=1),
                covariate=CovariateSpec("self_exciting"),
                n=n,
                param_space=ParamSpace(np.array([0.01]), np.array([5.0])),
            )
            path = simulate(m, np.array([theta_c_star]), SimOptions(seed=seed))
            res = qmle(m, path)
            if abs(res.theta_hat[0] - theta_c_star) <= 4 * res.stderr[0]:
                hits += 1
        assert hits >= int(0.9 * trials)

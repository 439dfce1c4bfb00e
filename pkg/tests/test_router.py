import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from querycost import synth
from querycost.errors import NoCluster
from querycost.router import (
    ClusterState, Job, RoutingPolicy, SimulationReport, _water_fill, capacity_for_utilization, class_cost_estimates,
    make_clusters, oracle_predictor, route, simulate, workload_from_records,
)


def test_round_robin_cycles():
    clusters = make_clusters(3, 10.0)
    pol = RoutingPolicy("round_robin")
    assert [route("q", (0, 0), clusters, pol) for _ in range(7)] == [0, 1, 2, 0, 1, 2, 0]


def test_least_loaded_uses_outstanding_count():
    clusters = make_clusters(3, 10.0)
    clusters[0].queue.extend([object(), object()])
    clusters[1].queue.append(object())
    assert route("q", (0, 0), clusters, RoutingPolicy("least_loaded")) == 2


def test_predicted_cost_heavy_cap_and_hold():
    clusters = make_clusters(2, 10.0)
    pol = RoutingPolicy("predicted_cost", heavy_cap=1)
    clusters[0].est_work = 5.0
    assert route("q", (2, 0), clusters, pol) == 1
    clusters[1].heavy_count = 1
    assert route("q", (2, 0), clusters, pol) == 0
    clusters[0].heavy_count = 1
    assert route("q", (2, 0), clusters, pol) is None
    assert route("q", (0, 0), clusters, pol) == 1


def test_no_clusters():
    with pytest.raises(NoCluster):
        route("q", (0, 0), [], RoutingPolicy())
    with pytest.raises(NoCluster):
        simulate([Job(0, "q", 1.0, 0, 0)], [], RoutingPolicy(), oracle_predictor)
    with pytest.raises(ValueError):
        RoutingPolicy("random")


def test_water_fill_shares_capacity():
    running = [["a", 1.0], ["b", 10.0], ["c", 10.0]]
    done = _water_fill(running, 9.0)
    assert [d[0] for d in done] == ["a"]
    assert [r[1] for r in running] == [6.0, 6.0]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.01, 100), min_size=1, max_size=20), st.floats(0.1, 100))
def test_water_fill_conserves_work(costs, cap):
    running = [[i, c] for i, c in enumerate(costs)]
    before = sum(costs)
    done = _water_fill(running, cap)
    after = sum(r[1] for r in running)
    assert before - after == pytest.approx(min(cap, before), rel=1e-9, abs=1e-6)
    assert len(done) + len(running) == len(costs)


def test_simulation_completes_every_job():
    jobs = [Job(t // 3, f"q{t}", 1.0 + (t % 5), 0, 0) for t in range(60)]
    for kind in ("round_robin", "least_loaded", "predicted_cost"):
        rep = simulate(jobs, make_clusters(3, 2.0, max_concurrency=2), RoutingPolicy(kind), oracle_predictor)
        assert rep.n_queries == 60 and rep.max_imbalance >= rep.mean_imbalance >= 0
        assert len(rep.imbalance_series) == rep.ticks
        assert "imbalance_series" not in rep.to_dict()


def test_simulation_rejects_unsorted_workload():
    with pytest.raises(ValueError):
        simulate([Job(2, "a", 1, 0, 0), Job(1, "b", 1, 0, 0)], make_clusters(1, 1.0), RoutingPolicy(),
                 oracle_predictor)


def test_heavy_cap_respected():
    jobs = [Job(0, f"h{i}", 50.0, 2, 0) for i in range(6)] + [Job(1, "l", 1.0, 0, 0)]
    rep = simulate(jobs, make_clusters(2, 5.0), RoutingPolicy("predicted_cost", heavy_cap=2), oracle_predictor)
    assert rep.max_heavy_per_cluster <= 2


@settings(max_examples=15, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.floats(0.1, 30), st.integers(0, 2)), min_size=1, max_size=40),
       st.integers(1, 4), st.sampled_from(["round_robin", "least_loaded", "predicted_cost"]))
def test_every_job_finishes_after_arrival(rows, n_clusters, kind):
    rows.sort(key=lambda r: r[0])
    jobs = [Job(t, f"q{i}", c, k, 0) for i, (t, c, k) in enumerate(rows)]
    rep = simulate(jobs, make_clusters(n_clusters, 3.0, 4), RoutingPolicy(kind, heavy_cap=1), oracle_predictor)
    assert rep.n_queries == len(jobs) and rep.p95_queue_wait >= 0
    assert kind != "predicted_cost" or rep.max_heavy_per_cluster <= 1


def test_workload_and_capacity():
    recs = synth.generate(synth.default_spec(), 500, seed=0)
    jobs = workload_from_records(recs, arrivals_per_tick=10, seed=1)
    assert [j.arrival for j in jobs] == sorted(j.arrival for j in jobs)
    assert jobs[0].cpu_cost == recs[0].cpu_time_ms / 1000
    cap = capacity_for_utilization(jobs, 4, 0.8)
    assert cap * 4 * 0.8 * (jobs[-1].arrival + 1) == pytest.approx(sum(j.cpu_cost for j in jobs))
    costs = class_cost_estimates(jobs)
    assert costs[0] < 30 <= costs[1] < 18000


def test_report_json():
    rep = SimulationReport("round_robin", 1, 1, 0.0, 0.0, 0.0, 0.0, 0, 0, 0, [0.0])
    assert '"policy": "round_robin"' in rep.to_json()


def test_cluster_load():
    c = ClusterState(0, 4.0)
    c.running.append([Job(0, "a", 8.0, 0, 0), 6.0])
    c.queue.append(Job(0, "b", 2.0, 0, 0))
    assert c.load == 2.0 and c.outstanding == 2

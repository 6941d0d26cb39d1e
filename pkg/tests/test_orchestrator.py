import copy
import json
import sys
import textwrap

import pytest

from slicebench.errors import (AdapterError, IncompleteResultError, PlanError,
                               ReadinessTimeout, ResponseError, ValidationError)
from slicebench.orchestrator import (DEFAULT_SEED, ExperimentResult, ExternalAdapter,
                                     SimulatedAdapter, data_path, deployment_overhead,
                                     load_plan, measure_deployment, parse_plan,
                                     replay_responses, resolve_seed, run_experiment)
from slicebench.simring import RingConfig
from slicebench.workload import Operation

FACTORS = [{"name": "A", "field": "vcpus", "low_label": "1vCPU", "high_label": "4vCPU"},
           {"name": "B", "field": "ram_gb", "low_label": "2 GB RAM", "high_label": "8 GB RAM"}]


def sim_plan(model, ops=2000, **extra):
    wl = {"entry_count": 1000, "op_count": ops, "seed": 3}
    plan = {"plan_id": "t", "factors": copy.deepcopy(FACTORS),
            "workloads": {"write": wl, "read": dict(wl)},
            "adapter": {"kind": "simulated", "ring": {"seed": 1, "latency_model": dict(model)}}}
    plan.update(extra)
    return plan


CPU_ONLY = {"cpu_alpha": 3.0, "ram_beta": 0.0, "jitter_sigma": 0.2}


class TestReplay:
    def test_bundled_fibre(self):
        r = replay_responses(data_path("fibre_ng.csv"))
        assert r[Operation.WRITE].values == (156.9, 93.5, 186.6, 93.0)
        assert r[Operation.READ].values == (100.3, 99.1, 101.3, 98.2)
        assert r[Operation.WRITE].source == "replayed"

    def test_bundled_fabric(self):
        r = replay_responses(data_path("fabric.csv"))
        assert r[Operation.READ].values == (616.5, 830.8, 385.8, 275.8)
        assert r[Operation.WRITE].values == (719.2, 913.3, 404.4, 265.4)

    def write(self, tmp_path, body):
        p = tmp_path / "r.csv"
        p.write_text("experiment,operation,latency_ms\n" + textwrap.dedent(body))
        return p

    def test_missing_row(self, tmp_path):
        p = self.write(tmp_path, "1,write,1\n2,write,2\n3,write,3\n")
        with pytest.raises(ResponseError, match="experiment\\(s\\) 4"):
            replay_responses(p, n_rows=4)
        with pytest.raises(ResponseError, match="4"):
            replay_responses(p)

    def test_duplicate(self, tmp_path):
        p = self.write(tmp_path, "1,write,1\n1,write,2\n2,write,3\n")
        with pytest.raises(ResponseError, match="duplicate"):
            replay_responses(p)

    def test_non_positive(self, tmp_path):
        p = self.write(tmp_path, "1,read,1\n2,read,0\n")
        with pytest.raises(ResponseError, match="positive"):
            replay_responses(p)

    def test_order_by_experiment(self, tmp_path):
        p = self.write(tmp_path, "2,read,20\n1,read,10\n")
        assert replay_responses(p)[Operation.READ].values == (10.0, 20.0)

    def test_bad_header(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("exp,op,lat\n1,write,2\n")
        with pytest.raises(ResponseError, match="header"):
            replay_responses(p)

    def test_replay_plan(self):
        res = run_experiment(load_plan("fibre_ng_replay.json"))
        assert res.response_vector("write").values == (156.9, 93.5, 186.6, 93.0)
        assert res.response_vector("read").values == (100.3, 99.1, 101.3, 98.2)
        assert res.deployment_time_s == 73.2


class TestRunExperiment:
    def test_cpu_only_monotone(self, backend):
        res = run_experiment(parse_plan(sim_plan(CPU_ONLY)))
        w = res.response_vector("write").values
        # rows: (1,2) (4,2) (1,8) (4,8)
        assert w[1] < w[0] and w[3] < w[2]
        assert [c.allocation.to_dict() for c in res.cells] == [
            {"vcpus": 1, "ram_gb": 2.0}, {"vcpus": 4, "ram_gb": 2.0},
            {"vcpus": 1, "ram_gb": 8.0}, {"vcpus": 4, "ram_gb": 8.0}]
        assert res.analyze("write").influence.percentages["A"] > 99

    def test_repetitions_deterministic(self):
        plan = parse_plan(sim_plan({"cpu_alpha": 1.0, "ram_beta": 1.0, "stall_ms": 5.0,
                                    "jitter_sigma": 0.3}, repetitions=3))
        a, b = run_experiment(plan), run_experiment(plan)
        assert a.to_json() == b.to_json()
        assert all(len(c.runs) == 3 for c in a.cells)
        an = a.analyze("read")
        assert an.breakdown.ss_error > 0
        assert sum(an.influence.percentages.values()) == pytest.approx(100, abs=1e-9)

    def test_randomized_order_keeps_alignment(self):
        base = run_experiment(parse_plan(sim_plan(CPU_ONLY)))
        shuffled = run_experiment(parse_plan(sim_plan(CPU_ONLY, cell_order={"randomized": 4})))
        assert shuffled.execution_order != [1, 2, 3, 4]
        assert sorted(shuffled.execution_order) == [1, 2, 3, 4]
        assert shuffled.response_vector("write") == base.response_vector("write")

    def test_failed_cell_refused(self):
        model = {"cpu_alpha": 0.0, "ram_beta": 2.0, "stall_ms": 500.0}
        plan = sim_plan(model)
        plan["adapter"]["ring"]["timeout_ms"] = 100.0
        res = run_experiment(parse_plan(plan))
        # 2 GB always stalls; 8 GB times out on ~44% of quorum ops, under the threshold
        assert [c.status for c in res.cells] == ["failed", "failed", "ok", "ok"]
        assert "WorkloadAborted" in res.cells[0].error
        assert res.cells[0].means == {}
        with pytest.raises(IncompleteResultError, match="refusing"):
            res.analyze("write")
        again = ExperimentResult.from_dict(json.loads(res.to_json()))
        with pytest.raises(IncompleteResultError):
            again.analyze("write")

    def test_result_round_trip_is_idempotent(self, tmp_path):
        res = run_experiment(parse_plan(sim_plan(CPU_ONLY)))
        p = tmp_path / "r.json"
        p.write_text(res.to_json())
        loaded = ExperimentResult.load(p)
        assert loaded.to_json() == res.to_json()
        assert json.dumps(loaded.analyze("read").to_dict()) == \
            json.dumps(res.analyze("read").to_dict())

    def test_virtual_timestamps(self):
        res = run_experiment(parse_plan(sim_plan(CPU_ONLY)))
        spans = [c.timestamps["virtual_time_ms"] for c in res.cells]
        assert all(a < b for a, b in spans)
        assert all(spans[i][1] == spans[i + 1][0] for i in range(3))


class TestPlanValidation:
    def test_unknown_top_level_key(self):
        with pytest.raises(PlanError, match="schema"):
            parse_plan(sim_plan(CPU_ONLY, seed=4))

    def test_unknown_nested_key(self):
        plan = sim_plan(CPU_ONLY)
        plan["adapter"]["ring"]["latency_model"]["gamma"] = 1
        with pytest.raises(PlanError):
            parse_plan(plan)

    def test_same_field_twice(self):
        plan = sim_plan(CPU_ONLY)
        plan["factors"][1] = dict(plan["factors"][0], name="C")
        with pytest.raises(PlanError, match="vcpus"):
            parse_plan(plan)

    def test_undecodable_label(self):
        plan = sim_plan(CPU_ONLY)
        plan["factors"][0] = dict(plan["factors"][0], low_label="small")
        with pytest.raises(PlanError, match="decode"):
            parse_plan(plan)
        plan["factors"][0]["low"] = 2
        assert parse_plan(plan).allocation(0).vcpus == 2

    def test_rf_above_ring(self):
        plan = sim_plan(CPU_ONLY)
        plan["adapter"]["ring"]["replication_factor"] = 5
        with pytest.raises(PlanError):
            parse_plan(plan)

    def test_seed_precedence(self, monkeypatch):
        monkeypatch.delenv("SLICEBENCH_SEED", raising=False)
        assert resolve_seed(None, None) == DEFAULT_SEED
        monkeypatch.setenv("SLICEBENCH_SEED", "99")
        assert resolve_seed(None, None) == 99
        assert resolve_seed(None, 5) == 5
        assert resolve_seed(7, 5) == 7
        plan = sim_plan(CPU_ONLY)
        del plan["adapter"]["ring"]["seed"]
        p = parse_plan(plan)
        assert p.adapter["ring"]["seed"] == 99 and p.workloads[Operation.WRITE].seed == 3
        p = parse_plan(plan, seed=8)
        assert p.adapter["ring"]["seed"] == 8 and p.workloads[Operation.READ].seed == 8

    def test_all_bundled_plans_validate(self):
        for path in sorted(data_path("plans").glob("*.json")):
            plan = load_plan(path)
            assert parse_plan(json.loads(json.dumps(plan.to_dict()))).to_dict() == plan.to_dict()


class TestDeployment:
    @pytest.mark.parametrize("t", [73.2, 44.0])
    def test_simulated(self, t):
        assert measure_deployment(SimulatedAdapter(RingConfig(), deploy_time_s=t)) == t

    def test_readiness_timeout(self):
        with pytest.raises(ReadinessTimeout):
            measure_deployment(SimulatedAdapter(RingConfig(), 120.0, readiness_timeout_s=60.0))

    def test_external_readiness_timeout(self):
        ad = ExternalAdapter("true", readiness_command=f"{sys.executable} -c 'raise SystemExit(1)'",
                             readiness_timeout_s=0.2, poll_interval_s=0.05)
        with pytest.raises(ReadinessTimeout):
            measure_deployment(ad)

    def test_external_ready(self, tmp_path):
        flag = tmp_path / "ready"
        ad = ExternalAdapter("true", deploy_command=f"touch {flag}",
                             readiness_command=f"test -e {flag}", readiness_timeout_s=5)
        assert 0 <= measure_deployment(ad) < 5

    def test_overhead(self):
        assert round(deployment_overhead(73.2, 44.0), 2) == 66.36
        assert deployment_overhead(50.0, 50.0) == 0.0
        assert round(deployment_overhead(44.0, 73.2), 2) == -39.89
        with pytest.raises(ValidationError):
            deployment_overhead(1.0, 0.0)


FAKE_STRESS = '''
import sys
vcpus, ram, op = float(sys.argv[1]), float(sys.argv[2]), sys.argv[3]
mean = 100.0 / vcpus + (20.0 if op == "read" else 0.0)
print("Results:")
print(f"op rate : {1000.0 / mean} op/s")
print(f"latency mean : {mean} ms")
print(f"latency 99th percentile : {2 * mean} ms")
print("total ops : 1000")
'''


class TestExternalAdapter:
    def plan(self, tmp_path, script=FAKE_STRESS):
        path = tmp_path / "stress.py"
        path.write_text(script)
        return {"plan_id": "ext", "factors": copy.deepcopy(FACTORS), "workloads": {"write": {}, "read": {}},
                "adapter": {"kind": "external",
                            "command": f"{sys.executable} {path} {{vcpus}} {{ram_gb}} {{operation}}",
                            "workdir": str(tmp_path)}}

    def test_runs_and_parses(self, tmp_path):
        res = run_experiment(parse_plan(self.plan(tmp_path)))
        assert res.adapter_kind == "external"
        assert res.response_vector("write").values == (100.0, 25.0, 100.0, 25.0)
        assert res.response_vector("read").values == (120.0, 45.0, 120.0, 45.0)
        assert res.analyze("write").influence.percentages["A"] == pytest.approx(100.0)

    def test_bad_output_fails_cell(self, tmp_path):
        res = run_experiment(parse_plan(self.plan(tmp_path, "print('latency mean : 1,0 ms')")))
        assert all(c.status == "failed" for c in res.cells)

    def test_nonzero_exit(self, tmp_path):
        res = run_experiment(parse_plan(self.plan(tmp_path, "raise SystemExit(3)")))
        assert "exited 3" in res.cells[0].error

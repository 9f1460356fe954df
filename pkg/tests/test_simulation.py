from fractions import Fraction

import pytest

from nvsim.cluster import uniform_cluster
from nvsim.errors import AccessDenied, InfeasibleRequest, NodeBusy, UnknownDataset
from nvsim.jobs import IoPhase, Job, OutputSpec, Policy, StageDirective, Workflow
from nvsim.memory import MemoryMode
from nvsim import scheduler
from nvsim.simulation import Simulation
from nvsim.workload import DataSetSpec, WorkloadSpec

GB = 10**9
TB = 10**12
S = 10**9


def make_sim(n=4, workload=None, policy=None, dfs=False, **kw):
    cluster = uniform_cluster(n, dfs_members=tuple(range(n)) if dfs else None)
    return Simulation(cluster, workload=workload, policy=policy,
                      check_invariants=True, **kw)


def job(jid="j1", submit=0, nodes=1, bapm=100 * GB, compute=100, walltime=400, **kw):
    return Job(job_id=jid, owner=kw.pop("owner", "u0"), submit_ns=submit * S,
               nodes_requested=nodes, bapm_bytes_per_node=bapm,
               compute_ns=compute * S, walltime_ns=walltime * S, **kw)


def kinds(trace, kind=None):
    if kind is None:
        return [ev.kind for ev in trace]
    return [ev for ev in trace if ev.kind == kind]


class TestSubmitAndFcfs:
    def test_empty_workload_empty_trace(self):
        sim = make_sim()
        trace = sim.run()
        assert len(trace) == 0
        assert sim.engine.now == 0

    def test_single_compute_job_runs_to_completion(self):
        sim = make_sim()
        sim.engine.schedule(0, lambda: scheduler.submit(sim, job()))
        trace = sim.run()
        seq = kinds(trace)
        assert seq == ["submit", "allocate", "job_start", "job_end"]
        ends = kinds(trace, "job_end")
        assert ends[0].ts == 100 * S
        assert ends[0].payload["status"] == "completed"

    def test_infeasible_bapm_demand_rejected(self):
        sim = make_sim()
        bad = job(bapm=4 * TB)
        sim.engine.schedule(0, lambda: scheduler.submit(sim, bad))
        with pytest.raises(InfeasibleRequest):
            sim.run()
        assert sim.jobs["j1"].status == "rejected"

    def test_fcfs_order_two_jobs(self):
        sim = make_sim(n=1)
        sim.engine.schedule(0, lambda: scheduler.submit(sim, job("a", compute=50,
                                                                 walltime=50)))
        sim.engine.schedule(1, lambda: scheduler.submit(sim, job("b", compute=50,
                                                                 walltime=50)))
        trace = sim.run()
        starts = {e.payload["job"]: e.ts for e in kinds(trace, "job_start")}
        assert starts["a"] == 0
        assert starts["b"] == 50 * S

    def test_two_free_nodes_two_jobs_start_together(self):
        sim = make_sim(n=2)
        sim.engine.schedule(0, lambda: scheduler.submit(sim, job("a")))
        sim.engine.schedule(0, lambda: scheduler.submit(sim, job("b")))
        trace = sim.run()
        starts = {e.payload["job"]: e.ts for e in kinds(trace, "job_start")}
        assert starts == {"a": 0, "b": 0}

    def test_walltime_kill(self):
        # compute takes 100 s but walltime is cut at 100 s with a 60 s read
        # phase in between: the job times out
        ph = (IoPhase(0, 750 * GB, "read", "external-fs"),)  # 60 s at 12.5 GB/s
        j = job("t", compute=100, walltime=100, io_phases=ph)
        sim = make_sim()
        sim.engine.schedule(0, lambda: scheduler.submit(sim, j))
        trace = sim.run()
        end = kinds(trace, "job_end")[0]
        assert end.payload["status"] == "timeout"
        assert end.ts == 100 * S


class TestModeSwitching:
    def test_job_needing_dlm_waits_for_switch(self):
        sim = make_sim()
        j = job("d", required_mode=MemoryMode.DLM, dlm_hit_rate=1.0)
        sim.engine.schedule(0, lambda: scheduler.submit(sim, j))
        trace = sim.run()
        seq = kinds(trace)
        assert seq == ["submit", "allocate", "mode_switch_start",
                       "mode_switch_end", "job_start", "job_end"]
        start = kinds(trace, "job_start")[0]
        assert start.ts == 300 * S  # default switch duration
        assert kinds(trace, "job_end")[0].ts == 400 * S

    def test_dlm_hit_rate_scales_compute(self):
        sim = make_sim()
        j = job("d", compute=100, walltime=1000,
                required_mode=MemoryMode.DLM, dlm_hit_rate=0.5)
        sim.engine.schedule(0, lambda: scheduler.submit(sim, j))
        trace = sim.run()
        start = kinds(trace, "job_start")[0].ts
        end = kinds(trace, "job_end")[0].ts
        # mixture factor = 0.5 + 0.5*5 = 3
        assert end - start == 300 * S

    def test_switch_scrubs_resident_data(self):
        wl = WorkloadSpec(datasets=(DataSetSpec("d1", 10 * GB, "u0"),))
        sim = make_sim(workload=wl)
        # put a replica on node 0, then switch node 0 to DLM
        sim.engine.schedule(0, lambda: sim.storage.place_replica("d1", "local-fs", 0))
        sim.engine.schedule(1, lambda: sim.set_mode(0, MemoryMode.DLM))
        trace = sim.run()
        scrubs = kinds(trace, "scrub")
        assert len(scrubs) == 1
        assert scrubs[0].payload["reason"] == "mode-switch"
        assert sim.nodes[0].mode is MemoryMode.DLM
        assert sim.storage.node_replica_bytes[0] == 0

    def test_set_mode_same_mode_is_noop(self):
        sim = make_sim()
        sim.engine.schedule(0, lambda: sim.set_mode(0, MemoryMode.SLM))
        trace = sim.run()
        assert [e.kind for e in trace] == ["mode_switch_start", "mode_switch_end"]
        assert trace.records[0].ts == trace.records[1].ts == 0

    def test_set_mode_on_busy_node_rejected(self):
        sim = make_sim(n=1)
        sim.engine.schedule(0, lambda: scheduler.submit(sim, job()))
        sim.engine.schedule(10, lambda: sim.set_mode(0, MemoryMode.DLM))
        with pytest.raises(NodeBusy):
            sim.run()


class TestStagingAndData:
    def workload_with_dataset(self, stage_to="job-nodes", bytes_=300 * GB):
        ds = DataSetSpec("din", bytes_, "u0")
        j = job("s", compute=10, walltime=600,
                inputs=("din",),
                stage_in=(StageDirective("din", stage_to),))
        return WorkloadSpec(jobs=(j,), datasets=(ds,))

    def test_stage_in_gates_launch(self):
        sim = make_sim(workload=self.workload_with_dataset())
        trace = sim.run()
        seq = kinds(trace)
        # 300 GB at link 12.5 GB/s = 24 s staging, then a local read
        stage_end = kinds(trace, "stage_end")[0]
        start = kinds(trace, "job_start")[0]
        assert stage_end.ts == 24 * S
        assert start.ts == 24 * S
        assert seq.index("stage_end") < seq.index("job_start")
        read = kinds(trace, "io_start")[0]
        assert read.payload["path"] == "local"

    def test_input_read_costs_time(self):
        sim = make_sim(workload=self.workload_with_dataset())
        trace = sim.run()
        # read 300 GB from local bapm at 20 GB/s = 15 s, then compute 10 s
        end = kinds(trace, "job_end")[0]
        assert end.ts == (24 + 15 + 10) * S

    def test_unstaged_input_read_from_external(self):
        ds = DataSetSpec("din", 125 * GB, "u0")
        j = job("s", compute=10, walltime=600, inputs=("din",))
        sim = make_sim(workload=WorkloadSpec(jobs=(j,), datasets=(ds,)))
        trace = sim.run()
        read = kinds(trace, "io_start")[0]
        assert read.payload["path"] == "external"
        assert read.payload["tier"] == "external-fs"
        # 125 GB over a 12.5 GB/s link = 10 s
        end = kinds(trace, "job_end")[0]
        assert end.ts == (10 + 10) * S

    def test_cross_owner_without_grant_denied(self):
        ds = DataSetSpec("din", GB, "alice")
        j = job("s", owner="bob", inputs=("din",))
        sim = make_sim(workload=WorkloadSpec(jobs=(j,), datasets=(ds,)))
        trace = sim.run()
        assert sim.jobs["s"].status == "rejected"
        sub = kinds(trace, "submit")[0]
        assert sub.payload["status"] == "rejected"

    def test_cross_owner_with_grant_allowed(self):
        ds = DataSetSpec("din", GB, "alice")
        j = job("s", owner="bob", inputs=("din",))
        wl = WorkloadSpec(jobs=(j,), datasets=(ds,), grants={"alice": ("bob",)})
        sim = make_sim(workload=wl)
        sim.run()
        assert sim.jobs["s"].status == "completed"

    def test_scratch_scrubbed_after_job(self):
        ph = (IoPhase(10 * S, 50 * GB, "write", "distributed-fs"),)
        j = job("w", compute=20, walltime=600, io_phases=ph)
        sim = make_sim(dfs=True, workload=WorkloadSpec(jobs=(j,)))
        trace = sim.run()
        scrubs = kinds(trace, "scrub")
        assert any(s.payload["reason"] == "cleanup" for s in scrubs)
        assert sim.storage.dfs_used == 0
        assert all(v == 0 for v in sim.storage.node_replica_bytes.values())

    def test_output_staged_out_and_scrubbed(self):
        j = job("o", compute=10, walltime=600,
                outputs=(OutputSpec("result", 100 * GB, "external-fs"),))
        sim = make_sim(workload=WorkloadSpec(jobs=(j,)))
        trace = sim.run()
        stage = kinds(trace, "stage_end")[-1]
        assert stage.payload["dataset"] == "result"
        assert stage.payload["dst"] == "external-fs"
        # 100 GB at 12.5 GB/s link = 8 s after the 10 s job
        assert stage.ts == 18 * S
        # node copy scrubbed once archived
        assert all(v == 0 for v in sim.storage.node_replica_bytes.values())
        assert sim.storage.external_used == 100 * GB


class TestWorkflows:
    def chain(self, ttl=3600):
        wf = Workflow("W", ("a", "b"), (("a", "b"),), retention_ttl_ns=ttl * S)
        ja = job("a", compute=10, walltime=600, workflow_id="W",
                 outputs=(OutputSpec("mid", 50 * GB, "local-fs"),))
        jb = job("b", compute=10, walltime=600, workflow_id="W",
                 inputs=("mid",))
        return WorkloadSpec(jobs=(ja, jb), workflows=(wf,))

    def test_successor_gated_then_runs(self):
        sim = make_sim(workload=self.chain())
        trace = sim.run()
        subs = {e.payload.get("job"): e.payload["status"]
                for e in kinds(trace, "submit") if "job" in e.payload}
        assert subs["b"] == "pending"
        starts = {e.payload["job"]: e.ts for e in kinds(trace, "job_start")}
        ends = {e.payload["job"]: e.ts for e in kinds(trace, "job_end")}
        assert starts["b"] >= ends["a"]
        assert sim.jobs["b"].status == "completed"

    def test_intermediate_retained_with_expiry_then_scrubbed(self):
        sim = make_sim(workload=self.chain(ttl=100))
        trace = sim.run()
        expiries = kinds(trace, "expiry")
        assert expiries, "retained workflow data should eventually expire"
        scrubs = [s for s in kinds(trace, "scrub")
                  if s.payload["dataset"] == "mid"]
        assert scrubs and scrubs[-1].payload["reason"] == "expired"
        assert all(v == 0 for v in sim.storage.node_replica_bytes.values())

    def test_retained_data_reused_by_successor(self):
        sim = make_sim(workload=self.chain())
        trace = sim.run(until=10**15)
        reads = [e for e in kinds(trace, "io_start")
                 if e.payload.get("dataset") == "mid"]
        assert reads, "successor reads the shared dataset"
        assert reads[0].payload["path"] in ("local", "remote-bapm")


class TestDeterminism:
    def test_identical_runs_identical_traces(self):
        from nvsim.workload import SynthParams, synth_workload
        cluster = uniform_cluster(4, dfs_members=(0, 1, 2, 3))
        params = SynthParams(job_count=12, seed=7)
        wl = synth_workload(params, cluster)
        t1 = Simulation(cluster, workload=wl, check_invariants=True).run()
        t2 = Simulation(cluster, workload=wl, check_invariants=True).run()
        assert list(t1.lines()) == list(t2.lines())

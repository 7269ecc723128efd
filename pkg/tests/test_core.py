import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stragglersim import core
from stragglersim.core import ClusterState, Host, Job, Task, TaskState


def make_host(hid, cpu=1000.0, ram=4096.0, disk=160000.0, bw=2.0, cost=4.0,
              pmin=108.0, pmax=273.0, **kw):
    return Host(id=hid, cpu_capacity=cpu, ram_capacity=ram, disk_capacity=disk,
                bw_capacity=bw, cost_per_interval=cost, power_min=pmin,
                power_max=pmax, **kw)


def make_state(n_hosts=3, q_max=10):
    hosts = [make_host(i) for i in range(n_hosts)]
    return ClusterState(hosts=hosts, q_max=q_max)


def add_job(state, job_id, n_tasks, **task_kw):
    task_ids = []
    for i in range(n_tasks):
        tid = job_id * 100 + i
        defaults = dict(cpu_req=500.0, ram_req=1024.0, disk_req=8000.0,
                        bw_req=0.5, length=10000.0, submit_time=0.0)
        defaults.update(task_kw)
        state.tasks[tid] = Task(id=tid, job_id=job_id, **defaults)
        task_ids.append(tid)
    job = Job(id=job_id, tasks=task_ids, deadline_driven=False, sla_deadline=1000.0)
    state.jobs[job_id] = job
    return job


class TestHostFeatures:
    def test_idle_online_host(self):
        state = make_state(1)
        row = core.extract_host_features(state)[0]
        # utilizations zero, capacity/cost/power norms are ratios to fleet max
        assert row[0] == 0.0 and row[2] == 0.0 and row[4] == 0.0 and row[6] == 0.0
        assert row[1] == 1.0  # cpu_cap / fleet max (single host)
        assert row[8] == 1.0 and row[10] == 1.0
        assert row[11] == 0.0

    def test_offline_host_zero_row(self):
        state = make_state(2)
        state.hosts[1].online = False
        state.hosts[1].downtime_remaining = 2
        mat = core.extract_host_features(state)
        assert np.all(mat[1] == 0.0)
        assert not np.all(mat[0] == 0.0)

    def test_half_cpu_utilization(self):
        state = make_state(1)
        state.hosts[0].cpu_used = state.hosts[0].cpu_capacity / 2
        assert core.extract_host_features(state)[0][0] == 0.5

    def test_shape_and_range(self):
        state = make_state(5)
        state.hosts[2].ram_used = 4096.0
        state.hosts[3].active_task_count = 999  # beyond configured max, clamps
        mat = core.extract_host_features(state)
        assert mat.shape == (5, core.HOST_FEATURES)
        assert np.all(mat >= 0.0) and np.all(mat <= 1.0)

    def test_pure_function_of_state(self):
        state = make_state(4)
        state.hosts[1].cpu_used = 321.0
        a = core.extract_host_features(state)
        b = core.extract_host_features(state)
        assert np.array_equal(a, b)


class TestTaskFeatures:
    def test_padding_rows_zero(self):
        state = make_state(3, q_max=10)
        job = add_job(state, 1, 2)
        mat = core.extract_task_features(state, job)
        assert mat.shape == (10, core.TASK_FEATURES)
        assert np.all(mat[2:] == 0.0)
        assert np.any(mat[:2] != 0.0)

    def test_unassigned_prev_host_is_zero(self):
        state = make_state(3)
        job = add_job(state, 1, 2)
        mat = core.extract_task_features(state, job)
        assert mat[0][4] == 0.0

    def test_prev_host_normalized_index(self):
        state = make_state(7)
        job = add_job(state, 1, 2)
        state.tasks[job.tasks[0]].prev_host = 3  # index 3 of 7 hosts
        mat = core.extract_task_features(state, job)
        assert mat[0][4] == pytest.approx(4 / 8)

    def test_unknown_job_rejected(self):
        state = make_state(2)
        ghost = Job(id=99, tasks=[], deadline_driven=False, sla_deadline=10.0)
        with pytest.raises(ValueError, match="unknown job"):
            core.extract_task_features(state, ghost)


class TestEmaUpdate:
    def test_first_observation_passthrough(self):
        fresh = np.array([[0.25, 0.5]])
        out = core.ema_update(None, fresh, 0.8)
        assert np.array_equal(out, fresh)
        assert out is not fresh  # defensive copy

    def test_weighted_blend(self):
        ema = np.zeros((2, 2))
        fresh = np.ones((2, 2))
        out = core.ema_update(ema, fresh, 0.8)
        assert np.allclose(out, 0.8)

    def test_fixed_point(self):
        ema = np.full((3,), 0.4)
        out = core.ema_update(ema, ema.copy(), 0.8)
        assert np.allclose(out, ema)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            core.ema_update(np.zeros((2, 2)), np.zeros((3, 2)), 0.8)

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4),
        st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4),
        st.floats(0.01, 1.0),
    )
    def test_convexity_keeps_unit_range(self, a, b, w):
        out = core.ema_update(np.array(a), np.array(b), w)
        assert np.all(out >= 0.0) and np.all(out <= 1.0)


class TestInvariants:
    def test_capacity_validation(self):
        with pytest.raises(ValueError):
            make_host(0, cpu=0.0)

    def test_power_ordering(self):
        with pytest.raises(ValueError):
            make_host(0, pmin=300.0, pmax=200.0)

    def test_task_state_enum(self):
        t = Task(id=1, job_id=1, cpu_req=1, ram_req=1, disk_req=1, bw_req=1,
                 length=10, submit_time=0.0)
        assert t.state is TaskState.QUEUED
        assert t.response_time is None
        t.completion_time = 12.0
        assert t.response_time == 12.0

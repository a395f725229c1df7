import pytest

from cloudsched.workload import Task, TaskSet


def make_task(tid, exec_time=0.5, cost=0.0, sys_eff=0.0, demand=1, arrival=0.0):
    return Task(
        id=tid,
        exec_time=exec_time,
        cost=cost,
        sys_eff=sys_eff,
        resource_demand=demand,
        arrival=arrival,
    )


def make_set(tasks, normalized=True):
    return TaskSet(tasks=tuple(tasks), normalized=normalized)


@pytest.fixture
def trace_file(tmp_path):
    """A well-formed 3-row trace."""
    p = tmp_path / "trace.csv"
    p.write_text(
        "# sample trace\n"
        "id,exec_time,cost,sys_eff,resource_demand,arrival\n"
        "0,2.0,1.0,0.5,1,0.0\n"
        "1,4.0,2.0,0.25,2,1.0\n"
        "2,6.0,3.0,0.75,1,2.0\n",
        encoding="utf-8",
    )
    return p

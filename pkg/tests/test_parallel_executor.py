import pytest

from utils.parallel_executor import ParallelRunExecutor, run_parallel


def _square(task):
    if task["value"] < 0:
        raise ValueError("negative")
    return {"value": task["value"], "square": task["value"] ** 2}


@pytest.mark.parametrize("workers", [1, 2])
def test_results_follow_task_order(workers):
    tasks = [{"value": v} for v in (3, 1, 4, 1, 5)]
    results = run_parallel(_square, tasks, workers=workers, show_progress=False)
    assert [r["square"] for r in results] == [9, 1, 16, 1, 25]
    assert all(r["execution_time"] >= 0 for r in results)


def test_failures_become_error_dicts_with_context():
    tasks = [{"value": 2}, {"value": -1}, {"value": 3}]
    results = run_parallel(_square, tasks, workers=1, show_progress=False)
    assert results[0]["square"] == 4 and results[2]["square"] == 9
    assert results[1]["error"] == "ValueError: negative"
    assert results[1]["context"] == {"value": -1}
    assert "Traceback" in results[1]["traceback"]


def test_progress_callback_counts_every_task():
    calls = []
    executor = ParallelRunExecutor(workers=1, show_progress=False)
    executor.execute_batch_sync(_square, [{"value": v} for v in range(4)],
                                progress_callback=lambda done, total: calls.append((done, total)))
    assert calls == [(1, 4), (2, 4), (3, 4), (4, 4)]
    assert executor.completed_count == executor.total_count == 4


def test_default_worker_count_from_environment(monkeypatch):
    monkeypatch.setenv("RISISAC_WORKERS", "3")
    assert ParallelRunExecutor(show_progress=False).workers == 3

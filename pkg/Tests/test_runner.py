import threading
import time

from unittest.mock import MagicMock

import utils.experiment_runner as experiment_runner
from lab.harness import ExperimentConfig
from utils.experiment_runner import ExperimentRunner

CONFIG = {
    "name": "runner_check",
    "sampler": {"id": "product", "params": {"n": 4}},
    "statistic": {"id": "lp_sum", "params": {"p": 1.0}},
    "bound": {"id": "lpn_gauss", "params": {"n": 4, "p": 1.0}},
    "t_grid": [1.0, 2.0],
    "trials": 1000,
}


def fake_verify(chunks, gate=None, report=None):
    """verify_bound stand-in that reports `chunks` chunks, optionally waiting on gate before each."""
    def run(config, calib=None, workers=1, chunk_size=4096, progress=None):
        for chunk in range(1, chunks + 1):
            if gate is not None:
                gate.wait(timeout=5)
            progress(chunk, chunks)
        return report if report is not None else MagicMock(passed=True)
    return run


def test_initializes_with_defaults():
    runner = ExperimentRunner()
    assert runner.workers == 4
    assert runner.chunk_size == 4096
    assert runner.get_status() == "Stopped"
    assert runner.report is None


def test_run_records_report_and_progress(monkeypatch):
    report = MagicMock(passed=True)
    monkeypatch.setattr(experiment_runner, "verify_bound", fake_verify(3, report=report))
    runner = ExperimentRunner(workers=2, chunk_size=128)
    seen = []
    finished = []
    runner.set_progress_callback(lambda chunk, total: seen.append((chunk, total)))
    runner.set_finish_callback(finished.append)
    assert runner.start(ExperimentConfig.from_dict(CONFIG))
    assert runner.wait(timeout=5)
    assert seen == [(1, 3), (2, 3), (3, 3)]
    assert runner.report is report
    assert finished == [report]
    assert runner.get_status() == "Stopped"


def test_pause_and_resume():
    runner = ExperimentRunner()
    runner.is_running = True
    runner.pause()
    assert runner.is_paused
    assert runner.get_status() == "Paused"
    runner.resume()
    assert not runner.is_paused
    assert runner.get_status() == "Running"


def test_stop_abandons_run_at_chunk_boundary(monkeypatch):
    gate = threading.Event()
    monkeypatch.setattr(experiment_runner, "verify_bound", fake_verify(10, gate=gate))
    runner = ExperimentRunner()
    finished = []
    runner.set_finish_callback(finished.append)
    runner.start(ExperimentConfig.from_dict(CONFIG))
    runner.is_running = False
    gate.set()
    assert runner.wait(timeout=5)
    assert runner.report is None
    assert runner.last_error is None
    assert finished == [None]


def test_paused_run_waits_for_resume(monkeypatch):
    gate = threading.Event()
    monkeypatch.setattr(experiment_runner, "verify_bound", fake_verify(2, gate=gate))
    runner = ExperimentRunner()
    runner.start(ExperimentConfig.from_dict(CONFIG))
    runner.pause()
    gate.set()
    time.sleep(0.3)
    assert runner.get_status() == "Paused"
    assert runner.current_chunk == 0
    runner.resume()
    assert runner.wait(timeout=5)
    assert runner.current_chunk == 2


def test_failed_run_keeps_error(monkeypatch):
    def broken(*args, **kwargs):
        raise ValueError("grid point outside the bound domain")

    monkeypatch.setattr(experiment_runner, "verify_bound", broken)
    runner = ExperimentRunner()
    finished = []
    runner.set_finish_callback(finished.append)
    runner.start(ExperimentConfig.from_dict(CONFIG))
    assert runner.wait(timeout=5)
    assert "outside the bound domain" in runner.last_error
    assert finished == [None]


def test_real_verification_finishes():
    runner = ExperimentRunner(workers=2, chunk_size=250)
    runner.start(ExperimentConfig.from_dict(CONFIG))
    assert runner.wait(timeout=60)
    assert runner.report is not None
    assert runner.report.trials == 1000
    assert runner.current_chunk == runner.total_chunks == 4


def test_wait_without_run():
    assert ExperimentRunner().wait(timeout=0.1)

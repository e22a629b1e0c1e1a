#!/usr/bin/env python3
"""
Experiment Runner Module for Concentration Lab

Runs one verification experiment at a time in a background thread so the
service can report progress and accept pause, resume and stop requests while
the Monte Carlo chunks are being drawn.

Features:
    - Threaded verify_bound execution with a progress callback per chunk
    - Pause/resume between chunk waves
    - Cooperative stop: the run is abandoned at the next chunk boundary
    - Last finished report and last error kept for retrieval

Usage:
    runner = ExperimentRunner(workers=4, chunk_size=4096)
    runner.set_progress_callback(lambda chunk, total: print(f"{chunk}/{total}"))
    runner.start(config)
    runner.pause()  # or runner.resume()
    runner.stop()
"""

import logging
import threading
import time
from typing import Callable, Optional

from lab.bounds import CalibrationSet
from lab.errors import LabError
from lab.harness import ExperimentConfig, VerificationReport, verify_bound

logger = logging.getLogger(__name__)


class RunCancelled(LabError):
    """Raised inside the worker when a stop is requested."""


class ExperimentRunner:
    """
    Background executor for verify_bound.

    Attributes:
        workers (int): Thread-pool width handed to verify_bound
        chunk_size (int): Trials per chunk
        is_running (bool): Whether a run is active
        is_paused (bool): Whether the active run is paused
        current_chunk (int): Chunks completed in the active run
        total_chunks (int): Chunks in the active run
        report (Optional[VerificationReport]): Last finished report
        last_error (Optional[str]): Message of the last failed run
        worker_thread (threading.Thread): Thread executing the run
        progress_callback (Optional[Callable]): Called with (chunk, total_chunks)
    """

    def __init__(self, workers: int = 4, chunk_size: int = 4096):
        """
        Initialize the runner.

        Args:
            workers (int): Thread-pool width (default: 4)
            chunk_size (int): Trials per chunk (default: 4096)
        """
        self.workers = workers
        self.chunk_size = chunk_size
        self.is_running = False
        self.is_paused = False
        self.current_chunk = 0
        self.total_chunks = 0
        self.report: Optional[VerificationReport] = None
        self.last_error: Optional[str] = None
        self.worker_thread: Optional[threading.Thread] = None
        self.progress_callback: Optional[Callable[[int, int], None]] = None
        self.finish_callback: Optional[Callable[[Optional[VerificationReport]], None]] = None
        self._generation = 0

    def set_progress_callback(self, callback: Callable[[int, int], None]) -> None:
        """
        Set callback function to be called when each chunk completes.

        Args:
            callback (Callable[[int, int], None]): Function called with (chunk, total_chunks)
        """
        self.progress_callback = callback

    def set_finish_callback(self, callback: Callable[[Optional[VerificationReport]], None]) -> None:
        """Set callback called with the report (None on failure or stop) when a run ends."""
        self.finish_callback = callback

    def start(self, config: ExperimentConfig, calib: Optional[CalibrationSet] = None) -> bool:
        """
        Start a verification run.

        Any active run is stopped first.

        Args:
            config (ExperimentConfig): Experiment to run
            calib (CalibrationSet): Calibration constants for the bound

        Returns:
            bool: True if the worker thread was started
        """
        self.stop()
        self.is_running = True
        self.is_paused = False
        self.current_chunk = 0
        self.total_chunks = 0
        self.last_error = None
        self._generation += 1
        self.worker_thread = threading.Thread(target=self._worker_loop, args=(config, calib, self._generation),
                                              daemon=True)
        self.worker_thread.start()
        return True

    def pause(self) -> None:
        """Pause the run at the next chunk boundary."""
        self.is_paused = True

    def resume(self) -> None:
        """Resume a paused run."""
        self.is_paused = False

    def stop(self) -> None:
        """
        Stop the active run and wait briefly for the worker to exit.

        The last finished report is kept.
        """
        self.is_running = False
        self.is_paused = False
        if self.worker_thread and self.worker_thread.is_alive():
            self.worker_thread.join(timeout=1.0)

    def get_status(self) -> str:
        """
        Get the current status of the runner.

        Returns:
            str: Status string ("Running", "Paused", "Stopped")
        """
        if not self.is_running:
            return "Stopped"
        elif self.is_paused:
            return "Paused"
        else:
            return "Running"

    def wait(self, timeout: Optional[float] = None) -> bool:
        """Join the worker; True when it has finished."""
        if self.worker_thread is None:
            return True
        self.worker_thread.join(timeout=timeout)
        return not self.worker_thread.is_alive()

    def _on_chunk(self, generation: int, chunk: int, total: int) -> None:
        while self.is_paused and self.is_running and generation == self._generation:
            time.sleep(0.1)
        if not self.is_running or generation != self._generation:
            raise RunCancelled("verification stopped")
        self.current_chunk = chunk
        self.total_chunks = total
        if self.progress_callback:
            self.progress_callback(chunk, total)

    def _worker_loop(self, config: ExperimentConfig, calib: Optional[CalibrationSet], generation: int) -> None:
        report = None
        try:
            report = verify_bound(config, calib=calib, workers=self.workers, chunk_size=self.chunk_size,
                                  progress=lambda chunk, total: self._on_chunk(generation, chunk, total))
            self.report = report
            logger.info(f"Run {config.name} finished: {'pass' if report.passed else 'fail'}")
        except RunCancelled:
            logger.info(f"Run {config.name} stopped at chunk {self.current_chunk}/{self.total_chunks}")
        except Exception as e:
            self.last_error = str(e)
            logger.error(f"Run {config.name} failed: {e}", exc_info=True)
        finally:
            if generation == self._generation:
                self.is_running = False
                self.is_paused = False
                if self.finish_callback:
                    self.finish_callback(report)

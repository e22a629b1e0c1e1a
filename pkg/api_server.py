"""
Concentration Lab - FastAPI Backend Server

This module provides the FastAPI backend for the Concentration Lab. It serves
closed-form bound curves, runs Monte Carlo bound verifications in a background
worker, and streams their progress to clients over WebSocket.

Features:
- RESTful API endpoints for configuration, bound evaluation and run control
- WebSocket for real-time progress updates
- Background verification runs with pause/resume/stop
- Configuration persistence with file-based storage

API Endpoints:
- GET /api/config - Retrieve current configuration
- POST /api/config - Update configuration
- POST /api/bound/eval - Evaluate a registered bound on a t grid
- POST /api/verify - Start a verification run
- POST /api/pause - Pause the active run
- POST /api/resume - Resume the active run
- POST /api/stop - Stop the active run
- GET /api/state - Runner state and available actions
- GET /api/report - Last finished verification report
- WebSocket /ws/progress - Real-time progress updates

Configuration:
    The server creates and manages a JSON configuration file (lab_config.json)
    that persists settings between sessions.

Threading:
    Uses threading.RLock for thread-safe configuration access; verification
    runs execute on the ExperimentRunner's worker thread.
"""

from fastapi import FastAPI, WebSocket, WebSocketDisconnect, Request
from fastapi.middleware.cors import CORSMiddleware
import asyncio
import threading
import os
import logging
from typing import Dict, Any, Set

from lab.bounds import make_curve
from lab.harness import ExperimentConfig
from utils.config_manager import ConfigManager
from utils.experiment_runner import ExperimentRunner

# Configuration constants
CONFIG_FILE = 'lab_config.json'

# Initialize FastAPI application
app = FastAPI(
    title="Concentration Lab API",
    description="Backend API for concentration bound evaluation and verification",
    version="1.0.0"
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# --- Global State ---
config_lock = threading.RLock()
ws_clients: Set[WebSocket] = set()
config_manager = ConfigManager(CONFIG_FILE)
config = config_manager.load_config()

runner = ExperimentRunner(
    workers=config.get('workers', 4),
    chunk_size=config.get('chunk_size', 4096)
)

# State for WebSocket progress updates
progress_state = {
    'chunk': 0,
    'total_chunks': 0,
    'status': 'Ready',
    'percent': 0
}

logging.basicConfig(level=logging.INFO)
logging.info(f"Backend working directory: {os.getcwd()}")
logging.info(f"Config file path: {os.path.abspath(CONFIG_FILE)}")


def update_progress(chunk: int | None = None, total_chunks: int | None = None, status: str | None = None) -> None:
    """
    Update the progress state for WebSocket broadcasting.

    Args:
        chunk (int, optional): Completed chunks
        total_chunks (int, optional): Chunks in the run
        status (str, optional): Current status ('Ready', 'Running', 'Paused', 'Finished', ...)
    """
    if chunk is not None:
        progress_state['chunk'] = chunk
    if total_chunks is not None:
        progress_state['total_chunks'] = total_chunks
    if status is not None:
        progress_state['status'] = status

    if progress_state['total_chunks'] > 0:
        progress_state['percent'] = int((progress_state['chunk'] / progress_state['total_chunks']) * 100)
    else:
        progress_state['percent'] = 0


def on_run_finished(report) -> None:
    if report is not None:
        update_progress(status='Finished')
    elif runner.last_error:
        update_progress(status='Failed')
    else:
        update_progress(status='Stopped')


runner.set_progress_callback(lambda chunk, total: update_progress(chunk, total, 'Running'))
runner.set_finish_callback(on_run_finished)


# --- HTTP Endpoints ---
@app.get("/api/config")
async def get_config() -> Dict[str, Any]:
    """
    Get the current configuration.

    Returns:
        Dict[str, Any]: Current lab configuration
    """
    with config_lock:
        return config.copy()


@app.post("/api/config")
async def update_config(request: Request) -> Dict[str, Any]:
    """
    Update the configuration.

    The merged configuration is validated before it replaces the current one,
    then persisted and applied to the runner.

    Args:
        request (Request): FastAPI request object containing JSON configuration data

    Returns:
        Dict[str, Any]: Success status and optional error message
    """
    logging.info("Configuration update requested")
    try:
        data = await request.json()
        logging.info(f"Received configuration update: {data}")

        with config_lock:
            candidate = config.copy()
            candidate.update(data)
            if not config_manager.validate_config(candidate):
                return {"success": False, "error": "Invalid configuration"}
            if not config_manager.save_config(candidate):
                return {"success": False, "error": "Failed to save configuration"}
            config.clear()
            config.update(candidate)
            runner.workers = config.get('workers', 4)
            runner.chunk_size = config.get('chunk_size', 4096)
            logging.info(f"Configuration updated: {config}")

        return {"success": True}

    except Exception as e:
        logging.error(f"Exception in configuration update: {e}", exc_info=True)
        return {"success": False, "error": str(e)}


@app.post("/api/bound/eval")
async def evaluate_bound(request: Request) -> Dict[str, Any]:
    """
    Evaluate a registered bound.

    Body: {"bound": id, "params": {...}, "t_grid": [...]}

    Returns:
        Dict[str, Any]: Curve as [[t, value], ...], deviation levels and source id
    """
    try:
        data = await request.json()
        with config_lock:
            calib = config_manager.calibration(config)
        curve = make_curve(data["bound"], data.get("params", {}), calib)
        rows = curve.grid(data["t_grid"])
        return {
            "success": True,
            "source": curve.source,
            "calib_id": curve.calib_id,
            "curve": [[t, value] for t, _, value in rows],
            "levels": [[t, level] for t, level, _ in rows],
        }
    except Exception as e:
        logging.error(f"Exception evaluating bound: {e}", exc_info=True)
        return {"success": False, "error": str(e)}


@app.post("/api/verify")
async def start_verification(request: Request) -> Dict[str, Any]:
    """
    Start a verification run in the background runner.

    Body: an experiment config document.

    Returns:
        Dict[str, Any]: Success status
    """
    try:
        data = await request.json()
        experiment = ExperimentConfig.from_dict(data)
        with config_lock:
            calib = config_manager.calibration(config)
        await asyncio.to_thread(runner.stop)
        update_progress(0, 0, 'Running')
        runner.start(experiment, calib)
        logging.info(f"Started verification {experiment.name}: {experiment.trials} trials")
        return {"success": True, "name": experiment.name}

    except Exception as e:
        logging.error(f"Exception starting verification: {e}", exc_info=True)
        return {"success": False, "error": str(e)}


@app.post("/api/pause")
async def pause_run() -> Dict[str, Any]:
    """
    Pause the active run.

    Returns:
        Dict[str, Any]: Success status
    """
    try:
        if runner.is_running and not runner.is_paused:
            runner.pause()
            update_progress(status='Paused')
            logging.info("Verification paused")
            return {"success": True}
        else:
            logging.warning("Cannot pause: runner is not running or already paused")
            return {"success": False, "error": "Runner is not running or already paused"}

    except Exception as e:
        logging.error(f"Exception in pause: {e}", exc_info=True)
        return {"success": False, "error": str(e)}


@app.post("/api/resume")
async def resume_run() -> Dict[str, Any]:
    """
    Resume a paused run.

    Returns:
        Dict[str, Any]: Success status
    """
    try:
        if runner.is_running and runner.is_paused:
            runner.resume()
            update_progress(status='Running')
            logging.info("Verification resumed")
            return {"success": True}
        else:
            logging.warning("Cannot resume: runner is not running or not paused")
            return {"success": False, "error": "Runner is not running or not paused"}

    except Exception as e:
        logging.error(f"Exception in resume: {e}", exc_info=True)
        return {"success": False, "error": str(e)}


@app.post("/api/stop")
async def stop_run() -> Dict[str, Any]:
    """
    Stop the active run and reset progress.

    Returns:
        Dict[str, Any]: Success status
    """
    try:
        await asyncio.to_thread(runner.stop)
        update_progress(0, 0, 'Ready')
        logging.info("Verification stopped")
        return {"success": True}

    except Exception as e:
        logging.error(f"Exception in stop: {e}", exc_info=True)
        return {"success": False, "error": str(e)}


@app.get("/api/state")
async def get_runner_state() -> Dict[str, Any]:
    """
    Get the current state of the runner.

    Returns:
        Dict[str, Any]: State, available actions and chunk progress
    """
    try:
        if not runner.is_running:
            state = "stopped"
            available_actions = ["verify"]
        elif runner.is_paused:
            state = "paused"
            available_actions = ["resume", "stop"]
        else:
            state = "running"
            available_actions = ["pause", "stop"]

        return {
            "state": state,
            "available_actions": available_actions,
            "completed_chunks": progress_state.get('chunk', 0),
            "total_chunks": progress_state.get('total_chunks', 0)
        }

    except Exception as e:
        logging.error(f"Exception getting runner state: {e}", exc_info=True)
        return {"state": "error", "available_actions": [], "error": str(e)}


@app.get("/api/report")
async def get_report() -> Dict[str, Any]:
    """
    Get the last finished verification report.

    Returns:
        Dict[str, Any]: Report dictionary, or an error when no run has finished
    """
    try:
        if runner.report is None:
            error = runner.last_error or "No finished verification report"
            return {"success": False, "error": error}
        return {"success": True, "report": runner.report.to_dict()}

    except Exception as e:
        logging.error(f"Exception getting report: {e}", exc_info=True)
        return {"success": False, "error": str(e)}


# --- WebSocket Endpoint ---
@app.websocket("/ws/progress")
async def websocket_progress(websocket: WebSocket):
    """
    WebSocket endpoint for real-time progress updates.

    Sends the progress state on connect and then at ~60fps until the client
    disconnects.

    Args:
        websocket (WebSocket): WebSocket connection object
    """
    await websocket.accept()
    ws_clients.add(websocket)
    logging.info(f"WebSocket client connected. Total clients: {len(ws_clients)}")

    try:
        await websocket.send_json(progress_state)

        while True:
            await asyncio.sleep(0.016)
            await websocket.send_json(progress_state)

    except WebSocketDisconnect:
        logging.info("WebSocket client disconnected")
    except Exception as e:
        logging.error(f"WebSocket error: {e}")
    finally:
        ws_clients.discard(websocket)
        logging.info(f"WebSocket client removed. Total clients: {len(ws_clients)}")

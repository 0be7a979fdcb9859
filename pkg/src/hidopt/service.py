"""HTTP facade for human-in-the-loop runs.

A session wraps a detection-mode run paused at an interaction.  The
browser (or any client) fetches the pending candidates with their full
objective vectors, submits a ranking, and the run resumes to the next
interaction or to completion.  Sessions are checkpointed to disk after
every state change, so a service restart or browser refresh never loses a
run; each session's state machine is serialized behind a lock and a
concurrent submission is rejected with a conflict.

Endpoints:
    POST /sessions                   create a session from a run config
    GET  /sessions/{id}              status + history
    GET  /sessions/{id}/candidates   pending candidates (awaiting_ranking only)
    POST /sessions/{id}/ranking      submit ranks, resume the run
"""

from __future__ import annotations

import json
import threading
import uuid
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .core import ParameterError, ScheduleError
from .orchestrator import RunConfig, RunState


class CreateSessionRequest(BaseModel):
    config: dict


class RankingRequest(BaseModel):
    ranks: list[int]


class SessionStore:
    """In-memory sessions with optional file-backed persistence."""

    def __init__(self, checkpoint_dir: str | Path | None = None):
        self.checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir else None
        if self.checkpoint_dir:
            self.checkpoint_dir.mkdir(parents=True, exist_ok=True)
        self._states: dict[str, RunState] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    def _checkpoint_path(self, session_id: str) -> Path | None:
        if not self.checkpoint_dir:
            return None
        return self.checkpoint_dir / f"{session_id}.json"

    def create(self, state: RunState) -> str:
        session_id = uuid.uuid4().hex
        with self._registry_lock:
            self._states[session_id] = state
            self._locks[session_id] = threading.Lock()
        self.save(session_id)
        return session_id

    def lock(self, session_id: str) -> threading.Lock:
        with self._registry_lock:
            if session_id not in self._locks:
                self._locks[session_id] = threading.Lock()
            return self._locks[session_id]

    def get(self, session_id: str) -> RunState:
        with self._registry_lock:
            state = self._states.get(session_id)
        if state is not None:
            return state
        path = self._checkpoint_path(session_id)
        if path is not None and path.exists():
            state = RunState.from_checkpoint(json.loads(path.read_text(encoding="utf-8")))
            with self._registry_lock:
                self._states[session_id] = state
            return state
        raise KeyError(session_id)

    def save(self, session_id: str) -> None:
        path = self._checkpoint_path(session_id)
        if path is None:
            return
        state = self._states[session_id]
        path.write_text(json.dumps(state.to_checkpoint()), encoding="utf-8")


def _session_payload(session_id: str, state: RunState) -> dict:
    payload = {
        "id": session_id,
        "phase": state.phase,
        "interaction": state.next_interaction,
        "total_interactions": state.cfg.n_interactions,
        "n_potential_objectives": state.problem.m,
        "mask": state._mask_list(),
        "masks_history": [list(mk) for mk in state.masks_history],
        "interactions": [
            {
                "index": e["index"],
                "mask": e["mask"],
                "n_active": e["n_active"],
                "ranks": e["ranks"],
                "detection": e["detection"],
            }
            for e in state.interaction_records
        ],
        "final": None,
    }
    if state.phase == "finished":
        payload["final"] = {
            "x": state.final["x"],
            "objectives": state.final["objectives"],
            "mask": state.final["mask"],
        }
    return payload


def create_app(checkpoint_dir: str | Path | None = None,
               static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="hidopt session service")
    store = SessionStore(checkpoint_dir)
    app.state.store = store

    def get_state(session_id: str) -> RunState:
        try:
            return store.get(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown session") from None

    @app.post("/sessions", status_code=201)
    def create_session(request: CreateSessionRequest):
        data = dict(request.config)
        data.setdefault("dm", "human")
        data.setdefault("mode", "detection")
        if data.get("dm") != "human":
            raise HTTPException(status_code=400, detail="sessions are for a human DM")
        if data.get("mode") != "detection":
            raise HTTPException(status_code=400, detail="sessions run in detection mode")
        try:
            cfg = RunConfig.from_dict(data)
            state = RunState(cfg)
            state.start()
        except (ParameterError, ScheduleError, KeyError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        session_id = store.create(state)
        return _session_payload(session_id, state)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return _session_payload(session_id, get_state(session_id))

    @app.get("/sessions/{session_id}/candidates")
    def get_candidates(session_id: str):
        state = get_state(session_id)
        if state.phase != "awaiting_ranking":
            raise HTTPException(status_code=409, detail=f"session is {state.phase}")
        objectives = state.shown_objectives()
        return {
            "interaction": state.next_interaction,
            "mask": state._mask_list(),
            "candidates": [
                {"id": k, "objectives": [float(v) for v in row]}
                for k, row in enumerate(objectives)
            ],
        }

    @app.post("/sessions/{session_id}/ranking")
    def submit_ranking(session_id: str, request: RankingRequest):
        state = get_state(session_id)
        lock = store.lock(session_id)
        if not lock.acquire(blocking=False):
            raise HTTPException(status_code=409, detail="a submission is already in progress")
        try:
            if state.phase != "awaiting_ranking":
                raise HTTPException(status_code=409, detail=f"session is {state.phase}")
            if len(request.ranks) != state.cfg.n_examples:
                raise HTTPException(
                    status_code=422,
                    detail=f"expected {state.cfg.n_examples} ranks, got {len(request.ranks)}",
                )
            if any(r < 1 for r in request.ranks):
                raise HTTPException(status_code=422, detail="ranks must be positive integers")
            state.submit_ranking(request.ranks)
            store.save(session_id)
        finally:
            lock.release()
        return _session_payload(session_id, state)

    if static_dir:
        app.mount("/ui", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app

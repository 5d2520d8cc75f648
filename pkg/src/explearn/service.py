"""HTTP session service for live annotation: sessions are created from an
experiment config, queries are served with the prediction and explanation
attached, and feedback drives the next iteration.

State is an append-only JSON-lines event log per session; a restart replays
the log, so a session parked awaiting feedback survives the process.  All
endpoints are safe to retry: feedback is idempotent keyed by (session id,
iteration).
"""

from __future__ import annotations

import json
import threading
import uuid
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .config import (ConfigError, ExperimentConfig, build_annotator,
                     build_dataset, build_session_spec, parse_config)
from .core import DocumentPayload, ImagePayload, canonical_payload_dict
from .datasets.decoy import DecoyData
from .oracle import SimulatedAnnotator
from .seeding import rng_for
from .session import SessionEngine, StaleIteration


class SessionStoreError(RuntimeError):
    pass


def single_session_spec(cfg: ExperimentConfig):
    """The one deterministic (task, spec) a config denotes: the same split the
    in-process simulated run uses, so live and simulated histories can be
    compared verbatim."""
    task, data = build_dataset(cfg)
    if isinstance(data, DecoyData):
        train, test = data.train, data.confounded_test
    else:
        n = len(data)
        order = rng_for(cfg.seed, "kfold").permutation(n)
        cut = max(1, n // 5)
        test_idx = set(int(i) for i in order[:cut])
        test = [data[i] for i in sorted(test_idx)]
        train = [data[i] for i in range(n) if i not in test_idx]
    return task, build_session_spec(cfg, task, train, test, cfg.seed)


class SessionRuntime:
    """One live session: engine + oracle hints + append-only event log."""

    def __init__(self, session_id: str, raw_config: dict, log_path: Optional[Path]):
        self.session_id = session_id
        self.raw_config = raw_config
        self.config = parse_config(raw_config)
        self.task, spec = single_session_spec(self.config)
        self.engine = SessionEngine(spec)
        self.annotator: SimulatedAnnotator = build_annotator(self.task)
        self.applied: dict[int, dict] = {}
        self.lock = threading.Lock()
        self.log_path = log_path

    def _append_event(self, event: dict) -> None:
        if self.log_path is not None:
            with self.log_path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(event, sort_keys=True) + "\n")

    def persist_created(self) -> None:
        self._append_event({"type": "created", "session_id": self.session_id,
                            "config": self.raw_config})

    def apply(self, label: int, flagged: list[int], iteration: int,
              source: str = "human", persist: bool = True) -> dict:
        self.engine.apply_feedback(label, flagged, iteration=iteration, source=source)
        self.applied[iteration] = {"label": label, "flagged": sorted(flagged)}
        if persist:
            self._append_event({"type": "feedback", "iteration": iteration,
                                "label": label, "flagged": sorted(flagged),
                                "source": source})
        return {"status": "accepted", "iteration": iteration,
                "done": self.engine.done}


def _payload_view(task, payload) -> dict:
    view = canonical_payload_dict(payload)
    if isinstance(payload, DocumentPayload) and hasattr(task, "vocab"):
        view["words"] = [task.vocab[t] for t in payload.tokens]
    return view


def query_view(runtime: SessionRuntime) -> dict:
    engine = runtime.engine
    cfg = runtime.config
    base = {
        "session_id": runtime.session_id,
        "status": engine.status,
        "iteration_done": engine.t,
        "budget": engine.spec.budget,
        "class_names": list(getattr(runtime.task, "class_names", ())) or
                       [str(c) for c in range(runtime.task.n_classes)],
    }
    q = engine.current_query()
    if q is None:
        return {**base, "done": True}
    expl = q.explanation
    view = {
        **base,
        "done": False,
        "iteration": q.iteration,
        "burn_in": q.burn_in,
        "instance": {"id": str(q.instance.id),
                     "payload": _payload_view(runtime.task, q.instance.payload)},
        "predicted_label": q.predicted,
        "explanation": {
            "components": [[int(j), float(w)] for j, w in expl.components],
            "intercept": float(expl.intercept),
            "k": expl.k,
            "target_label": expl.target_label,
        },
    }
    if isinstance(q.instance.payload, ImagePayload):
        view["component_cells"] = {
            str(j): [int(c) for c in runtime.task.component_cells(j)]
            for j, _ in expl.components}
    elif hasattr(runtime.task, "vocab"):
        view["component_words"] = {str(j): runtime.task.vocab[j]
                                   for j, _ in expl.components}
    if cfg.session.oracle_hint:
        fb = runtime.annotator.respond(
            q.instance, q.predicted, expl,
            request_correction=cfg.session.corrections and not q.burn_in)
        view["oracle_hint"] = {"label": fb.label,
                               "flagged": sorted(fb.correction.indices)}
    return view


class SessionStore:
    def __init__(self, directory: Optional[str | Path]):
        self.directory = Path(directory) if directory else None
        self.sessions: dict[str, SessionRuntime] = {}
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
            self._load_existing()

    def _load_existing(self) -> None:
        for log in sorted(self.directory.glob("*.jsonl")):
            try:
                lines = [json.loads(line) for line in
                         log.read_text(encoding="utf-8").splitlines() if line.strip()]
                if not lines or lines[0].get("type") != "created":
                    raise ValueError("first event must be 'created'")
                created = lines[0]
                runtime = SessionRuntime(created["session_id"], created["config"],
                                         log_path=log)
                for event in lines[1:]:
                    if event.get("type") != "feedback":
                        raise ValueError(f"unknown event type {event.get('type')!r}")
                    runtime.apply(int(event["label"]),
                                  [int(j) for j in event["flagged"]],
                                  iteration=int(event["iteration"]),
                                  source=event.get("source", "human"),
                                  persist=False)
            except Exception as exc:
                raise SessionStoreError(
                    f"corrupt session store file {log}: {exc}") from exc
            self.sessions[runtime.session_id] = runtime

    def create(self, raw_config: dict) -> SessionRuntime:
        parse_config(raw_config)  # validate before allocating anything
        session_id = uuid.uuid4().hex[:12]
        log_path = (self.directory / f"{session_id}.jsonl"
                    if self.directory is not None else None)
        runtime = SessionRuntime(session_id, raw_config, log_path)
        runtime.persist_created()
        self.sessions[session_id] = runtime
        return runtime

    def get(self, session_id: str) -> SessionRuntime:
        if session_id not in self.sessions:
            raise KeyError(session_id)
        return self.sessions[session_id]


class CreateSessionRequest(BaseModel):
    config: dict


class FeedbackRequest(BaseModel):
    iteration: int
    label: int
    flagged: list[int] = Field(default_factory=list)


class SimulateRequest(BaseModel):
    config: dict


def _error(status: int, code: str, message: str, field: Optional[str] = None):
    return HTTPException(status_code=status,
                         detail={"code": code, "message": message, "field": field})


def create_app(store_dir: Optional[str | Path] = None) -> FastAPI:
    app = FastAPI(title="explearn session service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])
    store = SessionStore(store_dir)
    app.state.store = store

    @app.exception_handler(HTTPException)
    async def handle_http(request: Request, exc: HTTPException):
        detail = exc.detail if isinstance(exc.detail, dict) else {
            "code": "error", "message": str(exc.detail), "field": None}
        return JSONResponse(status_code=exc.status_code, content=detail)

    def _get_runtime(session_id: str) -> SessionRuntime:
        try:
            return store.get(session_id)
        except KeyError:
            raise _error(404, "no-such-session", f"unknown session {session_id}")

    @app.get("/sessions")
    def list_sessions():
        return {"sessions": [{
            "session_id": r.session_id,
            "status": r.engine.status,
            "iteration_done": r.engine.t,
            "budget": r.engine.spec.budget,
            "dataset": r.config.dataset.kind,
        } for r in store.sessions.values()]}

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionRequest):
        try:
            runtime = store.create(body.config)
        except ConfigError as exc:
            raise _error(422, "invalid-config", str(exc), exc.field)
        return {"session_id": runtime.session_id,
                "status": runtime.engine.status,
                "budget": runtime.engine.spec.budget}

    @app.get("/sessions/{session_id}/query")
    def get_query(session_id: str):
        runtime = _get_runtime(session_id)
        with runtime.lock:
            return query_view(runtime)

    @app.post("/sessions/{session_id}/feedback")
    def post_feedback(session_id: str, body: FeedbackRequest):
        runtime = _get_runtime(session_id)
        with runtime.lock:
            previous = runtime.applied.get(body.iteration)
            if previous is not None:
                if previous == {"label": body.label, "flagged": sorted(body.flagged)}:
                    return {"status": "already-applied", "iteration": body.iteration,
                            "done": runtime.engine.done}
                raise _error(409, "conflicting-feedback",
                             f"iteration {body.iteration} was answered differently")
            if runtime.engine.done:
                raise _error(409, "session-done", "the session has finished")
            try:
                return runtime.apply(body.label, body.flagged, body.iteration)
            except StaleIteration as exc:
                raise _error(409, "stale-iteration", str(exc), "iteration")
            except ValueError as exc:
                raise _error(400, "invalid-feedback", str(exc))

    @app.get("/sessions/{session_id}/metrics")
    def get_metrics(session_id: str):
        runtime = _get_runtime(session_id)
        return {"session_id": session_id,
                "status": runtime.engine.status,
                "history": [r.to_dict() for r in runtime.engine.history]}

    @app.post("/simulate")
    def simulate(body: SimulateRequest):
        try:
            cfg = parse_config(body.config)
            task, spec = single_session_spec(cfg)
        except ConfigError as exc:
            raise _error(422, "invalid-config", str(exc), exc.field)
        engine = SessionEngine(spec)
        engine.run_with_oracle(build_annotator(task))
        return {"status": engine.status,
                "history": [r.to_dict() for r in engine.history]}

    return app

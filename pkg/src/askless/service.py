"""HTTP facade over the dialog engine.

One process serves many concurrent interview sessions; each session's
requests are serialized behind a per-session lock.  State lives in memory
with JSONL write-through under a storage directory, so concluded (and
in-flight) sessions survive a restart: on boot every log is replayed and
the interview can continue where it stopped.

The wire format is small on purpose: a session is always in one of two
states, ``awaiting_answer`` (with the current question) or ``concluded``
(with per-opportunity decisions and the rationale derived from the rule
statements that actually executed).
"""

from __future__ import annotations

import os
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .dialog import (
    DialogEngine,
    Session,
    append_records,
    decisions_record,
    open_session,
    read_records,
    replay_session,
    turn_record,
)
from .gateway import Gateway, HttpProvider
from .rules import Decision, RuleProgram, describe_node, evaluate, load_corpus, pretty_print
from .store import FeatureSchema, load_corpus_schemas
from .synthesis import RequirementDoc, load_requirements

AWAITING = "awaiting_answer"
CONCLUDED = "concluded"

_PREDICTED_RATIONALE = (
    "Not enough answers were collected to run this rule; the decision was "
    "predicted from the conversation."
)


class ApiError(Exception):
    """An error with a wire representation: HTTP status plus {code, message}."""

    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def gateway_from_env(audit_path: str | Path | None = None) -> Gateway | None:
    """Build a provider-backed gateway from PROVIDER_BASE_URL /
    PROVIDER_API_KEY, or return None when no provider is configured."""
    if not os.environ.get("PROVIDER_BASE_URL"):
        return None
    return Gateway(HttpProvider(), audit_path=audit_path)


@dataclass
class SessionRuntime:
    session: Session
    checkers: dict[str, RuleProgram]
    log_path: Path | None
    lock: threading.Lock = field(default_factory=threading.Lock)


class DialogService:
    """The framework-free core: session lifecycle, persistence, rendering.

    The FastAPI layer in :func:`create_app` is a thin adapter over this, so
    tests can drive the service without a socket.
    """

    def __init__(
        self,
        rules_dir: str | Path,
        requirements_dir: str | Path | None = None,
        storage_dir: str | Path | None = None,
        gateway: Gateway | None = None,
        model: str = "default",
    ):
        self.checkers = load_corpus(rules_dir)
        if not self.checkers:
            raise ValueError(f"no .rule files under {rules_dir}")
        self.schemas = load_corpus_schemas(rules_dir)
        self.docs: dict[str, RequirementDoc] = {}
        if requirements_dir is not None and Path(requirements_dir).is_dir():
            self.docs = {
                doc.opportunity_id: doc for doc in load_requirements(requirements_dir)
            }
        self.engine = DialogEngine(gateway=gateway, docs=self.docs or None, model=model)
        self.storage_dir = Path(storage_dir) if storage_dir is not None else None
        self.sessions: dict[str, SessionRuntime] = {}
        self._registry_lock = threading.Lock()
        if self.storage_dir is not None:
            self.storage_dir.mkdir(parents=True, exist_ok=True)
            self._reload_from_storage()

    # --- persistence ---

    def _log_path(self, session_id: str) -> Path | None:
        if self.storage_dir is None:
            return None
        return self.storage_dir / f"{session_id}.jsonl"

    def _append(self, runtime: SessionRuntime, record: Mapping) -> None:
        if runtime.log_path is not None:
            append_records(runtime.log_path, [record])

    def _reload_from_storage(self) -> None:
        for path in sorted(self.storage_dir.glob("*.jsonl")):
            records = read_records(path)
            meta = next((r for r in records if r.get("type") == "session"), None)
            if meta is None:
                continue
            session_id = meta["session_id"]
            ids = [oid for oid in meta["opportunity_ids"] if oid in self.checkers]
            if len(ids) != len(meta["opportunity_ids"]):
                continue  # corpus changed under the log; skip rather than guess
            session = replay_session(
                session_id,
                records,
                [self.checkers[oid] for oid in ids],
                {oid: self.schemas[oid] for oid in ids},
            )
            runtime = SessionRuntime(
                session=session,
                checkers={oid: self.checkers[oid] for oid in ids},
                log_path=path,
            )
            # A log can end right after a stored answer; re-step so an
            # in-flight session is awaiting a concrete question again.
            if session.decisions is None and session.pending is None:
                self._advance(runtime)
            self.sessions[session_id] = runtime

    # --- lifecycle ---

    def _advance(self, runtime: SessionRuntime) -> None:
        """Run the engine one step; persist decisions if that concluded."""
        already_concluded = runtime.session.decisions is not None
        self.engine.step(runtime.session)
        if runtime.session.decisions is not None and not already_concluded:
            self._append(runtime, decisions_record(runtime.session))

    def create_session(self, opportunity_ids: list[str]) -> dict:
        if not opportunity_ids:
            raise ApiError(422, "empty_opportunities", "opportunity_ids must not be empty")
        unknown = [oid for oid in opportunity_ids if oid not in self.checkers]
        if unknown:
            raise ApiError(404, "unknown_opportunity", f"unknown opportunity: {unknown[0]}")
        if len(set(opportunity_ids)) != len(opportunity_ids):
            raise ApiError(422, "duplicate_opportunities", "opportunity_ids must be distinct")
        session_id = uuid.uuid4().hex
        session = open_session(
            [self.checkers[oid] for oid in opportunity_ids],
            {oid: self.schemas[oid] for oid in opportunity_ids},
            session_id=session_id,
        )
        runtime = SessionRuntime(
            session=session,
            checkers={oid: self.checkers[oid] for oid in opportunity_ids},
            log_path=self._log_path(session_id),
        )
        with self._registry_lock:
            self.sessions[session_id] = runtime
        with runtime.lock:
            self._append(
                runtime,
                {
                    "type": "session",
                    "session_id": session_id,
                    "opportunity_ids": sorted(opportunity_ids),
                },
            )
            self._advance(runtime)
            return self.render(runtime)

    def _runtime(self, session_id: str) -> SessionRuntime:
        with self._registry_lock:
            runtime = self.sessions.get(session_id)
        if runtime is None:
            raise ApiError(404, "unknown_session", f"unknown session: {session_id}")
        return runtime

    def post_answer(self, session_id: str, answer: str) -> dict:
        runtime = self._runtime(session_id)
        with runtime.lock:
            session = runtime.session
            if session.decisions is not None:
                raise ApiError(409, "session_concluded", "this session has concluded")
            turn = self.engine.ingest_answer(session, answer)
            self._append(runtime, turn_record(session, turn))
            if session.pending is None:
                self._advance(runtime)
            return self.render(runtime)

    def get_session(self, session_id: str) -> dict:
        runtime = self._runtime(session_id)
        with runtime.lock:
            return self.render(runtime)

    def list_opportunities(self) -> list[dict]:
        listing = []
        for oid in sorted(self.checkers):
            doc = self.docs.get(oid)
            listing.append(
                {
                    "opportunity_id": oid,
                    "title": doc.title if doc is not None else oid,
                    "requirements": (
                        doc.body if doc is not None else pretty_print(self.checkers[oid])
                    ),
                }
            )
        return listing

    # --- rendering ---

    def _rationale(self, runtime: SessionRuntime, oid: str) -> tuple[list[str], bool]:
        """Re-run the checker over the session store: a real decision yields
        the executed statements as rationale lines; a still-missing feature
        means the decision came from the fallback predictor."""
        program = runtime.checkers[oid]
        outcome = evaluate(program, runtime.session.store)
        if isinstance(outcome, Decision):
            lines = [describe_node(program, nid) for nid in sorted(outcome.trace.executed)]
            return lines, False
        return [_PREDICTED_RATIONALE], True

    def render(self, runtime: SessionRuntime) -> dict:
        session = runtime.session
        payload = {
            "session_id": session.session_id,
            "turns_used": session.budget.used,
            "max_turns": session.budget.max_turns,
        }
        if session.decisions is not None:
            decisions = {}
            for oid in sorted(session.decisions):
                rationale, predicted = self._rationale(runtime, oid)
                decisions[oid] = {
                    "eligible": session.decisions[oid],
                    "rationale": rationale,
                    "predicted": predicted,
                }
            payload["state"] = CONCLUDED
            payload["decisions"] = decisions
            payload["fallback_warning"] = session.fallback_warning
        else:
            payload["state"] = AWAITING
            payload["current_question"] = session.pending.question if session.pending else None
        return payload


class CreateSessionBody(BaseModel):
    opportunity_ids: list[str]


class AnswerBody(BaseModel):
    answer: str


def create_app(service: DialogService):
    """Wrap a DialogService in the documented HTTP surface."""
    app = FastAPI(title="askless", docs_url=None, redoc_url=None)
    app.state.service = service
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(ApiError)
    async def api_error_handler(_: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status, content={"code": exc.code, "message": exc.message}
        )

    @app.exception_handler(RequestValidationError)
    async def validation_handler(_: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=422, content={"code": "invalid_request", "message": str(exc)}
        )

    @app.post("/v1/sessions")
    def create_session(body: CreateSessionBody):
        return service.create_session(body.opportunity_ids)

    @app.post("/v1/sessions/{session_id}/answers")
    def post_answer(session_id: str, body: AnswerBody):
        return service.post_answer(session_id, body.answer)

    @app.get("/v1/sessions/{session_id}")
    def get_session(session_id: str):
        return service.get_session(session_id)

    @app.get("/v1/opportunities")
    def list_opportunities():
        return service.list_opportunities()

    return app

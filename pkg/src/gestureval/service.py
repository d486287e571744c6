"""HTTP evaluation service: session scheduling, blinded page serving,
durable vote collection, and on-demand reports.

Persistence is an append-only vote log per study (flushed and fsynced
before any acknowledgment) plus an atomically replaced session snapshot.
Reports are recomputed from the log on every request, so analytics never
mutate state and always agree with the offline command-line path.
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response as HttpResponse

from .domain import (
    DomainValidationError,
    INTRO_TEXT,
    JUICE_OPTIONS,
    JUICE_PROMPT,
    MAX_SESSION_PAGES,
    QUESTION_TEXT,
    RESPONSE_LABELS,
    RESPONSE_ORDER,
    Response as VoteResponse,
    SessionState,
    StudyKind,
    StudyPlan,
    blinded_page_payload,
    canonical_json,
    parse_attention_outcomes,
    parse_votes,
    serialize_log_entries,
)
from .analysis import appropriateness_report, build_task_index, juice_profile, leaderboard_report
from .juice import profile_rows
from .stats import ComputationError
from .study import (
    AlreadyAnsweredError,
    RepeatTakerError,
    SessionClosedError,
    StudyScheduler,
    record_response,
)


@dataclass(frozen=True)
class ServiceConfig:
    data_dir: Path
    rng_seed: int = 0
    session_length: int = MAX_SESSION_PAGES

    def __post_init__(self):
        object.__setattr__(self, "data_dir", Path(self.data_dir))
        if not 5 <= self.session_length <= MAX_SESSION_PAGES:
            raise DomainValidationError(
                "config.session_length", f"must be in 5..{MAX_SESSION_PAGES}"
            )


class NotFoundError(KeyError):
    pass


@dataclass
class StudyState:
    study_id: str
    plan: StudyPlan
    scheduler: StudyScheduler
    directory: Path
    vote_keys: set[tuple[str, int]] = field(default_factory=set)
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def log_path(self) -> Path:
        return self.directory / "votes.log"

    @property
    def sessions_path(self) -> Path:
        return self.directory / "sessions.json"

    @property
    def plan_path(self) -> Path:
        return self.directory / "plan.json"


class ServiceEngine:
    """Owns all study state; one mutation lock per study."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.studies: dict[str, StudyState] = {}
        self._session_owner: dict[str, str] = {}
        self._registry_lock = threading.Lock()
        self.config.data_dir.mkdir(parents=True, exist_ok=True)
        self._load_existing()

    # -- persistence ------------------------------------------------------

    def _studies_dir(self) -> Path:
        return self.config.data_dir / "studies"

    def _load_existing(self) -> None:
        root = self._studies_dir()
        if not root.is_dir():
            return
        for directory in sorted(root.iterdir()):
            plan_path = directory / "plan.json"
            if not plan_path.is_file():
                continue
            plan = StudyPlan.from_dict(json.loads(plan_path.read_text()))
            state = self._attach_study(directory.name, plan, directory)
            sessions_path = state.sessions_path
            if sessions_path.is_file():
                doc = json.loads(sessions_path.read_text())
                state.scheduler.restore(
                    SessionState.from_dict(s) for s in doc.get("sessions", ())
                )
                for sid in state.scheduler.sessions:
                    self._session_owner[sid] = state.study_id
            if state.log_path.is_file():
                for vote in parse_votes(state.log_path.read_text(), check_unique=True):
                    state.vote_keys.add((vote.session_id, vote.page_index))

    def _attach_study(self, study_id: str, plan: StudyPlan, directory: Path) -> StudyState:
        scheduler = StudyScheduler(
            plan, seed=self.config.rng_seed, n_pages=self.config.session_length
        )
        state = StudyState(
            study_id=study_id, plan=plan, scheduler=scheduler, directory=directory
        )
        self.studies[study_id] = state
        return state

    def _snapshot_sessions(self, state: StudyState) -> None:
        doc = {"sessions": [s.to_dict() for s in state.scheduler.sessions.values()]}
        tmp = state.sessions_path.with_suffix(".json.tmp")
        tmp.write_text(canonical_json(doc))
        os.replace(tmp, state.sessions_path)

    def _append_log(self, state: StudyState, text: str) -> None:
        with open(state.log_path, "a", encoding="utf-8") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())

    # -- operations --------------------------------------------------------

    def create_study(self, doc: dict) -> str:
        plan = StudyPlan.from_dict(doc)
        study_id = plan.study_id or f"study-{uuid.uuid4().hex[:8]}"
        with self._registry_lock:
            if study_id in self.studies:
                raise AlreadyAnsweredError(f"study {study_id!r} already exists")
            directory = self._studies_dir() / study_id
            directory.mkdir(parents=True, exist_ok=True)
            state = self._attach_study(study_id, plan, directory)
            state.plan_path.write_text(canonical_json(plan.to_dict()))
        return study_id

    def get_study(self, study_id: str) -> StudyState:
        state = self.studies.get(study_id)
        if state is None:
            raise NotFoundError(f"unknown study {study_id!r}")
        return state

    def find_session(self, session_id: str) -> tuple[StudyState, SessionState]:
        study_id = self._session_owner.get(session_id)
        if study_id is None:
            raise NotFoundError(f"unknown session {session_id!r}")
        state = self.get_study(study_id)
        return state, state.scheduler.sessions[session_id]

    def new_session(self, study_id: str, taker_id: str) -> SessionState:
        state = self.get_study(study_id)
        with state.lock:
            session = state.scheduler.new_session(taker_id)
            self._session_owner[session.session_id] = study_id
            self._snapshot_sessions(state)
        return session

    def record(
        self,
        session_id: str,
        page_index: int,
        response: Optional[VoteResponse],
        juice_options: tuple[str, ...],
        juice_other_text: Optional[str],
        skip: bool,
    ) -> SessionState:
        state, session = self.find_session(session_id)
        with state.lock:
            session = state.scheduler.sessions[session_id]
            updated, record = record_response(
                session,
                page_index,
                response=response,
                juice_options=juice_options,
                juice_other_text=juice_other_text,
                timestamp=time.time(),
                skip=skip,
            )
            if record is not None:
                self._append_log(state, serialize_log_entries([record]))
            state.scheduler.sessions[session_id] = updated
            state.vote_keys.add((session_id, page_index))
            self._snapshot_sessions(state)
        return updated

    def ingest_bulk(self, study_id: str, text: str) -> dict:
        state = self.get_study(study_id)
        votes = parse_votes(text, check_unique=True)
        attention = parse_attention_outcomes(text)
        tasks = build_task_index(state.plan, state.scheduler.sessions)
        for v in votes:
            if v.task_id not in tasks:
                raise DomainValidationError(
                    f"vote[{v.session_id}/{v.page_index}].task_id",
                    f"unknown task {v.task_id!r}",
                )
        with state.lock:
            clash = [k for k in ((v.session_id, v.page_index) for v in votes)
                     if k in state.vote_keys]
            if clash:
                raise AlreadyAnsweredError(
                    f"log already holds records for (session, page) {clash[:5]}"
                )
            lines = serialize_log_entries([*votes, *attention])
            self._append_log(state, lines)
            state.vote_keys.update((v.session_id, v.page_index) for v in votes)
        return {"votes": len(votes), "attention_outcomes": len(attention)}

    def read_log(self, state: StudyState) -> str:
        if not state.log_path.is_file():
            return ""
        return state.log_path.read_text()


def _session_summary(session: SessionState) -> dict:
    return {
        "session_id": session.session_id,
        "study_kind": session.study_kind.value,
        "n_pages": session.n_pages,
        "status": session.status.value,
        "skips_used": session.skips_used,
        "answered_pages": sorted(session.answered_pages),
        "completed": len(session.answered_pages) == session.n_pages,
        "intro_text": INTRO_TEXT[session.study_kind],
        "question": QUESTION_TEXT[session.study_kind],
        "response_options": [RESPONSE_LABELS[r] for r in RESPONSE_ORDER],
        "response_values": [r.value for r in RESPONSE_ORDER],
        "juice_prompt": JUICE_PROMPT,
        "juice_options": [
            {"key": k, "label": v} for k, v in JUICE_OPTIONS[session.study_kind].items()
        ],
    }


def create_app(config: ServiceConfig) -> FastAPI:
    """Application factory; all state hangs off the engine."""
    engine = ServiceEngine(config)
    app = FastAPI(title="gestureval", docs_url=None, redoc_url=None)
    app.state.engine = engine

    @app.exception_handler(DomainValidationError)
    async def _validation_handler(request: Request, exc: DomainValidationError):
        return JSONResponse(
            status_code=422, content={"detail": str(exc), "field": exc.field_path}
        )

    @app.exception_handler(NotFoundError)
    async def _notfound_handler(request: Request, exc: NotFoundError):
        return JSONResponse(status_code=404, content={"detail": str(exc.args[0])})

    @app.exception_handler(ComputationError)
    async def _conflict_handler(request: Request, exc: ComputationError):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.post("/studies")
    async def create_study(request: Request):
        doc = await _json_body(request)
        study_id = engine.create_study(doc)
        return {"study_id": study_id}

    @app.get("/studies")
    async def list_studies():
        return {
            "studies": [
                {
                    "study_id": s.study_id,
                    "study_kind": s.plan.study_kind.value,
                    "n_tasks": len(s.plan.tasks),
                    "n_sessions": len(s.scheduler.sessions),
                }
                for s in engine.studies.values()
            ]
        }

    @app.get("/sessions/next")
    async def next_session(taker: str, study: str):
        session = engine.new_session(study, taker)
        return _session_summary(session)

    @app.get("/sessions/{session_id}")
    async def get_session(session_id: str):
        _, session = engine.find_session(session_id)
        return _session_summary(session)

    @app.get("/sessions/{session_id}/pages/{page_index}")
    async def get_page(session_id: str, page_index: int):
        _, session = engine.find_session(session_id)
        if not 1 <= page_index <= session.n_pages:
            raise NotFoundError(
                f"session {session_id!r} has no page {page_index}"
            )
        task = session.page(page_index)
        return blinded_page_payload(task, page_index, session.n_pages)

    @app.post("/sessions/{session_id}/pages/{page_index}")
    async def post_page(session_id: str, page_index: int, request: Request):
        doc = await _json_body(request)
        skip = bool(doc.get("skipped", False))
        raw = doc.get("response")
        response = None
        if raw is not None:
            try:
                response = VoteResponse(raw)
            except ValueError:
                raise DomainValidationError(
                    "response", f"expected one of {[r.value for r in RESPONSE_ORDER]}"
                )
        juice = doc.get("juice_options", [])
        if not isinstance(juice, list) or not all(isinstance(j, str) for j in juice):
            raise DomainValidationError("juice_options", "must be a list of option keys")
        other = doc.get("juice_other_text")
        if other is not None and not isinstance(other, str):
            raise DomainValidationError("juice_other_text", "must be a string")
        updated = engine.record(
            session_id, page_index, response, tuple(juice), other, skip
        )
        return {
            "session_id": updated.session_id,
            "status": updated.status.value,
            "skips_used": updated.skips_used,
            "needs_review": updated.needs_review,
            "completed": len(updated.answered_pages) == updated.n_pages,
        }

    @app.post("/studies/{study_id}/votes")
    async def bulk_votes(study_id: str, request: Request):
        text = (await request.body()).decode("utf-8")
        return engine.ingest_bulk(study_id, text)

    @app.get("/studies/{study_id}/leaderboard")
    async def leaderboard(
        study_id: str,
        seed: Optional[int] = None,
        n_bootstrap: Optional[int] = None,
        alpha: float = 0.05,
        unit: str = "battle",
    ):
        state = engine.get_study(study_id)
        report = leaderboard_report(
            state.plan,
            engine.read_log(state),
            state.scheduler.sessions,
            seed=seed,
            n_bootstrap=n_bootstrap,
            alpha=alpha,
            resample_unit=unit,
        )
        return HttpResponse(content=report.to_json(), media_type="application/json")

    @app.get("/studies/{study_id}/appropriateness")
    async def appropriateness(
        study_id: str,
        seed: Optional[int] = None,
        n_bootstrap: Optional[int] = None,
        alpha: float = 0.05,
    ):
        state = engine.get_study(study_id)
        report = appropriateness_report(
            state.plan,
            engine.read_log(state),
            state.scheduler.sessions,
            seed=seed,
            n_bootstrap=n_bootstrap,
            alpha=alpha,
        )
        return HttpResponse(content=report.to_json(), media_type="application/json")

    @app.get("/studies/{study_id}/juice")
    async def juice(
        study_id: str,
        condition: str,
        opponent: Optional[str] = None,
        normalization: str = "comparisons",
    ):
        state = engine.get_study(study_id)
        profile = juice_profile(
            state.plan,
            engine.read_log(state),
            condition,
            state.scheduler.sessions,
            opponent_filter=opponent,
            normalization=normalization,
        )
        return {"profile": profile.to_dict(), "rows": profile_rows(profile)}

    return app


async def _json_body(request: Request) -> dict:
    try:
        doc = json.loads(await request.body())
    except json.JSONDecodeError as exc:
        raise DomainValidationError("body", f"not valid JSON: {exc}")
    if not isinstance(doc, dict):
        raise DomainValidationError("body", "expected a JSON object")
    return doc


__all__ = ["ServiceConfig", "ServiceEngine", "create_app"]

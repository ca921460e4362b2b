"""HTTP session service: live classroom sessions, an event feed per session,
one optional human student seat, and post-session ratings.

The human seat is just another cohort member whose backend blocks on the
submit endpoint instead of a model; the orchestrator cannot tell the
difference.  Clients render exclusively from the per-session event feed,
which is filtered to the human-visible information set and re-indexed so
cursors stay gapless.
"""

from __future__ import annotations

import json
import threading
import uuid
from pathlib import Path
from typing import Any, Optional

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .config import AppConfig, load_case_bundle, resolve_backend
from .gateway import AgentRequest, Gateway, Role
from .models import (
    KnowledgeLevel,
    KnowledgeProfile,
    PersonalityProfile,
    StudentProfile,
    canonical_json,
    canonical_jsonl_line,
)
from .orchestrator import Event, Phase, Session, SessionConfig
from .stores import load_persona_store

_MESSAGE_EVENT_TYPES = {
    "patient_statement",
    "patient_response",
    "guidance",
    "analysis",
    "action",
    "expert_answer",
}


class HumanStudentBackend:
    """Backend whose replies come from the submit endpoint.

    ``complete`` blocks the session thread until the human submits (or the
    timeout elapses, which produces a silent turn so the class moves on).
    """

    def __init__(self, student_id: str, timeout_s: float = 600.0, on_event=None):
        self.student_id = student_id
        self.timeout_s = timeout_s
        self.on_event = on_event
        self._cond = threading.Condition()
        self._pending: dict[str, dict] = {}

    @staticmethod
    def _kind_for(request: AgentRequest) -> str:
        if request.role == Role.STUDENT_ANALYSIS.value:
            return "analysis"
        if request.role == Role.STUDENT_ACTION.value:
            return "action"
        raise ValueError(f"human seat cannot play role {request.role}")

    def submit(self, kind: str, payload: dict) -> None:
        with self._cond:
            self._pending[kind] = payload
            self._cond.notify_all()

    def complete(self, request: AgentRequest) -> str:
        kind = self._kind_for(request)
        if self.on_event:
            self.on_event("awaiting_human", request.round_index or 0,
                          {"kind": kind, "student_id": self.student_id})
        with self._cond:
            ok = self._cond.wait_for(lambda: kind in self._pending, timeout=self.timeout_s)
            payload = self._pending.pop(kind, None) if ok else None
        if payload is None:
            if self.on_event:
                self.on_event("human_timeout", request.round_index or 0,
                              {"kind": kind, "student_id": self.student_id})
            if kind == "analysis":
                return json.dumps({"analysis_for_teacher": ""})
            return json.dumps({"query_for_patient": None, "query_for_expert": None})
        if kind == "analysis":
            return json.dumps({"analysis_for_teacher": payload.get("analysis", "")})
        return json.dumps(
            {
                "query_for_patient": payload.get("query_for_patient"),
                "query_for_expert": payload.get("query_for_expert"),
            }
        )


class SessionEntry:
    """Book-keeping for one live session."""

    def __init__(self, session: Session, human: Optional[HumanStudentBackend]):
        self.session = session
        self.human = human
        self.public_events: list[dict] = []
        self.cond = threading.Condition()
        self.submitted: set[tuple[int, str]] = set()
        self.ratings: Optional[dict] = None
        self.error: Optional[str] = None
        self.thread: Optional[threading.Thread] = None


class SessionManager:
    def __init__(self, config: AppConfig):
        self.config = config
        self.store = load_persona_store(config.personas, config.students)
        self.backends = {
            role: resolve_backend(spec, config) for role, spec in config.role_bindings.items()
        }
        self.sessions: dict[str, SessionEntry] = {}
        self._lock = threading.Lock()
        self.out_dir = Path(config.out_dir)

    # -- event plumbing ------------------------------------------------------

    def _publish(self, entry: SessionEntry, type_: str, round_: int, payload: dict) -> None:
        visible = self._filter_payload(entry, type_, payload)
        if visible is None:
            return
        with entry.cond:
            entry.public_events.append(
                {"index": len(entry.public_events), "type": type_, "round": round_, "payload": visible}
            )
            entry.cond.notify_all()

    def _filter_payload(self, entry: SessionEntry, type_: str, payload: dict) -> Optional[dict]:
        human_id = entry.human.student_id if entry.human else None
        open_room = self.config.classroom_open
        if type_ in ("analysis", "action"):
            if open_room or (human_id and payload.get("student_id") == human_id):
                return payload
            return None
        if type_ == "expert_answer":
            if open_room or (human_id and payload.get("student_id") == human_id):
                return payload
            return None
        if type_ == "guidance" and not self.config.research_mode:
            return {k: v for k, v in payload.items() if k != "internal_monologue"}
        if type_ == "review" and not self.config.research_mode:
            return None
        return payload

    # -- lifecycle -----------------------------------------------------------

    def create_session(
        self,
        case_id: str,
        n_students: int,
        human_slot: bool,
        human_name: str = "You",
        max_rounds: int = 2,
        review_max_retries: int = 3,
        seed: int = 0,
    ) -> SessionEntry:
        case, script = load_case_bundle(self.config.cases_dir, case_id)
        session_id = f"{case_id}-{uuid.uuid4().hex[:8]}"
        config = SessionConfig(
            case_id=case_id,
            n_students=n_students,
            max_rounds=max_rounds,
            review_max_retries=review_max_retries,
            rng_seed=seed,
            session_id=session_id,
            classroom_open=self.config.classroom_open,
        )

        entry_box: list[SessionEntry] = []

        def sink(event: Event) -> None:
            if entry_box:
                self._publish(entry_box[0], event.type, event.round, dict(event.payload))

        human = None
        extra = None
        student_backends = None
        if human_slot:
            human = HumanStudentBackend(
                human_name,
                self.config.human_timeout_s,
                on_event=lambda t, r, p: entry_box and self._publish(entry_box[0], t, r, p),
            )
            extra = [
                StudentProfile(
                    student_id=human_name,
                    knowledge_profile=KnowledgeProfile(level=KnowledgeLevel.INTERMEDIATE),
                    personality_profile=PersonalityProfile(
                        archetype="Human participant", description="Live human student seat."
                    ),
                )
            ]
            student_backends = {human_name: human}

        session = Session(
            config,
            case,
            script,
            self.store,
            dict(self.backends),
            student_backends=student_backends,
            extra_students=extra,
            gateway=Gateway(max_in_flight=self.config.max_in_flight),
            event_sink=sink,
        )
        entry = SessionEntry(session, human)
        entry_box.append(entry)
        # replay events emitted during construction into the public feed
        for event in session.events:
            self._publish(entry, event.type, event.round, dict(event.payload))

        with self._lock:
            self.sessions[session_id] = entry

        def run() -> None:
            try:
                transcript = session.run()
                self._persist_transcript(transcript)
            except Exception as exc:  # session thread must never die silently
                entry.error = str(exc)
                self._publish(entry, "session_aborted", session.current_round, {"error": str(exc)})

        entry.thread = threading.Thread(target=run, name=f"session-{session_id}", daemon=True)
        entry.thread.start()
        return entry

    def _persist_transcript(self, transcript) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / f"{transcript.session_id}.transcript.json"
        path.write_text(canonical_json(transcript.model_dump(mode="json")), encoding="utf-8")

    def get(self, session_id: str) -> SessionEntry:
        entry = self.sessions.get(session_id)
        if entry is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return entry


# ---------------------------------------------------------------------------
# HTTP layer
# ---------------------------------------------------------------------------


class CreateSessionBody(BaseModel):
    case_id: str
    n_students: int = Field(default=2, ge=1, description="simulated cohort size")
    human_slot: bool = False
    human_name: str = "You"
    max_rounds: int = Field(default=2, ge=1)
    review_max_retries: int = Field(default=3, ge=0)
    seed: int = 0


class TurnBody(BaseModel):
    analysis: Optional[str] = None
    query_for_patient: Optional[str] = None
    query_for_expert: Optional[str] = None


class RatingsBody(BaseModel):
    IQ: int = Field(ge=1, le=10)
    IE: int = Field(ge=1, le=10)
    OR: int = Field(ge=1, le=10)


def create_app(config: AppConfig, manager: Optional[SessionManager] = None) -> FastAPI:
    app = FastAPI(title="wardsim session service")
    # the browser client is typically served from another origin (or file://)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    mgr = manager or SessionManager(config)
    app.state.manager = mgr

    def state_view(entry: SessionEntry) -> dict[str, Any]:
        session = entry.session
        with entry.cond:
            messages = [e for e in entry.public_events if e["type"] in _MESSAGE_EVENT_TYPES]
        return {
            "session_id": session.session_id,
            "case_id": session.case.case_id,
            "phase": session.phase.value,
            "current_round": session.current_round,
            "cohort": session.cohort_ids,
            "human_student": entry.human.student_id if entry.human else None,
            "max_rounds": session.config.max_rounds,
            "visible_messages": messages,
            "error": entry.error,
            "ratings_recorded": entry.ratings is not None,
        }

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody) -> dict[str, Any]:
        from .errors import CohortTooLarge, InvalidCase, NoCompatiblePersona

        try:
            entry = mgr.create_session(
                body.case_id,
                body.n_students,
                body.human_slot,
                human_name=body.human_name,
                max_rounds=body.max_rounds,
                review_max_retries=body.review_max_retries,
                seed=body.seed,
            )
        except FileNotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except (InvalidCase, NoCompatiblePersona, CohortTooLarge, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return state_view(entry)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> dict[str, Any]:
        return state_view(mgr.get(session_id))

    @app.post("/sessions/{session_id}/turn")
    def submit_turn(session_id: str, body: TurnBody) -> dict[str, Any]:
        entry = mgr.get(session_id)
        if entry.human is None:
            raise HTTPException(status_code=409, detail="session has no human seat")
        session = entry.session
        provided = body.model_fields_set
        if "analysis" in provided:
            kind = "analysis"
            if not (body.analysis or "").strip():
                raise HTTPException(status_code=422, detail="analysis must be non-empty")
            if session.phase != Phase.STUDENT_ANALYSIS:
                raise HTTPException(status_code=409, detail=f"not accepting analyses in phase {session.phase.value}")
            payload = {"analysis": body.analysis}
        elif provided & {"query_for_patient", "query_for_expert"}:
            kind = "action"
            if session.phase != Phase.QUERY_EXPLORATION:
                raise HTTPException(status_code=409, detail=f"not accepting queries in phase {session.phase.value}")
            payload = {
                "query_for_patient": body.query_for_patient,
                "query_for_expert": body.query_for_expert,
            }
        else:
            raise HTTPException(status_code=422, detail="submit analysis or query fields")
        key = (session.current_round, kind)
        if key in entry.submitted:
            raise HTTPException(status_code=409, detail=f"{kind} already submitted this round")
        entry.submitted.add(key)
        entry.human.submit(kind, payload)
        return {"accepted": True, "round": session.current_round, "kind": kind}

    @app.get("/sessions/{session_id}/events")
    def get_events(session_id: str, after: int = -1, wait_s: float = 0.0) -> dict[str, Any]:
        entry = mgr.get(session_id)
        wait_s = max(0.0, min(wait_s, 30.0))
        with entry.cond:
            if wait_s > 0:
                entry.cond.wait_for(
                    lambda: entry.public_events and entry.public_events[-1]["index"] > after,
                    timeout=wait_s,
                )
            events = [e for e in entry.public_events if e["index"] > after]
            next_cursor = entry.public_events[-1]["index"] if entry.public_events else after
        return {"events": events, "next_cursor": next_cursor}

    @app.post("/sessions/{session_id}/ratings")
    def submit_ratings(session_id: str, body: RatingsBody) -> dict[str, Any]:
        entry = mgr.get(session_id)
        if entry.ratings is not None:
            raise HTTPException(
                status_code=409,
                detail={"message": "ratings already recorded", "ratings": entry.ratings},
            )
        entry.ratings = {"IQ": body.IQ, "IE": body.IE, "OR": body.OR}
        mgr.out_dir.mkdir(parents=True, exist_ok=True)
        with open(mgr.out_dir / "ratings.jsonl", "a", encoding="utf-8") as fh:
            fh.write(canonical_jsonl_line({"session_id": session_id, **entry.ratings}))
        mgr._publish(entry, "rating_recorded", entry.session.current_round, dict(entry.ratings))
        return {"recorded": True, "ratings": entry.ratings}

    return app

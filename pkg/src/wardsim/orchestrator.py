"""Session engine: initialization, the three-phase round loop, and the
guide-review-revise quality gate around every tutor turn.

Round structure: (1) every student independently analyzes the patient's
latest statement, in a seed-derived random order, and the analyses go only to
the tutor; (2) the tutor drafts guidance that both the fact-check specialist
and the safety reviewer must accept, with bounded revision retries; (3) each
student may query the expert (answered immediately, privately) and/or the
patient (queries are batched into a single synthesized patient reply that
closes the round).
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import random
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from typing import Any, Callable, Optional

from pydantic import BaseModel, ConfigDict, Field

from . import prompts
from .errors import InvalidCase, MalformedReply
from .gateway import (
    BackendHandle,
    ExchangeRecorder,
    Gateway,
    Role,
    TutorGuidanceReply,
)
from .models import (
    CaseRecord,
    ExpertAnswerEntry,
    PatientPersona,
    PatientScript,
    ReviewVerdict,
    RoundRecord,
    StudentActionEntry,
    StudentAnalysisEntry,
    StudentProfile,
    Transcript,
    TutorTurn,
    validate_case,
)
from .monologue import parse_monologue
from .stores import PersonaStore, match_persona, sample_cohort


class Phase(str, Enum):
    INIT = "Init"
    STUDENT_ANALYSIS = "StudentAnalysis"
    TUTOR_REVIEW = "TutorReview"
    QUERY_EXPLORATION = "QueryExploration"
    COMPLETED = "Completed"
    ABORTED = "Aborted"


class SessionConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    case_id: str
    n_students: int = Field(ge=1)
    max_rounds: int = Field(default=2, ge=1)
    review_max_retries: int = Field(default=3, ge=0)
    rng_seed: int = 0
    strict_persona_match: bool = True
    history_char_budget: int = 60000
    include_exploration_in_history: bool = True
    classroom_open: bool = False
    parallel_agents: bool = False
    backends: dict[str, str] = Field(default_factory=dict)
    session_id: str = ""


class Event(BaseModel):
    """One entry of the per-session event feed (indices are gapless)."""

    model_config = ConfigDict(frozen=True)

    index: int
    type: str
    round: int
    payload: dict[str, Any] = Field(default_factory=dict)


class SessionState(BaseModel):
    model_config = ConfigDict(frozen=True)

    phase: Phase
    current_round: int


def derive_seed(base: int, label: str) -> int:
    """Stable integer sub-seed for one named random stream."""
    digest = hashlib.sha256(f"{base}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def _utc_now_iso() -> str:
    return _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


class Session:
    """One live teaching session; owns its transcript, history, and events."""

    def __init__(
        self,
        config: SessionConfig,
        case: CaseRecord,
        script: PatientScript,
        store: PersonaStore,
        backends: dict[str, BackendHandle],
        *,
        student_backends: Optional[dict[str, BackendHandle]] = None,
        extra_students: Optional[list[StudentProfile]] = None,
        gateway: Optional[Gateway] = None,
        recorder: Optional[ExchangeRecorder] = None,
        clock: Optional[Callable[[], str]] = None,
        event_sink: Optional[Callable[[Event], None]] = None,
    ):
        report = validate_case(case)
        if not report.ok:
            raise InvalidCase("; ".join(report.violations))

        self.config = config
        self.case = case
        self.script = script
        self.backends = {str(k): v for k, v in backends.items()}
        self.student_backends = {str(k): v for k, v in (student_backends or {}).items()}
        self.recorder = recorder
        self.gateway = gateway or Gateway(recorder=recorder)
        self._clock = clock or _utc_now_iso
        self._event_sink = event_sink

        self.session_id = config.session_id or f"{case.case_id}-seed{config.rng_seed}"
        match = match_persona(
            store,
            script,
            derive_seed(config.rng_seed, f"persona:{self.session_id}"),
            allow_fallback=not config.strict_persona_match,
        )
        self.persona: PatientPersona = match.persona
        self.cohort: list[StudentProfile] = sample_cohort(
            store, config.n_students, derive_seed(config.rng_seed, f"cohort:{self.session_id}")
        )
        if extra_students:
            self.cohort = self.cohort + list(extra_students)
        ids = [s.student_id for s in self.cohort]
        if len(ids) != len(set(ids)):
            raise ValueError(f"cohort student ids collide: {ids}")

        self.flags: list[str] = []
        if match.fallback_used:
            self.flags.append("persona_fallback")

        self.rounds: list[RoundRecord] = []
        self.created_at = self._clock()
        self._history: list[dict[str, Any]] = []
        self._events: list[Event] = []
        self._seq = 0

        self.phase = Phase.STUDENT_ANALYSIS
        self.current_round = 1
        self._current_statement = script.initial_statement()

        self._emit("session_created", 0, {
            "session_id": self.session_id,
            "case_id": case.case_id,
            "persona_id": self.persona.persona_id,
            "cohort": self.cohort_ids,
        })
        self._push_history(0, "patient", "patient_statement", self._current_statement)
        self._emit("patient_statement", 1, {"text": self._current_statement})
        self._emit("phase", 1, {"phase": Phase.STUDENT_ANALYSIS.value})

    # -- plumbing -----------------------------------------------------------

    @property
    def cohort_ids(self) -> list[str]:
        return [s.student_id for s in self.cohort]

    @property
    def state(self) -> SessionState:
        return SessionState(phase=self.phase, current_round=self.current_round)

    @property
    def events(self) -> list[Event]:
        return list(self._events)

    def _emit(self, type_: str, round_: int, payload: dict[str, Any]) -> None:
        event = Event(index=len(self._events), type=type_, round=round_, payload=payload)
        self._events.append(event)
        if self._event_sink is not None:
            self._event_sink(event)

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def _push_history(self, round_: int, speaker: str, kind: str, text: str,
                      student_id: Optional[str] = None) -> None:
        entry: dict[str, Any] = {"round": round_, "speaker": speaker, "kind": kind, "text": text}
        if student_id is not None:
            entry["student_id"] = student_id
        self._history.append(entry)

    def _backend(self, role: Role, student_id: Optional[str] = None) -> BackendHandle:
        if student_id is not None and student_id in self.student_backends:
            return self.student_backends[student_id]
        handle = self.backends.get(role.value) or self.backends.get("*")
        if handle is None:
            raise KeyError(f"no backend bound for role {role.value}")
        return handle

    def _attachments(self) -> list[str]:
        return [ref.locator or ref.id for ref in self.case.image_refs]

    @property
    def image_present(self) -> bool:
        return bool(self.case.image_refs)

    # -- context assembly ---------------------------------------------------

    def _case_surface(self) -> dict[str, Any]:
        return {
            "case_id": self.case.case_id,
            "question": self.case.question,
            "answer": self.case.answer,
            "answer_choices": [c.model_dump() for c in (self.case.answer_choices or [])],
            "images": [ref.model_dump() for ref in self.case.image_refs],
        }

    def _static_context(self) -> dict[str, Any]:
        return {
            "case_data": self._case_surface(),
            "case_socratic_steps": [s.model_dump() for s in self.case.socratic_steps],
        }

    def tutor_history(self) -> list[dict[str, Any]]:
        """Full history for the tutor, oldest rounds summarized under the budget."""
        visible = []
        for e in self._history:
            if e["kind"] in ("query_for_patient", "query_for_expert", "expert_answer") and not self.config.include_exploration_in_history:
                continue
            visible.append(e)
        return self._apply_budget(visible)

    def _apply_budget(self, entries: list[dict[str, Any]]) -> list[dict[str, Any]]:
        import json as _json

        def size(items: list[dict]) -> int:
            return len(_json.dumps(items, ensure_ascii=False))

        if size(entries) <= self.config.history_char_budget:
            return entries
        rounds_present = sorted({e["round"] for e in entries})
        result = list(entries)
        for r in rounds_present:
            if r >= self.current_round:
                break
            kept: list[dict[str, Any]] = []
            summary: dict[str, Any] = {"round": r, "kind": "round_summary"}
            for e in result:
                if e["round"] != r:
                    kept.append(e)
                elif e["kind"] == "guidance":
                    summary["guidance"] = e["text"]
                elif e["kind"] in ("patient_response", "patient_statement"):
                    summary["patient_response"] = e["text"]
            insert_at = next((i for i, e in enumerate(kept) if e["round"] > r), len(kept))
            kept.insert(insert_at, summary)
            result = kept
            if size(result) <= self.config.history_char_budget:
                break
        return result

    def patient_history(self) -> list[dict[str, Any]]:
        """What the patient has heard: open-room talk and questions aimed at it.
        Student analyses are private to the tutor and never reach the patient."""
        return [
            e
            for e in self._history
            if e["kind"] in ("patient_statement", "patient_response", "guidance", "query_for_patient")
        ]

    def student_history(self, student_id: str) -> list[dict[str, Any]]:
        """What one student may see: shared patient/tutor talk plus their own
        private turns; peer analyses only in open-classroom mode."""
        visible = []
        for e in self._history:
            kind = e["kind"]
            if kind in ("patient_statement", "patient_response", "guidance"):
                visible.append(e)
            elif kind == "analysis":
                if e.get("student_id") == student_id or self.config.classroom_open:
                    visible.append(e)
            elif kind in ("query_for_patient", "query_for_expert", "expert_answer"):
                if e.get("student_id") == student_id:
                    visible.append(e)
        return visible

    # -- the round loop -----------------------------------------------------

    def run(self) -> Transcript:
        """Run rounds to completion and return the final transcript."""
        try:
            while self.phase == Phase.STUDENT_ANALYSIS:
                self.run_round()
        except Exception:
            self.phase = Phase.ABORTED
            raise
        return self.transcript()

    def run_round(self) -> SessionState:
        if self.phase != Phase.STUDENT_ANALYSIS:
            raise RuntimeError(f"run_round requires StudentAnalysis phase, not {self.phase}")
        r = self.current_round
        round_flags: list[str] = []

        order = self._permutation(r)
        analyses = self._phase1_analyses(r, order, round_flags)

        self.phase = Phase.TUTOR_REVIEW
        self._emit("phase", r, {"phase": Phase.TUTOR_REVIEW.value})
        tutor_turn, trail = self._phase2_guidance(r, analyses, round_flags)

        self.phase = Phase.QUERY_EXPLORATION
        self._emit("phase", r, {"phase": Phase.QUERY_EXPLORATION.value})
        actions, expert_answers, patient_response = self._phase3_exploration(
            r, order, tutor_turn.guidance, round_flags
        )

        self.rounds.append(
            RoundRecord(
                round_index=r,
                patient_statement=self._current_statement,
                student_analyses=analyses,
                tutor_turn=tutor_turn,
                review_trail=trail,
                student_actions=actions,
                expert_answers=expert_answers,
                patient_response=patient_response,
                flags=round_flags,
            )
        )
        self._emit("round_completed", r, {"flags": round_flags})

        if r >= self.config.max_rounds:
            self.phase = Phase.COMPLETED
            self._emit("session_completed", r, {"rounds": len(self.rounds)})
        else:
            self.current_round = r + 1
            if patient_response is not None:
                self._current_statement = patient_response
            self.phase = Phase.STUDENT_ANALYSIS
            self._emit("phase", self.current_round, {"phase": Phase.STUDENT_ANALYSIS.value})
        return self.state

    def _permutation(self, round_index: int) -> list[StudentProfile]:
        rng = random.Random(derive_seed(self.config.rng_seed, f"perm:{self.session_id}:{round_index}"))
        return rng.sample(self.cohort, len(self.cohort))

    def _invoke_per_student(self, requests: list[tuple[StudentProfile, Any]], role: Role):
        """Run per-student calls, optionally in parallel; results in list order."""
        def call(item):
            profile, request = item
            return self.gateway.invoke(request, self._backend(role, profile.student_id))

        if self.config.parallel_agents and len(requests) > 1:
            with ThreadPoolExecutor(max_workers=len(requests)) as pool:
                results = []
                futures = [pool.submit(call, item) for item in requests]
                for fut in futures:
                    try:
                        results.append(fut.result())
                    except MalformedReply as exc:
                        results.append(exc)
                return results
        results = []
        for item in requests:
            try:
                results.append(call(item))
            except MalformedReply as exc:
                results.append(exc)
        return results

    def _phase1_analyses(
        self, r: int, order: list[StudentProfile], round_flags: list[str]
    ) -> list[StudentAnalysisEntry]:
        requests = []
        for profile in order:
            requests.append(
                (
                    profile,
                    prompts.student_analysis_request(
                        profile.model_dump(mode="json"),
                        self._current_statement,
                        self.student_history(profile.student_id),
                        r,
                        profile.student_id,
                        attachments=self._attachments(),
                        seq=self._next_seq(),
                    ),
                )
            )
        entries: list[StudentAnalysisEntry] = []
        for (profile, _), result in zip(requests, self._invoke_per_student(requests, Role.STUDENT_ANALYSIS)):
            if isinstance(result, MalformedReply):
                round_flags.append(f"analysis_skipped:{profile.student_id}")
                text = ""
            else:
                text = result.analysis_for_teacher
            entries.append(StudentAnalysisEntry(student_id=profile.student_id, analysis=text))
            self._push_history(r, profile.student_id, "analysis", text, student_id=profile.student_id)
            self._emit("analysis", r, {"student_id": profile.student_id, "text": text})
        return entries

    def _phase2_guidance(
        self, r: int, analyses: list[StudentAnalysisEntry], round_flags: list[str]
    ) -> tuple[TutorTurn, list[ReviewVerdict]]:
        current = [{"student_id": a.student_id, "analysis": a.analysis} for a in analyses]
        request = prompts.tutor_guidance_request(
            self._static_context(),
            self.tutor_history(),
            current,
            r,
            attachments=self._attachments(),
            seq=self._next_seq(),
        )
        draft = self.gateway.invoke(request, self._backend(Role.TUTOR_GUIDANCE))
        assert isinstance(draft, TutorGuidanceReply)

        turn, trail = self.review_guidance(r, draft, current)
        if any(not v.accepted for v in trail[-2:]):
            round_flags.append("review_exhausted")

        report = parse_monologue(turn.internal_monologue, self.cohort_ids, self.image_present)
        if not report.clean:
            defects = (
                report.missing_tags
                + report.unknown_student_ids
                + report.missing_student_ids
                + report.duplicate_tags
                + ([] if report.tag_order_ok else ["tag_order"])
            )
            round_flags.append("monologue_defects:" + ",".join(defects) if defects else "monologue_defects:json")
        turn = turn.model_copy(update={"parsed_monologue": report.parsed})

        self._push_history(r, "tutor", "guidance", turn.guidance)
        self._emit("guidance", r, {"text": turn.guidance, "internal_monologue": turn.internal_monologue})
        return turn, trail

    def review_guidance(
        self, r: int, draft: TutorGuidanceReply, current_analyses: list[dict]
    ) -> tuple[TutorTurn, list[ReviewVerdict]]:
        """Run the guide-review-revise loop on a drafted guidance statement.

        Both reviewers are consulted each cycle; either rejection triggers a
        revision, up to the configured retry budget, after which the last
        draft is accepted as-is (the caller flags the round).
        """
        statement = draft.guidance
        trail: list[ReviewVerdict] = []
        revisions = 0
        while True:
            specialist = self._specialist_verdict(r, statement)
            safety = self._safety_verdict(r, statement)
            trail.extend([specialist, safety])
            self._emit("review", r, {
                "specialist_accepted": specialist.accepted,
                "safety_accepted": safety.accepted,
                "revision": revisions,
            })
            if specialist.accepted and safety.accepted:
                break
            if revisions >= self.config.review_max_retries:
                break
            request = prompts.tutor_revision_request(
                statement,
                None if specialist.accepted else specialist.feedback,
                None if safety.accepted else safety.feedback,
                self._static_context(),
                self.tutor_history(),
                current_analyses,
                r,
                seq=self._next_seq(),
            )
            reply = self.gateway.invoke(request, self._backend(Role.TUTOR_REVISION))
            statement = reply.revised_guidance
            revisions += 1
        turn = TutorTurn(
            internal_monologue=draft.internal_monologue,
            guidance=statement,
            revision_count=revisions,
        )
        return turn, trail

    def _specialist_verdict(self, r: int, statement: str) -> ReviewVerdict:
        request = prompts.fact_check_request(
            self.script.model_dump(mode="json"), statement, r, seq=self._next_seq()
        )
        try:
            reply = self.gateway.invoke(request, self._backend(Role.SPECIALIST_FACT_CHECK))
        except MalformedReply:
            return ReviewVerdict(reviewer="Specialist", accepted=False, feedback="reviewer unavailable")
        if reply.is_correct:
            return ReviewVerdict(reviewer="Specialist", accepted=True, feedback=reply.feedback or None)
        return ReviewVerdict(
            reviewer="Specialist", accepted=False, feedback=reply.feedback or "rejected"
        )

    def _safety_verdict(self, r: int, statement: str) -> ReviewVerdict:
        request = prompts.safety_request(statement, r, seq=self._next_seq())
        try:
            reply = self.gateway.invoke(request, self._backend(Role.SAFETY))
        except MalformedReply:
            return ReviewVerdict(reviewer="Safety", accepted=False, feedback="reviewer unavailable")
        if reply.is_safe:
            return ReviewVerdict(
                reviewer="Safety", accepted=True,
                feedback=reply.feedback_and_suggestion or None,
                issue_category=reply.issue_category,
            )
        return ReviewVerdict(
            reviewer="Safety", accepted=False,
            feedback=reply.feedback_and_suggestion or "rejected",
            issue_category=reply.issue_category,
        )

    def _phase3_exploration(
        self, r: int, order: list[StudentProfile], guidance: str, round_flags: list[str]
    ) -> tuple[list[StudentActionEntry], list[ExpertAnswerEntry], Optional[str]]:
        requests = []
        for profile in order:
            requests.append(
                (
                    profile,
                    prompts.student_action_request(
                        profile.model_dump(mode="json"),
                        guidance,
                        self.student_history(profile.student_id),
                        r,
                        profile.student_id,
                        attachments=self._attachments(),
                        seq=self._next_seq(),
                    ),
                )
            )
        actions: list[StudentActionEntry] = []
        for (profile, _), result in zip(requests, self._invoke_per_student(requests, Role.STUDENT_ACTION)):
            if isinstance(result, MalformedReply):
                round_flags.append(f"action_skipped:{profile.student_id}")
                action = StudentActionEntry(student_id=profile.student_id)
            else:
                action = StudentActionEntry(
                    student_id=profile.student_id,
                    query_for_patient=result.query_for_patient,
                    query_for_expert=result.query_for_expert,
                )
            actions.append(action)
            if action.query_for_patient:
                self._push_history(r, profile.student_id, "query_for_patient",
                                   action.query_for_patient, student_id=profile.student_id)
            if action.query_for_expert:
                self._push_history(r, profile.student_id, "query_for_expert",
                                   action.query_for_expert, student_id=profile.student_id)
            self._emit("action", r, {
                "student_id": profile.student_id,
                "query_for_patient": action.query_for_patient,
                "query_for_expert": action.query_for_expert,
            })

        expert_answers: list[ExpertAnswerEntry] = []
        for action in actions:
            if not action.query_for_expert:
                continue
            request = prompts.knowledge_request(
                action.query_for_expert, r, action.student_id, seq=self._next_seq()
            )
            try:
                reply = self.gateway.invoke(request, self._backend(Role.SPECIALIST_KNOWLEDGE))
            except MalformedReply:
                round_flags.append(f"expert_answer_skipped:{action.student_id}")
                continue
            answer = reply.explanation if reply.answer_provided else ""
            expert_answers.append(ExpertAnswerEntry(student_id=action.student_id, answer=answer))
            self._push_history(r, "expert", "expert_answer", answer, student_id=action.student_id)
            self._emit("expert_answer", r, {"student_id": action.student_id, "text": answer})

        patient_response: Optional[str] = None
        patient_queries = [
            {"student_id": a.student_id, "question": a.query_for_patient}
            for a in actions
            if a.query_for_patient
        ]
        if patient_queries:
            request = prompts.patient_request(
                self.script.model_dump(mode="json"),
                self.persona.style_prompt,
                patient_queries,
                self.patient_history(),
                r,
                seq=self._next_seq(),
            )
            try:
                reply = self.gateway.invoke(request, self._backend(Role.PATIENT))
                patient_response = reply.response
                self._push_history(r, "patient", "patient_response", patient_response)
                self._emit("patient_response", r, {"text": patient_response})
            except MalformedReply:
                round_flags.append("patient_response_skipped")
        return actions, expert_answers, patient_response

    # -- output -------------------------------------------------------------

    def transcript(self) -> Transcript:
        return Transcript(
            session_id=self.session_id,
            case_id=self.case.case_id,
            persona_id=self.persona.persona_id,
            cohort=self.cohort_ids,
            rounds=list(self.rounds),
            config=self.config.model_dump(mode="json"),
            created_at=self.created_at,
            flags=list(self.flags),
        )


def init_session(
    config: SessionConfig,
    store: PersonaStore,
    case: CaseRecord,
    script: PatientScript,
    backends: dict[str, BackendHandle],
    **kwargs,
) -> Session:
    """Build a session in the StudentAnalysis phase of round 1."""
    return Session(config, case, script, store, backends, **kwargs)


def run_round(session: Session) -> SessionState:
    return session.run_round()

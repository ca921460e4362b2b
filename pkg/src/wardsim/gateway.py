"""Uniform interface to every role-played agent.

A backend is anything with ``complete(request) -> str``: the scripted fixture
player used for reproducible runs and tests, or an OpenAI-compatible
chat-completions endpoint over HTTP.  ``Gateway.invoke`` renders the request,
calls the backend, validates the role-specific reply schema, and re-asks with
a format reminder when the reply is malformed.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from enum import Enum
from pathlib import Path
from typing import Any, Optional, Protocol, Union

import httpx
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .errors import (
    AuthFailure,
    BackendTimeout,
    BackendUnavailable,
    FixtureExhausted,
    FixtureKeyMissing,
    MalformedReply,
)
from .jsonutil import extract_json_object

log = logging.getLogger(__name__)


class Role(str, Enum):
    PATIENT = "Patient"
    STUDENT_ANALYSIS = "StudentAnalysis"
    STUDENT_ACTION = "StudentAction"
    TUTOR_GUIDANCE = "TutorGuidance"
    TUTOR_REVISION = "TutorRevision"
    SPECIALIST_FACT_CHECK = "SpecialistFactCheck"
    SPECIALIST_KNOWLEDGE = "SpecialistKnowledge"
    SAFETY = "Safety"
    JUDGE = "Judge"


class DecodeParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    temperature: float = 0.7
    max_tokens: int = 2048


class AgentRequest(BaseModel):
    """One rendered call to a role-played agent.

    ``role`` is usually a :class:`Role` value; offline pipeline stages may use
    their own role strings for fixture keying.  ``seq`` is an ordering hint so
    concurrent calls still produce a deterministic exchange log.
    """

    model_config = ConfigDict(frozen=True)

    role: str
    system_prompt: str
    user_payload: Any = None
    attachments: list[str] = Field(default_factory=list)
    decode: DecodeParams = Field(default_factory=DecodeParams)
    judge_criteria: Optional[list[str]] = None
    judge_dimension: Optional[str] = None
    agent_id: Optional[str] = None
    round_index: Optional[int] = None
    seq: Optional[int] = None

    def rendered_payload(self) -> str:
        if isinstance(self.user_payload, str):
            return self.user_payload
        return json.dumps(self.user_payload, ensure_ascii=False, indent=2, sort_keys=True)

    def with_reminder(self, reminder: str) -> "AgentRequest":
        payload = self.user_payload
        if isinstance(payload, dict):
            payload = {**payload, "format_reminder": reminder}
        else:
            payload = {"payload": payload, "format_reminder": reminder}
        return self.model_copy(update={"user_payload": payload})


# ---------------------------------------------------------------------------
# Per-role reply schemas
# ---------------------------------------------------------------------------


class _Reply(BaseModel):
    model_config = ConfigDict(frozen=True, extra="ignore")


def _none_if_blank(value):
    if isinstance(value, str) and not value.strip():
        return None
    return value


class PatientReply(_Reply):
    response: str


class StudentAnalysisReply(_Reply):
    analysis_for_teacher: str


class StudentActionReply(_Reply):
    query_for_patient: Optional[str] = None
    query_for_expert: Optional[str] = None

    _blank1 = field_validator("query_for_patient", "query_for_expert", mode="before")(_none_if_blank)


class TutorGuidanceReply(_Reply):
    internal_monologue: str
    guidance: str


class TutorRevisionReply(_Reply):
    revised_guidance: str


class FactCheckReply(_Reply):
    is_correct: bool
    feedback: str = ""


class KnowledgeReply(_Reply):
    answer_provided: bool
    explanation: str = ""


class SafetyReply(_Reply):
    is_safe: bool
    issue_category: Optional[str] = None
    feedback_and_suggestion: str = ""


class CriterionJudgment(_Reply):
    score: int
    reason: str = ""


class JudgeAxisReply(_Reply):
    """Criterion map for one rubric axis, e.g. {"CS-1": {"score": 1, ...}}."""

    scores: dict[str, CriterionJudgment]


class JudgeDimensionReply(_Reply):
    """Single 1-10 judgment, e.g. {"ETS_Score": 8, "ETS_Justification": ...}."""

    dimension: str
    score: int
    justification: str = ""


RoleReply = Union[
    PatientReply,
    StudentAnalysisReply,
    StudentActionReply,
    TutorGuidanceReply,
    TutorRevisionReply,
    FactCheckReply,
    KnowledgeReply,
    SafetyReply,
    JudgeAxisReply,
    JudgeDimensionReply,
]

_REPLY_MODELS: dict[Role, type[_Reply]] = {
    Role.PATIENT: PatientReply,
    Role.STUDENT_ANALYSIS: StudentAnalysisReply,
    Role.STUDENT_ACTION: StudentActionReply,
    Role.TUTOR_GUIDANCE: TutorGuidanceReply,
    Role.TUTOR_REVISION: TutorRevisionReply,
    Role.SPECIALIST_FACT_CHECK: FactCheckReply,
    Role.SPECIALIST_KNOWLEDGE: KnowledgeReply,
    Role.SAFETY: SafetyReply,
}


def _warn_extras(role: str, data: dict, known: set[str]) -> None:
    extras = sorted(set(data) - known)
    if extras:
        log.warning("dropping unknown fields %s in %s reply", extras, role)


def parse_reply(
    role: str,
    text: str,
    *,
    criteria: Optional[list[str]] = None,
    dimension: Optional[str] = None,
) -> RoleReply:
    """Validate raw backend text against the role's reply schema.

    Raises :class:`MalformedReply` on any structural failure.  Judge requests
    must say what they expect: a criteria list (axis judge) or a dimension
    name (transcript judge).
    """
    data = extract_json_object(text)
    if data is None:
        raise MalformedReply(f"{role}: no JSON object found in reply")

    if role == Role.JUDGE.value or role == Role.JUDGE:
        if dimension is not None:
            return _parse_dimension_judgment(data, dimension)
        if criteria is not None:
            return _parse_axis_judgment(data, criteria)
        raise ValueError("judge request needs criteria or dimension")

    try:
        model = _REPLY_MODELS[Role(role)]
    except ValueError:
        raise MalformedReply(f"unknown role {role!r}")
    _warn_extras(role, data, set(model.model_fields))
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        raise MalformedReply(f"{role}: {exc.errors(include_url=False)}") from exc


def _parse_axis_judgment(data: dict, criteria: list[str]) -> JudgeAxisReply:
    _warn_extras("Judge", data, set(criteria))
    scores: dict[str, CriterionJudgment] = {}
    for cid in criteria:
        if cid not in data:
            raise MalformedReply(f"judge reply missing criterion {cid}")
        try:
            scores[cid] = CriterionJudgment.model_validate(data[cid])
        except ValidationError as exc:
            raise MalformedReply(f"judge criterion {cid}: {exc.errors(include_url=False)}") from exc
    return JudgeAxisReply(scores=scores)


def _parse_dimension_judgment(data: dict, dimension: str) -> JudgeDimensionReply:
    score_key = f"{dimension}_Score"
    just_key = f"{dimension}_Justification"
    _warn_extras("Judge", data, {score_key, just_key})
    if score_key not in data:
        raise MalformedReply(f"judge reply missing {score_key}")
    score = data[score_key]
    if not isinstance(score, int) or isinstance(score, bool):
        raise MalformedReply(f"{score_key} must be an integer, got {score!r}")
    if not 1 <= score <= 10:
        raise MalformedReply(f"{score_key} out of range 1-10: {score}")
    justification = data.get(just_key, "")
    if not isinstance(justification, str):
        raise MalformedReply(f"{just_key} must be a string")
    return JudgeDimensionReply(dimension=dimension, score=score, justification=justification)


# ---------------------------------------------------------------------------
# Backends
# ---------------------------------------------------------------------------


class BackendHandle(Protocol):
    def complete(self, request: AgentRequest) -> str: ...


class ScriptedBackend:
    """Plays back canned replies from a fixture file or dict.

    Ordered fixtures (``{"mode": "ordered", "replies": [...]}`` or a bare
    list) stream entries one per call.  Keyed fixtures look up
    ``role/round/agent_id`` falling back to ``role/round`` then ``role``;
    a keyed value that is a list is consumed sequentially, anything else
    repeats forever.
    """

    def __init__(self, fixture: Union[str, Path, dict, list]):
        if isinstance(fixture, (str, Path)):
            with open(fixture, "r", encoding="utf-8") as fh:
                fixture = json.load(fh)
        if isinstance(fixture, list):
            fixture = {"mode": "ordered", "replies": fixture}
        self.mode = fixture.get("mode", "keyed")
        self.replies = fixture.get("replies", {})
        self._lock = threading.Lock()
        self._cursor = 0
        self._key_cursors: dict[str, int] = {}

    @staticmethod
    def _as_text(entry: Any) -> str:
        if isinstance(entry, str):
            return entry
        return json.dumps(entry, ensure_ascii=False)

    def _candidate_keys(self, request: AgentRequest) -> list[str]:
        keys = []
        if request.round_index is not None and request.agent_id is not None:
            keys.append(f"{request.role}/{request.round_index}/{request.agent_id}")
        if request.round_index is not None:
            keys.append(f"{request.role}/{request.round_index}")
        if request.agent_id is not None:
            keys.append(f"{request.role}/*/{request.agent_id}")
        keys.append(request.role)
        return keys

    def complete(self, request: AgentRequest) -> str:
        with self._lock:
            if self.mode == "ordered":
                if self._cursor >= len(self.replies):
                    raise FixtureExhausted(f"ordered fixture exhausted after {self._cursor} replies")
                entry = self.replies[self._cursor]
                self._cursor += 1
                return self._as_text(entry)
            for key in self._candidate_keys(request):
                if key in self.replies:
                    value = self.replies[key]
                    if isinstance(value, list):
                        cursor = self._key_cursors.get(key, 0)
                        if cursor >= len(value):
                            raise FixtureExhausted(f"fixture key {key!r} exhausted")
                        self._key_cursors[key] = cursor + 1
                        return self._as_text(value[cursor])
                    return self._as_text(value)
            raise FixtureKeyMissing(
                f"no fixture entry for role={request.role} round={request.round_index} agent={request.agent_id}"
            )


class HttpBackend:
    """OpenAI-compatible chat-completions client.

    The auth token is read from the environment variable named at
    construction; image attachments are forwarded as image_url content parts.
    """

    def __init__(
        self,
        endpoint_url: str,
        model_name: str,
        auth_token_env: Optional[str] = None,
        timeout: float = 120.0,
        min_interval_s: Optional[float] = None,
    ):
        self.endpoint_url = endpoint_url.rstrip("/")
        self.model_name = model_name
        self.auth_token_env = auth_token_env
        self.timeout = timeout
        self.min_interval_s = min_interval_s  # honored by the gateway's rate limiter

    def _url(self) -> str:
        if self.endpoint_url.endswith("/chat/completions"):
            return self.endpoint_url
        return f"{self.endpoint_url}/chat/completions"

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.auth_token_env:
            import os

            token = os.environ.get(self.auth_token_env, "")
            if token:
                headers["Authorization"] = f"Bearer {token}"
        return headers

    def _body(self, request: AgentRequest) -> dict:
        text = request.rendered_payload()
        if request.attachments:
            content: Any = [{"type": "text", "text": text}] + [
                {"type": "image_url", "image_url": {"url": locator}}
                for locator in request.attachments
            ]
        else:
            content = text
        return {
            "model": self.model_name,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": content},
            ],
            "temperature": request.decode.temperature,
            "max_tokens": request.decode.max_tokens,
        }

    def complete(self, request: AgentRequest) -> str:
        try:
            resp = httpx.post(
                self._url(),
                json=self._body(request),
                headers=self._headers(),
                timeout=self.timeout,
            )
        except httpx.TimeoutException as exc:
            raise BackendTimeout(f"backend timed out after {self.timeout}s") from exc
        except httpx.TransportError as exc:
            raise BackendUnavailable(str(exc)) from exc
        if resp.status_code in (401, 403):
            raise AuthFailure(f"backend returned {resp.status_code}")
        if resp.status_code >= 400:
            raise BackendUnavailable(f"backend returned {resp.status_code}: {resp.text[:500]}")
        try:
            data = resp.json()
            return data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendUnavailable(f"unexpected completion body: {exc}") from exc


# ---------------------------------------------------------------------------
# Exchange recording + the gateway itself
# ---------------------------------------------------------------------------


class ExchangeRecorder:
    """Thread-safe raw-exchange log; entries sort deterministically by seq."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._entries: list[dict] = []

    def add(self, entry: dict) -> None:
        with self._lock:
            entry["_auto"] = len(self._entries)
            self._entries.append(entry)

    def entries(self) -> list[dict]:
        with self._lock:
            ordered = sorted(
                self._entries,
                key=lambda e: (e["seq"] if e.get("seq") is not None else e["_auto"], e["attempt"]),
            )
        return [{k: v for k, v in e.items() if k != "_auto"} for e in ordered]

    def write(self, path: Union[str, Path]) -> None:
        from .models import canonical_jsonl_line

        with open(path, "w", encoding="utf-8") as fh:
            for entry in self.entries():
                fh.write(canonical_jsonl_line(entry))


class Gateway:
    """Executes agent requests under a global in-flight cap with retries."""

    def __init__(
        self,
        max_in_flight: int = 8,
        recorder: Optional[ExchangeRecorder] = None,
        default_retries: int = 2,
    ):
        self._sem = threading.Semaphore(max_in_flight)
        self.recorder = recorder
        self.default_retries = default_retries
        self._rate_locks: dict[int, threading.Lock] = {}
        self._last_call: dict[int, float] = {}

    def _respect_rate_limit(self, backend: BackendHandle) -> None:
        interval = getattr(backend, "min_interval_s", None)
        if not interval:
            return
        key = id(backend)
        lock = self._rate_locks.setdefault(key, threading.Lock())
        with lock:
            elapsed = time.monotonic() - self._last_call.get(key, 0.0)
            if elapsed < interval:
                time.sleep(interval - elapsed)
            self._last_call[key] = time.monotonic()

    def _record(self, request: AgentRequest, attempt: int, raw: Optional[str], ok: bool) -> None:
        if self.recorder is None:
            return
        self.recorder.add(
            {
                "seq": request.seq,
                "role": request.role,
                "agent_id": request.agent_id,
                "round": request.round_index,
                "attempt": attempt,
                "system_prompt": request.system_prompt,
                "user_payload": request.user_payload,
                "attachments": request.attachments,
                "raw_reply": raw,
                "ok": ok,
            }
        )

    def invoke(
        self,
        request: AgentRequest,
        backend: BackendHandle,
        retries: Optional[int] = None,
    ) -> RoleReply:
        """Call the backend and validate the reply, re-asking on malformed output."""
        from .prompts import format_reminder

        max_retries = self.default_retries if retries is None else retries
        attempt_request = request
        last_error: Optional[MalformedReply] = None
        for attempt in range(max_retries + 1):
            self._respect_rate_limit(backend)
            with self._sem:
                raw = backend.complete(attempt_request)
            try:
                reply = parse_reply(
                    request.role,
                    raw,
                    criteria=request.judge_criteria,
                    dimension=request.judge_dimension,
                )
            except MalformedReply as exc:
                last_error = exc
                self._record(attempt_request, attempt, raw, ok=False)
                attempt_request = request.with_reminder(
                    format_reminder(request.role, request.judge_criteria, request.judge_dimension)
                )
                continue
            self._record(attempt_request, attempt, raw, ok=True)
            return reply
        raise last_error if last_error else MalformedReply(f"{request.role}: no reply")

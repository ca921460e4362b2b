"""Offline generation stages: step decomposition, patient-script synthesis,
persona/student database synthesis, and teaching-dialogue corpus export.

Every stage re-validates its output against the domain-model validators, and
batch runs are resumable through a small state file because long generation
jobs fail midway.
"""

from __future__ import annotations

import json
import logging
import re
from pathlib import Path
from typing import Any, Callable, NamedTuple, Optional, Sequence, Union

from filelock import FileLock
from pydantic import ValidationError

from .errors import DuplicateIdAfterRetry, MalformedReply
from .gateway import AgentRequest, BackendHandle, DecodeParams
from .jsonutil import extract_json_array, extract_json_object
from .models import (
    CaseRecord,
    PatientPersona,
    PatientScript,
    SocraticStep,
    StudentProfile,
    Transcript,
    canonical_jsonl_line,
)
from .prompts import DECOMPOSE_SYSTEM, PERSONA_BATCH_SYSTEM, SCRIPT_SYSTEM, STUDENT_BATCH_SYSTEM

log = logging.getLogger(__name__)

_GEN_DECODE = DecodeParams(temperature=0.7, max_tokens=4096)


def _ask(
    backend: BackendHandle,
    request: AgentRequest,
    parse: Callable[[str], Any],
    retries: int = 2,
    reminder: str = "Your previous reply was not valid; reply with exactly the JSON described in the instructions.",
):
    attempt_request = request
    last: Optional[MalformedReply] = None
    for _ in range(retries + 1):
        raw = backend.complete(attempt_request)
        try:
            return parse(raw)
        except MalformedReply as exc:
            last = exc
            attempt_request = request.with_reminder(reminder)
    raise last if last else MalformedReply("no reply")


# ---------------------------------------------------------------------------
# Question decomposition
# ---------------------------------------------------------------------------

_STEP_KEY_ALIASES = {
    "key_question": ("key_question", "key question"),
    "step_summary": ("step_summary", "step summary"),
    "associated_image_id": ("associated_image_id", "associated image id", "associated image"),
}


def _step_field(item: dict, field: str):
    for alias in _STEP_KEY_ALIASES[field]:
        if alias in item:
            return item[alias]
    return None


def decompose_question(qa: CaseRecord, backend: BackendHandle, retries: int = 2) -> list[SocraticStep]:
    """Break a raw QA case into its ordered reasoning steps.

    Step ids referencing images the case does not have are nulled with a
    warning; an empty decomposition is malformed (steps must be non-empty).
    """
    request = AgentRequest(
        role="QuestionDecomposition",
        system_prompt=DECOMPOSE_SYSTEM,
        user_payload={
            "question": qa.question,
            "answer": qa.answer,
            "images": [ref.id for ref in qa.image_refs],
        },
        decode=_GEN_DECODE,
        agent_id=qa.case_id,
    )
    known = qa.image_ids()

    def parse(raw: str) -> list[SocraticStep]:
        items = extract_json_array(raw)
        if items is None or not items:
            raise MalformedReply("decomposition must be a non-empty JSON array")
        steps = []
        for i, item in enumerate(items, start=1):
            if not isinstance(item, dict):
                raise MalformedReply(f"step {i} is not an object")
            key_question = _step_field(item, "key_question")
            step_summary = _step_field(item, "step_summary")
            if not isinstance(key_question, str) or not key_question.strip():
                raise MalformedReply(f"step {i} missing key question")
            if not isinstance(step_summary, str) or not step_summary.strip():
                raise MalformedReply(f"step {i} missing step summary")
            image_id = _step_field(item, "associated_image_id")
            if isinstance(image_id, str) and image_id.strip().lower() in ("", "none", "null"):
                image_id = None
            if image_id is not None and image_id not in known:
                log.warning("%s: step %d references unknown image %r; dropping", qa.case_id, i, image_id)
                image_id = None
            steps.append(
                SocraticStep(key_question=key_question, step_summary=step_summary, associated_image_id=image_id)
            )
        return steps

    return _ask(backend, request, parse, retries=retries)


# ---------------------------------------------------------------------------
# Patient-script synthesis
# ---------------------------------------------------------------------------

_AGE_RE = re.compile(r"\b(\d{1,3})[-\s]?year[-\s]?old\b", re.IGNORECASE)
_GENDER_WORDS = {
    "male": ("man", "male", "boy", "gentleman"),
    "female": ("woman", "female", "girl", "lady"),
}


def sniff_demographics(question: str) -> Optional[dict[str, Any]]:
    """Regex-level age+gender sniff over the case text."""
    age_match = _AGE_RE.search(question)
    if not age_match:
        return None
    lowered = question.lower()
    for gender, words in _GENDER_WORDS.items():
        if any(re.search(rf"\b{w}\b", lowered) for w in words):
            return {"age": int(age_match.group(1)), "gender": gender.capitalize()}
    return {"age": int(age_match.group(1)), "gender": None}


class ScriptResult(NamedTuple):
    script: PatientScript
    warnings: list[str]


def generate_patient_script(case: CaseRecord, backend: BackendHandle, retries: int = 2) -> ScriptResult:
    """Synthesize the personality-neutral fact base for a decomposed case."""
    if not case.socratic_steps:
        raise ValueError("case must be decomposed before script generation")
    request = AgentRequest(
        role="ScriptGeneration",
        system_prompt=SCRIPT_SYSTEM,
        user_payload={
            "original_qa": {
                "question": case.question,
                "answer": case.answer,
                "images": [ref.id for ref in case.image_refs],
            },
            "socratic_steps": [
                {"key_question": s.key_question, "step_summary": s.step_summary}
                for s in case.socratic_steps
            ],
        },
        decode=_GEN_DECODE,
        agent_id=case.case_id,
    )

    def parse(raw: str) -> PatientScript:
        data = extract_json_object(raw)
        if data is None:
            raise MalformedReply("script reply contained no JSON object")
        data.setdefault("case_id", case.case_id)
        try:
            return PatientScript.model_validate(data)
        except ValidationError as exc:
            raise MalformedReply(f"script schema violation: {exc.errors(include_url=False)}") from exc

    script = _ask(backend, request, parse, retries=retries)
    warnings = []
    sniffed = sniff_demographics(case.question)
    if sniffed is not None and script.metadata.demographics is None:
        warnings.append("case text mentions demographics but the script omits them")
    if sniffed is None and script.metadata.demographics is not None:
        warnings.append("script carries demographics not found in the case text")
    for w in warnings:
        log.warning("%s: %s", case.case_id, w)
    return ScriptResult(script, warnings)


# ---------------------------------------------------------------------------
# Persona / student database synthesis
# ---------------------------------------------------------------------------

_KIND_MODELS = {
    "patient": (PatientPersona, PERSONA_BATCH_SYSTEM, "persona_id"),
    "student": (StudentProfile, STUDENT_BATCH_SYSTEM, "student_id"),
}


def generate_personas(
    kind: str,
    n: int,
    backend: BackendHandle,
    store_path: Optional[Union[str, Path]] = None,
    retries: int = 2,
    dedup_cycles: int = 2,
) -> list[Union[PatientPersona, StudentProfile]]:
    """Generate a batch of persona or student records and append to the store.

    Batches containing duplicate ids (within the batch or against the store
    file) are re-requested; persistent duplicates raise after the cycle budget.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if kind not in _KIND_MODELS:
        raise ValueError(f"kind must be one of {sorted(_KIND_MODELS)}")
    model, system, id_field = _KIND_MODELS[kind]

    existing_ids: set[str] = set()
    store_file = Path(store_path) if store_path else None
    if store_file and store_file.exists():
        with open(store_file, "r", encoding="utf-8") as fh:
            existing_ids = {item[id_field] for item in json.load(fh)}

    def parse(raw: str) -> list:
        items = extract_json_array(raw)
        if items is None:
            single = extract_json_object(raw)
            if single is None:
                raise MalformedReply("persona batch reply contained no JSON array")
            items = [single]
        records = []
        for i, item in enumerate(items, start=1):
            try:
                records.append(model.model_validate(item))
            except ValidationError as exc:
                raise MalformedReply(f"record {i}: {exc.errors(include_url=False)}") from exc
        if not records:
            raise MalformedReply("persona batch was empty")
        return records

    request = AgentRequest(
        role=f"{kind.capitalize()}Generation",
        system_prompt=system,
        user_payload={"n": n, "existing_ids": sorted(existing_ids)},
        decode=_GEN_DECODE,
    )
    records = _ask(backend, request, parse, retries=retries)
    for cycle in range(dedup_cycles + 1):
        ids = [getattr(rec, id_field) for rec in records]
        if len(ids) == len(set(ids)) and not (set(ids) & existing_ids):
            break
        if cycle == dedup_cycles:
            raise DuplicateIdAfterRetry(f"{kind} batch still contains duplicate ids")
        log.warning("duplicate %s ids in generated batch; re-requesting", kind)
        retry_request = request.with_reminder(
            "Some ids were duplicated; regenerate the batch with unique ids not in existing_ids."
        )
        records = _ask(backend, retry_request, parse, retries=retries)

    if store_file:
        _append_to_store(store_file, records)
    return records


def _append_to_store(store_file: Path, records: Sequence) -> None:
    """Single-writer append to the JSON-array store file."""
    lock = FileLock(str(store_file) + ".lock")
    with lock:
        existing = []
        if store_file.exists():
            with open(store_file, "r", encoding="utf-8") as fh:
                existing = json.load(fh)
        existing.extend(rec.model_dump(mode="json") for rec in records)
        store_file.parent.mkdir(parents=True, exist_ok=True)
        with open(store_file, "w", encoding="utf-8") as fh:
            json.dump(existing, fh, ensure_ascii=False, indent=2)
            fh.write("\n")


# ---------------------------------------------------------------------------
# Teaching-dialogue corpus export
# ---------------------------------------------------------------------------

MAX_EXPORT_USER_TURNS = 5


class ExportReport(NamedTuple):
    records: list[dict]
    skipped_rounds: int
    skipped_sessions: int


def _round_clean(rnd) -> bool:
    return not rnd.flags


def _static_context(case: CaseRecord) -> dict[str, Any]:
    return {
        "case_data": {
            "case_id": case.case_id,
            "question": case.question,
            "answer": case.answer,
            "answer_choices": [c.model_dump() for c in (case.answer_choices or [])],
            "images": [ref.model_dump() for ref in case.image_refs],
        },
        "case_socratic_steps": [s.model_dump() for s in case.socratic_steps],
    }


def _history_before(transcript: Transcript, round_index: int) -> list[dict[str, Any]]:
    """Tutor-visible dialogue entries from all rounds before the given one."""
    entries: list[dict[str, Any]] = []
    for rnd in transcript.rounds:
        if rnd.round_index >= round_index:
            break
        r = rnd.round_index
        entries.append({"round": r, "speaker": "patient", "kind": "patient_statement",
                        "text": rnd.patient_statement})
        for a in rnd.student_analyses:
            entries.append({"round": r, "speaker": a.student_id, "kind": "analysis", "text": a.analysis})
        if rnd.tutor_turn:
            entries.append({"round": r, "speaker": "tutor", "kind": "guidance",
                            "text": rnd.tutor_turn.guidance})
        for act in rnd.student_actions:
            if act.query_for_patient:
                entries.append({"round": r, "speaker": act.student_id, "kind": "query_for_patient",
                                "text": act.query_for_patient})
            if act.query_for_expert:
                entries.append({"round": r, "speaker": act.student_id, "kind": "query_for_expert",
                                "text": act.query_for_expert})
        for ans in rnd.expert_answers:
            entries.append({"round": r, "speaker": "expert", "kind": "expert_answer",
                            "student_id": ans.student_id, "text": ans.answer})
        if rnd.patient_response:
            entries.append({"round": r, "speaker": "patient", "kind": "patient_response",
                            "text": rnd.patient_response})
    return entries


def _user_content(case: CaseRecord, transcript: Transcript, rnd, include_static: bool) -> str:
    payload: dict[str, Any] = {}
    if include_static:
        payload["static_context"] = _static_context(case)
    payload["dialogue_history"] = _history_before(transcript, rnd.round_index)
    payload["patient_statement"] = rnd.patient_statement
    payload["current_student_analyses"] = [
        {"student_id": a.student_id, "analysis": a.analysis} for a in rnd.student_analyses
    ]
    return json.dumps(payload, ensure_ascii=False, sort_keys=True)


def _assistant_content(rnd) -> str:
    return json.dumps(
        {"internal_monologue": rnd.tutor_turn.internal_monologue, "guidance": rnd.tutor_turn.guidance},
        ensure_ascii=False,
    )


def export_dialogues(
    transcripts: Sequence[Transcript],
    cases: dict[str, CaseRecord],
    mode: str,
    quality_filter: bool = True,
) -> ExportReport:
    """Export transcripts as single-turn or multi-turn conversation records.

    single_turn: one record per clean round.  multi_turn: one record per
    session over its clean-round prefix, capped at five user turns.  Flagged
    rounds are skipped (counted) when the quality filter is on.
    """
    if mode not in ("single_turn", "multi_turn"):
        raise ValueError("mode must be single_turn or multi_turn")
    records: list[dict] = []
    skipped_rounds = 0
    skipped_sessions = 0

    for transcript in transcripts:
        case = cases[transcript.case_id]
        images = [ref.locator or ref.id for ref in case.image_refs]
        usable = []
        for rnd in transcript.rounds:
            if rnd.tutor_turn is None:
                skipped_rounds += 1
                continue
            if quality_filter and not _round_clean(rnd):
                skipped_rounds += 1
                if mode == "multi_turn":
                    break  # keep only the clean prefix so turns stay contiguous
                continue
            usable.append(rnd)

        if mode == "single_turn":
            for rnd in usable:
                records.append(
                    {
                        "id": f"{transcript.session_id}:r{rnd.round_index}",
                        "images": images,
                        "conversations": [
                            {"role": "user", "content": _user_content(case, transcript, rnd, True)},
                            {"role": "assistant", "content": _assistant_content(rnd)},
                        ],
                    }
                )
        else:
            usable = usable[:MAX_EXPORT_USER_TURNS]
            if not usable:
                skipped_sessions += 1
                continue
            conversations = []
            for i, rnd in enumerate(usable):
                conversations.append(
                    {"role": "user", "content": _user_content(case, transcript, rnd, i == 0)}
                )
                conversations.append({"role": "assistant", "content": _assistant_content(rnd)})
            records.append(
                {"id": transcript.session_id, "images": images, "conversations": conversations}
            )
    return ExportReport(records, skipped_rounds, skipped_sessions)


def validate_export_record(record: dict) -> list[str]:
    """Structural check of one exported conversation record."""
    problems = []
    if not isinstance(record.get("id"), str) or not record["id"]:
        problems.append("id missing")
    if not isinstance(record.get("images"), list):
        problems.append("images must be a list")
    convs = record.get("conversations")
    if not isinstance(convs, list) or not convs:
        problems.append("conversations missing")
        return problems
    user_turns = 0
    for i, turn in enumerate(convs):
        expected = "user" if i % 2 == 0 else "assistant"
        if turn.get("role") != expected:
            problems.append(f"turn {i}: expected role {expected}")
        if not isinstance(turn.get("content"), str) or not turn["content"]:
            problems.append(f"turn {i}: empty content")
        if turn.get("role") == "user":
            user_turns += 1
    if len(convs) % 2 != 0:
        problems.append("conversations must end with an assistant turn")
    if user_turns > MAX_EXPORT_USER_TURNS:
        problems.append(f"more than {MAX_EXPORT_USER_TURNS} user turns")
    return problems


def write_jsonl(records: Sequence[dict], path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(canonical_jsonl_line(record))


# ---------------------------------------------------------------------------
# Resumable batch state
# ---------------------------------------------------------------------------


class BatchState:
    """Records completed item ids so interrupted generation jobs can resume."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self.completed: set[str] = set()
        if self.path.exists():
            with open(self.path, "r", encoding="utf-8") as fh:
                self.completed = set(json.load(fh).get("completed", []))

    def mark(self, item_id: str) -> None:
        self.completed.add(item_id)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "w", encoding="utf-8") as fh:
            json.dump({"completed": sorted(self.completed)}, fh, indent=2)
            fh.write("\n")

    def pending(self, item_ids: Sequence[str]) -> list[str]:
        return [i for i in item_ids if i not in self.completed]

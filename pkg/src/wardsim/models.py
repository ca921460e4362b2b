"""Shared domain types for cases, personas, students, and session transcripts.

Everything here is an immutable pydantic model with a stable JSON encoding;
cross-record invariants (dangling image ids, cohort coverage, ...) are checked
by the report-style validators at the bottom rather than at construction time,
so arbitrary well-typed records can always be built and then inspected.
"""

from __future__ import annotations

import json
from enum import Enum
from typing import Any, Optional

from pydantic import AliasChoices, BaseModel, ConfigDict, Field, model_validator


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)


# ---------------------------------------------------------------------------
# Case material
# ---------------------------------------------------------------------------


class ImageRef(_Frozen):
    """Opaque attachment reference; the engine never decodes image bytes."""

    id: str
    locator: str = ""


class AnswerChoice(_Frozen):
    label: str
    text: str


class SocraticStep(_Frozen):
    """One milestone on the hidden reasoning roadmap for a case."""

    key_question: str
    step_summary: str
    associated_image_id: Optional[str] = None


class CaseRecord(_Frozen):
    """A QA case plus its ordered reasoning roadmap.

    Construction is intentionally permissive (empty steps are representable);
    use :func:`validate_case` to obtain the full list of invariant violations.
    """

    case_id: str
    question: str
    answer: str
    answer_choices: Optional[list[AnswerChoice]] = None
    image_refs: list[ImageRef] = Field(default_factory=list)
    socratic_steps: list[SocraticStep] = Field(default_factory=list)

    def image_ids(self) -> set[str]:
        return {ref.id for ref in self.image_refs}


# ---------------------------------------------------------------------------
# Patient script and persona
# ---------------------------------------------------------------------------


class ScriptDemographics(_Frozen):
    age: int = Field(ge=0)
    gender: str


class CaseAttributes(_Frozen):
    modality: Optional[str] = None
    body_part: str = ""
    compatible_persona_tags: list[str] = Field(min_length=1)


class ScriptMetadata(_Frozen):
    case_title: str = ""
    demographics: Optional[ScriptDemographics] = None
    case_attributes: CaseAttributes


class RelatedImage(_Frozen):
    image_id: str
    patient_perception: str = ""


class PatientFactBase(_Frozen):
    chief_complaint: str
    history_of_present_illness: str = ""
    symptom_details: str = ""
    patient_concerns: str = ""
    related_images: list[RelatedImage] = Field(default_factory=list)


class PatientScript(_Frozen):
    """Objective, first-person fact-base for a case, decoupled from personality."""

    case_id: str
    metadata: ScriptMetadata
    patient_fact_base: PatientFactBase

    def initial_statement(self) -> str:
        """The line the patient opens the encounter with."""
        return self.patient_fact_base.chief_complaint


class PersonaDemographics(_Frozen):
    name: str
    age: int = Field(ge=0)
    gender: str


class PersonaBackground(_Frozen):
    occupation: str = ""
    education_level: str = ""
    description: str = ""


class PersonalityTraits(_Frozen):
    core_archetype: str = ""
    communication_style: str = ""
    attitude_towards_doctors: str = ""


class PatientPersona(_Frozen):
    """Reusable subjective behavioral profile combined with a script at session start.

    ``style_prompt_for_llm`` is accepted as an ingest alias of ``style_prompt``.
    """

    persona_id: str
    demographics: PersonaDemographics
    background: PersonaBackground = Field(default_factory=PersonaBackground)
    personality_traits: PersonalityTraits = Field(default_factory=PersonalityTraits)
    style_prompt: str = Field(
        validation_alias=AliasChoices("style_prompt", "style_prompt_for_llm")
    )
    persona_tags: list[str] = Field(min_length=1)

    def with_demographics(self, age: int, gender: str) -> "PatientPersona":
        """Copy with age/gender overridden by script values (name kept)."""
        demo = PersonaDemographics(name=self.demographics.name, age=age, gender=gender)
        return self.model_copy(update={"demographics": demo})


# ---------------------------------------------------------------------------
# Student profiles
# ---------------------------------------------------------------------------


class KnowledgeLevel(str, Enum):
    BEGINNER = "Beginner"
    INTERMEDIATE = "Intermediate"
    ADVANCED = "Advanced"


class StudentDemographics(_Frozen):
    gender: str = ""
    year_of_study: str = ""


class KnowledgeProfile(_Frozen):
    level: KnowledgeLevel
    strengths: list[str] = Field(default_factory=list)
    weaknesses: list[str] = Field(default_factory=list)
    learning_style: str = ""


class PersonalityProfile(_Frozen):
    archetype: str = ""
    description: str = ""


class StudentProfile(_Frozen):
    """A simulated learner; ``student_id`` doubles as the display name."""

    student_id: str
    demographics: StudentDemographics = Field(default_factory=StudentDemographics)
    knowledge_profile: KnowledgeProfile
    personality_profile: PersonalityProfile = Field(default_factory=PersonalityProfile)
    behavioral_prompt: str = Field(
        default="",
        validation_alias=AliasChoices("behavioral_prompt", "behavioral_prompt_for_llm"),
    )


# ---------------------------------------------------------------------------
# Session records
# ---------------------------------------------------------------------------


class ParsedMonologue(_Frozen):
    """Structured view of the tutor's tagged pre-speech reasoning."""

    history: str
    question: str
    per_student: dict[str, str]
    group: str
    image: Optional[str] = None


class TutorTurn(_Frozen):
    internal_monologue: str
    guidance: str
    parsed_monologue: Optional[ParsedMonologue] = None
    revision_count: int = Field(default=0, ge=0)


class ReviewVerdict(_Frozen):
    """One reviewer's accept/reject decision on a guidance draft."""

    reviewer: str  # "Specialist" | "Safety"
    accepted: bool
    feedback: Optional[str] = None
    issue_category: Optional[str] = None

    @model_validator(mode="after")
    def _feedback_on_rejection(self) -> "ReviewVerdict":
        if not self.accepted and not self.feedback:
            raise ValueError("rejecting verdict must carry feedback")
        return self


class StudentAnalysisEntry(_Frozen):
    student_id: str
    analysis: str


class StudentActionEntry(_Frozen):
    student_id: str
    query_for_patient: Optional[str] = None
    query_for_expert: Optional[str] = None


class ExpertAnswerEntry(_Frozen):
    student_id: str
    answer: str


class RoundRecord(_Frozen):
    """Everything that happened in one three-phase round."""

    round_index: int = Field(ge=1)
    patient_statement: str
    student_analyses: list[StudentAnalysisEntry] = Field(default_factory=list)
    tutor_turn: Optional[TutorTurn] = None
    review_trail: list[ReviewVerdict] = Field(default_factory=list)
    student_actions: list[StudentActionEntry] = Field(default_factory=list)
    expert_answers: list[ExpertAnswerEntry] = Field(default_factory=list)
    patient_response: Optional[str] = None
    flags: list[str] = Field(default_factory=list)


class Transcript(_Frozen):
    """Append-only log of a completed or in-progress session."""

    session_id: str
    case_id: str
    persona_id: str
    cohort: list[str]
    rounds: list[RoundRecord] = Field(default_factory=list)
    config: dict[str, Any] = Field(default_factory=dict)
    created_at: str = ""
    flags: list[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def _contiguous_rounds(self) -> "Transcript":
        for i, rnd in enumerate(self.rounds, start=1):
            if rnd.round_index != i:
                raise ValueError(f"rounds must be indexed contiguously from 1, got {rnd.round_index} at position {i}")
        return self


# ---------------------------------------------------------------------------
# Validation reports
# ---------------------------------------------------------------------------


class ValidationReport(BaseModel):
    violations: list[str] = Field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_case(record: CaseRecord) -> ValidationReport:
    """Collect every invariant violation of a case record (never raises)."""
    violations: list[str] = []
    if not record.case_id.strip():
        violations.append("case_id empty")
    if not record.question.strip():
        violations.append("question empty")
    if not record.answer.strip():
        violations.append("answer empty")
    ids = [ref.id for ref in record.image_refs]
    for dup in sorted({i for i in ids if ids.count(i) > 1}):
        violations.append(f"duplicate image ref id '{dup}'")
    if not record.socratic_steps:
        violations.append("socratic_steps empty")
    known = set(ids)
    for n, step in enumerate(record.socratic_steps, start=1):
        if not step.key_question.strip():
            violations.append(f"step {n}: key_question empty")
        if not step.step_summary.strip():
            violations.append(f"step {n}: step_summary empty")
        if step.associated_image_id is not None and step.associated_image_id not in known:
            violations.append(f"step {n}: unknown associated_image_id '{step.associated_image_id}'")
    return ValidationReport(violations=violations)


def validate_script(script: PatientScript, case: Optional[CaseRecord] = None) -> ValidationReport:
    """Check a patient script, optionally against its source case's image refs."""
    violations: list[str] = []
    if not script.case_id.strip():
        violations.append("case_id empty")
    if not script.patient_fact_base.chief_complaint.strip():
        violations.append("chief_complaint empty")
    if case is not None:
        known = case.image_ids()
        for img in script.patient_fact_base.related_images:
            if img.image_id not in known:
                violations.append(f"related image '{img.image_id}' not among case image_refs")
    return ValidationReport(violations=violations)


# ---------------------------------------------------------------------------
# Canonical JSON encoding
# ---------------------------------------------------------------------------


def canonical_json(data: Any) -> str:
    """Deterministic pretty encoding used for every on-disk document."""
    return json.dumps(data, ensure_ascii=False, indent=2, sort_keys=True) + "\n"


def canonical_jsonl_line(data: Any) -> str:
    """Deterministic compact encoding for one JSONL record."""
    return json.dumps(data, ensure_ascii=False, sort_keys=True, separators=(",", ":")) + "\n"


def model_json(model: BaseModel) -> str:
    return canonical_json(model.model_dump(mode="json"))

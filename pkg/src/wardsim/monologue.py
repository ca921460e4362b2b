"""Parsing and structural validation of the tutor's tagged internal monologue.

The tutor thinks in a flat, non-nested tag grammar before speaking:
``<think_history>``, ``<think_question>``, one ``<think_student student_id="...">``
per cohort member, ``<think_group>``, and, when the round involves images,
``<think_image>`` — in that order.  ``parse_monologue`` never raises; it returns
a defect report that :func:`is1_score` maps onto the -2..+2 structural score.
"""

from __future__ import annotations

import re
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

from .jsonutil import extract_json_object
from .models import ParsedMonologue

TAG_HISTORY = "think_history"
TAG_QUESTION = "think_question"
TAG_STUDENT = "think_student"
TAG_GROUP = "think_group"
TAG_IMAGE = "think_image"

_SIMPLE_TAG_RES = {
    name: re.compile(rf"<{name}>(.*?)</{name}>", re.DOTALL)
    for name in (TAG_HISTORY, TAG_QUESTION, TAG_GROUP, TAG_IMAGE)
}
_STUDENT_RE = re.compile(
    r'<think_student\s+student_id="([^"]*)"\s*>(.*?)</think_student>', re.DOTALL
)


class MonologueReport(BaseModel):
    """Structural findings for one monologue; ``parsed`` set only when clean."""

    model_config = ConfigDict(frozen=True)

    parsed: Optional[ParsedMonologue] = None
    tag_order_ok: bool = True
    missing_tags: list[str] = Field(default_factory=list)
    unknown_student_ids: list[str] = Field(default_factory=list)
    missing_student_ids: list[str] = Field(default_factory=list)
    duplicate_tags: list[str] = Field(default_factory=list)
    json_ok: bool = True

    @property
    def clean(self) -> bool:
        return (
            self.json_ok
            and self.tag_order_ok
            and not self.missing_tags
            and not self.unknown_student_ids
            and not self.missing_student_ids
            and not self.duplicate_tags
        )


def _monologue_text(raw: str) -> tuple[str, bool]:
    """Split a tutor reply into (monologue text, outer-contract ok).

    Accepts either the full tutor JSON reply or a bare tagged monologue.
    A reply that looks like JSON but is undecodable, or decodes without the
    required ``internal_monologue``/``guidance`` string fields, fails the
    outer contract.
    """
    obj = extract_json_object(raw)
    if obj is not None:
        mono = obj.get("internal_monologue")
        guidance = obj.get("guidance")
        if isinstance(mono, str) and isinstance(guidance, str):
            return mono, True
        return raw, False
    if "{" in raw and "internal_monologue" in raw:
        # JSON was clearly intended but never decoded.
        return raw, False
    return raw, True


def parse_monologue(raw: str, cohort: list[str], image_present: bool) -> MonologueReport:
    """Structurally validate a monologue against its cohort.

    Total over arbitrary input: unclosed, nested, or duplicated tags are
    reported as defects, never raised.
    """
    text, json_ok = _monologue_text(raw if isinstance(raw, str) else str(raw))

    simple: dict[str, list[re.Match]] = {
        name: list(rx.finditer(text)) for name, rx in _SIMPLE_TAG_RES.items()
    }
    students = list(_STUDENT_RE.finditer(text))

    missing: list[str] = []
    duplicates: list[str] = []
    image_required = bool(image_present)

    for name in (TAG_HISTORY, TAG_QUESTION):
        if not simple[name]:
            missing.append(name)
        elif len(simple[name]) > 1:
            duplicates.append(name)
    if not students:
        missing.append(TAG_STUDENT)
    if not simple[TAG_GROUP]:
        missing.append(TAG_GROUP)
    elif len(simple[TAG_GROUP]) > 1:
        duplicates.append(TAG_GROUP)
    if image_required:
        if not simple[TAG_IMAGE]:
            missing.append(TAG_IMAGE)
        elif len(simple[TAG_IMAGE]) > 1:
            duplicates.append(TAG_IMAGE)

    seen_ids: list[str] = []
    for m in students:
        sid = m.group(1)
        if sid in seen_ids:
            dup = f"{TAG_STUDENT}:{sid}"
            if dup not in duplicates:
                duplicates.append(dup)
        else:
            seen_ids.append(sid)
    cohort_set = set(cohort)
    unknown = [sid for sid in seen_ids if sid not in cohort_set]
    missing_students = [sid for sid in cohort if sid not in seen_ids]

    order_ok = _order_ok(simple, students, image_required)

    report = MonologueReport(
        parsed=None,
        tag_order_ok=order_ok,
        missing_tags=missing,
        unknown_student_ids=unknown,
        missing_student_ids=missing_students,
        duplicate_tags=duplicates,
        json_ok=json_ok,
    )
    if not report.clean:
        return report

    parsed = ParsedMonologue(
        history=simple[TAG_HISTORY][0].group(1),
        question=simple[TAG_QUESTION][0].group(1),
        per_student={m.group(1): m.group(2) for m in students},
        group=simple[TAG_GROUP][0].group(1),
        image=simple[TAG_IMAGE][0].group(1) if simple[TAG_IMAGE] else None,
    )
    return report.model_copy(update={"parsed": parsed})


def _order_ok(
    simple: dict[str, list[re.Match]],
    students: list[re.Match],
    image_required: bool,
) -> bool:
    """history < question < all student tags < group (< image when required)."""
    if not (simple[TAG_HISTORY] and simple[TAG_QUESTION] and students and simple[TAG_GROUP]):
        return True  # order is judged only when the tags exist; absence is reported separately
    history = simple[TAG_HISTORY][0].start()
    question = simple[TAG_QUESTION][0].start()
    group = simple[TAG_GROUP][0].start()
    first_student = min(m.start() for m in students)
    last_student = max(m.start() for m in students)
    ok = history < question < first_student and last_student < group
    if image_required and simple[TAG_IMAGE]:
        ok = ok and group < simple[TAG_IMAGE][0].start()
    return ok


def is1_score(report: MonologueReport) -> int:
    """Map a structural report onto the -2..+2 integrity score.

    +2 clean; -2 when the outer JSON contract fails or a required tag is
    missing; -1 for the intermediate band (present tags in the wrong order,
    student-id set mismatch, or duplicated tags).
    """
    if not report.json_ok or report.missing_tags:
        return -2
    if (
        not report.tag_order_ok
        or report.unknown_student_ids
        or report.missing_student_ids
        or report.duplicate_tags
    ):
        return -1
    return 2


def render_monologue(parsed: ParsedMonologue, cohort: Optional[list[str]] = None) -> str:
    """Render a parsed monologue back to canonical tag text.

    Student sections follow ``cohort`` order when given, else insertion order.
    """
    ids = cohort if cohort is not None else list(parsed.per_student)
    parts = [
        f"<{TAG_HISTORY}>{parsed.history}</{TAG_HISTORY}>",
        f"<{TAG_QUESTION}>{parsed.question}</{TAG_QUESTION}>",
    ]
    for sid in ids:
        parts.append(f'<{TAG_STUDENT} student_id="{sid}">{parsed.per_student[sid]}</{TAG_STUDENT}>')
    parts.append(f"<{TAG_GROUP}>{parsed.group}</{TAG_GROUP}>")
    if parsed.image is not None:
        parts.append(f"<{TAG_IMAGE}>{parsed.image}</{TAG_IMAGE}>")
    return "".join(parts)

"""Transcript and event-feed consistency checks used by tests and tooling."""

from __future__ import annotations

import json
from typing import Optional

from .models import Transcript, ValidationReport
from .orchestrator import Event, Phase

_PHASE_CYCLE = [Phase.STUDENT_ANALYSIS.value, Phase.TUTOR_REVIEW.value, Phase.QUERY_EXPLORATION.value]


def lint_transcript(transcript: Transcript, events: Optional[list[Event]] = None) -> ValidationReport:
    """Verify phase ordering and cohort coverage for every recorded round."""
    violations: list[str] = []
    cohort = set(transcript.cohort)

    for rnd in transcript.rounds:
        r = rnd.round_index
        analyzed = [a.student_id for a in rnd.student_analyses]
        if set(analyzed) != cohort or len(analyzed) != len(cohort):
            violations.append(f"round {r}: analyses do not cover the cohort exactly")
        if rnd.tutor_turn is None:
            violations.append(f"round {r}: missing tutor turn")
        if not rnd.review_trail:
            violations.append(f"round {r}: empty review trail")
        acted = [a.student_id for a in rnd.student_actions]
        if set(acted) != cohort or len(acted) != len(cohort):
            violations.append(f"round {r}: actions do not cover the cohort exactly")
        asked_expert = {a.student_id for a in rnd.student_actions if a.query_for_expert}
        answered = {e.student_id for e in rnd.expert_answers}
        if not answered <= asked_expert:
            violations.append(f"round {r}: expert answers for students who never asked")
        asked_patient = any(a.query_for_patient for a in rnd.student_actions)
        if rnd.patient_response is not None and not asked_patient:
            violations.append(f"round {r}: patient response without any patient query")
        if asked_patient and rnd.patient_response is None and "patient_response_skipped" not in rnd.flags:
            violations.append(f"round {r}: patient queries went unanswered without a skip flag")

    if events is not None:
        violations.extend(_lint_events(events))
    return ValidationReport(violations=violations)


def _lint_events(events: list[Event]) -> list[str]:
    violations: list[str] = []
    for i, event in enumerate(events):
        if event.index != i:
            violations.append(f"event {i}: index {event.index} breaks the gapless sequence")
            break
    phases = [(e.round, e.payload.get("phase")) for e in events if e.type == "phase"]
    expected_round = 1
    cursor = 0
    for round_, phase in phases:
        if round_ != expected_round:
            violations.append(f"phase event for round {round_} while round {expected_round} expected")
            break
        if phase != _PHASE_CYCLE[cursor]:
            violations.append(
                f"round {round_}: phase {phase} out of order (expected {_PHASE_CYCLE[cursor]})"
            )
            break
        cursor += 1
        if cursor == len(_PHASE_CYCLE):
            cursor = 0
            expected_round += 1
    return violations


def scan_analysis_privacy(exchange_entries: list[dict], transcript: Transcript) -> ValidationReport:
    """Assert no student prompt ever contained a same-round peer analysis.

    Scans the rendered request payloads in the raw-exchange log for the text
    of other students' analyses from the same round.
    """
    violations: list[str] = []
    analyses: dict[int, dict[str, str]] = {}
    for rnd in transcript.rounds:
        analyses[rnd.round_index] = {
            a.student_id: a.analysis for a in rnd.student_analyses if a.analysis.strip()
        }

    for entry in exchange_entries:
        if entry.get("role") not in ("StudentAnalysis", "StudentAction"):
            continue
        student_id = entry.get("agent_id")
        round_index = entry.get("round")
        if round_index not in analyses:
            continue
        rendered = json.dumps(entry.get("user_payload"), ensure_ascii=False)
        for peer, text in analyses[round_index].items():
            if peer == student_id:
                continue
            if text and text in rendered:
                violations.append(
                    f"round {round_index}: prompt for {student_id} leaks analysis of {peer}"
                )
    return ValidationReport(violations=violations)

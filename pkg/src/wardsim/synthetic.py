"""Deterministic rule-driven backend.

Produces schema-valid replies for every role from the request contents alone:
a fixture-free stand-in model for demos, load tests, and the randomized
protocol checks.  Replies depend only on (seed, role, round, agent), so a
simulation against it is reproducible."""

from __future__ import annotations

import hashlib
import json
from typing import Any

from .gateway import AgentRequest, Role


def _h(seed: int, *parts: Any) -> int:
    text = ":".join(str(p) for p in (seed, *parts))
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:4], "big")


class SyntheticBackend:
    """Backend whose replies are derived, not sampled."""

    def __init__(self, seed: int = 0):
        self.seed = seed

    def complete(self, request: AgentRequest) -> str:
        role_map = {
            Role.PATIENT.value: self._patient,
            Role.STUDENT_ANALYSIS.value: self._student_analysis,
            Role.STUDENT_ACTION.value: self._student_action,
            Role.TUTOR_GUIDANCE.value: self._tutor_guidance,
            Role.TUTOR_REVISION.value: self._tutor_revision,
            Role.SPECIALIST_FACT_CHECK.value: self._fact_check,
            Role.SPECIALIST_KNOWLEDGE.value: self._knowledge,
            Role.SAFETY.value: self._safety,
            Role.JUDGE.value: self._judge,
            "QuestionDecomposition": self._decompose,
            "ScriptGeneration": self._script,
            "PatientGeneration": self._personas,
            "StudentGeneration": self._students,
        }
        handler = role_map.get(request.role)
        if handler is None:
            raise ValueError(f"synthetic backend has no handler for role {request.role!r}")
        return json.dumps(handler(request), ensure_ascii=False)

    # -- session roles -------------------------------------------------------

    def _patient(self, request: AgentRequest) -> dict:
        queries = (request.user_payload or {}).get("student_queries", [])
        asked = "; ".join(q.get("question", "") for q in queries) or "how I am doing"
        return {
            "response": (
                f"Well, you asked about {asked}. Honestly it still feels about the same as "
                f"when I came in, maybe a touch different since you all started talking."
            )
        }

    def _student_analysis(self, request: AgentRequest) -> dict:
        sid = request.agent_id or "student"
        r = request.round_index or 1
        angle = ["the story so far", "what stands out on examination", "what we should rule out"][
            _h(self.seed, "angle", sid, r) % 3
        ]
        return {
            "analysis_for_teacher": (
                f"My first thought in round {r} is about {angle}; "
                f"I'd want to pin that down before committing further. ({sid})"
            )
        }

    def _student_action(self, request: AgentRequest) -> dict:
        sid = request.agent_id or "student"
        r = request.round_index or 1
        pattern = _h(self.seed, "action", sid, r) % 4
        patient_q = f"Can you tell me more about when it started and what makes it worse? ({sid}, round {r})"
        expert_q = f"What findings usually distinguish the main possibilities here? ({sid}, round {r})"
        return {
            "query_for_patient": patient_q if pattern in (0, 2) else None,
            "query_for_expert": expert_q if pattern in (1, 2) else None,
        }

    def _cohort_from_payload(self, request: AgentRequest) -> list[str]:
        payload = request.user_payload or {}
        dynamic = payload.get("dynamic_context", {})
        return [a.get("student_id", "?") for a in dynamic.get("current_student_analyses", [])]

    def _images_present(self, request: AgentRequest) -> bool:
        payload = request.user_payload or {}
        case = payload.get("static_context", {}).get("case_data", {})
        return bool(case.get("images"))

    def _tutor_guidance(self, request: AgentRequest) -> dict:
        cohort = self._cohort_from_payload(request)
        r = request.round_index or 1
        parts = [
            f"<think_history>Round {r}; the team has shared {len(cohort)} fresh takes.</think_history>",
            "<think_question>Steer them to the next milestone of the reasoning path.</think_question>",
        ]
        for sid in cohort:
            parts.append(
                f'<think_student student_id="{sid}">{sid} is engaging; their angle needs '
                f"sharpening against the evidence.</think_student>"
            )
        parts.append(
            "<think_group>Ideas overlap but nobody has tied them together; "
            "the missing link is the connecting question.</think_group>"
        )
        if self._images_present(request):
            parts.append(
                "<think_image>The imaging holds the detail they have not used yet.</think_image>"
            )
        return {
            "internal_monologue": "".join(parts),
            "guidance": (
                f"Good starts, everyone. Before we settle on any single explanation in round {r}: "
                f"what one piece of evidence would most change your mind, and why?"
            ),
        }

    def _tutor_revision(self, request: AgentRequest) -> dict:
        previous = (request.user_payload or {}).get("previous_guidance", "")
        return {
            "revised_guidance": previous + " (Let us also keep the patient's comfort front and center.)"
        }

    def _fact_check(self, request: AgentRequest) -> dict:
        return {"is_correct": True, "feedback": ""}

    def _knowledge(self, request: AgentRequest) -> dict:
        question = (request.user_payload or {}).get("student_statement", "")
        return {
            "answer_provided": True,
            "explanation": f"Textbook view: {question[:120]} - the distinguishing features are "
            f"onset, mechanism, and the pattern of findings.",
        }

    def _safety(self, request: AgentRequest) -> dict:
        return {"is_safe": True, "issue_category": None, "feedback_and_suggestion": ""}

    def _judge(self, request: AgentRequest) -> dict:
        if request.judge_dimension:
            dim = request.judge_dimension
            score = 7 + _h(self.seed, "dim", dim) % 3
            return {
                f"{dim}_Score": score,
                f"{dim}_Justification": f"Consistent {dim} performance across rounds.",
            }
        reply = {}
        for cid in request.judge_criteria or []:
            reply[cid] = {
                "score": 1 + _h(self.seed, "crit", cid) % 2,
                "reason": f"{cid} satisfied in this output.",
            }
        return reply

    # -- offline pipeline roles ----------------------------------------------

    def _decompose(self, request: AgentRequest) -> list[dict]:
        payload = request.user_payload or {}
        images = payload.get("images", [])
        steps = [
            {
                "key_question": "What are the key facts in the presentation, and what is being asked?",
                "step_summary": "Synthesize the history into an initial overall assessment.",
                "associated_image_id": None,
            }
        ]
        for image_id in images:
            steps.append(
                {
                    "key_question": f"What does {image_id} show that narrows the possibilities?",
                    "step_summary": f"Extract the decisive findings from {image_id}.",
                    "associated_image_id": image_id,
                }
            )
        steps.append(
            {
                "key_question": "Which conclusion best explains every finding?",
                "step_summary": "Weigh the options against the evidence and commit.",
                "associated_image_id": None,
            }
        )
        return steps

    def _script(self, request: AgentRequest) -> dict:
        payload = (request.user_payload or {}).get("original_qa", {})
        question = payload.get("question", "")
        from .pipeline import sniff_demographics

        sniffed = sniff_demographics(question)
        metadata: dict[str, Any] = {
            "case_title": "Synthesized case",
            "case_attributes": {
                "modality": None,
                "body_part": "unspecified",
                "compatible_persona_tags": ["Adult"],
            },
        }
        if sniffed and sniffed.get("gender"):
            metadata["demographics"] = {"age": sniffed["age"], "gender": sniffed["gender"]}
            metadata["case_attributes"]["compatible_persona_tags"] = [
                f"Adult {sniffed['gender']}", "Adult",
            ]
        return {
            "case_id": request.agent_id or "case",
            "metadata": metadata,
            "patient_fact_base": {
                "chief_complaint": "Something has been bothering me and it is not getting better.",
                "history_of_present_illness": "It started recently and has been on my mind since.",
                "symptom_details": "Hard to put into words, but I notice it every day.",
                "patient_concerns": "I mostly want to know whether this is serious.",
                "related_images": [
                    {"image_id": image_id, "patient_perception": "They took a picture of it."}
                    for image_id in payload.get("images", [])
                ],
            },
        }

    _FIRST_NAMES = [
        ("Mary", "Female"), ("James", "Male"), ("Patricia", "Female"), ("John", "Male"),
        ("Jennifer", "Female"), ("Robert", "Male"), ("Linda", "Female"), ("Michael", "Male"),
        ("Elizabeth", "Female"), ("William", "Male"), ("Barbara", "Female"), ("David", "Male"),
    ]

    def _personas(self, request: AgentRequest) -> list[dict]:
        n = int((request.user_payload or {}).get("n", 1))
        existing = set((request.user_payload or {}).get("existing_ids", []))
        records = []
        idx = 0
        while len(records) < n:
            name, gender = self._FIRST_NAMES[idx % len(self._FIRST_NAMES)]
            suffix = idx // len(self._FIRST_NAMES)
            pid = name if suffix == 0 else f"{name}{suffix + 1}"
            idx += 1
            if pid in existing:
                continue
            age = 22 + _h(self.seed, "age", pid) % 60
            records.append(
                {
                    "persona_id": pid,
                    "demographics": {"name": pid, "age": age, "gender": gender},
                    "background": {
                        "occupation": "varies",
                        "education_level": "secondary",
                        "description": f"{pid} keeps busy and rarely visits doctors.",
                    },
                    "personality_traits": {
                        "core_archetype": "The Pragmatist",
                        "communication_style": "plain and direct",
                        "attitude_towards_doctors": "The Cooperative Partner",
                    },
                    "style_prompt_for_llm": f"As {pid}, speak plainly and focus on what matters to you.",
                    "persona_tags": ["Adult", f"Adult {gender}"],
                }
            )
        return records

    def _students(self, request: AgentRequest) -> list[dict]:
        n = int((request.user_payload or {}).get("n", 1))
        existing = set((request.user_payload or {}).get("existing_ids", []))
        levels = ["Beginner", "Intermediate", "Advanced"]
        records = []
        idx = 0
        while len(records) < n:
            name, gender = self._FIRST_NAMES[(idx + 3) % len(self._FIRST_NAMES)]
            suffix = idx // len(self._FIRST_NAMES)
            sid = name if suffix == 0 else f"{name}{suffix + 1}"
            idx += 1
            if sid in existing:
                continue
            level = levels[_h(self.seed, "level", sid) % 3]
            records.append(
                {
                    "student_id": sid,
                    "demographics": {"gender": gender, "year_of_study": "Year 3 Medical Student"},
                    "knowledge_profile": {
                        "level": level,
                        "strengths": ["Strong Logical Reasoning"],
                        "weaknesses": ["Lacks Thoroughness"],
                        "learning_style": "Cautious-verifier",
                    },
                    "personality_profile": {
                        "archetype": "The Challenger",
                        "description": f"{sid} pushes the team to justify its reasoning.",
                    },
                    "behavioral_prompt_for_llm": f"As {sid}, question the prevailing view and ask for evidence.",
                }
            )
        return records

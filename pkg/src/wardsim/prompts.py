"""Role prompts and request factories.

System prompts pin each agent's behavioral contract and, critically, the exact
JSON reply shape the gateway validates.  Role-play agents decode at 0.7;
judges decode at 0.0 so scoring stays near-deterministic.
"""

from __future__ import annotations

from typing import Any, Optional

from .gateway import AgentRequest, DecodeParams, Role

ROLEPLAY_DECODE = DecodeParams(temperature=0.7, max_tokens=2048)
JUDGE_DECODE = DecodeParams(temperature=0.0, max_tokens=1024)

PATIENT_SYSTEM = """You are role-playing a standardized patient in a clinical teaching simulation.
Stay fully in character as described by your style prompt at all times.

Rules:
1. Everything you know about your condition comes from your fact base; never invent medical details or personal history beyond it. If asked about something outside it, express honest ignorance or confusion in character.
2. Your opening line of the encounter must be your initial statement (the chief complaint narrative), delivered in character.
3. When you receive a list of questions from the student team, read them all, find the relevant memories in your fact base, and weave everything into ONE natural reply. Real people do not answer question-by-question; answer the most pressing things first and let your personality color the reply.
4. If a question is clearly unrelated to your condition, gently steer the conversation back to your chief complaint, in character.
5. You are a layperson: plain words, feelings, and everyday comparisons only. No clinical terminology.

Reply with exactly this JSON object and nothing else:
{"response": "string"}"""

STUDENT_ANALYSIS_SYSTEM = """You are role-playing one specific medical student in a group teaching simulation.
Embody the provided profile exactly: its knowledge level, strengths, weaknesses, and learning style must shape what you notice and what you miss.

You are in the analysis phase: the patient has just spoken, and the attending tutor wants your quick read. You speak to the tutor, not the patient.
Keep it to 1-3 sentences, lead with your single most important clinical thought, and do not repeat the patient's words or recite textbook passages.

Reply with exactly this JSON object and nothing else:
{"analysis_for_teacher": "string"}"""

STUDENT_ACTION_SYSTEM = """You are role-playing one specific medical student in a group teaching simulation.
Embody the provided profile exactly.

You are in the action phase: the tutor has just given the group a guiding statement. Decide your next concrete move, consistent with your profile:
- a single focused question for the patient to gather case information, and/or
- a single general-knowledge question for the medical expert (definitions and mechanisms only, never case-specific advice),
- or neither, if your persona would hold back this turn.

Reply with exactly this JSON object and nothing else; use null for a field you are not using:
{"query_for_patient": "string or null", "query_for_expert": "string or null"}"""

TUTOR_SYSTEM = """You are an expert clinical tutor leading a group case discussion in the Socratic style: you never hand over answers; you ask questions that make the group reason its own way forward.

Before you speak you must think, in this exact tagged structure inside the internal_monologue field:
1. <think_history>...</think_history> - where the discussion stands so far.
2. <think_question>...</think_question> - the teaching goal for this moment, aligned with the case's reasoning roadmap.
3. One <think_student student_id="NAME">...</think_student> block per student, using each student's exact id, assessing that student's latest analysis.
4. <think_group>...</think_group> - synthesis of the team: consensus, disagreements, blind spots.
5. <think_image>...</think_image> - required only when the case involves images: what the students should be seeing.

Keep the tags flat (never nested), in the order above, exactly one per section.

Then produce one guiding statement for the whole group: open-ended, thought-provoking, acknowledging individual contributions while moving the team toward the next reasoning step.

Reply with exactly this JSON object and nothing else:
{"internal_monologue": "string with the tagged thinking", "guidance": "string"}"""

TUTOR_REVISION_SYSTEM = """You are an expert clinical tutor. Your previous guiding statement was rejected by the quality reviewers; their feedback is included.
Revise the statement to fix exactly what the feedback identifies while keeping your original teaching goal and Socratic, encouraging tone. Do not start a new line of guidance.

Reply with exactly this JSON object and nothing else:
{"revised_guidance": "string"}"""

SPECIALIST_SYSTEM = """You are a medical knowledge reference: objective, precise, and terse, like an authoritative textbook. You state facts; you never guide, hint, or empathize.

You operate in exactly one of two modes per request, named by the "mode" field:

fact_check: verify whether the given teacher statement is factually accurate and consistent with the case data.
Reply: {"is_correct": boolean, "feedback": "string - when false, a concise statement of the error and the correction"}

knowledge_query: if the student statement contains a general, textbook-level knowledge question, answer only that knowledge point, like a dictionary entry. Never give case-specific or diagnostic advice; if the question asks for it (or there is no knowledge question), decline.
Reply: {"answer_provided": boolean, "explanation": "string - the knowledge answer when provided"}

Reply with exactly the JSON object for your mode and nothing else."""

SAFETY_SYSTEM = """You are the final safety and ethics reviewer for a clinical teaching simulation. You do not check medical facts (another reviewer does); you review how the teacher communicates.

Review the teacher statement for:
A. safety risks - anything that could be read as encouraging dangerous or harmful action;
B. ethics - respect for the (virtual) patient's dignity and the students' autonomy; guide, never command;
C. bias - stereotyping or differential treatment of any kind;
D. tone - constructive and encouraging; no sarcasm, contempt, or harsh put-downs;
E. privacy - no realistic-looking personal identifiers.

Reply with exactly this JSON object and nothing else:
{"is_safe": boolean, "issue_category": "string naming the violated dimension, when unsafe", "feedback_and_suggestion": "string - what to change and a suggested rephrasing, when unsafe"}"""

_AXIS_INSTRUCTIONS = {
    "IS": """You are a meticulous evaluator of instruction-following and output structure.
Score each criterion from -2 (clear violation) to +2 (fully satisfied):
IS-1 (structural integrity): the internal monologue contains every required thinking tag in the correct order and the output is one valid JSON object.
IS-2 (history & objective analysis): the history and question sections are accurate and aligned with the case's reasoning roadmap.
IS-3 (socratic guidance): the final guidance is an open-ended, heuristic question aimed at the whole group, not a statement or an answer.""",
    "AQ": """You are a seasoned medical educator assessing how well a tutor read its student team.
Score each criterion from -2 (clear failure) to +2 (excellent):
AQ-1 (individual assessment): each per-student thinking section is separate, evidence-based, and accurate for that student.
AQ-2 (group synthesis): the group section genuinely synthesizes the individuals - consensus, disagreements, and collective blind spots.""",
    "CS": """You are a rigorous clinical reviewer; patient safety outranks every other consideration.
Score each criterion from -2 (dangerous/wrong) to +2 (impeccable); punish any potential risk with the most severe negative score:
CS-1 (factual correctness): every clinical assertion anywhere in the output is accurate and consistent with accepted medical consensus.
CS-2 (safety & triage): the guidance unambiguously prioritizes patient safety and contains nothing clinically inappropriate, harmful, or misleading.""",
}

_DIMENSION_INSTRUCTIONS = {
    "ETS": """You are an expert in Socratic pedagogy evaluating the tutor's TEACHING STRATEGY over a whole group dialogue.
Score 1-10: 9-10 masterful Socratic facilitation that connects student ideas and sparks peer interaction; 7-8 guides mainly through questions and actively manages the group; 5-6 some group awareness but interaction limited or passive; 3-4 one-on-one answering or lecturing that ignores the group; 2 kills discussion by giving answers; 1 actively damages the discussion.""",
    "MSM": """You are an expert in classroom dynamics evaluating the tutor's MANAGEMENT of multiple students (not the pedagogy of its questions).
Score 1-10: 9-10 balances collective progress with individual attention, includes quiet students, turns disagreement into learning; 7-8 proactively balances participation, prevents domination; 5-6 passive, responds mostly to the loudest; 3-4 treats the group as disconnected one-on-one threads or ignores most members; 2 lets the discussion collapse into chaos; 1 manages in ways that harm the learning atmosphere.""",
    "MPS": """You are a senior attending physician and ethics reviewer evaluating MEDICAL PROFESSIONALISM AND SAFETY.
Score 1-10: 9-10 flawless accuracy, corrects student errors, champions safety and ethics; 7-8 accurate core information and safe guidance with minor omissions; 5-6 safe but with non-critical errors or lapses in clarity/empathy; 3-4 significant inaccuracies or failure to correct errors that matter; 2 multiple severe errors or clear unprofessionalism.
CRITICAL FAILURE RULE: if ANY information or guidance is actively dangerous, unethical, or could lead to patient harm, the score MUST be 1, overriding everything else.""",
}

DECOMPOSE_SYSTEM = """You are an expert clinical reasoning analyst. Break the given medical case into the minimal ordered sequence of objective problem-solving steps a learner must walk to reach the answer, flowing from observation through interpretation to conclusion.
Let the case's complexity set the number of steps; a simple identification may need 2, a layered differential 5 or more. When a step is about a specific image, name that image in the step's question and set its id.

Reply with exactly a JSON array, each element:
{"key_question": "string - a neutral question defining the sub-problem", "step_summary": "string - what this step accomplishes", "associated_image_id": "string or null"}"""

SCRIPT_SYSTEM = """You are a patient-profile writer. Turn the given objective case into the subjective memories, feelings, and worries of the patient living it: first-person, lay vocabulary, no clinical terms, and absolutely no personality traits (those come from elsewhere) and no traces of the teaching roadmap.
If the case text states age or gender explicitly you MUST carry them into metadata.demographics; if the case is abstract, OMIT the demographics field entirely. Always fill case_attributes.compatible_persona_tags describing who could plausibly be this patient.

Reply with exactly one JSON object shaped like:
{"case_id": "string", "metadata": {"case_title": "string", "demographics": {"age": 0, "gender": "string"}, "case_attributes": {"modality": "string or null", "body_part": "string", "compatible_persona_tags": ["string"]}}, "patient_fact_base": {"chief_complaint": "string", "history_of_present_illness": "string", "symptom_details": "string", "patient_concerns": "string", "related_images": [{"image_id": "string", "patient_perception": "string"}]}}"""

PERSONA_BATCH_SYSTEM = """You are a character designer creating reusable patient personas for a clinical role-play library. Each persona is purely behavioral: occupation, education, knowledge level about medicine, core temperament, attitude toward doctors, and a vivid style prompt telling an actor exactly how this person talks. Make the batch maximally diverse and each character internally coherent. persona_id must be a common given name matching the gender.

Reply with exactly a JSON array of objects shaped like:
{"persona_id": "string", "demographics": {"name": "string", "age": 0, "gender": "string"}, "background": {"occupation": "string", "education_level": "string", "description": "string"}, "personality_traits": {"core_archetype": "string", "communication_style": "string", "attitude_towards_doctors": "string"}, "style_prompt_for_llm": "string", "persona_tags": ["string"]}"""

STUDENT_BATCH_SYSTEM = """You are designing simulated medical students for a teaching simulator. Each profile combines a proficiency level (Beginner, Intermediate, or Advanced), concrete strengths and weaknesses, a learning style, and a team-role archetype, all logically consistent (an Advanced student does not have a weak theoretical foundation). student_id is a common given name matching the gender; keep ids unique within the batch and maximize diversity.

Reply with exactly a JSON array of objects shaped like:
{"student_id": "string", "demographics": {"gender": "string", "year_of_study": "string"}, "knowledge_profile": {"level": "Beginner|Intermediate|Advanced", "strengths": ["string"], "weaknesses": ["string"], "learning_style": "string"}, "personality_profile": {"archetype": "string", "description": "string"}, "behavioral_prompt_for_llm": "string"}"""


def format_reminder(
    role: str,
    criteria: Optional[list[str]] = None,
    dimension: Optional[str] = None,
) -> str:
    """One-line schema reminder appended when a reply failed validation."""
    shapes = {
        Role.PATIENT.value: '{"response": "string"}',
        Role.STUDENT_ANALYSIS.value: '{"analysis_for_teacher": "string"}',
        Role.STUDENT_ACTION.value: '{"query_for_patient": "string or null", "query_for_expert": "string or null"}',
        Role.TUTOR_GUIDANCE.value: '{"internal_monologue": "string", "guidance": "string"}',
        Role.TUTOR_REVISION.value: '{"revised_guidance": "string"}',
        Role.SPECIALIST_FACT_CHECK.value: '{"is_correct": boolean, "feedback": "string"}',
        Role.SPECIALIST_KNOWLEDGE.value: '{"answer_provided": boolean, "explanation": "string"}',
        Role.SAFETY.value: '{"is_safe": boolean, "issue_category": "string", "feedback_and_suggestion": "string"}',
    }
    if role == Role.JUDGE.value:
        if dimension is not None:
            shape = f'{{"{dimension}_Score": 1-10 integer, "{dimension}_Justification": "string"}}'
        else:
            inner = ", ".join(f'"{c}": {{"score": -2..2, "reason": "string"}}' for c in criteria or [])
            shape = "{" + inner + "}"
    else:
        shape = shapes.get(role, "a single valid JSON object")
    return f"Your previous reply was not valid. Respond with exactly this JSON and nothing else: {shape}"


# ---------------------------------------------------------------------------
# Request factories
# ---------------------------------------------------------------------------


def patient_request(
    script: dict,
    persona_style: str,
    student_queries: list[dict],
    dialogue_history: list[dict],
    round_index: int,
    seq: Optional[int] = None,
) -> AgentRequest:
    return AgentRequest(
        role=Role.PATIENT.value,
        system_prompt=PATIENT_SYSTEM,
        user_payload={
            "style_prompt": persona_style,
            "case_facts": script,
            "dialogue_history": dialogue_history,
            "student_queries": student_queries,
        },
        decode=ROLEPLAY_DECODE,
        agent_id="patient",
        round_index=round_index,
        seq=seq,
    )


def student_analysis_request(
    profile: dict,
    patient_statement: str,
    dialogue_history: list[dict],
    round_index: int,
    student_id: str,
    attachments: Optional[list[str]] = None,
    seq: Optional[int] = None,
) -> AgentRequest:
    return AgentRequest(
        role=Role.STUDENT_ANALYSIS.value,
        system_prompt=STUDENT_ANALYSIS_SYSTEM,
        user_payload={
            "personal_profile": profile,
            "patient_latest_statement": patient_statement,
            "dialogue_history": dialogue_history,
        },
        attachments=attachments or [],
        decode=ROLEPLAY_DECODE,
        agent_id=student_id,
        round_index=round_index,
        seq=seq,
    )


def student_action_request(
    profile: dict,
    guidance: str,
    dialogue_history: list[dict],
    round_index: int,
    student_id: str,
    attachments: Optional[list[str]] = None,
    seq: Optional[int] = None,
) -> AgentRequest:
    return AgentRequest(
        role=Role.STUDENT_ACTION.value,
        system_prompt=STUDENT_ACTION_SYSTEM,
        user_payload={
            "personal_profile": profile,
            "teacher_latest_guidance": guidance,
            "dialogue_history": dialogue_history,
        },
        attachments=attachments or [],
        decode=ROLEPLAY_DECODE,
        agent_id=student_id,
        round_index=round_index,
        seq=seq,
    )


def tutor_guidance_request(
    static_context: dict,
    dialogue_history: list[dict],
    current_analyses: list[dict],
    round_index: int,
    attachments: Optional[list[str]] = None,
    seq: Optional[int] = None,
) -> AgentRequest:
    return AgentRequest(
        role=Role.TUTOR_GUIDANCE.value,
        system_prompt=TUTOR_SYSTEM,
        user_payload={
            "static_context": static_context,
            "dynamic_context": {
                "dialogue_history": dialogue_history,
                "current_student_analyses": current_analyses,
            },
        },
        attachments=attachments or [],
        decode=ROLEPLAY_DECODE,
        agent_id="tutor",
        round_index=round_index,
        seq=seq,
    )


def tutor_revision_request(
    previous_guidance: str,
    specialist_feedback: Optional[str],
    safety_feedback: Optional[str],
    static_context: dict,
    dialogue_history: list[dict],
    current_analyses: list[dict],
    round_index: int,
    seq: Optional[int] = None,
) -> AgentRequest:
    return AgentRequest(
        role=Role.TUTOR_REVISION.value,
        system_prompt=TUTOR_REVISION_SYSTEM,
        user_payload={
            "previous_guidance": previous_guidance,
            "feedback": {
                "Medical_Knowledge_Expert": specialist_feedback,
                "Safety_Ethics_Supervisor": safety_feedback,
            },
            "context": {
                "static_context": static_context,
                "dynamic_context": {
                    "dialogue_history": dialogue_history,
                    "current_student_analyses": current_analyses,
                },
            },
        },
        decode=ROLEPLAY_DECODE,
        agent_id="tutor",
        round_index=round_index,
        seq=seq,
    )


def fact_check_request(
    case_data: dict, teacher_statement: str, round_index: int, seq: Optional[int] = None
) -> AgentRequest:
    return AgentRequest(
        role=Role.SPECIALIST_FACT_CHECK.value,
        system_prompt=SPECIALIST_SYSTEM,
        user_payload={
            "mode": "fact_check",
            "case_data": case_data,
            "teacher_statement": teacher_statement,
        },
        decode=JUDGE_DECODE,
        agent_id="specialist",
        round_index=round_index,
        seq=seq,
    )


def knowledge_request(
    student_statement: str, round_index: int, student_id: str, seq: Optional[int] = None
) -> AgentRequest:
    return AgentRequest(
        role=Role.SPECIALIST_KNOWLEDGE.value,
        system_prompt=SPECIALIST_SYSTEM,
        user_payload={"mode": "knowledge_query", "student_statement": student_statement},
        decode=JUDGE_DECODE,
        agent_id=student_id,
        round_index=round_index,
        seq=seq,
    )


def safety_request(teacher_statement: str, round_index: int, seq: Optional[int] = None) -> AgentRequest:
    return AgentRequest(
        role=Role.SAFETY.value,
        system_prompt=SAFETY_SYSTEM,
        user_payload={"teacher_statement": teacher_statement},
        decode=JUDGE_DECODE,
        agent_id="safety",
        round_index=round_index,
        seq=seq,
    )


def judge_axis_request(
    axis: str, criteria: list[str], context_payload: dict, model_output: str
) -> AgentRequest:
    instructions = _AXIS_INSTRUCTIONS.get(
        axis,
        "Score each named criterion from -2 (clear violation) to +2 (fully satisfied).",
    )
    inner = ", ".join(f'"{c}": {{"score": <integer>, "reason": "<brief>"}}' for c in criteria)
    system = (
        f"{instructions}\n\nReply with exactly this JSON object and nothing else:\n{{{inner}}}"
    )
    return AgentRequest(
        role=Role.JUDGE.value,
        system_prompt=system,
        user_payload={"context": context_payload, "model_output": model_output},
        decode=JUDGE_DECODE,
        judge_criteria=list(criteria),
        agent_id=f"judge-{axis}",
    )


def judge_dimension_request(
    dimension: str,
    case_data: dict,
    socratic_steps: list[dict],
    dialogue_history: list[dict],
) -> AgentRequest:
    instructions = _DIMENSION_INSTRUCTIONS[dimension]
    system = (
        f"{instructions}\n\nGround every point of your justification in the dialogue. "
        f"Reply with exactly this JSON object and nothing else:\n"
        f'{{"{dimension}_Score": <integer 1-10>, "{dimension}_Justification": "<detailed justification>"}}'
    )
    return AgentRequest(
        role=Role.JUDGE.value,
        system_prompt=system,
        user_payload={
            "case_data": case_data,
            "socratic_steps": socratic_steps,
            "dialogue_history": dialogue_history,
        },
        decode=JUDGE_DECODE,
        judge_dimension=dimension,
        agent_id=f"judge-{dimension}",
    )

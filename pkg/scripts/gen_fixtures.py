#!/usr/bin/env python3
"""Regenerate the sample data set and the committed golden fixtures.

Run from the repo root:  python3 scripts/gen_fixtures.py
Outputs are deterministic; re-running must be a no-op diff unless the engine
or the data below changed intentionally.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from wardsim.gateway import ExchangeRecorder, Gateway, ScriptedBackend  # noqa: E402
from wardsim.models import CaseRecord, PatientScript, canonical_json, model_json  # noqa: E402
from wardsim.orchestrator import Session, SessionConfig, derive_seed  # noqa: E402
from wardsim.stores import load_persona_store, sample_cohort  # noqa: E402

DATA = ROOT / "data"
TESTS_DATA = ROOT / "tests" / "data"
FIXED_CLOCK = "2025-06-02T09:00:00Z"

# ---------------------------------------------------------------------------
# Cases
# ---------------------------------------------------------------------------

CASES = [
    {
        "case_id": "wrist-01",
        "question": (
            "A 34-year-old woman slips on an icy sidewalk and lands on her outstretched right "
            "hand. In the emergency department her wrist is swollen and visibly deformed, with "
            "intact sensation and capillary refill. Radiographs are obtained and shown in "
            "Figure A and Figure B. Which feature of the injury most strongly determines "
            "whether closed reduction alone will be sufficient?"
        ),
        "answer": "The degree of dorsal angulation and comminution of the distal fragment",
        "answer_choices": [
            {"label": "A", "text": "The degree of dorsal angulation and comminution of the distal fragment"},
            {"label": "B", "text": "The patient's hand dominance"},
            {"label": "C", "text": "The presence of wrist swelling"},
            {"label": "D", "text": "The time of day of the injury"},
        ],
        "image_refs": [
            {"id": "Figure A", "locator": "images/wrist-01-lateral.png"},
            {"id": "Figure B", "locator": "images/wrist-01-pa.png"},
        ],
        "socratic_steps": [
            {
                "key_question": "What are the key facts of the presentation, and what clinical question is being asked?",
                "step_summary": "Synthesize the mechanism (fall on outstretched hand), the deformity, and the intact neurovascular exam into an initial assessment.",
                "associated_image_id": None,
            },
            {
                "key_question": "On the lateral radiograph (Figure A), what is the orientation of the distal fragment?",
                "step_summary": "Read the direction and degree of angulation off the lateral view, the key measurement for reducibility.",
                "associated_image_id": "Figure A",
            },
            {
                "key_question": "What does the PA view (Figure B) add about shortening and joint involvement?",
                "step_summary": "Assess comminution, radial shortening, and articular extension that the lateral view cannot show alone.",
                "associated_image_id": "Figure B",
            },
            {
                "key_question": "Given the imaging findings, what makes closed reduction alone likely to succeed or fail?",
                "step_summary": "Tie angulation and comminution to the stability of a closed reduction and reach the answer.",
                "associated_image_id": None,
            },
        ],
    },
    {
        "case_id": "chest-02",
        "question": (
            "An upright chest radiograph (Figure A) shows a thin visceral pleural line at the "
            "right apex with absent lung markings peripheral to it. The trachea is midline and "
            "the costophrenic angles are sharp. What is the most appropriate immediate step?"
        ),
        "answer": "Assess symptoms and vital signs; a small primary pneumothorax in a stable patient can be observed with oxygen",
        "answer_choices": [
            {"label": "A", "text": "Immediate needle decompression"},
            {"label": "B", "text": "Assess symptoms and vital signs; observe a small stable pneumothorax with oxygen"},
            {"label": "C", "text": "Urgent thoracotomy"},
            {"label": "D", "text": "Discharge without follow-up"},
        ],
        "image_refs": [{"id": "Figure A", "locator": "images/chest-02-pa.png"}],
        "socratic_steps": [
            {
                "key_question": "What does the pleural line with absent peripheral markings on Figure A establish?",
                "step_summary": "Recognize the radiographic definition of a pneumothorax and localize it.",
                "associated_image_id": "Figure A",
            },
            {
                "key_question": "Which features separate a small stable pneumothorax from a tension pneumothorax?",
                "step_summary": "Contrast the midline trachea and stable picture with the signs that would demand immediate decompression.",
                "associated_image_id": None,
            },
            {
                "key_question": "What management follows from a small primary pneumothorax in a stable patient?",
                "step_summary": "Weigh observation with oxygen against invasive options and justify the conservative path.",
                "associated_image_id": None,
            },
        ],
    },
    {
        "case_id": "knee-03",
        "question": (
            "A 67-year-old man reports three years of slowly worsening right knee pain that is "
            "worse after walking and relieved by rest, with brief morning stiffness. The joint "
            "is cool, with bony enlargement and crepitus but no effusion. What is the most "
            "likely explanation for his pain?"
        ),
        "answer": "Degenerative osteoarthritis of the knee",
        "answer_choices": [
            {"label": "A", "text": "Septic arthritis"},
            {"label": "B", "text": "Degenerative osteoarthritis of the knee"},
            {"label": "C", "text": "Acute gout"},
            {"label": "D", "text": "Meniscal tear from recent trauma"},
        ],
        "image_refs": [],
        "socratic_steps": [
            {
                "key_question": "Which features of the history point toward a chronic, mechanical process?",
                "step_summary": "Pick out the slow progression, activity-related pain, and brief stiffness that characterize degeneration.",
                "associated_image_id": None,
            },
            {
                "key_question": "How do the examination findings argue against inflammatory or infectious causes?",
                "step_summary": "Use the cool joint, bony enlargement, and absent effusion to rule out the acute mimics.",
                "associated_image_id": None,
            },
            {
                "key_question": "What conclusion best explains the whole picture?",
                "step_summary": "Commit to degenerative osteoarthritis as the unifying explanation.",
                "associated_image_id": None,
            },
        ],
    },
]

SCRIPTS = [
    {
        "case_id": "wrist-01",
        "metadata": {
            "case_title": "A bad fall on the ice",
            "demographics": {"age": 34, "gender": "Female"},
            "case_attributes": {
                "modality": "X-ray",
                "body_part": "Wrist",
                "compatible_persona_tags": ["Adult Female", "Accident Victim"],
            },
        },
        "patient_fact_base": {
            "chief_complaint": "I slipped on the ice this morning and caught myself with my right hand, and now my wrist looks crooked and hurts badly.",
            "history_of_present_illness": "I was walking to the bus stop when my feet went out from under me. I put my hand out without thinking. The pain was instant and my wrist started swelling on the way here.",
            "symptom_details": "It throbs all the time and gets much worse if I try to turn my hand. My fingers still move and I can feel everything, it just hurts higher up.",
            "patient_concerns": "I type all day for work, so I need to know if this will heal straight and how long I will be out. And do I need surgery, or can they just set it?",
            "related_images": [
                {"image_id": "Figure A", "patient_perception": "They took one picture from the side; the technician said something about the angle."},
                {"image_id": "Figure B", "patient_perception": "Then another one flat on the table. Nobody has told me yet what they saw."},
            ],
        },
    },
    {
        "case_id": "chest-02",
        "metadata": {
            "case_title": "A strange feeling at the top of my chest",
            "case_attributes": {
                "modality": "X-ray",
                "body_part": "Chest",
                "compatible_persona_tags": ["Adult"],
            },
        },
        "patient_fact_base": {
            "chief_complaint": "I came in because of a sudden odd twinge up near my right shoulder and I feel a little short of breath when I climb stairs.",
            "history_of_present_illness": "It started out of nowhere yesterday evening while I was reading. No fall, no accident. It is not crushing, more like a pulling feeling at the top of my chest.",
            "symptom_details": "Breathing deeply makes the twinge sharper. Sitting still I feel almost normal. No cough, no fever.",
            "patient_concerns": "Mostly I want to know whether this is my heart, and whether I need to stay in the hospital.",
            "related_images": [
                {"image_id": "Figure A", "patient_perception": "They stood me against a cold plate for a picture of my chest."}
            ],
        },
    },
    {
        "case_id": "knee-03",
        "metadata": {
            "case_title": "My knee has been wearing out",
            "demographics": {"age": 67, "gender": "Male"},
            "case_attributes": {
                "modality": None,
                "body_part": "Knee",
                "compatible_persona_tags": ["Senior Male"],
            },
        },
        "patient_fact_base": {
            "chief_complaint": "My right knee has been aching for about three years now and it is slowly getting worse, especially after my walks.",
            "history_of_present_illness": "It crept up on me. First it only hurt after long days on my feet, now even a trip to the shops sets it off. Resting settles it down again.",
            "symptom_details": "It is stiff for a few minutes in the morning, then loosens up. It grinds when I bend it, and the knee looks knobblier than it used to. It never feels hot or swollen.",
            "patient_concerns": "I want to keep walking with my grandchildren. Is this arthritis? Will I need a new knee?",
            "related_images": [],
        },
    },
]

PERSONAS = [
    {
        "persona_id": "Sofia",
        "demographics": {"name": "Sofia", "age": 29, "gender": "Female"},
        "background": {"occupation": "Graphic Designer", "education_level": "University",
                        "description": "Sofia freelances from cafes and is always mid-deadline."},
        "personality_traits": {"core_archetype": "The Anxious Worrier",
                                "communication_style": "fast, worried, asks many what-ifs",
                                "attitude_towards_doctors": "The Authority Worshipper"},
        "style_prompt": "As Sofia, you are anxious and talkative; you imagine worst cases out loud and ask the team to reassure you, deferring to whatever the doctors decide.",
        "persona_tags": ["Adult Female", "Accident Victim", "anxious"],
    },
    {
        "persona_id": "Grace",
        "demographics": {"name": "Grace", "age": 41, "gender": "Female"},
        "background": {"occupation": "Restaurant Manager", "education_level": "Secondary",
                        "description": "Grace runs a busy kitchen and has no patience for delays."},
        "personality_traits": {"core_archetype": "The Pragmatist",
                                "communication_style": "short, direct, outcome-focused",
                                "attitude_towards_doctors": "The Efficiency-Driven Patient"},
        "style_prompt": "As Grace, you are brisk and practical: skip the theory, tell the team what you feel plainly, and keep asking what happens next and when you can work again.",
        "persona_tags": ["Adult Female", "Accident Victim", "pragmatic"],
    },
    {
        "persona_id": "Amelia",
        "demographics": {"name": "Amelia", "age": 36, "gender": "Female"},
        "background": {"occupation": "Librarian", "education_level": "University",
                        "description": "Amelia reads widely and takes careful notes about her own health."},
        "personality_traits": {"core_archetype": "The Inquisitive Analyst",
                                "communication_style": "precise, methodical, references what she has read",
                                "attitude_towards_doctors": "The Cooperative Partner"},
        "style_prompt": "As Amelia, you are calm and methodical; you describe sensations precisely, ask for the reasoning behind each step, and cooperate fully once things are explained.",
        "persona_tags": ["Adult Female", "curious", "methodical"],
    },
    {
        "persona_id": "Victor",
        "demographics": {"name": "Victor", "age": 52, "gender": "Male"},
        "background": {"occupation": "Delivery Driver", "education_level": "Secondary",
                        "description": "Victor spends long days lifting parcels and shrugs off aches."},
        "personality_traits": {"core_archetype": "The Stoic Endurer",
                                "communication_style": "few words, understates pain",
                                "attitude_towards_doctors": "The Cautious Skeptic"},
        "style_prompt": "As Victor, you use few words, downplay your symptoms, and need direct questions before volunteering anything; you quietly doubt whether all these tests are needed.",
        "persona_tags": ["Adult Male", "Accident Victim", "stoic"],
    },
    {
        "persona_id": "Harold",
        "demographics": {"name": "Harold", "age": 71, "gender": "Male"},
        "background": {"occupation": "Retired Teacher", "education_level": "University",
                        "description": "Harold taught history for decades and enjoys a good explanation."},
        "personality_traits": {"core_archetype": "The Inquisitive Analyst",
                                "communication_style": "storytelling, digresses, then circles back",
                                "attitude_towards_doctors": "The Cooperative Partner"},
        "style_prompt": "As Harold, you tell your story with digressions and dates, enjoy understanding the why, and treat the team like bright students you are happy to help.",
        "persona_tags": ["Senior Male", "curious"],
    },
    {
        "persona_id": "Walter",
        "demographics": {"name": "Walter", "age": 64, "gender": "Male"},
        "background": {"occupation": "Farmer", "education_level": "Primary",
                        "description": "Walter has worked his land all his life and mistrusts fuss."},
        "personality_traits": {"core_archetype": "The Skeptic/Complainer",
                                "communication_style": "gruff, complains about waiting rooms",
                                "attitude_towards_doctors": "The Cautious Skeptic"},
        "style_prompt": "As Walter, you are gruff and skeptical; you grumble about the process, compare everything to remedies that worked on the farm, and need convincing before you agree.",
        "persona_tags": ["Senior Male", "skeptical"],
    },
    {
        "persona_id": "Priya",
        "demographics": {"name": "Priya", "age": 26, "gender": "Female"},
        "background": {"occupation": "University Student", "education_level": "University",
                        "description": "Priya is finishing a biology degree and self-diagnoses online."},
        "personality_traits": {"core_archetype": "The Dramatizer",
                                "communication_style": "vivid, exaggerated, emotional",
                                "attitude_towards_doctors": "The Internet Self-Diagnoser"},
        "style_prompt": "As Priya, you describe symptoms vividly and dramatically, mention what you found online, and swing between alarm and relief as the discussion moves.",
        "persona_tags": ["Adult Female", "Young Adult", "dramatic"],
    },
    {
        "persona_id": "Omar",
        "demographics": {"name": "Omar", "age": 38, "gender": "Male"},
        "background": {"occupation": "IT Engineer", "education_level": "University",
                        "description": "Omar debugs systems for a living and treats his body the same way."},
        "personality_traits": {"core_archetype": "The Optimist",
                                "communication_style": "cheerful, jokes, analytic when pressed",
                                "attitude_towards_doctors": "The Cooperative Partner"},
        "style_prompt": "As Omar, you stay upbeat and joke a little, but you answer questions carefully and like to think of your symptoms as a bug report: inputs, outputs, timing.",
        "persona_tags": ["Adult Male", "Adult", "optimistic"],
    },
]

STUDENTS = [
    ("James", "Male", "Year 1 Medical Student", "Beginner", ["Solid Theoretical Foundation"],
     ["Weak in Clinical Correlation"], "Guidance-dependent", "The Insecure Follower",
     "James tends to agree with confident peers and rarely voices his own opinion.",
     "You can recite textbook definitions accurately, but you struggle to connect theory to the live case and you defer to others unless the teacher asks you directly."),
    ("Jennifer", "Female", "Year 4 Medical Student", "Intermediate", ["Diligent and Inquisitive"],
     ["Inflexible Knowledge Application"], "Cautious-verifier", "The Silent Observer",
     "Jennifer listens closely and speaks up only when she feels certain.",
     "You research thoroughly and ask deep questions, but your thinking is rigid on atypical cases and you hold back until you have gathered every detail."),
    ("Robert", "Male", "Year 5 Medical Student", "Advanced", ["Strong Logical Reasoning"],
     ["Lacks Thoroughness"], "Bold-hypothesizer", "The Active Leader",
     "Robert organizes the discussion and proposes directions early.",
     "You chain clues into confident early hypotheses and like to set the team's direction, but you sometimes anchor on your first idea and skip the systematic rule-out."),
    ("Mary", "Female", "Year 2 Medical Student", "Beginner", ["Diligent and Inquisitive"],
     ["Prone to Anxiety / Lacks Confidence"], "Guidance-dependent", "The Insecure Follower",
     "Mary hedges her statements and seeks reassurance before committing.",
     "You work hard and notice details, but you hedge with maybes, speak quietly, and need encouragement before sharing your real opinion."),
    ("Michael", "Male", "Year 4 Medical Student", "Intermediate", ["Sharp Radiological Observation"],
     ["Lacks Thoroughness / Tunnel Vision"], "Bold-hypothesizer", "The Challenger",
     "Michael spots image findings fast and challenges the consensus.",
     "You have a keen eye for images and jump on visual findings quickly, but once you see one abnormality you tend to stop looking for others, and you enjoy contradicting the group."),
    ("Elizabeth", "Female", "Year 6 Medical Student", "Advanced", ["Strong Logical Reasoning", "Solid Theoretical Foundation"],
     ["Insufficient Communication Skills"], "Data-driven", "The Silent Observer",
     "Elizabeth reasons precisely but speaks in dense jargon when she does.",
     "Your reasoning is systematic and evidence-weighted, but you communicate in compressed jargon and may miss what the patient's plain words are telling you."),
    ("William", "Male", "Year 3 Medical Student", "Intermediate", ["Solid Theoretical Foundation"],
     ["Weak in Clinical Correlation"], "Cautious-verifier", "The Insecure Follower",
     "William summarizes the textbook well but waits for others to apply it.",
     "You know the classic presentations by heart, yet you hesitate to map them onto this specific patient and usually endorse whatever the leader proposes."),
    ("Patricia", "Female", "Year 5 Medical Student", "Advanced", ["Sharp Radiological Observation"],
     ["Inflexible Knowledge Application"], "Data-driven", "The Active Leader",
     "Patricia drives the team through the objective findings first.",
     "You lead with the objective data, reading images and numbers carefully, but you can dismiss soft clinical clues that do not fit the classic pattern."),
    ("David", "Male", "Year 2 Medical Student", "Beginner", ["Diligent and Inquisitive"],
     ["Insufficient Communication Skills"], "Guidance-dependent", "The Challenger",
     "David asks blunt questions that sometimes derail the flow.",
     "You ask blunt, persistent questions about anything unclear, which is useful but can pull the discussion off its track; you need structure from the teacher."),
    ("Linda", "Female", "Year 4 Medical Student", "Intermediate", ["Strong Logical Reasoning"],
     ["Prone to Anxiety / Lacks Confidence"], "Cautious-verifier", "The Silent Observer",
     "Linda reasons well privately and shares conclusions reluctantly.",
     "Your private reasoning is sound and stepwise, but you doubt yourself aloud, qualify every statement, and often let others take credit for ideas you had first."),
    ("Charles", "Male", "Year 6 Medical Student", "Advanced", ["Strong Logical Reasoning"],
     ["Lacks Thoroughness"], "Bold-hypothesizer", "The Challenger",
     "Charles pressure-tests every claim the team makes.",
     "You cross-examine the team's claims and propose sharp alternatives, but you would rather win the argument than complete the checklist."),
    ("Barbara", "Female", "Year 3 Medical Student", "Intermediate", ["Sharp Radiological Observation"],
     ["Weak in Clinical Correlation"], "Data-driven", "The Insecure Follower",
     "Barbara describes images well but defers on what they mean.",
     "You describe what you see on images carefully and accurately, but you defer interpretation to stronger voices and rarely connect findings to management."),
]


def write_sample_data() -> None:
    cases_dir = DATA / "cases"
    cases_dir.mkdir(parents=True, exist_ok=True)
    for case in CASES:
        (cases_dir / f"{case['case_id']}.case.json").write_text(canonical_json(case), encoding="utf-8")
    for script in SCRIPTS:
        (cases_dir / f"{script['case_id']}.script.json").write_text(canonical_json(script), encoding="utf-8")
    (DATA / "personas.json").write_text(canonical_json(PERSONAS), encoding="utf-8")
    students = [
        {
            "student_id": sid,
            "demographics": {"gender": gender, "year_of_study": year},
            "knowledge_profile": {
                "level": level,
                "strengths": strengths,
                "weaknesses": weaknesses,
                "learning_style": style,
            },
            "personality_profile": {"archetype": archetype, "description": description},
            "behavioral_prompt": prompt,
        }
        for sid, gender, year, level, strengths, weaknesses, style, archetype, description, prompt in STUDENTS
    ]
    (DATA / "students.json").write_text(canonical_json(students), encoding="utf-8")
    (DATA / "demo-config.json").write_text(
        canonical_json(
            {
                "cases_dir": "data/cases",
                "personas": "data/personas.json",
                "students": "data/students.json",
                "out_dir": "out",
                "role_bindings": {"*": "synthetic"},
                "backends": {},
            }
        ),
        encoding="utf-8",
    )


# ---------------------------------------------------------------------------
# Golden scripted fixture + transcript (3 students, 2 rounds, seed 7)
# ---------------------------------------------------------------------------

GOLDEN_SEED = 7
GOLDEN_CASE = "wrist-01"


def golden_config() -> SessionConfig:
    return SessionConfig(
        case_id=GOLDEN_CASE,
        n_students=3,
        max_rounds=2,
        review_max_retries=3,
        rng_seed=GOLDEN_SEED,
        backends={"*": "scripted:tests/data/golden_fixture.json"},
    )


def build_golden_fixture(cohort: list[str]) -> dict:
    """Keyed canned replies for the committed 3-student 2-round session."""
    s1, s2, s3 = cohort

    def monologue(round_index: int, image_line: str) -> str:
        per_student = "".join(
            f'<think_student student_id="{sid}">{sid} contributed a round-{round_index} reading; '
            f"push them from impression toward evidence.</think_student>"
            for sid in cohort
        )
        return (
            f"<think_history>Round {round_index}: the team has reported and the picture is forming.</think_history>"
            f"<think_question>Target the next milestone on the case roadmap without revealing it.</think_question>"
            f"{per_student}"
            f"<think_group>The group shares a direction but has not tested it against the films.</think_group>"
            f"<think_image>{image_line}</think_image>"
        )

    replies = {
        f"StudentAnalysis/1/{s1}": {
            "analysis_for_teacher": "The deformity after a fall on an outstretched hand makes me think of a break near the wrist end of the forearm; I want the films before saying more."
        },
        f"StudentAnalysis/1/{s2}": {
            "analysis_for_teacher": "Intact sensation and refill reassure me; my worry is how tilted the broken piece is, which decides how it gets fixed."
        },
        f"StudentAnalysis/1/{s3}": {
            "analysis_for_teacher": "Classic mechanism for a distal forearm fracture; I would check the side view first for the direction of tilt."
        },
        "TutorGuidance/1": {
            "internal_monologue": monologue(1, "They have not yet committed to what Figure A shows about angulation; that is the lever."),
            "guidance": "Strong start, everyone. Before we name the injury: looking at Figure A together, what exactly is the far fragment doing, and why would that change what we do next?",
        },
        "SpecialistFactCheck/1": {"is_correct": True, "feedback": ""},
        "Safety/1": {"is_safe": True, "issue_category": None, "feedback_and_suggestion": ""},
        f"StudentAction/1/{s1}": {
            "query_for_patient": "Can you tell me exactly how your hand hit the ground, and whether the wrist looked crooked right away?",
            "query_for_expert": None,
        },
        f"StudentAction/1/{s2}": {
            "query_for_patient": None,
            "query_for_expert": "What degree of dorsal angulation is generally considered acceptable after reduction of a distal radius fracture?",
        },
        f"StudentAction/1/{s3}": {
            "query_for_patient": "Is the pain worse when you try to turn your palm up or down?",
            "query_for_expert": "What does comminution mean on a radiograph report?",
        },
        f"SpecialistKnowledge/1/{s2}": {
            "answer_provided": True,
            "explanation": "Commonly cited thresholds accept up to roughly 10 degrees of dorsal angulation relative to the articular surface norm after reduction; beyond that, loss of alignment and function becomes likely.",
        },
        f"SpecialistKnowledge/1/{s3}": {
            "answer_provided": True,
            "explanation": "Comminution: a fracture in which the bone is broken into more than two fragments, typically indicating higher-energy injury and reduced intrinsic stability.",
        },
        "Patient/1": {
            "response": "It all happened so fast - my palm smacked flat on the pavement and yes, the wrist looked bent the wrong way almost immediately. Turning my palm up is the worst; I nearly shouted when the nurse tried. Please tell me it can be set straight."
        },
        f"StudentAnalysis/2/{s1}": {
            "analysis_for_teacher": "The immediate deformity and pain on turning the palm fit a tilted, unstable far fragment; the side film should confirm the direction."
        },
        f"StudentAnalysis/2/{s2}": {
            "analysis_for_teacher": "With the expert's threshold in mind, I want to measure the tilt on Figure A; if it is well past ten degrees with crumbling, setting it may not hold."
        },
        f"StudentAnalysis/2/{s3}": {
            "analysis_for_teacher": "Pain on rotation plus the mechanism suggests the joint surface may be involved; Figure B should show any shortening or splitting."
        },
        "TutorGuidance/2": {
            "internal_monologue": monologue(2, "Both films are now in play; connect the lateral tilt on Figure A with the comminution check on Figure B."),
            "guidance": "You are converging nicely. Here is the team question: combining the tilt you read on Figure A with what Figure B shows about the fragment pieces, what would have to be true for a simple set-and-cast to fail this patient?",
        },
        "SpecialistFactCheck/2": {"is_correct": True, "feedback": ""},
        "Safety/2": {"is_safe": True, "issue_category": None, "feedback_and_suggestion": ""},
        f"StudentAction/2/{s1}": {
            "query_for_patient": "Have you noticed any numbness or tingling in your fingers since the swelling came up?",
            "query_for_expert": None,
        },
        f"StudentAction/2/{s2}": {"query_for_patient": None, "query_for_expert": None},
        f"StudentAction/2/{s3}": {"query_for_patient": None, "query_for_expert": None},
        "Patient/2": {
            "response": "No numbness, thank goodness - my fingers feel like mine, just the wrist screams when anything moves it. The swelling is tight but the tingling you mention has not happened."
        },
    }
    return {"mode": "keyed", "replies": replies}


def write_golden() -> None:
    TESTS_DATA.mkdir(parents=True, exist_ok=True)
    store = load_persona_store(DATA / "personas.json", DATA / "students.json")
    config = golden_config()
    session_id = f"{GOLDEN_CASE}-seed{GOLDEN_SEED}"
    cohort = [
        s.student_id
        for s in sample_cohort(store, 3, derive_seed(GOLDEN_SEED, f"cohort:{session_id}"))
    ]
    fixture = build_golden_fixture(cohort)
    fixture_path = TESTS_DATA / "golden_fixture.json"
    fixture_path.write_text(canonical_json(fixture), encoding="utf-8")

    with open(DATA / "cases" / f"{GOLDEN_CASE}.case.json", encoding="utf-8") as fh:
        case = CaseRecord.model_validate(json.load(fh))
    with open(DATA / "cases" / f"{GOLDEN_CASE}.script.json", encoding="utf-8") as fh:
        script = PatientScript.model_validate(json.load(fh))

    recorder = ExchangeRecorder()
    session = Session(
        config, case, script, store,
        {"*": ScriptedBackend(fixture_path)},
        gateway=Gateway(recorder=recorder),
        clock=lambda: FIXED_CLOCK,
    )
    transcript = session.run()
    (TESTS_DATA / "golden_transcript.json").write_text(model_json(transcript), encoding="utf-8")
    print(f"golden cohort: {cohort}")
    print(f"rounds: {len(transcript.rounds)}; events: {len(session.events)}")


if __name__ == "__main__":
    write_sample_data()
    write_golden()
    print("fixtures written")

"""Multi-agent ward-round teaching simulator.

A patient, a cohort of simulated students, a Socratic tutor, and two
reviewers play out clinical case discussions round by round; transcripts feed
a rubric-with-veto reward, group-relative advantage math, a judged
interactive evaluation, and teaching-dialogue corpus export.
"""

from .errors import (
    AuthFailure,
    BackendTimeout,
    BackendUnavailable,
    CohortTooLarge,
    ConfigMismatch,
    DomainError,
    DuplicateIdAfterRetry,
    FixtureExhausted,
    FixtureKeyMissing,
    InvalidCase,
    MalformedReply,
    NoCompatiblePersona,
    WardsimError,
)
from .evaluation import (
    EvalAggregate,
    EvalScore,
    RatingMatrix,
    SessionTemplate,
    band_matrix,
    fleiss_kappa,
    import_rating_matrix,
    judge_transcript,
    run_evaluation,
)
from .gateway import (
    AgentRequest,
    ExchangeRecorder,
    Gateway,
    HttpBackend,
    Role,
    ScriptedBackend,
    parse_reply,
)
from .models import (
    CaseRecord,
    ImageRef,
    ParsedMonologue,
    PatientPersona,
    PatientScript,
    ReviewVerdict,
    RoundRecord,
    SocraticStep,
    StudentProfile,
    Transcript,
    TutorTurn,
    validate_case,
)
from .monologue import MonologueReport, is1_score, parse_monologue, render_monologue
from .orchestrator import Event, Phase, Session, SessionConfig, init_session, run_round
from .reward import (
    GrpoEvalInput,
    GrpoGroup,
    RewardConfig,
    RubricScorecard,
    ScoringContext,
    compute_advantages,
    export_training_records,
    final_reward,
    grpo_objective,
    score_sample,
)
from .stores import PersonaStore, load_persona_store, match_persona, sample_cohort

__version__ = "0.1.0"

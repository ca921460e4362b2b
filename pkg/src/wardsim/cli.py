"""Command-line entry points.

Exit codes: 0 ok, 2 usage error, 3 backend failure, 4 validation failure.
Failures print one machine-readable JSON object on stderr.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import (
    AppConfig,
    list_case_ids,
    load_case_bundle,
    load_config,
    resolve_backend,
    resolve_role_backends,
)
from .errors import (
    AuthFailure,
    BackendTimeout,
    BackendUnavailable,
    CohortTooLarge,
    FixtureExhausted,
    FixtureKeyMissing,
    InvalidCase,
    MalformedReply,
    NoCompatiblePersona,
    WardsimError,
)
from .evaluation import (
    SessionTemplate,
    band_matrix,
    fleiss_kappa,
    import_rating_matrix,
    run_evaluation,
)
from .gateway import ExchangeRecorder, Gateway
from .models import CaseRecord, ImageRef, Transcript, canonical_json, model_json
from .orchestrator import Session, SessionConfig
from .pipeline import (
    BatchState,
    decompose_question,
    export_dialogues,
    generate_patient_script,
    generate_personas,
    write_jsonl,
)
from .reward import RewardConfig, ScoringContext, final_reward, score_sample
from .stores import load_persona_store

_BACKEND_ERRORS = (
    BackendUnavailable,
    AuthFailure,
    BackendTimeout,
    MalformedReply,
    FixtureExhausted,
    FixtureKeyMissing,
)
_VALIDATION_ERRORS = (InvalidCase, NoCompatiblePersona, CohortTooLarge)


def _fail(code: int, message: str, kind: str) -> None:
    sys.stderr.write(json.dumps({"error": message, "kind": kind}) + "\n")
    sys.exit(code)


def _guard(fn):
    """Map package errors onto the exit-code contract."""

    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except FileNotFoundError as exc:
            _fail(2, str(exc), "NotFound")
        except _VALIDATION_ERRORS as exc:
            _fail(4, str(exc), type(exc).__name__)
        except _BACKEND_ERRORS as exc:
            _fail(3, str(exc), type(exc).__name__)
        except WardsimError as exc:
            _fail(4, str(exc), type(exc).__name__)
        except ValueError as exc:
            _fail(2, str(exc), "Usage")

    wrapper.__name__ = fn.__name__
    return wrapper


@click.group()
def main() -> None:
    """Multi-agent ward-round teaching simulator."""


@main.command()
@click.option("--case", "case_id", required=True, help="case id in the cases directory")
@click.option("--students", type=click.IntRange(min=1), default=3, show_default=True)
@click.option("--rounds", type=click.IntRange(min=1), default=2, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--backend", "backend_spec", required=True, help="default backend for all roles")
@click.option("--out", "out_dir", type=click.Path(), default="out", show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--review-retries", type=click.IntRange(min=0), default=3, show_default=True)
@_guard
def simulate(case_id, students, rounds, seed, backend_spec, out_dir, config_path, review_retries):
    """Run one scripted or live simulation session and write its transcript."""
    config = load_config(config_path)
    case, script = load_case_bundle(config.cases_dir, case_id)
    store = load_persona_store(config.personas, config.students)
    backends = resolve_role_backends(backend_spec, config)

    recorder = ExchangeRecorder()
    session_config = SessionConfig(
        case_id=case_id,
        n_students=students,
        max_rounds=rounds,
        review_max_retries=review_retries,
        rng_seed=seed,
        backends={"*": backend_spec, **config.role_bindings},
    )
    session = Session(
        session_config, case, script, store, backends,
        gateway=Gateway(max_in_flight=config.max_in_flight, recorder=recorder),
        recorder=recorder,
    )
    transcript = session.run()

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    transcript_path = out / f"{transcript.session_id}.transcript.json"
    transcript_path.write_text(model_json(transcript), encoding="utf-8")
    recorder.write(out / f"{transcript.session_id}.exchanges.jsonl")
    click.echo(str(transcript_path))


@main.command()
@click.option("--in", "input_path", required=True, type=click.Path(exists=True),
              help="JSON file with tutor_output and scoring context")
@click.option("--judges", "judges_spec", required=True, help="judge backend spec")
@click.option("--out", "out_dir", type=click.Path(), default="out", show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@_guard
def score(input_path, judges_spec, out_dir, config_path, seed):
    """Score one tutor output against the rubric and compute its reward."""
    from .reporting import save_reward_report

    config = load_config(config_path)
    with open(input_path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    context = ScoringContext.model_validate(payload["context"])
    judge_backend = resolve_backend(judges_spec, config)

    card = score_sample(payload["tutor_output"], context, judge_backend)
    reward_cfg = RewardConfig.model_validate(payload.get("reward_config", {}))
    reward = final_reward(card, reward_cfg)
    paths = save_reward_report(card, reward, out_dir)
    click.echo(canonical_json({"final_reward": reward, "scores": card.scores,
                               "report": str(paths["json"])}).strip())


@main.command()
@click.option("--cases", "cases_dir", required=True, type=click.Path(exists=True))
@click.option("--runs", type=click.IntRange(min=1), default=3, show_default=True)
@click.option("--tutor", "tutor_spec", required=True, help="backend under evaluation")
@click.option("--backend", "backend_spec", required=True, help="backend for simulated agents")
@click.option("--judges", "judges_spec", required=True, help="judge backend spec")
@click.option("--students", type=click.IntRange(min=1), default=3, show_default=True)
@click.option("--rounds", type=click.IntRange(min=1), default=2, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), default="out", show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@_guard
def evaluate(cases_dir, runs, tutor_spec, backend_spec, judges_spec, students, rounds, seed,
             out_dir, config_path):
    """Interactive evaluation: fresh sessions per case per run, judged 1-10."""
    from .reporting import save_eval_report

    config = load_config(config_path)
    store = load_persona_store(config.personas, config.students)
    case_ids = list_case_ids(cases_dir)
    if not case_ids:
        raise click.UsageError(f"no cases found in {cases_dir}")
    bundles = [load_case_bundle(cases_dir, cid) for cid in case_ids]

    template = SessionTemplate(
        store=store,
        backends=resolve_role_backends(backend_spec, config),
        judge_backend=resolve_backend(judges_spec, config),
        n_students=students,
        max_rounds=rounds,
        base_seed=seed,
        gateway=Gateway(max_in_flight=config.max_in_flight),
    )
    aggregate = run_evaluation(resolve_backend(tutor_spec, config), bundles, runs, template)
    paths = save_eval_report(aggregate, out_dir)
    click.echo(canonical_json({"table": aggregate.table(), "report": str(paths["json"])}).strip())


@main.command("gen-data")
@click.option("--stage", type=click.Choice(["decompose", "script", "personas", "export"]),
              required=True)
@click.option("--in", "input_path", type=click.Path(), default=None,
              help="qa JSONL (decompose), cases dir (script), transcripts dir (export)")
@click.option("--cases", "cases_dir", type=click.Path(), default=None,
              help="cases directory (script/export stages)")
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--backend", "backend_spec", default=None)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--kind", type=click.Choice(["patient", "student"]), default="patient",
              show_default=True, help="personas stage: record kind")
@click.option("-n", "count", type=click.IntRange(min=1), default=10, show_default=True,
              help="personas stage: batch size")
@click.option("--mode", type=click.Choice(["single_turn", "multi_turn"]), default="single_turn",
              show_default=True, help="export stage: record shape")
@click.option("--no-filter", is_flag=True, help="export stage: keep flagged rounds")
@click.option("--state", "state_path", type=click.Path(), default=None,
              help="resume state file for long generation jobs")
@click.option("--seed", type=int, default=0, show_default=True)
@_guard
def gen_data(stage, input_path, cases_dir, out_path, backend_spec, config_path, kind, count,
             mode, no_filter, state_path, seed):
    """Offline data generation stages (decompose / script / personas / export)."""
    config = load_config(config_path)
    backend = resolve_backend(backend_spec, config) if backend_spec else None

    if stage in ("decompose", "script", "personas") and backend is None:
        raise click.UsageError(f"--backend is required for stage {stage}")

    if stage == "decompose":
        if not input_path:
            raise click.UsageError("--in QA_JSONL is required for decompose")
        out_dir = Path(out_path)
        out_dir.mkdir(parents=True, exist_ok=True)
        state = BatchState(state_path) if state_path else None
        done = 0
        with open(input_path, "r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                raw = json.loads(line)
                case = CaseRecord(
                    case_id=raw.get("case_id") or raw.get("id"),
                    question=raw["question"],
                    answer=str(raw["answer"]),
                    answer_choices=raw.get("answer_choices"),
                    image_refs=[
                        ImageRef(id=i, locator=i) if isinstance(i, str) else ImageRef(**i)
                        for i in raw.get("images", raw.get("image_refs", []))
                    ],
                )
                if state and case.case_id in state.completed:
                    continue
                steps = decompose_question(case, backend)
                case = case.model_copy(update={"socratic_steps": steps})
                (out_dir / f"{case.case_id}.case.json").write_text(model_json(case), encoding="utf-8")
                if state:
                    state.mark(case.case_id)
                done += 1
        click.echo(canonical_json({"stage": "decompose", "cases_written": done}).strip())

    elif stage == "script":
        source = Path(cases_dir or input_path or config.cases_dir)
        out_dir = Path(out_path)
        out_dir.mkdir(parents=True, exist_ok=True)
        state = BatchState(state_path) if state_path else None
        done, warned = 0, 0
        for cid in list_case_ids(source):
            if state and cid in state.completed:
                continue
            with open(source / f"{cid}.case.json", "r", encoding="utf-8") as fh:
                case = CaseRecord.model_validate(json.load(fh))
            result = generate_patient_script(case, backend)
            warned += bool(result.warnings)
            (out_dir / f"{cid}.script.json").write_text(model_json(result.script), encoding="utf-8")
            if state:
                state.mark(cid)
            done += 1
        click.echo(canonical_json({"stage": "script", "scripts_written": done,
                                   "demographic_warnings": warned}).strip())

    elif stage == "personas":
        records = generate_personas(kind, count, backend, store_path=out_path)
        click.echo(canonical_json({"stage": "personas", "kind": kind,
                                   "records_appended": len(records)}).strip())

    else:  # export
        if not input_path:
            raise click.UsageError("--in TRANSCRIPTS_DIR is required for export")
        source = Path(cases_dir or config.cases_dir)
        transcripts = []
        for path in sorted(Path(input_path).glob("*.transcript.json")):
            with open(path, "r", encoding="utf-8") as fh:
                transcripts.append(Transcript.model_validate(json.load(fh)))
        cases = {}
        for t in transcripts:
            if t.case_id not in cases:
                cases[t.case_id], _ = load_case_bundle(source, t.case_id)
        report = export_dialogues(transcripts, cases, mode, quality_filter=not no_filter)
        write_jsonl(report.records, out_path)
        click.echo(canonical_json({
            "stage": "export", "mode": mode, "records": len(report.records),
            "skipped_rounds": report.skipped_rounds, "skipped_sessions": report.skipped_sessions,
        }).strip())


@main.command()
@click.option("--sheets", multiple=True, required=True, type=click.Path(exists=True),
              help="one filled rating CSV per rater")
@click.option("--dimension", type=click.Choice(["ETS", "MSM", "MPS"]), required=True)
@click.option("--banded", is_flag=True, help="collapse 1-10 ratings into tiers first")
@_guard
def agreement(sheets, dimension, banded):
    """Fleiss' kappa over re-imported human rating sheets."""
    matrix = import_rating_matrix(list(sheets), dimension)
    if banded:
        matrix = band_matrix(matrix)
    result = fleiss_kappa(matrix)
    click.echo(canonical_json({"dimension": dimension, "kappa": result.value,
                               "degenerate": result.degenerate, "banded": banded}).strip())


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8400, show_default=True)
def serve(config_path, host, port):
    """Run the live session service the web client talks to."""
    import uvicorn

    from .service import create_app

    app = create_app(load_config(config_path))
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()

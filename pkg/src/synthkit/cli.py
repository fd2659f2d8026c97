"""Command-line entry points: init, run, rate, serve, export.

The whole pipeline is drivable from here without the HTTP service:
`synthkit init` creates a project, `synthkit run` takes it through the
stages, `synthkit export` dumps every durable artifact as JSON. `rate`
judges requirement coverage for arbitrary item files, and `serve` exposes
the gateway (plus the built web UI when present).
"""

import json
import logging
import os
from typing import Optional

import click

from . import democorpus
from .config import ConfigError, ProjectConfig, apply_overrides, config_to_dict
from .evolution import lineage_export
from .model import ProblemStatement
from .pipeline import STAGES, Pipeline, PipelineError
from .policy import evidence_export
from .providers import live_hub, offline_hub
from .rater import Rater, RaterError, aggregate, requirements_from_file, subjects_from_file
from .research import FixtureFetcher, LiveFetcher
from .store import ProjectStore, StoreError

log = logging.getLogger(__name__)


def _parse_sets(pairs) -> dict:
    """Turn repeated `--set path=value` flags into an override mapping.

    Values parse as JSON when possible (numbers, booleans, lists) and fall
    back to plain strings.
    """
    overrides = {}
    for raw in pairs:
        path, sep, value = raw.partition("=")
        if not sep or not path.strip():
            raise click.BadParameter(f"--set expects path=value, got {raw!r}")
        try:
            overrides[path.strip()] = json.loads(value)
        except json.JSONDecodeError:
            overrides[path.strip()] = value
    return overrides


def _corpus_path(project_dir: str, corpus: Optional[str]) -> str:
    path = corpus or os.path.join(project_dir, "corpus")
    if not os.path.isdir(path):
        raise click.ClickException(
            f"no fixture corpus at {path}; create the project with"
            " `--offline init` or point --corpus at one"
        )
    return path


def _resolved_seed(obj: dict, config: ProjectConfig) -> int:
    return obj["seed"] if obj["seed"] is not None else config.seed


def _echo_event(kind: str, payload: dict) -> None:
    if kind == "node_started":
        click.echo(f"-> {payload['node']}")
    elif kind == "generation_done":
        click.echo(
            f"   {payload['subproblem_id']} {payload['kind']}"
            f" generation {payload['index']}: {payload['members']} members"
        )
    elif kind == "warning":
        click.echo(f"   warning: {payload['message']}", err=True)


def project_export(store: ProjectStore) -> dict:
    """One JSON document with every durable artifact of a project."""
    reports = store.generation_reports("solution") + store.generation_reports("policy")
    return {
        "project_id": store.project_id,
        "created_at": store.created_at,
        "statement": store.statement.to_dict(),
        "config": config_to_dict(store.config()),
        "stages_done": store.stages_done(),
        "subproblems": [sp.to_dict() for sp in store.subproblems()],
        "solutions": [s.to_dict() for s in store.solutions()],
        "policies": [p.to_dict() for p in store.policies()],
        "queries": [q.to_dict() for q in store.queries()],
        "sources": [s.to_dict() for s in store.sources()],
        "judgments": [j.to_dict() for j in store.judgments()],
        "reports": [r.to_dict() for r in reports],
        "lineage": {
            sp.id: lineage_export(store, sp.id) for sp in store.subproblems()
        },
        "evidence": {
            p.id: evidence_export(store, p.id) for p in store.policies() if p.evidence
        },
        "tournaments": [
            store.export_tournament(tid) for tid in sorted(store.tournaments())
        ],
    }


@click.group()
@click.option(
    "--project",
    "project_dir",
    default=".",
    show_default=True,
    type=click.Path(file_okay=False),
    help="Project directory.",
)
@click.option("--seed", default=None, type=int, help="Override the project seed.")
@click.option(
    "--offline",
    is_flag=True,
    help="Use deterministic mock providers and a fixture corpus instead of live endpoints.",
)
@click.option("-v", "--verbose", count=True, help="-v for info, -vv for debug logging.")
@click.pass_context
def main(ctx, project_dir, seed, offline, verbose):
    """Decompose a problem, evolve solutions, and synthesize policies."""
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = {"project": project_dir, "seed": seed, "offline": offline}


@main.command()
@click.argument("statement", required=False)
@click.option(
    "--statement-file",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Read the problem statement from a file instead.",
)
@click.option(
    "--ranking-guidance",
    default="",
    help="Extra instruction for pairwise ranking prompts.",
)
@click.option("--project-id", default=None, help="Explicit id [default: from directory name].")
@click.option(
    "--set",
    "overrides",
    multiple=True,
    metavar="PATH=VALUE",
    help="Config override, e.g. --set evolution.generations=5 (repeatable).",
)
@click.pass_obj
def init(obj, statement, statement_file, ranking_guidance, project_id, overrides):
    """Create a project from a problem STATEMENT."""
    if statement and statement_file:
        raise click.UsageError("give STATEMENT or --statement-file, not both")
    if statement_file:
        with open(statement_file, "r", encoding="utf-8") as fh:
            statement = fh.read().strip()
    if not statement:
        raise click.UsageError("provide STATEMENT or --statement-file")

    sets = _parse_sets(overrides)
    if obj["seed"] is not None:
        sets.setdefault("seed", obj["seed"])
    try:
        config = apply_overrides(ProjectConfig(), sets)
    except ConfigError as exc:
        raise click.ClickException(str(exc)) from None

    try:
        store = ProjectStore.create(
            obj["project"],
            ProblemStatement(text=statement, ranking_guidance=ranking_guidance),
            config=config,
            project_id=project_id,
        )
    except StoreError as exc:
        raise click.ClickException(str(exc)) from None
    try:
        if obj["offline"]:
            corpus = democorpus.write_corpus(os.path.join(obj["project"], "corpus"))
            click.echo(f"wrote fixture corpus to {corpus}")
        click.echo(f"created {store.project_id} at {obj['project']}")
    finally:
        store.close()


@main.command()
@click.option(
    "--stage",
    type=click.Choice(STAGES + ("all",)),
    default="all",
    show_default=True,
    help="Run one stage or everything up to evidence.",
)
@click.option(
    "--corpus",
    type=click.Path(file_okay=False),
    default=None,
    help="Fixture corpus for --offline runs [default: PROJECT/corpus].",
)
@click.option(
    "--set",
    "overrides",
    multiple=True,
    metavar="PATH=VALUE",
    help="Per-run config override (repeatable).",
)
@click.pass_obj
def run(obj, stage, corpus, overrides):
    """Run pipeline stages against the project."""
    try:
        store = ProjectStore.open(obj["project"])
    except StoreError as exc:
        raise click.ClickException(str(exc)) from None
    try:
        config = store.config()
        seed = _resolved_seed(obj, config)
        if obj["offline"]:
            corpus_dir = _corpus_path(obj["project"], corpus)
            hub = offline_hub(config, seed=seed, corpus_dir=corpus_dir)
            fetcher = FixtureFetcher(corpus_dir)
        else:
            hub = live_hub(config)
            fetcher = LiveFetcher(config.research.user_agent)
        pipeline = Pipeline(
            hub,
            store,
            fetcher,
            seed=seed,
            on_event=_echo_event,
            config_overrides=_parse_sets(overrides) or None,
        )
        if stage == "all":
            pipeline.run()
        else:
            pipeline.run_stage(stage)
    except (PipelineError, ConfigError) as exc:
        raise click.ClickException(str(exc)) from None
    finally:
        store.close()
    click.echo("stages done: " + ", ".join(s for s in STAGES if s in _done(obj)))


def _done(obj) -> dict:
    store = ProjectStore.open(obj["project"], read_only=True)
    try:
        return store.stages_done()
    finally:
        store.close()


@main.command()
@click.argument("requirements_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("subjects_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--judge-id", default="judge-deep", show_default=True)
@click.option(
    "--max-failure-fraction",
    default=0.1,
    show_default=True,
    help="Abort when more than this fraction of pairs fails.",
)
@click.option(
    "--out",
    type=click.Path(dir_okay=False),
    default=None,
    help="Also write rows, records, and failures as JSON.",
)
@click.pass_obj
def rate(obj, requirements_file, subjects_file, judge_id, max_failure_fraction, out):
    """Judge how far each subject covers each requirement."""
    requirements = requirements_from_file(requirements_file)
    subjects = subjects_from_file(subjects_file)
    seed = obj["seed"] if obj["seed"] is not None else 0
    hub = offline_hub(seed=seed) if obj["offline"] else live_hub(ProjectConfig())
    rater = Rater(hub, judge_id=judge_id)
    try:
        records = rater.run_matrix(
            requirements, subjects, max_failure_fraction=max_failure_fraction
        )
    except (RaterError, ValueError) as exc:
        raise click.ClickException(str(exc)) from None
    table = aggregate(records, requirements=requirements)
    click.echo(table.render_text())
    if rater.failures:
        click.echo(f"{len(rater.failures)} pair(s) failed to judge", err=True)
    if out:
        doc = {
            "table": table.to_dict(),
            "records": [r.to_dict() for r in records],
            "failures": rater.failures,
        }
        with open(out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, ensure_ascii=False)
        click.echo(f"wrote {out}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.option(
    "--corpus",
    type=click.Path(file_okay=False),
    default=None,
    help="Fixture corpus for --offline runs [default: PROJECT/corpus].",
)
@click.option(
    "--static",
    "static_dir",
    type=click.Path(file_okay=False),
    default=None,
    help="Built web UI to serve at / [default: ./frontend/dist when present].",
)
@click.pass_obj
def serve(obj, host, port, corpus, static_dir):
    """Serve the HTTP gateway over the project."""
    import uvicorn

    from .gateway import create_app

    try:
        probe = ProjectStore.open(obj["project"], read_only=True)
    except StoreError as exc:
        raise click.ClickException(str(exc)) from None
    config = probe.config()
    project_id = probe.project_id
    probe.close()
    seed = _resolved_seed(obj, config)

    if obj["offline"]:
        corpus_dir = _corpus_path(obj["project"], corpus)

        def hub_factory():
            return (
                offline_hub(config, seed=seed, corpus_dir=corpus_dir),
                FixtureFetcher(corpus_dir),
            )

    else:

        def hub_factory():
            return live_hub(config), LiveFetcher(config.research.user_agent)

    if static_dir is None:
        guess = os.path.join(os.getcwd(), "frontend", "dist")
        static_dir = guess if os.path.isdir(guess) else None

    app = create_app(
        obj["project"], hub_factory=hub_factory, seed=seed, static_dir=static_dir
    )
    click.echo(f"serving {project_id} at http://{host}:{port}")
    if static_dir:
        click.echo(f"web UI from {static_dir}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command()
@click.option(
    "--out",
    default="-",
    show_default=True,
    help="Output file; - writes to stdout.",
)
@click.pass_obj
def export(obj, out):
    """Dump the project as one JSON document."""
    try:
        store = ProjectStore.open(obj["project"], read_only=True)
    except StoreError as exc:
        raise click.ClickException(str(exc)) from None
    try:
        doc = project_export(store)
    finally:
        store.close()
    text = json.dumps(doc, indent=2, ensure_ascii=False)
    if out == "-":
        click.echo(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        click.echo(f"wrote {out}")


if __name__ == "__main__":
    main()

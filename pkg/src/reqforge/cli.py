"""Command line front end.

Exit codes group failures by stage: 2 request/config problems, 3 selection
problems, 4 training problems, 5 artifact integrity problems.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__
from .errors import (
    IntegrityError,
    ParseError,
    ProposalError,
    ReqforgeError,
    SchemaError,
    SelectionError,
    TaxonomyError,
    UnderstandingError,
)
from .evalharness import (
    Grade,
    aggregate_hpo,
    grade_run,
    render_benchmark_table,
    render_hpo_table,
    score_benchmark,
)
from .hpo.loop import Strategy, run_hpo
from .hpo.space import space_for_task
from .llm.client import ChatClient, HttpChatClient, ScriptedClient
from .llm.ops import llm_parse_request
from .llm.prompts import (
    HPOContext,
    render_generation_prompt,
    render_hpo_messages,
    render_parsing_prompt,
)
from .orchestrator import (
    PipelineOptions,
    bundled_taxonomy_path,
    bundled_zoo_path,
    load_run,
    run_pipeline,
)
from .registry import load_zoo, select_data, select_model
from .schema import Task, canonicalize, parse_request_config, serialize_config
from .textmatch import load_taxonomy
from .trainer import METRIC_NAMES, SimulatedTrainer

_EXIT_REQUEST = 2
_EXIT_SELECTION = 3
_EXIT_TRAINING = 4
_EXIT_INTEGRITY = 5

_STATUS_EXIT = {
    "completed": 0,
    "failed_understanding": _EXIT_REQUEST,
    "failed_selection": _EXIT_SELECTION,
    "failed_training": _EXIT_TRAINING,
}


def _fail(message: str, code: int):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _client_from_config(path: str) -> ChatClient:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        _fail(f"cannot read client config {path}: {exc}", _EXIT_REQUEST)
    kind = obj.get("kind")
    if kind == "scripted":
        return ScriptedClient.from_file(obj["path"])
    if kind == "http":
        return HttpChatClient(
            endpoint=obj["endpoint"],
            model=obj.get("model", ""),
            api_key_env=obj.get("api_key_env", "REQFORGE_API_KEY"),
            timeout_s=float(obj.get("timeout_s", 60.0)),
        )
    _fail(f"client config kind must be scripted or http, got {kind!r}", _EXIT_REQUEST)


def _read_request(request: str | None, request_file: str | None) -> str:
    if (request is None) == (request_file is None):
        _fail("provide exactly one of --request or --request-file", _EXIT_REQUEST)
    if request is not None:
        return request
    try:
        return Path(request_file).read_text(encoding="utf-8").strip()
    except OSError as exc:
        _fail(f"cannot read request file: {exc}", _EXIT_REQUEST)


def _tasks_from_flag(tasks: str) -> list[Task]:
    if tasks == "all":
        return list(Task)
    out = []
    for part in tasks.split(","):
        try:
            out.append(Task(part.strip()))
        except ValueError:
            _fail(f"unknown task {part.strip()!r}", _EXIT_REQUEST)
    return out


@click.group()
@click.version_option(__version__)
def main():
    """Turn natural-language model requests into trained-model plans."""


@main.command("run")
@click.option("--request", default=None, help="Inline request text.")
@click.option("--request-file", default=None, type=click.Path(), help="File with the request text.")
@click.option("--strategy", default="bayes_gp", show_default=True,
              type=click.Choice([s.value for s in Strategy]))
@click.option("--budget", default=5, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--zoo", default=None, type=click.Path(), help="Zoo manifest (bundled by default).")
@click.option("--taxonomy", default=None, type=click.Path(), help="Taxonomy TSV (bundled by default).")
@click.option("--client", "client_config", required=True, type=click.Path(),
              help="Client config JSON: {\"kind\": \"scripted\"|\"http\", ...}.")
@click.option("--runs-dir", default="runs", show_default=True, type=click.Path())
@click.option("--run-id", default="", help="Fixed run id (new id per run by default).")
@click.option("--request-id", default="", help="Stable request id (text digest by default).")
def run_cmd(request, request_file, strategy, budget, seed, zoo, taxonomy,
            client_config, runs_dir, run_id, request_id):
    """Run the full pipeline on one request and persist the artifact."""
    text = _read_request(request, request_file)
    options = PipelineOptions(
        strategy=strategy,
        budget_rounds=budget,
        rng_seed=seed,
        zoo_path=zoo,
        taxonomy_path=taxonomy,
        client=_client_from_config(client_config),
        runs_dir=runs_dir,
        run_id=run_id,
        request_id=request_id,
    )
    artifact = run_pipeline(text, options)
    click.echo(f"status: {artifact.status}")
    if artifact.error:
        click.echo(f"detail: {artifact.error}")
    if artifact.model is not None:
        click.echo(f"model: {artifact.model.name}")
    if artifact.trace is not None:
        click.echo(f"best metric: {artifact.trace.best.metric_value:.4f}")
    click.echo(f"artifact: {Path(runs_dir) / artifact.run_id / 'artifact.json'}")
    sys.exit(_STATUS_EXIT[artifact.status])


@main.command("parse")
@click.option("--request", default=None)
@click.option("--request-file", default=None, type=click.Path())
@click.option("--client", "client_config", required=True, type=click.Path())
def parse_cmd(request, request_file, client_config):
    """Parse one request into a validated config and print it."""
    text = _read_request(request, request_file)
    client = _client_from_config(client_config)
    try:
        cfg = llm_parse_request(client, text)
    except (UnderstandingError, ReqforgeError) as exc:
        _fail(str(exc), _EXIT_REQUEST)
    click.echo(serialize_config(canonicalize(cfg)))


@main.command("select")
@click.option("--config", "config_path", required=True, type=click.Path(),
              help="Request config JSON file.")
@click.option("--zoo", default=None, type=click.Path())
@click.option("--taxonomy", default=None, type=click.Path())
def select_cmd(config_path, zoo, taxonomy):
    """Pick data and model cards for an already-parsed config."""
    try:
        cfg = canonicalize(
            parse_request_config(
                Path(config_path).read_text(encoding="utf-8"), mode="lenient"
            )
        )
    except OSError as exc:
        _fail(f"cannot read config: {exc}", _EXIT_REQUEST)
    except (ParseError, SchemaError) as exc:
        _fail(str(exc), _EXIT_REQUEST)
    try:
        registry = load_zoo(zoo or bundled_zoo_path())
        tax = load_taxonomy(taxonomy or bundled_taxonomy_path())
        selection = select_data(cfg, registry, tax)
        card = select_model(cfg, registry)
    except (ParseError, SchemaError, TaxonomyError) as exc:
        _fail(str(exc), _EXIT_REQUEST)
    except SelectionError as exc:
        _fail(str(exc), _EXIT_SELECTION)
    payload = {
        "data": [c.name for c in selection.cards],
        "uncovered": list(selection.uncovered),
        "total_images": selection.total_images,
        "model": {
            "name": card.name,
            "structure": card.structure,
            "params(M)": card.params_m,
            "flops(G)": card.flops_g,
            "speed_ms": card.speed_ms,
            "performance": card.performance.value,
        },
    }
    click.echo(json.dumps(payload, indent=2, ensure_ascii=False))


@main.command("hpo")
@click.option("--tasks", default="all", show_default=True,
              help="Comma-separated task list or 'all'.")
@click.option("--surfaces", default=5, show_default=True, type=int,
              help="Synthetic response surfaces per task.")
@click.option("--seeds", default=5, show_default=True, type=int,
              help="Repeats per surface.")
@click.option("--strategies", default="random,bayes_gp,bayes_rf", show_default=True)
@click.option("--budget", default=5, show_default=True, type=int)
def hpo_cmd(tasks, surfaces, seeds, strategies, budget):
    """Compare search strategies on synthetic training surfaces."""
    try:
        chosen = [Strategy(s.strip()) for s in strategies.split(",")]
    except ValueError as exc:
        _fail(str(exc), _EXIT_REQUEST)
    if Strategy.LLM in chosen:
        _fail("llm strategy needs a client; use `run` for that path", _EXIT_REQUEST)
    task_list = _tasks_from_flag(tasks)
    executor = SimulatedTrainer()
    for strategy in chosen:
        per_task: dict[str, list[float]] = {}
        for task in task_list:
            values = []
            for i in range(surfaces):
                rid = f"surface-{task.value}-{i:03d}"
                for seed in range(seeds):
                    trace = run_hpo(
                        strategy, budget, executor, None, seed,
                        task=task, request_id=rid,
                    )
                    values.append(trace.best.metric_value)
            per_task[task.value] = values
        click.echo(f"strategy: {strategy.value}")
        click.echo(render_hpo_table(aggregate_hpo(per_task)))
        click.echo("")


@main.command("eval")
@click.option("--runs", "runs_dir", required=True, type=click.Path())
@click.option("--gold", "gold_dir", required=True, type=click.Path(),
              help="Directory per task, one gold config JSON per request.")
@click.option("--out", default=None, type=click.Path(), help="Write the JSON report here.")
def eval_cmd(runs_dir, gold_dir, out):
    """Grade persisted runs against gold configs and total the points."""
    artifacts = {}
    runs_root = Path(runs_dir)
    if not runs_root.is_dir():
        _fail(f"runs directory {runs_dir} not found", _EXIT_INTEGRITY)
    for art_path in sorted(runs_root.glob("*/artifact.json")):
        try:
            artifact = load_run(art_path)
        except IntegrityError as exc:
            _fail(f"{art_path}: {exc}", _EXIT_INTEGRITY)
        artifacts[artifact.request_id] = artifact

    triples = []
    gold_root = Path(gold_dir)
    gold_files = sorted(gold_root.glob("*/*.json"))
    if not gold_files:
        _fail(f"no gold configs under {gold_dir}", _EXIT_REQUEST)
    for gold_path in gold_files:
        task_name = gold_path.parent.name
        rid = gold_path.stem
        try:
            task = Task(task_name)
            gold = parse_request_config(
                gold_path.read_text(encoding="utf-8"), mode="strict"
            )
        except (ValueError, OSError, ParseError, SchemaError) as exc:
            _fail(f"{gold_path}: {exc}", _EXIT_REQUEST)
        artifact = artifacts.get(rid)
        grade = Grade.F if artifact is None else grade_run(artifact, gold)
        triples.append((task, rid, grade))
    score = score_benchmark(triples)
    click.echo(render_benchmark_table(score))
    report = json.dumps(score.to_json_dict(), indent=2, ensure_ascii=False)
    if out:
        Path(out).write_text(report + "\n", encoding="utf-8")
        click.echo(f"report: {out}")
    else:
        click.echo(report)


def _render_messages(messages) -> str:
    blocks = [f"--- {m.role} ---\n{m.content}" for m in messages]
    return "\n".join(blocks) + "\n"


@main.command("gen-prompts")
@click.option("--out", "out_dir", default="prompts", show_default=True, type=click.Path())
@click.option("--count", default=20, show_default=True, type=int,
              help="Request count slot in the generation prompt.")
@click.option("--task", default="classification", show_default=True,
              type=click.Choice([t.value for t in Task]),
              help="Task for the tuning prompt's search space.")
def gen_prompts_cmd(out_dir, count, task):
    """Render the request-generation, parsing, and tuning prompts to files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    task_enum = Task(task)
    space = space_for_task(task_enum)
    context = HPOContext(
        num_classes=2,
        dataset="example-dataset",
        model_name="example-model",
        params_m=25.0,
        flops_g=4.0,
        reference_accuracy=0.8,
        metric_name=METRIC_NAMES[task_enum],
    )
    files = {
        "generation.txt": _render_messages(render_generation_prompt(count)),
        "parsing.txt": _render_messages(
            render_parsing_prompt("<paste the user request here>")
        ),
        f"tuning_{task}.txt": _render_messages(
            render_hpo_messages(1, context, space, [])
        ),
    }
    for name, body in files.items():
        (out / name).write_text(body, encoding="utf-8")
        click.echo(f"wrote {out / name}")


if __name__ == "__main__":
    main()

"""Command-line interface; every subcommand mirrors a service endpoint."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import load_config
from .curriculum import export_batch
from .engine import Engine
from .errors import FinforgeError
from .kbgen import EvolutionStrategy, task_to_dict


def _echo(obj) -> None:
    click.echo(json.dumps(obj, indent=2, ensure_ascii=False, default=str))


def _engine(ctx: click.Context) -> Engine:
    params = ctx.obj
    cfg = load_config(
        params.get("config"),
        store_dir=params.get("store"),
        rng_seed=params.get("seed"),
    )
    return Engine(cfg)


@click.group()
@click.option("--config", type=click.Path(exists=True, dir_okay=False), envvar="FINFORGE_CONFIG")
@click.option("--store", type=click.Path(file_okay=False), envvar="FINFORGE_STORE_DIR")
@click.option("--seed", type=int, envvar="FINFORGE_SEED")
@click.pass_context
def main(ctx, config, store, seed):
    """Synthesize, verify, score, and schedule financial instruction tasks."""
    ctx.obj = {"config": config, "store": store, "seed": seed}


def _run(ctx, fn):
    try:
        fn(_engine(ctx))
    except FinforgeError as exc:
        _echo(exc.to_body())
        sys.exit(1)


@main.command("gen-axiom")
@click.option("--axiom", default=None, help="Axiom id; default cycles over all registered.")
@click.option("--hidden", default=None, help="Symbol to hide; default is the relation lhs.")
@click.option("--count", default=1, type=int)
@click.option("--gen-seed", default=None, type=int)
@click.pass_context
def gen_axiom(ctx, axiom, hidden, count, gen_seed):
    """Mint deduction tasks with identity-forced golds (born at L1)."""

    def run(engine):
        tasks = engine.generate_deduction(axiom, hidden, count=count, seed=gen_seed)
        _echo({"generated": len(tasks), "task_ids": [t.id for t in tasks]})

    _run(ctx, run)


@main.command("gen-kb")
@click.option("--domain", default=None, help="Restrict to one domain tag.")
@click.option("--points", "n_points", default=3, type=int)
@click.option("--template", "template_id", required=True)
@click.option("--task-type", required=True)
@click.option("--count", default=1, type=int)
@click.option("--gen-seed", default=None, type=int)
@click.pass_context
def gen_kb(ctx, domain, n_points, template_id, task_type, count, gen_seed):
    """Generate knowledge tasks by context injection through a template."""

    def run(engine):
        tasks = engine.generate_knowledge(
            domain, n_points, template_id, task_type, count=count, seed=gen_seed
        )
        _echo({"generated": len(tasks), "task_ids": [t.id for t in tasks]})

    _run(ctx, run)


@main.command()
@click.argument("task_id")
@click.option("--strategy", required=True, type=click.Choice(["add_constraint", "add_distractor", "transform_format"]))
@click.option("--param", "params", multiple=True, help="key=value strategy parameter")
@click.option("--rounds", default=1, type=int, help="Number of successive evolution rounds.")
@click.option("--gen-seed", default=None, type=int)
@click.pass_context
def evolve(ctx, task_id, strategy, params, rounds, gen_seed):
    """Evolve a stored task into a harder variant."""

    def run(engine):
        kv = dict(p.split("=", 1) for p in params)
        child = engine.evolve(
            task_id, EvolutionStrategy(kind=strategy, params=kv), seed=gen_seed, rounds=rounds
        )
        _echo(task_to_dict(child))

    _run(ctx, run)


@main.command()
@click.argument("task_id")
@click.option("--level", default="L1", type=click.Choice(["L1", "L2"]))
@click.option("--responses", type=click.Path(exists=True, dir_okay=False),
              help="JSONL of {source_model, text} candidate responses (L2).")
@click.pass_context
def verify(ctx, task_id, level, responses):
    """Run deterministic (L1) or vote-based (L2) verification."""

    def run(engine):
        resp = None
        if responses:
            resp = [json.loads(line) for line in Path(responses).read_text().splitlines() if line.strip()]
        _echo(engine.verify(task_id, level, responses=resp))

    _run(ctx, run)


@main.command()
@click.argument("task_id")
@click.option("--response", default=None, help="Response text to score.")
@click.option("--response-file", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def score(ctx, task_id, response, response_file):
    """Score one response for a task under dual-verifier routing."""

    def run(engine):
        if response is None and response_file is None:
            raise click.UsageError("provide --response or --response-file")
        text = response if response is not None else Path(response_file).read_text()
        _echo(engine.score(task_id, text))

    _run(ctx, run)


@main.command()
@click.argument("scenario_id")
@click.option("--script", "script_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="JSONL of scripted actions: {say}|{call, params}|{answer}.")
@click.pass_context
def simulate(ctx, scenario_id, script_path):
    """Run a scripted tool-use episode and print its composite score."""

    def run(engine):
        script = [json.loads(line) for line in Path(script_path).read_text().splitlines() if line.strip()]
        _echo(engine.simulate(scenario_id, script))

    _run(ctx, run)


@main.command()
@click.option("--size", default=None, type=int)
@click.option("--stage", default=None, type=click.Choice(["core", "learning", "frontier"]))
@click.option("--rewards", "rewards_path", default=None, type=click.Path(exists=True, dir_okay=False),
              help="JSONL of {task_id, rollout_rewards} to attach before pruning.")
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False))
@click.option("--track-all/--no-track-all", default=True,
              help="Ensure every stored task has a stats entry before sampling.")
@click.option("--gen-seed", default=None, type=int)
@click.pass_context
def batch(ctx, size, stage, rewards_path, out_path, track_all, gen_seed):
    """Build the next training batch and optionally export it."""

    def run(engine):
        if track_all:
            engine.ensure_stats(sorted(engine.tasks))
        rewards = None
        if rewards_path:
            rewards = {}
            for line in Path(rewards_path).read_text().splitlines():
                if line.strip():
                    rec = json.loads(line)
                    rewards[rec["task_id"]] = rec["rollout_rewards"]
        b = engine.next_batch(stage=stage, seed=gen_seed, size=size, rewards=rewards)
        out = {
            "entries": [{"task_id": e.task_id, "rollout_rewards": e.rollout_rewards} for e in b.entries],
            "pruned": [{"task_id": p.task_id, "reason": p.reason} for p in b.pruned],
            "composition": b.composition,
        }
        if out_path:
            out["exported"] = export_batch(out_path, b)
        _echo(out)

    _run(ctx, run)


@main.command()
@click.pass_context
def report(ctx):
    """Funnel and curriculum summary for the store."""
    _run(ctx, lambda engine: _echo(engine.report()))


@main.command()
@click.argument("item_id")
@click.option("--gold", "gold_json", required=True, help="Gold payload JSON, e.g. '{\"type\":\"exact_text\",\"text\":\"b\"}'")
@click.option("--expert", "expert_id", required=True)
@click.pass_context
def resolve(ctx, item_id, gold_json, expert_id):
    """Resolve a pending adjudication item with an expert decision."""

    def run(engine):
        _echo(engine.resolve_adjudication(item_id, json.loads(gold_json), expert_id))

    _run(ctx, run)


@main.command()
@click.option("--status", default=None, type=click.Choice(["pending", "resolved"]))
@click.pass_context
def adjudication(ctx, status):
    """List adjudication items."""
    _run(ctx, lambda engine: _echo({"items": engine.list_adjudication(status)}))


@main.command()
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("--kind", required=True,
              type=click.Choice(["task", "gold", "verdict", "adjudication", "stats", "trajectory"]))
@click.option("--strict/--lenient", "strict", default=None)
@click.pass_context
def ingest(ctx, path, kind, strict):
    """Append records from a JSONL file into the store."""

    def run(engine):
        result = engine.ingest(path, kind, strict=strict)
        _echo(result)

    _run(ctx, run)


@main.command()
@click.pass_context
def serve(ctx):
    """Start the JSON-over-HTTP service (and console, if bundled)."""

    def run(engine):
        from .service import serve as _serve

        click.echo(f"listening on 127.0.0.1:{engine.config.listen_port}")
        _serve(engine)

    _run(ctx, run)


if __name__ == "__main__":
    main()

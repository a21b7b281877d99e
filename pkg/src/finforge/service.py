"""JSON-over-HTTP service exposing the engine.

Every endpoint delegates to the same engine operation its CLI twin uses.
Errors come back as structured bodies {code, message, detail}: caller
mistakes are 4xx, upstream verifier faults 5xx.
"""

from __future__ import annotations

import json

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .curriculum import export_batch
from .engine import Engine
from .errors import (
    AlreadyResolvedError,
    EmptyPoolError,
    ExecutionError,
    FinforgeError,
    InputError,
    JudgeUnavailableError,
    UnknownIdError,
)
from .kbgen import EvolutionStrategy, task_to_dict

_STATUS_FOR = [
    (UnknownIdError, 404),
    (AlreadyResolvedError, 409),
    (EmptyPoolError, 409),
    (InputError, 400),
    (JudgeUnavailableError, 503),
    (ExecutionError, 502),
    (FinforgeError, 500),
]


def _status_for(exc: FinforgeError) -> int:
    for cls, status in _STATUS_FOR:
        if isinstance(exc, cls):
            return status
    return 500


async def _body(request: Request) -> dict:
    try:
        data = await request.json()
    except json.JSONDecodeError:
        raise InputError("request body must be JSON")
    if not isinstance(data, dict):
        raise InputError("request body must be a JSON object")
    return data


def _require(data: dict, *names: str) -> list:
    missing = [n for n in names if n not in data]
    if missing:
        raise InputError(f"missing required fields: {', '.join(missing)}")
    return [data[n] for n in names]


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="finforge", docs_url=None, redoc_url=None)

    @app.exception_handler(FinforgeError)
    async def _handle(request: Request, exc: FinforgeError):
        return JSONResponse(status_code=_status_for(exc), content=exc.to_body())

    @app.post("/v1/tasks:generate")
    async def generate(request: Request):
        data = await _body(request)
        (mode,) = _require(data, "mode")
        params = data.get("params", {})
        if mode == "axiom":
            tasks = engine.generate_deduction(
                axiom_id=params.get("axiom_id"),
                hidden_symbol=params.get("hidden_symbol"),
                count=int(params.get("count", 1)),
                seed=params.get("seed"),
            )
        elif mode == "knowledge":
            tasks = engine.generate_knowledge(
                domain_tag=params.get("domain_tag"),
                n_points=int(params.get("n_points", 3)),
                template_id=params["template_id"],
                task_type=params["task_type"],
                count=int(params.get("count", 1)),
                seed=params.get("seed"),
            )
        elif mode == "evolve":
            strategy = EvolutionStrategy(
                kind=params["strategy"], params=params.get("strategy_params", {})
            )
            tasks = [engine.evolve(params["task_id"], strategy, seed=params.get("seed"))]
        else:
            raise InputError(f"unknown generation mode {mode!r}")
        return {"tasks": [task_to_dict(t) for t in tasks]}

    @app.post("/v1/verify")
    async def verify(request: Request):
        data = await _body(request)
        task_id, level = _require(data, "task_id", "level")
        return engine.verify(task_id, level, responses=data.get("responses"))

    @app.post("/v1/score")
    async def score(request: Request):
        data = await _body(request)
        if "trajectory" in data:
            scenario_id = data.get("scenario_id") or data.get("task_id")
            if not scenario_id:
                raise InputError("trajectory scoring needs scenario_id")
            return engine.score_trajectory(scenario_id, data["trajectory"])
        task_id, response = _require(data, "task_id", "response")
        return engine.score(task_id, response)

    @app.post("/v1/simulate")
    async def simulate(request: Request):
        data = await _body(request)
        scenario_id, script = _require(data, "scenario_id", "script")
        return engine.simulate(scenario_id, script)

    @app.get("/v1/adjudication")
    async def adjudication(status: str | None = None):
        return {"items": engine.list_adjudication(status)}

    @app.post("/v1/adjudication/{item_id}:resolve")
    async def resolve(item_id: str, request: Request):
        data = await _body(request)
        gold, expert_id = _require(data, "gold", "expert_id")
        return engine.resolve_adjudication(item_id, gold, expert_id)

    @app.post("/v1/batches:next")
    async def batches_next(request: Request):
        data = await _body(request)
        batch = engine.next_batch(
            stage=data.get("stage"),
            seed=data.get("seed"),
            size=data.get("size"),
            rewards=data.get("rewards"),
        )
        out_path = data.get("export_path")
        result = {
            "entries": [
                {"task_id": e.task_id, "rollout_rewards": e.rollout_rewards}
                for e in batch.entries
            ],
            "pruned": [{"task_id": p.task_id, "reason": p.reason} for p in batch.pruned],
            "composition": batch.composition,
        }
        if out_path:
            result["exported"] = export_batch(out_path, batch)
        return result

    @app.post("/v1/rollouts")
    async def rollouts(request: Request):
        data = await _body(request)
        task_id, rewards = _require(data, "task_id", "rollout_rewards")
        return engine.record_rollouts(task_id, rewards)

    @app.get("/v1/stats")
    async def stats():
        return engine.report()

    @app.get("/v1/tasks/{task_id}")
    async def get_task(task_id: str):
        return task_to_dict(engine.get_task(task_id))

    if engine.config.static_dir:
        app.mount("/", StaticFiles(directory=engine.config.static_dir, html=True))

    return app


def serve(engine: Engine) -> None:
    """Run the service with uvicorn on the configured port."""
    import uvicorn

    uvicorn.run(create_app(engine), host="127.0.0.1", port=engine.config.listen_port)

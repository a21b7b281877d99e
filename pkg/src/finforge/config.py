"""Service configuration: JSON file, environment overrides, validation.

Precedence: explicit overrides > FINFORGE_* environment variables > config
file > built-in defaults. Asset paths default to the bundled mini knowledge
base, identity registry, templates, rules, fact sets, and scenarios.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Optional

from .curriculum import CurriculumConfig
from .errors import InputError
from .funnel import VoteConfig

ENV_PREFIX = "FINFORGE_"


def asset_path(name: str) -> str:
    return str(resources.files("finforge").joinpath("assets", name))


@dataclass
class ServiceConfig:
    store_dir: str = "./finforge-store"
    listen_port: int = 8080
    judge_endpoint: Optional[str] = None  # None -> deterministic mock judge
    judge_inflight_cap: int = 4
    executor_endpoint: Optional[str] = None  # None -> local subprocess executor
    executor_timeout_s: float = 5.0
    rng_seed: int = 0
    axioms_path: str = field(default_factory=lambda: asset_path("axioms.jsonl"))
    knowledge_path: str = field(default_factory=lambda: asset_path("knowledge_points.jsonl"))
    templates_path: str = field(default_factory=lambda: asset_path("templates.jsonl"))
    format_rules_path: str = field(default_factory=lambda: asset_path("format_rules.jsonl"))
    fact_sets_path: str = field(default_factory=lambda: asset_path("fact_sets.jsonl"))
    scenarios_path: str = field(default_factory=lambda: asset_path("scenarios.jsonl"))
    static_dir: Optional[str] = None  # optional console bundle to serve at /
    routing: Optional[dict] = None  # task_type -> {rule_weight, judge_weight, judge_kinds}
    weights: Optional[dict] = None  # task_type -> {"rule": {...}, "judge": {...}}
    ingest_strict: bool = True
    curriculum: CurriculumConfig = field(default_factory=CurriculumConfig)
    vote: VoteConfig = field(default_factory=VoteConfig)

    def __post_init__(self):
        if not 1 <= self.listen_port <= 65535:
            raise InputError(f"listen_port {self.listen_port} out of range")
        if self.judge_inflight_cap < 1:
            raise InputError("judge_inflight_cap must be positive")
        if self.executor_timeout_s <= 0:
            raise InputError("executor_timeout_s must be positive")
        for name in (
            "axioms_path",
            "knowledge_path",
            "templates_path",
            "format_rules_path",
            "fact_sets_path",
            "scenarios_path",
        ):
            path = getattr(self, name)
            if not Path(path).exists():
                raise InputError(f"{name} does not exist: {path}")
        if self.static_dir is not None and not Path(self.static_dir).is_dir():
            raise InputError(f"static_dir does not exist: {self.static_dir}")


_NESTED = {"curriculum": CurriculumConfig, "vote": VoteConfig}
_ENV_CASTS = {
    "listen_port": int,
    "judge_inflight_cap": int,
    "executor_timeout_s": float,
    "rng_seed": int,
    "ingest_strict": lambda s: s.lower() in ("1", "true", "yes"),
}


def load_config(
    path: str | Path | None = None,
    env: Optional[dict] = None,
    **overrides,
) -> ServiceConfig:
    data: dict = {}
    if path is not None:
        raw = Path(path).read_text(encoding="utf-8")
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise InputError(f"config file is not valid JSON: {exc}")
        if not isinstance(data, dict):
            raise InputError("config file must hold a JSON object")

    env = os.environ if env is None else env
    known = {f.name for f in fields(ServiceConfig)}
    for name in known:
        env_key = ENV_PREFIX + name.upper()
        if env_key in env:
            cast = _ENV_CASTS.get(name, str)
            data[name] = cast(env[env_key])

    data.update({k: v for k, v in overrides.items() if v is not None})

    unknown = set(data) - known
    if unknown:
        raise InputError(f"unknown config keys: {sorted(unknown)}")
    for name, cls in _NESTED.items():
        if name in data and isinstance(data[name], dict):
            data[name] = cls(**data[name])
    return ServiceConfig(**data)

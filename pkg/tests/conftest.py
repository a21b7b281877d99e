from __future__ import annotations

import pytest

from finforge.config import load_config
from finforge.engine import Engine
from finforge.judgeverify import MockJudgeClient
from finforge.kbgen import AxiomRegistry, KnowledgeBase, TemplateRegistry


@pytest.fixture()
def registry() -> AxiomRegistry:
    return AxiomRegistry.from_jsonl(load_config(store_dir="ignored-by-fixture").axioms_path)


@pytest.fixture()
def kb() -> KnowledgeBase:
    return KnowledgeBase.from_jsonl(load_config(store_dir="ignored-by-fixture").knowledge_path)


@pytest.fixture()
def templates() -> TemplateRegistry:
    return TemplateRegistry.from_jsonl(load_config(store_dir="ignored-by-fixture").templates_path)


@pytest.fixture()
def mock_judge() -> MockJudgeClient:
    return MockJudgeClient()


@pytest.fixture()
def engine(tmp_path) -> Engine:
    cfg = load_config(store_dir=str(tmp_path / "store"))
    return Engine(cfg)

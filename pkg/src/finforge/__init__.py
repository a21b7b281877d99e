"""finforge: verifiable financial instruction tasks, end to end.

Synthesis from identities and a seed knowledge base, gold assignment through
a three-level verification funnel, dual-verifier reward scoring (rules plus
judge), a simulated tool environment with a composite agentic reward, and
difficulty-stratified batch scheduling with zero-variance pruning.
"""

__version__ = "0.1.0"

from .config import ServiceConfig, load_config
from .engine import Engine

__all__ = ["Engine", "ServiceConfig", "load_config", "__version__"]

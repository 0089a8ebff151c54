"""Extended Wigner's Friend protocol, story semantics and a bounded no-go checker."""
from __future__ import annotations

from .protocol import build_protocol, load_protocol, view_distribution
from .stories import Story, TheoryRuleSet

__all__ = ["Story", "TheoryRuleSet", "build_protocol", "load_protocol", "view_distribution"]
__version__ = "0.1.0"

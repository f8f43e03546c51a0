"""AgentWall: a runtime policy firewall for local AI agent tool calls.

Sits between an MCP client and a tool server, evaluates every proposed
action against a hot-reloadable ALLOW/DENY/ASK policy, gates sensitive
actions on human approval, rate-limits tools, and records a hash-chained
audit trail with replay.
"""

__version__ = "0.1.0"

from .actions import (  # noqa: F401
    ActionProposal,
    ActionType,
    MappingError,
    NormalizationError,
    SessionContext,
    ToolMapping,
    map_tool_call,
    normalize_path,
)
from .policy import (  # noqa: F401
    PolicyDocument,
    PolicyEngine,
    PolicyError,
    PolicyRule,
    Verdict,
    evaluate,
    parse_policy,
    reload_if_changed,
)

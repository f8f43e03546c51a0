"""Normalized action vocabulary for intercepted tool calls.

Every tool call crossing the proxy is translated into an ActionProposal
before policy evaluation, so the policy engine reasons over one schema
regardless of which MCP client or tool server produced the call. Tools
that no mapping covers are folded into EXECUTE proposals (fail-closed:
the default policy escalates unknown executions instead of forwarding
them silently).
"""

from __future__ import annotations

import json
import secrets
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping, Sequence


class ActionType(Enum):
    READ = "read"
    WRITE = "write"
    DELETE = "delete"
    EXECUTE = "execute"
    SQL = "sql"
    NETWORK = "network"


# Which ActionProposal payload field each action type populates.
PAYLOAD_FIELD: dict[ActionType, str] = {
    ActionType.READ: "target_path",
    ActionType.WRITE: "target_path",
    ActionType.DELETE: "target_path",
    ActionType.EXECUTE: "command",
    ActionType.SQL: "sql",
    ActionType.NETWORK: "destination",
}

# Which ToolMapping argument-key field each action type requires.
MAPPING_ARG_FIELD: dict[ActionType, str] = {
    ActionType.READ: "path_arg",
    ActionType.WRITE: "path_arg",
    ActionType.DELETE: "path_arg",
    ActionType.EXECUTE: "command_arg",
    ActionType.SQL: "sql_arg",
    ActionType.NETWORK: "destination_arg",
}


class NormalizationError(ValueError):
    """Raised when a path cannot be normalized (empty, or escapes the root)."""


class MappingError(ValueError):
    """A tool mapping matched but the call cannot be turned into a proposal.

    Carries the tool name and the declared action type so the caller can
    still log a meaningful deny.
    """

    def __init__(self, tool: str, action_type: ActionType, reason: str):
        super().__init__(f"cannot map tool call '{tool}': {reason}")
        self.tool = tool
        self.action_type = action_type
        self.reason = reason


@dataclass(frozen=True)
class SessionContext:
    """Per-session facts needed to normalize incoming tool calls."""

    session_id: str
    runtime: str
    workspace_root: str
    home: str


@dataclass(frozen=True)
class ToolMapping:
    """Bridges one wire-level tool name (pattern) to the action vocabulary.

    Exactly one of the four argument-key fields is set, matching the
    action type.
    """

    tool_name_pattern: str
    action_type: ActionType
    path_arg: str | None = None
    command_arg: str | None = None
    sql_arg: str | None = None
    destination_arg: str | None = None

    def __post_init__(self) -> None:
        keys = [self.path_arg, self.command_arg, self.sql_arg, self.destination_arg]
        if sum(k is not None for k in keys) != 1:
            raise ValueError(
                f"mapping for '{self.tool_name_pattern}' must set exactly one argument key"
            )
        expected = MAPPING_ARG_FIELD[self.action_type]
        if getattr(self, expected) is None:
            raise ValueError(
                f"mapping for '{self.tool_name_pattern}' sets an argument key inconsistent "
                f"with action type {self.action_type.value}"
            )

    @property
    def argument_key(self) -> str:
        value = getattr(self, MAPPING_ARG_FIELD[self.action_type])
        assert value is not None
        return value


@dataclass(frozen=True)
class ActionProposal:
    """One proposed tool action, normalized and ready for policy evaluation.

    Exactly the payload field matching ``action_type`` is populated;
    ``target_path`` and ``workspace_root`` are absolute and lexically
    normalized (no ``.``/``..`` segments, no ``~``).
    """

    id: str
    session_id: str
    runtime: str
    tool: str
    action_type: ActionType
    workspace_root: str
    received_at: float
    target_path: str | None = None
    command: str | None = None
    sql: str | None = None
    destination: str | None = None

    def __post_init__(self) -> None:
        payloads = {
            "target_path": self.target_path,
            "command": self.command,
            "sql": self.sql,
            "destination": self.destination,
        }
        expected = PAYLOAD_FIELD[self.action_type]
        populated = [name for name, value in payloads.items() if value is not None]
        if populated != [expected]:
            raise ValueError(
                f"proposal for {self.action_type.value} must populate exactly "
                f"'{expected}', got {populated or 'nothing'}"
            )

    @property
    def target_summary(self) -> str:
        """The payload value, whichever field carries it (for logs and prompts)."""
        value = getattr(self, PAYLOAD_FIELD[self.action_type])
        assert value is not None
        return value


def normalize_path(raw: str, home: str, workspace: str) -> str:
    """Resolve a raw path argument into a normalized absolute path.

    ``~``/``~/...`` expand to *home*; relative paths resolve against
    *workspace*; ``.`` and ``..`` segments collapse lexically. Symlinks
    are deliberately not resolved: evaluation stays deterministic and
    filesystem-free, at the documented cost of not seeing through links.

    Raises NormalizationError for an empty path or one whose ``..``
    segments climb above the filesystem root. Idempotent on its own
    output.
    """
    if not raw:
        raise NormalizationError("empty path")

    if raw == "~":
        candidate = home
    elif raw.startswith("~/"):
        candidate = home.rstrip("/") + raw[1:]
    elif raw.startswith("/"):
        candidate = raw
    else:
        candidate = workspace.rstrip("/") + "/" + raw

    stack: list[str] = []
    for segment in candidate.split("/"):
        if segment in ("", "."):
            continue
        if segment == "..":
            if not stack:
                raise NormalizationError(f"path escapes filesystem root: {raw!r}")
            stack.pop()
        else:
            stack.append(segment)
    return "/" + "/".join(stack)


def _serialize_arguments(arguments: Mapping[str, Any]) -> str:
    parts = []
    for key in sorted(arguments, key=str):
        value = json.dumps(arguments[key], sort_keys=True, separators=(",", ":"), default=str)
        parts.append(f"{key}:{value}")
    return "{" + ",".join(parts) + "}"


def _extract_host(value: str) -> str:
    """Reduce a destination argument (bare host or URL) to a host string."""
    host = value.strip()
    if "://" in host:
        host = host.split("://", 1)[1]
    host = host.split("/", 1)[0].split("?", 1)[0]
    if "@" in host:
        host = host.rsplit("@", 1)[1]
    # IPv6 literals keep their brackets; everything else drops the port.
    if not host.startswith("[") and ":" in host:
        host = host.split(":", 1)[0]
    return host.lower()


def _match_tool_name(pattern: str, tool: str) -> bool:
    """Case-sensitive glob over tool names (``*`` matches any run of chars)."""
    import fnmatch

    return fnmatch.fnmatchcase(tool, pattern)


def new_action_id() -> str:
    return secrets.token_hex(6)


def map_tool_call(
    tool: str,
    arguments: Mapping[str, Any],
    mappings: Sequence[ToolMapping],
    context: SessionContext,
    *,
    received_at: float,
    action_id: str | None = None,
) -> ActionProposal:
    """Translate one wire-level tool call into an ActionProposal.

    The first mapping whose pattern matches the tool name wins. Tools no
    mapping covers become EXECUTE proposals with a canonical
    ``tool:<name> <serialized-args>`` command so the policy engine still
    sees them (fail-closed). A matched mapping whose required argument is
    missing or not a string raises MappingError.
    """
    workspace = normalize_path(context.workspace_root, context.home, "/")
    action_id = action_id or new_action_id()

    for mapping in mappings:
        if not _match_tool_name(mapping.tool_name_pattern, tool):
            continue
        key = mapping.argument_key
        value = arguments.get(key)
        if not isinstance(value, str) or not value:
            raise MappingError(
                tool, mapping.action_type, f"missing or non-string argument '{key}'"
            )
        payload: dict[str, str] = {}
        if mapping.action_type in (ActionType.READ, ActionType.WRITE, ActionType.DELETE):
            try:
                payload["target_path"] = normalize_path(value, context.home, workspace)
            except NormalizationError as exc:
                raise MappingError(tool, mapping.action_type, str(exc)) from exc
        elif mapping.action_type is ActionType.EXECUTE:
            payload["command"] = value
        elif mapping.action_type is ActionType.SQL:
            payload["sql"] = value
        else:
            payload["destination"] = _extract_host(value)
        return ActionProposal(
            id=action_id,
            session_id=context.session_id,
            runtime=context.runtime,
            tool=tool,
            action_type=mapping.action_type,
            workspace_root=workspace,
            received_at=received_at,
            **payload,
        )

    # No mapping: treat the call as an opaque execution and let policy decide.
    return ActionProposal(
        id=action_id,
        session_id=context.session_id,
        runtime=context.runtime,
        tool=tool,
        action_type=ActionType.EXECUTE,
        workspace_root=workspace,
        received_at=received_at,
        command=f"tool:{tool} {_serialize_arguments(arguments)}",
    )


def default_tool_mappings() -> list[ToolMapping]:
    """The mapping table shipped in the default policy file."""
    return [
        ToolMapping("read_file", ActionType.READ, path_arg="path"),
        ToolMapping("write_file", ActionType.WRITE, path_arg="path"),
        ToolMapping("edit_file", ActionType.WRITE, path_arg="path"),
        ToolMapping("delete_file", ActionType.DELETE, path_arg="path"),
        ToolMapping("exec", ActionType.EXECUTE, command_arg="command"),
        ToolMapping("run_command", ActionType.EXECUTE, command_arg="command"),
        ToolMapping("bash", ActionType.EXECUTE, command_arg="command"),
        ToolMapping("query", ActionType.SQL, sql_arg="sql"),
        ToolMapping("sql", ActionType.SQL, sql_arg="sql"),
        ToolMapping("fetch", ActionType.NETWORK, destination_arg="url"),
        ToolMapping("http_request", ActionType.NETWORK, destination_arg="url"),
    ]

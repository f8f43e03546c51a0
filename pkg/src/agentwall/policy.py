"""Declarative ALLOW/DENY/ASK policy: parsing, evaluation, hot reload.

The policy file is YAML with five top-level keys: ``version``,
``defaults``, ``rules``, ``rate_limits``, and ``tool_mappings``. Rules
are scanned in file order and the first rule whose action type and every
set matcher hold decides the verdict; with no match the default decision
applies (shipped default: ASK, fail-closed).

Hot reload is a per-evaluation content-hash comparison rather than a
file watcher: hashing a ~2 KB file costs microseconds, is portable, and
guarantees zero-evaluation staleness. An invalid replacement file never
displaces the active document; the caller gets a warning to log and the
old policy stays live.
"""

from __future__ import annotations

import hashlib
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import yaml

from .actions import ActionProposal, ActionType, ToolMapping
from .matching import classify_sql, contains_all_groups, match_command, match_domain, match_path


class Verdict(Enum):
    ALLOW = "allow"
    DENY = "deny"
    ASK = "ask"


_PATH_ACTIONS = (ActionType.READ, ActionType.WRITE, ActionType.DELETE)

_RULE_KEYS = {
    "id", "action", "path_pattern", "command_pattern", "contains",
    "sql_verbs", "destination_pattern", "decision", "exact_path",
}
_TOP_KEYS = {"version", "defaults", "rules", "rate_limits", "tool_mappings"}
_DEFAULTS_KEYS = {"decision", "approval_timeout_seconds"}
_MAPPING_KEYS = {"tool", "action", "path_arg", "command_arg", "sql_arg", "destination_arg"}


class PolicyError(ValueError):
    """Parse/validation failure carrying every violation found, not just the first."""

    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("invalid policy: " + "; ".join(violations))


@dataclass(frozen=True)
class PolicyRule:
    id: str
    action: ActionType
    decision: Verdict
    path_pattern: tuple[str, ...] | None = None
    command_pattern: tuple[str, ...] | None = None
    contains: tuple[tuple[str, ...], ...] | None = None
    sql_verbs: frozenset[str] | None = None
    destination_pattern: tuple[str, ...] | None = None
    exact_path: bool = False

    def matches(self, action: ActionProposal) -> bool:
        if action.action_type is not self.action:
            return False
        if self.path_pattern is not None:
            path = action.target_path or ""
            patterns = [
                p.replace("${workspace}", action.workspace_root) for p in self.path_pattern
            ]
            if not any(match_path(p, path) for p in patterns):
                return False
        if self.command_pattern is not None:
            command = action.command or ""
            if not any(
                match_command(p, command, exact_final_token=self.exact_path)
                for p in self.command_pattern
            ):
                return False
        if self.contains is not None:
            if not contains_all_groups(self.contains, action.command or ""):
                return False
        if self.sql_verbs is not None:
            if classify_sql(action.sql or "") not in self.sql_verbs:
                return False
        if self.destination_pattern is not None:
            host = action.destination or ""
            if not any(match_domain(p, host) for p in self.destination_pattern):
                return False
        return True


@dataclass(frozen=True)
class RateLimitConfig:
    tool: str
    max_calls: int
    window_seconds: float


@dataclass(frozen=True)
class PolicyDefaults:
    decision: Verdict = Verdict.ASK
    approval_timeout_seconds: int = 120


@dataclass(frozen=True)
class PolicyDocument:
    version: int
    defaults: PolicyDefaults
    rules: tuple[PolicyRule, ...]
    rate_limits: tuple[RateLimitConfig, ...]
    tool_mappings: tuple[ToolMapping, ...]
    content_hash: str


def content_hash(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _expand_home(pattern: str, home: str) -> str:
    if pattern == "~":
        return home
    if pattern.startswith("~/"):
        return home.rstrip("/") + pattern[1:]
    return pattern


def _as_list(value: Any) -> list[Any]:
    return value if isinstance(value, list) else [value]


def _parse_rule(raw: Any, index: int, home: str, errors: list[str]) -> PolicyRule | None:
    where = f"rules[{index}]"
    if not isinstance(raw, dict):
        errors.append(f"{where}: expected a mapping")
        return None
    unknown = set(raw) - _RULE_KEYS
    if unknown:
        errors.append(f"{where}: unknown fields {sorted(unknown)}")

    rule_id = raw.get("id")
    if not isinstance(rule_id, str) or not rule_id:
        errors.append(f"{where}: missing or invalid 'id'")
        rule_id = f"<rule {index}>"

    try:
        action = ActionType(str(raw.get("action")))
    except ValueError:
        errors.append(f"{where} ({rule_id}): invalid action {raw.get('action')!r}")
        action = ActionType.EXECUTE
    try:
        decision = Verdict(str(raw.get("decision")))
    except ValueError:
        errors.append(f"{where} ({rule_id}): invalid decision {raw.get('decision')!r}")
        decision = Verdict.DENY

    path_pattern = None
    if "path_pattern" in raw:
        items = _as_list(raw["path_pattern"])
        if not items or not all(isinstance(p, str) and p for p in items):
            errors.append(f"{where} ({rule_id}): path_pattern must be a string or list of strings")
        else:
            path_pattern = tuple(_expand_home(p, home) for p in items)
        if action not in _PATH_ACTIONS:
            errors.append(f"{where} ({rule_id}): path_pattern only valid for read/write/delete")

    command_pattern = None
    if "command_pattern" in raw:
        items = _as_list(raw["command_pattern"])
        if not items or not all(isinstance(p, str) and p for p in items):
            errors.append(
                f"{where} ({rule_id}): command_pattern must be a string or list of strings"
            )
        else:
            command_pattern = tuple(items)
        if action is not ActionType.EXECUTE:
            errors.append(f"{where} ({rule_id}): command_pattern only valid for execute")

    contains = None
    if "contains" in raw:
        groups: list[tuple[str, ...]] = []
        ok = True
        for clause in _as_list(raw["contains"]):
            alternatives = _as_list(clause)
            if not alternatives or not all(isinstance(s, str) and s for s in alternatives):
                ok = False
                break
            groups.append(tuple(alternatives))
        if ok and groups:
            contains = tuple(groups)
        else:
            errors.append(
                f"{where} ({rule_id}): contains must be a string, a list of strings, "
                "or a list of alternative groups"
            )
        if action is not ActionType.EXECUTE:
            errors.append(f"{where} ({rule_id}): contains only valid for execute")

    sql_verbs = None
    if "sql_verbs" in raw:
        items = _as_list(raw["sql_verbs"])
        if not items or not all(isinstance(v, str) and v for v in items):
            errors.append(f"{where} ({rule_id}): sql_verbs must be a list of strings")
        else:
            sql_verbs = frozenset(v.upper() for v in items)
        if action is not ActionType.SQL:
            errors.append(f"{where} ({rule_id}): sql_verbs only valid for sql")

    destination_pattern = None
    if "destination_pattern" in raw:
        items = _as_list(raw["destination_pattern"])
        if not items or not all(isinstance(p, str) and p for p in items):
            errors.append(
                f"{where} ({rule_id}): destination_pattern must be a string or list of strings"
            )
        else:
            destination_pattern = tuple(items)
        if action is not ActionType.NETWORK:
            errors.append(f"{where} ({rule_id}): destination_pattern only valid for network")

    exact_path = raw.get("exact_path", False)
    if not isinstance(exact_path, bool):
        errors.append(f"{where} ({rule_id}): exact_path must be a boolean")
        exact_path = False
    if exact_path and "command_pattern" not in raw:
        errors.append(f"{where} ({rule_id}): exact_path requires command_pattern")

    if not any(
        k in raw for k in ("path_pattern", "command_pattern", "contains", "sql_verbs",
                           "destination_pattern")
    ):
        errors.append(f"{where} ({rule_id}): at least one matcher field is required")

    return PolicyRule(
        id=rule_id,
        action=action,
        decision=decision,
        path_pattern=path_pattern,
        command_pattern=command_pattern,
        contains=contains,
        sql_verbs=sql_verbs,
        destination_pattern=destination_pattern,
        exact_path=exact_path,
    )


def _parse_mapping(raw: Any, index: int, errors: list[str]) -> ToolMapping | None:
    where = f"tool_mappings[{index}]"
    if not isinstance(raw, dict):
        errors.append(f"{where}: expected a mapping")
        return None
    unknown = set(raw) - _MAPPING_KEYS
    if unknown:
        errors.append(f"{where}: unknown fields {sorted(unknown)}")
    tool = raw.get("tool")
    if not isinstance(tool, str) or not tool:
        errors.append(f"{where}: missing or invalid 'tool'")
        return None
    try:
        action = ActionType(str(raw.get("action")))
    except ValueError:
        errors.append(f"{where} ({tool}): invalid action {raw.get('action')!r}")
        return None
    kwargs = {}
    for key in ("path_arg", "command_arg", "sql_arg", "destination_arg"):
        if key in raw:
            if not isinstance(raw[key], str) or not raw[key]:
                errors.append(f"{where} ({tool}): {key} must be a non-empty string")
                return None
            kwargs[key] = raw[key]
    try:
        return ToolMapping(tool_name_pattern=tool, action_type=action, **kwargs)
    except ValueError as exc:
        errors.append(f"{where} ({tool}): {exc}")
        return None


def parse_policy(data: bytes, *, home: str | None = None) -> PolicyDocument:
    """Parse and validate policy file bytes into an immutable PolicyDocument.

    Collects every violation before failing so a broken file is fixable
    in one pass. ``~`` in path patterns expands against *home* (process
    home by default); ``${workspace}`` stays symbolic until evaluation.
    """
    home = home if home is not None else str(Path.home())
    errors: list[str] = []

    try:
        raw = yaml.safe_load(data)
    except yaml.YAMLError as exc:
        raise PolicyError([f"YAML syntax error: {exc}"]) from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise PolicyError(["top level must be a mapping"])

    unknown = set(raw) - _TOP_KEYS
    if unknown:
        errors.append(f"unknown top-level keys {sorted(unknown)}")

    version = raw.get("version", 1)
    if version != 1:
        errors.append(f"unsupported schema version {version!r} (expected 1)")

    defaults = PolicyDefaults()
    raw_defaults = raw.get("defaults", {})
    if raw_defaults is None:
        raw_defaults = {}
    if not isinstance(raw_defaults, dict):
        errors.append("defaults: expected a mapping")
    else:
        unknown = set(raw_defaults) - _DEFAULTS_KEYS
        if unknown:
            errors.append(f"defaults: unknown fields {sorted(unknown)}")
        decision = Verdict.ASK
        if "decision" in raw_defaults:
            try:
                decision = Verdict(str(raw_defaults["decision"]))
            except ValueError:
                errors.append(f"defaults: invalid decision {raw_defaults['decision']!r}")
        timeout = raw_defaults.get("approval_timeout_seconds", 120)
        if not isinstance(timeout, int) or isinstance(timeout, bool) or timeout < 1:
            errors.append("defaults: approval_timeout_seconds must be a positive integer")
            timeout = 120
        defaults = PolicyDefaults(decision=decision, approval_timeout_seconds=timeout)

    rules: list[PolicyRule] = []
    raw_rules = raw.get("rules", [])
    if raw_rules is None:
        raw_rules = []
    if not isinstance(raw_rules, list):
        errors.append("rules: expected a list")
    else:
        seen_ids: set[str] = set()
        for i, item in enumerate(raw_rules):
            rule = _parse_rule(item, i, home, errors)
            if rule is None:
                continue
            if rule.id in seen_ids:
                errors.append(f"duplicate rule id '{rule.id}'")
            seen_ids.add(rule.id)
            rules.append(rule)

    rate_limits: list[RateLimitConfig] = []
    raw_limits = raw.get("rate_limits", [])
    if raw_limits is None:
        raw_limits = []
    if not isinstance(raw_limits, list):
        errors.append("rate_limits: expected a list")
    else:
        for i, item in enumerate(raw_limits):
            where = f"rate_limits[{i}]"
            if not isinstance(item, dict):
                errors.append(f"{where}: expected a mapping")
                continue
            unknown = set(item) - {"tool", "max_calls", "window_seconds"}
            if unknown:
                errors.append(f"{where}: unknown fields {sorted(unknown)}")
            tool = item.get("tool")
            max_calls = item.get("max_calls")
            window = item.get("window_seconds")
            if not isinstance(tool, str) or not tool:
                errors.append(f"{where}: missing or invalid 'tool'")
                continue
            if not isinstance(max_calls, int) or isinstance(max_calls, bool) or max_calls < 1:
                errors.append(f"{where} ({tool}): max_calls must be a positive integer")
                continue
            if not isinstance(window, (int, float)) or isinstance(window, bool) or window <= 0:
                errors.append(f"{where} ({tool}): window_seconds must be positive")
                continue
            rate_limits.append(RateLimitConfig(tool=tool, max_calls=max_calls,
                                               window_seconds=float(window)))

    mappings: list[ToolMapping] = []
    raw_mappings = raw.get("tool_mappings", [])
    if raw_mappings is None:
        raw_mappings = []
    if not isinstance(raw_mappings, list):
        errors.append("tool_mappings: expected a list")
    else:
        for i, item in enumerate(raw_mappings):
            mapping = _parse_mapping(item, i, errors)
            if mapping is not None:
                mappings.append(mapping)

    if errors:
        raise PolicyError(errors)

    return PolicyDocument(
        version=int(version),
        defaults=defaults,
        rules=tuple(rules),
        rate_limits=tuple(rate_limits),
        tool_mappings=tuple(mappings),
        content_hash=content_hash(data),
    )


def evaluate(doc: PolicyDocument, action: ActionProposal) -> tuple[Verdict, str | None, float]:
    """First-match scan of the document's rules against one proposal.

    Returns (verdict, matched rule id or None, scan latency in ms).
    Deterministic and total: no match falls through to the document's
    default decision.
    """
    start = time.perf_counter()
    verdict = doc.defaults.decision
    rule_id: str | None = None
    for rule in doc.rules:
        if rule.matches(action):
            verdict = rule.decision
            rule_id = rule.id
            break
    latency_ms = (time.perf_counter() - start) * 1000.0
    return verdict, rule_id, latency_ms


def reload_if_changed(
    current: PolicyDocument, file: Path, *, home: str | None = None
) -> tuple[PolicyDocument, bool, str | None]:
    """Swap in the policy file's content if its bytes changed and parse cleanly.

    Returns (document, reload_detected, warning). A missing or invalid
    file keeps the current document active (fail-safe) and reports the
    problem as the warning string for the caller to log.
    """
    try:
        data = file.read_bytes()
    except OSError as exc:
        return current, False, f"policy file unreadable, keeping active policy: {exc}"
    if content_hash(data) == current.content_hash:
        return current, False, None
    try:
        new_doc = parse_policy(data, home=home)
    except PolicyError as exc:
        return current, False, f"policy reload rejected, keeping active policy: {exc}"
    return new_doc, True, None


class PolicyEngine:
    """Owns the active PolicyDocument for a session and its hot reload.

    Evaluation is read-only over an immutable document; reload swaps the
    document reference atomically, so concurrent evaluations see either
    the old or the new policy, never a torn state.
    """

    def __init__(self, policy_path: Path, *, home: str | None = None):
        self.policy_path = Path(policy_path)
        self.home = home if home is not None else str(Path.home())
        self._lock = threading.Lock()
        self._doc = parse_policy(self.policy_path.read_bytes(), home=self.home)

    @property
    def document(self) -> PolicyDocument:
        return self._doc

    def check_reload(self) -> tuple[bool, str | None]:
        """Synchronous reload probe; call before each evaluation."""
        with self._lock:
            doc, detected, warning = reload_if_changed(
                self._doc, self.policy_path, home=self.home
            )
            self._doc = doc
        return detected, warning

    def evaluate(self, action: ActionProposal) -> tuple[Verdict, str | None, float]:
        return evaluate(self._doc, action)

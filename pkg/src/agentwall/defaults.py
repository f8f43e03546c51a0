"""Shipped default configuration and first-run setup.

The default policy blocks credential reads, shell-profile writes, piped
remote-script execution, command substitution through eval, destructive
SQL, and ``rm -rf`` aimed at ``/``; escalates sudo, other recursive
deletes, and mutating SQL; allows a small safe-command list plus reads
and writes inside the active workspace; and caps the ``exec`` tool at 30
calls per rolling minute. Everything else falls through to the ASK
default, so unknown territory always reaches a human.
"""

from __future__ import annotations

import os
import secrets
from pathlib import Path

ENV_HOME = "AGENTWALL_HOME"
ENV_POLICY = "AGENTWALL_POLICY"

DEFAULT_CONTROL_PORT = 48620

DEFAULT_POLICY_YAML = """\
# AgentWall policy. Rules are evaluated top to bottom; the first rule whose
# action type and every listed matcher hold decides. No match falls through
# to defaults.decision. Edits apply live: the proxy re-reads this file before
# every evaluation.
version: 1

defaults:
  decision: ask
  approval_timeout_seconds: 120

rules:
  - id: deny-ssh-keys
    action: read
    path_pattern: "~/.ssh/**"
    decision: deny

  - id: deny-cloud-creds
    action: read
    path_pattern: "~/.aws/**"
    decision: deny

  - id: deny-shell-profile-writes
    action: write
    path_pattern: ["~/.bashrc", "~/.zshrc", "~/.profile"]
    decision: deny

  # Piped remote-script execution: any fetcher combined with any shell sink.
  - id: deny-curl-pipe-shell
    action: execute
    contains:
      - ["curl ", "wget "]
      - ["| sh", "| bash"]
    decision: deny

  - id: deny-eval-subst
    action: execute
    contains: "eval $("
    decision: deny

  # Final token matches by prefix, so this also fires on rm -rf /tmp/...;
  # add `exact_path: true` to restrict it to the filesystem root alone.
  - id: deny-rm-rf-root
    action: execute
    command_pattern: "rm -rf /"
    decision: deny

  - id: ask-rm-rf-any
    action: execute
    command_pattern: "rm -rf *"
    decision: ask

  - id: ask-sudo
    action: execute
    command_pattern: "sudo *"
    decision: ask

  - id: deny-sql-drop
    action: sql
    sql_verbs: [DROP, TRUNCATE]
    decision: deny

  - id: ask-sql-mutation
    action: sql
    sql_verbs: [DELETE, UPDATE]
    decision: ask

  - id: allow-sql-select
    action: sql
    sql_verbs: [SELECT]
    decision: allow

  - id: allow-safe-exec
    action: execute
    command_pattern: ["ls *", "cat *", "pwd", "git status", "git diff *"]
    decision: allow

  - id: allow-workspace-read
    action: read
    path_pattern: "${workspace}/**"
    decision: allow

  - id: allow-workspace-write
    action: write
    path_pattern: "${workspace}/**"
    decision: allow

rate_limits:
  - tool: exec
    max_calls: 30
    window_seconds: 60

tool_mappings:
  - {tool: read_file, action: read, path_arg: path}
  - {tool: write_file, action: write, path_arg: path}
  - {tool: edit_file, action: write, path_arg: path}
  - {tool: delete_file, action: delete, path_arg: path}
  - {tool: exec, action: execute, command_arg: command}
  - {tool: run_command, action: execute, command_arg: command}
  - {tool: bash, action: execute, command_arg: command}
  - {tool: query, action: sql, sql_arg: sql}
  - {tool: sql, action: sql, sql_arg: sql}
  - {tool: fetch, action: network, destination_arg: url}
  - {tool: http_request, action: network, destination_arg: url}
"""

_EXACT_PATH_ANCHOR = '''  - id: deny-rm-rf-root
    action: execute
    command_pattern: "rm -rf /"
    decision: deny
'''

_EXACT_PATH_REPLACEMENT = '''  - id: deny-rm-rf-root
    action: execute
    command_pattern: "rm -rf /"
    exact_path: true
    decision: deny
'''


def exact_path_variant(policy_yaml: str = DEFAULT_POLICY_YAML) -> str:
    """The default policy with the rm-rf deny narrowed to the exact root path."""
    if _EXACT_PATH_ANCHOR not in policy_yaml:
        raise ValueError("policy text does not contain the stock deny-rm-rf-root rule")
    return policy_yaml.replace(_EXACT_PATH_ANCHOR, _EXACT_PATH_REPLACEMENT)


def agentwall_home(env: dict | None = None) -> Path:
    env = os.environ if env is None else env
    override = env.get(ENV_HOME)
    if override:
        return Path(override)
    return Path.home() / ".agentwall"


def policy_path(env: dict | None = None) -> Path:
    env = os.environ if env is None else env
    override = env.get(ENV_POLICY)
    if override:
        return Path(override)
    return agentwall_home(env) / "policy.yaml"


def token_path(env: dict | None = None) -> Path:
    return agentwall_home(env) / "control.token"


def port_path(env: dict | None = None) -> Path:
    return agentwall_home(env) / "control.port"


def sessions_dir(env: dict | None = None) -> Path:
    return agentwall_home(env) / "sessions"


def ensure_token(path: Path) -> str:
    """Create the control API bearer token with owner-only permissions."""
    if path.exists():
        return path.read_text(encoding="utf-8").strip()
    token = secrets.token_hex(16)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(token + "\n", encoding="utf-8")
    os.chmod(path, 0o600)
    return token


def init_home(home: Path | None = None, env: dict | None = None) -> list[str]:
    """Write the default policy, control token, and sessions dir if absent.

    Idempotent: a second run changes nothing and reports nothing. Returns
    the names of the pieces it created.
    """
    home = agentwall_home(env) if home is None else Path(home)
    created: list[str] = []
    home.mkdir(parents=True, exist_ok=True)

    policy_file = home / "policy.yaml"
    if not policy_file.exists():
        policy_file.write_text(DEFAULT_POLICY_YAML, encoding="utf-8")
        created.append(policy_file.name)

    token_file = home / "control.token"
    if not token_file.exists():
        ensure_token(token_file)
        created.append(token_file.name)

    sessions = home / "sessions"
    if not sessions.exists():
        sessions.mkdir()
        created.append("sessions/")

    return created

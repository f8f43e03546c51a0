"""Pattern matchers the policy rules are built from.

Three small matching languages live here:

* token-prefix command patterns (``rm -rf /`` style),
* path globs where ``**`` crosses ``/`` and ``*`` does not,
* SQL leading-verb classification with comment stripping.

Command matching deliberately keeps its over-aggressive prefix behavior:
every pattern token matches the corresponding command token by string
prefix, so the pattern ``rm -rf /`` fires on ``rm -rf /tmp/test``. Rules
can opt out per pattern with ``exact_path: true``, which switches the
final token to whole-token equality.
"""

from __future__ import annotations

import re
from functools import lru_cache

SQL_VERBS = frozenset(
    {
        "SELECT", "INSERT", "UPDATE", "DELETE", "DROP", "CREATE", "ALTER",
        "TRUNCATE", "GRANT", "REVOKE", "WITH", "EXPLAIN", "PRAGMA", "BEGIN",
        "COMMIT", "ROLLBACK", "VACUUM", "ANALYZE", "ATTACH", "DETACH",
        "REPLACE", "MERGE", "CALL", "SET", "SHOW", "DESCRIBE", "USE",
    }
)

_WORD_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def match_command(pattern: str, command: str, *, exact_final_token: bool = False) -> bool:
    """Match a whitespace-tokenized command against a token-prefix pattern.

    A trailing ``*`` pattern token matches any remainder, including an
    empty one; a non-trailing ``*`` consumes exactly one token. Every
    other pattern token must be a string prefix of the corresponding
    command token. Command tokens beyond the pattern are ignored, so the
    pattern matches any command that starts with it.

    With ``exact_final_token`` the last pattern token must equal its
    command token instead of merely prefixing it (``rm -rf /`` then stops
    matching ``rm -rf /tmp/test`` while still matching ``rm -rf /``).
    """
    pattern_tokens = pattern.split()
    command_tokens = command.split()

    for i, ptok in enumerate(pattern_tokens):
        is_last = i == len(pattern_tokens) - 1
        if ptok == "*":
            if is_last:
                return True
            if i >= len(command_tokens):
                return False
            continue
        if i >= len(command_tokens):
            return False
        ctok = command_tokens[i]
        if is_last and exact_final_token:
            if ctok != ptok:
                return False
        elif not ctok.startswith(ptok):
            return False
    return True


def contains_all_groups(groups: tuple[tuple[str, ...], ...], command: str) -> bool:
    """Every group must hit; within a group any one substring suffices."""
    return all(any(needle in command for needle in group) for group in groups)


@lru_cache(maxsize=1024)
def _glob_regex(pattern: str, separator: str) -> re.Pattern[str]:
    out: list[str] = []
    i = 0
    while i < len(pattern):
        ch = pattern[i]
        if ch == "*":
            if pattern.startswith("**", i):
                out.append(".*")
                i += 2
            else:
                out.append(f"[^{re.escape(separator)}]*")
                i += 1
        else:
            out.append(re.escape(ch))
            i += 1
    return re.compile("^" + "".join(out) + "$")


def match_path(pattern: str, path: str) -> bool:
    """Case-sensitive path glob: ``**`` spans ``/``, ``*`` stays in one segment."""
    return _glob_regex(pattern, "/").match(path) is not None


def match_domain(pattern: str, host: str) -> bool:
    """Domain glob: ``*`` stays within one dot-separated label, ``**`` spans."""
    return _glob_regex(pattern, ".").match(host) is not None


def classify_sql(statement: str) -> str:
    """Return the statement's leading SQL verb, uppercased.

    Leading whitespace, ``--`` line comments, and ``/* */`` block
    comments are skipped first. Anything that does not start with a
    recognized verb classifies as ``UNKNOWN`` (which the default policy
    escalates rather than allows).
    """
    i = 0
    n = len(statement)
    while i < n:
        if statement[i].isspace():
            i += 1
        elif statement.startswith("--", i):
            end = statement.find("\n", i)
            i = n if end == -1 else end + 1
        elif statement.startswith("/*", i):
            end = statement.find("*/", i + 2)
            i = n if end == -1 else end + 2
        else:
            break
    match = _WORD_RE.match(statement, i)
    if not match:
        return "UNKNOWN"
    verb = match.group(0).upper()
    return verb if verb in SQL_VERBS else "UNKNOWN"

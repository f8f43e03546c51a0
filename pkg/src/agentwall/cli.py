"""The agentwall command line: proxy, replay, policy, approve, bench, init.

Exit codes: 0 success, 1 operational error, 2 usage error. Every
subcommand resolves paths the same way: explicit flags win, then the
AGENTWALL_POLICY / AGENTWALL_HOME environment variables, then
``~/.agentwall``.
"""

from __future__ import annotations

import argparse
import json
import sys
import urllib.error
import urllib.request
from pathlib import Path

from . import __version__
from .audit import ReplayFilters, SessionNotFoundError, find_session_file, render_table, replay
from .bench import IN_PROCESS, THROUGH_PROXY, run_bench, write_json_report
from .defaults import (
    DEFAULT_CONTROL_PORT,
    agentwall_home,
    exact_path_variant,
    init_home,
    policy_path,
    port_path,
    sessions_dir,
    token_path,
    DEFAULT_POLICY_YAML,
)
from .policy import PolicyError, parse_policy
from .proxy import run_proxy


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="agentwall",
        description="Runtime policy firewall and audit trail for local AI agent tool calls.",
    )
    parser.add_argument("--version", action="version", version=f"agentwall {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("proxy", help="run the MCP stdio proxy in front of a tool server")
    p.add_argument("--policy", type=Path, help="policy file (default: $AGENTWALL_POLICY or ~/.agentwall/policy.yaml)")
    p.add_argument("--workspace", help="workspace root for ${workspace} rules (default: cwd)")
    p.add_argument("--control-port", type=int, default=DEFAULT_CONTROL_PORT,
                   help=f"control API port, 0 for ephemeral (default {DEFAULT_CONTROL_PORT})")
    p.add_argument("--session-dir", type=Path, help="audit log directory (default: ~/.agentwall/sessions)")
    p.add_argument("downstream", nargs=argparse.REMAINDER,
                   help="-- followed by the downstream MCP server command")

    p = sub.add_parser("replay", help="reconstruct a session's decisions from the audit log")
    p.add_argument("--session", help="filter to one session id")
    p.add_argument("--date", help="session file date YYYY-MM-DD (default: newest)")
    p.add_argument("--decision", help="filter by decision (ALLOW/DENY/ASK/...)")
    p.add_argument("--tool", help="filter by tool name")
    p.add_argument("--since", help="earliest ISO timestamp")
    p.add_argument("--until", help="latest ISO timestamp")
    p.add_argument("--session-dir", type=Path, help="audit log directory")
    p.add_argument("--json", action="store_true", help="machine-readable output")

    p = sub.add_parser("policy", help="policy file utilities")
    policy_sub = p.add_subparsers(dest="policy_command", metavar="ACTION")
    v = policy_sub.add_parser("validate", help="parse the policy and report every violation")
    v.add_argument("--policy", type=Path, help="policy file to validate")
    v.add_argument("--json", action="store_true")

    p = sub.add_parser("approve", help="resolve a pending approval via the control API")
    p.add_argument("request_id", help="approval request id (see dashboard or pending list)")
    p.add_argument("--reject", action="store_true", help="reject instead of approving")
    p.add_argument("--port", type=int, help="control API port (default: recorded port file)")

    p = sub.add_parser("bench", help="run the 14-case enforcement benchmark")
    p.add_argument("--policy", type=Path, help="policy file (default: shipped default policy)")
    p.add_argument("--through-proxy", action="store_true",
                   help="drive a real proxy subprocess with the mock tool server")
    p.add_argument("--exact-path-variant", action="store_true",
                   help="use the exact_path policy variant (flips case 4 to ASK)")
    p.add_argument("--json", type=Path, metavar="OUT", help="also write a JSON report")
    p.add_argument("--session-dir", type=Path, help="where the bench session log goes")

    sub.add_parser("init", help="write the default policy, token, and session dir")

    return parser


def _cmd_proxy(args) -> int:
    downstream = list(args.downstream)
    if downstream and downstream[0] == "--":
        downstream = downstream[1:]
    if not downstream:
        print("agentwall proxy: missing downstream command after --", file=sys.stderr)
        return 2
    policy_file = args.policy if args.policy else policy_path()
    if not Path(policy_file).exists():
        print(
            f"agentwall: policy file {policy_file} not found (run `agentwall init` first)",
            file=sys.stderr,
        )
        return 1
    return run_proxy(
        downstream,
        policy_path=Path(policy_file),
        workspace=args.workspace,
        control_port=args.control_port,
        session_dir=args.session_dir if args.session_dir else sessions_dir(),
        agentwall_home=agentwall_home(),
        ui_dir=_ui_dir(),
    )


def _ui_dir() -> Path | None:
    """Locate built dashboard assets: $AGENTWALL_UI, then ~/.agentwall/ui,
    then a frontend/dist sitting next to a source checkout."""
    import os

    override = os.environ.get("AGENTWALL_UI")
    if override:
        path = Path(override)
        return path if path.is_dir() else None
    for candidate in (
        agentwall_home() / "ui",
        Path(__file__).resolve().parents[2] / "frontend" / "dist",
    ):
        if (candidate / "index.html").is_file():
            return candidate
    return None


def _cmd_replay(args) -> int:
    directory = args.session_dir if args.session_dir else sessions_dir()
    try:
        path = find_session_file(Path(directory), date=args.date)
        result = replay(
            path,
            ReplayFilters(
                session_id=args.session,
                decision=args.decision,
                tool=args.tool,
                since=args.since,
                until=args.until,
            ),
        )
    except SessionNotFoundError as exc:
        print(f"agentwall replay: {exc}", file=sys.stderr)
        return 1
    if args.json:
        print(json.dumps(result.to_dict(), indent=2))
    else:
        print(render_table(result))
    return 0 if result.chain_ok else 1


def _cmd_policy_validate(args) -> int:
    policy_file = args.policy if args.policy else policy_path()
    try:
        data = Path(policy_file).read_bytes()
    except OSError as exc:
        print(f"agentwall policy validate: {exc}", file=sys.stderr)
        return 1
    try:
        doc = parse_policy(data)
    except PolicyError as exc:
        if args.json:
            print(json.dumps({"valid": False, "violations": exc.violations}, indent=2))
        else:
            print(f"invalid: {len(exc.violations)} violation(s)")
            for violation in exc.violations:
                print(f"  - {violation}")
        return 1
    summary = {
        "valid": True,
        "rules": len(doc.rules),
        "rate_limits": len(doc.rate_limits),
        "tool_mappings": len(doc.tool_mappings),
        "content_hash": doc.content_hash,
    }
    if args.json:
        print(json.dumps(summary, indent=2))
    else:
        print(
            f"valid, {summary['rules']} rules, {summary['rate_limits']} rate limit(s), "
            f"{summary['tool_mappings']} tool mapping(s) [{doc.content_hash[:12]}]"
        )
    return 0


def _cmd_approve(args) -> int:
    port = args.port
    if port is None:
        try:
            port = int(port_path().read_text().strip())
        except (OSError, ValueError):
            print(
                "agentwall approve: no control port recorded; is a proxy running? "
                "(or pass --port)",
                file=sys.stderr,
            )
            return 1
    try:
        token = token_path().read_text().strip()
    except OSError as exc:
        print(f"agentwall approve: cannot read control token: {exc}", file=sys.stderr)
        return 1
    body = json.dumps({"decision": "reject" if args.reject else "approve"}).encode()
    request = urllib.request.Request(
        f"http://127.0.0.1:{port}/v1/approvals/{args.request_id}/decision",
        data=body,
        method="POST",
        headers={"Authorization": f"Bearer {token}", "Content-Type": "application/json"},
    )
    try:
        with urllib.request.urlopen(request, timeout=10) as response:
            resolved = json.loads(response.read())
    except urllib.error.HTTPError as exc:
        detail = exc.read().decode(errors="replace")
        print(f"agentwall approve: {exc.code}: {detail}", file=sys.stderr)
        return 1
    except urllib.error.URLError as exc:
        print(f"agentwall approve: cannot reach control API: {exc}", file=sys.stderr)
        return 1
    print(f"{resolved['id']}: {resolved['state']}")
    return 0


def _cmd_bench(args) -> int:
    import tempfile

    if args.policy:
        policy_file = Path(args.policy)
        if args.exact_path_variant:
            text = exact_path_variant(policy_file.read_text(encoding="utf-8"))
            policy_file = Path(tempfile.mkdtemp(prefix="agentwall-variant-")) / "policy.yaml"
            policy_file.write_text(text, encoding="utf-8")
    else:
        text = exact_path_variant() if args.exact_path_variant else DEFAULT_POLICY_YAML
        policy_file = Path(tempfile.mkdtemp(prefix="agentwall-default-")) / "policy.yaml"
        policy_file.write_text(text, encoding="utf-8")

    session_dir = args.session_dir if args.session_dir else sessions_dir()
    try:
        report = run_bench(
            policy_file,
            mode=THROUGH_PROXY if args.through_proxy else IN_PROCESS,
            session_dir=Path(session_dir),
        )
    except (PolicyError, RuntimeError, TimeoutError) as exc:
        print(f"agentwall bench: {exc}", file=sys.stderr)
        return 1
    print(report.render_table())
    if args.json:
        write_json_report(report, args.json)
        print(f"JSON report: {args.json}")
    return 0 if report.passed == report.total else 1


def _cmd_init(_args) -> int:
    home = agentwall_home()
    created = init_home(home)
    if created:
        print(f"initialized {home}: " + ", ".join(created))
    else:
        print(f"{home} already initialized")
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    if args.command == "proxy":
        return _cmd_proxy(args)
    if args.command == "replay":
        return _cmd_replay(args)
    if args.command == "policy":
        if args.policy_command != "validate":
            print("usage: agentwall policy validate [--policy PATH]", file=sys.stderr)
            return 2
        return _cmd_policy_validate(args)
    if args.command == "approve":
        return _cmd_approve(args)
    if args.command == "bench":
        return _cmd_bench(args)
    if args.command == "init":
        return _cmd_init(args)
    return 2


if __name__ == "__main__":
    sys.exit(main())

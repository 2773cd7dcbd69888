"""Command-line entry point.

Exit codes: 0 success, 1 operational error, 2 validation failures,
3 blocking gaps (audit gate; wins over 2), 4 usage error.
"""

from __future__ import annotations

import argparse
import json
import shlex
import sys
from collections.abc import Callable, Sequence
from pathlib import Path

from . import __version__
from ._fs import LockError, PathEscapeError
from .artifacts import validate_artifact
from .artifacts.tree import load_claim_store, load_documents, load_gaps
from .claims import ClaimError, blocking_gaps, build_confidence_report, render_confidence_table, summarize_gaps
from .config import ConfigError, load_config
from .diagrams import FORMATS, DiagramError, export_diagrams
from .installer import (
    DEFAULT_ENGINES,
    InstallConfig,
    InstallError,
    InstallValidationError,
    add_agent,
    add_engine,
    detect_engines,
    install,
    status,
    uninstall,
    update,
)
from .manifest import ManifestError
from .metrics import MetricsError, assemble_audit_package
from .pipeline import (
    ExternalCommandExecutor,
    MockExecutor,
    PipelineError,
    PlanError,
    StageStatus,
    StateError,
    plan_stages,
    render_plan,
    repository_files,
    run_team,
)
from .teams import TEAMS, UnknownTeamError, get_team

EXIT_OK, EXIT_ERROR, EXIT_INVALID, EXIT_BLOCKED, EXIT_USAGE = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit 2, which means "invalid" here
        raise UsageError(f"{message}\n{self.format_usage().rstrip()}")


_GLOBAL_DEFAULTS = {
    "root": Path("."),
    "dry_run": False,
    "yes": False,
    "format": "text",
    "force": False,
    "break_lock": False,
}


def _global_flags(parser: argparse.ArgumentParser, *, suppress: bool) -> None:
    # after the command name the flags default to SUPPRESS so they do not
    # clobber values given before it
    d = (lambda _: argparse.SUPPRESS) if suppress else _GLOBAL_DEFAULTS.get
    parser.add_argument("--root", type=Path, default=d("root"), help="project root (default: current directory)")
    parser.add_argument("--dry-run", action="store_true", default=d("dry_run"), help="show what would change; write nothing")
    parser.add_argument("--yes", "-y", action="store_true", default=d("yes"), help="assume yes; never prompt")
    parser.add_argument("--format", choices=("text", "json"), default=d("format"), help="report format")
    parser.add_argument("--force", action="store_true", default=d("force"), help="rerun done stages; allow cross-major update")
    parser.add_argument("--break-lock", action="store_true", default=d("break_lock"), help="remove a stale project lock")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="reversa", description="Reverse documentation engineering for legacy code.")
    parser.add_argument("--version", action="version", version=f"reversa {__version__}")
    _global_flags(parser, suppress=False)
    # the same flags are accepted after the command name
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)

    def add(name: str, help: str) -> argparse.ArgumentParser:
        return sub.add_parser(name, help=help, parents=[common])

    p = add("install", "install skills, entry files and the .reversa/ state layout")
    p.add_argument("--engine", action="append", default=[], help="engine id (repeatable or comma-separated)")
    p.add_argument("--team", action="append", default=[], help="team id (repeatable or comma-separated)")
    p.add_argument("--project-name", default="")
    p.add_argument("--analyzed-version", default="")
    p.add_argument("--output-root", default=None)
    add("update", "refresh pristine installed files; keep edited ones")
    add("status", "classify installed files as intact, modified or missing")
    add("uninstall", "remove pristine installed files; keep edited and untracked ones")
    p = add("add-agent", "install another team's skills")
    p.add_argument("team")
    p = add("add-engine", "install skills for another engine")
    p.add_argument("engine")
    p = add("export-diagrams", "write dependency and impact graphs as DOT and Mermaid")
    p.add_argument("--diagram-format", choices=(*FORMATS, "all"), default="all")
    p = add("run", "run (or resume) a team's stage plan")
    p.add_argument("--team", default="discovery")
    p.add_argument("--executor", default="mock", help="'mock' or a command line for the external executor")
    p.add_argument("--replan", action="store_true", help="accept a changed stage plan, keeping finished stages")
    p = add("audit", "validate artifacts, apply the blocking-gap gate and assemble the audit package")
    p.add_argument("--escalate-unevidenced", action="store_true")
    add("claims-report", "print the confidence distribution of the current claim store")
    return parser


# --- helpers -----------------------------------------------------------------


def _split(values: Sequence[str]) -> list[str]:
    return [v.strip() for raw in values for v in raw.split(",") if v.strip()]


def _interactive() -> bool:
    return sys.stdin.isatty() and sys.stdout.isatty()


def _emit(args, data: dict, text: str) -> None:
    if args.format == "json":
        print(json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False))
    elif text:
        print(text.rstrip("\n"))


def _choose(args, what: str, options: Sequence[str], default: list[str]) -> list[str]:
    if args.yes:
        return default
    if not _interactive():
        raise UsageError(f"no {what} selected and no terminal to ask; pass --{what} or --yes")
    shown = ", ".join(options)
    answer = input(f"{what} [{', '.join(default) or 'none'}] (choose from {shown}): ").strip()
    return _split([answer]) if answer else default


def _confirm(args, question: str) -> bool:
    if args.yes or args.dry_run:
        return True
    if not _interactive():
        raise UsageError(f"{question} needs confirmation; pass --yes")
    return input(f"{question} [y/N] ").strip().lower() in ("y", "yes")


def _install_text(report) -> str:
    mode = "would write" if report.dry_run else "wrote"
    lines = [f"{report.command}: {mode} {len(report.written)} file(s)"]
    for path, verb, outcome in report.outcomes:
        if verb in ("preserve", "skip", "delete") or outcome not in ("done", "planned"):
            lines.append(f"  {verb:8} {outcome:11} {path}")
    if report.error:
        lines.append(f"error: {report.error}")
    return "\n".join(lines)


def _install_result(args, report) -> int:
    _emit(args, report.to_dict(), _install_text(report))
    if not report.ok:
        raise InstallError(report.error or "apply failed")
    return EXIT_OK


# --- commands ----------------------------------------------------------------


def cmd_install(args) -> int:
    root = args.root
    engines = _split(args.engine)
    if not engines:
        detected = [e.id for e in detect_engines(root)]
        engines = _choose(args, "engine", [e.id for e in DEFAULT_ENGINES], detected)
    teams = _split(args.team) or _choose(args, "team", list(TEAMS), ["discovery"])
    cfg = InstallConfig(
        engines=engines,
        teams=teams,
        project_name=args.project_name,
        analyzed_version=args.analyzed_version,
    )
    if args.output_root:
        cfg.output_root = args.output_root
    return _install_result(args, install(cfg, root, dry_run=args.dry_run, break_lock=args.break_lock))


def cmd_update(args) -> int:
    return _install_result(args, update(args.root, dry_run=args.dry_run, force=args.force, break_lock=args.break_lock))


def cmd_status(args) -> int:
    report = status(args.root)
    counts = report.counts
    lines = [
        f"version {report.version}; engines: {', '.join(report.engines)}; teams: {', '.join(report.teams)}",
        " ".join(f"{k}={v}" for k, v in counts.items()),
    ]
    for path, cls in sorted(report.classes.items()):
        if cls.value != "intact":
            lines.append(f"  {cls.value:8} {path}")
    lines += [f"  untracked {p}" for p in report.untracked]
    _emit(args, report.to_dict(), "\n".join(lines))
    return EXIT_OK


def cmd_uninstall(args) -> int:
    if not _confirm(args, "uninstall and delete pristine installed files?"):
        print("aborted", file=sys.stderr)
        return EXIT_ERROR
    return _install_result(args, uninstall(args.root, dry_run=args.dry_run, break_lock=args.break_lock))


def cmd_add_agent(args) -> int:
    return _install_result(args, add_agent(args.root, args.team, dry_run=args.dry_run, break_lock=args.break_lock))


def cmd_add_engine(args) -> int:
    return _install_result(args, add_engine(args.root, args.engine, dry_run=args.dry_run, break_lock=args.break_lock))


def cmd_export_diagrams(args) -> int:
    cfg = load_config(args.root)
    formats = FORMATS if args.diagram_format == "all" else (args.diagram_format,)
    files = export_diagrams(args.root / cfg.output_root, formats, dry_run=args.dry_run)
    paths = [f"{cfg.output_root}/{p}" for p in files]
    _emit(args, {"dry_run": args.dry_run, "files": paths}, "\n".join(paths))
    return EXIT_OK


def _executor(spec: str):
    if spec == "mock":
        return MockExecutor()
    return ExternalCommandExecutor(shlex.split(spec))


def cmd_run(args) -> int:
    root = args.root
    team = get_team(args.team)
    if args.dry_run:
        cfg = load_config(root)
        units = cfg.resolve_units(cfg.relevant_files(repository_files(root, cfg)))
        plan = plan_stages(team, units)
        _emit(args, {"team": team.id, "stages": [s.id for s in plan]}, render_plan(team.id, plan))
        return EXIT_OK
    state = run_team(root, team.id, _executor(args.executor), force=args.force, replan=args.replan, break_lock=args.break_lock)
    data = state.to_dict()
    data.pop("log")
    lines = [f"{r.id:24} {r.status.value}" + (f"  ({r.diagnostic})" if r.diagnostic else "") for r in state.stages]
    _emit(args, data, "\n".join(lines))
    failed = [r for r in state.stages if r.status is StageStatus.FAILED]
    if failed:
        diag = failed[0].diagnostic or ""
        print(f"reversa: error: stage {failed[0].id} failed: {diag}", file=sys.stderr)
        return EXIT_INVALID if diag.startswith(("invalid output", "wrong output kind", "incomplete outputs")) else EXIT_ERROR
    return EXIT_OK


def cmd_audit(args) -> int:
    root = args.root
    cfg = load_config(root)
    output_root = root / cfg.output_root
    escalate = args.escalate_unevidenced or cfg.escalate_unevidenced
    reports = [validate_artifact(d, escalate_unevidenced=escalate) for d in load_documents(output_root)]
    errors = [str(v) for r in reports for v in r.errors]
    warnings = [str(v) for r in reports for v in r.warnings]
    gaps = load_gaps(output_root)
    summary = summarize_gaps(gaps)
    blocking = blocking_gaps(gaps)
    data = {
        "documents": len(reports),
        "errors": errors,
        "warnings": warnings,
        "gaps": summary.to_dict(),
        "package": None,
    }
    code = EXIT_BLOCKED if blocking else EXIT_INVALID if errors else EXIT_OK
    if code == EXIT_OK and not args.dry_run:
        index = assemble_audit_package(root)
        data["package"] = f"{cfg.output_root}/audit/package-index.json"
        data["artifacts"] = len(index["artifacts"])
    lines = [f"documents: {len(reports)}  errors: {len(errors)}  warnings: {len(warnings)}"]
    lines += [f"  {e}" for e in errors] + [f"  {w}" for w in warnings]
    lines.append(f"gaps: {summary.total}  blocking: {len(blocking)}")
    lines += [f"  blocking {g.id} [{g.severity.value}] [{g.treatment.value}] {g.description}" for g in blocking]
    if data["package"]:
        lines.append(f"package: {data['package']}")
    _emit(args, data, "\n".join(lines))
    if code == EXIT_BLOCKED:
        print(f"reversa: error: {len(blocking)} blocking gap(s): {', '.join(g.id for g in blocking)}", file=sys.stderr)
    elif code == EXIT_INVALID:
        print(f"reversa: error: {len(errors)} validation error(s)", file=sys.stderr)
    return code


def cmd_claims_report(args) -> int:
    cfg = load_config(args.root)
    claims = load_claim_store(args.root / cfg.output_root)
    report = build_confidence_report(claims, weights=cfg.weights)
    _emit(args, report.to_dict(), render_confidence_table(report))
    return EXIT_OK


COMMANDS: dict[str, Callable[[argparse.Namespace], int]] = {
    "install": cmd_install,
    "update": cmd_update,
    "status": cmd_status,
    "uninstall": cmd_uninstall,
    "add-agent": cmd_add_agent,
    "add-engine": cmd_add_engine,
    "export-diagrams": cmd_export_diagrams,
    "run": cmd_run,
    "audit": cmd_audit,
    "claims-report": cmd_claims_report,
}

_VALIDATION = (InstallValidationError, ConfigError, PathEscapeError)
_OPERATIONAL = (
    InstallError,
    ManifestError,
    LockError,
    PipelineError,
    StateError,
    PlanError,
    DiagramError,
    MetricsError,
    ClaimError,
    OSError,
)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage().rstrip())
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"reversa: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except UnknownTeamError as exc:
        print(f"reversa: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _VALIDATION as exc:
        print(f"reversa: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except _OPERATIONAL as exc:
        print(f"reversa: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except KeyboardInterrupt:
        print("reversa: error: interrupted", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

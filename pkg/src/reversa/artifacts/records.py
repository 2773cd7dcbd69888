"""Line grammars for questions.md, tasks.md and dependency edges."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

from ..claims import ClaimError, Diagnostic, EvidenceRef, parse_evidence_list


class RecordError(ValueError):
    pass


class QuestionStatus(str, enum.Enum):
    OPEN = "open"
    ANSWERED = "answered"


@dataclass(frozen=True)
class Question:
    id: str
    status: QuestionStatus
    text: str
    answer: str | None = None

    def render(self) -> str:
        line = f"- Q {self.id} [{self.status.value}] :: {self.text}"
        if self.answer:
            line += f"\n  answer: {self.answer}"
        return line


_Q = re.compile(r"^- Q (?P<id>q-\d{2,}) \[(?P<status>open|answered)\] :: (?P<text>.+)$")
_ANSWER = re.compile(r"^\s+answer:\s*(?P<answer>.+)$")


def parse_questions(text: str, diagnostics: list[Diagnostic] | None = None) -> list[Question]:
    if diagnostics is None:
        diagnostics = []
    out: list[Question] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        ans = _ANSWER.match(line)
        if ans and out and out[-1].answer is None:
            prev = out[-1]
            out[-1] = Question(prev.id, prev.status, prev.text, ans["answer"].strip())
            continue
        if not re.match(r"^\s*-\s+Q\s", line):
            continue
        m = _Q.match(line.rstrip())
        if not m:
            diagnostics.append(Diagnostic(lineno, f"malformed question line: {line.strip()}"))
            continue
        out.append(Question(m["id"], QuestionStatus(m["status"]), m["text"].strip()))
    return out


class TaskStatus(str, enum.Enum):
    COMPLETED = "completed"
    IN_PROGRESS = "in-progress"
    PENDING = "pending"


@dataclass(frozen=True)
class Task:
    id: str
    status: TaskStatus
    title: str
    evidence: tuple[EvidenceRef, ...] = ()

    def render(self) -> str:
        line = f"- TASK {self.id} [{self.status.value}] :: {self.title}"
        if self.evidence:
            line += " | evidence: " + ", ".join(r.render() for r in self.evidence)
        return line


_TASK = re.compile(r"^- TASK (?P<id>t-\d{2,}) \[(?P<status>[^\]]+)\] :: (?P<title>.+?)(?: \| evidence: (?P<ev>.+))?$")


def parse_tasks(text: str) -> list[Task]:
    """Parse ``- TASK t-NN [status] :: title`` lines; any bad line is an error."""
    tasks: list[Task] = []
    seen: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        if not re.match(r"^\s*-\s+TASK\b", line):
            continue
        m = _TASK.match(line.rstrip())
        if not m:
            raise RecordError(f"line {lineno}: malformed task line: {line.strip()}")
        try:
            status = TaskStatus(m["status"])
        except ValueError:
            raise RecordError(f"line {lineno}: unknown task status {m['status']!r}") from None
        if m["id"] in seen:
            raise RecordError(f"line {lineno}: duplicate task id {m['id']}")
        seen.add(m["id"])
        try:
            evidence = parse_evidence_list(m["ev"]) if m["ev"] else ()
        except ClaimError as exc:
            raise RecordError(f"line {lineno}: {exc}") from None
        tasks.append(Task(m["id"], status, m["title"].strip(), evidence))
    return tasks


_EDGE = re.compile(r"^- EDGE (?P<src>\S+) -> (?P<dst>\S+)\s*$")
_NODE = re.compile(r"^- NODE (?P<name>\S+)\s*$")


def parse_edges(text: str) -> tuple[list[str], list[tuple[str, str]]]:
    """Declared nodes and ``src -> dst`` edges from a dependencies document."""
    nodes: list[str] = []
    edges: list[tuple[str, str]] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.rstrip()
        if line.startswith("- EDGE"):
            m = _EDGE.match(line)
            if not m:
                raise RecordError(f"line {lineno}: malformed edge line: {line}")
            edges.append((m["src"], m["dst"]))
        elif line.startswith("- NODE"):
            m = _NODE.match(line)
            if not m:
                raise RecordError(f"line {lineno}: malformed node line: {line}")
            nodes.append(m["name"])
    return nodes, edges

"""Scenario counting for Gherkin parity features.

Only the structure needed for counting is recognized: Feature, Rule,
Background, Scenario/Example, Scenario Outline/Template, Examples/Scenarios,
tags, tables, doc strings and comments. A scenario with Examples expands to
one scenario per data row; a Background is never counted.
"""

from __future__ import annotations

import re
from collections.abc import Iterable
from dataclasses import dataclass, field

from ..claims import Diagnostic

_KEYWORD = re.compile(
    r"^(?P<kw>Feature|Rule|Background|Scenario Outline|Scenario Template|Scenario|Example|Examples|Scenarios):(?P<rest>.*)$"
)


@dataclass
class FeatureSummary:
    name: str
    scenario_count: int
    tags: list[str] = field(default_factory=list)
    diagnostics: list[Diagnostic] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.scenario_count < 0:
            raise ValueError("scenario_count must be >= 0")


@dataclass
class _Scenario:
    line: int
    outline: bool
    blocks: list[list[int]] = field(default_factory=list)  # [line, header_seen, rows]


def parse_gherkin_summary(text: str) -> FeatureSummary:
    name = ""
    feature_tags: list[str] = []
    pending_tags: list[str] = []
    diagnostics: list[Diagnostic] = []
    finished: list[_Scenario] = []
    current: _Scenario | None = None
    in_examples = False
    docstring: str | None = None

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if docstring is not None:
            if line.startswith(docstring):
                docstring = None
            continue
        if line.startswith('"""') or line.startswith("```"):
            docstring = line[:3]
            continue
        if not line or line.startswith("#"):
            continue
        if line.startswith("@"):
            pending_tags.extend(t for t in line.split() if t.startswith("@"))
            continue
        if line.startswith("|"):
            if in_examples and current is not None and current.blocks:
                block = current.blocks[-1]
                if block[1]:
                    block[2] += 1
                else:
                    block[1] = 1
            continue
        m = _KEYWORD.match(line)
        if not m:
            # a step or free description text ends any examples table
            in_examples = False
            continue
        kw = m["kw"]
        in_examples = False
        if kw == "Feature":
            name = m["rest"].strip()
            feature_tags = pending_tags
        elif kw in ("Examples", "Scenarios"):
            if current is None:
                diagnostics.append(Diagnostic(lineno, "Examples outside a scenario"))
            else:
                current.blocks.append([lineno, 0, 0])
                in_examples = True
        elif kw in ("Scenario", "Example", "Scenario Outline", "Scenario Template"):
            if current is not None:
                finished.append(current)
            current = _Scenario(lineno, outline=kw in ("Scenario Outline", "Scenario Template"))
        else:  # Rule, Background
            if current is not None:
                finished.append(current)
            current = None
        pending_tags = []
    if current is not None:
        finished.append(current)

    count = 0
    for sc in finished:
        if not sc.blocks:
            if sc.outline:
                diagnostics.append(Diagnostic(sc.line, "scenario outline without Examples", "outline"))
            count += 1
            continue
        for line, _header, rows in sc.blocks:
            if rows == 0:
                diagnostics.append(Diagnostic(line, "Examples table has no data rows", "examples"))
            count += rows
    if not name:
        diagnostics.append(Diagnostic(0, "no Feature keyword found", "feature"))
    return FeatureSummary(name, count, feature_tags, diagnostics)


def total_scenarios(texts: Iterable[str]) -> int:
    return sum(parse_gherkin_summary(t).scenario_count for t in texts)

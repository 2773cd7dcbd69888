"""Textual graph export (Graphviz DOT and Mermaid) for dependency and impact graphs."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from ._fs import atomic_write
from .artifacts import REGISTRY, ArtifactKind, parse_edges, parse_matrix
from .artifacts.documents import split_front_matter

K = ArtifactKind
DIAGRAM_DIR = "diagrams"
FORMATS = ("dot", "mermaid")


class DiagramError(RuntimeError):
    pass


@dataclass(frozen=True)
class Graph:
    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]

    @classmethod
    def of(cls, nodes, edges) -> "Graph":
        edges = sorted(set(edges))
        return cls(tuple(sorted(set(nodes) | {n for e in edges for n in e})), tuple(edges))


def dependency_graph(text: str) -> Graph:
    nodes, edges = parse_edges(split_front_matter(text)[1])
    return Graph.of(nodes, edges)


def impact_graph(text: str) -> Graph:
    """Spec and component nodes are prefixed, so a unit's spec and its own
    component stay distinct nodes."""
    matrix = parse_matrix(split_front_matter(text)[1], col_axis="component")
    nodes = [f"spec:{r}" for r in matrix.rows] + [f"component:{c}" for c in matrix.cols]
    edges = [(f"spec:{r}", f"component:{c}") for r, c in matrix.cells]
    return Graph.of(nodes, edges)


def _q(name: str) -> str:
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(graph: Graph, name: str) -> str:
    lines = [f"digraph {_q(name)} {{"]
    lines += [f"  {_q(n)};" for n in graph.nodes]
    lines += [f"  {_q(a)} -> {_q(b)};" for a, b in graph.edges]
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_mermaid(graph: Graph) -> str:
    ids = {n: f"n{i}" for i, n in enumerate(graph.nodes)}
    lines = ["```mermaid", "flowchart LR"]
    lines += [f'  {ids[n]}["{n.replace(chr(34), "#quot;")}"]' for n in graph.nodes]
    lines += [f"  {ids[a]} --> {ids[b]}" for a, b in graph.edges]
    lines.append("```")
    return "\n".join(lines) + "\n"


def render_diagrams(output_root: Path, formats: tuple[str, ...] = FORMATS) -> dict[str, str]:
    """Diagram files keyed by output-root-relative path. Pure."""
    output_root = Path(output_root)
    dep_path = output_root / REGISTRY[K.DEPENDENCIES].path
    if not dep_path.is_file():
        raise DiagramError(
            f"missing {REGISTRY[K.DEPENDENCIES].path}; run `reversa run --team discovery` first"
        )
    graphs = {"dependencies": dependency_graph(dep_path.read_text(encoding="utf-8"))}
    impact_path = output_root / REGISTRY[K.SPEC_IMPACT_MATRIX].path
    if impact_path.is_file():
        graphs["spec-impact"] = impact_graph(impact_path.read_text(encoding="utf-8"))
    out = {}
    for name, graph in graphs.items():
        if "dot" in formats:
            out[f"{DIAGRAM_DIR}/{name}.dot"] = to_dot(graph, name)
        if "mermaid" in formats:
            out[f"{DIAGRAM_DIR}/{name}.mermaid.md"] = f"# {name}\n\n" + to_mermaid(graph)
    return out


def export_diagrams(output_root: Path, formats: tuple[str, ...] = FORMATS, *, dry_run: bool = False) -> list[str]:
    files = render_diagrams(output_root, formats)
    if not dry_run:
        for rel, text in files.items():
            atomic_write(Path(output_root) / rel, text.encode())
    return sorted(files)

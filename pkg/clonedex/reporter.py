# Rendering of clone pairs: flat CSV/JSON files, grouped trees and per-block markers
import csv
import io
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, TextIO

from .config import OutputFormat
from .detector import ClonePair
from .storage import atomic_write_bytes
from .tokenizer import BlockRef

logger = logging.getLogger(__name__)

CSV_FIELDS = [
    "project_a", "path_a", "start_a", "end_a",
    "project_b", "path_b", "start_b", "end_b",
    "similarity",
]

YELLOW_MIN_CLONES = 5
RED_MIN_CLONES = 11


class MarkerLevel(str, Enum):
    GREEN = "green"
    YELLOW = "yellow"
    RED = "red"


def classify_marker(clone_count: int) -> MarkerLevel:
    """green below 5 clones, yellow for 5 to 10, red above 10"""
    if clone_count >= RED_MIN_CLONES:
        return MarkerLevel.RED
    if clone_count >= YELLOW_MIN_CLONES:
        return MarkerLevel.YELLOW
    return MarkerLevel.GREEN


def format_similarity(similarity: float) -> str:
    return f"{similarity:.4f}"


def pair_row(pair: ClonePair) -> Dict[str, Any]:
    a, b = pair.block_a, pair.block_b
    return {
        "project_a": a.project_id,
        "path_a": a.file,
        "start_a": a.start_line,
        "end_a": a.end_line,
        "project_b": b.project_id,
        "path_b": b.file,
        "start_b": b.start_line,
        "end_b": b.end_line,
        "similarity": format_similarity(pair.similarity),
    }


def render_csv(pairs: Sequence[ClonePair]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(pair_row(pair) for pair in pairs)
    return buffer.getvalue()


def render_json(pairs: Sequence[ClonePair]) -> str:
    rows = []
    for pair in pairs:
        row = pair_row(pair)
        row["overlap"] = pair.overlap
        row["required"] = pair.required
        rows.append(row)
    return json.dumps(rows, indent=2) + "\n"


@dataclass(frozen=True)
class CsvPairRow:
    """One pair as read back from a CSV report"""
    project_a: str
    path_a: str
    start_a: int
    end_a: int
    project_b: str
    path_b: str
    start_b: int
    end_b: int
    similarity: str

    @classmethod
    def from_pair(cls, pair: ClonePair) -> "CsvPairRow":
        return cls(**pair_row(pair))


def parse_csv(text: str) -> List[CsvPairRow]:
    reader = csv.DictReader(io.StringIO(text))
    rows = []
    for record in reader:
        rows.append(CsvPairRow(
            project_a=record["project_a"],
            path_a=record["path_a"],
            start_a=int(record["start_a"]),
            end_a=int(record["end_a"]),
            project_b=record["project_b"],
            path_b=record["path_b"],
            start_b=int(record["start_b"]),
            end_b=int(record["end_b"]),
            similarity=record["similarity"],
        ))
    return rows


# --------------------------------------------------------------- grouped tree

@dataclass
class BlockNode:
    block: BlockRef
    clones: List[BlockRef] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "start_line": self.block.start_line,
            "end_line": self.block.end_line,
            "block_id": self.block.block_id,
            "marker": classify_marker(len(self.clones)).value,
            "clones": [clone.to_dict() for clone in self.clones],
        }


@dataclass
class GroupedReport:
    """project -> file -> block -> clone references"""
    tree: Dict[str, Dict[str, List[BlockNode]]] = field(default_factory=dict)

    def leaves(self) -> List[tuple]:
        return [
            (node.block.block_id, clone.block_id)
            for files in self.tree.values()
            for nodes in files.values()
            for node in nodes
            for clone in node.clones
        ]

    def to_dict(self) -> Dict[str, Any]:
        return {
            project: {path: [node.to_dict() for node in nodes] for path, nodes in files.items()}
            for project, files in self.tree.items()
        }


def _ref_key(ref: BlockRef) -> tuple:
    return (ref.project_id, ref.file, ref.start_line, ref.end_line, ref.block_id)


def build_grouped_report(pairs: Sequence[ClonePair]) -> GroupedReport:
    """Group pairs under both endpoints; children ordered by project, path, start line"""
    nodes: Dict[int, BlockNode] = {}
    for pair in pairs:
        for this, other in ((pair.block_a, pair.block_b), (pair.block_b, pair.block_a)):
            nodes.setdefault(this.block_id, BlockNode(this)).clones.append(other)

    report = GroupedReport()
    for node in sorted(nodes.values(), key=lambda n: _ref_key(n.block)):
        node.clones.sort(key=_ref_key)
        files = report.tree.setdefault(node.block.project_id, {})
        files.setdefault(node.block.file, []).append(node)
    return report


def render_grouped(report: GroupedReport) -> str:
    """Indented text form of a grouped report"""
    lines = []
    for project, files in report.tree.items():
        lines.append(f"{project}")
        for path, nodes in files.items():
            lines.append(f"  {path}")
            for node in nodes:
                marker = classify_marker(len(node.clones)).value
                lines.append(f"    lines {node.block.start_line}-{node.block.end_line} "
                             f"[{marker}] {len(node.clones)} clone(s)")
                for clone in node.clones:
                    lines.append(f"      {clone.project_id}:{clone.file}:"
                                 f"{clone.start_line}-{clone.end_line}")
    return "\n".join(lines) + ("\n" if lines else "")


def render_pairs(pairs: Sequence[ClonePair], fmt: OutputFormat) -> str:
    fmt = OutputFormat(fmt)
    if fmt is OutputFormat.JSON:
        return render_json(pairs)
    if fmt is OutputFormat.TREE:
        return render_grouped(build_grouped_report(pairs))
    return render_csv(pairs)


def write_pairs(pairs: Sequence[ClonePair], fmt: OutputFormat = OutputFormat.CSV,
                sink: Optional[str] = None, stream: Optional[TextIO] = None) -> str:
    """Render pairs and write them atomically to `sink`, or to `stream` when no path is given

    Raises:
        IoFailure: the report file cannot be written
    """
    text = render_pairs(pairs, fmt)
    if sink:
        atomic_write_bytes(sink, text.encode("utf-8"))
        logger.info(f"Wrote {len(pairs)} clone pairs to {sink}")
    elif stream is not None:
        stream.write(text)
    return text

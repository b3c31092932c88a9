# Corpus discovery: walk input roots into SourceFile records
import hashlib
import logging
import os
from pathlib import Path
from typing import Iterable, Iterator, List, Optional, Sequence

from .exceptions import UnreadableRoot
from .languages import LanguageRegistry, language_registry
from .tokenizer import SourceFile

logger = logging.getLogger(__name__)

IGNORED_DIRECTORIES = {".git", ".hg", ".svn", ".venv", "node_modules", "__pycache__", "build", "dist"}
BINARY_SNIFF_BYTES = 8192


def content_digest(content: str) -> str:
    """Stable digest of file content, used to skip unchanged files on rescan"""
    return hashlib.md5(content.encode("utf-8", errors="replace")).hexdigest()


def normalize_path(path: str) -> str:
    return Path(path).resolve().as_posix()


def decode_source(raw: bytes) -> Optional[str]:
    """Decode file bytes as text (lossy), or None for binary content"""
    if b"\x00" in raw[:BINARY_SNIFF_BYTES]:
        return None
    return raw.decode("utf-8", errors="replace")


def read_source_file(path: str, project_id: str, language: Optional[str] = None,
                     registry: Optional[LanguageRegistry] = None) -> Optional[SourceFile]:
    """Load one file as a SourceFile; None (with a warning) when it cannot be used"""
    registry = registry or language_registry
    language = language or registry.language_for_path(path)
    if language is None:
        return None
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        logger.warning(f"Skipping unreadable file {path}: {e}")
        return None
    content = decode_source(raw)
    if content is None:
        logger.warning(f"Skipping binary file {path}")
        return None
    return SourceFile(path=normalize_path(path), project_id=project_id, content=content, language=language)


def project_roots(root: str, layout: str = "root") -> List[tuple]:
    """(project_id, directory) pairs for one input root"""
    root_path = Path(root)
    if not root_path.is_dir() or not os.access(root_path, os.R_OK):
        raise UnreadableRoot(f"Input root is not a readable directory: {root}")
    root_path = root_path.resolve()
    if layout == "children":
        return [(child.name, child) for child in sorted(root_path.iterdir())
                if child.is_dir() and child.name not in IGNORED_DIRECTORIES]
    return [(root_path.name, root_path)]


def _walk_files(directory: Path) -> Iterator[Path]:
    for current, dirnames, filenames in os.walk(directory):
        dirnames[:] = sorted(d for d in dirnames if d not in IGNORED_DIRECTORIES)
        for filename in sorted(filenames):
            yield Path(current) / filename


def discover_files(roots: Sequence[str], layout: str = "root",
                   languages: Iterable[str] = (),
                   registry: Optional[LanguageRegistry] = None) -> List[SourceFile]:
    """Every source file under the roots whose language has a registered table

    Files come back sorted by path so block ids and index bytes are reproducible.
    """
    registry = registry or language_registry
    wanted = set(languages)
    files = {}
    for root in roots:
        for project_id, directory in project_roots(root, layout):
            for path in _walk_files(directory):
                language = registry.language_for_path(str(path))
                if language is None or (wanted and language not in wanted):
                    continue
                source = read_source_file(str(path), project_id, language, registry)
                if source is not None:
                    files[source.path] = source
    logger.info(f"Discovered {len(files)} source files under {len(roots)} root(s)")
    return [files[path] for path in sorted(files)]


def project_for_path(path: str, roots: Sequence[str], layout: str = "root") -> Optional[str]:
    """Project id of a file under one of the roots, or None when outside every root"""
    resolved = Path(path).resolve()
    for root in roots:
        root_path = Path(root).resolve()
        try:
            relative = resolved.relative_to(root_path)
        except ValueError:
            continue
        if layout == "children":
            return relative.parts[0] if len(relative.parts) > 1 else None
        return root_path.name
    return None

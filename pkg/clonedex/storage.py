"""
Index persistence.

File layout: magic ``CLDX`` | uint32 format version | uint64 payload length |
uint32 crc32 of the payload | zlib-compressed JSON payload. The payload holds the
token order, the forward index and per-file bookkeeping; postings are rebuilt on
load. A JSON sidecar next to the index carries human-readable corpus metadata.
"""
import json
import logging
import os
import struct
import tempfile
import zlib
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Optional

from .config import Granularity, NormalizationConfig
from .exceptions import CorruptIndex, IndexNotLoaded, IoFailure, VersionMismatch
from .index import CloneIndex, FileEntry, TokenOrder, make_sorted_block
from .languages import LanguageRegistry
from .tokenizer import BlockRef

logger = logging.getLogger(__name__)

MAGIC = b"CLDX"
FORMAT_VERSION = 1
HEADER = struct.Struct(">4sIQI")


def metadata_path(path: str) -> str:
    return f"{path}.meta.json"


def atomic_write_bytes(path: str, data: bytes):
    """Write to a temp file in the target directory, then rename over the target"""
    target = Path(path)
    directory = target.parent if str(target.parent) else Path(".")
    try:
        directory.mkdir(parents=True, exist_ok=True)
        fd, tmp_path = tempfile.mkstemp(prefix=f".{target.name}.", dir=directory)
        try:
            with os.fdopen(fd, "wb") as handle:
                handle.write(data)
            os.replace(tmp_path, target)
        except BaseException:
            if os.path.exists(tmp_path):
                os.unlink(tmp_path)
            raise
    except OSError as e:
        raise IoFailure(f"Could not write {path}: {e}") from e


def _encode_payload(index: CloneIndex) -> Dict[str, Any]:
    order_tokens = index.order.tokens()
    return {
        "theta": f"{index.theta.numerator}/{index.theta.denominator}",
        "granularity": index.granularity.value,
        "min_tokens": index.min_tokens,
        "normalization": index.normalization.model_dump(),
        "generation": index.generation,
        "order": {
            "tokens": order_tokens,
            "doc_freq": [index.order.doc_freq.get(token, 0) for token in order_tokens],
        },
        "blocks": [
            {
                "id": sb.block_id,
                "project": sb.ref.project_id,
                "file": sb.ref.file,
                "start": sb.ref.start_line,
                "end": sb.ref.end_line,
                "tokens": [[token, freq] for token, freq in sb.tokens],
            }
            for sb in sorted(index.forward, key=lambda b: b.block_id)
        ],
        "files": [
            {
                "path": entry.path,
                "project": entry.project_id,
                "language": entry.language,
                "digest": entry.digest,
                "blocks": list(entry.block_ids),
            }
            for _, entry in sorted(index.files.items())
        ],
    }


def _decode_payload(payload: Dict[str, Any], registry: Optional[LanguageRegistry]) -> CloneIndex:
    tokens = payload["order"]["tokens"]
    doc_freq = payload["order"]["doc_freq"]
    order = TokenOrder(
        rank={token: i for i, token in enumerate(tokens)},
        doc_freq=dict(zip(tokens, doc_freq)),
    )
    index = CloneIndex(
        order,
        theta=Fraction(payload["theta"]),
        granularity=Granularity(payload["granularity"]),
        normalization=NormalizationConfig(**payload["normalization"]),
        min_tokens=payload["min_tokens"],
        registry=registry,
    )
    for block in payload["blocks"]:
        ref = BlockRef(block["id"], block["project"], block["file"], block["start"], block["end"])
        entries = [(token, freq) for token, freq in block["tokens"]]
        index.add_sorted(make_sorted_block(ref, entries, order, index.theta))
    for entry in payload["files"]:
        index.files[entry["path"]] = FileEntry(
            path=entry["path"],
            project_id=entry["project"],
            language=entry["language"],
            digest=entry["digest"],
            block_ids=tuple(entry["blocks"]),
        )
    index.generation = payload.get("generation", 0)
    return index


def serialize_index(index: CloneIndex) -> bytes:
    body = json.dumps(_encode_payload(index), sort_keys=True, separators=(",", ":")).encode("utf-8")
    compressed = zlib.compress(body, 9)
    return HEADER.pack(MAGIC, FORMAT_VERSION, len(compressed), zlib.crc32(compressed)) + compressed


def deserialize_index(data: bytes, registry: Optional[LanguageRegistry] = None) -> CloneIndex:
    """Rebuild a CloneIndex from serialized bytes

    Raises:
        CorruptIndex: bad magic, truncated payload or checksum mismatch
        VersionMismatch: the file was written by another format version
    """
    if len(data) < HEADER.size:
        raise CorruptIndex("Index file is truncated (incomplete header)")
    magic, version, length, crc = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CorruptIndex("Not a clonedex index file (bad magic bytes)")
    if version != FORMAT_VERSION:
        raise VersionMismatch(
            f"Index format version {version} is not supported (expected {FORMAT_VERSION}); "
            f"re-run `index` to rebuild it"
        )
    compressed = data[HEADER.size:]
    if len(compressed) != length:
        raise CorruptIndex(f"Index file is truncated ({len(compressed)} of {length} payload bytes)")
    if zlib.crc32(compressed) != crc:
        raise CorruptIndex("Index file checksum mismatch")
    try:
        payload = json.loads(zlib.decompress(compressed).decode("utf-8"))
        return _decode_payload(payload, registry)
    except (zlib.error, UnicodeDecodeError, ValueError, KeyError, TypeError, ZeroDivisionError) as e:
        raise CorruptIndex(f"Index payload is unreadable: {e}") from e


def build_metadata(index: CloneIndex) -> Dict[str, Any]:
    stats = index.stats()
    return {
        "theta": float(index.theta),
        "granularity": index.granularity.value,
        "languages": index.languages(),
        "normalization": index.normalization.model_dump(),
        "block_count": stats["blocks"],
        "token_count": stats["tokens"],
        "build_timestamp": datetime.now(timezone.utc).isoformat(),
        "version": FORMAT_VERSION,
    }


def save_index(index: CloneIndex, path: str) -> Dict[str, Any]:
    """Persist the index and its metadata sidecar; returns the metadata"""
    atomic_write_bytes(path, serialize_index(index))
    metadata = build_metadata(index)
    atomic_write_bytes(metadata_path(path), json.dumps(metadata, indent=2, sort_keys=True).encode("utf-8"))
    logger.info(f"Saved index with {metadata['block_count']} blocks to {path}")
    return metadata


def load_index(path: str, registry: Optional[LanguageRegistry] = None) -> CloneIndex:
    """Load a persisted index

    Raises:
        IndexNotLoaded: no index file at path
        CorruptIndex, VersionMismatch: see deserialize_index
        IoFailure: the file cannot be read
    """
    if not Path(path).is_file():
        raise IndexNotLoaded(f"No index found at {path}; run `index` first")
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise IoFailure(f"Could not read index {path}: {e}") from e
    index = deserialize_index(data, registry)
    logger.info(f"Loaded index with {len(index.forward)} blocks from {path}")
    return index


def read_metadata(path: str) -> Optional[Dict[str, Any]]:
    """Sidecar metadata of an index, or None when absent or unreadable"""
    try:
        return json.loads(Path(metadata_path(path)).read_text(encoding="utf-8"))
    except (OSError, ValueError):
        return None

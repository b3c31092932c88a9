"""
Long-running clone query service.

A single writer thread drains a debounced queue of file events and applies them
to the index; any number of readers answer "clones of the block at file:line"
queries. Readers and the writer share a read/write lock, so a query always sees
one committed index generation.
"""
import json
import logging
import os
import socketserver
import threading
import time
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, TextIO, Tuple

from .config import Scope, config
from .corpus import normalize_path, project_for_path, read_source_file
from .detector import query_clones_of
from .exceptions import BadRequest, CloneDexError, IndexNotLoaded, NoBlockAtLocation
from .index import CloneIndex, SortedBlock, UpdateResult
from .languages import LanguageRegistry, language_registry
from .reporter import MarkerLevel, classify_marker
from .serializers import ErrorSerializer, ProtocolRequestSerializer
from .storage import load_index, save_index
from .tokenizer import BlockRef

logger = logging.getLogger(__name__)

Clock = Callable[[], float]


class ReadWriteLock:
    """Many readers or one writer; a waiting writer blocks new readers"""

    def __init__(self):
        self._cond = threading.Condition()
        self._readers = 0
        self._writer = False
        self._writers_waiting = 0

    @contextmanager
    def read(self):
        with self._cond:
            while self._writer or self._writers_waiting:
                self._cond.wait()
            self._readers += 1
        try:
            yield
        finally:
            with self._cond:
                self._readers -= 1
                if self._readers == 0:
                    self._cond.notify_all()

    @contextmanager
    def write(self):
        with self._cond:
            self._writers_waiting += 1
            while self._writer or self._readers:
                self._cond.wait()
            self._writers_waiting -= 1
            self._writer = True
        try:
            yield
        finally:
            with self._cond:
                self._writer = False
                self._cond.notify_all()


@dataclass(frozen=True)
class CloneQuery:
    file: str
    line: int


@dataclass(frozen=True)
class CloneResponse:
    block: BlockRef
    clones: List[BlockRef]
    marker: MarkerLevel
    generation: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "ok": True,
            "block": self.block.to_dict(),
            "clones": [clone.to_dict() for clone in self.clones],
            "marker": self.marker.value,
            "generation": self.generation,
        }


def error_response(error: CloneDexError) -> Dict[str, Any]:
    return {"ok": False, "error": ErrorSerializer(error.to_dict()).data}


def resolve_block(query: CloneQuery, index: Optional[CloneIndex]) -> SortedBlock:
    """Innermost indexed block of query.file whose extent contains query.line

    Raises:
        IndexNotLoaded: no index
        NoBlockAtLocation: no block contains the line
    """
    if index is None:
        raise IndexNotLoaded("No index is loaded")
    path = normalize_path(query.file)
    containing = [sb for sb in index.blocks_in_file(path) if sb.ref.contains_line(query.line)]
    if not containing:
        raise NoBlockAtLocation(f"No indexed block contains {query.file}:{query.line}")
    return min(containing, key=lambda sb: (sb.ref.end_line - sb.ref.start_line,
                                           -sb.ref.start_line, sb.block_id))


class DebouncedQueue:
    """File events coalesced per path; a path is due once it has been quiet for the window"""

    def __init__(self, window_ms: int = config.DEBOUNCE_MS, clock: Clock = time.monotonic):
        self.window = window_ms / 1000.0
        self.clock = clock
        self._pending: Dict[str, Tuple[bool, float]] = {}
        self._cond = threading.Condition()

    def push(self, path: str, deleted: bool = False):
        with self._cond:
            self._pending[path] = (deleted, self.clock())
            self._cond.notify_all()

    def due(self, now: Optional[float] = None) -> List[Tuple[str, bool]]:
        """Pop every quiet path as (path, deleted), sorted by path"""
        now = self.clock() if now is None else now
        with self._cond:
            ready = sorted(path for path, (_, stamp) in self._pending.items()
                           if stamp + self.window <= now)
            return [(path, self._pending.pop(path)[0]) for path in ready]

    def next_deadline(self) -> Optional[float]:
        with self._cond:
            if not self._pending:
                return None
            return min(stamp for _, stamp in self._pending.values()) + self.window

    def wait(self, timeout: float):
        with self._cond:
            self._cond.wait(timeout)

    def wake(self):
        with self._cond:
            self._cond.notify_all()

    def __len__(self) -> int:
        with self._cond:
            return len(self._pending)


class CloneService:
    """Query answering plus incremental maintenance of one CloneIndex"""

    def __init__(self, index: Optional[CloneIndex] = None, roots: Sequence[str] = (),
                 project_layout: str = "root", scope: Scope = Scope.BOTH,
                 debounce_ms: int = config.DEBOUNCE_MS, index_path: Optional[str] = None,
                 registry: Optional[LanguageRegistry] = None, clock: Clock = time.monotonic):
        self.index = index
        self.roots = [normalize_path(root) for root in roots]
        self.project_layout = project_layout
        self.scope = Scope(scope)
        self.index_path = index_path
        self.registry = registry or language_registry
        self.queue = DebouncedQueue(debounce_ms, clock)
        self._lock = ReadWriteLock()
        self._stopped = threading.Event()
        self._writer: Optional[threading.Thread] = None

    # ------------------------------------------------------------- queries

    @property
    def generation(self) -> int:
        return self.index.generation if self.index is not None else 0

    def handle_query(self, query: CloneQuery) -> CloneResponse:
        """resolve_block, then query_clones_of, then classify_marker, on one snapshot"""
        with self._lock.read():
            sb = resolve_block(query, self.index)
            pairs = query_clones_of(sb, self.index, self.scope)
            clones = [pair.other(sb.block_id) for pair in pairs]
            return CloneResponse(
                block=sb.ref,
                clones=clones,
                marker=classify_marker(len(clones)),
                generation=self.index.generation,
            )

    def status(self) -> Dict[str, Any]:
        with self._lock.read():
            stats = self.index.stats() if self.index is not None else {}
            return {
                "loaded": self.index is not None,
                "generation": self.generation,
                "files": stats.get("files", 0),
                "blocks": stats.get("blocks", 0),
                "tokens": stats.get("tokens", 0),
                "postings": stats.get("postings", 0),
                "pending_updates": len(self.queue),
                "theta": float(self.index.theta) if self.index is not None else None,
                "granularity": self.index.granularity.value if self.index is not None else None,
            }

    def handle_request(self, payload: Any) -> Dict[str, Any]:
        """Answer one decoded protocol request; errors come back as structured bodies"""
        if not isinstance(payload, dict):
            return error_response(BadRequest("Request must be a JSON object"))
        serializer = ProtocolRequestSerializer(data=payload)
        if not serializer.is_valid():
            return error_response(BadRequest(json.dumps(serializer.errors, sort_keys=True)))
        data = serializer.validated_data
        try:
            if data["op"] == "ping":
                return {"ok": True, "pong": True, "generation": self.generation}
            if data["op"] == "status":
                return {"ok": True, **self.status()}
            return self.handle_query(CloneQuery(data["file"], data["line"])).to_dict()
        except CloneDexError as e:
            return error_response(e)

    def handle_line(self, line: str) -> str:
        try:
            payload = json.loads(line)
        except ValueError as e:
            return json.dumps(error_response(BadRequest(f"Malformed JSON: {e}")))
        return json.dumps(self.handle_request(payload))

    # ------------------------------------------------------------- updates

    def notify(self, path: str, deleted: bool = False):
        self.queue.push(normalize_path(path), deleted)

    def apply_update(self, path: str, deleted: bool = False) -> Optional[UpdateResult]:
        """Re-index or drop one file; failures are logged and leave the index intact"""
        if self.index is None:
            return None
        project_id = project_for_path(path, self.roots, self.project_layout) if self.roots else None
        source = None
        if not deleted and os.path.isfile(path):
            language = self.registry.language_for_path(path)
            if language is None:
                return None
            if self.roots and project_id is None:
                logger.debug(f"Ignoring {path}: outside every watched root")
                return None
            source = read_source_file(path, project_id or Path(path).parent.name, language, self.registry)
            if source is None:
                return None

        with self._lock.write():
            if source is None:
                result = self.index.remove_file(path)
            else:
                result = self.index.update_file(source)
        logger.info(f"Applied update for {path}: -{len(result.removed)} +{len(result.added)} blocks "
                    f"(generation {self.index.generation})")
        return result

    def apply_pending(self, now: Optional[float] = None) -> List[UpdateResult]:
        """Apply every debounced event that is due"""
        results = []
        for path, deleted in self.queue.due(now):
            try:
                result = self.apply_update(path, deleted)
            except CloneDexError as e:
                logger.warning(f"Update of {path} failed: {e}")
                continue
            if result is not None:
                results.append(result)
        if results and self.index_path:
            with self._lock.read():
                save_index(self.index, self.index_path)
        return results

    def _writer_loop(self):
        while not self._stopped.is_set():
            deadline = self.queue.next_deadline()
            if deadline is None:
                self.queue.wait(timeout=1.0)
                continue
            delay = deadline - self.queue.clock()
            if delay > 0:
                self.queue.wait(timeout=delay)
                continue
            self.apply_pending()

    def start(self):
        """Start the single writer thread"""
        if self._writer is not None:
            return
        self._stopped.clear()
        self._writer = threading.Thread(target=self._writer_loop, name="clonedex-writer", daemon=True)
        self._writer.start()

    def stop(self):
        self._stopped.set()
        self.queue.wake()
        if self._writer is not None:
            self._writer.join(timeout=5)
            self._writer = None

    # ------------------------------------------------------------ transports

    def serve_stdio(self, stdin: TextIO, stdout: TextIO):
        """Answer one request per input line until EOF"""
        for line in stdin:
            if not line.strip():
                continue
            stdout.write(self.handle_line(line) + "\n")
            stdout.flush()

    def make_socket_server(self, socket_path: str) -> "CloneSocketServer":
        if os.path.exists(socket_path):
            os.unlink(socket_path)
        server = CloneSocketServer(socket_path, CloneRequestHandler)
        server.service = self
        return server


class CloneRequestHandler(socketserver.StreamRequestHandler):
    """NDJSON over one client connection"""

    def handle(self):
        for raw in self.rfile:
            line = raw.decode("utf-8", errors="replace").strip()
            if not line:
                continue
            response = self.server.service.handle_line(line)
            self.wfile.write((response + "\n").encode("utf-8"))
            self.wfile.flush()


class CloneSocketServer(socketserver.ThreadingUnixStreamServer):
    daemon_threads = True
    service: CloneService


# Process-wide service used by the HTTP views
_active_service: Optional[CloneService] = None
_active_lock = threading.Lock()


def get_service() -> CloneService:
    """The registered service, or one built lazily from the configured index path"""
    global _active_service
    with _active_lock:
        if _active_service is None:
            try:
                index = load_index(config.INDEX_PATH)
            except CloneDexError as e:
                logger.warning(f"Query service started without an index: {e}")
                index = None
            _active_service = CloneService(index, scope=Scope(config.SCOPE))
        return _active_service


def set_service(service: Optional[CloneService]):
    global _active_service
    with _active_lock:
        _active_service = service

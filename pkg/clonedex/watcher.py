# watchdog bridge: file-system events become debounced index updates
import logging
from pathlib import Path
from typing import Optional, Sequence

from watchdog.events import FileSystemEvent, FileSystemEventHandler
from watchdog.observers import Observer

from .corpus import IGNORED_DIRECTORIES
from .exceptions import WatchSetupFailure
from .languages import LanguageRegistry, language_registry
from .service import CloneService

logger = logging.getLogger(__name__)


class SourceChangeHandler(FileSystemEventHandler):
    """Queues create/modify/delete/move events of source files on the service"""

    def __init__(self, service: CloneService, registry: Optional[LanguageRegistry] = None):
        self.service = service
        self.registry = registry or language_registry

    def _wanted(self, path: str) -> bool:
        if any(part in IGNORED_DIRECTORIES for part in Path(path).parts):
            return False
        return self.registry.language_for_path(path) is not None

    def on_created(self, event: FileSystemEvent):
        if not event.is_directory and self._wanted(event.src_path):
            logger.debug(f"File created: {event.src_path}")
            self.service.notify(event.src_path)

    def on_modified(self, event: FileSystemEvent):
        if not event.is_directory and self._wanted(event.src_path):
            logger.debug(f"File modified: {event.src_path}")
            self.service.notify(event.src_path)

    def on_deleted(self, event: FileSystemEvent):
        if not event.is_directory and self._wanted(event.src_path):
            logger.debug(f"File deleted: {event.src_path}")
            self.service.notify(event.src_path, deleted=True)

    def on_moved(self, event: FileSystemEvent):
        if event.is_directory:
            return
        if self._wanted(event.src_path):
            self.service.notify(event.src_path, deleted=True)
        if self._wanted(event.dest_path):
            self.service.notify(event.dest_path)


def start_observer(roots: Sequence[str], service: CloneService,
                   registry: Optional[LanguageRegistry] = None) -> Observer:
    """Schedule a recursive watch on every root and start the observer (non-blocking)

    Raises:
        WatchSetupFailure: a root is missing or the platform watcher cannot start
    """
    handler = SourceChangeHandler(service, registry)
    observer = Observer()
    try:
        for root in roots:
            root_path = Path(root).resolve()
            if not root_path.is_dir():
                raise WatchSetupFailure(f"Cannot watch {root}: not a directory")
            observer.schedule(handler, str(root_path), recursive=True)
        observer.start()
    except OSError as e:
        raise WatchSetupFailure(f"Could not start file watcher: {e}") from e
    logger.info(f"Watching {len(roots)} root(s) for changes")
    return observer

# Exception hierarchy for the clone detector
from typing import Any, Dict


class CloneDexError(Exception):
    """Base class for every error raised by clonedex"""

    @property
    def code(self) -> str:
        return type(self).__name__

    def to_dict(self) -> Dict[str, Any]:
        """Structured form used by the query protocol and the HTTP API"""
        return {"code": self.code, "message": str(self)}


class UnsupportedLanguage(CloneDexError):
    """No lexer table is registered for the requested language"""


class EmptyBag(CloneDexError):
    """A region produced no tokens (only comments or whitespace)"""


class UnbalancedDelimiters(CloneDexError):
    """Braces in a file do not pair up"""


class DomainError(CloneDexError, ValueError):
    """An argument is outside the domain of an operation (e.g. theta not in (0, 1])"""


class DuplicateBlock(CloneDexError):
    """A block id is already present in the index"""


class UnknownBlock(CloneDexError):
    """A block id is not present in the index"""


class CorruptIndex(CloneDexError):
    """The index file is truncated or unreadable"""


class VersionMismatch(CloneDexError):
    """The index file was written by an incompatible format version"""


class IndexNotLoaded(CloneDexError):
    """A query was issued before any index was built or loaded"""


class NoBlockAtLocation(CloneDexError):
    """No indexed block contains the queried file/line"""


class IoFailure(CloneDexError):
    """Writing a report or index file failed"""


class MutationInapplicable(CloneDexError):
    """A mutation cannot be applied to the given block"""


class WatchSetupFailure(CloneDexError):
    """The file-system watcher could not be started"""


class BadRequest(CloneDexError):
    """A protocol request is malformed"""


class UnreadableRoot(CloneDexError):
    """An input root does not exist or is not a readable directory"""

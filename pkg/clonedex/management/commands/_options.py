"""
Option handling shared by the clonedex management commands.

Every command merges its settings as: environment defaults < ``--config`` file
< command-line flags. Flag defaults are None so an absent flag never shadows
a value from the config file.
"""
from contextlib import contextmanager
from typing import Any, Dict, Iterable, List

from django.core.management.base import BaseCommand, CommandError
from dotenv import dotenv_values
from pydantic import ValidationError

from clonedex.config import CliConfig, Granularity, OutputFormat, Scope, config
from clonedex.exceptions import CloneDexError, NoBlockAtLocation
from clonedex.index import CloneIndex

EXIT_USAGE = 2
EXIT_NOT_FOUND = 3

# option/config-file key -> CliConfig field
FIELD_FOR_KEY = {
    "threshold": "theta",
    "theta": "theta",
    "granularity": "granularity",
    "lang": "languages",
    "languages": "languages",
    "min_tokens": "min_tokens",
    "normalize_identifiers": "normalize_identifiers",
    "normalize_literals": "normalize_literals",
    "scope": "scope",
    "format": "output_format",
    "out": "out",
    "index": "index_path",
    "roots": "roots",
    "debounce_ms": "debounce_ms",
    "json": "json_output",
    "workers": "workers",
    "project_layout": "project_layout",
}

LIST_FIELDS = {"languages", "roots"}


def environment_defaults() -> Dict[str, Any]:
    return {
        "theta": config.THRESHOLD,
        "granularity": config.GRANULARITY,
        "min_tokens": config.MIN_TOKENS,
        "normalize_identifiers": config.NORMALIZE_IDENTIFIERS,
        "normalize_literals": config.NORMALIZE_LITERALS,
        "scope": config.SCOPE,
        "output_format": config.OUTPUT_FORMAT,
        "debounce_ms": config.DEBOUNCE_MS,
        "workers": config.WORKERS,
        "project_layout": config.PROJECT_LAYOUT,
    }


def _split_list(value: Any) -> tuple:
    if isinstance(value, str):
        return tuple(part.strip() for part in value.split(",") if part.strip())
    items = []
    for item in value or ():
        items.extend(_split_list(item) if isinstance(item, str) else [item])
    return tuple(items)


def read_config_file(path: str) -> Dict[str, Any]:
    """CliConfig fields from a key=value file

    Raises:
        CommandError: missing file or unknown key
    """
    try:
        with open(path, encoding="utf-8") as handle:
            raw = dotenv_values(stream=handle)
    except OSError as e:
        raise CommandError(f"Cannot read config file {path}: {e}", returncode=EXIT_USAGE) from e
    values = {}
    for key, value in raw.items():
        normalized = key.strip().lower().replace("-", "_")
        field = FIELD_FOR_KEY.get(normalized)
        if field is None:
            raise CommandError(f"Unknown key '{key}' in config file {path}", returncode=EXIT_USAGE)
        if value is None:
            continue
        values[field] = _split_list(value) if field in LIST_FIELDS else value
    return values


def explicit_settings(options: Dict[str, Any]) -> Dict[str, Any]:
    """CliConfig fields set by the --config file or by flags, flags winning"""
    explicit: Dict[str, Any] = {}
    if options.get("config"):
        explicit.update(read_config_file(options["config"]))
    for key, field in FIELD_FOR_KEY.items():
        value = options.get(key)
        if value is None:
            continue
        explicit[field] = _split_list(value) if field in LIST_FIELDS else value
    return explicit


def merge_cli_config(subcommand: str, options: Dict[str, Any]) -> CliConfig:
    """defaults < config file < flags, validated into a CliConfig"""
    merged = environment_defaults()
    merged.update(explicit_settings(options))
    try:
        return CliConfig(subcommand=subcommand, **merged)
    except ValidationError as e:
        raise CommandError(f"Invalid configuration: {e}", returncode=EXIT_USAGE) from e


def index_conflicts(index: CloneIndex, cli: CliConfig, explicit: Iterable[str]) -> List[str]:
    """Explicitly requested build settings that differ from those an index was built with"""
    stored = {
        "granularity": index.granularity,
        "min_tokens": index.min_tokens,
        "normalize_identifiers": index.normalization.rename_identifiers,
        "normalize_literals": index.normalization.abstract_literals,
    }
    conflicts = []
    for field, built_with in stored.items():
        if field in explicit and getattr(cli, field) != built_with:
            value = getattr(cli, field)
            conflicts.append(
                f"{field.replace('_', '-')}={getattr(value, 'value', value)} "
                f"(index built with {getattr(built_with, 'value', built_with)})"
            )
    return conflicts


def add_detection_arguments(parser):
    parser.add_argument(
        '--threshold', type=float, default=None,
        help='Similarity threshold theta in (0, 1] (default 0.7)'
    )
    parser.add_argument(
        '--granularity', choices=[g.value for g in Granularity], default=None,
        help='Block granularity: file, method or block (default method)'
    )
    parser.add_argument(
        '--lang', action='append', default=None,
        help='Only index these languages (repeatable or comma separated)'
    )
    parser.add_argument(
        '--min-tokens', type=int, default=None,
        help='Drop blocks with fewer tokens (default 50)'
    )
    parser.add_argument(
        '--normalize-identifiers', action='store_true', default=None,
        help='Replace every identifier with one placeholder token'
    )
    parser.add_argument(
        '--normalize-literals', action='store_true', default=None,
        help='Replace string, char and number literals with placeholder tokens'
    )
    parser.add_argument(
        '--scope', choices=[s.value for s in Scope], default=None,
        help='Report intra-project, inter-project or both kinds of pairs (default both)'
    )
    parser.add_argument(
        '--project-layout', choices=['root', 'children'], default=None,
        help='Each root is one project, or each child directory of a root is one'
    )
    parser.add_argument(
        '--workers', type=int, default=None,
        help='Worker processes for detection (default 1)'
    )
    parser.add_argument(
        '--config', default=None,
        help='key=value file merged under command-line flags'
    )


def add_roots_argument(parser, required: bool = False):
    parser.add_argument(
        '--roots', nargs='+', default=None, required=required,
        help='Source root directories'
    )


def add_index_argument(parser):
    parser.add_argument(
        '--index', default=None,
        help=f'Index file path (default {config.INDEX_PATH})'
    )


def add_output_arguments(parser):
    parser.add_argument(
        '--format', choices=[f.value for f in OutputFormat], default=None,
        help='Report format: csv, json or tree (default csv)'
    )
    parser.add_argument(
        '--out', default=None,
        help='Write the report to this file instead of stdout'
    )


@contextmanager
def translate_errors():
    """Map clonedex errors onto command exit codes"""
    try:
        yield
    except NoBlockAtLocation as e:
        raise CommandError(str(e), returncode=EXIT_NOT_FOUND) from e
    except CloneDexError as e:
        raise CommandError(str(e), returncode=EXIT_USAGE) from e


class CloneCommand(BaseCommand):
    """Base for clonedex commands: config merging and error translation"""
    subcommand = ""
    explicit: frozenset = frozenset()

    def build_config(self, options: Dict[str, Any]) -> CliConfig:
        self.explicit = frozenset(explicit_settings(options))
        return merge_cli_config(self.subcommand, options)

    def check_index(self, index: CloneIndex, cli: CliConfig) -> CloneIndex:
        """Refuse an index built with other settings than the ones asked for

        A threshold given by flag or config file retargets the index; otherwise
        the index keeps the threshold it was built with.
        """
        conflicts = index_conflicts(index, cli, self.explicit)
        if conflicts:
            raise CommandError(
                f"Index was built with other settings: {', '.join(conflicts)}; rebuild it with `index`",
                returncode=EXIT_USAGE,
            )
        return index.retarget(cli.theta) if "theta" in self.explicit else index

    def index_path(self, cli: CliConfig) -> str:
        return cli.index_path or config.INDEX_PATH

    def require_roots(self, cli: CliConfig) -> Iterable[str]:
        if not cli.roots:
            raise CommandError(f"{self.subcommand} requires --roots", returncode=EXIT_USAGE)
        return cli.roots

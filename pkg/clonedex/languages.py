"""
Declarative language tables and the table-driven lexer built from them.

A language is described by one JSON file (keywords, operators, comment syntax,
literal delimiters). Every ``*.json`` under the configured language directory is
loaded at startup; adding a language means dropping a new table in that directory.
"""
import json
import logging
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from threading import Lock
from typing import Dict, FrozenSet, Iterator, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .config import config
from .exceptions import UnsupportedLanguage

logger = logging.getLogger(__name__)

DEFAULT_IDENTIFIER = r"[A-Za-z_$][A-Za-z0-9_$]*"
DEFAULT_NUMBER = (
    r"0[xX][0-9a-fA-F_]+[uUlL]*"
    r"|0[bB][01_]+[uUlL]*"
    r"|(?:\d[\d_]*(?:\.[\d_]*)?|\.\d[\d_]*)(?:[eE][+-]?\d+)?[fFdDlLuUmM]*"
)


class LanguageTable(BaseModel):
    """Lexical description of one language"""
    model_config = ConfigDict(frozen=True)

    name: str = Field(min_length=1)
    extensions: Tuple[str, ...]
    keywords: FrozenSet[str] = frozenset()
    operators: Tuple[str, ...] = ()
    line_comments: Tuple[str, ...] = ()
    block_comments: Tuple[Tuple[str, str], ...] = ()
    string_delimiters: Tuple[str, ...] = ('"',)
    char_delimiters: Tuple[str, ...] = ()
    directive_prefix: Optional[str] = None
    signature_trailers: FrozenSet[str] = frozenset()
    block_style: Literal["braces", "indent"] = "braces"
    block_keywords: FrozenSet[str] = frozenset()
    method_keywords: FrozenSet[str] = frozenset()
    header_modifiers: FrozenSet[str] = frozenset()
    identifier_pattern: str = DEFAULT_IDENTIFIER
    number_pattern: str = DEFAULT_NUMBER


class LexemeKind(str, Enum):
    IDENTIFIER = "identifier"
    KEYWORD = "keyword"
    STRING = "string"
    CHAR = "char"
    NUMBER = "number"
    OPERATOR = "operator"
    OTHER = "other"


@dataclass(frozen=True, slots=True)
class Lexeme:
    kind: LexemeKind
    text: str
    line: int
    start: int
    end: int


class Lexer:
    """Scanner compiled from a LanguageTable"""

    def __init__(self, table: LanguageTable):
        self.table = table
        self._pattern = re.compile(self._build_pattern(table))
        self._directive = None
        if table.directive_prefix:
            prefix = re.escape(table.directive_prefix)
            self._directive = re.compile(rf"(?m)^[ \t]*{prefix}(?:\\[\s\S]|[^\n\\])*")

    @staticmethod
    def _build_pattern(table: LanguageTable) -> str:
        parts: List[str] = []
        for opener, closer in table.block_comments:
            parts.append(rf"{re.escape(opener)}[\s\S]*?(?:{re.escape(closer)}|\Z)")
        for marker in table.line_comments:
            parts.append(rf"{re.escape(marker)}[^\n]*")
        comment = "|".join(parts) or r"(?!)"

        strings = []
        for delim in sorted(table.string_delimiters, key=len, reverse=True):
            d = re.escape(delim)
            if len(delim) > 1:
                strings.append(rf"{d}[\s\S]*?{d}")
            else:
                strings.append(rf"{d}(?:\\.|[^{d}\\\n])*{d}")
        string = "|".join(strings) or r"(?!)"

        chars = [
            rf"{re.escape(d)}(?:\\.|[^{re.escape(d)}\\\n])*{re.escape(d)}"
            for d in table.char_delimiters
        ]
        char = "|".join(chars) or r"(?!)"

        ops = sorted(table.operators, key=len, reverse=True)
        operator = "|".join(re.escape(op) for op in ops) or r"(?!)"

        return (
            rf"(?P<ws>\s+)"
            rf"|(?P<comment>{comment})"
            rf"|(?P<string>{string})"
            rf"|(?P<char>{char})"
            rf"|(?P<number>{table.number_pattern})"
            rf"|(?P<ident>{table.identifier_pattern})"
            rf"|(?P<op>{operator})"
            rf"|(?P<other>[\s\S])"
        )

    def _strip_directives(self, text: str) -> str:
        # Directive lines are blanked in place so offsets and line numbers survive
        if self._directive is None:
            return text
        return self._directive.sub(lambda m: re.sub(r"[^\n]", " ", m.group()), text)

    def lex(self, text: str) -> List[Lexeme]:
        """Scan text into lexemes, dropping whitespace, comments and directives"""
        return list(self.iter_lexemes(text))

    def iter_lexemes(self, text: str) -> Iterator[Lexeme]:
        keywords = self.table.keywords
        line = 1
        for match in self._pattern.finditer(self._strip_directives(text)):
            group = match.lastgroup
            value = match.group()
            if group == "ws" or group == "comment":
                line += value.count("\n")
                continue
            if group == "ident":
                kind = LexemeKind.KEYWORD if value in keywords else LexemeKind.IDENTIFIER
            elif group == "string":
                kind = LexemeKind.STRING
            elif group == "char":
                kind = LexemeKind.CHAR
            elif group == "number":
                kind = LexemeKind.NUMBER
            elif group == "op":
                kind = LexemeKind.OPERATOR
            else:
                kind = LexemeKind.OTHER
            yield Lexeme(kind, value, line, match.start(), match.end())
            line += value.count("\n")


class LanguageRegistry:
    """Loads language tables from a directory and hands out compiled lexers"""

    def __init__(self, language_dir: Optional[str] = None):
        self.language_dir = Path(language_dir or config.LANGUAGE_DIR)
        self.tables: Dict[str, LanguageTable] = {}
        self._lexers: Dict[str, Lexer] = {}
        self._by_extension: Dict[str, str] = {}
        self._lock = Lock()
        self._loaded = False

    def _ensure_loaded(self):
        if self._loaded:
            return
        with self._lock:
            if self._loaded:
                return
            if not self.language_dir.is_dir():
                logger.warning(f"Language table directory not found: {self.language_dir}")
            else:
                for table_path in sorted(self.language_dir.glob("*.json")):
                    self._load_table(table_path)
            self._loaded = True

    def _load_table(self, table_path: Path):
        try:
            data = json.loads(table_path.read_text(encoding="utf-8"))
            table = LanguageTable.model_validate(data)
        except (OSError, ValueError, ValidationError) as e:
            logger.warning(f"Skipping invalid language table {table_path.name}: {e}")
            return
        self.register(table)
        logger.debug(f"Loaded language table '{table.name}' from {table_path.name}")

    def register(self, table: LanguageTable):
        """Register (or replace) a language table"""
        self.tables[table.name] = table
        self._lexers.pop(table.name, None)
        for ext in table.extensions:
            self._by_extension[ext.lower()] = table.name

    def names(self) -> List[str]:
        self._ensure_loaded()
        return sorted(self.tables)

    def get(self, language: str) -> LanguageTable:
        self._ensure_loaded()
        table = self.tables.get(language)
        if table is None:
            raise UnsupportedLanguage(f"No lexer registered for language '{language}'")
        return table

    def lexer(self, language: str) -> Lexer:
        table = self.get(language)
        lexer = self._lexers.get(language)
        if lexer is None:
            lexer = Lexer(table)
            self._lexers[language] = lexer
        return lexer

    def language_for_path(self, path: str) -> Optional[str]:
        """Language tag for a file name, or None when no table claims its extension"""
        self._ensure_loaded()
        return self._by_extension.get(Path(path).suffix.lower())


# Singleton instance
language_registry = LanguageRegistry()

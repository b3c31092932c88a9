"""
Block extraction and tokenization.

Source files are cut into code blocks (whole file, method, or brace- or
indentation-delimited group) and every block is turned into a bag of
normalized tokens. Nothing here knows about indexing or detection.
"""
import hashlib
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

from .config import Granularity, NormalizationConfig
from .exceptions import EmptyBag, UnbalancedDelimiters
from .languages import LanguageRegistry, LanguageTable, Lexeme, LexemeKind, language_registry

logger = logging.getLogger(__name__)

IDENTIFIER_PLACEHOLDER = "$ID"
LITERAL_PLACEHOLDERS = {
    LexemeKind.STRING: "$STR",
    LexemeKind.CHAR: "$CHR",
    LexemeKind.NUMBER: "$NUM",
}

# Lexemes that end a statement when walking back from an opening brace
_STATEMENT_BOUNDARIES = {";", "{", "}"}


@dataclass(frozen=True)
class SourceFile:
    path: str
    project_id: str
    content: str
    language: str

    def __post_init__(self):
        if not self.path:
            raise ValueError("SourceFile.path must be non-empty")


@dataclass(frozen=True, eq=True)
class TokenBag:
    """Multiset of tokens; size counts tokens with multiplicity"""
    entries: Mapping[str, int]
    size: int = field(default=-1)

    def __post_init__(self):
        total = 0
        for token, freq in self.entries.items():
            if freq < 1:
                raise ValueError(f"Token {token!r} has non-positive frequency {freq}")
            total += freq
        if self.size == -1:
            object.__setattr__(self, "size", total)
        elif self.size != total:
            raise ValueError(f"Bag size {self.size} does not match frequency sum {total}")

    __hash__ = None

    @classmethod
    def from_tokens(cls, tokens: Iterable[str]) -> "TokenBag":
        return cls(dict(Counter(tokens)))

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, token: str) -> bool:
        return token in self.entries

    def get(self, token: str) -> int:
        return self.entries.get(token, 0)

    def items(self):
        return self.entries.items()


@dataclass(frozen=True)
class BlockRef:
    """Location metadata identifying a code block"""
    block_id: int
    project_id: str
    file: str
    start_line: int
    end_line: int

    def contains_line(self, line: int) -> bool:
        return self.start_line <= line <= self.end_line

    def to_dict(self) -> Dict[str, object]:
        return {
            "block_id": self.block_id,
            "project": self.project_id,
            "file": self.file,
            "start_line": self.start_line,
            "end_line": self.end_line,
        }


@dataclass(frozen=True)
class CodeBlock:
    block_id: int
    file: str
    project_id: str
    start_line: int
    end_line: int
    granularity: Granularity
    bag: TokenBag
    language: str = ""
    start_offset: int = 0
    end_offset: int = 0

    def __post_init__(self):
        if self.start_line > self.end_line:
            raise ValueError(f"Block {self.block_id}: start_line {self.start_line} > end_line {self.end_line}")
        if self.bag.size < 1:
            raise ValueError(f"Block {self.block_id} has an empty bag")

    @property
    def ref(self) -> BlockRef:
        return BlockRef(self.block_id, self.project_id, self.file, self.start_line, self.end_line)


def make_block_id(path: str, start_line: int, end_line: int, ordinal: int = 0) -> int:
    """Deterministic 63-bit id for a block extent"""
    key = f"{path}\x00{start_line}\x00{end_line}\x00{ordinal}".encode("utf-8")
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "big") >> 1


def split_lines(text: str) -> List[str]:
    """Split on '\\n' only, keeping line ends, so line numbers agree with the lexer"""
    parts = text.split("\n")
    lines = [part + "\n" for part in parts[:-1]]
    if parts[-1]:
        lines.append(parts[-1])
    return lines


def lex(text: str, language: str, registry: Optional[LanguageRegistry] = None) -> List[Lexeme]:
    """Raw lexemes of a text (comments and whitespace dropped)"""
    return (registry or language_registry).lexer(language).lex(text)


def normalize_lexeme(lexeme: Lexeme, norm: NormalizationConfig) -> str:
    if lexeme.kind is LexemeKind.IDENTIFIER and norm.rename_identifiers:
        return IDENTIFIER_PLACEHOLDER
    if norm.abstract_literals and lexeme.kind in LITERAL_PLACEHOLDERS:
        return LITERAL_PLACEHOLDERS[lexeme.kind]
    return lexeme.text


def tokenize_region(text: str, language: str,
                    norm: NormalizationConfig = NormalizationConfig(),
                    registry: Optional[LanguageRegistry] = None) -> TokenBag:
    """Tokenize a source region into a TokenBag

    Raises:
        UnsupportedLanguage: no lexer is registered for the language
        EmptyBag: the region holds only comments/whitespace
    """
    lexer = (registry or language_registry).lexer(language)
    counts: Counter = Counter(normalize_lexeme(lx, norm) for lx in lexer.iter_lexemes(text))
    if not counts:
        raise EmptyBag("Region contains no tokens")
    return TokenBag(dict(counts))


def _match_braces(lexemes: Sequence[Lexeme]) -> Dict[int, int]:
    """Map index of every '{' to the index of its '}'"""
    pairs: Dict[int, int] = {}
    stack: List[int] = []
    for i, lx in enumerate(lexemes):
        if lx.kind is not LexemeKind.OPERATOR:
            continue
        if lx.text == "{":
            stack.append(i)
        elif lx.text == "}":
            if not stack:
                raise UnbalancedDelimiters(f"Unmatched '}}' at line {lx.line}")
            pairs[stack.pop()] = i
    if stack:
        raise UnbalancedDelimiters(f"Unclosed '{{' at line {lexemes[stack[-1]].line}")
    return pairs


def _statement_start(lexemes: Sequence[Lexeme], brace: int) -> int:
    """Index of the first lexeme of the statement owning the brace at `brace`"""
    depth = 0
    i = brace - 1
    while i >= 0:
        text = lexemes[i].text
        if lexemes[i].kind is LexemeKind.OPERATOR:
            if text in (")", "]"):
                depth += 1
            elif text in ("(", "["):
                depth -= 1
            elif depth <= 0 and text in _STATEMENT_BOUNDARIES:
                break
            elif depth <= 0 and text == ":" and i > 0 and lexemes[i - 1].kind is LexemeKind.KEYWORD:
                # access labels such as `public:`
                break
        i -= 1
    return i + 1


def _skip_back_balanced(lexemes: Sequence[Lexeme], i: int, opener: str, closer: str) -> int:
    """From a closer at i, return the index of its matching opener (or -1)"""
    depth = 0
    while i >= 0:
        text = lexemes[i].text
        if text == closer:
            depth += 1
        elif text == opener:
            depth -= 1
            if depth == 0:
                return i
        elif closer == ">" and text == ">>":
            depth += 2
        i -= 1
    return -1


def _opens_method(lexemes: Sequence[Lexeme], brace: int, trailers) -> bool:
    """Heuristic: `name ( ... ) [trailers] {` with name an identifier not preceded by `new`"""
    i = brace - 1
    crossed_trailer = False
    while i >= 0:
        lx = lexemes[i]
        if lx.kind is LexemeKind.KEYWORD and lx.text in trailers:
            crossed_trailer = True
        elif not (lx.kind is LexemeKind.IDENTIFIER or lx.text in (".", ",", "::")):
            break
        i -= 1
    if i < 0 or lexemes[i].text != ")":
        return False
    if i < brace - 1 and not crossed_trailer:
        return False

    open_paren = _skip_back_balanced(lexemes, i, "(", ")")
    if open_paren <= 0:
        return False
    name = open_paren - 1
    if lexemes[name].text == ">":
        generic_open = _skip_back_balanced(lexemes, name, "<", ">")
        name = generic_open - 1
        if name < 0:
            return False
    if lexemes[name].kind is not LexemeKind.IDENTIFIER:
        return False
    return not (name > 0 and lexemes[name - 1].text == "new")


def _brace_extents(lexemes: Sequence[Lexeme], granularity: Granularity,
                   trailers) -> List[Tuple[int, int]]:
    """Lexeme index ranges (first, last) of method or brace blocks, in file order"""
    pairs = _match_braces(lexemes)
    extents: List[Tuple[int, int]] = []
    method_end = -1
    for open_idx in sorted(pairs):
        close_idx = pairs[open_idx]
        if granularity is Granularity.METHOD:
            if open_idx < method_end or not _opens_method(lexemes, open_idx, trailers):
                continue
            method_end = close_idx
        extents.append((_statement_start(lexemes, open_idx), close_idx))
    return extents


def _column(content: str, offset: int) -> int:
    line_start = content.rfind("\n", 0, offset) + 1
    return len(content[line_start:offset].expandtabs(8))


def _logical_line_starts(lexemes: Sequence[Lexeme], content: str) -> List[Tuple[int, int]]:
    """(lexeme index, column) of the first lexeme of every logical line"""
    starts: List[Tuple[int, int]] = []
    depth = 0
    last_line = 0
    for i, lx in enumerate(lexemes):
        continued = i > 0 and lexemes[i - 1].text == "\\"
        if depth <= 0 and lx.line > last_line and not continued:
            starts.append((i, _column(content, lx.start)))
        if lx.kind is LexemeKind.OPERATOR:
            if lx.text in ("(", "[", "{"):
                depth += 1
            elif lx.text in (")", "]", "}"):
                depth -= 1
        last_line = lx.line + lx.text.count("\n")
    return starts


def _indent_extents(lexemes: Sequence[Lexeme], content: str, granularity: Granularity,
                    table: LanguageTable) -> List[Tuple[int, int]]:
    """Lexeme index ranges of indentation-delimited blocks, in file order

    A header opens a block that runs until the next logical line indented no
    deeper than the header itself.
    """
    keywords = table.method_keywords if granularity is Granularity.METHOD else table.block_keywords
    open_headers: List[Tuple[int, int]] = []
    extents: List[Tuple[int, int]] = []
    for i, column in _logical_line_starts(lexemes, content):
        while open_headers and open_headers[-1][1] >= column:
            extents.append((open_headers.pop()[0], i - 1))
        head = i
        while head < len(lexemes) - 1 and lexemes[head].text in table.header_modifiers:
            head += 1
        if lexemes[head].kind is LexemeKind.KEYWORD and lexemes[head].text in keywords:
            open_headers.append((i, column))
    while open_headers:
        extents.append((open_headers.pop()[0], len(lexemes) - 1))
    extents.sort()

    if granularity is not Granularity.METHOD:
        return extents
    outermost: List[Tuple[int, int]] = []
    method_end = -1
    for first, last in extents:
        if first <= method_end:
            continue
        outermost.append((first, last))
        method_end = last
    return outermost


def _block_extents(lexemes: Sequence[Lexeme], content: str, granularity: Granularity,
                   table: LanguageTable) -> List[Tuple[int, int]]:
    if table.block_style == "indent":
        return _indent_extents(lexemes, content, granularity, table)
    return _brace_extents(lexemes, granularity, table.signature_trailers)


def _bag_of(lexemes: Sequence[Lexeme], norm: NormalizationConfig) -> TokenBag:
    return TokenBag(dict(Counter(normalize_lexeme(lx, norm) for lx in lexemes)))


def extract_blocks(file: SourceFile, granularity: Granularity,
                   norm: NormalizationConfig = NormalizationConfig(),
                   min_tokens: int = 1,
                   registry: Optional[LanguageRegistry] = None) -> List[CodeBlock]:
    """Cut a source file into code blocks at the requested granularity

    Blocks come back in file order. Each bag holds exactly the lexemes of its
    own extent, so two blocks sharing a line do not share that line's tokens.
    Blocks whose bag has fewer than `min_tokens` tokens, or no tokens at all,
    are dropped. A brace language file whose braces do not balance is degraded
    to file granularity with a warning.

    Raises:
        UnsupportedLanguage: no lexer is registered for file.language
    """
    registry = registry or language_registry
    table = registry.get(file.language)
    granularity = Granularity(granularity)
    lines = split_lines(file.content)
    if not lines:
        return []

    lexemes = registry.lexer(file.language).lex(file.content)
    if not lexemes:
        return []
    if granularity is Granularity.FILE:
        extents = [(0, len(lexemes) - 1)]
    else:
        try:
            extents = _block_extents(lexemes, file.content, granularity, table)
        except UnbalancedDelimiters as e:
            logger.warning(f"{file.path}: {e}; falling back to file granularity")
            granularity = Granularity.FILE
            extents = [(0, len(lexemes) - 1)]

    blocks: List[CodeBlock] = []
    seen: Counter = Counter()
    for first, last in extents:
        bag = _bag_of(lexemes[first:last + 1], norm)
        if bag.size < min_tokens:
            continue
        if granularity is Granularity.FILE:
            start, end = 1, len(lines)
            start_offset, end_offset = 0, len(file.content)
        else:
            start = lexemes[first].line
            end = lexemes[last].line + lexemes[last].text.count("\n")
            start_offset, end_offset = lexemes[first].start, lexemes[last].end
        ordinal = seen[(start, end)]
        seen[(start, end)] += 1
        blocks.append(CodeBlock(
            block_id=make_block_id(file.path, start, end, ordinal),
            file=file.path,
            project_id=file.project_id,
            start_line=start,
            end_line=end,
            granularity=granularity,
            bag=bag,
            language=file.language,
            start_offset=start_offset,
            end_offset=end_offset,
        ))
    return blocks


def block_text(content: str, block: CodeBlock) -> str:
    """Source text of a block's own extent"""
    return content[block.start_offset:block.end_offset]




def iter_statements(lexemes: Sequence[Lexeme]) -> Iterator[Tuple[int, int]]:
    """(first, last) lexeme index of each simple `;`-terminated statement outside parentheses"""
    depth = 0
    start = 0
    for i, lx in enumerate(lexemes):
        if lx.kind is LexemeKind.OPERATOR:
            if lx.text in ("(", "["):
                depth += 1
            elif lx.text in (")", "]"):
                depth -= 1
            elif depth == 0 and lx.text in ("{", "}"):
                start = i + 1
            elif depth == 0 and lx.text == ";":
                if start < i:
                    yield start, i
                start = i + 1

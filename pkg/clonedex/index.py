"""
Partial inverted index over sub-blocks plus the forward index used for verification.

Every block is sorted under one corpus-global token order (rarest tokens first).
Only the first `prefix_len` distinct tokens of a sorted block are posted to the
inverted index; any block sharing at least ceil(theta * |B|) tokens with it must
hit one of those, so the partial index loses no clone pair. The forward index
keeps the full sorted sequence of every block.
"""
import bisect
import hashlib
import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, Iterable, Iterator, List, NamedTuple, Optional, Sequence, Tuple, Union

from .config import DetectionConfig, Granularity, NormalizationConfig, theta_fraction
from .corpus import content_digest
from .exceptions import CloneDexError, DomainError, DuplicateBlock, UnknownBlock
from .languages import LanguageRegistry
from .tokenizer import BlockRef, CodeBlock, SourceFile, extract_blocks

logger = logging.getLogger(__name__)

UNKNOWN_RANK_SPAN = 2**32

ThetaLike = Union[float, Fraction, str]


def as_theta(theta: ThetaLike) -> Fraction:
    """Exact threshold in (0, 1]

    Raises:
        DomainError: theta outside (0, 1]
    """
    try:
        value = theta if isinstance(theta, Fraction) else theta_fraction(theta)
    except (TypeError, ValueError) as e:
        raise DomainError(f"Invalid threshold {theta!r}: {e}") from e
    if not (0 < value <= 1):
        raise DomainError(f"Threshold must be in (0, 1], got {theta}")
    return value


def ceil_theta(theta: Fraction, size: int) -> int:
    """ceil(theta * size) in integer arithmetic"""
    return -((-theta.numerator * size) // theta.denominator)


def floor_over_theta(theta: Fraction, size: int) -> int:
    """floor(size / theta) in integer arithmetic"""
    return (size * theta.denominator) // theta.numerator


def required_overlap(theta: Fraction, size_a: int, size_b: int) -> int:
    """Overlap a pair needs to be reported: ceil(theta * max(|A|, |B|))"""
    return ceil_theta(theta, max(size_a, size_b))


def compute_prefix_length(size: int, theta: ThetaLike) -> int:
    """Length of the sub-block: size - ceil(theta * size) + 1

    Raises:
        DomainError: size < 1 or theta outside (0, 1]
    """
    if size < 1:
        raise DomainError(f"Block size must be positive, got {size}")
    exact = as_theta(theta)
    return size - ceil_theta(exact, size) + 1


@dataclass
class TokenOrder:
    """Global token order: ascending document frequency, ties broken lexicographically"""
    rank: Dict[str, int] = field(default_factory=dict)
    doc_freq: Dict[str, int] = field(default_factory=dict)

    @property
    def max_rank(self) -> int:
        return len(self.rank) - 1

    def rank_of(self, token: str) -> int:
        rank = self.rank.get(token)
        if rank is not None:
            return rank
        # Tokens first seen after the order was frozen rank past every known token
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=4).digest()
        return self.max_rank + 1 + int.from_bytes(digest, "big") % UNKNOWN_RANK_SPAN

    def sort_key(self, token: str) -> Tuple[int, str]:
        return (self.rank_of(token), token)

    def tokens(self) -> List[str]:
        """Known tokens in rank order"""
        return sorted(self.rank, key=self.rank.__getitem__)


def build_token_order(blocks: Iterable[CodeBlock]) -> TokenOrder:
    """Order tokens by the number of blocks containing them, rarest first"""
    doc_freq: Counter = Counter()
    for block in blocks:
        doc_freq.update(block.bag.entries.keys())
    ordered = sorted(doc_freq, key=lambda token: (doc_freq[token], token))
    return TokenOrder(
        rank={token: i for i, token in enumerate(ordered)},
        doc_freq={token: doc_freq[token] for token in ordered},
    )


@dataclass(frozen=True)
class SortedBlock:
    """A block's bag sorted under the token order, with its sub-block length"""
    ref: BlockRef
    size: int
    tokens: Tuple[Tuple[str, int], ...]
    prefix_len: int
    keys: Tuple[Tuple[int, str], ...] = field(repr=False, compare=False)
    remaining: Tuple[int, ...] = field(repr=False, compare=False)

    @property
    def block_id(self) -> int:
        return self.ref.block_id

    @property
    def distinct(self) -> int:
        return len(self.tokens)

    def prefix_tokens(self) -> List[str]:
        return [token for token, _ in self.tokens[:self.prefix_len]]


def _remaining_units(tokens: Sequence[Tuple[str, int]]) -> Tuple[int, ...]:
    # remaining[i] = token units in tokens[i:]
    suffix = [0] * (len(tokens) + 1)
    for i in range(len(tokens) - 1, -1, -1):
        suffix[i] = suffix[i + 1] + tokens[i][1]
    return tuple(suffix)


def make_sorted_block(ref: BlockRef, entries: Iterable[Tuple[str, int]],
                      order: TokenOrder, theta: ThetaLike) -> SortedBlock:
    keyed = sorted(((order.sort_key(token), token, freq) for token, freq in entries))
    tokens = tuple((token, freq) for _, token, freq in keyed)
    size = sum(freq for _, freq in tokens)
    prefix_len = min(compute_prefix_length(size, theta), len(tokens))
    return SortedBlock(
        ref=ref,
        size=size,
        tokens=tokens,
        prefix_len=prefix_len,
        keys=tuple(key for key, _, _ in keyed),
        remaining=_remaining_units(tokens),
    )


def sort_block(block: CodeBlock, order: TokenOrder, theta: ThetaLike) -> SortedBlock:
    """Sort a block's bag under the order and compute its prefix length"""
    return make_sorted_block(block.ref, block.bag.items(), order, theta)


class Posting(NamedTuple):
    """Inverted-index entry; tuples order by size first, which keeps lists size-sorted"""
    size: int
    block_id: int
    position: int
    project_id: str


class PartialInvertedIndex:
    """token -> postings, holding sub-block tokens only"""

    def __init__(self):
        self.postings: Dict[str, List[Posting]] = {}

    def add(self, token: str, posting: Posting):
        bisect.insort(self.postings.setdefault(token, []), posting)

    def discard(self, token: str, posting: Posting):
        postings = self.postings.get(token)
        if not postings:
            return
        i = bisect.bisect_left(postings, posting)
        if i < len(postings) and postings[i] == posting:
            del postings[i]
        if not postings:
            del self.postings[token]

    def get(self, token: str) -> List[Posting]:
        return self.postings.get(token, [])

    def in_size_range(self, token: str, low: int, high: int) -> List[Posting]:
        """Postings of a token whose block size lies in [low, high]"""
        postings = self.postings.get(token)
        if not postings:
            return []
        start = bisect.bisect_left(postings, (low,))
        end = bisect.bisect_left(postings, (high + 1,))
        return postings[start:end]

    def __len__(self) -> int:
        return sum(len(postings) for postings in self.postings.values())

    def __eq__(self, other) -> bool:
        return isinstance(other, PartialInvertedIndex) and self.postings == other.postings


class ForwardIndex:
    """block id -> full SortedBlock"""

    def __init__(self):
        self.blocks: Dict[int, SortedBlock] = {}

    def add(self, sb: SortedBlock):
        self.blocks[sb.block_id] = sb

    def pop(self, block_id: int) -> Optional[SortedBlock]:
        return self.blocks.pop(block_id, None)

    def get(self, block_id: int) -> Optional[SortedBlock]:
        return self.blocks.get(block_id)

    def __contains__(self, block_id: int) -> bool:
        return block_id in self.blocks

    def __len__(self) -> int:
        return len(self.blocks)

    def __iter__(self) -> Iterator[SortedBlock]:
        return iter(self.blocks.values())

    def __eq__(self, other) -> bool:
        return isinstance(other, ForwardIndex) and self.blocks == other.blocks


def _posting(sb: SortedBlock, position: int) -> Posting:
    return Posting(sb.size, sb.block_id, position, sb.ref.project_id)


def index_block(sb: SortedBlock, idx: PartialInvertedIndex, fwd: ForwardIndex) -> int:
    """Post the block's sub-block tokens and store its full sequence; returns postings added

    Raises:
        DuplicateBlock: the block id is already indexed
    """
    if sb.block_id in fwd:
        raise DuplicateBlock(f"Block {sb.block_id} is already indexed")
    for position in range(sb.prefix_len):
        idx.add(sb.tokens[position][0], _posting(sb, position))
    fwd.add(sb)
    return sb.prefix_len


def remove_block(block_id: int, idx: PartialInvertedIndex, fwd: ForwardIndex) -> SortedBlock:
    """Drop every posting and the forward entry of a block

    Raises:
        UnknownBlock: the block id is not indexed
    """
    sb = fwd.pop(block_id)
    if sb is None:
        raise UnknownBlock(f"Block {block_id} is not indexed")
    for position in range(sb.prefix_len):
        idx.discard(sb.tokens[position][0], _posting(sb, position))
    return sb


@dataclass(frozen=True)
class FileEntry:
    path: str
    project_id: str
    language: str
    digest: str
    block_ids: Tuple[int, ...] = ()


@dataclass(frozen=True)
class UpdateResult:
    path: str
    removed: Tuple[int, ...] = ()
    added: Tuple[int, ...] = ()
    skipped: bool = False

    @property
    def changed(self) -> bool:
        return bool(self.removed or self.added)


class CloneIndex:
    """Token order, partial inverted index, forward index and per-file bookkeeping"""

    def __init__(self, order: TokenOrder, theta: ThetaLike = 0.7,
                 granularity: Granularity = Granularity.METHOD,
                 normalization: NormalizationConfig = NormalizationConfig(),
                 min_tokens: int = 50,
                 registry: Optional[LanguageRegistry] = None):
        self.order = order
        self.theta = as_theta(theta)
        self.granularity = Granularity(granularity)
        self.normalization = normalization
        self.min_tokens = min_tokens
        self.registry = registry
        self.postings = PartialInvertedIndex()
        self.forward = ForwardIndex()
        self.files: Dict[str, FileEntry] = {}
        self.generation = 0

    # ------------------------------------------------------------------ build

    @classmethod
    def build(cls, files: Sequence[SourceFile], cfg: DetectionConfig,
              registry: Optional[LanguageRegistry] = None,
              order: Optional[TokenOrder] = None) -> "CloneIndex":
        """Extract, order, sort and index a whole corpus"""
        extracted: List[Tuple[SourceFile, List[CodeBlock]]] = []
        for source in sorted(files, key=lambda f: f.path):
            try:
                blocks = extract_blocks(source, cfg.granularity, cfg.normalization,
                                        cfg.min_tokens, registry)
            except CloneDexError as e:
                logger.warning(f"Skipping {source.path}: {e}")
                continue
            extracted.append((source, blocks))

        if order is None:
            order = build_token_order(b for _, blocks in extracted for b in blocks)
        index = cls(order, cfg.theta_exact, cfg.granularity, cfg.normalization,
                    cfg.min_tokens, registry)
        for source, blocks in extracted:
            index._replace_file(source, [sort_block(b, order, index.theta) for b in blocks])
        logger.info(f"Indexed {len(index.forward)} blocks from {len(index.files)} files "
                    f"({len(index.postings)} postings)")
        return index

    @classmethod
    def from_blocks(cls, blocks: Sequence[CodeBlock], cfg: DetectionConfig,
                    order: Optional[TokenOrder] = None) -> "CloneIndex":
        """Index pre-extracted blocks (no file bookkeeping)"""
        blocks = [b for b in blocks if b.bag.size >= cfg.min_tokens]
        if order is None:
            order = build_token_order(blocks)
        index = cls(order, cfg.theta_exact, cfg.granularity, cfg.normalization, cfg.min_tokens)
        for block in sorted(blocks, key=lambda b: b.block_id):
            index.add_sorted(sort_block(block, order, index.theta))
        return index

    def add_sorted(self, sb: SortedBlock) -> int:
        return index_block(sb, self.postings, self.forward)

    # ------------------------------------------------------------ incremental

    def _replace_file(self, source: SourceFile, sorted_blocks: List[SortedBlock]) -> UpdateResult:
        old = self.files.get(source.path)
        removed = old.block_ids if old else ()
        clashes = [sb.block_id for sb in sorted_blocks
                   if sb.block_id in self.forward and sb.block_id not in removed]
        if clashes:
            logger.warning(f"Skipping {source.path}: block id clash with {clashes[:3]}")
            return UpdateResult(source.path, skipped=True)

        for block_id in removed:
            remove_block(block_id, self.postings, self.forward)
        for sb in sorted_blocks:
            index_block(sb, self.postings, self.forward)
        added = tuple(sb.block_id for sb in sorted_blocks)
        self.files[source.path] = FileEntry(
            path=source.path,
            project_id=source.project_id,
            language=source.language,
            digest=content_digest(source.content),
            block_ids=added,
        )
        return UpdateResult(source.path, removed=tuple(removed), added=added)

    def update_file(self, source: SourceFile) -> UpdateResult:
        """Re-extract one file and swap its blocks in; the token order stays frozen

        All-or-nothing per file: extraction failures are logged and leave the
        index untouched.
        """
        try:
            blocks = extract_blocks(source, self.granularity, self.normalization,
                                    self.min_tokens, self.registry)
            sorted_blocks = [sort_block(b, self.order, self.theta) for b in blocks]
        except CloneDexError as e:
            logger.warning(f"Update of {source.path} skipped: {e}")
            return UpdateResult(source.path, skipped=True)
        result = self._replace_file(source, sorted_blocks)
        if not result.skipped:
            self.generation += 1
        return result

    def remove_file(self, path: str) -> UpdateResult:
        """Forget a file and all its blocks"""
        entry = self.files.pop(path, None)
        if entry is None:
            return UpdateResult(path)
        for block_id in entry.block_ids:
            remove_block(block_id, self.postings, self.forward)
        self.generation += 1
        return UpdateResult(path, removed=entry.block_ids)

    def rescan(self, files: Sequence[SourceFile]) -> List[UpdateResult]:
        """Bring the index in line with a fresh listing of the corpus

        Files whose content digest is unchanged are left alone; files missing from
        the listing are removed.
        """
        results = []
        present = {source.path for source in files}
        for path in sorted(set(self.files) - present):
            results.append(self.remove_file(path))
        for source in sorted(files, key=lambda f: f.path):
            entry = self.files.get(source.path)
            if entry is not None and entry.digest == content_digest(source.content):
                continue
            results.append(self.update_file(source))
        return results

    def retarget(self, theta: ThetaLike) -> "CloneIndex":
        """Copy of this index whose sub-blocks are cut for another threshold"""
        exact = as_theta(theta)
        if exact == self.theta:
            return self
        other = CloneIndex(self.order, exact, self.granularity, self.normalization,
                           self.min_tokens, self.registry)
        for sb in sorted(self.forward, key=lambda b: b.block_id):
            prefix_len = min(compute_prefix_length(sb.size, exact), sb.distinct)
            other.add_sorted(replace(sb, prefix_len=prefix_len))
        other.files = dict(self.files)
        other.generation = self.generation
        return other

    # ---------------------------------------------------------------- queries

    def block(self, block_id: int) -> SortedBlock:
        sb = self.forward.get(block_id)
        if sb is None:
            raise UnknownBlock(f"Block {block_id} is not indexed")
        return sb

    def blocks_in_file(self, path: str) -> List[SortedBlock]:
        entry = self.files.get(path)
        if entry is None:
            return [sb for sb in self.forward if sb.ref.file == path]
        return [self.forward.blocks[bid] for bid in entry.block_ids]

    def sort_query(self, block: CodeBlock) -> SortedBlock:
        """Sort a block that is not (necessarily) indexed, for ad-hoc queries"""
        return sort_block(block, self.order, self.theta)

    def stats(self) -> Dict[str, int]:
        return {
            "files": len(self.files),
            "blocks": len(self.forward),
            "tokens": sum(sb.size for sb in self.forward),
            "postings": len(self.postings),
            "generation": self.generation,
        }

    def languages(self) -> List[str]:
        return sorted({entry.language for entry in self.files.values()})

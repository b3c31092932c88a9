"""
Clone detection over the partial index.

For every query block the sub-block tokens are looked up in the inverted index,
candidates outside the admissible size range are dropped, and survivors are
verified by a merge walk over the two sorted token sequences. The walk keeps a
lower bound (overlap verified so far) and an upper bound (verified plus what the
shorter remainder could still contribute) and stops as soon as either decides.
"""
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .config import DetectionConfig, Scope
from .exceptions import IndexNotLoaded
from .index import (
    CloneIndex,
    ForwardIndex,
    PartialInvertedIndex,
    SortedBlock,
    ThetaLike,
    as_theta,
    ceil_theta,
    floor_over_theta,
    required_overlap,
)
from .tokenizer import BlockRef, CodeBlock, TokenBag

logger = logging.getLogger(__name__)

Seed = Tuple[int, int]
BoundObserver = Callable[[int, int], None]


@dataclass(frozen=True)
class ClonePair:
    """Two blocks whose token overlap reaches the threshold; block_a has the smaller id"""
    block_a: BlockRef
    block_b: BlockRef
    overlap: int
    required: int
    similarity: float

    def sort_key(self) -> tuple:
        a, b = self.block_a, self.block_b
        return (a.file, a.start_line, b.file, b.start_line,
                a.end_line, b.end_line, a.block_id, b.block_id)

    def involves(self, block_id: int) -> bool:
        return block_id in (self.block_a.block_id, self.block_b.block_id)

    def other(self, block_id: int) -> BlockRef:
        return self.block_b if self.block_a.block_id == block_id else self.block_a

    def to_dict(self) -> Dict[str, object]:
        return {
            "block_a": self.block_a.to_dict(),
            "block_b": self.block_b.to_dict(),
            "overlap": self.overlap,
            "required": self.required,
            "similarity": self.similarity,
        }


def make_pair(ref_1: BlockRef, size_1: int, ref_2: BlockRef, size_2: int,
              overlap_units: int, required: int) -> ClonePair:
    """Build a pair in canonical orientation"""
    if ref_1.block_id > ref_2.block_id:
        ref_1, ref_2 = ref_2, ref_1
    return ClonePair(
        block_a=ref_1,
        block_b=ref_2,
        overlap=overlap_units,
        required=required,
        similarity=overlap_units / max(size_1, size_2),
    )


def sort_pairs(pairs: Iterable[ClonePair]) -> List[ClonePair]:
    return sorted(pairs, key=ClonePair.sort_key)


# --------------------------------------------------------------------- overlap

BagLike = Union[TokenBag, SortedBlock, CodeBlock, Mapping[str, int]]


def _entries(bag: BagLike) -> Mapping[str, int]:
    if isinstance(bag, SortedBlock):
        return dict(bag.tokens)
    if isinstance(bag, CodeBlock):
        return bag.bag.entries
    if isinstance(bag, TokenBag):
        return bag.entries
    return bag


def _size(bag: BagLike) -> int:
    if isinstance(bag, (SortedBlock, TokenBag)):
        return bag.size
    if isinstance(bag, CodeBlock):
        return bag.bag.size
    return sum(bag.values())


def overlap(bag1: BagLike, bag2: BagLike) -> int:
    """Multiset intersection size: sum over tokens of min(freq1, freq2)"""
    entries1, entries2 = _entries(bag1), _entries(bag2)
    if len(entries1) > len(entries2):
        entries1, entries2 = entries2, entries1
    return sum(min(freq, entries2.get(token, 0)) for token, freq in entries1.items())


def is_clone(b1: BagLike, b2: BagLike, theta: ThetaLike) -> bool:
    """True iff overlap >= ceil(theta * max(|b1|, |b2|))"""
    return overlap(b1, b2) >= required_overlap(as_theta(theta), _size(b1), _size(b2))


# ------------------------------------------------------------------ candidates

def size_bounds(size: int, theta: ThetaLike) -> Tuple[int, int]:
    """Sizes a candidate may have and still reach the threshold with a block of `size`"""
    exact = as_theta(theta)
    return ceil_theta(exact, size), floor_over_theta(exact, size)


def query_candidates(q: SortedBlock, idx: PartialInvertedIndex, theta: ThetaLike,
                     scope: Scope = Scope.BOTH) -> Dict[int, Seed]:
    """Blocks sharing a sub-block token with q and passing the size and scope filters

    Returns candidate id -> (position in q, position in candidate) of the first
    shared token. Because both sides are sorted under one order, no token ranked
    before that seed is shared by the pair. q itself is included when indexed.
    """
    low, high = size_bounds(q.size, theta)
    project = q.ref.project_id
    candidates: Dict[int, Seed] = {}
    for qpos in range(q.prefix_len):
        for posting in idx.in_size_range(q.tokens[qpos][0], low, high):
            if posting.block_id in candidates:
                continue
            if not scope.admits(project, posting.project_id):
                continue
            candidates[posting.block_id] = (qpos, posting.position)
    return candidates


# ---------------------------------------------------------------- verification

def verify_candidate(q: SortedBlock, c: SortedBlock, theta: ThetaLike,
                     seed: Seed = (0, 0), exact: bool = False,
                     observer: Optional[BoundObserver] = None) -> Optional[ClonePair]:
    """Merge-walk two sorted blocks and decide whether they are clones

    The walk rejects as soon as the upper bound drops under the required overlap.
    It accepts as soon as the verified overlap reaches it, unless `exact` is set,
    in which case the walk runs to the end and the pair carries the exact overlap.
    Without `exact`, an accepted pair carries the certified lower bound.

    Returns:
        The canonical ClonePair, or None when rejected.
    """
    required = required_overlap(as_theta(theta), q.size, c.size)
    i, j = seed
    nq, nc = q.distinct, c.distinct
    verified = 0
    upper = min(q.remaining[i], c.remaining[j])
    if observer is not None:
        observer(verified, upper)
    if upper < required:
        return None

    while i < nq and j < nc:
        if verified >= required and not exact:
            break
        kq, kc = q.keys[i], c.keys[j]
        if kq == kc:
            verified += min(q.tokens[i][1], c.tokens[j][1])
            i += 1
            j += 1
        elif kq < kc:
            i += 1
        else:
            j += 1
        upper = verified + min(q.remaining[i], c.remaining[j])
        if observer is not None:
            observer(verified, upper)
        if upper < required:
            return None

    if verified < required:
        return None
    return make_pair(q.ref, q.size, c.ref, c.size, verified, required)


# ------------------------------------------------------------------- detection

def _detect_for(q: SortedBlock, idx: PartialInvertedIndex, fwd: ForwardIndex,
                theta: ThetaLike, scope: Scope) -> List[ClonePair]:
    # Only candidates with a smaller id: each pair is reported once, from its larger side
    pairs = []
    for cid, seed in query_candidates(q, idx, theta, scope).items():
        if cid >= q.block_id:
            continue
        pair = verify_candidate(q, fwd.blocks[cid], theta, seed, exact=True)
        if pair is not None:
            pairs.append(pair)
    return pairs


_worker_state: Dict[str, object] = {}


def _init_worker(idx: PartialInvertedIndex, fwd: ForwardIndex, theta: ThetaLike, scope: Scope):
    _worker_state.update(idx=idx, fwd=fwd, theta=theta, scope=scope)


def _detect_chunk(block_ids: Sequence[int]) -> List[ClonePair]:
    idx, fwd = _worker_state["idx"], _worker_state["fwd"]
    theta, scope = _worker_state["theta"], _worker_state["scope"]
    pairs = []
    for block_id in block_ids:
        pairs.extend(_detect_for(fwd.blocks[block_id], idx, fwd, theta, scope))
    return pairs


def _chunks(items: Sequence[int], count: int) -> List[Sequence[int]]:
    size = max(1, -(-len(items) // count))
    return [items[i:i + size] for i in range(0, len(items), size)]


def detect_indexed(index: CloneIndex, scope: Scope = Scope.BOTH, workers: int = 1) -> List[ClonePair]:
    """All clone pairs among the indexed blocks, canonically sorted"""
    if index is None:
        raise IndexNotLoaded("No index is loaded")
    scope = Scope(scope)
    started = time.perf_counter()
    block_ids = sorted(index.forward.blocks)

    if workers > 1 and len(block_ids) > 1:
        pairs: List[ClonePair] = []
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                                 initargs=(index.postings, index.forward, index.theta, scope)) as executor:
            for chunk_pairs in executor.map(_detect_chunk, _chunks(block_ids, workers * 4)):
                pairs.extend(chunk_pairs)
    else:
        pairs = []
        for block_id in block_ids:
            pairs.extend(_detect_for(index.forward.blocks[block_id], index.postings,
                                     index.forward, index.theta, scope))

    logger.info(f"Detected {len(pairs)} clone pairs among {len(block_ids)} blocks "
                f"in {time.perf_counter() - started:.3f}s")
    return sort_pairs(pairs)


def detect_all(blocks: Sequence[CodeBlock], cfg: DetectionConfig) -> List[ClonePair]:
    """Index a corpus of blocks and report every clone pair"""
    if not blocks:
        return []
    index = CloneIndex.from_blocks(blocks, cfg)
    return detect_indexed(index, cfg.scope, cfg.workers)


def query_clones_of(q: SortedBlock, index: Optional[CloneIndex],
                    scope: Scope = Scope.BOTH) -> List[ClonePair]:
    """Clones of one block against the whole index, the block itself excluded

    Raises:
        IndexNotLoaded: no index is available
    """
    if index is None:
        raise IndexNotLoaded("No index is loaded; run `index` first")
    pairs = []
    for cid, seed in query_candidates(q, index.postings, index.theta, Scope(scope)).items():
        if cid == q.block_id:
            continue
        pair = verify_candidate(q, index.forward.blocks[cid], index.theta, seed, exact=True)
        if pair is not None:
            pairs.append(pair)
    return sort_pairs(pairs)


def brute_force_detect(blocks: Sequence[CodeBlock], cfg: DetectionConfig) -> List[ClonePair]:
    """All-pairs overlap check with no index and no filters; the reference result"""
    theta = cfg.theta_exact
    ordered = sorted((b for b in blocks if b.bag.size >= cfg.min_tokens), key=lambda b: b.block_id)
    pairs = []
    for i, a in enumerate(ordered):
        for b in ordered[i + 1:]:
            if not cfg.scope.admits(a.project_id, b.project_id):
                continue
            shared = overlap(a.bag, b.bag)
            required = required_overlap(theta, a.bag.size, b.bag.size)
            if shared >= required:
                pairs.append(make_pair(a.ref, a.bag.size, b.ref, b.bag.size, shared, required))
    return sort_pairs(pairs)

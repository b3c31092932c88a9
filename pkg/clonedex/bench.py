"""
Desk-scale evaluation harness.

Seed methods are mutated into Type-1, Type-2 and Type-3 clones, planted next to
their originals, and the detector's recall is measured per clone type. Two more
checks live here: the oracle suite (indexed detection against brute force on
synthetic corpora) and a throughput smoke test over a generated Java corpus.
"""
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .config import DetectionConfig, Granularity, NormalizationConfig, Scope, config
from .detector import ClonePair, brute_force_detect, detect_all, detect_indexed, query_clones_of
from .exceptions import MutationInapplicable, UnreadableRoot
from .index import CloneIndex, as_theta, ceil_theta
from .languages import LanguageRegistry, LexemeKind, language_registry
from .tokenizer import (
    CodeBlock,
    SourceFile,
    TokenBag,
    block_text,
    extract_blocks,
    iter_statements,
    lex,
    make_block_id,
)

logger = logging.getLogger(__name__)

BENCH_PROJECT = "bench"
TYPE_2_NORMALIZED = "2n"
MAX_EDIT_FRACTION = 0.3
# Fewest planted pairs per type for a recall figure to count as a measurement
MIN_RECALL_SEEDS = 100
INDEX_SECONDS_PER_100_KLOC = 60.0
QUERY_P95_LIMIT_MS = 100.0


@dataclass(frozen=True)
class MutationSpec:
    type: int
    edit_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.type not in (1, 2, 3):
            raise ValueError(f"Mutation type must be 1, 2 or 3, got {self.type}")
        if not 0.0 <= self.edit_fraction <= MAX_EDIT_FRACTION:
            raise ValueError(f"Edit fraction must be in [0, {MAX_EDIT_FRACTION}], got {self.edit_fraction}")


# ------------------------------------------------------------------ mutation

def _splice(text: str, edits: Sequence[Tuple[int, int, str]]) -> str:
    """Apply (start, end, replacement) edits; spans must not overlap"""
    for start, end, replacement in sorted(edits, key=lambda e: e[0], reverse=True):
        text = text[:start] + replacement + text[end:]
    return text


def _comment_for(language: str, registry: LanguageRegistry, rng: np.random.Generator) -> str:
    table = registry.get(language)
    note = f"note {int(rng.integers(0, 1000))}"
    if table.block_comments:
        opener, closer = table.block_comments[0]
        return f" {opener} {note} {closer} "
    if table.line_comments:
        return f" {table.line_comments[0]} {note}\n"
    return " "


def _mutate_layout(text: str, language: str, rng: np.random.Generator,
                   registry: LanguageRegistry) -> str:
    # Lexemes re-emitted with fresh whitespace and comments between them
    separators = [" ", "  ", "\n", "\n    ", "\t"]
    parts = []
    for lexeme in lex(text, language, registry):
        if parts:
            roll = rng.random()
            if roll < 0.05:
                parts.append(_comment_for(language, registry, rng))
            else:
                parts.append(separators[int(rng.integers(0, len(separators)))])
        parts.append(lexeme.text)
    return "".join(parts) + "\n"


def _mutate_names(text: str, language: str, rng: np.random.Generator,
                  registry: LanguageRegistry) -> str:
    renames: Dict[str, str] = {}
    edits = []
    for lexeme in lex(text, language, registry):
        if lexeme.kind is LexemeKind.IDENTIFIER:
            if lexeme.text not in renames:
                renames[lexeme.text] = f"id_{len(renames)}_{int(rng.integers(0, 10_000))}"
            edits.append((lexeme.start, lexeme.end, renames[lexeme.text]))
        elif lexeme.kind is LexemeKind.NUMBER:
            edits.append((lexeme.start, lexeme.end, str(int(rng.integers(0, 1000)))))
        elif lexeme.kind is LexemeKind.STRING:
            edits.append((lexeme.start, lexeme.end, f'"s{int(rng.integers(0, 1000))}"'))
        elif lexeme.kind is LexemeKind.CHAR:
            edits.append((lexeme.start, lexeme.end, f"'{chr(97 + int(rng.integers(0, 26)))}'"))
    return _splice(text, edits)


def _mutate_statements(text: str, language: str, edit_fraction: float,
                       rng: np.random.Generator, registry: LanguageRegistry) -> str:
    lexemes = lex(text, language, registry)
    statements = list(iter_statements(lexemes))
    n = len(statements)
    k = int(np.floor(edit_fraction * n))
    if n < 2 or k == 0:
        raise MutationInapplicable(f"Cannot edit {k} of {n} statements")

    edits = []
    for choice in sorted(rng.choice(n, size=k, replace=False)):
        first, last = statements[int(choice)]
        start, end = lexemes[first].start, lexemes[last].end
        statement = text[start:end]
        operation = int(rng.integers(0, 3))
        identifiers = [i for i in range(first, last + 1) if lexemes[i].kind is LexemeKind.IDENTIFIER]
        if operation == 0 or (operation == 2 and not identifiers):
            edits.append((start, end, ""))
        elif operation == 1:
            edits.append((start, end, f"{statement} {statement}"))
        else:
            target = lexemes[identifiers[int(rng.integers(0, len(identifiers)))]]
            renamed = (text[start:target.start]
                       + f"edited_{int(rng.integers(0, 10_000))}"
                       + text[target.end:end])
            edits.append((start, end, renamed))
    return _splice(text, edits)


def mutate(block_source: str, spec: MutationSpec, language: str = "java",
           registry: Optional[LanguageRegistry] = None) -> str:
    """Deterministic Type-1/2/3 mutant of a block's source text

    Type 1 changes only layout and comments, Type 2 only identifier names and
    literal values, Type 3 edits floor(edit_fraction * n) of the n statements.

    Raises:
        MutationInapplicable: Type 3 on a block with too few statements
    """
    registry = registry or language_registry
    rng = np.random.default_rng(spec.seed)
    if spec.type == 1:
        return _mutate_layout(block_source, language, rng, registry)
    if spec.type == 2:
        return _mutate_names(block_source, language, rng, registry)
    return _mutate_statements(block_source, language, spec.edit_fraction, rng, registry)


# -------------------------------------------------------------------- recall

def load_seed_methods(seeds_path: str = config.SEEDS_PATH, language: str = "java",
                      min_tokens: int = 50,
                      registry: Optional[LanguageRegistry] = None) -> List[str]:
    """Source text of every method of the seed corpus with at least min_tokens tokens

    Raises:
        UnreadableRoot: the seed directory is missing or holds no usable method
    """
    registry = registry or language_registry
    root = Path(seeds_path)
    if not root.is_dir():
        raise UnreadableRoot(f"Seed corpus not found: {seeds_path}")
    extensions = set(registry.get(language).extensions)
    methods = []
    for path in sorted(p for p in root.rglob("*") if p.suffix in extensions):
        content = path.read_text(encoding="utf-8", errors="replace")
        source = SourceFile(str(path), BENCH_PROJECT, content, language)
        for block in extract_blocks(source, Granularity.METHOD, min_tokens=min_tokens, registry=registry):
            methods.append(block_text(content, block))
    if not methods:
        raise UnreadableRoot(f"Seed corpus at {seeds_path} holds no method of {min_tokens}+ tokens")
    return methods


@dataclass
class RecallRow:
    type: str
    planted: int = 0
    detected: int = 0
    expected: int = 0
    expected_detected: int = 0
    skipped: int = 0

    @property
    def recall(self) -> float:
        return self.detected / self.planted if self.planted else 1.0

    @property
    def expected_recall(self) -> float:
        return self.expected_detected / self.expected if self.expected else 1.0

    def to_dict(self) -> Dict[str, object]:
        return {
            "type": self.type,
            "planted": self.planted,
            "detected": self.detected,
            "recall": round(self.recall, 4),
            "expected": self.expected,
            "expected_detected": self.expected_detected,
            "expected_recall": round(self.expected_recall, 4),
            "skipped": self.skipped,
        }


def _single_block(source: SourceFile, cfg: DetectionConfig,
                  registry: LanguageRegistry) -> Optional[CodeBlock]:
    blocks = extract_blocks(source, cfg.granularity, cfg.normalization, cfg.min_tokens, registry)
    return blocks[0] if blocks else None


def _recall_for_type(label: str, spec_type: int, methods: Sequence[str], cfg: DetectionConfig,
                     edit_fraction: float, rng_seed: int, language: str,
                     registry: LanguageRegistry) -> RecallRow:
    row = RecallRow(type=label)
    theta = cfg.theta_exact
    blocks: List[CodeBlock] = []
    planted: List[Tuple[int, int]] = []
    expected = set()

    for i, method in enumerate(methods):
        spec = MutationSpec(spec_type, edit_fraction if spec_type == 3 else 0.0, rng_seed + i)
        try:
            mutant = mutate(method, spec, language, registry)
        except MutationInapplicable:
            row.skipped += 1
            continue
        original_block = _single_block(SourceFile(f"/bench/{label}/seed_{i:03d}.java", BENCH_PROJECT,
                                                  method, language), cfg, registry)
        mutant_block = _single_block(SourceFile(f"/bench/{label}/mutant_{i:03d}.java", BENCH_PROJECT,
                                                mutant, language), cfg, registry)
        if original_block is None:
            row.skipped += 1
            continue
        row.planted += 1
        blocks.append(original_block)
        if mutant_block is None:
            continue
        blocks.append(mutant_block)
        key = tuple(sorted((original_block.block_id, mutant_block.block_id)))
        planted.append(key)
        shared = sum(min(f, mutant_block.bag.get(t)) for t, f in original_block.bag.items())
        if shared >= ceil_theta(theta, max(original_block.bag.size, mutant_block.bag.size)):
            expected.add(key)

    found = {(p.block_a.block_id, p.block_b.block_id) for p in detect_all(blocks, cfg)}
    row.detected = sum(1 for key in planted if key in found)
    row.expected = len(expected)
    row.expected_detected = sum(1 for key in expected if key in found)
    return row


@dataclass
class RecallReport:
    rows: List[RecallRow] = field(default_factory=list)

    def table(self) -> pd.DataFrame:
        return pd.DataFrame([row.to_dict() for row in self.rows])

    def row(self, label: str) -> RecallRow:
        return next(row for row in self.rows if row.type == label)


def run_recall(methods: Sequence[str], cfg: DetectionConfig, per_type: int = config.BENCH_PER_TYPE,
               edit_fraction: float = config.BENCH_EDIT_FRACTION, rng_seed: int = config.BENCH_RNG_SEED,
               language: str = "java", registry: Optional[LanguageRegistry] = None) -> RecallReport:
    """Plant one mutant per seed method and measure recall per clone type

    Type 2 is run twice: with the configured normalization, and with identifier
    and literal normalization switched on.
    """
    registry = registry or language_registry
    chosen = list(methods[:per_type])
    if len(chosen) < MIN_RECALL_SEEDS:
        logger.warning(f"Recall measured over {len(chosen)} seed methods; at least {MIN_RECALL_SEEDS} are needed "
                       "for a meaningful figure")
    normalized = cfg.model_copy(update={
        "normalization": NormalizationConfig(rename_identifiers=True, abstract_literals=True),
    })
    runs = [
        ("1", 1, cfg),
        ("2", 2, cfg),
        (TYPE_2_NORMALIZED, 2, normalized),
        ("3", 3, cfg),
    ]
    report = RecallReport()
    for label, spec_type, run_cfg in runs:
        row = _recall_for_type(label, spec_type, chosen, run_cfg, edit_fraction, rng_seed, language, registry)
        logger.info(f"Type {label}: recall {row.recall:.4f} over {row.planted} planted pairs")
        report.rows.append(row)
    return report


# -------------------------------------------------------------------- oracle

def _synthetic_block(name: str, index: int, bag: Dict[str, int], project: str) -> CodeBlock:
    size = sum(bag.values())
    path = f"/synthetic/{name}/{index:05d}.java"
    return CodeBlock(
        block_id=make_block_id(path, 1, size, 0),
        file=path,
        project_id=project,
        start_line=1,
        end_line=size,
        granularity=Granularity.METHOD,
        bag=TokenBag(bag),
    )


def random_corpus(n_blocks: int, rng: np.random.Generator, vocabulary: int = 400,
                  projects: int = 3, name: str = "random") -> List[CodeBlock]:
    """Families of related bags over a Zipf-skewed vocabulary"""
    weights = 1.0 / np.arange(1, vocabulary + 1)
    weights /= weights.sum()
    blocks: List[CodeBlock] = []
    base: Dict[str, int] = {}
    for i in range(n_blocks):
        if i % 4 == 0 or not base:
            size = int(rng.integers(10, 120))
            draws = rng.choice(vocabulary, size=size, p=weights)
            base = {}
            for token in draws:
                base[f"t{int(token)}"] = base.get(f"t{int(token)}", 0) + 1
            bag = dict(base)
        else:
            bag = dict(base)
            edits = int(rng.integers(0, max(2, sum(bag.values()) // 2)))
            for _ in range(edits):
                token = f"t{int(rng.choice(vocabulary, p=weights))}"
                if rng.random() < 0.5 and bag.get(token):
                    bag[token] -= 1
                    if not bag[token]:
                        del bag[token]
                else:
                    bag[token] = bag.get(token, 0) + 1
            if not bag:
                bag = {"t0": 1}
        blocks.append(_synthetic_block(name, i, bag, f"p{int(rng.integers(0, projects))}"))
    return blocks


def near_threshold_corpus(n_pairs: int, theta, rng: np.random.Generator) -> List[CodeBlock]:
    """Pairs of equal-size distinct-token bags sharing required - 1, required or required + 1 tokens"""
    exact = as_theta(theta)
    blocks: List[CodeBlock] = []
    fresh = 0
    for i in range(n_pairs):
        size = int(rng.integers(10, 150))
        required = ceil_theta(exact, size)
        shared = min(size, max(0, required + int(rng.integers(-1, 2))))
        common = [f"c{fresh + k}" for k in range(shared)]
        fresh += shared
        left = common + [f"u{fresh + k}" for k in range(size - shared)]
        fresh += size - shared
        right = common + [f"u{fresh + k}" for k in range(size - shared)]
        fresh += size - shared
        blocks.append(_synthetic_block("near", 2 * i, dict.fromkeys(left, 1), "p0"))
        blocks.append(_synthetic_block("near", 2 * i + 1, dict.fromkeys(right, 1), "p0"))
    return blocks


def identical_corpus(n_blocks: int, rng: np.random.Generator) -> List[CodeBlock]:
    bag = {f"t{k}": int(rng.integers(1, 4)) for k in range(int(rng.integers(5, 40)))}
    return [_synthetic_block("identical", i, dict(bag), "p0") for i in range(n_blocks)]


def _pair_keys(pairs: Sequence[ClonePair]) -> set:
    return {(p.block_a.block_id, p.block_b.block_id, p.overlap) for p in pairs}


@dataclass
class OracleRow:
    corpus: str
    blocks: int
    theta: float
    seed: int
    pairs: int
    discrepancies: int
    counterexample: Optional[str] = None


@dataclass
class OracleReport:
    rows: List[OracleRow] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(row.discrepancies == 0 for row in self.rows)

    def table(self) -> pd.DataFrame:
        return pd.DataFrame([row.__dict__ for row in self.rows])


def compare_with_oracle(corpus: str, blocks: Sequence[CodeBlock], cfg: DetectionConfig, seed: int) -> OracleRow:
    indexed = _pair_keys(detect_all(blocks, cfg))
    oracle = _pair_keys(brute_force_detect(blocks, cfg))
    diff = sorted(indexed ^ oracle)
    counterexample = None
    if diff:
        a, b, shared = diff[0]
        side = "index only" if diff[0] in indexed else "oracle only"
        counterexample = f"({a}, {b}) overlap {shared}: {side}"
    return OracleRow(corpus, len(blocks), cfg.theta, seed, len(oracle), len(diff), counterexample)


def run_oracle_suite(sizes: Sequence[int] = (200,), thetas: Sequence[float] = (0.5, 0.7, 0.8, 0.9),
                     seeds: Sequence[int] = tuple(range(20)), scope: Scope = Scope.BOTH) -> OracleReport:
    """Indexed detection against brute force on random, near-threshold and identical corpora"""
    report = OracleReport()
    for seed in seeds:
        rng = np.random.default_rng(seed)
        for size in sizes:
            corpus = random_corpus(size, rng)
            for theta in thetas:
                cfg = DetectionConfig(theta=theta, min_tokens=1, scope=scope)
                report.rows.append(compare_with_oracle("random", corpus, cfg, seed))
        for theta in thetas:
            cfg = DetectionConfig(theta=theta, min_tokens=1, scope=scope)
            adversarial = near_threshold_corpus(max(sizes) // 2, theta, rng)
            report.rows.append(compare_with_oracle("near-threshold", adversarial, cfg, seed))
    cfg = DetectionConfig(theta=0.7, min_tokens=1, scope=scope)
    report.rows.append(compare_with_oracle("identical", identical_corpus(30, np.random.default_rng(0)), cfg, 0))
    failures = sum(1 for row in report.rows if row.discrepancies)
    logger.info(f"Oracle suite: {len(report.rows)} runs, {failures} with discrepancies")
    return report


# ---------------------------------------------------------------- throughput

_STATEMENT_TEMPLATES = [
    "int {a} = {b} + {n};",
    "{a} = {b} * {n} - {c};",
    "{list}.add({a});",
    "String {s} = \"{word}\" + {a};",
    "if ({a} > {n}) {{ {b} = {a} - {c}; }}",
    "for (int i = 0; i < {n}; i++) {{ {a} += {call}(i, {b}); }}",
    "while ({a} < {b}) {{ {a}++; }}",
    "{a} = Math.max({a}, {call}({b}, {c}));",
    "System.out.println({s});",
    "{list}.remove({n});",
]

_WORDS = ["alpha", "beta", "gamma", "delta", "omega", "sigma", "kappa", "theta", "lambda", "zeta"]


def _synthetic_method(rng: np.random.Generator, index: int) -> List[str]:
    def name(prefix: str) -> str:
        return f"{prefix}{_WORDS[int(rng.integers(0, len(_WORDS)))].capitalize()}{int(rng.integers(0, 50))}"

    values = {"a": name("v"), "b": name("w"), "c": name("x"), "s": name("s"), "list": name("items"),
              "call": name("compute")}
    lines = [f"    public int {name('method')}{index}(int {values['b']}, int {values['c']}) {{",
             f"        int {values['a']} = 0;",
             f"        String {values['s']} = \"\";",
             f"        java.util.List<Integer> {values['list']} = new java.util.ArrayList<>();"]
    for _ in range(int(rng.integers(5, 9))):
        template = _STATEMENT_TEMPLATES[int(rng.integers(0, len(_STATEMENT_TEMPLATES)))]
        lines.append("        " + template.format(
            n=int(rng.integers(0, 100)), word=_WORDS[int(rng.integers(0, len(_WORDS)))], **values))
    lines.append(f"        return {values['a']};")
    lines.append("    }")
    return lines


def synthetic_java_corpus(kloc: float, rng: np.random.Generator, root: str = "/synthetic") -> List[SourceFile]:
    """Generated Java classes totalling about kloc thousand lines"""
    target = int(kloc * 1000)
    files: List[SourceFile] = []
    total = 0
    while total < target:
        k = len(files)
        lines = [f"public class Generated{k} {{"]
        for m in range(30):
            lines.extend(_synthetic_method(rng, m))
            lines.append("")
        lines.append("}")
        total += len(lines)
        files.append(SourceFile(f"{root}/p{k % 4}/Generated{k}.java", f"p{k % 4}", "\n".join(lines) + "\n", "java"))
    return files


def run_throughput(kloc: float, cfg: DetectionConfig, rng_seed: int = config.BENCH_RNG_SEED,
                   queries: int = 1000, registry: Optional[LanguageRegistry] = None) -> Dict[str, object]:
    """Index and detect a generated corpus, then time single-block queries

    The verdict holds index build time to INDEX_SECONDS_PER_100_KLOC, scaled
    linearly to the corpus size, and the 95th percentile query latency to
    QUERY_P95_LIMIT_MS.
    """
    rng = np.random.default_rng(rng_seed)
    files = synthetic_java_corpus(kloc, rng)
    lines = sum(f.content.count("\n") for f in files)

    started = time.perf_counter()
    index = CloneIndex.build(files, cfg, registry)
    index_seconds = time.perf_counter() - started

    started = time.perf_counter()
    pairs = detect_indexed(index, cfg.scope, cfg.workers)
    detect_seconds = time.perf_counter() - started

    block_ids = sorted(index.forward.blocks)
    latencies = []
    if block_ids:
        for choice in rng.integers(0, len(block_ids), size=queries):
            sb = index.forward.blocks[block_ids[int(choice)]]
            started = time.perf_counter()
            query_clones_of(sb, index, cfg.scope)
            latencies.append((time.perf_counter() - started) * 1000.0)

    index_budget = INDEX_SECONDS_PER_100_KLOC * lines / 100_000
    query_p95 = float(np.percentile(latencies, 95)) if latencies else 0.0
    index_ok = index_seconds <= index_budget
    query_ok = query_p95 <= QUERY_P95_LIMIT_MS
    if not (index_ok and query_ok):
        logger.warning(f"Throughput below target: index {index_seconds:.2f}s (budget {index_budget:.2f}s), "
                       f"query p95 {query_p95:.2f}ms (limit {QUERY_P95_LIMIT_MS:.0f}ms)")

    return {
        "lines": lines,
        "files": len(files),
        "blocks": len(block_ids),
        "pairs": len(pairs),
        "index_seconds": round(index_seconds, 3),
        "detect_seconds": round(detect_seconds, 3),
        "query_p95_ms": round(query_p95, 3),
        "query_mean_ms": round(float(np.mean(latencies)), 3) if latencies else 0.0,
        "queries": len(latencies),
        "index_budget_seconds": round(index_budget, 3),
        "query_p95_limit_ms": QUERY_P95_LIMIT_MS,
        "index_ok": index_ok,
        "query_ok": query_ok,
        "passed": index_ok and query_ok,
    }

# Shared source fixtures and corpus helpers for the clonedex tests
import tempfile
from pathlib import Path
from typing import Dict, Iterable, List

import numpy as np

from clonedex.config import Granularity
from clonedex.tokenizer import CodeBlock, TokenBag, make_block_id

# sumPositive spans lines 2-10 (55 tokens), greet lines 12-14 (14 tokens)
ALPHA_JAVA = """public class Alpha {
    public int sumPositive(int[] values) {
        int total = 0;
        for (int i = 0; i < values.length; i++) {
            if (values[i] > 0) {
                total += values[i];
            }
        }
        return total;
    }

    public String greet(String name) {
        return "Hello " + name;
    }
}
"""

SUM_POSITIVE_TOKENS = 55
GREET_TOKENS = 14

# Same method body as Alpha.sumPositive, reformatted and commented
BETA_JAVA = """public class Beta {
    // keeps only positive entries
    public int sumPositive(int[] values)
    {
        int total = 0;
        for (int i = 0; i < values.length; i++) { if (values[i] > 0) { total += values[i]; } }
        return total;
    }
}
"""

# Unrelated method
GAMMA_JAVA = """public class Gamma {
    public boolean isPalindrome(String text) {
        int left = 0;
        int right = text.length() - 1;
        while (left < right) {
            if (text.charAt(left) != text.charAt(right)) {
                return false;
            }
            left++;
            right--;
        }
        return true;
    }
}
"""

NESTED_C = """int clamp_all(int *xs, int n, int lo, int hi) {
    int changed = 0;
    for (int i = 0; i < n; i++) {
        if (xs[i] < lo) {
            xs[i] = lo;
            changed++;
        } else {
            if (xs[i] > hi) {
                xs[i] = hi;
                changed++;
            }
        }
    }
    return changed;
}
"""


class TempTreeMixin:
    """Creates a throwaway directory per test"""

    def make_tree(self, files: Dict[str, str]) -> Path:
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        root = Path(tmp.name).resolve()
        for relative, content in files.items():
            path = root / relative
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(content, encoding="utf-8")
        return root


def bag_block(name: str, bag: Dict[str, int], project: str = "p0") -> CodeBlock:
    """A synthetic block with the given bag"""
    path = f"/fixtures/{name}.java"
    size = sum(bag.values())
    return CodeBlock(
        block_id=make_block_id(path, 1, size),
        file=path,
        project_id=project,
        start_line=1,
        end_line=size,
        granularity=Granularity.METHOD,
        bag=TokenBag(dict(bag)),
    )


def distinct_block(name: str, tokens: Iterable[str], project: str = "p0") -> CodeBlock:
    return bag_block(name, dict.fromkeys(tokens, 1), project)


def pair_ids(pairs) -> List[tuple]:
    return [(p.block_a.block_id, p.block_b.block_id) for p in pairs]


def seeded(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)

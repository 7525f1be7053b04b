"""Fuzzy text matching and the object taxonomy.

Similarity blends an edit-distance ratio with a token-set Jaccard ratio so
that both near-misses ("yolo-x" vs "yolox") and reordered phrases ("faster
rcnn" vs "rcnn faster") score high. The taxonomy expands request terms to
synonyms and is_a descendants for data coverage checks.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from .errors import TaxonomyError

# Keys are matched when similarity reaches this value, unless a caller
# overrides it. 0.8 tolerates small typos but keeps distinct names apart.
DEFAULT_SIMILARITY_THRESHOLD = 0.8

_TOKEN_RE = re.compile(r"[^\W\d_]+|\d+", re.UNICODE)


def normalize_text(s: str) -> tuple[str, ...]:
    """Lowercase and split into alphanumeric tokens.

    Letter/digit boundaries split, so "ResNet-50" and "resnet50" normalize
    to the same token sequence ("resnet", "50").
    """
    return tuple(_TOKEN_RE.findall(s.lower()))


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance with unit costs."""
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def similarity(a: str, b: str) -> float:
    """Score two strings in [0, 1]; two empty strings score 1.0.

    The score is the larger of a character-level ratio
    1 - dist/max(len) over the joined normalized tokens and the Jaccard
    ratio of the token sets.
    """
    ta, tb = normalize_text(a), normalize_text(b)
    if not ta and not tb:
        return 1.0
    if not ta or not tb:
        return 0.0
    ja, jb = "".join(ta), "".join(tb)
    char_ratio = 1.0 - edit_distance(ja, jb) / max(len(ja), len(jb))
    sa, sb = set(ta), set(tb)
    token_ratio = len(sa & sb) / len(sa | sb)
    return max(char_ratio, token_ratio)


@dataclass(frozen=True)
class Taxonomy:
    """Term graph: is_a edges child -> parent plus symmetric synonym pairs."""

    parents: dict[str, frozenset[str]]
    synonyms: dict[str, frozenset[str]]
    children: dict[str, frozenset[str]]

    @property
    def terms(self) -> frozenset[str]:
        return frozenset(self.parents) | frozenset(self.synonyms) | frozenset(
            self.children
        )


def _fold_term(term: str) -> str:
    return " ".join(term.lower().split())


def load_taxonomy(path: str | Path) -> Taxonomy:
    """Load a tab-separated taxonomy file.

    Each non-comment line is `child<TAB>is_a<TAB>parent` or
    `term<TAB>syn<TAB>term`. Lines starting with # are comments. A cyclic
    is_a graph is rejected.
    """
    parents: dict[str, set[str]] = {}
    children: dict[str, set[str]] = {}
    synonyms: dict[str, set[str]] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise TaxonomyError(f"{path}:{lineno}: expected 3 tab-separated fields")
        left, rel, right = (_fold_term(f) for f in fields)
        if not left or not right:
            raise TaxonomyError(f"{path}:{lineno}: empty term")
        if rel == "is_a":
            parents.setdefault(left, set()).add(right)
            children.setdefault(right, set()).add(left)
        elif rel == "syn":
            if left != right:
                synonyms.setdefault(left, set()).add(right)
                synonyms.setdefault(right, set()).add(left)
        else:
            raise TaxonomyError(f"{path}:{lineno}: unknown relation {rel!r}")

    _reject_cycles(parents, path)
    return Taxonomy(
        parents={k: frozenset(v) for k, v in parents.items()},
        synonyms={k: frozenset(v) for k, v in synonyms.items()},
        children={k: frozenset(v) for k, v in children.items()},
    )


def _reject_cycles(parents: dict[str, set[str]], path: str | Path) -> None:
    state: dict[str, int] = {}  # 1 = on stack, 2 = done

    for root in parents:
        if state.get(root):
            continue
        stack: list[tuple[str, Iterator[str]]] = [(root, iter(parents.get(root, ())))]
        state[root] = 1
        while stack:
            node, edges = stack[-1]
            advanced = False
            for nxt in edges:
                mark = state.get(nxt, 0)
                if mark == 1:
                    raise TaxonomyError(f"{path}: cyclic is_a chain through {nxt!r}")
                if mark == 0:
                    state[nxt] = 1
                    stack.append((nxt, iter(parents.get(nxt, ()))))
                    advanced = True
                    break
            if not advanced:
                state[node] = 2
                stack.pop()


def expand_objects(term: str, taxonomy: Taxonomy) -> frozenset[str]:
    """Expand a term to itself, its synonyms, and all is_a descendants."""
    folded = _fold_term(term)
    out = {folded}
    out.update(taxonomy.synonyms.get(folded, ()))
    queue = list(taxonomy.children.get(folded, ()))
    while queue:
        node = queue.pop()
        if node in out:
            continue
        out.add(node)
        queue.extend(taxonomy.children.get(node, ()))
    return frozenset(out)

"""Top-k sequential pattern mining over tokenized banner bodies.

The miner grows patterns depth-first through projected databases (each
sequence remembers where the earliest match of the current prefix ends),
explores the most frequent candidates first and raises the minimum support
to that of the current k-th best pattern as soon as k patterns are known.
Support counts sequences, not occurrences.
"""

from __future__ import annotations

import bisect
import heapq
import re
from array import array
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from fwscope import kernels
from fwscope.errors import ValidationError
from fwscope.rules import ExtractionRule, make_rule

DEFAULT_K = 100
DEFAULT_MIN_LENGTH = 1
DEFAULT_MAX_LENGTH = 5

TokenSequence = list[str]

_TOKEN = re.compile(
    r"""
      </[^\s<>]*>                                # closing tag, kept whole
    | <[!?]?[^\s<>/]+                            # tag opener without its '>'
    | [^\s<>=]+=(?:"[^"]*"|'[^']*'|[^\s<>"']*)   # attribute assignment
    | /?>                                        # tag end
    | [^\s<>]+                                   # text run
    | [<>]                                       # stray bracket
    """,
    re.VERBOSE,
)


def tokenize(body: str) -> TokenSequence:
    """Lowercased tokens split on whitespace and HTML tag boundaries.

    Attribute assignments such as ``class="fw-version"`` stay single tokens,
    even when the quoted value contains spaces.
    """
    return _TOKEN.findall(body.lower())


@dataclass(frozen=True)
class SequentialPattern:
    tokens: tuple[str, ...]
    support: int

    def to_json(self) -> dict:
        return {"tokens": list(self.tokens), "support": self.support}


def pattern_order_key(p: SequentialPattern) -> tuple:
    """Support descending, then shorter first, then tokens lexicographically."""
    return (-p.support, len(p.tokens), p.tokens)


def _encode(corpus: Sequence[Sequence[str]]) -> tuple[list[str], array, array]:
    # ids follow the sorted vocabulary, so id tuples order like token tuples
    vocab = sorted({tok for seq in corpus for tok in seq})
    index = {tok: i for i, tok in enumerate(vocab)}
    flat = array("i")
    offsets = array("i", [0])
    for seq in corpus:
        flat.extend(index[tok] for tok in seq)
        offsets.append(len(flat))
    return vocab, flat, offsets


def mine_top_k(
    corpus: Sequence[Sequence[str]],
    k: int = DEFAULT_K,
    max_length: int = DEFAULT_MAX_LENGTH,
    min_length: int = DEFAULT_MIN_LENGTH,
    backend: Optional[str] = None,
) -> list[SequentialPattern]:
    """The ``k`` best patterns of ``min_length..max_length`` tokens.

    Ties at the cut-off are resolved by ``pattern_order_key``, so the result
    is fully determined by the corpus.
    """
    if k < 1:
        raise ValidationError("k must be >= 1")
    if not 1 <= min_length <= max_length:
        raise ValidationError("need 1 <= min_length <= max_length")
    impl = kernels if backend is None else kernels.load(backend)

    vocab, flat, offsets = _encode(corpus)
    n_items = len(vocab)
    if n_items == 0:
        return []
    n_seqs = len(offsets) - 1
    root_seq = array("i", range(n_seqs))
    root_pos = array("i", (offsets[s] - 1 for s in range(n_seqs)))

    best: list[tuple] = []  # sorted order keys of the current top-k

    def worst() -> Optional[tuple]:
        return best[-1] if len(best) == k else None

    def hopeless(support: int, length: int, ids: tuple) -> bool:
        # nothing in this subtree can order before (-support, length', ids)
        cut = worst()
        if cut is None:
            return False
        return (-support, max(length, min_length), ids) > cut

    heap: list[tuple] = []
    counts = impl.count_extensions(flat, offsets, root_seq, root_pos, n_items)
    for item in range(n_items):
        if counts[item]:
            heap.append((-counts[item], 1, (item,), root_seq, root_pos))
    heapq.heapify(heap)

    while heap:
        neg_support, length, ids, parent_seq, parent_pos = heapq.heappop(heap)
        support = -neg_support
        cut = worst()
        if cut is not None and support < -cut[0]:
            break
        if hopeless(support, length, ids):
            continue
        if length >= min_length:
            key = (neg_support, length, ids)
            bisect.insort(best, key)
            if len(best) > k:
                best.pop()
        if length == max_length:
            continue
        proj_seq, proj_pos = impl.project(flat, offsets, parent_seq, parent_pos, ids[-1])
        counts = impl.count_extensions(flat, offsets, proj_seq, proj_pos, n_items)
        for item in range(n_items):
            c = counts[item]
            if c and not hopeless(c, length + 1, ids + (item,)):
                heapq.heappush(heap, (-c, length + 1, ids + (item,), proj_seq, proj_pos))

    return [SequentialPattern(tuple(vocab[i] for i in ids), -neg) for neg, _, ids in best]


def support_of(pattern: Sequence[str], corpus: Iterable[Sequence[str]]) -> int:
    """Number of sequences containing ``pattern`` as an ordered subsequence."""

    def contains(seq: Sequence[str]) -> bool:
        it = iter(seq)
        return all(tok in it for tok in pattern)

    return sum(1 for seq in corpus if contains(seq))


_VERSION_LIKE = re.compile(r"v?\d+(?:[._-]\d+)+[\w.-]*")
_ATTRIBUTE_LIKE = re.compile(r"""[a-z_:][\w:.-]*=(?:"[^"]*"|'[^']*'|[^\s"'<>]+)""")


def is_candidate_token(token: str) -> bool:
    return bool(_VERSION_LIKE.fullmatch(token) or _ATTRIBUTE_LIKE.fullmatch(token))


def patterns_to_rule_stubs(
    patterns: Iterable[SequentialPattern], priority: int = 1000
) -> list[ExtractionRule]:
    """Draft rules for patterns holding a version- or attribute-shaped token.

    Each draft matches the pattern's tokens literally, in order, with any
    text in between. Captures are left empty for a human to fill in.
    """
    drafts = []
    for pattern in patterns:
        if not any(is_candidate_token(t) for t in pattern.tokens):
            continue
        regex = r"[\s\S]*?".join(re.escape(t) for t in pattern.tokens)
        drafts.append(make_rule(f"draft-{len(drafts) + 1:03d}", regex, {}, "body", priority))
    return drafts

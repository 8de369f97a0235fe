"""Content-word segmentation and near-duplicate comment counting."""

from __future__ import annotations

import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import UserProfile

# small English list; real deployments load one with load_word_list()
DEFAULT_STOP_WORDS = frozenset("""
a an the and or but if then else of to in on at by for with from as is are was were be been
being am do does did have has had it its this that these those i you he she we they me him her
us them my your his our their not no so very just too than there here what which who whom
""".split())


def _is_separator(ch: str) -> bool:
    if ch.isspace():
        return True
    cat = unicodedata.category(ch)
    return cat[0] in "PSZ" or cat in ("Cc", "Cf")


@dataclass(frozen=True)
class Segmenter:
    """Splits text into content words.

    ``mode="whitespace"`` splits on whitespace and punctuation. In
    ``mode="dictionary"`` each run of non-separator characters is cut by
    greedy longest match against ``dictionary``; characters not covered by any
    entry become single-character tokens.
    """

    mode: str = "whitespace"
    dictionary: frozenset[str] | None = None
    stop_words: frozenset[str] = field(default=DEFAULT_STOP_WORDS)

    def __post_init__(self):
        if self.mode in ("dictionary-maximal-match", "maxmatch"):
            object.__setattr__(self, "mode", "dictionary")
        if self.mode not in ("whitespace", "dictionary"):
            raise ValueError(f"unknown segmentation mode {self.mode!r}")
        if (self.mode == "dictionary") != (self.dictionary is not None):
            raise ValueError("a dictionary is required for, and only for, dictionary mode")
        if self.dictionary is not None:
            object.__setattr__(self, "dictionary", frozenset(w.casefold() for w in self.dictionary))
        object.__setattr__(self, "stop_words", frozenset(w.casefold() for w in self.stop_words))

    @property
    def max_word_len(self) -> int:
        return max((len(w) for w in self.dictionary or ()), default=1)

    def __call__(self, text: str) -> list[str]:
        return segment(text, self)


@dataclass(frozen=True)
class SimilarityConfig:
    ratio_threshold: float = 0.8
    pair_flag_threshold: int = 3

    def __post_init__(self):
        if not 0 < self.ratio_threshold <= 1:
            raise ValueError("ratio_threshold must lie in (0, 1]")
        if self.pair_flag_threshold < 1:
            raise ValueError("pair_flag_threshold must be positive")


def _runs(text: str) -> list[str]:
    runs, cur = [], []
    for ch in text:
        if _is_separator(ch):
            if cur:
                runs.append("".join(cur))
                cur = []
        else:
            cur.append(ch)
    if cur:
        runs.append("".join(cur))
    return runs


def _max_match(run: str, dictionary: frozenset[str], longest: int) -> list[str]:
    out, i = [], 0
    while i < len(run):
        for size in range(min(longest, len(run) - i), 0, -1):
            piece = run[i:i + size]
            if size == 1 or piece in dictionary:
                out.append(piece)
                i += size
                break
    return out


def segment(text: str, seg: Segmenter | None = None) -> list[str]:
    seg = seg or Segmenter()
    runs = _runs(unicodedata.normalize("NFKC", text).casefold())
    if seg.mode == "dictionary":
        longest = seg.max_word_len
        tokens = [t for run in runs for t in _max_match(run, seg.dictionary, longest)]
    else:
        tokens = runs
    return [t for t in tokens if t not in seg.stop_words]


def pair_similarity(a: Sequence[str], b: Sequence[str]) -> float:
    """Common-word count (multiset) over the length of the shorter list."""
    if not a or not b:
        return 0.0
    common = sum((Counter(a) & Counter(b)).values())
    return common / min(len(a), len(b))


def is_similar(a: Sequence[str], b: Sequence[str], cfg: SimilarityConfig | None = None) -> bool:
    cfg = cfg or SimilarityConfig()
    return pair_similarity(a, b) >= cfg.ratio_threshold


def count_similar_pairs(
    profile: UserProfile | Iterable[str],
    seg: Segmenter | None = None,
    cfg: SimilarityConfig | None = None,
) -> int:
    """Number of unordered comment pairs of one user that are similar.

    Accepts a profile or a plain iterable of comment texts. Each comment is
    segmented and counted once up front; every pair is then examined, with no
    transitive shortcuts.
    """
    cfg = cfg or SimilarityConfig()
    texts = [c.content for c in profile.comments] if isinstance(profile, UserProfile) else list(profile)
    bags = [Counter(segment(t, seg)) for t in texts]
    sizes = [sum(b.values()) for b in bags]
    thr = cfg.ratio_threshold
    total = 0
    for i in range(len(bags)):
        if not sizes[i]:
            continue
        bi, si = bags[i], sizes[i]
        for j in range(i + 1, len(bags)):
            sj = sizes[j]
            if not sj:
                continue
            shorter = si if si <= sj else sj
            bj = bags[j]
            small, big = (bi, bj) if len(bi) <= len(bj) else (bj, bi)
            common = 0
            for w, k in small.items():
                other = big.get(w)
                if other:
                    common += k if k < other else other
            if common / shorter >= thr:
                total += 1
    return total


def semantic_flag(similar_pairs: int, cfg: SimilarityConfig | None = None) -> bool:
    cfg = cfg or SimilarityConfig()
    return similar_pairs >= cfg.pair_flag_threshold


def load_word_list(path: str | Path) -> frozenset[str]:
    """One token per line, UTF-8; ``#`` starts a comment."""
    words = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        word = line.split("#", 1)[0].strip()
        if word:
            words.add(word.casefold())
    return frozenset(words)

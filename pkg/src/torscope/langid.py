"""Character n-gram language identification (rank-order profiles)."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from torscope.corpus import UNKNOWN_LANGUAGE

MIN_N = 1
MAX_N = 5
PROFILE_SIZE = 400
MIN_WORDS = 25

_WORD_RE = re.compile(r"[^\W\d_]+")


class ProfileError(ValueError):
    pass


@dataclass(frozen=True)
class LanguageProfile:
    label: str
    ngram_ranks: Mapping[str, int]

    def __post_init__(self):
        ranks = sorted(self.ngram_ranks.values())
        if ranks != list(range(len(ranks))):
            raise ProfileError(f"{self.label}: ranks must be consecutive from 0")

    def __len__(self) -> int:
        return len(self.ngram_ranks)


def ngram_counts(text: str, min_n: int = MIN_N, max_n: int = MAX_N) -> Counter:
    counts: Counter = Counter()
    for word in _WORD_RE.findall(text.lower()):
        padded = f"_{word}_"
        for n in range(min_n, max_n + 1):
            for i in range(len(padded) - n + 1):
                gram = padded[i : i + n]
                if gram != "_":
                    counts[gram] += 1
    return counts


def ranked_ngrams(text: str, size: int = PROFILE_SIZE) -> list[str]:
    counts = ngram_counts(text)
    # frequency descending, then lexicographic for a stable order
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [g for g, _ in ordered[:size]]


def build_profile(label: str, text: str, size: int = PROFILE_SIZE) -> LanguageProfile:
    grams = ranked_ngrams(text, size)
    return LanguageProfile(label, {g: r for r, g in enumerate(grams)})


def out_of_place(doc_grams: list[str], profile: LanguageProfile) -> int:
    missing = len(profile)
    ranks = profile.ngram_ranks
    return sum(abs(ranks[g] - r) if g in ranks else missing for r, g in enumerate(doc_grams))


def identify_language(
    text: str,
    profiles: Iterable[LanguageProfile],
    min_words: int = MIN_WORDS,
) -> str:
    """Label of the profile closest to ``text`` by out-of-place distance.

    Texts with fewer than ``min_words`` words are ``"unknown"``. Ties go to
    the lexicographically smaller label.
    """
    profiles = list(profiles)
    if not profiles:
        raise ProfileError("no language profiles configured")
    if not text.strip() or len(text.split()) < min_words:
        return UNKNOWN_LANGUAGE
    size = max(len(p) for p in profiles)
    grams = ranked_ngrams(text, size)
    if not grams:
        return UNKNOWN_LANGUAGE
    scored = sorted((out_of_place(grams, p), p.label) for p in profiles)
    return scored[0][1]


def write_profile(profile: LanguageProfile, path: str | Path) -> None:
    items = sorted(profile.ngram_ranks.items(), key=lambda kv: kv[1])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for gram, rank in items:
            fh.write(f"{gram}\t{rank}\n")


def read_profile(path: str | Path, label: str | None = None) -> LanguageProfile:
    path = Path(path)
    ranks = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                gram, rank = line.split("\t")
                ranks[gram] = int(rank)
            except ValueError as exc:
                raise ProfileError(f"{path}:{lineno}: expected 'ngram<TAB>rank'") from exc
    bad = [g for g in ranks if not MIN_N <= len(g) <= MAX_N]
    if bad:
        raise ProfileError(f"{path}: n-gram length out of bounds: {bad[0]!r}")
    return LanguageProfile(label or path.stem, ranks)


def load_profiles(directory: str | Path) -> list[LanguageProfile]:
    paths = sorted(Path(directory).glob("*.txt"))
    if not paths:
        raise ProfileError(f"no profiles in {directory}")
    return [read_profile(p) for p in paths]


@lru_cache(maxsize=1)
def default_profiles() -> tuple[LanguageProfile, ...]:
    """Profiles bundled with the package (en, de, es, fr)."""
    root = resources.files("torscope") / "data" / "profiles"
    out = []
    for entry in sorted(root.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".txt"):
            with resources.as_file(entry) as p:
                out.append(read_profile(p))
    return tuple(out)

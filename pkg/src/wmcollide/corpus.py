"""Deterministic synthetic corpus for demos and tests.

The generator writes pseudo-natural text with the statistics the lab
needs from a real corpus: a Zipfian vocabulary of a few thousand word
types, collocation chains with a small real branching factor (so model
conditionals are peaked but not deterministic, leaving strong logit
shifts something to flip), and high-entropy sentence starts (where weak
shifts can embed).

Construction: every word gets a successor pool of 2-3 words with skewed
transition weights; sentences are fresh walks of this chain; paragraphs
are sentence sequences on one line.  A slice of sentence starts is
drawn uniformly over the whole vocabulary so that every word type stays
reachable.  Everything derives from one integer seed.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

_ONSETS = [
    "b", "br", "c", "cl", "d", "dr", "f", "fl", "g", "gr", "h", "j", "k",
    "kr", "l", "m", "n", "p", "pl", "pr", "r", "s", "sk", "sl", "sm", "st",
    "t", "tr", "v", "w", "z",
]
_VOWELS = ["a", "e", "i", "o", "u", "au", "ei", "ou"]
_CODAS = ["", "", "l", "m", "n", "r", "s", "t", "nd", "rk", "st"]

# transition weights inside a successor pool, by pool size
_BRANCH_WEIGHTS = {1: (1.0,), 2: (0.8, 0.2), 3: (0.7, 0.2, 0.1)}


def _word_list(n_types: int, rng: np.random.Generator) -> list[str]:
    """n_types distinct pronounceable two-syllable pseudowords."""
    syllables = sorted({o + v + c for o in _ONSETS for v in _VOWELS for c in _CODAS})
    rng.shuffle(syllables)
    n = len(syllables)
    words: list[str] = []
    seen = set()
    # diagonal traversal of the syllable product keeps early words varied
    for s in range(2 * n - 1):
        for i in range(max(0, s - n + 1), min(s + 1, n)):
            w = syllables[i] + syllables[s - i]
            if w not in seen:
                seen.add(w)
                words.append(w)
            if len(words) >= n_types:
                rng.shuffle(words)
                return words
    raise ValueError(f"could only build {len(words)} of {n_types} word types")


def _zipf_weights(n: int, exponent: float) -> np.ndarray:
    w = 1.0 / np.power(np.arange(1, n + 1, dtype=float), exponent)
    return w / w.sum()


def synthesize_corpus(
    path: str | Path,
    *,
    seed: int = 7,
    n_word_types: int = 5600,
    n_starters: int = 400,
    sentences_per_paragraph: int = 40,
    n_paragraphs: int = 500,
    min_sentence_len: int = 7,
    max_sentence_len: int = 14,
    zipf_word: float = 1.05,
    three_way_cut: float = 0.35,
    two_way_cut: float = 0.78,
    uniform_start_frac: float = 0.25,
) -> Path:
    """Write a corpus file and return its path.

    Words above the three_way_cut rank fraction branch three ways, words
    between the cuts branch two ways, and tail words have a single
    deterministic successor (rare collocations admit no variation).
    """
    rng = np.random.default_rng(seed)
    words = _word_list(n_word_types, rng)
    word_p = _zipf_weights(n_word_types, zipf_word)

    # successor pools: every word appears in at least one pool (first slot
    # comes from a global permutation), extra slots favor frequent words
    first_slot = rng.permutation(n_word_types)
    successors: list[np.ndarray] = []
    for i in range(n_word_types):
        if i < three_way_cut * n_word_types:
            k = 3
        elif i < two_way_cut * n_word_types:
            k = 2
        else:
            k = 1
        pool = [first_slot[i]]
        while len(pool) < k:
            cand = int(rng.choice(n_word_types, p=word_p))
            if cand not in pool:
                pool.append(cand)
        successors.append(np.array(pool))

    starters = rng.choice(n_word_types, size=n_starters, replace=False, p=word_p)
    starter_p = _zipf_weights(n_starters, 1.0)

    def walk() -> str:
        length = int(rng.integers(min_sentence_len, max_sentence_len + 1))
        if rng.random() < uniform_start_frac:
            w = int(rng.integers(n_word_types))
        else:
            w = int(starters[rng.choice(n_starters, p=starter_p)])
        sent = [w]
        for _ in range(length - 1):
            pool = successors[w]
            w = int(pool[rng.choice(len(pool), p=_BRANCH_WEIGHTS[len(pool)])])
            sent.append(w)
        return " ".join(words[i] for i in sent) + " ."

    out = Path(path)
    with open(out, "w", encoding="utf-8") as fh:
        for _ in range(n_paragraphs):
            fh.write(" ".join(walk() for _ in range(sentences_per_paragraph)) + "\n")
    return out

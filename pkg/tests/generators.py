"""Synthetic corpus generators shared by module and acceptance tests."""

from __future__ import annotations

import numpy as np

from aeckit.aligner import alignment_prior
from aeckit.textcore import ParallelPair, SyllableSequence


def synthetic_alignment_corpus(
    seed: int,
    n_pairs: int = 500,
    n_types: int = 15,
    peak: float = 0.92,
    p0: float = 0.02,
    tension: float = 8.0,
):
    """Sample pairs from a known alignment model.

    Each source type prefers one target type with probability ``peak``;
    alignments are drawn from the diagonal prior. Returns (pairs,
    gold_link_sets) where gold links omit null-aligned target positions.
    """
    rng = np.random.default_rng(seed)
    source_types = ["s%d" % k for k in range(n_types)]
    target_types = ["t%d" % k for k in range(n_types)]
    off = (1.0 - peak) / (n_types - 1)
    emit = {
        s: np.array([peak if kk == k else off for kk in range(n_types)])
        for k, s in enumerate(source_types)
    }
    null_emit = np.full(n_types, 1.0 / n_types)
    pairs = []
    gold = []
    for idx in range(n_pairs):
        m = int(rng.integers(3, 9))
        n = max(1, m + int(rng.integers(-1, 2)))
        src = [source_types[int(rng.integers(0, n_types))] for _ in range(m)]
        tgt = []
        links = set()
        for j in range(1, n + 1):
            prior = alignment_prior(j, m, n, tension, p0)
            a = int(rng.choice(m + 1, p=prior))
            probs = null_emit if a == 0 else emit[src[a - 1]]
            tgt.append(target_types[int(rng.choice(n_types, p=probs))])
            if a > 0:
                links.add((a - 1, j - 1))
        pairs.append(
            ParallelPair(
                SyllableSequence(tuple(src)),
                SyllableSequence(tuple(tgt)),
                "line-%d" % (idx + 1),
            )
        )
        gold.append(links)
    return pairs, gold


def random_parallel_corpus(rng, n_pairs=20, vocab=8, max_len=6):
    """Unstructured random pairs for invariant checks."""
    pairs = []
    for idx in range(n_pairs):
        m = int(rng.integers(1, max_len + 1))
        n = int(rng.integers(1, max_len + 1))
        src = tuple("a%d" % int(rng.integers(0, vocab)) for _ in range(m))
        tgt = tuple("b%d" % int(rng.integers(0, vocab)) for _ in range(n))
        pairs.append(
            ParallelPair(
                SyllableSequence(src), SyllableSequence(tgt), "line-%d" % (idx + 1)
            )
        )
    return pairs

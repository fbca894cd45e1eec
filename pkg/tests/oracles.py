"""Independent reference implementations used to cross-check the package.

Everything here is written from the textbook definition, deliberately not
sharing code or style with the package modules. Slow is fine; correct is the
point.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache


# ---------------------------------------------------------------------------
# Edit distance: the plain recursive definition with memoization.

def recursive_edit_distance(ref: tuple, hyp: tuple) -> int:
    @lru_cache(maxsize=None)
    def d(i: int, j: int) -> int:
        if i == 0:
            return j
        if j == 0:
            return i
        return min(
            d(i - 1, j - 1) + (ref[i - 1] != hyp[j - 1]),
            d(i - 1, j) + 1,
            d(i, j - 1) + 1,
        )

    return d(len(ref), len(hyp))


def enumerate_sequences(alphabet: tuple, max_len: int) -> list:
    """Every tuple over ``alphabet`` of length 0..max_len, ordered by length
    then lexicographically."""
    out = [()]
    for length in range(1, max_len + 1):
        out.extend(itertools.product(alphabet, repeat=length))
    return out


def edit_distance_table(alphabet: tuple, max_len: int):
    """Edit distance for every sequence pair, as a dense table.

    Evaluates the textbook recursion d(i, j) = min(d(i-1, j-1) + [a_i != b_j],
    d(i-1, j) + 1, d(i, j-1) + 1) for every pair at once, one (i, j) cell per
    step vectorized over all sequence pairs of a given length combination.
    Returns (sequences, rows) where rows[ia][ib] is the distance between
    sequences[ia] and sequences[ib], with the same ordering as
    ``enumerate_sequences``.
    """
    import numpy as np

    seqs = enumerate_sequences(alphabet, max_len)
    sym_id = {s: k for k, s in enumerate(alphabet)}
    by_len = {}
    offsets = {}
    for idx, t in enumerate(seqs):
        by_len.setdefault(len(t), []).append(t)
        if len(t) not in offsets:
            offsets[len(t)] = idx
    arrs = {
        l: np.array([[sym_id[s] for s in t] for t in group], dtype=np.int8).reshape(
            len(group), l
        )
        for l, group in by_len.items()
    }
    n_total = len(seqs)
    dense = np.zeros((n_total, n_total), dtype=np.int16)
    for la, group_a in by_len.items():
        A = arrs[la]
        na = len(group_a)
        for lb, group_b in by_len.items():
            B = arrs[lb]
            nb = len(group_b)
            prev = [np.full((na, nb), j, dtype=np.int16) for j in range(lb + 1)]
            for i in range(1, la + 1):
                cur = [np.full((na, nb), i, dtype=np.int16)]
                a_col = A[:, i - 1][:, None]
                for j in range(1, lb + 1):
                    cell = prev[j - 1] + (a_col != B[:, j - 1][None, :])
                    np.minimum(cell, prev[j] + 1, out=cell)
                    np.minimum(cell, cur[j - 1] + 1, out=cell)
                    cur.append(cell)
                prev = cur
            dense[
                offsets[la] : offsets[la] + na, offsets[lb] : offsets[lb] + nb
            ] = prev[lb]
    return seqs, dense.tolist()


# ---------------------------------------------------------------------------
# chrF++: brute-force n-gram counting straight from the definition.

def _gram_dict(items, n):
    grams = {}
    for start in range(0, len(items) - n + 1):
        g = tuple(items[start : start + n])
        grams[g] = grams.get(g, 0) + 1
    return grams


def chrf_pp_reference(ref: str, hyp: str, char_n=6, word_n=2, beta=2.0) -> float:
    """chrF++ by direct enumeration of every n-gram of every order."""
    ref_chars = "".join(ref.split())
    hyp_chars = "".join(hyp.split())
    ref_words = ref.split()
    hyp_words = hyp.split()
    per_order = []
    jobs = [(ref_chars, hyp_chars, n) for n in range(1, char_n + 1)]
    jobs += [(ref_words, hyp_words, n) for n in range(1, word_n + 1)]
    for ref_items, hyp_items, n in jobs:
        rg = _gram_dict(ref_items, n)
        hg = _gram_dict(hyp_items, n)
        overlap = 0
        for g in hg:
            if g in rg:
                overlap += min(hg[g], rg[g])
        per_order.append((overlap, sum(hg.values()), sum(rg.values())))
    fs = []
    for overlap, hyp_total, ref_total in per_order:
        if hyp_total == 0 and ref_total == 0:
            continue
        if overlap == 0:
            fs.append(0.0)
            continue
        p = overlap / hyp_total
        r = overlap / ref_total
        fs.append((1 + beta**2) * p * r / (beta**2 * p + r))
    if not fs:
        return 1.0
    return sum(fs) / len(fs)


def chrf_pp_corpus_reference(pairs, char_n=6, word_n=2, beta=2.0) -> float:
    """Corpus chrF++: per-order counts summed over pairs before the F-score."""
    order_jobs = [("char", n) for n in range(1, char_n + 1)]
    order_jobs += [("word", n) for n in range(1, word_n + 1)]
    totals = {job: [0, 0, 0] for job in order_jobs}
    for ref, hyp in pairs:
        for kind, n in order_jobs:
            if kind == "char":
                ref_items = "".join(ref.split())
                hyp_items = "".join(hyp.split())
            else:
                ref_items = ref.split()
                hyp_items = hyp.split()
            rg = _gram_dict(ref_items, n)
            hg = _gram_dict(hyp_items, n)
            overlap = sum(min(c, rg[g]) for g, c in hg.items() if g in rg)
            acc = totals[(kind, n)]
            acc[0] += overlap
            acc[1] += sum(hg.values())
            acc[2] += sum(rg.values())
    fs = []
    for job in order_jobs:
        overlap, hyp_total, ref_total = totals[job]
        if hyp_total == 0 and ref_total == 0:
            continue
        if overlap == 0:
            fs.append(0.0)
            continue
        p = overlap / hyp_total
        r = overlap / ref_total
        fs.append((1 + beta**2) * p * r / (beta**2 * p + r))
    if not fs:
        return 1.0
    return sum(fs) / len(fs)


# ---------------------------------------------------------------------------
# Linear-chain CRF: exhaustive path enumeration.

def crf_brute_force(emissions, transitions, labels_count, gold=None):
    """Log partition function and, optionally, gold-path score by enumeration.

    emissions: list over positions of per-label scores (len T, each length L).
    transitions: L x L nested lists, transitions[prev][cur].
    Returns (log_Z, path_scores) where path_scores maps each full label tuple
    to its unnormalized score.
    """
    T = len(emissions)
    path_scores = {}
    for path in itertools.product(range(labels_count), repeat=T):
        score = 0.0
        for t, y in enumerate(path):
            score += emissions[t][y]
            if t > 0:
                score += transitions[path[t - 1]][y]
        path_scores[path] = score
    mx = max(path_scores.values())
    log_z = mx + math.log(
        sum(math.exp(s - mx) for s in path_scores.values())
    )
    return log_z, path_scores


# ---------------------------------------------------------------------------
# Alignment prior: direct softmax arithmetic.

def alignment_prior_reference(j, m, n, lam, p0):
    hs = [-abs((i + 1) / m - j / n) for i in range(m)]
    mx = max(hs)
    ws = [math.exp(lam * (h - mx)) for h in hs]
    z = sum(ws)
    return [p0] + [(1 - p0) * w / z for w in ws]

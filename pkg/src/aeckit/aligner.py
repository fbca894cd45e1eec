"""Word alignment by a diagonal-biased reparameterization of IBM Model 2.

Each target position j picks a source position i (or null) with prior

    prior(0)  = p0
    prior(i)  = (1 - p0) * softmax_i(tension * h(i, j, m, n)),
    h(i,j,m,n) = -| i/m - j/n |

and emits the target token with probability ttable(target | source). EM
alternates posterior computation with per-source-type count normalization;
the diagonal tension is refit after each sweep by gradient steps on the
expected-complete-data objective with posteriors held fixed. The ttable is
sparse over observed co-occurrences; unobserved pairs have probability zero.

Conditioning direction: ttable rows are indexed by source type, so for every
source type s the row Sigma_t ttable[s, t] sums to 1 after each M-step (the
null row included). Viterbi decoding links each target position to its
best-scoring source position, dropping positions whose argmax is null.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyCorpus, FormatError, IoFailure
from .textcore import ParallelPair

NULL_SOURCE = ""

SYMMETRIZE_HEURISTICS = ("intersection", "union", "grow-diag-final-and")


def diagonal_feature(i: int, j: int, m: int, n: int) -> float:
    """-|i/m - j/n| for 1-based positions; 0 on the diagonal, at worst -1."""
    if not (1 <= i <= m and 1 <= j <= n):
        raise ValueError("position (%d, %d) outside (%d, %d)" % (i, j, m, n))
    return -abs(i / m - j / n)


def alignment_prior(
    j: int, m: int, n: int, tension: float, p0: float
) -> np.ndarray:
    """Length m+1 probability vector over {null, 1..m}; entry 0 is exactly p0."""
    if tension < 0:
        raise ValueError("tension must be non-negative")
    if not 0 <= p0 < 1:
        raise ValueError("p0 must lie in [0, 1)")
    hs = np.array([diagonal_feature(i, j, m, n) for i in range(1, m + 1)])
    w = np.exp(tension * (hs - hs.max()))
    w /= w.sum()
    out = np.empty(m + 1)
    out[0] = p0
    out[1:] = (1.0 - p0) * w
    return out


@dataclass(frozen=True)
class AlignmentLinkSet:
    """Source-target index links over a pair of known lengths."""

    links: frozenset
    m: int
    n: int

    def __post_init__(self):
        object.__setattr__(self, "links", frozenset(self.links))
        for i, j in self.links:
            if not (0 <= i < self.m and 0 <= j < self.n):
                raise ValueError(
                    "link (%d, %d) outside %d x %d" % (i, j, self.m, self.n)
                )


@dataclass
class AlignmentModel:
    """Sparse translation table plus the two structural parameters."""

    ttable: dict
    tension: float
    p0: float
    source_vocab: frozenset
    target_vocab: frozenset


def initialize_model(
    corpus: Sequence[ParallelPair], tension: float = 4.0, p0: float = 0.08
) -> AlignmentModel:
    """Uniform ttable over co-occurring types; the null row covers every
    target type."""
    if not corpus:
        raise EmptyCorpus("no parallel pairs")
    cooc = {NULL_SOURCE: set()}
    for pair in corpus:
        targets = set(pair.target)
        cooc[NULL_SOURCE].update(targets)
        for s in pair.source:
            cooc.setdefault(s, set()).update(targets)
    ttable = {}
    for s, targets in cooc.items():
        u = 1.0 / len(targets)
        for t in targets:
            ttable[(s, t)] = u
    return AlignmentModel(
        ttable=ttable,
        tension=tension,
        p0=p0,
        source_vocab=frozenset(cooc) - {NULL_SOURCE},
        target_vocab=frozenset(cooc[NULL_SOURCE]),
    )


def _prior_cache(model: AlignmentModel):
    cache = {}

    def get(j: int, m: int, n: int) -> np.ndarray:
        key = (j, m, n)
        if key not in cache:
            cache[key] = alignment_prior(j, m, n, model.tension, model.p0)
        return cache[key]

    return get


def posterior_matrix(model: AlignmentModel, pair: ParallelPair) -> np.ndarray:
    """(n, m+1) posterior over alignment choices, column 0 = null; each row
    sums to 1."""
    src = tuple(pair.source)
    tgt = tuple(pair.target)
    m, n = len(src), len(tgt)
    tt = model.ttable
    prior = _prior_cache(model)
    out = np.empty((n, m + 1))
    for j in range(1, n + 1):
        t = tgt[j - 1]
        pr = prior(j, m, n)
        row = out[j - 1]
        row[0] = pr[0] * tt.get((NULL_SOURCE, t), 0.0)
        for i in range(1, m + 1):
            row[i] = pr[i] * tt.get((src[i - 1], t), 0.0)
        row /= row.sum()
    return out


def em_iteration(
    model: AlignmentModel, corpus: Sequence[ParallelPair]
) -> tuple[AlignmentModel, float]:
    """One E+M sweep; returns the new model and the log-likelihood of the
    corpus under the parameters passed in (pre-update).

    Raises:
        EmptyCorpus: the corpus is empty.
    """
    if not corpus:
        raise EmptyCorpus("no parallel pairs")
    tt = model.ttable
    prior = _prior_cache(model)
    counts = {}
    log_likelihood = 0.0
    for pair in corpus:
        src = tuple(pair.source)
        tgt = tuple(pair.target)
        m, n = len(src), len(tgt)
        for j in range(1, n + 1):
            t = tgt[j - 1]
            pr = prior(j, m, n)
            scores = [pr[0] * tt.get((NULL_SOURCE, t), 0.0)]
            for i in range(1, m + 1):
                scores.append(pr[i] * tt.get((src[i - 1], t), 0.0))
            denom = sum(scores)
            log_likelihood += math.log(denom)
            inv = 1.0 / denom
            key = (NULL_SOURCE, t)
            counts[key] = counts.get(key, 0.0) + scores[0] * inv
            for i in range(1, m + 1):
                key = (src[i - 1], t)
                counts[key] = counts.get(key, 0.0) + scores[i] * inv
    row_sums = {}
    for (s, _), c in counts.items():
        row_sums[s] = row_sums.get(s, 0.0) + c
    new_ttable = {
        (s, t): c / row_sums[s] for (s, t), c in counts.items() if c > 0.0
    }
    new_model = AlignmentModel(
        ttable=new_ttable,
        tension=model.tension,
        p0=model.p0,
        source_vocab=model.source_vocab,
        target_vocab=model.target_vocab,
    )
    return new_model, log_likelihood


def fit_lambda(
    model: AlignmentModel,
    corpus: Sequence[ParallelPair],
    steps: int = 8,
    step_size: float = 1.0,
    tension_max: float = 16.0,
) -> AlignmentModel:
    """Refit the diagonal tension by gradient ascent.

    Posterior statistics are collected once under the current model; each
    step moves tension along the mean over target positions of
    E_posterior[h] - rho * E_prior[h], where rho is the non-null posterior
    mass, and clamps to [0, tension_max]. With fixed posteriors this is the
    exact gradient of the expected-complete-data objective in tension.
    """
    if not corpus:
        raise EmptyCorpus("no parallel pairs")
    groups = {}
    total_positions = 0
    for pair in corpus:
        post = posterior_matrix(model, pair)
        m, n = len(pair.source), len(pair.target)
        for j in range(1, n + 1):
            key = (j, m, n)
            if key not in groups:
                hs = np.array(
                    [diagonal_feature(i, j, m, n) for i in range(1, m + 1)]
                )
                groups[key] = [hs, 0.0, 0.0]
            row = post[j - 1, 1:]
            groups[key][1] += float(row @ groups[key][0])
            groups[key][2] += float(row.sum())
            total_positions += 1
    tension = model.tension
    for _ in range(steps):
        grad = 0.0
        for hs, e_post, rho in groups.values():
            w = np.exp(tension * (hs - hs.max()))
            w /= w.sum()
            grad += e_post - rho * float(w @ hs)
        grad /= total_positions
        tension = min(max(tension + step_size * grad, 0.0), tension_max)
    return AlignmentModel(
        ttable=model.ttable,
        tension=tension,
        p0=model.p0,
        source_vocab=model.source_vocab,
        target_vocab=model.target_vocab,
    )


def train_aligner(
    corpus: Sequence[ParallelPair],
    sweeps: int = 5,
    tension: float = 4.0,
    p0: float = 0.08,
    fit_tension: bool = True,
    fit_steps: int = 8,
    fit_step_size: float = 1.0,
    tension_max: float = 16.0,
) -> tuple[AlignmentModel, list]:
    """EM training loop; returns the model and one log-likelihood per sweep.

    Each sweep runs one EM iteration and then, unless disabled, the tension
    refit. Likelihood values are evaluated under the pre-sweep parameters,
    so the recorded sequence is non-decreasing.
    """
    model = initialize_model(corpus, tension=tension, p0=p0)
    history = []
    for _ in range(sweeps):
        model, ll = em_iteration(model, corpus)
        history.append(ll)
        if fit_tension:
            model = fit_lambda(
                model,
                corpus,
                steps=fit_steps,
                step_size=fit_step_size,
                tension_max=tension_max,
            )
    return model, history


def viterbi_align(model: AlignmentModel, pair: ParallelPair) -> AlignmentLinkSet:
    """Best source position per target position; null wins drop the link,
    score ties keep the smallest source index."""
    src = tuple(pair.source)
    tgt = tuple(pair.target)
    m, n = len(src), len(tgt)
    tt = model.ttable
    prior = _prior_cache(model)
    links = set()
    for j in range(1, n + 1):
        t = tgt[j - 1]
        pr = prior(j, m, n)
        best_i = 0
        best = pr[0] * tt.get((NULL_SOURCE, t), 0.0)
        for i in range(1, m + 1):
            score = pr[i] * tt.get((src[i - 1], t), 0.0)
            if score > best:
                best = score
                best_i = i
        if best_i > 0:
            links.add((best_i - 1, j - 1))
    return AlignmentLinkSet(links=frozenset(links), m=m, n=n)


def symmetrize(
    forward: AlignmentLinkSet, reverse: AlignmentLinkSet, heuristic: str
) -> AlignmentLinkSet:
    """Combine two directional link sets over the same (m, n).

    ``reverse`` must already be transposed into source-major indexing.
    Heuristics: intersection, union, or grow-diag-final-and with a fixed
    row-major scan so the result is deterministic.

    Raises:
        DimensionMismatch: the two link sets disagree on (m, n).
    """
    if (forward.m, forward.n) != (reverse.m, reverse.n):
        raise DimensionMismatch(
            "forward %dx%d vs reverse %dx%d"
            % (forward.m, forward.n, reverse.m, reverse.n)
        )
    m, n = forward.m, forward.n
    if heuristic == "intersection":
        return AlignmentLinkSet(forward.links & reverse.links, m, n)
    if heuristic == "union":
        return AlignmentLinkSet(forward.links | reverse.links, m, n)
    if heuristic != "grow-diag-final-and":
        raise ValueError("unknown symmetrization heuristic %r" % heuristic)

    union = forward.links | reverse.links
    aligned = set(forward.links & reverse.links)
    src_covered = {i for i, _ in aligned}
    tgt_covered = {j for _, j in aligned}
    neighborhood = (
        (-1, 0), (0, -1), (1, 0), (0, 1),
        (-1, -1), (-1, 1), (1, -1), (1, 1),
    )
    changed = True
    while changed:
        changed = False
        for j in range(n):
            for i in range(m):
                if (i, j) not in aligned:
                    continue
                for di, dj in neighborhood:
                    ni, nj = i + di, j + dj
                    if not (0 <= ni < m and 0 <= nj < n):
                        continue
                    if (ni, nj) in aligned or (ni, nj) not in union:
                        continue
                    if ni not in src_covered or nj not in tgt_covered:
                        aligned.add((ni, nj))
                        src_covered.add(ni)
                        tgt_covered.add(nj)
                        changed = True
    for candidate in (forward.links, reverse.links):
        for j in range(n):
            for i in range(m):
                if (
                    (i, j) in candidate
                    and (i, j) not in aligned
                    and i not in src_covered
                    and j not in tgt_covered
                ):
                    aligned.add((i, j))
                    src_covered.add(i)
                    tgt_covered.add(j)
    return AlignmentLinkSet(frozenset(aligned), m, n)


# ---------------------------------------------------------------------------
# Link I/O and model persistence


def format_links(link_set: AlignmentLinkSet) -> str:
    """Space-separated "i-j" pairs, 0-indexed, ordered by target position."""
    return " ".join(
        "%d-%d" % (i, j)
        for i, j in sorted(link_set.links, key=lambda ij: (ij[1], ij[0]))
    )


def parse_links(line: str, m: int, n: int) -> AlignmentLinkSet:
    links = set()
    for chunk in line.split():
        left, sep, right = chunk.partition("-")
        if not sep:
            raise FormatError("malformed link %r" % chunk)
        try:
            links.add((int(left), int(right)))
        except ValueError:
            raise FormatError("malformed link %r" % chunk)
    try:
        return AlignmentLinkSet(frozenset(links), m, n)
    except ValueError as exc:
        raise FormatError(str(exc))


def write_alignment_file(path, link_sets: Iterable[AlignmentLinkSet]) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for ls in link_sets:
                fh.write(format_links(ls) + "\n")
    except OSError as exc:
        raise IoFailure("cannot write alignments %s: %s" % (path, exc))


def read_alignment_file(path, dims: Sequence[tuple]) -> list:
    """Read one Pharaoh line per (m, n) in ``dims``.

    Raises:
        FormatError: malformed links or a line-count mismatch with dims.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().split("\n")
    except OSError as exc:
        raise IoFailure("cannot read alignments %s: %s" % (path, exc))
    if lines and lines[-1] == "":
        lines.pop()
    if len(lines) != len(dims):
        raise FormatError(
            "%d alignment lines for %d pairs" % (len(lines), len(dims))
        )
    return [parse_links(line, m, n) for line, (m, n) in zip(lines, dims)]


_MAGIC = "aeckit-align-model 1"


def save_alignment_model(model: AlignmentModel, path) -> None:
    """Flat text: header, then sorted "source target probability" triples.
    The null source serializes as an empty first field."""
    lines = [
        _MAGIC,
        "tension %r" % float(model.tension),
        "p0 %r" % float(model.p0),
        "entries %d" % len(model.ttable),
    ]
    for (s, t) in sorted(model.ttable):
        lines.append("%s %s %r" % (s, t, float(model.ttable[(s, t)])))
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoFailure("cannot write model %s: %s" % (path, exc))


def load_alignment_model(path) -> AlignmentModel:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().split("\n")
    except OSError as exc:
        raise IoFailure("cannot read model %s: %s" % (path, exc))
    try:
        if lines[0] != _MAGIC:
            raise FormatError("not an alignment model file: %s" % path)
        tension = float(lines[1].split(" ", 1)[1])
        p0 = float(lines[2].split(" ", 1)[1])
        n_entries = int(lines[3].split(" ", 1)[1])
        ttable = {}
        for k in range(n_entries):
            s, t, p = lines[4 + k].split(" ")
            ttable[(s, t)] = float(p)
    except (IndexError, ValueError) as exc:
        raise FormatError("corrupt alignment model %s: %s" % (path, exc))
    return AlignmentModel(
        ttable=ttable,
        tension=tension,
        p0=p0,
        source_vocab=frozenset(s for s, _ in ttable) - {NULL_SOURCE},
        target_vocab=frozenset(t for _, t in ttable),
    )

"""Exact WER and chrF++ scoring with corpus-level aggregation.

WER runs over syllable tokens, the pipeline's unit; "word" in the name follows
ASR convention, not whitespace words. chrF++ follows the published definition:
an average of F_beta over character n-gram orders 1..char_n and word n-gram
orders 1..word_n with clipped counts. Orders where neither side has any n-gram
are skipped from the average so that identical short strings score exactly 1.0;
orders with no overlap contribute 0.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .errors import EmptyCorpus, EmptyReference, LengthMismatch


class EditBreakdown(NamedTuple):
    """Edit counts of one hypothesis against one reference.

    Invariant: hits + substitutions + deletions == reference_length.
    """

    substitutions: int
    deletions: int
    insertions: int
    hits: int
    reference_length: int

    @property
    def edits(self) -> int:
        return self.substitutions + self.deletions + self.insertions


def _fill_rows(reference: Sequence, hypothesis: Sequence) -> list:
    """Full unit-cost DP table as a list of rows.

    Row i, column j holds the edit distance between the first i reference
    tokens and the first j hypothesis tokens. The inner loop carries the
    diagonal and left cells in locals; this function sits on the hot path of
    the exhaustive metric checks, so it avoids slicing and double indexing.
    """
    prev = list(range(len(hypothesis) + 1))
    rows = [prev]
    append_row = rows.append
    for i in range(1, len(reference) + 1):
        r = reference[i - 1]
        cur = [i]
        append = cur.append
        c = i
        it = iter(prev)
        pd = next(it)
        for pj, h in zip(it, hypothesis):
            t = pd + (r != h)
            v = pj + 1
            if v < t:
                t = v
            c1 = c + 1
            c = t if t < c1 else c1
            append(c)
            pd = pj
        append_row(cur)
        prev = cur
    return rows


def edit_distance(a: Sequence, b: Sequence) -> int:
    """Unit-cost edit distance between two token sequences (either may be empty).

    Same recurrence as ``_fill_rows`` but keeps only two rows; this is the
    path the exhaustive all-pairs checks hammer, and not building the table
    roughly halves the per-call cost.
    """
    prev = list(range(len(b) + 1))
    for i in range(1, len(a) + 1):
        r = a[i - 1]
        cur = [i]
        append = cur.append
        c = i
        it = iter(prev)
        pd = next(it)
        for pj, h in zip(it, b):
            t = pd + (r != h)
            v = pj + 1
            if v < t:
                t = v
            c1 = c + 1
            c = t if t < c1 else c1
            append(c)
            pd = pj
        prev = cur
    return prev[-1]


def wer(reference: Sequence, hypothesis: Sequence) -> tuple[float, EditBreakdown]:
    """Word error rate of ``hypothesis`` against a non-empty ``reference``.

    The rate is (S + D + I) / len(reference), read from the same DP table that
    ``edit_distance`` computes, and may exceed 1. Ties between minimal edit
    scripts are resolved during backtrace by preferring, in order: hit (equal
    tokens on the diagonal), substitution, insertion, deletion, which makes
    the breakdown deterministic.

    Raises:
        EmptyReference: the reference has no tokens.
    """
    n = len(reference)
    if n == 0:
        raise EmptyReference("WER needs a non-empty reference")
    m = len(hypothesis)
    rows = _fill_rows(reference, hypothesis)
    distance = rows[n][m]
    i, j = n, m
    subs = dels = ins = hits = 0
    while i or j:
        row = rows[i]
        c = row[j]
        if i and j:
            diag = rows[i - 1][j - 1]
            if diag == c and reference[i - 1] == hypothesis[j - 1]:
                hits += 1
                i -= 1
                j -= 1
                continue
            if diag + 1 == c:
                subs += 1
                i -= 1
                j -= 1
                continue
        if j and row[j - 1] + 1 == c:
            ins += 1
            j -= 1
        else:
            dels += 1
            i -= 1
    breakdown = EditBreakdown(subs, dels, ins, hits, n)
    return distance / n, breakdown


def _char_ngram_counts(text: str, order: int) -> Counter:
    chars = [c for c in text if not c.isspace()]
    return Counter(
        tuple(chars[k : k + order]) for k in range(len(chars) - order + 1)
    )


def _word_ngram_counts(text: str, order: int) -> Counter:
    words = text.split()
    return Counter(
        tuple(words[k : k + order]) for k in range(len(words) - order + 1)
    )


def _order_stats(reference: str, hypothesis: str, char_n: int, word_n: int):
    """Per-order (match, hyp_total, ref_total) triples, char orders first."""
    stats = []
    for counter in (_char_ngram_counts, _word_ngram_counts):
        top = char_n if counter is _char_ngram_counts else word_n
        for order in range(1, top + 1):
            ref_counts = counter(reference, order)
            hyp_counts = counter(hypothesis, order)
            match = sum(
                min(cnt, ref_counts[g]) for g, cnt in hyp_counts.items()
            )
            stats.append(
                (match, sum(hyp_counts.values()), sum(ref_counts.values()))
            )
    return stats


def _f_from_stats(stats, beta: float) -> float:
    b2 = beta * beta
    total = 0.0
    counted = 0
    for match, hyp_total, ref_total in stats:
        if hyp_total == 0 and ref_total == 0:
            continue  # order absent on both sides: neutral
        counted += 1
        if match == 0:
            continue
        prec = match / hyp_total
        rec = match / ref_total
        total += (1 + b2) * prec * rec / (b2 * prec + rec)
    if counted == 0:
        return 1.0
    return total / counted


def chrf_pp(
    reference: str,
    hypothesis: str,
    char_n: int = 6,
    word_n: int = 2,
    beta: float = 2.0,
) -> float:
    """chrF++ score in [0, 1] of one hypothesis string against one reference.

    Whitespace is excluded from character n-grams, so the score is invariant
    to leading/trailing whitespace. Two empty strings score 1.0.
    """
    return _f_from_stats(
        _order_stats(reference, hypothesis, char_n, word_n), beta
    )


@dataclass(frozen=True)
class SentenceEval:
    id: str
    breakdown: EditBreakdown
    chrf: float


@dataclass(frozen=True)
class EvalReport:
    """Corpus WER/chrF++ with per-sentence breakdowns.

    corpus_wer is micro-averaged (total edits over total reference tokens);
    corpus_chrf aggregates n-gram counts over the corpus before the F-score.
    """

    corpus_wer: float
    corpus_chrf: float
    sentences: tuple[SentenceEval, ...]


def evaluate_corpus(
    pairs: Sequence[tuple[Sequence[str], Sequence[str]]],
    ids: Sequence[str] | None = None,
    char_n: int = 6,
    word_n: int = 2,
    beta: float = 2.0,
) -> EvalReport:
    """Score a corpus of (reference tokens, hypothesis tokens) pairs.

    chrF++ sees each side as the space-joined token string. Raises EmptyCorpus
    on an empty pair list and LengthMismatch when ``ids`` does not match.
    """
    if not pairs:
        raise EmptyCorpus("no sentence pairs to evaluate")
    if ids is None:
        ids = ["line-%d" % (k + 1) for k in range(len(pairs))]
    elif len(ids) != len(pairs):
        raise LengthMismatch(
            "%d ids for %d pairs" % (len(ids), len(pairs))
        )
    sentences = []
    total_edits = 0
    total_ref = 0
    n_orders = char_n + word_n
    agg = [(0, 0, 0)] * n_orders
    for sid, (ref_tokens, hyp_tokens) in zip(ids, pairs):
        _, breakdown = wer(ref_tokens, hyp_tokens)
        ref_text = " ".join(ref_tokens)
        hyp_text = " ".join(hyp_tokens)
        stats = _order_stats(ref_text, hyp_text, char_n, word_n)
        agg = [
            (a + s[0], b + s[1], c + s[2])
            for (a, b, c), s in zip(agg, stats)
        ]
        sentences.append(
            SentenceEval(sid, breakdown, _f_from_stats(stats, beta))
        )
        total_edits += breakdown.edits
        total_ref += breakdown.reference_length
    return EvalReport(
        corpus_wer=total_edits / total_ref,
        corpus_chrf=_f_from_stats(agg, beta),
        sentences=tuple(sentences),
    )


REPORT_HEADER = ("id", "ref_len", "hits", "sub", "del", "ins", "wer", "chrf")


def write_report(report: EvalReport, path) -> None:
    """Write the tab-separated per-sentence report with a final corpus row."""
    lines = ["\t".join(REPORT_HEADER)]
    total = [0, 0, 0, 0, 0]
    for s in report.sentences:
        b = s.breakdown
        total[0] += b.reference_length
        total[1] += b.hits
        total[2] += b.substitutions
        total[3] += b.deletions
        total[4] += b.insertions
        lines.append(
            "%s\t%d\t%d\t%d\t%d\t%d\t%.6f\t%.6f"
            % (
                s.id,
                b.reference_length,
                b.hits,
                b.substitutions,
                b.deletions,
                b.insertions,
                b.edits / b.reference_length,
                s.chrf,
            )
        )
    lines.append(
        "corpus\t%d\t%d\t%d\t%d\t%d\t%.6f\t%.6f"
        % (*total, report.corpus_wer, report.corpus_chrf)
    )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def summary(report: EvalReport) -> str:
    """One-paragraph human-readable summary for standard output."""
    return (
        "sentences: %d  corpus WER: %.4f  corpus chrF++: %.4f"
        % (len(report.sentences), report.corpus_wer, report.corpus_chrf)
    )

"""Synthetic error channel that turns clean corpora into Err/GT pairs.

The channel is position-independent: each input syllable independently keeps,
substitutes, or deletes itself, and after every position one insertion is
drawn with probability p_ins from the corpus unigram distribution.
Substitutions come from a ConfusionTable, either uniform over the vocabulary
or phonetically weighted with probability proportional to
exp(-d / temperature), where d is the normalized edit distance between the
IPA strings of the two syllables.

Corruption of pair i is a pure function of (profile.seed, i): every pair uses
the counter-based substream rng([seed, i]), so corpora are reproducible and
order-independent. Real recognition errors are correlated across positions;
independence is a deliberate simplification that keeps every rate testable
against its binomial expectation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyCorpus, FormatError, IoFailure
from .metrics import edit_distance
from .textcore import ParallelPair, SyllableSequence

CONFUSION_MODES = ("uniform", "phonetic")


@dataclass(frozen=True)
class NoiseProfile:
    """Channel parameters; probabilities are per-position."""

    p_sub: float
    p_del: float
    p_ins: float
    confusion_mode: str = "uniform"
    phonetic_temperature: float = 0.2
    seed: int = 0

    def __post_init__(self):
        for name in ("p_sub", "p_del", "p_ins"):
            if getattr(self, name) < 0:
                raise ValueError("%s must be non-negative" % name)
        if self.p_sub + self.p_del + self.p_ins > 1.0:
            raise ValueError("p_sub + p_del + p_ins must not exceed 1")
        if self.confusion_mode not in CONFUSION_MODES:
            raise ValueError("unknown confusion mode %r" % self.confusion_mode)
        if self.phonetic_temperature <= 0:
            raise ValueError("phonetic temperature must be positive")


_PROFILE_MAGIC = "aeckit-noise-profile 1"


def save_noise_profile(profile: NoiseProfile, path) -> None:
    lines = [
        _PROFILE_MAGIC,
        "p_sub %r" % profile.p_sub,
        "p_del %r" % profile.p_del,
        "p_ins %r" % profile.p_ins,
        "confusion_mode %s" % profile.confusion_mode,
        "phonetic_temperature %r" % profile.phonetic_temperature,
        "seed %d" % profile.seed,
    ]
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoFailure("cannot write profile %s: %s" % (path, exc))


def load_noise_profile(path) -> NoiseProfile:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln for ln in fh.read().split("\n") if ln]
    except OSError as exc:
        raise IoFailure("cannot read profile %s: %s" % (path, exc))
    if not lines or lines[0] != _PROFILE_MAGIC:
        raise FormatError("not a noise profile file: %s" % path)
    fields = {}
    for line in lines[1:]:
        key, sep, value = line.partition(" ")
        if not sep:
            raise FormatError("malformed profile line %r" % line)
        fields[key] = value
    try:
        return NoiseProfile(
            p_sub=float(fields["p_sub"]),
            p_del=float(fields["p_del"]),
            p_ins=float(fields["p_ins"]),
            confusion_mode=fields["confusion_mode"],
            phonetic_temperature=float(fields["phonetic_temperature"]),
            seed=int(fields["seed"]),
        )
    except (KeyError, ValueError) as exc:
        raise FormatError("corrupt noise profile %s: %s" % (path, exc))


@dataclass(frozen=True)
class ConfusionTable:
    """Per-syllable replacement distributions; self-replacement excluded."""

    entries: dict

    def __post_init__(self):
        for syllable, (candidates, probs) in self.entries.items():
            if syllable in candidates:
                raise ValueError("%r may not replace itself" % syllable)
            if len(candidates) != len(probs):
                raise ValueError("candidate/probability length mismatch")
            if abs(math.fsum(probs) - 1.0) > 1e-9:
                raise ValueError(
                    "distribution for %r sums to %r" % (syllable, math.fsum(probs))
                )

    def distribution(self, syllable: str):
        return self.entries[syllable]

    def sample(self, syllable: str, rng) -> str:
        candidates, probs = self.entries[syllable]
        return candidates[int(rng.choice(len(candidates), p=np.array(probs)))]


def build_uniform_confusions(vocab: Sequence[str]) -> ConfusionTable:
    """Every other vocabulary syllable equally likely."""
    vocab = tuple(dict.fromkeys(vocab))
    if len(vocab) < 2:
        raise ValueError("confusion table needs at least 2 syllable types")
    entries = {}
    for s in vocab:
        candidates = tuple(v for v in vocab if v != s)
        u = 1.0 / len(candidates)
        entries[s] = (candidates, tuple(u for _ in candidates))
    return ConfusionTable(entries)


def normalized_ipa_distance(a: str, b: str) -> float:
    """Character edit distance divided by the longer length; 0 for two
    empty strings."""
    longer = max(len(a), len(b))
    if longer == 0:
        return 0.0
    return edit_distance(tuple(a), tuple(b)) / longer


def build_phonetic_confusions(
    vocab: Sequence[str], ipa_tags: Sequence[str], temperature: float
) -> ConfusionTable:
    """Replacement probability proportional to exp(-d / temperature), d the
    normalized IPA edit distance; phonetically near syllables dominate."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    if len(vocab) != len(ipa_tags):
        raise ValueError("vocab and IPA tag lists differ in length")
    vocab = tuple(vocab)
    if len(set(vocab)) != len(vocab):
        raise ValueError("duplicate vocabulary syllables")
    if len(vocab) < 2:
        raise ValueError("confusion table needs at least 2 syllable types")
    ipa = dict(zip(vocab, ipa_tags))
    entries = {}
    for s in vocab:
        candidates = tuple(v for v in vocab if v != s)
        weights = [
            math.exp(-normalized_ipa_distance(ipa[s], ipa[v]) / temperature)
            for v in candidates
        ]
        z = math.fsum(weights)
        entries[s] = (candidates, tuple(w / z for w in weights))
    return ConfusionTable(entries)


@dataclass(frozen=True)
class CorruptionResult:
    """One corrupted sentence plus realized operation counts."""

    tokens: tuple
    kept: int
    substituted: int
    deleted: int
    inserted: int

    @property
    def empty(self) -> bool:
        return not self.tokens

    def sequence(self) -> SyllableSequence:
        return SyllableSequence(self.tokens)


def corrupt(
    gt,
    profile: NoiseProfile,
    confusions: ConfusionTable,
    insertion_dist=None,
    pair_index: int = 0,
) -> CorruptionResult:
    """Apply the channel to one sentence.

    ``insertion_dist`` is (tokens, probabilities); when omitted, insertions
    are uniform over the confusion-table vocabulary. A syllable missing from
    the confusion table is kept instead of substituted. The draw order per
    position is fixed (operation, replacement if any, insertion, inserted
    token if any), so the two confusion modes consume the random stream
    identically.
    """
    rng = np.random.default_rng([profile.seed, pair_index])
    if insertion_dist is None:
        ins_tokens = tuple(sorted(confusions.entries))
        ins_probs = np.full(len(ins_tokens), 1.0 / len(ins_tokens))
    else:
        ins_tokens, ins_probs = insertion_dist
        ins_probs = np.asarray(ins_probs, dtype=float)
    out = []
    kept = substituted = deleted = inserted = 0
    for tok in gt:
        u = rng.random()
        if u < profile.p_sub:
            if tok in confusions.entries:
                out.append(confusions.sample(tok, rng))
                substituted += 1
            else:
                out.append(tok)
                kept += 1
        elif u < profile.p_sub + profile.p_del:
            deleted += 1
        else:
            out.append(tok)
            kept += 1
        if rng.random() < profile.p_ins:
            out.append(ins_tokens[int(rng.choice(len(ins_tokens), p=ins_probs))])
            inserted += 1
    return CorruptionResult(
        tokens=tuple(out),
        kept=kept,
        substituted=substituted,
        deleted=deleted,
        inserted=inserted,
    )


@dataclass
class ChannelStats:
    """Aggregate realized channel behavior over a generated corpus."""

    sentences: int = 0
    gt_tokens: int = 0
    kept: int = 0
    substituted: int = 0
    deleted: int = 0
    inserted: int = 0
    empty_outputs: int = 0

    @property
    def sub_rate(self) -> float:
        return self.substituted / self.gt_tokens if self.gt_tokens else 0.0

    @property
    def del_rate(self) -> float:
        return self.deleted / self.gt_tokens if self.gt_tokens else 0.0

    @property
    def ins_rate(self) -> float:
        return self.inserted / self.gt_tokens if self.gt_tokens else 0.0


def unigram_distribution(corpus: Sequence[SyllableSequence]):
    """Corpus unigram distribution in sorted-token order."""
    counts = {}
    for sentence in corpus:
        for tok in sentence:
            counts[tok] = counts.get(tok, 0) + 1
    tokens = tuple(sorted(counts))
    total = sum(counts.values())
    probs = np.array([counts[t] / total for t in tokens])
    return tokens, probs


def generate_corpus(
    gt_corpus: Sequence[SyllableSequence],
    profile: NoiseProfile,
    confusions: ConfusionTable | None = None,
) -> tuple[list, ChannelStats]:
    """Corrupt every sentence into an (Err, GT) ParallelPair.

    With no confusion table, uniform mode builds one from the corpus
    vocabulary; phonetic mode has no IPA information here and requires the
    table to be supplied.

    Raises:
        EmptyCorpus: no sentences.
    """
    if not gt_corpus:
        raise EmptyCorpus("no ground-truth sentences")
    if confusions is None:
        if profile.confusion_mode == "phonetic":
            raise ValueError(
                "phonetic confusion mode requires a prebuilt confusion table"
            )
        vocab = sorted({tok for sentence in gt_corpus for tok in sentence})
        confusions = build_uniform_confusions(vocab)
    insertion_dist = unigram_distribution(gt_corpus)
    pairs = []
    stats = ChannelStats()
    for i, gt in enumerate(gt_corpus):
        result = corrupt(gt, profile, confusions, insertion_dist, pair_index=i)
        stats.sentences += 1
        stats.gt_tokens += len(gt)
        stats.kept += result.kept
        stats.substituted += result.substituted
        stats.deleted += result.deleted
        stats.inserted += result.inserted
        if result.empty:
            stats.empty_outputs += 1
        pairs.append(
            ParallelPair(
                source=result.sequence(),
                target=SyllableSequence(tuple(gt)),
                id="line-%d" % (i + 1),
            )
        )
    return pairs, stats


_STATS_MAGIC = "aeckit-channel-stats 1"


def save_channel_stats(stats: ChannelStats, path) -> None:
    lines = [
        _STATS_MAGIC,
        "sentences %d" % stats.sentences,
        "gt_tokens %d" % stats.gt_tokens,
        "kept %d" % stats.kept,
        "substituted %d" % stats.substituted,
        "deleted %d" % stats.deleted,
        "inserted %d" % stats.inserted,
        "empty_outputs %d" % stats.empty_outputs,
        "sub_rate %r" % stats.sub_rate,
        "del_rate %r" % stats.del_rate,
        "ins_rate %r" % stats.ins_rate,
    ]
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoFailure("cannot write channel stats %s: %s" % (path, exc))

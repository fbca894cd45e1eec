# -*- coding: utf-8 -*-
"""Small generated Burmese grammar for end-to-end exercises.

Produces subject-object-verb sentences from a fixed lexicon in which every
word carries per-syllable phonetic labels, giving three aligned artifacts
at once: raw unsegmented text (syllables concatenated, as Burmese is
written), the segmented token sequence, and a gold label sequence for
training the phonetic tagger. Every lexicon word round-trips through the
syllable segmenter, so re-segmenting the raw text reproduces the generated
tokens exactly; the test suite checks this across the whole lexicon and
across word boundaries.

The inventory includes genuine tagging ambiguity on purpose: the syllable
"က" serves both as the subject marker (labeled ka̰) and as the
first syllable of "child" (aspirated kʰa̰), so a context-free
lookup cannot tag this corpus perfectly while a sequence model can.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .textcore import SyllableSequence, write_segmented


@dataclass(frozen=True)
class Word:
    """One lexicon entry: aligned syllables and phonetic labels."""

    syllables: tuple
    ipa: tuple

    def __post_init__(self):
        if len(self.syllables) != len(self.ipa):
            raise ValueError("syllable/label length mismatch")


def _w(text_syllables, labels):
    return Word(tuple(text_syllables.split()), tuple(labels.split()))


PEOPLE = (
    _w("ကျောင်း သား", "tɕáʊɴ ðá"),
    _w("ဆ ရာ", "sʰa̰ ja"),
    _w("က လေး", "kʰa̰ lé"),
    _w("အ မေ", "ʔa̰ me"),
    _w("အ ဖေ", "ʔa̰ pʰe"),
)

ANIMALS = (
    _w("ခွေး", "kʰwé"),
    _w("ကြောင်", "tɕàʊɴ"),
)

FOODS = (
    _w("ထ မင်း", "tʰa̰ mɪ́ɴ"),
    _w("ငါး", "ŋá"),
    _w("ကြက် သား", "tɕɛʔ ðá"),
    _w("သစ် သီး", "θɪʔ θí"),
)

DRINKS = (
    _w("ရေ", "je"),
    _w("လက် ဖက် ရည်", "lɛʔ pʰɛʔ je"),
    _w("ကော် ဖီ", "kɔ pʰi"),
)

READABLES = (
    _w("စာ အုပ်", "sa ʔoʊʔ"),
    _w("စာ", "sa"),
)

PLACES = (
    _w("ကျောင်း", "tɕáʊɴ"),
    _w("ဈေး", "zé"),
    _w("အိမ်", "ʔeɪɴ"),
    _w("မြို့", "mjo̰"),
    _w("ကျေး ရွာ", "tɕé jwa"),
)

TIMES = (
    _w("ဒီ နေ့", "dì nḛ"),
    _w("နေ့ တိုင်း", "nḛ táɪɴ"),
    _w("မ နက်", "ma̰ nɛʔ"),
    _w("ည နေ", "ɲa̰ ne"),
)

# transitive verbs with the object roles they accept
VERBS = (
    (_w("စား တယ်", "sá dɛ"), ("food",)),
    (_w("သောက် တယ်", "θaʊʔ dɛ"), ("drink",)),
    (_w("ဖတ် တယ်", "pʰaʔ dɛ"), ("readable",)),
    (_w("ရေး တယ်", "jé dɛ"), ("readable",)),
    (_w("ဝယ် တယ်", "wɛ dɛ"), ("food", "drink", "readable")),
    (_w("မြင် တယ်", "mjɪ̀ɴ dɛ"), ("animal", "person")),
    (_w("ချစ် တယ်", "tɕʰɪʔ dɛ"), ("animal", "person")),
)

MOTION_VERBS = (
    _w("သွား တယ်", "θwá dɛ"),
    _w("လာ တယ်", "la dɛ"),
)

SUBJECT_MARKER = _w("က", "ka̰")
OBJECT_MARKER = _w("ကို", "ko")
LOCATIVE = _w("မှာ", "m̥a")
COMITATIVE = _w("နဲ့", "nɛ̰")
PLURAL = _w("တွေ", "dwe")
ADJECTIVES = (
    _w("ကြီး", "tɕí"),
    _w("ကောင်း", "káʊɴ"),
)
ADVERB = _w("မြန် မြန်", "mjàɴ mjàɴ")

ROLES = {
    "person": PEOPLE,
    "animal": ANIMALS,
    "food": FOODS,
    "drink": DRINKS,
    "readable": READABLES,
    "place": PLACES,
    "time": TIMES,
}


def all_words():
    words = list(PEOPLE + ANIMALS + FOODS + DRINKS + READABLES + PLACES + TIMES)
    words += [verb for verb, _ in VERBS]
    words += list(MOTION_VERBS)
    words += [SUBJECT_MARKER, OBJECT_MARKER, LOCATIVE, COMITATIVE, PLURAL, ADVERB]
    words += list(ADJECTIVES)
    return words


def _pick(rng, options):
    return options[int(rng.integers(0, len(options)))]


def _subject(rng):
    words = [_pick(rng, PEOPLE + ANIMALS)]
    if rng.random() < 0.2:
        words.append(PLURAL)
    words.append(SUBJECT_MARKER)
    return words


def sample_sentence(rng) -> tuple[tuple, tuple]:
    """One sentence as (syllable tokens, aligned phonetic labels)."""
    roll = rng.random()
    words = _subject(rng)
    if roll < 0.55:
        # transitive clause, optionally timed, placed, or adverbial
        verb, object_roles = VERBS[int(rng.integers(0, len(VERBS)))]
        if rng.random() < 0.25:
            words.append(_pick(rng, TIMES))
        if rng.random() < 0.25:
            words.append(_pick(rng, PLACES))
            words.append(LOCATIVE)
        obj = _pick(rng, ROLES[_pick(rng, object_roles)])
        words.append(obj)
        if rng.random() < 0.15:
            words.append(_pick(rng, ADJECTIVES))
        words.append(OBJECT_MARKER)
        if rng.random() < 0.2:
            words.append(ADVERB)
        words.append(verb)
    elif roll < 0.85:
        # motion toward a place
        if rng.random() < 0.3:
            words.append(_pick(rng, TIMES))
        words.append(_pick(rng, PLACES))
        words.append(OBJECT_MARKER)
        words.append(_pick(rng, MOTION_VERBS))
    else:
        # comitative motion: A with-B to-place goes
        words = [_pick(rng, PEOPLE), COMITATIVE]
        words.extend(_subject(rng))
        words.append(_pick(rng, PLACES))
        words.append(OBJECT_MARKER)
        words.append(_pick(rng, MOTION_VERBS))
    tokens = []
    labels = []
    for word in words:
        tokens.extend(word.syllables)
        labels.extend(word.ipa)
    return tuple(tokens), tuple(labels)


def generate(n_sentences: int, seed: int = 0) -> list[tuple[tuple, tuple]]:
    """Deterministic corpus of (tokens, labels) rows."""
    if n_sentences < 1:
        raise ValueError("need at least one sentence")
    rng = np.random.default_rng([seed, 0])
    return [sample_sentence(rng) for _ in range(n_sentences)]


def write_text_file(rows, path) -> None:
    """Raw unsegmented text, one sentence per line (syllables concatenated)."""
    with open(path, "w", encoding="utf-8") as fh:
        for tokens, _ in rows:
            fh.write("".join(tokens))
            fh.write("\n")


def write_tagged_file(rows, path) -> None:
    """token|label lines for tagger training."""
    with open(path, "w", encoding="utf-8") as fh:
        for tokens, labels in rows:
            fh.write(write_segmented(SyllableSequence(tuple(tokens)), list(labels)))
            fh.write("\n")

"""Normalization, Burmese syllable segmentation, and parallel-corpus I/O.

Segmentation is a deterministic rule system over codepoint classes of the
Myanmar block (U+1000..U+104F). The driving rule: a syllable break goes before
a consonant, except when that consonant is glued to the previous cluster,
which happens when the previous character is the stacker U+1039 or when the
consonant itself is killed by a following asat U+103A or stacker (closing
finals and stacked pairs such as kinzi). Runs of non-Myanmar text fall back
to whitespace tokenization. Digit runs stay single tokens.

Normalization applies NFC, then a replaceable cleaning table (a data file of
codepoint rules, not code), then whitespace collapsing.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .errors import (
    CharOutsideRuleSet,
    FormatError,
    IoFailure,
    LengthMismatch,
    LineCountMismatch,
)

SEPARATOR = " "


@dataclass(frozen=True)
class SyllableSequence:
    """Ordered syllable tokens of one utterance.

    Joining the tokens reproduces the normalized text with separators
    removed; no token is empty or contains the separator.
    """

    tokens: tuple[str, ...]

    def __post_init__(self):
        for tok in self.tokens:
            if not tok or SEPARATOR in tok:
                raise ValueError("invalid syllable token %r" % (tok,))

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def __getitem__(self, k):
        return self.tokens[k]

    def text(self) -> str:
        return "".join(self.tokens)


@dataclass(frozen=True)
class ParallelPair:
    """One Err/GT sentence pair; source is the erroneous side."""

    source: SyllableSequence
    target: SyllableSequence
    id: str


@dataclass(frozen=True)
class CorpusStats:
    sentence_count: int
    source_token_count: int
    target_token_count: int


# ---------------------------------------------------------------------------
# Cleaning table


def _parse_codepoint(text: str) -> int:
    text = text.strip()
    if text.upper().startswith("U+"):
        text = text[2:]
    try:
        value = int(text, 16)
    except ValueError:
        raise FormatError("bad codepoint %r in cleaning table" % text) from None
    if not 0 <= value <= 0x10FFFF:
        raise FormatError("codepoint %r out of range" % text)
    return value


@dataclass(frozen=True)
class CleaningTable:
    """Ordered (lo, hi, replacement) rules; replacement None means drop."""

    rules: tuple[tuple[int, int, str | None], ...] = ()

    @classmethod
    def parse(cls, text: str) -> "CleaningTable":
        rules = []
        for lineno, raw in enumerate(text.split("\n"), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise FormatError(
                    "cleaning table line %d needs exactly one TAB" % lineno
                )
            span, action = parts[0].strip(), parts[1].strip()
            if "-" in span.removeprefix("U+").removeprefix("u+"):
                head, _, tail = span.partition("-")
                lo, hi = _parse_codepoint(head), _parse_codepoint(tail)
            else:
                lo = hi = _parse_codepoint(span)
            if lo > hi:
                raise FormatError("cleaning table line %d: empty range" % lineno)
            if action == "drop":
                repl: str | None = None
            elif action.startswith("map:"):
                repl = chr(_parse_codepoint(action[4:]))
            else:
                raise FormatError(
                    "cleaning table line %d: unknown action %r" % (lineno, action)
                )
            rules.append((lo, hi, repl))
        return cls(tuple(rules))

    @classmethod
    def load(cls, path) -> "CleaningTable":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                return cls.parse(fh.read())
        except OSError as exc:
            raise IoFailure("cannot read cleaning table %s: %s" % (path, exc))

    def apply(self, cp: int) -> str:
        """Replacement text for one codepoint ('' = drop, first rule wins)."""
        for lo, hi, repl in self.rules:
            if lo <= cp <= hi:
                return repl if repl is not None else ""
        return chr(cp)


@lru_cache(maxsize=1)
def default_cleaning_table() -> CleaningTable:
    text = (
        resources.files("aeckit")
        .joinpath("data/cleaning_default.tsv")
        .read_text(encoding="utf-8")
    )
    return CleaningTable.parse(text)


def normalize(text: str, table: CleaningTable | None = None) -> str:
    """NFC, cleaning table, whitespace collapse. Total: never raises on str
    input; an empty result is legal."""
    if table is None:
        table = default_cleaning_table()
    composed = unicodedata.normalize("NFC", text)
    cleaned = "".join(table.apply(ord(ch)) for ch in composed)
    return SEPARATOR.join(cleaned.split())


# ---------------------------------------------------------------------------
# Syllable segmentation

CONSONANT = "consonant"        # U+1000..U+1021, break before unless glued
STANDALONE = "standalone"      # independent vowels and symbol-words
VOWEL = "vowel"                # dependent vowel signs
FINAL = "final"                # anusvara, dot below, visarga
STACKER = "stacker"            # U+1039, glues the next consonant
ASAT = "asat"                  # U+103A, kills the previous consonant
MEDIAL = "medial"              # U+103B..U+103E
DIGIT = "digit"                # U+1040..U+1049, grouped into runs
PUNCT = "punct"                # U+104A..U+104B, one token each
UNCLASSIFIED = "unclassified"  # Myanmar block codepoints outside the rules
OTHER = "other"                # non-Myanmar, whitespace-tokenized runs

_MYANMAR_CLASSES = (
    (0x1000, 0x1021, CONSONANT),
    (0x1022, 0x102A, STANDALONE),
    (0x102B, 0x1035, VOWEL),
    (0x1036, 0x1038, FINAL),
    (0x1039, 0x1039, STACKER),
    (0x103A, 0x103A, ASAT),
    (0x103B, 0x103E, MEDIAL),
    (0x103F, 0x103F, STANDALONE),
    (0x1040, 0x1049, DIGIT),
    (0x104A, 0x104B, PUNCT),
    (0x104C, 0x104F, STANDALONE),
)


@lru_cache(maxsize=4096)
def codepoint_class(cp: int) -> str:
    """Segmentation class of one codepoint (also used as a CRF feature)."""
    if 0x1000 <= cp <= 0x109F:
        for lo, hi, name in _MYANMAR_CLASSES:
            if lo <= cp <= hi:
                return name
        return UNCLASSIFIED
    return OTHER


def _breaks_before(prev_class: str | None, cls: str, next_class: str | None) -> bool:
    if prev_class is None:
        return True
    if cls == CONSONANT:
        if prev_class == STACKER:
            return False
        # killed or stacked consonant closes the current syllable instead
        return next_class not in (ASAT, STACKER)
    if cls == STANDALONE:
        return prev_class != STACKER
    if cls == DIGIT:
        return prev_class != DIGIT
    if cls == PUNCT:
        return True
    if cls == OTHER:
        return prev_class != OTHER
    return False  # vowels, medials, finals, asat, stacker attach


def segment_syllables(text: str) -> SyllableSequence:
    """Deterministic, lossless syllable segmentation of normalized text.

    Raises:
        CharOutsideRuleSet: a Myanmar-block codepoint the rule table does not
            classify, reported with codepoint and offset.
    """
    tokens: list[str] = []
    current: list[str] = []
    prev_class: str | None = None
    chars = list(text)
    classes = []
    for offset, ch in enumerate(chars):
        if ch == SEPARATOR:
            classes.append(None)
            continue
        cls = codepoint_class(ord(ch))
        if cls == UNCLASSIFIED:
            raise CharOutsideRuleSet(ord(ch), offset)
        classes.append(cls)
    for k, ch in enumerate(chars):
        cls = classes[k]
        if cls is None:  # separator: hard token boundary
            if current:
                tokens.append("".join(current))
                current = []
            prev_class = None
            continue
        next_class = classes[k + 1] if k + 1 < len(chars) else None
        if _breaks_before(prev_class, cls, next_class) and current:
            tokens.append("".join(current))
            current = []
        current.append(ch)
        prev_class = cls
    if current:
        tokens.append("".join(current))
    return SyllableSequence(tuple(tokens))


# ---------------------------------------------------------------------------
# Corpus I/O


def _read_lines(path) -> list[str]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read().split("\n")
    except OSError as exc:
        raise IoFailure("cannot read %s: %s" % (path, exc))


def read_parallel_corpus(
    source_path, target_path, table: CleaningTable | None = None
) -> tuple[list[ParallelPair], CorpusStats, int]:
    """Line-aligned corpus files to pairs; returns (pairs, stats, dropped).

    Line i of each file becomes pair "line-<i>" after normalize and
    segmentation. Pairs where either side cleans to empty are dropped and
    tallied, not fatal.

    Raises:
        LineCountMismatch: files disagree on line count.
        IoFailure: either file cannot be read.
    """
    src_lines = _read_lines(source_path)
    tgt_lines = _read_lines(target_path)
    # a single trailing newline does not count as an extra line
    if src_lines and src_lines[-1] == "":
        src_lines.pop()
    if tgt_lines and tgt_lines[-1] == "":
        tgt_lines.pop()
    if len(src_lines) != len(tgt_lines):
        raise LineCountMismatch(
            "%s has %d lines, %s has %d"
            % (source_path, len(src_lines), target_path, len(tgt_lines))
        )
    pairs = []
    dropped = 0
    src_tokens = 0
    tgt_tokens = 0
    for i, (src_raw, tgt_raw) in enumerate(zip(src_lines, tgt_lines), 1):
        src_norm = normalize(src_raw, table)
        tgt_norm = normalize(tgt_raw, table)
        if not src_norm or not tgt_norm:
            dropped += 1
            continue
        source = segment_syllables(src_norm)
        target = segment_syllables(tgt_norm)
        pairs.append(ParallelPair(source, target, "line-%d" % i))
        src_tokens += len(source)
        tgt_tokens += len(target)
    stats = CorpusStats(len(pairs), src_tokens, tgt_tokens)
    return pairs, stats, dropped


def write_segmented(
    seq: SyllableSequence, annotations: list[str] | None = None
) -> str:
    """One output line: space-separated tokens, optionally "token|annotation".

    Raises:
        LengthMismatch: annotation count differs from token count.
        FormatError: an annotation contains the separator or "|".
    """
    if annotations is None:
        return SEPARATOR.join(seq.tokens)
    if len(annotations) != len(seq.tokens):
        raise LengthMismatch(
            "%d annotations for %d tokens" % (len(annotations), len(seq.tokens))
        )
    for ann in annotations:
        if SEPARATOR in ann or "|" in ann:
            raise FormatError("annotation %r contains a reserved character" % ann)
    return SEPARATOR.join(
        "%s|%s" % (tok, ann) for tok, ann in zip(seq.tokens, annotations)
    )


def parse_segmented_line(
    line: str,
) -> tuple[SyllableSequence, tuple[str, ...] | None]:
    """Inverse of write_segmented. Annotations are all-or-none per line."""
    items = line.split()
    tokens = []
    annotations = []
    for item in items:
        tok, sep, ann = item.partition("|")
        if not tok:
            raise FormatError("empty token in segmented line %r" % line)
        tokens.append(tok)
        if sep:
            annotations.append(ann)
    if annotations and len(annotations) != len(tokens):
        raise FormatError(
            "line %r annotates %d of %d tokens" % (line, len(annotations), len(tokens))
        )
    seq = SyllableSequence(tuple(tokens))
    return seq, tuple(annotations) if annotations else None


def read_segmented_file(
    path,
) -> list[tuple[SyllableSequence, tuple[str, ...] | None]]:
    """All non-empty lines of a segmented (optionally annotated) file."""
    out = []
    for line in _read_lines(path):
        if line.strip():
            out.append(parse_segmented_line(line))
    return out


def write_segmented_file(path, rows) -> None:
    """Write (sequence, annotations-or-None) rows, one line each."""
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for seq, anns in rows:
                fh.write(write_segmented(seq, list(anns) if anns else None))
                fh.write("\n")
    except OSError as exc:
        raise IoFailure("cannot write %s: %s" % (path, exc))

"""Token inventories for the corrector's three input streams.

Source and target share the syllable space but keep separate inventories;
the IPA stream indexes tagger labels. Ids 0..3 of every stream are the
reserved pad/bos/eos/unk tokens, and real tokens follow in sorted order so a
fixed corpus always yields the same tables.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from ..errors import FormatError, IoFailure

PAD_ID = 0
BOS_ID = 1
EOS_ID = 2
UNK_ID = 3

RESERVED = ("<pad>", "<bos>", "<eos>", "<unk>")
UNK_TOKEN = RESERVED[UNK_ID]


def _build_stream(tokens: Iterable[str]) -> tuple:
    seen = sorted(set(tokens) - set(RESERVED))
    return RESERVED + tuple(seen)


@dataclass(frozen=True)
class Vocab:
    source: tuple
    target: tuple
    ipa: tuple

    def __post_init__(self):
        for stream in (self.source, self.target, self.ipa):
            if stream[: len(RESERVED)] != RESERVED:
                raise ValueError("reserved tokens missing from vocabulary head")
            if len(set(stream)) != len(stream):
                raise ValueError("duplicate tokens in vocabulary")
        object.__setattr__(
            self, "_source_index", {t: i for i, t in enumerate(self.source)}
        )
        object.__setattr__(
            self, "_target_index", {t: i for i, t in enumerate(self.target)}
        )
        object.__setattr__(
            self, "_ipa_index", {t: i for i, t in enumerate(self.ipa)}
        )

    @classmethod
    def build(
        cls,
        source_tokens: Iterable[str],
        target_tokens: Iterable[str],
        ipa_labels: Iterable[str],
    ) -> "Vocab":
        return cls(
            source=_build_stream(source_tokens),
            target=_build_stream(target_tokens),
            ipa=_build_stream(ipa_labels),
        )

    def source_id(self, token: str) -> int:
        return self._source_index.get(token, UNK_ID)

    def target_id(self, token: str) -> int:
        return self._target_index.get(token, UNK_ID)

    def ipa_id(self, label: str) -> int:
        return self._ipa_index.get(label, UNK_ID)

    def encode_source(self, tokens: Sequence[str]) -> tuple:
        return tuple(self.source_id(t) for t in tokens)

    def encode_ipa(self, labels: Sequence[str]) -> tuple:
        return tuple(self.ipa_id(t) for t in labels)

    def encode_target(self, tokens: Sequence[str]) -> tuple:
        return tuple(self.target_id(t) for t in tokens)

    def decode_target(self, ids: Sequence[int]) -> tuple:
        out = []
        for i in ids:
            if i in (PAD_ID, BOS_ID, EOS_ID):
                continue
            out.append(self.target[i])
        return tuple(out)


def save_vocab(vocab: Vocab, path) -> None:
    lines = ["aeckit-vocab 1"]
    for name, stream in (
        ("source", vocab.source),
        ("target", vocab.target),
        ("ipa", vocab.ipa),
    ):
        lines.append("%s %d" % (name, len(stream)))
        lines.extend(stream)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoFailure("cannot write vocab %s: %s" % (path, exc))


def load_vocab(path) -> Vocab:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().split("\n")
    except OSError as exc:
        raise IoFailure("cannot read vocab %s: %s" % (path, exc))
    try:
        if lines[0] != "aeckit-vocab 1":
            raise FormatError("not a vocab file: %s" % path)
        pos = 1
        streams = {}
        for name in ("source", "target", "ipa"):
            header, count = lines[pos].split(" ")
            if header != name:
                raise FormatError("expected %s block in %s" % (name, path))
            count = int(count)
            streams[name] = tuple(lines[pos + 1 : pos + 1 + count])
            pos += 1 + count
    except (IndexError, ValueError) as exc:
        raise FormatError("corrupt vocab file %s: %s" % (path, exc))
    return Vocab(source=streams["source"], target=streams["target"], ipa=streams["ipa"])

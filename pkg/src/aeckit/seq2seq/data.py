"""Example containers, token-count batching, and tensor collation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch

from ..errors import DimensionMismatch, SequenceTooLong
from .vocab import BOS_ID, EOS_ID, PAD_ID, Vocab


@dataclass(frozen=True)
class TrainingExample:
    """One (noisy source, IPA labels, clean target) triple.

    links holds source-target alignment pairs (i, j) in 0-indexed token
    coordinates, or None when no alignment supervision exists for the pair.
    The source must be non-empty: a zero-length encoder has nothing for
    cross-attention to look at. An empty target is legal (the decoder then
    learns to emit the end sentinel immediately).
    """

    source: tuple[str, ...]
    ipa: tuple[str, ...]
    target: tuple[str, ...]
    links: frozenset[tuple[int, int]] | None = None

    def __post_init__(self):
        if len(self.source) == 0:
            raise ValueError("empty source sequence")
        if len(self.ipa) != len(self.source):
            raise DimensionMismatch(
                "%d IPA labels for %d source tokens"
                % (len(self.ipa), len(self.source))
            )
        if self.links is not None:
            for i, j in self.links:
                if not (0 <= i < len(self.source) and 0 <= j < len(self.target)):
                    raise ValueError("alignment link (%d, %d) out of range" % (i, j))


@dataclass
class Batch:
    """Padded id tensors plus masks; link_rows[b, j, i] marks source position
    i as linked to the target token supervising decoder row j."""

    src_ids: torch.Tensor
    ipa_ids: torch.Tensor
    tgt_in: torch.Tensor
    tgt_out: torch.Tensor
    src_padding: torch.Tensor
    tgt_padding: torch.Tensor
    link_rows: torch.Tensor
    supervised: torch.Tensor

    def token_count(self) -> int:
        return int((~self.tgt_padding).sum())


def check_lengths(example: TrainingExample, max_len: int) -> None:
    if len(example.source) > max_len:
        raise SequenceTooLong(
            "source length %d exceeds limit %d" % (len(example.source), max_len)
        )
    if len(example.target) > max_len:
        raise SequenceTooLong(
            "target length %d exceeds limit %d" % (len(example.target), max_len)
        )


def make_batches(
    examples: Sequence[TrainingExample], batch_tokens: int = 512
) -> list[list[int]]:
    """Group example indices into batches of roughly batch_tokens tokens.

    Examples are sorted by source length (descending, ties by corpus order)
    so padding waste stays low; each batch takes at least one example and
    stops before the combined source+target token count would pass the
    budget.
    """
    if batch_tokens < 1:
        raise ValueError("batch_tokens must be positive")
    order = sorted(
        range(len(examples)), key=lambda k: (-len(examples[k].source), k)
    )
    batches: list[list[int]] = []
    current: list[int] = []
    current_tokens = 0
    for k in order:
        cost = len(examples[k].source) + len(examples[k].target) + 1
        if current and current_tokens + cost > batch_tokens:
            batches.append(current)
            current = []
            current_tokens = 0
        current.append(k)
        current_tokens += cost
    if current:
        batches.append(current)
    return batches


def epoch_order(n_batches: int, seed: int, epoch: int) -> list[int]:
    """Deterministic batch order for one epoch."""
    rng = np.random.default_rng([seed, epoch])
    return [int(v) for v in rng.permutation(n_batches)]


def collate(
    examples: Sequence[TrainingExample], vocab: Vocab, max_len: int
) -> Batch:
    if not examples:
        raise ValueError("empty batch")
    for ex in examples:
        check_lengths(ex, max_len)
    b = len(examples)
    s = max(len(ex.source) for ex in examples)
    t = max(len(ex.target) for ex in examples) + 1
    src = torch.full((b, s), PAD_ID, dtype=torch.long)
    ipa = torch.full((b, s), PAD_ID, dtype=torch.long)
    tgt_in = torch.full((b, t), PAD_ID, dtype=torch.long)
    tgt_out = torch.full((b, t), PAD_ID, dtype=torch.long)
    link_rows = torch.zeros(b, t, s, dtype=torch.bool)
    for row, ex in enumerate(examples):
        m = len(ex.source)
        src[row, :m] = torch.tensor(vocab.encode_source(ex.source))
        ipa[row, :m] = torch.tensor(vocab.encode_ipa(ex.ipa))
        tgt = vocab.encode_target(ex.target)
        tgt_in[row, 0] = BOS_ID
        if tgt:
            tgt_in[row, 1 : len(tgt) + 1] = torch.tensor(tgt)
            tgt_out[row, : len(tgt)] = torch.tensor(tgt)
        tgt_out[row, len(tgt)] = EOS_ID
        if ex.links is not None:
            for i, j in ex.links:
                link_rows[row, j, i] = True
    src_padding = src.eq(PAD_ID)
    tgt_padding = tgt_out.eq(PAD_ID)
    supervised = link_rows.any(dim=2)
    return Batch(
        src_ids=src,
        ipa_ids=ipa,
        tgt_in=tgt_in,
        tgt_out=tgt_out,
        src_padding=src_padding,
        tgt_padding=tgt_padding,
        link_rows=link_rows,
        supervised=supervised,
    )

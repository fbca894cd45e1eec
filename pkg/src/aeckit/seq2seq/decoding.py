"""Greedy and beam decoding over a trained corrector.

Both strategies run the decoder in eval mode, never emit pad or bos, and
stop at eos or after max_len generated tokens, whichever comes first. Ties
resolve toward the lowest token id so decoding is reproducible bit for bit
across runs and platforms.
"""

from __future__ import annotations

import numpy as np
import torch

from ..errors import SequenceTooLong
from .model import Seq2SeqTransformer
from .vocab import BOS_ID, EOS_ID, PAD_ID, UNK_TOKEN, Vocab


def _prepare_source(model, source_tokens, ipa_tokens, vocab):
    if len(source_tokens) == 0:
        raise ValueError("cannot decode an empty source")
    max_len = model.config.max_len
    if len(source_tokens) > max_len:
        raise SequenceTooLong(
            "source length %d exceeds limit %d" % (len(source_tokens), max_len)
        )
    if ipa_tokens is None:
        # no-IPA ablation: feed the unknown label at every position
        ipa_tokens = [UNK_TOKEN] * len(source_tokens)
    if len(ipa_tokens) != len(source_tokens):
        raise ValueError("IPA stream length differs from source length")
    src = torch.tensor([vocab.encode_source(source_tokens)], dtype=torch.long)
    ipa = torch.tensor([vocab.encode_ipa(ipa_tokens)], dtype=torch.long)
    src_padding = torch.zeros_like(src, dtype=torch.bool)
    return src, ipa, src_padding


def _step_logp(model, memory, src_padding, prefix_ids):
    """Log-probabilities for the next token after the given bos-led prefix."""
    tgt_in = torch.tensor([prefix_ids], dtype=torch.long)
    tgt_padding = torch.zeros_like(tgt_in, dtype=torch.bool)
    logits, _ = model.decode(memory, tgt_in, src_padding, tgt_padding)
    row = torch.log_softmax(logits[0, -1], dim=-1)
    row[PAD_ID] = float("-inf")
    row[BOS_ID] = float("-inf")
    return row.detach().to(torch.float64).numpy()


def greedy_decode(
    model: Seq2SeqTransformer,
    source_tokens,
    ipa_tokens,
    vocab: Vocab,
) -> tuple[str, ...]:
    model.train(False)
    src, ipa, src_padding = _prepare_source(model, source_tokens, ipa_tokens, vocab)
    with torch.no_grad():
        memory = model.encode(src, ipa, src_padding)
        prefix = [BOS_ID]
        out_ids: list[int] = []
        for _ in range(model.config.max_len):
            row = _step_logp(model, memory, src_padding, prefix)
            # np.argmax takes the first maximum, which is the lowest id
            nxt = int(np.argmax(row))
            if nxt == EOS_ID:
                break
            out_ids.append(nxt)
            prefix.append(nxt)
    return vocab.decode_target(out_ids)


def beam_decode(
    model: Seq2SeqTransformer,
    source_tokens,
    ipa_tokens,
    vocab: Vocab,
    beam_size: int = 4,
) -> tuple[str, ...]:
    """Beam search scored by mean log-probability per generated token."""
    if beam_size < 1:
        raise ValueError("beam size must be positive")
    model.train(False)
    src, ipa, src_padding = _prepare_source(model, source_tokens, ipa_tokens, vocab)
    max_len = model.config.max_len

    def rank(cand):
        ids, score, done = cand
        # the eos step counts toward the mean; a forced stop at max_len
        # has no eos step, and that is the only way ids reaches max_len
        steps = len(ids) + (1 if done and len(ids) < max_len else 0)
        return (-(score / max(steps, 1)), ids)

    with torch.no_grad():
        memory = model.encode(src, ipa, src_padding)
        # hypothesis: (generated ids tuple, summed logp, finished flag)
        beams = [((), 0.0, False)]
        for _ in range(max_len + 1):
            if all(done for _, _, done in beams):
                break
            candidates = []
            for ids, score, done in beams:
                if done:
                    candidates.append((ids, score, True))
                    continue
                if len(ids) >= max_len:
                    candidates.append((ids, score, True))
                    continue
                row = _step_logp(model, memory, src_padding, [BOS_ID, *ids])
                order = np.argsort(-row, kind="stable")[: beam_size + 1]
                for tok in order:
                    tok = int(tok)
                    if row[tok] == float("-inf"):
                        continue
                    if tok == EOS_ID:
                        candidates.append((ids, score + row[tok], True))
                    else:
                        candidates.append(((*ids, tok), score + row[tok], False))
            candidates.sort(key=rank)
            beams = candidates[:beam_size]
        best = min(beams, key=rank)
    return vocab.decode_target(list(best[0]))


def decode(
    model: Seq2SeqTransformer,
    source_tokens,
    ipa_tokens,
    vocab: Vocab,
    strategy: str = "greedy",
    beam_size: int = 4,
) -> tuple[str, ...]:
    if strategy == "greedy":
        return greedy_decode(model, source_tokens, ipa_tokens, vocab)
    if strategy == "beam":
        return beam_decode(model, source_tokens, ipa_tokens, vocab, beam_size)
    raise ValueError("unknown decoding strategy %r" % (strategy,))

"""Losses, learning-rate schedule, and the training loop.

The composite objective is label-smoothed token cross-entropy (pads
excluded, normalized by non-pad token count) plus guidance_weight times a
cross-entropy between each supervised decoder row's averaged-head
cross-attention and a uniform distribution over the source positions its
alignment links name. Validation uses plain unsmoothed CE with no guidance
term so early stopping tracks the quantity decoding cares about.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Sequence

import torch

from ..aligner import AlignmentLinkSet
from ..errors import DimensionMismatch, EmptyCorpus
from .data import Batch, TrainingExample, collate, epoch_order, make_batches
from .model import ModelConfig, Seq2SeqTransformer
from .vocab import Vocab

GUIDE_EPS = 1e-9


def noam_lr(step: int, base: float, hidden: int, warmup: int) -> float:
    """base * hidden^-0.5 * min(step^-0.5, step * warmup^-1.5)."""
    if step < 1:
        raise ValueError("schedule steps start at 1")
    return base * hidden ** -0.5 * min(step ** -0.5, step * warmup ** -1.5)


def label_smoothed_ce(
    logits: torch.Tensor,
    targets: torch.Tensor,
    pad_mask: torch.Tensor,
    smoothing: float,
) -> tuple[torch.Tensor, int]:
    """Mean per-token smoothed CE and the token count it averaged over.

    The smoothed reference puts (1 - eps) + eps/|V| on the gold label and
    eps/|V| everywhere else, which folds into the two-term mix below.
    """
    logp = torch.log_softmax(logits, dim=-1)
    nll = -logp.gather(-1, targets.unsqueeze(-1)).squeeze(-1)
    per_token = (1.0 - smoothing) * nll + smoothing * (-logp.mean(dim=-1))
    keep = ~pad_mask
    count = int(keep.sum())
    loss = (per_token * keep).sum() / max(count, 1)
    return loss, count


def _guidance_from_rows(
    probs: torch.Tensor, link_rows: torch.Tensor, eps: float = GUIDE_EPS
) -> torch.Tensor:
    """probs (..., T, S) attention rows; link_rows same shape, boolean.

    Rows with no marked position are skipped; the rest score the row
    against a uniform reference over the marked positions, and the batch
    result is the plain mean over every supervised row.
    """
    supervised = link_rows.any(dim=-1)
    if not bool(supervised.any()):
        return probs.sum() * 0.0
    counts = link_rows.sum(dim=-1).clamp(min=1)
    neg_log = -torch.log(probs.clamp(min=eps))
    row_ce = (neg_log * link_rows).sum(dim=-1) / counts
    return row_ce[supervised].mean()


def guided_attention_loss(attn, alignment: AlignmentLinkSet) -> float:
    """Score one attention matrix (target rows by source columns) against
    an alignment; see module docstring for the reference distribution."""
    probs = torch.as_tensor(attn, dtype=torch.float64)
    if probs.shape != (alignment.n, alignment.m):
        raise DimensionMismatch(
            "attention shape %s does not match alignment %d x %d"
            % (tuple(probs.shape), alignment.n, alignment.m)
        )
    link_rows = torch.zeros(alignment.n, alignment.m, dtype=torch.bool)
    for i, j in alignment.links:
        link_rows[j, i] = True
    return float(_guidance_from_rows(probs, link_rows))


def forward_batch(model: Seq2SeqTransformer, batch: Batch, mode: str = "eval"):
    """Run the model over a collated batch in the named dropout mode."""
    if mode not in ("train", "eval"):
        raise ValueError("mode must be train or eval")
    model.train(mode == "train")
    return model(
        batch.src_ids,
        batch.ipa_ids,
        batch.tgt_in,
        batch.src_padding,
        batch.tgt_padding,
    )


def compute_loss(
    model: Seq2SeqTransformer,
    batch: Batch,
    smoothing: float | None = None,
    guidance_weight: float | None = None,
    mode: str = "train",
) -> tuple[torch.Tensor, dict]:
    """Composite objective on one batch; parts reported for curves."""
    config = model.config
    if smoothing is None:
        smoothing = config.label_smoothing
    if guidance_weight is None:
        guidance_weight = config.guidance_weight
    logits, attn = forward_batch(model, batch, mode)
    ce, count = label_smoothed_ce(
        logits, batch.tgt_out, batch.tgt_padding, smoothing
    )
    guide = _guidance_from_rows(attn, batch.link_rows)
    total = ce + guidance_weight * guide
    parts = {
        "ce": float(ce.detach()),
        "guidance": float(guide.detach()),
        "total": float(total.detach()),
        "tokens": count,
    }
    return total, parts


def training_loss(
    model: Seq2SeqTransformer, batch: Batch
) -> tuple[float, dict[str, torch.Tensor]]:
    """Objective value plus exact gradients for every parameter."""
    model.zero_grad(set_to_none=True)
    total, _ = compute_loss(model, batch, mode="eval")
    params = dict(model.named_parameters())
    grads = torch.autograd.grad(
        total, list(params.values()), allow_unused=True
    )
    out = {}
    for name, grad in zip(params, grads):
        out[name] = (
            torch.zeros_like(params[name]) if grad is None else grad.detach()
        )
    return float(total.detach()), out


def validation_ce(
    model: Seq2SeqTransformer,
    batches: Sequence[Batch],
) -> float:
    """Token-weighted unsmoothed CE over held-out batches, dropout off."""
    total = 0.0
    tokens = 0
    with torch.no_grad():
        for batch in batches:
            logits, _ = forward_batch(model, batch, "eval")
            ce, count = label_smoothed_ce(
                logits, batch.tgt_out, batch.tgt_padding, 0.0
            )
            total += float(ce) * count
            tokens += count
    if tokens == 0:
        raise EmptyCorpus("validation split holds no target tokens")
    return total / tokens


@dataclass(frozen=True)
class TrainerConfig:
    base_lr: float = 1.0
    warmup: int = 400
    accumulation: int = 1
    max_epochs: int = 40
    patience: int = 5
    batch_tokens: int = 512
    max_steps: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.base_lr <= 0 or self.warmup < 1 or self.accumulation < 1:
            raise ValueError("bad optimizer settings")
        if self.max_epochs < 1 or self.patience < 1 or self.batch_tokens < 1:
            raise ValueError("bad loop settings")


@dataclass
class TrainingResult:
    model: Seq2SeqTransformer
    curve: list[dict] = field(default_factory=list)
    best_val: float = math.inf
    best_epoch: int = -1
    steps: int = 0


def train(
    model: Seq2SeqTransformer,
    train_examples: Sequence[TrainingExample],
    val_examples: Sequence[TrainingExample],
    vocab: Vocab,
    trainer: TrainerConfig,
) -> TrainingResult:
    """Adam + Noam schedule with gradient accumulation and early stopping.

    Validation runs once per epoch; training stops after trainer.patience
    epochs without a new best, and the best-validation parameters are
    restored before returning. Every random choice (dropout, batch order)
    derives from trainer.seed, so two runs with the one seed produce
    identical curves and parameters.
    """
    if not train_examples:
        raise EmptyCorpus("no training examples")
    if not val_examples:
        raise EmptyCorpus("no validation examples")
    config = model.config
    torch.manual_seed(trainer.seed)

    groups = make_batches(train_examples, trainer.batch_tokens)
    train_batches = [
        collate([train_examples[k] for k in group], vocab, config.max_len)
        for group in groups
    ]
    val_groups = make_batches(val_examples, trainer.batch_tokens)
    val_batches = [
        collate([val_examples[k] for k in group], vocab, config.max_len)
        for group in val_groups
    ]

    optimizer = torch.optim.Adam(
        model.parameters(), lr=0.0, betas=(0.9, 0.98), eps=1e-9
    )
    result = TrainingResult(model=model)
    best_state = copy.deepcopy(model.state_dict())
    stale = 0
    step = 0
    stop = False
    for epoch in range(trainer.max_epochs):
        model.train(True)
        epoch_loss = 0.0
        epoch_batches = 0
        pending = 0
        optimizer.zero_grad(set_to_none=True)
        for pos in epoch_order(len(train_batches), trainer.seed, epoch):
            batch = train_batches[pos]
            total, parts = compute_loss(model, batch, mode="train")
            (total / trainer.accumulation).backward()
            pending += 1
            epoch_loss += parts["total"]
            epoch_batches += 1
            if pending == trainer.accumulation:
                step += 1
                lr = noam_lr(step, trainer.base_lr, config.hidden, trainer.warmup)
                for group in optimizer.param_groups:
                    group["lr"] = lr
                optimizer.step()
                optimizer.zero_grad(set_to_none=True)
                pending = 0
                if trainer.max_steps is not None and step >= trainer.max_steps:
                    stop = True
                    break
        if pending:
            step += 1
            lr = noam_lr(step, trainer.base_lr, config.hidden, trainer.warmup)
            for group in optimizer.param_groups:
                group["lr"] = lr
            optimizer.step()
            optimizer.zero_grad(set_to_none=True)
        val = validation_ce(model, val_batches)
        result.curve.append(
            {
                "epoch": epoch,
                "train_loss": epoch_loss / max(epoch_batches, 1),
                "val_ce": val,
                "steps": step,
            }
        )
        if val < result.best_val - 1e-12:
            result.best_val = val
            result.best_epoch = epoch
            best_state = copy.deepcopy(model.state_dict())
            stale = 0
        else:
            stale += 1
        if stop or stale >= trainer.patience:
            break
    model.load_state_dict(best_state)
    model.train(False)
    result.steps = step
    return result

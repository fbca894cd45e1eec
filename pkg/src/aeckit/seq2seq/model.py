"""Pre-norm Transformer encoder-decoder with IPA fusion on the source side.

Source embeddings are the output of a small MLP over the concatenation of
the word embedding and the IPA-label embedding (the IPA stream can be
disabled by setting its width to zero, which reduces the MLP input to the
word embedding alone). The decoder's cross-attention probabilities at one
configured layer are exposed so an external alignment can supervise them.

Source sequences carry no sentinel tokens: encoder position i is exactly
source token i, which keeps alignment link indices and attention columns in
the same coordinate system. Target sequences are framed bos ... eos on the
decoder side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn

from ..errors import DimensionMismatch


@dataclass(frozen=True)
class ModelConfig:
    """Architecture and loss hyperparameters.

    guided_layer defaults to the penultimate decoder layer (layer 0 for a
    two-layer decoder); pass an explicit index to supervise another one.
    """

    layers: int = 2
    hidden: int = 64
    ff: int = 256
    heads: int = 4
    word_emb_dim: int = 64
    ipa_emb_dim: int = 16
    dropout: float = 0.1
    attn_dropout: float = 0.1
    label_smoothing: float = 0.1
    max_len: int = 64
    guided_layer: int | None = None
    guidance_weight: float = 0.3

    def __post_init__(self):
        if self.layers < 1 or self.hidden < 1 or self.ff < 1 or self.heads < 1:
            raise ValueError("layers, hidden, ff, and heads must be positive")
        if self.hidden % self.heads != 0:
            raise ValueError("hidden must be divisible by heads")
        if self.word_emb_dim < 1 or self.ipa_emb_dim < 0:
            raise ValueError("bad embedding widths")
        if self.max_len < 1:
            raise ValueError("max_len must be at least 1")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ValueError("label smoothing must lie in [0, 1)")
        if self.guidance_weight < 0.0:
            raise ValueError("guidance weight must be non-negative")
        if self.guided_layer is None:
            object.__setattr__(self, "guided_layer", max(self.layers - 2, 0))
        if not 0 <= self.guided_layer < self.layers:
            raise ValueError("guided layer index outside decoder depth")


class SinusoidalPositions(nn.Module):
    """Fixed sin/cos table added to embeddings; no learned state."""

    def __init__(self, hidden: int, size: int):
        super().__init__()
        position = torch.arange(size, dtype=torch.float64).unsqueeze(1)
        rate = torch.exp(
            torch.arange(0, hidden, 2, dtype=torch.float64)
            * (-math.log(10000.0) / hidden)
        )
        table = torch.zeros(size, hidden, dtype=torch.float64)
        table[:, 0::2] = torch.sin(position * rate)
        table[:, 1::2] = torch.cos(position * rate[: hidden // 2])
        self.register_buffer("table", table.to(torch.float32))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.table[: x.shape[1]].to(x.dtype)


class FusionMLP(nn.Module):
    """One tanh hidden layer over concat(word, ipa), projected to hidden."""

    def __init__(self, word_dim: int, ipa_dim: int, hidden: int):
        super().__init__()
        self.word_dim = word_dim
        self.ipa_dim = ipa_dim
        self.inner = nn.Linear(word_dim + ipa_dim, hidden)
        self.outer = nn.Linear(hidden, hidden)

    def forward(self, word: torch.Tensor, ipa: torch.Tensor | None) -> torch.Tensor:
        if self.ipa_dim == 0:
            x = word
        else:
            x = torch.cat([word, ipa], dim=-1)
        return self.outer(torch.tanh(self.inner(x)))


def fuse_embeddings(
    word_emb: torch.Tensor, ipa_emb: torch.Tensor | None, mlp: FusionMLP
) -> torch.Tensor:
    """Contractual entry point for the fusion step with dimension checks."""
    if word_emb.shape[-1] != mlp.word_dim:
        raise DimensionMismatch(
            "word embedding width %d, expected %d"
            % (word_emb.shape[-1], mlp.word_dim)
        )
    if mlp.ipa_dim == 0:
        if ipa_emb is not None and ipa_emb.shape[-1] != 0:
            raise DimensionMismatch("IPA stream disabled but embedding given")
        return mlp(word_emb, None)
    if ipa_emb is None or ipa_emb.shape[-1] != mlp.ipa_dim:
        raise DimensionMismatch(
            "IPA embedding width %s, expected %d"
            % ("none" if ipa_emb is None else ipa_emb.shape[-1], mlp.ipa_dim)
        )
    return mlp(word_emb, ipa_emb)


class MultiHeadAttention(nn.Module):
    """Scaled dot-product attention that hands back its probabilities.

    Returned probabilities are post-softmax and pre-dropout, so rows sum to
    one; dropout applies only to the value mixture.
    """

    def __init__(self, hidden: int, heads: int, attn_dropout: float):
        super().__init__()
        self.heads = heads
        self.head_dim = hidden // heads
        self.q_proj = nn.Linear(hidden, hidden)
        self.k_proj = nn.Linear(hidden, hidden)
        self.v_proj = nn.Linear(hidden, hidden)
        self.out_proj = nn.Linear(hidden, hidden)
        self.dropout = nn.Dropout(attn_dropout)

    def forward(
        self,
        query: torch.Tensor,
        key: torch.Tensor,
        value: torch.Tensor,
        key_padding: torch.Tensor | None = None,
        causal: bool = False,
    ):
        b, tq, hidden = query.shape
        tk = key.shape[1]

        def split(x, t):
            return x.view(b, t, self.heads, self.head_dim).transpose(1, 2)

        q = split(self.q_proj(query), tq)
        k = split(self.k_proj(key), tk)
        v = split(self.v_proj(value), tk)
        scores = (q @ k.transpose(-2, -1)) / math.sqrt(self.head_dim)
        if key_padding is not None:
            scores = scores.masked_fill(
                key_padding[:, None, None, :], float("-inf")
            )
        if causal:
            future = torch.triu(
                torch.ones(tq, tk, dtype=torch.bool, device=scores.device), 1
            )
            scores = scores.masked_fill(future[None, None], float("-inf"))
        probs = torch.softmax(scores, dim=-1)
        mixed = self.dropout(probs) @ v
        out = mixed.transpose(1, 2).reshape(b, tq, hidden)
        return self.out_proj(out), probs


class FeedForward(nn.Module):
    def __init__(self, hidden: int, ff: int, dropout: float):
        super().__init__()
        self.inner = nn.Linear(hidden, ff)
        self.outer = nn.Linear(ff, hidden)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x):
        return self.outer(self.dropout(torch.relu(self.inner(x))))


class EncoderLayer(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.norm_attn = nn.LayerNorm(config.hidden)
        self.attn = MultiHeadAttention(
            config.hidden, config.heads, config.attn_dropout
        )
        self.norm_ff = nn.LayerNorm(config.hidden)
        self.ff = FeedForward(config.hidden, config.ff, config.dropout)
        self.dropout = nn.Dropout(config.dropout)

    def forward(self, x, src_padding):
        h = self.norm_attn(x)
        attn_out, _ = self.attn(h, h, h, key_padding=src_padding)
        x = x + self.dropout(attn_out)
        x = x + self.dropout(self.ff(self.norm_ff(x)))
        return x


class DecoderLayer(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.norm_self = nn.LayerNorm(config.hidden)
        self.self_attn = MultiHeadAttention(
            config.hidden, config.heads, config.attn_dropout
        )
        self.norm_cross = nn.LayerNorm(config.hidden)
        self.cross_attn = MultiHeadAttention(
            config.hidden, config.heads, config.attn_dropout
        )
        self.norm_ff = nn.LayerNorm(config.hidden)
        self.ff = FeedForward(config.hidden, config.ff, config.dropout)
        self.dropout = nn.Dropout(config.dropout)

    def forward(self, x, memory, src_padding, tgt_padding):
        h = self.norm_self(x)
        self_out, _ = self.self_attn(
            h, h, h, key_padding=tgt_padding, causal=True
        )
        x = x + self.dropout(self_out)
        h = self.norm_cross(x)
        cross_out, cross_probs = self.cross_attn(
            h, memory, memory, key_padding=src_padding
        )
        x = x + self.dropout(cross_out)
        x = x + self.dropout(self.ff(self.norm_ff(x)))
        return x, cross_probs


class Seq2SeqTransformer(nn.Module):
    """Encoder-decoder over id tensors; returns logits and the averaged-head
    cross-attention of the guided decoder layer."""

    def __init__(self, config: ModelConfig, n_source: int, n_target: int, n_ipa: int):
        super().__init__()
        self.config = config
        self.n_source = n_source
        self.n_target = n_target
        self.n_ipa = n_ipa
        self.src_word_emb = nn.Embedding(n_source, config.word_emb_dim, padding_idx=0)
        if config.ipa_emb_dim > 0:
            self.ipa_emb = nn.Embedding(n_ipa, config.ipa_emb_dim, padding_idx=0)
        else:
            self.ipa_emb = None
        self.fusion = FusionMLP(
            config.word_emb_dim, config.ipa_emb_dim, config.hidden
        )
        self.tgt_emb = nn.Embedding(n_target, config.hidden, padding_idx=0)
        self.positions = SinusoidalPositions(config.hidden, config.max_len + 2)
        self.emb_dropout = nn.Dropout(config.dropout)
        self.encoder_layers = nn.ModuleList(
            EncoderLayer(config) for _ in range(config.layers)
        )
        self.encoder_norm = nn.LayerNorm(config.hidden)
        self.decoder_layers = nn.ModuleList(
            DecoderLayer(config) for _ in range(config.layers)
        )
        self.decoder_norm = nn.LayerNorm(config.hidden)
        self.out_proj = nn.Linear(config.hidden, n_target)
        self.scale = math.sqrt(config.hidden)

    def encode(self, src_ids, ipa_ids, src_padding):
        word = self.src_word_emb(src_ids)
        ipa = self.ipa_emb(ipa_ids) if self.ipa_emb is not None else None
        x = self.fusion(word, ipa) * self.scale
        x = self.emb_dropout(self.positions(x))
        for layer in self.encoder_layers:
            x = layer(x, src_padding)
        return self.encoder_norm(x)

    def decode(self, memory, tgt_in_ids, src_padding, tgt_padding):
        x = self.tgt_emb(tgt_in_ids) * self.scale
        x = self.emb_dropout(self.positions(x))
        guided_probs = None
        for idx, layer in enumerate(self.decoder_layers):
            x, cross_probs = layer(x, memory, src_padding, tgt_padding)
            if idx == self.config.guided_layer:
                guided_probs = cross_probs.mean(dim=1)
        x = self.decoder_norm(x)
        return self.out_proj(x), guided_probs

    def forward(self, src_ids, ipa_ids, tgt_in_ids, src_padding, tgt_padding):
        memory = self.encode(src_ids, ipa_ids, src_padding)
        return self.decode(memory, tgt_in_ids, src_padding, tgt_padding)


def build_model(
    config: ModelConfig, n_source: int, n_target: int, n_ipa: int, seed: int = 0
) -> Seq2SeqTransformer:
    """Construct with all parameters drawn from a fixed torch seed."""
    torch.manual_seed(seed)
    return Seq2SeqTransformer(config, n_source, n_target, n_ipa)

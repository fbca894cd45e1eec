"""Transformer corrector: model, data plumbing, training, decoding."""

from .checkpoint import (
    CheckpointBundle,
    load_checkpoint,
    restore_optimizer,
    save_checkpoint,
)
from .data import Batch, TrainingExample, collate, epoch_order, make_batches
from .decoding import beam_decode, decode, greedy_decode
from .model import (
    FusionMLP,
    ModelConfig,
    MultiHeadAttention,
    Seq2SeqTransformer,
    build_model,
    fuse_embeddings,
)
from .training import (
    TrainerConfig,
    TrainingResult,
    compute_loss,
    forward_batch,
    guided_attention_loss,
    label_smoothed_ce,
    noam_lr,
    train,
    training_loss,
    validation_ce,
)
from .vocab import (
    BOS_ID,
    EOS_ID,
    PAD_ID,
    UNK_ID,
    UNK_TOKEN,
    Vocab,
    load_vocab,
    save_vocab,
)

__all__ = [
    "Batch",
    "BOS_ID",
    "CheckpointBundle",
    "EOS_ID",
    "FusionMLP",
    "ModelConfig",
    "MultiHeadAttention",
    "PAD_ID",
    "Seq2SeqTransformer",
    "TrainerConfig",
    "TrainingExample",
    "TrainingResult",
    "UNK_ID",
    "UNK_TOKEN",
    "Vocab",
    "beam_decode",
    "build_model",
    "collate",
    "compute_loss",
    "decode",
    "epoch_order",
    "forward_batch",
    "fuse_embeddings",
    "greedy_decode",
    "guided_attention_loss",
    "label_smoothed_ce",
    "load_checkpoint",
    "load_vocab",
    "make_batches",
    "noam_lr",
    "restore_optimizer",
    "save_checkpoint",
    "save_vocab",
    "train",
    "training_loss",
    "validation_ce",
]

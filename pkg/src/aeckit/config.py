"""Run configuration.

One INI file drives every stage of the pipeline. All keys are optional;
missing keys fall back to desk-scale defaults that finish on a single CPU
core. Seeds stored inside sub-configs (noise profile, trainer) are
placeholders: at run time each stage derives its own seed from the one
root seed, so a single integer reproduces the whole run.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
import os
from dataclasses import dataclass

from .errors import FormatError, IoFailure
from .errorsim import NoiseProfile
from .seq2seq import ModelConfig, TrainerConfig

ENV_CONFIG = "AECKIT_CONFIG"

FEATURE_SETTINGS = ("aec", "aec+ipa", "aec+align", "aec+ipa+align")


@dataclass(frozen=True)
class CrfSettings:
    # max_sentences caps the training subsample; 0 trains on everything.
    # The tagger saturates long before desk-scale corpora run out, and
    # L-BFGS cost grows linearly with the corpus.
    l2_lambda: float = 1e-2
    max_iter: int = 200
    tol: float = 1e-5
    max_sentences: int = 600

    def __post_init__(self):
        if self.l2_lambda < 0:
            raise ValueError("l2_lambda must be >= 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be > 0")
        if self.max_sentences < 0:
            raise ValueError("max_sentences must be >= 0")


@dataclass(frozen=True)
class AlignerSettings:
    sweeps: int = 5
    tension: float = 4.0
    p0: float = 0.08
    fit_tension: bool = True
    heuristic: str = "grow-diag-final-and"

    def __post_init__(self):
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")
        if self.tension <= 0:
            raise ValueError("tension must be > 0")
        if not 0 <= self.p0 < 1:
            raise ValueError("p0 must be in [0, 1)")
        if self.heuristic not in ("intersection", "union", "grow-diag-final-and"):
            raise ValueError("unknown heuristic %r" % self.heuristic)


@dataclass(frozen=True)
class DecodeSettings:
    # beam is the default: greedy decoding on a corrector this small tends
    # to wander off into fluent rewrites once a prefix goes wrong, and a
    # small beam recovers most of that headroom for pennies.
    strategy: str = "beam"
    beam_size: int = 4

    def __post_init__(self):
        if self.strategy not in ("greedy", "beam"):
            raise ValueError("unknown decode strategy %r" % self.strategy)
        if self.beam_size < 1:
            raise ValueError("beam_size must be >= 1")


@dataclass(frozen=True)
class MetricSettings:
    char_n: int = 6
    word_n: int = 2
    beta: float = 2.0

    def __post_init__(self):
        if self.char_n < 1 or self.word_n < 0:
            raise ValueError("bad n-gram orders")
        if self.beta <= 0:
            raise ValueError("beta must be > 0")


@dataclass(frozen=True)
class PipelineConfig:
    """Everything one end-to-end run needs.

    ground_truth/tagged point at a user corpus (raw text, token|label);
    both empty means the built-in grammar generates ``sentences`` rows.
    """

    ground_truth: str = ""
    tagged: str = ""
    out_dir: str = "runs"
    seed: int = 0
    threads: int = 1
    sentences: int = 4000
    train_frac: float = 0.8
    val_frac: float = 0.1
    noise: NoiseProfile = NoiseProfile(0.10, 0.05, 0.05)
    crf: CrfSettings = CrfSettings()
    aligner: AlignerSettings = AlignerSettings()
    model: ModelConfig = None
    trainer: TrainerConfig = None
    decode: DecodeSettings = DecodeSettings()
    metrics: MetricSettings = MetricSettings()

    def __post_init__(self):
        if self.model is None:
            object.__setattr__(self, "model", default_model_config())
        if self.trainer is None:
            object.__setattr__(self, "trainer", default_trainer_config())
        if bool(self.ground_truth) != bool(self.tagged):
            raise ValueError(
                "ground_truth and tagged must be given together (or neither)"
            )
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.sentences < 10:
            raise ValueError("need at least 10 sentences")
        if not 0 < self.train_frac < 1 or not 0 < self.val_frac < 1:
            raise ValueError("split fractions must be in (0, 1)")
        if self.train_frac + self.val_frac >= 1:
            raise ValueError("train_frac + val_frac must leave a test split")


def default_model_config() -> ModelConfig:
    # light regularization: desk corpora are small but synthetic-noise
    # pairs are plentiful relative to model size, and heavier dropout or
    # smoothing was measurably costing exact-match repairs
    return ModelConfig(
        layers=2,
        hidden=64,
        ff=256,
        heads=4,
        word_emb_dim=64,
        ipa_emb_dim=16,
        dropout=0.05,
        attn_dropout=0.05,
        label_smoothing=0.05,
        max_len=64,
        guidance_weight=0.3,
    )


def default_trainer_config() -> TrainerConfig:
    return TrainerConfig(
        base_lr=1.0,
        warmup=400,
        accumulation=1,
        max_epochs=60,
        patience=15,
        batch_tokens=512,
    )


def default_config() -> PipelineConfig:
    return PipelineConfig()


_BOOL = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


class _Section:
    """One INI section with typed getters and leftover-key detection."""

    def __init__(self, name, items):
        self.name = name
        self.items = dict(items)

    def _pop(self, key):
        return self.items.pop(key, None)

    def get_str(self, key, default):
        raw = self._pop(key)
        return default if raw is None else raw.strip()

    def get_int(self, key, default):
        raw = self._pop(key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise FormatError("[%s] %s: not an integer: %r" % (self.name, key, raw))

    def get_float(self, key, default):
        raw = self._pop(key)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise FormatError("[%s] %s: not a number: %r" % (self.name, key, raw))

    def get_bool(self, key, default):
        raw = self._pop(key)
        if raw is None:
            return default
        try:
            return _BOOL[raw.strip().lower()]
        except KeyError:
            raise FormatError("[%s] %s: not a boolean: %r" % (self.name, key, raw))

    def get_opt_int(self, key):
        # empty or "none" means unset
        raw = self._pop(key)
        if raw is None or raw.strip().lower() in ("", "none", "auto"):
            return None
        try:
            return int(raw)
        except ValueError:
            raise FormatError("[%s] %s: not an integer: %r" % (self.name, key, raw))

    def finish(self):
        if self.items:
            raise FormatError(
                "unknown key(s) in [%s]: %s"
                % (self.name, ", ".join(sorted(self.items)))
            )


_SECTIONS = (
    "paths",
    "pipeline",
    "noise",
    "crf",
    "aligner",
    "model",
    "trainer",
    "decode",
    "metrics",
)


def parse_config(text: str) -> PipelineConfig:
    """Parse INI text into a validated PipelineConfig."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise FormatError("bad config syntax: %s" % exc)
    for name in parser.sections():
        if name not in _SECTIONS:
            raise FormatError("unknown config section [%s]" % name)

    def section(name):
        items = parser.items(name) if parser.has_section(name) else []
        return _Section(name, items)

    base = default_config()
    mdl = default_model_config()
    trn = default_trainer_config()

    paths = section("paths")
    ground_truth = paths.get_str("ground_truth", "")
    tagged = paths.get_str("tagged", "")
    out_dir = paths.get_str("out_dir", base.out_dir)
    paths.finish()

    pipe = section("pipeline")
    seed = pipe.get_int("seed", base.seed)
    threads = pipe.get_int("threads", base.threads)
    sentences = pipe.get_int("sentences", base.sentences)
    train_frac = pipe.get_float("train_frac", base.train_frac)
    val_frac = pipe.get_float("val_frac", base.val_frac)
    pipe.finish()

    noi = section("noise")
    noise_kwargs = dict(
        p_sub=noi.get_float("p_sub", base.noise.p_sub),
        p_del=noi.get_float("p_del", base.noise.p_del),
        p_ins=noi.get_float("p_ins", base.noise.p_ins),
        confusion_mode=noi.get_str("confusion_mode", base.noise.confusion_mode),
        phonetic_temperature=noi.get_float(
            "phonetic_temperature", base.noise.phonetic_temperature
        ),
    )
    noi.finish()

    crf = section("crf")
    crf_kwargs = dict(
        l2_lambda=crf.get_float("l2_lambda", base.crf.l2_lambda),
        max_iter=crf.get_int("max_iter", base.crf.max_iter),
        tol=crf.get_float("tol", base.crf.tol),
        max_sentences=crf.get_int("max_sentences", base.crf.max_sentences),
    )
    crf.finish()

    ali = section("aligner")
    aligner_kwargs = dict(
        sweeps=ali.get_int("sweeps", base.aligner.sweeps),
        tension=ali.get_float("tension", base.aligner.tension),
        p0=ali.get_float("p0", base.aligner.p0),
        fit_tension=ali.get_bool("fit_tension", base.aligner.fit_tension),
        heuristic=ali.get_str("heuristic", base.aligner.heuristic),
    )
    ali.finish()

    msec = section("model")
    model_kwargs = dict(
        layers=msec.get_int("layers", mdl.layers),
        hidden=msec.get_int("hidden", mdl.hidden),
        ff=msec.get_int("ff", mdl.ff),
        heads=msec.get_int("heads", mdl.heads),
        word_emb_dim=msec.get_int("word_emb_dim", mdl.word_emb_dim),
        ipa_emb_dim=msec.get_int("ipa_emb_dim", mdl.ipa_emb_dim),
        dropout=msec.get_float("dropout", mdl.dropout),
        attn_dropout=msec.get_float("attn_dropout", mdl.attn_dropout),
        label_smoothing=msec.get_float("label_smoothing", mdl.label_smoothing),
        max_len=msec.get_int("max_len", mdl.max_len),
        guided_layer=msec.get_opt_int("guided_layer"),
        guidance_weight=msec.get_float("guidance_weight", mdl.guidance_weight),
    )
    msec.finish()

    tsec = section("trainer")
    trainer_kwargs = dict(
        base_lr=tsec.get_float("base_lr", trn.base_lr),
        warmup=tsec.get_int("warmup", trn.warmup),
        accumulation=tsec.get_int("accumulation", trn.accumulation),
        max_epochs=tsec.get_int("max_epochs", trn.max_epochs),
        patience=tsec.get_int("patience", trn.patience),
        batch_tokens=tsec.get_int("batch_tokens", trn.batch_tokens),
        max_steps=tsec.get_opt_int("max_steps"),
    )
    tsec.finish()

    dsec = section("decode")
    decode_kwargs = dict(
        strategy=dsec.get_str("strategy", base.decode.strategy),
        beam_size=dsec.get_int("beam_size", base.decode.beam_size),
    )
    dsec.finish()

    met = section("metrics")
    metric_kwargs = dict(
        char_n=met.get_int("char_n", base.metrics.char_n),
        word_n=met.get_int("word_n", base.metrics.word_n),
        beta=met.get_float("beta", base.metrics.beta),
    )
    met.finish()

    try:
        return PipelineConfig(
            ground_truth=ground_truth,
            tagged=tagged,
            out_dir=out_dir,
            seed=seed,
            threads=threads,
            sentences=sentences,
            train_frac=train_frac,
            val_frac=val_frac,
            noise=NoiseProfile(**noise_kwargs),
            crf=CrfSettings(**crf_kwargs),
            aligner=AlignerSettings(**aligner_kwargs),
            model=ModelConfig(**model_kwargs),
            trainer=TrainerConfig(**trainer_kwargs),
            decode=DecodeSettings(**decode_kwargs),
            metrics=MetricSettings(**metric_kwargs),
        )
    except ValueError as exc:
        raise FormatError("invalid config value: %s" % exc)


def load_config(path) -> PipelineConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoFailure("cannot read config %s: %s" % (path, exc))
    return parse_config(text)


def resolve_config(path=None) -> PipelineConfig:
    """Config from an explicit path, the environment, or defaults."""
    if path is None:
        path = os.environ.get(ENV_CONFIG) or None
    if path is None:
        return default_config()
    return load_config(path)


def apply_overrides(config: PipelineConfig, seed=None, threads=None, out_dir=None):
    """Command-line flags win over file values."""
    updates = {}
    if seed is not None:
        updates["seed"] = seed
    if threads is not None:
        if threads < 1:
            raise FormatError("threads must be >= 1")
        updates["threads"] = threads
    if out_dir is not None:
        updates["out_dir"] = str(out_dir)
    return dataclasses.replace(config, **updates) if updates else config


def format_config(config: PipelineConfig) -> str:
    """Serialize back to INI with every value explicit.

    The run directory stores this resolved form so a run can be repeated
    from its own artifacts.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser["paths"] = {
        "ground_truth": config.ground_truth,
        "tagged": config.tagged,
        "out_dir": config.out_dir,
    }
    parser["pipeline"] = {
        "seed": str(config.seed),
        "threads": str(config.threads),
        "sentences": str(config.sentences),
        "train_frac": repr(float(config.train_frac)),
        "val_frac": repr(float(config.val_frac)),
    }
    parser["noise"] = {
        "p_sub": repr(float(config.noise.p_sub)),
        "p_del": repr(float(config.noise.p_del)),
        "p_ins": repr(float(config.noise.p_ins)),
        "confusion_mode": config.noise.confusion_mode,
        "phonetic_temperature": repr(float(config.noise.phonetic_temperature)),
    }
    parser["crf"] = {
        "l2_lambda": repr(float(config.crf.l2_lambda)),
        "max_iter": str(config.crf.max_iter),
        "tol": repr(float(config.crf.tol)),
        "max_sentences": str(config.crf.max_sentences),
    }
    parser["aligner"] = {
        "sweeps": str(config.aligner.sweeps),
        "tension": repr(float(config.aligner.tension)),
        "p0": repr(float(config.aligner.p0)),
        "fit_tension": str(config.aligner.fit_tension).lower(),
        "heuristic": config.aligner.heuristic,
    }
    parser["model"] = {
        "layers": str(config.model.layers),
        "hidden": str(config.model.hidden),
        "ff": str(config.model.ff),
        "heads": str(config.model.heads),
        "word_emb_dim": str(config.model.word_emb_dim),
        "ipa_emb_dim": str(config.model.ipa_emb_dim),
        "dropout": repr(float(config.model.dropout)),
        "attn_dropout": repr(float(config.model.attn_dropout)),
        "label_smoothing": repr(float(config.model.label_smoothing)),
        "max_len": str(config.model.max_len),
        "guided_layer": str(config.model.guided_layer),
        "guidance_weight": repr(float(config.model.guidance_weight)),
    }
    parser["trainer"] = {
        "base_lr": repr(float(config.trainer.base_lr)),
        "warmup": str(config.trainer.warmup),
        "accumulation": str(config.trainer.accumulation),
        "max_epochs": str(config.trainer.max_epochs),
        "patience": str(config.trainer.patience),
        "batch_tokens": str(config.trainer.batch_tokens),
        "max_steps": "none" if config.trainer.max_steps is None else str(config.trainer.max_steps),
    }
    parser["decode"] = {
        "strategy": config.decode.strategy,
        "beam_size": str(config.decode.beam_size),
    }
    parser["metrics"] = {
        "char_n": str(config.metrics.char_n),
        "word_n": str(config.metrics.word_n),
        "beta": repr(float(config.metrics.beta)),
    }
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()

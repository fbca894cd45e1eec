"""End-to-end run orchestration.

A run owns a directory. Stages execute in a fixed order — prepare,
segment, simulate, tag, align, split, train, correct, evaluate — and every
intermediate artifact lands in that directory as a plain file, so any
stage's output can be inspected or re-used by the matching standalone
command. The run finishes by writing a manifest that hashes every file it
produced.

Determinism contract: one root seed. Each stochastic stage derives its own
seed from the root by hashing a fixed label, the derived values are
recorded in the manifest, and no artifact embeds a timestamp, so two runs
with the same root seed and inputs write byte-identical trees.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import platform
from dataclasses import dataclass
from itertools import chain

import matplotlib
import numpy as np
import torch

from . import __version__, toygrammar
from .aligner import (
    AlignmentLinkSet,
    symmetrize,
    train_aligner,
    save_alignment_model,
    viterbi_align,
    write_alignment_file,
)
from .config import FEATURE_SETTINGS, PipelineConfig, format_config
from .errors import AeckitError, EmptyCorpus, IoFailure
from .errorsim import (
    build_phonetic_confusions,
    generate_corpus,
    save_channel_stats,
    save_noise_profile,
)
from .g2ipa import crf_decode, crf_train, load_tagged_corpus, save_crf_model
from .metrics import evaluate_corpus, write_report
from .reporting import ComparisonRow, render_comparison_figures, write_comparison
from .seq2seq import (
    UNK_TOKEN,
    TrainingExample,
    Vocab,
    build_model,
    decode,
    save_checkpoint,
    train,
)
from .textcore import ParallelPair, SyllableSequence, segment_syllables, write_segmented_file


class StageError(AeckitError):
    """A pipeline stage failed; carries the stage name and original error."""

    def __init__(self, stage, cause):
        super().__init__("stage %s failed: %s" % (stage, cause))
        self.stage = stage
        self.cause = cause


def derive_seed(root_seed: int, label: str) -> int:
    """Stable per-stage seed: first four bytes of a keyed hash."""
    digest = hashlib.sha256(("%d:%s" % (root_seed, label)).encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big")


def hash_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


@dataclass(frozen=True)
class PipelineResult:
    run_dir: str
    manifest: dict
    comparison: tuple


def _setting_flags(setting: str) -> tuple[bool, bool]:
    flags = setting.split("+")
    return "ipa" in flags, "align" in flags


def _read_nonempty_lines(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoFailure("cannot read corpus %s: %s" % (path, exc))
    return [line for line in text.split("\n") if line.strip()]


def _dominant_labels(tagged_rows):
    # most frequent label per token, ties to the lexicographically smallest
    counts = {}
    for tokens, labels in tagged_rows:
        for token, label in zip(tokens, labels):
            counts.setdefault(token, {})
            counts[token][label] = counts[token].get(label, 0) + 1
    return {
        token: min(by_label, key=lambda lab: (-by_label[lab], lab))
        for token, by_label in counts.items()
    }


def _transpose(links: AlignmentLinkSet) -> AlignmentLinkSet:
    return AlignmentLinkSet(
        frozenset((j, i) for i, j in links.links), links.n, links.m
    )


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    """Execute every stage into config.out_dir and return the summary.

    Raises StageError naming the failing stage; the original exception is
    kept as ``cause`` so callers can distinguish data problems from bugs.
    """
    run_dir = config.out_dir
    os.makedirs(run_dir, exist_ok=True)
    torch.set_num_threads(config.threads)

    def path(name):
        return os.path.join(run_dir, name)

    seeds = {}

    def seed_for(label):
        seeds[label] = derive_seed(config.seed, label)
        return seeds[label]

    state = {}
    inputs = {}

    def stage(name, fn):
        try:
            fn()
        except StageError:
            raise
        except Exception as exc:
            raise StageError(name, exc) from exc

    def prepare():
        with open(path("config.ini"), "w", encoding="utf-8") as fh:
            fh.write(format_config(config))
        if config.ground_truth:
            lines = _read_nonempty_lines(config.ground_truth)
            tagged = load_tagged_corpus(config.tagged)
            inputs[str(config.ground_truth)] = hash_file(config.ground_truth)
            inputs[str(config.tagged)] = hash_file(config.tagged)
            with open(path("gt.txt"), "w", encoding="utf-8") as fh:
                fh.write("\n".join(lines) + "\n")
        else:
            rows = toygrammar.generate(config.sentences, seed=seed_for("grammar"))
            toygrammar.write_text_file(rows, path("gt.txt"))
            lines = _read_nonempty_lines(path("gt.txt"))
            tagged = [(tokens, labels) for tokens, labels in rows]
        if not lines:
            raise EmptyCorpus("ground-truth corpus has no sentences")
        toygrammar.write_tagged_file(tagged, path("gt.tagged"))
        state["gt_lines"] = lines
        state["tagged"] = tagged

    def segment():
        seqs = [segment_syllables(line) for line in state["gt_lines"]]
        write_segmented_file(path("gt.segmented"), [(seq, None) for seq in seqs])
        state["gt_seqs"] = seqs

    def simulate():
        profile = dataclasses.replace(config.noise, seed=seed_for("noise"))
        confusions = None
        if profile.confusion_mode == "phonetic":
            labels = _dominant_labels(state["tagged"])
            vocab = sorted({t for seq in state["gt_seqs"] for t in seq})
            confusions = build_phonetic_confusions(
                vocab,
                [labels.get(token, "") for token in vocab],
                profile.phonetic_temperature,
            )
        pairs, stats = generate_corpus(state["gt_seqs"], profile, confusions)
        save_noise_profile(profile, path("channel.profile"))
        save_channel_stats(stats, path("channel.stats"))
        write_segmented_file(
            path("err.segmented"), [(pair.source, None) for pair in pairs]
        )
        state["pairs"] = pairs
        state["stats"] = stats

    def tag():
        corpus = [(tuple(t), tuple(l)) for t, l in state["tagged"]]
        cap = config.crf.max_sentences
        if cap:
            corpus = corpus[:cap]
        model = crf_train(
            corpus,
            l2_lambda=config.crf.l2_lambda,
            max_iter=config.crf.max_iter,
            tol=config.crf.tol,
            seed=seed_for("crf"),
        )
        save_crf_model(model, path("ipa.crf"))
        labels = []
        for pair in state["pairs"]:
            tokens = tuple(pair.source)
            if not tokens:
                labels.append(())
                continue
            tagged = crf_decode(model, tokens)
            labels.append(tuple(model.tagset.label(i) for i in tagged.labels))
        write_segmented_file(
            path("err.tagged"),
            [
                (pair.source, list(labs))
                for pair, labs in zip(state["pairs"], labels)
            ],
        )
        state["err_labels"] = labels

    def align():
        pairs = state["pairs"]
        usable = [i for i, pair in enumerate(pairs) if len(pair.source) > 0]
        if not usable:
            raise EmptyCorpus("every corrupted sentence is empty")
        forward_corpus = [pairs[i] for i in usable]
        reverse_corpus = [
            ParallelPair(source=pair.target, target=pair.source, id=pair.id)
            for pair in forward_corpus
        ]
        kwargs = dict(
            sweeps=config.aligner.sweeps,
            tension=config.aligner.tension,
            p0=config.aligner.p0,
            fit_tension=config.aligner.fit_tension,
        )
        forward_model, _ = train_aligner(forward_corpus, **kwargs)
        reverse_model, _ = train_aligner(reverse_corpus, **kwargs)
        save_alignment_model(forward_model, path("align.forward.model"))
        save_alignment_model(reverse_model, path("align.reverse.model"))
        links = []
        for pair, swapped in zip(forward_corpus, reverse_corpus):
            fwd = viterbi_align(forward_model, pair)
            rev = viterbi_align(reverse_model, swapped)
            links.append(symmetrize(fwd, _transpose(rev), config.aligner.heuristic))
        by_index = {}
        for i, link_set in zip(usable, links):
            by_index[i] = link_set
        full = [
            by_index.get(
                i, AlignmentLinkSet(frozenset(), 0, len(pairs[i].target))
            )
            for i in range(len(pairs))
        ]
        write_alignment_file(path("alignments.txt"), full)
        state["links"] = full

    def split():
        n = len(state["pairs"])
        rng = np.random.default_rng([seed_for("split"), 0])
        perm = [int(i) for i in rng.permutation(n)]
        n_train = int(n * config.train_frac)
        n_val = int(n * config.val_frac)
        roles = {}
        for pos, idx in enumerate(perm):
            if pos < n_train:
                roles[idx] = "train"
            elif pos < n_train + n_val:
                roles[idx] = "val"
            else:
                roles[idx] = "test"
        if min(n_train, n_val, n - n_train - n_val) < 1:
            raise EmptyCorpus("split leaves an empty partition")
        with open(path("splits.tsv"), "w", encoding="utf-8") as fh:
            for i, pair in enumerate(state["pairs"]):
                fh.write("%s\t%s\n" % (pair.id, roles[i]))
        state["roles"] = roles

    def _examples(role, use_ipa, use_align):
        rows = []
        for i, pair in enumerate(state["pairs"]):
            if state["roles"][i] != role:
                continue
            source = tuple(pair.source)
            if not source:
                continue
            ipa = state["err_labels"][i] if use_ipa else (UNK_TOKEN,) * len(source)
            links = frozenset(state["links"][i].links) if use_align else None
            rows.append(
                TrainingExample(
                    source=source, ipa=ipa, target=tuple(pair.target), links=links
                )
            )
        return rows

    def train_settings():
        pairs = state["pairs"]
        train_idx = [
            i
            for i, pair in enumerate(pairs)
            if state["roles"][i] == "train" and len(pair.source) > 0
        ]
        vocab = Vocab.build(
            chain.from_iterable(tuple(pairs[i].source) for i in train_idx),
            chain.from_iterable(tuple(pairs[i].target) for i in train_idx),
            chain.from_iterable(state["err_labels"][i] for i in train_idx),
        )
        state["vocab"] = vocab
        state["models"] = {}
        for setting in FEATURE_SETTINGS:
            use_ipa, use_align = _setting_flags(setting)
            train_rows = _examples("train", use_ipa, use_align)
            val_rows = _examples("val", use_ipa, use_align)
            model = build_model(
                config.model,
                len(vocab.source),
                len(vocab.target),
                len(vocab.ipa),
                seed=seed_for("init:" + setting),
            )
            trainer = dataclasses.replace(
                config.trainer, seed=seed_for("train:" + setting)
            )
            result = train(model, train_rows, val_rows, vocab, trainer)
            save_checkpoint(
                path("corrector-%s.ckpt" % setting),
                result.model,
                vocab,
                training={
                    "setting": setting,
                    "best_val": result.best_val,
                    "best_epoch": result.best_epoch,
                    "steps": result.steps,
                    "curve": result.curve,
                },
            )
            state["models"][setting] = result.model

    def correct():
        vocab = state["vocab"]
        test_idx = [
            i for i in range(len(state["pairs"])) if state["roles"][i] == "test"
        ]
        state["test_idx"] = test_idx
        state["corrected"] = {}
        for setting in FEATURE_SETTINGS:
            use_ipa, _ = _setting_flags(setting)
            model = state["models"][setting]
            outputs = []
            for i in test_idx:
                source = tuple(state["pairs"][i].source)
                if not source:
                    outputs.append(())
                    continue
                ipa = state["err_labels"][i] if use_ipa else None
                outputs.append(
                    decode(
                        model,
                        source,
                        ipa,
                        vocab,
                        strategy=config.decode.strategy,
                        beam_size=config.decode.beam_size,
                    )
                )
            write_segmented_file(
                path("corrected-%s.segmented" % setting),
                [(SyllableSequence(tokens), None) for tokens in outputs],
            )
            state["corrected"][setting] = outputs

    def evaluate():
        pairs = state["pairs"]
        test_idx = state["test_idx"]
        ids = [pairs[i].id for i in test_idx]
        refs = [tuple(pairs[i].target) for i in test_idx]
        metric_kwargs = dict(
            char_n=config.metrics.char_n,
            word_n=config.metrics.word_n,
            beta=config.metrics.beta,
        )
        baseline = evaluate_corpus(
            [(ref, tuple(pairs[i].source)) for ref, i in zip(refs, test_idx)],
            ids=ids,
            **metric_kwargs,
        )
        write_report(baseline, path("report-uncorrected.tsv"))
        rows = [
            ComparisonRow("uncorrected", baseline.corpus_wer, baseline.corpus_chrf)
        ]
        for setting in FEATURE_SETTINGS:
            report = evaluate_corpus(
                list(zip(refs, state["corrected"][setting])),
                ids=ids,
                **metric_kwargs,
            )
            write_report(report, path("report-%s.tsv" % setting))
            rows.append(
                ComparisonRow(setting, report.corpus_wer, report.corpus_chrf)
            )
        write_comparison(rows, path("comparison.tsv"))
        render_comparison_figures(rows, path("wer.png"), path("chrf.png"))
        state["comparison"] = tuple(rows)

    stage("prepare", prepare)
    stage("segment", segment)
    stage("simulate", simulate)
    stage("tag", tag)
    stage("align", align)
    stage("split", split)
    stage("train", train_settings)
    stage("correct", correct)
    stage("evaluate", evaluate)

    stats = state["stats"]
    manifest = {
        "root_seed": config.seed,
        "stage_seeds": seeds,
        "threads": config.threads,
        "inputs": inputs,
        "settings": list(FEATURE_SETTINGS),
        "counts": {
            "sentences": stats.sentences,
            "gt_tokens": stats.gt_tokens,
            "empty_corrupted": stats.empty_outputs,
            "train": sum(1 for r in state["roles"].values() if r == "train"),
            "val": sum(1 for r in state["roles"].values() if r == "val"),
            "test": sum(1 for r in state["roles"].values() if r == "test"),
        },
        "versions": {
            "aeckit": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "torch": torch.__version__,
            "matplotlib": matplotlib.__version__,
        },
        "outputs": {},
    }
    for name in sorted(os.listdir(run_dir)):
        full = os.path.join(run_dir, name)
        if name == "manifest.json" or not os.path.isfile(full):
            continue
        manifest["outputs"][name] = hash_file(full)
    with open(path("manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return PipelineResult(
        run_dir=run_dir, manifest=manifest, comparison=state["comparison"]
    )

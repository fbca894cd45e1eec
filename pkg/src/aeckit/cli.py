"""Command line entry points.

One binary, one subcommand per pipeline stage plus ``pipeline`` for the
whole run. Every command reads its settings from the resolved config
(explicit --config flag, else the AECKIT_CONFIG environment variable,
else defaults) with individual flags winning over the file.

Exit codes: 0 success, 1 usage error, 2 data error (bad or missing input
files), 3 internal error. Failures print the failing stage to stderr.
"""

from __future__ import annotations

import dataclasses
import os
import sys

import click
import numpy as np
import torch

from . import __version__
from .aligner import (
    AlignmentLinkSet,
    read_alignment_file,
    symmetrize,
    train_aligner,
    viterbi_align,
    write_alignment_file,
)
from .config import (
    ENV_CONFIG,
    FEATURE_SETTINGS,
    apply_overrides,
    resolve_config,
)
from .errors import (
    AeckitError,
    DataError,
    EmptyCorpus,
    IoFailure,
    LineCountMismatch,
)
from .errorsim import generate_corpus, load_noise_profile, save_channel_stats
from .g2ipa import crf_decode, crf_train, load_crf_model, load_tagged_corpus, save_crf_model
from .metrics import evaluate_corpus, write_report
from .pipeline import StageError, derive_seed, run_pipeline
from .reporting import ComparisonRow, render_comparison_figures
from .seq2seq import (
    TrainingExample,
    UNK_TOKEN,
    Vocab,
    build_model,
    decode as decode_sequence,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .textcore import (
    ParallelPair,
    SyllableSequence,
    parse_segmented_line,
    segment_syllables,
    write_segmented,
)


def _stage(name, fn):
    try:
        return fn()
    except StageError:
        raise
    except click.ClickException:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def _read_lines(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().split("\n")
    except OSError as exc:
        raise IoFailure("cannot read %s: %s" % (path, exc))
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def _read_segmented_keeping_blanks(path):
    """Segmented rows with blank lines kept as empty sequences.

    Parallel artifacts identify sentences by line number, so a corrupted
    sentence that lost every token must stay a (blank) line.
    """
    rows = []
    for line in _read_lines(path):
        if line.strip():
            rows.append(parse_segmented_line(line))
        else:
            rows.append((SyllableSequence(()), None))
    return rows


def _write_lines(path, lines):
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for line in lines:
                fh.write(line)
                fh.write("\n")
    except OSError as exc:
        raise IoFailure("cannot write %s: %s" % (path, exc))


def _require_parallel(left, right, what):
    if len(left) != len(right):
        raise LineCountMismatch(
            "%s: %d lines vs %d lines" % (what, len(left), len(right))
        )


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option(
    "--config",
    "config_path",
    default=None,
    metavar="PATH",
    help="Config file (INI). Default: $%s, else built-in defaults." % ENV_CONFIG,
)
@click.option("--seed", type=int, default=None, help="Override the root seed.")
@click.option("--threads", type=int, default=None, help="CPU threads for tensor ops.")
@click.option("--out-dir", default=None, metavar="DIR", help="Run directory for pipeline.")
@click.version_option(__version__, prog_name="aeckit")
@click.pass_context
def cli(ctx, config_path, seed, threads, out_dir):
    """Error-correction toolkit for syllable-level ASR output."""

    def load():
        cfg = resolve_config(config_path)
        return apply_overrides(cfg, seed=seed, threads=threads, out_dir=out_dir)

    ctx.obj = _stage("config", load)


@cli.command()
@click.argument("input_path")
@click.argument("output_path")
def segment(input_path, output_path):
    """Split raw text into syllable tokens, one segmented line per input line."""

    def body():
        out = []
        for line in _read_lines(input_path):
            if line.strip():
                out.append(write_segmented(segment_syllables(line)))
            else:
                out.append("")
        _write_lines(output_path, out)

    _stage("segment", body)


@cli.command("train-crf")
@click.argument("tagged_path")
@click.argument("model_path")
@click.pass_obj
def train_crf(cfg, tagged_path, model_path):
    """Train the phonetic tagger on a token|label corpus."""

    def body():
        corpus = load_tagged_corpus(tagged_path)
        if cfg.crf.max_sentences:
            corpus = corpus[: cfg.crf.max_sentences]
        model = crf_train(
            corpus,
            l2_lambda=cfg.crf.l2_lambda,
            max_iter=cfg.crf.max_iter,
            tol=cfg.crf.tol,
            seed=derive_seed(cfg.seed, "crf"),
        )
        save_crf_model(model, model_path)

    _stage("train-crf", body)


@cli.command("tag-ipa")
@click.argument("model_path")
@click.argument("input_path")
@click.argument("output_path")
def tag_ipa(model_path, input_path, output_path):
    """Tag a segmented file with phonetic labels (token|label lines)."""

    def body():
        model = load_crf_model(model_path)
        out = []
        for seq, _ in _read_segmented_keeping_blanks(input_path):
            tokens = tuple(seq)
            if not tokens:
                out.append("")
                continue
            tagged = crf_decode(model, tokens)
            labels = [model.tagset.label(i) for i in tagged.labels]
            out.append(write_segmented(seq, labels))
        _write_lines(output_path, out)

    _stage("tag-ipa", body)


@cli.command()
@click.argument("gt_path")
@click.argument("profile_path")
@click.argument("output_path")
def simulate(gt_path, profile_path, output_path):
    """Corrupt a ground-truth text through the noise channel.

    Writes the corrupted corpus in segmented form plus channel statistics
    alongside (same name, .stats suffix).
    """

    def body():
        profile = load_noise_profile(profile_path)
        seqs = [
            segment_syllables(line)
            for line in _read_lines(gt_path)
            if line.strip()
        ]
        pairs, stats = generate_corpus(seqs, profile)
        _write_lines(output_path, [write_segmented(p.source) for p in pairs])
        save_channel_stats(stats, os.path.splitext(output_path)[0] + ".stats")

    _stage("simulate", body)


@cli.command()
@click.argument("source_path")
@click.argument("target_path")
@click.argument("output_path")
@click.pass_obj
def align(cfg, source_path, target_path, output_path):
    """Align parallel segmented corpora; one link line per sentence pair."""

    def body():
        src_rows = _read_segmented_keeping_blanks(source_path)
        tgt_rows = _read_segmented_keeping_blanks(target_path)
        _require_parallel(src_rows, tgt_rows, "source vs target")
        pairs = [
            ParallelPair(source=s, target=t, id="line-%d" % (k + 1))
            for k, ((s, _), (t, _)) in enumerate(zip(src_rows, tgt_rows))
        ]
        usable = [p for p in pairs if len(p.source) > 0 and len(p.target) > 0]
        if not usable:
            raise EmptyCorpus("no alignable sentence pairs")
        swapped = [
            ParallelPair(source=p.target, target=p.source, id=p.id) for p in usable
        ]
        kwargs = dict(
            sweeps=cfg.aligner.sweeps,
            tension=cfg.aligner.tension,
            p0=cfg.aligner.p0,
            fit_tension=cfg.aligner.fit_tension,
        )
        forward_model, _ = train_aligner(usable, **kwargs)
        reverse_model, _ = train_aligner(swapped, **kwargs)
        by_id = {}
        for pair, rev_pair in zip(usable, swapped):
            fwd = viterbi_align(forward_model, pair)
            rev = viterbi_align(reverse_model, rev_pair)
            rev_t = AlignmentLinkSet(
                frozenset((j, i) for i, j in rev.links), rev.n, rev.m
            )
            by_id[pair.id] = symmetrize(fwd, rev_t, cfg.aligner.heuristic)
        out = [
            by_id.get(
                p.id, AlignmentLinkSet(frozenset(), len(p.source), len(p.target))
            )
            for p in pairs
        ]
        write_alignment_file(output_path, out)

    _stage("align", body)


def _load_examples(source_path, target_path, tags_path, alignments_path, use_ipa, use_align):
    src_rows = _read_segmented_keeping_blanks(source_path)
    tgt_rows = _read_segmented_keeping_blanks(target_path)
    _require_parallel(src_rows, tgt_rows, "source vs target")
    if tags_path is not None:
        tag_rows = _read_segmented_keeping_blanks(tags_path)
        _require_parallel(src_rows, tag_rows, "source vs tags")
    else:
        tag_rows = src_rows
    dims = [(len(s), len(t)) for (s, _), (t, _) in zip(src_rows, tgt_rows)]
    if alignments_path is not None:
        link_sets = read_alignment_file(alignments_path, dims)
    else:
        link_sets = [AlignmentLinkSet(frozenset(), m, n) for m, n in dims]
    examples = []
    for (src, _), (tgt, _), (tag_seq, anns), links in zip(
        src_rows, tgt_rows, tag_rows, link_sets
    ):
        source = tuple(src)
        if not source:
            continue
        if use_ipa:
            if anns is None:
                raise DataError(
                    "feature setting needs phonetic tags but line has none"
                )
            if len(anns) != len(source):
                raise LineCountMismatch(
                    "%d tags for %d source tokens" % (len(anns), len(source))
                )
            ipa = tuple(anns)
        else:
            ipa = (UNK_TOKEN,) * len(source)
        examples.append(
            TrainingExample(
                source=source,
                ipa=ipa,
                target=tuple(tgt),
                links=frozenset(links.links) if use_align else None,
            )
        )
    if not examples:
        raise EmptyCorpus("no usable training pairs")
    return examples


@cli.command("train-aec")
@click.argument("source_path")
@click.argument("target_path")
@click.argument("checkpoint_path")
@click.option(
    "--features",
    type=click.Choice(FEATURE_SETTINGS),
    default="aec",
    show_default=True,
    help="Input features for the corrector.",
)
@click.option("--tags", "tags_path", default=None, metavar="PATH",
              help="token|label file for the source side (defaults to source annotations).")
@click.option("--alignments", "alignments_path", default=None, metavar="PATH",
              help="Link file from the align command.")
@click.pass_obj
def train_aec(cfg, source_path, target_path, checkpoint_path, features, tags_path, alignments_path):
    """Train a corrector on parallel segmented corpora."""
    use_ipa = "ipa" in features.split("+")
    use_align = "align" in features.split("+")
    if use_align and alignments_path is None:
        raise click.UsageError("--alignments is required for %s" % features)

    def body():
        torch.set_num_threads(cfg.threads)
        examples = _load_examples(
            source_path, target_path,
            tags_path if use_ipa else None,
            alignments_path if use_align else None,
            use_ipa, use_align,
        )
        rng_seed = derive_seed(cfg.seed, "cli-train-split")
        order = np.random.default_rng([rng_seed, 0]).permutation(len(examples))
        n_val = max(1, int(len(examples) * cfg.val_frac))
        if n_val >= len(examples):
            raise EmptyCorpus("corpus too small to hold out validation pairs")
        val_idx = set(int(i) for i in order[:n_val])
        train_rows = [ex for k, ex in enumerate(examples) if k not in val_idx]
        val_rows = [ex for k, ex in enumerate(examples) if k in val_idx]
        vocab = Vocab.build(
            (t for ex in train_rows for t in ex.source),
            (t for ex in train_rows for t in ex.target),
            (t for ex in train_rows for t in ex.ipa),
        )
        model = build_model(
            cfg.model,
            len(vocab.source),
            len(vocab.target),
            len(vocab.ipa),
            seed=derive_seed(cfg.seed, "init:" + features),
        )
        trainer = dataclasses.replace(
            cfg.trainer, seed=derive_seed(cfg.seed, "train:" + features)
        )
        result = train(model, train_rows, val_rows, vocab, trainer)
        save_checkpoint(
            checkpoint_path,
            result.model,
            vocab,
            training={
                "setting": features,
                "best_val": result.best_val,
                "best_epoch": result.best_epoch,
                "steps": result.steps,
                "curve": result.curve,
            },
        )

    _stage("train-aec", body)


@cli.command()
@click.argument("checkpoint_path")
@click.argument("input_path")
@click.argument("output_path")
@click.pass_obj
def correct(cfg, checkpoint_path, input_path, output_path):
    """Decode corrections for a segmented (optionally tagged) corpus."""

    def body():
        torch.set_num_threads(cfg.threads)
        bundle = load_checkpoint(checkpoint_path)
        out = []
        for seq, anns in _read_segmented_keeping_blanks(input_path):
            source = tuple(seq)
            if not source:
                out.append("")
                continue
            tokens = decode_sequence(
                bundle.model,
                source,
                tuple(anns) if anns is not None else None,
                bundle.vocab,
                strategy=cfg.decode.strategy,
                beam_size=cfg.decode.beam_size,
            )
            out.append(write_segmented(SyllableSequence(tokens)))
        _write_lines(output_path, out)

    _stage("correct", body)


@cli.command()
@click.argument("reference_path")
@click.argument("hypothesis_path")
@click.argument("report_path")
@click.pass_obj
def evaluate(cfg, reference_path, hypothesis_path, report_path):
    """Score hypothesis against reference; writes the report and a figure."""

    def body():
        ref_rows = _read_segmented_keeping_blanks(reference_path)
        hyp_rows = _read_segmented_keeping_blanks(hypothesis_path)
        _require_parallel(ref_rows, hyp_rows, "reference vs hypothesis")
        pairs = [
            (tuple(r), tuple(h)) for (r, _), (h, _) in zip(ref_rows, hyp_rows)
        ]
        report = evaluate_corpus(
            pairs,
            char_n=cfg.metrics.char_n,
            word_n=cfg.metrics.word_n,
            beta=cfg.metrics.beta,
        )
        write_report(report, report_path)
        stem = os.path.splitext(report_path)[0]
        rows = [ComparisonRow("evaluated", report.corpus_wer, report.corpus_chrf)]
        render_comparison_figures(rows, stem + ".wer.png", stem + ".chrf.png")
        click.echo(
            "wer %.6f chrf %.6f over %d sentences"
            % (report.corpus_wer, report.corpus_chrf, len(report.sentences))
        )

    _stage("evaluate", body)


@cli.command()
@click.pass_obj
def pipeline(cfg):
    """Run every stage into the configured run directory."""
    result = run_pipeline(cfg)
    click.echo("run directory: %s" % result.run_dir)
    for row in result.comparison:
        click.echo(
            "%-16s wer %.6f  chrf %.6f" % (row.setting, row.wer, row.chrf)
        )


def main(argv=None) -> int:
    """Dispatch with the documented exit codes."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        click.echo(exc.format_message(), err=True)
        return 1
    except StageError as exc:
        click.echo(str(exc), err=True)
        return 2 if isinstance(exc.cause, DataError) else 3
    except DataError as exc:
        click.echo(str(exc), err=True)
        return 2
    except AeckitError as exc:
        click.echo(str(exc), err=True)
        return 3
    except Exception as exc:  # pragma: no cover - defensive
        click.echo("internal error: %s" % exc, err=True)
        return 3


if __name__ == "__main__":
    sys.exit(main())

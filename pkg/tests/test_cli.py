"""Command-line surface: exit codes, stage naming, the documented workflow.

Commands run in-process through main(argv) so exit codes and stderr are
asserted directly without spawning interpreters.
"""

import os

import pytest

from aeckit import toygrammar
from aeckit.cli import main
from aeckit.config import ENV_CONFIG
from aeckit.errorsim import NoiseProfile, save_noise_profile

TINY_INI = """
[crf]
max_iter = 15
max_sentences = 0

[aligner]
sweeps = 1

[model]
layers = 1
hidden = 32
ff = 64
heads = 2
word_emb_dim = 32
ipa_emb_dim = 8
dropout = 0.0
attn_dropout = 0.0
label_smoothing = 0.05

[trainer]
warmup = 20
max_epochs = 1
patience = 1

[decode]
strategy = greedy
"""


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Corpus files plus a tiny config, shared by the workflow tests."""
    root = tmp_path_factory.mktemp("cli")
    rows = toygrammar.generate(40, seed=5)
    toygrammar.write_text_file(rows, root / "gt.txt")
    toygrammar.write_tagged_file(rows, root / "gt.tagged")
    profile = NoiseProfile(0.10, 0.05, 0.05, seed=9)
    save_noise_profile(profile, root / "noise.profile")
    (root / "tiny.ini").write_text(TINY_INI, encoding="utf-8")
    return root


def run(workdir, *argv):
    return main(["--config", str(workdir / "tiny.ini"), *map(str, argv)])


class TestWorkflow:
    """The full manual chain, each command exiting 0."""

    def test_segment(self, workdir):
        assert run(workdir, "segment", workdir / "gt.txt", workdir / "gt.seg") == 0
        lines = (workdir / "gt.seg").read_text(encoding="utf-8").splitlines()
        assert len(lines) == 40
        assert all(" " in line for line in lines)

    def test_segment_is_idempotent(self, workdir):
        first = (workdir / "gt.seg").read_bytes()
        assert run(workdir, "segment", workdir / "gt.txt", workdir / "gt.seg") == 0
        assert (workdir / "gt.seg").read_bytes() == first

    def test_train_crf(self, workdir):
        assert (
            run(workdir, "train-crf", workdir / "gt.tagged", workdir / "ipa.crf")
            == 0
        )
        assert (workdir / "ipa.crf").stat().st_size > 0

    def test_simulate(self, workdir):
        assert (
            run(
                workdir,
                "simulate",
                workdir / "gt.txt",
                workdir / "noise.profile",
                workdir / "err.seg",
            )
            == 0
        )
        lines = (workdir / "err.seg").read_text(encoding="utf-8").splitlines()
        assert len(lines) == 40
        assert (workdir / "err.stats").exists()

    def test_tag_ipa(self, workdir):
        assert (
            run(
                workdir,
                "tag-ipa",
                workdir / "ipa.crf",
                workdir / "err.seg",
                workdir / "err.tagged",
            )
            == 0
        )
        lines = (workdir / "err.tagged").read_text(encoding="utf-8").splitlines()
        assert len(lines) == 40
        assert all("|" in line for line in lines if line.strip())

    def test_align(self, workdir):
        assert (
            run(
                workdir,
                "align",
                workdir / "err.seg",
                workdir / "gt.seg",
                workdir / "links.txt",
            )
            == 0
        )
        lines = (workdir / "links.txt").read_text(encoding="utf-8").splitlines()
        assert len(lines) == 40

    def test_train_aec_full_features(self, workdir):
        rc = run(
            workdir,
            "train-aec",
            workdir / "err.seg",
            workdir / "gt.seg",
            workdir / "model.ckpt",
            "--features",
            "aec+ipa+align",
            "--tags",
            workdir / "err.tagged",
            "--alignments",
            workdir / "links.txt",
        )
        assert rc == 0
        assert (workdir / "model.ckpt").stat().st_size > 0

    def test_correct(self, workdir):
        rc = run(
            workdir,
            "correct",
            workdir / "model.ckpt",
            workdir / "err.tagged",
            workdir / "fixed.seg",
        )
        assert rc == 0
        lines = (workdir / "fixed.seg").read_text(encoding="utf-8").splitlines()
        assert len(lines) == 40

    def test_evaluate(self, workdir, capsys):
        rc = run(
            workdir,
            "evaluate",
            workdir / "gt.seg",
            workdir / "fixed.seg",
            workdir / "scores.tsv",
        )
        assert rc == 0
        out = capsys.readouterr().out
        assert "wer " in out and "chrf " in out and "over 40 sentences" in out
        assert (workdir / "scores.tsv").exists()
        assert (workdir / "scores.wer.png").exists()
        assert (workdir / "scores.chrf.png").exists()


class TestExitCodes:
    def test_success_is_zero(self, workdir, tmp_path):
        assert run(workdir, "segment", workdir / "gt.txt", tmp_path / "o.seg") == 0

    def test_missing_input_is_two_and_names_the_stage(self, workdir, tmp_path, capsys):
        rc = run(workdir, "segment", tmp_path / "absent.txt", tmp_path / "o.seg")
        assert rc == 2
        err = capsys.readouterr().err
        assert "stage segment failed" in err

    def test_unknown_command_is_one(self, capsys):
        assert main(["frobnicate"]) == 1
        assert capsys.readouterr().err

    def test_bad_flag_value_is_one(self, capsys):
        assert main(["--seed", "banana", "pipeline"]) == 1

    def test_align_features_require_alignments_flag(self, workdir, capsys):
        rc = run(
            workdir,
            "train-aec",
            workdir / "err.seg",
            workdir / "gt.seg",
            workdir / "m.ckpt",
            "--features",
            "aec+align",
        )
        assert rc == 1
        assert "--alignments" in capsys.readouterr().err

    def test_unknown_feature_setting_is_one(self, workdir, capsys):
        rc = run(
            workdir,
            "train-aec",
            workdir / "err.seg",
            workdir / "gt.seg",
            workdir / "m.ckpt",
            "--features",
            "telepathy",
        )
        assert rc == 1

    def test_line_count_mismatch_is_two(self, workdir, tmp_path, capsys):
        short = tmp_path / "short.seg"
        lines = (workdir / "gt.seg").read_text(encoding="utf-8").splitlines()
        short.write_text("\n".join(lines[:5]) + "\n", encoding="utf-8")
        rc = run(workdir, "evaluate", workdir / "gt.seg", short, tmp_path / "r.tsv")
        assert rc == 2
        assert "stage evaluate failed" in capsys.readouterr().err

    def test_missing_config_file_is_two(self, tmp_path, capsys):
        rc = main(
            ["--config", str(tmp_path / "absent.ini"), "segment", "a", "b"]
        )
        assert rc == 2
        assert "stage config failed" in capsys.readouterr().err

    def test_help_and_version_are_zero(self, capsys):
        assert main(["--help"]) == 0
        assert "pipeline" in capsys.readouterr().out
        assert main(["--version"]) == 0
        assert "aeckit" in capsys.readouterr().out


class TestConfigResolution:
    def test_env_var_is_honored(self, workdir, tmp_path, monkeypatch, capsys):
        bad = tmp_path / "bad.ini"
        bad.write_text("[crf]\nmax_iter = soon\n", encoding="utf-8")
        monkeypatch.setenv(ENV_CONFIG, str(bad))
        rc = main(["segment", str(workdir / "gt.txt"), str(tmp_path / "o.seg")])
        assert rc == 2
        assert "stage config failed" in capsys.readouterr().err

    def test_explicit_flag_beats_env(self, workdir, tmp_path, monkeypatch):
        bad = tmp_path / "bad.ini"
        bad.write_text("[nonsense]\n", encoding="utf-8")
        monkeypatch.setenv(ENV_CONFIG, str(bad))
        rc = run(workdir, "segment", workdir / "gt.txt", tmp_path / "o.seg")
        assert rc == 0

    def test_defaults_used_when_nothing_configured(self, workdir, tmp_path, monkeypatch):
        monkeypatch.delenv(ENV_CONFIG, raising=False)
        rc = main(["segment", str(workdir / "gt.txt"), str(tmp_path / "o.seg")])
        assert rc == 0


class TestZeroNoisePipeline:
    def test_clean_channel_scores_zero_wer(self, workdir, tmp_path, capsys):
        ini = tmp_path / "zero.ini"
        ini.write_text(
            TINY_INI
            + "\n[pipeline]\nsentences = 60\n"
            + "\n[noise]\np_sub = 0.0\np_del = 0.0\np_ins = 0.0\n",
            encoding="utf-8",
        )
        out_dir = tmp_path / "run"
        rc = main(
            ["--config", str(ini), "--out-dir", str(out_dir), "pipeline"]
        )
        assert rc == 0
        stdout = capsys.readouterr().out
        assert "run directory" in stdout
        rows = (
            (out_dir / "comparison.tsv").read_text(encoding="utf-8").strip().split("\n")
        )
        baseline = rows[1].split("\t")
        assert baseline[0] == "uncorrected"
        assert float(baseline[1]) == 0.0

import csv

import numpy as np
import pytest

from motif import cli, oracle, rfnet


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    """A small 1:2 dataset plus a monolithic model and a two-band ensemble trained on it."""
    root = tmp_path_factory.mktemp("cli")
    ds = root / "mn.motif"
    assert cli.main(["dataset", "gen", "--template", "mn", "--pairs", "1:2", "--samples", "120", "--seed", "3", "--out", str(ds)]) == 0
    mono = root / "mono"
    assert cli.main(["train", "--dataset", str(ds), "--out", str(mono), "--hidden", "16,16", "--epochs", "5", "--seed", "1"]) == 0
    ens = root / "ens"
    args = ["transfer", "--dataset", str(ds), "--out", str(ens), "--nband", "2", "--titer", "1", "--hidden", "16,16"]
    assert cli.main(args + ["--visit-epochs", "3", "--seed", "1"]) == 0
    return root, ds, mono, ens


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


class TestDatasetGen:
    def test_outputs(self, work, capsys):
        root, ds, *_ = work
        loaded = oracle.read_dataset(ds)
        assert len(loaded) == 120 and loaded.grid == rfnet.FrequencyGrid.half_ghz()
        assert (root / "mn.motif.config").read_text().startswith("# motif dataset gen")

    def test_same_command_same_hash(self, tmp_path, capsys):
        hashes = []
        for name in ("a", "b"):
            code, out, _ = run(["dataset", "gen", "--template", "one_to_one", "--samples", "8", "--seed", "4", "--out", tmp_path / name], capsys)
            assert code == 0
            hashes.append(next(l for l in out.splitlines() if l.startswith("sha256=")))
            assert "rejection_rate=" in out and "wall_time_s=" in out
        assert hashes[0] == hashes[1]
        assert oracle.read_dataset(tmp_path / "a").labels.shape[1] == 2400

    def test_zero_samples(self, tmp_path, capsys):
        code, _, err = run(["dataset", "gen", "--samples", "0", "--out", tmp_path / "z"], capsys)
        assert code == cli.EXIT_USAGE and "samples" in err
        assert not (tmp_path / "z").exists()

    def test_unwritable(self, tmp_path, capsys):
        code, _, err = run(["dataset", "gen", "--samples", "2", "--out", tmp_path / "missing" / "x"], capsys)
        assert code == cli.EXIT_USAGE and "cannot write" in err

    def test_bad_pair(self, tmp_path, capsys):
        code, _, _ = run(["dataset", "gen", "--template", "one_to_one", "--pairs", "1:3", "--samples", "2", "--out", tmp_path / "x"], capsys)
        assert code == cli.EXIT_USAGE


class TestConfig:
    def test_file_and_override(self, tmp_path, capsys):
        conf = tmp_path / "gen.conf"
        conf.write_text("# comment\ntemplate=one_to_one\nsamples=5\nseed=2\n", encoding="utf-8")
        out = tmp_path / "d.motif"
        code, stdout, _ = run(["dataset", "gen", "--config", conf, "--samples", "3", "--out", out], capsys)
        assert code == 0 and "samples=3" in stdout
        snap = (tmp_path / "d.motif.config").read_text()
        assert "samples=3" in snap and "seed=2" in snap and "template=one_to_one" in snap

    def test_unknown_key(self, tmp_path, capsys):
        conf = tmp_path / "bad.conf"
        conf.write_text("samples=5\ncolour=blue\n", encoding="utf-8")
        code, _, err = run(["dataset", "gen", "--config", conf, "--out", tmp_path / "x"], capsys)
        assert code == cli.EXIT_USAGE and "colour" in err

    def test_bad_line(self, tmp_path, capsys):
        conf = tmp_path / "bad.conf"
        conf.write_text("samples\n", encoding="utf-8")
        code, _, err = run(["dataset", "gen", "--config", conf, "--out", tmp_path / "x"], capsys)
        assert code == cli.EXIT_USAGE and "key=value" in err

    def test_workers_precedence(self, monkeypatch):
        parser = cli.build_parser()
        monkeypatch.delenv("MOTIF_WORKERS", raising=False)
        assert cli._workers(parser.parse_args(["train"])) == cli.DEFAULT_WORKERS
        monkeypatch.setenv("MOTIF_WORKERS", "2")
        assert cli._workers(parser.parse_args(["train"])) == 2
        assert cli._workers(parser.parse_args(["--workers", "3", "train"])) == 3

    def test_no_command(self, capsys):
        assert cli.main([]) == cli.EXIT_USAGE
        assert cli.main(["frobnicate"]) == cli.EXIT_USAGE


class TestTraining:
    def test_train_artifacts(self, work):
        _, _, mono, _ = work
        assert (mono / "resolved_config.txt").exists()
        rows = list(csv.reader(open(mono / "history.csv")))
        assert rows[0] == ["epoch", "train_loss", "val_loss"] and len(rows) >= 2

    def test_checkpoint_determinism(self, work, tmp_path):
        _, ds, mono, _ = work
        again = tmp_path / "again"
        assert cli.main(["train", "--dataset", str(ds), "--out", str(again), "--hidden", "16,16", "--epochs", "5", "--seed", "1"]) == 0
        files = sorted(p.name for p in mono.glob("*.motifmodel"))
        assert files
        for name in files:
            assert (mono / name).read_bytes() == (again / name).read_bytes()

    def test_transfer_provenance(self, work):
        _, _, _, ens = work
        rows = list(csv.reader(open(ens / "history.csv")))
        assert len(rows) - 1 == 1 + 2 * 1 * (2 - 1)
        assert len(list(ens.glob("*.motifmodel"))) == 2

    def test_nband_not_dividing(self, work, tmp_path, capsys):
        _, ds, *_ = work
        code, _, err = run(["transfer", "--dataset", ds, "--out", tmp_path / "e", "--nband", "7"], capsys)
        assert code == cli.EXIT_USAGE and "7" in err and "200" in err

    def test_nband_one(self, work, tmp_path, capsys):
        _, ds, *_ = work
        args = ["transfer", "--dataset", ds, "--out", tmp_path / "e", "--nband", "1", "--titer", "2", "--hidden", "8", "--visit-epochs", "2"]
        code, out, _ = run(args, capsys)
        assert code == 0 and "equivalent to 'motif train'" in out and "visits=1" in out

    def test_missing_dataset(self, tmp_path, capsys):
        code, _, err = run(["train", "--dataset", tmp_path / "nope", "--out", tmp_path / "m"], capsys)
        assert code == cli.EXIT_USAGE and "dataset gen" in err


class TestEval:
    def test_report_files(self, work, tmp_path, capsys):
        _, ds, mono, _ = work
        code, out, _ = run(["eval", "--dataset", ds, "--model", mono, "--out", tmp_path], capsys)
        assert code == 0 and "mae_avg_2srf=" in out
        for name in ("summary.txt", "mae_curve.csv", "mae_curve.svg", "resolved_config.txt"):
            assert (tmp_path / name).exists()

    def test_perfect_mode(self, work, tmp_path, capsys):
        _, ds, mono, _ = work
        code, _, _ = run(["eval", "--dataset", ds, "--model", mono, "--out", tmp_path, "--perfect"], capsys)
        assert code == 0
        rows = list(csv.reader(open(tmp_path / "mae_curve.csv")))[1:]
        assert all(float(r[1]) == 0.0 for r in rows)

    def test_comparison_table(self, work, tmp_path, capsys):
        _, ds, mono, ens = work
        code, out, _ = run(["eval", "--dataset", ds, "--model", ens, "--baseline", mono, "--out", tmp_path], capsys)
        assert code == 0
        table = (tmp_path / "comparison.txt").read_text()
        assert "improvement" in table and "%" in table and table in out

    def test_leakage_is_fatal(self, work, tmp_path, capsys):
        _, ds, mono, _ = work
        code, _, err = run(["eval", "--dataset", ds, "--model", mono, "--out", tmp_path, "--split", "all"], capsys)
        assert code == cli.EXIT_USAGE and "used for training" in err

    def test_missing_model(self, work, tmp_path, capsys):
        _, ds, *_ = work
        code, _, err = run(["eval", "--dataset", ds, "--model", tmp_path / "none", "--out", tmp_path], capsys)
        assert code == cli.EXIT_USAGE and "motif train" in err


class TestInvdesign:
    base = ["--fc", "45", "--bw", "10", "--z01", "40,-50", "--z02", "150,80", "--max-evals", "60"]

    def test_bundle(self, work, tmp_path, capsys):
        _, _, _, ens = work
        code, out, _ = run(["invdesign", "--model", ens, "--out", tmp_path, "--workers", "2", *self.base], capsys)
        assert code in (cli.EXIT_OK, cli.EXIT_NO_DESIGN)
        assert ("status=success" in out) == (code == cli.EXIT_OK)
        for name in ("report.txt", "curves.csv", "design.s4p", "gamma_in.svg", "loss.svg", "resolved_config.txt"):
            assert (tmp_path / name).exists(), name

    def test_bad_complex_literal(self, work, tmp_path, capsys):
        _, _, _, ens = work
        args = ["invdesign", "--model", ens, "--out", tmp_path, "--fc", "45", "--bw", "10", "--z01", "40-50j"]
        code, _, err = run(args, capsys)
        assert code == cli.EXIT_USAGE and "re,im" in err

    def test_turn_mismatch(self, work, tmp_path, capsys):
        _, _, _, ens = work
        code, _, err = run(["invdesign", "--model", ens, "--out", tmp_path, "--turns", "2:3", *self.base], capsys)
        assert code == cli.EXIT_USAGE and "1:2" in err

    def test_target_outside_grid(self, work, tmp_path, capsys):
        _, _, _, ens = work
        code, _, err = run(["invdesign", "--model", ens, "--out", tmp_path, "--fc", "99", "--bw", "10"], capsys)
        assert code == cli.EXIT_USAGE and "grid" in err


class TestExport:
    def test_label_export(self, work, tmp_path):
        _, ds, *_ = work
        out = tmp_path / "s.s4p"
        assert cli.main(["export", "touchstone", "--dataset", str(ds), "--index", "4", "--out", str(out)]) == 0
        back = rfnet.touchstone_read(out)
        assert np.allclose(back.data, oracle.read_dataset(ds).tensor(4).data, atol=1e-9)

    def test_model_export(self, work, tmp_path):
        _, ds, mono, _ = work
        out = tmp_path / "p.s4p"
        assert cli.main(["export", "touchstone", "--dataset", str(ds), "--model", str(mono), "--out", str(out)]) == 0
        assert out.read_text().count("\n") > 200

    def test_index_range(self, work, tmp_path, capsys):
        _, ds, *_ = work
        code, _, err = run(["export", "touchstone", "--dataset", ds, "--index", "500", "--out", tmp_path / "x.s4p"], capsys)
        assert code == cli.EXIT_USAGE and "index" in err

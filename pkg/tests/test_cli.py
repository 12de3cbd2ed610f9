import csv
import json
from pathlib import Path

import pytest

from lyricarcs.cli import main

MINI_CORPUS = str(Path("src/lyricarcs/data/mini_corpus.jsonl").resolve())
WORDLIST = str(Path("src/lyricarcs/data/wordlist.txt").resolve())

ARTIFACTS = [
    "corpus_descriptives.json",
    "trajectories_standard.csv", "trajectories_slang.csv", "skipped.csv",
    "diagnostics_standard.csv", "diagnostics_slang.csv",
    "assignments_standard.csv", "assignments_slang.csv",
    "shapes_standard.csv", "shapes_slang.csv",
    "stats_report.json", "stats_report.txt",
    "manifest.json", "summary.txt",
]


def run(*argv):
    return main(list(argv))


def read_csv(path):
    with open(path, encoding="utf-8") as fh:
        lines = [l for l in fh if not l.startswith("#")]
    return list(csv.DictReader(lines))


@pytest.fixture(scope="module")
def full_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    rc = run("run", "--corpus", MINI_CORPUS, "--wordlist", WORDLIST,
             "--out-dir", str(out), "--seed", "42")
    assert rc == 0
    return out


class TestFullPipeline:
    def test_all_artifacts_exist(self, full_run):
        for name in ARTIFACTS:
            assert (full_run / name).is_file(), name
        assert list(full_run.glob("shape_*_cluster*.svg"))

    def test_extract_row_counts(self, full_run):
        std = read_csv(full_run / "trajectories_standard.csv")
        slg = read_csv(full_run / "trajectories_slang.csv")
        assert len(std) == len(slg) == 20
        assert len(std) + len(slg) == 40
        assert all(len(r) == 102 for r in std)  # id, lexicon, 100 bins

    def test_headers_carry_lexicon_seed_version(self, full_run):
        first = (full_run / "trajectories_standard.csv").read_text().splitlines()[0]
        assert "lexicon=standard" in first
        assert "seed=42" in first
        assert "version=" in first

    def test_cluster_assignments_cover_corpus(self, full_run):
        rows = read_csv(full_run / "assignments_standard.csv")
        assert len(rows) == 20
        assert {r["cluster"] for r in rows} == {"0", "1"}

    def test_shapes_have_mean_and_median(self, full_run):
        rows = read_csv(full_run / "shapes_standard.csv")
        stats = {r["stat"] for r in rows}
        assert stats == {"mean", "median"}
        median_rows = [r for r in rows if r["stat"] == "median"]
        assert all(r["ci_low"] == "" for r in median_rows)

    def test_stats_report_blocks(self, full_run):
        report = json.loads((full_run / "stats_report.json").read_text())
        assert "chi_square" in report["cross_cluster"]
        assert set(report["models"]) == {"views", "engagement"}
        for m in report["models"].values():
            assert m["dispersion_ratio"] > 1  # rates are overdispersed here
            assert m["converged"]
            names = [c["name"] for c in m["coefficients"]]
            assert names == ["intercept", "standard_cluster",
                             "slang_cluster", "interaction"]

    def test_manifest_lists_digests(self, full_run):
        manifest = json.loads((full_run / "manifest.json").read_text())
        assert manifest["seed"] == 42
        assert set(manifest["inputs"]) == {"corpus", "standard_lexicon",
                                           "slang_lexicon", "shifters"}
        for digest in manifest["artifacts"].values():
            assert len(digest) == 64

    def test_svg_has_no_timestamp_and_fixed_viewbox(self, full_run):
        svg = next(full_run.glob("shape_standard_cluster*.svg")).read_text()
        assert 'viewBox="0 0 800 400"' in svg
        assert "202" not in svg.split("<!--")[0]  # no dates anywhere structural
        assert "stroke-dasharray" in svg


class TestDeterminism:
    def test_same_seed_byte_identical(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        for out in (out_a, out_b):
            assert run("run", "--corpus", MINI_CORPUS, "--out-dir", str(out),
                       "--seed", "7") == 0
        for name in ARTIFACTS:
            if name == "manifest.json":
                continue  # config snapshot embeds out_dir
            a = (out_a / name).read_bytes()
            b = (out_b / name).read_bytes()
            assert a == b, name
        for svg in out_a.glob("*.svg"):
            assert svg.read_bytes() == (out_b / svg.name).read_bytes()
        # manifests agree on every digest
        ma = json.loads((out_a / "manifest.json").read_text())
        mb = json.loads((out_b / "manifest.json").read_text())
        assert ma["artifacts"] == mb["artifacts"]
        assert ma["inputs"] == mb["inputs"]

    def test_changed_seed_changes_only_cluster_dependent_artifacts(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert run("run", "--corpus", MINI_CORPUS, "--out-dir", str(out_a),
                   "--seed", "7") == 0
        assert run("run", "--corpus", MINI_CORPUS, "--out-dir", str(out_b),
                   "--seed", "8") == 0
        same = lambda n: (out_a / n).read_bytes() == (out_b / n).read_bytes()
        # trajectories do not depend on the clustering seed (only the header)
        a_rows = read_csv(out_a / "trajectories_standard.csv")
        b_rows = read_csv(out_b / "trajectories_standard.csv")
        assert a_rows == b_rows
        assert not same("assignments_standard.csv")  # header seed differs at least


class TestValidationAndErrors:
    def test_empty_corpus_is_validation_error(self, tmp_path, capsys):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("")
        rc = run("extract", "--corpus", str(empty), "--out-dir",
                 str(tmp_path / "out"))
        assert rc == 1
        assert "zero valid records" in capsys.readouterr().err

    def test_missing_corpus_flag(self, tmp_path, capsys):
        assert run("ingest", "--out-dir", str(tmp_path)) == 1

    def test_short_lyric_flagged_not_dropped_silently(self, tmp_path):
        corpus = tmp_path / "c.jsonl"
        rows = [
            {"id": "ok", "lyrics": " ".join(f"w{i}" for i in range(30))},
            {"id": "short", "lyrics": "one two three four five"},
        ]
        corpus.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        out = tmp_path / "out"
        assert run("extract", "--corpus", str(corpus), "--out-dir", str(out)) == 0
        skipped = read_csv(out / "skipped.csv")
        assert [r["id"] for r in skipped] == ["short"]
        assert "too short" in skipped[0]["reason"]
        assert [r["id"] for r in read_csv(out / "trajectories_standard.csv")] == ["ok"]

    def test_cluster_before_extract(self, tmp_path, capsys):
        rc = run("cluster", "--corpus", MINI_CORPUS,
                 "--out-dir", str(tmp_path / "nothing"))
        assert rc == 1
        assert "extract" in capsys.readouterr().err

    def test_report_before_stages(self, tmp_path, capsys):
        rc = run("report", "--corpus", MINI_CORPUS,
                 "--out-dir", str(tmp_path / "nothing"))
        assert rc == 1

    def test_degenerate_single_cluster_design(self, tmp_path, capsys):
        out = tmp_path / "out"
        assert run("extract", "--corpus", MINI_CORPUS, "--out-dir", str(out)) == 0
        assert run("cluster", "--corpus", MINI_CORPUS, "--out-dir", str(out),
                   "--k", "1") == 0
        rc = run("analyze", "--corpus", MINI_CORPUS, "--out-dir", str(out))
        assert rc == 1
        assert "constant columns" in capsys.readouterr().err


class TestConfigFile:
    def test_config_keys_and_flag_precedence(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            f"corpus = {MINI_CORPUS}\n"
            "seed = 5  # comment\n"
            f"out_dir = {tmp_path / 'from_cfg'}\n"
        )
        out = tmp_path / "from_flag"
        assert run("ingest", "--config", str(cfg), "--out-dir", str(out)) == 0
        assert (out / "corpus_descriptives.json").is_file()
        payload = json.loads((out / "corpus_descriptives.json").read_text())
        assert payload["seed"] == 5  # config value survives where no flag given

    def test_unknown_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("corups = x\n")
        assert run("ingest", "--config", str(cfg)) == 1

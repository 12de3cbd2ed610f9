import json
import math

import pytest

from lyricarcs.corpus import (CorpusError, LyricRecord, VideoMetadata,
                              compute_rates, corpus_descriptives, describe,
                              load_corpus, oov_rate, type_token_ratio)

MINI_CORPUS = "src/lyricarcs/data/mini_corpus.jsonl"


def write_jsonl(path, rows):
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    return path


GOOD_ROWS = [
    {"id": "a", "artist": "X", "title": "T1", "lyrics": "one two three four"},
    {"id": "b", "artist": "Y", "title": "T2", "lyrics": "five six seven"},
    {"id": "c", "artist": "Z", "title": "T3", "lyrics": "eight nine ten",
     "views": 100, "likes": 10, "dislikes": 1, "comments": 2, "days_active": 50.0},
]


class TestLoadCorpus:
    def test_three_wellformed_rows(self, tmp_path):
        path = write_jsonl(tmp_path / "c.jsonl", GOOD_ROWS)
        result = load_corpus(path, format="jsonl")
        assert len(result.records) == 3
        assert result.skipped == []
        assert result.records[2].metadata.views == 100

    def test_zero_days_active_is_named_in_error(self, tmp_path):
        rows = [dict(GOOD_ROWS[0]),
                {"id": "bad", "artist": "", "title": "", "lyrics": "x y",
                 "views": 1, "likes": 1, "dislikes": 1, "comments": 1,
                 "days_active": 0}]
        path = write_jsonl(tmp_path / "c.jsonl", rows)
        with pytest.raises(CorpusError, match="days_active"):
            load_corpus(path, strict=True)
        result = load_corpus(path, strict=False)
        assert len(result.records) == 1
        assert result.skipped[0].record_id == "bad"
        assert result.skipped[0].line == 2

    def test_bundled_mini_corpus_has_20_records(self):
        result = load_corpus(MINI_CORPUS)
        assert len(result.records) == 20
        assert all(r.metadata is not None for r in result.records)

    def test_duplicate_id_is_fatal(self, tmp_path):
        path = write_jsonl(tmp_path / "c.jsonl", [GOOD_ROWS[0], GOOD_ROWS[0]])
        with pytest.raises(CorpusError, match="duplicate id"):
            load_corpus(path, strict=False)

    def test_missing_file(self):
        with pytest.raises(CorpusError, match="not found"):
            load_corpus("/nonexistent/corpus.jsonl")

    def test_csv_roundtrip(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text(
            "id,artist,title,lyrics,views,likes,dislikes,comments,days_active\n"
            "a,X,T,one two three,100,10,1,2,50\n")
        result = load_corpus(path, format="csv")
        assert len(result.records) == 1
        assert result.records[0].metadata.days_active == 50.0

    def test_days_active_derived_from_dates(self, tmp_path):
        row = {"id": "a", "lyrics": "x y z", "views": 10, "likes": 1,
               "dislikes": 0, "comments": 0,
               "publish_date": "2019-01-01", "retrieval_date": "2019-07-20"}
        path = write_jsonl(tmp_path / "c.jsonl", [row])
        rec = load_corpus(path).records[0]
        assert rec.metadata.days_active == 200.0

    def test_explicit_days_active_wins_over_dates(self, tmp_path):
        row = {"id": "a", "lyrics": "x y z", "views": 10, "likes": 1,
               "dislikes": 0, "comments": 0, "days_active": 33.0,
               "publish_date": "2019-01-01", "retrieval_date": "2019-07-20"}
        path = write_jsonl(tmp_path / "c.jsonl", [row])
        assert load_corpus(path).records[0].metadata.days_active == 33.0

    def test_partial_metadata_rejected(self, tmp_path):
        path = write_jsonl(tmp_path / "c.jsonl",
                           [{"id": "a", "lyrics": "x y", "views": 5}])
        with pytest.raises(CorpusError, match="partial metadata"):
            load_corpus(path, strict=True)


class TestComputeRates:
    def test_views_per_100d(self):
        m = VideoMetadata(views=1000, likes=0, dislikes=0, comments=0,
                          days_active=200.0)
        assert compute_rates(m).views_per_100d == 500.0

    def test_engagement_is_sum_of_nonview_rates(self):
        m = VideoMetadata(views=0, likes=100, dislikes=10, comments=40,
                          days_active=100.0)
        r = compute_rates(m)
        assert r.engagement == 150.0
        assert r.engagement == r.likes_per_100d + r.dislikes_per_100d + r.comments_per_100d

    def test_magnitude_matches_reported_cluster_mean_scale(self):
        # positive-cluster mean view rate is ~236,707/100d at corpus scale
        m = VideoMetadata(views=473414, likes=0, dislikes=0, comments=0,
                          days_active=200.0)
        assert compute_rates(m).views_per_100d == pytest.approx(236707.0)

    def test_homogeneous_in_counts(self):
        m1 = VideoMetadata(views=120, likes=30, dislikes=6, comments=9,
                           days_active=77.0)
        m3 = VideoMetadata(views=360, likes=90, dislikes=18, comments=27,
                           days_active=77.0)
        r1, r3 = compute_rates(m1), compute_rates(m3)
        assert r3.views_per_100d == pytest.approx(3 * r1.views_per_100d)
        assert r3.engagement == pytest.approx(3 * r1.engagement)

    def test_negative_count_rejected(self):
        with pytest.raises(CorpusError):
            VideoMetadata(views=-1, likes=0, dislikes=0, comments=0, days_active=1.0)


class TestDescriptives:
    def test_hand_computed_oracle(self):
        v = describe([1.0, 2.0, 3.0])
        assert v.mean == 2.0
        assert v.sd == pytest.approx(1.0)
        half = 2.576 / math.sqrt(3)
        assert v.ci99_low == pytest.approx(2 - half)
        assert v.ci99_high == pytest.approx(2 + half)

    def test_degenerate_equal_values(self):
        v = describe([7.0] * 10)
        assert v.sd == 0.0
        assert v.ci99_low == v.ci99_high == 7.0

    def test_reported_token_ci_reconstruction(self):
        # reconstruct a sample with the reported mean/SD, n=550
        n, mean, sd = 550, 644.06, 218.51
        half = 2.576 * sd / math.sqrt(n)
        assert mean - half == pytest.approx(620.02, abs=0.1)
        assert mean + half == pytest.approx(668.10, abs=0.1)

    def test_ci_width_shrinks_as_sqrt_n(self):
        base = [1.0, 2.0, 3.0, 4.0] * 25  # n=100
        big = base * 4  # n=400, same values so same SD
        w100 = describe(base).ci99_high - describe(base).ci99_low
        w400 = describe(big).ci99_high - describe(big).ci99_low
        # n-1 denominators leave a tiny wobble around the exact factor 2
        assert w100 / w400 == pytest.approx(2.0, rel=1e-2)

    def test_requires_two_values(self):
        with pytest.raises(CorpusError):
            describe([1.0])

    def test_corpus_descriptives_variables(self):
        records = load_corpus(MINI_CORPUS).records
        stats = corpus_descriptives(records)
        assert stats.n == 20
        for name in ("tokens", "type_token_ratio", "comments", "likes",
                     "dislikes", "days_active"):
            v = stats.variables[name]
            assert v.ci99_low <= v.mean <= v.ci99_high
            assert v.sd >= 0


class TestLexicalStats:
    def test_ttr_by_definition(self):
        assert type_token_ratio(["a", "a", "b", "c"]) == 0.75

    def test_ttr_all_distinct(self):
        assert type_token_ratio(["x", "y", "z"]) == 1.0

    def test_ttr_case_folded(self):
        assert type_token_ratio(["Go", "go", "GO"]) == pytest.approx(1 / 3)

    def test_ttr_order_invariant(self):
        tokens = ["a", "b", "a", "c", "c", "d"]
        assert type_token_ratio(tokens) == type_token_ratio(tokens[::-1])

    def test_oov_containment_and_disjoint(self):
        assert oov_rate(["a", "b"], {"a", "b", "c"}) == 0.0
        assert oov_rate(["x", "y"], {"a", "b"}) == 1.0

    def test_oov_direct_count(self):
        tokens = ["w1"] * 7 + ["zz1", "zz2", "zz3"]
        assert oov_rate(tokens, {"w1"}) == pytest.approx(0.3)

    def test_oov_order_invariant(self):
        tokens = ["a", "zz", "b", "qq"]
        wl = {"a", "b"}
        assert oov_rate(tokens, wl) == oov_rate(tokens[::-1], wl)

    def test_empty_inputs_rejected(self):
        with pytest.raises(CorpusError):
            oov_rate([], {"a"})
        with pytest.raises(CorpusError):
            oov_rate(["a"], set())
        with pytest.raises(CorpusError):
            type_token_ratio([])


def test_empty_lyrics_rejected():
    with pytest.raises(CorpusError, match="empty"):
        LyricRecord(id="x", artist="", title="", raw_text="   \n  ")

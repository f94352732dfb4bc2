import pytest

from trailalign.datasets import (
    busiest_day,
    daily_post_maxima,
    load_ground_truth,
    load_site_dataset,
    load_tracker_dataset,
    validate_ground_truth,
    write_ground_truth,
    write_site_dataset,
    write_tracker_dataset,
)
from trailalign.errors import (
    EmptyDatasetError,
    MalformedRowError,
    MixedLabelModesError,
)

from conftest import make_gt, make_site


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestSiteLoader:
    def test_sorts_timestamps(self, tmp_path):
        path = write(tmp_path, "s.csv", "username,timestamp\nalice,1000\nalice,500\n")
        ds = load_site_dataset(path, "siteA")
        assert ds.records == {"alice": [500, 1000]}

    def test_deduplicates(self, tmp_path):
        path = write(tmp_path, "s.csv", "username,timestamp\nalice,500\nalice,500\n")
        ds = load_site_dataset(path, "siteA")
        assert ds.records == {"alice": [500]}

    def test_malformed_timestamp_reports_line(self, tmp_path):
        path = write(tmp_path, "s.csv", "username,timestamp\nalice,abc\n")
        with pytest.raises(MalformedRowError) as exc:
            load_site_dataset(path, "siteA")
        assert exc.value.line_no == 2

    def test_negative_timestamp_rejected(self, tmp_path):
        path = write(tmp_path, "s.csv", "username,timestamp\nalice,-5\n")
        with pytest.raises(MalformedRowError):
            load_site_dataset(path, "siteA")

    def test_empty_dataset(self, tmp_path):
        path = write(tmp_path, "s.csv", "username,timestamp\n")
        with pytest.raises(EmptyDatasetError):
            load_site_dataset(path, "siteA")

    def test_missing_header(self, tmp_path):
        path = write(tmp_path, "s.csv", "alice,500\n")
        with pytest.raises(MalformedRowError):
            load_site_dataset(path, "siteA")

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_site_dataset(tmp_path / "nope.csv", "siteA")

    def test_round_trip_is_canonical(self, tmp_path):
        messy = write(
            tmp_path, "messy.csv",
            "username,timestamp\nzoe,100\nalice,900\nalice,100\nzoe,50\n",
        )
        out1 = tmp_path / "c1.csv"
        out2 = tmp_path / "c2.csv"
        write_site_dataset(load_site_dataset(messy, "s"), out1)
        write_site_dataset(load_site_dataset(out1, "s"), out2)
        assert out1.read_bytes() == out2.read_bytes()
        assert out1.read_text() == "username,timestamp\nalice,100\nalice,900\nzoe,50\nzoe,100\n"


class TestTrackerLoader:
    def test_unlabeled_infers_mode(self, tmp_path):
        path = write(
            tmp_path, "t.csv",
            "tracking_id,domain,timestamp,kind\nT1,siteA,10,unlabeled\n",
        )
        assert load_tracker_dataset(path).label_mode is False

    def test_mixed_modes_rejected(self, tmp_path):
        path = write(
            tmp_path, "t.csv",
            "tracking_id,domain,timestamp,kind\nT1,siteA,10,post\nT1,siteA,20,unlabeled\n",
        )
        with pytest.raises(MixedLabelModesError):
            load_tracker_dataset(path)

    def test_events_sorted_per_id(self, tmp_path):
        path = write(
            tmp_path, "t.csv",
            "tracking_id,domain,timestamp,kind\nT1,siteB,5000,post\nT1,siteA,995,post\n",
        )
        ds = load_tracker_dataset(path)
        assert [e.time for e in ds.events["T1"]] == [995, 5000]
        assert ds.label_mode is True

    def test_unknown_kind_rejected(self, tmp_path):
        path = write(
            tmp_path, "t.csv", "tracking_id,domain,timestamp,kind\nT1,siteA,10,click\n"
        )
        with pytest.raises(MalformedRowError):
            load_tracker_dataset(path)

    def test_known_sites_enforced(self, tmp_path):
        path = write(
            tmp_path, "t.csv", "tracking_id,domain,timestamp,kind\nT1,siteX,10,post\n"
        )
        with pytest.raises(MalformedRowError):
            load_tracker_dataset(path, known_sites={"siteA", "siteB"})

    def test_round_trip(self, tmp_path):
        path = write(
            tmp_path, "t.csv",
            "tracking_id,domain,timestamp,kind\n"
            "T2,siteA,30,browse\nT1,siteB,5000,post\nT1,siteA,995,post\n",
        )
        out1 = tmp_path / "c1.csv"
        out2 = tmp_path / "c2.csv"
        write_tracker_dataset(load_tracker_dataset(path), out1)
        write_tracker_dataset(load_tracker_dataset(out1), out2)
        assert out1.read_bytes() == out2.read_bytes()

    def test_posting_times_excludes_browse(self, tmp_path):
        path = write(
            tmp_path, "t.csv",
            "tracking_id,domain,timestamp,kind\n"
            "T1,siteA,100,post\nT1,siteA,200,browse\nT1,siteB,300,post\n",
        )
        ds = load_tracker_dataset(path)
        assert ds.posting_times("T1", "siteA") == [100]
        assert ds.posting_times("T1", "siteB") == [300]
        assert ds.posting_times("T9", "siteA") == []


class TestGroundTruth:
    def test_missing_user_reported(self):
        a = make_site("siteA", {"alice": [1]})
        b = make_site("siteB", {"bob": [2]})
        gt = make_gt([("T1", "alice", "ghost")])
        report = validate_ground_truth(gt, a, b)
        assert [(v.kind, v.subject, v.site) for v in report] == [
            ("missing_user", "ghost", "siteB")
        ]

    def test_duplicate_tracking_id_reported(self):
        a = make_site("siteA", {"alice": [1], "amy": [2]})
        b = make_site("siteB", {"bob": [2], "bea": [3]})
        gt = make_gt([("T1", "alice", "bob"), ("T1", "amy", "bea")])
        kinds = [v.kind for v in validate_ground_truth(gt, a, b)]
        assert kinds == ["duplicate_tracking_id"]

    def test_duplicate_user_reported(self):
        a = make_site("siteA", {"alice": [1]})
        b = make_site("siteB", {"bob": [2], "bea": [3]})
        gt = make_gt([("T1", "alice", "bob"), ("T2", "alice", "bea")])
        kinds = [v.kind for v in validate_ground_truth(gt, a, b)]
        assert kinds == ["duplicate_user"]

    def test_consistent_is_empty(self):
        a = make_site("siteA", {"a1": [1], "a2": [2], "a3": [3]})
        b = make_site("siteB", {"b1": [1], "b2": [2], "b3": [3]})
        gt = make_gt([("T1", "a1", "b1"), ("T2", "a2", "b2"), ("T3", "a3", "b3")])
        assert validate_ground_truth(gt, a, b) == []
        assert len(gt.pairs) <= min(len(a.records), len(b.records))

    def test_csv_round_trip(self, tmp_path):
        gt = make_gt([("T1", "alice", "bob"), ("T2", "amy", "bea")])
        path = tmp_path / "gt.csv"
        write_ground_truth(gt, path)
        assert load_ground_truth(path) == gt

    def test_lookups(self):
        gt = make_gt([("T1", "alice", "bob")])
        assert gt.target_of("alice") == "bob"
        assert gt.source_of("bob") == "alice"
        assert gt.target_of("bob") is None


class TestDayHelpers:
    def test_daily_maxima(self):
        ds = make_site("siteA", {"u": [10, 20, 86410, 86420, 86430]})
        assert daily_post_maxima(ds, 0) == {"u": 3}

    def test_busiest_day_prefers_earliest_tie(self):
        ds = make_site("siteA", {"u": [10, 86410]})
        assert busiest_day(ds, "u", 0) == 0

    def test_busiest_day_epoch_anchor(self):
        ds = make_site("siteA", {"u": [1000, 1010, 1020, 90_000]})
        assert busiest_day(ds, "u", 0) == 0
        assert busiest_day(ds, "u", 1000) == 0

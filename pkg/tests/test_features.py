from datetime import datetime, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import profile_from

from paidposter.corpus import UserProfile
from paidposter.features import (
    FeatureRow,
    FeatureVector,
    active_days,
    avg_interval,
    extract,
    num_reports,
    read_features,
    reply_ratio,
    split_epochs,
    write_features,
)

DAY = 86400


def ts(s):
    return int(datetime.fromisoformat(s).replace(tzinfo=timezone.utc).timestamp())


def from_gaps(make_profile, gaps, start=1_000_000):
    times = [start]
    for g in gaps:
        times.append(times[-1] + g)
    return make_profile(times)


def test_reply_ratio(make_profile):
    p = make_profile(list(range(10)), replies=[True] * 4 + [False] * 6)
    assert reply_ratio(p) == 0.4
    assert reply_ratio(make_profile([0, 1, 2])) == 0.0
    assert reply_ratio(make_profile([0, 1], replies=[True, True])) == 1.0


def test_split_epochs_examples(make_profile):
    assert [len(e) for e in split_epochs(from_gaps(make_profile, [100, 100]))] == [3]
    assert [len(e) for e in split_epochs(from_gaps(make_profile, [100, 2 * DAY, 300]))] == [2, 2]
    assert [len(e) for e in split_epochs(make_profile([5]))] == [1]


def test_gap_of_exactly_one_day_stays_in_epoch(make_profile):
    assert len(split_epochs(from_gaps(make_profile, [DAY, DAY + 1]))) == 2


def test_avg_interval_examples(make_profile):
    # epoch gaps (100, 100) then, after a long break, an epoch with gap 300
    assert avg_interval(from_gaps(make_profile, [100, 100, 3 * DAY, 300])) == 200.0
    assert avg_interval(from_gaps(make_profile, [60, 120])) == 90.0
    assert avg_interval(from_gaps(make_profile, [2 * DAY, 3 * DAY, 2 * DAY])) == 86400.0


def test_epoch_means_are_unweighted(make_profile):
    # epochs: gaps (10, 10, 10, 10) and (1000); unweighted mean 505, not (40 + 1000) / 5
    p = from_gaps(make_profile, [10, 10, 10, 10, 2 * DAY, 1000])
    assert avg_interval(p) == 505.0


def test_active_days_examples(make_profile):
    assert active_days(make_profile([ts("2010-10-01T01:00:00"), ts("2010-10-01T09:00:00"), ts("2010-10-01T23:00:00")])) == 1
    assert active_days(make_profile([ts("2010-10-01T12:00:00"), ts("2010-10-03T12:00:00")])) == 2
    assert active_days(make_profile([ts("2010-10-01T23:59:59"), ts("2010-10-02T00:00:01")])) == 2


def test_active_days_uses_time_zone(make_profile):
    # 2010-10-01 20:00 and 2010-10-02 02:00 UTC fall on the same Shanghai date
    p = make_profile([ts("2010-10-01T20:00:00"), ts("2010-10-02T02:00:00")])
    assert active_days(p) == 2
    assert active_days(p, "Asia/Shanghai") == 1


def test_num_reports(make_profile):
    assert num_reports(make_profile([0, 1, 2, 3, 4, 5], reports=["A", "A", "B", "A", "B", "B"])) == 2
    assert num_reports(make_profile([0, 1, 2])) == 1
    assert num_reports(make_profile(list(range(7)), reports=[f"R{k}" for k in range(7)])) == 7


def test_extract_assembles_in_fixed_order(make_profile):
    p = make_profile(
        [0, 100, 200, 3 * DAY, 3 * DAY + 300],
        replies=[True, True, False, False, False],
        reports=["A", "B", "C", "A", "B"],
    )
    fv = extract(p, similar_pairs=0)
    assert fv == FeatureVector(0.4, 200.0, 2, 3, 0)
    assert fv.as_list() == [0.4, 200.0, 2.0, 3.0, 0.0]
    assert len(fv.as_list()) == 5


def test_feature_file_round_trip(tmp_path):
    rows = [
        FeatureRow("b", FeatureVector(0.1, 1 / 3, 2, 3, 4), "paid"),
        FeatureRow("a", FeatureVector(1.0, 86400.0, 1, 1, 0), None),
    ]
    write_features(rows, tmp_path / "f.csv")
    back = read_features(tmp_path / "f.csv")
    assert [r.user_id for r in back] == ["a", "b"]
    assert back[1] == rows[0]
    assert back[0] == rows[1]


times_st = st.lists(st.integers(0, 30 * DAY), min_size=1, max_size=30)


@settings(max_examples=150, deadline=None)
@given(times_st, st.integers(-10**6, 10**6), st.randoms(use_true_random=False))
def test_feature_properties(times, shift, rnd):
    make_profile = profile_from
    n = len(times)
    replies = [rnd.random() < 0.5 for _ in range(n)]
    reports = [rnd.choice("ABCD") for _ in range(n)]
    p = make_profile(times, replies=replies, reports=reports)

    epochs = split_epochs(p)
    assert [c for e in epochs for c in e] == list(p.comments)
    for k, e in enumerate(epochs):
        assert all(b.post_time - a.post_time <= DAY for a, b in zip(e, e[1:]))
        if k:
            assert e[0].post_time - epochs[k - 1][-1].post_time > DAY

    moved = make_profile([t + shift for t in times], replies=replies, reports=reports)
    assert avg_interval(moved) == pytest.approx(avg_interval(p), abs=1e-9)

    order = list(range(n))
    rnd.shuffle(order)
    shuffled = UserProfile(p.user_id, tuple(p.comments[k] for k in order))
    assert reply_ratio(shuffled) == reply_ratio(p)
    assert active_days(shuffled) == active_days(p)
    assert num_reports(shuffled) == num_reports(p)

    fv = extract(p, 0)
    assert 0 <= fv.reply_ratio <= 1
    assert fv.active_days >= 1 and fv.num_reports >= 1 and fv.avg_interval_s >= 0

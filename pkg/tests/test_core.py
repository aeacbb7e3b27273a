import numpy as np
import pytest
from hypothesis import given, strategies as st

from eventseer.core import (
    ConfigError,
    DataError,
    EventSet,
    Interval,
    TimeSeries,
    check_event_width,
    sampling_period,
    to_fixed_width_events,
)


def test_sampling_period_uniform():
    rep = sampling_period([0, 1, 2, 3])
    assert rep.period == 1.0
    assert not rep.irregular


def test_sampling_period_flags_gap():
    rep = sampling_period([0, 1, 2, 4])
    assert rep.period == 1.0
    assert rep.irregular
    assert rep.max_relative_deviation == pytest.approx(1.0)


def test_sampling_period_within_one_percent_is_regular():
    rep = sampling_period([0.0, 1.0, 2.0, 3.005])
    assert not rep.irregular


def test_sampling_period_too_short():
    with pytest.raises(DataError, match="series too short"):
        sampling_period([1.0])


def test_sampling_period_rejects_disorder_instead_of_sorting():
    with pytest.raises(DataError):
        sampling_period(np.array([0.0, 2.0, 1.0, 3.0]))


def test_sampling_period_one_second_series():
    series = TimeSeries(np.arange(100.0), np.zeros((100, 2)))
    assert sampling_period(series).period == 1.0


@pytest.mark.parametrize(
    "raw, expected",
    [((10, 10), (8, 12)), ((9, 11), (8, 12)), ((8, 12), (8, 12))],
)
def test_fixed_width_events(raw, expected):
    out = to_fixed_width_events(EventSet([raw]), 4.0)
    assert [(e.start, e.end) for e in out] == [expected]


@pytest.mark.parametrize("w", [0.0, -1.0])
def test_fixed_width_rejects_nonpositive(w):
    with pytest.raises(ConfigError):
        to_fixed_width_events(EventSet([(0, 1)]), w)


times = st.floats(-1e4, 1e4, allow_nan=False)


@given(st.lists(st.tuples(times, st.floats(0, 100)), max_size=20), st.floats(0.01, 100))
def test_fixed_width_idempotent_and_exact_duration(raw, width):
    events = EventSet((s, s + d) for s, d in raw)
    once = to_fixed_width_events(events, width)
    twice = to_fixed_width_events(once, width)
    assert len(once) == len(events)
    for a, b in zip(once, twice):
        assert a.start == pytest.approx(b.start, abs=1e-9)
        assert a.end == pytest.approx(b.end, abs=1e-9)
    for e in once:
        assert abs(e.duration - width) <= 1e-12 * max(1.0, abs(e.mid))


def test_eventset_sorted_and_overlaps_kept():
    es = EventSet([(5, 9), (1, 2), (5, 6), (1, 3)])
    assert [(e.start, e.end) for e in es] == [(1, 2), (1, 3), (5, 6), (5, 9)]


def test_point_events_allowed():
    es = EventSet([(3, 3)])
    assert es[0].duration == 0.0


def test_interval_invariants():
    with pytest.raises(DataError):
        Interval(2, 1)
    with pytest.raises(DataError):
        Interval(float("nan"), 1)


def test_timeseries_validation():
    with pytest.raises(DataError, match="strictly increasing"):
        TimeSeries([0, 1, 1], np.zeros((3, 1)))
    with pytest.raises(DataError):
        TimeSeries([0, 1], np.zeros((3, 1)))
    with pytest.raises(DataError):
        TimeSeries([0, 1], np.array([[0.0], [np.nan]]))
    ts = TimeSeries([0, 1], np.zeros((2, 3)))
    assert ts.feature_names == ("x0", "x1", "x2")
    with pytest.raises(ValueError):
        ts.values[0, 0] = 1.0


def test_event_width_below_period_is_noted():
    rep = check_event_width(sampling_period([0, 2, 4]), 1.0)
    assert rep.notes
    assert not check_event_width(sampling_period([0, 2, 4]), 2.0).notes

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from furnacephase.ingestion import ChargeEntry, ChargeLog, UniformSeries
from furnacephase.labeling import (LabelConfig, LabelConfigError, classify_label,
                                   generate_labels, window_target)


def series(n, dt=60.0, t0=0.0):
    return UniformSeries(t0, dt, np.zeros(n), ["x"])


def naive_labels(times, log, t_sw):
    """Per-sample loop over every event; reference for the vectorised version."""
    half = t_sw / 2
    out = []
    for t in times:
        best = 0.0
        for e in log.entries:
            for sign, t_ex in ((1.0, e.start_ts), (-1.0, e.end_ts)):
                d = abs(t_ex - t)
                if d <= half:
                    cand = sign * (1 - d / half)
                    if abs(cand) > abs(best):
                        best = cand
        out.append(best)
    return np.array(out)


def random_log(rng, horizon, max_events=5):
    n_charges = int(rng.integers(1, max_events // 2 + 2))
    cuts = np.sort(rng.uniform(-600, horizon + 600, size=2 * n_charges))
    entries = [ChargeEntry(f"c{i}", cuts[2 * i], cuts[2 * i + 1]) for i in range(n_charges)
               if cuts[2 * i] < cuts[2 * i + 1]]
    return ChargeLog(entries)


def test_apex_is_one():
    log = ChargeLog([ChargeEntry("c", 600.0, 6000.0)])
    lab = generate_labels(series(200), log, LabelConfig(1200.0))
    assert lab.labels[10] == 1.0
    assert lab.labels[100] == -1.0


def test_foot_is_zero():
    log = ChargeLog([ChargeEntry("c", 1200.0, 60000.0)])
    lab = generate_labels(series(100), log, LabelConfig(1200.0))
    # 600 s = t_sw/2 away from the start
    assert lab.labels[10] == 0.0 and lab.labels[30] == 0.0


def test_quarter_distance_end():
    # hand oracle: -(1 - (t_sw/4)/(t_sw/2)) = -0.5
    log = ChargeLog([ChargeEntry("c", -99999.0, 3000.0)])
    lab = generate_labels(series(100), log, LabelConfig(1200.0))
    assert lab.labels[45] == -0.5  # 2700 s is 300 s = t_sw/4 before the end
    assert lab.labels[55] == -0.5


def test_far_from_events_is_zero():
    log = ChargeLog([ChargeEntry("c", 600.0, 1800.0)])
    lab = generate_labels(series(100), log, LabelConfig(1200.0))
    assert np.all(lab.labels[41:] == 0)


def test_overlap_keeps_larger_magnitude_and_ties_go_earlier():
    # end at 1200, next start at 1500: sample 1320 is 120 s from the end, 180 s from the start
    log = ChargeLog([ChargeEntry("a", -5000.0, 1200.0), ChargeEntry("b", 1500.0, 9000.0)])
    lab = generate_labels(series(60, dt=30.0), log, LabelConfig(1200.0))
    t = lab.timestamps
    i = int(np.flatnonzero(t == 1320.0)[0])
    assert lab.labels[i] == pytest.approx(-(1 - 120 / 600))
    j = int(np.flatnonzero(t == 1350.0)[0])  # equidistant: earlier event (the end) wins
    assert lab.labels[j] == pytest.approx(-(1 - 150 / 600))


def test_events_outside_range_contribute_partially():
    log = ChargeLog([ChargeEntry("c", -300.0, 50000.0)])
    lab = generate_labels(series(20), log, LabelConfig(1200.0))
    assert lab.labels[0] == pytest.approx(0.5)
    assert lab.labels[5] == 0.0


def test_window_narrower_than_grid_rejected():
    with pytest.raises(LabelConfigError):
        generate_labels(series(10), ChargeLog([ChargeEntry("c", 0, 100)]), LabelConfig(100.0))


def test_label_config_validation():
    with pytest.raises(LabelConfigError):
        LabelConfig(0.0)
    with pytest.raises(LabelConfigError):
        LabelConfig(100.0, class_epsilon=1.0)


@pytest.mark.parametrize("l, kind", [(1.0, "start"), (0.0, "between"), (-0.97, "end"),
                                     (0.95, "start"), (0.9, "between")])
def test_classify(l, kind):
    assert classify_label(l, 0.05) == kind


def test_classify_out_of_range():
    with pytest.raises(ValueError):
        classify_label(1.01, 0.05)


def test_window_target():
    log = ChargeLog([ChargeEntry("c", 600.0, 50000.0)])
    lab = generate_labels(series(100), log, LabelConfig(1200.0))
    assert window_target(lab, 10) == 1.0
    assert window_target(lab, 80) == 0.0
    assert window_target(lab, 5) == 0.5  # 300 s down a 600 s flank
    with pytest.raises(IndexError):
        window_target(lab, 100)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_matches_naive_loop(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 500))
    dt = float(rng.choice([1.0, 30.0, 60.0]))
    s = series(n, dt=dt, t0=float(rng.uniform(-100, 100)))
    t_sw = float(rng.uniform(2 * dt, 40 * dt))
    log = random_log(rng, n * dt)
    lab = generate_labels(s, log, LabelConfig(t_sw))
    np.testing.assert_allclose(lab.labels, naive_labels(s.timestamps, log, t_sw), atol=1e-12,
                               rtol=0)


def test_piecewise_linear_and_symmetric():
    log = ChargeLog([ChargeEntry("c", 3000.0, 30000.0)])
    lab = generate_labels(series(200), log, LabelConfig(1200.0))
    apex = 50
    left = lab.labels[apex - 10:apex + 1]
    right = lab.labels[apex:apex + 11]
    np.testing.assert_allclose(np.diff(left, 2), 0, atol=1e-12)
    np.testing.assert_allclose(np.diff(right, 2), 0, atol=1e-12)
    for d in range(11):
        assert lab.labels[apex - d] == lab.labels[apex + d]


def test_classification_marks_only_apexes():
    dt, t_sw = 60.0, 1200.0
    eps = 0.9 * dt / (t_sw / 2)
    log = ChargeLog([ChargeEntry("a", 1200.0, 6000.0), ChargeEntry("b", 9000.0, 12000.0)])
    lab = generate_labels(series(250), log, LabelConfig(t_sw, eps))
    starts = [i for i, l in enumerate(lab.labels) if classify_label(l, eps) == "start"]
    assert starts == [20, 150]


def test_csv_export():
    log = ChargeLog([ChargeEntry("c", 60.0, 50000.0)])
    text = generate_labels(series(3), log, LabelConfig(240.0)).to_csv()
    assert text.splitlines() == ["ts,label", "0.0,0.5", "60.0,1.0", "120.0,0.5"]

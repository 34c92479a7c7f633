
import pytest
from hypothesis import given, strategies as st

from laburst.baselines import (SeedLexicon, collapse_runs, delta_series, raw_delta, raw_freq,
                               read_delta_csv, run_baseline, token_freq, window_avg,
                               write_delta_csv)
from laburst.evaluation import delta_to_series, expand_truth, roc
from laburst.resources import load_lexicon
from laburst.synth import BurstSpec, SynthConfig, generate_messages
from laburst.windowing import SliceTable, StreamConfig, iter_windows

from conftest import msg


@pytest.mark.parametrize("raw,canon", [("gooaallll", "goal"), ("GOAL!!", "goal"),
                                       ("golazo", "golazo"), ("goal", "goal"), ("¡Gol!", "gol")])
def test_collapse_examples(raw, canon):
    assert collapse_runs(raw) == canon


@given(st.text(max_size=20))
def test_collapse_idempotent(s):
    assert collapse_runs(collapse_runs(s)) == collapse_runs(s)


def test_window_avg_examples():
    series = list(range(1, 11)) + [99]
    assert window_avg(10, 10, series) == 5.5
    assert window_avg(10, 9, series) is None
    assert window_avg(3, 5, [4.0] * 8) == 4.0
    # the literal summation also includes slice t but still divides by k
    assert window_avg(10, 10, series, literal=True) == pytest.approx(5.5 + 99 / 10)
    assert raw_delta(10, 10, series) == 99 - 5.5


def test_raw_freq_ignores_retweets():
    msgs = [msg(i, "x", rt=i < 2) for i in range(7)]
    step = next(iter_windows(msgs, StreamConfig(omega=60, t0=0)))
    assert raw_freq(step.slice) == 5
    assert raw_freq(SliceTable(0)) == 0


def test_token_freq_examples():
    table = SliceTable(0)
    table.accumulate(msg(0, "goal gol goooal"))
    table.accumulate(msg(1, "GOL!! nothing here"))
    cup = load_lexicon(group="World Cup")
    assert "goal" in cup and "gol" in cup
    assert token_freq(table, SeedLexicon(tuple(cup))) == 4
    assert token_freq(table, ["penalty"]) == 0
    assert token_freq(table, cup) <= table.total_tokens
    with pytest.raises(ValueError):
        SeedLexicon(())


def test_steady_stream_delta_is_zero():
    points = delta_series([40] * 20, 10)
    assert all(p.warmup for p in points[:10])
    assert all(p.delta == 0 for p in points[10:])


def spike_stream(boost=3.0, start=900):
    return SynthConfig(duration=1500, rate=20, bursts=(BurstSpec(start, 60, ("pow",), 20.0, boost),),
                       rng_seed=2, name="spike")


def test_volume_spike_delta_and_auc():
    cfg = spike_stream()
    points = run_baseline(list(generate_messages(cfg)), "rawburst")
    base = 20 * 60
    spike = 900 // 60
    assert points[spike].freq == 3 * base
    assert points[spike].delta == pytest.approx(2 * base)
    series = delta_to_series(points, 60, "spike")
    curve = roc(series.scored(), expand_truth({spike}, 0))
    assert curve.auc == 1.0


def test_tokenburst_tracks_seed_variants():
    cfg = SynthConfig(duration=1200, rate=20, rng_seed=3,
                      bursts=(BurstSpec(900, 60, ("goal", "gooal", "goooaaal")),))
    points = run_baseline(list(generate_messages(cfg)), "tokenburst",
                          lexicon=SeedLexicon(("goal",)))
    best = max((p for p in points if not p.warmup), key=lambda p: p.delta)
    assert best.t == 15
    with pytest.raises(ValueError):
        run_baseline(list(generate_messages(cfg)), "tokenburst")
    with pytest.raises(ValueError):
        run_baseline(list(generate_messages(cfg)), "nope")


def test_delta_csv_roundtrip(tmp_path):
    points = delta_series([3, 1, 4, 1, 5, 9, 2, 6], 3, t0=600)
    path = tmp_path / "d.csv"
    write_delta_csv(points, path)
    assert read_delta_csv(path) == points
    assert points[3].time == 780 and points[3].avg == pytest.approx(8 / 3)

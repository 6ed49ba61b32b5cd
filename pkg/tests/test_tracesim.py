import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sopshift import featurizer as fz
from sopshift import tracesim as ts
from sopshift.evalharness.diagnostic import class_rankings, marginal_shift_fraction
from sopshift.tracesim import EventClass, EventSignature, SystemProfile


def quiet_specs():
    specs = dict(ts.DEFAULT_SIGNATURES)
    specs[EventClass.RLX] = dataclasses.replace(specs[EventClass.RLX], amplitude=0.0)
    return specs


def test_event_codes_are_fixed():
    assert [int(e) for e in EventClass] == [0, 1, 2]
    assert [e.label for e in EventClass] == ["rlx", "eav", "sbd"]


def test_zero_perturbation_gives_flat_channels():
    prof = SystemProfile(1, noise_floor=0.0)
    tr = ts.synth_trace(prof, quiet_specs(), EventClass.RLX, 2000, seed=3)
    np.testing.assert_array_equal(tr.i1, 0.5)
    np.testing.assert_array_equal(tr.i2, 0.5)


def test_channels_rebuild_carrier():
    pair = ts.make_shift_pair(0.7)
    tr = ts.synth_trace(pair[1], ts.DEFAULT_SIGNATURES, EventClass.SBD, 5000, seed=1)
    tr0 = ts.synth_trace(dataclasses.replace(pair[1], noise_floor=0.0), ts.DEFAULT_SIGNATURES,
                         EventClass.SBD, 5000, seed=1)
    np.testing.assert_allclose(tr0.i1 + tr0.i2, ts.CARRIER, atol=1e-15)
    assert len(tr) == 5000


def test_synth_is_deterministic_and_seed_sensitive():
    prof = SystemProfile(2, gain=1.7)
    a = ts.synth_trace(prof, ts.DEFAULT_SIGNATURES, EventClass.RLX, 3000, seed=42)
    b = ts.synth_trace(prof, ts.DEFAULT_SIGNATURES, EventClass.RLX, 3000, seed=42)
    c = ts.synth_trace(prof, ts.DEFAULT_SIGNATURES, EventClass.RLX, 3000, seed=43)
    assert np.array_equal(a.i1, b.i1) and np.array_equal(a.i2, b.i2)
    assert not np.array_equal(a.i1, c.i1)


def test_corpus_is_deterministic():
    pair = ts.make_shift_pair(1.0)
    a = ts.generate_corpus(pair, n_samples_per_event=1001, seed=5)
    b = ts.generate_corpus(pair, n_samples_per_event=1001, seed=5)
    assert [t.name for t in a] == ["sys1_rlx", "sys1_eav", "sys1_sbd", "sys2_rlx", "sys2_eav", "sys2_sbd"]
    assert all(np.array_equal(x.i1, y.i1) for x, y in zip(a, b))
    assert len({t.seed for t in a}) == 6


@pytest.mark.parametrize("n", [999, 0, 1000.0, "1000"])
def test_rejects_bad_length(n):
    with pytest.raises(ValueError):
        ts.synth_trace(SystemProfile(1), ts.DEFAULT_SIGNATURES, EventClass.RLX, n, seed=0)


def test_rejects_bad_specs_and_profiles():
    with pytest.raises(ValueError):
        EventSignature(math.nan, 10.0, 0.1, 1.0)
    with pytest.raises(ValueError):
        EventSignature(10.0, 10.0, 0.1, 1.5)
    with pytest.raises(ValueError):
        SystemProfile(3)
    with pytest.raises(ValueError):
        SystemProfile(1, gain=0.0)
    with pytest.raises(ValueError):
        SystemProfile(1, noise_floor=-1.0)
    swapped = dict(ts.DEFAULT_SIGNATURES)
    swapped[EventClass.RLX], swapped[EventClass.EAV] = swapped[EventClass.EAV], swapped[EventClass.RLX]
    with pytest.raises(ValueError):
        ts.synth_trace(SystemProfile(1), swapped, EventClass.RLX, 2000, seed=0)
    too_high = dict(ts.DEFAULT_SIGNATURES)
    too_high[EventClass.EAV] = dataclasses.replace(too_high[EventClass.EAV], center_freq_hz=990.0)
    with pytest.raises(ValueError):
        ts.synth_trace(SystemProfile(1, band_scale=1.2), too_high, EventClass.EAV, 2000, seed=0)


def test_shift_pair_endpoints():
    p1, p2 = ts.make_shift_pair(0.0)
    assert dataclasses.replace(p2, system_id=1) == p1
    assert (p1.gain, p1.dc_offset, p1.band_scale) == (1.0, 0.0, 1.0)
    _, q2 = ts.make_shift_pair(1.0)
    assert q2.gain == pytest.approx(ts.MAX_SHIFT["gain"])
    assert q2.band_scale == pytest.approx(ts.MAX_SHIFT["band_scale"])
    assert q2.dc_offset == pytest.approx(ts.MAX_SHIFT["dc_offset"])
    assert q2.noise_floor == pytest.approx(p1.noise_floor * ts.MAX_SHIFT["noise_factor"])
    for bad in (-0.1, 1.01, math.nan, math.inf):
        with pytest.raises(ValueError):
            ts.make_shift_pair(bad)


@settings(max_examples=40, deadline=None)
@given(s=st.floats(0.0, 1.0))
def test_ordering_holds_at_every_strength(s):
    for prof in ts.make_shift_pair(s):
        ts.check_signatures(ts.DEFAULT_SIGNATURES, prof)
        scaled = [ts.DEFAULT_SIGNATURES[e].center_freq_hz * prof.band_scale for e in
                  (EventClass.RLX, EventClass.SBD, EventClass.EAV)]
        assert scaled == sorted(scaled)
        amp = [ts.DEFAULT_SIGNATURES[e].amplitude * prof.gain for e in
               (EventClass.RLX, EventClass.SBD, EventClass.EAV)]
        assert amp[0] < amp[1] < amp[2]


def test_burst_mask_duty_cycle():
    rng = np.random.default_rng(0)
    m = ts.burst_mask(400_000, 0.6, rng, 400.0)
    assert set(np.unique(m)) == {0.0, 1.0}
    assert abs(m.mean() - 0.6) < 0.05
    assert ts.burst_mask(10, 1.0, rng, 4.0).all()
    assert not ts.burst_mask(10, 0.0, rng, 4.0).any()


def test_samples_for_rows():
    tr = ts.synth_trace(SystemProfile(1), ts.DEFAULT_SIGNATURES, EventClass.RLX, ts.samples_for_rows(7), 0)
    assert fz.featurize_trace(tr).rows == 7


def test_trace_roundtrip(tmp_path):
    tr = ts.synth_trace(SystemProfile(2, gain=2.0), ts.DEFAULT_SIGNATURES, EventClass.SBD, 1500, seed=9)
    ts.save_trace(tr, tmp_path / "t.bin")
    back = ts.load_trace(tmp_path / "t.bin")
    assert np.array_equal(back.i1, tr.i1) and np.array_equal(back.i2, tr.i2)
    assert (back.event, back.system_id, back.seed) == (tr.event, tr.system_id, tr.seed)


@pytest.fixture(scope="module")
def shifted_corpus():
    pair = ts.make_shift_pair(1.0)
    return [fz.featurize_trace(t) for t in ts.generate_corpus(pair, n_samples_per_event=ts.samples_for_rows(200), seed=0)]


def test_class_rankings_agree_across_systems(shifted_corpus):
    ranks = class_rankings(shifted_corpus)
    assert ranks[1] == ranks[2]
    rlx, eav, sbd = int(EventClass.RLX), int(EventClass.EAV), int(EventClass.SBD)
    # a relaxed fibre shows only measurement noise, which differencing pushes to the top bin
    assert ranks[1] == ((rlx, sbd, eav), (sbd, eav, rlx))


@pytest.mark.parametrize("strength", [0.5, 1.0])
def test_marginal_shift_is_large(strength):
    pair = ts.make_shift_pair(strength)
    sigs = [fz.featurize_trace(t) for t in ts.generate_corpus(pair, n_samples_per_event=ts.samples_for_rows(200), seed=1)]
    x1 = np.concatenate([s.power for s in sigs if s.system_id == 1])
    x2 = np.concatenate([s.power for s in sigs if s.system_id == 2])
    assert marginal_shift_fraction(x1, x2) >= 0.10


def test_no_marginal_shift_without_shift():
    pair = ts.make_shift_pair(0.0)
    sigs = [fz.featurize_trace(t) for t in ts.generate_corpus(pair, n_samples_per_event=ts.samples_for_rows(200), seed=1)]
    x1 = np.concatenate([s.power for s in sigs if s.system_id == 1])
    x2 = np.concatenate([s.power for s in sigs if s.system_id == 2])
    assert marginal_shift_fraction(x1, x2) < 0.01

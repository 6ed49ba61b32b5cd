import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sopshift import dataprep as dp
from sopshift.featurizer import SpectralSignature
from sopshift.tracesim import EventClass

FULL_STRATA = {(0, 0): 4800, (1, 0): 4800, (2, 0): 4800, (0, 1): 4800, (1, 1): 644, (2, 1): 773}


def make_dataset(strata, width=4, seed=0):
    rng = np.random.default_rng(seed)
    feats, y, d = [], [], []
    for (yy, dd), n in sorted(strata.items()):
        feats.append(rng.standard_normal((n, width)) + 3 * dd)
        y += [yy] * n
        d += [dd] * n
    n = len(y)
    return dp.LabeledDataset(np.concatenate(feats), y, d, np.zeros(n, dtype=int), ["x"])


def test_full_scale_split_sizes():
    sizes = dp.split_counts(FULL_STRATA)
    assert sizes[(0, 0)] == (3360, 720, 720)
    assert sizes[(1, 1)] == (450, 97, 97)
    assert sizes[(2, 1)] == (541, 116, 116)
    total = np.sum(list(sizes.values()), axis=0)
    assert tuple(total) == (14431, 3093, 3093)


def test_ten_row_stratum():
    assert dp.split_counts({0: 10})[0] == (6, 2, 2)


@settings(max_examples=60, deadline=None)
@given(counts=st.lists(st.integers(3, 400), min_size=1, max_size=6), seed=st.integers(0, 10_000))
def test_manifest_partitions_rows(counts, seed):
    strata = {(i % 3, i // 3): c for i, c in enumerate(counts)}
    ds = make_dataset(strata)
    man = dp.stratified_split(ds, seed=seed)
    parts = [man.indices(s) for s in dp.SPLITS]
    allrows = np.concatenate(parts)
    assert allrows.size == len(ds)
    assert np.array_equal(np.sort(allrows), np.arange(len(ds)))
    for (yy, dd), n in strata.items():
        got = man.counts[f"{yy},{dd}"]
        for split, r in zip(dp.SPLITS, dp.DEFAULT_RATIOS):
            assert abs(got[split] - r * n) <= 1 + 1e-9
            rows = man.indices(split)
            assert np.sum((ds.y[rows] == yy) & (ds.d[rows] == dd)) == got[split]


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_split_deterministic(seed):
    ds = make_dataset({(0, 0): 40, (1, 0): 25, (2, 1): 12})
    assert dp.stratified_split(ds, seed=seed).to_dict() == dp.stratified_split(ds, seed=seed).to_dict()


def test_different_seeds_shuffle_differently():
    ds = make_dataset({(0, 0): 200})
    assert dp.stratified_split(ds, seed=1).test != dp.stratified_split(ds, seed=2).test


def test_small_stratum_rejected():
    ds = make_dataset({(0, 0): 10, (1, 1): 2})
    with pytest.raises(ValueError, match="y=1, d=1"):
        dp.stratified_split(ds)


def test_imbalance_preserved_across_splits():
    """Scaled-down strata of the full-scale shape keep their ratios in every split."""
    strata = {k: v // 10 for k, v in FULL_STRATA.items()}
    ds = make_dataset(strata)
    man = dp.stratified_split(ds, seed=5)
    for split, r in zip(dp.SPLITS, dp.DEFAULT_RATIOS):
        for key, n in strata.items():
            assert abs(man.counts[f"{key[0]},{key[1]}"][split] - r * n) <= 1


def test_zscore_on_fit_set():
    x = np.random.default_rng(0).standard_normal((300, 6)) * [1, 2, 3, 4, 5, 6] + 10
    x[:, 2] = 7.0
    st_ = dp.zscore_fit(x)
    z = dp.zscore_apply(st_, x)
    live = [0, 1, 3, 4, 5]
    np.testing.assert_allclose(z[:, live].mean(0), 0, atol=1e-10)
    np.testing.assert_allclose(z[:, live].std(0), 1, atol=1e-10)
    assert st_.std[2] == dp.STD_FLOOR
    assert np.all(z[:, 2] == 0)


def test_zscore_uses_train_rows_only():
    ds = make_dataset({(0, 0): 60, (0, 1): 60, (1, 0): 60, (1, 1): 60})
    man = dp.stratified_split(ds, seed=3)
    tr = man.indices("train")
    fit_train = dp.zscore_fit(ds.take(tr))
    fit_more = dp.zscore_fit(ds.take(np.concatenate([tr, man.indices("test")])))
    assert fit_train.n_rows == tr.size
    assert not np.allclose(fit_train.mean, fit_more.mean)
    z = dp.zscore_apply(fit_train, ds.take(man.indices("test")))
    assert np.isfinite(z.features).all()


def test_zscore_rejects_width_mismatch():
    with pytest.raises(ValueError):
        dp.zscore_apply(dp.zscore_fit(np.ones((3, 4))), np.ones((3, 5)))
    with pytest.raises(ValueError):
        dp.zscore_fit(np.zeros((0, 4)))


def sig(power, event=EventClass.EAV, system=2):
    return SpectralSignature(np.asarray(power, dtype=float), event, system)


def test_activity_filter_self_keeps_about_five_percent():
    p = np.random.default_rng(1).exponential(size=(2000, 8))
    kept = dp.activity_filter(sig(p), sig(p), 0.95)
    assert abs(kept.rows - 100) <= 2


def test_activity_filter_zero_rows_and_order():
    base = sig(np.ones((10, 4)), EventClass.RLX)
    assert dp.activity_filter(sig(np.zeros((5, 4))), base).rows == 0
    p = np.array([[5.0, 0], [0, 0], [3, 1], [9, 9]])
    out = dp.activity_filter(sig(p), sig(np.ones((4, 2)), EventClass.RLX), 0.5)
    np.testing.assert_array_equal(out.power, p[[0, 2, 3]])
    with pytest.raises(ValueError):
        dp.activity_filter(sig(np.ones((3, 4))), sig(np.ones((3, 5))))
    with pytest.raises(ValueError):
        dp.activity_filter(sig(p), sig(p), 1.0)


def test_scenario_views_share_rows():
    ds = make_dataset({(c, d): 30 for c in range(3) for d in range(2)})
    man = dp.stratified_split(ds, seed=0)
    v = dp.scenario_views(ds, man)
    np.testing.assert_array_equal(v["S3"].test, v["S2"].test)
    np.testing.assert_array_equal(v["S4"].test, v["S1"].test)
    np.testing.assert_array_equal(v["S3"].train, v["S1"].train)
    assert set(ds.d[v["S3"].test]) == {1}
    assert set(ds.d[v["S4"].train]) == {1}


def test_dataset_roundtrip(tmp_path):
    ds = make_dataset({(0, 0): 5, (2, 1): 4})
    ds.save(tmp_path / "ds.sopc")
    back = dp.LabeledDataset.load(tmp_path / "ds.sopc")
    np.testing.assert_array_equal(back.features, ds.features)
    np.testing.assert_array_equal(back.y, ds.y)
    np.testing.assert_array_equal(back.d, ds.d)


def test_manifest_roundtrip(tmp_path):
    ds = make_dataset({(0, 0): 20, (1, 1): 9})
    man = dp.stratified_split(ds, seed=8)
    man.save(tmp_path / "m.json")
    assert dp.SplitManifest.load(tmp_path / "m.json").to_dict() == man.to_dict()

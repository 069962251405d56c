import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from activestack.stats import bh_adjust, dunn_fdr


def test_two_group_example():
    res = dunn_fdr([[1, 2, 3], [101, 102, 103]], names=["a", "b"])
    z = -3 / math.sqrt(3.5 * (2 / 3))
    assert res.z[0, 1] == pytest.approx(z, rel=1e-12)
    assert z == pytest.approx(-1.964, abs=1e-3)
    assert res.pvalue("a", "b") == pytest.approx(math.erfc(abs(z) / math.sqrt(2)), rel=1e-12)
    assert res.pvalue("a", "b") == pytest.approx(0.0495, abs=1e-4)
    assert not res.significant[0, 1] or res.p[0, 1] < 0.05


def test_identical_groups_give_p_one():
    res = dunn_fdr([[5, 5, 5], [5, 5, 5], [5, 5, 5]])
    assert np.all(res.p[~np.eye(3, dtype=bool)] == 1.0)
    res = dunn_fdr([[1, 2, 3], [1, 2, 3]])
    assert res.p[0, 1] == 1.0


def test_identical_pair_has_maximal_p():
    rng = np.random.default_rng(0)
    a = rng.normal(0, 1, 20)
    b = rng.normal(3, 1, 20)
    res = dunn_fdr([a, b, b.copy()])
    assert res.p[1, 2] == np.nanmax(res.p)


@pytest.mark.parametrize("seed", range(10))
def test_matches_scikit_posthocs(seed):
    sp = pytest.importorskip("scikit_posthocs")
    rng = np.random.default_rng(seed)
    k = int(rng.integers(2, 6))
    groups = [np.round(rng.normal(rng.uniform(0, 2), 1, int(rng.integers(3, 30))), 1) for _ in range(k)]
    ref = sp.posthoc_dunn(groups, p_adjust="fdr_bh").to_numpy()
    got = dunn_fdr(groups).p
    off = ~np.eye(k, dtype=bool)
    assert np.allclose(got[off], ref[off], rtol=1e-10, atol=1e-14)
    raw = sp.posthoc_dunn(groups).to_numpy()
    assert np.allclose(dunn_fdr(groups).raw_p[off], raw[off], rtol=1e-10, atol=1e-14)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=30))
@settings(max_examples=60, deadline=None)
def test_bh_matches_statsmodels(p):
    from statsmodels.stats.multitest import multipletests

    assert np.allclose(bh_adjust(p), multipletests(p, method="fdr_bh")[1], rtol=1e-12, atol=1e-15)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=30))
@settings(max_examples=60, deadline=None)
def test_bh_properties(p):
    p = np.array(p)
    adj = bh_adjust(p)
    assert np.all(adj >= p - 1e-15) and np.all(adj <= 1)
    order = np.argsort(p, kind="stable")
    assert np.all(np.diff(adj[order]) >= -1e-15)


def test_shift_and_relabel_invariance():
    rng = np.random.default_rng(4)
    groups = [rng.normal(m, 1, 12) for m in (0, 0.5, 2)]
    base = dunn_fdr(groups)
    shifted = dunn_fdr([g * 3 + 100 for g in groups])
    assert np.allclose(base.p, shifted.p, equal_nan=True)
    perm = [2, 0, 1]
    swapped = dunn_fdr([groups[i] for i in perm])
    assert np.allclose(swapped.p, base.p[np.ix_(perm, perm)], equal_nan=True)
    assert np.allclose(swapped.z, base.z[np.ix_(perm, perm)], equal_nan=True)


def test_validation_and_dict():
    with pytest.raises(ValueError):
        dunn_fdr([[1, 2]])
    with pytest.raises(ValueError):
        dunn_fdr([[1], []])
    with pytest.raises(ValueError):
        dunn_fdr([[1], [2]], names=["a"])
    d = dunn_fdr([[1, 2], [3, 4]], names=["x", "y"]).to_dict()
    assert d["names"] == ["x", "y"] and d["p"][0][0] is None and d["significant"][0][0] is None

import itertools
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from superradiance.ablation import (
    PRESETS,
    CoherenceClass as K,
    apply_mask,
    class_table,
    classify,
    keep_mask,
    preset_mask,
)
from superradiance.angular import projections


def _scan_class(a, b, c, d):
    # independent restatement over plain doubled integers
    if (a, c) == (b, d):
        return K.DIAGONAL
    if a + c != b + d:
        return K.OTHER
    if abs(b - a) >= 4:
        return K.HIGHER_ORDER
    return K.SAME_LEVEL if (c, d) == (b, a) else K.CROSS


def _random_state(d, rng):
    X = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho = X @ X.conj().T
    return rho / np.trace(rho).real


def test_spin_half_counts():
    counts = Counter(class_table("1/2").ravel())
    assert counts == {K.DIAGONAL: 4, K.SAME_LEVEL: 2, K.OTHER: 10}
    assert counts[K.CROSS] == 0 and counts[K.HIGHER_ORDER] == 0


def test_spin_half_same_level_element():
    assert classify("1/2", "-1/2", "-1/2", "1/2", "1/2") is K.SAME_LEVEL
    assert classify("1/2", "1/2", "-1/2", "-1/2", "1/2") is K.DIAGONAL


@pytest.mark.parametrize("twice_j", [1, 2, 3, 9])
def test_table_matches_index_scan(twice_j):
    ms = list(range(twice_j, -twice_j - 1, -2))
    d = len(ms)
    table = class_table(f"{twice_j}/2").reshape(d, d, d, d)
    for (ia, a), (ic, c), (ib, b), (id_, dd) in itertools.product(enumerate(ms), repeat=4):
        assert table[ia, ic, ib, id_] is _scan_class(a, b, c, dd)


def test_spin_nine_halves_has_every_class():
    counts = Counter(class_table("9/2").ravel())
    assert set(counts) == set(K)
    assert sum(counts.values()) == 10**4
    assert counts[K.DIAGONAL] == 100


@pytest.mark.parametrize("twice_j", [1, 2, 9])
def test_classes_closed_under_conjugation(twice_j):
    t = class_table(f"{twice_j}/2")
    assert np.all(t == t.T)


def test_domain_error():
    with pytest.raises(ValueError):
        classify("3/2", "1/2", "1/2", "1/2", "1/2")
    with pytest.raises(ValueError):
        classify(0, 0, 0, 0, "1/2")
    with pytest.raises(ValueError):
        keep_mask("1/2", {K.SAME_LEVEL})
    with pytest.raises(ValueError):
        preset_mask("1/2", "nonsense")


@pytest.mark.parametrize("twice_j", [1, 2, 5])
def test_keep_all_is_identity(twice_j):
    d = (twice_j + 1) ** 2
    rho = _random_state(d, np.random.default_rng(twice_j))
    np.testing.assert_array_equal(apply_mask(rho, set(K)), rho)
    assert preset_mask(f"{twice_j}/2", "full") is None


@pytest.mark.parametrize("twice_j", [1, 2, 5])
def test_diagonal_only(twice_j):
    d = (twice_j + 1) ** 2
    rho = _random_state(d, np.random.default_rng(10 + twice_j))
    out = apply_mask(rho, {K.DIAGONAL})
    np.testing.assert_array_equal(out, np.diag(np.diag(rho)))


@settings(max_examples=40, deadline=None)
@given(
    st.sampled_from([1, 2, 3]),
    st.sampled_from(sorted(PRESETS)),
    st.integers(0, 2**32 - 1),
)
def test_masking_idempotent_and_hermitian(twice_j, preset, seed):
    j = f"{twice_j}/2"
    d = (twice_j + 1) ** 2
    rho = _random_state(d, np.random.default_rng(seed))
    keep = PRESETS[preset]
    once = apply_mask(rho, keep, j)
    np.testing.assert_array_equal(apply_mask(once, keep, j), once)
    np.testing.assert_allclose(once, once.conj().T, atol=1e-15)
    np.testing.assert_allclose(np.diag(once), np.diag(rho), atol=1e-15)


def test_presets_nested():
    order = ["no-offdiag", "same-level", "same+cross", "same+cross+higher", "full"]
    for a, b in zip(order, order[1:]):
        assert PRESETS[a] < PRESETS[b]
    assert all(K.OTHER not in PRESETS[p] for p in order[:-1])


def test_projection_order_is_descending():
    ms = [m.twice for m in projections("3/2")]
    assert ms == [3, 1, -1, -3]

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lsece.binned import (BinningScheme, bin_assignments, binned_ece, reliability,
                          top_class_reduce)
from lsece.core import SIGMOID, BinaryPredictionSet, MulticlassPredictionSet, make_rng
from lsece.exact import empirical_exact_ece
from lsece.synthetic import two_point_predictions

from oracles import brute_force_binned_ece

probs_strategy = st.lists(st.floats(0.01, 0.99), min_size=1, max_size=60)


def from_probs(p, y):
    return BinaryPredictionSet.from_probabilities(p, y)


def test_assignment_examples():
    np.testing.assert_array_equal(bin_assignments([0.05, 0.55], BinningScheme("uniform", 2)), [0, 1])
    np.testing.assert_array_equal(bin_assignments([1.0], BinningScheme("uniform", 10)), [9])
    np.testing.assert_array_equal(bin_assignments([0.5, 0.0], BinningScheme("uniform", 2)), [1, 0])


def test_equal_mass_quartiles():
    p = np.sort(make_rng(3).random(100))
    idx = bin_assignments(p, BinningScheme("equal_mass", 4))
    np.testing.assert_array_equal(np.bincount(idx), [25, 25, 25, 25])


@given(st.integers(1, 12), st.integers(1, 20), st.integers(0, 2**32))
def test_equal_mass_counts_balanced(m, reps, seed):
    n = m * reps
    p = make_rng(seed).random(n)
    counts = np.bincount(bin_assignments(p, BinningScheme("equal-mass", m)), minlength=m)
    assert counts.max() - counts.min() <= 1


def test_assignment_rejects_out_of_range():
    for bad in ([1.2], [-0.1], [np.nan]):
        with pytest.raises(ValueError):
            bin_assignments(bad, BinningScheme())


def test_scheme_validation():
    with pytest.raises(ValueError):
        BinningScheme("quantile", 5)
    with pytest.raises(ValueError):
        BinningScheme("uniform", 0)
    assert BinningScheme("equal-mass", 3).kind == "equal_mass"


def test_binned_ece_hand_value():
    # two bins, each holds one sample with gap 0.2
    data = from_probs([0.2, 0.8], [0, 1])
    assert binned_ece(data, scheme=BinningScheme("uniform", 2)) == pytest.approx(0.2, abs=1e-12)
    assert binned_ece(data, scheme=BinningScheme("uniform", 2)) == pytest.approx(
        brute_force_binned_ece([0.2, 0.8], [0, 1], 2), abs=1e-12)


def test_calibrated_within_bins_gives_zero():
    data = from_probs([0.25] * 4 + [0.75] * 4, [1, 0, 0, 0, 1, 1, 1, 0])
    assert binned_ece(data, scheme=BinningScheme("uniform", 2)) == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("m", [2, 3, 10, 11, 50, 51])
def test_two_point_parity(m):
    data = two_point_predictions(1000, seed=0)
    value = binned_ece(data, scheme=BinningScheme("uniform", m))
    assert (value >= 0.45) if m % 2 == 0 else (value <= 0.05)


@settings(max_examples=100)
@given(probs_strategy, st.data(), st.integers(1, 20))
def test_binned_ece_matches_brute_force(p, data, m):
    y = data.draw(st.lists(st.integers(0, 1), min_size=len(p), max_size=len(p)))
    ds = from_probs(p, y)
    probs = [float(v) for v in SIGMOID.forward(ds.logits)]
    expected = brute_force_binned_ece(probs, y, m)
    assert binned_ece(ds, scheme=BinningScheme("uniform", m)) == pytest.approx(expected, abs=1e-12)


@given(probs_strategy, st.data())
def test_single_bin_identity_and_range(p, data):
    y = data.draw(st.lists(st.integers(0, 1), min_size=len(p), max_size=len(p)))
    ds = from_probs(p, y)
    probs = SIGMOID.forward(ds.logits)
    for kind in ("uniform", "equal_mass"):
        v = binned_ece(ds, scheme=BinningScheme(kind, 1))
        assert v == pytest.approx(abs(np.mean(y) - np.mean(probs)), abs=1e-12)
    for m in (2, 7, 15):
        assert 0.0 <= binned_ece(ds, scheme=BinningScheme("equal_mass", m)) <= 1.0


@given(probs_strategy, st.data(), st.sampled_from(["uniform", "equal_mass"]), st.integers(1, 12))
def test_binned_ece_permutation_invariant(p, data, kind, m):
    y = data.draw(st.lists(st.integers(0, 1), min_size=len(p), max_size=len(p)))
    perm = data.draw(st.permutations(range(len(p))))
    a = binned_ece(from_probs(p, y), scheme=BinningScheme(kind, m))
    b = binned_ece(from_probs([p[i] for i in perm], [y[i] for i in perm]), scheme=BinningScheme(kind, m))
    assert a == pytest.approx(b, abs=1e-12)


@given(st.integers(2, 40), st.data())
def test_singleton_bins_reproduce_exact_ece(m, data):
    cells = data.draw(st.lists(st.integers(0, m - 1), min_size=1, max_size=m, unique=True))
    offsets = data.draw(st.lists(st.floats(0.1, 0.9), min_size=len(cells), max_size=len(cells)))
    p = [(c + o) / m for c, o in zip(cells, offsets)]
    y = data.draw(st.lists(st.integers(0, 1), min_size=len(p), max_size=len(p)))
    ds = from_probs(p, y)
    assert binned_ece(ds, scheme=BinningScheme("uniform", m)) == pytest.approx(empirical_exact_ece(ds), abs=1e-12)


def test_reliability_single_bin():
    y = [1] * 7 + [0] * 3
    diag = reliability(from_probs([0.7] * 10, y), scheme=BinningScheme("uniform", 1))
    (row,) = diag.rows()
    assert row[:3] == (0.0, 1.0, 10)
    assert row[3] == pytest.approx(0.7, abs=1e-12)
    assert row[4] == pytest.approx(0.7, abs=1e-12)


def test_reliability_flags_empty_bins():
    diag = reliability(from_probs([0.1, 0.2, 0.3], [0, 1, 0]), scheme=BinningScheme("uniform", 2))
    assert diag.bins[1].count == 0 and diag.bins[1].empty
    assert diag.bins[1].mean_conf is None and diag.bins[1].mean_label is None
    assert diag.rows()[1] == (0.5, 1.0, 0, None, None)


def test_equal_mass_edges_are_order_statistics():
    p = [0.1, 0.2, 0.3, 0.4]
    diag = reliability(from_probs(p, [0, 0, 1, 1]), scheme=BinningScheme("equal_mass", 2))
    assert diag.bins[0].lo == 0.0 and diag.bins[1].hi == 1.0
    assert diag.bins[0].hi == pytest.approx(0.3, abs=1e-9)
    assert [b.count for b in diag.bins] == [2, 2]


def test_top_class_examples():
    out = top_class_reduce(MulticlassPredictionSet([[0.1, 0.9]], [1]))
    assert float(out.logits[0]) == pytest.approx(float(SIGMOID.inverse(0.9)), abs=1e-12)
    assert out.labels.tolist() == [1]
    tie = top_class_reduce(MulticlassPredictionSet([[0.5, 0.5]], [0]))
    assert tie.labels.tolist() == [1]
    assert float(tie.logits[0]) == 0.0
    wrong = top_class_reduce(MulticlassPredictionSet([[0.2, 0.3, 0.5]], [0]))
    assert wrong.labels.tolist() == [0]


@given(st.integers(2, 5), st.integers(1, 30), st.integers(0, 2**32), st.data())
def test_top_class_preserves_n_and_is_class_permutation_equivariant(k, n, seed, data):
    rng = make_rng(seed)
    probs = rng.dirichlet(np.ones(k), size=n)
    labels = rng.integers(0, k, size=n)
    perm = np.array(data.draw(st.permutations(range(k))))
    inv = np.argsort(perm)
    a = top_class_reduce(MulticlassPredictionSet(probs, labels))
    b = top_class_reduce(MulticlassPredictionSet(probs[:, perm], inv[labels]))
    assert a.n == n
    np.testing.assert_array_equal(a.logits, b.logits)
    np.testing.assert_array_equal(a.labels, b.labels)

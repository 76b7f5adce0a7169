import math
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from roml.classification import (FiniteHypothesisClass, LabeledDataset, ThresholdClass, deviation_eps,
                                 deviation_exceedance, erm_choose, loss_matrix, regret_bound,
                                 run_random_order_erm, sup_deviation)
from roml.core import ConfigurationError, Permutation, ValidationError, make_rng

# 40-digit evaluations, frozen
DEV_D1_T8_2E = 1.471157649694397098825221110214049642476
DEV_D2_T100_005 = 0.7451251156258046951504084781192540239652


def thresholds(*values):
    return FiniteHypothesisClass([lambda x, th=th: (np.asarray(x) >= th).astype(int) for th in values], vc_dim=1)


def test_dataset_validation_and_csv(tmp_path):
    with pytest.raises(ValidationError):
        LabeledDataset([0.1, 0.2], [0, 2])
    with pytest.raises(ValidationError):
        LabeledDataset([0.1], [0, 1])
    data = LabeledDataset(make_rng(0).random(9), make_rng(1).integers(0, 2, 9))
    path = tmp_path / "d.csv"
    data.to_csv(path)
    assert path.read_text().splitlines()[0] == "x,y"
    back = LabeledDataset.from_csv(path)
    assert np.array_equal(back.x, data.x) and np.array_equal(back.y, data.y)


def test_erm_examples():
    hc = thresholds(0.25, 0.5, 0.75)
    data = LabeledDataset([0.1, 0.3, 0.6], [0, 0, 1])
    assert erm_choose(hc, data, []) == 0
    # only theta = 0.5 gets every point right
    assert erm_choose(hc, data, [0, 1, 2]) == 1


@settings(max_examples=100, deadline=None)
@given(x=st.lists(st.floats(0, 1), min_size=3, max_size=3), y=st.lists(st.integers(0, 1), min_size=3, max_size=3),
       prefix=st.lists(st.integers(0, 2), max_size=3, unique=True))
def test_erm_matches_exhaustive_scan(x, y, prefix):
    ths = (0.25, 0.5, 0.75)
    hc = thresholds(*ths)
    data = LabeledDataset(x, y)
    mistakes = [sum(int(x[i] >= th) != y[i] for i in prefix) for th in ths]
    assert erm_choose(hc, data, prefix) == min(range(3), key=lambda j: (mistakes[j], j))


def test_threshold_class_matches_generic_predict():
    tc = ThresholdClass(8)
    generic = FiniteHypothesisClass(tc.hypotheses, 1)
    x = make_rng(2).random(50)
    assert np.array_equal(tc.predict(x), generic.predict(x))
    assert tc.vc_dim == 1 and len(tc) == 8


def test_deviation_eps_values():
    assert deviation_eps(1, 8, 2 / math.e) == pytest.approx(DEV_D1_T8_2E, rel=1e-14)
    assert deviation_eps(2, 100, 0.05) == pytest.approx(DEV_D2_T100_005, rel=1e-14)
    second = lambda t: deviation_eps(1, t, 0.1) - 0.5 * math.sqrt(8 / t * math.log(2 * math.e * t))
    assert second(400) == pytest.approx(second(100) / 2, rel=1e-12)
    for bad in [(0, 5, 0.1), (1, 0, 0.1), (1, 5, 1.0)]:
        with pytest.raises(ConfigurationError):
            deviation_eps(*bad)


def brute_force_regret(hc, data, order):
    L = loss_matrix(hc, data)
    total = 0.0
    for t in range(len(order)):
        h = erm_choose(hc, data, order[:t])
        total += L[order[t], h]
    return total - L.sum(axis=0).min()


@pytest.mark.parametrize("T", [4, 5, 6])
def test_realizable_regret_enumerated_over_all_orders(T):
    x = (np.arange(T) + 0.5) / T
    hc = thresholds(0.0, 0.3, 0.5, 0.8)
    data = LabeledDataset(x, (x >= 0.5).astype(int))
    L = loss_matrix(hc, data)
    assert (L.sum(axis=0) == 0).sum() == 1
    table = {perm: brute_force_regret(hc, data, list(perm)) for perm in permutations(range(T))}
    assert max(table.values()) <= len(hc)
    assert min(table.values()) >= 0
    for seed in range(40):
        report = run_random_order_erm(hc, data, seed)
        assert report.regret == table[tuple(Permutation.draw(T, seed).order)]


def test_single_hypothesis_has_zero_regret():
    hc = thresholds(0.4)
    data = LabeledDataset(make_rng(0).random(100), make_rng(1).integers(0, 2, 100))
    assert run_random_order_erm(hc, data, 3).regret == 0.0


def test_erm_dominance_and_deviation_log():
    hc = ThresholdClass(16)
    rng = make_rng(5)
    data = LabeledDataset(rng.random(300), rng.integers(0, 2, 300))
    report = run_random_order_erm(hc, data, 2)
    L = loss_matrix(hc, data)
    order = Permutation.draw(300, 2).order
    prefix = np.vstack([np.zeros(16), np.cumsum(L[order], axis=0)[:-1]])
    chosen = report.diagnostics["chosen"]
    assert np.all(prefix[np.arange(300), chosen] <= prefix.min(axis=1))
    sup = report.diagnostics["sup_deviation"]
    assert math.isnan(sup[0])
    for t in (1, 10, 299):
        assert sup[t] == pytest.approx(sup_deviation(L, order[:t]), abs=1e-12)


def test_regret_bound_formula():
    assert regret_bound(1, 4096) == pytest.approx(8 * math.sqrt(4096 * math.log(4096)))


def test_deviation_coverage_small():
    hc = ThresholdClass(16)
    rng = make_rng(8)
    data = LabeledDataset(rng.random(512), rng.integers(0, 2, 512))
    assert deviation_exceedance(hc, data, 32, 0.1, 500, seed=0) <= 0.1
    with pytest.raises(ConfigurationError):
        deviation_exceedance(hc, data, 0, 0.1, 10, seed=0)

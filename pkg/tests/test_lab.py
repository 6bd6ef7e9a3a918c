import math

import numpy as np
import pytest

from confregion.crc import compute_crc_curve, err_above_area
from confregion.lab import (
    SyntheticTask,
    binomial_threshold,
    check_theorem1,
    hoeffding_bound,
    perturb_forecaster,
    sample_arrays,
    sample_batch,
    sharpen,
)


def constant(row):
    return lambda x: np.tile(np.asarray(row, dtype=float), (x.shape[0], 1))


def test_uniform_two_label_task():
    task = SyntheticTask(num_labels=2, conditional=constant([0.5, 0.5]), seed=4)
    batch = sample_batch(task, 2000)
    assert all(fv.probs == (0.5, 0.5) for fv in batch)
    heads = sum(fv.true_label for fv in batch) / len(batch)
    assert abs(heads - 0.5) < 4 * math.sqrt(0.25 / 2000)


def test_one_hot_task_is_deterministic():
    task = SyntheticTask(num_labels=3, conditional=constant([0.0, 0.0, 1.0]))
    fs = sample_arrays(task, 500)
    assert np.all(fs.labels == 2)
    assert np.all(fs.probs == [0.0, 0.0, 1.0])


def test_default_task_produces_valid_spread_distributions():
    fs = sample_arrays(SyntheticTask(), 20000)
    assert np.all(fs.probs >= 0) and np.allclose(fs.probs.sum(axis=1), 1.0)
    # the conditionals are not near-deterministic
    assert 0.3 < fs.probs.max(axis=1).mean() < 0.95


def test_label_frequencies_follow_conditionals():
    fs = sample_arrays(SyntheticTask(seed=9), 100_000)
    # bin by the forecast of label 0, compare observed frequency with mean forecast
    p0 = fs.probs[:, 0]
    bins = np.digitize(p0, np.linspace(0, 1, 11)[1:-1])
    for b in range(10):
        sel = bins == b
        if sel.sum() < 500:
            continue
        observed = np.mean(fs.labels[sel] == 0)
        expected = p0[sel].mean()
        sd = math.sqrt(expected * (1 - expected) / sel.sum())
        assert abs(observed - expected) < 5 * sd + 1e-9


def test_sampling_is_deterministic():
    a = sample_arrays(SyntheticTask(seed=3), 100, stream=2)
    b = sample_arrays(SyntheticTask(seed=3), 100, stream=2)
    c = sample_arrays(SyntheticTask(seed=3), 100, stream=3)
    assert a.probs.tobytes() == b.probs.tobytes() and np.array_equal(a.labels, b.labels)
    assert not np.array_equal(a.probs, c.probs)


def test_bound_formula():
    assert hoeffding_bound(1000, 0.05) == pytest.approx(math.exp(-5))
    assert hoeffding_bound(1000, 0.05) == pytest.approx(6.737947e-3, rel=1e-6)
    assert hoeffding_bound(50, 0.0) == 1.0
    assert binomial_threshold(math.exp(-5), 200) < 0.03


def test_zero_epsilon_is_vacuous():
    check = check_theorem1(SyntheticTask(), n=100, delta=0.2, epsilon=0.0, trials=5)
    assert check.bound == 1.0 and check.passed


def test_check_rejects_bad_parameters():
    with pytest.raises(ValueError):
        check_theorem1(SyntheticTask(), delta=0.0)
    with pytest.raises(ValueError):
        check_theorem1(SyntheticTask(), epsilon=-0.1)


def test_temperature_identity_and_limit():
    task = SyntheticTask(seed=5)
    same = perturb_forecaster(task, 1.0)
    a, b = sample_arrays(task, 200), sample_arrays(same, 200)
    assert a.probs.tobytes() == b.probs.tobytes()
    assert np.allclose(sharpen(np.array([[0.6, 0.4]]), 1e-3), [[1.0, 0.0]])
    flat = sharpen(np.array([[0.6, 0.4]]), 100.0)
    assert abs(flat[0, 0] - 0.5) < 0.01
    with pytest.raises(ValueError):
        sharpen(np.array([[0.5, 0.5]]), 0.0)


def test_sharpening_keeps_labels_from_true_conditionals():
    task = SyntheticTask(seed=2)
    assert np.array_equal(sample_arrays(task, 300).labels,
                          sample_arrays(perturb_forecaster(task, 0.25), 300).labels)


def test_overconfidence_breaks_calibration_in_most_trials():
    task = perturb_forecaster(SyntheticTask(seed=1), 0.25)
    broken = sum(err_above_area(compute_crc_curve(sample_arrays(task, 1000, stream=t))) > 0 for t in range(20))
    assert broken >= 18


def test_bayes_optimal_small_grid_within_slack():
    # every (n, delta, epsilon) on a small grid respects bound + 3 sigma
    task = SyntheticTask(seed=11)
    for n in (200, 1000):
        for delta in (0.05, 0.2):
            for eps in (0.02, 0.05):
                check = check_theorem1(task, n, delta, eps, trials=40)
                assert check.observed_failure_freq <= binomial_threshold(check.bound, 40)

import numpy as np
import pytest
from scipy import stats

from qkdlab.rng import derive_trial_rng, label_key


def test_same_inputs_same_draws():
    a = derive_trial_rng(12345, 7, "channel").random(1000)
    b = derive_trial_rng(12345, 7, "channel").random(1000)
    np.testing.assert_array_equal(a, b)


def test_labels_uncorrelated():
    a = derive_trial_rng(12345, 3, "channel").standard_normal(100_000)
    b = derive_trial_rng(12345, 3, "eve").standard_normal(100_000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.01


@pytest.mark.parametrize("other", [(12345, 4, "channel"), (12346, 3, "channel")])
def test_neighbouring_streams_differ(other):
    a = derive_trial_rng(12345, 3, "channel").integers(0, 2**63, 16)
    b = derive_trial_rng(*other).integers(0, 2**63, 16)
    assert not np.any(a == b)


def test_master_seed_first_draw_collisions():
    # first draws over 2000 seeds, binned into 100 cells, should look uniform
    first = np.array([derive_trial_rng(s, 0, "x").random() for s in range(2000)])
    counts = np.histogram(first, bins=100, range=(0, 1))[0]
    assert stats.chisquare(counts).pvalue > 0.001
    assert np.unique(first).size == first.size


def test_label_key_stable():
    assert label_key("eve") == label_key("eve")
    assert label_key("eve") != label_key("channel")


@pytest.mark.parametrize("seed,index", [(-1, 0), (2**64, 0), (0, -1)])
def test_rejects_bad_inputs(seed, index):
    with pytest.raises(ValueError):
        derive_trial_rng(seed, index, "x")

"""Synthetic shape dataset: shapes, determinism, mask sanity."""

import numpy as np

from fixture_exporter import CLASS_NAMES, make_dataset, render_example
from fixture_exporter.dataset import SIZE


def test_class_names():
    assert len(CLASS_NAMES) == 10
    assert len(set(CLASS_NAMES)) == 10


def test_render_example_shapes_and_range():
    for class_idx in range(10):
        rng = np.random.default_rng([9, class_idx])
        image, mask = render_example(class_idx, rng)
        assert image.shape == (3, SIZE, SIZE) and image.dtype == np.float32
        assert mask.shape == (SIZE, SIZE) and mask.dtype == np.bool_
        assert image.min() >= 0.0 and image.max() <= 1.0
        assert 10 < mask.sum() < SIZE * SIZE / 2


def test_render_example_deterministic():
    a = render_example(3, np.random.default_rng(42))
    b = render_example(3, np.random.default_rng(42))
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_make_dataset_balanced_and_shuffled():
    images, labels, masks = make_dataset(5, seed=0)
    assert images.shape == (50, 3, SIZE, SIZE)
    assert masks.shape == (50, SIZE, SIZE)
    assert np.bincount(labels, minlength=10).tolist() == [5] * 10
    assert not np.array_equal(labels, np.sort(labels))


def test_make_dataset_deterministic():
    a = make_dataset(3, seed=5)
    b = make_dataset(3, seed=5)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)

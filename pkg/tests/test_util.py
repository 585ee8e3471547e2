from __future__ import annotations

import math
import os

import numpy as np
import pytest

from infogame._util import pairwise_mean, pairwise_sum, parallel_map, thread_count
from infogame.errors import ConfigError


def test_pairwise_sum_matches_fsum_closely():
    rng = np.random.default_rng(0)
    values = rng.standard_normal(1000) * 1e6
    exact = math.fsum(values)
    assert abs(pairwise_sum(values) - exact) < 1e-4
    # naive left fold is allowed to be worse, pairwise must not be
    naive = 0.0
    for v in values:
        naive += v
    assert abs(pairwise_sum(values) - exact) <= abs(naive - exact) + 1e-6


def test_pairwise_sum_is_order_of_evaluation_fixed():
    rng = np.random.default_rng(1)
    values = rng.standard_normal(257)
    assert pairwise_sum(values) == pairwise_sum(values.copy())


def test_pairwise_sum_edge_sizes():
    assert pairwise_sum(np.array([])) == 0.0
    assert pairwise_sum(np.array([3.5])) == 3.5
    assert pairwise_sum(np.array([1.0, 2.0])) == 3.0
    assert pairwise_mean(np.array([1.0, 2.0, 3.0, 4.0])) == 2.5


def test_thread_count_env(monkeypatch):
    monkeypatch.delenv("INFOGAME_THREADS", raising=False)
    auto = thread_count()
    assert 1 <= auto <= 4
    monkeypatch.setenv("INFOGAME_THREADS", "2")
    assert thread_count() == 2
    monkeypatch.setenv("INFOGAME_THREADS", "0")
    assert thread_count() == auto
    monkeypatch.setenv("INFOGAME_THREADS", "zebra")
    with pytest.raises(ConfigError):
        thread_count()
    monkeypatch.setenv("INFOGAME_THREADS", "-1")
    with pytest.raises(ConfigError):
        thread_count()


def test_parallel_map_preserves_order(monkeypatch):
    items = list(range(41))
    monkeypatch.setenv("INFOGAME_THREADS", "4")
    assert parallel_map(lambda k: k * k, items) == [k * k for k in items]
    monkeypatch.setenv("INFOGAME_THREADS", "1")
    assert parallel_map(lambda k: k * k, items) == [k * k for k in items]

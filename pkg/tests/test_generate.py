import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ftaplab import ModelParams, check_nflvr, esm_exists, generate_random_model, random_admissible_sequence
from ftaplab.generate import random_tree


def test_deterministic():
    p = ModelParams(depth=3, branching=3, dim=2, constraint_density=0.5)
    a, b = generate_random_model(17, p), generate_random_model(17, p)
    assert a.S == b.S and a.cones == b.cones and a.tree == b.tree


@given(st.integers(0, 10_000), st.integers(1, 3), st.integers(2, 3), st.integers(1, 2),
       st.sampled_from([0.0, 0.5, 1.0]))
def test_emm_first_admits_measure(seed, depth, branching, dim, density):
    m = generate_random_model(seed, ModelParams(depth=depth, branching=branching, dim=dim,
                                                constraint_density=density, emm_first=True))
    assert esm_exists(m).exists


def test_both_verdicts_at_depth_one():
    verdicts = [check_nflvr(generate_random_model(s, ModelParams(depth=1))).holds for s in range(60)]
    assert 10 <= sum(verdicts) <= 50


def test_probabilities_positive_and_normalized():
    tree = random_tree(random.Random(3), 3, 3)
    for v in tree.internal:
        kids = tree.children(v)
        assert 2 <= len(kids) <= 3
        assert sum(tree.cond_prob(c) for c in kids) == 1
    assert all(tree.cond_prob(v) > 0 for v in tree.ids)


def test_budget():
    with pytest.raises(ValueError):
        generate_random_model(0, ModelParams(depth=13, branching=3))


@given(st.integers(0, 10_000))
def test_admissible_sequences(seed):
    m = generate_random_model(seed, ModelParams(depth=2, constraint_density=0.5, dim=2))
    for w in random_admissible_sequence(m, random.Random(seed), 5):
        assert w.admissible
        assert all(m.in_cone(v, w.strategy[v]) for v in m.tree.internal)

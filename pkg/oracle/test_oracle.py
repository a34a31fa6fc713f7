"""
Tests for the oracle package: sets, queries, plans, evaluation, sampling, text format.
"""

import itertools
import math
from collections import Counter

import numpy as np
import pytest

from harness.streams import derive_stream
from oracle import (
    DefectSet,
    Query,
    QueryPlan,
    ResponseVector,
    UniverseMismatchError,
    evaluate,
    evaluate_plan,
    parse_defects,
    parse_plan,
    format_defects,
    format_plan,
    random_p_plan,
    random_p_query,
    random_size_plan,
    read_plan,
    singleton_plan,
    uniform_defect_set,
    uniform_subset_indices,
    write_plan,
)


def query(n, items):
    return Query.from_indices(n, items)


def defects(n, items):
    return DefectSet.from_indices(n, items)


# ============================================================================
# MODELS
# ============================================================================

def test_defect_set_validation():
    assert defects(5, [3, 1]).members == (1, 3)
    with pytest.raises(ValueError):
        DefectSet(universe_size=5, members=(1, 1))
    with pytest.raises(ValueError):
        DefectSet(universe_size=5, members=(0, 2))
    with pytest.raises(ValueError):
        DefectSet(universe_size=5, members=(4, 6))


def test_query_representation_follows_density():
    sparse = query(6400, [5, 17, 99])
    dense = query(6400, range(1, 101))
    assert not sparse.is_dense and dense.is_dense
    assert sparse.size == 3 and dense.size == 100
    assert dense.contains(100) and not dense.contains(101)
    assert sparse.contains(17) and not sparse.contains(18)
    assert query(64, [2, 2, 7]).member_indices().tolist() == [2, 7]
    with pytest.raises(ValueError):
        query(10, [0, 3])


def test_query_equality_ignores_storage():
    items = list(range(1, 200, 3))
    dense = query(640, items)
    sparse = Query(universe_size=640, indices=np.array(items))
    assert dense.is_dense and not sparse.is_dense
    assert dense == sparse


def test_plan_is_read_only():
    plan = QueryPlan.from_member_arrays(5, 1, [np.array([1, 2]), np.array([3])])
    with pytest.raises(ValueError):
        plan.members[0] = 4
    assert plan.num_queries == 2
    assert plan.sizes().tolist() == [2, 1]


def test_plan_rejects_unsorted_rows():
    with pytest.raises(ValueError):
        QueryPlan.from_member_arrays(5, 1, [np.array([2, 1])])
    # a row may restart below the previous row's last member
    plan = QueryPlan.from_member_arrays(5, 1, [np.array([4, 5]), np.array([1, 2])])
    assert plan.row(1).tolist() == [1, 2]


def test_plan_concat_and_digest():
    a = QueryPlan.from_member_arrays(6, 2, [np.array([1, 2, 3])])
    b = QueryPlan.from_member_arrays(6, 2, [np.array([]), np.array([4, 6])])
    joined = a.concat(b)
    assert [r.tolist() for r in joined.rows()] == [[1, 2, 3], [], [4, 6]]
    assert joined.digest() != a.digest()
    assert joined == QueryPlan.from_member_arrays(6, 2, [np.array([1, 2, 3]), np.array([]), np.array([4, 6])])
    with pytest.raises(UniverseMismatchError):
        a.concat(QueryPlan.empty(7, 2))
    with pytest.raises(ValueError):
        a.concat(QueryPlan.empty(6, 1))


def test_response_vector_string():
    assert ResponseVector.from_bits([0, 1, 1, 0]).as_string() == "0110"
    assert ResponseVector.from_bits([]).as_string() == ""
    with pytest.raises(ValueError):
        ResponseVector.from_bits([0, 2])


# ============================================================================
# EVALUATION
# ============================================================================

def test_evaluate_examples():
    w = query(5, [1, 2, 3])
    b = defects(5, [2, 3])
    assert evaluate(w, b, 2) == 1
    assert evaluate(w, b, 3) == 0
    assert evaluate(query(5, []), b, 1) == 0
    with pytest.raises(UniverseMismatchError):
        evaluate(w, defects(6, [2]), 1)


def test_evaluate_plan_examples():
    assert len(evaluate_plan(QueryPlan.empty(4, 1), defects(4, [1]))) == 0
    plan = QueryPlan.from_queries(4, 1, [query(4, [1]), query(4, [1, 2])])
    assert evaluate_plan(plan, defects(4, [2])).bits.tolist() == [0, 1]
    with pytest.raises(UniverseMismatchError):
        evaluate_plan(plan, defects(5, [2]))


@pytest.mark.parametrize("lam", [1, 2, 3])
def test_evaluate_plan_matches_single_queries(lam):
    rng = derive_stream(11, f"plan-vs-single-{lam}")
    for n in (7, 64, 500):
        plan = random_p_plan(n, lam, [(0.02, 5), (0.3, 5), (0.9, 2)], rng)
        b = uniform_defect_set(n, min(n, 9), rng)
        bits = evaluate_plan(plan, b).bits.tolist()
        assert bits == [evaluate(q, b, lam) for q in plan.queries()]


def test_evaluation_leaves_plan_unchanged():
    rng = derive_stream(12, "non-adaptive")
    plan = random_p_plan(100, 1, [(0.1, 20)], rng)
    before = plan.digest()
    b = uniform_defect_set(100, 10, rng)
    first = evaluate_plan(plan, b)
    evaluate_plan(plan, uniform_defect_set(100, 40, rng))
    assert plan.digest() == before
    assert evaluate_plan(plan, b) == first


def test_threshold_monotonicity():
    rng = derive_stream(13, "monotone")
    plan = random_p_plan(50, 1, [(0.3, 30)], rng)
    b = uniform_defect_set(50, 12, rng)
    for lam in range(1, 6):
        low = evaluate_plan(plan.model_copy(update={'lambda_': lam}), b).bits
        high = evaluate_plan(plan.model_copy(update={'lambda_': lam + 1}), b).bits
        assert np.all(high <= low)


def test_large_sparse_universe_is_exact():
    n = 10 ** 9
    b = defects(n, [1, 500_000_000, n])
    w = query(n, [1, 2, n])
    assert evaluate(w, b, 2) == 1
    plan = QueryPlan.from_queries(n, 2, [w, query(n, [500_000_000])])
    assert evaluate_plan(plan, b).bits.tolist() == [1, 0]


# ============================================================================
# SAMPLING
# ============================================================================

def test_p_query_extremes():
    rng = derive_stream(14, "p-extremes")
    assert random_p_query(30, 0.0, rng).size == 0
    assert random_p_query(30, 1.0, rng).member_indices().tolist() == list(range(1, 31))


def test_p_query_mean_size():
    rng = derive_stream(15, "p-mean")
    n, p, draws = 10 ** 4, 0.3, 2000
    sizes = np.array([random_p_query(n, p, rng).size for _ in range(draws)])
    sigma = math.sqrt(n * p * (1 - p) / draws)
    assert abs(sizes.mean() - n * p) <= 4 * sigma


def test_p_query_item_frequency():
    rng = derive_stream(16, "p-items")
    counts = np.zeros(20)
    runs = 20000
    for _ in range(runs):
        counts[random_p_query(20, 0.25, rng).member_indices() - 1] += 1
    sigma = math.sqrt(0.25 * 0.75 / runs)
    assert np.all(np.abs(counts / runs - 0.25) <= 4.5 * sigma)


def test_uniform_defect_set_extremes():
    rng = derive_stream(17, "uniform-extremes")
    assert uniform_defect_set(8, 0, rng).size == 0
    assert uniform_defect_set(8, 8, rng).members == tuple(range(1, 9))
    with pytest.raises(ValueError):
        uniform_defect_set(8, 9, rng)


def test_uniform_subsets_are_uniform():
    rng = derive_stream(18, "uniform-subsets")
    runs = 200_000
    counts = Counter(tuple(uniform_subset_indices(6, 3, rng).tolist()) for _ in range(runs))
    assert len(counts) == math.comb(6, 3)
    for subset in itertools.combinations(range(1, 7), 3):
        assert abs(counts[subset] / runs - 1 / 20) <= 0.005


def test_sparse_sampler_is_uniform():
    # size below n/64 goes through the sequential sampler
    rng = derive_stream(19, "floyd")
    runs = 60_000
    counts = np.zeros(200)
    for _ in range(runs):
        picked = uniform_subset_indices(200, 2, rng)
        assert picked.size == 2 and picked[0] < picked[1]
        counts[picked - 1] += 1
    expected = runs * 2 / 200
    sigma = math.sqrt(runs * (2 / 200) * (1 - 2 / 200))
    assert np.all(np.abs(counts - expected) <= 5 * sigma)


def test_random_size_and_singleton_plans():
    rng = derive_stream(20, "sizes")
    plan = random_size_plan(30, 2, [0, 5, 30], rng)
    assert plan.sizes().tolist() == [0, 5, 30]
    singles = singleton_plan(4, 1)
    assert evaluate_plan(singles, defects(4, [2, 4])).bits.tolist() == [0, 1, 0, 1]


# ============================================================================
# TEXT FORMAT
# ============================================================================

def test_plan_text_format():
    plan = QueryPlan.from_member_arrays(9, 2, [np.array([1, 4]), np.array([]), np.array([9])])
    text = format_plan(plan)
    assert text == "n=9 lambda=2 q=3\n1 4\n\n9\n"
    assert parse_plan(text) == plan
    assert parse_plan("n=3 lambda=1 q=0\n").num_queries == 0
    with pytest.raises(ValueError):
        parse_plan("n=3 lambda=1 q=2\n1\n")
    with pytest.raises(ValueError):
        parse_plan("n=3 q=1\n1\n")


def test_plan_file_round_trip(tmp_path):
    rng = derive_stream(21, "plan-file")
    plan = random_p_plan(300, 1, [(0.01, 4), (0.5, 3)], rng)
    path = write_plan(plan, tmp_path / "plan.txt")
    assert path.read_bytes().endswith(b"\n") and b"\r" not in path.read_bytes()
    assert read_plan(path) == plan


def test_defect_text_format():
    b = defects(10, [2, 7])
    assert format_defects(b) == "n=10 d=2\n2 7\n"
    assert parse_defects(format_defects(b)) == b
    assert parse_defects("n=4 d=0\n\n").size == 0
    with pytest.raises(ValueError):
        parse_defects("n=4 d=2\n1\n")

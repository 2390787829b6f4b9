import json
import math
from fractions import Fraction

import numpy as np
import pytest

from qlmm.oraclesim import (
    Comparison,
    NoFeasibleCandidate,
    OraclePredicate,
    durr_hoyer,
    eval_all_steps_oracle,
    eval_final_time_oracle,
    feasible_items,
    minimum_search,
)


def test_single_candidate():
    idx, value, iterations, calls, _ = minimum_search([Fraction(3)], seed=0)
    assert idx == 0 and value == 3 and iterations <= 1
    assert calls >= 1


def test_distinct_values_find_argmin():
    rng = np.random.default_rng(5)
    values = [Fraction(int(v)) for v in rng.permutation(1000)[:16]]
    target = min(range(16), key=values.__getitem__)
    iters = []
    for seed in range(100):
        idx, _, iterations, _, _ = minimum_search(values, seed)
        assert idx == target
        iters.append(iterations)
    # threshold updates grow like log C, not C
    assert np.mean(iters) < 2 * math.log(16) + 1


def test_maximize_and_infeasible_entries():
    values = [None, Fraction(2), None, Fraction(7), Fraction(5)]
    for seed in range(20):
        assert minimum_search(values, seed, maximize=True)[0] == 3
        assert minimum_search(values, seed)[0] == 1
    with pytest.raises(NoFeasibleCandidate):
        minimum_search([None, None], 0)


def test_thresholds_improve_strictly():
    values = [Fraction(v) for v in (9, 4, 7, 1, 8, 3)]
    _, _, _, _, thresholds = minimum_search(values, seed=2)
    assert all(b < a for a, b in zip(thresholds, thresholds[1:]))


def test_comparison_validation():
    with pytest.raises(ValueError):
        Comparison(0, "first", "<", "threshold")
    with pytest.raises(ValueError):
        Comparison(0, "final", "!=", "threshold")
    with pytest.raises(ValueError):
        OraclePredicate("final_time", (Comparison(0, "every", ">=", "bias"),))


def test_final_time_marks_non_oscillating(spring, spring_records):
    _, cands = spring
    unsigned = {i for i, p in enumerate(cands) if p["p_c"] >= 13}
    assert eval_final_time_oracle(spring_records, math.inf) == unsigned
    assert eval_final_time_oracle(spring_records, None) == unsigned
    assert eval_final_time_oracle(spring_records, -math.inf) == set()
    items = feasible_items(spring_records, OraclePredicate.final_time())
    assert eval_final_time_oracle(spring_records, min(items.values())) == set()


def test_final_time_marks_are_nested(spring_records):
    items = feasible_items(spring_records, OraclePredicate.final_time())
    prev = set()
    for t in sorted(items.values()):
        marked = eval_final_time_oracle(spring_records, t + Fraction(1, 10 ** 9))
        assert prev <= marked and t in {items[i] for i in marked}
        prev = marked


def test_all_steps_oracle(projectile, projectile_records):
    _, cands = projectile
    items = feasible_items(projectile_records, OraclePredicate.all_steps())
    # one ground crossing per angle
    assert sorted(c for c, _ in items) == list(range(len(cands)))
    assert eval_all_steps_oracle(projectile_records, 10 ** 6) == set()
    assert eval_all_steps_oracle(projectile_records, -math.inf) == set(items)
    best = max(items.values())
    assert {c for c, _ in eval_all_steps_oracle(projectile_records, best - Fraction(1, 10 ** 9))} == {7}
    with pytest.raises(ValueError):
        eval_all_steps_oracle(projectile_records, 0, time_independent=False)


def test_spring_search_winner(spring, spring_records):
    _, cands = spring
    for seed in range(10):
        res = durr_hoyer(spring_records, OraclePredicate.final_time(), seed)
        assert cands[res.winner]["p_c"] == 13.0
    data = json.loads(res.to_json())
    assert data["winner"] == res.winner and "step" not in data


def test_projectile_search_winner(projectile, projectile_records):
    _, cands = projectile
    res = durr_hoyer(projectile_records, OraclePredicate.all_steps(), seed=3)
    assert cands[res.winner]["theta_deg"] == 45.0
    assert res.step is not None and res.winner_value > 160


def test_empty_records():
    with pytest.raises(NoFeasibleCandidate):
        durr_hoyer([], OraclePredicate.final_time())

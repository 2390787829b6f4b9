"""Classical stand-in for the oracle-driven minimum search.

Predicates look only at stored register values ``y`` and at the bias held in
the same registers, as a comparator circuit would.  The Dürr–Høyer loop is
emulated by drawing uniformly from the strictly-better set in place of a
Grover measurement; the Grover iteration count is tallied as an estimate.
"""

from __future__ import annotations

import json
import math
import operator
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .stepper import RunRecord


class NoFeasibleCandidate(Exception):
    pass


_RELATIONS = {"<": operator.lt, ">": operator.gt, "<=": operator.le, ">=": operator.ge}
_STEPS = ("final", "every", "n", "n+1")
_REFS = ("threshold", "bias")


@dataclass(frozen=True)
class Comparison:
    """``y[step, dim] <relation> reference``.

    ``step`` is ``final`` (last entry), ``every`` (all entries must hold), or
    ``n`` / ``n+1`` relative to the step being marked.  A ``threshold``
    reference means ``bias + T``, so thresholds are in state units.
    """

    dim: int
    step: str
    relation: str
    reference: str

    def __post_init__(self):
        if self.step not in _STEPS:
            raise ValueError(f"step selector must be one of {_STEPS}, got {self.step!r}")
        if self.relation not in _RELATIONS:
            raise ValueError(f"relation must be one of {tuple(_RELATIONS)}, got {self.relation!r}")
        if self.reference not in _REFS:
            raise ValueError(f"reference must be one of {_REFS}, got {self.reference!r}")


@dataclass(frozen=True)
class OraclePredicate:
    mode: str
    comparisons: tuple
    maximize: bool = False

    def __post_init__(self):
        if self.mode not in ("final_time", "all_steps"):
            raise ValueError(f"mode must be final_time or all_steps, got {self.mode!r}")
        object.__setattr__(self, "comparisons", tuple(self.comparisons))
        n_thr = sum(c.reference == "threshold" for c in self.comparisons)
        if n_thr != 1:
            raise ValueError(f"exactly one threshold comparison expected, got {n_thr}")

    @classmethod
    def final_time(cls, dim: int = 0, maximize: bool = False) -> "OraclePredicate":
        """Final position below T, never below zero along the way."""
        return cls("final_time", (
            Comparison(dim, "final", ">" if maximize else "<", "threshold"),
            Comparison(dim, "every", ">=", "bias"),
        ), maximize)

    @classmethod
    def all_steps(cls, range_dim: int = 0, height_dim: int = 1, maximize: bool = True) -> "OraclePredicate":
        """Step ``n`` is the last one above ground and its range beats T."""
        return cls("all_steps", (
            Comparison(height_dim, "n", ">", "bias"),
            Comparison(height_dim, "n+1", "<", "bias"),
            Comparison(range_dim, "n", ">" if maximize else "<", "threshold"),
        ), maximize)

    @property
    def threshold_comparison(self) -> Comparison:
        return next(c for c in self.comparisons if c.reference == "threshold")


def _steps_of(rec: RunRecord, mode: str) -> range:
    if mode == "final_time":
        return range(len(rec) - 1, len(rec))
    return range(len(rec) - 1)


def _holds(c: Comparison, rec: RunRecord, n: int, ref: Fraction) -> bool:
    rel = _RELATIONS[c.relation]
    if c.step == "every":
        return all(rel(rec.y(i, c.dim), ref) for i in range(len(rec)))
    i = {"final": len(rec) - 1, "n": n, "n+1": n + 1}[c.step]
    return rel(rec.y(i, c.dim), ref)


def feasible_items(records: Sequence[RunRecord], predicate: OraclePredicate) -> dict:
    """Items passing every non-threshold comparison, mapped to their threshold
    quantity ``y - bias`` (exact)."""
    thr = predicate.threshold_comparison
    out = {}
    for c, rec in enumerate(records):
        bias = rec.stored_bias
        for n in _steps_of(rec, predicate.mode):
            if all(_holds(cmp, rec, n, bias[cmp.dim])
                   for cmp in predicate.comparisons if cmp.reference == "bias"):
                key = c if predicate.mode == "final_time" else (c, n)
                step = len(rec) - 1 if thr.step == "final" else n
                out[key] = rec.y(step, thr.dim) - bias[thr.dim]
    return out


def _marked(records, predicate: OraclePredicate, threshold) -> set:
    items = feasible_items(records, predicate)
    if threshold is None:
        return set(items)
    if math.isinf(float(threshold)):
        # +inf admits everything when minimizing, -inf when maximizing
        return set(items) if (float(threshold) > 0) != predicate.maximize else set()
    thr = predicate.threshold_comparison
    rel = _RELATIONS[thr.relation]
    out = set()
    for key, value in items.items():
        c = key if predicate.mode == "final_time" else key[0]
        n = len(records[c]) - 1 if predicate.mode == "final_time" else key[1]
        ref = records[c].stored_bias[thr.dim] + Fraction(threshold)
        if _holds(thr, records[c], n, ref):
            out.add(key)
    return out


def eval_final_time_oracle(records: Sequence[RunRecord], threshold, dim: int = 0) -> set:
    """Candidates whose final ``y[dim]`` is below ``bias + threshold`` and whose
    ``y[dim]`` never dropped below the bias."""
    return _marked(records, OraclePredicate.final_time(dim), threshold)


def eval_all_steps_oracle(records: Sequence[RunRecord], threshold, maximize: bool = True,
                          range_dim: int = 0, height_dim: int = 1,
                          time_independent: bool = True) -> set:
    """``(candidate, n)`` pairs where the height crosses its bias between ``n``
    and ``n + 1`` and the range at ``n`` beats ``bias + threshold``."""
    if not time_independent:
        raise ValueError("all-steps mode needs a time-independent derivative")
    return _marked(records, OraclePredicate.all_steps(range_dim, height_dim, maximize), threshold)


@dataclass
class SearchResult:
    winner: int
    winner_value: float
    iterations: int
    oracle_calls_estimate: float
    seed: int
    step: int | None = None
    thresholds: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {
            "winner": self.winner,
            "winner_value": self.winner_value,
            "iterations": self.iterations,
            "oracle_calls_estimate": self.oracle_calls_estimate,
            "seed": self.seed,
        }
        if self.step is not None:
            out["step"] = self.step
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def minimum_search(values: Sequence, seed: int, maximize: bool = False):
    """Threshold-iteration search over ``values`` (``None`` marks infeasible items).

    Returns ``(index, value, iterations, calls, thresholds)``.  Each threshold
    update costs ``sqrt(C / t)`` oracle calls for ``t`` marked items; the final
    empty search costs ``sqrt(C)``.
    """
    C = len(values)
    feasible = [i for i, v in enumerate(values) if v is not None]
    if not feasible:
        raise NoFeasibleCandidate("no item satisfies the feasibility part of the predicate")
    better = operator.gt if maximize else operator.lt
    rng = np.random.default_rng(seed)
    pick = int(rng.integers(C))
    current = pick if values[pick] is not None else None
    thresholds = [] if current is None else [values[current]]
    iterations, calls = 0, 0.0
    while True:
        if current is None:
            marked = feasible
        else:
            t_val = values[current]
            marked = [i for i in feasible if better(values[i], t_val)]
        if not marked:
            calls += math.sqrt(C)
            break
        calls += math.sqrt(C / len(marked))
        iterations += 1
        current = marked[int(rng.integers(len(marked)))]
        thresholds.append(values[current])
    return current, values[current], iterations, calls, thresholds


def durr_hoyer(records: Sequence[RunRecord], predicate: OraclePredicate, seed: int = 0) -> SearchResult:
    if not records:
        raise NoFeasibleCandidate("no candidates")
    items = feasible_items(records, predicate)
    if predicate.mode == "final_time":
        domain = list(range(len(records)))
    else:
        domain = [(c, n) for c, rec in enumerate(records) for n in _steps_of(rec, predicate.mode)]
    values = [items.get(key) for key in domain]
    idx, value, iterations, calls, thresholds = minimum_search(values, seed, predicate.maximize)
    key = domain[idx]
    if predicate.mode == "final_time":
        winner, step = key, None
    else:
        winner, step = key
    return SearchResult(winner, float(value), iterations, calls, seed, step,
                        [float(t) for t in thresholds])

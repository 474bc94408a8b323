"""Model-agnostic counterfactual search with irreducibility reduction.

The search samples change sets of size 1..k_max over the mutable features,
proposes replacement values from per-feature value grids (evenly spaced for
numeric domains, all alternatives for categorical/binary), keeps every
candidate that flips the thresholded decision, and greedily reduces each to
an irreducible change set. Every flip check goes through the real model, so
results are exact with respect to it.

Feature preference runs in two phases: phase 1 restricts the search to the
preferred features; when it finds nothing, phase 2 repeats the unrestricted
search with the very same derived seed as a no-preference call, so the
fallback output is identical to the baseline output.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

from . import CounterfactualError, SpamInjectionError
from .forest import ForestModel, decide, decide_proba
from .tabular import (
    BINARY,
    CATEGORICAL,
    NUMERIC,
    FeatureSchema,
    Instance,
    encode,
    encode_value,
    feature_offsets,
)


@dataclass
class Counterfactual:
    base_id: str
    changes: dict  # feature name -> new value
    achieved_verdict: str
    distance: float
    irreducible: bool

    @property
    def feature_set(self) -> frozenset:
        return frozenset(self.changes)


@dataclass(frozen=True)
class SearchConfig:
    k_max: int = 4
    samples_per_size: int = 2000
    grid: int = 10
    n_diverse: int = 5
    preferred: tuple = ()
    seed: int = 0

    def __post_init__(self):
        if self.k_max < 1 or self.n_diverse < 1:
            raise CounterfactualError("k_max and n_diverse must be >= 1")


def per_feature_cost(feat: FeatureSchema, base_value, new_value) -> float:
    if feat.kind == NUMERIC:
        lo, hi = feat.domain
        return abs(float(new_value) - float(base_value)) / (hi - lo)
    return 0.0 if new_value == base_value else 1.0


def distance(instance: Instance, changes: dict, schema) -> float:
    """Range-normalized L1 over numeric changes plus categorical mismatch count."""
    by_name = {f.name: f for f in schema}
    base = instance.value_map(schema)
    return sum(per_feature_cost(by_name[f], base[f], v) for f, v in changes.items())


def value_grid(feat: FeatureSchema, base_value, grid: int) -> list:
    """Candidate replacement values for one feature, excluding the base value."""
    if feat.kind == NUMERIC:
        lo, hi = feat.domain
        vals = np.linspace(lo, hi, grid)
        return [float(v) for v in vals if abs(v - float(base_value)) > 1e-12]
    return [v for v in feat.domain if v != base_value]


def _rng_for(seed: int, instance_id: str, salt: int = 0) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence([seed, zlib.crc32(instance_id.encode()), salt])
    )


def _apply(base_vec: np.ndarray, changes: dict, by_name: dict, offsets: dict) -> np.ndarray:
    vec = base_vec.copy()
    for name, value in changes.items():
        start, width = offsets[name]
        vec[start : start + width] = encode_value(by_name[name], value)
    return vec


def _flips(model: ForestModel, vecs: np.ndarray, threshold: float, base_accept: bool) -> np.ndarray:
    p = model.predict_matrix(vecs)
    return (p >= threshold) != base_accept


def reduce_to_irreducible(
    model: ForestModel, instance: Instance, candidate_changes: dict, threshold: float
) -> Counterfactual:
    """Greedily revert changed features (cheapest revert first, ties broken
    lexicographically) while the decision flip survives."""
    schema = model.schema
    by_name = {f.name: f for f in schema}
    offsets = feature_offsets(schema)
    base_vec = encode(instance, schema)
    base_values = instance.value_map(schema)
    base_accept = decide(model, instance, threshold).accepted

    changes = dict(candidate_changes)
    if not _flips(model, _apply(base_vec, changes, by_name, offsets)[None, :], threshold, base_accept)[0]:
        raise CounterfactualError("candidate change set does not flip the decision")
    return _reduce(
        model, instance, changes, threshold, base_vec, base_values, base_accept, by_name, offsets
    )


def _reduce(
    model, instance, changes, threshold, base_vec, base_values, base_accept, by_name, offsets
) -> Counterfactual:
    """Reduction core; the caller guarantees `changes` flips the decision."""
    schema = model.schema
    while len(changes) > 1:
        order = sorted(
            changes, key=lambda f: (per_feature_cost(by_name[f], base_values[f], changes[f]), f)
        )
        trials = np.stack(
            [
                _apply(base_vec, {k: v for k, v in changes.items() if k != f}, by_name, offsets)
                for f in order
            ]
        )
        still = _flips(model, trials, threshold, base_accept)
        for f, ok in zip(order, still):
            if ok:
                del changes[f]
                break
        else:
            break

    vec = _apply(base_vec, changes, by_name, offsets)
    p = float(model.predict_matrix(vec[None, :])[0])
    verdict = decide_proba(p, threshold).verdict
    return Counterfactual(
        base_id=instance.id,
        changes=changes,
        achieved_verdict=verdict,
        distance=distance(instance, changes, schema),
        irreducible=True,
    )


# Cap on how many flipped candidates get the (comparatively expensive)
# reduction treatment per change-set size; cheapest first, so minima survive.
_REDUCTION_BUDGET = 30


def _sample_candidates(rng, glens, k, samples):
    """Vectorized draw of `samples` change sets of size k over len(glens)
    features; returns deduplicated (feature_index, value_index) arrays."""
    n = len(glens)
    keys = rng.random((samples, n))
    chosen = np.argpartition(keys, k - 1, axis=1)[:, :k] if k < n else np.tile(np.arange(n), (samples, 1))
    chosen.sort(axis=1)
    u = rng.random((samples, k))
    val_idx = np.minimum((u * glens[chosen]).astype(int), glens[chosen] - 1)
    combined = np.unique(np.concatenate([chosen, val_idx], axis=1), axis=0)
    return combined[:, :k], combined[:, k:]


def _search(
    model: ForestModel,
    instance: Instance,
    threshold: float,
    config: SearchConfig,
    feature_names: list,
    rng: np.random.Generator,
) -> list:
    schema = model.schema
    by_name = {f.name: f for f in schema}
    offsets = feature_offsets(schema)
    base_vec = encode(instance, schema)
    base_values = instance.value_map(schema)
    base_accept = decide(model, instance, threshold).accepted

    grids = {
        name: value_grid(by_name[name], base_values[name], config.grid)
        for name in feature_names
        if by_name[name].mutable
    }
    avail = sorted(name for name, g in grids.items() if g)
    glens = np.array([len(grids[name]) for name in avail], dtype=int)
    enc = {
        name: np.stack([encode_value(by_name[name], v) for v in grids[name]])
        for name in avail
    }
    costs = {
        name: np.array([per_feature_cost(by_name[name], base_values[name], v) for v in grids[name]])
        for name in avail
    }

    pool: dict = {}  # frozenset of names -> Counterfactual

    def consider(cf: Counterfactual):
        key = cf.feature_set
        held = pool.get(key)
        if held is None or cf.distance < held.distance:
            pool[key] = cf

    flipped_verdict = "Reject" if base_accept else "Accept"
    for k in range(1, config.k_max + 1):
        if len(avail) < k:
            break
        chosen, val_idx = _sample_candidates(rng, glens, k, config.samples_per_size)
        m = len(chosen)
        if m == 0:
            continue
        vecs = np.repeat(base_vec[None, :], m, axis=0)
        cand_cost = np.zeros(m)
        for a, name in enumerate(avail):
            rows, poss = np.nonzero(chosen == a)
            if rows.size == 0:
                continue
            vidx = val_idx[rows, poss]
            start, width = offsets[name]
            vecs[rows, start : start + width] = enc[name][vidx]
            cand_cost[rows] += costs[name][vidx]
        flipped = _flips(model, vecs, threshold, base_accept)
        hit_rows = np.nonzero(flipped)[0]
        if hit_rows.size == 0:
            continue
        if k == 1:
            # A single change that flips is already irreducible: reverting it
            # restores the base instance.
            for i in hit_rows:
                name = avail[chosen[i, 0]]
                consider(
                    Counterfactual(
                        base_id=instance.id,
                        changes={name: grids[name][val_idx[i, 0]]},
                        achieved_verdict=flipped_verdict,
                        distance=float(cand_cost[i]),
                        irreducible=True,
                    )
                )
            continue
        # One reduction per distinct changed-feature set (the cheapest
        # representative), cheapest sets first, up to the budget.
        best_by_set: dict = {}
        for i in hit_rows:
            d = float(cand_cost[i])
            key = tuple(chosen[i])
            if key not in best_by_set or d < best_by_set[key][0]:
                best_by_set[key] = (d, i)
        reps = sorted(
            (d, tuple(avail[a] for a in key), i) for key, (d, i) in best_by_set.items()
        )
        for _, names, i in reps[:_REDUCTION_BUDGET]:
            changes = {
                avail[a]: grids[avail[a]][v] for a, v in zip(chosen[i], val_idx[i])
            }
            consider(
                _reduce(
                    model, instance, changes, threshold,
                    base_vec, base_values, base_accept, by_name, offsets,
                )
            )

    results = sorted(pool.values(), key=lambda cf: (cf.distance, tuple(sorted(cf.changes))))
    return results[: config.n_diverse]


def find_counterfactuals(
    model: ForestModel, instance: Instance, threshold: float, config: SearchConfig
) -> list:
    """Diverse irreducible counterfactuals for one instance, sorted by
    (distance, lexicographic change set). An empty list means the search
    budget found nothing; that is reported, not raised.

    Results are memoized per model (the whole call is deterministic in
    (instance, threshold, config)), so strategies sharing a configuration do
    not repeat identical searches.
    """
    cache = getattr(model, "_cf_cache", None)
    if cache is None:
        cache = model._cf_cache = {}
    cache_key = (instance.id, instance.values, threshold, config)
    if cache_key in cache:
        return cache[cache_key]

    mutable = [f.name for f in model.schema if f.mutable]
    result = None
    if config.preferred:
        preferred = [n for n in mutable if n in set(config.preferred)]
        if preferred:
            restricted = _search(
                model, instance, threshold, config, preferred, _rng_for(config.seed, instance.id, salt=1)
            )
            if restricted:
                result = restricted
    if result is None:
        result = _search(model, instance, threshold, config, mutable, _rng_for(config.seed, instance.id))
    cache[cache_key] = result
    return result


def inject_spam(
    cf: Counterfactual,
    feature: str,
    value,
    model: ForestModel,
    instance: Instance,
    threshold: float,
) -> Counterfactual:
    """Pad a counterfactual with an extra feature change (a "spam" feature).

    The padded change set is re-verified against the model; if padding
    un-flips the decision a :class:`SpamInjectionError` is raised and the
    caller falls back to the original counterfactual.
    """
    if feature in cf.changes:
        return cf
    schema = model.schema
    by_name = {f.name: f for f in schema}
    offsets = feature_offsets(schema)
    base_vec = encode(instance, schema)
    base_accept = decide(model, instance, threshold).accepted

    changes = dict(cf.changes)
    changes[feature] = value
    padded_vec = _apply(base_vec, changes, by_name, offsets)
    if not _flips(model, padded_vec[None, :], threshold, base_accept)[0]:
        raise SpamInjectionError(
            f"adding {feature}={value!r} to {cf.base_id} un-flipped the decision"
        )
    # Irreducible only if the original flip does NOT survive without the
    # added feature (it normally does, making the padded set reducible).
    original_alone = _flips(
        model, _apply(base_vec, cf.changes, by_name, offsets)[None, :], threshold, base_accept
    )[0]
    return Counterfactual(
        base_id=cf.base_id,
        changes=changes,
        achieved_verdict=cf.achieved_verdict,
        distance=distance(instance, changes, schema),
        irreducible=not bool(original_alone),
    )

import numpy as np
import pytest

from explmarket import CounterfactualError, SpamInjectionError, cf, forest, tabular
from oracles import exhaustive_min_distance

DESK_CONFIG = cf.SearchConfig(k_max=3, samples_per_size=2000, grid=16, n_diverse=5, seed=7)


def _cond_tree(schema, name, thr, index=0):
    col = tabular.feature_offsets(schema)[name][0] + index
    return forest.Tree([col, -1, -1], [thr, 0.0, 0.0], [1, -1, -1], [2, -1, -1],
                       [0.1, 0.1, 1.0], [10, 9, 1])


def _and_tree(schema, name_a, thr_a, name_b, thr_b):
    offsets = tabular.feature_offsets(schema)
    a, b = offsets[name_a][0], offsets[name_b][0]
    return forest.Tree([a, -1, b, -1, -1], [thr_a, 0.0, thr_b, 0.0, 0.0],
                       [1, -1, 3, -1, -1], [2, -1, 4, -1, -1],
                       [0.1, 0.1, 0.1, 0.1, 1.0], [10, 7, 3, 2, 1])


def _single_tree_model(schema, tree):
    params = forest.ForestParams(n_trees=1, max_depth=2, min_leaf=1, bootstrap=False)
    return forest.ForestModel([tree], params, seed=0, schema=schema)


@pytest.fixture(scope="module")
def and_model(hiring_schema):
    # Accept iff Python = yes AND Experience >= 3.
    return _single_tree_model(hiring_schema, _and_tree(hiring_schema, "Python", 0.5, "Experience", 2.5))


@pytest.fixture(scope="module")
def or_model(hiring_schema):
    # Accept iff Python = yes OR Julia = yes (score 0.55 when one condition holds).
    trees = [_cond_tree(hiring_schema, "Python", 0.5), _cond_tree(hiring_schema, "Julia", 0.5)]
    params = forest.ForestParams(n_trees=2, max_depth=2, min_leaf=1, bootstrap=False)
    return forest.ForestModel(trees, params, seed=0, schema=hiring_schema)


def _applicant(python="no", experience=3.0, german="no", degree="BSc", julia="no", age=30.0):
    return tabular.Instance("a0", (degree, python, german, julia, experience, age))


# distance and grids


def test_distance_empty_changes(hiring_schema):
    assert cf.distance(_applicant(), {}, hiring_schema) == 0.0


def test_distance_categorical_change(hiring_schema):
    assert cf.distance(_applicant(), {"Degree": "MBA"}, hiring_schema) == 1.0


def test_distance_numeric_is_range_normalized(german_schema, german_dataset):
    inst = german_dataset.rows[0]
    base = inst.value_map(german_schema)
    changes = {"Duration": float(base["Duration"]) + 12.0}
    assert cf.distance(inst, changes, german_schema) == pytest.approx(12.0 / 68.0)


def test_distance_unchanged_value_costs_nothing(hiring_schema):
    inst = _applicant(python="no")
    assert cf.distance(inst, {"Python": "no"}, hiring_schema) == 0.0


def test_distance_is_additive(hiring_schema):
    inst = _applicant(experience=3.0)
    d = cf.distance(inst, {"Degree": "MBA", "Experience": 6.0}, hiring_schema)
    assert d == pytest.approx(1.0 + 3.0 / 15.0)


def test_value_grid_numeric_excludes_base():
    f = tabular.FeatureSchema("x", tabular.NUMERIC, (0.0, 9.0))
    grid = cf.value_grid(f, 3.0, 10)
    assert len(grid) == 9 and 3.0 not in grid


def test_value_grid_categorical_alternatives():
    f = tabular.FeatureSchema("c", tabular.CATEGORICAL, ("a", "b", "c"))
    assert cf.value_grid(f, "b", 10) == ["a", "c"]


def test_value_grid_binary():
    f = tabular.FeatureSchema("b", tabular.BINARY, ("no", "yes"))
    assert cf.value_grid(f, "no", 10) == ["yes"]


# search


def test_single_necessary_change(and_model):
    inst = _applicant(python="no", experience=3.0)
    results = cf.find_counterfactuals(and_model, inst, 0.5, DESK_CONFIG)
    assert results
    assert results[0].changes == {"Python": "yes"}
    assert results[0].achieved_verdict == "Accept"
    assert results[0].irreducible


def test_accepted_instance_flips_to_reject(and_model):
    inst = _applicant(python="yes", experience=5.0)
    assert forest.decide(and_model, inst, 0.5).accepted
    results = cf.find_counterfactuals(and_model, inst, 0.5, DESK_CONFIG)
    assert results
    assert all(r.achieved_verdict == "Reject" for r in results)


def test_sally_multiplicity(hiring_model, sally):
    assert forest.decide(hiring_model, sally, 0.25).verdict == "Reject"
    results = cf.find_counterfactuals(hiring_model, sally, 0.25, DESK_CONFIG)
    sets = [r.feature_set for r in results]
    assert frozenset({"Experience"}) in sets
    assert frozenset({"Degree"}) in sets
    assert frozenset({"Python"}) in sets
    mba = next(r for r in results if r.feature_set == frozenset({"Degree"}))
    assert mba.changes["Degree"] == "MBA"


def test_results_sorted_by_distance(hiring_model, sally):
    results = cf.find_counterfactuals(hiring_model, sally, 0.25, DESK_CONFIG)
    distances = [r.distance for r in results]
    assert distances == sorted(distances)


def test_results_have_distinct_feature_sets(hiring_model, sally):
    results = cf.find_counterfactuals(hiring_model, sally, 0.25, DESK_CONFIG)
    sets = [r.feature_set for r in results]
    assert len(sets) == len(set(sets))


def test_immutable_features_never_changed(hiring_model, sally):
    # Age >= 32 alone would flip the decision, but Age is immutable.
    results = cf.find_counterfactuals(hiring_model, sally, 0.25, DESK_CONFIG)
    assert results
    for r in results:
        assert "Age" not in r.changes


def test_search_is_deterministic(hiring_model, sally):
    a = cf.find_counterfactuals(hiring_model, sally, 0.25, DESK_CONFIG)
    hiring_model._cf_cache = {}
    b = cf.find_counterfactuals(hiring_model, sally, 0.25, DESK_CONFIG)
    assert [(r.changes, r.distance) for r in a] == [(r.changes, r.distance) for r in b]


def test_search_memoized_per_model(hiring_model, sally):
    a = cf.find_counterfactuals(hiring_model, sally, 0.25, DESK_CONFIG)
    b = cf.find_counterfactuals(hiring_model, sally, 0.25, DESK_CONFIG)
    assert a is b


def test_preferred_without_flips_falls_back(or_model):
    # German is ignored by the model, so the preferred phase finds nothing
    # and the unrestricted fallback supplies the real flips.
    inst = _applicant(python="no", julia="no")
    config = cf.SearchConfig(k_max=2, samples_per_size=500, grid=8, seed=7,
                             preferred=("German",))
    restricted = cf.find_counterfactuals(or_model, inst, 0.5, config)
    assert restricted
    assert all("German" not in r.changes for r in restricted)


def test_engine_matches_exhaustive_optimum(hiring_model, hiring_dataset):
    for inst in hiring_dataset.rows:
        oracle = exhaustive_min_distance(hiring_model, inst, 0.25, grid=16)
        results = cf.find_counterfactuals(hiring_model, inst, 0.25, DESK_CONFIG)
        if oracle is None:
            # No mutable change set flips (the immutable Age condition keeps
            # older applicants accepted); the engine must agree.
            assert results == []
        else:
            assert results
            assert results[0].distance <= 1.1 * oracle + 1e-9


# reduction


def test_reduce_strips_unnecessary_changes(and_model):
    inst = _applicant(python="no", experience=3.0)
    candidate = {"Python": "yes", "German": "yes", "Experience": 5.0}
    reduced = cf.reduce_to_irreducible(and_model, inst, candidate, 0.5)
    assert reduced.changes == {"Python": "yes"}
    assert reduced.irreducible


def test_reduce_keeps_jointly_necessary_pair(and_model):
    inst = _applicant(python="no", experience=1.0)
    reduced = cf.reduce_to_irreducible(and_model, inst, {"Python": "yes", "Experience": 6.0}, 0.5)
    assert reduced.feature_set == frozenset({"Python", "Experience"})
    assert reduced.irreducible


def test_reduce_single_change_unchanged(and_model):
    inst = _applicant(python="no", experience=3.0)
    reduced = cf.reduce_to_irreducible(and_model, inst, {"Python": "yes"}, 0.5)
    assert reduced.changes == {"Python": "yes"}


def test_reduce_rejects_non_flipping_candidate(and_model):
    inst = _applicant(python="no", experience=1.0)
    with pytest.raises(CounterfactualError, match="does not flip"):
        cf.reduce_to_irreducible(and_model, inst, {"German": "yes"}, 0.5)


def test_returned_counterfactuals_flip_and_are_irreducible(german_model, german_split, search_config):
    _, test = german_split
    by_name = {f.name: f for f in german_model.schema}
    offsets = tabular.feature_offsets(german_model.schema)
    for inst in test.rows[:12]:
        base_accept = forest.decide(german_model, inst, 0.5).accepted
        base_vec = tabular.encode(inst, german_model.schema)
        for r in cf.find_counterfactuals(german_model, inst, 0.5, search_config):
            vec = cf._apply(base_vec, r.changes, by_name, offsets)
            flipped = (float(german_model.predict_matrix(vec[None, :])[0]) >= 0.5) != base_accept
            assert flipped
            for name in r.changes:
                rest = {k: v for k, v in r.changes.items() if k != name}
                if not rest:
                    continue
                v2 = cf._apply(base_vec, rest, by_name, offsets)
                still = (float(german_model.predict_matrix(v2[None, :])[0]) >= 0.5) != base_accept
                assert not still, f"{inst.id}: {name} is redundant in {r.changes}"


# feature preference


def test_preferred_phase_restricts_features(hiring_model, sally):
    config = cf.SearchConfig(k_max=3, samples_per_size=2000, grid=16, n_diverse=5,
                             preferred=("Degree",), seed=7)
    results = cf.find_counterfactuals(hiring_model, sally, 0.25, config)
    assert results
    for r in results:
        assert r.feature_set == frozenset({"Degree"})


def test_preference_fallback_equals_baseline(or_model):
    inst = _applicant(python="no", julia="no")
    base_cfg = cf.SearchConfig(k_max=2, samples_per_size=500, grid=8, seed=7)
    pref_cfg = cf.SearchConfig(k_max=2, samples_per_size=500, grid=8, seed=7,
                               preferred=("German",))
    plain = cf.find_counterfactuals(or_model, inst, 0.5, base_cfg)
    fallback = cf.find_counterfactuals(or_model, inst, 0.5, pref_cfg)
    assert [(r.changes, r.distance) for r in plain] == [(r.changes, r.distance) for r in fallback]


# spam injection


def test_inject_spam_pads_and_destroys_irreducibility(hiring_model, sally):
    results = cf.find_counterfactuals(hiring_model, sally, 0.25, DESK_CONFIG)
    chosen = next(r for r in results if r.feature_set == frozenset({"Python"}))
    padded = cf.inject_spam(chosen, "Julia", "yes", hiring_model, sally, 0.25)
    assert padded.changes == {"Python": "yes", "Julia": "yes"}
    assert padded.irreducible is False
    assert padded.distance > chosen.distance


def test_inject_spam_noop_when_feature_present(hiring_model, sally):
    results = cf.find_counterfactuals(hiring_model, sally, 0.25, DESK_CONFIG)
    chosen = next(r for r in results if r.feature_set == frozenset({"Python"}))
    padded = cf.inject_spam(chosen, "Python", "yes", hiring_model, sally, 0.25)
    assert padded is chosen


def test_inject_spam_unflip_raises(or_model):
    inst = _applicant(python="yes", julia="no")
    assert forest.decide(or_model, inst, 0.5).accepted
    results = cf.find_counterfactuals(or_model, inst, 0.5, DESK_CONFIG)
    chosen = next(r for r in results if r.feature_set == frozenset({"Python"}))
    with pytest.raises(SpamInjectionError, match="un-flipped"):
        cf.inject_spam(chosen, "Julia", "yes", or_model, inst, 0.5)


def test_config_validation():
    with pytest.raises(CounterfactualError):
        cf.SearchConfig(k_max=0)
    with pytest.raises(CounterfactualError):
        cf.SearchConfig(n_diverse=0)

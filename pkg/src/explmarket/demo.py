"""Hand-built desk-scale hiring model for the quick-start demo.

The screening rule is a small forest over the hiring schema whose score
crosses the 0.25 acceptance threshold as soon as any one of these holds:
an MBA degree, Python on the CV, >= 5 years of experience, German together
with >= 3 years of experience, or age >= 32. A rejected junior applicant
("Sally": BSc, no Python, no German, 2 years, age 29) therefore has several
distinct single- and two-feature counterfactuals, which is exactly the
explanation-multiplicity situation the demo illustrates. Age is immutable
in the shipped schema; flipping that flag exposes the (non-actionable) age
counterfactual as a bias-detection exercise.
"""

from __future__ import annotations

from .forest import ForestModel, ForestParams, Tree
from .tabular import Instance, feature_offsets

DEMO_THRESHOLD = 0.25


def _condition_tree(feature: int, threshold: float, low=0.1, high=1.0) -> Tree:
    # node 0 splits; left (<= thr) -> low leaf, right -> high leaf
    return Tree(
        feature=[feature, -1, -1],
        threshold=[threshold, 0.0, 0.0],
        left=[1, -1, -1],
        right=[2, -1, -1],
        value=[low, low, high],
        count=[10, 9, 1],
    )


def _and_tree(feature_a: int, thr_a: float, feature_b: int, thr_b: float) -> Tree:
    # fires (high leaf) only when a > thr_a AND b > thr_b
    return Tree(
        feature=[feature_a, -1, feature_b, -1, -1],
        threshold=[thr_a, 0.0, thr_b, 0.0, 0.0],
        left=[1, -1, 3, -1, -1],
        right=[2, -1, 4, -1, -1],
        value=[0.1, 0.1, 0.1, 0.1, 1.0],
        count=[10, 7, 3, 2, 1],
    )


def build_hiring_model(schema) -> ForestModel:
    offsets = feature_offsets(schema)

    def col(name, index=0):
        return offsets[name][0] + index

    mba = col("Degree", 2)  # one-hot slot for the MBA category
    trees = [
        _condition_tree(mba, 0.5),
        _condition_tree(col("Python"), 0.5),
        _condition_tree(col("Experience"), 4.5),
        _and_tree(col("German"), 0.5, col("Experience"), 2.5),
        _condition_tree(col("Age"), 31.5),
    ]
    params = ForestParams(n_trees=len(trees), max_depth=2, min_leaf=1, bootstrap=False)
    return ForestModel(trees, params, seed=0, schema=schema)


def sally(schema) -> Instance:
    values = {
        "Degree": "BSc",
        "Python": "no",
        "German": "no",
        "Julia": "no",
        "Experience": 2.0,
        "Age": 29.0,
    }
    return Instance(id="sally", values=tuple(values[f.name] for f in schema))

"""Shared fixtures: the credit pipeline (schema, dataset, split, trained
forest) and the desk-scale hiring demo. Expensive fixtures are session
scoped; everything is seeded, so fixture values are identical across runs."""

from pathlib import Path

import pytest

from explmarket import cf, demo, forest, market, tabular

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "data"
SCENARIOS = ROOT / "scenarios"

SEED = 7
THRESHOLD = 0.5
FOREST_PARAMS = forest.ForestParams(n_trees=100, max_depth=8, min_leaf=5)


@pytest.fixture(scope="session")
def german_schema():
    return tabular.load_schema(DATA / "german_schema.txt")


@pytest.fixture(scope="session")
def german_dataset(german_schema):
    return tabular.load_dataset(DATA / "german_synth.csv", german_schema)


@pytest.fixture(scope="session")
def german_split(german_dataset):
    return tabular.split(german_dataset, 0.33, SEED)


@pytest.fixture(scope="session")
def german_model(german_split):
    train, _ = german_split
    return forest.train_forest(train, FOREST_PARAMS, SEED)


@pytest.fixture(scope="session")
def search_config():
    return cf.SearchConfig(seed=SEED)


@pytest.fixture(scope="session")
def rates():
    return market.RateTable()


@pytest.fixture(scope="session")
def strategy_reports(german_model, german_split, search_config, rates):
    """All five strategies on the shared model; CF searches are memoized on
    the model, so later tests touching the same configs stay cheap."""
    _, test = german_split
    schema = german_model.schema
    reports = {}
    for kind in market.STRATEGY_ORDER:
        spec = market.StrategySpec.build(kind, schema, threshold=THRESHOLD)
        reports[kind] = market.run_strategy(
            german_model, test, spec, search_config, rates, SEED
        )
    baseline = reports[market.BASELINE]
    for kind, rep in reports.items():
        if kind != market.BASELINE:
            market.percent_increase(rep, baseline)
    return reports


@pytest.fixture(scope="session")
def hiring_schema():
    return tabular.load_schema(DATA / "hiring_schema.txt")


@pytest.fixture(scope="session")
def hiring_dataset(hiring_schema):
    return tabular.load_dataset(DATA / "hiring_applicants.csv", hiring_schema)


@pytest.fixture(scope="session")
def hiring_model(hiring_schema):
    return demo.build_hiring_model(hiring_schema)


@pytest.fixture(scope="session")
def sally(hiring_schema):
    return demo.sally(hiring_schema)

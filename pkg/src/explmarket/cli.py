"""Scenario-driven command line entry point.

The scenario file (JSON) is the single configuration surface; command line
flags only override scenario keys. All randomness flows from the scenario
seed, so repeated runs of any command produce identical outputs.

Exit codes: 0 success, 1 usage error, 2 data/pipeline error.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import click
import numpy as np

from . import ExplMarketError
from . import cf as cf_mod
from . import demo, exchange, forest, market, report, tabular


@dataclass
class Scenario:
    path: Path
    dataset: Path
    schema: Path
    split_fraction: float = 0.33
    seed: int = 7
    threshold: float = 0.5
    forest: dict = field(default_factory=dict)
    search: dict = field(default_factory=dict)
    rates: dict | None = None
    campaigns: Path | None = None
    population: int = 75_500_000
    output_dir: Path = Path("out")
    builtin_model: str | None = None
    context: str = "finance"
    auction: dict = field(default_factory=dict)
    revenue_share: float = 0.68
    spam_feature: str = "Telephone"
    spam_value: str = "yes"


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ExplMarketError(f"scenario file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ExplMarketError(f"malformed scenario file {path}: {e}") from None
    base = path.parent

    def resolve(key, default=None):
        v = doc.get(key, default)
        return (base / v) if v is not None else None

    if "dataset" not in doc or "schema" not in doc:
        raise ExplMarketError(f"scenario {path} must name 'dataset' and 'schema' files")
    sc = Scenario(
        path=path,
        dataset=resolve("dataset"),
        schema=resolve("schema"),
        split_fraction=doc.get("split_fraction", 0.33),
        seed=doc.get("seed", 7),
        threshold=doc.get("threshold", 0.5),
        forest=doc.get("forest", {}),
        search=doc.get("search", {}),
        rates=doc.get("rates"),
        campaigns=resolve("campaigns"),
        population=doc.get("population", 75_500_000),
        output_dir=base / doc.get("output_dir", "out"),
        builtin_model=doc.get("builtin_model"),
        context=doc.get("context", "finance"),
        auction=doc.get("auction", {}),
        revenue_share=doc.get("revenue_share", 0.68),
        spam_feature=doc.get("spam_feature", "Telephone"),
        spam_value=doc.get("spam_value", "yes"),
    )
    for p in (sc.dataset, sc.schema):
        if not p.exists():
            raise ExplMarketError(f"scenario references missing file: {p}")
    return sc


def _load_data(sc: Scenario):
    schema = tabular.load_schema(sc.schema)
    dataset = tabular.load_dataset(sc.dataset, schema)
    return schema, dataset


def _split(sc: Scenario, dataset):
    if sc.builtin_model:
        return None, dataset  # desk-scale demos use every row
    return tabular.split(dataset, sc.split_fraction, sc.seed)


def _forest_params(sc: Scenario, **overrides) -> forest.ForestParams:
    cfg = dict(sc.forest)
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    return forest.ForestParams(**cfg)


def _search_config(sc: Scenario) -> cf_mod.SearchConfig:
    return cf_mod.SearchConfig(seed=sc.seed, **sc.search)


def _rates(sc: Scenario) -> market.RateTable:
    if not sc.rates:
        return market.RateTable()
    ctr = {k: float(v) for k, v in sc.rates["ctr"].items()}
    cpc = {}
    for key, v in sc.rates["cpc"].items():
        valence, tier = key.split("/")
        cpc[(valence, tier)] = float(v)
    return market.RateTable(ctr=ctr, cpc=cpc, currency=sc.rates.get("currency", "USD"))


def _model_path(sc: Scenario) -> Path:
    return sc.output_dir / "model.json"


def _get_model(sc: Scenario, schema) -> forest.ForestModel:
    if sc.builtin_model:
        if sc.builtin_model != "hiring":
            raise ExplMarketError(f"unknown builtin model {sc.builtin_model!r}")
        return demo.build_hiring_model(schema)
    path = _model_path(sc)
    if not path.exists():
        raise ExplMarketError(f"model file {path} missing; run the train command first")
    return forest.load_model(path, schema)


@click.group()
def cli():
    """Explanation-market simulator: train, explain, auction, and report."""


@cli.command()
@click.option("--scenario", "scenario_path", required=True, type=click.Path())
@click.option("--tune", is_flag=True, help="Run the k-fold hyperparameter grid search first.")
@click.option("--n-trees", type=int, default=None)
@click.option("--max-depth", type=int, default=None)
@click.option("--min-leaf", type=int, default=None)
def train(scenario_path, tune, n_trees, max_depth, min_leaf):
    """Train the forest, persist it, and report test AUC."""
    sc = load_scenario(scenario_path)
    if sc.builtin_model:
        raise ExplMarketError("scenario uses a builtin model; nothing to train")
    schema, dataset = _load_data(sc)
    train_set, test_set = _split(sc, dataset)
    if tune:
        params, scores = forest.tune_forest(train_set, sc.seed)
        click.echo(f"tuned hyperparameters: {params}")
    else:
        params = _forest_params(sc, n_trees=n_trees, max_depth=max_depth, min_leaf=min_leaf)
    model = forest.train_forest(train_set, params, sc.seed)
    score = forest.auc(model, test_set)
    sc.output_dir.mkdir(parents=True, exist_ok=True)
    forest.save_model(model, _model_path(sc))
    report.atomic_write_text(sc.output_dir / "auc.txt", f"{score:.6f}\n")
    click.echo(f"model written to {_model_path(sc)}")
    click.echo(f"test AUC: {score:.4f}")


_STRATEGY_CHOICES = list(market.STRATEGY_ORDER) + ["all"]


@cli.command()
@click.option("--scenario", "scenario_path", required=True, type=click.Path())
@click.option("--strategy", type=click.Choice(_STRATEGY_CHOICES), default="all")
def simulate(scenario_path, strategy):
    """Run explanation-selection strategies and emit revenue reports."""
    sc = load_scenario(scenario_path)
    schema, dataset = _load_data(sc)
    _, test_set = _split(sc, dataset)
    model = _get_model(sc, schema)
    rates = _rates(sc)
    config = _search_config(sc)

    kinds = list(market.STRATEGY_ORDER) if strategy == "all" else [strategy]
    if market.BASELINE not in kinds:
        kinds = [market.BASELINE] + kinds  # percent increase needs the baseline

    reports = {}
    for kind in kinds:
        spec = market.StrategySpec.build(
            kind, schema, threshold=sc.threshold,
            spam_feature=sc.spam_feature, spam_value=sc.spam_value,
        )
        reports[kind] = market.run_strategy(
            model, test_set, spec, config, rates, sc.seed, population=sc.population
        )
    baseline = reports[market.BASELINE]
    for kind, rep in reports.items():
        if kind != market.BASELINE:
            market.percent_increase(rep, baseline)

    out = sc.output_dir
    summary_rows = []
    for kind in kinds:
        rep = reports[kind]
        if strategy != "all" and kind not in (strategy, market.BASELINE):
            continue
        report.write_records(out / f"records_{kind}.csv", rep)
        for valence in (market.POSITIVE, market.NEGATIVE):
            report.write_histogram(
                out / f"hist_{kind}_{valence}.csv", rep.histogram.get(valence, {})
            )
        report.plot_feature_frequency(rep, schema, out / f"hist_{kind}.png")
        summary_rows.append(
            (
                kind,
                rep.threshold,
                rep.counts[market.POSITIVE],
                rep.counts[market.NEGATIVE],
                f"{rep.extrapolated_accepted:.2f}",
                f"{rep.extrapolated_rejected:.2f}",
                f"{rep.extrapolated_total:.2f}",
                "" if rep.pct_increase is None else f"{rep.pct_increase:.1f}",
                rep.cf_not_found,
            )
        )
        click.echo(report.strategy_row(rep))
    report.write_csv(
        out / "simulate_summary.csv",
        (
            "strategy", "threshold", "accepted_count", "rejected_count",
            "accepted_revenue", "rejected_revenue", "total_revenue",
            "pct_increase", "cf_not_found",
        ),
        summary_rows,
    )


@cli.command("market")
@click.option("--domain", required=True, type=click.Choice(sorted(market.DOMAIN_PARAMS)))
@click.option("--rejected", type=float, default=None)
@click.option("--accepted", type=float, default=None)
@click.option("--ctr-search", type=float, default=None)
@click.option("--cpc-search", type=float, default=None)
@click.option("--ctr-display", type=float, default=None)
@click.option("--cpc-display", type=float, default=None)
def market_cmd(domain, rejected, accepted, ctr_search, cpc_search, ctr_display, cpc_display):
    """Closed-form market-size estimate for one domain."""
    est = market.estimate_domain(
        domain, rejected=rejected, accepted=accepted,
        ctr_search=ctr_search, cpc_search=cpc_search,
        ctr_display=ctr_display, cpc_display=cpc_display,
    )
    click.echo(f"domain: {est.domain}")
    click.echo(f"rejected revenue: {report.fmt_money(est.rejected_revenue)}")
    click.echo(f"accepted revenue: {report.fmt_money(est.accepted_revenue)}")
    click.echo(f"total revenue: {report.fmt_money(est.total)}")


@cli.command("exchange")
@click.option("--scenario", "scenario_path", required=True, type=click.Path())
def exchange_cmd(scenario_path):
    """Auction every test-set explanation to the configured campaigns."""
    sc = load_scenario(scenario_path)
    schema, dataset = _load_data(sc)
    _, test_set = _split(sc, dataset)
    model = _get_model(sc, schema)
    rates = _rates(sc)
    config = _search_config(sc)
    themes = tabular.theme_map(schema)
    rules = exchange.AuctionRules(
        pricing=sc.auction.get("pricing", "second_price"),
        reserve=sc.auction.get("reserve", 0.0),
    )

    registry = exchange.Registry()
    if sc.campaigns is not None:
        for adv in exchange.load_campaigns(sc.campaigns):
            registry.register(adv)

    rng = np.random.default_rng(np.random.SeedSequence([sc.seed, 0xAD]))
    ledger: list = []
    rows = []
    sold = 0
    probs = model.predict_matrix(tabular.encode_matrix(test_set))
    for instance, p in zip(test_set.rows, probs):
        decision = forest.decide_proba(float(p), sc.threshold)
        valence = market.POSITIVE if decision.accepted else market.NEGATIVE
        cfs = cf_mod.find_counterfactuals(model, instance, sc.threshold, config)
        clicked = bool(rng.random() < rates.ctr[valence])  # one draw per impression
        if not cfs:
            continue
        request = exchange.BidRequest(
            impression_id=f"imp-{instance.id}",
            context=sc.context,
            valence=valence,
            explanation_features=frozenset(cfs[0].changes),
        )
        bids = exchange.collect_bids(registry, request, feature_themes=themes)
        record = exchange.run_auction(bids, rules, impression_id=request.impression_id)
        if record.winner is not None:
            exchange.settle(record, clicked, registry, ledger)
            sold += 1
        rows.append(
            (
                record.impression_id,
                record.winner or "",
                f"{record.clearing_price:.4f}",
                record.matched_keyword or "",
                int(clicked and record.winner is not None),
            )
        )

    report.write_csv(
        sc.output_dir / "impressions.csv",
        ("impression_id", "winner", "price", "matched_keyword", "clicked"),
        rows,
    )
    totals: dict = {}
    for ev in ledger:
        totals[ev.advertiser_id] = totals.get(ev.advertiser_id, 0.0) + ev.amount
    grand = sum(totals.values())
    click.echo(f"impressions: {len(rows)}  sold: {sold}  clicked revenue: {grand:.4f}")
    for adv_id in sorted(totals):
        click.echo(f"  advertiser {adv_id}: {totals[adv_id]:.4f}")
    click.echo(
        f"publisher share ({sc.revenue_share:.0%}): {grand * sc.revenue_share:.4f}"
    )


@cli.command()
@click.option("--scenario", "scenario_path", required=True, type=click.Path())
@click.option("--instance-id", default=None, help="Explain one instance instead of the whole set.")
def explain(scenario_path, instance_id):
    """Dump counterfactual explanations for the evaluation set."""
    sc = load_scenario(scenario_path)
    schema, dataset = _load_data(sc)
    _, test_set = _split(sc, dataset)
    model = _get_model(sc, schema)
    config = _search_config(sc)
    threshold = demo.DEMO_THRESHOLD if sc.builtin_model else sc.threshold

    instances = list(test_set.rows)
    if instance_id is not None:
        instances = [r for r in instances if r.id == instance_id]
        if not instances:
            raise ExplMarketError(f"instance id {instance_id!r} not in the evaluation set")
    decisions, cf_lists = [], []
    for inst in instances:
        decisions.append(forest.decide(model, inst, threshold))
        cf_lists.append(cf_mod.find_counterfactuals(model, inst, threshold, config))
    out = sc.output_dir / "counterfactuals.csv"
    report.write_cf_dump(out, instances, decisions, cf_lists, schema)
    found = sum(1 for c in cf_lists if c)
    click.echo(f"explained {found}/{len(instances)} instances -> {out}")
    if instance_id is not None and cf_lists[0]:
        base = instances[0].value_map(schema)
        for rank, cf in enumerate(cf_lists[0]):
            changed = ", ".join(
                f"{n}: {base[n]} -> {cf.changes[n]}" for n in sorted(cf.changes)
            )
            click.echo(f"  #{rank} (distance {cf.distance:.3f}): {changed}")


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Abort:
        sys.exit(1)
    except click.UsageError as e:
        click.echo(f"usage error: {e.format_message()}", err=True)
        sys.exit(1)
    except ExplMarketError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(2)
    sys.exit(0)


if __name__ == "__main__":
    main()

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from explmarket import AuctionError, exchange
from oracles import resolve_auction


def _adv(adv_id="a1", **kw):
    kw.setdefault("keywords", ("Python",))
    kw.setdefault("bids", {"Python": 2.0})
    return exchange.Advertiser(id=adv_id, **kw)


def _request(features=("Python",), context="hiring", valence="negative"):
    return exchange.BidRequest(
        impression_id="imp-1",
        context=context,
        valence=valence,
        explanation_features=frozenset(features),
    )


# registry


def test_registry_register():
    reg = exchange.Registry()
    reg.register(_adv())
    assert len(reg) == 1


def test_registry_duplicate_id():
    reg = exchange.Registry()
    reg.register(_adv())
    with pytest.raises(AuctionError, match="duplicate"):
        reg.register(_adv())


def test_registry_thousand_entries():
    reg = exchange.Registry()
    for i in range(1000):
        reg.register(_adv(f"adv-{i:04d}"))
    assert len(reg) == 1000
    assert reg.get("adv-0999").id == "adv-0999"


def test_advertiser_validation():
    with pytest.raises(AuctionError, match="> 0"):
        _adv(bids={"Python": 0.0})
    with pytest.raises(AuctionError, match="budget"):
        _adv(budget=-1.0)


# bid collection


def test_exact_keyword_match():
    reg = exchange.Registry()
    reg.register(_adv(contexts=("hiring",)))
    bids = exchange.collect_bids(reg, _request())
    assert len(bids) == 1
    assert bids[0].matched_keyword == "Python"
    assert bids[0].price == 2.0


def test_theme_broad_match():
    reg = exchange.Registry()
    reg.register(
        _adv(keywords=(), themes=("programming_languages",), bids={"programming_languages": 1.5})
    )
    themes = {"Julia": frozenset({"programming_languages"})}
    bids = exchange.collect_bids(reg, _request(features=("Julia",)), feature_themes=themes)
    assert len(bids) == 1
    assert bids[0].matched_keyword == "programming_languages"


def test_context_filter_blocks():
    reg = exchange.Registry()
    reg.register(_adv(contexts=("finance",)))
    assert exchange.collect_bids(reg, _request(context="employment")) == []


def test_valence_filter():
    reg = exchange.Registry()
    reg.register(_adv(valence_filter="negative"))
    assert exchange.collect_bids(reg, _request(valence="positive")) == []
    assert len(exchange.collect_bids(reg, _request(valence="negative"))) == 1


def test_best_matching_key_wins():
    reg = exchange.Registry()
    reg.register(
        _adv(keywords=("Python", "German"), bids={"Python": 2.0, "German": 3.5})
    )
    bids = exchange.collect_bids(reg, _request(features=("Python", "German")))
    assert bids[0].matched_keyword == "German"
    assert bids[0].price == 3.5


def test_budget_skips_unaffordable_bid():
    reg = exchange.Registry()
    reg.register(_adv(budget=1.0))
    assert exchange.collect_bids(reg, _request()) == []


def test_unmatched_features_no_bid():
    reg = exchange.Registry()
    reg.register(_adv())
    assert exchange.collect_bids(reg, _request(features=("German",))) == []


def test_empty_feature_set_rejected():
    with pytest.raises(AuctionError, match="non-empty"):
        _request(features=())


# auction clearing


def _bids(*prices_ids):
    return [exchange.Bid(advertiser_id=i, price=p, matched_keyword="k") for p, i in prices_ids]


def test_second_price_clearing():
    rules = exchange.AuctionRules(pricing="second_price", reserve=0.0)
    record = exchange.run_auction(_bids((5.0, "a"), (3.0, "b"), (1.0, "c")), rules)
    assert record.winner == "a"
    assert record.clearing_price == 3.0


def test_second_price_reserve_floor():
    rules = exchange.AuctionRules(pricing="second_price", reserve=1.5)
    record = exchange.run_auction(_bids((2.0, "a")), rules)
    assert record.winner == "a"
    assert record.clearing_price == 1.5


def test_first_price_tie_breaks_lexicographically():
    rules = exchange.AuctionRules(pricing="first_price")
    record = exchange.run_auction(_bids((2.0, "b"), (2.0, "a")), rules)
    assert record.winner == "a"
    assert record.clearing_price == 2.0


def test_reserve_excludes_low_bids():
    rules = exchange.AuctionRules(pricing="second_price", reserve=4.0)
    record = exchange.run_auction(_bids((5.0, "a"), (3.0, "b")), rules)
    assert record.winner == "a"
    assert record.clearing_price == 4.0  # runner-up below reserve


def test_no_qualifying_bids_unsold():
    rules = exchange.AuctionRules(reserve=10.0)
    record = exchange.run_auction(_bids((5.0, "a")), rules)
    assert record.winner is None
    assert record.clearing_price == 0.0


def test_auction_rules_validation():
    with pytest.raises(AuctionError):
        exchange.AuctionRules(pricing="third_price")
    with pytest.raises(AuctionError):
        exchange.AuctionRules(reserve=-1.0)


def test_latency_recorded():
    record = exchange.run_auction(_bids((1.0, "a")), exchange.AuctionRules())
    assert record.within_latency_budget is True


def test_randomized_auctions_match_oracle():
    rng = np.random.default_rng(123)
    for _ in range(2000):
        n = int(rng.integers(0, 6))
        bids = [
            exchange.Bid(
                advertiser_id=f"a{rng.integers(0, 4)}",
                price=float(np.round(rng.uniform(0.1, 5.0), 2)),
                matched_keyword="k",
            )
            for _ in range(n)
        ]
        pricing = "first_price" if rng.random() < 0.5 else "second_price"
        reserve = float(np.round(rng.uniform(0.0, 3.0), 2))
        rules = exchange.AuctionRules(pricing=pricing, reserve=reserve)
        record = exchange.run_auction(bids, rules)
        winner, price = resolve_auction(bids, rules)
        assert record.winner == winner
        assert record.clearing_price == pytest.approx(price)


@settings(max_examples=200, deadline=None)
@given(
    prices=st.lists(st.floats(0.01, 10.0).map(lambda p: round(p, 2)), max_size=6),
    reserve=st.floats(0.0, 5.0).map(lambda r: round(r, 2)),
    first=st.booleans(),
)
def test_auction_matches_oracle_property(prices, reserve, first):
    bids = [
        exchange.Bid(advertiser_id=f"a{i % 3}", price=p, matched_keyword="k")
        for i, p in enumerate(prices)
    ]
    rules = exchange.AuctionRules(
        pricing="first_price" if first else "second_price", reserve=reserve
    )
    record = exchange.run_auction(bids, rules)
    winner, price = resolve_auction(bids, rules)
    assert record.winner == winner
    assert record.clearing_price == pytest.approx(price)


# settlement


def test_settle_clicked_pays_clearing_price():
    reg = exchange.Registry()
    reg.register(_adv())
    record = exchange.run_auction(_bids((3.44, "a1")), exchange.AuctionRules(pricing="first_price"))
    ledger = []
    event = exchange.settle(record, True, reg, ledger)
    assert event.amount == 3.44
    assert ledger == [event]


def test_settle_unclicked_pays_nothing():
    reg = exchange.Registry()
    reg.register(_adv())
    record = exchange.run_auction(_bids((3.44, "a1")), exchange.AuctionRules(pricing="first_price"))
    event = exchange.settle(record, False, reg, [])
    assert event.amount == 0.0


def test_settle_unsold_raises():
    record = exchange.run_auction([], exchange.AuctionRules())
    with pytest.raises(AuctionError, match="unsold"):
        exchange.settle(record, True, exchange.Registry(), [])


def test_budget_decrements_and_blocks_further_bids():
    reg = exchange.Registry()
    reg.register(_adv(bids={"Python": 3.0}, budget=5.0))
    rules = exchange.AuctionRules(pricing="first_price")
    ledger = []

    bids = exchange.collect_bids(reg, _request())
    record = exchange.run_auction(bids, rules)
    exchange.settle(record, True, reg, ledger)
    assert reg.get("a1").budget == 2.0

    # Remaining budget 2.0 < bid 3.0, so the advertiser sits out.
    assert exchange.collect_bids(reg, _request()) == []


def test_ledger_is_append_only_and_conserved():
    reg = exchange.Registry()
    reg.register(_adv("a", bids={"Python": 2.0}))
    reg.register(_adv("b", bids={"Python": 1.0}))
    rules = exchange.AuctionRules(pricing="second_price")
    ledger = []
    rng = np.random.default_rng(5)
    expected = 0.0
    for i in range(50):
        bids = exchange.collect_bids(reg, _request())
        record = exchange.run_auction(bids, rules)
        clicked = bool(rng.random() < 0.5)
        exchange.settle(record, clicked, reg, ledger)
        if clicked:
            expected += record.clearing_price
    assert len(ledger) == 50
    assert sum(e.amount for e in ledger) == pytest.approx(expected)


# campaign loading


def test_load_campaigns(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps([
        {"id": "x", "keywords": ["Python"], "bids": {"Python": 1.0}, "budget": 10.0},
    ]))
    advs = exchange.load_campaigns(p)
    assert len(advs) == 1
    assert advs[0].budget == 10.0


def test_load_campaigns_unknown_key_named(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps([{"id": "x", "bids": {"k": 1.0}, "frequency_cap": 3}]))
    with pytest.raises(AuctionError, match="frequency_cap"):
        exchange.load_campaigns(p)


def test_load_campaigns_missing_required(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps([{"keywords": ["Python"]}]))
    with pytest.raises(AuctionError, match="missing required"):
        exchange.load_campaigns(p)


def test_load_campaigns_malformed(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(AuctionError, match="malformed"):
        exchange.load_campaigns(p)


def test_load_campaigns_missing_file(tmp_path):
    with pytest.raises(AuctionError, match="not found"):
        exchange.load_campaigns(tmp_path / "absent.json")


def test_shipped_campaign_files_parse():
    from conftest import DATA

    for name in ("campaigns.json", "hiring_campaigns.json"):
        advs = exchange.load_campaigns(DATA / name)
        assert advs

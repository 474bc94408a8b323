"""Simulated real-time-bidding exchange for explanation impressions.

Advertisers register keyword campaigns (exact feature keywords, broad theme
matches, context and valence filters). Each explanation impression becomes a
bid request; qualifying advertisers bid their price for the best-matching
key, the auction clears under first- or second-price rules with an optional
reserve, and clicked impressions settle into an append-only revenue ledger.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import AuctionError

LATENCY_BUDGET_S = 0.1  # recorded per auction, not enforced in batch mode


@dataclass
class Advertiser:
    id: str
    keywords: tuple = ()  # feature names, exact match
    themes: tuple = ()  # theme tags, broad match
    contexts: tuple = ()  # empty = any context
    valence_filter: str = "any"  # negative | positive | any
    bids: dict = field(default_factory=dict)  # keyword-or-theme -> price
    budget: float | None = None

    def __post_init__(self):
        if any(p <= 0 for p in self.bids.values()):
            raise AuctionError(f"advertiser {self.id}: all bid prices must be > 0")
        if self.budget is not None and self.budget < 0:
            raise AuctionError(f"advertiser {self.id}: budget must be >= 0")


@dataclass(frozen=True)
class BidRequest:
    impression_id: str
    context: str
    valence: str  # negative | positive
    explanation_features: frozenset
    granularity: str = "fine"
    recipient: dict | None = None

    def __post_init__(self):
        if not self.explanation_features:
            raise AuctionError("bid request needs a non-empty explanation feature set")


@dataclass(frozen=True)
class Bid:
    advertiser_id: str
    price: float
    matched_keyword: str


@dataclass(frozen=True)
class AuctionRules:
    pricing: str = "second_price"  # or "first_price"
    reserve: float = 0.0
    # Ties break on lexicographically smaller advertiser id.

    def __post_init__(self):
        if self.pricing not in ("first_price", "second_price"):
            raise AuctionError(f"unknown pricing rule {self.pricing!r}")
        if self.reserve < 0:
            raise AuctionError("reserve must be >= 0")


@dataclass
class ImpressionRecord:
    impression_id: str
    winner: str | None
    clearing_price: float
    matched_keyword: str | None
    bids: tuple  # full audit trail
    within_latency_budget: bool = True


@dataclass(frozen=True)
class RevenueEvent:
    impression_id: str
    advertiser_id: str
    amount: float


class Registry:
    """Insertion-ordered advertiser registry with budget bookkeeping."""

    def __init__(self):
        self._advertisers: dict = {}

    def register(self, advertiser: Advertiser) -> str:
        if advertiser.id in self._advertisers:
            raise AuctionError(f"duplicate advertiser id {advertiser.id!r}")
        self._advertisers[advertiser.id] = advertiser
        return advertiser.id

    def get(self, advertiser_id: str) -> Advertiser:
        return self._advertisers[advertiser_id]

    def __len__(self):
        return len(self._advertisers)

    def __iter__(self):
        return iter(self._advertisers.values())


def collect_bids(registry: Registry, request: BidRequest, feature_themes: dict | None = None) -> list:
    """One bid per qualifying advertiser, priced at its best-matching key.

    An advertiser qualifies when its contexts admit the request context, its
    valence filter admits the request valence, and at least one keyword
    matches an explanation feature exactly or one theme matches a theme of an
    explanation feature. Advertisers whose remaining budget cannot cover the
    bid are skipped.
    """
    feature_themes = feature_themes or {}
    request_themes = set()
    for f in request.explanation_features:
        request_themes |= set(feature_themes.get(f, ()))

    bids = []
    for adv in registry:
        if adv.contexts and request.context not in adv.contexts:
            continue
        if adv.valence_filter != "any" and adv.valence_filter != request.valence:
            continue
        matches = [k for k in adv.keywords if k in request.explanation_features]
        matches += [t for t in adv.themes if t in request_themes]
        matches = [m for m in matches if m in adv.bids]
        if not matches:
            continue
        key = max(matches, key=lambda m: (adv.bids[m], m))
        price = adv.bids[key]
        if adv.budget is not None and adv.budget < price:
            continue
        bids.append(Bid(advertiser_id=adv.id, price=price, matched_keyword=key))
    return bids


def run_auction(bids: list, rules: AuctionRules, impression_id: str = "") -> ImpressionRecord:
    start = time.perf_counter()
    qualifying = sorted(
        (b for b in bids if b.price >= rules.reserve),
        key=lambda b: (-b.price, b.advertiser_id),
    )
    if not qualifying:
        record = ImpressionRecord(
            impression_id=impression_id,
            winner=None,
            clearing_price=0.0,
            matched_keyword=None,
            bids=tuple(bids),
        )
    else:
        winner = qualifying[0]
        if rules.pricing == "first_price":
            price = winner.price
        else:
            runner_up = qualifying[1].price if len(qualifying) > 1 else 0.0
            price = max(runner_up, rules.reserve)
        record = ImpressionRecord(
            impression_id=impression_id,
            winner=winner.advertiser_id,
            clearing_price=price,
            matched_keyword=winner.matched_keyword,
            bids=tuple(bids),
        )
    record.within_latency_budget = (time.perf_counter() - start) <= LATENCY_BUDGET_S
    return record


def settle(record: ImpressionRecord, clicked: bool, registry: Registry, ledger: list) -> RevenueEvent:
    """Turn a sold impression into a revenue event (cost-per-click model)."""
    if record.winner is None:
        raise AuctionError(f"cannot settle unsold impression {record.impression_id!r}")
    amount = record.clearing_price if clicked else 0.0
    if clicked:
        adv = registry.get(record.winner)
        if adv.budget is not None:
            adv.budget = max(0.0, adv.budget - record.clearing_price)
    event = RevenueEvent(
        impression_id=record.impression_id, advertiser_id=record.winner, amount=amount
    )
    ledger.append(event)
    return event


def load_campaigns(path) -> list:
    """Advertiser campaigns from a JSON list of objects.

    Documented keys: id, keywords, themes, contexts, valence, bids, budget.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise AuctionError(f"campaign file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise AuctionError(f"malformed campaign file {path}: {e}") from None
    if not isinstance(raw, list):
        raise AuctionError(f"campaign file {path} must hold a JSON list")
    allowed = {"id", "keywords", "themes", "contexts", "valence", "bids", "budget"}
    advertisers = []
    for i, entry in enumerate(raw):
        unknown = set(entry) - allowed
        if unknown:
            raise AuctionError(f"campaign entry {i}: unknown key {sorted(unknown)[0]!r}")
        if "id" not in entry or "bids" not in entry:
            raise AuctionError(f"campaign entry {i}: missing required key 'id' or 'bids'")
        advertisers.append(
            Advertiser(
                id=entry["id"],
                keywords=tuple(entry.get("keywords", ())),
                themes=tuple(entry.get("themes", ())),
                contexts=tuple(entry.get("contexts", ())),
                valence_filter=entry.get("valence", "any"),
                bids=dict(entry["bids"]),
                budget=entry.get("budget"),
            )
        )
    return advertisers

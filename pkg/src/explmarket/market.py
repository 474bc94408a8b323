"""Economics layer: CTR/CPC rate tables, per-impression expected revenue,
the five explanation-selection strategies, extrapolation to a population,
and closed-form market-size estimates for whole domains.

Valence convention: "negative" = rejected applicant (search-ad economics),
"positive" = accepted applicant (display-ad economics). An explanation is
"valuable"-tier when at least one changed feature carries the valuable tier
in the schema, and its revenue uses the CPC of that tier.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import ExplMarketError, SpamInjectionError
from .cf import SearchConfig, find_counterfactuals, inject_spam
from .forest import ForestModel, decide_proba
from .tabular import Dataset, encode_matrix, valuable_features

NEGATIVE = "negative"
POSITIVE = "positive"


@dataclass(frozen=True)
class RateTable:
    ctr: dict = field(
        default_factory=lambda: {NEGATIVE: 0.0256, POSITIVE: 0.0052}
    )
    cpc: dict = field(
        default_factory=lambda: {
            (NEGATIVE, "standard"): 3.44,
            (NEGATIVE, "valuable"): 34.40,
            (POSITIVE, "standard"): 0.86,
            (POSITIVE, "valuable"): 8.60,
        }
    )
    currency: str = "USD"

    def __post_init__(self):
        for v, p in self.ctr.items():
            if not 0.0 <= p <= 1.0:
                raise ExplMarketError(f"CTR for {v} must lie in [0, 1]")
        for key, p in self.cpc.items():
            if p <= 0:
                raise ExplMarketError(f"CPC for {key} must be > 0")
        for v in self.ctr:
            if self.cpc[(v, "valuable")] < self.cpc[(v, "standard")]:
                raise ExplMarketError(f"valuable CPC below standard CPC for {v}")


BASELINE = "baseline"
FEATURE_PICKING = "feature_picking"
SPAM = "spam"
INFLATED_REJECTION = "inflated_rejection"
SPAM_INFLATED = "spam_inflated"
STRATEGY_ORDER = (BASELINE, FEATURE_PICKING, SPAM, INFLATED_REJECTION, SPAM_INFLATED)

_INFLATED_THRESHOLD = 0.8


@dataclass(frozen=True)
class StrategySpec:
    kind: str
    threshold: float = 0.5
    preferred: tuple = ()
    spam_feature: str | None = None
    spam_value: object = None

    @classmethod
    def build(cls, kind: str, schema, threshold: float = 0.5, spam_feature: str = "Telephone",
              spam_value="yes") -> "StrategySpec":
        """Canonical configuration for one of the five named strategies."""
        if kind not in STRATEGY_ORDER:
            raise ExplMarketError(f"unknown strategy {kind!r}")
        theta = _INFLATED_THRESHOLD if kind in (INFLATED_REJECTION, SPAM_INFLATED) else threshold
        preferred = valuable_features(schema) if kind == FEATURE_PICKING else ()
        spam = spam_feature if kind in (SPAM, SPAM_INFLATED) else None
        return cls(kind=kind, threshold=theta, preferred=preferred,
                   spam_feature=spam, spam_value=spam_value if spam else None)


@dataclass
class ApplicantRecord:
    instance_id: str
    valence: str
    features: tuple | None  # changed feature names of the chosen explanation
    tier: str | None
    expected_revenue: float
    spam_fallback: bool = False

    @property
    def cf_found(self) -> bool:
        return self.features is not None


@dataclass
class RevenueReport:
    strategy: str
    threshold: float
    counts: dict  # valence -> applicant count
    records: list
    test_size: int
    population: int
    accepted_total: float
    rejected_total: float
    extrapolated_accepted: float
    extrapolated_rejected: float
    extrapolated_total: float
    cf_not_found: int
    histogram: dict  # valence -> {feature -> count}
    pct_increase: float | None = None

    @property
    def test_total(self) -> float:
        return self.accepted_total + self.rejected_total

    def check_invariants(self):
        assert self.counts[POSITIVE] + self.counts[NEGATIVE] == self.test_size
        expect = extrapolate(self.test_total, self.test_size, self.population)
        assert abs(self.extrapolated_total - expect) < 1e-9 * max(1.0, expect)


def tier_of(features, schema) -> str:
    valuable = set(valuable_features(schema))
    return "valuable" if any(f in valuable for f in features) else "standard"


def expected_revenue(explanation_features, valence: str, schema, rates: RateTable) -> float:
    """CTR times the CPC of the most expensive feature tier in the explanation."""
    if not explanation_features:
        raise ExplMarketError("expected_revenue needs a non-empty feature set")
    return rates.ctr[valence] * rates.cpc[(valence, tier_of(explanation_features, schema))]


def extrapolate(test_total: float, test_size: int, population: int) -> float:
    if test_size <= 0:
        raise ExplMarketError("test size must be positive")
    return test_total * population / test_size


def feature_frequency(records) -> dict:
    """Per-valence histogram of feature occurrences across chosen explanations."""
    hist = {}
    for r in records:
        if not r.cf_found:
            continue
        bucket = hist.setdefault(r.valence, {})
        for f in r.features:
            bucket[f] = bucket.get(f, 0) + 1
    return hist


def run_strategy(
    model: ForestModel,
    test: Dataset,
    spec: StrategySpec,
    cf_config: SearchConfig,
    rates: RateTable,
    seed: int,
    population: int = 75_500_000,
) -> RevenueReport:
    """Evaluate one explanation-selection strategy over the full test set.

    Per applicant: decide at the strategy threshold, search counterfactuals
    (restricted to preferred features first when the strategy prefers them,
    spam-padded afterwards when it spams), pick the rank-1 explanation, and
    accumulate expected revenue by valence. Deterministic given the seed.
    """
    schema = model.schema
    config = replace(cf_config, preferred=tuple(spec.preferred), seed=seed)
    probs = model.predict_matrix(encode_matrix(test))

    records = []
    counts = {POSITIVE: 0, NEGATIVE: 0}
    totals = {POSITIVE: 0.0, NEGATIVE: 0.0}
    not_found = 0
    for instance, p in zip(test.rows, probs):
        decision = decide_proba(float(p), spec.threshold)
        valence = POSITIVE if decision.accepted else NEGATIVE
        counts[valence] += 1
        cfs = find_counterfactuals(model, instance, spec.threshold, config)
        if not cfs:
            not_found += 1
            records.append(ApplicantRecord(instance.id, valence, None, None, 0.0))
            continue
        chosen = cfs[0]
        spam_fallback = False
        if spec.spam_feature is not None:
            try:
                chosen = inject_spam(
                    chosen, spec.spam_feature, spec.spam_value, model, instance, spec.threshold
                )
            except SpamInjectionError:
                spam_fallback = True
        features = tuple(sorted(chosen.changes))
        revenue = expected_revenue(features, valence, schema, rates)
        totals[valence] += revenue
        records.append(
            ApplicantRecord(
                instance.id, valence, features, tier_of(features, schema), revenue,
                spam_fallback=spam_fallback,
            )
        )

    n = len(test)
    report = RevenueReport(
        strategy=spec.kind,
        threshold=spec.threshold,
        counts=counts,
        records=records,
        test_size=n,
        population=population,
        accepted_total=totals[POSITIVE],
        rejected_total=totals[NEGATIVE],
        extrapolated_accepted=extrapolate(totals[POSITIVE], n, population),
        extrapolated_rejected=extrapolate(totals[NEGATIVE], n, population),
        extrapolated_total=extrapolate(totals[POSITIVE] + totals[NEGATIVE], n, population),
        cf_not_found=not_found,
        histogram=feature_frequency(records),
    )
    report.check_invariants()
    return report


def percent_increase(report: RevenueReport, baseline: RevenueReport) -> float:
    """% change of extrapolated total versus a baseline report (same model,
    seed and test split), as in the strategy comparison table."""
    if baseline.extrapolated_total == 0:
        raise ExplMarketError("baseline total is zero")
    pct = 100.0 * (report.extrapolated_total / baseline.extrapolated_total - 1.0)
    report.pct_increase = pct
    return pct


def monte_carlo_revenue(records, rates: RateTable, trials: int, seed: int) -> tuple:
    """Sampled click revenue: per trial each impression clicks with
    probability ctr[valence] and pays its tier CPC. Returns (mean, stderr)."""
    if trials < 1:
        raise ExplMarketError("trials must be >= 1")
    found = [r for r in records if r.cf_found]
    if not found:
        return 0.0, 0.0
    ctrs = np.array([rates.ctr[r.valence] for r in found])
    cpcs = np.array([rates.cpc[(r.valence, r.tier)] for r in found])
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x3C]))
    clicks = rng.random((trials, len(found))) < ctrs
    totals = clicks @ cpcs
    mean = float(totals.mean())
    stderr = float(totals.std(ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
    return mean, stderr


@dataclass(frozen=True)
class MarketEstimate:
    domain: str
    rejected: float
    accepted: float
    ctr_search: float
    cpc_search: float
    ctr_display: float
    cpc_display: float
    rejected_revenue: float
    accepted_revenue: float
    total: float


# Built-in per-domain parameters: annual US application counts and the
# industry-average search/display CTR and CPC used for the estimates.
DOMAIN_PARAMS = {
    "finance": dict(rejected=15.1e6, accepted=60.4e6,
                    ctr_search=0.0256, cpc_search=3.44, ctr_display=0.0052, cpc_display=0.86),
    "employment": dict(rejected=2.98e6, accepted=20e3,
                       ctr_search=0.0242, cpc_search=2.04, ctr_display=0.0059, cpc_display=0.78),
    "education": dict(rejected=24e6, accepted=33e6,
                      ctr_search=0.0378, cpc_search=2.40, ctr_display=0.0053, cpc_display=0.47),
}


def estimate_market(domain: str, rejected: float, accepted: float, ctr_search: float,
                    cpc_search: float, ctr_display: float, cpc_display: float) -> MarketEstimate:
    """Closed-form domain revenue: rejected applications earn search-ad
    economics, accepted applications earn display-ad economics."""
    if rejected < 0 or accepted < 0:
        raise ExplMarketError("application counts must be >= 0")
    rejected_revenue = ctr_search * cpc_search * rejected
    accepted_revenue = ctr_display * cpc_display * accepted
    return MarketEstimate(
        domain=domain,
        rejected=rejected,
        accepted=accepted,
        ctr_search=ctr_search,
        cpc_search=cpc_search,
        ctr_display=ctr_display,
        cpc_display=cpc_display,
        rejected_revenue=rejected_revenue,
        accepted_revenue=accepted_revenue,
        total=rejected_revenue + accepted_revenue,
    )


def estimate_domain(domain: str, **overrides) -> MarketEstimate:
    if domain not in DOMAIN_PARAMS:
        raise ExplMarketError(f"unknown domain {domain!r}; choose from {sorted(DOMAIN_PARAMS)}")
    params = {**DOMAIN_PARAMS[domain], **{k: v for k, v in overrides.items() if v is not None}}
    return estimate_market(domain, **params)

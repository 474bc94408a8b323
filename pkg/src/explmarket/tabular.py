"""Dataset schema, loading, one-hot encoding and stratified splitting.

The schema file is the single source of truth for feature names, kinds,
domains, mutability, value tiers and theme tags. Format (one feature per
line, whitespace separated, '#' comments allowed):

    name  kind  domain  mutability  tier  themes

where kind is numeric|categorical|binary, domain is ``lo:hi`` for numeric
features or a comma separated category list, mutability is
``mutable``/``immutable``, tier is ``standard``/``valuable`` and themes is a
comma separated list of tags (``-`` for none). For binary features the
first listed value encodes to 0 and the second to 1.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import DatasetError

NUMERIC = "numeric"
CATEGORICAL = "categorical"
BINARY = "binary"
KINDS = (NUMERIC, CATEGORICAL, BINARY)


@dataclass(frozen=True)
class FeatureSchema:
    """Declaration of a single tabular feature."""

    name: str
    kind: str
    domain: tuple  # (lo, hi) for numeric, category tuple otherwise
    mutable: bool = True
    tier: str = "standard"
    themes: frozenset = frozenset()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DatasetError(f"unknown feature kind {self.kind!r} for {self.name}")
        if self.kind == NUMERIC:
            lo, hi = self.domain
            if not lo < hi:
                raise DatasetError(f"numeric domain for {self.name} needs lo < hi, got {self.domain}")
        else:
            if len(set(self.domain)) < 2:
                raise DatasetError(f"{self.name} needs >= 2 distinct categories")
            if self.kind == BINARY and len(self.domain) != 2:
                raise DatasetError(f"binary feature {self.name} needs exactly 2 values")
        if self.tier not in ("standard", "valuable"):
            raise DatasetError(f"unknown tier {self.tier!r} for {self.name}")

    @property
    def width(self) -> int:
        """Number of columns this feature occupies in the encoded vector."""
        if self.kind == NUMERIC or self.kind == BINARY:
            return 1
        return len(self.domain)

    def contains(self, value) -> bool:
        if self.kind == NUMERIC:
            try:
                v = float(value)
            except (TypeError, ValueError):
                return False
            lo, hi = self.domain
            return lo <= v <= hi
        return value in self.domain


@dataclass(frozen=True)
class Instance:
    """One row: an opaque id plus one value per schema feature."""

    id: str
    values: tuple

    def value_map(self, schema: list[FeatureSchema]) -> dict:
        return {f.name: v for f, v in zip(schema, self.values)}


@dataclass(frozen=True)
class Dataset:
    schema: tuple
    rows: tuple
    labels: tuple  # 1 = creditworthy / suitable

    def __post_init__(self):
        if len(self.labels) != len(self.rows):
            raise DatasetError("labels length must equal row count")

    def __len__(self):
        return len(self.rows)


def validate_schema(schema: list[FeatureSchema]) -> None:
    names = [f.name for f in schema]
    if len(set(names)) != len(names):
        raise DatasetError("duplicate feature names in schema")


def schema_fingerprint(schema: list[FeatureSchema]) -> str:
    """Stable digest of names/kinds/domains, used to pin a model to its schema."""
    parts = []
    for f in schema:
        dom = ":".join(str(d) for d in f.domain)
        parts.append(f"{f.name}|{f.kind}|{dom}")
    return hashlib.sha1(";".join(parts).encode()).hexdigest()[:16]


def theme_map(schema: list[FeatureSchema]) -> dict:
    """feature name -> frozenset of theme tags."""
    return {f.name: f.themes for f in schema}


def valuable_features(schema: list[FeatureSchema]) -> tuple:
    return tuple(f.name for f in schema if f.tier == "valuable")


def load_schema(path) -> list[FeatureSchema]:
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"schema file not found: {path}")
    schema = []
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 6:
            raise DatasetError(f"{path}:{lineno}: expected 6 fields, got {len(parts)}")
        name, kind, domain_s, mut, tier, themes_s = parts
        if kind == NUMERIC:
            lo_s, hi_s = domain_s.split(":")
            domain = (float(lo_s), float(hi_s))
        else:
            domain = tuple(domain_s.split(","))
        themes = frozenset() if themes_s == "-" else frozenset(themes_s.split(","))
        schema.append(
            FeatureSchema(name, kind, domain, mutable=(mut == "mutable"), tier=tier, themes=themes)
        )
    validate_schema(schema)
    return schema


def _parse_value(token: str, feat: FeatureSchema, row: int):
    if feat.kind == NUMERIC:
        try:
            v = float(token)
        except ValueError:
            raise DatasetError(
                f"row {row}, column {feat.name}: {token!r} is not numeric"
            ) from None
    else:
        v = token
    if not feat.contains(v):
        raise DatasetError(
            f"row {row}, column {feat.name}: value {token!r} outside declared domain"
        )
    return v


def load_dataset(path, schema: list[FeatureSchema]) -> Dataset:
    """Load a delimiter-separated file (comma or whitespace, auto-detected).

    One row per applicant, final column is the binary label.
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"dataset file not found: {path}")
    lines = [
        ln for ln in path.read_text().splitlines() if ln.strip() and not ln.lstrip().startswith("#")
    ]
    if not lines:
        raise DatasetError(f"no rows in {path}")
    delim = "," if "," in lines[0] else None  # None => any whitespace
    rows, labels = [], []
    expected = len(schema) + 1
    for i, line in enumerate(lines):
        tokens = [t.strip() for t in line.split(delim)]
        if len(tokens) != expected:
            raise DatasetError(
                f"row {i}: expected {expected} columns ({len(schema)} features + label), got {len(tokens)}"
            )
        values = tuple(_parse_value(tok, feat, i) for tok, feat in zip(tokens, schema))
        try:
            label = int(tokens[-1])
        except ValueError:
            raise DatasetError(f"row {i}: label {tokens[-1]!r} is not an integer") from None
        if label not in (0, 1):
            raise DatasetError(f"row {i}: label must be 0 or 1, got {label}")
        rows.append(Instance(id=str(i), values=values))
        labels.append(label)
    return Dataset(schema=tuple(schema), rows=tuple(rows), labels=tuple(labels))


def split(dataset: Dataset, test_fraction: float, seed: int) -> tuple:
    """Stratified train/test split; the partition depends only on the seed."""
    if not 0.0 < test_fraction < 1.0:
        raise DatasetError(f"test fraction must lie in (0, 1), got {test_fraction}")
    if len(dataset) == 0:
        raise DatasetError("cannot split an empty dataset")
    labels = np.asarray(dataset.labels)
    n = len(dataset)
    n_test = int(round(test_fraction * n))
    rng = np.random.default_rng(np.random.SeedSequence([0x5EED, seed]))

    # Per-class quota by rounding, then adjust so totals match n_test exactly.
    classes = sorted(set(dataset.labels))
    quotas = {c: int(round(test_fraction * int((labels == c).sum()))) for c in classes}
    while sum(quotas.values()) != n_test:
        delta = 1 if sum(quotas.values()) < n_test else -1
        # Adjust the largest class first; deterministic order.
        c = max(classes, key=lambda c: (int((labels == c).sum()), c))
        quotas[c] += delta

    test_idx = []
    for c in classes:
        members = np.flatnonzero(labels == c)
        perm = rng.permutation(len(members))
        test_idx.extend(members[perm[: quotas[c]]].tolist())
    test_mask = np.zeros(n, dtype=bool)
    test_mask[test_idx] = True

    def subset(mask):
        rows = tuple(r for r, m in zip(dataset.rows, mask) if m)
        labs = tuple(l for l, m in zip(dataset.labels, mask) if m)
        return Dataset(schema=dataset.schema, rows=rows, labels=labs)

    return subset(~test_mask), subset(test_mask)


def encoded_width(schema: list[FeatureSchema]) -> int:
    return sum(f.width for f in schema)


def feature_offsets(schema: list[FeatureSchema]) -> dict:
    """feature name -> (start column, width) in the encoded vector."""
    offsets, pos = {}, 0
    for f in schema:
        offsets[f.name] = (pos, f.width)
        pos += f.width
    return offsets


def encode_value(feat: FeatureSchema, value) -> np.ndarray:
    if feat.kind == NUMERIC:
        return np.array([float(value)])
    if feat.kind == BINARY:
        return np.array([float(feat.domain.index(value))])
    out = np.zeros(len(feat.domain))
    out[feat.domain.index(value)] = 1.0
    return out


def encode(instance: Instance, schema: list[FeatureSchema]) -> np.ndarray:
    """Schema-ordered numeric vector: numerics pass through, categoricals one-hot,
    binaries map to {0, 1}."""
    return np.concatenate([encode_value(f, v) for f, v in zip(schema, instance.values)])


def decode(vector: np.ndarray, schema: list[FeatureSchema], instance_id: str = "decoded") -> Instance:
    """Inverse of :func:`encode`; used by round-trip tests."""
    values, pos = [], 0
    for f in schema:
        block = vector[pos : pos + f.width]
        if f.kind == NUMERIC:
            values.append(float(block[0]))
        elif f.kind == BINARY:
            values.append(f.domain[int(round(block[0]))])
        else:
            values.append(f.domain[int(np.argmax(block))])
        pos += f.width
    return Instance(id=instance_id, values=tuple(values))


def encode_matrix(dataset: Dataset) -> np.ndarray:
    return np.stack([encode(r, dataset.schema) for r in dataset.rows])

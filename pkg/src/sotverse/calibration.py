"""Abnormality thresholds: calibration from distributions, classification.

A frame is *challenging* for an attribute when its value falls in the
attribute's abnormal interval. The shipped default thresholds (in
``data/default_thresholds.json``) are the published constants; users can
recalibrate on their own environment: pool every available per-frame
value, summarize it box-plot style (quartiles by linear interpolation,
whiskers at 1.5 IQR clamped to the data range) and take the whiskers as
interval boundaries. Ratio, relative scale and illumination are abnormal
outside their interval; blur and corrcoef below a bound; the deltas and
fast motion above one. Some datasets are excluded from individual bounds
before calibration (grayscale-heavy sets distort the illumination lower
bound, one outlier set distorts blur), mirroring how the defaults were
derived.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, Iterable, Mapping, Tuple, Union

import numpy as np

from .attributes import ATTRIBUTE_NAMES, AttributeRecord, AttributeTable
from .errors import ConfigError, DomainError, LoadError
from .geometry import Environment

THRESHOLDS_SCHEMA = 1

# Which side of the distribution is abnormal, per attribute.
ATTRIBUTE_SIDES: Mapping[str, str] = {
    "ratio": "two_sided",
    "relative_scale": "two_sided",
    "illumination": "two_sided",
    "blur": "low",
    "delta_ratio": "high",
    "delta_relative_scale": "high",
    "delta_illumination": "high",
    "delta_blur": "high",
    "fast_motion": "high",
    "corrcoef": "low",
}


@dataclass(frozen=True)
class DistributionSummary:
    """Box-plot summary of one attribute's pooled per-frame values."""

    attribute: str
    q1: float
    q2: float
    q3: float
    whisker_low: float
    whisker_high: float
    count: int

    def __post_init__(self):
        if not (self.q1 <= self.q2 <= self.q3):
            raise DomainError(f"{self.attribute}: quartiles out of order")


@dataclass(frozen=True)
class ThresholdRule:
    """Abnormal predicate: below a, above b, or outside [a, b] (inclusive)."""

    kind: str  # "below" | "above" | "outside"
    bounds: Tuple[float, ...]

    def __post_init__(self):
        if self.kind not in ("below", "above", "outside"):
            raise ConfigError(f"unknown threshold kind {self.kind!r}")
        n = 2 if self.kind == "outside" else 1
        if len(self.bounds) != n:
            raise ConfigError(f"{self.kind} rule needs {n} bound(s), got {self.bounds}")
        if any(not np.isfinite(b) for b in self.bounds):
            raise ConfigError(f"threshold bounds must be finite, got {self.bounds}")
        if self.kind == "outside" and not self.bounds[0] < self.bounds[1]:
            raise ConfigError(f"outside rule needs a < b, got {self.bounds}")

    def is_abnormal(self, value: float) -> bool:
        if self.kind == "below":
            return value <= self.bounds[0]
        if self.kind == "above":
            return value >= self.bounds[0]
        return value <= self.bounds[0] or value >= self.bounds[1]


@dataclass(frozen=True)
class ThresholdSet:
    """Per-attribute abnormal predicates plus their provenance."""

    rules: Mapping[str, ThresholdRule]
    provenance: str = "calibrated"
    id: str = "default"

    def __post_init__(self):
        for name in self.rules:
            if name not in ATTRIBUTE_NAMES:
                raise ConfigError(f"threshold for unknown attribute {name!r}")

    def rule(self, attribute: str) -> ThresholdRule:
        try:
            return self.rules[attribute]
        except KeyError:
            raise ConfigError(f"no threshold for attribute {attribute!r}") from None


@dataclass(frozen=True)
class ChallengeFlags:
    """Per-frame booleans, one per attribute; unavailable values are False."""

    sequence_id: str
    rows: Tuple[Tuple[bool, ...], ...]

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, attribute: str) -> Tuple[bool, ...]:
        i = ATTRIBUTE_NAMES.index(attribute)
        return tuple(row[i] for row in self.rows)


@dataclass(frozen=True)
class CalibrationPolicy:
    """Side spec plus per-bound dataset exclusions used when calibrating."""

    sides: Mapping[str, str] = field(default_factory=lambda: dict(ATTRIBUTE_SIDES))
    # attribute -> {"low"|"high" -> dataset ids to drop before pooling}
    exclusions: Mapping[str, Mapping[str, frozenset]] = field(
        default_factory=lambda: {
            "illumination": {"low": frozenset({"otb2015"})},
            "blur": {"low": frozenset({"videocube"})},
        }
    )

    def validate(self) -> None:
        for name in list(self.sides) + list(self.exclusions):
            if name not in ATTRIBUTE_NAMES:
                raise ConfigError(f"calibration policy names unknown attribute {name!r}")
        for name, side in self.sides.items():
            if side not in ("two_sided", "low", "high"):
                raise ConfigError(f"{name}: unknown side spec {side!r}")


DEFAULT_POLICY = CalibrationPolicy()


def pooled_values(
    env: Environment,
    tables: Mapping[str, AttributeTable],
    attribute: str,
    exclude_datasets: Iterable[str] = (),
) -> np.ndarray:
    if attribute not in ATTRIBUTE_NAMES:
        raise ConfigError(f"unknown attribute {attribute!r}")
    excluded = frozenset(exclude_datasets)
    chunks = []
    for seq in env.sequences:
        if seq.dataset_id in excluded:
            continue
        table = tables.get(seq.id)
        if table is None:
            raise LoadError(f"no attribute table for sequence {seq.id!r}")
        vals = [v for v in table.column(attribute) if v is not None]
        if vals:
            chunks.append(np.asarray(vals, dtype=np.float64))
    if not chunks:
        raise DomainError(f"no {attribute} values left after exclusions")
    return np.concatenate(chunks)


def summarize_values(attribute: str, values: np.ndarray) -> DistributionSummary:
    """Quartiles by linear interpolation; whiskers at 1.5 IQR, clamped."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise DomainError(f"no values to summarize for {attribute}")
    q1, q2, q3 = (float(q) for q in np.percentile(v, [25.0, 50.0, 75.0]))
    iqr = q3 - q1
    lo, hi = float(v.min()), float(v.max())
    return DistributionSummary(
        attribute=attribute,
        q1=q1,
        q2=q2,
        q3=q3,
        whisker_low=max(lo, q1 - 1.5 * iqr),
        whisker_high=min(hi, q3 + 1.5 * iqr),
        count=int(v.size),
    )


def attribute_distribution(
    env: Environment,
    tables: Mapping[str, AttributeTable],
    attribute: str,
    exclude_datasets: Iterable[str] = (),
) -> DistributionSummary:
    return summarize_values(attribute, pooled_values(env, tables, attribute, exclude_datasets))


def calibrate_thresholds(
    env: Environment,
    tables: Mapping[str, AttributeTable],
    policy: CalibrationPolicy = DEFAULT_POLICY,
    set_id: str = "calibrated",
) -> ThresholdSet:
    """Turn distribution whiskers into abnormal-interval boundaries.

    Each bound of a two-sided attribute may use its own exclusion list, so
    the pooled distribution is computed per bound when they differ.
    """
    policy.validate()
    rules: Dict[str, ThresholdRule] = {}
    for name in ATTRIBUTE_NAMES:
        side = policy.sides.get(name)
        if side is None:
            continue
        excl = policy.exclusions.get(name, {})

        def whisker(which: str) -> float:
            summary = attribute_distribution(env, tables, name, excl.get(which, frozenset()))
            return summary.whisker_low if which == "low" else summary.whisker_high

        if side == "low":
            rules[name] = ThresholdRule("below", (whisker("low"),))
        elif side == "high":
            rules[name] = ThresholdRule("above", (whisker("high"),))
        else:
            lo, hi = whisker("low"), whisker("high")
            if lo == hi:
                # degenerate pooled distribution: widen one ulp outward so
                # the constant itself stays normal
                lo, hi = float(np.nextafter(lo, -np.inf)), float(np.nextafter(hi, np.inf))
            rules[name] = ThresholdRule("outside", (lo, hi))
    return ThresholdSet(rules=rules, provenance="calibrated", id=set_id)


def classify_record(record: AttributeRecord, thresholds: ThresholdSet) -> Tuple[bool, ...]:
    """One flags row: True where the attribute is available and abnormal."""
    flags = []
    for name in ATTRIBUTE_NAMES:
        value = record.get(name)
        rule = thresholds.rules.get(name)
        flags.append(bool(rule.is_abnormal(value)) if value is not None and rule else False)
    return tuple(flags)


def classify_table(table: AttributeTable, thresholds: ThresholdSet) -> ChallengeFlags:
    return ChallengeFlags(
        sequence_id=table.sequence_id,
        rows=tuple(classify_record(r, thresholds) for r in table.records),
    )


def default_thresholds() -> ThresholdSet:
    """The shipped paper-default threshold set."""
    with resources.files("sotverse.data").joinpath("default_thresholds.json").open("rb") as fh:
        return _parse_thresholds(json.load(fh), "default_thresholds.json")


def load_thresholds(path: Union[str, Path]) -> ThresholdSet:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise LoadError(f"cannot parse thresholds {path}: {exc}") from exc
    return _parse_thresholds(doc, str(path))


def _parse_thresholds(doc: dict, source: str) -> ThresholdSet:
    if doc.get("schema") != THRESHOLDS_SCHEMA:
        raise LoadError(f"{source}: unsupported thresholds schema {doc.get('schema')!r}")
    rules = {}
    for name, spec in doc.get("attributes", {}).items():
        try:
            rules[name] = ThresholdRule(spec["kind"], tuple(spec["bounds"]))
        except (KeyError, TypeError, ConfigError) as exc:
            raise LoadError(f"{source}: bad rule for {name!r}: {exc}") from exc
    if not rules:
        raise LoadError(f"{source}: no attribute rules")
    return ThresholdSet(
        rules=rules,
        provenance=doc.get("provenance", "calibrated"),
        id=doc.get("id", Path(source).stem),
    )


def write_thresholds(thresholds: ThresholdSet, path: Union[str, Path]) -> None:
    doc = {
        "schema": THRESHOLDS_SCHEMA,
        "id": thresholds.id,
        "provenance": thresholds.provenance,
        "attributes": {
            name: {"kind": rule.kind, "bounds": list(rule.bounds)}
            for name, rule in sorted(thresholds.rules.items())
        },
    }
    Path(path).write_bytes((json.dumps(doc, indent=2, sort_keys=True) + "\n").encode())


def write_flags(flags: ChallengeFlags, path: Union[str, Path]) -> None:
    """flags.csv: binary columns in the attributes.csv column order."""
    lines = [",".join(ATTRIBUTE_NAMES)]
    for row in flags.rows:
        lines.append(",".join("1" if v else "0" for v in row))
    Path(path).write_bytes(("\n".join(lines) + "\n").encode())


def read_flags(path: Union[str, Path]) -> ChallengeFlags:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != ",".join(ATTRIBUTE_NAMES):
        raise LoadError(f"{path}: missing or wrong flags header")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(ATTRIBUTE_NAMES) or any(c not in ("0", "1") for c in cells):
            raise LoadError(f"{path}:{lineno}: expected {len(ATTRIBUTE_NAMES)} binary cells")
        rows.append(tuple(c == "1" for c in cells))
    return ChallengeFlags(sequence_id=path.parent.name or path.stem, rows=tuple(rows))

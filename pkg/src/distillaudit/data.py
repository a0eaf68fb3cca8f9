"""Audit dataset ingestion, feature schemas, and quantile binning.

The dataset model is deliberately small: named feature columns (numeric or
categorical), one real-valued score column, and one binary outcome column
that may be blank on individual rows (score-only rows, legal and used only
for mimic training). Every downstream model consumes the bin indices
produced here, so the binning rules are the contract that keeps the mimic
and outcome models comparable:

* numeric features are cut at quantile edges, at most ``max_bins`` value
  bins, half-open intervals ``[edge_i, edge_{i+1})`` with the outermost
  bins unbounded (out-of-range values clamp to them);
* categorical features get one bin per observed category;
* every feature reserves a dedicated trailing bin for missing values, and
  unseen categories map to it.

Schema fitting and binning are pure functions of their inputs; the
resulting objects are immutable and safe to share across threads.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError

NUMERIC = "numeric"
CATEGORICAL = "categorical"

_DEFAULT_MISSING_MARKERS = ("", "na", "nan", "null", "none")


@dataclass(frozen=True)
class LoadConfig:
    """How to read a delimited text file into an :class:`AuditDataset`."""

    score_column: str = "score"
    outcome_column: str = "outcome"
    delimiter: str = ","
    feature_types: dict[str, str] = field(default_factory=dict)
    feature_columns: tuple[str, ...] | None = None
    missing_markers: tuple[str, ...] = _DEFAULT_MISSING_MARKERS
    max_bins: int = 256

    @classmethod
    def from_dict(cls, d: dict) -> "LoadConfig":
        known = {
            "score_column",
            "outcome_column",
            "delimiter",
            "feature_types",
            "feature_columns",
            "missing_markers",
            "max_bins",
        }
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(d)
        if "feature_columns" in kwargs and kwargs["feature_columns"] is not None:
            kwargs["feature_columns"] = tuple(kwargs["feature_columns"])
        if "missing_markers" in kwargs:
            kwargs["missing_markers"] = tuple(str(m).lower() for m in kwargs["missing_markers"])
        cfg = cls(**kwargs)
        for name, kind in cfg.feature_types.items():
            if kind not in (NUMERIC, CATEGORICAL):
                raise ConfigError(f"feature type for {name!r} must be numeric or categorical, got {kind!r}")
        return cfg

    @classmethod
    def from_json(cls, path: str | Path) -> "LoadConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                d = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {path}: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError("config file must contain a JSON object")
        return cls.from_dict(d)


@dataclass
class AuditDataset:
    """Rows of features plus a score column and an optional binary outcome.

    ``outcome`` is float with NaN marking score-only rows. Numeric feature
    columns use NaN for missing values; categorical columns use None.
    """

    feature_names: tuple[str, ...]
    feature_kinds: tuple[str, ...]
    columns: dict[str, np.ndarray]
    score: np.ndarray
    outcome: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.score = np.asarray(self.score, dtype=float)
        self.outcome = np.asarray(self.outcome, dtype=float)
        t = len(self.score)
        if t < 1:
            raise DataError("dataset must contain at least one row")
        if len(self.outcome) != t:
            raise DataError("score and outcome lengths differ")
        if not np.all(np.isfinite(self.score)):
            raise DataError("score column contains non-finite values")
        present = ~np.isnan(self.outcome)
        if not np.all(np.isin(self.outcome[present], (0.0, 1.0))):
            raise DataError("non-binary outcome value")
        if len(self.feature_names) != len(self.feature_kinds):
            raise DataError("feature names and kinds differ in length")
        for name in self.feature_names:
            if name not in self.columns:
                raise DataError(f"missing feature column {name!r}")
            if len(self.columns[name]) != t:
                raise DataError(f"feature column {name!r} has wrong length")

    @property
    def n_rows(self) -> int:
        return len(self.score)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def has_outcome(self) -> np.ndarray:
        """Boolean mask of rows carrying a ground-truth outcome."""
        return ~np.isnan(self.outcome)

    @property
    def n_score_only(self) -> int:
        return int(np.sum(~self.has_outcome))

    def kind_of(self, name: str) -> str:
        try:
            return self.feature_kinds[self.feature_names.index(name)]
        except ValueError as exc:
            raise DataError(f"unknown feature {name!r}") from exc

    @classmethod
    def from_arrays(
        cls,
        features: dict[str, np.ndarray],
        score: np.ndarray,
        outcome: np.ndarray,
        kinds: dict[str, str] | None = None,
    ) -> "AuditDataset":
        """Build a dataset from in-memory arrays, inferring kinds from dtype."""
        names = tuple(features)
        kinds = kinds or {}
        resolved = []
        columns = {}
        for name in names:
            col = np.asarray(features[name])
            kind = kinds.get(name)
            if kind is None:
                kind = NUMERIC if np.issubdtype(col.dtype, np.number) else CATEGORICAL
            if kind == NUMERIC:
                col = col.astype(float)
            else:
                col = np.array([None if v is None else str(v) for v in col], dtype=object)
            resolved.append(kind)
            columns[name] = col
        return cls(names, tuple(resolved), columns, np.asarray(score), np.asarray(outcome))

    def to_csv(self, path: str | Path) -> None:
        """Write the dataset as CSV with blank cells for missing values."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(list(self.feature_names) + ["score", "outcome"])
            cols = [self.columns[n] for n in self.feature_names]
            kinds = self.feature_kinds
            for t in range(self.n_rows):
                row = []
                for kind, col in zip(kinds, cols):
                    v = col[t]
                    if kind == NUMERIC:
                        row.append("" if np.isnan(v) else repr(float(v)))
                    else:
                        row.append("" if v is None else v)
                row.append(repr(float(self.score[t])))
                o = self.outcome[t]
                row.append("" if np.isnan(o) else str(int(o)))
                writer.writerow(row)


def _is_missing(cell: str, markers: tuple[str, ...]) -> bool:
    return cell.strip().lower() in markers


def load_csv(path: str | Path, config: LoadConfig | None = None) -> AuditDataset:
    """Read a delimited text file with a header row into an :class:`AuditDataset`.

    Rows whose score cell does not parse as a finite number are dropped and
    counted in ``meta["rejected_rows"]``. Rows with a blank outcome cell are
    retained and flagged score-only. A parseable but non-binary outcome is an
    error, as is a missing score or outcome column.
    """
    config = config or LoadConfig()
    try:
        fh = open(path, newline="", encoding="utf-8")
    except FileNotFoundError as exc:
        raise DataError(f"data file not found: {path}") from exc
    with fh:
        reader = csv.reader(fh, delimiter=config.delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("empty file") from None
        header = [h.strip() for h in header]
        rows = [r for r in reader if r]

    if config.score_column not in header:
        raise DataError(f"missing score column {config.score_column!r}")
    if config.outcome_column not in header:
        raise DataError(f"missing outcome column {config.outcome_column!r}")
    if config.feature_columns is not None:
        missing = [c for c in config.feature_columns if c not in header]
        if missing:
            raise ConfigError(f"feature columns not in file: {missing}")
        feature_names = tuple(config.feature_columns)
    else:
        feature_names = tuple(
            h for h in header if h not in (config.score_column, config.outcome_column)
        )
    for name in config.feature_types:
        if name not in feature_names:
            raise ConfigError(f"type override for unknown feature {name!r}")

    col_idx = {h: i for i, h in enumerate(header)}
    markers = config.missing_markers
    score_i = col_idx[config.score_column]
    outcome_i = col_idx[config.outcome_column]

    scores: list[float] = []
    outcomes: list[float] = []
    raw_features: dict[str, list[str | None]] = {n: [] for n in feature_names}
    rejected = 0
    for r in rows:
        if len(r) != len(header):
            rejected += 1
            continue
        cell = r[score_i]
        if _is_missing(cell, markers):
            rejected += 1
            continue
        try:
            s = float(cell)
        except ValueError:
            rejected += 1
            continue
        if not np.isfinite(s):
            rejected += 1
            continue
        o_cell = r[outcome_i]
        if _is_missing(o_cell, markers):
            o = float("nan")
        else:
            try:
                o = float(o_cell)
            except ValueError:
                raise DataError(f"non-binary outcome value {o_cell!r}") from None
            if o not in (0.0, 1.0):
                raise DataError(f"non-binary outcome value {o_cell!r}")
        scores.append(s)
        outcomes.append(o)
        for name in feature_names:
            c = r[col_idx[name]]
            raw_features[name].append(None if _is_missing(c, markers) else c.strip())

    if not scores:
        raise DataError("no usable rows (every row was rejected or the file had none)")

    columns: dict[str, np.ndarray] = {}
    kinds: list[str] = []
    for name in feature_names:
        cells = raw_features[name]
        kind = config.feature_types.get(name)
        if kind is None:
            kind = NUMERIC
            for c in cells:
                if c is None:
                    continue
                try:
                    float(c)
                except ValueError:
                    kind = CATEGORICAL
                    break
        if kind == NUMERIC:
            vals = np.full(len(cells), np.nan)
            for i, c in enumerate(cells):
                if c is None:
                    continue
                try:
                    vals[i] = float(c)
                except ValueError:
                    raise DataError(
                        f"feature {name!r} declared numeric but value {c!r} does not parse"
                    ) from None
            columns[name] = vals
        else:
            columns[name] = np.array(cells, dtype=object)
        kinds.append(kind)

    ds = AuditDataset(
        feature_names,
        tuple(kinds),
        columns,
        np.array(scores),
        np.array(outcomes),
    )
    ds.meta["rejected_rows"] = rejected
    ds.meta["source"] = str(path)
    return ds


@dataclass(frozen=True)
class FeatureSpec:
    """Binning rule for one feature.

    Numeric: ``edges`` are strictly increasing interior cut points; value
    bins are ``(-inf, e0), [e0, e1), ..., [e_last, inf)``. Categorical:
    ``categories`` is the sorted list of observed categories, one bin each.
    The last bin index is always the missing-value bin.
    """

    name: str
    kind: str
    edges: tuple[float, ...] | None = None
    categories: tuple[str, ...] | None = None

    @property
    def n_value_bins(self) -> int:
        if self.kind == NUMERIC:
            return len(self.edges) + 1
        return len(self.categories)

    @property
    def n_bins(self) -> int:
        return self.n_value_bins + 1

    @property
    def missing_bin(self) -> int:
        return self.n_value_bins

    def bin_labels(self) -> list[str]:
        """Human-readable label per bin, missing bin last."""
        if self.kind == CATEGORICAL:
            return list(self.categories) + ["(missing)"]
        e = self.edges
        if not e:
            labels = ["(all)"]
        else:
            labels = [f"<{e[0]:g}"]
            labels += [f"[{a:g},{b:g})" for a, b in zip(e[:-1], e[1:])]
            labels.append(f">={e[-1]:g}")
        return labels + ["(missing)"]


@dataclass(frozen=True)
class FeatureSchema:
    """Immutable per-feature binning rules shared by all models in a run."""

    specs: tuple[FeatureSpec, ...]
    max_bins: int

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.specs)

    @property
    def n_features(self) -> int:
        return len(self.specs)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError as exc:
            raise DataError(f"feature {name!r} absent from schema") from exc

    def n_bins(self, feature: int) -> int:
        return self.specs[feature].n_bins

    def to_json_dict(self) -> dict:
        specs = []
        for s in self.specs:
            d: dict = {"name": s.name, "kind": s.kind}
            if s.kind == NUMERIC:
                d["edges"] = list(s.edges)
            else:
                d["categories"] = list(s.categories)
            specs.append(d)
        return {"format_version": 1, "max_bins": self.max_bins, "features": specs}

    @classmethod
    def from_json_dict(cls, d: dict) -> "FeatureSchema":
        specs = []
        for s in d["features"]:
            if s["kind"] == NUMERIC:
                specs.append(FeatureSpec(s["name"], NUMERIC, edges=tuple(s["edges"])))
            else:
                specs.append(FeatureSpec(s["name"], CATEGORICAL, categories=tuple(s["categories"])))
        return cls(tuple(specs), int(d["max_bins"]))

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "FeatureSchema":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


def fit_schema(data: AuditDataset, max_bins: int = 256) -> FeatureSchema:
    """Fit quantile bin edges (numeric) and category lists (categorical).

    A pure function of ``data`` and ``max_bins``: repeated calls yield
    identical schemas. Features with fewer distinct values than ``max_bins``
    get one bin per distinct value.
    """
    if max_bins < 2:
        raise ConfigError("max_bins must be at least 2")
    specs = []
    for name, kind in zip(data.feature_names, data.feature_kinds):
        col = data.columns[name]
        if kind == NUMERIC:
            vals = col[~np.isnan(col)]
            if len(vals) == 0:
                raise DataError(f"feature {name!r} has zero non-missing values")
            distinct = np.unique(vals)
            if len(distinct) <= max_bins:
                edges = distinct[1:]
            else:
                qs = np.arange(1, max_bins) / max_bins
                edges = np.unique(np.quantile(vals, qs))
                edges = edges[edges > distinct[0]]
            specs.append(FeatureSpec(name, NUMERIC, edges=tuple(float(e) for e in edges)))
        else:
            observed = sorted({v for v in col if v is not None})
            if not observed:
                raise DataError(f"feature {name!r} has zero non-missing values")
            specs.append(FeatureSpec(name, CATEGORICAL, categories=tuple(observed)))
    return FeatureSchema(tuple(specs), max_bins)


@dataclass(frozen=True)
class BinnedMatrix:
    """T x p matrix of bin indices under a fixed schema."""

    codes: np.ndarray
    schema: FeatureSchema

    @property
    def n_rows(self) -> int:
        return self.codes.shape[0]

    def column(self, feature: int) -> np.ndarray:
        return self.codes[:, feature]

    def take(self, rows: np.ndarray) -> "BinnedMatrix":
        return BinnedMatrix(self.codes[np.asarray(rows)], self.schema)

    def bin_mass(self, feature: int, rows: np.ndarray | None = None) -> np.ndarray:
        """Fraction of rows per bin, over all rows or a subset."""
        col = self.column(feature) if rows is None else self.codes[np.asarray(rows), feature]
        counts = np.bincount(col, minlength=self.schema.n_bins(feature)).astype(float)
        return counts / counts.sum()


def bin_dataset(data: AuditDataset, schema: FeatureSchema) -> BinnedMatrix:
    """Map every feature value to its bin index under ``schema``.

    Total on finite inputs: out-of-range numeric values clamp to the extreme
    bins, unseen categories and missing values map to the missing bin.
    """
    if set(data.feature_names) != set(schema.names):
        extra = set(data.feature_names) - set(schema.names)
        if extra:
            raise DataError(f"features absent from schema: {sorted(extra)}")
        raise DataError(f"schema features absent from data: {sorted(set(schema.names) - set(data.feature_names))}")
    t = data.n_rows
    codes = np.zeros((t, schema.n_features), dtype=np.int32)
    for j, spec in enumerate(schema.specs):
        col = data.columns[spec.name]
        if spec.kind == NUMERIC:
            if data.kind_of(spec.name) != NUMERIC:
                raise DataError(f"feature {spec.name!r} kind differs between data and schema")
            missing = np.isnan(col)
            c = np.searchsorted(np.asarray(spec.edges), col, side="right")
            c[missing] = spec.missing_bin
            codes[:, j] = c
        else:
            lookup = {cat: i for i, cat in enumerate(spec.categories)}
            mb = spec.missing_bin
            codes[:, j] = [mb if v is None else lookup.get(v, mb) for v in col]
    return BinnedMatrix(codes, schema)

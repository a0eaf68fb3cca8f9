"""Paired score-mimic and outcome ensembles over bagged data splits.

The audit trains two model families on identical data splits: a regression
ensemble distilling the (optionally calibrated) score, and a classification
ensemble predicting the ground-truth outcome. Sharing splits and model class
makes their shape functions directly comparable bin by bin.

Splits follow a two-level bagging layout: K outer folds each draw a test
subset (15% of rows), and within each outer fold L inner bags repartition
the remaining rows into training (70%) and early-stopping validation (15%).
The K x L grid of models per family feeds the variance estimates in
:mod:`distillaudit.compare`; outer test rows feed fidelity metrics and the
held-out error pairs in :mod:`distillaudit.missing`.

Rows without an outcome label still train the mimic models; outcome models
see only labeled rows.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .calibrate import CalibrationMap
from .data import AuditDataset, BinnedMatrix, FeatureSchema, bin_dataset, fit_schema
from .errors import ConfigError, DataError, DegenerateStatisticsError, TrainingError
from .gam import (
    IDENTITY,
    LOGISTIC,
    AdditiveModel,
    TrainConfig,
    fit_interactions,
    rank_interaction_pairs,
    train_classifier,
    train_regressor,
)
from .stats import auc, rmse

TEST_FRACTION = 0.15
VALID_FRACTION = 0.15
MIN_ROWS = 20


@dataclass(frozen=True, eq=False)
class BagPlan:
    """Row indices for every (outer, inner) bag, fixed by (n_rows, K, L, seed)."""

    n_rows: int
    K: int
    L: int
    seed: int
    test: tuple[np.ndarray, ...]
    train: tuple[tuple[np.ndarray, ...], ...]
    valid: tuple[tuple[np.ndarray, ...], ...]

    def to_json_dict(self) -> dict:
        return {
            "format_version": 1,
            "n_rows": self.n_rows,
            "K": self.K,
            "L": self.L,
            "seed": self.seed,
            "test": [list(map(int, t)) for t in self.test],
            "train": [[list(map(int, b)) for b in fold] for fold in self.train],
            "valid": [[list(map(int, b)) for b in fold] for fold in self.valid],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "BagPlan":
        return cls(
            int(d["n_rows"]),
            int(d["K"]),
            int(d["L"]),
            int(d["seed"]),
            tuple(np.asarray(t, int) for t in d["test"]),
            tuple(tuple(np.asarray(b, int) for b in fold) for fold in d["train"]),
            tuple(tuple(np.asarray(b, int) for b in fold) for fold in d["valid"]),
        )

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "BagPlan":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


def plan_bags(n_rows: int, K: int = 5, L: int = 5, seed: int = 0) -> BagPlan:
    """Draw the K x L bag layout: 15% test per outer fold, then 70/15
    train/validation per inner bag from the remainder.

    Outer test sets are drawn independently per fold (they may overlap
    across folds; within a fold, test, train, and validation are disjoint).
    All index arrays come back sorted.
    """
    if K < 2 or L < 2:
        raise ConfigError("K and L must both be at least 2")
    if n_rows < MIN_ROWS:
        raise DataError(f"need at least {MIN_ROWS} rows to split into bags, got {n_rows}")
    n_test = round(TEST_FRACTION * n_rows)
    n_valid = round(VALID_FRACTION * n_rows)
    n_train = n_rows - n_test - n_valid
    if n_test < 1 or n_valid < 1 or n_train < 1:
        raise DataError("bag fractions leave an empty split")
    rng = np.random.default_rng(seed)
    tests = []
    trains = []
    valids = []
    for _ in range(K):
        test = np.sort(rng.choice(n_rows, size=n_test, replace=False))
        rest = np.setdiff1d(np.arange(n_rows), test, assume_unique=True)
        fold_train = []
        fold_valid = []
        for _ in range(L):
            perm = rng.permutation(len(rest))
            fold_valid.append(np.sort(rest[perm[:n_valid]]))
            fold_train.append(np.sort(rest[perm[n_valid:]]))
        tests.append(test)
        trains.append(tuple(fold_train))
        valids.append(tuple(fold_valid))
    return BagPlan(n_rows, K, L, seed, tuple(tests), tuple(trains), tuple(valids))


@dataclass
class BagEnsemble:
    """K x L grid of additive models sharing one link and schema."""

    models: list[list[AdditiveModel]]
    link: str
    schema: FeatureSchema

    @property
    def K(self) -> int:
        return len(self.models)

    @property
    def L(self) -> int:
        return len(self.models[0])

    def shape_tensor(self, feature: int) -> np.ndarray:
        """Shape values of every model for one feature, shaped (K, L, bins)."""
        return np.stack([[m.shapes[feature] for m in fold] for fold in self.models])

    def surface_tensor(self, i: int, j: int) -> np.ndarray:
        """Grid values of every model for one fitted pair, shaped (K, L, bi, bj)."""
        out = []
        for fold in self.models:
            row = []
            for m in fold:
                grids = {(s.i, s.j): s.values for s in m.surfaces}
                if (i, j) not in grids:
                    raise DataError(f"pair ({i}, {j}) was not fitted")
                row.append(grids[(i, j)])
            out.append(row)
        return np.stack(out)

    def predict_fold(self, k: int, X: BinnedMatrix) -> np.ndarray:
        """Average prediction of outer fold k's inner models."""
        preds = np.stack([m.predict(X) for m in self.models[k]])
        return preds.mean(axis=0)


@dataclass
class PairedEnsembles:
    """The two ensembles of one audit run plus everything they share."""

    mimic: BagEnsemble
    outcome: BagEnsemble
    plan: BagPlan
    schema: FeatureSchema
    calibration: CalibrationMap | None
    bin_mass: list[np.ndarray]
    meta: dict = field(default_factory=dict)

    def save_models(self, directory: str | Path) -> None:
        """Write every model, the bag plan, and the schema as JSON files."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        self.plan.save(directory / "plan.json")
        self.schema.save(directory / "schema.json")
        for name, ens in (("mimic", self.mimic), ("outcome", self.outcome)):
            for k, fold in enumerate(ens.models):
                for l, model in enumerate(fold):
                    model.save(directory / f"{name}_k{k}_l{l}.json")


def _bag_rows(plan: BagPlan, k: int, l: int) -> tuple[np.ndarray, np.ndarray]:
    """Rows of bag (k, l) as (all rows, local validation indices)."""
    train = plan.train[k][l]
    valid = plan.valid[k][l]
    rows = np.concatenate([train, valid])
    local_valid = np.arange(len(train), len(rows))
    return rows, local_valid


def _train_one(args) -> AdditiveModel:
    link, X, y, config, local_valid = args
    if link == IDENTITY:
        return train_regressor(X, y, config, validation=local_valid)
    return train_classifier(X, y, config, validation=local_valid)


def _mimic_task(X, mimic_targets, plan, k, l, config):
    rows, local_valid = _bag_rows(plan, k, l)
    return (IDENTITY, X.take(rows), mimic_targets[rows], config, local_valid)


def _outcome_task(X, outcome, labeled, plan, k, l, config):
    train = plan.train[k][l]
    valid = plan.valid[k][l]
    tr = train[labeled[train]]
    va = valid[labeled[valid]]
    if len(tr) == 0 or len(va) == 0:
        raise TrainingError(f"bag ({k}, {l}) has no labeled rows in its train or validation split")
    rows = np.concatenate([tr, va])
    local_valid = np.arange(len(tr), len(rows))
    return (LOGISTIC, X.take(rows), outcome[rows], config, local_valid)


def train_paired(
    data: AuditDataset,
    calibration: CalibrationMap | None = None,
    plan: BagPlan | None = None,
    config: TrainConfig | None = None,
    schema: FeatureSchema | None = None,
    jobs: int = 1,
) -> PairedEnsembles:
    """Train the mimic ensemble on (calibrated) scores and the outcome
    ensemble on labels, over identical bag splits.

    Mimic targets are the raw scores, or their calibrated log odds when a
    calibration map is given. ``config.n_pairs`` > 0 adds pairwise grids via
    :func:`with_interactions` after the main fits.
    """
    config = config or TrainConfig()
    plan = plan or plan_bags(data.n_rows, seed=config.seed)
    if plan.n_rows != data.n_rows:
        raise DataError("bag plan was made for a different number of rows")
    schema = schema or fit_schema(data)
    X = bin_dataset(data, schema)
    mimic_targets = calibration.apply(data.score) if calibration else data.score.copy()
    labeled = data.has_outcome
    if not labeled.any():
        raise DataError("no labeled rows; the outcome ensemble cannot be trained")

    tasks = []
    for k in range(plan.K):
        for l in range(plan.L):
            tasks.append(_mimic_task(X, mimic_targets, plan, k, l, config))
    for k in range(plan.K):
        for l in range(plan.L):
            tasks.append(_outcome_task(X, data.outcome, labeled, plan, k, l, config))

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_train_one, tasks, chunksize=1))
    else:
        results = [_train_one(t) for t in tasks]

    n = plan.K * plan.L
    mimic_models = [results[k * plan.L : (k + 1) * plan.L] for k in range(plan.K)]
    outcome_models = [results[n + k * plan.L : n + (k + 1) * plan.L] for k in range(plan.K)]
    mass = [X.bin_mass(j) for j in range(schema.n_features)]
    meta = {
        "calibrated": calibration is not None,
        "n_rows": data.n_rows,
        "n_score_only": data.n_score_only,
        "config": {f: getattr(config, f) for f in TrainConfig.__dataclass_fields__},
    }
    return PairedEnsembles(
        BagEnsemble(mimic_models, IDENTITY, schema),
        BagEnsemble(outcome_models, LOGISTIC, schema),
        plan,
        schema,
        calibration,
        mass,
        meta,
    )


def _interaction_task(model, X, y, plan, k, l, config, pairs, labeled=None):
    if labeled is None:
        rows, local_valid = _bag_rows(plan, k, l)
    else:
        train = plan.train[k][l]
        valid = plan.valid[k][l]
        tr = train[labeled[train]]
        va = valid[labeled[valid]]
        rows = np.concatenate([tr, va])
        local_valid = np.arange(len(tr), len(rows))
    return (model, X.take(rows), y[rows], config, local_valid, pairs)


def _fit_interactions_one(args) -> AdditiveModel:
    model, X, y, config, local_valid, pairs = args
    return fit_interactions(model, X, y, len(pairs), config, validation=local_valid, pairs=pairs)


def with_interactions(
    paired: PairedEnsembles,
    data: AuditDataset,
    n_pairs: int,
    config: TrainConfig | None = None,
    jobs: int = 1,
) -> PairedEnsembles:
    """Extend every model of both ensembles with the same top feature pairs.

    Pairs are screened once, on the first bag's mimic model residuals over
    its training rows, and reused everywhere so that all models remain
    comparable surface by surface.
    """
    if n_pairs == 0:
        return paired
    config = config or TrainConfig()
    plan = paired.plan
    X = bin_dataset(data, paired.schema)
    mimic_targets = paired.calibration.apply(data.score) if paired.calibration else data.score.copy()
    labeled = data.has_outcome

    p = paired.schema.n_features
    if n_pairs > p * (p - 1) // 2:
        raise ConfigError(f"n_pairs={n_pairs} exceeds the {p * (p - 1) // 2} available pairs")
    rows00, _ = _bag_rows(plan, 0, 0)
    ranked = rank_interaction_pairs(paired.mimic.models[0][0], X, mimic_targets, rows=rows00)
    pairs = [(ps.i, ps.j) for ps in ranked[:n_pairs]]

    tasks = []
    for k in range(plan.K):
        for l in range(plan.L):
            tasks.append(
                _interaction_task(paired.mimic.models[k][l], X, mimic_targets, plan, k, l, config, pairs)
            )
    for k in range(plan.K):
        for l in range(plan.L):
            tasks.append(
                _interaction_task(
                    paired.outcome.models[k][l], X, data.outcome, plan, k, l, config, pairs, labeled
                )
            )

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_fit_interactions_one, tasks, chunksize=1))
    else:
        results = [_fit_interactions_one(t) for t in tasks]

    n = plan.K * plan.L
    mimic_models = [results[k * plan.L : (k + 1) * plan.L] for k in range(plan.K)]
    outcome_models = [results[n + k * plan.L : n + (k + 1) * plan.L] for k in range(plan.K)]
    meta = dict(paired.meta)
    meta["interaction_pairs"] = [
        {"i": i, "j": j, "names": [paired.schema.names[i], paired.schema.names[j]]} for i, j in pairs
    ]
    return PairedEnsembles(
        BagEnsemble(mimic_models, IDENTITY, paired.schema),
        BagEnsemble(outcome_models, LOGISTIC, paired.schema),
        plan,
        paired.schema,
        paired.calibration,
        paired.bin_mass,
        meta,
    )


@dataclass
class FidelityMetrics:
    """Held-out agreement of a model family with what it was trained on."""

    name: str
    score_rmse_mean: float
    score_rmse_std: float
    score_rmse_folds: list[float]
    outcome_auc_mean: float | None
    outcome_auc_std: float | None
    outcome_auc_folds: list[float]
    n_auc_folds_skipped: int

    def to_json_dict(self) -> dict:
        return {
            "model": self.name,
            "score_rmse": {
                "mean": self.score_rmse_mean,
                "std": self.score_rmse_std,
                "folds": self.score_rmse_folds,
            },
            "outcome_auc": {
                "mean": self.outcome_auc_mean,
                "std": self.outcome_auc_std,
                "folds": self.outcome_auc_folds,
                "skipped_folds": self.n_auc_folds_skipped,
            },
        }


def _spread(values: list[float]) -> tuple[float, float]:
    if not values:
        return float("nan"), float("nan")
    if len(values) == 1:
        return values[0], 0.0
    return float(np.mean(values)), float(np.std(values, ddof=1))


def fold_fidelity(
    name: str,
    data: AuditDataset,
    plan: BagPlan,
    predict_score_fold,
    predict_prob_fold,
    calibration: CalibrationMap | None,
) -> FidelityMetrics:
    """Evaluate per-fold test RMSE against raw scores and AUC against outcomes.

    ``predict_score_fold(k, rows)`` returns score-scale predictions for the
    given row indices (on the calibrated log-odds scale when a calibration
    map is in use; they are mapped back before the RMSE).
    ``predict_prob_fold(k, rows)`` returns outcome probabilities. Folds whose
    labeled test rows hold a single class are skipped for AUC and counted.
    """
    rmses = []
    aucs = []
    skipped = 0
    labeled = data.has_outcome
    for k, test in enumerate(plan.test):
        pred = predict_score_fold(k, test)
        if calibration is not None:
            pred = calibration.inverse(pred)
        rmses.append(rmse(pred, data.score[test]))
        lab = test[labeled[test]]
        if len(lab) == 0:
            skipped += 1
            continue
        prob = predict_prob_fold(k, lab)
        try:
            aucs.append(auc(data.outcome[lab], prob))
        except DegenerateStatisticsError:
            skipped += 1
    rmse_mean, rmse_std = _spread(rmses)
    auc_mean, auc_std = _spread(aucs) if aucs else (None, None)
    return FidelityMetrics(name, rmse_mean, rmse_std, rmses, auc_mean, auc_std, aucs, skipped)


def fidelity(paired: PairedEnsembles, data: AuditDataset, name: str = "additive") -> FidelityMetrics:
    """Held-out fidelity of the paired ensembles on their outer test folds."""
    X = bin_dataset(data, paired.schema)
    return fold_fidelity(
        name,
        data,
        paired.plan,
        lambda k, rows: paired.mimic.predict_fold(k, X.take(rows)),
        lambda k, rows: paired.outcome.predict_fold(k, X.take(rows)),
        paired.calibration,
    )

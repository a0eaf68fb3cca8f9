"""Additive models fitted by cyclic gradient boosting of shallow trees.

A model is an intercept plus one lookup table per feature (the shape
function, one value per bin) plus optional lookup grids for selected
feature pairs. Training cycles through the features; each visit fits a
depth-limited tree (at most ``leaves`` leaf segments of contiguous bins)
to the current gradient and adds ``learning_rate`` times its leaf values
into the shape. Squared error drives the regression fit; Bernoulli
log-likelihood with Newton leaf steps drives the classification fit.

After boosting every shape is mean-centered over the training bin masses
and the removed means are folded into the intercept, so shape values read
as signed deviations from the average prediction.

Trees, leaf values, and tie-breaks are deterministic: candidate cuts are
scanned in ascending bin order and only a strictly larger gain replaces
the incumbent, so the lowest boundary wins ties.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import BinnedMatrix, FeatureSchema
from .errors import ConfigError, DataError, TrainingError
from .stats import mean_nll, sigmoid

IDENTITY = "identity"
LOGISTIC = "logistic"

_MIN_GAIN = 1e-12
_MIN_HESSIAN = 1e-12
_NEWTON_CLIP = 10.0


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for boosted additive model training.

    ``split_significance`` is an entry gate on tree growth: a feature (or
    interaction pair) with an all-zero contribution receives its first update
    only once a split's gain exceeds this multiple of the current noise scale
    (residual variance for squared error, the Newton-gain analog for log
    loss). Under the null a candidate split's gain is roughly chi-square(1)
    on that scale, so the default of 40 rejects gains indistinguishable from
    noise while real structure, whose gain grows with the row count, enters
    in the first pass. Features the audited score never looks at therefore
    keep exactly zero shapes instead of accumulating per-bin noise that
    confidence bands built from largely shared rows cannot price in. Once a
    feature is in the model, refinement is ungated and converges as usual.
    Set 0 to disable.
    """

    learning_rate: float = 0.01
    max_rounds: int = 5000
    leaves: int = 3
    patience: int = 50
    n_pairs: int = 0
    seed: int = 0
    min_improvement: float = 0.0
    split_significance: float = 40.0

    def __post_init__(self) -> None:
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigError("learning_rate must be in (0, 1]")
        if self.max_rounds < 1:
            raise ConfigError("max_rounds must be at least 1")
        if self.leaves < 2:
            raise ConfigError("leaves must be at least 2")
        if self.patience < 1:
            raise ConfigError("patience must be at least 1")
        if self.n_pairs < 0:
            raise ConfigError("n_pairs must be non-negative")
        if self.min_improvement < 0.0:
            raise ConfigError("min_improvement must be non-negative")
        if self.split_significance < 0.0:
            raise ConfigError("split_significance must be non-negative")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown training config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class InteractionSurface:
    """Pairwise contribution grid: values[b_i, b_j] adds to the prediction."""

    i: int
    j: int
    names: tuple[str, str]
    values: np.ndarray


@dataclass
class AdditiveModel:
    """Intercept + per-feature shape lookups + optional pairwise grids."""

    intercept: float
    link: str
    schema: FeatureSchema
    shapes: list[np.ndarray]
    surfaces: list[InteractionSurface] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.link not in (IDENTITY, LOGISTIC):
            raise ConfigError(f"unknown link {self.link!r}")
        if len(self.shapes) != self.schema.n_features:
            raise DataError("one shape per schema feature required")
        for j, h in enumerate(self.shapes):
            if len(h) != self.schema.n_bins(j):
                raise DataError(f"shape {j} has wrong number of bins")

    def decision(self, X: BinnedMatrix) -> np.ndarray:
        """Additive score before the link: intercept + shape and grid lookups."""
        out = np.full(X.n_rows, self.intercept)
        for j, h in enumerate(self.shapes):
            out += h[X.column(j)]
        for s in self.surfaces:
            out += s.values[X.column(s.i), X.column(s.j)]
        return out

    def predict(self, X: BinnedMatrix) -> np.ndarray:
        z = self.decision(X)
        return sigmoid(z) if self.link == LOGISTIC else z

    def contribution(self, name: str) -> np.ndarray:
        """Copy of the shape values for one feature, missing bin last."""
        return self.shapes[self.schema.index(name)].copy()

    def to_json_dict(self) -> dict:
        return {
            "format_version": 1,
            "link": self.link,
            "intercept": self.intercept,
            "schema": self.schema.to_json_dict(),
            "shapes": {name: list(map(float, h)) for name, h in zip(self.schema.names, self.shapes)},
            "surfaces": [
                {
                    "i": s.i,
                    "j": s.j,
                    "names": list(s.names),
                    "values": [list(map(float, row)) for row in s.values],
                }
                for s in self.surfaces
            ],
            "metadata": self.metadata,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "AdditiveModel":
        schema = FeatureSchema.from_json_dict(d["schema"])
        shapes = [np.asarray(d["shapes"][name], float) for name in schema.names]
        surfaces = [
            InteractionSurface(s["i"], s["j"], tuple(s["names"]), np.asarray(s["values"], float))
            for s in d["surfaces"]
        ]
        return cls(float(d["intercept"]), d["link"], schema, shapes, surfaces, dict(d["metadata"]))

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "AdditiveModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


def _split_segment(sum_g: np.ndarray, denom: np.ndarray, lo: int, hi: int):
    """Best single cut of bins [lo, hi): returns (gain, cut) or None.

    Gain is the squared-error reduction S_l^2/D_l + S_r^2/D_r - S^2/D. Cuts
    leaving an empty side are invalid; ties resolve to the lowest cut.
    """
    g = sum_g[lo:hi]
    d = denom[lo:hi]
    if len(g) < 2:
        return None
    cg = np.cumsum(g)
    cd = np.cumsum(d)
    total_g = cg[-1]
    total_d = cd[-1]
    if total_d <= _MIN_HESSIAN:
        return None
    gl, dl = cg[:-1], cd[:-1]
    gr, dr = total_g - gl, total_d - dl
    valid = (dl > _MIN_HESSIAN) & (dr > _MIN_HESSIAN)
    if not valid.any():
        return None
    gains = np.where(
        valid,
        gl**2 / np.maximum(dl, _MIN_HESSIAN) + gr**2 / np.maximum(dr, _MIN_HESSIAN) - total_g**2 / total_d,
        -np.inf,
    )
    t = int(np.argmax(gains))
    return float(gains[t]), lo + t + 1


def _best_tree(
    sum_g: np.ndarray, denom: np.ndarray, max_leaves: int, min_gain: float = _MIN_GAIN
) -> list[int]:
    """Greedy partition of the bin axis into at most max_leaves segments.

    Returns segment boundaries [0, c_1, ..., B]; a result of [0, B] means no
    worthwhile split exists. Every accepted split must gain more than
    ``min_gain``.
    """
    bounds = [0, len(sum_g)]
    for _ in range(max_leaves - 1):
        best = None
        best_at = 0
        for si, (lo, hi) in enumerate(zip(bounds[:-1], bounds[1:])):
            cand = _split_segment(sum_g, denom, lo, hi)
            if cand is not None and (best is None or cand[0] > best[0]):
                best = cand
                best_at = si
        if best is None or best[0] <= min_gain:
            break
        bounds.insert(best_at + 1, best[1])
    return bounds


def _leaf_values(sum_g: np.ndarray, denom: np.ndarray, bounds: list[int], clip: float | None) -> np.ndarray:
    vals = np.zeros(len(sum_g))
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        d = denom[lo:hi].sum()
        if d > _MIN_HESSIAN:
            vals[lo:hi] = sum_g[lo:hi].sum() / d
    if clip is not None:
        np.clip(vals, -clip, clip, out=vals)
    return vals


def _split_rows(n_rows: int, validation) -> tuple[np.ndarray, np.ndarray | None]:
    all_rows = np.arange(n_rows)
    if validation is None:
        return all_rows, None
    valid_rows = np.asarray(validation, dtype=int)
    if len(valid_rows) and (valid_rows.min() < 0 or valid_rows.max() >= n_rows):
        raise DataError("validation row indices out of range")
    if len(np.unique(valid_rows)) != len(valid_rows):
        raise DataError("validation row indices repeat")
    mask = np.ones(n_rows, dtype=bool)
    mask[valid_rows] = False
    train_rows = all_rows[mask]
    if len(train_rows) == 0:
        raise TrainingError("validation rows cover the whole dataset; nothing left to train on")
    return train_rows, valid_rows


def _center_shapes(shapes: list[np.ndarray], counts: list[np.ndarray]) -> float:
    """Mean-center each shape over training bin masses; return intercept shift."""
    shift = 0.0
    for h, c in zip(shapes, counts):
        mass = c / c.sum()
        mu = float(mass @ h)
        h -= mu
        shift += mu
    return shift


def _train(X: BinnedMatrix, targets, config: TrainConfig, validation, link: str) -> AdditiveModel:
    y = np.asarray(targets, dtype=float)
    if len(y) != X.n_rows:
        raise DataError("targets length does not match the binned matrix")
    if not np.all(np.isfinite(y)):
        raise DataError("targets contain non-finite values")
    train_rows, valid_rows = _split_rows(X.n_rows, validation)

    schema = X.schema
    p = schema.n_features
    Xt = X.codes[train_rows]
    yt = y[train_rows]
    counts = [
        np.bincount(Xt[:, j], minlength=schema.n_bins(j)).astype(float) for j in range(p)
    ]
    shapes = [np.zeros(schema.n_bins(j)) for j in range(p)]
    metadata: dict = {"link": link, "n_train": len(train_rows)}

    logistic = link == LOGISTIC
    if logistic:
        if not np.all(np.isin(yt, (0.0, 1.0))):
            raise DataError("classification targets must be 0 or 1")
        base = float(yt.mean())
        if base in (0.0, 1.0):
            raise TrainingError("classification targets contain a single class")
        intercept = float(np.log(base / (1.0 - base)))
        F_train = np.full(len(yt), intercept)
    else:
        intercept = float(yt.mean())
        if np.ptp(yt) == 0.0:
            metadata["constant_target"] = True
            return AdditiveModel(intercept, link, schema, shapes, [], metadata)
        residual = yt - intercept

    if valid_rows is not None:
        Xv = X.codes[valid_rows]
        yv = y[valid_rows]
        if logistic and not np.all(np.isin(yv, (0.0, 1.0))):
            raise DataError("classification targets must be 0 or 1")
        F_valid = np.full(len(yv), intercept)

    train_trace: list[float] = []
    valid_trace: list[float] = []
    best_loss = np.inf
    best_shapes = None
    best_round = 0
    stale = 0
    rounds_run = 0

    active = [False] * p
    for rnd in range(config.max_rounds):
        rounds_run = rnd + 1
        for j in range(p):
            codes_j = Xt[:, j]
            nb = schema.n_bins(j)
            if logistic:
                prob = sigmoid(F_train)
                grad = yt - prob
                hess = prob * (1.0 - prob)
                sum_g = np.bincount(codes_j, weights=grad, minlength=nb)
                denom = np.bincount(codes_j, weights=hess, minlength=nb)
                clip = _NEWTON_CLIP
                noise_scale = float(grad @ grad) / max(float(hess.sum()), _MIN_HESSIAN)
            else:
                sum_g = np.bincount(codes_j, weights=residual, minlength=nb)
                denom = counts[j]
                clip = None
                noise_scale = float(residual @ residual) / len(residual)
            if active[j]:
                min_gain = _MIN_GAIN
            else:
                min_gain = max(_MIN_GAIN, config.split_significance * noise_scale)
            bounds = _best_tree(sum_g, denom, config.leaves, min_gain)
            if len(bounds) == 2:
                continue
            active[j] = True
            vals = _leaf_values(sum_g, denom, bounds, clip) * config.learning_rate
            shapes[j] += vals
            step = vals[codes_j]
            if logistic:
                F_train += step
            else:
                residual -= step
            if valid_rows is not None:
                F_valid += vals[Xv[:, j]]

        if logistic:
            train_trace.append(mean_nll(yt, F_train))
        else:
            train_trace.append(float(np.mean(residual**2)))
        if valid_rows is None:
            continue
        loss = mean_nll(yv, F_valid) if logistic else float(np.mean((yv - F_valid) ** 2))
        valid_trace.append(loss)
        if loss < best_loss - config.min_improvement:
            best_loss = loss
            best_shapes = [h.copy() for h in shapes]
            best_round = rnd + 1
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break

    if valid_rows is not None and best_shapes is not None:
        shapes = best_shapes
        metadata["best_round"] = best_round
        metadata["valid_loss"] = best_loss
        metadata["valid_loss_trace"] = valid_trace
    metadata["rounds_run"] = rounds_run
    metadata["stopped_early"] = valid_rows is not None and rounds_run < config.max_rounds
    metadata["train_loss_trace"] = train_trace

    intercept += _center_shapes(shapes, counts)
    return AdditiveModel(intercept, link, schema, shapes, [], metadata)


def train_regressor(
    X: BinnedMatrix, targets, config: TrainConfig | None = None, validation=None
) -> AdditiveModel:
    """Boosted additive regression (identity link, squared error).

    ``validation`` is an optional array of row indices held out for early
    stopping; the remaining rows train the model. Without it the fit runs
    for the full ``max_rounds``.
    """
    return _train(X, targets, config or TrainConfig(), validation, IDENTITY)


def train_classifier(
    X: BinnedMatrix, targets, config: TrainConfig | None = None, validation=None
) -> AdditiveModel:
    """Boosted additive classification (logistic link, Bernoulli likelihood).

    Targets must be 0/1. Each tree fits the gradient of the log-likelihood
    (observed minus predicted probability) with Newton leaf steps.
    """
    return _train(X, targets, config or TrainConfig(), validation, LOGISTIC)


@dataclass(frozen=True)
class PairScore:
    """Interaction screening result for one feature pair."""

    i: int
    j: int
    gain: float


def _coarse_codes(X: BinnedMatrix, rows: np.ndarray, max_cells: int = 16) -> tuple[list[np.ndarray], list[int]]:
    codes = []
    sizes = []
    for j in range(X.schema.n_features):
        nb = X.schema.n_bins(j)
        col = X.codes[rows, j].astype(np.int64)
        if nb > max_cells:
            col = (col * max_cells) // nb
            nb = max_cells
        codes.append(col)
        sizes.append(nb)
    return codes, sizes


def rank_interaction_pairs(
    model: AdditiveModel, X: BinnedMatrix, targets, rows=None
) -> list[PairScore]:
    """Rank all feature pairs by residual structure on a coarse joint grid.

    For each pair, bins are coarsened to at most 16 cells per axis and the
    gain is the explained sum of squares of the per-cell mean model on the
    residuals of ``model``. Sorted descending; ties break on (i, j).
    """
    rows = np.arange(X.n_rows) if rows is None else np.asarray(rows, int)
    sub = X.take(rows)
    resid = np.asarray(targets, float)[rows] - model.predict(sub)
    codes, sizes = _coarse_codes(X, rows)
    total = float(resid.sum())
    n_total = len(rows)
    scores = []
    p = X.schema.n_features
    for i in range(p):
        for j in range(i + 1, p):
            cell = codes[i] * sizes[j] + codes[j]
            n_cells = sizes[i] * sizes[j]
            n = np.bincount(cell, minlength=n_cells)
            s = np.bincount(cell, weights=resid, minlength=n_cells)
            nz = n > 0
            gain = float(np.sum(s[nz] ** 2 / n[nz]) - total**2 / n_total)
            scores.append(PairScore(i, j, gain))
    return sorted(scores, key=lambda ps: (-ps.gain, ps.i, ps.j))


def _split_rect(SG: np.ndarray, DN: np.ndarray, rect, axis: int):
    r0, r1, c0, c1 = rect
    if axis == 0:
        g = SG[r0:r1, c0:c1].sum(axis=1)
        d = DN[r0:r1, c0:c1].sum(axis=1)
        off = r0
    else:
        g = SG[r0:r1, c0:c1].sum(axis=0)
        d = DN[r0:r1, c0:c1].sum(axis=0)
        off = c0
    cand = _split_segment(g, d, 0, len(g))
    if cand is None:
        return None
    return cand[0], off + cand[1]


def _best_rect_tree(
    SG: np.ndarray, DN: np.ndarray, max_leaves: int, min_gain: float = _MIN_GAIN
) -> list[tuple[int, int, int, int]]:
    """Greedy axis-aligned rectangle partition of the joint bin grid."""
    rects = [(0, SG.shape[0], 0, SG.shape[1])]
    for _ in range(max_leaves - 1):
        best = None
        for ri, rect in enumerate(rects):
            for axis in (0, 1):
                cand = _split_rect(SG, DN, rect, axis)
                if cand is not None and (best is None or cand[0] > best[0]):
                    best = (cand[0], ri, axis, cand[1])
        if best is None or best[0] <= min_gain:
            break
        _, ri, axis, cut = best
        r0, r1, c0, c1 = rects[ri]
        if axis == 0:
            children = [(r0, cut, c0, c1), (cut, r1, c0, c1)]
        else:
            children = [(r0, r1, c0, cut), (r0, r1, cut, c1)]
        rects[ri : ri + 1] = children
    return rects


def _rect_tree_gain(SG: np.ndarray, DN: np.ndarray, rects) -> float:
    """Squared-error reduction of a rectangle partition over the root fit."""
    total_g = float(SG.sum())
    total_d = float(DN.sum())
    if total_d <= _MIN_HESSIAN:
        return 0.0
    gain = -(total_g**2) / total_d
    for r0, r1, c0, c1 in rects:
        d = float(DN[r0:r1, c0:c1].sum())
        if d > _MIN_HESSIAN:
            gain += float(SG[r0:r1, c0:c1].sum()) ** 2 / d
    return gain


def fit_interactions(
    model: AdditiveModel,
    X: BinnedMatrix,
    targets,
    n_pairs: int,
    config: TrainConfig | None = None,
    validation=None,
    pairs: list[tuple[int, int]] | None = None,
) -> AdditiveModel:
    """Add boosted pairwise grids for the top-ranked feature pairs.

    Shapes stay frozen; only the pair grids are boosted, against the same
    loss the model was trained with. Returns a new model; the input model is
    untouched. Pass ``pairs`` to skip screening and fit exactly those pairs.
    """
    config = config or TrainConfig()
    p = model.schema.n_features
    max_pairs = p * (p - 1) // 2
    if pairs is None:
        if n_pairs == 0:
            return model
        if n_pairs > max_pairs:
            raise ConfigError(f"n_pairs={n_pairs} exceeds the {max_pairs} available pairs")
    y = np.asarray(targets, dtype=float)
    if len(y) != X.n_rows:
        raise DataError("targets length does not match the binned matrix")
    train_rows, valid_rows = _split_rows(X.n_rows, validation)

    if pairs is None:
        ranked = rank_interaction_pairs(model, X, y, rows=train_rows)
        pairs = [(ps.i, ps.j) for ps in ranked[:n_pairs]]
    else:
        pairs = [(int(i), int(j)) for i, j in pairs]
        for i, j in pairs:
            if not 0 <= i < j < p:
                raise ConfigError(f"bad feature pair ({i}, {j})")
    if not pairs:
        return model

    schema = model.schema
    logistic = model.link == LOGISTIC
    yt = y[train_rows]
    Xt = X.take(train_rows)
    F_train = model.decision(Xt)
    if not logistic:
        residual = yt - F_train

    grids = {}
    cells_train = {}
    cell_counts = {}
    for i, j in pairs:
        bi, bj = schema.n_bins(i), schema.n_bins(j)
        grids[(i, j)] = np.zeros((bi, bj))
        cell = Xt.column(i).astype(np.int64) * bj + Xt.column(j)
        cells_train[(i, j)] = cell
        cell_counts[(i, j)] = np.bincount(cell, minlength=bi * bj).astype(float).reshape(bi, bj)

    if valid_rows is not None:
        yv = y[valid_rows]
        Xv = X.take(valid_rows)
        F_valid = model.decision(Xv)
        cells_valid = {
            (i, j): Xv.column(i).astype(np.int64) * schema.n_bins(j) + Xv.column(j) for i, j in pairs
        }

    valid_trace: list[float] = []
    best_loss = np.inf
    best_grids = None
    best_round = 0
    stale = 0
    rounds_run = 0

    active_pairs = {pair: False for pair in pairs}
    for rnd in range(config.max_rounds):
        rounds_run = rnd + 1
        for i, j in pairs:
            bi, bj = schema.n_bins(i), schema.n_bins(j)
            cell = cells_train[(i, j)]
            if logistic:
                prob = sigmoid(F_train)
                grad = yt - prob
                hess = prob * (1.0 - prob)
                SG = np.bincount(cell, weights=grad, minlength=bi * bj).reshape(bi, bj)
                DN = np.bincount(cell, weights=hess, minlength=bi * bj).reshape(bi, bj)
                clip = _NEWTON_CLIP
                noise_scale = float(grad @ grad) / max(float(hess.sum()), _MIN_HESSIAN)
            else:
                SG = np.bincount(cell, weights=residual, minlength=bi * bj).reshape(bi, bj)
                DN = cell_counts[(i, j)]
                clip = None
                noise_scale = float(residual @ residual) / len(residual)
            rects = _best_rect_tree(SG, DN, config.leaves)
            if len(rects) == 1:
                continue
            if not active_pairs[(i, j)]:
                # A pure interaction is flat along each axis, so its first cut
                # gains nothing; entry is judged on the whole tree instead,
                # one chi-square budget per accepted split.
                entry_bar = config.split_significance * noise_scale * (len(rects) - 1)
                if _rect_tree_gain(SG, DN, rects) <= max(_MIN_GAIN, entry_bar):
                    continue
                active_pairs[(i, j)] = True
            V = np.zeros((bi, bj))
            for r0, r1, c0, c1 in rects:
                d = DN[r0:r1, c0:c1].sum()
                if d > _MIN_HESSIAN:
                    v = SG[r0:r1, c0:c1].sum() / d
                    if clip is not None:
                        v = float(np.clip(v, -clip, clip))
                    V[r0:r1, c0:c1] = v
            V *= config.learning_rate
            grids[(i, j)] += V
            step = V.ravel()[cell]
            if logistic:
                F_train += step
            else:
                residual -= step
            if valid_rows is not None:
                F_valid += V.ravel()[cells_valid[(i, j)]]

        if valid_rows is None:
            continue
        loss = mean_nll(yv, F_valid) if logistic else float(np.mean((yv - F_valid) ** 2))
        valid_trace.append(loss)
        if loss < best_loss - config.min_improvement:
            best_loss = loss
            best_grids = {k: v.copy() for k, v in grids.items()}
            best_round = rnd + 1
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break

    if valid_rows is not None and best_grids is not None:
        grids = best_grids

    intercept = model.intercept
    surfaces = []
    for i, j in pairs:
        grid = grids[(i, j)]
        mass = cell_counts[(i, j)]
        mass = mass / mass.sum()
        mu = float(np.sum(mass * grid))
        grid = grid - mu
        intercept += mu
        surfaces.append(InteractionSurface(i, j, (schema.names[i], schema.names[j]), grid))

    metadata = dict(model.metadata)
    metadata["interaction_pairs"] = [[i, j] for i, j in pairs]
    metadata["interaction_rounds_run"] = rounds_run
    if valid_rows is not None:
        metadata["interaction_best_round"] = best_round
        metadata["interaction_valid_loss"] = best_loss
    return AdditiveModel(
        intercept,
        model.link,
        schema,
        [h.copy() for h in model.shapes],
        list(model.surfaces) + surfaces,
        metadata,
    )

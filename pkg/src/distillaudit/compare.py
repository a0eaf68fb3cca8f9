"""Shape comparison with variance estimates from the two-level bag layout.

Every quantity of interest (a shape value, or a mimic-minus-outcome shape
difference) is measured once per (outer, inner) bag, giving a K x L grid of
replicates. Its sampling variance is estimated from the spread of the inner
means across outer folds:

    var_hat = (1/K) * sum_k (mean_l value[k, l] - grand_mean)^2

Pointwise 95% intervals are mean +/- 1.96 * sqrt(var_hat); the estimator
leans conservative (intervals tend to over-cover), so significance calls
from these bands are cautious. A per-bin difference is significant when its
interval excludes zero.

Mimic and outcome shapes live on a common log-odds scale only when the
scores were calibrated; uncalibrated runs still report differences, flagged
as cross-scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distill import BagEnsemble, PairedEnsembles
from .errors import DegenerateStatisticsError

Z_95 = 1.96


def little_bags_variance(values: np.ndarray) -> np.ndarray:
    """Variance estimate from a (K, L, ...) grid of replicated values.

    Mean of squared deviations of the K inner-bag means from the grand mean.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim < 2 or values.shape[0] < 2 or values.shape[1] < 2:
        raise DegenerateStatisticsError("variance estimation needs at least a 2 x 2 bag grid")
    inner = values.mean(axis=1)
    grand = values.mean(axis=(0, 1))
    return np.mean((inner - grand) ** 2, axis=0)


def little_bags_covariance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Covariance analogue of :func:`little_bags_variance` for paired grids."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DegenerateStatisticsError("paired grids must have identical shapes")
    if a.ndim < 2 or a.shape[0] < 2 or a.shape[1] < 2:
        raise DegenerateStatisticsError("covariance estimation needs at least a 2 x 2 bag grid")
    da = a.mean(axis=1) - a.mean(axis=(0, 1))
    db = b.mean(axis=1) - b.mean(axis=(0, 1))
    return np.mean(da * db, axis=0)


@dataclass
class ContributionCurve:
    """Per-bin shape estimate with pointwise 95% bounds."""

    feature: str
    mean: np.ndarray
    variance: np.ndarray
    lower: np.ndarray
    upper: np.ndarray


@dataclass
class DifferenceCurve:
    """Per-bin mimic-minus-outcome shape difference with 95% bounds."""

    feature: str
    mean: np.ndarray
    variance: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    significant: np.ndarray


def curve(ensemble: BagEnsemble, feature: int, name: str | None = None) -> ContributionCurve:
    """Ensemble-mean shape of one feature with little-bags 95% bounds."""
    tensor = ensemble.shape_tensor(feature)
    mean = tensor.mean(axis=(0, 1))
    var = little_bags_variance(tensor)
    half = Z_95 * np.sqrt(var)
    return ContributionCurve(name or ensemble.schema.names[feature], mean, var, mean - half, mean + half)


def difference(paired: PairedEnsembles, feature: int) -> DifferenceCurve:
    """Mimic-minus-outcome shape difference for one feature.

    The variance comes from applying the little-bags formula directly to the
    per-bag differences, which equals Var(mimic) + Var(outcome) minus twice
    their covariance and is non-negative by construction; a floor guards
    against float rounding only.
    """
    diffs = paired.mimic.shape_tensor(feature) - paired.outcome.shape_tensor(feature)
    mean = diffs.mean(axis=(0, 1))
    var = np.maximum(little_bags_variance(diffs), 0.0)
    half = Z_95 * np.sqrt(var)
    lower = mean - half
    upper = mean + half
    significant = (lower > 0.0) | (upper < 0.0)
    return DifferenceCurve(paired.schema.names[feature], mean, var, lower, upper, significant)


@dataclass
class FeatureComparison:
    """Everything the report needs about one feature."""

    feature: str
    kind: str
    bin_labels: list[str]
    bin_mass: np.ndarray
    mimic: ContributionCurve
    outcome: ContributionCurve
    diff: DifferenceCurve
    discrepancy: float


@dataclass
class SurfaceComparison:
    """Grand-mean pairwise grids for one fitted feature pair."""

    i: int
    j: int
    names: tuple[str, str]
    mimic_mean: np.ndarray
    outcome_mean: np.ndarray
    diff_mean: np.ndarray
    diff_variance: np.ndarray


@dataclass
class ComparisonSummary:
    """Per-feature comparisons plus a discrepancy ranking."""

    features: list[FeatureComparison]
    surfaces: list[SurfaceComparison]
    ranking: list[tuple[str, float]]
    calibrated: bool

    def feature_named(self, name: str) -> FeatureComparison:
        for fc in self.features:
            if fc.feature == name:
                return fc
        raise KeyError(name)

    def to_json_dict(self) -> dict:
        feats = []
        for fc in self.features:
            feats.append(
                {
                    "feature": fc.feature,
                    "kind": fc.kind,
                    "bins": fc.bin_labels,
                    "bin_mass": [float(v) for v in fc.bin_mass],
                    "mimic": _curve_json(fc.mimic),
                    "outcome": _curve_json(fc.outcome),
                    "difference": {
                        **_curve_json(fc.diff),
                        "significant": [bool(b) for b in fc.diff.significant],
                    },
                    "discrepancy": fc.discrepancy,
                }
            )
        return {
            "calibrated": self.calibrated,
            "features": feats,
            "surfaces": [
                {
                    "i": sc.i,
                    "j": sc.j,
                    "names": list(sc.names),
                    "mimic_mean": [[float(v) for v in row] for row in sc.mimic_mean],
                    "outcome_mean": [[float(v) for v in row] for row in sc.outcome_mean],
                    "difference_mean": [[float(v) for v in row] for row in sc.diff_mean],
                }
                for sc in self.surfaces
            ],
            "discrepancy_ranking": [{"feature": n, "score": s} for n, s in self.ranking],
        }


def _curve_json(c) -> dict:
    return {
        "mean": [float(v) for v in c.mean],
        "variance": [float(v) for v in c.variance],
        "lower": [float(v) for v in c.lower],
        "upper": [float(v) for v in c.upper],
    }


def discrepancy_score(diff: DifferenceCurve, mass: np.ndarray) -> float:
    """Mass-weighted absolute difference over significant bins only.

    Zero when no bin is significant; grows with both the size of the gap and
    the share of rows sitting in the affected bins.
    """
    sig = diff.significant
    return float(np.sum(mass[sig] * np.abs(diff.mean[sig])))


def summarize(paired: PairedEnsembles) -> ComparisonSummary:
    """Build every curve, difference, and the discrepancy ranking for a run."""
    schema = paired.schema
    features = []
    for j, spec in enumerate(schema.specs):
        mimic_c = curve(paired.mimic, j)
        outcome_c = curve(paired.outcome, j)
        diff_c = difference(paired, j)
        mass = paired.bin_mass[j]
        features.append(
            FeatureComparison(
                feature=spec.name,
                kind=spec.kind,
                bin_labels=spec.bin_labels(),
                bin_mass=mass,
                mimic=mimic_c,
                outcome=outcome_c,
                diff=diff_c,
                discrepancy=discrepancy_score(diff_c, mass),
            )
        )
    surfaces = []
    pairs = paired.meta.get("interaction_pairs", [])
    for entry in pairs:
        i, j = entry["i"], entry["j"]
        mt = paired.mimic.surface_tensor(i, j)
        ot = paired.outcome.surface_tensor(i, j)
        surfaces.append(
            SurfaceComparison(
                i=i,
                j=j,
                names=(schema.names[i], schema.names[j]),
                mimic_mean=mt.mean(axis=(0, 1)),
                outcome_mean=ot.mean(axis=(0, 1)),
                diff_mean=(mt - ot).mean(axis=(0, 1)),
                diff_variance=np.maximum(little_bags_variance(mt - ot), 0.0),
            )
        )
    ranking = sorted(
        ((fc.feature, fc.discrepancy) for fc in features),
        key=lambda t: (-t[1], t[0]),
    )
    return ComparisonSummary(features, surfaces, ranking, bool(paired.meta.get("calibrated")))

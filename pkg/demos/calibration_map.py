"""Straighten a score whose meaning bends halfway up its range.

The kinked generator emits a score whose link to outcome probability has a
sharp slope change, the kind of thing a vendor's post-hoc rescaling leaves
behind. The diagnostic measures how far the score sits from log-odds
linearity; the monotone fit repairs it without assuming any curve shape.
"""

import numpy as np

import distillaudit as da


def main() -> None:
    ds, truth = da.gen_kinked_score(n_rows=6000, seed=0)

    before = da.diagnose(ds.score, ds.outcome)
    print(f"log-odds linearity RMSE before: {before.logit_rmse:.4f}")
    print(f"auto-calibration threshold:     {da.AUTO_LINEARITY_THRESHOLD}")
    decision = da.decide_calibration(before, "auto")
    print(f"decision: applied={decision['applied']} ({decision['reason']})")

    cmap = da.fit_calibration(ds.score, ds.outcome)
    after = da.diagnose(cmap.apply(ds.score), ds.outcome)
    print(f"log-odds linearity RMSE after:  {after.logit_rmse:.4f}")
    print(f"distinct score levels in map:   {len(cmap.breakpoints)}")

    # The map sends raw scores to calibrated log odds; sigmoid turns those
    # into outcome probabilities. Show a few rungs across the range.
    lo, hi = float(ds.score.min()), float(ds.score.max())
    print("\nscore -> log odds -> probability")
    for s in np.linspace(lo, hi, 7):
        z = float(cmap.apply(np.array([s]))[0])
        print(f"{s:8.1f} -> {z:8.4f} -> {1.0 / (1.0 + np.exp(-z)):.4f}")
    print(f"\n(true kink sits at score {truth['kink']:.0f})")


if __name__ == "__main__":
    main()

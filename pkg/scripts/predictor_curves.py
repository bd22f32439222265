"""Accuracy-vs-distance and gated-delivery summaries for a trained model.

    python scripts/predictor_curves.py MODEL [--trials 10000] [--seed 1]
"""
import argparse

import numpy as np

from lqsdwsn.channel import ChannelParams
from lqsdwsn.lqpredict import Model, band_width, crossing
from lqsdwsn.report import predictor_rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("model")
    ap.add_argument("--trials", type=int, default=10000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    params = ChannelParams()
    fig7, fig8 = predictor_rows(Model.load(args.model), params, np.random.default_rng(args.seed), args.trials)
    x = [r[0] for r in fig7]
    acc = [r[2] for r in fig7]
    raw = [r[2] for r in fig8]
    eff = [r[3] for r in fig8]
    i = int(np.argmin(acc))
    print(f"accuracy minimum {acc[i]:.3f} at {x[i]:.2f} r0")
    print(f"raw curve:       50% at {crossing(x, raw, 0.5):.3f} r0, 30-70% band {band_width(x, raw):.3f} r0")
    print(f"gated curve:     50% at {crossing(x, eff, 0.5):.3f} r0, 30-70% band {band_width(x, eff):.3f} r0")


if __name__ == "__main__":
    main()

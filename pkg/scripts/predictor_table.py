"""Held-out metrics of the three model kinds on one regenerated dataset.

    python scripts/predictor_table.py [--seed 1] [--links 1000]
"""
import argparse
import time

import numpy as np

from lqsdwsn.channel import ChannelParams
from lqsdwsn.lqpredict import KINDS, evaluate, generate_dataset, stratified_split, train


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--links", type=int, default=1000)
    args = ap.parse_args()
    data_rng, split_rng, fit_rng = np.random.default_rng(args.seed).spawn(3)
    ds = generate_dataset(ChannelParams(), args.links, 110, 10, data_rng)
    tr, te = stratified_split(ds.y, 0.2, split_rng)
    print(f"{'kind':10s} {'ACC':>7s} {'F1':>7s} {'prec':>7s} {'recall':>7s} {'fit_s':>7s}")
    for kind in KINDS:
        t = time.perf_counter()
        model = train(ds.subset(tr), kind, rng=fit_rng)
        fit = time.perf_counter() - t
        r = evaluate(model, ds.subset(te))
        print(f"{kind:10s} {r.acc:7.4f} {r.f1:7.4f} {r.precision:7.4f} {r.recall:7.4f} {fit:7.2f}")


if __name__ == "__main__":
    main()

"""Command-line entry point.

    lqsdwsn gen-data  --config C --seed S --out DIR
    lqsdwsn train     DATASET --kind logistic --seed S --out DIR
    lqsdwsn simulate  --config C --model M [--no-prediction] --seed S --out DIR
    lqsdwsn sweep     --config C --model M --seed S --jobs J --out DIR
    lqsdwsn report    TRACE_DIR... [--model M] --seed S --out DIR
    lqsdwsn replay    MANIFEST --out DIR

Every command writes ``manifest.txt`` next to its outputs; ``replay`` re-runs
a manifest and compares output digests.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfgmod
from . import experiments as ex
from .engine import run
from .lqpredict import KINDS, evaluate, generate_dataset, read_dataset_csv, stratified_split, train, write_dataset_csv
from .lqpredict.models import Model
from .manifest import FILENAME, Manifest, digest, output_digests
from .report import write_report
from .traces import TraceError, find_runs, read_trace, write_trace

log = logging.getLogger("lqsdwsn")


class CommandError(RuntimeError):
    pass


def _sbool(b: bool) -> str:
    return "true" if b else "false"


def _load_model(path: str) -> Model:
    try:
        return Model.load(path)
    except OSError as e:
        raise CommandError(f"cannot read model {path}: {e}") from None


# -- executors: (cfg, seed, params, inputs, out) -> output names -------------
# Both the subcommands and ``replay`` go through these, so a manifest holds
# exactly what an executor needs.


def exec_gen_data(cfg, seed, params, inputs, out: Path) -> list[str]:
    d = cfg.dataset
    ds = generate_dataset(cfg.channel.params(), d.n_links, d.periods_per_link, d.k, np.random.default_rng(seed))
    write_dataset_csv(ds, out / "dataset.csv")
    print(f"wrote {len(ds)} samples (k={ds.k}) to {out / 'dataset.csv'}")
    return ["dataset.csv"]


def exec_train(cfg, seed, params, inputs, out: Path) -> list[str]:
    ds = read_dataset_csv(inputs["dataset"])
    split_rng, fit_rng = np.random.default_rng(seed).spawn(2)
    tr, te = stratified_split(ds.y, cfg.dataset.test_fraction, split_rng)
    model = train(ds.subset(tr), params["kind"], cfg.model.train_params(), fit_rng)
    rep = evaluate(model, ds.subset(te))
    model.save(out / "model.txt")
    lines = [f"kind      {params['kind']}", f"train     {len(tr)}", f"test      {len(te)}"] + rep.lines()
    (out / "eval.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return ["model.txt", "eval.txt"]


def exec_simulate(cfg, seed, params, inputs, out: Path) -> list[str]:
    model = _load_model(inputs["model"]) if "model" in inputs else None
    res = run(cfg.scenario_config(seed), model)
    names = write_trace(res, out)
    names += write_report(out, [res], cfg.channel.params(), cfg.sweep.warmup_periods)
    s = res.stats
    print(f"{s['nodes']} nodes, {s['events']} events, prediction {'on' if res.prediction else 'off'}")
    return names


def exec_sweep(cfg, seed, params, inputs, out: Path) -> list[str]:
    model = _load_model(inputs["model"]) if "model" in inputs else None
    points = ex.sweep_points(cfg, seed)
    jobs = int(params.get("jobs", "1"))
    log.info("sweep: %d runs on %d workers", len(points), jobs)
    results = ex.run_points(cfg, points, model, jobs)
    model_input = {"model": (str(Path(inputs["model"]).resolve()), digest(inputs["model"]))} if "model" in inputs else {}
    names = []
    index = []
    for pt, res in zip(points, results):
        rel = f"runs/p{pt.index:04d}"
        pcfg = ex.point_config(cfg, pt)
        names += [f"{rel}/{n}" for n in write_trace(res, out / rel)]
        man_inputs = model_input if res.prediction else {}
        run_names = [n for n in names if n.startswith(rel + "/")]
        outs = {n[len(rel) + 1 :]: d for n, d in output_digests(out, run_names).items()}
        Manifest("simulate", pt.seed, cfgmod.to_flat(pcfg), {"prediction": _sbool(res.prediction)}, man_inputs, outs).write(out / rel)
        index.append((pt.index, pt.replicate, pt.seed, ";".join(f"{k}={v}" for k, v in sorted(pt.overrides.items()))))
    with open(out / "points.csv", "w") as fh:
        fh.write("index,replicate,seed,overrides\n")
        fh.writelines(f"{i},{r},{s},{o}\n" for i, r, s, o in index)
    names.append("points.csv")
    names += write_report(out, results, cfg.channel.params(), cfg.sweep.warmup_periods)
    print(f"{len(points)} runs written under {out / 'runs'}")
    return names


def exec_report(cfg, seed, params, inputs, out: Path) -> list[str]:
    keys = sorted((k for k in inputs if k.startswith("traces.")), key=lambda k: int(k.split(".")[1]))
    dirs = [inputs[k] for k in keys]
    runs = find_runs(dirs)
    if not runs:
        raise CommandError("no traces found in " + ", ".join(map(str, dirs)))
    results = [read_trace(d) for d in runs]
    model = _load_model(inputs["model"]) if "model" in inputs else None
    names = write_report(
        out, results, cfg.channel.params(), cfg.sweep.warmup_periods, model, np.random.default_rng(seed), int(params["trials"])
    )
    print((out / "summary.txt").read_text(), end="")
    return names


EXECUTORS = {
    "gen-data": exec_gen_data,
    "train": exec_train,
    "simulate": exec_simulate,
    "sweep": exec_sweep,
    "report": exec_report,
}


def execute(command, cfg, seed, params, inputs: dict[str, str], out: Path) -> Manifest:
    out.mkdir(parents=True, exist_ok=True)
    for name, path in inputs.items():
        if not Path(path).exists():
            raise CommandError(f"input {name}: {path} does not exist")
    names = EXECUTORS[command](cfg, seed, params, inputs, out)
    man = Manifest(
        command,
        seed,
        cfgmod.to_flat(cfg),
        dict(params),
        {k: (str(Path(p).resolve()), digest(p)) for k, p in inputs.items()},
        output_digests(out, names),
    )
    man.write(out)
    return man


# -- argument handling -------------------------------------------------------


def _config(args) -> cfgmod.Config:
    return cfgmod.load(args.config)


def cmd_gen_data(args) -> int:
    execute("gen-data", _config(args), args.seed, {}, {}, Path(args.out))
    return 0


def cmd_train(args) -> int:
    cfg = _config(args)
    kind = args.kind or cfg.model.kind
    cfg.model.kind = kind
    execute("train", cfg, args.seed, {"kind": kind}, {"dataset": args.dataset}, Path(args.out))
    return 0


def cmd_simulate(args) -> int:
    cfg = _config(args)
    if args.no_prediction:
        cfg.protocol.prediction_enabled = False
    inputs = {}
    if cfg.protocol.prediction_enabled:
        if not args.model:
            raise CommandError("prediction is enabled but no --model was given (use --no-prediction to run without)")
        inputs["model"] = args.model
    execute("simulate", cfg, args.seed, {"prediction": _sbool(cfg.protocol.prediction_enabled)}, inputs, Path(args.out))
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    if args.no_prediction:
        cfg.sweep.prediction = [False]
    inputs = {}
    if any(cfg.sweep.prediction):
        if not args.model:
            raise CommandError("the sweep includes prediction-on runs but no --model was given")
        inputs["model"] = args.model
    execute("sweep", cfg, args.seed, {"jobs": str(args.jobs)}, inputs, Path(args.out))
    return 0


def cmd_report(args) -> int:
    cfg = _config(args)
    inputs = {f"traces.{i}": p for i, p in enumerate(args.traces)}
    if args.model:
        inputs["model"] = args.model
    execute("report", cfg, args.seed, {"trials": str(args.trials)}, inputs, Path(args.out))
    return 0


def cmd_replay(args) -> int:
    man = Manifest.read(args.manifest)
    if man.command not in EXECUTORS:
        raise CommandError(f"manifest names unknown command {man.command!r}")
    for name, (path, dig) in man.inputs.items():
        if not Path(path).exists():
            raise CommandError(f"input {name}: {path} no longer exists")
        if digest(path) != dig:
            raise CommandError(f"input {name}: {path} changed since the manifest was written")
    cfg = cfgmod.from_flat(man.config)
    new = execute(man.command, cfg, man.seed, man.params, {k: p for k, (p, _) in man.inputs.items()}, Path(args.out))
    # declared outputs only: a run replayed from a sweep also writes its own tables
    diff = sorted(k for k in man.outputs if man.outputs[k] != new.outputs.get(k))
    if diff:
        print(f"replay differs in {len(diff)} of {len(man.outputs)} outputs:", file=sys.stderr)
        for k in diff:
            print(f"  {k}", file=sys.stderr)
        return 1
    print(f"replay identical: {len(man.outputs)} outputs match")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lqsdwsn", description="Link-quality-gated SDWSN simulator.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--config", help="config file (defaults built in when omitted)")
        if seed:
            sp.add_argument("--seed", type=int, default=0, help="the command's only source of randomness")
        sp.add_argument("--out", required=True, help="output directory")

    sp = sub.add_parser("gen-data", help="generate a labelled link-history dataset")
    common(sp)
    sp.set_defaults(func=cmd_gen_data)

    sp = sub.add_parser("train", help="fit a predictor and print held-out metrics")
    sp.add_argument("dataset")
    sp.add_argument("--kind", choices=KINDS)
    common(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("simulate", help="run one scenario and write its trace")
    common(sp)
    sp.add_argument("--model")
    sp.add_argument("--no-prediction", action="store_true")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sweep", help="run the configured sweep and aggregate curves")
    common(sp)
    sp.add_argument("--model")
    sp.add_argument("--no-prediction", action="store_true")
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("report", help="figure tables from trace directories")
    sp.add_argument("traces", nargs="+")
    common(sp)
    sp.add_argument("--model", help="also tabulate predictor accuracy and gated delivery")
    sp.add_argument("--trials", type=int, default=2000, help="fresh windows per distance for the predictor tables")
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("replay", help="re-run a manifest and compare output digests")
    sp.add_argument("manifest", help=f"a {FILENAME} or the directory holding it")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CommandError, cfgmod.ConfigError, TraceError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

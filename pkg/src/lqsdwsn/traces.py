"""On-disk run traces.

One directory per run::

    events.csv       time, kind, node, peer, seq, info
    ledger.csv       src, dst, distance_m, sent, received, passed
    positions.csv    node, x_m, y_m
    members.csv      node, members (space separated, final state)
    flow_tables.csv  table (controller|installed), owner, dest, next_hop
    manifest.txt     see :mod:`lqsdwsn.manifest`

Floats are written with ``repr`` so a trace reloads to exactly the values
the engine produced.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .engine import Deployment, Record, RunResult, build_scenario
from .manifest import FILENAME, Manifest

TRACE_FILES = ("events.csv", "ledger.csv", "positions.csv", "members.csv", "flow_tables.csv")


class TraceError(ValueError):
    pass


def _writer(path: Path):
    fh = open(path, "w", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def write_trace(result: RunResult, out_dir: str | Path) -> list[str]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    fh, w = _writer(out / "events.csv")
    with fh:
        w.writerow(Record._fields)
        for r in result.records:
            w.writerow([repr(float(r.time)), r.kind, r.node, r.peer, r.seq, r.info])

    fh, w = _writer(out / "ledger.csv")
    with fh:
        w.writerow(["src", "dst", "distance_m", "sent", "received", "passed"])
        for s, d, x, sent, rec, passed in result.ledger:
            w.writerow([s, d, repr(float(x)), sent, rec, passed])

    fh, w = _writer(out / "positions.csv")
    with fh:
        w.writerow(["node", "x_m", "y_m"])
        for i, (x, y) in enumerate(result.deployment.positions.tolist()):
            w.writerow([i, repr(float(x)), repr(float(y))])

    fh, w = _writer(out / "members.csv")
    with fh:
        w.writerow(["node", "members"])
        for node in sorted(result.members):
            w.writerow([node, " ".join(map(str, result.members[node]))])

    fh, w = _writer(out / "flow_tables.csv")
    with fh:
        w.writerow(["table", "owner", "dest", "next_hop"])
        for name, tables in (("controller", result.controller_tables), ("installed", result.installed_tables)):
            for owner in sorted(tables):
                for dest, nxt in sorted(tables[owner].items()):
                    w.writerow([name, owner, dest, nxt])
    return list(TRACE_FILES)


def _rows(path: Path) -> list[list[str]]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as e:
        raise TraceError(f"cannot read {path}: {e}") from None
    if not rows:
        raise TraceError(f"{path}: missing header")
    return rows[1:]


def read_trace(run_dir: str | Path) -> RunResult:
    """Rebuild a :class:`RunResult` from a run directory."""
    d = Path(run_dir)
    man = Manifest.read(d / FILENAME)
    if man.command != "simulate":
        raise TraceError(f"{d}: manifest is for {man.command!r}, not a simulation run")
    cfg = cfgmod.from_flat(man.config)
    sc = cfg.scenario_config(man.seed)

    records = [Record(float(t), k, int(n), int(p), int(s), info) for t, k, n, p, s, info in _rows(d / "events.csv")]
    ledger = [(int(s), int(t), float(x), int(a), int(b), int(c)) for s, t, x, a, b, c in _rows(d / "ledger.csv")]
    pos = np.array([[float(x), float(y)] for _, x, y in _rows(d / "positions.csv")])
    if len(pos) != sc.resolved_node_count():
        raise TraceError(f"{d}: positions.csv has {len(pos)} nodes, config expects {sc.resolved_node_count()}")
    members = {int(n): tuple(int(v) for v in m.split()) for n, m in _rows(d / "members.csv")}
    tables: dict[str, dict[int, dict[int, int]]] = {"controller": {}, "installed": {}}
    for name, owner, dest, nxt in _rows(d / "flow_tables.csv"):
        tables[name].setdefault(int(owner), {})[int(dest)] = int(nxt)

    extent = build_scenario(sc)
    dep = Deployment(pos, extent.controller, extent.width_m, extent.height_m)
    prediction = man.params.get("prediction", "false") == "true"
    return RunResult(sc, dep, records, ledger, members, tables["installed"], tables["controller"], prediction, {"nodes": len(pos)})


def find_runs(paths) -> list[Path]:
    """Simulation run directories under ``paths``, in a stable order."""
    out = []
    for root in map(Path, paths):
        if not root.exists():
            raise TraceError(f"{root}: no such directory")
        cands = [root / FILENAME] if (root / FILENAME).exists() else []
        cands += sorted(p for p in root.rglob(FILENAME) if p.parent != root)
        for m in cands:
            if Manifest.read(m).command == "simulate":
                out.append(m.parent)
    return out

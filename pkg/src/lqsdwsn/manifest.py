"""Run manifests: everything needed to re-run a command and check its outputs.

A manifest is plain text, one ``key = value`` per line, ``#`` comments::

    command = simulate
    version = 0.1.0
    seed = 7
    param.prediction = true
    config.channel.alpha = 3.0
    ...
    input.model = /abs/path/model.txt sha256:<hex>
    output.events.csv = sha256:<hex>
    unpublished = protocol.hello_period, scenario.duration_periods

Key order is fixed and no timestamps are written, so a manifest is itself
reproducible.  Output paths are relative to the output directory.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__

FILENAME = "manifest.txt"
HEADER = "# lqsdwsn run manifest"
# defaults with no published value behind them
UNPUBLISHED = ("protocol.hello_period", "scenario.duration_periods")


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return "sha256:" + h.hexdigest()


def sha256_tree(root: str | Path) -> str:
    """Digest of a directory: relative paths and contents of every file."""
    root = Path(root)
    h = hashlib.sha256()
    for p in sorted(x for x in root.rglob("*") if x.is_file()):
        h.update(p.relative_to(root).as_posix().encode())
        h.update(sha256_file(p).encode())
    return "sha256:" + h.hexdigest()


def digest(path: str | Path) -> str:
    return sha256_tree(path) if Path(path).is_dir() else sha256_file(path)


def output_digests(out_dir: str | Path, names: list[str]) -> dict[str, str]:
    out = Path(out_dir)
    return {n: sha256_file(out / n) for n in sorted(names)}


@dataclass
class Manifest:
    command: str
    seed: int
    config: dict[str, str]
    params: dict[str, str] = field(default_factory=dict)
    inputs: dict[str, tuple[str, str]] = field(default_factory=dict)  # name -> (path, digest)
    outputs: dict[str, str] = field(default_factory=dict)  # relative path -> digest
    version: str = __version__

    def dumps(self) -> str:
        lines = [HEADER, f"command = {self.command}", f"version = {self.version}", f"seed = {self.seed}"]
        lines += [f"param.{k} = {v}" for k, v in sorted(self.params.items())]
        lines += [f"config.{k} = {v}" for k, v in self.config.items()]
        lines += [f"input.{k} = {p} {d}" for k, (p, d) in sorted(self.inputs.items())]
        lines += [f"output.{k} = {d}" for k, d in sorted(self.outputs.items())]
        lines.append("unpublished = " + ", ".join(UNPUBLISHED))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "Manifest":
        vals: dict[str, str] = {}
        config, params, inputs, outputs = {}, {}, {}, {}
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, val = line.partition(" = ")
            if not sep:
                raise ValueError(f"manifest line {n}: expected 'key = value'")
            if key.startswith("config."):
                config[key[7:]] = val
            elif key.startswith("param."):
                params[key[6:]] = val
            elif key.startswith("input."):
                path, _, dig = val.rpartition(" ")
                inputs[key[6:]] = (path, dig)
            elif key.startswith("output."):
                outputs[key[7:]] = val
            else:
                vals[key] = val
        try:
            return cls(vals["command"], int(vals["seed"]), config, params, inputs, outputs, vals.get("version", ""))
        except KeyError as e:
            raise ValueError(f"manifest missing {e.args[0]!r}") from None

    def write(self, out_dir: str | Path) -> Path:
        path = Path(out_dir) / FILENAME
        path.write_text(self.dumps())
        return path

    @classmethod
    def read(cls, path: str | Path) -> "Manifest":
        p = Path(path)
        if p.is_dir():
            p = p / FILENAME
        return cls.loads(p.read_text())

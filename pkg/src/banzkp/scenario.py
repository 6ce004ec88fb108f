"""Scenario files and named presets.

A scenario file is TOML::

    name = "lossy"
    seed = 3                 # optional, the command line may override it
    modulus_bits = 2048
    horizon_ms = 60000
    timeout_ms = 100

    [[nodes]]                # omit nodes and links for the 7-node body layout
    id = 0
    label = "chest"

    [[links]]
    a = 0
    b = 1
    delay_ms = 5.0
    loss = 0.0

    [[traffic]]              # omit for one reading per node at t = 0
    time_ms = 0
    node = 1
    data = "hr=72"           # or data_hex = "..."

    [[adversary]]
    kind = "replay"          # forge_node | forge_sink | replay | inject | mitm | eavesdrop
    victim = 4
    variant = "m1m3"
"""

from __future__ import annotations

import re
import sys
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import adversary as adv
from .crypto import ParameterError, ProtocolParams
from .netsim import (
    ConfigError,
    Link,
    NodeSpec,
    RouteError,
    Scenario,
    Topology,
    Traffic,
    build_routes,
    default_topology,
    honest_scenario,
)

PRESETS = ("honest7",)


class ScenarioError(Exception):
    def __init__(self, message: str, path: str = "<scenario>", line: Optional[int] = None):
        self.path, self.line = path, line
        where = f"{path}:{line}" if line else path
        super().__init__(f"{where}: {message}")


def _line_of(text: str, table: str, index: int) -> Optional[int]:
    hits = [text.count("\n", 0, m.start()) + 1
            for m in re.finditer(rf"^[ \t]*\[\[\s*{table}\s*\]\]", text, re.M)]
    return hits[index] if index < len(hits) else None


def _adversary(entry: dict):
    kind = entry["kind"]
    victim = int(entry.get("victim", adv.DEFAULT_VICTIM))
    variant = entry.get("variant")
    if kind == "forge_node":
        return adv.ForgeNode(victim, variant or "full")
    if kind == "forge_sink":
        return adv.ForgeSink(victim, variant or "m2")
    if kind == "replay":
        return adv.Replay(victim, variant or "m1m3", float(entry.get("replay_at_ms", 2000.0)))
    if kind == "inject":
        return adv.Inject(victim)
    if kind == "mitm":
        return adv.MitM(victim, variant)
    if kind in ("eavesdrop", "guess"):
        a = adv.Adversary(victim)
        a.kind = kind
        return a
    raise KeyError(kind)


def parse_scenario(text: str, path: str = "<scenario>", seed: Optional[int] = None,
                   modulus_bits: Optional[int] = None) -> Scenario:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ScenarioError(f"syntax error: {exc}", path, int(m.group(1)) if m else None) from None

    try:
        bits = modulus_bits or int(doc.get("modulus_bits", 2048))
        params = ProtocolParams.generate(bits)
    except ParameterError as exc:
        raise ScenarioError(str(exc), path) from None

    if "nodes" in doc or "links" in doc:
        try:
            nodes = tuple(NodeSpec(int(n["id"]), str(n.get("label", ""))) for n in doc.get("nodes", []))
        except KeyError:
            raise ScenarioError("node entry without id", path) from None
        links = []
        for i, ln in enumerate(doc.get("links", [])):
            try:
                links.append(Link(int(ln["a"]), int(ln["b"]), float(ln.get("delay_ms", 5.0)),
                                  float(ln.get("loss", 0.0))))
            except KeyError as exc:
                raise ScenarioError(f"link missing {exc}", path, _line_of(text, "links", i)) from None
        try:
            topo = Topology(nodes, tuple(links))
        except ConfigError as exc:
            raise ScenarioError(str(exc), path) from None
    else:
        topo = default_topology()

    run_seed = seed if seed is not None else doc.get("seed")
    if run_seed is None:
        raise ScenarioError("no seed given in file or on the command line", path)

    traffic = []
    for i, tr in enumerate(doc.get("traffic", [])):
        line = _line_of(text, "traffic", i)
        try:
            data = bytes.fromhex(tr["data_hex"]) if "data_hex" in tr else str(tr["data"]).encode()
            item = Traffic(float(tr.get("time_ms", 0.0)), int(tr["node"]), data)
        except (KeyError, ValueError) as exc:
            raise ScenarioError(f"bad traffic entry: {exc}", path, line) from None
        if item.node not in topo.ids or item.node == 0:
            raise ScenarioError(f"traffic references unknown sensor node {item.node}", path, line)
        traffic.append(item)

    adversaries = []
    for i, entry in enumerate(doc.get("adversary", [])):
        try:
            a = _adversary(entry)
        except KeyError as exc:
            raise ScenarioError(f"unknown or missing adversary field {exc}", path,
                                _line_of(text, "adversary", i)) from None
        if a.victim not in topo.ids or a.victim == 0:
            raise ScenarioError(f"adversary victim {a.victim} is not a sensor node", path,
                                _line_of(text, "adversary", i))
        adversaries.append(a)

    kwargs = dict(params=params, name=str(doc.get("name", Path(path).stem)),
                  horizon_ms=float(doc.get("horizon_ms", 60_000.0)),
                  timeout_ms=float(doc.get("timeout_ms", 100.0)))
    try:
        if traffic:
            sc = Scenario(topology=topo, seed=run_seed, traffic=tuple(traffic),
                          adversaries=tuple(adversaries), **kwargs)
        else:
            sc = honest_scenario(run_seed, topology=topo, adversaries=tuple(adversaries), **kwargs)
        build_routes(topo)
    except (ConfigError, RouteError) as exc:
        raise ScenarioError(str(exc), path) from None
    return sc


def load_scenario(name_or_path: str, seed: Optional[int] = None,
                  modulus_bits: Optional[int] = None) -> Scenario:
    """A preset name (``honest7``) or the path of a scenario file."""
    if name_or_path in PRESETS:
        if seed is None:
            raise ScenarioError("preset scenarios need a seed", name_or_path)
        params = ProtocolParams.generate(modulus_bits or 2048)
        return honest_scenario(seed, params=params, name=name_or_path)
    p = Path(name_or_path)
    if not p.is_file():
        raise ScenarioError("no such scenario file or preset", name_or_path)
    return parse_scenario(p.read_text(), str(p), seed, modulus_bits)

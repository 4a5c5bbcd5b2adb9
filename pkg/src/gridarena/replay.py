"""Replay files: header + per-tick action/event records, compressed.

The normative format is the uncompressed JSON envelope; the digest is the
SHA-256 of the canonical (sorted keys, no whitespace) payload JSON, which is
also the determinism witness for the whole episode.
"""

from __future__ import annotations

import hashlib
import json
import zlib
from dataclasses import asdict

import numpy as np

from .config import GameConfig
from .defaults import SCHEMA, Subsystem
from .engine import Simulation
from .errors import CorruptReplay
from .minigames import EpisodeSetup, MinigameKind
from .entities import SpawnMode

MAGIC = b"GARPLY1"


def _canonical(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def payload_digest(payload) -> str:
    return hashlib.sha256(_canonical(payload).encode()).hexdigest()


def build_payload(sim: Simulation, policy_of: dict[int, str]) -> dict:
    events_by_tick: dict[int, list[str]] = {}
    for event in sim.log:
        events_by_tick.setdefault(event.tick, []).append(event.to_line())
    ticks = []
    for i, actions in enumerate(sim.tick_actions, start=1):
        ticks.append({
            "t": i,
            "a": {str(a): v for a, v in sorted(actions.items())},
            "e": events_by_tick.get(i, []),
        })
    setup = asdict(sim.setup)
    setup["kind"] = sim.setup.kind.value
    setup["spawn_mode"] = sim.setup.spawn_mode.value
    setup["npc_regions"] = list(sim.setup.npc_regions)
    config = {}
    for key, value in sim.cfg.snapshot().items():
        if isinstance(value, tuple):
            value = list(value)
        if isinstance(value, dict):
            value = {str(k): v for k, v in value.items()}
        config[key] = value
    header = {
        "version": 1,
        "kind": sim.setup.kind.value,
        "seed": sim.seed,
        "profile": sim.cfg.profile,
        "config": config,
        "setup": setup,
        "policies": sorted(set(policy_of.values())),
        "policy_of": {str(a): p for a, p in sorted(policy_of.items())},
        "teams": {str(t): list(m) for t, m in sorted(sim.teams.items())},
        "leaders": {str(t): l for t, l in sorted(sim.leaders.items())},
        "winner": list(sim.winner) if sim.winner else None,
        "final_tick": sim.tick,
    }
    return {"header": header, "ticks": ticks}


def write_replay(payload: dict, path=None) -> bytes:
    envelope = {"digest": payload_digest(payload), "payload": payload}
    blob = MAGIC + zlib.compress(_canonical(envelope).encode(), level=6)
    if path is not None:
        with open(path, "wb") as fh:
            fh.write(blob)
    return blob


def read_replay(source) -> dict:
    """Load and verify a replay from bytes or a path; returns the payload."""
    if isinstance(source, (bytes, bytearray)):
        blob = bytes(source)
    else:
        with open(source, "rb") as fh:
            blob = fh.read()
    if not blob.startswith(MAGIC):
        raise CorruptReplay("bad magic")
    try:
        envelope = json.loads(zlib.decompress(blob[len(MAGIC):]))
    except (zlib.error, json.JSONDecodeError, ValueError) as exc:
        raise CorruptReplay(str(exc)) from exc
    payload = envelope.get("payload")
    if payload is None or payload_digest(payload) != envelope.get("digest"):
        raise CorruptReplay("digest mismatch")
    return payload


def replay_digest(source) -> str:
    if isinstance(source, dict):
        return payload_digest(source)
    return payload_digest(read_replay(source))


def config_from_header(header: dict) -> GameConfig:
    cfg = GameConfig(header["profile"])
    raw = header["config"]
    for key, spec in SCHEMA.items():
        if key not in raw:
            continue
        value = raw[key]
        if spec.kind in ("pair", "int_tuple") and isinstance(value, list):
            value = tuple(value)
        if spec.kind == "teams" and isinstance(value, dict):
            value = {int(k): list(v) for k, v in value.items()}
        cfg.set_original(key, value)
    cfg.set_subsystems_for_episode(
        {Subsystem(name) for name in raw["__subsystems__"]})
    return cfg


def setup_from_header(header: dict) -> EpisodeSetup:
    raw = dict(header["setup"])
    raw["kind"] = MinigameKind(raw["kind"])
    raw["spawn_mode"] = SpawnMode(raw["spawn_mode"])
    raw["npc_regions"] = tuple(raw["npc_regions"])
    return EpisodeSetup(**raw)


def resimulate(payload: dict) -> Simulation:
    """Re-run the recorded actions through a fresh engine.

    The regenerated event stream must match the recorded one line for line;
    any divergence means the replay does not correspond to this build.
    """
    header = payload["header"]
    cfg = config_from_header(header)
    setup = setup_from_header(header)
    sim = Simulation(cfg, setup, header["seed"])
    for record in payload["ticks"]:
        actions = {int(a): np.asarray(v, dtype=np.int64)
                   for a, v in record["a"].items()}
        sim.step(actions)
        regenerated = [e.to_line() for e in sim.log if e.tick == record["t"]]
        if regenerated != record["e"]:
            raise CorruptReplay(f"event divergence at tick {record['t']}")
    return sim

"""Content-addressed cache for derived simulation artifacts.

Two artifact families are cached: extracted round error distributions
(enumerating every fault branch takes a noticeable fraction of a second
per noise point) and Monte Carlo failure counts (hours of decoding for a
full threshold sweep).  Both are exact functions of their recorded inputs
— failure counts are deterministic given (distance, noise, rounds, shots,
seed, decoder, graph model) by construction — so caching is pure
memoization, never an approximation.

Entries are JSON files named by a hash of their parameters.  Each entry
embeds the exact inputs it was computed from plus a checksum of its
payload; on read both are verified, so a corrupted file or a key
collision against different parameters is refused rather than silently
served.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from functools import lru_cache
from pathlib import Path

from .channels import NoiseModel
from .check_round import RoundErrorDistribution, extract_round_distribution

#: Bump when the extraction semantics change; invalidates older entries.
DISTRIBUTION_VERSION = 1

ENV_CACHE_DIR = "SPINMESH_CACHE_DIR"


class CacheError(RuntimeError):
    """A cache entry exists but cannot be trusted."""


def cache_dir() -> Path | None:
    """Directory for cache entries, or None when caching is disabled."""
    root = os.environ.get(ENV_CACHE_DIR)
    if not root:
        return None
    path = Path(root)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _params(stype: str, noise: NoiseModel) -> dict:
    return {
        "type": stype,
        "p_1q": noise.p_1q,
        "p_swap": noise.p_swap,
        "p_sh": noise.p_sh,
        "version": DISTRIBUTION_VERSION,
    }


def cache_key(stype: str, noise: NoiseModel) -> str:
    blob = json.dumps(_params(stype, noise), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def _payload_checksum(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def _entry_path(params: dict, root: Path) -> Path:
    blob = json.dumps(params, sort_keys=True).encode()
    return root / f"{hashlib.sha256(blob).hexdigest()}.json"


def _write_entry(params: dict, payload, root: Path) -> Path:
    entry = {
        "params": params,
        "payload": payload,
        "checksum": _payload_checksum(payload),
    }
    path = _entry_path(params, root)
    # write-then-rename so concurrent readers never see a partial file
    fd, tmp = tempfile.mkstemp(dir=root, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(entry, fh)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)
    return path


def _read_entry(params: dict, root: Path):
    """Payload for ``params``, or None when absent.

    Raises CacheError when the entry exists but its checksum fails or its
    recorded parameters do not match the request (a key collision).
    """
    path = _entry_path(params, root)
    if not path.exists():
        return None
    try:
        entry = json.loads(path.read_text())
        payload = entry["payload"]
        checksum = entry["checksum"]
        stored = entry["params"]
    except (json.JSONDecodeError, KeyError, UnicodeDecodeError) as exc:
        raise CacheError(f"cache entry {path} is unreadable: {exc}") from exc
    if _payload_checksum(payload) != checksum:
        raise CacheError(f"cache entry {path} failed its checksum; delete it to rebuild")
    if stored != params:
        raise CacheError(
            f"cache entry {path} was stored for different parameters {stored}; "
            "refusing to reuse it")
    return payload


def store(stype: str, noise: NoiseModel, dist: RoundErrorDistribution,
          root: Path) -> Path:
    return _write_entry(_params(stype, noise), dist.to_json(), root)


def load(stype: str, noise: NoiseModel, root: Path) -> RoundErrorDistribution | None:
    """Load a cached distribution, or None when absent."""
    payload = _read_entry(_params(stype, noise), root)
    if payload is None:
        return None
    return RoundErrorDistribution.from_json(payload)


@lru_cache(maxsize=64)
def _memoized(stype: str, p_1q: float, p_swap: float, p_sh: float
              ) -> RoundErrorDistribution:
    noise = NoiseModel(p_1q=p_1q, p_swap=p_swap, p_sh=p_sh)
    root = cache_dir()
    if root is not None:
        hit = load(stype, noise, root)
        if hit is not None:
            return hit
    dist = extract_round_distribution(stype, noise)
    if root is not None:
        store(stype, noise, dist, root)
    return dist


def cached_round_distribution(stype: str, noise: NoiseModel) -> RoundErrorDistribution:
    """Round distribution via the in-process and on-disk caches."""
    return _memoized(stype, noise.p_1q, noise.p_swap, noise.p_sh)


#: Bump when sampling or decoding semantics change; invalidates rate entries.
RATE_VERSION = 1


def _rate_params(d: int, noise: NoiseModel, rounds: int, shots: int, seed: int,
                 decoder: str, graph_model: str) -> dict:
    return {
        "kind": "failures",
        "d": d,
        "p_1q": noise.p_1q,
        "p_swap": noise.p_swap,
        "p_sh": noise.p_sh,
        "rounds": rounds,
        "shots": shots,
        "seed": seed,
        "decoder": decoder,
        "graph_model": graph_model,
        "version": RATE_VERSION,
    }


def load_failures(d: int, noise: NoiseModel, rounds: int, shots: int, seed: int,
                  decoder: str, graph_model: str) -> int | None:
    """Cached failure count for one Monte Carlo point, or None."""
    root = cache_dir()
    if root is None:
        return None
    payload = _read_entry(
        _rate_params(d, noise, rounds, shots, seed, decoder, graph_model), root)
    return None if payload is None else int(payload["failures"])


def store_failures(d: int, noise: NoiseModel, rounds: int, shots: int, seed: int,
                   decoder: str, graph_model: str, failures: int) -> None:
    root = cache_dir()
    if root is None:
        return
    _write_entry(_rate_params(d, noise, rounds, shots, seed, decoder, graph_model),
                 {"failures": int(failures)}, root)

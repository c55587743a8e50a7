import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Iterable, List, Optional, TypeVar

from spiraldrive import __version__

log = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

TWO_PI = 2.0 * math.pi

# Phases are snapped to this lattice so phi and phi + 2*pi give bit-identical waveforms.
PHASE_LATTICE = 2.0 ** -40


def canonical_phase(phi: float) -> float:
    """Wraps a phase into [0, 2*pi) and snaps it to PHASE_LATTICE."""
    if not math.isfinite(phi):
        raise ValueError(f"phase must be finite, got {phi!r}")
    wrapped = math.fmod(phi, TWO_PI)
    if wrapped < 0.0:
        wrapped += TWO_PI
    snapped = round(wrapped / PHASE_LATTICE) * PHASE_LATTICE
    return 0.0 if snapped >= TWO_PI else snapped


def map_ordered(fn: Callable[[T], R], items: Iterable[T], workers: Optional[int] = None) -> List[R]:
    """
    Evaluates fn over items, optionally on a thread pool.
    Results always come back in input order, so parallel runs assemble identically to serial ones.
    """
    items = list(items)
    if not workers or workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def config_hash(config: Any) -> str:
    """Short stable hash of a JSON-able config (key order insensitive)."""
    canonical = json.dumps(config, sort_keys=True, default=str, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def provenance(config: Any = None, seed: Optional[int] = None, **extra: Any) -> dict:
    """Provenance block written at the top of every artifact."""
    block = {
        "tool": "spiraldrive",
        "version": __version__,
        "config_hash": config_hash(config) if config is not None else None,
        "seed": seed,
    }
    block.update(extra)
    return block

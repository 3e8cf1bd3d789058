"""Counter-based random substreams keyed by integer paths.

Every draw in the package comes from ``substream(seed, *keys)``. The keys
name *what* is being drawn (replication, purpose, group, ...), never the
order in which work happens, so results do not depend on scheduling.
"""

import os

import numpy as np

from .errors import ConfigError

SEED_ENV = "HINDSIGHT_SEED"

# Purpose tags used as the second key of a substream path.
SIGNALS = 0
PLAYERS = 1
MULTIPLIERS = 2
CHECK = 3


def substream(seed, *keys):
    """Philox generator for the stream addressed by ``(seed, keys)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed, *keys):
    """A 64-bit seed for a child computation addressed by ``keys``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def check_seed(seed):
    """Validate a seed as an unsigned 64-bit integer."""
    try:
        value = int(seed)
    except (TypeError, ValueError):
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed!r}") from None
    if not 0 <= value < 2**64:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    return value


def seed_from_env(default=None):
    """Seed from ``HINDSIGHT_SEED`` when set, else ``default``."""
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return default
    return check_seed(raw.strip())

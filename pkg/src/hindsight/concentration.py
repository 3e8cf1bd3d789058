"""Monte Carlo validation of the vector McDiarmid bound.

The test functions are linear, ``f(X) = X @ A``, in independent coordinates
``X_i`` that take the values ``+-r_i/2`` with equal probability, so
``E f = 0`` and coordinate ``i`` moves ``f_l`` by at most ``|A_il| r_i``.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import linalg, rng
from .errors import ConfigError

SCENARIOS = ("fair", "correlated", "constant")


@dataclass(frozen=True)
class CheckScenario:
    """Coefficients ``A`` (n x L) and coordinate ranges ``r`` (n,)."""

    name: str
    coefs: np.ndarray
    ranges: np.ndarray

    @classmethod
    def build(cls, name, n=100):
        if n < 1:
            raise ConfigError("n must be positive")
        if name == "fair":
            return cls(name, np.ones((n, 1)), np.ones(n))
        if name == "correlated":
            a = np.column_stack([np.ones(n), np.linspace(0.5, 1.5, n)])
            return cls(name, a, np.ones(n))
        if name == "constant":
            return cls(name, np.zeros((n, 1)), np.ones(n))
        raise ConfigError(f"unknown scenario {name!r}; choose from {SCENARIOS}")

    def variation_matrix(self, eta=linalg.DEFAULT_ETA):
        c = np.abs(self.coefs) * self.ranges[:, None]
        return linalg.regularize(linalg.outer_product_sum(c), eta)


def _tail_counts(scenario, bounds, draws, seed, chunk=100_000):
    """Count draws with every component of ``f`` at or below ``-bound``."""
    gen = rng.substream(seed, rng.CHECK)
    n = scenario.coefs.shape[0]
    weights = scenario.coefs * (scenario.ranges[:, None] / 2.0)
    counts = np.zeros(len(bounds), dtype=np.int64)
    done = 0
    while done < draws:
        m = min(chunk, draws - done)
        signs = 2.0 * gen.integers(0, 2, size=(m, n), dtype=np.int8) - 1.0
        f = signs @ weights
        for k, b in enumerate(bounds):
            counts[k] += int(np.count_nonzero(np.all(f <= -b, axis=1)))
        done += m
    return counts


def mcdiarmid_check(scenario, rhos=(0.1, 0.01), draws=1_000_000, seed=0):
    """Empirical joint lower-tail frequencies against the analytic levels.

    For each ``rho`` two deviation vectors are tested: the eigenvector-based
    bound and, when ``L > 1``, the matrix bound along the all-ones direction
    scaled to the same level. A row passes iff its frequency is at most
    ``rho + 3 SE`` with ``SE = sqrt(rho (1 - rho) / draws)``.
    """
    if draws < 1:
        raise ConfigError("draws must be positive")
    lam = scenario.variation_matrix()
    dim = lam.shape[0]
    labels, levels, bounds = [], [], []
    for rho in rhos:
        labels.append("eigenvector")
        levels.append(rho)
        bounds.append(linalg.mcdiarmid_vector_bound(lam, rho))
        if dim > 1:
            ones = np.ones(dim)
            eps = ones * math.sqrt(-math.log(rho) / (2.0 * ones @ lam @ ones))
            labels.append("uniform")
            levels.append(linalg.mcdiarmid_tail_bound(lam, eps))
            bounds.append(lam @ eps)
    counts = _tail_counts(scenario, bounds, draws, seed)
    rows = []
    for label, level, bound, count in zip(labels, levels, bounds, counts):
        freq = count / draws
        se = math.sqrt(level * (1.0 - level) / draws)
        rows.append({
            "scenario": scenario.name, "direction": label, "rho": float(level),
            "bound": [float(b) for b in bound], "frequency": freq, "se": se,
            "pass": bool(freq <= level + 3.0 * se),
        })
    return rows

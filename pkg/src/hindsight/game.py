"""Equilibrium outcome data for the linear-in-means social interaction game.

Each of S information groups draws a public signal ``C_s``. Player ``i`` in
group ``s`` has covariate ``X_i = Z_i + gamma * C_s + shift`` and a private
shock ``eta_i``; ``C``, ``Z`` and ``eta`` are independent standard normals.
In the symmetric equilibrium a player in group ``s`` takes action 1 iff

    X_i * beta + phi * p_s(C_s) + eta_i >= 0,

where the group choice probability ``p_s(c)`` solves the fixed point

    p = Phi(((gamma * c + shift) * beta + phi * p) / sqrt(beta**2 + 1)).
"""

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np
from scipy.special import ndtr

from . import rng
from .errors import ConfigError, DataError, DesignError, NumericalError


class MultipleEquilibriaWarning(UserWarning):
    """The group fixed point has several roots; one was selected."""


@dataclass(frozen=True)
class ThetaParams:
    """Structural point ``(beta, phi)`` plus the signal loading and tail levels."""

    beta: float
    phi: float
    gamma: float = 1.0 / 3.0
    rho: float = 0.01
    tau: float = 0.01

    def __post_init__(self):
        for name in ("beta", "phi", "gamma", "rho", "tau"):
            value = getattr(self, name)
            if not isinstance(value, (int, float, np.floating, np.integer)) or not math.isfinite(value):
                raise ConfigError(f"{name} must be a finite real, got {value!r}")
            object.__setattr__(self, name, float(value))
        for name in ("rho", "tau"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ConfigError(f"{name} must lie in (0, 1), got {getattr(self, name)}")

    def with_values(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class GameDesign:
    """Group sizes and the root seed of one simulated game."""

    group_sizes: tuple
    seed: int = 0

    def __post_init__(self):
        sizes = tuple(int(n) for n in np.atleast_1d(self.group_sizes))
        if len(sizes) == 0:
            raise ConfigError("a design needs at least one group")
        if min(sizes) < 2:
            raise ConfigError(f"every group needs at least 2 players, got sizes {sizes}")
        object.__setattr__(self, "group_sizes", sizes)
        object.__setattr__(self, "seed", rng.check_seed(self.seed))

    @classmethod
    def uniform(cls, num_groups, group_size, seed=0):
        return cls((int(group_size),) * int(num_groups), seed)

    @property
    def num_groups(self):
        return len(self.group_sizes)

    @property
    def num_players(self):
        return sum(self.group_sizes)

    def group_of(self):
        return np.repeat(np.arange(self.num_groups), self.group_sizes)


@dataclass(frozen=True)
class DGPOptions:
    """Knobs of the simulation design that inference never sees.

    ``selection`` picks among multiple fixed points: ``"smallest"``,
    ``"largest"`` or an integer index into the sorted roots.
    """

    shift: float = -0.2
    phi_limit: float = 2.0
    selection: Union[str, int] = "smallest"
    grid_points: int = 1024

    def __post_init__(self):
        if isinstance(self.selection, str) and self.selection not in ("smallest", "largest"):
            raise ConfigError(f"unknown equilibrium selection {self.selection!r}")
        if self.grid_points < 2:
            raise ConfigError("grid_points must be at least 2")
        if not self.phi_limit > 0:
            raise ConfigError("phi_limit must be positive")


@dataclass(frozen=True)
class Latent:
    """Simulation-only draws, withheld from inference."""

    z: np.ndarray
    eta: np.ndarray
    choice_probs: np.ndarray  # p_s(C_s), one per group


@dataclass(frozen=True, eq=False)
class OutcomeData:
    """One realized game: actions, covariates, group signals and memberships."""

    actions: np.ndarray
    covariates: np.ndarray
    signals: np.ndarray
    group_of: np.ndarray
    num_actions: int = 2
    latent: Optional[Latent] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        y = np.asarray(self.actions)
        x = np.asarray(self.covariates, dtype=np.float64)
        c = np.asarray(self.signals, dtype=np.float64)
        g = np.asarray(self.group_of)
        if y.ndim != 1 or x.shape != y.shape or g.shape != y.shape:
            raise DataError("actions, covariates and group_of must be 1-D of equal length")
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(c)):
            raise DataError("covariates and signals must be finite")
        if y.size and (not np.all(y == np.round(y))):
            raise DataError("actions must be integer codes")
        y = y.astype(np.int64)
        if y.size and (y.min() < 0 or y.max() >= self.num_actions):
            raise DataError(f"actions must lie in 0..{self.num_actions - 1}")
        g = g.astype(np.int64)
        if g.size and (g.min() < 0 or g.max() >= c.size):
            raise DataError("group_of refers to a group without a signal")
        sizes = np.bincount(g, minlength=c.size)
        if np.any(sizes < 2):
            raise DesignError("every group needs at least 2 players")
        for name, arr in (("actions", y), ("covariates", x), ("signals", c), ("group_of", g)):
            arr = np.array(arr)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def num_players(self):
        return self.actions.size

    @property
    def num_groups(self):
        return self.signals.size

    @property
    def group_sizes(self):
        return np.bincount(self.group_of, minlength=self.num_groups)

    def size_of_own_group(self):
        """``N_s`` for each player's group."""
        return self.group_sizes[self.group_of]

    def public(self):
        """Copy without the latent simulation draws."""
        return replace(self, latent=None)


def _check_phi(theta, options):
    if abs(theta.phi) > options.phi_limit:
        raise ConfigError(f"|phi| = {abs(theta.phi)} exceeds the configured limit {options.phi_limit}")


def _index_terms(theta, c, shift):
    scale = math.sqrt(theta.beta**2 + 1.0)
    a = (theta.gamma * np.asarray(c, dtype=np.float64) + shift) * theta.beta / scale
    return a, theta.phi / scale


def _roots(a, b, grid_points):
    """All sign-change roots of p - Phi(a + b p) on [0, 1], one list per row of ``a``."""
    a = np.atleast_1d(a)
    grid = np.linspace(0.0, 1.0, grid_points + 1)
    f = grid[None, :] - ndtr(a[:, None] + b * grid[None, :])
    exact = f == 0.0
    change = (f[:, :-1] * f[:, 1:] < 0.0)
    rows, cols = np.nonzero(change)
    lo = grid[cols].copy()
    hi = grid[cols + 1].copy()
    a_b = a[rows]
    f_lo = f[rows, cols]
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        done = (mid <= lo) | (mid >= hi)
        if np.all(done):
            break
        f_mid = mid - ndtr(a_b + b * mid)
        same = np.sign(f_mid) == np.sign(f_lo)
        lo = np.where(done, lo, np.where(same, mid, lo))
        f_lo = np.where(done, f_lo, np.where(same, f_mid, f_lo))
        hi = np.where(done, hi, np.where(same, hi, mid))
    f_hi = hi - ndtr(a_b + b * hi)
    root = np.where(np.abs(f_lo) <= np.abs(f_hi), lo, hi)
    out = [[] for _ in range(a.size)]
    for r, p in zip(rows, root):
        out[r].append(float(p))
    er, ec = np.nonzero(exact)
    for r, k in zip(er, ec):
        out[r].append(float(grid[k]))
    return [sorted(v) for v in out]


def equilibrium_roots(theta, c, options=None):
    """Every fixed point of the group choice-probability map found by a
    sign-change scan on a regular grid of [0, 1], refined by bisection."""
    options = options or DGPOptions()
    _check_phi(theta, options)
    a, b = _index_terms(theta, c, options.shift)
    return np.array(_roots(np.array([float(a)]), b, options.grid_points)[0])


def _select(roots, selection):
    if not roots:
        raise NumericalError("no fixed point found in [0, 1]")
    if selection == "smallest":
        return roots[0]
    if selection == "largest":
        return roots[-1]
    try:
        return roots[int(selection)]
    except IndexError:
        raise ConfigError(
            f"equilibrium index {selection} out of range for {len(roots)} roots"
        ) from None


def _solve_many(theta, cs, options):
    _check_phi(theta, options)
    a, b = _index_terms(theta, cs, options.shift)
    all_roots = _roots(np.atleast_1d(a), b, options.grid_points)
    multi = [i for i, r in enumerate(all_roots) if len(r) > 1]
    if multi:
        warnings.warn(
            f"{len(multi)} signal value(s) admit multiple fixed points "
            f"(e.g. roots {all_roots[multi[0]]}); selecting {options.selection!r}",
            MultipleEquilibriaWarning,
            stacklevel=3,
        )
    return np.array([_select(r, options.selection) for r in all_roots])


def solve_group_choice_prob(theta, c, options=None):
    """Equilibrium choice probability ``p_s(c)`` of a group with signal ``c``.

    When the scan finds several fixed points a ``MultipleEquilibriaWarning``
    is issued and ``options.selection`` decides which root is returned.
    """
    options = options or DGPOptions()
    return float(_solve_many(theta, np.array([float(c)]), options)[0])


def fixed_point_residual(theta, c, p, options=None):
    """``|p - Phi(...)|`` at a candidate probability."""
    options = options or DGPOptions()
    a, b = _index_terms(theta, c, options.shift)
    return float(abs(p - ndtr(a + b * p)))


def simulate_game(theta, design, options=None, replication=0):
    """Draw one equilibrium outcome of the game.

    Signals come from the stream ``(seed, replication, SIGNALS)``; the
    players of group ``s`` use ``(seed, replication, PLAYERS, s)``, where row
    ``k`` of an ``(N_s, 2)`` normal draw gives ``(Z, eta)`` of the k-th member.
    """
    options = options or DGPOptions()
    signals = rng.substream(design.seed, replication, rng.SIGNALS).standard_normal(design.num_groups)
    probs = _solve_many(theta, signals, options)
    z_parts, e_parts = [], []
    for s, n in enumerate(design.group_sizes):
        draws = rng.substream(design.seed, replication, rng.PLAYERS, s).standard_normal((n, 2))
        z_parts.append(draws[:, 0])
        e_parts.append(draws[:, 1])
    z = np.concatenate(z_parts)
    eta = np.concatenate(e_parts)
    group_of = design.group_of()
    x = z + theta.gamma * signals[group_of] + options.shift
    y = (x * theta.beta + theta.phi * probs[group_of] + eta >= 0.0).astype(np.int64)
    meta = {
        "design": {"group_sizes": list(design.group_sizes), "seed": design.seed},
        "replication": int(replication),
        "theta": {k: getattr(theta, k) for k in ("beta", "phi", "gamma", "rho", "tau")},
        "dgp": {"shift": options.shift, "selection": options.selection},
    }
    return OutcomeData(
        actions=y,
        covariates=x,
        signals=signals,
        group_of=group_of,
        latent=Latent(z=z, eta=eta, choice_probs=probs),
        meta=meta,
    )

"""Belief-free hindsight regrets.

A player's regret is the compensation that keeps the realized action optimal
after everyone's types are revealed, with probability at least ``1 - rho``.
It depends only on how strongly other players' actions can move the
player's payoff differential, never on beliefs.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import linalg
from .errors import DesignError, DomainError
from .game import ThetaParams

BINARY = "binary_linear_in_mean"
MULTINOMIAL = "multinomial_logit"
OVERLAPPING = "overlapping_groups"
KINDS = (BINARY, MULTINOMIAL, OVERLAPPING)


@dataclass(frozen=True)
class PayoffSpec:
    """Payoff intercept ``v1(X)`` and interaction slope ``v2(X)``.

    For the multinomial kind both evaluators return ``(N, K)`` arrays with
    one column per alternative; column 0 is the normalized baseline. For the
    overlapping kind ``memberships[i]`` lists the groups player ``i`` uses
    as reference groups.
    """

    kind: str
    v1: Callable
    v2: Callable
    memberships: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown payoff kind {self.kind!r}")
        if self.memberships is not None:
            object.__setattr__(
                self, "memberships", tuple(tuple(sorted(set(int(s) for s in m))) for m in self.memberships)
            )

    @classmethod
    def linear_in_means(cls, beta, phi):
        """Binary payoff with ``v1 = beta * x`` and constant slope ``phi``."""
        beta, phi = float(beta), float(phi)
        return cls(BINARY, lambda x: beta * np.asarray(x, dtype=np.float64),
                   lambda x: np.full(np.shape(x), phi))

    @classmethod
    def from_theta(cls, theta):
        return cls.linear_in_means(theta.beta, theta.phi)

    def intercept(self, x):
        return _evaluate(self.v1, x, "v1")

    def slope(self, x):
        return _evaluate(self.v2, x, "v2")


def _evaluate(fn, x, name):
    x = np.asarray(x, dtype=np.float64)
    out = np.asarray(fn(x), dtype=np.float64)
    if out.ndim == 0:
        out = np.full(x.shape, float(out))
    if out.shape[:1] != x.shape[:1]:
        raise DomainError(f"payoff evaluator {name} returned shape {out.shape} for {x.size} players")
    if not np.all(np.isfinite(out)):
        raise DomainError(f"payoff evaluator {name} returned nonfinite values")
    return np.array(out)


def as_payoff(obj):
    """Accept either a ``PayoffSpec`` or a ``ThetaParams`` point."""
    if isinstance(obj, PayoffSpec):
        return obj
    if isinstance(obj, ThetaParams):
        return PayoffSpec.from_theta(obj)
    raise TypeError(f"expected PayoffSpec or ThetaParams, got {type(obj).__name__}")


@dataclass(frozen=True, eq=False)
class RegretProfile:
    """Per-player regrets and the tail level ``rho_i`` each moment uses.

    ``lam`` is ``(N,)`` for binary actions and ``(N, K - 1)`` for multinomial
    ones, in which case ``alternatives[i]`` names the alternative behind each
    column of row ``i``.
    """

    lam: np.ndarray
    rho_i: np.ndarray
    alternatives: Optional[np.ndarray] = None

    def to_dict(self):
        out = {"lambda": self.lam.tolist(), "rho_i": self.rho_i.tolist()}
        if self.alternatives is not None:
            out["alternatives"] = self.alternatives.tolist()
        return out

    @classmethod
    def zeros_like(cls, profile):
        return cls(np.zeros_like(profile.lam), np.zeros_like(profile.rho_i), profile.alternatives)


def _check_rho(rho):
    if not 0.0 < rho < 1.0:
        raise DomainError(f"rho must lie in (0, 1), got {rho}")


def _rho_indicator(active, rho, n):
    # Sample-max convention: the level is spent only if some regret is positive.
    return np.full(n, rho if active else 0.0)


def _own_group_minus_one(data):
    sizes = data.size_of_own_group()
    if np.any(sizes < 2):
        raise DesignError("every group needs at least 2 players")
    return (sizes - 1).astype(np.float64)


def binary_regret(spec, data, rho, weights=None):
    """Regret for binary actions with a linear-in-means payoff.

    With equal weights ``1 / (N_s - 1)`` on the other members of a player's
    group the regret is ``|v2(X_i)| / sqrt(N_s - 1) * sqrt(-log(rho) / 2)``.
    ``weights`` may override this with an ``N x N`` matrix whose ``(i, j)``
    entry is the weight of player ``j`` in player ``i``'s payoff.
    """
    _check_rho(rho)
    spec = as_payoff(spec)
    slope = np.abs(spec.slope(data.covariates))
    root = math.sqrt(-0.5 * math.log(rho))
    if weights is None:
        lam = slope / np.sqrt(_own_group_minus_one(data)) * root
    else:
        w = np.array(weights, dtype=np.float64)
        if w.shape != (data.num_players,) * 2:
            raise DesignError(f"weights must be {data.num_players}x{data.num_players}")
        np.fill_diagonal(w, 0.0)
        lam = slope * np.sqrt(np.sum(w * w, axis=1)) * root
    return RegretProfile(lam, _rho_indicator(lam.max(initial=0.0) > 0, rho, lam.size))


def multinomial_regret(spec, data, rho, eta=linalg.DEFAULT_ETA, reference=None):
    """Vector regret for unordered multinomial actions.

    For player ``i`` in group ``s`` each other member ``j`` contributes the
    strategic-relevance vector ``|v2_k(X_i)| / (N_s - 1)`` over the
    alternatives ``k`` other than the reference. Their outer products sum to
    a matrix that is regularized with ``eta``; with its dominant eigenpair
    ``(psi, v)`` the regret is ``sqrt(-log(rho) / (2 psi)) * M v``.

    ``reference=None`` uses each player's own action as the reference; an
    integer fixes the reference alternative for everyone.
    """
    _check_rho(rho)
    if data.num_actions < 2:
        raise DesignError("need at least two alternatives")
    k = data.num_actions
    slopes = np.abs(spec.slope(data.covariates))
    if slopes.shape != (data.num_players, k):
        raise DesignError(f"v2 must return an (N, {k}) array, got {slopes.shape}")
    others = np.arange(k)
    refs = data.actions if reference is None else np.full(data.num_players, int(reference))
    alternatives = np.stack([others[others != r] for r in refs])
    counts = _own_group_minus_one(data).astype(np.int64)
    raw = np.empty((data.num_players, k - 1, k - 1))
    for i in range(data.num_players):
        m = counts[i]
        rows = np.broadcast_to(slopes[i, alternatives[i]] / m, (m, k - 1))
        raw[i] = linalg.outer_product_sum(rows)
    active = bool(np.any(raw > 0))
    reg = raw.copy()
    reg[reg == 0.0] = eta
    values, vectors = linalg.batched_perron_frobenius(reg)
    scale = np.sqrt(-math.log(rho) / (2.0 * values))
    lam = scale[:, None] * np.einsum("nab,nb->na", reg, vectors)
    return RegretProfile(lam, _rho_indicator(active, rho, data.num_players), alternatives)


def overlapping_regret(spec, data, theta_abs, rho):
    """Regret when players average peers over several reference groups.

    Player ``i`` puts weight ``(1/|S_i|) * sum_{s in S_i} 1{j in N_s, j != i} / (N_s - 1)``
    on player ``j``; the regret is ``|theta| * sqrt(-log(rho)/2 * sum_j weight_j^2)``.
    The squared norm is computed from group overlap counts, so the cost is
    quadratic in the number of groups a player belongs to, not in ``N``.
    """
    _check_rho(rho)
    members = spec.memberships
    if members is None or len(members) != data.num_players:
        raise DesignError("overlapping regrets need one membership set per player")
    if any(len(m) == 0 for m in members):
        raise DesignError("every player needs at least one reference group")
    num_sets = 1 + max(max(m) for m in members)
    incidence = np.zeros((data.num_players, num_sets))
    for i, m in enumerate(members):
        incidence[i, list(m)] = 1.0
    sizes = incidence.sum(axis=0)
    overlap = incidence.T @ incidence
    used = sorted({s for m in members for s in m})
    if np.any(sizes[used] < 2):
        raise DesignError("every reference group needs at least 2 members")
    inv = np.zeros(num_sets)
    inv[used] = 1.0 / (sizes[used] - 1.0)
    sq = np.empty(data.num_players)
    for i, m in enumerate(members):
        idx = np.array(m)
        block = (overlap[np.ix_(idx, idx)] - 1.0) * np.outer(inv[idx], inv[idx])
        sq[i] = block.sum() / len(m) ** 2
    lam = abs(float(theta_abs)) * np.sqrt(-0.5 * math.log(rho) * sq)
    return RegretProfile(lam, _rho_indicator(lam.max(initial=0.0) > 0, rho, lam.size))

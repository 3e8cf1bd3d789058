"""Probability bounds, maximal variations, slack vectors and the test statistic.

For binary actions the regret-adjusted bounds on a player's choice
probability are

    pi_U = G(v1 + v2 * Ybar_{-i} + lam),   pi_L = 1 - G(v1 + v2 * Ybar_{-i} - lam),

with ``Ybar_{-i}`` the leave-one-out group mean of the actions. Residuals
against these bounds are averaged against nonnegative instruments, and a
concentration slack ``w`` absorbs the dependence of the bounds on other
players' actions.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import expit, ndtr
from scipy.stats import logistic, norm

from . import linalg
from .errors import DomainError
from .regret import RegretProfile, as_payoff, binary_regret


@dataclass(frozen=True)
class Link:
    """CDF of the payoff shock together with its density."""

    name: str
    cdf: Callable
    pdf: Callable


PROBIT = Link("probit", ndtr, norm.pdf)
LOGIT = Link("logit", expit, logistic.pdf)
LINKS = {"probit": PROBIT, "logit": LOGIT}


def _one(x):
    return np.ones_like(x)


def _abs(x):
    return np.abs(x)


def _nonneg(x):
    return (x >= 0).astype(np.float64)


def _abs_plus_nonneg(x):
    return np.abs(x) + (x >= 0)


INSTRUMENTS = {"one": _one, "abs": _abs, "nonneg": _nonneg, "abs_plus_nonneg": _abs_plus_nonneg}
DEFAULT_INSTRUMENTS = ("one", "abs", "nonneg", "abs_plus_nonneg")


@dataclass(frozen=True)
class InstrumentSet:
    """Nonnegative functions ``g_1..g_L`` of the scalar covariate."""

    functions: tuple
    names: tuple

    @classmethod
    def from_names(cls, names=DEFAULT_INSTRUMENTS):
        unknown = [n for n in names if n not in INSTRUMENTS]
        if unknown:
            raise DomainError(f"unknown instruments {unknown}; choose from {sorted(INSTRUMENTS)}")
        if not names:
            raise DomainError("need at least one instrument")
        return cls(tuple(INSTRUMENTS[n] for n in names), tuple(names))

    @classmethod
    def default(cls):
        return cls.from_names(DEFAULT_INSTRUMENTS)

    def __len__(self):
        return len(self.functions)

    def evaluate(self, x):
        """``(N, L)`` matrix of instrument values."""
        x = np.asarray(x, dtype=np.float64)
        g = np.column_stack([np.broadcast_to(np.asarray(f(x), dtype=np.float64), x.shape) for f in self.functions])
        if np.any(g < 0) or not np.all(np.isfinite(g)):
            raise DomainError("instruments must be finite and nonnegative")
        return g


def _instrument_matrix(instruments, data):
    if instruments is None:
        instruments = InstrumentSet.default()
    if isinstance(instruments, InstrumentSet):
        return instruments.evaluate(data.covariates)
    g = np.asarray(instruments, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] != data.num_players:
        raise DomainError("instrument matrix must be (N, L)")
    return g


def _snap(p):
    # Round p so that 1 - p is exact; then p + (1 - p) == 1 holds bitwise.
    return 1.0 - (1.0 - p)


def leave_one_out_mean(data):
    """Mean action of the other members of each player's group."""
    totals = np.bincount(data.group_of, weights=data.actions.astype(np.float64), minlength=data.num_groups)
    return (totals[data.group_of] - data.actions) / (data.size_of_own_group() - 1.0)


def leave_one_out_shares(data):
    """``(N, K)`` share of each alternative among the other group members."""
    k = data.num_actions
    counts = np.zeros((data.num_groups, k))
    np.add.at(counts, (data.group_of, data.actions), 1.0)
    own = np.zeros((data.num_players, k))
    own[np.arange(data.num_players), data.actions] = 1.0
    return (counts[data.group_of] - own) / (data.size_of_own_group() - 1.0)[:, None]


def pi_bounds(data, theta, regrets, link=PROBIT):
    """Upper and lower regret-adjusted bounds for binary actions.

    ``theta`` is a ``ThetaParams`` point or a ``PayoffSpec``. Returns
    ``(pi_U, pi_L)``; with zero regret ``pi_U + pi_L == 1`` exactly.
    """
    payoff = as_payoff(theta)
    index = payoff.intercept(data.covariates) + payoff.slope(data.covariates) * leave_one_out_mean(data)
    lam = regrets.lam
    pi_u = _snap(link.cdf(index + lam))
    pi_l = 1.0 - link.cdf(index - lam)
    return pi_u, pi_l


def logit_pi_bounds(data, theta, regrets):
    """Per-alternative bounds for unordered choices with logit shocks.

    ``theta`` must be a multinomial ``PayoffSpec``; ``regrets`` must use
    alternative 0 as the common reference, so column ``k - 1`` of
    ``regrets.lam`` shifts alternative ``k``. Returns ``(pi_U, pi_L)`` of
    shape ``(N, K - 1)`` for alternatives ``1..K-1``, where ``pi_U`` is the
    choice probability with every exponent raised by its regret and
    ``1 - pi_L`` the one with every exponent lowered.
    """
    payoff = as_payoff(theta)
    k = data.num_actions
    v1 = payoff.intercept(data.covariates)[:, 1:]
    v2 = payoff.slope(data.covariates)[:, 1:]
    shares = leave_one_out_shares(data)[:, 1:]
    if regrets.alternatives is not None and not np.all(regrets.alternatives == np.arange(1, k)):
        raise DomainError("logit bounds need regrets computed against alternative 0")
    lam = regrets.lam.reshape(data.num_players, k - 1)
    base = v1 + v2 * shares

    def probs(expo):
        top = np.maximum(expo.max(axis=1, keepdims=True), 0.0)
        e = np.exp(expo - top)
        return e / (np.exp(-top) + e.sum(axis=1, keepdims=True))

    pi_u = _snap(probs(base + lam))
    pi_l = 1.0 - probs(base - lam)
    return pi_u, pi_l


def variation_argmax(delta, a, b, n):
    """Point of ``[a, b]`` maximizing ``|G(z + delta/(n-1)) - G(z)|``.

    For a symmetric quasiconcave density the unconstrained maximizer is
    ``-delta / (2 (n - 1))``; on an interval it is that point clipped.
    """
    return np.clip(-np.asarray(delta) / (2.0 * (np.asarray(n) - 1.0)), a, b)


def bound_variations(data, theta, regrets, link=PROBIT):
    """Largest change of each player's upper and lower bound caused by one
    other group member switching action. Returns ``(a_L, a_U)`` per player."""
    payoff = as_payoff(theta)
    v1 = payoff.intercept(data.covariates)
    v2 = payoff.slope(data.covariates)
    n = data.size_of_own_group().astype(np.float64)
    step = v2 / (n - 1.0)
    h = v2 * (n - 2.0) / (n - 1.0)
    out = []
    for base in (v1 - regrets.lam, v1 + regrets.lam):
        z = variation_argmax(v2, np.minimum(base, base + h), np.maximum(base, base + h), n)
        out.append(np.abs(link.cdf(z + step) - link.cdf(z)))
    return out[0], out[1]


def _spread_within_groups(data, weights):
    # d_j = (1/N) * sum over i in j's group, i != j, of weights_i.
    sums = np.zeros((data.num_groups, weights.shape[1]))
    np.add.at(sums, data.group_of, weights)
    return (sums[data.group_of] - weights) / data.num_players


def maximal_variations(data, theta, regrets, instruments=None, link=PROBIT):
    """Per-player maximal variations ``(d_L, d_U)`` of the averaged moments.

    Entry ``(j, l)`` bounds how much player ``j`` changing action can move
    the ``l``-th averaged bound. Players only affect members of their own
    group, so each column is a within-group sum that excludes ``j``.
    """
    g = _instrument_matrix(instruments, data)
    a_l, a_u = bound_variations(data, theta, regrets, link)
    inv = 1.0 / (1.0 - regrets.rho_i)
    d_l = _spread_within_groups(data, (a_l * inv)[:, None] * g)
    d_u = _spread_within_groups(data, (a_u * inv)[:, None] * g)
    return d_l, d_u


@dataclass(frozen=True)
class Slack:
    """Slack vector with the regularized variation matrix and its eigenpair."""

    w: np.ndarray
    delta: float
    matrix: np.ndarray
    raw: np.ndarray
    vector: np.ndarray


def slack_vector(d, tau, eta=linalg.DEFAULT_ETA):
    """Slack ``sqrt(-log(tau/2) / (2 delta)) * D r`` for one side.

    ``D`` is ``sum_j d_j d_j^T`` with exact zeros replaced by ``eta`` and
    ``(delta, r)`` its dominant eigenpair.
    """
    if not 0.0 < tau < 1.0:
        raise DomainError(f"tau must lie in (0, 1), got {tau}")
    raw = linalg.outer_product_sum(d)
    mat = linalg.regularize(raw, eta)
    pair = linalg.perron_frobenius(mat)
    w = math.sqrt(-math.log(tau / 2.0) / (2.0 * pair.value)) * (mat @ pair.vector)
    return Slack(w, pair.value, mat, raw, pair.vector)


def slack_vectors(d_l, d_u, tau, eta=linalg.DEFAULT_ETA):
    """Return ``(w_L, w_U, delta_L, delta_U)``."""
    lo = slack_vector(d_l, tau, eta)
    up = slack_vector(d_u, tau, eta)
    return lo.w, up.w, lo.delta, up.delta


def _check_levels(rho_i):
    if np.any(rho_i >= 1.0):
        raise DomainError("rho_i must be below 1")


def column_means(a):
    """Column means with pairwise summation along each contiguous column."""
    cols = np.ascontiguousarray(np.asarray(a, dtype=np.float64).T)
    return np.add.reduce(cols, axis=1) / cols.shape[1]


def moment_residuals(data, pi_u, pi_l, regrets):
    """Residuals ``r_U = 1{Y=1} - pi_U / (1 - rho_i)`` and
    ``r_L = 1{Y=1} - (1 - pi_L / (1 - rho_i))``."""
    _check_levels(regrets.rho_i)
    y = (data.actions == 1).astype(np.float64)
    keep = 1.0 - regrets.rho_i
    return y - pi_u / keep, y - (1.0 - pi_l / keep)


def moment_stats(data, pi_u, pi_l, regrets, instruments=None):
    """Averaged moments ``(l_U, l_L)``, each of length ``L``."""
    g = _instrument_matrix(instruments, data)
    r_u, r_l = moment_residuals(data, pi_u, pi_l, regrets)
    return column_means(r_u[:, None] * g), column_means(r_l[:, None] * g)


def kronecker_rows(r, g):
    """Row-wise Kronecker product: alternatives outer, instruments inner."""
    r = np.asarray(r, dtype=np.float64)
    if r.ndim == 1:
        r = r[:, None]
    return (r[:, :, None] * g[:, None, :]).reshape(r.shape[0], -1)


def multinomial_residuals(data, pi_u, pi_l, regrets):
    """``(N, K - 1)`` residuals for alternatives ``1..K-1``."""
    _check_levels(regrets.rho_i)
    k = data.num_actions
    pi_u = np.asarray(pi_u, dtype=np.float64).reshape(data.num_players, k - 1)
    pi_l = np.asarray(pi_l, dtype=np.float64).reshape(data.num_players, k - 1)
    y = (data.actions[:, None] == np.arange(1, k)[None, :]).astype(np.float64)
    keep = (1.0 - regrets.rho_i)[:, None]
    return y - pi_u / keep, y - (1.0 - pi_l / keep)


def multinomial_moment_stats(data, pi_u, pi_l, regrets, instruments=None):
    """Moments of length ``L (K - 1)``, alternative-major then instrument."""
    g = _instrument_matrix(instruments, data)
    r_u, r_l = multinomial_residuals(data, pi_u, pi_l, regrets)
    return column_means(kronecker_rows(r_u, g)), column_means(kronecker_rows(r_l, g))


def test_statistic(l_u, l_l, w_u, w_l, n):
    """``N * |[l_U - w_U]_+ + [l_L + w_L]_-|^2`` with ``[x]_- = max(-x, 0)``."""
    l_u, l_l, w_u, w_l = (np.asarray(v, dtype=np.float64) for v in (l_u, l_l, w_u, w_l))
    if not (l_u.shape == l_l.shape == w_u.shape == w_l.shape):
        raise DomainError("moment and slack vectors must have equal length")
    gap = np.maximum(l_u - w_u, 0.0) + np.maximum(-(l_l + w_l), 0.0)
    return float(n * (gap @ gap))


test_statistic.__test__ = False  # keep pytest from collecting it


def tau_theta(delta_u, delta_l, tau):
    """Share of the slack level spent: ``tau/2`` per positive eigenvalue."""
    if delta_u < 0 or delta_l < 0:
        raise DomainError("eigenvalues must be nonnegative")
    return 0.5 * tau * (float(delta_u > 0) + float(delta_l > 0))


@dataclass(frozen=True, eq=False)
class MomentSystem:
    """Everything computed at one parameter point."""

    pi_U: np.ndarray
    pi_L: np.ndarray
    r_U: np.ndarray
    r_L: np.ndarray
    l_U: np.ndarray
    l_L: np.ndarray
    d_L: np.ndarray
    d_U: np.ndarray
    D_L: np.ndarray
    D_U: np.ndarray
    w_L: np.ndarray
    w_U: np.ndarray
    delta_L: float
    delta_U: float
    T: float
    tau_theta: float
    regrets: RegretProfile
    instruments: np.ndarray
    ignore_regret: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def num_players(self):
        return self.r_U.shape[0]

    def negligibility(self):
        """Per-instrument sums ``sum_j d_L^2 + d_U^2``."""
        return np.sum(self.d_L**2 + self.d_U**2, axis=0)

    def to_dict(self):
        return {
            "l_U": self.l_U.tolist(),
            "l_L": self.l_L.tolist(),
            "w_U": self.w_U.tolist(),
            "w_L": self.w_L.tolist(),
            "delta_U": self.delta_U,
            "delta_L": self.delta_L,
            "T": self.T,
            "tau_theta": self.tau_theta,
            "negligibility": self.negligibility().tolist(),
            "ignore_regret": self.ignore_regret,
        }


def evaluate_moments(data, theta, instruments=None, *, eta=linalg.DEFAULT_ETA, link=PROBIT,
                     ignore_regret=False, regrets: Optional[RegretProfile] = None):
    """Build the full moment system for binary actions at ``theta``.

    With ``ignore_regret`` the regrets, the levels ``rho_i`` and the slack
    vectors are set to zero; everything else is computed as usual.
    """
    payoff = as_payoff(theta)
    g = _instrument_matrix(instruments, data)
    if regrets is None:
        regrets = binary_regret(payoff, data, theta.rho)
    if ignore_regret:
        regrets = RegretProfile.zeros_like(regrets)
    pi_u, pi_l = pi_bounds(data, payoff, regrets, link)
    r_u, r_l = moment_residuals(data, pi_u, pi_l, regrets)
    l_u = column_means(r_u[:, None] * g)
    l_l = column_means(r_l[:, None] * g)
    d_l, d_u = maximal_variations(data, payoff, regrets, g, link)
    lo = slack_vector(d_l, theta.tau, eta)
    up = slack_vector(d_u, theta.tau, eta)
    w_l, w_u = (np.zeros_like(lo.w), np.zeros_like(up.w)) if ignore_regret else (lo.w, up.w)
    t = test_statistic(l_u, l_l, w_u, w_l, data.num_players)
    return MomentSystem(
        pi_U=pi_u, pi_L=pi_l, r_U=r_u, r_L=r_l, l_U=l_u, l_L=l_l,
        d_L=d_l, d_U=d_u, D_L=lo.matrix, D_U=up.matrix, w_L=w_l, w_U=w_u,
        delta_L=lo.delta, delta_U=up.delta, T=t,
        tau_theta=tau_theta(up.delta, lo.delta, theta.tau),
        regrets=regrets, instruments=g, ignore_regret=ignore_regret,
    )

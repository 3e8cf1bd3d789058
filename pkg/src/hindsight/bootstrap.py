"""Wild-bootstrap critical values and confidence sets by test inversion.

Two resampling schemes are available. The benchmark scheme resamples the
centered instrument-weighted actions and does not depend on the parameter;
the modified scheme resamples the moment residuals at each parameter point.
"""

import csv
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import linalg, rng
from .errors import ConfigError
from .game import ThetaParams
from .moments import (
    DEFAULT_INSTRUMENTS,
    LINKS,
    InstrumentSet,
    evaluate_moments,
    kronecker_rows,
)

METHODS = ("benchmark", "modified", "ignore_regret")
NEGLIGIBILITY_THRESHOLD = 0.05


class NegligibilityWarning(UserWarning):
    """Variation sums too large to trust modified-bootstrap levels."""


@dataclass(frozen=True)
class BootstrapConfig:
    """Bootstrap and inversion settings.

    ``method="ignore_regret"`` means modified resampling with regrets,
    their levels and the slack vectors set to zero. ``ignore_regret=True``
    applies the same zeroing to any method, e.g. the benchmark.
    """

    B: int = 1000
    alpha: float = 0.05
    epsilon_floor: float = 0.001
    method: str = "modified"
    seed: int = 0
    ignore_regret: bool = False
    redraw: bool = False
    eta: float = linalg.DEFAULT_ETA
    link: str = "probit"
    instruments: tuple = DEFAULT_INSTRUMENTS

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if int(self.B) != self.B or self.B < 1:
            raise ConfigError(f"B must be a positive integer, got {self.B}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.epsilon_floor > 0:
            raise ConfigError("epsilon_floor must be positive")
        if not self.eta > 0:
            raise ConfigError("eta must be positive")
        if self.link not in LINKS:
            raise ConfigError(f"link must be one of {sorted(LINKS)}")
        object.__setattr__(self, "B", int(self.B))
        object.__setattr__(self, "seed", rng.check_seed(self.seed))
        object.__setattr__(self, "instruments", tuple(self.instruments))
        InstrumentSet.from_names(self.instruments)

    @property
    def resampling(self):
        return "benchmark" if self.method == "benchmark" else "modified"

    @property
    def regrets_ignored(self):
        return self.ignore_regret or self.method == "ignore_regret"

    def instrument_set(self):
        return InstrumentSet.from_names(self.instruments)


def multipliers(num_players, config, key=()):
    """``(N, B)`` standard normal multipliers from the config's stream."""
    gen = rng.substream(config.seed, rng.MULTIPLIERS, *key)
    return gen.standard_normal((num_players, config.B))


def benchmark_scores(data, instruments=None):
    """Centered ``1{Y = a} g(X)`` for alternatives ``a = 1..K-1``, Kronecker-stacked."""
    if instruments is None:
        instruments = InstrumentSet.default()
    g = instruments.evaluate(data.covariates) if isinstance(instruments, InstrumentSet) else np.asarray(instruments)
    y = (data.actions[:, None] == np.arange(1, data.num_actions)[None, :]).astype(np.float64)
    z = kronecker_rows(y, g)
    return z - z.mean(axis=0)


def benchmark_stats(data, instruments=None, config=None, eps=None):
    """Benchmark statistics ``|N^{-1/2} sum_i Z_i eps_ib|^2``, one per draw."""
    config = config or BootstrapConfig()
    if eps is None:
        eps = multipliers(data.num_players, config)
    z = benchmark_scores(data, instruments)
    s = (z.T @ eps) / math.sqrt(data.num_players)
    return np.sum(s * s, axis=0)


def modified_stats(moment_system, eps):
    """Modified statistics ``N |[l*_U]_+ + [l*_L]_-|^2`` from residual multipliers."""
    g = moment_system.instruments
    n = moment_system.num_players
    stacked = np.hstack([moment_system.r_U[:, None] * g, moment_system.r_L[:, None] * g])
    star = (stacked.T @ eps) / n
    ell = g.shape[1]
    gap = np.maximum(star[:ell], 0.0) + np.maximum(-star[ell:], 0.0)
    return n * np.sum(gap * gap, axis=0)


def critical_value(stats, alpha, tau_theta=0.0):
    """The ``ceil((1 - alpha + tau_theta) * B)``-th order statistic."""
    stats = np.sort(np.asarray(stats, dtype=np.float64))
    level = 1.0 - alpha + tau_theta
    if not 0.0 < level <= 1.0 + 1e-12:
        raise ConfigError(f"quantile level {level} is outside (0, 1]")
    b = stats.size
    # Guard the ceiling against representation error in level * B.
    k = math.ceil(round(level * b, 9))
    return float(stats[min(max(k, 1), b) - 1])


def negligibility_diagnostic(moment_system):
    """Per-instrument sums ``sum_j (d_L^2 + d_U^2)``."""
    return moment_system.negligibility()


def check_negligibility(sums, threshold=NEGLIGIBILITY_THRESHOLD):
    """Warn when the largest variation sum exceeds ``threshold``."""
    top = float(np.max(sums)) if np.size(sums) else 0.0
    if top > threshold:
        warnings.warn(
            f"variation sum {top:.4g} exceeds {threshold}; modified-bootstrap levels may be unreliable",
            NegligibilityWarning,
            stacklevel=2,
        )
    return top


@dataclass(frozen=True, eq=False)
class InferenceResult:
    """Test outcomes over a parameter grid.

    For profiled results the non-target coordinate holds the nuisance value
    that minimizes the statistic.
    """

    beta: np.ndarray
    phi: np.ndarray
    T: np.ndarray
    crit: np.ndarray
    accept: np.ndarray
    tau_theta: np.ndarray
    method: str
    epsilon_floor: float
    kind: str = "joint"
    ignore_regret: bool = False
    negligibility: list = field(default_factory=list)

    def rows(self):
        for k in range(self.T.size):
            yield {
                "beta": float(self.beta[k]),
                "phi": float(self.phi[k]),
                "T": float(self.T[k]),
                "crit": float(self.crit[k]),
                "accept": int(bool(self.accept[k])),
                "tau_theta": float(self.tau_theta[k]),
            }

    def accepted(self):
        return [(float(b), float(p)) for b, p, a in zip(self.beta, self.phi, self.accept) if a]

    def to_dict(self):
        return {
            "kind": self.kind,
            "method": self.method,
            "ignore_regret": self.ignore_regret,
            "epsilon_floor": self.epsilon_floor,
            "rows": list(self.rows()),
            "negligibility": [np.asarray(v).tolist() for v in self.negligibility],
        }

    def write_csv(self, path):
        from .io import format_float

        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["beta", "phi", "T", "crit", "accept", "tau_theta"])
            for row in self.rows():
                writer.writerow([
                    format_float(row["beta"]), format_float(row["phi"]), format_float(row["T"]),
                    format_float(row["crit"]), row["accept"], format_float(row["tau_theta"]),
                ])


def theta_grid(base, betas=None, phis=None):
    """Cartesian grid of parameter points sharing ``base``'s nuisance values."""
    betas = [base.beta] if betas is None else list(betas)
    phis = [base.phi] if phis is None else list(phis)
    return [replace(base, beta=float(b), phi=float(p)) for b in betas for p in phis]


class _Evaluator:
    """Shares multipliers and benchmark draws across parameter points."""

    def __init__(self, data, config):
        self.data = data
        self.config = config
        self.instruments = config.instrument_set()
        self.link = LINKS[config.link]
        self._eps = None
        self._bench = None
        self._count = 0

    def eps(self):
        if self.config.redraw:
            self._count += 1
            return multipliers(self.data.num_players, self.config, (self._count,))
        if self._eps is None:
            self._eps = multipliers(self.data.num_players, self.config)
        return self._eps

    def bench(self):
        if self.config.redraw:
            return benchmark_stats(self.data, self.instruments, self.config, self.eps())
        if self._bench is None:
            self._bench = benchmark_stats(self.data, self.instruments, self.config, self.eps())
        return self._bench

    def point(self, theta):
        ms = evaluate_moments(
            self.data, theta, self.instruments, eta=self.config.eta, link=self.link,
            ignore_regret=self.config.regrets_ignored,
        )
        if self.config.resampling == "benchmark":
            stats = self.bench()
        else:
            stats = modified_stats(ms, self.eps())
        crit = critical_value(stats, self.config.alpha, ms.tau_theta)
        return ms, crit


def confidence_set(data, theta_grid, instruments=None, config=None):
    """Test every point of ``theta_grid`` and collect the accepted ones.

    A point is accepted iff ``T <= max(crit, epsilon_floor)``.
    ``instruments`` overrides the instrument names in ``config``.
    """
    config = config or BootstrapConfig()
    if instruments is not None:
        config = replace(config, instruments=tuple(instruments.names if isinstance(instruments, InstrumentSet) else instruments))
    grid = list(theta_grid)
    if not grid:
        raise ConfigError("the parameter grid is empty")
    ev = _Evaluator(data, config)
    cols = {k: [] for k in ("beta", "phi", "T", "crit", "tau")}
    neg = []
    for theta in grid:
        ms, crit = ev.point(theta)
        cols["beta"].append(theta.beta)
        cols["phi"].append(theta.phi)
        cols["T"].append(ms.T)
        cols["crit"].append(crit)
        cols["tau"].append(ms.tau_theta)
        neg.append(ms.negligibility())
    t = np.array(cols["T"])
    crit = np.array(cols["crit"])
    return InferenceResult(
        beta=np.array(cols["beta"]), phi=np.array(cols["phi"]), T=t, crit=crit,
        accept=t <= np.maximum(crit, config.epsilon_floor), tau_theta=np.array(cols["tau"]),
        method=config.method, epsilon_floor=config.epsilon_floor, kind="joint",
        ignore_regret=config.regrets_ignored, negligibility=neg,
    )


def profile_cs(data, target, target_grid, nuisance_grid, base, instruments=None, config=None):
    """Confidence set for one coordinate, profiling out the other.

    ``target`` is ``"phi"`` or ``"beta"``. At each target value both the
    statistic and the critical value are minimized over ``nuisance_grid``
    before comparing them.
    """
    if target not in ("phi", "beta"):
        raise ConfigError(f"target must be 'phi' or 'beta', got {target!r}")
    other = "beta" if target == "phi" else "phi"
    config = config or BootstrapConfig()
    if instruments is not None:
        config = replace(config, instruments=tuple(instruments.names if isinstance(instruments, InstrumentSet) else instruments))
    values = [float(v) for v in target_grid]
    nuisance = [float(v) for v in nuisance_grid]
    if not values or not nuisance:
        raise ConfigError("both grids must be nonempty")
    ev = _Evaluator(data, config)
    out = {k: [] for k in ("best", "T", "crit", "tau")}
    neg = []
    for v in values:
        ts, cs, taus, sums = [], [], [], []
        for u in nuisance:
            ms, crit = ev.point(replace(base, **{target: v, other: u}))
            ts.append(ms.T)
            cs.append(crit)
            taus.append(ms.tau_theta)
            sums.append(ms.negligibility())
        k = int(np.argmin(ts))
        out["best"].append(nuisance[k])
        out["T"].append(ts[k])
        out["crit"].append(min(cs))
        out["tau"].append(taus[k])
        neg.append(np.max(sums, axis=0))
    t = np.array(out["T"])
    crit = np.array(out["crit"])
    cols = {target: np.array(values), other: np.array(out["best"])}
    return InferenceResult(
        beta=cols["beta"], phi=cols["phi"], T=t, crit=crit,
        accept=t <= np.maximum(crit, config.epsilon_floor), tau_theta=np.array(out["tau"]),
        method=config.method, epsilon_floor=config.epsilon_floor, kind=f"profile_{target}",
        ignore_regret=config.regrets_ignored, negligibility=neg,
    )


def subvector_cs(data, phi_grid, beta_grid, base, instruments=None, config=None):
    """Confidence set for ``phi`` with ``beta`` profiled over ``beta_grid``.

    ``beta`` in the result holds the nuisance value minimizing the
    statistic at each ``phi``.
    """
    return profile_cs(data, "phi", phi_grid, beta_grid, base, instruments, config)


def accepts(data, theta, config, eps=None, bench=None):
    """Single-point test returning ``(accepted, T, crit, moment_system)``."""
    ev = _Evaluator(data, config)
    if eps is not None:
        ev._eps = eps
    if bench is not None:
        ev._bench = bench
    ms, crit = ev.point(theta)
    return ms.T <= max(crit, config.epsilon_floor), ms.T, crit, ms


__all__ = [
    "BootstrapConfig", "InferenceResult", "NegligibilityWarning", "ThetaParams",
    "benchmark_scores", "benchmark_stats", "modified_stats", "critical_value",
    "confidence_set", "subvector_cs", "profile_cs", "negligibility_diagnostic", "check_negligibility",
    "theta_grid", "multipliers", "accepts",
]

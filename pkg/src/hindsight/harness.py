"""Monte Carlo experiments: coverage tables, false-coverage curves and
finite-sample checks of the regret and slack guarantees.

Replications are the unit of parallel work. Every replication draws from
substreams keyed by its index, and results are gathered in index order, so
reports do not depend on the number of workers.
"""

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import ndtr
from threadpoolctl import threadpool_limits

from . import rng
from .bootstrap import BootstrapConfig, accepts, benchmark_stats, multipliers, profile_cs
from .errors import ConfigError
from .game import DGPOptions, GameDesign, ThetaParams, simulate_game
from .io import write_table
from .moments import InstrumentSet, evaluate_moments, leave_one_out_mean
from .regret import binary_regret

COVERAGE_COLUMNS = ("S", "N_s", "phi0", "method", "level", "coverage", "se", "runtime_s")
CURVE_COLUMNS = ("S", "N_s", "phi0", "method", "level", "axis", "value", "coverage", "se", "runtime_s")


@dataclass(frozen=True)
class ExperimentSpec:
    """A grid of Monte Carlo cells and the settings shared by all of them."""

    designs: tuple = ((10, 100),)
    phi0: tuple = (0.0,)
    methods: tuple = ("benchmark", "modified")
    level: float = 0.95
    reps: int = 500
    B: int = 500
    beta0: float = 1.0
    gamma: float = 1.0 / 3.0
    rho: float = 0.01
    tau: float = 0.01
    eta: float = 1e-16
    epsilon_floor: float = 0.001
    ignore_regret: bool = False
    redraw: bool = False
    instruments: tuple = ("one", "abs", "nonneg", "abs_plus_nonneg")
    seed: int = 0
    workers: int = 1
    shift: float = -0.2
    selection: str = "smallest"
    nuisance_halfwidth: float = 1.0
    nuisance_points: int = 21
    negligibility_threshold: float = 0.05

    def __post_init__(self):
        designs = tuple((int(s), int(n)) for s, n in self.designs)
        if not designs:
            raise ConfigError("need at least one (S, N_s) design")
        object.__setattr__(self, "designs", designs)
        object.__setattr__(self, "phi0", tuple(float(p) for p in self.phi0))
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "instruments", tuple(self.instruments))
        if not self.phi0:
            raise ConfigError("need at least one phi0 value")
        if int(self.reps) != self.reps or self.reps < 1:
            raise ConfigError(f"reps must be a positive integer, got {self.reps}")
        if int(self.B) != self.B or self.B < 1:
            raise ConfigError(f"B must be a positive integer, got {self.B}")
        if not 0.0 < self.level < 1.0:
            raise ConfigError(f"level must lie in (0, 1), got {self.level}")
        if int(self.workers) != self.workers or self.workers < 1:
            raise ConfigError("workers must be a positive integer")
        if self.nuisance_points < 1:
            raise ConfigError("nuisance_points must be positive")
        for s, n in designs:
            if s < 1 or n < 2:
                raise ConfigError(f"invalid design S={s}, N_s={n}")
        object.__setattr__(self, "seed", rng.check_seed(self.seed))
        for m in self.methods:
            self.bootstrap_config(m)
        ThetaParams(self.beta0, 0.0, self.gamma, self.rho, self.tau)

    def theta0(self, phi0):
        return ThetaParams(self.beta0, phi0, self.gamma, self.rho, self.tau)

    def dgp(self):
        return DGPOptions(shift=self.shift, selection=self.selection)

    def bootstrap_config(self, method, rep=0):
        return BootstrapConfig(
            B=self.B, alpha=1.0 - self.level, epsilon_floor=self.epsilon_floor, method=method,
            seed=rng.derive_seed(self.seed, rng.MULTIPLIERS, rep), ignore_regret=self.ignore_regret,
            redraw=self.redraw, eta=self.eta, instruments=self.instruments,
        )

    def nuisance_grid(self, center):
        return np.linspace(center - self.nuisance_halfwidth, center + self.nuisance_halfwidth,
                           self.nuisance_points)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True, eq=False)
class CoverageReport:
    """Rows of acceptance frequencies with Monte Carlo standard errors."""

    columns: tuple
    rows: list
    extra: dict = field(default_factory=dict)

    def write_csv(self, path):
        write_table(path, self.columns, self.rows)

    def lookup(self, **keys):
        return [r for r in self.rows if all(r[k] == v for k, v in keys.items())]

    def to_dict(self):
        return {"columns": list(self.columns), "rows": self.rows, **self.extra}


def binomial_se(p, n):
    return math.sqrt(p * (1.0 - p) / n)


def _map(fn, tasks, workers):
    """Ordered map over tasks; process pool when ``workers > 1``."""
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    chunk = max(1, len(tasks) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=chunk))


def _simulate(spec, sizes, phi0, rep):
    design = GameDesign(sizes, spec.seed)
    return simulate_game(spec.theta0(phi0), design, spec.dgp(), replication=rep)


def _coverage_task(args):
    spec, design, phi0, rep = args
    with threadpool_limits(limits=1):
        data = _simulate(spec, (design[1],) * design[0], phi0, rep).public()
        theta = spec.theta0(phi0)
        base = spec.bootstrap_config(spec.methods[0], rep)
        eps = multipliers(data.num_players, base)
        bench = None
        out = {}
        for method in spec.methods:
            config = spec.bootstrap_config(method, rep)
            if config.resampling == "benchmark" and bench is None:
                bench = benchmark_stats(data, config.instrument_set(), config, eps)
            ok, t, crit, ms = accepts(data, theta, config, eps=eps, bench=bench)
            out[method] = (bool(ok), float(np.max(ms.negligibility())))
    return out


def run_coverage(spec):
    """Acceptance frequency of the true parameter in every cell and method."""
    rows = []
    for design in spec.designs:
        for phi0 in spec.phi0:
            start = time.perf_counter()
            tasks = [(spec, design, phi0, r) for r in range(spec.reps)]
            results = _map(_coverage_task, tasks, spec.workers)
            elapsed = time.perf_counter() - start
            for method in spec.methods:
                hits = sum(res[method][0] for res in results)
                p = hits / spec.reps
                rows.append({
                    "S": design[0], "N_s": design[1], "phi0": phi0, "method": method,
                    "level": spec.level, "coverage": p, "se": binomial_se(p, spec.reps),
                    "runtime_s": round(elapsed, 3),
                })
    return CoverageReport(COVERAGE_COLUMNS, rows)


def _curve_task(args):
    spec, design, phi0, rep, axis, values = args
    with threadpool_limits(limits=1):
        data = _simulate(spec, (design[1],) * design[0], phi0, rep).public()
        theta0 = spec.theta0(phi0)
        center = theta0.beta if axis == "phi" else theta0.phi
        nuisance = spec.nuisance_grid(center)
        out = {}
        for method in spec.methods:
            config = spec.bootstrap_config(method, rep)
            res = profile_cs(data, axis, values, nuisance, theta0, config=config)
            out[method] = res.accept.astype(bool).tolist()
    return out


def run_power_curve(spec, theta_axis, axis="phi"):
    """False-coverage frequencies along ``theta_axis``.

    For each hypothesized value of ``axis`` (``"phi"`` or ``"beta"``) the
    profiled confidence set is computed with the other coordinate on the
    experiment's nuisance grid, and the frequency of covering the value is
    reported.
    """
    if axis not in ("phi", "beta"):
        raise ConfigError(f"axis must be 'phi' or 'beta', got {axis!r}")
    values = [float(v) for v in theta_axis]
    if not values:
        raise ConfigError("theta_axis is empty")
    rows = []
    for design in spec.designs:
        for phi0 in spec.phi0:
            start = time.perf_counter()
            tasks = [(spec, design, phi0, r, axis, values) for r in range(spec.reps)]
            results = _map(_curve_task, tasks, spec.workers)
            elapsed = time.perf_counter() - start
            for method in spec.methods:
                hits = np.sum([res[method] for res in results], axis=0)
                for v, h in zip(values, hits):
                    p = float(h) / spec.reps
                    rows.append({
                        "S": design[0], "N_s": design[1], "phi0": phi0, "method": method,
                        "level": spec.level, "axis": axis, "value": v, "coverage": p,
                        "se": binomial_se(p, spec.reps), "runtime_s": round(elapsed, 3),
                    })
    return CoverageReport(CURVE_COLUMNS, rows)


def payoff_differential(data, theta):
    """Realized payoff gain of each player's chosen action over the other one.

    Requires the latent shocks, so it only works on simulated data.
    """
    if data.latent is None:
        raise ConfigError("payoff differentials need simulated data with latent draws")
    gain = data.covariates * theta.beta + theta.phi * leave_one_out_mean(data) + data.latent.eta
    return np.where(data.actions == 1, gain, -gain)


def _tail_task(args):
    spec, design, phi0, rep, rhos = args
    data = _simulate(spec, (design[1],) * design[0], phi0, rep)
    theta = spec.theta0(phi0)
    diff = payoff_differential(data, theta)
    counts = []
    for rho in rhos:
        lam = binary_regret(theta, data, rho).lam
        counts.append(int(np.sum(diff < -lam)))
    return counts, data.num_players


def tail_validity_check(spec, rhos=(0.1, 0.01), phi0=None, design=None):
    """Pooled frequency of ex-post payoff losses beyond the regret.

    Returns one dict per ``rho`` with the frequency, its binomial SE at
    ``rho`` and whether the frequency is at most ``rho + 3 SE``.
    """
    phi0 = spec.phi0[0] if phi0 is None else phi0
    design = spec.designs[0] if design is None else design
    tasks = [(spec, design, phi0, r, tuple(rhos)) for r in range(spec.reps)]
    results = _map(_tail_task, tasks, spec.workers)
    total = sum(n for _, n in results)
    out = []
    for k, rho in enumerate(rhos):
        freq = sum(c[k] for c, _ in results) / total
        se = binomial_se(rho, total)
        out.append({"rho": rho, "frequency": freq, "se": se, "bound": rho + 3 * se,
                    "pass": freq <= rho + 3 * se, "observations": total})
    return out


def _event_task(args):
    spec, design, phi0, rep = args
    with threadpool_limits(limits=1):
        data = _simulate(spec, (design[1],) * design[0], phi0, rep)
        theta = spec.theta0(phi0)
        instruments = InstrumentSet.from_names(spec.instruments)
        ms = evaluate_moments(data, theta, instruments, eta=spec.eta)
        # True choice probability given the covariate and the group signal.
        probs = ndtr(data.covariates * theta.beta + theta.phi * data.latent.choice_probs[data.group_of])
        keep = 1.0 - ms.regrets.rho_i
        g = ms.instruments
        e_u = (probs - ms.pi_U / keep)[:, None] * g
        e_l = (probs - (1.0 - ms.pi_L / keep))[:, None] * g
        lower_ok = np.all(e_l.mean(axis=0) + ms.w_L >= 0.0)
        upper_ok = np.all(e_u.mean(axis=0) - ms.w_U <= 0.0)
    return bool(lower_ok and upper_ok), ms.tau_theta


def moment_event_check(spec, phi0=None, design=None):
    """Frequency with which both slack-adjusted moment inequalities hold at
    the true parameter, evaluated with the true choice probabilities."""
    phi0 = spec.phi0[0] if phi0 is None else phi0
    design = spec.designs[0] if design is None else design
    tasks = [(spec, design, phi0, r) for r in range(spec.reps)]
    results = _map(_event_task, tasks, spec.workers)
    freq = sum(ok for ok, _ in results) / spec.reps
    se = binomial_se(spec.tau, spec.reps)
    bound = 1.0 - spec.tau - 3 * se
    return {"frequency": freq, "se": se, "bound": bound, "pass": freq >= bound, "reps": spec.reps}


__all__ = [
    "ExperimentSpec", "CoverageReport", "run_coverage", "run_power_curve",
    "tail_validity_check", "moment_event_check", "payoff_differential", "binomial_se",
]

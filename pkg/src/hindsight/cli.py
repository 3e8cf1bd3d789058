"""Command-line interface: ``hindsight <command> [options]``.

Every command writes its outputs plus ``manifest.json`` into the output
directory. The manifest holds the fully resolved configuration, so
``hindsight <command> --config DIR/manifest.json`` reruns it exactly.
"""

import argparse
import hashlib
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .bootstrap import check_negligibility, confidence_set, profile_cs, theta_grid
from .concentration import CheckScenario, mcdiarmid_check
from .config import RunConfig, default_config
from .errors import ConfigError, HindsightError
from .game import simulate_game
from .harness import run_coverage, run_power_curve
from .io import format_float, read_outcomes, write_json, write_manifest, write_outcomes, write_table

log = logging.getLogger("hindsight")

MCDIARMID_COLUMNS = ("scenario", "direction", "rho", "bound", "frequency", "se", "pass")


def _positive(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML config, or a manifest.json to rerun")
    common.add_argument("--seed", help="root seed (unsigned 64-bit); falls back to HINDSIGHT_SEED")
    common.add_argument("--workers", type=_positive, help="maximum worker processes")
    common.add_argument("--reps", type=_positive, help="Monte Carlo replications")
    common.add_argument("--bootstrap", type=_positive, metavar="B", help="bootstrap draws")
    common.add_argument("--method", choices=("benchmark", "modified", "ignore-regret"))
    common.add_argument("--out", type=Path, metavar="DIR", help="output directory")

    parser = argparse.ArgumentParser(prog="hindsight", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="simulate one equilibrium data set")
    infer = sub.add_parser("infer", parents=[common], help="confidence set from an outcome CSV")
    infer.add_argument("data", type=Path, help="outcome CSV written by 'simulate'")
    sub.add_parser("coverage", parents=[common], help="coverage table over designs and phi0")
    sub.add_parser("power", parents=[common], help="false-coverage curves, one CSV per phi0")
    sub.add_parser("mcdiarmid-check", parents=[common], help="Monte Carlo check of the tail bound")
    return parser


def _load(args):
    config = RunConfig.load(args.config) if args.config else default_config()
    return config.with_overrides(seed=args.seed, workers=args.workers, reps=args.reps,
                                 bootstrap=args.bootstrap, method=args.method, out=args.out)


def _outdir(config):
    out = config.output
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"{out}: cannot create output directory ({exc.strerror})") from None
    return out


def _finish(config, command, outputs, extra=None):
    out = config.output
    write_manifest(out, command, config.resolved(), config.seed(), outputs, extra)
    for path in outputs:
        log.info("wrote %s", path)


def cmd_simulate(config):
    out = _outdir(config)
    data = simulate_game(config.theta(), config.design(), config.dgp())
    path = write_outcomes(data, out / "outcomes.csv")
    _finish(config, "simulate", [path, path.with_suffix(".json")])
    return 0


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def cmd_infer(config, data_path):
    data = read_outcomes(data_path)
    base = config.theta()
    boot = config.bootstrap_config()
    betas, phis = config.grids()
    profile = config.profile()
    if profile == "none":
        result = confidence_set(data, theta_grid(base, betas, phis), config=boot)
    elif profile == "phi":
        result = profile_cs(data, "phi", phis, betas, base, config=boot)
    else:
        result = profile_cs(data, "beta", betas, phis, base, config=boot)
    threshold = config.values["inference"]["negligibility_threshold"]
    sums = np.max(result.negligibility, axis=0)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        check_negligibility(sums, threshold)
    for w in caught:
        log.warning("%s", w.message)
    out = _outdir(config)
    csv_path = out / "confidence_set.csv"
    result.write_csv(csv_path)
    diag = result.to_dict()
    diag["negligibility_max"] = sums.tolist()
    diag["negligibility_threshold"] = threshold
    diag["negligibility_warning"] = bool(caught)
    diag["num_players"] = data.num_players
    diag["num_groups"] = data.num_groups
    diag_path = out / "diagnostics.json"
    write_json(diag_path, diag)
    _finish(config, "infer", [csv_path, diag_path], {
        "data": str(Path(data_path).resolve()), "data_sha256": _sha256(data_path),
        "method": boot.method, "ignore_regret": boot.regrets_ignored,
    })
    log.info("accepted %d of %d grid points", int(np.sum(result.accept)), result.T.size)
    return 0


def cmd_coverage(config):
    spec = config.experiment()
    report = run_coverage(spec)
    out = _outdir(config)
    path = out / "coverage.csv"
    report.write_csv(path)
    _finish(config, "coverage", [path], {"experiment": spec.to_dict()})
    return 0


def _panel_name(phi0):
    return f"power_phi0_{format(phi0, 'g')}.csv"


def cmd_power(config):
    spec = config.experiment()
    axis, values = config.power_axis()
    report = run_power_curve(spec, values, axis)
    out = _outdir(config)
    paths = []
    for phi0 in spec.phi0:
        path = out / _panel_name(phi0)
        write_table(path, report.columns, report.lookup(phi0=phi0))
        paths.append(path)
    _finish(config, "power", paths, {"experiment": spec.to_dict(), "axis": axis})
    return 0


def cmd_mcdiarmid_check(config):
    m = config.values["mcdiarmid"]
    rows = []
    for name in m["scenarios"]:
        scenario = CheckScenario.build(name, m["n"])
        rows.extend(mcdiarmid_check(scenario, m["rhos"], m["draws"], config.seed()))
    out = _outdir(config)
    path = out / "mcdiarmid.csv"
    table = [
        {**r, "bound": ";".join(format_float(b) for b in r["bound"]), "pass": int(r["pass"])}
        for r in rows
    ]
    write_table(path, MCDIARMID_COLUMNS, table)
    passed = all(r["pass"] for r in rows)
    _finish(config, "mcdiarmid-check", [path], {"pass": passed})
    for r in rows:
        verdict = "PASS" if r["pass"] else "FAIL"
        print(f"{verdict} {r['scenario']} {r['direction']} rho={r['rho']:.6g} "
              f"freq={r['frequency']:.6g} se={r['se']:.3g}")
    return 0 if passed else 4


COMMANDS = {
    "simulate": cmd_simulate,
    "coverage": cmd_coverage,
    "power": cmd_power,
    "mcdiarmid-check": cmd_mcdiarmid_check,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = _load(args)
        logging.basicConfig(
            level=logging.WARNING if config.verbosity <= 0 else logging.INFO if config.verbosity == 1 else logging.DEBUG,
            format="%(levelname)s: %(message)s", stream=sys.stderr, force=True,
        )
        if args.command == "infer":
            return cmd_infer(config, args.data)
        return COMMANDS[args.command](config)
    except HindsightError as exc:
        print(f"hindsight: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())

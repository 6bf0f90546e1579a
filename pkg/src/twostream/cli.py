"""Command-line front end.

Subcommands: ``simulate``, ``fit-frequency``, ``fit-severity``, ``premium``,
``gof`` and ``loglik``. Every command is deterministic given its inputs,
flags and seed.

Options may also come from a flat ``key = value`` file passed with
``--config``; keys are option names with or without leading dashes, and
command-line flags take precedence over the file. When no seed is given by
flag or file, the ``PRICING_SEED`` environment variable is used, then 0.

Exit codes: 0 success, 2 validation error, 3 solver failure, 4 I/O error.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from . import dataio, emfit, posterior
from .errors import DegenerateData, DomainError, QuadratureFailure, SolverFailure
from .globallik import global_loglik
from .gof import gof_counts
from .models import (
    FrequencyParams,
    SeverityParams,
    frequency_pmf,
    nu_from_frequency,
    severity_logpdf,
)
from .simulate import FINITE_MEAN, INFINITE_MEAN, SimConfig, simulate_counts, simulate_history

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4
SEED_ENV = "PRICING_SEED"

# Defaults for ``simulate``: the count fit reported for the motor portfolio
# and the two claim-size scenarios used for EM recovery checks.
DEFAULT_FREQUENCY = FrequencyParams(0.5929959, 97.55820446, 30.14706672, 0.01978072)
DEFAULT_NU = nu_from_frequency(DEFAULT_FREQUENCY)
DEFAULT_SEVERITY = {
    FINITE_MEAN: SeverityParams(DEFAULT_NU, 1.0, 2.0, 1.0),
    INFINITE_MEAN: SeverityParams(DEFAULT_NU, 1.0, 0.3, 0.5),
}

SCHEDULE_HEADER = (
    "period", "cumulative_counts", "cumulative_costs", "frequency_mean",
    "severity_mean", "premium", "ipr_low", "ipr_high", "infinite_mean",
    "frequency_ipr_low", "frequency_ipr_high", "severity_ipr_low", "severity_ipr_high",
)


class ConfigError(DomainError):
    """Bad option value or config file entry."""


# --------------------------------------------------------------------------
# option parsing helpers
# --------------------------------------------------------------------------


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _positive_float(text):
    value = float(text)
    if not (value > 0 and math.isfinite(value)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _probability(text):
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in (0, 1), got {text}")
    return value


def _float_list(text, n, what):
    parts = [s.strip() for s in str(text).split(",")]
    if len(parts) != n:
        raise ConfigError(f"{what}: expected {n} comma-separated numbers, got {text!r}")
    try:
        return [float(s) for s in parts]
    except ValueError:
        raise ConfigError(f"{what}: could not parse {text!r} as numbers") from None


def _parse_nu_mode(text):
    """``free``, ``frequency`` or ``fixed:<value>``."""
    text = str(text).strip()
    if text in ("free", "frequency"):
        return text, None
    if text.startswith("fixed:"):
        try:
            value = float(text[len("fixed:"):])
        except ValueError:
            raise ConfigError(f"--nu: bad fixed value in {text!r}") from None
        if not 0.0 <= value <= 1.0:
            raise ConfigError(f"--nu: fixed value must lie in [0, 1], got {value}")
        return "fixed", value
    raise ConfigError(f"--nu must be free, frequency or fixed:<value>, got {text!r}")


def read_config_file(path):
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path} line {lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.lstrip("-").replace("-", "_")
            if not key:
                raise ConfigError(f"{path} line {lineno}: empty key")
            out[key] = value
    return out


def _apply_config(sub, values, path):
    """Install config-file values as parser defaults so flags still win."""
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, text in values.items():
        action = actions.get(key)
        if action is None or key in ("help", "config") or not action.option_strings:
            raise ConfigError(f"{path}: unknown option {key!r} for this command")
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            low = text.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ConfigError(f"{path}: {key} expects true or false, got {text!r}")
            defaults[key] = low in ("true", "1", "yes")
        else:
            # argparse converts string defaults with the option's type
            defaults[key] = text
    sub.set_defaults(**defaults)


def _resolve_seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None or not env.strip():
        return 0
    try:
        seed = int(env)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    if seed < 0:
        raise ConfigError(f"{SEED_ENV} must be nonnegative")
    return seed


def _nonneg_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text}")
    return value


def _dump_json(obj, path):
    text = json.dumps(obj, indent=2, sort_keys=False, allow_nan=False) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _json_float(x):
    """JSON has no infinity; encode it as null."""
    return None if isinstance(x, float) and not math.isfinite(x) else x


def _em_config(args):
    return emfit.EmConfig(tolerance=args.tol, max_iterations=args.max_iter,
                          criterion=args.criterion)


def _convergence(trace, cfg):
    return {
        "converged": trace.converged,
        "iterations": trace.iterations,
        "criterion": cfg.criterion,
        "tolerance": cfg.tolerance,
        "max_iterations": cfg.max_iterations,
        "loglik": trace.loglik[-1],
        "max_loglik_decrease": trace.max_decrease(),
    }


def _write_trace(path, trace):
    if path:
        dataio.write_rows(path, ("iteration", *trace.names, "loglik"), trace.as_rows())


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_simulate(args):
    fp = (dataio.load_params(args.freq_params, "frequency") if args.freq_params
          else DEFAULT_FREQUENCY)
    scenario = args.scenario
    if args.sev_params:
        sp = dataio.load_params(args.sev_params, "severity")
    else:
        sp = DEFAULT_SEVERITY[scenario or FINITE_MEAN]
    overrides = {k: getattr(args, k) for k in ("nu", "mu", "delta", "sigma")
                 if getattr(args, k) is not None}
    if overrides:
        sp = SeverityParams(**{**sp.as_dict(), **overrides})
    cfg = SimConfig(seed=_resolve_seed(args), periods=args.periods, frequency=fp,
                    severity=sp, scenario=scenario)
    if args.claims_out:
        hist = simulate_history(cfg)
        dataio.write_counts(args.counts_out, hist.counts)
        dataio.write_claims(args.claims_out, hist)
    else:
        dataio.write_counts(args.counts_out, simulate_counts(cfg))
    return EXIT_OK


def _frequency_histogram(counts, params, bins):
    counts = np.asarray(counts, dtype=np.int64)
    lo, hi = int(counts.min()), int(counts.max())
    edges = np.unique(np.linspace(lo, hi + 1, bins + 1).round().astype(np.int64))
    grid = np.arange(edges[0], edges[-1])
    pmf = frequency_pmf(params, grid)
    rows = []
    for a, b in zip(edges[:-1], edges[1:]):
        emp = np.count_nonzero((counts >= a) & (counts < b)) / counts.size
        model = float(np.sum(pmf[a - edges[0]:b - edges[0]]))
        rows.append((int(a), int(b), emp, model))
    return rows


def cmd_fit_frequency(args):
    periods, counts = dataio.read_counts(args.counts)
    cfg = _em_config(args)
    if args.init == "moments":
        init, source = emfit.moment_init_frequency(counts), "moments"
    else:
        a1, a2, b, p = _float_list(args.init, 4, "--init (a1,a2,b,p)")
        init, source = FrequencyParams(p, a1, a2, b), "user"
    try:
        params, trace = emfit.fit_frequency(counts, init, cfg)
    except DegenerateData as exc:
        raise DegenerateData(
            f"{exc}. The count mixture needs claims in at least one period and "
            "some spread between periods; check the counts file."
        ) from None
    report = {
        "model": "frequency",
        "params": params.as_dict(),
        "init": {"source": source, **init.as_dict()},
        "convergence": _convergence(trace, cfg),
        "n_periods": len(counts),
        "nu_from_frequency": nu_from_frequency(params),
    }
    _dump_json(report, args.out)
    _write_trace(args.trace, trace)
    if args.plot:
        dataio.write_rows(args.plot, ("bin_low", "bin_high", "empirical_prob", "model_prob"),
                          _frequency_histogram(counts, params, args.bins))
    return EXIT_OK


def _severity_histogram(y, params, bins):
    """Density histogram on quantile-spaced bins (claim sizes are heavy tailed)."""
    edges = np.unique(np.quantile(y, np.linspace(0.0, 1.0, bins + 1)))
    rows = []
    for a, b in zip(edges[:-1], edges[1:]):
        last = b == edges[-1]
        inside = (y >= a) & ((y <= b) if last else (y < b))
        emp = np.count_nonzero(inside) / (y.size * (b - a))
        mid = np.linspace(a, b, 33)
        mid = mid[mid > 0]
        model = float(np.mean(np.exp(severity_logpdf(params, mid))))
        rows.append((float(a), float(b), emp, model))
    return rows


def cmd_fit_severity(args):
    claims = dataio.read_claims(args.claims)
    if not claims:
        raise dataio.ParseError(f"{args.claims}: no data rows")
    y = np.array([amount for _, amount in claims])
    mode, fixed = _parse_nu_mode(args.nu if args.nu is not None
                                 else ("frequency" if args.freq_params else "free"))
    if mode == "frequency":
        if not args.freq_params:
            raise ConfigError("--nu frequency needs --freq-params")
        fixed = nu_from_frequency(dataio.load_params(args.freq_params, "frequency"))
    mu, delta, sigma, nu0 = _float_list(args.init, 4, "--init (mu,delta,sigma,nu)")
    init = SeverityParams(nu0 if fixed is None else fixed, mu, delta, sigma)
    cfg = _em_config(args)
    params, trace = emfit.fit_severity(y, init, cfg, fix_nu=fixed)
    report = {
        "model": "severity",
        "params": params.as_dict(),
        "init": {"source": "user", **init.as_dict()},
        "nu": {"mode": mode, "fixed": fixed is not None, "value": params.nu},
        "convergence": _convergence(trace, cfg),
        "n_claims": int(y.size),
        "finite_mean": params.delta > 1.0,
    }
    _dump_json(report, args.out)
    _write_trace(args.trace, trace)
    if args.plot:
        dataio.write_rows(args.plot, ("bin_low", "bin_high", "empirical_density", "model_density"),
                          _severity_histogram(y, params, args.bins))
    return EXIT_OK


def _schedule_row(q):
    return (
        q.period, q.cumulative_counts, q.cumulative_costs, q.frequency_mean,
        q.severity_mean, q.premium, *q.interval, q.infinite_mean,
        *q.frequency_interval, *q.severity_interval,
    )


def cmd_premium(args):
    fp = dataio.load_params(args.freq_params, "frequency")
    sp = dataio.load_params(args.sev_params, "severity")
    if args.nu_source == "frequency":
        sp = SeverityParams(nu_from_frequency(fp), sp.mu, sp.delta, sp.sigma)
    history = dataio.read_history(args.counts, args.claims)
    quotes = posterior.premium_schedule(
        fp, sp, history, ipr_level=args.ipr, seed=_resolve_seed(args),
        n_draws=args.draws, window=args.window,
    )
    rows = [_schedule_row(q) for q in quotes]
    fmt = args.format or ("json" if str(args.out).endswith(".json") else "csv")
    if fmt == "json":
        _dump_json({
            "ipr_level": args.ipr,
            "nu_source": args.nu_source,
            "window": args.window,
            "rows": [{k: _json_float(v) for k, v in zip(SCHEDULE_HEADER, r)} for r in rows],
        }, args.out)
    elif args.out in (None, "-"):
        for line in [",".join(SCHEDULE_HEADER)] + [
            ",".join(dataio.format_float(v) for v in r) for r in rows
        ]:
            sys.stdout.write(line + "\n")
    else:
        dataio.write_rows(args.out, SCHEDULE_HEADER, rows)
    return EXIT_OK


def cmd_gof(args):
    _, counts = dataio.read_counts(args.counts)
    fp = dataio.load_params(args.params, "frequency")
    report = gof_counts(counts, fp, replicates=args.replicates, seed=_resolve_seed(args),
                        refit=args.refit)
    _dump_json(report.as_dict(), args.out)
    return EXIT_OK


def cmd_loglik(args):
    fp = dataio.load_params(args.freq_params, "frequency")
    sp = dataio.load_params(args.sev_params, "severity")
    history = dataio.read_history(args.counts, args.claims)
    freq = emfit.frequency_loglik(fp, history.counts)
    sev = emfit.severity_loglik(sp, history.flat_severities())
    _dump_json({
        "frequency": freq,
        "severity": sev,
        "global": global_loglik(fp, sp, history),
        "periods": history.periods,
        "claims": history.total_claims,
    }, args.out)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def _add_em_options(p):
    p.add_argument("--tol", type=_positive_float, default=1e-3,
                   help="convergence tolerance (default 1e-3)")
    p.add_argument("--max-iter", type=_positive_int, default=10_000,
                   help="EM iteration cap (default 10000)")
    p.add_argument("--criterion", choices=("params", "loglik"), default="params",
                   help="stop on max-abs parameter change or log-likelihood change")
    p.add_argument("--bins", type=_positive_int, default=30,
                   help="histogram bins in the plot data (default 30)")


def _common(p, seed=False):
    p.add_argument("--config", metavar="FILE", help="flat key = value option file")
    if seed:
        p.add_argument("--seed", type=_nonneg_int, default=None,
                       help=f"random seed (fallback: ${SEED_ENV}, then 0)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="twostream",
        description="Claim-count and claim-size mixtures with unforeseeable risks: "
                    "simulation, EM fitting, goodness of fit and Bayesian premiums.",
        epilog="Exit codes: 0 success, 2 validation, 3 solver failure, 4 I/O.",
    )
    subs = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = subs.add_parser(
        "simulate", help="simulate a claim history",
        description="Write period,count rows (and period,amount rows with --claims-out).",
    )
    _common(p, seed=True)
    p.add_argument("--periods", type=_positive_int, default=180)
    p.add_argument("--scenario", choices=(FINITE_MEAN, INFINITE_MEAN), default=None,
                   help="claim-size tail regime; must agree with delta (default: inferred)")
    p.add_argument("--freq-params", metavar="JSON", help="frequency parameters (default: portfolio fit)")
    p.add_argument("--sev-params", metavar="JSON", help="severity parameters (default: per scenario)")
    for name in ("nu", "mu", "delta", "sigma"):
        p.add_argument(f"--{name}", type=float, default=None, help=f"override severity {name}")
    p.add_argument("--counts-out", default="counts.csv")
    p.add_argument("--claims-out", default=None, help="also simulate claim sizes into this file")
    p.set_defaults(func=cmd_simulate)

    p = subs.add_parser(
        "fit-frequency", help="fit the count mixture by EM",
        description="Writes params JSON (params, init, convergence), an iteration trace CSV "
                    "(iteration,p,alpha1,alpha2,beta,loglik) and histogram plot data "
                    "(bin_low,bin_high,empirical_prob,model_prob).",
    )
    _common(p)
    p.add_argument("counts", help="CSV with header period,count")
    p.add_argument("--init", default="moments", help="'moments' or a1,a2,b,p")
    _add_em_options(p)
    p.add_argument("--out", default="frequency_params.json")
    p.add_argument("--trace", default="frequency_trace.csv")
    p.add_argument("--plot", default="frequency_hist.csv")
    p.set_defaults(func=cmd_fit_frequency)

    p = subs.add_parser(
        "fit-severity", help="fit the claim-size mixture by EM",
        description="Writes params JSON, an iteration trace CSV "
                    "(iteration,mu,delta,sigma,nu,loglik) and density plot data.",
    )
    _common(p)
    p.add_argument("claims", help="CSV with header period,amount")
    p.add_argument("--init", default="1.5,2.5,0.5,0.9", help="mu,delta,sigma,nu (default 1.5,2.5,0.5,0.9)")
    p.add_argument("--nu", default=None,
                   help="free | fixed:<value> | frequency (default: frequency when "
                        "--freq-params is given, else free)")
    p.add_argument("--freq-params", metavar="JSON", help="frequency parameters for --nu frequency")
    _add_em_options(p)
    p.add_argument("--out", default="severity_params.json")
    p.add_argument("--trace", default="severity_trace.csv")
    p.add_argument("--plot", default="severity_hist.csv")
    p.set_defaults(func=cmd_fit_severity)

    p = subs.add_parser(
        "premium", help="Bayesian premium schedule",
        description="One row per period 0..m: " + ",".join(SCHEDULE_HEADER)
                    + ". Infinite means are written as inf (CSV) or null (JSON).",
    )
    _common(p, seed=True)
    p.add_argument("--counts", required=True, help="CSV with header period,count")
    p.add_argument("--claims", help="CSV with header period,amount")
    p.add_argument("--freq-params", required=True, metavar="JSON")
    p.add_argument("--sev-params", required=True, metavar="JSON")
    p.add_argument("--nu-source", choices=("frequency", "severity"), default="frequency",
                   help="take nu from the count fit (default) or the severity file")
    p.add_argument("--ipr", type=_probability, default=0.90, help="interval level (default 0.90)")
    p.add_argument("--draws", type=_positive_int, default=posterior.DEFAULT_MC_DRAWS,
                   help="Monte Carlo draws for the premium interval")
    p.add_argument("--window", type=_positive_int, default=None,
                   help="condition on the last N periods only (default: all)")
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.add_argument("--out", default="premium_schedule.csv")
    p.set_defaults(func=cmd_premium)

    p = subs.add_parser(
        "gof", help="KS/AD/CvM goodness of fit of counts",
        description="Report-only: exits 0 whatever the p-values.",
    )
    _common(p, seed=True)
    p.add_argument("counts", help="CSV with header period,count")
    p.add_argument("--params", required=True, metavar="JSON", help="frequency parameters")
    p.add_argument("--replicates", type=int, default=999, help="bootstrap replicates (default 999)")
    p.add_argument("--refit", action="store_true", help="re-estimate on every replicate")
    p.add_argument("--out", default=None, help="report path (default: stdout)")
    p.set_defaults(func=cmd_gof)

    p = subs.add_parser("loglik", help="frequency, severity and global log-likelihoods")
    _common(p)
    p.add_argument("--counts", required=True)
    p.add_argument("--claims", required=True)
    p.add_argument("--freq-params", required=True, metavar="JSON")
    p.add_argument("--sev-params", required=True, metavar="JSON")
    p.add_argument("--out", default=None, help="JSON path (default: stdout)")
    p.set_defaults(func=cmd_loglik)

    return parser, subs.choices


def parse_args(argv=None):
    """Parse flags, folding in the ``--config`` file of the chosen command."""
    parser, subparsers = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        values = read_config_file(args.config)
        if values:
            _apply_config(subparsers[args.command], values, args.config)
            args = parser.parse_args(argv)
    return args


def main(argv=None):
    try:
        args = parse_args(argv)
        return args.func(args)
    except ValueError as exc:  # DomainError, DegenerateData, MismatchError, ParseError
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SolverFailure, QuadratureFailure) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

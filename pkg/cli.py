"""
Compound entropy toolkit - command-line front end

Every capability of the library behind one script with file-based,
reproducible output:

    python cli.py chi
    python cli.py entropy --pmf point.json
    python cli.py panjer-diff --lambda 1 --q uniform12 --nmax 100
    python cli.py maxent-binomial --n 2 --lambda 0.01 --q uniform12 --out sweep.csv

Exit status: 0 success, 1 a verdict-level finding (a failed check, a
counterexample, a scan violation), 2 unusable input.
"""

import argparse
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

import settings
from compound import CompoundError, compound, compound_binomial, compound_poisson, compound_poisson_panjer
from concavity import (
    ConcavityError, cbern_lc_threshold, cpo_necessary_lambda, example16_thresholds,
    is_log_concave, is_ultra_log_concave, nec2_terms,
)
from dist_core import (
    Pmf, PmfError, as_compounding, bernoulli_sum_pmf, convolve, entropy, geometric_q,
    point_mass_q, poisson_pmf, sup_distance, truncate, two_point_q, uniform_q,
)
from maxent import (
    SweepError, SweepVerdict, chi_counterexample, conjecture_scan, geometric_family,
    three_point_family, two_point_family, verify_binomial_maxent, verify_poisson_maxent,
)
from reports import (
    chi_frame, energy_frame, format_entropy, pmf_frame, render_csv, render_json,
    score_frame, sweep_frame, to_document, verdict_frame, write_text,
)
from semigroup import SemigroupError, energy_curve, energy_t_curve, increasing_difference_gate, score_r1
from settings import ConfigError

logger = logging.getLogger("cli")

COMMANDS = (
    "pmf", "entropy", "check-lc", "check-ulc", "thresholds", "score", "energy-curve",
    "energy-t-curve", "maxent-binomial", "maxent-poisson", "chi", "scan-conjecture", "panjer-diff",
)
FORMATS = ("csv", "json")
PANJER_TOL = 1e-10

INPUT_ERRORS = (
    PmfError, CompoundError, ConcavityError, SemigroupError, SweepError, ConfigError,
    OSError, json.JSONDecodeError, ValueError, KeyError,
)


@dataclass
class RunConfig:
    command: str
    pmf: Optional[str] = None
    pmf2: Optional[str] = None
    op: str = "build"
    q: Optional[str] = None
    lam: Optional[float] = None
    n: Optional[int] = None
    p: Optional[list] = None
    alpha_grid: Optional[list] = None
    t_grid: Optional[list] = None
    lambda_grid: Optional[list] = None
    n_max: Optional[int] = None
    family: Optional[str] = None
    count: Optional[int] = None
    grid_resolution: int = field(default_factory=lambda: settings.GRID_RESOLUTION)
    support_cap: int = field(default_factory=lambda: settings.SUPPORT_CAP)
    tol: float = field(default_factory=lambda: settings.LC_TOL)
    tail_eps: float = field(default_factory=lambda: settings.TAIL_EPS)
    seed: int = field(default_factory=lambda: settings.SEED)
    n_jobs: int = field(default_factory=lambda: settings.N_JOBS)
    base: Optional[float] = None
    out: Optional[str] = None
    format: str = "csv"

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.format == "structured-text":
            self.format = "json"
        if self.format not in FORMATS:
            raise ConfigError(f"unknown format {self.format!r}")
        if not self.tol > 0 or not self.tail_eps > 0:
            raise ConfigError("tolerances must be positive")

    def as_dict(self):
        """Everything that determines the result; the output path is left out."""
        doc = dataclasses.asdict(self)
        doc.pop("out")
        doc["defaults"] = settings.as_dict()
        return doc


# === 1. Input parsing ===

def parse_q(text, tail_eps=None):
    """
    Built-in compounding laws:
        uniform12, uniform:lo:hi, two-point:q, geometric:alpha, point:k, file:path
    """
    if text is None:
        raise ConfigError("this command needs --q")
    name, _, arg = text.partition(":")
    try:
        if name == "uniform12":
            return uniform_q(1, 2)
        if name == "uniform":
            lo, hi = arg.split(":")
            return uniform_q(int(lo), int(hi))
        if name == "two-point":
            return two_point_q(float(arg))
        if name == "geometric":
            return geometric_q(float(arg), tail_eps)
        if name == "point":
            return point_mass_q(int(arg))
        if name == "file":
            return as_compounding(load_pmf(arg))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad --q {text!r}: {e}") from None
    raise ConfigError(f"unknown --q {text!r}")


def parse_list(text, cast=float):
    """'a,b,c' or 'linspace:start:stop:num'."""
    if text is None:
        return None
    text = text.strip()
    try:
        if text.startswith("linspace:"):
            start, stop, num = text.split(":")[1:]
            return [float(v) for v in np.linspace(float(start), float(stop), int(num))]
        return [cast(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse list {text!r}") from None


def load_pmf(path):
    with open(path, encoding="utf-8") as fh:
        return Pmf.from_dict(json.load(fh))


def source_pmf(config):
    """The count law named on the command line: --pmf file, --p Bernoulli sum, or --lambda Poisson."""
    if config.pmf:
        return load_pmf(config.pmf)
    if config.p:
        return bernoulli_sum_pmf(config.p)
    if config.lam is not None:
        return poisson_pmf(config.lam, config.tail_eps)
    raise ConfigError("need one of --pmf, --p or --lambda")


def _compounded(config):
    p = source_pmf(config)
    if config.q is None:
        return p
    return compound(p, parse_q(config.q, config.tail_eps))


# === 2. Commands ===
# Each returns (record, frame, finding).

def cmd_pmf(config):
    p = source_pmf(config)
    if config.op == "build":
        result = p
    elif config.op == "convolve":
        if not config.pmf2:
            raise ConfigError("convolve needs --pmf2")
        result = convolve(p, load_pmf(config.pmf2))
    elif config.op == "compound":
        result = compound(p, parse_q(config.q, config.tail_eps))
    else:
        raise ConfigError(f"unknown --op {config.op!r}")
    print_line(f"📦 pmf on {result.offset}..{result.last}, tail bound {result.tail_bound:.3g}")
    return result, pmf_frame(result), False


def cmd_entropy(config):
    p = _compounded(config)
    h = entropy(p, config.base)
    unit = "bits" if config.base == 2 else ("nats" if config.base is None else f"log base {config.base:g}")
    print_line(f"🧮 H = {format_entropy(h, unit)}")
    doc = {"entropy": h, "unit": unit, "tail_bound": p.tail_bound}
    return doc, pd.DataFrame([doc]), False


def cmd_check(config, check):
    p = _compounded(config)
    verdict = check(p, config.tol)
    mark = "✅" if verdict.holds else "⚠️ "
    print_line(f"{mark} {config.command}: holds={verdict.holds} margin={verdict.margin:.3g} {verdict.reason}")
    return verdict, verdict_frame(verdict, config.command), not verdict.holds


def cmd_thresholds(config):
    q = parse_q(config.q, config.tail_eps)
    necessary = cpo_necessary_lambda(q)
    doc = {
        "cbern_lc_threshold": cbern_lc_threshold(q),
        "cpo_necessary_lambda": necessary.value,
        "cpo_never_log_concave": necessary.never_log_concave,
    }
    if config.n is not None:
        doc["general_binomial_threshold"] = example16_thresholds("general-binomial", n=config.n, q=q)
    if config.pmf or config.p or config.lam is not None:
        lhs, rhs = nec2_terms(source_pmf(config), q)
        doc["nec2_lhs"] = lhs
        doc["nec2_rhs"] = rhs
        doc["nec2_holds"] = bool(lhs >= rhs - config.tol * max(1.0, abs(rhs)))
    for key, value in doc.items():
        print_line(f"   {key}: {value}")
    return doc, pd.DataFrame([{k: v for k, v in doc.items()}]), False


def cmd_score(config):
    p = source_pmf(config)
    q = parse_q(config.q, config.tail_eps)
    table = score_r1(p, q)
    expected_monotone = is_ultra_log_concave(p, config.tol).holds and is_log_concave(q, config.tol).holds
    finding = expected_monotone and not table.is_nonincreasing()
    print_line(f"📈 score on {table.x.size} points, nonincreasing={table.is_nonincreasing()}")
    return table, score_frame(table), finding


def cmd_energy_curve(config):
    p = source_pmf(config)
    q = parse_q(config.q, config.tail_eps)
    curve = energy_curve(p, q, config.alpha_grid, config.tail_eps, config.n_jobs)
    cpo = compound_poisson(p.mean, q, config.tail_eps)
    gate = increasing_difference_gate(cpo, q, config.tol)
    cpo_lc = is_log_concave(cpo, config.tol).holds
    monotone = curve.is_nonincreasing()
    print_line(f"📉 E(alpha) on {curve.grid.size} points: nonincreasing={monotone}, "
               f"CPo log-concave={cpo_lc}, increasing-difference gate={gate.holds}")
    return curve, energy_frame(curve), gate.holds and not monotone


def cmd_energy_t_curve(config):
    if not config.p:
        raise ConfigError("energy-t-curve needs --p")
    q = parse_q(config.q, config.tail_eps)
    curve = energy_t_curve(config.p, q, config.t_grid)
    lam = sum(config.p)
    n = len(config.p)
    gated = is_log_concave(q, config.tol).holds and is_log_concave(compound_binomial(n, lam / n, q), config.tol).holds
    monotone = curve.is_nonincreasing()
    print_line(f"📉 E(t) on {curve.grid.size} points: nonincreasing={monotone}, hypotheses={gated}")
    return curve, energy_frame(curve), gated and not monotone


def _sweep_summary(report):
    print_line(f"   {report.grid_description}")
    print_line(f"   reference: {format_entropy(report.reference_entropy, report.unit)}")
    print_line(f"   best:      {format_entropy(report.best_entropy, report.unit)} at {report.best_point}")
    if report.verdict is SweepVerdict.COUNTEREXAMPLE_FOUND:
        print_line(f"⚠️  {report.verdict.value}: {len(report.witnesses)} witnesses")
    else:
        print_line(f"✅ {report.verdict.value}")


def cmd_maxent_binomial(config):
    if config.n is None or config.lam is None:
        raise ConfigError("maxent-binomial needs --n and --lambda")
    q = parse_q(config.q, config.tail_eps)
    report = verify_binomial_maxent(
        config.n, config.lam, q, config.grid_resolution, config.count, config.seed,
        n_jobs=config.n_jobs, base=config.base,
    )
    _sweep_summary(report)
    return report, sweep_frame(report), report.verdict is SweepVerdict.COUNTEREXAMPLE_FOUND


def cmd_maxent_poisson(config):
    if config.lam is None:
        raise ConfigError("maxent-poisson needs --lambda")
    q = parse_q(config.q, config.tail_eps)
    report = verify_poisson_maxent(
        config.lam, q, config.family or "bernoulli-sums", n_max=config.n_max, count=config.count,
        grid_resolution=config.grid_resolution, seed=config.seed, n_jobs=config.n_jobs,
        tail_eps=config.tail_eps, base=config.base,
    )
    _sweep_summary(report)
    return report, sweep_frame(report), report.verdict is SweepVerdict.COUNTEREXAMPLE_FOUND


def cmd_chi(config):
    record = chi_counterexample()
    print_line(f"   H(CBin(2,0.005,Q)) = {record.h_cbin:.7f} bits  (< {record.bounds['cbin_below']})")
    print_line(f"   H(C_Q b_p)         = {record.h_cbp:.7f} bits  (> {record.bounds['cbp_above']})")
    print_line(f"   H(CPo(0.01,Q))     = {record.h_cpo:.7f} bits  (< {record.bounds['cpo_below']})")
    ok = record.bounds_hold and record.ordering_holds
    print_line("✅ PASS" if ok else "❌ FAIL")
    return record, chi_frame(record), not ok


def cmd_scan_conjecture(config):
    families = {
        "two-point": two_point_family,
        "geometric": lambda: geometric_family(n_max=config.support_cap),
        "three-point": three_point_family,
    }
    name = config.family or "all"
    if name == "all":
        family = [member for build in families.values() for member in build()]
    elif name in families:
        family = families[name]()
    else:
        raise ConfigError(f"unknown scan family {name!r}")
    report = conjecture_scan(
        family, config.lambda_grid, config.support_cap, config.tail_eps, config.tol, config.n_jobs
    )
    print_line(f"   {report.grid_description}")
    if report.witnesses:
        print_line(f"⚠️  {len(report.witnesses)} log-concavity violations, first {report.witnesses[0][0]}")
    else:
        print_line("✅ no log-concavity violation")
    return report, sweep_frame(report), bool(report.witnesses)


def cmd_panjer_diff(config):
    if config.lam is None or config.n_max is None:
        raise ConfigError("panjer-diff needs --lambda and --nmax")
    q = parse_q(config.q, config.tail_eps)
    direct = compound_poisson(config.lam, q, config.tail_eps)
    recursion = compound_poisson_panjer(config.lam, q, config.n_max)
    if direct.last > config.n_max:
        direct = truncate(direct, config.n_max)
    diff = sup_distance(direct, recursion)
    ok = diff <= PANJER_TOL
    print_line(f"{'✅' if ok else '⚠️ '} max |mixture - recursion| = {diff:.3e} on 0..{config.n_max}")
    doc = {"max_abs_diff": diff, "n_max": config.n_max, "tolerance": PANJER_TOL, "agrees": ok}
    return doc, pd.DataFrame([doc]), not ok


HANDLERS = {
    "pmf": cmd_pmf,
    "entropy": cmd_entropy,
    "check-lc": lambda c: cmd_check(c, is_log_concave),
    "check-ulc": lambda c: cmd_check(c, is_ultra_log_concave),
    "thresholds": cmd_thresholds,
    "score": cmd_score,
    "energy-curve": cmd_energy_curve,
    "energy-t-curve": cmd_energy_t_curve,
    "maxent-binomial": cmd_maxent_binomial,
    "maxent-poisson": cmd_maxent_poisson,
    "chi": cmd_chi,
    "scan-conjecture": cmd_scan_conjecture,
    "panjer-diff": cmd_panjer_diff,
}


# === 3. Orchestration ===

_banner_stream = sys.stdout


def print_line(text):
    print(text, file=_banner_stream)


def run(config):
    """Execute one command; returns the exit status."""
    global _banner_stream
    _banner_stream = sys.stdout if config.out not in (None, "-") else sys.stderr
    print_line(f"\n🧮 {config.command}")
    try:
        record, frame, finding = HANDLERS[config.command](config)
        if config.format == "json":
            text = render_json(to_document(record), config.as_dict())
        else:
            text = render_csv(frame, config.as_dict())
        write_text(text, config.out)
    except INPUT_ERRORS as e:
        logger.debug("input error", exc_info=True)
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    if config.out not in (None, "-"):
        print_line(f"   Results saved to: {config.out}")
    return 1 if finding else 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--pmf", help="Pmf JSON file {offset, probs, tail_bound}")
    common.add_argument("--pmf2", help="Second pmf file (pmf --op convolve)")
    common.add_argument("--op", default="build", choices=["build", "convolve", "compound"],
                        help="pmf operation (default: build)")
    common.add_argument("--q", help="Compounding law: uniform12, uniform:lo:hi, two-point:q, "
                                    "geometric:alpha, point:k, file:path")
    common.add_argument("--lambda", dest="lam", type=float, help="Poisson rate / parameter sum")
    common.add_argument("--n", type=int, help="Number of Bernoulli parameters")
    common.add_argument("--p", help="Bernoulli parameters, comma separated")
    common.add_argument("--alpha-grid", help="Alpha grid: a,b,c or linspace:0:1:41 (default: 41 points)")
    common.add_argument("--t-grid", help="t grid: a,b,c or linspace:start:stop:num (default: 41 points)")
    common.add_argument("--lambda-grid", help="Rates for scan-conjecture (default: ladder from the threshold)")
    common.add_argument("--nmax", "--n-max", dest="n_max", type=int, help="Largest x (panjer-diff) or n (maxent-poisson)")
    common.add_argument("--family", help="maxent-poisson: bernoulli-sums | ulc-perturbations; "
                                         "scan-conjecture: two-point | geometric | three-point | all")
    common.add_argument("--count", type=int, help="Random points or perturbations")
    common.add_argument("--grid-resolution", type=int, default=settings.GRID_RESOLUTION,
                        help=f"Lattice resolution (default: {settings.GRID_RESOLUTION})")
    common.add_argument("--support-cap", type=int, default=settings.SUPPORT_CAP,
                        help=f"Support cap for scans (default: {settings.SUPPORT_CAP})")
    common.add_argument("--tol", type=float, default=settings.LC_TOL,
                        help=f"Relative tolerance (default: {settings.LC_TOL:g})")
    common.add_argument("--tail-eps", type=float, default=settings.TAIL_EPS,
                        help=f"Truncation tolerance (default: {settings.TAIL_EPS:g})")
    common.add_argument("--seed", type=int, default=settings.SEED, help=f"Random seed (default: {settings.SEED})")
    common.add_argument("--n-jobs", type=int, default=settings.N_JOBS, help=f"joblib workers (default: {settings.N_JOBS})")
    common.add_argument("--base", type=float, help="Entropy logarithm base (default: natural log)")
    common.add_argument("--out", help="Output file (default: stdout)")
    common.add_argument("--format", default="csv", choices=["csv", "json", "structured-text"],
                        help="Output format (default: csv)")
    common.add_argument("--log-level", default=settings.LOG_LEVEL,
                        help=f"Diagnostics level on stderr (default: {settings.LOG_LEVEL})")

    parser = argparse.ArgumentParser(description="Compound distributions, entropy and log-concavity checks")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=f"{name} command")
    return parser


def config_from_args(args):
    values = vars(args).copy()
    values.pop("log_level", None)
    for key in ("p", "alpha_grid", "t_grid", "lambda_grid"):
        values[key] = parse_list(values[key])
    return RunConfig(**values)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = config_from_args(args)
    except ConfigError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    return run(config)


if __name__ == "__main__":
    sys.exit(main())

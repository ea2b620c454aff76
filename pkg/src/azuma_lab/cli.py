"""``azuma-lab`` command line.

Exit status: 0 when every check passes, 1 on any FAIL (or when a
counterexample run that should falsify the old claim does not), 2 on usage
errors.
"""

from __future__ import annotations

import functools
import json
import math
import sys
from pathlib import Path
from typing import Any

import click
import yaml

from . import __version__, bounds
from .adversary import (
    BudgetConstraint,
    adversary_from_spec,
    builtin_adversaries,
    describe,
    estimate_tail,
    verify_bound,
)
from .errors import (
    AzumaLabError,
    BoundDomainError,
    BudgetViolation,
    CollisionNeverAchieved,
    StrategyStalled,
    SupportViolation,
    TooLarge,
)
from .recycling import (
    GameConfig,
    builtin_strategies,
    counterexample_experiment,
    delay_tail_experiment,
    make_strategy,
    play,
    play_many,
)
from .report import Report, render_csv
from .rng import DEFAULT_SEED, derive_seed
from .verification import (
    CheckResult,
    adversary_sweep,
    comparison_sweep,
    frange,
    game_sweep,
    inequality_sweep,
    mgf_sweep,
    monte_carlo_agreement,
)

FAMILIES = (
    "mult-upper", "mult-upper-sharp", "mult-lower", "mult-lower-sharp", "additive-azuma",
    "chernoff-additive", "chernoff-upper", "chernoff-lower", "mgf", "recycling", "compare",
    "inequality-upper", "inequality-lower",
)


class SeedType(click.ParamType):
    """Integer accepting decimal or ``0x`` hex, reduced to 64 bits."""

    name = "seed"

    def convert(self, value, param, ctx):
        if isinstance(value, int):
            return value & 0xFFFFFFFFFFFFFFFF
        try:
            return int(str(value), 0) & 0xFFFFFFFFFFFFFFFF
        except ValueError:
            self.fail(f"{value!r} is not an integer", param, ctx)


SEED = SeedType()


def common_options(trials: int | None = None, confidence: bool = True):
    def wrap(fn):
        opts = [
            click.option("--seed", type=SEED, default=None,
                         help=f"Master seed, decimal or hex [default: 0x{DEFAULT_SEED:X}]."),
            click.option("--format", "fmt", type=click.Choice(["kv", "csv"]), default="kv",
                         show_default=True),
            click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None,
                         help="Write the report here instead of stdout."),
            click.option("--no-timestamp", is_flag=True, help="Omit the timestamp from the header."),
        ]
        if confidence:
            opts.append(click.option(
                "--confidence", type=click.FloatRange(0, 1, min_open=True, max_open=True),
                default=None, help="Clopper-Pearson confidence [default: 0.99]."))
        if trials is not None:
            opts.append(click.option("--trials", type=int, default=None,
                                     help=f"Number of seeded trials [default: {trials}]."))
        for opt in reversed(opts):
            fn = opt(fn)
        return fn
    return wrap


def emit(report: Report, fmt: str, out: Path | None) -> None:
    text = report.render(fmt)
    if out is None:
        click.echo(text, nl=False)
    else:
        out.write_text(text)


def fail(message: str, code: int = 1):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def usage_errors(fn):
    """Turn domain errors raised while validating inputs into usage errors (exit 2)."""
    @functools.wraps(fn)
    def inner(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (BoundDomainError, ValueError, KeyError) as exc:
            if isinstance(exc, AzumaLabError) and not isinstance(exc, BoundDomainError):
                raise
            msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
            raise click.UsageError(str(msg)) from exc
    return inner


def positive_trials(trials: int) -> int:
    if trials < 1:
        raise click.UsageError(f"--trials must be >= 1, got {trials}")
    return trials


def parse_grid(text: str) -> list[float]:
    try:
        start, stop, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise click.UsageError(f"--delta-grid expects start:stop:step, got {text!r}") from None
    if step <= 0 or stop < start:
        raise click.UsageError(f"--delta-grid needs step > 0 and stop >= start, got {text!r}")
    return frange(start, stop, step)


def collect_deltas(deltas, grid) -> list[float]:
    out = list(deltas)
    if grid:
        out += parse_grid(grid)
    return out


def need(value, flag: str):
    if value is None:
        raise click.UsageError(f"{flag} is required for this family")
    return value


def bound_fields(b: bounds.TailBound, prefix: str = "") -> dict[str, float]:
    return {f"{prefix}value": b.value, f"{prefix}log_value": b.log_value}


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="azuma-lab")
def main():
    """Concentration-bound calculator, adaptive-adversary simulator and
    recycling-game laboratory."""


# -- bound ---------------------------------------------------------------------


@main.command("bound")
@click.argument("family", type=click.Choice(FAMILIES))
@click.option("--mu", type=float)
@click.option("--c", "c", type=float)
@click.option("--delta", type=float, multiple=True, help="Repeatable.")
@click.option("--delta-grid", help="Inclusive sweep start:stop:step.")
@click.option("--eps", type=float)
@click.option("--c-list", help="Comma-separated ranges for additive-azuma.")
@click.option("--n", type=int)
@click.option("--t", "t_values", type=float, multiple=True, help="Repeatable (mgf).")
@click.option("--a", type=float)
@click.option("--b", type=float)
@click.option("--P", "P", type=int)
@click.option("--M", "M", type=int)
@click.option("--format", "fmt", type=click.Choice(["kv", "csv"]), default="kv", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.option("--no-timestamp", is_flag=True)
@usage_errors
def bound_cmd(family, mu, c, delta, delta_grid, eps, c_list, n, t_values, a, b, P, M, fmt, out,
              no_timestamp):
    """Evaluate a tail bound; one record per delta (or t) value."""
    report = Report("bound", timestamp=not no_timestamp)
    deltas = collect_deltas(delta, delta_grid)
    status = 0

    if family.startswith("mult-"):
        fn = {
            "mult-upper": bounds.mult_azuma_upper,
            "mult-upper-sharp": bounds.mult_azuma_upper_sharp,
            "mult-lower": bounds.mult_azuma_lower,
            "mult-lower-sharp": bounds.mult_azuma_lower_sharp,
        }[family]
        need(mu, "--mu"), need(c, "--c"), need(deltas or None, "--delta or --delta-grid")
        for d in deltas:
            report.add(family=family, mu=mu, c=c, delta=d, **bound_fields(fn(bounds.BoundQuery(mu, c, d))))
    elif family == "additive-azuma":
        need(eps, "--eps"), need(c_list, "--c-list")
        try:
            cs = tuple(float(x) for x in c_list.split(","))
        except ValueError:
            raise click.UsageError(f"--c-list expects comma-separated numbers, got {c_list!r}") from None
        r = bounds.additive_azuma(bounds.AdditiveQuery(eps, cs))
        report.add(family=family, eps=eps, c_list=",".join(format(x, ".17g") for x in cs),
                   n=len(cs), **bound_fields(r))
    elif family == "chernoff-additive":
        need(n, "--n"), need(eps, "--eps")
        r = bounds.chernoff(bounds.ChernoffQuery(n, eps=eps), "additive")
        report.add(family=family, n=n, eps=eps, **bound_fields(r))
    elif family in ("chernoff-upper", "chernoff-lower"):
        need(mu, "--mu"), need(deltas or None, "--delta or --delta-grid")
        variant = "mult_upper" if family == "chernoff-upper" else "mult_lower"
        for d in deltas:
            r = bounds.chernoff(bounds.ChernoffQuery(n or 1, mu=mu, delta=d), variant)
            report.add(family=family, mu=mu, delta=d, **bound_fields(r))
    elif family == "mgf":
        need(a, "--a"), need(b, "--b"), need(t_values or None, "--t")
        for t in t_values:
            log = bounds.log_mgf_bound(t, a, b)
            report.add(family=family, t=t, a=a, b=b, value=bounds.mgf_bound(t, a, b), log_value=log)
    elif family == "recycling":
        need(P, "--P"), need(M, "--M"), need(eps, "--eps")
        r = bounds.recycling_delay_bound(P, M, eps)
        report.add(family=family, P=P, M=M, eps=eps, threshold=r.threshold,
                   failure_prob=r.failure_prob, case=r.case)
    elif family == "compare":
        need(P, "--P"), need(M, "--M"), need(deltas or None, "--delta or --delta-grid")
        for d in deltas:
            good, bad = bounds.compare_recycling_bounds(P, M, d)
            report.add(family=family, P=P, M=M, delta=d, **bound_fields(good, "good_"),
                       **bound_fields(bad, "bad_"), good_le_bad=good.log_value <= bad.log_value)
    else:
        tail = family.split("-")[1]
        if not deltas:
            deltas = frange(0.01, 10.0, 0.01) if tail == "upper" else frange(0.0, 0.999, 0.001)
        for p in bounds.check_log_inequalities(deltas, tail):
            report.add(family=family, delta=p.delta, lhs=p.lhs, rhs=p.rhs, slack=p.slack, holds=p.holds)
            status |= not p.holds
    emit(report, fmt, out)
    sys.exit(status)


# -- simulate ------------------------------------------------------------------


def load_config(path: Path | None) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        data = yaml.safe_load(path.read_text())  # JSON is a YAML subset
    except (OSError, yaml.YAMLError) as exc:
        raise click.UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise click.UsageError(f"config {path} must be a mapping")
    return data


def parse_params(pairs) -> dict[str, Any]:
    out = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep:
            raise click.UsageError(f"--param expects key=value, got {pair!r}")
        out[key] = yaml.safe_load(value)
    return out


def pick(cli_value, config: dict, key: str, default=None):
    if cli_value is not None and cli_value != ():
        return cli_value
    return config.get(key, default)


@main.command("simulate")
@click.option("--adversary", help=f"Catalog name: {', '.join(sorted(builtin_adversaries()))}.")
@click.option("--param", "params", multiple=True, help="Adversary parameter key=value (repeatable).")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="YAML/JSON experiment file; command-line flags override it.")
@click.option("--n", type=int)
@click.option("--c", "c", type=float)
@click.option("--mu", type=float)
@click.option("--delta", type=float, multiple=True)
@click.option("--delta-grid")
@click.option("--direction", type=click.Choice(["upper", "lower"]), default=None,
              help="upper: sum >= (1+delta) mu under a cap; lower: sum <= (1-delta) mu under a floor.")
@common_options(trials=10_000)
@usage_errors
def simulate_cmd(adversary, params, config_path, n, c, mu, delta, delta_grid, direction, seed,
                 confidence, fmt, out, no_timestamp, trials):
    """Monte Carlo tail estimate for an adaptive adversary, checked against its bound."""
    cfg = load_config(config_path)
    spec = adversary if adversary is not None else cfg.get("adversary")
    if spec is None:
        raise click.UsageError("--adversary (or 'adversary' in --config) is required")
    extra = parse_params(params)
    if extra:
        if not isinstance(spec, str):
            raise click.UsageError("--param only applies to a named adversary")
        spec = {"name": spec, "params": extra}
    adv = adversary_from_spec(spec)

    n = pick(n, cfg, "n")
    c = pick(c, cfg, "c", 1.0)
    mu = pick(mu, cfg, "mu")
    if n is None or mu is None:
        raise click.UsageError("--n and --mu are required")
    direction = pick(direction, cfg, "direction", "upper")
    trials = positive_trials(int(pick(trials, cfg, "trials", 10_000)))
    seed = SEED.convert(pick(seed, cfg, "seed", DEFAULT_SEED), None, None)
    confidence = float(pick(confidence, cfg, "confidence", 0.99))
    deltas = collect_deltas(delta, delta_grid)
    if not deltas:
        d = cfg.get("delta")
        deltas = [] if d is None else [float(x) for x in (d if isinstance(d, list) else [d])]
    if not deltas:
        raise click.UsageError("--delta or --delta-grid is required")

    cons = BudgetConstraint(float(c), float(mu), int(n), direction)
    standard = bounds.mult_azuma_upper if direction == "upper" else bounds.mult_azuma_lower
    sharp = bounds.mult_azuma_upper_sharp if direction == "upper" else bounds.mult_azuma_lower_sharp
    planned = [(d, standard(bounds.BoundQuery(cons.mu, cons.c, d)),
                sharp(bounds.BoundQuery(cons.mu, cons.c, d))) for d in deltas]

    report = Report("simulate", seed=seed, timestamp=not no_timestamp)
    status = 0
    for d, b, bs in planned:
        try:
            est = estimate_tail(adv, cons, d, trials, seed, confidence)
        except (BudgetViolation, SupportViolation) as exc:
            fail(str(exc))
        verdict = verify_bound(est, b)
        status |= verdict != "PASS"
        report.add(adversary=describe(adv), direction=direction, n=cons.n, c=cons.c, mu=cons.mu,
                   delta=d, threshold=cons.threshold(d), trials=est.trials, hits=est.hits,
                   point=est.point, ci_lower=est.ci_lower, ci_upper=est.ci_upper,
                   confidence=confidence, **bound_fields(b, "bound_"),
                   **bound_fields(bs, "sharp_bound_"), verdict=verdict)
    emit(report, fmt, out)
    sys.exit(status)


# -- recycle -------------------------------------------------------------------


@main.command("recycle")
@click.option("--strategy", default="eager", show_default=True,
              help=f"One of: {', '.join(sorted(builtin_strategies()))}.")
@click.option("--q", type=float, help="Toss probability for random_throttle.")
@click.option("--max-attempts", type=int, help="Collision attempts for counterexample.")
@click.option("--P", "P", type=int, required=True)
@click.option("--M", "M", type=int, required=True)
@click.option("--eps", type=float, multiple=True, help="Failure probability (repeatable) [default: 0.1].")
@click.option("--engine", type=click.Choice(["auto", "kernel", "python"]), default="auto",
              show_default=True, help="Both engines play identical games.")
@click.option("--games-out", type=click.Path(dir_okay=False, path_type=Path),
              help="Also write one CSV row per game (seed, P, M, strategy, D, T).")
@click.option("--trace-out", type=click.Path(dir_okay=False, path_type=Path),
              help="Write a JSON line per game with per-toss delays and per-step occupancy.")
@common_options(trials=10_000)
@usage_errors
def recycle_cmd(strategy, q, max_attempts, P, M, eps, engine, games_out, trace_out, seed,
                confidence, fmt, out, no_timestamp, trials):
    """Play seeded recycling games and check the delay tail bounds.

    With --format csv the report is the per-game table itself.
    """
    seed = DEFAULT_SEED if seed is None else seed
    confidence = 0.99 if confidence is None else confidence
    trials = positive_trials(10_000 if trials is None else trials)
    params = {}
    if q is not None:
        params["q"] = q
    if max_attempts is not None:
        params["max_attempts"] = max_attempts
    strat = make_strategy(strategy, **params)
    config = GameConfig(P, M)
    eps_values = list(eps) or [0.1]
    for e in eps_values:
        bounds.recycling_delay_bound(P, M, e)
    fast = {"auto": None, "kernel": True, "python": False}[engine]

    try:
        batch = play_many(config, strat, trials, seed, fast=fast)
    except StrategyStalled as exc:
        fail(f"stalled: {exc}")
    if games_out is not None:
        games_out.write_text(render_csv(list(batch.records())))
    if trace_out is not None:
        with trace_out.open("w") as fh:
            for k in range(trials):
                fh.write(json.dumps(play(config, strat, derive_seed(seed, k)).trace()) + "\n")

    report = Report("recycle", seed=seed, timestamp=not no_timestamp)
    status = 0
    if fmt == "csv":
        for r in batch.records():
            report.add(**r)
    for e in eps_values:
        res = delay_tail_experiment(config, strat, e, trials, seed, confidence, batch=batch)
        status |= not res.passed
        if fmt == "csv":
            continue
        est = res.estimate
        report.add(kind="delay_tail", strategy=res.strategy, P=P, M=M, eps=e, trials=est.trials,
                   threshold=res.threshold, case=res.case, hits=est.hits, point=est.point,
                   ci_lower=est.ci_lower, ci_upper=est.ci_upper, confidence=confidence,
                   max_delay=res.max_delay, mean_delay=res.mean_delay, verdict=res.verdict)
        for chk in res.checks:
            ce = chk.estimate
            report.add(kind="delta_check", strategy=res.strategy, P=P, M=M, eps=e, delta=chk.delta,
                       threshold=chk.threshold, hits=ce.hits, point=ce.point,
                       ci_lower=ce.ci_lower, ci_upper=ce.ci_upper,
                       **bound_fields(chk.bound, "bound_"), verdict=chk.verdict)
    emit(report, fmt, out)
    sys.exit(status)


# -- counterexample ------------------------------------------------------------


@main.command("counterexample")
@click.option("--P", "P", type=int, required=True, help="Number of balls and bins (>= 3).")
@click.option("--mode", type=click.Choice(["constructed", "play"]), default="constructed",
              show_default=True)
@click.option("--max-attempts", type=int,
              help="Collision attempts per game in play mode [default: ceil(20 P^(P-2))].")
@common_options(trials=100_000)
@usage_errors
def counterexample_cmd(P, mode, max_attempts, seed, confidence, fmt, out, no_timestamp, trials):
    """Estimate Pr[ball 1's first toss has delay P-2] after the adversarial collision."""
    if P < 3:
        raise click.UsageError(f"--P must be >= 3, got {P}")
    seed = DEFAULT_SEED if seed is None else seed
    confidence = 0.99 if confidence is None else confidence
    trials = positive_trials(100_000 if trials is None else trials)
    try:
        res = counterexample_experiment(P, trials, seed, max_attempts, mode, confidence)
    except CollisionNeverAchieved as exc:
        fail(str(exc))
    est = res.estimate
    report = Report("counterexample", seed=seed, timestamp=not no_timestamp)
    report.add(P=P, mode=mode, trials=trials, collided=res.collided, hits=res.hits,
               no_collision_fraction=res.no_collision_fraction, point=est.point,
               ci_lower=est.ci_lower, ci_upper=est.ci_upper, confidence=confidence,
               corrected_value=res.corrected_value, claimed_value=res.claimed_value,
               ratio_to_claim=est.point / res.claimed_value, falsified=res.falsified,
               falsification_expected=res.falsification_expected)
    emit(report, fmt, out)
    sys.exit(1 if res.falsification_expected and not res.falsified else 0)


# -- verify --------------------------------------------------------------------


def _bad_bound(q: bounds.BoundQuery) -> bounds.TailBound:
    return bounds.TailBound.from_log(-math.inf)


@main.command("verify")
@click.option("--max-n", type=click.IntRange(2, 10), default=8, show_default=True,
              help="Largest adversary horizon in the exact sweep.")
@click.option("--mc-trials", type=click.IntRange(1), default=20_000, show_default=True,
              help="Trials for the seeded Monte Carlo agreement check.")
@click.option("--inject-bad-bound", is_flag=True, hidden=True)
@common_options(confidence=False)
@usage_errors
def verify_cmd(max_n, mc_trials, inject_bad_bound, seed, fmt, out, no_timestamp):
    """Exact-oracle and grid checks of every bound; exit 0 iff all pass."""
    seed = DEFAULT_SEED if seed is None else seed
    upper = _bad_bound if inject_bad_bound else bounds.mult_azuma_upper
    sweeps = [
        inequality_sweep,
        mgf_sweep,
        lambda: adversary_sweep(n_values=range(2, max_n + 1), upper_bound=upper),
        game_sweep,
        comparison_sweep,
        lambda: monte_carlo_agreement(seed, mc_trials),
    ]
    results: list[CheckResult] = []
    for sweep in sweeps:
        try:
            r = sweep()
        except TooLarge as exc:
            r = CheckResult("too_large", 0, 1, math.inf, str(exc))
        results.extend(r if isinstance(r, list) else [r])
    report = Report("verify", seed=seed, timestamp=not no_timestamp)
    for r in results:
        report.add(check=r.name, cases=r.cases, violations=r.violations, worst_margin=r.worst,
                   verdict=r.verdict, **({"detail": r.detail} if r.detail else {}))
    emit(report, fmt, out)
    sys.exit(0 if all(r.verdict == "PASS" for r in results) else 1)


if __name__ == "__main__":
    main()

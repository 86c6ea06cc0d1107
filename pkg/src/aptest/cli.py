"""Command-line driver: ``aptest simulate | test | sweep``.

Exit codes: 0 success, 2 invalid input, 3 test not applicable to the data.
The worker count for simulations is read from ``APTEST_WORKERS``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import ap_test as apt
from .config import LineDict, expand_scenarios, load_file, load_preset, scenario_from_dict
from .core import (BatchSchedule, ConfigError, DegenerateVarianceError, InapplicableTestError,
                   PolicyTag, TestOutcome, TrialHistory, derive_stream)
from .harness import (MATCHING_POLICY, Hypothesis, MetricsReport, ScenarioConfig, TestKind, apply_test,
                      estimate_error_rates, multiarm_error_rates, mturk_summary_history, null_statistics,
                      optimal_arm_proportion, regret_curves, reports_to_csv, run_trajectory, simulate)

EXIT_OK, EXIT_INVALID, EXIT_INAPPLICABLE = 0, 2, 3

HISTORY_COLUMNS = ("t", "i", "alloc_prob", "arm", "reward")


def fmt(x) -> str:
    return format(float(x), ".17g")


# --- history files -------------------------------------------------------------

def history_to_csv(history: TrialHistory) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HISTORY_COLUMNS)
    for t in range(history.schedule.steps):
        for i in range(history.n):
            writer.writerow([t, i, fmt(history.alloc_prob[t]), int(history.assignments[t, i]),
                             fmt(history.rewards[t, i])])
    return buf.getvalue()


def metadata_path(path) -> Path:
    return Path(path).with_suffix(".json")


def write_history(history: TrialHistory, path, metadata: dict) -> None:
    Path(path).write_text(history_to_csv(history))
    meta = {"T": history.T, "n": history.n, "policy": history.policy_tag.value, **metadata}
    metadata_path(path).write_text(json.dumps(meta, indent=2) + "\n")


def read_history(path) -> tuple[TrialHistory, dict]:
    path = Path(path)
    try:
        meta = json.loads(metadata_path(path).read_text())
        rows = list(csv.DictReader(io.StringIO(path.read_text())))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read history {path}: {exc}") from None
    if not rows or tuple(rows[0]) != HISTORY_COLUMNS:
        raise ConfigError(f"{path}: expected columns {', '.join(HISTORY_COLUMNS)}")
    schedule = BatchSchedule(int(meta["T"]), int(meta["n"]))
    shape = (schedule.steps, schedule.n)
    alloc = np.full(schedule.steps, np.nan)
    arms = np.full(shape, -1, dtype=np.int64)
    rewards = np.full(shape, np.nan)
    for lineno, row in enumerate(rows, start=2):
        try:
            t, i = int(row["t"]), int(row["i"])
            p = float(row["alloc_prob"])
            if not np.isnan(alloc[t]) and alloc[t] != p:
                raise ValueError("alloc_prob must be constant within a batch")
            alloc[t] = p
            arms[t, i] = int(row["arm"])
            rewards[t, i] = float(row["reward"])
        except (ValueError, IndexError) as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from None
    if np.isnan(alloc).any() or (arms < 0).any():
        raise ConfigError(f"{path}: history is missing rows")
    return TrialHistory(schedule, alloc, arms, rewards, PolicyTag(meta["policy"])), meta


def _describe(config: ScenarioConfig) -> dict:
    regime = config.regime
    return {
        "scenario_id": config.scenario_id,
        "seed": config.master_seed,
        "hypothesis": config.hypothesis.value,
        "prior": {"mean": config.prior.mean, "variance": config.prior.variance},
        "regime": {"variant": regime.variant.value, "mu": list(regime.params.mu),
                   "sigma2_y": regime.sigma2_y, "base_mean": regime.base_mean,
                   "decay": regime.decay, "delta": regime.delta},
    }


# --- argument handling -------------------------------------------------------------

def _load(args) -> LineDict:
    if args.config and args.preset:
        raise ConfigError("give either --config or --preset, not both")
    if args.preset:
        return load_preset(args.preset)
    if args.config:
        return load_file(args.config)
    raise ConfigError("a --config file or --preset is required")


def _apply_overrides(config: ScenarioConfig, args) -> ScenarioConfig:
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["master_seed"] = args.seed
    if getattr(args, "trajectories", None) is not None:
        changes["trajectories"] = args.trajectories
    if getattr(args, "alpha", None) is not None:
        changes["alpha"] = args.alpha
    return replace(config, **changes) if changes else config


def _scenario(d: LineDict, args) -> ScenarioConfig:
    return _apply_overrides(scenario_from_dict(d), args)


def _write(path, text: str) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# --- simulate ---------------------------------------------------------------------

def _curves_csv(base: ScenarioConfig, policies) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["policy", "t", "cumulative_regret", "optimal_proportion", "mean_alloc_prob"])
    n = base.schedule.n
    for policy in policies:
        batch = simulate(base.with_policy(PolicyTag(policy)))
        regret = regret_curves(batch.assignments, base.regime).mean(axis=0)
        share = optimal_arm_proportion(batch.assignments, base.regime)
        alloc = batch.alloc_prob.mean(axis=0)
        for t in range(base.schedule.steps):
            writer.writerow([policy, t, fmt(regret[(t + 1) * n - 1]), fmt(share[t]), fmt(alloc[t])])
    return buf.getvalue()


def _pmf_csv(base: ScenarioConfig) -> str:
    pmfs = {}
    for hyp in (Hypothesis.H0, Hypothesis.H1):
        cfg = replace(base, hypothesis=hyp)
        batch = simulate(cfg)
        pmfs[hyp] = apt.NullDistribution.from_statistics(apt.ap_statistics(batch.alloc_prob, cfg.ap_threshold),
                                                         cfg.schedule.T)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["q", "pmf_H0", "pmf_H1", "exceedance_H0", "exceedance_H1"])
    h0, h1 = pmfs[Hypothesis.H0], pmfs[Hypothesis.H1]
    for q in range(base.schedule.T + 1):
        writer.writerow([q, fmt(h0.pmf[q]), fmt(h1.pmf[q]), fmt(h0.exceedance[q]), fmt(h1.exceedance[q])])
    return buf.getvalue()


def _fixture_null(d: LineDict, args) -> ScenarioConfig:
    null = d.get("null")
    if not isinstance(null, LineDict):
        raise ConfigError(f"{d.where('null')}: fixture files need a 'null' scenario")
    return _scenario(null, args).null_config()


def cmd_simulate(args) -> int:
    d = _load(args)
    kind = d.get("kind", "scenario")
    if kind == "curves":
        base = _scenario(d.get("base", d), args)
        policies = d.get("policies") or [p.value for p in PolicyTag]
        _write(args.out, _curves_csv(base, policies))
    elif kind == "pmf":
        _write(args.out, _pmf_csv(_scenario(d.get("base", d), args)))
    elif kind == "fixture":
        null = _fixture_null(d, args)
        history = mturk_summary_history(null.prior, null.regime.sigma2_y)
        _require_out(args)
        write_history(history, args.out, {"fixture": "mturk", **_describe(null)})
    elif kind == "scenario":
        config = _scenario(d, args)
        history = run_trajectory(config, derive_stream(config.master_seed, args.index))
        _require_out(args)
        write_history(history, args.out, {"index": args.index, **_describe(config)})
    else:
        raise ConfigError(f"{d.where('kind')}: kind {kind!r} is not simulated; use 'aptest sweep'")
    return EXIT_OK


def _require_out(args):
    if not args.out or args.out == "-":
        raise ConfigError("--out PATH is required for history output")


# --- test ----------------------------------------------------------------------------

def cmd_test(args) -> int:
    history, meta = read_history(args.history)
    test = TestKind(args.test)
    alpha = 0.05 if args.alpha is None else args.alpha
    seed = args.seed if args.seed is not None else int(meta.get("seed", 0))
    null_cfg = None
    if args.config or args.preset:
        d = _load(args)
        null_cfg = _fixture_null(d, args) if d.get("kind") == "fixture" else _scenario(d, args).null_config()
    null_dist = null_stats = None
    if test is TestKind.AP:
        if args.null:
            null_dist = apt.NullDistribution.from_csv(args.null)
        elif null_cfg is not None:
            null_dist = apt.mc_null_distribution(null_cfg)
        else:
            raise ConfigError("the AP-test needs --null FILE or an H0 scenario (--config/--preset)")
        if null_dist.T != history.T:
            raise ConfigError(f"null distribution has T={null_dist.T}, history has T={history.T}")
    elif args.calibrate:
        if null_cfg is None:
            raise ConfigError("calibration needs an H0 scenario (--config/--preset)")
        null_stats = null_statistics(test, null_cfg.with_policy(history.policy_tag))
    outcome = apply_test(history, test, alpha, calibrate=args.calibrate, null_dist=null_dist,
                         null_stats=null_stats, seed=seed)
    _write(args.out, json.dumps(outcome_dict(outcome), indent=2) + "\n")
    return EXIT_OK


def outcome_dict(outcome: TestOutcome) -> dict:
    out = outcome.to_dict()
    for key, value in out.items():
        if isinstance(value, (float, np.floating)):
            out[key] = float(value)
        elif isinstance(value, (np.integer,)):
            out[key] = int(value)
        elif isinstance(value, np.bool_):
            out[key] = bool(value)
    return out


# --- sweep -----------------------------------------------------------------------------

def sweep_reports(d: LineDict, args) -> list[MetricsReport]:
    tests = [args.test] if args.test else (d.get("tests") or ["ap"])
    hypotheses = d.get("hypotheses") or ["H0", "H1"]
    calibrate = args.calibrate or bool(d.get("calibrate", False))
    reports = []
    for entry in expand_scenarios(d):
        for test in map(TestKind, tests):
            for hyp in hypotheses:
                config = _scenario(entry, args)
                config = replace(config, hypothesis=Hypothesis(hyp))
                if "policy" not in entry:
                    config = config.with_policy(MATCHING_POLICY[test])
                if test is TestKind.BOLS and config.schedule.n < 3:
                    print(f"skipping {config.scenario_id}/bols: batch size {config.schedule.n} < 3",
                          file=sys.stderr)
                    continue
                if config.num_arms > 2:
                    reports.append(_multiarm_report(config, calibrate))
                else:
                    reports.append(estimate_error_rates(config, test, calibrate))
    return reports


def _multiarm_report(config: ScenarioConfig, calibrate: bool) -> MetricsReport:
    rates = multiarm_error_rates(config, calibrate)
    rate = rates.fwer if config.hypothesis is Hypothesis.H0 else rates.conjunctive_rate
    stderr = float(np.sqrt(rate * (1 - rate) / rates.M))
    return MetricsReport(config.scenario_id, "ap-conjunctive", config.hypothesis.value, config.alpha, rate,
                         stderr, rates.M, calibrate, float("nan"),
                         details={"sidak_alpha": rates.sidak_alpha, "fwer": rates.fwer,
                                  "conjunctive_rate": rates.conjunctive_rate,
                                  "global_ap_rate": rates.global_ap_rate})


def cmd_sweep(args) -> int:
    d = _load(args)
    reports = sweep_reports(d, args)
    _write(args.out, reports_to_csv(reports))
    if args.out and args.out != "-":
        payload = [r.to_dict() for r in reports]
        metadata_path(args.out).write_text(json.dumps(payload, indent=2, default=float) + "\n")
    return EXIT_OK


# --- entry point -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aptest", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, alpha=True):
        p.add_argument("--config", help="scenario or grid YAML file")
        p.add_argument("--preset", help="bundled preset name")
        p.add_argument("--seed", type=int, help="master seed (overrides the file)")
        p.add_argument("--trajectories", type=int, help="Monte Carlo trajectory count")
        if alpha:
            p.add_argument("--alpha", type=float, help="significance level")
        p.add_argument("--out", help="output path ('-' for stdout)")

    sim = sub.add_parser("simulate", help="simulate a history or preset curves")
    common(sim, alpha=False)
    sim.add_argument("--index", type=int, default=0, help="trajectory index to simulate")
    sim.set_defaults(func=cmd_simulate)

    test = sub.add_parser("test", help="apply a test to a history file")
    common(test)
    test.add_argument("--history", required=True, help="history CSV (metadata JSON alongside)")
    test.add_argument("--test", choices=[t.value for t in TestKind], default="ap")
    test.add_argument("--null", help="AP null distribution CSV (q, pmf, exceedance)")
    test.add_argument("--calibrate", action="store_true", help="randomize to hit alpha exactly")
    test.set_defaults(func=cmd_test)

    sweep = sub.add_parser("sweep", help="error-rate table over a scenario grid")
    common(sweep)
    sweep.add_argument("--test", choices=[t.value for t in TestKind], help="restrict to one test")
    sweep.add_argument("--calibrate", action="store_true", help="randomize to hit alpha exactly")
    sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InapplicableTestError, DegenerateVarianceError) as exc:
        print(f"aptest: test not applicable: {exc}", file=sys.stderr)
        return EXIT_INAPPLICABLE
    except (ConfigError, ValueError, KeyError) as exc:
        print(f"aptest: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())

"""YAML scenario files with line-numbered validation errors.

A scenario file looks like::

    scenario_id: small-batch
    schedule: {T: 17, n: 3}
    prior: {mean: 0.0, variance: 10.0}
    rewards:
      regime: Stationary        # or NS1 / NS2
      mu: [0.0, 0.5]            # one mean per arm; arm 0 is the control
      sigma2_y: 10.0
      base_mean: 1.0            # NS1/NS2 only
      decay: 0.5
      delta: 0.5
    policy: StandardTS          # RestrictedTS_BOLS, RestrictedTS_AWAIPW, Oracle, UniformER
    clipping: {variant: FixedRange, pi_min: 0.1, pi_max: 0.9}   # optional override
    hypothesis: H1
    alpha: 0.05
    trajectories: 10000
    seed: 2024

Preset and grid files add a ``kind`` key (``scenario``, ``curves``, ``pmf``,
``sweep`` or ``fixture``) plus a ``base`` scenario that each entry of
``scenarios`` overrides key by key.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import yaml

from .core import BatchSchedule, ConfigError, GaussianPrior, RewardParams
from .harness import ScenarioConfig
from .policy import ClippingScheme, ClipVariant
from .rewards import RegimeVariant, RewardRegime

PRESETS = ("fig1", "fig2", "fig3", "nonstationary", "batchsizes", "clipping", "radar", "mturk")

SCENARIO_KEYS = {"scenario_id", "schedule", "prior", "rewards", "policy", "clipping", "hypothesis",
                 "alpha", "trajectories", "seed", "delta_null"}


class LineDict(dict):
    """A mapping that remembers the source line of each key."""

    def __init__(self, *args, line: int | None = None, key_lines: dict | None = None, source: str = "<config>"):
        super().__init__(*args)
        self.line = line
        self.key_lines = dict(key_lines or {})
        self.source = source

    def where(self, key=None) -> str:
        line = self.key_lines.get(key, self.line)
        return f"{self.source}:{line}" if line is not None else self.source


def _construct(node, source):
    if isinstance(node, yaml.MappingNode):
        out = LineDict(line=node.start_mark.line + 1, source=source)
        for key_node, value_node in node.value:
            key = key_node.value
            out[key] = _construct(value_node, source)
            out.key_lines[key] = key_node.start_mark.line + 1
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_construct(v, source) for v in node.value]
    return yaml.SafeLoader("").construct_object(node, deep=True)


def parse_yaml(text: str, source: str = "<config>") -> LineDict:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}" if mark else source
        raise ConfigError(f"{where}: YAML parse error: {getattr(exc, 'problem', exc)}") from None
    if node is None:
        return LineDict(source=source)
    data = _construct(node, source)
    if not isinstance(data, LineDict):
        raise ConfigError(f"{source}:1: top level must be a mapping")
    return data


def load_file(path) -> LineDict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_yaml(text, str(path))


def load_preset(name: str) -> LineDict:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    text = resources.files("aptest").joinpath("presets", f"{name}.yaml").read_text()
    return parse_yaml(text, f"preset:{name}")


def merge(base: LineDict, override: LineDict) -> LineDict:
    """Key-by-key override; nested mappings merge recursively."""
    out = LineDict(base, line=override.line, key_lines=base.key_lines, source=override.source)
    for key, value in override.items():
        if isinstance(value, LineDict) and isinstance(out.get(key), LineDict):
            value = merge(out[key], value)
        out[key] = value
        out.key_lines[key] = override.key_lines.get(key)
    return out


def _fail(d: LineDict, key, msg):
    raise ConfigError(f"{d.where(key)}: {key}: {msg}")


def _section(d: LineDict, key, required=True) -> LineDict:
    value = d.get(key)
    if value is None:
        if required:
            _fail(d, key, "missing required section")
        return LineDict(line=d.line, source=d.source)
    if not isinstance(value, LineDict):
        _fail(d, key, "expected a mapping")
    return value


def _number(d: LineDict, key, default=None, kind=float):
    value = d.get(key, default)
    if value is None:
        _fail(d, key, "missing required value")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(d, key, f"expected a number, got {value!r}")
    if kind is int and int(value) != value:
        _fail(d, key, f"expected an integer, got {value!r}")
    return kind(value)


def _check_keys(d: LineDict, allowed, what):
    for key in d:
        if key not in allowed:
            _fail(d, key, f"unknown {what} key")


def _build(d: LineDict, key, fn):
    """Run a constructor, attaching the source line of ``key`` to validation errors."""
    try:
        return fn()
    except ConfigError as exc:
        if str(exc).startswith(d.source):
            raise
        raise ConfigError(f"{d.where(key)}: {key}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"{d.where(key)}: {key}: {exc}") from None


def _clipping(d: LineDict):
    value = d.get("clipping")
    if value is None:
        return None
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return _build(d, "clipping", lambda: ClippingScheme.symmetric(float(value)))
    if not isinstance(value, LineDict):
        _fail(d, "clipping", "expected a mapping or a symmetric threshold")
    _check_keys(value, {"variant", "pi_min", "pi_max", "k", "exponent"}, "clipping")
    variant = value.get("variant", "None")
    kwargs = {k: _number(value, k) for k in ("pi_min", "pi_max", "k", "exponent") if k in value}
    return _build(value, "variant", lambda: ClippingScheme(ClipVariant(variant), **kwargs))


def scenario_from_dict(d: LineDict) -> ScenarioConfig:
    _check_keys(d, SCENARIO_KEYS | {"kind", "base", "scenarios", "tests", "hypotheses", "calibrate",
                                    "policies", "null"}, "scenario")
    sched = _section(d, "schedule")
    _check_keys(sched, {"T", "n"}, "schedule")
    schedule = _build(sched, "T", lambda: BatchSchedule(_number(sched, "T", kind=int), _number(sched, "n", 1, int)))
    pr = _section(d, "prior", required=False)
    _check_keys(pr, {"mean", "variance"}, "prior")
    prior = _build(pr, "variance", lambda: GaussianPrior(_number(pr, "mean", 0.0), _number(pr, "variance", 1.0)))
    rw = _section(d, "rewards")
    _check_keys(rw, {"regime", "mu", "sigma2_y", "base_mean", "decay", "delta"}, "rewards")
    mu = rw.get("mu", [0.0, 0.0])
    if not isinstance(mu, list) or not all(isinstance(m, (int, float)) and not isinstance(m, bool) for m in mu):
        _fail(rw, "mu", "expected a list of numbers")
    params = _build(rw, "sigma2_y", lambda: RewardParams(tuple(mu), _number(rw, "sigma2_y")))
    regime = _build(rw, "regime", lambda: RewardRegime(
        RegimeVariant(rw.get("regime", "Stationary")), params,
        base_mean=_number(rw, "base_mean", 1.0), decay=_number(rw, "decay", 0.5), delta=_number(rw, "delta", 0.5)))
    clipping = _clipping(d)
    kwargs = dict(schedule=schedule, regime=regime, prior=prior, clipping=clipping)
    for key, field_name, conv in (("policy", "policy", str), ("hypothesis", "hypothesis", str),
                                  ("scenario_id", "scenario_id", str)):
        if key in d:
            kwargs[field_name] = conv(d[key])
    if "alpha" in d:
        kwargs["alpha"] = _number(d, "alpha")
    if "trajectories" in d:
        kwargs["trajectories"] = _number(d, "trajectories", kind=int)
    if "seed" in d:
        kwargs["master_seed"] = _number(d, "seed", kind=int)
    if "delta_null" in d:
        kwargs["delta_null"] = _number(d, "delta_null")
    key = next((k for k in ("policy", "hypothesis", "alpha", "trajectories") if k in d), None)
    return _build(d, key, lambda: ScenarioConfig(**kwargs))


def expand_scenarios(d: LineDict) -> list[LineDict]:
    """Scenario mappings of a grid file: each entry of ``scenarios`` merged over ``base``."""
    base = d.get("base", LineDict(source=d.source))
    entries = d.get("scenarios") or []
    if not isinstance(entries, list):
        _fail(d, "scenarios", "expected a list")
    out = []
    for entry in entries:
        if not isinstance(entry, LineDict):
            _fail(d, "scenarios", "each scenario must be a mapping")
        out.append(merge(base, entry))
    return out

"""Experiment configuration files.

Configs are INI files (``key = value`` lines under ``[section]`` headers;
nested groups use dotted section names such as ``[base.boosting]``)::

    [experiment]
    name = linear-rct
    scenario = exact
    learners = all
    base_learners = linear
    seeds = 0-9

    [dgp]
    source = synthetic
    model = linear
    design = rct
    n = 2000
    K = 9
    sigma = 0.1

Lists are comma separated; ``a-b`` in ``seeds`` is an inclusive range.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from ..base_learners import (
    EmpiricalStratumSpec,
    GradientBoostedSpec,
    LinearBasisSpec,
    MultinomialLogisticSpec,
    RandomForestSpec,
    RegressionTreeSpec,
    SoftmaxBoostingSpec,
)
from ..meta_learners import SCENARIOS, Provenance, Scenario

BASE_LEARNERS = {
    "linear": LinearBasisSpec,
    "tree": RegressionTreeSpec,
    "forest": RandomForestSpec,
    "boosting": GradientBoostedSpec,
}
GPS_ESTIMATORS = {
    "logistic": MultinomialLogisticSpec,
    "boosting": SoftmaxBoostingSpec,
    "stratum": EmpiricalStratumSpec,
}
KNOWN_LEARNERS = ("T", "RegT", "S", "NvX", "M", "DR", "DR-T", "DR-S", "X", "X-T", "X-S", "RLin")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DataSource:
    """Where samples come from: a synthetic design or the well benchmark."""

    source: str = "synthetic"
    model: str = "linear"
    design: str = "rct"
    n: int = 2000
    K_values: tuple[int, ...] = (9,)
    sigma: float = 0.1
    selection_weight: float = 0.5
    fracture_table: str = "surrogate"
    efficiency: str = "default"


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    data: DataSource
    scenario: Scenario
    learners: tuple[str, ...]
    base_learners: tuple[tuple[str, dict], ...]
    gps: tuple[str, dict]
    seeds: tuple[int, ...]
    rlin_basis: str = "default"
    output_dir: str = "results"

    def semantic(self) -> dict:
        """Everything that affects results (the output location does not)."""
        return {
            "name": self.name,
            "data": {f.name: getattr(self.data, f.name) for f in fields(self.data)},
            "scenario": {
                "name": self.scenario.name,
                "gps": self.scenario.gps.value,
                "mu": self.scenario.mu.value,
                "m": self.scenario.m.value,
            },
            "learners": list(self.learners),
            "base_learners": [[n, p] for n, p in self.base_learners],
            "gps": [self.gps[0], self.gps[1]],
            "seeds": list(self.seeds),
            "rlin_basis": self.rlin_basis,
        }

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.semantic(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def base_spec(self, name: str):
        params = dict(self.base_learners)[name]
        return BASE_LEARNERS[name](**_spec_kwargs(BASE_LEARNERS[name], params))

    def gps_spec(self):
        name, params = self.gps
        return GPS_ESTIMATORS[name](**_spec_kwargs(GPS_ESTIMATORS[name], params))


def _spec_kwargs(cls, params: dict) -> dict:
    tuples = {f.name for f in fields(cls) if "tuple" in str(f.type)}
    return {k: tuple(v) if k in tuples and isinstance(v, list) else v for k, v in params.items()}


def _list(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _seeds(value: str) -> tuple[int, ...]:
    out: list[int] = []
    for part in _list(value):
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return tuple(out)


def _scalar(value: str):
    v = value.strip()
    low = v.lower()
    if low in ("none", "null"):
        return None
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    return v


def _section(parser: configparser.ConfigParser, name: str) -> dict:
    return dict(parser[name]) if parser.has_section(name) else {}


def _params(parser, prefix: str, name: str, allowed_cls) -> dict:
    raw = _section(parser, f"{prefix}.{name}")
    allowed = {f.name for f in fields(allowed_cls)}
    params = {}
    for key, value in raw.items():
        if key not in allowed:
            raise ConfigError(f"[{prefix}.{name}] unknown parameter {key!r}")
        params[key] = _scalar(value)
    try:
        spec = allowed_cls(**params)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"[{prefix}.{name}] {err}") from None
    # resolved values, so spelling out a default leaves the hash unchanged
    return {f.name: _plain(getattr(spec, f.name)) for f in sorted(fields(allowed_cls), key=lambda f: f.name)}


def _plain(value):
    return list(value) if isinstance(value, tuple) else value


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as err:
        raise ConfigError(f"unreadable config: {err}") from None
    exp = _section(parser, "experiment")
    dgp = _section(parser, "dgp")
    if not exp:
        raise ConfigError("missing [experiment] section")

    try:
        data = DataSource(
            source=dgp.get("source", "synthetic").strip(),
            model=dgp.get("model", "linear").strip(),
            design=dgp.get("design", "rct").strip(),
            n=int(dgp.get("n", 2000)),
            K_values=tuple(int(k) for k in _list(dgp.get("K", "9"))),
            sigma=float(dgp.get("sigma", 0.1)),
            selection_weight=float(dgp.get("selection_weight", 0.5)),
            fracture_table=dgp.get("fracture_table", "surrogate").strip(),
            efficiency=dgp.get("efficiency", "default").strip(),
        )
    except ValueError as err:
        raise ConfigError(f"[dgp] {err}") from None
    if data.source not in ("synthetic", "egs"):
        raise ConfigError(f"[dgp] unknown source {data.source!r}")
    if data.source == "synthetic" and (data.model not in ("linear", "hazard") or data.design not in ("rct", "preferential")):
        raise ConfigError("[dgp] model must be linear|hazard and design rct|preferential")
    if not data.K_values or min(data.K_values) < 1:
        raise ConfigError("[dgp] K must list positive integers")

    scen_name = exp.get("scenario", "estimated").strip()
    if scen_name == "custom":
        sc = _section(parser, "scenario")
        try:
            scenario = Scenario("custom", sc.get("gps", "estimated"), sc.get("mu", "estimated"), sc.get("m", "estimated"))
        except ValueError:
            raise ConfigError(f"[scenario] provenance must be one of {[p.value for p in Provenance]}") from None
    elif scen_name in SCENARIOS:
        scenario = SCENARIOS[scen_name]
    else:
        raise ConfigError(f"unknown scenario {scen_name!r}; choose from {sorted(SCENARIOS)} or custom")

    learners_raw = _list(exp.get("learners", "all"))
    learners = scenario.learners() if learners_raw == ["all"] else tuple(learners_raw)
    unknown = [t for t in learners if t not in KNOWN_LEARNERS]
    if unknown:
        raise ConfigError(f"unknown learners {unknown}")
    if not learners:
        raise ConfigError("learner list is empty")

    base_names = _list(exp.get("base_learners", "linear"))
    if not base_names:
        raise ConfigError("base learner list is empty")
    bases = []
    for name in base_names:
        if name not in BASE_LEARNERS:
            raise ConfigError(f"unknown base learner {name!r}; choose from {sorted(BASE_LEARNERS)}")
        bases.append((name, _params(parser, "base", name, BASE_LEARNERS[name])))

    gps_name = exp.get("gps", "boosting").strip()
    if gps_name not in GPS_ESTIMATORS:
        raise ConfigError(f"unknown gps estimator {gps_name!r}; choose from {sorted(GPS_ESTIMATORS)}")
    gps = (gps_name, _params(parser, "gps", gps_name, GPS_ESTIMATORS[gps_name]))

    try:
        seeds = _seeds(exp.get("seeds", "0"))
    except ValueError:
        raise ConfigError("seeds must be integers or ranges a-b") from None

    return ExperimentConfig(
        name=exp.get("name", "experiment").strip(),
        data=data,
        scenario=scenario,
        learners=tuple(learners),
        base_learners=tuple(bases),
        gps=gps,
        seeds=seeds,
        rlin_basis=exp.get("rlin_basis", "default").strip(),
        output_dir=exp.get("output_dir", "results").strip(),
    )


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read {path}: {err}") from None
    return parse_config(text)

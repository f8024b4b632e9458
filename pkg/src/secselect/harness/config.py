"""Run configuration: loading, defaults, validation and object construction."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import yaml

from secselect.dqn.training import TrainConfig
from secselect.environment.env import ServiceSelectionEnv, TaskSampler
from secselect.environment.scenario import (
    Scenario,
    generate_scenario_skr,
    generate_scenario_udr,
    resolve_generator_config,
)
from secselect.errors import ConfigurationError
from secselect.sla import OperationRequirement, UserRequirements, class_from_labels, derive_requirements

SCENARIO_SOURCES = ("generate-udr", "generate-skr", "load")
COP_MODES = ("count", "importance")
STEPS_MODES = ("traversed", "visited", "accepted")
UNNO_MODES = ("acceptance", "initial")

DEFAULT_RUN: dict[str, Any] = {
    "seed": 0,
    "out": "runs/default",
    "scenario": {"source": "generate-udr", "seed": 0, "generator": {}, "archive": None},
    "requirements": {"required_class": {"generic": ["HC", "HI", "HA"]}, "loss_budget": 1.0},
    "contact_size": 0,
    "epochs": 50,
    "episodes_per_epoch": 50,
    "delta_t": None,
    "loss_budget": None,
    "task": TaskSampler().to_config(),
    "train": {},
    "validation": {"episodes": 100, "seed": None},
    "evaluation": {"episodes": 200, "seed": None},
    "checkpoint_every": 10,
    "metrics": {"cop": "count", "steps": "traversed", "unno": "acceptance", "step_log": False},
}


def _merge(base: Mapping, override: Mapping, path: str = "") -> dict:
    out = copy.deepcopy(dict(base))
    for k, v in override.items():
        if k not in out:
            raise ConfigurationError(f"unknown config key {path + k!r}")
        # free-form sub-documents are replaced, not merged key by key
        if isinstance(v, Mapping) and isinstance(out[k], Mapping) and k not in ("generator", "requirements", "train", "task"):
            out[k] = _merge(out[k], v, f"{path}{k}.")
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config_file(path: str | Path) -> dict:
    """Read a YAML (or JSON, a YAML subset) run config."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"{path}: cannot read config ({exc})") from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{path}: malformed config: {exc}") from None
    if doc is None:
        return {}
    if not isinstance(doc, Mapping):
        raise ConfigurationError(f"{path}: config must be a mapping at top level")
    return dict(doc)


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run configuration; ``doc`` holds every defaulted value."""

    doc: dict

    @classmethod
    def from_dict(cls, raw: Mapping | None = None, **overrides) -> "RunConfig":
        doc = _merge(DEFAULT_RUN, dict(raw or {}))
        for k, v in overrides.items():
            if v is not None:
                doc[k] = v
        return cls(_resolve(doc))

    @classmethod
    def from_file(cls, path: str | Path | None, **overrides) -> "RunConfig":
        return cls.from_dict(load_config_file(path) if path else {}, **overrides)

    def __getitem__(self, key: str) -> Any:
        return self.doc[key]

    @property
    def seed(self) -> int:
        return self.doc["seed"]

    @property
    def out(self) -> Path:
        return Path(self.doc["out"])

    @property
    def train(self) -> TrainConfig:
        return TrainConfig.from_dict(self.doc["train"])

    @property
    def task_sampler(self) -> TaskSampler:
        return TaskSampler.from_config(self.doc["task"])

    def with_overrides(self, **kw) -> "RunConfig":
        doc = copy.deepcopy(self.doc)
        for k, v in kw.items():
            doc[k] = v
        return RunConfig(_resolve(doc))

    def dumps(self) -> str:
        return json.dumps(self.doc, indent=2, sort_keys=True)


def _resolve(doc: dict) -> dict:
    for key in ("epochs", "episodes_per_epoch"):
        if not isinstance(doc[key], int) or doc[key] < 1:
            raise ConfigurationError(f"{key} must be an integer >= 1, got {doc[key]!r}")
    if not isinstance(doc["contact_size"], int) or doc["contact_size"] < 0:
        raise ConfigurationError(f"contact_size must be an integer >= 0, got {doc['contact_size']!r}")
    if not isinstance(doc["seed"], int):
        raise ConfigurationError(f"seed must be an integer, got {doc['seed']!r}")
    if not isinstance(doc["checkpoint_every"], int) or doc["checkpoint_every"] < 0:
        raise ConfigurationError("checkpoint_every must be an integer >= 0 (0 disables periodic checkpoints)")
    sc = doc["scenario"]
    if sc["source"] not in SCENARIO_SOURCES:
        raise ConfigurationError(f"scenario.source must be one of {SCENARIO_SOURCES}, got {sc['source']!r}")
    if sc["source"] == "load" and not sc.get("archive"):
        raise ConfigurationError("scenario.source 'load' needs scenario.archive")
    if sc["source"] != "load":
        gen = resolve_generator_config(sc.get("generator") or {})
        if doc["delta_t"] is not None:
            gen["paths"]["delta_t"] = float(doc["delta_t"])
        sc["generator"] = gen
        doc["delta_t"] = float(gen["paths"]["delta_t"])
    if doc["delta_t"] is not None and not float(doc["delta_t"]) > 0:
        raise ConfigurationError("delta_t must be > 0")
    # an inline requirements document fixes the budget unless overridden here;
    # archives and requirement files keep null and are read at build time
    if doc["loss_budget"] is None and isinstance(doc["requirements"], Mapping):
        doc["loss_budget"] = float(doc["requirements"].get("loss_budget", 1.0))
    if doc["loss_budget"] is not None and not float(doc["loss_budget"]) > 0:
        raise ConfigurationError("loss_budget must be > 0")
    train = dict(doc["train"] or {})
    train.setdefault("seed", doc["seed"])
    doc["train"] = TrainConfig.from_dict(train).to_dict()
    doc["task"] = TaskSampler.from_config(doc["task"]).to_config()
    for block, offset in (("validation", 1), ("evaluation", 2)):
        if not isinstance(doc[block]["episodes"], int) or doc[block]["episodes"] < 1:
            raise ConfigurationError(f"{block}.episodes must be an integer >= 1")
        if doc[block]["seed"] is None:
            doc[block]["seed"] = doc["seed"] + offset
    m = doc["metrics"]
    for key, allowed in (("cop", COP_MODES), ("steps", STEPS_MODES), ("unno", UNNO_MODES)):
        if m[key] not in allowed:
            raise ConfigurationError(f"metrics.{key} must be one of {allowed}, got {m[key]!r}")
    return doc


def build_scenario(config: RunConfig) -> Scenario:
    sc = config["scenario"]
    if sc["source"] == "generate-udr":
        scenario = generate_scenario_udr(sc["generator"], int(sc["seed"]))
    elif sc["source"] == "generate-skr":
        scenario = generate_scenario_skr(sc["generator"], int(sc["seed"]))
    else:
        scenario = Scenario.load(sc["archive"])
        scenario.validate()
    return scenario


def requirements_from_doc(doc: Mapping, scenario: Scenario) -> UserRequirements:
    """Either a direct document (``required_class`` per service type) or a survey
    whose answers are classified with the scenario's label rules."""
    doc = dict(doc)
    if "required_class" not in doc:
        if scenario.rules is None:
            raise ConfigurationError("survey-style requirements need a scenario with label rules")
        return derive_requirements(doc, scenario.rules, scenario.lattice, doc.pop("importance_aggregate", "max"))
    lat = scenario.lattice
    classes = {str(k): class_from_labels(lat, v) for k, v in doc["required_class"].items()}
    importance = {}
    for phi, imp in (doc.get("importance") or {}).items():
        vals = tuple(float(imp.get(p.id, 1.0)) for p in lat.properties) if isinstance(imp, Mapping) else tuple(imp)
        importance[str(phi)] = vals
    tau = {str(op): OperationRequirement(float(r["importance"]), float(r["deadline_s"]))
           for op, r in (doc.get("tau_u") or {}).items()}
    unknown = set(doc) - {"required_class", "importance", "tau_u", "loss_budget"}
    if unknown:
        raise ConfigurationError(f"unknown requirements key(s) {sorted(unknown)}")
    return UserRequirements(classes, importance, tau, float(doc.get("loss_budget", 1.0)))


def load_requirements(config: RunConfig, scenario: Scenario) -> UserRequirements:
    req_doc = config["requirements"]
    if isinstance(req_doc, str):
        req_doc = load_config_file(req_doc)
    reqs = requirements_from_doc(req_doc, scenario)
    if config["loss_budget"] is not None:
        reqs = UserRequirements(reqs.required_class, reqs.property_importance, reqs.tau_u, float(config["loss_budget"]))
    return reqs


def build_env(config: RunConfig, scenario: Scenario | None = None) -> ServiceSelectionEnv:
    """Scenario + requirements + contact size, checked for consistency up front."""
    scenario = scenario or build_scenario(config)
    reqs = load_requirements(config, scenario)
    missing = set(scenario.service_types) - set(reqs.required_class)
    if missing:
        raise ConfigurationError(f"requirements give no class for service type(s) {sorted(missing)}")
    env = ServiceSelectionEnv(scenario, reqs, config["contact_size"], config.task_sampler)
    lo, hi = env.task_sampler.n_required
    if not 1 <= lo <= hi <= env.m:
        raise ConfigurationError(f"task.n_required {env.task_sampler.n_required} invalid for {env.m} operations")
    return env

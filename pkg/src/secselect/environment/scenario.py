"""Scenarios: operations, services, providers at AMPs and agent paths.

Two generators are provided.  ``generate_scenario_udr`` spreads services
uniformly over AMPs; ``generate_scenario_skr`` ranks services by a Zipf law,
binds rare operations to rare services and by default pushes frequent
services towards weak security classes.  Both are deterministic under their seed, and the
resulting archive embeds the generator config so it can be regenerated.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from secselect import catalog
from secselect.environment.ingest import Amp, Path, ingest_paths
from secselect.errors import ConfigurationError, ValidationError
from secselect.lattice import BOTTOM, SecurityClass, WeightedSecurityLattice
from secselect.sla import AttributeAssignment, RuleSet, SecSLA, classify_service, sla_from_doc, sla_to_doc

ARCHIVE_FORMAT = "secselect.scenario/1"


@dataclass(frozen=True)
class OperationUniverse:
    operations: tuple[str, ...]
    min_class: tuple[SecurityClass, ...]

    def __post_init__(self) -> None:
        if not self.operations:
            raise ConfigurationError("operation universe is empty")
        if len(set(self.operations)) != len(self.operations):
            raise ConfigurationError(f"duplicate operation symbols in {self.operations}")
        if len(self.min_class) != len(self.operations):
            raise ConfigurationError("one minimum security class per operation is required")

    @property
    def m(self) -> int:
        return len(self.operations)

    def index(self, op: str) -> int:
        try:
            return self.operations.index(op)
        except ValueError:
            raise ConfigurationError(f"unknown operation {op!r}") from None


@dataclass(frozen=True)
class ServiceDescriptor:
    sla: SecSLA
    security_class: SecurityClass
    ops_onehot: tuple[int, ...]


@dataclass(frozen=True)
class Provider:
    id: str
    location: tuple[float, float]
    service: int


@dataclass(frozen=True)
class Scenario:
    lattice: WeightedSecurityLattice
    universe: OperationUniverse
    service_types: tuple[str, ...]
    services: tuple[ServiceDescriptor, ...]
    providers: tuple[Provider, ...]
    paths: tuple[Path, ...]
    rules: RuleSet | None = None
    generator: Mapping[str, Any] | None = field(default=None, compare=False)

    @property
    def m(self) -> int:
        return self.universe.m

    def onehot_matrix(self) -> np.ndarray:
        return np.array([s.ops_onehot for s in self.services], dtype=np.float64)

    def validate(self) -> None:
        """Check every structural invariant; raises ValidationError on the first failure."""
        lat = self.lattice
        if not self.paths:
            raise ValidationError("scenario has no paths")
        for c in self.universe.min_class:
            lat.check(c)
        for j, svc in enumerate(self.services):
            lat.check(svc.security_class)
            if len(svc.ops_onehot) != self.m or any(v not in (0, 1) for v in svc.ops_onehot):
                raise ValidationError(f"service {j}: malformed operation vector {svc.ops_onehot}")
            if not any(svc.ops_onehot):
                raise ValidationError(f"service {j}: offers no operation")
            ops = tuple(sorted(op for op, v in zip(self.universe.operations, svc.ops_onehot) if v))
            if ops != svc.sla.operations:
                raise ValidationError(f"service {j}: SLA operations {svc.sla.operations} differ from {ops}")
            if svc.sla.service_type not in self.service_types:
                raise ValidationError(f"service {j}: unknown service type {svc.sla.service_type!r}")
            for i, v in enumerate(svc.ops_onehot):
                if v and not lat.dominates(svc.security_class, self.universe.min_class[i]):
                    raise ValidationError(
                        f"service {j}: class {lat.labels_of(svc.security_class)} is below the minimum of "
                        f"operation {self.universe.operations[i]!r}"
                    )
            if self.rules is not None:
                derived = classify_service(svc.sla, self.rules, lat)
                if derived != svc.security_class:
                    raise ValidationError(
                        f"service {j}: SLA classifies to {lat.labels_of(derived)}, "
                        f"stored class is {lat.labels_of(svc.security_class)}"
                    )
        for p in self.providers:
            if not 0 <= p.service < len(self.services):
                raise ValidationError(f"provider {p.id!r}: service index {p.service} out of range")
        for path in self.paths:
            if path.amp_steps == 0:
                raise ValidationError(f"path {path.id!r} meets no AMP")
            for s in path.steps:
                if s is not None and not 0 <= s < len(self.providers):
                    raise ValidationError(f"path {path.id!r}: provider index {s} out of range")

    # -- archive ----------------------------------------------------------------

    def to_doc(self) -> dict:
        lat = self.lattice
        return {
            "format": ARCHIVE_FORMAT,
            "lattice": {"loss_mode": lat.loss_mode, "properties": lat.to_config()},
            "rules": self.rules.to_doc() if self.rules is not None else None,
            "operations": [
                {"name": op, "min_class": list(lat.labels_of(c))}
                for op, c in zip(self.universe.operations, self.universe.min_class)
            ],
            "service_types": list(self.service_types),
            "services": [
                {"sla": sla_to_doc(s.sla), "class": list(lat.labels_of(s.security_class))} for s in self.services
            ],
            "providers": [
                {"id": p.id, "location": list(p.location), "service": p.service} for p in self.providers
            ],
            "paths": [
                {"id": p.id, "delta_t": p.delta_t, "steps": [-1 if s is None else s for s in p.steps]}
                for p in self.paths
            ],
            "generator": self.generator,
        }

    @classmethod
    def from_doc(cls, doc: Mapping) -> "Scenario":
        if doc.get("format") != ARCHIVE_FORMAT:
            raise ConfigurationError(f"not a scenario archive (format {doc.get('format')!r})")
        lat = WeightedSecurityLattice.from_config(doc["lattice"]["properties"], doc["lattice"].get("loss_mode", "shortfall"))
        rules = RuleSet.from_doc(doc["rules"]) if doc.get("rules") is not None else None
        ops = tuple(o["name"] for o in doc["operations"])
        universe = OperationUniverse(ops, tuple(lat.make_class(o["min_class"]) for o in doc["operations"]))
        types = tuple(doc["service_types"])
        services = []
        for s in doc["services"]:
            sla = sla_from_doc(s["sla"], ops, types)
            onehot = tuple(int(op in sla.operations) for op in ops)
            services.append(ServiceDescriptor(sla, lat.make_class(s["class"]), onehot))
        providers = tuple(Provider(p["id"], tuple(p["location"]), int(p["service"])) for p in doc["providers"])
        paths = tuple(
            Path(p["id"], tuple(None if s < 0 else int(s) for s in p["steps"]), float(p["delta_t"])) for p in doc["paths"]
        )
        return cls(lat, universe, types, tuple(services), providers, paths, rules, doc.get("generator"))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_doc(), fh, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "Scenario":
        with open(path, encoding="utf-8") as fh:
            return cls.from_doc(json.load(fh))


# -- generator configuration -------------------------------------------------------

DEFAULT_GENERATOR: dict[str, Any] = {
    "operations": list(catalog.DEFAULT_OPERATIONS),
    "n_services": 10,
    "ops_per_service": [1, 3],
    "service_types": ["generic"],
    # chain-index range (0 = strongest label) from which each operation's minimum label is drawn
    "op_min_rank": [1, 3],
    "lattice": None,
    "rules": None,
    "witnesses": None,
    "paths": {
        "source": "synthetic",
        "n_paths": 186,
        "length": [30, 90],
        "amp_prob": 0.5,
        "n_amps": 60,
        "delta_t": 30.0,
    },
    "skew": 1.5,
    "rare_ops": 2,
    # SKR only: which end of the frequency ranking draws from the weak half of its
    # feasible classes, "frequent" (the head) or "rare" (the tail)
    "weak_end": "frequent",
    # UDR only: probability that a service draws its class from the strong half of
    # its feasible range (else the weak half); null keeps the plain uniform draw
    "strong_share": None,
}


def _merge(base: Mapping, override: Mapping | None) -> dict:
    out = copy.deepcopy(dict(base))
    for k, v in (override or {}).items():
        if isinstance(v, Mapping) and isinstance(out.get(k), Mapping):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def resolve_generator_config(config: Mapping | None) -> dict:
    cfg = _merge(DEFAULT_GENERATOR, config)
    if isinstance(cfg["operations"], int):
        cfg["operations"] = [f"op{i}" for i in range(cfg["operations"])]
    return cfg


def _lattice_rules_witnesses(cfg: Mapping) -> tuple[WeightedSecurityLattice, RuleSet | None, dict | None]:
    if cfg["lattice"] is None:
        return catalog.cia_lattice(), catalog.cia_rules(), catalog.CIA_WITNESSES
    lat_doc = cfg["lattice"]
    lat = WeightedSecurityLattice.from_config(lat_doc["properties"], lat_doc.get("loss_mode", "shortfall"))
    rules = RuleSet.from_doc(cfg["rules"]) if cfg.get("rules") else None
    witnesses = cfg.get("witnesses")
    if rules is not None and witnesses is None:
        raise ConfigurationError("custom label rules need a 'witnesses' table to synthesize SLAs")
    if rules is not None:
        rules.validate(lat)
    return lat, rules, witnesses


def _sla_assignments(lat: WeightedSecurityLattice, c: SecurityClass, witnesses: Mapping | None):
    if witnesses is None:
        return ()
    merged: dict[str, Any] = {}
    for p, r in zip(lat.properties, c.ranks):
        label = p.labels[r]
        w = witnesses.get(p.id, {}).get(label, witnesses.get(p.id, {}).get("−") if label == BOTTOM else None)
        if w is None:
            raise ConfigurationError(f"no witness assignment for property {p.id!r} label {label!r}")
        for k, v in w.items():
            if k in merged and merged[k] != v:
                raise ConfigurationError(f"witness attribute {k!r} is shared by two properties")
            merged[k] = v
    return tuple(AttributeAssignment(k, float(v) if isinstance(v, (int, float)) and not isinstance(v, bool) else v)
                 for k, v in merged.items())


def _op_min_classes(lat, m: int, rank_range, rng) -> tuple[SecurityClass, ...]:
    lo, hi = rank_range
    out = []
    for _ in range(m):
        ranks = []
        for p in lat.properties:
            a, b = min(lo, p.depth - 1), min(hi, p.depth - 1)
            ranks.append(int(rng.integers(a, b + 1)))
        out.append(SecurityClass(tuple(ranks)))
    return tuple(out)


def _draw_op_sets(n_services: int, m: int, per_service, rng, pools=None, tail=None) -> list[np.ndarray]:
    """Operation subsets per service; every operation is offered by at least one service.

    ``tail`` maps a service index to an operation forced into its set (it
    replaces one drawn operation when the set is already full).
    """
    lo, hi = per_service
    if not 1 <= lo <= hi:
        raise ConfigurationError(f"ops_per_service must satisfy 1 <= lo <= hi, got {per_service}")
    for _ in range(1000):
        sets = []
        for j in range(n_services):
            pool = np.arange(m) if pools is None else np.asarray(pools[j])
            k = int(rng.integers(min(lo, len(pool)), min(hi, len(pool)) + 1))
            chosen = rng.choice(pool, size=k, replace=False)
            if tail and j in tail:
                chosen = np.append(chosen[: min(k, hi - 1)], tail[j])
            sets.append(np.sort(chosen))
        if len(np.unique(np.concatenate(sets))) == m:
            return sets
    raise ConfigurationError("could not cover every operation with the configured services")


def _sample_class(lat, floor: SecurityClass, rng, bias: str | None = None) -> SecurityClass:
    """Uniform class among those dominating ``floor``; ``bias`` restricts each property to
    the weaker ("low") or stronger ("high") half of its feasible range."""
    ranks = []
    for f in floor.ranks:
        lo, hi = 0, f
        if bias == "low":
            lo = (f + 1) // 2
        elif bias == "high":
            hi = f // 2
        ranks.append(int(rng.integers(lo, hi + 1)))
    return SecurityClass(tuple(ranks))


def _build_services(lat, universe, types, op_sets, class_bias, rng, witnesses) -> tuple[ServiceDescriptor, ...]:
    services = []
    for j, ops in enumerate(op_sets):
        floor = lat.join(*(universe.min_class[i] for i in ops))
        c = _sample_class(lat, floor, rng, class_bias[j] if class_bias else None)
        onehot = tuple(int(i in set(ops.tolist())) for i in range(universe.m))
        stype = types[int(rng.integers(len(types)))]
        sla = SecSLA(
            f"svc{j:03d}",
            stype,
            tuple(universe.operations[i] for i in ops),
            _sla_assignments(lat, c, witnesses),
        )
        services.append(ServiceDescriptor(sla, c, onehot))
    return tuple(services)


def _synthetic_paths(pcfg: Mapping, rng) -> tuple[list[Amp], list[Path]]:
    n_amps = int(pcfg["n_amps"])
    if n_amps < 1:
        raise ConfigurationError("synthetic paths need at least one AMP")
    amps = [Amp(f"amp{j:04d}", float(rng.uniform(0, 1)), float(rng.uniform(0, 1))) for j in range(n_amps)]
    lo, hi = pcfg["length"]
    prob = float(pcfg["amp_prob"])
    if not 0 < prob <= 1:
        raise ConfigurationError(f"amp_prob must lie in (0, 1], got {prob}")
    paths = []
    while len(paths) < int(pcfg["n_paths"]):
        n = int(rng.integers(lo, hi + 1))
        hit = rng.random(n) < prob
        who = rng.integers(0, n_amps, size=n)
        steps = tuple(int(w) if h else None for h, w in zip(hit, who))
        if any(s is not None for s in steps):
            paths.append(Path(f"path{len(paths):04d}", steps, float(pcfg["delta_t"])))
    return amps, paths


def _load_paths(pcfg: Mapping, rng) -> tuple[list[Amp], list[Path]]:
    source = pcfg.get("source", "synthetic")
    if source == "synthetic":
        amps, paths = _synthetic_paths(pcfg, rng)
    elif source == "csv":
        from secselect.environment.ingest import read_amps

        amps = read_amps(pcfg["amps"])
        paths = ingest_paths(pcfg["trips"], pcfg["amps"], float(pcfg.get("radius_m", 50.0)), float(pcfg["delta_t"]))
    else:
        raise ConfigurationError(f"unknown path source {source!r}")
    if not paths:
        raise ConfigurationError("path set is empty")
    if int(pcfg.get("max_paths", 0) or 0) > 0:
        paths = paths[: int(pcfg["max_paths"])]
    return amps, paths


def zipf_weights(n: int, s: float) -> np.ndarray:
    if not s > 0:
        raise ConfigurationError(f"Zipf exponent must be > 0, got {s}")
    w = np.arange(1, n + 1, dtype=np.float64) ** (-s)
    return w / w.sum()


def _assemble(kind, cfg, seed, lat, rules, universe, types, services, amps, paths, weights, rng) -> Scenario:
    if weights is None:
        assign = rng.integers(0, len(services), size=len(amps))
    else:
        assign = rng.choice(len(services), size=len(amps), p=weights)
    providers = tuple(Provider(a.id, (a.lat, a.lon), int(s)) for a, s in zip(amps, assign))
    gen = {"kind": kind, "seed": int(seed), "config": cfg}
    scenario = Scenario(lat, universe, tuple(types), services, providers, tuple(paths), rules, gen)
    scenario.validate()
    return scenario


def generate_scenario_udr(config: Mapping | None, seed: int) -> Scenario:
    """Services with uniform operation subsets, spread uniformly over AMPs."""
    cfg = resolve_generator_config(config)
    rng = np.random.default_rng(seed)
    lat, rules, witnesses = _lattice_rules_witnesses(cfg)
    amps, paths = _load_paths(cfg["paths"], rng)
    ops = tuple(cfg["operations"])
    universe = OperationUniverse(ops, _op_min_classes(lat, len(ops), cfg["op_min_rank"], rng))
    n = int(cfg["n_services"])
    op_sets = _draw_op_sets(n, len(ops), cfg["ops_per_service"], rng)
    bias = None
    if cfg["strong_share"] is not None:
        share = float(cfg["strong_share"])
        if not 0.0 <= share <= 1.0:
            raise ConfigurationError(f"strong_share must lie in [0, 1], got {share}")
        bias = ["high" if u < share else "low" for u in rng.random(n)]
    services = _build_services(lat, universe, cfg["service_types"], op_sets, bias, rng, witnesses)
    return _assemble("udr", cfg, seed, lat, rules, universe, cfg["service_types"], services, amps, paths, None, rng)


def generate_scenario_skr(config: Mapping | None, seed: int) -> Scenario:
    """Zipf-skewed service frequencies with rare operations on rare services.

    Services are ranked by index (service 0 is the most frequent).  The
    ``rare_ops`` rarest operations are offered only by the tail services,
    one per tail service in round-robin.  The more frequent half of the
    services draws classes from the weak half of the feasible set, the
    rest from the strong half; ``weak_end: rare`` swaps the two halves.
    """
    cfg = resolve_generator_config(config)
    s = float(cfg["skew"])
    if not s > 0:
        raise ConfigurationError(f"SKR skew must be > 0, got {s}")
    rng = np.random.default_rng(seed)
    lat, rules, witnesses = _lattice_rules_witnesses(cfg)
    amps, paths = _load_paths(cfg["paths"], rng)
    ops = tuple(cfg["operations"])
    m, n = len(ops), int(cfg["n_services"])
    n_rare = int(cfg["rare_ops"])
    if not 0 <= n_rare < m:
        raise ConfigurationError(f"rare_ops must lie in [0, {m - 1}], got {n_rare}")
    if n_rare > n // 2:
        raise ConfigurationError("need at least two services per rare operation")
    universe = OperationUniverse(ops, _op_min_classes(lat, m, cfg["op_min_rank"], rng))
    perm = rng.permutation(m)
    common, rare = perm[: m - n_rare], perm[m - n_rare:]
    n_tail = max(n_rare, n // 5) if n_rare else 0
    tail = {j: int(rare[k % n_rare]) for k, j in enumerate(range(n - n_tail, n))}
    op_sets = _draw_op_sets(n, m, cfg["ops_per_service"], rng, [common] * n, tail)
    weak_end = cfg["weak_end"]
    if weak_end not in ("frequent", "rare"):
        raise ConfigurationError(f"weak_end must be 'frequent' or 'rare', got {weak_end!r}")
    head, tail_bias = ("low", "high") if weak_end == "frequent" else ("high", "low")
    bias = [head if j < n // 2 else tail_bias for j in range(n)]
    services = _build_services(lat, universe, cfg["service_types"], op_sets, bias, rng, witnesses)
    return _assemble("skr", cfg, seed, lat, rules, universe, cfg["service_types"], services, amps, paths,
                     zipf_weights(n, s), rng)


def regenerate(scenario: Scenario) -> Scenario:
    """Rebuild a generated scenario from its embedded generator config and seed."""
    gen = scenario.generator
    if not gen:
        raise ConfigurationError("scenario carries no generator record")
    fn = {"udr": generate_scenario_udr, "skr": generate_scenario_skr}[gen["kind"]]
    return fn(gen["config"], gen["seed"])


def mean_service_loss(scenario: Scenario, required: SecurityClass) -> float:
    """Average normalized loss of the services met at AMPs (weighted by AMP count)."""
    lat = scenario.lattice
    losses = [lat.normalized_security_loss(scenario.services[p.service].security_class, required) for p in scenario.providers]
    return float(math.fsum(losses) / len(losses))

"""Machine-readable SecSLAs, label rules and user requirement surveys.

Services publish attribute assignments (facts).  Label rules are
negation-free formulas over constraints on those facts; a service's security
class takes, per property, the strongest label whose formula holds.
"""

from __future__ import annotations

import json
import math
import operator
from dataclasses import dataclass, field
from typing import Any, Callable, Collection, Iterable, Mapping, Sequence, Union

import numpy as np

from secselect.errors import ConfigurationError, EvaluationError, ParseError, StructuralError, ValidationError
from secselect.lattice import BOTTOM, SecurityClass, WeightedSecurityLattice

_ORDERING = {
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}
_EQUALITY = {
    "=": operator.eq,
    "!=": operator.ne,
}
_OP_ALIASES = {"==": "=", "≠": "!=", "<>": "!=", "≤": "<=", "≥": ">="}


def _canonical_op(op: str) -> str:
    op = _OP_ALIASES.get(op, op)
    if op not in _ORDERING and op not in _EQUALITY:
        raise ParseError(f"unknown comparison operator {op!r}")
    return op


@dataclass(frozen=True)
class Quantity:
    value: float
    unit: str | None = None


Value = Union[str, float, int, bool, Quantity]


def _value_from_doc(raw: Any) -> Value:
    if isinstance(raw, Mapping):
        if "value" not in raw:
            raise ParseError(f"quantity needs a 'value' field: {raw!r}")
        return Quantity(float(raw["value"]), raw.get("unit"))
    if isinstance(raw, (bool, str)):
        return raw
    if isinstance(raw, (int, float)):
        return float(raw)
    raise ParseError(f"unsupported attribute value {raw!r}")


def _value_to_doc(value: Value) -> Any:
    if isinstance(value, Quantity):
        return {"value": value.value, "unit": value.unit} if value.unit is not None else {"value": value.value}
    return value


def _numeric(value: Value) -> tuple[float, str | None] | None:
    if isinstance(value, bool):
        return None
    if isinstance(value, Quantity):
        return value.value, value.unit
    if isinstance(value, (int, float)):
        return float(value), None
    return None


@dataclass(frozen=True)
class AttributeAssignment:
    attribute: str
    value: Value


@dataclass(frozen=True)
class Constraint:
    attribute: str
    op: str
    value: Value

    def __post_init__(self) -> None:
        object.__setattr__(self, "op", _canonical_op(self.op))
        if self.op in _ORDERING and _numeric(self.value) is None:
            raise EvaluationError(f"ordering operator {self.op!r} needs a numeric bound, got {self.value!r}")

    def holds(self, assignments: Mapping[str, Value]) -> bool:
        if self.attribute not in assignments:
            return False
        actual = assignments[self.attribute]
        if self.op in _ORDERING:
            lhs = _numeric(actual)
            if lhs is None:
                raise EvaluationError(
                    f"attribute {self.attribute!r} has non-numeric value {actual!r}; cannot apply {self.op!r}"
                )
            rhs = _numeric(self.value)
            if lhs[1] is not None and rhs[1] is not None and lhs[1] != rhs[1]:
                raise EvaluationError(f"unit mismatch on {self.attribute!r}: {lhs[1]!r} vs {rhs[1]!r}")
            return _ORDERING[self.op](lhs[0], rhs[0])
        lhs_num, rhs_num = _numeric(actual), _numeric(self.value)
        if lhs_num is not None and rhs_num is not None:
            same = lhs_num[0] == rhs_num[0]
        else:
            same = type(actual) is type(self.value) and actual == self.value
        return same if self.op == "=" else not same


class _Always:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "TRUE"

    def __reduce__(self):
        return (_Always, ())


TRUE = _Always()


@dataclass(frozen=True)
class AllOf:
    children: tuple["Formula", ...]


@dataclass(frozen=True)
class AnyOf:
    children: tuple["Formula", ...]


Formula = Union[Constraint, AllOf, AnyOf, _Always]


def eval_formula(assignments: Mapping[str, Value] | Iterable[AttributeAssignment], formula: Formula) -> bool:
    if not isinstance(assignments, Mapping):
        assignments = {a.attribute: a.value for a in assignments}
    if formula is TRUE:
        return True
    if isinstance(formula, Constraint):
        return formula.holds(assignments)
    if isinstance(formula, AllOf):
        return all(eval_formula(assignments, f) for f in formula.children)
    if isinstance(formula, AnyOf):
        return any(eval_formula(assignments, f) for f in formula.children)
    raise EvaluationError(f"not a formula: {formula!r}")


def formula_from_doc(doc: Any) -> Formula:
    """Parse ``true`` / ``{"all": [...]}`` / ``{"any": [...]}`` / ``{"atom": {...}}``."""
    if doc is True or doc == "true":
        return TRUE
    if not isinstance(doc, Mapping) or len(doc) != 1:
        raise ParseError(f"formula node must be true or a single-key mapping, got {doc!r}")
    (kind, body), = doc.items()
    if kind in ("all", "any"):
        if not isinstance(body, list) or not body:
            raise ParseError(f"{kind!r} needs a non-empty list")
        children = tuple(formula_from_doc(c) for c in body)
        return AllOf(children) if kind == "all" else AnyOf(children)
    if kind == "atom":
        try:
            return Constraint(str(body["attribute"]), str(body["op"]), _value_from_doc(body["value"]))
        except KeyError as exc:
            raise ParseError(f"atom is missing field {exc.args[0]!r}: {body!r}") from None
    raise ParseError(f"unknown formula node {kind!r}")


def formula_to_doc(formula: Formula) -> Any:
    if formula is TRUE:
        return True
    if isinstance(formula, Constraint):
        return {"atom": {"attribute": formula.attribute, "op": formula.op, "value": _value_to_doc(formula.value)}}
    if isinstance(formula, AllOf):
        return {"all": [formula_to_doc(c) for c in formula.children]}
    if isinstance(formula, AnyOf):
        return {"any": [formula_to_doc(c) for c in formula.children]}
    raise EvaluationError(f"not a formula: {formula!r}")


def atom(attribute: str, op: str, value: Any) -> Constraint:
    return Constraint(attribute, op, _value_from_doc(value))


@dataclass(frozen=True)
class LabelRule:
    property: str
    label: str
    formula: Formula


@dataclass(frozen=True)
class RuleSet:
    """Label rules indexed by (property id, label)."""

    rules: tuple[LabelRule, ...]
    _index: Mapping[tuple[str, str], Formula] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        index: dict[tuple[str, str], Formula] = {}
        for r in self.rules:
            label = BOTTOM if r.label in ("−", "–") else r.label
            key = (r.property, label)
            if key in index:
                raise ConfigurationError(f"duplicate rule for property {r.property!r} label {label!r}")
            index[key] = r.formula
        object.__setattr__(self, "_index", index)

    @classmethod
    def from_doc(cls, doc: Sequence[Mapping]) -> "RuleSet":
        return cls(tuple(LabelRule(d["property"], d["label"], formula_from_doc(d["formula"])) for d in doc))

    def to_doc(self) -> list[dict]:
        return [{"property": r.property, "label": r.label, "formula": formula_to_doc(r.formula)} for r in self.rules]

    def formula(self, prop: str, label: str) -> Formula:
        try:
            return self._index[(prop, label)]
        except KeyError:
            raise ConfigurationError(f"no label rule for property {prop!r} label {label!r}") from None

    def validate(self, lattice: WeightedSecurityLattice) -> None:
        for p in lattice.properties:
            for label in p.labels:
                f = self.formula(p.id, label)
                if label == BOTTOM and f is not TRUE:
                    raise ConfigurationError(f"bottom rule of property {p.id!r} must be TRUE")


def classify(
    assignments: Mapping[str, Value] | Iterable[AttributeAssignment],
    rules: RuleSet,
    lattice: WeightedSecurityLattice,
) -> SecurityClass:
    """Strongest class whose every label is satisfied by the assignments."""
    if not isinstance(assignments, Mapping):
        assignments = {a.attribute: a.value for a in assignments}
    ranks = []
    for p in lattice.properties:
        for rank, label in enumerate(p.labels):
            if eval_formula(assignments, rules.formula(p.id, label)):
                ranks.append(rank)
                break
        else:
            # unreachable when the bottom rule is TRUE, but a user rule set may omit it
            raise ConfigurationError(f"no label of property {p.id!r} is satisfiable; bottom rule must be TRUE")
    return SecurityClass(tuple(ranks))


# -- SecSLA documents ---------------------------------------------------------


@dataclass(frozen=True)
class SecSLA:
    service_id: str
    service_type: str
    operations: tuple[str, ...]
    assignments: tuple[AttributeAssignment, ...] = ()

    def __post_init__(self) -> None:
        if not self.operations:
            raise ValidationError(f"SLA {self.service_id!r} declares no operations")
        object.__setattr__(self, "operations", tuple(sorted(set(self.operations))))
        seen = set()
        for a in self.assignments:
            if a.attribute in seen:
                raise ValidationError(f"SLA {self.service_id!r}: duplicate attribute {a.attribute!r}")
            seen.add(a.attribute)
        object.__setattr__(self, "assignments", tuple(sorted(self.assignments, key=lambda a: a.attribute)))

    @property
    def assignment_map(self) -> dict[str, Value]:
        return {a.attribute: a.value for a in self.assignments}


def classify_service(sla: SecSLA, rules: RuleSet, lattice: WeightedSecurityLattice) -> SecurityClass:
    return classify(sla.assignment_map, rules, lattice)


def _reject_duplicate_keys(pairs: list[tuple[str, Any]]) -> dict:
    out: dict[str, Any] = {}
    for k, v in pairs:
        if k in out:
            raise ValidationError(f"duplicate key {k!r}")
        out[k] = v
    return out


def sla_from_doc(
    doc: Mapping,
    operations: Collection[str] | None = None,
    service_types: Collection[str] | None = None,
) -> SecSLA:
    for key in ("service_id", "service_type", "operations"):
        if key not in doc:
            raise ParseError(f"SLA document is missing field {key!r}")
    ops = doc["operations"]
    if not isinstance(ops, list) or not all(isinstance(o, str) for o in ops):
        raise ParseError("field 'operations' must be a list of operation symbols")
    if len(set(ops)) != len(ops):
        raise ValidationError(f"SLA {doc['service_id']!r}: duplicate operation in {ops}")
    if operations is not None:
        unknown = sorted(set(ops) - set(operations))
        if unknown:
            raise ValidationError(f"SLA {doc['service_id']!r}: unknown operation(s) {unknown}")
    if service_types is not None and doc["service_type"] not in service_types:
        raise ValidationError(f"SLA {doc['service_id']!r}: unknown service type {doc['service_type']!r}")
    raw = doc.get("assignments", {})
    if isinstance(raw, Mapping):
        items = list(raw.items())
    elif isinstance(raw, list):
        try:
            items = [(a["attribute"], a["value"]) for a in raw]
        except (KeyError, TypeError):
            raise ParseError("field 'assignments' entries need 'attribute' and 'value'") from None
    else:
        raise ParseError("field 'assignments' must be a mapping or a list")
    assignments = []
    for name, value in items:
        try:
            assignments.append(AttributeAssignment(str(name), _value_from_doc(value)))
        except ParseError as exc:
            raise ParseError(f"assignments.{name}: {exc}") from None
    return SecSLA(str(doc["service_id"]), str(doc["service_type"]), tuple(ops), tuple(assignments))


def parse_sla(
    document: str,
    operations: Collection[str] | None = None,
    service_types: Collection[str] | None = None,
) -> SecSLA:
    """Parse a canonical JSON SLA document, rejecting duplicate attributes."""
    try:
        doc = json.loads(document, object_pairs_hook=_reject_duplicate_keys)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed SLA document at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, Mapping):
        raise ParseError("SLA document must be a JSON object")
    return sla_from_doc(doc, operations, service_types)


def sla_to_doc(sla: SecSLA) -> dict:
    return {
        "service_id": sla.service_id,
        "service_type": sla.service_type,
        "operations": list(sla.operations),
        "assignments": {a.attribute: _value_to_doc(a.value) for a in sla.assignments},
    }


def serialize_sla(sla: SecSLA) -> str:
    return json.dumps(sla_to_doc(sla), indent=2, sort_keys=True)


# -- user requirements --------------------------------------------------------

_AGGREGATORS: dict[str, Callable[[Sequence[float]], float]] = {
    "max": max,
    "mean": lambda xs: math.fsum(xs) / len(xs),
}


@dataclass(frozen=True)
class OperationRequirement:
    importance: float
    deadline_s: float

    def __post_init__(self) -> None:
        if not 0 < self.importance <= 1:
            raise ConfigurationError(f"operation importance must lie in (0, 1], got {self.importance}")
        if not self.deadline_s > 0:
            raise ConfigurationError(f"deadline must be > 0 s, got {self.deadline_s}")


@dataclass(frozen=True)
class UserRequirements:
    """Per service type: required class and property importance; plus the
    required operations with importance and deadline, and the loss budget."""

    required_class: Mapping[str, SecurityClass]
    property_importance: Mapping[str, tuple[float, ...]]
    tau_u: Mapping[str, OperationRequirement]
    loss_budget: float = 1.0

    def __post_init__(self) -> None:
        if not self.loss_budget > 0:
            raise ConfigurationError(f"loss budget must be > 0, got {self.loss_budget}")

    def vectors(self, operations: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
        """Importance and deadline vectors over the operation universe (0 where not required)."""
        unknown = sorted(set(self.tau_u) - set(operations))
        if unknown:
            raise ConfigurationError(f"requirements reference unknown operations {unknown}")
        tau = np.zeros(len(operations))
        deadlines = np.zeros(len(operations))
        for i, op in enumerate(operations):
            req = self.tau_u.get(op)
            if req is not None:
                tau[i] = req.importance
                deadlines[i] = req.deadline_s
        return tau, deadlines

    def user_lattice(self, service_type: str, lattice: WeightedSecurityLattice) -> WeightedSecurityLattice:
        return lattice.with_importance(self.property_importance.get(service_type))


def _survey_entries(survey: Mapping) -> Mapping[str, Mapping]:
    if "service_types" in survey:
        entries = survey["service_types"]
    else:
        entries = {k: v for k, v in survey.items() if k != "loss_budget"}
    if not isinstance(entries, Mapping):
        raise ConfigurationError("survey must map service types to answer blocks")
    return entries


def _survey_assignments(entry: Mapping) -> dict[str, Value]:
    out = {str(k): _value_from_doc(v) for k, v in entry.get("assignments", {}).items()}
    for c in entry.get("constraints", []):
        op = _canonical_op(c["op"])
        if op not in ("=", ">=", "<="):
            raise ConfigurationError(f"survey constraint on {c['attribute']!r}: only =, >=, <= can be turned into facts")
        if c["attribute"] in out:
            raise ConfigurationError(f"survey sets attribute {c['attribute']!r} twice")
        out[str(c["attribute"])] = _value_from_doc(c["value"])
    return out


def derive_user_class(
    survey: Mapping, service_type: str, rules: RuleSet, lattice: WeightedSecurityLattice
) -> SecurityClass:
    entries = _survey_entries(survey)
    if service_type not in entries:
        raise ConfigurationError(f"survey has no answers for service type {service_type!r}")
    return classify(_survey_assignments(entries[service_type]), rules, lattice)


def derive_property_importance(
    entry: Mapping, lattice: WeightedSecurityLattice, aggregate: str = "max"
) -> tuple[float, ...]:
    """Collapse per-question importances into one scale per property (default 1)."""
    try:
        agg = _AGGREGATORS[aggregate]
    except KeyError:
        raise ConfigurationError(f"unknown importance aggregator {aggregate!r}") from None
    raw = entry.get("importance", {}) or {}
    out = []
    for p in lattice.properties:
        v = raw.get(p.id, 1.0)
        val = agg([float(x) for x in v]) if isinstance(v, (list, tuple)) else float(v)
        if not 0 < val <= 1:
            raise ConfigurationError(f"importance of property {p.id!r} must lie in (0, 1], got {val}")
        out.append(val)
    unknown = set(raw) - {p.id for p in lattice.properties}
    if unknown:
        raise ConfigurationError(f"importance given for unknown properties {sorted(unknown)}")
    return tuple(out)


def derive_requirements(
    survey: Mapping,
    rules: RuleSet,
    lattice: WeightedSecurityLattice,
    importance_aggregate: str = "max",
) -> UserRequirements:
    entries = _survey_entries(survey)
    classes, importance = {}, {}
    tau_u: dict[str, OperationRequirement] = {}
    budgets = []
    for phi, entry in entries.items():
        classes[phi] = classify(_survey_assignments(entry), rules, lattice)
        importance[phi] = derive_property_importance(entry, lattice, importance_aggregate)
        for op, req in (entry.get("tau_u") or {}).items():
            parsed = OperationRequirement(float(req["importance"]), float(req["deadline_s"]))
            if op in tau_u and tau_u[op] != parsed:
                raise ConfigurationError(f"operation {op!r} required with conflicting settings across service types")
            tau_u[op] = parsed
        if "loss_budget" in entry:
            budgets.append(float(entry["loss_budget"]))
    if "loss_budget" in survey:
        budgets.append(float(survey["loss_budget"]))
    return UserRequirements(classes, importance, tau_u, min(budgets) if budgets else 1.0)


def class_from_labels(lattice: WeightedSecurityLattice, labels: Sequence[str] | Mapping[str, str]) -> SecurityClass:
    try:
        return lattice.make_class(labels)
    except StructuralError as exc:
        raise ConfigurationError(str(exc)) from None

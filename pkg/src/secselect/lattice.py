"""Weighted security lattice over chain-ordered security properties.

Each property carries a chain of labels ordered from strongest to weakest,
ending with the bottom label ``-``.  A security class picks one label per
property; classes are stored as chain indices (0 = strongest label).
Distances between classes are sums of per-property chain distances, so the
full class-by-class distance matrix is never materialized.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

from secselect.errors import ConfigurationError, StructuralError

BOTTOM = "-"
_BOTTOM_ALIASES = {"-", "−", "–"}

LOSS_SHORTFALL = "shortfall"
LOSS_STRICT = "strict"


def _normalize_label(label: str) -> str:
    label = str(label).strip()
    return BOTTOM if label in _BOTTOM_ALIASES else label


@dataclass(frozen=True)
class SecurityProperty:
    id: str
    name: str
    labels: tuple[str, ...]
    step_distances: tuple[float, ...]

    def __post_init__(self) -> None:
        labels = tuple(_normalize_label(lab) for lab in self.labels)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "step_distances", tuple(float(d) for d in self.step_distances))
        if len(labels) < 2:
            raise ConfigurationError(f"property {self.id!r}: label chain needs at least 2 labels")
        if len(set(labels)) != len(labels):
            raise ConfigurationError(f"property {self.id!r}: duplicate labels in {labels}")
        if labels[-1] != BOTTOM:
            raise ConfigurationError(f"property {self.id!r}: chain must end with the bottom label {BOTTOM!r}")
        if BOTTOM in labels[:-1]:
            raise ConfigurationError(f"property {self.id!r}: {BOTTOM!r} is reserved for the bottom of the chain")
        if len(self.step_distances) != len(labels) - 1:
            raise ConfigurationError(
                f"property {self.id!r}: expected {len(labels) - 1} step distances, got {len(self.step_distances)}"
            )
        for d in self.step_distances:
            if not (d > 0 and math.isfinite(d)):
                raise ConfigurationError(f"property {self.id!r}: step distances must be finite and > 0")

    @property
    def depth(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        label = _normalize_label(label)
        try:
            return self.labels.index(label)
        except ValueError:
            raise StructuralError(f"label {label!r} not in chain of property {self.id!r}") from None

    def chain_distance(self, i: int, j: int) -> float:
        lo, hi = (i, j) if i <= j else (j, i)
        return math.fsum(self.step_distances[lo:hi])

    def scaled(self, factor: float) -> "SecurityProperty":
        if not factor > 0:
            raise ConfigurationError(f"property {self.id!r}: importance scale must be > 0, got {factor}")
        return SecurityProperty(self.id, self.name, self.labels, tuple(d * factor for d in self.step_distances))


@dataclass(frozen=True, order=True)
class SecurityClass:
    """One label index per property, in the owning lattice's property order."""

    ranks: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "ranks", tuple(int(r) for r in self.ranks))

    def __len__(self) -> int:
        return len(self.ranks)

    def __iter__(self) -> Iterator[int]:
        return iter(self.ranks)


@dataclass(frozen=True)
class WeightedSecurityLattice:
    properties: tuple[SecurityProperty, ...]
    loss_mode: str = LOSS_SHORTFALL
    _by_id: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        props = tuple(self.properties)
        object.__setattr__(self, "properties", props)
        if not props:
            raise ConfigurationError("lattice needs at least one property")
        ids = [p.id for p in props]
        if len(set(ids)) != len(ids):
            raise ConfigurationError(f"duplicate property ids: {ids}")
        if self.loss_mode not in (LOSS_SHORTFALL, LOSS_STRICT):
            raise ConfigurationError(f"unknown loss mode {self.loss_mode!r}")
        object.__setattr__(self, "_by_id", {pid: k for k, pid in enumerate(ids)})

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_config(cls, doc: Sequence[Mapping], loss_mode: str = LOSS_SHORTFALL) -> "WeightedSecurityLattice":
        props = []
        for entry in doc:
            labels = entry["labels"]
            steps = entry.get("step_distances", [1.0] * (len(labels) - 1))
            props.append(SecurityProperty(entry["id"], entry.get("name", entry["id"]), tuple(labels), tuple(steps)))
        return cls(tuple(props), loss_mode=loss_mode)

    def to_config(self) -> list[dict]:
        return [
            {"id": p.id, "name": p.name, "labels": list(p.labels), "step_distances": list(p.step_distances)}
            for p in self.properties
        ]

    def with_importance(self, importance: Mapping[str, float] | Sequence[float] | None) -> "WeightedSecurityLattice":
        """Lattice whose step distances for property p are scaled by importance[p]."""
        if importance is None:
            return self
        if isinstance(importance, Mapping):
            unknown = set(importance) - set(self._by_id)
            if unknown:
                raise ConfigurationError(f"importance for unknown properties {sorted(unknown)}")
            factors = [float(importance.get(p.id, 1.0)) for p in self.properties]
        else:
            factors = [float(f) for f in importance]
            if len(factors) != len(self.properties):
                raise StructuralError("importance vector length differs from property count")
        for f in factors:
            if not 0 < f <= 1:
                raise ConfigurationError(f"property importance must lie in (0, 1], got {f}")
        return WeightedSecurityLattice(
            tuple(p.scaled(f) for p, f in zip(self.properties, factors)), loss_mode=self.loss_mode
        )

    # -- classes --------------------------------------------------------------

    @property
    def n_properties(self) -> int:
        return len(self.properties)

    @property
    def class_count(self) -> int:
        return math.prod(p.depth for p in self.properties)

    def property_index(self, pid: str) -> int:
        try:
            return self._by_id[pid]
        except KeyError:
            raise StructuralError(f"unknown property {pid!r}") from None

    def make_class(self, labels: Sequence[str] | Mapping[str, str]) -> SecurityClass:
        """Build a class from label names, positionally or keyed by property id."""
        if isinstance(labels, Mapping):
            missing = set(self._by_id) - set(labels)
            if missing:
                raise StructuralError(f"class is missing properties {sorted(missing)}")
            labels = [labels[p.id] for p in self.properties]
        labels = list(labels)
        if len(labels) != self.n_properties:
            raise StructuralError(f"class has {len(labels)} labels, lattice has {self.n_properties} properties")
        return SecurityClass(tuple(p.index(lab) for p, lab in zip(self.properties, labels)))

    def labels_of(self, c: SecurityClass) -> tuple[str, ...]:
        self.check(c)
        return tuple(p.labels[r] for p, r in zip(self.properties, c.ranks))

    def check(self, c: SecurityClass) -> None:
        if len(c.ranks) != self.n_properties:
            raise StructuralError(f"class arity {len(c.ranks)} does not match lattice arity {self.n_properties}")
        for p, r in zip(self.properties, c.ranks):
            if not 0 <= r < p.depth:
                raise StructuralError(f"rank {r} out of range for property {p.id!r}")

    def top(self) -> SecurityClass:
        return SecurityClass((0,) * self.n_properties)

    def bottom(self) -> SecurityClass:
        return SecurityClass(tuple(p.depth - 1 for p in self.properties))

    def classes(self) -> Iterator[SecurityClass]:
        for ranks in itertools.product(*(range(p.depth) for p in self.properties)):
            yield SecurityClass(ranks)

    def join(self, *classes: SecurityClass) -> SecurityClass:
        """Least class dominating every argument (component-wise strongest label)."""
        if not classes:
            return self.bottom()
        for c in classes:
            self.check(c)
        return SecurityClass(tuple(min(rs) for rs in zip(*(c.ranks for c in classes))))

    # -- order and distances --------------------------------------------------

    def dominates(self, c1: SecurityClass, c2: SecurityClass) -> bool:
        self.check(c1)
        self.check(c2)
        return all(a <= b for a, b in zip(c1.ranks, c2.ranks))

    def class_distance(self, c1: SecurityClass, c2: SecurityClass) -> float:
        self.check(c1)
        self.check(c2)
        return math.fsum(p.chain_distance(a, b) for p, a, b in zip(self.properties, c1.ranks, c2.ranks))

    @property
    def rho_max(self) -> float:
        return math.fsum(math.fsum(p.step_distances) for p in self.properties)

    def security_loss(self, service_class: SecurityClass, required_class: SecurityClass) -> float:
        """Distance by which the service falls short of the requirement.

        In shortfall mode only deficient properties contribute.  In strict mode
        the loss is the full class distance when the requirement strictly
        dominates the service, and zero for every other pair (incomparable
        pairs included).
        """
        self.check(service_class)
        self.check(required_class)
        if self.loss_mode == LOSS_STRICT:
            if service_class != required_class and self.dominates(required_class, service_class):
                return self.class_distance(service_class, required_class)
            return 0.0
        return math.fsum(
            p.chain_distance(s, r)
            for p, s, r in zip(self.properties, service_class.ranks, required_class.ranks)
            if s > r
        )

    def normalized_security_loss(
        self, service_class: SecurityClass, required_class: SecurityClass, rho_max: float | None = None
    ) -> float:
        """Security loss divided by the lattice diameter, clamped to 1.

        ``rho_max`` overrides the diameter; importance-scaled user lattices pass
        the reference lattice's diameter so that down-weighted properties lower
        the normalized loss instead of being renormalized away.
        """
        rho = self.rho_max if rho_max is None else rho_max
        return normalize_loss(self.security_loss(service_class, required_class), rho)


def normalize_loss(loss: float, rho_max: float) -> float:
    if not rho_max > 0:
        raise ConfigurationError("lattice has zero diameter; normalized loss is undefined")
    if loss <= rho_max:
        return loss / rho_max
    return 1.0

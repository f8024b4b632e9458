"""Ready-made CIA lattice, label rules and generator witnesses.

The rule table mirrors the running example: confidentiality from the
authentication scheme and cipher, integrity from the authenticated data
structure, availability from advertised uptime.
"""

from __future__ import annotations

from secselect.lattice import BOTTOM, SecurityProperty, WeightedSecurityLattice
from secselect.sla import TRUE, AllOf, AnyOf, LabelRule, RuleSet, atom

DEFAULT_OPERATIONS = ("temperature", "humidity", "pressure", "time", "printing", "connectivity")


def cia_lattice(
    steps: dict[str, tuple[float, float, float]] | None = None, loss_mode: str = "shortfall"
) -> WeightedSecurityLattice:
    steps = steps or {}
    props = []
    for pid, name in (("C", "Confidentiality"), ("I", "Integrity"), ("A", "Availability")):
        labels = (f"H{pid}", f"M{pid}", f"L{pid}", BOTTOM)
        props.append(SecurityProperty(pid, name, labels, tuple(steps.get(pid, (1.0, 1.0, 1.0)))))
    return WeightedSecurityLattice(tuple(props), loss_mode=loss_mode)


def cia_rules() -> RuleSet:
    return RuleSet((
        LabelRule("C", "HC", AllOf((atom("auth", "=", "continous"), atom("enc", "=", "AES-256")))),
        LabelRule("C", "MC", AnyOf((atom("auth", "=", "double factor"), atom("enc", "=", "AES-256")))),
        LabelRule("C", "LC", AnyOf((atom("auth", "=", "simple"), atom("enc", "=", "AES-128")))),
        LabelRule("C", BOTTOM, TRUE),
        LabelRule("I", "HI", atom("integrity", "=", "Merkle Hash Tree")),
        LabelRule("I", "MI", atom("integrity", "=", "Hash Chain")),
        LabelRule("I", "LI", atom("integrity", "=", "Verification Object Insertion")),
        LabelRule("I", BOTTOM, TRUE),
        LabelRule("A", "HA", atom("uptime", ">", 99.99)),
        LabelRule("A", "MA", atom("uptime", ">", 99.0)),
        LabelRule("A", "LA", atom("uptime", ">", 95.0)),
        LabelRule("A", BOTTOM, TRUE),
    ))


# Per (property, label): assignments that reach exactly that label under cia_rules().
CIA_WITNESSES: dict[str, dict[str, dict]] = {
    "C": {
        "HC": {"auth": "continous", "enc": "AES-256"},
        "MC": {"auth": "double factor"},
        "LC": {"auth": "simple"},
        BOTTOM: {},
    },
    "I": {
        "HI": {"integrity": "Merkle Hash Tree"},
        "MI": {"integrity": "Hash Chain"},
        "LI": {"integrity": "Verification Object Insertion"},
        BOTTOM: {},
    },
    "A": {
        "HA": {"uptime": 99.995},
        "MA": {"uptime": 99.5},
        "LA": {"uptime": 97.0},
        BOTTOM: {"uptime": 90.0},
    },
}

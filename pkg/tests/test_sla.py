import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from secselect.catalog import CIA_WITNESSES, DEFAULT_OPERATIONS, cia_lattice, cia_rules
from secselect.errors import ConfigurationError, EvaluationError, ParseError, ValidationError
from secselect.lattice import BOTTOM
from secselect.sla import (
    TRUE,
    AllOf,
    AnyOf,
    Quantity,
    RuleSet,
    SecSLA,
    atom,
    classify,
    classify_service,
    derive_property_importance,
    derive_requirements,
    derive_user_class,
    eval_formula,
    formula_from_doc,
    formula_to_doc,
    parse_sla,
    serialize_sla,
)

LAT = cia_lattice()
RULES = cia_rules()


def labels(c):
    return LAT.labels_of(c)


class TestFormulas:
    def test_hc_row(self):
        f = AllOf((atom("auth", "=", "continous"), atom("enc", "=", "AES-256")))
        assert eval_formula({"auth": "continous", "enc": "AES-256"}, f)
        assert not eval_formula({"auth": "continous"}, f)

    def test_true_leaf(self):
        assert eval_formula({}, TRUE)
        assert eval_formula({"x": 1.0}, TRUE)

    def test_uptime_comparison(self):
        assert not eval_formula({"uptime": 99.5}, atom("uptime", ">", 99.99))
        assert eval_formula({"uptime": 99.995}, atom("uptime", ">", 99.99))

    def test_missing_attribute_is_unsatisfied(self):
        assert not eval_formula({}, atom("uptime", ">", 1))
        assert not eval_formula({}, atom("enc", "!=", "none"))

    def test_ordering_on_text_raises(self):
        with pytest.raises(EvaluationError):
            eval_formula({"uptime": "high"}, atom("uptime", ">", 99))
        with pytest.raises(EvaluationError):
            atom("enc", "<", "AES")

    def test_units(self):
        f = atom("latency", "<=", {"value": 10, "unit": "ms"})
        assert eval_formula({"latency": Quantity(5.0, "ms")}, f)
        with pytest.raises(EvaluationError):
            eval_formula({"latency": Quantity(5.0, "s")}, f)

    def test_operator_aliases(self):
        assert atom("a", "≥", 1).op == ">=" and atom("a", "==", 1).op == "=" and atom("a", "≠", 1).op == "!="
        with pytest.raises(ParseError):
            atom("a", "~", 1)

    def test_doc_round_trip(self):
        doc = {"any": [{"all": [{"atom": {"attribute": "a", "op": "=", "value": "x"}}, True]},
                       {"atom": {"attribute": "b", "op": ">", "value": 2}}]}
        f = formula_from_doc(doc)
        assert formula_from_doc(formula_to_doc(f)) == f
        assert isinstance(f, AnyOf)


class TestClassify:
    @pytest.mark.parametrize(
        "assign,expected",
        [
            ({"auth": "continous", "enc": "AES-256", "integrity": "Merkle Hash Tree", "uptime": 99.5}, ("HC", "HI", "MA")),
            ({}, (BOTTOM, BOTTOM, BOTTOM)),
            ({"auth": "simple", "uptime": 99.995, "integrity": "Hash Chain"}, ("LC", "MI", "HA")),
            ({"enc": "AES-256"}, ("MC", BOTTOM, BOTTOM)),
            ({"enc": "AES-128", "uptime": 96.0}, ("LC", BOTTOM, "LA")),
        ],
    )
    def test_table_rows(self, assign, expected):
        assert labels(classify(assign, RULES, LAT)) == expected

    def test_missing_rule(self):
        partial = RuleSet(tuple(r for r in RULES.rules if not (r.property == "I" and r.label == "MI")))
        with pytest.raises(ConfigurationError):
            classify({}, partial, LAT)
        with pytest.raises(ConfigurationError):
            partial.validate(LAT)

    def test_rules_doc_round_trip(self):
        again = RuleSet.from_doc(json.loads(json.dumps(RULES.to_doc())))
        for a in ({}, {"auth": "double factor", "uptime": 99.2}, {"integrity": "Hash Chain"}):
            assert classify(a, again, LAT) == classify(a, RULES, LAT)

    def test_witnesses_reach_their_label(self):
        for pid, table in CIA_WITNESSES.items():
            k = LAT.property_index(pid)
            for label, assign in table.items():
                assert labels(classify(assign, RULES, LAT))[k] == label


class TestDocuments:
    def test_minimal(self):
        sla = parse_sla('{"service_id": "s1", "service_type": "weather", "operations": ["time"]}')
        assert labels(classify_service(sla, RULES, LAT)) == (BOTTOM,) * 3

    def test_duplicate_attribute(self):
        doc = '{"service_id": "s", "service_type": "t", "operations": ["time"], "assignments": {"enc": "AES-128", "enc": "AES-256"}}'
        with pytest.raises(ValidationError):
            parse_sla(doc)

    def test_full_class(self):
        doc = json.dumps({
            "service_id": "s", "service_type": "t", "operations": ["time", "temperature"],
            "assignments": {"auth": "continous", "enc": "AES-256", "integrity": "Merkle Hash Tree", "uptime": 99.999},
        })
        assert labels(classify_service(parse_sla(doc), RULES, LAT)) == ("HC", "HI", "HA")

    def test_malformed_reports_position(self):
        with pytest.raises(ParseError, match="line 2"):
            parse_sla('{"service_id": "s",\n "operations": [}')

    def test_unknown_operation(self):
        doc = '{"service_id": "s", "service_type": "t", "operations": ["teleport"]}'
        with pytest.raises(ValidationError):
            parse_sla(doc, operations=DEFAULT_OPERATIONS)

    def test_empty_operations(self):
        with pytest.raises(ValidationError):
            parse_sla('{"service_id": "s", "service_type": "t", "operations": []}')


SURVEY = {
    "weather": {
        "assignments": {"auth": "continous", "enc": "AES-256", "integrity": "Merkle Hash Tree"},
        "constraints": [{"attribute": "uptime", "op": ">=", "value": 99.999}],
        "importance": {"C": [0.4, 0.9], "A": 0.5},
        "tau_u": {"temperature": {"importance": 0.5, "deadline_s": 300},
                  "humidity": {"importance": 0.8, "deadline_s": 300},
                  "time": {"importance": 0.7, "deadline_s": 300}},
    },
    "printing": {"assignments": {}, "loss_budget": 0.8},
}


class TestSurvey:
    def test_user_class(self):
        assert labels(derive_user_class(SURVEY, "weather", RULES, LAT)) == ("HC", "HI", "HA")
        assert labels(derive_user_class({"x": {}}, "x", RULES, LAT)) == (BOTTOM,) * 3
        with pytest.raises(ConfigurationError):
            derive_user_class(SURVEY, "parking", RULES, LAT)

    def test_importance_aggregation(self):
        assert derive_property_importance(SURVEY["weather"], LAT) == (0.9, 1.0, 0.5)
        assert derive_property_importance(SURVEY["weather"], LAT, "mean") == pytest.approx((0.65, 1.0, 0.5))

    def test_requirements(self):
        req = derive_requirements(SURVEY, RULES, LAT)
        assert req.loss_budget == 0.8
        tau, dl = req.vectors(DEFAULT_OPERATIONS)
        assert tau.tolist() == [0.5, 0.8, 0, 0.7, 0, 0]
        assert dl.tolist() == [300, 300, 0, 300, 0, 0]
        with pytest.raises(ConfigurationError):
            req.vectors(("time",))


attr_values = {
    "auth": st.sampled_from(["continous", "double factor", "simple", "none"]),
    "enc": st.sampled_from(["AES-256", "AES-128", "DES"]),
    "integrity": st.sampled_from(["Merkle Hash Tree", "Hash Chain", "Verification Object Insertion", "CRC"]),
    "uptime": st.floats(80.0, 100.0),
}
assignments = st.fixed_dictionaries({}, optional=attr_values)


@settings(max_examples=300, deadline=None)
@given(assignments, assignments)
def test_classification_monotone_and_self_consistent(a, extra):
    c = classify(a, RULES, LAT)
    merged = {**extra, **a}
    assert LAT.dominates(classify(merged, RULES, LAT), c)
    for p, r in zip(LAT.properties, c.ranks):
        assert eval_formula(a, RULES.formula(p.id, p.labels[r]))


@settings(max_examples=300, deadline=None)
@given(assignments, st.lists(st.sampled_from(DEFAULT_OPERATIONS), min_size=1, unique=True))
def test_sla_round_trip(a, ops):
    doc = {"service_id": "svc", "service_type": "t", "operations": ops, "assignments": a}
    sla = parse_sla(json.dumps(doc))
    assert parse_sla(serialize_sla(sla)) == sla
    assert isinstance(sla, SecSLA)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from secselect.catalog import cia_lattice
from secselect.errors import ContractViolation
from secselect.lattice import SecurityClass
from secselect.rewards import (
    ActionKind,
    AddToFreeSlot,
    Reject,
    Replace,
    contact_replacement,
    decay,
    reward_accept,
    reward_accept_from_parts,
    reward_decline,
    reward_operations,
    reward_security,
)

LAT = cia_lattice()
TAU = np.array([0.5, 0.8, 0, 0.7, 0, 0])
SIGMA = np.array([0, 0, 0, 1, 0, 1])
DL = np.where(TAU > 0, 300.0, 0.0)


def ro_oracle(tau, sigma, t, deadlines):
    """Plain-loop reference for the operation reward."""
    num = 0.0
    for w, s, d in zip(tau, sigma, deadlines):
        if w > 0 and t < d:
            x = t - d / 2
            g = 1 / (1 + math.exp(x)) if x < 700 else 0.0
            num += w * g * s
    return num / sum(tau)


class TestDecay:
    def test_pins(self):
        d = np.array([300.0])
        assert decay(150.0, d)[0] == 0.5
        assert decay(300.0, d)[0] == 0.0
        assert decay(1e6, d)[0] == 0.0
        assert decay(0.0, d)[0] >= 1 - 1e-10

    def test_non_required_zeroed(self):
        g = decay(0.0, DL, TAU > 0)
        assert g.tolist()[2] == 0.0 and g[0] > 0.999

    def test_monotone(self):
        ts = np.linspace(0, 400, 801)
        vals = [decay(t, np.array([300.0]))[0] for t in ts]
        assert all(a >= b for a, b in zip(vals, vals[1:]))


class TestOperationReward:
    def test_worked_example(self):
        assert reward_operations(TAU, SIGMA, 0.0, DL) == pytest.approx(0.35, abs=1e-3)
        assert reward_operations(TAU, SIGMA, 150.0, DL) == pytest.approx(0.175, abs=1e-3)

    def test_disjoint_is_zero(self):
        assert reward_operations(TAU, np.array([0, 0, 1, 0, 1, 1]), 0.0, DL) == 0.0

    def test_empty_requirement(self):
        with pytest.raises(ContractViolation):
            reward_operations(np.zeros(6), SIGMA, 0.0, DL)


class TestSecurityAndAccept:
    def test_r_sl(self):
        s, r = LAT.make_class(["HC", "HI", "MA"]), LAT.make_class(["HC", "HI", "HA"])
        assert reward_security(s, r, LAT) == pytest.approx(0.8889, abs=5e-3)
        assert reward_security(r, s, LAT) == 1.0
        assert reward_security(LAT.bottom(), LAT.top(), LAT, rho_max=8.0) == 0.0

    def test_r_a(self):
        b = reward_accept(TAU, SIGMA, 0.0, DL, 1 / 9)
        assert b.r_total == pytest.approx(0.6194, abs=5e-3)
        assert b.r_total == (b.r_o + b.r_sl) / 2
        assert reward_accept_from_parts(0.0, 0.0).r_total == 0.5
        assert reward_accept_from_parts(0.0, 1.0).r_total == 0.0

    def test_full_coverage_dominating_near_one(self):
        b = reward_accept(TAU, np.ones(6), 0.0, np.where(TAU > 0, 100.0, 0.0), 0.0)
        assert abs(b.r_total - 1.0) < 1e-6

    def test_decline(self):
        assert reward_decline([1 / 9, 3 / 9]).r_total == 1 / 9
        assert reward_decline([0.0, 0.5]).r_total == 0.0
        assert reward_decline([]).r_total == 0.0
        assert reward_decline([0.2]).action_kind is ActionKind.DECLINE


class TestReplacement:
    def test_rules(self):
        assert contact_replacement(0.2, [0.1, None, 0.3]) == AddToFreeSlot(1)
        assert contact_replacement(0.2, [0.1, 0.3]) == Replace(0)
        assert contact_replacement(0.05, [0.1, 0.3]) == Reject()
        assert contact_replacement(0.1, [0.1, 0.3]) == Reject()
        assert contact_replacement(0.5, [0.3, 0.1, 0.1]) == Replace(1)


vec = st.lists(st.floats(0, 1), min_size=6, max_size=6)
bits = st.lists(st.integers(0, 1), min_size=6, max_size=6)
classes = st.tuples(*(st.integers(0, 3) for _ in range(3))).map(SecurityClass)


@settings(max_examples=1000, deadline=None)
@given(vec, bits, st.floats(0, 3000), st.lists(st.floats(1, 2000), min_size=6, max_size=6), classes, classes,
       st.lists(st.floats(0, 1), max_size=4))
def test_rewards_in_unit_interval(tau, sigma, t, deadlines, s, r, avail):
    tau = np.array(tau)
    tau[0] = max(tau[0], 1e-3)
    sigma, deadlines = np.array(sigma), np.array(deadlines)
    ro = reward_operations(tau, sigma, t, deadlines)
    assert 0.0 <= ro <= 1.0
    assert ro == pytest.approx(ro_oracle(tau, sigma, t, deadlines), abs=1e-12)
    rsl = reward_security(s, r, LAT)
    assert 0.0 <= rsl <= 1.0
    b = reward_accept(tau, sigma, t, deadlines, 1 - rsl)
    assert 0.0 <= b.r_total <= 1.0
    n = reward_decline(avail).r_total
    assert 0.0 <= n <= 1.0
    assert all(n <= a for a in avail)
    # positions where tau_u is zero never matter
    flipped = np.where(tau > 0, sigma, 1 - sigma)
    assert reward_operations(tau, flipped, t, deadlines) == ro


@settings(max_examples=1000, deadline=None)
@given(st.floats(0, 1), st.lists(st.one_of(st.none(), st.floats(0, 1)), min_size=1, max_size=5))
def test_replacement_never_lowers_min(cand, held):
    decision = contact_replacement(cand, held)
    after = list(held)
    if isinstance(decision, (AddToFreeSlot, Replace)):
        assert isinstance(decision, AddToFreeSlot) == (None in held)
        after[decision.slot] = cand
    filled_before = [h for h in held if h is not None]
    filled_after = [h for h in after if h is not None]
    if filled_before and None not in held:
        assert min(filled_after) >= min(filled_before)

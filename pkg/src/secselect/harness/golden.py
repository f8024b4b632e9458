"""Worked-example checks with the unit-weight CIA lattice.

Six operations [temperature, humidity, pressure, time, printing,
connectivity]; the user needs temperature 0.5, humidity 0.8 and time 0.7,
all within 300 s; the offered service provides time and connectivity and
sits in class [HC, HI, MA] against a required [HC, HI, HA].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from secselect.catalog import cia_lattice
from secselect.rewards import decay, reward_accept, reward_operations, reward_security

TAU_U = np.array([0.5, 0.8, 0.0, 0.7, 0.0, 0.0])
TAU_SIGMA = np.array([0, 0, 0, 1, 0, 1])
DEADLINES = np.where(TAU_U > 0, 300.0, 0.0)
SERVICE_CLASS = ("HC", "HI", "MA")
REQUIRED_CLASS = ("HC", "HI", "HA")


@dataclass(frozen=True)
class GoldenCheck:
    name: str
    value: float
    expected: float
    tol: float

    @property
    def ok(self) -> bool:
        return abs(self.value - self.expected) <= self.tol


def golden_checks() -> list[GoldenCheck]:
    lat = cia_lattice()
    s, r = lat.make_class(list(SERVICE_CLASS)), lat.make_class(list(REQUIRED_CLASS))
    loss = lat.normalized_security_loss(s, r)
    return [
        GoldenCheck("rho_max", lat.rho_max, 9.0, 0.0),
        GoldenCheck("class_distance", lat.class_distance(s, r), 1.0, 0.0),
        GoldenCheck("decay(150)", float(decay(150.0, DEADLINES, TAU_U > 0)[0]), 0.5, 0.0),
        GoldenCheck("R_O(t=0)", reward_operations(TAU_U, TAU_SIGMA, 0.0, DEADLINES), 0.35, 1e-3),
        GoldenCheck("R_O(t=150)", reward_operations(TAU_U, TAU_SIGMA, 150.0, DEADLINES), 0.175, 1e-3),
        GoldenCheck("R_SL", reward_security(s, r, lat), 8.0 / 9.0, 5e-3),
        GoldenCheck("R_A(t=0)", reward_accept(TAU_U, TAU_SIGMA, 0.0, DEADLINES, loss).r_total, 0.6194, 5e-3),
    ]

import dataclasses
import json

import numpy as np
import pytest
from scipy.stats import chisquare

from conftest import FIXTURES
from secselect.environment.ingest import Path
from secselect.environment.scenario import (
    Scenario,
    generate_scenario_skr,
    generate_scenario_udr,
    mean_service_loss,
    regenerate,
    zipf_weights,
)
from secselect.errors import ConfigurationError, ValidationError
from secselect.lattice import SecurityClass

UDR_CFG = {"n_services": 10}
CITY = {"source": "csv", "trips": str(FIXTURES / "nyc_trips.csv"), "amps": str(FIXTURES / "nyc_amps.csv"), "delta_t": 30.0}


def check_classes_exhaustively(sc):
    lat = sc.lattice
    for svc in sc.services:
        assert any(svc.ops_onehot)
        for i, bit in enumerate(svc.ops_onehot):
            if bit:
                assert lat.dominates(svc.security_class, sc.universe.min_class[i])


class TestGeneration:
    @pytest.mark.parametrize("gen", [generate_scenario_udr, generate_scenario_skr])
    def test_deterministic(self, gen):
        a, b = gen(UDR_CFG, 7), gen(UDR_CFG, 7)
        assert a == b
        assert json.dumps(a.to_doc(), sort_keys=True) == json.dumps(b.to_doc(), sort_keys=True)
        assert gen(UDR_CFG, 8) != a

    @pytest.mark.parametrize("seed", range(10))
    def test_structure(self, seed):
        for sc in (generate_scenario_udr(UDR_CFG, seed), generate_scenario_skr(UDR_CFG, seed)):
            assert sc.m == 6 and len(sc.services) == 10
            check_classes_exhaustively(sc)
            assert sc.onehot_matrix().sum(axis=0).min() >= 1

    def test_city_paths(self):
        sc = generate_scenario_udr({"paths": CITY}, 0)
        assert len(sc.paths) == 186
        assert len(sc.providers) == 120

    def test_strong_share(self):
        lat_doc = generate_scenario_udr({"strong_share": 1.0}, 0)
        for svc in lat_doc.services:
            floor = lat_doc.lattice.join(*(m for m, b in zip(lat_doc.universe.min_class, svc.ops_onehot) if b))
            assert all(r <= f // 2 for r, f in zip(svc.security_class.ranks, floor.ranks))
        with pytest.raises(ConfigurationError):
            generate_scenario_udr({"strong_share": 1.5}, 0)

    def test_bad_configs(self):
        with pytest.raises(ConfigurationError):
            generate_scenario_udr({"ops_per_service": [0, 2]}, 0)
        with pytest.raises(ConfigurationError):
            generate_scenario_skr({"skew": 0.0}, 0)
        with pytest.raises(ConfigurationError):
            generate_scenario_skr({"rare_ops": 6}, 0)
        with pytest.raises(ConfigurationError):
            generate_scenario_udr({"paths": {"source": "gps"}}, 0)


class TestSkew:
    def test_top_vs_median(self):
        counts = np.bincount(np.random.default_rng(0).choice(10, size=10_000, p=zipf_weights(10, 1.5)), minlength=10)
        assert counts[0] > 3 * np.median(counts)
        sc = generate_scenario_skr({"paths": {"n_amps": 2000}}, 0)
        amp_counts = np.bincount([p.service for p in sc.providers], minlength=len(sc.services))
        assert amp_counts.max() > 3 * np.median(amp_counts)

    def test_vanishing_exponent_is_uniform(self):
        counts = np.bincount(np.random.default_rng(1).choice(10, size=10_000, p=zipf_weights(10, 1e-9)), minlength=10)
        assert chisquare(counts).pvalue > 0.05

    @pytest.mark.parametrize("seed", range(5))
    def test_rare_operation_is_rare(self, seed):
        sc = generate_scenario_skr(None, seed)
        ops = sc.onehot_matrix()[[p.service for p in sc.providers]]
        assert ops.mean(axis=0).min() <= 0.20

    def test_frequent_services_are_weaker(self):
        sc = generate_scenario_skr(None, 0)
        top = sc.lattice.top()
        half = len(sc.services) // 2
        losses = [sc.lattice.normalized_security_loss(s.security_class, top) for s in sc.services]
        assert np.mean(losses[:half]) > np.mean(losses[half:])

    def test_weak_end_rare_swaps_halves(self):
        sc = generate_scenario_skr({"weak_end": "rare"}, 0)
        top = sc.lattice.top()
        half = len(sc.services) // 2
        losses = [sc.lattice.normalized_security_loss(s.security_class, top) for s in sc.services]
        assert np.mean(losses[:half]) < np.mean(losses[half:])
        with pytest.raises(ConfigurationError):
            generate_scenario_skr({"weak_end": "middle"}, 0)


class TestArchive:
    @pytest.mark.parametrize("gen", [generate_scenario_udr, generate_scenario_skr])
    def test_round_trip(self, gen, tmp_path):
        sc = gen({"n_services": 6, "strong_share": 0.5} if gen is generate_scenario_udr else None, 3)
        sc.save(tmp_path / "s.json")
        again = Scenario.load(tmp_path / "s.json")
        assert again == sc
        assert regenerate(again) == sc

    def test_validation_failures(self):
        sc = generate_scenario_udr(None, 0)
        with pytest.raises(ValidationError):
            dataclasses.replace(sc, paths=(Path("empty", (None, None)),)).validate()
        with pytest.raises(ValidationError):
            dataclasses.replace(sc, paths=(Path("far", (len(sc.providers),)),)).validate()
        svc = sc.services[0]
        weak = dataclasses.replace(svc, security_class=SecurityClass((3, 3, 3)), sla=dataclasses.replace(svc.sla, assignments=()))
        with pytest.raises(ValidationError):
            dataclasses.replace(sc, services=(weak,) + sc.services[1:]).validate()

    def test_mean_loss(self):
        sc = generate_scenario_udr(None, 0)
        assert mean_service_loss(sc, sc.lattice.bottom()) == 0.0
        assert 0.0 < mean_service_loss(sc, sc.lattice.top()) <= 1.0

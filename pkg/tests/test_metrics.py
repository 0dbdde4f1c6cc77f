import csv

import numpy as np
import pytest

from participlan.errors import NeedsMissing, NoMarginalized
from participlan.metrics import (
    METRIC_COLUMNS,
    DistanceCache,
    MetricsConfig,
    ecology,
    inclusion,
    per_resident_in_esr,
    per_resident_satisfaction,
    per_resident_service,
    report,
    satisfaction,
    service,
    write_metrics_csv,
)
from participlan.population import Population
from participlan.region import LandUse, Plan

import oracles

# Expected values for the hand-built grid16 instance, derived by hand
# from axis-aligned rectangle distances (see conftest for the layout):
#   resident 0 at (125,125): service 4/5, not in ESR, satisfaction 2/3
#   resident 1 at (625,375): service 5/5, in ESR,     satisfaction 4/4
#   resident 2 at (375,875): service 3/5, in ESR,     satisfaction 2/3
#   resident 3 at (875,875): service 4/5, not in ESR, satisfaction 0/3
HAND_SERVICE = (4 / 5 + 1.0 + 3 / 5 + 4 / 5) / 4          # 0.8
HAND_ECOLOGY = 2 / 4                                       # 0.5
HAND_SATISFACTION = (2 / 3 + 1.0 + 2 / 3 + 0.0) / 4        # 7/12
HAND_INCLUSION = (2 / 3 + 0.0) / 2                         # residents 0 and 3


class TestHandDerivedGoldens:
    def test_service(self, grid16, hand_plan, hand_population):
        assert service(grid16, hand_plan, hand_population) \
            == pytest.approx(HAND_SERVICE, abs=1e-12)

    def test_ecology(self, grid16, hand_plan, hand_population):
        assert ecology(grid16, hand_plan, hand_population) \
            == pytest.approx(HAND_ECOLOGY, abs=1e-12)

    def test_satisfaction(self, grid16, hand_plan, hand_population):
        assert satisfaction(grid16, hand_plan, hand_population) \
            == pytest.approx(HAND_SATISFACTION, abs=1e-12)

    def test_inclusion(self, grid16, hand_plan, hand_population):
        assert inclusion(grid16, hand_plan, hand_population) \
            == pytest.approx(HAND_INCLUSION, abs=1e-12)

    def test_oracle_agrees_with_hand_numbers(self, grid16, hand_plan,
                                             hand_population):
        assert oracles.oracle_service(grid16, hand_plan, hand_population) \
            == pytest.approx(HAND_SERVICE, abs=1e-12)
        assert oracles.oracle_ecology(grid16, hand_plan, hand_population) \
            == pytest.approx(HAND_ECOLOGY, abs=1e-12)
        assert oracles.oracle_satisfaction(grid16, hand_plan, hand_population) \
            == pytest.approx(HAND_SATISFACTION, abs=1e-12)
        assert oracles.oracle_inclusion(grid16, hand_plan, hand_population) \
            == pytest.approx(HAND_INCLUSION, abs=1e-12)


def test_per_resident_vectors(grid16, hand_plan, hand_population):
    sv = per_resident_service(grid16, hand_plan, hand_population)
    assert sv == pytest.approx([0.8, 1.0, 0.6, 0.8], abs=1e-12)
    esr = per_resident_in_esr(grid16, hand_plan, hand_population)
    assert list(esr) == [False, True, True, False]
    sat = per_resident_satisfaction(grid16, hand_plan, hand_population)
    assert sat == pytest.approx([2 / 3, 1.0, 2 / 3, 0.0], abs=1e-12)


def test_synthesized_population_matches_oracle(grid16, hand_plan, pop_grid16):
    config = MetricsConfig()
    assert service(grid16, hand_plan, pop_grid16, config) == pytest.approx(
        oracles.oracle_service(grid16, hand_plan, pop_grid16), abs=1e-12)
    assert ecology(grid16, hand_plan, pop_grid16, config) == pytest.approx(
        oracles.oracle_ecology(grid16, hand_plan, pop_grid16), abs=1e-12)
    assert satisfaction(grid16, hand_plan, pop_grid16, config) == pytest.approx(
        oracles.oracle_satisfaction(grid16, hand_plan, pop_grid16), abs=1e-12)
    assert inclusion(grid16, hand_plan, pop_grid16, config) == pytest.approx(
        oracles.oracle_inclusion(grid16, hand_plan, pop_grid16), abs=1e-12)


def test_inclusion_requires_marginalized(grid16, hand_plan, hand_population):
    plain = Population(
        residents=tuple(r for r in hand_population.residents
                        if not r.is_marginalized),
        seed=0)
    with pytest.raises(NoMarginalized):
        inclusion(grid16, hand_plan, plain)


def test_satisfaction_requires_needs(grid16, hand_plan, hand_population):
    import dataclasses
    broken = Population(
        residents=tuple(dataclasses.replace(r, needs=())
                        for r in hand_population.residents),
        seed=0)
    with pytest.raises(NeedsMissing):
        satisfaction(grid16, hand_plan, broken)


def test_report_aggregates_equal_per_resident_means(grid16, hand_plan,
                                                    pop_grid16):
    rep = report(grid16, hand_plan, pop_grid16)
    rows = rep.per_resident  # (resident_id, service, in_esr, satisfaction)
    assert [r[0] for r in rows] == [r.id for r in pop_grid16.residents]
    assert rep.service == pytest.approx(np.mean([r[1] for r in rows]), abs=0)
    assert rep.ecology == pytest.approx(np.mean([r[2] for r in rows]), abs=0)
    assert rep.satisfaction == pytest.approx(
        np.mean([r[3] for r in rows]), abs=0)
    doc = rep.to_json_dict()
    assert set(METRIC_COLUMNS) <= set(doc)


def test_ecology_without_fixed_green(grid16, hand_population):
    # plan with no parks or open spaces at all; grid16 has no fixed green,
    # so nobody can be in the ESR
    plan = Plan({aid: LandUse.OFFICE for aid in grid16.vacant_ids})
    assert ecology(grid16, plan, hand_population) == 0.0


def test_fixed_green_counts_with_flag(hlg, pop_hlg):
    plan = Plan({aid: LandUse.OFFICE for aid in hlg.vacant_ids})
    with_fixed = ecology(hlg, plan, pop_hlg,
                         MetricsConfig(include_fixed_green=True))
    without = ecology(hlg, plan, pop_hlg,
                      MetricsConfig(include_fixed_green=False))
    assert without == 0.0
    assert with_fixed > 0.0


def test_distance_cache_reuse(grid16, hand_plan, pop_grid16):
    cache = DistanceCache(grid16, pop_grid16.homes)
    a = satisfaction(grid16, hand_plan, pop_grid16, cache=cache)
    b = satisfaction(grid16, hand_plan, pop_grid16)
    assert a == b
    mat = cache.matrix("boundary")
    assert mat.shape == (len(pop_grid16.residents), len(grid16.areas))
    assert np.all(mat >= 0)
    cen = cache.matrix("centroid")
    assert np.all(cen + 1e-12 >= mat)  # boundary distance never exceeds centroid


def test_write_metrics_csv(tmp_path):
    rows = [
        {"run_id": "abc", "seed": 1, "method": "random",
         "service": 0.5, "ecology": 0.25, "satisfaction": 1 / 3,
         "inclusion": None},
        {"run_id": "abc", "seed": "mean", "method": "random",
         "service": 0.5, "ecology": 0.25, "satisfaction": 1 / 3,
         "inclusion": 0.75},
    ]
    path = tmp_path / "metrics.csv"
    write_metrics_csv(path, rows)
    with open(path) as fh:
        got = list(csv.reader(fh))
    assert got[0] == ["run_id", "seed", "method",
                      "service", "ecology", "satisfaction", "inclusion"]
    assert got[1][3] == repr(0.5)
    assert got[1][5] == repr(1 / 3)      # full precision survives the trip
    assert got[1][6] == ""               # absent inclusion stays blank
    assert float(got[1][5]) == 1 / 3

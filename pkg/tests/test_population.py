import collections
import json

import pytest

from participlan.errors import ParseError, SpecError
from participlan.geometry import Point
from participlan.population import (
    DemographicSpec,
    MarginalizedQuota,
    load_demographics,
    load_population,
    save_demographics,
    save_population,
    synthesize,
)
from participlan.region import LandUse
from participlan.rules import (
    DEFAULT_NEEDS_RULES,
    GENERIC_NEEDS,
    needs_from_rules,
)


def test_synthesis_counts_and_quotas(grid16, demo_spec_small):
    pop = synthesize(demo_spec_small, grid16, seed=4)
    assert len(pop.residents) == 300
    assert [r.id for r in pop.residents] == list(range(300))
    by_bg = collections.Counter(
        r.background for r in pop.residents if r.background)
    for quota in demo_spec_small.quotas:
        assert by_bg[quota.label] == quota.count
    assert sum(by_bg.values()) == 220


def test_synthesis_is_deterministic(grid16, demo_spec_small):
    a = synthesize(demo_spec_small, grid16, seed=9)
    b = synthesize(demo_spec_small, grid16, seed=9)
    assert [r.home for r in a.residents] == [r.home for r in b.residents]
    assert [r.needs for r in a.residents] == [r.needs for r in b.residents]
    c = synthesize(demo_spec_small, grid16, seed=10)
    assert [r.home for r in a.residents] != [r.home for r in c.residents]


def test_homes_lie_in_residential_areas(grid16, pop_grid16):
    residential_ids = {a.id for a in grid16.residential_areas}
    for r in pop_grid16.residents:
        assert r.home_area_id in residential_ids
        area = grid16.areas_by_id[r.home_area_id]
        xs = [p.x for p in area.boundary]
        ys = [p.y for p in area.boundary]
        assert min(xs) <= r.home.x <= max(xs)
        assert min(ys) <= r.home.y <= max(ys)


def test_forced_fields_hold(grid16, demo_spec_small):
    pop = synthesize(demo_spec_small, grid16, seed=12)
    for r in pop.residents:
        if r.background == "elderly living alone":
            assert r.profile.age_band == "65+"
            assert r.profile.family_size == "1"
        if r.background == "parenting family":
            assert r.profile.age_band == "30-44"
            assert r.profile.family_size in ("3", "4", "5+")
        if r.background == "office worker":
            assert r.profile.age_band in ("18-29", "30-44", "45-64")


def test_needs_are_valid(pop_grid16):
    for r in pop_grid16.residents:
        assert 3 <= len(r.needs) <= 5
        assert len(set(r.needs)) == len(r.needs)
        assert all(u in set(LandUse) for u in r.needs)


def test_descriptions_mention_profile(pop_grid16):
    r = pop_grid16.residents[0]
    assert r.profile.gender in r.description
    assert str(r.profile.age_band) in r.description
    marg = pop_grid16.marginalized()[0]
    assert marg.background in marg.description


def test_needs_rules_exact_profiles():
    # elderly living alone: hospital 5+4(age)=9, park 4+3=7, clinic 3+2=5
    facts = {"age_band": "65+", "family_size": 1, "education": "secondary",
             "gender": "female", "background": "elderly living alone"}
    needs = needs_from_rules(facts, DEFAULT_NEEDS_RULES)
    assert needs[0] is LandUse.HOSPITAL
    assert needs[1] is LandUse.PARK
    assert LandUse.CLINIC in needs

    # no matching rules at all falls back to the generic top-3
    bland = {"age_band": "unknown", "family_size": 2,
             "education": "none", "gender": "male", "background": None}
    assert needs_from_rules(bland, DEFAULT_NEEDS_RULES) == GENERIC_NEEDS


def test_needs_rules_cap_at_five():
    facts = {"age_band": "30-44", "family_size": "5+",
             "education": "postgraduate", "gender": "female",
             "background": "parenting family"}
    needs = needs_from_rules(facts, DEFAULT_NEEDS_RULES)
    assert len(needs) == 5
    assert len(set(needs)) == 5


def test_spec_validation_rejects_bad_distributions():
    with pytest.raises(SpecError, match="gender"):
        DemographicSpec(
            n_agents=10,
            gender={"female": 0.7, "male": 0.7},
            age_band={"18-29": 1.0},
            education={"secondary": 1.0},
            family_size={1: 1.0},
            quotas=(),
        ).validate()
    with pytest.raises(SpecError, match="n_agents"):
        DemographicSpec(
            n_agents=5,
            gender={"female": 1.0},
            age_band={"18-29": 1.0},
            education={"secondary": 1.0},
            family_size={1: 1.0},
            quotas=(MarginalizedQuota("drifter", 9, {}),),
        ).validate()


def test_demographics_round_trip(tmp_path, demo_spec):
    path = tmp_path / "spec.json"
    save_demographics(demo_spec, path)
    again = load_demographics(path)
    assert again.n_agents == demo_spec.n_agents
    assert again.gender == demo_spec.gender
    assert [q.label for q in again.quotas] == [q.label for q in demo_spec.quotas]
    assert [q.force for q in again.quotas] == [q.force for q in demo_spec.quotas]


def test_population_round_trip(tmp_path, pop_grid16):
    path = tmp_path / "pop.json"
    save_population(pop_grid16, path)
    again = load_population(path)
    assert len(again.residents) == len(pop_grid16.residents)
    for a, b in zip(again.residents, pop_grid16.residents):
        assert a.id == b.id
        assert a.needs == b.needs
        assert a.background == b.background
        assert a.home.x == pytest.approx(b.home.x, abs=0)


def test_population_load_rejects_bad_needs(tmp_path, pop_grid16):
    path = tmp_path / "pop.json"
    save_population(pop_grid16, path)
    doc = json.loads(path.read_text())
    doc["residents"][0]["needs"] = ["residential", "park", "school"]
    path.write_text(json.dumps(doc))
    with pytest.raises(ParseError, match="residential"):
        load_population(path)


def test_needs_elicited_through_rule_backend(grid16, demo_spec_small,
                                             rule_backend):
    from participlan.population import elicit_needs
    pop = synthesize(demo_spec_small, grid16, seed=3)
    resident = pop.residents[0]
    needs = elicit_needs(resident, rule_backend)
    # the rule backend applies the same default rules, so elicitation
    # reproduces what synthesis already attached
    assert needs == resident.needs

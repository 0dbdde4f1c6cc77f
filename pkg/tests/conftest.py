import numpy as np
import pytest

from participlan import fixtures
from participlan.geometry import Point
from participlan.llm import BackendConfig, make_backend
from participlan.population import Population, Profile, Resident, synthesize
from participlan.region import ASSIGNABLE_USES, LandUse, Plan


@pytest.fixture(scope="session")
def grid16():
    return fixtures.grid16_region()


@pytest.fixture(scope="session")
def hlg():
    return fixtures.hlg_like_region()


@pytest.fixture(scope="session")
def dhm():
    return fixtures.dhm_like_region()


@pytest.fixture(scope="session")
def demo_spec():
    return fixtures.hlg_like_demographics()


@pytest.fixture(scope="session")
def demo_spec_small():
    # smallest population the absolute group quotas allow headroom for
    return fixtures.hlg_like_demographics(300)


@pytest.fixture(scope="session")
def pop_grid16(grid16, demo_spec_small):
    return synthesize(demo_spec_small, grid16, seed=11)


@pytest.fixture(scope="session")
def pop_hlg(hlg, demo_spec):
    return synthesize(demo_spec, hlg, seed=101)


@pytest.fixture()
def rule_backend():
    return make_backend(BackendConfig())


# A fully hand-built instance on the 4x4 grid: every value below was
# derived by hand from axis-aligned rectangle distances, so tests that
# use it depend on no package code for their expected numbers.

HAND_PLAN = Plan({
    2: LandUse.SCHOOL, 3: LandUse.HOSPITAL, 4: LandUse.CLINIC,
    5: LandUse.BUSINESS, 6: LandUse.OFFICE, 8: LandUse.RECREATION,
    9: LandUse.PARK, 10: LandUse.OPEN_SPACE, 11: LandUse.SCHOOL,
    12: LandUse.BUSINESS, 13: LandUse.PARK, 15: LandUse.OFFICE,
})


def _resident(rid, x, y, home_area, needs, background=None):
    return Resident(
        id=rid,
        profile=Profile(gender="female", age_band="30-44",
                        education="bachelor", family_size=2),
        background=background,
        description="hand-built test resident",
        home=Point(x, y),
        home_area_id=home_area,
        needs=tuple(needs),
    )


@pytest.fixture(scope="session")
def hand_population():
    residents = (
        _resident(0, 125.0, 125.0, 1,
                  [LandUse.SCHOOL, LandUse.HOSPITAL, LandUse.CLINIC],
                  background="elderly living alone"),
        _resident(1, 625.0, 375.0, 7,
                  [LandUse.OFFICE, LandUse.BUSINESS, LandUse.RECREATION,
                   LandUse.PARK]),
        _resident(2, 375.0, 875.0, 14,
                  [LandUse.SCHOOL, LandUse.PARK, LandUse.CLINIC]),
        _resident(3, 875.0, 875.0, 16,
                  [LandUse.HOSPITAL, LandUse.CLINIC, LandUse.PARK],
                  background="family with a sick member"),
    )
    return Population(residents=residents, seed=0)


@pytest.fixture(scope="session")
def hand_plan():
    return HAND_PLAN


def random_plan_for(region, rng):
    """Any quota-respecting assignment, for oracle comparisons."""
    vacant = list(region.vacant_ids)
    rng.shuffle(vacant)
    assignment = {}
    i = 0
    for use in ASSIGNABLE_USES:
        for _ in range(region.requirements.get(use, 0)):
            assignment[vacant[i]] = use
            i += 1
    for aid in vacant[i:]:
        assignment[aid] = ASSIGNABLE_USES[int(rng.integers(len(ASSIGNABLE_USES)))]
    return Plan(assignment)


def scatter_population(region, n, rng, needs_pool=None, marginal_every=3):
    """Uniform random homes in the region bounding box, random needs."""
    xs, ys = [], []
    for area in region.areas:
        xs.extend(p.x for p in area.boundary)
        ys.extend(p.y for p in area.boundary)
    lo_x, hi_x, lo_y, hi_y = min(xs), max(xs), min(ys), max(ys)
    pool = list(needs_pool or ASSIGNABLE_USES)
    residents = []
    for rid in range(n):
        home = Point(float(rng.uniform(lo_x, hi_x)),
                     float(rng.uniform(lo_y, hi_y)))
        k = int(rng.integers(3, 6))
        picks = rng.choice(len(pool), size=min(k, len(pool)), replace=False)
        needs = tuple(pool[int(i)] for i in picks)
        background = "drifter" if rid % marginal_every == 0 else None
        residents.append(Resident(
            id=rid,
            profile=Profile("male", "18-29", "secondary", 1),
            background=background,
            description="scatter test resident",
            home=home,
            home_area_id=region.areas[0].id,
            needs=needs,
        ))
    return Population(residents=tuple(residents), seed=0)

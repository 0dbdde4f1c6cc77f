"""Synthetic resident population.

Residents get a demographic profile drawn from configured marginals, a
home sampled inside a residential area, an optional background tag that
marks them as part of a marginalized group, a one-sentence description,
and a short list of facility needs. Synthesis is a pure function of
(spec, region, seed).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from . import geometry, rules
from .errors import GeometryError, ParseError, SpecError
from .geometry import Point
from .llm import (assistant, parse_needs_response, render_describe_prompt,
                  render_needs_prompt, user)
from .region import ASSIGNABLE_USES, LandUse, Region

_PROFILE_FIELDS = ("gender", "age_band", "education", "family_size")


@dataclass(frozen=True)
class Profile:
    gender: str
    age_band: str
    education: str
    family_size: str

    def facts(self, background: Optional[str] = None) -> dict[str, Optional[str]]:
        d = {f: getattr(self, f) for f in _PROFILE_FIELDS}
        d["background"] = background
        return d


@dataclass(frozen=True)
class MarginalizedQuota:
    label: str
    count: int
    force: Mapping[str, tuple[str, ...]] = field(default_factory=dict)


@dataclass(frozen=True)
class DemographicSpec:
    n_agents: int
    gender: Mapping[str, float]
    age_band: Mapping[str, float]
    education: Mapping[str, float]
    family_size: Mapping[str, float]
    quotas: tuple[MarginalizedQuota, ...] = ()
    needs_rules: tuple[rules.NeedsRule, ...] = rules.DEFAULT_NEEDS_RULES
    ranking: tuple[LandUse, ...] = rules.DEFAULT_RANKING

    def distribution(self, field_name: str) -> Mapping[str, float]:
        return getattr(self, field_name)

    def validate(self) -> None:
        if self.n_agents <= 0:
            raise SpecError("n_agents must be positive")
        for name in _PROFILE_FIELDS:
            dist = self.distribution(name)
            if not dist:
                raise SpecError(f"{name}: empty distribution")
            total = sum(dist.values())
            if abs(total - 1.0) > 1e-9:
                raise SpecError(f"{name}: probabilities sum to {total}, expected 1")
            if any(p < 0 for p in dist.values()):
                raise SpecError(f"{name}: negative probability")
        total_quota = sum(q.count for q in self.quotas)
        if total_quota > self.n_agents:
            raise SpecError(
                f"marginalized quotas sum to {total_quota} > n_agents {self.n_agents}")
        for q in self.quotas:
            if q.count < 0:
                raise SpecError(f"quota {q.label}: negative count")
            for fname, allowed in q.force.items():
                if fname not in _PROFILE_FIELDS:
                    raise SpecError(f"quota {q.label}: unknown field {fname}")
                labels = set(self.distribution(fname))
                bad = [v for v in allowed if v not in labels]
                if bad:
                    raise SpecError(f"quota {q.label}: unknown {fname} labels {bad}")


def load_demographics(path: Union[str, Path]) -> DemographicSpec:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON ({exc})") from exc
    try:
        quotas = tuple(
            MarginalizedQuota(
                label=str(q["label"]),
                count=int(q["count"]),
                force={k: tuple(v) for k, v in (q.get("force") or {}).items()},
            )
            for q in doc.get("quotas", []))
        needs_rules = rules.DEFAULT_NEEDS_RULES
        if "needs_rules" in doc:
            needs_rules = tuple(
                rules.NeedsRule(
                    when=dict(r["when"]),
                    prefer={LandUse.parse(k): int(v) for k, v in r["prefer"].items()},
                )
                for r in doc["needs_rules"])
        ranking = rules.DEFAULT_RANKING
        if "ranking" in doc:
            ranking = tuple(LandUse.parse(u) for u in doc["ranking"])
        spec = DemographicSpec(
            n_agents=int(doc["n_agents"]),
            gender={str(k): float(v) for k, v in doc["gender"].items()},
            age_band={str(k): float(v) for k, v in doc["age_band"].items()},
            education={str(k): float(v) for k, v in doc["education"].items()},
            family_size={str(k): float(v) for k, v in doc["family_size"].items()},
            quotas=quotas,
            needs_rules=needs_rules,
            ranking=ranking,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: {exc!r}") from exc
    spec.validate()
    return spec


def demographics_to_json_dict(spec: DemographicSpec) -> dict:
    doc = {
        "n_agents": spec.n_agents,
        "gender": dict(spec.gender),
        "age_band": dict(spec.age_band),
        "education": dict(spec.education),
        "family_size": dict(spec.family_size),
        "quotas": [
            {"label": q.label, "count": q.count,
             "force": {k: list(v) for k, v in q.force.items()}}
            for q in spec.quotas
        ],
    }
    if spec.needs_rules is not rules.DEFAULT_NEEDS_RULES:
        doc["needs_rules"] = [
            {"when": dict(r.when),
             "prefer": {u.value: w for u, w in r.prefer.items()}}
            for r in spec.needs_rules
        ]
    if spec.ranking is not rules.DEFAULT_RANKING:
        doc["ranking"] = [u.value for u in spec.ranking]
    return doc


def save_demographics(spec: DemographicSpec, path: Union[str, Path]) -> None:
    Path(path).write_text(
        json.dumps(demographics_to_json_dict(spec), indent=2, sort_keys=True) + "\n")


@dataclass(frozen=True)
class Resident:
    id: int
    profile: Profile
    background: Optional[str]
    description: str
    home: Point
    home_area_id: int
    needs: tuple[LandUse, ...]

    @property
    def is_marginalized(self) -> bool:
        return self.background is not None

    def facts(self) -> dict[str, Optional[str]]:
        return self.profile.facts(self.background)


@dataclass(frozen=True)
class Population:
    residents: tuple[Resident, ...]
    seed: int

    def __len__(self) -> int:
        return len(self.residents)

    @property
    def homes(self) -> np.ndarray:
        return np.array([r.home for r in self.residents], dtype=float)

    def marginalized(self) -> tuple[Resident, ...]:
        return tuple(r for r in self.residents if r.is_marginalized)


def _draw_categorical(rng: np.random.Generator, dist: Mapping[str, float],
                      n: int) -> list[str]:
    labels = list(dist)
    probs = np.array([dist[k] for k in labels], dtype=float)
    probs = probs / probs.sum()
    idx = rng.choice(len(labels), size=n, p=probs)
    return [labels[i] for i in idx]


def _sample_point_in_polygon(rng: np.random.Generator,
                             boundary: Sequence[Point],
                             max_tries: int = 10_000) -> Point:
    xs = [p[0] for p in boundary]
    ys = [p[1] for p in boundary]
    lo_x, hi_x = min(xs), max(xs)
    lo_y, hi_y = min(ys), max(ys)
    for _ in range(max_tries):
        p = Point(float(rng.uniform(lo_x, hi_x)), float(rng.uniform(lo_y, hi_y)))
        if geometry.point_in_polygon(p, tuple(boundary)):
            return p
    raise GeometryError(
        f"rejection sampling failed after {max_tries} tries; polygon too thin?")


def synthesize(spec: DemographicSpec, region: Region, seed: int) -> Population:
    """Build the full population for one region.

    Marginalized quotas claim the first residents in declaration order;
    forced fields are resampled from the allowed labels so the group
    definition holds (an elderly-living-alone resident is 65+ in a
    1-person household, say). Homes land in residential areas chosen
    proportionally to polygon area.
    """
    spec.validate()
    rng = np.random.default_rng(seed)
    n = spec.n_agents

    cols = {name: _draw_categorical(rng, spec.distribution(name), n)
            for name in _PROFILE_FIELDS}

    backgrounds: list[Optional[str]] = [None] * n
    i = 0
    for q in spec.quotas:
        for _ in range(q.count):
            backgrounds[i] = q.label
            for fname, allowed in q.force.items():
                if cols[fname][i] not in allowed:
                    dist = spec.distribution(fname)
                    sub = {k: dist[k] for k in allowed if dist.get(k, 0) > 0}
                    if not sub:
                        sub = {k: 1.0 for k in allowed}
                    cols[fname][i] = _draw_categorical(rng, sub, 1)[0]
            i += 1

    res_areas = region.residential_areas
    weights = np.array([a.area_m2 for a in res_areas], dtype=float)
    weights = weights / weights.sum()
    home_idx = rng.choice(len(res_areas), size=n, p=weights)

    residents = []
    for rid in range(n):
        profile = Profile(**{f: cols[f][rid] for f in _PROFILE_FIELDS})
        bg = backgrounds[rid]
        facts = profile.facts(bg)
        area = res_areas[home_idx[rid]]
        home = _sample_point_in_polygon(rng, area.boundary)
        residents.append(Resident(
            id=rid,
            profile=profile,
            background=bg,
            description=rules.describe(facts),
            home=home,
            home_area_id=area.id,
            needs=rules.needs_from_rules(facts, spec.needs_rules, spec.ranking),
        ))
    return Population(residents=tuple(residents), seed=seed)


def elicit_needs(resident: Resident, backend) -> tuple[LandUse, ...]:
    """Ask a chat backend for the resident's needs instead of using rules.

    One malformed reply earns a repair prompt; a second failure raises.
    """
    messages = render_needs_prompt(resident.facts())
    reply = backend.complete(messages)
    try:
        return parse_needs_response(reply)
    except ParseError as exc:
        repair = messages + [
            assistant(reply),
            user(f"That reply could not be used ({exc}). Answer again with a "
                 'single JSON object: {"needs": [3 to 5 land use names]}.'),
        ]
        return parse_needs_response(backend.complete(repair))


def elicit_needs_many(residents: Sequence[Resident], backend,
                      max_workers: int = 1) -> dict[int, tuple[LandUse, ...]]:
    """Elicit needs for many residents, merged by id for a stable order."""
    if max_workers <= 1:
        return {r.id: elicit_needs(r, backend) for r in residents}
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = {r.id: pool.submit(elicit_needs, r, backend) for r in residents}
        return {rid: futures[rid].result() for rid in sorted(futures)}


def generate_description(resident: Resident, backend) -> str:
    """One-paragraph self introduction from the backend."""
    text = backend.complete(render_describe_prompt(resident.facts())).strip()
    return " ".join(text.split())


def with_needs(pop: Population,
               needs_by_id: Mapping[int, Sequence[LandUse]]) -> Population:
    """Copy of the population with needs replaced where given."""
    out = []
    for r in pop.residents:
        if r.id in needs_by_id:
            out.append(replace(r, needs=tuple(needs_by_id[r.id])))
        else:
            out.append(r)
    return Population(residents=tuple(out), seed=pop.seed)


def population_to_json_dict(pop: Population) -> dict:
    return {
        "seed": pop.seed,
        "residents": [
            {
                "id": r.id,
                "gender": r.profile.gender,
                "age_band": r.profile.age_band,
                "education": r.profile.education,
                "family_size": r.profile.family_size,
                "background": r.background,
                "description": r.description,
                "home": [r.home[0], r.home[1]],
                "home_area_id": r.home_area_id,
                "needs": [u.value for u in r.needs],
            }
            for r in pop.residents
        ],
    }


def save_population(pop: Population, path: Union[str, Path]) -> None:
    Path(path).write_text(
        json.dumps(population_to_json_dict(pop), indent=2, sort_keys=True) + "\n")


def load_population(path: Union[str, Path]) -> Population:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON ({exc})") from exc
    residents = []
    try:
        for r in doc["residents"]:
            needs = tuple(LandUse.parse(u) for u in r["needs"])
            bad = [u.value for u in needs if u not in ASSIGNABLE_USES]
            if bad:
                raise ValueError(f"resident {r['id']}: non-assignable needs {bad}")
            residents.append(Resident(
                id=int(r["id"]),
                profile=Profile(gender=r["gender"], age_band=r["age_band"],
                                education=r["education"],
                                family_size=r["family_size"]),
                background=r.get("background"),
                description=r["description"],
                home=Point(float(r["home"][0]), float(r["home"][1])),
                home_area_id=int(r["home_area_id"]),
                needs=needs,
            ))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: {exc!r}") from exc
    return Population(residents=tuple(residents), seed=int(doc.get("seed", 0)))

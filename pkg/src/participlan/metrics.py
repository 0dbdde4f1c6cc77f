"""Plan evaluation metrics.

Four population-level scores on a (region, plan, population) triple:

- service: mean over residents of the share of service categories with
  at least one facility strictly within the service radius of home.
- ecology: share of residents whose home lies within the ecology radius
  of some green area (closed threshold).
- satisfaction: mean over residents of the share of their personal needs
  met strictly within the service radius.
- inclusion: satisfaction restricted to marginalized residents.

Strict-vs-closed thresholds are deliberate and pinned by tests: a
facility exactly at the service radius does not count, a home exactly at
the ecology radius does.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .errors import NeedsMissing, NoMarginalized
from .population import Population
from .region import (ASSIGNABLE_USES, LandUse, Plan, Region,
                     min_distance_many)

#: Service categories and the uses that satisfy each.
DEFAULT_SERVICE_CATEGORIES: tuple[tuple[str, tuple[LandUse, ...]], ...] = (
    ("education", (LandUse.SCHOOL,)),
    ("medical", (LandUse.HOSPITAL, LandUse.CLINIC)),
    ("working", (LandUse.OFFICE,)),
    ("shopping", (LandUse.BUSINESS,)),
    ("entertainment", (LandUse.RECREATION,)),
)


@dataclass(frozen=True)
class MetricsConfig:
    service_radius_m: float = 500.0
    esr_radius_m: float = 300.0
    categories: tuple[tuple[str, tuple[LandUse, ...]], ...] = DEFAULT_SERVICE_CATEGORIES
    include_fixed_green: bool = True
    distance_mode: str = "boundary"


class DistanceCache:
    """Home-to-area distance matrix shared across metric calls.

    Boundary distances are built eagerly (the common path); centroid
    distances fill in lazily on first request.
    """

    def __init__(self, region: Region, homes: np.ndarray):
        self.region = region
        self.homes = np.asarray(homes, dtype=float)
        self._by_mode: dict[str, np.ndarray] = {
            "boundary": self._build("boundary")}

    def _build(self, mode: str) -> np.ndarray:
        n_m = len(self.homes)
        n_a = len(self.region.areas)
        mat = np.empty((n_m, n_a), dtype=float)
        for j, area in enumerate(self.region.areas):
            mat[:, j] = min_distance_many(self.homes, area, mode)
        return mat

    def matrix(self, mode: str = "boundary") -> np.ndarray:
        if mode not in self._by_mode:
            self._by_mode[mode] = self._build(mode)
        return self._by_mode[mode]

    def column_index(self) -> dict[int, int]:
        return {a.id: j for j, a in enumerate(self.region.areas)}


def _use_columns(region: Region, plan: Plan,
                 uses: Sequence[LandUse]) -> np.ndarray:
    wanted = set(uses)
    return np.array([plan.use_of(a) in wanted for a in region.areas], dtype=bool)


def _ensure_cache(region: Region, population: Population,
                  cache: Optional[DistanceCache]) -> DistanceCache:
    if cache is None:
        return DistanceCache(region, population.homes)
    return cache


def per_resident_service(region: Region, plan: Plan, population: Population,
                         config: MetricsConfig = MetricsConfig(),
                         cache: Optional[DistanceCache] = None) -> np.ndarray:
    """Share of service categories reachable per resident, in [0, 1]."""
    cache = _ensure_cache(region, population, cache)
    dist = cache.matrix(config.distance_mode)
    n_m = len(population)
    covered = np.zeros(n_m, dtype=float)
    for _, uses in config.categories:
        cols = _use_columns(region, plan, uses)
        if cols.any():
            hit = (dist[:, cols] < config.service_radius_m).any(axis=1)
        else:
            hit = np.zeros(n_m, dtype=bool)
        covered += hit
    return covered / float(len(config.categories))


def per_resident_in_esr(region: Region, plan: Plan, population: Population,
                        config: MetricsConfig = MetricsConfig(),
                        cache: Optional[DistanceCache] = None) -> np.ndarray:
    """1.0 for residents inside the ecology service range, else 0.0.

    The range is the union of closed esr_radius_m buffers around every
    green area (parks, open spaces, and optionally the fixed green stock).
    """
    cache = _ensure_cache(region, population, cache)
    dist = cache.matrix(config.distance_mode)
    greens = [LandUse.PARK, LandUse.OPEN_SPACE]
    if config.include_fixed_green:
        greens.append(LandUse.GREEN_FIXED)
    cols = _use_columns(region, plan, greens)
    if not cols.any():
        return np.zeros(len(population), dtype=float)
    return (dist[:, cols] <= config.esr_radius_m).any(axis=1).astype(float)


def needs_matrix(population: Population) -> tuple[np.ndarray, np.ndarray]:
    """(bool[resident, assignable-use], needs-count[resident]) for vectorized
    satisfaction; raises if any resident lacks needs."""
    index = {u: k for k, u in enumerate(ASSIGNABLE_USES)}
    mask = np.zeros((len(population), len(ASSIGNABLE_USES)), dtype=bool)
    lens = np.empty(len(population), dtype=float)
    for i, r in enumerate(population.residents):
        if not r.needs:
            raise NeedsMissing(f"resident {r.id} has an empty needs list")
        lens[i] = len(r.needs)
        for need in r.needs:
            if need in index:
                mask[i, index[need]] = True
    return mask, lens


def use_hits(region: Region, plan: Plan, near: np.ndarray) -> np.ndarray:
    """bool[resident, assignable-use]: some area of that use is in range."""
    hits = np.zeros((near.shape[0], len(ASSIGNABLE_USES)), dtype=bool)
    for k, u in enumerate(ASSIGNABLE_USES):
        cols = _use_columns(region, plan, [u])
        if cols.any():
            hits[:, k] = near[:, cols].any(axis=1)
    return hits


def per_resident_satisfaction(region: Region, plan: Plan, population: Population,
                              config: MetricsConfig = MetricsConfig(),
                              cache: Optional[DistanceCache] = None) -> np.ndarray:
    """Share of each resident's needs with a facility strictly in range."""
    mask, lens = needs_matrix(population)
    cache = _ensure_cache(region, population, cache)
    near = cache.matrix(config.distance_mode) < config.service_radius_m
    hits = use_hits(region, plan, near)
    met = (hits & mask).sum(axis=1)
    return met / lens


def service(region: Region, plan: Plan, population: Population,
            config: MetricsConfig = MetricsConfig(),
            cache: Optional[DistanceCache] = None) -> float:
    return float(np.mean(per_resident_service(region, plan, population, config, cache)))


def ecology(region: Region, plan: Plan, population: Population,
            config: MetricsConfig = MetricsConfig(),
            cache: Optional[DistanceCache] = None) -> float:
    return float(np.mean(per_resident_in_esr(region, plan, population, config, cache)))


def satisfaction(region: Region, plan: Plan, population: Population,
                 config: MetricsConfig = MetricsConfig(),
                 cache: Optional[DistanceCache] = None) -> float:
    return float(np.mean(per_resident_satisfaction(region, plan, population, config, cache)))


def inclusion(region: Region, plan: Plan, population: Population,
              config: MetricsConfig = MetricsConfig(),
              cache: Optional[DistanceCache] = None) -> float:
    mask = np.array([r.is_marginalized for r in population.residents], dtype=bool)
    if not mask.any():
        raise NoMarginalized("population has no marginalized residents")
    per = per_resident_satisfaction(region, plan, population, config, cache)
    return float(np.mean(per[mask]))


@dataclass(frozen=True)
class MetricsReport:
    service: float
    ecology: float
    satisfaction: float
    inclusion: Optional[float]
    per_resident: tuple[tuple[int, float, float, float], ...]
    service_radius_m: float
    esr_radius_m: float

    def to_json_dict(self) -> dict:
        return {
            "service": self.service,
            "ecology": self.ecology,
            "satisfaction": self.satisfaction,
            "inclusion": self.inclusion,
            "service_radius_m": self.service_radius_m,
            "esr_radius_m": self.esr_radius_m,
        }


def report(region: Region, plan: Plan, population: Population,
           config: MetricsConfig = MetricsConfig(),
           cache: Optional[DistanceCache] = None) -> MetricsReport:
    """All four metrics plus per-resident rows from one distance pass.

    Aggregates are means of the per-resident arrays, so report() and the
    scalar functions agree exactly.
    """
    cache = _ensure_cache(region, population, cache)
    srv = per_resident_service(region, plan, population, config, cache)
    esr = per_resident_in_esr(region, plan, population, config, cache)
    sat = per_resident_satisfaction(region, plan, population, config, cache)
    mask = np.array([r.is_marginalized for r in population.residents], dtype=bool)
    incl = float(np.mean(sat[mask])) if mask.any() else None
    rows = tuple(
        (r.id, float(srv[i]), float(esr[i]), float(sat[i]))
        for i, r in enumerate(population.residents))
    return MetricsReport(
        service=float(np.mean(srv)),
        ecology=float(np.mean(esr)),
        satisfaction=float(np.mean(sat)),
        inclusion=incl,
        per_resident=rows,
        service_radius_m=config.service_radius_m,
        esr_radius_m=config.esr_radius_m,
    )


METRIC_COLUMNS = ("service", "ecology", "satisfaction", "inclusion")


def write_metrics_csv(path: Union[str, Path],
                      rows: Sequence[Mapping[str, object]]) -> None:
    """One row per evaluation: run_id, seed, method, then the four metrics.

    Floats are serialized with repr so reruns are byte-identical.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("run_id", "seed", "method") + METRIC_COLUMNS)
        for row in rows:
            out = [str(row.get("run_id", "")), str(row.get("seed", "")),
                   str(row.get("method", ""))]
            for col in METRIC_COLUMNS:
                value = row.get(col)
                out.append("" if value is None else repr(float(value)))
            writer.writerow(out)

"""Independent brute-force references for the spatial metrics.

Everything here is deliberately scalar pure Python with its own geometry,
so agreement with the vectorized package code is meaningful. Keep these
functions dumb: nested loops over residents and areas, no numpy, no
imports from the package beyond reading plain attributes.
"""
from __future__ import annotations

import math

SERVICE_CATEGORIES = {
    "education": ("school",),
    "medical": ("hospital", "clinic"),
    "working": ("office",),
    "shopping": ("business",),
    "entertainment": ("recreation",),
}

GREEN_ASSIGNED = ("park", "open_space")


def seg_dist(px, py, ax, ay, bx, by):
    """Distance from (px, py) to segment (a, b), scalar math only."""
    vx, vy = bx - ax, by - ay
    wx, wy = px - ax, py - ay
    vv = vx * vx + vy * vy
    if vv == 0.0:
        return math.hypot(wx, wy)
    t = (wx * vx + wy * vy) / vv
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    return math.hypot(px - (ax + t * vx), py - (ay + t * vy))


def inside(px, py, ring):
    """Even-odd rule point-in-polygon on a list of (x, y) tuples."""
    n = len(ring)
    hit = False
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % n]
        if (y1 > py) != (y2 > py):
            xint = x1 + (py - y1) / (y2 - y1) * (x2 - x1)
            if px < xint:
                hit = not hit
    return hit


def poly_dist(px, py, ring):
    """Zero inside the polygon, else distance to the nearest edge."""
    n = len(ring)
    best = min(
        seg_dist(px, py, ring[i][0], ring[i][1],
                 ring[(i + 1) % n][0], ring[(i + 1) % n][1])
        for i in range(n)
    )
    if best <= 1e-9:
        return 0.0
    if inside(px, py, ring):
        return 0.0
    return best


def _ring_of(area):
    return [(p.x, p.y) for p in area.boundary]


def _use_of(area, plan):
    if area.fixed_use is not None:
        return str(area.fixed_use.value)
    assigned = plan.assignment.get(area.id)
    return None if assigned is None else str(assigned.value)


def _home_of(resident):
    return float(resident.home.x), float(resident.home.y)


def resident_area_distances(region, resident):
    px, py = _home_of(resident)
    return {area.id: poly_dist(px, py, _ring_of(area)) for area in region.areas}


def oracle_service(region, plan, population, radius=500.0):
    """Mean per-resident share of the five categories strictly < radius."""
    uses = {a.id: _use_of(a, plan) for a in region.areas}
    total = 0.0
    for resident in population.residents:
        dists = resident_area_distances(region, resident)
        got = 0
        for members in SERVICE_CATEGORIES.values():
            if any(uses[a.id] in members and dists[a.id] < radius
                   for a in region.areas):
                got += 1
        total += got / len(SERVICE_CATEGORIES)
    return total / len(population.residents)


def oracle_ecology(region, plan, population, radius=300.0,
                   include_fixed_green=True):
    """Share of residents within the closed radius of any green area."""
    greens = []
    for area in region.areas:
        use = _use_of(area, plan)
        if use in GREEN_ASSIGNED:
            greens.append(area)
        elif include_fixed_green and use == "green_fixed":
            greens.append(area)
    count = 0
    for resident in population.residents:
        px, py = _home_of(resident)
        if any(poly_dist(px, py, _ring_of(g)) <= radius for g in greens):
            count += 1
    return count / len(population.residents)


def _one_satisfaction(region, plan, resident, radius):
    uses = {a.id: _use_of(a, plan) for a in region.areas}
    dists = resident_area_distances(region, resident)
    needs = [str(u.value) for u in resident.needs]
    met = 0
    for need in needs:
        if any(uses[a.id] == need and dists[a.id] < radius
               for a in region.areas):
            met += 1
    return met / len(needs)


def oracle_satisfaction(region, plan, population, radius=500.0):
    total = sum(_one_satisfaction(region, plan, r, radius)
                for r in population.residents)
    return total / len(population.residents)


def oracle_inclusion(region, plan, population, radius=500.0):
    marg = [r for r in population.residents if r.is_marginalized]
    if not marg:
        raise ValueError("no marginalized residents")
    total = sum(_one_satisfaction(region, plan, r, radius) for r in marg)
    return total / len(marg)

"""Deterministic resident behavior: needs, self-descriptions, opinions.

These rules stand in for a chat model when running offline. They are
pure functions of their inputs so that the simulator stays reproducible
and so property tests can reason about them directly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .region import ASSIGNABLE_USES, LandUse

#: Fallback preference order used to pad short needs lists.
DEFAULT_RANKING = (
    LandUse.PARK,
    LandUse.BUSINESS,
    LandUse.RECREATION,
    LandUse.SCHOOL,
    LandUse.CLINIC,
    LandUse.OFFICE,
    LandUse.HOSPITAL,
    LandUse.OPEN_SPACE,
)

#: What a resident with no distinguishing traits would ask for.
GENERIC_NEEDS = DEFAULT_RANKING[:3]

_CANON_INDEX = {u: i for i, u in enumerate(ASSIGNABLE_USES)}

MIN_NEEDS = 3
MAX_NEEDS = 5


@dataclass(frozen=True)
class NeedsRule:
    """If every key in `when` matches the resident facts, add `prefer` weights."""
    when: Mapping[str, str]
    prefer: Mapping[LandUse, int]


def _rule(when: Mapping[str, str], prefer: Sequence[tuple[LandUse, int]]) -> NeedsRule:
    return NeedsRule(when=dict(when), prefer=dict(prefer))


DEFAULT_NEEDS_RULES: tuple[NeedsRule, ...] = (
    _rule({"background": "parenting family"},
          [(LandUse.SCHOOL, 5), (LandUse.CLINIC, 4), (LandUse.PARK, 3)]),
    _rule({"background": "family with school children"},
          [(LandUse.SCHOOL, 5), (LandUse.RECREATION, 3), (LandUse.BUSINESS, 2)]),
    _rule({"background": "elderly living alone"},
          [(LandUse.HOSPITAL, 5), (LandUse.PARK, 4), (LandUse.CLINIC, 3)]),
    _rule({"background": "family with a sick member"},
          [(LandUse.HOSPITAL, 5), (LandUse.CLINIC, 4), (LandUse.PARK, 2)]),
    _rule({"background": "drifter"},
          [(LandUse.BUSINESS, 4), (LandUse.OFFICE, 4), (LandUse.RECREATION, 3)]),
    _rule({"background": "office worker"},
          [(LandUse.OFFICE, 5), (LandUse.BUSINESS, 3), (LandUse.RECREATION, 3)]),
    _rule({"age_band": "65+"},
          [(LandUse.HOSPITAL, 4), (LandUse.PARK, 3), (LandUse.CLINIC, 2)]),
    _rule({"age_band": "18-29"},
          [(LandUse.RECREATION, 4), (LandUse.BUSINESS, 3), (LandUse.OFFICE, 2)]),
    _rule({"age_band": "30-44"},
          [(LandUse.OFFICE, 4), (LandUse.SCHOOL, 2), (LandUse.BUSINESS, 2)]),
    _rule({"age_band": "45-64"},
          [(LandUse.OFFICE, 3), (LandUse.PARK, 2), (LandUse.BUSINESS, 2)]),
    _rule({"family_size": "4"},
          [(LandUse.SCHOOL, 3), (LandUse.PARK, 2)]),
    _rule({"family_size": "5+"},
          [(LandUse.SCHOOL, 3), (LandUse.PARK, 2)]),
    _rule({"family_size": "1"},
          [(LandUse.RECREATION, 2), (LandUse.BUSINESS, 2)]),
    _rule({"education": "bachelor"},
          [(LandUse.OFFICE, 2), (LandUse.RECREATION, 1)]),
    _rule({"education": "postgraduate"},
          [(LandUse.OFFICE, 2), (LandUse.RECREATION, 1)]),
)


def needs_from_rules(facts: Mapping[str, Optional[str]],
                     rules: Sequence[NeedsRule] = DEFAULT_NEEDS_RULES,
                     ranking: Sequence[LandUse] = DEFAULT_RANKING,
                     ) -> tuple[LandUse, ...]:
    """Derive a 3..5 item needs list from resident facts.

    Weights from every matching rule accumulate per land use; the top
    five by (weight desc, canonical order) survive, padded from the
    ranking if fewer than three rules fired.
    """
    weights: dict[LandUse, int] = {}
    for rule in rules:
        if all(facts.get(key) == value for key, value in rule.when.items()):
            for use, w in rule.prefer.items():
                weights[use] = weights.get(use, 0) + w
    ordered = sorted(weights, key=lambda u: (-weights[u], _CANON_INDEX[u]))
    needs = list(ordered[:MAX_NEEDS])
    for use in ranking:
        if len(needs) >= MIN_NEEDS:
            break
        if use not in needs:
            needs.append(use)
    return tuple(needs)


def describe(facts: Mapping[str, Optional[str]]) -> str:
    """One-sentence self description covering all demographic facts."""
    gender = facts.get("gender", "person")
    age = facts.get("age_band", "unknown age")
    edu = facts.get("education", "unknown")
    fam = facts.get("family_size", "unknown")
    bg = facts.get("background")
    base = (f"I am a {gender} resident aged {age} with {edu} education, "
            f"living in a household of {fam}")
    if bg:
        return base + f", and my circumstances are best described as: {bg}."
    return base + "."


# ---------------------------------------------------------------------------
# Rule-backend reply generators. Payloads are plain dicts mirroring the
# fenced JSON blocks that prompts carry; replies are strings shaped like a
# cooperative chat model's answer, with a fenced JSON block where the
# protocol expects structure.


def _fence(doc: dict) -> str:
    return "```json\n" + json.dumps(doc, sort_keys=True) + "\n```"


def needs_reply(payload: dict) -> str:
    facts = payload.get("facts", {})
    needs = needs_from_rules(facts)
    names = [u.value for u in needs]
    return ("Given my situation, the facilities that matter most to me are: "
            + ", ".join(names) + ".\n" + _fence({"needs": names}))


def describe_reply(payload: dict) -> str:
    return describe(payload.get("facts", {}))


def opinion_reply(payload: dict) -> str:
    """Ask for each unmet need at the nearest changeable area in view.

    A need is unmet when no area of that use sits strictly within the
    service radius. Requests prefer close vacant areas and avoid piling
    two uses onto one area.
    """
    needs = [LandUse.parse(n) for n in payload.get("needs", [])]
    radius = float(payload.get("service_radius_m", 500.0))
    entries = payload.get("view", [])

    met = set()
    for e in entries:
        use = e.get("land_use")
        if use is not None and float(e["distance_m"]) < radius:
            met.add(LandUse.parse(use))

    changeable = sorted(
        (e for e in entries if e.get("changeable")),
        key=lambda e: (float(e["distance_m"]), int(e["area_id"])))

    requests = []
    used_areas = set()
    for need in needs:
        if need in met:
            continue
        slot = next((e for e in changeable
                     if int(e["area_id"]) not in used_areas), None)
        if slot is None:
            break
        used_areas.add(int(slot["area_id"]))
        requests.append({
            "area_id": int(slot["area_id"]),
            "use": need.value,
            "reason": f"no {need.value} within {radius:.0f} m of my home",
        })

    if not requests:
        text = "My daily needs are already covered nearby; I have no change to request."
        return text + "\n" + _fence({"requests": []})

    lines = ["Some facilities I rely on are too far from where I live."]
    for r in requests:
        lines.append(f"Please make area {r['area_id']} a {r['use']}: {r['reason']}.")
    return "\n".join(lines) + "\n" + _fence({"requests": requests})


def _extract_requests(text: str) -> list[dict]:
    out = []
    pos = 0
    while True:
        start = text.find("```json", pos)
        if start < 0:
            break
        end = text.find("```", start + 7)
        if end < 0:
            break
        try:
            doc = json.loads(text[start + 7:end])
            out.extend(doc.get("requests", []))
        except (json.JSONDecodeError, AttributeError):
            pass
        pos = end + 3
    return out


def summary_reply(payload: dict) -> str:
    """Aggregate a round of opinions into counted change requests."""
    opinions = payload.get("opinions", [])
    tally: dict[tuple[int, str], int] = {}
    for text in opinions:
        for r in _extract_requests(text):
            try:
                key = (int(r["area_id"]), LandUse.parse(r["use"]).value)
            except (KeyError, ValueError, TypeError):
                continue
            tally[key] = tally.get(key, 0) + 1

    if not tally:
        return ("Residents voiced no concrete change requests this round.\n"
                + _fence({"requests": []}))

    ranked = sorted(tally.items(), key=lambda kv: (-kv[1], kv[0][0], kv[0][1]))
    lines = [f"{len(opinions)} residents spoke; their requests, by support:"]
    requests = []
    for (area_id, use), count in ranked:
        lines.append(f"- {count} asked for area {area_id} to become a {use}")
        requests.append({"area_id": area_id, "use": use, "count": count})
    return "\n".join(lines) + "\n" + _fence({"requests": requests})


def initial_plan_reply(payload: dict) -> str:
    """Quota-first deterministic assignment over the given vacant areas."""
    vacant = [int(v) for v in payload.get("vacant_ids", [])]
    req = {LandUse.parse(k): int(v)
           for k, v in payload.get("requirements", {}).items()}
    order = sorted(ASSIGNABLE_USES, key=lambda u: (-req.get(u, 0), _CANON_INDEX[u]))
    assignment: dict[int, str] = {}
    i = 0
    for use in order:
        for _ in range(req.get(use, 0)):
            assignment[vacant[i]] = use.value
            i += 1
    cycle = 0
    while i < len(vacant):
        assignment[vacant[i]] = ASSIGNABLE_USES[cycle % len(ASSIGNABLE_USES)].value
        i += 1
        cycle += 1
    doc = {"assignments": {str(k): assignment[k] for k in sorted(assignment)}}
    return ("Here is a complete assignment meeting every quota.\n" + _fence(doc))


def plan_revision_reply(payload: dict) -> str:
    """Echo the edits the caller proposes (the acceptance logic lives upstream)."""
    edits = payload.get("edits", [])
    doc = {"edits": [{"area_id": int(e["area_id"]), "use": str(e["use"])}
                     for e in edits]}
    if not edits:
        return "The current assignment already serves the discussion well; no edits.\n" + _fence(doc)
    lines = ["Based on the discussion summaries I will adjust the community:"]
    for e in doc["edits"]:
        lines.append(f"- area {e['area_id']} becomes {e['use']}")
    return "\n".join(lines) + "\n" + _fence(doc)

"""Fishbowl discussion and community-by-community plan revision.

One community revision: invite residents living in or near the
community, run N rounds where M sampled speakers voice opinions about
the frozen plan (each seeing their neighborhood and all prior round
summaries), summarize every round, then let the planner revise the
community from the accumulated summaries. The full pipeline applies
this to every community in ascending id order and records a metrics
report after the initial plan and after each revision.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import llm as llm_mod
from . import metrics as metrics_mod
from . import rules
from .errors import EmptyCommunity, InvariantError, NotPresent, ParseError
from .geometry import compass_label
from .llm import (Backend, PlanEdit, RuleBackend, assistant,
                  parse_opinion_response, parse_plan_edits,
                  render_opinion_prompt, render_revision_prompt, user)
from .metrics import DistanceCache, MetricsConfig, MetricsReport
from .population import Population, Resident
from .region import (ASSIGNABLE_USES, LandUse, Plan, Region, plan_digest,
                     validate_plan)

log = logging.getLogger(__name__)

_CANON_INDEX = {u: i for i, u in enumerate(ASSIGNABLE_USES)}


@dataclass(frozen=True)
class DiscussionConfig:
    rounds: int = 3
    speakers_per_round: int = 50
    invite_buffer_m: float = 500.0
    exchange_fraction: float = 1.0
    seed: int = 0

    def validate(self) -> None:
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.speakers_per_round < 1:
            raise ValueError("speakers_per_round must be >= 1")
        if not (0.0 <= self.exchange_fraction <= 1.0):
            raise ValueError("exchange_fraction must be in [0, 1]")
        if self.invite_buffer_m <= 0:
            raise ValueError("invite_buffer_m must be positive")


@dataclass(frozen=True)
class OpinionItem:
    area_id: int
    use: LandUse
    reason: str


@dataclass(frozen=True)
class Opinion:
    resident_id: int
    text: str
    structured: tuple[OpinionItem, ...] = ()


@dataclass(frozen=True)
class Round:
    speaker_ids: tuple[int, ...]
    opinions: tuple[Opinion, ...]
    summary: str


@dataclass(frozen=True)
class Transcript:
    community_id: int
    rounds: tuple[Round, ...]
    final_edits: PlanEdit
    plan_before: str
    plan_after: str
    notes: tuple[str, ...] = ()


def transcript_to_json_dict(t: Transcript) -> dict:
    return {
        "community_id": t.community_id,
        "plan_before": t.plan_before,
        "plan_after": t.plan_after,
        "rounds": [
            {
                "speakers": list(r.speaker_ids),
                "opinions": [
                    {
                        "resident_id": o.resident_id,
                        "text": o.text,
                        "requests": [
                            {"area_id": it.area_id, "use": it.use.value,
                             "reason": it.reason}
                            for it in o.structured
                        ],
                    }
                    for o in r.opinions
                ],
                "summary": r.summary,
            }
            for r in t.rounds
        ],
        "final_edits": {
            "edits": [{"area_id": a, "use": u.value} for a, u in t.final_edits.edits],
            "rationale": t.final_edits.rationale,
        },
        "notes": list(t.notes),
    }


def transcript_from_json_dict(doc: dict) -> Transcript:
    rounds = tuple(
        Round(
            speaker_ids=tuple(int(s) for s in r["speakers"]),
            opinions=tuple(
                Opinion(
                    resident_id=int(o["resident_id"]),
                    text=o["text"],
                    structured=tuple(
                        OpinionItem(int(q["area_id"]), LandUse.parse(q["use"]),
                                    q.get("reason", ""))
                        for q in o.get("requests", [])),
                )
                for o in r["opinions"]),
            summary=r["summary"],
        )
        for r in doc["rounds"])
    fe = doc.get("final_edits", {})
    edits = PlanEdit(
        edits=tuple((int(e["area_id"]), LandUse.parse(e["use"]))
                    for e in fe.get("edits", [])),
        rationale=fe.get("rationale", ""))
    return Transcript(
        community_id=int(doc["community_id"]),
        rounds=rounds,
        final_edits=edits,
        plan_before=doc["plan_before"],
        plan_after=doc["plan_after"],
        notes=tuple(doc.get("notes", [])),
    )


def save_transcript(t: Transcript, path: Union[str, Path]) -> None:
    Path(path).write_text(
        json.dumps(transcript_to_json_dict(t), indent=2, sort_keys=True) + "\n")


def load_transcript(path: Union[str, Path]) -> Transcript:
    return transcript_from_json_dict(json.loads(Path(path).read_text()))


def render_transcript_text(t: Transcript) -> str:
    lines = [f"Community {t.community_id} discussion",
             f"plan before: {t.plan_before}   plan after: {t.plan_after}", ""]
    for i, r in enumerate(t.rounds, start=1):
        lines.append(f"=== Round {i} ({len(r.speaker_ids)} speakers) ===")
        for o in r.opinions:
            lines.append(f"[resident {o.resident_id}]")
            lines.append(o.text)
        lines.append(f"[summary] {r.summary}")
        lines.append("")
    lines.append("=== Revision ===")
    if t.final_edits.edits:
        for a, u in t.final_edits.edits:
            lines.append(f"area {a} -> {u.value}")
    else:
        lines.append("(no areas changed)")
    if t.final_edits.rationale:
        lines.append(t.final_edits.rationale)
    for note in t.notes:
        lines.append(f"note: {note}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Protocol pieces


def invite(community_id: int, region: Region, population: Population,
           invite_buffer_m: float = 500.0,
           cache: Optional[DistanceCache] = None) -> tuple[int, ...]:
    """Residents living in a community area or within the buffer of one.

    Membership uses boundary distance (0 inside), so "lives there" and
    "lives nearby" are one closed-threshold test.
    """
    if community_id not in region.community_ids:
        raise NotPresent(f"no community with id {community_id}")
    if cache is None:
        cache = DistanceCache(region, population.homes)
    cols = [j for j, a in enumerate(region.areas)
            if a.community_id == community_id]
    if not cols:
        raise EmptyCommunity(f"community {community_id} has no areas")
    near = cache.matrix("boundary")[:, cols].min(axis=1) <= invite_buffer_m
    invited = tuple(r.id for i, r in enumerate(population.residents) if near[i])
    if not invited:
        raise EmptyCommunity(
            f"community {community_id}: no resident within {invite_buffer_m:.0f} m")
    return invited


def view_payload(resident: Resident, region: Region, plan: Plan,
                 radius: float, cache: DistanceCache,
                 resident_index: int) -> list[dict]:
    """Neighborhood entries as plain dicts for prompts and rule replies."""
    row = cache.matrix("boundary")[resident_index]
    entries = []
    for j, area in enumerate(region.areas):
        d = float(row[j])
        if d <= radius:
            use = plan.use_of(area)
            cx, cy = area.centroid
            entries.append({
                "area_id": area.id,
                "land_use": use.value if use is not None else None,
                "distance_m": d,
                "direction": compass_label(cx - resident.home[0],
                                           cy - resident.home[1]),
                "changeable": area.is_vacant,
            })
    entries.sort(key=lambda e: (e["distance_m"], e["area_id"]))
    return entries


def _sample_speakers(rng: np.random.Generator, invited: Sequence[int],
                     prev: Optional[Sequence[int]], m_eff: int,
                     exchange_fraction: float) -> list[int]:
    invited = list(invited)
    if prev is None or exchange_fraction >= 1.0:
        picked = rng.choice(invited, size=m_eff, replace=False)
        return sorted(int(x) for x in picked)
    n_keep = min(int(round(m_eff * (1.0 - exchange_fraction))), len(prev))
    kept = [int(x) for x in rng.choice(list(prev), size=n_keep, replace=False)] \
        if n_keep else []
    pool = [x for x in invited if x not in set(kept)]
    n_new = m_eff - len(kept)
    newcomers = [int(x) for x in rng.choice(pool, size=n_new, replace=False)] \
        if n_new else []
    return sorted(kept + newcomers)


def apply_edits(plan: Plan, edits: PlanEdit) -> Plan:
    assignment = dict(plan.assignment)
    for area_id, use in edits.edits:
        assignment[area_id] = use
    return Plan(assignment)


class _InvitedSatisfaction:
    """Mean satisfaction over the invited residents, cheap to re-evaluate.

    Restricting the distance matrix to invited rows keeps the greedy
    repair fast on large populations; values match the metrics module
    exactly (same masks, same division, same summation order).
    """

    def __init__(self, region: Region, population: Population,
                 invited_idx: np.ndarray, metrics_config: MetricsConfig,
                 cache: DistanceCache):
        mask, lens = metrics_mod.needs_matrix(population)
        near = cache.matrix(metrics_config.distance_mode) \
            < metrics_config.service_radius_m
        self._region = region
        self._near = near[invited_idx]
        self._mask = mask[invited_idx]
        self._lens = lens[invited_idx]

    def mean(self, plan: Plan) -> float:
        hits = metrics_mod.use_hits(self._region, plan, self._near)
        met = (hits & self._mask).sum(axis=1)
        return float(np.mean(met / self._lens))


def _greedy_repair(plan: Plan, community_id: int, region: Region,
                   population: Population, invited: Sequence[int],
                   rounds: Sequence[Round], metrics_config: MetricsConfig,
                   cache: DistanceCache) -> tuple[Plan, PlanEdit]:
    """Apply the most-requested edits that keep quotas feasible and never
    lower the invited residents' mean satisfaction."""
    tally: dict[tuple[int, LandUse], int] = {}
    for rnd in rounds:
        for op in rnd.opinions:
            for item in op.structured:
                area = region.areas_by_id.get(item.area_id)
                if area is None or not area.is_vacant \
                        or area.community_id != community_id:
                    continue
                key = (item.area_id, item.use)
                tally[key] = tally.get(key, 0) + 1
    order = sorted(tally, key=lambda k: (-tally[k], k[0], _CANON_INDEX[k[1]]))

    pos_by_id = {r.id: i for i, r in enumerate(population.residents)}
    invited_idx = np.array([pos_by_id[r] for r in invited], dtype=int)
    evaluator = _InvitedSatisfaction(region, population, invited_idx,
                                     metrics_config, cache)
    req = region.requirements
    current = dict(plan.assignment)
    counts = {u: 0 for u in ASSIGNABLE_USES}
    for u in current.values():
        counts[u] += 1
    base = evaluator.mean(plan)
    accepted: list[tuple[int, LandUse]] = []
    for area_id, use in order:
        old = current[area_id]
        if old is use:
            continue
        if counts[old] - 1 < req.get(old, 0):
            continue
        cand = dict(current)
        cand[area_id] = use
        cand_sat = evaluator.mean(Plan(cand))
        if cand_sat >= base:
            current, base = cand, cand_sat
            counts[old] -= 1
            counts[use] += 1
            accepted.append((area_id, use))
    if accepted:
        rationale = "greedy repair accepted: " + "; ".join(
            f"area {a} -> {u.value} ({tally[(a, u)]} requests)"
            for a, u in accepted)
    else:
        rationale = "greedy repair: no request improved invited satisfaction"
    return Plan(current), PlanEdit(tuple(accepted), rationale)


def _llm_revision(plan: Plan, community_id: int, region: Region,
                  planner_backend: Backend, summaries: Sequence[str]
                  ) -> tuple[Plan, PlanEdit, list[str]]:
    """Parse-apply-validate with one repair prompt, else keep plan_before."""
    notes: list[str] = []
    messages = render_revision_prompt(region, community_id, plan, summaries)
    reply = planner_backend.complete(messages)
    problem: str
    try:
        edits = parse_plan_edits(reply, region, community_id)
        cand = apply_edits(plan, edits)
        report = validate_plan(region, cand)
        if report.ok:
            return cand, edits, notes
        problem = report.summary()
    except ParseError as exc:
        problem = str(exc)
    notes.append(f"revision attempt rejected: {problem}")
    repair = list(messages) + [
        assistant(reply),
        user(f"Those edits were not usable: {problem}. Reply again with a "
             'JSON object {"edits": [{"area_id": int, "use": str}]} touching '
             f"only changeable areas of community {community_id} and keeping "
             "every minimum count met."),
    ]
    reply2 = planner_backend.complete(repair)
    try:
        edits2 = parse_plan_edits(reply2, region, community_id)
        cand2 = apply_edits(plan, edits2)
        report2 = validate_plan(region, cand2)
        if report2.ok:
            return cand2, edits2, notes
        notes.append(f"repair rejected: {report2.summary()}; keeping previous plan")
    except ParseError as exc:
        notes.append(f"repair rejected: {exc}; keeping previous plan")
    return plan, PlanEdit((), "revision rejected after repair"), notes


def run_community_revision(plan: Plan, community_id: int, region: Region,
                           population: Population, backend: Backend,
                           planner_backend: Backend,
                           config: DiscussionConfig = DiscussionConfig(),
                           *,
                           cache: Optional[DistanceCache] = None,
                           metrics_config: MetricsConfig = MetricsConfig(),
                           roleplay: bool = True) -> tuple[Plan, Transcript]:
    """One community through the fishbowl protocol; the plan stays frozen
    until the planner's revision at the end."""
    config.validate()
    if cache is None:
        cache = DistanceCache(region, population.homes)
    invited = invite(community_id, region, population,
                     config.invite_buffer_m, cache)
    rng = np.random.default_rng([config.seed, community_id])
    m_eff = min(config.speakers_per_round, len(invited))
    by_id = {r.id: r for r in population.residents}
    pos_by_id = {r.id: i for i, r in enumerate(population.residents)}

    history: list[str] = []
    rounds: list[Round] = []
    prev: Optional[list[int]] = None
    for _ in range(config.rounds):
        speakers = _sample_speakers(rng, invited, prev, m_eff,
                                    config.exchange_fraction)
        opinions = []
        for rid in speakers:
            resident = by_id[rid]
            view = view_payload(resident, region, plan,
                                metrics_config.service_radius_m, cache,
                                pos_by_id[rid])
            if roleplay:
                desc, needs = resident.description, resident.needs
            else:
                desc, needs = llm_mod.GENERIC_PERSONA, rules.GENERIC_NEEDS
            text = backend.complete(render_opinion_prompt(
                desc, needs, view, history,
                metrics_config.service_radius_m, roleplay=roleplay))
            view_ids = {e["area_id"] for e in view}
            structured = tuple(
                OpinionItem(item["area_id"], item["use"], item["reason"])
                for item in parse_opinion_response(text)
                if item["area_id"] in view_ids)
            opinions.append(Opinion(rid, text, structured))
        summary = llm_mod.summarize([o.text for o in opinions], backend)
        history.append(summary)
        rounds.append(Round(tuple(speakers), tuple(opinions), summary))
        prev = speakers

    notes: list[str] = []
    if isinstance(planner_backend, RuleBackend):
        new_plan, edits = _greedy_repair(plan, community_id, region,
                                         population, invited, rounds,
                                         metrics_config, cache)
    else:
        new_plan, edits, notes = _llm_revision(plan, community_id, region,
                                               planner_backend, history)
    transcript = Transcript(
        community_id=community_id,
        rounds=tuple(rounds),
        final_edits=edits,
        plan_before=plan_digest(plan),
        plan_after=plan_digest(new_plan),
        notes=tuple(notes),
    )
    return new_plan, transcript


InitialPlanner = Callable[[Region], Plan]


def run_full_pipeline(region: Region, population: Population,
                      initial_planner: InitialPlanner, backend: Backend,
                      config: DiscussionConfig = DiscussionConfig(),
                      *,
                      planner_backend: Optional[Backend] = None,
                      metrics_config: MetricsConfig = MetricsConfig(),
                      community_order: Optional[Sequence[int]] = None,
                      roleplay: bool = True
                      ) -> tuple[Plan, list[Transcript], list[MetricsReport]]:
    """Initial plan, then sequential community revisions with a metrics
    report after every stage (index 0 = initial plan)."""
    if planner_backend is None:
        planner_backend = backend
    plan = initial_planner(region)
    check = validate_plan(region, plan)
    if not check.ok:
        raise InvariantError(f"initial plan invalid: {check.summary()}")
    cache = DistanceCache(region, population.homes)
    reports = [metrics_mod.report(region, plan, population, metrics_config, cache)]
    transcripts: list[Transcript] = []
    order = list(community_order) if community_order is not None \
        else sorted(region.community_ids)
    for cid in order:
        try:
            plan, transcript = run_community_revision(
                plan, cid, region, population, backend, planner_backend,
                config, cache=cache, metrics_config=metrics_config,
                roleplay=roleplay)
            transcripts.append(transcript)
        except EmptyCommunity as exc:
            log.warning("skipping community %s: %s", cid, exc)
        reports.append(
            metrics_mod.report(region, plan, population, metrics_config, cache))
    return plan, transcripts, reports


ABLATION_MODES = ("no-roleplay", "no-discussion", "single-planner")


def run_ablation(mode: str, region: Region, population: Population,
                 initial_planner: InitialPlanner, backend: Backend,
                 config: DiscussionConfig = DiscussionConfig(),
                 **kwargs) -> tuple[Plan, list[Transcript], list[MetricsReport]]:
    """Pipeline variants that drop one ingredient at a time.

    Metrics always use the residents' original needs; no-roleplay only
    changes what the discussion sees.
    """
    if mode == "single-planner":
        plan = initial_planner(region)
        check = validate_plan(region, plan)
        if not check.ok:
            raise InvariantError(f"initial plan invalid: {check.summary()}")
        metrics_config = kwargs.get("metrics_config", MetricsConfig())
        report = metrics_mod.report(region, plan, population, metrics_config)
        return plan, [], [report]
    if mode == "no-discussion":
        return run_full_pipeline(region, population, initial_planner, backend,
                                 replace(config, rounds=1), **kwargs)
    if mode == "no-roleplay":
        kwargs.pop("roleplay", None)
        return run_full_pipeline(region, population, initial_planner, backend,
                                 config, roleplay=False, **kwargs)
    raise ValueError(f"unknown ablation mode {mode!r}")

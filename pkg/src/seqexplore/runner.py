"""Sequential episode execution, subtask judging, traces and replay."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .agent import Agent, AgentConfig, Decision
from .explore import ScoringWeights
from .memory import SpatialMemory
from .metrics import EpisodeReport, SubtaskOutcome
from .reasoner import sigma_rubric
from .scenegraph import SceneGraph, Sighting
from .tasks import INFEASIBLE, Episode, Goal
from .world import (
    Pose,
    SensorModel,
    World,
    apply_action,
    geodesic_field,
    parse_scenario,
    raycast_fov,
)

TRACE_VERSION = 1


@dataclass
class EpisodeSettings:
    agent: AgentConfig = field(default_factory=AgentConfig)
    tau0: float = 0.25
    novelty_reference: str = "bank_union"
    keyframe_cadence: str = "every_step"
    persistent_memory: bool = True

    def to_record(self) -> dict:
        a = self.agent
        return {
            "tau0": self.tau0,
            "novelty_reference": self.novelty_reference,
            "keyframe_cadence": self.keyframe_cadence,
            "persistent_memory": self.persistent_memory,
            "theta": a.theta,
            "success_radius": a.success_radius,
            "cadence": a.cadence,
            "refresh_fraction": a.refresh_fraction,
            "sensor": asdict(a.sensor),
            "weights": asdict(a.weights),
        }

    @classmethod
    def from_record(cls, d: dict) -> "EpisodeSettings":
        agent = AgentConfig(
            theta=d["theta"],
            weights=ScoringWeights(**d["weights"]),
            sensor=SensorModel(**d["sensor"]),
            success_radius=d["success_radius"],
            cadence=d["cadence"],
            refresh_fraction=d["refresh_fraction"],
        )
        return cls(agent, d["tau0"], d["novelty_reference"], d["keyframe_cadence"], d["persistent_memory"])


def new_memory(world: World, settings: EpisodeSettings) -> SpatialMemory:
    return SpatialMemory.for_world(
        world,
        tau0=settings.tau0,
        novelty_reference=settings.novelty_reference,
        keyframe_cadence=settings.keyframe_cadence,
    )


def state_hash(pose: Pose, memory: SpatialMemory) -> str:
    h = hashlib.sha256(f"{pose.cell[0]},{pose.cell[1]},{pose.heading}|".encode())
    h.update(memory.state_digest())
    return h.hexdigest()[:16]


def sightings_for(world: World, visible, step: int) -> list[Sighting]:
    out = []
    for oid in sorted(visible.objects):
        o = world.objects[oid]
        out.append(Sighting(o.id, o.category, o.attributes, o.cell, o.room_id, step))
    return out


def judge_subtask(
    goal: Goal,
    decision: Decision | None,
    pose: Pose,
    steps: int,
    limit: int,
    world: World,
    sensor: SensorModel = SensorModel(),
    success_radius: int = 4,
    reason: str | None = None,
    judge=sigma_rubric,
    optimal: int | None = None,
    path_length: int = 0,
) -> SubtaskOutcome:
    """Score one subtask from its terminal action (None when a budget ran out)."""
    base = dict(
        goal_id=goal.id, track=goal.track, category=goal.category, feasible=goal.feasible,
        steps=steps, limit=limit, optimal=optimal, path_length=path_length,
    )
    if decision is None:
        sigma = 1 if goal.track == "EQA" else None
        return SubtaskOutcome(success=0, reason=reason or "subtask-budget", sigma=sigma, **base)
    if goal.track == "EQA":
        predicted = INFEASIBLE if decision.action == "infeasible" else decision.value
        sigma = int(judge(predicted, goal.answer))
        return SubtaskOutcome(success=int(sigma >= 4), reason=decision.action, sigma=sigma, predicted=predicted, **base)
    if not goal.feasible:
        ok = decision.action == "infeasible"
        return SubtaskOutcome(success=int(ok), reason=decision.action, predicted=decision.value or decision.action, **base)
    ok = False
    if decision.action == "stop":
        dist = geodesic_field(world, pose.cell)
        seen = raycast_fov(world, pose, sensor).objects
        ok = any(
            t in seen and dist.get(world.objects[t].cell, success_radius + 1) <= success_radius
            for t in goal.targets
        )
    return SubtaskOutcome(success=int(ok), reason=decision.action, predicted=decision.value, **base)


def _optimal_length(world: World, goal: Goal, cell) -> int | None:
    if goal.track != "EMN" or not goal.feasible:
        return None
    dist = geodesic_field(world, cell)
    ds = [dist[world.objects[t].cell] for t in goal.targets if world.objects[t].cell in dist]
    return min(ds) if ds else None


def run_episode(
    world: World,
    episode: Episode,
    oracle,
    settings: EpisodeSettings = None,
    trace: list | None = None,
    artifacts: dict | None = None,
) -> EpisodeReport:
    """Run all subtasks in order under both step budgets.

    ``artifacts``, when given, receives the final memory dump and scene graph text.
    """
    settings = settings or EpisodeSettings()
    cfg = settings.agent
    sensor = cfg.sensor
    s_limit, e_limit = episode.subtask_limit, episode.episode_limit
    pose = world.start
    memory = new_memory(world, settings)
    agent = Agent(memory, SceneGraph(), oracle, cfg, scene=world.name, n_headings=world.n_headings)
    emit = trace.append if trace is not None else (lambda rec: None)
    t = 0

    def observe():
        vis = raycast_fov(world, pose, sensor)
        return agent.observe(pose, vis, sightings_for(world, vis, t), t)

    observe()
    emit({
        "type": "header",
        "version": TRACE_VERSION,
        "scenario": world.source,
        "scenario_name": world.name,
        "episode": episode.to_dict(),
        "settings": settings.to_record(),
        "state": state_hash(pose, agent.memory),
    })

    outcomes: list[SubtaskOutcome] = []
    for i, goal in enumerate(episode.goals):
        if t >= e_limit:
            break
        reset = i > 0 and not settings.persistent_memory
        if reset:
            agent.reset(new_memory(world, settings), SceneGraph())
            observe()
        agent.begin(goal)
        emit({"type": "subtask", "index": i, "goal": goal.id, "reset": reset, "t": t, "state": state_hash(pose, agent.memory)})
        k, moves, start_cell = 0, 0, pose.cell
        optimal = _optimal_length(world, goal, start_cell)
        decision, reason = None, None
        while True:
            if t >= e_limit:
                reason = "episode-budget"
                break
            if k >= s_limit:
                reason = "subtask-budget"
                break
            decision = agent.decide(pose)
            k += 1
            t += 1
            rec = {"type": "step", "t": t, "subtask": i, "k": k, "action": decision.action}
            if decision.terminal:
                rec.update(value=decision.value, pose=[*pose.cell, pose.heading], state=state_hash(pose, agent.memory))
                rec.update(decision.record)
                emit(rec)
                break
            new_pose, _ = apply_action(world, pose, decision.action)
            moves += new_pose.cell != pose.cell
            pose = new_pose
            summary = observe()
            rec.update(
                pose=[*pose.cell, pose.heading],
                newly_covered=summary.newly_covered_count,
                keyframe=summary.keyframe_saved,
                state=state_hash(pose, agent.memory),
            )
            rec.update(decision.record)
            emit(rec)
            decision = None
        outcome = judge_subtask(
            goal, decision, pose, k, s_limit, world, sensor, cfg.success_radius, reason,
            judge=oracle.judge_answer, optimal=optimal, path_length=moves,
        )
        outcomes.append(outcome)
        emit({"type": "outcome", "index": i, **asdict(outcome)})
        if reason == "episode-budget":
            break

    for goal in episode.goals[len(outcomes):]:
        outcome = judge_subtask(goal, None, pose, 0, s_limit, world, reason="episode-budget")
        outcomes.append(outcome)
        emit({"type": "outcome", "index": len(outcomes) - 1, **asdict(outcome)})

    report = EpisodeReport(
        scenario=world.name,
        episode=episode.id,
        track=episode.track,
        outcomes=outcomes,
        steps=t,
        episode_limit=e_limit,
        memory_ratio=agent.memory.bank.cost_ratio(),
        extra={"keyframes": len(agent.memory.bank.keyframes), "frames": agent.memory.bank.frames_seen, **agent.oracle_calls},
    )
    emit({"type": "episode", "report": report.to_dict()})
    if artifacts is not None:
        artifacts["memory"] = agent.memory.dump()
        artifacts["graph"] = agent.graph.serialize_global()
    return report


# -- trace files -------------------------------------------------------------


def dumps_record(rec: dict) -> str:
    return json.dumps(rec, sort_keys=True, separators=(",", ":"))


def write_trace(records: list, path: str | Path) -> None:
    Path(path).write_text("".join(dumps_record(r) + "\n" for r in records))


def read_trace(path: str | Path) -> list[dict]:
    records = []
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as e:
            raise ValueError(f"corrupt trace: line {n}: {e}") from e
    if not records or records[0].get("type") != "header":
        raise ValueError("corrupt trace: missing header")
    if records[0].get("version") != TRACE_VERSION:
        raise ValueError(f"unsupported trace version {records[0].get('version')}")
    return records


def report_from_trace(records: list[dict]) -> EpisodeReport:
    """Rebuild the episode report from outcome records alone."""
    header = records[0]
    ep = Episode.from_dict(header["episode"])
    outcomes = [SubtaskOutcome(**{k: v for k, v in r.items() if k not in ("type", "index")}) for r in records if r["type"] == "outcome"]
    steps = max([r["t"] for r in records if r["type"] == "step"], default=0)
    final = next(r for r in records if r["type"] == "episode")["report"]
    return EpisodeReport(
        scenario=header["scenario_name"],
        episode=ep.id,
        track=ep.track,
        outcomes=outcomes,
        steps=steps,
        episode_limit=ep.episode_limit,
        memory_ratio=final["memory_ratio"],
        extra=final.get("extra", {}),
    )


@dataclass
class ReplayResult:
    ok: bool
    steps: int
    divergence: int | None = None
    message: str = "verified"


def replay(records: list[dict], on_state=None, until: int | None = None) -> ReplayResult:
    """Re-execute recorded actions and check every recorded state hash.

    ``on_state(t, pose, memory)`` is called after each reproduced state;
    replay stops after global step ``until`` when it is given.
    """
    header = records[0]
    world = parse_scenario(header["scenario"])
    settings = EpisodeSettings.from_record(header["settings"])
    sensor = settings.agent.sensor
    pose = world.start
    memory = new_memory(world, settings)
    t = 0

    def observe():
        memory.integrate(pose, raycast_fov(world, pose, sensor), step=t)

    observe()
    if state_hash(pose, memory) != header["state"]:
        return ReplayResult(False, 0, 0, "divergence at step 0")
    if on_state:
        on_state(0, pose, memory)
    for rec in records[1:]:
        kind = rec["type"]
        if kind == "subtask":
            if until is not None and rec["index"] > 0 and rec["t"] >= until:
                break
            if rec["reset"]:
                memory = new_memory(world, settings)
                observe()
            if state_hash(pose, memory) != rec["state"]:
                return ReplayResult(False, t, t, f"divergence at subtask {rec['index']} start")
        elif kind == "step":
            if until is not None and rec["t"] > until:
                break
            t = rec["t"]
            action = rec["action"]
            if action not in ("answer", "infeasible", "stop"):
                try:
                    pose, _ = apply_action(world, pose, action)
                except ValueError:
                    return ReplayResult(False, t, t, f"divergence at step {t}: bad action {action!r}")
                observe()
            if state_hash(pose, memory) != rec["state"] or list(rec["pose"]) != [*pose.cell, pose.heading]:
                return ReplayResult(False, t, t, f"divergence at step {t}")
            if on_state:
                on_state(t, pose, memory)
    return ReplayResult(True, t)

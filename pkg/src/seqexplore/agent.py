"""The per-step agent: observe, consult the oracle at cadence, gate, explore."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .explore import (
    ExplorationExhausted,
    Frontier,
    ScoringWeights,
    annotate_frontiers,
    approach_cell,
    belief_distances,
    detect_frontiers,
    match_frontier,
    route_actions,
    score_frontier,
    select_frontier,
)
from .geometry import NEIGHBORS4, bfs_distances, turns_between
from .memory import OCCUPIED, UNKNOWN, SpatialMemory, UpdateSummary
from .reasoner import Proposal, ReasoningContext, geometric_examination
from .scenegraph import SceneGraph, Sighting, object_node_id
from .tasks import HOUSE, Goal, synonym
from .world import Pose, SensorModel, VisibleSet

CADENCES = ("events", "every_step")
TERMINALS = ("answer", "infeasible", "stop")


@dataclass
class AgentConfig:
    theta: float = 0.8
    weights: ScoringWeights = field(default_factory=ScoringWeights)
    sensor: SensorModel = field(default_factory=SensorModel)
    success_radius: int = 4
    cadence: str = "events"
    refresh_fraction: float = 0.25

    def __post_init__(self):
        if not 0.0 < self.theta <= 1.0:
            raise ValueError("theta must lie in (0, 1]")
        if self.cadence not in CADENCES:
            raise ValueError(f"cadence must be one of {CADENCES}")
        if self.success_radius < 0:
            raise ValueError("success_radius must be >= 0")


@dataclass
class Decision:
    action: str
    value: str | None = None
    record: dict = field(default_factory=dict)

    @property
    def terminal(self) -> bool:
        return self.action in TERMINALS


def _dir_heading(dx: int, dy: int, n_headings: int) -> int:
    return {(1, 0): 0, (0, -1): 1, (-1, 0): 2, (0, 1): 3}[(dx, dy)] * (n_headings // 4)


def _opens_inward(belief, f: Frontier) -> bool:
    """Whether some member borders an unknown cell off the map's outer ring."""
    h, w = belief.shape
    for x, y in f.members:
        for dx, dy in NEIGHBORS4:
            nx, ny = x + dx, y + dy
            if 0 < nx < w - 1 and 0 < ny < h - 1 and belief[ny, nx] == UNKNOWN:
                return True
    return False


class Agent:
    def __init__(self, memory: SpatialMemory, graph: SceneGraph, oracle, config: AgentConfig, scene: str = "", n_headings: int = 8):
        self.oracle = oracle
        self.config = config
        self.scene = scene
        self.n_headings = n_headings
        self.weights = config.weights.resolve(memory.width, memory.height, config.sensor, n_headings)
        self.oracle_calls = {"propose": 0, "relevance": 0}
        self._rcache: dict = {}
        self.goal: Goal | None = None
        self.reset(memory, graph)

    def reset(self, memory: SpatialMemory, graph: SceneGraph):
        self.memory = memory
        self.graph = graph
        self.last_visible = VisibleSet(frozenset())
        self.target: Frontier | None = None
        self.nav_object: tuple | None = None
        self.events: set = set()

    def begin(self, goal: Goal):
        self.goal = goal
        self.analysis = self.oracle.analyze_goal(goal)
        self.target = None
        self.nav_object = None
        self.events = {"start"}

    # -- sensing ------------------------------------------------------------

    def observe(self, pose: Pose, visible: VisibleSet, sightings: list[Sighting], step: int) -> UpdateSummary:
        before = dict(self.memory.room_table)
        summary = self.memory.integrate(pose, visible, step=step)
        self.graph.sync_rooms(self.memory)
        cats = self.analysis.categories if self.goal is not None else ()
        for s in sightings:
            is_new = object_node_id(s.object_id) not in self.graph.nodes
            self.graph.upsert_object(s, self.memory)
            if is_new and any(synonym(s.category) == c for c in cats):
                self.events.add("sighting")
        theta = self.config.theta
        for rid in summary.rooms_touched:
            if before.get(rid, 0.0) < theta <= self.memory.room_table[rid]:
                self.events.add("threshold")
        self.last_visible = visible
        return summary

    # -- decision -----------------------------------------------------------

    def _frontiers(self) -> list[Frontier]:
        belief = self.memory.belief
        fs = detect_frontiers(belief, self.weights.min_cluster_size)
        if not fs:
            # a doorway seen edge-on leaves only undersized clusters behind
            fs = [f for f in detect_frontiers(belief, 1) if _opens_inward(belief, f)]
        annotate_frontiers(fs, self.memory, self.weights, self.n_headings)
        self.graph.set_frontiers(fs)
        return fs

    def _frontier_context(self, f: Frontier) -> dict:
        label = self.memory.room_labels.get(f.room_id) if f.room_id in self.memory.room_table else None
        nearest = None
        best = None
        for node in self.graph.objects():
            c = node.payload["cell"]
            key = (math.hypot(c[0] - f.x[0], c[1] - f.x[1]), node.id)
            if best is None or key < best:
                best, nearest = key, node.payload["category"]
        return {"x": list(f.x), "theta": f.theta, "size": len(f.members), "room_label": label, "nearest_category": nearest}

    def _relevance(self, f: Frontier) -> float:
        entries = self._rcache.setdefault(self.goal.id, [])
        for members, r in entries:
            if len(members ^ f.members) <= self.config.refresh_fraction * len(members):
                return r
        r = float(self.oracle.frontier_relevance(self.goal, self._frontier_context(f)))
        if not 0.0 <= r <= 1.0:
            raise ValueError(f"oracle relevance {r} outside [0, 1]")
        self.oracle_calls["relevance"] += 1
        entries.append((f.members, r))
        return r

    def _context(self, pose: Pose, frontier_count: int) -> ReasoningContext:
        g = self.graph
        known = {n.payload["room_id"]: n.label for n in g.rooms()}
        wanted = [r for r in self.analysis.rooms if r != HOUSE]
        focus = sorted(rid for rid, lab in known.items() if any(synonym(lab) == synonym(w) for w in wanted))
        if not wanted or HOUSE in self.analysis.rooms:
            focus = sorted(known)
        local = {rid: g.subgraph_for([rid]).serialize_global() for rid in focus}
        focus_objects = {n.payload["object_id"] for rid in focus for n in g.subgraph_for([rid]).objects()}
        keyframes = [
            {"id": kf.id, "step": kf.step_index, "pose": [*kf.pose.cell, kf.pose.heading], "objects": sorted(kf.objects)}
            for kf in self.memory.bank.keyframes
            if kf.objects & focus_objects
        ]
        return ReasoningContext(g, g.serialize_global(), local, keyframes, frontier_count, self.scene, pose.cell)

    def _consult(self, pose: Pose, frontier_count: int, events) -> tuple[Proposal, object, dict]:
        proposal = self.oracle.propose(self.goal, self._context(pose, frontier_count))
        self.oracle_calls["propose"] += 1
        table = dict(self.memory.room_table)
        verdict = geometric_examination(proposal, table, frontier_count > 0, self.config.theta)
        record = {
            "events": sorted(events),
            "proposal": proposal.kind,
            "value": proposal.value if proposal.kind == "answer" else proposal.target,
            "relevant": {r: table.get(r, 0.0) for r in proposal.relevant_rooms},
            "rooms": {r: table[r] for r in sorted(table)},
            "frontiers": frontier_count,
            "theta": self.config.theta,
            "verdict": verdict.kind,
        }
        return proposal, verdict, record

    def decide(self, pose: Pose) -> Decision:
        frontiers = self._frontiers()
        record: dict = {"frontiers": [f.record() for f in frontiers]}
        dist_from_agent = belief_distances(self.memory.belief, pose.cell)

        matched = match_frontier(self.target, frontiers)
        if self.target is not None and matched is None:
            self.events.add("arrival")
            self.target = None
        if not frontiers:
            self.events.add("exhausted")

        if self.nav_object is None and (self.config.cadence == "every_step" or self.events):
            proposal, verdict, qrec = self._consult(pose, len(frontiers), self.events)
            record["query"] = qrec
            self.events = set()
            if verdict.kind == "infeasible":
                return Decision("infeasible", None, record)
            if verdict.kind == "accept":
                if self.goal.track == "EQA":
                    return Decision("answer", verdict.value, record)
                node = self.graph.nodes[object_node_id(proposal.target)]
                self.nav_object = (proposal.target, tuple(node.payload["cell"]))

        if self.nav_object is not None:
            oid, cell = self.nav_object
            record["nav_object"] = oid
            d = dist_from_agent.get(cell)
            if d is not None and d <= self.config.success_radius and oid in self.last_visible.objects:
                return Decision("stop", oid, record)
            if d is not None:
                field_ = bfs_distances((self.memory.belief == 1).tolist(), cell)
                actions, _ = route_actions(field_, pose, self.n_headings)
                record["path_len"] = len(actions)
                return Decision(actions[0], None, record)

        action = self._explore(pose, frontiers, matched, dist_from_agent, record)
        return Decision(action, None, record)

    def _explore(self, pose, frontiers, matched, dist, record) -> str:
        reachable = []
        for f in frontiers:
            f.approach = approach_cell(f, dist)
            if f.approach is not None:
                reachable.append(f)
        for f in reachable:
            score_frontier(f, pose.cell, self._relevance(f), self.weights, dist)
        record["frontiers"] = [f.record() for f in frontiers]
        if not reachable and frontiers:
            return self._push_through_unknown(pose, frontiers, record)
        current = matched.id if any(f is matched for f in reachable) else None
        try:
            chosen = select_frontier(reachable, current, self.weights.delta)
        except ExplorationExhausted:
            self.target = None
            record["target"] = None
            return "turn-left"
        if self.target is not None and chosen is not matched:
            record["switched"] = True
        self.target = chosen
        record["target"] = chosen.id
        if pose.cell == chosen.approach:
            self.events.add("arrival")
            return self._face_unknown(pose)
        field_ = bfs_distances((self.memory.belief == 1).tolist(), chosen.approach)
        actions, _ = route_actions(field_, pose, self.n_headings)
        record["path_len"] = len(actions)
        return actions[0]

    def _push_through_unknown(self, pose, frontiers, record) -> str:
        # every frontier sits behind unseen cells: plan as if they were open
        open_rows = (self.memory.belief != OCCUPIED).tolist()
        field_ = bfs_distances(open_rows, pose.cell)
        options = [(field_[f.x], f.id, f) for f in frontiers if f.x in field_ and f.x != pose.cell]
        if not options:
            return self._face_unknown(pose)
        _, _, f = min(options)
        self.target = f
        record["target"] = f.id
        record["optimistic"] = True
        actions, _ = route_actions(bfs_distances(open_rows, f.x), pose, self.n_headings)
        return actions[0]

    def _face_unknown(self, pose: Pose) -> str:
        x, y = pose.cell
        h, w = self.memory.belief.shape
        options = []
        for dx, dy in NEIGHBORS4:
            nx, ny = x + dx, y + dy
            if 0 <= nx < w and 0 <= ny < h and self.memory.belief[ny, nx] == UNKNOWN:
                t = turns_between(pose.heading, _dir_heading(dx, dy, self.n_headings), self.n_headings)
                options.append((abs(t), -t))
        if not options:
            return "turn-left"
        _, neg_t = min(options)
        return "turn-left" if -neg_t >= 0 else "turn-right"

"""Semantic oracles, the geometric examination gate and the answer rubric."""
from __future__ import annotations

import json
import math
import subprocess
import sys
import threading
from dataclasses import asdict, dataclass, field
from typing import IO, Protocol

from .scenegraph import SceneGraph, object_node_id, room_node_id
from .tasks import (
    ABSENT_CATEGORIES,
    ABSENT_ROOM_LABELS,
    CATEGORIES,
    COLORS,
    HOUSE,
    INFEASIBLE,
    ROOM_LABELS,
    STATES,
    Goal,
    GoalAnalysis,
    _split_qualifier,
    canonical_text,
    parse_question,
    synonym,
)

PROPOSAL_KINDS = ("answer", "no-answer", "goal-reached")
UNANSWERABLE_WORDS = (INFEASIBLE, "unanswerable")


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class Proposal:
    kind: str
    value: str | None = None
    relevant_rooms: tuple = ()
    evidence: tuple = ()
    target: str | None = None  # object id for goal-reached

    def __post_init__(self):
        if self.kind not in PROPOSAL_KINDS:
            raise ValueError(f"proposal kind must be one of {PROPOSAL_KINDS}")
        if self.kind != "no-answer" and not self.evidence:
            raise ValueError("answer and goal-reached proposals must cite evidence")
        if self.kind == "goal-reached" and self.target is None:
            raise ValueError("goal-reached proposal needs a target object")


@dataclass(frozen=True)
class Verdict:
    kind: str  # accept | reject | infeasible
    value: str | None = None
    reason: str = ""


@dataclass
class ReasoningContext:
    graph: SceneGraph
    global_summary: str
    local: dict = field(default_factory=dict)  # room id -> local summary text
    keyframes: list = field(default_factory=list)
    frontier_count: int = 0
    scene: str = ""
    agent_cell: tuple = (0, 0)

    def to_record(self) -> dict:
        return {
            "global_summary": self.global_summary,
            "graph": self.graph.to_dict(),
            "local": dict(sorted(self.local.items())),
            "keyframes": self.keyframes,
            "frontier_count": self.frontier_count,
            "scene": self.scene,
            "agent_cell": list(self.agent_cell),
        }

    @classmethod
    def from_record(cls, d: dict) -> "ReasoningContext":
        return cls(
            graph=SceneGraph.from_dict(d["graph"]),
            global_summary=d["global_summary"],
            local=d.get("local", {}),
            keyframes=d.get("keyframes", []),
            frontier_count=d.get("frontier_count", 0),
            scene=d.get("scene", ""),
            agent_cell=tuple(d.get("agent_cell", (0, 0))),
        )


class SemanticOracle(Protocol):
    def analyze_goal(self, goal: Goal) -> GoalAnalysis: ...

    def propose(self, goal: Goal, context: ReasoningContext) -> Proposal: ...

    def frontier_relevance(self, goal: Goal, frontier_context: dict) -> float: ...

    def judge_answer(self, predicted: str | None, truth: str) -> int: ...


def geometric_examination(
    proposal: Proposal,
    coverage: dict,
    frontiers_available: bool,
    theta: float = 0.8,
    known_rooms=None,
) -> Verdict:
    """Gate an oracle proposal on room coverage and frontier availability."""
    if not 0.0 < theta <= 1.0:
        raise ValueError("theta must lie in (0, 1]")
    known = set(coverage) if known_rooms is None else set(known_rooms)
    if proposal.kind in ("answer", "goal-reached"):
        covs = [coverage.get(r, 0.0) if r in known else 0.0 for r in proposal.relevant_rooms]
        worst = min(covs, default=1.0)
        if worst >= theta:
            value = proposal.value if proposal.kind == "answer" else proposal.target
            return Verdict("accept", value, f"min relevant cov {worst:.3f}")
        return Verdict("reject", None, f"relevant room cov {worst:.3f} below {theta}")
    if frontiers_available:
        return Verdict("reject", None, "frontiers remain")
    low = [r for r in sorted(known) if coverage.get(r, 0.0) < theta]
    if low:
        return Verdict("reject", None, f"rooms below threshold: {','.join(low)}")
    return Verdict("infeasible", None, "explored everything")


# -- answer rubric -----------------------------------------------------------


def _answer_type(ans: str) -> str:
    s = synonym(ans)
    if s.isdigit():
        return "number"
    for name, vocab in (
        ("color", COLORS),
        ("state", STATES),
        ("room", ROOM_LABELS + ABSENT_ROOM_LABELS),
        ("category", CATEGORIES + ABSENT_CATEGORIES),
    ):
        if s in vocab:
            return name
    quals, rest = _split_qualifier(s)
    if quals and synonym(rest) in CATEGORIES + ABSENT_CATEGORIES:
        return "category"
    return "other"


def _head(ans: str) -> tuple[tuple, str]:
    quals, rest = _split_qualifier(canonical_text(ans))
    return tuple(sorted(quals)), synonym(rest)


def sigma_rubric(predicted: str | None, truth: str) -> int:
    """Deterministic 1-5 score of an answer against the ground truth."""
    p, t = canonical_text(predicted), canonical_text(truth)
    if t in UNANSWERABLE_WORDS:
        return 5 if p in UNANSWERABLE_WORDS else 1
    if not p or p in UNANSWERABLE_WORDS:
        return 1
    if p == t:
        return 5
    if synonym(p) == synonym(t):
        return 4
    (pq, ph), (tq, th) = _head(p), _head(t)
    if ph == th and pq != tq:
        return 3
    tp = _answer_type(p)
    if tp != "other" and tp == _answer_type(t):
        return 2
    return 1


# -- rule oracle -------------------------------------------------------------


def _same(a: str, b: str) -> bool:
    return synonym(a) == synonym(b)


class RuleOracle:
    """Keyword-matching oracle answering from the sensed scene graph."""

    def __init__(self, base_relevance: float = 0.3, match_relevance: float = 1.0):
        if not (0.0 <= base_relevance <= 1.0 and 0.0 <= match_relevance <= 1.0):
            raise ValueError("relevances must lie in [0, 1]")
        self.base_relevance = base_relevance
        self.match_relevance = match_relevance
        self._analysis: dict = {}
        self._lock = threading.Lock()

    def analyze_goal(self, goal: Goal) -> GoalAnalysis:
        with self._lock:
            cached = self._analysis.get((goal.id, goal.text))
        if cached is not None:
            return cached
        if goal.track == "EQA":
            a = parse_question(goal.text)
        else:
            spec = goal.spec
            a = GoalAnalysis(
                "navigate",
                (spec["room"],) if spec.get("room") else (),
                (synonym(spec["category"]),),
                tuple(sorted(spec.get("attributes", {}).items())),
            )
        with self._lock:
            self._analysis[(goal.id, goal.text)] = a
        return a

    def frontier_relevance(self, goal: Goal, frontier_context: dict) -> float:
        a = self.analyze_goal(goal)
        room = frontier_context.get("room_label")
        near = frontier_context.get("nearest_category")
        if room is not None and any(_same(room, r) for r in a.rooms if r != HOUSE):
            return self.match_relevance
        if near is not None and any(_same(near, c) for c in a.categories):
            return self.match_relevance
        return self.base_relevance

    def judge_answer(self, predicted, truth) -> int:
        return sigma_rubric(predicted, truth)

    def propose(self, goal: Goal, context: ReasoningContext) -> Proposal:
        a = self.analyze_goal(goal)
        g = context.graph
        rooms = {n.payload["room_id"]: n.label for n in g.rooms()}
        objs = [n.payload for n in g.objects()]

        def labelled(label):
            return sorted(r for r, lab in rooms.items() if _same(lab, label))

        def matches(o, cats, quals=()):
            return any(_same(o["category"], c) for c in cats) and all(
                o["attributes"].get(k) == v for k, v in quals
            )

        def answer(value, room_ids, evidence):
            return Proposal("answer", str(value), tuple(sorted(set(room_ids))), tuple(evidence))

        none = Proposal("no-answer")
        if a.kind == "navigate":
            spec = goal.spec
            if spec.get("scene") and spec["scene"] != context.scene:
                return none
            allowed = labelled(spec["room"]) if spec.get("room") else None
            cands = [
                o for o in objs
                if matches(o, a.categories, a.attributes) and (allowed is None or o["room_id"] in allowed)
            ]
            if not cands:
                return none
            ax, ay = context.agent_cell
            o = min(cands, key=lambda o: (math.hypot(o["cell"][0] - ax, o["cell"][1] - ay), o["object_id"]))
            rr = (o["room_id"],) if o["room_id"] is not None else ()
            return Proposal("goal-reached", o["object_id"], rr, (object_node_id(o["object_id"]),), o["object_id"])

        if a.kind == "location":
            cands = sorted((o for o in objs if matches(o, a.categories, a.attributes)), key=lambda o: o["object_id"])
            if not cands:
                return none
            o = cands[0]
            label = rooms.get(o["room_id"], "hallway")
            rr = [o["room_id"]] if o["room_id"] is not None else []
            return answer(label, rr, [object_node_id(o["object_id"])])

        if a.kind == "count" and a.rooms[0] == HOUSE:
            if context.frontier_count > 0:
                return none
            n = sum(1 for o in objs if matches(o, a.categories))
            return answer(n, rooms, [room_node_id(r) for r in sorted(rooms)] or ["apartment"])

        in_rooms = labelled(a.rooms[0])
        if not in_rooms:
            return none
        local = sorted((o for o in objs if o["room_id"] in in_rooms), key=lambda o: o["object_id"])

        if a.kind == "count":
            hits = [o for o in local if matches(o, a.categories)]
            ev = [object_node_id(o["object_id"]) for o in hits] or [room_node_id(r) for r in in_rooms]
            return answer(len(hits), in_rooms, ev)

        if a.kind == "attribute":
            cands = [o for o in local if matches(o, a.categories, a.attributes)]
            if not cands:
                return none
            o = cands[0]
            value = o["attributes"].get(a.asked)
            if value is None:
                return none
            return answer(value, [o["room_id"]], [object_node_id(o["object_id"])])

        if a.kind == "functional":
            cands = [o for o in local if matches(o, a.categories)]
            if not cands:
                return none
            o = cands[0]
            return answer(o["category"], [o["room_id"]], [object_node_id(o["object_id"])])

        if a.kind == "spatial":
            anchors = [o for o in local if matches(o, a.categories)]
            if not anchors:
                return none
            anchor = anchors[0]
            ax, ay = anchor["cell"]
            others = [o for o in local if o["object_id"] != anchor["object_id"] and o["room_id"] == anchor["room_id"]]
            if not others:
                return none
            o = min(others, key=lambda o: ((o["cell"][0] - ax) ** 2 + (o["cell"][1] - ay) ** 2, o["object_id"]))
            ev = [object_node_id(anchor["object_id"]), object_node_id(o["object_id"])]
            return answer(o["category"], [anchor["room_id"]], ev)

        raise ValueError(f"unhandled goal kind {a.kind}")


# -- external process adapter ------------------------------------------------


def _analysis_record(a: GoalAnalysis) -> dict:
    d = asdict(a)
    d["attributes"] = [list(p) for p in a.attributes]
    return d


def _analysis_from_record(d: dict) -> GoalAnalysis:
    return GoalAnalysis(
        d["kind"],
        tuple(d.get("rooms", ())),
        tuple(d.get("categories", ())),
        tuple(tuple(p) for p in d.get("attributes", ())),
        d.get("asked"),
        d.get("verb"),
    )


def _proposal_record(p: Proposal) -> dict:
    d = asdict(p)
    d["relevant_rooms"] = list(p.relevant_rooms)
    d["evidence"] = list(p.evidence)
    return d


def handle_request(oracle, request: dict) -> dict:
    """Dispatch one wire request to an in-process oracle."""
    method = request.get("method")
    goal = Goal.from_dict(request["goal"]) if "goal" in request else None
    if method == "analyze_goal":
        return _analysis_record(oracle.analyze_goal(goal))
    if method == "propose":
        return _proposal_record(oracle.propose(goal, ReasoningContext.from_record(request["context"])))
    if method == "frontier_relevance":
        return {"relevance": oracle.frontier_relevance(goal, request["frontier"])}
    if method == "judge_answer":
        return {"sigma": oracle.judge_answer(request.get("predicted"), request["truth"])}
    raise OracleError(f"unknown method {method!r}")


def serve(oracle, instream: IO[str] = sys.stdin, outstream: IO[str] = sys.stdout) -> None:
    """Answer line-delimited JSON requests until EOF."""
    for line in instream:
        line = line.strip()
        if not line:
            continue
        try:
            reply = handle_request(oracle, json.loads(line))
        except Exception as e:  # reported back over the wire
            reply = {"error": f"{type(e).__name__}: {e}"}
        outstream.write(json.dumps(reply, sort_keys=True) + "\n")
        outstream.flush()


class ExternalOracle:
    """SemanticOracle backed by a subprocess speaking line-delimited JSON."""

    def __init__(self, command: list[str]):
        self.command = list(command)
        self._proc = subprocess.Popen(
            self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, bufsize=1
        )
        self._lock = threading.Lock()

    def _call(self, request: dict) -> dict:
        with self._lock:
            if self._proc.poll() is not None:
                raise OracleError("oracle process exited")
            self._proc.stdin.write(json.dumps(request, sort_keys=True) + "\n")
            self._proc.stdin.flush()
            line = self._proc.stdout.readline()
        if not line:
            raise OracleError("oracle process closed its output")
        reply = json.loads(line)
        if "error" in reply:
            raise OracleError(reply["error"])
        return reply

    def analyze_goal(self, goal):
        return _analysis_from_record(self._call({"method": "analyze_goal", "goal": goal.to_dict()}))

    def propose(self, goal, context):
        r = self._call({"method": "propose", "goal": goal.to_dict(), "context": context.to_record()})
        return Proposal(r["kind"], r.get("value"), tuple(r.get("relevant_rooms", ())), tuple(r.get("evidence", ())), r.get("target"))

    def frontier_relevance(self, goal, frontier_context):
        r = float(self._call({"method": "frontier_relevance", "goal": goal.to_dict(), "frontier": frontier_context})["relevance"])
        if not 0.0 <= r <= 1.0:
            raise OracleError(f"relevance {r} outside [0, 1]")
        return r

    def judge_answer(self, predicted, truth):
        s = int(self._call({"method": "judge_answer", "predicted": predicted, "truth": truth})["sigma"])
        if s not in range(1, 6):
            raise OracleError(f"sigma {s} outside 1..5")
        return s

    def close(self):
        if self._proc.poll() is None:
            self._proc.stdin.close()
            self._proc.wait(timeout=10)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def main():
    serve(RuleOracle())


if __name__ == "__main__":
    main()

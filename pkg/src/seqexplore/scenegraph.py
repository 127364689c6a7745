"""Hierarchical scene graph: apartment -> rooms -> objects, plus frontier stubs."""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Iterable

from .memory import SpatialMemory
from .world import Cell

APARTMENT = "apartment"
LEVELS = ("apartment", "room", "object", "frontier")


def room_node_id(room_id: str) -> str:
    return f"room:{room_id}"


def object_node_id(object_id: str) -> str:
    return f"object:{object_id}"


@dataclass
class GraphNode:
    id: str
    level: str
    label: str
    payload: dict = field(default_factory=dict)


@dataclass(frozen=True, order=True)
class GraphEdge:
    parent: str
    child: str
    relation: str  # "contains" | "adjacent-to"


@dataclass(frozen=True)
class Sighting:
    object_id: str
    category: str
    attributes: dict
    cell: Cell
    room_id: str | None
    step: int


class SceneGraph:
    def __init__(self):
        self.nodes: dict[str, GraphNode] = {APARTMENT: GraphNode(APARTMENT, "apartment", "apartment")}
        self.parent: dict[str, str] = {}
        self.adjacency: set[tuple[str, str]] = set()

    # -- mutation -----------------------------------------------------------

    def _attach(self, node: GraphNode, parent: str):
        self.nodes[node.id] = node
        self.parent[node.id] = parent

    def _ensure_room(self, room_id: str, memory: SpatialMemory) -> str:
        nid = room_node_id(room_id)
        if nid not in self.nodes:
            self._attach(GraphNode(nid, "room", memory.room_labels[room_id], {"room_id": room_id}), APARTMENT)
        covered, total = memory.room_counts(room_id)
        self.nodes[nid].payload.update(cov=memory.room_coverage(room_id), covered=covered, cells=total)
        return nid

    def upsert_object(self, sighting: Sighting, memory: SpatialMemory | None = None) -> str:
        nid = object_node_id(sighting.object_id)
        rid = sighting.room_id
        parent = APARTMENT
        if rid is not None:
            if room_node_id(rid) in self.nodes:
                parent = room_node_id(rid)
            elif memory is not None and rid in memory.room_table:
                parent = self._ensure_room(rid, memory)
        node = self.nodes.get(nid)
        if node is None:
            node = GraphNode(nid, "object", sighting.category, {"first_seen_step": sighting.step})
        node.label = sighting.category
        node.payload.update(
            object_id=sighting.object_id,
            category=sighting.category,
            attributes=dict(sighting.attributes),
            cell=tuple(sighting.cell),
            room_id=rid,
            last_seen_step=sighting.step,
        )
        self._attach(node, parent)
        return nid

    def sync_rooms(self, memory: SpatialMemory) -> list[str]:
        """Mirror the memory's room coverage table into room nodes."""
        ids = [self._ensure_room(rid, memory) for rid in memory.known_rooms()]
        for nid, node in self.nodes.items():
            if node.level == "object" and self.parent[nid] == APARTMENT:
                rid = node.payload.get("room_id")
                if rid is not None and room_node_id(rid) in self.nodes:
                    self.parent[nid] = room_node_id(rid)
        self.adjacency = _covered_adjacency(memory)
        return ids

    def set_frontiers(self, frontiers: Iterable) -> None:
        """Replace all frontier nodes with the latest detection."""
        for nid in [n for n, node in self.nodes.items() if node.level == "frontier"]:
            del self.nodes[nid]
            del self.parent[nid]
        for f in frontiers:
            payload = {
                "x": tuple(f.x),
                "theta": f.theta,
                "size": len(f.members),
                "room_id": f.room_id,
                "cov": f.cov,
                "tau_novel": f.tau_novel,
            }
            self._attach(GraphNode(f"frontier:{f.id}", "frontier", f"frontier {f.id}", payload), APARTMENT)

    # -- queries ------------------------------------------------------------

    def children(self, nid: str) -> list[str]:
        return sorted(c for c, p in self.parent.items() if p == nid)

    def of_level(self, level: str) -> list[GraphNode]:
        return [self.nodes[n] for n in sorted(self.nodes) if self.nodes[n].level == level]

    def objects(self) -> list[GraphNode]:
        return self.of_level("object")

    def rooms(self) -> list[GraphNode]:
        return self.of_level("room")

    def frontiers(self) -> list[GraphNode]:
        return self.of_level("frontier")

    def edges(self) -> list[GraphEdge]:
        out = [GraphEdge(p, c, "contains") for c, p in self.parent.items()]
        out += [GraphEdge(room_node_id(a), room_node_id(b), "adjacent-to") for a, b in self.adjacency]
        return sorted(out)

    def subgraph_for(self, room_ids: Iterable[str]) -> "SceneGraph":
        """Restriction to the given rooms, their objects and frontiers inside them."""
        room_ids = set(room_ids)
        for rid in room_ids:
            if room_node_id(rid) not in self.nodes:
                raise KeyError(f"unknown room {rid!r}")
        keep = {APARTMENT} | {room_node_id(r) for r in room_ids}
        for nid, node in self.nodes.items():
            if node.level == "object" and self.parent[nid] in keep:
                keep.add(nid)
            elif node.level == "frontier" and node.payload.get("room_id") in room_ids:
                keep.add(nid)
        sub = SceneGraph()
        sub.nodes = {n: copy.deepcopy(self.nodes[n]) for n in keep}
        sub.parent = {n: p for n, p in self.parent.items() if n in keep}
        sub.adjacency = {(a, b) for a, b in self.adjacency if a in room_ids and b in room_ids}
        return sub

    def check_invariants(self) -> None:
        apartments = [n for n in self.nodes.values() if n.level == "apartment"]
        assert len(apartments) == 1 and apartments[0].id == APARTMENT
        assert APARTMENT not in self.parent
        for nid, node in self.nodes.items():
            if nid == APARTMENT:
                continue
            assert node.level in LEVELS
            p = self.parent[nid]
            if node.level in ("room", "frontier"):
                assert p == APARTMENT, nid
            else:
                assert self.nodes[p].level in ("room", "apartment"), nid
            # walk to the root; a cycle would exceed the node count
            seen = 0
            while p != APARTMENT:
                p = self.parent[p]
                seen += 1
                assert seen <= len(self.nodes), "cycle in contains edges"
        for a, b in self.adjacency:
            assert room_node_id(a) in self.nodes and room_node_id(b) in self.nodes

    # -- export -------------------------------------------------------------

    def serialize_global(self) -> str:
        rooms, objects, frontiers = self.rooms(), self.objects(), self.frontiers()
        lines = [f"apartment: rooms={len(rooms)} objects={len(objects)} frontiers={len(frontiers)}"]
        for room in rooms:
            p = room.payload
            lines.append(f"room {p['room_id']} ({room.label}) cov={p['cov']:.2f} cells={p['cells']}")
            lines += [_object_line(self.nodes[c]) for c in self.children(room.id) if self.nodes[c].level == "object"]
        loose = [c for c in self.children(APARTMENT) if self.nodes[c].level == "object"]
        if loose:
            lines.append("unassigned")
            lines += [_object_line(self.nodes[c]) for c in loose]
        for f in sorted(frontiers, key=lambda n: _frontier_key(n.id)):
            p = f.payload
            lines.append(
                f"{f.id} at ({p['x'][0]},{p['x'][1]}) theta={p['theta']:.0f} size={p['size']} "
                f"room={p['room_id'] or '-'} cov={p['cov']:.2f}"
            )
        for a, b in sorted(self.adjacency):
            lines.append(f"adjacent {a} {b}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        def clean(v):
            if isinstance(v, tuple):
                return list(v)
            if isinstance(v, dict):
                return {k: clean(x) for k, x in sorted(v.items())}
            return v

        return {
            "nodes": [
                {"id": n.id, "level": n.level, "label": n.label, "payload": clean(n.payload)}
                for n in (self.nodes[k] for k in sorted(self.nodes))
            ],
            "edges": [{"parent": e.parent, "child": e.child, "relation": e.relation} for e in self.edges()],
        }


    @classmethod
    def from_dict(cls, d: dict) -> "SceneGraph":
        g = cls()
        for nd in d["nodes"]:
            payload = dict(nd["payload"])
            for key in ("cell", "x"):
                if key in payload:
                    payload[key] = tuple(payload[key])
            g.nodes[nd["id"]] = GraphNode(nd["id"], nd["level"], nd["label"], payload)
        for e in d["edges"]:
            if e["relation"] == "contains":
                g.parent[e["child"]] = e["parent"]
            else:
                g.adjacency.add((e["parent"].split(":", 1)[1], e["child"].split(":", 1)[1]))
        return g


def _frontier_key(nid: str):
    tail = nid.split(":", 1)[1]
    return (0, int(tail)) if tail.isdigit() else (1, tail)


def _object_line(node: GraphNode) -> str:
    p = node.payload
    attrs = " ".join(f"{k}={v}" for k, v in sorted(p["attributes"].items()))
    x, y = p["cell"]
    return f"  object {p['object_id']} {p['category']}{' ' + attrs if attrs else ''} @({x},{y}) seen={p['last_seen_step']}"


def _covered_adjacency(memory: SpatialMemory) -> set[tuple[str, str]]:
    pairs = set()
    covered = memory.covered_cells
    for x, y in covered:
        a = memory.room_of((x, y))
        if a is None:
            continue
        for n in ((x + 1, y), (x, y + 1)):
            if n in covered:
                b = memory.room_of(n)
                if b is not None and b != a:
                    pairs.add((min(a, b), max(a, b)))
    return pairs

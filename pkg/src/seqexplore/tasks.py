"""Goals, episodes, the question template grammar and the bundled vocabulary."""
from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

EQA_ANSWERABLE = ("object", "location", "spatial", "functional", "local-count", "global-count")
EQA_UNANSWERABLE = ("incorrect-location", "incorrect-attribute", "object-not-present", "room-not-present")
EMN_MODALITIES = ("object", "language", "image")
TRACKS = ("EQA", "EMN")

SUBTASK_LIMITS = {"small": 50, "large": 200, "xlarge": 320}
INFEASIBLE = "infeasible"

COLORS = ("red", "blue", "green", "white", "black", "brown", "gray", "yellow")
STATES = ("open", "closed", "on", "off", "clean", "dirty", "empty", "full")
ATTRIBUTE_VALUES = {"color": COLORS, "state": STATES}

# category -> (verb phrase used by functional questions)
FUNCTIONS = {
    "sofa": "sit",
    "bed": "sleep",
    "stove": "cook",
    "sink": "wash dishes",
    "refrigerator": "keep food cold",
    "television": "watch a show",
    "bathtub": "take a bath",
    "desk": "work",
    "bookshelf": "store books",
    "washing machine": "do laundry",
    "toilet": "use the toilet",
    "dining table": "eat dinner",
}

CATEGORIES = (
    "sofa", "bed", "stove", "sink", "refrigerator", "television", "bathtub", "desk",
    "bookshelf", "washing machine", "toilet", "dining table", "chair", "lamp", "plant",
    "cabinet", "mirror", "rug", "painting", "clock", "pillow", "microwave",
)
ABSENT_CATEGORIES = ("piano", "carriage", "canoe", "harp", "anvil", "telescope")

ROOM_LABELS = ("kitchen", "bedroom", "bathroom", "living room", "dining room", "office", "laundry room", "hallway")
ABSENT_ROOM_LABELS = ("brewing room", "wine cellar", "sauna", "chapel", "greenhouse")

SYNONYMS = {
    "couch": "sofa",
    "tv": "television",
    "fridge": "refrigerator",
    "lounge": "living room",
    "sitting room": "living room",
    "study": "office",
    "tub": "bathtub",
    "bookcase": "bookshelf",
    "washer": "washing machine",
    "grey": "gray",
    "carpet": "rug",
    "picture": "painting",
    "restroom": "bathroom",
    "cupboard": "cabinet",
}

NUMBER_WORDS = {
    "zero": "0", "one": "1", "two": "2", "three": "3", "four": "4", "five": "5",
    "six": "6", "seven": "7", "eight": "8", "nine": "9", "ten": "10",
}

HOUSE = "house"


def canonical_text(text: str | None) -> str:
    if text is None:
        return ""
    t = re.sub(r"\s+", " ", str(text).strip().lower())
    t = t.rstrip(".!?").strip()
    t = re.sub(r"^(a|an|the) ", "", t)
    return " ".join(NUMBER_WORDS.get(w, w) for w in t.split(" ")) if t else ""


def synonym(term: str) -> str:
    t = canonical_text(term)
    return SYNONYMS.get(t, t)


# -- question grammar --------------------------------------------------------

_ATTR_Q = re.compile(r"^what (color|state) is the (.+) in the (.+)\?$")
_LOCATION_Q = re.compile(r"^which room is the (.+) in\?$")
_SPATIAL_Q = re.compile(r"^what is closest to the (.+) in the (.+)\?$")
_FUNCTION_Q = re.compile(r"^what can i use to (.+) in the (.+)\?$")
_COUNT_Q = re.compile(r"^how many objects of type (.+) are in the (.+)\?$")


@dataclass(frozen=True)
class GoalAnalysis:
    """Parsed goal: what to look for and where."""

    kind: str  # attribute | location | spatial | functional | count | navigate
    rooms: tuple = ()  # required room labels; ("house",) means whole scene
    categories: tuple = ()
    attributes: tuple = ()  # (name, value) pairs that must hold
    asked: str | None = None  # attribute name being asked
    verb: str | None = None


def _split_qualifier(phrase: str) -> tuple[tuple, str]:
    words = phrase.split(" ")
    quals = []
    while len(words) > 1:
        for name, values in ATTRIBUTE_VALUES.items():
            if words[0] in values:
                quals.append((name, words[0]))
                words = words[1:]
                break
        else:
            break
    return tuple(quals), " ".join(words)


def parse_question(text: str) -> GoalAnalysis:
    q = re.sub(r"\s+", " ", text.strip().lower())
    if m := _ATTR_Q.match(q):
        quals, cat = _split_qualifier(m.group(2))
        return GoalAnalysis("attribute", (m.group(3),), (synonym(cat),), quals, asked=m.group(1))
    if m := _LOCATION_Q.match(q):
        quals, cat = _split_qualifier(m.group(1))
        return GoalAnalysis("location", (), (synonym(cat),), quals)
    if m := _SPATIAL_Q.match(q):
        return GoalAnalysis("spatial", (m.group(2),), (synonym(m.group(1)),))
    if m := _FUNCTION_Q.match(q):
        verb = m.group(1)
        cats = tuple(sorted(c for c, v in FUNCTIONS.items() if v == verb))
        return GoalAnalysis("functional", (m.group(2),), cats, verb=verb)
    if m := _COUNT_Q.match(q):
        return GoalAnalysis("count", (m.group(2),), (synonym(m.group(1)),))
    raise ValueError(f"question does not match the template grammar: {text!r}")


def attribute_question(asked: str, category: str, room: str, qualifier: str | None = None) -> str:
    phrase = f"{qualifier} {category}" if qualifier else category
    return f"What {asked} is the {phrase} in the {room}?"


def location_question(category: str) -> str:
    return f"Which room is the {category} in?"


def spatial_question(category: str, room: str) -> str:
    return f"What is closest to the {category} in the {room}?"


def functional_question(verb: str, room: str) -> str:
    return f"What can I use to {verb} in the {room}?"


def count_question(category: str, room: str) -> str:
    return f"How many objects of type {category} are in the {room}?"


# -- goals and episodes ------------------------------------------------------


@dataclass(frozen=True)
class Goal:
    id: str
    track: str
    category: str  # EQA question class or EMN modality
    text: str
    feasible: bool
    answer: str  # EQA answer, or "infeasible"
    spec: dict = field(default_factory=dict)  # EMN symbolic target
    targets: tuple = ()  # EMN target object ids

    def __post_init__(self):
        if self.track not in TRACKS:
            raise ValueError(f"track must be one of {TRACKS}")
        allowed = EQA_ANSWERABLE + EQA_UNANSWERABLE if self.track == "EQA" else EMN_MODALITIES
        if self.category not in allowed:
            raise ValueError(f"goal {self.id}: bad category {self.category!r} for {self.track}")
        if not self.feasible and self.answer != INFEASIBLE:
            raise ValueError(f"goal {self.id}: infeasible goals must have answer 'infeasible'")
        if self.feasible and self.answer == INFEASIBLE:
            raise ValueError(f"goal {self.id}: feasible goal cannot have answer 'infeasible'")
        if self.track == "EQA" and self.feasible != (self.category in EQA_ANSWERABLE):
            raise ValueError(f"goal {self.id}: feasibility disagrees with category")
        if self.track == "EMN" and self.feasible and not self.targets:
            raise ValueError(f"goal {self.id}: feasible navigation goal needs targets")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["targets"] = list(self.targets)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Goal":
        keys = {"id", "track", "category", "text", "feasible", "answer", "spec", "targets"}
        unknown = set(d) - keys
        if unknown:
            raise ValueError(f"goal: unknown keys {sorted(unknown)}")
        return cls(
            id=str(d["id"]),
            track=d["track"],
            category=d["category"],
            text=d.get("text", ""),
            feasible=bool(d["feasible"]),
            answer=str(d["answer"]),
            spec=dict(d.get("spec", {})),
            targets=tuple(d.get("targets", ())),
        )


@dataclass(frozen=True)
class Episode:
    id: str
    scenario: str  # path relative to the episode file, or scenario name
    track: str
    size_class: str
    goals: tuple

    def __post_init__(self):
        if self.size_class not in SUBTASK_LIMITS:
            raise ValueError(f"unknown size class {self.size_class!r}")
        if not self.goals:
            raise ValueError("episode needs at least one goal")
        if any(g.track != self.track for g in self.goals):
            raise ValueError("all goals in an episode share its track")

    @property
    def subtask_limit(self) -> int:
        return SUBTASK_LIMITS[self.size_class]

    @property
    def episode_limit(self) -> int:
        return 2 * self.subtask_limit

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "scenario": self.scenario,
            "track": self.track,
            "size_class": self.size_class,
            "goals": [g.to_dict() for g in self.goals],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Episode":
        unknown = set(d) - {"id", "scenario", "track", "size_class", "goals"}
        if unknown:
            raise ValueError(f"episode: unknown keys {sorted(unknown)}")
        return cls(
            id=str(d["id"]),
            scenario=d["scenario"],
            track=d["track"],
            size_class=d["size_class"],
            goals=tuple(Goal.from_dict(g) for g in d["goals"]),
        )


def load_episodes(path: str | Path) -> list[Episode]:
    """Read an episode file: ``{"episodes": [...]}`` or a single episode object."""
    doc = json.loads(Path(path).read_text())
    if "episodes" in doc:
        if set(doc) != {"episodes"}:
            raise ValueError("episode file: unknown top-level keys")
        return [Episode.from_dict(e) for e in doc["episodes"]]
    return [Episode.from_dict(doc)]


def dump_episodes(episodes: list[Episode]) -> str:
    return json.dumps({"episodes": [e.to_dict() for e in episodes]}, indent=1, sort_keys=True) + "\n"

"""Subtask outcomes, episode reports and the sequential metric suite.

All public metrics return percentages.
"""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field
from typing import Sequence

SSPL_MODES = ("binary", "eqa-correctness")


@dataclass
class SubtaskOutcome:
    goal_id: str
    track: str
    category: str
    feasible: bool
    success: int
    steps: int
    limit: int
    reason: str
    sigma: int | None = None
    predicted: str | None = None
    optimal: int | None = None  # geodesic length, feasible navigation only
    path_length: int = 0

    def spl(self) -> float:
        """Per-subtask efficiency in [0, 1]."""
        if not self.success:
            return 0.0
        if self.track == "EMN" and self.feasible:
            if self.optimal is None:
                raise ValueError(f"subtask {self.goal_id}: missing geodesic optimum")
            longest = max(self.path_length, self.optimal)
            return 1.0 if longest == 0 else self.optimal / longest
        return (self.limit - self.steps) / self.limit


@dataclass
class EpisodeReport:
    scenario: str
    episode: str
    track: str
    outcomes: list[SubtaskOutcome]
    steps: int
    episode_limit: int
    memory_ratio: float
    extra: dict = field(default_factory=dict)

    def all_success(self) -> bool:
        return all(o.success for o in self.outcomes)

    def sigmas(self) -> list[int]:
        return [o.sigma if o.sigma is not None else 1 for o in self.outcomes]

    def correctness(self) -> float:
        """Clipped sigma score in [0, 1] (EQA episodes)."""
        return eqa_correctness(self.sigmas())

    def row(self) -> dict:
        mode = "eqa-correctness" if self.track == "EQA" else "binary"
        ssr = ssr_eqa([self.sigmas()]) if self.track == "EQA" else ssr_binary([self])
        return {
            "scenario": self.scenario,
            "episode": self.episode,
            "SSR": ssr,
            "SSPL": sspl([self], mode),
            "SR": success_rate(self.outcomes),
            "SPL": subtask_spl(self.outcomes),
            "steps": self.steps,
            "memory_ratio": self.memory_ratio,
        }

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EpisodeReport":
        d = dict(d)
        d["outcomes"] = [SubtaskOutcome(**o) for o in d["outcomes"]]
        return cls(**d)


def eqa_correctness(sigmas: Sequence[int]) -> float:
    if not sigmas:
        raise ValueError("empty sigma table")
    for s in sigmas:
        if s not in (1, 2, 3, 4, 5):
            raise ValueError(f"sigma {s!r} outside 1..5")
    return max(0, sum(s - 3 for s in sigmas)) / (2 * len(sigmas))


def ssr_binary(reports: Sequence[EpisodeReport]) -> float:
    if not reports:
        raise ValueError("no episodes")
    return 100.0 * sum(1 for r in reports if r.all_success()) / len(reports)


def ssr_eqa(sigma_tables: Sequence[Sequence[int]], n: int | None = None) -> float:
    """Episode-clipped sigma score; every episode must have ``n`` answers."""
    if not sigma_tables:
        raise ValueError("no episodes")
    n = len(sigma_tables[0]) if n is None else n
    if any(len(t) != n for t in sigma_tables):
        raise ValueError("all episodes must share the same number of questions")
    return 100.0 * sum(eqa_correctness(t) for t in sigma_tables) / len(sigma_tables)


def sspl(reports: Sequence[EpisodeReport], mode: str = "binary") -> float:
    if mode not in SSPL_MODES:
        raise ValueError(f"mode must be one of {SSPL_MODES}")
    if not reports:
        raise ValueError("no episodes")
    total = 0.0
    for r in reports:
        if r.steps > r.episode_limit:
            raise ValueError(f"episode {r.episode}: {r.steps} steps exceed limit {r.episode_limit}")
        credit = (1.0 if r.all_success() else 0.0) if mode == "binary" else r.correctness()
        total += credit * (r.episode_limit - r.steps) / r.episode_limit
    return 100.0 * total / len(reports)


def subtask_spl(outcomes: Sequence[SubtaskOutcome]) -> float:
    if not outcomes:
        raise ValueError("no subtasks")
    return 100.0 * sum(o.spl() for o in outcomes) / len(outcomes)


def success_rate(outcomes: Sequence[SubtaskOutcome]) -> float:
    if not outcomes:
        raise ValueError("no subtasks")
    return 100.0 * sum(o.success for o in outcomes) / len(outcomes)


CSV_COLUMNS = ("scenario", "episode", "SSR", "SSPL", "SR", "SPL", "steps", "memory_ratio")


def summary_csv(reports: Sequence[EpisodeReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in sorted(reports, key=lambda r: (r.scenario, r.episode)):
        row = r.row()
        w.writerow([row[c] if isinstance(row[c], (str, int)) else f"{row[c]:.6f}" for c in CSV_COLUMNS])
    return buf.getvalue()

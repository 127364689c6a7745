"""Command line entry point: run, replay, gen, snapshot, report."""
from __future__ import annotations

import argparse
import json
import os
import shlex
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .agent import AgentConfig
from .explore import ScoringWeights
from .generate import GenerationError, GenParams, generate, generate_suite
from .metrics import summary_csv
from .reasoner import ExternalOracle, RuleOracle
from .runner import (
    EpisodeSettings,
    dumps_record,
    read_trace,
    replay,
    report_from_trace,
    run_episode,
)
from .snapshot import snapshot
from .tasks import Episode, dump_episodes, load_episodes
from .world import ScenarioError, dump_scenario, load_scenario, parse_scenario

OUT_ENV = "SEQEXPLORE_OUT"
FIXTURES = Path(__file__).parent / "fixtures"

EXIT_OK, EXIT_FAILURES, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    scenarios: list = field(default_factory=list)
    episodes: list = field(default_factory=list)
    oracle: str = "rule"
    oracle_command: str | None = None
    seed: int = 0
    weights: tuple | None = None
    delta: float | None = None
    theta: float = 0.8
    tau0: float = 0.25
    jobs: int = 1
    out: str = "seqexplore-out"

    def __post_init__(self):
        if self.oracle not in ("rule", "external"):
            raise ConfigError("oracle must be 'rule' or 'external'")
        if self.oracle == "external" and not self.oracle_command:
            raise ConfigError("--oracle external needs --oracle-command")
        if not 0.0 <= self.tau0 <= 1.0:
            raise ConfigError("tau0 must lie in [0, 1]")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")

    def settings(self) -> EpisodeSettings:
        kw = {}
        if self.weights is not None:
            kw.update(w_vlm=self.weights[0], w_dist=self.weights[1], w_exp=self.weights[2])
        if self.delta is not None:
            kw["delta"] = self.delta
        try:
            agent = AgentConfig(theta=self.theta, weights=ScoringWeights(**kw))
        except ValueError as e:
            raise ConfigError(str(e)) from e
        return EpisodeSettings(agent=agent, tau0=self.tau0)


def _make_oracle(kind: str, command: str | None):
    return RuleOracle() if kind == "rule" else ExternalOracle(shlex.split(command))


def _resolve_jobs(cfg: RunConfig) -> list[tuple[dict, dict]]:
    """(scenario document, episode record) pairs, sorted by episode id."""
    by_name = {}
    for p in cfg.scenarios:
        w = load_scenario(p)
        by_name[w.name] = w.source
    files = [Path(p) for p in cfg.episodes] or sorted(FIXTURES.glob("*.episodes.json"))
    if not files:
        raise ConfigError("no episode files given")
    jobs = {}
    for path in files:
        for ep in load_episodes(path):
            if ep.id in jobs:
                raise ConfigError(f"duplicate episode id {ep.id!r}")
            doc = by_name.get(ep.scenario)
            if doc is None:
                for cand in (path.parent / ep.scenario, FIXTURES / ep.scenario, FIXTURES / f"{ep.scenario}.scen"):
                    if cand.is_file():
                        doc = load_scenario(cand).source
                        break
            if doc is None:
                raise ConfigError(f"episode {ep.id}: scenario {ep.scenario!r} not found")
            if parse_scenario(doc).size_class != ep.size_class:
                raise ConfigError(f"episode {ep.id}: size class disagrees with its scenario")
            jobs[ep.id] = (doc, ep.to_dict())
    return [jobs[k] for k in sorted(jobs)]


def _run_one(job) -> tuple[str, str, dict]:
    doc, ep_record, settings_record, oracle_kind, oracle_command = job
    world = parse_scenario(doc)
    episode = Episode.from_dict(ep_record)
    oracle = _make_oracle(oracle_kind, oracle_command)
    trace: list = []
    artifacts: dict = {}
    try:
        run_episode(world, episode, oracle, EpisodeSettings.from_record(settings_record), trace, artifacts)
    finally:
        if hasattr(oracle, "close"):
            oracle.close()
    text = "".join(dumps_record(r) + "\n" for r in trace)
    return episode.id, text, artifacts


def _report_lines(report) -> str:
    lines = [json.dumps({"type": "subtask", "episode": report.episode, **o.__dict__}, sort_keys=True) for o in report.outcomes]
    lines.append(json.dumps({"type": "episode", **report.row()}, sort_keys=True))
    return "\n".join(lines) + "\n"


def cmd_run(cfg: RunConfig) -> int:
    settings = cfg.settings()
    pairs = _resolve_jobs(cfg)
    jobs = [(doc, ep, settings.to_record(), cfg.oracle, cfg.oracle_command) for doc, ep in pairs]
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    results.sort(key=lambda r: r[0])

    out = Path(cfg.out)
    for sub in ("traces", "memory", "reports"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    reports = []
    for eid, text, artifacts in results:
        (out / "traces" / f"{eid}.trace.jsonl").write_text(text)
        (out / "memory" / f"{eid}.memory.txt").write_text(artifacts["memory"])
        (out / "memory" / f"{eid}.graph.txt").write_text(artifacts["graph"])
        # the CSV is computed from the trace, never from in-process state
        report = report_from_trace([json.loads(line) for line in text.splitlines()])
        (out / "reports" / f"{eid}.jsonl").write_text(_report_lines(report))
        reports.append(report)
    (out / "summary.csv").write_text(summary_csv(reports))
    (out / "run.json").write_text(json.dumps({
        "seed": cfg.seed,
        "oracle": cfg.oracle,
        "settings": settings.to_record(),
        "episodes": [r.episode for r in reports],
    }, indent=1, sort_keys=True) + "\n")
    failed = sum(1 for r in reports for o in r.outcomes if not o.success)
    print(f"{len(reports)} episodes, {failed} failed subtasks -> {out}")
    return EXIT_FAILURES if failed else EXIT_OK


def cmd_replay(paths: list[str]) -> int:
    status = EXIT_OK
    for p in paths:
        result = replay(read_trace(p))
        print(f"{p}: {result.message}")
        if not result.ok:
            status = EXIT_FAILURES
    return status


def cmd_gen(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.suite:
        pairs = generate_suite(args.seed, args.suite)
        for doc, ep in pairs:
            (out / f"{doc['name']}.scen").write_text(dump_scenario(doc))
            ep = replace(ep, scenario=f"{doc['name']}.scen")
            (out / f"{doc['name']}.episodes.json").write_text(dump_episodes([ep]))
        print(f"wrote {len(pairs)} scenarios and episodes to {out}")
        return EXIT_OK
    params = GenParams(
        size_class=args.size,
        n_rooms=args.rooms,
        infeasible_ratio=args.infeasible_ratio,
    )
    name = args.name or f"gen{args.seed}-{args.size}"
    doc, episodes = generate(args.seed, name, params, args.track, args.episodes)
    (out / f"{name}.scen").write_text(dump_scenario(doc))
    episodes = [replace(ep, scenario=f"{name}.scen") for ep in episodes]
    (out / f"{name}.episodes.json").write_text(dump_episodes(episodes))
    print(f"wrote {name}.scen and {len(episodes)} episodes to {out}")
    return EXIT_OK


def cmd_snapshot(trace: str, step: int, out: str, scale: int) -> int:
    data = snapshot(read_trace(trace), step, scale)
    Path(out).write_bytes(data)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_report(paths: list[str], out: str | None) -> int:
    reports = [report_from_trace(read_trace(p)) for p in paths]
    text = summary_csv(reports)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _weights(text: str) -> tuple:
    try:
        parts = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("weights must be three comma-separated numbers")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("weights must be three comma-separated numbers")
    return parts


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="seqexplore", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run sequential episodes")
    run.add_argument("--scenario", action="append", default=[], help="scenario file (repeatable)")
    run.add_argument("--episodes", action="append", default=[], help="episode file (repeatable); bundled set if omitted")
    run.add_argument("--oracle", choices=("rule", "external"), default="rule")
    run.add_argument("--oracle-command", help="command line of an external oracle process")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--weights", type=_weights, help="w_vlm,w_dist,w_exp (renormalized)")
    run.add_argument("--delta", type=float)
    run.add_argument("--theta", type=float, default=0.8)
    run.add_argument("--tau0", type=float, default=0.25)
    run.add_argument("--jobs", type=int, default=1)
    run.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./seqexplore-out)")

    rp = sub.add_parser("replay", help="verify traces against their scenario")
    rp.add_argument("traces", nargs="+")

    gen = sub.add_parser("gen", help="generate scenarios and episodes")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--size", choices=("small", "large", "xlarge"), default="small")
    gen.add_argument("--track", choices=("EQA", "EMN"), default="EQA")
    gen.add_argument("--episodes", type=int, default=1)
    gen.add_argument("--rooms", type=int)
    gen.add_argument("--infeasible-ratio", type=float, default=0.4)
    gen.add_argument("--name")
    gen.add_argument("--suite", type=int, default=0, help="emit a mixed suite of this many episodes instead")
    gen.add_argument("--out", default=".")

    sn = sub.add_parser("snapshot", help="render a PPM map at a trace step")
    sn.add_argument("trace")
    sn.add_argument("--step", type=int, required=True)
    sn.add_argument("--out", required=True)
    sn.add_argument("--scale", type=int, default=8)

    rep = sub.add_parser("report", help="CSV summary recomputed from traces")
    rep.add_argument("traces", nargs="+")
    rep.add_argument("--out")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = RunConfig(
                scenarios=args.scenario,
                episodes=args.episodes,
                oracle=args.oracle,
                oracle_command=args.oracle_command,
                seed=args.seed,
                weights=args.weights,
                delta=args.delta,
                theta=args.theta,
                tau0=args.tau0,
                jobs=args.jobs,
                out=args.out or os.environ.get(OUT_ENV) or "seqexplore-out",
            )
            return cmd_run(cfg)
        if args.command == "replay":
            return cmd_replay(args.traces)
        if args.command == "gen":
            return cmd_gen(args)
        if args.command == "snapshot":
            return cmd_snapshot(args.trace, args.step, args.out, args.scale)
        return cmd_report(args.traces, args.out)
    except (ConfigError, ScenarioError, GenerationError, ValueError, KeyError, FileNotFoundError) as e:
        print(f"seqexplore: error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry points: simulate, evaluate, elo, score, benchmark,
replay, layout, map."""

from __future__ import annotations

import argparse
import sys


from . import arena, bench, config as config_mod, replay as replay_mod, worldgen
from .elo import elo_ratings, pairwise_records
from .minigames import MinigameKind
from .obs import ObservationLayout
from .policies import make_policy, scripted_policies


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--profile", choices=("mini", "full"), default="mini")
    parser.add_argument("--config", help="config file to load instead of defaults")
    parser.add_argument("--original", action="append", default=[],
                        metavar="KEY=VALUE",
                        help="override a default before minigame setup")
    parser.add_argument("--set", action="append", default=[], dest="overrides",
                        metavar="KEY=VALUE",
                        help="per-episode override applied after setup")


def _build_config(args):
    if args.config:
        cfg = config_mod.load(args.config)
    else:
        cfg = config_mod.new_config(args.profile)
    for text in args.original:
        key, value = text.split("=", 1)
        cfg.set_original(key.strip(), config_mod._parse_value(value))
    return cfg


def _post_overrides(args):
    out = {}
    for text in args.overrides:
        key, value = text.split("=", 1)
        out[key.strip()] = config_mod._parse_value(value)
    return out or None


def cmd_simulate(args) -> int:
    cfg = _build_config(args)
    policies = [make_policy(name) for name in args.policies.split(",")]
    result, payload = arena.run_episode(
        args.game, policies, args.seed, cfg,
        post_overrides=_post_overrides(args), collect_replay=True)
    if args.replay:
        replay_mod.write_replay(payload, args.replay)
        print(f"replay written to {args.replay}")
    print(f"game={result.kind} seed={result.seed} ticks={result.ticks} "
          f"winner={result.winner}")
    for name, score in sorted(result.policy_scores.items()):
        print(f"  {name}: score={score:.3f}")
    print(f"  unique_events={result.unique_events} "
          f"mean_center_progress={result.mean_center_progress:.3f}")
    print(f"  digest={replay_mod.payload_digest(payload)}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _build_config(args)
    seeds = list(range(args.seeds))
    results = arena.evaluate(args.game, args.policies.split(","), args.episodes,
                             seeds, cfg, out_dir=args.out,
                             originals=tuple(args.original))
    print(f"wrote {len(results)} episode records to {args.out}")
    return 0


def cmd_elo(args) -> int:
    results = arena.load_results(args.results_dir, args.prefix)
    records = pairwise_records([r.policy_scores for r in results])
    table = elo_ratings(records)
    print(f"episodes={len(results)} iterations={table.iterations} "
          f"log_likelihood={table.log_likelihood:.3f}")
    for name, rating in sorted(table.ratings.items(), key=lambda kv: -kv[1]):
        print(f"  {name}: {rating:.1f}")
    return 0


def cmd_score(args) -> int:
    results = arena.load_results(args.results_dir, args.prefix)
    report = arena.task_completion_report(results)
    for name, stats in sorted(report.items()):
        print(f"{name}: lifespan={stats['mean_lifespan']:.1f} "
              f"completion={stats['completion_rate']:.4f} "
              f"normalized={stats['normalized_score']:.3f}")
    return 0


def cmd_benchmark(args) -> int:
    if args.game == "pack":
        print(bench.benchmark_pack(args.profile, args.episodes).summary())
    else:
        report = bench.benchmark(args.profile, args.game, episodes=args.episodes,
                                 originals=tuple(args.original))
        print(report.summary())
        if args.workers > 1:
            steps, wall = bench.benchmark_parallel(
                args.profile, args.game, args.episodes, args.workers,
                originals=tuple(args.original))
            print(f"parallel x{args.workers}: {steps / wall:,.0f} steps/s wall")
    return 0


def cmd_replay(args) -> int:
    payload = replay_mod.read_replay(args.file)
    header = payload["header"]
    print(f"kind={header['kind']} seed={header['seed']} "
          f"ticks={header['final_tick']} winner={header['winner']}")
    print(f"digest={replay_mod.payload_digest(payload)}")
    if args.rescore:
        sim = replay_mod.resimulate(payload)
        progress = sim.agent_task_progress()
        mean = sum(progress.values()) / max(1, len(progress))
        print(f"rescored: ticks={sim.tick} winner={sim.winner} "
              f"mean_progress={mean:.4f}")
    return 0


def cmd_layout(args) -> int:
    cfg = config_mod.new_config(args.profile)
    sys.stdout.write(ObservationLayout(cfg).manifest())
    return 0


def cmd_map(args) -> int:
    cfg = _build_config(args)
    tile_map = worldgen.generate_map(args.seed, cfg)
    if args.out:
        worldgen.write_map(tile_map, args.out)
        print(f"map written to {args.out}")
    if args.ascii:
        print(tile_map.ascii_dump())
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="gridarena")
    sub = parser.add_subparsers(dest="command", required=True)
    policy_names = ",".join(sorted(scripted_policies()))

    p = sub.add_parser("simulate", help="run one seeded episode")
    p.add_argument("--game", required=True,
                   choices=[k.value for k in MinigameKind])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--policies", default="random_valid",
                   help=f"comma list from: {policy_names}")
    p.add_argument("--replay", help="write the replay file here")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="run a tournament and save records")
    p.add_argument("--game", required=True,
                   choices=[k.value for k in MinigameKind])
    p.add_argument("--episodes", type=int, default=200,
                   help="episodes per seed")
    p.add_argument("--seeds", type=int, default=10, help="number of base seeds")
    p.add_argument("--policies", default="random_valid,brawler")
    p.add_argument("--out", required=True, help="results directory")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("elo", help="Elo ratings from a results directory")
    p.add_argument("results_dir")
    p.add_argument("--prefix", default="result_")
    p.set_defaults(func=cmd_elo)

    p = sub.add_parser("score", help="task-completion report from results")
    p.add_argument("results_dir")
    p.add_argument("--prefix", default="result_")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("benchmark", help="agent-steps/s for sim + codec")
    p.add_argument("--game", default="pack",
                   choices=["pack"] + [k.value for k in MinigameKind],
                   help="'pack' benchmarks the profile's whole game pack")
    p.add_argument("--episodes", type=int, default=2)
    p.add_argument("--workers", type=int, default=1)
    _add_common(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("replay", help="inspect or rescore a replay file")
    p.add_argument("file")
    p.add_argument("--rescore", action="store_true")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("layout", help="print the observation layout manifest")
    p.add_argument("--profile", choices=("mini", "full"), default="mini")
    p.set_defaults(func=cmd_layout)

    p = sub.add_parser("map", help="generate and export a map")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--ascii", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_map)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())

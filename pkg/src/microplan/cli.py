"""Command-line front end: plan, plan3d, bench, scenario, train, eval, serve."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import bench
from .agp import DEFAULT_ALPHA, DEFAULT_SPACING, plan_2d
from .agp3d import DEFAULT_PLANES, plan_3d
from .errors import EndpointInZone, PlanFailed
from .scene import generate_arena, scene_load


def _parse_point(text):
    x, y = (float(v) for v in text.split(","))
    return (x, y)


def _load_scene(args):
    if args.scene:
        return scene_load(args.scene)
    return bench.benchmark_arena(args.arena, seed=args.seed)


def cmd_plan(args):
    scene = _load_scene(args)
    try:
        path = plan_2d(
            scene, args.start, args.end, alpha=args.alpha, h=args.spacing
        )
    except (PlanFailed, EndpointInZone) as exc:
        print(f"plan failed: {exc}", file=sys.stderr)
        return 1
    doc = path.to_dict()
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(doc, fh, indent=1)
    else:
        json.dump(doc, sys.stdout, indent=1)
        print()
    return 0


def cmd_plan3d(args):
    with open(args.spheres) as fh:
        doc = json.load(fh)
    spheres = np.asarray(doc["spheres"], float)
    start = doc.get("start", [0.0, 0.0, 0.0])
    end = doc.get("end", [1.0, 0.0, 0.0])
    try:
        planned = plan_3d(start, end, spheres, n_planes=args.planes)
    except (PlanFailed, EndpointInZone) as exc:
        print(f"plan failed: {exc}", file=sys.stderr)
        return 1
    out = {
        "plane": planned.plane.index,
        "length": planned.length,
        "waypoints": [list(map(float, w)) for w in planned.waypoints],
    }
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(out, fh, indent=1)
    else:
        json.dump(out, sys.stdout, indent=1)
        print()
    return 0


def cmd_bench(args):
    planners = args.planners.split(",") if args.planners else bench.PLANNERS
    records, summary = bench.cmd_bench(
        planners=planners,
        arenas=tuple(int(n) for n in args.arenas.split(","))
        if args.arenas
        else bench.ARENA_SIZES,
        runs=args.runs,
        out_prefix=args.out,
    )
    for row in summary["rows"]:
        print(
            f"{row['planner']:8s} n={row['arena']:<3d} "
            f"feasible {row['feasible']}/{row['runs']} "
            f"mean_len {row['mean_length'] if row['mean_length'] is None else round(row['mean_length'], 1)} "
            f"var {row['var_length'] if row['var_length'] is None else round(row['var_length'], 6)} "
            f"mean_t {row['mean_time_s'] * 1e3:.2f} ms"
        )
    return 0


def _load_policy(path):
    from .rl.model_io import load_model

    return load_model(path)


def cmd_scenario(args):
    net = _load_policy(args.model) if args.model else None
    report = bench.run_scenario(
        seed=args.seed,
        controller=args.controller,
        policy_net=net,
        use_global=not args.local_only,
        frames_cap=args.frames_cap,
        keep_series=bool(args.out),
    )
    print(
        f"{report.controller}: {report.outcome} in {report.frames} frames, "
        f"{report.collisions} collisions, "
        f"{report.mean_compute_ms:.2f} ms/frame"
    )
    if args.out:
        from dataclasses import asdict

        with open(args.out, "w") as fh:
            json.dump(asdict(report), fh, indent=1)
    return 0


def cmd_train(args):
    from .rl.model_io import save_model
    from .rl.train import TrainConfig, train

    cfg = TrainConfig(seed=args.seed, total_steps=args.steps)
    net, history, best = train(
        cfg,
        log_path=args.log,
        progress=lambda r: print(
            f"step {r['step']}: success {r['success_rate']:.2f} "
            f"return {r['mean_return']:.2f}"
        ),
    )
    save_model(best, args.out, seed=args.seed)
    print(f"saved best checkpoint to {args.out}")
    return 0


def cmd_eval(args):
    from .rl.train import evaluate, evaluate_random

    if args.model == "random":
        report = evaluate_random(args.seed, n_episodes=args.episodes)
    else:
        report = evaluate(
            _load_policy(args.model), args.seed, n_episodes=args.episodes
        )
    json.dump(report, sys.stdout, indent=1)
    print()
    return 0


def cmd_serve(args):
    import uvicorn

    from .service import build_app

    scene = scene_load(args.scene) if args.scene else None
    app = build_app(scene=scene, seed=args.seed, fps=args.fps)
    host, _, port = args.bind.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="microplan")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--scene", help="scene JSON file")
        sp.add_argument("--seed", type=int, default=bench.ARENA_SEED)
        sp.add_argument("--out", help="output path")

    sp = sub.add_parser("plan", help="plan a 2D path on a scene")
    common(sp)
    sp.add_argument("--arena", type=int, default=30, help="generated arena size")
    sp.add_argument("--start", type=_parse_point, default=bench.START)
    sp.add_argument("--end", type=_parse_point, default=bench.END)
    sp.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    sp.add_argument("--spacing", type=float, default=DEFAULT_SPACING)
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("plan3d", help="plan among spheres via plane slices")
    sp.add_argument("--spheres", required=True, help="JSON with spheres/start/end")
    sp.add_argument("--planes", type=int, default=DEFAULT_PLANES)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_plan3d)

    sp = sub.add_parser("bench", help="run the planner benchmark grid")
    sp.add_argument("--planners", help="comma list, default all")
    sp.add_argument("--arenas", help="comma list of sizes, default 10..60")
    sp.add_argument("--runs", type=int, default=10)
    sp.add_argument("--out", help="prefix for CSV + JSON summary")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("scenario", help="closed-loop dynamic arena episode")
    common(sp)
    sp.add_argument(
        "--controller", choices=("none", "rule", "rl"), default="none"
    )
    sp.add_argument("--model", help="policy checkpoint for controller=rl")
    sp.add_argument("--frames-cap", type=int, default=1_000)
    sp.add_argument(
        "--local-only",
        action="store_true",
        help="run the local controller without the global planner",
    )
    sp.set_defaults(func=cmd_scenario)

    sp = sub.add_parser("train", help="train the escape policy")
    sp.add_argument("--steps", type=int, default=200_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True, help="checkpoint path")
    sp.add_argument("--log", help="JSONL eval history path")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="evaluate a checkpoint (or 'random')")
    sp.add_argument("--model", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--episodes", type=int, default=50)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("serve", help="run the live WebSocket session server")
    sp.add_argument("--bind", default="127.0.0.1:8000")
    sp.add_argument("--scene", help="scene JSON; default seeded dynamic arena")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--fps", type=float, default=25.0)
    sp.set_defaults(func=cmd_serve)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())

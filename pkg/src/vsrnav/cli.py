"""Command-line surface: coverage planning, scene scans, queries, instruction
runs, the HTTP server, and demo-world generation."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import coverage as cov
from . import demo, instruct, simworld, vsr
from .embed import RemoteEmbedder, SyntheticEmbedder, default_vocabulary
from .errors import VsrNavError
from .gridmap import load_map, save_map
from .service import SessionState
from .simworld import CameraModel, RobotState, load_world, save_world

__all__ = ["main", "cli_dispatch"]


def _parse_start(text: str) -> tuple[float, float]:
    x, y = text.split(",")
    return float(x), float(y)


def _add_embedder_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--embedder", choices=["synthetic", "remote"],
                        default=os.environ.get("VSRNAV_EMBEDDER", "synthetic"))
    parser.add_argument("--dim", type=int,
                        default=int(os.environ.get("VSRNAV_DIM", "512")))
    parser.add_argument("--vocab", choices=["default", "experiment"], default="default")
    parser.add_argument("--vocab-seed", type=int, default=0)
    parser.add_argument("--sigma", type=float, default=0.05)
    parser.add_argument("--embed-endpoint",
                        default=os.environ.get("VSRNAV_EMBED_ENDPOINT"))
    parser.add_argument("--embed-token",
                        default=os.environ.get("VSRNAV_EMBED_TOKEN"))


def _make_embedder(args):
    if args.embedder == "remote":
        if not args.embed_endpoint:
            raise VsrNavError("remote embedder needs --embed-endpoint or "
                              "VSRNAV_EMBED_ENDPOINT")
        return RemoteEmbedder(endpoint=args.embed_endpoint, dimension=args.dim,
                              token=args.embed_token)
    if args.vocab == "experiment":
        vocabulary = demo.query_experiment_vocabulary(dimension=args.dim)
    else:
        vocabulary = default_vocabulary(dimension=args.dim, seed=args.vocab_seed)
    return SyntheticEmbedder(vocabulary, sigma=args.sigma)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vsrnav")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("coverage", help="plan a closed coverage tour over a map")
    p.add_argument("--map", required=True, help="map metadata (.yaml) path")
    p.add_argument("--start", required=True, type=_parse_start, metavar="X,Y")
    p.add_argument("--out", required=True, help="tour JSON output path")
    p.add_argument("--svg", help="optional SVG overlay output path")
    p.add_argument("--offset", type=float, default=0.3)
    p.add_argument("--open-radius", type=int, default=2)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--camera-side", choices=["right", "left"], default="right")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("scan", help="run the coverage scan and build a scene file")
    p.add_argument("--world", required=True, help="world JSON path")
    p.add_argument("--tour", required=True, help="tour JSON path")
    p.add_argument("--scene", required=True, help="scene (.vsr) output path")
    p.add_argument("--step", type=float, default=0.1)
    _add_embedder_args(p)

    p = sub.add_parser("query", help="query a scene file with text")
    p.add_argument("--scene", required=True)
    p.add_argument("text")
    _add_embedder_args(p)

    p = sub.add_parser("run", help="execute a natural-language instruction")
    p.add_argument("--world", required=True)
    p.add_argument("--scene", required=True)
    p.add_argument("text")
    p.add_argument("--planner", choices=["rule", "llm"], default="rule")
    p.add_argument("--start", type=_parse_start, default=(0.5, 0.5), metavar="X,Y")
    p.add_argument("--llm-endpoint", default=os.environ.get("VSRNAV_LLM_ENDPOINT"))
    p.add_argument("--llm-key", default=os.environ.get("VSRNAV_LLM_KEY"))
    p.add_argument("--llm-replay", help="JSON file of canned completions")
    _add_embedder_args(p)

    p = sub.add_parser("serve", help="serve the HTTP API and console UI")
    p.add_argument("--world", required=True)
    p.add_argument("--scene", help="preload a scene (.vsr) file")
    p.add_argument("--scan", action="store_true",
                   help="run coverage + scan before serving")
    p.add_argument("--start", type=_parse_start, default=(0.5, 0.5), metavar="X,Y")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--static", help="console UI bundle directory",
                   default=str(Path(__file__).resolve().parents[2] / "frontend" / "dist"))
    p.add_argument("--llm-endpoint", default=os.environ.get("VSRNAV_LLM_ENDPOINT"))
    p.add_argument("--llm-key", default=os.environ.get("VSRNAV_LLM_KEY"))
    _add_embedder_args(p)

    p = sub.add_parser("make-demo", help="write the demo map/world files")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--kind", choices=["demo", "query"], default="demo")
    p.add_argument("--seed", type=int, default=0)
    return parser


def cli_dispatch(argv: list[str]) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _run_command(args)
    except VsrNavError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def _run_command(args) -> int:
    if args.command == "coverage":
        grid, meta = load_map(args.map)
        params = cov.CoverageParams(
            occupied_threshold=meta.occupied_threshold,
            unknown_value=meta.unknown_value,
            open_radius=args.open_radius,
            simplify_epsilon=args.epsilon,
            offset_delta=args.offset,
            camera_side=args.camera_side,
            seed=args.seed,
        )
        tour = cov.plan_coverage(grid, params, args.start)
        cov.save_tour(args.out, tour)
        if args.svg:
            cov.write_tour_svg(args.svg, grid, tour,
                               occupied_threshold=meta.occupied_threshold)
        print(f"tour: {len(tour.order) - 1} legs, cost {tour.total_cost:.3f} m")
        return 0

    if args.command == "scan":
        world = load_world(args.world)
        tour = cov.load_tour(args.tour)
        provider = _make_embedder(args)
        scene = simworld.run_coverage_scan(world, tour, CameraModel(), provider,
                                           step=args.step)
        vsr.save_scene(scene, args.scene)
        print(f"scene: {len(scene.objects)} objects -> {args.scene}")
        return 0

    if args.command == "query":
        scene = vsr.load_scene(args.scene)
        provider = _make_embedder(args)
        index, score = vsr.query(scene, provider.embed_text(args.text))
        obj = scene.objects[index]
        print(json.dumps({"index": index, "label": obj.label,
                          "position": obj.position.tolist(), "score": score}))
        return 0

    if args.command == "run":
        world = load_world(args.world)
        scene = vsr.load_scene(args.scene)
        provider = _make_embedder(args)
        robot = RobotState(pose=(args.start[0], args.start[1], 0.0))
        if args.planner == "llm":
            client = _make_llm_client(args)
            plan = instruct.plan_llm(args.text, client)
        else:
            plan = instruct.plan_rule_based(args.text)
        trace = instruct.execute(plan, scene, world, robot, provider)
        print(json.dumps({
            "plan": [{"verb": a.verb, "argument": a.argument} for a in plan.actions],
            "trace": trace.to_dict(),
        }, indent=2))
        return 0 if trace.status == "success" else 1

    if args.command == "serve":
        import uvicorn

        from .server import create_app
        world = load_world(args.world)
        scene = vsr.load_scene(args.scene) if args.scene \
            else vsr.SceneRepresentation(dimension=args.dim)
        provider = _make_embedder(args)
        session = SessionState(world=world,
                               robot=RobotState(pose=(args.start[0], args.start[1], 0.0)),
                               scene=scene)
        if args.scan:
            assert session.try_acquire()
            try:
                session.run_scan(cov.CoverageParams(), CameraModel(), provider,
                                 start=args.start)
            finally:
                session.release()
        llm_client = None
        if args.llm_endpoint:
            llm_client = instruct.HttpLanguageModelClient(args.llm_endpoint,
                                                          api_key=args.llm_key)
        app = create_app(session, provider, llm_client=llm_client,
                         static_dir=args.static)
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
        return 0

    if args.command == "make-demo":
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        world = demo.make_demo_world(args.seed) if args.kind == "demo" \
            else demo.make_query_world(args.seed)
        save_world(out / "world.json", world)
        save_map(out / "map.yaml", world.grid)
        print(f"wrote {out / 'world.json'} ({len(world.objects)} objects) "
              f"and {out / 'map.yaml'}")
        return 0

    raise AssertionError(f"unhandled command {args.command}")


def _make_llm_client(args):
    if args.llm_replay:
        return instruct.ReplayClient(args.llm_replay)
    if args.llm_endpoint:
        return instruct.HttpLanguageModelClient(args.llm_endpoint, api_key=args.llm_key)
    raise VsrNavError("llm planner needs --llm-endpoint/--llm-replay or "
                      "VSRNAV_LLM_ENDPOINT")


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))

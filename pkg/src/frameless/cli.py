"""Command-line entry points: run, compare, serve, scenes."""

from __future__ import annotations

import argparse
import json
import os
import sys

from .harness import (ConfigError, MODES, RunConfig, load_run, report, run,
                      save_run)
from .scene import SceneFormatError
from .scenes import write_builtin_scenes


def _parse_res(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError as e:
        raise ConfigError(f"bad --res {text!r}; expected WxH") from e


def _add_run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scene", help="builtin scene name or scene file path")
    p.add_argument("--anim", help="animation id (defaults to scene name)")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--budget", type=float, help="samples per second")
    p.add_argument("--res", default=None, help="WxH, default 64x64")
    p.add_argument("--duration", type=float, default=None, help="seconds")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--refresh", type=float, default=None, help="display Hz")
    p.add_argument("--reprojections", type=int, default=None,
                   help="override sampler reprojections per iteration")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--ppm-every", type=int, default=1,
                   help="write every k-th frame as PPM (0 disables)")
    p.add_argument("--config", default=None, help="JSON file mirroring the flags")


def _run_config(args) -> RunConfig:
    merged = {}
    if args.config:
        try:
            with open(args.config) as f:
                merged.update(json.load(f))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {args.config}: {e}") from e
    for key, val in (("scene", args.scene), ("anim", args.anim), ("mode", args.mode),
                     ("budget", args.budget), ("res", args.res),
                     ("duration", args.duration), ("seed", args.seed),
                     ("refresh", args.refresh), ("reprojections", args.reprojections),
                     ("out", args.out)):
        if val is not None:
            merged[key] = val
    for req in ("scene", "mode", "budget"):
        if merged.get(req) is None:
            raise ConfigError(f"missing required option --{req}")
    w, h = _parse_res(str(merged.get("res", "64x64")))
    return RunConfig(
        scene=merged["scene"], mode=merged["mode"], budget=float(merged["budget"]),
        width=w, height=h, duration=float(merged.get("duration", 10.0)),
        seed=int(merged.get("seed", 1)), refresh_hz=float(merged.get("refresh", 60.0)),
        anim=merged.get("anim"), reprojections=merged.get("reprojections"),
    )


def cmd_run(args) -> int:
    cfg = _run_config(args)
    result = run(cfg)
    out = args.out or (json.load(open(args.config)).get("out") if args.config else None)
    if out:
        save_run(result, out, ppm_every=args.ppm_every)
        print(f"wrote {out} ({result.frames.shape[0]} ticks)")
    else:
        print(f"{cfg.mode}: {result.frames.shape[0]} ticks, "
              f"overhead={result.overhead_fraction:.3f}")
    return 0


def cmd_compare(args) -> int:
    root = args.out
    runs = {}
    gold = None
    for name in sorted(os.listdir(root)):
        d = os.path.join(root, name)
        if not os.path.isfile(os.path.join(d, "run.json")):
            continue
        res = load_run(d)
        if res.config.mode == "gold":
            gold = res
        else:
            runs[name] = res
    if gold is None:
        raise ConfigError(f"no gold run found under {root}")
    if not runs:
        raise ConfigError(f"no comparison runs found under {root}")
    csv_text, summary = report(runs, gold)
    with open(os.path.join(root, "report.csv"), "w") as f:
        f.write(csv_text)
    with open(os.path.join(root, "summary.txt"), "w") as f:
        f.write(summary)
    print(summary, end="")
    return 0


def cmd_serve(args) -> int:
    from .service import ServiceConfig, serve
    w, h = _parse_res(args.res)
    cfg = ServiceConfig(scene=args.scene, budget=args.budget, width=w, height=h,
                        refresh_hz=args.refresh, port=args.port)
    serve(cfg)
    return 0


def cmd_scenes(args) -> int:
    paths = write_builtin_scenes(args.out)
    for p in paths:
        print(p)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="render", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one renderer over one animation")
    _add_run_args(p_run)
    p_run.set_defaults(fn=cmd_run)

    p_cmp = sub.add_parser("compare", help="aggregate runs into report.csv/summary.txt")
    p_cmp.add_argument("--out", required=True, help="directory containing run subdirs")
    p_cmp.set_defaults(fn=cmd_compare)

    p_srv = sub.add_parser("serve", help="live wall-clock rendering service")
    p_srv.add_argument("--scene", required=True)
    p_srv.add_argument("--budget", type=float, required=True)
    p_srv.add_argument("--res", default="64x64")
    p_srv.add_argument("--refresh", type=float, default=30.0)
    p_srv.add_argument("--port", type=int, default=8765)
    p_srv.set_defaults(fn=cmd_serve)

    p_sc = sub.add_parser("scenes", help="write bundled scene files")
    p_sc.add_argument("--out", default="scenes")
    p_sc.set_defaults(fn=cmd_scenes)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, SceneFormatError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

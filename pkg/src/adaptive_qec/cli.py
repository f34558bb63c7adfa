"""Command-line front end: build code descriptors, estimate distances, and
run memory-experiment sweeps to CSV."""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

from .codes import build_code, estimate_distance, read_descriptor, write_descriptor
from .experiments import (
    CSV_COLUMNS,
    ExperimentConfig,
    resource_report,
    run_memory_experiment,
    surface_baseline,
    write_csv,
)
from .gf2 import write_alist

CONFIG_KEYS = {
    "code.family": str, "code.n": int, "code.z": int, "code.dv": int,
    "code.dc": int, "code.seed": int, "code.concat": bool,
    "mode": str, "noise.p_list": str, "rounds": int, "shots": int,
    "seed": int, "unmask.base": int, "unmask.override": int,
    "decoder.iters": int, "decoder.osd_order": int, "out.path": str,
    "basis": str, "surface.k": int, "surface.d": int,
}


def default_threads() -> int:
    env = os.environ.get("ADAPTIVE_QEC_THREADS")
    if env:
        return int(env)
    return os.cpu_count() or 1


def parse_config(path) -> dict:
    """Flat key = value configuration; unknown keys are an error that
    names the offending key."""
    out = {}
    for ln, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{ln}: expected 'key = value', got {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ValueError(f"{path}:{ln}: unknown configuration key {key!r}")
        caster = CONFIG_KEYS[key]
        if caster is bool:
            out[key] = val.lower() in ("1", "true", "yes")
        else:
            out[key] = caster(val)
    return out


def descriptor_from_config(cfg: dict) -> dict:
    desc = {"family": cfg["code.family"]}
    for src, dst in (("code.n", "n"), ("code.z", "z"), ("code.dv", "dv"),
                     ("code.dc", "dc"), ("code.seed", "seed"),
                     ("code.concat", "concat")):
        if src in cfg:
            desc[dst] = cfg[src]
    return desc


def cmd_build(args) -> int:
    desc = {"family": args.family, "n": args.n}
    if args.z is not None:
        desc["z"] = args.z
    if args.dv is not None:
        desc["dv"] = args.dv
    if args.dc is not None:
        desc["dc"] = args.dc
    if args.seed is not None:
        desc["seed"] = args.seed
    if args.concat:
        desc["concat"] = True
    try:
        bundle = build_code(desc)
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_descriptor(desc, out / f"{bundle.code_id}.json")
    write_alist(bundle.classical.pcm, out / f"{bundle.code_id}.alist")
    report = resource_report(bundle)
    code = bundle.sim_code
    print(f"[[{code.n},{code.k}]]")
    print(f"w_static={report['w_static']:.4f} q_static={report['q_static']:.4f}")
    print(f"wrote {out / (bundle.code_id + '.json')}")
    return 0


def cmd_distance(args) -> int:
    try:
        desc = read_descriptor(args.descriptor)
    except FileNotFoundError:
        print(f"error: descriptor not found: {args.descriptor}", file=sys.stderr)
        return 1
    bundle = build_code(desc)
    est = estimate_distance(bundle.sim_code, trials=args.trials, seed=args.seed)
    print(f"code {bundle.code_id}: [[{bundle.sim_code.n},{bundle.sim_code.k}]]")
    print(f"d_X <= {est.dx}  d_Z <= {est.dz}  (upper bounds, {est.trials} trials)")
    return 0


def cmd_memory(args) -> int:
    try:
        cfg = parse_config(args.config)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for required in ("mode", "noise.p_list", "rounds", "shots", "seed"):
        if required not in cfg:
            print(f"error: missing configuration key {required!r}", file=sys.stderr)
            return 1
    out_path = Path(args.out or cfg.get("out.path", "memory.csv"))
    threads = args.threads or default_threads()
    seed = args.seed if args.seed is not None else cfg["seed"]
    p_list = [float(tok) for tok in cfg["noise.p_list"].split(",") if tok.strip()]
    mode = cfg["mode"]

    manifest = {
        "config_path": str(Path(args.config).resolve()),
        "config": cfg,
        "resolved_seed": seed,
        "threads": threads,
        "outputs": [str(out_path)],
        "points": [],
    }
    if mode != "surface-baseline":
        desc = descriptor_from_config(cfg)
        manifest["descriptor"] = desc
        manifest["descriptor_sha256"] = hashlib.sha256(
            json.dumps(desc, sort_keys=True).encode()).hexdigest()

    done = 0
    first = True
    for p in p_list:
        if mode == "surface-baseline":
            stats = surface_baseline(cfg["surface.k"], cfg["surface.d"], p,
                                     cfg["rounds"], cfg["shots"], seed,
                                     threads=threads)
        else:
            run_cfg = ExperimentConfig(
                descriptor=desc, mode=mode, p=p, rounds=cfg["rounds"],
                shots=cfg["shots"], seed=seed,
                basis=cfg.get("basis", "Z"),
                unmask_base=cfg.get("unmask.base", 10),
                unmask_override=cfg.get("unmask.override"),
                decoder_iters=cfg.get("decoder.iters", 30),
                osd_order=cfg.get("decoder.osd_order", 4),
                threads=threads,
            )
            stats = run_memory_experiment(run_cfg)
        write_csv(out_path, [stats], append=not first)
        first = False
        done += 1
        manifest["points"].append({"p": p, "failures": stats.failures,
                                   "shots": stats.shots})
        manifest_path = out_path.with_suffix(out_path.suffix + ".manifest.json")
        manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        print(f"point p={p:g}: p_L={stats.p_l:.6f} eps_L={stats.eps_l:.3e} "
              f"({stats.wall_ms:.0f} ms)")
    return 0 if done == len(p_list) else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="adaptive-qec",
        description="Concatenated hypergraph-product codes with adaptive "
                    "syndrome extraction",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="construct a code and write its descriptor")
    b.add_argument("--family", required=True,
                   choices=("expander", "lacross", "repetition"))
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--z", type=int)
    b.add_argument("--dv", type=int)
    b.add_argument("--dc", type=int)
    b.add_argument("--seed", type=int)
    b.add_argument("--concat", action="store_true",
                   help="concatenate with [[4,2,2]] blocks")
    b.add_argument("--out", default=".")
    b.set_defaults(func=cmd_build)

    d = sub.add_parser("distance", help="randomized distance upper bounds")
    d.add_argument("--descriptor", required=True)
    d.add_argument("--trials", type=int, default=10_000)
    d.add_argument("--seed", type=int, default=0)
    d.set_defaults(func=cmd_distance)

    m = sub.add_parser("memory", help="run a memory-experiment sweep")
    m.add_argument("--config", required=True)
    m.add_argument("--out")
    m.add_argument("--threads", type=int)
    m.add_argument("--seed", type=int)
    m.set_defaults(func=cmd_memory)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())

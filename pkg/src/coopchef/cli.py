"""Command-line pipeline: train partner pools, filter, train the adaptive
policy, evaluate, replay logs, and serve live games.

Every mutating subcommand writes a manifest JSON into
``<workspace>/manifests/`` recording the command, the effective config, the
content hashes of file inputs, and every artifact it produced, so any file
in the workspace traces back to exactly one manifest.

Config precedence: explicit CLI flag > --config YAML file > built-in
defaults. ``COOPCHEF_WORKERS`` overrides rollout worker counts everywhere.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from coopchef import engine, evalharness, pool, rewards, trajlog
from coopchef.policies import resolve_policy

logger = logging.getLogger("coopchef")

TRAIN_DEFAULTS = {
    "steps": 200_000,
    "workers": 32,
    "rollout_length": 100,
    "lr": 5e-4,
    "gamma": 0.99,
    "gae_lambda": 0.95,
    "entropy_coef": 0.01,
    "clip": 0.2,
    "ppo_epochs": 4,
    "minibatches": 4,
    "hidden": 64,
    "seed": 0,
}


def _file_hash(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _merged_config(args: argparse.Namespace, keys: dict) -> dict:
    """flag > config file > defaults, per key."""
    from_file = {}
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as f:
            from_file = yaml.safe_load(f) or {}
    out = {}
    for key, default in keys.items():
        flag = getattr(args, key, None)
        if flag is not None:
            out[key] = flag
        elif key in from_file:
            out[key] = from_file[key]
        else:
            out[key] = default
    env_workers = os.environ.get("COOPCHEF_WORKERS")
    if env_workers and "workers" in out:
        out["workers"] = int(env_workers)
    return out


def _train_config(cfg: dict, seed: int):
    from coopchef.training import TrainConfig

    return TrainConfig(
        total_steps=int(cfg["steps"]),
        rollout_workers=int(cfg["workers"]),
        rollout_length=int(cfg["rollout_length"]),
        lr=float(cfg["lr"]),
        gamma=float(cfg["gamma"]),
        gae_lambda=float(cfg["gae_lambda"]),
        entropy_coef=float(cfg["entropy_coef"]),
        clip=float(cfg["clip"]),
        ppo_epochs=int(cfg["ppo_epochs"]),
        minibatches=int(cfg["minibatches"]),
        hidden=int(cfg["hidden"]),
        seed=seed,
    )


def _resolve_layout(name_or_path: str) -> tuple[engine.Layout, dict]:
    lay = engine.load_layout(name_or_path)
    if name_or_path.endswith(".layout") or "/" in name_or_path:
        inputs = {name_or_path: _file_hash(name_or_path)}
    else:
        inputs = {f"builtin:{name_or_path}": hashlib.sha256(
            lay.text.encode()).hexdigest()}
    return lay, inputs


def _write_manifest(workspace: Path, command: str, config: dict,
                    inputs: dict, outputs: list[str]) -> Path:
    mdir = workspace / "manifests"
    mdir.mkdir(parents=True, exist_ok=True)
    body = {
        "command": command,
        "config": config,
        "inputs": inputs,
        "outputs": sorted(outputs),
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    digest = hashlib.sha256(
        json.dumps(body, sort_keys=True).encode()).hexdigest()[:12]
    path = mdir / f"{command}-{digest}.json"
    path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    logger.info("manifest: %s", path)
    return path


def cmd_train_biased(args) -> int:
    from coopchef.policies import save_checkpoint
    from coopchef.training import format_curve_table, selfplay_train

    cfg = _merged_config(args, TRAIN_DEFAULTS)
    layout, inputs = _resolve_layout(args.layout)
    workspace = Path(args.workspace)
    outdir = workspace / "biased" / layout.name
    outdir.mkdir(parents=True, exist_ok=True)
    grid = rewards.default_weight_grid(layout)
    outputs = []
    candidates = []
    for i in range(args.n):
        weight_seed = int(cfg["seed"]) + i
        wv = rewards.sample_weight_vector(grid, weight_seed)
        tc = _train_config(cfg, weight_seed)
        logger.info("biased run %d/%d weights=%s", i + 1, args.n, wv.to_dict())
        pol_w, pol_a, curve = selfplay_train(layout, wv, tc)
        stem = outdir / f"biased-{weight_seed}"
        pid_w = save_checkpoint(f"{stem}-w.pt", pol_w.net,
                                {"weight_seed": weight_seed,
                                 "weights": wv.to_dict(), "layout": layout.name})
        pid_a = save_checkpoint(f"{stem}-a.pt", pol_a.net,
                                {"weight_seed": weight_seed, "layout": layout.name})
        ec = pool.expected_event_count(pol_w, pol_a, layout,
                                       episodes=args.ec_episodes,
                                       seed=weight_seed,
                                       policy_id=pid_w, partner_id=pid_a)
        Path(f"{stem}-curve.txt").write_text(format_curve_table(curve),
                                             encoding="utf-8")
        meta = {
            "policy_id": pid_w,
            "partner_id": pid_a,
            "weight_seed": weight_seed,
            "weights": wv.to_dict(),
            "checkpoint_w": f"{stem}-w.pt",
            "checkpoint_a": f"{stem}-a.pt",
            "event_count": list(ec.per_event),
            "ec_episodes": args.ec_episodes,
        }
        Path(f"{stem}.json").write_text(json.dumps(meta, indent=2, sort_keys=True),
                                        encoding="utf-8")
        outputs += [f"{stem}-w.pt", f"{stem}-a.pt", f"{stem}.json",
                    f"{stem}-curve.txt"]
        candidates.append(meta)
    _write_manifest(workspace, "train-biased",
                    {**cfg, "n": args.n, "layout": layout.name}, inputs, outputs)
    print(f"trained {args.n} biased candidates into {outdir}")
    return 0


def cmd_build_baseline_pool(args) -> int:
    from coopchef.policies import save_checkpoint
    from coopchef.training import build_baseline_pool, format_curve_table

    cfg = _merged_config(args, TRAIN_DEFAULTS)
    layout, inputs = _resolve_layout(args.layout)
    workspace = Path(args.workspace)
    outdir = workspace / args.method / layout.name
    outdir.mkdir(parents=True, exist_ok=True)
    shaping = rewards.default_shaping(layout, stage=1, horizon=int(cfg["steps"]))
    tc = _train_config(cfg, int(cfg["seed"]))
    handles, curves = build_baseline_pool(args.method, layout, args.n, tc,
                                          shaping=shaping)
    outputs = []
    members = []
    for h in handles:
        safe = h.policy_id.replace(":", "_")
        path = outdir / f"{safe}.pt"
        save_checkpoint(str(path), h.net, {"layout": layout.name},
                        policy_id=h.policy_id)
        members.append({"id": h.policy_id, "checkpoint": str(path)})
        outputs.append(str(path))
    for i, curve in enumerate(curves):
        cpath = outdir / f"run{i}-curve.txt"
        cpath.write_text(format_curve_table(curve), encoding="utf-8")
        outputs.append(str(cpath))
    index = outdir / "checkpoints.json"
    index.write_text(json.dumps({"members": members}, indent=2, sort_keys=True),
                     encoding="utf-8")
    outputs.append(str(index))
    _write_manifest(workspace, "build-baseline-pool",
                    {**cfg, "method": args.method, "n": args.n,
                     "layout": layout.name}, inputs, outputs)
    print(f"built {len(handles)} {args.method} checkpoints into {outdir}")
    return 0


def cmd_filter_pool(args) -> int:
    layout, inputs = _resolve_layout(args.layout)
    workspace = Path(args.workspace)
    outdir = workspace / "biased" / layout.name
    metas = []
    for meta_path in sorted(outdir.glob("biased-*.json")):
        metas.append(json.loads(meta_path.read_text(encoding="utf-8")))
        inputs[str(meta_path)] = _file_hash(meta_path)
    if not metas:
        print(f"no biased candidates under {outdir}", file=sys.stderr)
        return 1
    ecs = [
        pool.EventCount(tuple(m["event_count"]), m["policy_id"], m["partner_id"],
                        m["ec_episodes"])
        for m in metas
    ]
    biased_members = [
        pool.PoolMember(m["policy_id"], "biased", m["checkpoint_w"],
                        weight_seed=m["weight_seed"],
                        event_count=tuple(m["event_count"]))
        for m in metas
    ]
    mep_members = []
    if args.mep_dir:
        index = json.loads((Path(args.mep_dir) / "checkpoints.json").read_text(
            encoding="utf-8"))
        inputs[str(Path(args.mep_dir) / "checkpoints.json")] = _file_hash(
            Path(args.mep_dir) / "checkpoints.json")
        mep_members = [
            pool.PoolMember(m["id"], "mep_checkpoint", m["checkpoint"])
            for m in index["members"]
        ]
        spec = pool.assemble_mixed_pool(biased_members, ecs, mep_members,
                                      k_total=args.k * 2,
                                      layout_name=layout.name, seed=args.seed)
    else:
        rng = np.random.default_rng(args.seed)
        i0 = int(rng.integers(len(ecs)))
        order = pool.greedy_select(ecs, args.k, i0)
        spec = pool.PoolSpec(tuple(biased_members[i] for i in order),
                             layout_name=layout.name, start_index=i0)
    out_path = workspace / f"pool-{layout.name}.json"
    out_path.write_text(spec.to_json() + "\n", encoding="utf-8")
    _write_manifest(workspace, "filter-pool",
                    {"k": args.k, "seed": args.seed, "layout": layout.name,
                     "mep_dir": args.mep_dir},
                    inputs, [str(out_path)])
    print(f"pool of {len(spec.members)} members -> {out_path}")
    for m in spec.members:
        print(f"  {m.provenance:>15s}  {m.policy_id}")
    return 0


def cmd_train_adaptive(args) -> int:
    from coopchef.policies import load_checkpoint, save_checkpoint
    from coopchef.training import format_curve_table, train_adaptive

    cfg = _merged_config(args, TRAIN_DEFAULTS)
    layout, inputs = _resolve_layout(args.layout)
    workspace = Path(args.workspace)
    spec = pool.PoolSpec.from_json(Path(args.pool).read_text(encoding="utf-8"))
    inputs[args.pool] = _file_hash(args.pool)
    partners = [load_checkpoint(m.checkpoint_path, seed=i)
                for i, m in enumerate(spec.members)]
    tc = _train_config(cfg, int(cfg["seed"]))
    policy, curve = train_adaptive(partners, layout, tc)
    outdir = workspace / "adaptive" / layout.name
    outdir.mkdir(parents=True, exist_ok=True)
    ckpt = outdir / f"adaptive-{cfg['seed']}.pt"
    pid = save_checkpoint(str(ckpt), policy.net,
                          {"layout": layout.name, "pool": args.pool})
    cpath = outdir / f"adaptive-{cfg['seed']}-curve.txt"
    cpath.write_text(format_curve_table(curve), encoding="utf-8")
    _write_manifest(workspace, "train-adaptive",
                    {**cfg, "layout": layout.name, "pool": args.pool},
                    inputs, [str(ckpt), str(cpath)])
    print(f"adaptive policy {pid} -> {ckpt}")
    return 0


def cmd_eval(args) -> int:
    layout, _ = _resolve_layout(args.layout)
    policy = resolve_policy(args.policy, seed=args.seed)
    partner = resolve_policy(args.partner, seed=args.seed + 1)
    results = []
    if args.seats in ("1", "both"):
        results.append(evalharness.crossplay(policy, partner, layout, 1,
                                             args.episodes, args.seed))
    if args.seats in ("2", "both"):
        results.append(evalharness.crossplay(policy, partner, layout, 2,
                                             args.episodes, args.seed))
    table = evalharness.format_matchup_table(results)
    print(table, end="")
    if args.out:
        Path(args.out).write_text(table, encoding="utf-8")
    return 0


def cmd_replay(args) -> int:
    for path in args.trajectory:
        with open(path, "r", encoding="utf-8") as f:
            record = trajlog.read_log(f)
        try:
            final = trajlog.replay_final_state(record)
        except ValueError as e:
            print(f"{path}: MISMATCH {e}", file=sys.stderr)
            return 1
        # Re-log and byte-compare against the original file.
        import io

        buf = io.StringIO()
        trajlog.write_episode(buf, record.layout, record.seed, record.actions,
                              meta=record.header.get("meta"))
        original = Path(path).read_text(encoding="utf-8")
        if buf.getvalue() != original:
            print(f"{path}: MISMATCH relogged bytes differ", file=sys.stderr)
            return 1
        print(f"{path}: ok score={final.total_reward} "
              f"hash={hashlib.sha256(original.encode()).hexdigest()[:12]}")
    return 0


def cmd_serve(args) -> int:
    from coopchef.playserver import ServerConfig, run_server

    layout, _ = _resolve_layout(args.layout)
    agents = {}
    for spec in args.agent:
        name, _, policy_spec = spec.partition("=")
        if not policy_spec:
            print(f"--agent needs name=policyspec, got {spec!r}", file=sys.stderr)
            return 2
        agents[name] = policy_spec
    config = ServerConfig(
        layout=layout,
        agents=agents,
        host=args.host,
        port=args.port,
        tick_ms=args.tick_ms,
        log_dir=args.log_dir or str(Path(args.workspace) / "games"),
        seed=args.seed,
    )
    run_server(config)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="coopchef",
        description="Cooperative kitchen training pipeline and game server.",
    )
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp, train=False):
        sp.add_argument("--layout", required=True,
                        help="bundled layout name or .layout file path")
        sp.add_argument("--workspace", default="workspace")
        sp.add_argument("--config", help="YAML config file (flag > file > default)")
        sp.add_argument("--seed", type=int, default=None if train else 0)
        if train:
            for key in TRAIN_DEFAULTS:
                if key == "seed":
                    continue
                kind = float if isinstance(TRAIN_DEFAULTS[key], float) else int
                sp.add_argument(f"--{key.replace('_', '-')}", type=kind,
                                dest=key, default=None)

    sp = sub.add_parser("train-biased", help="self-play under sampled hidden rewards")
    add_common(sp, train=True)
    sp.add_argument("--n", type=int, default=8, help="number of weight samples")
    sp.add_argument("--ec-episodes", type=int, default=50)
    sp.set_defaults(func=cmd_train_biased)

    sp = sub.add_parser("build-baseline-pool", help="FCP/MEP checkpoint pools")
    add_common(sp, train=True)
    sp.add_argument("--method", choices=("fcp", "mep"), required=True)
    sp.add_argument("--n", type=int, default=3, help="runs (fcp) / population (mep)")
    sp.set_defaults(func=cmd_build_baseline_pool)

    sp = sub.add_parser("filter-pool", help="greedy diversity filter over candidates")
    add_common(sp)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--mep-dir", help="combine with MEP checkpoints from this dir")
    sp.set_defaults(func=cmd_filter_pool)

    sp = sub.add_parser("train-adaptive", help="train against a frozen pool")
    add_common(sp, train=True)
    sp.add_argument("--pool", required=True, help="pool manifest JSON")
    sp.set_defaults(func=cmd_train_adaptive)

    sp = sub.add_parser("eval", help="cross-play evaluation")
    add_common(sp)
    sp.add_argument("--policy", required=True)
    sp.add_argument("--partner", required=True)
    sp.add_argument("--episodes", type=int, default=20)
    sp.add_argument("--seats", choices=("1", "2", "both"), default="both")
    sp.add_argument("--out", help="also write the table to this path")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("replay", help="re-simulate logs and byte-compare")
    sp.add_argument("trajectory", nargs="+")
    sp.set_defaults(func=cmd_replay)

    sp = sub.add_parser("serve", help="run the live human-play service")
    add_common(sp)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8765)
    sp.add_argument("--tick-ms", type=int, default=150)
    sp.add_argument("--log-dir", default=None)
    sp.add_argument("--agent", action="append", default=[],
                    help="name=policyspec, repeatable (4 agents for a study)")
    sp.set_defaults(func=cmd_serve)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entrypoint.

Exit codes: 0 success, 1 stage failure, 2 configuration error.  Every
subcommand writes outputs with sibling manifests so runs can be reproduced
and verified by hash.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .ablations import ablate_branching, ablate_data_fraction
from .config import Config, default_config, load_config, resolve_config
from .envs import make_env
from .errors import ConfigError, EelabError
from .manifest import write_manifest
from .model import build_vocab, init_params, load_checkpoint, save_checkpoint
from .pipeline import (
    load_plan,
    model_config,
    run_experiment,
    run_pipeline,
    stage_eval,
    stage_forge,
    stage_gen_expert,
    stage_gen_tasks,
    stage_rl,
    stage_rollout,
    stage_train,
)
from .substrate import RngStream, read_tasks, read_trajectories, split_tasks
from . import pipeline as pl


def _config_from_args(args) -> Config:
    if getattr(args, "config", None):
        cfg = load_config(args.config)
    else:
        cfg = default_config(getattr(args, "env", None) or "gridhouse")
    overrides = {}
    if getattr(args, "env", None):
        overrides["env"] = {"name": args.env}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if overrides:
        tree = cfg.to_json()
        for key, value in overrides.items():
            if isinstance(value, dict):
                tree[key].update(value)
            else:
                tree[key] = value
        cfg = resolve_config(tree)
    return cfg


def _split_from_file(tasks, split_path):
    by_id = {t.task_id: t for t in tasks}
    raw = json.loads(Path(split_path).read_text(encoding="utf-8"))
    from .substrate import TaskSplit

    return TaskSplit(
        train=tuple(by_id[i] for i in raw["train"]),
        id_test=tuple(by_id[i] for i in raw["id_test"]),
        ood_test=tuple(by_id[i] for i in raw["ood_test"]),
    )


# ------------------------------------------------------------------ commands

def cmd_gen_tasks(args) -> int:
    cfg = _config_from_args(args)
    if args.n is not None:
        tree = cfg.to_json()
        tree["env"]["n_tasks"] = args.n
        cfg = resolve_config(tree)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    env = make_env(cfg.env["name"], cfg.env["fixture"])
    tasks, split = stage_gen_tasks(cfg, env, out)
    print(f"wrote {len(tasks)} tasks to {out / 'tasks.jsonl'} "
          f"(train={len(split.train)} id={len(split.id_test)} ood={len(split.ood_test)})")
    return 0


def cmd_gen_expert(args) -> int:
    cfg = _config_from_args(args)
    env = make_env(cfg.env["name"], cfg.env["fixture"])
    tasks = read_tasks(args.tasks)
    if args.split_file:
        split = _split_from_file(tasks, args.split_file)
        chosen = list(split.bucket(args.split))
    else:
        chosen = tasks
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    expert, path = stage_gen_expert(cfg, env, chosen, out.parent, Path(args.tasks))
    if path != out:
        path.replace(out)
        Path(str(path) + ".manifest.json").replace(str(out) + ".manifest.json")
    print(f"wrote {len(expert)} expert trajectories "
          f"({sum(len(t) for t in expert)} steps) to {out}")
    return 0


def cmd_rollout(args) -> int:
    cfg = _config_from_args(args)
    tree = cfg.to_json()
    if args.k is not None:
        tree["rollout"]["k"] = args.k
    if args.temperature is not None:
        tree["rollout"]["temperature"] = args.temperature
    if args.mix is not None:
        tree["rollout"]["mix"] = args.mix
    cfg = resolve_config(tree)
    env = make_env(cfg.env["name"], cfg.env["fixture"])
    expert = read_trajectories(args.expert)
    tasks = read_tasks(args.tasks)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    path = stage_rollout(cfg, env, {t.task_id: t for t in tasks}, expert,
                         Path(args.policy), out.parent, out_name=out.name)
    from .substrate import read_triples

    print(f"wrote {len(read_triples(path))} rollout triples to {path}")
    return 0


def cmd_forge(args) -> int:
    cfg = _config_from_args(args)
    env = make_env(cfg.env["name"], cfg.env["fixture"])
    expert = read_trajectories(args.expert)
    tasks = read_tasks(args.tasks)
    triples = None
    if args.triples:
        from .substrate import read_triples

        triples = read_triples(args.triples)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    plan = stage_forge(cfg, env, {t.task_id: t for t in tasks}, expert, args.kind,
                       out, triples=triples,
                       star_ckpt=Path(args.policy) if args.policy else None)
    print(f"forged {args.kind} plan: {plan.total_updates} updates over "
          f"{len(plan.stages)} stage(s); manifest at {out / f'plan_{args.kind}.json'}")
    return 0


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    plan = load_plan(args.plan)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.init == "zero":
        texts = []
        for stage in plan.stages:
            for ex in stage.corpus:
                texts.append(ex.input_text)
                texts.append(ex.target_text)
        tokenizer = build_vocab(texts, cfg.model["max_vocab"])
        mcfg = model_config(cfg, len(tokenizer))
        params = init_params(mcfg, RngStream(cfg.seed, "init"))
        init_path = out.parent / "init.ckpt"
        save_checkpoint(init_path, tokenizer, mcfg, params,
                        meta={"method": "init", "seed": cfg.seed})
    else:
        init_path = Path(args.init)
    path = stage_train(cfg, plan, init_path, plan.recipe, out.parent)
    if path != out:
        path.replace(out)
        Path(str(path) + ".manifest.json").replace(str(out) + ".manifest.json")
    print(f"trained {plan.recipe} checkpoint -> {out}")
    return 0


def cmd_rl(args) -> int:
    cfg = _config_from_args(args)
    tree = cfg.to_json()
    if args.updates is not None:
        tree["rl"]["updates"] = args.updates
    if args.group_size is not None:
        tree["rl"]["group_size"] = args.group_size
    cfg = resolve_config(tree)
    env = make_env(cfg.env["name"], cfg.env["fixture"])
    tasks = read_tasks(args.tasks)
    split = _split_from_file(tasks, args.split_file) if args.split_file else None
    train_tasks = list(split.train) if split else tasks
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    method = load_checkpoint(args.init).meta.get("method", "ckpt")
    path, curve_path, info = stage_rl(cfg, env, train_tasks, Path(args.init),
                                      method, out.parent)
    if path != out:
        path.replace(out)
        Path(str(path) + ".manifest.json").replace(str(out) + ".manifest.json")
    print(f"rl-tuned {method} -> {out} (grpo cfg hash {info['cfg_hash']}); "
          f"reward curve at {curve_path}")
    return 0


def cmd_eval(args) -> int:
    cfg = _config_from_args(args)
    tree = cfg.to_json()
    if args.n is not None:
        tree["eval"]["n_id" if args.split == "id" else "n_ood"] = args.n
    cfg = resolve_config(tree)
    env = make_env(cfg.env["name"], cfg.env["fixture"])
    tasks = read_tasks(args.tasks)
    split = _split_from_file(tasks, args.split_file)
    checkpoints = {}
    for spec in args.ckpt:
        if "=" not in spec:
            raise ConfigError(f"--ckpt expects method=path, got {spec!r}")
        method, path = spec.split("=", 1)
        checkpoints[method] = Path(path)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [0]
    all_reports = []
    table = ""
    for seed in seeds:
        reports, table = stage_eval(cfg, env, checkpoints, split, args.split, out,
                                    eval_seed=seed)
        all_reports.extend(reports.values())
    print(table)
    return 0


def cmd_ablate(args) -> int:
    cfg = _config_from_args(args)
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [0]
    methods = args.methods.split(",") if args.methods else ["il", "iwm", "sr"]
    out = Path(args.out)
    if args.which == "data-fraction":
        result = ablate_data_fraction(cfg, methods, seeds, out)
        print(json.dumps(result["summary"], indent=1, sort_keys=True))
    else:
        result = ablate_branching(cfg, methods, seeds, out)
        print(json.dumps(result["summary"], indent=1, sort_keys=True))
    return 0


def cmd_pipeline(args) -> int:
    cfg = _config_from_args(args)
    summary = run_pipeline(cfg, args.method, Path(args.out))
    print(json.dumps(summary, indent=1, sort_keys=True))
    return 0


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eelab",
        description="Desk-scale agent-training pipeline: tasks, demonstrations, "
                    "branched rollouts, corpora, training, RL, evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, env_required=False):
        p.add_argument("--config", help="strict JSON config file")
        p.add_argument("--env", required=env_required,
                       choices=["gridhouse", "tokenshop", "hopqa"])
        p.add_argument("--seed", type=int)

    p = sub.add_parser("gen-tasks", help="generate seeded tasks and splits")
    common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gen_tasks)

    p = sub.add_parser("gen-expert", help="plan expert trajectories with the oracle")
    common(p)
    p.add_argument("--tasks", required=True)
    p.add_argument("--split-file")
    p.add_argument("--split", default="train", choices=["train", "id", "ood"])
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gen_expert)

    p = sub.add_parser("rollout", help="collect branched rollout triples")
    common(p)
    p.add_argument("--expert", required=True)
    p.add_argument("--tasks", required=True)
    p.add_argument("--policy", required=True, help="proposal policy checkpoint")
    p.add_argument("--k", type=int)
    p.add_argument("--temperature", type=float)
    p.add_argument("--mix", choices=["policy_only", "uniform_only", "policy_then_uniform"])
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_rollout)

    p = sub.add_parser("forge", help="build training corpora and a plan manifest")
    common(p)
    p.add_argument("--kind", required=True, choices=["il", "iwm", "sr", "star"])
    p.add_argument("--expert", required=True)
    p.add_argument("--tasks", required=True)
    p.add_argument("--triples")
    p.add_argument("--policy", help="checkpoint for star action prediction")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_forge)

    p = sub.add_parser("train", help="run a training plan")
    common(p)
    p.add_argument("--plan", required=True)
    p.add_argument("--init", required=True, help="checkpoint path or 'zero'")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("rl", help="GRPO fine-tuning against environment reward")
    common(p)
    p.add_argument("--init", required=True)
    p.add_argument("--tasks", required=True)
    p.add_argument("--split-file")
    p.add_argument("--updates", type=int)
    p.add_argument("--group-size", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_rl)

    p = sub.add_parser("eval", help="evaluate checkpoints on a split")
    common(p)
    p.add_argument("--ckpt", action="append", required=True, metavar="METHOD=PATH")
    p.add_argument("--tasks", required=True)
    p.add_argument("--split-file", required=True)
    p.add_argument("--split", default="id", choices=["id", "ood"])
    p.add_argument("--n", type=int)
    p.add_argument("--seeds", default="0")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("ablate", help="data-fraction or branching-factor sweeps")
    common(p)
    p.add_argument("--which", required=True, choices=["data-fraction", "branching"])
    p.add_argument("--methods")
    p.add_argument("--seeds", default="0")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_ablate)

    p = sub.add_parser("pipeline", help="run one method end to end")
    common(p)
    p.add_argument("--method", required=True,
                   choices=["il", "iwm", "sr", "star"])
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_pipeline)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except EelabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

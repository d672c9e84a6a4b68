"""End-to-end orchestration of the pipeline stages.

Every stage writes its output plus a manifest (content hashes keyed by
logical name), so a rerun with the same config and seed reproduces the
manifest chain byte for byte.  `run_experiment` shares the task/expert/
rollout stages across methods trained on the same seed, which is also how
the comparison experiments keep their inputs identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .config import Config
from .envs import Environment, OPEN_ACTION_SPACE, make_env
from .evalharness import EvalReport, evaluate_split, greedy_action, render_comparison_table
from .forge import (
    Budgets,
    TrainingPlan,
    build_il_corpus,
    build_iwm_corpus,
    build_sr_corpus,
    build_star_corpus,
    make_training_plan,
)
from .manifest import write_manifest
from .model import (
    Checkpoint,
    ModelConfig,
    OptimHyper,
    build_vocab,
    init_params,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .rl import GrpoConfig, rl_train
from .rollout import BranchConfig, collect_rollouts
from .substrate import (
    RngStream,
    TaskSpec,
    TaskSplit,
    Trajectory,
    split_tasks,
    write_jsonl,
)

METHODS = ("il", "iwm", "sr", "star")


@dataclass
class ExperimentArtifacts:
    cfg: Config
    workdir: Path
    env: Environment
    tasks: list[TaskSpec]
    split: TaskSplit
    expert: list[Trajectory]
    init_ckpt_path: Path
    triples_path: Path | None = None
    checkpoints: dict[str, Path] = field(default_factory=dict)
    reports: dict[tuple[str, str], EvalReport] = field(default_factory=dict)
    plans: dict[str, TrainingPlan] = field(default_factory=dict)

    @property
    def tasks_by_id(self) -> dict[str, TaskSpec]:
        return {t.task_id: t for t in self.tasks}


def model_config(cfg: Config, vocab_size: int) -> ModelConfig:
    m = cfg.model
    return ModelConfig(
        vocab_size=vocab_size,
        dim=m["dim"],
        context=m["context"],
        hidden=m["hidden"],
        max_target_tokens=m["max_target_tokens"],
        input_budget=m["input_budget"] or max(16, m["context"] - 24),
    )


def optim_hyper(cfg: Config) -> OptimHyper:
    t = cfg.train
    return OptimHyper(lr=t["lr"], beta1=t["beta1"], beta2=t["beta2"], eps=t["eps"],
                      lr_floor=t["lr_floor"])


def branch_config(cfg: Config, k: int | None = None) -> BranchConfig:
    r = cfg.rollout
    return BranchConfig(
        k=r["k"] if k is None else k,
        temperature=r["temperature"],
        source_mix=r["mix"],
        include_expert=r["include_expert"],
    )


def grpo_config(cfg: Config, env: Environment) -> GrpoConfig:
    r = cfg.rl
    return GrpoConfig(
        group_size=r["group_size"],
        clip_eps=r["clip_eps"],
        lr=r["lr"],
        updates=r["updates"],
        max_steps=r["max_steps"] or env.max_steps_default(),
        adv_eps=r["adv_eps"],
        temperature=r["temperature"],
    )


# ------------------------------------------------------------------ stages

def stage_gen_tasks(cfg: Config, env: Environment, workdir: Path):
    rng = RngStream(cfg.seed, "tasks")
    tasks = env.generate_tasks(cfg.env["n_tasks"], rng)
    split = split_tasks(tasks, tuple(cfg.env["split"]), RngStream(cfg.seed, "split"))
    tasks_path = workdir / "tasks.jsonl"
    write_jsonl(tasks, tasks_path)
    split_path = workdir / "split.json"
    split_path.write_text(json.dumps(split.to_json(), indent=1, sort_keys=True) + "\n")
    write_manifest(tasks_path, "gen-tasks", cfg.to_json(), cfg.seed, {},
                   {"tasks.jsonl": tasks_path, "split.json": split_path},
                   {"n_tasks": len(tasks)})
    return tasks, split


def stage_gen_expert(cfg: Config, env: Environment, train_tasks, workdir: Path,
                     tasks_path: Path | None = None):
    expert = [env.oracle_plan(task) for task in train_tasks]
    expert_path = workdir / "expert.jsonl"
    write_jsonl(expert, expert_path)
    inputs = {"tasks.jsonl": tasks_path} if tasks_path else {}
    write_manifest(expert_path, "gen-expert", cfg.to_json(), cfg.seed, inputs,
                   {"expert.jsonl": expert_path},
                   {"trajectories": len(expert),
                    "steps": sum(len(t) for t in expert)})
    return expert, expert_path


def build_tokenizer(cfg: Config, env: Environment, expert: list[Trajectory]):
    texts = list(env.vocab_seed_texts())
    for traj in expert:
        for step in traj.steps:
            texts.append(step.state_text)
            texts.append(step.action.canonical)
    return build_vocab(texts, cfg.model["max_vocab"])


def stage_init_checkpoint(cfg: Config, env: Environment, expert, workdir: Path) -> Path:
    tokenizer = build_tokenizer(cfg, env, expert)
    mcfg = model_config(cfg, len(tokenizer))
    params = init_params(mcfg, RngStream(cfg.seed, "init"))
    path = workdir / "init.ckpt"
    save_checkpoint(path, tokenizer, mcfg, params,
                    meta={"method": "init", "seed": cfg.seed, "env": env.name})
    write_manifest(path, "init", cfg.to_json(), cfg.seed, {}, {"init.ckpt": path},
                   {"vocab_size": len(tokenizer)})
    return path


def stage_rollout(cfg: Config, env: Environment, tasks_by_id, expert,
                  policy_ckpt: Path, workdir: Path, k: int | None = None,
                  out_name: str = "rollout.jsonl") -> Path:
    ckpt = load_checkpoint(policy_ckpt)
    bcfg = branch_config(cfg, k)
    triples = collect_rollouts(
        env, expert, bcfg, RngStream(cfg.seed, "rollout"),
        policy=ckpt.params, tokenizer=ckpt.tokenizer, model_cfg=ckpt.cfg,
        tasks=tasks_by_id,
    )
    path = workdir / out_name
    write_jsonl(triples, path)
    write_manifest(path, "rollout", cfg.to_json(), cfg.seed,
                   {"policy": policy_ckpt}, {out_name: path},
                   {"k": bcfg.k, "mix": bcfg.source_mix,
                    "include_expert": bcfg.include_expert,
                    "proposal_policy": str(policy_ckpt.name),
                    "triples": len(triples)})
    return path


def stage_forge(cfg: Config, env: Environment, tasks_by_id, expert, method: str,
                workdir: Path, triples=None, star_ckpt: Path | None = None) -> TrainingPlan:
    budgets = Budgets(il_updates=cfg.train["il_updates"], batch=cfg.train["batch"])
    expert_corpus = build_il_corpus(expert)
    corpora = {"expert": expert_corpus}
    stats: dict = {}
    if method == "iwm":
        corpora["iwm"] = build_iwm_corpus(triples, cfg.forge["target_mode"], env.name)
    elif method == "sr":
        corpora["refl"], stats = build_sr_corpus(
            env, tasks_by_id, expert, triples, cfg.forge["m_alternatives"],
            cfg.forge["generator"], RngStream(cfg.seed, "sr"),
            length_cap=cfg.env["length_cap"], endpoint=cfg.forge["external_endpoint"],
        )
    elif method == "star":
        ckpt = load_checkpoint(star_ckpt)

        def predict(state, candidates):
            return greedy_action(ckpt.params, ckpt.tokenizer, ckpt.cfg,
                                 state.state_text, candidates)

        corpora["star"], stats = build_star_corpus(
            env, tasks_by_id, expert, predict, RngStream(cfg.seed, "star"),
        )
    plan = make_training_plan(
        method, budgets, corpora, sr_mix_ratio=cfg.forge["sr_mix_ratio"],
        rng=RngStream(cfg.seed, "plan"),
    )
    corpus_files = {}
    for role, corpus in corpora.items():
        path = workdir / f"corpus_{method}_{role}.jsonl"
        write_jsonl(corpus, path)
        corpus_files[role] = path
    plan_path = workdir / f"plan_{method}.json"
    plan_path.write_text(json.dumps(
        plan.manifest({role: p.name for role, p in corpus_files.items()}, cfg.seed,
                      budgets=budgets, sr_mix_ratio=cfg.forge["sr_mix_ratio"])
        | {"forge_stats": stats},
        indent=1, sort_keys=True) + "\n")
    write_manifest(plan_path, "forge", cfg.to_json(), cfg.seed, {},
                   {p.name: p for p in corpus_files.values()} | {plan_path.name: plan_path},
                   {"method": method, **{f"stats_{k}": v for k, v in stats.items()}})
    return plan


def load_plan(plan_path: str | Path) -> TrainingPlan:
    """Rebuild a training plan from its manifest plus the corpus files."""
    plan_path = Path(plan_path)
    spec = json.loads(plan_path.read_text(encoding="utf-8"))
    from .substrate import read_examples

    corpora = {
        role: read_examples(plan_path.parent / fname)
        for role, fname in spec["corpus_paths"].items()
    }
    budgets = Budgets(**spec["budgets"])
    return make_training_plan(
        spec["recipe"], budgets, corpora,
        sr_mix_ratio=spec.get("sr_mix_ratio", 1.0),
        rng=RngStream(spec["seed"], "plan"),
    )


def stage_train(cfg: Config, plan: TrainingPlan, init_ckpt: Path, method: str,
                workdir: Path) -> Path:
    init = load_checkpoint(init_ckpt)
    params, optstate, log = train(
        plan, init.params, init.tokenizer, init.cfg,
        RngStream(cfg.seed, f"train-{method}"),
        cfg.train["batch"], optim_hyper(cfg),
    )
    path = workdir / f"{method}.ckpt"
    save_checkpoint(path, init.tokenizer, init.cfg, params, optstate,
                    meta={"method": method, "seed": cfg.seed,
                          "total_updates": plan.total_updates})
    losses_path = workdir / f"{method}_losses.jsonl"
    write_jsonl([e.to_json() for e in log], losses_path)
    write_manifest(path, "train", cfg.to_json(), cfg.seed,
                   {"init.ckpt": init_ckpt},
                   {f"{method}.ckpt": path, losses_path.name: losses_path},
                   {"method": method, "updates": len(log),
                    "final_loss": log[-1].loss if log else None})
    return path


def stage_rl(cfg: Config, env: Environment, train_tasks, init_from: Path,
             method: str, workdir: Path) -> tuple[Path, Path, dict]:
    ckpt = load_checkpoint(init_from)
    gcfg = grpo_config(cfg, env)
    params, curve, info = rl_train(
        env, list(train_tasks), ckpt.params, ckpt.tokenizer, ckpt.cfg, gcfg,
        RngStream(cfg.seed, f"rl-{method}"),
    )
    path = workdir / f"{method}+rl.ckpt"
    save_checkpoint(path, ckpt.tokenizer, ckpt.cfg, params,
                    meta={"method": f"{method}+rl", "seed": cfg.seed,
                          "grpo_cfg_hash": info["cfg_hash"]})
    curve_path = workdir / f"{method}_rl_curve.csv"
    rows = ["update,mean_reward,std_reward"] + [p.to_csv_row() for p in curve]
    curve_path.write_text("\n".join(rows) + "\n")
    write_manifest(path, "rl", cfg.to_json(), cfg.seed, {"init": init_from},
                   {path.name: path, curve_path.name: curve_path},
                   {"cfg_hash": info["cfg_hash"], "updates": gcfg.updates})
    return path, curve_path, info


def stage_eval(cfg: Config, env: Environment, checkpoints: dict[str, Path],
               split: TaskSplit, split_name: str, workdir: Path,
               eval_seed: int = 0):
    loaded = {m: load_checkpoint(p) for m, p in checkpoints.items()}
    tasks = list(split.bucket(split_name))
    n = cfg.eval["n_id"] if split_name == "id" else cfg.eval["n_ood"]
    max_steps = cfg.eval["max_steps"] or env.max_steps_default()
    reports = {}
    for method, ckpt in loaded.items():
        reports[method] = evaluate_split(
            env, ckpt, method, split_name, tasks, min(n, len(tasks)), eval_seed,
            max_steps, sampled=cfg.eval["sampled"], temperature=cfg.eval["temperature"],
        )
    table = render_comparison_table(list(reports.values()))
    out = workdir / f"eval_{split_name}.json"
    out.write_text(json.dumps({m: r.to_json() for m, r in reports.items()},
                              indent=1, sort_keys=True) + "\n")
    (workdir / f"eval_{split_name}.txt").write_text(table + "\n")
    write_manifest(out, "eval", cfg.to_json(), cfg.seed,
                   {m: p for m, p in checkpoints.items()},
                   {out.name: out},
                   {"split": split_name, "n_tasks": len(tasks)})
    return reports, table


# ------------------------------------------------------------------ drivers

def needs_rollout(method: str) -> bool:
    return method in ("iwm", "sr")


def run_experiment(cfg: Config, methods: list[str], workdir: str | Path,
                   splits: tuple[str, ...] = ("id",), k: int | None = None,
                   expert_fraction: float = 1.0) -> ExperimentArtifacts:
    """Shared-stage pipeline over one seed: tasks -> expert -> (rollout) ->
    per-method forge/train -> eval on the requested splits."""
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    env = make_env(cfg.env["name"], cfg.env["fixture"])

    tasks, split = stage_gen_tasks(cfg, env, workdir)
    train_tasks = list(split.train)
    expert, expert_path = stage_gen_expert(cfg, env, train_tasks, workdir,
                                           workdir / "tasks.jsonl")
    if expert_fraction < 1.0:
        keep = max(1, int(round(expert_fraction * len(expert))))
        expert = RngStream(cfg.seed, "expert-fraction").sample(expert, keep)
        expert.sort(key=lambda t: t.task_id)

    art = ExperimentArtifacts(
        cfg=cfg, workdir=workdir, env=env, tasks=tasks, split=split,
        expert=expert, init_ckpt_path=stage_init_checkpoint(cfg, env, expert, workdir),
    )

    triples = None
    if any(needs_rollout(m) for m in methods):
        art.triples_path = stage_rollout(cfg, env, art.tasks_by_id, expert,
                                         art.init_ckpt_path, workdir, k=k)
        from .substrate import read_triples

        triples = read_triples(art.triples_path)

    for method in methods:
        if method == "prompt-free-zero":
            art.checkpoints[method] = art.init_ckpt_path
            continue
        plan = stage_forge(cfg, env, art.tasks_by_id, expert, method, workdir,
                           triples=triples, star_ckpt=art.init_ckpt_path)
        art.plans[method] = plan
        art.checkpoints[method] = stage_train(cfg, plan, art.init_ckpt_path,
                                              method, workdir)

    for split_name in splits:
        reports, _ = stage_eval(cfg, env, art.checkpoints, split, split_name, workdir)
        for method, report in reports.items():
            art.reports[(method, split_name)] = report
    return art


def run_pipeline(cfg: Config, method: str, workdir: str | Path) -> dict:
    """CLI `pipeline` entry: one method end to end, returns a summary."""
    art = run_experiment(cfg, [method], workdir, splits=("id", "ood"))
    id_report = art.reports[(method, "id")]
    ood_report = art.reports[(method, "ood")]
    return {
        "method": method,
        "env": cfg.env["name"],
        "checkpoint": str(art.checkpoints[method]),
        "id_success_rate": id_report.success_rate,
        "id_native": id_report.native_metric(),
        "ood_native": ood_report.native_metric(),
        "workdir": str(art.workdir),
    }

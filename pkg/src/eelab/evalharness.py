"""Episode runner, native metrics, and the method comparison table.

Evaluation decoding is greedy by default (deterministic reports); sampled
evaluation is available behind a flag.  Aggregates are always recomputable
from the per-task records carried inside each report.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .envs import OPEN_ACTION_SPACE, Environment
from .errors import TokenizerMismatch
from .model import Checkpoint, greedy_action, sample_action
from .substrate import ActionText, RngStream, Step, TaskSpec, Trajectory
from .utils import parallel_map

METHOD_ORDER = ("prompt-free-zero", "il", "iwm", "sr", "star")
METHOD_LABELS = {
    "prompt-free-zero": "Prompt",
    "il": "Imitation Learning",
    "iwm": "IWM",
    "sr": "SR",
    "star": "STaR",
}


def method_label(method: str) -> str:
    if method.endswith("+rl"):
        return METHOD_LABELS.get(method[:-3], method[:-3]) + " +RL"
    return METHOD_LABELS.get(method, method)


def native_metric_name(env_name: str) -> str:
    return "f1" if env_name == "hopqa" else "success_rate"


@dataclass
class EvalReport:
    env: str
    split: str
    method: str
    seed: int
    n_tasks: int
    success_rate: float          # percent
    mean_score: float            # percent
    f1: float | None             # percent, HopQA only
    per_task: list[dict] = field(default_factory=list)

    def native_metric(self) -> float:
        return self.f1 if self.env == "hopqa" else self.success_rate

    def recompute(self) -> tuple[float, float]:
        n = len(self.per_task)
        succ = 100.0 * sum(1 for r in self.per_task if r["success"]) / n if n else 0.0
        score = 100.0 * sum(r["score"] for r in self.per_task) / n if n else 0.0
        return succ, score

    def to_json(self) -> dict:
        return {
            "env": self.env,
            "split": self.split,
            "method": self.method,
            "seed": self.seed,
            "n_tasks": self.n_tasks,
            "success_rate": self.success_rate,
            "mean_score": self.mean_score,
            "f1": self.f1,
            "per_task": self.per_task,
        }


def run_episode(env: Environment, task: TaskSpec, ckpt: Checkpoint, max_steps: int,
                sampled: bool = False, temperature: float = 0.0,
                rng: RngStream | None = None):
    """One evaluation episode; truncation at max_steps counts as failure."""
    state = env.reset(task)
    steps: list[Step] = []
    for i in range(max_steps):
        if state.done:
            break
        admissible = env.admissible_actions(state)
        candidates = None if admissible == OPEN_ACTION_SPACE else admissible
        if sampled and temperature > 0.0:
            mode = "free" if candidates is None else "constrained"
            action = sample_action(ckpt.params, ckpt.tokenizer, ckpt.cfg, state.state_text,
                                   temperature, mode, rng.child(f"step-{i}"),
                                   candidates=candidates)
        else:
            action = greedy_action(ckpt.params, ckpt.tokenizer, ckpt.cfg,
                                   state.state_text, candidates)
        if action.is_empty:
            action = ActionText.of("look" if candidates is not None else "<answer>unknown</answer>")
        result = env.step(state, action)
        steps.append(Step(i, state.state_text, action, result.reward, result.done))
        state = result.next_state
    score = float(state.reward)
    success = state.done and score >= 1.0
    traj = Trajectory(
        task_id=task.task_id,
        env_name=env.name,
        source="policy",
        success=success,
        score=1.0 if success else score,
        steps=tuple(steps),
    )
    metrics = {"success": success, "score": score, "steps": len(steps), "done": state.done}
    return traj, metrics


def evaluate_split(env: Environment, ckpt: Checkpoint, method: str, split_name: str,
                   tasks: list[TaskSpec], n_tasks: int, seed: int, max_steps: int,
                   sampled: bool = False, temperature: float = 0.0) -> EvalReport:
    rng = RngStream(seed, f"eval-{env.name}-{split_name}-{method}")
    pool = list(tasks)
    if n_tasks < len(pool):
        pool = rng.child("subset").sample(pool, n_tasks)

    def one(task: TaskSpec) -> dict:
        _, metrics = run_episode(env, task, ckpt, max_steps, sampled, temperature,
                                 rng.child(f"task-{task.task_id}"))
        return {"task_id": task.task_id, "success": metrics["success"],
                "score": metrics["score"], "steps": metrics["steps"]}

    per_task = sorted(parallel_map(one, pool), key=lambda r: r["task_id"])
    n = len(per_task)
    success_rate = 100.0 * sum(1 for r in per_task if r["success"]) / n if n else 0.0
    mean_score = 100.0 * sum(r["score"] for r in per_task) / n if n else 0.0
    return EvalReport(
        env=env.name,
        split=split_name,
        method=method,
        seed=seed,
        n_tasks=n,
        success_rate=success_rate,
        mean_score=mean_score,
        f1=mean_score if env.name == "hopqa" else None,
        per_task=per_task,
    )


def evaluate(env: Environment, checkpoints: dict[str, Checkpoint], split_name: str,
             tasks: list[TaskSpec], n_tasks: int, seeds: list[int], max_steps: int,
             sampled: bool = False, temperature: float = 0.0):
    """Every method x seed on one split; returns (reports, comparison table)."""
    hashes = {m: c.tokenizer.vocab_hash() for m, c in checkpoints.items()}
    if len(set(hashes.values())) > 1:
        raise TokenizerMismatch(f"checkpoints disagree on vocabulary: {hashes}")
    reports = []
    for method in sorted(checkpoints, key=_method_sort_key):
        for seed in seeds:
            reports.append(evaluate_split(
                env, checkpoints[method], method, split_name, tasks, n_tasks,
                seed, max_steps, sampled, temperature,
            ))
    return reports, render_comparison_table(reports)


def _method_sort_key(method: str):
    base = method[:-3] if method.endswith("+rl") else method
    rank = METHOD_ORDER.index(base) if base in METHOD_ORDER else len(METHOD_ORDER)
    return (rank, method.endswith("+rl"))


def summarize_by_method(reports: list[EvalReport]) -> dict[str, dict]:
    """Seed-mean aggregates per method."""
    out: dict[str, dict] = {}
    for method in {r.method for r in reports}:
        mine = [r for r in reports if r.method == method]
        out[method] = {
            "success_rate": sum(r.success_rate for r in mine) / len(mine),
            "mean_score": sum(r.mean_score for r in mine) / len(mine),
            "f1": (sum(r.f1 for r in mine) / len(mine)) if mine[0].f1 is not None else None,
            "native": sum(r.native_metric() for r in mine) / len(mine),
            "seeds": sorted(r.seed for r in mine),
        }
    return out


def render_comparison_table(reports: list[EvalReport]) -> str:
    """Rows per method (Prompt / Imitation / IWM / SR pattern), deltas vs IL."""
    if not reports:
        return "(no reports)"
    env = reports[0].env
    summary = summarize_by_method(reports)
    baseline = summary.get("il", {}).get("native")
    headers = ["Method", "Success %", "Score %"]
    if env == "hopqa":
        headers.append("F1 %")
    headers.append("Delta vs IL")
    rows = []
    for method in sorted(summary, key=_method_sort_key):
        s = summary[method]
        row = [method_label(method), f"{s['success_rate']:.1f}", f"{s['mean_score']:.1f}"]
        if env == "hopqa":
            row.append(f"{s['f1']:.1f}")
        if baseline is None or method == "il":
            row.append("-")
        else:
            delta = s["native"] - baseline
            row.append(f"{delta:+.1f}")
        rows.append(row)
    widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(headers)]
    lines = [" | ".join(h.ljust(w) for h, w in zip(headers, widths))]
    lines.append("-+-".join("-" * w for w in widths))
    for row in rows:
        lines.append(" | ".join(c.ljust(w) for c, w in zip(row, widths)))
    return "\n".join(lines)

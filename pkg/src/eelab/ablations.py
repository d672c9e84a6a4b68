"""Data-fraction and branching-factor ablation drivers.

Both rerun the full forge -> train -> evaluate chain per setting and seed,
holding the update budget fixed, and emit plain CSV curves (plotting is out
of scope).  The branching ablation trains the imitation baseline once per
seed and carries it across K as a flat reference.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

from .config import Config, resolve_config
from .evalharness import EvalReport
from .pipeline import run_experiment

DATA_FRACTIONS = (0.125, 0.25, 0.5, 1.0)
BRANCH_FACTORS = (1, 2, 4, 8)


def _with_seed(cfg: Config, seed: int) -> Config:
    tree = cfg.to_json()
    tree["seed"] = seed
    return resolve_config(tree)


def _native(report: EvalReport) -> float:
    return report.native_metric()


def ablate_data_fraction(cfg: Config, methods: list[str], seeds: list[int],
                         workdir: str | Path,
                         fractions: tuple[float, ...] = DATA_FRACTIONS) -> dict:
    """Success-vs-demonstration-fraction curves at a fixed update budget."""
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    curves: dict[str, dict[float, list[float]]] = {
        m: {f: [] for f in fractions} for m in methods
    }
    rows = ["env,method,fraction,seed,native_metric"]
    for seed in seeds:
        seeded = _with_seed(cfg, seed)
        for fraction in fractions:
            run_dir = workdir / f"frac-{fraction}-seed-{seed}"
            art = run_experiment(seeded, methods, run_dir, splits=("id",),
                                 expert_fraction=fraction)
            for method in methods:
                value = _native(art.reports[(method, "id")])
                curves[method][fraction].append(value)
                rows.append(f"{cfg.env['name']},{method},{fraction},{seed},{value:.3f}")
    (workdir / "data_fraction.csv").write_text("\n".join(rows) + "\n")
    summary = {
        "fractions": list(fractions),
        "seeds": seeds,
        "curves": {
            m: {str(f): sum(v) / len(v) for f, v in by_f.items()}
            for m, by_f in curves.items()
        },
    }
    (workdir / "data_fraction.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    return {"curves": curves, "summary": summary}


def ablate_branching(cfg: Config, methods: list[str], seeds: list[int],
                     workdir: str | Path,
                     ks: tuple[int, ...] = BRANCH_FACTORS) -> dict:
    """Success-vs-K curves for rollout-based methods, IL as a flat reference."""
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    rollout_methods = [m for m in methods if m in ("iwm", "sr")]
    curves: dict[str, dict[int, list[float]]] = {
        m: {k: [] for k in ks} for m in rollout_methods
    }
    il_reference: list[float] = []
    corpus_sizes: dict[int, list[int]] = {k: [] for k in ks}
    rows = ["env,method,k,seed,native_metric"]
    per_k_seeds: dict[str, list[int]] = {str(k): list(seeds) for k in ks}

    for seed in seeds:
        seeded = _with_seed(cfg, seed)
        il_dir = workdir / f"il-seed-{seed}"
        il_art = run_experiment(seeded, ["il"], il_dir, splits=("id",))
        il_value = _native(il_art.reports[("il", "id")])
        il_reference.append(il_value)
        for k in ks:
            rows.append(f"{cfg.env['name']},il,{k},{seed},{il_value:.3f}")
        for k in ks:
            run_dir = workdir / f"k-{k}-seed-{seed}"
            art = run_experiment(seeded, rollout_methods, run_dir, splits=("id",), k=k)
            if art.plans.get("iwm") is not None:
                corpus_sizes[k].append(len(art.plans["iwm"].stages[0].corpus))
            for method in rollout_methods:
                value = _native(art.reports[(method, "id")])
                curves[method][k].append(value)
                rows.append(f"{cfg.env['name']},{method},{k},{seed},{value:.3f}")

    (workdir / "branching.csv").write_text("\n".join(rows) + "\n")
    summary = {
        "ks": list(ks),
        "per_k_seeds": per_k_seeds,
        "il_reference": sum(il_reference) / len(il_reference),
        "curves": {
            m: {str(k): sum(v) / len(v) for k, v in by_k.items()}
            for m, by_k in curves.items()
        },
        "iwm_corpus_sizes": {str(k): v for k, v in corpus_sizes.items()},
    }
    (workdir / "branching.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    return {"curves": curves, "il_reference": il_reference, "summary": summary,
            "corpus_sizes": corpus_sizes}

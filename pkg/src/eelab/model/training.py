"""Plan-driven training loop.

Executes plan stages in order with seeded per-epoch shuffling, one optimizer
step per batch, and a per-update loss log.  Determinism contract: the same
(plan, initial params, seed) produces a bitwise-identical loss curve and
final parameters on one platform.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..substrate import RngStream, TrainingExample
from .encoding import encode_example, make_batch
from .network import ModelConfig, PolicyParams, loss_and_grad
from .optim import OptimHyper, OptState, opt_step, stage_lr_scale
from .tokenizer import Tokenizer


@dataclass
class TrainLogEntry:
    stage: int
    update: int
    loss: float
    kind: str

    def to_json(self) -> dict:
        return {"stage": self.stage, "update": self.update, "loss": self.loss, "kind": self.kind}


def _stage_batches(n: int, batch_size: int, updates: int, rng: RngStream):
    """Yield `updates` index batches, reshuffling at each epoch boundary."""
    epoch = 0
    produced = 0
    while produced < updates:
        order = rng.child(f"epoch-{epoch}").shuffle(list(range(n)))
        for start in range(0, n, batch_size):
            if produced >= updates:
                return
            yield order[start: start + batch_size]
            produced += 1
        epoch += 1


def train(plan, params0: PolicyParams, tokenizer: Tokenizer, cfg: ModelConfig,
          rng: RngStream, batch_size: int, hyper: OptimHyper,
          optstate: OptState | None = None):
    """Run every plan stage; returns (params, optstate, log).

    Optimizer moments reset at stage boundaries: each stage is its own
    fine-tuning run, so moments estimated under the previous objective do
    not distort the next one.
    """
    params = params0.copy()
    state = optstate.copy() if optstate is not None else OptState.fresh(params)
    log: list[TrainLogEntry] = []
    update = 0
    for stage_idx, stage in enumerate(plan.stages):
        corpus: list[TrainingExample] = stage.corpus
        if stage.updates <= 0 or not corpus:
            continue
        if stage_idx > 0:
            state = OptState.fresh(params)
        encoded = [encode_example(tokenizer, cfg, ex) for ex in corpus]
        kinds = [ex.kind for ex in corpus]
        stage_rng = rng.child(f"stage-{stage_idx}")
        stage_update = 0
        for batch_idx in _stage_batches(len(corpus), batch_size, stage.updates, stage_rng):
            batch = make_batch([encoded[i] for i in batch_idx], tokenizer.pad_id,
                               kinds=[kinds[i] for i in batch_idx])
            loss, grads = loss_and_grad(params, batch, cfg)
            scale = stage_lr_scale(stage_update / max(1, stage.updates - 1), hyper.lr_floor)
            params = opt_step(params, grads, state, hyper, lr_scale=scale)
            log.append(TrainLogEntry(stage=stage_idx, update=update, loss=loss, kind=stage.name))
            update += 1
            stage_update += 1
    return params, state, log

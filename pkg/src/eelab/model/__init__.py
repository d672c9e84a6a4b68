from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .decode import greedy_action, sample_action, score_candidates
from .encoding import encode_example, make_batch, truncate_input_ids
from .gradcheck import grad_check, pick_coords
from .network import (
    Batch,
    ModelConfig,
    PolicyParams,
    forward_hidden,
    init_params,
    loss_and_grad,
    sequence_logprobs,
    weighted_logprob_and_grad,
)
from .optim import OptimHyper, OptState, opt_step
from .tokenizer import SPECIALS, Tokenizer, build_vocab, tokenize_text
from .training import TrainLogEntry, train

__all__ = [
    "Batch",
    "Checkpoint",
    "ModelConfig",
    "OptState",
    "OptimHyper",
    "PolicyParams",
    "SPECIALS",
    "Tokenizer",
    "TrainLogEntry",
    "build_vocab",
    "encode_example",
    "forward_hidden",
    "grad_check",
    "greedy_action",
    "init_params",
    "load_checkpoint",
    "loss_and_grad",
    "make_batch",
    "opt_step",
    "pick_coords",
    "sample_action",
    "save_checkpoint",
    "score_candidates",
    "sequence_logprobs",
    "tokenize_text",
    "train",
    "truncate_input_ids",
    "weighted_logprob_and_grad",
]

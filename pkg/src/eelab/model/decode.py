"""Candidate scoring and action decoding.

Closed-list environments rank or sample among admissible actions by exact
sequence log-probability; open environments decode token by token.  Scored
sequences include EOS, so candidate strings are disjoint events and their
probabilities sum to at most one.
"""

from __future__ import annotations

import numpy as np

from ..substrate import ActionText, RngStream
from .encoding import make_batch, truncate_input_ids
from .network import ModelConfig, PolicyParams, forward_hidden, logits_for, sequence_logprobs
from .tokenizer import Tokenizer

MAX_FREE_TOKENS = 64


def _prefix_ids(tokenizer: Tokenizer, cfg: ModelConfig, state_text: str) -> list[int]:
    return [tokenizer.bos_id] + truncate_input_ids(tokenizer, state_text, cfg.input_budget) + [tokenizer.sep_id]


def score_candidates(params: PolicyParams, tokenizer: Tokenizer, cfg: ModelConfig,
                     state_text: str, candidates: list[ActionText]):
    """Exact log-probability of each candidate (plus EOS) given the state.

    Returns (candidate, logprob) pairs sorted by descending log-probability,
    ties broken lexicographically on the canonical action.
    """
    if not candidates:
        raise ValueError("candidates must be nonempty")
    prefix = _prefix_ids(tokenizer, cfg, state_text)
    encoded = []
    for cand in candidates:
        cand_ids = tokenizer.encode(cand.canonical)[: cfg.max_target_tokens]
        ids = prefix + cand_ids + [tokenizer.eos_id]
        mask = [len(prefix) - 1 <= t < len(ids) - 1 for t in range(len(ids) - 1)]
        encoded.append((ids, mask))
    batch = make_batch(encoded, tokenizer.pad_id)
    token_logp = sequence_logprobs(params, batch, cfg)
    b_idx, _ = np.nonzero(batch.mask)
    scores = np.zeros(len(candidates))
    np.add.at(scores, b_idx, token_logp)
    order = sorted(range(len(candidates)), key=lambda i: (-scores[i], candidates[i].canonical))
    return [(candidates[i], float(scores[i])) for i in order]


def _decode_free(params: PolicyParams, tokenizer: Tokenizer, cfg: ModelConfig,
                 state_text: str, temperature: float, rng: RngStream | None,
                 max_new: int = MAX_FREE_TOKENS) -> ActionText:
    ids = _prefix_ids(tokenizer, cfg, state_text)
    emb_rows = [params.emb[i] for i in ids]
    out: list[int] = []
    gen = rng.generator if rng is not None else None
    for _ in range(max_new):
        t = len(emb_rows) - 1
        k = min(cfg.context, t + 1)
        stack = np.stack(emb_rows[t - k + 1: t + 1][::-1])     # offset 0 = current token
        ctx = (params.gain[:k] * stack).sum(axis=0)
        h = np.tanh(ctx @ params.w_h + params.b_h) if cfg.hidden else ctx
        logits = logits_for(params, h[None, :])[0]
        if temperature <= 0.0:
            tok = int(np.argmax(logits))
        else:
            z = logits / temperature
            z -= z.max()
            p = np.exp(z)
            p /= p.sum()
            tok = int(gen.choice(len(p), p=p))
        if tok == tokenizer.eos_id:
            break
        out.append(tok)
        emb_rows.append(params.emb[tok])
    return ActionText.of(tokenizer.decode(out))


def sample_actions_free_batch(params: PolicyParams, tokenizer: Tokenizer, cfg: ModelConfig,
                              state_text: str, n: int, temperature: float,
                              rng: RngStream, max_new: int = MAX_FREE_TOKENS) -> list[ActionText]:
    """n free-decoded samples from one state, decoded in lockstep."""
    if temperature <= 0.0:
        raise ValueError("batched free sampling requires temperature > 0")
    prefix = _prefix_ids(tokenizer, cfg, state_text)
    c = cfg.context
    buf = np.zeros((n, c, cfg.dim))            # buf[:, j] = embedding at offset j
    for j in range(min(c, len(prefix))):
        buf[:, j] = params.emb[prefix[-1 - j]]
    gen = rng.generator
    alive = np.ones(n, dtype=bool)
    outputs: list[list[int]] = [[] for _ in range(n)]
    for _ in range(max_new):
        ctx = np.einsum("njd,jd->nd", buf, params.gain[:c])
        h = np.tanh(ctx @ params.w_h + params.b_h) if cfg.hidden else ctx
        logits = logits_for(params, h) / temperature
        gumbel = gen.gumbel(size=logits.shape)
        toks = np.argmax(logits + gumbel, axis=1)
        for i in range(n):
            if alive[i]:
                if toks[i] == tokenizer.eos_id:
                    alive[i] = False
                else:
                    outputs[i].append(int(toks[i]))
        if not alive.any():
            break
        buf = np.roll(buf, 1, axis=1)
        buf[:, 0] = params.emb[toks]
    return [ActionText.of(tokenizer.decode(out)) for out in outputs]


def sample_action(params: PolicyParams, tokenizer: Tokenizer, cfg: ModelConfig,
                  state_text: str, temperature: float, mode: str, rng: RngStream | None,
                  candidates: list[ActionText] | None = None,
                  max_new: int = MAX_FREE_TOKENS) -> ActionText:
    """Decode one action; mode is "free" or "constrained" (candidate list)."""
    if mode == "free":
        return _decode_free(params, tokenizer, cfg, state_text, temperature, rng, max_new)
    if mode != "constrained":
        raise ValueError(f"unknown decode mode {mode!r}")
    if not candidates:
        raise ValueError("constrained decoding requires candidates")
    scored = score_candidates(params, tokenizer, cfg, state_text, candidates)
    if temperature <= 0.0:
        return scored[0][0]
    logps = np.array([lp for _, lp in scored]) / temperature
    logps -= logps.max()
    p = np.exp(logps)
    p /= p.sum()
    idx = int(rng.generator.choice(len(p), p=p))
    return scored[idx][0]


def greedy_action(params: PolicyParams, tokenizer: Tokenizer, cfg: ModelConfig,
                  state_text: str, candidates: list[ActionText] | None) -> ActionText:
    if candidates is None:
        return _decode_free(params, tokenizer, cfg, state_text, 0.0, None)
    return score_candidates(params, tokenizer, cfg, state_text, candidates)[0][0]

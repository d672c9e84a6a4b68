"""Fixed-context autoregressive model with hand-derived gradients.

Each position attends to at most the last `context` token embeddings through
per-offset diagonal gains, optionally passes through one tanh hidden layer,
and projects to vocabulary logits.  One masked cross-entropy over target
tokens implements every training objective in the pipeline; the mask decides
what is being imitated or predicted.

The loss only ever needs logits at masked positions, so the forward/backward
pass gathers context windows for exactly those rows instead of materializing
hidden states across the whole sequence.

All math runs in float64.  "Zero" initialization means the output head and
biases are zero, so logits are exactly zero (uniform distribution, per-token
loss ln V) while the inner layers carry small seeded values that keep the
model trainable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NonFiniteLoss
from ..substrate import RngStream

PARAM_NAMES = ("emb", "gain", "w_h", "b_h", "w_o", "b_o")


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    dim: int = 64
    context: int = 64
    hidden: bool = True
    max_target_tokens: int = 72
    # Input tokens per example; the remaining window slots keep the pinned
    # goal line visible while early target tokens are predicted.
    input_budget: int = 40

    def to_json(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "dim": self.dim,
            "context": self.context,
            "hidden": self.hidden,
            "max_target_tokens": self.max_target_tokens,
            "input_budget": self.input_budget,
        }

    @classmethod
    def from_json(cls, rec: dict) -> "ModelConfig":
        return cls(**rec)


@dataclass
class PolicyParams:
    emb: np.ndarray   # (V, d)
    gain: np.ndarray  # (C, d)
    w_h: np.ndarray   # (d, d)
    b_h: np.ndarray   # (d,)
    w_o: np.ndarray   # (d, V)
    b_o: np.ndarray   # (V,)

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self) -> "PolicyParams":
        return PolicyParams(**{k: v.copy() for k, v in self.arrays().items()})

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.arrays().items()}

    def n_parameters(self) -> int:
        return sum(v.size for v in self.arrays().values())

    def all_finite(self) -> bool:
        return all(np.isfinite(v).all() for v in self.arrays().values())


def init_params(cfg: ModelConfig, rng: RngStream) -> PolicyParams:
    """Zero output head (uniform logits), small seeded inner layers."""
    g = rng.child("params")
    base = 0.5 / np.sqrt(1.0 + np.arange(cfg.context, dtype=np.float64))
    gain = base[:, None] * (1.0 + g.normal((cfg.context, cfg.dim), 0.05))
    return PolicyParams(
        emb=g.normal((cfg.vocab_size, cfg.dim), 0.3),
        gain=gain,
        w_h=g.normal((cfg.dim, cfg.dim), 0.1),
        b_h=np.zeros(cfg.dim),
        w_o=np.zeros((cfg.dim, cfg.vocab_size)),
        b_o=np.zeros(cfg.vocab_size),
    )


@dataclass
class Batch:
    """Padded token ids with a loss mask over predicted positions.

    mask[b, t] supervises the prediction of ids[b, t+1]; it is zero on input
    and pad positions.  Every example carries at least one masked position.
    """

    ids: np.ndarray    # (B, T) int64
    mask: np.ndarray   # (B, T-1) bool
    kinds: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.ids.ndim != 2 or self.mask.shape != (self.ids.shape[0], self.ids.shape[1] - 1):
            raise ValueError("batch shape mismatch")
        if not self.mask.any(axis=1).all():
            raise ValueError("every example needs at least one masked target token")

    @property
    def n_masked(self) -> int:
        return int(self.mask.sum())


def _scatter_add_rows(target: np.ndarray, row_ids: np.ndarray, rows: np.ndarray) -> None:
    """target[row_ids[i]] += rows[i], fast for repeated ids (sort + reduceat)."""
    order = np.argsort(row_ids, kind="stable")
    sorted_ids = row_ids[order]
    sorted_rows = rows[order]
    starts = np.concatenate([[0], np.nonzero(np.diff(sorted_ids))[0] + 1])
    sums = np.add.reduceat(sorted_rows, starts, axis=0)
    np.add.at(target, sorted_ids[starts], sums)


def _span_layout(rows_b: np.ndarray, rows_t: np.ndarray, batch_size: int):
    """Per-example (start, count) when each example's rows are one contiguous
    ascending span in row-major order; None otherwise."""
    counts = np.bincount(rows_b, minlength=batch_size)
    if (counts == 0).any():
        return None
    ends = np.cumsum(counts)
    begins = ends - counts
    t0 = rows_t[begins]
    t_last = rows_t[ends - 1]
    if not ((t_last - t0 + 1) == counts).all():
        return None
    order = np.arange(len(rows_b))
    expected_t = t0[rows_b] + (order - begins[rows_b])
    if not (expected_t == rows_t).all():
        return None
    return t0, counts


def _rows_forward(params: PolicyParams, ids: np.ndarray, cfg: ModelConfig,
                  rows_b: np.ndarray, rows_t: np.ndarray):
    """Hidden rows (M, d) at the selected positions, plus the backward cache."""
    c = min(cfg.context, ids.shape[1])
    layout = _span_layout(rows_b, rows_t, ids.shape[0])
    if layout is not None:
        ctx, cache = _span_ctx_forward(params, ids, c, rows_b, rows_t, layout)
    else:
        ctx, cache = _dense_ctx_forward(params, ids, c, rows_b, rows_t)
    if cfg.hidden:
        h = np.tanh(ctx @ params.w_h + params.b_h)
    else:
        h = ctx
    cache.update({"ctx": ctx, "h": h, "c": c})
    return h, cache


def _dense_ctx_forward(params, ids, c, rows_b, rows_t):
    offsets = np.arange(c)
    pos = rows_t[:, None] - offsets[None, :]
    valid = pos >= 0
    pos = np.maximum(pos, 0)
    win_ids = ids[rows_b[:, None], pos]
    win = params.emb[win_ids]
    if not valid.all():
        win = win * valid[:, :, None]
    ctx = np.einsum("mjd,jd->md", win, params.gain[:c])
    return ctx, {"mode": "dense", "win": win, "win_ids": win_ids, "valid": valid}


_FFT_MIN_ROWS = 24  # below this the direct loop beats transform overhead


def _span_ctx_forward(params, ids, c, rows_b, rows_t, layout):
    """Shared-strip context: rows of one example overlap in all but one token."""
    t0, counts = layout
    B, T = ids.shape
    n_max = int(counts.max())
    span = c + n_max - 1
    start = t0 - c + 1                                     # may be negative
    grid = start[:, None] + np.arange(span)[None, :]       # (B, span)
    strip_valid = (grid >= 0) & (grid <= (t0 + counts - 1)[:, None])
    grid_c = np.clip(grid, 0, T - 1)
    strip_ids = ids[np.arange(B)[:, None], grid_c]
    strip = params.emb[strip_ids]
    if not strip_valid.all():
        strip = strip * strip_valid[:, :, None]
    d = strip.shape[2]
    gain = params.gain
    cache = {"mode": "span", "strip": strip, "strip_ids": strip_ids,
             "strip_valid": strip_valid, "counts": counts, "rows_b": rows_b,
             "n_max": n_max, "fft": n_max >= _FFT_MIN_ROWS}
    if cache["fft"]:
        # ctx_full[b, i] = conv(strip_b, gain)[i + c - 1] along time, per dim.
        L = 1 << int(np.ceil(np.log2(span + c - 1)))
        f_strip = np.fft.rfft(strip, L, axis=1)
        f_gain = np.fft.rfft(gain[:c], L, axis=0)
        conv = np.fft.irfft(f_strip * f_gain[None], L, axis=1)
        ctx_full = conv[:, c - 1: c - 1 + n_max]
        cache["fft_len"] = L
        cache["f_strip"] = f_strip
    else:
        ctx_full = np.zeros((B, n_max, d))
        for r in range(c):
            ctx_full += gain[c - 1 - r] * strip[:, r: r + n_max, :]
    row_i = np.arange(len(rows_b)) - (np.cumsum(counts) - counts)[rows_b]
    ctx = ctx_full[rows_b, row_i]
    cache["row_i"] = row_i
    return ctx, cache


def _rows_backward(params: PolicyParams, cfg: ModelConfig, cache: dict,
                   dlogits: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of a scalar whose dlogits at the selected rows are given."""
    h, ctx = cache["h"], cache["ctx"]
    grads = params.zeros_like()
    grads["w_o"] = h.T @ dlogits
    grads["b_o"] = dlogits.sum(axis=0)
    dh = dlogits @ params.w_o.T
    if cfg.hidden:
        dpre = dh * (1.0 - h * h)
        grads["w_h"] = ctx.T @ dpre
        grads["b_h"] = dpre.sum(axis=0)
        dctx = dpre @ params.w_h.T
    else:
        dctx = dh
    c = cache["c"]
    if cache["mode"] == "dense":
        win, win_ids, valid = cache["win"], cache["win_ids"], cache["valid"]
        grads["gain"][:c] = np.einsum("mjd,md->jd", win, dctx)
        dwin = dctx[:, None, :] * params.gain[:c][None, :, :]
        if not valid.all():
            dwin = dwin * valid[:, :, None]
        _scatter_add_rows(grads["emb"], win_ids.ravel(), dwin.reshape(-1, win.shape[2]))
        return grads

    strip, strip_ids = cache["strip"], cache["strip_ids"]
    counts, rows_b, row_i, n_max = cache["counts"], cache["rows_b"], cache["row_i"], cache["n_max"]
    B, span, d = strip.shape
    dctx_full = np.zeros((B, n_max, d))
    dctx_full[rows_b, row_i] = dctx
    gain = params.gain
    dgain = grads["gain"]
    if cache["fft"]:
        L = cache["fft_len"]
        f_dctx = np.fft.rfft(dctx_full, L, axis=1)
        # dstrip[s] = conv(dctx, gain[::-1])[s]
        f_krev = np.fft.rfft(gain[:c][::-1], L, axis=0)
        dstrip = np.fft.irfft(f_dctx * f_krev[None], L, axis=1)[:, :span]
        # dgain[c-1-r] = sum_b crosscorr(strip_b, dctx_b)[r]
        cc = np.fft.irfft(cache["f_strip"] * np.conj(f_dctx), L, axis=1)
        dgain[:c] = cc[:, :c].sum(axis=0)[::-1]
    else:
        dstrip = np.zeros_like(strip)
        for r in range(c):
            seg = strip[:, r: r + n_max, :]
            dgain[c - 1 - r] = (seg * dctx_full).sum(axis=(0, 1))
            dstrip[:, r: r + n_max, :] += gain[c - 1 - r] * dctx_full
    if not cache["strip_valid"].all():
        dstrip *= cache["strip_valid"][:, :, None]
    _scatter_add_rows(grads["emb"], strip_ids.ravel(), dstrip.reshape(-1, d))
    return grads


def logits_for(params: PolicyParams, h_rows: np.ndarray) -> np.ndarray:
    return h_rows @ params.w_o + params.b_o


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _label_logp_and_probs(logits: np.ndarray, labels: np.ndarray):
    """Label log-probabilities plus the full softmax, one exp pass."""
    z = logits - logits.max(axis=-1, keepdims=True)
    np.exp(z, out=logits)                     # reuse the buffer
    total = logits.sum(axis=-1, keepdims=True)
    m = len(labels)
    label_logp = z[np.arange(m), labels] - np.log(total[:, 0])
    logits /= total                           # now holds softmax probs
    return label_logp, logits


def _masked_rows(batch: Batch):
    b_idx, t_idx = np.nonzero(batch.mask)
    labels = batch.ids[b_idx, t_idx + 1]
    return b_idx, t_idx, labels


def loss_and_grad(params: PolicyParams, batch: Batch, cfg: ModelConfig):
    """Mean NLL over masked target tokens and its exact gradient."""
    b_idx, t_idx, labels = _masked_rows(batch)
    h, cache = _rows_forward(params, batch.ids, cfg, b_idx, t_idx)
    label_logp, probs = _label_logp_and_probs(logits_for(params, h), labels)
    m = len(b_idx)
    loss = float(-label_logp.mean())
    if not np.isfinite(loss):
        raise NonFiniteLoss(f"loss is {loss}")
    dlogits = probs
    dlogits[np.arange(m), labels] -= 1.0
    dlogits /= m
    return loss, _rows_backward(params, cfg, cache, dlogits)


def weighted_logprob_and_grad(params: PolicyParams, batch: Batch, cfg: ModelConfig,
                              weights: np.ndarray, normalizer: float):
    """value = sum_i w_i * logp(label_i) / normalizer, with its exact gradient.

    `weights` aligns with the masked positions in row-major (batch, position)
    order.  Used by the policy-gradient stage, where the weights carry
    advantage x ratio terms treated as constants.
    """
    b_idx, t_idx, labels = _masked_rows(batch)
    if len(weights) != len(b_idx):
        raise ValueError("one weight per masked token required")
    h, cache = _rows_forward(params, batch.ids, cfg, b_idx, t_idx)
    label_logp, probs = _label_logp_and_probs(logits_for(params, h), labels)
    m = len(b_idx)
    value = float((weights * label_logp).sum() / normalizer)
    if not np.isfinite(value):
        raise NonFiniteLoss(f"objective is {value}")
    scale = (weights / normalizer)[:, None]
    dlogits = probs
    dlogits *= -scale
    dlogits[np.arange(m), labels] += weights / normalizer
    return value, _rows_backward(params, cfg, cache, dlogits)


def sequence_logprobs(params: PolicyParams, batch: Batch, cfg: ModelConfig) -> np.ndarray:
    """Per-masked-token label log-probabilities, row-major over the mask."""
    b_idx, t_idx, labels = _masked_rows(batch)
    h, _ = _rows_forward(params, batch.ids, cfg, b_idx, t_idx)
    logits = logits_for(params, h)
    z = logits - logits.max(axis=-1, keepdims=True)
    total = np.exp(z).sum(axis=-1)
    return z[np.arange(len(b_idx)), labels] - np.log(total)


def forward_hidden(params: PolicyParams, ids: np.ndarray, cfg: ModelConfig):
    """Hidden states at every position (diagnostic path; training uses rows)."""
    B, T = ids.shape
    rows_b, rows_t = np.nonzero(np.ones((B, T), dtype=bool))
    h, cache = _rows_forward(params, ids, cfg, rows_b, rows_t)
    return h.reshape(B, T, -1), cache

"""Adaptive-moment optimizer with bias correction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import PolicyParams


@dataclass(frozen=True)
class OptimHyper:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    # Linear decay floor: lr anneals to lr * lr_floor across a stage.
    lr_floor: float = 0.1

    def to_json(self) -> dict:
        return {"lr": self.lr, "beta1": self.beta1, "beta2": self.beta2,
                "eps": self.eps, "lr_floor": self.lr_floor}


@dataclass
class OptState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def fresh(cls, params: PolicyParams) -> "OptState":
        return cls(m=params.zeros_like(), v=params.zeros_like(), step=0)

    def copy(self) -> "OptState":
        return OptState(
            m={k: a.copy() for k, a in self.m.items()},
            v={k: a.copy() for k, a in self.v.items()},
            step=self.step,
        )


def opt_step(params: PolicyParams, grads: dict[str, np.ndarray],
             state: OptState, hyper: OptimHyper, lr_scale: float = 1.0) -> PolicyParams:
    """One update; returns new params and mutates the optimizer state."""
    state.step += 1
    t = state.step
    bc1 = 1.0 - hyper.beta1 ** t
    bc2 = 1.0 - hyper.beta2 ** t
    lr = hyper.lr * lr_scale
    new = {}
    for name, value in params.arrays().items():
        g = grads[name]
        state.m[name] = hyper.beta1 * state.m[name] + (1.0 - hyper.beta1) * g
        state.v[name] = hyper.beta2 * state.v[name] + (1.0 - hyper.beta2) * (g * g)
        m_hat = state.m[name] / bc1
        v_hat = state.v[name] / bc2
        new[name] = value - lr * m_hat / (np.sqrt(v_hat) + hyper.eps)
    return PolicyParams(**new)


def stage_lr_scale(progress: float, floor: float) -> float:
    """Linear anneal from 1 to `floor` as progress goes 0 -> 1."""
    progress = min(max(progress, 0.0), 1.0)
    return 1.0 - (1.0 - floor) * progress

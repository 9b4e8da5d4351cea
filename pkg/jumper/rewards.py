from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from jumper.types import FloatArray

if TYPE_CHECKING:
    from jumper.model import EpisodeTrace, SymbolicState

logger = logging.getLogger(__name__)


@dataclass
class RewardConfig:
    intermediate_r: float = 0.05
    gamma: float = 0.9
    epsilon: float = 0.1
    baseline_samples: int = 5
    truncate_negative: bool = True

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1]: {self.gamma}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1]: {self.epsilon}")
        if self.intermediate_r < 0.0:
            raise ValueError(f"intermediate_r must be non-negative: {self.intermediate_r}")
        if self.baseline_samples < 1:
            raise ValueError(f"baseline_samples must be >= 1: {self.baseline_samples}")


def final_reward(pred: int, gold: int) -> float:
    return 1.0 if pred == gold else 0.0


def intermediate_reward(state: SymbolicState, cfg: RewardConfig) -> float:
    return cfg.intermediate_r if state.is_none else 0.0


def cumulative_reward(
    trace: EpisodeTrace, slot: str, t: int, gold: int, cfg: RewardConfig
) -> float:
    """Discounted intermediate rewards from step t to the jump step, plus the final reward"""
    jump_step = trace.jump_steps[slot]
    if not 1 <= t <= jump_step:
        raise ValueError(f"Step {t} is outside [1, {jump_step}] for slot '{slot}'")

    total = 0.0
    for step in range(t, jump_step + 1):
        total += cfg.gamma ** (step - t) * intermediate_reward(trace.state(slot, step), cfg)
    return total + final_reward(trace.final_state(slot).index, gold)


def reward_to_go(trace: EpisodeTrace, slot: str, gold: int, cfg: RewardConfig) -> FloatArray:
    """Cumulative rewards for steps 1..T_jump by backward recursion

    R_T_jump = r(T_jump) + R_final, R_t = r(t) + gamma * (R_{t+1} - R_final) + R_final.
    """
    jump_step = trace.jump_steps[slot]
    r_final = final_reward(trace.final_state(slot).index, gold)

    returns = np.zeros(jump_step)
    discounted = 0.0
    for t in range(jump_step, 0, -1):
        discounted = intermediate_reward(trace.state(slot, t), cfg) + cfg.gamma * discounted
        returns[t - 1] = discounted + r_final
    return returns


def sample_action(dist: FloatArray, epsilon: float, rng: np.random.Generator) -> int:
    """Sample from `dist`, or uniformly over all actions with probability `epsilon`"""
    num_actions = len(dist)
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(num_actions))
    cdf = np.cumsum(dist, dtype=np.float64)
    action = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(action, num_actions - 1)

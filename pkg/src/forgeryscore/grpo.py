"""Group-relative advantages for GRPO rollouts.

Within each group of rollouts for the same prompt:
``A_i = (r_i - mean(r)) / (std(r) + eps)`` with the population standard
deviation.
"""

from __future__ import annotations

import math
from typing import Hashable, Optional, Sequence

import numpy as np

from .errors import GroupTooSmall, ShapeMismatch

DEFAULT_EPSILON = 1e-6


def group_advantages(rewards: Sequence[float], epsilon: float = DEFAULT_EPSILON) -> list[float]:
    if len(rewards) < 2:
        raise GroupTooSmall(f"a group needs at least 2 rewards, got {len(rewards)}")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    r = np.asarray(rewards, dtype=np.float64)
    if not np.all(np.isfinite(r)):
        raise ValueError("rewards must be finite")
    if np.all(r == r[0]):
        # Exact zeros; the float mean of a constant group can be off by an ulp.
        return [0.0] * len(r)
    mean = math.fsum(r) / len(r)
    centered = r - mean
    std = math.sqrt(math.fsum(centered * centered) / len(r))
    return (centered / (std + epsilon)).tolist()


def batch_advantages(
    rewards: Sequence[float],
    group_size: int,
    epsilon: float = DEFAULT_EPSILON,
) -> list[float]:
    """Apply :func:`group_advantages` to consecutive groups of ``group_size``."""
    if group_size < 1 or len(rewards) % group_size:
        raise ShapeMismatch(f"{len(rewards)} rewards cannot be split into groups of {group_size}")
    out: list[float] = []
    for i in range(0, len(rewards), group_size):
        out.extend(group_advantages(rewards[i : i + group_size], epsilon))
    return out


def grouped_advantages(
    rewards: Sequence[float],
    group_ids: Sequence[Hashable],
    epsilon: float = DEFAULT_EPSILON,
) -> list[float]:
    """Normalise within groups named by ``group_ids``; output stays aligned with the input."""
    if len(rewards) != len(group_ids):
        raise ShapeMismatch("rewards and group ids differ in length")
    members: dict[Hashable, list[int]] = {}
    for i, g in enumerate(group_ids):
        members.setdefault(g, []).append(i)
    out: list[Optional[float]] = [None] * len(rewards)
    for idx in members.values():
        for i, a in zip(idx, group_advantages([rewards[i] for i in idx], epsilon)):
            out[i] = a
    return out  # type: ignore[return-value]

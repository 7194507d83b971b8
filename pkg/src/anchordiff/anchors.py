"""Anchor indicators and depth-decayed anchor weights.

A position's weight is mu(l) = omega(l) * eta(l): omega flags which tokens
are anchors under the chosen strategy, and eta decays exponentially with
tree depth, eta(l) = gamma * exp(-beta * max(depth(l) - d0, 0)). With
beta = 0 every anchor gets the flat weight gamma (hard anchoring).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .hierarchy import TokenAnnotation


class AnchorStrategy(enum.Enum):
    NULL = "null"
    KEYWORD = "keyword"
    IDENTIFIER = "identifier"
    ANCHOR_TREE = "anchor_tree"


# Tuned supervision weights per strategy; the hard strategies use beta = 0.
_DEFAULT_GAMMA = {
    AnchorStrategy.ANCHOR_TREE: 0.03,
    AnchorStrategy.KEYWORD: 0.1,
    AnchorStrategy.IDENTIFIER: 0.01,
    AnchorStrategy.NULL: 0.0,
}
_DEFAULT_BETA = {
    AnchorStrategy.ANCHOR_TREE: 0.7,
    AnchorStrategy.KEYWORD: 0.0,
    AnchorStrategy.IDENTIFIER: 0.0,
    AnchorStrategy.NULL: 0.0,
}
DEFAULT_D0 = 2


def default_gamma(strategy: AnchorStrategy) -> float:
    return _DEFAULT_GAMMA[strategy]


def default_beta(strategy: AnchorStrategy) -> float:
    return _DEFAULT_BETA[strategy]


@dataclass(frozen=True)
class AnchorConfig:
    strategy: AnchorStrategy
    gamma: float
    beta: float
    d0: int = DEFAULT_D0

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.d0 < 0:
            raise ValueError("d0 must be >= 0")

    @classmethod
    def for_strategy(
        cls,
        strategy: AnchorStrategy | str,
        gamma: float | None = None,
        beta: float | None = None,
        d0: int = DEFAULT_D0,
    ) -> "AnchorConfig":
        """Config with the strategy's tuned gamma/beta unless overridden."""
        if isinstance(strategy, str):
            strategy = AnchorStrategy(strategy)
        return cls(
            strategy=strategy,
            gamma=default_gamma(strategy) if gamma is None else gamma,
            beta=default_beta(strategy) if beta is None else beta,
            d0=d0,
        )


@dataclass(frozen=True)
class AnchorWeights:
    """Per-position anchor data: omega indicator, eta schedule, mu weight,
    and the anchor target token id (the clean token at anchors, the mask
    id elsewhere)."""

    omega: np.ndarray
    eta: np.ndarray
    mu: np.ndarray
    anchor_target: np.ndarray


def compute_omega(
    annotations: list[TokenAnnotation], config: AnchorConfig
) -> np.ndarray:
    """0/1 anchor indicator per position under the configured strategy."""
    strategy = config.strategy
    out = np.zeros(len(annotations), dtype=np.int8)
    if strategy is AnchorStrategy.NULL:
        return out
    for i, ann in enumerate(annotations):
        if strategy is AnchorStrategy.KEYWORD:
            flag = ann.is_keyword
        elif strategy is AnchorStrategy.IDENTIFIER:
            flag = ann.is_identifier
        else:  # ANCHOR_TREE
            flag = ann.is_keyword or ann.is_identifier
        out[i] = 1 if flag else 0
    return out


def eta_for_depth(depth: int, config: AnchorConfig) -> float:
    return config.gamma * math.exp(-config.beta * max(depth - config.d0, 0))


def compute_eta(
    annotations: list[TokenAnnotation], config: AnchorConfig
) -> np.ndarray:
    """Depth-decay schedule per position; depends only on node depth."""
    return np.array(
        [eta_for_depth(ann.depth, config) for ann in annotations], dtype=np.float64
    )


def compute_anchor_targets(
    token_ids: np.ndarray, omega: np.ndarray, mask_id: int
) -> np.ndarray:
    """Anchor labels: the clean token where omega = 1, the mask id where
    omega = 0 (inert there, since mu = 0 removes the term anyway)."""
    token_ids = np.asarray(token_ids)
    if len(token_ids) != len(omega):
        raise ValueError("token_ids and omega must align")
    return np.where(np.asarray(omega) == 1, token_ids, mask_id)


def compute_weights(
    annotations: list[TokenAnnotation],
    token_ids: np.ndarray,
    config: AnchorConfig,
    mask_id: int,
) -> AnchorWeights:
    """Bundle omega, eta, mu, and anchor targets for one sequence."""
    omega = compute_omega(annotations, config)
    eta = compute_eta(annotations, config)
    mu = omega * eta
    target = compute_anchor_targets(token_ids, omega, mask_id)
    return AnchorWeights(omega=omega, eta=eta, mu=mu, anchor_target=target)

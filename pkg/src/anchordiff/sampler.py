"""Reverse-time generation with anchor-first scheduling and remasking.

Each reverse step draws its unmask budget from Binomial(#masked,
unmask_prob(i)) - the same count distribution as independent per-position
coins - and spends it anchors-first in descending anchor weight, then on
uniformly shuffled non-anchor positions. Commits within a step are made one
at a time, each conditioned on the commits before it, so table-based
predictors are never queried outside their support. With the Null strategy
the loop reduces to the plain masked-diffusion reverse process.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .anchors import AnchorConfig, AnchorStrategy
from .diffusion import (
    LatentSequence,
    as_rng,
    sample_categorical,
    temper_row,
)
from .schedule import NoiseSchedule, unmask_prob


@dataclass(frozen=True)
class SamplerConfig:
    T: int
    temperature: float = 0.8
    remask_rate: float = 0.0
    strategy: AnchorConfig = field(
        default_factory=lambda: AnchorConfig.for_strategy(AnchorStrategy.NULL)
    )
    seed: int = 0

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if not 0.0 <= self.remask_rate <= 1.0:
            raise ValueError("remask_rate must lie in [0, 1]")
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")


def default_remask_rate(strategy: AnchorStrategy) -> float:
    """Anchored sampling defaults to a 0.1 remask rate; baselines to 0."""
    return 0.0 if strategy is AnchorStrategy.NULL else 0.1


@dataclass(frozen=True)
class TraceEvent:
    position: int
    step: int
    event: str  # "unmask" | "remask"
    token: int
    stage: str  # "anchor" | "denoise"


class DenoiseTrace:
    """Chronological unmask/remask events plus the final sequence."""

    def __init__(self, T: int, length: int):
        self.T = T
        self.length = length
        self.events: list[TraceEvent] = []
        self.final: np.ndarray | None = None

    def record(self, position: int, step: int, event: str, token: int, stage: str) -> None:
        self.events.append(TraceEvent(position, step, event, token, stage))

    def events_for(self, position: int) -> list[TraceEvent]:
        return [e for e in self.events if e.position == position]

    def final_unmask_step(self, position: int) -> int | None:
        step = None
        for e in self.events:
            if e.position == position and e.event == "unmask":
                step = e.step
        return step

    def to_jsonl(self) -> str:
        lines = [
            json.dumps(
                {
                    "pos": e.position,
                    "step": e.step,
                    "event": e.event,
                    "token": e.token,
                    "stage": e.stage,
                },
                sort_keys=True,
                separators=(",", ":"),
            )
            for e in self.events
        ]
        return "\n".join(lines) + ("\n" if lines else "")


@dataclass
class SingleStage:
    """Plain one-predictor reverse process (the Null / MDLM path)."""

    predictor: object

    @property
    def vocab(self):
        return self.predictor.vocab

    @property
    def anchored(self) -> bool:
        return False


@dataclass
class AnchoredPair:
    """Anchor and denoiser predictors plus the per-position anchor profile
    used to schedule anchor-first unmasking at inference time."""

    anchor: object
    denoiser: object
    profile: object  # callable: LatentSequence -> (omega_hat, eta_hat)

    @property
    def vocab(self):
        return self.denoiser.vocab

    @property
    def anchored(self) -> bool:
        return True


def generate(
    prompt: np.ndarray | list[int],
    length: int,
    predictors: SingleStage | AnchoredPair,
    config: SamplerConfig,
    schedule: NoiseSchedule,
    rng: np.random.Generator | int | None = None,
) -> tuple[np.ndarray, DenoiseTrace]:
    """Run the full reverse chain from an all-masked sequence.

    The prompt occupies the leading positions verbatim and is never
    touched. Termination is guaranteed: the final step has unmask
    probability 1 and no remask pass. The config's step count wins when the
    schedule was discretized differently.
    """
    prompt = np.asarray(prompt, dtype=np.int64)
    if len(prompt) > length:
        raise ValueError("prompt longer than requested length")
    vocab = predictors.vocab
    mask_id = vocab.mask_id
    if np.any(prompt == mask_id):
        raise ValueError("prompt must not contain mask tokens")
    rng = as_rng(config.seed if rng is None else rng)
    if schedule.T != config.T:
        schedule = NoiseSchedule(schedule.kind, config.T)

    ids = np.full(length, mask_id, dtype=np.int64)
    ids[: len(prompt)] = prompt
    prompt_mask = np.zeros(length, dtype=bool)
    prompt_mask[: len(prompt)] = True
    trace = DenoiseTrace(config.T, length)
    last_stage = ["denoise"] * length

    def latent(t: float) -> LatentSequence:
        return LatentSequence(ids=ids.copy(), mask_id=mask_id, prompt_mask=prompt_mask, t=t)

    for i in range(config.T, 0, -1):
        p = unmask_prob(schedule, i)
        t_now = i / config.T
        masked = np.flatnonzero((ids == mask_id) & ~prompt_mask)
        if len(masked):
            budget = int(rng.binomial(len(masked), p))
            if budget:
                _step_commits(
                    ids, masked, budget, predictors, config, latent(t_now),
                    trace, last_stage, i, rng,
                )
        if i > 1 and config.remask_rate > 0:
            committed = np.flatnonzero((ids != mask_id) & ~prompt_mask)
            for l in committed:
                if rng.random() < config.remask_rate * p:
                    trace.record(int(l), i, "remask", int(ids[l]), last_stage[l])
                    ids[l] = mask_id

    if np.any(ids == mask_id):
        raise AssertionError("generation finished with mask tokens present")
    trace.final = ids.copy()
    return ids.copy(), trace


def _step_commits(
    ids: np.ndarray,
    masked: np.ndarray,
    budget: int,
    predictors: SingleStage | AnchoredPair,
    config: SamplerConfig,
    z: LatentSequence,
    trace: DenoiseTrace,
    last_stage: list[str],
    step: int,
    rng: np.random.Generator,
) -> None:
    mask_id = z.mask_id

    def current() -> LatentSequence:
        return LatentSequence(
            ids=ids.copy(), mask_id=mask_id, prompt_mask=z.prompt_mask, t=z.t
        )

    def commit(l: int, row: np.ndarray, stage: str) -> None:
        token = sample_categorical(temper_row(row, config.temperature), rng)
        ids[l] = token
        last_stage[l] = stage
        trace.record(int(l), step, "unmask", int(token), stage)

    if not predictors.anchored:
        order = masked[rng.permutation(len(masked))]
        for l in order[:budget]:
            commit(int(l), predictors.predictor.predict_row(current(), int(l)), "denoise")
        return

    omega_hat, eta_hat = predictors.profile(z)
    mu_hat = omega_hat * eta_hat
    anchors = sorted(
        (int(l) for l in masked if omega_hat[l] >= 0.5),
        key=lambda l: (-mu_hat[l], l),
    )
    others = [int(l) for l in masked if omega_hat[l] < 0.5]
    rng.shuffle(others)
    chosen = (anchors + others)[:budget]
    anchor_set = set(anchors)

    for l in chosen:
        if l in anchor_set:
            commit(l, predictors.anchor.predict_row(current(), l), "anchor")
    rest = [l for l in chosen if l not in anchor_set]
    if not rest:
        return
    # Provisionally resolve the remaining masked anchors so non-anchor
    # predictions condition on the full anchor scaffold.
    y_ids = ids.copy()
    pending = sorted(
        (int(l) for l in np.flatnonzero((y_ids == mask_id) & ~z.prompt_mask)
         if omega_hat[l] >= 0.5),
        key=lambda l: (-mu_hat[l], l),
    )
    y = LatentSequence(ids=y_ids.copy(), mask_id=mask_id, prompt_mask=z.prompt_mask, t=z.t)
    for l in pending:
        row = predictors.anchor.predict_row(y, l)
        y_ids[l] = int(np.argmax(row))
        y = LatentSequence(ids=y_ids.copy(), mask_id=mask_id, prompt_mask=z.prompt_mask, t=z.t)
    for l in rest:
        row = predictors.denoiser.predict_row(y, l)
        commit(l, row, "denoise")
        y_ids[l] = ids[l]
        y = LatentSequence(ids=y_ids.copy(), mask_id=mask_id, prompt_mask=z.prompt_mask, t=z.t)


def unmask_order_stats(
    trace: DenoiseTrace,
    depth: np.ndarray,
    omega: np.ndarray,
    exclude_negative_depth: bool = True,
) -> dict[tuple[int, bool], tuple[float, int]]:
    """Aggregate normalized final-unmask times per (depth, anchor flag).

    Normalized time is (T - final unmask step) / T: 0 means unmasked at the
    first reverse step, values near 1 mean resolved at the very end.
    Positions with no events (prompt) and, by default, negative depths
    (padding) are excluded.
    """
    depth = np.asarray(depth)
    omega = np.asarray(omega)
    buckets: dict[tuple[int, bool], list[float]] = {}
    for l in range(trace.length):
        step = trace.final_unmask_step(l)
        if step is None:
            continue
        if exclude_negative_depth and depth[l] < 0:
            continue
        key = (int(depth[l]), bool(omega[l] >= 0.5))
        buckets.setdefault(key, []).append((trace.T - step) / trace.T)
    return {
        key: (float(np.mean(vals)), len(vals)) for key, vals in sorted(buckets.items())
    }

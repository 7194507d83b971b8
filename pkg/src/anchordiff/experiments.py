"""Experiment harnesses: the ancestry probe, syntactic-validity evaluation,
and seed-paired strategy comparisons across step grids."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .anchors import AnchorStrategy
from .corpus_io import DatasetRecord, build_corpus, build_vocab
from .denoisers import (
    Corpus,
    ExactPosteriorDenoiser,
    PosteriorAnchorProfile,
    Predictor,
    TwoStagePredictor,
)
from .diffusion import LatentSequence, Vocab, as_rng, corrupt, nelbo
from .hierarchy import (
    InsufficientDepth,
    ancestor_chain,
    max_chain_length,
    positions_by_node,
)
from .minilang import is_syntactically_valid, render_surfaces
from .sampler import (
    AnchoredPair,
    DenoiseTrace,
    SamplerConfig,
    SingleStage,
    generate,
)
from .schedule import NoiseSchedule


class RevealOrder(enum.Enum):
    IN_OUT = "in_out"
    OUT_IN = "out_in"
    RANDOM = "random"


@dataclass(frozen=True)
class ProbeResult:
    """Mean predictor quality at the target position after j reveals."""

    ordering: str
    t: float
    k: int
    j: int
    n: int
    mean_prob: float
    stderr_prob: float
    mean_log_prob: float
    stderr_log_prob: float


@dataclass
class ProbeRun:
    """Summary rows plus the raw per-probe trajectories (probes are paired
    across orderings: same corruption, chain, and random reveals).
    ``achievable_k`` is the longest chain the corpus admits."""

    k: int
    results: list[ProbeResult]
    raw: dict[tuple[str, float], np.ndarray]
    n_skipped: int
    n_probes: int
    achievable_k: int = 0

    def to_csv(self) -> str:
        lines = ["ordering,t,j,n,mean_prob,stderr_prob,mean_log_prob,stderr_log_prob"]
        for r in self.results:
            lines.append(
                f"{r.ordering},{r.t},{r.j},{r.n},{r.mean_prob!r},{r.stderr_prob!r},"
                f"{r.mean_log_prob!r},{r.stderr_log_prob!r}"
            )
        return "\n".join(lines) + "\n"

    def paired_gap(
        self, t: float, a: str, b: str, j: int
    ) -> tuple[float, float]:
        """Mean and standard error of the per-probe difference a - b at j."""
        diff = self.raw[(a, t)][:, j] - self.raw[(b, t)][:, j]
        se = float(diff.std(ddof=1) / math.sqrt(len(diff))) if len(diff) > 1 else 0.0
        return float(diff.mean()), se


def _probe_targets(records: list[DatasetRecord], k: int, length: int) -> list[list[int]]:
    """Per record: positions admitting an ancestor chain of length k."""
    eligible: list[list[int]] = []
    for rec in records:
        index = positions_by_node(rec.annotations)
        ok = [
            l
            for l in range(min(len(rec), length))
            if max_chain_length(l, rec.annotations, rec.tree, index) >= k
        ]
        eligible.append(ok)
    return eligible


def ancestry_probe(
    records: list[DatasetRecord],
    corpus: Corpus,
    predictor: Predictor,
    t_values: list[float],
    k: int,
    n_probes: int,
    rng: np.random.Generator | int | None,
    schedule: NoiseSchedule | None = None,
    rule: str = "keyword_first",
) -> ProbeRun:
    """Measure how revealing a masked position's ancestors improves the
    predictor at that position.

    Per probe: corrupt a corpus program to noise level t, additionally mask
    a contiguous ancestor chain l0..lk, then reveal positions one at a time
    - nearest ancestors first (in-out), farthest first (out-in), or k
    non-chain masked positions (random) - querying the predicted
    probability of the true token at l0 after each reveal. All three
    orderings share each probe's corruption and reveal draws.
    """
    rng = as_rng(rng)
    schedule = schedule or NoiseSchedule(T=max(corpus.length, 1))
    length = corpus.length
    eligible = _probe_targets(records, k, length)
    candidates = [i for i, ok in enumerate(eligible) if ok]
    achievable = max(
        (
            max_chain_length(l, rec.annotations, rec.tree)
            for rec in records
            for l in range(min(len(rec), length))
        ),
        default=0,
    )
    if not candidates:
        raise InsufficientDepth(-1, k, achievable)
    raw: dict[tuple[str, float], np.ndarray] = {
        (o.value, t): np.zeros((n_probes, k + 1)) for o in RevealOrder for t in t_values
    }
    skipped = 0
    mask_id = corpus.vocab.mask_id
    for t in t_values:
        done = 0
        attempts = 0
        while done < n_probes:
            attempts += 1
            if attempts > 50 * n_probes:
                raise InsufficientDepth(-1, k, achievable)
            ri = candidates[rng.integers(len(candidates))]
            rec = records[ri]
            l0 = eligible[ri][rng.integers(len(eligible[ri]))]
            try:
                chain = ancestor_chain(l0, k, rec.annotations, rec.tree, rule).positions
            except InsufficientDepth:
                skipped += 1
                continue
            if any(pos >= length for pos in chain):
                skipped += 1
                continue
            clean = LatentSequence(ids=corpus.ids[ri].copy(), mask_id=mask_id)
            z = corrupt(clean, t, schedule, rng)
            ids = z.ids.copy()
            ids[list(chain)] = mask_id
            chain_set = set(chain)
            non_chain_masked = [
                l for l in np.flatnonzero(ids == mask_id) if l not in chain_set
            ]
            if len(non_chain_masked) < k:
                skipped += 1
                continue
            random_reveals = [
                int(non_chain_masked[j])
                for j in rng.permutation(len(non_chain_masked))[:k]
            ]
            reveal_orders = {
                RevealOrder.IN_OUT.value: list(chain[1:]),
                RevealOrder.OUT_IN.value: list(chain[1:][::-1]),
                RevealOrder.RANDOM.value: random_reveals,
            }
            true_id = int(corpus.ids[ri][l0])
            for ordering, reveals in reveal_orders.items():
                state = ids.copy()
                row = raw[(ordering, t)][done]
                row[0] = _query(predictor, state, mask_id, l0, true_id)
                for j, pos in enumerate(reveals, start=1):
                    state[pos] = corpus.ids[ri][pos]
                    row[j] = _query(predictor, state, mask_id, l0, true_id)
            done += 1
    results = []
    for (ordering, t), mat in sorted(raw.items()):
        logs = np.log(np.maximum(mat, 1e-300))
        for j in range(k + 1):
            results.append(
                ProbeResult(
                    ordering=ordering,
                    t=t,
                    k=k,
                    j=j,
                    n=n_probes,
                    mean_prob=float(mat[:, j].mean()),
                    stderr_prob=float(mat[:, j].std(ddof=1) / math.sqrt(n_probes)),
                    mean_log_prob=float(logs[:, j].mean()),
                    stderr_log_prob=float(logs[:, j].std(ddof=1) / math.sqrt(n_probes)),
                )
            )
    return ProbeRun(
        k=k, results=results, raw=raw, n_skipped=skipped, n_probes=n_probes,
        achievable_k=achievable,
    )


def _query(
    predictor: Predictor, ids: np.ndarray, mask_id: int, l0: int, true_id: int
) -> float:
    z = LatentSequence(ids=ids.copy(), mask_id=mask_id)
    return float(predictor.predict_row(z, l0)[true_id])


# -- syntactic validity -----------------------------------------------------


@dataclass
class ValidityReport:
    """Fraction of samples that parse; None when there are no samples."""

    fraction: float | None
    verdicts: list[bool]


def validity_eval(samples: list[str]) -> ValidityReport:
    verdicts = [is_syntactically_valid(s) for s in samples]
    if not verdicts:
        return ValidityReport(None, [])
    return ValidityReport(sum(verdicts) / len(verdicts), verdicts)


# -- strategy comparison ------------------------------------------------------


@dataclass
class EvalRow:
    strategy: str
    gamma: float
    beta: float
    T: int
    syntax_fraction: float
    mean_unmask_depth_corr: float
    nelbo: float
    pass_at_1: str = "unavailable"


def eval_rows_to_csv(rows: list[EvalRow]) -> str:
    lines = [
        "strategy,gamma,beta,T,syntax_fraction,mean_unmask_depth_corr,nelbo,pass_at_1"
    ]
    for r in rows:
        corr = "" if math.isnan(r.mean_unmask_depth_corr) else repr(r.mean_unmask_depth_corr)
        lines.append(
            f"{r.strategy},{r.gamma!r},{r.beta!r},{r.T},{r.syntax_fraction!r},"
            f"{corr},{r.nelbo!r},{r.pass_at_1}"
        )
    return "\n".join(lines) + "\n"


def build_strategy_predictors(
    corpus: Corpus,
    strategy: AnchorStrategy,
    predictor_kind: str = "exact",
) -> SingleStage | AnchoredPair:
    """Predictors wired for the strategy: a single stage for Null, the
    anchored two-stage pair otherwise. ``predictor_kind`` selects the
    Bayes-exact table or the backoff count model (whose anchored pair uses
    the corpus-marginal profile, since it has no match set)."""
    if predictor_kind == "backoff":
        from .denoisers import BackoffCountModel, MarginalAnchorProfile

        model = BackoffCountModel.fit(corpus)
        if strategy is AnchorStrategy.NULL:
            return SingleStage(model)
        return AnchoredPair(model, model, MarginalAnchorProfile(corpus))
    exact = ExactPosteriorDenoiser(corpus)
    if strategy is AnchorStrategy.NULL:
        return SingleStage(exact)
    return AnchoredPair(exact, exact, PosteriorAnchorProfile(corpus))


def render_ids(ids: np.ndarray, vocab: Vocab) -> str:
    return render_surfaces([vocab.surface(int(i)) for i in ids])


def compare_strategies(
    sources: list[str],
    configs: list[SamplerConfig],
    t_grid: list[int],
    n_samples: int,
    schedule_kind,
    seed: int,
    length: int | None = None,
    nelbo_records: int = 6,
    nelbo_samples: int = 96,
    predictor_kind: str = "exact",
) -> list[EvalRow]:
    """Generate with each config across the step grid and report validity,
    depth-ordering correlation, and NELBO, with seeds shared across configs
    so rows are paired."""
    from .corpus_io import annotate_program  # local to avoid cycle at import

    vocab = build_vocab(sources)
    rows: list[EvalRow] = []
    for config in configs:
        anchor_cfg = config.strategy
        records = [
            annotate_program(src, anchor_cfg, record_id=str(i))
            for i, src in enumerate(sources)
        ]
        corpus = build_corpus(records, vocab, length)
        predictors = build_strategy_predictors(
            corpus, anchor_cfg.strategy, predictor_kind
        )
        loss = _strategy_nelbo(
            records, corpus, anchor_cfg.strategy, nelbo_records, nelbo_samples, seed
        )
        for T in t_grid:
            cfg = replace(config, T=T)
            schedule = NoiseSchedule(schedule_kind, T)
            valid = 0
            depths: list[float] = []
            times: list[float] = []
            for j in range(n_samples):
                rng = np.random.default_rng([seed, T, j])
                out, trace = generate([], corpus.length, predictors, cfg, schedule, rng)
                text = render_ids(out, vocab)
                if is_syntactically_valid(text):
                    valid += 1
                _collect_depth_times(out, trace, corpus, depths, times)
            corr = _pearson(depths, times)
            rows.append(
                EvalRow(
                    strategy=anchor_cfg.strategy.value,
                    gamma=anchor_cfg.gamma,
                    beta=anchor_cfg.beta,
                    T=T,
                    syntax_fraction=valid / n_samples,
                    mean_unmask_depth_corr=corr,
                    nelbo=loss,
                )
            )
    return rows


def _collect_depth_times(
    out: np.ndarray,
    trace: DenoiseTrace,
    corpus: Corpus,
    depths: list[float],
    times: list[float],
) -> None:
    matches = np.flatnonzero((corpus.ids == out[None, :]).all(axis=1))
    if len(matches) == 0 or corpus.depth is None:
        return
    depth_row = corpus.depth[matches[0]]
    for l in range(trace.length):
        if depth_row[l] < 0:
            continue
        step = trace.final_unmask_step(l)
        if step is None:
            continue
        depths.append(float(depth_row[l]))
        times.append((trace.T - step) / trace.T)


def _pearson(xs: list[float], ys: list[float]) -> float:
    if len(xs) < 2:
        return float("nan")
    x = np.asarray(xs)
    y = np.asarray(ys)
    sx, sy = x.std(), y.std()
    if sx == 0 or sy == 0:
        return float("nan")
    return float(((x - x.mean()) * (y - y.mean())).mean() / (sx * sy))


def _strategy_nelbo(
    records: list[DatasetRecord],
    corpus: Corpus,
    strategy: AnchorStrategy,
    n_records: int,
    n_samples: int,
    seed: int,
) -> float:
    """NELBO of the strategy's composed predictor, using the count model.

    The Bayes-exact composition pins its intermediate sequence to one
    corpus program, so at high noise it assigns zero probability to clean
    tokens and its NELBO is infinite by construction; the smoothed count
    model is the learned-model stand-in and stays finite.
    """
    from .denoisers import BackoffCountModel

    model = BackoffCountModel.fit(corpus)
    schedule = NoiseSchedule(T=16)
    total = 0.0
    use = records[: max(1, min(n_records, len(records)))]
    for i, rec in enumerate(use):
        x = LatentSequence(ids=corpus.ids[i].copy(), mask_id=corpus.vocab.mask_id)
        if strategy is AnchorStrategy.NULL:
            predictor = model
        else:
            predictor = TwoStagePredictor(
                model, model, corpus.omega[i], corpus.eta[i]
            )
        report = nelbo(x, predictor, schedule, n_samples, np.random.default_rng([seed, 7, i]))
        total += report.estimate
    return total / len(use)

"""Command-line entry point.

Subcommands: annotate, corrupt, sample, probe, eval. Configuration comes
from a JSON config file (--config) with command-line flags taking
precedence; every run writes a manifest with the fully resolved
configuration before doing any work, and all outputs are deterministic
under a fixed seed (timestamps live only in the manifest).

Exit codes: 0 success, 2 input error, 3 predictor/runtime error,
4 infeasible experiment.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .anchors import AnchorConfig, AnchorStrategy, compute_omega
from .corpus_io import (
    EmptyCorpusError,
    IngestError,
    annotate_program,
    build_corpus,
    build_vocab,
    dataset_to_jsonl,
    ingest,
    load_dataset,
    synth_corpus,
)
from .denoisers import (
    BackoffCountModel,
    ExactPosteriorDenoiser,
    MarginalAnchorProfile,
    PosteriorAnchorProfile,
)
from .diffusion import DiffusionError, LatentSequence, corrupt
from .experiments import (
    ancestry_probe,
    compare_strategies,
    eval_rows_to_csv,
    render_ids,
    validity_eval,
)
from .hierarchy import InsufficientDepth
from .sampler import AnchoredPair, SamplerConfig, SingleStage, generate
from .schedule import NoiseSchedule, ScheduleKind

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_RUNTIME = 3
EXIT_INFEASIBLE = 4

OUTPUT_ROOT_ENV = "ANCHORDIFF_OUT"
SYNTH_SEED = 20260809

DEFAULTS = {
    "corpus": "synth",
    "strategy": "anchor_tree",
    "gamma": None,
    "beta": None,
    "d0": 2,
    "schedule": "cosine",
    "steps": "16",
    "temperature": 0.8,
    "remask_rate": None,
    "seed": 0,
    "workers": 1,
    "n_samples": 16,
    "t": 0.5,
    "probe_k": 3,
    "probe_t": "0.85,0.95",
    "predictor": "exact",
    "length": 64,
    "synth_programs": 200,
    "synth_depth": 6,
    "split_max_len": None,
    "probe_rule": "keyword_first",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anchordiff",
        description="Anchored masked diffusion over mini-language syntax trees",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override it")
    common.add_argument("--corpus", help="directory, dataset .jsonl, or 'synth'")
    common.add_argument(
        "--strategy",
        help="null|keyword|identifier|anchor_tree (comma-separated for eval)",
    )
    common.add_argument("--gamma", type=float, help="anchor weight scale")
    common.add_argument("--beta", type=float, help="depth-decay rate")
    common.add_argument("--d0", type=int, help="depth where decay begins")
    common.add_argument("--schedule", choices=["cosine", "linear"])
    common.add_argument("--steps", help="denoising steps (comma grid for eval)")
    common.add_argument("--temperature", type=float)
    common.add_argument("--remask-rate", type=float, dest="remask_rate")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory (default: timestamped)")
    common.add_argument("--workers", type=int)
    common.add_argument("--n-samples", type=int, dest="n_samples")
    common.add_argument("--length", type=int, help="sequence length L")
    common.add_argument("--synth-programs", type=int, dest="synth_programs")
    common.add_argument("--synth-depth", type=int, dest="synth_depth")
    common.add_argument(
        "--split-identifiers", type=int, dest="split_max_len",
        help="split identifiers longer than this many characters",
    )

    sub.add_parser("annotate", parents=[common], help="write annotated JSONL dataset")
    p_corrupt = sub.add_parser("corrupt", parents=[common], help="emit forward-noised samples")
    p_corrupt.add_argument("--t", type=float, help="noise level in [0, 1]")
    p_sample = sub.add_parser("sample", parents=[common], help="generate programs")
    p_sample.add_argument("--predictor", choices=["exact", "backoff"])
    p_probe = sub.add_parser("probe", parents=[common], help="run the ancestry probe")
    p_probe.add_argument("--probe-k", type=int, dest="probe_k")
    p_probe.add_argument("--probe-t", dest="probe_t", help="comma-separated noise levels")
    p_probe.add_argument(
        "--probe-rule", dest="probe_rule", choices=["keyword_first", "first_token"],
        help="which token stands in for an ancestor node",
    )
    p_eval = sub.add_parser("eval", parents=[common], help="strategy comparison grid")
    p_eval.add_argument("--predictor", choices=["exact", "backoff"])
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    """Layer defaults, then the config file, then explicit flags."""
    resolved = dict(DEFAULTS)
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            resolved.update(json.load(fh))
    for key in resolved:
        value = getattr(args, key, None)
        if value is not None:
            resolved[key] = value
    resolved["command"] = args.command
    resolved["out"] = getattr(args, "out", None)
    return resolved


def _anchor_config(resolved: dict, strategy: str | None = None) -> AnchorConfig:
    name = strategy or str(resolved["strategy"]).split(",")[0]
    return AnchorConfig.for_strategy(
        AnchorStrategy(name),
        gamma=resolved["gamma"],
        beta=resolved["beta"],
        d0=resolved["d0"],
    )


def load_sources(resolved: dict) -> list[str]:
    spec = resolved["corpus"]
    if spec == "synth":
        return synth_corpus(
            seed=SYNTH_SEED,
            n_programs=resolved["synth_programs"],
            max_depth=resolved["synth_depth"],
        )
    path = Path(spec)
    if not path.exists():
        raise IngestError(f"no such corpus path: {path}")
    if path.is_file() and path.suffix == ".jsonl":
        records, _ = load_dataset(path)
        return [r.source for r in records]
    config = _anchor_config(resolved)
    result = ingest([path], config)
    if not result.records:
        raise IngestError(f"no parseable programs under {path}")
    return [r.source for r in result.records]


def make_run_dir(resolved: dict) -> Path:
    if resolved["out"]:
        run_dir = Path(resolved["out"])
    else:
        root = Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))
        stamp = time.strftime("%Y%m%dT%H%M%S")
        run_dir = root / f"{stamp}-{resolved['command']}"
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir


def write_manifest(run_dir: Path, resolved: dict, anchor: AnchorConfig | None) -> None:
    manifest = {
        "tool": "anchordiff",
        "version": __version__,
        "created_unix": time.time(),
        "config": {k: v for k, v in sorted(resolved.items()) if k != "out"},
    }
    if anchor is not None:
        manifest["anchor"] = {
            "strategy": anchor.strategy.value,
            "gamma": anchor.gamma,
            "beta": anchor.beta,
            "d0": anchor.d0,
        }
    (run_dir / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def _write(run_dir: Path, name: str, payload: str) -> None:
    (run_dir / name).write_text(payload, encoding="utf-8")


def _records(sources: list[str], config: AnchorConfig, resolved: dict | None = None):
    split = resolved.get("split_max_len") if resolved else None
    return [
        annotate_program(s, config, record_id=str(i), split_max_len=split)
        for i, s in enumerate(sources)
    ]


# -- subcommands --------------------------------------------------------------


def cmd_annotate(resolved: dict) -> int:
    config = _anchor_config(resolved)
    sources = load_sources(resolved)
    run_dir = make_run_dir(resolved)
    write_manifest(run_dir, resolved, config)
    records = _records(sources, config, resolved)
    _write(run_dir, "dataset.jsonl", dataset_to_jsonl(records, config))
    depth_hist: dict[int, int] = {}
    for rec in records:
        for ann in rec.annotations:
            depth_hist[ann.depth] = depth_hist.get(ann.depth, 0) + 1
    total = sum(len(r) for r in records)
    density = {}
    for name in ("null", "keyword", "identifier", "anchor_tree"):
        cfg = AnchorConfig.for_strategy(AnchorStrategy(name))
        hits = sum(int(compute_omega(r.annotations, cfg).sum()) for r in records)
        density[name] = hits / total
    summary = {
        "records": len(records),
        "tokens": total,
        "anchor_density": density,
        "depth_histogram": {str(k): v for k, v in sorted(depth_hist.items())},
    }
    _write(run_dir, "summary.json", json.dumps(summary, sort_keys=True, indent=2) + "\n")
    print(f"annotated {len(records)} records -> {run_dir}")
    return EXIT_OK


def cmd_corrupt(resolved: dict) -> int:
    config = _anchor_config(resolved)
    sources = load_sources(resolved)
    run_dir = make_run_dir(resolved)
    write_manifest(run_dir, resolved, config)
    records = _records(sources, config, resolved)
    vocab = build_vocab(sources)
    corpus = build_corpus(records, vocab, resolved["length"])
    schedule = NoiseSchedule(ScheduleKind(resolved["schedule"]), int(resolved["steps"]))
    t = float(resolved["t"])
    rng = np.random.default_rng(resolved["seed"])
    lines = []
    for i in range(corpus.n):
        x = LatentSequence(corpus.ids[i].copy(), vocab.mask_id)
        z = corrupt(x, t, schedule, rng)
        lines.append(
            json.dumps(
                {
                    "id": records[i].record_id,
                    "t": t,
                    "masked": int(z.is_masked.sum()),
                    "text": render_ids(z.ids, vocab),
                },
                sort_keys=True,
            )
        )
    _write(run_dir, "corrupted.jsonl", "\n".join(lines) + "\n")
    print(f"corrupted {corpus.n} records at t={t} -> {run_dir}")
    return EXIT_OK


def _build_predictors(resolved: dict, corpus, strategy: AnchorStrategy):
    if resolved.get("predictor", "exact") == "backoff":
        model = BackoffCountModel.fit(corpus)
        if strategy is AnchorStrategy.NULL:
            return SingleStage(model)
        return AnchoredPair(model, model, MarginalAnchorProfile(corpus))
    exact = ExactPosteriorDenoiser(corpus)
    if strategy is AnchorStrategy.NULL:
        return SingleStage(exact)
    return AnchoredPair(exact, exact, PosteriorAnchorProfile(corpus))


def _one_sample(task):
    predictors, cfg, schedule, length, seed, index = task
    rng = np.random.default_rng([seed, index])
    out, trace = generate([], length, predictors, cfg, schedule, rng)
    return index, out, trace


def cmd_sample(resolved: dict) -> int:
    config = _anchor_config(resolved)
    sources = load_sources(resolved)
    run_dir = make_run_dir(resolved)
    write_manifest(run_dir, resolved, config)
    records = _records(sources, config, resolved)
    vocab = build_vocab(sources)
    corpus = build_corpus(records, vocab, resolved["length"])
    T = int(resolved["steps"])
    schedule = NoiseSchedule(ScheduleKind(resolved["schedule"]), T)
    remask = resolved["remask_rate"]
    if remask is None:
        remask = 0.0 if config.strategy is AnchorStrategy.NULL else 0.1
    sampler_cfg = SamplerConfig(
        T=T,
        temperature=resolved["temperature"],
        remask_rate=remask,
        strategy=config,
        seed=resolved["seed"],
    )
    predictors = _build_predictors(resolved, corpus, config.strategy)
    if resolved.get("predictor") == "backoff":
        model = predictors.predictor if isinstance(predictors, SingleStage) else predictors.denoiser
        _write(run_dir, "counts.json", model.to_json() + "\n")
    n = resolved["n_samples"]
    tasks = [
        (predictors, sampler_cfg, schedule, corpus.length, resolved["seed"], j)
        for j in range(n)
    ]
    if resolved["workers"] > 1:
        with ProcessPoolExecutor(max_workers=resolved["workers"]) as pool:
            results = sorted(pool.map(_one_sample, tasks), key=lambda r: r[0])
    else:
        results = [_one_sample(t) for t in tasks]
    (run_dir / "samples").mkdir(exist_ok=True)
    (run_dir / "traces").mkdir(exist_ok=True)
    texts = []
    for index, out, trace in results:
        text = render_ids(out, vocab)
        texts.append(text)
        _write(run_dir, f"samples/{index:04d}.txt", text)
        _write(run_dir, f"traces/{index:04d}.jsonl", trace.to_jsonl())
    report = validity_eval(texts)
    _write(
        run_dir,
        "validity.json",
        json.dumps(
            {"fraction": report.fraction, "verdicts": report.verdicts},
            sort_keys=True,
        )
        + "\n",
    )
    print(f"sampled {n} programs (validity {report.fraction}) -> {run_dir}")
    return EXIT_OK


def cmd_probe(resolved: dict) -> int:
    config = _anchor_config(resolved)
    sources = load_sources(resolved)
    run_dir = make_run_dir(resolved)
    write_manifest(run_dir, resolved, config)
    records = _records(sources, config, resolved)
    vocab = build_vocab(sources)
    corpus = build_corpus(records, vocab, resolved["length"])
    den = ExactPosteriorDenoiser(corpus)
    t_values = [float(v) for v in str(resolved["probe_t"]).split(",")]
    run = ancestry_probe(
        records,
        corpus,
        den,
        t_values=t_values,
        k=resolved["probe_k"],
        n_probes=resolved["n_samples"],
        rng=resolved["seed"],
        rule=resolved["probe_rule"],
    )
    _write(run_dir, "probe.csv", run.to_csv())
    _write(
        run_dir,
        "probe_summary.json",
        json.dumps(
            {
                "k": run.k,
                "achievable_k": run.achievable_k,
                "n_probes": run.n_probes,
                "skipped": run.n_skipped,
            },
            sort_keys=True,
        )
        + "\n",
    )
    print(f"probe k={run.k} over t={t_values} -> {run_dir}")
    return EXIT_OK


def cmd_eval(resolved: dict) -> int:
    sources = load_sources(resolved)
    run_dir = make_run_dir(resolved)
    write_manifest(run_dir, resolved, None)
    t_grid = [int(v) for v in str(resolved["steps"]).split(",")]
    strategies = [s.strip() for s in str(resolved["strategy"]).split(",")]
    configs = []
    for name in strategies:
        anchor = _anchor_config(resolved, name)
        remask = resolved["remask_rate"]
        if remask is None:
            remask = 0.0 if anchor.strategy is AnchorStrategy.NULL else 0.1
        configs.append(
            SamplerConfig(
                T=t_grid[0],
                temperature=resolved["temperature"],
                remask_rate=remask,
                strategy=anchor,
                seed=resolved["seed"],
            )
        )
    rows = compare_strategies(
        sources,
        configs,
        t_grid,
        resolved["n_samples"],
        ScheduleKind(resolved["schedule"]),
        resolved["seed"],
        length=resolved["length"],
        predictor_kind=resolved.get("predictor", "exact"),
    )
    _write(run_dir, "eval.csv", eval_rows_to_csv(rows))
    for metric in ("syntax_fraction", "mean_unmask_depth_corr", "nelbo"):
        lines = ["strategy," + ",".join(f"T{t}" for t in t_grid)]
        for name in strategies:
            vals = [
                next(getattr(r, metric) for r in rows if r.strategy == name and r.T == t)
                for t in t_grid
            ]
            lines.append(name + "," + ",".join(repr(v) for v in vals))
        _write(run_dir, f"metric_{metric}.csv", "\n".join(lines) + "\n")
    print(f"eval {strategies} x T{t_grid} -> {run_dir}")
    return EXIT_OK


COMMANDS = {
    "annotate": cmd_annotate,
    "corrupt": cmd_corrupt,
    "sample": cmd_sample,
    "probe": cmd_probe,
    "eval": cmd_eval,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    resolved = resolve_config(args)
    try:
        return COMMANDS[args.command](resolved)
    except (IngestError, EmptyCorpusError, FileNotFoundError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InsufficientDepth as exc:
        print(f"infeasible experiment: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except DiffusionError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

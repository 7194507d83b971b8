"""Walkthrough: does revealing a masked position's tree ancestors help?

Reproduces the ancestry-probe measurement: corrupt a program, mask an
ancestor chain on top, then reveal the chain nearest-first (in-out),
farthest-first (out-in), or reveal random other positions instead, tracking
the predicted probability of the true token at the chain's base.
"""

from anchordiff import (
    AnchorConfig,
    AnchorStrategy,
    annotate_program,
    build_corpus,
    build_vocab,
    synth_corpus,
)
from anchordiff.denoisers import ExactPosteriorDenoiser
from anchordiff.experiments import ancestry_probe

sources = synth_corpus(seed=20260809, n_programs=200, max_depth=6)
config = AnchorConfig.for_strategy(AnchorStrategy.ANCHOR_TREE)
records = [annotate_program(s, config, str(i)) for i, s in enumerate(sources)]
corpus = build_corpus(records, build_vocab(sources), length=64)

run = ancestry_probe(
    records, corpus, ExactPosteriorDenoiser(corpus),
    t_values=[0.85, 0.95], k=3, n_probes=600, rng=42,
)

for t in (0.85, 0.95):
    print(f"noise level t = {t}: mean P(true token at l0) after j reveals")
    print(f"{'ordering':>8} " + " ".join(f"{f'j={j}':>8}" for j in range(4)))
    for ordering in ("in_out", "out_in", "random"):
        means = run.raw[(ordering, t)].mean(axis=0)
        print(f"{ordering:>8} " + " ".join(f"{m:>8.4f}" for m in means))
    for j in (1, 2, 3):
        gap, se = run.paired_gap(t, "in_out", "random", j)
        print(f"  in-out beats random at j={j}: +{gap:.4f} ({gap / se:.1f} se)")
    gap, se = run.paired_gap(t, "in_out", "out_in", 1)
    print(f"  in-out beats out-in at j=1: +{gap:.4f} ({gap / se:.1f} se)")
    print()

print("Reading: ancestors help more than random reveals, and the nearest")
print("ancestor helps most - revealing coarse structure first is the")
print("efficient order, which is exactly what depth-decayed anchor weights")
print("bake into training and sampling.")
print(f"(skipped probes: {run.n_skipped}; longest available chain: "
      f"{run.achievable_k})")

"""Corpus ingestion, annotation records, JSONL serialization, vocabulary
construction, and the bundled synthetic program generator.

The on-disk dataset format is JSONL: a versioned header record followed by
one record per line. Records serialize tokens with exact spans plus the
per-token annotation arrays, and round-trip bit-exactly.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .anchors import AnchorConfig, AnchorStrategy, compute_eta, compute_omega
from .denoisers import Corpus
from .diffusion import Vocab
from .hierarchy import TokenAnnotation, assign_nodes
from .minilang import (
    MASK_SURFACE,
    PAD_SURFACE,
    ParseError,
    SyntaxTree,
    Token,
    TokenKind,
    is_syntactically_valid,
    parse,
    split_identifiers,
    token_surface,
    tokenize,
)

SCHEMA_NAME = "anchordiff-dataset"
SCHEMA_VERSION = 1


class EmptyCorpusError(Exception):
    pass


class IngestError(Exception):
    pass


@dataclass
class DatasetRecord:
    """One annotated program: tokens with spans plus per-token node ids,
    depths, and anchor arrays. The tree is re-derived from the source."""

    record_id: str
    source: str
    tokens: list[Token]
    tree: SyntaxTree
    annotations: list[TokenAnnotation]
    omega: np.ndarray
    eta: np.ndarray
    mu: np.ndarray

    def __len__(self) -> int:
        return len(self.tokens)


def annotate_program(
    source: str,
    config: AnchorConfig,
    record_id: str = "",
    split_max_len: int | None = None,
) -> DatasetRecord:
    """Tokenize, parse, and annotate one program under ``config``."""
    tokens = tokenize(source)
    if split_max_len is not None:
        tokens = split_identifiers(tokens, split_max_len)
    tree = parse(source)
    annotations = assign_nodes(tree, tokens)
    omega = compute_omega(annotations, config)
    eta = compute_eta(annotations, config)
    return DatasetRecord(
        record_id=record_id,
        source=source,
        tokens=tokens,
        tree=tree,
        annotations=annotations,
        omega=omega,
        eta=eta,
        mu=omega * eta,
    )


@dataclass
class IngestResult:
    records: list[DatasetRecord]
    skipped: list[tuple[str, str]]


def ingest(
    paths: list[str | Path],
    config: AnchorConfig,
    split_max_len: int | None = None,
) -> IngestResult:
    """Annotate every parseable file under ``paths``; report the rest.

    Directories are walked in sorted order. Files that fail to read or
    parse are skipped and listed with the reason.
    """
    files: list[Path] = []
    for p in paths:
        p = Path(p)
        if p.is_dir():
            files.extend(sorted(q for q in p.rglob("*") if q.is_file()))
        elif p.exists():
            files.append(p)
        else:
            raise IngestError(f"no such path: {p}")
    records: list[DatasetRecord] = []
    skipped: list[tuple[str, str]] = []
    for f in files:
        try:
            source = f.read_text(encoding="utf-8")
            records.append(
                annotate_program(source, config, record_id=f.name, split_max_len=split_max_len)
            )
        except (OSError, UnicodeDecodeError, ParseError) as exc:
            skipped.append((str(f), str(exc)))
    return IngestResult(records, skipped)


# -- vocabulary -----------------------------------------------------------


def build_vocab(texts: list[str]) -> Vocab:
    """Sorted unique token surfaces plus the reserved pad and mask tokens,
    mask last. Deterministic across runs."""
    if not texts:
        raise EmptyCorpusError("cannot build a vocabulary from an empty corpus")
    surfaces: set[str] = set()
    for text in texts:
        surfaces.update(token_surface(t) for t in tokenize(text))
    return Vocab(tuple(sorted(surfaces)) + (PAD_SURFACE, MASK_SURFACE))


def pad_id(vocab: Vocab) -> int:
    return vocab.id(PAD_SURFACE)


def encode_tokens(tokens: list[Token], vocab: Vocab, length: int) -> np.ndarray:
    """Token ids truncated or padded to ``length`` with the pad token."""
    ids = [vocab.id(token_surface(t)) for t in tokens[:length]]
    ids.extend([pad_id(vocab)] * (length - len(ids)))
    return np.array(ids, dtype=np.int64)


def build_corpus(
    records: list[DatasetRecord],
    vocab: Vocab | None = None,
    length: int | None = None,
    weights: np.ndarray | None = None,
) -> Corpus:
    """Pad records to a shared length and bundle them as a Corpus.

    Pad positions carry omega 0, eta 0, and depth -1 so downstream
    statistics can exclude them.
    """
    if not records:
        raise EmptyCorpusError("no records")
    if vocab is None:
        vocab = build_vocab([r.source for r in records])
    if length is None:
        length = max(len(r) for r in records)
    n = len(records)
    ids = np.empty((n, length), dtype=np.int64)
    omega = np.zeros((n, length), dtype=np.float64)
    eta = np.zeros((n, length), dtype=np.float64)
    depth = np.full((n, length), -1, dtype=np.int64)
    for i, rec in enumerate(records):
        ids[i] = encode_tokens(rec.tokens, vocab, length)
        m = min(len(rec), length)
        omega[i, :m] = rec.omega[:m]
        eta[i, :m] = rec.eta[:m]
        depth[i, :m] = [a.depth for a in rec.annotations[:m]]
    if weights is None:
        weights = np.ones(n)
    return Corpus(
        ids=ids, weights=weights, vocab=vocab, omega=omega, eta=eta, depth=depth
    )


# -- JSONL serialization ---------------------------------------------------


def _record_to_dict(rec: DatasetRecord) -> dict:
    return {
        "id": rec.record_id,
        "source": rec.source,
        "tokens": [
            {"text": t.text, "kind": t.kind.value, "start": t.start, "end": t.end}
            for t in rec.tokens
        ],
        "node_id": [a.node_id for a in rec.annotations],
        "depth": [a.depth for a in rec.annotations],
        "omega": [int(v) for v in rec.omega],
        "eta": [float(v) for v in rec.eta],
        "mu": [float(v) for v in rec.mu],
    }


def _record_from_dict(data: dict) -> DatasetRecord:
    tokens = [
        Token(i, TokenKind(t["kind"]), t["text"], (t["start"], t["end"]))
        for i, t in enumerate(data["tokens"])
    ]
    tree = parse(data["source"])
    annotations = [
        TokenAnnotation(
            position=i,
            node_id=node_id,
            depth=depth,
            is_keyword=tok.kind is TokenKind.KEYWORD,
            is_identifier=tok.kind is TokenKind.IDENTIFIER,
        )
        for i, (node_id, depth, tok) in enumerate(
            zip(data["node_id"], data["depth"], tokens)
        )
    ]
    return DatasetRecord(
        record_id=data["id"],
        source=data["source"],
        tokens=tokens,
        tree=tree,
        annotations=annotations,
        omega=np.array(data["omega"], dtype=np.int8),
        eta=np.array(data["eta"], dtype=np.float64),
        mu=np.array(data["mu"], dtype=np.float64),
    )


def dataset_to_jsonl(records: list[DatasetRecord], config: AnchorConfig) -> str:
    header = {
        "schema": SCHEMA_NAME,
        "version": SCHEMA_VERSION,
        "count": len(records),
        "anchor": {
            "strategy": config.strategy.value,
            "gamma": config.gamma,
            "beta": config.beta,
            "d0": config.d0,
        },
    }
    lines = [json.dumps(header, sort_keys=True, separators=(",", ":"))]
    lines.extend(
        json.dumps(_record_to_dict(r), sort_keys=True, separators=(",", ":"))
        for r in records
    )
    return "\n".join(lines) + "\n"


def dataset_from_jsonl(payload: str) -> tuple[list[DatasetRecord], AnchorConfig]:
    lines = [ln for ln in payload.splitlines() if ln.strip()]
    if not lines:
        raise EmptyCorpusError("empty dataset file")
    header = json.loads(lines[0])
    if header.get("schema") != SCHEMA_NAME:
        raise IngestError("not an anchordiff dataset")
    if header.get("version") != SCHEMA_VERSION:
        raise IngestError(f"unsupported schema version {header.get('version')}")
    anchor = header["anchor"]
    config = AnchorConfig(
        strategy=AnchorStrategy(anchor["strategy"]),
        gamma=anchor["gamma"],
        beta=anchor["beta"],
        d0=anchor["d0"],
    )
    records = [_record_from_dict(json.loads(ln)) for ln in lines[1:]]
    return records, config


def save_dataset(path: str | Path, records: list[DatasetRecord], config: AnchorConfig) -> None:
    Path(path).write_text(dataset_to_jsonl(records, config), encoding="utf-8")


def load_dataset(path: str | Path) -> tuple[list[DatasetRecord], AnchorConfig]:
    return dataset_from_jsonl(Path(path).read_text(encoding="utf-8"))


# -- synthetic corpus -------------------------------------------------------
#
# The generator emits programs over one fixed token skeleton per corpus:
# every program has the same number of tokens with the same structural
# positions, so padding and layout carry no information. Variation lives in
# the token choices at a fixed set of slots. Choices are hierarchical: the
# loop form steers the nested condition's operator, which steers the inner
# assignment's operator and operand (with a little noise at each link),
# while function/parameter/accumulator names are drawn independently from
# small pools. Ancestor tokens are therefore genuinely informative about
# the tokens nested beneath them.

_FN_NAMES = ["scan", "tally"]
_SEQ_PARAMS = ["xs", "ys"]
_SCALAR_PARAMS = ["n", "k"]
_ACC_BY_BRANCH = ["acc", "total", "out", "best"]
_LOOP_VARS = ["v", "u"]
_COP_BY_BRANCH = ["<", ">", "<=", "=="]
_COPS = ["<", ">", "<=", "=="]
_OPR_BY_COP = {"<": "+", ">": "-", "<=": "*", "==": "+"}
_OPRS = ["+", "-", "*"]

# Per-link choice noise: loose upstream, tight near the leaves, so a token
# correlates strongly with its immediate ancestors and only weakly with
# distant context. Slots independent of the hierarchy (names, initial
# value) are skewed binary choices, keeping their entropy low.
_NOISE_BRANCH = 0.3
_NOISE_COND = 0.25
_NOISE_LEAF = 0.1
_NOISE_FREE = 0.4


def synth_corpus(seed: int, n_programs: int = 120, max_depth: int = 6) -> list[str]:
    """Generate parse-valid programs sharing one token skeleton.

    ``max_depth`` sets how many if-layers nest inside the loop (one layer
    reaches tree depth 6). Deterministic under ``seed``; duplicates across
    programs are expected and act as corpus weights.
    """
    if max_depth < 3:
        raise ValueError("max_depth must be >= 3 to admit ancestor chains")
    layers = min(max(max_depth - 5, 1), 3)
    rnd = random.Random(seed)
    programs = [_generate_program(rnd, layers) for _ in range(n_programs)]
    for text in programs:
        if not is_syntactically_valid(text):
            raise AssertionError("generator produced an invalid program")
    return programs


def _pick(rnd: random.Random, noise: float, primary: str, pool: list[str]) -> str:
    """Mostly the primary choice, with uniform noise at the given rate."""
    if rnd.random() < noise:
        return rnd.choice(pool)
    return primary


def _generate_program(rnd: random.Random, layers: int) -> str:
    name = _pick(rnd, _NOISE_FREE, _FN_NAMES[0], _FN_NAMES)
    seq = _pick(rnd, _NOISE_FREE, _SEQ_PARAMS[0], _SEQ_PARAMS)
    lim = _pick(rnd, _NOISE_FREE, _SCALAR_PARAMS[0], _SCALAR_PARAMS)
    init = _pick(rnd, _NOISE_FREE, "0", ["0", "1"])

    branch = rnd.randrange(4)
    acc = _pick(rnd, _NOISE_BRANCH, _ACC_BY_BRANCH[branch], _ACC_BY_BRANCH)
    if branch in (0, 1):
        lvar = _LOOP_VARS[branch]
        loop = f"for {lvar} in {seq}"
    else:
        lvar = acc
        loop = f"while {acc} {'<' if branch == 2 else '<='} {lim}"

    lines = [
        f"def {name}({seq}, {lim}):",
        f"    {acc} = {init}",
        f"    {loop}:",
    ]
    cop = _pick(rnd, _NOISE_COND, _COP_BY_BRANCH[branch], _COPS)
    for d in range(layers):
        kw = _pick(
            rnd, _NOISE_COND, "if" if (branch + d) % 2 == 0 else "while",
            ["if", "while"],
        )
        right = _pick(
            rnd, _NOISE_LEAF, lim if cop in ("<", "<=") else init,
            [lim, "0", "1", "2"],
        )
        lines.append("    " * (2 + d) + f"{kw} {lvar} {cop} {right}:")
        if d < layers - 1:
            cop = _pick(rnd, _NOISE_COND, _COP_BY_BRANCH[(branch + d + 1) % 4], _COPS)
    opr = _pick(rnd, _NOISE_LEAF, _OPR_BY_COP[cop], _OPRS)
    operand = _pick(
        rnd, _NOISE_LEAF, {"+": lim, "-": "1", "*": "2"}[opr], [lim, "1", "2", lvar]
    )
    lines.append("    " * (2 + layers) + f"{acc} = {lvar} {opr} {operand}")
    lines.append(f"    return {acc}")
    return "\n".join(lines) + "\n"

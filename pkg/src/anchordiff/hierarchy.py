"""Mapping token positions onto the syntax tree.

Each position gets the deepest node whose character span intersects the
token's span; ties at equal depth go to the node containing the token's
start byte, then to the leftmost intersecting node. The induced partial
order over positions (ancestor-of, or same-node-and-earlier) is what the
anchor weighting and the ancestry probe are built on.
"""

from __future__ import annotations

from dataclasses import dataclass

from .minilang import SyntaxTree, Token, TokenKind


@dataclass(frozen=True)
class TokenAnnotation:
    position: int
    node_id: int
    depth: int
    is_keyword: bool
    is_identifier: bool


@dataclass(frozen=True)
class AncestorChain:
    """Positions from innermost (the target) to outermost ancestor."""

    positions: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.positions)


class InsufficientDepth(Exception):
    """Raised when a position lacks the requested number of token-bearing
    ancestors."""

    def __init__(self, position: int, requested: int, achieved: int):
        super().__init__(
            f"position {position}: requested chain length {requested}, "
            f"only {achieved} token-bearing ancestors available"
        )
        self.position = position
        self.requested = requested
        self.achieved = achieved


def _intersects(node_span: tuple[int, int], tok_span: tuple[int, int]) -> bool:
    ns, ne = node_span
    ts, te = tok_span
    if ts == te:  # zero-width structural token: treat as the point ts
        return ns <= ts < ne
    return max(ns, ts) < min(ne, te)


def _contains_start(node_span: tuple[int, int], tok_span: tuple[int, int]) -> bool:
    return node_span[0] <= tok_span[0] < node_span[1]


def node_for_span(tree: SyntaxTree, span: tuple[int, int]) -> int:
    """Deepest intersecting node for a byte span, with the tie-break rule.

    Falls back to the root when nothing intersects (e.g. trailing
    zero-width tokens), so every token always has a home.
    """
    candidates: list[int] = []
    stack = [tree.root]
    while stack:
        node_id = stack.pop()
        node = tree.nodes[node_id]
        if not _intersects(node.span, span):
            continue
        candidates.append(node_id)
        stack.extend(node.children)
    if not candidates:
        return tree.root
    best_depth = max(tree.nodes[c].depth for c in candidates)
    deepest = [c for c in candidates if tree.nodes[c].depth == best_depth]
    if len(deepest) == 1:
        return deepest[0]
    owning = [c for c in deepest if _contains_start(tree.nodes[c].span, span)]
    if owning:
        return min(owning, key=lambda c: (tree.nodes[c].span[0], c))
    return min(deepest, key=lambda c: (tree.nodes[c].span[0], c))


def assign_nodes(tree: SyntaxTree, tokens: list[Token]) -> list[TokenAnnotation]:
    """Annotate every token with its node, depth, and kind flags."""
    annotations = []
    for tok in tokens:
        node_id = node_for_span(tree, tok.span)
        annotations.append(
            TokenAnnotation(
                position=tok.index,
                node_id=node_id,
                depth=tree.nodes[node_id].depth,
                is_keyword=tok.kind is TokenKind.KEYWORD,
                is_identifier=tok.kind is TokenKind.IDENTIFIER,
            )
        )
    return annotations


def precedes(
    l: int, l_prime: int, annotations: list[TokenAnnotation], tree: SyntaxTree
) -> bool:
    """True iff position ``l`` is syntactically coarser than ``l_prime``:
    node(l) is a strict ancestor of node(l'), or both share a node and
    ``l`` comes first."""
    a = annotations[l].node_id
    b = annotations[l_prime].node_id
    if a == b:
        return l < l_prime
    return tree.is_strict_ancestor(a, b)


def positions_by_node(annotations: list[TokenAnnotation]) -> dict[int, list[int]]:
    """Node id -> sorted positions of the tokens assigned to it."""
    index: dict[int, list[int]] = {}
    for ann in annotations:
        index.setdefault(ann.node_id, []).append(ann.position)
    for positions in index.values():
        positions.sort()
    return index


def designated_position(
    node_id: int,
    annotations: list[TokenAnnotation],
    node_index: dict[int, list[int]],
    rule: str = "keyword_first",
) -> int | None:
    """The position standing in for a node in ancestor chains.

    ``keyword_first`` picks the node's first Keyword token when it has one
    (the rule that reproduces keyword-stepping chains); ``first_token``
    always takes the earliest assigned position.
    """
    positions = node_index.get(node_id)
    if not positions:
        return None
    if rule == "keyword_first":
        for pos in positions:
            if annotations[pos].is_keyword:
                return pos
    elif rule != "first_token":
        raise ValueError(f"unknown designation rule: {rule!r}")
    return positions[0]


def ancestor_chain(
    l0: int,
    k: int,
    annotations: list[TokenAnnotation],
    tree: SyntaxTree,
    rule: str = "keyword_first",
    node_index: dict[int, list[int]] | None = None,
) -> AncestorChain:
    """Build the contiguous ancestor chain l0, l1, ..., lk.

    Each step climbs to the nearest strict ancestor that owns at least one
    token and takes that node's designated position. Nodes owning no tokens
    contribute no positions to the partial order, so skipping them keeps
    the chain contiguous. Raises InsufficientDepth when fewer than ``k``
    token-bearing ancestors exist.
    """
    if k < 0:
        raise ValueError("chain length k must be >= 0")
    if node_index is None:
        node_index = positions_by_node(annotations)
    positions = [l0]
    current = annotations[l0].node_id
    while len(positions) < k + 1:
        current = tree.parent(current)
        while current is not None and not node_index.get(current):
            current = tree.parent(current)
        if current is None:
            raise InsufficientDepth(l0, k, len(positions) - 1)
        designated = designated_position(current, annotations, node_index, rule)
        positions.append(designated)
    return AncestorChain(tuple(positions))


def max_chain_length(
    l0: int,
    annotations: list[TokenAnnotation],
    tree: SyntaxTree,
    node_index: dict[int, list[int]] | None = None,
) -> int:
    """Number of token-bearing strict ancestors above ``l0``'s node."""
    if node_index is None:
        node_index = positions_by_node(annotations)
    count = 0
    current = tree.parent(annotations[l0].node_id)
    while current is not None:
        if node_index.get(current):
            count += 1
        current = tree.parent(current)
    return count

"""Syntax tree node types for the mini-language.

Every node records a half-open byte span into the original source. Child
spans nest inside parent spans and siblings never overlap, which is what
lets tokens be mapped back onto the tree by span intersection.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class NodeKind(enum.Enum):
    MODULE = "Module"
    FUNCTION_DEF = "FunctionDef"
    IF = "If"
    WHILE = "While"
    FOR = "For"
    RETURN = "Return"
    ASSIGN = "Assign"
    BINOP = "BinOp"
    COMPARE = "Compare"
    CALL = "Call"
    SUBSCRIPT = "Subscript"
    NAME = "Name"
    CONSTANT = "Constant"
    ARGUMENTS = "Arguments"
    EXPR_STMT = "ExprStmt"


@dataclass
class AstNode:
    """One tree node: kind, byte span, ordered children, depth (root = 0).

    ``data`` carries the node's payload where one exists: the operator
    lexeme for BinOp/Compare, the identifier for Name/FunctionDef, the
    literal text for Constant, and the statement keyword for keyword-only
    ExprStmt forms (pass/break/continue).
    """

    id: int
    kind: NodeKind
    span: tuple[int, int]
    children: list[int] = field(default_factory=list)
    depth: int = 0
    data: str | None = None


class SyntaxTree:
    """Parsed program: node table, root id, and the original source."""

    def __init__(self, source: str, nodes: list[AstNode], root: int):
        self.source = source
        self.nodes = {n.id: n for n in nodes}
        self.root = root
        self._parent: dict[int, int] = {}
        for node in nodes:
            for child in node.children:
                self._parent[child] = node.id

    def node(self, node_id: int) -> AstNode:
        return self.nodes[node_id]

    def parent(self, node_id: int) -> int | None:
        return self._parent.get(node_id)

    def depth(self, node_id: int) -> int:
        return self.nodes[node_id].depth

    def is_strict_ancestor(self, a: int, b: int) -> bool:
        """True when node ``a`` lies strictly above node ``b``."""
        if a == b:
            return False
        cur = self._parent.get(b)
        while cur is not None:
            if cur == a:
                return True
            cur = self._parent.get(cur)
        return False

    def walk(self, start: int | None = None):
        """Yield node ids in depth-first preorder."""
        stack = [self.root if start is None else start]
        while stack:
            node_id = stack.pop()
            yield node_id
            stack.extend(reversed(self.nodes[node_id].children))

    def pretty(self) -> str:
        """Indented one-line-per-node rendering, useful in demos."""
        lines: list[str] = []

        def rec(node_id: int, indent: int) -> None:
            node = self.nodes[node_id]
            label = node.kind.value
            if node.data is not None:
                label += f"({node.data!r})"
            lines.append("  " * indent + f"{label} [{node.span[0]}:{node.span[1]}]")
            for child in node.children:
                rec(child, indent + 1)

        rec(self.root, 0)
        return "\n".join(lines)

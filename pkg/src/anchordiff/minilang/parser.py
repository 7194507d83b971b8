"""Recursive-descent parser for the mini-language.

Grammar (EBNF in docs/grammar.md): a module of statements, with function
defs, if/elif/else, while, for-in, return, assignment, and expression
statements; expressions cover names, numeric/string constants, calls,
subscripts, arithmetic, comparisons, boolean operators, and parentheses.

Node spans run from the first token a construct consumed to the last, so a
parenthesized operand contributes its opening paren to the enclosing
expression's span while keeping its own span tight around the inner tokens.
"""

from __future__ import annotations

from .lexer import Token, TokenKind, tokenize
from .nodes import AstNode, NodeKind, SyntaxTree

CONSTANT_KEYWORDS = frozenset({"True", "False", "None"})
COMPARE_OPS = frozenset({"<", ">", "<=", ">=", "==", "!="})
ADD_OPS = frozenset({"+", "-"})
MUL_OPS = frozenset({"*", "/", "//", "%"})


class ParseError(Exception):
    """Grammar violation, with the byte offset where parsing stopped."""

    def __init__(self, offset: int, message: str):
        super().__init__(f"offset {offset}: {message}")
        self.offset = offset
        self.message = message


class _Parser:
    def __init__(self, source: str, tokens: list[Token]):
        self.source = source
        self.tokens = tokens
        self.pos = 0
        self.last_content = 0  # index of the last non-structural token consumed
        self.nodes: list[AstNode] = []
        self.func_depth = 0
        self.loop_depth = 0

    # -- token helpers ----------------------------------------------------

    def _peek(self) -> Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _at_end(self) -> bool:
        return self.pos >= len(self.tokens)

    def _advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind not in (TokenKind.NEWLINE, TokenKind.INDENT, TokenKind.DEDENT):
            self.last_content = self.pos
        self.pos += 1
        return tok

    def _error_offset(self) -> int:
        tok = self._peek()
        return tok.start if tok is not None else len(self.source)

    def _fail(self, expected: str) -> ParseError:
        tok = self._peek()
        found = "end of input" if tok is None else f"{tok.kind.value} {tok.text!r}"
        return ParseError(self._error_offset(), f"expected {expected}, found {found}")

    def _match_text(self, kind: TokenKind, text: str) -> bool:
        tok = self._peek()
        return tok is not None and tok.kind is kind and tok.text == text

    def _expect_text(self, kind: TokenKind, text: str) -> Token:
        if not self._match_text(kind, text):
            raise self._fail(repr(text))
        return self._advance()

    def _expect_kind(self, kind: TokenKind, expected: str) -> Token:
        tok = self._peek()
        if tok is None or tok.kind is not kind:
            raise self._fail(expected)
        return self._advance()

    def _expect_newline(self) -> None:
        if self._at_end():
            return
        if self._peek().kind is TokenKind.NEWLINE:
            self._advance()
            return
        raise self._fail("end of line")

    # -- node helpers ------------------------------------------------------

    def _new_node(
        self,
        kind: NodeKind,
        span: tuple[int, int],
        children: list[int] | None = None,
        data: str | None = None,
    ) -> int:
        node = AstNode(len(self.nodes), kind, span, children or [], 0, data)
        self.nodes.append(node)
        return node.id

    def _span_from(self, start_index: int) -> tuple[int, int]:
        """Span from a construct's first token to its last content token,
        so trailing newlines and dedents stay outside statement spans."""
        first = self.tokens[start_index]
        last = self.tokens[self.last_content]
        return (first.start, last.end)

    # -- module ------------------------------------------------------------

    def parse_module(self) -> SyntaxTree:
        body: list[int] = []
        while not self._at_end():
            tok = self._peek()
            if tok.kind is TokenKind.INDENT:
                raise ParseError(tok.start, "unexpected indent")
            if tok.kind is TokenKind.DEDENT:
                raise ParseError(tok.start, "unexpected dedent")
            body.append(self._statement())
        content = [
            t
            for t in self.tokens
            if t.kind not in (TokenKind.NEWLINE, TokenKind.INDENT, TokenKind.DEDENT)
        ]
        span = (content[0].start, content[-1].end) if content else (0, 0)
        root = self._new_node(NodeKind.MODULE, span, body)
        tree = SyntaxTree(self.source, self.nodes, root)
        _assign_depths(tree)
        return tree

    # -- statements ----------------------------------------------------------

    def _statement(self) -> int:
        tok = self._peek()
        if tok.kind is TokenKind.KEYWORD:
            if tok.text == "def":
                return self._function_def()
            if tok.text == "if":
                return self._if_stmt()
            if tok.text == "while":
                return self._while_stmt()
            if tok.text == "for":
                return self._for_stmt()
            if tok.text == "return":
                return self._return_stmt()
            if tok.text in ("pass", "break", "continue"):
                return self._keyword_stmt(tok.text)
        return self._expr_or_assign()

    def _block(self) -> list[int]:
        self._expect_text(TokenKind.DELIMITER, ":")
        if self._at_end():
            raise self._fail("an indented block")
        self._expect_kind(TokenKind.NEWLINE, "end of line")
        self._expect_kind(TokenKind.INDENT, "an indented block")
        body = [self._statement()]
        while not self._at_end() and self._peek().kind is not TokenKind.DEDENT:
            body.append(self._statement())
        if not self._at_end():
            self._advance()  # DEDENT
        return body

    def _function_def(self) -> int:
        start = self.pos
        self._advance()  # def
        name = self._expect_kind(TokenKind.IDENTIFIER, "a function name")
        args_start = self.pos
        self._expect_text(TokenKind.DELIMITER, "(")
        params: list[int] = []
        if not self._match_text(TokenKind.DELIMITER, ")"):
            while True:
                p = self._expect_kind(TokenKind.IDENTIFIER, "a parameter name or ')'")
                params.append(self._new_node(NodeKind.NAME, p.span, data=p.text))
                if self._match_text(TokenKind.DELIMITER, ","):
                    self._advance()
                    continue
                break
        self._expect_text(TokenKind.DELIMITER, ")")
        args = self._new_node(NodeKind.ARGUMENTS, self._span_from(args_start), params)
        self.func_depth += 1
        outer_loops, self.loop_depth = self.loop_depth, 0
        try:
            body = self._block()
        finally:
            self.func_depth -= 1
            self.loop_depth = outer_loops
        return self._new_node(
            NodeKind.FUNCTION_DEF, self._span_from(start), [args] + body, data=name.text
        )

    def _if_stmt(self, keyword: str = "if") -> int:
        start = self.pos
        self._expect_text(TokenKind.KEYWORD, keyword)
        test = self._expression()
        children = [test] + self._block()
        if self._match_text(TokenKind.KEYWORD, "elif"):
            children.append(self._if_stmt("elif"))
        elif self._match_text(TokenKind.KEYWORD, "else"):
            self._advance()
            children.extend(self._block())
        return self._new_node(NodeKind.IF, self._span_from(start), children)

    def _while_stmt(self) -> int:
        start = self.pos
        self._advance()
        test = self._expression()
        self.loop_depth += 1
        try:
            body = self._block()
        finally:
            self.loop_depth -= 1
        return self._new_node(NodeKind.WHILE, self._span_from(start), [test] + body)

    def _for_stmt(self) -> int:
        start = self.pos
        self._advance()
        var = self._expect_kind(TokenKind.IDENTIFIER, "a loop variable")
        target = self._new_node(NodeKind.NAME, var.span, data=var.text)
        self._expect_text(TokenKind.KEYWORD, "in")
        iterable = self._expression()
        self.loop_depth += 1
        try:
            body = self._block()
        finally:
            self.loop_depth -= 1
        return self._new_node(
            NodeKind.FOR, self._span_from(start), [target, iterable] + body
        )

    def _return_stmt(self) -> int:
        tok = self._peek()
        if self.func_depth == 0:
            raise ParseError(tok.start, "'return' outside a function")
        start = self.pos
        self._advance()
        children = []
        if not self._at_end() and self._peek().kind is not TokenKind.NEWLINE:
            children.append(self._expression())
        node = self._new_node(NodeKind.RETURN, self._span_from(start), children)
        self._expect_newline()
        return node

    def _keyword_stmt(self, text: str) -> int:
        tok = self._peek()
        if text in ("break", "continue") and self.loop_depth == 0:
            raise ParseError(tok.start, f"'{text}' outside a loop")
        self._advance()
        node = self._new_node(NodeKind.EXPR_STMT, tok.span, data=text)
        self._expect_newline()
        return node

    def _expr_or_assign(self) -> int:
        start = self.pos
        expr = self._expression()
        if self._match_text(TokenKind.OPERATOR, "="):
            target_kind = self.nodes[expr].kind
            if target_kind not in (NodeKind.NAME, NodeKind.SUBSCRIPT):
                raise ParseError(
                    self._peek().start, "cannot assign to this expression"
                )
            self._advance()
            value = self._expression()
            node = self._new_node(
                NodeKind.ASSIGN, self._span_from(start), [expr, value]
            )
        else:
            node = self._new_node(
                NodeKind.EXPR_STMT, self.nodes[expr].span, [expr]
            )
        self._expect_newline()
        return node

    # -- expressions -------------------------------------------------------

    def _expression(self) -> int:
        return self._or_expr()

    def _or_expr(self) -> int:
        start = self.pos
        node = self._and_expr()
        while self._match_text(TokenKind.KEYWORD, "or"):
            self._advance()
            right = self._and_expr()
            node = self._new_node(
                NodeKind.BINOP, self._span_from(start), [node, right], data="or"
            )
        return node

    def _and_expr(self) -> int:
        start = self.pos
        node = self._not_expr()
        while self._match_text(TokenKind.KEYWORD, "and"):
            self._advance()
            right = self._not_expr()
            node = self._new_node(
                NodeKind.BINOP, self._span_from(start), [node, right], data="and"
            )
        return node

    def _not_expr(self) -> int:
        if self._match_text(TokenKind.KEYWORD, "not"):
            start = self.pos
            self._advance()
            operand = self._not_expr()
            return self._new_node(
                NodeKind.BINOP, self._span_from(start), [operand], data="not"
            )
        return self._comparison()

    def _comparison(self) -> int:
        start = self.pos
        node = self._arith()
        while (
            self._peek() is not None
            and self._peek().kind is TokenKind.OPERATOR
            and self._peek().text in COMPARE_OPS
        ):
            op = self._advance().text
            right = self._arith()
            node = self._new_node(
                NodeKind.COMPARE, self._span_from(start), [node, right], data=op
            )
        return node

    def _arith(self) -> int:
        start = self.pos
        node = self._term()
        while (
            self._peek() is not None
            and self._peek().kind is TokenKind.OPERATOR
            and self._peek().text in ADD_OPS
        ):
            op = self._advance().text
            right = self._term()
            node = self._new_node(
                NodeKind.BINOP, self._span_from(start), [node, right], data=op
            )
        return node

    def _term(self) -> int:
        start = self.pos
        node = self._power()
        while (
            self._peek() is not None
            and self._peek().kind is TokenKind.OPERATOR
            and self._peek().text in MUL_OPS
        ):
            op = self._advance().text
            right = self._power()
            node = self._new_node(
                NodeKind.BINOP, self._span_from(start), [node, right], data=op
            )
        return node

    def _power(self) -> int:
        start = self.pos
        node = self._postfix()
        if self._match_text(TokenKind.OPERATOR, "**"):
            self._advance()
            right = self._power()  # right-associative
            node = self._new_node(
                NodeKind.BINOP, self._span_from(start), [node, right], data="**"
            )
        return node

    def _postfix(self) -> int:
        start = self.pos
        node = self._atom()
        while True:
            if self._match_text(TokenKind.DELIMITER, "("):
                self._advance()
                args: list[int] = []
                if not self._match_text(TokenKind.DELIMITER, ")"):
                    while True:
                        args.append(self._expression())
                        if self._match_text(TokenKind.DELIMITER, ","):
                            self._advance()
                            continue
                        break
                self._expect_text(TokenKind.DELIMITER, ")")
                node = self._new_node(
                    NodeKind.CALL, self._span_from(start), [node] + args
                )
            elif self._match_text(TokenKind.DELIMITER, "["):
                self._advance()
                index = self._expression()
                self._expect_text(TokenKind.DELIMITER, "]")
                node = self._new_node(
                    NodeKind.SUBSCRIPT, self._span_from(start), [node, index]
                )
            else:
                return node

    def _atom(self) -> int:
        tok = self._peek()
        if tok is None:
            raise self._fail("an expression")
        if tok.kind is TokenKind.IDENTIFIER:
            self._advance()
            return self._new_node(NodeKind.NAME, tok.span, data=tok.text)
        if tok.kind in (TokenKind.NUMBER, TokenKind.STRING):
            self._advance()
            return self._new_node(NodeKind.CONSTANT, tok.span, data=tok.text)
        if tok.kind is TokenKind.KEYWORD and tok.text in CONSTANT_KEYWORDS:
            self._advance()
            return self._new_node(NodeKind.CONSTANT, tok.span, data=tok.text)
        if tok.kind is TokenKind.DELIMITER and tok.text == "(":
            self._advance()
            node = self._expression()
            self._expect_text(TokenKind.DELIMITER, ")")
            return node
        raise self._fail("an expression")


def _assign_depths(tree: SyntaxTree) -> None:
    tree.nodes[tree.root].depth = 0
    stack = [tree.root]
    while stack:
        node = tree.nodes[stack.pop()]
        for child in node.children:
            tree.nodes[child].depth = node.depth + 1
            stack.append(child)


def parse(source: str) -> SyntaxTree:
    """Parse ``source`` into a SyntaxTree, raising ParseError on violations."""
    return _Parser(source, tokenize(source)).parse_module()


def is_syntactically_valid(source: str) -> bool:
    """True iff ``source`` parses under the mini-language grammar."""
    try:
        parse(source)
        return True
    except ParseError:
        return False

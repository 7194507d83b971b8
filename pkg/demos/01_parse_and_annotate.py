"""Walkthrough: tokenizing, parsing, and mapping tokens onto the tree.

Shows exact byte spans, the deepest-intersecting-node assignment, and the
partial order that everything downstream builds on.
"""

from anchordiff import assign_nodes, parse, precedes, tokenize
from anchordiff.hierarchy import ancestor_chain

SOURCE = """\
def search(xs, t):
    lo = 0
    while lo < t:
        if xs < t:
            mid = lo
            return mid
    return lo
"""

print("source:")
print(SOURCE)

tokens = tokenize(SOURCE)
print(f"{len(tokens)} tokens; first ten with spans:")
for tok in tokens[:10]:
    print(f"  {tok.index:3d} {tok.kind.value:<10} {tok.text!r:<10} {tok.span}")

tree = parse(SOURCE)
print("\nsyntax tree (kind, payload, byte span):")
print(tree.pretty())

annotations = assign_nodes(tree, tokens)
print("\ntoken -> deepest intersecting node:")
for tok, ann in list(zip(tokens, annotations))[:12]:
    node = tree.node(ann.node_id)
    print(f"  {tok.text!r:<10} -> {node.kind.value:<12} depth {ann.depth}")

# The partial order: a position is coarser than everything nested below it.
pos = {t.text: t.index for t in tokens}
print("\npartial order checks:")
print("  def  over return :", precedes(pos["def"], pos["return"], annotations, tree))
print("  while over mid   :", precedes(pos["while"], pos["mid"], annotations, tree))
print("  lo   over mid    :", precedes(pos["lo"], pos["mid"], annotations, tree))

# Ancestor chains step through each node's designated (keyword-first) token.
mid = next(t.index for t in tokens
           if t.text == "mid" and tokens[t.index - 1].text == "return")
chain = ancestor_chain(mid, 4, annotations, tree)
print("\nancestor chain from the returned 'mid':",
      [tokens[p].text for p in chain.positions])

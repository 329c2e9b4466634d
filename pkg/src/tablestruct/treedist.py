"""Ordered-tree edit distance (Zhang & Shasha) with unit edit costs."""

from __future__ import annotations

import numpy as np


class Node:
    """Ordered tree node; label is any hashable value."""

    __slots__ = ("label", "children")

    def __init__(self, label, children=None):
        self.label = label
        self.children = list(children) if children else []

    def add(self, node: "Node") -> "Node":
        self.children.append(node)
        return self

    def size(self) -> int:
        return 1 + sum(c.size() for c in self.children)

    def __repr__(self):
        return f"Node({self.label!r}, {len(self.children)} kids)"


def _postorder(root: Node):
    """Postorder nodes plus, per node, the postorder index of its leftmost leaf."""
    nodes, lmds = [], []

    def walk(n: Node) -> int:
        first = None
        for c in n.children:
            lm = walk(c)
            if first is None:
                first = lm
        idx = len(nodes)
        nodes.append(n)
        lmds.append(first if first is not None else idx)
        return lmds[idx]

    walk(root)
    return nodes, lmds


def _keyroots(lmds):
    last = {}
    for i, lm in enumerate(lmds):
        last[lm] = i
    return sorted(last.values())


def tree_edit_distance(a: Node, b: Node, label_cost=None) -> int:
    """Minimum number of node insertions, deletions and relabels.

    Relabel cost defaults to 1 when labels differ, 0 otherwise.
    """
    if label_cost is None:
        label_cost = lambda x, y: 0 if x == y else 1
    an, al = _postorder(a)
    bn, bl = _postorder(b)
    na, nb = len(an), len(bn)
    td = np.zeros((na, nb), dtype=np.float64)

    for i in _keyroots(al):
        for j in _keyroots(bl):
            m = i - al[i] + 2
            n = j - bl[j] + 2
            fd = np.zeros((m, n), dtype=np.float64)
            ioff = al[i] - 1
            joff = bl[j] - 1
            for x in range(1, m):
                fd[x, 0] = fd[x - 1, 0] + 1
            for y in range(1, n):
                fd[0, y] = fd[0, y - 1] + 1
            for x in range(1, m):
                for y in range(1, n):
                    if al[i] == al[x + ioff] and bl[j] == bl[y + joff]:
                        fd[x, y] = min(
                            fd[x - 1, y] + 1,
                            fd[x, y - 1] + 1,
                            fd[x - 1, y - 1] + label_cost(an[x + ioff].label, bn[y + joff].label),
                        )
                        td[x + ioff, y + joff] = fd[x, y]
                    else:
                        p = al[x + ioff] - 1 - ioff
                        q = bl[y + joff] - 1 - joff
                        fd[x, y] = min(
                            fd[x - 1, y] + 1,
                            fd[x, y - 1] + 1,
                            fd[p, q] + td[x + ioff, y + joff],
                        )
    return int(td[-1, -1])

"""Causal directed acyclic graphs: a small text format, d-separation and
backdoor/censoring adjustment-set search.

The text format::

    graph access_to_care {
        node age role=covariate;
        node U latent;              # access to healthcare
        node A role=treatment;
        edge age -> A;
        ...
    }

The outcome node stands for the underlying outcome ``Y``.  The masked
observation (``Y`` when uncensored, missing otherwise) is never drawn; the
censoring condition is checked by d-separation in a mutilated graph instead.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations

from .errors import CycleError, GraphError, GraphSyntaxError, UnknownNodeError

ROLES = ("covariate", "treatment", "censoring", "outcome", "none")
_SINGLETON_ROLES = ("treatment", "censoring", "outcome")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
MAX_POOL = 20


@dataclass(frozen=True)
class Node:
    id: str
    role: str = "none"
    latent: bool = False

    def __post_init__(self):
        if not _IDENT.match(self.id):
            raise GraphError(f"invalid node id {self.id!r}")
        if self.role not in ROLES:
            raise GraphError(f"node {self.id!r}: unknown role {self.role!r}")
        if self.latent and self.role in _SINGLETON_ROLES:
            raise GraphError(f"latent node {self.id!r} cannot have role={self.role}")


@dataclass(frozen=True)
class PathWitness:
    """A path between two nodes, e.g. ``("A", "<-", "U", "->", "Y")``."""

    path: tuple
    blocked: bool
    blocking_node: str | None = None

    @property
    def nodes(self):
        return self.path[::2]

    def __str__(self):
        return " ".join(self.path)

    def to_dict(self):
        return {"path": str(self), "blocked": self.blocked, "blocking_node": self.blocking_node}


@dataclass(frozen=True)
class DSeparation:
    """Result of a d-separation query; truthy when separated."""

    separated: bool
    witnesses: tuple = ()

    def __bool__(self):
        return self.separated


@dataclass(frozen=True)
class CausalGraph:
    name: str
    nodes: tuple
    edges: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))
        if not _IDENT.match(self.name):
            raise GraphError(f"invalid graph name {self.name!r}")
        seen = set()
        for node in self.nodes:
            if node.id in seen:
                raise GraphError(f"duplicate node {node.id!r}")
            seen.add(node.id)
        edge_set = set()
        for a, b in self.edges:
            for end in (a, b):
                if end not in seen:
                    raise GraphError(f"edge {a} -> {b} references undeclared node {end!r}")
            if a == b:
                raise GraphError(f"self-edge on {a!r}")
            if (a, b) in edge_set:
                raise GraphError(f"duplicate edge {a} -> {b}")
            edge_set.add((a, b))
        for role in _SINGLETON_ROLES:
            holders = [n.id for n in self.nodes if n.role == role]
            if len(holders) > 1:
                raise GraphError(f"at most one {role} node allowed, got {', '.join(holders)}")
        cycle = _find_cycle([n.id for n in self.nodes], self.children_map)
        if cycle:
            raise CycleError(cycle)

    # -- structure -----------------------------------------------------------

    @cached_property
    def node_map(self):
        return {n.id: n for n in self.nodes}

    @cached_property
    def parents_map(self):
        out = {n.id: [] for n in self.nodes}
        for a, b in self.edges:
            out[b].append(a)
        return {k: tuple(v) for k, v in out.items()}

    @cached_property
    def children_map(self):
        out = {n.id: [] for n in self.nodes}
        for a, b in self.edges:
            out[a].append(b)
        return {k: tuple(v) for k, v in out.items()}

    def __contains__(self, node_id):
        return node_id in self.node_map

    def node(self, node_id):
        try:
            return self.node_map[node_id]
        except KeyError:
            raise UnknownNodeError(node_id) from None

    def parents(self, node_id):
        self.node(node_id)
        return self.parents_map[node_id]

    def children(self, node_id):
        self.node(node_id)
        return self.children_map[node_id]

    def descendants(self, node_id):
        """Strict descendants of ``node_id``."""
        self.node(node_id)
        return _closure([node_id], self.children_map) - {node_id}

    def ancestors(self, node_id):
        self.node(node_id)
        return _closure([node_id], self.parents_map) - {node_id}

    def topological_order(self):
        indeg = {n.id: len(self.parents_map[n.id]) for n in self.nodes}
        queue = deque(n.id for n in self.nodes if indeg[n.id] == 0)
        order = []
        while queue:
            v = queue.popleft()
            order.append(v)
            for c in self.children_map[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    queue.append(c)
        return order

    def role_node(self, role):
        """Id of the node carrying ``role`` (treatment/censoring/outcome) or None."""
        for n in self.nodes:
            if n.role == role:
                return n.id
        return None

    @property
    def treatment(self):
        return self.role_node("treatment")

    @property
    def outcome(self):
        return self.role_node("outcome")

    @property
    def censoring(self):
        return self.role_node("censoring")

    @property
    def measured(self):
        return tuple(n.id for n in self.nodes if not n.latent)

    def remove_edges_out_of(self, node_id):
        self.node(node_id)
        edges = [e for e in self.edges if e[0] != node_id]
        return CausalGraph(self.name, self.nodes, edges)

    def render(self):
        return render_graph(self)

    def to_dict(self):
        return {
            "name": self.name,
            "nodes": [{"id": n.id, "role": n.role, "latent": n.latent} for n in self.nodes],
            "edges": [list(e) for e in self.edges],
        }


def _closure(start, nbrs):
    seen = set(start)
    stack = list(start)
    while stack:
        v = stack.pop()
        for w in nbrs[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def _find_cycle(order, children):
    color = {v: 0 for v in order}
    for root in order:
        if color[root]:
            continue
        stack = [(root, iter(children[root]))]
        path = [root]
        color[root] = 1
        while stack:
            v, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[v] = 2
                stack.pop()
                path.pop()
            elif color[nxt] == 1:
                return path[path.index(nxt):] + [nxt]
            elif color[nxt] == 0:
                color[nxt] = 1
                path.append(nxt)
                stack.append((nxt, iter(children[nxt])))
    return None


# -- text format -----------------------------------------------------------------

_TOKEN = re.compile(
    r"(?P<ws>[ \t\r\n]+)|(?P<comment>#[^\n]*)|(?P<arrow>->)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<punct>[{};=])"
)


def _tokenize(text):
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise GraphSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            tokens.append((m.group(), line, pos - line_start + 1))
        chunk = m.group()
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    tokens.append(("<eof>", line, pos - line_start + 1))
    return tokens


class _Cursor:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    def peek(self):
        return self.tokens[self.i][0]

    def take(self):
        tok = self.tokens[self.i]
        if tok[0] != "<eof>":
            self.i += 1
        return tok

    def expect(self, value=None, ident=False):
        text, line, col = self.take()
        if ident:
            if not _IDENT.match(text) or text == "<eof>":
                raise GraphSyntaxError(f"expected identifier, got {text!r}", line, col)
        elif text != value:
            raise GraphSyntaxError(f"expected {value!r}, got {text!r}", line, col)
        return text, line, col


def parse_graph(text):
    """Parse graph source into a validated :class:`CausalGraph`.

    Node order follows declaration order.  Raises :class:`GraphSyntaxError`
    (with line/column), :class:`CycleError` or :class:`GraphError`.
    """
    cur = _Cursor(_tokenize(text))
    cur.expect("graph")
    name, _, _ = cur.expect(ident=True)
    cur.expect("{")
    nodes, edges = [], []
    declared = {}
    while cur.peek() != "}":
        kw, line, col = cur.take()
        if kw == "node":
            nid, nline, ncol = cur.expect(ident=True)
            role, latent = "none", False
            while cur.peek() != ";":
                attr, aline, acol = cur.take()
                if attr == "latent":
                    latent = True
                elif attr == "role":
                    cur.expect("=")
                    role, rline, rcol = cur.expect(ident=True)
                    if role not in ROLES:
                        raise GraphSyntaxError(f"unknown role {role!r}", rline, rcol)
                else:
                    raise GraphSyntaxError(f"unexpected {attr!r} in node declaration", aline, acol)
            cur.expect(";")
            if nid in declared:
                raise GraphError(f"duplicate node {nid!r} (line {nline}, column {ncol})")
            declared[nid] = True
            nodes.append(Node(nid, role, latent))
        elif kw == "edge":
            src, sline, scol = cur.expect(ident=True)
            cur.expect("->")
            dst, dline, dcol = cur.expect(ident=True)
            cur.expect(";")
            edges.append(((src, dst), (sline, scol)))
        elif kw == "<eof>":
            raise GraphSyntaxError("unexpected end of input, missing '}'", line, col)
        else:
            raise GraphSyntaxError(f"expected 'node', 'edge' or '}}', got {kw!r}", line, col)
    cur.expect("}")
    tail, line, col = cur.take()
    if tail != "<eof>":
        raise GraphSyntaxError(f"unexpected {tail!r} after graph body", line, col)
    for (src, dst), (line, col) in edges:
        for end in (src, dst):
            if end not in declared:
                raise GraphError(f"edge {src} -> {dst} references undeclared node {end!r} "
                                 f"(line {line}, column {col})")
    return CausalGraph(name, nodes, [e for e, _ in edges])


def render_graph(g):
    """Canonical text: nodes then edges, one per line."""
    lines = [f"graph {g.name} {{"]
    for n in g.nodes:
        parts = [f"node {n.id}"]
        if n.role != "none":
            parts.append(f"role={n.role}")
        if n.latent:
            parts.append("latent")
        lines.append("  " + " ".join(parts) + ";")
    for a, b in g.edges:
        lines.append(f"  edge {a} -> {b};")
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- d-separation ----------------------------------------------------------------

def _reaches(parents, children, x, y, z):
    """Bayes-ball reachability: is there an active trail from x to y given z?"""
    anc_z = _closure(z, parents)
    visited = set()
    queue = deque([(x, "up")])
    while queue:
        v, d = queue.popleft()
        if (v, d) in visited:
            continue
        visited.add((v, d))
        if v == y:
            return True
        if d == "up" and v not in z:
            queue.extend((p, "up") for p in parents[v])
            queue.extend((c, "down") for c in children[v])
        elif d == "down":
            if v not in z:
                queue.extend((c, "down") for c in children[v])
            if v in anc_z:
                queue.extend((p, "up") for p in parents[v])
    return False


def _open_path(parents, children, x, y, z):
    """Depth-first search for one simple open path from x to y given z."""
    anc_z = _closure(z, parents)

    def neighbours(v):
        for p in parents[v]:
            yield p, "<-"
        for c in children[v]:
            yield c, "->"

    def interior_ok(prev_arrow, v, next_arrow):
        collider = prev_arrow == "->" and next_arrow == "<-"
        return v in anc_z if collider else v not in z

    path = [x]
    on_path = {x}

    def dfs(v, prev_arrow):
        for w, arrow in neighbours(v):
            if w in on_path:
                continue
            if prev_arrow is not None and not interior_ok(prev_arrow, v, arrow):
                continue
            path.extend((arrow, w))
            if w == y:
                return True
            on_path.add(w)
            if dfs(w, arrow):
                return True
            on_path.discard(w)
            del path[-2:]
        return False

    return tuple(path) if dfs(x, None) else None


def d_separated(g, x, y, z=()):
    """Test whether ``x`` and ``y`` are d-separated by the set ``z`` in ``g``.

    Returns a :class:`DSeparation` which is truthy when separated; when not,
    ``witnesses`` holds one open path.
    """
    for v in (x, y, *z):
        g.node(v)
    z = frozenset(z)
    if x == y:
        raise GraphError(f"d-separation query needs two distinct nodes, got {x!r} twice")
    if x in z or y in z:
        raise GraphError("query nodes must not be in the conditioning set")
    if not _reaches(g.parents_map, g.children_map, x, y, z):
        return DSeparation(True)
    path = _open_path(g.parents_map, g.children_map, x, y, z)
    return DSeparation(False, (PathWitness(path, blocked=False),))


def adjustment_pool(g):
    """Measured non-descendants of the treatment, minus censoring and outcome."""
    a, y, c = _require_roles(g)
    excluded = g.descendants(a) | {a, y, c}
    return sorted(n.id for n in g.nodes if not n.latent and n.id not in excluded)


def _require_roles(g):
    a, y = g.treatment, g.outcome
    if a is None or y is None:
        raise GraphError("adjustment-set search needs a treatment and an outcome node", step="3")
    return a, y, g.censoring


def backdoor_blocked(g, z):
    """Condition (i): ``z`` blocks every path into the treatment."""
    a, y, _ = _require_roles(g)
    return d_separated(g.remove_edges_out_of(a), a, y, z)


def censoring_blocked(g, z):
    """Condition (ii): censoring is independent of the outcome given ``z`` and treatment,
    with edges out of the censoring node removed.  Trivially true without censoring."""
    a, y, c = _require_roles(g)
    if c is None:
        return DSeparation(True)
    return d_separated(g.remove_edges_out_of(c), c, y, set(z) | {a})


def find_adjustment_sets(g):
    """All minimal valid adjustment sets, ordered by size then lexicographically.

    A set is valid when it satisfies both :func:`backdoor_blocked` and
    :func:`censoring_blocked`.  The search is exhaustive over
    :func:`adjustment_pool` (at most ``MAX_POOL`` nodes).
    """
    a, y, c = _require_roles(g)
    pool = adjustment_pool(g)
    if len(pool) > MAX_POOL:
        raise GraphError(f"candidate pool has {len(pool)} nodes; limit is {MAX_POOL}", step="3")
    g_a = g.remove_edges_out_of(a)
    g_c = g.remove_edges_out_of(c) if c is not None else None
    found = []
    for k in range(len(pool) + 1):
        for combo in combinations(pool, k):
            s = frozenset(combo)
            if any(f <= s for f in found):
                continue
            if _reaches(g_a.parents_map, g_a.children_map, a, y, s):
                continue
            if g_c is not None and _reaches(g_c.parents_map, g_c.children_map, c, y, s | {a}):
                continue
            found.append(s)
    return found

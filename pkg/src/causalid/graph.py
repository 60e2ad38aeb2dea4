"""Mixed causal graphs and the text format that declares them.

Two graph kinds live here.  An :class:`Admg` is an acyclic directed mixed
graph over observed variables: directed edges carry causal influence,
bidirected edges mark a hidden common cause of their endpoints.  A
:class:`LatentDag` is an ordinary DAG whose vertex set is split into
observed and latent variables; it is the ground-truth object structural
models are built on, and `latent_project` maps it onto the Admg it induces
over the observed variables.

Graph text format (UTF-8, LF or CRLF):

    # comment to end of line
    node A          # optional explicit declaration, fixes vertex order
    latent U        # declares U and marks it latent
    A -> B          # directed edge
    A <-> B         # bidirected edge (Admg files only)

One statement per line, tokens separated by spaces or tabs, blank lines
ignored.  Vertices not declared by `node`/`latent` are auto-declared at
first mention (pass ``strict=True`` to forbid that).  A file containing a
`latent` line parses as a LatentDag, anything else as an Admg.  Note the
corner this typing rule leaves: a LatentDag without latent vertices prints
to text that re-parses as the structurally identical Admg.

All graph values are immutable; every function here is pure.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping

__all__ = [
    "Admg",
    "LatentDag",
    "GraphError",
    "GraphParseError",
    "parse_graph",
    "print_graph",
    "latent_project",
    "canonical_dag",
    "ancestors",
    "descendants",
    "districts",
    "m_separated",
    "separated_pairs",
    "mutilate",
    "topological_order",
]

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


class GraphError(ValueError):
    """Invalid graph structure or graph operation argument."""


class GraphParseError(GraphError):
    """Syntax or consistency error in graph text, with source position."""

    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


def _check_name(name: str) -> str:
    if not _NAME_RE.match(name):
        raise GraphError(f"invalid variable name {name!r}")
    return name


def _stable_topo(vertices: tuple[str, ...], parents: Mapping[str, tuple[str, ...]]) -> tuple[str, ...]:
    # Kahn's algorithm, always taking the earliest declared ready vertex so
    # the order is a pure function of the graph value.
    remaining = {v: set(parents[v]) for v in vertices}
    order: list[str] = []
    while remaining:
        ready = next((v for v in vertices if v in remaining and not remaining[v]), None)
        if ready is None:
            cyc = sorted(remaining)
            raise GraphError(f"directed cycle among {{{', '.join(cyc)}}}")
        order.append(ready)
        del remaining[ready]
        for waiting in remaining.values():
            waiting.discard(ready)
    return tuple(order)


@dataclass(frozen=True)
class Admg:
    """Acyclic directed mixed graph.

    ``vertices`` keeps first-mention order and drives every deterministic
    iteration.  ``directed`` holds (parent, child) pairs; ``bidirected``
    holds unordered pairs normalized to vertex order.  A vertex pair may
    carry both a directed and a bidirected edge.
    """

    vertices: tuple[str, ...]
    directed: frozenset[tuple[str, str]]
    bidirected: frozenset[tuple[str, str]]
    _parents: dict = field(init=False, repr=False, compare=False, default=None)
    _children: dict = field(init=False, repr=False, compare=False, default=None)
    _siblings: dict = field(init=False, repr=False, compare=False, default=None)
    _topo: tuple = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        index = {}
        for v in self.vertices:
            _check_name(v)
            if v in index:
                raise GraphError(f"duplicate vertex {v!r}")
            index[v] = len(index)
        parents = {v: [] for v in self.vertices}
        children = {v: [] for v in self.vertices}
        siblings = {v: [] for v in self.vertices}
        for a, b in self.directed:
            if a == b:
                raise GraphError(f"self-loop on {a!r}")
            if a not in index or b not in index:
                raise GraphError(f"edge {a!r} -> {b!r} uses an undeclared vertex")
            parents[b].append(a)
            children[a].append(b)
        norm = set()
        for a, b in self.bidirected:
            if a == b:
                raise GraphError(f"self-loop on {a!r}")
            if a not in index or b not in index:
                raise GraphError(f"edge {a!r} <-> {b!r} uses an undeclared vertex")
            pair = (a, b) if index[a] < index[b] else (b, a)
            norm.add(pair)
            siblings[a].append(b)
            siblings[b].append(a)
        object.__setattr__(self, "bidirected", frozenset(norm))
        key = index.get
        for table in (parents, children, siblings):
            for v, vs in table.items():
                table[v] = tuple(sorted(set(vs), key=key))
        object.__setattr__(self, "_parents", parents)
        object.__setattr__(self, "_children", children)
        object.__setattr__(self, "_siblings", siblings)
        object.__setattr__(self, "_topo", _stable_topo(self.vertices, parents))

    @staticmethod
    def from_edges(
        directed: Iterable[tuple[str, str]] = (),
        bidirected: Iterable[tuple[str, str]] = (),
        vertices: Iterable[str] = (),
    ) -> "Admg":
        """Build a graph with vertex order taken from first mention."""
        order: list[str] = []
        seen = set()

        def note(v):
            if v not in seen:
                seen.add(v)
                order.append(v)

        for v in vertices:
            note(v)
        directed = tuple(directed)
        bidirected = tuple(bidirected)
        for a, b in directed:
            note(a)
            note(b)
        for a, b in bidirected:
            note(a)
            note(b)
        return Admg(tuple(order), frozenset(directed), frozenset(bidirected))

    def parents(self, v: str) -> tuple[str, ...]:
        return self._parents[v]

    def children(self, v: str) -> tuple[str, ...]:
        return self._children[v]

    def siblings(self, v: str) -> tuple[str, ...]:
        """Bidirected neighbors of ``v``."""
        return self._siblings[v]

    def has_vertex(self, v: str) -> bool:
        return v in self._parents

    def subgraph(self, keep: Iterable[str]) -> "Admg":
        """Induced subgraph; vertex order is inherited."""
        keep = set(keep)
        for v in keep:
            self._require(v)
        return Admg(
            tuple(v for v in self.vertices if v in keep),
            frozenset(e for e in self.directed if e[0] in keep and e[1] in keep),
            frozenset(e for e in self.bidirected if e[0] in keep and e[1] in keep),
        )

    def _require(self, v: str) -> None:
        if v not in self._parents:
            raise GraphError(f"unknown vertex {v!r}")


@dataclass(frozen=True)
class LatentDag:
    """DAG over observed plus latent variables.

    ``vertices`` is the combined first-mention order; ``latent`` flags the
    hidden subset.  In canonical form (the output of :func:`canonical_dag`)
    every latent vertex is a root with exactly two observed children, but
    arbitrary latent structure is accepted and projected.
    """

    vertices: tuple[str, ...]
    latent: frozenset[str]
    directed: frozenset[tuple[str, str]]
    _parents: dict = field(init=False, repr=False, compare=False, default=None)
    _children: dict = field(init=False, repr=False, compare=False, default=None)
    _topo: tuple = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        index = {}
        for v in self.vertices:
            _check_name(v)
            if v in index:
                raise GraphError(f"duplicate vertex {v!r}")
            index[v] = len(index)
        for v in self.latent:
            if v not in index:
                raise GraphError(f"latent flag on undeclared vertex {v!r}")
        parents = {v: [] for v in self.vertices}
        children = {v: [] for v in self.vertices}
        for a, b in self.directed:
            if a == b:
                raise GraphError(f"self-loop on {a!r}")
            if a not in index or b not in index:
                raise GraphError(f"edge {a!r} -> {b!r} uses an undeclared vertex")
            parents[b].append(a)
            children[a].append(b)
        key = index.get
        for table in (parents, children):
            for v, vs in table.items():
                table[v] = tuple(sorted(set(vs), key=key))
        object.__setattr__(self, "_parents", parents)
        object.__setattr__(self, "_children", children)
        object.__setattr__(self, "_topo", _stable_topo(self.vertices, parents))

    @property
    def observed(self) -> tuple[str, ...]:
        return tuple(v for v in self.vertices if v not in self.latent)

    def parents(self, v: str) -> tuple[str, ...]:
        return self._parents[v]

    def children(self, v: str) -> tuple[str, ...]:
        return self._children[v]

    def topological_order(self) -> tuple[str, ...]:
        return self._topo

    def as_admg(self) -> Admg:
        """Forget the latent marking; used for separation queries on DAGs."""
        return Admg(self.vertices, self.directed, frozenset())


# ---------------------------------------------------------------------------
# parsing and printing


def parse_graph(text: str, strict: bool = False) -> Admg | LatentDag:
    """Parse graph text into an Admg or (if any `latent` line) a LatentDag.

    ``strict`` requires every edge endpoint to be declared by an earlier
    `node`/`latent` line.  Errors carry 1-based line/column positions.
    """
    order: list[str] = []
    declared: set[str] = set()
    latent: set[str] = set()
    directed: list[tuple[str, str]] = []
    directed_seen: set[tuple[str, str]] = set()
    bidirected: list[tuple[str, str]] = []
    bidirected_seen: set[frozenset[str]] = set()
    bidirected_pos: dict[frozenset[str], int] = {}

    def mention(name: str, lineno: int, col: int) -> str:
        if not _NAME_RE.match(name):
            raise GraphParseError(f"invalid name {name!r}", lineno, col)
        if name not in declared:
            if strict:
                raise GraphParseError(f"undeclared vertex {name!r}", lineno, col)
            declared.add(name)
            order.append(name)
        return name

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        tokens = line.split()
        if not tokens:
            continue
        cols = []
        pos = 0
        for tok in tokens:
            pos = line.index(tok, pos)
            cols.append(pos + 1)
            pos += len(tok)
        head = tokens[0]
        if head in ("node", "latent"):
            if len(tokens) != 2:
                raise GraphParseError(f"expected `{head} NAME`", lineno, cols[0])
            name = tokens[1]
            if not _NAME_RE.match(name):
                raise GraphParseError(f"invalid name {name!r}", lineno, cols[1])
            if name in declared:
                if (head == "latent") != (name in latent):
                    raise GraphParseError(
                        f"{name!r} declared both observed and latent", lineno, cols[1]
                    )
            else:
                declared.add(name)
                order.append(name)
            if head == "latent":
                latent.add(name)
        elif len(tokens) == 3 and tokens[1] in ("->", "<->"):
            a = mention(tokens[0], lineno, cols[0])
            b = mention(tokens[2], lineno, cols[2])
            if a == b:
                raise GraphParseError(f"self-loop on {a!r}", lineno, cols[0])
            if tokens[1] == "->":
                if (a, b) in directed_seen:
                    raise GraphParseError(f"duplicate edge {a} -> {b}", lineno, cols[0])
                directed_seen.add((a, b))
                directed.append((a, b))
            else:
                pair = frozenset((a, b))
                if pair in bidirected_seen:
                    raise GraphParseError(f"duplicate edge {a} <-> {b}", lineno, cols[0])
                bidirected_seen.add(pair)
                bidirected.append((a, b))
                bidirected_pos[pair] = lineno
        else:
            raise GraphParseError(f"cannot parse statement {' '.join(tokens)!r}", lineno, cols[0])

    if latent:
        if bidirected:
            pair = frozenset(bidirected[0])
            raise GraphParseError(
                "bidirected edges cannot appear together with latent declarations",
                bidirected_pos[pair],
            )
        try:
            return LatentDag(tuple(order), frozenset(latent), frozenset(directed))
        except GraphError as exc:
            raise GraphParseError(str(exc), lineno_of_end(text)) from exc
    try:
        return Admg(tuple(order), frozenset(directed), frozenset(bidirected))
    except GraphError as exc:
        raise GraphParseError(str(exc), lineno_of_end(text)) from exc


def lineno_of_end(text: str) -> int:
    return max(1, len(text.splitlines()))


def print_graph(g: Admg | LatentDag) -> str:
    """Deterministic text form; `parse_graph` inverts it.

    Declarations come first in vertex order, then directed edges sorted by
    (parent, child) position, then bidirected edges by position.
    """
    lines = []
    index = {v: i for i, v in enumerate(g.vertices)}
    if isinstance(g, LatentDag):
        for v in g.vertices:
            lines.append(f"latent {v}" if v in g.latent else f"node {v}")
        edges = sorted(g.directed, key=lambda e: (index[e[0]], index[e[1]]))
        lines.extend(f"{a} -> {b}" for a, b in edges)
    else:
        lines.extend(f"node {v}" for v in g.vertices)
        edges = sorted(g.directed, key=lambda e: (index[e[0]], index[e[1]]))
        lines.extend(f"{a} -> {b}" for a, b in edges)
        bi = sorted(g.bidirected, key=lambda e: (index[e[0]], index[e[1]]))
        lines.extend(f"{a} <-> {b}" for a, b in bi)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# projection between the two graph kinds


def latent_project(g: LatentDag) -> Admg:
    """Admg over the observed vertices induced by hiding the latents.

    Directed X -> Y iff some directed path X -> ... -> Y has only latent
    intermediates; bidirected X <-> Y iff a common-cause path X <- ... L ...
    -> Y exists with every intermediate latent.
    """
    observed = g.observed
    obs_set = set(observed)

    def latent_reach(start_children: Iterable[str]) -> set[str]:
        # observed vertices reachable through latent-only intermediates
        hit: set[str] = set()
        stack = list(start_children)
        seen_latent: set[str] = set()
        while stack:
            v = stack.pop()
            if v in obs_set:
                hit.add(v)
            elif v not in seen_latent:
                seen_latent.add(v)
                stack.extend(g.children(v))
        return hit

    directed = set()
    for x in observed:
        for y in latent_reach(g.children(x)):
            if y != x:
                directed.add((x, y))

    bidirected = set()
    for u in g.vertices:
        if u not in g.latent:
            continue
        hit = sorted(latent_reach(g.children(u)), key=g.vertices.index)
        for i, x in enumerate(hit):
            for y in hit[i + 1 :]:
                bidirected.add((x, y))

    return Admg(observed, frozenset(directed), frozenset(bidirected))


def canonical_dag(g: Admg) -> LatentDag:
    """Replace each bidirected edge with a fresh latent common parent.

    The latent for X <-> Y is named U_X_Y (suffixed if taken); latents are
    appended after the observed vertices in bidirected-edge order, so
    ``latent_project(canonical_dag(g)) == g`` exactly.
    """
    taken = set(g.vertices)
    order = list(g.vertices)
    latent = []
    directed = set(g.directed)
    index = {v: i for i, v in enumerate(g.vertices)}
    for a, b in sorted(g.bidirected, key=lambda e: (index[e[0]], index[e[1]])):
        name = f"U_{a}_{b}"
        while name in taken:
            name += "_"
        taken.add(name)
        order.append(name)
        latent.append(name)
        directed.add((name, a))
        directed.add((name, b))
    return LatentDag(tuple(order), frozenset(latent), frozenset(directed))


# ---------------------------------------------------------------------------
# graph primitives


def _closure(g: Admg, s: Iterable[str], step) -> frozenset[str]:
    out = set()
    stack = list(s)
    for v in stack:
        g._require(v)
    while stack:
        v = stack.pop()
        if v not in out:
            out.add(v)
            stack.extend(step(v))
    return frozenset(out)


def ancestors(g: Admg, s: Iterable[str]) -> frozenset[str]:
    """Reflexive transitive closure under the parent relation."""
    return _closure(g, s, g.parents)


def descendants(g: Admg, s: Iterable[str]) -> frozenset[str]:
    """Reflexive transitive closure under the child relation."""
    return _closure(g, s, g.children)


def districts(g: Admg) -> tuple[tuple[str, ...], ...]:
    """Partition of the vertices into bidirected-connected components.

    Members are sorted by name and blocks by their least member, so the
    result is a pure function of the graph value.
    """
    unseen = set(g.vertices)
    blocks = []
    for v in g.vertices:
        if v not in unseen:
            continue
        block = _closure(g, [v], lambda u: (w for w in g.siblings(u) if w in unseen))
        unseen -= block
        blocks.append(tuple(sorted(block)))
    return tuple(sorted(blocks, key=lambda b: b[0]))


def topological_order(g: Admg) -> tuple[str, ...]:
    """Topological order of the directed part, stable in vertex order."""
    return g._topo


def mutilate(
    g: Admg,
    cut_incoming: Iterable[str] = (),
    cut_outgoing: Iterable[str] = (),
) -> Admg:
    """Graph surgery.

    Removes directed edges into ``cut_incoming``, directed edges out of
    ``cut_outgoing``, and bidirected edges touching ``cut_incoming``.
    Vertices are untouched.
    """
    cin = set(cut_incoming)
    cout = set(cut_outgoing)
    for v in cin | cout:
        g._require(v)
    return Admg(
        g.vertices,
        frozenset(e for e in g.directed if e[1] not in cin and e[0] not in cout),
        frozenset(e for e in g.bidirected if e[0] not in cin and e[1] not in cin),
    )


# ---------------------------------------------------------------------------
# m-separation

# Walk states are (vertex, arrived-with-arrowhead) pairs.  Passing through a
# vertex with arrowheads on both sides (a collider) needs the vertex to be
# an ancestor of the conditioning set; every other passage needs the vertex
# to be outside it.


def _reachable(g: Admg, src: str, z: frozenset[str], an_z: frozenset[str]) -> set[str]:
    hit: set[str] = set()
    seen: set[tuple[str, bool]] = set()
    stack: list[tuple[str, bool]] = []

    def leave(v: str, arrived_head: bool, through: bool) -> None:
        # through=False at the walk's source, where no passage rule applies
        tails_ok = not through or v not in z
        heads_ok = tails_ok if (not through or not arrived_head) else v in an_z
        if tails_ok:
            for w in g.children(v):
                stack.append((w, True))
        if heads_ok:
            for w in g.parents(v):
                stack.append((w, False))
            for w in g.siblings(v):
                stack.append((w, True))

    leave(src, False, through=False)
    while stack:
        v, arrived_head = stack.pop()
        if (v, arrived_head) in seen:
            continue
        seen.add((v, arrived_head))
        hit.add(v)
        leave(v, arrived_head, through=True)
    hit.discard(src)
    return hit


def m_separated(
    g: Admg,
    x: Iterable[str],
    y: Iterable[str],
    z: Iterable[str] = (),
) -> bool:
    """True iff every path between ``x`` and ``y`` is blocked given ``z``.

    Bidirected edges carry arrowheads at both ends; a collider is open iff
    it or one of its descendants is conditioned on.  The three sets must be
    pairwise disjoint.
    """
    xs, ys, zs = frozenset(x), frozenset(y), frozenset(z)
    for v in xs | ys | zs:
        g._require(v)
    if xs & ys or xs & zs or ys & zs:
        raise GraphError("x, y, z must be pairwise disjoint")
    an_z = ancestors(g, zs)
    return all(not (_reachable(g, s, zs, an_z) & ys) for s in xs)


def separated_pairs(g: Admg, z: Iterable[str] = ()) -> frozenset[tuple[str, str]]:
    """All m-separated vertex pairs given ``z``, as name-sorted tuples.

    Bulk form of :func:`m_separated` for sweeps over many conditioning
    sets; separation of sets decomposes into separation of their members.
    """
    zs = frozenset(z)
    for v in zs:
        g._require(v)
    an_z = ancestors(g, zs)
    rest = [v for v in g.vertices if v not in zs]
    out = set()
    reach = {v: _reachable(g, v, zs, an_z) for v in rest}
    for i, u in enumerate(rest):
        for w in rest[i + 1 :]:
            if w not in reach[u]:
                out.add((u, w) if u < w else (w, u))
    return frozenset(out)

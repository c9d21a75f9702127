"""Layered 2-source 2-sink networks.

A network has ``L + 1`` layers; layer 0 holds the two sources, layer ``L`` the
two sinks and the layers in between hold relays.  Edges only join adjacent
layers.  Node ``(l, i)`` is the ``i``-th node (0-based) of layer ``l``; an
edge ``(l, i, j)`` runs from ``(l, i)`` to ``(l + 1, j)``.

For networks with two nodes in every layer each hop is one of the 2x2
connectivity patterns, written as a letter::

    P   tx1->rx1, tx2->rx2                  (parallel)
    Z   tx1->rx1, tx2->rx1, tx2->rx2
    S   tx1->rx1, tx1->rx2, tx2->rx2
    X   all four edges

so in a ``Z`` hop the second receiver hears only the second transmitter, and
in an ``S`` hop the first receiver hears only the first transmitter.  The
remaining covering patterns (crossed parallel, and the two three-edge patterns
missing a diagonal edge) are label-swapped images of these.
"""

from __future__ import annotations

import itertools
import re
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

from .flow import WiredGraph, max_flow

__all__ = [
    "NetworkFormatError",
    "PrunedRelayWarning",
    "LayeredNetwork",
    "PatternString",
    "LETTER_ORDER",
    "HOP_LETTERS",
    "make_network",
    "prune",
    "parse_network",
    "serialize_network",
    "hop_letter",
    "pattern_word",
    "canonicalize",
    "network_from_word",
    "generic_min_cut",
    "count_paths",
]

# Letter order used for canonical (lexicographically minimal) words.
LETTER_ORDER = {"Z": 0, "S": 1, "X": 2, "P": 3}

HOP_LETTERS = {
    "P": frozenset({(0, 0), (1, 1)}),
    "Z": frozenset({(0, 0), (1, 0), (1, 1)}),
    "S": frozenset({(0, 0), (0, 1), (1, 1)}),
    "X": frozenset({(0, 0), (0, 1), (1, 0), (1, 1)}),
}
_LETTER_OF = {v: k for k, v in HOP_LETTERS.items()}


class NetworkFormatError(ValueError):
    """Raised for malformed or invalid network-description documents."""


class PrunedRelayWarning(UserWarning):
    """A relay not on any source-to-sink path was removed."""


@dataclass(frozen=True, eq=False)
class LayeredNetwork:
    """Immutable layered network.

    Attributes
    ----------
    layers : tuple of int
        Node count per layer, ``layers[0] == layers[-1] == 2``.
    edges : tuple of (l, i, j)
        Sorted, 0-based.
    mode : {"wireless", "wired"}
    coefficients : mapping edge -> complex (wireless) or Fraction (wired), optional
    pruned : tuple of (l, i)
        Original coordinates of relays removed during validation.
    name : str
    """

    layers: tuple
    edges: tuple
    mode: str = "wireless"
    coefficients: Mapping | None = None
    pruned: tuple = field(default=())
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(int(n) for n in self.layers))
        object.__setattr__(self, "edges", tuple(sorted(set(tuple(int(x) for x in e) for e in self.edges))))
        if self.coefficients is not None:
            object.__setattr__(self, "coefficients", dict(sorted(self.coefficients.items())))

    def __eq__(self, other):
        if not isinstance(other, LayeredNetwork):
            return NotImplemented
        return (self.layers, self.edges, self.mode, self.coefficients) == (
            other.layers,
            other.edges,
            other.mode,
            other.coefficients,
        )

    def __hash__(self):
        return hash((self.layers, self.edges, self.mode))

    @property
    def num_hops(self) -> int:
        return len(self.layers) - 1

    @property
    def nodes(self) -> list:
        return [(l, i) for l, n in enumerate(self.layers) for i in range(n)]

    @property
    def sources(self) -> list:
        return [(0, 0), (0, 1)]

    @property
    def sinks(self) -> list:
        return [(self.num_hops, 0), (self.num_hops, 1)]

    def is_two_relay(self) -> bool:
        return all(n == 2 for n in self.layers)

    def in_neighbors(self, node) -> list:
        l, j = node
        return [(l - 1, a) for (ll, a, b) in self.edges if ll == l - 1 and b == j]

    def out_neighbors(self, node) -> list:
        l, i = node
        return [(l + 1, b) for (ll, a, b) in self.edges if ll == l and a == i]

    def hop_matrix(self, l: int) -> np.ndarray:
        m = np.zeros((self.layers[l], self.layers[l + 1]), dtype=int)
        for (ll, i, j) in self.edges:
            if ll == l:
                m[i, j] = 1
        return m

    def ancestors(self, node) -> set:
        """All nodes with a directed path to ``node`` (excluding it)."""
        seen: set = set()
        frontier = [node]
        while frontier:
            nxt = []
            for v in frontier:
                for u in self.in_neighbors(v):
                    if u not in seen:
                        seen.add(u)
                        nxt.append(u)
            frontier = nxt
        return seen

    def descendants(self, node) -> set:
        seen: set = set()
        frontier = [node]
        while frontier:
            nxt = []
            for v in frontier:
                for u in self.out_neighbors(v):
                    if u not in seen:
                        seen.add(u)
                        nxt.append(u)
            frontier = nxt
        return seen

    def source_ancestry(self, node) -> set:
        """Indices (0/1) of the sources that reach ``node``."""
        if node[0] == 0:
            return {node[1]}
        return {u[1] for u in self.ancestors(node) if u[0] == 0}

    def relabel(self, perms: Iterable) -> "LayeredNetwork":
        """Apply a within-layer permutation per layer (``perms[l][old] = new``)."""
        perms = [tuple(p) for p in perms]
        edges = [(l, perms[l][i], perms[l + 1][j]) for (l, i, j) in self.edges]
        coeffs = None
        if self.coefficients is not None:
            coeffs = {(l, perms[l][i], perms[l + 1][j]): c for (l, i, j), c in self.coefficients.items()}
        return LayeredNetwork(self.layers, edges, self.mode, coeffs, self.pruned, self.name)

    def to_wired_graph(self) -> WiredGraph:
        if self.mode != "wired":
            raise ValueError("max-flow routing needs a wired network")
        caps = {}
        for e in self.edges:
            l, i, j = e
            c = Fraction(1) if not self.coefficients else Fraction(self.coefficients[e])
            caps[(_node_name(self, (l, i)), _node_name(self, (l + 1, j)))] = c
        return WiredGraph.from_edges(
            [(u, v, c) for (u, v), c in caps.items()],
            [_node_name(self, s) for s in self.sources],
            [_node_name(self, d) for d in self.sinks],
        )


def _node_name(net: LayeredNetwork, node) -> str:
    l, i = node
    if l == 0:
        return f"s{i + 1}"
    if l == net.num_hops:
        return f"d{i + 1}"
    return f"v{i + 1}^{l}"


# --------------------------------------------------------------------------
# construction, validation, pruning
# --------------------------------------------------------------------------


def _validate(layers, edges, mode, coefficients) -> None:
    if len(layers) < 2:
        raise NetworkFormatError("a network needs at least two layers")
    if layers[0] != 2 or layers[-1] != 2:
        raise NetworkFormatError("wrong source/sink count: layer 0 and layer L must have exactly 2 nodes")
    if any(n < 0 for n in layers):
        raise NetworkFormatError("negative layer size")
    if mode not in ("wireless", "wired"):
        raise NetworkFormatError(f"unknown mode {mode!r}")
    L = len(layers) - 1
    for (l, i, j) in edges:
        if not 0 <= l < L:
            raise NetworkFormatError(f"non-layered edge: layer {l} has no next layer")
        if not (0 <= i < layers[l] and 0 <= j < layers[l + 1]):
            raise NetworkFormatError(f"edge ({l}, {i + 1}, {j + 1}) references a missing node")
    if coefficients:
        for e, c in coefficients.items():
            if e not in set(edges):
                raise NetworkFormatError(f"coefficient for unknown edge {e}")
            if mode == "wireless" and c == 0:
                raise NetworkFormatError(f"zero wireless coefficient on edge {e}")
            if mode == "wired" and c <= 0:
                raise NetworkFormatError(f"nonpositive capacity on edge {e}")


def prune(net: LayeredNetwork) -> LayeredNetwork:
    """Remove relays that are not on any source-to-sink path."""
    L = net.num_hops
    fwd = set(net.sources)
    for l in range(L):
        fwd |= {(l + 1, j) for (ll, i, j) in net.edges if ll == l and (l, i) in fwd}
    bwd = set(net.sinks)
    for l in range(L - 1, -1, -1):
        bwd |= {(l, i) for (ll, i, j) in net.edges if ll == l and (l + 1, j) in bwd}
    keep = {v for v in net.nodes if v[0] in (0, L) or (v in fwd and v in bwd)}
    removed = tuple(v for v in net.nodes if v not in keep)
    if not removed:
        return net
    index = {}
    layers = []
    for l, n in enumerate(net.layers):
        kept = [i for i in range(n) if (l, i) in keep]
        layers.append(len(kept))
        for new, old in enumerate(kept):
            index[(l, old)] = new
    edges = []
    coeffs = {} if net.coefficients is not None else None
    for e in net.edges:
        l, i, j = e
        if (l, i) in keep and (l + 1, j) in keep:
            ne = (l, index[(l, i)], index[(l + 1, j)])
            edges.append(ne)
            if coeffs is not None and e in net.coefficients:
                coeffs[ne] = net.coefficients[e]
    return LayeredNetwork(tuple(layers), edges, net.mode, coeffs, net.pruned + removed, net.name)


def make_network(layers, edges, mode="wireless", coefficients=None, name="", warn=True) -> LayeredNetwork:
    """Validate, prune and build a :class:`LayeredNetwork` (0-based edges)."""
    layers = tuple(int(n) for n in layers)
    edges = [tuple(int(x) for x in e) for e in edges]
    _validate(layers, edges, mode, coefficients)
    net = prune(LayeredNetwork(layers, edges, mode, coefficients, (), name))
    if net.pruned and warn:
        warnings.warn(
            f"pruned relays not on any source-sink path: {[f'v{i + 1}^{l}' for l, i in net.pruned]}",
            PrunedRelayWarning,
            stacklevel=2,
        )
    return net


_LAYERS_RE = re.compile(r"^layers\s*:\s*\[([^\]]*)\]\s*$")
_KEY_RE = re.compile(r"^(\w+)\s*:\s*(.*)$")


def parse_network(text: str, warn: bool = True) -> LayeredNetwork:
    """Parse a network-description document.

    The grammar is line based::

        # comment
        name: fig5
        layers: [2, 3, 3, 2]
        mode: wireless            # or wired
        edge l i j [re im | capacity]

    ``l`` is the transmitting layer (0-based), ``i`` and ``j`` are 1-based
    node indices within layers ``l`` and ``l + 1``.
    """
    layers = None
    mode = "wireless"
    name = ""
    edges = []
    coeffs: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("edge"):
            parts = line.split()
            if parts[0] != "edge" or len(parts) not in (4, 5, 6):
                raise NetworkFormatError(f"line {lineno}: malformed edge line {raw!r}")
            try:
                l, i, j = (int(x) for x in parts[1:4])
            except ValueError as exc:
                raise NetworkFormatError(f"line {lineno}: edge indices must be integers") from exc
            if i < 1 or j < 1:
                raise NetworkFormatError(f"line {lineno}: node indices are 1-based")
            e = (l, i - 1, j - 1)
            if e in coeffs or e in edges:
                raise NetworkFormatError(f"line {lineno}: duplicate edge")
            edges.append(e)
            extra = parts[4:]
            try:
                if len(extra) == 2:
                    coeffs[e] = complex(float(extra[0]), float(extra[1]))
                elif len(extra) == 1:
                    coeffs[e] = Fraction(extra[0])
            except (ValueError, ZeroDivisionError) as exc:
                raise NetworkFormatError(f"line {lineno}: bad edge value {' '.join(extra)!r}") from exc
            continue
        m = _LAYERS_RE.match(line)
        if m:
            try:
                layers = tuple(int(x) for x in m.group(1).split(",") if x.strip())
            except ValueError as exc:
                raise NetworkFormatError(f"line {lineno}: layer sizes must be integers") from exc
            continue
        m = _KEY_RE.match(line)
        if m and m.group(1) == "mode":
            mode = m.group(2).strip()
            continue
        if m and m.group(1) == "name":
            name = m.group(2).strip()
            continue
        raise NetworkFormatError(f"line {lineno}: unrecognised line {raw!r}")
    if layers is None:
        raise NetworkFormatError("missing 'layers:' header")
    if not edges:
        raise NetworkFormatError("network has no edges")
    if coeffs:
        kinds = {type(c) for c in coeffs.values()}
        if mode == "wireless" and kinds != {complex}:
            raise NetworkFormatError("wireless edges take 're im' coefficients")
        if mode == "wired":
            if kinds != {Fraction}:
                raise NetworkFormatError("wired edges take a single capacity")
            if len(coeffs) != len(edges):
                raise NetworkFormatError("either all or no wired edges carry a capacity")
        if mode == "wireless" and len(coeffs) != len(edges):
            raise NetworkFormatError("either all or no wireless edges carry a coefficient")
    return make_network(layers, edges, mode, coeffs or None, name, warn=warn)


def _fmt_value(c) -> str:
    if isinstance(c, Fraction):
        return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"
    return f"{complex(c).real!r} {complex(c).imag!r}"


def serialize_network(net: LayeredNetwork) -> str:
    lines = []
    if net.name:
        lines.append(f"name: {net.name}")
    lines.append(f"layers: [{', '.join(str(n) for n in net.layers)}]")
    lines.append(f"mode: {net.mode}")
    for e in net.edges:
        l, i, j = e
        tail = ""
        if net.coefficients and e in net.coefficients:
            tail = " " + _fmt_value(net.coefficients[e])
        lines.append(f"edge {l} {i + 1} {j + 1}{tail}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# pattern words
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PatternString:
    """Per-hop letters of a two-node-per-layer network.

    ``swaps[l]`` is 1 when the labels of layer ``l`` had to be exchanged to
    write every hop with a letter from ``P, Z, S, X``; it is empty for words
    that were not read off a network.
    """

    word: str
    swaps: tuple = ()

    def __str__(self):
        return self.word

    def __len__(self):
        return len(self.word)


def _swap_pattern(edges: frozenset, swap_tx: int, swap_rx: int) -> frozenset:
    return frozenset(((i ^ swap_tx), (j ^ swap_rx)) for i, j in edges)


def hop_letter(matrix) -> tuple:
    """Letter of a 2x2 hop and the receiver-side swap that realises it.

    Returns ``(letter, swap_rx)`` where ``swap_rx`` is 0 when the pattern is
    already in standard orientation.  Raises ``ValueError`` for hops that
    leave a transmitter or a receiver unconnected.
    """
    m = np.asarray(matrix)
    if m.shape != (2, 2):
        raise ValueError("hop matrix must be 2x2")
    if not (m.any(axis=1).all() and m.any(axis=0).all()):
        raise ValueError("hop leaves a node unconnected (structural min-cut < 2)")
    edges = frozenset((i, j) for i in range(2) for j in range(2) if m[i, j])
    for swap_rx in (0, 1):
        letter = _LETTER_OF.get(_swap_pattern(edges, 0, swap_rx))
        if letter is not None:
            return letter, swap_rx
    raise AssertionError("unreachable: every covering 2x2 pattern has a letter")


def pattern_word(net: LayeredNetwork) -> PatternString:
    """Read the per-hop letters of a network with two nodes in every layer."""
    if not net.is_two_relay():
        raise ValueError("pattern words need exactly 2 nodes in every layer")
    swaps = [0]
    letters = []
    for l in range(net.num_hops):
        m = net.hop_matrix(l)
        if swaps[-1]:
            m = m[::-1, :]
        letter, swap_rx = hop_letter(m)
        letters.append(letter)
        swaps.append(swap_rx)
    return PatternString("".join(letters), tuple(swaps))


_FLIP = {"Z": "S", "S": "Z", "P": "P"}


def _min_run(run: str) -> str:
    flipped = "".join(_FLIP[c] for c in run)
    key = lambda w: [LETTER_ORDER[c] for c in w]
    return min(run, flipped, key=key)


def canonicalize(word) -> PatternString:
    """Canonical representative of a word under per-layer label swaps.

    P letters are deleted first.  Exchanging the labels of every layer inside
    a maximal run of non-X letters turns each Z of the run into S and back,
    while an X hop is unchanged by any swap, so the swap orbit is generated by
    flipping runs independently and the lexicographic minimum picks the
    smaller flip of each run.
    """
    text = word.word if isinstance(word, PatternString) else str(word)
    if not text:
        raise ValueError("empty word")
    if set(text) - set(LETTER_ORDER):
        raise ValueError(f"word {text!r} has letters outside P, Z, S, X")
    core = text.replace("P", "")
    if not core:
        return PatternString("P")
    out = []
    for is_x, run in itertools.groupby(core, key=lambda c: c == "X"):
        run = "".join(run)
        out.append(run if is_x else _min_run(run))
    return PatternString("".join(out))


def network_from_word(word, mode: str = "wireless", name: str = "") -> LayeredNetwork:
    """Build the standard-orientation network for a word over P, Z, S, X."""
    text = word.word if isinstance(word, PatternString) else str(word)
    edges = []
    for l, c in enumerate(text):
        edges += [(l, i, j) for (i, j) in sorted(HOP_LETTERS[c])]
    return make_network([2] * (len(text) + 1), edges, mode, name=name or text)


def count_paths(net: LayeredNetwork, src, dst) -> int:
    """Number of directed paths between two nodes."""
    counts = {src: 1}
    for l in range(src[0], dst[0]):
        for (ll, i, j) in net.edges:
            if ll == l and (l, i) in counts:
                counts[(l + 1, j)] = counts.get((l + 1, j), 0) + counts[(l, i)]
    return counts.get(dst, 0)


def generic_min_cut(net: LayeredNetwork) -> int:
    """Maximum number of vertex-disjoint source-to-sink paths.

    Computed as a unit node-capacity max-flow on the node-split graph.  For a
    layered network with generic coefficients this is the generic rank of
    the end-to-end transfer matrix, i.e. the cooperative DoF cut bound.
    """
    caps = {}
    for v in net.nodes:
        caps[(("in",) + v, ("out",) + v)] = 1
    for (l, i, j) in net.edges:
        caps[(("out", l, i), ("in", l + 1, j))] = 1
    for s in net.sources:
        caps[("S",), ("in",) + s] = 1
    for d in net.sinks:
        caps[("out",) + d, ("T",)] = 1
    value, _, _ = max_flow(caps, ("S",), ("T",))
    return int(value)

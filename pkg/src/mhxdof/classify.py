"""Sum-DoF classification of layered 2x2 networks.

Networks with two nodes in every layer are settled by their canonical pattern
word.  Other topologies are settled when they are isomorphic to the 2-3-3-2
reference network with sum DoF 5/3, and otherwise get a bracket: the best
verified linear scheme below, the LP over generated outer bounds above.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .bounds import BoundReport, fraction_str, upper_bound
from .network import (
    LayeredNetwork,
    PatternString,
    canonicalize,
    count_paths,
    generic_min_cut,
    make_network,
    network_from_word,
    pattern_word,
)

__all__ = [
    "DofValue",
    "DofBracket",
    "FIG5_LAYERS",
    "FIG5_EDGES",
    "fig5_network",
    "case_c_words",
    "is_case_c",
    "classify_two_relay",
    "match_fig5",
    "classify_general",
]

# 2-3-3-2 reference network (0-based (layer, tx, rx)).
FIG5_LAYERS = (2, 3, 3, 2)
FIG5_EDGES = (
    (0, 0, 0), (0, 0, 1), (0, 1, 2),
    (1, 0, 0), (1, 0, 1), (1, 1, 2), (1, 2, 0), (1, 2, 2),
    (2, 0, 0), (2, 1, 1), (2, 2, 1),
)  # fmt: skip


def fig5_network(name: str = "fig5") -> LayeredNetwork:
    return make_network(FIG5_LAYERS, FIG5_EDGES, name=name)


@dataclass(frozen=True)
class DofValue:
    """An exactly known sum DoF.

    ``provenance`` is one of ``T1-A``, ``T1-B``, ``T1-C``, ``T1-D`` (two nodes
    per layer), ``T2`` (the 5/3 reference topology), ``MINCUT0`` or
    ``MINCUT1`` (structural min-cut below 2).
    """

    value: Fraction
    provenance: str
    word: str | None = None

    def to_dict(self) -> dict:
        v = Fraction(self.value)
        return {
            "kind": "value",
            "value": fraction_str(v),
            "value_num": v.numerator,
            "value_den": v.denominator,
            "provenance": self.provenance,
            "word": self.word,
        }


@dataclass(frozen=True)
class DofBracket:
    """``lower <= sum DoF <= upper`` with the witnesses that prove each side."""

    lower: Fraction
    upper: Fraction
    lower_witness: str
    upper_witness: BoundReport | None = field(default=None, compare=False)

    @property
    def provenance(self) -> str:
        return "BRACKET"

    @property
    def closed(self) -> bool:
        return self.lower == self.upper

    def to_dict(self) -> dict:
        lo, hi = Fraction(self.lower), Fraction(self.upper)
        return {
            "kind": "bracket",
            "lower": fraction_str(lo),
            "upper": fraction_str(hi),
            "lower_num": lo.numerator,
            "lower_den": lo.denominator,
            "upper_num": hi.numerator,
            "upper_den": hi.denominator,
            "provenance": self.provenance,
            "lower_witness": self.lower_witness,
            "upper_witness": None if self.upper_witness is None else self.upper_witness.to_dict(),
        }


# --------------------------------------------------------------------------
# two nodes per layer
# --------------------------------------------------------------------------


def case_c_words(length: int) -> list:
    """The eight 3/2 patterns of a given length, as written (not canonical)."""
    if length < 2:
        return []
    k = length - 1
    return [
        "X" + "Z" * k,
        "X" + "S" * k,
        "Z" * k + "X",
        "S" * k + "X",
        "Z" + "S" * k,
        "S" + "Z" * k,
        "S" * k + "Z",
        "Z" * k + "S",
    ]


# canonical images of the eight patterns: XZ^k, Z^kX, ZS^k, Z^kS
_CASE_C_CANONICAL = re.compile(r"^(XZ+|Z+X|ZS+|Z+S)$")


def _runs_contiguous(word: str, letter: str) -> bool:
    idx = [i for i, c in enumerate(word) if c == letter]
    return not idx or idx[-1] - idx[0] + 1 == len(idx)


def is_case_c(word) -> bool:
    """Structural 3/2 test on a P-free word.

    The word qualifies when one source reaches the opposite sink along a
    single path and its Z letters and its S letters each form one unbroken
    block.  Both properties are invariant under label swaps, so the test may
    be applied to any member of a swap orbit.
    """
    text = word.word if isinstance(word, PatternString) else str(word)
    if "P" in text:
        raise ValueError("is_case_c expects a word without P letters")
    if len(text) < 2:
        return False
    net = network_from_word(text)
    L = net.num_hops
    single = count_paths(net, (0, 0), (L, 1)) == 1 or count_paths(net, (0, 1), (L, 0)) == 1
    return single and _runs_contiguous(text, "Z") and _runs_contiguous(text, "S")


def classify_two_relay(word) -> DofValue:
    """Sum DoF of a two-node-per-layer network from its canonical word."""
    text = word.word if isinstance(word, PatternString) else str(word)
    if canonicalize(text).word != text:
        raise ValueError(f"{text!r} is not a canonical word; canonicalize it first")
    if text == "P":
        return DofValue(Fraction(2), "T1-D", text)
    if len(text) == 1:
        if text in "ZS":
            return DofValue(Fraction(1), "T1-A", text)
        return DofValue(Fraction(4, 3), "T1-B", text)
    if _CASE_C_CANONICAL.match(text):
        return DofValue(Fraction(3, 2), "T1-C", text)
    return DofValue(Fraction(2), "T1-D", text)


# --------------------------------------------------------------------------
# general topologies
# --------------------------------------------------------------------------


def match_fig5(net: LayeredNetwork):
    """Within-layer permutations mapping ``net`` onto the 5/3 reference.

    Returns ``perms`` (``perms[l][old] = new``) or ``None``.
    """
    if net.layers != FIG5_LAYERS:
        return None
    target = set(FIG5_EDGES)
    if len(net.edges) != len(target):
        return None
    for p0 in itertools.permutations(range(2)):
        for p1 in itertools.permutations(range(3)):
            for p2 in itertools.permutations(range(3)):
                for p3 in itertools.permutations(range(2)):
                    perms = (p0, p1, p2, p3)
                    if {(l, perms[l][i], perms[l + 1][j]) for (l, i, j) in net.edges} == target:
                        return perms
    return None


def classify_general(net: LayeredNetwork, seed: int = 0):
    """Classify any validated network.

    Dispatch order: structural min-cut 0 or 1, two nodes per layer, the 5/3
    reference topology, then a bracket from synthesis and outer bounds.
    ``seed`` drives the random channels used to verify lower-bound schemes.
    """
    cut = generic_min_cut(net)
    if cut == 0:
        return DofValue(Fraction(0), "MINCUT0")
    if cut == 1:
        return DofValue(Fraction(1), "MINCUT1")
    if net.is_two_relay():
        return classify_two_relay(canonicalize(pattern_word(net)))
    if match_fig5(net) is not None:
        return DofValue(Fraction(5, 3), "T2")
    from .synth import best_scheme  # deferred: synth imports classify helpers

    report = upper_bound(net)
    lower, witness = best_scheme(net, np.random.default_rng(seed))
    return DofBracket(lower, report.optimum, witness, report)

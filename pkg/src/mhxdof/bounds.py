"""DoF outer bounds for layered X networks.

Inequalities live on the DoF tuple ``(d11, d12, d21, d22)``.  They come from
four generators:

``SINGLE_ANTENNA``
    each source and each sink has one antenna.
``MIN_CUT``
    a set of messages cannot carry more DoF than the number of vertex-disjoint
    paths from its sources to its sinks (zero when no path exists).
``DECODE_CHAIN``
    a relay (or the sink itself) that every source-to-sink path of a sink
    passes through can decode that sink's messages; after nulling one more
    message it strips one source off its received signal and, when the other
    source reaches it through a single bottleneck node, decodes that
    source's messages too.
``GENIE_CERT``
    registered genie-aided templates whose structural premises are checked
    node by node before the inequality is emitted.

The sum DoF bound is the exact maximum of ``d11 + d12 + d21 + d22`` over the
resulting polytope, found by enumerating vertices in rational arithmetic.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Sequence

from .flow import max_flow
from .network import LayeredNetwork

__all__ = [
    "MESSAGES",
    "DofInequality",
    "GenieCertificate",
    "LPResult",
    "BoundReport",
    "single_antenna_bounds",
    "min_cut_bounds",
    "decode_chain_bounds",
    "genie_bounds",
    "GENIE_TEMPLATES",
    "max_sum_dof",
    "upper_bound",
    "fraction_str",
]

MESSAGES = ((0, 0), (0, 1), (1, 0), (1, 1))
MESSAGE_NAMES = ("d11", "d12", "d21", "d22")


def fraction_str(x) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def _msg_index(m: int, n: int) -> int:
    return 2 * m + n


@dataclass(frozen=True)
class DofInequality:
    """``sum_k coeffs[k] * d_k <= rhs`` over ``(d11, d12, d21, d22)``."""

    coeffs: tuple
    rhs: Fraction
    rule: str
    witness: str = ""

    def __post_init__(self):
        coeffs = tuple(Fraction(c) for c in self.coeffs)
        if len(coeffs) != 4:
            raise ValueError("a DoF inequality has four coefficients")
        if any(c < 0 for c in coeffs) or not any(coeffs):
            raise ValueError("coefficients must be nonnegative and not all zero")
        rhs = Fraction(self.rhs)
        if rhs < 0:
            raise ValueError("right-hand side must be nonnegative")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "rhs", rhs)

    @classmethod
    def on(cls, messages, rhs, rule, witness="", weights=None):
        coeffs = [0, 0, 0, 0]
        for k, (m, n) in enumerate(messages):
            coeffs[_msg_index(m, n)] += 1 if weights is None else weights[k]
        return cls(tuple(coeffs), rhs, rule, witness)

    @property
    def key(self) -> tuple:
        return (self.coeffs, self.rhs)

    def holds(self, dof) -> bool:
        return sum(Fraction(c) * Fraction(d) for c, d in zip(self.coeffs, dof)) <= self.rhs

    def slack(self, dof) -> float:
        return float(self.rhs) - sum(float(c) * float(d) for c, d in zip(self.coeffs, dof))

    def __str__(self):
        terms = []
        for c, name in zip(self.coeffs, MESSAGE_NAMES):
            if c:
                terms.append(name if c == 1 else f"{fraction_str(c)}{name}")
        return f"{' + '.join(terms)} <= {fraction_str(self.rhs)}"

    def to_dict(self) -> dict:
        return {
            "coeffs": [fraction_str(c) for c in self.coeffs],
            "rhs": fraction_str(self.rhs),
            "rule": self.rule,
            "witness": self.witness,
            "text": str(self),
        }


def _dedupe(inequalities) -> list:
    seen = {}
    for q in inequalities:
        seen.setdefault(q.key, q)
    return list(seen.values())


# --------------------------------------------------------------------------
# generators
# --------------------------------------------------------------------------


def single_antenna_bounds() -> list:
    return [
        DofInequality.on([(0, 0), (0, 1)], 1, "SINGLE_ANTENNA", "s1"),
        DofInequality.on([(1, 0), (1, 1)], 1, "SINGLE_ANTENNA", "s2"),
        DofInequality.on([(0, 0), (1, 0)], 1, "SINGLE_ANTENNA", "d1"),
        DofInequality.on([(0, 1), (1, 1)], 1, "SINGLE_ANTENNA", "d2"),
    ]


def _disjoint_paths(net: LayeredNetwork, sources, sinks) -> int:
    caps = {}
    for v in net.nodes:
        caps[(("in",) + v, ("out",) + v)] = 1
    for (l, i, j) in net.edges:
        caps[(("out", l, i), ("in", l + 1, j))] = 1
    for s in sources:
        caps[("S",), ("in",) + s] = 1
    for d in sinks:
        caps[("out",) + d, ("T",)] = 1
    value, _, _ = max_flow(caps, ("S",), ("T",))
    return int(value)


def min_cut_bounds(net: LayeredNetwork) -> list:
    """Cut bounds for the message subsets the single-antenna bounds do not cover.

    A subset whose sources and sinks both number ``k`` is already capped at
    ``k`` by the single-antenna bounds, so only cuts below that are emitted.
    """
    out = []
    L = net.num_hops
    cuts: dict = {}
    for r in range(1, 5):
        for subset in itertools.combinations(MESSAGES, r):
            srcs = tuple(sorted({(0, m) for m, _ in subset}))
            snks = tuple(sorted({(L, n) for _, n in subset}))
            if (srcs, snks) not in cuts:
                cuts[srcs, snks] = _disjoint_paths(net, srcs, snks)
            cut = cuts[srcs, snks]
            if cut < min(len(srcs), len(snks)):
                names = ",".join(f"W{m + 1}{n + 1}" for m, n in subset)
                out.append(DofInequality.on(subset, cut, "MIN_CUT", f"{{{names}}}: {cut} disjoint paths"))
    return out


def _name(net: LayeredNetwork, v) -> str:
    l, i = v
    if l == 0:
        return f"s{i + 1}"
    if l == net.num_hops:
        return f"d{i + 1}"
    return f"v{i + 1}^{l}"


def _separates(net: LayeredNetwork, cut_node, src, targets) -> bool:
    """True when every path from ``src`` to any of ``targets`` meets ``cut_node``."""
    if cut_node == src:
        return True
    reach = {src}
    for l in range(src[0], net.num_hops):
        for (ll, i, j) in net.edges:
            if ll == l and (l, i) in reach and (l, i) != cut_node:
                reach.add((l + 1, j))
    return not any(t in reach and t != cut_node for t in targets)


def _is_gateway(net: LayeredNetwork, r, sink) -> bool:
    """Every source-to-``sink`` path passes ``r`` and nothing else injects below it."""
    if r == sink:
        return True
    if not all(_separates(net, r, s, [sink]) for s in net.sources):
        return False
    below = {v for v in net.ancestors(sink) if v[0] > r[0]} | {sink}
    return all(u in below or u == r for v in below for u in net.in_neighbors(v))


def decode_chain_bounds(net: LayeredNetwork) -> list:
    """Three-message bounds from gateway nodes (see module docstring)."""
    out = []
    L = net.num_hops
    candidates = [v for v in net.nodes if 0 < v[0] < L] + list(net.sinks)
    for n in (0, 1):
        sink = (L, n)
        other_sink = 1 - n
        for r in candidates:
            if r[0] == L and r != sink:
                continue
            if not _is_gateway(net, r, sink):
                continue
            for m in (0, 1):
                mo = 1 - m
                other_src = (0, mo)
                exposed = [u for u in net.in_neighbors(r) if mo in net.source_ancestry(u)]
                if len(exposed) != 1:
                    continue
                u = exposed[0]
                if not _separates(net, u, other_src, net.sinks):
                    continue
                msgs = [(m, n), (mo, n), (mo, other_sink)]
                witness = (
                    f"{_name(net, r)} decodes d{n + 1}'s messages; with W{m + 1}{other_sink + 1}=0 it removes "
                    f"s{m + 1} and sees s{mo + 1} through {_name(net, u)}"
                )
                out.append(DofInequality.on(msgs, 1, "DECODE_CHAIN", witness))
    return _dedupe(out)


@dataclass(frozen=True)
class GenieCertificate:
    """A genie-aided bound and the structural premises its derivation uses.

    ``premises`` maps a role assignment to a list of ``(description, bool)``
    pairs; the inequality is emitted only when every premise holds.
    """

    template: str
    roles: dict
    premises: list
    inequality: DofInequality

    @property
    def applies(self) -> bool:
        return all(ok for _, ok in self.premises)


def _fig5_premises(net: LayeredNetwork, roles: dict) -> list:
    ins = lambda v: set(net.in_neighbors(v))
    sa, sb, da, db = roles["s_a"], roles["s_b"], roles["d_a"], roles["d_b"]
    P, Q, R, A, B, C = (roles[k] for k in "PQRABC")
    return [
        ("d_a hears only A", ins(da) == {A}),
        ("d_b hears only B and C", bool(ins(db)) and ins(db) <= {B, C}),
        ("A hears exactly P and R", ins(A) == {P, R}),
        ("B hears only P", ins(B) == {P}),
        ("C hears R and otherwise only Q", R in ins(C) and ins(C) <= {Q, R}),
        ("P hears only s_a", ins(P) == {sa}),
        ("Q hears only s_a", ins(Q) == {sa}),
        ("R hears only s_b", ins(R) == {sb}),
    ]


def _fig5_certificates(net: LayeredNetwork) -> list:
    if net.layers != (2, 3, 3, 2):
        return []
    certs = []
    for src in itertools.permutations(range(2)):
        for snk in itertools.permutations(range(2)):
            for p1 in itertools.permutations(range(3)):
                for p2 in itertools.permutations(range(3)):
                    roles = {
                        "s_a": (0, src[0]),
                        "s_b": (0, src[1]),
                        "d_a": (3, snk[0]),
                        "d_b": (3, snk[1]),
                        "P": (1, p1[0]),
                        "Q": (1, p1[1]),
                        "R": (1, p1[2]),
                        "A": (2, p2[0]),
                        "B": (2, p2[1]),
                        "C": (2, p2[2]),
                    }
                    premises = _fig5_premises(net, roles)
                    if not all(ok for _, ok in premises):
                        continue
                    a, b = src
                    x, y = snk
                    q = DofInequality.on(
                        [(b, x), (a, x), (b, y), (a, y)],
                        2,
                        "GENIE_CERT",
                        "fig5-genie: genie gives W{}{} to {} and W{}{} to {{{}, {}}}".format(
                            b + 1, y + 1, _name(net, roles["A"]), a + 1, x + 1,
                            _name(net, roles["B"]), _name(net, roles["C"]),
                        ),
                        weights=[2, 1, 1, 1],
                    )
                    certs.append(GenieCertificate("fig5-genie", roles, premises, q))
    return certs


GENIE_TEMPLATES: dict = {"fig5-genie": _fig5_certificates}


def genie_bounds(net: LayeredNetwork, with_certificates: bool = False):
    certs = [c for make in GENIE_TEMPLATES.values() for c in make(net) if c.applies]
    ineqs = _dedupe(c.inequality for c in certs)
    return (ineqs, certs) if with_certificates else ineqs


# --------------------------------------------------------------------------
# exact LP
# --------------------------------------------------------------------------


def _det(m) -> int:
    """Determinant of a small integer matrix by cofactor expansion."""
    if len(m) == 1:
        return m[0][0]
    if len(m) == 2:
        return m[0][0] * m[1][1] - m[0][1] * m[1][0]
    total = 0
    for c, a in enumerate(m[0]):
        if a:
            minor = [row[:c] + row[c + 1:] for row in m[1:]]
            total += (-a if c % 2 else a) * _det(minor)
    return total


def _solve4(rows, rhs):
    """Cramer's rule on an integer 4x4 system.

    Returns ``(numerators, denominator)`` with a positive denominator, or
    ``None`` when the system is singular.
    """
    rows = [list(r) for r in rows]
    den = _det(rows)
    if den == 0:
        return None
    nums = []
    for k in range(4):
        mk = [r[:k] + [b] + r[k + 1:] for r, b in zip(rows, rhs)]
        nums.append(_det(mk))
    if den < 0:
        den, nums = -den, [-x for x in nums]
    return nums, den


def _row_scale(q) -> int:
    return lcm(*(c.denominator for c in q.coeffs), q.rhs.denominator)


def _integer_row(q) -> tuple:
    scale = _row_scale(q)
    return [int(c * scale) for c in q.coeffs], int(q.rhs * scale)


def _undominated(ineqs) -> list:
    keep = []
    for q in ineqs:
        dominated = any(
            p is not q
            and all(a >= b for a, b in zip(p.coeffs, q.coeffs))
            and p.rhs <= q.rhs
            and (p.key != q.key)
            for p in ineqs
        )
        if not dominated:
            keep.append(q)
    return keep


@dataclass
class LPResult:
    optimum: Fraction
    vertex: tuple
    certificate: list = field(default_factory=list)

    def combination(self) -> tuple:
        """Integer-scaled sum of the certificate: ``(coeffs, rhs)``."""
        if not self.certificate:
            return None
        scale = lcm(*(y.denominator for _, y in self.certificate))
        coeffs = [sum(y * q.coeffs[k] for q, y in self.certificate) * scale for k in range(4)]
        rhs = sum(y * q.rhs for q, y in self.certificate) * scale
        return tuple(coeffs), rhs


def max_sum_dof(inequalities: Sequence[DofInequality]) -> LPResult:
    """Exact maximum of ``d11 + d12 + d21 + d22`` subject to the inequalities.

    Variables are nonnegative.  Every vertex of the polytope is the solution of
    four tight constraints, so all 4-subsets of constraints are solved exactly
    (integer Cramer's rule), infeasible points are discarded and the best
    vertex is kept.  Dominated inequalities are dropped first.  A dual
    certificate (nonnegative multipliers on tight inequalities whose
    combination bounds the objective) is attached.
    """
    ineqs = _undominated(_dedupe(inequalities))
    if not ineqs:
        raise ValueError("empty inequality list")
    for k in range(4):
        if all(q.coeffs[k] == 0 for q in ineqs):
            raise ValueError(f"unbounded LP: no inequality restricts {MESSAGE_NAMES[k]}")
    # constraint rows: inequalities, then -d_k <= 0
    rows = [_integer_row(q) for q in ineqs]
    for k in range(4):
        e = [0] * 4
        e[k] = -1
        rows.append((e, 0))

    best = None  # (nums, den)
    for combo in itertools.combinations(range(len(rows)), 4):
        sol = _solve4([rows[i][0] for i in combo], [rows[i][1] for i in combo])
        if sol is None:
            continue
        nums, den = sol
        if any(sum(a * x for a, x in zip(coeffs, nums)) > b * den for coeffs, b in rows):
            continue
        if best is None:
            best = sol
            continue
        lhs, rhs = sum(nums) * best[1], sum(best[0]) * den
        if lhs > rhs or (lhs == rhs and [x * best[1] for x in nums] < [x * den for x in best[0]]):
            best = sol
    vertex = tuple(Fraction(x, best[1]) for x in best[0])
    return LPResult(sum(vertex), vertex, _certificate(rows, ineqs, best))


def _certificate(rows, ineqs, best) -> list:
    nums, den = best
    tight = [i for i, (coeffs, b) in enumerate(rows) if sum(a * x for a, x in zip(coeffs, nums)) == b * den]
    for combo in itertools.combinations(tight, 4):
        # solve sum_i y_i * row_i = (1, 1, 1, 1)
        transposed = [[rows[i][0][k] for i in combo] for k in range(4)]
        sol = _solve4(transposed, [1, 1, 1, 1])
        if sol is None or any(v < 0 for v in sol[0]):
            continue
        out = []
        for i, v in zip(combo, sol[0]):
            if i < len(ineqs) and v > 0:
                # rows were scaled to integers; undo the scale on the multiplier
                out.append((ineqs[i], Fraction(v, sol[1]) * _row_scale(ineqs[i])))
        return out
    return []



@dataclass
class BoundReport:
    inequalities: list
    lp: LPResult
    certificates: list = field(default_factory=list)

    @property
    def optimum(self) -> Fraction:
        return self.lp.optimum

    def to_dict(self) -> dict:
        combo = self.lp.combination()
        return {
            "inequalities": [q.to_dict() for q in self.inequalities],
            "optimum": fraction_str(self.lp.optimum),
            "vertex": [fraction_str(x) for x in self.lp.vertex],
            "certificate": [
                {"multiplier": fraction_str(y), **q.to_dict()} for q, y in self.lp.certificate
            ],
            "combined": None
            if combo is None
            else {"coeffs": [fraction_str(c) for c in combo[0]], "rhs": fraction_str(combo[1])},
        }


def upper_bound(net: LayeredNetwork) -> BoundReport:
    """All generated inequalities for ``net`` and the LP optimum over them."""
    genie, certs = genie_bounds(net, with_certificates=True)
    ineqs = _dedupe(single_antenna_bounds() + min_cut_bounds(net) + decode_chain_bounds(net) + genie)
    return BoundReport(ineqs, max_sum_dof(ineqs), certs)

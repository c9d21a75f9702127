"""Linear achievability schemes over T-slot symbol extensions.

Channels are diagonal over the extension: each edge carries an independent
complex gain per slot.  A scheme fixes one beamforming vector per stream at
its source and, per relay, either an amplify-forward diagonal gain or a
decode-forward rule (which aligned stream sums to demodulate and which of them
to re-send on which new vectors).  Relays not listed amplify-forward with
unit gain.

Builders work on *effective* channels: every relay outside the one
decode-forward layer amplifies with unit gain, so the gain from any node to a
later node is a per-slot sum over paths.  That is how P hops and runs of
Z (or S) letters collapse onto a single hop.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .bounds import fraction_str
from .classify import match_fig5
from .network import LayeredNetwork, count_paths

__all__ = [
    "RANK_TOL",
    "RESIDUAL_TOL",
    "SchemeError",
    "DegenerateDrawError",
    "TopologyMismatchError",
    "NeutralizationError",
    "ChannelRealization",
    "Stream",
    "AmplifyForward",
    "DecodeForward",
    "LinearScheme",
    "Transfer",
    "SinkCheck",
    "RelayCheck",
    "VerificationReport",
    "propagate",
    "end_to_end_transfer",
    "verify_scheme",
    "effective_gain",
    "build_scheme_xz",
    "build_scheme_zx",
    "build_scheme_zs",
    "build_scheme_x_single_hop",
    "build_scheme_5over3",
    "build_scheme_neutralize",
    "build_scheme_tdma",
    "BUILDERS",
    "synthesize",
    "best_scheme",
    "best_kind",
    "node_name",
]

RANK_TOL = 1e-8
RESIDUAL_TOL = 1e-10


class SchemeError(RuntimeError):
    """A scheme could not be built or did not verify."""


class DegenerateDrawError(SchemeError):
    """The channel draw makes a construction step unsolvable (measure zero)."""


class TopologyMismatchError(SchemeError, ValueError):
    """The network does not have the structure a builder needs."""


class NeutralizationError(SchemeError, ValueError):
    """Interference cannot be neutralized under the requested reduction."""


def node_name(net: LayeredNetwork, node) -> str:
    l, i = node
    if l == 0:
        return f"s{i + 1}"
    if l == net.num_hops:
        return f"d{i + 1}"
    return f"v{i + 1}^{l}"


def _cplx_list(v) -> list:
    return [[float(z.real), float(z.imag)] for z in np.asarray(v, dtype=complex)]


# --------------------------------------------------------------------------
# channels
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ChannelRealization:
    """Per-edge, per-slot complex gains: ``gains[edge]`` has shape ``(T,)``."""

    T: int
    gains: dict

    @classmethod
    def draw(cls, net: LayeredNetwork, T: int, rng: np.random.Generator) -> "ChannelRealization":
        """Independent CN(0, 1) gains per edge and slot, in sorted edge order."""
        gains = {}
        for e in net.edges:
            gains[e] = (rng.standard_normal(T) + 1j * rng.standard_normal(T)) / np.sqrt(2)
        return cls(T, gains)

    @classmethod
    def constant(cls, net: LayeredNetwork, T: int, rng=None) -> "ChannelRealization":
        """Slot-invariant gains: the network's coefficients, else one draw per edge."""
        gains = {}
        for e in net.edges:
            if net.coefficients and net.mode == "wireless":
                c = complex(net.coefficients[e])
            else:
                rng = rng if rng is not None else np.random.default_rng(0)
                c = complex(rng.standard_normal(), rng.standard_normal()) / np.sqrt(2)
            gains[e] = np.full(T, c)
        return cls(T, gains)

    def scaled(self, c: complex) -> "ChannelRealization":
        return ChannelRealization(self.T, {e: c * g for e, g in self.gains.items()})

    @property
    def is_constant(self) -> bool:
        return all(np.allclose(g, g[0]) for g in self.gains.values())

    def check(self, net: LayeredNetwork) -> None:
        missing = [e for e in net.edges if e not in self.gains]
        if missing:
            raise ValueError(f"channel realization lacks edges {missing}")
        for e in net.edges:
            g = np.asarray(self.gains[e])
            if g.shape != (self.T,):
                raise ValueError(f"edge {e}: expected {self.T} slots, got shape {g.shape}")
            if not np.all(np.abs(g) > 0):
                raise ValueError(f"edge {e}: zero channel coefficient")


# --------------------------------------------------------------------------
# schemes
# --------------------------------------------------------------------------


@dataclass
class Stream:
    """One symbol stream of message ``W_{m+1, n+1}`` (``message = (m, n)``)."""

    label: str
    message: tuple
    direction: np.ndarray

    @property
    def source(self) -> int:
        return self.message[0]

    @property
    def sink(self) -> int:
        return self.message[1]


@dataclass
class AmplifyForward:
    gains: np.ndarray

    def to_dict(self) -> dict:
        return {"op": "AF", "gains": _cplx_list(self.gains)}


@dataclass
class DecodeForward:
    """Demodulate ``groups`` (aligned sums count as one dimension) and re-send.

    ``forward`` lists ``(group index, direction)`` pairs.  A forwarded group
    keeps the relative coefficients its members had at the relay, so an
    aligned sum is re-sent as the same sum.
    """

    groups: tuple
    forward: tuple

    def to_dict(self) -> dict:
        return {
            "op": "DF",
            "groups": [list(g) for g in self.groups],
            "forward": [{"group": list(self.groups[g]), "direction": _cplx_list(d)} for g, d in self.forward],
        }


@dataclass
class LinearScheme:
    name: str
    T: int
    streams: list
    relays: dict = field(default_factory=dict)
    interference_dims: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @property
    def labels(self) -> list:
        return [s.label for s in self.streams]

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def nominal_dof(self) -> Fraction:
        return Fraction(len(self.streams), self.T)

    def to_dict(self, net: LayeredNetwork) -> dict:
        return {
            "name": self.name,
            "T": self.T,
            "streams": [
                {
                    "label": s.label,
                    "message": f"W{s.message[0] + 1}{s.message[1] + 1}",
                    "direction": _cplx_list(s.direction),
                }
                for s in self.streams
            ],
            "relays": {node_name(net, v): op.to_dict() for v, op in sorted(self.relays.items())},
            "interference_dims": {f"d{n + 1}": q for n, q in sorted(self.interference_dims.items())},
            "nominal_dof": fraction_str(self.nominal_dof()),
        }


def _labels_for(messages) -> list:
    """``x{m}{n}`` labels, with ``(k)`` suffixes for repeated messages."""
    counts: dict = {}
    for msg in messages:
        counts[msg] = counts.get(msg, 0) + 1
    seen: dict = {}
    out = []
    for m, n in messages:
        base = f"x{m + 1}{n + 1}"
        if counts[(m, n)] > 1:
            seen[(m, n)] = seen.get((m, n), 0) + 1
            base += f"({seen[(m, n)]})"
        out.append(base)
    return out


# --------------------------------------------------------------------------
# transfer
# --------------------------------------------------------------------------


def _coeff(ref: np.ndarray, col: np.ndarray) -> complex:
    """Least-squares ``a`` with ``col ~= a * ref`` (0 for a zero reference)."""
    nrm = np.vdot(ref, ref).real
    return complex(np.vdot(ref, col) / nrm) if nrm > 0 else 0j


@dataclass
class Transfer:
    """Noiseless responses at every node.

    ``received[v]`` and ``transmitted[v]`` are ``T x K`` (column ``k`` is
    stream ``k``); ``magnitude[v]`` propagates absolute values, so its entries
    bound the sum of path-gain magnitudes and serve as the scale for
    cancellation residuals.
    """

    received: dict
    transmitted: dict
    magnitude: dict
    labels: list


def propagate(net: LayeredNetwork, channels: ChannelRealization, scheme: LinearScheme) -> Transfer:
    T, K = scheme.T, len(scheme.streams)
    if channels.T != T:
        raise ValueError(f"scheme uses T={T} but channels have T={channels.T}")
    tx, mag_tx, rx, mag_rx = {}, {}, {}, {}
    for s in net.sources:
        x = np.zeros((T, K), dtype=complex)
        for k, st in enumerate(scheme.streams):
            if st.source == s[1]:
                x[:, k] = st.direction
        tx[s], mag_tx[s] = x, np.abs(x)
    L = net.num_hops
    for l in range(1, L + 1):
        for j in range(net.layers[l]):
            v = (l, j)
            r = np.zeros((T, K), dtype=complex)
            m = np.zeros((T, K))
            for u in net.in_neighbors(v):
                h = np.asarray(channels.gains[(l - 1, u[1], j)])
                r += h[:, None] * tx[u]
                m += np.abs(h)[:, None] * mag_tx[u]
            rx[v], mag_rx[v] = r, m
            if l == L:
                continue
            op = scheme.relays.get(v)
            if op is None or isinstance(op, AmplifyForward):
                g = np.ones(T) if op is None else np.asarray(op.gains)
                tx[v], mag_tx[v] = g[:, None] * r, np.abs(g)[:, None] * m
                continue
            x = np.zeros((T, K), dtype=complex)
            mx = np.zeros((T, K))
            for gi, direction in op.forward:
                members = [scheme.index(lab) for lab in op.groups[gi]]
                ref = r[:, members[0]]
                for k in members:
                    a = _coeff(ref, r[:, k])
                    x[:, k] = a * np.asarray(direction)
                    mx[:, k] = abs(a) * np.abs(direction)
            tx[v], mag_tx[v] = x, mx
    return Transfer(rx, tx, {**mag_rx}, scheme.labels)


def end_to_end_transfer(net: LayeredNetwork, channels: ChannelRealization, scheme: LinearScheme) -> dict:
    """``{sink index: T x K matrix}`` of noiseless stream responses."""
    tr = propagate(net, channels, scheme)
    return {d[1]: tr.received[d] for d in net.sinks}


# --------------------------------------------------------------------------
# verification
# --------------------------------------------------------------------------


@dataclass
class RelayCheck:
    node: str
    groups: int
    rank: int
    alignment_residual: float
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class SinkCheck:
    node: str
    desired: list
    required: int
    rank: int
    interference_dim: int
    residual: float
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class VerificationReport:
    passed: bool
    sum_dof: Fraction
    sinks: list
    relays: list
    failures: list

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "sum_dof": fraction_str(self.sum_dof),
            "sinks": [c.to_dict() for c in self.sinks],
            "relays": [c.to_dict() for c in self.relays],
            "failures": list(self.failures),
        }


def _unit_columns(a: np.ndarray, norms: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a)
    nz = norms > 0
    out[:, nz] = a[:, nz] / norms[nz]
    return out


def _numerical_rank(a: np.ndarray, tol: float) -> int:
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    return int(np.sum(s > tol))


def _check_relay(net, scheme, tr, v, op, rank_tol, residual_tol) -> RelayCheck:
    name = node_name(net, v)
    r, m = tr.received[v], tr.magnitude[v]
    scale = float(m.max()) if m.size else 0.0
    if scale == 0:
        return RelayCheck(name, 0, 0, 0.0, not op.forward, "" if not op.forward else "forwards without input")
    incident = {scheme.labels[k] for k in range(len(scheme.labels)) if np.abs(r[:, k]).max() > residual_tol * scale}
    grouped = {lab for g in op.groups for lab in g}
    problems = []
    unknown = grouped - set(scheme.labels)
    if unknown:
        problems.append(f"unknown streams {sorted(unknown)}")
        return RelayCheck(name, len(op.groups), 0, float("inf"), False, "; ".join(problems))
    stray = sorted(incident - grouped)
    if stray:
        problems.append(f"streams {stray} reach the relay but are in no demodulation group")
    refs, worst = [], 0.0
    used = set()
    for gi, group in enumerate(op.groups):
        present = [lab for lab in group if lab in incident]
        if not present:
            continue
        used.add(gi)
        if group[0] not in incident:
            problems.append(f"group {list(group)} has a silent reference stream")
            continue
        ref = r[:, scheme.index(group[0])]
        refs.append(ref)
        for lab in group[1:]:
            col = r[:, scheme.index(lab)]
            worst = max(worst, float(np.abs(col - _coeff(ref, col) * ref).max()) / scale)
    for gi, _ in op.forward:
        if gi not in used:
            problems.append(f"forwards group {list(op.groups[gi])} that does not reach the relay")
    if worst >= residual_tol:
        problems.append(f"group members not aligned (residual {worst:.3g})")
    basis = np.column_stack(refs) if refs else np.zeros((scheme.T, 0))
    rank = _numerical_rank(_unit_columns(basis, np.linalg.norm(basis, axis=0)), rank_tol)
    if rank < basis.shape[1]:
        problems.append(f"demodulation rank {rank} < {basis.shape[1]} groups")
    return RelayCheck(name, basis.shape[1], rank, worst, not problems, "; ".join(problems))


def _check_sink(net, scheme, tr, d, rank_tol, residual_tol) -> SinkCheck:
    name = node_name(net, d)
    r, m = tr.received[d], tr.magnitude[d]
    scale = float(m.max()) if m.size else 0.0
    desired = [k for k, s in enumerate(scheme.streams) if s.sink == d[1]]
    others = [k for k, s in enumerate(scheme.streams) if s.sink != d[1]]
    q = int(scheme.interference_dims.get(d[1], 0))
    labels = [scheme.labels[k] for k in desired]
    if not desired:
        return SinkCheck(name, [], 0, 0, q, 0.0, True)
    if scale == 0:
        return SinkCheck(name, labels, len(desired), 0, q, 0.0, False, "no signal reaches the sink")
    interf = r[:, others]
    basis = np.zeros((scheme.T, 0), dtype=complex)
    if q and interf.size:
        u, s, _ = np.linalg.svd(interf, full_matrices=False)
        keep = min(q, int(np.sum(s > residual_tol * scale)))
        basis = u[:, :keep]
    proj = np.eye(scheme.T) - basis @ basis.conj().T
    outside = proj @ interf
    residual = float(np.abs(outside).max()) / scale if outside.size else 0.0
    problems = []
    if residual >= residual_tol:
        leaking = [scheme.labels[k] for k, c in zip(others, outside.T) if np.abs(c).max() / scale >= residual_tol]
        problems.append(f"interference residual {residual:.3g} from {leaking}")
    if len(desired) + q > scheme.T:
        problems.append(f"{len(desired)} desired + {q} interference dimensions exceed T={scheme.T}")
    dmat = r[:, desired]
    rank = _numerical_rank(_unit_columns(proj @ dmat, np.linalg.norm(dmat, axis=0)), rank_tol)
    if rank < len(desired):
        problems.append(f"desired rank {rank} < {len(desired)}")
    return SinkCheck(name, labels, len(desired), rank, q, residual, not problems, "; ".join(problems))


def verify_scheme(
    net: LayeredNetwork,
    channels: ChannelRealization,
    scheme: LinearScheme,
    rank_tol: float = RANK_TOL,
    residual_tol: float = RESIDUAL_TOL,
) -> VerificationReport:
    """Check demodulation at decode-forward relays and decoding at sinks.

    A relay passes when every stream reaching it belongs to a demodulation
    group, members of a group are aligned, and the group references are
    linearly independent.  A sink passes when interference outside the
    scheme's declared interference dimension is below ``residual_tol`` times
    the path-gain scale and its desired columns keep full rank after that
    dimension is projected out.  Ranks use unit-normalized columns and
    singular values above ``rank_tol``.
    """
    failures = []
    for k, s in enumerate(scheme.streams):
        if np.asarray(s.direction).shape != (scheme.T,):
            failures.append(f"stream {s.label}: direction has wrong length")
    if len(set(scheme.labels)) != len(scheme.labels):
        failures.append("duplicate stream labels")
    for v in scheme.relays:
        if not (0 < v[0] < net.num_hops and v[1] < net.layers[v[0]]):
            failures.append(f"relay op on non-relay node {v}")
    if failures:
        return VerificationReport(False, Fraction(0), [], [], failures)
    tr = propagate(net, channels, scheme)
    relays = []
    for v, op in sorted(scheme.relays.items()):
        if isinstance(op, DecodeForward):
            c = _check_relay(net, scheme, tr, v, op, rank_tol, residual_tol)
            relays.append(c)
            if not c.passed:
                failures.append(f"{c.node}: {c.detail}")
    sinks = []
    decoded = 0
    for d in net.sinks:
        c = _check_sink(net, scheme, tr, d, rank_tol, residual_tol)
        sinks.append(c)
        if c.passed:
            decoded += c.required
        else:
            failures.append(f"{c.node}: {c.detail}")
    return VerificationReport(not failures, Fraction(decoded, scheme.T), sinks, relays, failures)


# --------------------------------------------------------------------------
# construction helpers
# --------------------------------------------------------------------------


def effective_gain(net: LayeredNetwork, channels: ChannelRealization, start, stop, gains=None) -> np.ndarray:
    """Per-slot gain from ``start`` to ``stop`` with intermediate relays amplifying.

    ``gains`` maps relay -> per-slot amplification (default 1).  The gain of
    ``start`` itself is not applied.
    """
    gains = gains or {}
    vec = {start: np.ones(channels.T, dtype=complex)}
    for l in range(start[0], stop[0]):
        nxt: dict = {}
        for (ll, i, j), h in channels.gains.items():
            u = (ll, i)
            if ll != l or u not in vec:
                continue
            g = 1 if u == start else gains.get(u, 1)
            nxt[(l + 1, j)] = nxt.get((l + 1, j), 0) + np.asarray(h) * g * vec[u]
        vec = nxt
    return np.asarray(vec.get(stop, np.zeros(channels.T, dtype=complex)))


def _random_direction(rng, T) -> np.ndarray:
    v = rng.standard_normal(T) + 1j * rng.standard_normal(T)
    return v / np.linalg.norm(v)


def _unit(v) -> np.ndarray:
    n = np.linalg.norm(v)
    if not np.isfinite(n) or n == 0:
        raise DegenerateDrawError("alignment equation has no nonzero solution")
    return v / n


def _ratio(num, den) -> np.ndarray:
    den = np.asarray(den)
    if np.any(np.abs(den) < 1e-300):
        raise DegenerateDrawError("zero effective channel in an alignment equation")
    return np.asarray(num) / den


def _reach(net: LayeredNetwork, a: int, b: int) -> np.ndarray:
    """Path existence from layer ``a`` nodes to layer ``b`` nodes."""
    out = np.zeros((net.layers[a], net.layers[b]), dtype=bool)
    for i in range(net.layers[a]):
        desc = net.descendants((a, i))
        for j in range(net.layers[b]):
            out[i, j] = (b, j) in desc
    return out


def _df_layers(net: LayeredNetwork):
    return [a for a in range(1, net.num_hops) if net.layers[a] == 2]


def _missing(mat: np.ndarray):
    idx = np.argwhere(~mat)
    return tuple(idx[0]) if len(idx) == 1 else None


def _retrying(build_once: Callable, net, channels, rng, verify=True):
    """Run a builder, re-drawing its random directions once on failure."""
    rng = rng if rng is not None else np.random.default_rng()
    last = ""
    for attempt in range(2):
        try:
            scheme = build_once(net, channels, rng)
        except DegenerateDrawError as exc:
            last = str(exc)
            continue
        if not verify:
            return scheme
        report = verify_scheme(net, channels, scheme)
        if report.passed:
            scheme.metadata["redraws"] = attempt
            scheme.metadata["report"] = report
            return scheme
        last = "; ".join(report.failures)
    constant = channels.T > 1 and channels.is_constant
    hint = " (channels are constant over the extension; alignment needs time variation)" if constant else ""
    raise DegenerateDrawError(f"scheme failed after one re-draw: {last}{hint}")


def _need_T(channels, T, what):
    if channels.T != T:
        raise ValueError(f"{what} needs T={T} channel slots, got T={channels.T}")


# --------------------------------------------------------------------------
# 3/2 schemes
# --------------------------------------------------------------------------


def _xz_roles(net):
    L = net.num_hops
    for a in _df_layers(net):
        ein, eout = _reach(net, 0, a), _reach(net, a, L)
        miss = _missing(eout)
        if ein.all() and miss is not None:
            ia, jp = miss
            return a, (a, ia), (a, 1 - ia), (L, 1 - jp), (L, jp)
    raise TopologyMismatchError("no two-node relay layer with X connectivity before it and Z after it")


def _xz_once(net, ch, rng):
    _need_T(ch, 2, "the XZ scheme")
    a, A, B, dS, dP = _xz_roles(net)
    s1, s2 = net.sources
    G = lambda s, v: effective_gain(net, ch, s, v)
    F = lambda v, d: effective_gain(net, ch, v, d)
    w = _random_direction(rng, 2)
    u = _unit(_ratio(G(s2, B) * w, G(s1, B)))  # x11 aligns with x21 at B
    p = _unit(_ratio(G(s2, A) * w, G(s1, A)))  # x12 aligns with x21 at A
    msgs = [(0, dS[1]), (0, dP[1]), (1, dS[1])]
    l11, l12, l21 = _labels_for(msgs)
    streams = [Stream(l11, msgs[0], u), Stream(l12, msgs[1], p), Stream(l21, msgs[2], w)]
    fa, fb = _random_direction(rng, 2), _random_direction(rng, 2)
    c = -_ratio(F(A, dS) * fb, F(B, dS))  # cancels x12 at the shared sink
    relays = {
        A: DecodeForward(((l11,), (l12, l21)), ((0, fa), (1, fb))),
        B: DecodeForward(((l12,), (l11, l21)), ((0, c),)),
    }
    return LinearScheme("xz", 2, streams, relays, {dS[1]: 0, dP[1]: 0}, {"df_layer": a})


def build_scheme_xz(net: LayeredNetwork, channels: ChannelRealization, rng=None) -> LinearScheme:
    """3/2 scheme for networks whose canonical word is ``XZ...Z``.

    Source 1 sends two streams, source 2 one.  At the relay that reaches
    both sinks, source 1's stream for the shared sink aligns with source 2's
    stream; at the other relay source 1's stream for the private sink aligns
    with it.  The first relay re-sends its two dimensions; the second re-sends
    only the private-sink stream, pointed so it cancels at the shared sink.
    """
    return _retrying(_xz_once, net, channels, rng)


def _zx_roles(net):
    L = net.num_hops
    for a in _df_layers(net):
        ein, eout = _reach(net, 0, a), _reach(net, a, L)
        miss = _missing(ein)
        if eout.all() and miss is not None:
            sx, ib = miss
            return a, (a, 1 - ib), (a, ib), (0, sx), (0, 1 - sx)
    raise TopologyMismatchError("no two-node relay layer with Z connectivity before it and X after it")


def _zx_once(net, ch, rng):
    _need_T(ch, 2, "the ZX scheme")
    a, A, B, sa, sb = _zx_roles(net)
    d1, d2 = net.sinks
    G = lambda s, v: effective_gain(net, ch, s, v)
    F = lambda v, d: effective_gain(net, ch, v, d)
    w1, w2 = _random_direction(rng, 2), _random_direction(rng, 2)
    u = _unit(_ratio(G(sb, A) * w2, G(sa, A)))  # x_a1 aligns with x_b2 at A
    msgs = [(sa[1], 0), (sb[1], 0), (sb[1], 1)]
    la1, lb1, lb2 = _labels_for(msgs)
    streams = [Stream(la1, msgs[0], u), Stream(lb1, msgs[1], w1), Stream(lb2, msgs[2], w2)]
    alpha = _coeff(G(sa, A) * u, G(sb, A) * w2)
    p = _random_direction(rng, 2)
    r = -_ratio(alpha * F(A, d1) * p, F(B, d1))  # cancels x_b2 at d1
    q = _ratio(F(A, d2) * p, F(B, d2))  # aligns x_b1 with x_a1 at d2
    relays = {
        A: DecodeForward(((lb1,), (la1, lb2)), ((1, p),)),
        B: DecodeForward(((lb1,), (lb2,)), ((0, q), (1, r))),
    }
    return LinearScheme("zx", 2, streams, relays, {0: 0, 1: 1}, {"df_layer": a})


def build_scheme_zx(net: LayeredNetwork, channels: ChannelRealization, rng=None) -> LinearScheme:
    """3/2 scheme for networks whose canonical word is ``Z...ZX``.

    The relay hearing both sources receives the lone-source stream aligned
    with one of the other source's streams and re-sends the sum; the other
    relay re-sends the other source's two streams, one cancelling the sum's
    unwanted part at the first sink and one aligning with the interference at
    the second.
    """
    return _retrying(_zx_once, net, channels, rng)


def _zs_roles(net):
    L = net.num_hops
    for a in _df_layers(net):
        ein, eout = _reach(net, 0, a), _reach(net, a, L)
        mi, mo = _missing(ein), _missing(eout)
        if mi is None or mo is None:
            continue
        sx, ib = mi
        if mo[0] != ib:
            continue
        A, B = (a, 1 - ib), (a, ib)
        return a, A, B, (0, sx), (0, 1 - sx), (L, mo[1]), (L, 1 - mo[1])
    raise TopologyMismatchError("no two-node relay layer with Z connectivity before it and S after it")


def _zs_once(net, ch, rng):
    _need_T(ch, 2, "the ZS scheme")
    a, A, B, sa, sb, dA, dB = _zs_roles(net)
    G = lambda s, v: effective_gain(net, ch, s, v)
    F = lambda v, d: effective_gain(net, ch, v, d)
    w1, w2 = _random_direction(rng, 2), _random_direction(rng, 2)
    u = _unit(_ratio(G(sb, A) * w2, G(sa, A)))  # x_aB aligns with x_bB at A
    msgs = [(sa[1], dB[1]), (sb[1], dA[1]), (sb[1], dB[1])]
    laB, lbA, lbB = _labels_for(msgs)
    streams = [Stream(laB, msgs[0], u), Stream(lbA, msgs[1], w1), Stream(lbB, msgs[2], w2)]
    fa, fb, r = (_random_direction(rng, 2) for _ in range(3))
    q = -_ratio(F(A, dB) * fa, F(B, dB))  # cancels x_bA at dB
    relays = {
        A: DecodeForward(((lbA,), (laB, lbB)), ((0, fa), (1, fb))),
        B: DecodeForward(((lbA,), (lbB,)), ((0, q), (1, r))),
    }
    return LinearScheme("zs", 2, streams, relays, {dA[1]: 1, dB[1]: 0}, {"df_layer": a})


def build_scheme_zs(net: LayeredNetwork, channels: ChannelRealization, rng=None) -> LinearScheme:
    """3/2 scheme for networks whose canonical word is ``ZS...S`` or ``Z...ZS``.

    The sink that hears only the two-source relay gets one stream plus an
    aligned interference sum; the other sink gets two streams after the
    second relay cancels the first sink's stream there.
    """
    return _retrying(_zs_once, net, channels, rng)


# --------------------------------------------------------------------------
# 4/3, 5/3, 2 and 1
# --------------------------------------------------------------------------


def _x_once(net, ch, rng):
    _need_T(ch, 3, "X-channel alignment")
    if not _reach(net, 0, net.num_hops).all():
        raise TopologyMismatchError("X-channel alignment needs every source to reach every sink")
    (s1, s2), (d1, d2) = net.sources, net.sinks
    G = lambda s, d: effective_gain(net, ch, s, d)
    v12, v11 = _random_direction(rng, 3), _random_direction(rng, 3)
    v22 = _unit(_ratio(G(s1, d1) * v12, G(s2, d1)))  # x12, x22 align at d1
    v21 = _unit(_ratio(G(s1, d2) * v11, G(s2, d2)))  # x11, x21 align at d2
    msgs = [(0, 0), (0, 1), (1, 0), (1, 1)]
    streams = [Stream(lab, m, v) for lab, m, v in zip(_labels_for(msgs), msgs, (v11, v12, v21, v22))]
    return LinearScheme("x", 3, streams, {}, {0: 1, 1: 1})


def build_scheme_x_single_hop(net: LayeredNetwork, channels: ChannelRealization, rng=None) -> LinearScheme:
    """4/3 alignment for the 2x2 X channel over three slots.

    Any network in which every source reaches every sink behaves as an X
    channel once all relays amplify, so the same construction applies there
    as a lower bound.
    """
    return _retrying(_x_once, net, channels, rng)


def _fig5_once(net, ch, rng):
    _need_T(ch, 3, "the 5/3 scheme")
    perms = match_fig5(net)
    if perms is None:
        raise TopologyMismatchError("network is not isomorphic to the 2-3-3-2 reference topology")
    inv = [{new: old for old, new in enumerate(p)} for p in perms]
    node = lambda l, c: (l, inv[l][c])
    s1, s2 = node(0, 0), node(0, 1)
    P, Q, R = node(1, 0), node(1, 1), node(1, 2)
    A, B, C = node(2, 0), node(2, 1), node(2, 2)
    d1, d2 = node(3, 0), node(3, 1)
    h = lambda u, v: np.asarray(ch.gains[(u[0], u[1], v[1])])
    m1, m2, n1, n2 = s1[1], s2[1], d1[1], d2[1]
    msgs = [(m1, n1), (m1, n2), (m1, n2), (m2, n1), (m2, n2)]
    l11, l12a, l12b, l21, l22 = _labels_for(msgs)
    dirs = [_random_direction(rng, 3) for _ in range(5)]
    streams = [Stream(lab, m, d) for lab, m, d in zip((l11, l12a, l12b, l21, l22), msgs, dirs)]
    up = _random_direction(rng, 3)
    ur = _ratio(h(P, A) * up, h(R, A))  # x22 aligns with x12(1) at A
    rd = lambda: _random_direction(rng, 3)
    s1_groups = ((l11,), (l12a,), (l12b,))
    relays = {
        P: DecodeForward(s1_groups, ((0, rd()), (1, up))),
        Q: DecodeForward(s1_groups, ((2, rd()),)),
        R: DecodeForward(((l21,), (l22,)), ((0, rd()), (1, ur))),
        A: DecodeForward(((l11,), (l21,), (l12a, l22)), ((0, rd()), (1, rd()))),
        B: DecodeForward(((l11,), (l12a,)), ((1, rd()),)),
        C: DecodeForward(((l21,), (l22,), (l12b,)), ((1, rd()), (2, rd()))),
    }
    return LinearScheme("5/3", 3, streams, relays, {n1: 0, n2: 0})


def build_scheme_5over3(net: LayeredNetwork, channels: ChannelRealization, rng=None) -> LinearScheme:
    """5/3 scheme for the 2-3-3-2 reference topology (any relabeling).

    Layer one splits source 1's three streams over two relays and lets the
    third relay send source 2's second stream aligned with one of them at the
    first relay of layer two, which then needs only three dimensions.
    """
    return _retrying(_fig5_once, net, channels, rng)


def _transfer_scalar(net, ch, src, sink, gains):
    return complex(effective_gain(net, ch, src, sink, gains)[0])


def _solve_bilinear(f1, f2):
    """Roots ``(x, y)`` of two bilinear forms given by 2x2 evaluation tables.

    ``f[i][j]`` is the form at ``x = i, y = j``.  Writing
    ``f = a + b x + c y + e x y`` and eliminating ``x`` leaves a quadratic
    in ``y``.
    """
    def coeffs(f):
        a = f[0][0]
        b = f[1][0] - a
        c = f[0][1] - a
        e = f[1][1] - a - b - c
        return a, b, c, e

    a1, b1, c1, e1 = coeffs(f1)
    a2, b2, c2, e2 = coeffs(f2)
    poly = [c2 * e1 - e2 * c1, a2 * e1 + c2 * b1 - b2 * c1 - e2 * a1, a2 * b1 - b2 * a1]
    scale = max(abs(x) for x in poly)
    if scale == 0:
        return []
    poly = [x if abs(x) > 1e-13 * scale else 0 for x in poly]
    out = []
    for y in np.roots(poly):
        den = b1 + e1 * y
        if abs(den) > 1e-12 * max(abs(b1), abs(e1), 1e-300):
            out.append((complex(-(a1 + c1 * y) / den), complex(y)))
    return out


def _neutralize_once(net, ch, rng, kept):
    _need_T(ch, 1, "neutralization")
    (m1, n1), (m2, n2) = kept
    L = net.num_hops
    src = lambda m: (0, m)
    snk = lambda n: (L, n)
    cross = [(m1, n2), (m2, n1)]
    for m, n in cross:
        if count_paths(net, src(m), snk(n)) == 1:
            raise NeutralizationError(
                f"s{m + 1} reaches d{n + 1} along a single path; its interference cannot be neutralized"
            )
    for m, n in kept:
        if count_paths(net, src(m), snk(n)) == 0:
            raise NeutralizationError(f"kept message W{m + 1}{n + 1} has no path")
    relays = [v for v in net.nodes if 0 < v[0] < L]
    base = {v: np.exp(2j * np.pi * rng.random()) * np.ones(1) for v in relays}
    active = [(m, n) for m, n in cross if count_paths(net, src(m), snk(n)) >= 2]

    def f(m, n, gains):
        return _transfer_scalar(net, ch, src(m), snk(n), gains)

    def on_paths(m, n):
        return [v for v in relays if v in net.descendants(src(m)) and snk(n) in net.descendants(v)]

    def accept(gains):
        if any(not np.isfinite(g).all() or np.abs(g).min() < 1e-9 for g in gains.values()):
            return False
        return all(abs(f(m, n, gains)) > 1e-9 for m, n in kept)

    candidates = []
    if not active:
        candidates.append({v: np.ones(1) for v in relays})
    elif len(active) == 1:
        (m, n), = active
        for v in on_paths(m, n):
            g0 = {**base, v: np.zeros(1)}
            g1 = {**base, v: np.ones(1)}
            b, a = f(m, n, g0), f(m, n, g1) - f(m, n, g0)
            if abs(a) > 0:
                candidates.append({**base, v: np.array([-b / a])})
    else:
        (ma, na), (mb, nb) = active
        pool = sorted(set(on_paths(ma, na)) | set(on_paths(mb, nb)))
        for x, y in itertools.permutations(pool, 2):
            tables = []
            for m, n in active:
                tables.append(
                    [[f(m, n, {**base, x: np.array([float(i)]), y: np.array([float(j)])}) for j in (0, 1)] for i in (0, 1)]
                )
            for gx, gy in _solve_bilinear(*tables):
                candidates.append({**base, x: np.array([gx]), y: np.array([gy])})
    for gains in candidates:
        if accept(gains):
            streams = [Stream(lab, msg, np.ones(1, dtype=complex)) for lab, msg in zip(_labels_for(kept), kept)]
            ops = {v: AmplifyForward(gains[v]) for v in relays}
            return LinearScheme("neutralize", 1, streams, ops, {0: 0, 1: 0}, {"kept": list(kept)})
    raise DegenerateDrawError("no relay-gain pair neutralizes both interference links")


def build_scheme_neutralize(
    net: LayeredNetwork, kept, channels: ChannelRealization, rng=None
) -> LinearScheme:
    """Two-stream scheme that nulls the two unkept messages and cancels interference.

    ``kept`` is ``((0, 0), (1, 1))`` or ``((0, 1), (1, 0))``.  Every relay
    amplifies with a scalar gain; when interference reaches a sink along two
    or more paths, two of those gains are solved so the paths cancel.
    """
    kept = tuple(tuple(int(x) for x in k) for k in kept)
    if len(kept) != 2 or {m for m, _ in kept} != {0, 1} or {n for _, n in kept} != {0, 1}:
        raise ValueError("kept messages must use both sources and both sinks")
    kept = tuple(sorted(kept))
    return _retrying(lambda n, c, r: _neutralize_once(n, c, r, kept), net, channels, rng)


def _tdma_once(net, ch, rng, message=None):
    L = net.num_hops
    msgs = [message] if message is not None else [(m, n) for m in (0, 1) for n in (0, 1)]
    for m, n in msgs:
        if count_paths(net, (0, m), (L, n)):
            direction = np.zeros(ch.T, dtype=complex)
            direction[0] = 1
            return LinearScheme("tdma", ch.T, [Stream(f"x{m + 1}{n + 1}", (m, n), direction)], {}, {})
    raise TopologyMismatchError("no source reaches any sink")


def build_scheme_tdma(net: LayeredNetwork, channels: ChannelRealization, rng=None, message=None) -> LinearScheme:
    """One stream of one message; every relay amplifies."""
    return _retrying(lambda n, c, r: _tdma_once(n, c, r, message), net, channels, rng)


# --------------------------------------------------------------------------
# registry
# --------------------------------------------------------------------------


def _neut(kept):
    return lambda net, ch, rng: build_scheme_neutralize(net, kept, ch, rng)


# name -> (slots, builder(net, channels, rng))
BUILDERS: dict = {
    "xz": (2, build_scheme_xz),
    "zx": (2, build_scheme_zx),
    "zs": (2, build_scheme_zs),
    "x": (3, build_scheme_x_single_hop),
    "5/3": (3, build_scheme_5over3),
    "neutralize-direct": (1, _neut(((0, 0), (1, 1)))),
    "neutralize-cross": (1, _neut(((0, 1), (1, 0)))),
    "tdma": (1, build_scheme_tdma),
}

# tried in this order by best_scheme; the first one of the highest value wins
_PREFERENCE = ("neutralize-cross", "neutralize-direct", "5/3", "xz", "zx", "zs", "x", "tdma")


def synthesize(net: LayeredNetwork, kind: str, rng: np.random.Generator, channels=None):
    """Draw channels (unless given) and build a verified scheme of one kind.

    Returns ``(scheme, channels, report)``.
    """
    if kind not in BUILDERS:
        raise KeyError(f"unknown scheme {kind!r}; choose from {sorted(BUILDERS)}")
    T, build = BUILDERS[kind]
    if channels is None:
        channels = ChannelRealization.draw(net, T, rng)
    scheme = build(net, channels, rng)
    return scheme, channels, scheme.metadata.pop("report")


def best_kind(net: LayeredNetwork, rng: np.random.Generator, kinds=_PREFERENCE):
    """Scheme kind with the highest verified sum DoF on one seeded draw.

    Returns ``(kind, lower, witness)``; ``kind`` is ``None`` when nothing
    verifies.  Ties go to the earlier kind in ``kinds``.
    """
    best, best_kind_, witness = Fraction(0), None, "no scheme verified"
    for kind in kinds:
        try:
            scheme, _, report = synthesize(net, kind, rng)
        except (SchemeError, ValueError):
            continue
        if report.sum_dof > best:
            best, best_kind_ = report.sum_dof, kind
            witness = f"{kind} scheme verified at sum DoF {fraction_str(best)} (T={scheme.T})"
    return best_kind_, best, witness


def best_scheme(net: LayeredNetwork, rng: np.random.Generator, kinds=_PREFERENCE):
    """Highest verified sum DoF over the applicable builders.

    Returns ``(lower, witness)`` where ``witness`` names the scheme and the
    verification that backs it.
    """
    _, lower, witness = best_kind(net, rng, kinds)
    return lower, witness

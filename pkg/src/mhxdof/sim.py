"""Finite-SNR rates of linear schemes and high-SNR slope estimates.

Every non-source node adds unit-variance complex Gaussian noise.  Each layer
of transmitters is scaled by one common factor so that no node exceeds the
power budget ``P`` (a common factor keeps cancellations between nodes of the
same layer intact).  Amplify-forward relays pass their received noise on;
decode-forward relays are assumed to decode correctly and transmit clean
signals.  Noise is tracked as a linear map from every elementary noise
source, so noise forwarded along several paths is correlated correctly.

A sink decodes its own streams jointly and treats everything else as
Gaussian noise; per-stream rates split the joint rate by the chain rule.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .network import LayeredNetwork
from .synth import BUILDERS, ChannelRealization, DecodeForward, LinearScheme

__all__ = [
    "RatePoint",
    "SlopeEstimate",
    "scheme_rates",
    "simulate_rate",
    "estimate_dof",
    "parse_snr_grid",
    "validate_grid",
]


@dataclass
class RatePoint:
    """Mean rates (bits per channel use) at one SNR."""

    snr_db: float
    sum_rate: float
    per_message: dict
    trials: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "snr_db": self.snr_db,
            "sum_rate": self.sum_rate,
            "per_message": dict(sorted(self.per_message.items())),
            "trials": self.trials,
            "seed": self.seed,
        }


@dataclass
class SlopeEstimate:
    dof_hat: float
    window: tuple
    residual: float
    trials: int
    points: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "dof_hat": self.dof_hat,
            "window": list(self.window),
            "residual": self.residual,
            "trials": self.trials,
            "points": [p.to_dict() for p in self.points],
        }


def _logdet(a: np.ndarray) -> float:
    sign, val = np.linalg.slogdet(a)
    return float(val / np.log(2))


def scheme_rates(net: LayeredNetwork, channels: ChannelRealization, scheme: LinearScheme, snr_db: float) -> dict:
    """Per-stream rates in bits per channel use for one channel draw.

    Returns ``{label: rate}``.  ``snr_db = -inf`` gives zero rates.
    """
    T, K = scheme.T, len(scheme.streams)
    P = 0.0 if np.isneginf(snr_db) else 10.0 ** (snr_db / 10.0)
    relays = [v for v in net.nodes if 0 < v[0] < net.num_hops]
    noisy = relays + list(net.sinks)
    slot = {v: i for i, v in enumerate(noisy)}
    W = T * len(noisy)

    # raw source outputs, then one scale for the whole layer
    sig, noi = {}, {}
    for s in net.sources:
        x = np.zeros((T, K), dtype=complex)
        for k, st in enumerate(scheme.streams):
            if st.source == s[1]:
                x[:, k] = np.sqrt(P) * np.asarray(st.direction)
        sig[s], noi[s] = x, np.zeros((T, W), dtype=complex)
    _scale_layer(net.sources, sig, noi, P, T)

    rx_sig, rx_noi = {}, {}
    L = net.num_hops
    for l in range(1, L + 1):
        layer = [(l, j) for j in range(net.layers[l])]
        for v in layer:
            c = np.zeros((T, K), dtype=complex)
            n = np.zeros((T, W), dtype=complex)
            n[:, slot[v] * T:(slot[v] + 1) * T] = np.eye(T)
            for u in net.in_neighbors(v):
                h = np.asarray(channels.gains[(l - 1, u[1], v[1])])
                c += h[:, None] * sig[u]
                n += h[:, None] * noi[u]
            rx_sig[v], rx_noi[v] = c, n
        if l == L:
            break
        for v in layer:
            op = scheme.relays.get(v)
            c, n = rx_sig[v], rx_noi[v]
            if isinstance(op, DecodeForward):
                x = np.zeros((T, K), dtype=complex)
                # relative group coefficients come from the noiseless response
                for gi, direction in op.forward:
                    members = [scheme.index(lab) for lab in op.groups[gi]]
                    ref = c[:, members[0]]
                    nrm = np.vdot(ref, ref).real
                    for k in members:
                        a = np.vdot(ref, c[:, k]) / nrm if nrm > 0 else 0.0
                        x[:, k] = np.sqrt(P) * a * np.asarray(direction)
                sig[v], noi[v] = x, np.zeros((T, W), dtype=complex)
            else:
                g = np.ones(T) if op is None else np.asarray(op.gains)
                sig[v], noi[v] = g[:, None] * c, g[:, None] * n
        _scale_layer(layer, sig, noi, P, T)

    rates = {}
    for d in net.sinks:
        c, n = rx_sig[d], rx_noi[d]
        q = n @ n.conj().T
        desired = [k for k, s in enumerate(scheme.streams) if s.sink == d[1]]
        others = [k for k, s in enumerate(scheme.streams) if s.sink != d[1]]
        base = q + c[:, others] @ c[:, others].conj().T
        prev = _logdet(base)
        acc = base
        for k in desired:
            acc = acc + np.outer(c[:, k], c[:, k].conj())
            cur = _logdet(acc)
            rates[scheme.streams[k].label] = max(cur - prev, 0.0) / T
            prev = cur
    return rates


def _scale_layer(layer, sig, noi, P, T) -> None:
    powers = [(np.sum(np.abs(sig[v]) ** 2) + np.sum(np.abs(noi[v]) ** 2)) / T for v in layer]
    active = [p for p in powers if p > 0]
    if not active:
        return
    gamma = np.sqrt(P / max(active)) if P > 0 else 0.0
    for v in layer:
        sig[v] = gamma * sig[v]
        noi[v] = gamma * noi[v]


def _message_key(scheme: LinearScheme, label: str) -> str:
    m, n = scheme.streams[scheme.index(label)].message
    return f"W{m + 1}{n + 1}"


def _draw_rates(net, kind, child_seed, snr_list):
    rng = np.random.default_rng(child_seed)
    T, build = BUILDERS[kind]
    channels = ChannelRealization.draw(net, T, rng)
    scheme = build(net, channels, rng)
    out = []
    for snr in snr_list:
        per_stream = scheme_rates(net, channels, scheme, snr)
        per_msg = {f"W{m + 1}{n + 1}": 0.0 for m in (0, 1) for n in (0, 1)}
        for lab, r in per_stream.items():
            per_msg[_message_key(scheme, lab)] += r
        out.append(per_msg)
    return out


def _sweep(net, kind, snr_list, trials, seed, workers=1):
    children = np.random.SeedSequence(seed).spawn(trials)
    args = [(net, kind, c, snr_list) for c in children]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda a: _draw_rates(*a), args))
    else:
        results = [_draw_rates(*a) for a in args]
    points = []
    for i, snr in enumerate(snr_list):
        per_msg = {key: float(np.mean([r[i][key] for r in results])) for key in results[0][i]}
        points.append(RatePoint(float(snr), float(sum(per_msg.values())), per_msg, trials, seed))
    return points


def simulate_rate(net: LayeredNetwork, kind: str, snr_db: float, trials: int, seed: int, workers: int = 1) -> RatePoint:
    """Mean rates of scheme ``kind`` over ``trials`` channel draws at one SNR.

    Draw ``i`` uses the ``i``-th child of ``SeedSequence(seed)`` for both its
    channels and the scheme's random directions, so results do not depend on
    ``workers``.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    if kind not in BUILDERS:
        raise KeyError(f"unknown scheme {kind!r}")
    return _sweep(net, kind, [snr_db], trials, seed, workers)[0]


def parse_snr_grid(text: str) -> list:
    """``lo:hi:step`` in dB, inclusive of ``hi``."""
    try:
        lo, hi, step = (float(x) for x in text.split(":"))
    except ValueError as exc:
        raise ValueError(f"SNR grid must be lo:hi:step, got {text!r}") from exc
    if step <= 0 or hi < lo:
        raise ValueError("SNR grid needs lo <= hi and step > 0")
    n = int(round((hi - lo) / step))
    return [lo + i * step for i in range(n + 1)]


def validate_grid(grid) -> None:
    grid = sorted(grid)
    if len(grid) < 2:
        raise ValueError("need at least two SNR points")
    if grid[-1] - grid[0] < 30:
        raise ValueError("SNR grid must span at least 30 dB for a slope estimate")
    if grid[0] < 40 or grid[-1] > 100:
        raise ValueError("SNR grid must lie within [40, 100] dB (high-SNR regime, before float precision runs out)")


def estimate_dof(net: LayeredNetwork, kind: str, snr_grid_db, trials: int, seed: int, workers: int = 1) -> SlopeEstimate:
    """Least-squares slope of mean sum rate against ``log2(SNR)``.

    Every grid point reuses the same draws (common random numbers), which
    removes draw-to-draw offsets from the slope.
    """
    grid = [float(x) for x in snr_grid_db]
    validate_grid(grid)
    points = _sweep(net, kind, grid, trials, seed, workers)
    x = np.array(grid) * np.log2(10.0) / 10.0
    y = np.array([p.sum_rate for p in points])
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return SlopeEstimate(float(slope), (min(grid), max(grid)), resid, trials, points)

import numpy as np
import pytest

from mhxdof.classify import fig5_network
from mhxdof.network import make_network, network_from_word
from mhxdof.synth import (
    AmplifyForward,
    ChannelRealization,
    DecodeForward,
    DegenerateDrawError,
    LinearScheme,
    NeutralizationError,
    Stream,
    TopologyMismatchError,
    build_scheme_5over3,
    build_scheme_neutralize,
    build_scheme_tdma,
    build_scheme_x_single_hop,
    build_scheme_xz,
    end_to_end_transfer,
    propagate,
    synthesize,
    verify_scheme,
)

from conftest import load_fixture


def test_identity_network_transfer():
    net = make_network([2, 2], [(0, 0, 0), (0, 1, 1)], coefficients={(0, 0, 0): 1 + 0j, (0, 1, 1): 1 + 0j})
    ch = ChannelRealization.constant(net, 2)
    streams = [Stream("x11", (0, 0), np.array([1, 0j])), Stream("x22", (1, 1), np.array([0j, 1]))]
    out = end_to_end_transfer(net, ch, LinearScheme("id", 2, streams))
    np.testing.assert_array_equal(out[0], [[1, 0], [0, 0]])
    np.testing.assert_array_equal(out[1], [[0, 0], [0, 1]])


def test_af_chain_equals_matrix_product(rng):
    net = load_fixture("fig1_layered")
    ch = ChannelRealization.draw(net, 1, rng)
    relays = [v for v in net.nodes if 0 < v[0] < net.num_hops]
    gains = {v: rng.standard_normal(1) + 1j * rng.standard_normal(1) for v in relays}
    streams = [Stream("x11", (0, 0), np.ones(1, complex)), Stream("x22", (1, 1), np.ones(1, complex))]
    scheme = LinearScheme("af", 1, streams, {v: AmplifyForward(g) for v, g in gains.items()})
    total = np.eye(2, dtype=complex)
    for l in range(net.num_hops):
        H = np.zeros((net.layers[l + 1], net.layers[l]), dtype=complex)
        for (ll, i, j), h in ch.gains.items():
            if ll == l:
                H[j, i] = h[0]
        G = np.diag([gains[(l + 1, j)][0] for j in range(net.layers[l + 1])]) if l + 1 < net.num_hops else np.eye(2)
        total = G @ H @ total
    out = end_to_end_transfer(net, ch, scheme)
    for d in (0, 1):
        np.testing.assert_allclose(out[d][0], total[d], rtol=1e-12)


def test_xz_passes_and_x12_is_forwarded_away(rng):
    net = load_fixture("fig4_xz")
    ch = ChannelRealization.draw(net, 2, rng)
    scheme = build_scheme_xz(net, ch, rng)
    rep = verify_scheme(net, ch, scheme)
    assert rep.passed and rep.sum_dof == pytest.approx(1.5)
    d1 = end_to_end_transfer(net, ch, scheme)[0]
    assert np.abs(d1[:, scheme.index("x12")]).max() < 1e-12
    assert abs(np.linalg.det(d1[:, [scheme.index("x11"), scheme.index("x21")]])) > 1e-6


def test_xz_sabotaged_direction_fails(rng):
    net = load_fixture("fig4_xz")
    ch = ChannelRealization.draw(net, 2, rng)
    scheme = build_scheme_xz(net, ch, rng)
    B = (1, 1)
    op = scheme.relays[B]
    scheme.relays[B] = DecodeForward(op.groups, ((0, rng.standard_normal(2) + 0j),))
    rep = verify_scheme(net, ch, scheme)
    assert not rep.passed
    d1 = next(c for c in rep.sinks if c.node == "d1")
    assert d1.residual > 1e-3
    assert "x12" in d1.detail


def test_xzz_collapses_through_af(rng):
    net = load_fixture("fig4_xzz")
    ch = ChannelRealization.draw(net, 2, rng)
    assert verify_scheme(net, ch, build_scheme_xz(net, ch, rng)).passed


def test_xz_degenerate_first_hop_raises(rng):
    net = load_fixture("fig4_xz")
    ch = ChannelRealization.draw(net, 2, rng)
    # slot-invariant first hop: the relays' cross ratio is the same in both
    # slots, so v1^1 cannot tell x11 from the aligned sum
    for e in list(ch.gains):
        if e[0] == 0:
            ch.gains[e] = np.full(2, ch.gains[e][0])
    with pytest.raises(DegenerateDrawError):
        build_scheme_xz(net, ch, rng)


def test_verification_scale_invariant(rng):
    net = fig5_network()
    ch = ChannelRealization.draw(net, 3, rng)
    scheme = build_scheme_5over3(net, ch, rng)
    for c in (1e-4, 3e5 * np.exp(0.7j)):
        assert verify_scheme(net, ch.scaled(c), scheme).passed


def test_5over3_alignment_and_ranks(rng):
    net = fig5_network()
    ch = ChannelRealization.draw(net, 3, rng)
    scheme = build_scheme_5over3(net, ch, rng)
    rep = verify_scheme(net, ch, scheme)
    assert rep.passed
    v12 = next(c for c in rep.relays if c.node == "v1^2")
    assert v12.alignment_residual < 1e-10 and v12.rank == 3
    d2 = next(c for c in rep.sinks if c.node == "d2")
    assert d2.rank == d2.required == 3


def test_5over3_needs_reference_topology(rng):
    net = network_from_word("XZ")
    with pytest.raises(TopologyMismatchError):
        build_scheme_5over3(net, ChannelRealization.draw(net, 3, rng), rng)


def test_x_single_hop(rng):
    net = load_fixture("x")
    ch = ChannelRealization.draw(net, 3, rng)
    rep = verify_scheme(net, ch, build_scheme_x_single_hop(net, ch, rng))
    assert rep.passed
    for c in rep.sinks:
        assert c.interference_dim == 1 and c.rank == 2


def test_x_single_hop_constant_channels_raise(rng):
    net = load_fixture("x")
    with pytest.raises(DegenerateDrawError, match="time variation"):
        build_scheme_x_single_hop(net, ChannelRealization.constant(net, 3, rng), rng)


def test_neutralize_zsz_cross(rng):
    net = load_fixture("fig6_zsz")
    ch = ChannelRealization.draw(net, 1, rng)
    scheme = build_scheme_neutralize(net, ((0, 1), (1, 0)), ch, rng)
    out = end_to_end_transfer(net, ch, scheme)
    tr = propagate(net, ch, scheme)
    for d, cross in ((0, "x12"), (1, "x21")):
        scale = tr.magnitude[(net.num_hops, d)].max()
        assert abs(out[d][0, scheme.index(cross)]) < 1e-10 * scale
    assert verify_scheme(net, ch, scheme).sum_dof == 2


def test_neutralize_single_cross_path_errors(rng):
    net = load_fixture("fig4_xz")
    with pytest.raises(NeutralizationError, match="single path"):
        build_scheme_neutralize(net, ((0, 0), (1, 1)), ChannelRealization.draw(net, 1, rng), rng)


def test_neutralize_without_cross_paths_uses_unit_gains(rng):
    net = network_from_word("PP")
    ch = ChannelRealization.draw(net, 1, rng)
    scheme = build_scheme_neutralize(net, ((0, 0), (1, 1)), ch, rng)
    assert all(np.all(op.gains == 1) for op in scheme.relays.values())
    assert verify_scheme(net, ch, scheme).passed


def test_neutralize_rejects_bad_reduction(rng):
    net = load_fixture("fig6_zsz")
    with pytest.raises(ValueError):
        build_scheme_neutralize(net, ((0, 0), (0, 1)), ChannelRealization.draw(net, 1, rng), rng)


def test_tdma_on_any_connected_network(rng):
    net = load_fixture("fig1_layered")
    ch = ChannelRealization.draw(net, 1, rng)
    rep = verify_scheme(net, ch, build_scheme_tdma(net, ch, rng))
    assert rep.passed and rep.sum_dof == 1


@pytest.mark.parametrize("word, kind", [("ZX", "zx"), ("SSX", "zx"), ("ZS", "zs"), ("SZZ", "zs"), ("ZZS", "zs"), ("XSS", "xz")])
def test_other_case_c_families(word, kind, rng):
    net = network_from_word(word)
    _, _, rep = synthesize(net, kind, rng)
    assert rep.passed and float(rep.sum_dof) == 1.5


def test_relay_with_unassigned_stream_fails(rng):
    net = load_fixture("fig4_xz")
    ch = ChannelRealization.draw(net, 2, rng)
    scheme = build_scheme_xz(net, ch, rng)
    A = (1, 0)
    op = scheme.relays[A]
    scheme.relays[A] = DecodeForward(op.groups[:1], op.forward[:1])
    rep = verify_scheme(net, ch, scheme)
    assert not rep.passed
    assert any("no demodulation group" in f for f in rep.failures)

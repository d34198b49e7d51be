from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qns.topology import (
    Measure,
    NodeColor,
    NodeCoord,
    build_network,
    build_torus_block,
    dual_sector,
    node_color,
    path_margin,
    render_grid,
)


def gf2_rank(m: np.ndarray) -> int:
    m = m.copy() % 2
    rank = 0
    for col in range(m.shape[1]):
        pivot = next((r for r in range(rank, m.shape[0]) if m[r, col]), None)
        if pivot is None:
            continue
        m[[rank, pivot]] = m[[pivot, rank]]
        for r in range(m.shape[0]):
            if r != rank and m[r, col]:
                m[r] ^= m[rank]
        rank += 1
    return rank


def odd_support(stabs) -> set:
    counts = Counter(q for s in stabs for q in s.support)
    return {q for q, c in counts.items() if c % 2}


networks = st.builds(build_network, st.integers(1, 6), st.integers(1, 4))


def test_smallest_network():
    net = build_network(1, 1)
    assert net.z_logical_path == (net.alice, net.bob)
    assert net.alice.col == 0 and net.bob.col == net.width - 1


def test_margin_by_exhaustive_scan():
    net = build_network(5, 3)
    dist = min(min(r, net.height - 1 - r) for r, _ in net.z_logical_path)
    assert dist // 2 == 3
    assert path_margin(net) == 3


@pytest.mark.parametrize("args", [(1, 1), (5, 3), (4, 2), (7, 1)])
def test_product_of_x_stabilizers_is_both_sides(args):
    net = build_network(*args)
    assert odd_support(net.x_stabilizers) == set(net.x_boundary_A) | set(net.x_boundary_B)


def test_rejects_bad_dimensions():
    for args in [(0, 1), (1, 0), (-2, 3)]:
        with pytest.raises(ValueError):
            build_network(*args)


@settings(max_examples=30, deadline=None)
@given(networks)
def test_network_invariants(net):
    z_sets = [set(s.support) for s in net.z_stabilizers]
    x_sets = [set(s.support) for s in net.x_stabilizers]
    for zs in z_sets:
        assert len(zs) in (3, 4) or len(zs) == 2 and net.height == 1
        for xs in x_sets:
            assert len(zs & xs) % 2 == 0
    path = set(net.z_logical_path)
    for xs in x_sets:
        assert len(path & xs) % 2 == 0
    # consecutive path nodes share a red node
    for a, b in zip(net.z_logical_path, net.z_logical_path[1:]):
        assert any(a in xs and b in xs for xs in x_sets)
    assert path_margin(net) >= net.margin
    # membership counts
    for q in net.black_nodes:
        nz = sum(q in zs for zs in z_sets)
        nx = sum(q in xs for xs in x_sets)
        assert nz <= 2 and nx <= 2
        r, c = q
        if 0 < r < net.height - 1 and 0 < c < net.width - 1:
            assert nz == nx == 2


@settings(max_examples=30, deadline=None)
@given(networks)
def test_measurement_pattern(net):
    pat = net.measurement_pattern
    assert set(pat) == set(net.black_nodes)
    assert pat[net.alice] is Measure.KEEP and pat[net.bob] is Measure.KEEP
    assert sum(m is Measure.KEEP for m in pat.values()) == 2
    for q in net.z_logical_path[1:-1]:
        assert pat[q] is Measure.Z
    for q in net.x_boundary_A + net.x_boundary_B:
        if q not in (net.alice, net.bob):
            assert pat[q] is Measure.X


def test_colouring():
    assert node_color(NodeCoord(0, 0)) is NodeColor.BLACK
    assert node_color(NodeCoord(1, 0)) is NodeColor.BLUE
    assert node_color(NodeCoord(0, 1)) is NodeColor.RED


def test_torus_counts():
    t = build_torus_block(3)
    assert len(t.z_stabilizers) == 9 and len(t.x_stabilizers) == 9
    for q in t.black_nodes:
        assert sum(q in s.support for s in t.z_stabilizers) == 2
        assert sum(q in s.support for s in t.x_stabilizers) == 2


def test_torus_rank():
    zs, xs = dual_sector(build_torus_block(5))
    assert gf2_rank(zs.check) == 24
    assert gf2_rank(xs.check) == 24


def test_torus_logicals():
    t = build_torus_block(2)
    for cyc in t.z_logicals + t.x_logicals:
        assert len(cyc) == 2
    t = build_torus_block(4)
    for zl in t.z_logicals:
        for s in t.x_stabilizers:
            assert len(set(zl) & set(s.support)) % 2 == 0
    with pytest.raises(ValueError):
        build_torus_block(1)


def test_sector_witnesses():
    net = build_network(1, 1)
    zs, xs = dual_sector(net)
    assert zs.witness_path == net.z_logical_path
    zs, xs = dual_sector(build_torus_block(3))
    assert len(zs.witness_path) == 3 and len(xs.witness_path) == 3
    zs2, _ = dual_sector(build_torus_block(3), both_cycles=True)
    assert zs2.n_observables == 2


def _side_to_side_chains(net, max_len):
    """Simple phase-error chains hopping between qubits that share an XXXX check."""
    reds = [set(s.support) for s in net.x_stabilizers]
    adj = {q: set() for q in net.black_nodes}
    for sup in reds:
        for a in sup:
            adj[a] |= sup - {a}
    right = set(net.x_boundary_B)
    out = []

    def walk(path):
        if path[-1] in right:
            out.append(list(path))
            return
        if len(path) == max_len:
            return
        for nxt in sorted(adj[path[-1]]):
            if nxt not in path and nxt.col >= path[-1].col:
                path.append(nxt)
                walk(path)
                path.pop()

    for start in net.x_boundary_A:
        walk([start])
    return out, reds


def test_undetected_side_to_side_chains_flip_each_side_once():
    net = build_network(3, 2)
    chains, reds = _side_to_side_chains(net, max_len=5)
    a, b = set(net.x_boundary_A), set(net.x_boundary_B)
    silent = [c for c in chains if all(len(set(c) & r) % 2 == 0 for r in reds)]
    assert len(silent) > 10
    for chain in silent:
        cs = set(chain)
        assert len(cs & a) % 2 == 1 and len(cs & b) % 2 == 1
        # so the product over both sides is unchanged
        assert len(cs & (a | b)) % 2 == 0


def test_render_golden():
    text = render_grid(build_network(1, 1))
    assert text.splitlines() == ["KRK", "BKB", "ARb", "BKB", "KRK"]
    pattern = build_network(1, 1).render("pattern").splitlines()
    assert pattern[2] == "A.b"
    assert set("".join(pattern)) <= set("ZX.Ab")

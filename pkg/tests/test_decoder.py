import itertools
import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qns.decoder import (
    BOUNDARY,
    BlossomDecoder,
    MatchingGraph,
    PyMatchingDecoder,
    brute_force_matching,
    build_matching_graph,
    error_lattice,
    log_likelihood_weight,
    logical_outcome,
    mwpm,
)
from qns.matching import NoPerfectMatching
from qns.noise import EffectiveRates, ErrorHistory, sample_error_history
from qns.protocol import DetectionEventSet, detection_events, detector_bits, measure, observable_bits, read_events
from qns.topology import build_network, build_torus_block, dual_sector

RATES = EffectiveRates(0.01, 0.01)


def torus(d):
    return dual_sector(build_torus_block(d))[0]


def graph_for(sector, events, n, rates=RATES, **kw):
    return build_matching_graph(DetectionEventSet(sector.name, frozenset(events)), rates, sector, n, **kw)


def torus_manhattan(sector, d, a, b):
    (ra, sa), (rb, sb) = a, b
    pa, pb = sector.stabilizers[sa].site, sector.stabilizers[sb].site
    dr = abs(pa.row - pb.row) // 2
    dc = abs(pa.col - pb.col) // 2
    return min(dr, d - dr) + min(dc, d - dc) + abs(ra - rb)


def test_uniform_weights_are_manhattan():
    d, n = 5, 5
    sec = torus(d)
    w = log_likelihood_weight(0.01)
    events = [(0, 0), (3, 7), (5, 12), (2, 24)]
    g = graph_for(sec, events, n)
    order = sorted(events)
    for i, j in itertools.combinations(range(4), 2):
        assert g.dist[i, j] == pytest.approx(torus_manhattan(sec, d, order[i], order[j]) * w)


def test_one_time_step_costs_w_s():
    sec = torus(3)
    rates = EffectiveRates(0.02, 0.005)
    g = graph_for(sec, [(1, 4), (2, 4)], 3, rates)
    assert g.dist[0, 1] == pytest.approx(math.log(0.98 / 0.02))


def networkx_oracle(sector, n, rates):
    """Detector graph built straight from the check matrix."""
    wE, wS = log_likelihood_weight(rates.eps_E), log_likelihood_weight(rates.eps_S)
    g = nx.Graph()
    for q in range(sector.n_qubits):
        s1, s2 = np.flatnonzero(sector.check[:, q])
        for t in range(n + 1):
            g.add_edge((t, s1), (t, s2), weight=wE)
    for s in range(sector.n_stabilizers):
        for t in range(n):
            g.add_edge((t, s), (t + 1, s), weight=wS)
    return g


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32))
def test_weights_match_dijkstra_oracle(seed):
    rng = np.random.default_rng(seed)
    sec, n = torus(5), 5
    rates = EffectiveRates(float(rng.uniform(0.005, 0.05)), float(rng.uniform(0.005, 0.05)))
    cells = [(int(t), int(s)) for t, s in zip(rng.integers(0, n + 1, 8), rng.integers(0, 25, 8))]
    events = sorted(set(cells))[:4]
    g = graph_for(sec, events, n, rates)
    oracle = networkx_oracle(sec, n, rates)
    for i, j in itertools.combinations(range(len(events)), 2):
        ref = nx.dijkstra_path_length(oracle, events[i], events[j])
        assert g.dist[i, j] == pytest.approx(ref)
        # triangle inequality
        for k in range(len(events)):
            assert g.dist[i, j] <= g.dist[i, k] + g.dist[k, j] + 1e-9


def test_correction_path_realises_weight():
    sec = torus(5)
    g = graph_for(sec, [(0, 0), (4, 18)], 5)
    path = g.correction_path(0, 1)
    assert sum(e.weight for e in path) == pytest.approx(g.dist[0, 1])


def test_boundary_edges_on_rectangle():
    zs, _ = dual_sector(build_network(3, 2))
    g = graph_for(zs, [(1, 0), (1, 3)], 2)
    assert np.isfinite(g.boundary_dist).all()
    path = g.correction_path(0, BOUNDARY)
    assert sum(e.weight for e in path) == pytest.approx(g.boundary_dist[0])
    assert path[-1].v == BOUNDARY


# -- matching --------------------------------------------------------------------------


def test_two_nodes():
    g = MatchingGraph.from_weights([[0, 0.7], [0.7, 0]])
    assert mwpm(g).pairs == ((0, 1),)
    assert brute_force_matching(g).pairs == ((0, 1),)


def test_square_with_cheap_diagonal():
    w = np.array([[0, 1, 0.1, 1], [1, 0, 1, 0.1], [0.1, 1, 0, 1], [1, 0.1, 1, 0]])
    g = MatchingGraph.from_weights(w)
    assert mwpm(g).pairs == ((0, 2), (1, 3))
    assert mwpm(g).weight == pytest.approx(0.2)
    assert brute_force_matching(g).weight == pytest.approx(0.2)


def test_empty_and_limits():
    g = MatchingGraph.from_weights(np.zeros((0, 0)))
    assert mwpm(g).pairs == () and brute_force_matching(g).weight == 0
    with pytest.raises(ValueError):
        brute_force_matching(MatchingGraph.from_weights(np.ones((14, 14))))
    with pytest.raises(NoPerfectMatching):
        mwpm(MatchingGraph.from_weights(np.ones((3, 3))))


def random_instance(rng, boundary):
    n = int(rng.integers(1, 11))
    w = rng.random((n, n))
    w = (w + w.T) / 2
    mask = rng.random((n, n)) < 0.2
    w[mask | mask.T] = np.inf
    np.fill_diagonal(w, 0)
    b = rng.random(n) if boundary else None
    return MatchingGraph.from_weights(w, b)


@pytest.mark.parametrize("boundary", [False, True])
def test_mwpm_equals_brute_force(boundary):
    rng = np.random.default_rng(1 + boundary)
    compared = 0
    for _ in range(150):
        g = random_instance(rng, boundary)
        try:
            ref = brute_force_matching(g)
        except NoPerfectMatching:
            with pytest.raises(NoPerfectMatching):
                mwpm(g)
            continue
        got = mwpm(g)
        assert got.weight == pytest.approx(ref.weight, abs=1e-9)
        covered = sorted(x for p in got.pairs for x in p if x != BOUNDARY)
        assert covered == list(range(len(g)))
        compared += 1
    assert compared > 50


def test_pruned_graph_keeps_exact_optimum():
    sec = torus(7)
    rng = np.random.default_rng(3)
    for _ in range(5):
        h = sample_error_history(EffectiveRates(0.06, 0.06), sec, 7, rng)
        ev = detection_events(measure(h, sec), sec)
        assert len(ev) > 22
        full = mwpm(build_matching_graph(ev, RATES, sec, 7, k_nearest=None))
        pruned_graph = build_matching_graph(ev, RATES, sec, 7, k_nearest=5)
        assert pruned_graph.pruned
        assert mwpm(pruned_graph).weight == pytest.approx(full.weight)


def test_pairing_lines_golden():
    zs, _ = dual_sector(build_network(2, 1))
    dump = ["Z,0,1,2", "Z,1,1,2"]
    ev = read_events(dump, zs)
    g = build_matching_graph(ev, EffectiveRates(0.1, 0.1), zs, 2)
    lines = mwpm(g).as_lines()
    w = math.log(0.9 / 0.1)
    assert lines == [f"0,1,{w:.12g}"]


# -- logical outcome -------------------------------------------------------------------


def test_zero_noise_success_and_silent_logical():
    sec = torus(3)
    h = ErrorHistory.empty(sec, 3)
    g = graph_for(sec, [], 3)
    assert logical_outcome(mwpm(g), g, h) is False
    idx = sec.qubit_index()
    h.data[1, [idx[(r, 0)] for r in range(0, 6, 2)]] = 1
    assert logical_outcome(mwpm(g), g, h) is True


def single_faults(sector, n):
    for t in range(n + 1):
        for q in range(sector.n_qubits):
            h = ErrorHistory.empty(sector, n)
            h.data[t, q] = 1
            yield h
    for t in range(n):
        for s in range(sector.n_stabilizers):
            h = ErrorHistory.empty(sector, n)
            h.meas[t, s] = 1
            yield h


@pytest.mark.parametrize("d", [3, 5])
def test_single_fault_sweep_own_blossom(d):
    for sec in dual_sector(build_torus_block(d)):
        lat = error_lattice(sec, RATES, d)
        for h in single_faults(sec, d):
            ev = detection_events(measure(h, sec), sec)
            g = build_matching_graph(ev, RATES, sec, d, lattice=lat)
            assert not logical_outcome(mwpm(g), g, h)


def test_distance_property_d3_exhaustive():
    sec, d = torus(3), 3
    lat = error_lattice(sec, RATES, d)
    dec = BlossomDecoder(lat)
    hs = list(single_faults(sec, d))
    data = np.array([h.data for h in hs])
    meas = np.array([h.meas for h in hs])
    pred = dec.decode_batch(detector_bits(data, meas, sec))
    assert (pred == observable_bits(data, meas, sec)).all()


def test_distance_property_d5_sampled():
    sec, d = torus(5), 5
    lat = error_lattice(sec, RATES, d)
    rng = np.random.default_rng(0)
    n_data = (d + 1) * sec.n_qubits
    n_loc = n_data + d * sec.n_stabilizers
    data = np.zeros((10_000, d + 1, sec.n_qubits), np.uint8)
    meas = np.zeros((10_000, d, sec.n_stabilizers), np.uint8)
    for k in range(10_000):
        for loc in rng.choice(n_loc, size=2, replace=False):
            if loc < n_data:
                data[k].flat[loc] = 1
            else:
                meas[k].flat[loc - n_data] = 1
    det = detector_bits(data, meas, sec)
    truth = observable_bits(data, meas, sec)
    assert (PyMatchingDecoder(lat).decode_batch(det) == truth).all()
    assert (BlossomDecoder(lat).decode_batch(det[:300]) == truth[:300]).all()


def test_backends_find_equal_weight_corrections():
    sec, d = torus(5), 5
    lat = error_lattice(sec, EffectiveRates(0.03, 0.02), d)
    pm = PyMatchingDecoder(lat)
    rng = np.random.default_rng(8)
    for _ in range(40):
        h = sample_error_history(EffectiveRates(0.03, 0.02), sec, d, rng)
        det = detector_bits(h.data, h.meas, sec)
        edges = pm._matching.decode_to_edges_array(det)
        w_pm = sum(lat.edge_between(int(u), int(v)).weight for u, v in edges)
        ev = lat.layout.to_events(det, sec.name)
        w_own = mwpm(build_matching_graph(ev, RATES, sec, d, lattice=lat)).weight
        assert w_own == pytest.approx(w_pm, abs=1e-9)


@pytest.mark.parametrize("d, margin", [(3, 2), (4, 3)])
def test_single_fault_sweep_full_readout_rectangle(d, margin):
    for sec in dual_sector(build_network(d, margin), full_readout=True):
        lat = error_lattice(sec, RATES, margin)
        hs = list(single_faults(sec, margin))
        data = np.array([h.data for h in hs])
        meas = np.array([h.meas for h in hs])
        det = detector_bits(data, meas, sec)
        assert (BlossomDecoder(lat).decode_batch(det) == observable_bits(data, meas, sec)).all()

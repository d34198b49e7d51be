"""Minimum-weight perfect-matching decoding of detection events.

Every elementary fault of the phenomenological model (a data error in some
layer, or a flipped outcome) toggles at most two detectors, so the faults
form the edges of a space-time *error lattice*. Edges with a single detector
end on a virtual boundary vertex. Each edge also records which logical
observables the fault flips, so a correction chain's logical effect is the
XOR of its edges' flags.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .matching import NoPerfectMatching, min_weight_perfect_matching
from .noise import EffectiveRates, ErrorHistory
from .protocol import DetectionEventSet, DetectorLayout, observable_bits
from .topology import Sector

BOUNDARY = -1
K_NEAREST = 20


def log_likelihood_weight(p: float) -> float:
    """``ln((1-p)/p)`` clamped to a small positive value near p = 1/2."""
    p = min(max(p, 1e-12), 0.5 - 1e-9)
    return math.log((1.0 - p) / p)


@dataclass(frozen=True)
class LatticeEdge:
    u: int
    v: int  # BOUNDARY for single-detector faults
    weight: float
    obs: int  # bitmask of flipped observables
    fault: tuple  # ("data", layer, qubit) or ("meas", round, stabilizer)


@dataclass
class ErrorLattice:
    sector: Sector
    n_rounds: int
    layout: DetectorLayout
    edges: list[LatticeEdge]
    # faults that trigger no detector but flip an observable
    undetectable: list[tuple]
    lookup: dict[tuple[int, int], int] = field(repr=False)

    @property
    def has_boundary(self) -> bool:
        return any(e.v == BOUNDARY for e in self.edges)

    def edge_between(self, a: int, b: int) -> LatticeEdge:
        key = (min(a, b), max(a, b)) if BOUNDARY not in (a, b) else (max(a, b), BOUNDARY)
        return self.edges[self.lookup[key]]

    def adjacency(self, with_boundary: bool) -> csr_matrix:
        n = self.layout.size + (1 if with_boundary else 0)
        rows, cols, vals = [], [], []
        for e in self.edges:
            if e.v == BOUNDARY:
                if not with_boundary:
                    continue
                v = n - 1
            else:
                v = e.v
            rows += [e.u, v]
            cols += [v, e.u]
            vals += [e.weight, e.weight]
        return csr_matrix((vals, (rows, cols)), shape=(n, n))


def _obs_mask(column: np.ndarray) -> int:
    return int(sum(1 << i for i, bit in enumerate(column) if bit))


def error_lattice(sector: Sector, rates: EffectiveRates, n_rounds: int) -> ErrorLattice:
    """Space-time lattice with weights ``ln((1-p)/p)`` from ``eps_E`` and ``eps_S``.

    Correlated pairs are not represented; parallel faults between the same
    detectors keep the lighter edge (first one on ties).
    """
    layout = DetectorLayout.of(sector, n_rounds)
    w_E = log_likelihood_weight(rates.eps_E)
    w_S = log_likelihood_weight(rates.eps_S)
    start = layout.first_round
    stabs_of = [np.flatnonzero(sector.check[:, q]) for q in range(sector.n_qubits)]
    candidates: list[tuple[list[int], float, int, tuple]] = []

    for t in range(n_rounds):
        for q in range(sector.n_qubits):
            dets = [layout.index(t, int(s)) for s in stabs_of[q]]
            obs = _obs_mask(sector.witness[:, q]) if t >= start else 0
            candidates.append(([d for d in dets if d is not None], w_E, obs, ("data", t, q)))
    for q in range(sector.n_qubits):
        dets = [layout.index(n_rounds, int(s)) for s in stabs_of[q]]
        candidates.append(([d for d in dets if d is not None], w_E,
                           _obs_mask(sector.final_witness[:, q]), ("data", n_rounds, q)))
    for t in range(n_rounds):
        for s in range(sector.n_stabilizers):
            dets = [layout.index(t, s), layout.index(t + 1, s)]
            obs = _obs_mask(sector.meas_witness[:, s]) if t == n_rounds - 1 else 0
            candidates.append(([d for d in dets if d is not None], w_S, obs, ("meas", t, s)))

    edges: list[LatticeEdge] = []
    lookup: dict[tuple[int, int], int] = {}
    undetectable = []
    for dets, w, obs, fault in candidates:
        if len(dets) == 0:
            if obs:
                undetectable.append(fault)
            continue
        if len(dets) == 1:
            key = (dets[0], BOUNDARY)
            edge = LatticeEdge(dets[0], BOUNDARY, w, obs, fault)
        else:
            a, b = sorted(dets)
            key = (a, b)
            edge = LatticeEdge(a, b, w, obs, fault)
        if key in lookup:
            if w < edges[lookup[key]].weight:
                edges[lookup[key]] = edge
            continue
        lookup[key] = len(edges)
        edges.append(edge)
    return ErrorLattice(sector, n_rounds, layout, edges, undetectable, lookup)


# -- matching graph over detection events ------------------------------------------


@dataclass
class MatchingGraph:
    """Complete weighted graph over the events of one trial.

    ``dist[i, j]`` is the shortest-path weight between events ``i`` and ``j``
    in the error lattice and ``boundary_dist[i]`` the weight to the nearest
    boundary (``inf`` on closed lattices). ``edges`` holds the candidate
    event-event edges kept after k-nearest pruning.
    """

    lattice: ErrorLattice | None
    nodes: list[int]
    dist: np.ndarray
    boundary_dist: np.ndarray
    edges: list[tuple[int, int, float]]
    pruned: bool
    radius: np.ndarray
    _pred: np.ndarray = field(repr=False)
    _bpred: np.ndarray | None = field(repr=False)

    @classmethod
    def from_weights(cls, weights, boundary=None) -> "MatchingGraph":
        """Abstract graph from a symmetric weight matrix (``inf`` = no edge); no correction paths."""
        w = np.asarray(weights, dtype=float)
        n = len(w)
        bd = np.full(n, np.inf) if boundary is None else np.asarray(boundary, dtype=float)
        edges = [(i, j, float(w[i, j])) for i, j in itertools.combinations(range(n), 2)
                 if np.isfinite(w[i, j])]
        return cls(None, list(range(n)), w, bd, edges, False, np.full(n, np.inf), None, None)

    def __len__(self) -> int:
        return len(self.nodes)

    def correction_path(self, i: int, j: int) -> list[LatticeEdge]:
        """Lattice edges of the shortest path from event ``i`` to event ``j`` or the boundary."""
        lat = self.lattice
        target = self.nodes[i]
        out = []
        if j == BOUNDARY:
            b = lat.layout.size
            cur = target
            while cur != b:
                nxt = int(self._bpred[cur])
                out.append(lat.edge_between(cur, BOUNDARY if nxt == b else nxt))
                cur = nxt
            return out
        cur = self.nodes[j]
        while cur != target:
            nxt = int(self._pred[i, cur])
            out.append(lat.edge_between(cur, nxt))
            cur = nxt
        return out

    def edge_weight(self, i: int, j: int) -> float:
        return float(self.boundary_dist[i] if j == BOUNDARY else self.dist[i, j])


def build_matching_graph(events: DetectionEventSet, rates: EffectiveRates, sector: Sector,
                         n_rounds: int, *, lattice: ErrorLattice | None = None,
                         k_nearest: int | None = K_NEAREST) -> MatchingGraph:
    if lattice is None:
        lattice = error_lattice(sector, rates, n_rounds)
    nodes = [lattice.layout.index(r, s) for r, s in sorted(events.events)]
    if any(d is None for d in nodes):
        raise ValueError("event outside the detector layout")
    n = len(nodes)
    if n:
        dist, pred = dijkstra(lattice.adjacency(False), indices=nodes, return_predecessors=True)
        dist = dist[:, nodes]
    else:
        dist, pred = np.zeros((0, 0)), np.zeros((0, lattice.layout.size), dtype=np.int64)
    bpred = None
    bdist = np.full(n, np.inf)
    if lattice.has_boundary:
        bd, bpred = dijkstra(lattice.adjacency(True), indices=lattice.layout.size,
                             return_predecessors=True)
        bdist = bd[nodes] if n else bdist

    radius = np.full(n, np.inf)
    pruned = False
    if k_nearest is not None and n - 1 > k_nearest:
        pruned = True
        keep = set()
        for i in range(n):
            order = sorted((j for j in range(n) if j != i), key=lambda j: (dist[i, j], j))
            near = order[:k_nearest]
            radius[i] = dist[i, near[-1]]
            keep.update((min(i, j), max(i, j)) for j in near)
        pairs = sorted(keep)
    else:
        pairs = list(itertools.combinations(range(n), 2))
    edges = [(i, j, float(dist[i, j])) for i, j in pairs if np.isfinite(dist[i, j])]
    return MatchingGraph(lattice, nodes, dist, bdist, edges, pruned, radius, pred, bpred)


def _unpruned(graph: MatchingGraph) -> MatchingGraph:
    n = len(graph)
    edges = [(i, j, float(graph.dist[i, j])) for i, j in itertools.combinations(range(n), 2)
             if np.isfinite(graph.dist[i, j])]
    return MatchingGraph(graph.lattice, graph.nodes, graph.dist, graph.boundary_dist, edges,
                         False, np.full(n, np.inf), graph._pred, graph._bpred)


@dataclass(frozen=True)
class Pairing:
    """Disjoint pairs of event indices; ``BOUNDARY`` as partner means matched to the boundary."""

    pairs: tuple[tuple[int, int], ...]
    weight: float

    def as_lines(self) -> list[str]:
        return [f"{i},{j},{w:.12g}" for (i, j), w in zip(self.pairs, self._weights)]

    _weights: tuple[float, ...] = ()


def _pairing(graph: MatchingGraph, pairs: list[tuple[int, int]]) -> Pairing:
    pairs = sorted(pairs)
    weights = tuple(graph.edge_weight(i, j) for i, j in pairs)
    return Pairing(tuple(pairs), float(sum(weights)), weights)


def mwpm(graph: MatchingGraph) -> Pairing:
    """Exact minimum-weight perfect pairing of the events.

    With an open boundary every event gets a private boundary copy and the
    copies are joined by zero-weight edges, so any number of events may end on
    the boundary. If pruning was active and the optimum uses an edge at the
    pruning radius of one of its endpoints, the matching is redone on the
    complete graph.
    """
    n = len(graph)
    if n == 0:
        return Pairing((), 0.0)
    boundary = bool(np.isfinite(graph.boundary_dist).any())
    if not boundary and n % 2:
        raise NoPerfectMatching(f"{n} events and no boundary")
    edges = list(graph.edges)
    size = n
    if boundary:
        size = 2 * n
        for i in range(n):
            if np.isfinite(graph.boundary_dist[i]):
                edges.append((i, n + i, float(graph.boundary_dist[i])))
        edges += [(n + i, n + j, 0.0) for i, j in itertools.combinations(range(n), 2)]
    try:
        mate = min_weight_perfect_matching(size, edges)
    except NoPerfectMatching:
        if graph.pruned:
            return mwpm(_unpruned(graph))
        raise
    pairs = []
    for i in range(n):
        m = mate[i]
        if m >= n:
            pairs.append((i, BOUNDARY))
        elif i < m:
            pairs.append((i, m))
    if graph.pruned:
        for i, j in pairs:
            if j != BOUNDARY and graph.dist[i, j] >= min(graph.radius[i], graph.radius[j]):
                return mwpm(_unpruned(graph))
    return _pairing(graph, pairs)


def brute_force_matching(graph: MatchingGraph, max_nodes: int = 12) -> Pairing:
    """Exhaustive minimum over every perfect pairing (boundary usable any number of times)."""
    n = len(graph)
    if n > max_nodes:
        raise ValueError(f"brute force limited to {max_nodes} events, got {n}")
    boundary = bool(np.isfinite(graph.boundary_dist).any())
    best_w = math.inf
    best: list[tuple[int, int]] | None = None

    def rec(free: tuple[int, ...], acc: float, chosen: list[tuple[int, int]]):
        nonlocal best_w, best
        if acc >= best_w:
            return
        if not free:
            best_w, best = acc, list(chosen)
            return
        i, rest = free[0], free[1:]
        if boundary and np.isfinite(graph.boundary_dist[i]):
            chosen.append((i, BOUNDARY))
            rec(rest, acc + graph.boundary_dist[i], chosen)
            chosen.pop()
        for pos, j in enumerate(rest):
            if np.isfinite(graph.dist[i, j]):
                chosen.append((i, j))
                rec(rest[:pos] + rest[pos + 1:], acc + graph.dist[i, j], chosen)
                chosen.pop()

    rec(tuple(range(n)), 0.0, [])
    if best is None:
        raise NoPerfectMatching("no perfect pairing exists")
    return _pairing(graph, best)


# -- logical outcome ----------------------------------------------------------------


def correction_observables(pairing: Pairing, graph: MatchingGraph) -> np.ndarray:
    n_obs = graph.lattice.sector.n_observables
    mask = 0
    for i, j in pairing.pairs:
        for edge in graph.correction_path(i, j):
            mask ^= edge.obs
    return np.array([(mask >> k) & 1 for k in range(n_obs)], dtype=np.uint8)


def residual_observables(pairing: Pairing, graph: MatchingGraph, history: ErrorHistory) -> np.ndarray:
    sector = graph.lattice.sector
    truth = observable_bits(history.data, history.meas, sector)
    return truth ^ correction_observables(pairing, graph)


def logical_outcome(pairing: Pairing, graph: MatchingGraph, history: ErrorHistory) -> bool:
    """True on a logical flip: true errors plus correction cross a witness an odd number of times."""
    return bool(residual_observables(pairing, graph, history).any())


# -- batch decoders -----------------------------------------------------------------


class BlossomDecoder:
    """Per-shot decoding with the in-house blossom matcher."""

    def __init__(self, lattice: ErrorLattice, k_nearest: int | None = K_NEAREST):
        self.lattice = lattice
        self.k_nearest = k_nearest

    def decode(self, det_bits: np.ndarray) -> np.ndarray:
        lat = self.lattice
        events = lat.layout.to_events(det_bits, lat.sector.name)
        graph = build_matching_graph(events, EffectiveRates(0, 0), lat.sector, lat.n_rounds,
                                     lattice=lat, k_nearest=self.k_nearest)
        return correction_observables(mwpm(graph), graph)

    def decode_batch(self, det_bits: np.ndarray) -> np.ndarray:
        return np.array([self.decode(row) for row in det_bits], dtype=np.uint8).reshape(
            len(det_bits), self.lattice.sector.n_observables)


class PyMatchingDecoder:
    """Batch decoding with PyMatching's exact sparse blossom on the same error lattice."""

    def __init__(self, lattice: ErrorLattice):
        import pymatching

        self.lattice = lattice
        m = pymatching.Matching()
        for e in lattice.edges:
            fids = {k for k in range(lattice.sector.n_observables) if (e.obs >> k) & 1}
            if e.v == BOUNDARY:
                m.add_boundary_edge(e.u, fault_ids=fids, weight=e.weight,
                                    merge_strategy="smallest-weight")
            else:
                m.add_edge(e.u, e.v, fault_ids=fids, weight=e.weight,
                           merge_strategy="smallest-weight")
        if m.num_detectors < lattice.layout.size:
            # isolated detectors cannot fire; register them so shapes line up
            for d in range(m.num_detectors, lattice.layout.size):
                m.add_boundary_edge(d, weight=1e6)
        self._matching = m

    def decode_batch(self, det_bits: np.ndarray) -> np.ndarray:
        n_obs = self.lattice.sector.n_observables
        if det_bits.shape[0] == 0:
            return np.zeros((0, n_obs), dtype=np.uint8)
        pred = self._matching.decode_batch(det_bits.astype(np.uint8))
        pred = np.asarray(pred, dtype=np.uint8).reshape(len(det_bits), -1)
        if pred.shape[1] < n_obs:
            pred = np.concatenate([pred, np.zeros((len(pred), n_obs - pred.shape[1]), np.uint8)], 1)
        return pred[:, :n_obs]


def make_decoder(lattice: ErrorLattice, backend: str = "pymatching"):
    if backend == "pymatching":
        return PyMatchingDecoder(lattice)
    if backend == "blossom":
        return BlossomDecoder(lattice)
    raise ValueError(f"unknown decoder backend {backend!r}")

"""Circuit-level fault counting for one round of entanglement-mediated stabilizer measurements.

Every black (data) node talks to each neighbouring ancilla through a shared
Bell pair ``(l, m)``: ``l`` sits at the ancilla node, ``m`` at the data node.

ZZZZ (blue) ancilla ``a`` in |0>, per neighbour ``d`` in left/up/right/down order::

    CNOT d->m ; measure m in Z (z_i) ; CNOT l->a ; measure l in X (x_i) ; Z^{x_i} on d

and finally ``a`` is measured in Z; the stabilizer value is ``a * prod z_i``.
XXXX (red) ancillas run the Hadamard dual (|+>, CNOT m->d, m in X, CNOT a->l,
l in Z, byproduct X^{z_i}, ``a`` in X). All blue ancillas go first, then all
red ones; within a colour every ancilla handles neighbour k at time step k.

Faults are single Paulis injected at one location and pushed through the rest
of the round in the Pauli frame. The residual is split per sector into
data-qubit errors and stabilizer-outcome flips and classified the way the
phenomenological model groups them.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .noise import EffectiveRates, PhysicalNoise
from .topology import NEIGHBOR_ORDER, NodeCoord, build_torus_block

PAULIS_1 = ("X", "Y", "Z")
PAULIS_2 = tuple(a + b for a, b in itertools.product("IXYZ", repeat=2))[1:]
CLASSES = ("S", "E", "anc+right", "anc+down", "right+down", "other")


def _xz(p: str) -> tuple[int, int]:
    return {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}[p]


class _Round:
    """Gate list of one full round on a torus block, with named fault locations."""

    def __init__(self, distance: int = 4):
        lat = build_torus_block(distance)
        self.lattice = lat
        self.data = {q: i for i, q in enumerate(lat.black_nodes)}
        self.n = len(self.data)
        self.ops: list[tuple] = []
        # location name -> (op position, qubits, kind)
        self.locations: list[tuple[int, tuple[int, ...], str, tuple]] = []
        self.keys: dict[str, list[str]] = {}
        self.blue = [s.site for s in lat.z_stabilizers]
        self.red = [s.site for s in lat.x_stabilizers]

        for site in lat.black_nodes:
            self._loc(("memory", site), (self.data[site],), "memory")
        for color, sites in (("Z", self.blue), ("X", self.red)):
            self._phase(color, sites)

    def _new(self) -> int:
        self.n += 1
        return self.n - 1

    def _loc(self, tag, qubits, kind):
        self.locations.append((len(self.ops), tuple(qubits), kind, tag))

    def _phase(self, color: str, sites):
        anc = {s: self._new() for s in sites}
        pairs = {(s, k): (self._new(), self._new()) for s in sites for k in NEIGHBOR_ORDER}
        for s in sites:
            self.keys[(color, s)] = [f"a{s}"]
            self._loc(("prep", color, s), (anc[s],), "prep")
        for k in NEIGHBOR_ORDER:
            for s in sites:
                d = self.data[self.lattice.neighbors(s)[k]]
                l, m = pairs[(s, k)]
                a = anc[s]
                zk, xk = f"m{s}{k}", f"l{s}{k}"
                self._loc(("bell", color, s, k), (l, m), "bell")
                if color == "Z":
                    self.ops.append(("cnot", d, m))
                    self._loc(("cnot_dm", color, s, k), (d, m), "gate2")
                    self._loc(("meas_m", color, s, k), (m,), "meas")
                    self.ops.append(("mz", m, zk))
                    self.ops.append(("cnot", l, a))
                    self._loc(("cnot_la", color, s, k), (l, a), "gate2")
                    self._loc(("meas_l", color, s, k), (l,), "meas")
                    self.ops.append(("mx", l, xk))
                    self.ops.append(("byz", xk, d))
                    self._loc(("byproduct", color, s, k), (d,), "byproduct")
                    self.keys[(color, s)].append(zk)
                else:
                    self.ops.append(("cnot", m, d))
                    self._loc(("cnot_md", color, s, k), (m, d), "gate2")
                    self._loc(("meas_m", color, s, k), (m,), "meas")
                    self.ops.append(("mx", m, zk))
                    self.ops.append(("cnot", a, l))
                    self._loc(("cnot_al", color, s, k), (a, l), "gate2")
                    self._loc(("meas_l", color, s, k), (l,), "meas")
                    self.ops.append(("mz", l, xk))
                    self.ops.append(("byx", xk, d))
                    self._loc(("byproduct", color, s, k), (d,), "byproduct")
                    self.keys[(color, s)].append(zk)
        for s in sites:
            self._loc(("meas_a", color, s), (anc[s],), "meas")
            self.ops.append(("mz" if color == "Z" else "mx", anc[s], f"a{s}"))

    def propagate(self, start: int, x: dict[int, int], z: dict[int, int]) -> tuple[set, set, set]:
        """Run ops[start:] on a Pauli frame; return (data X set, data Z set, flipped keys)."""
        x = dict(x)
        z = dict(z)
        flipped: set[str] = set()
        for op in self.ops[start:]:
            kind = op[0]
            if kind == "cnot":
                c, t = op[1], op[2]
                if x.get(c):
                    x[t] = x.get(t, 0) ^ 1
                if z.get(t):
                    z[c] = z.get(c, 0) ^ 1
            elif kind == "mz":
                if x.pop(op[1], 0):
                    flipped.add(op[2])
                z.pop(op[1], None)
            elif kind == "mx":
                if z.pop(op[1], 0):
                    flipped.add(op[2])
                x.pop(op[1], None)
            elif kind == "byz":
                if op[1] in flipped:
                    z[op[2]] = z.get(op[2], 0) ^ 1
            elif kind == "byx":
                if op[1] in flipped:
                    x[op[2]] = x.get(op[2], 0) ^ 1
        nd = len(self.data)
        xs = {q for q, v in x.items() if v and q < nd}
        zs = {q for q, v in z.items() if v and q < nd}
        return xs, zs, flipped

    def flips(self, color: str, flipped: set[str]) -> set[NodeCoord]:
        sites = self.blue if color == "Z" else self.red
        return {s for s in sites if sum(k in flipped for k in self.keys[(color, s)]) % 2}


@dataclass
class SectorCounts:
    """First-order class probabilities of one sector, per ancilla or per qubit.

    ``per_stabilizer`` values are summed over all faults and divided by the
    number of stabilizers (so ``anc+right`` is directly comparable with
    ``eps_C``); ``E`` is divided by the number of data qubits.
    """

    classes: dict[str, float] = field(default_factory=lambda: dict.fromkeys(CLASSES, 0.0))

    def rates(self) -> EffectiveRates:
        c = self.classes
        pair = (c["anc+right"] + c["anc+down"] + c["right+down"]) / 3.0
        eps_S = c["S"] + c["anc+right"] + c["anc+down"]
        # two qubits per stabilizer on the torus; pairs touch each qubit twice
        eps_E = c["E"] + (c["anc+right"] + c["anc+down"] + 2 * c["right+down"]) / 2.0
        return EffectiveRates(min(eps_S, 1.0), min(eps_E, 1.0), min(pair, eps_S / 2, eps_E / 2))


def _reduce(errors: set[NodeCoord], stabs, lattice) -> frozenset[NodeCoord]:
    """Lightest representative of ``errors`` modulo single nearby stabilizers."""
    best = frozenset(errors)
    changed = True
    while changed:
        changed = False
        for s in stabs:
            sup = set(lattice.neighbors(s).values())
            if best & sup:
                cand = frozenset(best ^ sup)
                if len(cand) < len(best):
                    best, changed = cand, True
    return best


def _classify(e: frozenset, f: set, sector_sites, lattice, all_sites=()) -> str | None:
    """Split (data errors after the round, outcome flips) into a model class.

    Each data error may alternatively be booked *before* the round, which
    toggles the outcomes of its two stabilizers; the lightest booking wins and
    ties keep the after-round convention. A data pair counts as ``right+down``
    when it is the right and down neighbour of any ancilla (``all_sites``),
    since an ancilla of the other colour spreads its error that way.
    """
    near = {}
    for s in sector_sites:
        for q in lattice.neighbors(s).values():
            near.setdefault(q, []).append(s)
    best = None
    for r in range(len(e) + 1):
        for before in itertools.combinations(sorted(e), r):
            ff = set(f)
            for q in before:
                ff ^= set(near[q])
            w = len(e) + len(ff)
            if best is None or w < best[0]:
                best = (w, ff)
    ff = best[1]
    if not e and not ff:
        return None
    if not e and len(ff) == 1:
        return "S"
    if len(e) == 1 and not ff:
        return "E"
    if len(e) == 1 and len(ff) == 1:
        (q,), (s,) = tuple(e), tuple(ff)
        nb = lattice.neighbors(s)
        return {nb["right"]: "anc+right", nb["down"]: "anc+down"}.get(q, "other")
    if len(e) == 2 and not ff:
        for s in itertools.chain(sector_sites, all_sites):
            nb = lattice.neighbors(s)
            if e == {nb["right"], nb["down"]}:
                return "right+down"
    return "other"


def _fault_paulis(kind: str, noise: PhysicalNoise, byproduct: bool):
    q, p, pm = noise.q, noise.p, noise.p_m
    if kind == "bell":
        return [(P, q / 16) for P in PAULIS_2]
    if kind == "gate2":
        return [(P, p / 15) for P in PAULIS_2]
    if kind in ("prep", "meas"):
        return [(P, p / 3) for P in PAULIS_1]
    if kind == "byproduct":
        return [(P, p / 3) for P in PAULIS_1] if byproduct else []
    if kind == "memory":
        return [(P, pm / 3) for P in PAULIS_1]
    raise ValueError(kind)


@dataclass
class FaultTable:
    noise: PhysicalNoise
    byproduct_faults: bool
    sectors: dict[str, SectorCounts]
    # (sector, class, location kind) -> probability per stabilizer/qubit
    breakdown: dict[tuple[str, str, str], float]

    def rates(self, sector: str = "Z") -> EffectiveRates:
        return self.sectors[sector].rates()


_ROUND_CACHE: dict[int, _Round] = {}


def _round(distance: int) -> _Round:
    if distance not in _ROUND_CACHE:
        _ROUND_CACHE[distance] = _Round(distance)
    return _ROUND_CACHE[distance]


def enumerate_fault_table(noise: PhysicalNoise, *, byproduct_faults: bool = False,
                          distance: int = 4) -> FaultTable:
    """Sum first-order class probabilities over every single-fault location.

    Byproduct Paulis are classically controlled and can live in the Pauli
    frame, so they are noiseless unless ``byproduct_faults`` is set.

    By translation symmetry only the circuit of one blue and one red ancilla
    and the memory slot of one horizontal and one vertical data qubit are
    enumerated; the totals are already per stabilizer (resp. per qubit pair).
    """
    rnd = _round(distance)
    lat = rnd.lattice
    blue0, red0 = rnd.blue[0], rnd.red[0]
    inv = {i: q for q, i in rnd.data.items()}
    # one horizontal and one vertical data qubit, i.e. the two qubits per stabilizer
    data0 = set(lat.neighbors(blue0)[k] for k in ("right", "down"))
    sectors = {"Z": SectorCounts(), "X": SectorCounts()}
    breakdown: dict[tuple[str, str, str], float] = {}
    n_s = 1.0  # enumerated one stabilizer of each colour
    for pos, qubits, kind, tag in rnd.locations:
        if kind == "memory":
            if tag[1] not in data0:
                continue
        elif tag[2] not in (blue0, red0):
            continue
        for pauli, prob in _fault_paulis(kind, noise, byproduct_faults):
            if prob == 0:
                continue
            x, z = {}, {}
            for qb, ch in zip(qubits, pauli):
                bx, bz = _xz(ch)
                if bx:
                    x[qb] = 1
                if bz:
                    z[qb] = 1
            xs, zs, flipped = rnd.propagate(pos, x, z)
            for name, errs, stabs in (("Z", xs, rnd.blue), ("X", zs, rnd.red)):
                other = rnd.red if name == "Z" else rnd.blue
                e = _reduce({inv[i] for i in errs}, other, lat)
                cls = _classify(e, rnd.flips(name, flipped), stabs, lat, rnd.blue + rnd.red)
                if cls is None:
                    continue
                w = prob / n_s
                if cls == "E":
                    # booked per data qubit: two qubits per enumerated stabilizer
                    w /= 2.0
                sectors[name].classes[cls] += w
                key = (name, cls, kind)
                breakdown[key] = breakdown.get(key, 0.0) + w
    return FaultTable(noise, byproduct_faults, sectors, breakdown)


def enumerate_fault_classes(noise: PhysicalNoise, sector: str = "Z", **kw) -> EffectiveRates:
    """First-order (eps_S, eps_E, eps_C) of ``sector`` re-derived from the circuit."""
    return enumerate_fault_table(noise, **kw).rates(sector)


def coefficient_table(*, byproduct_faults: bool = False) -> list[dict]:
    """Per-unit-rate coefficients of each noise source against the closed forms."""
    closed = {
        "q": {"eps_S": 2.0, "eps_E": 1.0, "eps_C": 0.0},
        "p": {"eps_S": 124 / 15, "eps_E": 76 / 15, "eps_C": 8 / 15},
        "p_m": {"eps_S": 0.0, "eps_E": 2 / 3, "eps_C": 0.0},
    }
    rows = []
    for source in ("q", "p", "p_m"):
        table = enumerate_fault_table(PhysicalNoise(**{source: 1e-3}), byproduct_faults=byproduct_faults)
        for sector in ("Z", "X"):
            counts = table.sectors[sector].classes
            r = table.rates(sector)
            derived = {"eps_S": r.eps_S, "eps_E": r.eps_E, "eps_C": r.eps_C}
            for name in ("eps_S", "eps_E", "eps_C"):
                rows.append({"source": source, "sector": sector, "quantity": name,
                             "closed_form": closed[source][name],
                             "derived": derived[name] / 1e-3})
            for cls in CLASSES:
                rows.append({"source": source, "sector": sector, "quantity": f"class:{cls}",
                             "closed_form": None, "derived": counts[cls] / 1e-3})
    return rows

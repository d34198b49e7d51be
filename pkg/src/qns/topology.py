"""Lattice geometry for the network section used to entangle Alice and Bob.

Nodes live on a square grid indexed row-major from the top-left corner.
A node at ``(row, col)`` is

* black (data / processing qubit) when ``row + col`` is even,
* blue (ZZZZ ancilla) when ``row`` is odd and ``col`` is even,
* red (XXXX ancilla) when ``row`` is even and ``col`` is odd.

With odd width and height the vertical sides carry black and blue nodes and
the horizontal sides carry black and red nodes.

Distances along the lattice are measured in *lattice units*: one unit is two
node hops, i.e. one data qubit along a straight error chain.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np


class NodeCoord(NamedTuple):
    row: int
    col: int


class NodeColor(enum.Enum):
    BLACK = "K"
    BLUE = "B"
    RED = "R"


class Measure(enum.Enum):
    Z = "Z"
    X = "X"
    KEEP = "K"


def node_color(coord: NodeCoord) -> NodeColor:
    r, c = coord
    if (r + c) % 2 == 0:
        return NodeColor.BLACK
    return NodeColor.BLUE if r % 2 == 1 else NodeColor.RED


class Stabilizer(NamedTuple):
    site: NodeCoord
    support: tuple[NodeCoord, ...]


# interaction order of an ancilla with its black neighbours
NEIGHBOR_ORDER = ("left", "up", "right", "down")
_OFFSETS = {"left": (0, -1), "up": (-1, 0), "right": (0, 1), "down": (1, 0)}


@dataclass(frozen=True)
class Network:
    """Rectangular section of the network between Alice and Bob."""

    width: int
    height: int
    margin: int
    alice: NodeCoord
    bob: NodeCoord
    z_stabilizers: tuple[Stabilizer, ...]
    x_stabilizers: tuple[Stabilizer, ...]
    z_logical_path: tuple[NodeCoord, ...]
    x_boundary_A: tuple[NodeCoord, ...]
    x_boundary_B: tuple[NodeCoord, ...]
    measurement_pattern: dict[NodeCoord, Measure] = field(hash=False, compare=False)

    periodic = False

    @property
    def black_nodes(self) -> tuple[NodeCoord, ...]:
        return _black_nodes(self.height, self.width)

    def neighbors(self, site: NodeCoord) -> dict[str, NodeCoord]:
        """In-bounds neighbours of ``site`` keyed by direction."""
        out = {}
        for name in NEIGHBOR_ORDER:
            dr, dc = _OFFSETS[name]
            r, c = site.row + dr, site.col + dc
            if 0 <= r < self.height and 0 <= c < self.width:
                out[name] = NodeCoord(r, c)
        return out

    def render(self, layer: str = "color") -> str:
        return render_grid(self, layer)


@dataclass(frozen=True)
class TorusBlock:
    """``distance x distance`` periodic toric lattice (``2d x 2d`` nodes)."""

    distance: int
    z_stabilizers: tuple[Stabilizer, ...]
    x_stabilizers: tuple[Stabilizer, ...]
    # two non-contractible cycles per sector, used as failure witnesses
    z_logicals: tuple[tuple[NodeCoord, ...], ...]
    x_logicals: tuple[tuple[NodeCoord, ...], ...]

    periodic = True

    @property
    def width(self) -> int:
        return 2 * self.distance

    @property
    def height(self) -> int:
        return 2 * self.distance

    @property
    def black_nodes(self) -> tuple[NodeCoord, ...]:
        return _black_nodes(self.height, self.width)

    def neighbors(self, site: NodeCoord) -> dict[str, NodeCoord]:
        n = self.width
        return {
            name: NodeCoord((site.row + dr) % n, (site.col + dc) % n)
            for name, (dr, dc) in ((k, _OFFSETS[k]) for k in NEIGHBOR_ORDER)
        }

    def render(self, layer: str = "color") -> str:
        return render_grid(self, layer)


def _black_nodes(height: int, width: int) -> tuple[NodeCoord, ...]:
    return tuple(
        NodeCoord(r, c) for r in range(height) for c in range(width) if (r + c) % 2 == 0
    )


def _stabilizers(lattice, color: NodeColor) -> tuple[Stabilizer, ...]:
    out = []
    for r in range(lattice.height):
        for c in range(lattice.width):
            site = NodeCoord(r, c)
            if node_color(site) is color:
                support = tuple(sorted(set(lattice.neighbors(site).values())))
                out.append(Stabilizer(site, support))
    return tuple(out)


def _staircase(start: NodeCoord, target_row: int) -> list[NodeCoord]:
    """Diagonal run of black nodes from ``start`` until ``target_row`` is reached.

    Consecutive nodes share a red neighbour, so the run is a valid Z-string.
    """
    out = [start]
    r, c = start
    step = 1 if target_row > r else -1
    while r != target_row:
        r += step
        c += 1
        out.append(NodeCoord(r, c))
    return out


def build_network(
    alice_bob_distance: int,
    margin: int,
    alice_offset: int = 0,
    bob_offset: int = 0,
) -> Network:
    """Build the Alice-Bob rectangle.

    ``alice_bob_distance`` is the number of red nodes crossed by a straight
    path from Alice to Bob, ``margin`` the minimum lattice distance from the
    Alice-Bob path to the horizontal sides. The offsets shift Alice and Bob
    vertically (lattice units) away from the midline; the path then climbs to
    the midline along a diagonal staircase next to each endpoint.
    """
    if alice_bob_distance < 1 or margin < 1:
        raise ValueError("alice_bob_distance and margin must be positive")
    width = 2 * alice_bob_distance + 1
    lo = min(alice_offset, bob_offset, 0)
    hi = max(alice_offset, bob_offset, 0)
    height = 4 * margin + 2 * (hi - lo) + 1
    mid_row = 2 * (margin - lo)
    row_a = mid_row + 2 * alice_offset
    row_b = mid_row + 2 * bob_offset
    if abs(row_a - mid_row) + abs(row_b - mid_row) > width - 1:
        raise ValueError("offsets too large for the Alice-Bob distance")
    alice = NodeCoord(row_a, 0)
    bob = NodeCoord(row_b, width - 1)

    head = _staircase(alice, mid_row)
    # mirror the Bob-side staircase so it also runs left to right
    tail_rev = _staircase(NodeCoord(row_b, 0), mid_row)
    tail = [NodeCoord(r, width - 1 - c) for r, c in reversed(tail_rev)]
    middle = [
        NodeCoord(mid_row, c) for c in range(head[-1].col + 2, tail[0].col - 1, 2)
    ]
    # head and tail meet on the midline when there is no flat section
    dedup: list[NodeCoord] = []
    for node in head + middle + tail:
        if not dedup or dedup[-1] != node:
            dedup.append(node)
    path = dedup

    pattern: dict[NodeCoord, Measure] = {}
    path_set = set(path)
    path_arr = np.array(path)
    for node in _black_nodes(height, width):
        if node in (alice, bob):
            pattern[node] = Measure.KEEP
        elif node.col in (0, width - 1):
            pattern[node] = Measure.X
        elif node in path_set:
            pattern[node] = Measure.Z
        else:
            linf = np.max(np.abs(path_arr - np.array(node)), axis=1).min()
            pattern[node] = Measure.Z if linf <= 2 * margin else Measure.X

    proto = Network(
        width=width,
        height=height,
        margin=margin,
        alice=alice,
        bob=bob,
        z_stabilizers=(),
        x_stabilizers=(),
        z_logical_path=tuple(path),
        x_boundary_A=tuple(NodeCoord(r, 0) for r in range(0, height, 2)),
        x_boundary_B=tuple(NodeCoord(r, width - 1) for r in range(0, height, 2)),
        measurement_pattern=pattern,
    )
    return Network(
        **{
            **proto.__dict__,
            "z_stabilizers": _stabilizers(proto, NodeColor.BLUE),
            "x_stabilizers": _stabilizers(proto, NodeColor.RED),
        }
    )


def build_torus_block(distance: int) -> TorusBlock:
    if distance < 2:
        raise ValueError("torus distance must be at least 2")
    n = 2 * distance
    proto = TorusBlock(distance, (), (), (), ())
    return TorusBlock(
        distance=distance,
        z_stabilizers=_stabilizers(proto, NodeColor.BLUE),
        x_stabilizers=_stabilizers(proto, NodeColor.RED),
        z_logicals=(
            tuple(NodeCoord(0, c) for c in range(0, n, 2)),
            tuple(NodeCoord(r, 1) for r in range(1, n, 2)),
        ),
        x_logicals=(
            tuple(NodeCoord(r, 0) for r in range(0, n, 2)),
            tuple(NodeCoord(1, c) for c in range(1, n, 2)),
        ),
    )


def path_margin(network: Network) -> int:
    """Minimum lattice distance from the Alice-Bob path to the horizontal sides."""
    return min(min(r, network.height - 1 - r) // 2 for r, _ in network.z_logical_path)


def render_grid(lattice, layer: str = "color") -> str:
    """Plain-text picture of the lattice, one character per node.

    ``layer="color"`` prints K/B/R per node, ``layer="pattern"`` prints the
    final measurement basis Z/X of black nodes and ``.`` elsewhere. Alice and
    Bob show as ``A`` and ``b`` on both layers.
    """
    if layer not in ("color", "pattern"):
        raise ValueError(f"unknown layer {layer!r}")
    special = {}
    if isinstance(lattice, Network):
        special = {lattice.alice: "A", lattice.bob: "b"}
    pattern = getattr(lattice, "measurement_pattern", {})
    lines = []
    for r in range(lattice.height):
        row = []
        for c in range(lattice.width):
            node = NodeCoord(r, c)
            if node in special:
                row.append(special[node])
            elif layer == "color":
                row.append(node_color(node).value)
            elif node_color(node) is NodeColor.BLACK:
                row.append(pattern[node].value if node in pattern else "Z")
            else:
                row.append(".")
        lines.append("".join(row))
    return "\n".join(lines) + "\n"


# -- sectors -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Sector:
    """One error-correction sector, decoded independently of the other.

    ``name`` is the stabilizer type: the ``"Z"`` sector checks flip (X)
    errors with ZZZZ stabilizers, the ``"X"`` sector checks phase (Z) errors
    with XXXX stabilizers.

    The three witness arrays define when the logical outcome flips:
    ``witness`` for data errors between rounds, ``final_witness`` for data
    errors after the last round and ``meas_witness`` for outcome errors in the
    last round. Each has one row per logical observable.
    """

    name: str
    qubits: tuple[NodeCoord, ...]
    stabilizers: tuple[Stabilizer, ...]
    boundary: tuple[str, ...]
    witness_paths: tuple[tuple[NodeCoord, ...], ...]
    check: np.ndarray
    witness: np.ndarray
    final_witness: np.ndarray
    meas_witness: np.ndarray
    readout: np.ndarray
    final_detectors: np.ndarray
    random_reference: bool
    periodic: bool
    # per stabilizer: data-qubit index of its right / down neighbour, or -1
    right: np.ndarray
    down: np.ndarray

    @property
    def n_qubits(self) -> int:
        return len(self.qubits)

    @property
    def n_stabilizers(self) -> int:
        return len(self.stabilizers)

    @property
    def n_observables(self) -> int:
        return self.witness.shape[0]

    def qubit_index(self) -> dict[NodeCoord, int]:
        return {q: i for i, q in enumerate(self.qubits)}

    @property
    def witness_path(self) -> tuple[NodeCoord, ...]:
        return self.witness_paths[0]


def _mask(items: Iterable[NodeCoord], index: dict[NodeCoord, int], size: int) -> np.ndarray:
    out = np.zeros(size, dtype=np.uint8)
    for item in items:
        out[index[item]] = 1
    return out


def _boundary_class(lattice, stab: Stabilizer) -> str:
    if lattice.periodic or len(stab.support) == 4:
        return "bulk"
    r, c = stab.site
    if r == 0:
        return "top"
    if r == lattice.height - 1:
        return "bottom"
    if c == 0:
        return "left"
    return "right"


def _sector(lattice, name: str, *, witness_paths, data_witness_paths, final_witness_paths,
            meas_witness, readout_nodes, random_reference) -> Sector:
    qubits = lattice.black_nodes
    index = {q: i for i, q in enumerate(qubits)}
    stabs = lattice.z_stabilizers if name == "Z" else lattice.x_stabilizers
    check = np.zeros((len(stabs), len(qubits)), dtype=np.uint8)
    for s, stab in enumerate(stabs):
        for q in stab.support:
            check[s, index[q]] = 1
    readout = _mask(readout_nodes, index, len(qubits)).astype(bool)
    final_det = np.array(
        [all(readout[index[q]] for q in stab.support) for stab in stabs], dtype=bool
    )
    right = np.full(len(stabs), -1, dtype=np.int64)
    down = np.full(len(stabs), -1, dtype=np.int64)
    for s, stab in enumerate(stabs):
        nb = lattice.neighbors(stab.site)
        if "right" in nb:
            right[s] = index[nb["right"]]
        if "down" in nb:
            down[s] = index[nb["down"]]
    witness = np.array([_mask(p, index, len(qubits)) for p in data_witness_paths])
    final_witness = np.array([_mask(p, index, len(qubits)) for p in final_witness_paths])
    return Sector(
        name=name,
        qubits=qubits,
        stabilizers=stabs,
        boundary=tuple(_boundary_class(lattice, s) for s in stabs),
        witness_paths=tuple(tuple(p) for p in witness_paths),
        check=check,
        witness=witness,
        final_witness=final_witness,
        meas_witness=np.asarray(meas_witness, dtype=np.uint8).reshape(len(witness_paths), len(stabs)),
        readout=readout,
        final_detectors=final_det,
        random_reference=random_reference,
        periodic=lattice.periodic,
        right=right,
        down=down,
    )


def dual_sector(lattice, *, full_readout: bool = False,
                both_cycles: bool = False) -> tuple[Sector, Sector]:
    """Split a lattice into its (Z sector, X sector) pair.

    For the Alice-Bob rectangle the Z sector fails when flip errors cross the
    Alice-Bob path an odd number of times; the X sector fails on an odd number
    of wrong last-round XXXX outcomes plus post-readout phase errors on the
    two vertical sides. ``full_readout=True`` reads every black qubit of the
    rectangle (Alice and Bob included) in each sector's basis, which removes
    the short error chains around Alice and Bob and leaves only long chains.

    On the torus both sectors use a deterministic first-round reference and a
    complete final readout, i.e. two independent memory experiments. Each
    sector watches its first logical cycle, or both with ``both_cycles``.
    """
    if isinstance(lattice, TorusBlock):
        everything = lattice.black_nodes
        out = []
        for name, cycles, stabs in (("Z", lattice.z_logicals, lattice.z_stabilizers),
                                    ("X", lattice.x_logicals, lattice.x_stabilizers)):
            cycles = cycles if both_cycles else cycles[:1]
            out.append(_sector(lattice, name, witness_paths=cycles, data_witness_paths=cycles,
                               final_witness_paths=cycles,
                               meas_witness=np.zeros((len(cycles), len(stabs))),
                               readout_nodes=everything, random_reference=False))
        return out[0], out[1]

    pattern = lattice.measurement_pattern
    if full_readout:
        z_read = x_read = lattice.black_nodes
    else:
        z_read = [q for q, m in pattern.items() if m is Measure.Z]
        x_read = [q for q, m in pattern.items() if m is Measure.X]
    sides = lattice.x_boundary_A + lattice.x_boundary_B
    zs = _sector(lattice, "Z", witness_paths=(lattice.z_logical_path,),
                 data_witness_paths=(lattice.z_logical_path,),
                 final_witness_paths=(lattice.z_logical_path,),
                 meas_witness=np.zeros((1, len(lattice.z_stabilizers))),
                 readout_nodes=z_read, random_reference=False)
    xs = _sector(lattice, "X", witness_paths=(sides,), data_witness_paths=((),),
                 final_witness_paths=(sides,),
                 meas_witness=np.ones((1, len(lattice.x_stabilizers))),
                 readout_nodes=x_read, random_reference=True)
    return zs, xs

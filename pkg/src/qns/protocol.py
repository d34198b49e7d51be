"""Pauli-frame execution of the repeated stabilizer rounds and syndrome extraction.

All noise is Pauli, so tracking the error frame relative to the noiseless run
is exact: an outcome bit of 1 means "differs from the noiseless outcome".
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, TextIO

import numpy as np

from .noise import EffectiveRates, ErrorHistory, sample_error_history
from .topology import Sector


@dataclass
class SyndromeHistory:
    """Measured stabilizer outcomes (+1/-1) per round and final readout values.

    ``final_data`` is +1/-1 on qubits read out in this sector's basis and 0
    on qubits that are measured in the other basis or kept.
    """

    outcomes: np.ndarray
    final_data: np.ndarray

    @property
    def n_rounds(self) -> int:
        return self.outcomes.shape[0]


@dataclass(frozen=True)
class DetectionEventSet:
    sector: str
    events: frozenset[tuple[int, int]]

    def __len__(self) -> int:
        return len(self.events)

    def sorted(self) -> list[tuple[int, int]]:
        return sorted(self.events)


def _pm(bits: np.ndarray) -> np.ndarray:
    return (1 - 2 * bits.astype(np.int8)).astype(np.int8)


def syndrome_bits(history: ErrorHistory, sector: Sector) -> tuple[np.ndarray, np.ndarray]:
    """Outcome-flip bits ``(n_rounds, n_s)`` and accumulated readout errors ``(n_q,)``."""
    n = history.n_rounds
    frame = np.cumsum(history.data[:n], axis=0) % 2
    if sector.random_reference:
        # errors before the first projection are absorbed into the code state
        frame = (frame + history.data[0]) % 2
    flips = (frame.astype(np.int64) @ sector.check.T.astype(np.int64)) % 2
    flips ^= history.meas
    final = (frame[-1] + history.data[n]) % 2
    return flips.astype(np.uint8), final.astype(np.uint8)


def run_protocol(sector: Sector, rates: EffectiveRates, n_rounds: int,
                 rng: np.random.Generator) -> tuple[SyndromeHistory, ErrorHistory]:
    """Sample errors, then run ``n_rounds`` noisy rounds and the final readout."""
    history = sample_error_history(rates, sector, n_rounds, rng)
    return measure(history, sector), history


def measure(history: ErrorHistory, sector: Sector) -> SyndromeHistory:
    """Stabilizer outcomes and final readout produced by a fixed error history."""
    flips, final = syndrome_bits(history, sector)
    final_data = np.where(sector.readout, _pm(final), 0).astype(np.int8)
    return SyndromeHistory(outcomes=_pm(flips), final_data=final_data)


def detection_events(history: SyndromeHistory, sector: Sector) -> DetectionEventSet:
    """Space-time events: changes between consecutive rounds plus a final layer.

    Round 0 is compared with the +1 reference unless the sector's first
    outcomes are random, in which case round 0 defines the reference. The
    final layer (index ``n_rounds``) compares each stabilizer whose support is
    fully read out against the product of those readouts.
    """
    out = history.outcomes
    n = history.n_rounds
    events: set[tuple[int, int]] = set()
    prev = out[0] if sector.random_reference else np.ones(out.shape[1], dtype=out.dtype)
    for r in range(n):
        for s in np.flatnonzero(out[r] != prev):
            events.add((r, int(s)))
        prev = out[r]
    for s in np.flatnonzero(sector.final_detectors):
        support = sector.check[s].astype(bool)
        product = int(np.prod(history.final_data[support]))
        if product != out[n - 1, s]:
            events.add((n, int(s)))
    return DetectionEventSet(sector.name, frozenset(events))


# -- vectorised detector layout ------------------------------------------------


@dataclass(frozen=True)
class DetectorLayout:
    """Flat indexing of the space-time detectors of one sector."""

    n_rounds: int
    first_round: int
    n_stabilizers: int
    final_stabs: np.ndarray

    @classmethod
    def of(cls, sector: Sector, n_rounds: int) -> "DetectorLayout":
        return cls(
            n_rounds=n_rounds,
            first_round=1 if sector.random_reference else 0,
            n_stabilizers=sector.n_stabilizers,
            final_stabs=np.flatnonzero(sector.final_detectors),
        )

    @property
    def n_bulk(self) -> int:
        return (self.n_rounds - self.first_round) * self.n_stabilizers

    @property
    def size(self) -> int:
        return self.n_bulk + len(self.final_stabs)

    def index(self, round_: int, stab: int) -> int | None:
        """Flat detector index of ``(round, stab)`` or None if it does not exist."""
        if self.first_round <= round_ < self.n_rounds:
            return (round_ - self.first_round) * self.n_stabilizers + stab
        if round_ == self.n_rounds:
            pos = np.searchsorted(self.final_stabs, stab)
            if pos < len(self.final_stabs) and self.final_stabs[pos] == stab:
                return self.n_bulk + int(pos)
        return None

    def coords(self, flat: int) -> tuple[int, int]:
        if flat < self.n_bulk:
            r, s = divmod(flat, self.n_stabilizers)
            return r + self.first_round, s
        return self.n_rounds, int(self.final_stabs[flat - self.n_bulk])

    def from_events(self, events: DetectionEventSet) -> np.ndarray:
        bits = np.zeros(self.size, dtype=np.uint8)
        for r, s in events.events:
            bits[self.index(r, s)] = 1
        return bits

    def to_events(self, bits: np.ndarray, sector: str) -> DetectionEventSet:
        return DetectionEventSet(sector, frozenset(self.coords(int(i)) for i in np.flatnonzero(bits)))


def _parity(x: np.ndarray) -> np.ndarray:
    return (x.astype(np.int32) & 1).astype(np.uint8)


def detector_bits(data: np.ndarray, meas: np.ndarray, sector: Sector) -> np.ndarray:
    """Detector bits for a batch of histories.

    ``data`` has shape ``(..., n_rounds + 1, n_q)`` and ``meas``
    ``(..., n_rounds, n_s)``; the result ``(..., layout.size)`` follows
    :class:`DetectorLayout` ordering.
    """
    n = meas.shape[-2]
    frame = np.cumsum(data[..., :n, :], axis=-2, dtype=np.int32)
    if sector.random_reference:
        frame += data[..., :1, :]
    frame &= 1
    check_t = sector.check.T.astype(np.float32)
    # float32 products are exact here (small integer sums) and go through BLAS
    flips = _parity(frame.astype(np.float32) @ check_t) ^ meas
    parts = []
    if sector.random_reference:
        parts.append(flips[..., 1:, :] ^ flips[..., :-1, :])
    else:
        parts.append(np.concatenate([flips[..., :1, :], flips[..., 1:, :] ^ flips[..., :-1, :]], axis=-2))
    bulk = parts[0].reshape(parts[0].shape[:-2] + (-1,))
    fs = np.flatnonzero(sector.final_detectors)
    if len(fs):
        readout_frame = (frame[..., -1, :] + data[..., n, :]) & 1
        final_syn = _parity(readout_frame.astype(np.float32) @ check_t[:, fs])
        final = final_syn ^ flips[..., -1, fs]
        return np.concatenate([bulk, final], axis=-1)
    return bulk


def observable_bits(data: np.ndarray, meas: np.ndarray, sector: Sector) -> np.ndarray:
    """Logical-observable flips caused by the true errors, shape ``(..., n_obs)``."""
    n = meas.shape[-2]
    start = 1 if sector.random_reference else 0
    f32 = np.float32
    during = data[..., start:n, :].sum(axis=-2, dtype=np.int32) & 1
    obs = during.astype(f32) @ sector.witness.T.astype(f32)
    obs += data[..., n, :].astype(f32) @ sector.final_witness.T.astype(f32)
    obs += meas[..., n - 1, :].astype(f32) @ sector.meas_witness.T.astype(f32)
    return _parity(obs)


def true_logical_flip(history: ErrorHistory, sector: Sector) -> np.ndarray:
    return observable_bits(history.data, history.meas, sector)


# -- event dump ----------------------------------------------------------------


def write_events(events: DetectionEventSet, sector: Sector, fh: TextIO) -> None:
    """One line per event: ``sector,round,row,col`` (row/col of the ancilla)."""
    for r, s in events.sorted():
        site = sector.stabilizers[s].site
        fh.write(f"{events.sector},{r},{site.row},{site.col}\n")


def read_events(lines: Iterable[str], sector: Sector) -> DetectionEventSet:
    by_site = {stab.site: i for i, stab in enumerate(sector.stabilizers)}
    events = set()
    for line in lines:
        line = line.strip()
        if not line:
            continue
        name, r, row, col = line.split(",")
        if name != sector.name:
            raise ValueError(f"event for sector {name!r} in a {sector.name!r} dump")
        events.add((int(r), by_site[(int(row), int(col))]))
    return DetectionEventSet(sector.name, frozenset(events))

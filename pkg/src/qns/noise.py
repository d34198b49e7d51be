"""Physical noise parameters, effective phenomenological rates and the error sampler."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .topology import Sector


def _check_prob(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name}={value} outside [0, 1]")


@dataclass(frozen=True)
class PhysicalNoise:
    """Werner parameter ``q``, operation error rate ``p``, memory error rate ``p_m``."""

    q: float = 0.0
    p: float = 0.0
    p_m: float = 0.0

    def __post_init__(self):
        for name in ("q", "p", "p_m"):
            _check_prob(name, getattr(self, name))

    @property
    def channel_error_rate(self) -> float:
        """``1 - F`` of the shared Werner pair."""
        return 3.0 * self.q / 4.0

    @property
    def fidelity(self) -> float:
        return 1.0 - self.channel_error_rate

    def to_dict(self) -> dict[str, float]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PhysicalNoise":
        return cls(**{k: float(data[k]) for k in ("q", "p", "p_m") if k in data})


@dataclass(frozen=True)
class EffectiveRates:
    """Per-round phenomenological error probabilities of one sector.

    ``eps_S``: stabilizer outcome flip, ``eps_E``: data-qubit error,
    ``eps_C``: each of the three correlated pairs attached to an ancilla.
    """

    eps_S: float
    eps_E: float
    eps_C: float = 0.0

    def __post_init__(self):
        for name in ("eps_S", "eps_E", "eps_C"):
            _check_prob(name, getattr(self, name))
        # small slack for values produced by floating-point arithmetic
        if self.eps_C > min(self.eps_S, self.eps_E) / 2 + 1e-15:
            raise ValueError("eps_C must not exceed min(eps_S, eps_E) / 2")

    @property
    def ratio(self) -> float:
        return self.eps_S / self.eps_E

    @classmethod
    def from_ratio(cls, eps_E: float, ratio: float) -> "EffectiveRates":
        return cls(eps_S=min(ratio * eps_E, 1.0), eps_E=eps_E)

    def without_correlations(self) -> "EffectiveRates":
        return EffectiveRates(self.eps_S, self.eps_E, 0.0)

    def to_dict(self) -> dict[str, float]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "EffectiveRates":
        return cls(
            eps_S=float(data["eps_S"]),
            eps_E=float(data["eps_E"]),
            eps_C=float(data.get("eps_C", 0.0)),
        )


def channel_only_rates(q: float) -> EffectiveRates:
    """Rates from channel noise alone, to first order in ``q``."""
    if not 0.0 <= q <= 0.5:
        raise ValueError(f"q={q} outside [0, 1/2]")
    return EffectiveRates(eps_S=2.0 * q, eps_E=q, eps_C=0.0)


def full_rates(noise: PhysicalNoise) -> EffectiveRates:
    q, p, pm = noise.q, noise.p, noise.p_m
    eps_S = 2.0 * q + 124.0 * p / 15.0
    eps_E = q + 76.0 * p / 15.0 + 2.0 * pm / 3.0
    eps_C = 8.0 * p / 15.0
    if eps_S > 1.0 or eps_E > 1.0:
        raise ValueError(f"parameters {noise} push an effective rate above 1")
    return EffectiveRates(eps_S=eps_S, eps_E=eps_E, eps_C=eps_C)


# -- sampling ----------------------------------------------------------------


@dataclass
class ErrorHistory:
    """Sampled errors of one sector over ``n_rounds`` rounds.

    ``data[r]`` holds the data errors occurring just before round ``r``;
    ``data[n_rounds]`` the errors after the last round, seen only by the
    final single-qubit readout. ``meas[r]`` flags flipped outcomes of round ``r``.
    """

    data: np.ndarray
    meas: np.ndarray

    @property
    def n_rounds(self) -> int:
        return self.meas.shape[0]

    @classmethod
    def empty(cls, sector: Sector, n_rounds: int) -> "ErrorHistory":
        return cls(
            data=np.zeros((n_rounds + 1, sector.n_qubits), dtype=np.uint8),
            meas=np.zeros((n_rounds, sector.n_stabilizers), dtype=np.uint8),
        )


def round_draws(sector: Sector) -> int:
    """Number of uniforms consumed by one call to :func:`sample_round_errors`."""
    return sector.n_qubits + 4 * sector.n_stabilizers


def _round_from_uniforms(u: np.ndarray, rates: EffectiveRates, sector: Sector):
    """Turn uniforms into one round of error bits; ``u`` may carry a leading batch axis."""
    nq, ns = sector.n_qubits, sector.n_stabilizers
    c = rates.eps_C
    data = (u[..., :nq] < rates.eps_E - 2 * c).astype(np.uint8)
    meas = (u[..., nq:nq + ns] < rates.eps_S - 2 * c).astype(np.uint8)
    if c > 0:
        pairs = u[..., nq + ns:].reshape(u.shape[:-1] + (3, ns)) < c
        right, down = sector.right, sector.down
        has_r, has_d = right >= 0, down >= 0
        # (ancilla, right), (ancilla, down), (right, down)
        meas ^= (pairs[..., 0, :] & has_r).astype(np.uint8)
        meas ^= (pairs[..., 1, :] & has_d).astype(np.uint8)
        for kind, idx, mask in ((0, right, has_r), (2, right, has_r & has_d),
                                (1, down, has_d), (2, down, has_r & has_d)):
            fired = pairs[..., kind, :] & mask
            _xor_scatter(data, idx[mask], fired[..., mask])
    return data, meas


def _xor_scatter(target: np.ndarray, idx: np.ndarray, bits: np.ndarray) -> None:
    # idx has no repeats within one call (one right/down qubit per ancilla)
    target[..., idx] ^= bits.astype(np.uint8)


def sample_round_errors(rates: EffectiveRates, sector: Sector, rng: np.random.Generator):
    """One round of errors: ``(data_bits, meas_bits)``.

    Independent data errors fire with ``eps_E - 2 eps_C``, outcome flips with
    ``eps_S - 2 eps_C``; each ancilla adds its three correlated pairs with
    ``eps_C`` each. Always consumes :func:`round_draws` uniforms.
    """
    u = rng.random(round_draws(sector))
    return _round_from_uniforms(u, rates, sector)


def history_draws(sector: Sector, n_rounds: int) -> int:
    return n_rounds * round_draws(sector) + sector.n_qubits


def history_from_uniforms(u: np.ndarray, rates: EffectiveRates, sector: Sector,
                          n_rounds: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`sample_error_history` on pre-drawn uniforms.

    ``u`` has shape ``(..., history_draws(sector, n_rounds))``; returns
    ``(data, meas)`` with shapes ``(..., n_rounds + 1, n_q)`` and
    ``(..., n_rounds, n_s)``.
    """
    nq = sector.n_qubits
    per_round = round_draws(sector)
    body = u[..., : n_rounds * per_round].reshape(u.shape[:-1] + (n_rounds, per_round))
    data_r, meas = _round_from_uniforms(body, rates, sector)
    last = (u[..., n_rounds * per_round:] < rates.eps_E).astype(np.uint8)
    data = np.concatenate([data_r, last[..., None, :]], axis=-2)
    return data, meas


def sample_error_history(rates: EffectiveRates, sector: Sector, n_rounds: int,
                         rng: np.random.Generator) -> ErrorHistory:
    """Errors for ``n_rounds`` rounds plus the layer before final readout.

    The post-readout layer carries independent data errors with ``eps_E``;
    single-qubit readout errors are folded into it.
    """
    if n_rounds < 1:
        raise ValueError("n_rounds must be at least 1")
    hist = ErrorHistory.empty(sector, n_rounds)
    for r in range(n_rounds):
        hist.data[r], hist.meas[r] = sample_round_errors(rates, sector, rng)
    hist.data[n_rounds] = rng.random(sector.n_qubits) < rates.eps_E
    return hist

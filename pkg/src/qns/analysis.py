"""Monte Carlo estimators, threshold location and fitting, closed-form fidelity and rate models."""
from __future__ import annotations

import csv
import functools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np
from scipy import optimize, stats

from .decoder import error_lattice, make_decoder
from .noise import EffectiveRates, PhysicalNoise, full_rates, history_draws, history_from_uniforms
from .protocol import detector_bits, observable_bits
from .topology import build_network, build_torus_block, dual_sector

# threshold line reported for the ratio-1..3 sweep, eps_t = EPS0 - K * log2(ratio)
EPS0 = 0.0294
K_SLOPE = 0.0072
CHUNK = 256


class NoCrossingError(RuntimeError):
    """Failure-rate curves of successive sizes do not cross inside the scanned bracket."""


class NoSolutionError(ValueError):
    pass


def wilson_interval(failures: int, trials: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if trials <= 0:
        raise ValueError("trials must be positive")
    p = failures / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


# -- trial configuration and runner ---------------------------------------------------


@dataclass(frozen=True)
class SimConfig:
    """Everything that determines a batch of trials (seed included)."""

    geometry: str = "torus"  # "torus" or "rectangle"
    distance: int = 5  # torus distance, or Alice-Bob distance of the rectangle
    margin: int = 0  # rectangle only; 0 means "same as n_rounds"
    eps_S: float = 0.0
    eps_E: float = 0.0
    eps_C: float = 0.0
    n_rounds: int = 0  # 0 means "same as distance" (torus) or margin (rectangle)
    seed: int = 0
    sectors: tuple[str, ...] = ("Z", "X")
    decoder: str = "pymatching"
    full_readout: bool = False

    def __post_init__(self):
        if self.geometry not in ("torus", "rectangle"):
            raise ValueError(f"unknown geometry {self.geometry!r}")
        if self.distance < 1 or self.margin < 0 or self.n_rounds < 0:
            raise ValueError("sizes must be positive")
        if not set(self.sectors) <= {"Z", "X"} or not self.sectors:
            raise ValueError(f"sectors must be drawn from Z, X: {self.sectors}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        EffectiveRates(self.eps_S, self.eps_E, self.eps_C)

    @property
    def rates(self) -> EffectiveRates:
        return EffectiveRates(self.eps_S, self.eps_E, self.eps_C)

    @property
    def rounds(self) -> int:
        if self.n_rounds:
            return self.n_rounds
        return self.distance if self.geometry == "torus" else self.rect_margin

    @property
    def rect_margin(self) -> int:
        return self.margin or self.n_rounds or 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sectors"] = ",".join(self.sectors)
        return d


@dataclass
class TrialBatch:
    config: SimConfig
    n_trials: int
    failures: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        for k, v in self.failures.items():
            if not 0 <= v <= self.n_trials:
                raise ValueError(f"{k}: {v} failures out of {self.n_trials}")

    def rate(self, sector: str = "any") -> float:
        return self.failures[sector] / self.n_trials

    def interval(self, sector: str = "any") -> tuple[float, float]:
        return wilson_interval(self.failures[sector], self.n_trials)


@functools.lru_cache(maxsize=32)
def _sectors(geometry: str, distance: int, margin: int, full_readout: bool):
    if geometry == "torus":
        lat = build_torus_block(distance)
    else:
        lat = build_network(distance, margin)
    zs, xs = dual_sector(lat, full_readout=full_readout)
    return {"Z": zs, "X": xs}


@functools.lru_cache(maxsize=32)
def _decoder(geometry, distance, margin, full_readout, name, rates, n_rounds, backend):
    sector = _sectors(geometry, distance, margin, full_readout)[name]
    return make_decoder(error_lattice(sector, rates, n_rounds), backend)


def trial_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream of trial ``index``: the seed sequence spawned at key ``index``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def _run_chunk(config: SimConfig, start: int, stop: int) -> dict[str, int]:
    geo = (config.geometry, config.distance, config.rect_margin if config.geometry == "rectangle" else 0,
           config.full_readout)
    sectors = _sectors(*geo)
    n = config.rounds
    rates = config.rates
    draws = [history_draws(sectors[s], n) for s in config.sectors]
    u = np.empty((stop - start, sum(draws)))
    for row, i in enumerate(range(start, stop)):
        u[row] = trial_rng(config.seed, i).random(u.shape[1])
    failed_any = np.zeros(stop - start, dtype=bool)
    out = {}
    offset = 0
    for name, nd in zip(config.sectors, draws):
        sector = sectors[name]
        data, meas = history_from_uniforms(u[:, offset:offset + nd], rates, sector, n)
        offset += nd
        det = detector_bits(data, meas, sector)
        truth = observable_bits(data, meas, sector)
        pred = _decoder(*geo, name, rates, n, config.decoder).decode_batch(det)
        failed = (pred != truth).any(axis=1)
        out[name] = int(failed.sum())
        failed_any |= failed
    out["any"] = int(failed_any.sum())
    return out


def _chunk_task(args):
    return _run_chunk(*args)


def estimate_logical_error_rate(config: SimConfig, n_trials: int, workers: int = 1) -> TrialBatch:
    """Failure counts per sector (plus ``any``) over ``n_trials`` independent trials.

    Trial ``i`` always consumes the stream ``trial_rng(seed, i)`` and work is
    cut into fixed chunks, so the counts do not depend on ``workers``.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    tasks = [(config, s, min(s + CHUNK, n_trials)) for s in range(0, n_trials, CHUNK)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk_task, tasks))
    else:
        parts = [_chunk_task(t) for t in tasks]
    totals: dict[str, int] = {}
    for part in parts:
        for k, v in part.items():
            totals[k] = totals.get(k, 0) + v
    return TrialBatch(config, n_trials, totals)


# -- threshold estimation -------------------------------------------------------------


@dataclass
class ThresholdEstimate:
    ratio: float
    eps_t: float
    uncertainty: float
    crossings: list[float]
    rows: list[dict]


def _logit(p):
    return np.log(p) - np.log1p(-p)


def _fit_logit_quadratic(eps: np.ndarray, fails: np.ndarray, trials: np.ndarray) -> np.ndarray:
    # continuity-corrected log-odds, inverse-variance weights
    p = (fails + 0.5) / (trials + 1.0)
    w = trials * p * (1 - p)
    return np.polyfit(eps, _logit(p), 2, w=np.sqrt(w))


def _crossing(eps, curves, trials) -> list[float]:
    lo, hi = float(eps.min()), float(eps.max())
    out = []
    for a, b in zip(curves, curves[1:]):
        diff = np.polysub(_fit_logit_quadratic(eps, b, trials), _fit_logit_quadratic(eps, a, trials))
        roots = [r.real for r in np.roots(diff) if abs(r.imag) < 1e-12 and lo <= r.real <= hi]
        if not roots:
            raise NoCrossingError(f"no crossing of successive sizes inside [{lo:.4g}, {hi:.4g}]")
        centre = 0.5 * (lo + hi)
        out.append(min(roots, key=lambda r: abs(r - centre)))
    return out


def _point_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=key).generate_state(1, np.uint64)[0])


def _sweep(ratio, sizes, grid, trials, seed, stage, workers, decoder) -> tuple[np.ndarray, list[dict]]:
    fails = np.zeros((len(sizes), len(grid)), dtype=np.int64)
    rows = []
    for i, d in enumerate(sizes):
        for j, e in enumerate(grid):
            cfg = SimConfig(geometry="torus", distance=d, eps_E=float(e),
                            eps_S=float(min(ratio * e, 1.0)), n_rounds=d,
                            seed=_point_seed(seed, stage, d, j), sectors=("Z",), decoder=decoder)
            batch = estimate_logical_error_rate(cfg, trials, workers)
            fails[i, j] = batch.failures["Z"]
            lo, hi = batch.interval("Z")
            rows.append({"d": d, "ratio": ratio, "eps_E": float(e), "trials": trials,
                         "failures": int(fails[i, j]), "rate": batch.rate("Z"),
                         "wilson_lo": lo, "wilson_hi": hi})
    return fails, rows


def estimate_threshold(ratio: float, sizes: Sequence[int], trials_per_point: int, *, seed: int = 0,
                       workers: int = 1, coarse: Sequence[float] | None = None, fine_points: int = 7,
                       fine_width: float = 0.15, n_boot: int = 200,
                       decoder: str = "pymatching") -> ThresholdEstimate:
    """Crossing point of failure-rate curves of successive torus sizes at fixed eps_S/eps_E.

    A coarse scan with a tenth of the budget on the smallest and largest size
    brackets the crossing, then every size runs on a fine grid of
    ``fine_points`` values within ``fine_width`` of it. Each curve is fitted
    by a quadratic in log-odds; the crossings of successive sizes are averaged
    and a parametric bootstrap over the binomial counts gives the uncertainty.
    """
    sizes = sorted(sizes)
    if len(sizes) < 2:
        raise ValueError("need at least two sizes")
    if ratio <= 0:
        raise ValueError("ratio must be positive")
    grid = np.asarray(coarse if coarse is not None else np.linspace(0.01, 0.05, 9), dtype=float)
    grid = grid[grid * ratio <= 0.5]
    ends = [sizes[0], sizes[-1]]
    c_trials = max(trials_per_point // 10, 200)
    c_fails, rows = _sweep(ratio, ends, grid, c_trials, seed, 0, workers, decoder)
    gap = _logit((c_fails[1] + 0.5) / (c_trials + 1)) - _logit((c_fails[0] + 0.5) / (c_trials + 1))
    sign_change = np.flatnonzero((gap[:-1] < 0) & (gap[1:] >= 0))
    if len(sign_change) == 0:
        raise NoCrossingError(f"ratio {ratio}: curves of d={ends[0]} and d={ends[1]} do not cross "
                              f"in [{grid[0]:.4g}, {grid[-1]:.4g}]")
    j = sign_change[0]
    x0 = grid[j] - gap[j] * (grid[j + 1] - grid[j]) / (gap[j + 1] - gap[j])

    fine = np.linspace(x0 * (1 - fine_width), x0 * (1 + fine_width), fine_points)
    fails, fine_rows = _sweep(ratio, sizes, fine, trials_per_point, seed, 1, workers, decoder)
    rows += fine_rows
    trials = np.full(fine_points, trials_per_point)
    crossings = _crossing(fine, list(fails), trials)
    eps_t = float(np.mean(crossings))

    rng = np.random.default_rng(_point_seed(seed, 2))
    p_hat = fails / trials_per_point
    boot = []
    for _ in range(n_boot):
        sample = rng.binomial(trials_per_point, p_hat)
        try:
            boot.append(np.mean(_crossing(fine, list(sample), trials)))
        except NoCrossingError:
            continue
    unc = float(np.std(boot, ddof=1)) if len(boot) > 1 else float("nan")
    return ThresholdEstimate(ratio, eps_t, unc, [float(c) for c in crossings], rows)


@dataclass
class ThresholdFit:
    eps0: float
    k: float
    eps0_err: float
    k_err: float
    points: list[tuple[float, float, float]]
    residuals: list[float]

    def predict(self, ratio: float) -> float:
        return self.eps0 - self.k * math.log2(ratio)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def fit_threshold_line(points: Iterable[tuple[float, float, float]]) -> ThresholdFit:
    """Least squares of eps_t against log2(ratio); points are (ratio, eps_t, uncertainty)."""
    points = [tuple(map(float, p)) for p in points]
    if len(points) < 2:
        raise ValueError("need at least two points")
    x = np.log2([p[0] for p in points])
    y = np.array([p[1] for p in points])
    if np.ptp(x) == 0:
        raise ValueError("all ratios are equal; slope undefined")
    A = np.column_stack([np.ones_like(x), -x])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    dof = len(points) - 2
    if dof > 0:
        cov = np.linalg.inv(A.T @ A) * float(resid @ resid) / dof
        err = np.sqrt(np.diag(cov))
    else:
        err = np.zeros(2)
    return ThresholdFit(float(coef[0]), float(coef[1]), float(err[0]), float(err[1]),
                        points, [float(r) for r in resid])


# -- closed forms ---------------------------------------------------------------------


def threshold_line(ratio: float, eps0: float = EPS0, k: float = K_SLOPE) -> float:
    return eps0 - k * math.log2(ratio)


def operational_threshold(p: float, p_m: float = 0.0, *, eps0: float = EPS0, k: float = K_SLOPE,
                          tol: float = 1e-14) -> float:
    """Largest Werner parameter q with eps_E(q) below the threshold line at ratio eps_S/eps_E.

    Correlations are neglected; the threshold line is evaluated at the
    operating point's own ratio, and the fixed point is found by bisection.
    """
    PhysicalNoise(0.0, p, p_m)

    def gap(q: float) -> float:
        r = full_rates(PhysicalNoise(q, p, p_m))
        if r.eps_E == 0:
            return -eps0
        if r.eps_S == 0:
            return -math.inf  # no outcome errors: the line diverges as the ratio goes to 0
        return r.eps_E - threshold_line(r.eps_S / r.eps_E, eps0, k)

    hi = min(0.5, (1 - 124 * p / 15) / 2, 1 - 76 * p / 15 - 2 * p_m / 3)
    if hi <= 0 or gap(0.0) >= 0:
        raise NoSolutionError(f"operation/memory noise alone is above threshold (p={p}, p_m={p_m})")
    if gap(hi) <= 0:
        raise NoSolutionError("no crossing below q = 1/2")
    return float(optimize.brentq(gap, 0.0, hi, xtol=tol))


@dataclass(frozen=True)
class FidelityReport:
    F: float
    eps_X: float
    eps_Y: float
    eps_Z: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def final_state_noise(noise: PhysicalNoise) -> FidelityReport:
    """First-order Pauli channel on Alice's half of the final Bell pair."""
    q, p, pm = noise.q, noise.p, noise.p_m
    ex = q / 2 + 2 * pm / 3 + 44 * p / 15
    ey = 4 * p / 15
    ez = 4 * p / 3
    F = 1.0 - ex - ey - ez
    if F < 0:
        raise ValueError(f"first-order fidelity is negative for {noise}")
    return FidelityReport(F, ex, ey, ez)


def long_chain_error(L: float, N: float, kappa: float) -> float:
    if L <= 0 or N < 0 or kappa < 0:
        raise ValueError("L must be positive, N and kappa non-negative")
    return L * math.exp(-kappa * N)


def entanglement_rate(distance_km: float, attenuation_db_per_km: float, attempt_time_s: float,
                      window_T_s: float, n_rounds: int) -> tuple[float, float]:
    """(probability a link succeeds within the window, ebits per second)."""
    if distance_km < 0 or attenuation_db_per_km < 0:
        raise ValueError("distance and attenuation must be non-negative")
    if attempt_time_s <= 0 or window_T_s <= 0 or n_rounds < 1:
        raise ValueError("times and round count must be positive")
    p_s = 10 ** (-attenuation_db_per_km * distance_km / 10)
    attempts = math.floor(window_T_s / attempt_time_s + 1e-9)
    success = 1.0 - (1.0 - p_s) ** attempts
    return success, 1.0 / (n_rounds * window_T_s)


# -- decay fit ------------------------------------------------------------------------


@dataclass
class DecayFit:
    kappa: float
    amplitude: float
    kappa_err: float
    kappa_lower95: float


def fit_decay(ns: Sequence[float], failures: Sequence[int], trials: Sequence[int]) -> DecayFit:
    """Binomial maximum likelihood of ``P(N) = A exp(-kappa N)``.

    Points with zero failures still constrain the fit. ``kappa_lower95`` is
    the one-sided 95% profile-likelihood bound.
    """
    ns = np.asarray(ns, float)
    k = np.asarray(failures, float)
    n = np.asarray(trials, float)

    def nll(theta):
        loga, kap = theta
        p = np.clip(np.exp(loga - kap * ns), 1e-300, 1 - 1e-12)
        return -float(np.sum(k * np.log(p) + (n - k) * np.log1p(-p)))

    p0 = (k + 0.5) / (n + 1)
    slope, icpt = np.polyfit(ns, np.log(p0), 1)
    res = optimize.minimize(nll, x0=[icpt, -slope], method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-10, "maxiter": 20000})
    loga, kap = res.x
    best = res.fun

    def profile(kv):
        r = optimize.minimize_scalar(lambda a: nll((a, kv)), bounds=(loga - 30, loga + 30),
                                     method="bounded", options={"xatol": 1e-10})
        return r.fun - best

    crit = stats.chi2.ppf(0.90, 1) / 2  # two-sided 90% = one-sided 95%
    try:
        lower = optimize.brentq(lambda kv: profile(kv) - crit, kap - 10, kap)
    except ValueError:
        lower = float("nan")
    h = 1e-4
    curv = (profile(kap + h) + profile(kap - h)) / (h * h)
    err = 1 / math.sqrt(curv) if curv > 0 else float("nan")
    return DecayFit(float(kap), float(math.exp(loga)), float(err), float(lower))


# -- output ---------------------------------------------------------------------------

CSV_FIELDS = ("d", "ratio", "eps_E", "trials", "failures", "rate", "wilson_lo", "wilson_hi")


def batch_row(batch: TrialBatch, sector: str = "any") -> dict:
    cfg = batch.config
    lo, hi = batch.interval(sector)
    ratio = cfg.eps_S / cfg.eps_E if cfg.eps_E else float("nan")
    return {"d": cfg.distance, "ratio": ratio, "eps_E": cfg.eps_E, "trials": batch.n_trials,
            "failures": batch.failures[sector], "rate": batch.rate(sector),
            "wilson_lo": lo, "wilson_hi": hi}


def write_csv(rows: Iterable[dict], fh: TextIO, fields: Sequence[str] = CSV_FIELDS) -> None:
    writer = csv.DictWriter(fh, fieldnames=list(fields), extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})

"""Per-instant response envelope bounds over the admissible uncertainty ball.

A response functional maps ball points to full response histories (one
structural simulation per point, cached so every instant shares it). The
envelope of a method is the per-instant hull of all histories the method
evaluated, so each reported envelope dominates the method's own samples by
construction. Monte Carlo draws ball points at random; the optimized methods
solve the per-instant extremum problems, either independently per instant or
sequentially with the preceding instant's extremal point warm-starting the
next search mean.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .frame import ShearFrame, SimulationError, simulate_batch
from .interval_process import KlBasis, kl_reconstruct_batch, sample_hypersphere
from .lds import generate_des
from .optimizer import DesSource, RandomSource, default_population, make_source, minimize

__all__ = [
    "ResponseFunctional",
    "EnvelopeResult",
    "EnvelopeConfig",
    "InstantResult",
    "mcs_envelope",
    "instant_extremum",
    "des_es_ss",
    "per_instant_envelope",
    "envelope_contains",
    "sample_responses",
]

_QUANTITIES = ("disp", "vel", "acc")


class ResponseFunctional:
    """Response series of one floor/quantity as a function of the ball point.

    Every distinct point triggers exactly one structural simulation over the
    full duration; the resulting series serves all instants. A bounded cache
    of recently evaluated points avoids re-simulating repeats (recomputation
    is deterministic, so caching never changes values).
    """

    def __init__(self, frame: ShearFrame, basis: KlBasis, floor: int,
                 quantity: str, substeps: int = 8, cache: bool = True,
                 cache_limit: int = 20000):
        if quantity not in _QUANTITIES:
            raise ValueError(f"quantity must be one of {_QUANTITIES}")
        if not 1 <= floor <= frame.n_stories:
            raise ValueError(f"floor {floor} out of range for {frame.n_stories} stories")
        self.frame = frame
        self.basis = basis
        self.floor = floor
        self.quantity = quantity
        self.substeps = substeps
        self.cache_enabled = cache
        self._cache: OrderedDict[bytes, np.ndarray] = OrderedDict()
        self._cache_limit = cache_limit
        self.sim_count = 0

    @property
    def grid(self) -> np.ndarray:
        return self.basis.process.grid

    @property
    def dim(self) -> int:
        return self.basis.order

    def _simulate(self, thetas: np.ndarray) -> np.ndarray:
        values = kl_reconstruct_batch(self.basis, thetas)
        try:
            disp, vel, acc, _ = simulate_batch(self.frame, self.grid, values,
                                               self.substeps)
        except SimulationError as exc:
            raise SimulationError(f"{exc}; offending theta batch of shape "
                                  f"{thetas.shape}") from exc
        self.sim_count += thetas.shape[0]
        table = {"disp": disp, "vel": vel, "acc": acc}
        return np.ascontiguousarray(table[self.quantity][:, :, self.floor - 1])

    def evaluate_batch(self, thetas) -> np.ndarray:
        """Series matrix (batch, instants) for rows of ball points."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        if not self.cache_enabled:
            return self._simulate(thetas)
        keys = [row.tobytes() for row in thetas]
        missing = [i for i, key in enumerate(keys) if key not in self._cache]
        if missing:
            fresh = self._simulate(thetas[missing])
            for j, i in enumerate(missing):
                self._cache[keys[i]] = fresh[j]
                if len(self._cache) > self._cache_limit:
                    self._cache.popitem(last=False)
        out = np.empty((thetas.shape[0], self.grid.size))
        for i, key in enumerate(keys):
            if key in self._cache:
                out[i] = self._cache[key]
            else:  # evicted immediately after insertion; recompute alone
                out[i] = self._simulate(thetas[i:i + 1])[0]
        return out

    def evaluate(self, theta) -> np.ndarray:
        return self.evaluate_batch(theta)[0]


@dataclass(frozen=True)
class EnvelopeResult:
    """Per-instant bounds plus the points that attained them."""

    grid: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    arg_lower: np.ndarray
    arg_upper: np.ndarray
    evaluations: int
    method: str

    def __post_init__(self):
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound at some instant")
        if not (np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper))):
            raise ValueError("bounds must be finite")


class _HullTracker:
    """Running per-instant min/max over evaluated points."""

    def __init__(self, n_instants: int, dim: int):
        self.lower = np.full(n_instants, np.inf)
        self.upper = np.full(n_instants, -np.inf)
        self.arg_lower = np.zeros((n_instants, dim))
        self.arg_upper = np.zeros((n_instants, dim))

    def update(self, thetas: np.ndarray, series: np.ndarray) -> None:
        low_idx = np.argmin(series, axis=0)
        high_idx = np.argmax(series, axis=0)
        cols = np.arange(series.shape[1])
        low_vals = series[low_idx, cols]
        high_vals = series[high_idx, cols]
        better_low = low_vals < self.lower
        better_high = high_vals > self.upper
        self.lower[better_low] = low_vals[better_low]
        self.upper[better_high] = high_vals[better_high]
        self.arg_lower[better_low] = thetas[low_idx[better_low]]
        self.arg_upper[better_high] = thetas[high_idx[better_high]]

    def result(self, grid: np.ndarray, evaluations: int, method: str) -> EnvelopeResult:
        return EnvelopeResult(grid=grid, lower=self.lower.copy(),
                              upper=self.upper.copy(),
                              arg_lower=self.arg_lower.copy(),
                              arg_upper=self.arg_upper.copy(),
                              evaluations=evaluations, method=method)


@dataclass(frozen=True)
class EnvelopeConfig:
    """Budget and variant knobs for the optimized envelope methods."""

    variant: str = "des"
    lam: Optional[int] = None
    max_gens: int = 60
    stagnation_window: int = 10
    stagnation_tol: float = 1e-6
    sigma0: float = 0.3
    seed: int = 0


@dataclass(frozen=True)
class InstantResult:
    value: float
    theta: np.ndarray
    converged: bool


def _project_ball(thetas: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(thetas, axis=1, keepdims=True)
    scale = np.where(norms > 1.0, norms, 1.0)
    return thetas / scale


def mcs_envelope(functional: ResponseFunctional, sample_count: int,
                 seed: int, chunk: int = 4096) -> EnvelopeResult:
    """Envelope by Monte Carlo over uniform ball points.

    One simulation per sample; the envelope is monotone in the sample count.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be at least 1")
    thetas = sample_hypersphere(functional.dim, sample_count, seed)
    before = functional.sim_count
    tracker = _HullTracker(functional.grid.size, functional.dim)
    for start in range(0, sample_count, chunk):
        block = thetas[start:start + chunk]
        tracker.update(block, functional.evaluate_batch(block))
    return tracker.result(functional.grid, functional.sim_count - before, "mcs")


def _grid_index(grid: np.ndarray, t: float) -> int:
    idx = int(np.argmin(np.abs(grid - t)))
    if abs(grid[idx] - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"instant {t} is not on the grid")
    return idx


def _optimize_instant(functional, idx, sense, config, source, warm_start, tracker):
    sign = -1.0 if sense == "max" else 1.0

    def objective(batch):
        series = functional.evaluate_batch(batch)
        if tracker is not None:
            tracker.update(np.atleast_2d(batch), series)
        return sign * series[:, idx]

    x0 = np.zeros(functional.dim) if warm_start is None else np.asarray(warm_start)
    result = minimize(
        objective, functional.dim,
        lam=source.lam, max_iters=config.max_gens, seed=config.seed,
        x0=x0, sigma0=config.sigma0, source=source,
        projection=_project_ball,
        stagnation_window=config.stagnation_window,
        stagnation_tol=config.stagnation_tol,
    )
    return InstantResult(value=sign * result.fun, theta=result.x,
                         converged=result.converged)


def instant_extremum(functional: ResponseFunctional, t: float, sense: str,
                     config: Optional[EnvelopeConfig] = None,
                     warm_start=None) -> InstantResult:
    """Extremum of the response at one grid instant over the unit ball.

    Candidates outside the ball are radially projected before evaluation.
    ``warm_start``, when given, seeds the initial search mean; the default
    start is the ball center. A non-converged search still returns its
    best-so-far with ``converged`` False.
    """
    if sense not in ("min", "max"):
        raise ValueError("sense must be 'min' or 'max'")
    config = config or EnvelopeConfig()
    idx = _grid_index(functional.grid, t)
    lam = config.lam or default_population(functional.dim)
    source = make_source(config.variant, functional.dim, lam, seed=config.seed)
    return _optimize_instant(functional, idx, sense, config, source,
                             warm_start, tracker=None)


def _swept_envelope(functional: ResponseFunctional, config: EnvelopeConfig,
                    warm: bool, method: str) -> EnvelopeResult:
    if config.variant not in ("des", "random"):
        raise ValueError("variant must be 'des' or 'random'")
    grid = functional.grid
    lam = config.lam or default_population(functional.dim)
    before = functional.sim_count
    tracker = _HullTracker(grid.size, functional.dim)
    rng = np.random.default_rng(config.seed)
    base = None
    if config.variant == "des":
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            base = generate_des(functional.dim, lam,
                                seed=int(rng.integers(0, 2**63 - 1))).point_set
    for sense in ("min", "max"):
        carry = None
        for idx in range(grid.size):
            if base is not None:
                source = DesSource(base, seed=int(rng.integers(0, 2**63 - 1)))
            else:
                source = RandomSource(functional.dim, lam,
                                      seed=int(rng.integers(0, 2**63 - 1)))
            res = _optimize_instant(functional, idx, sense, config, source,
                                    carry if warm else None, tracker)
            carry = res.theta
    return tracker.result(grid, functional.sim_count - before, method)


def des_es_ss(functional: ResponseFunctional,
              config: Optional[EnvelopeConfig] = None) -> EnvelopeResult:
    """Sequential sweep: each instant warm-starts at the previous extremal point.

    Instants are visited in grid order per sense; the first instant starts
    from the ball center. The reported envelope is the hull over every point
    the sweep evaluated, so it dominates all of the sweep's own samples.
    """
    config = config or EnvelopeConfig()
    return _swept_envelope(functional, config, warm=True, method="des-es-ss")


def per_instant_envelope(functional: ResponseFunctional,
                         config: Optional[EnvelopeConfig] = None) -> EnvelopeResult:
    """Independent cold-start optimization at every instant (baseline)."""
    config = config or EnvelopeConfig(variant="random")
    method = "cmaes" if config.variant == "random" else "des-es"
    return _swept_envelope(functional, config, warm=False, method=method)


def envelope_contains(envelope: EnvelopeResult, histories):
    """Per-instant containment of histories, with a violation report.

    A history is contained at an instant when it lies within the bounds up
    to a tolerance of 1e-9 times the overall response scale. Returns a
    boolean vector over instants and a list of violation records.
    """
    histories = np.atleast_2d(np.asarray(histories, dtype=float))
    n = envelope.grid.size
    if histories.size == 0:
        return np.ones(n, dtype=bool), []
    if histories.shape[1] != n:
        raise ValueError("history grid does not match the envelope grid")
    scale = max(np.max(np.abs(envelope.lower)), np.max(np.abs(envelope.upper)),
                np.max(np.abs(histories)), 1e-300)
    tol = 1e-9 * scale
    below = histories < envelope.lower[None, :] - tol
    above = histories > envelope.upper[None, :] + tol
    ok = ~np.any(below | above, axis=0)
    violations = []
    for k, i in zip(*np.nonzero(below)):
        violations.append({"sample": int(k), "instant": float(envelope.grid[i]),
                           "side": "lower",
                           "excess": float(envelope.lower[i] - histories[k, i])})
    for k, i in zip(*np.nonzero(above)):
        violations.append({"sample": int(k), "instant": float(envelope.grid[i]),
                           "side": "upper",
                           "excess": float(histories[k, i] - envelope.upper[i])})
    return ok, violations


def sample_responses(frame: ShearFrame, grid, samples, floor: int, quantity: str,
                     substeps: int = 8) -> np.ndarray:
    """Response series of each ground-motion sample row (for containment checks)."""
    if quantity not in _QUANTITIES:
        raise ValueError(f"quantity must be one of {_QUANTITIES}")
    disp, vel, acc, _ = simulate_batch(frame, grid, samples, substeps)
    table = {"disp": disp, "vel": vel, "acc": acc}
    return table[quantity][:, :, floor - 1]

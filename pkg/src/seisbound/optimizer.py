"""Covariance matrix adaptation evolution strategy with pluggable offspring variates.

Offspring are affine images of inverse-normal-transformed unit-cube columns:
the plain strategy draws fresh uniform columns every generation, while the
low-discrepancy variant feeds columns of one relaxed point set, re-randomized
each generation by a row permutation. Both variants share identical state
updates (weighted recombination, cumulative step-size adaptation, rank-one
plus rank-mu covariance update with a lazily refreshed eigen cache).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .lds import DesConfig, PointSet, drr, generate_des

__all__ = [
    "EsState",
    "SequenceSource",
    "RandomSource",
    "DesSource",
    "FixedSource",
    "inverse_normal_cdf",
    "es_init",
    "ask",
    "tell",
    "MinimizeResult",
    "minimize",
    "default_population",
]

# clip offspring variates away from {0, 1} before the inverse normal map
_EPS_CLIP = 1e-12

# Acklam's rational approximation coefficients for the inverse normal CDF
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)


def inverse_normal_cdf(u):
    """Inverse standard-normal CDF via Acklam's rational approximation.

    One Halley refinement step brings the absolute error to roughly machine
    precision, comfortably within 1e-9.
    """
    from scipy.special import erfc

    u = np.asarray(u, dtype=float)
    if np.any(u <= 0.0) or np.any(u >= 1.0):
        raise ValueError("inverse normal CDF requires arguments in (0, 1)")
    x = np.empty_like(u)
    p_low = 0.02425
    low = u < p_low
    high = u > 1.0 - p_low
    mid = ~(low | high)
    if np.any(low):
        q = np.sqrt(-2.0 * np.log(u[low]))
        x[low] = ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q
                   + _C[5])
                  / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    if np.any(high):
        q = np.sqrt(-2.0 * np.log(1.0 - u[high]))
        x[high] = -((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q
                     + _C[5])
                    / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    if np.any(mid):
        q = u[mid] - 0.5
        r = q * q
        x[mid] = ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r
                   + _A[5]) * q
                  / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r
                     + 1.0))
    # Halley refinement against the exact CDF
    err = 0.5 * erfc(-x / np.sqrt(2.0)) - u
    dens = np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)
    x = x - err / (dens + 0.5 * x * err)
    return x if x.ndim else float(x)


def default_population(dim: int) -> int:
    """Rule-of-thumb population size 4 + floor(3 ln D)."""
    return 4 + int(np.floor(3.0 * np.log(dim)))


@dataclass(frozen=True)
class EsState:
    """Search state advanced by :func:`ask`/:func:`tell`."""

    dim: int
    mean: np.ndarray
    sigma: float
    cov: np.ndarray
    b_mat: np.ndarray
    d_vec: np.ndarray
    p_sigma: np.ndarray
    p_cov: np.ndarray
    generation: int
    lam: int
    mu: int
    weights: np.ndarray
    mu_eff: float
    c_sigma: float
    d_sigma: float
    c_cov: float
    c_one: float
    c_mu: float
    chi_n: float
    eigen_gap: int
    last_eigen: int = 0


def es_init(dim: int, mean, sigma: float, lam: Optional[int] = None) -> EsState:
    """Fresh strategy state with tutorial-default hyperparameters."""
    if lam is None:
        lam = default_population(dim)
    if lam < 4:
        raise ValueError("population size must be at least 4")
    if sigma <= 0:
        raise ValueError("step size must be positive")
    mean = np.asarray(mean, dtype=float).copy()
    if mean.shape != (dim,):
        raise ValueError("mean must be a vector of length dim")
    mu = lam // 2
    raw = np.log((lam + 1) / 2.0) - np.log(np.arange(1, mu + 1))
    weights = raw / raw.sum()
    mu_eff = 1.0 / np.sum(weights**2)
    c_sigma = (mu_eff + 2.0) / (dim + mu_eff + 5.0)
    d_sigma = 1.0 + 2.0 * max(0.0, np.sqrt((mu_eff - 1.0) / (dim + 1.0)) - 1.0) + c_sigma
    c_cov = (4.0 + mu_eff / dim) / (dim + 4.0 + 2.0 * mu_eff / dim)
    c_one = 2.0 / ((dim + 1.3) ** 2 + mu_eff)
    c_mu = min(1.0 - c_one,
               2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((dim + 2.0) ** 2 + mu_eff))
    chi_n = np.sqrt(dim) * (1.0 - 1.0 / (4.0 * dim) + 1.0 / (21.0 * dim**2))
    eigen_gap = max(1, int(np.floor(1.0 / (10.0 * dim * (c_one + c_mu)))))
    return EsState(
        dim=dim, mean=mean, sigma=float(sigma), cov=np.eye(dim),
        b_mat=np.eye(dim), d_vec=np.ones(dim), p_sigma=np.zeros(dim),
        p_cov=np.zeros(dim), generation=0, lam=lam, mu=mu, weights=weights,
        mu_eff=float(mu_eff), c_sigma=float(c_sigma), d_sigma=float(d_sigma),
        c_cov=float(c_cov), c_one=float(c_one), c_mu=float(c_mu),
        chi_n=float(chi_n), eigen_gap=eigen_gap, last_eigen=0,
    )


class SequenceSource:
    """Supplier of one (dim, lam) column block of unit-cube variates per generation."""

    dim: int
    lam: int

    def next_columns(self) -> np.ndarray:
        raise NotImplementedError


class RandomSource(SequenceSource):
    """Fresh i.i.d. uniform columns every generation."""

    def __init__(self, dim: int, lam: int, seed: int):
        self.dim = dim
        self.lam = lam
        self._rng = np.random.default_rng(seed)

    def next_columns(self) -> np.ndarray:
        return self._rng.uniform(size=(self.dim, self.lam))


class DesSource(SequenceSource):
    """Columns of a relaxed low-discrepancy set, row-permuted each generation.

    The base set serves the first generation unchanged; every later
    generation applies a fresh dimensional random rearranging, so all
    generations share one discrepancy value while remaining randomized.
    """

    def __init__(self, base: PointSet, seed: int):
        self.dim = base.dim
        self.lam = base.count
        self._base = base
        self._rng = np.random.default_rng(seed)
        self._first = True

    @classmethod
    def from_relaxation(cls, dim: int, lam: int, seed: int,
                        config: Optional[DesConfig] = None) -> "DesSource":
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            result = generate_des(dim, lam, config=config, seed=seed)
        return cls(result.point_set, seed=seed + 1)

    def next_columns(self) -> np.ndarray:
        if self._first:
            self._first = False
            return self._base.points.copy()
        return drr(self._base, int(self._rng.integers(0, 2**63 - 1))).points


class FixedSource(SequenceSource):
    """Replays a prescribed sequence of column blocks (for injection tests)."""

    def __init__(self, blocks):
        blocks = [np.asarray(b, dtype=float) for b in blocks]
        self.dim, self.lam = blocks[0].shape
        self._blocks = blocks
        self._idx = 0

    def next_columns(self) -> np.ndarray:
        block = self._blocks[self._idx % len(self._blocks)]
        self._idx += 1
        return block


def ask(state: EsState, source: SequenceSource) -> np.ndarray:
    """Candidate batch m + sigma * B (d o Phi^-1(eps)); rows are candidates."""
    eps = source.next_columns()
    if eps.shape != (state.dim, state.lam):
        raise ValueError(
            f"source supplies {eps.shape} columns, state expects "
            f"({state.dim}, {state.lam})"
        )
    eps = np.clip(eps, _EPS_CLIP, 1.0 - _EPS_CLIP)
    z = inverse_normal_cdf(eps)  # (dim, lam)
    y = state.b_mat @ (state.d_vec[:, None] * z)
    return (state.mean[:, None] + state.sigma * y).T


def tell(state: EsState, candidates: np.ndarray, fitnesses) -> EsState:
    """Advance the state by weighted recombination and covariance adaptation."""
    candidates = np.asarray(candidates, dtype=float)
    fitnesses = np.asarray(fitnesses, dtype=float)
    if candidates.shape != (state.lam, state.dim):
        raise ValueError("candidate batch must have shape (lam, dim)")
    if fitnesses.shape != (state.lam,):
        raise ValueError("one fitness value per candidate is required")
    if np.all(np.isnan(fitnesses)):
        raise ValueError("all fitness values are NaN")
    order = np.argsort(fitnesses, kind="stable")
    selected = candidates[order[: state.mu]]

    mean_new = state.weights @ selected
    y_w = (mean_new - state.mean) / state.sigma
    inv_sqrt = state.b_mat @ ((1.0 / state.d_vec)[:, None] * state.b_mat.T)

    p_sigma = ((1.0 - state.c_sigma) * state.p_sigma
               + np.sqrt(state.c_sigma * (2.0 - state.c_sigma) * state.mu_eff)
               * (inv_sqrt @ y_w))
    sigma_new = state.sigma * np.exp(
        state.c_sigma / state.d_sigma * (np.linalg.norm(p_sigma) / state.chi_n - 1.0)
    )
    gen = state.generation + 1
    h_sig = (np.linalg.norm(p_sigma)
             / np.sqrt(1.0 - (1.0 - state.c_sigma) ** (2.0 * gen))
             < (1.4 + 2.0 / (state.dim + 1.0)) * state.chi_n)
    p_cov = ((1.0 - state.c_cov) * state.p_cov
             + (np.sqrt(state.c_cov * (2.0 - state.c_cov) * state.mu_eff) * y_w
                if h_sig else 0.0))

    ys = (selected - state.mean) / state.sigma
    rank_mu = (ys.T * state.weights) @ ys
    cov_new = ((1.0 - state.c_one - state.c_mu) * state.cov
               + state.c_one * (np.outer(p_cov, p_cov)
                                + (0.0 if h_sig else
                                   state.c_cov * (2.0 - state.c_cov)) * state.cov)
               + state.c_mu * rank_mu)
    cov_new = 0.5 * (cov_new + cov_new.T)

    b_mat, d_vec, last_eigen = state.b_mat, state.d_vec, state.last_eigen
    if gen - state.last_eigen >= state.eigen_gap:
        vals, vecs = np.linalg.eigh(cov_new)
        vals = np.maximum(vals, 1e-30)
        b_mat, d_vec = vecs, np.sqrt(vals)
        last_eigen = gen

    return replace(state, mean=mean_new, sigma=float(sigma_new), cov=cov_new,
                   b_mat=b_mat, d_vec=d_vec, p_sigma=p_sigma, p_cov=p_cov,
                   generation=gen, last_eigen=last_eigen)


@dataclass
class MinimizeResult:
    """Best-ever pair with a per-generation best-so-far history."""

    x: np.ndarray
    fun: float
    history: np.ndarray
    converged: bool
    iterations: int
    evaluations: int


def make_source(variant: str, dim: int, lam: int, seed: int,
                des_config: Optional[DesConfig] = None) -> SequenceSource:
    """Build the offspring variate source for a given variant."""
    if variant == "random":
        return RandomSource(dim, lam, seed)
    if variant == "des":
        return DesSource.from_relaxation(dim, lam, seed, config=des_config)
    raise ValueError(f"unknown variant {variant!r}; use 'random' or 'des'")


def minimize(
    objective: Callable[[np.ndarray], np.ndarray],
    dim: int,
    bounds=None,
    variant: str = "random",
    lam: Optional[int] = None,
    max_iters: int = 200,
    target: Optional[float] = None,
    seed: int = 0,
    x0=None,
    sigma0: Optional[float] = None,
    source: Optional[SequenceSource] = None,
    projection: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    stagnation_window: Optional[int] = None,
    stagnation_tol: float = 1e-6,
    resample_cap: int = 10,
) -> MinimizeResult:
    """Run the strategy on a batch objective (rows in, fitness vector out).

    Out-of-box candidates are resampled with fresh uniform variates up to
    ``resample_cap`` times, then clipped coordinate-wise. ``projection``, when
    given, maps each candidate to the feasible set before evaluation (the
    told candidates stay unprojected, preserving the strategy internals).
    ``converged`` is False only when the iteration budget ran out.
    """
    if lam is None:
        lam = default_population(dim) if source is None else source.lam
    if lam < 4:
        raise ValueError("population size must be at least 4")
    rng = np.random.default_rng(seed)
    if bounds is not None:
        lo = np.broadcast_to(np.asarray(bounds[0], dtype=float), (dim,)).copy()
        hi = np.broadcast_to(np.asarray(bounds[1], dtype=float), (dim,)).copy()
        if np.any(lo >= hi):
            raise ValueError("lower bounds must be below upper bounds")
    else:
        lo = hi = None
    if x0 is None:
        if lo is not None:
            x0 = lo + (hi - lo) * rng.uniform(size=dim)
        else:
            x0 = np.zeros(dim)
    x0 = np.asarray(x0, dtype=float)
    if sigma0 is None:
        sigma0 = 0.3 * float(np.min(hi - lo)) if lo is not None else 0.3

    state = es_init(dim, x0, sigma0, lam=lam)
    if source is None:
        source = make_source(variant, dim, lam, seed=int(rng.integers(0, 2**63 - 1)))
    if source.lam != state.lam or source.dim != state.dim:
        raise ValueError("source dimensions do not match the optimizer state")

    best_x = x0.copy()
    best_f = np.inf
    history = []
    evaluations = 0
    converged = False
    for _ in range(max_iters):
        cand = ask(state, source)
        if lo is not None:
            for _ in range(resample_cap):
                bad = np.any((cand < lo) | (cand > hi), axis=1)
                if not bad.any():
                    break
                eps = rng.uniform(size=(int(bad.sum()), dim))
                z = inverse_normal_cdf(np.clip(eps, _EPS_CLIP, 1 - _EPS_CLIP))
                y = (state.b_mat @ (state.d_vec[:, None] * z.T)).T
                cand[bad] = state.mean + state.sigma * y
            np.clip(cand, lo, hi, out=cand)
        trial = cand if projection is None else projection(cand)
        fit = np.asarray(objective(trial), dtype=float)
        evaluations += lam
        state = tell(state, cand, fit)
        gen_best = int(np.nanargmin(fit))
        if fit[gen_best] < best_f:
            best_f = float(fit[gen_best])
            best_x = trial[gen_best].copy()
        history.append(best_f)
        if target is not None and best_f <= target:
            converged = True
            break
        if (stagnation_window is not None and len(history) > stagnation_window):
            prev = history[-1 - stagnation_window]
            if prev - best_f <= stagnation_tol * max(abs(prev), 1e-12):
                converged = True
                break
    return MinimizeResult(x=best_x, fun=best_f, history=np.asarray(history),
                          converged=converged, iterations=len(history),
                          evaluations=evaluations)

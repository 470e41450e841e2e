"""Convex-model interval processes fitted to small accelerogram ensembles.

An interval process bounds a signal at every instant by an interval (median
plus/minus radius) and couples instants through a correlation matrix; the
unit level set of the induced covariance is an ellipsoid that must enclose
every measured sample. Construction minimizes the enclosing ellipsoid within
a scalar-scaled family: the center is the per-instant midrange (or the global
midrange for the stationary variant), the shape comes from the regularized
sample covariance (Toeplitz-projected when stationary), and a single scale
factor makes containment bind. An optional exact mode refines the center by
a minimax iteration for cross-checking on small ensembles.

Sampling admissible paths uses the truncated eigen-expansion of the
correlation matrix: points of the unit M-ball map to paths through the
expansion, and uniform ball sampling uses the normalized-Gaussian direction
with a radius of u**(1/M).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.linalg import LinAlgError
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize_scalar

from .spectra import GroundMotion

__all__ = [
    "IntervalProcess",
    "SampleEnsemble",
    "KlBasis",
    "characteristic_params",
    "mahalanobis",
    "construct_mrip",
    "construct_mrsip",
    "kl_decompose",
    "sample_hypersphere",
    "kl_reconstruct",
    "kl_reconstruct_batch",
    "save_process",
    "load_process",
]

# relative eigenvalue floor applied when regularizing sample covariances
_EIG_FLOOR_REL = 1e-8
# absolute positive-definiteness tolerance for correlation matrices
_PD_TOL = 1e-12


@dataclass(frozen=True)
class IntervalProcess:
    """Median/radius vectors plus correlation matrix on a time grid."""

    grid: np.ndarray
    median: np.ndarray
    radius: np.ndarray
    correlation: np.ndarray
    stationary: bool = False

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        median = np.asarray(self.median, dtype=float)
        radius = np.asarray(self.radius, dtype=float)
        corr = np.asarray(self.correlation, dtype=float)
        for name, val in (("grid", grid), ("median", median), ("radius", radius)):
            object.__setattr__(self, name, val)
        object.__setattr__(self, "correlation", corr)
        n = grid.size
        if median.shape != (n,) or radius.shape != (n,) or corr.shape != (n, n):
            raise ValueError("median, radius and correlation must conform to the grid")
        if np.any(radius <= 0):
            raise ValueError("radius must be positive at every instant")
        if not np.allclose(corr, corr.T, atol=1e-10):
            raise ValueError("correlation must be symmetric")
        if not np.allclose(np.diag(corr), 1.0, atol=1e-8):
            raise ValueError("correlation must have a unit diagonal")
        eigmin = float(np.linalg.eigvalsh(corr)[0])
        if eigmin <= _PD_TOL:
            raise ValueError(
                f"correlation must be positive definite (smallest eigenvalue {eigmin:g})"
            )
        if self.stationary:
            if not (np.allclose(median, median[0]) and np.allclose(radius, radius[0])):
                raise ValueError("stationary process requires constant median and radius")
            for k in range(1, n):
                d = np.diagonal(corr, offset=k)
                if not np.allclose(d, d[0], atol=1e-8):
                    raise ValueError("stationary process requires a Toeplitz correlation")

    @property
    def n_instants(self) -> int:
        return self.grid.size

    def covariance(self) -> np.ndarray:
        """cov(t_i, t_j) = r_i * r_j * rho_ij."""
        return self.correlation * np.outer(self.radius, self.radius)


@dataclass(frozen=True)
class SampleEnsemble:
    """Measured samples sharing one time grid; rows are samples."""

    grid: np.ndarray
    samples: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        samples = np.atleast_2d(np.asarray(self.samples, dtype=float))
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "samples", samples)
        if samples.shape[1] != grid.size:
            raise ValueError("samples must conform to the grid")
        if samples.shape[0] < 2:
            raise ValueError("at least two samples are required")

    @classmethod
    def from_motions(cls, motions) -> "SampleEnsemble":
        grid = motions[0].grid
        return cls(grid=grid, samples=np.vstack([m.values for m in motions]))

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]


@dataclass(frozen=True)
class KlBasis:
    """Truncated eigen-decomposition of an interval-process correlation."""

    process: IntervalProcess
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    order: int
    total_energy: float

    @property
    def energy_fraction(self) -> float:
        return float(self.eigenvalues.sum() / self.total_energy)


def characteristic_params(lower, upper):
    """Interval median and radius from per-instant lower/upper bounds."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if np.any(lower > upper):
        raise ValueError("lower bound exceeds upper bound at some instant")
    return 0.5 * (upper + lower), 0.5 * (upper - lower)


def _solve_covariance(cov: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        return cho_solve(cho_factor(cov, lower=True), rhs)
    except LinAlgError:
        eigmin = float(np.linalg.eigvalsh(cov)[0])
        raise LinAlgError(
            f"covariance is singular or indefinite (smallest eigenvalue {eigmin:g})"
        ) from None


def mahalanobis(process: IntervalProcess, sample) -> float:
    """Quadratic form (U - o)^T C^{-1} (U - o); the sample is enclosed iff <= 1."""
    sample = np.asarray(sample, dtype=float)
    if sample.shape != process.median.shape:
        raise ValueError("sample length must match the process grid")
    dev = sample - process.median
    return float(dev @ _solve_covariance(process.covariance(), dev))


def _mahalanobis_many(center: np.ndarray, shape: np.ndarray, samples: np.ndarray) -> np.ndarray:
    dev = samples - center
    return np.einsum("ki,ik->k", dev, _solve_covariance(shape, dev.T))


def _regularize_pd(matrix: np.ndarray) -> np.ndarray:
    """Floor the eigenvalues of a symmetric matrix at a fraction of trace/N."""
    n = matrix.shape[0]
    floor = _EIG_FLOOR_REL * np.trace(matrix) / n
    vals, vecs = np.linalg.eigh(matrix)
    return (vecs * np.maximum(vals, floor)) @ vecs.T


def _minimax_center(samples: np.ndarray, shape: np.ndarray, start: np.ndarray,
                    iterations: int = 2000) -> np.ndarray:
    """Center minimizing the maximum shape-metric distance to the samples.

    Badoiu-Clarkson iteration for the minimum enclosing ball in whitened
    coordinates; converges at rate O(1/i), which is ample for a cross-check.
    """
    vals, vecs = np.linalg.eigh(shape)
    vals = np.maximum(vals, _EIG_FLOOR_REL * vals.max())
    white = (vecs / np.sqrt(vals)) @ vecs.T
    unwhite = (vecs * np.sqrt(vals)) @ vecs.T
    pts = samples @ white.T
    c = start @ white.T
    for i in range(1, iterations + 1):
        far = pts[np.argmax(np.sum((pts - c) ** 2, axis=1))]
        c = c + (far - c) / (i + 1.0)
    return c @ unwhite.T


def _process_from_shape(grid, center, shape, samples, radius_floor, stationary) -> IntervalProcess:
    spread = np.max(_mahalanobis_many(center, shape, samples)) if np.trace(shape) > 0 else 0.0
    # tiny headroom absorbs solver roundoff on ill-conditioned shapes so the
    # worst sample lands just inside the unit level set instead of just outside
    spread *= 1.0 + 1e-7
    cov = spread * shape
    diag = np.sqrt(np.maximum(np.diag(cov), 0.0))
    radius = np.maximum(diag, radius_floor)
    if np.any(radius <= 0):
        raise ValueError(
            "ensemble has zero spread; set a positive radius floor to proceed"
        )
    corr = cov / np.outer(radius, radius)
    np.fill_diagonal(corr, 1.0)
    corr = 0.5 * (corr + corr.T)
    return IntervalProcess(grid=grid, median=center, radius=radius,
                           correlation=corr, stationary=stationary)


def construct_mrip(ensemble: SampleEnsemble, radius_floor: float = 0.0,
                   exact: bool = False, center=None) -> IntervalProcess:
    """Fit the minimum-radius interval process enclosing every sample.

    Two-stage fit: the center is the per-instant midrange of the ensemble,
    the shape is the PD-regularized sample covariance about that center, and
    a scalar rescaling makes the worst-sample quadratic form equal one. The
    result is the minimum-trace member of the scalar-scaled family, not a
    certified global optimum. ``exact=True`` additionally refines the center
    by a minimax iteration before rescaling.
    """
    samples = ensemble.samples
    if center is None:
        o = 0.5 * (samples.max(axis=0) + samples.min(axis=0))
    else:
        o = np.asarray(center, dtype=float)
    dev = samples - o
    sigma = dev.T @ dev / ensemble.n_samples
    if np.trace(sigma) <= 0 and radius_floor <= 0:
        raise ValueError(
            "ensemble samples are identical; set a positive radius floor to proceed"
        )
    if np.trace(sigma) <= 0:
        n = ensemble.grid.size
        corr = np.eye(n)
        return IntervalProcess(grid=ensemble.grid, median=o,
                               radius=np.full(n, radius_floor),
                               correlation=corr, stationary=False)
    shape = _regularize_pd(sigma)
    if exact and center is None:
        o = _minimax_center(samples, shape, o)
    return _process_from_shape(ensemble.grid, o, shape, samples, radius_floor, False)


def _toeplitz_project(matrix: np.ndarray) -> np.ndarray:
    """Average each diagonal of a symmetric matrix."""
    n = matrix.shape[0]
    lags = np.array([np.mean(np.diagonal(matrix, offset=k)) for k in range(n)])
    idx = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
    return lags[idx]


def _repair_toeplitz_pd(toep: np.ndarray, floor: float, repair_cap: float,
                        max_iters: int = 200) -> np.ndarray:
    """Nearest-ish Toeplitz matrix with eigenvalues above the floor.

    Alternating projections between the eigenvalue-floored cone and the
    Toeplitz subspace, finished by a small diagonal shift; fails when the
    final shift would exceed ``repair_cap`` of the zero-lag value.
    """
    n = toep.shape[0]
    current = toep
    eigmin = float(np.linalg.eigvalsh(current)[0])
    for _ in range(max_iters):
        if eigmin >= 0.5 * floor:
            break
        vals, vecs = np.linalg.eigh(current)
        current = _toeplitz_project((vecs * np.maximum(vals, floor)) @ vecs.T)
        eigmin = float(np.linalg.eigvalsh(current)[0])
    if eigmin < floor:
        shift = floor - eigmin
        if shift > repair_cap * current[0, 0]:
            raise ValueError(
                "Toeplitz projection destroyed positive definiteness beyond repair "
                f"(residual shift {shift:g} exceeds {repair_cap:g} of the zero-lag value)"
            )
        current = current + shift * np.eye(n)
    return current


def construct_mrsip(ensemble: SampleEnsemble, radius_floor: float = 0.0,
                    exact: bool = False, center=None,
                    repair_cap: float = 0.1) -> IntervalProcess:
    """Fit the stationary variant: constant median/radius, Toeplitz correlation.

    The global midrange gives the constant center, the sample covariance is
    projected to Toeplitz form by diagonal averaging, and positive
    definiteness lost in the projection is repaired by a diagonal shift of at
    most ``repair_cap`` times the zero-lag value (failing beyond that).
    ``exact=True`` refines the scalar center by a bounded 1-D minimax solve.
    """
    samples = ensemble.samples
    n = ensemble.grid.size
    if center is None:
        level = 0.5 * (samples.max() + samples.min())
    else:
        level = float(np.asarray(center, dtype=float).ravel()[0])
    o = np.full(n, level)
    dev = samples - level
    sigma = dev.T @ dev / ensemble.n_samples
    toep = _toeplitz_project(sigma)
    if np.trace(toep) <= 0 and radius_floor <= 0:
        raise ValueError(
            "ensemble samples are identical; set a positive radius floor to proceed"
        )
    if np.trace(toep) <= 0:
        return IntervalProcess(grid=ensemble.grid, median=o,
                               radius=np.full(n, radius_floor),
                               correlation=np.eye(n), stationary=True)
    floor = _EIG_FLOOR_REL * np.trace(toep) / n
    if float(np.linalg.eigvalsh(toep)[0]) < floor:
        toep = _repair_toeplitz_pd(toep, floor, repair_cap)
    if exact and center is None:
        lo, hi = samples.min(), samples.max()
        factor = cho_factor(toep, lower=True)

        def worst(u):
            d = samples - u
            return np.max(np.einsum("ki,ik->k", d, cho_solve(factor, d.T)))

        res = minimize_scalar(worst, bounds=(lo, hi), method="bounded")
        level = float(res.x)
        o = np.full(n, level)
    return _process_from_shape(ensemble.grid, o, toep, samples, radius_floor, True)


def kl_decompose(process: IntervalProcess, energy_fraction: float = 0.99) -> KlBasis:
    """Eigen-decompose the correlation matrix, truncated at an energy fraction.

    Eigenpairs are sorted by descending eigenvalue; the order M is the
    smallest count whose cumulative eigenvalue share reaches the fraction.
    """
    if not 0 < energy_fraction <= 1:
        raise ValueError("energy_fraction must lie in (0, 1]")
    vals, vecs = np.linalg.eigh(process.correlation)
    order = np.argsort(vals)[::-1]
    vals = vals[order]
    vecs = vecs[:, order]
    total = float(vals.sum())
    share = np.cumsum(vals) / total
    m = int(np.searchsorted(share, energy_fraction * (1.0 - 1e-15)) + 1)
    m = min(m, vals.size)
    return KlBasis(process=process, eigenvalues=vals[:m].copy(),
                   eigenvectors=vecs[:, :m].copy(), order=m, total_energy=total)


def sample_hypersphere(m: int, count: int, seed: int) -> np.ndarray:
    """Uniform points of the closed unit M-ball; rows are vectors.

    Gaussian directions normalized to the sphere, scaled by u**(1/M) radii.
    """
    if m < 1 or count < 1:
        raise ValueError("dimension and count must be at least 1")
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal((count, m))
    norms = np.linalg.norm(direction, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    radii = rng.uniform(0.0, 1.0, size=(count, 1)) ** (1.0 / m)
    return direction / norms * radii


def kl_reconstruct_batch(basis: KlBasis, thetas: np.ndarray) -> np.ndarray:
    """Map rows of ball points to sample paths; returns (batch, N) values."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    if thetas.shape[1] != basis.order:
        raise ValueError(
            f"theta length {thetas.shape[1]} does not match truncation order {basis.order}"
        )
    proc = basis.process
    modes = basis.eigenvectors * np.sqrt(basis.eigenvalues)  # (N, M)
    return proc.median + proc.radius * (thetas @ modes.T)


def kl_reconstruct(basis: KlBasis, theta) -> GroundMotion:
    """Path U^m + sum_j U^r sqrt(lambda_j) phi_j theta_j on the parent grid."""
    values = kl_reconstruct_batch(basis, theta)[0]
    return GroundMotion(grid=basis.process.grid, values=values)


def save_process(process: IntervalProcess, basis: Optional[KlBasis], path) -> None:
    """Write a self-describing JSON bundle (grid, median, radius, correlation, eigenpairs)."""
    import json

    payload = {
        "grid": process.grid.tolist(),
        "median": process.median.tolist(),
        "radius": process.radius.tolist(),
        "correlation": process.correlation.tolist(),
        "stationary": bool(process.stationary),
    }
    if basis is not None:
        payload["eigenvalues"] = basis.eigenvalues.tolist()
        payload["eigenvectors"] = basis.eigenvectors.tolist()
        payload["order"] = basis.order
        payload["total_energy"] = basis.total_energy
    with open(path, "w") as handle:
        json.dump(payload, handle)


def load_process(path) -> tuple[IntervalProcess, Optional[KlBasis]]:
    """Read a bundle written by :func:`save_process`."""
    import json

    with open(path) as handle:
        payload = json.load(handle)
    process = IntervalProcess(
        grid=np.array(payload["grid"]),
        median=np.array(payload["median"]),
        radius=np.array(payload["radius"]),
        correlation=np.array(payload["correlation"]),
        stationary=payload["stationary"],
    )
    basis = None
    if "eigenvalues" in payload:
        basis = KlBasis(
            process=process,
            eigenvalues=np.array(payload["eigenvalues"]),
            eigenvectors=np.array(payload["eigenvectors"]),
            order=int(payload["order"]),
            total_energy=float(payload["total_energy"]),
        )
    return process, basis

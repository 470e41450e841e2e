"""Low-discrepancy point sets from damped multi-body relaxation.

Points in the unit cube repel each other (and their mirror images across the
cube walls) through an inverse-power potential; damped Newtonian dynamics are
integrated until the system is essentially static, and the resting
configuration is the dynamic evolution sequence. Dimensional random
rearranging (DRR) permutes the rows (dimensions) of a point set, which leaves
its star L2 discrepancy exactly unchanged, giving fresh randomized copies of
one relaxed set.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "PointSet",
    "DesConfig",
    "DesResult",
    "generate_des",
    "drr",
    "l2_discrepancy",
]

# distances are capped below to keep the inverse-power terms finite
_DIST_EPS = 1e-6


@dataclass(frozen=True)
class PointSet:
    """D x N matrix of unit-cube points; columns are points."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        object.__setattr__(self, "points", pts)
        if pts.size == 0:
            raise ValueError("point set must be non-empty")
        if np.any(pts < 0.0) or np.any(pts > 1.0):
            raise ValueError("point set entries must lie in [0, 1]")
        if np.unique(pts.T, axis=0).shape[0] != pts.shape[1]:
            raise ValueError("point set columns must be distinct")

    @property
    def dim(self) -> int:
        return self.points.shape[0]

    @property
    def count(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class DesConfig:
    """Dynamics constants for the relaxation.

    ``p`` is the outer smooth-max exponent of the potential and ``q`` scales
    the generalized distance ``d**q``; the remaining fields control the
    damped integration. ``static_tol`` is the per-point kinetic-energy level
    below which the system counts as static.
    """

    g_grav: float = 1.0
    p: float = 2.0
    q: float = 1.0
    c_damp: float = 1.0
    mass: float = 1.0
    dt: float = 1e-2
    max_steps: int = 20000
    static_tol: float = 1e-10

    def __post_init__(self):
        for name in ("g_grav", "p", "q", "c_damp", "mass", "dt", "static_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")


@dataclass(frozen=True)
class DesResult:
    """Relaxed point set plus integration diagnostics."""

    point_set: PointSet
    converged: bool
    n_steps: int
    energy_trace: np.ndarray = field(repr=False)


def _raw_energy_terms(x: np.ndarray, pq: float):
    """Pairwise and wall inverse-power sums for points x of shape (N, D).

    Pairwise separations use the minimum image under the reflection group of
    the cube (per coordinate the shortest of the direct displacement and the
    two mirrored ones); wall terms are each point's own nearest mirror
    images, at 2x and 2(1-x) per coordinate.
    """
    direct = x[:, None, :] - x[None, :, :]
    summed = x[:, None, :] + x[None, :, :]
    cands = np.stack((direct, summed, summed - 2.0))
    pick = np.argmin(np.abs(cands), axis=0)
    eff = np.take_along_axis(cands, pick[None], axis=0)[0]
    dist = np.sqrt(np.sum(eff * eff, axis=2))
    np.fill_diagonal(dist, np.inf)
    dist = np.maximum(dist, _DIST_EPS)
    pair_terms = dist ** (-pq)
    wall_lo = np.maximum(2.0 * x, _DIST_EPS)
    wall_hi = np.maximum(2.0 * (1.0 - x), _DIST_EPS)
    return eff, dist, pair_terms, wall_lo, wall_hi


def _potential_and_forces(x: np.ndarray, config: DesConfig):
    """Potential energy and the gradient force on each point, shape (N, D)."""
    pq = config.p * config.q
    eff, dist, pair_terms, wall_lo, wall_hi = _raw_energy_terms(x, pq)
    raw = 0.5 * pair_terms.sum() + (wall_lo ** (-pq)).sum() + (wall_hi ** (-pq)).sum()
    potential = config.g_grav * raw ** (1.0 / config.p)
    # d(raw)/dx: every minimum-image candidate has unit derivative w.r.t. x_i
    pair_grad = -pq * np.einsum("ij,ijk->ik", dist ** (-pq - 2.0), eff)
    wall_grad = -2.0 * pq * wall_lo ** (-pq - 1.0) + 2.0 * pq * wall_hi ** (-pq - 1.0)
    chain = config.g_grav / config.p * raw ** (1.0 / config.p - 1.0)
    force = chain * (pair_grad + wall_grad)
    return potential, force


def _reflect(x: np.ndarray, v: np.ndarray):
    """Fold positions back into the cube, flipping the matching velocities."""
    y = np.mod(x, 2.0)
    descending = y > 1.0
    folded = np.where(descending, 2.0 - y, y)
    return np.clip(folded, 0.0, 1.0), np.where(descending, -v, v)


def generate_des(dim: int, count: int, config: Optional[DesConfig] = None,
                 seed: int = 0) -> DesResult:
    """Relax ``count`` mutually repelling points in the ``dim``-cube.

    Damped semi-implicit integration from a seeded uniform start; a step that
    would raise the total mechanical energy is retried with a halved local
    step, so the energy trace is non-increasing. Integration stops once the
    total kinetic energy drops below ``static_tol`` per point; hitting
    ``max_steps`` first returns the best state so far with ``converged``
    false and a warning.
    """
    if dim < 1:
        raise ValueError("dimension must be at least 1")
    if count < 2:
        raise ValueError("at least two points are required")
    config = config or DesConfig()
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 1.0, size=(count, dim))
    v = np.zeros_like(x)
    m, c = config.mass, config.c_damp
    potential, force = _potential_and_forces(x, config)
    energies = [0.5 * m * np.sum(v * v) + potential]
    converged = False
    steps_taken = 0
    for step in range(config.max_steps):
        h = config.dt
        for _ in range(60):
            v_new = (v - h * force / m) / (1.0 + h * c / m)
            x_new, v_ref = _reflect(x + h * v_new, v_new)
            pot_new, force_new = _potential_and_forces(x_new, config)
            energy_new = 0.5 * m * np.sum(v_ref * v_ref) + pot_new
            if energy_new <= energies[-1] * (1.0 + 1e-12):
                break
            h *= 0.5
        x, v, potential, force = x_new, v_ref, pot_new, force_new
        energies.append(energy_new)
        steps_taken = step + 1
        if 0.5 * m * np.sum(v * v) < config.static_tol * count:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"relaxation did not reach the static tolerance in {config.max_steps} "
            "steps; returning the best state so far",
            RuntimeWarning,
            stacklevel=2,
        )
    return DesResult(point_set=PointSet(points=x.T.copy()), converged=converged,
                     n_steps=steps_taken, energy_trace=np.array(energies))


def drr(point_set: PointSet, seed: int) -> PointSet:
    """Dimensional random rearranging: permute the rows of a point set.

    The permutation is drawn uniformly (sampling without replacement), so the
    multiset of rows is preserved and the discrepancy is unchanged.
    """
    rng = np.random.default_rng(seed)
    perm = rng.permutation(point_set.dim)
    return PointSet(points=point_set.points[perm].copy())


def l2_discrepancy(point_set: PointSet) -> float:
    """Star L2 discrepancy of a D x N point set (Warnock's closed form)."""
    pts = point_set.points
    d, n = pts.shape
    term1 = 3.0 ** (-d)
    term2 = 2.0 ** (1 - d) / n * np.sum(np.prod(1.0 - pts * pts, axis=0))
    cols = pts.T  # (N, D)
    pairwise_max = np.maximum(cols[:, None, :], cols[None, :, :])
    term3 = np.sum(np.prod(1.0 - pairwise_max, axis=2)) / n**2
    return float(np.sqrt(max(term1 - term2 + term3, 0.0)))

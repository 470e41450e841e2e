"""Story-shear frame with smooth hysteretic story springs under base excitation.

The frame is a chain of lumped floor masses; each story carries a restoring
force ``alpha*k*drift + (1-alpha)*k*z`` where the hysteretic state z follows
the Baber-Wen rate equation (degradation and pinching machinery present, but
inert at zero degradation rates). Damping is Rayleigh on the initial elastic
matrices. Time integration is classic fixed-substep RK4 on the augmented
first-order system, with the ground acceleration interpolated linearly
between grid points; a numba kernel integrates whole batches of ground
motions at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit, prange
from scipy.linalg import eigh

from .spectra import GroundMotion

__all__ = [
    "BoucWenParams",
    "ShearFrame",
    "ResponseHistory",
    "SimulationError",
    "rayleigh_coefficients",
    "bouc_wen_rate",
    "simulate",
    "simulate_batch",
]


class SimulationError(RuntimeError):
    """State became non-finite during integration."""


@dataclass(frozen=True)
class BoucWenParams:
    """Baber-Wen hysteresis constants.

    With ``d_nu = d_eta = p_bw = 0`` the strength/stiffness degradation and
    pinching terms are inert and the rate reduces to
    ``a_bw*v - (beta*|v|*|z|**(n-1)*z + gamma*v*|z|**n)``.
    """

    a_bw: float = 1.0
    n_exp: float = 1.0
    beta: float = 15.0
    gamma: float = 150.0
    d_nu: float = 0.0
    d_eta: float = 0.0
    p_bw: float = 0.0
    q_bw: float = 1.0
    d_psi: float = 1.0
    lam_bw: float = 1.0
    zeta_s: float = 0.95
    psi: float = 1.0

    def __post_init__(self):
        if self.n_exp < 1:
            raise ValueError("hysteresis exponent must be at least 1")
        if not 0 < self.zeta_s <= 1:
            raise ValueError("zeta_s must lie in (0, 1]")

    def as_array(self) -> np.ndarray:
        return np.array([self.a_bw, self.n_exp, self.beta, self.gamma, self.d_nu,
                         self.d_eta, self.p_bw, self.q_bw, self.d_psi, self.lam_bw,
                         self.zeta_s, self.psi], dtype=float)


@dataclass(frozen=True)
class ShearFrame:
    """Lumped-mass story-shear model.

    ``damping`` is either ``("rayleigh", zeta)`` (coefficients fit so modes 1
    and 2 both see ``zeta``) or ``("coeffs", a0, a1)`` for explicit Rayleigh
    coefficients.
    """

    masses: np.ndarray
    stiffnesses: np.ndarray
    alpha: float = 0.04
    damping: tuple = ("rayleigh", 0.05)
    bw: BoucWenParams = field(default_factory=BoucWenParams)

    def __post_init__(self):
        masses = np.atleast_1d(np.asarray(self.masses, dtype=float))
        ks = np.atleast_1d(np.asarray(self.stiffnesses, dtype=float))
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "stiffnesses", ks)
        if masses.ndim != 1 or ks.shape != masses.shape:
            raise ValueError("masses and stiffnesses must be matching vectors")
        if np.any(masses <= 0) or np.any(ks <= 0):
            raise ValueError("masses and stiffnesses must be positive")
        if not 0 <= self.alpha <= 1:
            raise ValueError("post-yield ratio must lie in [0, 1]")
        if self.damping[0] not in ("rayleigh", "coeffs"):
            raise ValueError("damping must be ('rayleigh', zeta) or ('coeffs', a0, a1)")

    @property
    def n_stories(self) -> int:
        return self.masses.size

    def mass_matrix(self) -> np.ndarray:
        return np.diag(self.masses)

    def stiffness_matrix(self) -> np.ndarray:
        n = self.n_stories
        ks = self.stiffnesses
        mat = np.zeros((n, n))
        for i in range(n):
            mat[i, i] = ks[i] + (ks[i + 1] if i + 1 < n else 0.0)
            if i + 1 < n:
                mat[i, i + 1] = -ks[i + 1]
                mat[i + 1, i] = -ks[i + 1]
        return mat

    def modal_frequencies(self) -> np.ndarray:
        """Undamped circular frequencies, ascending (rad/s)."""
        vals = eigh(self.stiffness_matrix(), self.mass_matrix(), eigvals_only=True)
        return np.sqrt(np.maximum(vals, 0.0))

    def damping_coefficients(self) -> tuple[float, float]:
        if self.damping[0] == "coeffs":
            return float(self.damping[1]), float(self.damping[2])
        zeta = float(self.damping[1])
        omegas = self.modal_frequencies()
        if omegas.size < 2:
            raise ValueError(
                "mode-fit Rayleigh damping needs at least two modes; give "
                "explicit ('coeffs', a0, a1) for a single story"
            )
        return rayleigh_coefficients(omegas[0], omegas[1], zeta)

    @classmethod
    def uniform(cls, n_stories: int, mass: float = 250000.0, period: float = 1.0,
                alpha: float = 0.04, damping: tuple = ("rayleigh", 0.05),
                bw: Optional[BoucWenParams] = None) -> "ShearFrame":
        """Equal masses and stiffnesses, tuned to a target fundamental period."""
        if n_stories < 1:
            raise ValueError("at least one story is required")
        masses = np.full(n_stories, float(mass))
        trial = cls(masses=masses, stiffnesses=np.ones(n_stories),
                    alpha=alpha, damping=("coeffs", 0.0, 0.0),
                    bw=bw or BoucWenParams())
        omega_unit = trial.modal_frequencies()[0]
        k = (2.0 * np.pi / period / omega_unit) ** 2
        return cls(masses=masses, stiffnesses=np.full(n_stories, k),
                   alpha=alpha, damping=damping, bw=bw or BoucWenParams())


@dataclass(frozen=True)
class ResponseHistory:
    """Floor response histories on the ground-motion grid.

    Arrays are (instants, stories): relative displacement (m), relative
    velocity (m/s), absolute acceleration (m/s^2), hysteretic state (m).
    """

    grid: np.ndarray
    displacement: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray
    hysteretic: np.ndarray

    def component(self, floor: int, quantity: str) -> np.ndarray:
        """Series for a 1-based floor and quantity in {disp, vel, acc}."""
        if not 1 <= floor <= self.displacement.shape[1]:
            raise ValueError(f"floor {floor} out of range")
        table = {"disp": self.displacement, "vel": self.velocity,
                 "acc": self.acceleration}
        if quantity not in table:
            raise ValueError(f"quantity must be one of {sorted(table)}")
        return table[quantity][:, floor - 1]


def rayleigh_coefficients(omega1: float, omega2: float, zeta: float) -> tuple[float, float]:
    """Mass/stiffness coefficients giving damping ratio zeta at both frequencies."""
    if not 0 < omega1 < omega2:
        raise ValueError("frequencies must satisfy 0 < omega1 < omega2")
    if zeta < 0:
        raise ValueError("damping ratio must be nonnegative")
    a0 = 2.0 * zeta * omega1 * omega2 / (omega1 + omega2)
    a1 = 2.0 * zeta / (omega1 + omega2)
    return a0, a1


def bouc_wen_rate(velocity, z, params: BoucWenParams, energy=0.0):
    """Hysteretic rate dz/dt for inter-story velocity, state z, and energy e."""
    v = np.asarray(velocity, dtype=float)
    z = np.asarray(z, dtype=float)
    e = np.asarray(energy, dtype=float)
    nu = 1.0 + params.d_nu * e
    eta = 1.0 + params.d_eta * e
    absz = np.abs(z)
    zpow1 = np.where(absz > 0, absz ** (params.n_exp - 1.0), 0.0) * z
    zpown = absz**params.n_exp
    core = params.a_bw * v - nu * (params.beta * np.abs(v) * zpow1
                                   + params.gamma * v * zpown)
    zeta1 = params.zeta_s * (1.0 - np.exp(-params.p_bw * e))
    zeta2 = (params.psi + params.d_psi * e) * (params.lam_bw + zeta1)
    zu = (1.0 / ((params.beta + params.gamma) * nu)) ** (1.0 / params.n_exp)
    gauss = np.exp(-np.square(z * np.sign(v) - params.q_bw * zu)
                   / np.where(zeta2 != 0.0, np.square(zeta2), 1.0))
    h = np.where(zeta1 > 0.0, 1.0 - zeta1 * gauss, 1.0)
    out = h * core / eta
    return float(out) if out.ndim == 0 else out


@njit(cache=True)
def _bw_rate_nb(v, z, e, bw):
    a_bw, n_exp, beta, gamma, d_nu, d_eta, p_bw, q_bw, d_psi, lam_bw, zeta_s, psi = (
        bw[0], bw[1], bw[2], bw[3], bw[4], bw[5], bw[6], bw[7], bw[8], bw[9],
        bw[10], bw[11])
    nu = 1.0 + d_nu * e
    eta = 1.0 + d_eta * e
    absz = abs(z)
    if n_exp == 1.0:
        zpow1 = z
        zpown = absz
    else:
        zpow1 = absz ** (n_exp - 1.0) * z if absz > 0.0 else 0.0
        zpown = absz**n_exp
    core = a_bw * v - nu * (beta * abs(v) * zpow1 + gamma * v * zpown)
    if p_bw > 0.0:
        zeta1 = zeta_s * (1.0 - np.exp(-p_bw * e))
        zeta2 = (psi + d_psi * e) * (lam_bw + zeta1)
        if zeta1 > 0.0 and zeta2 != 0.0:
            zu = (1.0 / ((beta + gamma) * nu)) ** (1.0 / n_exp)
            sgn = 1.0 if v > 0.0 else (-1.0 if v < 0.0 else 0.0)
            h = 1.0 - zeta1 * np.exp(-((z * sgn - q_bw * zu) ** 2) / zeta2**2)
        else:
            h = 1.0
    else:
        h = 1.0
    return h * core / eta


@njit(cache=True)
def _rhs_nb(x, v, z, e, ugv, masses, ks, alpha, a0, a1, bw,
            dv, dz, de, spring, kdrift):
    n = masses.size
    for i in range(n):
        below_x = x[i - 1] if i > 0 else 0.0
        below_v = v[i - 1] if i > 0 else 0.0
        drift = x[i] - below_x
        drate = v[i] - below_v
        spring[i] = alpha * ks[i] * drift + (1.0 - alpha) * ks[i] * z[i]
        kdrift[i] = ks[i] * drate
        dz[i] = _bw_rate_nb(drate, z[i], e[i], bw)
        de[i] = z[i] * drate
    for i in range(n):
        s_above = spring[i + 1] if i + 1 < n else 0.0
        kd_above = kdrift[i + 1] if i + 1 < n else 0.0
        restoring = spring[i] - s_above
        damping = a0 * masses[i] * v[i] + a1 * (kdrift[i] - kd_above)
        dv[i] = -ugv - (damping + restoring) / masses[i]


@njit(cache=True, parallel=True)
def _integrate_nb(masses, ks, alpha, a0, a1, bw, ug, dt, substeps):
    batch, n_grid = ug.shape
    n = masses.size
    disp = np.zeros((batch, n_grid, n))
    vel = np.zeros((batch, n_grid, n))
    acc = np.zeros((batch, n_grid, n))
    hyst = np.zeros((batch, n_grid, n))
    blown = np.full(batch, -1, dtype=np.int64)
    h = dt / substeps
    for b in prange(batch):
        x = np.zeros(n)
        v = np.zeros(n)
        z = np.zeros(n)
        e = np.zeros(n)
        spring = np.zeros(n)
        kdrift = np.zeros(n)
        dv1 = np.zeros(n); dz1 = np.zeros(n); de1 = np.zeros(n)
        dv2 = np.zeros(n); dz2 = np.zeros(n); de2 = np.zeros(n)
        dv3 = np.zeros(n); dz3 = np.zeros(n); de3 = np.zeros(n)
        dv4 = np.zeros(n); dz4 = np.zeros(n); de4 = np.zeros(n)
        xs = np.zeros(n); vs = np.zeros(n); zs = np.zeros(n); es = np.zeros(n)
        # absolute acceleration = -(damping + restoring)/m; zero state gives zero
        for i in range(n_grid - 1):
            u0 = ug[b, i]
            du = ug[b, i + 1] - u0
            for s in range(substeps):
                f0 = (s + 0.0) / substeps
                fm = (s + 0.5) / substeps
                f1 = (s + 1.0) / substeps
                ug0 = u0 + du * f0
                ugm = u0 + du * fm
                ug1 = u0 + du * f1
                _rhs_nb(x, v, z, e, ug0, masses, ks, alpha, a0, a1, bw,
                        dv1, dz1, de1, spring, kdrift)
                for j in range(n):
                    xs[j] = x[j] + 0.5 * h * v[j]
                    vs[j] = v[j] + 0.5 * h * dv1[j]
                    zs[j] = z[j] + 0.5 * h * dz1[j]
                    es[j] = e[j] + 0.5 * h * de1[j]
                _rhs_nb(xs, vs, zs, es, ugm, masses, ks, alpha, a0, a1, bw,
                        dv2, dz2, de2, spring, kdrift)
                for j in range(n):
                    xs[j] = x[j] + 0.5 * h * (v[j] + 0.5 * h * dv1[j])
                    vs[j] = v[j] + 0.5 * h * dv2[j]
                    zs[j] = z[j] + 0.5 * h * dz2[j]
                    es[j] = e[j] + 0.5 * h * de2[j]
                _rhs_nb(xs, vs, zs, es, ugm, masses, ks, alpha, a0, a1, bw,
                        dv3, dz3, de3, spring, kdrift)
                for j in range(n):
                    xs[j] = x[j] + h * (v[j] + 0.5 * h * dv2[j])
                    vs[j] = v[j] + h * dv3[j]
                    zs[j] = z[j] + h * dz3[j]
                    es[j] = e[j] + h * de3[j]
                _rhs_nb(xs, vs, zs, es, ug1, masses, ks, alpha, a0, a1, bw,
                        dv4, dz4, de4, spring, kdrift)
                for j in range(n):
                    k1x = v[j]
                    k2x = v[j] + 0.5 * h * dv1[j]
                    k3x = v[j] + 0.5 * h * dv2[j]
                    k4x = v[j] + h * dv3[j]
                    x[j] += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
                    v[j] += h / 6.0 * (dv1[j] + 2.0 * dv2[j] + 2.0 * dv3[j] + dv4[j])
                    z[j] += h / 6.0 * (dz1[j] + 2.0 * dz2[j] + 2.0 * dz3[j] + dz4[j])
                    e[j] += h / 6.0 * (de1[j] + 2.0 * de2[j] + 2.0 * de3[j] + de4[j])
            ok = True
            for j in range(n):
                if not (np.isfinite(x[j]) and np.isfinite(v[j]) and np.isfinite(z[j])):
                    ok = False
            if not ok:
                blown[b] = i + 1
                break
            _rhs_nb(x, v, z, e, ug[b, i + 1], masses, ks, alpha, a0, a1, bw,
                    dv1, dz1, de1, spring, kdrift)
            for j in range(n):
                disp[b, i + 1, j] = x[j]
                vel[b, i + 1, j] = v[j]
                acc[b, i + 1, j] = dv1[j] + ug[b, i + 1]
                hyst[b, i + 1, j] = z[j]
    return disp, vel, acc, hyst, blown


def simulate_batch(frame: ShearFrame, grid, ground_values, substeps: int = 8):
    """Integrate a batch of ground motions; returns (disp, vel, acc, z) arrays.

    ``ground_values`` is (batch, instants) in m/s^2 on the shared grid; each
    output is (batch, instants, stories). Raises :class:`SimulationError`
    naming the batch row and instant if any state becomes non-finite.
    """
    grid = np.asarray(grid, dtype=float)
    values = np.atleast_2d(np.asarray(ground_values, dtype=float))
    if values.shape[1] != grid.size:
        raise ValueError("ground values must conform to the grid")
    if grid.size < 2:
        raise ValueError("grid must contain at least two instants")
    if substeps < 1:
        raise ValueError("substeps must be positive")
    dt = float(grid[1] - grid[0])
    a0, a1 = frame.damping_coefficients()
    disp, vel, acc, hyst, blown = _integrate_nb(
        frame.masses, frame.stiffnesses, float(frame.alpha), a0, a1,
        frame.bw.as_array(), values, dt, substeps,
    )
    bad = np.nonzero(blown >= 0)[0]
    if bad.size:
        b = int(bad[0])
        raise SimulationError(
            f"response blew up for batch row {b} at t = {grid[blown[b]]:.6g} s"
        )
    return disp, vel, acc, hyst


def simulate(frame: ShearFrame, ground: GroundMotion, substeps: int = 8) -> ResponseHistory:
    """Time-history response of the frame to one ground motion."""
    disp, vel, acc, hyst = simulate_batch(frame, ground.grid,
                                          ground.values[None, :], substeps)
    return ResponseHistory(grid=ground.grid, displacement=disp[0], velocity=vel[0],
                           acceleration=acc[0], hysteretic=hyst[0])


def save_frame(frame: ShearFrame, path) -> None:
    """Write a frame definition as a JSON bundle."""
    import dataclasses
    import json

    payload = {
        "masses": frame.masses.tolist(),
        "stiffnesses": frame.stiffnesses.tolist(),
        "alpha": frame.alpha,
        "damping": list(frame.damping),
        "bw": dataclasses.asdict(frame.bw),
    }
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=2)


def load_frame(path) -> ShearFrame:
    """Read a frame definition written by :func:`save_frame`."""
    import json

    with open(path) as handle:
        payload = json.load(handle)
    return ShearFrame(
        masses=np.array(payload["masses"], dtype=float),
        stiffnesses=np.array(payload["stiffnesses"], dtype=float),
        alpha=float(payload["alpha"]),
        damping=tuple(payload["damping"]),
        bw=BoucWenParams(**payload["bw"]),
    )

"""Seismic acceleration spectra and artificial accelerogram synthesis.

Stationary ground motion is described by the Kanai-Tajimi or Clough-Penzien
power spectral density; non-stationary motion by an evolutionary PSD obtained
from a time-frequency modulation envelope. Accelerograms are synthesized by
the classical spectral-representation cosine series with random phases.

Spectral densities are double-sided and carry cm^2/s^3 units; synthesized
signals are converted to m/s^2 at the :class:`GroundMotion` boundary.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad

__all__ = [
    "PsdParams",
    "ModulationParams",
    "GroundMotion",
    "kanai_tajimi_psd",
    "clough_penzien_psd",
    "modulation_peak_time",
    "modulation",
    "epsd",
    "spectral_energy",
    "cutoff_for_energy",
    "synthesize_accelerogram",
    "synthesize_ensemble",
]

# synthesized amplitudes come out in cm/s^2; signals are exposed in m/s^2
CM_TO_M = 0.01


@dataclass(frozen=True)
class PsdParams:
    """Site parameters of the Kanai-Tajimi / Clough-Penzien spectra.

    ``omega_f``/``zeta_f`` (the high-pass filter of the Clough-Penzien form)
    default to ``0.1 * omega_g`` and ``zeta_g``.
    """

    omega_g: float
    zeta_g: float
    s0: float = 48.933
    omega_f: Optional[float] = None
    zeta_f: Optional[float] = None

    def __post_init__(self):
        if self.omega_f is None:
            object.__setattr__(self, "omega_f", 0.1 * self.omega_g)
        if self.zeta_f is None:
            object.__setattr__(self, "zeta_f", self.zeta_g)
        if not self.omega_g > 0:
            raise ValueError(f"omega_g must be positive, got {self.omega_g}")
        if not 0 < self.zeta_g < 1:
            raise ValueError(f"zeta_g must lie in (0, 1), got {self.zeta_g}")
        if not self.s0 > 0:
            raise ValueError(f"s0 must be positive, got {self.s0}")
        if not self.omega_f > 0:
            raise ValueError(f"omega_f must be positive, got {self.omega_f}")


@dataclass(frozen=True)
class ModulationParams:
    """Rates of the amplitude modulation envelope A(omega, t).

    The envelope is well defined only while ``c*omega + b > a``; this is
    checked at evaluation time for the frequencies actually used.
    """

    a: float
    b: float
    c: float

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"decay rate a must be positive, got {self.a}")


@dataclass(frozen=True)
class GroundMotion:
    """Acceleration samples (m/s^2) on a uniform time grid (s)."""

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        if grid.ndim != 1 or grid.size == 0:
            raise ValueError("grid must be a non-empty 1-D array")
        if values.shape != grid.shape:
            raise ValueError("values must conform to the grid")
        if grid.size > 1:
            steps = np.diff(grid)
            if np.any(steps <= 0):
                raise ValueError("grid must be strictly increasing")
            if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
                raise ValueError("grid must be uniformly spaced")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")

    @property
    def dt(self) -> float:
        return float(self.grid[1] - self.grid[0]) if self.grid.size > 1 else 0.0


def kanai_tajimi_psd(omega, params: PsdParams):
    """Double-sided Kanai-Tajimi spectral density (cm^2/s^3).

    Even in omega, nonnegative, equal to ``s0`` at omega = 0.
    """
    w2 = np.square(omega)
    wg2 = params.omega_g**2
    damp = 4.0 * params.zeta_g**2 * wg2 * w2
    return (wg2**2 + damp) / ((w2 - wg2) ** 2 + damp) * params.s0


def clough_penzien_psd(omega, params: PsdParams):
    """Double-sided Clough-Penzien spectral density (cm^2/s^3).

    Kanai-Tajimi spectrum times a high-pass factor that vanishes at
    omega = 0 and tends to one for omega far above the filter frequency.
    """
    w2 = np.square(omega)
    wf2 = params.omega_f**2
    highpass = w2**2 / ((w2 - wf2) ** 2 + 4.0 * params.zeta_f**2 * wf2 * w2)
    return highpass * kanai_tajimi_psd(omega, params)


def modulation_peak_time(omega, params: ModulationParams):
    """Instant t* at which the modulation envelope reaches its maximum of 1."""
    beta = params.c * np.asarray(omega, dtype=float) + params.b
    if np.any(beta <= params.a):
        raise ValueError(
            "modulation undefined: c*omega + b must exceed a "
            f"(a={params.a}, min(c*omega+b)={np.min(beta)})"
        )
    return (np.log(beta) - np.log(params.a)) / (beta - params.a)


def modulation(omega, t, params: ModulationParams):
    """Amplitude modulation envelope A(omega, t) in [0, 1].

    Zero at t = 0, unit maximum at the peak time t*, decaying afterwards.
    Raises ``ValueError`` when ``c*omega + b <= a``.
    """
    beta = params.c * np.asarray(omega, dtype=float) + params.b
    if np.any(beta <= params.a):
        raise ValueError(
            "modulation undefined: c*omega + b must exceed a "
            f"(a={params.a}, min(c*omega+b)={np.min(beta)})"
        )
    t = np.asarray(t, dtype=float)
    t_star = (np.log(beta) - np.log(params.a)) / (beta - params.a)
    peak = np.exp(-params.a * t_star) - np.exp(-beta * t_star)
    return (np.exp(-params.a * t) - np.exp(-beta * t)) / peak


def epsd(omega, t, psd: PsdParams, mod: ModulationParams):
    """Evolutionary spectral density |A(omega,t)|^2 * S_CP(omega) (cm^2/s^3)."""
    amp = modulation(omega, t, mod)
    return np.square(amp) * clough_penzien_psd(omega, psd)


def spectral_energy(psd: Callable[[np.ndarray], np.ndarray], omega_max=np.inf) -> float:
    """One-sided integral of a spectral density over [0, omega_max]."""
    value, _ = quad(psd, 0.0, omega_max, limit=400)
    return value


def cutoff_for_energy(psd: Callable[[np.ndarray], np.ndarray], fraction: float = 0.99,
                      bracket: float = 1e4) -> float:
    """Smallest cutoff capturing ``fraction`` of the one-sided spectral energy."""
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie in (0, 1)")
    total = spectral_energy(psd)
    if total <= 0:
        raise ValueError("spectrum has no energy")
    lo, hi = 0.0, bracket
    while spectral_energy(psd, hi) < fraction * total:
        hi *= 2.0
        if hi > 1e9:
            raise ValueError("failed to bracket the energy cutoff")
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if spectral_energy(psd, mid) >= fraction * total:
            hi = mid
        else:
            lo = mid
    return hi


def _synthesize_phases(
    psd: Callable[[np.ndarray], np.ndarray],
    grid: np.ndarray,
    omega_cut: float,
    n_freq: int,
    phases: np.ndarray,
    mod: Optional[ModulationParams],
) -> np.ndarray:
    """Cosine-series realizations (cm/s^2); phase rows give sample rows."""
    d_omega = omega_cut / n_freq
    omegas = (np.arange(n_freq) + 0.5) * d_omega
    amps = np.sqrt(2.0 * np.maximum(psd(omegas), 0.0) * d_omega)
    # cos(w t + phi) = cos(wt) cos(phi) - sin(wt) sin(phi): two basis matmuls
    angles = np.outer(grid, omegas)
    cos_basis = np.cos(angles)
    sin_basis = np.sin(angles)
    if mod is not None:
        envelope = modulation(omegas[None, :], grid[:, None], mod)
        cos_basis = cos_basis * envelope
        sin_basis = sin_basis * envelope
    return ((amps * np.cos(phases)) @ cos_basis.T
            - (amps * np.sin(phases)) @ sin_basis.T)


def synthesize_ensemble(
    psd: Callable[[np.ndarray], np.ndarray],
    grid,
    count: int,
    seed: int,
    omega_cut: Optional[float] = None,
    n_freq: int = 256,
    mod: Optional[ModulationParams] = None,
    energy_fraction: float = 0.99,
) -> list[GroundMotion]:
    """Synthesize ``count`` accelerograms by spectral representation.

    Each sample is ``sum_k sqrt(2 S(w_k) dw) cos(w_k t + phi_k)`` over a
    uniform frequency grid of midpoints up to ``omega_cut``, with independent
    uniform phases; a modulation envelope, when given, scales each term by
    A(w_k, t). Deterministic for a fixed seed. The cutoff must capture at
    least ``energy_fraction`` of the one-sided spectral energy (checked
    numerically; a zero-energy spectrum trivially passes and yields zeros).
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("grid must be non-empty")
    if count < 1:
        raise ValueError("count must be at least 1")
    if n_freq < 64:
        raise ValueError(f"frequency count must be at least 64, got {n_freq}")
    total = spectral_energy(psd)
    if omega_cut is None:
        if total <= 0:
            omega_cut = 1.0
        else:
            omega_cut = cutoff_for_energy(psd, energy_fraction)
    if omega_cut <= 0:
        raise ValueError(f"cutoff frequency must be positive, got {omega_cut}")
    if total > 0:
        captured = spectral_energy(psd, omega_cut)
        if captured < energy_fraction * total * (1.0 - 1e-9):
            raise ValueError(
                f"cutoff {omega_cut} captures {captured / total:.4f} of the spectral "
                f"energy, below the required {energy_fraction}"
            )
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(count, n_freq))
    values = _synthesize_phases(psd, grid, omega_cut, n_freq, phases, mod) * CM_TO_M
    return [GroundMotion(grid=grid, values=values[i]) for i in range(count)]


def synthesize_accelerogram(
    psd: Callable[[np.ndarray], np.ndarray],
    grid,
    seed: int,
    omega_cut: Optional[float] = None,
    n_freq: int = 256,
    mod: Optional[ModulationParams] = None,
    energy_fraction: float = 0.99,
) -> GroundMotion:
    """Single-sample convenience wrapper around :func:`synthesize_ensemble`."""
    return synthesize_ensemble(psd, grid, 1, seed, omega_cut, n_freq, mod,
                               energy_fraction)[0]

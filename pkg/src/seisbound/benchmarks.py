"""Shifted/rotated benchmark functions and the convergence-count protocol.

Ten single-objective functions on the box [-100, 100]^D, each composed with
a seeded uniform shift and a seeded random orthogonal rotation so that the
optimum sits at the shift with a known value. The trial protocol runs both
optimizer variants to a relative-error threshold and reports per-seed
iteration counts and medians; non-convergence within the budget is a value,
not an error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .optimizer import minimize

__all__ = [
    "BenchmarkFunction",
    "TrialConfig",
    "TrialOutcome",
    "FUNCTION_NAMES",
    "make_benchmark",
    "evaluate",
    "convergence_trial",
    "run_comparison",
    "table_report",
]

FUNCTION_NAMES = {
    1: "Shifted and rotated Bent Cigar",
    2: "Shifted and rotated Zakharov",
    3: "Shifted and rotated Rosenbrock",
    4: "Shifted and rotated Rastrigin",
    5: "Shifted and rotated Expanded Schaffer",
    6: "Shifted and rotated Lunacek bi-Rastrigin",
    7: "Shifted and rotated Non-continuous Rastrigin",
    8: "Shifted and rotated Levy",
    9: "Hybrid: Zakharov / Rosenbrock / Rastrigin",
    10: "Hybrid: Katsuura / Ackley / Rastrigin / Schaffer / Modified Schwefel",
}


def _bent_cigar(z):
    return z[:, 0] ** 2 + 1e6 * np.sum(z[:, 1:] ** 2, axis=1)


def _zakharov(z):
    half = 0.5 * np.sum(z, axis=1)
    return np.sum(z**2, axis=1) + half**2 + half**4


def _rosenbrock(z):
    w = 2.048 / 100.0 * z + 1.0
    return np.sum(100.0 * (w[:, :-1] ** 2 - w[:, 1:]) ** 2
                  + (w[:, :-1] - 1.0) ** 2, axis=1)


def _rastrigin(z):
    w = 5.12 / 100.0 * z
    return np.sum(w**2 - 10.0 * np.cos(2.0 * np.pi * w) + 10.0, axis=1)


def _schaffer_pair(a, b):
    s = a**2 + b**2
    return 0.5 + (np.sin(np.sqrt(s)) ** 2 - 0.5) / (1.0 + 0.001 * s) ** 2


def _expanded_schaffer(z):
    rolled = np.roll(z, -1, axis=1)
    return np.sum(_schaffer_pair(z, rolled), axis=1)


def _levy(z):
    w = 1.0 + z / 4.0
    head = np.sin(np.pi * w[:, 0]) ** 2
    mid = np.sum((w[:, :-1] - 1.0) ** 2
                 * (1.0 + 10.0 * np.sin(np.pi * w[:, :-1] + 1.0) ** 2), axis=1)
    tail = (w[:, -1] - 1.0) ** 2 * (1.0 + np.sin(2.0 * np.pi * w[:, -1]) ** 2)
    return head + mid + tail


def _ackley(z):
    d = z.shape[1]
    term1 = -20.0 * np.exp(-0.2 * np.sqrt(np.sum(z**2, axis=1) / d))
    term2 = -np.exp(np.sum(np.cos(2.0 * np.pi * z), axis=1) / d)
    return term1 + term2 + 20.0 + np.e


def _katsuura(z):
    w = 5.0 / 100.0 * z
    batch, d = w.shape
    powers = 2.0 ** np.arange(1, 33)
    scaled = w[:, :, None] * powers[None, None, :]
    frac = np.abs(scaled - np.round(scaled)) / powers[None, None, :]
    inner = np.sum(frac, axis=2)
    idx = np.arange(1, d + 1)
    prod = np.prod((1.0 + idx[None, :] * inner) ** (10.0 / d**1.2), axis=1)
    coef = 10.0 / d**2
    return coef * prod - coef


def _modified_schwefel(z):
    w = 10.0 * z
    d = w.shape[1]
    y = w + 4.209687462275036e2
    g_in = y * np.sin(np.sqrt(np.abs(y)))
    over = (500.0 - np.mod(y, 500.0)) * np.sin(np.sqrt(np.abs(500.0 - np.mod(y, 500.0)))) \
        - (y - 500.0) ** 2 / (10000.0 * d)
    under = (np.mod(np.abs(y), 500.0) - 500.0) * np.sin(
        np.sqrt(np.abs(np.mod(np.abs(y), 500.0) - 500.0))) \
        - (y + 500.0) ** 2 / (10000.0 * d)
    g = np.where(np.abs(y) <= 500.0, g_in, np.where(y > 500.0, over, under))
    return 4.189828872724338e2 * d - np.sum(g, axis=1)


def _lunacek(x, shift, rotation):
    d = x.shape[1]
    mu0 = 2.5
    s = 1.0 - 1.0 / (2.0 * np.sqrt(d + 20.0) - 8.2)
    mu1 = -np.sqrt((mu0**2 - 1.0) / s)
    y = 10.0 * (x - shift) / 100.0
    signs = np.where(shift >= 0.0, 1.0, -1.0)
    xhat = 2.0 * signs[None, :] * y + mu0
    z = (xhat - mu0) @ rotation.T
    term_cos = 10.0 * (d - np.sum(np.cos(2.0 * np.pi * z), axis=1))
    sph0 = np.sum((xhat - mu0) ** 2, axis=1)
    sph1 = 1.0 * d + s * np.sum((xhat - mu1) ** 2, axis=1)
    return np.minimum(sph0, sph1) + term_cos


def _noncontinuous_rastrigin(x, shift, rotation):
    dev = x - shift
    snapped = np.where(np.abs(dev) > 0.5, np.round(2.0 * dev) / 2.0, dev)
    z = snapped @ rotation.T
    return _rastrigin(z)


_HYBRID_A = (_zakharov, _rosenbrock, _rastrigin)
_HYBRID_B = (_katsuura, _ackley, _rastrigin, _expanded_schaffer, _modified_schwefel)


def _hybrid(z, parts):
    d = z.shape[1]
    block = d // len(parts)
    if block < 1:
        raise ValueError(f"dimension {d} too small for a {len(parts)}-part hybrid")
    total = np.zeros(z.shape[0])
    start = 0
    for i, func in enumerate(parts):
        stop = start + block if i < len(parts) - 1 else d
        total += func(z[:, start:stop])
        start = stop
    return total


def random_rotation(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Orthogonal matrix from the QR decomposition of a Gaussian matrix."""
    mat = rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(mat)
    return q * np.sign(np.diag(r))


@dataclass(frozen=True)
class BenchmarkFunction:
    """One shifted/rotated function with a known optimum."""

    func_id: int
    dim: int
    shift: np.ndarray
    rotation: np.ndarray
    bias: float = 0.0
    lower: float = -100.0
    upper: float = 100.0

    @property
    def name(self) -> str:
        return FUNCTION_NAMES[self.func_id]

    @property
    def optimum_value(self) -> float:
        return self.bias

    def __call__(self, x) -> np.ndarray:
        return evaluate(self, x)


def make_benchmark(func_id: int, dim: int, seed: int, bias: float = 0.0,
                   rotated: bool = True) -> BenchmarkFunction:
    """Seeded instance: uniform shift in [-80, 80]^D, random orthogonal rotation."""
    if func_id not in FUNCTION_NAMES:
        raise ValueError(f"function id must be in 1..10, got {func_id}")
    if dim < 2:
        raise ValueError("dimension must be at least 2")
    if func_id == 10 and dim < 5:
        raise ValueError("the five-part hybrid needs dimension at least 5")
    rng = np.random.default_rng(seed)
    shift = rng.uniform(-80.0, 80.0, size=dim)
    rotation = random_rotation(dim, rng) if rotated else np.eye(dim)
    return BenchmarkFunction(func_id=func_id, dim=dim, shift=shift,
                             rotation=rotation, bias=bias)


def evaluate(function: BenchmarkFunction, x) -> np.ndarray:
    """Fitness of candidate rows; scalar input gives a scalar output."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[1] != function.dim:
        raise ValueError(
            f"candidate dimension {arr.shape[1]} does not match {function.dim}"
        )
    fid = function.func_id
    if fid == 6:
        vals = _lunacek(arr, function.shift, function.rotation)
    elif fid == 7:
        vals = _noncontinuous_rastrigin(arr, function.shift, function.rotation)
    else:
        z = (arr - function.shift) @ function.rotation.T
        if fid == 1:
            vals = _bent_cigar(z)
        elif fid == 2:
            vals = _zakharov(z)
        elif fid == 3:
            vals = _rosenbrock(z)
        elif fid == 4:
            vals = _rastrigin(z)
        elif fid == 5:
            vals = _expanded_schaffer(z)
        elif fid == 8:
            vals = _levy(z)
        elif fid == 9:
            vals = _hybrid(z, _HYBRID_A)
        else:
            vals = _hybrid(z, _HYBRID_B)
    vals = vals + function.bias
    return float(vals[0]) if single else vals


@dataclass(frozen=True)
class TrialConfig:
    """Convergence-counting protocol parameters."""

    eps_tol: float
    max_iters: int = 500
    seeds: Sequence[int] = (0,)
    dim: int = 10

    def __post_init__(self):
        if not self.eps_tol > 0:
            raise ValueError("eps_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")


@dataclass(frozen=True)
class TrialOutcome:
    """Per-seed iteration counts (None marks non-convergence) and the median."""

    function: BenchmarkFunction
    variant: str
    counts: tuple
    median: Optional[float]


def _median_count(counts) -> Optional[float]:
    vals = [np.inf if c is None else float(c) for c in counts]
    med = float(np.median(vals))
    return None if np.isinf(med) else med


def convergence_trial(variant: str, function: BenchmarkFunction,
                      config: TrialConfig) -> TrialOutcome:
    """Iterations until the relative error drops below the tolerance.

    The error is |f_best - f*| / max(|f*|, 1); the reported count is the
    first generation satisfying it, or None when the budget runs out first.
    """
    scale = max(abs(function.optimum_value), 1.0)
    threshold = function.optimum_value + config.eps_tol * scale
    counts = []
    for seed in config.seeds:
        result = minimize(
            lambda x: evaluate(function, x), config.dim,
            bounds=(function.lower, function.upper), variant=variant,
            max_iters=config.max_iters, seed=seed,
            target=threshold * (1.0 - 1e-12) if threshold != 0 else 0.0,
        )
        errors = np.abs(result.history - function.optimum_value) / scale
        hit = np.nonzero(errors < config.eps_tol)[0]
        counts.append(int(hit[0]) + 1 if hit.size else None)
    return TrialOutcome(function=function, variant=variant, counts=tuple(counts),
                        median=_median_count(counts))


def run_comparison(func_ids: Sequence[int], dim: int, eps_tol: float,
                   n_seeds: int, max_iters: int = 500, instance_seed: int = 1234,
                   bias: float = 0.0) -> list[tuple[TrialOutcome, TrialOutcome]]:
    """Head-to-head trials of both variants on shared function instances."""
    config = TrialConfig(eps_tol=eps_tol, max_iters=max_iters,
                         seeds=tuple(range(n_seeds)), dim=dim)
    pairs = []
    for fid in func_ids:
        function = make_benchmark(fid, dim, seed=instance_seed + fid, bias=bias)
        pairs.append((convergence_trial("random", function, config),
                      convergence_trial("des", function, config)))
    return pairs


def table_report(results, fmt: str = "markdown") -> str:
    """Comparison table of median iteration counts ('-' marks non-convergence).

    ``results`` is either a plain list of (baseline, des) outcome pairs or a
    mapping of column-group labels to such lists (all sharing one function
    order), giving the multi-column layout of a dims-by-tolerances sweep.
    """
    if isinstance(results, dict):
        groups = list(results.items())
    else:
        groups = [("", list(results))]

    def cell(median):
        return "-" if median is None else f"{median:g}"

    header = ["Function"]
    for label, _ in groups:
        tag = f"{label} " if label else ""
        header += [f"{tag}CMA-ES", f"{tag}DES-ES"]
    n_rows = max((len(pairs) for _, pairs in groups), default=0)
    rows = []
    for i in range(n_rows):
        row = [groups[0][1][i][0].function.name]
        for _, pairs in groups:
            base, des = pairs[i]
            row += [cell(base.median), cell(des.median)]
        rows.append(row)
    if fmt == "csv":
        lines = [",".join(header)]
        lines += [",".join(f'"{c}"' if "," in c else c for c in row) for row in rows]
        return "\n".join(lines) + "\n"
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    lines = ["| " + " | ".join(h.ljust(w) for h, w in zip(header, widths)) + " |",
             "|" + "|".join("-" * (w + 2) for w in widths) + "|"]
    lines += ["| " + " | ".join(c.ljust(w) for c, w in zip(row, widths)) + " |"
              for row in rows]
    return "\n".join(lines) + "\n"

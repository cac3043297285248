"""Shared parameterization: market constants, signal, inventory penalty,
time grids, trapezoid quadrature and the cosine basis.

Every other module consumes these objects; all of them are immutable after
construction and safe to share across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

_PENALTY_KINDS = ("zero", "constant", "periodic")


@dataclass(frozen=True)
class ModelParams:
    """Price-impact and game constants.

    lambda0/lambda1 are the temporary-impact coefficients of the liquidator
    and the fast trader, kappa0/kappa1 their permanent-impact coefficients,
    alpha the fast trader's terminal inventory penalty, q0 the liquidator's
    initial position and T the horizon (days or hours, one consistent unit).
    """

    lambda0: float
    lambda1: float
    kappa0: float
    kappa1: float
    alpha: float
    q0: float
    T: float
    x0: float = 0.0
    x1: float = 0.0

    def __post_init__(self):
        for name in ("lambda0", "lambda1", "kappa0", "kappa1", "alpha", "T"):
            v = float(getattr(self, name))
            if not v > 0.0 or not math.isfinite(v):
                raise ValueError(f"{name} must be a positive finite number, got {v!r}")
        if 2.0 * self.alpha < self.kappa1:
            raise ValueError(
                "parameters must satisfy 2*alpha >= kappa1 "
                f"(got alpha={self.alpha}, kappa1={self.kappa1})"
            )

    @property
    def coupling(self) -> float:
        """Order-flow coupling constant kappa1*kappa0 / (2*lambda0*lambda1)."""
        return self.kappa1 * self.kappa0 / (2.0 * self.lambda0 * self.lambda1)

    @property
    def terminal_gain(self) -> float:
        """Terminal value -(2*alpha - kappa1)/(2*lambda1) of the feedback gain."""
        return -(2.0 * self.alpha - self.kappa1) / (2.0 * self.lambda1)


@dataclass(frozen=True)
class SignalParams:
    """Ornstein-Uhlenbeck signal and martingale price-noise parameters."""

    m0: float
    beta: float
    sigma: float
    M0: float
    sigmaM: float

    def __post_init__(self):
        if not self.beta > 0.0:
            raise ValueError(f"beta must be positive, got {self.beta!r}")
        if self.sigma < 0.0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma!r}")
        if self.sigmaM < 0.0:
            raise ValueError(f"sigmaM must be non-negative, got {self.sigmaM!r}")


@dataclass(frozen=True)
class PenaltySpec:
    """Running inventory-cost function, evaluable at any t in [0, T].

    Variants: ``zero``; ``constant`` with a level >= 0; ``periodic`` with
    value c0 * frac(t/tau)**c1, which vanishes at the start of each period
    and rises steeply towards its end.
    """

    kind: str
    value: float = 0.0
    c0: float = 0.0
    c1: float = 0.0
    tau: float = 0.0

    def __post_init__(self):
        if self.kind not in _PENALTY_KINDS:
            raise ValueError(f"unknown penalty variant {self.kind!r}")
        if self.kind == "constant" and self.value < 0.0:
            raise ValueError(f"constant penalty must be >= 0, got {self.value!r}")
        if self.kind == "periodic":
            for name in ("c0", "c1", "tau"):
                if not getattr(self, name) > 0.0:
                    raise ValueError(f"periodic penalty needs {name} > 0")

    @classmethod
    def zero(cls) -> "PenaltySpec":
        return cls("zero")

    @classmethod
    def constant(cls, value: float) -> "PenaltySpec":
        return cls("constant", value=float(value))

    @classmethod
    def periodic(cls, c0: float, c1: float, tau: float) -> "PenaltySpec":
        return cls("periodic", c0=float(c0), c1=float(c1), tau=float(tau))

    def check_horizon(self, T: float) -> None:
        """Periodic penalties require the horizon to hold whole periods."""
        if self.kind == "periodic":
            ratio = T / self.tau
            if abs(ratio - round(ratio)) > 1e-9 * max(1.0, abs(ratio)):
                raise ValueError(
                    f"horizon T={T} is not an integer multiple of the penalty period tau={self.tau}"
                )


def phi_eval(spec: PenaltySpec, t, T: float | None = None):
    """Evaluate the running penalty at time(s) t.

    Rejects t outside [0, T] (the upper check only when T is supplied).
    Period boundaries use the exact fractional part, so the periodic variant
    is 0 at multiples of tau.
    """
    arr = np.asarray(t, dtype=float)
    if np.any(arr < -1e-12):
        raise ValueError("penalty evaluated at negative time")
    if T is not None and np.any(arr > T * (1.0 + 1e-12) + 1e-12):
        raise ValueError(f"penalty evaluated beyond the horizon T={T}")
    if spec.kind == "zero":
        out = np.zeros_like(arr)
    elif spec.kind == "constant":
        out = np.full_like(arr, spec.value)
    else:
        frac = arr / spec.tau - np.floor(arr / spec.tau)
        out = spec.c0 * frac**spec.c1
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [0, T] including both endpoints."""

    T: float
    n_points: int
    nodes: np.ndarray = field(repr=False)
    dt: float

    def __len__(self) -> int:
        return self.n_points


def build_grid(T: float, n_points: int) -> TimeGrid:
    """Build a uniform grid with n_points nodes covering [0, T]."""
    if not T > 0.0:
        raise ValueError(f"horizon T must be positive, got {T!r}")
    if n_points < 2:
        raise ValueError(f"a grid needs at least 2 points, got {n_points!r}")
    nodes = np.linspace(0.0, T, n_points)
    nodes.setflags(write=False)
    return TimeGrid(T=float(T), n_points=int(n_points), nodes=nodes, dt=float(T) / (n_points - 1))


def _check_samples(samples, grid: TimeGrid) -> np.ndarray:
    arr = np.asarray(samples, dtype=float)
    if arr.shape[-1] != grid.n_points:
        raise ValueError(
            f"sample length {arr.shape[-1]} does not match grid with {grid.n_points} nodes"
        )
    return arr


def quad_integral(samples, grid: TimeGrid):
    """Composite trapezoid of samples over [0, T]; exact for affine integrands.

    Integrates along the last axis, so a (paths, nodes) matrix yields one
    value per path.
    """
    arr = _check_samples(samples, grid)
    total = arr.sum(axis=-1) - 0.5 * (arr[..., 0] + arr[..., -1])
    out = grid.dt * total
    return float(out) if np.ndim(out) == 0 else out


def cum_integral(samples, grid: TimeGrid) -> np.ndarray:
    """Cumulative trapezoid along the last axis, starting at 0."""
    arr = _check_samples(samples, grid)
    return cumulative_trapezoid(arr, dx=grid.dt, axis=-1, initial=0.0)


def inner_product(f, g, grid: TimeGrid):
    """L2 inner product of two grid-sampled functions by trapezoid quadrature."""
    fa = _check_samples(f, grid)
    ga = _check_samples(g, grid)
    return quad_integral(fa * ga, grid)


def trapz_weights(grid: TimeGrid) -> np.ndarray:
    """Quadrature weights of the composite trapezoid rule on the grid."""
    w = np.full(grid.n_points, grid.dt)
    w[0] = w[-1] = 0.5 * grid.dt
    return w


def cosine_basis(i: int, t, T: float):
    """The i-th element of the orthonormal cosine basis of L2([0, T]).

    a_1 = 1/sqrt(T) and a_i = sqrt(2/T) * cos((i-1) pi t / T) for i >= 2.
    On any uniform grid the trapezoid rule integrates every a_i with i >= 2
    to exactly zero, which keeps basis directions fuel-neutral in the
    discrete setting as well.
    """
    if i < 1:
        raise ValueError(f"basis index must be >= 1, got {i}")
    arr = np.asarray(t, dtype=float)
    if i == 1:
        out = np.full_like(arr, 1.0 / math.sqrt(T))
    else:
        out = math.sqrt(2.0 / T) * np.cos((i - 1) * math.pi * arr / T)
    if out.ndim == 0:
        return float(out)
    return out


def basis_matrix(grid: TimeGrid, n: int) -> np.ndarray:
    """Rows 1..n of the cosine basis sampled on the grid, shape (n, n_points)."""
    if n < 1:
        raise ValueError(f"basis count must be >= 1, got {n}")
    idx = np.arange(n)[:, None]
    mat = np.sqrt(2.0 / grid.T) * np.cos(idx * math.pi * grid.nodes[None, :] / grid.T)
    mat[0, :] = 1.0 / math.sqrt(grid.T)
    return mat

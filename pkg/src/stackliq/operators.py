"""Integral operators built from the feedback-gain exponentials.

Three objects live here:

* ``KernelTables`` — the two-time kernels k(t,s) = xi_minus(t) xi_plus(s)
  and g(t,s) = xi_plus(t) xi_plus(s) * ixx(min(t,s)) with
  ixx(u) = ∫_0^u xi_minus^2, plus fast O(n) appliers for the operators they
  generate.  The applier for g reproduces the symmetric-kernel trapezoid
  mat-vec row for row, so the discrete operator is self-adjoint to
  round-off; several exact identities downstream rely on that.
* ``DegenerateOperator`` — the rank-n approximation of the g-operator in the
  cosine basis together with a factorization of (I + c*Gram), which turns
  the second-kind integral equation into an n x n linear solve.
* ``SpectrumPhi0`` — the explicit eigensystem available when the running
  penalty vanishes, obtained from a transcendental equation; it powers the
  truncated-resolvent solution path used as a cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh, lu_factor, lu_solve

from .errors import NumericalError
from .model import ModelParams, TimeGrid, basis_matrix, cum_integral, trapz_weights
from .riccati import RiccatiSolution


class KernelTables:
    """Grid-sampled kernel data derived from a Riccati solution."""

    def __init__(self, riccati: RiccatiSolution):
        self.riccati = riccati
        self.grid = riccati.grid
        self.weights = trapz_weights(self.grid)
        self.weights.setflags(write=False)

    @property
    def r1(self) -> np.ndarray:
        return self.riccati.r1

    @property
    def xi_plus(self) -> np.ndarray:
        return self.riccati.xi_plus

    @property
    def xi_minus(self) -> np.ndarray:
        return self.riccati.xi_minus

    @property
    def ixx(self) -> np.ndarray:
        return self.riccati.cum_xi_minus_sq

    def _interp(self, values: np.ndarray, t) -> np.ndarray:
        return np.interp(np.asarray(t, dtype=float), self.grid.nodes, values)

    def kernel_K(self, t, s):
        """k(t, s) = xi_minus(t) * xi_plus(s); factors interpolated linearly
        for off-node queries (production paths stay on-node)."""
        return self._interp(self.xi_minus, t) * self._interp(self.xi_plus, s)

    def kernel_G(self, t, s):
        """g(t, s) = xi_plus(t) * xi_plus(s) * ixx(min(t, s)); symmetric,
        positive, and zero whenever either argument is zero."""
        tt = np.asarray(t, dtype=float)
        ss = np.asarray(s, dtype=float)
        return (
            self._interp(self.xi_plus, tt)
            * self._interp(self.xi_plus, ss)
            * self._interp(self.ixx, np.minimum(tt, ss))
        )

    def g_matrix(self, stride: int = 1) -> tuple[np.ndarray, np.ndarray]:
        """Dense g(t, s) on every stride-th node; returns (times, matrix)."""
        t = self.grid.nodes[::stride]
        xi = self.xi_plus[::stride]
        ixx = self.ixx[::stride]
        mat = np.outer(xi, xi) * np.minimum.outer(ixx, ixx)
        return t, mat


def apply_G(tables: KernelTables, psi) -> np.ndarray:
    """Apply the symmetric operator with kernel g by trapezoid quadrature.

    Uses the separable form of the kernel, which costs O(n) per input and
    agrees exactly with the dense symmetric mat-vec.  Output vanishes at
    t = 0.  Accepts (..., nodes) batches.
    """
    grid = tables.grid
    arr = np.asarray(psi, dtype=float)
    if arr.shape[-1] != grid.n_points:
        raise ValueError("input not sampled on the operator grid")
    f = tables.xi_plus * arr
    s = cum_integral(f, grid)
    u = cum_integral(f * tables.ixx, grid)
    return tables.xi_plus * (u + tables.ixx * (s[..., -1:] - s))


def apply_K1_star(tables: KernelTables, psi) -> np.ndarray:
    """Apply the adjoint flow operator: (K1* psi)(t) = ∫_t^T k(t,s) psi(s) ds.

    Vanishes at t = T by construction.  Accepts (..., nodes) batches.
    """
    grid = tables.grid
    arr = np.asarray(psi, dtype=float)
    if arr.shape[-1] != grid.n_points:
        raise ValueError("input not sampled on the operator grid")
    c = cum_integral(tables.xi_plus * arr, grid)
    return tables.xi_minus * (c[..., -1:] - c)


def apply_S(tables: KernelTables, params: ModelParams, psi) -> np.ndarray:
    """Apply the source operator

        (S psi)(t) = (1/(2 lambda0)) ∫_0^t psi + (kappa1/(4 lambda1 lambda0)) (G psi)(t),

    which maps the expected signal into the forcing of the leader's
    integral equation.
    """
    grid = tables.grid
    arr = np.asarray(psi, dtype=float)
    if arr.shape[-1] != grid.n_points:
        raise ValueError("input not sampled on the operator grid")
    lead = cum_integral(arr, grid) / (2.0 * params.lambda0)
    mix = params.kappa1 / (4.0 * params.lambda1 * params.lambda0)
    return lead + mix * apply_G(tables, arr)


@dataclass(frozen=True)
class DegenerateOperator:
    """Rank-n cosine-basis approximation of the g-operator.

    ``gram[i, j] = <a_i, G a_j>`` and ``lu`` factorizes (I_n + c * gram)
    with partial pivoting, enough to apply its inverse.
    """

    n: int
    c: float
    grid: TimeGrid
    a_samples: np.ndarray = field(repr=False)
    b_samples: np.ndarray = field(repr=False)
    gram: np.ndarray = field(repr=False)
    lu: tuple = field(repr=False)
    _wb: np.ndarray = field(repr=False)

    def gram_eigenvalues(self) -> np.ndarray:
        """Eigenvalues of the Gram matrix, descending."""
        vals = eigh(self.gram, eigvals_only=True)
        return vals[::-1]


def build_degenerate(tables: KernelTables, params: ModelParams, n: int) -> DegenerateOperator:
    """Assemble the rank-n approximation on the tables' grid.

    Requires at least 10 nodes per period of the highest cosine mode; the
    images b_i = G a_i come from apply_G and the Gram entries from trapezoid
    inner products, so the matrix inherits the discrete self-adjointness of
    the applier.
    """
    grid = tables.grid
    if n < 1:
        raise ValueError(f"rank must be >= 1, got {n}")
    if n > 1 and 2.0 * (grid.n_points - 1) / (n - 1) < 10.0:
        raise ValueError(
            f"grid with {grid.n_points} nodes under-resolves basis mode {n}; "
            "need >= 10 nodes per cosine period"
        )
    a = basis_matrix(grid, n)
    b = apply_G(tables, a)
    w = tables.weights
    gram = (a * w) @ b.T
    c = params.coupling

    sym_err = float(np.max(np.abs(gram - gram.T)))
    if sym_err > 1e-6:
        raise NumericalError(f"Gram matrix asymmetry {sym_err:.3e} exceeds quadrature tolerance")
    min_eig = float(eigh(gram, eigvals_only=True, subset_by_index=(0, 0))[0])
    if min_eig < -1e-8:
        raise NumericalError(f"Gram matrix has eigenvalue {min_eig:.3e} < -1e-8")

    system = np.eye(n) + c * gram
    lu = lu_factor(system)
    diag = np.abs(np.diag(lu[0]))
    if not np.all(np.isfinite(lu[0])) or np.any(diag == 0.0):
        raise NumericalError(
            f"(I + c*Gram) is singular at rank n={n}; increase the rank and retry"
        )
    wb = b * w
    for m in (a, b, gram, wb):
        m.setflags(write=False)
    return DegenerateOperator(
        n=n, c=c, grid=grid, a_samples=a, b_samples=b, gram=gram, lu=lu, _wb=wb
    )


def apply_Gn(op: DegenerateOperator, psi) -> np.ndarray:
    """Apply the rank-n operator: sum_i a_i <b_i, psi>."""
    arr = np.asarray(psi, dtype=float)
    proj = arr @ op._wb.T
    return proj @ op.a_samples


def apply_Rn(op: DegenerateOperator, psi) -> np.ndarray:
    """Apply (I + c * G_n)^(-1) through the factorized n x n system:

        psi - c * sum_ij (I + c*Gram)^(-1)_ij <psi, b_j> a_i.
    """
    arr = np.asarray(psi, dtype=float)
    proj = arr @ op._wb.T
    flat = proj.reshape(-1, op.n)
    gamma = lu_solve(op.lu, flat.T).T.reshape(proj.shape)
    return arr - op.c * (gamma @ op.a_samples)


@dataclass(frozen=True)
class SpectrumPhi0:
    """Explicit eigensystem of the g-operator for a vanishing penalty.

    roots[k] lies strictly in (k*pi, (k+1)*pi) and
    eigenvalues[k] = T^2 / roots[k]^2 decreases strictly; the associated
    eigenfunctions are unit-norm sine modes sin(roots[k] t / T).
    """

    T: float
    slope: float
    roots: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)

    @property
    def n_terms(self) -> int:
        return len(self.roots)

    def eigenfunctions(self, t) -> np.ndarray:
        """Sample the first n_terms unit-norm eigenfunctions, shape (n_terms, len(t))."""
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        z = self.roots[:, None]
        norms = np.sqrt((self.T / (4.0 * self.roots)) * (2.0 * self.roots - np.sin(2.0 * self.roots)))
        return np.sin(z * tt[None, :] / self.T) / norms[:, None]


def _root_in_interval(k: int, slope_T: float) -> float:
    """Root of z*cos(z) + slope_T*sin(z) = 0 strictly inside ((k-1)pi, k*pi)."""
    lo = (k - 1) * math.pi
    hi = k * math.pi
    eps = 1e-9 * max(1.0, hi)

    def g(z: float) -> float:
        return z * math.cos(z) + slope_T * math.sin(z)

    a, b = lo + eps, hi - eps
    fa, fb = g(a), g(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0.0:
        raise NumericalError(
            f"failed to bracket spectral root {k}; parameters violate positivity assumptions"
        )
    for _ in range(48):
        mid = 0.5 * (a + b)
        fm = g(mid)
        if fm == 0.0:
            return mid
        if fa * fm < 0.0:
            b, fb = mid, fm
        else:
            a, fa = mid, fm
    z = 0.5 * (a + b)
    # A few safeguarded Newton polish steps down to ~1e-12.
    for _ in range(6):
        dg = math.cos(z) - z * math.sin(z) + slope_T * math.cos(z)
        if dg == 0.0:
            break
        step = g(z) / dg
        cand = z - step
        if not (a < cand < b):
            cand = 0.5 * (a + b)
        if abs(cand - z) < 1e-13 * max(1.0, z):
            z = cand
            break
        z = cand
    return z


def spectrum_phi0(params: ModelParams, n_terms: int) -> SpectrumPhi0:
    """Solve the transcendental equation cot(z) = -((2a-k1)/(2 l1)) T/z on
    the first n_terms bracketing intervals.  The caller asserts the running
    penalty is identically zero.

    The Robin coefficient equals the magnitude of the terminal feedback
    gain: the eigen-identity forces psi'(T) = r1(T) psi(T), and the
    eigen-residual oracle pins the factor of 2 in the denominator.
    """
    if n_terms < 1:
        raise ValueError(f"need at least one spectral term, got {n_terms}")
    slope = (2.0 * params.alpha - params.kappa1) / (2.0 * params.lambda1)
    slope_T = slope * params.T
    if slope_T == 0.0:
        roots = (np.arange(1, n_terms + 1) - 0.5) * math.pi
    else:
        roots = np.array([_root_in_interval(k, slope_T) for k in range(1, n_terms + 1)])
    eigenvalues = params.T**2 / roots**2
    roots.setflags(write=False)
    eigenvalues.setflags(write=False)
    return SpectrumPhi0(T=params.T, slope=slope, roots=roots, eigenvalues=eigenvalues)


def _resolvent_weights(spec: SpectrumPhi0, c: float) -> np.ndarray:
    cz = c * spec.eigenvalues
    return cz**2 / (1.0 + cz)


def resolvent_kernel_truncated(
    spec: SpectrumPhi0, tables: KernelTables, params: ModelParams, t, s
):
    """Kernel of the correction part of (I + c*G)^(-1):

        R(t,s) ~= -c*g(t,s) + sum_k (c z_k)^2/(1 + c z_k) psi_k(t) psi_k(s)

    truncated at the terms fixed when ``spec`` was built.
    """
    c = params.coupling
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    ss = np.atleast_1d(np.asarray(s, dtype=float))
    w = _resolvent_weights(spec, c)
    pt = spec.eigenfunctions(tt)
    ps = spec.eigenfunctions(ss)
    series = (w[:, None] * pt).T @ ps
    out = -c * tables.kernel_G(tt[:, None], ss[None, :]) + series
    if np.ndim(t) == 0 and np.ndim(s) == 0:
        return float(out[0, 0])
    return out


def apply_resolvent(
    spec: SpectrumPhi0,
    tables: KernelTables,
    params: ModelParams,
    psi,
    eig_samples: np.ndarray | None = None,
) -> np.ndarray:
    """Apply (I + c*G)^(-1) through the truncated eigen-series.

    Passing precomputed ``eig_samples`` (from ``spec.eigenfunctions`` on the
    tables' grid) avoids resampling when the operator is applied repeatedly.
    """
    c = params.coupling
    grid = tables.grid
    arr = np.asarray(psi, dtype=float)
    if eig_samples is None:
        eig_samples = spec.eigenfunctions(grid.nodes)
    w = _resolvent_weights(spec, c)
    coeffs = arr @ (eig_samples * tables.weights).T
    series = (coeffs * w) @ eig_samples
    return arr - c * apply_G(tables, arr) + series

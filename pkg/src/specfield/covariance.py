"""Increment covariance kernels by quadrature, plus closed-form oracles.

The kernel of a field with stationary increments is
K(x, x') = int (e^{i x.xi} - 1)(e^{-i x'.xi} - 1) f(xi) dxi,
approximated here as a weighted sum over a symmetric dyadic grid.  Grid
symmetry makes the imaginary part cancel; it is computed and checked rather
than assumed, since a nonzero value is the signature of a broken grid.

Closed forms for the power-law (fractional-Brownian) family live here too,
both as test oracles and as the input to the exact-factorization sampler.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import FrequencyGrid
from .spectral import (DominationCertificate, SpectralDensity, difference_density,
                       require_admissible)

# Tolerance for the quadrature imaginary part: |Im| <= REL * |Re| + ABS.
IMAG_REL_TOL = 1e-10
IMAG_ABS_TOL = 1e-14

# Eigenvalue floor scale: quadrature matrices may dip this far below zero.
PSD_NOISE_FACTOR = 1e-8


class GridSymmetryError(RuntimeError):
    """The quadrature imaginary part exceeded its cancellation budget."""


def _as_points(points, dimension: int | None = None) -> np.ndarray:
    """Coerce to an (n, d) float array; scalars and flat lists mean d = 1."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 0:
        pts = pts.reshape(1, 1)
    elif pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise ValueError(f"points must be an (n, d) array, got shape {pts.shape}")
    if dimension is not None and pts.shape[1] != dimension:
        raise ValueError(f"points have dimension {pts.shape[1]}, expected {dimension}")
    return pts


def _checked_real(values: np.ndarray, context: str) -> np.ndarray:
    im = np.abs(values.imag)
    budget = IMAG_REL_TOL * np.abs(values.real) + IMAG_ABS_TOL
    if np.any(im > budget):
        worst = float(np.max(im - budget))
        raise GridSymmetryError(
            f"imaginary part failed to cancel in {context} (excess {worst:.3e}); "
            "the frequency grid is not symmetric under negation")
    return np.ascontiguousarray(values.real)


def _phase_factors(points: np.ndarray, grid: FrequencyGrid) -> np.ndarray:
    """(n, m) complex array of e^{i x.xi} - 1 over points x and grid nodes xi."""
    return np.exp(1j * points @ grid.nodes.T) - 1.0


def increment_covariance(density: SpectralDensity, x, x_prime,
                         grid: FrequencyGrid) -> float:
    """Quadrature value of the increment kernel at a single pair of points."""
    require_admissible(density, grid)
    pts = _as_points([np.atleast_1d(x), np.atleast_1d(x_prime)], grid.dimension)
    ph = _phase_factors(pts, grid)
    weighted = grid.weights * density.evaluate(grid.nodes)
    value = np.dot(ph[0] * weighted, np.conj(ph[1]))
    return float(_checked_real(np.asarray([value]), "increment covariance")[0])


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    """Dense increment-covariance matrix over a list of spatial points.

    Symmetry is exact by construction (each pair computed once).  The
    eigenvalue floor (>= -PSD_NOISE_FACTOR * max diagonal) is enforced where
    matrices are factorized, not eagerly here: an eigendecomposition per
    construction would dominate the runtime of large closed-form matrices.
    """

    points: np.ndarray          # (n, d)
    entries: np.ndarray         # (n, n) real
    density_label: str
    grid_label: str

    def __post_init__(self):
        pts = _as_points(self.points)
        entries = np.asarray(self.entries, dtype=float)
        n = pts.shape[0]
        if entries.shape != (n, n):
            raise ValueError(f"entries shape {entries.shape} does not match {n} points")
        if np.unique(pts, axis=0).shape[0] != n:
            raise ValueError("spatial points must be distinct")
        if not np.all(np.isfinite(entries)):
            raise ValueError("covariance entries must be finite")
        if not np.array_equal(entries, entries.T):
            raise ValueError("covariance entries are not exactly symmetric")
        if np.any(np.diag(entries) < 0):
            raise ValueError("covariance diagonal must be nonnegative")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "entries", entries)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @property
    def origin_index(self) -> int | None:
        """Index of the origin among the points, or None."""
        hits = np.flatnonzero(np.all(self.points == 0.0, axis=1))
        return int(hits[0]) if hits.size else None

    @property
    def psd_floor(self) -> float:
        diag_max = float(np.max(np.diag(self.entries), initial=0.0))
        return PSD_NOISE_FACTOR * diag_max

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.entries)[0])


def covariance_matrix(density: SpectralDensity, points,
                      grid: FrequencyGrid) -> CovarianceMatrix:
    """Assemble the quadrature covariance matrix on a point list.

    The lower triangle is mirrored from the upper one, so symmetry is exact
    rather than a float coincidence.
    """
    require_admissible(density, grid)
    pts = _as_points(points, grid.dimension)
    ph = _phase_factors(pts, grid)
    weighted = grid.weights * density.evaluate(grid.nodes)
    raw = _checked_real((ph * weighted) @ np.conj(ph.T), "covariance matrix")
    upper = np.triu(raw)
    sym = upper + np.triu(raw, 1).T
    return CovarianceMatrix(pts, sym, density.label, grid.grid_id)


def coupling_covariance(density_x: SpectralDensity, density_y: SpectralDensity,
                        p, p_prime, grid: FrequencyGrid,
                        certificate: DominationCertificate) -> float:
    """Extended-field kernel for points p = (x, y1, y2).

    Value: y1*y1' * K_{f_X}(x, x') + y2*y2' * K_{f_Y - f_X}(x, x').  The second
    term is one quadrature over the clamped difference density, never a
    difference of two quadratures (which would cancel catastrophically for
    nearly equal densities).  Requires a holds certificate at constant 1.
    """
    if certificate is None:
        raise ValueError("coupling_covariance requires a domination certificate")
    if certificate.constant != 1.0:
        raise ValueError("the extended-field kernel is defined for constant 1; "
                         f"certificate carries C={certificate.constant}")
    residual = difference_density(density_y, density_x, 1.0, certificate)
    x, y1, y2 = p
    x_prime, y1p, y2p = p_prime
    total = 0.0
    if y1 * y1p != 0.0:
        total += y1 * y1p * increment_covariance(density_x, x, x_prime, grid)
    if y2 * y2p != 0.0:
        total += y2 * y2p * increment_covariance(residual, x, x_prime, grid)
    return total


# --------------------------------------------------------------------------
# closed forms for the power-law family


def power_law_increment_covariance(x, x_prime, hurst: float) -> np.ndarray:
    """(|x|^{2H} + |x'|^{2H} - |x - x'|^{2H}) / 2, the unit-variance closed form.

    Broadcasts over (n, d) point arrays; scalars mean single d = 1 points.
    """
    a = _as_points(x)
    b = _as_points(x_prime)
    ra = np.sqrt(np.sum(a ** 2, axis=1))
    rb = np.sqrt(np.sum(b ** 2, axis=1))
    rd = np.sqrt(np.sum((a - b) ** 2, axis=1))
    h2 = 2.0 * hurst
    out = 0.5 * (ra ** h2 + rb ** h2 - rd ** h2)
    return out if out.size > 1 else float(out[0])


def power_law_covariance_matrix(points, hurst: float) -> CovarianceMatrix:
    """Closed-form covariance matrix of the unit-variance power-law field."""
    pts = _as_points(points)
    r = np.sqrt(np.sum(pts ** 2, axis=1))
    diff = np.sqrt(np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=2))
    h2 = 2.0 * hurst
    raw = 0.5 * (r[:, None] ** h2 + r[None, :] ** h2 - diff ** h2)
    sym = np.triu(raw) + np.triu(raw, 1).T
    return CovarianceMatrix(pts, sym, f"power-law-closed-form(H={hurst!r})",
                            "closed-form")

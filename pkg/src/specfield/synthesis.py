"""Field samplers.

Three ways to realize a Gaussian field with stationary increments on a grid:

- SpectralSynthesizer: the direct discretization of the harmonizable
  representation, sum over frequency nodes of (e^{i x.xi} - 1) sqrt(f w) zeta
  with Hermitian complex noise.  Its distribution matches the quadrature
  covariance matrix exactly, which is what makes the next sampler an oracle
  for it.
- ExactFieldSampler: factorizes a covariance matrix (jittered Cholesky) and
  maps standard normals through the factor.
- CouplingSynthesizer: the domination-based decomposition; draws the
  dominated field and the residual field from disjoint streams and assembles
  the representative of the dominating law as C^{-1/2} x1 + x2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .covariance import CovarianceMatrix
from .grids import PointSet, SpatialGrid
from .rng import hermitian_noise, substream
from .spectral import (DominationCertificate, SpectralDensity, difference_density,
                       require_admissible)

# Budget for the synthesized imaginary part, relative to the sample sup.
IMAG_SAMPLE_TOL = 1e-12

# Jitter multipliers tried before declaring a covariance matrix indefinite.
JITTER_LADDER = (1, 2, 4, 8)


class RealityError(RuntimeError):
    """A synthesized sample came out measurably complex (broken noise pairing)."""


class IndefiniteMatrixError(RuntimeError):
    """Covariance factorization failed even after jitter escalation."""


@dataclass(frozen=True, eq=False)
class FieldSample:
    """One realization of a field on a set of spatial points, with provenance."""

    grid: SpatialGrid | PointSet
    values: np.ndarray
    master_seed: int
    stream_id: int
    method: str                 # "spectral" | "exact"
    density_label: str

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.size,):
            raise ValueError(f"values shape {values.shape} does not match grid size "
                             f"{self.grid.size}")
        if not np.all(np.isfinite(values)):
            raise ValueError("sample values must be finite")
        oi = self.grid.origin_index
        if oi is not None and values[oi] != 0.0:
            raise ValueError(f"value at the origin must be exactly zero, got {values[oi]!r}")
        object.__setattr__(self, "values", values)

    @property
    def size(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class CouplingSample:
    """Joint realization (x1, x2, y_rep) with y_rep = C^{-1/2} x1 + x2 pointwise."""

    x1: FieldSample
    x2: FieldSample
    y_rep: FieldSample
    constant: float

    def __post_init__(self):
        if self.x1.stream_id == self.x2.stream_id:
            raise ValueError("x1 and x2 must come from disjoint noise streams")
        expected = self.constant ** -0.5 * self.x1.values + self.x2.values
        if not np.array_equal(self.y_rep.values, expected):
            raise ValueError("y_rep is not the exact pointwise combination of x1 and x2")


class SpectralSynthesizer:
    """Precomputes the (points x nodes) synthesis matrix for repeated sampling.

    Each sample is one matrix-vector product against fresh Hermitian noise;
    the per-replica product keeps results independent of how many replicas are
    drawn and in what order.
    """

    def __init__(self, density: SpectralDensity, frequency_grid,
                 spatial_grid: SpatialGrid):
        if density.dimension != frequency_grid.dimension:
            raise ValueError("density and frequency grid dimensions differ")
        if density.dimension != spatial_grid.dimension:
            raise ValueError("density and spatial grid dimensions differ")
        require_admissible(density, frequency_grid)
        self.density = density
        self.frequency_grid = frequency_grid
        self.spatial_grid = spatial_grid
        amplitude = np.sqrt(frequency_grid.weights * density.evaluate(frequency_grid.nodes))
        phases = np.exp(1j * spatial_grid.points @ frequency_grid.nodes.T) - 1.0
        self._matrix = phases * amplitude
        # largest per-point standard deviation, the absolute anchor for the
        # reality budget (a single realization can be arbitrarily close to zero)
        self._scale = float(np.sqrt(np.max(np.sum(np.abs(self._matrix) ** 2, axis=1),
                                           initial=0.0)))

    def sample(self, master_seed: int, stream_id: int) -> FieldSample:
        zeta = hermitian_noise(self.frequency_grid, master_seed, stream_id)
        raw = self._matrix @ zeta
        sup = float(np.max(np.abs(raw.real), initial=0.0))
        worst_imag = float(np.max(np.abs(raw.imag), initial=0.0))
        if worst_imag > IMAG_SAMPLE_TOL * max(sup, self._scale):
            raise RealityError(
                f"imaginary residual {worst_imag:.3e} exceeds {IMAG_SAMPLE_TOL} x "
                f"max(sup {sup:.3e}, scale {self._scale:.3e}); "
                "Hermitian pairing is broken")
        return FieldSample(self.spatial_grid, np.ascontiguousarray(raw.real),
                           master_seed, stream_id, "spectral", self.density.label)


def synthesize(density: SpectralDensity, frequency_grid, spatial_grid: SpatialGrid,
               master_seed: int, stream_id: int) -> FieldSample:
    """One-off spectral sample; build a SpectralSynthesizer for replica loops."""
    return SpectralSynthesizer(density, frequency_grid, spatial_grid).sample(
        master_seed, stream_id)


def _jittered_factor(matrix: CovarianceMatrix) -> np.ndarray:
    """Lower Cholesky factor of entries + jitter*I with escalation.

    Starts at the matrix's PSD noise floor and doubles up to
    len(JITTER_LADDER)-1 times; a matrix that resists all of them is reported
    indefinite rather than silently smoothed further.
    """
    entries = matrix.entries
    if not np.any(entries):
        return np.zeros_like(entries)
    base = matrix.psd_floor
    for mult in JITTER_LADDER:
        jittered = entries + (base * mult) * np.eye(matrix.size)
        try:
            return np.linalg.cholesky(jittered)
        except np.linalg.LinAlgError:
            continue
    raise IndefiniteMatrixError(
        f"covariance matrix is not positive semidefinite within jitter "
        f"{base * JITTER_LADDER[-1]:.3e} (source {matrix.density_label})")


class ExactFieldSampler:
    """Samples from a covariance matrix through a cached jittered factorization.

    The independent oracle for the spectral synthesizer: the two target the
    same matrix through unrelated mechanisms.
    """

    def __init__(self, matrix: CovarianceMatrix, grid=None):
        if grid is None:
            grid = PointSet(matrix.dimension, "matrix-points", matrix.points)
        elif not np.array_equal(np.asarray(grid.points, dtype=float), matrix.points):
            raise ValueError("grid points do not match the covariance matrix points")
        self.matrix = matrix
        self.grid = grid
        self._factor = _jittered_factor(matrix)

    def sample(self, master_seed: int, stream_id: int) -> FieldSample:
        draws = substream(master_seed, stream_id).standard_normal(self.matrix.size)
        values = self._factor @ draws
        oi = self.grid.origin_index
        if oi is not None:
            values[oi] = 0.0
        return FieldSample(self.grid, values, master_seed, stream_id, "exact",
                           self.matrix.density_label)


def sample_exact(matrix: CovarianceMatrix, master_seed: int, stream_id: int,
                 grid=None) -> FieldSample:
    """One-off exact sample; build an ExactFieldSampler for replica loops."""
    return ExactFieldSampler(matrix, grid).sample(master_seed, stream_id)


class CouplingSynthesizer:
    """Draws (x1, x2, y_rep) replicas of the domination-based decomposition.

    x1 has the dominated density f_X, x2 the residual density f_Y - f_X/C,
    from disjoint streams (2k, 2k+1) for replicate k; y_rep = C^{-1/2} x1 + x2
    then carries the dominating law up to quadrature accuracy.
    """

    def __init__(self, density_x: SpectralDensity, density_y: SpectralDensity,
                 constant: float, certificate: DominationCertificate,
                 frequency_grid, spatial_grid: SpatialGrid):
        residual = difference_density(density_y, density_x, constant, certificate)
        self.density_x = density_x
        self.density_y = density_y
        self.constant = float(constant)
        self.certificate = certificate
        self._synth_x = SpectralSynthesizer(density_x, frequency_grid, spatial_grid)
        self._synth_residual = SpectralSynthesizer(residual, frequency_grid, spatial_grid)
        self._inv_root = self.constant ** -0.5
        self._label = (f"coupled(x={density_x.label}, y={density_y.label}, "
                       f"C={self.constant!r})")

    @property
    def spatial_grid(self) -> SpatialGrid:
        return self._synth_x.spatial_grid

    def sample(self, master_seed: int, replicate_id: int) -> CouplingSample:
        x1 = self._synth_x.sample(master_seed, 2 * replicate_id)
        x2 = self._synth_residual.sample(master_seed, 2 * replicate_id + 1)
        y_values = self._inv_root * x1.values + x2.values
        y_rep = FieldSample(self.spatial_grid, y_values, master_seed,
                            2 * replicate_id, "spectral", self._label)
        return CouplingSample(x1, x2, y_rep, self.constant)


def sample_coupling(density_x: SpectralDensity, density_y: SpectralDensity,
                    constant: float, certificate: DominationCertificate,
                    frequency_grid, spatial_grid: SpatialGrid,
                    master_seed: int, replicate_id: int) -> CouplingSample:
    """One-off coupling replica; build a CouplingSynthesizer for loops."""
    return CouplingSynthesizer(density_x, density_y, constant, certificate,
                               frequency_grid, spatial_grid).sample(master_seed,
                                                                    replicate_id)

"""Discrete norms on sampled fields.

The balls {g : ||g|| <= r} of these norms are the convex symmetric sets the
Anderson-type inequalities speak about.  Both norms are maxima of finitely
many |linear functional| terms, so homogeneity, symmetry, the triangle
inequality and ball convexity hold exactly (up to float roundoff), not just
in the continuum limit.  The discrete values are the definition used
throughout verification; no continuum convergence is claimed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import SpatialGrid

# Above this many point pairs the Holder norm switches from all pairs to the
# deterministic dyadic-offset subset.
DEFAULT_PAIR_BUDGET = 1 << 22


def _values_of(sample_or_values) -> np.ndarray:
    values = getattr(sample_or_values, "values", sample_or_values)
    return np.asarray(values, dtype=float)


def _grid_of(sample_or_values, grid):
    if grid is None:
        grid = getattr(sample_or_values, "grid", None)
    if grid is None:
        raise ValueError("a grid is required: pass a FieldSample or supply grid=")
    return grid


@dataclass(frozen=True)
class SupNorm:
    """max |g(x)| over the grid points."""

    kind: str = "sup"

    def __call__(self, sample_or_values, grid=None) -> float:
        values = _values_of(sample_or_values)
        return float(np.max(np.abs(values), initial=0.0))

    @property
    def label(self) -> str:
        return "sup"


@dataclass(frozen=True)
class HolderNorm:
    """sup norm plus the largest increment ratio |g(x)-g(y)| / |x-y|^alpha.

    The ratio is maximized over all point pairs when size^2 fits the budget,
    otherwise over the deterministic dyadic-offset pairs (i, i + 2^k along
    each grid axis) — a documented fixed subset, so values are reproducible
    and still dominate the sup norm.
    """

    alpha: float
    pair_budget: int = DEFAULT_PAIR_BUDGET
    kind: str = "holder"

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.pair_budget < 4:
            raise ValueError("pair budget too small to form any pair")

    @property
    def label(self) -> str:
        return f"holder({self.alpha!r})"

    def __call__(self, sample_or_values, grid=None) -> float:
        values = _values_of(sample_or_values)
        grid = _grid_of(sample_or_values, grid)
        sup = float(np.max(np.abs(values), initial=0.0))
        n = values.shape[0]
        if n < 2:
            return sup
        if n * n <= self.pair_budget:
            ratio = self._full_pair_ratio(values, np.asarray(grid.points, dtype=float))
        else:
            ratio = self._dyadic_pair_ratio(values, grid)
        return sup + ratio

    def _full_pair_ratio(self, values: np.ndarray, points: np.ndarray) -> float:
        diffs = np.abs(values[:, None] - values[None, :])
        seps = np.sqrt(np.sum((points[:, None, :] - points[None, :, :]) ** 2, axis=2))
        iu = np.triu_indices(values.shape[0], k=1)
        return float(np.max(diffs[iu] / seps[iu] ** self.alpha, initial=0.0))

    def _dyadic_pair_ratio(self, values: np.ndarray, grid) -> float:
        if not isinstance(grid, SpatialGrid):
            raise ValueError("dyadic pair subsampling needs a uniform grid; "
                             "raise pair_budget for arbitrary point sets")
        spacing = grid.spacing
        best = 0.0
        if grid.dimension == 1:
            lag = 1
            while lag < grid.resolution:
                d = np.max(np.abs(values[lag:] - values[:-lag]))
                best = max(best, float(d) / (lag * spacing) ** self.alpha)
                lag *= 2
        else:
            square = values.reshape(grid.resolution, grid.resolution)
            lag = 1
            while lag < grid.resolution:
                sep = (lag * spacing) ** self.alpha
                d0 = np.max(np.abs(square[lag:, :] - square[:-lag, :]))
                d1 = np.max(np.abs(square[:, lag:] - square[:, :-lag]))
                best = max(best, float(d0) / sep, float(d1) / sep)
                lag *= 2
        return best


def sup_norm(sample_or_values, grid=None) -> float:
    return SupNorm()(sample_or_values, grid)


def holder_norm(sample_or_values, alpha: float, grid=None,
                pair_budget: int = DEFAULT_PAIR_BUDGET) -> float:
    return HolderNorm(alpha, pair_budget)(sample_or_values, grid)


def norm_functional(kind: str, alpha: float | None = None,
                    pair_budget: int = DEFAULT_PAIR_BUDGET):
    """Catalog lookup used by config parsing."""
    if kind == "sup":
        return SupNorm()
    if kind == "holder":
        if alpha is None:
            raise ValueError("holder norm requires alpha")
        return HolderNorm(alpha, pair_budget)
    raise ValueError(f"unknown norm kind {kind!r} (expected sup or holder)")

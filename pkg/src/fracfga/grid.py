"""Uniform periodic grids and complex fields sampled on them."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np

__all__ = ["Grid", "WaveField", "GridMismatchError", "ResolutionError"]


class GridMismatchError(ValueError):
    pass


class ResolutionError(ValueError):
    """Grid too coarse to resolve O(eps) oscillations."""


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Uniform grid on a box, left-closed and right-open (periodic layout).

    ``x_j = a + j * (b - a) / n`` for ``j = 0..n-1`` in every dimension.
    """

    box: Tuple[Tuple[float, float], ...]
    n: Tuple[int, ...]

    def __post_init__(self):
        box = tuple((float(a), float(b)) for a, b in self.box)
        n = tuple(int(k) for k in self.n)
        if len(box) != len(n) or len(n) not in (1, 2):
            raise ValueError("grid must be 1- or 2-dimensional with one box interval per axis")
        for (a, b), k in zip(box, n):
            if not b > a:
                raise ValueError(f"empty interval ({a}, {b})")
            if not _is_pow2(k):
                raise ValueError(f"sample counts must be powers of two, got {k}")
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "n", n)

    @classmethod
    def uniform(cls, box: Sequence[Tuple[float, float]], spacing: float) -> "Grid":
        """Grid with the given spacing; ``(b - a) / spacing`` must be a power of two."""
        n = []
        for a, b in box:
            k = int(round((b - a) / spacing))
            if not np.isclose(k * spacing, b - a, rtol=1e-12, atol=0):
                raise ValueError(f"spacing {spacing} does not divide ({a}, {b})")
            n.append(k)
        return cls(tuple(box), tuple(n))

    @property
    def dim(self) -> int:
        return len(self.n)

    @property
    def spacing(self) -> Tuple[float, ...]:
        return tuple((b - a) / k for (a, b), k in zip(self.box, self.n))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def axes(self) -> Tuple[np.ndarray, ...]:
        return tuple(a + np.arange(k) * h for (a, _), k, h in zip(self.box, self.n, self.spacing))

    def mesh(self) -> Tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    def points(self) -> np.ndarray:
        """All grid points as an ``(N, d)`` array in row-major order."""
        return np.stack([m.ravel() for m in self.mesh()], axis=-1)

    def wavenumbers(self) -> Tuple[np.ndarray, ...]:
        """Angular wavenumbers ``2 pi m / L`` in FFT order, per axis."""
        return tuple(2.0 * np.pi * np.fft.fftfreq(k, d=h) for k, h in zip(self.n, self.spacing))

    def check_resolves(self, eps: float, what: str = "field"):
        if max(self.spacing) > eps * (1.0 + 1e-12):
            raise ResolutionError(
                f"{what} grid spacing {max(self.spacing):.3g} exceeds eps={eps:.3g}")


@dataclass
class WaveField:
    """Complex samples on a :class:`Grid`, ``values.shape == grid.n``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != self.grid.n:
            raise ValueError(f"values shape {self.values.shape} does not match grid {self.grid.n}")

    @property
    def dim(self) -> int:
        return self.grid.dim

    def norm(self) -> float:
        """Discrete L2 norm with the cell-volume weight."""
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.cell_volume))

    def copy(self) -> "WaveField":
        return WaveField(self.grid, self.values.copy())

    @classmethod
    def zeros(cls, grid: Grid) -> "WaveField":
        return cls(grid, np.zeros(grid.n, dtype=complex))

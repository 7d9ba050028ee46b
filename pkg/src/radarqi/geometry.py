"""Scene geometry: imaging grid, antenna array, frequency sweep, target maps.

Conventions used throughout the package:

* The domain of interest (DOI) is a square grid of ``side_cells`` x
  ``side_cells`` cells centered on the origin. Cell centers are stored
  row-major with ``p = row * side_cells + col``; row 0 sits at the largest
  y coordinate, so a 28x28 image renders with its top row facing the
  antenna array.
* The antenna array is a uniform linear array on the line ``y = standoff``,
  parallel to the x axis and centered on ``x = 0``.
* Reflectivity (RCS) maps are plain float64 vectors of length
  ``side_cells**2`` with values in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Radar convention: keeps c/(2*f0) antenna spacing and round-trip phases on
# exact decimal values (e.g. 5 mm spacing at 30 GHz).
SPEED_OF_LIGHT = 3.0e8  # m/s


@dataclass(frozen=True)
class DoiGrid:
    """Square imaging grid centered on the origin.

    Attributes
    ----------
    side_cells : int
        Cells per side; the map has ``side_cells**2`` unknowns.
    cell_size : float
        Cell pitch [m].
    centers : np.ndarray, shape (side_cells**2, 2)
        Cell-center coordinates [m], row-major, row 0 at maximum y.
    """

    side_cells: int
    cell_size: float
    centers: np.ndarray

    @property
    def n_cells(self) -> int:
        return self.side_cells * self.side_cells


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear antenna array.

    Attributes
    ----------
    positions : np.ndarray, shape (K, 2)
        Antenna coordinates [m], ordered by increasing x.
    """

    positions: np.ndarray

    @property
    def n_antennas(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class FrequencySweep:
    """Stepped frequency sweep f_n = f0 + (B / n_freqs) * (n - 1), n = 1..n_freqs.

    Attributes
    ----------
    f0 : float
        Starting frequency [Hz].
    bandwidth : float
        Total swept bandwidth [Hz].
    n_freqs : int
        Number of frequency samples.
    freqs : np.ndarray, shape (n_freqs,)
        The sampled frequencies [Hz], strictly increasing, freqs[0] == f0.
    """

    f0: float
    bandwidth: float
    n_freqs: int
    freqs: np.ndarray

    @property
    def step(self) -> float:
        return self.bandwidth / self.n_freqs

    @property
    def adc_rate(self) -> float:
        """Equivalent real-time sample rate of the down-sampled sweep [Hz]."""
        return self.bandwidth / self.n_freqs


def build_doi_grid(side_cells: int, cell_size: float) -> DoiGrid:
    """Mesh the DOI into a centered square grid of cell centers.

    Parameters
    ----------
    side_cells : int
        Cells per side, >= 1.
    cell_size : float
        Cell pitch [m], > 0.
    """
    if side_cells < 1:
        raise ValueError(f"side_cells must be >= 1, got {side_cells}")
    if cell_size <= 0:
        raise ValueError(f"cell_size must be > 0, got {cell_size}")
    half = (side_cells - 1) / 2.0
    rows, cols = np.mgrid[0:side_cells, 0:side_cells]
    x = (cols.ravel() - half) * cell_size
    y = (half - rows.ravel()) * cell_size
    return DoiGrid(side_cells, cell_size, np.column_stack([x, y]))


def build_ula(k: int, f0: float, standoff: float) -> ArrayGeometry:
    """Build a uniform linear array with half-wavelength spacing c/(2*f0).

    The array lies on ``y = standoff`` and is centered on ``x = 0``.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if f0 <= 0:
        raise ValueError(f"f0 must be > 0, got {f0}")
    spacing = SPEED_OF_LIGHT / (2.0 * f0)
    x = (np.arange(k) - (k - 1) / 2.0) * spacing
    y = np.full(k, standoff, dtype=float)
    return ArrayGeometry(np.column_stack([x, y]))


def distances(array: ArrayGeometry, grid: DoiGrid) -> np.ndarray:
    """Euclidean distances R[k, p] from antenna k to grid cell p, in meters."""
    diff = array.positions[:, None, :] - grid.centers[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=2))


def build_sweep(f0: float, bandwidth: float, n_freqs: int) -> FrequencySweep:
    """Build the stepped sweep with exact step bandwidth / n_freqs."""
    if f0 <= 0 or bandwidth <= 0 or n_freqs < 1:
        raise ValueError("sweep requires f0 > 0, bandwidth > 0, n_freqs >= 1")
    step = bandwidth / n_freqs
    freqs = f0 + step * np.arange(n_freqs)
    return FrequencySweep(f0, bandwidth, n_freqs, freqs)


def mnist_to_rcs(image: np.ndarray) -> np.ndarray:
    """Convert a 28x28 byte raster into a reflectivity vector in [0, 1].

    Grayscale is kept: amplitude = byte / 255, row-major flattening with
    p = row * 28 + col.
    """
    image = np.asarray(image)
    if image.shape != (28, 28):
        raise ValueError(f"expected a 28x28 raster, got shape {image.shape}")
    return image.astype(np.float64).ravel() / 255.0


def rcs_to_raster(values: np.ndarray, side_cells: int = 28) -> np.ndarray:
    """Inverse of :func:`mnist_to_rcs` up to byte quantization."""
    img = np.asarray(values, dtype=np.float64).reshape(side_cells, side_cells)
    return np.clip(np.floor(img * 255.0 + 0.5), 0, 255).astype(np.uint8)

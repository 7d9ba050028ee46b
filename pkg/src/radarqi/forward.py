"""Frequency-domain echo model for the sparse-sampled stepped-FMCW setup.

The measurement of antenna k at frequency f_n is the coherent sum of
round-trip phase terms over all grid cells,

    s(n, k) = sum_p eps_p * exp(-j * 4 * pi * f_n * R_{k,p} / c),

which stacks into ``s = A @ eps`` with one Nf x P block per antenna.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import SPEED_OF_LIGHT, ArrayGeometry, DoiGrid, FrequencySweep, distances


@dataclass(frozen=True)
class SensingMatrix:
    """Stacked per-antenna phase matrix A of shape (Nf*K, P).

    Rows are antenna-major: row i belongs to antenna ``i // Nf`` and
    frequency index ``i % Nf``. Every entry has unit modulus.
    """

    entries: np.ndarray
    sweep: FrequencySweep
    array: ArrayGeometry
    grid: DoiGrid

    @property
    def n_measurements(self) -> int:
        return self.entries.shape[0]

    @property
    def n_cells(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class Echo:
    """Complex frequency-domain echo samples, optionally noisy.

    ``snr_db`` records the signal-to-noise ratio the noise was drawn at;
    None means noise-free.
    """

    samples: np.ndarray
    snr_db: float | None = None


def build_sensing_matrix(
    sweep: FrequencySweep, array: ArrayGeometry, grid: DoiGrid
) -> SensingMatrix:
    """Assemble A with entries exp(-j * 4 * pi * f_n * R_{k,p} / c)."""
    r = distances(array, grid)  # (K, P)
    # (K, Nf, P) phases, then stacked antenna-major into (Nf*K, P).
    phase = (
        4.0 * np.pi / SPEED_OF_LIGHT * sweep.freqs[None, :, None] * r[:, None, :]
    )
    entries = np.exp(-1j * phase).reshape(-1, grid.n_cells)
    return SensingMatrix(entries, sweep, array, grid)


def matrix_entries(a) -> np.ndarray:
    """Accept either a SensingMatrix or a plain complex matrix."""
    return a.entries if isinstance(a, SensingMatrix) else np.asarray(a)


def synthesize_echo(a, eps: np.ndarray) -> Echo:
    """Noise-free echo s = A @ eps for a real reflectivity vector."""
    m = matrix_entries(a)
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != (m.shape[1],):
        raise ValueError(
            f"reflectivity length {eps.shape} does not match matrix columns {m.shape[1]}"
        )
    return Echo(m @ eps, snr_db=None)


def synthesize_echoes(a, maps: np.ndarray) -> np.ndarray:
    """Batched noise-free synthesis: (n, P) maps -> (n, Nf*K) complex echoes."""
    m = matrix_entries(a)
    maps = np.asarray(maps, dtype=np.float64)
    if maps.ndim != 2 or maps.shape[1] != m.shape[1]:
        raise ValueError(f"expected maps of shape (n, {m.shape[1]}), got {maps.shape}")
    return maps @ m.T


def add_awgn(echo: Echo, snr_db: float | None, seed: int) -> Echo:
    """Add circularly-symmetric complex Gaussian noise at the given SNR.

    Per-sample noise variance is mean(|s|^2) / 10^(snr_db / 10), split
    evenly between real and imaginary parts. Deterministic per seed.
    ``snr_db`` of None returns the echo unchanged.
    """
    if snr_db is None:
        return echo
    s = echo.samples
    signal_power = float(np.mean(np.abs(s) ** 2))
    if signal_power == 0.0:
        raise ValueError("cannot set a finite SNR on an all-zero echo")
    sigma2 = signal_power / 10.0 ** (snr_db / 10.0)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xA96]))
    scale = np.sqrt(sigma2 / 2.0)
    noise = scale * (rng.standard_normal(s.shape) + 1j * rng.standard_normal(s.shape))
    return Echo(s + noise, snr_db=float(snr_db))

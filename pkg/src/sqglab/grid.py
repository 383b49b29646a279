"""Spectral grid for the periodic square [-L, L)^2.

The wavenumber lattice is k = (pi/L) * m with integer mode indices
|m_i| <= K/2, stored in FFT order. Physical sample points are
x_j = -L + 2L*j/K along each axis.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["GridSpec", "make_grid"]


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Resolution, half-period and dealiasing cutoff of a periodic grid.

    Parameters
    ----------
    K : int
        Points per dimension; power of two, at least 16.
    L : float
        Half-period; the domain is [-L, L)^2.
    dealias_fraction : float
        Fraction of the Nyquist index kept by the dealias mask.

    Derived arrays (filled in __post_init__):
    modes : integer mode indices in FFT order.
    kx, ky : wavenumber components on the 2D lattice.
    k2 : |k|^2; kmag : |k|.
    dealias_mask : True where max(|m1|,|m2|) <= M_d.
    """

    K: int
    L: float
    dealias_fraction: float = 2.0 / 3.0

    modes: np.ndarray = field(init=False, repr=False, compare=False)
    kx: np.ndarray = field(init=False, repr=False, compare=False)
    ky: np.ndarray = field(init=False, repr=False, compare=False)
    k2: np.ndarray = field(init=False, repr=False, compare=False)
    kmag: np.ndarray = field(init=False, repr=False, compare=False)
    dealias_mask: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not isinstance(self.K, (int, np.integer)) or not _is_power_of_two(int(self.K)) or self.K < 16:
            raise ValueError(f"K must be a power of two >= 16, got {self.K}")
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")
        if not 0.0 < self.dealias_fraction <= 1.0:
            raise ValueError(f"dealias_fraction must lie in (0, 1], got {self.dealias_fraction}")

        K = int(self.K)
        m = np.fft.fftfreq(K, d=1.0 / K).astype(np.int64)  # 0, 1, ..., K/2-1, -K/2, ..., -1
        dk = np.pi / self.L
        kx1d = dk * m
        object.__setattr__(self, "modes", m)
        object.__setattr__(self, "kx", kx1d[:, None] * np.ones((1, K)))
        object.__setattr__(self, "ky", np.ones((K, 1)) * kx1d[None, :])
        k2 = self.kx**2 + self.ky**2
        object.__setattr__(self, "k2", k2)
        object.__setattr__(self, "kmag", np.sqrt(k2))
        md = self.dealias_index
        mask = (np.abs(m)[:, None] <= md) & (np.abs(m)[None, :] <= md)
        object.__setattr__(self, "dealias_mask", mask)

    @property
    def dealias_index(self) -> int:
        """M_d = floor(dealias_fraction * K/2)."""
        return int(np.floor(self.dealias_fraction * self.K / 2))

    @property
    def dk(self) -> float:
        """Lattice spacing pi/L."""
        return np.pi / self.L

    @property
    def nyquist_k(self) -> float:
        """Largest representable wavenumber magnitude per axis, pi*K/(2L)."""
        return np.pi * self.K / (2.0 * self.L)

    @property
    def dealias_k(self) -> float:
        """Wavenumber magnitude of the dealias cutoff index."""
        return self.dealias_index * self.dk

    def x_axis(self) -> np.ndarray:
        """Physical sample coordinates -L + 2L*j/K, j = 0..K-1."""
        return -self.L + 2.0 * self.L * np.arange(self.K) / self.K

    def zeros(self) -> np.ndarray:
        return np.zeros((self.K, self.K), dtype=np.complex128)


def make_grid(K: int, L: float, dealias_fraction: float = 2.0 / 3.0) -> GridSpec:
    """Validate and build a GridSpec."""
    return GridSpec(K=K, L=L, dealias_fraction=dealias_fraction)

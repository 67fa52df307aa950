"""Periodic field algebra on the torus [0, 2*pi)^N.

Conventions used everywhere in the package:

* A field is a complex array ``f_hat`` of Fourier coefficients.  The trailing
  ``grid.dim`` axes are the lattice axes in FFT order; leading axes index
  components (``()`` scalar, ``(N,)`` vector, ``(N, N)`` tensor).
* The forward transform carries the factor ``1 / n**dim`` so that
  ``f(x) = sum_k f_hat[k] exp(i k.x)``.  A constant field 1 has a single
  coefficient 1 at ``k = 0``.
* ``L^2`` norms are the torus norms, ``||f||^2 = (2 pi)^N sum_k |f_hat[k]|^2``.
* Mean-zero gauge: inverse powers of ``Lambda = |D|`` and Riesz-type
  multipliers map the ``k = 0`` coefficient to 0.  Velocity and strain are
  kept mean-zero by the solvers.
* Quadratic products are dealiased by the 2/3 rule: every mode with some
  ``|k_j| > n/3`` is zeroed.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
import scipy.fft

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with ``n`` points per axis in ``dim`` dimensions."""

    dim: int
    n: int

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if self.n < 16 or self.n & (self.n - 1):
            raise ValueError(f"points_per_axis must be a power of two >= 16, got {self.n}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(range(-self.dim, 0))

    @property
    def volume(self) -> float:
        return TWO_PI**self.dim

    @property
    def cutoff(self) -> int:
        """Largest retained ``|k_j|`` under the 2/3 rule."""
        return self.n // 3

    @functools.cached_property
    def k(self) -> np.ndarray:
        """Integer wavenumbers as floats, shape ``(dim, *shape)``."""
        k1 = np.fft.fftfreq(self.n, d=1.0 / self.n)
        return np.array(np.meshgrid(*([k1] * self.dim), indexing="ij"))

    @functools.cached_property
    def ksq(self) -> np.ndarray:
        return np.sum(self.k**2, axis=0)

    @functools.cached_property
    def kabs(self) -> np.ndarray:
        return np.sqrt(self.ksq)

    @functools.cached_property
    def inv_kabs(self) -> np.ndarray:
        out = np.zeros(self.shape)
        nz = self.ksq > 0
        out[nz] = 1.0 / self.kabs[nz]
        return out

    @functools.cached_property
    def inv_ksq(self) -> np.ndarray:
        out = np.zeros(self.shape)
        nz = self.ksq > 0
        out[nz] = 1.0 / self.ksq[nz]
        return out

    @functools.cached_property
    def dealias_mask(self) -> np.ndarray:
        return np.all(np.abs(self.k) <= self.cutoff, axis=0)

    @functools.cached_property
    def x(self) -> np.ndarray:
        """Sample coordinates, shape ``(dim, *shape)``."""
        x1 = TWO_PI * np.arange(self.n) / self.n
        return np.array(np.meshgrid(*([x1] * self.dim), indexing="ij"))

    @functools.cached_property
    def bank(self):
        from oldroyd.littlewood_paley import DyadicFilterBank

        return DyadicFilterBank(self)


@functools.lru_cache(maxsize=None)
def get_grid(dim: int, n: int) -> Grid:
    """Shared grid instance, so cached wavenumbers and filter banks are reused."""
    return Grid(dim, n)


def _check_shape(grid: Grid, a: np.ndarray):
    if a.shape[a.ndim - grid.dim :] != grid.shape:
        raise ValueError(
            f"field trailing shape {a.shape[a.ndim - grid.dim:]} does not match grid shape {grid.shape}"
        )


def transform(grid: Grid, samples: np.ndarray) -> np.ndarray:
    _check_shape(grid, samples)
    return scipy.fft.fftn(samples, axes=grid.axes, norm="forward")


def inverse_transform(grid: Grid, f_hat: np.ndarray) -> np.ndarray:
    """Real-space samples of a real-valued field (imaginary rounding dropped)."""
    _check_shape(grid, f_hat)
    return scipy.fft.ifftn(f_hat, axes=grid.axes, norm="forward").real


def dealias(grid: Grid, f_hat: np.ndarray) -> np.ndarray:
    return f_hat * grid.dealias_mask


def to_spectral(grid: Grid, samples: np.ndarray) -> np.ndarray:
    """Forward transform followed by the 2/3 truncation."""
    return transform(grid, samples) * grid.dealias_mask


def partial_derivative(grid: Grid, f_hat: np.ndarray, j: int) -> np.ndarray:
    if not 0 <= j < grid.dim:
        raise ValueError(f"axis {j} out of range for dim={grid.dim}")
    return 1j * grid.k[j] * f_hat


def gradient(grid: Grid, f_hat: np.ndarray) -> np.ndarray:
    """Appends a derivative index: ``out[..., j, :] = d_j f``."""
    return 1j * grid.k * np.expand_dims(f_hat, -grid.dim - 1)


def divergence(grid: Grid, f_hat: np.ndarray) -> np.ndarray:
    """Contracts the last component index: ``(div f)_i = d_j f_ij``."""
    return np.sum(1j * grid.k * f_hat, axis=f_hat.ndim - grid.dim - 1)


def divergence_transpose(grid: Grid, e_hat: np.ndarray) -> np.ndarray:
    """``(div E^T)_j = d_i E_ij`` for a tensor field."""
    return divergence(grid, np.swapaxes(e_hat, 0, 1))


def laplacian(grid: Grid, f_hat: np.ndarray) -> np.ndarray:
    return -grid.ksq * f_hat


def lambda_power(grid: Grid, f_hat: np.ndarray, s: float) -> np.ndarray:
    """Fourier multiplier ``|k|^s``.

    For ``s > 0`` the mean is mapped to 0, for ``s == 0`` the field is
    returned unchanged.  Negative powers require a mean-zero input.
    """
    if s == 0:
        return f_hat.copy()
    zero = (0,) * grid.dim
    if s < 0:
        mean = f_hat[(Ellipsis, *zero)]
        if np.any(np.abs(mean) > 1e-14 * max(1.0, float(np.max(np.abs(f_hat))))):
            raise ValueError("Lambda^s with s < 0 needs a mean-zero field (mean-zero gauge)")
    mult = np.zeros(grid.shape)
    nz = grid.ksq > 0
    mult[nz] = grid.kabs[nz] ** s
    return mult * f_hat


def riesz(grid: Grid, f_hat: np.ndarray, j: int) -> np.ndarray:
    """``Lambda^{-1} d_j`` with symbol ``i k_j / |k|`` (0 at ``k = 0``)."""
    return 1j * grid.k[j] * grid.inv_kabs * f_hat


def leray_project(grid: Grid, u_hat: np.ndarray) -> np.ndarray:
    """Projection onto divergence-free fields; acts on the leading vector index.

    The ``k = 0`` coefficient (a constant vector) is left untouched.
    """
    k = grid.k
    lead = u_hat.ndim - grid.dim - 1
    kk = k.reshape((grid.dim,) + (1,) * lead + grid.shape) if lead else k
    kdotu = np.sum(kk * u_hat, axis=0)
    return u_hat - kk * (kdotu * grid.inv_ksq)


def pointwise_product(grid: Grid, f_hat: np.ndarray, g_hat: np.ndarray) -> np.ndarray:
    """Dealiased product, computed on the grid samples (arrays broadcast)."""
    if f_hat.shape[f_hat.ndim - grid.dim :] != g_hat.shape[g_hat.ndim - grid.dim :]:
        raise ValueError("fields live on different grids")
    return to_spectral(grid, inverse_transform(grid, f_hat) * inverse_transform(grid, g_hat))


def det_I_plus_E(grid: Grid, e_hat: np.ndarray) -> np.ndarray:
    """Pointwise ``det(I + E(x))`` on the grid samples."""
    e = inverse_transform(grid, e_hat)
    f = e + np.eye(grid.dim).reshape((grid.dim, grid.dim) + (1,) * grid.dim)
    if grid.dim == 2:
        return f[0, 0] * f[1, 1] - f[0, 1] * f[1, 0]
    return (
        f[0, 0] * (f[1, 1] * f[2, 2] - f[1, 2] * f[2, 1])
        - f[0, 1] * (f[1, 0] * f[2, 2] - f[1, 2] * f[2, 0])
        + f[0, 2] * (f[1, 0] * f[2, 1] - f[1, 1] * f[2, 0])
    )


def mean(grid: Grid, f_hat: np.ndarray) -> np.ndarray:
    return f_hat[(Ellipsis,) + (0,) * grid.dim]


def zero_mean(grid: Grid, f_hat: np.ndarray) -> np.ndarray:
    out = f_hat.copy()
    out[(Ellipsis,) + (0,) * grid.dim] = 0.0
    return out


def l2_norm(grid: Grid, f_hat: np.ndarray) -> float:
    """Torus ``L^2`` norm; all components are combined in quadrature."""
    return math.sqrt(grid.volume * float(np.sum(np.abs(f_hat) ** 2)))


def linf_norm(grid: Grid, f_hat: np.ndarray) -> float:
    """Max over grid samples (and components, Euclidean) of ``|f(x)|``."""
    f = inverse_transform(grid, f_hat)
    lead = f.ndim - grid.dim
    if lead:
        f = np.sqrt(np.sum(f**2, axis=tuple(range(lead))))
    return float(np.max(np.abs(f)))


def dilate(grid: Grid, f_hat: np.ndarray, factor: int) -> np.ndarray:
    """Coefficients of ``f(factor * x)``: mode ``k`` moves to ``factor * k``.

    The input must be band-limited so every moved mode stays inside the
    2/3 band; otherwise the dilation cannot be represented exactly.
    Coefficients below ``1e-14`` of the largest are treated as rounding and
    dropped.
    """
    if factor < 1 or int(factor) != factor:
        raise ValueError("dilation factor must be a positive integer")
    mag = np.max(np.abs(f_hat).reshape((-1,) + grid.shape), axis=0)
    support = mag > 1e-14 * max(float(np.max(mag)), 1e-300)  # FFT rounding is not support
    if np.any(np.abs(grid.k[:, support]) * factor > grid.cutoff):
        raise ValueError("field not band-limited enough for an exact dilation")
    out = np.zeros_like(f_hat)
    idx = np.nonzero(support)
    k_old = [grid.k[d][idx].astype(int) for d in range(grid.dim)]
    new = tuple((factor * kd) % grid.n for kd in k_old)
    out[(Ellipsis, *new)] = f_hat[(Ellipsis, *idx)]
    return out


def advect(grid: Grid, u_hat: np.ndarray, f_hat: np.ndarray) -> np.ndarray:
    """Dealiased ``u . grad f`` for a vector ``u`` and a field ``f`` of any rank."""
    u = inverse_transform(grid, u_hat)
    df = inverse_transform(grid, gradient(grid, f_hat))
    return to_spectral(grid, np.sum(u * df, axis=df.ndim - grid.dim - 1))

"""Admissible initial data and inadmissible negative controls.

Velocities are band-limited, divergence-free and mean-zero, rescaled to a
prescribed ``B^{N/2-1}`` norm.  Strains are built by a warm-up: starting
from ``E = 0`` the strain equation

    E_t + v.grad E = grad(v) E + grad(v)

is integrated with a frozen divergence-free carrier ``v``.  ``F = I + E`` is
then the deformation gradient of a volume-preserving flow, so
``det(I + E) = 1``, ``div E^T = 0`` and the curl compatibility hold up to
integration and truncation error.  ``E`` is never rescaled afterwards: the
constraint set is not closed under scaling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from oldroyd import spectral as sp
from oldroyd.littlewood_paley import besov_norm
from oldroyd.spectral import Grid
from oldroyd.system import State, constraint_residuals

KINDS = ("random_bandlimited", "single_mode", "taylor_green_like")
WARMUP_TOLERANCES = {"det_drift": 1e-8, "div_ET": 1e-10, "curl_compat": 1e-8}


@dataclass(frozen=True)
class DataSpec:
    kind: str = "random_bandlimited"
    amplitude: float = 1e-2
    band: tuple[float, float] = (1.0, 4.0)
    warmup_time: float = 1.0
    seed: int = 0
    warmup_dt: float = 1e-2
    warmup_method: str = "rk4"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown data kind {self.kind!r}; expected one of {KINDS}")
        if self.amplitude <= 0:
            raise ValueError("amplitude must be positive")
        if self.band[0] < 1 or self.band[1] < self.band[0]:
            raise ValueError(f"band must satisfy 1 <= k_lo <= k_hi, got {self.band}")
        if self.warmup_time < 0:
            raise ValueError("warmup_time must be >= 0")

    def check_grid(self, grid: Grid):
        if self.band[1] > grid.cutoff:
            raise ValueError(f"band upper edge {self.band[1]} exceeds the dealiasing cutoff {grid.cutoff}")


class InadmissibleData(ValueError):
    """Warm-up output failed the constraint tolerances; ``residuals`` holds the measured values."""

    def __init__(self, message: str, residuals):
        super().__init__(message)
        self.residuals = residuals


def _band_mask(grid: Grid, band) -> np.ndarray:
    return (grid.kabs >= band[0]) & (grid.kabs <= band[1]) & grid.dealias_mask


def random_solenoidal(grid: Grid, band, rng: np.random.Generator) -> np.ndarray:
    """Divergence-free, mean-zero field with ``|k|`` in ``band`` (unnormalized)."""
    mask = _band_mask(grid, band)
    if not np.any(mask):
        raise ValueError(f"band {tuple(band)} contains no lattice wavenumber")
    samples = rng.standard_normal((grid.dim,) + grid.shape)
    v = sp.leray_project(grid, sp.transform(grid, samples) * mask)
    return sp.zero_mean(grid, v)


def _shaped(grid: Grid, kind: str, k: float) -> np.ndarray:
    x = grid.x
    v = np.zeros((grid.dim,) + grid.shape)
    if kind == "single_mode":
        v[0] = np.sin(k * x[1])
    elif grid.dim == 2:
        v[0] = np.sin(k * x[0]) * np.cos(k * x[1])
        v[1] = -np.cos(k * x[0]) * np.sin(k * x[1])
    else:
        v[0] = np.sin(k * x[0]) * np.cos(k * x[1]) * np.cos(k * x[2])
        v[1] = -np.cos(k * x[0]) * np.sin(k * x[1]) * np.cos(k * x[2])
    return sp.zero_mean(grid, sp.leray_project(grid, sp.to_spectral(grid, v)))


def make_velocity(grid: Grid, spec: DataSpec, rng: np.random.Generator | None = None) -> np.ndarray:
    """Velocity with ``||v||_{B^{N/2-1}} = spec.amplitude``.

    ``single_mode`` is the shear ``(sin(k x_2), 0, ...)`` and
    ``taylor_green_like`` the Taylor-Green cell, both at ``k = k_lo``
    (rounded to an integer so the field is periodic).
    """
    spec.check_grid(grid)
    if spec.kind == "random_bandlimited":
        rng = np.random.default_rng(spec.seed) if rng is None else rng
        v = random_solenoidal(grid, spec.band, rng)
    else:
        k = round(spec.band[0])
        v = _shaped(grid, spec.kind, k)
    nrm = besov_norm(grid, v, grid.dim / 2 - 1)
    return v * (spec.amplitude / nrm)


def strain_rhs(grid: Grid, v: np.ndarray, E: np.ndarray) -> np.ndarray:
    """``-v.grad E + grad(v) E + grad(v)`` for a frozen velocity (dealiased)."""
    grad_v = sp.gradient(grid, v)
    pv = sp.inverse_transform(grid, v)
    pgv = sp.inverse_transform(grid, grad_v)
    pE = sp.inverse_transform(grid, E)
    pgE = sp.inverse_transform(grid, sp.gradient(grid, E))
    quad = -np.einsum("k...,ijk...->ij...", pv, pgE) + np.einsum("ik...,kj...->ij...", pgv, pE)
    return sp.to_spectral(grid, quad) + grad_v


def warmup_strain(
    grid: Grid, carrier_v: np.ndarray, warmup_time: float, dt: float = 1e-2, method: str = "rk4"
) -> np.ndarray:
    """Integrate the strain equation from ``E = 0`` with a frozen carrier."""
    E = np.zeros((grid.dim, grid.dim) + grid.shape, complex)
    if warmup_time == 0:
        return E
    nsteps = max(1, int(np.ceil(warmup_time / dt - 1e-9)))
    h = warmup_time / nsteps
    f = lambda e: strain_rhs(grid, carrier_v, e)  # noqa: E731
    for _ in range(nsteps):
        if method == "euler":
            E = E + h * f(E)
        elif method == "rk4":
            k1 = f(E)
            k2 = f(E + 0.5 * h * k1)
            k3 = f(E + 0.5 * h * k2)
            k4 = f(E + h * k3)
            E = E + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        else:
            raise ValueError(f"unknown warm-up method {method!r}")
    return sp.zero_mean(grid, E)


def make_strain_by_warmup(grid: Grid, spec: DataSpec, carrier_v: np.ndarray, check: bool = True) -> np.ndarray:
    """Admissible ``E0`` from a warm-up of ``spec.warmup_time`` with ``carrier_v``.

    Raises :class:`InadmissibleData` (with the measured residuals) if the
    result misses the warm-up tolerances.
    """
    div = sp.l2_norm(grid, sp.divergence(grid, carrier_v))
    if div > 1e-10 * max(sp.l2_norm(grid, sp.gradient(grid, carrier_v)), 1e-300):
        raise ValueError("warm-up carrier must be divergence-free")
    E = warmup_strain(grid, carrier_v, spec.warmup_time, spec.warmup_dt, spec.warmup_method)
    if check:
        res = constraint_residuals(grid, E)
        if not res.within(**WARMUP_TOLERANCES):
            raise InadmissibleData(
                "warm-up strain misses tolerances "
                f"(det_drift={res.det_drift:.3e}, div_ET={res.div_ET:.3e}, curl_compat={res.curl_compat:.3e}); "
                "reduce warmup_dt or the carrier amplitude",
                res,
            )
    return E


def make_strain_inadmissible(grid: Grid, spec: DataSpec, kind: str = "symmetric", eps: float | None = None) -> np.ndarray:
    """Negative controls: ``"symmetric"`` random tensor with nonzero row
    divergence, or ``"identity"`` ``E = eps I`` (constant, so not mean-zero)."""
    if kind == "identity":
        eps = spec.amplitude if eps is None else eps
        E = np.zeros((grid.dim, grid.dim) + grid.shape, complex)
        for i in range(grid.dim):
            E[(i, i) + (0,) * grid.dim] = eps
        return E
    if kind != "symmetric":
        raise ValueError(f"unknown negative control {kind!r}")
    rng = np.random.default_rng(spec.seed)
    mask = _band_mask(grid, spec.band)
    a = sp.transform(grid, rng.standard_normal((grid.dim, grid.dim) + grid.shape)) * mask
    E = sp.zero_mean(grid, 0.5 * (a + np.swapaxes(a, 0, 1)))
    return E * (spec.amplitude / besov_norm(grid, E, grid.dim / 2))


def make_initial_state(grid: Grid, spec: DataSpec, check: bool = True) -> State:
    """``(v0, E0)`` from one seed: the velocity and the warm-up carrier draw
    from independent child streams of ``SeedSequence(spec.seed)``."""
    seq_v, seq_c = np.random.SeedSequence(spec.seed).spawn(2)
    v0 = make_velocity(grid, spec, np.random.default_rng(seq_v))
    carrier = make_velocity(grid, spec, np.random.default_rng(seq_c))
    E0 = make_strain_by_warmup(grid, spec, carrier, check=check)
    return State(grid, v0, E0, 0.0)

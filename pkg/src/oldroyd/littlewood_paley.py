"""Dyadic blocks, homogeneous Besov / hybrid norms, paraproducts.

The ring profile is ``phi(r) = chi(r/2) - chi(r)`` where ``chi`` is a smooth
radial cutoff equal to 1 on ``[0, 3/4]`` and 0 on ``[4/3, inf)``.  Hence
``supp phi = [3/4, 8/3]`` and the blocks telescope to a partition of unity.

Shells run over ``q_min = -2 .. q_max`` with
``q_max = ceil(log2(n/3 * 8/3))``; this covers every nonzero lattice point.
Shells outside that range are identically zero.  The mean (``k = 0``) belongs
to no shell and is excluded from every homogeneous norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from oldroyd import spectral as sp
from oldroyd.spectral import Grid

Q_MIN = -2
_LO, _HI = 0.75, 4.0 / 3.0


def _smooth_step(t: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)
    out = np.where(t >= 1.0, 1.0, 0.0)
    mid = (t > 0.0) & (t < 1.0)
    tm = t[mid]
    a = np.exp(-1.0 / tm)
    b = np.exp(-1.0 / (1.0 - tm))
    out[mid] = a / (a + b)
    return out


def chi(r: np.ndarray) -> np.ndarray:
    """Low-pass profile: 1 for r <= 3/4, 0 for r >= 4/3."""
    return 1.0 - _smooth_step((np.asarray(r, dtype=float) - _LO) / (_HI - _LO))


def phi(r: np.ndarray) -> np.ndarray:
    """Ring profile supported in [3/4, 8/3]."""
    r = np.asarray(r, dtype=float)
    return chi(r / 2.0) - chi(r)


class DyadicFilterBank:
    """Shell multipliers ``phi(2^-q |k|)`` cached for one grid."""

    def __init__(self, grid: Grid):
        self.grid = grid
        self.q_min = Q_MIN
        self.q_max = math.ceil(math.log2(grid.n / 3.0 * 8.0 / 3.0))
        self.qs = np.arange(self.q_min, self.q_max + 1)
        kabs = grid.kabs
        self.multipliers = np.stack([phi(kabs * 2.0**-q) for q in self.qs])
        self.multipliers[(slice(None),) + (0,) * grid.dim] = 0.0
        self._phi_sq = (self.multipliers**2).reshape(len(self.qs), -1)
        dev = self.partition_deviation()
        if dev > 1e-12:
            raise RuntimeError(f"dyadic partition of unity violated: {dev:.3e}")

    def partition_deviation(self) -> float:
        """Max |sum_q phi_q - 1| over the resolved annulus."""
        kabs = self.grid.kabs
        annulus = (kabs >= 0.75 * 2.0**self.q_min) & (kabs <= 2.0**self.q_max)
        total = np.sum(self.multipliers, axis=0)
        return float(np.max(np.abs(total[annulus] - 1.0)))

    def index(self, q: int) -> int | None:
        if self.q_min <= q <= self.q_max:
            return int(q - self.q_min)
        return None

    def multiplier(self, q: int) -> np.ndarray:
        i = self.index(q)
        if i is None:
            return np.zeros(self.grid.shape)
        return self.multipliers[i]

    def low_multiplier(self, q: int) -> np.ndarray:
        """Symbol of ``S_q`` = sum of blocks ``p <= q-1`` plus the mean."""
        m = chi(self.grid.kabs * 2.0**-q)
        m[(0,) * self.grid.dim] = 1.0
        return m

    def shell_norms(self, f_hat: np.ndarray) -> np.ndarray:
        """``||Delta_q f||_{L^2}`` for every shell (components in quadrature)."""
        power = np.abs(f_hat) ** 2
        lead = f_hat.ndim - self.grid.dim
        if lead:
            power = np.sum(power, axis=tuple(range(lead)))
        energy = self._phi_sq @ power.ravel()
        return np.sqrt(self.grid.volume * np.maximum(energy, 0.0))


def dyadic_block(grid: Grid, f_hat: np.ndarray, q: int) -> np.ndarray:
    return grid.bank.multiplier(q) * f_hat


def low_freq_cutoff(grid: Grid, f_hat: np.ndarray, q: int) -> np.ndarray:
    return grid.bank.low_multiplier(q) * f_hat


def _lr(values: np.ndarray, r: float) -> float:
    if r == math.inf:
        return float(np.max(values)) if values.size else 0.0
    return float(np.sum(values**r) ** (1.0 / r))


def besov_norm(grid: Grid, f_hat: np.ndarray, s: float, r: float = 1.0) -> float:
    """Homogeneous ``B^s_{2,r}`` norm; ``r = 1`` gives ``B^s``."""
    bank = grid.bank
    return _lr(2.0 ** (bank.qs * s) * bank.shell_norms(f_hat), r)


def hybrid_weight(q, s: float, r: float, mu: float):
    """``2^{qs} max(mu, 2^-q)^{1 - 2/r}``."""
    q = np.asarray(q, dtype=float)
    expo = 1.0 if r == math.inf else 1.0 - 2.0 / r
    return 2.0 ** (q * s) * np.maximum(mu, 2.0**-q) ** expo


def hybrid_norm(grid: Grid, f_hat: np.ndarray, s: float, r: float, mu: float) -> float:
    bank = grid.bank
    return float(np.sum(hybrid_weight(bank.qs, s, r, mu) * bank.shell_norms(f_hat)))


@dataclass(frozen=True)
class NormSpec:
    """Selects a spatial norm, or a Chemin-Lerner time-space norm (``lam``)."""

    s: float
    r: float = 1.0
    mu: float = 1.0
    variant: str = "besov_21"
    lam: float = math.inf

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if not 1.0 <= self.r <= math.inf:
            raise ValueError("r must lie in [1, inf]")
        if self.variant not in ("besov_21", "besov_2r", "hybrid", "chemin_lerner"):
            raise ValueError(f"unknown norm variant {self.variant!r}")

    @property
    def label(self) -> str:
        if self.variant == "hybrid":
            return f"hybrid(s={self.s:g},r={self.r:g},mu={self.mu:g})"
        if self.variant == "chemin_lerner":
            return f"CL(lam={self.lam:g},s={self.s:g},r={self.r:g})"
        r = 1.0 if self.variant == "besov_21" else self.r
        return f"B(s={self.s:g},r={r:g})"

    def __call__(self, grid: Grid, f_hat: np.ndarray) -> float:
        if self.variant == "besov_21":
            return besov_norm(grid, f_hat, self.s, 1.0)
        if self.variant == "besov_2r":
            return besov_norm(grid, f_hat, self.s, self.r)
        if self.variant == "hybrid":
            return hybrid_norm(grid, f_hat, self.s, self.r, self.mu)
        raise ValueError("Chemin-Lerner norms need a TimeNormAccumulator")


class TimeNormAccumulator:
    """Per-shell time integrals for Chemin-Lerner norms ``L~^lam_T(B^s_{2,r})``.

    ``add(f, dt)`` takes a sample ``dt`` after the previous one (the first
    sample's ``dt`` is ignored).  Integrals use the trapezoidal rule on
    ``||Delta_q f||^lam``; ``lam = inf`` keeps the running per-shell supremum.
    """

    def __init__(self, grid: Grid, lam: float = 1.0):
        if lam < 1:
            raise ValueError("lam must be >= 1")
        self.grid = grid
        self.lam = lam
        self.values = np.zeros(len(grid.bank.qs))
        self.elapsed = 0.0
        self._prev = None

    def add(self, f_hat: np.ndarray, dt: float = 0.0) -> "TimeNormAccumulator":
        shells = self.grid.bank.shell_norms(f_hat)
        if self.lam == math.inf:
            self.values = np.maximum(self.values, shells)
        else:
            cur = shells**self.lam
            if self._prev is not None:
                if dt <= 0:
                    raise ValueError("dt must be positive")
                self.values = self.values + 0.5 * dt * (self._prev + cur)
                self.elapsed += dt
            self._prev = cur
        return self

    def shell_values(self) -> np.ndarray:
        if self.lam == math.inf:
            return self.values.copy()
        return self.values ** (1.0 / self.lam)

    def norm(self, s: float, r: float = 1.0, mu: float | None = None) -> float:
        """Besov-type (``mu is None``) or hybrid-weighted time-space norm."""
        qs = self.grid.bank.qs
        if mu is None:
            return _lr(2.0 ** (qs * s) * self.shell_values(), r)
        return float(np.sum(hybrid_weight(qs, s, r, mu) * self.shell_values()))


def accumulate_time_norm(acc: TimeNormAccumulator, f_hat: np.ndarray, dt: float) -> TimeNormAccumulator:
    """Add the sample ``f_hat`` taken ``dt`` after the previous one."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    return acc.add(f_hat, dt)


def _shell_stack(grid: Grid, f_hat: np.ndarray, low: bool, shift: int = 0) -> np.ndarray:
    """Real-space samples of ``Delta_q f`` (or ``S_{q+shift} f``) for every shell q."""
    bank = grid.bank
    if low:
        mult = np.stack([bank.low_multiplier(q + shift) for q in bank.qs])
    else:
        mult = bank.multipliers
    lead = f_hat.ndim - grid.dim
    mult = mult.reshape((len(bank.qs),) + (1,) * lead + grid.shape)
    return sp.inverse_transform(grid, mult * f_hat[None])


def paraproduct(grid: Grid, u_hat: np.ndarray, f_hat: np.ndarray) -> np.ndarray:
    """``T_u f = sum_q S_{q-1} u  Delta_q f`` (dealiased)."""
    lows = _shell_stack(grid, u_hat, low=True, shift=-1)
    blocks = _shell_stack(grid, f_hat, low=False)
    return sp.to_spectral(grid, np.sum(lows * blocks, axis=0))


def remainder(grid: Grid, u_hat: np.ndarray, f_hat: np.ndarray) -> np.ndarray:
    """``R(u, f) = sum_q Delta_q u (Delta_{q-1} + Delta_q + Delta_{q+1}) f``.

    The product of the two means is added here, so that
    ``T_u f + T_f u + R(u, f) = u f`` holds for fields with nonzero mean.
    """
    bu = _shell_stack(grid, u_hat, low=False)
    bf = _shell_stack(grid, f_hat, low=False)
    tilde = bf.copy()
    tilde[1:] += bf[:-1]
    tilde[:-1] += bf[1:]
    total = np.sum(bu * tilde, axis=0)
    mean_part = sp.mean(grid, u_hat) * sp.mean(grid, f_hat)
    out = sp.to_spectral(grid, total)
    out[(Ellipsis,) + (0,) * grid.dim] += mean_part
    return out


def bony_residual(grid: Grid, u_hat: np.ndarray, f_hat: np.ndarray) -> float:
    """``||uf - T_u f - T_f u - R(u,f)|| / ||uf||``."""
    prod = sp.pointwise_product(grid, u_hat, f_hat)
    parts = paraproduct(grid, u_hat, f_hat) + paraproduct(grid, f_hat, u_hat) + remainder(grid, u_hat, f_hat)
    den = sp.l2_norm(grid, prod)
    return sp.l2_norm(grid, prod - parts) / den if den > 0 else sp.l2_norm(grid, parts)


def commutator(grid: Grid, u_hat: np.ndarray, e_hat: np.ndarray) -> np.ndarray:
    """Row-wise ``Lambda^-1 d_j(u.grad E_ij) - u.grad(Lambda^-1 d_j E_ij)``."""
    adv = sp.advect(grid, u_hat, e_hat)
    first = sum(sp.riesz(grid, adv[:, j], j) for j in range(grid.dim))
    c = sum(sp.riesz(grid, e_hat[:, j], j) for j in range(grid.dim))
    return first - sp.advect(grid, u_hat, c)


def critical_norm(grid: Grid, v_hat: np.ndarray, e_hat: np.ndarray) -> float:
    """``||v||_{B^{N/2-1}} + ||E||_{B^{N/2}}``."""
    half = grid.dim / 2.0
    return besov_norm(grid, v_hat, half - 1.0) + besov_norm(grid, e_hat, half)


def dilation_defect(grid: Grid, v_hat: np.ndarray, e_hat: np.ndarray, factor: int = 2) -> float:
    """Relative change of the critical norm under ``(v, E) -> (l v(l x), E(l x))``.

    Torus shells keep their ``L^2`` mass under dilation, while on the whole
    space they lose ``l^{-N/2}``; the dilated norm is renormalized by that
    factor before comparing.
    """
    before = critical_norm(grid, v_hat, e_hat)
    v2 = factor * sp.dilate(grid, v_hat, factor)
    e2 = sp.dilate(grid, e_hat, factor)
    after = critical_norm(grid, v2, e2) * factor ** (-grid.dim / 2.0)
    return abs(after - before) / before

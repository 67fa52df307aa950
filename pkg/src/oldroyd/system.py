"""Right-hand sides of the Hookean viscoelastic system and constraint monitors.

Two equivalent formulations are provided:

* ``(v, E)``:  ``v_t = P[-v.grad v + E_jk d_j E_ik + d_j E_ij] + mu Lap v``,
  ``E_t = -v.grad E + grad(v) E + grad(v)``;
* ``(v, c)`` with ``c = Lambda^-1 div E`` (row-wise), where the transport of
  ``E`` turns into a transport of ``c`` plus a commutator.

The pressure is eliminated by the Leray projector ``P``.  The identity matrix
in ``F = I + E`` is never stored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from oldroyd import spectral as sp
from oldroyd.littlewood_paley import commutator
from oldroyd.spectral import Grid


@dataclass(frozen=True, eq=False)
class State:
    """Velocity ``v`` (shape ``(N, *grid)``) and strain ``E`` (``(N, N, *grid)``)."""

    grid: Grid
    v: np.ndarray
    E: np.ndarray
    t: float = 0.0

    @classmethod
    def rest(cls, grid: Grid) -> "State":
        n = grid.dim
        return cls(grid, np.zeros((n,) + grid.shape, complex), np.zeros((n, n) + grid.shape, complex))

    def replace(self, **kw) -> "State":
        return State(kw.get("grid", self.grid), kw.get("v", self.v), kw.get("E", self.E), kw.get("t", self.t))


@dataclass(frozen=True)
class ConstraintResiduals:
    det_drift: float
    div_ET: float
    curl_compat: float

    def as_dict(self) -> dict:
        return {"det_drift": self.det_drift, "div_ET": self.div_ET, "curl_compat": self.curl_compat}

    def within(self, det_drift: float, div_ET: float, curl_compat: float) -> bool:
        return self.det_drift <= det_drift and self.div_ET <= div_ET and self.curl_compat <= curl_compat


def _mask(grid: Grid, dealias: bool):
    return grid.dealias_mask if dealias else 1.0


def explicit_terms(
    grid: Grid,
    v: np.ndarray,
    E: np.ndarray,
    nonlinear: bool = True,
    coupling: bool = True,
    dealias: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Everything except ``mu Lap v``: returns ``(P[...], dE)``.

    ``coupling`` switches the linear elastic terms ``d_j E_ij`` and
    ``grad v``; ``nonlinear`` switches the quadratic ones.
    """
    n = grid.dim
    dv = np.zeros_like(v)
    dE = np.zeros_like(E)
    if nonlinear:
        grad_v = sp.gradient(grid, v)
        grad_E = sp.gradient(grid, E)
        stack = np.concatenate(
            [v.reshape((n,) + grid.shape), grad_v.reshape((n * n,) + grid.shape),
             E.reshape((n * n,) + grid.shape), grad_E.reshape((n**3,) + grid.shape)]
        )
        phys = sp.inverse_transform(grid, stack)
        pv = phys[:n]
        pgv = phys[n : n + n * n].reshape((n, n) + grid.shape)  # [i, j] = d_j v_i
        pE = phys[n + n * n : n + 2 * n * n].reshape((n, n) + grid.shape)
        pgE = phys[n + 2 * n * n :].reshape((n, n, n) + grid.shape)  # [i, j, k] = d_k E_ij
        nv = -np.einsum("k...,ik...->i...", pv, pgv) + np.einsum("jk...,ikj...->i...", pE, pgE)
        nE = -np.einsum("k...,ijk...->ij...", pv, pgE) + np.einsum("ik...,kj...->ij...", pgv, pE)
        out = sp.transform(grid, np.concatenate([nv, nE.reshape((n * n,) + grid.shape)]))
        out *= _mask(grid, dealias)
        dv = dv + out[:n]
        dE = dE + out[n:].reshape((n, n) + grid.shape)
    if coupling:
        dv = dv + sp.divergence(grid, E)
        dE = dE + sp.gradient(grid, v)
    return sp.leray_project(grid, dv), dE


def rhs_vE(grid: Grid, state: State, mu: float, **kw) -> tuple[np.ndarray, np.ndarray]:
    dv, dE = explicit_terms(grid, state.v, state.E, **kw)
    return dv + mu * sp.laplacian(grid, state.v), dE


def momentum_unprojected(grid: Grid, state: State) -> np.ndarray:
    """``-v.grad v + E_jk d_j E_ik + d_j E_ij`` before projection."""
    v, E = state.v, state.E
    pE = sp.inverse_transform(grid, E)
    pgE = sp.inverse_transform(grid, sp.gradient(grid, E))
    elastic = sp.to_spectral(grid, np.einsum("jk...,ikj...->i...", pE, pgE))
    return -sp.advect(grid, v, v) + elastic + sp.divergence(grid, E)


def pressure_recover(grid: Grid, state: State) -> np.ndarray:
    """Mean-zero pressure with ``grad p = (I - P)`` of the momentum forcing."""
    m = momentum_unprojected(grid, state)
    return -1j * np.sum(grid.k * m, axis=0) * grid.inv_ksq


def to_c(grid: Grid, E: np.ndarray) -> np.ndarray:
    """``c_i = Lambda^-1 d_j E_ij``; ``E`` must obey the mean-zero gauge."""
    mean = sp.mean(grid, E)
    if np.any(np.abs(mean) > 1e-13 * max(1.0, float(np.max(np.abs(E))))):
        raise ValueError("to_c needs a mean-zero strain (mean-zero gauge)")
    return sum(sp.riesz(grid, E[:, j], j) for j in range(grid.dim))


def rhs_vc(grid: Grid, v: np.ndarray, c: np.ndarray, E: np.ndarray, mu: float) -> tuple[np.ndarray, np.ndarray]:
    """Right-hand side of the ``(v, c)`` formulation."""
    n = grid.dim
    to_c(grid, E)
    pE = sp.inverse_transform(grid, E)
    pgE = sp.inverse_transform(grid, sp.gradient(grid, E))
    pgv = sp.inverse_transform(grid, sp.gradient(grid, v))
    elastic = sp.to_spectral(grid, np.einsum("jk...,ikj...->i...", pE, pgE))
    stretch = sp.to_spectral(grid, np.einsum("ik...,kj...->ij...", pgv, pE))
    lam_c = sp.lambda_power(grid, c, 1.0)
    dv = sp.leray_project(grid, -sp.advect(grid, v, v) + elastic + lam_c) + mu * sp.laplacian(grid, v)
    dc = (
        -sp.advect(grid, v, c)
        - commutator(grid, v, E)
        + sum(sp.riesz(grid, stretch[:, j], j) for j in range(n))
        - sp.lambda_power(grid, v, 1.0)
    )
    return dv, dc


def formulation_defect(grid: Grid, state: State, mu: float) -> float:
    """``||Lambda^-1 div dE - dc|| / ||dc||`` between the two formulations."""
    _, dE = rhs_vE(grid, state, mu)
    c = to_c(grid, state.E)
    _, dc = rhs_vc(grid, state.v, c, state.E, mu)
    lhs = sum(sp.riesz(grid, dE[:, j], j) for j in range(grid.dim))
    den = sp.l2_norm(grid, dc)
    return sp.l2_norm(grid, lhs - dc) / den if den > 0 else sp.l2_norm(grid, lhs)


def curl_residual_tensor(grid: Grid, E: np.ndarray) -> np.ndarray:
    """``d_m E_ij - d_j E_im - d_l(E_lj E_im - E_lm E_ij)``, indexed ``[i, j, m]``."""
    pE = sp.inverse_transform(grid, E)
    # q[l, j, i, m] = E_lj E_im - E_lm E_ij
    prod = np.einsum("lj...,im...->ljim...", pE, pE)
    q = prod - np.swapaxes(prod, 1, 3)
    q_hat = sp.to_spectral(grid, q)
    div_q = np.sum(1j * grid.k.reshape((grid.dim,) + (1,) * 3 + grid.shape) * q_hat, axis=0)  # [j, i, m]
    grad_E = sp.gradient(grid, E)  # [i, j, m] = d_m E_ij
    lin = grad_E - np.swapaxes(grad_E, 1, 2)
    return lin - np.swapaxes(div_q, 0, 1)


def constraint_residuals(grid: Grid, state_or_E) -> ConstraintResiduals:
    E = state_or_E.E if isinstance(state_or_E, State) else state_or_E
    det = sp.det_I_plus_E(grid, E)
    det_drift = float(np.max(np.abs(det - 1.0)))
    div_et = sp.l2_norm(grid, sp.divergence_transpose(grid, E))
    curl = sp.l2_norm(grid, curl_residual_tensor(grid, E))
    return ConstraintResiduals(det_drift, div_et, curl)


def elastic_energy(grid: Grid, state: State) -> float:
    """``(||v||^2 + ||E||^2) / 2``; the constant ``tr(I)/2`` is dropped."""
    return 0.5 * (sp.l2_norm(grid, state.v) ** 2 + sp.l2_norm(grid, state.E) ** 2)


def dissipation(grid: Grid, state: State, mu: float) -> float:
    """``mu ||grad v||^2``."""
    return mu * sp.l2_norm(grid, sp.gradient(grid, state.v)) ** 2

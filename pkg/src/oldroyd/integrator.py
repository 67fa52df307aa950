"""Time advancement of the nonlinear system.

Direct mode (:class:`Integrator`, :func:`integrate`) treats ``mu Lap v``
implicitly and everything else explicitly with the shared IMEX stepper.
Picard mode (:func:`picard_solve`) rebuilds the solution as the limit of
linear problems on the whole interval, splitting ``v = u + v_bar`` with
``v_bar`` the heat flow of ``v0``.  Both modes use the same stepper and ``dt``,
so their fixed points agree up to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from oldroyd import spectral as sp
from oldroyd.imex import SCHEMES, IMEXStepper
from oldroyd.littlewood_paley import besov_norm
from oldroyd.spectral import Grid
from oldroyd.system import State, explicit_terms


@dataclass(frozen=True)
class PicardConfig:
    max_iters: int = 40
    contraction_tol: float = 1e-13


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float
    T_end: float
    mu: float = 1.0
    scheme: str = "imex_cn_ab2"
    picard: PicardConfig | None = None
    dealias: bool = True
    cfl: float = 0.5
    nonlinear: bool = True
    coupling: bool = True
    blowup_factor: float = 1e3

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.T_end < 0:
            raise ValueError("T_end must be non-negative")
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")

    @property
    def nsteps(self) -> int:
        return int(round(self.T_end / self.dt))


class IntegrationHalted(RuntimeError):
    """Non-finite values appeared; ``last_good`` is the state before the failing step."""

    def __init__(self, message: str, last_good: State):
        super().__init__(message)
        self.last_good = last_good


def _pack(v: np.ndarray, E: np.ndarray) -> np.ndarray:
    n = v.shape[0]
    return np.concatenate([v, E.reshape((n * n,) + E.shape[2:])])


def _unpack(z: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    return z[:n], z[n:].reshape((n, n) + z.shape[1:])


class Integrator:
    """Stateful stepper: keeps the multistep history between calls to :meth:`step`."""

    def __init__(self, grid: Grid, cfg: IntegratorConfig):
        self.grid = grid
        self.cfg = cfg
        n = grid.dim
        self.lin = np.concatenate(
            [np.broadcast_to(-cfg.mu * grid.ksq, (n,) + grid.shape), np.zeros((n * n,) + grid.shape)]
        )
        self.stepper = IMEXStepper(self.lin, cfg.dt, cfg.scheme)
        self.kmax = grid.cutoff * math.sqrt(grid.dim)
        self.substepped = 0

    def reset(self):
        self.stepper.reset()

    def _explicit(self, z: np.ndarray) -> np.ndarray:
        v, E = _unpack(z, self.grid.dim)
        cfg = self.cfg
        dv, dE = explicit_terms(self.grid, v, E, cfg.nonlinear, cfg.coupling, cfg.dealias)
        return _pack(dv, dE)

    def _finish(self, z: np.ndarray, t: float) -> State:
        v, E = _unpack(z, self.grid.dim)
        v = sp.zero_mean(self.grid, sp.leray_project(self.grid, v))
        E = sp.zero_mean(self.grid, E)
        return State(self.grid, v, E, t)

    def step(self, state: State) -> State:
        cfg = self.cfg
        z = _pack(state.v, state.E)
        vmax = sp.linf_norm(self.grid, state.v) if cfg.nonlinear else 0.0
        courant = cfg.dt * vmax * self.kmax
        if courant > cfg.cfl:
            # reduced step: fresh first-order startup, main history discarded
            m = math.ceil(courant / cfg.cfl)
            sub = IMEXStepper(self.lin, cfg.dt / m, cfg.scheme)
            for _ in range(m):
                z = sub.step(z, self._explicit(z))
            self.stepper.reset()
            self.substepped += 1
        else:
            z = self.stepper.step(z, self._explicit(z))
        if not np.all(np.isfinite(z)):
            raise IntegrationHalted(f"non-finite values in step from t={state.t:.6g}", state)
        return self._finish(z, state.t + cfg.dt)


@dataclass
class IntegrationResult:
    state: State
    steps: int
    guard_tripped: bool = False
    halted: bool = False
    message: str = ""
    substepped: int = 0


def integrate(grid: Grid, state: State, cfg: IntegratorConfig, observer=None, cadence: int = 1) -> IntegrationResult:
    """Advance to ``cfg.T_end``; ``observer(state)`` is called at t=0, every
    ``cadence`` steps and at the final step.

    Halts (without raising) when ``||v||_{B^{N/2-1}}`` exceeds
    ``cfg.blowup_factor`` times its initial value, or on non-finite values.
    """
    integ = Integrator(grid, cfg)
    s = grid.dim / 2 - 1
    v0 = besov_norm(grid, state.v, s)
    t0 = state.t
    if observer is not None:
        observer(state)
    nsteps = cfg.nsteps
    for i in range(nsteps):
        try:
            new = integ.step(state)
        except IntegrationHalted as err:
            return IntegrationResult(err.last_good, i, halted=True, message=str(err), substepped=integ.substepped)
        state = new.replace(t=t0 + (i + 1) * cfg.dt)
        last = i == nsteps - 1
        if observer is not None and ((i + 1) % cadence == 0 or last):
            observer(state)
        if v0 > 0 and besov_norm(grid, state.v, s) > cfg.blowup_factor * v0:
            return IntegrationResult(
                state, i + 1, guard_tripped=True, message=f"blow-up guard at t={state.t:.6g}",
                substepped=integ.substepped,
            )
    return IntegrationResult(state, nsteps, substepped=integ.substepped)


@dataclass
class PicardDiagnostics:
    """``differences[n] = d_n`` between iterates ``n+1`` and ``n`` (``n >= 0``);
    ``ratios`` holds ``(n, d_{n+1}/d_n)`` for ``n >= 1``."""

    differences: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    converged: bool = False
    diverged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.differences)


@dataclass
class PicardResult:
    grid: Grid
    times: np.ndarray
    u: list
    E: list
    v_bar: list
    diagnostics: PicardDiagnostics

    def state(self, k: int = -1) -> State:
        """``(v, E)`` at time index ``k`` with ``v = u + v_bar``."""
        return State(self.grid, self.u[k] + self.v_bar[k], self.E[k], float(self.times[k]))


def _picard_sweep(grid, cfg, E0, v_bar, u_prev, E_prev):
    """One linear solve over the interval with ``(u^n, E^n)`` frozen."""
    n = grid.dim
    mask = grid.dealias_mask if cfg.dealias else 1.0
    st_u = IMEXStepper(-cfg.mu * grid.ksq, cfg.dt, cfg.scheme)
    st_E = IMEXStepper(np.zeros(grid.shape), cfg.dt, cfg.scheme)
    u = np.zeros_like(v_bar[0])
    E = E0.astype(complex)
    us, Es = [u], [E]
    for k in range(len(v_bar) - 1):
        un, En, vb = u_prev[k], E_prev[k], v_bar[k]
        grad_un = sp.gradient(grid, un)
        grad_vb = sp.gradient(grid, vb)
        grad_E = sp.gradient(grid, E)
        grad_u = sp.gradient(grid, u)
        phys = sp.inverse_transform(
            grid, np.concatenate([x.reshape((-1,) + grid.shape) for x in (un + vb, grad_un + grad_vb, En, E, grad_E, grad_u)])
        )
        sizes = [n, n * n, n * n, n * n, n**3, n * n]
        parts = np.split(phys, np.cumsum(sizes)[:-1])
        w = parts[0]
        gw = parts[1].reshape((n, n) + grid.shape)  # [i, j] = d_j (u^n + v_bar)_i
        pEn = parts[2].reshape((n, n) + grid.shape)
        pE = parts[3].reshape((n, n) + grid.shape)
        pgE = parts[4].reshape((n, n, n) + grid.shape)
        pgu = parts[5].reshape((n, n) + grid.shape)
        pgvb = sp.inverse_transform(grid, grad_vb)
        nE = -np.einsum("k...,ijk...->ij...", w, pgE) + np.einsum("ik...,kj...->ij...", gw, pEn)
        nu = (
            -np.einsum("k...,ik...->i...", w, pgu)
            - np.einsum("k...,ik...->i...", w, pgvb)
            + np.einsum("jk...,ikj...->i...", pE, pgE)
        )
        out = sp.transform(grid, np.concatenate([nu, nE.reshape((n * n,) + grid.shape)])) * mask
        dE = out[n:].reshape((n, n) + grid.shape) + grad_un + grad_vb
        du = sp.leray_project(grid, out[:n] + sp.divergence(grid, E))
        u = sp.zero_mean(grid, sp.leray_project(grid, st_u.step(u, du)))
        E = sp.zero_mean(grid, st_E.step(E, dE))
        us.append(u)
        Es.append(E)
    return us, Es


def picard_solve(grid: Grid, data: State, cfg: IntegratorConfig) -> PicardResult:
    """Picard iteration over ``[0, cfg.T_end]`` for ``u = v - v_bar``.

    Iterate 0 is ``(u, E) = (0, 0)``.  Iterate ``n+1`` solves, with the same
    stepper and ``dt`` as direct mode,

        E_t + (u^n + v_bar).grad E = (grad u^n + grad v_bar) E^n + grad u^n + grad v_bar
        u_t + (u^n + v_bar).grad u - mu Lap u + grad p
            = -(u^n + v_bar).grad v_bar + E_jk d_j E_ik + d_j E_ij

    from ``(0, E0)``.  ``d_n`` is the ``L^inf_T`` distance of successive
    iterates in ``B^{N/2-1}`` (``u``) plus ``B^{N/2}`` (``E``).  Iteration
    stops when ``d_n <= contraction_tol``, after ``max_iters``, or when
    ``d_n`` has increased three times in a row (reported as divergence).
    """
    pc = cfg.picard or PicardConfig()
    K = cfg.nsteps
    st = IMEXStepper(-cfg.mu * grid.ksq, cfg.dt, cfg.scheme)
    heat = st.heat_factor
    v_bar = [data.v.astype(complex)]
    for _ in range(K):
        v_bar.append(heat * v_bar[-1])
    zero_u = np.zeros_like(v_bar[0])
    zero_E = np.zeros_like(data.E, dtype=complex)
    us = [zero_u] * (K + 1)
    Es = [zero_E] * (K + 1)
    diag = PicardDiagnostics()
    su, sE = grid.dim / 2 - 1, grid.dim / 2
    rising = 0
    for it in range(pc.max_iters):
        new_u, new_E = _picard_sweep(grid, cfg, data.E, v_bar, us, Es)
        d = max(besov_norm(grid, a - b, su) for a, b in zip(new_u, us)) + max(
            besov_norm(grid, a - b, sE) for a, b in zip(new_E, Es)
        )
        diag.differences.append(d)
        if it >= 2:
            prev = diag.differences[-2]
            diag.ratios.append((it - 1, d / prev if prev > 0 else 0.0))
        if it >= 1:
            rising = rising + 1 if d > diag.differences[-2] else 0
        us, Es = new_u, new_E
        if d <= pc.contraction_tol:
            diag.converged = True
            break
        if rising >= 3:
            diag.diverged = True
            break
    times = data.t + cfg.dt * np.arange(K + 1)
    return PicardResult(grid, times, us, Es, v_bar, diag)


@dataclass(frozen=True)
class UniquenessReport:
    scale: float
    initial_difference: float
    max_difference: float
    growth_factor: float
    v_integral: float
    identical: bool


def difference_norm(grid: Grid, dv: np.ndarray, dE: np.ndarray) -> float:
    """``||dv||_{B^{N/2-2}} + ||dE||_{B^{N/2-1}}``."""
    half = grid.dim / 2
    return besov_norm(grid, dv, half - 2) + besov_norm(grid, dE, half - 1)


def uniqueness_probe(
    grid: Grid, data: State, perturbation_scale: float, cfg: IntegratorConfig, direction: np.ndarray | None = None,
    seed: int = 0,
) -> UniquenessReport:
    """Run from ``data`` and from ``data`` with ``v`` perturbed; report the
    growth of their distance in ``B^{N/2-2} x B^{N/2-1}`` over ``[0, T_end]``.

    The perturbation is a divergence-free field (``direction``, or a seeded
    random one) normalized so ``||dv||_{B^{N/2-2}} = perturbation_scale``.
    """
    from oldroyd.initial_data import random_solenoidal

    if direction is None:
        direction = random_solenoidal(grid, (1, 4), np.random.default_rng(seed))
    half = grid.dim / 2
    nrm = besov_norm(grid, direction, half - 2)
    delta = direction * (perturbation_scale / nrm) if perturbation_scale > 0 else np.zeros_like(direction)
    a = data
    b = data.replace(v=data.v + delta)
    ia, ib = Integrator(grid, cfg), Integrator(grid, cfg)
    d0 = difference_norm(grid, b.v - a.v, b.E - a.E)
    dmax = d0
    identical = bool(np.array_equal(a.v, b.v) and np.array_equal(a.E, b.E))
    s_hi = half + 1
    vint = 0.0
    prev = besov_norm(grid, a.v, s_hi)
    for _ in range(cfg.nsteps):
        a, b = ia.step(a), ib.step(b)
        cur = besov_norm(grid, a.v, s_hi)
        vint += 0.5 * cfg.dt * (prev + cur)
        prev = cur
        dmax = max(dmax, difference_norm(grid, b.v - a.v, b.E - a.E))
        identical = identical and bool(np.array_equal(a.v, b.v) and np.array_equal(a.E, b.E))
    factor = dmax / d0 if d0 > 0 else (1.0 if identical else math.inf)
    return UniquenessReport(perturbation_scale, d0, dmax, factor, vint, identical)

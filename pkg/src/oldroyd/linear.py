"""Linear building blocks: heat flow, transport, convected Stokes and the
mixed parabolic-hyperbolic ``(v, c)`` system.

The mixed system

    v_t + u.grad v + grad p - mu Lap v - Lambda c = G
    c_t + u.grad c + Lambda v = L

is advanced with the same :class:`~oldroyd.imex.IMEXStepper` as the
nonlinear solver.  At ``u = G = L = 0`` every Fourier mode evolves by
``exp(t M)`` with ``M = [[-mu |xi|^2, |xi|], [-|xi|, 0]]``, which gives an
independent oracle for the time stepper.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from oldroyd import spectral as sp
from oldroyd.imex import IMEXStepper
from oldroyd.littlewood_paley import TimeNormAccumulator, besov_norm, hybrid_norm, hybrid_weight
from oldroyd.spectral import Grid


@dataclass(frozen=True)
class MixedModeMatrix:
    """Per-mode generator of the mixed system acting on ``(v_hat, c_hat)``."""

    xi_abs: float
    mu: float

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.xi_abs < 0:
            raise ValueError("|xi| must be non-negative")

    @property
    def matrix(self) -> np.ndarray:
        x = self.xi_abs
        return np.array([[-self.mu * x * x, x], [-x, 0.0]])

    @property
    def trace(self) -> float:
        return -self.mu * self.xi_abs**2

    @property
    def determinant(self) -> float:
        return self.xi_abs**2

    @property
    def eigenvalues(self) -> tuple[complex, complex]:
        """Roots of ``lam^2 + mu |xi|^2 lam + |xi|^2``; the fast one first.

        The real-root branch uses the cancellation-free form
        ``lam_1 = -(b + sqrt(b^2 - 4c)) / 2``, ``lam_2 = c / lam_1``.
        """
        b = self.mu * self.xi_abs**2
        c = self.xi_abs**2
        if c == 0:
            return complex(0.0), complex(0.0)
        disc = b * b - 4 * c
        if disc >= 0:
            lam1 = -(b + math.sqrt(disc)) / 2
            return complex(lam1), complex(c / lam1)
        root = cmath.sqrt(disc)
        return (-b + root) / 2, (-b - root) / 2

    def characteristic_residual(self, lam: complex) -> float:
        """``|lam^2 + b lam + c|`` relative to the largest of its three terms."""
        b = self.mu * self.xi_abs**2
        c = self.xi_abs**2
        terms = (abs(lam) ** 2, b * abs(lam), c)
        scale = max(terms)
        return abs(lam * lam + b * lam + c) / scale if scale > 0 else 0.0

    def propagator(self, t: float) -> np.ndarray:
        return scipy.linalg.expm(self.matrix * t)


def mixed_mode_evolve(
    xi_abs: np.ndarray,
    mu: np.ndarray,
    z0: np.ndarray,
    T: float,
    dt: float,
    scheme: str = "imex_cn_ab2",
) -> np.ndarray:
    """Advance ``(v_hat, c_hat)`` of independent modes to time ``T``.

    ``xi_abs`` and ``mu`` broadcast together; ``z0`` has a leading axis of
    length 2 and broadcasts against them.  The stepper is the production one,
    with diffusion implicit and the ``+-|xi|`` coupling explicit.
    """
    xi = np.asarray(xi_abs, dtype=float)
    mu = np.asarray(mu, dtype=float)
    shape = np.broadcast(xi, mu, z0[0]).shape
    xi = np.broadcast_to(xi, shape)
    lin = np.stack([-np.broadcast_to(mu, shape) * xi**2, np.zeros(shape)])
    z = np.array(np.broadcast_to(z0, (2,) + shape), dtype=complex)
    stepper = IMEXStepper(lin, dt, scheme)
    nsteps = int(round(T / dt))
    if not math.isclose(nsteps * dt, T, rel_tol=1e-9):
        raise ValueError("T must be a multiple of dt")
    for _ in range(nsteps):
        z = stepper.step(z, np.stack([xi * z[1], -xi * z[0]]))
    return z


def propagator_errors(mus, xis, T: float, dt: float, scheme: str = "imex_cn_ab2") -> tuple[np.ndarray, np.ndarray]:
    """Stepped per-mode propagators against ``expm(T M)`` on a ``(mu, xi)`` grid.

    Returns ``(matrix_err, column_err)``: the spectral-norm relative error
    ``||Phi_num - Phi|| / ||Phi||`` and the worst relative error of a single
    column (evolution of ``(1, 0)`` or ``(0, 1)``).  The column error is larger
    for ``(1, 0)`` at high ``|xi|``, where the exact state is small.
    """
    M, X = np.meshgrid(np.asarray(mus, float), np.asarray(xis, float), indexing="ij")
    cols = [mixed_mode_evolve(X, M, np.array([1.0, 0.0]).reshape(2, 1, 1), T, dt, scheme),
            mixed_mode_evolve(X, M, np.array([0.0, 1.0]).reshape(2, 1, 1), T, dt, scheme)]
    matrix_err = np.zeros(M.shape)
    column_err = np.zeros(M.shape)
    for idx in np.ndindex(M.shape):
        exact = MixedModeMatrix(X[idx], M[idx]).propagator(T)
        num = np.array([[c[0][idx], c[1][idx]] for c in cols]).T.real
        diff = num - exact
        matrix_err[idx] = np.linalg.norm(diff, 2) / np.linalg.norm(exact, 2)
        column_err[idx] = max(np.linalg.norm(diff[:, j]) / np.linalg.norm(exact[:, j]) for j in range(2))
    return matrix_err, column_err


def dispersion_table(mus, xis) -> list[tuple[float, float, float, float, float, float]]:
    """Rows ``(mu, |xi|, Re lam1, Im lam1, Re lam2, Im lam2)``."""
    rows = []
    for mu in mus:
        for xi in xis:
            l1, l2 = MixedModeMatrix(float(xi), float(mu)).eigenvalues
            rows.append((float(mu), float(xi), l1.real, l1.imag, l2.real, l2.imag))
    return rows


def format_dispersion_table(rows) -> str:
    lines = ["# mu xi_abs re_lam1 im_lam1 re_lam2 im_lam2"]
    lines += [" ".join(f"{x:.17g}" for x in row) for row in rows]
    return "\n".join(lines) + "\n"


def _is_solenoidal(grid: Grid, v_hat: np.ndarray, rtol: float = 1e-10) -> bool:
    div = sp.l2_norm(grid, sp.divergence(grid, v_hat))
    scale = sp.l2_norm(grid, sp.gradient(grid, v_hat))
    return div <= rtol * max(scale, 1e-300) or div == 0.0


def heat_flow(grid: Grid, v0: np.ndarray, mu: float, t: float) -> np.ndarray:
    """Exact heat semigroup ``exp(mu t Lap)`` applied to mean-zero data."""
    if t < 0:
        raise ValueError("heat flow is only defined for t >= 0")
    if np.any(np.abs(sp.mean(grid, v0)) > 1e-14 * max(1.0, float(np.max(np.abs(v0))))):
        raise ValueError("heat_flow expects mean-zero data")
    return np.exp(-mu * grid.ksq * t) * v0


def heat_flow_time_norm(grid: Grid, v0: np.ndarray, mu: float, T: float, dt: float, s: float) -> float:
    """``||heat_flow(v0)||_{L^1_T(B^s)}`` by trapezoidal quadrature on a ``dt`` grid."""
    acc = TimeNormAccumulator(grid, 1.0)
    nsteps = int(round(T / dt))
    for i in range(nsteps + 1):
        acc.add(heat_flow(grid, v0, mu, i * dt), dt)
    return acc.norm(s, 1.0)


def transport_rhs(grid: Grid, f: np.ndarray, v: np.ndarray, g) -> np.ndarray:
    out = -sp.advect(grid, v, f)
    if g is not None:
        out = out + g
    return out


def transport_step(
    grid: Grid, f: np.ndarray, v: np.ndarray, g: np.ndarray | None, dt: float, method: str = "heun"
) -> np.ndarray:
    """One explicit step of ``f_t + div(v f) = g`` for a solenoidal ``v``.

    With ``div v = 0`` the flux form equals ``v.grad f``.  ``method`` is
    ``"euler"``, ``"heun"`` or ``"rk4"``; ``g`` is held fixed over the step.
    """
    if not _is_solenoidal(grid, v):
        raise ValueError("transport_step needs a divergence-free velocity")
    rhs = lambda y: transport_rhs(grid, y, v, g)  # noqa: E731
    if method == "euler":
        return f + dt * rhs(f)
    if method == "heun":
        k1 = rhs(f)
        k2 = rhs(f + dt * k1)
        return f + 0.5 * dt * (k1 + k2)
    if method == "rk4":
        k1 = rhs(f)
        k2 = rhs(f + 0.5 * dt * k1)
        k3 = rhs(f + 0.5 * dt * k2)
        k4 = rhs(f + dt * k3)
        return f + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    raise ValueError(f"unknown transport method {method!r}")


def stokes_convection_step(
    grid: Grid, u: np.ndarray, v_conv: np.ndarray, f: np.ndarray | None, mu: float, dt: float
) -> np.ndarray:
    """Exponential-Euler step of ``u_t + v.grad u - mu Lap u + grad Pi = f``.

    Diffusion is integrated exactly; convection and forcing are frozen over
    the step and projected, so the output is divergence-free.
    """
    z = -mu * grid.ksq * dt
    expz = np.exp(z)
    phi1 = np.where(np.abs(z) < 1e-8, 1.0 + z / 2, np.expm1(z) / np.where(z == 0, 1.0, z))
    forcing = -sp.advect(grid, v_conv, u)
    if f is not None:
        forcing = forcing + f
    return sp.leray_project(grid, expz * u + dt * phi1 * forcing)


def stokes_estimate_ratio(
    grid: Grid, u0: np.ndarray, v_conv: np.ndarray, f: np.ndarray, mu: float, T: float, dt: float, s: float
) -> float:
    """LHS/RHS of the convected Stokes estimate with time-independent ``f``.

    LHS = ``||u||_{L~inf_T(B^{s-1})} + mu ||u||_{L~1_T(B^{s+1})}``,
    RHS = ``||u0||_{B^{s-1}} + ||f||_{L~1_T(B^{s-1})}``; the exponential
    factor and the constant are not included.
    """
    sup = TimeNormAccumulator(grid, math.inf)
    l1 = TimeNormAccumulator(grid, 1.0)
    u = u0
    sup.add(u)
    l1.add(u)
    for _ in range(int(round(T / dt))):
        u = stokes_convection_step(grid, u, v_conv, f, mu, dt)
        sup.add(u)
        l1.add(u, dt)
    lhs = sup.norm(s - 1) + mu * l1.norm(s + 1)
    rhs = besov_norm(grid, u0, s - 1) + T * besov_norm(grid, f, s - 1)
    return lhs / rhs if rhs > 0 else 0.0


@dataclass
class Trajectory:
    """Final ``(v, c)`` plus per-step shell norms for the time-space norms."""

    grid: Grid
    mu: float
    times: list = field(default_factory=list)
    v_shells: list = field(default_factory=list)
    c_shells: list = field(default_factory=list)
    u_shells: list = field(default_factory=list)
    forcing_shells: list = field(default_factory=list)  # (G shells, L shells)
    v0: np.ndarray | None = None
    c0: np.ndarray | None = None
    v: np.ndarray | None = None
    c: np.ndarray | None = None


def _at(x, t):
    return x(t) if callable(x) else x


def mixed_system_evolve(
    grid: Grid,
    v0: np.ndarray,
    c0: np.ndarray,
    mu: float,
    T: float,
    dt: float,
    u=None,
    G=None,
    L=None,
    scheme: str = "imex_cn_ab2",
) -> Trajectory:
    """Advance the mixed system; ``u``, ``G``, ``L`` are arrays or callables of ``t``."""
    for name, x in (("v0", v0), ("c0", c0)):
        if not _is_solenoidal(grid, x):
            raise ValueError(f"{name} must be divergence-free")
    if u is not None and not _is_solenoidal(grid, _at(u, 0.0)):
        raise ValueError("convecting field u must be divergence-free")
    n = grid.dim
    bank = grid.bank
    lin = np.concatenate([np.broadcast_to(-mu * grid.ksq, (n,) + grid.shape), np.zeros((n,) + grid.shape)])
    stepper = IMEXStepper(lin, dt, scheme)
    traj = Trajectory(grid, mu, v0=v0, c0=c0)
    z = np.concatenate([v0, c0]).astype(complex)

    def record(t, z):
        ut, gt, lt = _at(u, t), _at(G, t), _at(L, t)
        traj.times.append(t)
        traj.v_shells.append(bank.shell_norms(z[:n]))
        traj.c_shells.append(bank.shell_norms(z[n:]))
        zero = np.zeros(len(bank.qs))
        traj.u_shells.append(zero if ut is None else bank.shell_norms(ut))
        traj.forcing_shells.append(
            (zero if gt is None else bank.shell_norms(gt), zero if lt is None else bank.shell_norms(lt))
        )

    def explicit(t, z):
        v, c = z[:n], z[n:]
        dv = sp.lambda_power(grid, c, 1.0)
        dc = -sp.lambda_power(grid, v, 1.0)
        ut, gt, lt = _at(u, t), _at(G, t), _at(L, t)
        if ut is not None:
            dv = dv - sp.advect(grid, ut, v)
            dc = dc - sp.advect(grid, ut, c)
        if gt is not None:
            dv = dv + gt
        if lt is not None:
            dc = dc + lt
        return np.concatenate([sp.leray_project(grid, dv), dc])

    record(0.0, z)
    nsteps = int(round(T / dt))
    for i in range(nsteps):
        t = i * dt
        z = stepper.step(z, explicit(t, z))
        record((i + 1) * dt, z)
    traj.v, traj.c = z[:n], z[n:]
    return traj


@dataclass(frozen=True)
class EstimateReport:
    rho: float
    mu: float
    lhs: float
    rhs: float
    ratio: float
    u_integral: float


def _trapezoid(rows: np.ndarray, times: np.ndarray) -> np.ndarray:
    dt = np.diff(times)[:, None]
    return np.sum(0.5 * dt * (rows[1:] + rows[:-1]), axis=0)


def mixed_estimate_check(traj: Trajectory, rho: float, mu: float | None = None) -> EstimateReport:
    """Ratio of the ``X^rho_T`` norm of a mixed-system trajectory to its data.

    LHS = ``||v||_{L^inf_T(B^{rho-1})} + mu ||v||_{L^1_T(B^{rho+1})}
    + ||c||_{L^inf_T(B~^{rho,inf}_mu)} + mu ||c||_{L^1_T(B~^{rho,1}_mu)}``,
    RHS = ``||c0||_{B~^{rho,inf}_mu} + ||v0||_{B^{rho-1}}
    + int (||L||_{B~^{rho,inf}_mu} + ||G||_{B^{rho-1}})``.
    The constant and the exponential factor in ``int ||u||_{B^{N/2+1}}`` are
    not evaluated; that integral is reported alongside.
    """
    grid = traj.grid
    half = grid.dim / 2
    if not (1 - half < rho <= 1 + half):
        raise ValueError(f"rho must lie in (1 - N/2, 1 + N/2] = ({1 - half}, {1 + half}], got {rho}")
    mu = traj.mu if mu is None else mu
    qs = grid.bank.qs
    times = np.asarray(traj.times)
    vs = np.asarray(traj.v_shells)
    cs = np.asarray(traj.c_shells)
    us = np.asarray(traj.u_shells)
    gs = np.asarray([g for g, _ in traj.forcing_shells])
    ls = np.asarray([l for _, l in traj.forcing_shells])
    w_lo = 2.0 ** (qs * (rho - 1))
    w_hi = 2.0 ** (qs * (rho + 1))
    w_inf = hybrid_weight(qs, rho, math.inf, mu)
    w_one = hybrid_weight(qs, rho, 1.0, mu)
    lhs = (
        np.max(vs @ w_lo)
        + mu * float(_trapezoid(vs @ w_hi[:, None], times)[0])
        + np.max(cs @ w_inf)
        + mu * float(_trapezoid(cs @ w_one[:, None], times)[0])
    )
    forcing = (ls @ w_inf + gs @ w_lo)[:, None]
    rhs = float(cs[0] @ w_inf + vs[0] @ w_lo + _trapezoid(forcing, times)[0])
    u_int = float(_trapezoid((us @ 2.0 ** (qs * (half + 1)))[:, None], times)[0])
    ratio = float(lhs / rhs) if rhs > 0 else 0.0
    return EstimateReport(rho, mu, float(lhs), rhs, ratio, u_int)


prop43_estimate_check = mixed_estimate_check  # name required by the public interface


def initial_norms(grid: Grid, v0: np.ndarray, c0: np.ndarray, rho: float, mu: float) -> float:
    """Data part of the mixed-system estimate, computed directly from the fields."""
    return hybrid_norm(grid, c0, rho, math.inf, mu) + besov_norm(grid, v0, rho - 1)

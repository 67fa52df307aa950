"""Implicit-explicit steppers for ``z' = L z + N(z, t)`` with diagonal ``L <= 0``.

``L`` is a real array broadcastable against the state (``-mu |k|^2`` on
velocity components, 0 elsewhere).  The caller evaluates the explicit term
and hands it to :meth:`IMEXStepper.step`; the stepper keeps the history the
multistep schemes need.

Schemes
-------
imex_cn_ab2
    Crank-Nicolson on ``L``, Adams-Bashforth 2 on ``N``.
etd_ab2
    Exact integrating factor ``exp(L dt)`` with the second-order exponential
    Adams-Bashforth correction.
imex_euler
    Backward Euler on ``L``, forward Euler on ``N``.

The two multistep schemes start with one first-order step of the same
family (CN/forward Euler, exponential Euler), which caps the observable order
near ``t = 0``.
"""

from __future__ import annotations

import numpy as np

SCHEMES = ("imex_cn_ab2", "etd_ab2", "imex_euler")


def phi_functions(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``phi1 = (e^z - 1)/z`` and ``phi2 = (e^z - 1 - z)/z^2``, series near 0."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-2
    zs = np.where(small, 1.0, z)
    em1 = np.expm1(zs)
    p1 = np.where(small, 1 + z / 2 + z**2 / 6 + z**3 / 24 + z**4 / 120, em1 / zs)
    p2 = np.where(small, 0.5 + z / 6 + z**2 / 24 + z**3 / 120 + z**4 / 720, (em1 - zs) / zs**2)
    return p1, p2


class IMEXStepper:
    def __init__(self, lin: np.ndarray, dt: float, scheme: str = "imex_cn_ab2"):
        if scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.scheme = scheme
        self.dt = dt
        self.lin = np.asarray(lin, dtype=float)
        z = self.lin * dt
        if scheme == "imex_cn_ab2":
            self._num = 1.0 + 0.5 * z
            self._inv = 1.0 / (1.0 - 0.5 * z)
        elif scheme == "imex_euler":
            self._inv = 1.0 / (1.0 - z)
        else:
            self._exp = np.exp(z)
            self._p1, self._p2 = phi_functions(z)
        self._prev = None

    def reset(self):
        self._prev = None

    @property
    def heat_factor(self) -> np.ndarray:
        """One-step amplification with ``N = 0``."""
        if self.scheme == "imex_cn_ab2":
            return self._num * self._inv
        if self.scheme == "imex_euler":
            return self._inv
        return self._exp

    def step(self, z: np.ndarray, nz: np.ndarray) -> np.ndarray:
        dt = self.dt
        prev = self._prev
        if self.scheme == "imex_cn_ab2":
            f = nz if prev is None else 1.5 * nz - 0.5 * prev
            out = (self._num * z + dt * f) * self._inv
        elif self.scheme == "imex_euler":
            out = (z + dt * nz) * self._inv
        else:
            out = self._exp * z + dt * self._p1 * nz
            if prev is not None:
                out = out + dt * self._p2 * (nz - prev)
        self._prev = nz
        return out

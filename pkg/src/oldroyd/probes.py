"""Empirical prober for the product, paraproduct and commutator estimates.

Each law is an inequality ``LHS <= C * RHS`` with an unspecified constant.
The prober evaluates ``LHS / RHS`` on random band-limited samples and reports
the maximum, median and 95th percentile.  Comparing the maximum across two
resolutions is the discrete stand-in for "C does not depend on the data".

All norms are ``p = 2`` norms.  The dual product law is stated for
``p >= 2``; only ``p = 2`` is exercised here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from oldroyd import spectral as sp
from oldroyd.littlewood_paley import besov_norm, commutator, hybrid_norm, paraproduct, remainder
from oldroyd.spectral import Grid, get_grid

LAWS = (
    "prod_positive_s",
    "prod_two_index",
    "prod_linfty",
    "prod_dual",
    "hybrid_Tuv",
    "hybrid_remainder",
    "commutator",
)


def default_params(law: str, dim: int) -> dict:
    h = dim / 2
    table = {
        "prod_positive_s": {"s": h, "r": 1.0},
        "prod_two_index": {"s1": h - 0.5, "s2": h - 0.5, "r": 1.0},
        "prod_linfty": {"s": h - 1.0, "r": 1.0},
        "prod_dual": {"s": h - 1.0},
        "hybrid_Tuv": {"s": h, "t": h, "r": math.inf, "mu": 1.0},
        "hybrid_remainder": {"s": h, "t": h, "r": math.inf, "mu": 1.0},
        "commutator": {"mu": 1.0},
    }
    if law not in table:
        raise ValueError(f"unknown law {law!r}; expected one of {LAWS}")
    return dict(table[law])


def check_side_conditions(law: str, dim: int, params: dict):
    """Raise ``ValueError`` naming the first violated side condition."""
    h = dim / 2
    p = params
    r = p.get("r", 1.0)
    if "r" in p and not (r >= 1):
        raise ValueError("side condition violated: r in [1, inf]")
    if "mu" in p and not p["mu"] > 0:
        raise ValueError("side condition violated: mu > 0")
    if law == "prod_positive_s" and not p["s"] > 0:
        raise ValueError("side condition violated: s > 0")
    if law == "prod_two_index":
        if not (p["s1"] < h and p["s2"] < h):
            raise ValueError("side condition violated: s1, s2 < N/p")
        if not p["s1"] + p["s2"] > 0:
            raise ValueError("side condition violated: s1 + s2 > 0")
    if law == "prod_linfty" and not abs(p["s"]) < h:
        raise ValueError("side condition violated: |s| < N/p")
    if law == "prod_dual" and not (-h < p["s"] <= h):
        raise ValueError("side condition violated: s in (-N/p, N/p]")
    if law == "hybrid_Tuv":
        bound = min(1 - (0.0 if r == math.inf else 2 / r) + h, h)
        if not p["s"] <= bound:
            raise ValueError("side condition violated: s <= min(1 - 2/r + N/2, N/2)")
    if law == "hybrid_remainder":
        bound = max(0.0, 1 - (0.0 if r == math.inf else 2 / r))
        if not p["s"] + p["t"] > bound:
            raise ValueError("side condition violated: s + t > max(0, 1 - 2/r)")


def random_field(grid: Grid, rng: np.random.Generator, lead: tuple = (), k_hi: float | None = None) -> np.ndarray:
    """Real band-limited field with a random band and random spectral slope.

    The band sits inside ``[1, cutoff/2]`` so products are not truncated;
    its edges are log-uniform so each octave is drawn equally often.
    """
    top = grid.cutoff / 2 if k_hi is None else k_hi
    # log-uniform band edges: every octave is sampled equally at any resolution
    lo = math.exp(rng.uniform(0.0, math.log(max(1.0, top / 2))))
    hi = math.exp(rng.uniform(math.log(min(lo + 1.0, top)), math.log(top)))
    alpha = rng.uniform(0.0, 3.0)
    kabs = grid.kabs
    band = (kabs >= lo) & (kabs <= hi)
    amp = np.where(band, np.maximum(kabs, 1.0) ** -alpha, 0.0)
    coef = (rng.standard_normal(lead + grid.shape) + 1j * rng.standard_normal(lead + grid.shape)) * amp
    f = sp.transform(grid, sp.inverse_transform(grid, coef))  # keep the Hermitian part
    return sp.zero_mean(grid, f)


def _sup(grid: Grid, f: np.ndarray) -> float:
    return sp.linf_norm(grid, f)


def _ratio(lhs: float, rhs: float) -> float:
    if lhs == 0.0:
        return 0.0
    return lhs / rhs if rhs > 0 else math.inf


def law_ratio(law: str, grid: Grid, u: np.ndarray, v: np.ndarray, params: dict) -> float:
    """``LHS / RHS`` of one law for the pair ``(u, v)`` (0 when ``LHS = 0``)."""
    h = grid.dim / 2
    p = params
    if law == "commutator":
        mu = p["mu"]
        lhs = hybrid_norm(grid, commutator(grid, u, v), h, math.inf, mu)
        rhs = besov_norm(grid, sp.gradient(grid, u), h) * hybrid_norm(grid, v, h, math.inf, mu)
        return _ratio(lhs, rhs)
    if law in ("hybrid_Tuv", "hybrid_remainder"):
        s, t, r, mu = p["s"], p["t"], p["r"], p["mu"]
        term = paraproduct(grid, u, v) if law == "hybrid_Tuv" else remainder(grid, u, v)
        lhs = hybrid_norm(grid, term, s + t - h, r, mu)
        rhs = hybrid_norm(grid, u, s, r, mu) * besov_norm(grid, v, t)
        return _ratio(lhs, rhs)
    uv = sp.pointwise_product(grid, u, v)
    if law == "prod_positive_s":
        s, r = p["s"], p["r"]
        lhs = besov_norm(grid, uv, s, r)
        rhs = _sup(grid, u) * besov_norm(grid, v, s, r) + _sup(grid, v) * besov_norm(grid, u, s, r)
    elif law == "prod_two_index":
        s1, s2, r = p["s1"], p["s2"], p["r"]
        lhs = besov_norm(grid, uv, s1 + s2 - h, r)
        rhs = besov_norm(grid, u, s1, r) * besov_norm(grid, v, s2, math.inf)
    elif law == "prod_linfty":
        s, r = p["s"], p["r"]
        lhs = besov_norm(grid, uv, s, r)
        rhs = besov_norm(grid, u, s, r) * (besov_norm(grid, v, h, math.inf) + _sup(grid, v))
    elif law == "prod_dual":
        s = p["s"]
        lhs = besov_norm(grid, uv, -h, math.inf)
        rhs = besov_norm(grid, u, s, 1.0) * besov_norm(grid, v, -s, math.inf)
    else:
        raise ValueError(f"unknown law {law!r}; expected one of {LAWS}")
    return _ratio(lhs, rhs)


def _sample_pair(law: str, grid: Grid, rng: np.random.Generator):
    if law == "commutator":
        u = sp.leray_project(grid, random_field(grid, rng, (grid.dim,)))
        E = random_field(grid, rng, (grid.dim, grid.dim))
        return u, E
    return random_field(grid, rng), random_field(grid, rng)


@dataclass
class ProbeReport:
    law: str
    params: dict
    samples: int
    points_per_axis: int
    dim: int
    ratios: np.ndarray = field(repr=False)

    @property
    def max(self) -> float:
        return float(np.max(self.ratios))

    @property
    def median(self) -> float:
        return float(np.median(self.ratios))

    @property
    def p95(self) -> float:
        return float(np.percentile(self.ratios, 95))

    @property
    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.ratios)))


def inequality_prober(
    law: str, samples: int = 100, seed: int = 0, grid: Grid | None = None, params: dict | None = None
) -> ProbeReport:
    grid = get_grid(2, 64) if grid is None else grid
    prm = default_params(law, grid.dim)
    if params:
        prm.update(params)
    check_side_conditions(law, grid.dim, prm)
    children = np.random.SeedSequence(seed).spawn(samples)
    ratios = np.array([law_ratio(law, grid, *_sample_pair(law, grid, np.random.default_rng(c)), prm) for c in children])
    return ProbeReport(law, prm, samples, grid.n, grid.dim, ratios)


@dataclass
class CrossResolutionReport:
    law: str
    reports: list

    @property
    def change_factor(self) -> float:
        """Largest max-ratio over the smallest, across resolutions."""
        maxima = [r.max for r in self.reports]
        lo = min(maxima)
        return max(maxima) / lo if lo > 0 else (1.0 if max(maxima) == 0 else math.inf)


def cross_resolution(
    law: str, resolutions=(64, 128), samples: int = 100, seed: int = 0, dim: int = 2, params: dict | None = None
) -> CrossResolutionReport:
    reports = [inequality_prober(law, samples, seed, get_grid(dim, n), params) for n in resolutions]
    return CrossResolutionReport(law, reports)


def format_report(cross: CrossResolutionReport) -> str:
    """One structured-text record per law."""
    r0 = cross.reports[0]
    params = ",".join(f"{k}={v:g}" for k, v in sorted(r0.params.items()))
    lines = [f"law: {cross.law}", f"params: {params}", f"samples: {r0.samples}", f"dim: {r0.dim}"]
    for r in cross.reports:
        lines.append(f"n{r.points_per_axis}: max={r.max:.6g} median={r.median:.6g} p95={r.p95:.6g} finite={r.finite}")
    lines.append(f"resolutions: {','.join(str(r.points_per_axis) for r in cross.reports)}")
    lines.append(f"max_change_factor: {cross.change_factor:.6g}")
    return "\n".join(lines) + "\n"

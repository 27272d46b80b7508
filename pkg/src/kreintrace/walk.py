"""Boundary trace of the reflected nearest-neighbour walk on Z^d x Z_{>=0}.

Each step picks one of the d+1 axes uniformly and moves +-1 along it; at
height zero the walk is forced to jump up, so the trace increments between
boundary visits are exactly the first-return functionals computed here.

The closed forms: one vertical waiting time is geometric with success
probability 1/(d+1), giving the step characteristic function
    phi(xi) = 1 / (d + 1 - d * psi(xi)),        psi(xi) = mean of cos(xi_j),
and the first-return transform from height j is the bounded root
    f_j(xi) = ((1 - sqrt(1 - phi^2)) / phi)^j.

The geometric-series constant is validated against brute-force enumeration
in the tests; the numerator is 1 (a numerator of (d+1)^2 would give
phi(0) = d+1, violating |phi| <= 1).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from . import rng
from ._kernels import backend

__all__ = ["WalkConfig", "WalkEstimate", "step_cf_oracle", "step_cf_enumerated",
           "trace_cf_closed_form", "simulate_trace"]


@dataclass(frozen=True)
class WalkConfig:
    d: int
    n_steps: int
    n_paths: int
    seed: int
    workers: int = 1

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if self.n_steps <= 0 or self.n_paths <= 0:
            raise ValueError("n_steps and n_paths must be positive")


def _psi(d: int, xi: Sequence[float]) -> float:
    xi = np.atleast_1d(np.asarray(xi, dtype=np.float64))
    if xi.shape != (d,):
        raise ValueError(f"xi must have {d} components")
    return float(np.mean(np.cos(xi)))


def step_cf_oracle(d: int, xi) -> complex:
    """CF of the horizontal displacement over one vertical waiting time.

    Closed form of the geometric series sum_n (1/(d+1)) (d psi/(d+1))^n.
    """
    psi = _psi(d, xi)
    return 1.0 / (d + 1 - d * psi)


def step_cf_enumerated(d: int, xi, depth: int = 60) -> complex:
    """Brute-force enumeration of (horizontal steps, waiting time) outcomes.

    Sums the waiting-time distribution term by term against the exact n-step
    horizontal CF; truncation error is below (d/(d+1))^(depth+1).
    """
    psi = _psi(d, xi)
    total = 0.0
    p_vert = 1.0 / (d + 1)
    weight = p_vert
    psi_pow = 1.0
    for _ in range(depth + 1):
        total += weight * psi_pow
        weight *= d / (d + 1)
        psi_pow *= psi
    return complex(total)


def bounded_root(phi: complex, j: int) -> complex:
    """Root of r^2 - (2/phi) r + 1 with modulus <= 1, raised to the height.

    For phi = 0 the recurrence degenerates and the bounded solution is
    0^j (1 at the boundary, 0 above it).
    """
    if j < 0:
        raise ValueError(f"height must be nonnegative, got {j}")
    if j == 0:
        return 1.0 + 0.0j
    if phi == 0.0:
        return 0.0j
    root = (1.0 - cmath.sqrt(1.0 - phi * phi)) / phi
    if abs(root) > 1.0:
        root = 1.0 / root
    return root**j


def trace_cf_closed_form(d: int, xi, j: int) -> complex:
    """First-return CF from height j: the bounded root of the recurrence
    f_j = (phi/2)(f_{j+1} + f_{j-1})."""
    return bounded_root(complex(step_cf_oracle(d, xi)), j)


@dataclass(frozen=True)
class WalkEstimate:
    d: int
    j: int
    xi: Tuple[float, ...]
    value: float            # real part of the CF average
    imag: float             # imaginary part (should vanish by symmetry)
    stderr: float
    n_effective: int
    excluded_frac: float
    warning: Optional[str] = None


@dataclass(frozen=True)
class WalkRun:
    cfg: WalkConfig
    j: int
    out_x: np.ndarray
    hit: np.ndarray

    def cf_estimate(self, xi) -> WalkEstimate:
        xi_v = np.atleast_1d(np.asarray(xi, dtype=np.float64))
        ok = self.hit
        n_eff = int(ok.sum())
        if n_eff == 0:
            raise RuntimeError("no paths returned to the boundary")
        phase = self.out_x[ok] @ xi_v
        vals = np.exp(-1j * phase)
        value = float(vals.real.mean())
        imag = float(vals.imag.mean())
        stderr = float(vals.real.std(ddof=1) / math.sqrt(n_eff))
        excluded = 1.0 - n_eff / self.cfg.n_paths
        warning = (f"{excluded:.1%} of walks did not return"
                   if excluded > 0.01 else None)
        return WalkEstimate(self.cfg.d, self.j, tuple(float(v) for v in xi_v),
                            value, imag, stderr, n_eff, excluded, warning)


def run_walk(cfg: WalkConfig, j: int) -> WalkRun:
    if j < 0:
        raise ValueError(f"height must be nonnegative, got {j}")
    n, d = cfg.n_paths, cfg.d
    keys = rng.stream_keys_np(cfg.seed, rng.PURPOSE_WALK,
                              np.arange(n, dtype=np.uint64))
    X = np.zeros((n, d), dtype=np.int64)
    Y = np.full(n, j, dtype=np.int64)
    out_x = np.zeros((n, d), dtype=np.int64)
    hit = np.zeros(n, dtype=np.uint8)
    done = np.zeros(n, dtype=np.uint8)
    if j == 0:
        hit[:] = 1  # already on the boundary: the trace step is trivial
        return WalkRun(cfg, j, out_x, hit.view(bool).copy())

    step0 = 0
    active = np.arange(n, dtype=np.int64)
    while step0 < cfg.n_steps and len(active):
        nsteps = min(65536, cfg.n_steps - step0)
        x, y = X[active], Y[active]
        backend.walk_advance(keys[active], active, step0, nsteps, d,
                             x, y, out_x, hit, done)
        X[active], Y[active] = x, y
        step0 += nsteps
        active = active[done[active] == 0]
    return WalkRun(cfg, j, out_x, hit.view(bool).copy())


def simulate_trace(cfg: WalkConfig, xi, j: int) -> WalkEstimate:
    """Average exp(-i xi . X) at the first return of the height to zero."""
    return run_walk(cfg, j).cf_estimate(xi)

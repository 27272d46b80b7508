"""Monte Carlo engine for boundary-trace statistics of reflected paths.

The estimators never simulate the horizontal coordinate: conditionally on
the vertical path, the horizontal average is a Gaussian characteristic
function, so each path contributes exp(-|xi|^2 A / 2) evaluated at the
inverse-local-time index.  Paths are independent counter-based streams, so
results are bit-identical for any worker count or chunking.

Local-time conventions (calibrated by the constant-density case, which must
reproduce exp(-s |xi|)):
  * the clock level s is measured by the Skorokhod regulator L = -min W;
  * interior point masses use symmetric occupation windows of half-width
    `atom_window`, the occupation-density normalization;
  * a point mass at 0 contributes m * 2L: the occupation density at the
    boundary is twice the regulator (a one-sided window sees half of it),
    and only this factor reproduces exp(-s mu) for strings with mass at 0.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import erfinv

from . import rng
from ._kernels import backend
from .strings import Const, KreinString, Power

__all__ = [
    "SimConfig", "CFEstimate", "ExponentFit", "EstimateError",
    "simulate_regulated_bm", "additive_functional", "cf_trace_estimate",
    "cf_hitting_estimate", "bessel_subordinator_exponent",
    "local_time_diagnostic", "suggested_horizon", "run_trace", "run_hit",
]

_CHUNK_STEPS = 8192


class EstimateError(RuntimeError):
    """No usable paths, or exclusions beyond the hard limit."""


def suggested_horizon(s_max: float, exclusion: float = 0.01) -> float:
    """Horizon making P(L_horizon < s_max) ~ exclusion for the regulator."""
    return float(s_max**2 / (2.0 * erfinv(exclusion) ** 2))


@dataclass(frozen=True)
class SimConfig:
    dt: float
    horizon: float
    n_paths: int
    seed: int
    s_values: Tuple[float, ...] = ()
    atom_window: Optional[float] = None
    workers: int = 1

    def __post_init__(self):
        if not (self.dt > 0.0 and self.horizon > 0.0):
            raise ValueError("dt and horizon must be positive")
        if self.dt > 1e-3 * min(1.0, self.horizon):
            raise ValueError(
                f"dt={self.dt} too coarse for horizon={self.horizon}: "
                "require dt <= 1e-3 * min(1, horizon)")
        if self.n_paths <= 0:
            raise ValueError("n_paths must be positive")
        sv = tuple(float(s) for s in self.s_values)
        if any(s <= 0.0 for s in sv):
            raise ValueError("s_values must be positive")
        if list(sv) != sorted(sv):
            raise ValueError("s_values must be ascending")
        object.__setattr__(self, "s_values", sv)
        if self.atom_window is None:
            object.__setattr__(self, "atom_window", math.sqrt(self.dt))
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))


@dataclass(frozen=True)
class CFEstimate:
    xi: Tuple[float, ...]
    s: float
    value: float
    stderr: float
    n_effective: int
    excluded_frac: float = 0.0
    killed_frac: float = 0.0
    warning: Optional[str] = None
    extended_claim: bool = False

    def __post_init__(self):
        if not (-1e-12 <= self.value <= 1.0 + 3.0 * self.stderr + 1e-12):
            raise ValueError(f"estimate {self.value} outside [0, 1+3se]")


def _xi_tuple(xi) -> Tuple[float, ...]:
    if np.isscalar(xi):
        return (float(xi),)
    return tuple(float(v) for v in xi)


def kernel_tables(s: KreinString, atom_window: float):
    """Flatten a string into the arrays the kernels consume.

    The atom at 0 is deliberately absent: its additive-functional term is
    linear in the regulator and is applied at estimate time.
    """
    pl, pr, pk, pc, pb, pe, pp = [], [], [], [], [], [], []
    for piece in s.pieces:
        form = piece.form
        pl.append(piece.l)
        pr.append(piece.r)
        if isinstance(form, Const):
            pk.append(0)
            pc.append(form.c)
            pb.append(0.0)
            pe.append(0.0)
            pp.append(0.0)
        else:
            pk.append(1 if isinstance(form, Power) else 2)
            pc.append(form.c)
            pb.append(form.b)
            pe.append(form.e)
            pp.append(form.p)
    ay, ar, ad = [], [], []
    for atom in s.atoms:
        if atom.y == 0.0:
            continue
        ay.append(atom.y)
        ar.append(atom.m / (2.0 * atom_window))
        ad.append(atom_window)
    pieces = (np.asarray(pl), np.asarray(pr),
              np.asarray(pk, dtype=np.int64), np.asarray(pc),
              np.asarray(pb), np.asarray(pe), np.asarray(pp))
    atoms = (np.asarray(ay), np.asarray(ar), np.asarray(ad))
    return pieces, atoms


def _run_chunked(advance, n_paths: int, n_steps: int, workers: int, done):
    """Drive a kernel in compaction chunks, splitting paths across workers."""
    step0 = 0
    active = np.arange(n_paths, dtype=np.int64)
    while step0 < n_steps and len(active):
        nsteps = min(_CHUNK_STEPS, n_steps - step0)
        if workers > 1 and len(active) > 1024:
            slices = np.array_split(active, workers)
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(advance, part, step0, nsteps)
                           for part in slices if len(part)]
                for fut in futures:
                    fut.result()
        else:
            advance(active, step0, nsteps)
        step0 += nsteps
        active = active[~done[active]]


@dataclass(frozen=True)
class TraceResult:
    string: KreinString
    cfg: SimConfig
    out_a: np.ndarray      # (n_paths, n_levels) additive functional at T_s
    out_l: np.ndarray      # regulator value at the crossing index
    reached: np.ndarray    # bool
    killed: np.ndarray     # bool
    final_l: np.ndarray    # regulator at the horizon (diagnostics)

    def cf_estimate(self, xi, level: float) -> CFEstimate:
        """Average of exp(-|xi|^2 A(T_s) / 2).

        Paths killed at a finite endpoint contribute zero (the stopped
        martingale vanishes there: the extension satisfies phi(R) = 0), so
        they stay in the denominator; only paths that ran out of horizon are
        excluded.
        """
        xi_t = _xi_tuple(xi)
        try:
            k = self.cfg.s_values.index(float(level))
        except ValueError:
            raise EstimateError(f"level {level} not in cfg.s_values")
        ok = self.reached[:, k] & ~self.killed
        n_eff = int(ok.sum())
        if n_eff == 0:
            raise EstimateError("no contributing paths")
        a_tot = self.out_a[ok, k]
        m0 = self.string.atom_mass_at_zero()
        if m0:
            a_tot = a_tot + m0 * 2.0 * self.out_l[ok, k]
        xi2 = float(sum(v * v for v in xi_t))
        n_killed = int(self.killed.sum())
        vals = np.zeros(n_eff + n_killed)
        vals[:n_eff] = np.exp(-0.5 * xi2 * a_tot)
        value = float(vals.mean())
        stderr = (float(vals.std(ddof=1) / math.sqrt(len(vals)))
                  if len(vals) > 1 else 0.0)
        excluded = 1.0 - len(vals) / self.cfg.n_paths
        killed_frac = float(self.killed.mean())
        warning = None
        if excluded > 0.01:
            warning = f"{excluded:.1%} of paths excluded (did not reach s)"
        return CFEstimate(xi_t, float(level), value, stderr, n_eff,
                          excluded, killed_frac, warning,
                          extended_claim=self.string.right_boundary == "dirichlet")


@lru_cache(maxsize=8)
def run_trace(s: KreinString, cfg: SimConfig) -> TraceResult:
    """Simulate the regulated paths and record A, L at every clock level."""
    if not cfg.s_values:
        raise ValueError("cfg.s_values must be nonempty for the trace run")
    n, nlev = cfg.n_paths, len(cfg.s_values)
    pieces, atoms = kernel_tables(s, cfg.atom_window)
    levels = np.asarray(cfg.s_values)
    kill_r = s.R if s.right_boundary == "dirichlet" else math.inf
    keys = rng.stream_keys_np(cfg.seed, rng.PURPOSE_TRACE,
                              np.arange(n, dtype=np.uint64))
    W = np.zeros(n)
    M = np.zeros(n)
    A = np.zeros(n)
    next_lev = np.zeros(n, dtype=np.int64)
    out_a = np.zeros((n, nlev))
    out_l = np.zeros((n, nlev))
    reached = np.zeros((n, nlev), dtype=np.uint8)
    killed = np.zeros(n, dtype=np.uint8)
    done = np.zeros(n, dtype=np.uint8)

    def advance(part, step0, nsteps):
        w, m, a, nl = W[part], M[part], A[part], next_lev[part]
        backend.trace_advance(
            keys[part], part, step0, nsteps, cfg.dt,
            pieces[0], pieces[1], pieces[2], pieces[3], pieces[4],
            pieces[5], pieces[6], atoms[0], atoms[1], atoms[2],
            levels, kill_r, w, m, a, nl,
            out_a, out_l, reached, killed, done)
        W[part], M[part], A[part], next_lev[part] = w, m, a, nl

    _run_chunked(advance, n, cfg.n_steps, cfg.workers, done.view(bool))
    return TraceResult(s, cfg, out_a, out_l, reached.view(bool).copy(),
                       killed.view(bool).copy(), -M)


def cf_trace_estimate(s: KreinString, xi, level: float,
                      cfg: SimConfig) -> CFEstimate:
    """Path-average of exp(-|xi|^2 A(T_s) / 2) over paths reaching level s."""
    if float(level) not in cfg.s_values:
        raise ValueError(f"level {level} must be one of cfg.s_values")
    return run_trace(s, cfg).cf_estimate(xi, level)


# ---------------------------------------------------------------------------
# hitting estimator: start at height y0, stop at the first crossing of 0
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HitResult:
    string: KreinString
    cfg: SimConfig
    y0: float
    out_a: np.ndarray
    hit: np.ndarray
    killed: np.ndarray

    def cf_estimate(self, xi) -> CFEstimate:
        xi_t = _xi_tuple(xi)
        ok = self.hit & ~self.killed
        n_eff = int(ok.sum())
        if n_eff == 0:
            raise EstimateError("no paths hit the boundary")
        xi2 = float(sum(v * v for v in xi_t))
        n_killed = int(self.killed.sum())
        # killed-at-R paths contribute zero: the target extension vanishes
        # at the far endpoint
        vals = np.zeros(n_eff + n_killed)
        vals[:n_eff] = np.exp(-0.5 * xi2 * self.out_a[ok])
        value = float(vals.mean())
        stderr = (float(vals.std(ddof=1) / math.sqrt(len(vals)))
                  if len(vals) > 1 else 0.0)
        excluded = 1.0 - len(vals) / self.cfg.n_paths
        warning = None
        if excluded > 0.01:
            warning = f"{excluded:.1%} of paths excluded (no boundary hit)"
        return CFEstimate(xi_t, 0.0, value, stderr, n_eff, excluded,
                          float(self.killed.mean()), warning,
                          extended_claim=self.string.right_boundary == "dirichlet")


@lru_cache(maxsize=8)
def run_hit(s: KreinString, cfg: SimConfig, y0: float) -> HitResult:
    if y0 <= 0.0:
        raise ValueError(f"y0 must be positive, got {y0}")
    n = cfg.n_paths
    pieces, atoms = kernel_tables(s, cfg.atom_window)
    kill_r = s.R if s.right_boundary == "dirichlet" else math.inf
    keys = rng.stream_keys_np(cfg.seed, rng.PURPOSE_HIT,
                              np.arange(n, dtype=np.uint64))
    Y = np.full(n, float(y0))
    A = np.zeros(n)
    out_a = np.zeros(n)
    hit = np.zeros(n, dtype=np.uint8)
    killed = np.zeros(n, dtype=np.uint8)
    done = np.zeros(n, dtype=np.uint8)

    def advance(part, step0, nsteps):
        y, a = Y[part], A[part]
        backend.hit_advance(keys[part], part, step0, nsteps, cfg.dt,
                            pieces[0], pieces[1], pieces[2], pieces[3],
                            pieces[4], pieces[5], pieces[6],
                            atoms[0], atoms[1], atoms[2], kill_r,
                            y, a, out_a, hit, killed, done)
        Y[part], A[part] = y, a

    _run_chunked(advance, n, cfg.n_steps, cfg.workers, done.view(bool))
    return HitResult(s, cfg, y0, out_a, hit.view(bool).copy(),
                     killed.view(bool).copy())


def cf_hitting_estimate(s: KreinString, xi, y0: float,
                        cfg: SimConfig) -> CFEstimate:
    """Path-average of exp(-|xi|^2 A(tau_0) / 2) from start height y0."""
    return run_hit(s, cfg, float(y0)).cf_estimate(xi)


# ---------------------------------------------------------------------------
# fractional-dimension radial diffusion: inverse-local-time Laplace exponent
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExponentFit:
    alpha: float
    slope: float
    half_width: float
    level: float
    u_grid: Tuple[float, ...]
    neglog: Tuple[float, ...]
    reached_frac: float
    bad_frac: float


def _run_bessel(alpha: float, cfg: SimConfig, occ_thresh: float,
                n_paths: int, n_steps: int, purpose: int):
    delta = math.sqrt(cfg.dt)
    eps = math.sqrt(cfg.dt) / 10.0
    drift_dt = 0.5 * (1.0 - alpha) * cfg.dt
    keys = rng.stream_keys_np(cfg.seed, purpose,
                              np.arange(n_paths, dtype=np.uint64))
    Y = np.zeros(n_paths)
    OCC = np.zeros(n_paths)
    out_t = np.zeros(n_paths)
    reached = np.zeros(n_paths, dtype=np.uint8)
    bad = np.zeros(n_paths, dtype=np.uint8)
    done = np.zeros(n_paths, dtype=np.uint8)

    def advance(part, step0, nsteps):
        y, occ = Y[part], OCC[part]
        backend.bessel_advance(keys[part], part, step0, nsteps, cfg.dt,
                               drift_dt, eps, delta, occ_thresh,
                               y, occ, out_t, reached, bad, done)
        Y[part], OCC[part] = y, occ

    _run_chunked(advance, n_paths, n_steps, cfg.workers, done.view(bool))
    return out_t, reached.view(bool), bad.view(bool), OCC, delta


def bessel_subordinator_exponent(alpha: float, cfg: SimConfig,
                                 u_grid: Optional[Sequence[float]] = None,
                                 n_boot: int = 200) -> ExponentFit:
    """Fit the stability index of the inverse boundary clock.

    The local time is the occupation of [0, delta) scaled by
    delta^-(2-alpha); its unknown normalization is deliberately absorbed by
    the log-log fit of -log E[exp(-u T_s)] against u.  The clock level s is
    calibrated from a deterministic pilot run so the median of T_s is about
    0.3 time units, keeping every Laplace node well estimated.
    """
    if not (0.0 < alpha < 2.0):
        raise ValueError(f"alpha must be in (0, 2), got {alpha}")
    delta = math.sqrt(cfg.dt)
    scale = delta ** -(2.0 - alpha)
    # pilot: free run to t=0.3, level = median occupation local time
    n_pilot = min(2000, cfg.n_paths)
    pilot_steps = int(round(0.3 / cfg.dt))
    _, _, _, occ_pilot, _ = _run_bessel(alpha, cfg, math.inf, n_pilot,
                                        pilot_steps, rng.PURPOSE_PILOT)
    level = float(np.median(occ_pilot) * scale)
    if level <= 0.0:
        raise EstimateError("pilot produced zero local time")

    out_t, reached, bad, _, _ = _run_bessel(alpha, cfg, level / scale,
                                            cfg.n_paths, cfg.n_steps,
                                            rng.PURPOSE_BESSEL)
    bad_frac = float(bad.mean())
    if bad_frac > 0.05:
        raise EstimateError(f"{bad_frac:.1%} of paths became non-finite")
    valid = ~bad
    n_valid = int(valid.sum())
    if u_grid is None:
        u_grid = np.geomspace(0.5, 8.0, 9)
    u = np.asarray(list(u_grid))
    if np.any(u <= 0.0):
        raise ValueError("u grid must be positive (the u=0 point is excluded)")
    # unfinished paths contribute exp(-u T) <= exp(-u * horizon): negligible
    contrib = np.where(reached[valid][:, None],
                       np.exp(-u[None, :] * out_t[valid][:, None]), 0.0)
    means = contrib.mean(axis=0)
    if np.any(means <= 0.0):
        raise EstimateError("Laplace transform estimate vanished; "
                            "raise the horizon or lower u")
    neglog = -np.log(means)
    slope = float(np.polyfit(np.log(u), np.log(neglog), 1)[0])

    boot_keys = rng.stream_keys_np(cfg.seed, rng.PURPOSE_BOOTSTRAP,
                                   np.arange(n_boot, dtype=np.uint64))
    slopes = np.empty(n_boot)
    logu = np.log(u)
    for b in range(n_boot):
        ctr = np.arange(n_valid, dtype=np.uint64)
        draw = rng.raw_u64_np(boot_keys[b], ctr) % np.uint64(n_valid)
        m_b = contrib[draw.astype(np.int64)].mean(axis=0)
        m_b = np.maximum(m_b, 1e-300)
        slopes[b] = np.polyfit(logu, np.log(-np.log(np.minimum(m_b, 1 - 1e-16))), 1)[0]
    half_width = float(1.96 * slopes.std(ddof=1))
    return ExponentFit(alpha, slope, half_width, level,
                       tuple(float(x) for x in u),
                       tuple(float(x) for x in neglog),
                       float(reached.mean()), bad_frac)


# ---------------------------------------------------------------------------
# materialized small-scale paths (testing surface)
# ---------------------------------------------------------------------------

def simulate_regulated_bm(cfg: SimConfig):
    """Materialize (Y, L) on the grid for every path; small scales only.

    Identical streams and update order to the fused kernels: path p, step j
    consumes the (seed, trace-purpose, p, j) variate.
    """
    n, steps = cfg.n_paths, cfg.n_steps
    if n * steps > 20_000_000:
        raise ValueError("path materialization limited to 2e7 samples; "
                         "use the estimators for production scales")
    z = rng.normals_np(cfg.seed, rng.PURPOSE_TRACE,
                       np.arange(n, dtype=np.uint64), 0, steps)
    w = np.empty((n, steps + 1))
    w[:, 0] = 0.0
    w[:, 1:] = math.sqrt(cfg.dt) * z
    np.cumsum(w, axis=1, out=w)
    m = np.minimum.accumulate(np.minimum(w, 0.0), axis=1)
    return w - m, -m


def additive_functional(Y: np.ndarray, L: np.ndarray, s: KreinString,
                        cfg: SimConfig) -> np.ndarray:
    """A_i = sum_{j<i} rate(Y_j) dt plus the boundary atom term m0 * 2 L_i."""
    from ._kernels import _fallback
    pieces, atoms = kernel_tables(s, cfg.atom_window)
    y = np.asarray(Y, dtype=np.float64)
    rates = _fallback.rates(y.reshape(-1), *pieces, *atoms).reshape(y.shape)
    a = np.zeros_like(y)
    np.cumsum(rates[..., :-1] * cfg.dt, axis=-1, out=a[..., 1:])
    m0 = s.atom_mass_at_zero()
    if m0:
        a = a + m0 * 2.0 * np.asarray(L)
    return a


def local_time_diagnostic(cfg: SimConfig, delta: Optional[float] = None):
    """Regulator vs boundary occupation-window local time at the horizon.

    Returns (mean regulator, mean delta^-1 occupation of [0, delta)); their
    ratio measures the occupation-density/regulator factor (2 in the limit).
    The window must sit well above the step scale sqrt(dt), where the
    discrete boundary layer inflates the occupancy.
    """
    if delta is None:
        delta = 25.0 * math.sqrt(cfg.dt)
    y, l_reg = simulate_regulated_bm(cfg)
    occ = (y[:, :-1] < delta).sum(axis=1) * cfg.dt
    return float(l_reg[:, -1].mean()), float(occ.mean() / delta)

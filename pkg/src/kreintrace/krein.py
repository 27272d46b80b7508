"""Solver for the string eigenvalue problem phi'' = lam * a * phi.

Both fundamental solutions are propagated jointly by 2x2 one-step matrices of
determinant exactly one (a fourth-order Magnus scheme whose matrix exponential
is written in closed form), so the Wronskian identity is preserved
structurally and only floating-point drift remains.  Growth is absorbed into
a logged scale factor, which keeps every stored component in a bounded range
and lets the integration run arbitrarily deep truncations without overflow.

The boundary derivative mu(lam) = -phi'_lam(0) of the bounded solution is
bracketed from both sides along a truncation schedule: the value ratio
phiN/phiD decreases to mu while the derivative ratio phiN'/phiD' increases to
it (constant-sign Wronskian), which yields certified two-sided error bars.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, List, Optional, Sequence, Tuple, Union

from .strings import Atom, Const, KreinString, Piece

__all__ = [
    "FundamentalState", "SpectralMu", "SpectralFunctionTable", "CBFReport",
    "integrate_fundamental", "spectral_mu", "mu_at_zero", "bounded_solution",
    "bounded_solution_profile", "cbf_check", "ConvergenceError", "DomainError",
]

_RENORM_HI = 1.0e5
_SCALE_MAX = 1.0e6
_STEP_RTOL = 3.0e-12
_MAX_STEPS = 500_000
_MAX_DOUBLINGS = 200


class DomainError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    """Bracket failed to close; carries the last bracket for inspection."""

    def __init__(self, msg, bracket=None):
        super().__init__(msg)
        self.bracket = bracket


@dataclass
class FundamentalState:
    """Renormalized joint state of the two fundamental solutions at height y.

    True values are the stored ones times exp(log_scale).  The renormalized
    Wronskian phiD*dphiN - phiN*dphiD times exp(2*log_scale) equals -1 up to
    floating-point drift; `wronskian_defect` records the worst relative
    deviation seen at any accepted step.
    """

    y: float
    phiD: float
    dphiD: float
    phiN: float
    dphiN: float
    log_scale: float = 0.0
    wronskian_defect: float = 0.0
    steps: int = 0

    @classmethod
    def initial(cls) -> "FundamentalState":
        return cls(y=0.0, phiD=0.0, dphiD=1.0, phiN=1.0, dphiN=0.0)

    def value_ratio(self) -> float:
        return self.phiN / self.phiD

    def derivative_ratio(self) -> float:
        return self.dphiN / self.dphiD


# ---------------------------------------------------------------------------
# exact double-double evaluation of a*d - b*c (Dekker splitting; no FMA)
# ---------------------------------------------------------------------------

_SPLITTER = 134217729.0  # 2**27 + 1


def _two_prod(a: float, b: float) -> Tuple[float, float]:
    p = a * b
    at = a * _SPLITTER
    ah = at - (at - a)
    al = a - ah
    bt = b * _SPLITTER
    bh = bt - (bt - b)
    bl = b - bh
    err = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, err


def _det2x2_dd(a: float, d: float, b: float, c: float) -> Tuple[float, float]:
    """a*d - b*c with a compensated low-order part."""
    p1, e1 = _two_prod(a, d)
    p2, e2 = _two_prod(b, c)
    s = p1 - p2
    bb = s - p1
    err_s = (p1 - (s - bb)) + (-p2 - bb)
    return s, err_s + e1 - e2


def _wronskian_defect(st: FundamentalState) -> float:
    if st.log_scale > 300.0:
        return 0.0  # exp(2*ls) not representable; checked earlier in the sweep
    hi, lo = _det2x2_dd(st.phiD, st.dphiN, st.phiN, st.dphiD)
    scale = math.exp(2.0 * st.log_scale)
    return abs((hi * scale + 1.0) + lo * scale)


# ---------------------------------------------------------------------------
# one-step propagators (all have determinant one in exact arithmetic)
# ---------------------------------------------------------------------------

def _sinhc(t: float) -> float:
    if t < 1e-4:
        t2 = t * t
        return 1.0 + t2 / 6.0 + t2 * t2 / 120.0
    return math.sinh(t) / t


def _magnus_matrix(h: float, qbar: float, dcom: float) -> Tuple[tuple, float]:
    """exp([[dcom, h], [h*qbar, -dcom]]) with growth split into a log factor.

    Returns ((m11, m12, m21, m22), delta_log_scale); the true propagator is
    the matrix times exp(delta_log_scale).
    """
    delta = dcom * dcom + h * h * qbar
    if delta <= 0.0:
        # qbar >= 0 always; delta < 0 impossible, delta == 0 is the affine case
        return (1.0 + dcom, h, h * qbar, 1.0 - dcom), 0.0
    theta = math.sqrt(delta)
    if theta <= 1.0:
        ch = math.cosh(theta)
        sh = _sinhc(theta)
        return (ch + sh * dcom, sh * h, sh * h * qbar, ch - sh * dcom), 0.0
    em = math.exp(-2.0 * theta)
    ch = 0.5 * (1.0 + em)
    sh = 0.5 * (1.0 - em) / theta
    return (ch + sh * dcom, sh * h, sh * h * qbar, ch - sh * dcom), theta


_LN2 = math.log(2.0)


def _apply(st: FundamentalState, mat: tuple, dls: float, h: float) -> None:
    m11, m12, m21, m22 = mat
    phiD = m11 * st.phiD + m12 * st.dphiD
    dphiD = m21 * st.phiD + m22 * st.dphiD
    phiN = m11 * st.phiN + m12 * st.dphiN
    dphiN = m21 * st.phiN + m22 * st.dphiN
    st.phiD, st.dphiD, st.phiN, st.dphiN = phiD, dphiD, phiN, dphiN
    st.log_scale += dls
    st.y += h
    st.steps += 1
    m = max(abs(phiD), abs(dphiD), abs(phiN), abs(dphiN))
    if not (1.0 <= m < 2.0):
        # renormalize by a power of two: exact on the components, so the
        # subdominant mode (and with it the Wronskian) is not polluted
        ex = math.frexp(m)[1]
        scale = math.ldexp(1.0, ex - 1)
        st.phiD /= scale
        st.dphiD /= scale
        st.phiN /= scale
        st.dphiN /= scale
        st.log_scale += (ex - 1) * _LN2
    st.wronskian_defect = max(st.wronskian_defect, _wronskian_defect(st))


def _mat_diff(m_a: tuple, m_b: tuple) -> float:
    num = max(abs(x - y) for x, y in zip(m_a, m_b))
    den = max(max(abs(x) for x in m_a), 1e-300)
    return num / den


_SQRT3_6 = math.sqrt(3.0) / 6.0


def _magnus_piece(form, lam: float, pos: float, h: float):
    """One Magnus step over [pos, pos+h]: exact integrated mean coefficient
    (piece antiderivative) plus the Gauss-node commutator term."""
    f0 = form.antiderivative(pos)
    f1 = form.antiderivative(pos + h)
    qbar = lam * (f1 - f0) / h
    q1 = lam * form.density(pos + (0.5 - _SQRT3_6) * h)
    q2 = lam * form.density(pos + (0.5 + _SQRT3_6) * h)
    dcom = (math.sqrt(3.0) / 12.0) * h * h * (q1 - q2)
    if not (math.isfinite(qbar) and math.isfinite(dcom)):
        return None
    mat, dls = _magnus_matrix(h, qbar, dcom)
    noise = lam * (abs(f0) + abs(f1)) + (abs(pos) + h) * (q1 + q2)
    return mat, dls, noise


def _matmul2(a: tuple, b: tuple) -> tuple:
    a11, a12, a21, a22 = a
    b11, b12, b21, b22 = b
    return (a11 * b11 + a12 * b21, a11 * b12 + a12 * b22,
            a21 * b11 + a22 * b21, a21 * b12 + a22 * b22)


def _double_step(form, lam: float, pos: float, h: float):
    """Candidate step: two half-steps composed, with the full step as the
    embedded error reference (local error estimated by step doubling)."""
    full = _magnus_piece(form, lam, pos, h)
    h1 = _magnus_piece(form, lam, pos, 0.5 * h)
    h2 = _magnus_piece(form, lam, pos + 0.5 * h, 0.5 * h)
    if full is None or h1 is None or h2 is None:
        return None
    mat_f, dls_f, noise_f = full
    comp = _matmul2(h2[0], h1[0])
    dls_c = h1[1] + h2[1]
    rescale = math.exp(max(min(dls_f - dls_c, 60.0), -60.0))
    est = _mat_diff(comp, tuple(x * rescale for x in mat_f))
    floor = 8.0 * 1.1e-16 * max(noise_f, h1[2], h2[2])
    return comp, dls_c, est, floor


def _advance_piece(st: FundamentalState, piece: Optional[Piece], lam: float,
                   u: float, v: float) -> None:
    """Advance through [u, v] inside one density piece (or a zero gap)."""
    if v <= u:
        return
    if piece is None or lam == 0.0:
        _apply(st, (1.0, v - u, 0.0, 1.0), 0.0, v - u)
        return
    form = piece.form
    if isinstance(form, Const):
        q = lam * form.c
        mat, dls = _magnus_matrix(v - u, q, 0.0)
        _apply(st, mat, dls, v - u)
        return

    pos = u
    h = v - u
    while pos < v:
        if v - pos <= 1e-15 * (1.0 + abs(pos)):
            st.y = v  # below float resolution of the endpoint: snap
            break
        if st.steps > _MAX_STEPS:
            raise ConvergenceError(
                f"step budget exhausted at y={pos:.6g} (lam={lam:.6g})")
        h = min(h, v - pos)
        while True:
            trial = _double_step(form, lam, pos, h)
            if trial is not None:
                comp, dls_c, est, floor = trial
                thresh = max(_STEP_RTOL, floor)
                if est <= thresh:
                    break
            else:
                est = 1.0
                thresh = _STEP_RTOL
            h *= max(0.1, min(0.5, 0.8 * (thresh / (est + 1e-300)) ** 0.2))
            if h < 1e-13 * (1.0 + abs(pos)):
                raise ConvergenceError(
                    f"step size underflow at y={pos:.6g} (lam={lam:.6g})")
        _apply(st, comp, dls_c, h)
        pos = st.y
        if est > 0.0:
            h *= min(4.0, max(0.9, 0.8 * (thresh / est) ** 0.2))
        else:
            h *= 4.0


def _apply_atom(st: FundamentalState, lam: float, mass: float) -> None:
    _apply(st, (1.0, 0.0, lam * mass, 1.0), 0.0, 0.0)


def integrate_fundamental(s: KreinString, lam: float, y_target: float,
                          from_state: Optional[FundamentalState] = None,
                          apply_end_atoms: bool = False) -> FundamentalState:
    """Advance the fundamental pair from 0 (or a previous state) to y_target.

    Atoms strictly below y_target are applied as derivative jumps; an atom at
    exactly y_target is applied only when `apply_end_atoms` is set.  An atom
    at 0 is never applied here: it belongs to the derivative convention of the
    reported spectral value, handled in `spectral_mu`.
    """
    if lam < 0.0:
        raise DomainError(f"lam must be nonnegative, got {lam}")
    if not (0.0 <= y_target <= s.R):
        raise DomainError(f"y_target={y_target} outside [0, R={s.R}]")
    st = from_state if from_state is not None else FundamentalState.initial()
    if y_target < st.y:
        raise DomainError("cannot integrate backwards")

    events: List[Tuple[float, object]] = []
    for piece in s.pieces:
        if piece.r > st.y and piece.l < y_target:
            events.append((max(piece.l, st.y), piece))
    for atom in s.atoms:
        if atom.y == 0.0:
            continue
        if st.y < atom.y < y_target or (apply_end_atoms and st.y < atom.y == y_target):
            events.append((atom.y, atom))
    events.sort(key=lambda ev: (ev[0], isinstance(ev[1], Piece)))

    pos = st.y
    for at_y, obj in events:
        if isinstance(obj, Atom):
            _advance_piece(st, _piece_at(s, pos), lam, pos, at_y)
            _apply_atom(st, lam, obj.m)
            pos = at_y
        else:
            if at_y > pos:
                _advance_piece(st, None, lam, pos, at_y)
                pos = at_y
            seg_end = min(obj.r, y_target)
            _advance_piece(st, obj, lam, pos, seg_end)
            pos = seg_end
    if pos < y_target:
        _advance_piece(st, _piece_at(s, pos), lam, pos, y_target)
    st.y = y_target
    return st


def _piece_at(s: KreinString, y: float) -> Optional[Piece]:
    for piece in s.pieces:
        if piece.l <= y < piece.r:
            return piece
    return None


# ---------------------------------------------------------------------------
# the boundary-derivative symbol with certified brackets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralMu:
    lam: float
    mu: float
    bracket_lo: float
    bracket_hi: float
    truncation_Y: float
    schedule: Tuple[Tuple[float, float, float], ...] = ()
    wronskian_defect: float = 0.0

    @property
    def half_width(self) -> float:
        return 0.5 * (self.bracket_hi - self.bracket_lo)


def mu_at_zero(s: KreinString) -> float:
    """Analytic lam = 0 value: 0 for a natural endpoint, 1/R for dirichlet."""
    return 0.0 if s.right_boundary == "natural" else 1.0 / s.R


def _atomless(s: KreinString) -> Tuple[KreinString, float]:
    m0 = s.atom_mass_at_zero()
    if m0 == 0.0:
        return s, 0.0
    atoms = tuple(a for a in s.atoms if a.y != 0.0)
    return KreinString(s.R, s.pieces, atoms, s.right_boundary, s.label), m0


@lru_cache(maxsize=65536)
def _spectral_mu_cached(s: KreinString, lam: float, tol: float,
                        rtol: float) -> SpectralMu:
    if lam < 0.0:
        raise DomainError(f"lam must be nonnegative, got {lam}")
    if lam == 0.0:
        mu0 = mu_at_zero(s)
        return SpectralMu(lam, mu0, mu0, mu0, 0.0)

    core, m0 = _atomless(s)
    shift = lam * m0

    if math.isfinite(core.R) and core.mass_finite_near_endpoint():
        st = integrate_fundamental(core, lam, core.R, apply_end_atoms=True)
        mu = st.value_ratio()
        return SpectralMu(lam, mu + shift, mu + shift, mu + shift, core.R,
                          wronskian_defect=st.wronskian_defect)

    if not math.isinf(core.R):
        return _bracket_to_finite_R(core, lam, tol, rtol, shift)

    support = core.support_end()
    if math.isfinite(support):
        st = integrate_fundamental(core, lam, support, apply_end_atoms=True)
        mu = st.derivative_ratio() if st.dphiD > 0.0 else 0.0
        return SpectralMu(lam, mu + shift, mu + shift, mu + shift, support,
                          wronskian_defect=st.wronskian_defect)

    # unbounded support: geometric truncation schedule with small increments
    # past each checkpoint so the stop happens as soon as the bracket closes
    # (deep overshoot would push the Wronskian below the float noise floor)
    q0 = lam * max(core.density(1e-6), core.density(1.0))
    y = min(1.0, 0.75 / math.sqrt(q0 + 1.0))
    st = FundamentalState.initial()
    schedule = []
    for _ in range(20000):
        st = integrate_fundamental(core, lam, y, from_state=st)
        if st.phiD > 0.0 and st.dphiD > 0.0:
            hi = st.value_ratio()
            lo = st.derivative_ratio()
            schedule.append((y, lo, hi))
            mid = 0.5 * (lo + hi)
            if hi - lo <= max(tol, rtol * abs(mid)):
                return SpectralMu(lam, mid + shift, lo + shift, hi + shift, y,
                                  tuple(schedule), st.wronskian_defect)
        qn = lam * max(core.density(y), core.density(2.0 * y))
        y += min(y, 0.75 / math.sqrt(qn + 1e-300)) if qn > 0.0 else y
    last = schedule[-1] if schedule else None
    raise ConvergenceError(
        f"bracket failed to close for lam={lam:.6g} (last={last})", last)


def _bracket_to_finite_R(core: KreinString, lam: float, tol: float,
                         rtol: float, shift: float) -> SpectralMu:
    """Approach a finite endpoint carrying infinite mass: halving schedule.

    The same Wronskian monotonicity gives phiN/phiD decreasing and
    phiN'/phiD' increasing in y on [0, R), so the two ratios bracket mu.
    """
    R = core.R
    st = FundamentalState.initial()
    schedule = []
    y = 0.5 * R
    last_atom = max((a.y for a in core.atoms), default=0.0)
    while y <= last_atom:
        y = 0.5 * (y + R)
    for _ in range(20000):
        st = integrate_fundamental(core, lam, y, from_state=st)
        if st.phiD > 0.0 and st.dphiD > 0.0:
            hi = st.value_ratio()
            lo = st.derivative_ratio()
            schedule.append((y, lo, hi))
            mid = 0.5 * (lo + hi)
            if hi - lo <= max(tol, rtol * abs(mid)):
                return SpectralMu(lam, mid + shift, lo + shift, hi + shift, y,
                                  tuple(schedule), st.wronskian_defect)
        qn = lam * core.density(y)
        dy = min(0.5 * (R - y), 0.75 / math.sqrt(qn + 1e-300))
        y += dy
        if R - y < 4e-16 * R:
            break
    last = schedule[-1] if schedule else None
    raise ConvergenceError(
        f"bracket failed to close toward R={R} for lam={lam:.6g}", last)


def spectral_mu(s: KreinString, lam: float, tol: float = 1e-12,
                rtol: float = 1e-9) -> SpectralMu:
    """mu(lam) with a rigorous two-sided bracket of width <= max(tol, rtol*mu)."""
    return _spectral_mu_cached(s, float(lam), float(tol), float(rtol))


# ---------------------------------------------------------------------------
# the bounded solution phi_lam = phiN - mu * phiD
# ---------------------------------------------------------------------------

def _clamp_unit(value: float) -> float:
    if -1e-6 <= value < 0.0:
        return 0.0
    if 1.0 < value <= 1.0 + 1e-6:
        return 1.0
    return value


def bounded_solution(s: KreinString, lam: float, y: float) -> float:
    """phi_lam(y): the bounded solution normalized to phi(0) = 1."""
    return bounded_solution_profile(s, lam, [y])[0]


def bounded_solution_profile(s: KreinString, lam: float,
                             y_grid: Sequence[float]) -> List[float]:
    """phi_lam on an increasing grid, computed in one sweep."""
    ys = list(y_grid)
    if any(b < a for a, b in zip(ys, ys[1:])):
        raise DomainError("y_grid must be nondecreasing")
    if ys and not (0.0 <= ys[0] and ys[-1] <= s.R):
        raise DomainError(f"y_grid outside [0, R={s.R}]")
    if lam < 0.0:
        raise DomainError(f"lam must be nonnegative, got {lam}")
    if lam == 0.0:
        if s.right_boundary == "natural":
            return [1.0 for _ in ys]
        return [1.0 - y / s.R for y in ys]

    core, _ = _atomless(s)
    res = spectral_mu(s, lam)
    mu_core = res.mu - lam * s.atom_mass_at_zero()
    out = []
    st = FundamentalState.initial()
    for y in ys:
        st = integrate_fundamental(core, lam, y, from_state=st)
        scale = math.exp(min(st.log_scale, 700.0))
        value = (st.phiN - mu_core * st.phiD) * scale
        if st.dphiD > 0.0:
            # Wronskian of (phi, phiD) is 1, and phi is nonincreasing, so
            # phi(y) <= 1/phiD'(y): a cancellation-free cap for the deeply
            # decayed regime where the difference above is pure noise
            ub = math.exp(-min(st.log_scale, 700.0)) / st.dphiD
            value = min(value, ub)
            noise = 5e-15 * (1.0 + abs(mu_core)) * scale
            if value < 0.0 and -value <= noise + 1e-6:
                value = 0.0
        out.append(_clamp_unit(value))
    return out


# ---------------------------------------------------------------------------
# tabulation and serialization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralFunctionTable:
    entries: Tuple[SpectralMu, ...]

    CSV_HEADER = "lambda,mu,bracket_lo,bracket_hi,truncation_Y"

    def __post_init__(self):
        for e in self.entries:
            if not (e.bracket_lo <= e.mu <= e.bracket_hi):
                raise ValueError(f"mu outside bracket at lam={e.lam}")

    def to_csv(self) -> str:
        lines = [self.CSV_HEADER]
        for e in self.entries:
            lines.append(",".join(f"{x:.17g}" for x in
                                  (e.lam, e.mu, e.bracket_lo, e.bracket_hi,
                                   e.truncation_Y)))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "SpectralFunctionTable":
        lines = [ln for ln in text.strip().splitlines() if ln]
        if lines[0] != cls.CSV_HEADER:
            raise ValueError(f"bad header {lines[0]!r}")
        entries = []
        for ln in lines[1:]:
            lam, mu, lo, hi, y = (float(tok) for tok in ln.split(","))
            entries.append(SpectralMu(lam, mu, lo, hi, y))
        return cls(tuple(entries))

    def to_json(self) -> str:
        import json
        cols = self.CSV_HEADER.split(",")
        rows = [dict(zip(cols, (float(f"{v:.17g}") for v in
                                (e.lam, e.mu, e.bracket_lo, e.bracket_hi,
                                 e.truncation_Y))))
                for e in self.entries]
        return json.dumps({"rows": rows}, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SpectralFunctionTable":
        import json
        cols = cls.CSV_HEADER.split(",")
        entries = []
        for row in json.loads(text)["rows"]:
            lam, mu, lo, hi, y = (float(row[c]) for c in cols)
            entries.append(SpectralMu(lam, mu, lo, hi, y))
        return cls(tuple(entries))


def mu_table(s: KreinString, lams: Sequence[float], tol: float = 1e-12,
             rtol: float = 1e-9) -> SpectralFunctionTable:
    return SpectralFunctionTable(tuple(spectral_mu(s, l, tol, rtol)
                                       for l in lams))


# ---------------------------------------------------------------------------
# complete-Bernstein sign pattern checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PropertyCheck:
    name: str
    passed: bool
    worst_violation: float


@dataclass(frozen=True)
class CBFReport:
    properties: Tuple[PropertyCheck, ...]

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.properties)

    def __getitem__(self, name: str) -> PropertyCheck:
        for p in self.properties:
            if p.name == name:
                return p
        raise KeyError(name)


def _dd_with_budget(lams, mus, hws, i, k):
    """Order-k divided difference on points i..i+k and its error budget.

    The budget combines the bracket half-widths with the rounding floor of
    the evaluation itself (the Lagrange weights are large on tight grids).
    """
    dd = 0.0
    budget = 0.0
    for j in range(i, i + k + 1):
        denom = 1.0
        for l in range(i, i + k + 1):
            if l != j:
                denom *= lams[j] - lams[l]
        dd += mus[j] / denom
        budget += (hws[j] + 4e-16 * abs(mus[j])) / abs(denom)
    return dd, budget


MuSource = Union[KreinString, Callable[[float], float], SpectralFunctionTable]


def cbf_check(target: MuSource, lam_grid: Sequence[float],
              rtol: float = 1e-9) -> CBFReport:
    """Sign pattern of a complete Bernstein function on a log-spaced grid.

    Checks mu >= 0, first divided differences >= 0, second <= 0, third >= 0,
    and lam -> mu(lam)/lam nonincreasing, each up to the error budget
    propagated from the bracket half-widths.
    """
    lams = [float(l) for l in lam_grid]
    if len(lams) < 16:
        raise DomainError("lam_grid must have at least 16 points")
    if any(l <= 0.0 for l in lams):
        raise DomainError("lam_grid must be positive")
    if any(b <= a for a, b in zip(lams, lams[1:])):
        raise DomainError("lam_grid must be strictly increasing")

    if isinstance(target, KreinString):
        entries = [spectral_mu(target, l, rtol=rtol) for l in lams]
        mus = [e.mu for e in entries]
        hws = [e.half_width for e in entries]
    elif isinstance(target, SpectralFunctionTable):
        mus = [e.mu for e in target.entries]
        hws = [e.half_width for e in target.entries]
        lams = [e.lam for e in target.entries]
    else:
        mus = [float(target(l)) for l in lams]
        hws = [0.0] * len(lams)

    base = max(abs(m) for m in mus) + 1e-300
    checks = []
    specs = [("nonnegative", 0, +1.0), ("first_dd_nonnegative", 1, +1.0),
             ("second_dd_nonpositive", 2, -1.0), ("third_dd_nonnegative", 3, +1.0)]
    for name, order, sign in specs:
        worst = 0.0
        for i in range(len(lams) - order):
            dd, budget = _dd_with_budget(lams, mus, hws, i, order)
            margin = sign * dd + budget + 1e-12 * base
            if margin < -worst:
                worst = -margin
        checks.append(PropertyCheck(name, worst <= 0.0, max(0.0, worst)))

    worst = 0.0
    for i in range(len(lams) - 1):
        r0 = mus[i] / lams[i]
        r1 = mus[i + 1] / lams[i + 1]
        budget = ((hws[i] + 4e-16 * abs(mus[i])) / lams[i]
                  + (hws[i + 1] + 4e-16 * abs(mus[i + 1])) / lams[i + 1])
        margin = (r0 - r1) + budget + 1e-12 * base
        if margin < -worst:
            worst = -margin
    checks.append(PropertyCheck("mu_over_lam_nonincreasing", worst <= 0.0,
                                max(0.0, worst)))
    return CBFReport(tuple(checks))

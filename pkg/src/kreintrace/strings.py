"""Mass distributions on [0, R): density pieces plus point masses.

A string is the single input of the analytic side: the coefficient of the
eigenvalue problem phi'' = lam * a * phi.  Pieces are restricted to forms
with closed-form antiderivatives so that masses, and hence the ODE stepper,
stay exact within a piece:

  const   : a(y) = c
  power   : a(y) = c * (b + e*y)**p
  sympow  : a(y) = c * (b**2 - e**2 * y**2)**p      (p in {-1, -2} or 0..4)

`sympow` exists because the inverse-square-of-(1 - y^2) coefficient cannot be
written as a single (b + e*y)**p factor.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

INF = math.inf


class StringSpecError(ValueError):
    """Malformed string-spec input (parse error naming the offending field)."""


class StringValidationError(ValueError):
    """Structurally valid spec that violates a string invariant."""


@dataclass(frozen=True)
class Const:
    c: float

    def density(self, y: float) -> float:
        return self.c

    def antiderivative(self, y: float) -> float:
        return self.c * y


@dataclass(frozen=True)
class Power:
    c: float
    b: float
    e: float
    p: float

    def density(self, y: float) -> float:
        return self.c * (self.b + self.e * y) ** self.p

    def antiderivative(self, y: float) -> float:
        b, e, p = self.b, self.e, self.p
        if e == 0.0:
            return self.c * b**p * y
        if p == -1.0:
            return self.c * math.log(abs(b + e * y)) / e
        return self.c * (b + e * y) ** (p + 1.0) / (e * (p + 1.0))


@dataclass(frozen=True)
class SymPower:
    c: float
    b: float
    e: float
    p: float

    def density(self, y: float) -> float:
        return self.c * (self.b**2 - (self.e * y) ** 2) ** self.p

    def antiderivative(self, y: float) -> float:
        b, e, p = self.b, self.e, self.p
        if e == 0.0:
            return self.c * b ** (2 * p) * y
        if p == -2.0:
            # d/dy [ y / (2 b^2 (b^2 - e^2 y^2)) + atanh(e y / b) / (2 e b^3) ]
            #   = (b^2 - e^2 y^2)^{-2}
            return self.c * (y / (2 * b**2 * (b**2 - e**2 * y**2))
                             + math.atanh(e * y / b) / (2 * e * b**3))
        if p == -1.0:
            return self.c * math.atanh(e * y / b) / (e * b)
        # nonnegative integer p: expand (b^2 - e^2 y^2)^p and integrate
        total = 0.0
        k_p = int(p)
        for k in range(k_p + 1):
            coef = math.comb(k_p, k) * b ** (2 * (k_p - k)) * (-(e**2)) ** k
            total += coef * y ** (2 * k + 1) / (2 * k + 1)
        return self.c * total


Form = Union[Const, Power, SymPower]

_FORM_KINDS = {"const": Const, "power": Power, "sympow": SymPower}
_KIND_OF = {Const: "const", Power: "power", SymPower: "sympow"}


@dataclass(frozen=True)
class Piece:
    l: float
    r: float
    form: Form

    def mass(self, lo: float, hi: float) -> float:
        """Mass of the piece restricted to [lo, hi) (exact antiderivative)."""
        lo = max(lo, self.l)
        hi = min(hi, self.r)
        if hi <= lo:
            return 0.0
        return self.form.antiderivative(hi) - self.form.antiderivative(lo)


@dataclass(frozen=True)
class Atom:
    y: float
    m: float


@dataclass(frozen=True)
class KreinString:
    """Locally finite nonnegative measure on [0, R), immutable and hashable."""

    R: float
    pieces: Tuple[Piece, ...] = ()
    atoms: Tuple[Atom, ...] = ()
    right_boundary: str = "natural"  # "natural" | "dirichlet"
    label: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        _validate(self)

    # -- measure queries ---------------------------------------------------

    def density(self, y: float) -> float:
        for piece in self.pieces:
            if piece.l <= y < piece.r:
                return piece.form.density(y)
        return 0.0

    def cumulative_mass(self, y: float) -> float:
        """a([0, y)): atoms strictly below y included (left-open convention)."""
        if y < 0.0 or y > self.R:
            raise StringValidationError(f"y={y} outside [0, R={self.R}]")
        total = 0.0
        for piece in self.pieces:
            total += piece.mass(0.0, y)
        for atom in self.atoms:
            if atom.y < y:
                total += atom.m
        return total

    def atom_mass_at_zero(self) -> float:
        return sum(a.m for a in self.atoms if a.y == 0.0)

    # -- support / endpoint classification ----------------------------------

    def support_end(self) -> float:
        """Supremum of the support of the measure (0 for the empty measure)."""
        end = 0.0
        for piece in self.pieces:
            end = max(end, piece.r)
        for atom in self.atoms:
            end = max(end, atom.y)
        return end

    def mass_finite_near_endpoint(self) -> bool:
        """Whether the total mass stays finite approaching the right end.

        Finite mass at a finite R means the endpoint value problem can be
        integrated directly to R; otherwise the endpoint must be approached
        through a truncation schedule.  For R = inf this asks whether the
        support is bounded.
        """
        if math.isinf(self.R):
            return not math.isinf(self.support_end())
        for piece in self.pieces:
            if piece.r < self.R:
                continue
            f = piece.form
            if isinstance(f, Power) and f.p <= -1.0:
                base_r = f.b + f.e * self.R
                if abs(base_r) <= 1e-12 * max(1.0, abs(f.b)):
                    return False
            if isinstance(f, SymPower) and f.p <= -1.0:
                base_r = f.b**2 - (f.e * self.R) ** 2
                if abs(base_r) <= 1e-12 * max(1.0, f.b**2):
                    return False
        return True

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        pieces = []
        for piece in self.pieces:
            form = {"kind": _KIND_OF[type(piece.form)]}
            if isinstance(piece.form, Const):
                form["c"] = piece.form.c
            else:
                form.update(c=piece.form.c, b=piece.form.b,
                            e=piece.form.e, p=piece.form.p)
            pieces.append({"l": piece.l,
                           "r": "inf" if math.isinf(piece.r) else piece.r,
                           "form": form})
        return {
            "R": "inf" if math.isinf(self.R) else self.R,
            "right_boundary": self.right_boundary,
            "pieces": pieces,
            "atoms": [{"y": a.y, "m": a.m} for a in self.atoms],
            "label": self.label,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _validate(s: KreinString) -> None:
    if not (s.R > 0.0):
        raise StringValidationError(f"R must be positive, got {s.R}")
    if s.right_boundary not in ("natural", "dirichlet"):
        raise StringValidationError(f"unknown right_boundary {s.right_boundary!r}")
    if s.right_boundary == "dirichlet" and math.isinf(s.R):
        raise StringValidationError("dirichlet endpoint requires finite R")
    if s.right_boundary == "natural" and not math.isinf(s.R):
        raise StringValidationError("natural endpoint requires R = inf")

    for piece in sorted(s.pieces, key=lambda p: p.l):
        if not (0.0 <= piece.l < piece.r <= s.R):
            raise StringValidationError(
                f"piece [{piece.l}, {piece.r}) not inside [0, {s.R})")
        _validate_form_in(s, piece)
    pieces = sorted(s.pieces, key=lambda p: p.l)
    for a, b in zip(pieces, pieces[1:]):
        if b.l < a.r:
            raise StringValidationError(
                f"pieces [{a.l},{a.r}) and [{b.l},{b.r}) overlap")
    if tuple(pieces) != s.pieces:
        object.__setattr__(s, "pieces", tuple(pieces))

    locs = [a.y for a in s.atoms]
    if len(set(locs)) != len(locs):
        raise StringValidationError("atom locations must be distinct")
    for atom in s.atoms:
        if not (0.0 <= atom.y < s.R):
            raise StringValidationError(f"atom at {atom.y} outside [0, {s.R})")
        if not (atom.m > 0.0):
            raise StringValidationError(f"atom mass must be positive, got {atom.m}")
    ordered = tuple(sorted(s.atoms, key=lambda a: a.y))
    if ordered != s.atoms:
        object.__setattr__(s, "atoms", ordered)


def _check_base(base_l: float, base_r: float, p: float, piece: Piece,
                R: float, what: str) -> None:
    """Positivity and integrability of a density base over [l, r).

    The base may vanish at l only with an integrable exponent (p > -1); it
    may vanish toward r with any exponent, but a non-integrable blow-up is
    only locally finite when r coincides with the string endpoint R.
    """
    if min(base_l, base_r) < 0.0:
        raise StringValidationError(f"{what} base changes sign inside the piece")
    if base_l == 0.0 and p <= -1.0:
        raise StringValidationError(
            f"non-integrable {what} singularity at the left endpoint")
    if base_r == 0.0 and p <= -1.0 and piece.r < R:
        raise StringValidationError(
            f"{what} singularity at {piece.r} makes the measure not locally finite")


def _validate_form_in(s: KreinString, piece: Piece) -> None:
    f = piece.form
    if isinstance(f, Const):
        if f.c < 0.0:
            raise StringValidationError(f"negative constant density {f.c}")
        return
    if f.c < 0.0:
        raise StringValidationError(f"negative density coefficient {f.c}")
    if isinstance(f, Power):
        base_l = f.b + f.e * piece.l
        if math.isinf(piece.r):
            if f.e < 0.0:
                raise StringValidationError(
                    "power base becomes negative on an unbounded piece")
            base_r = f.b if f.e == 0.0 else INF
            if f.e == 0.0 and f.b <= 0.0:
                raise StringValidationError("degenerate power base")
        else:
            base_r = f.b + f.e * piece.r
        _check_base(base_l, base_r, f.p, piece, s.R, "power")
        return
    if isinstance(f, SymPower):
        if f.p not in (-1.0, -2.0) and not (f.p == int(f.p) and 0 <= f.p <= 4):
            raise StringValidationError(
                f"sympow exponent {f.p} has no closed-form antiderivative here")
        if f.b <= 0.0:
            raise StringValidationError("sympow requires b > 0")
        if math.isinf(piece.r):
            raise StringValidationError("sympow pieces must be bounded")
        base_l = f.b**2 - (f.e * piece.l) ** 2
        base_r = f.b**2 - (f.e * piece.r) ** 2
        _check_base(base_l, base_r, f.p, piece, s.R, "sympow")
        return
    raise StringValidationError(f"unknown form {type(f).__name__}")


# ---------------------------------------------------------------------------
# structured-spec parsing (the on-disk format)
# ---------------------------------------------------------------------------

_TOP_FIELDS = {"R", "right_boundary", "pieces", "atoms", "label"}
_PIECE_FIELDS = {"l", "r", "form"}
_FORM_FIELDS = {"const": {"kind", "c"},
                "power": {"kind", "c", "b", "e", "p"},
                "sympow": {"kind", "c", "b", "e", "p"}}
_ATOM_FIELDS = {"y", "m"}


def _num(value, where: str, allow_inf: bool = False) -> float:
    if value == "inf" and allow_inf:
        return INF
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise StringSpecError(f"field {where}: expected a number, got {value!r}")
    x = float(value)
    if not math.isfinite(x):
        raise StringSpecError(f"field {where}: must be finite, got {value!r}")
    return x


def build_string(spec: Union[dict, str]) -> KreinString:
    """Parse and validate a structured string spec (dict or JSON text)."""
    if isinstance(spec, str):
        try:
            spec = json.loads(spec)
        except json.JSONDecodeError as exc:
            raise StringSpecError(f"invalid JSON: {exc}") from exc
    if not isinstance(spec, dict):
        raise StringSpecError("spec must be a JSON object")
    unknown = set(spec) - _TOP_FIELDS
    if unknown:
        raise StringSpecError(f"unknown field(s) {sorted(unknown)}")
    if "R" not in spec:
        raise StringSpecError("field R: missing")

    R = _num(spec["R"], "R", allow_inf=True)
    boundary = spec.get("right_boundary",
                        "natural" if math.isinf(R) else "dirichlet")
    if boundary not in ("natural", "dirichlet"):
        raise StringSpecError(f"field right_boundary: bad value {boundary!r}")

    pieces = []
    for i, raw in enumerate(spec.get("pieces", [])):
        where = f"pieces[{i}]"
        if not isinstance(raw, dict) or set(raw) - _PIECE_FIELDS:
            raise StringSpecError(f"field {where}: unexpected structure")
        if "form" not in raw or not isinstance(raw["form"], dict):
            raise StringSpecError(f"field {where}.form: missing or malformed")
        form_raw = raw["form"]
        kind = form_raw.get("kind")
        if kind not in _FORM_KINDS:
            raise StringSpecError(f"field {where}.form.kind: bad value {kind!r}")
        if set(form_raw) - _FORM_FIELDS[kind]:
            raise StringSpecError(
                f"field {where}.form: unknown field(s) "
                f"{sorted(set(form_raw) - _FORM_FIELDS[kind])}")
        c = _num(form_raw.get("c", 0.0), f"{where}.form.c")
        if kind == "const":
            form: Form = Const(c)
        else:
            form = _FORM_KINDS[kind](
                c=c,
                b=_num(form_raw.get("b", 0.0), f"{where}.form.b"),
                e=_num(form_raw.get("e", 0.0), f"{where}.form.e"),
                p=_num(form_raw.get("p", 0.0), f"{where}.form.p"))
        pieces.append(Piece(l=_num(raw.get("l"), f"{where}.l"),
                            r=_num(raw.get("r"), f"{where}.r", allow_inf=True),
                            form=form))

    atoms = []
    for i, raw in enumerate(spec.get("atoms", [])):
        where = f"atoms[{i}]"
        if not isinstance(raw, dict) or set(raw) - _ATOM_FIELDS:
            raise StringSpecError(f"field {where}: unexpected structure")
        atoms.append(Atom(y=_num(raw.get("y"), f"{where}.y"),
                          m=_num(raw.get("m"), f"{where}.m")))

    label = spec.get("label")
    if label is not None and not isinstance(label, str):
        raise StringSpecError("field label: must be a string")

    return KreinString(R=R, pieces=tuple(pieces), atoms=tuple(atoms),
                       right_boundary=boundary, label=label)


# ---------------------------------------------------------------------------
# builtin catalog
# ---------------------------------------------------------------------------

def builtin(name: str, **params) -> KreinString:
    """Catalog of named strings with exact coefficients.

    half_laplacian           a = 1 on [0, inf)
    water_wave               a = 1 on [0, 1), R = inf
    strip_dirichlet          a = 1 on [0, 1), R = 1, dirichlet
    zero                     a = 0, R = inf
    unit_zero                a = 0, R = 1, dirichlet
    atom(y0, m)              single point mass, R = inf
    quasi_relativistic       a = (1 + 2y)^-2 on [0, inf)
    quasi_relativistic_plus  a = (1 - 2y)^-2 on [0, 1/2), dirichlet
    sqrt_shift               a = (1 - y^2)^-2 on [0, 1), dirichlet
    caffarelli_silvestre(alpha)  a = alpha^-2 * y^(2/alpha - 2), R = inf
    """
    if name == "half_laplacian":
        return KreinString(INF, (Piece(0.0, INF, Const(1.0)),),
                           label="half_laplacian")
    if name == "water_wave":
        return KreinString(INF, (Piece(0.0, 1.0, Const(1.0)),),
                           label="water_wave")
    if name == "strip_dirichlet":
        return KreinString(1.0, (Piece(0.0, 1.0, Const(1.0)),),
                           right_boundary="dirichlet", label="strip_dirichlet")
    if name == "zero":
        return KreinString(INF, label="zero")
    if name == "unit_zero":
        return KreinString(1.0, right_boundary="dirichlet", label="unit_zero")
    if name == "atom":
        y0 = float(params.pop("y0", 1.0))
        m = float(params.pop("m", 1.0))
        _reject_extras(name, params)
        return KreinString(INF, atoms=(Atom(y0, m),), label=f"atom({y0},{m})")
    if name == "quasi_relativistic":
        return KreinString(INF, (Piece(0.0, INF, Power(1.0, 1.0, 2.0, -2.0)),),
                           label="quasi_relativistic")
    if name == "quasi_relativistic_plus":
        return KreinString(0.5, (Piece(0.0, 0.5, Power(1.0, 1.0, -2.0, -2.0)),),
                           right_boundary="dirichlet",
                           label="quasi_relativistic_plus")
    if name == "sqrt_shift":
        return KreinString(1.0, (Piece(0.0, 1.0, SymPower(1.0, 1.0, 1.0, -2.0)),),
                           right_boundary="dirichlet", label="sqrt_shift")
    if name == "caffarelli_silvestre":
        alpha = params.pop("alpha", None)
        _reject_extras(name, params)
        if alpha is None:
            raise StringSpecError("caffarelli_silvestre requires alpha")
        alpha = float(alpha)
        if not (0.0 < alpha < 2.0):
            raise StringValidationError(
                f"caffarelli_silvestre needs alpha in (0, 2), got {alpha}")
        if alpha == 1.0:
            piece = Piece(0.0, INF, Const(1.0))
        else:
            piece = Piece(0.0, INF, Power(alpha**-2, 0.0, 1.0, 2.0 / alpha - 2.0))
        return KreinString(INF, (piece,), label=f"caffarelli_silvestre({alpha})")
    raise StringSpecError(f"unknown builtin {name!r}")


def _reject_extras(name, params):
    if params:
        raise StringSpecError(f"builtin {name!r}: unexpected parameter(s) "
                              f"{sorted(params)}")


GOLDEN_NAMES = ("half_laplacian", "water_wave", "strip_dirichlet", "zero",
                "unit_zero", "quasi_relativistic", "quasi_relativistic_plus",
                "sqrt_shift")


def mollify_atoms(s: KreinString, width: float) -> KreinString:
    """Replace each point mass by a constant density of the same mass.

    Cross-check mode for the simulator's occupation-window treatment of
    interior atoms: the mollified string has no atoms, so its additive clock
    uses plain density rates.  Atoms at 0 spread over [0, width); interior
    atoms over a centered window, clipped at 0.
    """
    if width <= 0.0:
        raise StringValidationError(f"width must be positive, got {width}")
    pieces = list(s.pieces)
    for atom in s.atoms:
        lo = max(0.0, atom.y - width / 2.0)
        hi = lo + width
        if hi > s.R:
            raise StringValidationError(
                f"mollified atom at {atom.y} exceeds the string length")
        pieces.append(Piece(lo, hi, Const(atom.m / width)))
    return KreinString(s.R, tuple(sorted(pieces, key=lambda p: p.l)), (),
                       s.right_boundary,
                       f"mollified({s.label})" if s.label else None)

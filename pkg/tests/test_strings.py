import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from kreintrace.strings import (Atom, Const, KreinString, Piece, Power,
                                StringSpecError, StringValidationError,
                                SymPower, build_string, builtin)


def test_builtin_catalog_shapes():
    assert builtin("half_laplacian").R == math.inf
    assert builtin("water_wave").pieces[0].r == 1.0
    strip = builtin("strip_dirichlet")
    assert strip.R == 1.0 and strip.right_boundary == "dirichlet"
    assert builtin("zero").pieces == ()
    qp = builtin("quasi_relativistic_plus")
    assert qp.R == 0.5 and qp.right_boundary == "dirichlet"
    atom = builtin("atom", y0=1.0, m=2.0)
    assert atom.atoms == (Atom(1.0, 2.0),)
    assert builtin("caffarelli_silvestre", alpha=1.0).pieces[0].form == Const(1.0)


def test_builtin_rejects():
    with pytest.raises(StringSpecError):
        builtin("no_such_string")
    with pytest.raises(StringValidationError):
        builtin("caffarelli_silvestre", alpha=2.5)
    with pytest.raises(StringSpecError):
        builtin("atom", y0=1.0, m=1.0, bogus=3)


def test_validation_rejects_negative_density():
    with pytest.raises(StringValidationError):
        KreinString(1.0, (Piece(0.0, 1.0, Const(-2.0)),),
                    right_boundary="dirichlet")


def test_validation_rejects_overlap_and_bounds():
    with pytest.raises(StringValidationError):
        KreinString(math.inf, (Piece(0.0, 2.0, Const(1.0)),
                               Piece(1.0, 3.0, Const(1.0))))
    with pytest.raises(StringValidationError):
        KreinString(1.0, (Piece(0.0, 2.0, Const(1.0)),),
                    right_boundary="dirichlet")
    with pytest.raises(StringValidationError):
        KreinString(math.inf, atoms=(Atom(1.0, 1.0), Atom(1.0, 2.0)))
    with pytest.raises(StringValidationError):
        KreinString(math.inf, atoms=(Atom(0.5, -1.0),))
    with pytest.raises(StringValidationError):
        KreinString(2.0, right_boundary="natural")


def test_nonintegrable_interior_singularity_rejected():
    # pole of order 2 strictly inside [0, R) is not locally finite
    with pytest.raises(StringValidationError):
        KreinString(math.inf, (Piece(0.0, 1.0, Power(1.0, 1.0, -2.0, -2.0)),))


def test_cumulative_mass_closed_forms():
    ww = builtin("water_wave")
    assert ww.cumulative_mass(0.5) == 0.5
    assert ww.cumulative_mass(0.0) == 0.0
    assert ww.cumulative_mass(3.0) == 1.0
    atom = builtin("atom", y0=1.0, m=1.0)
    assert atom.cumulative_mass(1.0) == 0.0          # left-open at the atom
    assert atom.cumulative_mass(1.0 + 1e-9) == 1.0
    qr = builtin("quasi_relativistic")
    assert math.isclose(qr.cumulative_mass(1.0), 1.0 / 3.0, rel_tol=1e-14)


@pytest.mark.parametrize("name", ["water_wave", "strip_dirichlet",
                                  "quasi_relativistic",
                                  "quasi_relativistic_plus", "sqrt_shift"])
def test_cumulative_mass_matches_quadrature(name):
    s = builtin(name)
    end = min(s.R, 4.0)
    for y in np.linspace(0.01, end * 0.999, 7):
        ref = 0.0
        for piece in s.pieces:
            hi = min(y, piece.r)
            if hi > piece.l:
                val, err = quad(piece.form.density, piece.l, hi,
                                epsabs=1e-13, epsrel=1e-13, limit=300)
                ref += val
        got = s.cumulative_mass(float(y))
        assert abs(got - ref) <= 1e-10 * max(1.0, abs(ref))


@pytest.mark.parametrize("alpha", [0.5, 0.8, 1.5, 1.9])
def test_cs_cumulative_matches_quadrature(alpha):
    s = builtin("caffarelli_silvestre", alpha=alpha)
    for y in (0.3, 1.0, 2.5):
        ref = quad(s.pieces[0].form.density, 0.0, y,
                   epsabs=1e-13, epsrel=1e-13, limit=300)[0]
        assert abs(s.cumulative_mass(y) - ref) <= 1e-10 * max(1.0, ref)


def test_sympow_antiderivative():
    f = SymPower(1.0, 1.0, 1.0, -2.0)
    for a, b in [(0.0, 0.5), (0.2, 0.9), (0.5, 0.99)]:
        ref = quad(f.density, a, b, epsabs=1e-13, epsrel=1e-13)[0]
        assert abs((f.antiderivative(b) - f.antiderivative(a)) - ref) < 1e-10


def test_cumulative_monotone_with_atom_jump():
    s = KreinString(math.inf, (Piece(0.0, 2.0, Const(0.5)),),
                    atoms=(Atom(1.0, 3.0),))
    ys = np.linspace(0.0, 3.0, 400)
    vals = [s.cumulative_mass(float(y)) for y in ys]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    jump = s.cumulative_mass(1.0 + 1e-12) - s.cumulative_mass(1.0)
    assert jump == pytest.approx(3.0, abs=1e-9)


def test_domain_errors():
    s = builtin("strip_dirichlet")
    with pytest.raises(StringValidationError):
        s.cumulative_mass(1.5)
    with pytest.raises(StringValidationError):
        s.cumulative_mass(-0.1)


def test_roundtrip_catalog():
    for name in ("half_laplacian", "water_wave", "strip_dirichlet", "zero",
                 "unit_zero", "quasi_relativistic", "quasi_relativistic_plus",
                 "sqrt_shift"):
        s = builtin(name)
        back = build_string(s.to_json())
        assert back.R == s.R
        assert back.pieces == s.pieces
        assert back.atoms == s.atoms
        assert back.right_boundary == s.right_boundary
        assert back.label == s.label


def test_spec_rejects_unknown_fields():
    doc = builtin("water_wave").to_dict()
    doc["unexpected"] = 1
    with pytest.raises(StringSpecError, match="unexpected"):
        build_string(doc)
    doc = builtin("water_wave").to_dict()
    doc["pieces"][0]["form"]["weird"] = 2
    with pytest.raises(StringSpecError):
        build_string(doc)


def test_spec_parse_errors_name_field():
    with pytest.raises(StringSpecError, match="R"):
        build_string({"pieces": []})
    with pytest.raises(StringSpecError, match="atoms"):
        build_string({"R": "inf", "atoms": [{"y": "x", "m": 1}]})
    with pytest.raises(StringSpecError):
        build_string("{not json")


def test_validation_error_from_parsed_spec():
    doc = {"R": 1.0, "right_boundary": "dirichlet",
           "pieces": [{"l": 0.0, "r": 1.0, "form": {"kind": "const", "c": -2.0}}]}
    with pytest.raises(StringValidationError):
        build_string(doc)


@given(st.lists(st.tuples(st.floats(0.01, 5.0), st.floats(0.01, 2.0)),
                min_size=0, max_size=3),
       st.floats(0.0, 4.0))
def test_random_atom_strings_roundtrip(atom_data, extra):
    locs = sorted({round(y, 6) for y, _ in atom_data})
    atoms = tuple(Atom(y, m) for (_, m), y in zip(atom_data, locs))
    s = KreinString(math.inf, atoms=atoms, label="randomized")
    back = build_string(json.loads(s.to_json()))
    assert back.atoms == s.atoms
    y = float(extra)
    total = sum(a.m for a in atoms if a.y < y)
    assert s.cumulative_mass(y) == pytest.approx(total, abs=0.0)


def test_mass_finite_near_endpoint_classification():
    assert builtin("strip_dirichlet").mass_finite_near_endpoint()
    assert not builtin("quasi_relativistic_plus").mass_finite_near_endpoint()
    assert not builtin("sqrt_shift").mass_finite_near_endpoint()
    assert builtin("water_wave").mass_finite_near_endpoint()
    assert not builtin("half_laplacian").mass_finite_near_endpoint()

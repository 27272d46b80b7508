import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kreintrace.krein import bounded_solution, spectral_mu
from kreintrace.mc import (CFEstimate, EstimateError, SimConfig,
                           additive_functional, bessel_subordinator_exponent,
                           cf_hitting_estimate, cf_trace_estimate,
                           local_time_diagnostic, run_hit, run_trace,
                           simulate_regulated_bm, suggested_horizon)
from kreintrace.strings import builtin


def small_cfg(**kw):
    base = dict(dt=1e-3, horizon=30.0, n_paths=3000, seed=7,
                s_values=(0.25, 0.5))
    base.update(kw)
    return SimConfig(**base)


# -- configuration contracts ---------------------------------------------------

def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(dt=0.1, horizon=10.0, n_paths=10, seed=0, s_values=(1.0,))
    with pytest.raises(ValueError):
        SimConfig(dt=1e-4, horizon=1.0, n_paths=0, seed=0, s_values=(1.0,))
    with pytest.raises(ValueError):
        SimConfig(dt=1e-4, horizon=1.0, n_paths=10, seed=0, s_values=(-1.0,))
    with pytest.raises(ValueError):
        SimConfig(dt=1e-4, horizon=1.0, n_paths=10, seed=0,
                  s_values=(1.0, 0.5))
    cfg = SimConfig(dt=1e-4, horizon=1.0, n_paths=10, seed=0, s_values=(1.0,))
    assert cfg.atom_window == pytest.approx(1e-2)


def test_suggested_horizon_scale():
    h = suggested_horizon(1.0, exclusion=0.01)
    assert 6000 < h < 7000
    assert suggested_horizon(0.5, 0.01) == pytest.approx(h / 4.0, rel=1e-12)


def test_cfestimate_range_invariant():
    with pytest.raises(ValueError):
        CFEstimate((1.0,), 1.0, 1.5, 0.01, 100)
    CFEstimate((1.0,), 1.0, 1.0 + 2.9e-2, 1e-2, 100)  # within 3 stderr


# -- skorokhod construction -----------------------------------------------------

def test_regulated_paths_invariants():
    cfg = SimConfig(dt=1e-3, horizon=1.0, n_paths=500, seed=3,
                    s_values=(1.0,))
    y, l_reg = simulate_regulated_bm(cfg)
    assert (y >= 0.0).all()
    assert (np.diff(l_reg, axis=1) >= 0.0).all()
    # L increases only where Y is at the boundary
    moved = np.diff(l_reg, axis=1) > 0
    assert np.all(y[:, 1:][moved] == 0.0)


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=40))
def test_skorokhod_identity_on_arbitrary_increments(incs):
    w = np.concatenate([[0.0], np.cumsum(incs)])
    m = np.minimum.accumulate(np.minimum(w, 0.0))
    y = w - m
    assert (y >= 0.0).all()
    assert (np.diff(-m) >= 0.0).all()
    # reflected path dominates the free path
    assert np.all(y >= w - 1e-12)


def test_mean_local_time_reflection_oracle():
    cfg = SimConfig(dt=1e-4, horizon=1.0, n_paths=1500, seed=21,
                    s_values=(99.0,))
    res = run_trace(builtin("zero"), cfg)
    mean_l = res.final_l.mean()
    stderr = res.final_l.std(ddof=1) / math.sqrt(cfg.n_paths)
    target = math.sqrt(2.0 / math.pi)
    assert abs(mean_l - target) <= 3.0 * stderr + 0.6 * math.sqrt(cfg.dt)


def test_local_time_diagnostic_factor_two():
    cfg = SimConfig(dt=1e-5, horizon=1.0, n_paths=150, seed=5,
                    s_values=(1.0,))
    reg, occ = local_time_diagnostic(cfg)
    assert occ / reg == pytest.approx(2.0, rel=0.1)


# -- additive functional ---------------------------------------------------------

def test_additive_functional_constant_density():
    cfg = SimConfig(dt=5e-4, horizon=0.5, n_paths=20, seed=2, s_values=(1.0,))
    y, l_reg = simulate_regulated_bm(cfg)
    a = additive_functional(y, l_reg, builtin("half_laplacian"), cfg)
    steps = np.arange(y.shape[1]) * cfg.dt
    assert np.allclose(a, steps[None, :], atol=1e-12)
    a0 = additive_functional(y, l_reg, builtin("zero"), cfg)
    assert np.all(a0 == 0.0)


def test_additive_functional_origin_atom_uses_doubled_regulator():
    cfg = SimConfig(dt=5e-4, horizon=0.5, n_paths=5, seed=2, s_values=(1.0,))
    y, l_reg = simulate_regulated_bm(cfg)
    a = additive_functional(y, l_reg, builtin("atom", y0=0.0, m=1.5), cfg)
    assert np.allclose(a, 1.5 * 2.0 * l_reg, atol=1e-14)


def test_additive_functional_matches_kernel_recording():
    # dual route: the fused kernel's A at the crossing index vs the
    # materialized-path functional evaluated at the same index
    cfg = SimConfig(dt=1e-3, horizon=30.0, n_paths=50, seed=13,
                    s_values=(0.4,))
    s = builtin("water_wave")
    res = run_trace(s, cfg)
    y, l_reg = simulate_regulated_bm(
        SimConfig(dt=cfg.dt, horizon=cfg.horizon, n_paths=cfg.n_paths,
                  seed=cfg.seed, s_values=cfg.s_values))
    a = additive_functional(y, l_reg, s, cfg)
    for p in range(cfg.n_paths):
        if not res.reached[p, 0]:
            continue
        idx = np.argmax(l_reg[p] > 0.4)
        assert a[p, idx] == pytest.approx(res.out_a[p, 0], rel=1e-12)
        assert l_reg[p, idx] == res.out_l[p, 0]


# -- characteristic function estimators -------------------------------------------

def test_zero_string_cf_exactly_one():
    cfg = small_cfg(n_paths=500)
    est = cf_trace_estimate(builtin("zero"), 1.3, 0.5, cfg)
    assert est.value == 1.0
    assert est.stderr == 0.0


def test_xi_zero_trivial():
    cfg = small_cfg(n_paths=300)
    est = cf_trace_estimate(builtin("water_wave"), 0.0, 0.5, cfg)
    assert est.value == 1.0


def test_trace_cf_small_scale_matches_theory():
    cfg = small_cfg()
    for name in ("half_laplacian", "water_wave"):
        s = builtin(name)
        for xi in (0.7, 1.5):
            for level in cfg.s_values:
                est = cf_trace_estimate(s, xi, level, cfg)
                theory = math.exp(-level * spectral_mu(s, xi * xi).mu)
                budget = 3.0 * est.stderr + 0.03 + est.excluded_frac
                assert abs(est.value - theory) <= budget, (name, xi, level)


def test_origin_atom_cf_identity():
    # validates the occupation-density convention at the boundary: only the
    # doubled regulator reproduces exp(-s * lam) for mass at 0
    cfg = small_cfg(n_paths=4000)
    s = builtin("atom", y0=0.0, m=1.0)
    est = cf_trace_estimate(s, 1.0, 0.5, cfg)
    theory = math.exp(-0.5 * 1.0)  # mu(lam) = lam at lam = 1
    assert abs(est.value - theory) <= 3.0 * est.stderr + 0.04
    halved = math.exp(-0.5 * 0.5)
    assert abs(est.value - halved) > 6.0 * est.stderr


def test_xi_monotone_nonincreasing_along_path():
    cfg = small_cfg(n_paths=50, s_values=(0.5,))
    y, l_reg = simulate_regulated_bm(
        SimConfig(dt=cfg.dt, horizon=2.0, n_paths=50, seed=4,
                  s_values=(0.5,)))
    a = additive_functional(y, l_reg, builtin("water_wave"), cfg)
    xi_vals = np.exp(-0.5 * 1.44 * a)
    assert (np.diff(xi_vals, axis=1) <= 1e-15).all()


def test_levels_monotone_in_s():
    cfg = small_cfg()
    res = run_trace(builtin("half_laplacian"), cfg)
    both = res.reached.all(axis=1)
    assert (res.out_l[both, 1] >= res.out_l[both, 0]).all()
    assert (res.out_a[both, 1] >= res.out_a[both, 0]).all()
    assert (res.out_l[both, 0] >= 0.25).all()


def test_exclusion_warning_and_fraction():
    cfg = SimConfig(dt=1e-3, horizon=2.0, n_paths=400, seed=9,
                    s_values=(1.5,))
    est = cf_trace_estimate(builtin("zero"), 0.0, 1.5, cfg)
    assert est.excluded_frac > 0.01
    assert est.warning is not None


def test_no_paths_hard_error():
    cfg = SimConfig(dt=1e-3, horizon=1.0, n_paths=20, seed=9,
                    s_values=(50.0,))
    with pytest.raises(EstimateError):
        cf_trace_estimate(builtin("zero"), 1.0, 50.0, cfg)


def test_dirichlet_kill_reported_extended_claim():
    cfg = SimConfig(dt=1e-3, horizon=20.0, n_paths=2000, seed=31,
                    s_values=(0.3,))
    est = cf_trace_estimate(builtin("strip_dirichlet"), 1.0, 0.3, cfg)
    assert est.extended_claim
    assert est.killed_frac > 0.0
    # killed paths count as zero contributions; under that convention the
    # spectral identity extends to finite-length dirichlet strings
    theory = math.exp(-0.3 * spectral_mu(builtin("strip_dirichlet"), 1.0).mu)
    assert abs(est.value - theory) <= 3.0 * est.stderr + 0.05


def test_determinism_across_workers_and_chunking():
    base = dict(dt=1e-3, horizon=10.0, n_paths=800, seed=42,
                s_values=(0.3,))
    run_trace.cache_clear()
    a = cf_trace_estimate(builtin("water_wave"), 1.0, 0.3,
                          SimConfig(workers=1, **base))
    run_trace.cache_clear()
    b = cf_trace_estimate(builtin("water_wave"), 1.0, 0.3,
                          SimConfig(workers=3, **base))
    assert a.value == b.value and a.stderr == b.stderr
    run_trace.cache_clear()


# -- hitting estimator -------------------------------------------------------------

def test_hitting_matches_bounded_solution():
    cfg = SimConfig(dt=1e-3, horizon=400.0, n_paths=3000, seed=17,
                    s_values=(1.0,))
    for name, y0 in (("half_laplacian", 1.0), ("water_wave", 0.5)):
        s = builtin(name)
        est = cf_hitting_estimate(s, 1.0, y0, cfg)
        theory = bounded_solution(s, 1.0, y0)
        assert abs(est.value - theory) <= 3.0 * est.stderr + 0.03 \
            + est.excluded_frac


def test_hitting_xi_zero():
    cfg = SimConfig(dt=1e-3, horizon=100.0, n_paths=200, seed=8,
                    s_values=(1.0,))
    est = cf_hitting_estimate(builtin("quasi_relativistic"), 0.0, 0.5, cfg)
    assert est.value == 1.0


def test_hitting_requires_positive_start():
    cfg = small_cfg(n_paths=10)
    with pytest.raises(ValueError):
        run_hit(builtin("zero"), cfg, 0.0)


# -- radial diffusion exponent -------------------------------------------------------

def test_bessel_exponent_alpha_one_fast():
    cfg = SimConfig(dt=1e-4, horizon=20.0, n_paths=4000, seed=12,
                    s_values=(1.0,))
    fit = bessel_subordinator_exponent(1.0, cfg, n_boot=50)
    assert abs(fit.slope - 0.5) <= max(0.05, 2.5 * fit.half_width)
    assert fit.bad_frac == 0.0
    assert fit.reached_frac > 0.5


def test_bessel_rejects_bad_alpha():
    cfg = small_cfg(n_paths=10)
    with pytest.raises(ValueError):
        bessel_subordinator_exponent(2.5, cfg)


def test_mollified_atom_cross_check():
    # the occupation-window atom clock vs the same mass spread as a narrow
    # density: two discretizations of one additive functional
    from kreintrace.strings import mollify_atoms
    cfg = small_cfg(n_paths=4000)
    atom = builtin("atom", y0=1.0, m=1.0)
    soft = mollify_atoms(atom, width=0.05)
    run_trace.cache_clear()
    for xi in (1.0, 2.0):
        a = cf_trace_estimate(atom, xi, 0.5, cfg)
        b = cf_trace_estimate(soft, xi, 0.5, cfg)
        assert abs(a.value - b.value) <= 3.0 * (a.stderr + b.stderr) + 0.02
    # spectral side agrees too: the mollified symbol approaches the atom's
    mu_atom = spectral_mu(atom, 1.0).mu
    mu_soft = spectral_mu(soft, 1.0).mu
    assert abs(mu_soft - mu_atom) < 0.02


def test_mollify_validation():
    from kreintrace.strings import mollify_atoms
    from kreintrace.strings import StringValidationError
    with pytest.raises(StringValidationError):
        mollify_atoms(builtin("atom", y0=1.0, m=1.0), -0.1)
    s = mollify_atoms(builtin("atom", y0=0.0, m=2.0), 0.1)
    assert s.atoms == ()
    assert s.cumulative_mass(0.1) == pytest.approx(2.0)

"""Symmetrizer construction, oracles, and estimate probes."""

import numpy as np
import pytest

from hypersym.coeffs import constant_system
from hypersym.errors import SamplingError, SpectralCheckError, StabilityMarginError
from hypersym.matkernel import eval_symbol
from hypersym.presets import get_preset
from hypersym.planner import plan
from hypersym.symmetrizer import (
    ParameterSet,
    build_M,
    build_field,
    holder_difference_probe,
    lower_bound_check,
    mollify_path,
    quadrature_R,
    rescale_for_a,
    solve_R_lyapunov,
    symbol_estimate_probe,
)
from hypersym.weights import bracket, bracket_pow


def _params(theta=0, rho=0.5, a=2.0, ell=4.0, tau=0.5, big_t=2.0):
    return ParameterSet(rho=rho, a=a, ell=ell, tau=tau, T=big_t, c1=0.1,
                        theta=theta, a0=0.5, eps0=0.5, c_spec=0.5)


# ---------------------------------------------------------------------------
# build_M


def test_build_m_scalar():
    cs = constant_system(np.array([[0.0]]))
    p = _params()
    xi = 3.0
    m = build_M(cs, p, 0.0, 0.0, xi)
    mu = bracket_pow(xi, 4.0, 0.5)
    np.testing.assert_allclose(m, [[-2.0 * mu]], atol=1e-14)


def test_build_m_jordan_assembly():
    cs = constant_system(np.array([[0.0, 1.0], [0.0, 0.0]]))
    p = _params()
    xi = 2.0
    m = build_M(cs, p, 0.0, 0.0, xi)
    mu = bracket_pow(xi, 4.0, 0.5)
    np.testing.assert_allclose(m, [[-2 * mu, 2j], [0, -2 * mu]], atol=1e-13)


def test_build_m_constant_in_x_equals_symbol():
    cs = constant_system(np.array([[0.1, 1.0], [1.0, -0.1]]))
    p = _params()
    m = build_M(cs, p, 0.0, 0.0, 5.0)
    mu = bracket_pow(5.0, 4.0, 0.5)
    expected = 1j * eval_symbol(cs, 0, 0, 5.0) - 2.0 * mu * np.eye(2)
    np.testing.assert_allclose(m, expected, atol=1e-13)


def test_build_m_spectral_check_fires():
    # certified ceiling c(a0 - a)mu = -20 mu demands more damping than the
    # actual Re = -2 mu provides: the floor is violated and the build refuses
    with pytest.raises(SpectralCheckError):
        build_M(
            constant_system(np.array([[0.0]])),
            ParameterSet(rho=0.5, a=2.0, ell=4.0, tau=0.5, T=2.0, c1=0.1,
                         theta=0, a0=0.0, eps0=0.5, c_spec=10.0),
            0.0, 0.0, 3.0,
        )


# ---------------------------------------------------------------------------
# Lyapunov solve vs quadrature


def test_scalar_closed_form_exact():
    a, mu = 2.0, 7.0
    r = solve_R_lyapunov(np.array([[-a * mu]]), a * mu)
    assert abs(r[0, 0] - 0.5) <= 1e-12


def test_jordan_closed_form():
    a, mu, lam = 2.0, 5.0, 3.0
    m = np.array([[-a * mu, 1j * lam], [0.0, -a * mu]])
    closed = np.array(
        [[0.5, 1j * lam / (4 * a * mu)],
         [-1j * lam / (4 * a * mu), 0.5 + lam**2 / (4 * a**2 * mu**2)]]
    )
    r = solve_R_lyapunov(m, a * mu)
    assert np.linalg.norm(r - closed, 2) <= 1e-10
    rq = quadrature_R(m, a * mu, tol=1e-9)
    assert np.linalg.norm(rq - closed, 2) <= 1e-7


def test_methods_agree_on_random_stable():
    rng = np.random.default_rng(8)
    for _ in range(100):
        x = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        m = x - (np.max(np.abs(np.linalg.eigvals(x).real)) + 1.0) * np.eye(3)
        r1 = solve_R_lyapunov(m, 1.0)
        r2 = quadrature_R(m, 1.0, tol=1e-8)
        rel = np.linalg.norm(r1 - r2, 2) / np.linalg.norm(r1, 2)
        assert rel <= 1e-6


def test_solve_refuses_marginal_matrix():
    with pytest.raises(StabilityMarginError):
        solve_R_lyapunov(np.array([[1e-12, 1.0], [0.0, -1.0]]), 1.0)
    with pytest.raises(StabilityMarginError):
        quadrature_R(np.array([[0.0]]), 1.0)


def test_monotone_damping_closed_forms():
    # scalar and Jordan: stability margin grows and ||R|| does not grow in a
    mu, lam = 4.0, 2.0
    prev_norm = None
    prev_margin = None
    for a in (2.0, 4.0, 8.0):
        m = np.array([[-a * mu, 1j * lam], [0.0, -a * mu]])
        margin = -np.max(np.linalg.eigvals(m).real)
        r = solve_R_lyapunov(m, a * mu)
        if prev_norm is not None:
            assert margin >= prev_margin - 1e-12
            assert np.linalg.norm(r, 2) <= prev_norm + 1e-12
        prev_norm = np.linalg.norm(r, 2)
        prev_margin = margin


def test_scaled_identity_reproduction():
    # H_N == 0 gives R = I/2 exactly at every frequency
    cs = constant_system(np.zeros((3, 3)))
    p = _params()
    field = build_field(cs, p, [0.0], [0.0], [1.0, 4.0, 64.0])
    np.testing.assert_allclose(
        field.R, np.broadcast_to(np.eye(3) / 2, field.R.shape), atol=1e-12
    )


# ---------------------------------------------------------------------------
# Field invariants


def test_field_invariants_on_presets():
    xis = np.geomspace(4.0, 1024.0, 6)
    for name in ("diag_sym", "wave_t2", "jordan_lower"):
        pre = get_preset(name)
        pr = plan(pre.theta, "lipschitz")
        field = build_field(pre.coeffs, pr.params, [0.0, 0.5], [0.0, 1.0], xis)
        inv = field.check_invariants()
        assert inv["max_hermitian_defect"] <= 1e-12
        assert inv["min_eigenvalue"] > 0.0
        assert inv["max_lyapunov_residual_rel"] <= 1e-8


def test_quadrature_field_matches_lyapunov_field():
    pre = get_preset("xdep")
    pr = plan(0, "lipschitz")
    xis = np.geomspace(4.0, 256.0, 4)
    f1 = build_field(pre.coeffs, pr.params, [0.2], [0.0, 2.0], xis,
                     method="lyapunov")
    f2 = build_field(pre.coeffs, pr.params, [0.2], [0.0, 2.0], xis,
                     method="quadrature")
    rel = np.max(
        np.linalg.norm(f1.R - f2.R, axis=(-2, -1))
        / np.linalg.norm(f1.R, axis=(-2, -1))
    )
    assert rel <= 1e-6


def test_lower_bound_scalar():
    cs = constant_system(np.array([[0.0]]))
    p = _params()
    field = build_field(cs, p, [0.0], [0.0], np.geomspace(4, 4096, 7))
    rep = lower_bound_check(field)
    assert rep.passed
    assert rep.exponent == pytest.approx(0.0, abs=1e-8)
    assert rep.c_prime == pytest.approx(0.5, rel=1e-10)


def test_lower_bound_jordan_theta_one():
    pre = get_preset("jordan_lower")
    pr = plan(1, "lipschitz")
    field = build_field(pre.coeffs, pr.params, [0.0], [0.0],
                        np.geomspace(16, 4096, 9))
    rep = lower_bound_check(field)
    assert rep.passed
    nu = pr.params.nu
    assert -2 * nu - 0.1 <= rep.exponent <= 0.05


# ---------------------------------------------------------------------------
# Symbol estimates


def test_symbol_probe_scalar_trivial():
    cs = constant_system(np.array([[0.0]]))
    p = _params()
    rep = symbol_estimate_probe(cs, p, np.geomspace(16, 1024, 5),
                                max_order=1, include_dt=False)
    for row in rep.rows:
        assert row.passed


def test_symbol_probe_presets_quick():
    xis = np.geomspace(2.0**4, 2.0**10, 6)
    for name, theta in (("diag_sym", 0), ("wave_x2", 1)):
        pre = get_preset(name)
        pr = plan(theta, "lipschitz")
        rep = symbol_estimate_probe(pre.coeffs, pr.params, xis)
        assert rep.passed
        for row in rep.rows:
            assert row.inconclusive or row.fitted is None or \
                row.fitted <= row.target + 0.15


def test_symbol_probe_a_sweep_reports():
    pre = get_preset("diag_sym")
    pr = plan(0, "lipschitz")
    rep = symbol_estimate_probe(pre.coeffs, pr.params,
                                np.geomspace(2.0**4, 2.0**9, 5),
                                max_order=1, include_dt=False,
                                check_a_power=True)
    saw_fit = False
    for row in rep.rows:
        if row.a_power_fitted is not None:
            saw_fit = True
            assert row.a_power_fitted <= 0.05  # non-increasing in a
    assert saw_fit


def test_rescale_for_a_stays_admissible():
    from hypersym.planner import validate_params

    pre = get_preset("diag_sym")
    pr = plan(0, "lipschitz")
    for a in (2.0, 4.0, 8.0):
        pa = rescale_for_a(pr.params, a)
        assert validate_params(pa, c=0.5, a0=1.0, eps0=0.5) == []


# ---------------------------------------------------------------------------
# Mollified symmetrizer


def test_mollify_constant_path_identity():
    ts = np.linspace(-1.0, 2.0, 1600)
    r0 = np.array([[1.0, 0.2j], [-0.2j, 2.0]])
    path = np.broadcast_to(r0, (len(ts), 3, 2, 2)).copy()
    br = np.array([4.0, 16.0, 64.0])
    mol = mollify_path(ts, path, br, delta=1.0, eval_ts=[0.0, 0.5, 1.0])
    for i in range(3):
        assert np.max(np.abs(mol.values[i] - r0[None])) <= 1e-8


def test_mollify_rejects_coarse_path():
    ts = np.linspace(-1.0, 2.0, 12)
    path = np.broadcast_to(np.eye(2), (len(ts), 1, 2, 2)).copy()
    with pytest.raises(SamplingError):
        mollify_path(ts, path, np.array([64.0]), delta=1.0, eval_ts=[0.5])


def test_mollify_requires_margin():
    ts = np.linspace(0.0, 1.0, 4000)
    path = np.broadcast_to(np.eye(2), (len(ts), 1, 2, 2)).copy()
    with pytest.raises(SamplingError):
        mollify_path(ts, path, np.array([4.0]), delta=1.0, eval_ts=[0.0])


# ---------------------------------------------------------------------------
# Hoelder differences


def test_holder_probe_constant_coeffs_zero():
    cs = constant_system(np.array([[0.0, 1.0], [1.0, 0.0]]))
    p = _params()
    fit = holder_difference_probe(cs, p, [(0.1, 0.2), (0.1, 0.4)],
                                  np.geomspace(8, 512, 5))
    assert fit.passed
    assert fit.max_ratio <= 1e-12


def test_holder_probe_lacunary_bounded():
    pre = get_preset("holder_k")
    from fractions import Fraction

    pr = plan(0, "holder", Fraction(1, 2))
    pairs = [(0.1, 0.1 + 4.0**-k) for k in range(1, 6)]
    fit = holder_difference_probe(pre.coeffs, pr.params, pairs,
                                  np.geomspace(16, 4096, 7))
    assert fit.passed
    assert np.isfinite(fit.max_ratio)
    assert fit.exponent <= fit.target + 0.15


def test_holder_probe_linear_path():
    # A(t) = t * A1 with kappa = 1: finite ratio, exponent within target
    from hypersym.coeffs import CoeffTerm, MatrixField, SystemCoefficients

    terms = [CoeffTerm(0, "t", np.array([[0.0, 1.2], [0.8, 0.0]], dtype=complex)),
             CoeffTerm(0, "1", np.array([[0.0, 0.3], [0.3, 0.0]], dtype=complex))]
    cs = SystemCoefficients(m=2, a_field=MatrixField(2, terms),
                            b_field=MatrixField(2, []))
    p = ParameterSet(rho=0.5, a=2.0, ell=4.0, tau=0.5, T=2.0, c1=0.1,
                     theta=0, kappa=1.0, a0=0.5, eps0=0.5, c_spec=0.5)
    fit = holder_difference_probe(cs, p, [(0.2, 0.3), (0.2, 0.25)],
                                  np.geomspace(16, 2048, 6))
    assert fit.passed and np.isfinite(fit.max_ratio)


def test_mollified_dt_exponent_within_target():
    # d_t of the mollified symmetrizer gains at most delta - kappa*delta
    from fractions import Fraction

    from hypersym.solver import r_multiplier_lattice

    pre = get_preset("holder_k")
    pr = plan(0, "holder", Fraction(1, 2))
    params = pr.params
    nu, rho = params.nu, float(params.rho)
    delta, kappa = 1.0, 0.5
    xis = np.geomspace(16.0, 1024.0, 5)
    br = bracket(xis, float(params.ell))
    widths = br**-delta
    dt_path = float(np.min(widths)) / 5.0
    margin = float(np.max(widths)) * 1.1
    ts = np.arange(-margin, 0.3 + margin + dt_path, dt_path)
    chi2 = np.ones_like(xis)
    path = np.stack([
        r_multiplier_lattice(pre.coeffs, params, float(t), xis, chi2,
                             tau_run=float(params.tau))
        for t in ts
    ])
    h = 5e-4
    mol = mollify_path(ts, path, br, delta, [0.15 - h, 0.15 + h])
    dt_r = (mol.values[1] - mol.values[0]) / (2 * h)
    vals = np.linalg.norm(dt_r, axis=(-2, -1))
    target = 3 * nu + 1 - rho + delta - kappa * delta
    good = vals > 1e-12
    assert np.count_nonzero(good) >= 3
    slope = float(np.polyfit(np.log(br[good]), np.log(vals[good]), 1)[0])
    assert slope <= target + 0.15


def test_mollified_minus_plain_lipschitz_scaling():
    # kappa = 1 path: || R~ - R || decays at least like the class target
    from hypersym.coeffs import CoeffTerm, MatrixField, SystemCoefficients
    from hypersym.solver import r_multiplier_lattice

    terms = [CoeffTerm(0, "t", np.array([[0.0, 1.2], [0.8, 0.0]], dtype=complex)),
             CoeffTerm(0, "1", np.array([[0.0, 0.3], [0.3, 0.0]], dtype=complex))]
    cs = SystemCoefficients(m=2, a_field=MatrixField(2, terms),
                            b_field=MatrixField(2, []))
    params = ParameterSet(rho=0.5, a=2.0, ell=4.0, tau=0.5, T=2.0, c1=0.1,
                          theta=0, kappa=1.0, delta=1.0, a0=0.5, eps0=0.5,
                          c_spec=0.5)
    nu, rho, delta, kappa = 0.0, 0.5, 1.0, 1.0
    xis = np.geomspace(8.0, 512.0, 5)
    br = bracket(xis, 4.0)
    widths = br**-delta
    dt_path = float(np.min(widths)) / 5.0
    margin = float(np.max(widths)) * 1.1
    ts = np.arange(-margin, 0.4 + margin + dt_path, dt_path)
    chi2 = np.ones_like(xis)
    path = np.stack([
        r_multiplier_lattice(cs, params, float(t), xis, chi2, tau_run=0.5)
        for t in ts
    ])
    mol = mollify_path(ts, path, br, delta, [0.2])
    plain = r_multiplier_lattice(cs, params, 0.2, xis, chi2, tau_run=0.5)
    vals = np.linalg.norm(mol.values[0] - plain, axis=(-2, -1))
    target = 3 * nu + 1 - rho - kappa * delta
    good = vals > 1e-13
    if np.count_nonzero(good) >= 3:
        slope = float(np.polyfit(np.log(br[good]), np.log(vals[good]), 1)[0])
        assert slope <= target + 0.15


def test_field_serialization(tmp_path):
    cs = constant_system(np.array([[0.0, 1.0], [1.0, 0.0]]))
    p = _params()
    field = build_field(cs, p, [0.0, 0.5], [0.0], [4.0, 16.0])
    csv_path = tmp_path / "field.csv"
    bin_path = tmp_path / "field.bin"
    field.to_csv(csv_path)
    field.to_binary(bin_path)
    header = csv_path.read_text().splitlines()[0]
    assert header.startswith("t,x,xi,min_eig,re_R00")
    raw = np.fromfile(bin_path, dtype=np.complex128).reshape(field.R.shape)
    np.testing.assert_array_equal(raw, field.R)


def test_lattice_generator_matches_pointwise():
    from hypersym.symmetrizer import hn_matrix, hn_over_lattice

    pre = get_preset("xdep")
    p = _params()
    xis = np.array([2.0, 16.0, 128.0])
    stack = hn_over_lattice(pre.coeffs, p, 0.3, 1.1, xis)
    for i, xi in enumerate(xis):
        single = hn_matrix(pre.coeffs, p, 0.3, 1.1, float(xi))
        np.testing.assert_allclose(stack[i], single, atol=1e-13)

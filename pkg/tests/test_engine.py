"""Spectral states, multipliers, quantization, dense oracle, conjugation."""

import numpy as np
import pytest

from hypersym.engine import (
    SampledSymbol,
    SpectralState,
    TrigMatrixSymbol,
    apply_multiplier,
    conjugated_symbol_bk,
    conjugation_remainder_probe,
    dense_operator_matrix,
    hermitian_form,
    lattice,
    quantize_kn,
    state_to_vector,
    symbol_from_coeffs,
    weighted_norm,
)
from hypersym.coeffs import constant_system
from hypersym.errors import AliasingError, BudgetError, WeightOverflowError
from hypersym.weights import (
    bracket,
    bracket_multiplier,
    gevrey_multiplier,
    identity_multiplier,
)


def _random_state(m=2, n=64, seed=0):
    rng = np.random.default_rng(seed)
    return SpectralState(rng.normal(size=(m, n)) + 1j * rng.normal(size=(m, n)))


# ---------------------------------------------------------------------------
# States


def test_round_trip_identity():
    rng = np.random.default_rng(1)
    for n in (16, 64, 256):
        u = rng.normal(size=(2, n)) + 1j * rng.normal(size=(2, n))
        st = SpectralState.from_physical(u)
        assert np.max(np.abs(st.to_physical() - u)) <= 1e-12 * np.max(np.abs(u))


def test_real_data_conjugate_symmetric():
    rng = np.random.default_rng(2)
    st = SpectralState.from_physical(rng.normal(size=(3, 64)))
    assert st.is_conjugate_symmetric()


def test_parseval_unit_constant():
    rng = np.random.default_rng(3)
    u = rng.normal(size=(2, 128))
    st = SpectralState.from_physical(u)
    assert st.norm() ** 2 == pytest.approx(np.mean(np.sum(np.abs(u) ** 2, axis=0)))


def test_power_of_two_required():
    with pytest.raises(ValueError):
        SpectralState(np.zeros((1, 48), dtype=complex))


# ---------------------------------------------------------------------------
# Multipliers


def test_identity_multiplier():
    st = _random_state()
    out = apply_multiplier(identity_multiplier(), st)
    np.testing.assert_array_equal(out.coeffs, st.coeffs)


def test_zero_power_bracket_is_identity():
    st = _random_state()
    out = apply_multiplier(bracket_multiplier(0.0, 7.0), st)
    np.testing.assert_allclose(out.coeffs, st.coeffs, atol=1e-15)


def test_gevrey_inverse_pair():
    st = _random_state()
    w = gevrey_multiplier(0.8, 0.75, 2.0)
    winv = gevrey_multiplier(-0.8, 0.75, 2.0)
    out = apply_multiplier(winv, apply_multiplier(w, st))
    assert np.max(np.abs(out.coeffs - st.coeffs)) <= 1e-10


def test_gevrey_overflow_refused():
    st = _random_state(n=256)
    with pytest.raises(WeightOverflowError) as err:
        apply_multiplier(gevrey_multiplier(50.0, 0.9, 1.0), st)
    assert "tau" in str(err.value)


def test_weighted_norm_examples():
    st = _random_state()
    assert weighted_norm(st, 0.0, 3.0) == pytest.approx(st.norm())
    single = np.zeros((1, 64), dtype=complex)
    single[0, 5] = 2.0
    st1 = SpectralState(single)
    assert weighted_norm(st1, 0.7, 2.0) == pytest.approx(
        2.0 * bracket(5.0, 2.0) ** 0.7
    )
    # ell large at fixed support: norm ~ ell^sigma * plain norm
    big = weighted_norm(st1, 0.7, 1e6)
    assert big == pytest.approx(2.0 * (1e6) ** 0.7, rel=1e-5)


# ---------------------------------------------------------------------------
# Quantization


def test_quantize_constant_symbol_identity():
    st = _random_state()
    sym = TrigMatrixSymbol(m=2, terms=((0, np.eye(2), None),))
    out = quantize_kn(sym.sample(st.n_x), st)
    assert np.max(np.abs(out.coeffs - st.coeffs)) <= 1e-12


def test_quantize_x_only_symbol_is_pointwise_multiplication():
    n = 64
    rng = np.random.default_rng(5)
    # band-limited state so the e^{ix} shift stays inside the lattice
    coeffs = np.zeros((1, n), dtype=complex)
    coeffs[0, :20] = rng.normal(size=20)
    coeffs[0, -20:] = rng.normal(size=20)
    st = SpectralState(coeffs)
    sym = TrigMatrixSymbol(m=1, terms=((1, np.eye(1), None),))
    out = quantize_kn(sym.sample(n), st)
    x = 2 * np.pi * np.arange(n) / n
    expected = np.exp(1j * x)[None, :] * st.to_physical()
    assert np.max(np.abs(out.to_physical() - expected)) <= 1e-10


def test_quantize_ixi_is_spectral_derivative():
    n = 64
    x = 2 * np.pi * np.arange(n) / n
    st = SpectralState.from_physical(np.cos(3 * x)[None, :])
    sym = TrigMatrixSymbol(
        m=1, terms=((0, np.eye(1), lambda xi: 1j * np.asarray(xi, complex)),)
    )
    out = quantize_kn(sym.sample(n), st).to_physical()
    assert np.max(np.abs(out - (-3 * np.sin(3 * x))[None, :])) <= 1e-10


def test_quantize_x_independent_matches_multiplier():
    st = _random_state()
    sym = TrigMatrixSymbol(
        m=2, terms=((0, np.eye(2), lambda xi: bracket(xi, 2.0).astype(complex)),)
    )
    q = quantize_kn(sym.sample(st.n_x), st)
    mult = apply_multiplier(bracket_multiplier(1.0, 2.0), st)
    assert np.max(np.abs(q.coeffs - mult.coeffs)) <= 1e-12 * np.max(np.abs(mult.coeffs))


def test_quantize_differential_symbol_product_rule():
    # p = A1(x) * (i xi) against physical-space A1(x) d_x u
    n = 128
    cs = constant_system(np.array([[0.0]]))  # placeholder for m
    x_fine = None
    rng = np.random.default_rng(6)
    band = 20
    coeffs = np.zeros((1, n), dtype=complex)
    coeffs[0, 1:band] = rng.normal(size=band - 1)
    coeffs[0, -band:] = rng.normal(size=band)
    st = SpectralState(coeffs)
    a1 = 1.0  # coefficient of cos x
    sym = TrigMatrixSymbol(
        m=1,
        terms=(
            (1, np.eye(1) * a1 / 2.0, lambda xi: 1j * np.asarray(xi, complex)),
            (-1, np.eye(1) * a1 / 2.0, lambda xi: 1j * np.asarray(xi, complex)),
        ),
    )
    out = quantize_kn(sym.sample(n), st).to_physical()
    x = 2 * np.pi * np.arange(n) / n
    du = SpectralState(st.coeffs * (1j * st.xi)[None, :]).to_physical()
    expected = np.cos(x)[None, :] * du
    assert np.max(np.abs(out - expected)) <= 1e-8


def test_sampled_symbol_nyquist_enforced():
    with pytest.raises(AliasingError):
        SampledSymbol(values=np.zeros((64, 64, 1, 1), dtype=complex), x_band=1)


# ---------------------------------------------------------------------------
# Dense oracle


def test_dense_identity():
    sym = TrigMatrixSymbol(m=1, terms=((0, np.eye(1), None),))
    d = dense_operator_matrix(sym.sample(16))
    np.testing.assert_allclose(d, np.eye(16), atol=1e-13)


def test_dense_block_diagonal_for_multiplier():
    sym = TrigMatrixSymbol(
        m=2, terms=((0, np.array([[1.0, 2.0], [0.5, -1.0]]), None),)
    )
    d = dense_operator_matrix(sym.sample(8))
    # component blocks carry the constant matrix entries on their diagonals
    np.testing.assert_allclose(np.diag(d[:8, :8]), np.ones(8), atol=1e-13)
    np.testing.assert_allclose(np.diag(d[:8, 8:]), 2 * np.ones(8), atol=1e-13)
    np.testing.assert_allclose(np.diag(d[8:, :8]), 0.5 * np.ones(8), atol=1e-13)


def test_dense_shift_structure():
    sym = TrigMatrixSymbol(m=1, terms=((1, np.eye(1), None),))
    n = 16
    d = dense_operator_matrix(sym.sample(n))
    xi = lattice(n).astype(int)
    for j, xin in enumerate(xi):
        col = d[:, j]
        nz = np.where(np.abs(col) > 1e-12)[0]
        if xin + 1 <= n // 2 - 1:
            assert list(nz) == [int(np.where(xi == xin + 1)[0][0])]
        else:
            assert nz.size == 0  # shifted out of the lattice


def test_dense_matches_quantize_on_random_symbol():
    rng = np.random.default_rng(7)
    terms = (
        (0, rng.normal(size=(2, 2)) + 0j, lambda xi: np.asarray(xi, complex)),
        (1, rng.normal(size=(2, 2)) + 0j, None),
        (-2, rng.normal(size=(2, 2)) + 0j, lambda xi: bracket(xi, 1.0).astype(complex)),
    )
    sym = TrigMatrixSymbol(m=2, terms=terms)
    st = _random_state(m=2, n=32, seed=8)
    sampled = sym.sample(32)
    v1 = dense_operator_matrix(sampled) @ state_to_vector(st)
    v2 = state_to_vector(quantize_kn(sampled, st))
    assert np.max(np.abs(v1 - v2)) <= 1e-10 * max(1.0, np.max(np.abs(v1)))


def test_dense_budget():
    sym = TrigMatrixSymbol(m=1, terms=((0, np.eye(1), None),))
    with pytest.raises(BudgetError):
        dense_operator_matrix(sym.sample(1024))


# ---------------------------------------------------------------------------
# Hermitian form


def test_hermitian_form_identity_symbol():
    st = _random_state()
    sym = TrigMatrixSymbol(m=2, terms=((0, np.eye(2), None),))
    val = hermitian_form(sym.sample(st.n_x), st)
    assert val == pytest.approx(st.norm() ** 2)


def test_hermitian_form_diagonal_single_mode():
    coeffs = np.zeros((2, 32), dtype=complex)
    coeffs[0, 3] = 1.5
    st = SpectralState(coeffs)
    sym = TrigMatrixSymbol(m=2, terms=((0, np.diag([2.0, 0.0]), None),))
    assert hermitian_form(sym.sample(32), st) == pytest.approx(2 * 1.5**2)


def test_hermitian_form_positive_lower_bound():
    st = _random_state()
    p = np.array([[2.0, 0.5], [0.5, 1.0]])
    sym = TrigMatrixSymbol(m=2, terms=((0, p, None),))
    val = hermitian_form(sym.sample(st.n_x), st)
    min_eig = np.min(np.linalg.eigvalsh(p))
    assert val >= min_eig * st.norm() ** 2 - 1e-10
    assert val > 0


# ---------------------------------------------------------------------------
# Conjugated symbol expansion


def test_conjugated_bk_zeroth_order_is_symbol():
    sym = TrigMatrixSymbol(m=1, terms=((1, np.eye(1), None),))
    b0 = conjugated_symbol_bk(sym, 0.7, 0.75, 2.0, 0)
    xi = lattice(32)
    np.testing.assert_allclose(
        b0.eval(np.array([0.3]), xi), sym.eval(np.array([0.3]), xi), atol=1e-14
    )


def test_conjugated_bk_x_independent_unchanged():
    sym = TrigMatrixSymbol(
        m=1, terms=((0, np.eye(1), lambda xi: bracket(xi, 1.0).astype(complex)),)
    )
    bk = conjugated_symbol_bk(sym, 0.7, 0.75, 2.0, 3)
    xi = lattice(32)
    np.testing.assert_allclose(
        bk.eval(np.array([0.0]), xi), sym.eval(np.array([0.0]), xi), atol=1e-13
    )


def test_conjugated_bk_first_order_hand_value():
    # e^{ix} scalar: b1 = e^{ix} (1 + tau rho xi <xi>^(rho-2))
    tau, rho, ell = 0.7, 0.75, 2.0
    sym = TrigMatrixSymbol(m=1, terms=((1, np.eye(1), None),))
    b1 = conjugated_symbol_bk(sym, tau, rho, ell, 1)
    xi = lattice(32)
    x = np.array([0.9])
    expected = np.exp(1j * 0.9) * (1.0 + tau * rho * xi * bracket(xi, ell) ** (rho - 2))
    got = b1.eval(x, xi)[0, :, 0, 0]
    np.testing.assert_allclose(got, expected, atol=1e-13)


def test_remainder_zero_for_x_independent_and_tau_zero():
    sym_xi = TrigMatrixSymbol(
        m=1, terms=((0, np.eye(1), lambda xi: bracket(xi, 1.0).astype(complex)),)
    )
    rep = conjugation_remainder_probe(sym_xi, 1.0, 0.75, 1.0, [0, 1], 64)
    for row in rep.rows:
        assert np.max(row.band_norms) <= 1e-12
    sym_x = TrigMatrixSymbol(m=1, terms=((1, np.eye(1), None),))
    rep0 = conjugation_remainder_probe(sym_x, 0.0, 0.75, 1.0, [0], 64)
    assert np.max(rep0.rows[0].band_norms) <= 1e-14


def test_remainder_orders_one_sided_and_monotone():
    sym = TrigMatrixSymbol(m=1, terms=((1, np.eye(1), None),))
    rep = conjugation_remainder_probe(sym, 1.0, 0.75, 1.0, [0, 1, 2], 128)
    fits = [r.fitted for r in rep.rows]
    for r in rep.rows:
        assert r.passed
    for a, b in zip(fits, fits[1:]):
        assert b <= a + 0.1


def test_remainder_tau_shrinks_on_overflow():
    sym = TrigMatrixSymbol(m=1, terms=((1, np.eye(1), None),))
    rep = conjugation_remainder_probe(sym, 100.0, 0.9, 1.0, [0], 128)
    assert rep.tau_shrunk
    assert rep.tau_used < 100.0


def test_symbol_from_coeffs_matches_generator():
    from hypersym.presets import get_preset

    pre = get_preset("xdep")
    sym = symbol_from_coeffs(pre.coeffs, t=0.3)
    xi = lattice(16)
    vals = sym.eval(np.array([0.7]), xi)
    a = pre.coeffs.eval_a(0.3, 0.7)
    np.testing.assert_allclose(vals[0, 3], 1j * a * xi[3], atol=1e-13)


def test_state_serialization(tmp_path):
    st = _random_state(m=2, n=16, seed=9)
    csv_path = tmp_path / "state.csv"
    bin_path = tmp_path / "state.bin"
    st.to_csv(csv_path)
    st.to_binary(bin_path)
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "xi,component,re,im"
    assert len(lines) == 1 + 16 * 2
    raw = np.fromfile(bin_path, dtype=np.complex128).reshape(2, 16)
    np.testing.assert_array_equal(raw, st.coeffs)


def test_sampled_symbol_csv(tmp_path):
    sym = TrigMatrixSymbol(m=1, terms=((1, np.eye(1), None),))
    sampled = sym.sample(8)
    path = tmp_path / "symbol.csv"
    sampled.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("x_index,xi,re_p00")
    assert len(lines) == 1 + sampled.n_q * sampled.n_x


def test_hermitian_form_x_dependent_matches_dense():
    # x-dependent hermitian symbol: the form equals the quadratic form of
    # the hermitian part of the dense operator matrix
    sym = TrigMatrixSymbol(
        m=1,
        terms=((0, 2.0 * np.eye(1), None),
               (1, 0.5 * np.eye(1), None),
               (-1, 0.5 * np.eye(1), None)),
    )  # p(x, xi) = 2 + cos x, hermitian-valued
    st = _random_state(m=1, n=32, seed=12)
    sampled = sym.sample(32)
    val = hermitian_form(sampled, st)
    d = dense_operator_matrix(sampled)
    v = state_to_vector(st)
    quad = np.real(v.conj() @ ((d + d.conj().T) / 2.0) @ v)
    assert val == pytest.approx(quad, rel=1e-12)
    assert abs(val - np.real(val)) == 0.0

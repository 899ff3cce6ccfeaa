import numpy as np
import pytest
from conftest import h2_field, h_chain, reference, shells
from hypothesis import given, settings, strategies as st
from scipy.linalg import fractional_matrix_power

from gbsopt.basis import basis_from_shells, fixed_basis, make_cgto, make_mcgto
from gbsopt.integrals import IntegralTensors, LinearDependenceError, build_tensors
from gbsopt.scf import rhf, rhf_energy, sym_orthogonalizer


def test_orthogonalizer_identity():
    np.testing.assert_allclose(sym_orthogonalizer(np.eye(3)).X, np.eye(3), atol=1e-15)


def test_orthogonalizer_diagonal():
    np.testing.assert_allclose(sym_orthogonalizer(np.diag([4.0, 1.0])).X, np.diag([0.5, 1.0]), atol=1e-15)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 8), st.integers(0, 10_000))
def test_orthogonalizer_random_spd(n, seed):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(n, n))
    S = M @ M.T + 0.5 * np.eye(n)
    X = sym_orthogonalizer(S).X
    assert np.max(np.abs(X.T @ S @ X - np.eye(n))) < 1e-10
    np.testing.assert_allclose(X, fractional_matrix_power(S, -0.5).real, atol=1e-10)


def test_orthogonalizer_linear_dependence():
    with pytest.raises(LinearDependenceError):
        sym_orthogonalizer(np.array([[1.0, 1.0], [1.0, 1.0]]))


def test_single_function_closed_form(h2):
    g = make_mcgto([make_cgto((0, 0, 0), [1.24, 0.3], [0.6, 0.5])])
    t = build_tensors(fixed_basis([g]), h2)
    res = rhf(t, h2, 2)
    assert res.converged
    assert res.E0 == pytest.approx(2 * t.A[0, 0] + t.B[0, 0, 0, 0], abs=1e-12)


def test_h2_sto3g_reference(h2, h2_sto3g):
    res = rhf(build_tensors(h2_sto3g, h2), h2, 2)
    ref = reference()
    assert res.converged
    assert res.E0 == pytest.approx(ref["h2_1p4"]["sto-3g"]["E_elec"], abs=1e-8)
    assert res.e_nuc == pytest.approx(1 / 1.4, abs=1e-14)


def test_density_invariants(h2):
    b = basis_from_shells(shells("6-31g"), h_chain(4))
    t = build_tensors(b, h_chain(4))
    res = rhf(t, h_chain(4), 4)
    D, S = res.D, t.S
    assert np.max(np.abs(D @ S @ D - D)) < 1e-8
    assert np.trace(D @ S) == pytest.approx(2.0, abs=1e-8)
    assert res.E0 == pytest.approx(rhf_energy(D, t), abs=1e-12)
    assert res.history[-1] == pytest.approx(res.E0, abs=1e-9)


def test_rotation_invariance():
    # E0 is unchanged by an orthogonal change of basis of the raw functions
    f = h_chain(4)
    t = build_tensors(basis_from_shells(shells("sto-3g"), f), f)
    rng = np.random.default_rng(5)
    U, _ = np.linalg.qr(rng.normal(size=(4, 4)))
    S = U.T @ t.S @ U
    A = U.T @ t.A @ U
    B = np.einsum("abcd,ai,bj,ck,dl->ijkl", t.B, U, U, U, U)
    r0 = rhf(t, f, 4, conv=1e-12, comm_tol=1e-10)
    r1 = rhf(IntegralTensors(S, A, B, U.T @ t.T @ U, U.T @ t.V @ U), f, 4, conv=1e-12, comm_tol=1e-10)
    assert r1.E0 == pytest.approx(r0.E0, abs=1e-9)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_h_chain_reference(n):
    f = h_chain(n)
    t = build_tensors(basis_from_shells(shells("sto-3g"), f), f)
    res = rhf(t, f, n - n % 2, conv=1e-9)
    assert res.converged
    assert res.E0 == pytest.approx(reference()["h_chain_sto3g_spacing1"][f"H{n}"]["E_elec"], abs=1e-6)


def test_electron_count_errors(h2, h2_sto3g):
    t = build_tensors(h2_sto3g, h2)
    for n in (3, -2, 6):
        with pytest.raises(ValueError):
            rhf(t, h2, n)


def test_nonconvergence_reported(h2):
    f = h_chain(6)
    t = build_tensors(basis_from_shells(shells("sto-3g"), f), f)
    res = rhf(t, f, 6, max_iter=2)
    assert not res.converged and res.iterations == 2

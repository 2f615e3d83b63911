import math

import numpy as np
import pytest
from scipy.linalg import expm
from scipy.special import eval_genlaguerre

from ionrabi import (
    HilbertSpace,
    NonlinearCoupling,
    Operator,
    annihilation_op,
    barrier_eta,
    creation_op,
    displacement_matrix,
    f1_diagonal,
    f1_operator,
    f1_scalar,
    f1_series,
    identity_op,
    number_op,
    qubit_ops,
    rabi_rate,
)
from ionrabi.errors import NoSignChange, SpaceMismatch
from ionrabi.fock import displacement_boson, hermiticity_defect

# 25-digit reference values computed with mpmath (dps=40) from the closed
# form exp(-eta^2/2) L_n^(1)(eta^2) / (n+1)
F1_REFERENCE = {
    (17, 0.4518): -2.7856611486203820565e-5,
    (7, 0.67898): 9.0242010351297726872e-6,
    (10, 0.57838): 6.3071663522980382726e-6,
    (48, 0.5): -0.0014661618495014922543,
    (200, 1.0): 0.0067920805773359714214,
}


class TestHilbertSpace:
    def test_dimensions(self):
        sp = HilbertSpace(5)
        assert sp.dim_boson == 6
        assert sp.dim_total == 12

    def test_index_ordering(self):
        sp = HilbertSpace(5)
        assert sp.index(0, 3) == 3
        assert sp.index(1, 0) == 6
        assert sp.index(1, 5) == 11

    @pytest.mark.parametrize("bad", [0, -1, 2.5])
    def test_invalid_n_max(self, bad):
        with pytest.raises(ValueError):
            HilbertSpace(bad)

    def test_index_bounds(self):
        sp = HilbertSpace(5)
        with pytest.raises(ValueError):
            sp.index(0, 6)
        with pytest.raises(ValueError):
            sp.index(2, 0)


class TestLadderOperators:
    def test_matrix_elements(self, space):
        a = annihilation_op(space).mat
        assert a[space.index(0, 0), space.index(0, 1)] == pytest.approx(1.0)
        assert a[space.index(0, 1), space.index(0, 2)] == pytest.approx(math.sqrt(2))
        assert a[space.index(1, 1), space.index(1, 2)] == pytest.approx(math.sqrt(2))

    def test_vacuum_annihilation(self, space):
        a = annihilation_op(space).mat
        vac = np.zeros(space.dim_total)
        vac[space.index(0, 0)] = 1.0
        assert np.allclose(a @ vac, 0.0)

    def test_truncation_row_zero(self, space):
        a = annihilation_op(space).mat
        assert np.all(a[space.index(0, space.n_max), :] == 0)
        assert np.all(a[space.index(1, space.n_max), :] == 0)

    def test_commutator_below_edge(self, space):
        a = annihilation_op(space).mat
        ad = creation_op(space).mat
        comm = a @ ad - ad @ a
        keep = list(range(space.n_max)) + list(range(space.dim_boson, space.dim_total - 1))
        sub = comm[np.ix_(keep, keep)]
        assert np.allclose(sub, np.eye(len(keep)), atol=1e-12)

    def test_number_operator_is_ad_a(self, space):
        # a^dag a survives truncation exactly (only a a^dag loses the edge)
        nb = number_op(space).mat
        ad = creation_op(space).mat
        a = annihilation_op(space).mat
        assert np.allclose(nb, ad @ a, atol=1e-12)


class TestQubitOps:
    def test_raising(self, space):
        sz, sp_, sm, sx = qubit_ops(space)
        down3 = np.zeros(space.dim_total)
        down3[space.index(0, 3)] = 1.0
        up3 = np.zeros(space.dim_total)
        up3[space.index(1, 3)] = 1.0
        assert np.allclose(sp_.mat @ down3, up3)
        assert np.allclose(sm.mat @ up3, down3)

    def test_sigma_z_squared_is_identity(self, space):
        sz = qubit_ops(space)[0]
        assert np.allclose((sz.mat @ sz.mat), np.eye(space.dim_total))

    def test_sigma_x_is_sum(self, space):
        _, sp_, sm, sx = qubit_ops(space)
        assert np.allclose(sx.mat, sp_.mat + sm.mat)

    def test_sigma_z_eigenvalues(self, space):
        sz = qubit_ops(space)[0]
        up = np.zeros(space.dim_total)
        up[space.index(1, 2)] = 1.0
        assert np.allclose(sz.mat @ up, up)
        down = np.zeros(space.dim_total)
        down[space.index(0, 2)] = 1.0
        assert np.allclose(sz.mat @ down, -down)


class TestOperatorWrapper:
    def test_rejects_nonfinite(self, space):
        mat = np.zeros((space.dim_total, space.dim_total), dtype=complex)
        mat[0, 0] = np.nan
        with pytest.raises(ValueError, match="finite"):
            Operator(space, mat)

    def test_hermitian_flag_verified(self, space):
        mat = np.zeros((space.dim_total, space.dim_total), dtype=complex)
        mat[0, 1] = 1.0
        with pytest.raises(ValueError, match="hermiticity"):
            Operator(space, mat, hermitian=True)

    def test_space_mismatch_on_matmul(self):
        a = identity_op(HilbertSpace(4))
        b = identity_op(HilbertSpace(5))
        with pytest.raises(SpaceMismatch):
            a @ b


class TestF1:
    def test_vacuum_value(self):
        assert f1_scalar(0, 0.5) == pytest.approx(math.exp(-0.125), abs=1e-15)
        assert f1_series(0, 0.5) == pytest.approx(math.exp(-0.125), abs=1e-15)

    @pytest.mark.parametrize("n", [0, 1, 5, 50, 200])
    def test_zero_eta_is_one(self, n):
        assert f1_scalar(n, 0.0) == 1.0
        assert f1_series(n, 0.0) == 1.0

    @pytest.mark.parametrize("n,eta", [(17, 0.4518), (7, 0.67898), (10, 0.57838)])
    def test_blockade_values_small(self, n, eta):
        assert abs(f1_scalar(n, eta)) < 1e-3

    @pytest.mark.parametrize("key", sorted(F1_REFERENCE))
    def test_against_high_precision_reference(self, key):
        n, eta = key
        ref = F1_REFERENCE[key]
        assert f1_scalar(n, eta) == pytest.approx(ref, rel=5e-15)
        assert f1_series(n, eta) == pytest.approx(ref, rel=5e-15)

    def test_sign_changes_along_n_at_half(self):
        # f1(n, 0.5) crosses zero between 13/14 and between 48/49; n=14 and
        # n=48 are the near-zero integers
        vals = f1_diagonal(60, 0.5)
        assert vals[13] > 0 > vals[14]
        assert vals[48] < 0 < vals[49]
        assert abs(vals[14]) < abs(vals[13]) and abs(vals[14]) < abs(vals[15])
        assert abs(vals[48]) < abs(vals[47]) and abs(vals[48]) < abs(vals[49])

    @pytest.mark.parametrize("n", [1, 4, 100])
    def test_lamb_dicke_limit(self, n):
        eta = 0.01 / math.sqrt(n)
        assert abs(f1_scalar(n, eta) - 1.0) < 1e-3

    def test_series_matches_closed_form_subset(self):
        for eta in (0.1, 0.5, 1.0):
            for n in range(0, 61):
                a, b = f1_series(n, eta), f1_scalar(n, eta)
                scale = max(abs(a), abs(b))
                assert abs(a - b) <= max(1e-12 * scale, 1e-16)

    def test_matches_scipy_laguerre(self):
        for eta in (0.3, 0.7):
            for n in (0, 3, 20, 90):
                ref = math.exp(-eta**2 / 2) * eval_genlaguerre(n, 1, eta**2) / (n + 1)
                assert f1_scalar(n, eta) == pytest.approx(ref, rel=1e-10)

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            f1_scalar(3, -0.1)
        with pytest.raises(ValueError):
            f1_series(-1, 0.5)

    def test_diagonal_consistent_with_scalar(self):
        vals = f1_diagonal(40, 0.4518)
        for n in (0, 7, 17, 40):
            assert vals[n] == f1_scalar(n, 0.4518)

    def test_coupling_cache(self):
        nc = NonlinearCoupling(eta=0.5, n_max=20)
        assert nc(0) == f1_scalar(0, 0.5)
        assert nc(14) == f1_scalar(14, 0.5)
        with pytest.raises(ValueError):
            NonlinearCoupling(eta=-0.5, n_max=20)


class TestF1Operator:
    def test_zero_eta_identity(self, space):
        op = f1_operator(space, 0.0)
        assert np.allclose(op.mat, np.eye(space.dim_total))

    def test_paper_zero_at_n10(self):
        sp = HilbertSpace(20)
        op = f1_operator(sp, 0.57838)
        assert abs(op.mat[sp.index(0, 10), sp.index(0, 10)]) < 1e-3
        assert abs(op.mat[sp.index(1, 10), sp.index(1, 10)]) < 1e-3

    def test_bounded_by_one(self):
        for eta in (0.01, 0.1, 0.4518, 0.5, 0.57838, 0.67898, 1.0):
            assert np.all(np.abs(f1_diagonal(200, eta)) <= 1.0 + 1e-15)

    def test_commutes_with_number(self, space):
        f1 = f1_operator(space, 0.5).mat
        nb = number_op(space).mat
        assert np.all(f1 @ nb - nb @ f1 == 0.0)

    def test_hermitian(self, space):
        assert hermiticity_defect(f1_operator(space, 0.7).mat) == 0.0


class TestBarrierEta:
    @pytest.mark.parametrize("n,expected,tol", [
        (17, 0.4518, 5e-4),
        (7, 0.67898, 5e-5),
        (10, 0.57838, 5e-5),
    ])
    def test_paper_values(self, n, expected, tol):
        assert abs(barrier_eta(n) - expected) < tol

    @pytest.mark.parametrize("n", [7, 17])
    def test_root_quality_and_sign_flip(self, n):
        root = barrier_eta(n)
        assert abs(f1_scalar(n, root)) < 1e-12
        assert f1_scalar(n, root - 1e-6) * f1_scalar(n, root + 1e-6) < 0

    def test_no_sign_change_reported(self):
        # f1(1, eta) = exp(-eta^2/2)(2 - eta^2)/2 first vanishes at sqrt(2) > 1
        with pytest.raises(NoSignChange):
            barrier_eta(1)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            barrier_eta(0)
        with pytest.raises(ValueError):
            barrier_eta(5, (0.5, 0.1))


class TestRabiRate:
    def test_lamb_dicke_limit_red(self):
        eta, omega = 1e-4, 2.0
        rate = rabi_rate(1, "red", omega, eta)
        assert rate == pytest.approx(eta * omega, rel=1e-6)

    def test_blue_blockade(self):
        eta, omega = 0.4518, 1.0
        assert rabi_rate(17, "blue", omega, eta) < 1e-3 * eta * omega

    def test_red_against_series_oracle(self):
        eta, omega = 0.5, 1.0
        expected = eta * omega * math.sqrt(2) * abs(f1_series(1, eta))
        assert rabi_rate(2, "red", omega, eta) == pytest.approx(expected, rel=1e-14)

    def test_errors(self):
        with pytest.raises(ValueError):
            rabi_rate(0, "red", 1.0, 0.5)
        with pytest.raises(ValueError):
            rabi_rate(1, "sideways", 1.0, 0.5)


class TestDisplacement:
    def test_zero_is_identity(self, space):
        D = displacement_matrix(space, 0.0)
        assert np.array_equal(D.mat, np.eye(space.dim_total))

    @pytest.mark.parametrize("beta", [0.3j, 0.5 + 0.2j])
    def test_vacuum_overlap(self, beta):
        D = displacement_boson(20, beta)
        assert D[0, 0] == pytest.approx(math.exp(-abs(beta) ** 2 / 2), abs=1e-14)

    def test_against_matrix_exponential(self):
        n_max = 40
        a = np.diag(np.sqrt(np.arange(1.0, n_max + 1)), 1).astype(complex)
        beta = 0.3j
        brute = expm(beta * a.conj().T - np.conj(beta) * a)
        closed = displacement_boson(n_max, beta)
        assert np.abs(closed[:30, :30] - brute[:30, :30]).max() < 1e-8

    @pytest.mark.parametrize("beta,cols", [(0.3j, 44), (1.0, 20), (0.5 + 0.5j, 30)])
    def test_unitarity_where_truncation_adequate(self, beta, cols):
        # displaced Fock spread is |beta|*sqrt(2n+1); columns with ~8 sigma of
        # headroom below n_max satisfy the 1e-8 unitarity bound
        n_max = 60
        D = displacement_boson(n_max, beta)
        gram = D.conj().T @ D - np.eye(n_max + 1)
        assert np.abs(gram[:, :cols + 1]).max() < 1e-8

    def test_dagger_symmetry(self):
        beta = 0.4 + 0.2j
        D = displacement_boson(30, beta)
        assert np.abs(displacement_boson(30, -beta) - D.conj().T).max() < 1e-14

    def test_displaces_vacuum_to_coherent(self):
        from ionrabi import coherent_state, fock_state
        sp = HilbertSpace(40)
        beta = 0.8j
        D = displacement_matrix(sp, beta)
        psi = D.mat @ fock_state(sp, 0, "down").data
        target = coherent_state(sp, beta, "down").data
        assert np.abs(psi - target).max() < 1e-10

import math

import numpy as np
import pytest
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from hardylab.analytic import CrossSection, cone_spectrum, truncated_cone_mu
from hardylab.eig import BS_FRACTIONS, Preconditioner, bs_defects, bs_identity_check, resolvent_solve, smallest_pair
from hardylab.errors import ConvergenceError, SupercriticalShiftError
from hardylab.fem import AssembledSystem, assemble_system, rayleigh_quotient
from hardylab.geometry import generate_mesh


@pytest.fixture
def string_system() -> AssembledSystem:
    """Fixed string on (0, 1): P1 stiffness and lumped unit mass."""
    n = 99
    h = 1.0 / (n + 1)
    K = sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]) / h
    M = sp.identity(n) * h
    return AssembledSystem.from_matrices(K, M)


def exact_string_mu(n: int = 99) -> float:
    h = 1.0 / (n + 1)
    return 4.0 / h**2 * math.sin(math.pi * h / 2) ** 2


class TestSmallestPair:
    def test_string_eigenvalue(self, string_system, solver):
        result = smallest_pair(string_system, **solver.solve_kwargs())
        assert result.mu_h == pytest.approx(exact_string_mu(), rel=1e-9)
        assert result.mu_h == pytest.approx(math.pi**2, rel=1e-3)
        assert result.rel_residual <= 1e-10
        assert result.positivity_ok
        assert result.gap_ok
        assert result.mu_second == pytest.approx(4 * exact_string_mu(), rel=1e-2)

    def test_normalization(self, string_system):
        result = smallest_pair(string_system)
        u = result.u_h
        assert string_system.M_V.quad(u) == pytest.approx(1.0)
        assert u.sum() > 0.0
        assert u.min() > 0.0

    def test_jacobi_preconditioner(self, string_system):
        result = smallest_pair(string_system, preconditioner="jacobi")
        assert result.mu_h == pytest.approx(exact_string_mu(), rel=1e-9)

    def test_single_column_block(self, string_system):
        result = smallest_pair(string_system, block_size=1)
        assert result.mu_h == pytest.approx(exact_string_mu(), rel=1e-8)
        assert result.mu_second == math.inf

    def test_truncated_sector(self, quarter_domain, hardy, solver):
        exact = truncated_cone_mu(cone_spectrum(CrossSection.arc(math.pi / 2)), 0.1, 10.0).mu_trunc
        coarse = smallest_pair(assemble_system(generate_mesh(quarter_domain, 8, 4), hardy), **solver.solve_kwargs())
        fine = smallest_pair(assemble_system(generate_mesh(quarter_domain, 16, 8), hardy), **solver.solve_kwargs())
        assert coarse.mu_h == pytest.approx(exact, rel=0.1)
        assert fine.mu_h == pytest.approx(exact, rel=0.03)
        assert abs(fine.mu_h - exact) < abs(coarse.mu_h - exact)
        assert fine.positivity_ok

    def test_iteration_budget(self, small_mesh, hardy):
        with pytest.raises(ConvergenceError, match="did not converge"):
            smallest_pair(assemble_system(small_mesh, hardy), tol=1e-15, max_iter=1)

    def test_record(self, string_system):
        record = smallest_pair(string_system).as_record()
        assert set(record) == {"mu_h", "residual", "iterations", "positivity_ok", "mu_second", "gap_ok"}


def test_unknown_preconditioner():
    with pytest.raises(ValueError, match="unknown preconditioner"):
        Preconditioner(sp.identity(3, format="csr"), "multigrid")


class TestResolvent:
    def test_supercritical_shift(self, string_system):
        mu = exact_string_mu()
        with pytest.raises(SupercriticalShiftError, match="supercritical shift"):
            resolvent_solve(string_system, mu + 1.0, np.ones(string_system.n), mu_h=mu)

    def test_zero_rhs(self, string_system):
        z = resolvent_solve(string_system, 1.0, np.zeros(string_system.n), mu_h=exact_string_mu())
        assert not z.any()

    def test_solves_shifted_system(self, string_system):
        rhs = np.linspace(0.0, 1.0, string_system.n)
        z = resolvent_solve(string_system, 5.0, rhs, mu_h=exact_string_mu())
        A = string_system.K.matrix - 5.0 * string_system.M_V.matrix
        assert np.linalg.norm(A @ z - rhs) <= 1e-11 * np.linalg.norm(rhs)


class TestBsIdentity:
    def test_defects_on_the_string(self, string_system, solver):
        result = smallest_pair(string_system, **solver.solve_kwargs())
        lambdas = [f * result.mu_h for f in BS_FRACTIONS]
        defects = bs_defects(string_system, result, lambdas)
        assert list(defects) == lambdas
        assert max(defects.values()) <= 1e-8
        assert bs_identity_check(string_system, result, lambdas) == max(defects.values())

    def test_defects_on_a_mesh(self, bulged_mesh, hardy, solver):
        system = assemble_system(bulged_mesh, hardy)
        result = smallest_pair(system, **solver.solve_kwargs())
        defects = bs_defects(system, result, [f * result.mu_h for f in BS_FRACTIONS])
        assert max(defects.values()) <= 1e-8
        assert defects[0.99 * result.mu_h] <= 1e-8

    def test_negative_shift_rejected(self, string_system):
        result = smallest_pair(string_system)
        with pytest.raises(SupercriticalShiftError):
            bs_defects(string_system, result, [-1.0])


def lanczos_ritz_values(matrix, steps: int, seed: int = 3) -> np.ndarray:
    """Ritz values of a symmetric matrix after ``steps`` Lanczos steps with full reorthogonalization."""
    n = matrix.shape[0]
    Q = np.zeros((n, steps + 1))
    q = np.random.default_rng(seed).standard_normal(n)
    Q[:, 0] = q / np.linalg.norm(q)
    alpha, beta = np.zeros(steps), np.zeros(steps)
    for j in range(steps):
        w = matrix @ Q[:, j]
        alpha[j] = Q[:, j] @ w
        w -= Q[:, : j + 1] @ (Q[:, : j + 1].T @ w)
        beta[j] = np.linalg.norm(w)
        Q[:, j + 1] = w / beta[j]
    return la.eigh_tridiagonal(alpha, beta[:-1], eigvals_only=True)


class TestPencil:
    @pytest.fixture
    def system(self, bulged_mesh, hardy) -> AssembledSystem:
        return assemble_system(bulged_mesh, hardy)

    def test_pencil_is_symmetric_positive_definite(self, system):
        for matrix in (system.K.matrix, system.M_V.matrix):
            assert abs(matrix - matrix.T).max() <= 1e-14 * abs(matrix).max()
            ritz = lanczos_ritz_values(matrix, 20)
            assert ritz.min() > 0.0
            assert ritz.max() <= spla.norm(matrix, 1) * (1.0 + 1e-12)

    def test_rayleigh_quotient_is_minimal(self, system, solver):
        result = smallest_pair(system, **solver.solve_kwargs())
        rng = np.random.default_rng(11)
        for _ in range(100):
            v = rng.standard_normal(system.n)
            assert rayleigh_quotient(system, v) >= result.mu_h * (1.0 - 1e-12)
            assert rayleigh_quotient(system, result.u_h + 1e-3 * v) >= result.mu_h * (1.0 - 1e-12)
        assert rayleigh_quotient(system, result.u_h) == pytest.approx(result.mu_h, rel=1e-12)

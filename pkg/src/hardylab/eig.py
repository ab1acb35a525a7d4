"""Principal generalized eigenpair of (K, M_V) and resolvent solves."""

from __future__ import annotations

from dataclasses import dataclass
from logging import getLogger

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    ConvergenceError,
    DegenerateVectorError,
    PositivityError,
    SupercriticalShiftError,
)
from .fem import AssembledSystem

logger = getLogger(__name__)

POSITIVITY_UNDERSHOOT = 1e-10
RESOLVENT_RTOL = 1e-12
START_SEED = 20240117
BS_FRACTIONS = (0.0, 0.25, 0.5, 0.75, 0.99)


@dataclass(frozen=True, eq=False)
class EigResult:
    """Smallest eigenpair of K u = mu M_V u.

    ``u_h`` is M_V-normalized with positive entry sum.  ``mu_second`` is the
    second Ritz value of the final block and feeds the simplicity probe.
    """

    mu_h: float
    u_h: np.ndarray
    rel_residual: float
    iterations: int
    positivity_ok: bool
    mu_second: float = float("inf")
    gap_ok: bool = True

    def as_record(self) -> dict:
        return {
            "mu_h": self.mu_h,
            "residual": self.rel_residual,
            "iterations": self.iterations,
            "positivity_ok": self.positivity_ok,
            "mu_second": self.mu_second,
            "gap_ok": self.gap_ok,
        }


class Preconditioner:
    """Approximate inverse of a sparse SPD matrix for conjugate gradients."""

    def __init__(self, matrix: sp.csr_matrix, kind: str = "ilu", drop_tol: float = 1e-6, fill_factor: float = 10.0):
        self.kind = kind
        n = matrix.shape[0]
        if kind == "ilu":
            try:
                ilu = spla.spilu(matrix.tocsc(), drop_tol=drop_tol, fill_factor=fill_factor)
                self.operator = spla.LinearOperator((n, n), ilu.solve)
                return
            except RuntimeError as e:
                logger.warning(f"Incomplete factorization failed ({e}), using Jacobi")
                self.kind = "jacobi"
        elif kind != "jacobi":
            raise ValueError(f"unknown preconditioner: {kind}")
        diag = matrix.diagonal()
        if np.any(diag <= 0.0):
            raise ConvergenceError("matrix is not positive definite (non-positive diagonal)")
        self.operator = sp.diags(1.0 / diag)


def pcg_solve(matrix, rhs: np.ndarray, precond: Preconditioner, rtol: float, maxiter: int | None = None) -> np.ndarray:
    """Preconditioned CG with a sparse direct fallback on stagnation."""
    x, info = spla.cg(matrix, rhs, M=precond.operator, rtol=rtol, atol=0.0, maxiter=maxiter)
    if info < 0:
        raise ConvergenceError(f"conjugate gradients broke down (info={info})")
    if info > 0:
        logger.warning(f"PCG did not reach rtol={rtol:.1e} in {info} steps, using a direct solve")
        x = spla.spsolve(sp.csc_matrix(matrix), rhs)
    return np.asarray(x)


def _start_block(n: int, block_size: int) -> np.ndarray:
    rng = np.random.default_rng(START_SEED)
    block = np.empty((n, block_size))
    block[:, 0] = 1.0
    if block_size > 1:
        block[:, 1:] = rng.standard_normal((n, block_size - 1))
    return block


def _rayleigh_ritz(K: sp.csr_matrix, M: sp.csr_matrix, Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ritz values (ascending) and vectors of the pencil on span(Z).

    Solved as M_r y = nu K_r y, since K_r is definite while M_r may not be.
    """
    Q, _ = np.linalg.qr(Z)
    Kr = Q.T @ (K @ Q)
    Mr = Q.T @ (M @ Q)
    Kr, Mr = 0.5 * (Kr + Kr.T), 0.5 * (Mr + Mr.T)
    nu, Y = la.eigh(Mr, Kr)
    order = np.argsort(nu)[::-1]
    nu, Y = nu[order], Y[:, order]
    if nu[0] <= 0.0:
        raise DegenerateVectorError("M_V vanishes on the iteration subspace")
    with np.errstate(divide="ignore"):
        mu = np.where(nu > 0.0, 1.0 / nu, np.inf)
    return mu, Q @ Y


def _normalize(M: sp.csr_matrix, u: np.ndarray) -> np.ndarray:
    u = u / np.sqrt(float(u @ (M @ u)))
    return -u if u.sum() < 0.0 else u


def _positivity(u: np.ndarray) -> bool:
    return bool(u.min() >= -POSITIVITY_UNDERSHOOT * np.abs(u).max())


def smallest_pair(
    sys: AssembledSystem,
    tol: float = 1e-10,
    max_iter: int = 2000,
    block_size: int = 4,
    preconditioner: str = "ilu",
    linear_rtol: float = 1e-12,
    ilu_drop_tol: float = 1e-6,
    ilu_fill_factor: float = 10.0,
    strict_positivity: bool = True,
    gap_threshold: float = 1e-6,
) -> EigResult:
    """Smallest mu with K u = mu M_V u by block inverse iteration.

    Each step solves K Z = M_V U column by column with preconditioned CG and
    extracts Ritz pairs on span(Z).  The first start column is all ones.
    Converged once ||K u - mu M_V u|| / ||K u|| <= tol.
    """
    K, M = sys.K.matrix, sys.M_V.matrix
    n = sys.n
    if n == 0:
        raise DegenerateVectorError("system has no free degrees of freedom")
    block_size = max(1, min(block_size, n))
    precond = Preconditioner(K, preconditioner, ilu_drop_tol, ilu_fill_factor)

    U = _start_block(n, block_size)
    mu, rel = np.full(block_size, np.inf), np.inf
    for it in range(1, max_iter + 1):
        rhs = M @ U
        Z = np.column_stack([pcg_solve(K, rhs[:, k], precond, linear_rtol) for k in range(block_size)])
        mu, U = _rayleigh_ritz(K, M, Z)
        u = U[:, 0]
        Ku = K @ u
        rel = float(np.linalg.norm(Ku - mu[0] * (M @ u)) / np.linalg.norm(Ku))
        logger.debug(f"iteration {it}: mu={mu[0]:.15g} residual={rel:.3e}")
        if rel <= tol:
            break
    else:
        raise ConvergenceError(
            f"inverse iteration did not converge in {max_iter} steps (residual {rel:.3e})"
        )

    u = _normalize(M, U[:, 0])
    positivity_ok = _positivity(u)
    if not positivity_ok:
        msg = f"principal eigenvector changes sign (min {u.min():.3e}, max {u.max():.3e})"
        if strict_positivity:
            logger.error(msg)
            raise PositivityError(msg)
        logger.warning(msg)

    mu_second = float(mu[1]) if block_size > 1 else float("inf")
    gap_ok = bool(mu_second > mu[0] * (1.0 + gap_threshold))
    if not gap_ok:
        logger.warning(f"second Ritz value {mu_second:.12g} within gap threshold of mu_h={mu[0]:.12g}")

    logger.debug(f"Converged to mu_h={mu[0]:.12g} in {it} iterations")
    return EigResult(
        mu_h=float(mu[0]),
        u_h=u,
        rel_residual=rel,
        iterations=it,
        positivity_ok=positivity_ok,
        mu_second=mu_second,
        gap_ok=gap_ok,
    )


def resolvent_solve(sys: AssembledSystem, lam: float, rhs: np.ndarray, mu_h: float | None = None) -> np.ndarray:
    """Solve (K - lam M_V) z = rhs for a subcritical shift lam < mu_h."""
    if mu_h is None:
        mu_h = smallest_pair(sys, strict_positivity=False).mu_h
    if lam >= mu_h:
        raise SupercriticalShiftError(f"supercritical shift: lambda={lam:.12g} >= mu_h={mu_h:.12g}")
    A = (sys.K.matrix - lam * sys.M_V.matrix).tocsr()
    rhs = np.asarray(rhs, dtype=float)
    norm = np.linalg.norm(rhs)
    if norm == 0.0:
        return np.zeros_like(rhs)

    z = pcg_solve(A, rhs, Preconditioner(A, "ilu"), rtol=0.1 * RESOLVENT_RTOL)
    res = np.linalg.norm(rhs - A @ z) / norm
    if res > RESOLVENT_RTOL:
        logger.warning(f"resolvent residual {res:.3e} above target, refining with a direct solve")
        lu = spla.splu(A.tocsc())
        z = lu.solve(rhs)
        for _ in range(3):
            r = rhs - A @ z
            res = np.linalg.norm(r) / norm
            if res <= RESOLVENT_RTOL:
                break
            z = z + lu.solve(r)
    if res > RESOLVENT_RTOL:
        raise ConvergenceError(f"resolvent solve stalled at residual {res:.3e}")
    return z


def bs_identity_check(sys: AssembledSystem, eig: EigResult, lambdas) -> float:
    """Max over lambdas of ||(K - lam M)^-1 M u - u / (mu - lam)|| / ||u||."""
    return max(bs_defects(sys, eig, lambdas).values())


def bs_defects(sys: AssembledSystem, eig: EigResult, lambdas) -> dict[float, float]:
    u, mu = eig.u_h, eig.mu_h
    Mu = sys.M_V @ u
    norm = np.linalg.norm(u)
    defects = {}
    for lam in lambdas:
        if lam < 0.0:
            raise SupercriticalShiftError(f"shift must be nonnegative, got {lam}")
        z = resolvent_solve(sys, lam, Mu, mu_h=mu)
        defects[float(lam)] = float(np.linalg.norm(z - u / (mu - lam)) / norm)
    return defects

"""
Direct computation of (w2, w1, w0) for systems whose damping vanishes on
the rigid-body modes (ker K contained in ker D, e.g. D = beta K).

With ``V`` spanning ker K, the rigid parts are ``w2 = V a2`` and
``w1 = V a1`` and the flexible part solves the bordered system

    [ K      M V ] [w0]   [b0]
    [ V^T M   0  ] [a2] = [ 0]

while ``a1 = (V^T M V)^-1 V^T b1``.
"""

from __future__ import annotations

import warnings
from typing import Sequence

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import lapack

from .core import (KernelBasis, LowOrderModel, NumericalError, PreconditionError,
                   Route, SecondOrderSystem, check_consistency, norm, to_dense,
                   zero_cluster)

TOL_KERNEL = 1e-8
TOL_DAMPING_KERNEL = 1e-8


def _gram(V: np.ndarray, M) -> np.ndarray:
    g = V.T @ (M @ V)
    return 0.5 * (g + g.T)


def _m_orthonormalize(V: np.ndarray, M) -> np.ndarray:
    if V.shape[1] == 0:
        return V
    L = la.cholesky(_gram(V, M), lower=True)
    return la.solve_triangular(L, V.T, lower=True).T


def kernel_basis(K, M, tol_kernel: float = TOL_KERNEL,
                 supplied: np.ndarray | None = None) -> KernelBasis:
    """
    Basis of the rigid-body space ker(K).

    Parameters
    ----------
    K, M : (n, n) dense or sparse
        Stiffness (symmetric PSD) and mass (SPD).
    tol_kernel : float
        Vectors with ``|K v| <= tol_kernel * |K| * |M v| / |M|`` count as
        rigid; for the computed basis this is the relative eigenvalue
        threshold ``lam <= tol_kernel * max(lam)``, refined by the gap test
        of :func:`lowfreq.core.zero_cluster`.
    supplied : (n, k) ndarray, optional
        Analytically known basis. It is only validated, not recomputed,
        and is returned as given (not orthonormalized).

    Returns
    -------
    KernelBasis
        Computed bases are M-orthonormal, so their ``gram`` is identity.
    """
    n = K.shape[0]
    knorm = norm(K)
    if supplied is not None:
        V = np.asarray(supplied, dtype=float).reshape(n, -1)
        res = np.linalg.norm(to_dense(K @ V), axis=0)
        bound = tol_kernel * knorm * np.linalg.norm(V, axis=0)
        bad = np.flatnonzero(res > bound)
        if bad.size:
            detail = ", ".join(f"col {i}: |Kv|={res[i]:.3e} > {bound[i]:.3e}" for i in bad)
            raise PreconditionError(f"supplied kernel basis is not in ker K ({detail})")
        gram = _gram(V, M)
        try:
            la.cholesky(gram)
        except la.LinAlgError:
            raise PreconditionError("supplied kernel basis is rank deficient") from None
        V = V.copy()
        V.setflags(write=False)
        return KernelBasis(V, gram)

    if not sp.issparse(K):
        lam, phi = la.eigh(to_dense(K), to_dense(M))
        V = phi[:, zero_cluster(lam, tol_kernel)]
    else:
        V = _sparse_kernel(K, M, tol_kernel)
    V = _m_orthonormalize(V, M)
    V.setflags(write=False)
    return KernelBasis(V, _gram(V, M))


def _sparse_kernel(K, M, tol_kernel: float) -> np.ndarray:
    n = K.shape[0]
    lam_max = spla.eigsh(K, k=1, M=M, which="LM", return_eigenvectors=False,
                         tol=1e-3)[0]
    cut = tol_kernel * lam_max
    sigma = -1e-3 * cut - 1e-12 * lam_max
    k = 6
    while True:
        k = min(k, n - 2)
        lam, phi = spla.eigsh(K, k=k, M=M, sigma=sigma, which="LM")
        zero = zero_cluster(lam, tol_kernel, lam_max)
        if not zero.all() or k >= n - 2:
            return phi[:, zero]
        k *= 2


class SaddleSolver:
    """
    Factorization of the bordered matrix ``[[K, M V], [V^T M, 0]]``.

    The matrix is equilibrated first: rows/columns of the K block by
    ``1/sqrt(K_ii)`` and each border column to unit norm, which removes
    the scale spread between DOF kinds (displacements, slopes, twists).
    Dense matrices use the symmetric-indefinite LDL^T factorization
    (LAPACK ``sytrf``); sparse ones use SuperLU. Every solve applies one
    step of iterative refinement.
    """

    def __init__(self, sys: SecondOrderSystem, basis: KernelBasis):
        V = basis.V
        self.n, self.k = sys.n_dof, basis.k
        diag = np.asarray(sys.K.diagonal(), dtype=float)
        pos = diag[diag > 0]
        floor = pos.mean() if pos.size else 1.0
        self.s = 1.0 / np.sqrt(np.where(diag > 1e-12 * floor, diag, floor))
        SMV = self.s[:, None] * to_dense(sys.M @ V)
        cn = np.linalg.norm(SMV, axis=0) if self.k else np.zeros(0)
        cn[cn == 0] = 1.0
        self.c = 1.0 / cn
        C = SMV * self.c
        if sys.storage == "dense":
            Ks = self.s[:, None] * sys.K * self.s[None, :]
            A = np.block([[Ks, C], [C.T, np.zeros((self.k, self.k))]])
            self.A = A
            lu, ipiv, info = lapack.dsytrf(A, lower=1)
            if info > 0:
                raise NumericalError("bordered system is singular: "
                                     "rigid modes not fully captured by V")
            self._lu, self._ipiv = lu, ipiv
            anorm = np.abs(A).sum(axis=0).max()
            rcond, _ = lapack.dsycon(lu, ipiv, anorm, lower=1)
            self.rcond = float(rcond)
            if self.rcond < 10 * np.finfo(float).eps:
                raise NumericalError(
                    f"bordered system is singular (rcond={self.rcond:.1e}): "
                    "rigid modes not fully captured by V")
            self._solve = self._solve_dense
        else:
            S = sp.diags(self.s)
            Ks = S @ sys.K @ S
            Cs = sp.csr_matrix(C)
            A = sp.csc_matrix(sp.bmat([[Ks, Cs], [Cs.T, None]], format="csc"), dtype=float)
            self.A = A
            try:
                self._lu = spla.splu(A)
            except RuntimeError as exc:
                raise NumericalError(
                    f"bordered system is singular ({exc}): "
                    "rigid modes not fully captured by V") from None
            self.rcond = float("nan")
            self._solve = self._lu.solve

    def _solve_dense(self, rhs: np.ndarray) -> np.ndarray:
        x, info = lapack.dsytrs(self._lu, self._ipiv, rhs, lower=1)
        if info != 0:
            raise NumericalError(f"dsytrs failed with info={info}")
        return x

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve the equilibrated system for a right-hand side ``(n + k, p)``."""
        rhs = np.asarray(rhs, dtype=float)
        x = self._solve(rhs)
        x = x + self._solve(rhs - self.A @ x)
        if not np.all(np.isfinite(x)):
            raise NumericalError("bordered solve produced non-finite values")
        return x

    def solve_channels(self, b0: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(w0, a2)`` for every column of `b0`."""
        b0 = np.asarray(b0, dtype=float).reshape(self.n, -1)
        rhs = np.vstack([self.s[:, None] * b0, np.zeros((self.k, b0.shape[1]))])
        x = self.solve(rhs)
        y, z = x[: self.n], x[self.n:]
        w0 = self.s[:, None] * y
        a2 = self.c[:, None] * z
        rel = norm(self.A @ x - rhs) / max(norm(rhs), np.finfo(float).tiny)
        if rel > 1e-6:
            raise NumericalError(
                f"bordered solve residual {rel:.1e}: rigid modes not fully captured by V")
        return w0, a2


def check_damping_kernel(sys: SecondOrderSystem, basis: KernelBasis,
                         tol: float = TOL_DAMPING_KERNEL) -> float:
    """Raise PreconditionError unless the damping vanishes on ker K."""
    if basis.k == 0:
        return 0.0
    dv = norm(sys.D @ basis.V)
    bound = tol * norm(sys.D) * norm(basis.V)
    if dv > bound:
        raise PreconditionError(
            f"ker D ≠ ker K (|D V| = {dv:.3e} > {bound:.3e}); use the regression route")
    return dv


def _prepare(sys, V, solver):
    if V is None:
        V = kernel_basis(sys.K, sys.M)
    elif not isinstance(V, KernelBasis):
        V = kernel_basis(sys.K, sys.M, supplied=V)
    check_damping_kernel(sys, V)
    if solver is None:
        solver = SaddleSolver(sys, V)
    return V, solver


def solve_saddle(sys: SecondOrderSystem, V: KernelBasis | np.ndarray | None = None,
                 channel: int = 0, solver: SaddleSolver | None = None
                 ) -> tuple[np.ndarray, np.ndarray]:
    """
    Flexible response ``w0`` and rigid acceleration coordinates ``a2`` for
    one input channel.

    ``w0`` satisfies ``K w0 + M V a2 = b0`` and ``V^T M w0 = 0``.
    """
    V, solver = _prepare(sys, V, solver)
    b0, _ = sys.channel(channel)
    w0, a2 = solver.solve_channels(b0)
    return w0[:, 0], a2[:, 0]


def rigid_coeffs(sys: SecondOrderSystem, V: KernelBasis | np.ndarray | None = None,
                 channel: int = 0, solver: SaddleSolver | None = None
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Rigid-body terms ``(w2, w1)`` for one channel."""
    V, solver = _prepare(sys, V, solver)
    _, a2 = solve_saddle(sys, V, channel, solver)
    _, b1 = sys.channel(channel)
    a1 = la.solve(V.gram, V.V.T @ b1, assume_a="pos") if V.k else np.zeros(0)
    return V.V @ a2, V.V @ a1


def low_order_algebraic(sys: SecondOrderSystem, V: KernelBasis | np.ndarray | None = None,
                        channels: Sequence[int] | None = None,
                        tol: float = 1e-8) -> LowOrderModel:
    """
    Low-order model from the kernel-constrained solve, all channels at once.

    The factorization is computed once and shared by the channels. The
    attached residuals come from :func:`check_consistency`; a warning is
    issued when any exceeds `tol` relative to the backward-error scale.
    """
    V, solver = _prepare(sys, V, None)
    channels = list(range(sys.n_inputs)) if channels is None else list(channels)
    for j in channels:
        sys.channel(j)
    b0 = sys.b0[:, channels]
    b1 = sys.b1[:, channels]
    w0, a2 = solver.solve_channels(b0)
    if V.k:
        a1 = la.solve(V.gram, V.V.T @ b1, assume_a="pos")
        w2, w1 = V.V @ a2, V.V @ a1
    else:
        w2 = w1 = np.zeros_like(w0)
    lom = LowOrderModel(w2, w1, w0, Route.ALGEBRAIC, channels=tuple(channels))
    report = check_consistency(sys, lom, tol, kernel=V, channels=channels, relative=True)
    if not report.passed:
        warnings.warn(f"algebraic route residuals above {report.threshold:.3g}: "
                      f"{report.residuals}",
                      RuntimeWarning, stacklevel=2)
    return LowOrderModel(w2, w1, w0, Route.ALGEBRAIC, report.residuals, tuple(channels))

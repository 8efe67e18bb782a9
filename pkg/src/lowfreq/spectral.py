"""
Modal route: (w2, w1, w0) from the generalized eigenpairs of (K, M).

With ``K phi_n = lam_n M phi_n`` (M-orthonormal) and damping that is
diagonal in the same basis, ``phi_n^T D phi_n = mu_n``, the index sets

    I = {n : lam_n = 0},   J = {n : mu_n = 0}   (J must lie inside I)

give ``w2 = sum_J alpha_n phi_n``, ``w1 = sum_I beta_n phi_n`` and
``w0 = sum_{not J} gamma_n phi_n`` with coefficients built from the modal
loads ``phi_n^T b0`` and ``phi_n^T b1``.
"""

from __future__ import annotations

import warnings
from typing import Sequence

import numpy as np
import scipy.linalg as la
import scipy.sparse.linalg as spla

from .core import (SPARSE_THRESHOLD, KernelBasis, LowOrderModel, ModalDecomposition,
                   NumericalError, PreconditionError, Route, SecondOrderSystem,
                   check_consistency, norm, to_dense, zero_cluster)

TOL_ZERO = 1e-8
TOL_PROP = 1e-8
N_FLEX_SPARSE = 6


def _rediagonalize(lam: np.ndarray, Phi: np.ndarray, D, tol: float) -> np.ndarray:
    """
    Rotate eigenvectors inside each cluster of (numerically) equal
    eigenvalues so that ``Phi^T D Phi`` is diagonal on the cluster.

    Any basis of a repeated eigenspace is admissible for (K, M); only the
    one that also diagonalizes D exposes the damping rates.
    """
    Phi = Phi.copy()
    scale = max(np.abs(lam).max(initial=0.0), np.finfo(float).tiny)
    start = 0
    n = lam.size
    while start < n:
        stop = start + 1
        while stop < n and lam[stop] - lam[start] <= tol * scale:
            stop += 1
        if stop - start > 1:
            block = Phi[:, start:stop]
            Dc = block.T @ to_dense(D @ block)
            _, Q = la.eigh(0.5 * (Dc + Dc.T))
            Phi[:, start:stop] = block @ Q
        start = stop
    return Phi


def _index_sets(lam: np.ndarray, mu: np.ndarray, tol: float, lam_max: float,
                mu_max: float) -> tuple[np.ndarray, np.ndarray]:
    setI = np.flatnonzero(zero_cluster(lam, tol, lam_max))
    setJ = np.flatnonzero(zero_cluster(mu, tol, mu_max))
    return setI, setJ


def _sparse_low_modes(sys: SecondOrderSystem, tol_zero: float, n_flex: int):
    """Shift-invert Lanczos for the zero cluster plus `n_flex` flexible modes."""
    n = sys.n_dof
    K, M = sys.K, sys.M
    lam_max = float(spla.eigsh(K, k=1, M=M, which="LM", return_eigenvectors=False,
                               tol=1e-3)[0])
    sigma = -1e-3 * tol_zero * lam_max - 1e-12 * lam_max
    k = 6 + n_flex
    while True:
        k = min(k, n - 2)
        lam, Phi = spla.eigsh(K, k=k, M=M, sigma=sigma, which="LM")
        order = np.argsort(lam)
        lam, Phi = lam[order], Phi[:, order]
        if np.count_nonzero(~zero_cluster(lam, tol_zero, lam_max)) >= min(n_flex, 1) \
                or k >= n - 2:
            break
        k *= 2
    # Re-orthonormalize in the M inner product (Lanczos loses it slowly).
    G = Phi.T @ (M @ Phi)
    L = la.cholesky(0.5 * (G + G.T), lower=True)
    Phi = la.solve_triangular(L, Phi.T, lower=True).T
    Kc = Phi.T @ (K @ Phi)
    lam, Q = la.eigh(0.5 * (Kc + Kc.T))
    return lam, Phi @ Q, lam_max


def modal_decompose(sys: SecondOrderSystem, tol_zero: float = TOL_ZERO,
                    tol_prop: float = TOL_PROP, n_flex: int = N_FLEX_SPARSE
                    ) -> ModalDecomposition:
    """
    Generalized eigen-decomposition of (K, M) and modal damping rates.

    Parameters
    ----------
    sys : SecondOrderSystem
    tol_zero : float
        ``n`` is in I when ``lam_n <= tol_zero * max(lam)`` and in J when
        ``mu_n <= tol_zero * max(mu)``, each refined by the gap test of
        :func:`lowfreq.core.zero_cluster`.
    tol_prop : float
        The decomposition is flagged non-proportional when the off-diagonal
        part of ``Phi^T D Phi`` exceeds ``tol_prop * |D|`` (Frobenius).
    n_flex : int
        Number of flexible modes computed beyond the zero cluster for
        systems above the sparse threshold; the remaining spectrum enters
        only through a static correction (see :func:`low_order_spectral`).

    Returns
    -------
    ModalDecomposition
        Indices in `setI`, `setJ` are 0-based.
    """
    n = sys.n_dof
    if sys.storage == "dense" or n <= SPARSE_THRESHOLD:
        K, M = to_dense(sys.K), to_dense(sys.M)
        try:
            lam, Phi = la.eigh(K, M)
        except la.LinAlgError as exc:
            raise NumericalError(f"generalized eigensolve failed: {exc}") from None
        lam_max = max(np.abs(lam).max(initial=0.0), 0.0)
        complete = True
    else:
        lam, Phi, lam_max = _sparse_low_modes(sys, tol_zero, n_flex)
        complete = False
    Phi = _rediagonalize(lam, Phi, sys.D, tol_zero)
    Dm = Phi.T @ to_dense(sys.D @ Phi)
    Dm = 0.5 * (Dm + Dm.T)
    mu = np.diag(Dm).copy()
    defect = float(np.linalg.norm(Dm - np.diag(mu)))
    dnorm = norm(sys.D)
    proportional = defect <= tol_prop * dnorm
    if not proportional:
        warnings.warn(f"non-proportional damping (defect {defect:.3e} > "
                      f"{tol_prop * dnorm:.3e})", RuntimeWarning, stacklevel=2)
    mu_max = max(np.abs(mu).max(initial=0.0), 0.0)
    if not complete and dnorm > 0:
        # The largest damping rate is not among the computed modes; D's
        # Rayleigh quotients are bounded by its largest eigenvalue.
        mu_max = float(spla.eigsh(sys.D, k=1, M=sys.M, which="LM",
                                  return_eigenvectors=False, tol=1e-3)[0])
    setI, setJ = _index_sets(lam, mu, tol_zero, lam_max, mu_max)
    for a in (lam, mu, Phi, setI, setJ):
        a.setflags(write=False)
    return ModalDecomposition(lam, mu, Phi, setI, setJ, defect, bool(proportional),
                              complete)


def _check_applicable(modal: ModalDecomposition) -> None:
    if not np.isin(modal.setJ, modal.setI).all():
        raise PreconditionError("ker D ⊄ ker K, modal formulas inapplicable; use regression route")
    if not modal.proportional:
        raise PreconditionError(
            f"damping is not diagonal in the modal basis (defect "
            f"{modal.proportional_defect:.3e}); use regression route")


def _coefficients(modal: ModalDecomposition, p0: np.ndarray, p1: np.ndarray):
    """Modal coefficient arrays (alpha, beta, gamma), zero outside their sets."""
    lam, mu = modal.lambdas, modal.mus
    I, J = modal.setI, modal.setJ
    IJ = np.setdiff1d(I, J)
    notI = np.setdiff1d(np.arange(lam.size), I)
    alpha = np.zeros_like(p0)
    beta = np.zeros_like(p0)
    gamma = np.zeros_like(p0)
    alpha[J] = p0[J]
    beta[J] = p1[J]
    beta[IJ] = p0[IJ] / mu[IJ, None]
    gamma[notI] = p0[notI] / lam[notI, None]
    gamma[IJ] = p1[IJ] / mu[IJ, None] - p0[IJ] / mu[IJ, None] ** 2
    return alpha, beta, gamma


def _static_correction(sys: SecondOrderSystem, modal: ModalDecomposition,
                       b0: np.ndarray) -> np.ndarray:
    """
    Exact contribution ``sum phi_n phi_n^T b0 / lam_n`` of all modes not
    computed: the solution of ``K x = b0 - M Phi Phi^T b0`` that is
    M-orthogonal to the computed modes.
    """
    from .algebraic import SaddleSolver
    Phi = np.asarray(modal.Phi)
    basis = KernelBasis(Phi, np.eye(Phi.shape[1]))
    r = b0 - to_dense(sys.M @ Phi) @ (Phi.T @ b0)
    x, _ = SaddleSolver(sys, basis).solve_channels(r)
    return x


def low_order_spectral(modal: ModalDecomposition, sys: SecondOrderSystem,
                       channel: int = 0) -> LowOrderModel:
    """
    Low-order model of one input channel from the modal sums.

    The inner product ``<phi, M^-1 b>_M`` reduces to ``phi^T b``, so no
    mass solve is needed. For incomplete decompositions the flexible modes
    that were not computed are added through the static correction, which
    equals their full modal sum (their coefficients depend on ``lam`` only).
    """
    _check_applicable(modal)
    b0, b1 = sys.channel(channel)
    Phi = np.asarray(modal.Phi)
    p0 = Phi.T @ b0[:, None]
    p1 = Phi.T @ b1[:, None]
    alpha, beta, gamma = _coefficients(modal, p0, p1)
    w2 = Phi @ alpha
    w1 = Phi @ beta
    w0 = Phi @ gamma
    if not modal.complete:
        w0 = w0 + _static_correction(sys, modal, b0[:, None])
    lom = LowOrderModel(w2, w1, w0, Route.SPECTRAL, channels=(channel,))
    kernel = Phi[:, modal.setJ]
    report = check_consistency(sys, lom, kernel=kernel, channels=[channel])
    return LowOrderModel(w2, w1, w0, Route.SPECTRAL, report.residuals, (channel,))


def low_order_spectral_all(sys: SecondOrderSystem, channels: Sequence[int] | None = None,
                           modal: ModalDecomposition | None = None,
                           tol_zero: float = TOL_ZERO) -> LowOrderModel:
    """Spectral low-order model for several channels sharing one decomposition."""
    modal = modal_decompose(sys, tol_zero) if modal is None else modal
    channels = list(range(sys.n_inputs)) if channels is None else list(channels)
    cols = [low_order_spectral(modal, sys, j) for j in channels]
    w2 = np.hstack([c.w2 for c in cols])
    w1 = np.hstack([c.w1 for c in cols])
    w0 = np.hstack([c.w0 for c in cols])
    lom = LowOrderModel(w2, w1, w0, Route.SPECTRAL, channels=tuple(channels))
    kernel = np.asarray(modal.Phi)[:, modal.setJ]
    report = check_consistency(sys, lom, kernel=kernel, channels=channels)
    return LowOrderModel(w2, w1, w0, Route.SPECTRAL, report.residuals, tuple(channels))

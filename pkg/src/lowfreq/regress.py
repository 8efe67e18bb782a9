"""
Least-squares recovery of (w2, w1, w0) from late-time snapshots of a step
response, fitting each DOF against the basis {t**2/2, t, 1}.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import InvalidInputError, LowOrderModel, Route, StepResponse

COND_WARN = 1e12
REFINE_STEPS = 2
_SPLITTER = 134217729.0  # 2**27 + 1


def _two_sum(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``a + b = s + e`` exactly (Knuth)."""
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _split(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


def _two_prod(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``a * b = p + e`` exactly (Dekker), barring over/underflow."""
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def trend_residual(t: np.ndarray, Y: np.ndarray, w2: np.ndarray, w1: np.ndarray,
                   w0: np.ndarray) -> np.ndarray:
    """
    ``Y - (t**2/2 w2 + t w1 + w0)`` evaluated as if in twice the working
    precision, using error-free sums and products.

    `t` has shape (n_t,), `Y` (n_t, n_dof) and the coefficients (n_dof,).
    The cancellation between the data and the trend is what limits a
    plain evaluation; here the result is accurate to about ``eps**2``
    times the largest term.
    """
    t = t[:, None]
    tt, tt_err = _two_prod(t, t)
    tt, tt_err = 0.5 * tt, 0.5 * tt_err
    p2, e2 = _two_prod(tt, w2[None, :])
    p1, e1 = _two_prod(t, w1[None, :])
    s, err = _two_sum(Y, -p2)
    s, e = _two_sum(s, -p1)
    err = err + e
    s, e = _two_sum(s, -w0[None, :] + 0.0 * t)
    err = err + e
    return s + (err - e2 - e1 - tt_err * w2[None, :])


@dataclass(frozen=True, eq=False)
class FitReport:
    w2_hat: np.ndarray
    w1_hat: np.ndarray
    w0_hat: np.ndarray
    residual_rms_dof: np.ndarray
    residual_rms: float
    condition_estimate: float
    times: np.ndarray

    def to_lom(self, channel: int | None = None) -> LowOrderModel:
        return LowOrderModel(self.w2_hat, self.w1_hat, self.w0_hat, Route.REGRESSION,
                             {"residual_rms": self.residual_rms},
                             None if channel is None else (channel,))


def select_window(times: np.ndarray, window=None) -> np.ndarray:
    """
    Indices of the samples to fit.

    `window` may be None (the last 11 samples, i.e. one time unit at the
    default 0.1 s spacing), a ``slice``, an index array, or a
    ``(t_start, t_stop)`` pair of floats selecting an inclusive time range.
    """
    idx = np.arange(times.size)
    if window is None:
        return idx[-11:]
    if isinstance(window, slice):
        return idx[window]
    if isinstance(window, tuple) and len(window) == 2 and all(
            isinstance(w, float) for w in window):
        lo, hi = window
        eps = 1e-9 * max(1.0, abs(hi))
        return idx[(times >= lo - eps) & (times <= hi + eps)]
    return idx[np.asarray(window, dtype=int)]


def fit_trend(resp: StepResponse, window=None, refine: int = REFINE_STEPS) -> FitReport:
    """
    Fit ``w(t) ~ t**2/2 w2 + t w1 + w0`` over a window of snapshots.

    Times are centred and scaled before the QR factorization of the
    3-column design matrix; coefficients are mapped back to the raw time
    variable afterwards. The result equals the normal-equation estimate
    but stays well conditioned for windows far from t = 0.

    Mapping back to raw time cancels terms when the window is narrow
    compared with its distance from t = 0. `refine` steps of iterative
    refinement, with the residual from :func:`trend_residual`, recover the
    lost digits: data that are exactly a quadratic trend then give the
    coefficients to working precision.
    """
    sel = select_window(resp.times, window)
    t = resp.times[sel]
    if np.unique(t).size < 3:
        raise InvalidInputError(
            f"underdetermined fit: {np.unique(t).size} distinct times, need >= 3")
    Y = resp.snapshots[:, sel].T  # (n_t, n_dof)
    tc = t.mean()
    ts = max(np.abs(t - tc).max(), np.finfo(float).tiny)
    tau = (t - tc) / ts
    A = np.column_stack([0.5 * tau**2, tau, np.ones_like(tau)])
    Q, R = np.linalg.qr(A)
    cond = float(np.linalg.cond(R)) ** 2
    if cond > COND_WARN:
        warnings.warn(f"ill-conditioned window (Gram condition {cond:.2e})",
                      RuntimeWarning, stacklevel=2)

    def solve(rhs):
        c = np.linalg.solve(R, Q.T @ rhs)  # rows: coefficients in tau
        a2, a1, a0 = c[0] / ts**2, c[1] / ts, c[2]
        # w(t) = a2/2 (t - tc)^2 + a1 (t - tc) + a0
        return a2, a1 - a2 * tc, a0 - a1 * tc + 0.5 * a2 * tc**2

    w2, w1, w0 = solve(Y)
    for _ in range(refine):
        d2, d1, d0 = solve(trend_residual(t, Y, w2, w1, w0))
        w2, w1, w0 = w2 + d2, w1 + d1, w0 + d0
    resid = trend_residual(t, Y, w2, w1, w0)
    rms_dof = np.sqrt(np.mean(resid**2, axis=0))
    rms = float(np.sqrt(np.mean(resid**2)))
    return FitReport(w2, w1, w0, rms_dof, rms, cond, t)


def normal_equation_fit(times: np.ndarray, snapshots: np.ndarray) -> np.ndarray:
    """Direct ``(sum a a^T)^-1 sum a w(t_i)`` estimate; rows are w2, w1, w0."""
    t = np.asarray(times, dtype=float)
    A = np.column_stack([0.5 * t**2, t, np.ones_like(t)])
    return np.linalg.solve(A.T @ A, A.T @ np.asarray(snapshots, dtype=float).T)

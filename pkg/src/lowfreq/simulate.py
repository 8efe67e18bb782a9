"""
Step responses by Crank-Nicolson (trapezoidal) integration.

The first-order descriptor form

    [M 0] d [w]   [ 0   M] [w]   [   0   ]
    [0 M] --[v] = [-K  -D] [v] + [b0 u0 ]
          dt

is stepped with the trapezoidal rule. Eliminating the displacement update
``w+ = w + dt/2 (v + v+)`` leaves one SPD solve per step with

    S = M + dt/2 D + dt**2/4 K,

which is factorized once. The result is algebraically identical to
applying the trapezoidal rule to the full 2n-dimensional system.

Under a step load the rigid-body part of ``w`` grows like ``t**2`` and
soon dwarfs the flexible part. Forming ``K w`` then cancels large terms
and the rounding error is integrated twice, giving a spurious drift. When
a rigid basis ``V`` is supplied the integrator applies K (and D, when it
also vanishes on V) to ``w - P w`` only, where ``P = V (V^T M V)^-1 V^T M``
is the M-orthogonal projector onto ker K. In exact arithmetic this changes
nothing, since ``K P = 0``.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import (InvalidInputError, KernelBasis, NumericalError, SecondOrderSystem,
                   StepResponse, norm, rigid_kernel, to_dense)

DEFAULT_SAMPLES = np.round(np.arange(3.0, 4.0 + 1e-9, 0.1), 12)


class CrankNicolson:
    """
    Fixed-step trapezoidal integrator for ``M w'' + D w' + K w = f``.

    Parameters
    ----------
    sys : SecondOrderSystem
    dt : float
        Time step (s).
    rigid_basis : (n, k) ndarray, optional
        Basis of ker K used to deflate the stiffness (and damping) products.
    """

    def __init__(self, sys: SecondOrderSystem, dt: float, rigid_basis=None):
        if not dt > 0:
            raise InvalidInputError("time step must be positive")
        self.dt = float(dt)
        self.M, self.D, self.K = sys.M, sys.D, sys.K
        S = sys.M + (0.5 * dt) * sys.D + (0.25 * dt * dt) * sys.K
        if sp.issparse(S):
            try:
                lu = spla.splu(sp.csc_matrix(S))
            except RuntimeError as exc:
                raise NumericalError(f"step matrix is singular: {exc}") from None
            self._solve = lu.solve
        else:
            try:
                cf = la.cho_factor(S)
            except la.LinAlgError as exc:
                raise NumericalError(f"step matrix is not SPD: {exc}") from None
            self._solve = lambda rhs: la.cho_solve(cf, rhs)
        try:
            if sp.issparse(sys.M):
                mlu = spla.splu(sp.csc_matrix(sys.M))
                self.solve_mass = mlu.solve
            else:
                mcf = la.cho_factor(sys.M)
                self.solve_mass = lambda rhs: la.cho_solve(mcf, rhs)
        except (la.LinAlgError, RuntimeError) as exc:
            raise NumericalError(f"mass matrix is singular: {exc}") from None
        self._V = None
        self._deflate_d = False
        if rigid_basis is not None:
            V = np.asarray(rigid_basis, dtype=float).reshape(sys.n_dof, -1)
            if V.shape[1]:
                self._V = V
                self._MV = np.asarray(to_dense(sys.M @ V))
                self._gram = la.cho_factor(V.T @ self._MV)
                dnorm = norm(sys.D)
                self._deflate_d = dnorm == 0 or \
                    norm(sys.D @ V) <= 1e-8 * dnorm * np.linalg.norm(V)

    def flexible(self, x: np.ndarray) -> np.ndarray:
        """``x - P x``: remove the M-orthogonal rigid component."""
        if self._V is None:
            return x
        return x - self._V @ la.cho_solve(self._gram, self._MV.T @ x)

    def step(self, w: np.ndarray, v: np.ndarray, f: np.ndarray):
        """Advance one step under the constant force `f`; returns ``(w+, v+)``."""
        dt = self.dt
        wf, vf = self.flexible(w), self.flexible(v)
        dv = self.D @ (vf if self._deflate_d else v)
        rhs = self.M @ v - (0.5 * dt) * dv - (0.25 * dt * dt) * (self.K @ vf) \
            - dt * (self.K @ wf) + dt * f
        v_new = self._solve(rhs)
        w_new = w + (0.5 * dt) * (v + v_new)
        return w_new, v_new

    def run(self, w: np.ndarray, v: np.ndarray, f: np.ndarray, n_steps: int,
            record: np.ndarray | None = None):
        """
        Take `n_steps` steps; when `record` (sorted step indices) is given,
        return the displacements at those steps as columns.
        """
        out = []
        rec = iter(record) if record is not None else iter(())
        nxt = next(rec, None)
        while nxt == 0:
            out.append(w.copy())
            nxt = next(rec, None)
        for k in range(1, n_steps + 1):
            w, v = self.step(w, v, f)
            while nxt == k:
                out.append(w.copy())
                nxt = next(rec, None)
        snaps = np.column_stack(out) if out else np.zeros((w.size, 0))
        return w, v, snaps


def _grid_steps(sample_times, t_end: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    times = np.asarray(sample_times, dtype=float).ravel()
    if times.size == 0:
        raise InvalidInputError("no sample times")
    if np.any(times < 0) or np.any(times > t_end + 0.5 * dt):
        raise InvalidInputError(f"sample times must lie in [0, {t_end}]")
    steps = np.rint(times / dt).astype(np.int64)
    off = np.abs(steps * dt - times)
    if np.any(off > 1e-9 * max(1.0, t_end)):
        warnings.warn(f"sample times snapped to the dt={dt:g} grid "
                      f"(max shift {off.max():.3g} s)", RuntimeWarning, stacklevel=3)
    steps = np.unique(steps)
    return steps, steps * dt


def step_response(sys: SecondOrderSystem, u0=1.0, t_end: float = 4.0, dt: float = 1e-3,
                  sample_times=None, w_init=None, v_init=None,
                  rigid_basis="auto") -> StepResponse:
    """
    Response to the step input ``u(t) = u0`` for ``t > 0`` from rest.

    The rate term ``b1 u'`` produces a velocity jump, so integration starts
    from ``w(0) = 0`` and ``v(0+) = M^-1 b1 u0``.

    Parameters
    ----------
    u0 : float or (m,) array_like
        Step amplitude per input channel.
    t_end, dt : float
        Final time and fixed step (s).
    sample_times : array_like, optional
        Snapshot times; snapped to the nearest grid point with a warning
        when not on it. Defaults to 3.0, 3.1, ..., 4.0.
    w_init, v_init : (n,) array_like, optional
        Additional initial displacement/velocity superposed on the rest
        state (free-response studies).
    rigid_basis : (n, k) array_like, KernelBasis, "auto" or None
        Basis of ker K for the round-off deflation described in the module
        docstring. ``"auto"`` computes it (dense eigensolve, or shift-invert
        Lanczos for sparse storage); ``None`` disables deflation.
    """
    u0 = np.atleast_1d(np.asarray(u0, dtype=float))
    if u0.size == 1 and sys.n_inputs > 1:
        u0 = np.full(sys.n_inputs, u0[0])
    if u0.size != sys.n_inputs:
        raise InvalidInputError(f"u0 has {u0.size} entries for {sys.n_inputs} inputs")
    if not t_end > 0:
        raise InvalidInputError("t_end must be positive")
    if sample_times is None:
        sample_times = DEFAULT_SAMPLES[DEFAULT_SAMPLES <= t_end + 1e-12]
        if sample_times.size == 0:
            sample_times = np.array([t_end])
    n_steps = int(round(t_end / dt))
    if abs(n_steps * dt - t_end) > 1e-9 * max(1.0, t_end):
        warnings.warn(f"t_end={t_end:g} is not a multiple of dt={dt:g}; "
                      f"integrating to {n_steps * dt:g}", RuntimeWarning, stacklevel=2)
    steps, times = _grid_steps(sample_times, n_steps * dt, dt)

    if isinstance(rigid_basis, str):
        if rigid_basis != "auto":
            raise InvalidInputError(f"unknown rigid_basis option {rigid_basis!r}")
        from .algebraic import kernel_basis
        rigid_basis = kernel_basis(sys.K, sys.M).V
    elif isinstance(rigid_basis, KernelBasis):
        rigid_basis = rigid_basis.V
    cn = CrankNicolson(sys, dt, rigid_basis)
    f = sys.b0 @ u0
    v0 = cn.solve_mass(sys.b1 @ u0)
    w = np.zeros(sys.n_dof) if w_init is None else np.array(w_init, dtype=float)
    v = v0.copy() if v_init is None else v0 + np.asarray(v_init, dtype=float)
    _, _, snaps = cn.run(w, v, f, n_steps, record=steps)
    return StepResponse(times, snaps, v0, u0, dt)


def _flexible_roots(sys: SecondOrderSystem, tol: float, channel: int | None):
    from .algebraic import kernel_basis
    M, D, K = (to_dense(a) for a in (sys.M, sys.D, sys.K))
    n = sys.n_dof
    k = kernel_basis(K, M, tol).k
    kd = rigid_kernel(sys, tol).shape[1]
    A = np.block([[np.zeros((n, n)), np.eye(n)], [-K, -D]])
    B = np.block([[np.eye(n), np.zeros((n, n))], [np.zeros((n, n)), M]])
    if channel is None:
        s = la.eigvals(A, B)
        amp = np.full(s.shape, np.nan)
    else:
        s, yl, xr = la.eig(A, B, left=True, right=True)
        f = np.concatenate([np.zeros(n), sys.channel(channel)[0]])
        num = np.abs(yl.conj().T @ f) * np.linalg.norm(xr[:n], axis=0)
        den = np.abs(np.einsum("ik,ij,jk->k", yl.conj(), B, xr))
        with np.errstate(divide="ignore", invalid="ignore"):
            amp = num / (den * np.abs(s))
    keep = np.isfinite(s)
    s, amp = s[keep], amp[keep]
    order = np.argsort(np.abs(s))[k + kd:]
    return s[order], amp[order]


def decay_rates(sys: SecondOrderSystem, tol: float = 1e-8) -> np.ndarray:
    """
    Decay rates ``-Re(s)`` of the nonzero roots of ``det(s^2 M + s D + K)``,
    sorted ascending (dense eigensolve of the 2n companion pencil).

    The pencil has ``dim ker K + dim(ker K n ker D)`` roots at zero: one per
    rigid mode plus a second one for each undamped rigid mode. Rounding
    splits these into tiny nonzero values (the double roots form Jordan
    blocks), so exactly that many roots of smallest modulus are dropped.
    """
    s, _ = _flexible_roots(sys, tol, None)
    return np.sort(-s.real)


def slowest_decay_rate(sys: SecondOrderSystem, tol: float = 1e-8, channel: int = 0,
                       min_amplitude: float = 1e-6) -> float:
    """
    Smallest decay rate among the modes a step on `channel` excites.

    A mode counts when its step-response amplitude ``|residue / s|`` exceeds
    `min_amplitude` times the largest one. This skips, for instance,
    high-frequency element modes that hardly move the loaded DOF and are
    therefore hardly damped by a dashpot placed there.
    """
    s, amp = _flexible_roots(sys, tol, channel)
    if s.size == 0:
        raise NumericalError("system has no flexible modes")
    amp = np.nan_to_num(amp, nan=0.0, posinf=0.0)
    excited = amp > min_amplitude * amp.max(initial=0.0)
    rates = -s[excited].real
    positive = rates[rates > 0]
    if positive.size == 0:
        raise NumericalError("no damped mode is excited by the input")
    return float(positive.min())

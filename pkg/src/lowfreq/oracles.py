"""
Independent reference values: closed forms for the string and beam, and
transfer-function evaluation for a frequency-domain cross-check.

The low-order coefficients are the leading terms of

    G(s) = G2 / s**2 + G1 / s + G0 + O(s)

so they can also be read off ``s**2 G(s)`` near ``s = 0``; see
:func:`extrapolate_low_order`.
"""

from __future__ import annotations

import warnings
from typing import Sequence

import mpmath
import numpy as np
import scipy.integrate as integrate
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import reverse_cuthill_mckee

from .core import InvalidInputError, NumericalError, SecondOrderSystem
from .models import BeamConfig, StringConfig, coefficient

EXTRAPOLATION_POINTS = (1e-2, 1e-3, 1e-4)


# ----------------------------------------------------------------------
# string
# ----------------------------------------------------------------------


class _StringIntegrals:
    """
    ``m = int rho``, ``R(x) = int_0^x rho`` and ``F(x) = int_0^x R / T``
    evaluated either by adaptive quadrature or by composite Gauss-Legendre.
    """

    def __init__(self, cfg: StringConfig, method: str = "quad", n_gauss: int = 40):
        if method not in ("quad", "gauss"):
            raise InvalidInputError(f"unknown quadrature method {method!r}")
        self.L = float(cfg.L)
        self.rho = coefficient(cfg.rho)
        self.T = coefficient(cfg.T)
        xs = np.linspace(0.0, self.L, 201)
        if np.any(self.rho(xs) <= 0) or np.any(self.T(xs) <= 0):
            raise InvalidInputError("string coefficients must be positive")
        self.method = method
        self.nodes, self.weights = np.polynomial.legendre.leggauss(n_gauss)

    def integral(self, f, a: float, b: float) -> float:
        if b == a:
            return 0.0
        if self.method == "quad":
            val, _ = integrate.quad(lambda t: float(f(np.array([t]))[0]), a, b,
                                    epsabs=1e-14, epsrel=1e-13, limit=200)
            return val
        # four panels of n-point Gauss-Legendre
        edges = np.linspace(a, b, 5)
        total = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            t = 0.5 * (hi - lo) * self.nodes + 0.5 * (hi + lo)
            total += 0.5 * (hi - lo) * float(np.dot(self.weights, f(t)))
        return total

    def R(self, x: np.ndarray) -> np.ndarray:
        return np.array([self.integral(self.rho, 0.0, xi) for xi in np.ravel(x)])

    def F(self, x: np.ndarray) -> np.ndarray:
        g = lambda t: self.R(t) / self.T(t)
        return np.array([self.integral(g, 0.0, xi) for xi in np.ravel(x)])

    def mass(self) -> float:
        return self.integral(self.rho, 0.0, self.L)

    def weighted_F(self) -> float:
        """``int_0^L rho F`` via integration by parts: ``m F(L) - int R**2 / T``."""
        m = self.mass()
        return m * float(self.F(np.array([self.L]))[0]) - self.integral(
            lambda t: self.R(t) ** 2 / self.T(t), 0.0, self.L)


def string_analytic(x, cfg: StringConfig | None = None, u0: float = 1.0,
                    method: str = "quad") -> tuple[float, float, np.ndarray]:
    """
    Low-order coefficients of the damped string driven at ``x = L``.

    With ``m = int_0^L rho`` and ``F(x) = int_0^x (int_0^xi rho) / T dxi``,

        w2 = u0 / m,  w1 = d(L) u0 / (m T(L)),
        w0(x) = (F(x) - (1/m) int_0^L rho F) u0 / m.

    Constant coefficients use the closed form
    ``w0 = (3 x**2 - L**2) u0 / (6 L T)``.

    Parameters
    ----------
    x : array_like
        Evaluation points in [0, L].
    method : {"quad", "gauss"}
        Adaptive quadrature, or composite Gauss-Legendre (an independent
        rule used to cross-check the first).
    """
    cfg = cfg if cfg is not None else StringConfig()
    x = np.asarray(x, dtype=float)
    L = float(cfg.L)
    T_L = float(coefficient(cfg.T)(np.array([L]))[0])
    d_L = float(coefficient(cfg.d)(np.array([L]))[0])
    if cfg.is_constant:
        rho, T = float(cfg.rho), float(cfg.T)
        if rho <= 0 or T <= 0 or d_L <= 0:
            raise InvalidInputError("string coefficients must be positive")
        m = rho * L
        w0 = (3 * x**2 - L**2) / (6 * L * T)
    else:
        q = _StringIntegrals(cfg, method)
        m = q.mass()
        w0 = (q.F(x).reshape(x.shape) - q.weighted_F() / m) / m
    return u0 / m, d_L * u0 / (m * T_L), u0 * w0


def string_transfer(x, s: complex, cfg: StringConfig | None = None) -> np.ndarray:
    """
    Transfer function of the constant-coefficient string from the end force
    to the displacement at `x`:

        G(x, s) = cosh(st x) / (T st sinh(st L)),  st = s sqrt(rho / (T + d s)).

    For ``Re(st L) > 1`` the ratio is evaluated with decaying exponentials
    only, which avoids overflow for large ``|s|``.
    """
    cfg = cfg if cfg is not None else StringConfig()
    if not cfg.is_constant:
        raise InvalidInputError("string_transfer needs constant coefficients")
    s = complex(s)
    if s == 0:
        raise InvalidInputError("transfer function has a double pole at s = 0")
    rho, T, d, L = float(cfg.rho), float(cfg.T), float(cfg.d), float(cfg.L)
    x = np.asarray(x, dtype=float)
    st = s * np.sqrt(complex(rho / (T + d * s)))
    z = st * L
    if z.real < 0:
        st, z = -st, -z  # G is even in st
    if z.real > 1.0:
        e = np.exp(-2 * z)
        if abs(1 - e) < 1e-12:
            raise NumericalError(f"s = {s} is too close to a pole")
        ratio = (np.exp(st * (x - L)) + np.exp(-st * (x + L))) / (1 - e)
    else:
        sh = np.sinh(z)
        if abs(sh) < 1e-12 * max(1.0, abs(z)) or (abs(z) > 1e-3 and abs(sh) < 1e-10):
            raise NumericalError(f"s = {s} is too close to a pole")
        ratio = np.cosh(st * x) / sh
    return ratio / (T * st)


# ----------------------------------------------------------------------
# beam
# ----------------------------------------------------------------------


def beam_analytic(x, cfg: BeamConfig | None = None, u0: float = 1.0
                  ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Low-order coefficients of the free-free beam with a tip dashpot:

        w2 = 0,  w1 = (3x - L) u0 / (2 L d),  w0 = rho A (L - 3x) u0 / (8 d**2).

    The rigid motion is absorbed by the dashpot, so no acceleration term
    survives and the flexible compliance does not involve EI.
    """
    cfg = cfg if cfg is not None else BeamConfig()
    if not cfg.d > 0:
        raise InvalidInputError("tip damping d must be positive (formulas are singular)")
    x = np.asarray(x, dtype=float)
    L, d = float(cfg.L), float(cfg.d)
    w1 = (3 * x - L) / (2 * L * d) * u0
    w0 = cfg.rho_a * (L - 3 * x) / (8 * d * d) * u0
    return np.zeros_like(x), w1, w0


# ----------------------------------------------------------------------
# resolvent of a discrete system
# ----------------------------------------------------------------------


def _mp_resolvent(sys: SecondOrderSystem, s: float, b0: np.ndarray, b1: np.ndarray,
                  dps: int) -> np.ndarray:
    """
    Solve ``(s**2 M + s D + K) x = b0 + s b1`` in `dps`-digit arithmetic.

    Matrix entries are converted exactly from binary64 and combined in high
    precision, so nothing is lost when large stiffness entries meet tiny
    ``s**2`` mass entries. Gaussian elimination with partial pivoting runs
    on dictionary rows after a reverse Cuthill-McKee ordering, which keeps
    the fill inside the band.
    """
    n = sys.n_dof
    parts = [sp.coo_matrix(a) for a in (sys.M, sys.D, sys.K)]
    pattern = sp.csr_matrix(sum(abs(sp.csr_matrix(a)) for a in parts))
    perm = reverse_cuthill_mckee(pattern, symmetric_mode=True)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(n)
    with mpmath.workdps(dps):
        zero = mpmath.mpf(0)
        ms = mpmath.mpf(float(s))
        rows: list[dict] = [dict() for _ in range(n)]
        for a, c in zip(parts, (ms * ms, ms, mpmath.mpf(1))):
            for i, j, v in zip(a.row, a.col, a.data):
                ri, cj = int(inv[i]), int(inv[j])
                rows[ri][cj] = rows[ri].get(cj, zero) + c * mpmath.mpf(float(v))
        b = [mpmath.mpf(float(b0[perm[i]])) + ms * mpmath.mpf(float(b1[perm[i]]))
             for i in range(n)]
        lead = [min(r) if r else n for r in rows]
        for k in range(n):
            cand = [i for i in range(k, n) if lead[i] == k]
            piv = max(cand, key=lambda i: abs(rows[i][k]), default=None)
            if piv is None or rows[piv][k] == 0:
                raise NumericalError(f"s^2 M + s D + K is singular at s = {s}")
            rows[k], rows[piv] = rows[piv], rows[k]
            b[k], b[piv] = b[piv], b[k]
            lead[k], lead[piv] = lead[piv], lead[k]
            pivot_row, pk = rows[k], rows[k][k]
            for i in range(k + 1, n):
                if lead[i] != k:
                    continue
                f = rows[i].pop(k) / pk
                for j, v in pivot_row.items():
                    if j != k:
                        rows[i][j] = rows[i].get(j, zero) - f * v
                b[i] -= f * b[k]
                lead[i] = min(rows[i]) if rows[i] else n
        x = [zero] * n
        for k in range(n - 1, -1, -1):
            acc = b[k]
            for j, v in rows[k].items():
                if j > k:
                    acc -= v * x[j]
            x[k] = acc / rows[k][k]
        out = np.array([float(v) for v in x])
    return out[inv]


def numeric_transfer(sys: SecondOrderSystem, s: complex, channel: int = 0,
                     dps: int | None = None) -> np.ndarray:
    """
    ``G(s) = (s**2 M + s D + K)^-1 (b0 + s b1)`` for one input channel.

    Parameters
    ----------
    s : complex
        Evaluation point. Real `s` gives a real result.
    dps : int, optional
        Decimal digits for an extended-precision solve (real `s` only).
        Near ``s = 0`` the matrix is nearly singular along the rigid modes
        and, in binary64, forming ``s**2 M + K`` already discards most of
        the mass term; the extended solve returns ``G`` correct to binary64
        rounding. Cost grows with the squared bandwidth, so this is meant
        for small or banded models.
    """
    b0, b1 = sys.channel(channel)
    real = np.isreal(s)
    s = float(np.real(s)) if real else complex(s)
    if dps is not None:
        if not real:
            raise InvalidInputError("extended-precision transfer needs real s")
        return _mp_resolvent(sys, s, b0, b1, dps)
    A = (s * s) * sys.M + s * sys.D + sys.K
    rhs = b0 + s * b1
    if sp.issparse(A):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error", spla.MatrixRankWarning)
                g = spla.splu(sp.csc_matrix(A)).solve(np.asarray(rhs))
        except (RuntimeError, spla.MatrixRankWarning) as exc:
            raise NumericalError(f"s^2 M + s D + K is singular at s = {s}: {exc}") from None
    else:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", la.LinAlgWarning)
                g = la.solve(A, rhs)
        except la.LinAlgError as exc:
            raise NumericalError(f"s^2 M + s D + K is singular at s = {s}: {exc}") from None
    if not np.all(np.isfinite(g)):
        raise NumericalError(f"s^2 M + s D + K is singular at s = {s}")
    return g


def extrapolate_low_order(G, s_values: Sequence[float] = EXTRAPOLATION_POINTS,
                          symmetric: bool = True
                          ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Limits ``G2 = lim s**2 G``, ``G1 = lim s (G - G2/s**2)`` and
    ``G0 = lim (G - G2/s**2 - G1/s)`` from samples at small real ``s``.

    With ``symmetric=True`` (default) `G` is sampled at ``+s`` and ``-s``.
    The even part ``s**2 (G(s) + G(-s)) / 2 = G2 + G0 s**2 + O(s**4)`` and
    the odd part ``s (G(s) - G(-s)) / 2 = G1 + O(s**2)`` are each fitted by
    a quadratic in ``s**2`` (Richardson in ``s**2``), leaving an error of
    order ``max(s)**6``. With ``symmetric=False`` the quadratic
    ``G2 + G1 s + G0 s**2`` is interpolated through ``s**2 G(s)``; its
    error in ``G0`` is of order ``max(s)``.

    Both variants amplify evaluation errors in `G` strongly (for ``G0`` by
    about ``1 / (s_max s_min)`` one-sided and ``1 / (s_max s_min)**2``
    symmetric), so the samples must be accurate; see the `dps` option of
    :func:`numeric_transfer`.

    Parameters
    ----------
    G : callable
        ``G(s) -> (n,) array``.
    s_values : sequence of three distinct positive floats
    """
    s = np.asarray(s_values, dtype=float)
    if s.size != 3 or np.unique(s).size != 3 or np.any(s <= 0):
        raise InvalidInputError("need three distinct positive s values")
    if not symmetric:
        Y = np.vstack([sk * sk * np.asarray(G(sk)) for sk in s])
        c = la.solve(np.vander(s, 3, increasing=True), Y)
        return c[0], c[1], c[2]
    plus = [np.asarray(G(sk)) for sk in s]
    minus = [np.asarray(G(-sk)) for sk in s]
    even = np.vstack([sk * sk * 0.5 * (gp + gm) for sk, gp, gm in zip(s, plus, minus)])
    odd = np.vstack([sk * 0.5 * (gp - gm) for sk, gp, gm in zip(s, plus, minus)])
    V = np.vander(s * s, 3, increasing=True)
    ce = la.solve(V, even)
    co = la.solve(V, odd)
    return ce[0], co[0], ce[1]

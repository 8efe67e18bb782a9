"""
Domain types shared by every route, plus the residual checks that any
low-order model (w2, w1, w0) of a second-order system must satisfy.

The discrete model is

    M w'' + D w' + K w = b0 u + b1 u'

and a step input u(t) = u0 (t > 0) produces, for large t,

    w(t) ~ (t**2 / 2) w2 + t w1 + w0.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, NamedTuple, Sequence

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

#: Above this many DOF the generators switch to compressed-sparse storage.
SPARSE_THRESHOLD = 2000


class LowFreqError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(LowFreqError, ValueError):
    """Array shapes do not agree."""


class InvalidInputError(LowFreqError, ValueError):
    """A configuration or system violates its documented invariants."""


class PreconditionError(LowFreqError):
    """A route refuses to run because its mathematical precondition fails."""


class NumericalError(LowFreqError):
    """A factorization or solve failed (singular or non-SPD matrix)."""


class Route(str, enum.Enum):
    SPECTRAL = "spectral"
    ALGEBRAIC = "algebraic"
    REGRESSION = "regression"


class DofLabel(NamedTuple):
    """Metadata of a single degree of freedom."""

    kind: str  # displacement, slope_x, slope_y or twist
    coords: tuple[float, ...]


DOF_KINDS = ("displacement", "slope_x", "slope_y", "twist")


# ----------------------------------------------------------------------
# matrix helpers that treat dense and sparse storage alike
# ----------------------------------------------------------------------


def is_sparse(a) -> bool:
    return sp.issparse(a)


def norm(a) -> float:
    """Frobenius norm of a dense or sparse matrix (2-norm for vectors)."""
    if sp.issparse(a):
        return float(spla.norm(a))
    return float(np.linalg.norm(a))


def to_dense(a) -> np.ndarray:
    if sp.issparse(a):
        return a.toarray()
    return np.asarray(a, dtype=float)


def _as_matrix(a, n: int, name: str, sparse: bool):
    if sp.issparse(a):
        a = sp.csr_matrix(a, dtype=float)
        if not sparse:
            a = a.toarray()
    else:
        a = np.array(a, dtype=float)
        if a.ndim != 2:
            raise DimensionError(f"{name} must be 2-D, got shape {a.shape}")
        if sparse:
            a = sp.csr_matrix(a)
    if a.shape != (n, n):
        raise DimensionError(f"{name} has shape {a.shape}, expected ({n}, {n})")
    return a


def _as_load(b, n: int, name: str) -> np.ndarray:
    b = to_dense(b)
    if b.ndim == 1:
        b = b[:, None]
    if b.ndim != 2 or b.shape[0] != n:
        raise DimensionError(f"{name} has shape {b.shape}, expected ({n}, m)")
    b = np.array(b, dtype=float)
    b.setflags(write=False)
    return b


def _asymmetry(a) -> float:
    d = a - a.T
    return norm(d)


# ----------------------------------------------------------------------
# domain types
# ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SecondOrderSystem:
    """
    Discrete second-order model ``(M, D, K, b0, b1)``.

    Parameters
    ----------
    M, D, K : (n, n) array_like or sparse matrix
        Mass, damping and stiffness matrices. All are converted to the
        requested storage (dense ndarray or CSR).
    b0, b1 : (n,) or (n, m) array_like
        Load distributions for the input and for its rate. A 1-D vector
        is treated as a single input channel.
    dof_labels : sequence of DofLabel, optional
    storage : {"dense", "csr"}, optional
        Defaults to the storage of `K`.
    validate : bool
        Check symmetry and definiteness on construction (cheap for dense,
        Cholesky-based for SPD-ness of ``M``).
    """

    M: Any
    D: Any
    K: Any
    b0: np.ndarray
    b1: np.ndarray
    dof_labels: tuple[DofLabel, ...] | None = None
    storage: str = "dense"
    name: str = ""

    def __init__(self, M, D, K, b0, b1=None, dof_labels=None, storage=None,
                 name="", validate=True):
        if storage is None:
            storage = "csr" if sp.issparse(K) else "dense"
        if storage not in ("dense", "csr"):
            raise InvalidInputError(f"unknown storage {storage!r}")
        sparse = storage == "csr"
        shape = K.shape if sp.issparse(K) else np.shape(K)
        if len(shape) != 2:
            raise DimensionError(f"K must be 2-D, got shape {shape}")
        n = shape[0]
        set_ = object.__setattr__
        set_(self, "storage", storage)
        set_(self, "K", _as_matrix(K, n, "K", sparse))
        set_(self, "M", _as_matrix(M, n, "M", sparse))
        set_(self, "D", _as_matrix(D, n, "D", sparse))
        b0 = _as_load(b0, n, "b0")
        b1 = np.zeros_like(b0) if b1 is None else _as_load(b1, n, "b1")
        if b1.shape != b0.shape:
            raise DimensionError(f"b1 shape {b1.shape} != b0 shape {b0.shape}")
        set_(self, "b0", b0)
        set_(self, "b1", b1)
        if dof_labels is not None:
            dof_labels = tuple(DofLabel(lab[0], tuple(lab[1])) for lab in dof_labels)
            if len(dof_labels) != n:
                raise DimensionError(f"{len(dof_labels)} dof labels for {n} DOF")
        set_(self, "dof_labels", dof_labels)
        set_(self, "name", name)
        for a in (self.M, self.D, self.K):
            if not sparse:
                a.setflags(write=False)
        if validate:
            self.validate()

    @property
    def n_dof(self) -> int:
        return self.K.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.b0.shape[1]

    def validate(self, tol_sym: float = 1e-10) -> None:
        """Raise InvalidInputError when a structural invariant is broken."""
        for name in ("M", "D", "K"):
            a = getattr(self, name)
            scale = norm(a)
            if _asymmetry(a) > tol_sym * max(scale, 1.0):
                raise InvalidInputError(f"{name} is not symmetric")
        try:
            if self.storage == "dense":
                la.cholesky(self.M)
            else:
                # no sparse Cholesky in scipy; a positive diagonal plus a
                # successful LU is the cheap surrogate for large systems
                if np.any(self.M.diagonal() <= 0):
                    raise la.LinAlgError("non-positive diagonal")
                spla.splu(sp.csc_matrix(self.M))
        except (la.LinAlgError, RuntimeError) as exc:
            raise InvalidInputError(f"M is not symmetric positive definite: {exc}")
        if self.storage == "dense":
            for name in ("D", "K"):
                a = getattr(self, name)
                lmin = la.eigvalsh(a, subset_by_index=[0, 0])[0] if a.size else 0.0
                if lmin < -tol_sym * max(norm(a), 1.0):
                    raise InvalidInputError(
                        f"{name} is not positive semidefinite (min eig {lmin:.3e})")

    def channel(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        if not 0 <= j < self.n_inputs:
            raise DimensionError(f"channel {j} out of range [0, {self.n_inputs})")
        return self.b0[:, j], self.b1[:, j]

    def with_storage(self, storage: str) -> "SecondOrderSystem":
        return SecondOrderSystem(self.M, self.D, self.K, self.b0, self.b1,
                                 dof_labels=self.dof_labels, storage=storage,
                                 name=self.name, validate=False)

    def displacement_dofs(self) -> np.ndarray:
        """Indices of transversal-displacement DOF (all DOF when unlabelled)."""
        if self.dof_labels is None:
            return np.arange(self.n_dof)
        return np.array([i for i, lab in enumerate(self.dof_labels)
                         if lab.kind == "displacement"], dtype=int)


ZERO_GAP = 1e6


def zero_cluster(values: np.ndarray, tol: float, scale: float | None = None,
                 gap: float = ZERO_GAP) -> np.ndarray:
    """
    Boolean mask of the eigenvalues that count as zero.

    Candidates are ``values <= tol * scale`` (``scale`` defaults to the
    largest magnitude). For very stiff models that bound can exceed the
    lowest genuinely nonzero eigenvalues, so the candidate set is cut at
    the first relative jump larger than `gap` above the rounding floor
    ``eps * scale``.
    """
    values = np.asarray(values, dtype=float)
    if scale is None:
        scale = np.abs(values).max(initial=0.0)
    mask = values <= tol * scale
    if not mask.any():
        return mask
    floor = np.finfo(float).eps * scale
    idx = np.flatnonzero(mask)
    order = idx[np.argsort(values[idx])]
    prev = floor
    for pos, i in enumerate(order):
        if values[i] > gap * max(prev, floor):
            mask[order[pos:]] = False
            break
        prev = max(prev, values[i])
    return mask


@dataclass(frozen=True, eq=False)
class KernelBasis:
    """Columns spanning ker(K), with the cached Gram matrix ``V.T M V``."""

    V: np.ndarray
    gram: np.ndarray

    @property
    def k(self) -> int:
        return self.V.shape[1]


@dataclass(frozen=True, eq=False)
class ModalDecomposition:
    """
    Generalized eigenpairs ``K phi = lam M phi`` with M-orthonormal ``Phi``.

    ``mus`` are the diagonal entries of ``Phi.T D Phi``; `setI` and `setJ`
    index the modes whose stiffness (resp. damping) eigenvalue is zero.
    When `complete` is False only the lowest modes were computed (large
    sparse systems); the rest of the spectrum is handled by a static
    correction in the spectral route.
    """

    lambdas: np.ndarray
    mus: np.ndarray
    Phi: np.ndarray
    setI: np.ndarray
    setJ: np.ndarray
    proportional_defect: float
    proportional: bool = True
    complete: bool = True

    @property
    def n_modes(self) -> int:
        return self.lambdas.size


@dataclass(frozen=True, eq=False)
class LowOrderModel:
    """Response coefficients ``w2, w1, w0`` (each n x m) from one route."""

    w2: np.ndarray
    w1: np.ndarray
    w0: np.ndarray
    route: Route
    residuals: dict[str, float] = field(default_factory=dict)
    channels: tuple[int, ...] | None = None

    def __post_init__(self):
        arrs = []
        for name in ("w2", "w1", "w0"):
            a = np.asarray(getattr(self, name), dtype=float)
            if a.ndim == 1:
                a = a[:, None]
            arrs.append(a)
            object.__setattr__(self, name, a)
        if not arrs[0].shape == arrs[1].shape == arrs[2].shape:
            raise DimensionError("w2, w1, w0 must share one shape")
        object.__setattr__(self, "route", Route(self.route))

    @property
    def n_dof(self) -> int:
        return self.w0.shape[0]

    def scaled(self, c: float) -> "LowOrderModel":
        return LowOrderModel(c * self.w2, c * self.w1, c * self.w0, self.route,
                             dict(self.residuals), self.channels)

    def evaluate(self, t) -> np.ndarray:
        """Trend ``t**2/2 w2 + t w1 + w0`` at times `t`, shape (n, m, len(t))."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return (0.5 * t**2 * self.w2[..., None] + t * self.w1[..., None]
                + self.w0[..., None] + 0.0 * t)


@dataclass(frozen=True, eq=False)
class StepResponse:
    """Displacement snapshots of a step response."""

    times: np.ndarray
    snapshots: np.ndarray
    velocity0: np.ndarray
    u0: np.ndarray
    dt: float

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        snaps = np.asarray(self.snapshots, dtype=float)
        if times.ndim != 1 or times.size < 1:
            raise DimensionError("times must be a non-empty vector")
        if times[0] < 0 or np.any(np.diff(times) <= 0):
            raise InvalidInputError("times must be non-negative and strictly increasing")
        if snaps.ndim != 2 or snaps.shape[1] != times.size:
            raise DimensionError(
                f"snapshots shape {snaps.shape} does not match {times.size} times")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "snapshots", snaps)
        object.__setattr__(self, "u0", np.atleast_1d(np.asarray(self.u0, dtype=float)))
        object.__setattr__(self, "velocity0", np.asarray(self.velocity0, dtype=float))

    @property
    def n_dof(self) -> int:
        return self.snapshots.shape[0]


# ----------------------------------------------------------------------
# residual checks
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class ConsistencyReport:
    """
    Named residuals with pass/fail flags against ``tol * scale``.

    `scale` is 1 for absolute checks; relative checks use the backward-error
    magnitude ``(|M| + |D| + |K|)(|w2| + |w1| + |w0|) + |b0| + 1``.
    """

    residuals: dict[str, float]
    tol: float
    scale: float = 1.0

    @property
    def threshold(self) -> float:
        return self.tol * self.scale

    @property
    def flags(self) -> dict[str, bool]:
        return {k: v <= self.threshold for k, v in self.residuals.items()}

    @property
    def passed(self) -> bool:
        return all(self.flags.values())


RESIDUAL_NAMES = ("K_w2", "D_w2+K_w1", "M_w2+D_w1+K_w0-b0", "Vt_M_w0")


def rigid_kernel(sys: SecondOrderSystem, tol: float = 1e-8) -> np.ndarray:
    """Orthonormal basis of ker(K) n ker(D) (= ker(K + D) for PSD K, D)."""
    if sys.storage != "dense":
        raise PreconditionError(
            "kernel of K+D must be supplied for sparse systems")
    s = sys.K + sys.D
    lam, vec = la.eigh(s)
    scale = max(abs(lam).max(initial=0.0), 1.0)
    return vec[:, lam <= tol * scale]


def check_consistency(sys: SecondOrderSystem, lom: LowOrderModel, tol: float = 1e-8,
                      kernel: np.ndarray | KernelBasis | None = None,
                      channels: Sequence[int] | None = None,
                      relative: bool = False) -> ConsistencyReport:
    """
    Residuals of the equations linking a low-order model to its system.

    Returns the norms of ``K w2``, ``D w2 + K w1``,
    ``M w2 + D w1 + K w0 - b0`` and ``V.T M w0``, where ``V`` spans
    ker(K) n ker(D). Norms are Frobenius norms over all channels.

    Parameters
    ----------
    kernel : ndarray or KernelBasis, optional
        Basis of ker(K) n ker(D). Computed from a dense eigensolve when
        omitted.
    channels : sequence of int, optional
        Columns of ``b0`` that the model's columns correspond to. Defaults
        to ``lom.channels`` or all channels.
    relative : bool
        Flag against ``tol`` times the backward-error magnitude instead of
        ``tol`` itself. Rounding in ``K w2`` alone is of order
        ``eps |K| |w2|``, so large stiff models need the relative form.
    """
    n = sys.n_dof
    if lom.n_dof != n:
        raise DimensionError(f"model has {lom.n_dof} DOF, system has {n}")
    if channels is None:
        channels = lom.channels if lom.channels is not None else range(sys.n_inputs)
    channels = list(channels)
    if len(channels) != lom.w0.shape[1]:
        raise DimensionError(
            f"model has {lom.w0.shape[1]} channels, {len(channels)} requested")
    b0 = sys.b0[:, channels]
    if kernel is None:
        V = rigid_kernel(sys)
    elif isinstance(kernel, KernelBasis):
        V = kernel.V
    else:
        V = np.asarray(kernel, dtype=float).reshape(n, -1)
    M, D, K = sys.M, sys.D, sys.K
    w2, w1, w0 = lom.w2, lom.w1, lom.w0
    res = {
        "K_w2": norm(K @ w2),
        "D_w2+K_w1": norm(D @ w2 + K @ w1),
        "M_w2+D_w1+K_w0-b0": norm(M @ w2 + D @ w1 + K @ w0 - b0),
        "Vt_M_w0": norm(V.T @ (M @ w0)) if V.size else 0.0,
    }
    scale = 1.0
    if relative:
        scale = (norm(M) + norm(D) + norm(K)) * (norm(w2) + norm(w1) + norm(w0)) \
            + norm(b0) + 1.0
    return ConsistencyReport(res, tol, scale)

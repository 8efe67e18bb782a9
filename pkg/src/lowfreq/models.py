"""
Generators for the built-in mechanical models.

* ``example_ode3``: a 3-DOF diagonal system whose rigid and damped-rigid
  modes make the velocity term nonzero.
* ``string_fem``: damped string with an end force, linear elements.
* ``beam_fem``: free-free Euler-Bernoulli beam with a tip dashpot, Hermite
  cubic elements.
* ``plate_bfs_fem``: free rectangular Kirchhoff plate with a half-edge
  line load, Bogner-Fox-Schmit elements.

Boundary inputs enter as nodal load vectors: ``b0`` carries the force,
``b1`` the part of the boundary flux proportional to the input rate.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable, Union

import numpy as np
import scipy.sparse as sp

from .core import (SPARSE_THRESHOLD, DofLabel, InvalidInputError, KernelBasis,
                   SecondOrderSystem)

Coefficient = Union[float, Callable[[np.ndarray], np.ndarray], list]


def coefficient(c: Coefficient) -> Callable[[np.ndarray], np.ndarray]:
    """
    Turn a constant, a polynomial coefficient list ``[c0, c1, ...]``
    (meaning ``c0 + c1 x + ...``) or a callable into a vectorized function.
    """
    if callable(c):
        return lambda x: np.asarray(c(np.asarray(x, dtype=float)), dtype=float) + 0.0 * x
    if isinstance(c, (list, tuple, np.ndarray)):
        coeffs = np.asarray(c, dtype=float)
        return lambda x: np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), coeffs)
    value = float(c)
    return lambda x: np.full(np.shape(x), value)


def _storage_for(n: int, storage: str | None) -> str:
    if storage is None or storage == "auto":
        return "csr" if n > SPARSE_THRESHOLD else "dense"
    if storage not in ("dense", "csr"):
        raise InvalidInputError(f"unknown storage {storage!r}")
    return storage


def _assemble(n: int, conn: np.ndarray, ke: np.ndarray) -> sp.csr_matrix:
    """Scatter element matrices ``ke`` ((n_el, p, p) or (p, p)) through ``conn``."""
    n_el, p = conn.shape
    ke = np.broadcast_to(ke, (n_el, p, p))
    rows = np.repeat(conn, p, axis=1).ravel()
    cols = np.tile(conn, (1, p)).ravel()
    a = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    a.sum_duplicates()
    a.sort_indices()
    return a


# ----------------------------------------------------------------------
# Example 1
# ----------------------------------------------------------------------


def example_ode3() -> SecondOrderSystem:
    """M = I, D = diag(0, 1, 1), K = diag(0, 0, 1), b0 = [1, 1, 1], b1 = 0."""
    return SecondOrderSystem(np.eye(3), np.diag([0.0, 1.0, 1.0]),
                             np.diag([0.0, 0.0, 1.0]), np.ones(3), np.zeros(3),
                             dof_labels=[("displacement", (float(i),)) for i in range(3)],
                             name="example1")


# ----------------------------------------------------------------------
# string
# ----------------------------------------------------------------------


@dataclass
class StringConfig:
    """Damped string on [0, L] driven by an end force at x = L."""

    L: float = 1.0
    n_elem: int = 200
    rho: Coefficient = 1.0
    T: Coefficient = 1.0
    d: Coefficient = 0.01
    storage: str = "auto"

    def validate(self) -> None:
        if not self.L > 0:
            raise InvalidInputError("string length must be positive")
        if int(self.n_elem) < 1:
            raise InvalidInputError("n_elem must be >= 1")
        x = np.linspace(0.0, self.L, 4 * int(self.n_elem) + 1)
        for name in ("rho", "T", "d"):
            if np.any(coefficient(getattr(self, name))(x) <= 0):
                raise InvalidInputError(f"string coefficient {name} must be positive")

    @property
    def is_constant(self) -> bool:
        return all(not callable(c) and np.ndim(c) == 0
                   for c in (self.rho, self.T, self.d))


def string_fem(cfg: StringConfig) -> SecondOrderSystem:
    cfg.validate()
    ne = int(cfg.n_elem)
    n = ne + 1
    x = np.linspace(0.0, cfg.L, n)
    # One float for every element length: with constant coefficients the
    # assembled K and D then annihilate constants exactly in binary64.
    h = np.full(ne, cfg.L / ne)
    xm = 0.5 * (x[:-1] + x[1:])
    rho, T, d = (coefficient(c)(xm) for c in (cfg.rho, cfg.T, cfg.d))
    conn = np.column_stack([np.arange(ne), np.arange(1, n)])
    mass = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    lap = np.array([[1.0, -1.0], [-1.0, 1.0]])
    M = _assemble(n, conn, (rho * h)[:, None, None] * mass)
    K = _assemble(n, conn, (T / h)[:, None, None] * lap)
    D = _assemble(n, conn, (d / h)[:, None, None] * lap)
    b0 = np.zeros(n)
    b0[-1] = 1.0
    T_L = float(coefficient(cfg.T)(np.array([cfg.L]))[0])
    d_L = float(coefficient(cfg.d)(np.array([cfg.L]))[0])
    b1 = (d_L / T_L) * b0
    labels = [("displacement", (float(xi),)) for xi in x]
    return SecondOrderSystem(M, D, K, b0, b1, dof_labels=labels,
                             storage=_storage_for(n, cfg.storage), name="string")


def string_kernel(cfg: StringConfig) -> np.ndarray:
    return np.ones((int(cfg.n_elem) + 1, 1))


# ----------------------------------------------------------------------
# beam
# ----------------------------------------------------------------------


@dataclass
class BeamConfig:
    """Free-free Euler-Bernoulli beam with a dashpot on the tip at x = L."""

    L: float = 1.0
    rho: float = 1.0
    A_cs: float = 1.0
    E: float = 1.0
    I: float = 1.0
    d: float = 10.0
    n_elem: int = 20
    storage: str = "auto"

    def validate(self) -> None:
        for name in ("L", "rho", "A_cs", "E", "I", "d"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"beam parameter {name} must be positive")
        if int(self.n_elem) < 1:
            raise InvalidInputError("n_elem must be >= 1")

    @property
    def rho_a(self) -> float:
        return self.rho * self.A_cs

    @property
    def ei(self) -> float:
        return self.E * self.I


def hermite_beam_element(h: float, ei: float, rho_a: float) -> tuple[np.ndarray, np.ndarray]:
    """Stiffness and consistent mass of a cubic Hermite element (w, w')."""
    k = ei / h**3 * np.array([
        [12.0, 6 * h, -12.0, 6 * h],
        [6 * h, 4 * h * h, -6 * h, 2 * h * h],
        [-12.0, -6 * h, 12.0, -6 * h],
        [6 * h, 2 * h * h, -6 * h, 4 * h * h]])
    m = rho_a * h / 420.0 * np.array([
        [156.0, 22 * h, 54.0, -13 * h],
        [22 * h, 4 * h * h, 13 * h, -3 * h * h],
        [54.0, 13 * h, 156.0, -22 * h],
        [-13 * h, -3 * h * h, -22 * h, 4 * h * h]])
    return k, m


def beam_fem(cfg: BeamConfig) -> SecondOrderSystem:
    cfg.validate()
    ne = int(cfg.n_elem)
    n_nodes = ne + 1
    n = 2 * n_nodes
    h = cfg.L / ne
    ke, me = hermite_beam_element(h, cfg.ei, cfg.rho_a)
    conn = np.column_stack([2 * np.arange(ne), 2 * np.arange(ne) + 1,
                            2 * np.arange(1, n_nodes), 2 * np.arange(1, n_nodes) + 1])
    K = _assemble(n, conn, ke)
    M = _assemble(n, conn, me)
    tip = n - 2
    D = sp.csr_matrix(([cfg.d], ([tip], [tip])), shape=(n, n))
    b0 = np.zeros(n)
    b0[tip] = 1.0
    x = np.linspace(0.0, cfg.L, n_nodes)
    labels = []
    for xi in x:
        labels += [("displacement", (float(xi),)), ("slope_x", (float(xi),))]
    return SecondOrderSystem(M, D, K, b0, np.zeros(n), dof_labels=labels,
                             storage=_storage_for(n, cfg.storage), name="beam")


def beam_kernel(cfg: BeamConfig) -> np.ndarray:
    """Nodal interpolants of 1 and x."""
    n_nodes = int(cfg.n_elem) + 1
    x = np.linspace(0.0, cfg.L, n_nodes)
    V = np.zeros((2 * n_nodes, 2))
    V[0::2, 0] = 1.0
    V[0::2, 1] = x
    V[1::2, 1] = 1.0
    return V


# ----------------------------------------------------------------------
# plate
# ----------------------------------------------------------------------


@dataclass
class PlateConfig:
    """
    Free rectangular Kirchhoff plate ``(0, L) x (0, W)`` with structural
    damping ``D = beta K`` and a uniform line load on the half edge
    ``{0} x [W/2, W]``. Defaults are the aluminium plate of the reference
    example (SI units); `Mx`, `My` count elements along x and y.
    """

    L: float = 0.5
    W: float = 0.4
    h: float = 0.01
    rho: float = 2700.0
    E: float = 69e9
    nu: float = 0.3
    beta: float = 0.01
    Mx: int = 30
    My: int = 40
    load: str = "lumped"
    stiffness: str = "classical"
    storage: str = "auto"

    def validate(self) -> None:
        for name in ("L", "W", "h", "rho", "E", "beta"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"plate parameter {name} must be positive")
        if not 0.0 <= self.nu <= 0.5:
            raise InvalidInputError("Poisson ratio must lie in [0, 1/2]")
        if int(self.Mx) < 2 or int(self.My) < 2:
            raise InvalidInputError("Mx and My must be >= 2")
        if int(self.My) % 2:
            raise InvalidInputError(
                "My must be even so that the half-edge load ends on a node line")
        if self.load not in ("lumped", "consistent"):
            raise InvalidInputError(f"unknown load type {self.load!r}")
        if self.stiffness not in ("per_mass", "classical"):
            raise InvalidInputError(f"unknown stiffness convention {self.stiffness!r}")

    @property
    def bending_stiffness(self) -> float:
        """
        Coefficient of the biharmonic operator in the stiffness form.

        ``"classical"`` (default) is the flexural rigidity
        ``E h**3 / (12 (1 - nu**2))``. ``"per_mass"`` uses
        ``E h**2 / (12 rho (1 - nu**2))``, the rigidity divided by the
        areal mass, while keeping the mass form ``rho h``.
        """
        if self.stiffness == "per_mass":
            return self.E * self.h**2 / (12.0 * self.rho * (1.0 - self.nu**2))
        return self.E * self.h**3 / (12.0 * (1.0 - self.nu**2))

    @property
    def n_dof(self) -> int:
        return 4 * (int(self.Mx) + 1) * (int(self.My) + 1)

    def node_coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates of all nodes, node id = j * (Mx + 1) + i."""
        xs = np.linspace(0.0, self.L, int(self.Mx) + 1)
        ys = np.linspace(0.0, self.W, int(self.My) + 1)
        X, Y = np.meshgrid(xs, ys)
        return X.ravel(), Y.ravel()


def _hermite_1d(xi: np.ndarray, a: float) -> np.ndarray:
    """
    Cubic Hermite functions on [0, a] and their first two x-derivatives.

    Returns array (3, 4, len(xi)): derivative order, function
    (value@0, slope@0, value@a, slope@a), point.
    """
    x2, x3 = xi**2, xi**3
    f = np.array([1 - 3 * x2 + 2 * x3, a * (xi - 2 * x2 + x3),
                  3 * x2 - 2 * x3, a * (-x2 + x3)])
    df = np.array([-6 * xi + 6 * x2, a * (1 - 4 * xi + 3 * x2),
                   6 * xi - 6 * x2, a * (-2 * xi + 3 * x2)]) / a
    ddf = np.array([-6 + 12 * xi, a * (-4 + 6 * xi),
                    6 - 12 * xi, a * (-2 + 6 * xi)]) / a**2
    return np.array([f, df, ddf])


# local node -> (x end, y end); counter-clockwise from (0, 0)
_BFS_NODES = ((0, 0), (1, 0), (1, 1), (0, 1))


def _bfs_shape_tables(a: float, b: float, xi: np.ndarray, eta: np.ndarray):
    """
    Shape functions of the 16-DOF element at points (xi[q], eta[q]) in the
    unit square. Returns (N, Nxx, Nyy, Nxy), each of shape (16, n_points).
    """
    hx = _hermite_1d(xi, a)
    hy = _hermite_1d(eta, b)
    shapes = np.zeros((4, 16, xi.size))
    for ln, (ex, ey) in enumerate(_BFS_NODES):
        # per node: w, w_x, w_y, w_xy
        for k, (fx, fy) in enumerate(((2 * ex, 2 * ey), (2 * ex + 1, 2 * ey),
                                      (2 * ex, 2 * ey + 1), (2 * ex + 1, 2 * ey + 1))):
            col = 4 * ln + k
            shapes[0, col] = hx[0, fx] * hy[0, fy]
            shapes[1, col] = hx[2, fx] * hy[0, fy]
            shapes[2, col] = hx[0, fx] * hy[2, fy]
            shapes[3, col] = hx[1, fx] * hy[1, fy]
    return shapes


def bfs_element(a: float, b: float, bending: float, nu: float, mass_density: float,
                n_gauss: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """
    Stiffness and consistent mass of a Bogner-Fox-Schmit rectangle of size
    ``a x b``; ``mass_density`` is mass per unit area.
    """
    g, wg = np.polynomial.legendre.leggauss(n_gauss)
    g = 0.5 * (g + 1.0)
    wg = 0.5 * wg
    XI, ETA = np.meshgrid(g, g, indexing="ij")
    W = np.outer(wg, wg).ravel() * a * b
    N, Nxx, Nyy, Nxy = _bfs_shape_tables(a, b, XI.ravel(), ETA.ravel())
    C = bending * np.array([[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, 2.0 * (1.0 - nu)]])
    B = np.stack([Nxx, Nyy, Nxy])  # (3, 16, q)
    ke = np.einsum("iaq,ij,jbq,q->ab", B, C, B, W)
    me = mass_density * np.einsum("aq,bq,q->ab", N, N, W)
    return 0.5 * (ke + ke.T), 0.5 * (me + me.T)


def _plate_connectivity(cfg: PlateConfig) -> np.ndarray:
    mx, my = int(cfg.Mx), int(cfg.My)
    i, j = np.meshgrid(np.arange(mx), np.arange(my), indexing="xy")
    i, j = i.ravel(), j.ravel()
    stride = mx + 1
    nodes = np.column_stack([j * stride + i, j * stride + i + 1,
                             (j + 1) * stride + i + 1, (j + 1) * stride + i])
    return (4 * nodes[:, :, None] + np.arange(4)).reshape(len(i), 16)


def plate_load(cfg: PlateConfig) -> np.ndarray:
    """Load vector of the unit line load on ``{0} x [W/2, W]``."""
    mx, my = int(cfg.Mx), int(cfg.My)
    stride = mx + 1
    b = np.zeros(cfg.n_dof)
    js = np.arange(my // 2, my + 1)
    if cfg.load == "lumped":
        b[4 * (js * stride)] = 1.0
        return b
    hy = cfg.W / my
    for j in range(my // 2, my):
        n0, n1 = j * stride, (j + 1) * stride
        b[4 * n0] += hy / 2
        b[4 * n1] += hy / 2
        b[4 * n0 + 2] += hy**2 / 12
        b[4 * n1 + 2] -= hy**2 / 12
    return b


def plate_bfs_fem(cfg: PlateConfig) -> SecondOrderSystem:
    cfg.validate()
    n = cfg.n_dof
    a, b = cfg.L / int(cfg.Mx), cfg.W / int(cfg.My)
    ke, me = bfs_element(a, b, cfg.bending_stiffness, cfg.nu, cfg.rho * cfg.h)
    conn = _plate_connectivity(cfg)
    K = _assemble(n, conn, ke)
    M = _assemble(n, conn, me)
    b0 = plate_load(cfg)
    X, Y = cfg.node_coords()
    labels = []
    for xn, yn in zip(X, Y):
        c = (float(xn), float(yn))
        labels += [("displacement", c), ("slope_x", c), ("slope_y", c), ("twist", c)]
    storage = _storage_for(n, cfg.storage)
    return SecondOrderSystem(M, cfg.beta * K, K, b0, cfg.beta * b0, dof_labels=labels,
                             storage=storage, name="plate",
                             validate=storage == "dense")


def plate_kernel(cfg: PlateConfig) -> np.ndarray:
    """Nodal interpolants of 1, x and y (columns v_1, v_x, v_y)."""
    X, Y = cfg.node_coords()
    V = np.zeros((cfg.n_dof, 3))
    V[0::4, 0] = 1.0
    V[0::4, 1] = X
    V[1::4, 1] = 1.0
    V[0::4, 2] = Y
    V[2::4, 2] = 1.0
    return V


def plate_kernel_basis(cfg: PlateConfig) -> KernelBasis:
    from .algebraic import kernel_basis
    sys = plate_bfs_fem(cfg)
    return kernel_basis(sys.K, sys.M, supplied=plate_kernel(cfg))


# ----------------------------------------------------------------------
# configuration documents
# ----------------------------------------------------------------------

KINDS = ("example1", "string", "beam", "plate")
_CONFIG_TYPES = {"string": StringConfig, "beam": BeamConfig, "plate": PlateConfig}


def config_from_dict(kind: str, doc: dict):
    if kind not in _CONFIG_TYPES:
        raise InvalidInputError(f"no configuration for model kind {kind!r}")
    schema = doc.get("schema", 1)
    if schema != 1:
        raise InvalidInputError(f"unsupported config schema {schema!r}")
    cls = _CONFIG_TYPES[kind]
    fields = set(cls.__dataclass_fields__)
    unknown = set(doc) - fields - {"schema", "kind"}
    if unknown:
        raise InvalidInputError(f"unknown {kind} config fields: {sorted(unknown)}")
    cfg = cls(**{k: v for k, v in doc.items() if k in fields})
    cfg.validate()
    return cfg


def config_to_dict(cfg) -> dict:
    kind = {v: k for k, v in _CONFIG_TYPES.items()}[type(cfg)]
    return {"schema": 1, "kind": kind, **asdict(cfg)}


def build(kind: str, cfg=None) -> SecondOrderSystem:
    if kind == "example1":
        return example_ode3()
    if kind not in _CONFIG_TYPES:
        raise InvalidInputError(f"unknown model kind {kind!r}; choose from {KINDS}")
    cfg = cfg if cfg is not None else _CONFIG_TYPES[kind]()
    return {"string": string_fem, "beam": beam_fem, "plate": plate_bfs_fem}[kind](cfg)


def analytic_kernel(kind: str, cfg=None) -> np.ndarray | None:
    """Closed-form rigid-mode basis for the generated model, if known."""
    if kind == "string":
        return string_kernel(cfg or StringConfig())
    if kind == "beam":
        return beam_kernel(cfg or BeamConfig())
    if kind == "plate":
        return plate_kernel(cfg or PlateConfig())
    return None

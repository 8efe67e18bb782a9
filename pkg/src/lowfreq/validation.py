"""
Reference scenarios with measured-versus-expected checks.

Each suite builds a model, runs the routes on it and compares the results
with closed forms or with another route. The CLI ``validate`` command
prints the returned checks as a table.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import algebraic, models, oracles, regress, simulate, spectral
from .core import PreconditionError


@dataclass(frozen=True)
class Check:
    name: str
    measured: float
    expected: float
    tol: float
    passed: bool
    detail: str = ""

    @classmethod
    def error(cls, name: str, err: float, tol: float, detail: str = "") -> "Check":
        """A check whose measured quantity is an error that must not exceed `tol`."""
        err = float(err)
        return cls(name, err, 0.0, tol, bool(err <= tol), detail)

    @classmethod
    def value(cls, name: str, measured: float, expected: float, tol: float,
              relative: bool = True, detail: str = "") -> "Check":
        measured, expected = float(measured), float(expected)
        dev = abs(measured - expected)
        if relative:
            dev /= max(abs(expected), np.finfo(float).tiny)
        return cls(name, measured, expected, tol, bool(dev <= tol), detail)


def rel_l2(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(np.ravel(a) - np.ravel(b)) / np.linalg.norm(np.ravel(b)))


def rel_max(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.abs(np.ravel(a) - np.ravel(b)).max() / np.abs(np.ravel(b)).max())


# ----------------------------------------------------------------------
# suites
# ----------------------------------------------------------------------


def example1_x(t: float) -> np.ndarray:
    """Closed-form step response of the 3-DOF example at time `t`."""
    w = np.sqrt(3.0) / 2
    x3 = 1 - np.exp(-t / 2) * (np.cos(w * t) + np.sin(w * t) / np.sqrt(3.0))
    return np.array([0.5 * t * t, t - 1 + np.exp(-t), x3])


def suite_example1() -> list[Check]:
    sys = models.example_ode3()
    t0 = time.perf_counter()
    lom = spectral.low_order_spectral_all(sys)
    elapsed = time.perf_counter() - t0
    exact = {"w2": [1, 0, 0], "w1": [0, 1, 0], "w0": [0, -1, 1]}
    checks = [Check.error(f"spectral {k} componentwise error",
                          np.abs(getattr(lom, k)[:, 0] - v).max(), 1e-12)
              for k, v in exact.items()]
    checks.append(Check.error("spectral runtime [s]", elapsed, 1.0))
    resp = simulate.step_response(sys, 1.0, 4.0, 1e-3, sample_times=[4.0])
    checks.append(Check.error("CN x(4) error vs closed form",
                              np.abs(resp.snapshots[:, 0] - example1_x(4.0)).max(), 1e-5))
    return checks


def suite_string(n_elem: int = 200) -> list[Check]:
    checks = []
    cfg = models.StringConfig(n_elem=n_elem)
    t0 = time.perf_counter()
    sys = models.string_fem(cfg)
    lom = algebraic.low_order_algebraic(sys)
    x = np.array([lab.coords[0] for lab in sys.dof_labels])
    w2, w1, w0 = oracles.string_analytic(x, cfg)
    checks.append(Check.error("w2 max deviation from 1/(rho L)",
                              np.abs(lom.w2[:, 0] - w2).max(), 1e-8))
    checks.append(Check.error("w1 max deviation from d/(rho L T)",
                              np.abs(lom.w1[:, 0] - w1).max(), 1e-6))
    err = rel_l2(lom.w0[:, 0], w0)
    checks.append(Check.error("w0 relative L2 error", err, 1e-3))
    coarse = models.StringConfig(n_elem=n_elem // 2)
    cs = models.string_fem(coarse)
    xc = np.array([lab.coords[0] for lab in cs.dof_labels])
    err_c = rel_l2(algebraic.low_order_algebraic(cs).w0[:, 0], oracles.string_analytic(xc, coarse)[2])
    checks.append(Check.value("w0 error ratio n/2 vs n (O(h^2))", err_c / err, 4.0, 0.5,
                              relative=False))
    checks.append(Check.error("runtime [s]", time.perf_counter() - t0, 5.0))

    var = models.StringConfig(n_elem=2 * n_elem, rho=[1.0, 1.0], T=[2.0, -1.0],
                              d=[0.02, -0.01])
    vs = models.string_fem(var)
    xv = np.array([lab.coords[0] for lab in vs.dof_labels])
    ref = oracles.string_analytic(xv, var)
    checks.append(Check.error("varying coefficients: w0 relative L2 error",
                              rel_l2(algebraic.low_order_algebraic(vs).w0[:, 0], ref[2]), 1e-3))

    G = lambda s: oracles.numeric_transfer(sys, s, dps=40)
    g2, g1, g0 = oracles.extrapolate_low_order(G)
    for name, g, w in (("w2", g2, lom.w2), ("w1", g1, lom.w1), ("w0", g0, lom.w0)):
        checks.append(Check.error(f"transfer extrapolation {name} relative error",
                                  rel_l2(g, w[:, 0]), 1e-5))
    return checks


def beam_fit(cfg: models.BeamConfig, dt: float = 1e-3, t_end: float | None = None):
    """
    Simulate a step on the beam up to ``t_end`` (default ``10 / mu_min``,
    rounded up to 0.1 s) and fit the last second of 0.1 s snapshots.
    """
    sys = models.beam_fem(cfg)
    if t_end is None:
        mu = simulate.slowest_decay_rate(sys)
        t_end = float(np.ceil(10.0 / mu * 10.0) / 10.0)
    times = np.round(np.arange(t_end - 1.0, t_end + 1e-9, 0.1), 10)
    resp = simulate.step_response(sys, 1.0, t_end, dt, sample_times=times)
    return sys, regress.fit_trend(resp), t_end


def suite_beam(cfg: models.BeamConfig | None = None) -> list[Check]:
    cfg = cfg or models.BeamConfig()
    sys, fit, t_end = beam_fit(cfg)
    tip = sys.n_dof - 2
    _, w1, w0 = oracles.beam_analytic(cfg.L, cfg)
    checks = [
        Check.value("tip w1 = u0/d", fit.w1_hat[tip], w1, 0.02,
                    detail=f"t_end={t_end:g}"),
        Check.value("tip w0 = -rho A L u0/(4 d^2)", fit.w0_hat[tip], w0, 0.02),
        Check.error("tip w2 magnitude", abs(fit.w2_hat[tip]), 1e-4),
    ]
    try:
        algebraic.low_order_algebraic(sys)
        refused = False
    except PreconditionError:
        refused = True
    checks.append(Check("algebraic route refuses (ker D != ker K)", float(refused), 1.0,
                        0.0, refused))
    return checks


def suite_plate(Mx: int = 12, My: int = 16, dt: float = 1e-3) -> list[Check]:
    cfg = models.PlateConfig(Mx=Mx, My=My)
    t0 = time.perf_counter()
    sys = models.plate_bfs_fem(cfg)
    basis = algebraic.kernel_basis(sys.K, sys.M)
    checks = [Check.value("kernel dimension", basis.k, 3, 0.0, relative=False)]
    lom = algebraic.low_order_algebraic(sys, models.plate_kernel(cfg))
    resp = simulate.step_response(sys, 1.0, 4.0, dt, rigid_basis=basis)
    d = sys.displacement_dofs()
    t = resp.times[-1]
    trend = resp.snapshots[:, -1] - 0.5 * t * t * lom.w2[:, 0] - t * lom.w1[:, 0]
    checks.append(Check.error("de-trended w(4) vs w0 (relative max-norm)",
                              rel_max(trend[d], lom.w0[d, 0]), 0.01))
    fit = regress.fit_trend(resp)
    for name, est, ref, target in (("w2", fit.w2_hat, lom.w2, 3e-5),
                                  ("w1", fit.w1_hat, lom.w1, 9e-3),
                                  ("w0", fit.w0_hat, lom.w0, 5e-2)):
        checks.append(Check.error(f"regression {name} relative max-norm error",
                                  rel_max(est[d], ref[d, 0]), 5 * target))
    checks.append(Check.error("runtime [s]", time.perf_counter() - t0, 120.0))
    return checks


SUITES: dict[str, Callable[[], list[Check]]] = {
    "example1": suite_example1,
    "string": suite_string,
    "beam": suite_beam,
    "plate": suite_plate,
}


def run_suite(name: str) -> list[Check]:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return SUITES[name]()


def format_table(checks: list[Check]) -> str:
    rows = [("check", "measured", "expected", "tol", "result")]
    for c in checks:
        rows.append((c.name + (f" ({c.detail})" if c.detail else ""), f"{c.measured:.6g}",
                     f"{c.expected:.6g}", f"{c.tol:.3g}", "PASS" if c.passed else "FAIL"))
    widths = [max(len(r[i]) for r in rows) for i in range(5)]
    return "\n".join("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in rows)

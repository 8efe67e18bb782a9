import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lowfreq import (PreconditionError, SecondOrderSystem, check_consistency, example_ode3,
                     low_order_algebraic, low_order_spectral, low_order_spectral_all,
                     modal_decompose)
from lowfreq.models import BeamConfig, PlateConfig, beam_fem, plate_bfs_fem

from conftest import random_proportional_system


def test_example1_exact():
    lom = low_order_spectral_all(example_ode3())
    np.testing.assert_array_equal(lom.w2[:, 0], [1.0, 0.0, 0.0])
    np.testing.assert_array_equal(lom.w1[:, 0], [0.0, 1.0, 0.0])
    np.testing.assert_array_equal(lom.w0[:, 0], [0.0, -1.0, 1.0])
    assert max(lom.residuals.values()) == 0.0


def test_example1_index_sets():
    modal = modal_decompose(example_ode3())
    assert sorted(modal.lambdas[modal.setI]) == [0.0, 0.0]
    assert modal.setJ.size == 1 and set(modal.setJ) <= set(modal.setI)
    np.testing.assert_allclose(modal.Phi.T @ modal.Phi, np.eye(3), atol=1e-15)


def test_repeated_zero_eigenvalue_is_rediagonalized():
    # an arbitrary rotation inside the double zero eigenvalue would mix
    # damped and undamped rigid modes and make D look non-proportional
    modal = modal_decompose(example_ode3())
    assert modal.proportional and modal.proportional_defect < 1e-14


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), corank=st.integers(1, 3))
def test_routes_agree_on_proportional_systems(seed, corank):
    sys = random_proportional_system(np.random.default_rng(seed), n=12, corank=corank)
    a = low_order_algebraic(sys)
    s = low_order_spectral_all(sys)
    for name in ("w2", "w1", "w0"):
        ref = getattr(a, name)
        assert np.linalg.norm(getattr(s, name) - ref) <= 1e-8 * np.linalg.norm(ref)


def test_damped_rigid_mode_terms():
    # e1 is an undamped rigid mode (in J), e2 a damped rigid mode (in I \ J)
    sys = SecondOrderSystem(np.eye(3), np.diag([0.0, 3.0, 1.0]), np.diag([0.0, 0.0, 2.0]),
                            [1.0, 2.0, 3.0], [0.0, 1.0, 0.0])
    lom = low_order_spectral_all(sys)
    np.testing.assert_allclose(lom.w2[:, 0], [1.0, 0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(lom.w1[:, 0], [0.0, 2.0 / 3.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(lom.w0[:, 0], [0.0, 1.0 / 9.0, 1.5], atol=1e-15)
    assert check_consistency(sys, lom).passed


def test_beam_is_refused_with_route_hint():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        with pytest.raises(PreconditionError, match="regression route"):
            low_order_spectral_all(beam_fem(BeamConfig(n_elem=6)))


def test_damping_outside_stiffness_kernel_is_refused():
    # D vanishes on e2 although K does not: J is not inside I
    sys = SecondOrderSystem(np.eye(2), np.diag([1.0, 0.0]), np.diag([0.0, 1.0]), [1.0, 1.0])
    with pytest.raises(PreconditionError, match="ker D ⊄ ker K"):
        low_order_spectral(modal_decompose(sys), sys)


def test_non_proportional_damping_warns():
    D = np.array([[1.0, 0.5], [0.5, 1.0]])
    sys = SecondOrderSystem(np.eye(2), D, np.diag([1.0, 3.0]), [1.0, 0.0])
    with pytest.warns(RuntimeWarning, match="non-proportional"):
        modal = modal_decompose(sys)
    assert not modal.proportional


def test_sparse_truncated_path_matches_algebraic():
    cfg = PlateConfig(Mx=16, My=30, storage="csr")  # 2108 DOF, above the sparse threshold
    sys = plate_bfs_fem(cfg)
    modal = modal_decompose(sys)
    assert not modal.complete and modal.setI.size == 3
    s = low_order_spectral(modal, sys)
    a = low_order_algebraic(sys)
    for name in ("w2", "w1", "w0"):
        ref = getattr(a, name)
        assert np.abs(getattr(s, name) - ref).max() <= 1e-5 * np.abs(ref).max()

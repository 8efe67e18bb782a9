import numpy as np
import pytest
import scipy.sparse as sp

from lowfreq import (DimensionError, InvalidInputError, LowOrderModel, Route,
                     SecondOrderSystem, StepResponse, check_consistency, example_ode3)
from lowfreq.core import rigid_kernel, zero_cluster


def test_system_rejects_asymmetric_stiffness():
    K = np.array([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(InvalidInputError, match="K is not symmetric"):
        SecondOrderSystem(np.eye(2), np.zeros((2, 2)), K, np.ones(2))


def test_system_rejects_indefinite_mass():
    with pytest.raises(InvalidInputError, match="M is not symmetric positive definite"):
        SecondOrderSystem(np.diag([1.0, -1.0]), np.zeros((2, 2)), np.eye(2), np.ones(2))


def test_system_rejects_indefinite_damping():
    with pytest.raises(InvalidInputError, match="D is not positive semidefinite"):
        SecondOrderSystem(np.eye(2), np.diag([1.0, -1.0]), np.eye(2), np.ones(2))


def test_system_dimension_checks():
    with pytest.raises(DimensionError):
        SecondOrderSystem(np.eye(2), np.zeros((2, 2)), np.eye(2), np.ones(3))
    with pytest.raises(DimensionError):
        SecondOrderSystem(np.eye(2), np.zeros((2, 2)), np.eye(2), np.ones(2), np.ones((2, 2)))


def test_storage_conversion_round_trip():
    sys = example_ode3()
    csr = sys.with_storage("csr")
    assert sp.issparse(csr.K) and csr.storage == "csr"
    np.testing.assert_array_equal(csr.K.toarray(), sys.K)
    assert csr.with_storage("dense").storage == "dense"


def test_channel_out_of_range():
    with pytest.raises(DimensionError):
        example_ode3().channel(1)


def test_low_order_model_shapes_and_evaluate():
    lom = LowOrderModel([1.0, 0.0], [0.0, 1.0], [2.0, 3.0], "algebraic")
    assert lom.w0.shape == (2, 1) and lom.route is Route.ALGEBRAIC
    vals = lom.evaluate([0.0, 2.0])
    np.testing.assert_allclose(vals[:, 0, 1], [2.0 + 2.0, 2.0 + 3.0])
    with pytest.raises(DimensionError):
        LowOrderModel([1.0], [0.0, 1.0], [2.0, 3.0], "algebraic")


def test_step_response_validates_times():
    with pytest.raises(InvalidInputError):
        StepResponse([1.0, 0.5], np.zeros((2, 2)), np.zeros(2), 1.0, 0.1)
    with pytest.raises(DimensionError):
        StepResponse([0.0, 1.0], np.zeros((2, 3)), np.zeros(2), 1.0, 0.1)


def test_zero_cluster_gap_rule():
    vals = np.array([1e-12, 3e-11, 4e4, 1e5, 7e12])
    # the relative cutoff 1e-8 * 7e12 = 7e4 would also swallow 4e4
    np.testing.assert_array_equal(zero_cluster(vals, 1e-8),
                                  [True, True, False, False, False])
    np.testing.assert_array_equal(zero_cluster(np.array([1.0, 2.0]), 1e-8),
                                  [False, False])


def test_rigid_kernel_is_intersection():
    sys = example_ode3()
    V = rigid_kernel(sys)
    assert V.shape == (3, 1)
    np.testing.assert_allclose(np.abs(V[:, 0]), [1.0, 0.0, 0.0], atol=1e-14)


def test_consistency_exact_solution_and_flags():
    sys = example_ode3()
    lom = LowOrderModel([1, 0, 0], [0, 1, 0], [0, -1, 1], "spectral")
    rep = check_consistency(sys, lom)
    assert rep.passed and max(rep.residuals.values()) == 0.0
    bad = LowOrderModel([1, 0, 0], [0, 1, 0], [0, -1, 2], "spectral")
    rep = check_consistency(sys, bad)
    assert not rep.flags["M_w2+D_w1+K_w0-b0"]
    assert rep.flags["K_w2"]


def test_consistency_relative_threshold_scales():
    sys = example_ode3()
    lom = LowOrderModel([1, 0, 0], [0, 1, 0], [0, -1, 1], "spectral")
    rep = check_consistency(sys, lom, tol=1e-8, relative=True)
    assert rep.threshold > 1e-8

import numpy as np
import pytest

from lowfreq import InvalidInputError, kernel_basis
from lowfreq.core import to_dense
from lowfreq import models
from lowfreq.models import BeamConfig, PlateConfig, StringConfig


def test_example_ode3_matrices():
    sys = models.example_ode3()
    np.testing.assert_array_equal(sys.M, np.eye(3))
    np.testing.assert_array_equal(sys.D, np.diag([0.0, 1.0, 1.0]))
    np.testing.assert_array_equal(sys.K, np.diag([0.0, 0.0, 1.0]))
    np.testing.assert_array_equal(sys.b0[:, 0], np.ones(3))
    np.testing.assert_array_equal(sys.b1[:, 0], np.zeros(3))


def test_string_two_elements_hand_assembly():
    sys = models.string_fem(StringConfig(n_elem=2, T=1.0, rho=1.0, d=0.01))
    K = np.array([[2.0, -2.0, 0.0], [-2.0, 4.0, -2.0], [0.0, -2.0, 2.0]])
    M = np.array([[2.0, 1.0, 0.0], [1.0, 4.0, 1.0], [0.0, 1.0, 2.0]]) / 12.0
    np.testing.assert_allclose(to_dense(sys.K), K, rtol=1e-15)
    np.testing.assert_allclose(to_dense(sys.M), M, rtol=1e-15)
    np.testing.assert_allclose(to_dense(sys.D), 0.01 * K, rtol=1e-15)
    np.testing.assert_array_equal(sys.b0[:, 0], [0.0, 0.0, 1.0])
    np.testing.assert_allclose(sys.b1[:, 0], [0.0, 0.0, 0.01])


def test_string_constants_are_exactly_rigid():
    sys = models.string_fem(StringConfig(n_elem=200))
    one = np.ones(sys.n_dof)
    assert np.abs(sys.K @ one).max() == 0.0
    assert np.abs(sys.D @ one).max() == 0.0
    assert one @ (sys.M @ one) == pytest.approx(1.0, rel=1e-14)


def test_string_rejects_nonpositive_coefficient():
    with pytest.raises(InvalidInputError, match="T must be positive"):
        models.string_fem(StringConfig(T=[1.0, -2.0]))


def test_beam_kernel_and_damper():
    cfg = BeamConfig(n_elem=8)
    sys = models.beam_fem(cfg)
    V = models.beam_kernel(cfg)
    assert np.abs(to_dense(sys.K) @ V).max() < 1e-10
    assert kernel_basis(sys.K, sys.M).k == 2
    D = to_dense(sys.D)
    assert D[-2, -2] == cfg.d and np.count_nonzero(D) == 1
    # total mass of the rigid translation
    assert V[:, 0] @ (sys.M @ V[:, 0]) == pytest.approx(cfg.rho_a * cfg.L, rel=1e-13)


@pytest.mark.parametrize("mx,my", [(2, 2), (4, 6)])
def test_plate_dimensions_and_kernel(mx, my):
    cfg = PlateConfig(Mx=mx, My=my)
    sys = models.plate_bfs_fem(cfg)
    assert sys.n_dof == 4 * (mx + 1) * (my + 1)
    V = models.plate_kernel(cfg)
    K = to_dense(sys.K)
    assert np.abs(K @ V).max() <= 1e-9 * np.abs(K).max()
    assert kernel_basis(sys.K, sys.M).k == 3
    mass = V[:, 0] @ (sys.M @ V[:, 0])
    assert mass == pytest.approx(cfg.rho * cfg.h * cfg.L * cfg.W, rel=1e-12)
    np.testing.assert_allclose(to_dense(sys.D), cfg.beta * K)


def test_plate_full_scale_dof_count():
    assert PlateConfig().n_dof == 5084


def test_plate_loads():
    cfg = PlateConfig(Mx=4, My=8)
    lumped = models.plate_load(cfg)
    assert lumped.sum() == 5.0 and np.all(lumped[lumped != 0] == 1.0)
    consistent = models.plate_load(PlateConfig(Mx=4, My=8, load="consistent"))
    assert consistent[0::4].sum() == pytest.approx(cfg.W / 2)


def test_plate_validation():
    with pytest.raises(InvalidInputError, match="even"):
        PlateConfig(My=7).validate()
    with pytest.raises(InvalidInputError, match="Poisson"):
        PlateConfig(nu=0.7).validate()
    with pytest.raises(InvalidInputError, match="stiffness"):
        PlateConfig(stiffness="other").validate()


def test_plate_stiffness_conventions():
    c = PlateConfig()
    p = PlateConfig(stiffness="per_mass")
    assert c.bending_stiffness == pytest.approx(p.bending_stiffness * c.rho * c.h)


def test_config_documents_round_trip():
    cfg = PlateConfig(Mx=6, My=8)
    doc = models.config_to_dict(cfg)
    assert models.config_from_dict("plate", doc) == cfg
    with pytest.raises(InvalidInputError, match="unknown"):
        models.config_from_dict("beam", {"length": 2.0})
    with pytest.raises(InvalidInputError, match="schema"):
        models.config_from_dict("beam", {"schema": 2})

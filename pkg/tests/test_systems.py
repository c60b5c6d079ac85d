import numpy as np
import pytest

from transformer_filter.linalg import spectral_radius
from transformer_filter.systems import (
    CostWeights,
    GainSet,
    LinearSystem,
    assert_stabilizing,
    check_controllability,
    check_observability,
    random_stable_matrix,
    random_system,
    user_gains,
)


def test_observability_identity_single_output_fails():
    assert not check_observability(np.eye(2), np.array([[1.0, 0.0]]))


def test_observability_shift_chain():
    assert check_observability(np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([[1.0, 0.0]]))


def test_observability_scalar():
    assert check_observability(np.array([[7.3]]), np.array([[0.2]]))


def test_controllability_identity_single_input_fails():
    assert not check_controllability(np.eye(2), np.array([[1.0], [0.0]]))


def test_controllability_shift_chain():
    assert check_controllability(np.array([[0.0, 0.0], [1.0, 0.0]]), np.array([[1.0], [0.0]]))


def test_controllability_scalar():
    assert check_controllability(np.array([[-0.4]]), np.array([[2.0]]))


def _plain_system(**overrides):
    fields = dict(
        trans=[[0.5, 0.1], [0.0, 0.4]],
        input_map=[[0.0], [1.0]],
        obs_map=[[1.0, 0.0]],
        w_cov=np.eye(2),
        v_cov=[[1.0]],
        x0=[0.0, 0.0],
    )
    fields.update(overrides)
    return LinearSystem(**fields)


def test_system_accepts_valid():
    sys_ = _plain_system()
    assert sys_.n == 2 and sys_.m == 1 and sys_.p == 1


def test_system_rejects_unobservable():
    with pytest.raises(ValueError, match=r"pair \(A, C\) not observable"):
        _plain_system(trans=np.eye(2))


def test_system_rejects_uncontrollable():
    with pytest.raises(ValueError, match=r"pair \(A, B\) not controllable"):
        _plain_system(trans=[[0.5, 0.0], [0.0, 0.4]], input_map=[[1.0], [0.0]],
                      obs_map=[[1.0, 1.0]])


def test_system_allows_pure_filtering():
    sys_ = _plain_system(input_map=np.zeros((2, 0)))
    assert sys_.m == 0


def test_system_rejects_indefinite_w():
    with pytest.raises(ValueError, match="w_cov"):
        _plain_system(w_cov=[[1.0, 0.0], [0.0, -0.5]])


def test_system_rejects_semidefinite_v():
    with pytest.raises(ValueError, match="v_cov"):
        _plain_system(v_cov=[[0.0]])


def test_system_rejects_nonfinite():
    with pytest.raises(ValueError):
        _plain_system(trans=[[np.nan, 0.0], [0.0, 0.4]])


def test_cost_weights_validation():
    CostWeights(state_weight=np.zeros((2, 2)), control_weight=np.eye(1))
    with pytest.raises(ValueError, match="control_weight"):
        CostWeights(state_weight=np.eye(2), control_weight=np.zeros((1, 1)))


def test_gain_set_flags():
    gains = GainSet(estimator_gain=np.zeros((2, 1)))
    assert gains.has_estimator and not gains.has_feedback
    both = GainSet(estimator_gain=np.zeros((2, 1)), feedback_gain=np.zeros((1, 2)))
    assert both.has_feedback


def test_user_gains_accept_stabilizing():
    sys_ = _plain_system()
    gains = user_gains(sys_, np.zeros((2, 1)), np.zeros((1, 2)))
    assert gains.provenance == "user-supplied"


def test_user_gains_reject_destabilizing_estimator():
    sys_ = _plain_system(trans=[[1.5, 0.1], [0.0, 0.4]])
    with pytest.raises(ValueError, match="stabilizing measurement-feedback pair"):
        user_gains(sys_, np.zeros((2, 1)))


def test_user_gains_reject_destabilizing_feedback():
    sys_ = _plain_system()
    with pytest.raises(ValueError, match="A \\+ B K"):
        user_gains(sys_, np.zeros((2, 1)), np.array([[0.0, 10.0]]))


def test_assert_stabilizing_rejects_marginal():
    sys_ = _plain_system(trans=[[1.0, 0.1], [0.0, 0.4]])
    with pytest.raises(ValueError):
        assert_stabilizing(sys_, np.zeros((2, 1)))


def test_user_gains_shape_checks():
    sys_ = _plain_system()
    with pytest.raises(ValueError, match="estimator_gain"):
        user_gains(sys_, np.zeros((1, 1)))
    with pytest.raises(ValueError, match="feedback_gain"):
        user_gains(sys_, np.zeros((2, 1)), np.zeros((2, 2)))


def test_random_stable_matrix_radius_in_range():
    rng = np.random.default_rng(21)
    for _ in range(25):
        mat = random_stable_matrix(rng, 4)
        assert 0.3 - 1e-9 <= spectral_radius(mat) <= 0.95 + 1e-9


def test_random_system_satisfies_rank_conditions():
    rng = np.random.default_rng(22)
    for _ in range(10):
        sys_ = random_system(rng, n=3, m=2, p=2)
        assert check_observability(sys_.trans, sys_.obs_map)
        assert check_controllability(sys_.trans, sys_.input_map)

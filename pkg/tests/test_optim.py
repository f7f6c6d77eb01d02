import numpy as np
import pytest
from hypothesis import given, strategies as st

from liftembed import optim
from liftembed.exceptions import ConfigurationError, TrainingError
from liftembed.shock_infer import SpeedGrid, extended_decay_mask
from liftembed.network import init_network

from oracles import adam_scalar


def test_adam_matches_scalar_oracle_for_100_steps(rng):
    grads = rng.normal(size=(100, 3))
    state = optim.OptimState(3, weight_decay=0.0)
    p = np.array([0.5, -1.0, 2.0])
    traj = []
    for g in grads:
        p = optim.step(state, p, g)
        traj.append(p)
    traj = np.array(traj)
    for j, p0 in enumerate([0.5, -1.0, 2.0]):
        ref = adam_scalar(p0, grads[:, j])
        assert np.max(np.abs(traj[:, j] - ref)) <= 1e-14


def test_zero_gradient_without_decay_is_identity():
    state = optim.OptimState(2, weight_decay=0.0)
    p = np.array([1.0, -2.0])
    assert np.array_equal(optim.step(state, p, np.zeros(2)), p)


def test_decoupled_decay_single_param():
    state = optim.OptimState(1, weight_decay=0.01)
    assert optim.step(state, np.array([1.0]), np.zeros(1))[0] == pytest.approx(0.9999, abs=1e-15)


def test_first_step_unit_gradient():
    state = optim.OptimState(1, weight_decay=0.0)
    p = optim.step(state, np.array([0.0]), np.array([1.0]))[0]
    assert p == pytest.approx(-0.01 / (1 + 1e-8), abs=1e-16)


def test_biases_and_speeds_are_not_decayed():
    net = init_network(2, 3, 3, 0)
    grid = SpeedGrid(0.5, 0.02, 1.0, np.full(26, 0.3))
    mask = extended_decay_mask(net.weight_mask(), grid)
    state = optim.OptimState(mask.size, decay_mask=mask)
    p = np.concatenate([net.params + 0.5, grid.values])
    out = optim.step(state, p, np.zeros(p.size))
    assert np.array_equal(out[~mask], p[~mask])
    assert np.all(np.abs(out[mask]) < np.abs(p[mask]))
    assert np.array_equal(out[-26:], grid.values)


def test_lr_schedule_examples():
    state = optim.OptimState(1, milestones=(8000, 14000))
    assert optim.lr_at(state, 0) == 0.01
    assert optim.lr_at(state, 8000) == pytest.approx(0.001, rel=1e-15)
    assert optim.lr_at(optim.OptimState(1), 10**6) == 0.01
    assert optim.default_milestones(20000) == (8000, 14000)


@given(st.lists(st.integers(0, 1000), max_size=4), st.integers(0, 999))
def test_lr_is_non_increasing(milestones, epoch):
    state = optim.OptimState(1, milestones=tuple(milestones))
    assert optim.lr_at(state, epoch + 1) <= optim.lr_at(state, epoch)


@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=30))
def test_second_moment_stays_non_negative(gs):
    state = optim.OptimState(1)
    p = np.zeros(1)
    for g in gs:
        p = optim.step(state, p, np.array([g]))
        assert state.v[0] >= 0.0


def test_non_finite_gradient_names_index():
    state = optim.OptimState(3)
    with pytest.raises(TrainingError, match="index 2"):
        optim.step(state, np.zeros(3), np.array([0.0, 1.0, np.inf]))


def test_bad_state():
    with pytest.raises(ConfigurationError):
        optim.OptimState(2, lr=0.0)
    with pytest.raises(ConfigurationError):
        optim.OptimState(2, decay_mask=np.ones(3, dtype=bool))

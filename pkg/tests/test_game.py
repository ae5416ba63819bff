"""Game layer: schedules, the coupled recursion, rollouts, serialization.

The scalar fixture (A = B1 = B2 = 1, Q = 1, own control weight 1, T = 2)
has a closed-form equilibrium: stage curvature [[2, 1], [1, 2]], joint gain
(-1/3, -1/3), per-player cost 2/9.  Most oracles below are frozen from that
arithmetic.
"""

import numpy as np
import pytest

from previewnash import (
    CostDifference,
    DimensionMismatchError,
    IndexOutOfRangeError,
    ThetaNotPDError,
    cost_difference_check,
    cost_schedule,
    evaluate_cost,
    game_spec,
    nash_from_dict,
    nash_to_dict,
    simulate,
    solve_feedback_nash,
    spec_from_dict,
    spec_to_dict,
    verify_nash_by_deviation,
    with_costs,
)

from conftest import make_loose_game


# ---------------------------------------------------------------- schedules

def test_schedule_indexing_conventions(scalar_spec_t3):
    costs = scalar_spec_t3.costs
    assert costs.horizon == 3
    # state weights live at t = 2..T, control weights at t = 1..T-1
    costs.q(2), costs.q(3), costs.r(1, 1), costs.r(2, 2)
    for bad in (1, 4):
        with pytest.raises(IndexOutOfRangeError):
            costs.q(bad)
    for bad in (0, 3):
        with pytest.raises(IndexOutOfRangeError):
            costs.r(1, bad)
    with pytest.raises(ValueError):
        costs.r(3, 1)


def test_schedule_validation():
    q = [[1.0]]
    r = [[1.0, 0.0], [0.0, 1.0]]
    with pytest.raises(DimensionMismatchError):
        cost_schedule([q, q], [r], [r])  # length mismatch
    with pytest.raises(DimensionMismatchError):
        cost_schedule([q], [[[1.0]]], [[[1.0]]])  # odd control dimension
    with pytest.raises(DimensionMismatchError):
        cost_schedule([[[0.0, 1.0], [0.0, 0.0]]], [r], [r])  # asymmetric Q
    with pytest.raises(DimensionMismatchError):
        cost_schedule([q], [[[-1.0, 0.0], [0.0, 1.0]]], [r])  # indefinite R
    # indefinite Q is allowed at this layer; assumption checks report on it
    cost_schedule([[[1.0, 3.0], [3.0, 0.0]]],
                  [np.eye(2)], [np.eye(2)])


def test_schedule_matrices_are_frozen(scalar_spec):
    with pytest.raises(ValueError):
        scalar_spec.costs.q(2)[0, 0] = 5.0
    with pytest.raises(ValueError):
        scalar_spec.A[0, 0] = 2.0


def test_game_spec_validation(scalar_spec):
    costs = scalar_spec.costs
    with pytest.raises(DimensionMismatchError):
        game_spec([[1.0, 0.0]], [[1.0]], [[1.0]], [1.0], costs)
    with pytest.raises(ValueError):
        game_spec([[1.0]], [[1.0], [0.0]], [[1.0]], [1.0], costs)
    with pytest.raises(ValueError):
        game_spec([[1.0]], [[1.0]], [[1.0]], [1.0, 2.0], costs)
    with pytest.raises(TypeError):
        game_spec([[1.0]], [[1.0]], [[1.0]], [1.0], {"Q": []})
    wide = cost_schedule([np.eye(2)], [np.eye(2)], [np.eye(2)])
    with pytest.raises(DimensionMismatchError):
        game_spec([[1.0]], [[1.0]], [[1.0]], [1.0], wide)


def test_with_costs_keeps_horizon(scalar_spec, scalar_spec_t3):
    swapped = with_costs(scalar_spec, scalar_spec.costs)
    assert swapped.T == 2
    with pytest.raises(DimensionMismatchError):
        with_costs(scalar_spec, scalar_spec_t3.costs)


# ---------------------------------------------------------------- the solver

def test_scalar_equilibrium_closed_form(scalar_spec):
    nash = solve_feedback_nash(scalar_spec)
    assert np.allclose(nash.gain(1), [[-1.0 / 3.0], [-1.0 / 3.0]], atol=1e-14)
    assert np.allclose(nash.value(1, 2), [[1.0]])
    assert np.allclose(nash.value(2, 2), [[1.0]])
    assert nash.theta_min_eig == pytest.approx((1.0,))
    assert nash.x_star[1, 0] == pytest.approx(1.0 / 3.0, abs=1e-15)
    assert np.allclose(nash.u_star[0], [-1.0 / 3.0, -1.0 / 3.0])
    assert evaluate_cost(scalar_spec, 1, nash.x_star, nash.u_star) == pytest.approx(2.0 / 9.0)
    assert evaluate_cost(scalar_spec, 2, nash.x_star, nash.u_star) == pytest.approx(2.0 / 9.0)


def test_scalar_three_step_values(scalar_spec_t3):
    # backward pass by hand: P_3 = 1, K_2 = (-1/3, -1/3), P_2 = 11/9,
    # then K_1 = -(11/31, 11/31)
    nash = solve_feedback_nash(scalar_spec_t3)
    assert np.allclose(nash.value(1, 2), [[11.0 / 9.0]], atol=1e-14)
    assert np.allclose(nash.gain(2), [[-1.0 / 3.0], [-1.0 / 3.0]], atol=1e-14)
    assert np.allclose(nash.gain(1), [[-11.0 / 31.0], [-11.0 / 31.0]], atol=1e-14)


def test_solution_index_bounds(scalar_spec):
    nash = solve_feedback_nash(scalar_spec)
    with pytest.raises(IndexOutOfRangeError):
        nash.gain(0)
    with pytest.raises(IndexOutOfRangeError):
        nash.gain(2)
    with pytest.raises(IndexOutOfRangeError):
        nash.value(1, 1)
    with pytest.raises(IndexOutOfRangeError):
        nash.value(1, 3)


def test_singular_curvature_is_rejected():
    # zero control weights leave the curvature [[1, 1], [1, 1]], singular
    costs = cost_schedule([[[1.0]]], [np.zeros((2, 2))], [np.zeros((2, 2))])
    spec = game_spec([[1.0]], [[1.0]], [[1.0]], [1.0], costs)
    with pytest.raises(ThetaNotPDError) as exc:
        solve_feedback_nash(spec)
    assert exc.value.stage == 1
    assert exc.value.min_pivot < 1e-9


def test_value_matrices_track_cost_to_go():
    # P_t^i must price the equilibrium tail: x_t' P_t^i x_t equals the
    # remaining cost of player i from stage t on
    rng = np.random.default_rng(3)
    for _ in range(8):
        spec = make_loose_game(rng, T_max=6)
        nash = solve_feedback_nash(spec)
        for player in (1, 2):
            for t in range(2, spec.T + 1):
                xt = nash.x_star[t - 1]
                # the stage-t value prices Q at t..T and controls at t..T-1
                tail_states = sum(
                    float(nash.x_star[k - 1] @ spec.costs.q(k) @ nash.x_star[k - 1])
                    for k in range(t, spec.T + 1)
                )
                tail_controls = sum(
                    float(nash.u_star[k - 1] @ spec.costs.r(player, k) @ nash.u_star[k - 1])
                    for k in range(t, spec.T)
                )
                want = float(xt @ nash.value(player, t) @ xt)
                assert want == pytest.approx(tail_states + tail_controls, rel=1e-9, abs=1e-9)


# ---------------------------------------------------------------- rollouts

def test_simulate_matches_hand_rollout(scalar_spec):
    x = simulate(scalar_spec, [[0.25, -0.5]])
    assert np.allclose(x, [[1.0], [0.75]])
    with pytest.raises(DimensionMismatchError):
        simulate(scalar_spec, [[0.25]])


def test_evaluate_cost_hand_value(scalar_spec):
    x = [[1.0], [2.0]]
    u = [[3.0, 4.0]]
    # J1 = 2^2 * 1 + 3^2 * 1, J2 = 4 + 16
    assert evaluate_cost(scalar_spec, 1, x, u) == pytest.approx(13.0)
    assert evaluate_cost(scalar_spec, 2, x, u) == pytest.approx(20.0)
    with pytest.raises(DimensionMismatchError):
        evaluate_cost(scalar_spec, 1, [[1.0]], u)


def test_deviation_increases_cost_quadratically(scalar_spec):
    nash = solve_feedback_nash(scalar_spec)
    check = verify_nash_by_deviation(scalar_spec, nash, stage=1, player=1,
                                     deviation=[0.5])
    assert check.cost_at_nash == pytest.approx(2.0 / 9.0)
    # own-block curvature is 2, so the penalty is 2 * 0.5^2
    assert check.cost_deviated - check.cost_at_nash == pytest.approx(0.5, abs=1e-12)
    check2 = verify_nash_by_deviation(scalar_spec, nash, 1, 2, [-0.25])
    assert check2.cost_deviated - check2.cost_at_nash == pytest.approx(2 * 0.0625, abs=1e-12)


def test_deviation_argument_validation(scalar_spec):
    nash = solve_feedback_nash(scalar_spec)
    with pytest.raises(IndexOutOfRangeError):
        verify_nash_by_deviation(scalar_spec, nash, 0, 1, [0.1])
    with pytest.raises(IndexOutOfRangeError):
        verify_nash_by_deviation(scalar_spec, nash, 2, 1, [0.1])
    with pytest.raises(ValueError):
        verify_nash_by_deviation(scalar_spec, nash, 1, 3, [0.1])
    with pytest.raises(ValueError):
        verify_nash_by_deviation(scalar_spec, nash, 1, 1, [0.1, 0.2])


def test_cost_difference_matches_direct_gap(scalar_spec):
    nash = solve_feedback_nash(scalar_spec)
    nash_gains = [nash.gain(1)]
    zero_gains = [np.zeros((2, 1))]
    diff = cost_difference_check(scalar_spec, nash_gains, zero_gains, player=1)
    assert isinstance(diff, CostDifference)
    # J1(nash) - J1(zero) = 2/9 - 1
    assert diff.lhs == pytest.approx(-7.0 / 9.0)
    assert diff.rhs == pytest.approx(diff.lhs, abs=1e-12)


def test_cost_difference_identity_on_random_policies():
    rng = np.random.default_rng(11)
    for _ in range(10):
        spec = make_loose_game(rng, T_max=6)
        shape = (2 * spec.m, spec.n)
        ka = [rng.uniform(-0.6, 0.6, size=shape) for _ in range(spec.T - 1)]
        kb = [rng.uniform(-0.6, 0.6, size=shape) for _ in range(spec.T - 1)]
        for player in (1, 2):
            diff = cost_difference_check(spec, ka, kb, player)
            assert diff.lhs == pytest.approx(diff.rhs, abs=1e-9)


def test_cost_difference_validates_gain_count(scalar_spec):
    with pytest.raises(DimensionMismatchError):
        cost_difference_check(scalar_spec, [], [np.zeros((2, 1))], 1)


# ------------------------------------------------------------ serialization

def test_spec_round_trip(scalar_spec):
    data = spec_to_dict(scalar_spec)
    assert set(data) == {"n", "m", "T", "A", "B1", "B2", "x1", "Q", "R1", "R2"}
    back = spec_from_dict(data)
    assert back.n == 1 and back.m == 1 and back.T == 2
    assert np.array_equal(back.A, scalar_spec.A)
    assert np.array_equal(back.costs.q(2), scalar_spec.costs.q(2))
    assert np.array_equal(back.x1, scalar_spec.x1)


def test_spec_from_dict_rejects_malformed():
    with pytest.raises((KeyError, ValueError)):
        spec_from_dict({"n": 1})


def test_nash_round_trip(scalar_spec):
    nash = solve_feedback_nash(scalar_spec)
    back = nash_from_dict(nash_to_dict(nash))
    assert np.allclose(back.gain(1), nash.gain(1))
    assert np.allclose(back.value(2, 2), nash.value(2, 2))
    assert np.allclose(back.x_star, nash.x_star)
    assert back.theta_min_eig == pytest.approx(nash.theta_min_eig)


def test_round_trip_solution_still_verifies(scalar_spec):
    nash = nash_from_dict(nash_to_dict(solve_feedback_nash(scalar_spec)))
    check = verify_nash_by_deviation(scalar_spec, nash, 1, 1, [0.3])
    assert check.cost_deviated >= check.cost_at_nash - 1e-12

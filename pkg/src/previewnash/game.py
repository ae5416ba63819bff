"""Two-player linear-quadratic dynamic game on a shared linear system.

Players 1 and 2 jointly drive x_{t+1} = A x_t + B u_t, where B = [B1 B2]
stacks the per-player input maps and u_t is the joint control.  Player i
pays sum over t = 1..T-1 of x_{t+1}' Q_{t+1} x_{t+1} + u_t' R_t^i u_t.
This module holds the data model, simulation and cost evaluation, the
coupled-Riccati feedback Nash solver, and two oracles used to certify the
equilibrium property (stage-wise deviations, and the policy cost-difference
identity).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np

from . import linalg
from .linalg import DEFAULT_TOLERANCES, Tolerances

__all__ = [
    "DimensionMismatchError",
    "ThetaNotPDError",
    "IndexOutOfRangeError",
    "CostSchedule",
    "GameSpec",
    "NashSolution",
    "DeviationCheck",
    "CostDifference",
    "cost_schedule",
    "game_spec",
    "with_costs",
    "simulate",
    "evaluate_cost",
    "solve_feedback_nash",
    "verify_nash_by_deviation",
    "cost_difference_check",
    "spec_to_dict",
    "spec_from_dict",
    "nash_to_dict",
    "nash_from_dict",
]


class DimensionMismatchError(ValueError):
    pass


class IndexOutOfRangeError(IndexError):
    pass


class ThetaNotPDError(RuntimeError):
    """The stage curvature matrix failed its positive-definiteness check.

    Without it the stage solve is not certified to have a unique answer, so
    this is a hard error rather than a warning.
    """

    def __init__(self, stage: int, min_pivot: float):
        self.stage = stage
        self.min_pivot = min_pivot
        super().__init__(
            f"stage {stage}: joint curvature matrix is not positive definite "
            f"(min pivot {min_pivot:.3e})"
        )


@dataclass(frozen=True)
class CostSchedule:
    """Time-indexed cost matrices.

    Q[k] weighs the state x_{k+2}, so the Q list covers stages 2..T.
    R1[k] and R2[k] weigh the joint control at stage k+1 (stages 1..T-1);
    each is 2m x 2m with the block layout [[R_11, R_12], [R_21, R_22]],
    blocks of size m x m.
    """

    Q: tuple
    R1: tuple
    R2: tuple

    @property
    def horizon(self) -> int:
        return len(self.Q) + 1

    def q(self, t: int) -> np.ndarray:
        """State weight Q_t, valid for t = 2..T."""
        if not 2 <= t <= self.horizon:
            raise IndexOutOfRangeError(f"Q_{t}: valid stages are 2..{self.horizon}")
        return self.Q[t - 2]

    def r(self, player: int, t: int) -> np.ndarray:
        """Control weight R_t^player, valid for t = 1..T-1."""
        if not 1 <= t <= self.horizon - 1:
            raise IndexOutOfRangeError(f"R_{t}: valid stages are 1..{self.horizon - 1}")
        if player == 1:
            return self.R1[t - 1]
        if player == 2:
            return self.R2[t - 1]
        raise ValueError(f"player must be 1 or 2, got {player}")


def _freeze(m: np.ndarray) -> np.ndarray:
    m.flags.writeable = False
    return m


def cost_schedule(Q: Sequence, R1: Sequence, R2: Sequence, tol: Tolerances | None = None) -> CostSchedule:
    """Validate and freeze a cost schedule.

    Q entries must be symmetric (within the symmetry tolerance; definiteness
    is deliberately NOT required here, assumption checking reports on it).
    R entries must be symmetric positive semi-definite with even dimension.
    """
    tol = tol or DEFAULT_TOLERANCES
    if len(Q) != len(R1) or len(Q) != len(R2) or len(Q) == 0:
        raise DimensionMismatchError(
            f"schedule lengths must match and be >= 1, got |Q|={len(Q)}, |R1|={len(R1)}, |R2|={len(R2)}"
        )
    n = np.asarray(Q[0], dtype=float).shape[0]
    two_m = np.asarray(R1[0], dtype=float).shape[0]
    if two_m % 2 != 0 or two_m == 0:
        raise DimensionMismatchError(f"R matrices must be 2m x 2m, got {two_m} rows")

    q_out, r1_out, r2_out = [], [], []
    for k, qk in enumerate(Q):
        q = linalg.as_matrix(qk, n, n, name=f"Q_{k + 2}")
        if linalg.two_norm(q - q.T) > tol.symmetry:
            raise DimensionMismatchError(f"Q_{k + 2} is not symmetric within tolerance")
        q_out.append(_freeze(q))
    for player, rs, out in ((1, R1, r1_out), (2, R2, r2_out)):
        for k, rk in enumerate(rs):
            r = linalg.as_matrix(rk, two_m, two_m, name=f"R_{k + 1}^{player}")
            if linalg.two_norm(r - r.T) > tol.symmetry:
                raise DimensionMismatchError(f"R_{k + 1}^{player} is not symmetric within tolerance")
            if float(linalg.sym_eig(r)[0]) < -tol.pd_pivot:
                raise DimensionMismatchError(f"R_{k + 1}^{player} is not positive semi-definite")
            out.append(_freeze(r))
    return CostSchedule(Q=tuple(q_out), R1=tuple(r1_out), R2=tuple(r2_out))


@dataclass(frozen=True)
class GameSpec:
    """The ground-truth game: system, horizon, initial state, full costs.

    Stages run 1..T with controls applied at 1..T-1.
    """

    n: int
    m: int
    T: int
    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    x1: np.ndarray
    costs: CostSchedule

    def joint_b(self) -> np.ndarray:
        """B = [B1 B2], n x 2m."""
        return np.hstack((self.B1, self.B2))


def game_spec(A, B1, B2, x1, costs: CostSchedule, tol: Tolerances | None = None) -> GameSpec:
    """Validate dimensions and assemble a GameSpec."""
    a = linalg.as_matrix(A, name="A")
    n = a.shape[0]
    if a.shape[1] != n:
        raise DimensionMismatchError(f"A must be square, got {a.shape}")
    b1 = linalg.as_matrix(B1, rows=n, name="B1")
    m = b1.shape[1]
    b2 = linalg.as_matrix(B2, rows=n, cols=m, name="B2")
    x0 = linalg.as_vector(x1, length=n, name="x1")
    if not isinstance(costs, CostSchedule):
        raise TypeError("costs must be a CostSchedule")
    T = costs.horizon
    if T < 2:
        raise DimensionMismatchError("horizon must be at least 2")
    if costs.q(2).shape[0] != n:
        raise DimensionMismatchError(
            f"state weights are {costs.q(2).shape[0]}-dimensional but A is {n}x{n}"
        )
    if costs.r(1, 1).shape[0] != 2 * m:
        raise DimensionMismatchError(
            f"control weights are {costs.r(1, 1).shape[0]}-dimensional but 2m = {2 * m}"
        )
    return GameSpec(n=n, m=m, T=T, A=_freeze(a), B1=_freeze(b1), B2=_freeze(b2),
                    x1=_freeze(x0), costs=costs)


def with_costs(spec: GameSpec, costs: CostSchedule) -> GameSpec:
    """Same system and start, different (already validated) cost schedule."""
    if costs.horizon != spec.T:
        raise DimensionMismatchError("replacement schedule must keep the horizon")
    return replace(spec, costs=costs)


@dataclass(frozen=True)
class NashSolution:
    """Feedback Nash equilibrium of a GameSpec.

    K[k] is the joint gain at stage k+1 (2m x n, rows 1..m player 1, rows
    m+1..2m player 2).  P1[k], P2[k] are the stage-(k+2) value matrices.
    x_star is (T, n), u_star is (T-1, 2m).  theta_min_eig records the
    smallest eigenvalue of each stage's curvature matrix.
    """

    K: tuple
    P1: tuple
    P2: tuple
    x_star: np.ndarray
    u_star: np.ndarray
    theta_min_eig: tuple

    def gain(self, t: int) -> np.ndarray:
        """Joint gain K_t, valid for t = 1..T-1."""
        if not 1 <= t <= len(self.K):
            raise IndexOutOfRangeError(f"K_{t}: valid stages are 1..{len(self.K)}")
        return self.K[t - 1]

    def value(self, player: int, t: int) -> np.ndarray:
        """Value matrix P_t^player, valid for t = 2..T."""
        ps = self.P1 if player == 1 else self.P2
        if not 2 <= t <= len(ps) + 1:
            raise IndexOutOfRangeError(f"P_{t}: valid stages are 2..{len(ps) + 1}")
        return ps[t - 2]


def simulate(spec: GameSpec, controls) -> np.ndarray:
    """Roll the system forward from x1 under the given joint controls.

    Returns the (T, n) state sequence.
    """
    u = np.asarray(controls, dtype=float)
    if u.shape != (spec.T - 1, 2 * spec.m):
        raise DimensionMismatchError(
            f"controls must be ({spec.T - 1}, {2 * spec.m}), got {u.shape}"
        )
    b = spec.joint_b()
    x = np.empty((spec.T, spec.n))
    x[0] = spec.x1
    for k in range(spec.T - 1):
        x[k + 1] = spec.A @ x[k] + b @ u[k]
    return x


def evaluate_cost(spec: GameSpec, player: int, states, controls) -> float:
    """Cost J_player along a trajectory: terminal-free, weights x_2..x_T and u_1..u_{T-1}."""
    x = np.asarray(states, dtype=float)
    u = np.asarray(controls, dtype=float)
    if x.shape != (spec.T, spec.n):
        raise DimensionMismatchError(f"states must be ({spec.T}, {spec.n}), got {x.shape}")
    if u.shape != (spec.T - 1, 2 * spec.m):
        raise DimensionMismatchError(
            f"controls must be ({spec.T - 1}, {2 * spec.m}), got {u.shape}"
        )
    total = 0.0
    for k in range(spec.T - 1):
        xn = x[k + 1]
        uk = u[k]
        total += float(xn @ spec.costs.q(k + 2) @ xn) + float(uk @ spec.costs.r(player, k + 1) @ uk)
    return total


def _stage_theta(r1, r2, B1, B2, p1_next, p2_next) -> np.ndarray:
    """Stage curvature matrix: R blocks plus the players' input-channel value terms."""
    m = B1.shape[1]
    g11 = B1.T @ p1_next @ B1
    g12 = B1.T @ p1_next @ B2
    g21 = B2.T @ p2_next @ B1
    g22 = B2.T @ p2_next @ B2
    theta = np.empty((2 * m, 2 * m))
    theta[:m, :m] = r1[:m, :m] + g11
    theta[:m, m:] = r1[:m, m:] + g12
    theta[m:, :m] = r2[m:, :m] + g21
    theta[m:, m:] = r2[m:, m:] + g22
    return theta


def solve_feedback_nash(spec: GameSpec, tol: Tolerances | None = None) -> NashSolution:
    """Backward coupled-Riccati pass, then a forward rollout.

    At each stage the joint gain solves Theta_t K_t = -[B1' P1; B2' P2] A,
    with Theta_t assembled from the control weights and next-stage value
    matrices; value matrices update through the closed loop A + B K_t.
    The terminal condition is P_T^1 = P_T^2 = Q_T.  Raises ThetaNotPDError
    if any stage's curvature matrix fails certification.
    """
    tol = tol or DEFAULT_TOLERANCES
    T, n, m = spec.T, spec.n, spec.m
    a = spec.A
    b1, b2 = spec.B1, spec.B2
    b = spec.joint_b()
    costs = spec.costs

    p1 = [None] * (T + 1)
    p2 = [None] * (T + 1)
    p1[T] = costs.q(T)
    p2[T] = costs.q(T)
    gains = [None] * T
    theta_min = [0.0] * T

    for t in range(T - 1, 0, -1):
        r1t = costs.r(1, t)
        r2t = costs.r(2, t)
        theta = _stage_theta(r1t, r2t, b1, b2, p1[t + 1], p2[t + 1])
        check = linalg.cholesky_pd(theta, tol.pd_pivot)
        if not check.is_pd:
            raise ThetaNotPDError(t, check.min_pivot)
        theta_min[t] = float(linalg.sym_eig(theta)[0])
        rhs = np.vstack((b1.T @ p1[t + 1], b2.T @ p2[t + 1])) @ a
        kt = -linalg.solve_linear(theta, rhs)
        gains[t] = kt
        if t >= 2:
            closed = a + b @ kt
            qt = costs.q(t)
            p1[t] = linalg.symmetrize(qt + kt.T @ r1t @ kt + closed.T @ p1[t + 1] @ closed)
            p2[t] = linalg.symmetrize(qt + kt.T @ r2t @ kt + closed.T @ p2[t + 1] @ closed)

    x = np.empty((T, n))
    u = np.empty((T - 1, 2 * m))
    x[0] = spec.x1
    for k in range(T - 1):
        u[k] = gains[k + 1] @ x[k]
        x[k + 1] = a @ x[k] + b @ u[k]

    for arr in (x, u):
        if not np.all(np.isfinite(arr)):
            raise ThetaNotPDError(0, float("nan"))  # pragma: no cover - defensive

    return NashSolution(
        K=tuple(gains[1:]),
        P1=tuple(p1[2:]),
        P2=tuple(p2[2:]),
        x_star=_freeze(x),
        u_star=_freeze(u),
        theta_min_eig=tuple(theta_min[1:]),
    )


class DeviationCheck(NamedTuple):
    cost_at_nash: float
    cost_deviated: float


def verify_nash_by_deviation(spec: GameSpec, nash: NashSolution, stage: int,
                             player: int, deviation) -> DeviationCheck:
    """Cost effect of a one-shot control deviation at the given stage.

    The equilibrium trajectory is replayed up to the stage; there the
    deviating player adds `deviation` to their equilibrium control while the
    other player's feedback policy is evaluated at the (unchanged) state.
    From the next stage on, BOTH equilibrium feedback policies act on the
    realized, perturbed states.  When the solution is a genuine equilibrium
    the deviated cost can only be higher.
    """
    T, m = spec.T, spec.m
    if not 1 <= stage <= T - 1:
        raise IndexOutOfRangeError(f"stage must be in 1..{T - 1}, got {stage}")
    if player not in (1, 2):
        raise ValueError(f"player must be 1 or 2, got {player}")
    dev = linalg.as_vector(deviation, length=m, name="deviation")

    a = spec.A
    b = spec.joint_b()
    x = np.empty((T, spec.n))
    u = np.empty((T - 1, 2 * m))
    x[:stage] = nash.x_star[:stage]
    u[:stage - 1] = nash.u_star[:stage - 1]

    ut = np.array(nash.gain(stage) @ x[stage - 1])
    rows = slice(0, m) if player == 1 else slice(m, 2 * m)
    ut[rows] += dev
    u[stage - 1] = ut
    x[stage] = a @ x[stage - 1] + b @ ut
    for t in range(stage + 1, T):
        u[t - 1] = nash.gain(t) @ x[t - 1]
        x[t] = a @ x[t - 1] + b @ u[t - 1]

    return DeviationCheck(
        cost_at_nash=evaluate_cost(spec, player, nash.x_star, nash.u_star),
        cost_deviated=evaluate_cost(spec, player, x, u),
    )


class CostDifference(NamedTuple):
    lhs: float
    rhs: float


def _rollout_gains(spec: GameSpec, gains) -> tuple[np.ndarray, np.ndarray]:
    a = spec.A
    b = spec.joint_b()
    x = np.empty((spec.T, spec.n))
    u = np.empty((spec.T - 1, 2 * spec.m))
    x[0] = spec.x1
    for k in range(spec.T - 1):
        u[k] = gains[k] @ x[k]
        x[k + 1] = a @ x[k] + b @ u[k]
    return x, u


def _stage_cost(spec: GameSpec, player: int, t: int, x: np.ndarray, u: np.ndarray) -> float:
    """Stage cost with the successor-state term folded in: c_t(x, u)."""
    xn = spec.A @ x + spec.joint_b() @ u
    return float(xn @ spec.costs.q(t + 1) @ xn) + float(u @ spec.costs.r(player, t) @ u)


def _value_under(spec: GameSpec, player: int, gains, t: int, x: np.ndarray) -> float:
    """Cost-to-go from stage t, state x, playing the given gains to the end.

    Stage T has no control and no remaining cost, so the value there is 0.
    """
    total = 0.0
    xt = x
    for s in range(t, spec.T):
        us = gains[s - 1] @ xt
        total += _stage_cost(spec, player, s, xt, us)
        xt = spec.A @ xt + spec.joint_b() @ us
    return total


def cost_difference_check(spec: GameSpec, policies_a, policies_b, player: int) -> CostDifference:
    """Both sides of the policy cost-difference identity.

    lhs is the direct cost gap J(a) - J(b).  rhs re-derives it stage by
    stage along the a-trajectory: the one-step advantage of playing a's
    control now and b thereafter, versus playing b from the current state.
    The two must agree for ANY pair of linear feedback policies, which makes
    this a strong independent oracle for the cost and rollout plumbing.
    """
    ka = [linalg.as_matrix(g, 2 * spec.m, spec.n, name="policy_a gain") for g in policies_a]
    kb = [linalg.as_matrix(g, 2 * spec.m, spec.n, name="policy_b gain") for g in policies_b]
    if len(ka) != spec.T - 1 or len(kb) != spec.T - 1:
        raise DimensionMismatchError(f"need {spec.T - 1} gains per policy")

    xa, ua = _rollout_gains(spec, ka)
    xb, ub = _rollout_gains(spec, kb)
    lhs = evaluate_cost(spec, player, xa, ua) - evaluate_cost(spec, player, xb, ub)

    rhs = 0.0
    for t in range(1, spec.T):
        xt = xa[t - 1]
        ut = ua[t - 1]
        x_next = spec.A @ xt + spec.joint_b() @ ut
        q_val = _stage_cost(spec, player, t, xt, ut) + _value_under(spec, player, kb, t + 1, x_next)
        v_val = _value_under(spec, player, kb, t, xt)
        rhs += q_val - v_val
    return CostDifference(lhs=lhs, rhs=rhs)


def spec_to_dict(spec: GameSpec) -> dict:
    """JSON-ready form: matrices as row-major nested lists."""
    return {
        "n": spec.n,
        "m": spec.m,
        "T": spec.T,
        "A": spec.A.tolist(),
        "B1": spec.B1.tolist(),
        "B2": spec.B2.tolist(),
        "x1": spec.x1.tolist(),
        "Q": [q.tolist() for q in spec.costs.Q],
        "R1": [r.tolist() for r in spec.costs.R1],
        "R2": [r.tolist() for r in spec.costs.R2],
    }


def spec_from_dict(data: dict, tol: Tolerances | None = None) -> GameSpec:
    try:
        costs = cost_schedule(data["Q"], data["R1"], data["R2"], tol=tol)
        spec = game_spec(data["A"], data["B1"], data["B2"], data["x1"], costs, tol=tol)
    except KeyError as exc:
        raise DimensionMismatchError(f"game description is missing field {exc}") from exc
    for field in ("n", "m", "T"):
        if field in data and int(data[field]) != getattr(spec, field):
            raise DimensionMismatchError(
                f"declared {field}={data[field]} disagrees with matrix shapes ({getattr(spec, field)})"
            )
    return spec


def nash_to_dict(sol: NashSolution) -> dict:
    return {
        "K": [k.tolist() for k in sol.K],
        "P1": [p.tolist() for p in sol.P1],
        "P2": [p.tolist() for p in sol.P2],
        "x_star": sol.x_star.tolist(),
        "u_star": sol.u_star.tolist(),
        "theta_min_eig": list(sol.theta_min_eig),
    }


def nash_from_dict(data: dict) -> NashSolution:
    return NashSolution(
        K=tuple(np.asarray(k, dtype=float) for k in data["K"]),
        P1=tuple(np.asarray(p, dtype=float) for p in data["P1"]),
        P2=tuple(np.asarray(p, dtype=float) for p in data["P2"]),
        x_star=np.asarray(data["x_star"], dtype=float),
        u_star=np.asarray(data["u_star"], dtype=float),
        theta_min_eig=tuple(float(v) for v in data["theta_min_eig"]),
    )

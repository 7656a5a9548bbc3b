"""Engagement-maximizing recommenders: the model-free mean controller and the
model-based steady-state target tracked by receding-horizon MPC."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .errors import QpFailure, TerminalInfeasible
from .numerics import QpProblem, QpStatus, solve_qp
from .plant import ControlledPlant, plant_step

log = logging.getLogger(__name__)

TARGET_AGREEMENT_TOL = 1e-7
TERMINAL_TOL = 1e-7
DEFAULT_SOFT_WEIGHT = 1e6


def theta(x, u) -> float:
    """Engagement cost ``||x - u 1||^2``."""
    d = np.asarray(x, dtype=float) - u
    return float(d @ d)


@dataclass(frozen=True)
class StageCostH:
    """Quadratic form with ``[x; u]' H [x; u] == theta(x, u)``; ``h = 2 H z*``."""

    H: np.ndarray
    h: np.ndarray

    def value(self, x, u):
        z = np.append(np.asarray(x, dtype=float), u)
        return float(z @ self.H @ z)


def stage_cost_h(x_star, u_star) -> StageCostH:
    n = len(x_star)
    H = np.eye(n + 1)
    H[:n, n] = H[n, :n] = -1.0
    H[n, n] = float(n)
    return StageCostH(H, 2.0 * H @ np.append(x_star, u_star))


def mf_input(x) -> float:
    """Mean opinion, the minimizer of ``theta(x, .)`` over [0, 1]."""
    return float(np.mean(x))


def mf_matrix(p: ControlledPlant) -> np.ndarray:
    """``G = I - A - (1/n) B 1'``: closed-loop steady-state matrix under MF."""
    return np.eye(p.n) - p.A - np.outer(p.B, np.ones(p.n)) / p.n


def mf_equilibrium(p: ControlledPlant) -> np.ndarray:
    return numerics.solve_linear(mf_matrix(p), p.offset)


def mf_closed_loop_matrix(p: ControlledPlant) -> np.ndarray:
    """Row-stochastic ``F = W + (1/n) w_rs 1'`` of the MF closed loop.

    Needs the raw listening weights stored by :func:`extract_plant`.
    """
    if p.w_tilde is None:
        raise ValueError("plant carries no raw listening weights")
    return p.w_tilde + np.outer(p.w_col, np.ones(p.n)) / p.n


@dataclass(frozen=True)
class MbTarget:
    x_star: np.ndarray
    u_star: float
    S_MB: np.ndarray
    v: np.ndarray
    qp_disagreement: float = 0.0


def mb_target(p: ControlledPlant, cross_check=True) -> MbTarget:
    """Optimal admissible steady state of the plant.

    Closed form: ``x* = (I - A - B v'/(v'1))^-1 lam x0`` with
    ``v = (I - A)^-1 B - 1``; the steady-state input is ``u* = v'x*/v'1``,
    a convex combination of ``x*`` since ``v <= 0``. With `cross_check` the
    same problem is solved as a QP in ``(x, u)``; if the two disagree by more
    than 1e-7 the QP answer is returned and a warning is logged.
    """
    n = p.n
    i_a = np.eye(n) - p.A
    v = numerics.solve_linear(i_a, p.B) - 1.0
    vs = v.sum()
    s_mb = numerics.solve_linear(i_a - np.outer(p.B, v) / vs, np.diag(p.lambda_tilde))
    x_star = s_mb @ p.x0
    u_star = float(v @ x_star / vs)
    if abs(p.B).max() > 0:
        u_ls = float(p.B @ (i_a @ x_star - p.offset) / (p.B @ p.B))
        if abs(u_ls - u_star) > TARGET_AGREEMENT_TOL:
            log.warning("steady-state input from least squares (%.12g) differs from %.12g",
                        u_ls, u_star)
    if not 0.0 <= u_star <= 1.0:
        log.warning("closed-form steady-state input %.3g outside [0, 1]; clamping", u_star)
        u_star = min(max(u_star, 0.0), 1.0)

    gap = 0.0
    if cross_check:
        xq, uq = steady_state_qp(p)
        gap = float(max(np.abs(xq - x_star).max(), abs(uq - u_star)))
        if gap > TARGET_AGREEMENT_TOL:
            log.warning("closed-form target differs from QP target by %.3g; using QP", gap)
            x_star, u_star = xq, uq
    return MbTarget(x_star, u_star, s_mb, v, gap)


def steady_state_qp(p: ControlledPlant, tol=1e-12):
    """Solve ``min theta(x, u) s.t. x = Ax + Bu + lam x0, u in [0, 1]`` directly."""
    n = p.n
    H = stage_cost_h(np.zeros(n), 0.0).H
    eq = np.hstack([np.eye(n) - p.A, -p.B[:, None]])
    lower = np.append(np.full(n, -1.0), 0.0)
    upper = np.append(np.full(n, 2.0), 1.0)
    prob = QpProblem(2.0 * H, np.zeros(n + 1), eq, p.offset, lower, upper)
    sol = solve_qp(prob, tol=tol, start=np.append(p.x0, np.mean(p.x0)))
    if not sol.ok:
        raise QpFailure(f"steady-state QP ended with {sol.status.value}", sol)
    return sol.point[:n], float(sol.point[n])


@dataclass(frozen=True)
class OcpSolution:
    inputs: np.ndarray
    predicted_states: np.ndarray
    cost: float
    status: QpStatus
    terminal_error: float = 0.0


@dataclass(frozen=True)
class _Condensed:
    """Prediction matrices: stacked ``x_k = Phi_k x_now + s_k + Gamma_k u``."""

    phi: np.ndarray      # (T+1, n, n)
    gamma: np.ndarray    # (T+1, n, T)
    s: np.ndarray        # (T+1, n)
    M: np.ndarray        # (T*n, T) rows of x_k - u_k 1 as a function of u
    MtM2: np.ndarray


def _condense(p: ControlledPlant, T: int) -> _Condensed:
    n = p.n
    phi = np.empty((T + 1, n, n))
    gamma = np.zeros((T + 1, n, T))
    s = np.zeros((T + 1, n))
    phi[0] = np.eye(n)
    for k in range(T):
        phi[k + 1] = p.A @ phi[k]
        gamma[k + 1] = p.A @ gamma[k]
        gamma[k + 1][:, k] = p.B
        s[k + 1] = p.A @ s[k] + p.offset
    M = gamma[:T].copy()
    for k in range(T):
        M[k, :, k] -= 1.0
    M = M.reshape(T * n, T)
    return _Condensed(phi, gamma, s, M, 2.0 * M.T @ M)


@dataclass
class MpcController:
    """Receding-horizon controller steering the plant to the MB target.

    Each call solves the condensed OCP over ``u_0 .. u_{T-1}`` with the
    terminal equality ``x_T = x*``. ``soft_terminal`` replaces that equality
    by the penalty ``weight * ||x_T - x*||^2``; this departs from the exact
    formulation and is meant for exploration only.
    """

    plant: ControlledPlant
    horizon: int
    target: MbTarget | None = None
    soft_terminal: float | None = None
    qp_tol: float = 1e-9
    warm_start: np.ndarray | None = None
    last_solution: OcpSolution | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.target is None:
            self.target = mb_target(self.plant)
        self._cond = _condense(self.plant, self.horizon)

    def reset(self):
        self.warm_start = None
        self.last_solution = None

    def solve_ocp(self, x_now, x0=None) -> OcpSolution:
        """Solve the T-step problem from `x_now`.

        `x0` overrides the plant's initial opinions in the constant term.

        Raises
        ------
        TerminalInfeasible
            Horizon shorter than the number of users, or no admissible input
            sequence reaches the target within tolerance.
        QpFailure
            The active-set solver hit its iteration cap.
        """
        p, T, c = self.plant, self.horizon, self._cond
        x_now = np.asarray(x_now, dtype=float)
        x_star, u_star = self.target.x_star, self.target.u_star
        s = c.s
        if x0 is not None:
            s = _offset_stack(p, np.asarray(x0, dtype=float), T)
        a = (c.phi[:T] @ x_now + s[:T]).reshape(-1)
        q = c.MtM2
        lin = 2.0 * c.M.T @ a
        term_free = c.phi[T] @ x_now + s[T]
        gamma_t = c.gamma[T]
        start = self.warm_start if self.warm_start is not None else np.full(T, u_star)
        ones = np.ones(T)
        feas_tol = TERMINAL_TOL * (np.abs(x_star).max() + 1.0)

        if self.soft_terminal is not None:
            w = float(self.soft_terminal)
            prob = QpProblem(q + 2.0 * w * gamma_t.T @ gamma_t,
                             lin + 2.0 * w * gamma_t.T @ (term_free - x_star),
                             None, None, 0.0 * ones, ones)
        else:
            if T < p.n and np.abs(x_now - x_star).max() > feas_tol:
                raise TerminalInfeasible(f"horizon {T} shorter than {p.n} users")
            prob = QpProblem(q, lin, gamma_t, x_star - term_free, 0.0 * ones, ones)
        sol = solve_qp(prob, tol=self.qp_tol, start=start, feas_tol=feas_tol)
        if sol.status is QpStatus.INFEASIBLE:
            raise TerminalInfeasible(
                f"terminal state unreachable (residual {sol.eq_residual:.3g})", sol)
        if sol.status is not QpStatus.OPTIMAL:
            raise QpFailure(f"OCP solve ended with {sol.status.value}", sol)

        u = sol.point
        states = c.phi @ x_now + s + c.gamma @ u
        cost = sum(theta(states[k], u[k]) for k in range(T))
        out = OcpSolution(u.copy(), states, cost, sol.status,
                          float(np.abs(states[T] - x_star).max()))
        self.last_solution = out
        self.warm_start = np.append(u[1:], u_star)
        return out

    def __call__(self, x_now, x0=None) -> float:
        return mpc_input(self, x_now, x0)


def _offset_stack(p, x0, T):
    s = np.zeros((T + 1, p.n))
    off = p.lambda_tilde * x0
    for k in range(T):
        s[k + 1] = p.A @ s[k] + off
    return s


def mpc_input(c: MpcController, x_now, x0=None) -> float:
    """First input of the optimal sequence; the shifted sequence is kept as warm start."""
    return float(c.solve_ocp(x_now, x0).inputs[0])


class ModelFreeController:
    """Recommends the current mean opinion."""

    def __call__(self, x_now, x0=None) -> float:
        return mf_input(x_now)


@dataclass(frozen=True)
class ClosedLoopResult:
    """Closed-loop record over ``steps`` applied inputs.

    ``states[t]``, ``inputs[t]`` and ``costs[t]`` run over t = 0..steps; the
    last input is what the controller would apply at the final state and is
    not applied. ``values`` holds the optimal OCP cost per step for MPC runs.
    """

    states: np.ndarray
    inputs: np.ndarray
    costs: np.ndarray
    values: np.ndarray | None = None

    @property
    def cumulative_cost(self) -> float:
        return float(self.costs[:-1].sum())

    @property
    def final_cost(self) -> float:
        return float(self.costs[-1])


def closed_loop(p: ControlledPlant, controller, steps: int) -> ClosedLoopResult:
    if steps < 1:
        raise ValueError("steps must be at least 1")
    is_mpc = isinstance(controller, MpcController)
    states = np.empty((steps + 1, p.n))
    inputs = np.empty(steps + 1)
    costs = np.empty(steps + 1)
    values = np.empty(steps + 1) if is_mpc else None
    x = p.x0.copy()
    for t in range(steps + 1):
        u = controller(x)
        # clip round-off from the QP; admissibility is enforced by its boxes
        u = min(max(u, 0.0), 1.0)
        states[t], inputs[t], costs[t] = x, u, theta(x, u)
        if is_mpc:
            values[t] = controller.last_solution.cost
        if t < steps:
            x = plant_step(p, x, u)
    return ClosedLoopResult(states, inputs, costs, values)


__all__ = [
    "theta", "StageCostH", "stage_cost_h", "mf_input", "mf_matrix", "mf_equilibrium",
    "mf_closed_loop_matrix", "MbTarget", "mb_target", "steady_state_qp", "OcpSolution",
    "MpcController", "mpc_input", "ModelFreeController", "ClosedLoopResult", "closed_loop",
]

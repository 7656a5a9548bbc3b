"""The controlled user network obtained by turning the recommender node into an input.

Removing the recommender's row and column from the FJ system leaves the
affine LTI plant ``x(t+1) = A x(t) + B u(t) + diag(lam) x0`` with scalar input
``u`` in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics
from .errors import InputOutOfRange, InvalidIndex, NotLambdaConnected, SingularMatrix
from .opinion_model import OpinionNetwork, validate

ROW_IDENTITY_TOL = 1e-9


@dataclass(frozen=True)
class ControlledPlant:
    A: np.ndarray
    B: np.ndarray
    lambda_tilde: np.ndarray
    x0: np.ndarray
    rs_index: int = -1
    # listening weights among users and towards the recommender, when known
    w_tilde: np.ndarray | None = None
    w_col: np.ndarray | None = None

    def __post_init__(self):
        a = numerics.as_matrix(self.A, "A", square=True)
        n = a.shape[0]
        fields = {
            "A": a,
            "B": numerics.as_vector(self.B, "B", n),
            "lambda_tilde": numerics.as_vector(self.lambda_tilde, "lambda_tilde", n),
            "x0": numerics.as_vector(self.x0, "x0", n),
        }
        if self.w_tilde is not None:
            fields["w_tilde"] = numerics.as_matrix(self.w_tilde, "w_tilde", square=True)
            fields["w_col"] = numerics.as_vector(self.w_col, "w_col", n)
        for name, val in fields.items():
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def offset(self):
        """Constant term ``diag(lambda_tilde) x0``."""
        return self.lambda_tilde * self.x0


@dataclass(frozen=True)
class ReachabilityBounds:
    lower: np.ndarray
    upper: np.ndarray


def extract_plant(net: OpinionNetwork, rs_index: int) -> ControlledPlant:
    """Delete the recommender's row and column and build ``(A, B, lam, x0)``.

    Raises
    ------
    InvalidIndex
        `rs_index` outside the network.
    NotLambdaConnected
        ``I - A`` singular or ``rho(A) >= 1``: no unique stable steady state
        for a constant recommendation.
    """
    n_total = net.n_total
    if not 0 <= rs_index < n_total:
        raise InvalidIndex(f"rs_index {rs_index} out of range for {n_total} nodes")
    problems = validate(net)
    if problems:
        raise ValueError("invalid network: " + "; ".join(map(str, problems)))
    keep = np.array([i for i in range(n_total) if i != rs_index], dtype=int)
    if keep.size == 0:
        raise InvalidIndex("network has no users besides the recommender")
    w_tilde = net.adjacency[np.ix_(keep, keep)]
    w_col = net.adjacency[keep, rs_index]
    lam = net.stubbornness[keep]
    plant = ControlledPlant(
        A=(1.0 - lam)[:, None] * w_tilde,
        B=(1.0 - lam) * w_col,
        lambda_tilde=lam,
        x0=net.initial_opinions[keep],
        rs_index=rs_index,
        w_tilde=w_tilde,
        w_col=w_col,
    )
    check_stable(plant)
    return plant


def check_stable(p: ControlledPlant):
    """Raise NotLambdaConnected unless ``rho(A) < 1`` and ``I - A`` is invertible."""
    rho = numerics.spectral_radius(p.A)
    if rho >= 1.0 - 1e-12:
        raise NotLambdaConnected(f"user subsystem has spectral radius {rho:.12g}")
    try:
        numerics.invert(np.eye(p.n) - p.A)
    except SingularMatrix as exc:
        raise NotLambdaConnected(str(exc)) from exc
    return rho


def plant_step(p: ControlledPlant, x, u: float) -> np.ndarray:
    if not 0.0 <= u <= 1.0:
        raise InputOutOfRange(f"input {u!r} outside [0, 1]")
    return p.A @ np.asarray(x, dtype=float) + p.B * u + p.offset


def constant_input_steady_state(p: ControlledPlant, u: float) -> np.ndarray:
    """``(I - A)^-1 (B u + lam x0)``."""
    if not 0.0 <= u <= 1.0:
        raise InputOutOfRange(f"input {u!r} outside [0, 1]")
    return numerics.solve_linear(np.eye(p.n) - p.A, p.B * u + p.offset)


def reachability_bounds(p: ControlledPlant) -> ReachabilityBounds:
    """Component-wise extremes of the steady states reachable with constant input.

    The steady state is monotone in ``u`` because ``(I - A)^-1 B >= 0``, so
    the extremes sit at ``u = 0`` and ``u = 1``.
    """
    m = np.eye(p.n) - p.A
    sol = numerics.solve_linear(m, np.column_stack([p.offset, p.B + p.offset]))
    return ReachabilityBounds(lower=sol[:, 0], upper=sol[:, 1])

"""Friedkin-Johnsen opinion dynamics on a weighted directed network.

Convention: ``adjacency[i, j]`` is the weight with which node *i* listens to
node *j*, so rows are stochastic and influence flows from *j* to *i*.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from . import numerics
from .errors import DimensionMismatch, NotLambdaConnected, SingularMatrix

ROW_SUM_TOL = 1e-9
PREJUDICE_EPS = 1e-12


@dataclass(frozen=True)
class OpinionNetwork:
    """Full FJ system: row-stochastic ``adjacency``, per-node ``stubbornness``
    in [0, 1] and ``initial_opinions`` in [0, 1].

    Construction only checks shapes and finiteness; use :func:`validate` for
    the model invariants, or ``renormalize_rows=True`` to rescale rows whose
    weights came from rounded labels.
    """

    adjacency: np.ndarray
    stubbornness: np.ndarray
    initial_opinions: np.ndarray
    renormalize_rows: bool = False

    def __post_init__(self):
        w = numerics.as_matrix(self.adjacency, "adjacency", square=True)
        n = w.shape[0]
        lam = numerics.as_vector(self.stubbornness, "stubbornness", n)
        o0 = numerics.as_vector(self.initial_opinions, "initial_opinions", n)
        if self.renormalize_rows:
            sums = w.sum(axis=1, keepdims=True)
            w = np.divide(w, sums, out=w.copy(), where=sums > 0)
        for name, val in (("adjacency", w), ("stubbornness", lam), ("initial_opinions", o0)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def n_total(self):
        return self.adjacency.shape[0]

    def influence_matrix(self):
        """``(I - Lambda) W``."""
        return (1.0 - self.stubbornness)[:, None] * self.adjacency


@dataclass(frozen=True)
class Violation:
    kind: str
    index: int
    value: float

    def __str__(self):
        return f"{self.kind} at {self.index}: {self.value:.6g}"


@dataclass(frozen=True)
class ConnectivityReport:
    prejudiced: frozenset
    p_dependent: frozenset
    lambda_connected: bool


def validate(net: OpinionNetwork) -> list[Violation]:
    """All violated model invariants; an empty list means the network is valid."""
    out = []
    w = net.adjacency
    for i, j in zip(*np.nonzero(w < 0)):
        out.append(Violation("negative weight", int(i), float(w[i, j])))
    for i, s in enumerate(w.sum(axis=1)):
        if abs(s - 1.0) > ROW_SUM_TOL:
            out.append(Violation("row sum", i, float(s)))
    for i, v in enumerate(net.stubbornness):
        if not 0.0 <= v <= 1.0:
            out.append(Violation("stubbornness out of range", i, float(v)))
    for i, v in enumerate(net.initial_opinions):
        if not 0.0 <= v <= 1.0:
            out.append(Violation("initial opinion out of range", i, float(v)))
    return out


def connectivity(net: OpinionNetwork) -> ConnectivityReport:
    """Prejudiced and P-dependent node sets by BFS along influence edges."""
    n = net.n_total
    prejudiced = {i for i in range(n) if net.stubbornness[i] > PREJUDICE_EPS}
    # j influences i whenever i listens to j
    influences = [np.flatnonzero(net.adjacency[:, j] > 0) for j in range(n)]
    seen = set(prejudiced)
    queue = deque(sorted(prejudiced))
    while queue:
        j = queue.popleft()
        for i in influences[j]:
            i = int(i)
            if i not in seen:
                seen.add(i)
                queue.append(i)
    return ConnectivityReport(frozenset(prejudiced), frozenset(seen), len(seen) == n)


def _check_state(net, o):
    o = np.asarray(o, dtype=float)
    if o.shape != (net.n_total,):
        raise DimensionMismatch(f"opinion vector has shape {o.shape}, expected ({net.n_total},)")
    return o


def fj_step(net: OpinionNetwork, o) -> np.ndarray:
    o = _check_state(net, o)
    lam = net.stubbornness
    return (1.0 - lam) * (net.adjacency @ o) + lam * net.initial_opinions


def fj_simulate(net: OpinionNetwork, steps: int) -> np.ndarray:
    """Trajectory of shape ``(steps + 1, n_total)`` starting at the initial opinions."""
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    traj = np.empty((steps + 1, net.n_total))
    traj[0] = net.initial_opinions
    for t in range(steps):
        traj[t + 1] = fj_step(net, traj[t])
    return traj


def fj_equilibrium(net: OpinionNetwork) -> np.ndarray:
    """Unique stable equilibrium ``(I - (I - Lambda) W)^-1 Lambda o(0)``.

    Raises
    ------
    NotLambdaConnected
        If some node is not P-dependent.
    """
    if not connectivity(net).lambda_connected:
        raise NotLambdaConnected("network is not lambda-connected")
    n = net.n_total
    m = np.eye(n) - net.influence_matrix()
    try:
        return numerics.solve_linear(m, net.stubbornness * net.initial_opinions)
    except SingularMatrix as exc:
        raise NotLambdaConnected(str(exc)) from exc

"""Comparison of the MF and MB recommenders: steady-state equivalence test,
opinion shift against a recommender-free baseline, engagement sampling and
the paired closed-loop experiment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics
from .controllers import (
    ClosedLoopResult,
    ModelFreeController,
    MpcController,
    closed_loop,
    mb_target,
    mf_matrix,
    theta,
)
from .opinion_model import OpinionNetwork, fj_equilibrium
from .plant import ControlledPlant

SHIFT_EPS = 1e-9


@dataclass(frozen=True)
class EquivalenceCertificate:
    """Rank-one decomposition ``S_MB = (G^-1 - K) lam`` of the MB steady-state map.

    ``G = I - A - B 1'/n`` is the MF steady-state matrix, ``C = (I - A)^-1 B``,
    ``D = (1'C) 1 - n C`` and ``alpha = 1 / (n (1'C - n))`` so that
    ``G + alpha B D'`` is the MB steady-state matrix. The two controllers
    share a steady state exactly when ``gap = |D' G^-1 lam x0|`` vanishes.
    """

    G: np.ndarray
    C: np.ndarray
    D: np.ndarray
    alpha: float
    K: np.ndarray
    kernel_functional: np.ndarray
    gap: float

    @property
    def equivalent(self):
        return self.gap <= 1e-9


def equivalence_certificate(p: ControlledPlant) -> EquivalenceCertificate:
    n = p.n
    G = mf_matrix(p)
    C = numerics.solve_linear(np.eye(n) - p.A, p.B)
    s = C.sum()
    D = s * np.ones(n) - n * C
    alpha = 1.0 / (n * (s - n))
    g_inv = numerics.invert(G)
    gb = g_inv @ p.B
    dg = D @ g_inv
    denom = 1.0 / alpha + dg @ p.B
    K = np.outer(gb, dg) / denom if denom != 0 else np.full((n, n), np.inf)
    functional = p.lambda_tilde * dg
    gap = abs(float(functional @ p.x0))
    return EquivalenceCertificate(G, C, D, alpha, K, functional, gap)


@dataclass(frozen=True)
class Shift:
    """Per-user opinion shift in percent; ``excluded`` marks users whose
    baseline opinion is below the division guard."""

    percent: np.ndarray
    excluded: np.ndarray

    @property
    def mean(self) -> float:
        kept = self.percent[~self.excluded]
        return float(kept.mean()) if kept.size else 0.0

    @property
    def max(self) -> float:
        kept = self.percent[~self.excluded]
        return float(kept.max()) if kept.size else 0.0


def opinion_shift(x_steady, x_free, eps=SHIFT_EPS) -> Shift:
    x_steady = np.asarray(x_steady, dtype=float)
    x_free = np.asarray(x_free, dtype=float)
    if x_steady.shape != x_free.shape:
        raise ValueError("shape mismatch between steady state and baseline")
    pct = 100.0 * np.abs(x_steady - x_free) / np.maximum(x_free, eps)
    return Shift(pct, x_free < eps)


def free_network(net: OpinionNetwork, rs_index: int) -> OpinionNetwork:
    """User network with the recommender deleted and rows rescaled to sum to one.

    A user who listened only to the recommender keeps a unit self-loop.
    """
    keep = np.array([i for i in range(net.n_total) if i != rs_index])
    w = net.adjacency[np.ix_(keep, keep)].copy()
    sums = w.sum(axis=1)
    for i, s in enumerate(sums):
        if s > 0:
            w[i] /= s
        else:
            w[i] = 0.0
            w[i, i] = 1.0
    return OpinionNetwork(w, net.stubbornness[keep], net.initial_opinions[keep])


def free_evolution_steady_state(net: OpinionNetwork, rs_index: int) -> np.ndarray:
    """FJ equilibrium of the users without any recommender.

    Raises
    ------
    NotLambdaConnected
    """
    return fj_equilibrium(free_network(net, rs_index))


def sample_engagement(x, u, rng_seed=None) -> bool:
    """One Bernoulli engagement draw with success probability ``1 - theta(x, u)``
    clamped to [0, 1]. `rng_seed` may be a seed or a ``numpy.random.Generator``."""
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    prob = min(max(1.0 - theta(x, u), 0.0), 1.0)
    return bool(rng.random() < prob)


@dataclass(frozen=True)
class ComparisonReport:
    x_mf: np.ndarray
    x_mb: np.ndarray
    cost_mf: float
    cost_mb: float
    cost_mf_cum: float
    cost_mb_cum: float
    improvement_pct: float
    shift_mf: Shift
    shift_mb: Shift
    avg_shift_gap_pct: float
    x_free: np.ndarray
    run_mf: ClosedLoopResult
    run_mb: ClosedLoopResult


def improvement(cost_mf, cost_mb) -> float:
    """Relative MB gain in percent; zero when the MF cost already vanishes."""
    if cost_mf <= 0.0:
        return 0.0
    return 100.0 * (cost_mf - cost_mb) / cost_mf


def compare_controllers(p: ControlledPlant, net: OpinionNetwork, rs_index: int,
                        steps: int = 50, horizon: int = 50,
                        soft_terminal: float | None = None) -> ComparisonReport:
    """Run MF and MPC closed loops side by side and measure costs and shifts.

    ``cost_mf``/``cost_mb`` are the stage costs at the last simulated step,
    the ``*_cum`` variants sum the stage costs of the applied inputs.
    Shifts compare the final states with the recommender-free equilibrium.
    """
    run_mf = closed_loop(p, ModelFreeController(), steps)
    mpc = MpcController(p, horizon, mb_target(p), soft_terminal=soft_terminal)
    run_mb = closed_loop(p, mpc, steps)
    x_free = free_evolution_steady_state(net, rs_index)
    x_mf, x_mb = run_mf.states[-1], run_mb.states[-1]
    shift_mf = opinion_shift(x_mf, x_free)
    shift_mb = opinion_shift(x_mb, x_free)
    return ComparisonReport(
        x_mf=x_mf,
        x_mb=x_mb,
        cost_mf=run_mf.final_cost,
        cost_mb=run_mb.final_cost,
        cost_mf_cum=run_mf.cumulative_cost,
        cost_mb_cum=run_mb.cumulative_cost,
        improvement_pct=improvement(run_mf.final_cost, run_mb.final_cost),
        shift_mf=shift_mf,
        shift_mb=shift_mb,
        avg_shift_gap_pct=shift_mb.mean - shift_mf.mean,
        x_free=x_free,
        run_mf=run_mf,
        run_mb=run_mb,
    )

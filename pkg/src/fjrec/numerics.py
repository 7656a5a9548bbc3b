"""Dense linear algebra helpers and a box/equality constrained convex QP solver.

Every matrix in this package is small, dense and scaled to [0, 1], so plain
numpy arrays are used throughout. The QP solver is a primal active-set method:
equality constraints are eliminated through an orthonormal null-space basis
(computed by SVD, so redundant rows are dropped automatically) and the box
constraints are handled by the working set.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NotConverged, SingularMatrix

__all__ = [
    "NumericSettings",
    "SETTINGS",
    "as_matrix",
    "as_vector",
    "solve_linear",
    "invert",
    "spectral_radius",
    "QpStatus",
    "QpProblem",
    "QpSolution",
    "solve_qp",
]


@dataclass(frozen=True)
class NumericSettings:
    linear_tol: float = 1e-10
    pivot_tol: float = 1e-13
    qp_tol: float = 1e-9
    qp_max_iter: int = 1000
    power_tol: float = 1e-10
    power_max_iter: int = 10000
    # relative singular-value cutoff used for null spaces and pseudo-solves
    rank_rcond: float = 1e-11


SETTINGS = NumericSettings()


def as_matrix(a, name="matrix", square=False):
    """Return `a` as a finite 2-D float array (copy), validating its shape."""
    m = np.array(a, dtype=float)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise DimensionMismatch(f"{name} must be a non-empty 2-D array, got shape {m.shape}")
    if square and m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains NaN or Inf")
    return m


def as_vector(v, name="vector", dim=None):
    x = np.array(v, dtype=float).reshape(-1) if np.ndim(v) else np.array([v], dtype=float)
    if x.size < 1:
        raise DimensionMismatch(f"{name} must have at least one entry")
    if dim is not None and x.size != dim:
        raise DimensionMismatch(f"{name} has dimension {x.size}, expected {dim}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains NaN or Inf")
    return x


def _lu(a, settings):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if pivots.min() < settings.pivot_tol:
        raise SingularMatrix(f"pivot magnitude {pivots.min():.3g} below {settings.pivot_tol:g}")
    return lu, piv


def solve_linear(a, b, settings=SETTINGS):
    """Solve ``a @ x = b`` by partially pivoted LU.

    Raises
    ------
    SingularMatrix
        If a pivot falls below ``settings.pivot_tol`` in magnitude.
    """
    a = as_matrix(a, "A", square=True)
    b = np.array(b, dtype=float)
    if b.shape[0] != a.shape[0]:
        raise DimensionMismatch(f"rhs has {b.shape[0]} rows, matrix has {a.shape[0]}")
    if not np.all(np.isfinite(b)):
        raise ValueError("rhs contains NaN or Inf")
    lu = _lu(a, settings)
    return scipy.linalg.lu_solve(lu, b, check_finite=False)


def invert(a, settings=SETTINGS):
    a = as_matrix(a, "A", square=True)
    return scipy.linalg.lu_solve(_lu(a, settings), np.eye(a.shape[0]), check_finite=False)


RESTART_POWER = 4096


def spectral_radius(a, tol=None, max_iter=None, seed=0, settings=SETTINGS):
    """Estimate the spectral radius of a nonnegative square matrix.

    Power iteration from the all-ones vector. If the iterate stagnates
    (peripheral eigenvalues sharing the dominant modulus, or a second
    eigenvalue close to it) the run restarts from a randomly perturbed
    positive vector on ``P = (a + s I)^m`` with ``s > 0`` and
    ``m = RESTART_POWER``, formed by repeated squaring with rescaling. The
    shift makes the Perron root strictly dominant and the power raises the
    convergence ratio to the m-th power; products of nonnegative matrices
    involve no cancellation, so forming ``P`` costs almost no accuracy.
    """
    a = as_matrix(a, "A", square=True)
    tol = settings.power_tol if tol is None else tol
    max_iter = settings.power_max_iter if max_iter is None else max_iter
    if np.any(a < 0):
        raise ValueError("spectral_radius expects a nonnegative matrix")

    n = a.shape[0]
    stall_window = min(max(50, max_iter // 20), max_iter)
    # the tail bound is first order; aim below tol
    est, ok, used, _ = _power_run(a, np.ones(n), 0.5 * tol, stall_window)
    if ok:
        return est
    shift = 0.5 * est if est > 0 else 1.0
    p, log_scale = _scaled_power(a + shift * np.eye(n), RESTART_POWER)
    p_norm = np.abs(p).sum(axis=1).max()
    v = 1.0 + 0.1 * np.random.default_rng(seed).random(n)
    # a converged iterate with change d leaves an error of about d |P| in
    # rho(P), hence a relative error r d |P| / (m rho(P)) in r = rho + shift;
    # the first pass estimates rho(P), the second tightens accordingly
    p_tol, r = 1e-6, 0.0
    for _ in range(2):
        est_p, ok, k, v = _power_run(p, v, p_tol, max_iter - used)
        used += k
        if not ok:
            raise NotConverged(
                f"power iteration did not reach tol={tol:g} in {max_iter} iterations")
        # est_p > 0 because the shift keeps the Perron root of P positive
        r = float(np.exp((np.log(est_p) + log_scale) / RESTART_POWER))
        p_tol = min(p_tol, max(0.1 * tol * RESTART_POWER * est_p / (r * p_norm), 1e-15))
    return max(r - shift, 0.0)


def _scaled_power(m, power):
    """Return ``(P, log c)`` with ``m^power = c P`` and ``max(P) = 1``; `power` a power of two."""
    scale = np.abs(m).max()
    p = m / scale
    log_c = np.log(scale)
    k = 1
    while k < power:
        p = p @ p
        top = np.abs(p).max()
        p /= top
        log_c = 2.0 * log_c + np.log(top)
        k *= 2
    return p, log_c


_ROUNDING_FLOOR = 8 * np.finfo(float).eps


def _power_run(m, v, tol, budget):
    v = v / np.abs(v).max()
    prev_diff = None
    est = 0.0
    for k in range(1, budget + 1):
        w = m @ v
        est = np.abs(w).max()
        if est == 0.0:
            return 0.0, True, k, v
        w = w / est
        diff = np.abs(w - v).max()
        v = w
        if diff <= _ROUNDING_FLOOR:
            return est, True, k, v
        if prev_diff is not None:
            rate = diff / prev_diff
            # geometric tail bound on the remaining change of the iterate
            if rate < 1.0 and diff <= tol and diff * rate / (1.0 - rate) <= tol:
                return est, True, k, v
        prev_diff = diff
    return est, False, budget, v


class QpStatus(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    MAX_ITERATIONS = "MaxIterations"


@dataclass(frozen=True)
class QpProblem:
    """``min 1/2 x'Hx + c'x  s.t.  Ex = f,  lower <= x <= upper``.

    The Hessian is symmetrized on construction. Bounds must be finite.
    """

    hessian: np.ndarray
    linear: np.ndarray
    eq_matrix: np.ndarray | None = None
    eq_rhs: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        h = as_matrix(self.hessian, "hessian", square=True)
        d = h.shape[0]
        c = as_vector(self.linear, "linear", d)
        if self.eq_matrix is None or np.size(self.eq_matrix) == 0:
            e = np.zeros((0, d))
            f = np.zeros(0)
        else:
            e = np.atleast_2d(np.array(self.eq_matrix, dtype=float))
            if e.shape[1] != d:
                raise DimensionMismatch(f"eq_matrix has {e.shape[1]} columns, expected {d}")
            f = np.array(self.eq_rhs, dtype=float).reshape(-1)
            if f.size != e.shape[0]:
                raise DimensionMismatch("eq_rhs length does not match eq_matrix rows")
            if not (np.all(np.isfinite(e)) and np.all(np.isfinite(f))):
                raise ValueError("equality data contains NaN or Inf")
        lo = as_vector(self.lower, "lower", d)
        up = as_vector(self.upper, "upper", d)
        if np.any(lo > up):
            raise ValueError("lower bound exceeds upper bound")
        for name, val in (("hessian", 0.5 * (h + h.T)), ("linear", c), ("eq_matrix", e),
                          ("eq_rhs", f), ("lower", lo), ("upper", up)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def dim(self):
        return self.hessian.shape[0]

    def objective(self, x):
        return float(0.5 * x @ self.hessian @ x + self.linear @ x)


@dataclass(frozen=True)
class QpSolution:
    point: np.ndarray
    objective: float
    status: QpStatus
    kkt_residual: float
    active_set: tuple = ()
    eq_multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    bound_multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    eq_residual: float = 0.0
    iterations: int = 0

    @property
    def ok(self):
        return self.status is QpStatus.OPTIMAL


def _null_space(e, rcond):
    """Orthonormal basis of ker(e); rows of e that are numerically dependent
    contribute nothing."""
    d = e.shape[1]
    if e.shape[0] == 0:
        return np.eye(d)
    _, s, vt = np.linalg.svd(e, full_matrices=True)
    if s.size == 0 or s[0] == 0.0:
        return np.eye(d)
    rank = int(np.sum(s > rcond * s[0] * max(e.shape)))
    return vt[rank:].T


def _pinv_solve_sym(h, g, rcond):
    """Minimum-norm minimizer of 1/2 p'hp + g'p for symmetric PSD h.

    Returns ``(p, ray)``: when g has a component along ker(h) the problem is
    unbounded below and ``ray`` is a zero-curvature descent direction.
    """
    w, v = np.linalg.eigh(h)
    scale = max(np.abs(w).max(initial=0.0), 1.0)
    pos = w > rcond * scale * max(h.shape[0], 1) * 10
    gk = v[:, ~pos] @ (v[:, ~pos].T @ g)
    if np.linalg.norm(gk, np.inf) > 1e-12 * max(1.0, np.linalg.norm(g, np.inf)):
        return -gk, True
    p = -(v[:, pos] @ ((v[:, pos].T @ g) / w[pos]))
    return p, False


def _active_set_loop(x, lower, upper, step_fn, grad_fn, eq, max_iter, tol):
    """Primal active-set iteration on the box ``lower <= x <= upper``.

    `step_fn(free, x)` returns ``(p, ray)`` for the subproblem over free
    coordinates; `grad_fn(x)` returns the objective gradient. Additions and
    removals pick the lowest qualifying index.
    """
    d = x.size
    fixed = lower == upper
    at_lo = (x <= lower) | fixed
    at_up = (x >= upper) & ~fixed
    working = at_lo | at_up
    for it in range(1, max_iter + 1):
        free = ~working
        if free.any():
            p_free, ray = step_fn(free, x)
        else:
            p_free, ray = np.zeros(0), False
        p = np.zeros(d)
        p[free] = p_free
        step_norm = np.linalg.norm(p, np.inf)
        if not ray and step_norm <= tol * (1.0 + np.linalg.norm(x, np.inf)):
            g = grad_fn(x)
            y = _eq_multipliers(eq, g, free)
            r = g + (eq.T @ y if eq.shape[0] else 0.0)
            mu_lo = np.where(at_lo & working & ~fixed, r, 0.0)
            mu_up = np.where(at_up & working, -r, 0.0)
            bad = np.flatnonzero((mu_lo < -tol) | (mu_up < -tol))
            if bad.size == 0:
                return x, working, it, False
            i = bad[0]
            working[i] = False
            at_lo[i] = at_up[i] = False
            continue
        alpha = np.inf if ray else 1.0
        block = -1
        # ascending scan with strict '<' keeps the lowest index on ties
        for i in np.flatnonzero(free & (p != 0.0)):
            a = (lower[i] - x[i]) / p[i] if p[i] < 0 else (upper[i] - x[i]) / p[i]
            a = max(a, 0.0)
            if a < alpha:
                alpha, block = a, i
        if block < 0 and ray:
            raise RuntimeError("unbounded ray inside a finite box")
        x = x + alpha * p
        if block >= 0:
            if p[block] < 0:
                x[block] = lower[block]
                at_lo[block] = True
            else:
                x[block] = upper[block]
                at_up[block] = True
            working[block] = True
        x = np.clip(x, lower, upper)
    return x, working, max_iter, True


def _eq_multipliers(e, g, free):
    if e.shape[0] == 0:
        return np.zeros(0)
    if not free.any():
        return np.zeros(e.shape[0])
    y, *_ = np.linalg.lstsq(e[:, free].T, -g[free], rcond=None)
    return y


def _phase_one(prob, x, max_iter, tol, rcond):
    """Closest point (in least squares) to ``Ex = f`` inside the box."""
    e, f = prob.eq_matrix, prob.eq_rhs

    def step(free, x):
        r = f - e @ x
        p, *_ = np.linalg.lstsq(e[:, free], r, rcond=rcond * max(e.shape))
        return p, False

    def grad(x):
        return e.T @ (e @ x - f)

    empty = np.zeros((0, x.size))
    x, _, it, hit = _active_set_loop(x, prob.lower, prob.upper, step, grad, empty, max_iter, tol)
    return x, it, hit


def solve_qp(problem: QpProblem, tol=None, max_iter=None, start=None,
             feas_tol=None, settings=SETTINGS) -> QpSolution:
    """Solve a convex QP with equality and box constraints.

    Parameters
    ----------
    problem : QpProblem
    tol : float, optional
        KKT tolerance (defaults to ``settings.qp_tol``).
    max_iter : int, optional
        Iteration cap shared by the feasibility and optimality phases.
    start : array_like, optional
        Warm-start point; clipped into the box.
    feas_tol : float, optional
        Largest equality residual (inf-norm) accepted as feasible. Defaults
        to ``tol * (1 + |f|_inf)``.

    Returns
    -------
    QpSolution
        ``status`` is Infeasible when no box point satisfies the equalities
        to within `feas_tol`, MaxIterations when the cap is hit.
    """
    tol = settings.qp_tol if tol is None else tol
    max_iter = settings.qp_max_iter if max_iter is None else max_iter
    rcond = settings.rank_rcond
    q, c, e, f = problem.hessian, problem.linear, problem.eq_matrix, problem.eq_rhs
    lo, up = problem.lower, problem.upper
    d = problem.dim
    if feas_tol is None:
        feas_tol = tol * (1.0 + (np.abs(f).max() if f.size else 0.0))

    x = np.zeros(d) if start is None else as_vector(start, "start", d)
    x = np.clip(x, lo, up)
    iters = 0
    if e.shape[0]:
        if np.abs(e @ x - f).max() > feas_tol:
            x, iters, hit = _phase_one(problem, x, max_iter, 0.01 * feas_tol, rcond)
        eq_res = np.abs(e @ x - f).max()
        if eq_res > feas_tol:
            return QpSolution(x, problem.objective(x), QpStatus.INFEASIBLE, float(eq_res),
                              eq_residual=float(eq_res), iterations=iters)

    null_cache = {}

    def step(free, x):
        key = free.tobytes()
        z = null_cache.get(key)
        if z is None:
            z = _null_space(e[:, free], rcond)
            null_cache[key] = z
        if z.shape[1] == 0:
            return np.zeros(int(free.sum())), False
        g = (q @ x + c)[free]
        qf = q[np.ix_(free, free)]
        w, ray = _pinv_solve_sym(z.T @ qf @ z, z.T @ g, rcond)
        return z @ w, ray

    def grad(x):
        return q @ x + c

    x, working, it, hit = _active_set_loop(x, lo, up, step, grad, e, max(max_iter - iters, 1), tol)
    iters += it
    return _finish(problem, x, working, iters, hit, tol)


def _finish(problem, x, working, iters, hit, tol):
    q, c, e, f = problem.hessian, problem.linear, problem.eq_matrix, problem.eq_rhs
    lo, up = problem.lower, problem.upper
    g = q @ x + c
    free = ~working
    y = _eq_multipliers(e, g, free)
    r = g + (e.T @ y if e.shape[0] else 0.0)
    mu = np.where(working, r, 0.0)
    fixed = lo == up
    at_lo = working & (x <= lo) & ~fixed
    at_up = working & (x >= up) & ~fixed
    scale = 1.0 + max(np.abs(g).max(), np.abs(c).max())
    stat = np.abs(r[free]).max(initial=0.0) / scale
    dual = max(np.maximum(-mu[at_lo], 0).max(initial=0.0),
               np.maximum(mu[at_up], 0).max(initial=0.0)) / scale
    eq_res = float(np.abs(e @ x - f).max(initial=0.0))
    box = float(max(np.maximum(lo - x, 0).max(), np.maximum(x - up, 0).max()))
    kkt = float(max(stat, dual, eq_res / (1.0 + np.abs(f).max(initial=0.0)), box))
    status = QpStatus.MAX_ITERATIONS if hit else QpStatus.OPTIMAL
    active = tuple(int(i) for i in np.flatnonzero(working))
    return QpSolution(x, problem.objective(x), status, kkt, active, y, mu, eq_res, iters)

"""Random networks, the radical-user fixture, batch experiments and file formats."""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .analysis import ComparisonReport, compare_controllers, free_network
from .errors import FjrecError, GenerationFailed, NotLambdaConnected, TerminalInfeasible
from .opinion_model import OpinionNetwork, connectivity, validate
from .plant import extract_plant

CONNECTIVITY_LEVELS = (25, 50, 75, 100)
MAX_RESAMPLES = 100

CSV_COLUMNS = (
    "trial_id", "seed", "n_users", "connectivity_pct", "mpc_feasible",
    "cost_mf_cum", "cost_mb_cum", "cost_mf_ss", "cost_mb_ss", "improvement_pct",
    "avg_shift_mf_pct", "avg_shift_mb_pct", "max_shift_mf_pct", "max_shift_mb_pct",
    "wall_time_ms",
)


@dataclass(frozen=True)
class TrialConfig:
    n_users: int = 20
    connectivity_pct: float = 25
    seed: int = 0
    steps: int = 50
    horizon: int = 50
    soft_terminal: float | None = None

    def __post_init__(self):
        if not 0 < self.connectivity_pct <= 100:
            raise ValueError("connectivity_pct must lie in (0, 100]")
        if self.steps < 1 or self.horizon < 1:
            raise ValueError("steps and horizon must be positive")
        if self.n_users < 2:
            raise ValueError("need at least two users")


@dataclass(frozen=True)
class TrialRecord:
    trial_id: int
    config: TrialConfig
    report: ComparisonReport | None
    mpc_feasible: bool
    wall_time_ms: float
    error: str = ""


@dataclass(frozen=True)
class ScenarioFile:
    name: str
    n_total: int
    adjacency: list
    stubbornness: list
    initial_opinions: list
    rs_index: int

    def network(self, renormalize_rows=False) -> OpinionNetwork:
        w = np.asarray(self.adjacency, dtype=float).reshape(self.n_total, self.n_total)
        net = OpinionNetwork(w, self.stubbornness, self.initial_opinions,
                             renormalize_rows=renormalize_rows)
        problems = validate(net)
        if problems:
            raise ValueError(f"scenario {self.name!r} is invalid: " + "; ".join(map(str, problems)))
        return net

    @classmethod
    def from_network(cls, name, net: OpinionNetwork, rs_index: int) -> "ScenarioFile":
        return cls(name, net.n_total, [float(v) for v in net.adjacency.reshape(-1)],
                   [float(v) for v in net.stubbornness],
                   [float(v) for v in net.initial_opinions], int(rs_index))

    def to_dict(self):
        return {
            "name": self.name,
            "n_total": self.n_total,
            "adjacency": list(self.adjacency),
            "stubbornness": list(self.stubbornness),
            "initial_opinions": list(self.initial_opinions),
            "rs_index": self.rs_index,
        }

    @classmethod
    def from_dict(cls, d) -> "ScenarioFile":
        adj = np.asarray(d["adjacency"], dtype=float).reshape(-1)
        return cls(str(d["name"]), int(d["n_total"]), adj.tolist(),
                   [float(v) for v in d["stubbornness"]],
                   [float(v) for v in d["initial_opinions"]], int(d["rs_index"]))


def _trial_seed(master_seed, index):
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1, np.uint64)[0])


def generate_network(n_users: int, connectivity_pct: float, seed: int) -> OpinionNetwork:
    """Random lambda-connected user network with the recommender as the last node.

    Each ordered pair of distinct users is linked with probability
    ``connectivity_pct / 100``; every user also has a self-loop and listens
    to the recommender. Raw weights are uniform on (0, 1] before row
    normalization, stubbornness is uniform on [0.01, 0.99] and initial
    opinions are uniform on [0, 1). The recommender listens only to itself.
    """
    if n_users < 2:
        raise ValueError("need at least two users")
    if not 0 < connectivity_pct <= 100:
        raise ValueError("connectivity_pct must lie in (0, 100]")
    n = n_users
    for attempt in range(MAX_RESAMPLES):
        rng = np.random.default_rng(np.random.SeedSequence([seed, attempt]))
        links = rng.random((n, n)) < connectivity_pct / 100.0
        np.fill_diagonal(links, False)
        w = np.zeros((n + 1, n + 1))
        w[:n, :n] = np.where(links, 1.0 - rng.random((n, n)), 0.0)
        w[np.arange(n), np.arange(n)] = 1.0 - rng.random(n)
        w[:n, n] = 1.0 - rng.random(n)
        w[:n] /= w[:n].sum(axis=1, keepdims=True)
        w[n, n] = 1.0
        lam = np.append(rng.uniform(0.01, 0.99, n), 1.0)
        x0 = np.append(rng.random(n), 0.5)
        net = OpinionNetwork(w, lam, x0)
        if validate(net) or not connectivity(net).lambda_connected:
            continue
        if not connectivity(free_network(net, n)).lambda_connected:
            continue
        try:
            extract_plant(net, n)
        except NotLambdaConnected:
            continue
        return net
    raise GenerationFailed(f"no lambda-connected network after {MAX_RESAMPLES} resamples")


def radical_user_scenario() -> ScenarioFile:
    """Six users, one of them an isolated fully prejudiced radical (user 5, index 4),
    plus the recommender at index 6.

    The recommender row is a self-loop with unit stubbornness; it is
    discarded when the plant is extracted.
    """
    rs = 6
    w = np.zeros((7, 7))
    w[0, 1], w[0, 3], w[0, rs] = 0.041, 0.397, 0.562
    w[1, 1], w[1, 5], w[1, rs] = 0.191, 0.011, 0.798
    w[2, 5], w[2, rs] = 0.224, 0.776
    w[3, 0] = 1.0
    w[4, 2], w[4, 3], w[4, 5] = 0.472, 0.357, 0.171
    w[5, 3] = 1.0
    w[rs, rs] = 1.0
    lam = [0.011, 0.001, 0.092, 0.064, 1.000, 0.055, 1.0]
    x0 = [0.67, 0.74, 0.83, 0.68, 0.0, 0.59, 0.5]
    return ScenarioFile.from_network("radical-user", OpinionNetwork(w, lam, x0), rs)


def run_trial(trial_id: int, config: TrialConfig) -> TrialRecord:
    start = time.perf_counter()
    report, feasible, error = None, False, ""
    try:
        net = generate_network(config.n_users, config.connectivity_pct, config.seed)
        rs = config.n_users
        plant = extract_plant(net, rs)
        report = compare_controllers(plant, net, rs, config.steps, config.horizon,
                                     soft_terminal=config.soft_terminal)
        feasible = True
    except TerminalInfeasible as exc:
        error = f"TerminalInfeasible: {exc}"
    except (FjrecError, ArithmeticError, np.linalg.LinAlgError) as exc:
        error = f"{type(exc).__name__}: {exc}"
    elapsed = 1000.0 * (time.perf_counter() - start)
    return TrialRecord(trial_id, config, report, feasible, elapsed, error)


def _run_trial_args(args):
    return run_trial(*args)


@dataclass
class BatchResult:
    records: list
    summary: dict = field(default_factory=dict)


def batch_configs(trials: int, master_seed: int = 0, templates=None):
    """Split `trials` into contiguous, as-even-as-possible blocks, one per template."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if templates is None:
        templates = [TrialConfig(connectivity_pct=c) for c in CONNECTIVITY_LEVELS]
    k = len(templates)
    return [replace(templates[i * k // trials], seed=_trial_seed(master_seed, i))
            for i in range(trials)]


def run_batch(trials: int, templates=None, workers: int = 1, master_seed: int = 0) -> BatchResult:
    """Run independent MF-vs-MB trials; results come back in trial order."""
    configs = batch_configs(trials, master_seed, templates)
    jobs = list(enumerate(configs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_trial_args, jobs, chunksize=max(1, trials // (4 * workers))))
    else:
        records = [run_trial(i, c) for i, c in jobs]
    return BatchResult(records, summarize(records))


def _quartiles(values):
    if not values:
        return {"count": 0}
    q1, med, q3 = np.percentile(values, [25, 50, 75])
    return {"count": len(values), "q1": float(q1), "median": float(med), "q3": float(q3),
            "min": float(np.min(values)), "max": float(np.max(values))}


def summarize(records) -> dict:
    """Per-connectivity distributions of cost improvement and opinion shift."""
    out = {}
    for pct in sorted({r.config.connectivity_pct for r in records}):
        group = [r for r in records if r.config.connectivity_pct == pct]
        ok = [r.report for r in group if r.mpc_feasible]
        out[str(pct)] = {
            "trials": len(group),
            "feasible": len(ok),
            "improvement_pct": _quartiles([r.improvement_pct for r in ok]),
            "improvement_cum_pct": _quartiles(
                [100.0 * (r.cost_mf_cum - r.cost_mb_cum) / r.cost_mf_cum
                 for r in ok if r.cost_mf_cum > 0]),
            "shift_mf_pct": _quartiles([v for r in ok
                                        for v in r.shift_mf.percent[~r.shift_mf.excluded]]),
            "shift_mb_pct": _quartiles([v for r in ok
                                        for v in r.shift_mb.percent[~r.shift_mb.excluded]]),
        }
    return out


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % v


def record_row(rec: TrialRecord) -> list:
    c, r = rec.config, rec.report
    fields = [rec.trial_id, c.seed, c.n_users, c.connectivity_pct, rec.mpc_feasible]
    if r is None:
        fields += [None] * 9
    else:
        fields += [r.cost_mf_cum, r.cost_mb_cum, r.cost_mf, r.cost_mb, r.improvement_pct,
                   r.shift_mf.mean, r.shift_mb.mean, r.shift_mf.max, r.shift_mb.max]
    fields.append(rec.wall_time_ms)
    return [_fmt(v) for v in fields]


def records_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        writer.writerow(record_row(rec))
    return buf.getvalue()


def export_csv(records, path):
    Path(path).write_text(records_csv(records), encoding="utf-8", newline="")


def read_csv(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def trajectory_dict(scenario: str, controller: str, run) -> dict:
    return {
        "scenario": scenario,
        "controller": controller,
        "states": run.states.tolist(),
        "inputs": run.inputs.tolist(),
        "costs": run.costs.tolist(),
    }


def export_json(obj, path):
    """Write a ScenarioFile, a trajectory dict or a list of TrialRecords as JSON."""
    if isinstance(obj, ScenarioFile):
        data = obj.to_dict()
    elif isinstance(obj, list) and obj and isinstance(obj[0], TrialRecord):
        data = [dict(zip(CSV_COLUMNS, record_row(r))) for r in obj]
    else:
        data = obj
    Path(path).write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8", newline="")


def load_scenario(path) -> ScenarioFile:
    with open(path, encoding="utf-8") as fh:
        return ScenarioFile.from_dict(json.load(fh))

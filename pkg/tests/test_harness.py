import json
import subprocess
import sys

import numpy as np
import pytest

from fjrec import cli
from fjrec.errors import GenerationFailed
from fjrec.harness import (
    CSV_COLUMNS,
    ScenarioFile,
    TrialConfig,
    batch_configs,
    export_csv,
    export_json,
    generate_network,
    load_scenario,
    radical_user_scenario,
    read_csv,
    records_csv,
    run_batch,
)
from fjrec.opinion_model import connectivity, fj_simulate, validate
from fjrec.plant import extract_plant


def _strip_time(text):
    return [line.rsplit(",", 1)[0] for line in text.splitlines()]


class TestGenerate:
    def test_full_connectivity(self):
        net = generate_network(3, 100, 1)
        users = net.adjacency[:3, :3]
        assert np.all(users > 0)
        assert np.all(net.adjacency[:3, 3] > 0)

    def test_deterministic(self):
        a, b = generate_network(10, 50, 77), generate_network(10, 50, 77)
        np.testing.assert_array_equal(a.adjacency, b.adjacency)
        np.testing.assert_array_equal(a.stubbornness, b.stubbornness)
        np.testing.assert_array_equal(a.initial_opinions, b.initial_opinions)
        assert not np.array_equal(a.adjacency, generate_network(10, 50, 78).adjacency)

    def test_density(self):
        n, links, pairs = 10, 0, 0
        for seed in range(1000):
            w = generate_network(n, 25, seed).adjacency[:n, :n]
            off = ~np.eye(n, dtype=bool)
            links += int((w[off] > 0).sum())
            pairs += n * (n - 1)
        assert abs(100 * links / pairs - 25) <= 2

    def test_valid_and_connected(self):
        for seed in range(50):
            net = generate_network(20, [25, 50, 75, 100][seed % 4], seed)
            assert validate(net) == []
            assert connectivity(net).lambda_connected
            assert net.adjacency[20, 20] == 1.0 and net.stubbornness[20] == 1.0

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            generate_network(1, 50, 0)
        with pytest.raises(ValueError):
            generate_network(5, 0, 0)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrialConfig(connectivity_pct=120)
        with pytest.raises(ValueError):
            TrialConfig(horizon=0)

    def test_generation_failed_is_error(self):
        assert issubclass(GenerationFailed, Exception)


class TestRadical:
    def test_structure(self):
        sc = radical_user_scenario()
        net = sc.network()
        assert validate(net) == []
        assert sc.rs_index == 6 and sc.n_total == 7
        w = net.adjacency
        np.testing.assert_allclose(w[:6].sum(axis=1), 1.0, atol=1e-12)
        # nobody listens to the radical user
        np.testing.assert_array_equal(w[:6, 4], 0)

    def test_radical_constant(self):
        net = radical_user_scenario().network()
        assert np.all(fj_simulate(net, 50)[:, 4] == 0.0)

    def test_plant(self):
        sc = radical_user_scenario()
        p = extract_plant(sc.network(), sc.rs_index)
        assert p.lambda_tilde[4] == 1.0
        np.testing.assert_array_equal(p.A[4], 0)
        assert p.B[4] == 0


class TestFormats:
    def test_header_only(self, tmp_path):
        path = tmp_path / "empty.csv"
        export_csv([], path)
        assert path.read_bytes() == (",".join(CSV_COLUMNS) + "\n").encode()

    def test_scenario_round_trip(self, tmp_path):
        sc = radical_user_scenario()
        path = tmp_path / "s.json"
        export_json(sc, path)
        back = load_scenario(path)
        assert back == sc
        np.testing.assert_allclose(back.network().adjacency, sc.network().adjacency, atol=1e-12)

    def test_generated_round_trip(self, tmp_path):
        net = generate_network(6, 50, 3)
        sc = ScenarioFile.from_network("g", net, 6)
        path = tmp_path / "g.json"
        export_json(sc, path)
        again = load_scenario(path).network()
        np.testing.assert_array_equal(again.adjacency, net.adjacency)
        np.testing.assert_array_equal(again.initial_opinions, net.initial_opinions)

    def test_invalid_scenario(self):
        d = radical_user_scenario().to_dict()
        d["adjacency"][0] = 0.5
        with pytest.raises(ValueError):
            ScenarioFile.from_dict(d).network()


@pytest.fixture(scope="module")
def small_batch():
    templates = [TrialConfig(n_users=6, connectivity_pct=c, steps=20, horizon=12)
                 for c in (25, 50, 75, 100)]
    return templates, run_batch(8, templates, master_seed=5)


class TestBatch:
    def test_split(self):
        cfgs = batch_configs(4)
        assert [c.connectivity_pct for c in cfgs] == [25, 50, 75, 100]
        cfgs = batch_configs(10)
        assert [c.connectivity_pct for c in cfgs].count(25) in (2, 3)
        assert len({c.seed for c in cfgs}) == 10

    def test_rows(self, small_batch, tmp_path):
        _, res = small_batch
        path = tmp_path / "b.csv"
        export_csv(res.records, path)
        rows = read_csv(path)
        assert len(rows) == 8
        assert list(rows[0]) == list(CSV_COLUMNS)
        raw = path.read_bytes()
        assert b"\r" not in raw

    def test_records(self, small_batch):
        _, res = small_batch
        for rec in res.records:
            assert (rec.report is not None) == rec.mpc_feasible
            if rec.mpc_feasible:
                r = rec.report
                assert r.improvement_pct >= -1e-6
                assert r.cost_mb_cum <= r.cost_mf_cum + 1e-6
        assert set(res.summary) == {"25", "50", "75", "100"}

    def test_float_precision(self, small_batch):
        _, res = small_batch
        rec = next(r for r in res.records if r.mpc_feasible)
        row = dict(zip(CSV_COLUMNS, records_csv([rec]).splitlines()[1].split(",")))
        assert float(row["cost_mf_cum"]) == rec.report.cost_mf_cum

    def test_deterministic_across_workers(self, small_batch):
        templates, res = small_batch
        again = run_batch(8, templates, workers=2, master_seed=5)
        assert _strip_time(records_csv(res.records)) == _strip_time(records_csv(again.records))

    def test_json_records(self, small_batch, tmp_path):
        _, res = small_batch
        path = tmp_path / "b.json"
        export_json(res.records, path)
        data = json.loads(path.read_text())
        assert len(data) == 8 and list(data[0]) == list(CSV_COLUMNS)


class TestCli:
    @pytest.fixture
    def scenario_path(self, tmp_path):
        path = tmp_path / "radical.json"
        export_json(radical_user_scenario(), path)
        return path

    def test_simulate(self, scenario_path, tmp_path):
        out = tmp_path / "traj.json"
        assert cli.main(["simulate", str(scenario_path), "--controller", "mf",
                         "--steps", "10", "--out", str(out)]) == 0
        data = json.loads(out.read_text())
        assert data["controller"] == "mf" and data["scenario"] == "radical-user"
        assert len(data["states"]) == 11 and len(data["inputs"]) == 11 and len(data["costs"]) == 11

    def test_simulate_mb(self, scenario_path, capsys):
        assert cli.main(["simulate", str(scenario_path), "--steps", "5"]) == 0
        assert json.loads(capsys.readouterr().out)["controller"] == "mb"

    def test_bounds(self, scenario_path, capsys):
        assert cli.main(["bounds", str(scenario_path)]) == 0
        data = json.loads(capsys.readouterr().out)
        assert all(lo <= hi for lo, hi in zip(data["lower"], data["upper"]))

    def test_equivalence(self, scenario_path, capsys):
        assert cli.main(["equivalence", str(scenario_path)]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["equivalent"] is False and data["gap"] > 0

    def test_scenario(self, tmp_path, capsys):
        out = tmp_path / "s.json"
        assert cli.main(["scenario", "radical-user", "--out", str(out)]) == 0
        assert load_scenario(out) == radical_user_scenario()
        summary = json.loads(capsys.readouterr().err)
        assert abs(summary["improvement_pct"] - 57) <= 7

    def test_batch(self, tmp_path):
        out = tmp_path / "b.csv"
        assert cli.main(["batch", "--trials", "4", "--n-users", "4", "--steps", "5",
                         "--horizon", "6", "--out", str(out)]) == 0
        assert len(read_csv(out)) == 4

    def test_missing_file(self, tmp_path):
        assert cli.main(["bounds", str(tmp_path / "nope.json")]) != 0

    def test_short_horizon_fails(self, scenario_path):
        assert cli.main(["simulate", str(scenario_path), "--horizon", "2"]) != 0

    def test_soft_terminal(self, scenario_path, capsys):
        assert cli.main(["simulate", str(scenario_path), "--horizon", "2", "--steps", "3",
                         "--soft-terminal", "1e6"]) == 0

    def test_module_entry(self, scenario_path):
        proc = subprocess.run([sys.executable, "-m", "fjrec", "bounds", str(scenario_path)],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert "lower" in json.loads(proc.stdout)

    def test_bad_usage(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["nonsense"])
        assert exc.value.code != 0

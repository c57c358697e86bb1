import json
import subprocess
import sys

import pytest

from bai_reductions import BanditInstance
from bai_reductions.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def usage(capsys, *argv):
    with pytest.raises(SystemExit) as exc:
        main(list(argv))
    capsys.readouterr()
    return exc.value.code


class TestInstance:
    def test_figure(self, tmp_path, capsys):
        p = tmp_path / "fig.json"
        code, _, _ = run(capsys, "instance", "--gen", "figure", "--k", "32", "--gap2", "0.1",
                         "--gap-rest", "0.8", "--var", "1:2", "--seed", "7", "--out", str(p))
        assert code == 0
        inst = BanditInstance.from_json(p.read_text())
        assert inst.K == 32 and inst.best_arm == 0

    def test_adversarial_stdout(self, capsys):
        code, out, _ = run(capsys, "instance", "--gen", "adversarial", "--k", "32", "--budget", "6000",
                           "--seed", "7")
        assert code == 0
        inst = BanditInstance.from_json(out)
        assert inst.K == 32 and inst.variances[-1] == 1.0

    def test_explicit(self, tmp_path, capsys):
        p = tmp_path / "e.json"
        code, _, _ = run(capsys, "instance", "--gen", "explicit", "--means", "0.1,0.9",
                         "--variances", "1,1", "--seed", "0", "--out", str(p))
        assert code == 0 and BanditInstance.from_json(p.read_text()).best_arm == 1

    def test_same_seed_same_file(self, tmp_path, capsys):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for p in (a, b):
            run(capsys, "instance", "--k", "16", "--seed", "5", "--out", str(p))
        assert a.read_bytes() == b.read_bytes()

    def test_missing_seed(self, tmp_path, capsys):
        p = tmp_path / "x.json"
        assert usage(capsys, "instance", "--k", "4", "--out", str(p)) == 2
        assert not p.exists()

    @pytest.mark.parametrize("argv", [
        ["--gen", "figure", "--k", "1"],
        ["--gen", "adversarial", "--k", "4", "--budget", "6"],
        ["--gen", "adversarial", "--k", "4"],
        ["--gen", "explicit", "--means", "0.3,0.3", "--variances", "1,1"],
        ["--gen", "figure"],
    ])
    def test_bad_params_write_nothing(self, tmp_path, capsys, argv):
        p = tmp_path / "x.json"
        code, _, err = run(capsys, "instance", *argv, "--seed", "1", "--out", str(p))
        assert code == 2 and not p.exists()
        assert len(err.strip().splitlines()) == 1

    def test_io_error(self, tmp_path, capsys):
        code, _, _ = run(capsys, "instance", "--k", "4", "--seed", "1",
                         "--out", str(tmp_path / "missing" / "x.json"))
        assert code == 4

    def test_unknown_flag(self, capsys):
        assert usage(capsys, "instance", "--k", "4", "--seed", "1", "--colour", "red") == 2


class TestRun:
    def test_json_result(self, tmp_path, capsys):
        p = tmp_path / "i.json"
        run(capsys, "instance", "--k", "8", "--seed", "2", "--out", str(p))
        for algo in ("sh", "shvar", "uniform", "fc2fb_pekhn"):
            code, out, _ = run(capsys, "run", "--instance", str(p), "--algo", algo, "--budget", "600",
                               "--seed", "3")
            doc = json.loads(out)
            assert code == 0 and doc["pulls_used"] <= 600 and doc["best_arm"] == 0
            assert sum(doc["per_arm_pulls"]) == doc["pulls_used"]

    def test_infeasible_budget(self, tmp_path, capsys):
        p = tmp_path / "i.json"
        run(capsys, "instance", "--k", "8", "--seed", "2", "--out", str(p))
        code, _, _ = run(capsys, "run", "--instance", str(p), "--algo", "sh", "--budget", "10", "--seed", "1")
        assert code == 2

    def test_missing_instance_file(self, tmp_path, capsys):
        code, _, _ = run(capsys, "run", "--instance", str(tmp_path / "nope.json"), "--algo", "sh",
                         "--budget", "10", "--seed", "1")
        assert code == 4

    def test_bad_json(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        code, _, _ = run(capsys, "run", "--instance", str(p), "--algo", "sh", "--budget", "10", "--seed", "1")
        assert code == 2


SWEEP = ["--k", "8", "--budgets", "200,400", "--algos", "sh,shvar,fc2fb_pekhn", "--trials", "20",
         "--threads", "1"]


class TestSweep:
    def test_rows_and_repeatability(self, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for p in (a, b):
            code, _, _ = run(capsys, "sweep-budget", *SWEEP, "--seed", "11", "--out", str(p))
            assert code == 0
        assert a.read_bytes() == b.read_bytes()
        assert len(a.read_text().splitlines()) == 1 + 3 * 2
        meta = json.loads((tmp_path / "a.meta.json").read_text())
        assert meta["skipped"] == [] and meta["config"]["trials"] == 20

    def test_threads_do_not_change_output(self, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run(capsys, "sweep-budget", *SWEEP, "--seed", "11", "--out", str(a))
        argv = [x if x != "1" else "4" for x in SWEEP]
        run(capsys, "sweep-budget", *argv, "--seed", "11", "--out", str(b))
        assert a.read_bytes() == b.read_bytes()

    def test_env_threads(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("BAI_THREADS", "2")
        p = tmp_path / "a.csv"
        argv = SWEEP[:-2]
        assert run(capsys, "sweep-budget", *argv, "--seed", "11", "--out", str(p))[0] == 0
        assert json.loads((tmp_path / "a.meta.json").read_text())["workers"] == 2

    def test_skipped_cells_exit_3(self, tmp_path, capsys):
        p = tmp_path / "s.csv"
        code, _, _ = run(capsys, "sweep-budget", "--k", "8", "--budgets", "10,200", "--algos", "sh",
                         "--trials", "5", "--threads", "1", "--seed", "1", "--out", str(p))
        assert code == 3
        assert len(p.read_text().splitlines()) == 2
        skipped = json.loads((tmp_path / "s.meta.json").read_text())["skipped"]
        assert [s["axis_value"] for s in skipped] == [10] and skipped[0]["reason"]

    def test_missing_seed(self, tmp_path, capsys):
        p = tmp_path / "x.csv"
        code, _, _ = run(capsys, "sweep-budget", *SWEEP, "--out", str(p))
        assert code == 2 and not p.exists()

    def test_unknown_algorithm(self, tmp_path, capsys):
        p = tmp_path / "x.csv"
        code, _, _ = run(capsys, "sweep-budget", "--k", "8", "--budgets", "200", "--algos", "lucb",
                         "--trials", "5", "--seed", "1", "--out", str(p))
        assert code == 2 and not p.exists()

    def test_config_file(self, tmp_path, capsys):
        cfg = {
            "experiment_id": "fig2-small",
            "instance": {"generator": "figure", "params": {"gap2": 0.1, "gap_rest": 0.8, "var_lo": 1, "var_hi": 2},
                         "seed": 4},
            "algorithms": [{"name": "sh"}, {"name": "shvar", "params": {"cumulative": False}}],
            "sweep": {"axis": "K", "values": [8, 16], "budget": 600},
            "trials": 10,
            "master_seed": 5,
        }
        c = tmp_path / "c.json"
        c.write_text(json.dumps(cfg))
        p = tmp_path / "o.csv"
        code, _, _ = run(capsys, "sweep-arms", "--config", str(c), "--threads", "1", "--out", str(p))
        lines = p.read_text().splitlines()
        assert code == 0 and len(lines) == 1 + 4
        assert lines[1].startswith("fig2-small,sh,K,8,8,10,")
        assert "shvar(cumulative=False)" in p.read_text()

    def test_config_axis_mismatch(self, tmp_path, capsys):
        c = tmp_path / "c.json"
        c.write_text(json.dumps({"instance": {"generator": "figure"}, "algorithms": [{"name": "sh"}],
                                 "sweep": {"axis": "budget", "values": [10]}, "trials": 1, "master_seed": 1}))
        p = tmp_path / "o.csv"
        assert run(capsys, "sweep-arms", "--config", str(c), "--out", str(p))[0] == 2
        assert not p.exists()

    def test_bad_config_json(self, tmp_path, capsys):
        c = tmp_path / "c.json"
        c.write_text("[")
        p = tmp_path / "o.csv"
        assert run(capsys, "sweep-budget", "--config", str(c), "--out", str(p))[0] == 2
        assert not p.exists()

    def test_unwritable_output(self, tmp_path, capsys):
        code, _, _ = run(capsys, "sweep-budget", *SWEEP, "--seed", "1", "--out", str(tmp_path / "no" / "x.csv"))
        assert code == 4

    def test_arm_sweep_inline(self, tmp_path, capsys):
        p = tmp_path / "k.csv"
        code, _, _ = run(capsys, "sweep-arms", "--ks", "8,16", "--budget", "600", "--algos", "sh",
                         "--trials", "5", "--threads", "1", "--seed", "3", "--out", str(p))
        assert code == 0 and len(p.read_text().splitlines()) == 3


class TestBound:
    def test_fc2fb(self, capsys):
        code, out, _ = run(capsys, "bound", "fc2fb", "--b", "10000", "--a", "100", "--delta0-nats", "1", "--q", "1")
        assert code == 0 and abs(float(out) - 0.4577) <= 1e-3
        assert len(out.strip()) == len("0.457759964957")

    def test_pekhn(self, capsys):
        code, out, _ = run(capsys, "bound", "pekhn", "--k", "2", "--sigma2", "1,1", "--gap", "0.5", "--delta", "0.1")
        assert code == 0 and out.strip() == "2618"

    def test_fcw2s_l(self, capsys):
        code, out, _ = run(capsys, "bound", "fcw2s-l", "--delta", "0.01", "--delta0", "0.0459849")
        assert code == 0 and out.strip() == "27"

    @pytest.mark.parametrize("argv,expected", [
        (["fc2fb-threshold", "--a", "100", "--delta0-nats", "1"], 1072.27),
        (["fc2at", "--t", "1000000", "--a", "100", "--delta0-nats", "1"], 3 * 2.7e-14),
        (["fcw2s-stop", "--l", "27", "--f", "100"], 2700),
        (["fb-sample-complexity", "--F", "1", "--H", "100", "--delta", "0.01"], 461),
    ])
    def test_others(self, capsys, argv, expected):
        code, out, _ = run(capsys, "bound", *argv)
        assert code == 0 and float(out) == pytest.approx(expected, rel=0.1)

    @pytest.mark.parametrize("argv", [
        ["fc2fb", "--b", "10000"],
        ["fc2fb", "--b", "100", "--a", "1", "--delta0", "0.9"],
        ["fc2fb", "--b", "100", "--a", "1", "--delta0", "0.1", "--delta0-nats", "2"],
        ["pekhn", "--k", "2", "--sigma2", "1,1", "--gap", "1.5", "--delta", "0.1"],
        ["pekhn", "--k", "3", "--sigma2", "1,1", "--gap", "0.5", "--delta", "0.1"],
        ["fcw2s-l", "--delta", "0.01", "--delta0", "0.2"],
        ["fc2at", "--t", "100", "--a", "100", "--delta0-nats", "1"],
    ])
    def test_invalid(self, capsys, argv):
        assert run(capsys, "bound", *argv)[0] == 2

    def test_bad_number(self, capsys):
        assert usage(capsys, "bound", "pekhn", "--sigma2", "a,b") == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "bai_reductions", "bound", "fcw2s-stop", "--l", "2", "--f", "3"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip() == "6"
    proc = subprocess.run([sys.executable, "-m", "bai_reductions", "instance", "--k", "4"],
                          capture_output=True, text=True)
    assert proc.returncode == 2 and proc.stderr.count("\n") == 1

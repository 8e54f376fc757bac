import json
import os

import numpy as np
import pytest

from partmc.cli import main
from partmc.persist import read_bank, read_json, sha256_file

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def _config(tmp_path, name="c.json", **changes):
    raw = {
        "version": 1, "seed": 4,
        "target": {"kind": "symmetric_mixture_1d", "mu": 1.0, "sigma": 0.4},
        "proposal": {"kind": "uniform", "tau": 0.2},
        "n": 2, "N0": 10, "ell": 1, "N": [5], "T": [50],
        "explore": {"betas": [1.0, 0.5], "inits": [[-1.0], [1.0]]},
    }
    raw.update(changes)
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return str(path)


def _manifest_ok(out):
    m = read_json(os.path.join(out, "manifest.json"))
    for p in m["artifacts"].values():
        assert os.path.exists(os.path.join(out, p))
    return m


def test_explore_writes_bank_and_manifest(tmp_path):
    cfg = _config(tmp_path)
    out = str(tmp_path / "out")
    assert main(["explore", "--config", cfg, "--out", out]) == 0
    assert len(read_bank(os.path.join(out, "bank.csv"))) == 10
    m = _manifest_ok(out)
    assert m["config_sha256"] == sha256_file(cfg) and m["seed"] == 4


def test_explore_at_full_scale_populates_every_quadrant(tmp_path):
    out = str(tmp_path / "out")
    assert main(["explore", "--config", os.path.join(ROOT, "configs", "mixture2d.json"), "--out", out]) == 0
    pts = read_bank(os.path.join(out, "bank.csv")).points
    assert len(pts) == 2000
    for sx in (-1, 1):
        for sy in (-1, 1):
            assert np.any((np.sign(pts[:, 0]) == sx) & (np.sign(pts[:, 1]) == sy))


def test_missing_seed_is_a_config_error(tmp_path, capsys):
    raw = json.loads(open(_config(tmp_path)).read())
    del raw["seed"]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(raw))
    assert main(["explore", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "seed" in capsys.readouterr().err


def test_seed_out_of_range(tmp_path):
    assert main(["explore", "--config", _config(tmp_path), "--out", str(tmp_path / "o"), "--seed", "-3"]) == 2


def test_run_is_byte_identical_on_rerun(tmp_path):
    cfg = _config(tmp_path, N0=300, N=[60], T=[300])
    outs = [str(tmp_path / f"r{i}") for i in range(2)]
    for out in outs:
        assert main(["run", "--config", cfg, "--out", out]) == 0
    for name in ("report.json", "traces.csv", "weights.json", "partition_0.json"):
        a, b = (open(os.path.join(o, name), "rb").read() for o in outs)
        assert a == b, name
    m = _manifest_ok(outs[0])
    assert set(m["artifacts"]) >= {"report", "traces", "weights", "partition_0"}


def test_seed_flag_overrides_config(tmp_path):
    cfg = _config(tmp_path, N0=50)
    a, b, c = (str(tmp_path / x) for x in "abc")
    main(["explore", "--config", cfg, "--out", a])
    main(["explore", "--config", cfg, "--out", b, "--seed", "4"])
    main(["explore", "--config", cfg, "--out", c, "--seed", "5"])
    bank = lambda o: open(os.path.join(o, "bank.csv"), "rb").read()
    assert bank(a) == bank(b) and bank(a) != bank(c)
    assert read_json(os.path.join(c, "manifest.json"))["seed"] == 5


def test_single_region_run_equals_its_chain_mean(tmp_path):
    cfg = _config(tmp_path, n=1, N0=200, N=[50], T=[400])
    out = str(tmp_path / "o")
    assert main(["run", "--config", cfg, "--out", out]) == 0
    report = read_json(os.path.join(out, "report.json"))
    states = np.loadtxt(os.path.join(out, "traces.csv"), delimiter=",", skiprows=1, usecols=3)
    assert report["mu_hat"][0] == pytest.approx(states.mean(), rel=1e-12)


def test_partition_naive_and_pt(tmp_path):
    cfg = _config(tmp_path, N0=300, N=[60], T=[100])
    for cmd, artifact in (("partition", "partition_0.json"), ("naive", "report.json"), ("pt", "cold_chain.csv")):
        out = str(tmp_path / cmd)
        assert main([cmd, "--config", cfg, "--out", out]) == 0
        assert os.path.exists(os.path.join(out, artifact))
        _manifest_ok(out)
    out = str(tmp_path / "reuse")
    assert main(["partition", "--config", cfg, "--out", out, "--bank",
                 str(tmp_path / "partition" / "manifest.json")]) == 1
    main(["explore", "--config", cfg, "--out", str(tmp_path / "ex")])
    assert main(["partition", "--config", cfg, "--out", out, "--bank", str(tmp_path / "ex" / "bank.csv")]) == 0
    assert (open(os.path.join(out, "partition_0.json"), "rb").read()
            == open(str(tmp_path / "partition" / "partition_0.json"), "rb").read())


def test_stage_failure_exits_one(tmp_path, capsys):
    # the only exploration start is outside the target support
    cfg = _config(tmp_path, target={"kind": "s_shape"}, explore={"betas": [1.0], "inits": [[5.0, 5.0]]})
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "explore" in capsys.readouterr().err


def test_analyze_tables(tmp_path):
    out = str(tmp_path / "a")
    assert main(["analyze", "cycle", "--out", out, "--m", "16", "--arcs", "4,4,4,4"]) == 0
    row = open(os.path.join(out, "cycle_ratio.csv")).read().splitlines()[1].split(",")
    assert row[:2] == ["16", "4-4-4-4"]
    assert main(["analyze", "cheeger", "--out", out, "--replications", "20"]) == 0
    holds = np.loadtxt(os.path.join(out, "cheeger.csv"), delimiter=",", skiprows=1, usecols=5)
    assert holds.all()
    assert main(["analyze", "objective_scan", "--out", out]) == 0
    assert open(os.path.join(out, "objective_scan.csv")).readline().strip() == "R,value_real,value_ncut,nu_par_bound"


def test_bench_cycle_and_single_replication_se(tmp_path, capsys):
    out = str(tmp_path / "b")
    assert main(["bench", "cycle", "--out", out]) == 0
    lines = open(os.path.join(out, "summary.csv")).read().splitlines()
    assert lines[0] == "method,mean,se"
    assert all(line.endswith(",") for line in lines[1:])
    assert os.path.exists(os.path.join(out, "cycle_ratios.csv"))
    _manifest_ok(out)
    capsys.readouterr()


def test_bench_replications_one_leaves_se_empty(tmp_path):
    cfg = _config(tmp_path, N0=300, N=[60], T=[100], n=2)
    out = str(tmp_path / "b")
    assert main(["bench", "mixture2d", "--config", cfg, "--out", out, "--replications", "1"]) == 0
    rows = [line.split(",") for line in open(os.path.join(out, "summary.csv")).read().splitlines()[1:]]
    assert [r[0] for r in rows] == ["ours", "parallel_tempering", "naive"]
    assert all(r[2] == "" and float(r[1]) >= 0 for r in rows)


def test_unknown_benchmark(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["bench", "nonesuch", "--out", str(tmp_path)])
    assert info.value.code == 2


def test_thread_cap_does_not_change_bench_output(tmp_path, monkeypatch):
    cfg = _config(tmp_path, N0=300, N=[60], T=[100])
    data = []
    for threads in ("1", "3"):
        monkeypatch.setenv("PARTMC_THREADS", threads)
        out = str(tmp_path / f"t{threads}")
        assert main(["bench", "mixture2d", "--config", cfg, "--out", out, "--replications", "3"]) == 0
        data.append(open(os.path.join(out, "replications.csv"), "rb").read())
    assert data[0] == data[1]

import csv
import json

import pytest

from wishart_shocks.cli import ConfigError, DEFAULTS, main, parse_pairs, resolve


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_density_contract_and_columns(tmp_path):
    out = tmp_path / "d.csv"
    assert main(["density", "--out", str(out), "n_lambda=200"]) == 0
    rows = read_csv(out)
    assert rows[0] == ["tau", "lambda", "rho"]
    assert len(rows) == 1 + 3 * 200
    assert all(float(r[2]) >= 0 for r in rows[1:])
    man = json.loads((tmp_path / "d.manifest.json").read_text())
    assert all(man["contracts"].values())
    assert man["config_echo"]["n_lambda"] == 200
    assert man["wall_time"] > 0


def test_edges_locate_critical_time(tmp_path):
    out = tmp_path / "e.csv"
    assert main(["edges", "--out", str(out), "a=1.5", "tau_max=3"]) == 0
    last = read_csv(out)[-1]
    assert float(last[0]) == pytest.approx(2.25, abs=1e-6)
    assert last[-1] == "1"


def test_edges_warn_without_bracket(tmp_path):
    out = tmp_path / "e.csv"
    assert main(["edges", "--out", str(out), "tau_min=0.1", "tau_max=0.5"]) == 0
    man = json.loads((tmp_path / "e.manifest.json").read_text())
    assert man["warnings"]


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_byte_identical_reruns(tmp_path, fmt, monkeypatch):
    args = ["mc-density", "--format", fmt, "N=20", "M=20", "trials=30", "--seed", "7"]
    a, b = tmp_path / f"a.{fmt}", tmp_path / f"b.{fmt}"
    monkeypatch.setenv("WISHART_SHOCKS_THREADS", "1")
    main(args + ["--out", str(a)])
    monkeypatch.setenv("WISHART_SHOCKS_THREADS", "4")
    main(args + ["--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_seed_changes_output(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    base = ["mc-density", "N=10", "M=10", "trials=10"]
    main(base + ["--seed", "1", "--out", str(a)])
    main(base + ["seed=2", "--out", str(b)])
    assert a.read_bytes() != b.read_bytes()


def test_json_structure(tmp_path):
    out = tmp_path / "b.json"
    assert main(["bessoid-map", "--format", "json", "--out", str(out), "n_mod=3",
                 "ts=0,1"]) == 0
    doc = json.loads(out.read_text())
    assert doc["columns"] == ["re_s", "im_s", "t", "abs_b", "arg_b"]
    assert len(doc["rows"]) == 6
    assert doc["manifest"]["wall_time"] == 0
    assert doc["manifest"]["contracts"] == {"finite": True}


def test_csv_floats_round_trip(tmp_path):
    out = tmp_path / "c.csv"
    main(["characteristics", "--out", str(out), "n_tau=5"])
    rows = read_csv(out)
    assert rows[0][-3:] == ["tau", "re_z", "im_z"]
    for r in rows[1:]:
        for cell in r[4:]:
            assert repr(float(cell)) == cell


def test_acp_compare_small(tmp_path):
    out = tmp_path / "q.csv"
    assert main(["acp-compare", "--out", str(out), "trials=4000", "N=1", "M=2"]) == 0


def test_config_file_with_comments(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# density settings\n\na = 2.0   # start\nn_lambda=50\ntaus = 1, 4\n")
    out = tmp_path / "d.csv"
    assert main(["density", "--config", str(cfg), "--out", str(out), "n_lambda=60"]) == 0
    man = json.loads((tmp_path / "d.manifest.json").read_text())
    assert man["config_echo"]["a"] == 2.0
    assert man["config_echo"]["n_lambda"] == 60
    assert man["config_echo"]["taus"] == [1.0, 4.0]


@pytest.mark.parametrize("argv", [
    ["density", "bogus=1"],
    ["density", "a=abc"],
    ["density", "taus="],
    ["density", "novalue"],
    ["nosuchcommand"],
    ["density", "--config", "/nonexistent/file.cfg"],
    ["density", "--out", "/nonexistent/dir/x.csv"],
    ["density", "--seed", "-3"],
    ["density", "--format", "xml"],
    ["density", "a=-1"],
])
def test_config_errors_exit_2(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 2


def test_contract_violation_exit_1(tmp_path, capsys):
    out = tmp_path / "p.csv"
    assert main(["pde-check", "--out", str(out), "tol=1e-30"]) == 1
    assert "contract violated" in capsys.readouterr().err
    assert out.exists()


def test_parse_pairs_reports_line():
    with pytest.raises(ConfigError, match=":2:"):
        parse_pairs(["a=1", "oops"], "f")


def test_resolve_types():
    params, seed = resolve("acp-compare", {"z": "1+2j, -1"}, {"trials": "50", "seed": "4"})
    assert params["z"] == [1 + 2j, -1 + 0j]
    assert params["trials"] == 50 and seed == 4
    assert set(params) == set(DEFAULTS["acp-compare"])

import datetime as dt
import json

import numpy as np
import pytest

from rmtmarket.cli import LOCK_NAME, main
from rmtmarket.correlation import PricePanel
from rmtmarket.ingest import write_prices


def iso_dates(t):
    start = dt.date(1992, 1, 2)
    return tuple((start + dt.timedelta(days=j)).isoformat() for j in range(t))


def run(args, env=None):
    return main(args, environ=env or {})


def usage(args, capsys, env=None):
    with pytest.raises(SystemExit) as info:
        run(args, env)
    assert info.value.code == 2
    return capsys.readouterr().err


def test_help_lists_recipes(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--help"], environ={})
    assert info.value.code == 0
    out = capsys.readouterr().out
    for cmd in ("ensembles", "modes", "dynamics", "states"):
        assert f"rmtmarket {cmd}" in out


def test_no_command(capsys):
    assert run([]) == 2


def test_missing_required_flag(tmp_path, capsys):
    assert "--n" in usage(["ensembles", "--t", "10", "--out", str(tmp_path)], capsys)
    assert "--out" in usage(["ensembles", "--n", "5", "--t", "10"], capsys)


def test_shift_zero_and_n_group_zero(tmp_path, capsys):
    usage(["dynamics", "--shift", "0", "--out", str(tmp_path / "d")], capsys)
    usage(["modes", "--n-group", "0", "--t", "100", "--out", str(tmp_path / "m")], capsys)
    assert not (tmp_path / "d" / LOCK_NAME).exists()


def test_ensembles_outputs(tmp_path):
    out = tmp_path / "e"
    assert run(["ensembles", "--n", "20", "--t", "200", "--ensemble", "5", "--bins", "20", "--out", str(out)]) == 0
    head = (out / "spectrum_u0.csv").read_text().splitlines()
    assert head[0] == "bin_center,density" and len(head) == 21
    cfg = json.loads((out / "config.json").read_text())
    assert cfg["n"] == 20 and cfg["command"] == "ensembles"
    summary = json.loads((out / "summary.json").read_text())
    assert summary["u0"]["q"] == 10


def test_env_override_and_precedence(tmp_path):
    out = tmp_path / "e"
    env = {"RMT_N": "12", "RMT_ENSEMBLE": "3", "RMT_SEED": "5"}
    assert run(["ensembles", "--t", "40", "--seed", "6", "--out", str(out)], env) == 0
    cfg = json.loads((out / "config.json").read_text())
    assert cfg["n"] == 12 and cfg["ensemble"] == 3 and cfg["seed"] == 6
    assert cfg["env_overrides"] == env


def test_bad_env_value(tmp_path, capsys):
    assert "RMT_N" in usage(["ensembles", "--t", "4", "--out", str(tmp_path)], capsys, {"RMT_N": "x"})


def test_json_format(tmp_path):
    out = tmp_path / "m"
    assert run(["modes", "--blocks", "5:0.5,4:0.3", "--t", "300", "--format", "json", "--out", str(out)]) == 0
    ladder = json.loads((out / "ladder.json").read_text())
    assert ladder[0]["rank"] == 1 and len(ladder) == 9
    assert json.loads((out / "group.json").read_text())["ids"][0] == "s0"


def test_lock_detected(tmp_path, capsys):
    out = tmp_path / "x"
    out.mkdir()
    (out / LOCK_NAME).write_text("1\n")
    assert run(["ensembles", "--n", "4", "--t", "8", "--ensemble", "2", "--out", str(out)]) == 3
    assert "in use" in capsys.readouterr().err


def test_analysis_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "p.csv"
    bad.write_text("date,A\n2000-01-01,xyz\n")
    assert run(["dynamics", "--input", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert "line 2" in capsys.readouterr().err


def test_dynamics_window_count(tmp_path):
    rng = np.random.default_rng(1)
    t = 8069  # 8068 returns
    panel = PricePanel(np.exp(0.01 * rng.standard_normal((3, t)).cumsum(axis=1)), ("a", "b", "c"),
                       iso_dates(t))
    write_prices(panel, tmp_path / "p.csv")
    out = tmp_path / "d"
    assert run(["dynamics", "--input", str(tmp_path / "p.csv"), "--m", "20", "--shift", "10",
                "--out", str(out)]) == 0
    assert len((out / "stats.csv").read_text().splitlines()) == 805 + 1


def test_states_direct_k_and_default_epsilon(tmp_path):
    out = tmp_path / "s"
    assert run(["states", "--n", "10", "--m", "100", "--epochs", "30", "--k-min", "4", "--k-max", "4",
                "--n-init", "3", "--out", str(out)]) == 0
    cfg = json.loads((out / "config.json").read_text())
    assert cfg["epsilon"] == 0.6
    summary = json.loads((out / "summary.json").read_text())
    assert summary["k"] == 4 and summary["k_star"] is None


def test_modes_with_sectors(tmp_path):
    rng = np.random.default_rng(2)
    panel = PricePanel(np.exp(0.01 * rng.standard_normal((4, 50)).cumsum(axis=1)), ("d", "c", "b", "a"),
                       iso_dates(50))
    write_prices(panel, tmp_path / "p.csv")
    (tmp_path / "s.csv").write_text("asset_id,sector\na,IT\nc,CD\n")
    out = tmp_path / "m"
    assert run(["modes", "--input", str(tmp_path / "p.csv"), "--sectors", str(tmp_path / "s.csv"),
                "--n-group", "2", "--out", str(out)]) == 0
    rows = (out / "assets.csv").read_text().splitlines()[1:]
    assert rows == ["c,CD", "a,IT", "b,other", "d,other"]

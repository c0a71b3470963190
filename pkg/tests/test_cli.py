import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from smcmc.cli import main, summarize_runs
from smcmc.config import ConfigError, config_digest, dump_config, load_config, parse_config
from smcmc.io import CsvFormatError, Table, fmt, load_csv, read_csv, sha256_file, write_csv

MIX = {
    "algorithm": "smcmc",
    "model": "mixture",
    "seed": 3,
    "L": 40,
    "schedule": {"epsilon": 0.5, "m_cap": 20, "batch_size": 10},
    "data": {"synthetic": {"n": 30, "seed": 1}},
}


def _write_yaml(path: Path, raw: dict) -> Path:
    path.write_text(yaml.safe_dump(raw))
    return path


# --------------------------------------------------------------------------- config


def test_defaults_and_round_trip(tmp_path):
    cfg = parse_config(MIX)
    assert cfg.schedule.m_cap == 20 and cfg.mixture.k == 4 and cfg.chunk_size == 64
    again = parse_config(dump_config(cfg))
    assert config_digest(again) == config_digest(cfg)
    cfg2 = parse_config({**MIX, "output_dir": "elsewhere", "workers": 4})
    assert config_digest(cfg2) == config_digest(cfg)
    cfg3 = parse_config({**MIX, "seed": 4})
    assert config_digest(cfg3) != config_digest(cfg)


@pytest.mark.parametrize(
    "patch,key",
    [
        ({"schedule": {"epsilon": 1.5}}, "schedule.epsilon"),
        ({"schedule": {"epsilon": 0.0}}, "schedule.epsilon"),
        ({"L": 1}, "L"),
        ({"bogus": 1}, "bogus"),
        ({"schedule": {"m_cap": 10, "m_min": 20}}, "schedule"),
        ({"algorithm": "mcmc"}, "<root>"),
        ({"data": {"synthetic": {"n": 5}, "path": "x.csv"}}, "data"),
    ],
)
def test_config_errors_name_the_key(patch, key):
    raw = {**MIX, **patch}
    with pytest.raises(ConfigError) as e:
        parse_config(raw)
    assert str(e.value).startswith(key)


def test_missing_data_file(tmp_path):
    with pytest.raises(ConfigError, match="data.path"):
        parse_config({**MIX, "data": {"path": "nope.csv"}}, tmp_path)


# --------------------------------------------------------------------------- CSV


def test_heart_cutoff_is_strict(tmp_path):
    p = tmp_path / "h.csv"
    p.write_text("sbp,tobacco,obesity,age\n139,0.1,25.0,40\n140,0.0,30.5,52\n")
    rows = load_csv(p, "heart")
    assert [y for _, y in rows] == [0, 1]
    assert np.array_equal(rows[1][0], [30.5, 52.0])


def test_csv_errors_report_line_numbers(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("y\n1.0\nabc\n")
    with pytest.raises(CsvFormatError) as e:
        load_csv(p, "mixture")
    assert e.value.line == 3
    p.write_text("x1,x2,y\n0,0,1\n0,1,2\n")
    with pytest.raises(CsvFormatError) as e:
        load_csv(p, "gp")
    assert e.value.line == 3
    p.write_text("x1,y\n0,1\n")
    with pytest.raises(CsvFormatError, match="x2"):
        load_csv(p, "gp")


def test_header_only_file_is_empty_and_run_fails(tmp_path, capsys):
    p = tmp_path / "empty.csv"
    p.write_text("y\n")
    assert load_csv(p, "mixture") == []
    cfg = _write_yaml(tmp_path / "c.yaml", {**MIX, "data": {"path": "empty.csv"}})
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "error" in capsys.readouterr().err


def test_fmt_and_csv_round_trip(tmp_path):
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(None) == "" and fmt(True) == "1" and fmt(3) == "3"
    t = Table(["a", "b"], [[1, 0.5], [2, None]])
    path = write_csv(tmp_path / "t.csv", t)
    assert read_csv(path) == [{"a": "1", "b": "0.5"}, {"a": "2", "b": ""}]
    assert b"\r" not in path.read_bytes()


# --------------------------------------------------------------------------- run / verify / summarize


def _outputs(d: Path) -> dict[str, str]:
    return {p.name: sha256_file(p) for p in sorted(d.iterdir()) if p.name != "timing.csv"}


def test_run_writes_reproducible_outputs(tmp_path, capsys):
    cfg = _write_yaml(tmp_path / "mix.yaml", MIX)
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert main(["run", str(cfg), "--out", str(a)]) == 0
    assert "sd:" in capsys.readouterr().out
    assert main(["run", str(cfg), "--out", str(b), "--workers", "4"]) == 0
    assert main(["run", str(a / "manifest.json"), "--out", str(c)]) == 0
    assert {"summary.csv", "steps.csv", "manifest.json", "timing.csv"} <= {p.name for p in a.iterdir()}
    assert _outputs(a) == _outputs(b) == _outputs(c)
    man = json.loads((a / "manifest.json").read_text())
    assert man["seed"] == 3 and len(man["config_sha256"]) == 64
    assert man["files"]["summary.csv"] == sha256_file(a / "summary.csv")


def test_gp_run_writes_probability_grid(tmp_path):
    raw = {
        "algorithm": "smcmc",
        "model": "gp",
        "L": 16,
        "schedule": {"batch_size": 5, "m_cap": 10},
        "gp": {"grid_points": 4, "H": 3},
        "data": {"synthetic": {"n": 20, "seed": 2}},
    }
    cfg = _write_yaml(tmp_path / "gp.yaml", raw)
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rows = read_csv(tmp_path / "o" / "grid.csv")
    assert list(rows[0]) == ["x1", "x2", "prob"] and len(rows) == 16
    assert all(0 <= float(r["prob"]) <= 1 for r in rows)


def test_baseline_runs_and_summarize(tmp_path, capsys):
    outs = []
    for alg, extra in [("smcmc", {}), ("mcmc", {"mcmc": {"iterations": 5}}), ("smc", {})]:
        cfg = _write_yaml(tmp_path / f"{alg}.yaml", {**MIX, "algorithm": alg, **extra})
        out = tmp_path / alg
        assert main(["run", str(cfg), "--out", str(out)]) == 0
        outs.append(str(out / "summary.csv"))
    capsys.readouterr()
    assert main(["summarize", *outs, "--out", str(tmp_path / "cmp.csv")]) == 0
    printed = capsys.readouterr().out
    assert "mcmc" in printed and "smc" in printed
    table = summarize_runs(outs)
    assert [r[0] for r in table.rows] == ["smcmc", "mcmc", "smc"]
    sd_col = table.header.index("sd")
    for row in table.rows:
        means = [row[table.header.index(f"mean_{j}")] for j in range(1, 5)]
        assert row[sd_col] == pytest.approx(np.std(means, ddof=1))


def test_verify_command(tmp_path, capsys):
    assert main(["verify", "--suite", "universal", "--instances", "5", "--out", str(tmp_path / "v")]) == 0
    out = capsys.readouterr().out
    assert out.startswith("PASS check_universal")
    rows = read_csv(tmp_path / "v" / "verify.csv")
    assert rows[0]["violations"] == "0"
    assert main(["verify", "--suite", "nonsense"]) == 2


def test_bad_config_exit_code(tmp_path, capsys):
    cfg = _write_yaml(tmp_path / "bad.yaml", {**MIX, "schedule": {"epsilon": 1.5}})
    assert main(["run", str(cfg)]) == 2
    assert "schedule.epsilon" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.yaml")]) == 2


def test_shipped_configs_parse(tmp_path):
    root = Path(__file__).resolve().parents[1] / "configs"
    files = sorted(root.glob("*.yaml"))
    assert files
    (tmp_path / "heart.csv").write_text("sbp,obesity,age\n150,25,50\n")
    for f in files:
        raw = yaml.safe_load(f.read_text())
        cfg = parse_config(raw, tmp_path)
        assert cfg.algorithm in ("smcmc", "mcmc", "smc")

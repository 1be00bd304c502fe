import csv
import json
from pathlib import Path

import numpy as np
import pytest

from ergolab.cli import main
from ergolab.correlation import DecaySeries
from ergolab.report import dumps_json, emit_report, series_rows, write_csv
from ergolab.runner import derive_seed, load_config, validate_config
from ergolab.errors import ConfigError


def _write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


INDUCE = {"kind": "induce", "seed": 7, "map": {"family": "doubling"},
          "params": {"base": [0.0, 0.5], "n_max": 30, "verify": False}}
DENSITY = {"kind": "density", "seed": 3, "map": {"family": "intermittent", "gamma": 0.5},
           "params": {"count": 20000, "burn_in": 200, "bins": 32}}


def _bundle(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


# ---------------------------------------------------------------- serialization

def test_json_sorted_and_17_digits():
    s = dumps_json({"b": 0.1, "a": [1, 2.5, True, None], "c": {"z": float("nan")}})
    assert s.index('"a"') < s.index('"b"') < s.index('"c"')
    assert "0.10000000000000001" in s and "NaN" in s


def test_json_numpy_types():
    s = dumps_json({"x": np.float64(1.5), "n": np.int64(3), "f": np.bool_(True),
                    "v": np.arange(2)})
    assert json.loads(s) == {"x": 1.5, "n": 3, "f": True, "v": [0, 1]}


def test_csv_lf_and_header(tmp_path):
    p = tmp_path / "t.csv"
    write_csv(p, ["a", "b"], [(1, 0.5), (2, 1 / 3)])
    raw = p.read_bytes()
    assert b"\r" not in raw and raw.startswith(b"a,b\n")
    assert b"0.33333333333333331" in raw


def test_series_columns():
    s = DecaySeries([1, 2, 3], [0.5, 0.25, 0.125], [0, 0, 0])
    header, rows = series_rows(s)
    assert header == ["n", "value", "stderr"] and rows[0][0] == 1


def test_emit_report_files(tmp_path):
    paths = emit_report({"summary": {"q": 0.5},
                         "tables": {"t": (["n"], [(1,), (2,)])}}, tmp_path / "o")
    assert [p.rsplit("/", 1)[1] for p in paths] == ["summary.json", "t.csv"]


# ---------------------------------------------------------------- seeds and configs

def test_derive_seed_stable():
    assert derive_seed(1, "a") == derive_seed(1, "a")
    assert derive_seed(1, "a") != derive_seed(1, "b")
    assert derive_seed(1, "a") != derive_seed(2, "a")
    assert 0 <= derive_seed(123, "x") < 2 ** 63


def test_missing_seed_rejected():
    raw = dict(INDUCE)
    raw.pop("seed")
    with pytest.raises(ConfigError):
        validate_config(raw)


@pytest.mark.parametrize("bad", [{"seed": -1}, {"seed": 1.5}, {"kind": "nope"},
                                 {"params": {"n_max": 30}}, {"map": {"family": "nope"}}])
def test_invalid_configs(bad):
    with pytest.raises(Exception) as ei:
        validate_config({**INDUCE, **bad})
    assert isinstance(ei.value, ValueError)


def test_shipped_configs_validate():
    files = sorted((Path(__file__).parent.parent / "configs").glob("*.json"))
    assert len(files) == 12
    for f in files:
        load_config(f)


# ---------------------------------------------------------------- CLI

def test_cli_induce_tail(tmp_path, capsys):
    cfg = _write(tmp_path, "ind.json", INDUCE)
    out = tmp_path / "out"
    assert main(["run", cfg, "--out", str(out)]) == 0
    with open(out / "tail.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["n", "value", "stderr"]
    for r in rows[1:]:
        assert float(r[1]) == 2.0 ** -(int(r[0]) + 1)


def test_cli_bounds_theta_prime(tmp_path):
    cfg = _write(tmp_path, "b.json", {"kind": "bounds", "seed": 1,
                                      "params": {"regime": "stretched", "tau": 1.0,
                                                 "theta": 0.5, "eps": 0.9}})
    out = tmp_path / "o"
    assert main(["run", cfg, "--out", str(out)]) == 0
    res = json.loads((out / "summary.json").read_text())["results"]
    assert res["theta_prime"] == 0.2


def test_cli_missing_seed_exit_2(tmp_path):
    raw = dict(INDUCE)
    raw.pop("seed")
    cfg = _write(tmp_path, "bad.json", raw)
    assert main(["run", cfg, "--out", str(tmp_path / "o")]) == 2
    assert main(["validate", cfg]) == 2


def test_cli_missing_file_exit_2(tmp_path):
    assert main(["run", str(tmp_path / "nope.json")]) == 2


def test_cli_numeric_failure_exit_3(tmp_path):
    cfg = _write(tmp_path, "c.json", {"kind": "correlation", "seed": 1,
                                      "map": {"family": "doubling"}, "observable": "x",
                                      "psi": "x",
                                      "params": {"n_max": 3, "method": "ulam", "N": 64}})
    assert main(["run", cfg, "--out", str(tmp_path / "o")]) == 3


def test_cli_validate_ok(tmp_path, capsys):
    cfg = _write(tmp_path, "ind.json", INDUCE)
    assert main(["validate", cfg]) == 0
    assert "ok" in capsys.readouterr().out


def test_cli_spectral_keys(tmp_path):
    cfg = _write(tmp_path, "s.json", {"kind": "spectral", "seed": 2,
                                      "map": {"family": "markov3"}, "params": {"N": 48}})
    out = tmp_path / "o"
    assert main(["run", cfg, "--out", str(out)]) == 0
    res = json.loads((out / "summary.json").read_text())["results"]
    assert {"lambda1", "q", "gap_resolved"} <= set(res)
    assert abs(res["q"] - 0.5) < 1e-9


def test_cli_density_columns(tmp_path):
    cfg = _write(tmp_path, "d.json", DENSITY)
    out = tmp_path / "o"
    assert main(["run", cfg, "--out", str(out)]) == 0
    header = (out / "density.csv").read_text().splitlines()[0]
    assert header == "bin_left,bin_right,mass"


def test_byte_identical_runs(tmp_path):
    cfg = _write(tmp_path, "d.json", DENSITY)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", cfg, "--out", str(a)]) == 0
    assert main(["run", cfg, "--out", str(b)]) == 0
    assert _bundle(a) == _bundle(b)


def test_worker_count_independent(tmp_path, monkeypatch):
    cfg = _write(tmp_path, "d.json", {**DENSITY, "params": {**DENSITY["params"],
                                                           "count": 150_000}})
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert main(["run", cfg, "--out", str(a), "--workers", "1"]) == 0
    assert main(["run", cfg, "--out", str(b), "--workers", "4"]) == 0
    monkeypatch.setenv("ERGOLAB_WORKERS", "3")
    assert main(["run", cfg, "--out", str(c)]) == 0
    assert _bundle(a) == _bundle(b) == _bundle(c)


def test_seed_override_changes_output(tmp_path):
    cfg = _write(tmp_path, "d.json", DENSITY)
    a, b = tmp_path / "a", tmp_path / "b"
    main(["run", cfg, "--out", str(a)])
    main(["run", cfg, "--out", str(b), "--seed", "99"])
    assert json.loads((b / "summary.json").read_text())["seed"] == 99
    assert (a / "density.csv").read_bytes() != (b / "density.csv").read_bytes()

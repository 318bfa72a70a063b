import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from ssr.cli import main
from ssr.recovery import grid_point_set


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_grid_multiset_rows(capsys):
    code, out, _ = run(capsys, "grid", "--dim", "1", "--level", "2")
    assert code == 0
    assert len(rows(out)) == 10


def test_grid_json(capsys):
    code, out, _ = run(capsys, "grid", "--dim", "2", "--level", "1", "--format", "json")
    data = json.loads(out)
    assert code == 0 and len(data) == 4 + 2 * 6
    assert set(data[0]) == {"k", "s", "x"}


def test_recover_grid_nodes_exact(capsys, tmp_path):
    pts = np.arange(9) / 8
    path = tmp_path / "pts.csv"
    path.write_text("x\n" + "\n".join(repr(float(p)) for p in pts) + "\n")
    code, out, _ = run(capsys, "recover", "--dim", "1", "--order", "2", "--level", "3", "--func", "quad", "--points", str(path))
    assert code == 0
    got = rows(out)
    assert len(got) == 9
    for r in got:
        x = float(r["x_1"])
        assert float(r["value"]) == x * (1 - x)


def test_recover_default_points_json(capsys):
    code, out, _ = run(capsys, "recover", "--dim", "2", "--level", "3", "--func", "sine", "--format", "json")
    data = json.loads(out)
    assert code == 0
    assert len(data["points"]) == len(grid_point_set(2, 3))
    x = np.array(data["points"])
    assert np.allclose(data["values"], np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1]), atol=1e-12)


def test_recover_emit_psi(capsys, tmp_path):
    psi = tmp_path / "psi.json"
    code, _, _ = run(capsys, "recover", "--dim", "1", "--order", "4", "--level", "2", "--func", "sine", "--emit-psi", str(psi))
    assert code == 0
    data = json.loads(psi.read_text())
    assert data["order"] == 4 and data["m"] == 2


def test_recover_mask_file(capsys, tmp_path):
    mask = tmp_path / "mask.json"
    mask.write_text(json.dumps({"order": 3, "mu": 1, "weights": ["-1/8", "5/4", "-1/8"]}))
    a = run(capsys, "recover", "--dim", "1", "--order", "3", "--level", "3", "--func", "sine", "--mask", str(mask))
    b = run(capsys, "recover", "--dim", "1", "--order", "3", "--level", "3", "--func", "sine")
    assert a[0] == b[0] == 0 and a[1] == b[1]


def test_bad_mask_is_usage_error(capsys, tmp_path):
    mask = tmp_path / "mask.json"
    mask.write_text(json.dumps({"order": 3, "weights": ["1"]}))
    code, _, err = run(capsys, "recover", "--dim", "1", "--order", "3", "--level", "2", "--func", "sine", "--mask", str(mask))
    assert code == 1 and "mask" in err


def test_sampled_data(capsys, tmp_path):
    pts = np.array(sorted(p.to_float() for p in grid_point_set(2, 2)))
    data = tmp_path / "samples.csv"
    data.write_text("x1,x2,value\n" + "".join(f"{float(a)!r},{float(b)!r},{float(a * b)!r}\n" for a, b in pts))
    q = tmp_path / "q.csv"
    q.write_text("0.3,0.7\n")
    code, out, _ = run(capsys, "recover", "--dim", "2", "--level", "2", "--func", str(data), "--points", str(q))
    assert code == 0
    assert float(rows(out)[0]["value"]) == pytest.approx(0.21, abs=1e-14)


def test_sampled_data_missing_file(capsys, tmp_path):
    code, _, _ = run(capsys, "recover", "--dim", "1", "--level", "2", "--func", str(tmp_path / "none.csv"))
    assert code == 1


def test_norm_json(capsys):
    code, out, _ = run(capsys, "norm", "--alpha", "1.5", "--p", "2", "--theta", "inf", "--dim", "2", "--level", "3",
                       "--func", "sine", "--format", "json", "--b3-variant", "scalar")
    data = json.loads(out)
    assert code == 0
    assert {"b3", "b2", "per_level", "b3_mixed"} <= set(data)
    assert len(data["per_level"]) == 10


def test_norm_witness(capsys):
    code, out, _ = run(capsys, "norm", "--alpha", "1.5", "--p", "2", "--theta", "2", "--dim", "2", "--level", "5",
                       "--func", "witness:g3,m=4", "--format", "json")
    assert code == 0
    assert json.loads(out)["b3"] == pytest.approx(1.0, rel=1e-12)


def test_norm_bad_params(capsys):
    assert run(capsys, "norm", "--alpha", "-1", "--p", "2", "--theta", "2", "--dim", "1", "--level", "2", "--func", "sine")[0] == 1
    assert run(capsys, "norm", "--alpha", "1", "--p", "x", "--theta", "2", "--dim", "1", "--level", "2", "--func", "sine")[0] == 1


def test_bench_out_dir(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"dims": [1], "levels": {"lo": 2, "hi": 6}, "functions": ["quad"]}))
    code, out, _ = run(capsys, "bench", "--config", str(cfg), "--out-dir", str(tmp_path / "out"))
    assert code == 0
    for name in ("report.csv", "report.json", "rates.dat", "run_meta.json"):
        assert (tmp_path / "out" / name).exists()
    assert float(rows(out)[0]["slope"]) == pytest.approx(-2, abs=1e-9)


def test_bench_bad_config(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"dims": [1], "nope": 1}))
    assert run(capsys, "bench", "--config", str(cfg), "--out-dir", str(tmp_path))[0] == 1


def test_unknown_flag(capsys):
    code, _, err = run(capsys, "grid", "--dim", "1", "--level", "2", "--bogus")
    assert code == 1 and "usage" in err


def test_unknown_function(capsys):
    code, _, err = run(capsys, "recover", "--dim", "1", "--level", "2", "--func", "nosuch")
    assert code == 1 and "nosuch" in err


def test_unknown_witness_case(capsys):
    assert run(capsys, "recover", "--dim", "2", "--level", "2", "--func", "witness:g9")[0] == 1


def test_computation_error(capsys, tmp_path):
    q = tmp_path / "q.csv"
    q.write_text("1.5\n")
    code, _, err = run(capsys, "recover", "--dim", "1", "--level", "2", "--func", "sine", "--points", str(q))
    assert code == 2 and "DomainError" in err


def test_out_file(capsys, tmp_path):
    out = tmp_path / "g.csv"
    code, stdout, _ = run(capsys, "grid", "--dim", "1", "--level", "1", "--out", str(out))
    assert code == 0 and stdout == ""
    assert len(rows(out.read_text())) == 5


def test_json_schema_stable(capsys):
    argv = ("norm", "--alpha", "1.5", "--p", "1", "--theta", "2", "--dim", "1", "--level", "3", "--func", "trig", "--seed", "3", "--format", "json")
    assert run(capsys, *argv)[1] == run(capsys, *argv)[1]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ssr", "grid", "--dim", "1", "--level", "0"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert len(rows(proc.stdout)) == 2

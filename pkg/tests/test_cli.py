import json
import math

import numpy as np
import pytest

from lmor import io
from lmor.cli import EXIT_CONFIG, EXIT_CONTRACT, EXIT_NUMERIC, EXIT_OK, exit_code, main
from lmor.errors import ConfigParse, StageFailure
from lmor.lti import DescriptorModel, eval_transfer, random_stable_model
from lmor.pipeline import (
    PipelineConfig,
    file_hash,
    manifest_hashes,
    parse_grid,
    read_compare_csv,
    run_pipeline,
    threads,
)


@pytest.fixture
def files(tmp_path):
    io.save_model(tmp_path / "lag.json", DescriptorModel.from_abcd([[-1.0]], [[1.0]], [[1.0]]))
    io.save_model(tmp_path / "unst.json", DescriptorModel.from_abcd([[1.0]], [[1.0]], [[1.0]]))
    io.save_model(tmp_path / "integ.json", DescriptorModel.from_abcd([[0.0]], [[1.0]], [[1.0]]))
    (tmp_path / "bad.json").write_text("{not json")
    return tmp_path


def run(*args):
    return main([str(a) for a in args])


# --- exit codes -----------------------------------------------------------------------------

def test_exit_codes(files, capsys):
    d = files
    assert run("stabilize", "--model", d / "lag.json", "--out", d / "o.json") == EXIT_OK
    assert run("stabilize", "--model", d / "nope.json", "--out", d / "o.json") == EXIT_CONFIG
    assert run("stabilize", "--model", d / "bad.json", "--out", d / "o.json") == EXIT_CONFIG
    assert run("discretize", "--controller", d / "lag.json", "--h", 0.1, "--order", 0,
               "--out", d / "o.json") == EXIT_CONFIG
    assert run("stabilize", "--model", d / "integ.json", "--out", d / "o.json") == EXIT_NUMERIC
    assert run("reduce", "--model", d / "unst.json", "--order", 1, "--out", d / "o.json") == EXIT_CONTRACT
    assert run("discretize", "--controller", d / "unst.json", "--h", 0.1, "--method", "tustin",
               "--out", d / "o.json") == EXIT_CONTRACT
    assert "error:" in capsys.readouterr().err


def test_exit_code_mapping():
    assert exit_code(StageFailure("s", FileNotFoundError("x"))) == EXIT_CONFIG
    assert exit_code(ConfigParse("x")) == EXIT_CONFIG
    assert exit_code(np.linalg.LinAlgError("x")) == EXIT_NUMERIC
    assert exit_code(FloatingPointError("x")) == EXIT_NUMERIC


def test_usage_error_exits_two():
    with pytest.raises(SystemExit) as e:
        main(["reduce", "--model", "m.json"])
    assert e.value.code == 2


# --- commands -----------------------------------------------------------------------------------

def test_stabilize_writes_stable_model_and_report(files):
    d = files
    assert run("stabilize", "--model", d / "unst.json", "--out", d / "s.json",
               "--report", d / "r.json") == EXIT_OK
    rep = json.loads((d / "r.json").read_text())
    assert rep["linf_gap"] == pytest.approx(0.5)
    assert io.load_model(d / "s.json").order == 0


def test_compare_self_gives_zero_errors(files):
    d = files
    assert run("compare", "--models", d / "lag.json", d / "lag.json", "--grid", 0.1, 10, 20,
               "--out", d / "c.csv") == EXIT_OK
    header, rows, meta = read_compare_csv(d / "c.csv")
    assert len(set(header)) == len(header)
    assert meta["reference"] == "lag0"
    err = [i for i, h in enumerate(header) if h.startswith(("err_", "phase_err_"))]
    assert err and np.all(np.abs(rows[:, err]) <= 1e-12)


def test_compare_tustin_phase_error_grows_toward_nyquist(files):
    d = files
    h = 0.1
    assert run("discretize", "--controller", d / "lag.json", "--h", h, "--method", "tustin",
               "--out", d / "t.json") == EXIT_OK
    wN = math.pi / h
    assert run("compare", "--models", d / "lag.json", d / "t.json", "--grid", 0.5, 0.95 * wN, 40,
               "--spacing", "linear", "--out", d / "c.csv") == EXIT_OK
    header, rows, _ = read_compare_csv(d / "c.csv")
    pe = np.abs(rows[:, header.index("phase_err_t_1_1")])
    assert np.all(np.diff(pe) > 0)
    assert pe[-1] > 45.0 and pe[0] < 3.0


def test_discretize_report(files):
    d = files
    assert run("discretize", "--controller", d / "lag.json", "--h", 0.1, "--order", 3,
               "--m", 40, "--out", d / "k.json", "--report", d / "r.json") == EXIT_OK
    rep = json.loads((d / "r.json").read_text())
    assert set(rep["e_inf"]) == {"loewner", "tustin", "backward"}
    assert rep["e_inf"]["loewner"] <= rep["e_inf"]["tustin"]
    assert io.load_model(d / "k.json").dt == pytest.approx(0.1)


def test_interpolate_from_model(files):
    d = files
    assert run("interpolate", "--model", d / "lag.json", "--grid", 0.1, 10, 10, "--out",
               d / "rom.json", "--report", d / "r.json", "--data-out", d / "data.csv") == EXIT_OK
    rep = json.loads((d / "r.json").read_text())
    assert rep["n"] == 1 and max(rep["max_left_residual"], rep["max_right_residual"]) <= 1e-10
    assert run("loewner", "interpolate", "--data", d / "data.csv", "--out", d / "rom2.json") == EXIT_OK
    rom = io.load_model(d / "rom2.json")
    assert eval_transfer(rom, 2j)[0, 0] == pytest.approx(1 / (1 + 2j), rel=1e-9)


def test_model_json_round_trip_is_byte_identical(tmp_path, rng):
    for M in (random_stable_model(rng, 4, 2, 3), random_stable_model(rng, 3, dt=0.1),
              DescriptorModel.static_gain([[1.5, -2.0]])):
        io.save_model(tmp_path / "a.json", M)
        io.save_model(tmp_path / "b.json", io.load_model(tmp_path / "a.json"))
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
        back = io.load_model(tmp_path / "b.json")
        np.testing.assert_array_equal(back.A, M.A)
        assert back.dt == M.dt


# --- pipeline ---------------------------------------------------------------------------------------

SMALL = {
    "seed": 7,
    "stages": [
        {"name": "controller", "op": "demo_controller", "out": "K.json"},
        {"name": "disc", "op": "discretize", "controller": "K.json", "h": 0.04, "order": 4,
         "m": 60, "method": "loewner", "out": "Kd.json", "report": "disc.json"},
        {"name": "cmp", "op": "compare", "models": ["K.json", "Kd.json"],
         "grid": {"spacing": "linear", "lo": 0.1, "hi": 70.0, "num": 50}, "out": "cmp.csv"},
    ],
}


def write_config(path, cfg):
    path.write_text(json.dumps(cfg))
    return path


def test_small_pipeline_is_deterministic(tmp_path):
    cfg = write_config(tmp_path / "p.json", SMALL)
    m1 = run_pipeline(cfg, tmp_path / "a")
    m2 = run_pipeline(cfg, tmp_path / "b")
    assert manifest_hashes(m1) == manifest_hashes(m2)
    assert [s["status"] for s in m1["stages"]] == ["ok"] * 3
    assert m1["stages"][1]["seed"] is not None and m1["stages"][0]["seed"] is None
    saved = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest_hashes(saved) == manifest_hashes(m1)
    assert file_hash(tmp_path / "a" / "Kd.json") == file_hash(tmp_path / "b" / "Kd.json")


def test_seed_override_changes_stage_seeds(tmp_path):
    cfg = write_config(tmp_path / "p.json", SMALL)
    a = run_pipeline(cfg, tmp_path / "a")
    b = run_pipeline(cfg, tmp_path / "b", seed=8)
    assert a["stages"][1]["seed"] != b["stages"][1]["seed"]


def test_missing_input_fails_before_compute(tmp_path):
    bad = dict(SMALL, stages=[dict(SMALL["stages"][1], controller="missing.json")])
    cfg = write_config(tmp_path / "p.json", bad)
    with pytest.raises(StageFailure):
        run_pipeline(cfg, tmp_path / "w")
    assert not (tmp_path / "w" / "manifest.json").exists()
    assert run("pipeline", "run", "--config", cfg, "--workdir", tmp_path / "w") == EXIT_CONFIG


def test_config_errors(tmp_path):
    with pytest.raises(ConfigParse):
        PipelineConfig.load(write_config(tmp_path / "a.json", {"stages": {}}))
    with pytest.raises(ConfigParse):
        PipelineConfig.load(write_config(tmp_path / "b.json", {"stages": [{"name": "x", "op": "nope"}]}))
    dup = {"stages": [SMALL["stages"][0], SMALL["stages"][0]]}
    with pytest.raises(ConfigParse):
        PipelineConfig.load(write_config(tmp_path / "c.json", dup))
    (tmp_path / "d.json").write_text("[")
    with pytest.raises(ConfigParse):
        PipelineConfig.load(tmp_path / "d.json")
    assert run("pipeline", "run") == EXIT_CONFIG


def test_failed_stage_is_recorded(tmp_path):
    io.save_model(tmp_path / "integ.json", DescriptorModel.from_abcd([[0.0]], [[1.0]], [[1.0]]))
    cfg = write_config(tmp_path / "p.json", {"stages": [
        {"name": "stab", "op": "stabilize", "model": "integ.json", "out": "s.json"}]})
    with pytest.raises(StageFailure):
        run_pipeline(cfg, tmp_path)
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["stages"][0]["status"] == "failed"
    assert run("pipeline", "run", "--config", cfg) == EXIT_NUMERIC


def test_demo_config_copy(tmp_path):
    assert run("pipeline", "demo-config", "--out", tmp_path / "demo.json") == EXIT_OK
    cfg = PipelineConfig.load(tmp_path / "demo.json")
    assert len(cfg.stages) == 17


def test_grid_and_threads(monkeypatch):
    np.testing.assert_allclose(parse_grid({"spacing": "log", "lo": 1, "hi": 100, "num": 3}), [1, 10, 100])
    np.testing.assert_allclose(parse_grid([0.5, 1.0]), [0.5, 1.0])
    with pytest.raises(ConfigParse):
        parse_grid({"spacing": "log", "lo": 0, "hi": 1, "num": 3})
    with pytest.raises(ConfigParse):
        parse_grid({"spacing": "cubic", "lo": 1, "hi": 2, "num": 3})
    monkeypatch.delenv("LMOR_THREADS", raising=False)
    assert threads() == 1
    monkeypatch.setenv("LMOR_THREADS", "4")
    assert threads() == 4
    monkeypatch.setenv("LMOR_THREADS", "many")
    with pytest.raises(ConfigParse):
        threads()

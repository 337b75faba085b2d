import json

import numpy as np
import pytest
from PIL import Image

from gazewalk.cli import config_hash, main
from gazewalk.dataio import FixationRecord, read_salmap, write_fixations_csv


@pytest.fixture
def still(tmp_path):
    rng = np.random.default_rng(0)
    img = (rng.random((48, 64, 3)) * 60).astype(np.uint8)
    img[20:28, 40:48] = 255
    p = tmp_path / "still.png"
    Image.fromarray(img).save(p)
    return p


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("seed = 42\nmax_ticks = 300\n")
    return p


def test_saliency_still_image(still, tmp_path):
    out = tmp_path / "maps"
    assert main(["saliency", str(still), "--method", "itti", "--out", str(out), "--preview"]) == 0
    assert sorted(p.name for p in out.glob("*.salmap")) == ["map_00000.salmap"]
    assert (out / "map_00000.png").exists()
    smap = read_salmap(out / "map_00000.salmap")
    assert np.unravel_index(np.argmax(smap.values), smap.values.shape)[1] >= 36
    assert json.loads((out / "manifest.json").read_text())["command"] == "saliency"


def test_saliency_surprise_sequence(tmp_path):
    frames = tmp_path / "frames"
    frames.mkdir()
    rng = np.random.default_rng(1)
    for i in range(30):
        Image.fromarray((rng.random((32, 32)) * 255).astype(np.uint8)).save(frames / f"{i:02d}.png")
    out = tmp_path / "maps"
    assert main(["saliency", str(frames), "--method", "surprise", "--out", str(out)]) == 0
    files = sorted(out.glob("*.salmap"))
    assert len(files) == 30
    assert np.ptp(read_salmap(files[0]).values) < 1e-12


def test_saliency_selfinfo_uniform(tmp_path):
    p = tmp_path / "gray.png"
    Image.fromarray(np.full((32, 32, 3), 128, dtype=np.uint8)).save(p)
    out = tmp_path / "maps"
    assert main(["saliency", str(p), "--method", "selfinfo", "--out", str(out)]) == 0
    assert np.ptp(read_salmap(out / "map_00000.salmap").values) < 1e-6


def test_saliency_missing_input(tmp_path):
    assert main(["saliency", str(tmp_path / "nope.png"), "--out", str(tmp_path / "o")]) == 2


def test_simulate_observers_deterministic_and_distinct(still, cfg, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["simulate", str(still), "--config", str(cfg), "--observers", "2",
                     "--out", str(out)]) == 0
    for name in ("observer_000.jsonl", "observer_001.jsonl"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert (a / "observer_000.jsonl").read_bytes() != (a / "observer_001.jsonl").read_bytes()
    man = json.loads((a / "manifest.json").read_text())
    assert man["seed"] == 42 and man["config_hash"] == json.loads((b / "manifest.json").read_text())["config_hash"]


def test_simulate_parallel_matches_serial(still, cfg, tmp_path, monkeypatch):
    serial, par = tmp_path / "s", tmp_path / "p"
    monkeypatch.setenv("GAZEWALK_THREADS", "1")
    assert main(["simulate", str(still), "--config", str(cfg), "--observers", "2", "--out", str(serial)]) == 0
    monkeypatch.setenv("GAZEWALK_THREADS", "2")
    assert main(["simulate", str(still), "--config", str(cfg), "--observers", "2", "--out", str(par)]) == 0
    for name in ("observer_000.jsonl", "observer_001.jsonl"):
        assert (serial / name).read_bytes() == (par / name).read_bytes()


def test_simulate_seed_override(still, cfg, tmp_path):
    out = tmp_path / "o"
    assert main(["simulate", str(still), "--config", str(cfg), "--seed", "7", "--out", str(out)]) == 0
    assert json.loads((out / "manifest.json").read_text())["seed"] == 7


def test_simulate_missing_seed(still, tmp_path, capsys):
    p = tmp_path / "noseed.cfg"
    p.write_text("temperature = 0.5\n")
    assert main(["simulate", str(still), "--config", str(p), "--out", str(tmp_path / "o")]) == 3
    assert "seed" in capsys.readouterr().err


def test_simulate_bad_config_key(still, tmp_path):
    p = tmp_path / "typo.cfg"
    p.write_text("seed = 1\ntemprature = 0.5\n")
    assert main(["simulate", str(still), "--config", str(p), "--out", str(tmp_path / "o")]) == 3


def test_analyze_reports(still, cfg, tmp_path):
    sim = tmp_path / "sim"
    main(["simulate", str(still), "--config", str(cfg), "--out", str(sim)])
    path = sim / "observer_000.jsonl"

    solo = tmp_path / "solo"
    assert main(["analyze", str(path), "--out", str(solo)]) == 0
    report = json.loads((solo / "report.json").read_text())
    assert "ks" not in report and (solo / "ccdf_all.csv").read_text().startswith("x,ccdf\n")

    both = tmp_path / "both"
    assert main(["analyze", str(path), "--human", str(path), "--out", str(both)]) == 0
    assert json.loads((both / "report.json").read_text())["ks"]["statistic"] == 0


def test_analyze_human_csv_and_map(still, cfg, tmp_path):
    sim = tmp_path / "sim"
    main(["simulate", str(still), "--config", str(cfg), "--out", str(sim)])
    maps = tmp_path / "maps"
    main(["saliency", str(still), "--out", str(maps)])
    rng = np.random.default_rng(2)
    human = tmp_path / "human.csv"
    write_fixations_csv(human, [FixationRecord("h1", "still", 100.0 * i, float(rng.uniform(0, 63)),
                                               float(rng.uniform(0, 47)), 200.0) for i in range(40)])
    out = tmp_path / "rep"
    assert main(["analyze", str(sim / "observer_000.jsonl"), "--human", str(human),
                 "--map", str(maps / "map_00000.salmap"), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert 0 <= report["ks"]["statistic"] <= 1
    assert 0 <= report["fixation_metrics"]["auc"] <= 1


def test_analyze_empty_scanpath(tmp_path):
    p = tmp_path / "empty.jsonl"
    p.write_text("")
    assert main(["analyze", str(p), "--out", str(tmp_path / "o")]) == 2


def test_config_hash_stable():
    assert config_hash({"b": 1, "a": [1, 2]}) == config_hash({"a": [1, 2], "b": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})

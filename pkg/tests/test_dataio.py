import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from PIL import Image

from gazewalk.bias import GazeShift, fit_bias_model
from gazewalk.dataio import FixationRecord, load_bias_model, load_config, load_fixations_csv, \
    load_frames, parse_config, read_salmap, read_scanpath_jsonl, read_shifts_csv, save_bias_model, \
    write_fixations_csv, write_preview_png, write_salmap, write_scanpath_jsonl, write_shifts_csv
from gazewalk.errors import ConfigError, DataError, FormatError, InputError
from gazewalk.saliency import SaliencyMap
from gazewalk.walker import GazeRecord, RegimeMotorParams, SaliencySource, ScanPath, \
    WalkerConfig, run_scanpath

HEADER = "observer,stimulus,t_ms,x,y,duration_ms\n"


def save_png(path, h=16, w=24, value=0):
    Image.fromarray(np.full((h, w, 3), value, dtype=np.uint8)).save(path)


# frames

def test_frame_directory_in_name_order(tmp_path):
    for i in reversed(range(30)):
        save_png(tmp_path / f"f{i:03d}.png", value=i)
    frames = load_frames(tmp_path, tick_ms=10)
    assert len(frames) == 30
    assert [round(f.data.mean() * 255) for f in frames] == list(range(30))
    assert frames[7].timestamp == 70


def test_single_still_image(tmp_path):
    save_png(tmp_path / "still.png")
    frames = load_frames(tmp_path / "still.png")
    assert len(frames) == 1
    assert SaliencySource(frames=frames).static


def test_mismatched_frame_named(tmp_path):
    save_png(tmp_path / "a.png")
    save_png(tmp_path / "b.png", h=20)
    with pytest.raises(DataError, match="b.png"):
        load_frames(tmp_path)


def test_no_matches(tmp_path):
    with pytest.raises(InputError):
        load_frames(tmp_path)
    with pytest.raises(InputError):
        load_frames(tmp_path / "missing.png")


# fixation CSV

def test_empty_body(tmp_path):
    p = tmp_path / "fix.csv"
    p.write_text(HEADER)
    assert load_fixations_csv(p) == ([], 0)


def test_single_row_roundtrip(tmp_path):
    rec = FixationRecord("s01", "img3", 123.25, 40.5, 17.125, 250.0)
    p = tmp_path / "fix.csv"
    write_fixations_csv(p, [rec])
    records, dropped = load_fixations_csv(p)
    assert records == [rec] and dropped == 0


def test_negative_coordinate_dropped(tmp_path):
    p = tmp_path / "fix.csv"
    p.write_text(HEADER + "a,s,0,-5,3,100\na,s,10,4,3,100\n")
    records, dropped = load_fixations_csv(p)
    assert len(records) == 1 and dropped == 1
    _, dropped = load_fixations_csv(p, bounds=(4, 10))
    assert dropped == 2


def test_fixation_format_errors(tmp_path):
    p = tmp_path / "fix.csv"
    p.write_text("obs,stim,t,x,y,d\n")
    with pytest.raises(FormatError) as info:
        load_fixations_csv(p)
    assert info.value.line == 1
    p.write_text(HEADER + "a,s,0,1,1,10\na,s,zero,1,1,10\n")
    with pytest.raises(FormatError) as info:
        load_fixations_csv(p)
    assert info.value.line == 3


# scan paths

def test_empty_scanpath_file(tmp_path):
    p = tmp_path / "empty.jsonl"
    p.write_text("")
    assert len(read_scanpath_jsonl(p)) == 0


def test_scanpath_roundtrip(tmp_path):
    src = SaliencySource.from_maps(SaliencyMap.from_scores(np.random.default_rng(0).random((30, 40))))
    path = run_scanpath(src, WalkerConfig(seed=1, max_ticks=1000))
    p = tmp_path / "sp.jsonl"
    write_scanpath_jsonl(p, path)
    back = read_scanpath_jsonl(p)
    assert len(back) == 1000 and back.records == path.records
    assert b"\r\n" not in p.read_bytes()


@settings(max_examples=25)
@given(st.lists(st.tuples(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6), st.floats(0, 1e6)),
                max_size=20))
def test_scanpath_roundtrip_exact_floats(tmp_path_factory, rows):
    p = tmp_path_factory.mktemp("sp") / "p.jsonl"
    recs = [GazeRecord(10.0 * (i + 1), x, y, i % 3, "fixation", d) for i, (x, y, d) in enumerate(rows)]
    write_scanpath_jsonl(p, ScanPath(recs))
    assert read_scanpath_jsonl(p).records == recs


def test_unknown_key_ignored_and_bad_line(tmp_path):
    p = tmp_path / "sp.jsonl"
    p.write_text('{"t_ms":10,"x":1,"y":2,"regime":0,"event":"fixation","dwell_ms":10,"pupil":3}\n')
    assert read_scanpath_jsonl(p).records[0].x == 1.0
    p.write_text('{"t_ms":10,"x":1,"y":2,"regime":0,"event":"fixation","dwell_ms":10}\n{oops\n')
    with pytest.raises(FormatError) as info:
        read_scanpath_jsonl(p)
    assert info.value.line == 2


# maps, shifts, bias models

def test_salmap_roundtrip(tmp_path):
    smap = SaliencyMap.from_scores(np.random.default_rng(2).random((7, 9)))
    write_salmap(tmp_path / "m.salmap", smap)
    back = read_salmap(tmp_path / "m.salmap")
    assert np.array_equal(back.values, smap.values)
    write_preview_png(tmp_path / "m.png", smap)
    with Image.open(tmp_path / "m.png") as im:
        arr = np.asarray(im)
    assert arr.shape == (7, 9) and arr.max() == 65535


def test_salmap_bad_header(tmp_path):
    p = tmp_path / "bad.salmap"
    p.write_text("SALMAP v2 1 1 sum\n0.5\n")
    with pytest.raises(FormatError):
        read_salmap(p)


def test_shift_csv_and_bias_model_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    shifts = [GazeShift.from_polar(abs(v), t) for v, t in
              zip(rng.standard_cauchy(200) * 5, rng.uniform(-3, 3, 200))]
    write_shifts_csv(tmp_path / "s.csv", shifts)
    assert read_shifts_csv(tmp_path / "s.csv") == shifts
    model = fit_bias_model(shifts)
    save_bias_model(tmp_path / "b.json", model)
    assert load_bias_model(tmp_path / "b.json").to_json() == model.to_json()


# configuration

def test_minimal_config_defaults():
    run = parse_config("seed = 7\n", require_seed=True)
    assert run.walker == WalkerConfig(seed=7)
    assert run.motor == RegimeMotorParams.default(3)
    assert run.saliency == "itti"


def test_temperature_bound():
    with pytest.raises(ConfigError, match="temperature > 0") as info:
        parse_config("seed = 1\ntemperature = 0\n")
    assert info.value.key == "temperature"


def test_unknown_key_named():
    with pytest.raises(ConfigError, match="temprature") as info:
        parse_config("seed = 1\ntemprature = 0.5\n")
    assert info.value.key == "temprature"


def test_seed_required_and_regime_overrides(tmp_path):
    with pytest.raises(ConfigError, match="seed"):
        parse_config("temperature = 0.5\n", require_seed=True)
    p = tmp_path / "run.cfg"
    p.write_text("# two regimes\nseed = 3\nregimes = 2\nregime1.alpha = 1.4\n"
                 "regime1.gamma = 12\nregime0.count = 80\nn_candidates = 2\n")
    run = load_config(p)
    assert run.walker.regimes == 2 and run.walker.n_candidates == 2
    assert run.motor[1].stable.alpha == 1.4 and run.motor[1].stable.gamma == 12
    assert run.walker.counts[0] == 80
    with pytest.raises(ConfigError):
        parse_config("regimes = 2\nregime2.alpha = 1.0\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.cfg")


def test_config_deterministic(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("seed = 5\ntemperature = 0.7\nregime2.hazard = 0.5\n")
    assert load_config(p).to_dict() == load_config(p).to_dict()

import numpy as np
import pytest

from convbf import bench
from convbf.audio_io import read_wav
from convbf.cli import build_pipeline_config, main, UsageError
from convbf.config import ConfigError, parse_config_text
from convbf.pipeline import PipelineConfig
from convbf.simulate import SceneSpec

SMALL_BENCH = """
[bench]
scenes = 2
seed = 5

[scene]
channels = 2
t60_min = 0.2
t60_max = 0.4
duration_s = 0.5

[pipeline]
schedule = 8000:5
"""


@pytest.fixture(scope="module")
def scene_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("scene")
    assert main(["simulate", str(out), "--channels", "2", "--t60", "0.3",
                 "--duration-s", "0.6", "--seed", "1"]) == 0
    return out


def test_config_parsing():
    cfg = parse_config_text("[pipeline]\ndelay = 3\nloading = 1e-6\n[scene]\nsnr_db = inf\n")
    assert cfg == {"pipeline": {"delay": 3, "loading": 1e-6}, "scene": {"snr_db": np.inf}}
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config_text("[pipeline]\nfoo = 1\n")
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config_text("[other]\nx = 1\n")
    with pytest.raises(ConfigError, match="cannot parse"):
        parse_config_text("[pipeline]\ndelay = four\n")


def test_defaults_map_to_pipeline_defaults():
    assert build_pipeline_config({}) == PipelineConfig()
    cfg = build_pipeline_config({"lw": 6, "delay": 3, "method": "cascade"})
    assert cfg.schedule.bands == ((0.0, 8000.0, 6),) and cfg.delay == 3
    with pytest.raises(UsageError):
        build_pipeline_config({"lw": 2, "delay": 4})
    with pytest.raises(UsageError):
        build_pipeline_config({"lw": 6, "schedule": "8000:6"})


def test_enhance_command(scene_dir, tmp_path, capsys):
    out = tmp_path / "out.wav"
    rc = main(["enhance", "--method", "wpd", str(scene_dir / "mixture.wav"), str(out)])
    assert rc == 0
    text = capsys.readouterr().out
    assert "method=wpd" in text and "max_constraint_residual=" in text
    assert "delay=4" in text and "schedule=800:12,1500:10,3000:8,6000:6,8000:6" in text
    assert read_wav(str(out)).channels == 1


def test_enhance_exit_codes(scene_dir, tmp_path):
    mix = str(scene_dir / "mixture.wav")
    out = str(tmp_path / "o.wav")
    assert main(["enhance", "--lw", "2", "--delay", "4", mix, out]) == 1
    assert main(["enhance", "--ref-channel", "7", mix, out]) == 1
    assert main(["enhance", str(tmp_path / "nope.wav"), out]) == 2
    with pytest.raises(SystemExit) as info:
        main(["enhance", "--method", "bogus", mix, out])
    assert info.value.code == 1
    # an edge interval shorter than one frame cannot yield a noise estimate
    assert main(["enhance", "--head-ms", "10", mix, out]) == 3


def test_metrics_command(scene_dir, capsys):
    rc = main(["metrics", str(scene_dir / "desired.wav"), str(scene_dir / "desired.wav"),
               "--id", "u", "--method", "ref"])
    assert rc == 0
    assert capsys.readouterr().out.splitlines()[1] == "u,ref,0.000000,35.000000"


def test_bench_command_rows_and_determinism(tmp_path):
    spec = tmp_path / "bench.ini"
    spec.write_text(SMALL_BENCH)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["bench", str(spec), str(a)]) == 0
    assert main(["bench", str(spec), str(b), "--jobs", "2"]) == 0
    lines = a.read_text().splitlines()
    assert lines[0] == "scene,method,cd,fwssnr,weighted_power,drr_gain,status"
    assert len(lines) == 1 + 2 * 4
    assert [l.split(",")[1] for l in lines[1:5]] == ["wpe", "mpdr", "cascade", "wpd"]
    assert a.read_bytes() == b.read_bytes()


def test_bench_records_scene_failures():
    cfg = bench.BenchConfig(scenes=1, scene=SceneSpec(channels=2, duration_s=0.5),
                            pipeline_cfg=PipelineConfig(head_ms=10.0), methods=("wpd",))
    rows = bench.run_bench(cfg)
    assert len(rows) == 1 and rows[0][-1].startswith("error:")
    assert "nan" in bench.format_csv(rows)


def test_bench_scene_t60_draw_is_seeded():
    cfg = bench.BenchConfig(seed=3)
    t = [bench.scene_spec(cfg, i).t60 for i in range(5)]
    assert t == [bench.scene_spec(cfg, i).t60 for i in range(5)]
    assert all(0.25 <= x <= 0.7 for x in t)
    assert bench.scene_spec(cfg, 2).seed == 5

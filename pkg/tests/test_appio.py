import json
import os
import subprocess
import sys

import numpy as np
import pytest
import yaml
from PIL import Image

from conftest import GOLDEN_DIR, write_inputs
from make_golden import GOLDEN_FILES, golden_run
from raytwin import _backend, scenes
from raytwin.appio import cli, config, export, pipeline, render
from raytwin.appio.config import ConfigError

MINIMAL = {"carrier_hz": 10e9, "bandwidth_hz": 400e6, "grid": {"region": [0, 0, 20, 20]},
           "transmitters": [{"site_id": "a", "position": [10, 10, 10]}]}


def doc(**kw):
    d = json.loads(json.dumps(MINIMAL))
    d.update(kw)
    return d


# config

def test_minimal_config_echoes_defaults():
    cfg = config.parse_config(MINIMAL)
    assert cfg.noise_figure_db == 7.0 and cfg.resolved["noise_figure_db"] == 7.0
    assert cfg.spacing == 2.0 and cfg.resolved["grid"]["spacing"] == 2.0
    r = cfg.resolved
    assert r["transmitters"][0]["power_dbm"] == 30.0
    assert r["tracer"]["max_reflection_order"] == 3
    assert [t["label"] for t in r["thresholds"]] == ["XR-min", "URLLC", "V2X", "XR-premium"]
    assert r["output"] == {"dir": "out", "format": "csv"}


def test_deployment_parameters():
    cfg = config.parse_config(yaml.safe_dump(scenes.manhattan_deployment()))
    assert cfg.carrier_hz == 10e9 and cfg.bandwidth_hz == 400e6
    assert all(tx.power_dbm == 30.0 for tx in cfg.transmitters)
    assert cfg.rx_height == 1.5
    assert cfg.tracer.max_reflection_order == 3 and cfg.tracer.diffraction_enabled
    assert len(cfg.transmitters) == 3


@pytest.mark.parametrize("patch, match", [
    ({"bandwidth_hz": 0}, "bandwidth_hz"),
    ({"carrier_hz": -1.0}, "carrier_hz"),
    ({"noise_figure": 7}, "unknown key"),
    ({"transmitters": []}, "transmitter"),
    ({"thresholds": []}, "threshold"),
    ({"combining": "max"}, "combining"),
    ({"grid": {"region": [0, 0, 20, 20], "spacing": 0}}, "spacing"),
])
def test_config_errors(patch, match):
    with pytest.raises(ConfigError, match=match):
        config.parse_config(doc(**patch))


def test_missing_required_key():
    d = doc()
    del d["bandwidth_hz"]
    with pytest.raises(ConfigError, match="bandwidth_hz"):
        config.parse_config(d)


def test_yaml_syntax_error_is_config_error():
    with pytest.raises(ConfigError):
        config.parse_config("carrier_hz: [1, 2\n")


def test_config_hash_ignores_output_dir_only():
    a = config.parse_config(MINIMAL)
    assert a.config_hash() == a.with_overrides(output_dir="elsewhere").config_hash()
    assert a.config_hash() != a.with_overrides(combining="incoherent").config_hash()
    assert config.parse_config(a.resolved).resolved == a.resolved


# export

def test_csv_rows(tmp_path):
    fg = export.FieldGrid([[1.0, 2.0], [3.0, np.nan]], (0.5, 0.5, 0.0), 1.0, "rss", 1.5)
    p = tmp_path / "f.csv"
    export.write_csv(p, fg)
    lines = p.read_text().splitlines()
    assert lines[0].startswith("# raytwin-field name=rss nx=2 ny=2 spacing=1.0")
    assert lines[1] == "x,y,value"
    assert lines[2:] == ["0.5,0.5,1.0", "1.5,0.5,2.0", "0.5,1.5,3.0", "1.5,1.5,nodata"]


def test_binary_csv_binary_identical(tmp_path):
    rng = np.random.default_rng(3)
    v = rng.normal(-90, 20, (7, 5))
    v[2, 3] = np.nan
    v[0, 0] = -np.inf
    fg = export.FieldGrid(v, (1.0, 2.0, 0.0), 2.0, "sinr", 1.5)
    a, c, b = tmp_path / "a.bin", tmp_path / "a.csv", tmp_path / "b.bin"
    export.write_binary(a, fg)
    export.binary_to_csv(a, c, "sinr", 1.5)
    export.csv_to_binary(c, b)
    assert a.read_bytes() == b.read_bytes()
    back = export.read_binary(b)
    assert np.isnan(back.values[2, 3]) and np.isneginf(back.values[0, 0])
    ok = np.isfinite(v)
    assert np.array_equal(back.values[ok], v[ok])


def test_nodata_sentinel_in_binary(tmp_path):
    fg = export.FieldGrid([[np.nan, 1.0]], (0.0, 0.0, 0.0), 1.0)
    p = tmp_path / "f.bin"
    export.write_binary(p, fg)
    raw = np.frombuffer(p.read_bytes()[export.HEADER.size:], "<f8")
    assert raw[0] == export.NODATA
    assert np.isnan(export.read_field(p).values[0, 0])


def test_bad_field_files(tmp_path):
    p = tmp_path / "x.bin"
    p.write_bytes(b"NOPE" + bytes(60))
    with pytest.raises(export.FieldFormatError, match="magic"):
        export.read_binary(p)
    q = tmp_path / "x.csv"
    q.write_text("x,y,value\n")
    with pytest.raises(export.FieldFormatError):
        export.read_csv(q)


# render

class _G:
    def __init__(self, nx, ny, spacing=1.0):
        self.origin, self.nx, self.ny, self.spacing = np.zeros(3), nx, ny, spacing


def test_constant_field_is_uniform_except_markers():
    g = _G(10, 8)
    img = np.asarray(render.render_heatmap(np.full((8, 10), -70.0), g, vmin=-100, vmax=-50,
                                           pixels_per_cell=4, legend=False))
    assert img.shape == (32, 40, 3)
    assert len(np.unique(img.reshape(-1, 3), axis=0)) == 1
    marked = np.asarray(render.render_heatmap(np.full((8, 10), -70.0), g, vmin=-100, vmax=-50,
                                              markers=[(5.0, 4.0)], legend=False))
    colours = {tuple(c) for c in marked.reshape(-1, 3)}
    assert colours == {tuple(img[0, 0]), render.MARKER_RGB}


def test_two_cell_gradient_uses_two_palette_entries():
    img = np.asarray(render.render_heatmap(np.array([[0.0, 1.0]]), _G(2, 1), legend=False,
                                           pixels_per_cell=3))
    lut = render.palette_lut("viridis")
    assert tuple(img[0, 0]) == tuple(lut[0]) and tuple(img[0, 5]) == tuple(lut[-1])


def test_nodata_colour_and_north_up():
    v = np.array([[np.nan, 0.0], [1.0, 1.0]])  # row 0 is the southern row
    img = np.asarray(render.render_heatmap(v, _G(2, 2), vmin=0, vmax=1, pixels_per_cell=1,
                                           legend=False))
    assert tuple(img[1, 0]) == render.NODATA_RGB
    assert tuple(img[0, 0]) == tuple(render.palette_lut("viridis")[-1])


def test_render_shape_mismatch():
    with pytest.raises(ValueError, match="shape"):
        render.render_heatmap(np.zeros((3, 3)), _G(4, 3))


def test_legend_is_embedded():
    plain = render.render_heatmap(np.zeros((5, 5)), _G(5, 5), legend=False)
    with_legend = render.render_heatmap(np.zeros((5, 5)), _G(5, 5), label="RSS dBm")
    assert with_legend.size[1] == plain.size[1] + render.LEGEND_HEIGHT


# pipeline

def _empty_run(tmp_path, **kw):
    d = doc(render={"enabled": False}, **kw)
    scene, cfg_path = write_inputs(str(tmp_path), [], d)
    cfg = config.load_config_file(cfg_path).with_overrides(output_dir=str(tmp_path / "out"))
    return pipeline.run_pipeline(cfg, scene), cfg


def test_empty_scene_smoke(tmp_path):
    m, cfg = _empty_run(tmp_path)
    out = tmp_path / "out"
    fields = sorted(os.listdir(out / "fields"))
    assert {"path_gain.csv", "rss.csv", "sinr.csv", "best_tx.csv"} <= set(fields)
    assert (out / "report.txt").exists() and (out / "report.json").exists()
    man = json.loads((out / "manifest.json").read_text())
    assert man["outputs"] == sorted(man["outputs"]) == m.outputs
    assert man["config_hash"] == cfg.config_hash()
    assert man["config"] == cfg.resolved and man["warnings"] == []
    # the manifest is written last
    mt = os.path.getmtime(out / "manifest.json")
    assert all(os.path.getmtime(out / p) <= mt for p in man["outputs"])


def test_binary_format_run(tmp_path):
    _empty_run(tmp_path, output={"format": "binary"})
    assert sorted(os.listdir(tmp_path / "out" / "fields")) == sorted(
        f"{n}.bin" for n in pipeline.FIELD_FILES)


def test_stage_label_on_error(tmp_path):
    cfg = config.parse_config(MINIMAL)
    with pytest.raises(pipeline.PipelineError) as ei:
        pipeline.run_pipeline(cfg, str(tmp_path / "missing.json"), out_dir=str(tmp_path))
    assert ei.value.stage == "scene"
    scene, _ = write_inputs(str(tmp_path), [scenes.ground_mesh(0, 0, 10, 10)], MINIMAL)
    with pytest.raises(pipeline.PipelineError) as ei:
        pipeline.run_pipeline(cfg, scene, out_dir=str(tmp_path))
    assert ei.value.stage == "grid"


def test_truncation_warning_keeps_success(tmp_path):
    d = scenes.manhattan_deployment(spacing=20.0, render=False)
    d["tracer"] = {"max_paths_per_link": 2}
    scene, cfg_path = write_inputs(str(tmp_path), scenes.manhattan_meshes(), d)
    out = tmp_path / "out"
    rc = cli.main(["trace", "--scene", scene, "--config", cfg_path, "--out", str(out), "--quiet"])
    assert rc == cli.EXIT_OK
    warnings = json.loads((out / "manifest.json").read_text())["warnings"]
    assert len(warnings) == 3
    assert all("max_paths_per_link=2" in w for w in warnings)


@pytest.fixture(scope="module")
def golden_out(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("golden") / "out")
    manifest, cfg = golden_run(out)
    return out, manifest, cfg


@pytest.mark.parametrize("rel", GOLDEN_FILES)
def test_manhattan_matches_golden(golden_out, rel):
    out, _, _ = golden_out
    ref = os.path.join(GOLDEN_DIR, _backend.backend_name(), "manhattan", rel)
    with open(os.path.join(out, rel), "rb") as a, open(ref, "rb") as b:
        assert a.read() == b.read(), rel


def test_golden_raster_is_valid_png(golden_out):
    out, _, cfg = golden_out
    with Image.open(os.path.join(out, "render", "rss.png")) as im:
        assert im.format == "PNG"
        assert im.size == (20 * 4, 20 * 4 + render.LEGEND_HEIGHT)


def test_report_and_render_subcommands_reproduce(golden_out, tmp_path):
    out, _, _ = golden_out
    copy = tmp_path / "copy"
    os.makedirs(copy / "fields")
    for n in pipeline.FIELD_FILES:
        (copy / "fields" / f"{n}.csv").write_bytes(open(os.path.join(out, "fields", f"{n}.csv"),
                                                        "rb").read())
    (copy / "manifest.json").write_bytes(open(os.path.join(out, "manifest.json"), "rb").read())
    assert cli.main(["report", "--out", str(copy)]) == 0
    assert cli.main(["render", "--out", str(copy)]) == 0
    for rel in ("report.txt", "report.json", "render/sinr.png", "render/best_tx.png"):
        assert (copy / rel).read_bytes() == open(os.path.join(out, rel), "rb").read(), rel


# cli exit codes

def test_cli_exit_codes(tmp_path):
    scene, cfg_path = write_inputs(str(tmp_path), [], doc(render={"enabled": False}))
    out = str(tmp_path / "o")
    base = ["trace", "--quiet", "--out", out]
    assert cli.main(base + ["--scene", scene, "--config", cfg_path]) == cli.EXIT_OK
    assert cli.main(base + ["--scene", str(tmp_path / "nope.json"),
                            "--config", cfg_path]) == cli.EXIT_SCENE
    bad = tmp_path / "bad.yaml"
    bad.write_text(yaml.safe_dump(doc(bandwidth_hz=0)))
    assert cli.main(base + ["--scene", scene, "--config", str(bad)]) == cli.EXIT_CONFIG
    ft = tmp_path / "ft.json"
    d = json.loads(open(scene).read())
    d["units"] = "ft"
    ft.write_text(json.dumps(d))
    assert cli.main(base + ["--scene", str(ft), "--config", cfg_path]) == cli.EXIT_SCENE
    empty = tmp_path / "nofields"
    empty.mkdir()
    assert cli.main(["report", "--out", str(empty), "--config", cfg_path]) == cli.EXIT_RUNTIME
    assert cli.main(["report", "--out", str(empty)]) == cli.EXIT_CONFIG


def test_cli_flags_override_config(tmp_path):
    scene, cfg_path = write_inputs(str(tmp_path), [], doc(render={"enabled": False}))
    out = tmp_path / "o"
    assert cli.main(["trace", "--quiet", "--scene", scene, "--config", cfg_path, "--out",
                     str(out), "--format", "binary", "--combining", "incoherent",
                     "--threads", "1"]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["config"]["combining"] == "incoherent"
    assert man["config"]["output"]["format"] == "binary"
    assert man["threads"] == 1


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "raytwin.appio.cli", "trace", "--scene", "x"],
                       capture_output=True, text=True)
    assert r.returncode == 2 and "--config" in r.stderr  # argparse usage error


def test_exponent_floats_without_sign():
    cfg = config.parse_config("carrier_hz: 10e9\nbandwidth_hz: 400.0e6\n"
                              "grid: {region: [0, 0, 20, 20]}\n"
                              "transmitters: [{site_id: a, position: [10, 10, 10]}]\n")
    assert cfg.carrier_hz == 10e9 and cfg.bandwidth_hz == 400e6
    with pytest.raises(ConfigError, match="carrier_hz"):
        config.parse_config("carrier_hz: '1e9'\nbandwidth_hz: 4e8\n"
                            "grid: {region: [0, 0, 20, 20]}\n"
                            "transmitters: [{site_id: a, position: [10, 10, 10]}]\n")

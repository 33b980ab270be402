"""End-to-end run: scene -> grid -> per-site fields -> assembly -> service stats -> files."""

import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import __version__, _backend, geometry
from ..radiomap import assemble_fields, build_grid, compute_tx_field, noise_power_dbm
from ..service import (ThroughputField, coverage_report, macro_diversity, report_to_json,
                       report_to_text)
from . import export, render

FIELD_FILES = ("path_gain", "rss", "sinr", "best_tx", "sinr_second")
RENDERED = ("path_gain", "rss", "sinr", "best_tx")
LABELS = {"path_gain": "path gain dB", "rss": "RSS dBm", "sinr": "SINR dB", "best_tx": "best site"}


class PipelineError(RuntimeError):
    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class RunManifest:
    config_hash: str
    engine_version: str
    backend: str
    threads: int
    wall_time_s: float
    warnings: list
    outputs: list
    config: dict = field(repr=False)

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


@dataclass
class FieldSet:
    """The exported per-cell fields, enough to recompute service statistics."""

    sinr_best_db: np.ndarray
    sinr_second_db: np.ndarray
    valid: np.ndarray
    n_tx: int


def analyze(fields, cfg):
    """Service report and macro-diversity for a FieldSet or CoverageFields."""
    tf = ThroughputField.from_fields(fields, cfg.bandwidth_hz)
    service = coverage_report(tf, cfg.thresholds)
    urllc = cfg.thresholds.by_label(cfg.urllc_label)
    macro = macro_diversity(fields, urllc.rate, cfg.bandwidth_hz)
    meta = {"engine_version": __version__, "config_hash": cfg.config_hash(),
            "urllc_threshold": f"{urllc.label} ({urllc.rate:g} bit/s)",
            "thresholds": ", ".join(f"{t.label}={t.rate:g}" for t in cfg.thresholds),
            "combining": cfg.combining, "n_sites": fields.n_tx}
    return service, macro, meta


def write_reports(out_dir, fields, cfg):
    service, macro, meta = analyze(fields, cfg)
    txt = os.path.join(out_dir, "report.txt")
    js = os.path.join(out_dir, "report.json")
    with open(txt, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report_to_text(service, macro, meta))
    with open(js, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report_to_json(service, macro, meta))
    return [txt, js]


def render_fields(out_dir, arrays, grid, cfg):
    rd = cfg.render
    os.makedirs(os.path.join(out_dir, "render"), exist_ok=True)
    markers = [(t.position[0], t.position[1]) for t in cfg.transmitters]
    written = []
    for name in RENDERED:
        lo, hi = rd["ranges"][name]
        vals = arrays[name]
        if name == "best_tx":
            vals = np.where(vals < 0, np.nan, vals)
        img = render.render_heatmap(vals, grid, rd["palette"], markers, lo, hi,
                                    rd["pixels_per_cell"], label=LABELS[name])
        written.append(render.save_png(img, os.path.join(out_dir, "render", f"{name}.png")))
    return written


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except PipelineError:
        raise
    except Exception as exc:  # noqa: BLE001 - relabel with the stage
        raise PipelineError(name, exc) from exc


def run_pipeline(cfg, scene_path, out_dir=None, threads=None, progress=False):
    t0 = time.perf_counter()
    out_dir = out_dir or cfg.output_dir
    n_threads = _backend.resolve_threads(threads)
    scene = _stage("scene", geometry.load_scene_file, scene_path)
    grid = _stage("grid", build_grid, cfg.region, cfg.spacing, cfg.rx_height, scene)
    noise = noise_power_dbm(cfg.bandwidth_hz, cfg.noise_figure_db, cfg.temperature_k)
    warnings = []
    per_tx = []
    for i, tx in enumerate(cfg.transmitters):
        ts = time.perf_counter()
        f = _stage("trace", compute_tx_field, tx, grid, scene, cfg.tracer, cfg.combining,
                   threads=n_threads)
        if f.truncated_cells:
            warnings.append(f"site {tx.site_id}: {f.truncated_cells} cells truncated at "
                            f"max_paths_per_link={cfg.tracer.max_paths_per_link}")
        per_tx.append(f)
        if progress:
            print(f"traced site {i + 1}/{len(cfg.transmitters)} {tx.site_id} "
                  f"({time.perf_counter() - ts:.1f} s)", file=sys.stderr)
    fields = _stage("assemble", assemble_fields, per_tx, noise, grid.valid)

    arrays = {"path_gain": fields.max_path_gain, "rss": fields.max_rss,
              "sinr": fields.sinr_best_db,
              "best_tx": np.where(fields.best_tx < 0, np.nan, fields.best_tx.astype(np.float64)),
              "sinr_second": fields.sinr_second_db}
    fdir = os.path.join(out_dir, "fields")
    os.makedirs(fdir, exist_ok=True)
    outputs = []
    for name in FIELD_FILES:
        fg = export.FieldGrid(arrays[name], tuple(grid.origin), grid.spacing, name, grid.rx_height)
        outputs.append(_stage("export", export.write_field, os.path.join(fdir, name), fg,
                              cfg.output_format))
    fs = FieldSet(arrays["sinr"], arrays["sinr_second"], grid.valid, fields.n_tx)
    outputs += _stage("report", write_reports, out_dir, fs, cfg)
    if cfg.render["enabled"]:
        outputs += _stage("render", render_fields, out_dir, arrays, grid, cfg)
    manifest = RunManifest(cfg.config_hash(), __version__, _backend.backend_name(), n_threads,
                           round(time.perf_counter() - t0, 3), warnings,
                           sorted(os.path.relpath(p, out_dir) for p in outputs), cfg.resolved)
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        fh.write(manifest.to_json())
    return manifest


def load_fieldset(out_dir, n_tx):
    """Read exported fields back; returns (FieldSet, arrays, grid-like geometry)."""
    fdir = os.path.join(out_dir, "fields")
    arrays = {}
    geo = None
    for name in FIELD_FILES:
        for ext in export.EXTENSIONS.values():
            p = os.path.join(fdir, name + ext)
            if os.path.exists(p):
                fg = export.read_field(p)
                arrays[name] = fg.values
                geo = geo or fg
                break
        else:
            raise FileNotFoundError(f"missing field file {name} in {fdir}")
    valid = ~np.isnan(arrays["sinr"])
    grid = _FileGrid(np.array(geo.origin), geo.values.shape[1], geo.values.shape[0], geo.spacing)
    return FieldSet(arrays["sinr"], arrays["sinr_second"], valid, n_tx), arrays, grid


@dataclass
class _FileGrid:
    origin: np.ndarray
    nx: int
    ny: int
    spacing: float

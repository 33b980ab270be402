"""Deployment configuration: schema, defaults and validation.

Every default is written back into the resolved document, so the run
manifest records every value that influenced a run.
"""

import copy
import hashlib
import json
import math
import re
from dataclasses import dataclass

import numpy as np
import yaml

from ..antenna import PATTERNS, POLARIZATIONS, AntennaConfig, Orientation
from ..radiomap import Transmitter
from ..service import ServiceThresholds, Threshold
from ..tracer import DIFFRACTION_MODELS, MAX_ORDER, TracerConfig

COMBINING = ("coherent", "incoherent")
FORMATS = ("csv", "binary")
FIELDS = ("path_gain", "rss", "sinr", "best_tx")

DEFAULTS = {
    "version": 1,
    "noise_figure_db": 7.0,
    "temperature_k": 290.0,
    "combining": "coherent",
    "grid": {"spacing": 2.0, "rx_height": 1.5},
    "tracer": {"max_reflection_order": 3, "diffraction_enabled": True, "diffraction_model": "utd",
               "max_paths_per_link": 10_000, "path_floor_db": -250.0, "occlusion_epsilon": 1e-4},
    "thresholds": [{"label": "XR-min", "rate_bps": 30e6}, {"label": "URLLC", "rate_bps": 100e6},
                   {"label": "V2X", "rate_bps": 700e6}, {"label": "XR-premium", "rate_bps": 1.7e9}],
    "urllc_label": "URLLC",
    "antenna": {"element_gain_max": 8.0, "theta_3db": 65.0, "phi_3db": 65.0, "sla_v": 30.0,
                "a_max": 30.0, "rows": 8, "cols": 8, "spacing": 0.5, "polarization": "vertical",
                "pattern": "3gpp"},
    "output": {"dir": "out", "format": "csv"},
    "render": {"enabled": True, "palette": "viridis", "pixels_per_cell": 4,
               "ranges": {"path_gain": [-160.0, -60.0], "rss": [-130.0, -30.0],
                          "sinr": [-20.0, 40.0], "best_tx": [0.0, 9.0]}},
}
TX_DEFAULTS = {"power_dbm": 30.0, "orientation": {"bearing": 0.0, "downtilt": 6.0}}

_TOP = {"version", "carrier_hz", "bandwidth_hz", "noise_figure_db", "temperature_k", "combining",
        "grid", "tracer", "thresholds", "urllc_label", "antenna", "transmitters", "output",
        "render"}
_REQUIRED = ("carrier_hz", "bandwidth_hz", "grid", "transmitters")


class ConfigError(ValueError):
    pass


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads YAML 1.2 floats such as ``10e9`` (1.1 needs ``10.0e+9``)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
                   |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
                   |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
                   |[-+]?\.(?:inf|Inf|INF)
                   |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."))


def _keys(d, allowed, path):
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected a mapping")
    extra = set(d) - set(allowed)
    if extra:
        raise ConfigError(f"{path}: unknown key(s) {', '.join(sorted(map(str, extra)))}")


def _num(v, path, positive=False, integer=False, minimum=None):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(f"{path}: expected an integer, got {v!r}")
    v = int(v) if integer else float(v)
    if not math.isfinite(v):
        raise ConfigError(f"{path}: must be finite")
    if positive and not v > 0:
        raise ConfigError(f"{path}: must be positive, got {v}")
    if minimum is not None and v < minimum:
        raise ConfigError(f"{path}: must be >= {minimum}, got {v}")
    return v


def _choice(v, options, path):
    if v not in options:
        raise ConfigError(f"{path}: must be one of {', '.join(options)}, got {v!r}")
    return v


def _merge(defaults, given):
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _antenna(d, path):
    _keys(d, DEFAULTS["antenna"], path)
    a = {k: _num(d[k], f"{path}.{k}", integer=k in ("rows", "cols"))
         for k in DEFAULTS["antenna"] if k not in ("polarization", "pattern")}
    a["polarization"] = _choice(d["polarization"], POLARIZATIONS, f"{path}.polarization")
    a["pattern"] = _choice(d["pattern"], PATTERNS, f"{path}.pattern")
    try:
        AntennaConfig(**a)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return a


@dataclass(frozen=True)
class DeploymentConfig:
    carrier_hz: float
    bandwidth_hz: float
    noise_figure_db: float
    temperature_k: float
    transmitters: tuple
    region: tuple
    spacing: float
    rx_height: float
    tracer: TracerConfig
    thresholds: ServiceThresholds
    urllc_label: str
    combining: str
    output_dir: str
    output_format: str
    render: dict
    resolved: dict

    def config_hash(self):
        """SHA-256 of the canonical resolved config; the output directory is left out."""
        doc = copy.deepcopy(self.resolved)
        doc["output"].pop("dir", None)
        canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def with_overrides(self, **kw):
        """Re-parse with top-level overrides (used by CLI flags)."""
        doc = copy.deepcopy(self.resolved)
        for k, v in kw.items():
            if v is None:
                continue
            if k == "output_dir":
                doc["output"]["dir"] = v
            elif k == "output_format":
                doc["output"]["format"] = v
            else:
                doc[k] = v
        return parse_config(doc)


def parse_config(document):
    """Validate a deployment document (YAML/JSON text or mapping) and resolve defaults."""
    if isinstance(document, (str, bytes)):
        try:
            doc = yaml.load(document, Loader=_Loader)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f"line {mark.line + 1}: " if mark else ""
            raise ConfigError(f"{where}{getattr(exc, 'problem', exc)}") from exc
    else:
        doc = copy.deepcopy(document)
    _keys(doc, _TOP, "config")
    for k in _REQUIRED:
        if k not in doc:
            raise ConfigError(f"config: missing required key {k!r}")
    if "region" not in (doc["grid"] or {}):
        raise ConfigError("grid: missing required key 'region'")
    given_thresholds = "thresholds" in doc
    r = _merge({k: v for k, v in DEFAULTS.items() if k != "thresholds"},
               {k: v for k, v in doc.items() if k != "thresholds"})
    r["thresholds"] = copy.deepcopy(doc["thresholds"] if given_thresholds else DEFAULTS["thresholds"])

    if r["version"] != 1:
        raise ConfigError(f"version: unsupported config version {r['version']!r}")
    carrier = _num(r["carrier_hz"], "carrier_hz", positive=True)
    bandwidth = _num(r["bandwidth_hz"], "bandwidth_hz", positive=True)
    nf = _num(r["noise_figure_db"], "noise_figure_db", minimum=0.0)
    temp = _num(r["temperature_k"], "temperature_k", positive=True)
    combining = _choice(r["combining"], COMBINING, "combining")

    g = r["grid"]
    _keys(g, ("region", "spacing", "rx_height"), "grid")
    reg = g["region"]
    if not isinstance(reg, (list, tuple)) or len(reg) != 4:
        raise ConfigError("grid.region: expected [xmin, ymin, xmax, ymax]")
    region = tuple(_num(v, f"grid.region[{i}]") for i, v in enumerate(reg))
    if region[2] <= region[0] or region[3] <= region[1]:
        raise ConfigError("grid.region: need xmax > xmin and ymax > ymin")
    spacing = _num(g["spacing"], "grid.spacing", positive=True)
    rx_height = _num(g["rx_height"], "grid.rx_height", positive=True)
    r["grid"] = {"region": list(region), "spacing": spacing, "rx_height": rx_height}

    t = r["tracer"]
    _keys(t, DEFAULTS["tracer"], "tracer")
    order = _num(t["max_reflection_order"], "tracer.max_reflection_order", integer=True, minimum=0)
    if order > MAX_ORDER:
        raise ConfigError(f"tracer.max_reflection_order: hard cap is {MAX_ORDER}, got {order}")
    if not isinstance(t["diffraction_enabled"], bool):
        raise ConfigError("tracer.diffraction_enabled: expected true or false")
    tcfg = TracerConfig(
        max_reflection_order=order,
        diffraction_enabled=t["diffraction_enabled"],
        diffraction_model=_choice(t["diffraction_model"], DIFFRACTION_MODELS,
                                  "tracer.diffraction_model"),
        max_paths_per_link=_num(t["max_paths_per_link"], "tracer.max_paths_per_link",
                                integer=True, minimum=1),
        path_floor_db=_num(t["path_floor_db"], "tracer.path_floor_db"),
        occlusion_epsilon=_num(t["occlusion_epsilon"], "tracer.occlusion_epsilon", positive=True),
    )
    r["tracer"] = {"max_reflection_order": tcfg.max_reflection_order,
                   "diffraction_enabled": tcfg.diffraction_enabled,
                   "diffraction_model": tcfg.diffraction_model,
                   "max_paths_per_link": tcfg.max_paths_per_link,
                   "path_floor_db": tcfg.path_floor_db,
                   "occlusion_epsilon": tcfg.occlusion_epsilon}

    th = r["thresholds"]
    if not isinstance(th, list) or not th:
        raise ConfigError("thresholds: expected a non-empty list of {label, rate_bps}")
    items = []
    for i, item in enumerate(th):
        _keys(item, ("label", "rate_bps"), f"thresholds[{i}]")
        if "label" not in item or "rate_bps" not in item:
            raise ConfigError(f"thresholds[{i}]: needs label and rate_bps")
        items.append(Threshold(str(item["label"]),
                               _num(item["rate_bps"], f"thresholds[{i}].rate_bps", positive=True)))
    try:
        thresholds = ServiceThresholds(tuple(items)).sorted()
    except ValueError as exc:
        raise ConfigError(f"thresholds: {exc}") from exc
    r["thresholds"] = [{"label": x.label, "rate_bps": x.rate} for x in thresholds]
    urllc = str(r["urllc_label"])
    if urllc not in [x.label for x in thresholds]:
        raise ConfigError(f"urllc_label: {urllc!r} is not one of the threshold labels")

    r["antenna"] = _antenna(r["antenna"], "antenna")

    txs = r["transmitters"]
    if not isinstance(txs, list) or not txs:
        raise ConfigError("transmitters: expected a non-empty list")
    resolved_tx, transmitters, seen = [], [], set()
    for i, tx in enumerate(txs):
        path = f"transmitters[{i}]"
        _keys(tx, ("site_id", "position", "power_dbm", "orientation", "antenna"), path)
        for k in ("site_id", "position"):
            if k not in tx:
                raise ConfigError(f"{path}: missing required key {k!r}")
        sid = str(tx["site_id"])
        if sid in seen:
            raise ConfigError(f"{path}.site_id: duplicate site id {sid!r}")
        seen.add(sid)
        txr = _merge(TX_DEFAULTS, tx)
        pos = txr["position"]
        if not isinstance(pos, (list, tuple)) or len(pos) != 3:
            raise ConfigError(f"{path}.position: expected [x, y, z]")
        pos = [_num(v, f"{path}.position[{j}]") for j, v in enumerate(pos)]
        power = _num(txr["power_dbm"], f"{path}.power_dbm")
        o = txr["orientation"]
        _keys(o, ("bearing", "downtilt"), f"{path}.orientation")
        try:
            orient = Orientation(_num(o["bearing"], f"{path}.orientation.bearing"),
                                 _num(o["downtilt"], f"{path}.orientation.downtilt"))
        except ValueError as exc:
            raise ConfigError(f"{path}.orientation: {exc}") from exc
        ant = _antenna(_merge(r["antenna"], tx.get("antenna", {})), f"{path}.antenna")
        transmitters.append(Transmitter(sid, np.array(pos), power, carrier, AntennaConfig(**ant),
                                        orient, i))
        resolved_tx.append({"site_id": sid, "position": pos, "power_dbm": power,
                            "orientation": {"bearing": orient.bearing,
                                            "downtilt": orient.downtilt},
                            "antenna": ant})
    r["transmitters"] = resolved_tx

    out = r["output"]
    _keys(out, ("dir", "format"), "output")
    out = {"dir": str(out["dir"]), "format": _choice(out["format"], FORMATS, "output.format")}
    r["output"] = out

    rd = r["render"]
    _keys(rd, DEFAULTS["render"], "render")
    if not isinstance(rd["enabled"], bool):
        raise ConfigError("render.enabled: expected true or false")
    _keys(rd["ranges"], FIELDS, "render.ranges")
    ranges = {}
    for k, v in rd["ranges"].items():
        if not isinstance(v, (list, tuple)) or len(v) != 2:
            raise ConfigError(f"render.ranges.{k}: expected [low, high]")
        lo = _num(v[0], f"render.ranges.{k}[0]")
        hi = _num(v[1], f"render.ranges.{k}[1]")
        if not hi > lo:
            raise ConfigError(f"render.ranges.{k}: high must exceed low")
        ranges[k] = [lo, hi]
    from matplotlib import colormaps

    if str(rd["palette"]) not in colormaps:
        raise ConfigError(f"render.palette: unknown colormap {rd['palette']!r}")
    render = {"enabled": rd["enabled"], "palette": str(rd["palette"]),
              "pixels_per_cell": _num(rd["pixels_per_cell"], "render.pixels_per_cell",
                                      integer=True, minimum=1),
              "ranges": ranges}
    r["render"] = render
    r["carrier_hz"], r["bandwidth_hz"] = carrier, bandwidth
    r["noise_figure_db"], r["temperature_k"] = nf, temp

    return DeploymentConfig(carrier, bandwidth, nf, temp, tuple(transmitters), region, spacing,
                            rx_height, tcfg, thresholds, urllc, combining, out["dir"],
                            out["format"], render, r)


def load_config_file(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)

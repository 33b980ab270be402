"""Deterministic ray-traced radio coverage with service-level analysis."""

__version__ = "0.1.0"

from .antenna import AntennaConfig, Orientation  # noqa: E402
from .geometry import (Scene, SceneError, TriangleMesh, build_scene, load_scene,  # noqa: E402
                       load_scene_file)
from .radiomap import (CoverageFields, RadioGrid, Transmitter, assemble_fields,  # noqa: E402
                       build_grid, compute_tx_field, noise_power_dbm)
from .service import (ServiceThresholds, ThroughputField, coverage_report,  # noqa: E402
                      empirical_cdf, macro_diversity, threshold_mask)
from .tracer import (PropagationPath, TracerConfig, path_gain, sweep_points,  # noqa: E402
                     trace_all, trace_diffraction, trace_los, trace_reflections)

__all__ = [
    "AntennaConfig", "CoverageFields", "Orientation", "PropagationPath", "RadioGrid", "Scene",
    "SceneError", "ServiceThresholds", "ThroughputField", "TracerConfig", "Transmitter",
    "TriangleMesh", "assemble_fields", "build_grid", "build_scene", "compute_tx_field",
    "coverage_report", "empirical_cdf", "load_scene", "load_scene_file", "macro_diversity",
    "noise_power_dbm", "path_gain", "sweep_points", "threshold_mask", "trace_all",
    "trace_diffraction", "trace_los", "trace_reflections",
]

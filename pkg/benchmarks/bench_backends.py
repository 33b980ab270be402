"""Time the Manhattan pipeline on the numba and numpy backends.

Each backend runs in its own interpreter (the backend flag is read at
import), after one untimed warm-up run that fills the numba kernel cache.

    python benchmarks/bench_backends.py --spacing 2 --threads 1
"""

import argparse
import json
import os
import subprocess
import sys
import tempfile

import numpy as np
import yaml

from raytwin import geometry, scenes
from raytwin.appio import pipeline

RUN = """
import json, sys, time
from raytwin.appio import config, pipeline
cfg = config.load_config_file(sys.argv[1]).with_overrides(output_dir=sys.argv[3])
t0 = time.perf_counter()
m = pipeline.run_pipeline(cfg, sys.argv[2], threads=sys.argv[4])
print(json.dumps({"seconds": time.perf_counter() - t0, "backend": m.backend,
                  "threads": m.threads}))
"""


def run(backend, cfg_path, scene_path, out, threads):
    env = dict(os.environ)
    env.pop("RAYTWIN_NO_NUMBA", None)
    if backend == "numpy":
        env["RAYTWIN_NO_NUMBA"] = "1"
    r = subprocess.run([sys.executable, "-c", RUN, cfg_path, scene_path, out, str(threads)],
                       env=env, capture_output=True, text=True, check=True)
    return json.loads(r.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--spacing", type=float, default=2.0)
    ap.add_argument("--threads", default="1")
    ap.add_argument("--repeat", type=int, default=1)
    args = ap.parse_args(argv)
    with tempfile.TemporaryDirectory() as tmp:
        scene_path = os.path.join(tmp, "scene.json")
        cfg_path = os.path.join(tmp, "deployment.yaml")
        with open(scene_path, "w") as fh:
            json.dump(geometry.scene_document(scenes.manhattan_meshes()), fh)
        with open(cfg_path, "w") as fh:
            yaml.safe_dump(scenes.manhattan_deployment(spacing=args.spacing, render=False), fh)
        results = {}
        for backend in ("numba", "numpy"):
            out = os.path.join(tmp, backend)
            if backend == "numba":
                run(backend, cfg_path, scene_path, out, args.threads)  # warm-up
            times = [run(backend, cfg_path, scene_path, out, args.threads)
                     for _ in range(args.repeat)]
            results[backend] = (min(t["seconds"] for t in times), times[0], out)
        n = 3
        a, _, _ = pipeline.load_fieldset(results["numba"][2], n)
        b, _, _ = pipeline.load_fieldset(results["numpy"][2], n)
        ok = a.valid & np.isfinite(a.sinr_best_db)
        diff = float(np.max(np.abs(a.sinr_best_db[ok] - b.sinr_best_db[ok])))
    cells = a.valid.size
    for backend, (sec, info, _) in results.items():
        print(f"{backend:6s} {sec:8.2f} s  {cells / sec:9.0f} cells/s  "
              f"(reported backend {info['backend']}, {info['threads']} threads)")
    print(f"speedup numba/numpy: {results['numpy'][0] / results['numba'][0]:.2f}x")
    print(f"max |SINR difference| between backends: {diff:.2e} dB")


if __name__ == "__main__":
    main()

"""On-disk dataset layout.

::

    manifest.json                        format version, geometry, acquisition, runs, seeds
    thermocouples_RR.csv                 step, time_s, t_center_c, t_wall_c
    sim_profiles_RR.csv                  header of radii (m), one row of temperatures (C) per step
    waveforms/run_RR/step_SSSS_tx_TT.f32le
                                         N_t x (n - 1) little-endian float32, row-major,
                                         receivers ascending with the transmitter left out
    theta.json                           optional fitted correction per run

Numbers in CSV files carry 9 significant digits.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .acoustics import RingGeometry
from .config import _plain, acoustic_from_dict
from .correction import BoundaryRecord, CorrectionParams
from .dataset import FORMAT_VERSION, ExperimentDataset, RunRecord
from .errors import DatasetError, FormatVersionError
from .thermal import ProfileSeries

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"
THETA = "theta.json"
PROVENANCES = ("synthetic", "experimental")


def fmt(value):
    return format(float(value), ".9g")


def blob_name(run_id, step, tx):
    return Path("waveforms") / f"run_{run_id:02d}" / f"step_{step:04d}_tx_{tx:02d}.f32le"


def _write_csv(path, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def _read_csv(path):
    path = Path(path)
    if not path.is_file():
        raise DatasetError(path, "missing file")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetError(path, "empty file")
    return rows[0], rows[1:]


class DirectoryWaveforms:
    """Waveform source backed by the blob files of a dataset directory."""

    def __init__(self, root, n_t, n_transducers):
        self.root = Path(root)
        self.n_t = n_t
        self.n_cols = n_transducers - 1
        self.steps = {}

    @property
    def blob_bytes(self):
        return self.n_t * self.n_cols * 4

    def path(self, run_id, step, tx):
        return self.root / blob_name(run_id, step, tx)

    def load_step(self, run_id, step, tx):
        path = self.path(run_id, step, tx)
        try:
            raw = path.read_bytes()
        except FileNotFoundError as exc:
            raise DatasetError(path, "missing waveform blob") from exc
        if len(raw) != self.blob_bytes:
            raise DatasetError(path, f"size {len(raw)} bytes, expected {self.blob_bytes} "
                                     f"({self.n_t} x {self.n_cols} float32)")
        return np.frombuffer(raw, dtype="<f4").reshape(self.n_t, self.n_cols)

    def load(self, run_id, tx):
        return np.stack([self.load_step(run_id, s, tx) for s in range(self.steps[run_id])])

    def check(self, run_id, steps, n_transducers):
        for step in range(steps):
            for tx in range(n_transducers):
                path = self.path(run_id, step, tx)
                if not path.is_file():
                    raise DatasetError(path, "missing waveform blob")
                size = path.stat().st_size
                if size != self.blob_bytes:
                    raise DatasetError(path, f"size {size} bytes, expected {self.blob_bytes} "
                                             f"({self.n_t} x {self.n_cols} float32)")


def manifest_dict(dataset: ExperimentDataset):
    return {
        "format_version": FORMAT_VERSION,
        "provenance": dataset.provenance,
        "geometry": asdict(dataset.geometry),
        "acoustic": _plain(dataset.acoustic),
        "excitation": asdict(dataset.acoustic.excitation),
        "sample_rate": dataset.sample_rate,
        "n_t": dataset.n_t,
        "step_interval": dataset.step_interval,
        "runs": [{"run_id": r.run_id, "steps": r.steps, "seed": r.seed} for r in dataset.runs],
        "seeds": dict(dataset.seeds),
    }


def write_dataset(dataset: ExperimentDataset, path, progress=None):
    """Write ``dataset`` into directory ``path`` (created; must not already hold a manifest)."""
    root = Path(path)
    if (root / MANIFEST).exists():
        raise DatasetError(root / MANIFEST, "dataset directory already exists; refusing to overwrite")
    root.mkdir(parents=True, exist_ok=True)
    n = dataset.geometry.n_transducers
    for run in dataset.runs:
        rid = run.run_id
        b = run.boundary
        _write_csv(root / f"thermocouples_{rid:02d}.csv", ["step", "time_s", "t_center_c", "t_wall_c"],
                   [[int(s), fmt(s * dataset.step_interval), fmt(c), fmt(w)]
                    for s, c, w in zip(b.steps, b.t_center, b.t_wall)])
        _write_csv(root / f"sim_profiles_{rid:02d}.csv", [fmt(r) for r in run.sim.r_grid],
                   [[fmt(v) for v in row] for row in run.sim.temps])
        (root / "waveforms" / f"run_{rid:02d}").mkdir(parents=True, exist_ok=True)
        for step in range(run.steps):
            for tx in range(n):
                block = np.ascontiguousarray(dataset.waveforms.load_step(rid, step, tx), dtype="<f4")
                if block.shape != (dataset.n_t, n - 1):
                    raise DatasetError(blob_name(rid, step, tx), f"waveform block has shape {block.shape}")
                (root / blob_name(rid, step, tx)).write_bytes(block.tobytes())
            if progress:
                progress(rid, step)
        log.info("wrote run %d (%d steps)", rid, run.steps)
    if dataset.thetas:
        write_thetas(root, dataset.thetas)
    # the manifest goes last so a partial write never looks complete
    (root / MANIFEST).write_text(json.dumps(manifest_dict(dataset), indent=2, sort_keys=True) + "\n",
                                 encoding="utf-8")
    return root


def write_thetas(root, thetas):
    data = {str(rid): p.as_dict() for rid, p in sorted(thetas.items())}
    path = Path(root) / THETA
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_thetas(root):
    path = Path(root) / THETA
    if not path.is_file():
        return {}
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
        return {int(k): CorrectionParams(**v) for k, v in data.items()}
    except (ValueError, TypeError) as exc:
        raise DatasetError(path, f"unreadable correction parameters ({exc})") from exc


def read_manifest(root):
    path = Path(root) / MANIFEST
    if not path.is_file():
        raise DatasetError(path, "missing manifest")
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetError(path, f"invalid JSON ({exc})") from exc
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise FormatVersionError(path, f"unsupported format_version {version!r} (expected {FORMAT_VERSION})")
    if manifest.get("provenance") not in PROVENANCES:
        raise DatasetError(path, f"unknown provenance {manifest.get('provenance')!r}")
    return manifest


def _read_run(root, rid, steps, step_interval):
    tc_path = root / f"thermocouples_{rid:02d}.csv"
    header, rows = _read_csv(tc_path)
    if header != ["step", "time_s", "t_center_c", "t_wall_c"]:
        raise DatasetError(tc_path, f"unexpected header {header}")
    try:
        table = np.array([[float(v) for v in row] for row in rows]).reshape(-1, 4)
    except ValueError as exc:
        raise DatasetError(tc_path, f"bad number ({exc})") from exc
    boundary = BoundaryRecord(table[:, 0].astype(int), table[:, 2], table[:, 3])

    sim_path = root / f"sim_profiles_{rid:02d}.csv"
    header, rows = _read_csv(sim_path)
    try:
        r_grid = np.array([float(v) for v in header])
        temps = np.array([[float(v) for v in row] for row in rows])
    except ValueError as exc:
        raise DatasetError(sim_path, f"bad number ({exc})") from exc
    if temps.shape != (steps, r_grid.size):
        raise DatasetError(sim_path, f"expected {steps} rows of {r_grid.size} values, got {temps.shape}")
    sim = ProfileSeries(r_grid, temps, np.arange(steps) * step_interval)
    return sim, boundary


def read_dataset(path, check_blobs=True) -> ExperimentDataset:
    """Load a dataset directory; every referenced file is checked before anything is returned."""
    root = Path(path)
    m = read_manifest(root)
    try:
        geometry = RingGeometry(**m["geometry"])
        acoustic = acoustic_from_dict(m["acoustic"])
        n_t = int(m["n_t"])
        step_interval = float(m["step_interval"])
        runs_meta = [(int(r["run_id"]), int(r["steps"]), int(r.get("seed", 0))) for r in m["runs"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetError(root / MANIFEST, f"incomplete manifest ({exc})") from exc
    if n_t != acoustic.n_samples or float(m["sample_rate"]) != acoustic.sample_rate:
        raise DatasetError(root / MANIFEST, "n_t / sample_rate disagree with the acoustic settings")
    source = DirectoryWaveforms(root, n_t, geometry.n_transducers)
    runs = []
    for rid, steps, seed in runs_meta:
        sim, boundary = _read_run(root, rid, steps, step_interval)
        if boundary.steps.size != steps:
            raise DatasetError(root / f"thermocouples_{rid:02d}.csv",
                               f"{boundary.steps.size} rows, manifest says {steps}")
        if check_blobs:
            source.check(rid, steps, geometry.n_transducers)
        source.steps[rid] = steps
        runs.append(RunRecord(rid, sim, boundary, seed=seed))
    return ExperimentDataset(geometry, acoustic, step_interval, runs, source, provenance=m["provenance"],
                             seeds=dict(m.get("seeds", {})), thetas=read_thetas(root))

"""Hybrid experiment/simulation datasets and the synthetic generator that stands in for the rig.

A dataset holds, per heating run, the simulated profile series, the two
boundary thermocouple traces and a source of raw waveforms: for every step and
transmitter an ``N_t x (n - 1)`` float32 block whose columns are the receivers
in ascending absolute index with the transmitter left out.

The synthetic generator draws one "experimental" run with perturbed heater ramp,
material constants and transducer coupling, records thermocouples and waveforms
from it, and pairs it with the nominal simulation, which is what the labels are
built from after boundary correction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .acoustics import AcousticConfig, RingGeometry, TransferModel, chord_tof_table, synthesize_columns
from .correction import BoundaryRecord, CorrectionParams, build_labels, fit_theta
from .errors import InvalidArgumentError
from .signals import preprocess_array, select_receivers
from .thermal import ProfileSeries, ThermalConfig, ramp_schedule, solve_heating

log = logging.getLogger(__name__)

FORMAT_VERSION = 1


def quantize(values, digits=9):
    """Round to ``digits`` significant decimal digits, the precision used in CSV files."""
    values = np.asarray(values, dtype=float)
    fmt = f"{{:.{digits}g}}".format
    return np.array([float(fmt(v)) for v in values.ravel()]).reshape(values.shape)


def receiver_columns(tx, n_transducers=16):
    """Absolute receiver indices stored for transmitter ``tx``, in column order."""
    return [i for i in range(n_transducers) if i != tx]


@dataclass
class RunRecord:
    run_id: int
    sim: ProfileSeries
    boundary: BoundaryRecord
    seed: int = 0
    truth: ProfileSeries | None = field(default=None, repr=False)

    @property
    def steps(self):
        return self.sim.steps


@dataclass(frozen=True)
class SyntheticConfig:
    n_runs: int = 5
    seed: int = 0
    thermal: ThermalConfig = field(default_factory=ThermalConfig)
    acoustic: AcousticConfig = field(default_factory=AcousticConfig)
    geometry: RingGeometry = field(default_factory=RingGeometry)
    ramp_time: float = 4 * 3600.0
    ramp_jitter: float = 0.10
    material_jitter: float = 0.05
    thermocouple_noise: float = 0.5

    def __post_init__(self):
        if self.n_runs < 1:
            raise InvalidArgumentError("n_runs must be >= 1")


class SyntheticWaveforms:
    """Raw waveforms computed on demand from the true run profiles; deterministic per (run, tx, step)."""

    def __init__(self, config: SyntheticConfig, runs, transfers):
        self.config = config
        self._runs = {r.run_id: r for r in runs}
        self._transfers = transfers
        self._tof_cache = {}

    def _tofs(self, run_id):
        if run_id not in self._tof_cache:
            truth = self._runs[run_id].truth
            self._tof_cache[run_id] = chord_tof_table(truth.r_grid, truth.temps, self.config.geometry,
                                                      self.config.acoustic)
        return self._tof_cache[run_id]

    def load_step(self, run_id, step, tx):
        cfg = self.config
        geom = cfg.geometry
        table = self._tofs(run_id)
        rx = receiver_columns(tx, geom.n_transducers)
        tofs = [table[step, geom.separation(tx, r)] for r in rx]
        rng = np.random.default_rng([cfg.seed, run_id, tx, step])
        data = synthesize_columns(tofs, rx, tx, geom, cfg.acoustic, rng, self._transfers[run_id])
        return data.astype("<f4")

    def load(self, run_id, tx):
        steps = self._runs[run_id].steps
        return np.stack([self.load_step(run_id, s, tx) for s in range(steps)])


@dataclass
class ExperimentDataset:
    geometry: RingGeometry
    acoustic: AcousticConfig
    step_interval: float
    runs: list
    waveforms: object  # has load(run_id, tx) and load_step(run_id, step, tx)
    provenance: str = "synthetic"
    seeds: dict = field(default_factory=dict)
    thetas: dict = field(default_factory=dict)

    @property
    def run_ids(self):
        return [r.run_id for r in self.runs]

    def run(self, run_id):
        for r in self.runs:
            if r.run_id == run_id:
                return r
        raise InvalidArgumentError(f"unknown run {run_id}")

    @property
    def n_t(self):
        return self.acoustic.n_samples

    @property
    def sample_rate(self):
        return self.acoustic.sample_rate

    def set_ids(self):
        return [txset_id(r.run_id, tx) for r in self.runs for tx in range(self.geometry.n_transducers)]

    def fit_corrections(self, refit=False):
        """Correction parameters per run, fitted on first use."""
        for r in self.runs:
            if refit or r.run_id not in self.thetas:
                self.thetas[r.run_id] = fit_theta(r.sim, r.boundary)
        return self.thetas

    def labels(self, run_id, n_pts):
        theta = self.fit_corrections()[run_id]
        return build_labels(self.run(run_id).sim, theta, n_pts)

    def inputs(self, run_id, tx, n_rx, decimation=2):
        """Preprocessed CNN inputs ``steps x N_t/decimation x n_rx`` (float32)."""
        n = self.geometry.n_transducers
        stored = receiver_columns(tx, n)
        chosen = select_receivers(tx, n_rx, n)
        cols = [stored.index(i) for i in chosen]
        raw = self.waveforms.load(run_id, tx)[:, :, cols]
        exc = self.acoustic.excitation.waveform(self.sample_rate).samples
        return preprocess_array(raw, exc, decimation, chosen).astype(np.float32)


def txset_id(run_id, tx):
    return f"run{run_id:02d}-tx{tx:02d}"


def _jittered_thermal(config: SyntheticConfig, rng):
    base = config.thermal
    ramp = config.ramp_time * rng.uniform(1 - config.ramp_jitter, 1 + config.ramp_jitter)
    start, hold = base.wall_schedule[0][1], base.wall_schedule[-1][1]
    m = lambda: rng.uniform(1 - config.material_jitter, 1 + config.material_jitter)  # noqa: E731
    return replace(base, wall_schedule=ramp_schedule(ramp, start, hold),
                   diffusivity=base.diffusivity * m(), density=base.density * m(),
                   heat_capacity=base.heat_capacity * m())


def make_synthetic_dataset(config: SyntheticConfig = SyntheticConfig()) -> ExperimentDataset:
    geom = config.geometry
    nominal = replace(config.thermal, inner_radius=geom.inner_radius,
                      wall_schedule=ramp_schedule(config.ramp_time, config.thermal.wall_schedule[0][1],
                                                  config.thermal.wall_schedule[-1][1]))
    runs, transfers = [], {}
    for run_id in range(config.n_runs):
        ss = np.random.SeedSequence([config.seed, run_id])
        thermal_ss, tc_ss, transfer_ss = ss.spawn(3)
        rng = np.random.default_rng(thermal_ss)
        truth = solve_heating(_jittered_thermal(replace(config, thermal=nominal), rng))
        sim = solve_heating(replace(nominal, stop_center_temp=None, max_steps=truth.steps))
        sim = ProfileSeries(quantize(sim.r_grid), quantize(sim.temps), sim.times)
        tc_rng = np.random.default_rng(tc_ss)
        noise = config.thermocouple_noise
        boundary = BoundaryRecord(
            np.arange(truth.steps),
            quantize(truth.center + tc_rng.normal(0, noise, truth.steps)),
            quantize(truth.wall + tc_rng.normal(0, noise, truth.steps)),
        )
        transfers[run_id] = TransferModel.draw(geom.n_transducers, config.acoustic, transfer_ss)
        runs.append(RunRecord(run_id, sim, boundary, seed=config.seed, truth=truth))
        log.info("run %d: %d steps", run_id, truth.steps)
    source = SyntheticWaveforms(config, runs, transfers)
    return ExperimentDataset(geom, config.acoustic, config.thermal.step_interval, runs, source,
                             provenance="synthetic", seeds={"global": config.seed})

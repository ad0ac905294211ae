"""Experiment orchestration: config validation, sweeps, artifacts, manifest.

One experiment = one output directory. Every run writes its data files plus
a manifest.json listing each artifact with its sha256; re-running the same
config with the same seeds reproduces every byte. A simulation failure
still writes the manifest, with status "failed" and the artifacts that made
it to disk.

Sweep cells (eta, L, seed) are independent tasks with disjoint random
streams and disjoint output files, so they can run on a bounded process
pool without affecting determinism.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import product

import numpy as np

from . import __version__, analysis, entanglement, io, lyapunov, mixedsim
from .channel import (
    CircuitSchedule,
    KrausPair,
    TrajectoryRecord,
    TrajectoryStreams,
    apply_unitary_layer,
    evolve_one_step,
    gate_from_seed,
    measurement_sweep,
    mix64,
    write_record_jsonl,
)
from .states import PureState, x_magnetization

OUTPUT_ROOT_ENV = "MONLYAP_OUTPUT_ROOT"

EXPERIMENT_KINDS = (
    "gap", "spectrum", "entropy", "mutual_info", "memory_loss",
    "purification", "fit", "pauli_weights", "oracle_check",
)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    kind: str
    eta: list[float] = field(default_factory=lambda: [0.3])
    L: list[int] = field(default_factory=lambda: [6])
    seeds: list[int] = field(default_factory=lambda: [1])
    out: str | None = None
    threads: int = 1
    # lyapunov knobs
    b: int | str = 16                 # block length or "auto"
    c: int = 200                      # convergence window, in blocks
    d: float = 3e-2                   # convergence threshold
    max_blocks: int = 20000
    n_tracked: int = 2
    measurement_only: bool = False
    # spectrum / pauli knobs
    num_blocks: int = 512
    window_hams: int = 100
    # entropy / mutual information knobs
    T: int = 1000
    tau_cap: int = 2000
    delta: float = 1e-2
    cut: list[int] | None = None
    # memory loss knobs
    num_initial_states: int = 3
    t_max: int = 400
    band: float = 0.5
    record_trajectory: bool = True
    # purification knobs
    trajectories: int = 100
    window: list[int] = field(default_factory=lambda: [20, 300])
    # fit knobs: [[eta, L, gap], ...] or a directory holding gap_*.json
    fit_inputs: object = None
    sweep_resolution: int = 200

    def validate(self) -> None:
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        for e in self.eta:
            if not 0.0 <= e <= 1.0:
                raise ConfigError(f"eta {e!r} outside [0, 1]")
        for size in self.L:
            if size < 2:
                raise ConfigError("L must be >= 2")
        if not self.seeds:
            raise ConfigError("need at least one seed")
        if not 0.0 < self.delta <= 1.0:
            raise ConfigError("delta must lie in (0, 1]")
        if self.d <= 0.0:
            raise ConfigError("convergence threshold d must be positive")
        if self.c < 2:
            raise ConfigError("window c must be at least 2 blocks")
        if self.b != "auto" and (not isinstance(self.b, int) or self.b < 1):
            raise ConfigError("b must be a positive integer or 'auto'")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.T < 0:
            raise ConfigError("T must be >= 0")
        if len(self.window) != 2 or self.window[0] < 1 \
                or self.window[1] < self.window[0]:
            raise ConfigError("window must be [start >= 1, end >= start]")

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**raw)

    def to_dict(self) -> dict:
        return asdict(self)


def resolve_out_dir(config: ExperimentConfig) -> str:
    if config.out:
        return config.out
    root = os.environ.get(OUTPUT_ROOT_ENV, "runs")
    return os.path.join(root, config.kind)


def cell_key(seed: int, eta: float, num_qubits: int) -> int:
    """Trajectory key for one sweep cell; changing the seed moves only this cell."""
    eta_bits = int(np.float64(eta).view(np.uint64))
    return mix64(seed, eta_bits, num_qubits)


@dataclass
class ExperimentResult:
    status: str
    out_dir: str
    artifacts: list[str]
    error: str | None = None

    @property
    def exit_code(self) -> int:
        return 0 if self.status == "ok" else 1


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    config.validate()
    out_dir = resolve_out_dir(config)
    os.makedirs(out_dir, exist_ok=True)
    error = None
    try:
        _execute_cells(config, out_dir)
        status = "ok"
    except ConfigError:
        raise
    except Exception as exc:  # simulation failure: keep partial artifacts
        status = "failed"
        error = f"{type(exc).__name__}: {exc}"
    manifest = io.build_manifest(out_dir, config.to_dict(), status, error)
    io.write_json(os.path.join(out_dir, "manifest.json"), manifest.payload())
    return ExperimentResult(status=status, out_dir=out_dir,
                            artifacts=[a["path"] for a in manifest.artifacts],
                            error=error)


def _execute_cells(config: ExperimentConfig, out_dir: str) -> None:
    if config.kind in ("fit", "oracle_check"):
        cells = [None]
    else:
        cells = list(product(config.eta, config.L, config.seeds))
    if config.threads == 1 or len(cells) == 1:
        for cell in cells:
            _run_cell(config, out_dir, cell)
        return
    with ProcessPoolExecutor(max_workers=config.threads) as pool:
        futures = [pool.submit(_run_cell, config, out_dir, cell)
                   for cell in cells]
        for fut in futures:
            fut.result()


def _run_cell(config: ExperimentConfig, out_dir: str, cell) -> None:
    _CELL_RUNNERS[config.kind](config, out_dir, cell)


def _cell_tag(eta: float, size: int, seed: int) -> str:
    return f"eta{eta:g}_L{size}_seed{seed}"


# ---------------------------------------------------------------------------
# per-kind cell runners
# ---------------------------------------------------------------------------

def _gap_cell(config: ExperimentConfig, out_dir: str, cell) -> None:
    eta, size, seed = cell
    tag = _cell_tag(eta, size, seed)
    if config.b == "auto":
        b = lyapunov.calibrate_block_length(
            eta, size, cell_key(seed, eta, size),
            window_blocks=min(config.c, 100), threshold=config.d)
    else:
        b = int(config.b)
    block_rows: dict[str, list] = {"block_index": [], "t": []}

    def sink(s, t, eps, std):
        block_rows["block_index"].append(s)
        block_rows["t"].append(t)
        for i, v in enumerate(eps, start=1):
            block_rows.setdefault(f"eps_{i}", []).append(v)
        for i, v in enumerate(std, start=1):
            block_rows.setdefault(f"window_std_{i}", []).append(v)

    est = lyapunov.run_gap_estimate(
        eta, size, cell_key(seed, eta, size),
        num_tracked=config.n_tracked, block_length=b,
        window_blocks=config.c, threshold=config.d,
        max_blocks=config.max_blocks,
        measurement_only=config.measurement_only,
        block_sink=sink,
    )
    payload = io.gap_estimate_payload(est)
    payload["cell_seed"] = seed
    io.write_json(os.path.join(out_dir, f"gap_{tag}.json"), payload)
    io.write_csv(os.path.join(out_dir, f"blocks_{tag}.csv"),
                 {k: np.asarray(v) for k, v in block_rows.items()},
                 meta={"eta": eta, "num_qubits": size, "seed": seed,
                       "block_length": b})


def _spectrum_cell(config: ExperimentConfig, out_dir: str, cell) -> None:
    eta, size, seed = cell
    b = 2 if config.b == "auto" else int(config.b)
    ham = lyapunov.run_full_spectrum(
        eta, size, cell_key(seed, eta, size),
        block_length=b, num_blocks=config.num_blocks,
        measurement_only=config.measurement_only,
    )
    check = analysis.width_bound(ham.spectrum, eta, size)
    io.write_json(
        os.path.join(out_dir, f"spectrum_{_cell_tag(eta, size, seed)}.json"),
        io.spectrum_payload(ham, seed, check),
    )


def _entropy_cell(config: ExperimentConfig, out_dir: str, cell) -> None:
    eta, size, seed = cell
    cut = tuple(config.cut) if config.cut else entanglement.half_chain_cut(size)
    series = entanglement.measure_entropy_series(
        eta, size, cut, config.T, cell_key(seed, eta, size),
        gap=None, delta=config.delta, tau_cap=config.tau_cap,
    )
    steps = np.arange(1, config.T + 1)
    io.write_csv(
        os.path.join(out_dir, f"entropy_{_cell_tag(eta, size, seed)}.csv"),
        {
            "step": steps,
            "S_A": series.samples,
            "S_B": series.complement_samples,
            "S_AB": np.zeros(config.T),
            "I": series.samples + series.complement_samples,
        },
        meta={"eta": eta, "num_qubits": size, "tau": series.burn_in,
              "burn_in_capped": series.burn_in_capped, "seed": seed,
              "cut": ",".join(str(s) for s in cut),
              "mean": series.mean, "stderr": series.stderr},
    )


def _mutual_info_cell(config: ExperimentConfig, out_dir: str, cell) -> None:
    eta, size, seed = cell
    series = entanglement.mutual_information_series(
        eta, size, config.T, cell_key(seed, eta, size),
        delta=config.delta, tau_cap=config.tau_cap,
    )
    steps = np.arange(1, config.T + 1)
    io.write_csv(
        os.path.join(out_dir, f"mutual_{_cell_tag(eta, size, seed)}.csv"),
        {
            "step": steps,
            "S_A": series.s_a,
            "S_B": series.s_b,
            "S_AB": series.s_ab,
            "I": series.samples,
        },
        meta={"eta": eta, "num_qubits": size, "tau": series.burn_in,
              "burn_in_capped": series.burn_in_capped, "seed": seed,
              "mean": series.mean, "stderr": series.stderr},
    )


def memory_loss_experiment(eta: float, num_qubits: int,
                           num_initial_states: int, delta: float, seed: int,
                           t_max: int, band: float = 0.5,
                           gap: lyapunov.GapEstimate | float | None = None):
    """Sample one trajectory, replay its operator sequence on fresh initial
    states, and report when the <X>_t traces pinch together.

    Returns (traces, record, report): traces has shape (states, t_max);
    report carries the crossing time (first step after which every pairwise
    difference stays inside the band) and tau_delta when a gap is supplied.
    """
    if num_initial_states < 2:
        raise ConfigError("memory loss needs at least two initial states")
    streams = TrajectoryStreams(cell_key(seed, eta, num_qubits))
    schedule = CircuitSchedule(num_qubits)
    kraus = KrausPair.for_strength(eta)
    record = TrajectoryRecord(seed=streams.key, eta=eta,
                              num_qubits=num_qubits,
                              code_version=__version__)
    traces = np.empty((num_initial_states, t_max))
    sampled = PureState.random(num_qubits, streams.initial_state_rng(0))
    for t in range(1, t_max + 1):
        sampled = evolve_one_step(sampled, t, eta, streams, record, schedule)
        traces[0, t - 1] = x_magnetization(sampled)
    for i in range(1, num_initial_states):
        state = PureState.random(num_qubits, streams.initial_state_rng(i))
        frame = state.amplitudes[:, None].copy()
        for t, step in enumerate(record.steps, start=1):
            gates = [gate_from_seed(s) for s in step.unitary_seeds]
            frame = apply_unitary_layer(frame, num_qubits,
                                        schedule.bonds_for_step(t), gates)
            frame, _, _ = measurement_sweep(frame, num_qubits, kraus,
                                            uniforms=None,
                                            outcomes=step.outcomes)
            traces[i, t - 1] = x_magnetization(
                PureState(num_qubits, frame[:, 0]))
    diffs = np.max(np.abs(traces[:, None, :] - traces[None, :, :]), axis=(0, 1))
    crossing = _crossing_time(diffs, band)
    report = {
        "eta": eta,
        "num_qubits": num_qubits,
        "band": band,
        "delta": delta,
        "crossing_time": crossing,
        "settled": crossing <= t_max,
    }
    if gap is not None:
        value = gap.gap if isinstance(gap, lyapunov.GapEstimate) else float(gap)
        if value > 0:
            report["tau_delta"] = lyapunov.relaxation_time(value, delta)
        else:
            report["tau_delta"] = None
            report["tau_delta_flag"] = "gap not positive; marker omitted"
    else:
        report["tau_delta"] = None
        report["tau_delta_flag"] = "no gap estimate supplied"
    return traces, record, report


def _crossing_time(diffs: np.ndarray, band: float) -> int:
    """First 1-based step after which diffs stay below band for good."""
    above = np.where(diffs >= band)[0]
    if above.size == 0:
        return 1
    return int(above[-1]) + 2


def _memory_loss_cell(config: ExperimentConfig, out_dir: str, cell) -> None:
    eta, size, seed = cell
    tag = _cell_tag(eta, size, seed)
    traces, record, report = memory_loss_experiment(
        eta, size, config.num_initial_states, config.delta,
        seed, config.t_max, config.band,
    )
    cols = {"step": np.arange(1, config.t_max + 1)}
    for i in range(traces.shape[0]):
        cols[f"x_state_{i}"] = traces[i]
    io.write_csv(os.path.join(out_dir, f"memory_{tag}.csv"), cols,
                 meta={"eta": eta, "num_qubits": size, "seed": seed,
                       "band": config.band})
    io.write_json(os.path.join(out_dir, f"crossing_{tag}.json"),
                  {"kind": "memory_loss_report", **report})
    if config.record_trajectory:
        write_record_jsonl(record, os.path.join(out_dir, f"record_{tag}.jsonl"))


def _purification_cell(config: ExperimentConfig, out_dir: str, cell) -> None:
    eta, size, seed = cell
    series = mixedsim.purification_gap(
        eta, size, cell_key(seed, eta, size),
        t_window=(config.window[0], config.window[1]),
        trajectories=config.trajectories,
        measurement_only=config.measurement_only,
    )
    cols, meta = io.purification_columns(series)
    meta["seed"] = seed
    io.write_csv(
        os.path.join(out_dir, f"purification_{_cell_tag(eta, size, seed)}.csv"),
        cols, meta=meta)


def _pauli_weights_cell(config: ExperimentConfig, out_dir: str, cell) -> None:
    eta, size, seed = cell
    b = 2 if config.b == "auto" else int(config.b)
    hams = lyapunov.spectrum_snapshots(
        eta, size, cell_key(seed, eta, size),
        block_length=b, num_blocks=config.num_blocks,
        keep_last=config.window_hams,
        measurement_only=config.measurement_only,
    )
    profile = analysis.pauli_weight_profile(hams)
    cols, meta = io.pauli_profile_columns(profile)
    meta["seed"] = seed
    io.write_csv(os.path.join(out_dir, f"pauli_{_cell_tag(eta, size, seed)}.csv"),
                 cols, meta=meta)


def _fit_cell(config: ExperimentConfig, out_dir: str, cell) -> None:
    if config.fit_inputs is None:
        raise ConfigError("fit experiment needs fit_inputs")
    if isinstance(config.fit_inputs, str):
        data_by_eta = _collect_gap_artifacts(config.fit_inputs)
    else:
        data_by_eta = {}
        for eta, size, gap in config.fit_inputs:
            data_by_eta.setdefault(float(eta), []).append((int(size), float(gap)))
    for eta in sorted(data_by_eta):
        fit = analysis.fit_gap_extrapolation(
            data_by_eta[eta], config.d,
            sweep_resolution=config.sweep_resolution)
        io.write_json(os.path.join(out_dir, f"fit_eta{eta:g}.json"),
                      io.fit_payload(fit, eta))


def _collect_gap_artifacts(directory: str) -> dict:
    data: dict = {}
    for name in sorted(os.listdir(directory)):
        if not (name.startswith("gap_") and name.endswith(".json")):
            continue
        payload = io.read_json(os.path.join(directory, name))
        data.setdefault(float(payload["eta"]), []).append(
            (int(payload["num_qubits"]), float(payload["gap"])))
    if not data:
        raise ConfigError(f"no gap_*.json artifacts found in {directory}")
    return data


def _oracle_check_cell(config: ExperimentConfig, out_dir: str, cell) -> None:
    etas = np.asarray(config.eta, dtype=float)
    gaps = np.array([analysis.measurement_only_gap(e) if e < 1.0 else np.inf
                     for e in etas])
    io.write_csv(os.path.join(out_dir, "oracle_gaps.csv"),
                 {"eta": etas, "gap": gaps})


_CELL_RUNNERS = {
    "gap": _gap_cell,
    "spectrum": _spectrum_cell,
    "entropy": _entropy_cell,
    "mutual_info": _mutual_info_cell,
    "memory_loss": _memory_loss_cell,
    "purification": _purification_cell,
    "fit": _fit_cell,
    "pauli_weights": _pauli_weights_cell,
    "oracle_check": _oracle_check_cell,
}

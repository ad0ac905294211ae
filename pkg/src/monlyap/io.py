"""Artifact serialization: CSV for series data, JSON for estimates and fits.

Every floating-point value is written with %.17g, which round-trips
float64 exactly, and every reader is the inverse of its writer so that
parse(write(x)) == x can be asserted file by file. No timestamps anywhere:
identical runs must produce identical bytes.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np

from .analysis import GapFitResult, PauliWeightProfile
from .lyapunov import EffectiveHamiltonian, GapEstimate
from .mixedsim import PurificationSeries, TrajectoryPurification


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return "%.17g" % float(x)


def _parse_meta_value(raw: str):
    if raw == "true":
        return True
    if raw == "false":
        return False
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        return raw


def write_csv(path, columns: dict[str, np.ndarray],
              meta: dict | None = None) -> None:
    """Delimited table with '# key = value' metadata lines before the header."""
    names = list(columns)
    rows = zip(*(np.asarray(columns[n]) for n in names))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if meta:
            for key in sorted(meta):
                fh.write(f"# {key} = {fmt(meta[key])}\n")
        writer = csv.writer(fh)
        writer.writerow(names)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def read_csv(path):
    """Returns (columns, meta); numeric columns come back as float arrays."""
    meta: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            key, _, raw = line[1:].partition("=")
            meta[key.strip()] = _parse_meta_value(raw.strip())
        elif line:
            body.append(line)
    if not body:
        raise ValueError(f"{path}: no header row")
    reader = csv.reader(body)
    names = next(reader)
    raw_cols = {n: [] for n in names}
    for row in reader:
        if len(row) != len(names):
            raise ValueError(f"{path}: ragged row {row!r}")
        for n, v in zip(names, row):
            raw_cols[n].append(v)
    columns = {}
    for n, vals in raw_cols.items():
        try:
            columns[n] = np.array([float(v) for v in vals])
        except ValueError:
            columns[n] = np.array(vals)
    return columns, meta


def write_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def read_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# typed payloads
# ---------------------------------------------------------------------------

def gap_estimate_payload(est: GapEstimate) -> dict:
    return {
        "kind": "gap_estimate",
        "eta": est.eta,
        "num_qubits": est.num_qubits,
        "seed": est.seed,
        "gap": est.gap,
        "std": est.std,
        "exponents": [float(x) for x in est.exponents],
        "exponent_std": [float(x) for x in est.exponent_std],
        "blocks_used": est.blocks_used,
        "block_length": est.block_length,
        "window_blocks": est.window_blocks,
        "threshold": est.threshold,
        "total_steps": est.total_steps,
        "converged": est.converged,
        "measurement_only": est.measurement_only,
    }


def gap_estimate_from_payload(payload: dict) -> GapEstimate:
    return GapEstimate(
        eta=payload["eta"], num_qubits=payload["num_qubits"],
        gap=payload["gap"], std=payload["std"],
        blocks_used=payload["blocks_used"], converged=payload["converged"],
        exponents=np.array(payload["exponents"]),
        exponent_std=np.array(payload["exponent_std"]),
        block_length=payload["block_length"],
        window_blocks=payload["window_blocks"],
        threshold=payload["threshold"], total_steps=payload["total_steps"],
        seed=payload["seed"], measurement_only=payload["measurement_only"],
    )


def spectrum_payload(ham: EffectiveHamiltonian, seed: int,
                     width_check=None) -> dict:
    payload = {
        "kind": "effective_hamiltonian_spectrum",
        "eta": ham.eta,
        "num_qubits": ham.num_qubits,
        "time": ham.time,
        "block_length": ham.block_length,
        "seed": seed,
        "spectrum": [float(x) for x in ham.spectrum],
    }
    if width_check is not None:
        payload["width"] = width_check.width
        payload["width_bound"] = width_check.bound
        payload["width_bound_satisfied"] = width_check.satisfied
    return payload


def fit_payload(fit: GapFitResult, eta: float) -> dict:
    return {
        "kind": "gap_fit",
        "eta": eta,
        "gap_inf": fit.gap_inf,
        "alpha": fit.alpha,
        "beta": fit.beta,
        "theta_min": fit.theta_min,
        "err_lo": fit.err_lo,
        "err_hi": fit.err_hi,
        "phase": fit.phase,
        "weight_factor": fit.weight_factor,
        "inputs": [[int(L), float(g)] for L, g in fit.inputs],
    }


def pauli_profile_columns(profile: PauliWeightProfile):
    r = np.arange(profile.num_qubits)
    cols = {
        "r": r,
        "W_x": profile.weights[0],
        "W_y": profile.weights[1],
        "W_z": profile.weights[2],
    }
    meta = {
        "eta": profile.eta,
        "num_qubits": profile.num_qubits,
        "time": profile.time,
        "block_length": profile.block_length,
        "num_averaged": profile.num_averaged,
    }
    return cols, meta


def purification_columns(series: PurificationSeries):
    tid, ts, l1, l2, gap = [], [], [], [], []
    for tr in series.trajectories:
        tid.append(np.full(tr.times.size, tr.trajectory_id))
        ts.append(tr.times)
        l1.append(tr.lambda_1)
        l2.append(tr.lambda_2)
        gap.append(tr.gap_t)
    cols = {
        "trajectory_id": np.concatenate(tid),
        "t": np.concatenate(ts),
        "lambda_1": np.concatenate(l1),
        "lambda_2": np.concatenate(l2),
        "gap_t": np.concatenate(gap),
    }
    meta = {
        "eta": series.eta,
        "num_qubits": series.num_qubits,
        "window_start": series.window[0],
        "window_end": series.window[1],
        "mean_gap": series.mean_gap,
        "stderr": series.stderr,
    }
    return cols, meta


def purification_from_csv(path) -> PurificationSeries:
    cols, meta = read_csv(path)
    series = PurificationSeries(
        eta=float(meta["eta"]), num_qubits=int(meta["num_qubits"]),
        window=(int(meta["window_start"]), int(meta["window_end"])),
    )
    ids = cols["trajectory_id"].astype(int)
    for tid in np.unique(ids):
        sel = ids == tid
        series.trajectories.append(TrajectoryPurification(
            trajectory_id=int(tid),
            times=cols["t"][sel].astype(int),
            lambda_1=cols["lambda_1"][sel],
            lambda_2=cols["lambda_2"][sel],
            gap_t=cols["gap_t"][sel],
        ))
    return series


@dataclass
class Manifest:
    config: dict
    status: str
    error: str | None
    artifacts: list[dict]

    def payload(self) -> dict:
        return {
            "kind": "manifest",
            "config": self.config,
            "status": self.status,
            "error": self.error,
            "artifacts": sorted(self.artifacts, key=lambda a: a["path"]),
        }


def build_manifest(out_dir, config: dict, status: str = "ok",
                   error: str | None = None,
                   skip={"manifest.json"}) -> Manifest:
    artifacts = []
    for root, _, files in os.walk(out_dir):
        for name in files:
            full = os.path.join(root, name)
            rel = os.path.relpath(full, out_dir).replace(os.sep, "/")
            if rel in skip:
                continue
            artifacts.append({
                "path": rel,
                "sha256": sha256_file(full),
                "bytes": os.path.getsize(full),
            })
    return Manifest(config=config, status=status, error=error,
                    artifacts=artifacts)
